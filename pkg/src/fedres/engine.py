"""Delayed-gradient SGD over the residual model: client loop, server loop,
and the composed round-by-round system.

The default "aligned" update keeps every gradient - client side or server
side - evaluated at a pair (global snapshot of round s - beta_i, local
model of round s) for a single round s, by making the client apply its own
gradient one full round trip late:

    client, round t:  wl <- proj(wl - eta_i * grad_local at round s = t - alpha_i - beta_i)
    server, round t:  wg <- proj(wg - eta * sum_i grad_global at round s = t - alpha_i)

The server reconstructs its gradients from uplink records (global features,
local prediction, label); local models never leave the client. Warmup
rounds (s <= 0) skip the step. With zero round-trip delay the client step
degenerates to the current round's own gradient taken at the just-fetched
snapshot and the pre-step local model.

Two documented-but-discouraged update rules are available behind the
variant flag for A/B runs: "misaligned" (server differentiates at its own
current global model; client applies the current round's gradient with no
round-trip lag) and "asymmetric" (server aligned, client undelayed). Both
predict with the pre-step local model, matching their update indexing.

One system instance is single-threaded; run many seeds in parallel with
independent instances.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .channel import DelayConfig, DelayedChannel, as_delay_config
from .core import SQUARED_LOSS, HyperParams, ResidualMessage, Sample, project_ball
from .errors import ConfigError, InvariantError
from .results import RoundTrace, RunResult
from .rng import substream

VARIANTS = ("aligned", "misaligned", "asymmetric")


def _as_batch(datum) -> tuple[Sample, ...]:
    return (datum,) if isinstance(datum, Sample) else tuple(datum)


def _batch_message(wl: np.ndarray, batch: tuple[Sample, ...], client_id: int, t: int):
    if len(batch) == 1:
        s = batch[0]
        return ResidualMessage(s.x_global, float(wl @ s.x_local), s.y, client_id, t)
    return ResidualMessage(
        np.stack([s.x_global for s in batch]),
        np.array([float(wl @ s.x_local) for s in batch]),
        np.array([s.y for s in batch]),
        client_id,
        t,
    )


def _local_grad(loss_fns, gsnap: np.ndarray, wl: np.ndarray, batch: tuple[Sample, ...]):
    if len(batch) == 1:
        return loss_fns.grad_local(gsnap, wl, batch[0])
    rows = [loss_fns.grad_local(gsnap, wl, s) for s in batch]
    return np.mean(np.stack(rows), axis=0)


def _global_grad_from_message(loss_fns, snap: np.ndarray, m: ResidualMessage):
    if np.ndim(m.y) == 0:
        return loss_fns.grad_global_from_message(snap, m)
    rows = [
        loss_fns.grad_global_from_message(
            snap,
            ResidualMessage(m.x_global[k], m.local_prediction[k], m.y[k], m.client_id, m.sent_at),
        )
        for k in range(len(m.y))
    ]
    return np.mean(np.stack(rows), axis=0)


class SgdClient:
    """Per-client state: local model plus the round-trip history window."""

    def __init__(
        self,
        client_id: int,
        d_local: int,
        eta: float,
        radius: float,
        alpha: int,
        beta: int,
        variant: str,
        loss_fns,
        init_local: np.ndarray | None = None,
    ):
        self.client_id = client_id
        self.eta = eta
        self.radius = radius
        self.alpha = alpha
        self.beta = beta
        self.tau = alpha + beta
        self.variant = variant
        self.loss_fns = loss_fns
        self.wl = np.zeros(d_local) if init_local is None else np.asarray(init_local, float).copy()
        # round -> (fetched snapshot, prediction-time local model, datum)
        self.history: dict[int, tuple] = {}
        self.grad_provenance: list[tuple[int, int, int]] | None = None

    def _delayed_step(self, t: int, fetched: np.ndarray, batch: tuple[Sample, ...]) -> None:
        s = t - self.tau
        if s < 1:
            return
        if s == t:
            gsnap, wl_s, datum_s = fetched, self.wl, batch
        else:
            try:
                gsnap, wl_s, datum_s = self.history[s]
            except KeyError:
                raise InvariantError(
                    f"client {self.client_id} lost history for round {s} at round {t}"
                )
        if self.grad_provenance is not None:
            self.grad_provenance.append((s - self.beta, s, self.client_id))
        grad = _local_grad(self.loss_fns, gsnap, wl_s, datum_s)
        self.wl = project_ball(self.wl - self.eta * grad, self.radius)

    def _current_step(self, t: int, fetched: np.ndarray, batch: tuple[Sample, ...]) -> None:
        if self.grad_provenance is not None:
            self.grad_provenance.append((t - self.beta, t, self.client_id))
        grad = _local_grad(self.loss_fns, fetched, self.wl, batch)
        self.wl = project_ball(self.wl - self.eta * grad, self.radius)

    def round(self, t: int, fetched: np.ndarray, datum) -> tuple[RoundTrace, ResidualMessage]:
        batch = _as_batch(datum)
        if self.variant == "aligned":
            self._delayed_step(t, fetched, batch)
            if self.tau > 0:
                self.history[t] = (fetched, self.wl, batch)
                self.history.pop(t - self.tau - 1, None)
            trace = self._predict(t, fetched, batch)
            msg = _batch_message(self.wl, batch, self.client_id, t)
        else:
            trace = self._predict(t, fetched, batch)
            msg = _batch_message(self.wl, batch, self.client_id, t)
            self._current_step(t, fetched, batch)
        return trace, msg

    def _predict(self, t: int, fetched: np.ndarray, batch: tuple[Sample, ...]) -> RoundTrace:
        preds = [float(fetched @ s.x_global) + float(self.wl @ s.x_local) for s in batch]
        losses = [(s.y - p) ** 2 for s, p in zip(batch, preds)]
        if len(batch) == 1:
            return RoundTrace(t, self.client_id, losses[0], preds[0], batch[0].y, batch[0])
        return RoundTrace(
            t,
            self.client_id,
            float(np.mean(losses)),
            tuple(preds),
            tuple(s.y for s in batch),
            batch,
        )

    def prediction_pair(self, fetched: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return fetched, self.wl


class SgdServer:
    """Global model plus one aggregated projected step per round."""

    def __init__(self, d_global: int, eta: float, radius: float, variant: str, loss_fns,
                 init_global: np.ndarray | None = None):
        self.eta = eta
        self.radius = radius
        self.variant = variant
        self.loss_fns = loss_fns
        self.wg = np.zeros(d_global) if init_global is None else np.asarray(init_global, float).copy()
        self.grad_provenance: list[tuple[int, int]] | None = None

    def round(self, t: int, messages: list[ResidualMessage], channel: DelayedChannel) -> np.ndarray:
        if not messages:
            return self.wg
        gsum = np.zeros_like(self.wg)
        beta = channel.delays.beta
        for m in messages:
            if self.variant == "misaligned":
                snap = self.wg
                if self.grad_provenance is not None:
                    self.grad_provenance.append((t, m.sent_at, m.client_id))
            else:
                snap = channel.snapshot(m.sent_at - beta[m.client_id])
                if self.grad_provenance is not None:
                    self.grad_provenance.append(
                        (m.sent_at - beta[m.client_id], m.sent_at, m.client_id)
                    )
            gsum += _global_grad_from_message(self.loss_fns, snap, m)
        self.wg = project_ball(self.wg - self.eta * gsum, self.radius)
        return self.wg


class SgdSystem:
    """Clients, server and channel composed over a shared round clock.

    One call to run_round advances every participant by one round:
    publish the current global snapshot, run each client (fetch, step,
    predict, send) in ascending id order, then deliver due uplink messages
    and take the server's aggregated step.
    """

    def __init__(
        self,
        d_global: int,
        d_locals: Sequence[int],
        delays: DelayConfig,
        hyper: HyperParams,
        *,
        variant: str = "aligned",
        init_global: np.ndarray | None = None,
        init_locals: Sequence[np.ndarray] | None = None,
        loss_fns=SQUARED_LOSS,
        record_provenance: bool = False,
    ):
        if variant not in VARIANTS:
            raise ConfigError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
        clients = len(d_locals)
        if delays.clients != clients:
            raise ConfigError(f"{delays.clients} delay entries for {clients} clients")
        self.delays = delays
        self.server = SgdServer(d_global, hyper.eta_global, hyper.radius, variant, loss_fns,
                                init_global)
        self.clients = [
            SgdClient(
                i,
                d_locals[i],
                hyper.eta_for(i, clients),
                hyper.radius,
                delays.alpha[i],
                delays.beta[i],
                variant,
                loss_fns,
                None if init_locals is None else init_locals[i],
            )
            for i in range(clients)
        ]
        self.channel = DelayedChannel(delays, self.server.wg)
        self.t = 0
        self.last_fetched = [self.channel.initial_global] * clients
        if record_provenance:
            self.server.grad_provenance = []
            for c in self.clients:
                c.grad_provenance = []

    def run_round(self, data_by_client: Sequence) -> list[RoundTrace]:
        if len(data_by_client) != len(self.clients):
            raise ConfigError("one datum per client per round is required")
        t = self.t = self.t + 1
        self.channel.publish_global(t, self.server.wg)
        traces = []
        for client, datum in zip(self.clients, data_by_client):
            fetched = self.channel.fetch_global(client.client_id, t)
            self.last_fetched[client.client_id] = fetched
            trace, msg = client.round(t, fetched, datum)
            self.channel.uplink_send(client.client_id, t, msg)
            traces.append(trace)
        self.server.round(t, self.channel.uplink_receive(t), self.channel)
        return traces

    def prediction_pair(self, client_id: int) -> tuple[np.ndarray, np.ndarray]:
        """The pair the client would predict with right now."""
        return self.last_fetched[client_id], self.clients[client_id].wl

    def alignment_offsets(self) -> list[tuple[int, int, int]]:
        """(global_round, local_round, owning client's beta) per gradient."""
        out = []
        for c in self.clients:
            for g, l, cid in c.grad_provenance or []:
                out.append((g, l, self.delays.beta[cid]))
        for g, l, cid in self.server.grad_provenance or []:
            out.append((g, l, self.delays.beta[cid]))
        return out


def build_streams(dataset, rounds: int, seed: int) -> list[list[Sample]]:
    return [
        dataset.round_stream(i, rounds, substream(seed, f"stream-{i}"))
        for i in range(dataset.n_clients)
    ]


def _batched_streams(streams: list[list[Sample]], batch_size: int, rounds: int):
    if batch_size == 1:
        return streams, rounds
    if rounds % batch_size != 0:
        raise ConfigError(f"batch size {batch_size} does not divide horizon {rounds}")
    batched = [
        [tuple(st[(n - 1) * batch_size : n * batch_size]) for n in range(1, rounds // batch_size + 1)]
        for st in streams
    ]
    return batched, rounds // batch_size


def run_fedres_sgd(
    dataset,
    delays,
    hyper: HyperParams,
    rounds: int,
    seed: int,
    *,
    variant: str = "aligned",
    batch_size: int = 1,
    init_global: np.ndarray | None = None,
    init_locals: Sequence[np.ndarray] | None = None,
    record_provenance: bool = False,
) -> RunResult:
    """Run the composed system for the given horizon and return its trace.

    With batch_size b > 1 the horizon is consumed in T/b batch rounds:
    models update once per batch on batch-mean gradients, the global model
    is fetched once per batch, and each trace record carries the
    batch-aggregated loss. Delays are converted to batch rounds as
    ceil(alpha/b), ceil(beta/b).
    """
    if rounds < 1:
        raise ConfigError(f"rounds must be >= 1, got {rounds}")
    delays = as_delay_config(delays, dataset.n_clients)
    streams = build_streams(dataset, rounds, seed)
    streams, n_rounds = _batched_streams(streams, batch_size, rounds)
    system = SgdSystem(
        dataset.d_global,
        dataset.d_locals,
        delays.batched(batch_size),
        hyper,
        variant=variant,
        init_global=init_global,
        init_locals=init_locals,
        record_provenance=record_provenance,
    )
    traces: list[RoundTrace] = []
    for n in range(n_rounds):
        traces.extend(system.run_round([st[n] for st in streams]))
    result = RunResult(
        traces=traces,
        final_global=system.server.wg,
        final_locals=[c.wl for c in system.clients],
        fetch_counts=list(system.channel.fetch_counts),
        rounds=n_rounds,
        clients=dataset.n_clients,
        batch_size=batch_size,
    )
    result.system = system  # type: ignore[attr-defined]  # exposes provenance to tests
    return result
