"""Round-indexed message transport with fixed per-client delays.

Uplink: a payload sent by client i at round t is delivered to the server at
round t + alpha[i], FIFO per client. Downlink: the server publishes one
global-model snapshot per round before any client fetches; a fetch by
client i at round t returns the snapshot of round t - beta[i], with every
round index <= 0 resolving to the initial model (warmup convention).

A channel instance is confined to one single-threaded simulation run.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .errors import ConfigError, InvariantError


@dataclass(frozen=True)
class DelayConfig:
    """Per-client uplink (alpha) and downlink (beta) delays, in rounds."""

    alpha: tuple[int, ...]
    beta: tuple[int, ...]

    def __post_init__(self):
        if len(self.alpha) != len(self.beta):
            raise ConfigError("alpha and beta must have one entry per client")
        if any(a < 0 or int(a) != a for a in self.alpha + self.beta):
            raise ConfigError(f"delays must be nonnegative integers, got {self}")

    @classmethod
    def uniform(cls, clients: int, alpha: int = 0, beta: int = 0) -> "DelayConfig":
        return cls(alpha=(alpha,) * clients, beta=(beta,) * clients)

    @property
    def clients(self) -> int:
        return len(self.alpha)

    @property
    def round_trips(self) -> tuple[int, ...]:
        return tuple(a + b for a, b in zip(self.alpha, self.beta))

    @property
    def is_uniform(self) -> bool:
        return len(set(self.alpha)) <= 1 and len(set(self.beta)) <= 1

    def batched(self, batch_size: int) -> "DelayConfig":
        """Delays converted to batch rounds: ceil(alpha/b), ceil(beta/b)."""
        b = batch_size
        return DelayConfig(
            alpha=tuple(-(-a // b) for a in self.alpha),
            beta=tuple(-(-x // b) for x in self.beta),
        )


class DelayedChannel:
    """FIFO delivery queues plus a bounded ring of global-model snapshots.

    The snapshot ring keeps the last max(alpha)+max(beta)+1 rounds: old
    enough for the slowest fetch (age <= max beta) and for the server to
    pair an arriving message sent at s with the snapshot of s - beta[i]
    (age <= max alpha + max beta). The initial model is kept forever.
    """

    def __init__(self, delays: DelayConfig, initial_global: np.ndarray):
        self.delays = delays
        self.initial_global = np.asarray(initial_global, dtype=float)
        self._snapshots: dict[int, np.ndarray] = {}
        self._uplink: dict[int, list[tuple[int, int, Any]]] = {}
        self._seq = 0
        self._last_published = 0
        self._last_received = 0
        self._keep = max(delays.alpha, default=0) + max(delays.beta, default=0) + 1
        self.fetch_counts = [0] * delays.clients

    # -- uplink ---------------------------------------------------------

    def uplink_send(self, client_id: int, t: int, payload: Any) -> None:
        if not 0 <= client_id < self.delays.clients:
            raise ConfigError(f"unknown client {client_id}")
        if t < 1:
            raise InvariantError(f"uplink_send at round {t} < 1")
        deliver_at = t + self.delays.alpha[client_id]
        self._seq += 1
        self._uplink.setdefault(deliver_at, []).append((client_id, self._seq, payload))

    def uplink_receive(self, t: int) -> list[Any]:
        """All payloads due at round t, ascending client id, FIFO within one.

        Must be called with strictly increasing rounds; a repeated round
        would silently double-deliver, so it is a hard error.
        """
        if t <= self._last_received:
            raise InvariantError(
                f"uplink_receive({t}) after round {self._last_received} was already received"
            )
        self._last_received = t
        due = self._uplink.pop(t, [])
        due.sort(key=lambda rec: (rec[0], rec[1]))
        return [payload for _, _, payload in due]

    # -- downlink -------------------------------------------------------

    def publish_global(self, t: int, wg: np.ndarray) -> None:
        """Record the round-t snapshot; exactly once per round, in order."""
        if t != self._last_published + 1:
            raise InvariantError(
                f"publish_global({t}): expected round {self._last_published + 1}"
            )
        self._last_published = t
        self._snapshots[t] = wg
        stale = t - self._keep
        if stale in self._snapshots:
            del self._snapshots[stale]

    def snapshot(self, r: int) -> np.ndarray:
        """Snapshot of round r; any r <= 0 resolves to the initial model."""
        if r <= 0:
            return self.initial_global
        try:
            return self._snapshots[r]
        except KeyError:
            raise InvariantError(f"snapshot for round {r} is missing (evicted or never published)")

    def fetch_global(self, client_id: int, t: int) -> np.ndarray:
        if not 0 <= client_id < self.delays.clients:
            raise ConfigError(f"unknown client {client_id}")
        if self._last_published < t:
            raise InvariantError(f"fetch_global at round {t} before publish_global({t})")
        self.fetch_counts[client_id] += 1
        return self.snapshot(t - self.delays.beta[client_id])

    @property
    def pending_payloads(self) -> int:
        return sum(len(v) for v in self._uplink.values())


def as_delay_config(delays: DelayConfig | Sequence[int] | int | None, clients: int) -> DelayConfig:
    """Coerce scalar / (alpha, beta) pair / DelayConfig into a DelayConfig."""
    if delays is None:
        return DelayConfig.uniform(clients)
    if isinstance(delays, DelayConfig):
        if delays.clients != clients:
            raise ConfigError(f"delay config has {delays.clients} entries for {clients} clients")
        return delays
    if isinstance(delays, int):
        return DelayConfig.uniform(clients, delays, delays)
    alpha, beta = delays
    if isinstance(alpha, int):
        alpha = (alpha,) * clients
    if isinstance(beta, int):
        beta = (beta,) * clients
    return DelayConfig(alpha=tuple(alpha), beta=tuple(beta))
