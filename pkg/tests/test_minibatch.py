import numpy as np
import pytest

from fedres.core import HyperParams, Sample, grad_global, grad_local, loss
from fedres.engine import run_fedres_sgd
from fedres.errors import ConfigError
from fedres.minibatch import aggregate_grads, aggregate_loss, run_batched

from test_sgd import dataset_from_streams, scripted_stream


class TestAggregation:
    def test_singleton_batch_equals_pointwise(self, rng):
        wg, wl = rng.normal(0, 1, 2), rng.normal(0, 1, 2)
        s = Sample(rng.normal(0, 1, 2), rng.normal(0, 1, 2), 1.0)
        assert aggregate_loss([s], wg, wl) == loss(wg, wl, s)
        gg, gl = aggregate_grads([s], wg, wl)
        assert np.all(gg == grad_global(wg, wl, s))
        assert np.all(gl == grad_local(wg, wl, s))

    def test_duplicated_sample_equals_single(self, rng):
        wg, wl = rng.normal(0, 1, 2), rng.normal(0, 1, 2)
        s = Sample(rng.normal(0, 1, 2), rng.normal(0, 1, 2), 0.5)
        assert aggregate_loss([s, s], wg, wl) == pytest.approx(loss(wg, wl, s), rel=1e-15)

    def test_batch_of_four_matches_direct_mean(self, rng):
        wg, wl = rng.normal(0, 1, 3), rng.normal(0, 1, 2)
        batch = [
            Sample(rng.normal(0, 1, 3), rng.normal(0, 1, 2), float(rng.normal()))
            for _ in range(4)
        ]
        assert aggregate_loss(batch, wg, wl, batch_size=4) == pytest.approx(
            sum(loss(wg, wl, s) for s in batch) / 4.0, rel=1e-12
        )
        gg, gl = aggregate_grads(batch, wg, wl)
        assert gg == pytest.approx(sum(grad_global(wg, wl, s) for s in batch) / 4.0, rel=1e-12)
        assert gl == pytest.approx(sum(grad_local(wg, wl, s) for s in batch) / 4.0, rel=1e-12)

    def test_wrong_length_rejected(self, rng):
        s = Sample(np.ones(1), np.ones(1), 1.0)
        with pytest.raises(ConfigError):
            aggregate_loss([s, s], np.ones(1), np.ones(1), batch_size=3)
        with pytest.raises(ConfigError):
            aggregate_loss([], np.ones(1), np.ones(1))


class TestBatchedRuns:
    def test_batch_size_one_is_bit_identical_to_unbatched(self, rng):
        streams = [scripted_stream(rng, 12, 2, 2) for _ in range(2)]
        ds = dataset_from_streams(streams, 2, [2, 2])
        hp = HyperParams(eta_global=0.1, eta_local=0.1)
        a = run_batched(ds, (1, 2), hp, 12, 1, 0)
        b = run_fedres_sgd(ds, (1, 2), hp, 12, 0)
        assert len(a.traces) == len(b.traces)
        assert all(
            x.loss == y.loss and x.prediction == y.prediction for x, y in zip(a.traces, b.traces)
        )
        assert np.all(a.final_global == b.final_global)

    def test_full_horizon_batch_is_one_full_gradient_step(self, rng):
        rounds = 8
        streams = [scripted_stream(rng, rounds, 2, 2)]
        ds = dataset_from_streams(streams, 2, [2])
        eta = 0.2
        hp = HyperParams(radius=50.0, eta_global=eta, eta_local=eta)
        res = run_batched(ds, 0, hp, rounds, rounds, 0)
        assert res.rounds == 1 and len(res.traces) == 1

        batch = streams[0]
        zeros = np.zeros(2)
        gl = np.mean(np.stack([grad_local(zeros, zeros, s) for s in batch]), axis=0)
        wl = zeros - eta * gl
        gg = np.mean(
            np.stack(
                [2.0 * (float(zeros @ s.x_global) + float(wl @ s.x_local) - s.y) * s.x_global for s in batch]
            ),
            axis=0,
        )
        assert np.all(res.final_locals[0] == wl)
        assert np.all(res.final_global == -eta * gg)

    def test_fetch_count_is_rounds_over_batch(self, rng):
        rounds = 24
        streams = [scripted_stream(rng, rounds, 2, 1) for _ in range(2)]
        ds = dataset_from_streams(streams, 2, [1, 1])
        hp = HyperParams(eta_global=0.1, eta_local=0.1)
        for b in (1, 2, 4, 8):
            res = run_batched(ds, (3, 2), hp, rounds, b, 0)
            assert res.fetch_counts == [rounds // b, rounds // b]

    def test_indivisible_batch_rejected(self, rng):
        ds = dataset_from_streams([scripted_stream(rng, 10, 1, 1)], 1, [1])
        with pytest.raises(ConfigError):
            run_batched(ds, 0, HyperParams(), 10, 3, 0)

    def test_batched_trace_carries_aggregated_loss(self, rng):
        rounds, b = 8, 4
        streams = [scripted_stream(rng, rounds, 2, 2)]
        ds = dataset_from_streams(streams, 2, [2])
        hp = HyperParams(eta_global=0.05, eta_local=0.05)
        res = run_batched(ds, 0, hp, rounds, b, 0)
        for tr in res.traces:
            assert isinstance(tr.prediction, tuple) and len(tr.prediction) == b
            per_sample = [(y - p) ** 2 for y, p in zip(tr.label, tr.prediction)]
            assert tr.loss == pytest.approx(float(np.mean(per_sample)), rel=1e-15)
