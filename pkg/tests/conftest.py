"""Shared independent oracles for the test suite.

These deliberately re-derive results through different computational paths
than the library (explicit loops, projected gradient descent, finite
differences) so agreement is evidence, not tautology.
"""

from __future__ import annotations

import numpy as np
import pytest

from fedres.core import Sample, loss


def ball_project_oracle(v: np.ndarray, radius: float) -> np.ndarray:
    n = np.sqrt(float(np.sum(v * v)))
    if n <= radius:
        return v.copy()
    return v * (radius / n)


def pgd_ls_oracle(rows: np.ndarray, targets: np.ndarray, radius: float,
                  iters: int = 20000) -> tuple[np.ndarray, float]:
    """Projected gradient descent on ||Aw - b||^2 over the radius ball.

    Returns (w, objective). Used as an upper-bound oracle: an exact solver
    must never do worse than this.
    """
    n, d = rows.shape
    if n == 0:
        return np.zeros(d), 0.0
    lam = float(np.linalg.eigvalsh(rows.T @ rows).max())
    step = 1.0 / (2.0 * lam) if lam > 0 else 1.0
    w = np.zeros(d)
    for _ in range(iters):
        grad = 2.0 * rows.T @ (rows @ w - targets)
        w = ball_project_oracle(w - step * grad, radius)
    return w, float(np.sum((rows @ w - targets) ** 2))


def ls_objective(rows: np.ndarray, targets: np.ndarray, w: np.ndarray) -> float:
    return float(np.sum((rows @ w - targets) ** 2))


def finite_diff_grads(wg: np.ndarray, wl: np.ndarray, s: Sample,
                      step: float = 1e-5) -> tuple[np.ndarray, np.ndarray]:
    """Central finite differences of the squared loss in both blocks."""

    def shift(v, j, h):
        out = v.copy()
        out[j] += h
        return out

    gg = np.array(
        [
            (loss(shift(wg, j, step), wl, s) - loss(shift(wg, j, -step), wl, s)) / (2 * step)
            for j in range(len(wg))
        ]
    )
    gl = np.array(
        [
            (loss(wg, shift(wl, j, step), s) - loss(wg, shift(wl, j, -step), s)) / (2 * step)
            for j in range(len(wl))
        ]
    )
    return gg, gl


def random_instance(rng: np.random.Generator, d_global: int = 3, d_local: int = 2):
    wg = rng.normal(0, 1, d_global)
    wl = rng.normal(0, 1, d_local)
    s = Sample(rng.normal(0, 1, d_global), rng.normal(0, 1, d_local), float(rng.normal(0, 2)))
    return wg, wl, s


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
