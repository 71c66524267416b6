"""Run records shared by every learner."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np


@dataclass(frozen=True)
class RoundTrace:
    """Per-(round, client) record of what the deployed pair did.

    For batched rounds, loss is the batch-aggregated (mean) loss and
    prediction/label/sample hold the b per-sample values as tuples.
    Bandit runs additionally carry the chosen action, the realized reward,
    and the full context set of the round.
    """

    round: int
    client_id: int
    loss: float
    prediction: float | tuple
    label: float | tuple
    sample: Any
    action: int | None = None
    reward: float | None = None
    contexts: tuple | None = None


@dataclass
class RunResult:
    traces: list[RoundTrace]
    final_global: np.ndarray
    final_locals: list[np.ndarray]
    fetch_counts: list[int]
    rounds: int
    clients: int
    batch_size: int = 1

    def mean_loss(self) -> float:
        return float(np.mean([tr.loss for tr in self.traces]))

    def terminal_mean_loss(self, fraction: float = 0.1) -> float:
        """Mean loss over the trailing fraction of rounds, all clients."""
        cutoff = self.rounds - max(1, int(self.rounds * fraction))
        tail = [tr.loss for tr in self.traces if tr.round > cutoff]
        return float(np.mean(tail))
