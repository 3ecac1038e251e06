"""Scores of a learned network on held-out data (lower is better for both)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .inference import log_likelihood, target_posteriors
from .network import Network, NetworkError


@dataclass(frozen=True)
class EvalResult:
    avg_neg_log_likelihood: float
    case_count: int
    target: str | None = None
    avg_quadratic_loss: float | None = None

    def format(self) -> str:
        lines = [
            f"cases\t{self.case_count}",
            f"avg_neg_log_likelihood\t{self.avg_neg_log_likelihood!r}",
        ]
        if self.target is not None:
            lines.append(f"avg_quadratic_loss[{self.target}]\t{self.avg_quadratic_loss!r}")
        return "\n".join(lines)


def avg_neg_log_likelihood(net: Network, test: Dataset) -> float:
    if len(test) == 0:
        return 0.0
    return -log_likelihood(net, test) / len(test)


def quadratic_losses(net: Network, test: Dataset, target: str) -> np.ndarray:
    """Per-case Brier score of the posterior over ``target`` given the case's other observations."""
    if target not in test.columns:
        raise NetworkError(f"target {target!r} is not a column of the test data")
    observed = test.values[:, test.columns.index(target)]
    missing = np.flatnonzero(observed < 0)
    if missing.size:
        raise NetworkError(f"case {int(missing[0])} does not observe the target {target!r}")
    post = target_posteriors(net, test, target)
    truth = np.zeros_like(post)
    truth[np.arange(len(test)), observed] = 1.0
    return ((post - truth) ** 2).sum(axis=1)


def avg_quadratic_loss(net: Network, test: Dataset, target: str) -> float:
    if len(test) == 0:
        return 0.0
    return float(quadratic_losses(net, test, target).mean())


def evaluate(net: Network, test: Dataset, target: str | None = None) -> EvalResult:
    return EvalResult(
        avg_neg_log_likelihood=avg_neg_log_likelihood(net, test),
        case_count=len(test),
        target=target,
        avg_quadratic_loss=avg_quadratic_loss(net, test, target) if target is not None else None,
    )
