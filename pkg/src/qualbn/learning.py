"""Parameter learning: EM, APN gradient ascent, and their constrained variants.

``em``      plain EM (expected counts, then normalise)
``apn``     projected gradient ascent on the log likelihood
``apn-qc``  gradient ascent on ``log likelihood - w * violation``
``em-qc``   an EM update followed by a violation-reducing gradient step
            computed at the post-EM point

Every learner keeps each CPT row on the simplex with entries in
``[min_prob, 1 - min_prob]``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .constraints import InequalitySystem
from .dataset import Dataset
from .inference import expected_counts, log_likelihood
from .network import ConstraintSet, Network, NetworkError

ALGORITHMS = ("em", "apn", "em-qc", "apn-qc")
CURVE_COLUMNS = ("iteration", "train_nll_per_case", "test_nll_per_case", "violation")


class LearningError(RuntimeError):
    """A learning run failed; ``trace`` holds everything recorded before the failure."""

    def __init__(self, message: str, trace: RunTrace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class LearnConfig:
    algorithm: str = "em"
    iterations: int = 100
    penalty_weight: float = 2.0
    step_size: float = 0.05
    min_prob: float = 1e-6
    seed: int = 0
    record_every: int = 1
    record_parameters: bool = False
    # em-qc: multiply the rescaled violation step by the penalty weight
    weight_scales_correction: bool = True

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.record_every < 1:
            raise ValueError("record_every must be positive")
        if not self.penalty_weight >= 0 or not self.step_size >= 0:
            raise ValueError("penalty weight and step size must be non-negative")
        if not 0 <= self.min_prob < 0.5:
            raise ValueError("min_prob must lie in [0, 0.5)")

    @property
    def constrained(self) -> bool:
        return self.algorithm.endswith("-qc")


@dataclass
class TraceRow:
    iteration: int
    train_nll_per_case: float
    test_nll_per_case: float | None = None
    violation: float | None = None
    parameters: np.ndarray | None = field(default=None, repr=False)


@dataclass
class RunTrace:
    rows: list[TraceRow] = field(default_factory=list)

    def append(self, row: TraceRow) -> None:
        if self.rows and row.iteration <= self.rows[-1].iteration:
            raise ValueError("trace iterations must increase")
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in self.rows])

    def write_curve(self, path) -> None:
        """Tab-separated curve table, one row per recorded iteration."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
            writer.writerow(CURVE_COLUMNS)
            for r in self.rows:
                writer.writerow([r.iteration] + [_fmt(getattr(r, c)) for c in CURVE_COLUMNS[1:]])


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


# --- simplex helpers ----------------------------------------------------------------


def clamp_rows(table: np.ndarray, min_prob: float) -> np.ndarray:
    """Move each row onto the simplex with every entry at least ``min_prob``.

    Entries below the floor are pinned to it and the rest of the row is
    rescaled to take up the remaining mass, repeating until nothing is below
    the floor.  For an EM row this is the exact box-constrained M-step.
    """
    t = np.array(table, dtype=np.float64)
    n = t.shape[1]
    fixed = ~(t >= min_prob)
    for _ in range(n + 1):
        free = np.where(fixed, 0.0, t)
        mass = free.sum(axis=1, keepdims=True)
        room = 1.0 - min_prob * fixed.sum(axis=1, keepdims=True)
        degenerate = ~(mass > 0)
        scaled = np.where(degenerate, room / np.maximum(n - fixed.sum(axis=1, keepdims=True), 1),
                          free * (room / np.where(degenerate, 1.0, mass)))
        t = np.where(fixed, min_prob, scaled)
        low = (t < min_prob) & ~fixed
        if not low.any():
            break
        fixed |= low
    return t


def random_init(structure: Network, seed: int, min_prob: float = 1e-6) -> Network:
    """Every CPT row drawn uniformly from the simplex (flat Dirichlet), seeded."""
    rng = np.random.default_rng(seed)
    cpts = {}
    for name in structure.names:
        shape = structure.cpt(name).shape if name in structure.cpts else (
            structure.n_configs(name), structure.cardinality(name))
        rows = rng.dirichlet(np.ones(shape[1]), size=shape[0])
        cpts[name] = clamp_rows(rows, min_prob) if min_prob > 0 else rows
    return structure.with_cpts(cpts)


def project_gradient(gradient: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Orthogonal projection onto the tangent space of the row-sum constraints."""
    return {
        name: g - g.mean(axis=1, keepdims=True)
        for name, g in gradient.items()
    }


# --- scores and gradients -------------------------------------------------------------


def penalized_score(net: Network, data: Dataset, cs: ConstraintSet, weight: float) -> float:
    """Log likelihood of the data minus ``weight`` times the total violation."""
    system = InequalitySystem(net, cs)
    return log_likelihood(net, data) - weight * system.total(net)


def apn_unprojected_gradient(net: Network, data: Dataset, min_prob: float = 1e-6) -> dict[str, np.ndarray]:
    """d ln P(D) / d theta_ijk, treating every CPT entry as a free coordinate."""
    return _ll_gradient(net, expected_counts(net, data).counts, min_prob)


def _ll_gradient(net: Network, counts: Mapping[str, np.ndarray], min_prob: float) -> dict[str, np.ndarray]:
    out = {}
    for name in net.names:
        theta = net.cpt(name)
        if np.any(theta < min_prob * (1 - 1e-9)) or np.any(theta <= 0):
            raise NetworkError(f"CPT of {name!r} has entries below the floor {min_prob}")
        out[name] = counts[name] / theta
    return out


# --- single steps -----------------------------------------------------------------


def _em_update(net: Network, data: Dataset, min_prob: float) -> Network:
    counts = expected_counts(net, data).counts
    cpts = {}
    for name in net.names:
        n_ijk = counts[name]
        n_ik = n_ijk.sum(axis=1, keepdims=True)
        theta = np.where(n_ik > 0, n_ijk / np.where(n_ik > 0, n_ik, 1.0), net.cpt(name))
        cpts[name] = clamp_rows(theta, min_prob)
    return net.with_cpts(cpts)


def em_step(net: Network, data: Dataset, min_prob: float = 1e-6) -> Network:
    """One EM iteration: expected counts under ``net``, then row-normalise."""
    return _em_update(net, data, min_prob)


def _apn_update(net: Network, data: Dataset, cfg: LearnConfig, system: InequalitySystem | None) -> Network:
    gradient = _ll_gradient(net, expected_counts(net, data).counts, cfg.min_prob)
    if system is not None:
        v = system.gradient(net)
        gradient = {name: g - cfg.penalty_weight * v[name] for name, g in gradient.items()}
    projected = project_gradient(gradient)
    # step per case so the step size does not depend on the sample size
    rate = cfg.step_size / max(len(data), 1)
    return net.with_cpts({
        name: clamp_rows(net.cpt(name) + rate * projected[name], cfg.min_prob)
        for name in net.names
    })


def apn_step(net: Network, data: Dataset, cfg: LearnConfig = LearnConfig(algorithm="apn")) -> Network:
    return _apn_update(net, data, cfg, None)


def constrained_apn_step(net: Network, data: Dataset, cs: ConstraintSet,
                         cfg: LearnConfig = LearnConfig(algorithm="apn-qc")) -> Network:
    return _apn_update(net, data, cfg, InequalitySystem(net, cs))


def _hybrid_update(net: Network, data: Dataset, cfg: LearnConfig, system: InequalitySystem) -> Network:
    after_em = _em_update(net, data, cfg.min_prob)
    v = system.gradient(after_em)
    if not any(g.any() for g in v.values()):
        return after_em
    direction = project_gradient(v)
    largest = max(float(np.abs(d).max()) for d in direction.values())
    if largest == 0.0:
        return after_em
    em_move = max(float(np.abs(after_em.cpt(n) - net.cpt(n)).max()) for n in net.names)
    # at an EM fixed point the rescale is undefined; fall back to a step of size alpha
    target = em_move if em_move > 0 else cfg.step_size
    scale = target / largest
    if cfg.weight_scales_correction:
        scale *= cfg.penalty_weight
    return after_em.with_cpts({
        name: clamp_rows(after_em.cpt(name) - scale * direction[name], cfg.min_prob)
        for name in net.names
    })


def constrained_em_step(net: Network, data: Dataset, cs: ConstraintSet,
                        cfg: LearnConfig = LearnConfig(algorithm="em-qc")) -> Network:
    """EM update, then a rescaled step against the violation gradient at the EM result."""
    return _hybrid_update(net, data, cfg, InequalitySystem(net, cs))


# --- driver -------------------------------------------------------------------------


def learn(
    net0: Network,
    data: Dataset,
    cfg: LearnConfig,
    constraints: ConstraintSet | None = None,
    test_data: Dataset | None = None,
) -> tuple[Network, RunTrace]:
    """Run ``cfg.iterations`` steps of ``cfg.algorithm`` starting from ``net0``.

    The trace gets iteration 0, every ``record_every``-th iteration and the
    last one.  When ``constraints`` is given the violation is recorded even
    for the unconstrained algorithms.
    """
    if cfg.constrained and constraints is None:
        raise ValueError(f"algorithm {cfg.algorithm!r} needs a constraint set")
    system = InequalitySystem(net0, constraints) if constraints is not None else None
    trace = RunTrace()

    def record(t: int, net: Network) -> None:
        s = max(len(data), 1)
        trace.append(TraceRow(
            iteration=t,
            train_nll_per_case=-log_likelihood(net, data) / s,
            test_nll_per_case=(-log_likelihood(net, test_data) / max(len(test_data), 1)
                               if test_data is not None else None),
            violation=system.total(net) if system is not None else None,
            parameters=net.parameter_vector() if cfg.record_parameters else None,
        ))

    if cfg.algorithm == "em":
        step = lambda net: _em_update(net, data, cfg.min_prob)  # noqa: E731
    elif cfg.algorithm == "apn":
        step = lambda net: _apn_update(net, data, cfg, None)  # noqa: E731
    elif cfg.algorithm == "apn-qc":
        step = lambda net: _apn_update(net, data, cfg, system)  # noqa: E731
    else:
        step = lambda net: _hybrid_update(net, data, cfg, system)  # noqa: E731

    net = net0
    t = 0
    try:
        record(0, net)
        for t in range(1, cfg.iterations + 1):
            net = step(net)
            if t % cfg.record_every == 0 or t == cfg.iterations:
                record(t, net)
    except (NetworkError, FloatingPointError, ValueError) as exc:
        raise LearningError(f"iteration {t}: {exc}", trace) from exc
    return net, trace

