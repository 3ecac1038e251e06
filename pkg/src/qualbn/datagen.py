"""Synthetic data: ancestral sampling and the bundled fixture networks.

The generator is NumPy's PCG64 (``numpy.random.default_rng``), so a seed
fixes a dataset bit for bit on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .network import ConstraintSet, Influence, Network, Variable


@dataclass(frozen=True)
class SamplingSpec:
    count: int
    hidden: frozenset[str] = field(default_factory=frozenset)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden", frozenset(self.hidden))
        if self.count < 0:
            raise ValueError("count must be non-negative")


def sample_states(net: Network, count: int, rng: np.random.Generator) -> np.ndarray:
    """Complete samples as state indices, shape ``(count, n_vars)``."""
    out = np.zeros((count, len(net)), dtype=np.int64)
    for name in net.topological_order():
        k = np.zeros(count, dtype=np.int64)
        for p in net.parents(name):
            k = k * net.cardinality(p) + out[:, net.index(p)]
        cum = np.cumsum(net.cpt(name), axis=1)[k]
        u = rng.random(count)
        out[:, net.index(name)] = np.sum(cum[:, :-1] <= u[:, None], axis=1)
    return out


def forward_sample(net: Network, spec: SamplingSpec) -> Dataset:
    """``spec.count`` ancestral samples with the hidden variables dropped."""
    unknown = spec.hidden - set(net.names)
    if unknown:
        raise ValueError(f"hidden variables not in the network: {sorted(unknown)}")
    states = sample_states(net, spec.count, np.random.default_rng(spec.seed))
    keep = [i for i, name in enumerate(net.names) if name not in spec.hidden]
    return Dataset(net, [net.names[i] for i in keep], states[:, keep])


# --- fixtures ----------------------------------------------------------------------------


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + np.exp(-x))


def _ordinal_row(score: float, cuts: tuple[float, ...]) -> list[float]:
    """Ordered-logit distribution: P(X >= m) = sigmoid(score - cut_m), rounded to 4 places.

    A larger score gives a stochastically larger state, which is what makes
    the fixtures satisfy their declared influences.
    """
    upper = [1.0] + [round(float(_sigmoid(score - c)), 4) for c in cuts] + [0.0]
    return [upper[m] - upper[m + 1] for m in range(len(cuts) + 1)]


def _table(net_vars: dict[str, Variable], parents: list[str], score, cuts) -> np.ndarray:
    cards = [net_vars[p].cardinality for p in parents]
    return np.array([_ordinal_row(score(*idx), cuts) for idx in np.ndindex(*cards)])


@dataclass(frozen=True)
class Fixture:
    """A ground-truth network with its hidden variables, constraints and target."""

    name: str
    network: Network
    constraints: ConstraintSet
    hidden: frozenset[str]
    target: str


def structure_one() -> Fixture:
    """Spoken-instruction domain with one hidden variable, COGNITIVE LOAD.

    Three observed parents raise the load; the load raises the chance of an
    error in the primary task.  CPT values are invented for this package.
    """
    V = {v.name: v for v in [
        Variable("NUMBER OF INSTRUCTIONS", ("2", "3", "4")),
        Variable("PRESENTATION", ("stepwise", "bundled")),
        Variable("SECONDARY TASK?", ("no", "yes")),
        Variable("COGNITIVE LOAD", ("low", "medium", "high")),
        Variable("ERROR IN PRIMARY TASK?", ("no", "yes")),
        Variable("ERROR IN SECONDARY TASK?", ("no", "yes")),
        Variable("EXECUTION TIME", ("short", "medium", "long")),
    ]}
    parents = {
        "COGNITIVE LOAD": ["NUMBER OF INSTRUCTIONS", "PRESENTATION", "SECONDARY TASK?"],
        "ERROR IN PRIMARY TASK?": ["COGNITIVE LOAD"],
        "ERROR IN SECONDARY TASK?": ["COGNITIVE LOAD", "SECONDARY TASK?"],
        "EXECUTION TIME": ["COGNITIVE LOAD", "PRESENTATION"],
    }
    cpts = {
        "NUMBER OF INSTRUCTIONS": np.array([[0.3, 0.4, 0.3]]),
        "PRESENTATION": np.array([[0.5, 0.5]]),
        "SECONDARY TASK?": np.array([[0.6, 0.4]]),
        "COGNITIVE LOAD": _table(V, parents["COGNITIVE LOAD"],
                                 lambda n, p, s: 1.2 * n + 1.5 * p + 2.0 * s, (1.8, 4.0)),
        "ERROR IN PRIMARY TASK?": _table(V, parents["ERROR IN PRIMARY TASK?"],
                                         lambda c: 2.2 * c, (3.0,)),
        "ERROR IN SECONDARY TASK?": _table(V, parents["ERROR IN SECONDARY TASK?"],
                                           lambda c, s: 2.0 * c - 1.5 if s else -3.5, (1.0,)),
        "EXECUTION TIME": _table(V, parents["EXECUTION TIME"],
                                 lambda c, p: 1.0 * c + 1.4 * (1 - p), (0.8, 2.2)),
    }
    net = Network(list(V.values()), parents, cpts).check()
    cs = ConstraintSet((
        Influence("NUMBER OF INSTRUCTIONS", "COGNITIVE LOAD", "+"),
        Influence("PRESENTATION", "COGNITIVE LOAD", "+"),
        Influence("SECONDARY TASK?", "COGNITIVE LOAD", "+"),
        Influence("COGNITIVE LOAD", "ERROR IN PRIMARY TASK?", "+"),
    )).check_against(net)
    return Fixture("structure1", net, cs, frozenset({"COGNITIVE LOAD"}), "ERROR IN PRIMARY TASK?")


def structure_two() -> Fixture:
    """Abstract network with two hidden variables H1, H2 and target node G."""
    V = {v.name: v for v in [
        Variable("A", ("a1", "a2")),
        Variable("B", ("b1", "b2", "b3")),
        Variable("C", ("c1", "c2")),
        Variable("H1", ("h1", "h2")),
        Variable("H2", ("k1", "k2", "k3")),
        Variable("D", ("d1", "d2")),
        Variable("E", ("e1", "e2", "e3")),
        Variable("F", ("f1", "f2")),
        Variable("G", ("g1", "g2")),
    ]}
    parents = {
        "H1": ["A", "B"],
        "H2": ["B", "C"],
        "D": ["H1"],
        "E": ["H1", "H2"],
        "F": ["H2"],
        "G": ["H1", "H2"],
    }
    cpts = {
        "A": np.array([[0.55, 0.45]]),
        "B": np.array([[0.3, 0.4, 0.3]]),
        "C": np.array([[0.4, 0.6]]),
        "H1": _table(V, parents["H1"], lambda a, b: 1.6 * a + 1.2 * b, (1.8,)),
        "H2": _table(V, parents["H2"], lambda b, c: 2.6 - 1.3 * b + 1.8 * c, (1.4, 3.0)),
        "D": _table(V, parents["D"], lambda h: 3.0 * h, (1.5,)),
        "E": _table(V, parents["E"], lambda h1, h2: 1.5 * h1 + 1.2 * h2, (1.0, 2.8)),
        "F": _table(V, parents["F"], lambda h: -1.8 * h, (-1.8,)),
        "G": _table(V, parents["G"], lambda h1, h2: 2.0 * h1 + 1.5 * h2, (2.5,)),
    }
    net = Network(list(V.values()), parents, cpts).check()
    cs = ConstraintSet((
        Influence("A", "H1", "+"),
        Influence("B", "H1", "+"),
        Influence("B", "H2", "-"),
        Influence("C", "H2", "+"),
        Influence("H1", "D", "+"),
        Influence("H1", "E", "+"),
        Influence("H2", "E", "+"),
        Influence("H2", "F", "-"),
        Influence("H1", "G", "+"),
        Influence("H2", "G", "+"),
    )).check_against(net)
    return Fixture("structure2", net, cs, frozenset({"H1", "H2"}), "G")


def fixture_networks() -> tuple[Fixture, Fixture]:
    return structure_one(), structure_two()
