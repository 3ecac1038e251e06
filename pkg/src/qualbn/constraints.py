"""Qualitative influences as linear inequalities on CPT entries.

A positive influence of ``w`` on its child ``z`` requires, for every
threshold state ``m > 0`` of ``z``, every pair of parent states
``higher > lower`` and every configuration ``y`` of ``z``'s other parents::

    P(z >= m | w=higher, y) - P(z >= m | w=lower, y) >= 0

The left-hand side is the *slack*.  All pairs are enumerated, not just
adjacent ones, so a violation touches every parameter involved in it.
Negative influences flip the inequality.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .network import ConstraintSet, Network

ZERO_VIOLATION = 1e-6  # reporting threshold for "essentially zero"


@dataclass(frozen=True)
class Inequality:
    parent: str
    child: str
    sign: str
    threshold: int  # child state index m (0-based, >= 1)
    higher: int  # parent state index i
    lower: int  # parent state index j < i
    context: tuple[tuple[str, str], ...]  # states of the child's other parents
    k_higher: int  # row of the child's CPT under (higher, context)
    k_lower: int

    @property
    def direction(self) -> int:
        return 1 if self.sign == "+" else -1


def enumerate_inequalities(net: Network, cs: ConstraintSet) -> list[Inequality]:
    out = []
    for inf in cs.check_against(net):
        parents = net.parents(inf.child)
        others = [p for p in parents if p != inf.parent]
        w_states = net.variable(inf.parent).states
        n_child = net.cardinality(inf.child)
        contexts = itertools.product(*(net.variable(p).states for p in others))
        for ctx in contexts:
            context = tuple(zip(others, ctx))
            for lo, hi in itertools.combinations(range(len(w_states)), 2):
                rows = {}
                for state in (hi, lo):
                    assignment = dict(context)
                    assignment[inf.parent] = w_states[state]
                    rows[state] = net.encode_parent_config(inf.child, assignment)
                for m in range(1, n_child):
                    out.append(Inequality(
                        inf.parent, inf.child, inf.sign, m, hi, lo, context,
                        rows[hi], rows[lo],
                    ))
    return out


def inequality_count(net: Network, cs: ConstraintSet) -> int:
    total = 0
    for inf in cs.check_against(net):
        n_w = net.cardinality(inf.parent)
        contexts = math.prod(net.cardinality(p) for p in net.parents(inf.child) if p != inf.parent)
        total += (net.cardinality(inf.child) - 1) * math.comb(n_w, 2) * contexts
    return total


def inequality_slack(net: Network, ineq: Inequality) -> float:
    table = net.cpt(ineq.child)
    m = ineq.threshold
    return float(table[ineq.k_higher, m:].sum() - table[ineq.k_lower, m:].sum())


def partial_violation(ineq: Inequality, slack: float) -> float:
    """Amount by which one inequality is violated (0 when satisfied or tight)."""
    if ineq.sign == "+" and slack < 0:
        return -slack
    if ineq.sign == "-" and slack > 0:
        return slack
    return 0.0


class InequalitySystem:
    """Vectorised form of an inequality list, reusable across parameter values.

    Only the structure of the network is captured, so one system can score
    every iterate of a learning run.
    """

    def __init__(self, net: Network, cs: ConstraintSet):
        self.inequalities = enumerate_inequalities(net, cs)
        self.children = tuple(dict.fromkeys(q.child for q in self.inequalities))
        self._shapes = {name: net.cpt(name).shape for name in net.names}
        self._rows = {}
        for child in self.children:
            pos = np.array([i for i, q in enumerate(self.inequalities) if q.child == child])
            qs = [self.inequalities[i] for i in pos]
            self._rows[child] = (
                pos,
                np.array([q.k_higher for q in qs]),
                np.array([q.k_lower for q in qs]),
                np.array([q.threshold for q in qs]),
                np.array([q.direction for q in qs], dtype=np.float64),
            )

    def __len__(self) -> int:
        return len(self.inequalities)

    def slacks(self, net: Network) -> np.ndarray:
        out = np.zeros(len(self.inequalities))
        for child, (pos, hi, lo, m, _) in self._rows.items():
            tails = np.cumsum(net.cpt(child)[:, ::-1], axis=1)[:, ::-1]
            out[pos] = tails[hi, m] - tails[lo, m]
        return out

    def partials(self, net: Network) -> np.ndarray:
        out = np.zeros(len(self.inequalities))
        for child, (pos, hi, lo, m, direction) in self._rows.items():
            tails = np.cumsum(net.cpt(child)[:, ::-1], axis=1)[:, ::-1]
            out[pos] = np.maximum(-direction * (tails[hi, m] - tails[lo, m]), 0.0)
        return out

    def total(self, net: Network) -> float:
        return float(self.partials(net).sum())

    def counts(self, net: Network) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
        """``(v_minus, v_plus)``: per parameter, how many violated inequalities
        push it down and how many push it up."""
        v_minus = {name: np.zeros(shape) for name, shape in self._shapes.items()}
        v_plus = {name: np.zeros(shape) for name, shape in self._shapes.items()}
        partials = self.partials(net)
        for child, (pos, hi, lo, m, direction) in self._rows.items():
            n = self._shapes[child][1]
            tail = (np.arange(n)[None, :] >= m[:, None]).astype(np.float64)
            viol = (partials[pos] > 0)[:, None]
            pos_sign = (direction > 0)[:, None]
            down_hi = tail * viol * ~pos_sign
            down_lo = tail * viol * pos_sign
            up_hi = tail * viol * pos_sign
            up_lo = tail * viol * ~pos_sign
            np.add.at(v_minus[child], hi, down_hi)
            np.add.at(v_minus[child], lo, down_lo)
            np.add.at(v_plus[child], hi, up_hi)
            np.add.at(v_plus[child], lo, up_lo)
        return v_minus, v_plus

    def gradient(self, net: Network) -> dict[str, np.ndarray]:
        """Derivative of the total violation w.r.t. each CPT entry."""
        v_minus, v_plus = self.counts(net)
        return {name: v_minus[name] - v_plus[name] for name in v_minus}


def total_violation(net: Network, cs: ConstraintSet) -> float:
    return InequalitySystem(net, cs).total(net)


def violation_gradient(net: Network, cs: ConstraintSet) -> dict[str, np.ndarray]:
    return InequalitySystem(net, cs).gradient(net)


def expert_agreement_likelihood(net: Network, cs: ConstraintSet, weight: float) -> float:
    """Probability that an expert confirms ``cs`` given the network: ``exp(-w * violation)``."""
    if not weight > 0:
        raise ValueError("weight must be positive")
    return math.exp(-weight * total_violation(net, cs))


@dataclass
class ViolationRecord:
    inequality: Inequality
    slack: float
    partial: float


@dataclass
class ViolationReport:
    total: float
    n_inequalities: int
    violated: list[ViolationRecord]
    v_minus: dict[str, np.ndarray] = field(repr=False)
    v_plus: dict[str, np.ndarray] = field(repr=False)

    @property
    def gradient(self) -> dict[str, np.ndarray]:
        return {name: self.v_minus[name] - self.v_plus[name] for name in self.v_minus}

    @property
    def structural_maximum(self) -> int:
        """Upper bound on the total: each slack lies in [-1, 1]."""
        return self.n_inequalities

    @property
    def essentially_zero(self) -> bool:
        return self.total < ZERO_VIOLATION


def audit(net: Network, cs: ConstraintSet) -> ViolationReport:
    system = InequalitySystem(net, cs)
    slacks = system.slacks(net)
    partials = system.partials(net)
    records = [
        ViolationRecord(q, float(s), float(p))
        for q, s, p in zip(system.inequalities, slacks, partials) if p > 0
    ]
    records.sort(key=lambda r: -r.partial)
    v_minus, v_plus = system.counts(net)
    return ViolationReport(float(partials.sum()), len(system), records, v_minus, v_plus)


def format_report(report: ViolationReport) -> str:
    lines = [
        f"total {report.total!r}",
        f"violated {len(report.violated)} of {report.n_inequalities} inequalities",
        f"structural maximum {report.structural_maximum}",
    ]
    for rec in report.violated:
        q = rec.inequality
        ctx = ", ".join(f"{p}={s}" for p, s in q.context) or "-"
        lines.append(
            f"{q.child}\t{q.parent}\t{q.sign}\tm={q.threshold + 1}\ti={q.higher + 1}\t"
            f"j={q.lower + 1}\t{ctx}\tslack={rec.slack!r}\tpartial={rec.partial!r}"
        )
    return "\n".join(lines)
