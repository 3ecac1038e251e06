"""Exact inference by variable elimination.

Cases are grouped by their set of observed variables and deduplicated, and
every group is processed as one batch: each factor carries a leading case
axis, so a single elimination pass handles all cases sharing an evidence
pattern.  Summation and reduction orders are fixed (cases sorted by
``np.unique``), so results are bit-identical across runs.

``method="enumeration"`` switches the public single-case functions to a
full-joint oracle that never touches the elimination code.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .dataset import Dataset
from .network import Network, NetworkError


class ZeroLikelihoodError(NetworkError):
    """A case has probability zero under the network."""

    def __init__(self, index: int, message: str | None = None):
        self.index = index
        super().__init__(message or f"case {index} has zero likelihood under the network")


@dataclass
class _Factor:
    scope: tuple[int, ...]  # variable indices, excluding the case axis
    table: np.ndarray  # shape (B, *cards[scope])


@dataclass
class _Group:
    rows: np.ndarray  # (B, n_vars) state indices, -1 unobserved
    counts: np.ndarray  # multiplicity of each unique row
    first: np.ndarray  # index of the first original case equal to the row
    inverse: np.ndarray  # original case positions mapped to rows (for this group only)
    members: np.ndarray  # original case positions in this group
    observed: np.ndarray  # bool mask over variables


def _groups(matrix: np.ndarray) -> list[_Group]:
    if matrix.shape[0] == 0:
        return []
    uniq, first, inverse, counts = np.unique(
        matrix, axis=0, return_index=True, return_inverse=True, return_counts=True
    )
    inverse = inverse.reshape(-1)
    masks = uniq >= 0
    out = []
    mask_keys, mask_of_row = np.unique(masks, axis=0, return_inverse=True)
    mask_of_row = mask_of_row.reshape(-1)
    for g, mask in enumerate(mask_keys):
        sel = np.flatnonzero(mask_of_row == g)
        remap = np.full(uniq.shape[0], -1, dtype=np.int64)
        remap[sel] = np.arange(sel.size)
        members = np.flatnonzero(np.isin(inverse, sel))
        out.append(_Group(
            rows=uniq[sel], counts=counts[sel], first=first[sel],
            inverse=remap[inverse[members]], members=members, observed=mask,
        ))
    return out


_GROUP_CACHE: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()


def _dataset_groups(net: Network, data: Dataset) -> list[_Group]:
    """Grouping of an (immutable) dataset, cached per variable order."""
    per_data = _GROUP_CACHE.setdefault(data, {})
    key = net.names
    if key not in per_data:
        per_data[key] = _groups(data.full_matrix(net))
    return per_data[key]


def _reduced_factors(net: Network, rows: np.ndarray, observed: np.ndarray) -> list[_Factor]:
    """CPT factors with observed variables sliced out, one batch entry per row."""
    batch = rows.shape[0]
    factors = []
    for name in net.names:
        fam = [net.index(v) for v in net.family(name)]
        table = net.family_table(name)
        obs_axes = [a for a, v in enumerate(fam) if observed[v]]
        free_axes = [a for a, v in enumerate(fam) if not observed[v]]
        scope = tuple(fam[a] for a in free_axes)
        if obs_axes:
            moved = np.transpose(table, obs_axes + free_axes)
            reduced = moved[tuple(rows[:, fam[a]] for a in obs_axes)]
        else:
            reduced = np.broadcast_to(table, (batch,) + table.shape)
        factors.append(_Factor(scope, reduced))
    return factors


def _min_fill_order(factors: list[_Factor], keep: set[int]) -> list[int]:
    """Greedy min-fill elimination order over every variable not in ``keep``."""
    adj: dict[int, set[int]] = {}
    for f in factors:
        for v in f.scope:
            adj.setdefault(v, set()).update(u for u in f.scope if u != v)
    todo = sorted(v for v in adj if v not in keep)
    order = []
    while todo:
        def fill(v):
            nb = list(adj[v])
            return sum(1 for a in range(len(nb)) for b in range(a + 1, len(nb)) if nb[b] not in adj[nb[a]])
        best = min(todo, key=lambda v: (fill(v), v))
        nb = adj.pop(best)
        for u in nb:
            adj[u].discard(best)
            adj[u].update(w for w in nb if w != u)
        todo.remove(best)
        order.append(best)
    return order


def _product(factors: list[_Factor], out_scope: tuple[int, ...], batch_label: int) -> np.ndarray:
    args = []
    for f in factors:
        args.extend([f.table, [batch_label, *f.scope]])
    args.append([batch_label, *out_scope])
    return np.einsum(*args)


def _eliminate(factors: list[_Factor], query: tuple[int, ...], n_vars: int) -> np.ndarray:
    """Sum out everything except ``query``; returns shape (B, *cards[query])."""
    batch_label = n_vars
    factors = list(factors)
    for var in _min_fill_order(factors, set(query)):
        involved = [f for f in factors if var in f.scope]
        factors = [f for f in factors if var not in f.scope]
        scope = tuple(sorted({v for f in involved for v in f.scope} - {var}))
        factors.append(_Factor(scope, _product(involved, scope, batch_label)))
    return _product(factors, tuple(query), batch_label)


def _check_positive(lik: np.ndarray, group: _Group) -> None:
    bad = np.flatnonzero(~(lik > 0))
    if bad.size:
        raise ZeroLikelihoodError(int(group.first[bad].min()))


def _group_likelihood(net: Network, group: _Group) -> np.ndarray:
    factors = _reduced_factors(net, group.rows, group.observed)
    return _eliminate(factors, (), len(net))


def _group_family_posteriors(net: Network, group: _Group) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Per-row family posteriors shaped (B, K, n) and per-row likelihoods."""
    factors = _reduced_factors(net, group.rows, group.observed)
    n_vars = len(net)
    lik = _eliminate(factors, (), n_vars)
    _check_positive(lik, group)
    batch = group.rows.shape[0]
    out = {}
    for name in net.names:
        fam = [net.index(v) for v in net.family(name)]
        cards = net.parent_cards(name) + (net.cardinality(name),)
        query = tuple(v for v in fam if not group.observed[v])
        post = np.zeros((batch,) + cards)
        obs_axes = [1 + a for a, v in enumerate(fam) if group.observed[v]]
        obs_states = tuple(group.rows[:, v] for v in fam if group.observed[v])
        if query:
            joint = _eliminate(factors, query, n_vars)
            joint = joint / joint.reshape(batch, -1).sum(axis=1).reshape((batch,) + (1,) * len(query))
        else:
            joint = np.ones(batch)
        # view with axes (B, *observed, *free); the observed axes are pinned per case
        view = np.moveaxis(post, obs_axes, list(range(1, 1 + len(obs_axes))))
        view[(np.arange(batch),) + obs_states] = joint
        out[name] = post.reshape(batch, -1, cards[-1])
    return out, lik


def _matrix(net: Network, case: Mapping[str, str]) -> np.ndarray:
    row = np.full((1, len(net)), -1, dtype=np.int64)
    for name, state in case.items():
        row[0, net.index(name)] = net.variable(name).state_index(state)
    return row


# --- public, single case -------------------------------------------------------


def case_likelihood(net: Network, case: Mapping[str, str], method: str = "elimination") -> float:
    """Marginal probability of the observed part of ``case``."""
    if method == "enumeration":
        return enumeration_likelihood(net, case)
    row = _matrix(net, case)
    (group,) = _groups(row)
    return float(_group_likelihood(net, group)[0])


def family_posteriors(net: Network, case: Mapping[str, str], method: str = "elimination") -> dict[str, np.ndarray]:
    """``P(x_ij, pa_k(X_i) | case)`` for every variable, as ``[k, j]`` arrays."""
    if method == "enumeration":
        return enumeration_family_posteriors(net, case)
    (group,) = _groups(_matrix(net, case))
    posts, _ = _group_family_posteriors(net, group)
    return {name: p[0] for name, p in posts.items()}


# --- public, datasets ------------------------------------------------------------


def case_log_likelihoods(net: Network, data: Dataset) -> np.ndarray:
    """``ln P(D_l)`` for every case, in dataset order."""
    out = np.empty(len(data))
    for group in _dataset_groups(net, data):
        lik = _group_likelihood(net, group)
        _check_positive(lik, group)
        out[group.members] = np.log(lik)[group.inverse]
    return out


def log_likelihood(net: Network, data: Dataset) -> float:
    """Sum of per-case log likelihoods."""
    total = 0.0
    for group in _dataset_groups(net, data):
        lik = _group_likelihood(net, group)
        _check_positive(lik, group)
        total += float(np.dot(group.counts, np.log(lik)))
    return total


def mean_log_likelihood(net: Network, data: Dataset) -> float:
    return log_likelihood(net, data) / len(data) if len(data) else 0.0


@dataclass
class ExpectedCounts:
    counts: dict[str, np.ndarray]  # sum over cases of the family posteriors, [k, j]
    log_likelihood: float


def expected_counts(net: Network, data: Dataset) -> ExpectedCounts:
    """Expected family counts ``E[N_ijk]`` and the data log likelihood in one pass."""
    counts = {name: np.zeros(net.cpt(name).shape) for name in net.names}
    total = 0.0
    for group in _dataset_groups(net, data):
        posts, lik = _group_family_posteriors(net, group)
        weights = group.counts.astype(np.float64)
        for name, post in posts.items():
            counts[name] += np.tensordot(weights, post, axes=(0, 0))
        total += float(np.dot(weights, np.log(lik)))
    return ExpectedCounts(counts, total)


def target_posteriors(net: Network, data: Dataset, target: str) -> np.ndarray:
    """Posterior over ``target`` per case, conditioning on every other observed variable."""
    t = net.index(target)
    matrix = data.full_matrix(net)
    matrix[:, t] = -1
    out = np.empty((matrix.shape[0], net.cardinality(target)))
    for group in _groups(matrix):
        factors = _reduced_factors(net, group.rows, group.observed)
        joint = _eliminate(factors, (t,), len(net))
        z = joint.sum(axis=1)
        _check_positive(z, group)
        out[group.members] = (joint / z[:, None])[group.inverse]
    return out


# --- enumeration oracle ---------------------------------------------------------


def joint_table(net: Network) -> np.ndarray:
    """Full joint distribution as an array with one axis per variable (declaration order)."""
    n = len(net)
    cards = [v.cardinality for v in net.variables]
    joint = np.ones(cards)
    for name in net.names:
        axes = [net.index(v) for v in net.family(name)]
        shape = [1] * n
        table = net.family_table(name)
        order = np.argsort(axes)
        for a, c in zip(np.array(axes)[order], np.array(table.shape)[order]):
            shape[a] = c
        joint = joint * np.transpose(table, order).reshape(shape)
    return joint


def _evidence_slice(net: Network, case: Mapping[str, str]) -> tuple:
    idx = [slice(None)] * len(net)
    for name, state in case.items():
        idx[net.index(name)] = net.variable(name).state_index(state)
    return tuple(idx)


def enumeration_likelihood(net: Network, case: Mapping[str, str]) -> float:
    joint = joint_table(net)
    mask = np.zeros(joint.shape, dtype=bool)
    mask[_evidence_slice(net, case)] = True
    return float(joint[mask].sum())


def enumeration_family_posteriors(net: Network, case: Mapping[str, str]) -> dict[str, np.ndarray]:
    joint = joint_table(net)
    mask = np.zeros(joint.shape, dtype=bool)
    mask[_evidence_slice(net, case)] = True
    conditioned = np.where(mask, joint, 0.0)
    z = conditioned.sum()
    if not z > 0:
        raise ZeroLikelihoodError(0)
    conditioned = conditioned / z
    out = {}
    for name in net.names:
        fam = [net.index(v) for v in net.family(name)]
        others = tuple(a for a in range(len(net)) if a not in fam)
        marg = conditioned.sum(axis=others)  # axes in ascending variable index
        perm = np.argsort(np.argsort(fam))
        marg = np.transpose(marg, perm)
        out[name] = marg.reshape(-1, net.cardinality(name))
    return out
