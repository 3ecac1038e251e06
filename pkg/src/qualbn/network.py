"""Discrete Bayesian networks: variables, parent structure and CPTs.

A CPT is a 2-D array indexed ``[k, j]``: ``k`` is the parent-configuration
index and ``j`` the child state.  Parent configurations are encoded
mixed-radix over the parent list, first-listed parent most significant, so
``cpt.reshape(*parent_cards, n_states)`` gives one axis per family member.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

ROW_TOLERANCE = 1e-9


class NetworkError(ValueError):
    """A network, constraint set or case is structurally invalid."""


class FormatError(NetworkError):
    """A file could not be parsed."""


@dataclass(frozen=True)
class Variable:
    name: str
    states: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))

    @property
    def cardinality(self) -> int:
        return len(self.states)

    def state_index(self, state: str) -> int:
        try:
            return self.states.index(state)
        except ValueError:
            raise NetworkError(
                f"unknown state {state!r} for variable {self.name!r}"
            ) from None


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=np.float64)
    if out.ndim == 1:
        out = out.reshape(1, -1)
    out.setflags(write=False)
    return out


class Network:
    """A DAG of discrete variables with one CPT per variable.

    The constructor does not validate; use :func:`validate_network` or
    :meth:`check` for that.  Instances are treated as immutable: CPT arrays
    are read-only and updates go through :meth:`with_cpts`.
    """

    def __init__(
        self,
        variables: Sequence[Variable],
        parents: Mapping[str, Sequence[str]],
        cpts: Mapping[str, np.ndarray],
    ):
        self._variables = tuple(variables)
        self._by_name = {v.name: v for v in self._variables}
        self._index = {v.name: i for i, v in enumerate(self._variables)}
        self._parents = {
            v.name: tuple(parents.get(v.name, ())) for v in self._variables
        }
        self._cpts = {name: _frozen(table) for name, table in cpts.items()}
        self._topo: tuple[str, ...] | None = None

    # --- structure -------------------------------------------------------

    @property
    def variables(self) -> tuple[Variable, ...]:
        return self._variables

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self._variables)

    def __len__(self) -> int:
        return len(self._variables)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def variable(self, name: str) -> Variable:
        try:
            return self._by_name[name]
        except KeyError:
            raise NetworkError(f"unknown variable {name!r}") from None

    def index(self, name: str) -> int:
        self.variable(name)
        return self._index[name]

    def cardinality(self, name: str) -> int:
        return self.variable(name).cardinality

    def parents(self, name: str) -> tuple[str, ...]:
        self.variable(name)
        return self._parents[name]

    def children(self, name: str) -> tuple[str, ...]:
        return tuple(c for c in self.names if name in self._parents[c])

    def parent_cards(self, name: str) -> tuple[int, ...]:
        return tuple(self.cardinality(p) for p in self.parents(name))

    def n_configs(self, name: str) -> int:
        return math.prod(self.parent_cards(name))

    def family(self, name: str) -> tuple[str, ...]:
        """Parents followed by the variable itself (the CPT's axis order)."""
        return self.parents(name) + (name,)

    def topological_order(self) -> tuple[str, ...]:
        if self._topo is None:
            order = _topological_sort(self.names, self._parents)
            if order is None:
                raise NetworkError("parent graph contains a cycle")
            self._topo = order
        return self._topo

    # --- parameters ------------------------------------------------------

    def cpt(self, name: str) -> np.ndarray:
        self.variable(name)
        try:
            return self._cpts[name]
        except KeyError:
            raise NetworkError(f"no CPT for variable {name!r}") from None

    @property
    def cpts(self) -> dict[str, np.ndarray]:
        return dict(self._cpts)

    def family_table(self, name: str) -> np.ndarray:
        """CPT reshaped to one axis per family member (parents, then child)."""
        return self.cpt(name).reshape(self.parent_cards(name) + (self.cardinality(name),))

    def with_cpts(self, cpts: Mapping[str, np.ndarray]) -> Network:
        """Copy of this network with some or all CPTs replaced."""
        merged = dict(self._cpts)
        merged.update(cpts)
        net = Network(self._variables, self._parents, merged)
        net._topo = self._topo
        return net

    def parameter_vector(self) -> np.ndarray:
        """All CPT entries concatenated in variable order, rows row-major."""
        return np.concatenate([self._cpts[n].ravel() for n in self.names])

    def with_parameter_vector(self, theta: np.ndarray) -> Network:
        theta = np.asarray(theta, dtype=np.float64)
        cpts, pos = {}, 0
        for name in self.names:
            shape = self._cpts[name].shape
            size = shape[0] * shape[1]
            cpts[name] = theta[pos:pos + size].reshape(shape)
            pos += size
        if pos != theta.size:
            raise NetworkError(f"parameter vector has {theta.size} entries, expected {pos}")
        return self.with_cpts(cpts)

    # --- parent configurations --------------------------------------------

    def encode_parent_config(self, name: str, parent_states: Mapping[str, str] | Sequence[str]) -> int:
        """Index ``k`` of a parent configuration given as labels.

        ``parent_states`` is either a mapping parent -> state or a sequence
        aligned with :meth:`parents`.
        """
        parents = self.parents(name)
        if isinstance(parent_states, Mapping):
            missing = [p for p in parents if p not in parent_states]
            if missing:
                raise NetworkError(f"parent states missing for {missing}")
            labels = [parent_states[p] for p in parents]
        else:
            labels = list(parent_states)
            if len(labels) != len(parents):
                raise NetworkError(
                    f"{name!r} has {len(parents)} parents, got {len(labels)} states"
                )
        k = 0
        for p, label in zip(parents, labels):
            var = self.variable(p)
            k = k * var.cardinality + var.state_index(label)
        return k

    def decode_parent_config(self, name: str, k: int) -> dict[str, str]:
        cards = self.parent_cards(name)
        if not 0 <= k < math.prod(cards):
            raise NetworkError(f"parent configuration {k} out of range for {name!r}")
        idx = np.unravel_index(k, cards) if cards else ()
        return {
            p: self.variable(p).states[int(i)] for p, i in zip(self.parents(name), idx)
        }

    # --- checks ----------------------------------------------------------

    def check(self) -> Network:
        defects = validate_network(self)
        if defects:
            raise NetworkError("invalid network: " + "; ".join(defects))
        return self

    def __eq__(self, other) -> bool:
        if not isinstance(other, Network):
            return NotImplemented
        return (
            self._variables == other._variables
            and self._parents == other._parents
            and self._cpts.keys() == other._cpts.keys()
            and all(np.array_equal(self._cpts[n], other._cpts[n]) for n in self._cpts)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"Network({', '.join(self.names)})"


def _topological_sort(names: Sequence[str], parents: Mapping[str, Sequence[str]]):
    """Kahn's algorithm keeping declaration order among ready nodes; None on a cycle."""
    known = set(names)
    indeg = {n: sum(1 for p in parents[n] if p in known) for n in names}
    order: list[str] = []
    ready = [n for n in names if indeg[n] == 0]
    while ready:
        node = ready.pop(0)
        order.append(node)
        for child in names:
            if node in parents[child]:
                indeg[child] -= 1
                if indeg[child] == 0:
                    ready.append(child)
    return tuple(order) if len(order) == len(names) else None


def validate_network(net: Network) -> list[str]:
    """Describe every defect of ``net``; an empty list means it is valid."""
    defects: list[str] = []
    names = [v.name for v in net.variables]
    seen: set[str] = set()
    for name in names:
        if name in seen:
            defects.append(f"duplicate variable name {name!r}")
        seen.add(name)
    for var in net.variables:
        if len(var.states) < 2:
            defects.append(f"variable {var.name!r} has fewer than 2 states")
        if len(set(var.states)) != len(var.states):
            defects.append(f"variable {var.name!r} has duplicate state labels")

    parents = {v.name: net._parents.get(v.name, ()) for v in net.variables}
    for child, ps in parents.items():
        for p in ps:
            if p not in seen:
                defects.append(f"variable {child!r} lists unknown parent {p!r}")
        if len(set(ps)) != len(ps):
            defects.append(f"variable {child!r} lists a parent twice")
    if _topological_sort(list(dict.fromkeys(names)), parents) is None:
        defects.append("parent graph contains a cycle")

    for var in net.variables:
        table = net._cpts.get(var.name)
        if table is None:
            defects.append(f"variable {var.name!r} has no CPT")
            continue
        if any(p not in seen for p in parents[var.name]):
            continue
        n_configs = math.prod(net.variable(p).cardinality for p in parents[var.name])
        if table.shape != (n_configs, var.cardinality):
            defects.append(
                f"CPT of {var.name!r} has shape {table.shape}, "
                f"expected ({n_configs}, {var.cardinality})"
            )
            continue
        if not np.all(np.isfinite(table)) or np.any(table < 0) or np.any(table > 1):
            defects.append(f"CPT of {var.name!r} has entries outside [0, 1]")
        sums = table.sum(axis=1)
        for k in np.flatnonzero(np.abs(sums - 1.0) > ROW_TOLERANCE):
            defects.append(
                f"CPT of {var.name!r} row k={k} sums to {sums[k]!r}, not 1"
            )
    for extra in sorted(set(net._cpts) - seen):
        defects.append(f"CPT given for unknown variable {extra!r}")
    return defects


def joint_probability(net: Network, assignment: Mapping[str, str]) -> float:
    """Probability of a full assignment: the product of one CPT entry per variable."""
    missing = [n for n in net.names if n not in assignment]
    if missing:
        raise NetworkError(f"assignment does not cover {missing}")
    prob = 1.0
    for name in net.names:
        k = net.encode_parent_config(name, assignment)
        j = net.variable(name).state_index(assignment[name])
        prob *= float(net.cpt(name)[k, j])
    return prob


def uniform_network(variables: Sequence[Variable], parents: Mapping[str, Sequence[str]]) -> Network:
    """Structure with every CPT row uniform."""
    cards = {v.name: v.cardinality for v in variables}
    cpts = {}
    for v in variables:
        n_configs = math.prod(cards[p] for p in parents.get(v.name, ()))
        cpts[v.name] = np.full((n_configs, v.cardinality), 1.0 / v.cardinality)
    return Network(variables, parents, cpts)


# --- qualitative influences ---------------------------------------------------


@dataclass(frozen=True)
class Influence:
    parent: str
    child: str
    sign: str  # "+" or "-"

    def __post_init__(self):
        if self.sign not in ("+", "-"):
            raise NetworkError(f"influence sign must be '+' or '-', got {self.sign!r}")


@dataclass(frozen=True)
class ConstraintSet:
    influences: tuple[Influence, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "influences", tuple(self.influences))
        pairs = [(inf.parent, inf.child) for inf in self.influences]
        dupes = sorted({p for p in pairs if pairs.count(p) > 1})
        if dupes:
            raise NetworkError(f"more than one influence given for {dupes}")

    def __len__(self) -> int:
        return len(self.influences)

    def __iter__(self):
        return iter(self.influences)

    def check_against(self, net: Network) -> ConstraintSet:
        for inf in self.influences:
            if inf.child not in net or inf.parent not in net:
                raise NetworkError(
                    f"influence ({inf.parent!r} -> {inf.child!r}) names an unknown variable"
                )
            if inf.parent not in net.parents(inf.child):
                raise NetworkError(
                    f"influence ({inf.parent!r} -> {inf.child!r}): "
                    f"{inf.parent!r} is not a parent of {inf.child!r}"
                )
        return self


# --- file formats ----------------------------------------------------------------


def _read_json(path) -> object:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def network_to_dict(net: Network) -> dict:
    return {
        "nodes": [
            {"name": v.name, "states": list(v.states), "parents": list(net.parents(v.name))}
            for v in net.variables
        ],
        "cpts": {name: net.cpt(name).tolist() for name in net.names},
    }


def network_from_dict(doc, source: str = "<network>") -> Network:
    """Build and validate a network from its object form.

    Without a ``"cpts"`` entry the network gets uniform CPTs (a bare
    structure).  Rows off by at most 1e-9 are renormalized.
    """
    if not isinstance(doc, dict) or not isinstance(doc.get("nodes"), list):
        raise FormatError(f"{source}: expected an object with a 'nodes' list")
    variables, parents = [], {}
    for pos, node in enumerate(doc["nodes"]):
        try:
            name = node["name"]
            states = node["states"]
            ps = node.get("parents", [])
        except (TypeError, KeyError) as exc:
            raise FormatError(f"{source}: node #{pos} lacks field {exc}") from None
        if not isinstance(name, str) or not all(isinstance(s, str) for s in states):
            raise FormatError(f"{source}: node #{pos} must have a string name and string states")
        variables.append(Variable(name, tuple(states)))
        parents[name] = tuple(ps)
    if "cpts" not in doc:
        skeleton = Network(variables, parents, {})
        structural = [d for d in validate_network(skeleton) if "has no CPT" not in d]
        if structural:
            raise NetworkError(f"{source}: " + "; ".join(structural))
        return uniform_network(variables, parents)

    raw = doc["cpts"]
    if not isinstance(raw, dict):
        raise FormatError(f"{source}: 'cpts' must be an object")
    cpts = {}
    for name, rows in raw.items():
        try:
            table = np.array(rows, dtype=np.float64)
        except (TypeError, ValueError):
            raise FormatError(f"{source}: CPT of {name!r} is not a numeric table") from None
        if table.ndim != 2:
            raise FormatError(f"{source}: CPT of {name!r} must be a list of rows")
        sums = table.sum(axis=1, keepdims=True)
        # rows already exact up to round-off are kept bit for bit
        deviation = np.abs(sums - 1.0)
        fix = (deviation <= ROW_TOLERANCE) & (deviation > 2.0 ** -50)
        table = np.where(fix, table / np.where(fix, sums, 1.0), table)
        cpts[name] = table
    net = Network(variables, parents, cpts)
    defects = validate_network(net)
    if defects:
        raise NetworkError(f"{source}: " + "; ".join(defects))
    return net


def save_network(net: Network, path) -> None:
    Path(path).write_text(json.dumps(network_to_dict(net), indent=2) + "\n", encoding="utf-8")


def load_network(path) -> Network:
    return network_from_dict(_read_json(path), str(path))


def constraints_to_dict(cs: ConstraintSet) -> dict:
    return {
        "influences": [
            {"parent": i.parent, "child": i.child, "sign": i.sign} for i in cs.influences
        ]
    }


def constraints_from_dict(doc, net: Network | None = None, source: str = "<constraints>") -> ConstraintSet:
    if not isinstance(doc, dict) or not isinstance(doc.get("influences"), list):
        raise FormatError(f"{source}: expected an object with an 'influences' list")
    influences = []
    for pos, rec in enumerate(doc["influences"]):
        try:
            influences.append(Influence(rec["parent"], rec["child"], rec["sign"]))
        except (TypeError, KeyError) as exc:
            raise FormatError(f"{source}: influence #{pos} lacks field {exc}") from None
    cs = ConstraintSet(tuple(influences))
    if net is not None:
        try:
            cs.check_against(net)
        except NetworkError as exc:
            raise NetworkError(f"{source}: {exc}") from None
    return cs


def save_constraints(cs: ConstraintSet, path) -> None:
    Path(path).write_text(json.dumps(constraints_to_dict(cs), indent=2) + "\n", encoding="utf-8")


def load_constraints(path, net: Network | None = None) -> ConstraintSet:
    """Read a constraint file, checking it against ``net`` when one is given."""
    return constraints_from_dict(_read_json(path), net, str(path))
