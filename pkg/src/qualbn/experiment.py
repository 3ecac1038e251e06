"""Replicated learning experiment on synthetic data.

One experiment samples a training and a test set from a ground-truth
network, learns from ``replications`` random initialisations with each
algorithm, and writes:

``train.csv``, ``test.csv``
    the sampled datasets
``curves/<algorithm>_rep<r>.tsv``
    iteration, train_nll_per_case, test_nll_per_case, violation
``networks/<algorithm>_rep<r>.json``
    the learned networks
``summary.tsv``
    algorithm, replication, seed, train_nll_per_case, test_nll_per_case,
    violation, quadratic_loss; the ``baseline`` row scores the ground truth

Seeds: replication ``r`` initialises from ``seed + r``; the training and
test sets use ``seed + TRAIN_SEED_OFFSET`` and ``seed + TEST_SEED_OFFSET``.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

from .constraints import InequalitySystem
from .datagen import SamplingSpec, forward_sample, structure_one, structure_two
from .dataset import Dataset, save_dataset
from .evaluation import avg_neg_log_likelihood, avg_quadratic_loss
from .learning import ALGORITHMS, LearnConfig, learn, random_init
from .network import (
    ConstraintSet,
    FormatError,
    Network,
    NetworkError,
    load_constraints,
    load_network,
    save_network,
)

TRAIN_SEED_OFFSET = 10_000
TEST_SEED_OFFSET = 20_000
SUMMARY_COLUMNS = (
    "algorithm", "replication", "seed", "train_nll_per_case",
    "test_nll_per_case", "violation", "quadratic_loss",
)
FIXTURES = {"structure1": structure_one, "structure2": structure_two}


@dataclass
class ExperimentConfig:
    network: str
    constraints: str | None = None
    structure: str | None = None
    hidden: list[str] = field(default_factory=list)
    target: str | None = None
    train_count: int = 1000
    test_count: int = 10000
    replications: int = 10
    algorithms: list[str] = field(default_factory=lambda: ["em", "em-qc"])
    iterations: int = 100
    penalty_weight: float = 2.0
    step_size: float = 0.05
    min_prob: float = 1e-6
    seed: int = 0
    record_every: int = 1
    weight_scales_correction: bool = True
    output_dir: str = "experiment-out"

    def __post_init__(self):
        if self.replications < 1:
            raise NetworkError("replications must be at least 1")
        if self.train_count < 1 or self.test_count < 1:
            raise NetworkError("train_count and test_count must be at least 1")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad or not self.algorithms:
            raise NetworkError(f"algorithms must be a non-empty subset of {ALGORITHMS}")

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        """Read a JSON config; relative file paths resolve against its directory."""
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
        if not isinstance(doc, dict):
            raise FormatError(f"{path}: expected a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise FormatError(f"{path}: unknown config keys {unknown}")
        for key in ("network", "constraints", "structure", "output_dir"):
            value = doc.get(key)
            if isinstance(value, str) and not value.startswith("fixture:"):
                doc[key] = str(path.parent / value)
        try:
            return cls(**doc)
        except TypeError as exc:
            raise FormatError(f"{path}: {exc}") from None

    def learn_config(self, algorithm: str, seed: int) -> LearnConfig:
        return LearnConfig(
            algorithm=algorithm, iterations=self.iterations,
            penalty_weight=self.penalty_weight, step_size=self.step_size,
            min_prob=self.min_prob, seed=seed, record_every=self.record_every,
            weight_scales_correction=self.weight_scales_correction,
        )


def resolve_inputs(cfg: ExperimentConfig) -> tuple[Network, Network, ConstraintSet | None, list[str], str | None]:
    """Ground truth, learning structure, constraints, hidden variables, target."""
    hidden, target, cs = list(cfg.hidden), cfg.target, None
    if cfg.network.startswith("fixture:"):
        name = cfg.network.split(":", 1)[1]
        if name not in FIXTURES:
            raise NetworkError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}")
        fx = FIXTURES[name]()
        truth, cs = fx.network, fx.constraints
        hidden = hidden or sorted(fx.hidden)
        target = target or fx.target
    else:
        truth = load_network(cfg.network)
    structure = load_network(cfg.structure) if cfg.structure else truth
    if structure.names != truth.names or any(
        structure.parents(n) != truth.parents(n) or structure.variable(n) != truth.variable(n)
        for n in truth.names
    ):
        raise NetworkError("learning structure must match the ground-truth network's variables and parents")
    if cfg.constraints:
        cs = load_constraints(cfg.constraints, truth)
    if any(a.endswith("-qc") for a in cfg.algorithms) and cs is None:
        raise NetworkError("constrained algorithms need a constraints file")
    for name in hidden:
        truth.variable(name)
    if target is not None:
        truth.variable(target)
        if target in hidden:
            raise NetworkError("the target variable cannot be hidden")
    return truth, structure, cs, hidden, target


@dataclass
class RunSummary:
    algorithm: str
    replication: int | None
    seed: int | None
    train_nll_per_case: float
    test_nll_per_case: float
    violation: float | None
    quadratic_loss: float | None

    def cells(self) -> list[str]:
        def fmt(x):
            return "" if x is None else (str(x) if isinstance(x, (int, str)) else repr(float(x)))
        return [fmt(getattr(self, c)) for c in SUMMARY_COLUMNS]


def _run_one(args) -> tuple[RunSummary, Network, list]:
    structure, train, test, cs, target, lcfg, replication = args
    net0 = random_init(structure, lcfg.seed, lcfg.min_prob)
    net, trace = learn(net0, train, lcfg, cs, test)
    last = trace.rows[-1]
    summary = RunSummary(
        algorithm=lcfg.algorithm, replication=replication, seed=lcfg.seed,
        train_nll_per_case=last.train_nll_per_case,
        test_nll_per_case=last.test_nll_per_case,
        violation=last.violation,
        quadratic_loss=avg_quadratic_loss(net, test, target) if target else None,
    )
    return summary, net, trace


@dataclass
class ExperimentResult:
    baseline: RunSummary
    runs: list[RunSummary]
    networks: dict[tuple[str, int], Network]
    traces: dict[tuple[str, int], object]
    train: Dataset
    test: Dataset


def run_experiment(cfg: ExperimentConfig, out_dir=None, jobs: int = 1) -> ExperimentResult:
    truth, structure, cs, hidden, target = resolve_inputs(cfg)
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    (out / "curves").mkdir(parents=True, exist_ok=True)
    (out / "networks").mkdir(parents=True, exist_ok=True)

    train = forward_sample(truth, SamplingSpec(cfg.train_count, frozenset(hidden), cfg.seed + TRAIN_SEED_OFFSET))
    test = forward_sample(truth, SamplingSpec(cfg.test_count, frozenset(hidden), cfg.seed + TEST_SEED_OFFSET))
    save_dataset(train, out / "train.csv", truth)
    save_dataset(test, out / "test.csv", truth)

    baseline = RunSummary(
        "baseline", None, None,
        avg_neg_log_likelihood(truth, train), avg_neg_log_likelihood(truth, test),
        InequalitySystem(truth, cs).total(truth) if cs is not None else None,
        avg_quadratic_loss(truth, test, target) if target else None,
    )

    tasks, keys = [], []
    for r in range(cfg.replications):
        for algorithm in cfg.algorithms:
            lcfg = cfg.learn_config(algorithm, cfg.seed + r)
            tasks.append((structure, train, test, cs, target, lcfg, r))
            keys.append((algorithm, r))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]

    runs, networks, traces = [], {}, {}
    for key, (summary, net, trace) in zip(keys, results):
        algorithm, r = key
        runs.append(summary)
        networks[key] = net
        traces[key] = trace
        trace.write_curve(out / "curves" / f"{algorithm}_rep{r:02d}.tsv")
        save_network(net, out / "networks" / f"{algorithm}_rep{r:02d}.json")

    with open(out / "summary.tsv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        writer.writerow(baseline.cells())
        for summary in runs:
            writer.writerow(summary.cells())
    return ExperimentResult(baseline, runs, networks, traces, train, test)
