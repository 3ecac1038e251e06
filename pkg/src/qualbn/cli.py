"""Command-line interface.

Exit status: 0 success, 1 domain error (invalid network, constraint
breach, bad usage), 2 I/O or parse error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .constraints import audit, format_report
from .datagen import SamplingSpec, forward_sample, fixture_networks
from .dataset import load_dataset, save_dataset
from .evaluation import evaluate
from .experiment import SUMMARY_COLUMNS, ExperimentConfig, run_experiment
from .learning import ALGORITHMS, CURVE_COLUMNS, LearnConfig, LearningError, learn, random_init
from .network import (
    FormatError,
    Network,
    NetworkError,
    constraints_to_dict,
    load_constraints,
    load_network,
    network_from_dict,
    save_constraints,
    save_network,
    validate_network,
    _read_json,
)

EXIT_OK, EXIT_DOMAIN, EXIT_IO = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_DOMAIN, f"{self.prog}: error: {message}\n")


def cmd_validate(args) -> int:
    try:
        doc = _read_json(args.network)
        net = network_from_dict(doc, args.network)
    except NetworkError as exc:
        if isinstance(exc, FormatError):
            raise
        print(exc)
        return EXIT_DOMAIN
    defects = validate_network(net)
    for d in defects:
        print(d)
    if not defects:
        print("valid")
    return EXIT_DOMAIN if defects else EXIT_OK


def cmd_sample(args) -> int:
    net = load_network(args.network)
    data = forward_sample(net, SamplingSpec(args.count, frozenset(args.hidden), args.seed))
    save_dataset(data, args.out, net)
    return EXIT_OK


def cmd_learn(args) -> int:
    if args.algorithm.endswith("-qc") and not args.constraints:
        raise UsageError(f"algorithm {args.algorithm} requires --constraints")
    structure = load_network(args.network)
    has_cpts = "cpts" in _read_json(args.network)
    cs = load_constraints(args.constraints, structure) if args.constraints else None
    data = load_dataset(args.data, structure)
    test = load_dataset(args.test_data, structure) if args.test_data else None
    cfg = LearnConfig(
        algorithm=args.algorithm, iterations=args.iterations,
        penalty_weight=args.weight, step_size=args.step_size,
        min_prob=args.min_prob, seed=args.seed, record_every=args.record_every,
        weight_scales_correction=not args.unscaled_correction,
    )
    net0 = structure if has_cpts and not args.random_init else random_init(structure, args.seed, args.min_prob)
    try:
        net, trace = learn(net0, data, cfg, cs, test)
    except LearningError as exc:
        if args.curve_out:
            exc.trace.write_curve(args.curve_out)
        print(f"learning failed: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    if args.curve_out:
        trace.write_curve(args.curve_out)
    save_network(net, args.out)
    last = trace.rows[-1]
    print(f"iterations\t{last.iteration}")
    print(f"train_nll_per_case\t{last.train_nll_per_case!r}")
    if last.test_nll_per_case is not None:
        print(f"test_nll_per_case\t{last.test_nll_per_case!r}")
    if last.violation is not None:
        print(f"violation\t{last.violation!r}")
    return EXIT_OK


def cmd_eval(args) -> int:
    net = load_network(args.network)
    test = load_dataset(args.test_data, net)
    print(evaluate(net, test, args.target).format())
    return EXIT_OK


def cmd_violations(args) -> int:
    net = load_network(args.network)
    cs = load_constraints(args.constraints, net)
    print(format_report(audit(net, cs)))
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    result = run_experiment(cfg, args.out, jobs=args.jobs)
    print("\t".join(SUMMARY_COLUMNS))
    for row in [result.baseline, *result.runs]:
        print("\t".join(row.cells()))
    return EXIT_OK


def cmd_fixtures(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for fx in fixture_networks():
        save_network(fx.network, out / f"{fx.name}.json")
        save_constraints(fx.constraints, out / f"{fx.name}.constraints.json")
        train, test = (1000, 10000) if fx.name == "structure1" else (200, 5000)
        config = {
            "network": f"{fx.name}.json",
            "constraints": f"{fx.name}.constraints.json",
            "hidden": sorted(fx.hidden),
            "target": fx.target,
            "train_count": train,
            "test_count": test,
            "replications": 10,
            "algorithms": ["em", "em-qc"],
            "iterations": 100,
            "penalty_weight": 2.0,
            "seed": 0,
            "output_dir": f"{fx.name}-out",
        }
        (out / f"{fx.name}.experiment.json").write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
        print(out / f"{fx.name}.json")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qualbn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="check a network file")
    p.add_argument("network")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sample", help="draw a dataset from a network")
    p.add_argument("network")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--hidden", action="append", default=[], help="variable to leave unrecorded (repeatable)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser(
        "learn", help="learn CPTs for a fixed structure",
        epilog="curve columns: " + ", ".join(CURVE_COLUMNS),
    )
    p.add_argument("network", help="structure file; its CPTs, if any, are the starting point")
    p.add_argument("data")
    p.add_argument("--algorithm", choices=ALGORITHMS, default="em")
    p.add_argument("--iterations", type=int, default=100)
    p.add_argument("--weight", type=float, default=2.0, help="penalty weight w")
    p.add_argument("--step-size", type=float, default=0.05)
    p.add_argument("--min-prob", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--record-every", type=int, default=1)
    p.add_argument("--random-init", action="store_true", help="ignore the file's CPTs and start from a random network")
    p.add_argument("--unscaled-correction", action="store_true",
                   help="em-qc: do not multiply the rescaled violation step by the weight")
    p.add_argument("--constraints")
    p.add_argument("--test-data")
    p.add_argument("--curve-out")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("eval", help="score a network on test data")
    p.add_argument("network")
    p.add_argument("test_data")
    p.add_argument("--target")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("violations", help="audit a network against qualitative influences")
    p.add_argument("network")
    p.add_argument("constraints")
    p.set_defaults(func=cmd_violations)

    p = sub.add_parser(
        "experiment", help="run a replicated learning experiment",
        epilog="summary columns: " + ", ".join(SUMMARY_COLUMNS)
               + "; curve columns: " + ", ".join(CURVE_COLUMNS),
    )
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("fixtures", help="write the bundled fixture networks and experiment configs")
    p.add_argument("out")
    p.set_defaults(func=cmd_fixtures)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"qualbn: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (FormatError, OSError) as exc:
        print(f"qualbn: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NetworkError, ValueError) as exc:
        print(f"qualbn: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
