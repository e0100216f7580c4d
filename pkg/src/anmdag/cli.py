"""Command-line surface: discover, simulate, experiment, hsic, pcorr."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .datagen import (
    Dataset,
    make_builtin,
    read_csv,
    semspec_from_json,
    simulate,
    write_csv,
)
from .discover import DiscoveryConfig, Verdict, discover
from .experiments import run_discovery_study, run_faithfulness_miss
from .graph import dag_to_dot, dag_to_text
from .indep import TestConfig, TestMethod, fisher_z_partial_correlation, hsic_pvalue_gamma, hsic_pvalue_permutation
from .regress import GpConfig, RegressorKind

EXIT_UNIQUE = 0
EXIT_ERROR = 1
EXIT_TRUNCATED = 2
EXIT_MULTIPLE = 3
EXIT_NO_MODEL = 4

I_DO_NOT_KNOW = "I do not know."


def _add_test_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--alpha", type=float, default=0.05, help="significance level")
    parser.add_argument("--hsic-method", choices=["gamma", "permutation"], default="gamma")
    parser.add_argument("--permutations", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=0)


def _add_discovery_flags(parser: argparse.ArgumentParser) -> None:
    _add_test_flags(parser)
    parser.add_argument("--regressor", choices=["linear", "gp"], default="linear")
    parser.add_argument("--faithful-mode", action="store_true")
    parser.add_argument("--max-branches", type=int, default=256)
    parser.add_argument("--gp-starts", type=int, default=5)
    parser.add_argument("--gp-max-iter", type=int, default=200)
    parser.add_argument(
        "--prune-test-all-predecessors",
        action="store_true",
        help="prune against all predecessors instead of the current parent set",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anmdag",
        description="Additive-noise causal discovery: enumerate all DAGs with independent residuals.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_discover = sub.add_parser("discover", help="run discovery on a CSV sample")
    p_discover.add_argument("csv", help="input CSV with a header row")
    _add_discovery_flags(p_discover)
    p_discover.add_argument("-o", "--output", default=".", help="output directory")

    p_simulate = sub.add_parser("simulate", help="sample from a builtin or a spec file")
    p_simulate.add_argument("builtin", nargs="?", help="dataset1..dataset5 or dataset2:<variant>")
    p_simulate.add_argument("--spec-file", help="JSON structural-equation spec")
    p_simulate.add_argument("-n", type=int, default=400)
    p_simulate.add_argument("--seed", type=int, default=0)
    p_simulate.add_argument("-o", "--output", required=True, help="output CSV path")

    p_experiment = sub.add_parser("experiment", help="run a replicated study")
    p_experiment.add_argument("name", help="dataset1, dataset2:<variant>, dataset3..dataset5")
    p_experiment.add_argument("--reps", type=int, default=100)
    p_experiment.add_argument("--sizes", default="100,1000,10000", help="dataset1 sample sizes")
    p_experiment.add_argument("--threads", type=int, default=os.cpu_count())
    _add_discovery_flags(p_experiment)
    p_experiment.add_argument("-o", "--output", default=".", help="report directory")

    p_hsic = sub.add_parser("hsic", help="HSIC test between two column blocks")
    p_hsic.add_argument("csv")
    p_hsic.add_argument("-x", required=True, help="comma-separated column names")
    p_hsic.add_argument("-y", required=True, help="comma-separated column names")
    _add_test_flags(p_hsic)

    p_pcorr = sub.add_parser("pcorr", help="Fisher-z partial correlation test")
    p_pcorr.add_argument("csv")
    p_pcorr.add_argument("-i", required=True)
    p_pcorr.add_argument("-j", required=True)
    p_pcorr.add_argument("-S", default="", help="comma-separated conditioning columns")
    p_pcorr.add_argument("--alpha", type=float, default=0.05)

    return parser


def _test_config(args) -> TestConfig:
    method = TestMethod.HSIC_PERMUTATION if args.hsic_method == "permutation" else TestMethod.HSIC_GAMMA
    return TestConfig(
        alpha=args.alpha,
        hsic_method=method,
        permutations=args.permutations,
        permutation_seed=args.seed,
    )


def _discovery_config(args) -> DiscoveryConfig:
    kind = RegressorKind.GAUSSIAN_PROCESS if args.regressor == "gp" else RegressorKind.LINEAR
    return DiscoveryConfig(
        regressor=kind,
        test=_test_config(args),
        faithful_mode=args.faithful_mode,
        max_branches=args.max_branches,
        gp=GpConfig(starts=args.gp_starts, max_iter=args.gp_max_iter),
        prune_test_all_predecessors=args.prune_test_all_predecessors,
    )


def _load_discovery_csv(path: str) -> Dataset:
    data = read_csv(path)
    if data.num_columns < 2:
        raise ValueError(f"need at least 2 columns for discovery, got {data.num_columns}")
    if data.n < 20:
        raise ValueError(f"need at least 20 rows for discovery, got {data.n}")
    return data


def _cmd_discover(args) -> int:
    data = _load_discovery_csv(args.csv)
    result = discover(data, _discovery_config(args))

    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    payload = {
        "verdict": result.verdict.value,
        "dags": [
            [[data.names[i], data.names[j]] for i, j in sorted(dag.edges)] for dag in result.dags
        ],
        "p_value_traces": [
            {data.names[i]: p for i, p in sorted(trace.items())} for trace in result.traces
        ],
        "orders_explored": result.orders_explored,
        "truncated": result.truncated,
    }
    (outdir / "result.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    for k, dag in enumerate(result.dags):
        (outdir / f"dag_{k:03d}.dot").write_text(dag_to_dot(dag, data.names), encoding="utf-8")

    if result.verdict is Verdict.UNIQUE:
        print("Unique DAG")
        print(dag_to_text(result.dags[0], data.names), end="")
    else:
        print(I_DO_NOT_KNOW)
    if result.truncated:
        return EXIT_TRUNCATED
    return {
        Verdict.UNIQUE: EXIT_UNIQUE,
        Verdict.MULTIPLE: EXIT_MULTIPLE,
        Verdict.NO_MODEL: EXIT_NO_MODEL,
    }[result.verdict]


def _cmd_simulate(args) -> int:
    if bool(args.builtin) == bool(args.spec_file):
        raise ValueError("pass exactly one of a builtin name or --spec-file")
    if args.n < 1:
        raise ValueError("-n must be at least 1")
    if args.builtin:
        data, dag = make_builtin(args.builtin, args.seed, n=args.n)
        names = data.names
    else:
        spec, names = semspec_from_json(Path(args.spec_file).read_text(encoding="utf-8"))
        data = simulate(spec, args.n, args.seed, names=names)
        dag = spec.dag
    out = Path(args.output)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(data, out)
    dag_path = out.with_suffix(".dag") if out.suffix else Path(str(out) + ".dag")
    dag_path.write_text(dag_to_text(dag, names), encoding="utf-8")
    print(f"wrote {out} and {dag_path}")
    return 0


def _cmd_experiment(args) -> int:
    if args.reps < 1:
        raise ValueError("--reps must be at least 1")
    if args.name == "dataset1":
        sizes = [int(tok) for tok in args.sizes.split(",") if tok.strip()]
        if not sizes:
            raise ValueError("--sizes must list at least one sample size")
        report = run_faithfulness_miss(
            sizes, args.reps, alpha=args.alpha, seed=args.seed, threads=args.threads
        )
    else:
        report = run_discovery_study(
            args.name,
            _discovery_config(args),
            reps=args.reps,
            seed=args.seed,
            threads=args.threads,
        )
    report.save(args.output)
    print(report.to_markdown())
    return 0


def _split_columns(spec: str) -> list[str]:
    names = [tok.strip() for tok in spec.split(",") if tok.strip()]
    if not names:
        raise ValueError("expected at least one column name")
    return names


def _cmd_hsic(args) -> int:
    data = read_csv(args.csv)
    x = data.matrix()[:, [data.index_of(c) for c in _split_columns(args.x)]]
    y = data.matrix()[:, [data.index_of(c) for c in _split_columns(args.y)]]
    if args.hsic_method == "permutation":
        result = hsic_pvalue_permutation(x, y, permutations=args.permutations, seed=args.seed)
    else:
        result = hsic_pvalue_gamma(x, y)
    decision = "reject independence" if result.p_value < args.alpha else "accept independence"
    print(f"statistic={result.statistic:.6g} p={result.p_value:.6g} "
          f"method={result.method.value} n={result.sample_size} -> {decision}")
    return 0


def _cmd_pcorr(args) -> int:
    data = read_csv(args.csv)
    s = [data.index_of(c) for c in _split_columns(args.S)] if args.S.strip() else []
    result = fisher_z_partial_correlation(data, data.index_of(args.i), data.index_of(args.j), s)
    decision = "reject independence" if result.p_value < args.alpha else "accept independence"
    print(f"statistic={result.statistic:.6g} p={result.p_value:.6g} "
          f"method={result.method.value} n={result.sample_size} -> {decision}")
    return 0


_COMMANDS = {
    "discover": _cmd_discover,
    "simulate": _cmd_simulate,
    "experiment": _cmd_experiment,
    "hsic": _cmd_hsic,
    "pcorr": _cmd_pcorr,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, RuntimeError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
