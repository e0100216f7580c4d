"""Replicated studies over the named generators, reported as small tables."""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .datagen import dataset1, make_builtin
from .discover import DiscoveryConfig, Verdict, discover
from .graph import Dag, d_separated, markov_equivalence_class, minimal_edge_dags
from .indep import fisher_z_partial_correlation


@dataclass(frozen=True)
class ExperimentReport:
    name: str
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]
    reps: int
    config: dict
    wall_time_s: float

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer)
        writer.writerow(self.columns)
        writer.writerows(self.rows)
        return buffer.getvalue()

    def to_markdown(self) -> str:
        lines = [
            f"## {self.name}",
            "",
            "| " + " | ".join(self.columns) + " |",
            "| " + " | ".join("---" for _ in self.columns) + " |",
        ]
        lines += ["| " + " | ".join(str(v) for v in row) + " |" for row in self.rows]
        meta = ", ".join(f"{k}={v}" for k, v in sorted(self.config.items()))
        lines += ["", f"replicates: {self.reps}; wall time: {self.wall_time_s:.1f}s; {meta}", ""]
        return "\n".join(lines)

    def save(self, directory, stem: str | None = None) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        stem = stem or self.name.replace(":", "_")
        (directory / f"{stem}.csv").write_text(self.to_csv(), encoding="utf-8")
        (directory / f"{stem}.md").write_text(self.to_markdown(), encoding="utf-8")


def replicate_seed(master_seed: int, name: str, rep: int) -> int:
    """Stable per-replicate seed derived from (master seed, study name, index)."""
    tag = int.from_bytes(hashlib.sha256(name.encode()).digest()[:4], "big")
    return int(np.random.SeedSequence([int(master_seed), tag, int(rep)]).generate_state(1)[0])


def _map_replicates(fn, count: int, threads: int | None):
    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(count)))
    return [fn(rep) for rep in range(count)]


def partial_correlation_cases(dag: Dag) -> list[tuple[int, int, frozenset[int], bool]]:
    """All (i, j, S) combinations with their ground-truth zero/nonzero label.

    The label is True when the graph d-separates i and j given S, i.e. the
    implied partial correlation is truly zero.
    """
    cases = []
    nodes = range(dag.num_nodes)
    for i, j in itertools.combinations(nodes, 2):
        others = [k for k in nodes if k not in (i, j)]
        for size in range(len(others) + 1):
            for s in itertools.combinations(others, size):
                cases.append((i, j, frozenset(s), d_separated(dag, {i}, {j}, s)))
    return cases


def run_faithfulness_miss(
    sample_sizes: Sequence[int],
    reps: int,
    alpha: float = 0.05,
    seed: int = 0,
    threads: int | None = None,
) -> ExperimentReport:
    """How often a truly-nonzero partial correlation is accepted as zero.

    Per replicate of the Gaussian diamond, every (pair, conditioning set)
    combination is tested with Fisher-z; the replicate counts as a miss when
    any combination the graph does NOT d-separate fails to reject.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    start = time.perf_counter()
    rows = []
    for n in sample_sizes:
        study = f"dataset1:n={n}"

        def one(rep: int, n=n, study=study) -> bool:
            data, dag, _ = dataset1(n, replicate_seed(seed, study, rep))
            for i, j, s, truly_zero in partial_correlation_cases(dag):
                if truly_zero:
                    continue
                if fisher_z_partial_correlation(data, i, j, s).p_value >= alpha:
                    return True
            return False

        misses = sum(_map_replicates(one, reps, threads))
        rows.append((n, misses, reps, misses / reps))
    return ExperimentReport(
        name="dataset1",
        columns=("sample_size", "misses", "reps", "proportion"),
        rows=tuple(rows),
        reps=reps,
        config={"alpha": alpha, "seed": seed},
        wall_time_s=time.perf_counter() - start,
    )


def classify_discovery(result, truth: Dag, faithful_mode: bool) -> str:
    """Map one discovery outcome to correct / wrong / undecided / truncated.

    In faithful mode the minimal-edge DAGs stand in for the answer: correct
    when they are exactly the true Markov equivalence class, undecided only
    when no DAG fit at all.
    """
    if result.truncated:
        return "truncated"
    if faithful_mode:
        if not result.dags:
            return "undecided"
        estimate = set(minimal_edge_dags(list(result.dags)))
        target = set(markov_equivalence_class(truth))
        return "correct" if estimate == target else "wrong"
    if result.verdict is Verdict.UNIQUE:
        return "correct" if result.dags[0] == truth else "wrong"
    return "undecided"


def run_discovery_study(
    dataset: str,
    method: DiscoveryConfig,
    reps: int,
    seed: int = 0,
    threads: int | None = None,
    n: int = 400,
) -> ExperimentReport:
    """Simulate, discover, classify; one table row per study."""
    if reps < 1:
        raise ValueError("reps must be at least 1")
    start = time.perf_counter()

    def one(rep: int) -> str:
        data, truth = make_builtin(dataset, replicate_seed(seed, dataset, rep), n=n)
        result = discover(data, method)
        return classify_discovery(result, truth, method.faithful_mode)

    labels = _map_replicates(one, reps, threads)
    counts = {label: labels.count(label) for label in ("correct", "wrong", "undecided", "truncated")}
    summary = f"{counts['correct']}/{counts['wrong']}/{counts['undecided']}"
    row = (
        dataset,
        counts["correct"],
        counts["wrong"],
        counts["undecided"],
        counts["truncated"],
        summary,
    )
    return ExperimentReport(
        name=dataset,
        columns=("study", "correct", "wrong", "undecided", "truncated", "summary"),
        rows=(row,),
        reps=reps,
        config={
            "regressor": method.regressor.value,
            "alpha": method.test.alpha,
            "hsic_method": method.test.hsic_method.value,
            "faithful_mode": method.faithful_mode,
            "seed": seed,
            "n": n,
        },
        wall_time_s=time.perf_counter() - start,
    )
