"""Seeded structural-equation simulation and the named benchmark generators.

Each node's noise comes from its own counter-based stream (Philox keyed on
(seed, 0, node)), so draws are platform-stable and independent of evaluation
order. Coefficient sampling, where a generator resamples per call, uses the
separate stream (seed, 1).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .graph import Dag

_NOISE_STREAM = 0
_COEFF_STREAM = 1


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *key])))


def default_names(d: int) -> tuple[str, ...]:
    return tuple(f"X{i + 1}" for i in range(d))


@dataclass(frozen=True)
class Dataset:
    """n x d numeric sample with column names; the sole input to discovery."""

    names: tuple[str, ...]
    values: np.ndarray
    provenance: tuple | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("values must be a 2-d array")
        if len(self.names) != values.shape[1]:
            raise ValueError("column count must match name count")
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate column names")
        if not np.isfinite(values).all():
            raise ValueError("dataset contains non-finite values")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def num_columns(self) -> int:
        return self.values.shape[1]

    def column(self, i: int) -> np.ndarray:
        return self.values[:, i]

    def matrix(self) -> np.ndarray:
        return self.values

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValueError(f"unknown column {name!r}; have {list(self.names)}") from None


_TERM_FUNCS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "linear": lambda x: x,
    "gauss_bump": lambda x: np.exp(-2.0 * x * x),
    "shifted_square": lambda x: (x + 1.0) ** 2,
}


@dataclass(frozen=True)
class Term:
    kind: str
    coef: float

    def __post_init__(self):
        if self.kind not in _TERM_FUNCS:
            raise ValueError(f"unknown term kind {self.kind!r}")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.coef * _TERM_FUNCS[self.kind](x)


@dataclass(frozen=True)
class AdditiveMechanism:
    """value = offset + sum of per-parent terms + noise."""

    terms: tuple[Term, ...] = ()
    offset: float = 0.0

    @property
    def arity(self) -> int:
        return len(self.terms)

    def evaluate(self, parent_cols: Sequence[np.ndarray], eps: np.ndarray) -> np.ndarray:
        total = np.full_like(eps, self.offset)
        for term, col in zip(self.terms, parent_cols):
            total += term(col)
        return total + eps


@dataclass(frozen=True)
class ProductMechanism:
    """value = (linear combination of parents) * noise."""

    coeffs: tuple[float, ...]

    def __post_init__(self):
        if not self.coeffs:
            raise ValueError("product mechanism needs at least one parent")

    @property
    def arity(self) -> int:
        return len(self.coeffs)

    def evaluate(self, parent_cols: Sequence[np.ndarray], eps: np.ndarray) -> np.ndarray:
        base = np.zeros_like(eps)
        for coef, col in zip(self.coeffs, parent_cols):
            base += coef * col
        return base * eps


Mechanism = Union[AdditiveMechanism, ProductMechanism]


@dataclass(frozen=True)
class NoiseSpec:
    kind: str  # "gaussian" (mu, sigma) or "uniform" (a, b)
    params: tuple[float, float]
    scale: float = 1.0

    def __post_init__(self):
        if self.kind == "gaussian":
            if self.params[1] <= 0:
                raise ValueError("gaussian sigma must be positive")
        elif self.kind == "uniform":
            if self.params[0] >= self.params[1]:
                raise ValueError("uniform bounds must satisfy a < b")
        else:
            raise ValueError(f"unknown noise kind {self.kind!r}")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "gaussian":
            mu, sigma = self.params
            raw = mu + sigma * rng.standard_normal(n)
        else:
            raw = rng.uniform(self.params[0], self.params[1], size=n)
        return self.scale * raw


@dataclass(frozen=True)
class SemSpec:
    """Structural equations: one mechanism and one noise source per node.

    Mechanism arguments follow the node's parents in ascending index order.
    """

    dag: Dag
    mechanisms: tuple[Mechanism, ...]
    noises: tuple[NoiseSpec, ...]

    def __post_init__(self):
        d = self.dag.num_nodes
        if len(self.mechanisms) != d or len(self.noises) != d:
            raise ValueError("need one mechanism and one noise spec per node")
        for i, mech in enumerate(self.mechanisms):
            if mech.arity != len(self.dag.parents(i)):
                raise ValueError(
                    f"node {i}: mechanism arity {mech.arity} != parent count "
                    f"{len(self.dag.parents(i))}"
                )


def simulate(
    spec: SemSpec,
    n: int,
    seed: int,
    names: Sequence[str] | None = None,
    return_noise: bool = False,
):
    """Draw n i.i.d. rows from the structural equations.

    Noise is sampled independently per node and row; mechanisms are evaluated
    in topological order. Deterministic for a fixed seed.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    d = spec.dag.num_nodes
    names = tuple(names) if names is not None else default_names(d)
    values = np.empty((n, d))
    noise = np.empty((n, d))
    for i in range(d):
        noise[:, i] = spec.noises[i].draw(_stream(seed, _NOISE_STREAM, i), n)
    for i in spec.dag.topological_order():
        parent_cols = [values[:, p] for p in sorted(spec.dag.parents(i))]
        values[:, i] = spec.mechanisms[i].evaluate(parent_cols, noise[:, i])
    data = Dataset(names=names, values=values, provenance=(spec, seed))
    if return_noise:
        return data, noise
    return data


def _linear(*coeffs: float) -> AdditiveMechanism:
    return AdditiveMechanism(terms=tuple(Term("linear", c) for c in coeffs))


def _root() -> AdditiveMechanism:
    return AdditiveMechanism()


def _interval_coef(rng: np.random.Generator) -> float:
    # i.i.d. uniform on [-2, -1] union [1, 2]
    sign = 1.0 if rng.uniform() < 0.5 else -1.0
    return float(sign * rng.uniform(1.0, 2.0))


def dataset1_sem(rng: np.random.Generator) -> SemSpec:
    """Gaussian diamond with freshly sampled slopes and noise scales."""
    dag = Dag(4, [(0, 1), (0, 2), (1, 3), (2, 3)])
    slope = {edge: float(rng.uniform(-5.0, 5.0)) for edge in sorted(dag.edges)}
    noise_scale = [float(rng.uniform(0.0, 0.5)) for _ in range(4)]
    gauss = lambda s: NoiseSpec("gaussian", (0.0, 1.0), scale=s)
    return SemSpec(
        dag=dag,
        mechanisms=(
            _root(),
            _linear(slope[(0, 1)]),
            _linear(slope[(0, 2)]),
            _linear(slope[(1, 3)], slope[(2, 3)]),
        ),
        noises=tuple(gauss(s) for s in noise_scale),
    )


def dataset1(n: int, seed: int) -> tuple[Dataset, Dag, SemSpec]:
    sem = dataset1_sem(_stream(seed, _COEFF_STREAM))
    return simulate(sem, n, seed), sem.dag, sem


DATASET2_VARIANTS = ("lin1", "nonlin1", "lin2", "nonlin2")


def dataset2_sem(variant: str, rng: np.random.Generator) -> SemSpec:
    """Four-variable benchmarks with coefficients from [-2,-1] union [1,2]."""
    if variant not in DATASET2_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {DATASET2_VARIANTS}")
    uniform = NoiseSpec("uniform", (-0.5, 0.5))
    c = lambda: _interval_coef(rng)
    if variant in ("lin1", "nonlin1"):
        dag = Dag(4, [(0, 2), (0, 3), (1, 3), (2, 3)])
        if variant == "lin1":
            m3 = _linear(c())
            m4 = _linear(c(), c(), c())
        else:
            m3 = AdditiveMechanism(terms=(Term("gauss_bump", c()),), offset=-1.0)
            m4 = AdditiveMechanism(
                terms=(Term("shifted_square", c()), Term("linear", c()), Term("linear", c()))
            )
        mechanisms = (_root(), _root(), m3, m4)
    else:
        dag = Dag(4, [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)])
        if variant == "lin2":
            m2 = _linear(c())
            m3 = _linear(c(), c())
            m4 = _linear(c(), c())
        else:
            m2 = _linear(c())
            m3 = AdditiveMechanism(terms=(Term("gauss_bump", c()), Term("linear", c())))
            m4 = AdditiveMechanism(terms=(Term("shifted_square", c()), Term("linear", c())))
        mechanisms = (_root(), m2, m3, m4)
    return SemSpec(dag=dag, mechanisms=mechanisms, noises=(uniform,) * 4)


def dataset2(variant: str, seed: int, n: int = 400) -> tuple[Dataset, Dag, SemSpec]:
    sem = dataset2_sem(variant, _stream(seed, _COEFF_STREAM))
    return simulate(sem, n, seed), sem.dag, sem


def dataset3_sem() -> SemSpec:
    # X3 = X2 - X1 + N3 cancels the X1 path exactly, so X1 and X3 are
    # independent even though the graph does not d-separate them.
    dag = Dag(3, [(0, 1), (0, 2), (1, 2)])
    uniform = NoiseSpec("uniform", (0.0, 0.5))
    return SemSpec(
        dag=dag,
        mechanisms=(_root(), _linear(1.0), _linear(-1.0, 1.0)),
        noises=(uniform,) * 3,
    )


def dataset3(seed: int, n: int = 400) -> tuple[Dataset, Dag]:
    sem = dataset3_sem()
    return simulate(sem, n, seed), sem.dag


def dataset4_sem() -> SemSpec:
    dag = Dag(4, [(0, 2), (0, 3), (1, 3), (2, 3)])
    gauss = lambda s: NoiseSpec("gaussian", (0.0, 1.0), scale=s)
    return SemSpec(
        dag=dag,
        mechanisms=(_root(), _root(), _linear(-1.0), _linear(1.5, -2.0, 1.0)),
        noises=(gauss(0.5), gauss(0.5), gauss(0.1), gauss(1.0)),
    )


def dataset4(seed: int, n: int = 400) -> tuple[Dataset, Dag]:
    sem = dataset4_sem()
    return simulate(sem, n, seed), sem.dag


def dataset5_sem() -> SemSpec:
    dag = Dag(3, [(0, 1), (0, 2), (1, 2)])
    uniform = NoiseSpec("uniform", (-0.5, 0.5))
    return SemSpec(
        dag=dag,
        mechanisms=(_root(), _linear(1.0), ProductMechanism((1.0, -1.0))),
        noises=(uniform, NoiseSpec("uniform", (-0.5, 0.5), scale=0.5),
                NoiseSpec("uniform", (-0.5, 0.5), scale=0.5)),
    )


def dataset5(seed: int, n: int = 400) -> tuple[Dataset, Dag]:
    sem = dataset5_sem()
    return simulate(sem, n, seed), sem.dag


BUILTIN_DATASETS = ("dataset1", "dataset2", "dataset3", "dataset4", "dataset5")


def make_builtin(name: str, seed: int, n: int = 400) -> tuple[Dataset, Dag]:
    """Resolve "dataset3" or "dataset2:nonlin1" style names to a sample."""
    base, _, variant = name.partition(":")
    if base == "dataset1":
        data, dag, _ = dataset1(n, seed)
    elif base == "dataset2":
        data, dag, _ = dataset2(variant or "lin1", seed, n)
    elif base == "dataset3":
        data, dag = dataset3(seed, n)
    elif base == "dataset4":
        data, dag = dataset4(seed, n)
    elif base == "dataset5":
        data, dag = dataset5(seed, n)
    else:
        raise ValueError(f"unknown builtin dataset {name!r}")
    return data, dag


def semspec_to_json(spec: SemSpec, names: Sequence[str] | None = None) -> str:
    names = tuple(names) if names is not None else default_names(spec.dag.num_nodes)
    equations = []
    for i in range(spec.dag.num_nodes):
        mech = spec.mechanisms[i]
        if isinstance(mech, AdditiveMechanism):
            mech_json = {
                "name": "additive",
                "offset": mech.offset,
                "terms": [{"kind": t.kind, "coef": t.coef} for t in mech.terms],
            }
        else:
            mech_json = {"name": "product", "coeffs": list(mech.coeffs)}
        noise = spec.noises[i]
        equations.append(
            {
                "node": names[i],
                "parents": [names[p] for p in sorted(spec.dag.parents(i))],
                "mechanism": mech_json,
                "noise": {"kind": noise.kind, "params": list(noise.params), "scale": noise.scale},
            }
        )
    return json.dumps({"nodes": list(names), "equations": equations}, indent=2) + "\n"


def semspec_from_json(text: str) -> tuple[SemSpec, tuple[str, ...]]:
    doc = json.loads(text)
    names = tuple(doc["nodes"])
    index = {name: k for k, name in enumerate(names)}
    d = len(names)
    edges = []
    mechanisms: list[Mechanism | None] = [None] * d
    noises: list[NoiseSpec | None] = [None] * d
    for eq in doc["equations"]:
        i = index[eq["node"]]
        parent_ids = [index[p] for p in eq["parents"]]
        edges += [(p, i) for p in parent_ids]
        mech = eq["mechanism"]
        if mech["name"] == "additive":
            pairs = sorted(zip(parent_ids, mech["terms"]))
            mechanisms[i] = AdditiveMechanism(
                terms=tuple(Term(t["kind"], float(t["coef"])) for _, t in pairs),
                offset=float(mech.get("offset", 0.0)),
            )
        elif mech["name"] == "product":
            pairs = sorted(zip(parent_ids, mech["coeffs"]))
            mechanisms[i] = ProductMechanism(tuple(float(c) for _, c in pairs))
        else:
            raise ValueError(f"unknown mechanism {mech['name']!r}")
        noise = eq["noise"]
        noises[i] = NoiseSpec(noise["kind"], tuple(noise["params"]), float(noise.get("scale", 1.0)))
    if any(m is None for m in mechanisms) or any(s is None for s in noises):
        raise ValueError("every node needs an equation entry")
    dag = Dag(d, edges)
    return SemSpec(dag, tuple(mechanisms), tuple(noises)), names


def write_csv(data: Dataset, path_or_buffer) -> None:
    """Comma-separated, header row, 17 significant digits (lossless round-trip)."""

    def _dump(handle):
        handle.write(",".join(data.names) + "\n")
        for row in data.values:
            handle.write(",".join(f"{v:.17g}" for v in row) + "\n")

    if hasattr(path_or_buffer, "write"):
        _dump(path_or_buffer)
    else:
        with open(path_or_buffer, "w", encoding="utf-8", newline="") as handle:
            _dump(handle)


def read_csv(path_or_buffer) -> Dataset:
    if hasattr(path_or_buffer, "read"):
        handle = path_or_buffer
        rows = list(csv.reader(handle))
    else:
        with open(path_or_buffer, "r", encoding="utf-8", newline="") as handle:
            rows = list(csv.reader(handle))
    if not rows:
        raise ValueError("empty CSV: expected a header row")
    names = tuple(name.strip() for name in rows[0])
    if any(not name for name in names):
        raise ValueError("blank column name in header row")
    body = [row for row in rows[1:] if row]
    if not body:
        raise ValueError("CSV has a header but no data rows")
    values = np.empty((len(body), len(names)))
    for r, row in enumerate(body, start=2):
        if len(row) != len(names):
            raise ValueError(f"row {r}: expected {len(names)} fields, got {len(row)}")
        for c, cell in enumerate(row):
            try:
                values[r - 2, c] = float(cell)
            except ValueError:
                raise ValueError(
                    f"row {r}, column {names[c]!r}: non-numeric value {cell.strip()!r}"
                ) from None
    return Dataset(names=names, values=values)
