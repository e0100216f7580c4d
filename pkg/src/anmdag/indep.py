"""Independence tests: HSIC (gamma and permutation nulls) and Fisher-z.

The HSIC statistic is the biased V-statistic trace(KHLH)/n^2 with Gaussian
kernels exp(-||a-b||^2 / (2 sigma^2)). The default bandwidth is the median of
the nonzero pairwise Euclidean distances of a block; a constant block gets
sigma = 1 and is reported as statistic 0 with p = 1.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable

import numpy as np
from scipy import stats
from scipy.spatial.distance import pdist, squareform

from .regress import fit_linear

if TYPE_CHECKING:
    from .datagen import Dataset


class TestMethod(enum.Enum):
    HSIC_GAMMA = "gamma"
    HSIC_PERMUTATION = "permutation"
    FISHER_Z = "fisherz"


@dataclass(frozen=True)
class IndependenceResult:
    statistic: float
    p_value: float
    method: TestMethod
    sample_size: int

    def __post_init__(self):
        if not (0.0 <= self.p_value <= 1.0):
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")


@dataclass(frozen=True)
class TestConfig:
    alpha: float = 0.05
    hsic_method: TestMethod = TestMethod.HSIC_GAMMA
    permutations: int = 1000
    bandwidth: float | None = None  # None: median heuristic per block
    permutation_seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must lie in (0, 1)")
        if self.hsic_method is TestMethod.HSIC_PERMUTATION and self.permutations < 100:
            raise ValueError("need at least 100 permutations")
        if self.bandwidth is not None and self.bandwidth <= 0:
            raise ValueError("fixed bandwidth must be positive")


def _as_block(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError("blocks must be 1-d or 2-d arrays")
    if not np.isfinite(x).all():
        raise ValueError("non-finite values in test inputs")
    return x


def median_bandwidth(x: np.ndarray) -> float:
    """Median of the nonzero pairwise Euclidean distances; 1.0 for a constant block."""
    x = _as_block(x)
    dists = pdist(x)
    positive = dists[dists > 0.0]
    return float(np.median(positive)) if positive.size else 1.0


def _gaussian_gram(x: np.ndarray, bandwidth: float) -> np.ndarray:
    sq = squareform(pdist(x, metric="sqeuclidean"))
    return np.exp(-sq / (2.0 * bandwidth * bandwidth))


def _center(k: np.ndarray) -> np.ndarray:
    row = k.mean(axis=0)
    return k - row[None, :] - row[:, None] + row.mean()


def hsic_statistic(x: np.ndarray, y: np.ndarray, bw_x: float, bw_y: float) -> float:
    x, y = _as_block(x), _as_block(y)
    n = x.shape[0]
    if y.shape[0] != n:
        raise ValueError("blocks must have equal row counts")
    if n < 3:
        raise ValueError("HSIC needs at least 3 samples")
    if bw_x <= 0 or bw_y <= 0:
        raise ValueError("bandwidths must be positive")
    kc = _center(_gaussian_gram(x, bw_x))
    lc = _center(_gaussian_gram(y, bw_y))
    return float(np.sum(kc * lc) / (n * n))


def _resolve_bandwidths(
    x: np.ndarray, y: np.ndarray, bw_x: float | None, bw_y: float | None
) -> tuple[float, float, bool]:
    """Resolved (bw_x, bw_y, degenerate); degenerate means some block is constant."""
    degenerate = False
    if bw_x is None:
        d = pdist(x)
        pos = d[d > 0.0]
        bw_x, degenerate = (float(np.median(pos)), degenerate) if pos.size else (1.0, True)
    if bw_y is None:
        d = pdist(y)
        pos = d[d > 0.0]
        bw_y, degenerate = (float(np.median(pos)), degenerate) if pos.size else (1.0, True)
    return bw_x, bw_y, degenerate


def hsic_pvalue_gamma(
    x: np.ndarray,
    y: np.ndarray,
    bw_x: float | None = None,
    bw_y: float | None = None,
) -> IndependenceResult:
    """Moment-matched gamma approximation to the null of n * HSIC.

    Null mean and variance follow Gretton et al.'s gamma test for the biased
    statistic. Degenerate (constant) blocks give statistic 0 and p = 1.
    """
    x, y = _as_block(x), _as_block(y)
    n = x.shape[0]
    if y.shape[0] != n:
        raise ValueError("blocks must have equal row counts")
    if n < 20:
        raise ValueError("gamma approximation needs at least 20 samples")
    bw_x, bw_y, degenerate = _resolve_bandwidths(x, y, bw_x, bw_y)
    if degenerate:
        return IndependenceResult(0.0, 1.0, TestMethod.HSIC_GAMMA, n)

    k = _gaussian_gram(x, bw_x)
    l = _gaussian_gram(y, bw_y)
    kc = _center(k)
    lc = _center(l)
    scaled_stat = float(np.sum(kc * lc) / n)  # n times the V-statistic
    statistic = scaled_stat / n

    prod = (kc * lc / 6.0) ** 2
    var = (prod.sum() - np.trace(prod)) / (n * (n - 1))
    var *= 72.0 * (n - 4) * (n - 5) / (n * (n - 1) * (n - 2) * (n - 3))
    mu_x = (k.sum() - np.trace(k)) / (n * (n - 1))
    mu_y = (l.sum() - np.trace(l)) / (n * (n - 1))
    mean = (1.0 + mu_x * mu_y - mu_x - mu_y) / n
    if mean <= 0.0 or var <= 0.0:
        return IndependenceResult(statistic, 1.0, TestMethod.HSIC_GAMMA, n)
    shape = mean * mean / var
    scale = var * n / mean
    p = float(stats.gamma.sf(scaled_stat, a=shape, scale=scale))
    return IndependenceResult(statistic, p, TestMethod.HSIC_GAMMA, n)


def hsic_pvalue_permutation(
    x: np.ndarray,
    y: np.ndarray,
    bw_x: float | None = None,
    bw_y: float | None = None,
    permutations: int = 1000,
    seed: int = 0,
) -> IndependenceResult:
    """Permutation null: p = (1 + #{stat_b >= stat}) / (B + 1).

    Each permutation is drawn from its own (seed, index) stream, so the
    p-value does not depend on evaluation order.
    """
    x, y = _as_block(x), _as_block(y)
    n = x.shape[0]
    if y.shape[0] != n:
        raise ValueError("blocks must have equal row counts")
    if n < 3:
        raise ValueError("HSIC needs at least 3 samples")
    if permutations < 100:
        raise ValueError("need at least 100 permutations")
    bw_x, bw_y, _ = _resolve_bandwidths(x, y, bw_x, bw_y)

    kc = _center(_gaussian_gram(x, bw_x))
    lc = _center(_gaussian_gram(y, bw_y))
    statistic = float(np.sum(kc * lc) / (n * n))
    exceed = 0
    for b in range(permutations):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), b])))
        perm = rng.permutation(n)
        # H commutes with permutation matrices, so permuting the centered
        # Gram matrix equals centering the permuted one.
        stat_b = float(np.sum(kc * lc[np.ix_(perm, perm)]) / (n * n))
        if stat_b >= statistic:
            exceed += 1
    p = (1.0 + exceed) / (permutations + 1.0)
    return IndependenceResult(statistic, p, TestMethod.HSIC_PERMUTATION, n)


def test_independence(
    data: "Dataset",
    s: Iterable[int],
    residuals: np.ndarray,
    config: TestConfig = TestConfig(),
) -> IndependenceResult:
    """HSIC between the column block s and a residual vector.

    An empty block always passes (p = 1): a node with no remaining regressors
    is a root.
    """
    residuals = np.asarray(residuals, dtype=float).reshape(-1)
    if residuals.shape[0] != data.n:
        raise ValueError("residual length must equal the sample size")
    cols = sorted(set(int(j) for j in s))
    if not cols:
        return IndependenceResult(0.0, 1.0, config.hsic_method, data.n)
    block = data.matrix()[:, cols]
    if config.hsic_method is TestMethod.HSIC_GAMMA:
        return hsic_pvalue_gamma(block, residuals, config.bandwidth, config.bandwidth)
    if config.hsic_method is TestMethod.HSIC_PERMUTATION:
        return hsic_pvalue_permutation(
            block,
            residuals,
            config.bandwidth,
            config.bandwidth,
            permutations=config.permutations,
            seed=config.permutation_seed,
        )
    raise ValueError(f"unsupported method for residual testing: {config.hsic_method}")


def joint_residual_independence(residual_matrix: np.ndarray, config: TestConfig = TestConfig()) -> bool:
    """Pairwise HSIC over all residual pairs at Bonferroni level alpha/(d(d-1)/2)."""
    residual_matrix = np.asarray(residual_matrix, dtype=float)
    if residual_matrix.ndim != 2 or residual_matrix.shape[1] < 2:
        raise ValueError("need an n x d residual matrix with d >= 2")
    d = residual_matrix.shape[1]
    level = config.alpha / (d * (d - 1) / 2)
    for i, j in itertools.combinations(range(d), 2):
        xi = residual_matrix[:, i]
        xj = residual_matrix[:, j]
        if config.hsic_method is TestMethod.HSIC_PERMUTATION:
            result = hsic_pvalue_permutation(
                xi, xj, config.bandwidth, config.bandwidth,
                permutations=config.permutations, seed=config.permutation_seed,
            )
        else:
            result = hsic_pvalue_gamma(xi, xj, config.bandwidth, config.bandwidth)
        if result.p_value < level:
            return False
    return True


def fisher_z_partial_correlation(
    data: "Dataset", i: int, j: int, s: Iterable[int] = ()
) -> IndependenceResult:
    """Partial correlation of columns i and j given s, Fisher-z transformed.

    The partial correlation is the plain correlation of the two OLS residual
    vectors after regressing each column on s (with intercept).
    """
    cols = sorted(set(int(c) for c in s))
    if i == j:
        raise ValueError("i and j must differ")
    if i in cols or j in cols:
        raise ValueError("i and j must not appear in the conditioning set")
    n = data.n
    if n <= len(cols) + 3:
        raise ValueError(f"need n > |S| + 3 samples, got n={n} with |S|={len(cols)}")
    block = data.matrix()[:, cols] if cols else np.empty((n, 0))
    res_i = fit_linear(block, data.column(i)).residuals
    res_j = fit_linear(block, data.column(j)).residuals
    norm_i = float(np.linalg.norm(res_i))
    norm_j = float(np.linalg.norm(res_j))
    if norm_i == 0.0 or norm_j == 0.0:
        # a residual that is exactly zero carries no dependence signal
        return IndependenceResult(0.0, 1.0, TestMethod.FISHER_Z, n)
    r = float(res_i @ res_j / (norm_i * norm_j))
    r = min(1.0, max(-1.0, r))
    if abs(r) >= 1.0:
        return IndependenceResult(math.inf, 0.0, TestMethod.FISHER_Z, n)
    z = math.atanh(r) * math.sqrt(n - len(cols) - 3)
    p = float(2.0 * stats.norm.sf(abs(z)))
    return IndependenceResult(abs(z), p, TestMethod.FISHER_Z, n)
