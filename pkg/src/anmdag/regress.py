"""Regression backends that turn (parents, variable) into fitted noise values.

Two model classes: ordinary least squares with intercept, and a Gaussian
process with an RBF kernel whose three hyperparameters (signal variance,
shared length-scale, noise variance) are chosen by maximizing the log
marginal likelihood from a fixed set of deterministic starts.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable

import numpy as np
from scipy import linalg, optimize
from scipy.spatial.distance import pdist, squareform

if TYPE_CHECKING:
    from .datagen import Dataset


class RegressorKind(enum.Enum):
    LINEAR = "linear"
    GAUSSIAN_PROCESS = "gp"


@dataclass(frozen=True)
class GpConfig:
    starts: int = 5
    max_iter: int = 200


@dataclass(frozen=True)
class FitResult:
    """Residuals of one regression plus fit diagnostics.

    Residuals are on the original response scale. For GP fits,
    `log_marginal_likelihood` and `kernel_params` describe the optimum found
    on internally standardized data.
    """

    residuals: np.ndarray
    rss: float
    log_marginal_likelihood: float | None = None
    kernel_params: dict[str, float] | None = None


def _as_design(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError(f"incompatible shapes {x.shape} and {y.shape}")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("non-finite values in regression inputs")
    return x, y


def fit_linear(x: np.ndarray, y: np.ndarray) -> FitResult:
    """OLS of y on x with an intercept; k = 0 reduces to mean-centering."""
    x, y = _as_design(x, y)
    n, k = x.shape
    if n < k + 2:
        raise ValueError(f"need at least {k + 2} samples for {k} regressors, got {n}")
    design = np.column_stack([np.ones(n), x])
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < k + 1:
        raise ValueError("rank-deficient design (collinear regressors)")
    residuals = y - design @ coef
    return FitResult(residuals=residuals, rss=float(residuals @ residuals))


# Deterministic multi-start grid: (signal variance, length-scale multiplier on
# the median pairwise distance, noise variance), all in standardized units.
_GP_BASE_STARTS = (
    (1.0, 1.0, 0.1),
    (1.0, 0.5, 0.5),
    (1.0, 2.0, 0.01),
    (0.5, 0.25, 0.1),
    (2.0, 4.0, 0.3),
)
_GP_EXTRA_START_SEED = 20409
_GP_BOUNDS = [(np.log(1e-8), np.log(1e4)), (np.log(1e-4), np.log(1e4)), (np.log(1e-10), np.log(1e4))]
_JITTER_BASE = 1e-8
_JITTER_MAX = 1e-2


def _chol_with_jitter(k_matrix: np.ndarray, signal_var: float):
    """Cholesky with diagonal jitter 1e-8*signal_var, doubled up to 1e-2*signal_var."""
    jitter = _JITTER_BASE
    while True:
        try:
            return linalg.cho_factor(
                k_matrix + jitter * signal_var * np.eye(k_matrix.shape[0]), lower=True
            )
        except linalg.LinAlgError:
            jitter *= 2.0
            if jitter > _JITTER_MAX:
                raise


def _gp_neg_lml_and_grad(theta: np.ndarray, sqdist: np.ndarray, y: np.ndarray):
    s2, ell, sn2 = np.exp(theta)
    n = y.shape[0]
    rbf = np.exp(sqdist / (-2.0 * ell * ell))
    k_matrix = np.asfortranarray(s2 * rbf)
    k_matrix.flat[:: n + 1] += sn2 + _JITTER_BASE * s2
    factor, info = linalg.lapack.dpotrf(k_matrix, lower=1, clean=1, overwrite_a=1)
    if info != 0:
        return np.inf, np.zeros(3)
    alpha = linalg.cho_solve((factor, True), y)
    lml = -0.5 * y @ alpha - np.log(np.diag(factor)).sum() - 0.5 * n * np.log(2.0 * np.pi)
    inv, info = linalg.lapack.dpotri(factor, lower=1, overwrite_c=1)
    if info != 0:
        return np.inf, np.zeros(3)
    # dpotri fills one triangle; the other is zero after the cleaned factorization
    k_inv = inv + np.tril(inv, -1).T
    w = np.outer(alpha, alpha) - k_inv
    w_rbf = w * rbf
    trace_w = float(np.trace(w))
    grad_s2 = 0.5 * s2 * (w_rbf.sum() + _JITTER_BASE * trace_w)
    grad_ell = 0.5 * s2 * np.sum(w_rbf * sqdist) / (ell * ell)
    grad_sn2 = 0.5 * trace_w * sn2
    return -lml, -np.array([grad_s2, grad_ell, grad_sn2])


def _gp_starts(n_starts: int, median_dist: float) -> list[np.ndarray]:
    starts = [
        np.log([s2, max(mult * median_dist, 1e-3), sn2])
        for s2, mult, sn2 in _GP_BASE_STARTS[:n_starts]
    ]
    if n_starts > len(_GP_BASE_STARTS):
        rng = np.random.Generator(np.random.Philox(_GP_EXTRA_START_SEED))
        for _ in range(n_starts - len(_GP_BASE_STARTS)):
            s2, mult, sn2 = np.exp(rng.uniform(np.log(0.1), np.log(10.0), size=3))
            starts.append(np.log([s2, max(mult * median_dist, 1e-3), 0.1 * sn2]))
    return starts


def fit_gp(x: np.ndarray, y: np.ndarray, config: GpConfig = GpConfig()) -> FitResult:
    """GP regression; residuals are y minus the posterior mean at the inputs.

    Inputs and response are standardized internally for optimizer
    conditioning; residuals are reported on the original response scale.
    """
    x, y = _as_design(x, y)
    n, k = x.shape
    if k < 1:
        raise ValueError("GP regression needs at least one regressor column")
    if n < 20:
        raise ValueError(f"GP regression needs at least 20 samples, got {n}")

    x_std = x.std(axis=0)
    x_std[x_std == 0.0] = 1.0
    xs = (x - x.mean(axis=0)) / x_std
    y_mean = y.mean()
    y_scale = y.std()
    if y_scale == 0.0:
        y_scale = 1.0
    ys = (y - y_mean) / y_scale

    sqdist = squareform(pdist(xs, metric="sqeuclidean"))
    positive = sqdist[sqdist > 0.0]
    median_dist = float(np.sqrt(np.median(positive))) if positive.size else 1.0

    best_theta = None
    best_obj = np.inf
    failures = []
    for theta0 in _gp_starts(config.starts, median_dist):
        try:
            res = optimize.minimize(
                _gp_neg_lml_and_grad,
                theta0,
                args=(sqdist, ys),
                jac=True,
                method="L-BFGS-B",
                bounds=_GP_BOUNDS,
                options={"maxiter": config.max_iter},
            )
        except (linalg.LinAlgError, FloatingPointError) as exc:
            failures.append(str(exc))
            continue
        if np.isfinite(res.fun) and res.fun < best_obj:
            best_obj = res.fun
            best_theta = res.x
    if best_theta is None:
        raise RuntimeError(f"GP hyperparameter search failed on all starts: {failures}")

    s2, ell, sn2 = np.exp(best_theta)
    rbf = np.exp(-sqdist / (2.0 * ell * ell))
    chol = _chol_with_jitter(s2 * rbf + sn2 * np.eye(n), s2)
    alpha = linalg.cho_solve(chol, ys)
    posterior_mean = s2 * rbf @ alpha
    residuals = y - (y_mean + y_scale * posterior_mean)
    return FitResult(
        residuals=residuals,
        rss=float(residuals @ residuals),
        log_marginal_likelihood=float(-best_obj),
        kernel_params={
            "signal_variance": float(s2),
            "length_scale": float(ell),
            "noise_variance": float(sn2),
        },
    )


def fitted_noise_values(
    data: "Dataset",
    s: Iterable[int],
    i: int,
    kind: RegressorKind,
    gp: GpConfig = GpConfig(),
) -> FitResult:
    """Regress column i on the column block s and return the residuals.

    An empty block mean-centers column i, for either regressor kind.
    """
    cols = sorted(set(int(j) for j in s))
    if i in cols:
        raise ValueError(f"response column {i} must not appear in the regressor set")
    y = data.column(i)
    if not cols:
        return fit_linear(np.empty((y.shape[0], 0)), y)
    x = data.matrix()[:, cols]
    if kind is RegressorKind.LINEAR:
        return fit_linear(x, y)
    return fit_gp(x, y, gp)
