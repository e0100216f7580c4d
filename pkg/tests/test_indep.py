import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anmdag.datagen import Dataset, simulate, dataset1_sem
from anmdag.graph import Dag
from anmdag.indep import (
    IndependenceResult,
    TestConfig,
    TestMethod,
    fisher_z_partial_correlation,
    hsic_pvalue_gamma,
    hsic_pvalue_permutation,
    hsic_statistic,
    joint_residual_independence,
    median_bandwidth,
    test_independence,
)
from anmdag.datagen import AdditiveMechanism, NoiseSpec, SemSpec, Term
from helpers import philox


def naive_hsic(x, y, bw_x, bw_y):
    """Direct double-sum evaluation of trace(KHLH)/n^2 for tiny samples."""
    x = np.atleast_2d(np.asarray(x, float).T).T
    y = np.atleast_2d(np.asarray(y, float).T).T
    n = x.shape[0]
    k = np.empty((n, n))
    l = np.empty((n, n))
    for a in range(n):
        for b in range(n):
            k[a, b] = math.exp(-np.sum((x[a] - x[b]) ** 2) / (2 * bw_x**2))
            l[a, b] = math.exp(-np.sum((y[a] - y[b]) ** 2) / (2 * bw_y**2))
    h = np.eye(n) - np.ones((n, n)) / n
    return np.trace(k @ h @ l @ h) / n**2


class TestHsicStatistic:
    def test_matches_naive_three_point_evaluation(self):
        x = np.array([0.0, 1.0, 2.0])
        got = hsic_statistic(x, x, 1.0, 1.0)
        assert got == pytest.approx(naive_hsic(x, x, 1.0, 1.0), rel=1e-12)

    def test_constant_column_gives_zero(self):
        x = np.arange(10.0)
        assert hsic_statistic(x, np.ones(10), 1.0, 1.0) == pytest.approx(0.0, abs=1e-12)

    def test_joint_row_permutation_invariance(self):
        rng = philox(300)
        x = rng.standard_normal(40)
        y = x + rng.standard_normal(40)
        perm = rng.permutation(40)
        a = hsic_statistic(x, y, 1.0, 2.0)
        b = hsic_statistic(x[perm], y[perm], 1.0, 2.0)
        assert a == pytest.approx(b, rel=1e-12)

    def test_input_validation(self):
        with pytest.raises(ValueError, match="at least 3"):
            hsic_statistic(np.ones(2), np.ones(2), 1.0, 1.0)
        with pytest.raises(ValueError, match="positive"):
            hsic_statistic(np.ones(5), np.ones(5), 0.0, 1.0)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 5000), scale=st.floats(0.01, 100.0), shift=st.floats(-50, 50))
    def test_median_bandwidth_scaling_and_translation_invariance(self, seed, scale, shift):
        rng = philox(301, seed)
        x = rng.standard_normal(30)
        y = x * 0.5 + rng.standard_normal(30)
        base = hsic_statistic(x, y, median_bandwidth(x), median_bandwidth(y))
        scaled = hsic_statistic(
            scale * x, y, median_bandwidth(scale * x), median_bandwidth(y)
        )
        shifted = hsic_statistic(x + shift, y, median_bandwidth(x + shift), median_bandwidth(y))
        assert scaled == pytest.approx(base, rel=1e-10, abs=1e-15)
        assert shifted == pytest.approx(base, rel=1e-10, abs=1e-15)


class TestHsicGamma:
    def test_perfect_dependence_rejected(self):
        rng = philox(302)
        x = rng.uniform(size=200)
        assert hsic_pvalue_gamma(x, x).p_value < 0.001

    def test_constant_block_accepts(self):
        got = hsic_pvalue_gamma(np.arange(20.0), np.ones(20))
        assert got.p_value == 1.0 and got.statistic == 0.0

    def test_needs_twenty_samples(self):
        with pytest.raises(ValueError, match="at least 20"):
            hsic_pvalue_gamma(np.arange(10.0), np.arange(10.0))

    def test_rough_calibration_under_independence(self):
        rejections = 0
        for rep in range(150):
            rng = philox(303, rep)
            x = rng.uniform(size=200)
            y = rng.uniform(size=200)
            rejections += hsic_pvalue_gamma(x, y).p_value < 0.05
        assert 0.01 <= rejections / 150 <= 0.10


class TestHsicPermutation:
    def test_pvalue_bounds(self):
        rng = philox(304)
        x = rng.standard_normal(30)
        y = rng.standard_normal(30)
        got = hsic_pvalue_permutation(x, y, permutations=100, seed=5)
        assert 1 / 101 <= got.p_value <= 1.0

    def test_perfect_dependence_gets_minimum_pvalue(self):
        rng = philox(305)
        x = rng.uniform(size=200)
        got = hsic_pvalue_permutation(x, x, permutations=1000, seed=1)
        assert got.p_value == pytest.approx(1 / 1001)

    def test_deterministic_given_seed(self):
        rng = philox(306)
        x = rng.standard_normal(50)
        y = x + rng.standard_normal(50)
        a = hsic_pvalue_permutation(x, y, permutations=200, seed=9)
        b = hsic_pvalue_permutation(x, y, permutations=200, seed=9)
        assert a == b

    def test_super_uniform_under_null(self):
        # empirical CDF at 0.05 stays at or below 0.07 over 500 replicates
        hits = 0
        for rep in range(500):
            rng = philox(307, rep)
            x = rng.standard_normal(60)
            y = rng.standard_normal(60)
            p = hsic_pvalue_permutation(x, y, permutations=100, seed=rep).p_value
            hits += p <= 0.05
        assert hits / 500 <= 0.07


class TestTestIndependence:
    def _data(self, seed=308, n=120):
        rng = philox(seed)
        x = rng.uniform(-1, 1, n)
        y = x**2 + 0.1 * rng.standard_normal(n)
        return Dataset(names=("A", "B"), values=np.column_stack([x, y]))

    def test_empty_block_always_passes(self):
        data = self._data()
        got = test_independence(data, set(), np.zeros(data.n))
        assert got.p_value == 1.0

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="length"):
            test_independence(self._data(), {0}, np.zeros(7))

    def test_detects_residual_dependence(self):
        data = self._data()
        centered = data.column(1) - data.column(1).mean()
        got = test_independence(data, {0}, centered)
        assert got.p_value < 0.01

    def test_permutation_method_dispatch(self):
        data = self._data()
        config = TestConfig(hsic_method=TestMethod.HSIC_PERMUTATION, permutations=100)
        got = test_independence(data, {0}, data.column(1) - data.column(1).mean(), config)
        assert got.method is TestMethod.HSIC_PERMUTATION


class TestJointResidualIndependence:
    def test_independent_columns_mostly_accepted(self):
        accepted = 0
        for rep in range(100):
            rng = philox(309, rep)
            residuals = rng.uniform(size=(400, 4))
            accepted += joint_residual_independence(residuals)
        assert accepted >= 90

    def test_duplicated_column_rejected(self):
        rng = philox(310)
        residuals = rng.standard_normal((100, 3))
        residuals[:, 2] = residuals[:, 1]
        assert not joint_residual_independence(residuals)

    def test_two_columns_single_pair_at_alpha(self):
        # d = 2: Bonferroni divides by one, so the decision is the plain test
        rng = philox(311)
        residuals = rng.standard_normal((150, 2))
        expected = hsic_pvalue_gamma(residuals[:, 0], residuals[:, 1]).p_value >= 0.05
        assert joint_residual_independence(residuals, TestConfig(alpha=0.05)) == expected

    def test_needs_two_columns(self):
        with pytest.raises(ValueError, match="d >= 2"):
            joint_residual_independence(np.ones((30, 1)))


def gaussian_sem_covariance(spec: SemSpec) -> np.ndarray:
    """Covariance oracle for linear-Gaussian structural equations.

    Propagates Cov through the equations in topological order; valid only for
    additive mechanisms whose terms are all linear.
    """
    d = spec.dag.num_nodes
    cov = np.zeros((d, d))
    for i in spec.dag.topological_order():
        parents = sorted(spec.dag.parents(i))
        coefs = {p: t.coef for p, t in zip(parents, spec.mechanisms[i].terms)}
        noise = spec.noises[i]
        noise_var = (noise.scale * noise.params[1]) ** 2
        for j in range(d):
            if j == i:
                continue
            cov[i, j] = cov[j, i] = sum(c * cov[p, j] for p, c in coefs.items())
        cov[i, i] = sum(
            ci * cj * cov[pi, pj] for pi, ci in coefs.items() for pj, cj in coefs.items()
        ) + noise_var
    return cov


def partial_corr_from_cov(cov, i, j, s):
    keep = [i, j] + list(s)
    sub = cov[np.ix_(keep, keep)]
    prec = np.linalg.inv(sub)
    return -prec[0, 1] / math.sqrt(prec[0, 0] * prec[1, 1])


def _fixed_diamond_sem() -> SemSpec:
    # the diamond with every slope 1 and every noise scale 0.3
    dag = Dag(4, [(0, 1), (0, 2), (1, 3), (2, 3)])
    lin = lambda *c: AdditiveMechanism(terms=tuple(Term("linear", v) for v in c))
    gauss = NoiseSpec("gaussian", (0.0, 1.0), scale=0.3)
    return SemSpec(dag, (lin(), lin(1.0), lin(1.0), lin(1.0, 1.0)), (gauss,) * 4)


class TestFisherZ:
    def test_matches_plain_pearson_without_conditioning(self):
        rng = philox(312)
        x = rng.standard_normal(200)
        y = 0.4 * x + rng.standard_normal(200)
        data = Dataset(names=("A", "B"), values=np.column_stack([x, y]))
        got = fisher_z_partial_correlation(data, 0, 1)
        xc = x - x.mean()
        yc = y - y.mean()
        r = float(xc @ yc / (np.linalg.norm(xc) * np.linalg.norm(yc)))
        assert got.statistic == pytest.approx(abs(math.atanh(r)) * math.sqrt(197), rel=1e-12)

    def test_duplicated_column_rejects_with_infinite_statistic(self):
        x = np.arange(30.0)
        data = Dataset(names=("A", "B"), values=np.column_stack([x, x]))
        got = fisher_z_partial_correlation(data, 0, 1)
        assert got.p_value == 0.0 and math.isinf(got.statistic)

    def test_validation(self):
        rng = philox(313)
        data = Dataset(names=("A", "B", "C"), values=rng.standard_normal((10, 3)))
        with pytest.raises(ValueError, match="differ"):
            fisher_z_partial_correlation(data, 1, 1)
        with pytest.raises(ValueError, match="conditioning"):
            fisher_z_partial_correlation(data, 0, 1, {1})
        small = Dataset(names=("A", "B", "C"), values=rng.standard_normal((4, 3)))
        with pytest.raises(ValueError, match="n >"):
            fisher_z_partial_correlation(small, 0, 1, {2})

    def test_calibration_under_independence(self):
        rejections = 0
        for rep in range(500):
            rng = philox(314, rep)
            data = Dataset(names=("A", "B"), values=rng.standard_normal((1000, 2)))
            rejections += fisher_z_partial_correlation(data, 0, 1).p_value < 0.05
        assert 0.02 <= rejections / 500 <= 0.09

    def test_diamond_with_unit_slopes_has_zero_partial_correlation(self):
        sem = _fixed_diamond_sem()
        cov = gaussian_sem_covariance(sem)
        # covariance oracle: conditioning on the common cause removes all of
        # the X2-X3 association
        assert partial_corr_from_cov(cov, 1, 2, [0]) == pytest.approx(0.0, abs=1e-12)
        rejections = 0
        for rep in range(200):
            data = simulate(sem, 400, seed=31500 + rep)
            rejections += fisher_z_partial_correlation(data, 1, 2, {0}).p_value < 0.05
        assert 0.01 <= rejections / 200 <= 0.09

    def test_sampled_dataset1_coefficients_keep_dsep_partial_corr_zero(self):
        sem = dataset1_sem(philox(316))
        cov = gaussian_sem_covariance(sem)
        assert partial_corr_from_cov(cov, 1, 2, [0]) == pytest.approx(0.0, abs=1e-10)
        assert partial_corr_from_cov(cov, 0, 3, [1, 2]) == pytest.approx(0.0, abs=1e-10)


class TestResultInvariants:
    def test_pvalue_range_enforced(self):
        with pytest.raises(ValueError):
            IndependenceResult(0.0, 1.5, TestMethod.FISHER_Z, 10)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TestConfig(alpha=0.0)
        with pytest.raises(ValueError):
            TestConfig(hsic_method=TestMethod.HSIC_PERMUTATION, permutations=10)
        with pytest.raises(ValueError):
            TestConfig(bandwidth=-1.0)
