"""Additive-noise causal discovery.

Given an i.i.d. sample, enumerate every DAG that admits an additive-noise
model with independent residuals. A single surviving DAG is the causal
answer; zero or several survivors mean "I do not know."
"""

from .datagen import (
    AdditiveMechanism,
    Dataset,
    NoiseSpec,
    ProductMechanism,
    SemSpec,
    Term,
    dataset1,
    dataset2,
    dataset3,
    dataset4,
    dataset5,
    make_builtin,
    read_csv,
    simulate,
    write_csv,
)
from .discover import (
    BranchState,
    DiscoveryConfig,
    DiscoveryResult,
    Verdict,
    discover,
    find_causal_orders,
    prune_parents,
)
from .graph import (
    Dag,
    all_dags,
    d_separated,
    dag_to_dot,
    dag_to_text,
    markov_equivalence_class,
    markov_equivalent,
    minimal_edge_dags,
)
from .indep import (
    IndependenceResult,
    TestConfig,
    TestMethod,
    fisher_z_partial_correlation,
    hsic_pvalue_gamma,
    hsic_pvalue_permutation,
    hsic_statistic,
    joint_residual_independence,
    test_independence,
)
from .regress import FitResult, GpConfig, RegressorKind, fit_gp, fit_linear, fitted_noise_values

__all__ = [name for name in dir() if not name.startswith("_")]
