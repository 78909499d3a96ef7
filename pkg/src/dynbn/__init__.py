"""Dynamic Bayesian networks with gradual edge changes for covariance forecasting.

The package couples three layers:

* a network layer where the directed acyclic dependence graph evolves by
  Poisson-distributed edge additions/deletions selected by node activeness
  (:mod:`dynbn.graphs`, :mod:`dynbn.edgedyn`);
* a volatility/correlation layer with GARCH marginals and DCC-type dynamics
  on graph-indexed conditional correlations (:mod:`dynbn.covariance`);
* estimation and decision layers: adaptive MCMC over the joint posterior
  (:mod:`dynbn.mcmc`), Monte Carlo covariance prediction
  (:mod:`dynbn.predict`), and minimum-variance portfolio backtesting
  (:mod:`dynbn.backtest`).
"""

from .graphs import (
    CycleError,
    Dag,
    NetworkStats,
    auroc,
    is_dag,
    max_changes,
    network_distance,
    network_stats,
    topological_order,
)
from .edgedyn import (
    ActivenessParams,
    EdgeChangeState,
    EdgeDynParams,
    build_addition_list,
    build_deletion_list,
    evolve_network,
    evolution_trace,
    pair_activeness,
    step_activeness,
    step_means,
    truncated_poisson_logpmf,
)
from .covariance import (
    CorrState,
    DccParams,
    GarchParams,
    assemble_correlation,
    assemble_covariance,
    dcc_step,
    derive_coords,
    evolve_dependence,
    garch_step,
    long_run_partial,
    sample_partial_corr,
)
from .posterior import (
    LatentPath,
    ModelParams,
    PosteriorEvaluator,
    log_likelihood,
    log_posterior,
    log_prior,
    reconstruct_path,
)
from .errors import ConfigError, DataError, NumericError

__version__ = "0.1.0"
