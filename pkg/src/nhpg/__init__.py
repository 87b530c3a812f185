"""Two-regime non-homogeneous hidden Markov model with Polya-Gamma Gibbs
sampling, covariate ingestion, a stationarity test battery, and synthetic
recovery harnesses."""

from .forward_backward import (
    ForwardLattice,
    LikelihoodError,
    StatePath,
    backward_sample,
    forward_pass,
    smoothed_marginals,
)
from .mcmc import (
    ChainError,
    DiagnosticsReport,
    McmcConfig,
    McmcDraws,
    PosteriorSummary,
    Priors,
    diagnostics,
    run_chain,
    run_chains,
    sample_logistic_params,
    sample_mean_params,
    summarize,
)
from .model import (
    NhpgModel,
    StateParams,
    TransitionParams,
    emission_logdensity,
    simulate,
    transition_row,
)
from .polya_gamma import PgParams, pg_mean, sample_pg, sample_pg_many
from .series import (
    CovariatePanel,
    DataError,
    DatedSeries,
    DescriptiveStats,
    align,
    describe,
    load_covariates_csv,
    load_series_csv,
    log_returns,
    zscore_normalize,
)
from .stattests import (
    TestReport,
    adf_test,
    df_test,
    jb_test,
    kpss_test,
    lbq_test,
    run_battery,
    subseries_report,
    variance_ratio,
    vr_test,
)
from .synthetic import (
    CANONICAL,
    GroundTruth,
    RecoveryMetrics,
    Scenario,
    generate,
    score_recovery,
)

__version__ = "0.1.0"
