//! Testing equality of the diagonal spectral density blocks of a multivariate
//! stationary time series.
//!
//! A `d = p·q` dimensional series is split into `q` groups of `p` components.
//! The null hypothesis is that all `q` diagonal `p×p` blocks of the spectral
//! density matrix coincide at every frequency. The crate provides
//!
//! - periodogram matrices and kernel spectral density estimates ([`spectral`], [`kernel`]),
//! - the integrated squared Frobenius statistic `T_n`, its plug-in centering and
//!   scale estimates and the normal-approximation test ([`equality`]),
//! - frequency-permutation randomization tests with Monte Carlo p-values
//!   ([`randomization`]),
//! - seeded generators for VAR, VMA, GARCH, TAR and RCA models ([`models`]),
//! - a size/power experiment harness with CSV export ([`harness`]).

pub mod equality;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod models;
pub mod quantile;
pub mod randomization;
pub mod reference;
pub mod seed;
pub mod series;
pub mod spectral;

pub use equality::{
    asymptotic_test, compute_tn, detection_gamma, detection_shift, estimate_mu_hat,
    estimate_tau_hat_sq, exactness_condition, Analysis, AnalysisOptions, CenteringEstimates,
    Decision, ExactnessDiagnostic, GammaRule, StatisticValue, TauPlugIn, TestKind, TestReport,
};
pub use error::{Result, SpectestError};
pub use harness::{
    export, parse_table_csv, run_experiment, ExperimentConfig, ExportFormat, SizePowerTable,
    TableRow,
};
pub use kernel::{
    bartlett_priestley, cross_validate_bandwidth, default_candidates, smooth, Bandwidth,
    BandwidthSource, Kernel,
};
pub use models::{preset, preset_with, simulate, Innovation, ModelFamily, ModelSpec};
pub use quantile::normal_quantile;
pub use randomization::{
    compute_tn_star, estimate_mu_hat_star, estimate_tau_hat_star_sq, monte_carlo_p_value,
    run_randomization_test, sample_family, BandwidthSpec, DecisionRule,
    FrequencyPermutationFamily, RandomizationConfig, RandomizationDraw, RandomizationKind,
};
pub use series::{demean, fourier_frequencies, FrequencyGrid, TimeSeriesPanel};
pub use spectral::{block, dft, periodogram, pooled_diagonal, FieldKind, SpectralMatrixField};
