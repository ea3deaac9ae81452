//! Frequency-wise permutations of the group labels and the three
//! randomization tests built on them.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equality::{check_alpha, clamp_nonnegative, Analysis, Decision, TauPlugIn, TestKind, TestReport};
use crate::error::{invalid, Result, SpectestError};
use crate::kernel::{cross_validate_bandwidth, default_candidates, Bandwidth, Kernel};
use crate::reference::{mu_star, tau_star_sq};
use crate::seed::{derive_seed, rng_for};
use crate::series::{demean, is_permutation, FrequencyGrid, TimeSeriesPanel};
use crate::spectral::SpectralMatrixField;

/// Permutations `π_0, …, π_{⌊n/2⌋}` of the `q` group labels (0-based).
///
/// Lookups at any integer index follow `π_{−k} = π_k` and `π_{k+sn} = π_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyPermutationFamily {
    n: usize,
    q: usize,
    base: Vec<Vec<usize>>,
}

impl FrequencyPermutationFamily {
    pub fn new(n: usize, base: Vec<Vec<usize>>) -> Result<Self> {
        if n < 4 {
            return invalid(format!("need n >= 4, got {n}"));
        }
        if base.len() != n / 2 + 1 {
            return invalid(format!("expected {} permutations, got {}", n / 2 + 1, base.len()));
        }
        let q = base[0].len();
        if q < 2 {
            return invalid(format!("need q >= 2, got {q}"));
        }
        if let Some(k) = base.iter().position(|perm| !is_permutation(perm, q)) {
            return invalid(format!("entry {k} is not a permutation of 0..{q}"));
        }
        Ok(Self { n, q, base })
    }

    pub fn identity(n: usize, q: usize) -> Result<Self> {
        Self::new(n, vec![(0..q).collect(); n / 2 + 1])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn base(&self) -> &[Vec<usize>] {
        &self.base
    }

    /// `π_k` for any integer `k`.
    pub fn at(&self, k: i64) -> &[usize] {
        let n = self.n as i64;
        let mut r = k.rem_euclid(n);
        if 2 * r > n {
            r = n - r;
        }
        &self.base[r as usize]
    }

    /// Group lookup table by grid position: entry `position·q + r` is `π_k(r)`.
    pub(crate) fn position_table(&self, grid: &FrequencyGrid) -> Vec<usize> {
        (0..grid.n())
            .flat_map(|pos| self.at(grid.index_at(pos)).iter().copied())
            .collect()
    }
}

/// Draws `⌊n/2⌋ + 1` independent uniform permutations of `q` labels.
pub fn sample_family(q: usize, n: usize, seed: u64) -> Result<FrequencyPermutationFamily> {
    if q < 2 {
        return invalid(format!("need q >= 2, got {q}"));
    }
    let mut rng = rng_for(seed, &[]);
    let base = (0..=n / 2)
        .map(|_| {
            let mut perm: Vec<usize> = (0..q).collect();
            perm.shuffle(&mut rng);
            perm
        })
        .collect();
    FrequencyPermutationFamily::new(n, base)
}

/// `μ̂*`, computed from the smoothed field.
pub fn estimate_mu_hat_star(smoothed: &SpectralMatrixField, kernel: &Kernel, p: usize, q: usize) -> Result<f64> {
    if smoothed.dim() != p * q {
        return Err(SpectestError::DimensionMismatch(format!(
            "field dimension {} differs from p·q = {}",
            smoothed.dim(),
            p * q
        )));
    }
    Ok(mu_star(smoothed, kernel, p, q))
}

/// `τ̂*²`, clamped at zero.
pub fn estimate_tau_hat_star_sq(smoothed: &SpectralMatrixField, kernel: &Kernel, p: usize, q: usize) -> Result<f64> {
    if smoothed.dim() != p * q || q < 2 {
        return Err(SpectestError::DimensionMismatch(format!(
            "field dimension {} does not match p = {p}, q = {q}",
            smoothed.dim()
        )));
    }
    Ok(clamp_nonnegative(tau_star_sq(smoothed, kernel, p, q), "tau_hat_star_sq"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomizationDraw {
    pub family: FrequencyPermutationFamily,
    pub t_star: f64,
    pub mu_star_ref: f64,
    pub studentized: Option<f64>,
}

/// `T_n*` for one family, from a periodogram field.
pub fn compute_tn_star(
    periodogram: &SpectralMatrixField,
    family: &FrequencyPermutationFamily,
    kernel: &Kernel,
    bandwidth: Bandwidth,
    p: usize,
    q: usize,
) -> Result<RandomizationDraw> {
    let analysis = Analysis::from_periodogram(periodogram.clone(), kernel, bandwidth, p, q, TauPlugIn::default())?;
    draw_for(&analysis, family)
}

pub(crate) fn draw_for(analysis: &Analysis, family: &FrequencyPermutationFamily) -> Result<RandomizationDraw> {
    if family.n() != analysis.n() || family.q() != analysis.q() {
        return Err(SpectestError::DimensionMismatch(format!(
            "family for n = {}, q = {} applied to n = {}, q = {}",
            family.n(),
            family.q(),
            analysis.n(),
            analysis.q()
        )));
    }
    let grid = analysis.periodogram().grid();
    let t_star = analysis.permuted_statistic(&family.position_table(&grid));
    let centering = analysis.centering();
    let studentized = (centering.tau_hat_star_sq > 0.0).then(|| {
        (t_star - centering.mu_hat_star / analysis.h().sqrt()) / centering.tau_hat_star_sq.sqrt()
    });
    Ok(RandomizationDraw {
        family: family.clone(),
        t_star,
        mu_star_ref: centering.mu_hat_star,
        studentized,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RandomizationKind {
    Uncentered,
    Centered,
    Studentized,
}

impl RandomizationKind {
    pub fn test_kind(&self) -> TestKind {
        match self {
            RandomizationKind::Uncentered => TestKind::RandUncentered,
            RandomizationKind::Centered => TestKind::RandCentered,
            RandomizationKind::Studentized => TestKind::RandStudentized,
        }
    }

    pub fn from_test_kind(kind: TestKind) -> Option<Self> {
        match kind {
            TestKind::Asymptotic => None,
            TestKind::RandUncentered => Some(RandomizationKind::Uncentered),
            TestKind::RandCentered => Some(RandomizationKind::Centered),
            TestKind::RandStudentized => Some(RandomizationKind::Studentized),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecisionRule {
    /// Reject iff `(1 + #{draws ≥ observed})/(B + 1) ≤ α`.
    #[default]
    PValue,
    /// Reject iff `B^{-1} Σ 1{observed > draw} > α`. Kept for comparison only.
    LiteralStepFive,
}

/// How the bandwidth of a randomization test is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum BandwidthSpec {
    Fixed(f64),
    CrossValidated { multiplier: f64, candidates: Option<Vec<f64>> },
}

#[derive(Debug, Clone)]
pub struct RandomizationConfig {
    pub kind: RandomizationKind,
    pub draws: usize,
    pub alpha: f64,
    pub seed: u64,
    pub kernel: Kernel,
    pub bandwidth: BandwidthSpec,
    pub rule: DecisionRule,
    /// Worker threads for the draws; `None` uses the global pool.
    pub workers: Option<usize>,
    pub demean: bool,
    pub tau_plug_in: TauPlugIn,
}

impl RandomizationConfig {
    pub fn new(kind: RandomizationKind, draws: usize, alpha: f64, seed: u64, kernel: Kernel, bandwidth: BandwidthSpec) -> Self {
        Self {
            kind,
            draws,
            alpha,
            seed,
            kernel,
            bandwidth,
            rule: DecisionRule::PValue,
            workers: None,
            demean: true,
            tau_plug_in: TauPlugIn::NullImposed,
        }
    }
}

pub const MIN_DRAWS: usize = 19;

/// Child seed of draw `b`.
pub fn draw_seed(seed: u64, b: usize) -> u64 {
    derive_seed(seed, &[b as u64])
}

impl Analysis {
    /// `T_n*` for `draws` independent families; entry `b` uses the family
    /// seeded by [`draw_seed`]`(seed, b)`, whatever the worker count.
    pub fn draw_statistics(&self, draws: usize, seed: u64, workers: Option<usize>) -> Result<Vec<f64>> {
        let grid = self.periodogram().grid();
        let one = |b: usize| -> Result<f64> {
            let family = sample_family(self.q(), self.n(), draw_seed(seed, b))?;
            Ok(self.permuted_statistic(&family.position_table(&grid)))
        };
        match workers {
            Some(1) => (0..draws).map(one).collect(),
            Some(w) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(w)
                    .build()
                    .map_err(|e| SpectestError::InvalidInput(format!("cannot start worker pool: {e}")))?;
                pool.install(|| (0..draws).into_par_iter().map(one).collect())
            }
            None => (0..draws).into_par_iter().map(one).collect(),
        }
    }

    /// Observed value and transformed draws for one randomization kind.
    pub fn randomization_values(&self, kind: RandomizationKind, t_stars: &[f64]) -> Result<(f64, Vec<f64>)> {
        let c = self.centering();
        let root_h = self.h().sqrt();
        match kind {
            RandomizationKind::Uncentered => Ok((self.statistic().t_n, t_stars.to_vec())),
            RandomizationKind::Centered => Ok((
                self.centered(),
                t_stars.iter().map(|t| t - c.mu_hat_star / root_h).collect(),
            )),
            RandomizationKind::Studentized => {
                if !(c.tau_hat_star_sq > 0.0) {
                    return Err(SpectestError::DegenerateScale("tau_hat_star_sq is zero".into()));
                }
                let scale = c.tau_hat_star_sq.sqrt();
                Ok((
                    self.studentized()?,
                    t_stars.iter().map(|t| (t - c.mu_hat_star / root_h) / scale).collect(),
                ))
            }
        }
    }

    /// Builds the report of one randomization test from shared draws.
    pub fn randomization_report(
        &self,
        kind: RandomizationKind,
        alpha: f64,
        t_stars: &[f64],
        rule: DecisionRule,
        seed: u64,
    ) -> Result<TestReport> {
        check_alpha(alpha)?;
        if t_stars.is_empty() {
            return invalid("no randomization draws");
        }
        let (observed, draws) = self.randomization_values(kind, t_stars)?;
        let p_value = monte_carlo_p_value(observed, &draws);
        let reject = match rule {
            DecisionRule::PValue => p_value <= alpha,
            DecisionRule::LiteralStepFive => {
                let below = draws.iter().filter(|&&d| observed > d).count();
                below as f64 / draws.len() as f64 > alpha
            }
        };
        let c = self.centering();
        let mut report = TestReport {
            kind: kind.test_kind(),
            statistic: self.statistic().t_n,
            observed,
            mu_hat: c.mu_hat,
            tau_hat_sq: c.tau_hat_sq,
            mu_hat_star: c.mu_hat_star,
            tau_hat_star_sq: c.tau_hat_star_sq,
            critical_value: None,
            p_value: Some(p_value),
            decision: Decision::from_reject(reject),
            alpha,
            h: self.h(),
            bandwidth: self.bandwidth().source(),
            n: self.n(),
            p: 0,
            q: 0,
            seed: Some(seed),
            draws: Some(draws.len()),
            decision_rule: Some(rule),
        };
        self.fill_metadata(&mut report);
        Ok(report)
    }
}

/// `(1 + #{draws ≥ observed})/(B + 1)`.
pub fn monte_carlo_p_value(observed: f64, draws: &[f64]) -> f64 {
    let at_least = draws.iter().filter(|&&d| d >= observed).count();
    (1 + at_least) as f64 / (draws.len() + 1) as f64
}

/// Resolves a bandwidth spec on a panel.
pub fn resolve_bandwidth(panel: &TimeSeriesPanel, kernel: &Kernel, spec: &BandwidthSpec, demean_first: bool) -> Result<Bandwidth> {
    match spec {
        BandwidthSpec::Fixed(h) => Bandwidth::fixed(*h),
        BandwidthSpec::CrossValidated { multiplier, candidates } => {
            let default;
            let list = match candidates {
                Some(list) => list.as_slice(),
                None => {
                    default = default_candidates(panel.n());
                    default.as_slice()
                }
            };
            let base = if demean_first {
                cross_validate_bandwidth(&demean(panel), kernel, list)?
            } else {
                cross_validate_bandwidth(panel, kernel, list)?
            };
            let bandwidth = base.with_multiplier(*multiplier)?;
            bandwidth.warn_if_unusual(panel.n());
            Ok(bandwidth)
        }
    }
}

/// Runs one randomization test end to end.
pub fn run_randomization_test(panel: &TimeSeriesPanel, config: &RandomizationConfig) -> Result<TestReport> {
    if config.draws < MIN_DRAWS {
        return invalid(format!("need at least {MIN_DRAWS} randomization draws, got {}", config.draws));
    }
    check_alpha(config.alpha)?;
    let bandwidth = resolve_bandwidth(panel, &config.kernel, &config.bandwidth, config.demean)?;
    let options = crate::equality::AnalysisOptions {
        demean: config.demean,
        tau_plug_in: config.tau_plug_in,
    };
    let analysis = Analysis::new(panel, &config.kernel, bandwidth, &options)?;
    if config.kind == RandomizationKind::Studentized {
        analysis.studentized()?;
    }
    let t_stars = analysis.draw_statistics(config.draws, config.seed, config.workers)?;
    analysis.randomization_report(config.kind, config.alpha, &t_stars, config.rule, config.seed)
}
