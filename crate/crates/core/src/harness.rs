//! Monte Carlo size and power experiments.
//!
//! Configuration is plain text:
//!
//! ```text
//! # comments start with '#'
//! [experiment]
//! models = MA1, AR3
//! innovation = gaussian
//! sample_sizes = 50, 100, 200
//! alphas = 0.01, 0.05, 0.10
//! multipliers = 0.5, 1, 1.5
//! replications = 200
//! draws = 199
//! seed = 2024
//! tests = phi_n, phi_n_star, phi_cent_star, phi_stud_star
//!
//! [options]
//! kernel = bartlett-priestley
//! burn_in = 500
//! decision_rule = p-value
//! tau_plug_in = null-imposed
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::equality::{Analysis, AnalysisOptions, TauPlugIn, TestKind};
use crate::error::{invalid, Result, SpectestError};
use crate::kernel::{cross_validate_bandwidth, default_candidates, Bandwidth, Kernel};
use crate::models::{preset_with, simulate, Innovation, DEFAULT_BURN_IN};
use crate::randomization::{DecisionRule, RandomizationKind, MIN_DRAWS};
use crate::seed::{derive_seed, tag};
use crate::series::demean;

pub const DESK_REPLICATIONS: usize = 200;
pub const DESK_DRAWS: usize = 199;
pub const PAPER_REPLICATIONS: usize = 400;
pub const PAPER_DRAWS: usize = 300;
pub const MIN_REPLICATIONS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub models: Vec<String>,
    pub innovation: Innovation,
    pub sample_sizes: Vec<usize>,
    pub alphas: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub replications: usize,
    pub draws: usize,
    pub seed: u64,
    pub tests: Vec<TestKind>,
    pub kernel: String,
    pub burn_in: usize,
    pub rule: DecisionRule,
    pub tau_plug_in: TauPlugIn,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            models: vec!["MA1".into()],
            innovation: Innovation::Gaussian,
            sample_sizes: vec![100],
            alphas: vec![0.05],
            multipliers: vec![1.0],
            replications: DESK_REPLICATIONS,
            draws: DESK_DRAWS,
            seed: 1,
            tests: vec![TestKind::Asymptotic, TestKind::RandUncentered],
            kernel: "bartlett-priestley".into(),
            burn_in: DEFAULT_BURN_IN,
            rule: DecisionRule::PValue,
            tau_plug_in: TauPlugIn::NullImposed,
        }
    }
}

fn parse_list<T, F>(value: &str, line: usize, parse: F) -> Result<Vec<T>>
where
    F: Fn(&str) -> std::result::Result<T, String>,
{
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(s).map_err(|message| SpectestError::Config { line, message }))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(SpectestError::Config {
            line,
            message: "empty list".into(),
        });
    }
    Ok(items)
}

fn number<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|_| format!("cannot parse {s:?}"))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        let mut section = String::from("experiment");
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_ascii_lowercase();
                if section != "experiment" && section != "options" {
                    return Err(SpectestError::Config {
                        line,
                        message: format!("unknown section [{section}]"),
                    });
                }
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| SpectestError::Config {
                line,
                message: format!("expected key = value, found {content:?}"),
            })?;
            let (key, value) = (key.trim().to_ascii_lowercase(), value.trim());
            let config_err = |message: String| SpectestError::Config { line, message };
            match (section.as_str(), key.as_str()) {
                ("experiment", "model" | "models") => {
                    config.models = parse_list(value, line, |s| Ok(s.to_string()))?;
                }
                ("experiment", "innovation") => {
                    config.innovation = Innovation::by_name(value).map_err(|e| config_err(e.to_string()))?;
                }
                ("experiment", "sample_sizes" | "n") => config.sample_sizes = parse_list(value, line, number)?,
                ("experiment", "alphas" | "alpha") => config.alphas = parse_list(value, line, number)?,
                ("experiment", "multipliers" | "c") => config.multipliers = parse_list(value, line, number)?,
                ("experiment", "replications" | "t") => config.replications = number(value).map_err(config_err)?,
                ("experiment", "draws" | "b") => config.draws = number(value).map_err(config_err)?,
                ("experiment", "seed") => config.seed = number(value).map_err(config_err)?,
                ("experiment", "tests") => {
                    config.tests = parse_list(value, line, |s| TestKind::from_label(s).map_err(|e| e.to_string()))?;
                }
                ("options", "kernel") => config.kernel = value.to_string(),
                ("options", "burn_in") => config.burn_in = number(value).map_err(config_err)?,
                ("options", "decision_rule") => {
                    config.rule = match value {
                        "p-value" => DecisionRule::PValue,
                        "literal-step-five" => DecisionRule::LiteralStepFive,
                        other => return Err(config_err(format!("unknown decision rule {other:?}"))),
                    }
                }
                ("options", "tau_plug_in") => {
                    config.tau_plug_in = match value {
                        "null-imposed" => TauPlugIn::NullImposed,
                        "unrestricted" => TauPlugIn::Unrestricted,
                        other => return Err(config_err(format!("unknown plug-in {other:?}"))),
                    }
                }
                (s, k) => return Err(config_err(format!("unknown key {k:?} in [{s}]"))),
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| SpectestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Switches to the full replication and draw counts.
    pub fn paper_scale(mut self) -> Self {
        self.replications = PAPER_REPLICATIONS;
        self.draws = PAPER_DRAWS;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < MIN_REPLICATIONS {
            return invalid(format!("need at least {MIN_REPLICATIONS} replications, got {}", self.replications));
        }
        if self.draws < MIN_DRAWS {
            return invalid(format!("need at least {MIN_DRAWS} draws, got {}", self.draws));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return invalid(format!("alpha {a} outside (0, 1)"));
        }
        if let Some(c) = self.multipliers.iter().find(|c| !(**c > 0.0)) {
            return invalid(format!("bandwidth multiplier {c} must be positive"));
        }
        if let Some(n) = self.sample_sizes.iter().find(|n| **n < 8) {
            return invalid(format!("sample size {n} is too small"));
        }
        if self.models.is_empty() || self.tests.is_empty() {
            return invalid("need at least one model and one test");
        }
        for model in &self.models {
            preset_with(model, self.innovation)?;
        }
        Kernel::by_name(&self.kernel)?;
        Ok(())
    }
}

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub model: String,
    pub n: usize,
    pub alpha: f64,
    pub c: f64,
    pub test: TestKind,
    pub rejections: usize,
    pub excluded: usize,
    pub replications: usize,
    pub draws: usize,
    pub seed: u64,
}

impl TableRow {
    fn decisions(&self) -> usize {
        self.replications - self.excluded
    }

    /// Rejection rate in percent over the included replications.
    pub fn rate(&self) -> f64 {
        if self.decisions() == 0 {
            return f64::NAN;
        }
        100.0 * self.rejections as f64 / self.decisions() as f64
    }

    /// Monte Carlo standard error of the rate, in percent.
    pub fn standard_error(&self) -> f64 {
        let r = self.rate() / 100.0;
        100.0 * (r * (1.0 - r) / self.decisions() as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizePowerTable {
    pub rows: Vec<TableRow>,
    pub seed: u64,
    pub replications: usize,
    pub draws: usize,
    pub wall_time_secs: f64,
}

impl SizePowerTable {
    pub fn get(&self, model: &str, n: usize, alpha: f64, c: f64, test: TestKind) -> Option<&TableRow> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.n == n && r.alpha == alpha && r.c == c && r.test == test)
    }
}

/// Cell key: (multiplier index, alpha index, test index).
type Decisions = Vec<Option<bool>>;

struct Replication<'a> {
    config: &'a ExperimentConfig,
    kernel: &'a Kernel,
}

impl Replication<'_> {
    fn cells(&self) -> usize {
        self.config.multipliers.len() * self.config.alphas.len() * self.config.tests.len()
    }

    fn cell(&self, c: usize, a: usize, t: usize) -> usize {
        let cfg = self.config;
        (c * cfg.alphas.len() + a) * cfg.tests.len() + t
    }

    fn run(&self, model: &str, n: usize, rep: usize) -> Decisions {
        match self.try_run(model, n, rep) {
            Ok(d) => d,
            Err(e) => {
                log::warn!("{model}, n = {n}, replication {rep} excluded: {e}");
                vec![None; self.cells()]
            }
        }
    }

    fn try_run(&self, model: &str, n: usize, rep: usize) -> Result<Decisions> {
        let cfg = self.config;
        let job_seed = derive_seed(cfg.seed, &[tag(model), n as u64, rep as u64]);
        let spec = preset_with(model, cfg.innovation)?.with_burn_in(cfg.burn_in);
        let panel = demean(&simulate(&spec, n, derive_seed(job_seed, &[0]))?);
        let base = cross_validate_bandwidth(&panel, self.kernel, &default_candidates(n))?;
        let options = AnalysisOptions {
            demean: false,
            tau_plug_in: cfg.tau_plug_in,
        };
        let needs_draws = cfg.tests.iter().any(|t| *t != TestKind::Asymptotic);
        let mut out = vec![None; self.cells()];
        for (ci, &c) in cfg.multipliers.iter().enumerate() {
            let bandwidth: Bandwidth = base.with_multiplier(c)?;
            let analysis = Analysis::new(&panel, self.kernel, bandwidth, &options)?;
            let draw_seed = derive_seed(job_seed, &[1, ci as u64]);
            let t_stars = if needs_draws {
                analysis.draw_statistics(cfg.draws, draw_seed, Some(1))?
            } else {
                Vec::new()
            };
            for (ai, &alpha) in cfg.alphas.iter().enumerate() {
                for (ti, &test) in cfg.tests.iter().enumerate() {
                    let report = match RandomizationKind::from_test_kind(test) {
                        None => analysis.asymptotic_test(alpha),
                        Some(kind) => analysis.randomization_report(kind, alpha, &t_stars, cfg.rule, draw_seed),
                    };
                    out[self.cell(ci, ai, ti)] = match report {
                        Ok(r) => Some(r.rejects()),
                        Err(e) => {
                            log::warn!("{model}, n = {n}, replication {rep}, {}: {e}", test.label());
                            None
                        }
                    };
                }
            }
        }
        Ok(out)
    }
}

/// Runs every (model, n) combination for `replications` simulated panels.
///
/// Replications are independent and seeded from the master seed, so the
/// table does not depend on `workers`.
pub fn run_experiment(config: &ExperimentConfig, workers: Option<usize>) -> Result<SizePowerTable> {
    config.validate()?;
    let started = Instant::now();
    let kernel = Kernel::by_name(&config.kernel)?;
    let replication = Replication {
        config,
        kernel: &kernel,
    };
    let jobs: Vec<(&str, usize, usize)> = config
        .models
        .iter()
        .flat_map(|m| {
            config
                .sample_sizes
                .iter()
                .flat_map(move |&n| (0..config.replications).map(move |rep| (m.as_str(), n, rep)))
        })
        .collect();
    let run_all = || -> Vec<Decisions> {
        jobs.par_iter()
            .map(|&(model, n, rep)| replication.run(model, n, rep))
            .collect()
    };
    let results = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| SpectestError::Experiment(format!("cannot start worker pool: {e}")))?
            .install(run_all),
        None => run_all(),
    };

    let mut counts: BTreeMap<(usize, usize, usize), (usize, usize)> = BTreeMap::new();
    for (&(model, n, _), decisions) in jobs.iter().zip(&results) {
        let mi = config.models.iter().position(|m| m == model).expect("known model");
        let ni = config.sample_sizes.iter().position(|s| *s == n).expect("known size");
        for (cell, decision) in decisions.iter().enumerate() {
            let entry = counts.entry((mi, ni, cell)).or_default();
            match decision {
                Some(true) => entry.0 += 1,
                Some(false) => {}
                None => entry.1 += 1,
            }
        }
    }

    let mut rows = Vec::new();
    for (mi, model) in config.models.iter().enumerate() {
        for (ni, &n) in config.sample_sizes.iter().enumerate() {
            for (ci, &c) in config.multipliers.iter().enumerate() {
                for (ai, &alpha) in config.alphas.iter().enumerate() {
                    for (ti, &test) in config.tests.iter().enumerate() {
                        let (rejections, excluded) = counts[&(mi, ni, replication.cell(ci, ai, ti))];
                        rows.push(TableRow {
                            model: model.clone(),
                            n,
                            alpha,
                            c,
                            test,
                            rejections,
                            excluded,
                            replications: config.replications,
                            draws: config.draws,
                            seed: config.seed,
                        });
                    }
                }
            }
        }
    }
    if let Some(row) = rows.iter().find(|r| r.excluded * 100 > r.replications) {
        return Err(SpectestError::Experiment(format!(
            "{} of {} replications excluded for {} n = {} alpha = {} c = {} {}",
            row.excluded,
            row.replications,
            row.model,
            row.n,
            row.alpha,
            row.c,
            row.test.label()
        )));
    }
    Ok(SizePowerTable {
        rows,
        seed: config.seed,
        replications: config.replications,
        draws: config.draws,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

pub const CSV_HEADER: &str = "model,n,alpha,c,test,rate,T,B,seed,rejections,excluded,se";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Text,
}

pub fn to_csv(table: &SizePowerTable) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.1},{},{},{},{},{},{:.2}",
            r.model,
            r.n,
            r.alpha,
            r.c,
            r.test.label(),
            r.rate(),
            r.replications,
            r.draws,
            r.seed,
            r.rejections,
            r.excluded,
            r.standard_error()
        );
    }
    out
}

/// Layout close to a printed size table: one line per (model, α, c),
/// one column per (n, test).
pub fn to_text(table: &SizePowerTable) -> String {
    let mut sizes: Vec<usize> = table.rows.iter().map(|r| r.n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let mut tests: Vec<TestKind> = Vec::new();
    for r in &table.rows {
        if !tests.contains(&r.test) {
            tests.push(r.test);
        }
    }
    let mut out = String::new();
    let _ = write!(out, "{:<8} {:>6} {:>5}", "model", "alpha", "c");
    for n in &sizes {
        for t in &tests {
            let _ = write!(out, " {:>14}", format!("n={n} {}", t.label()));
        }
    }
    out.push('\n');
    let mut seen: Vec<(String, u64, u64)> = Vec::new();
    for r in &table.rows {
        let key = (r.model.clone(), r.alpha.to_bits(), r.c.to_bits());
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        let _ = write!(out, "{:<8} {:>6} {:>5}", r.model, r.alpha * 100.0, r.c);
        for &n in &sizes {
            for &t in &tests {
                match table.get(&r.model, n, r.alpha, r.c, t) {
                    Some(cell) => {
                        let _ = write!(out, " {:>14.1}", cell.rate());
                    }
                    None => {
                        let _ = write!(out, " {:>14}", "-");
                    }
                }
            }
        }
        out.push('\n');
    }
    let _ = writeln!(
        out,
        "T = {}, B = {}, seed = {}, wall time {:.1} s",
        table.replications, table.draws, table.seed, table.wall_time_secs
    );
    out
}

pub fn export(table: &SizePowerTable, path: &Path, format: ExportFormat) -> Result<()> {
    let text = match format {
        ExportFormat::Csv => to_csv(table),
        ExportFormat::Text => to_text(table),
    };
    std::fs::write(path, text).map_err(|source| SpectestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses the CSV written by [`export`]. Wall time is not stored and
/// comes back as zero.
pub fn parse_table_csv<R: Read>(reader: R) -> Result<SizePowerTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err(1, 0, e.to_string()))?.clone();
    let expected: Vec<&str> = CSV_HEADER.split(',').collect();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(parse_err(1, 0, format!("unexpected header {headers:?}")));
    }
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row_no = i + 2;
        let record = record.map_err(|e| parse_err(row_no, 0, e.to_string()))?;
        let field = |j: usize| -> &str { &record[j] };
        let num = |j: usize| -> Result<f64> {
            field(j)
                .parse::<f64>()
                .map_err(|_| parse_err(row_no, j + 1, format!("cannot parse {:?}", field(j))))
        };
        let int = |j: usize| -> Result<u64> {
            field(j)
                .parse::<u64>()
                .map_err(|_| parse_err(row_no, j + 1, format!("cannot parse {:?}", field(j))))
        };
        let row = TableRow {
            model: field(0).to_string(),
            n: int(1)? as usize,
            alpha: num(2)?,
            c: num(3)?,
            test: TestKind::from_label(field(4)).map_err(|e| parse_err(row_no, 5, e.to_string()))?,
            replications: int(6)? as usize,
            draws: int(7)? as usize,
            seed: int(8)?,
            rejections: int(9)? as usize,
            excluded: int(10)? as usize,
        };
        let printed = num(5)?;
        if (printed - row.rate()).abs() > 0.05 + 1e-9 {
            return Err(parse_err(row_no, 6, format!("rate {printed} disagrees with rejection count")));
        }
        rows.push(row);
    }
    let first = rows.first().cloned();
    Ok(SizePowerTable {
        seed: first.as_ref().map_or(0, |r| r.seed),
        replications: first.as_ref().map_or(0, |r| r.replications),
        draws: first.as_ref().map_or(0, |r| r.draws),
        rows,
        wall_time_secs: 0.0,
    })
}

fn parse_err(row: usize, column: usize, message: String) -> SpectestError {
    SpectestError::Parse { row, column, message }
}
