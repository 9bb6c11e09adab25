//! Experiment configs, the sharded suite runner and report emission.
//!
//! Draw `i` of an arm always uses the stream `draw_stream(seed, arm, i)`;
//! shard `s` handles the draws with `i mod shards == s`. Pooled samples are
//! reassembled by global index, so every statistic is independent of the
//! shard count and of scheduling.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::densities::{self, CauchyParams, TDistParams};
use crate::ensembles::{self, EnsembleError, EnsembleMatrix, EnsembleSpec, PartitionSpec, RadialLaw};
use crate::girko::{self, LinearSystemSpec, StableExponent, StableLaw};
use crate::matcore::{ComplexMatrix, RealMatrix};
use crate::rng::{draw_stream, label_hash, RngStream};
use crate::special::beta_reg;
use crate::stats::{self, KsReport, McEstimate, StatsError};

pub const DEFAULT_SAMPLES: usize = 20_000;
pub const DEFAULT_THRESHOLD: f64 = 1e-3;
pub const IDENTITY_TOLERANCE: f64 = 1e-10;
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;
pub const THREADS_ENV: &str = "RMTLAB_THREADS";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config field `{field}`: {message}")]
    Field { field: &'static str, message: String },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn field_err(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field { field, message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Universality,
    Exactness,
    Girko,
    GirkoStable,
    Identities,
    Complex,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Universality => "universality",
            ExperimentKind::Exactness => "exactness",
            ExperimentKind::Girko => "girko",
            ExperimentKind::GirkoStable => "girko-stable",
            ExperimentKind::Identities => "identities",
            ExperimentKind::Complex => "complex",
        }
    }
}

fn default_m() -> usize {
    2
}
fn default_n() -> usize {
    1
}
fn default_radial() -> Vec<RadialLaw> {
    vec![RadialLaw::Gaussian]
}
fn default_samples() -> usize {
    DEFAULT_SAMPLES
}
fn default_shards() -> usize {
    1
}
fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}
fn default_max() -> usize {
    12
}

/// One experiment, as read from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_radial")]
    pub radial: Vec<RadialLaw>,
    /// 1-based columns forming `B`; defaults to the first `m`.
    #[serde(default)]
    pub partition: Option<Vec<usize>>,
    /// Parameter vector of the linear-system suites; its length sets `n`.
    #[serde(default)]
    pub u: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    pub seed: u64,
    #[serde(default = "default_shards")]
    pub shards: usize,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Stable exponent for `girko-stable` (1 or 2).
    #[serde(default)]
    pub alpha: Option<StableExponent>,
    /// Stable scale `c` for `girko-stable`.
    #[serde(default)]
    pub scale: Option<f64>,
    /// Largest `m`, `n` checked by `identities`.
    #[serde(default = "default_max")]
    pub max: usize,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, seed: u64) -> Self {
        Self {
            kind,
            m: default_m(),
            n: default_n(),
            radial: default_radial(),
            partition: None,
            u: Vec::new(),
            samples: DEFAULT_SAMPLES,
            seed,
            shards: 1,
            output: None,
            threshold: DEFAULT_THRESHOLD,
            alpha: None,
            scale: None,
            max: default_max(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn partition_spec(&self) -> Result<PartitionSpec, ConfigError> {
        match &self.partition {
            None => Ok(PartitionSpec::leading(self.m)),
            Some(cols) => PartitionSpec::new(cols.clone(), self.m, self.n).map_err(|e| field_err("partition", e.to_string())),
        }
    }

    fn stable_law(&self) -> Result<StableLaw, ConfigError> {
        let alpha = self.alpha.ok_or_else(|| field_err("alpha", "girko-stable needs alpha = 1 or 2"))?;
        let law = StableLaw { alpha, c: self.scale.unwrap_or(StableLaw::DEFAULT_SCALE) };
        law.validate().map_err(|e| field_err("scale", e.to_string()))?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(field_err("threshold", format!("must lie in (0, 1), got {}", self.threshold)));
        }
        if self.kind == ExperimentKind::Identities {
            if self.max == 0 {
                return Err(field_err("max", "must be at least 1"));
            }
            return Ok(());
        }
        if self.m == 0 {
            return Err(field_err("m", "must be at least 1"));
        }
        if self.shards == 0 {
            return Err(field_err("shards", "must be at least 1"));
        }
        if self.samples < stats::KS_MIN_SAMPLES * self.shards {
            return Err(field_err(
                "samples",
                format!("need at least {} x shards = {}", stats::KS_MIN_SAMPLES, stats::KS_MIN_SAMPLES * self.shards),
            ));
        }
        for law in &self.radial {
            law.validate().map_err(|e| field_err("radial", e.to_string()))?;
        }
        if self.radial.is_empty() {
            return Err(field_err("radial", "at least one radial law is required"));
        }
        if self.u.iter().any(|x| !x.is_finite()) {
            return Err(field_err("u", "entries must be finite"));
        }
        match self.kind {
            ExperimentKind::Universality | ExperimentKind::Exactness | ExperimentKind::Complex => {
                if self.n == 0 {
                    return Err(field_err("n", "must be at least 1 for Z = B⁻¹X"));
                }
                if self.kind == ExperimentKind::Universality && self.radial.len() < 2 {
                    return Err(field_err("radial", "universality compares at least two radial laws"));
                }
                if self.kind == ExperimentKind::Complex && self.partition.is_some() {
                    return Err(field_err("partition", "complex suite uses the leading partition"));
                }
                self.partition_spec()?;
            }
            ExperimentKind::Girko | ExperimentKind::GirkoStable => {
                if self.u.len() != self.n {
                    return Err(field_err("u", format!("has {} entries but n = {}", self.u.len(), self.n)));
                }
                if self.partition.is_some() {
                    return Err(field_err("partition", "linear-system suites solve for the first m unknowns"));
                }
                if self.kind == ExperimentKind::GirkoStable {
                    self.stable_law()?;
                }
            }
            ExperimentKind::Identities => unreachable!(),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    KsOneSample,
    KsTwoSample,
    McMean,
    Residual,
}

/// One verdict in a report. Keys are always present so the schema does not
/// depend on the test kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestEntry {
    pub name: String,
    pub test: TestKind,
    pub threshold: f64,
    pub passed: bool,
    pub ks: Option<KsReport>,
    pub mc: Option<McEstimate>,
    pub expected: Option<f64>,
    pub residual: Option<f64>,
    pub error: Option<String>,
}

impl TestEntry {
    fn ks(name: String, threshold: f64, result: Result<KsReport, StatsError>) -> Self {
        match result {
            Ok(ks) => Self {
                name,
                test: if ks.n2.is_some() { TestKind::KsTwoSample } else { TestKind::KsOneSample },
                threshold,
                passed: ks.passes(threshold),
                ks: Some(ks),
                mc: None,
                expected: None,
                residual: None,
                error: None,
            },
            Err(e) => Self::failed(name, TestKind::KsOneSample, threshold, e.to_string()),
        }
    }

    fn residual(name: String, tolerance: f64, residual: f64) -> Self {
        Self {
            name,
            test: TestKind::Residual,
            threshold: tolerance,
            passed: residual < tolerance,
            ks: None,
            mc: None,
            expected: Some(0.0),
            residual: Some(residual),
            error: None,
        }
    }

    fn failed(name: String, test: TestKind, threshold: f64, error: String) -> Self {
        Self {
            name,
            test,
            threshold,
            passed: false,
            ks: None,
            mc: None,
            expected: None,
            residual: None,
            error: Some(error),
        }
    }
}

/// Per-`(m, n)` residuals of the exact identities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityRow {
    pub m: usize,
    pub n: usize,
    /// Real-case gamma product identity.
    pub gamma_identity: f64,
    /// `|C · ∫ det(1+ZZᵀ)^{−(m+n)/2} dZ − 1|`.
    pub normalization: f64,
    /// Gaussian determinant integral against `C`.
    pub gaussian_determinant: f64,
    /// Complex analog `Π Γ(n+j)/Γ(j) = Π Γ(m+j)/Γ(j)`.
    pub complex_gamma_identity: f64,
    pub ortho_volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub label: String,
    pub requested: usize,
    /// Draws that produced a sample (the effective sample size).
    pub collected: usize,
    /// Near-singular `B` rejected and redrawn.
    pub resamples: u64,
    /// Draws abandoned after the resample limit or another error.
    pub failed: usize,
    pub first_error: Option<String>,
}

/// Raw per-draw functionals of one arm, for CSV output.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmSamples {
    pub label: String,
    pub columns: Vec<String>,
    /// `(global draw index, values)` in index order.
    pub rows: Vec<(usize, Vec<f64>)>,
}

impl ArmSamples {
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows.iter().map(|(_, v)| v[k]).collect()
    }

    fn column_by_name(&self, name: &str) -> Vec<f64> {
        let k = self.columns.iter().position(|c| c == name).expect("known column");
        self.column(k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub passed: bool,
    pub failures: Vec<String>,
    pub entries: Vec<TestEntry>,
    pub identities: Vec<IdentityRow>,
    pub arms: Vec<ArmSummary>,
    #[serde(skip)]
    pub samples: Vec<ArmSamples>,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl RunReport {
    fn new(config: ExperimentConfig) -> Self {
        Self {
            config,
            passed: true,
            failures: Vec::new(),
            entries: Vec::new(),
            identities: Vec::new(),
            arms: Vec::new(),
            samples: Vec::new(),
            wall_time: Duration::ZERO,
        }
    }

    fn finish(&mut self, started: Instant) {
        self.failures = self.entries.iter().filter(|e| !e.passed).map(|e| e.name.clone()).collect();
        self.passed = self.failures.is_empty();
        self.wall_time = started.elapsed();
    }

    pub fn entry(&self, name: &str) -> Option<&TestEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Exit code: 0 iff every verdict passes.
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

/// Worker pool size: `RMTLAB_THREADS` when set, else rayon's default.
fn build_pool() -> rayon::ThreadPool {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        builder = builder.num_threads(k.max(1));
    }
    builder.build().expect("thread pool")
}

type DrawResult = Result<(Vec<f64>, u32), EnsembleError>;

struct Sampler<'a> {
    config: &'a ExperimentConfig,
    pool: rayon::ThreadPool,
}

impl Sampler<'_> {
    fn collect(
        &self,
        arm_key: &str,
        label: String,
        columns: Vec<String>,
        draw: impl Fn(&mut RngStream) -> DrawResult + Sync,
    ) -> (ArmSamples, ArmSummary) {
        let n = self.config.samples;
        let shards = self.config.shards;
        let seed = self.config.seed;
        let arm = label_hash(arm_key);
        let per_shard: Vec<Vec<(usize, DrawResult)>> = self.pool.install(|| {
            (0..shards)
                .into_par_iter()
                .map(|s| {
                    (s..n)
                        .step_by(shards)
                        .map(|i| {
                            let mut rng = draw_stream(seed, arm, i as u64);
                            (i, draw(&mut rng))
                        })
                        .collect()
                })
                .collect()
        });
        let mut slots: Vec<Option<DrawResult>> = (0..n).map(|_| None).collect();
        for (i, r) in per_shard.into_iter().flatten() {
            slots[i] = Some(r);
        }
        let mut rows = Vec::with_capacity(n);
        let mut summary = ArmSummary {
            label: label.clone(),
            requested: n,
            collected: 0,
            resamples: 0,
            failed: 0,
            first_error: None,
        };
        for (i, slot) in slots.into_iter().enumerate() {
            match slot.expect("every index is assigned to a shard") {
                Ok((values, resamples)) => {
                    summary.resamples += u64::from(resamples);
                    rows.push((i, values));
                }
                Err(e) => {
                    summary.failed += 1;
                    summary.first_error.get_or_insert_with(|| e.to_string());
                }
            }
        }
        summary.collected = rows.len();
        (ArmSamples { label, columns, rows }, summary)
    }
}

/// Executes the configured suite. Suite-level failures become failed
/// entries; only an invalid config is an error.
pub fn run(config: &ExperimentConfig) -> Result<RunReport, ConfigError> {
    config.validate()?;
    let started = Instant::now();
    let mut report = RunReport::new(config.clone());
    if config.kind == ExperimentKind::Identities {
        run_identities(config.max, &mut report);
    } else {
        let sampler = Sampler { config, pool: build_pool() };
        match config.kind {
            ExperimentKind::Exactness => run_exactness(&sampler, &mut report)?,
            ExperimentKind::Universality => run_universality(&sampler, &mut report)?,
            ExperimentKind::Complex => run_complex(&sampler, &mut report),
            ExperimentKind::Girko => run_girko(&sampler, &mut report),
            ExperimentKind::GirkoStable => run_girko_stable(&sampler, &mut report)?,
            ExperimentKind::Identities => unreachable!(),
        }
    }
    report.finish(started);
    Ok(report)
}

fn run_identities(max: usize, report: &mut RunReport) {
    let mut worst = [0.0f64; 4];
    for m in 1..=max {
        for n in 1..=max {
            let gamma = densities::gamma_identity_residual(m, n);
            let normalization =
                (densities::log_universal_real_constant(m, n) + densities::log_selberg_z_integral(m, n)).exp_m1().abs();
            // Gaussian f(u) = e^{−u}/π^{m(m+n)/2} turns the determinant
            // integral into the normalization constant.
            let gaussian = (densities::log_gaussian_detn_integral(m, n)
                - (m * (m + n)) as f64 / 2.0 * std::f64::consts::PI.ln()
                - densities::log_universal_real_constant(m, n))
            .abs();
            let complex_gamma = complex_gamma_identity_residual(m, n);
            for (w, v) in worst.iter_mut().zip([gamma, normalization, gaussian, complex_gamma]) {
                *w = w.max(v);
            }
            report.identities.push(IdentityRow {
                m,
                n,
                gamma_identity: gamma,
                normalization,
                gaussian_determinant: gaussian,
                complex_gamma_identity: complex_gamma,
                ortho_volume: if n == 1 { densities::ortho_volume(m) } else { f64::NAN }.max(0.0),
            });
        }
    }
    let entries = [
        ("gamma-identity", IDENTITY_TOLERANCE, worst[0]),
        ("normalization", NORMALIZATION_TOLERANCE, worst[1]),
        ("gaussian-determinant-integral", IDENTITY_TOLERANCE, worst[2]),
        ("complex-gamma-identity", IDENTITY_TOLERANCE, worst[3]),
    ];
    for (name, tol, value) in entries {
        report.entries.push(TestEntry::residual(format!("{name} max residual, m,n <= {max}"), tol, value));
    }
    let volumes_ok = (1..=max).all(|m| {
        let v = densities::ortho_volume(m);
        v.is_finite() && v > 0.0
    });
    report.entries.push(TestEntry::residual(
        format!("ortho-volume positive, m <= {max}"),
        0.5,
        if volumes_ok { 0.0 } else { 1.0 },
    ));
}

/// `|ln Π_{j=1}^m Γ(n+j)/Γ(j) − ln Π_{j=1}^n Γ(m+j)/Γ(j)|`.
pub fn complex_gamma_identity_residual(m: usize, n: usize) -> f64 {
    use crate::special::sum_ln_gamma;
    let side = |a: usize, b: usize| {
        sum_ln_gamma((1..=a).map(|j| (b + j) as f64)) - sum_ln_gamma((1..=a).map(|j| j as f64))
    };
    (side(m, n) - side(n, m)).abs()
}

fn cauchy_cdf_std(x: f64) -> f64 {
    densities::cauchy_cdf(x, &CauchyParams::standard())
}

fn pairwise_two_sample(report: &mut RunReport, arms: &[ArmSamples], column: &str, threshold: f64) {
    for i in 0..arms.len() {
        for j in i + 1..arms.len() {
            let name = format!("{column}: {} vs {}", arms[i].label, arms[j].label);
            let r = stats::ks_two_sample(&arms[i].column_by_name(column), &arms[j].column_by_name(column));
            report.entries.push(TestEntry::ks(name, threshold, r));
        }
    }
}

fn z_columns(m: usize, n: usize) -> Vec<String> {
    let mut cols: Vec<String> = (1..=m).flat_map(|i| (1..=n).map(move |p| format!("z{i}{p}"))).collect();
    cols.push("logdet".into());
    cols
}

fn real_z_row(z: &EnsembleMatrix) -> Result<Vec<f64>, EnsembleError> {
    let zr = z.as_real().expect("real field");
    let mut row = zr.as_slice().to_vec();
    row.push(z.log_det_gram()?);
    Ok(row)
}

fn run_exactness(s: &Sampler<'_>, report: &mut RunReport) -> Result<(), ConfigError> {
    let cfg = s.config;
    let (m, n) = (cfg.m, cfg.n);
    let law = cfg.radial[0];
    let spec = EnsembleSpec::real(m, n, law);
    let part = cfg.partition_spec()?;
    let (arm, summary) = s.collect(
        &format!("exactness/{}", law.label()),
        law.label(),
        z_columns(m, n),
        |rng| {
            let d = ensembles::sample_z(&spec, &part, rng)?;
            Ok((real_z_row(&d.z)?, d.resamples))
        },
    );
    // Every entry of Z is standard Cauchy; for n = 1 the squared norm
    // zᵀz/(1 + zᵀz) is Beta(m/2, 1/2).
    let family = m * n + usize::from(n == 1);
    let threshold = stats::bonferroni(cfg.threshold, family);
    for (k, col) in arm.columns.iter().take(m * n).enumerate() {
        let r = stats::ks_one_sample(&arm.column(k), cauchy_cdf_std);
        report.entries.push(TestEntry::ks(format!("{col} vs standard Cauchy"), threshold, r));
    }
    if n == 1 {
        let w: Vec<f64> = arm
            .rows
            .iter()
            .map(|(_, v)| {
                let s2: f64 = v[..m].iter().map(|x| x * x).sum();
                s2 / (1.0 + s2)
            })
            .collect();
        let a = m as f64 / 2.0;
        let r = stats::ks_one_sample(&w, |x| beta_reg(a, 0.5, x));
        report.entries.push(TestEntry::ks(format!("|z|^2/(1+|z|^2) vs Beta({a}, 0.5)"), threshold, r));
    }
    report.arms.push(summary);
    report.samples.push(arm);
    Ok(())
}

fn run_universality(s: &Sampler<'_>, report: &mut RunReport) -> Result<(), ConfigError> {
    let cfg = s.config;
    let (m, n) = (cfg.m, cfg.n);
    let part = cfg.partition_spec()?;
    let mut arms = Vec::new();
    for (idx, law) in cfg.radial.iter().enumerate() {
        let spec = EnsembleSpec::real(m, n, *law);
        let (arm, summary) = s.collect(
            &format!("universality/{idx}/{}", law.label()),
            law.label(),
            vec!["logdet".into(), "z11".into()],
            |rng| {
                let d = ensembles::sample_z(&spec, &part, rng)?;
                let z11 = d.z.as_real().expect("real field")[(0, 0)];
                Ok((vec![d.z.log_det_gram()?, z11], d.resamples))
            },
        );
        report.arms.push(summary);
        arms.push(arm);
    }
    pairwise_two_sample(report, &arms, "logdet", cfg.threshold);
    pairwise_two_sample(report, &arms, "z11", cfg.threshold);
    report.samples = arms;
    Ok(())
}

fn run_complex(s: &Sampler<'_>, report: &mut RunReport) {
    let cfg = s.config;
    let (m, n) = (cfg.m, cfg.n);
    let part = PartitionSpec::leading(m);
    let mut arms = Vec::new();
    for (idx, law) in cfg.radial.iter().enumerate() {
        let spec = EnsembleSpec::complex(m, n, *law);
        let (arm, summary) = s.collect(
            &format!("complex/{idx}/{}", law.label()),
            law.label(),
            vec!["abs2_z11".into(), "logdet".into()],
            |rng| {
                let d = ensembles::sample_z(&spec, &part, rng)?;
                let z11 = d.z.as_complex().expect("complex field")[(0, 0)];
                Ok((vec![z11.norm_sqr(), d.z.log_det_gram()?], d.resamples))
            },
        );
        // A single complex entry has density ∝ (1 + |z|²)^{−2}, so
        // s = |z|² has CDF s/(1+s).
        let r = stats::ks_one_sample(&arm.column(0), |x| if x <= 0.0 { 0.0 } else { x / (1.0 + x) });
        report.entries.push(TestEntry::ks(format!("|z11|^2 vs s/(1+s) [{}]", law.label()), cfg.threshold, r));
        report.arms.push(summary);
        arms.push(arm);
    }
    pairwise_two_sample(report, &arms, "abs2_z11", cfg.threshold);
    pairwise_two_sample(report, &arms, "logdet", cfg.threshold);
    report.samples = arms;
}

fn solution_columns(m: usize) -> Vec<String> {
    let mut cols: Vec<String> = (1..=m).map(|i| format!("z{i}")).collect();
    cols.push("ratio12".into());
    cols.push("norm2".into());
    cols
}

fn solution_row(z: Vec<f64>) -> Vec<f64> {
    let ratio = if z.len() >= 2 { z[0] / z[1] } else { f64::NAN };
    let norm2 = z.iter().map(|x| x * x).sum();
    let mut row = z;
    row.push(ratio);
    row.push(norm2);
    row
}

fn run_girko(s: &Sampler<'_>, report: &mut RunReport) {
    let cfg = s.config;
    let m = cfg.m;
    let beta = girko::beta_euclidean(&cfg.u);
    let width = CauchyParams::centered(beta);
    let mut arms = Vec::new();
    for (idx, law) in cfg.radial.iter().enumerate() {
        let spec = LinearSystemSpec::new(m, cfg.u.clone(), *law);
        let (arm, summary) = s.collect(
            &format!("girko/{idx}/{}", law.label()),
            law.label(),
            solution_columns(m),
            |rng| {
                let d = girko::sample_solution(&spec, rng)?;
                Ok((solution_row(d.z), d.resamples))
            },
        );
        let label = law.label();
        let r = stats::ks_one_sample(&arm.column(0), |x| densities::cauchy_cdf(x, &width));
        report.entries.push(TestEntry::ks(format!("z1 vs Cauchy(width {beta}) [{label}]"), cfg.threshold, r));
        if m >= 2 {
            let r = stats::ks_one_sample(&arm.column_by_name("ratio12"), cauchy_cdf_std);
            report.entries.push(TestEntry::ks(format!("z1/z2 vs standard Cauchy [{label}]"), cfg.threshold, r));
        }
        // zᵀz/(β² + zᵀz) is Beta(m/2, 1/2) under the m-dimensional law.
        let w: Vec<f64> = arm.column_by_name("norm2").iter().map(|s2| s2 / (beta * beta + s2)).collect();
        let a = m as f64 / 2.0;
        let r = stats::ks_one_sample(&w, |x| beta_reg(a, 0.5, x));
        report.entries.push(TestEntry::ks(format!("|z|^2/(beta^2+|z|^2) vs Beta({a}, 0.5) [{label}]"), cfg.threshold, r));
        report.arms.push(summary);
        arms.push(arm);
    }
    pairwise_two_sample(report, &arms, "z1", cfg.threshold);
    pairwise_two_sample(report, &arms, "norm2", cfg.threshold);
    report.samples = arms;
}

/// KS against a CDF that may fail: the data are mapped through the CDF
/// first (KS is invariant under that transform) and compared to uniform.
fn ks_fallible(data: &[f64], cdf: impl Fn(f64) -> Result<f64, String> + Sync) -> Result<KsReport, String> {
    let u: Vec<f64> = data.par_iter().map(|&x| cdf(x)).collect::<Result<_, _>>()?;
    stats::ks_one_sample(&u, |x| x).map_err(|e| e.to_string())
}

fn run_girko_stable(s: &Sampler<'_>, report: &mut RunReport) -> Result<(), ConfigError> {
    let cfg = s.config;
    let m = cfg.m;
    let law = cfg.stable_law()?;
    let beta = girko::beta_alpha(&cfg.u, law.alpha.value());
    let label = format!("stable(alpha={}, c={})", law.alpha.value(), law.c);
    let (arm, summary) = s.collect(&format!("girko-stable/{label}"), label.clone(), solution_columns(m), |rng| {
        let d = girko::sample_stable_system(m, &cfg.u, &law, rng)?;
        Ok((solution_row(d.z), d.resamples))
    });
    let mut push = |name: String, r: Result<KsReport, String>| {
        report.entries.push(match r {
            Ok(ks) => TestEntry::ks(name, cfg.threshold, Ok(ks)),
            Err(e) => TestEntry::failed(name, TestKind::KsOneSample, cfg.threshold, e),
        });
    };
    let r = s.pool.install(|| {
        ks_fallible(&arm.column(0), |x| girko::girko_stable_cdf(x, &law, beta).map_err(|e| e.to_string()))
    });
    push(format!("z1 vs p(zeta; {}, {beta}) [{label}]", law.alpha.value()), r);
    if m >= 2 {
        let r = s.pool.install(|| {
            ks_fallible(&arm.column_by_name("ratio12"), |x| {
                girko::girko_stable_cdf(x, &law, 1.0).map_err(|e| e.to_string())
            })
        });
        push(format!("z1/z2 vs p(r; {}, 1) [{label}]", law.alpha.value()), r);
    }
    report.arms.push(summary);
    report.samples.push(arm);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Json,
    Csv,
}

/// Pretty JSON with a trailing newline; field order follows the structs.
pub fn report_json(report: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// One row per collected draw: `arm,index,<functionals...>`.
pub fn write_csv(report: &RunReport, mut out: impl Write) -> io::Result<()> {
    let columns: BTreeSet<&Vec<String>> = report.samples.iter().map(|a| &a.columns).collect();
    let header = columns.iter().next().map(|c| c.join(",")).unwrap_or_default();
    let mut line = String::new();
    writeln!(out, "arm,index{}{}", if header.is_empty() { "" } else { "," }, header)?;
    for arm in &report.samples {
        for (i, values) in &arm.rows {
            line.clear();
            write!(line, "{},{}", csv_field(&arm.label), i).expect("string write");
            for v in values {
                write!(line, ",{v}").expect("string write");
            }
            writeln!(out, "{line}")?;
        }
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes the report to `path` in the requested format.
pub fn emit(report: &RunReport, format: OutputFormat, path: &Path) -> io::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = io::BufWriter::new(file);
    match format {
        OutputFormat::Json => w.write_all(report_json(report).as_bytes())?,
        OutputFormat::Csv => write_csv(report, &mut w)?,
    }
    w.flush()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityKind {
    UniversalReal,
    UniversalComplex,
    MatrixT,
    Girko,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityValue {
    pub kind: DensityKind,
    pub log_density: f64,
    pub density: f64,
}

fn parse_real_matrix(v: &Value, field: &'static str) -> Result<RealMatrix, ConfigError> {
    let rows: Vec<Vec<f64>> =
        serde_json::from_value(v.clone()).map_err(|e| field_err(field, format!("expected [[number]]: {e}")))?;
    if rows.is_empty() || rows.iter().any(|r| r.len() != rows[0].len() || r.is_empty()) {
        return Err(field_err(field, "matrix rows must be non-empty and of equal length"));
    }
    let (r, c) = (rows.len(), rows[0].len());
    RealMatrix::from_vec(r, c, rows.concat()).map_err(|e| field_err(field, e.to_string()))
}

fn parse_complex_matrix(v: &Value, field: &'static str) -> Result<ComplexMatrix, ConfigError> {
    let rows: Vec<Vec<[f64; 2]>> = serde_json::from_value(v.clone())
        .map_err(|e| field_err(field, format!("expected [[[re, im]]]: {e}")))?;
    if rows.is_empty() || rows.iter().any(|r| r.len() != rows[0].len() || r.is_empty()) {
        return Err(field_err(field, "matrix rows must be non-empty and of equal length"));
    }
    let (r, c) = (rows.len(), rows[0].len());
    let data = rows.concat().into_iter().map(|[re, im]| num_complex::Complex64::new(re, im)).collect();
    ComplexMatrix::from_vec(r, c, data).map_err(|e| field_err(field, e.to_string()))
}

/// Evaluates one of the closed-form densities at a point, with parameters
/// given as inline JSON (the `density` subcommand).
pub fn evaluate_density(kind: DensityKind, params: &Value, at: &Value) -> Result<DensityValue, ConfigError> {
    let obj = |key: &str| params.get(key).filter(|v| !v.is_null());
    let log_density = match kind {
        DensityKind::UniversalReal => densities::log_universal_real(&parse_real_matrix(at, "at")?),
        DensityKind::UniversalComplex => densities::log_universal_complex(&parse_complex_matrix(at, "at")?),
        DensityKind::MatrixT => {
            let z = parse_real_matrix(at, "at")?;
            let mut p = TDistParams::universal(z.rows(), z.cols());
            if let Some(v) = obj("location") {
                p.location = parse_real_matrix(v, "location")?;
            }
            if let Some(v) = obj("sigma") {
                p.sigma = parse_real_matrix(v, "sigma")?;
            }
            if let Some(v) = obj("omega") {
                p.omega = parse_real_matrix(v, "omega")?;
            }
            if let Some(v) = obj("q") {
                p.q = v.as_f64().ok_or_else(|| field_err("q", "must be a number"))?;
            }
            densities::log_matrix_t(&z, &p).map_err(|e| field_err("params", e.to_string()))?
        }
        DensityKind::Girko => {
            let z: Vec<f64> =
                serde_json::from_value(at.clone()).map_err(|e| field_err("at", format!("expected [number]: {e}")))?;
            if z.is_empty() {
                return Err(field_err("at", "z must have at least one component"));
            }
            let u: Vec<f64> = match obj("u") {
                Some(v) => serde_json::from_value(v.clone()).map_err(|e| field_err("u", e.to_string()))?,
                None => Vec::new(),
            };
            girko::girko_logdensity(&z, &u)
        }
    };
    Ok(DensityValue { kind, log_density, density: log_density.exp() })
}
