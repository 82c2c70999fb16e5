//! Repeated learning trials: success frequencies at fixed `M`, empirical
//! sample complexity, and convergence sweeps.
//!
//! Every trial is keyed by its index. Trial `i` uses seed `base ⊕ i`, draws
//! training points from RNG stream 0 and its test set from stream 1, so any
//! schedule (including rayon's) reproduces the same records.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytic::FunctionSpec;
use crate::dist::{Component, DistributionSpec, LabeledDataset};
use crate::error::{Error, Result};
use crate::learner::{fit, LearnerConfig, PolynomialModel};
use crate::risk::empirical_risk;

pub const DEFAULT_TEST_SIZE: usize = 100_000;
pub const DEFAULT_M_MAX: usize = 1 << 20;
pub const DEFAULT_TRIALS: usize = 50;
/// Fewest trials for which the Wilson interval is reported as valid.
pub const MIN_TRIALS_FOR_INTERVAL: usize = 30;

const TRAIN_STREAM: u64 = 0;
const TEST_STREAM: u64 = 1;
const WILSON_Z: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialConfig {
    #[serde(rename = "fn")]
    pub function: FunctionSpec,
    pub dist: DistributionSpec,
    pub learner: LearnerConfig,
    pub eps: f64,
    pub delta: f64,
    /// Training sample count `M`; ignored by the sample-complexity search.
    #[serde(rename = "M", default)]
    pub samples: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_test_size")]
    pub test_size: usize,
    #[serde(default = "default_m_max")]
    pub m_max: usize,
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}
fn default_test_size() -> usize {
    DEFAULT_TEST_SIZE
}
fn default_m_max() -> usize {
    DEFAULT_M_MAX
}

impl TrialConfig {
    pub fn new(function: FunctionSpec, dist: DistributionSpec, learner: LearnerConfig) -> Self {
        TrialConfig {
            function,
            dist,
            learner,
            eps: 0.05,
            delta: 0.1,
            samples: 0,
            trials: DEFAULT_TRIALS,
            seed: 0,
            test_size: DEFAULT_TEST_SIZE,
            m_max: DEFAULT_M_MAX,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.function.validate()?;
        self.dist.validate()?;
        self.learner.validate()?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!(
                "eps must be nonnegative, got {}",
                self.eps
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if self.test_size == 0 {
            return Err(Error::Config("test_size must be at least 1".into()));
        }
        if self.m_max == 0 {
            return Err(Error::Config("m_max must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_samples(&self, samples: usize) -> Self {
        TrialConfig {
            samples,
            ..self.clone()
        }
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

/// Hex SHA-256 of the JSON encoding.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config types serialize");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub seed: u64,
    pub samples: usize,
    pub success: bool,
    /// Test-set risk; `inf` when the fit failed.
    #[serde(with = "crate::nonfinite")]
    pub risk: f64,
    pub risk_se: f64,
    pub model_digest: Option<String>,
    /// Test-set risk of the exact degree-`N` Taylor polynomial at the same
    /// expansion point; the floor any fit of this degree faces.
    pub truncation_floor: Option<f64>,
    pub error: Option<String>,
}

fn failed_record(index: usize, seed: u64, samples: usize, err: &Error) -> TrialRecord {
    TrialRecord {
        index,
        seed,
        samples,
        success: false,
        risk: f64::INFINITY,
        risk_se: 0.0,
        model_digest: None,
        truncation_floor: None,
        error: Some(err.to_string()),
    }
}

/// One draw of the learning experiment.
pub fn run_trial(cfg: &TrialConfig, index: usize) -> Result<TrialRecord> {
    cfg.validate()?;
    Ok(run_trial_unchecked(cfg, index))
}

fn run_trial_unchecked(cfg: &TrialConfig, index: usize) -> TrialRecord {
    let seed = cfg.seed ^ index as u64;
    let m = cfg.samples;
    let outcome = (|| -> Result<(PolynomialModel, LabeledDataset)> {
        let train = LabeledDataset::generate(&cfg.function, &cfg.dist, seed, TRAIN_STREAM, m)?;
        let model = fit(&train, &cfg.learner)?;
        let test =
            LabeledDataset::generate(&cfg.function, &cfg.dist, seed, TEST_STREAM, cfg.test_size)?;
        Ok((model, test))
    })();
    let (model, test) = match outcome {
        Ok(v) => v,
        Err(e) => return failed_record(index, seed, m, &e),
    };
    let (risk, risk_se) = match crate::risk::empirical_risk_with_se(&model, &test) {
        Ok(v) => v,
        Err(e) => return failed_record(index, seed, m, &e),
    };
    let risk = if risk.is_nan() { f64::INFINITY } else { risk };
    let truncation_floor = cfg
        .function
        .taylor_polynomial(model.expansion_point, cfg.learner.degree)
        .ok()
        .and_then(|t| {
            empirical_risk(
                &PolynomialModel::from_coefficients(t.expansion_point, t.coefficients),
                &test,
            )
            .ok()
        });
    TrialRecord {
        index,
        seed,
        samples: m,
        success: risk <= cfg.eps,
        risk,
        risk_se,
        model_digest: Some(model.digest()),
        truncation_floor,
        error: None,
    }
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub config_hash: String,
    pub seed: u64,
    pub samples: usize,
    pub trials: usize,
    pub successes: usize,
    pub frequency: f64,
    pub wilson_lower: f64,
    pub wilson_upper: f64,
    /// False below [`MIN_TRIALS_FOR_INTERVAL`] trials.
    pub interval_valid: bool,
    pub records: Vec<TrialRecord>,
}

/// Run all trials at `cfg.samples` and aggregate.
pub fn success_frequency(cfg: &TrialConfig) -> Result<TrialResult> {
    cfg.validate()?;
    let records: Vec<TrialRecord> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial_unchecked(cfg, i))
        .collect();
    let successes = records.iter().filter(|r| r.success).count();
    let (lo, hi) = wilson_interval(successes, cfg.trials);
    Ok(TrialResult {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        samples: cfg.samples,
        trials: cfg.trials,
        successes,
        frequency: successes as f64 / cfg.trials as f64,
        wilson_lower: lo,
        wilson_upper: hi,
        interval_valid: cfg.trials >= MIN_TRIALS_FOR_INTERVAL,
        records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchStep {
    pub samples: usize,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub config_hash: String,
    pub seed: u64,
    pub eps: f64,
    pub delta: f64,
    /// Smallest searched `M` reaching frequency `1 − δ`.
    pub m_hat: Option<usize>,
    pub converged: bool,
    /// The accepted `M` and its frequency.
    pub upper: Option<SearchStep>,
    /// The largest rejected `M` next to `m_hat`.
    pub lower: Option<SearchStep>,
    pub steps: Vec<SearchStep>,
    pub m_max: usize,
}

/// Doubling search on `M` from `2(N+1)`, then bisection between the last
/// failing and first passing size.
pub fn estimate_sample_complexity(cfg: &TrialConfig) -> Result<ComplexityReport> {
    cfg.validate()?;
    let target = 1.0 - cfg.delta;
    let mut steps = Vec::new();
    let mut probe = |m: usize| -> Result<SearchStep> {
        let r = success_frequency(&cfg.with_samples(m))?;
        let step = SearchStep {
            samples: m,
            frequency: r.frequency,
        };
        steps.push(step);
        Ok(step)
    };

    let mut lower: Option<SearchStep> = None;
    let mut m = (2 * (cfg.learner.degree + 1)).min(cfg.m_max);
    let upper = loop {
        let step = probe(m)?;
        if step.frequency >= target {
            break Some(step);
        }
        lower = Some(step);
        if m >= cfg.m_max {
            break None;
        }
        m = (2 * m).min(cfg.m_max);
    };

    let mut report = ComplexityReport {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        eps: cfg.eps,
        delta: cfg.delta,
        m_hat: None,
        converged: false,
        upper,
        lower,
        steps: Vec::new(),
        m_max: cfg.m_max,
    };
    if let (Some(mut hi), Some(mut lo)) = (upper, lower) {
        while hi.samples - lo.samples > 1 {
            let mid = lo.samples + (hi.samples - lo.samples) / 2;
            let step = probe(mid)?;
            if step.frequency >= target {
                hi = step;
            } else {
                lo = step;
            }
        }
        report.upper = Some(hi);
        report.lower = Some(lo);
    }
    report.m_hat = report.upper.map(|s| s.samples);
    report.converged = report.upper.is_some();
    report.steps = steps;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    #[serde(rename = "M")]
    Samples(Vec<usize>),
    #[serde(rename = "N")]
    Degree(Vec<usize>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Samples(_) => "M",
            SweepAxis::Degree(_) => "N",
        }
    }

    fn values(&self) -> &[usize] {
        match self {
            SweepAxis::Samples(v) | SweepAxis::Degree(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: usize,
    #[serde(with = "crate::nonfinite")]
    pub median_risk: f64,
    #[serde(with = "crate::nonfinite")]
    pub q25: f64,
    #[serde(with = "crate::nonfinite")]
    pub q75: f64,
    pub success_frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub config_hash: String,
    pub seed: u64,
    pub axis: String,
    pub rows: Vec<SweepRow>,
}

#[derive(Serialize)]
struct SweepCsvRow<'a> {
    axis: &'a str,
    value: usize,
    median_risk: f64,
    q25: f64,
    q75: f64,
    success_frequency: f64,
    config_hash: &'a str,
    seed: u64,
}

const SWEEP_HEADER: [&str; 8] = [
    "axis",
    "value",
    "median_risk",
    "q25",
    "q75",
    "success_frequency",
    "config_hash",
    "seed",
];

impl SweepTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        out.write_record(SWEEP_HEADER)?;
        for r in &self.rows {
            out.serialize(SweepCsvRow {
                axis: &self.axis,
                value: r.value,
                median_risk: r.median_risk,
                q25: r.q25,
                q75: r.q75,
                success_frequency: r.success_frequency,
                config_hash: &self.config_hash,
                seed: self.seed,
            })?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Linear-interpolation quantile of sorted data (`inf` entries allowed).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if frac == 0.0 || i + 1 >= sorted.len() {
        return sorted[i];
    }
    let (a, b) = (sorted[i], sorted[i + 1]);
    if a == b {
        a
    } else {
        a + frac * (b - a)
    }
}

/// Risk quartiles and success frequency over a grid of `M` or `N`. Failed
/// fits count as infinite risk. An `N` sweep resets `m_per_order` to its default.
pub fn convergence_sweep(cfg: &TrialConfig, axis: &SweepAxis) -> Result<SweepTable> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(axis.values().len());
    for &value in axis.values() {
        let mut point = cfg.clone();
        match axis {
            SweepAxis::Samples(_) => point.samples = value,
            SweepAxis::Degree(_) => {
                point.learner.degree = value;
                point.learner.m_per_order = None;
            }
        }
        let result = success_frequency(&point)?;
        let mut risks: Vec<f64> = result.records.iter().map(|r| r.risk).collect();
        risks.sort_by(f64::total_cmp);
        rows.push(SweepRow {
            value,
            median_risk: quantile(&risks, 0.5),
            q25: quantile(&risks, 0.25),
            q75: quantile(&risks, 0.75),
            success_frequency: result.frequency,
        });
    }
    Ok(SweepTable {
        config_hash: config_hash(&(cfg, axis)),
        seed: cfg.seed,
        axis: axis.name().to_string(),
        rows,
    })
}

/// Base seed of the shipped reference configurations.
pub const REFERENCE_SEED: u64 = 0x5eed_7a71_0001;

/// The shipped `(name, config)` reference runs at `(ε, δ) = (0.05, 0.1)`.
pub fn reference_configs() -> Vec<(&'static str, TrialConfig)> {
    let base = |f: FunctionSpec, d: DistributionSpec, degree: usize| {
        let mut cfg = TrialConfig::new(f, d, LearnerConfig::new(degree));
        cfg.seed = REFERENCE_SEED;
        cfg
    };
    vec![
        (
            "sin_gaussian",
            base(
                FunctionSpec::Sin,
                DistributionSpec::Gaussian { sigma: 1.0 },
                9,
            ),
        ),
        (
            "exp_uniform",
            base(
                FunctionSpec::Exp,
                DistributionSpec::Uniform { a: -1.0, b: 1.0 },
                6,
            ),
        ),
        (
            "poly_mixture",
            base(
                FunctionSpec::Poly {
                    coeffs: vec![1.0, -2.0, 0.5, 0.25],
                },
                DistributionSpec::Mixture {
                    components: vec![
                        Component {
                            weight: 0.5,
                            d: DistributionSpec::Gaussian { sigma: 1.0 },
                        },
                        Component {
                            weight: 0.3,
                            d: DistributionSpec::Uniform { a: -2.0, b: 2.0 },
                        },
                        Component {
                            weight: 0.2,
                            d: DistributionSpec::PointMass { at: 0.0 },
                        },
                    ],
                },
                3,
            ),
        ),
    ]
}
