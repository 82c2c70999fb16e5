//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any fails. Built with `harness = false`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use taylor_core::analytic::FunctionSpec;
use taylor_core::dist::{Component, DistributionSpec, LabeledDataset};
use taylor_core::fdweights::exact::fd_weights_exact_f64;
use taylor_core::fdweights::{accuracy_order, fd_weights};
use taylor_core::harness::{estimate_sample_complexity, reference_configs, TrialConfig};
use taylor_core::learner::{
    density_bisection, find_density_point, fit, required_samples, LearnerConfig,
};
use taylor_core::quad;
use taylor_core::risk::{
    empirical_risk, empirical_risk_with_se, risk_decomposition, tail_bound, DecompositionOptions,
};

use common::*;

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)*) => {
        if !$cond {
            return Err(format!($($arg)*));
        }
    };
}

/// 1. Stencil exactness on random node sets, float vs exact backend.
fn stencil_exactness() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_monomial = 0.0f64;
    let mut worst_backend = 0.0f64;
    let mut worst_cond = 0.0f64;
    for set in 0..20 {
        let size = 2 + set % 8;
        let k = size - 1;
        let nodes: Vec<f64> = (0..size).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p: f64 = rng.random_range(-1.0..1.0);
        for n in 0..=k {
            let table = fd_weights(&nodes, n, p).map_err(|e| e.to_string())?;
            let cond = table.condition_estimate;
            worst_cond = worst_cond.max(cond);
            for m in 0..=k {
                let est: f64 = table
                    .weights
                    .iter()
                    .zip(&nodes)
                    .map(|(w, x)| w * x.powi(m as i32))
                    .sum();
                let exact = falling(m, n) * if m >= n { p.powi((m - n) as i32) } else { 0.0 };
                let rel = (est - exact).abs() / exact.abs().max(1.0);
                worst_monomial = worst_monomial.max(rel / cond);
                ensure!(
                    rel <= 1e-8 * cond,
                    "set {set}: x^{m}, order {n}: relative error {rel:e} > 1e-8·{cond:e}"
                );
            }
            let exact = fd_weights_exact_f64(&nodes, n, p).map_err(|e| e.to_string())?;
            let scale = exact.iter().fold(0.0f64, |a, w| a.max(w.abs()));
            for (w, e) in table.weights.iter().zip(&exact) {
                let rel = (w - e).abs() / scale;
                worst_backend = worst_backend.max(rel);
                ensure!(rel <= 1e-10, "set {set}, order {n}: float vs exact {rel:e}");
            }
        }
    }
    Ok(format!(
        "max error/cond {worst_monomial:.1e}, float vs exact {worst_backend:.1e}, max cond {worst_cond:.1e}"
    ))
}

/// 2. Measured convergence order of one-sided equispaced stencils on sin.
fn convergence_order() -> Result<String, String> {
    let p = 0.7;
    let mut summary = Vec::new();
    for (count, n) in [(3usize, 1usize), (3, 2), (5, 2), (5, 4)] {
        let expected = accuracy_order(count, n).map_err(|e| e.to_string())? as f64;
        let truth = FunctionSpec::Sin.derivative(n, p).unwrap();
        let errors: Vec<f64> = (0..=5)
            .map(|i| {
                let h = 0.1 / 2f64.powi(i);
                let nodes: Vec<f64> = (0..count).map(|j| p + j as f64 * h).collect();
                let values: Vec<f64> = nodes.iter().map(|x| x.sin()).collect();
                (fd_weights(&nodes, n, p).unwrap().apply(&values) - truth).abs()
            })
            .collect();
        let slopes: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
        for s in &slopes {
            ensure!(
                (s - expected).abs() <= 0.5,
                "({count},{n}): slope {s:.3} vs {expected}, slopes {slopes:?}"
            );
        }
        let lo = slopes.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        summary.push(format!("({count},{n})→{expected}: [{lo:.2},{hi:.2}]"));
    }
    Ok(summary.join(" "))
}

/// 3. Sample-size inversion against the exact CDF, plus Monte Carlo coverage.
fn sample_size_inversion() -> Result<String, String> {
    let gammas = [0.05, 0.1, 0.3, 0.5, 0.9];
    let ms = [1u64, 2, 3, 5, 8];
    let deltas = [0.01, 0.05, 0.1, 0.2, 0.5];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_margin = f64::INFINITY;
    let mut largest = 0;
    for &gamma in &gammas {
        for &m in &ms {
            for &delta in &deltas {
                let big_m = required_samples(gamma, m, delta).map_err(|e| e.to_string())?;
                largest = largest.max(big_m);
                let g = rational(gamma);
                let d = rational(delta);
                ensure!(
                    binomial_cdf_exact(m - 1, big_m, &g) < d,
                    "γ={gamma} m={m} δ={delta}: CDF at M={big_m} not below δ"
                );
                ensure!(
                    big_m == 0 || binomial_cdf_exact(m - 1, big_m - 1, &g) >= d,
                    "γ={gamma} m={m} δ={delta}: M={big_m} not minimal"
                );
                let draws = Binomial::new(big_m, gamma).unwrap();
                let trials = 100_000;
                let hits = (0..trials).filter(|_| draws.sample(&mut rng) >= m).count();
                let freq = hits as f64 / trials as f64;
                worst_margin = worst_margin.min(freq - (1.0 - delta - 0.01));
                ensure!(
                    freq >= 1.0 - delta - 0.01,
                    "γ={gamma} m={m} δ={delta}: coverage {freq} at M={big_m}"
                );
            }
        }
    }
    Ok(format!(
        "125 grid points minimal, largest M {largest}, min coverage margin {worst_margin:.4}"
    ))
}

/// 4. Density point on atomic, mixture and continuous samples.
fn density_point() -> Result<String, String> {
    let cases = [
        ("point mass", DistributionSpec::PointMass { at: 1.5 }),
        (
            "atoms",
            DistributionSpec::Mixture {
                components: vec![
                    Component {
                        weight: 0.7,
                        d: DistributionSpec::PointMass { at: -2.0 },
                    },
                    Component {
                        weight: 0.3,
                        d: DistributionSpec::PointMass { at: 3.0 },
                    },
                ],
            },
        ),
        (
            "mixture",
            DistributionSpec::Mixture {
                components: vec![
                    Component {
                        weight: 0.5,
                        d: DistributionSpec::Gaussian { sigma: 0.5 },
                    },
                    Component {
                        weight: 0.3,
                        d: DistributionSpec::Uniform { a: 2.0, b: 6.0 },
                    },
                    Component {
                        weight: 0.2,
                        d: DistributionSpec::PointMass { at: -4.0 },
                    },
                ],
            },
        ),
        ("gaussian", DistributionSpec::Gaussian { sigma: 3.0 }),
        ("uniform", DistributionSpec::Uniform { a: -1.0, b: 5.0 }),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut notes = Vec::new();
    for (name, d) in &cases {
        for size in [1usize, 7, 100, 10_000] {
            let xs = d
                .sample(40 + size as u64, size)
                .map_err(|e| e.to_string())?;
            let trace = density_bisection(&xs).map_err(|e| e.to_string())?;
            let p = trace.point;
            let resolution = (trace.hi - trace.lo).max(f64::MIN_POSITIVE);
            let mut h = trace.initial_width.max(resolution);
            loop {
                let mass = xs.iter().filter(|x| (*x - p).abs() <= h).count();
                ensure!(
                    mass > 0,
                    "{name}, n={size}: empty neighborhood h={h:e} at p={p}"
                );
                if h <= resolution {
                    break;
                }
                h = (h / 2.0).max(resolution);
            }
            ensure!(
                find_density_point(&xs).unwrap() == p,
                "{name}: not deterministic"
            );
            for _ in 0..5 {
                let mut shuffled = xs.clone();
                shuffled.shuffle(&mut rng);
                ensure!(
                    find_density_point(&shuffled).unwrap().to_bits() == p.to_bits(),
                    "{name}, n={size}: permutation changed p"
                );
            }
            if size == 10_000 {
                notes.push(format!("{name} p={p:.4}"));
            }
        }
    }
    Ok(notes.join(", "))
}

/// 5. Closed-form tail bound value, and soundness against quadrature.
fn tail_bound_soundness() -> Result<String, String> {
    let e2 = std::f64::consts::E * std::f64::consts::E;
    let got = tail_bound(1.0, 1.0, 2.0).map_err(|e| e.to_string())?;
    let want = e2 + 2.0 / e2;
    ensure!(
        (got - want).abs() <= 1e-6,
        "tail_bound(1,1,2) = {got}, want {want}"
    );

    let families = [
        DistributionSpec::Gaussian { sigma: 0.5 },
        DistributionSpec::Gaussian { sigma: 1.0 },
        DistributionSpec::Gaussian { sigma: 2.0 },
        DistributionSpec::Uniform { a: -1.0, b: 1.0 },
        DistributionSpec::Uniform { a: -0.5, b: 2.0 },
        DistributionSpec::Uniform { a: -3.0, b: 3.0 },
    ];
    let mut tightest = f64::INFINITY;
    let mut checked = 0;
    for d in &families {
        let c = d.subgaussian_constant().map_err(|e| e.to_string())?;
        for k in [0.1, 0.5, 1.0, 2.0] {
            let bound = tail_bound(k, c, 2.0).map_err(|e| e.to_string())?;
            let integrand = |x: f64| (k * x.abs()).exp() * d.density(x);
            let truth = match d {
                DistributionSpec::Uniform { a, b } => {
                    let q = quad::integrate_pieces(integrand, &[*a, 0.0, *b], 1e-10, 100_000)
                        .map_err(|e| e.to_string())?;
                    let closed = uniform_abs_exp_moment(k, *a, *b);
                    ensure!(
                        (q.value - closed).abs() < 1e-8,
                        "uniform quadrature {} vs {closed}",
                        q.value
                    );
                    q.value
                }
                DistributionSpec::Gaussian { sigma } => {
                    let right = quad::integrate_to_infinity(integrand, 0.0, 1e-10, 100_000)
                        .map_err(|e| e.to_string())?;
                    let left = quad::integrate_from_neg_infinity(integrand, 0.0, 1e-10, 100_000)
                        .map_err(|e| e.to_string())?;
                    let q = left.value + right.value;
                    let closed = gaussian_abs_exp_moment(k, *sigma);
                    ensure!(
                        (q - closed).abs() < 1e-8 * closed,
                        "gaussian quadrature {q} vs {closed}"
                    );
                    q
                }
                _ => unreachable!(),
            };
            ensure!(
                bound >= truth,
                "{}: K={k}, c={c}: bound {bound} < truth {truth}",
                d.name()
            );
            tightest = tightest.min(bound / truth);
            checked += 1;
        }
    }
    Ok(format!("tail_bound(1,1,2)={got:.6}; {checked} (family, K) pairs sound, min bound/truth {tightest:.3}"))
}

/// 6. Exact recovery of polynomial targets from 100 samples.
fn polynomial_recovery() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let dists = [
        DistributionSpec::Uniform { a: -1.0, b: 1.0 },
        DistributionSpec::Gaussian { sigma: 1.0 },
    ];
    let mut worst_coef = 0.0f64;
    let mut worst_risk = 0.0f64;
    let mut fits = 0;
    for n in 0..=6usize {
        for deg in 0..=n {
            for (di, d) in dists.iter().enumerate() {
                let coeffs: Vec<f64> = (0..=deg).map(|_| rng.random_range(-2.0..2.0)).collect();
                let f = FunctionSpec::Poly { coeffs };
                let seed = (n * 100 + deg * 10 + di) as u64;
                let train =
                    LabeledDataset::generate(&f, d, seed, 0, 100).map_err(|e| e.to_string())?;
                let model = fit(&train, &LearnerConfig::new(n)).map_err(|e| e.to_string())?;
                let truth = f.taylor_polynomial(model.expansion_point, n).unwrap();
                let err = model
                    .coefficients
                    .iter()
                    .zip(&truth.coefficients)
                    .fold(0.0f64, |a, (c, t)| a.max((c - t).abs()));
                ensure!(
                    err <= 1e-6,
                    "N={n}, deg={deg}, {}: coefficient error {err:e}",
                    d.name()
                );
                let test =
                    LabeledDataset::generate(&f, d, seed, 1, 10_000).map_err(|e| e.to_string())?;
                let risk = empirical_risk(&model, &test).map_err(|e| e.to_string())?;
                ensure!(
                    risk <= 1e-6,
                    "N={n}, deg={deg}, {}: risk {risk:e}",
                    d.name()
                );
                worst_coef = worst_coef.max(err);
                worst_risk = worst_risk.max(risk);
                fits += 1;
            }
        }
    }
    Ok(format!(
        "{fits} fits, max coefficient error {worst_coef:.1e}, max risk {worst_risk:.1e}"
    ))
}

fn reference(name: &str) -> TrialConfig {
    reference_configs()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, c)| c)
        .expect("reference config")
}

/// 7. End-to-end witness on the sine reference configuration.
fn end_to_end_witness() -> Result<String, String> {
    let cfg = reference("sin_gaussian");
    let first = estimate_sample_complexity(&cfg).map_err(|e| e.to_string())?;
    ensure!(
        first.converged,
        "no M up to {} reached 1−δ: {:?}",
        cfg.m_max,
        first.steps
    );
    let hit = first.upper.unwrap();
    ensure!(hit.frequency >= 0.9, "frequency {}", hit.frequency);
    let again = estimate_sample_complexity(&cfg).map_err(|e| e.to_string())?;
    ensure!(first == again, "rerun differs");
    let at = taylor_core::success_frequency(&cfg.with_samples(hit.samples))
        .map_err(|e| e.to_string())?;
    let rerun = taylor_core::success_frequency(&cfg.with_samples(hit.samples))
        .map_err(|e| e.to_string())?;
    ensure!(
        at.records
            .iter()
            .zip(&rerun.records)
            .all(|(a, b)| a.risk.to_bits() == b.risk.to_bits() && a.model_digest == b.model_digest),
        "trial records not bit-identical"
    );
    Ok(format!(
        "M̂={} with frequency {:.2} (seed {:#x}), search {:?}",
        hit.samples,
        hit.frequency,
        cfg.seed,
        first
            .steps
            .iter()
            .map(|s| (s.samples, s.frequency))
            .collect::<Vec<_>>()
    ))
}

/// 8. Same (ε, δ), wider gaussian, larger sample complexity.
fn nonuniformity_witness() -> Result<String, String> {
    let run = |sigma: f64| {
        let mut cfg = reference("poly_mixture");
        cfg.dist = DistributionSpec::Gaussian { sigma };
        estimate_sample_complexity(&cfg)
    };
    let narrow = run(1.0).map_err(|e| e.to_string())?;
    let wide = run(4.0).map_err(|e| e.to_string())?;
    let (a, b) = match (narrow.m_hat, wide.m_hat) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(format!("search did not converge: {narrow:?} / {wide:?}")),
    };
    ensure!(b > a, "M̂(σ=4) = {b} not above M̂(σ=1) = {a}");
    Ok(format!("M̂(σ=1)={a}, M̂(σ=4)={b}"))
}

/// 9. body ≤ I₁ + I₂ and test risk ≤ body + tails + 5 SE on fitted models.
fn decomposition_soundness() -> Result<String, String> {
    let mut runs: Vec<(String, TrialConfig, usize)> = Vec::new();
    for (name, cfg) in reference_configs() {
        for m in [50, 500, 5000] {
            runs.push((name.to_string(), cfg.clone(), m));
        }
    }
    for n in [1, 3, 5, 7] {
        let mut cfg = reference("sin_gaussian");
        cfg.learner = LearnerConfig::new(n);
        runs.push((format!("sin_gaussian_N{n}"), cfg, 1000));
    }
    let mut checked = 0;
    let mut worst_slack = f64::INFINITY;
    for (name, cfg, m) in &runs {
        for index in 0..3u64 {
            let seed = cfg.seed ^ index;
            let train = LabeledDataset::generate(&cfg.function, &cfg.dist, seed, 0, *m)
                .map_err(|e| e.to_string())?;
            let model = fit(&train, &cfg.learner).map_err(|e| format!("{name}: {e}"))?;
            let test = LabeledDataset::generate(&cfg.function, &cfg.dist, seed, 1, 100_000)
                .map_err(|e| e.to_string())?;
            for t in [1.0, 2.0, std::f64::consts::PI] {
                let report = risk_decomposition(
                    &model,
                    &cfg.function,
                    &cfg.dist,
                    t,
                    cfg.learner.degree,
                    DecompositionOptions {
                        eps: Some(cfg.eps),
                        test: Some(&test),
                        p_exp: None,
                    },
                )
                .map_err(|e| format!("{name}: {e}"))?;
                ensure!(
                    report.body_risk <= report.i1_bound + report.i2_bound + 1e-8,
                    "{name} M={m} T={t}: body {} > I1 {} + I2 {}",
                    report.body_risk,
                    report.i1_bound,
                    report.i2_bound
                );
                let (risk, se) = empirical_risk_with_se(&model, &test).unwrap();
                let allowed = report.body_risk + report.tail_bound + 5.0 * se;
                ensure!(
                    risk <= allowed,
                    "{name} M={m} T={t}: test risk {risk} > {allowed}"
                );
                worst_slack = worst_slack.min(allowed - risk);
                checked += 1;
            }
        }
    }
    Ok(format!(
        "{checked} (model, T) reports sound, min slack {worst_slack:.2e}"
    ))
}

fn main() {
    let criteria: [(&str, Duration, Check); 9] = [
        (
            "Stencil exactness",
            Duration::from_secs(1),
            stencil_exactness,
        ),
        (
            "Convergence order",
            Duration::from_secs(1),
            convergence_order,
        ),
        (
            "Sample-size inversion",
            Duration::from_secs(30),
            sample_size_inversion,
        ),
        ("Density point", Duration::from_secs(5), density_point),
        (
            "Tail-bound soundness",
            Duration::from_secs(10),
            tail_bound_soundness,
        ),
        (
            "Exact polynomial recovery",
            Duration::from_secs(1),
            polynomial_recovery,
        ),
        (
            "End-to-end witness",
            Duration::from_secs(300),
            end_to_end_witness,
        ),
        (
            "Nonuniformity witness",
            Duration::from_secs(600),
            nonuniformity_witness,
        ),
        (
            "Decomposition soundness",
            Duration::from_secs(60),
            decomposition_soundness,
        ),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        if !filter.is_empty()
            && !filter
                .iter()
                .any(|f| name.to_lowercase().contains(&f.to_lowercase()))
        {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= *budget => (true, d),
            Ok(d) => (false, format!("over time budget: {d}")),
            Err(e) => (false, e),
        };
        if !ok {
            failures += 1;
        }
        println!(
            "[{}] {}. {name} ({:.2}s / {}s): {detail}",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failures > 0 {
        println!("acceptance: {failures} criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
