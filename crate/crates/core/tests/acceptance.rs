//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run all criteria with `cargo test --test acceptance`, or a subset with
//! `cargo test --test acceptance -- 3 7`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use stable_clt::attraction::{gamma_n, make_attracted_law, make_pareto, AttractedLaw, EpsilonSpec, Law, LawSpec};
use stable_clt::bounds::{bound_main, ConstantMode, TERM_SKEW_DRIFT};
use stable_clt::distances::{kol_from_smooth_w, ks_statistic, smoothed_indicator};
use stable_clt::experiment::{
    emit_outputs, fit_rate, fit_table, run_rate_experiment, Abscissa, DistanceKind, ExperimentPlan, OutputFormat,
};
use stable_clt::generator::{apply_generator, forward_equation_residual, GeneratorForm};
use stable_clt::lindeberg::{
    law_truncation_check, stable_truncation_check, taylor_residual, telescoping_decompose, Coupling, ZSpec,
};
use stable_clt::mc::{McConfig, TermEstimate};
use stable_clt::rng::stream;
use stable_clt::smooth::SmoothFn;
use stable_clt::stable::{sample_stable, stable_cdf};
use stable_clt::{QuadConfig, Result, StableParams};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

type Criterion = fn() -> Result<Outcome>;

const CRITERIA: [(usize, &str, Criterion, Duration); 12] = [
    (
        1,
        "generator-symbol identity",
        generator_symbol,
        Duration::from_secs(60),
    ),
    (2, "forward equation", forward_equation, Duration::from_secs(120)),
    (3, "sampler KS", sampler_ks, Duration::from_secs(120)),
    (4, "telescoping identity", telescoping, Duration::from_secs(180)),
    (5, "expansion inequalities", expansion, Duration::from_secs(600)),
    (6, "truncation inequalities", truncation, Duration::from_secs(600)),
    (7, "rate alpha=1.5", rate_above_one, Duration::from_secs(1200)),
    (8, "rate alpha=0.5", rate_below_one, Duration::from_secs(1800)),
    (9, "skew drift sensitivity", skew_drift, Duration::from_secs(60)),
    (10, "gamma_n and log rates", gamma_levels, Duration::from_secs(60)),
    (11, "smoothing sandwich", smoothing, Duration::from_secs(1)),
    (12, "determinism", determinism, Duration::from_secs(600)),
];

fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (id, name, run, budget) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = run().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        let elapsed = start.elapsed();
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        let over = if elapsed > budget {
            format!(" (over the {}s budget)", budget.as_secs())
        } else {
            String::new()
        };
        println!(
            "criterion {id:>2} {name}: {verdict} [{:.1}s{over}] {}",
            elapsed.as_secs_f64(),
            outcome.detail
        );
        if !outcome.pass {
            failures += 1;
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}

fn q() -> QuadConfig {
    QuadConfig::default()
}

fn generator_symbol() -> Result<Outcome> {
    let mut rng = stream(11);
    let mut worst = 0.0f64;
    let mut count = 0;
    for alpha in [0.5, 1.0, 1.5] {
        let betas: &[f64] = if alpha == 1.0 { &[0.0] } else { &[-0.5, 0.0, 0.9] };
        for &beta in betas {
            let p = StableParams::standard(alpha, beta)?;
            for lambda in [0.5, 1.0, 2.0] {
                let f = SmoothFn::cosine(lambda, 0.0, 1.0)?;
                let psi = p.char_exponent(lambda);
                for _ in 0..8 {
                    let x: f64 = rng.random_range(-5.0..5.0);
                    let lf = apply_generator(&f, &p, x, &q(), GeneratorForm::Raw)?;
                    let e = num_complex::Complex64::from_polar(1.0, lambda * x);
                    worst = worst.max((lf - (-psi * e).re).abs());
                    count += 1;
                }
            }
        }
    }
    Ok(Outcome::new(
        worst < 1e-5,
        format!("{count} points, max error {worst:.2e} (tolerance 1e-5)"),
    ))
}

fn forward_equation() -> Result<Outcome> {
    let f = SmoothFn::cosine(1.0, 0.0, 1.0)?;
    let m = 100_000;
    let mut pass = true;
    let mut detail = Vec::new();
    for alpha in [0.5, 1.5] {
        let p = StableParams::standard(alpha, 0.0)?;
        let r = forward_equation_residual(&f, &p, 0.0, 1.0, &McConfig::new(m, 21), &q())?;
        let ok = r.residual.abs() <= 3.0 * r.stderr && r.residual.abs() < 5e-3;
        let sample = sample_stable(&p, m, 22)?;
        let cos: Vec<f64> = sample.values.iter().map(|y| y.cos()).collect();
        let mean = TermEstimate::from_samples(&cos);
        let target = (-1.0f64).exp();
        let closed = (mean.value - target).abs() < 3.0 * mean.stderr;
        pass &= ok && closed;
        detail.push(format!(
            "alpha={alpha}: residual {:.2e} (stderr {:.2e}, table {:.1e}), E cos {:.5} vs {target:.5} (stderr {:.1e})",
            r.residual, r.stderr, r.table_error, mean.value, mean.stderr
        ));
    }
    Ok(Outcome::new(pass, detail.join("; ")))
}

/// Upper 1% point of the limiting Kolmogorov distribution, from its series.
fn kolmogorov_quantile_99() -> f64 {
    let tail = |k: f64| {
        2.0 * (1..100)
            .map(|j| (-1.0f64).powi(j - 1) * (-2.0 * (j * j) as f64 * k * k).exp())
            .sum::<f64>()
    };
    let (mut lo, mut hi) = (1.0, 3.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if tail(mid) > 0.01 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn sampler_ks() -> Result<Outcome> {
    let m = 100_000;
    let critical = kolmogorov_quantile_99() / (m as f64).sqrt();
    let mut pass = true;
    let mut detail = Vec::new();
    for (i, (alpha, beta)) in [(0.5, 0.0), (0.5, 1.0), (1.0, 0.0), (1.5, -0.5), (1.9, 0.0)]
        .into_iter()
        .enumerate()
    {
        let p = StableParams::standard(alpha, beta)?;
        let batch = sample_stable(&p, m, 30 + i as u64)?;
        let d = ks_statistic(&batch.values, |x| stable_cdf(&p, x, &q()))?.value;
        pass &= d < critical;
        detail.push(format!("({alpha},{beta}) {d:.5}"));
    }
    Ok(Outcome::new(
        pass,
        format!("critical {critical:.5}: {}", detail.join(", ")),
    ))
}

fn telescoping() -> Result<Outcome> {
    let f = smoothed_indicator(0.0, 2.0)?;
    let mut pass = true;
    let mut detail = Vec::new();
    for alpha in [0.5, 1.5] {
        let law = Law::Attracted(make_pareto(alpha)?);
        let d = telescoping_decompose(
            &f,
            &law,
            &law.limit(),
            8,
            &McConfig::new(100_000, 41),
            Coupling::Common,
            &q(),
        )?;
        let gap = (d.total.value - d.direct.value).abs();
        let se = d.total.stderr + d.direct.stderr;
        pass &= gap <= 4.0 * se;
        detail.push(format!(
            "alpha={alpha}: sum {:.5} direct {:.5} gap {:.2e} ({:.2} se)",
            d.total.value,
            d.direct.value,
            gap,
            d.gap_in_stderr()
        ));
    }
    Ok(Outcome::new(pass, detail.join("; ")))
}

fn expansion_laws() -> Result<Vec<(&'static str, AttractedLaw)>> {
    Ok(vec![
        ("alpha=1.5", make_pareto(1.5)?),
        ("alpha=1", make_pareto(1.0)?),
        ("alpha=0.5 fast", make_pareto(0.5)?),
        (
            "alpha=0.5 slow",
            make_attracted_law(
                0.5,
                0.5,
                0.0,
                EpsilonSpec::Power {
                    k: 0.1,
                    gamma: 0.3,
                    k_left: None,
                },
                2.0,
            )?,
        ),
    ])
}

const A_GRID: [f64; 3] = [0.2, 0.1, 0.05];

fn expansion() -> Result<Outcome> {
    let f = smoothed_indicator(0.0, 2.0)?;
    let mut pass = true;
    let mut detail = Vec::new();
    for (k, (name, law)) in expansion_laws()?.into_iter().enumerate() {
        for (j, a) in A_GRID.into_iter().enumerate() {
            let mc = McConfig::new(1_000_000, 50 + 10 * k as u64 + j as u64);
            let r = taylor_residual(&f, &law, a, ZSpec::MatchedHybrid, &mc, &q())?;
            let c = r.check;
            let ok = c.lhs.value <= c.rhs_bound + 3.0 * c.lhs.stderr;
            pass &= ok;
            detail.push(format!(
                "{name} a={a}: {:.2e}<={:.2e}{}",
                c.lhs.value,
                c.rhs_bound,
                if ok { "" } else { " FAILED" }
            ));
        }
    }
    Ok(Outcome::new(pass, detail.join(", ")))
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    max / min
}

fn truncation() -> Result<Outcome> {
    let f = smoothed_indicator(0.0, 2.0)?;
    let z = 0.25;
    let mut pass = true;
    let mut detail = Vec::new();
    for (k, alpha) in [0.5, 1.0, 1.5].into_iter().enumerate() {
        let p = StableParams::standard(alpha, 0.0)?;
        let mut scaled = Vec::new();
        for (j, a) in A_GRID.into_iter().enumerate() {
            let mc = McConfig::new(1_000_000, 60 + 10 * k as u64 + j as u64);
            let c = stable_truncation_check(&f, &p, a, z, &mc, &q())?.check;
            let ok = c.lhs.value <= c.rhs_bound + 3.0 * c.lhs.stderr;
            pass &= ok;
            scaled.push(c.lhs.value / a.powf(alpha));
            detail.push(format!(
                "stable alpha={alpha} a={a}: {:.2e}<={:.2e}{}",
                c.lhs.value,
                c.rhs_bound,
                if ok { "" } else { " FAILED" }
            ));
        }
        if alpha < 1.0 {
            let s = spread(&scaled);
            pass &= s < 3.0;
            detail.push(format!("stable alpha={alpha} lhs/a^alpha spread {s:.2}"));
        }
    }
    for (k, alpha) in [0.5, 1.0].into_iter().enumerate() {
        let law = make_pareto(alpha)?;
        let mut scaled = Vec::new();
        for (j, a) in A_GRID.into_iter().enumerate() {
            let mc = McConfig::new(1_000_000, 90 + 10 * k as u64 + j as u64);
            let r = law_truncation_check(&f, &law, a, z, &mc, &q())?;
            let c = r.check;
            let ok = c.lhs.value <= c.rhs_bound + 3.0 * c.lhs.stderr && r.moment.holds();
            pass &= ok;
            scaled.push(c.lhs.value / a.powf(alpha));
            detail.push(format!(
                "law alpha={alpha} a={a}: {:.2e}<={:.2e}{}",
                c.lhs.value,
                c.rhs_bound,
                if ok { "" } else { " FAILED" }
            ));
        }
        if alpha < 1.0 {
            let s = spread(&scaled);
            pass &= s < 3.0;
            detail.push(format!("law alpha={alpha} lhs/a^alpha spread {s:.2}"));
        }
    }
    Ok(Outcome::new(pass, detail.join(", ")))
}

fn rate_plan(alpha: f64, n_grid: Vec<usize>, m: usize, distances: Vec<DistanceKind>, seed: u64) -> ExperimentPlan {
    ExperimentPlan {
        law: LawSpec::Pareto { alpha },
        stable: None,
        n_grid,
        m,
        distances,
        master_seed: seed,
        out_dir: None,
        burn_in: 1,
        common_random_numbers: false,
        bound_mode: ConstantMode::Unit,
        test_function: None,
    }
}

fn dyadic(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|k| 1usize << k).collect()
}

fn rate_above_one() -> Result<Outcome> {
    let plan = rate_plan(1.5, dyadic(6, 13), 200_000, vec![DistanceKind::Kolmogorov], 7);
    let run = run_rate_experiment(&plan, &q())?;
    if let Some(e) = run.error {
        return Err(e);
    }
    let kind = DistanceKind::Kolmogorov.label();
    let fit = fit_table(&run.table, &kind, Abscissa::LogN, plan.burn_in)?;
    let all = fit_table(&run.table, &kind, Abscissa::LogN, 0)?;
    let pass = (-0.47..=-0.20).contains(&fit.exponent);
    Ok(Outcome::new(
        pass,
        format!(
            "exponent {:.3} ± {:.3} (burn-in {}; full grid {:.3}), target [-0.47, -0.20]",
            fit.exponent, fit.stderr, plan.burn_in, all.exponent
        ),
    ))
}

fn rate_below_one() -> Result<Outcome> {
    let smooth = DistanceKind::SmoothWasserstein { order: 2 };
    let plan = rate_plan(0.5, dyadic(4, 9), 1_000_000, vec![DistanceKind::Kolmogorov, smooth], 8);
    let run = run_rate_experiment(&plan, &q())?;
    if let Some(e) = run.error {
        return Err(e);
    }
    let kol = fit_table(
        &run.table,
        &DistanceKind::Kolmogorov.label(),
        Abscissa::LogN,
        plan.burn_in,
    )?;
    let sw = fit_table(&run.table, &smooth.label(), Abscissa::LogN, plan.burn_in);
    let sw_text = match sw {
        Ok(fit) => format!("{:.3} ± {:.3}", fit.exponent, fit.stderr),
        Err(e) => format!("unavailable ({e})"),
    };
    let values: Vec<String> = run
        .table
        .series(&DistanceKind::Kolmogorov.label())
        .iter()
        .map(|(n, v)| format!("{n}:{v:.2e}"))
        .collect();
    // Mean of the null Kolmogorov statistic, sqrt(pi/2) ln 2 / sqrt(M).
    let floor = (std::f64::consts::PI / 2.0).sqrt() * std::f64::consts::LN_2 / (plan.m as f64).sqrt();
    Ok(Outcome::new(
        kol.exponent <= -0.6,
        format!(
            "Kolmogorov exponent {:.3} ± {:.3} (target <= -0.6); values {} (null floor {floor:.1e}); smooth-W lower bound exponent {sw_text}",
            kol.exponent,
            kol.stderr,
            values.join(" ")
        ),
    ))
}

fn skew_drift() -> Result<Outcome> {
    let eps = EpsilonSpec::Power {
        k: 0.1,
        gamma: 1.0,
        k_left: None,
    };
    let norms = smoothed_indicator(0.0, 2.0)?.norms();
    let grid = dyadic(4, 16);
    let symmetric = make_attracted_law(0.7, 0.5, 0.0, eps.clone(), 2.0)?;
    let mut zero = true;
    for &n in &grid {
        zero &= bound_main(&norms, &symmetric, n, ConstantMode::Unit, &q())?.term(TERM_SKEW_DRIFT) == 0.0;
    }
    let skewed = make_attracted_law(0.7, 0.5, 0.8, eps, 2.0)?;
    let mut points = Vec::new();
    for &n in &grid {
        let r = bound_main(&norms, &skewed, n, ConstantMode::Unit, &q())?;
        points.push((n as f64, r.term(TERM_SKEW_DRIFT)));
    }
    let fit = fit_rate(&points, Abscissa::LogN)?;
    let target = -3.0 / 7.0;
    let close = (fit.exponent - target).abs() <= 0.05;
    Ok(Outcome::new(
        zero && close,
        format!(
            "beta=0 term identically zero: {zero}; beta=0.8 exponent {:.4} (target {target:.4} ± 0.05)",
            fit.exponent
        ),
    ))
}

fn gamma_levels() -> Result<Outcome> {
    let ns: Vec<usize> = (2..=6).map(|k| 10usize.pow(k)).collect();
    let mut worst_residual = 0.0f64;
    for alpha in [0.5, 1.0, 1.5] {
        for delta in [-1.0, 0.5, 1.0, 2.0] {
            for k0 in [0.5, 1.0] {
                for &n in &ns {
                    worst_residual = worst_residual.max(gamma_n(alpha, delta, k0, n)?.residual.abs());
                }
            }
        }
    }
    let mut worst_identity = 0.0f64;
    for alpha in [0.5, 1.0, 1.5] {
        for &n in &ns {
            let exact = (n as f64).powf(1.0 / alpha);
            let g = gamma_n(alpha, 0.0, 0.5, n)?.gamma;
            worst_identity = worst_identity.max((g - exact).abs() / exact);
        }
    }
    let plan = ExperimentPlan {
        law: LawSpec::Logtail {
            alpha: 1.5,
            delta: 1.0,
            k0: 0.5,
        },
        ..rate_plan(1.5, dyadic(4, 8), 2000, vec![DistanceKind::Kolmogorov], 10)
    };
    let run = run_rate_experiment(&plan, &q())?;
    if let Some(e) = run.error {
        return Err(e);
    }
    let fit = fit_table(
        &run.table,
        &DistanceKind::Kolmogorov.label(),
        Abscissa::LogLogN,
        plan.burn_in,
    )?;
    println!(
        "warning: log-rate fit over n = 16..256 spans log log n in [{:.2}, {:.2}] only; exponent {:.2} ± {:.2} is not conclusive",
        16f64.ln().ln(),
        256f64.ln().ln(),
        fit.exponent,
        fit.stderr
    );
    Ok(Outcome::new(
        worst_residual < 1e-10 && worst_identity < 1e-10,
        format!("max residual {worst_residual:.1e}, max relative deviation from n^(1/alpha) {worst_identity:.1e}"),
    ))
}

fn smoothing() -> Result<Outcome> {
    let mut sandwich = true;
    for (x, rho) in [(0.0, 2.0), (-1.5, 1.1), (3.0, 10.0)] {
        let f = smoothed_indicator(x, rho)?;
        let (lo, hi) = (x - 2.0, x + 1.0 / rho + 2.0);
        for k in 0..1000 {
            let y = lo + (hi - lo) * k as f64 / 999.0;
            let v = f.eval(y);
            let below = if y <= x { 1.0 } else { 0.0 };
            let above = if y <= x + 1.0 / rho { 1.0 } else { 0.0 };
            sandwich &= below <= v && v <= above;
        }
    }
    let mut worst = 0.0f64;
    for dw in [0.0, 1e-12, 1e-6, 0.01, 0.3, 1.0, 7.5] {
        for alpha in [0.5, 0.99, 1.0, 1.5] {
            let power = if alpha >= 1.0 { 0.25 } else { 1.0 / 3.0 };
            let expected = if dw == 0.0 { 0.0 } else { (power * f64::ln(dw)).exp() };
            let got = kol_from_smooth_w(dw, alpha)?;
            worst = worst.max((got - expected).abs() / expected.max(1.0));
        }
    }
    Ok(Outcome::new(
        sandwich && worst <= 1e-12,
        format!("sandwich holds: {sandwich}; arithmetic max deviation {worst:.1e}"),
    ))
}

fn determinism() -> Result<Outcome> {
    let plan = rate_plan(
        1.5,
        vec![8, 16, 32],
        40_000,
        vec![
            DistanceKind::Kolmogorov,
            DistanceKind::SmoothWasserstein { order: 1 },
            DistanceKind::Wasserstein1,
        ],
        12,
    );
    let dir = tempfile::tempdir()?;
    let mut outputs = Vec::new();
    for threads in [1, 4] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool");
        let run = pool.install(|| run_rate_experiment(&plan, &q()))?;
        if let Some(e) = run.error {
            return Err(e);
        }
        let path = emit_outputs(&run.table, OutputFormat::Csv, dir.path(), &format!("threads{threads}"))?;
        outputs.push(std::fs::read(path)?);
    }
    let same = outputs[0] == outputs[1];
    Ok(Outcome::new(
        same,
        format!(
            "CSV of {} bytes identical under 1 and 4 threads: {same}",
            outputs[0].len()
        ),
    ))
}
