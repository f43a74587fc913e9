//! Rate experiments: distances of S_n to its stable limit over a grid of n,
//! log-log rate fits and CSV/JSON/SVG output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attraction::{build_sn, Distribution, Law, LawSpec};
use crate::bounds::{bound_improved, bound_main, ConstantMode};
use crate::distances::{
    ks_statistic, smooth_wasserstein_lb_from, target_expectations, wasserstein1_empirical, CdfTable, Target,
    TestDictionary,
};
use crate::error::{Error, Result};
use crate::quad::QuadConfig;
use crate::rng::{derive_seed, tag};
use crate::smooth::SmoothFnSpec;
use crate::stable::{sample_stable, StableParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistanceKind {
    Kolmogorov,
    /// Lower bound on the smooth Wasserstein distance of the given order.
    SmoothWasserstein {
        order: usize,
    },
    /// W₁ against an equally sized stable sample.
    Wasserstein1,
}

impl DistanceKind {
    pub fn label(&self) -> String {
        match self {
            DistanceKind::Kolmogorov => "kolmogorov".into(),
            DistanceKind::SmoothWasserstein { order } => format!("smooth_w{order}"),
            DistanceKind::Wasserstein1 => "wasserstein1".into(),
        }
    }

    fn code(&self) -> u64 {
        match self {
            DistanceKind::Kolmogorov => 1,
            DistanceKind::SmoothWasserstein { order } => 10 + *order as u64,
            DistanceKind::Wasserstein1 => 2,
        }
    }
}

pub const BOUND_MAIN_LABEL: &str = "bound_main";
pub const BOUND_IMPROVED_LABEL: &str = "bound_improved";
pub const FAILED_LABEL: &str = "FAILED";

fn default_burn_in() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub law: LawSpec,
    /// Target law; defaults to the law's stable limit.
    #[serde(default)]
    pub stable: Option<StableParams>,
    pub n_grid: Vec<usize>,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(default)]
    pub distances: Vec<DistanceKind>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Grid points dropped from the front before fitting.
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    /// Reuse one base stream for every n instead of independent rows.
    #[serde(default)]
    pub common_random_numbers: bool,
    #[serde(default)]
    pub bound_mode: ConstantMode,
    /// Test function whose norms feed the explicit bound mode.
    #[serde(default)]
    pub test_function: Option<SmoothFnSpec>,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::InvalidConfig("n_grid is empty".into()));
        }
        if self.n_grid[0] == 0 || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "n_grid must be positive and strictly increasing".into(),
            ));
        }
        if self.m < 1000 {
            return Err(Error::InvalidConfig(format!("M must be at least 1000, got {}", self.m)));
        }
        if self.bound_mode == ConstantMode::Explicit && self.test_function.is_none() {
            return Err(Error::InvalidConfig("explicit bounds need a test_function".into()));
        }
        Ok(())
    }
}

/// One output row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub law: String,
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub distance_kind: String,
    pub value: Option<f64>,
    pub stderr: Option<f64>,
    pub bound_total: Option<f64>,
    pub seed: u64,
}

/// Run metadata written next to the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub plan: ExperimentPlan,
    pub common_random_numbers: bool,
    /// Largest certified interpolation error of the distribution-function
    /// table used for Kolmogorov distances.
    pub cdf_table_error: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
    pub meta: RunMeta,
}

impl ResultsTable {
    /// (n, value) pairs of one distance kind.
    pub fn series(&self, kind: &str) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.distance_kind == kind)
            .filter_map(|r| r.value.map(|v| (r.n as f64, v)))
            .collect()
    }

    /// (n, bound_total) pairs, one per n.
    pub fn bound_series(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for r in &self.rows {
            if let Some(b) = r.bound_total {
                if out.last().map(|&(n, _)| n) != Some(r.n as f64) {
                    out.push((r.n as f64, b));
                }
            }
        }
        out
    }

    pub fn kinds(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.distance_kind) {
                out.push(r.distance_kind.clone());
            }
        }
        out
    }
}

/// A finished or partially finished run. `error` is set when a cell failed;
/// the table then ends with a failure marker row.
#[derive(Debug)]
pub struct ExperimentRun {
    pub table: ResultsTable,
    pub error: Option<Error>,
}

struct Context {
    law: Law,
    target: StableParams,
    table: Option<CdfTable>,
    /// Dictionaries by order, with the target expectation of each member.
    dictionaries: Vec<(usize, TestDictionary, Vec<f64>)>,
}

/// Runs every (n, distance) cell of the plan. Seeds are derived from the
/// master seed, the law id and n, so the output does not depend on the
/// number of worker threads.
pub fn run_rate_experiment(plan: &ExperimentPlan, q: &QuadConfig) -> Result<ExperimentRun> {
    plan.validate()?;
    let law = Law::from_spec(&plan.law, q)?;
    let target = match plan.stable {
        Some(p) => p,
        None => law.limit(),
    };
    let mut warnings = Vec::new();
    if plan.n_grid.len() < plan.burn_in + 3 {
        warnings.push(format!(
            "only {} grid points remain after burn-in; rate fits need 3",
            plan.n_grid.len().saturating_sub(plan.burn_in)
        ));
    }
    let table = if plan.distances.contains(&DistanceKind::Kolmogorov) {
        Some(CdfTable::build(&target, q)?)
    } else {
        None
    };
    let mut dictionaries = Vec::new();
    for d in &plan.distances {
        if let DistanceKind::SmoothWasserstein { order } = d {
            if !dictionaries.iter().any(|(o, _, _)| o == order) {
                let dict = TestDictionary::standard(*order)?;
                let expected = target_expectations(&dict, Target::Stable(&target), q)?;
                dictionaries.push((*order, dict, expected));
            }
        }
    }
    let ctx = Context {
        law,
        target,
        table,
        dictionaries,
    };
    let mut out = ResultsTable {
        rows: Vec::new(),
        meta: RunMeta {
            plan: plan.clone(),
            common_random_numbers: plan.common_random_numbers,
            cdf_table_error: ctx.table.as_ref().map(|t| t.certified_error()),
            warnings,
        },
    };
    let law_id = ctx.law.id();
    for &n in &plan.n_grid {
        if let Err(e) = run_cell(plan, &ctx, n, q, &mut out.rows) {
            out.rows.push(ResultRow {
                law: law_id.clone(),
                alpha: ctx.law.alpha(),
                beta: ctx.law.beta(),
                n,
                m: plan.m,
                distance_kind: FAILED_LABEL.into(),
                value: None,
                stderr: None,
                bound_total: None,
                seed: plan.master_seed,
            });
            return Ok(ExperimentRun {
                table: out,
                error: Some(e),
            });
        }
    }
    Ok(ExperimentRun {
        table: out,
        error: None,
    })
}

fn run_cell(plan: &ExperimentPlan, ctx: &Context, n: usize, q: &QuadConfig, rows: &mut Vec<ResultRow>) -> Result<()> {
    let law_id = ctx.law.id();
    let row_key = if plan.common_random_numbers { 0 } else { n as u64 };
    let seed = derive_seed(plan.master_seed, &[tag(&law_id), row_key]);
    let norms = match &plan.test_function {
        Some(s) => s.build()?.norms(),
        None => [None; 4],
    };
    let (main, improved) = match ctx.law.as_attracted() {
        Some(l) if n >= 2 => {
            let main = bound_main(&norms, l, n, plan.bound_mode, q).ok().map(|r| r.total);
            let improved = if l.alpha() <= 1.0 {
                bound_improved(&norms, l, n, plan.bound_mode, q).ok().map(|r| r.total)
            } else {
                None
            };
            (main, improved)
        }
        _ => (None, None),
    };
    let row = |kind: String, value: f64, stderr: f64, s: u64| ResultRow {
        law: law_id.clone(),
        alpha: ctx.law.alpha(),
        beta: ctx.law.beta(),
        n,
        m: plan.m,
        distance_kind: kind,
        value: Some(value),
        stderr: Some(stderr),
        bound_total: main,
        seed: s,
    };
    if plan.distances.is_empty() {
        if let Some(b) = main {
            rows.push(row(BOUND_MAIN_LABEL.into(), b, 0.0, seed));
        }
        if let Some(b) = improved {
            rows.push(row(BOUND_IMPROVED_LABEL.into(), b, 0.0, seed));
        }
        return Ok(());
    }
    let batch = build_sn(&ctx.law, n, plan.m, seed, q)?.into_batch(&law_id)?;
    for kind in &plan.distances {
        let (value, stderr) = match kind {
            DistanceKind::Kolmogorov => {
                let table = ctx.table.as_ref().expect("built when requested");
                let ks = ks_statistic(&batch.values, |x| table.eval(x))?;
                (ks.value, ks.stderr(batch.len()))
            }
            DistanceKind::SmoothWasserstein { order } => {
                let (_, dict, expected) = ctx
                    .dictionaries
                    .iter()
                    .find(|(o, _, _)| o == order)
                    .expect("built when requested");
                let r = smooth_wasserstein_lb_from(&batch, expected, dict)?;
                let h = &dict.members()[r.member];
                let vals: Vec<f64> = batch.values.iter().map(|&x| h.eval(x)).collect();
                (r.value, crate::mc::TermEstimate::from_samples(&vals).stderr)
            }
            DistanceKind::Wasserstein1 => {
                let reference = sample_stable(&ctx.target, plan.m, derive_seed(seed, &[kind.code()]))?;
                let w = wasserstein1_empirical(&batch, &reference)?;
                let mut a = batch.values.clone();
                let mut b = reference.values.clone();
                a.sort_by(|x, y| x.total_cmp(y));
                b.sort_by(|x, y| x.total_cmp(y));
                let gaps: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).collect();
                (w, crate::mc::TermEstimate::from_samples(&gaps).stderr)
            }
        };
        rows.push(row(kind.label(), value, stderr, seed));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Abscissa {
    #[default]
    LogN,
    LogLogN,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub exponent: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub r2: f64,
    pub abscissa: Abscissa,
    pub points: usize,
}

/// Least squares of log(value) on log n or log log n.
pub fn fit_rate(points: &[(f64, f64)], abscissa: Abscissa) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "need at least 3 rows, got {}",
            points.len()
        )));
    }
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for &(n, v) in points {
        if !(v > 0.0) {
            return Err(Error::DegenerateFit(format!("nonpositive value {v} at n = {n}")));
        }
        let x = match abscissa {
            Abscissa::LogN => n.ln(),
            Abscissa::LogLogN => n.ln().ln(),
        };
        if !x.is_finite() {
            return Err(Error::DegenerateFit(format!("abscissa undefined at n = {n}")));
        }
        xs.push(x);
        ys.push(v.ln());
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit("abscissa has zero variance".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let stderr = if points.len() > 2 {
        (ss_res / (k - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(RateFit {
        exponent: slope,
        intercept,
        stderr,
        r2,
        abscissa,
        points: points.len(),
    })
}

/// Fit of one distance column after dropping `burn_in` grid points.
pub fn fit_table(table: &ResultsTable, kind: &str, abscissa: Abscissa, burn_in: usize) -> Result<RateFit> {
    let series = table.series(kind);
    fit_rate(series.get(burn_in..).unwrap_or(&[]), abscissa)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    Svg,
}

impl OutputFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
            OutputFormat::Svg => "svg",
        }
    }
}

/// Writes `results` to `dir/<stem>.<ext>` and returns the path.
pub fn emit_outputs(results: &ResultsTable, format: OutputFormat, dir: &Path, stem: &str) -> Result<PathBuf> {
    if results.rows.is_empty() {
        return Err(Error::OutOfRange("no result rows to write".into()));
    }
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{stem}.{}", format.extension()));
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_path(&path)?;
            for r in &results.rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        OutputFormat::Json => fs::write(&path, serde_json::to_string_pretty(&results.rows)? + "\n")?,
        OutputFormat::Svg => fs::write(&path, render_svg(results, stem))?,
    }
    Ok(path)
}

/// Reads a table written as CSV.
pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Log-log scatter of every distance series with its fitted line, plus the
/// bound curve, each drawn as one polyline.
pub fn render_svg(results: &ResultsTable, title: &str) -> String {
    let (w, h, pad) = (640.0, 420.0, 56.0);
    let mut series: Vec<(String, Vec<(f64, f64)>)> = results
        .kinds()
        .into_iter()
        .filter(|k| k != FAILED_LABEL)
        .map(|k| {
            let s = results.series(&k);
            (k, s)
        })
        .collect();
    let bound = results.bound_series();
    let has_distance = series
        .iter()
        .any(|(k, _)| k != BOUND_MAIN_LABEL && k != BOUND_IMPROVED_LABEL);
    if !bound.is_empty() && has_distance {
        series.push(("bound".into(), bound));
    }
    let logs: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|(_, s)| s.iter())
        .filter(|&&(x, y)| x > 0.0 && y > 0.0)
        .map(|&(x, y)| (x.log10(), y.log10()))
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &logs {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if logs.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-9 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-9 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let py = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{pad} {pad} V{} H{}" fill="none" stroke="black"/>"#,
        h - pad,
        w - pad
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">log10 n</text>"#,
        w / 2.0,
        h - 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-size="12" transform="rotate(-90 16 {})" text-anchor="middle">log10 value</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let valid: Vec<(f64, f64)> = pts
            .iter()
            .filter(|&&(x, y)| x > 0.0 && y > 0.0)
            .map(|&(x, y)| (x.log10(), y.log10()))
            .collect();
        let coords: Vec<String> = valid
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let dash = if name == "bound" {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        let _ = writeln!(
            s,
            r#"<polyline class="series" data-name="{}" points="{}" fill="none" stroke="{color}"{dash}/>"#,
            escape(name),
            coords.join(" ")
        );
        for &(x, y) in &valid {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                px(x),
                py(y)
            );
        }
        if name != "bound" {
            if let Ok(fit) = fit_rate(pts, Abscissa::LogN) {
                let (a, b) = (x0, x1);
                let line =
                    |lx: f64| (fit.intercept + fit.exponent * lx * std::f64::consts::LN_10) / std::f64::consts::LN_10;
                let _ = writeln!(
                    s,
                    r#"<line class="fit" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="0.8"/>"#,
                    px(a),
                    py(line(a)),
                    px(b),
                    py(line(b))
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
            w - pad - 120.0,
            pad + 14.0 * i as f64,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_fit() {
        let pts: Vec<(f64, f64)> = [8.0, 16.0, 64.0, 512.0, 4096.0]
            .iter()
            .map(|&n: &f64| (n, n.powf(-1.0 / 3.0)))
            .collect();
        let f = fit_rate(&pts, Abscissa::LogN).unwrap();
        assert!((f.exponent + 1.0 / 3.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        let pts: Vec<(f64, f64)> = [10.0, 100.0, 1e4, 1e6]
            .iter()
            .map(|&n: &f64| (n, n.ln().powf(-0.5)))
            .collect();
        let f = fit_rate(&pts, Abscissa::LogLogN).unwrap();
        assert!((f.exponent + 0.5).abs() < 1e-12);
        assert!(matches!(
            fit_rate(&pts[..2], Abscissa::LogN),
            Err(Error::DegenerateFit(_))
        ));
        assert!(matches!(
            fit_rate(&[(4.0, 1.0); 3], Abscissa::LogN),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn plan_validation() {
        let mut plan = ExperimentPlan {
            law: LawSpec::Pareto { alpha: 1.5 },
            stable: None,
            n_grid: vec![4, 8],
            m: 1000,
            distances: vec![],
            master_seed: 1,
            out_dir: None,
            burn_in: 1,
            common_random_numbers: false,
            bound_mode: ConstantMode::Unit,
            test_function: None,
        };
        assert!(plan.validate().is_ok());
        plan.n_grid = vec![8, 8];
        assert!(plan.validate().is_err());
        plan.n_grid = vec![8];
        plan.m = 999;
        assert!(plan.validate().is_err());
    }

    #[test]
    fn bound_only_rows() {
        let plan = ExperimentPlan {
            law: LawSpec::Pareto { alpha: 0.5 },
            stable: None,
            n_grid: vec![4, 8],
            m: 1000,
            distances: vec![],
            master_seed: 1,
            out_dir: None,
            burn_in: 1,
            common_random_numbers: false,
            bound_mode: ConstantMode::Unit,
            test_function: None,
        };
        let run = run_rate_experiment(&plan, &QuadConfig::default()).unwrap();
        assert!(run.error.is_none());
        let kinds = run.table.kinds();
        assert_eq!(
            kinds,
            vec![BOUND_MAIN_LABEL.to_string(), BOUND_IMPROVED_LABEL.to_string()]
        );
        assert!(run.table.rows.iter().all(|r| r.bound_total.is_some()));
    }
}
