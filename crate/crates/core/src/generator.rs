//! The nonlocal generator of a unit-scale stable process, its norm
//! constants, and checks of its translation, scaling and forward-equation
//! identities.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attraction::d_alpha;
use crate::error::{Error, Result};
use crate::mc::{McConfig, TermEstimate};
use crate::quad::{adaptive_split, gauss_legendre_on, panel_series, Estimate, QuadConfig};
use crate::rng::{derive_seed, stream};
use crate::smooth::{SmoothFn, TailBehavior};
use crate::stable::{StableParams, StableSampler};

/// Which operator to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorForm {
    /// The generator itself.
    #[default]
    Raw,
    /// For α < 1: the generator minus β·d_α·f′/(1 − α), i.e. the integral
    /// with the compensator y·1_{(−1,1)}(y).
    Shifted,
}

/// The generator of the unit-scale stable law with index α and skewness β.
#[derive(Debug, Clone, Copy)]
pub struct Generator {
    params: StableParams,
    d_alpha: f64,
    q: QuadConfig,
}

/// Below this multiple of the length scale the difference quotient is
/// replaced by its Taylor expansion.
const TAYLOR_ZONE: f64 = 2e-3;

impl Generator {
    pub fn new(p: &StableParams, q: &QuadConfig) -> Result<Self> {
        q.validate()?;
        if p.sigma() != 1.0 {
            return Err(Error::OutOfRange(format!(
                "the generator is defined for unit scale, got sigma = {}",
                p.sigma()
            )));
        }
        Ok(Self {
            params: *p,
            d_alpha: d_alpha(p.alpha(), q)?,
            q: *q,
        })
    }

    pub fn params(&self) -> &StableParams {
        &self.params
    }

    pub fn d_alpha(&self) -> f64 {
        self.d_alpha
    }

    pub fn config(&self) -> &QuadConfig {
        &self.q
    }

    /// Lf(x) (or the shifted operator) with an error estimate.
    pub fn apply_estimate(&self, f: &SmoothFn, x: f64, form: GeneratorForm) -> Result<Estimate> {
        let alpha = self.params.alpha();
        let beta = self.params.beta();
        if form == GeneratorForm::Shifted && alpha >= 1.0 {
            return Err(Error::UnsupportedForm(format!(
                "the shifted operator needs alpha < 1, got {alpha}"
            )));
        }
        if f.constant_value().is_some() {
            return Ok(Estimate::exact(0.0));
        }
        let d = self.d_alpha;
        let tol = self.q.tolerance / d;
        let r = match form {
            GeneratorForm::Shifted => 1.0,
            GeneratorForm::Raw => self.q.inner_radius,
        };
        let fx = f.eval(x);
        let f1 = f.d1(x);
        let mut total = Estimate::default();
        for s in [1.0, -1.0] {
            let w = 0.5 * (1.0 + s * beta);
            if w == 0.0 {
                continue;
            }
            let inner = self.inner(f, x, s, r, tol / 4.0);
            let outer = self.outer(f, x, s, r, tol / 4.0)?;
            total += (inner + outer + Estimate::exact(-fx * r.powf(-alpha) / alpha)) * w;
        }
        // The inner integral always carries the compensator s·y·f′(x) on (0, r);
        // these terms align it with the compensator of the requested operator.
        let correction = if form == GeneratorForm::Shifted {
            0.0
        } else if alpha > 1.0 {
            -f1 * beta * r.powf(1.0 - alpha) / (alpha - 1.0)
        } else if alpha == 1.0 {
            -f1 * beta * (1.0 / r).ln()
        } else {
            f1 * beta * r.powf(1.0 - alpha) / (1.0 - alpha)
        };
        total += Estimate::exact(correction);
        let out = total * d;
        if !out.value.is_finite() {
            return Err(Error::quad("generator integral", f64::INFINITY, self.q.tolerance));
        }
        if out.error > 100.0 * self.q.tolerance {
            return Err(Error::quad("generator integral", out.error, self.q.tolerance));
        }
        Ok(out)
    }

    pub fn apply(&self, f: &SmoothFn, x: f64, form: GeneratorForm) -> Result<f64> {
        self.apply_estimate(f, x, form).map(|e| e.value)
    }

    /// ∫₀^r [f(x+sy) − f(x) − s·y·f′(x)] y^{−1−α} dy with y = r·u^{1/(2−α)}.
    fn inner(&self, f: &SmoothFn, x: f64, s: f64, r: f64, tol: f64) -> Estimate {
        let alpha = self.params.alpha();
        let p = 1.0 / (2.0 - alpha);
        let fx = f.eval(x);
        let f1 = f.d1(x);
        let f2 = f.d2(x);
        let f3 = f.d3(x);
        let ell = f.length_scale();
        let h = 1e-4 * ell;
        let f4 = (f.d3(x + h) - f.d3(x - h)) / (2.0 * h);
        let y_taylor = TAYLOR_ZONE * ell;
        let g = |u: f64| {
            let y = r * u.powf(p);
            if y < y_taylor {
                0.5 * f2 + s * y * f3 / 6.0 + y * y * f4 / 24.0
            } else {
                (f.eval(x + s * y) - fx - s * y * f1) / (y * y)
            }
        };
        let to_u = |y: f64| (y / r).powf(2.0 - alpha);
        let mut pts = vec![0.0, 1.0];
        if y_taylor < r {
            pts.push(to_u(y_taylor));
        }
        for &b in f.breakpoints() {
            let y = s * (b - x);
            if y > 0.0 && y < r {
                pts.push(to_u(y));
            }
        }
        // Resolve oscillation or narrow features on the length scale.
        let pieces = ((r / ell).ceil() as usize).min(64);
        for k in 1..pieces {
            pts.push(to_u(r * k as f64 / pieces as f64));
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let factor = r.powf(2.0 - alpha) / (2.0 - alpha);
        adaptive_split(g, &pts, tol / factor, self.q.max_panels) * factor
    }

    /// ∫_r^∞ f(x+sy) y^{−1−α} dy.
    fn outer(&self, f: &SmoothFn, x: f64, s: f64, r: f64, tol: f64) -> Result<Estimate> {
        let alpha = self.params.alpha();
        let kernel = move |y: f64| y.powf(-1.0 - alpha);
        let mass = |u: f64, v: f64| {
            if v.is_infinite() {
                u.powf(-alpha) / alpha
            } else {
                (u.powf(-alpha) - v.powf(-alpha)) / alpha
            }
        };
        let ell = f.length_scale();
        match f.tail() {
            TailBehavior::Constant {
                left_end,
                left,
                right_start,
                right,
            } => {
                let mut cuts = vec![r];
                for c in [left_end, right_start].iter().chain(f.breakpoints()) {
                    let y = s * (c - x);
                    if y > r {
                        cuts.push(y);
                    }
                }
                cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
                cuts.dedup();
                cuts.push(f64::INFINITY);
                let mut total = Estimate::default();
                for w in cuts.windows(2) {
                    let (u, v) = (w[0], w[1]);
                    let z = if v.is_infinite() {
                        x + s * (u + 1.0)
                    } else {
                        x + s * 0.5 * (u + v)
                    };
                    if z <= left_end {
                        total += Estimate::exact(left * mass(u, v));
                    } else if z >= right_start {
                        total += Estimate::exact(right * mass(u, v));
                    } else {
                        let n = (((v - u) / (4.0 * ell)).ceil() as usize).clamp(1, self.q.max_panels);
                        let pts: Vec<f64> = (0..=n).map(|k| u + (v - u) * k as f64 / n as f64).collect();
                        total += adaptive_split(|y| f.eval(x + s * y) * kernel(y), &pts, tol / 2.0, self.q.max_panels);
                    }
                }
                Ok(total)
            }
            TailBehavior::Periodic { period, mean } => {
                let half = 0.5 * period;
                let sub = ((half / ell).ceil() as usize).clamp(1, 32);
                let panel = |k: usize| {
                    let a = r + half * k as f64;
                    let pts: Vec<f64> = (0..=sub).map(|j| a + half * j as f64 / sub as f64).collect();
                    adaptive_split(|y| (f.eval(x + s * y) - mean) * kernel(y), &pts, tol * 1e-2, 200)
                };
                let osc = panel_series(panel, tol, self.q.max_panels)
                    .ok_or_else(|| Error::quad("oscillatory generator tail", f64::INFINITY, self.q.tolerance))?;
                Ok(osc + Estimate::exact(mean * mass(r, f64::INFINITY)))
            }
            TailBehavior::Bounded => {
                let sup = f.norm(0)?;
                let mut cutoff = self.q.tail_cutoff.max(r);
                while sup * cutoff.powf(-alpha) / alpha >= tol {
                    cutoff *= 4.0;
                }
                let near = self.q.tail_cutoff.max(r);
                let n = (((near - r) / (2.0 * ell)).ceil() as usize).clamp(1, self.q.max_panels);
                let mut pts: Vec<f64> = (0..=n).map(|k| r + (near - r) * k as f64 / n as f64).collect();
                let mut y = near;
                while y < cutoff {
                    y = (y * std::f64::consts::E).min(cutoff);
                    pts.push(y);
                }
                let body = adaptive_split(|y| f.eval(x + s * y) * kernel(y), &pts, tol / 2.0, self.q.max_panels);
                Ok(body + Estimate::new(0.0, sup * cutoff.powf(-alpha) / alpha))
            }
        }
    }
}

/// Lf(x) for a unit-scale stable law; see [`Generator::apply`].
pub fn apply_generator(f: &SmoothFn, p: &StableParams, x: f64, q: &QuadConfig, form: GeneratorForm) -> Result<f64> {
    Generator::new(p, q)?.apply(f, x, form)
}

/// Lipschitz constant D and (for α ≤ 1) sup-norm bound D̂ of Lf.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConstants {
    pub lipschitz: f64,
    pub sup: Option<f64>,
}

/// D and D̂ from the sup-norms ‖f‖, ‖f′‖, ‖f″‖, ‖f‴‖ (entries may be absent
/// when not needed for the given α).
pub fn generator_constants(norms: &[Option<f64>; 4], alpha: f64) -> Result<GeneratorConstants> {
    let d = d_alpha(alpha, &QuadConfig::default())?;
    generator_constants_with(norms, alpha, d)
}

/// As [`generator_constants`] with a precomputed d_α.
pub fn generator_constants_with(norms: &[Option<f64>; 4], alpha: f64, d: f64) -> Result<GeneratorConstants> {
    let n = |j: usize| norms[j].ok_or(Error::MissingNorm(j));
    if alpha > 1.0 {
        Ok(GeneratorConstants {
            lipschitz: 2.0 * d * n(2)? / (alpha - 1.0) + d * n(3)? / (2.0 * (2.0 - alpha)),
            sup: None,
        })
    } else if alpha == 1.0 {
        Ok(GeneratorConstants {
            lipschitz: 2.0 * d * n(1)? + 0.5 * d * n(3)?,
            sup: Some(2.0 * d * n(0)? + 0.5 * d * n(2)?),
        })
    } else {
        Ok(GeneratorConstants {
            lipschitz: 2.0 / alpha * d * n(1)? + d * n(2)? / (1.0 - alpha),
            sup: Some(2.0 * d / alpha * n(0)? + d * n(1)? / (1.0 - alpha)),
        })
    }
}

/// Residuals of the translation and scaling identities
/// L[f(· − y)](x) = Lf(x − y) and L[f(c ·)](x) = c^α Lf(cx).
pub fn identity_residuals(
    f: &SmoothFn,
    p: &StableParams,
    x: f64,
    y_shift: f64,
    c_scale: f64,
    q: &QuadConfig,
) -> Result<(f64, f64)> {
    if !(c_scale > 0.0) {
        return Err(Error::OutOfRange(format!(
            "scale factor must be positive, got {c_scale}"
        )));
    }
    let g = Generator::new(p, q)?;
    let raw = GeneratorForm::Raw;
    let shifted = f.translated(y_shift);
    let translation = (g.apply(&shifted, x, raw)? - g.apply(f, x - y_shift, raw)?).abs();
    let dilated = f.dilated(c_scale)?;
    let scaling = (g.apply(&dilated, x, raw)? - c_scale.powf(p.alpha()) * g.apply(f, c_scale * x, raw)?).abs();
    Ok((translation, scaling))
}

#[derive(Debug, Clone)]
enum Grid {
    /// Nodes k·period/N, k = 0..N, wrapped.
    Periodic { period: f64 },
    /// Nodes center + scale·sinh(u_min + k·h).
    Sinh {
        center: f64,
        scale: f64,
        u_min: f64,
        h: f64,
    },
}

/// Tabulated Lf with four-point Lagrange interpolation; points off the table
/// are evaluated directly.
#[derive(Clone)]
pub struct GeneratorTable {
    generator: Generator,
    f: SmoothFn,
    form: GeneratorForm,
    grid: Grid,
    values: Arc<Vec<f64>>,
    interpolation_error: f64,
}

impl std::fmt::Debug for GeneratorTable {
    fn fmt(&self, fmt: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fmt.debug_struct("GeneratorTable")
            .field("f", &self.f.name())
            .field("grid", &self.grid)
            .field("nodes", &self.values.len())
            .field("interpolation_error", &self.interpolation_error)
            .finish()
    }
}

const PERIODIC_NODES: usize = 1024;
const SINH_STEP: f64 = 0.01;
const SINH_REACH: f64 = 1e9;

fn lagrange4(v: [f64; 4], t: f64) -> f64 {
    let a = -t * (t - 1.0) * (t - 2.0) / 6.0;
    let b = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    let c = -(t + 1.0) * t * (t - 2.0) / 2.0;
    let d = (t + 1.0) * t * (t - 1.0) / 6.0;
    a * v[0] + b * v[1] + c * v[2] + d * v[3]
}

impl GeneratorTable {
    /// Tabulates Lf in parallel and measures the interpolation error at
    /// cell midpoints against direct evaluation.
    pub fn build(generator: &Generator, f: &SmoothFn, form: GeneratorForm) -> Result<Self> {
        let grid = match f.tail() {
            TailBehavior::Periodic { period, .. } => Grid::Periodic { period },
            TailBehavior::Constant {
                left_end, right_start, ..
            } => {
                let center = 0.5 * (left_end + right_start);
                let scale = f.length_scale().max(0.5 * (right_start - left_end)).clamp(1e-6, 1.0);
                let reach = (SINH_REACH / scale).asinh();
                Grid::Sinh {
                    center,
                    scale,
                    u_min: -reach,
                    h: SINH_STEP,
                }
            }
            TailBehavior::Bounded => {
                let bp = f.breakpoints();
                let center = if bp.is_empty() {
                    0.0
                } else {
                    0.5 * (bp[0] + bp[bp.len() - 1])
                };
                let scale = f.length_scale().min(1.0);
                let reach = (1e6 / scale).asinh();
                Grid::Sinh {
                    center,
                    scale,
                    u_min: -reach,
                    h: SINH_STEP,
                }
            }
        };
        let nodes: Vec<f64> = match &grid {
            Grid::Periodic { period } => (0..PERIODIC_NODES)
                .map(|k| period * k as f64 / PERIODIC_NODES as f64)
                .collect(),
            Grid::Sinh {
                center,
                scale,
                u_min,
                h,
            } => {
                let count = (2.0 * -u_min / h).round() as usize + 1;
                (0..count)
                    .map(|k| center + scale * (u_min + h * k as f64).sinh())
                    .collect()
            }
        };
        let values = nodes
            .par_iter()
            .map(|&x| generator.apply(f, x, form))
            .collect::<Result<Vec<f64>>>()?;
        let mut table = Self {
            generator: *generator,
            f: f.clone(),
            form,
            grid,
            values: Arc::new(values),
            interpolation_error: 0.0,
        };
        let n = nodes.len();
        let stride = (n / 128).max(1);
        let probes: Vec<f64> = (1..n.saturating_sub(2))
            .step_by(stride)
            .map(|k| match table.grid {
                Grid::Periodic { period } => period * (k as f64 + 0.5) / PERIODIC_NODES as f64,
                Grid::Sinh {
                    center,
                    scale,
                    u_min,
                    h,
                } => center + scale * (u_min + h * (k as f64 + 0.5)).sinh(),
            })
            .collect();
        let errs = probes
            .par_iter()
            .map(|&x| Ok((table.eval(x)? - generator.apply(f, x, form)?).abs()))
            .collect::<Result<Vec<f64>>>()?;
        table.interpolation_error = errs.into_iter().fold(0.0, f64::max);
        Ok(table)
    }

    /// Largest observed |interpolated − direct| at cell midpoints.
    pub fn interpolation_error(&self) -> f64 {
        self.interpolation_error
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let v = &self.values;
        match self.grid {
            Grid::Periodic { period } => {
                let n = v.len();
                let pos = (x / period).rem_euclid(1.0) * n as f64;
                let i = (pos.floor() as usize).min(n - 1);
                let t = pos - i as f64;
                let at = |k: isize| v[(i as isize + k).rem_euclid(n as isize) as usize];
                Ok(lagrange4([at(-1), at(0), at(1), at(2)], t))
            }
            Grid::Sinh {
                center,
                scale,
                u_min,
                h,
            } => {
                let pos = (((x - center) / scale).asinh() - u_min) / h;
                if !(pos >= 1.0 && pos < (v.len() - 2) as f64) {
                    return self.generator.apply(&self.f, x, self.form);
                }
                let i = pos.floor() as usize;
                let t = pos - i as f64;
                Ok(lagrange4([v[i - 1], v[i], v[i + 1], v[i + 2]], t))
            }
        }
    }
}

/// Monte Carlo residual of the forward equation
/// E f(x + Ŷ_t) − f(x) − ∫₀ᵗ E[Lf(x + Ŷ_s)] ds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardResidual {
    pub residual: f64,
    pub stderr: f64,
    /// Interpolation error of the tabulated Lf, a bias not reflected in `stderr`.
    pub table_error: f64,
}

const TIME_NODES: usize = 16;

pub fn forward_equation_residual(
    f: &SmoothFn,
    p: &StableParams,
    x: f64,
    t: f64,
    mc: &McConfig,
    q: &QuadConfig,
) -> Result<ForwardResidual> {
    mc.require_at_least(1000)?;
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::OutOfRange(format!("time must lie in (0, 1], got {t}")));
    }
    if f.constant_value().is_some() {
        return Ok(ForwardResidual {
            residual: 0.0,
            stderr: 0.0,
            table_error: 0.0,
        });
    }
    let g = Generator::new(p, q)?;
    let table = GeneratorTable::build(&g, f, GeneratorForm::Raw)?;
    let alpha = p.alpha();
    let (nodes, weights) = gauss_legendre_on(TIME_NODES, 0.0, t);
    let scales: Vec<f64> = nodes.iter().map(|s| s.powf(1.0 / alpha)).collect();
    let t_scale = t.powf(1.0 / alpha);
    let fx = f.eval(x);
    let sampler = StableSampler::new(p);
    let per_path: Vec<f64> = (0..mc.paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(derive_seed(mc.seed, &[i as u64]));
            let y = sampler.draw(&mut rng);
            let mut integral = 0.0;
            for (sc, w) in scales.iter().zip(&weights) {
                integral += w * table.eval(x + sc * y)?;
            }
            Ok(f.eval(x + t_scale * y) - fx - integral)
        })
        .collect::<Result<Vec<f64>>>()?;
    let est = TermEstimate::from_samples(&per_path);
    Ok(ForwardResidual {
        residual: est.value,
        stderr: est.stderr,
        table_error: table.interpolation_error() * t,
    })
}

/// Lf(x) by direct quadrature without a table, for spot checks.
pub fn generator_at(f: &SmoothFn, g: &Generator, x: f64) -> Result<f64> {
    g.apply(f, x, GeneratorForm::Raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn symbol(p: &StableParams, lambda: f64, phase: f64, x: f64) -> f64 {
        let psi = p.char_exponent(lambda);
        let e = num_complex::Complex64::from_polar(1.0, lambda * x + phase);
        (-psi * e).re
    }

    #[test]
    fn cosine_matches_symbol() {
        let q = QuadConfig::default();
        for &(alpha, beta) in &[
            (0.5, -0.5),
            (0.5, 0.9),
            (1.0, 0.0),
            (1.5, 0.9),
            (1.5, -0.5),
            (0.3, 0.0),
            (1.9, 0.5),
        ] {
            let p = StableParams::standard(alpha, beta).unwrap();
            let g = Generator::new(&p, &q).unwrap();
            for &lambda in &[0.5, 1.0, 2.0] {
                for &phase in &[0.0, PI / 3.0] {
                    let f = SmoothFn::cosine(lambda, phase, 1.0).unwrap();
                    for &x in &[0.0, 0.7, -2.3] {
                        let got = g.apply(&f, x, GeneratorForm::Raw).unwrap();
                        let want = symbol(&p, lambda, phase, x);
                        assert!(
                            (got - want).abs() < 1e-8,
                            "a={alpha} b={beta} l={lambda} x={x}: {got} vs {want}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn cos_at_origin_cauchy() {
        let p = StableParams::standard(1.0, 0.0).unwrap();
        let f = SmoothFn::cosine(1.0, 0.0, 1.0).unwrap();
        let v = apply_generator(&f, &p, 0.0, &QuadConfig::default(), GeneratorForm::Raw).unwrap();
        assert!((v + 1.0).abs() < 1e-8);
    }

    #[test]
    fn constant_is_annihilated() {
        let p = StableParams::standard(0.7, 0.3).unwrap();
        let v = apply_generator(
            &SmoothFn::constant(3.0),
            &p,
            1.0,
            &QuadConfig::default(),
            GeneratorForm::Raw,
        )
        .unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn step_uses_cosine_superposition_oracle() {
        // A smooth step is not a trigonometric function, so compare against the
        // tail-agnostic bounded-tail route on the same function.
        let q = QuadConfig::default();
        let f = SmoothFn::smoothed_indicator(0.0, 2.0).unwrap();
        let zero = SmoothFn::gaussian_bump(1e6, 1.0).unwrap();
        let generic = SmoothFn::combination(&[(1.0, f.clone()), (0.0, zero)]).unwrap();
        assert!(matches!(generic.tail(), TailBehavior::Bounded));
        for &(alpha, beta) in &[(0.5, 0.4), (1.0, 0.0), (1.5, -0.7)] {
            let p = StableParams::standard(alpha, beta).unwrap();
            let g = Generator::new(&p, &q).unwrap();
            for &x in &[-1.0, 0.2, 0.4, 3.0] {
                let a = g.apply(&f, x, GeneratorForm::Raw).unwrap();
                let b = g.apply(&generic, x, GeneratorForm::Raw).unwrap();
                assert!((a - b).abs() < 1e-8, "alpha={alpha} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn shifted_form_consistency() {
        let q = QuadConfig::default();
        let p = StableParams::standard(0.6, 0.8).unwrap();
        let g = Generator::new(&p, &q).unwrap();
        let f = SmoothFn::gaussian_bump(0.3, 0.8).unwrap();
        for &x in &[-0.5, 0.3, 1.7] {
            let raw = g.apply(&f, x, GeneratorForm::Raw).unwrap();
            let sh = g.apply(&f, x, GeneratorForm::Shifted).unwrap();
            let want = raw - 0.8 * g.d_alpha() * f.d1(x) / 0.4;
            assert!((sh - want).abs() < 1e-8);
        }
        let p = StableParams::standard(1.2, 0.0).unwrap();
        assert!(matches!(
            apply_generator(&f, &p, 0.0, &q, GeneratorForm::Shifted),
            Err(Error::UnsupportedForm(_))
        ));
    }

    #[test]
    fn constants_examples() {
        let d = d_alpha(1.5, &QuadConfig::default()).unwrap();
        let c = generator_constants(&[None, None, Some(1.0), Some(1.0)], 1.5).unwrap();
        assert!((c.lipschitz - 5.0 * d).abs() < 1e-12);
        assert!(c.sup.is_none());
        let d = d_alpha(0.5, &QuadConfig::default()).unwrap();
        let c = generator_constants(&[Some(1.0), Some(1.0), Some(0.0), None], 0.5).unwrap();
        assert!((c.sup.unwrap() - 6.0 * d).abs() < 1e-12);
        let z = generator_constants(&[Some(0.0); 4], 1.0).unwrap();
        assert_eq!((z.lipschitz, z.sup), (0.0, Some(0.0)));
        assert!(matches!(
            generator_constants(&[Some(1.0), None, Some(1.0), Some(1.0)], 0.5),
            Err(Error::MissingNorm(1))
        ));
    }

    #[test]
    fn identities() {
        let q = QuadConfig::default();
        let p = StableParams::standard(1.0, 0.0).unwrap();
        let f = SmoothFn::cosine(1.0, 0.0, 1.0).unwrap();
        let (t, s) = identity_residuals(&f, &p, 0.0, 0.0, 2.0, &q).unwrap();
        assert!(t < 1e-8 && s < 1e-8);
        let bump = SmoothFn::gaussian_bump(0.2, 0.7).unwrap();
        let p = StableParams::standard(1.4, 0.6).unwrap();
        let (t, s) = identity_residuals(&bump, &p, 0.5, 1.3, 1.7, &q).unwrap();
        assert!(t < 1e-8 && s < 1e-8, "{t} {s}");
    }

    #[test]
    fn table_interpolates() {
        let q = QuadConfig::default();
        let p = StableParams::standard(0.5, 0.3).unwrap();
        let g = Generator::new(&p, &q).unwrap();
        let f = SmoothFn::smoothed_indicator(0.0, 2.0).unwrap();
        let t = GeneratorTable::build(&g, &f, GeneratorForm::Raw).unwrap();
        assert!(t.interpolation_error() < 1e-7, "{}", t.interpolation_error());
        for &x in &[-3.3, 0.11, 0.37, 12.0, 1e10] {
            let a = t.eval(x).unwrap();
            let b = g.apply(&f, x, GeneratorForm::Raw).unwrap();
            assert!((a - b).abs() < 1e-7, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn forward_equation_small_budget() {
        let q = QuadConfig::default();
        let f = SmoothFn::cosine(1.0, 0.0, 1.0).unwrap();
        for &alpha in &[0.5, 1.5] {
            let p = StableParams::standard(alpha, 0.0).unwrap();
            let r = forward_equation_residual(&f, &p, 0.0, 1.0, &McConfig::new(20_000, 7), &q).unwrap();
            assert!(r.residual.abs() < 3.0 * r.stderr + 1e-6, "{r:?}");
            assert!(r.table_error < 1e-6);
            let tiny = forward_equation_residual(&f, &p, 0.0, 1e-6, &McConfig::new(1000, 7), &q).unwrap();
            assert!(tiny.residual.abs() < 1e-4);
        }
        let p = StableParams::standard(1.5, 0.3).unwrap();
        let c = forward_equation_residual(&SmoothFn::constant(2.0), &p, 0.0, 1.0, &McConfig::new(1000, 1), &q).unwrap();
        assert_eq!(c.residual, 0.0);
    }
}
