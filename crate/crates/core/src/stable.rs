//! Stable laws S_α(σ, β): characteristic exponent, exact sampling, and
//! density / distribution function by Fourier inversion.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{adaptive, adaptive_split, panel_series, Estimate, QuadConfig};
use crate::rng::{exp1, fill_blocks, open01};

/// Carrier for ψ(λ) and related complex quantities.
pub type ComplexValue = Complex64;

/// Stability index, skewness and scale of a stable law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StableParams {
    alpha: f64,
    beta: f64,
    sigma: f64,
}

#[derive(Deserialize)]
struct RawStableParams {
    alpha: f64,
    #[serde(default)]
    beta: f64,
    #[serde(default = "one")]
    sigma: f64,
}

fn one() -> f64 {
    1.0
}

impl<'de> Deserialize<'de> for StableParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawStableParams::deserialize(d)?;
        StableParams::new(raw.alpha, raw.beta, raw.sigma).map_err(serde::de::Error::custom)
    }
}

impl StableParams {
    /// Validates and builds a parameter triple.
    pub fn new(alpha: f64, beta: f64, sigma: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::OutOfRange(format!("alpha must lie in (0, 2), got {alpha}")));
        }
        if !(-1.0..=1.0).contains(&beta) {
            return Err(Error::OutOfRange(format!("beta must lie in [-1, 1], got {beta}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::OutOfRange(format!("sigma must be positive, got {sigma}")));
        }
        if alpha == 1.0 && beta != 0.0 {
            return Err(Error::SingularCase { beta });
        }
        Ok(Self { alpha, beta, sigma })
    }

    /// Unit-scale law with the given index and skewness.
    pub fn standard(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(alpha, beta, 1.0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::new(self.alpha, self.beta, sigma)
    }

    /// β·tan(πα/2), zero at α = 1.
    pub fn skew_term(&self) -> f64 {
        if self.alpha == 1.0 {
            0.0
        } else {
            self.beta * (FRAC_PI_2 * self.alpha).tan()
        }
    }

    /// ψ(λ) with E[exp(iλY)] = exp(−ψ(λ)).
    pub fn char_exponent(&self, lambda: f64) -> ComplexValue {
        let m = (self.sigma * lambda).abs().powf(self.alpha);
        if self.alpha == 1.0 {
            return Complex64::new((self.sigma * lambda).abs(), 0.0);
        }
        let s = if lambda > 0.0 {
            1.0
        } else if lambda < 0.0 {
            -1.0
        } else {
            0.0
        };
        Complex64::new(m, -m * self.beta * s * (FRAC_PI_2 * self.alpha).tan())
    }

    /// E[exp(iλY_t)] = exp(−tψ(λ)).
    pub fn char_function(&self, t: f64, lambda: f64) -> ComplexValue {
        (-self.char_exponent(lambda) * t).exp()
    }

    /// Identifier used in batch metadata and seed derivation.
    pub fn id(&self) -> String {
        format!("stable(a={},b={},s={})", self.alpha, self.beta, self.sigma)
    }
}

/// Free-function form of [`StableParams::new`].
pub fn validate_params(alpha: f64, beta: f64, sigma: f64) -> Result<StableParams> {
    StableParams::new(alpha, beta, sigma)
}

/// Provenance of a sample batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchMeta {
    pub law_id: String,
    pub n: usize,
    pub stream: u64,
}

/// A batch of finite draws with the seed that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub values: Vec<f64>,
    pub seed: u64,
    pub meta: BatchMeta,
}

impl SampleBatch {
    pub fn new(values: Vec<f64>, seed: u64, law_id: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::OutOfRange("a sample batch needs at least one value".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::OutOfRange(format!("non-finite sample value {bad}")));
        }
        let n = values.len();
        Ok(Self {
            values,
            seed,
            meta: BatchMeta {
                law_id: law_id.into(),
                n,
                stream: seed,
            },
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Precomputed constants of the uniform-plus-exponential transformation.
#[derive(Debug, Clone, Copy)]
pub struct StableSampler {
    alpha: f64,
    sigma: f64,
    shift: f64,
    scale: f64,
    cauchy: bool,
}

impl StableSampler {
    pub fn new(p: &StableParams) -> Self {
        let alpha = p.alpha;
        let t = p.skew_term();
        Self {
            alpha,
            sigma: p.sigma,
            shift: if alpha == 1.0 { 0.0 } else { t.atan() / alpha },
            scale: (1.0 + t * t).powf(1.0 / (2.0 * alpha)),
            cauchy: alpha == 1.0,
        }
    }

    /// One draw of S_α(σ, β).
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let v = PI * (open01(rng) - 0.5);
            let x = if self.cauchy {
                v.tan()
            } else {
                let w = exp1(rng);
                let a = self.alpha;
                let arg = a * (v + self.shift);
                self.scale * arg.sin() / v.cos().powf(1.0 / a) * ((v - arg).cos() / w).powf((1.0 - a) / a)
            };
            let y = self.sigma * x;
            if y.is_finite() {
                return y;
            }
        }
    }
}

/// `n` i.i.d. draws of S_α(σ, β); deterministic in `(p, n, seed)`.
pub fn sample_stable(p: &StableParams, n: usize, seed: u64) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::OutOfRange("sample size must be at least 1".into()));
    }
    let sampler = StableSampler::new(p);
    let mut values = vec![0.0; n];
    fill_blocks(&mut values, seed, |rng, out| {
        for v in out.iter_mut() {
            *v = sampler.draw(rng);
        }
    });
    SampleBatch::new(values, seed, p.id())
}

fn truncation_point(alpha: f64, tol: f64) -> f64 {
    (100.0 / tol).ln().powf(1.0 / alpha)
}

/// Integrates `g` over [0, Λ] where `g` oscillates with half-period π/|x|.
fn fourier_integral<G: Fn(f64) -> f64>(
    g: G,
    x: f64,
    cutoff: f64,
    tol: f64,
    q: &QuadConfig,
    what: &str,
) -> Result<Estimate> {
    let max_seg = 200;
    let half = if x == 0.0 { f64::INFINITY } else { PI / x.abs() };
    let panels = (cutoff / half).ceil();
    let est = if panels <= 48.0 {
        let mut pts = vec![0.0];
        let mut b = 0.0f64.max(half.min(cutoff));
        if panels <= 1.0 {
            // Geometric breakpoints keep the cusp at the origin cheap.
            let mut s = cutoff.min(1.0) * 1e-3;
            while s < cutoff {
                pts.push(s);
                s *= 8.0;
            }
            pts.push(cutoff);
        } else {
            while b < cutoff {
                pts.push(b);
                b += half;
            }
            pts.push(cutoff);
        }
        adaptive_split(&g, &pts, tol, max_seg)
    } else {
        let max_panels = q.max_panels.max(64);
        match panel_series(
            |k| {
                let a = k as f64 * half;
                adaptive(&g, a, a + half, tol * 1e-2, 0.0, max_seg)
            },
            tol,
            max_panels,
        ) {
            Some(e) => e,
            None => {
                return Err(Error::quad(what, f64::INFINITY, tol));
            }
        }
    };
    if !(est.error <= tol * 10.0) || !est.value.is_finite() {
        return Err(Error::quad(what, est.error, tol));
    }
    Ok(est)
}

/// Density of S_α(1, β) at `x` by Fourier inversion, to absolute accuracy `tol`.
fn standard_pdf(alpha: f64, zeta: f64, x: f64, tol: f64, q: &QuadConfig) -> Result<f64> {
    let cutoff = truncation_point(alpha, tol);
    let g = |l: f64| {
        let la = l.powf(alpha);
        (-la).exp() * (zeta * la - x * l).cos()
    };
    let est = fourier_integral(g, x, cutoff, tol * PI, q, "stable density")?;
    Ok(est.value / PI)
}

/// Distribution function of S_α(1, β) at `x` by Gil-Pelaez inversion.
fn standard_cdf(alpha: f64, zeta: f64, x: f64, tol: f64, q: &QuadConfig) -> Result<f64> {
    let cutoff = truncation_point(alpha, tol);
    let g = |l: f64| {
        if l == 0.0 {
            return if alpha < 1.0 && zeta != 0.0 { 0.0 } else { -x };
        }
        let la = l.powf(alpha);
        (-la).exp() * (zeta * la - x * l).sin() / l
    };
    let est = fourier_integral(g, x, cutoff, tol * PI, q, "stable distribution function")?;
    Ok(0.5 - est.value / PI)
}

/// Totally skewed laws with α < 1 live on a half-line.
fn outside_support(p: &StableParams, u: f64) -> bool {
    p.alpha < 1.0 && p.beta.abs() == 1.0 && u * p.beta <= 0.0
}

/// Density of Y_t at `x`, where Y_1 ~ S_α(σ, β).
pub fn stable_pdf(p: &StableParams, t: f64, x: f64, q: &QuadConfig) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::OutOfRange(format!("time must be positive, got {t}")));
    }
    let s = p.sigma * t.powf(1.0 / p.alpha);
    let u = x / s;
    if outside_support(p, u) {
        return Ok(0.0);
    }
    let v = standard_pdf(p.alpha, p.skew_term(), u, q.tolerance * s.min(1.0), q)? / s;
    if v < 0.0 {
        if v > -q.tolerance {
            return Ok(0.0);
        }
        return Err(Error::quad(
            format!("stable density at x={x} came out negative ({v:e})"),
            -v,
            q.tolerance,
        ));
    }
    Ok(v)
}

/// Distribution function of S_α(σ, β) at `x`.
pub fn stable_cdf(p: &StableParams, x: f64, q: &QuadConfig) -> Result<f64> {
    let u = x / p.sigma;
    if u.is_infinite() {
        return Ok(if u > 0.0 { 1.0 } else { 0.0 });
    }
    if outside_support(p, u) {
        return Ok(if p.beta > 0.0 { 0.0 } else { 1.0 });
    }
    let v = standard_cdf(p.alpha, p.skew_term(), u, q.tolerance, q)?;
    Ok(v.clamp(0.0, 1.0))
}

/// C·t^{−1/α}·min(1, t^{(α+1)/α}/|x|^{α+1}).
pub fn heat_kernel_majorant(alpha: f64, c: f64, t: f64, x: f64) -> f64 {
    let ratio = t.powf((alpha + 1.0) / alpha) / x.abs().powf(alpha + 1.0);
    c * t.powf(-1.0 / alpha) * ratio.min(1.0)
}

/// Fitted constant of the heat-kernel majorant on two nested grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MajorantFit {
    pub constant: f64,
    pub refined_constant: f64,
}

impl MajorantFit {
    pub fn relative_change(&self) -> f64 {
        (self.refined_constant - self.constant).abs() / self.refined_constant
    }
}

/// Smallest C with p(t, x) ≤ heat_kernel_majorant(α, C, t, x) on a grid of
/// scaled points. By the scaling identity the ratio depends on t^{−1/α}x
/// only, so the grid runs over that variable; the tail reaches `u_max`.
pub fn fit_heat_kernel_constant(p: &StableParams, u_max: f64, points: usize, q: &QuadConfig) -> Result<MajorantFit> {
    let fit = |m: usize| -> Result<f64> {
        let mut best: f64 = 0.0;
        let lo = 1e-3f64.ln();
        let hi = u_max.ln();
        for i in 0..m {
            let u = (lo + (hi - lo) * i as f64 / (m - 1) as f64).exp();
            for x in [u, -u] {
                let d = stable_pdf(p, 1.0, x, q)?;
                best = best.max(d / heat_kernel_majorant(p.alpha, 1.0, 1.0, x));
            }
        }
        best = best.max(stable_pdf(p, 1.0, 0.0, q)?);
        Ok(best)
    };
    Ok(MajorantFit {
        constant: fit(points)?,
        refined_constant: fit(2 * points - 1)?,
    })
}

/// Density and distribution function from the integral representation over
/// a finite angle range (α ≠ 1). Independent of the Fourier route.
pub mod integral_form {
    use super::*;

    struct Angles {
        alpha: f64,
        theta0: f64,
        zeta: f64,
    }

    impl Angles {
        fn new(alpha: f64, beta: f64) -> Self {
            let zeta = beta * (FRAC_PI_2 * alpha).tan();
            Self {
                alpha,
                theta0: zeta.atan() / alpha,
                zeta,
            }
        }

        fn v(&self, th: f64) -> f64 {
            let a = self.alpha;
            let c0 = (a * self.theta0).cos().powf(1.0 / (a - 1.0));
            let r = (th.cos() / (a * (self.theta0 + th)).sin()).powf(a / (a - 1.0));
            c0 * r * (a * self.theta0 + (a - 1.0) * th).cos() / th.cos()
        }

        /// Breakpoints clustering geometrically on the peak of the integrand.
        fn breakpoints(&self, scale: f64) -> Vec<f64> {
            let (lo, hi) = (-self.theta0, FRAC_PI_2);
            let peak = self.peak(scale);
            let mut pts = vec![lo, peak, hi];
            let mut d = (peak - lo).max(hi - peak);
            while d > 1e-14 {
                pts.push(peak - d);
                pts.push(peak + d);
                d *= 0.25;
            }
            pts.retain(|p| *p >= lo && *p <= hi);
            pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            pts.dedup();
            pts
        }

        /// θ at which scale·V(θ) = 1, if inside the range.
        fn peak(&self, scale: f64) -> f64 {
            let (mut lo, mut hi) = (-self.theta0, FRAC_PI_2);
            let increasing = self.alpha < 1.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let val = scale * self.v(mid);
                let below = if val.is_nan() { !increasing } else { val < 1.0 };
                if below == increasing {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }
    }

    fn positive_pdf(alpha: f64, beta: f64, x: f64, tol: f64) -> f64 {
        let g = Angles::new(alpha, beta);
        let scale = x.powf(alpha / (alpha - 1.0));
        let h = |th: f64| {
            let v = g.v(th);
            let e = scale * v;
            let r = e * (-e).exp();
            if r.is_finite() {
                r
            } else {
                0.0
            }
        };
        let pts = g.breakpoints(scale);
        let c = alpha / (PI * (alpha - 1.0).abs() * x);
        let est = adaptive_split(h, &pts, tol / c.max(1e-300), 400);
        c * est.value
    }

    fn positive_cdf(alpha: f64, beta: f64, x: f64, tol: f64) -> f64 {
        let g = Angles::new(alpha, beta);
        let scale = x.powf(alpha / (alpha - 1.0));
        let h = |th: f64| {
            let e = scale * g.v(th);
            let r = (-e).exp();
            if r.is_finite() {
                r
            } else {
                0.0
            }
        };
        let pts = g.breakpoints(scale);
        let est = adaptive_split(h, &pts, tol * PI, 400);
        let c1 = if alpha < 1.0 { (FRAC_PI_2 - g.theta0) / PI } else { 1.0 };
        c1 + (1.0 - alpha).signum() / PI * est.value
    }

    /// Density of S_α(1, β), α ≠ 1.
    pub fn pdf(alpha: f64, beta: f64, x: f64, tol: f64) -> f64 {
        if x > 0.0 {
            positive_pdf(alpha, beta, x, tol)
        } else if x < 0.0 {
            positive_pdf(alpha, -beta, -x, tol)
        } else {
            let g = Angles::new(alpha, beta);
            statrs::function::gamma::gamma(1.0 + 1.0 / alpha) * g.theta0.cos()
                / (PI * (1.0 + g.zeta * g.zeta).powf(1.0 / (2.0 * alpha)))
        }
    }

    /// Distribution function of S_α(1, β), α ≠ 1.
    pub fn cdf(alpha: f64, beta: f64, x: f64, tol: f64) -> f64 {
        if x > 0.0 {
            positive_cdf(alpha, beta, x, tol)
        } else if x < 0.0 {
            1.0 - positive_cdf(alpha, -beta, -x, tol)
        } else {
            let g = Angles::new(alpha, beta);
            (FRAC_PI_2 - g.theta0) / PI
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> QuadConfig {
        QuadConfig::default()
    }

    #[test]
    fn validation_rules() {
        assert!(StableParams::new(1.5, 0.3, 1.0).is_ok());
        assert!(matches!(
            StableParams::new(1.0, 0.5, 1.0),
            Err(Error::SingularCase { .. })
        ));
        assert!(matches!(StableParams::new(2.0, 0.0, 1.0), Err(Error::OutOfRange(_))));
        assert!(matches!(StableParams::new(0.5, 1.1, 1.0), Err(Error::OutOfRange(_))));
        assert!(matches!(StableParams::new(0.5, 0.0, 0.0), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn char_exponent_examples() {
        let p = StableParams::new(1.5, 0.0, 1.0).unwrap();
        assert_eq!(p.char_exponent(0.0), Complex64::new(0.0, 0.0));
        let c = StableParams::new(1.0, 0.0, 1.0).unwrap();
        assert_eq!(c.char_exponent(-3.0), Complex64::new(3.0, 0.0));
        let s = StableParams::new(0.5, 1.0, 1.0).unwrap().char_exponent(1.0);
        assert!((s.re - 1.0).abs() < 1e-15 && (s.im + 1.0).abs() < 1e-15);
    }

    #[test]
    fn cauchy_density_and_cdf() {
        let c = StableParams::new(1.0, 0.0, 1.0).unwrap();
        for x in [0.0, 0.3, -2.0, 17.0, 1e3] {
            let d = stable_pdf(&c, 1.0, x, &q()).unwrap();
            assert!((d - 1.0 / (PI * (1.0 + x * x))).abs() < 1e-9, "x={x} d={d}");
            let f = stable_cdf(&c, x, &q()).unwrap();
            assert!((f - (0.5 + x.atan() / PI)).abs() < 1e-9, "x={x} f={f}");
        }
    }

    #[test]
    fn fourier_and_integral_forms_agree() {
        for &(a, b) in &[(0.5, 0.0), (0.5, 1.0), (0.7, 0.5), (1.5, -0.5), (1.9, 0.0), (1.3, 0.9)] {
            let p = StableParams::new(a, b, 1.0).unwrap();
            for x in [-30.0, -3.0, -0.4, 0.0, 0.2, 1.0, 4.5, 60.0, 2e3] {
                let f1 = stable_pdf(&p, 1.0, x, &q()).unwrap();
                let f2 = integral_form::pdf(a, b, x, 1e-12);
                assert!((f1 - f2).abs() < 1e-8, "pdf a={a} b={b} x={x}: {f1} vs {f2}");
                let c1 = stable_cdf(&p, x, &q()).unwrap();
                let c2 = integral_form::cdf(a, b, x, 1e-12);
                assert!((c1 - c2).abs() < 1e-8, "cdf a={a} b={b} x={x}: {c1} vs {c2}");
            }
        }
    }

    #[test]
    fn majorant_examples() {
        assert!((heat_kernel_majorant(1.0, 1.0, 0.5, 0.0) - 2.0).abs() < 1e-15);
        let v = heat_kernel_majorant(0.5, 1.0, 0.25, 10.0);
        assert!((v - 0.25 / 10f64.powf(1.5)).abs() < 1e-15);
    }
}
