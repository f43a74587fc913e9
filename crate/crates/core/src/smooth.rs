//! Test functions with derivative evaluators and certified sup-norms.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::adaptive;

type Eval = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Large-|x| structure of a test function, used by the generator quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailBehavior {
    /// f = `left` on (−∞, `left_end`] and f = `right` on [`right_start`, ∞).
    Constant {
        left_end: f64,
        left: f64,
        right_start: f64,
        right: f64,
    },
    /// f(x + period) = f(x); `mean` is the average over one period.
    Periodic { period: f64, mean: f64 },
    /// Only boundedness is known.
    Bounded,
}

/// A C³ test function: evaluators for f, f′, f″, f‴ and sup-norms
/// ‖f^(j)‖∞ (absent when unknown or infinite).
#[derive(Clone)]
pub struct SmoothFn {
    name: String,
    derivs: [Eval; 4],
    norms: [Option<f64>; 4],
    tail: TailBehavior,
    breakpoints: Vec<f64>,
    constant: Option<f64>,
}

impl fmt::Debug for SmoothFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothFn")
            .field("name", &self.name)
            .field("norms", &self.norms)
            .field("tail", &self.tail)
            .finish()
    }
}

/// Sup-norms of the degree-7 step f₀ and its first three derivatives.
pub const STEP_NORMS: [f64; 4] = [1.0, 140.0 / 64.0, 7.513_188_404_399_293, 52.5];

/// Common constant C with ‖f₀^(j)‖∞ ≤ C for j ≤ 3.
pub const STEP_CONSTANT: f64 = 52.5;

fn step0(s: f64) -> f64 {
    if s <= 0.0 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else if s <= 0.5 {
        1.0 - rise(s)
    } else {
        // f₀(s) = rise(1 − s); avoids the cancellation near s = 1.
        rise(1.0 - s)
    }
}

/// s⁴(35 − 84s + 70s² − 20s³), increasing from 0 to 1/2 on [0, 1/2].
fn rise(s: f64) -> f64 {
    let s4 = s * s * s * s;
    s4 * (35.0 + s * (-84.0 + s * (70.0 - 20.0 * s)))
}

fn step1(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        let u = s * (1.0 - s);
        -140.0 * u * u * u
    }
}

fn step2(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        let u = s * (1.0 - s);
        -420.0 * u * u * (1.0 - 2.0 * s)
    }
}

fn step3(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        let u = s * (1.0 - s);
        -840.0 * u * (1.0 - 5.0 * u)
    }
}

impl SmoothFn {
    /// Builds a test function and checks the derivative evaluators against
    /// central differences (step 1e-5) at 32 pseudo-random points.
    pub fn new<F0, F1, F2, F3>(
        name: impl Into<String>,
        f: F0,
        d1: F1,
        d2: F2,
        d3: F3,
        norms: [Option<f64>; 4],
        tail: TailBehavior,
    ) -> Result<Self>
    where
        F0: Fn(f64) -> f64 + Send + Sync + 'static,
        F1: Fn(f64) -> f64 + Send + Sync + 'static,
        F2: Fn(f64) -> f64 + Send + Sync + 'static,
        F3: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let s = Self {
            name: name.into(),
            derivs: [Arc::new(f), Arc::new(d1), Arc::new(d2), Arc::new(d3)],
            norms,
            tail,
            breakpoints: Vec::new(),
            constant: None,
        };
        s.check_derivatives()?;
        Ok(s)
    }

    fn check_derivatives(&self) -> Result<()> {
        for (j, n) in self.norms.iter().enumerate() {
            if let Some(v) = n {
                if !(v.is_finite() && *v >= 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "norm of order {j} must be finite and >= 0"
                    )));
                }
            }
        }
        let (lo, hi) = self.probe_range();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let h = 1e-5;
        for _ in 0..32 {
            let x = lo + (hi - lo) * rng.random::<f64>();
            for j in 1..4 {
                let fd = (self.derivative(j - 1, x + h) - self.derivative(j - 1, x - h)) / (2.0 * h);
                let exact = self.derivative(j, x);
                let scale = exact.abs().max(self.norms[j].unwrap_or(1.0)).max(1e-300);
                if (fd - exact).abs() > 1e-4 * scale {
                    return Err(Error::InconsistentDerivative(format!(
                        "{}: derivative of order {j} at x={x:.6} is {exact}, finite difference gives {fd}",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }

    fn probe_range(&self) -> (f64, f64) {
        match self.tail {
            TailBehavior::Constant {
                left_end, right_start, ..
            } => {
                let w = (right_start - left_end).max(1e-3);
                (left_end - 0.25 * w, right_start + 0.25 * w)
            }
            TailBehavior::Periodic { period, .. } => (0.0, 2.0 * period),
            TailBehavior::Bounded => (-5.0, 5.0),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// f^(j)(x) for j ≤ 3.
    #[inline]
    pub fn derivative(&self, j: usize, x: f64) -> f64 {
        (self.derivs[j])(x)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.derivs[0])(x)
    }
    #[inline]
    pub fn d1(&self, x: f64) -> f64 {
        (self.derivs[1])(x)
    }
    #[inline]
    pub fn d2(&self, x: f64) -> f64 {
        (self.derivs[2])(x)
    }
    #[inline]
    pub fn d3(&self, x: f64) -> f64 {
        (self.derivs[3])(x)
    }

    pub fn norms(&self) -> [Option<f64>; 4] {
        self.norms
    }

    /// ‖f^(j)‖∞ or `MissingNorm`.
    pub fn norm(&self, j: usize) -> Result<f64> {
        self.norms.get(j).copied().flatten().ok_or(Error::MissingNorm(j))
    }

    pub fn tail(&self) -> TailBehavior {
        self.tail
    }

    /// Points where f is only finitely smooth.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn constant_value(&self) -> Option<f64> {
        self.constant
    }

    /// Characteristic length over which f changes, from norm ratios.
    pub fn length_scale(&self) -> f64 {
        let mut l: f64 = 1.0;
        for j in 0..3 {
            if let (Some(a), Some(b)) = (self.norms[j], self.norms[j + 1]) {
                if a > 0.0 && b > 0.0 {
                    l = l.min(a / b);
                }
            }
        }
        l.max(1e-6)
    }

    fn with_breakpoints(mut self, b: Vec<f64>) -> Self {
        self.breakpoints = b;
        self
    }

    /// f ≡ c.
    pub fn constant(c: f64) -> Self {
        let mut s = Self::new(
            format!("const({c})"),
            move |_| c,
            |_| 0.0,
            |_| 0.0,
            |_| 0.0,
            [Some(c.abs()), Some(0.0), Some(0.0), Some(0.0)],
            TailBehavior::Constant {
                left_end: 0.0,
                left: c,
                right_start: 0.0,
                right: c,
            },
        )
        .expect("constant derivatives are consistent");
        s.constant = Some(c);
        s
    }

    /// f(x) = a + b·x; unbounded, so ‖f‖∞ is absent.
    pub fn linear(a: f64, b: f64) -> Self {
        Self::new(
            format!("linear({a},{b})"),
            move |x| a + b * x,
            move |_| b,
            |_| 0.0,
            |_| 0.0,
            [None, Some(b.abs()), Some(0.0), Some(0.0)],
            TailBehavior::Bounded,
        )
        .expect("linear derivatives are consistent")
    }

    /// f(x) = amplitude·cos(λx + φ).
    pub fn cosine(lambda: f64, phase: f64, amplitude: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::OutOfRange(format!(
                "cosine frequency must be positive, got {lambda}"
            )));
        }
        let c = amplitude;
        Self::new(
            format!("cos({lambda}x+{phase})"),
            move |x| c * (lambda * x + phase).cos(),
            move |x| -c * lambda * (lambda * x + phase).sin(),
            move |x| -c * lambda * lambda * (lambda * x + phase).cos(),
            move |x| c * lambda * lambda * lambda * (lambda * x + phase).sin(),
            [
                Some(c.abs()),
                Some(c.abs() * lambda),
                Some(c.abs() * lambda * lambda),
                Some(c.abs() * lambda * lambda * lambda),
            ],
            TailBehavior::Periodic {
                period: 2.0 * PI / lambda,
                mean: 0.0,
            },
        )
    }

    /// f(x) = exp(−((x − c)/w)²), a Gaussian bump with generic bounded tails.
    pub fn gaussian_bump(center: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::OutOfRange("bump width must be positive".into()));
        }
        let w = width;
        let g = move |x: f64| {
            let u = (x - center) / w;
            (u, (-u * u).exp())
        };
        Self::new(
            format!("bump({center},{width})"),
            move |x| g(x).1,
            move |x| {
                let (u, e) = g(x);
                -2.0 * u * e / w
            },
            move |x| {
                let (u, e) = g(x);
                (4.0 * u * u - 2.0) * e / (w * w)
            },
            move |x| {
                let (u, e) = g(x);
                (12.0 * u - 8.0 * u * u * u) * e / (w * w * w)
            },
            [
                Some(1.0),
                Some((2.0f64).sqrt() * (-0.5f64).exp() / w),
                Some(2.0 / (w * w)),
                Some(3.903_567 / (w * w * w)),
            ],
            TailBehavior::Bounded,
        )
    }

    /// The smoothed indicator f(s) = f₀(ρ(s − x)) of (−∞, x]: equal to 1 for
    /// s ≤ x and to 0 for s ≥ x + 1/ρ, with ‖f^(j)‖∞ = C_j ρ^j.
    pub fn smoothed_indicator(x: f64, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::OutOfRange(format!("rho must be positive, got {rho}")));
        }
        Self::smooth_step(x, rho, 1.0)
    }

    /// amplitude·f₀(ρ(s − x)).
    pub fn smooth_step(x: f64, rho: f64, amplitude: f64) -> Result<Self> {
        let c = amplitude;
        let r2 = rho * rho;
        let r3 = r2 * rho;
        let s = Self::new(
            format!("step({x},{rho})"),
            move |s| c * step0(rho * (s - x)),
            move |s| c * rho * step1(rho * (s - x)),
            move |s| c * r2 * step2(rho * (s - x)),
            move |s| c * r3 * step3(rho * (s - x)),
            [
                Some(c.abs() * STEP_NORMS[0]),
                Some(c.abs() * STEP_NORMS[1] * rho),
                Some(c.abs() * STEP_NORMS[2] * rho.powi(2)),
                Some(c.abs() * STEP_NORMS[3] * rho.powi(3)),
            ],
            TailBehavior::Constant {
                left_end: x,
                left: c,
                right_start: x + 1.0 / rho,
                right: 0.0,
            },
        )?;
        Ok(s.with_breakpoints(vec![x, x + 1.0 / rho]))
    }

    /// Σ cᵢ fᵢ with norms bounded by Σ|cᵢ|‖fᵢ^(j)‖.
    pub fn combination(terms: &[(f64, SmoothFn)]) -> Result<Self> {
        if terms.is_empty() {
            return Ok(Self::constant(0.0));
        }
        let parts: Vec<(f64, SmoothFn)> = terms.to_vec();
        let mut norms = [Some(0.0); 4];
        for (c, f) in &parts {
            for (j, slot) in norms.iter_mut().enumerate() {
                *slot = match (*slot, f.norms[j]) {
                    (Some(a), Some(b)) => Some(a + c.abs() * b),
                    _ => None,
                };
            }
        }
        let tail = combine_tails(&parts);
        let mut breakpoints: Vec<f64> = parts.iter().flat_map(|(_, f)| f.breakpoints.clone()).collect();
        breakpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breakpoints.dedup();
        let name = parts
            .iter()
            .map(|(c, f)| format!("{c}*{}", f.name))
            .collect::<Vec<_>>()
            .join("+");
        let mk = |j: usize| {
            let p = parts.clone();
            move |x: f64| p.iter().map(|(c, f)| c * f.derivative(j, x)).sum::<f64>()
        };
        Ok(Self::new(name, mk(0), mk(1), mk(2), mk(3), norms, tail)?.with_breakpoints(breakpoints))
    }

    /// x ↦ f(x − y).
    pub fn translated(&self, y: f64) -> Self {
        let src = self.clone();
        let tail = match self.tail {
            TailBehavior::Constant {
                left_end,
                left,
                right_start,
                right,
            } => TailBehavior::Constant {
                left_end: left_end + y,
                left,
                right_start: right_start + y,
                right,
            },
            t => t,
        };
        let mk = |j: usize| {
            let f = src.clone();
            move |x: f64| f.derivative(j, x - y)
        };
        Self {
            name: format!("{}(x-{y})", self.name),
            derivs: [Arc::new(mk(0)), Arc::new(mk(1)), Arc::new(mk(2)), Arc::new(mk(3))],
            norms: self.norms,
            tail,
            breakpoints: self.breakpoints.iter().map(|b| b + y).collect(),
            constant: self.constant,
        }
    }

    /// x ↦ f(c·x), c > 0.
    pub fn dilated(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::OutOfRange("dilation factor must be positive".into()));
        }
        let src = self.clone();
        let tail = match self.tail {
            TailBehavior::Constant {
                left_end,
                left,
                right_start,
                right,
            } => TailBehavior::Constant {
                left_end: left_end / c,
                left,
                right_start: right_start / c,
                right,
            },
            TailBehavior::Periodic { period, mean } => TailBehavior::Periodic {
                period: period / c,
                mean,
            },
            TailBehavior::Bounded => TailBehavior::Bounded,
        };
        let mk = |j: usize| {
            let f = src.clone();
            let k = c.powi(j as i32);
            move |x: f64| k * f.derivative(j, c * x)
        };
        let mut norms = self.norms;
        for (j, n) in norms.iter_mut().enumerate() {
            *n = n.map(|v| v * c.powi(j as i32));
        }
        Ok(Self {
            name: format!("{}({c}x)", self.name),
            derivs: [Arc::new(mk(0)), Arc::new(mk(1)), Arc::new(mk(2)), Arc::new(mk(3))],
            norms,
            tail,
            breakpoints: self.breakpoints.iter().map(|b| b / c).collect(),
            constant: self.constant,
        })
    }
}

fn combine_tails(parts: &[(f64, SmoothFn)]) -> TailBehavior {
    let mut left_end = f64::INFINITY;
    let mut right_start = f64::NEG_INFINITY;
    let (mut left, mut right) = (0.0, 0.0);
    let mut all_constant = true;
    let mut period: Option<f64> = None;
    let mut mean = 0.0;
    let mut all_periodic = true;
    for (c, f) in parts {
        match f.tail {
            TailBehavior::Constant {
                left_end: a,
                left: l,
                right_start: b,
                right: r,
            } => {
                left_end = left_end.min(a);
                right_start = right_start.max(b);
                left += c * l;
                right += c * r;
                all_periodic = false;
            }
            TailBehavior::Periodic { period: p, mean: m } => {
                all_constant = false;
                match period {
                    None => period = Some(p),
                    Some(q) if (q - p).abs() <= 1e-12 * q => {}
                    Some(q) => {
                        // Commensurate periods share the longer one when one divides the other.
                        let (long, short) = if q > p { (q, p) } else { (p, q) };
                        let ratio = long / short;
                        if (ratio - ratio.round()).abs() < 1e-9 {
                            period = Some(long);
                        } else {
                            all_periodic = false;
                        }
                    }
                }
                mean += c * m;
            }
            TailBehavior::Bounded => {
                all_constant = false;
                all_periodic = false;
            }
        }
    }
    if all_constant {
        TailBehavior::Constant {
            left_end,
            left,
            right_start,
            right,
        }
    } else if all_periodic {
        TailBehavior::Periodic {
            period: period.unwrap_or(1.0),
            mean,
        }
    } else {
        TailBehavior::Bounded
    }
}

/// Serializable description of a test function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SmoothFnSpec {
    Constant {
        value: f64,
    },
    Cosine {
        lambda: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default = "unit")]
        scale: f64,
    },
    Step {
        center: f64,
        rho: f64,
        #[serde(default = "unit")]
        scale: f64,
    },
    Bump {
        center: f64,
        width: f64,
    },
}

fn unit() -> f64 {
    1.0
}

impl SmoothFnSpec {
    pub fn build(&self) -> Result<SmoothFn> {
        match *self {
            SmoothFnSpec::Constant { value } => Ok(SmoothFn::constant(value)),
            SmoothFnSpec::Cosine { lambda, phase, scale } => SmoothFn::cosine(lambda, phase, scale),
            SmoothFnSpec::Step { center, rho, scale } => SmoothFn::smooth_step(center, rho, scale),
            SmoothFnSpec::Bump { center, width } => SmoothFn::gaussian_bump(center, width),
        }
    }
}

/// Mean of a periodic function over one period, by quadrature.
pub fn period_mean(f: &SmoothFn, period: f64) -> f64 {
    adaptive(|x| f.eval(x), 0.0, period, 1e-13, 0.0, 200).value / period
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_polynomial_norms_match_dense_scan() {
        let mut m = [0.0f64; 4];
        for i in 0..=200_000 {
            let s = i as f64 / 200_000.0;
            m[0] = m[0].max(step0(s).abs());
            m[1] = m[1].max(step1(s).abs());
            m[2] = m[2].max(step2(s).abs());
            m[3] = m[3].max(step3(s).abs());
        }
        for j in 0..4 {
            assert!(
                (m[j] - STEP_NORMS[j]).abs() < 1e-8 * STEP_NORMS[j],
                "j={j}: {} vs {}",
                m[j],
                STEP_NORMS[j]
            );
        }
    }

    #[test]
    fn indicator_endpoints_and_scaling() {
        let f = SmoothFn::smoothed_indicator(0.3, 2.0).unwrap();
        assert_eq!(f.eval(0.3 - 1.0), 1.0);
        assert_eq!(f.eval(0.3 + 0.5 + 1.0), 0.0);
        let g = SmoothFn::smoothed_indicator(0.3, 4.0).unwrap();
        assert_eq!(g.norm(3).unwrap(), 8.0 * f.norm(3).unwrap());
    }

    #[test]
    fn inconsistent_derivative_is_rejected() {
        let r = SmoothFn::new(
            "bad",
            |x: f64| x.sin(),
            |x: f64| 2.0 * x.cos(),
            |x: f64| -x.sin(),
            |x: f64| -x.cos(),
            [Some(1.0); 4],
            TailBehavior::Bounded,
        );
        assert!(matches!(r, Err(Error::InconsistentDerivative(_))));
    }

    #[test]
    fn transforms_keep_derivatives_consistent() {
        let f = SmoothFn::smoothed_indicator(0.0, 3.0).unwrap();
        let g = f.dilated(2.0).unwrap();
        g.check_derivatives().unwrap();
        assert!((g.eval(0.1) - f.eval(0.2)).abs() < 1e-15);
        let h = f.translated(1.3);
        assert!((h.eval(1.4) - f.eval(0.1)).abs() < 1e-15);
    }
}
