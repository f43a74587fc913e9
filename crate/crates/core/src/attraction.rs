//! Heavy-tailed laws in the domain of normal attraction, the slowly varying
//! log-tail family, normalizing constants and normalized sums.

use std::collections::HashMap;
use std::f64::consts::{E, FRAC_PI_2, PI};
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{adaptive, adaptive_split, log_panel_tail, panel_series, Estimate, QuadConfig};
use crate::rng::{fill_blocks, open01};
use crate::stable::{SampleBatch, StableParams};

/// σ and d_α for given tail constant A.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizingConstants {
    pub sigma: f64,
    pub d_alpha: f64,
}

/// ∫₀^∞ (1 − cos y)/y^{1+α} dy by quadrature.
fn one_minus_cos_integral(alpha: f64, q: &QuadConfig) -> Result<f64> {
    let tol = q.tolerance * 1e-2;
    let p = 2.0 - alpha;
    // ∫₀¹ y^{1−α}·2sin²(y/2)/y² dy after y = u^{1/(2−α)}.
    let inner = adaptive(
        |u: f64| {
            let y = u.powf(1.0 / p);
            if y < 1e-4 {
                0.5 - y * y / 24.0
            } else {
                let s = (0.5 * y).sin();
                2.0 * s * s / (y * y)
            }
        },
        0.0,
        1.0,
        tol,
        0.0,
        200,
    );
    let head = adaptive(|y: f64| y.cos() / y.powf(1.0 + alpha), 1.0, FRAC_PI_2, tol, 0.0, 200);
    let osc = panel_series(
        |k| {
            let a = FRAC_PI_2 + k as f64 * PI;
            adaptive(|y: f64| y.cos() / y.powf(1.0 + alpha), a, a + PI, tol * 1e-2, 0.0, 100)
        },
        tol,
        q.max_panels,
    )
    .ok_or_else(|| Error::quad("oscillatory tail of the normalizing integral", f64::INFINITY, tol))?;
    let total = Estimate::new(inner.value / p, inner.error / p) + Estimate::exact(1.0 / alpha) + (head + osc) * -1.0;
    if total.error > q.tolerance {
        return Err(Error::quad("normalizing integral", total.error, q.tolerance));
    }
    Ok(total.value)
}

/// d_α = (∫₀^∞ (1 − cos y)/y^{1+α} dy)^{−1}, cached per (α, tolerance).
pub fn d_alpha(alpha: f64, q: &QuadConfig) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::OutOfRange(format!("alpha must lie in (0, 2), got {alpha}")));
    }
    static CACHE: OnceLock<Mutex<HashMap<(u64, u64), f64>>> = OnceLock::new();
    let key = (alpha.to_bits(), q.tolerance.to_bits());
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().unwrap().get(&key) {
        return Ok(*v);
    }
    let d = 1.0 / one_minus_cos_integral(alpha, q)?;
    cache.lock().unwrap().insert(key, d);
    Ok(d)
}

/// σ = (Aα ∫_ℝ (1 − cos y)/|y|^{1+α} dy)^{1/α} together with d_α.
pub fn normalizing_constants(alpha: f64, a: f64, q: &QuadConfig) -> Result<NormalizingConstants> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::OutOfRange(format!("tail constant A must be positive, got {a}")));
    }
    let d = d_alpha(alpha, q)?;
    Ok(NormalizingConstants {
        sigma: (2.0 * a * alpha / d).powf(1.0 / alpha),
        d_alpha: d,
    })
}

/// Specification of the tail perturbation ε beyond the support floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EpsilonSpec {
    Zero,
    /// ε(x) = K/|x|^γ on the right, `K_left`/|x|^γ on the left (defaults to K).
    Power {
        #[serde(rename = "K")]
        k: f64,
        gamma: f64,
        #[serde(rename = "K_left", default, skip_serializing_if = "Option::is_none")]
        k_left: Option<f64>,
    },
    /// Knots (x, ε) for x > 0, interpolated linearly in log x and held
    /// constant outside the knot range. `left` defaults to `right`.
    Table {
        right: Vec<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        left: Option<Vec<[f64; 2]>>,
    },
}

/// γ reported for the zero perturbation: any finite value works in the
/// bound |ε(x)| ≤ K/|x|^γ, and a large one places such laws in the
/// "ε negligible" regime.
pub const ZERO_EPS_GAMMA: f64 = 8.0;

impl EpsilonSpec {
    fn validate(&self) -> Result<()> {
        match self {
            EpsilonSpec::Zero => Ok(()),
            EpsilonSpec::Power { k, gamma, k_left } => {
                let kl = k_left.unwrap_or(*k);
                if !(k.is_finite() && kl.is_finite() && gamma.is_finite()) {
                    return Err(Error::EpsilonUnbounded("power constants must be finite".into()));
                }
                if *k < 0.0 || kl < 0.0 {
                    return Err(Error::OutOfRange("power constants K must be nonnegative".into()));
                }
                if *gamma < 0.0 {
                    return Err(Error::EpsilonUnbounded(format!(
                        "gamma = {gamma} < 0 makes epsilon grow at infinity"
                    )));
                }
                Ok(())
            }
            EpsilonSpec::Table { right, left } => {
                for knots in std::iter::once(right).chain(left.iter()) {
                    if knots.is_empty() {
                        return Err(Error::InvalidConfig("epsilon table needs at least one knot".into()));
                    }
                    for w in knots.windows(2) {
                        if !(w[1][0] > w[0][0]) {
                            return Err(Error::InvalidConfig(
                                "epsilon table knots must be strictly increasing".into(),
                            ));
                        }
                    }
                    if knots
                        .iter()
                        .any(|k| !(k[0] > 0.0) || !k[1].is_finite() || !k[0].is_finite())
                    {
                        return Err(Error::EpsilonUnbounded(
                            "epsilon table needs finite values at positive knots".into(),
                        ));
                    }
                }
                Ok(())
            }
        }
    }

    /// ε(x) from the specification (meaningful beyond the support floor).
    pub fn eval(&self, x: f64) -> f64 {
        let ax = x.abs();
        match self {
            EpsilonSpec::Zero => 0.0,
            EpsilonSpec::Power { k, gamma, k_left } => {
                let c = if x >= 0.0 { *k } else { k_left.unwrap_or(*k) };
                c / ax.powf(*gamma)
            }
            EpsilonSpec::Table { right, left } => {
                let knots = if x >= 0.0 {
                    right
                } else {
                    left.as_ref().unwrap_or(right)
                };
                interpolate_log(knots, ax)
            }
        }
    }

    /// Constant K with |ε(x)| ≤ K/|x|^γ beyond the floor, and that γ.
    fn spec_bound(&self) -> (f64, f64) {
        match self {
            EpsilonSpec::Zero => (0.0, ZERO_EPS_GAMMA),
            EpsilonSpec::Power { k, gamma, k_left } => (k.max(k_left.unwrap_or(*k)), *gamma),
            EpsilonSpec::Table { right, left } => {
                let m = right
                    .iter()
                    .chain(left.iter().flatten())
                    .map(|k| k[1].abs())
                    .fold(0.0, f64::max);
                (m, 0.0)
            }
        }
    }

    /// Points where ε is not smooth, for quadrature splitting.
    fn knots(&self) -> Vec<f64> {
        match self {
            EpsilonSpec::Table { right, left } => right.iter().chain(left.iter().flatten()).map(|k| k[0]).collect(),
            _ => Vec::new(),
        }
    }
}

fn interpolate_log(knots: &[[f64; 2]], x: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if x <= first[0] {
        return first[1];
    }
    if x >= last[0] {
        return last[1];
    }
    let i = knots.partition_point(|k| k[0] <= x);
    let (a, b) = (knots[i - 1], knots[i]);
    let t = (x.ln() - a[0].ln()) / (b[0].ln() - a[0].ln());
    a[1] + t * (b[1] - a[1])
}

/// How the interior (−floor, floor) is filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bridge {
    /// Distribution function linear across the interior.
    #[default]
    Linear,
    /// Interior mass placed as an atom at 0.
    PointMass,
}

/// Constants of the bound |ε(x)| ≤ K/|x|^γ holding for every x ≠ 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsBound {
    #[serde(rename = "K")]
    pub k: f64,
    pub gamma: f64,
}

/// Common interface of the one-dimensional laws used as summands.
pub trait Distribution: Send + Sync {
    fn id(&self) -> String;
    /// P(X ≤ x).
    fn cdf(&self, x: f64) -> f64;
    /// P(X < x).
    fn cdf_left(&self, x: f64) -> f64 {
        self.cdf(x)
    }
    /// P(X > x).
    fn survival(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }
    fn quantile(&self, u: f64) -> Result<f64>;
    fn draw(&self, rng: &mut dyn rand::RngCore) -> f64 {
        // Quantile inversion cannot fail for u in (0, 1) on validated laws.
        self.quantile(open01(rng)).unwrap_or(0.0)
    }
    /// Points where the distribution function is not smooth.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// A law whose tails follow (A + ε(x))(1 ± β)/|x|^α beyond a support floor.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractedLaw {
    alpha: f64,
    a: f64,
    beta: f64,
    eps: EpsilonSpec,
    floor: f64,
    bridge: Bridge,
    right_mass: f64,
    left_mass: f64,
    constants: NormalizingConstants,
    bound: EpsBound,
    mean: Option<f64>,
}

/// Serializable description of a law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LawSpec {
    Pareto {
        alpha: f64,
    },
    Attracted {
        alpha: f64,
        #[serde(rename = "A")]
        a: f64,
        #[serde(default)]
        beta: f64,
        eps: EpsilonSpec,
        support_floor: f64,
        #[serde(default)]
        bridge: Bridge,
    },
    Logtail {
        alpha: f64,
        delta: f64,
        #[serde(rename = "K0")]
        k0: f64,
    },
}

impl AttractedLaw {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    /// Tail constant A.
    pub fn tail_constant(&self) -> f64 {
        self.a
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn eps_spec(&self) -> &EpsilonSpec {
        &self.eps
    }
    pub fn support_floor(&self) -> f64 {
        self.floor
    }
    pub fn bridge(&self) -> Bridge {
        self.bridge
    }
    pub fn sigma(&self) -> f64 {
        self.constants.sigma
    }
    pub fn d_alpha(&self) -> f64 {
        self.constants.d_alpha
    }
    pub fn constants(&self) -> NormalizingConstants {
        self.constants
    }
    /// E[X₁] when α > 1.
    pub fn mean(&self) -> Option<f64> {
        self.mean
    }
    pub fn eps_bound(&self) -> EpsBound {
        self.bound
    }
    /// The stable law S_α(1, β) that normalized sums approach.
    pub fn limit(&self) -> StableParams {
        StableParams::new(self.alpha, self.beta, 1.0).expect("validated at construction")
    }

    pub fn spec(&self) -> LawSpec {
        LawSpec::Attracted {
            alpha: self.alpha,
            a: self.a,
            beta: self.beta,
            eps: self.eps.clone(),
            support_floor: self.floor,
            bridge: self.bridge,
        }
    }

    /// P(X > x) for x ≥ floor.
    fn right_tail(&self, x: f64) -> f64 {
        (self.a + self.eps.eval(x)) * (1.0 + self.beta) / x.powf(self.alpha)
    }

    /// P(X ≤ −x) for x ≥ floor.
    fn left_tail(&self, x: f64) -> f64 {
        (self.a + self.eps.eval(-x)) * (1.0 - self.beta) / x.powf(self.alpha)
    }

    fn interior_mass(&self) -> f64 {
        (1.0 - self.left_mass - self.right_mass).max(0.0)
    }

    /// The perturbation implied by the distribution function at any x ≠ 0:
    /// ε from the specification beyond the floor, and from the bridge inside.
    pub fn eps(&self, x: f64) -> f64 {
        let ax = x.abs();
        if ax >= self.floor {
            return self.eps.eval(x);
        }
        let (w, tail) = if x > 0.0 {
            (1.0 + self.beta, self.interior_side(ax, self.right_mass))
        } else {
            (1.0 - self.beta, self.interior_side(ax, self.left_mass))
        };
        if w == 0.0 {
            0.0
        } else {
            ax.powf(self.alpha) * tail / w - self.a
        }
    }

    /// P(X > r) or P(X ≤ −r) for 0 < r < floor, written identically for both
    /// sides so that symmetric laws give bitwise symmetric ε.
    fn interior_side(&self, r: f64, side_mass: f64) -> f64 {
        match self.bridge {
            Bridge::Linear => side_mass + (self.floor - r) / (2.0 * self.floor) * self.interior_mass(),
            Bridge::PointMass => side_mass,
        }
    }

    fn eps_breaks(&self, t: f64) -> Vec<f64> {
        let mut pts: Vec<f64> = vec![self.floor];
        pts.extend(self.eps.knots());
        pts.retain(|&b| b > 0.0 && b < t);
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        pts
    }

    /// ∫₀ᵗ g(x) dx for an integrand with integrable endpoint behavior at 0,
    /// split at the floor and the ε knots.
    fn integrate_eps<G: FnMut(f64) -> f64>(&self, mut g: G, t: f64, q: &QuadConfig) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        let mut pts = vec![0.0];
        pts.extend(self.eps_breaks(t));
        pts.push(t);
        // Geometric refinement toward 0 and, on long ranges, toward t.
        let first = pts[1];
        for k in 1..40 {
            let y = first * 0.5f64.powi(k);
            pts.push(y);
        }
        let last = *pts
            .iter()
            .filter(|&&v| v < t)
            .fold(&0.0, |a, b| if b > a { b } else { a });
        let mut y = last.max(1.0);
        while y * std::f64::consts::E < t {
            y *= std::f64::consts::E;
            pts.push(y);
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        let tol = q.tolerance.max(1e-13);
        let est = adaptive_split(&mut g, &pts, tol, 400);
        if !est.value.is_finite() || est.error > 1e3 * tol.max(1e-12 * est.value.abs()) {
            return Err(Error::quad("epsilon integral", est.error, tol));
        }
        Ok(est.value)
    }

    /// ∫_{−t}^{t} |ε(x)|·|x|^{p} dx.
    pub fn abs_eps_moment(&self, t: f64, p: f64, q: &QuadConfig) -> Result<f64> {
        self.integrate_eps(|x| (self.eps(x).abs() + self.eps(-x).abs()) * x.powf(p), t, q)
    }

    /// ∫_t^∞ (|ε(x)| + |ε(−x)|)·x^{−p} dx, p > 0; infinite when it diverges.
    pub fn abs_eps_tail(&self, t: f64, p: f64, q: &QuadConfig) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::OutOfRange(format!("tail start must be positive, got {t}")));
        }
        let g = |x: f64| (self.eps(x).abs() + self.eps(-x).abs()) * x.powf(-p);
        let mut head = 0.0;
        let mut start = t;
        if t < self.floor {
            head = self.integrate_eps(g, self.floor, q)? - self.integrate_eps(g, t, q)?;
            start = self.floor;
        }
        match &self.eps {
            EpsilonSpec::Zero => Ok(head),
            EpsilonSpec::Power { k, gamma, k_left } => {
                let e = gamma + p - 1.0;
                if e <= 0.0 {
                    return Ok(f64::INFINITY);
                }
                Ok(head + (k + k_left.unwrap_or(*k)) * start.powf(-e) / e)
            }
            EpsilonSpec::Table { .. } => {
                let far = self.eps.knots().into_iter().fold(start, f64::max);
                let body = if far > start {
                    adaptive_split(
                        g,
                        &{
                            let mut pts = vec![start];
                            pts.extend(self.eps.knots().into_iter().filter(|&k| k > start && k < far));
                            pts.push(far);
                            pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
                            pts
                        },
                        q.tolerance,
                        400,
                    )
                    .value
                } else {
                    0.0
                };
                // Beyond the last knot ε is constant.
                let c = self.eps.eval(far).abs() + self.eps.eval(-far).abs();
                if c == 0.0 {
                    return Ok(head + body);
                }
                if p <= 1.0 {
                    return Ok(f64::INFINITY);
                }
                Ok(head + body + c * far.powf(1.0 - p) / (p - 1.0))
            }
        }
    }

    /// (1+β)∫₀ᵗ ε(x)x^{−α}dx − (1−β)∫₀ᵗ ε(−x)x^{−α}dx as a single integrand.
    pub fn signed_eps_integral(&self, t: f64, q: &QuadConfig) -> Result<f64> {
        let (bp, bm) = (1.0 + self.beta, 1.0 - self.beta);
        self.integrate_eps(|x| (bp * self.eps(x) - bm * self.eps(-x)) * x.powf(-self.alpha), t, q)
    }

    /// sup_{|x| ≥ r} |ε(x)|.
    pub fn sup_abs_eps_beyond(&self, r: f64) -> f64 {
        let r = r.abs();
        let start = r.max(self.floor);
        let spec_sup = match &self.eps {
            EpsilonSpec::Zero => 0.0,
            EpsilonSpec::Power { k, gamma, k_left } => k.max(k_left.unwrap_or(*k)) / start.powf(*gamma),
            EpsilonSpec::Table { .. } => {
                let mut m = self.eps.eval(start).abs().max(self.eps.eval(-start).abs());
                for x in self.eps.knots() {
                    if x >= start {
                        m = m.max(self.eps.eval(x).abs()).max(self.eps.eval(-x).abs());
                    }
                }
                m
            }
        };
        if r >= self.floor {
            return spec_sup;
        }
        let mut m = spec_sup;
        let n = 2000;
        for i in 0..=n {
            let x = r + (self.floor - r) * i as f64 / n as f64;
            if x > 0.0 && x < self.floor {
                m = m.max(self.eps(x).abs()).max(self.eps(-x).abs());
            }
        }
        m
    }

    fn tail_quantile(&self, target: f64, right: bool) -> Result<f64> {
        let w = if right { 1.0 + self.beta } else { 1.0 - self.beta };
        if let EpsilonSpec::Zero = self.eps {
            return Ok((self.a * w / target).powf(1.0 / self.alpha));
        }
        let tail = |x: f64| if right { self.right_tail(x) } else { self.left_tail(x) };
        invert_decreasing_tail(tail, self.floor, target)
    }

    /// E[X·1_{(0,t)}(X)] via ∫₀ᵗ P(X > r) dr − t·P(X ≥ t).
    pub fn truncated_mean(&self, t: f64, q: &QuadConfig) -> Result<f64> {
        truncated_mean_generic(self, t, self.alpha, q, &self.breakpoints())
    }

    /// E[X·1_{(0,t)}(|X|)].
    pub fn signed_truncated_mean(&self, t: f64, q: &QuadConfig) -> Result<f64> {
        signed_truncated_mean_generic(self, t, self.alpha, q, &self.breakpoints())
    }
}

fn invert_decreasing_tail<F: Fn(f64) -> f64>(tail: F, floor: f64, target: f64) -> Result<f64> {
    if !(target > 0.0) {
        return Err(Error::RootFindFailure(format!("tail target {target} must be positive")));
    }
    let g = |s: f64| tail(s.exp()).ln() - target.ln();
    let mut lo = floor.ln();
    let mut hi = lo + 1.0;
    let mut g_lo = g(lo);
    if g_lo <= 0.0 {
        return Ok(floor);
    }
    let mut g_hi = g(hi);
    let mut steps = 0;
    while g_hi > 0.0 {
        lo = hi;
        g_lo = g_hi;
        hi += 2.0 * (hi - floor.ln()).max(1.0);
        g_hi = g(hi);
        steps += 1;
        if steps > 60 || !g_hi.is_finite() {
            return Err(Error::RootFindFailure(format!(
                "could not bracket tail level {target:e}"
            )));
        }
    }
    // Illinois variant of regula falsi on the log-log tail.
    let mut side = 0i8;
    for _ in 0..200 {
        let s = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
        let gs = g(s);
        if gs.abs() < 1e-14 || (hi - lo).abs() < 1e-14 * hi.abs().max(1.0) {
            return Ok(s.exp());
        }
        if gs > 0.0 {
            lo = s;
            g_lo = gs;
            if side == 1 {
                g_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = s;
            g_hi = gs;
            if side == -1 {
                g_lo *= 0.5;
            }
            side = -1;
        }
    }
    Err(Error::RootFindFailure(format!(
        "tail inversion did not converge at level {target:e}"
    )))
}

fn truncated_mean_generic<D: Distribution + ?Sized>(
    law: &D,
    t: f64,
    alpha: f64,
    q: &QuadConfig,
    breaks: &[f64],
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::OutOfRange(format!("truncation level must be positive, got {t}")));
    }
    let tol = q.tolerance.max(1e-12);
    let head_end = if t.is_finite() {
        t
    } else {
        breaks.iter().cloned().fold(1.0, f64::max) * E
    };
    let mut pts = vec![0.0];
    pts.extend(breaks.iter().cloned().filter(|&b| b > 0.0 && b < head_end));
    pts.push(head_end);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let head = adaptive_split(|r| law.survival(r), &pts, tol, 200);
    if t.is_finite() {
        let at = 1.0 - law.cdf_left(t);
        return Ok(head.value - t * at);
    }
    if alpha <= 1.0 {
        return Err(Error::OutOfRange(
            "the untruncated mean is infinite for alpha <= 1".into(),
        ));
    }
    let tail = log_panel_tail(|r| law.survival(r), head_end, tol, 20_000)
        .ok_or_else(|| Error::quad("tail integral of the survival function", f64::INFINITY, tol))?;
    Ok(head.value + tail.value)
}

fn signed_truncated_mean_generic<D: Distribution + ?Sized>(
    law: &D,
    t: f64,
    alpha: f64,
    q: &QuadConfig,
    breaks: &[f64],
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::OutOfRange(format!("truncation level must be positive, got {t}")));
    }
    let tol = q.tolerance.max(1e-12);
    let gap = |r: f64| law.survival(r) - law.cdf_left(-r);
    let head_end = if t.is_finite() {
        t
    } else {
        breaks.iter().cloned().fold(1.0, f64::max) * E
    };
    let mut pts = vec![0.0];
    pts.extend(breaks.iter().map(|b| b.abs()).filter(|&b| b > 0.0 && b < head_end));
    pts.push(head_end);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let head = adaptive_split(gap, &pts, tol, 200);
    if t.is_finite() {
        let at = (1.0 - law.cdf_left(t)) - law.cdf(-t);
        return Ok(head.value - t * at);
    }
    if alpha <= 1.0 {
        return Err(Error::OutOfRange(
            "the untruncated mean is infinite for alpha <= 1".into(),
        ));
    }
    let pos = log_panel_tail(|r| law.survival(r), head_end, tol, 20_000);
    let neg = log_panel_tail(|r| law.cdf_left(-r), head_end, tol, 20_000);
    match (pos, neg) {
        (Some(p), Some(n)) => Ok(head.value + p.value - n.value),
        _ => Err(Error::quad(
            "tail integral of the survival function",
            f64::INFINITY,
            tol,
        )),
    }
}

impl Distribution for AttractedLaw {
    fn id(&self) -> String {
        let eps = match &self.eps {
            EpsilonSpec::Zero => "zero".to_string(),
            EpsilonSpec::Power { k, gamma, k_left } => match k_left {
                Some(kl) => format!("power({k},{gamma},{kl})"),
                None => format!("power({k},{gamma})"),
            },
            EpsilonSpec::Table { right, .. } => format!("table({})", right.len()),
        };
        format!(
            "attracted(a={},A={},b={},eps={},floor={})",
            self.alpha, self.a, self.beta, eps, self.floor
        )
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= -self.floor {
            self.left_tail(-x)
        } else if x >= self.floor {
            1.0 - self.right_tail(x)
        } else {
            match self.bridge {
                Bridge::Linear => self.left_mass + (x + self.floor) / (2.0 * self.floor) * self.interior_mass(),
                Bridge::PointMass => {
                    if x < 0.0 {
                        self.left_mass
                    } else {
                        self.left_mass + self.interior_mass()
                    }
                }
            }
        }
    }

    fn cdf_left(&self, x: f64) -> f64 {
        match self.bridge {
            Bridge::PointMass if x == 0.0 => self.left_mass,
            _ => self.cdf(x),
        }
    }

    fn survival(&self, x: f64) -> f64 {
        if x >= self.floor {
            self.right_tail(x)
        } else {
            1.0 - self.cdf(x)
        }
    }

    fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::OutOfRange(format!("quantile level must lie in (0, 1), got {u}")));
        }
        if u <= self.left_mass {
            return Ok(-self.tail_quantile(u, false)?);
        }
        let s = 1.0 - u;
        if s < self.right_mass {
            return self.tail_quantile(s, true);
        }
        let m = self.interior_mass();
        if m == 0.0 {
            return Ok(if u - self.left_mass < 0.5 * (1.0 - self.left_mass - self.right_mass) {
                -self.floor
            } else {
                self.floor
            });
        }
        Ok(match self.bridge {
            Bridge::Linear => -self.floor + 2.0 * self.floor * (u - self.left_mass) / m,
            Bridge::PointMass => 0.0,
        })
    }

    fn draw(&self, rng: &mut dyn rand::RngCore) -> f64 {
        let u = open01(rng);
        if let (EpsilonSpec::Zero, true) = (&self.eps, self.interior_mass() == 0.0) {
            // Exact two-sided power law: fast path without root finding.
            return if u <= self.left_mass {
                -(self.a * (1.0 - self.beta) / u).powf(1.0 / self.alpha)
            } else {
                (self.a * (1.0 + self.beta) / (1.0 - u)).powf(1.0 / self.alpha)
            };
        }
        self.quantile(u).unwrap_or(0.0)
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut b = vec![-self.floor, self.floor];
        for k in self.eps.knots() {
            b.push(k);
            b.push(-k);
        }
        if self.bridge == Bridge::PointMass {
            b.push(0.0);
        }
        b.sort_by(|a, b| a.partial_cmp(b).unwrap());
        b.dedup();
        b
    }
}

/// Builds and validates a law with the given tail form.
pub fn make_attracted_law(alpha: f64, a: f64, beta: f64, eps: EpsilonSpec, support_floor: f64) -> Result<AttractedLaw> {
    make_attracted_law_with(
        alpha,
        a,
        beta,
        eps,
        support_floor,
        Bridge::Linear,
        &QuadConfig::default(),
    )
}

/// [`make_attracted_law`] with an explicit interior bridge and quadrature.
pub fn make_attracted_law_with(
    alpha: f64,
    a: f64,
    beta: f64,
    eps: EpsilonSpec,
    support_floor: f64,
    bridge: Bridge,
    q: &QuadConfig,
) -> Result<AttractedLaw> {
    StableParams::new(alpha, beta, 1.0)?;
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::OutOfRange(format!("tail constant A must be positive, got {a}")));
    }
    if !(support_floor > 0.0 && support_floor.is_finite()) {
        return Err(Error::OutOfRange(format!(
            "support floor must be positive, got {support_floor}"
        )));
    }
    eps.validate()?;
    let constants = normalizing_constants(alpha, a, q)?;
    let mut law = AttractedLaw {
        alpha,
        a,
        beta,
        eps,
        floor: support_floor,
        bridge,
        right_mass: 0.0,
        left_mass: 0.0,
        constants,
        bound: EpsBound { k: 0.0, gamma: 0.0 },
        mean: None,
    };
    let (r, l) = (law.right_tail(support_floor), law.left_tail(support_floor));
    if !(r >= 0.0 && l >= 0.0) {
        return Err(Error::InvalidCdf(format!(
            "negative tail mass at the floor (right {r}, left {l})"
        )));
    }
    if r + l > 1.0 + 1e-12 {
        return Err(Error::InvalidCdf(format!(
            "tail masses at the floor sum to {} > 1",
            r + l
        )));
    }
    law.right_mass = r;
    law.left_mass = l;
    // Monotone tails: dense log grid from the floor out to floor·1e12.
    let n = 10_000;
    let mut prev = (r, l);
    for i in 1..=n {
        let x = support_floor * (12.0 * std::f64::consts::LN_10 * i as f64 / n as f64).exp();
        let cur = (law.right_tail(x), law.left_tail(x));
        let slack = 1e-13 * prev.0.max(prev.1);
        if cur.0 > prev.0 + slack || cur.1 > prev.1 + slack || cur.0 < 0.0 || cur.1 < 0.0 {
            return Err(Error::InvalidCdf(format!("tail is not monotone near x = {x:e}")));
        }
        prev = cur;
    }
    law.bound = compute_eps_bound(&law);
    if alpha > 1.0 {
        law.mean = Some(law.signed_truncated_mean(f64::INFINITY, q)?);
    }
    Ok(law)
}

fn compute_eps_bound(law: &AttractedLaw) -> EpsBound {
    let (k_spec, gamma) = law.eps.spec_bound();
    let mut k = k_spec;
    let n = 4000;
    let lo = (law.floor * 1e-8).ln();
    let hi = law.floor.ln();
    for i in 0..n {
        let x = (lo + (hi - lo) * i as f64 / n as f64).exp();
        if x < law.floor {
            let w = x.powf(gamma);
            k = k.max(law.eps(x).abs() * w).max(law.eps(-x).abs() * w);
        }
    }
    // Outside the floor with a table the bound uses the sup over knots; the
    // power and zero kinds are exact there.
    EpsBound { k, gamma }
}

/// Symmetric Pareto law with density (α/2)|x|^{−1−α} on |x| ≥ 1.
pub fn make_pareto(alpha: f64) -> Result<AttractedLaw> {
    make_attracted_law(alpha, 0.5, 0.0, EpsilonSpec::Zero, 1.0)
}

/// The auxiliary law with exact tails A(1 ± β)/|x|^α beyond (2A)^{1/α} and
/// no interior mass.
pub fn auxiliary_law(alpha: f64, a: f64, beta: f64) -> Result<AttractedLaw> {
    let floor = (2.0 * a).powf(1.0 / alpha);
    let law = make_attracted_law(alpha, a, beta, EpsilonSpec::Zero, floor)?;
    let total = law.right_mass + law.left_mass;
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidCdf(format!(
            "auxiliary tails carry mass {total}, expected 1"
        )));
    }
    Ok(law)
}

/// Symmetric law with tails K₀(log|x|)^δ/|x|^α for |x| ≥ e.
#[derive(Debug, Clone, PartialEq)]
pub struct LogTailLaw {
    alpha: f64,
    delta: f64,
    k0: f64,
    side_mass: f64,
    d_alpha: f64,
}

impl LogTailLaw {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn k0(&self) -> f64 {
        self.k0
    }
    pub fn d_alpha(&self) -> f64 {
        self.d_alpha
    }
    /// σ̃ = (α/d_α)^{1/α}.
    pub fn sigma_tilde(&self) -> f64 {
        (self.alpha / self.d_alpha).powf(1.0 / self.alpha)
    }

    pub fn spec(&self) -> LawSpec {
        LawSpec::Logtail {
            alpha: self.alpha,
            delta: self.delta,
            k0: self.k0,
        }
    }

    /// P(X > x) for x ≥ e.
    fn tail(&self, x: f64) -> f64 {
        self.k0 * x.ln().powf(self.delta) / x.powf(self.alpha)
    }

    /// Density on |x| ≥ e.
    pub fn tail_density(&self, x: f64) -> f64 {
        let ax = x.abs();
        let l = ax.ln();
        self.k0 * (self.alpha * l.powf(self.delta) - self.delta * l.powf(self.delta - 1.0)) / ax.powf(self.alpha + 1.0)
    }

    pub fn truncated_mean(&self, t: f64, q: &QuadConfig) -> Result<f64> {
        truncated_mean_generic(self, t, self.alpha, q, &[E])
    }

    pub fn signed_truncated_mean(&self, t: f64, q: &QuadConfig) -> Result<f64> {
        signed_truncated_mean_generic(self, t, self.alpha, q, &[E])
    }
}

impl Distribution for LogTailLaw {
    fn id(&self) -> String {
        format!("logtail(a={},d={},K0={})", self.alpha, self.delta, self.k0)
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= -E {
            self.tail(-x)
        } else if x >= E {
            1.0 - self.tail(x)
        } else {
            self.side_mass + (x + E) / (2.0 * E) * (1.0 - 2.0 * self.side_mass)
        }
    }

    fn survival(&self, x: f64) -> f64 {
        if x >= E {
            self.tail(x)
        } else {
            1.0 - self.cdf(x)
        }
    }

    fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::OutOfRange(format!("quantile level must lie in (0, 1), got {u}")));
        }
        if u <= self.side_mass {
            return Ok(-invert_decreasing_tail(|x| self.tail(x), E, u)?);
        }
        if 1.0 - u < self.side_mass {
            return invert_decreasing_tail(|x| self.tail(x), E, 1.0 - u);
        }
        Ok(-E + 2.0 * E * (u - self.side_mass) / (1.0 - 2.0 * self.side_mass))
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![-E, E]
    }
}

/// Builds and validates a log-tail law.
pub fn make_logtail(alpha: f64, delta: f64, k0: f64) -> Result<LogTailLaw> {
    make_logtail_with(alpha, delta, k0, &QuadConfig::default())
}

pub fn make_logtail_with(alpha: f64, delta: f64, k0: f64, q: &QuadConfig) -> Result<LogTailLaw> {
    StableParams::new(alpha, 0.0, 1.0)?;
    if !(k0 > 0.0 && 2.0 * k0 <= 1.0) {
        return Err(Error::OutOfRange(format!("K0 must satisfy 0 < 2K0 <= 1, got {k0}")));
    }
    if !delta.is_finite() {
        return Err(Error::OutOfRange("delta must be finite".into()));
    }
    let law = LogTailLaw {
        alpha,
        delta,
        k0,
        side_mass: k0 * (-alpha).exp(),
        d_alpha: d_alpha(alpha, q)?,
    };
    let n = 10_000;
    let mut prev = law.tail(E);
    for i in 0..=n {
        let x = E * (30.0 * i as f64 / n as f64).exp();
        let d = law.tail_density(x);
        if d < 0.0 {
            return Err(Error::InvalidDensity(format!(
                "density is negative at x = {x:.4} (needs alpha >= delta at the support edge)"
            )));
        }
        let t = law.tail(x);
        if t > prev * (1.0 + 1e-13) {
            return Err(Error::InvalidDensity(format!("tail increases near x = {x:e}")));
        }
        prev = t;
    }
    Ok(law)
}

/// Degenerate law X ≡ c.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMass {
    pub at: f64,
}

impl PointMass {
    pub fn truncated_mean(&self, t: f64, q: &QuadConfig) -> Result<f64> {
        truncated_mean_generic(self, t, 2.0 - 1e-9, q, &[self.at])
    }
}

impl Distribution for PointMass {
    fn id(&self) -> String {
        format!("point({})", self.at)
    }
    fn cdf(&self, x: f64) -> f64 {
        if x >= self.at {
            1.0
        } else {
            0.0
        }
    }
    fn cdf_left(&self, x: f64) -> f64 {
        if x > self.at {
            1.0
        } else {
            0.0
        }
    }
    fn quantile(&self, _u: f64) -> Result<f64> {
        Ok(self.at)
    }
    fn breakpoints(&self) -> Vec<f64> {
        vec![self.at]
    }
}

/// Any law the crate can sample and normalize.
#[derive(Debug, Clone, PartialEq)]
pub enum Law {
    Attracted(AttractedLaw),
    LogTail(LogTailLaw),
}

impl Law {
    pub fn from_spec(spec: &LawSpec, q: &QuadConfig) -> Result<Law> {
        Ok(match spec {
            LawSpec::Pareto { alpha } => Law::Attracted(make_attracted_law_with(
                *alpha,
                0.5,
                0.0,
                EpsilonSpec::Zero,
                1.0,
                Bridge::Linear,
                q,
            )?),
            LawSpec::Attracted {
                alpha,
                a,
                beta,
                eps,
                support_floor,
                bridge,
            } => Law::Attracted(make_attracted_law_with(
                *alpha,
                *a,
                *beta,
                eps.clone(),
                *support_floor,
                *bridge,
                q,
            )?),
            LawSpec::Logtail { alpha, delta, k0 } => Law::LogTail(make_logtail_with(*alpha, *delta, *k0, q)?),
        })
    }

    pub fn spec(&self) -> LawSpec {
        match self {
            Law::Attracted(l) => l.spec(),
            Law::LogTail(l) => l.spec(),
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            Law::Attracted(l) => l.alpha,
            Law::LogTail(l) => l.alpha,
        }
    }

    pub fn beta(&self) -> f64 {
        match self {
            Law::Attracted(l) => l.beta,
            Law::LogTail(_) => 0.0,
        }
    }

    /// Limit law of the normalized sums.
    pub fn limit(&self) -> StableParams {
        StableParams::new(self.alpha(), self.beta(), 1.0).expect("validated at construction")
    }

    pub fn as_attracted(&self) -> Option<&AttractedLaw> {
        match self {
            Law::Attracted(l) => Some(l),
            Law::LogTail(_) => None,
        }
    }

    fn dist(&self) -> &dyn Distribution {
        match self {
            Law::Attracted(l) => l,
            Law::LogTail(l) => l,
        }
    }

    /// Centering c_n and divisor of the normalized sum of n summands.
    pub fn normalization(&self, n: usize, q: &QuadConfig) -> Result<(f64, f64)> {
        let nf = n as f64;
        match self {
            Law::Attracted(l) => {
                let scale = l.sigma() * nf.powf(1.0 / l.alpha);
                let centering = if l.alpha > 1.0 {
                    nf * l.mean.unwrap_or(0.0)
                } else if l.alpha == 1.0 {
                    nf * l.signed_truncated_mean(scale, q)?
                } else {
                    0.0
                };
                Ok((centering, scale))
            }
            Law::LogTail(l) => {
                let g = gamma_n(l.alpha, l.delta, l.k0, n.max(2))?;
                Ok((0.0, l.sigma_tilde() * g.gamma))
            }
        }
    }
}

impl Distribution for Law {
    fn id(&self) -> String {
        self.dist().id()
    }
    fn cdf(&self, x: f64) -> f64 {
        self.dist().cdf(x)
    }
    fn cdf_left(&self, x: f64) -> f64 {
        self.dist().cdf_left(x)
    }
    fn survival(&self, x: f64) -> f64 {
        self.dist().survival(x)
    }
    fn quantile(&self, u: f64) -> Result<f64> {
        self.dist().quantile(u)
    }
    fn draw(&self, rng: &mut dyn rand::RngCore) -> f64 {
        self.dist().draw(rng)
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.dist().breakpoints()
    }
}

/// `n` i.i.d. draws from `law`; deterministic in `(law, n, seed)`.
pub fn sample_law<D: Distribution + ?Sized>(law: &D, n: usize, seed: u64) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::OutOfRange("sample size must be at least 1".into()));
    }
    let mut values = vec![0.0; n];
    fill_blocks(&mut values, seed, |rng, out| {
        for v in out.iter_mut() {
            *v = law.draw(rng);
        }
    });
    SampleBatch::new(values, seed, law.id())
}

/// How the raw sum was centered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    Mean,
    TruncatedMean,
    None,
}

/// Realizations of the normalized sum S_n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedSumBatch {
    pub values: Vec<f64>,
    pub n: usize,
    pub centering: Centering,
    pub seed: u64,
}

impl NormalizedSumBatch {
    pub fn into_batch(self, law_id: &str) -> Result<SampleBatch> {
        SampleBatch::new(self.values, self.seed, format!("S_{}[{law_id}]", self.n))
    }
}

/// `m` realizations of (X₁ + … + Xₙ − c_n)/(σ n^{1/α}); for log-tail laws
/// the divisor is σ̃ γ_n and no centering is applied.
pub fn build_sn(law: &Law, n: usize, m: usize, seed: u64, q: &QuadConfig) -> Result<NormalizedSumBatch> {
    if n == 0 || m == 0 {
        return Err(Error::OutOfRange("n and the batch count must be at least 1".into()));
    }
    let (centering, scale) = law.normalization(n, q)?;
    let kind = match law {
        Law::Attracted(l) if l.alpha > 1.0 => Centering::Mean,
        Law::Attracted(l) if l.alpha == 1.0 => Centering::TruncatedMean,
        _ => Centering::None,
    };
    let mut values = vec![0.0; m];
    fill_blocks(&mut values, seed, |rng, out| {
        for v in out.iter_mut() {
            let mut s = 0.0;
            for _ in 0..n {
                s += law.draw(rng);
            }
            *v = (s - centering) / scale;
        }
    });
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::OutOfRange("normalized sum overflowed".into()));
    }
    Ok(NormalizedSumBatch {
        values,
        n,
        centering: kind,
        seed,
    })
}

/// Solution of n/γ^α = 1/(2K₀(log γ)^δ) with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaN {
    pub gamma: f64,
    /// n·2K₀(log γ)^δ/γ^α − 1.
    pub residual: f64,
    /// (2K₀ n)^{1/α}.
    pub base: f64,
    /// Whether base ≤ γ ≤ base·(log γ)^{max(δ, δ/α)} holds (δ ≥ 0) or the
    /// mirrored inequality (δ < 0).
    pub sandwich_holds: bool,
}

/// The normalizing level γ_n of the log-tail family.
pub fn gamma_n(alpha: f64, delta: f64, k0: f64, n: usize) -> Result<GammaN> {
    if n < 2 {
        return Err(Error::OutOfRange("gamma_n needs n >= 2".into()));
    }
    let nf = n as f64;
    let target = (2.0 * k0 * nf).ln();
    // h(L) = αL − δ ln L − ln(2K₀n) with L = ln γ.
    let h = |l: f64| alpha * l - delta * l.ln() - target;
    let gamma = if delta == 0.0 {
        (target / alpha).exp()
    } else {
        let mut lo = 1.0f64.max(delta / alpha);
        let mut hi = (2.0 / alpha) * nf.ln() + 2.0;
        let mut widen = 0;
        while h(hi) < 0.0 {
            hi *= 2.0;
            widen += 1;
            if widen > 200 {
                return Err(Error::RootFindFailure("could not bracket gamma_n".into()));
            }
        }
        if h(lo) > 0.0 {
            if delta < 0.0 {
                // Widen toward the origin of L for negative δ.
                while h(lo) > 0.0 && lo > 1e-12 {
                    lo *= 0.5;
                }
            }
            if h(lo) > 0.0 {
                return Err(Error::RootFindFailure(format!(
                    "no root of the gamma_n equation above e for n={n}"
                )));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 * hi {
                break;
            }
        }
        // Secant polish.
        let (mut a, mut b) = (lo, hi);
        for _ in 0..8 {
            let (ha, hb) = (h(a), h(b));
            if hb == ha {
                break;
            }
            let c = b - hb * (b - a) / (hb - ha);
            a = b;
            b = c;
            if h(b).abs() < 1e-15 {
                break;
            }
        }
        b.exp()
    };
    let residual = nf * 2.0 * k0 * gamma.ln().powf(delta) / gamma.powf(alpha) - 1.0;
    if residual.abs() >= 1e-10 {
        return Err(Error::RootFindFailure(format!(
            "gamma_n residual {residual:e} too large"
        )));
    }
    let base = (2.0 * k0 * nf).powf(1.0 / alpha);
    let lg = gamma.ln();
    let sandwich_holds = if delta >= 0.0 {
        let upper = base * lg.powf(delta.max(delta / alpha));
        gamma >= base * (1.0 - 1e-12) && gamma <= upper * (1.0 + 1e-12)
    } else {
        let lower = base * lg.powf(delta.min(delta / alpha));
        gamma <= base * (1.0 + 1e-12) && gamma >= lower * (1.0 - 1e-12)
    };
    Ok(GammaN {
        gamma,
        residual,
        base,
        sandwich_holds,
    })
}
