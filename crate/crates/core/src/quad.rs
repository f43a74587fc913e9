//! Adaptive Gauss–Kronrod quadrature, panel sums with Wynn epsilon
//! extrapolation, and Gauss–Legendre rules.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Controls for every singular or oscillatory integral in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadConfig {
    /// Radius of the Taylor-compensated zone around the singularity.
    pub inner_radius: f64,
    /// Initial tail cutoff for integrands with no known tail structure.
    pub tail_cutoff: f64,
    /// Absolute tolerance target.
    pub tolerance: f64,
    /// Upper limit on panels (and adaptive subintervals) per integral.
    pub max_panels: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            inner_radius: 0.5,
            tail_cutoff: 64.0,
            tolerance: 1e-9,
            max_panels: 4000,
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.inner_radius > 0.0
            && self.inner_radius <= 1.0
            && self.tail_cutoff >= 1.0
            && self.tolerance > 0.0
            && self.tolerance.is_finite()
            && self.max_panels >= 16;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "quadrature config requires 0 < inner_radius <= 1 <= tail_cutoff, tolerance > 0, max_panels >= 16; got {self:?}"
            )))
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }
}

/// An integral value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn new(value: f64, error: f64) -> Self {
        Self { value, error }
    }
    pub fn exact(value: f64) -> Self {
        Self { value, error: 0.0 }
    }
}

impl std::ops::Add for Estimate {
    type Output = Estimate;
    fn add(self, rhs: Estimate) -> Estimate {
        Estimate::new(self.value + rhs.value, self.error + rhs.error)
    }
}

impl std::ops::AddAssign for Estimate {
    fn add_assign(&mut self, rhs: Estimate) {
        self.value += rhs.value;
        self.error += rhs.error;
    }
}

impl std::ops::Mul<f64> for Estimate {
    type Output = Estimate;
    fn mul(self, c: f64) -> Estimate {
        Estimate::new(self.value * c, self.error * c.abs())
    }
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_352,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_5,
    0.149_445_554_002_916_9,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_36,
    0.295_524_224_714_752_9,
];

/// One 21-point Gauss–Kronrod panel with the QUADPACK error heuristic.
pub fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Estimate {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let h = half.abs();
    let value = res_k * half;
    res_asc *= h;
    res_abs *= h;
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (1.0f64).min((200.0 * err / res_asc).powf(1.5));
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Estimate::new(value, err)
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    est: Estimate,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.est.error == other.est.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.est.error.partial_cmp(&other.est.error).unwrap_or(Ordering::Equal)
    }
}

/// Globally adaptive bisection on the worst segment until the summed error
/// estimate drops below `max(abs_tol, rel_tol·|I|)` or `max_segments` is hit.
/// The returned estimate is the best available; callers decide acceptance.
pub fn adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> Estimate {
    if a == b {
        return Estimate::exact(0.0);
    }
    let first = gk21(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, est: first });
    let mut total = first;
    let mut count = 1;
    while total.error > abs_tol.max(rel_tol * total.value.abs()) && count < max_segments {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            heap.push(worst);
            break;
        }
        let left = gk21(&mut f, worst.a, mid);
        let right = gk21(&mut f, mid, worst.b);
        total.value += left.value + right.value - worst.est.value;
        total.error += left.error + right.error - worst.est.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            est: left,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            est: right,
        });
        count += 1;
    }
    // Re-sum to remove accumulated cancellation in the running totals.
    let mut value = 0.0;
    let mut error = 0.0;
    for s in heap.iter() {
        value += s.est.value;
        error += s.est.error;
    }
    if !value.is_finite() {
        error = f64::INFINITY;
    }
    Estimate::new(value, error)
}

/// Adaptive integration over consecutive breakpoints, splitting the tolerance
/// evenly. `points` must be sorted; duplicates are skipped.
pub fn adaptive_split<F: FnMut(f64) -> f64>(mut f: F, points: &[f64], abs_tol: f64, max_segments: usize) -> Estimate {
    let pieces = points.windows(2).filter(|w| w[1] > w[0]).count().max(1);
    let tol = abs_tol / pieces as f64;
    let mut total = Estimate::default();
    for w in points.windows(2) {
        if w[1] > w[0] {
            total += adaptive(&mut f, w[0], w[1], tol, 0.0, max_segments);
        }
    }
    total
}

/// Wynn's epsilon extrapolation of the limit of a sequence of partial sums.
/// Returns the extrapolated value and the gap between the two most recent
/// extrapolations as an error proxy.
pub fn wynn_epsilon(partial: &[f64]) -> Estimate {
    let n = partial.len();
    if n < 3 {
        let last = partial.last().copied().unwrap_or(0.0);
        let prev = if n >= 2 { partial[n - 2] } else { 0.0 };
        return Estimate::new(last, (last - prev).abs());
    }
    let current = epsilon_table(partial);
    let previous = epsilon_table(&partial[..n - 1]);
    Estimate::new(current, (current - previous).abs())
}

fn epsilon_table(s: &[f64]) -> f64 {
    let n = s.len();
    let mut prev = vec![0.0; n + 1];
    let mut cur: Vec<f64> = s.to_vec();
    let mut best = *s.last().unwrap();
    let mut col = 0usize;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for k in 0..cur.len() - 1 {
            let diff = cur[k + 1] - cur[k];
            if diff == 0.0 || !diff.is_finite() {
                return if col % 2 == 0 { cur[k + 1] } else { best };
            }
            next.push(prev[k + 1] + 1.0 / diff);
        }
        col += 1;
        prev = cur;
        cur = next;
        if col % 2 == 0 {
            let v = *cur.last().unwrap();
            if v.is_finite() {
                best = v;
            }
        }
    }
    best
}

/// Sums `panel(k)` for k = 0, 1, … where the panels form a convergent,
/// typically alternating, series. Stops once the Wynn extrapolation is stable
/// to `tol` or the panels themselves become negligible.
pub fn panel_series<F: FnMut(usize) -> Estimate>(mut panel: F, tol: f64, max_panels: usize) -> Option<Estimate> {
    const WINDOW: usize = 48;
    let mut partial: Vec<f64> = Vec::new();
    let mut sum = 0.0;
    let mut quad_err = 0.0;
    let mut recent = [f64::INFINITY; 4];
    let mut last_ext: Option<f64> = None;
    let mut stable = 0usize;
    for k in 0..max_panels {
        let p = panel(k);
        if !p.value.is_finite() {
            return None;
        }
        sum += p.value;
        quad_err += p.error;
        partial.push(sum);
        recent[k % 4] = p.value.abs();
        let tail_small = recent.iter().all(|&r| r < 0.01 * tol);
        if tail_small && k >= 4 {
            return Some(Estimate::new(
                sum,
                quad_err + 4.0 * recent.iter().cloned().fold(0.0, f64::max),
            ));
        }
        if k >= 5 {
            let start = partial.len().saturating_sub(WINDOW);
            let ext = wynn_epsilon(&partial[start..]);
            if let Some(prev) = last_ext {
                let gap = (ext.value - prev).abs().max(ext.error);
                if gap < 0.25 * tol {
                    stable += 1;
                    if stable >= 2 {
                        return Some(Estimate::new(ext.value, quad_err + gap));
                    }
                } else {
                    stable = 0;
                }
            }
            last_ext = Some(ext.value);
        }
    }
    None
}

/// ∫_start^∞ g(r) dr for a nonnegative-ish integrand with power or slower
/// decay, summed over logarithmic panels [start·e^k, start·e^{k+1}]. Once
/// panels shrink geometrically, the remaining geometric tail is added.
pub fn log_panel_tail<F: FnMut(f64) -> f64>(mut g: F, start: f64, tol: f64, max_panels: usize) -> Option<Estimate> {
    assert!(start > 0.0);
    let mut total = Estimate::default();
    let mut prev: Option<f64> = None;
    let ls = start.ln();
    for k in 0..max_panels {
        let a = (ls + k as f64).exp();
        let b = (ls + k as f64 + 1.0).exp();
        let p = adaptive(&mut g, a, b, tol * 1e-2, 1e-12, 100);
        if !p.value.is_finite() {
            return None;
        }
        total += p;
        if let Some(q) = prev {
            let ratio = if q != 0.0 { p.value / q } else { 0.0 };
            if (0.0..0.999).contains(&ratio) {
                let rest = p.value * ratio / (1.0 - ratio);
                if rest.abs() < tol {
                    return Some(Estimate::new(total.value + rest, total.error + rest.abs()));
                }
            } else if p.value == 0.0 {
                return Some(total);
            }
        }
        prev = Some(p.value);
    }
    None
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped onto [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    (x.iter().map(|t| c + h * t).collect(), w.iter().map(|v| v * h).collect())
}
