//! Kolmogorov and Wasserstein-type distances between samples and stable laws.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{adaptive_split, QuadConfig};
use crate::smooth::{SmoothFn, TailBehavior};
use crate::stable::{stable_cdf, stable_pdf, SampleBatch, StableParams};

/// Batches up to this size get the exact distribution function per point.
const EXACT_KS_LIMIT: usize = 4096;
/// Largest admissible certified interpolation error of a [`CdfTable`].
const TABLE_TOLERANCE: f64 = 1e-7;

/// Cubic Hermite table of a stable distribution function on x = σ sinh(v),
/// with exact values and densities at the nodes. The interpolation error is
/// measured at every interval midpoint against the exact function.
#[derive(Debug, Clone)]
pub struct CdfTable {
    params: StableParams,
    reach: f64,
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
    certified_error: f64,
    q: QuadConfig,
}

impl CdfTable {
    pub fn build(p: &StableParams, q: &QuadConfig) -> Result<Self> {
        let reach = 1e6f64.asinh();
        let step = 4e-3;
        let nodes = (2.0 * reach / step).ceil() as usize;
        let step = 2.0 * reach / nodes as f64;
        let s = p.sigma();
        let pairs: Vec<(f64, f64)> = (0..=nodes)
            .into_par_iter()
            .map(|j| {
                let v = -reach + j as f64 * step;
                let x = s * v.sinh();
                Ok((stable_cdf(p, x, q)?, stable_pdf(p, 1.0, x, q)? * s * v.cosh()))
            })
            .collect::<Result<_>>()?;
        let (values, slopes) = pairs.into_iter().unzip();
        let mut table = Self {
            params: *p,
            reach,
            step,
            values,
            slopes,
            certified_error: 0.0,
            q: *q,
        };
        let err = (0..nodes)
            .into_par_iter()
            .map(|j| {
                let v = -reach + (j as f64 + 0.5) * step;
                let x = s * v.sinh();
                Ok((table.interpolate(v) - stable_cdf(p, x, q)?).abs())
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        if err > TABLE_TOLERANCE {
            return Err(Error::quad("distribution function table", err, TABLE_TOLERANCE));
        }
        table.certified_error = err;
        Ok(table)
    }

    /// Largest interpolation error found at the interval midpoints.
    pub fn certified_error(&self) -> f64 {
        self.certified_error
    }

    pub fn params(&self) -> &StableParams {
        &self.params
    }

    fn interpolate(&self, v: f64) -> f64 {
        let pos = (v + self.reach) / self.step;
        let j = (pos.floor() as usize).min(self.values.len() - 2);
        let t = pos - j as f64;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let y = h00 * self.values[j]
            + h10 * self.step * self.slopes[j]
            + h01 * self.values[j + 1]
            + h11 * self.step * self.slopes[j + 1];
        y.clamp(0.0, 1.0)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let v = (x / self.params.sigma()).asinh();
        if v.abs() >= self.reach {
            return stable_cdf(&self.params, x, &self.q);
        }
        Ok(self.interpolate(v))
    }
}

/// A Kolmogorov statistic with the distribution function at the point
/// where the supremum is attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsStatistic {
    pub value: f64,
    pub cdf_at_max: f64,
}

impl KsStatistic {
    /// Binomial standard error √(F(1−F)/m) of the empirical distribution
    /// function at the maximizing point.
    pub fn stderr(&self, m: usize) -> f64 {
        (self.cdf_at_max * (1.0 - self.cdf_at_max) / m as f64).sqrt()
    }
}

/// sup_x |F_m(x) − F(x)| for the empirical function F_m of `values`.
pub fn ks_statistic<F>(values: &[f64], cdf: F) -> Result<KsStatistic>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if values.is_empty() {
        return Err(Error::OutOfRange("Kolmogorov distance of an empty batch".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let m = sorted.len() as f64;
    let fs: Vec<f64> = sorted.par_iter().map(|&x| cdf(x)).collect::<Result<_>>()?;
    let mut best = KsStatistic {
        value: 0.0,
        cdf_at_max: 0.5,
    };
    for (i, &f) in fs.iter().enumerate() {
        let g = ((i + 1) as f64 / m - f).max(f - i as f64 / m);
        if g > best.value {
            best = KsStatistic {
                value: g,
                cdf_at_max: f,
            };
        }
    }
    Ok(best)
}

/// One-sample Kolmogorov distance between a batch and a stable law.
pub fn kolmogorov_distance(batch: &SampleBatch, p: &StableParams, q: &QuadConfig) -> Result<f64> {
    if batch.len() <= EXACT_KS_LIMIT {
        Ok(ks_statistic(&batch.values, |x| stable_cdf(p, x, q))?.value)
    } else {
        kolmogorov_distance_table(batch, &CdfTable::build(p, q)?)
    }
}

/// [`kolmogorov_distance`] through a prebuilt table; accurate to the table's
/// certified error.
pub fn kolmogorov_distance_table(batch: &SampleBatch, table: &CdfTable) -> Result<f64> {
    Ok(ks_statistic(&batch.values, |x| table.eval(x))?.value)
}

/// (1/m) Σ |A₍ᵢ₎ − B₍ᵢ₎| over order statistics.
pub fn wasserstein1_empirical(a: &SampleBatch, b: &SampleBatch) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let sorted = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(|x, y| x.total_cmp(y));
        s
    };
    let (sa, sb) = (sorted(&a.values), sorted(&b.values));
    Ok(sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum::<f64>() / sa.len() as f64)
}

/// The smoothed indicator of (−∞, x] with transition width 1/ρ, ρ > 1.
pub fn smoothed_indicator(x: f64, rho: f64) -> Result<SmoothFn> {
    if !(rho > 1.0) {
        return Err(Error::OutOfRange(format!("rho must exceed 1, got {rho}")));
    }
    SmoothFn::smoothed_indicator(x, rho)
}

/// Kolmogorov-rate shape implied by a smooth Wasserstein distance: dW^{1/4}
/// for α ≥ 1 and dW^{1/3} for α < 1, without the unknown constant.
pub fn kol_from_smooth_w(dw: f64, alpha: f64) -> Result<f64> {
    if !(dw >= 0.0) {
        return Err(Error::OutOfRange(format!("distance must be nonnegative, got {dw}")));
    }
    Ok(if alpha >= 1.0 { dw.powf(0.25) } else { dw.cbrt() })
}

/// Shape of a dictionary member; the amplitude is always the largest that
/// keeps the first k+1 derivative norms at most 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DictionaryKind {
    /// Smooth step at `center` with steepness `scale`.
    Step,
    /// cos(scale·x + center).
    Cosine,
    /// Gaussian bump at `center` with width `scale`.
    Bump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DictionaryEntry {
    pub kind: DictionaryKind,
    pub scale: f64,
    #[serde(default)]
    pub center: f64,
}

impl DictionaryEntry {
    fn build(&self, order: usize) -> Result<SmoothFn> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::OutOfRange(format!(
                "dictionary scale must be positive, got {}",
                self.scale
            )));
        }
        let shape = match self.kind {
            DictionaryKind::Step => SmoothFn::smooth_step(self.center, self.scale, 1.0)?,
            DictionaryKind::Cosine => SmoothFn::cosine(self.scale, self.center, 1.0)?,
            DictionaryKind::Bump => SmoothFn::gaussian_bump(self.center, self.scale)?,
        };
        let mut largest: f64 = 0.0;
        for j in 0..=order {
            largest = largest.max(shape.norm(j)?);
        }
        let amplitude = 1.0 / largest;
        Ok(match self.kind {
            DictionaryKind::Step => SmoothFn::smooth_step(self.center, self.scale, amplitude)?,
            DictionaryKind::Cosine => SmoothFn::cosine(self.scale, self.center, amplitude)?,
            DictionaryKind::Bump => SmoothFn::combination(&[(amplitude, shape)])?,
        })
    }
}

/// A finite family of test functions whose derivatives of order 0..=k are
/// bounded by 1.
#[derive(Debug, Clone)]
pub struct TestDictionary {
    order: usize,
    entries: Vec<DictionaryEntry>,
    members: Vec<SmoothFn>,
}

/// JSON form of a dictionary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionarySpec {
    pub order: usize,
    pub members: Vec<DictionaryEntry>,
}

impl TestDictionary {
    pub fn new(order: usize, entries: Vec<DictionaryEntry>) -> Result<Self> {
        if order > 3 {
            return Err(Error::OutOfRange(format!(
                "dictionary order must be at most 3, got {order}"
            )));
        }
        let members = entries.iter().map(|e| e.build(order)).collect::<Result<Vec<_>>>()?;
        for m in &members {
            for j in 0..=order {
                let n = m.norm(j)?;
                if n > 1.0 + 1e-12 {
                    return Err(Error::InvalidConfig(format!(
                        "member {} has derivative {j} norm {n} > 1",
                        m.name()
                    )));
                }
            }
        }
        Ok(Self {
            order,
            entries,
            members,
        })
    }

    pub fn from_spec(spec: &DictionarySpec) -> Result<Self> {
        Self::new(spec.order, spec.members.clone())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_spec(&serde_json::from_str(text)?)
    }

    pub fn spec(&self) -> DictionarySpec {
        DictionarySpec {
            order: self.order,
            members: self.entries.clone(),
        }
    }

    /// Steps of steepness 1 and 2 centered on a grid over [−4, 4], cosines of
    /// frequency 0.25 to 2 in both phases, and bumps of width 0.5 and 1.
    pub fn standard(order: usize) -> Result<Self> {
        let mut entries = Vec::new();
        for i in 0..=16 {
            let center = -4.0 + 0.5 * i as f64;
            for scale in [1.0, 2.0] {
                entries.push(DictionaryEntry {
                    kind: DictionaryKind::Step,
                    scale,
                    center: center - 0.5 / scale,
                });
            }
            for scale in [0.5, 1.0] {
                entries.push(DictionaryEntry {
                    kind: DictionaryKind::Bump,
                    scale,
                    center,
                });
            }
        }
        for scale in [0.25, 0.5, 1.0, 2.0] {
            for center in [0.0, -std::f64::consts::FRAC_PI_2] {
                entries.push(DictionaryEntry {
                    kind: DictionaryKind::Cosine,
                    scale,
                    center,
                });
            }
        }
        Self::new(order, entries)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn members(&self) -> &[SmoothFn] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Adds one member.
    pub fn push(&mut self, entry: DictionaryEntry) -> Result<()> {
        let f = entry.build(self.order)?;
        self.entries.push(entry);
        self.members.push(f);
        Ok(())
    }
}

/// What a batch is compared against.
#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    Stable(&'a StableParams),
    Sample(&'a SampleBatch),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothDistance {
    pub value: f64,
    /// Index of the maximizing member.
    pub member: usize,
    pub member_name: String,
}

/// E h(Y) for Y ~ S_α(σ, β). Cosines use the characteristic function;
/// other members are integrated by parts against the distribution function:
/// E h(Y) = h(∞) − ∫ h′(x) F(x) dx.
pub fn stable_expectation(h: &SmoothFn, p: &StableParams, q: &QuadConfig) -> Result<f64> {
    if let Some(c) = h.constant_value() {
        return Ok(c);
    }
    if let TailBehavior::Periodic { period, mean } = h.tail() {
        // h = c + a cos λx + b sin λx, checked before using E e^{iλY}.
        let lambda = 2.0 * std::f64::consts::PI / period;
        let a = h.eval(0.0) - mean;
        let b = h.eval(period / 4.0) - mean;
        let fit = |x: f64| mean + a * (lambda * x).cos() + b * (lambda * x).sin();
        let size = h.norm(0).unwrap_or(1.0).max(1.0);
        if (1..8).any(|i| {
            let x = period * (0.137 * i as f64);
            (h.eval(x) - fit(x)).abs() > 1e-10 * size
        }) {
            return Err(Error::UnsupportedForm(format!(
                "{} is periodic but not a single harmonic",
                h.name()
            )));
        }
        let phi = (-p.char_exponent(lambda)).exp();
        return Ok(mean + a * phi.re + b * phi.im);
    }
    let pts: Vec<f64> = match h.tail() {
        TailBehavior::Constant {
            left_end, right_start, ..
        } => {
            let pieces = 64;
            (0..=pieces)
                .map(|i| left_end + (right_start - left_end) * i as f64 / pieces as f64)
                .collect()
        }
        _ => {
            let reach = 1e3f64.asinh();
            (0..=400).map(|i| (-reach + reach * i as f64 / 200.0).sinh()).collect()
        }
    };
    let hi = *pts.last().unwrap();
    let mut err = None;
    let est = adaptive_split(
        |x| match stable_cdf(p, x, q) {
            Ok(f) => h.d1(x) * f,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        },
        &pts,
        1e-9,
        2000,
    );
    if let Some(e) = err {
        return Err(e);
    }
    if est.error > 1e-6 {
        return Err(Error::quad("stable expectation", est.error, 1e-6));
    }
    Ok(h.eval(hi) - est.value)
}

/// E_target h for every dictionary member.
pub fn target_expectations(dict: &TestDictionary, target: Target<'_>, q: &QuadConfig) -> Result<Vec<f64>> {
    dict.members
        .par_iter()
        .map(|h| match target {
            Target::Stable(p) => stable_expectation(h, p, q),
            Target::Sample(b) => Ok(sample_mean(h, &b.values)),
        })
        .collect()
}

fn sample_mean(h: &SmoothFn, v: &[f64]) -> f64 {
    v.iter().map(|&x| h.eval(x)).sum::<f64>() / v.len() as f64
}

/// max over the dictionary of |mean_A h − E_target h|, a lower bound for the
/// smooth Wasserstein distance of the dictionary's order.
pub fn smooth_wasserstein_lb(
    batch: &SampleBatch,
    target: Target<'_>,
    order: usize,
    dict: &TestDictionary,
    q: &QuadConfig,
) -> Result<SmoothDistance> {
    if dict.order != order {
        return Err(Error::OutOfRange(format!(
            "dictionary order {} differs from the requested order {order}",
            dict.order
        )));
    }
    let expected = target_expectations(dict, target, q)?;
    smooth_wasserstein_lb_from(batch, &expected, dict)
}

/// [`smooth_wasserstein_lb`] with precomputed target expectations.
pub fn smooth_wasserstein_lb_from(
    batch: &SampleBatch,
    expected: &[f64],
    dict: &TestDictionary,
) -> Result<SmoothDistance> {
    if dict.is_empty() {
        return Err(Error::OutOfRange("empty test dictionary".into()));
    }
    if expected.len() != dict.len() {
        return Err(Error::SizeMismatch {
            left: expected.len(),
            right: dict.len(),
        });
    }
    let gaps: Vec<f64> = dict
        .members
        .par_iter()
        .zip(expected.par_iter())
        .map(|(h, e)| (sample_mean(h, &batch.values) - e).abs())
        .collect();
    let (member, value) =
        gaps.iter().copied().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, g)| if g > acc.1 { (i, g) } else { acc },
        );
    Ok(SmoothDistance {
        value,
        member,
        member_name: dict.members[member].name().to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stable::sample_stable;

    fn batch(v: Vec<f64>) -> SampleBatch {
        SampleBatch::new(v, 0, "test").unwrap()
    }

    #[test]
    fn single_point_at_median() {
        let p = StableParams::standard(1.5, 0.0).unwrap();
        let d = kolmogorov_distance(&batch(vec![0.0]), &p, &QuadConfig::default()).unwrap();
        assert!((d - 0.5).abs() < 1e-9);
    }

    #[test]
    fn shifted_cauchy_is_far() {
        let p = StableParams::standard(1.0, 0.0).unwrap();
        let b = sample_stable(&p, 2000, 3).unwrap();
        let shifted = batch(b.values.iter().map(|x| x + 10.0).collect());
        let d = kolmogorov_distance(&shifted, &p, &QuadConfig::default()).unwrap();
        assert!(d > 0.4, "{d}");
    }

    #[test]
    fn table_matches_exact() {
        let q = QuadConfig::default();
        let p = StableParams::standard(0.5, 1.0).unwrap();
        let t = CdfTable::build(&p, &q).unwrap();
        assert!(t.certified_error() < TABLE_TOLERANCE);
        for x in [-3.0, 0.01, 0.3, 2.0, 50.0, 3e6] {
            assert!((t.eval(x).unwrap() - stable_cdf(&p, x, &q).unwrap()).abs() < 1e-7);
        }
    }

    #[test]
    fn wasserstein_examples() {
        assert_eq!(
            wasserstein1_empirical(&batch(vec![0.0, 0.0]), &batch(vec![1.0, 1.0])).unwrap(),
            1.0
        );
        assert_eq!(
            wasserstein1_empirical(&batch(vec![2.0, 0.0]), &batch(vec![1.0, 3.0])).unwrap(),
            1.0
        );
        assert!(matches!(
            wasserstein1_empirical(&batch(vec![0.0]), &batch(vec![1.0, 3.0])),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn rate_shape_arithmetic() {
        assert!((kol_from_smooth_w(16e-4, 1.5).unwrap() - 0.2).abs() < 1e-12);
        assert!((kol_from_smooth_w(8e-3, 0.5).unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(kol_from_smooth_w(0.0, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn dictionary_members_are_normalized() {
        for k in 0..=3 {
            let d = TestDictionary::standard(k).unwrap();
            for m in d.members() {
                for j in 0..=k {
                    assert!(m.norm(j).unwrap() <= 1.0 + 1e-12);
                }
            }
        }
        let json = serde_json::to_string(&TestDictionary::standard(2).unwrap().spec()).unwrap();
        assert_eq!(
            TestDictionary::from_json(&json).unwrap().len(),
            TestDictionary::standard(2).unwrap().len()
        );
    }

    #[test]
    fn stable_expectations() {
        let q = QuadConfig::default();
        let p = StableParams::standard(1.5, -0.5).unwrap();
        let c = SmoothFn::cosine(1.0, 0.3, 0.7).unwrap();
        let phi = (-p.char_exponent(1.0)).exp();
        let exact = 0.7 * (phi.re * 0.3f64.cos() - phi.im * 0.3f64.sin());
        assert!((stable_expectation(&c, &p, &q).unwrap() - exact).abs() < 1e-12);
        // E f₀(ρ(Y − x)) lies between F(x) and F(x + 1/ρ).
        let s = SmoothFn::smoothed_indicator(0.2, 2.0).unwrap();
        let e = stable_expectation(&s, &p, &q).unwrap();
        assert!(e > stable_cdf(&p, 0.2, &q).unwrap() && e < stable_cdf(&p, 0.7, &q).unwrap());
        let b = SmoothFn::gaussian_bump(0.0, 0.5).unwrap();
        let direct = adaptive_split(
            |x| b.eval(x) * stable_pdf(&p, 1.0, x, &q).unwrap(),
            &[-8.0, -2.0, 0.0, 2.0, 8.0],
            1e-10,
            500,
        );
        assert!((stable_expectation(&b, &p, &q).unwrap() - direct.value).abs() < 1e-7);
    }

    #[test]
    fn identical_batches_have_zero_smooth_distance() {
        let b = batch(vec![0.1, -2.0, 3.0]);
        let d = TestDictionary::standard(2).unwrap();
        let r = smooth_wasserstein_lb(&b, Target::Sample(&b), 2, &d, &QuadConfig::default()).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(smooth_wasserstein_lb(&b, Target::Sample(&b), 3, &d, &QuadConfig::default()).is_err());
    }
}
