//! The swapping decomposition of E f(S_n) − E f(Y) into one-summand
//! replacements, and Monte Carlo checks of the expansion and truncation
//! inequalities behind the rate bounds.

use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attraction::{AttractedLaw, Distribution, Law};
use crate::error::{Error, Result};
use crate::generator::{generator_constants_with, Generator, GeneratorForm, GeneratorTable};
use crate::mc::{par_paths, McConfig, TermEstimate};
use crate::quad::{adaptive_split, gauss_legendre_on, QuadConfig};
use crate::rng::derive_seed;
use crate::smooth::SmoothFn;
use crate::stable::{fit_heat_kernel_constant, SampleBatch, StableParams, StableSampler};

/// The hybrid sum Z_i = Y₁ + … + Y_{i−1} + X̂_{i+1} + … + X̂_n, where the Y's
/// are unit stable draws and X̂ = (X − shift)/divisor are standardized
/// summands.
#[derive(Debug, Clone)]
pub struct HybridSumSpec {
    law: Law,
    n: usize,
    i: usize,
    stable: StableParams,
    shift: f64,
    divisor: f64,
}

impl HybridSumSpec {
    pub fn new(law: &Law, n: usize, i: usize, stable: &StableParams, q: &QuadConfig) -> Result<Self> {
        if n == 0 || i == 0 || i > n {
            return Err(Error::OutOfRange(format!("need 1 <= i <= n, got i = {i}, n = {n}")));
        }
        if stable.alpha() != law.alpha() {
            return Err(Error::OutOfRange(format!(
                "stable index {} differs from the law's index {}",
                stable.alpha(),
                law.alpha()
            )));
        }
        let (centering, scale) = law.normalization(n, q)?;
        let nf = n as f64;
        Ok(Self {
            law: law.clone(),
            n,
            i,
            stable: *stable,
            shift: centering / nf,
            divisor: scale / nf.powf(1.0 / law.alpha()),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn i(&self) -> usize {
        self.i
    }
    pub fn law(&self) -> &Law {
        &self.law
    }
    pub fn stable(&self) -> &StableParams {
        &self.stable
    }

    /// n^{1/α}, the divisor of the full sums.
    pub fn root(&self) -> f64 {
        (self.n as f64).powf(1.0 / self.law.alpha())
    }

    /// One standardized summand X̂.
    pub fn draw_summand(&self, rng: &mut dyn RngCore) -> f64 {
        (self.law.draw(rng) - self.shift) / self.divisor
    }

    fn draw_z(&self, sampler: &StableSampler, rng: &mut ChaCha8Rng) -> f64 {
        let mut z = 0.0;
        for _ in 1..self.i {
            z += sampler.draw(rng);
        }
        for _ in self.i..self.n {
            z += self.draw_summand(rng);
        }
        z
    }

    fn with_index(&self, i: usize) -> Self {
        Self { i, ..self.clone() }
    }
}

/// `m` draws of Z_i (not divided by n^{1/α}).
pub fn hybrid_sum_sample(spec: &HybridSumSpec, m: usize, seed: u64) -> Result<SampleBatch> {
    let sampler = StableSampler::new(&spec.stable);
    let values = par_paths(m, seed, |rng| Ok(spec.draw_z(&sampler, rng)))?;
    SampleBatch::new(values, seed, format!("Z_{}/{}[{}]", spec.i, spec.n, spec.law.id()))
}

/// Whether the X- and Y-branches of one swap share their Z draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    #[default]
    Common,
    Independent,
}

/// One swap: E[f((X̂_i+Z_i)/n^{1/α}) − f(Z_i/n^{1/α})] and the same with Y_i.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwapTerm {
    pub index: usize,
    pub x_term: TermEstimate,
    pub y_term: TermEstimate,
    /// X-term minus Y-term with the standard error of the difference.
    pub difference: TermEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub n: usize,
    pub terms: Vec<SwapTerm>,
    /// Σ (X-term − Y-term).
    pub total: TermEstimate,
    /// E f(S_n) − E f(Y) from independent streams.
    pub direct: TermEstimate,
    pub coupling: Coupling,
}

impl Decomposition {
    /// |total − direct| in units of the combined standard error.
    pub fn gap_in_stderr(&self) -> f64 {
        let se = self.total.stderr + self.direct.stderr;
        if se == 0.0 {
            if self.total.value == self.direct.value {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.total.value - self.direct.value).abs() / se
        }
    }
}

pub fn telescoping_decompose(
    f: &SmoothFn,
    law: &Law,
    stable: &StableParams,
    n: usize,
    mc: &McConfig,
    coupling: Coupling,
    q: &QuadConfig,
) -> Result<Decomposition> {
    mc.require_at_least(1000)?;
    let base = HybridSumSpec::new(law, n, 1, stable, q)?;
    let sampler = StableSampler::new(stable);
    let root = base.root();
    let m = mc.paths;
    let mut terms = Vec::with_capacity(n);
    let mut total_value = 0.0;
    let mut total_var = 0.0;
    for i in 1..=n {
        let spec = base.with_index(i);
        let seed = derive_seed(mc.seed, &[1, i as u64]);
        let rows = par_paths(m, seed, |rng| {
            let z = spec.draw_z(&sampler, rng);
            let x = spec.draw_summand(rng);
            let y = sampler.draw(rng);
            let z2 = match coupling {
                Coupling::Common => z,
                Coupling::Independent => spec.draw_z(&sampler, rng),
            };
            let fz = f.eval(z / root);
            let xt = f.eval((x + z) / root) - fz;
            let yt = f.eval((y + z2) / root) - f.eval(z2 / root);
            Ok([xt, yt])
        })?;
        let xs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r[1]).collect();
        let x_term = TermEstimate::from_samples(&xs);
        let y_term = TermEstimate::from_samples(&ys);
        let difference = match coupling {
            Coupling::Common => {
                let d: Vec<f64> = rows.iter().map(|r| r[0] - r[1]).collect();
                TermEstimate::from_samples(&d)
            }
            Coupling::Independent => TermEstimate {
                value: x_term.value - y_term.value,
                stderr: x_term.stderr.hypot(y_term.stderr),
                replicates: m,
            },
        };
        total_value += difference.value;
        total_var += difference.stderr * difference.stderr;
        terms.push(SwapTerm {
            index: i,
            x_term,
            y_term,
            difference,
        });
    }
    let full = base.with_index(n + 1);
    let s_vals = par_paths(m, derive_seed(mc.seed, &[2]), |rng| {
        let mut s = 0.0;
        for _ in 0..full.n {
            s += full.draw_summand(rng);
        }
        Ok(f.eval(s / root))
    })?;
    let y_vals = par_paths(m, derive_seed(mc.seed, &[3]), |rng| Ok(f.eval(sampler.draw(rng))))?;
    let s_est = TermEstimate::from_samples(&s_vals);
    let y_est = TermEstimate::from_samples(&y_vals);
    Ok(Decomposition {
        n,
        terms,
        total: TermEstimate {
            value: total_value,
            stderr: total_var.sqrt(),
            replicates: m,
        },
        direct: TermEstimate {
            value: s_est.value - y_est.value,
            stderr: s_est.stderr.hypot(y_est.stderr),
            replicates: m,
        },
        coupling,
    })
}

/// Distribution of the independent variable Z in the expansion checks.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ZSpec {
    /// Z_i/n^{1/α} with n = round((aσ)^{−α}) and i = ⌈n/2⌉, the variable at
    /// which the rate proof applies the expansion.
    #[default]
    MatchedHybrid,
    Hybrid {
        n: usize,
        i: usize,
    },
    /// A unit stable draw.
    Stable,
    Fixed {
        z: f64,
    },
}

/// Which expansion inequality applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionCase {
    /// α ∈ (1, 2), full mean centering.
    AboveOne,
    /// α = 1, β = 0, γ > 0, truncated centering.
    One,
    /// α < 1 with γ > 1 − α.
    BelowOneFastDecay,
    /// α < 1 with γ ≤ 1 − α.
    BelowOneSlowDecay,
}

/// A Monte Carlo left side against an explicit right side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub lhs: TermEstimate,
    pub rhs_bound: f64,
    /// Largest interpolation error of tabulated generator values entering the
    /// left side (a bias not included in `lhs.stderr`).
    pub generator_error: f64,
}

impl InequalityCheck {
    /// lhs ≤ rhs + 3·stderr.
    pub fn holds(&self) -> bool {
        self.lhs.value <= self.rhs_bound + 3.0 * self.lhs.stderr + self.generator_error
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCheck {
    pub case: ExpansionCase,
    pub check: InequalityCheck,
    /// The first-order centering coefficient multiplying E f′(Z).
    pub centering: f64,
    /// The coefficient 2Aα a^α/d_α multiplying E Lf(Z).
    pub generator_weight: f64,
}

fn expansion_case(law: &AttractedLaw) -> Result<ExpansionCase> {
    let alpha = law.alpha();
    let gamma = law.eps_bound().gamma;
    if alpha > 1.0 {
        Ok(ExpansionCase::AboveOne)
    } else if alpha == 1.0 {
        if law.beta() != 0.0 {
            return Err(Error::CaseMismatch("the alpha = 1 expansion needs beta = 0".into()));
        }
        if !(gamma > 0.0) {
            return Err(Error::CaseMismatch("the alpha = 1 expansion needs gamma > 0".into()));
        }
        Ok(ExpansionCase::One)
    } else if gamma > 1.0 - alpha {
        Ok(ExpansionCase::BelowOneFastDecay)
    } else {
        Ok(ExpansionCase::BelowOneSlowDecay)
    }
}

/// Right side of the expansion inequality for the given case.
pub fn expansion_bound(f: &SmoothFn, law: &AttractedLaw, a: f64, q: &QuadConfig) -> Result<(ExpansionCase, f64)> {
    let case = expansion_case(law)?;
    let alpha = law.alpha();
    let big_a = law.tail_constant();
    let inv = 1.0 / a;
    let sup = law.sup_abs_eps_beyond(inv);
    let moment = law.abs_eps_moment(inv, 1.0 - alpha, q)?;
    let head = (2.0 * big_a).powf(2.0 / alpha) * a * a;
    let rhs = match case {
        ExpansionCase::AboveOne => {
            let (n1, n2) = (f.norm(1)?, f.norm(2)?);
            4.0 * n2 / (2.0 - alpha) * head + 8.0 * n1 / (alpha - 1.0) * a.powf(alpha) * sup + 2.0 * n2 * a * a * moment
        }
        ExpansionCase::One => {
            let (n0, n1, n2) = (f.norm(0)?, f.norm(1)?, f.norm(2)?);
            let tail = law.abs_eps_tail(inv, 1.0, q)?;
            12.0 * big_a * big_a * n2 * a * a + 2.0 * (2.0 * n0 + n1) * a * sup + n2 * a * a * moment + n1 * a * tail
        }
        ExpansionCase::BelowOneFastDecay => {
            let (n0, n1, n2) = (f.norm(0)?, f.norm(1)?, f.norm(2)?);
            let tail = law.abs_eps_tail(inv, alpha, q)?;
            (2.0 + alpha) / (2.0 - alpha) * head * n2
                + 2.0 * (3.0 * n0 + 2.0 * n1) * a.powf(alpha) * sup
                + 2.0 * n2 * a * a * moment
                + n1 * a * tail
        }
        ExpansionCase::BelowOneSlowDecay => {
            let (n0, n1, n2) = (f.norm(0)?, f.norm(1)?, f.norm(2)?);
            let k = law.eps_bound().k;
            (2.0 + alpha) / (2.0 - alpha) * head * n2
                + ((4.0 * big_a + 6.0 * k + 4.0) * n0 + (8.0 - 4.0 * alpha) / (1.0 - alpha) * n1)
                    * a.powf(alpha)
                    * sup.powf(alpha)
                + 2.0 * n2 * a * a * moment
        }
    };
    Ok((case, rhs))
}

type ZDraw = Box<dyn Fn(&mut ChaCha8Rng) -> f64 + Sync + Send>;

/// The sampler for Z.
fn z_sampler(law: &AttractedLaw, a: f64, z: ZSpec, q: &QuadConfig) -> Result<ZDraw> {
    let stable = law.limit();
    let sampler = StableSampler::new(&stable);
    Ok(match z {
        ZSpec::Fixed { z } => Box::new(move |_| z),
        ZSpec::Stable => Box::new(move |rng| sampler.draw(rng)),
        ZSpec::MatchedHybrid | ZSpec::Hybrid { .. } => {
            let (n, i) = match z {
                ZSpec::Hybrid { n, i } => (n, i),
                _ => {
                    let n = ((a * law.sigma()).powf(-law.alpha()).round() as usize).max(1);
                    (n, n.div_ceil(2))
                }
            };
            let spec = HybridSumSpec::new(&Law::Attracted(law.clone()), n, i, &stable, q)?;
            let root = spec.root();
            Box::new(move |rng| spec.draw_z(&sampler, rng) / root)
        }
    })
}

/// Monte Carlo check of the expansion
/// |E f(Z+aX) − E f(Z) − c·E f′(Z) − (2Aα/d_α)a^α E[Lf(Z)]| ≤ rhs,
/// with c and the operator chosen by the α-case (shifted operator for α < 1).
pub fn taylor_residual(
    f: &SmoothFn,
    law: &AttractedLaw,
    a: f64,
    z: ZSpec,
    mc: &McConfig,
    q: &QuadConfig,
) -> Result<ExpansionCheck> {
    mc.require_at_least(1000)?;
    let alpha = law.alpha();
    let a_max = (2.0 * law.tail_constant()).powf(-1.0 / alpha).min(1.0);
    if !(a > 0.0 && a <= a_max) {
        return Err(Error::HypothesisViolation(format!(
            "a must lie in (0, {a_max}], got {a}"
        )));
    }
    let (case, rhs) = expansion_bound(f, law, a, q)?;
    let stable = law.limit();
    let generator = Generator::new(&stable, q)?;
    let form = if alpha < 1.0 {
        GeneratorForm::Shifted
    } else {
        GeneratorForm::Raw
    };
    let centering = if alpha > 1.0 {
        a * law.mean().unwrap_or(0.0)
    } else {
        a * law.signed_truncated_mean(1.0 / a, q)?
    };
    let weight = 2.0 * law.tail_constant() * alpha / generator.d_alpha() * a.powf(alpha);
    let draw_z = z_sampler(law, a, z, q)?;
    let (lf, generator_error): (Box<dyn Fn(f64) -> Result<f64> + Sync>, f64) = if f.constant_value().is_some() {
        (Box::new(|_| Ok(0.0)), 0.0)
    } else if let ZSpec::Fixed { z } = z {
        let v = generator.apply(f, z, form)?;
        (Box::new(move |_| Ok(v)), 0.0)
    } else {
        let table = GeneratorTable::build(&generator, f, form)?;
        let err = table.interpolation_error();
        (Box::new(move |x| table.eval(x)), err)
    };
    let samples = par_paths(mc.paths, mc.seed, |rng| {
        let zv = draw_z(rng);
        let x = law.draw(rng);
        Ok(f.eval(zv + a * x) - f.eval(zv) - centering * f.d1(zv) - weight * lf(zv)?)
    })?;
    let est = TermEstimate::from_samples(&samples);
    Ok(ExpansionCheck {
        case,
        check: InequalityCheck {
            lhs: TermEstimate {
                value: est.value.abs(),
                ..est
            },
            rhs_bound: rhs,
            generator_error: weight * generator_error,
        },
        centering,
        generator_weight: weight,
    })
}

/// Result of the stable truncation check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableTruncation {
    pub check: InequalityCheck,
    /// sup_u p(1,u)·max(1, |u|^{1+α}), fitted from the density.
    pub heat_kernel_constant: f64,
    /// rhs divided by its a-dependence: (D̂+D)a^α, (D̂+D)a − D a log a, or D a.
    pub fitted_constant: f64,
    pub lipschitz: f64,
    pub sup: Option<f64>,
}

const TIME_NODES: usize = 24;

/// Bound on E∫₀¹|Lf(z) − Lf(z + aŶ_s)| ds from the generator constants
/// (`lipschitz`, `sup`) and the heat-kernel constant `c`.
pub fn stable_truncation_bound(alpha: f64, lipschitz: f64, sup: f64, c: f64, a: f64) -> f64 {
    let (dl, ds) = (lipschitz, sup);
    if alpha < 1.0 {
        c * (2.0 * ds * a.powf(alpha) / alpha + dl * (alpha * a / (1.0 + alpha) + a.powf(alpha) / (1.0 - alpha)))
    } else if alpha == 1.0 {
        2.0 * ds * c * a + dl * a * c * (1.0 + (1.0 / a).ln())
    } else {
        dl * a * c * 2.0 * (0.5 + 1.0 / (alpha - 1.0)) * alpha / (1.0 + alpha)
    }
}

/// E∫₀¹|Lf(z) − Lf(z + aŶ_s)| ds against an explicit bound built from the
/// heat-kernel majorant p(s,u) ≤ C·min(s^{−1/α}, s/|u|^{1+α}).
pub fn stable_truncation_check(
    f: &SmoothFn,
    p: &StableParams,
    a: f64,
    z: f64,
    mc: &McConfig,
    q: &QuadConfig,
) -> Result<StableTruncation> {
    mc.require_at_least(1000)?;
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::OutOfRange(format!("a must lie in (0, 1), got {a}")));
    }
    let alpha = p.alpha();
    let generator = Generator::new(p, q)?;
    let consts = generator_constants_with(&f.norms(), alpha, generator.d_alpha())?;
    let (dl, ds) = (consts.lipschitz, consts.sup.unwrap_or(0.0));
    let heat = fit_heat_kernel_constant(p, 1e4, 120, q)?;
    let c = heat.constant.max(heat.refined_constant);
    let rhs = stable_truncation_bound(alpha, dl, ds, c, a);
    let shape = if alpha < 1.0 {
        (ds + dl) * a.powf(alpha)
    } else if alpha == 1.0 {
        (ds + dl) * a - dl * a * a.ln()
    } else {
        dl * a
    };
    let (lf, generator_error): (Box<dyn Fn(f64) -> Result<f64> + Sync>, f64) = if f.constant_value().is_some() {
        (Box::new(|_| Ok(0.0)), 0.0)
    } else {
        let table = GeneratorTable::build(&generator, f, GeneratorForm::Raw)?;
        let err = table.interpolation_error();
        (Box::new(move |x| table.eval(x)), err)
    };
    let lz = if f.constant_value().is_some() {
        0.0
    } else {
        generator.apply(f, z, GeneratorForm::Raw)?
    };
    let (nodes, weights) = gauss_legendre_on(TIME_NODES, 0.0, 1.0);
    let scales: Vec<f64> = nodes.iter().map(|s| a * s.powf(1.0 / alpha)).collect();
    let sampler = StableSampler::new(p);
    let samples = par_paths(mc.paths, mc.seed, |rng| {
        let y = sampler.draw(rng);
        let mut acc = 0.0;
        for (sc, w) in scales.iter().zip(&weights) {
            acc += w * (lz - lf(z + sc * y)?).abs();
        }
        Ok(acc)
    })?;
    Ok(StableTruncation {
        check: InequalityCheck {
            lhs: TermEstimate::from_samples(&samples),
            rhs_bound: rhs,
            generator_error: 2.0 * generator_error,
        },
        heat_kernel_constant: c,
        fitted_constant: if shape > 0.0 { rhs / shape } else { 0.0 },
        lipschitz: dl,
        sup: consts.sup,
    })
}

/// Truncated first moment E[|X|·1_{(0,t]}(|X|)] against its closed bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub value: f64,
    pub bound: f64,
}

impl MomentCheck {
    pub fn holds(&self) -> bool {
        self.value <= self.bound
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LawTruncation {
    pub check: InequalityCheck,
    pub moment: MomentCheck,
}

/// E[|X|·1_{(0,t]}(|X|)] = ∫₀ᵗ P(|X| > r) dr − t·P(|X| > t).
pub fn abs_truncated_moment<D: Distribution + ?Sized>(law: &D, t: f64, q: &QuadConfig) -> Result<f64> {
    let tail = |r: f64| law.survival(r) + law.cdf_left(-r);
    let mut pts = vec![0.0];
    pts.extend(
        law.breakpoints()
            .into_iter()
            .map(f64::abs)
            .filter(|&b| b > 0.0 && b < t),
    );
    let mut y = pts.iter().cloned().fold(1.0, f64::max);
    while y * std::f64::consts::E < t {
        y *= std::f64::consts::E;
        pts.push(y);
    }
    pts.push(t);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let est = adaptive_split(tail, &pts, q.tolerance, 400);
    if est.error > 1e3 * q.tolerance.max(1e-12 * est.value.abs()) {
        return Err(Error::quad("truncated moment", est.error, q.tolerance));
    }
    Ok(est.value - t * tail(t))
}

/// E|f′(z+aX) − f′(z)| against its bound for α ≤ 1, with the truncated
/// moment check at level 1/a.
pub fn law_truncation_check(
    f: &SmoothFn,
    law: &AttractedLaw,
    a: f64,
    z: f64,
    mc: &McConfig,
    q: &QuadConfig,
) -> Result<LawTruncation> {
    mc.require_at_least(1000)?;
    let alpha = law.alpha();
    if alpha > 1.0 {
        return Err(Error::CaseMismatch(format!(
            "the truncation bound needs alpha <= 1, got {alpha}"
        )));
    }
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::OutOfRange(format!("a must lie in (0, 1), got {a}")));
    }
    let (n1, n2) = (f.norm(1)?, f.norm(2)?);
    let big_a = law.tail_constant();
    let k = law.eps_bound().k;
    let rhs = if alpha == 1.0 {
        2.0 * n2 * a + 2.0 * (big_a + k) * (2.0 * n1 + n2 * (1.0 / a).ln()) * a
    } else {
        2.0 * n2 * a + 2.0 * (big_a + k) * (2.0 * n1 + n2 / (1.0 - alpha)) * a.powf(alpha)
    };
    let fz = f.d1(z);
    let samples = par_paths(mc.paths, mc.seed, |rng| Ok((f.d1(z + a * law.draw(rng)) - fz).abs()))?;
    let moment_bound = if alpha == 1.0 {
        2.0 * (1.0 + (big_a + k) * (1.0 / a).ln())
    } else {
        2.0 * (1.0 + (big_a + k) * a.powf(alpha - 1.0) / (1.0 - alpha))
    };
    Ok(LawTruncation {
        check: InequalityCheck {
            lhs: TermEstimate::from_samples(&samples),
            rhs_bound: rhs,
            generator_error: 0.0,
        },
        moment: MomentCheck {
            value: abs_truncated_moment(law, 1.0 / a, q)?,
            bound: moment_bound,
        },
    })
}
