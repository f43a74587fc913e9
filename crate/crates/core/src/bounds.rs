//! Upper bounds on |E f(S_n) − E f(Y)| and the rate exponents they imply.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::attraction::{AttractedLaw, Distribution};
use crate::error::{Error, Result};
use crate::generator::generator_constants_with;
use crate::lindeberg::stable_truncation_bound;
use crate::quad::QuadConfig;
use crate::stable::fit_heat_kernel_constant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundCase {
    AboveOne,
    One,
    BelowOne,
}

impl BoundCase {
    pub fn of(alpha: f64) -> Self {
        if alpha > 1.0 {
            Self::AboveOne
        } else if alpha == 1.0 {
            Self::One
        } else {
            Self::BelowOne
        }
    }
}

/// `Unit` keeps only the rate shapes (every constant and norm factor set to
/// 1); `Explicit` assembles the constants of the proof from the norms of f.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantMode {
    Explicit,
    #[default]
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Main,
    Improved,
}

/// A bound split into named nonnegative terms whose sum is `total`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub law: String,
    pub n: usize,
    pub total: f64,
    pub terms: BTreeMap<String, f64>,
    pub case: BoundCase,
    pub constant_mode: ConstantMode,
    pub kind: BoundKind,
    /// Readings of the constants that go beyond what is stated outright.
    pub assumptions: Vec<String>,
}

impl BoundReport {
    fn new(law: &AttractedLaw, n: usize, mode: ConstantMode, kind: BoundKind, terms: Vec<(&str, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (name, v) in terms {
            if !(v >= 0.0) {
                return Err(Error::quad(format!("bound term {name}"), v.abs(), 0.0));
            }
            *map.entry(name.to_string()).or_insert(0.0) += v;
        }
        Ok(Self {
            law: law.id(),
            n,
            total: map.values().sum(),
            terms: map,
            case: BoundCase::of(law.alpha()),
            constant_mode: mode,
            kind,
            assumptions: Vec::new(),
        })
    }

    pub fn term(&self, name: &str) -> f64 {
        self.terms.get(name).copied().unwrap_or(0.0)
    }
}

pub const TERM_RATE: &str = "rate";
pub const TERM_EPS_SUP: &str = "eps_sup";
pub const TERM_EPS_INTEGRAL: &str = "eps_integral";
pub const TERM_EPS_TAIL: &str = "eps_tail";
pub const TERM_SKEW_DRIFT: &str = "R_ab";
pub const TERM_TAIL_REMAINDER: &str = "R_abg";
pub const TERM_STABLE_TRUNCATION: &str = "stable_truncation";
pub const TERM_EXPANSION: &str = "expansion";
pub const TERM_CENTERING: &str = "centering";

/// The ε-dependent quantities shared by all bounds, at level t = σn^{1/α}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsTerms {
    pub level: f64,
    /// sup_{|x| ≥ t} |ε(x)|.
    pub sup: f64,
    /// ∫_{−t}^{t} |ε(x)|/|x|^{α−1} dx.
    pub moment: f64,
    /// ∫_t^∞ (|ε(x)| + |ε(−x)|)/x^α dx.
    pub tail: f64,
    /// n^{(α−1)/α}/σ · |(1+β)∫₀ᵗ ε(x)x^{−α} − (1−β)∫₀ᵗ ε(−x)x^{−α}|; zero for α ≥ 1.
    pub skew_drift: f64,
}

pub fn eps_terms(law: &AttractedLaw, n: usize, q: &QuadConfig) -> Result<EpsTerms> {
    let alpha = law.alpha();
    let nf = n as f64;
    let t = law.sigma() * nf.powf(1.0 / alpha);
    let skew_drift = if alpha < 1.0 {
        nf.powf((alpha - 1.0) / alpha) / law.sigma() * law.signed_eps_integral(t, q)?.abs()
    } else {
        0.0
    };
    Ok(EpsTerms {
        level: t,
        sup: law.sup_abs_eps_beyond(t),
        moment: law.abs_eps_moment(t, 1.0 - alpha, q)?,
        tail: law.abs_eps_tail(t, alpha, q)?,
        skew_drift,
    })
}

fn check_main_hypotheses(law: &AttractedLaw) -> Result<()> {
    if law.alpha() == 1.0 {
        if law.beta() != 0.0 {
            return Err(Error::HypothesisViolation("alpha = 1 requires beta = 0".into()));
        }
        if !(law.eps_bound().gamma > 0.0) {
            return Err(Error::HypothesisViolation("alpha = 1 requires gamma > 0".into()));
        }
    }
    Ok(())
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::OutOfRange(format!("bounds need n >= 2, got {n}")));
    }
    Ok(())
}

/// Norms ‖f^{(j)}‖∞ and the derived constants used by the explicit mode.
struct Explicit {
    n: [f64; 4],
    stable_truncation: f64,
}

fn explicit_pieces(norms: &[Option<f64>; 4], law: &AttractedLaw, n: usize, q: &QuadConfig) -> Result<Explicit> {
    let alpha = law.alpha();
    let top = if alpha < 1.0 { 2 } else { 3 };
    let mut v = [0.0; 4];
    for (j, slot) in v.iter_mut().enumerate().take(top + 1) {
        *slot = norms[j].ok_or(Error::MissingNorm(j))?;
    }
    let consts = generator_constants_with(norms, alpha, law.d_alpha())?;
    let heat = fit_heat_kernel_constant(&law.limit(), 1e4, 120, q)?;
    let c = heat.constant.max(heat.refined_constant);
    let a = (n as f64).powf(-1.0 / alpha);
    Ok(Explicit {
        n: v,
        stable_truncation: stable_truncation_bound(alpha, consts.lipschitz, consts.sup.unwrap_or(0.0), c, a),
    })
}

/// E|X| for α > 1, from E X⁺ and E X.
fn abs_mean(law: &AttractedLaw, q: &QuadConfig) -> Result<f64> {
    let positive = law.truncated_mean(f64::INFINITY, q)?;
    Ok(2.0 * positive - law.mean().unwrap_or(0.0))
}

/// The α = 1 centering majorant 4σ^{−2}(K/γ+K+1)[‖f″‖(K/γ+K+2) + (A+K)(2‖f′‖ + ‖f″‖log(σn))]n^{−1}.
fn centering_at_one(law: &AttractedLaw, e: &Explicit, n: usize) -> f64 {
    let nf = n as f64;
    let sigma = law.sigma();
    let bound = law.eps_bound();
    let (k, g, a) = (bound.k, bound.gamma, law.tail_constant());
    let (f1, f2) = (e.n[1], e.n[2]);
    4.0 / (sigma * sigma) * (k / g + k + 1.0) * (f2 * (k / g + k + 2.0) + (a + k) * (2.0 * f1 + f2 * (sigma * nf).ln()))
        / nf
}

const LOWER_K: &str = "the lowercase k in the alpha = 1 centering constant is read as K";

/// The main bound for the three index ranges, with every ε-term.
pub fn bound_main(
    norms: &[Option<f64>; 4],
    law: &AttractedLaw,
    n: usize,
    mode: ConstantMode,
    q: &QuadConfig,
) -> Result<BoundReport> {
    check_n(n)?;
    check_main_hypotheses(law)?;
    let alpha = law.alpha();
    let nf = n as f64;
    let eps = eps_terms(law, n, q)?;
    let rate = nf.powf((alpha - 2.0) / alpha);
    let slow = law.eps_bound().gamma <= 1.0 - alpha;
    let remainder = if slow {
        eps.sup.powf(alpha)
    } else {
        eps.sup + nf.powf((alpha - 1.0) / alpha) * eps.tail
    };
    if mode == ConstantMode::Unit {
        let terms = match BoundCase::of(alpha) {
            BoundCase::AboveOne => vec![
                (TERM_RATE, rate),
                (TERM_EPS_INTEGRAL, rate * eps.moment),
                (TERM_EPS_SUP, eps.sup),
            ],
            BoundCase::One => vec![
                (TERM_RATE, nf.ln() / nf),
                (TERM_EPS_SUP, eps.sup),
                (TERM_EPS_INTEGRAL, eps.moment / nf),
                (TERM_EPS_TAIL, eps.tail),
            ],
            BoundCase::BelowOne => vec![
                (TERM_RATE, 1.0 / nf),
                (TERM_EPS_INTEGRAL, rate * eps.moment),
                (TERM_TAIL_REMAINDER, remainder),
                (TERM_SKEW_DRIFT, eps.skew_drift),
            ],
        };
        return BoundReport::new(law, n, mode, BoundKind::Main, terms);
    }
    let e = explicit_pieces(norms, law, n, q)?;
    let [f0, f1, f2, _] = e.n;
    let (sigma, a) = (law.sigma(), law.tail_constant());
    let s2 = sigma * sigma;
    let sa = sigma.powf(alpha);
    let mut assumptions = Vec::new();
    let terms = match BoundCase::of(alpha) {
        BoundCase::AboveOne => {
            let expansion = 4.0 * f2 / ((2.0 - alpha) * s2) * (2.0 * a).powf(2.0 / alpha) * rate
                + 8.0 * f1 / ((alpha - 1.0) * sa) * eps.sup
                + 2.0 * f2 / s2 * rate * eps.moment;
            let mean = law.mean().unwrap_or(0.0);
            let centering = 2.0 / s2 * abs_mean(law, q)? * mean.abs() * f2 * rate;
            vec![
                (TERM_STABLE_TRUNCATION, e.stable_truncation),
                (TERM_EXPANSION, expansion),
                (TERM_CENTERING, centering),
            ]
        }
        BoundCase::One => {
            let expansion = 12.0 * a * a * f2 / sigma / nf
                + 2.0 * (2.0 * f0 + f1) / sigma * eps.sup
                + f2 / s2 * eps.moment / nf
                + f1 / sigma * eps.tail;
            assumptions.push(LOWER_K.to_string());
            vec![
                (TERM_STABLE_TRUNCATION, e.stable_truncation),
                (TERM_EXPANSION, expansion),
                (TERM_CENTERING, centering_at_one(law, &e, n)),
            ]
        }
        BoundCase::BelowOne => {
            let head = (2.0 + alpha) / ((2.0 - alpha) * s2) * (2.0 * a).powf(2.0 / alpha) * f2 * rate
                + 2.0 * f2 / s2 * rate * eps.moment;
            let expansion = if slow {
                let k = law.eps_bound().k;
                head + ((4.0 * a + 6.0 * k + 4.0) * f0 + (8.0 - 4.0 * alpha) / (1.0 - alpha) * f1) / sa
                    * eps.sup.powf(alpha)
            } else {
                head + 2.0 * (3.0 * f0 + 2.0 * f1) / sa * eps.sup
                    + f1 / sigma * nf.powf((alpha - 1.0) / alpha) * eps.tail
            };
            vec![
                (TERM_STABLE_TRUNCATION, e.stable_truncation),
                (TERM_EXPANSION, expansion),
                (TERM_CENTERING, f1 * 4.0 / sa * eps.sup),
                (TERM_SKEW_DRIFT, f1 * eps.skew_drift),
            ]
        }
    };
    let mut report = BoundReport::new(law, n, mode, BoundKind::Main, terms)?;
    report.assumptions = assumptions;
    Ok(report)
}

/// Checks that ε(x)/|x|^α is monotone on each half-line beyond the support
/// floor, on a logarithmic grid reaching 10^12 times the floor.
pub fn check_ultimately_monotone(law: &AttractedLaw) -> Result<()> {
    let alpha = law.alpha();
    let start = law.support_floor().max(f64::MIN_POSITIVE);
    for side in [1.0, -1.0] {
        let g = |x: f64| law.eps(side * x) / x.powf(alpha);
        let mut direction = 0.0;
        let mut prev = g(start);
        for k in 1..=480 {
            let x = start * 10f64.powf(k as f64 / 40.0);
            let v = g(x);
            let d = v - prev;
            let scale = v.abs().max(prev.abs());
            if d.abs() > 1e-12 * scale && d.abs() > 0.0 {
                let s = d.signum();
                if direction != 0.0 && s != direction {
                    return Err(Error::HypothesisViolation(format!(
                        "eps(x)/|x|^alpha changes monotonicity near x = {:.4e}",
                        side * x
                    )));
                }
                direction = s;
            }
            prev = v;
        }
    }
    Ok(())
}

/// The improved bound for α ≤ 1 under ultimate monotonicity of ε/|x|^α.
pub fn bound_improved(
    norms: &[Option<f64>; 4],
    law: &AttractedLaw,
    n: usize,
    mode: ConstantMode,
    q: &QuadConfig,
) -> Result<BoundReport> {
    check_n(n)?;
    let alpha = law.alpha();
    if alpha > 1.0 {
        return Err(Error::HypothesisViolation(format!(
            "the improved bound needs alpha <= 1, got {alpha}"
        )));
    }
    if alpha == 1.0 && law.beta() != 0.0 {
        return Err(Error::HypothesisViolation("alpha = 1 requires beta = 0".into()));
    }
    check_ultimately_monotone(law)?;
    let nf = n as f64;
    let eps = eps_terms(law, n, q)?;
    let rate = nf.powf((alpha - 2.0) / alpha);
    if mode == ConstantMode::Unit {
        let terms = if alpha == 1.0 {
            vec![
                (TERM_RATE, nf.ln() / nf),
                (TERM_EPS_INTEGRAL, eps.moment / nf),
                (TERM_EPS_SUP, eps.sup),
            ]
        } else {
            vec![
                (TERM_RATE, 1.0 / nf + rate),
                (TERM_EPS_INTEGRAL, rate * eps.moment),
                (TERM_EPS_SUP, eps.sup),
                (TERM_SKEW_DRIFT, eps.skew_drift),
            ]
        };
        return BoundReport::new(law, n, mode, BoundKind::Improved, terms);
    }
    let e = explicit_pieces(norms, law, n, q)?;
    let [f0, f1, f2, _] = e.n;
    let (sigma, a) = (law.sigma(), law.tail_constant());
    let s2 = sigma * sigma;
    let sa = sigma.powf(alpha);
    let expansion = 4.0 * a * alpha / ((2.0 - alpha) * s2) * (2.0 * a).powf((2.0 - alpha) / alpha) * f2 * rate
        + 2.0 * (2.0 * a).powf(2.0 / alpha) / s2 * f2 * rate
        + 4.0 * f0 / sa * eps.sup
        + 2.0 * f2 / s2 * rate * eps.moment;
    let mut assumptions = Vec::new();
    let terms = if alpha == 1.0 {
        assumptions.push(LOWER_K.to_string());
        vec![
            (TERM_STABLE_TRUNCATION, e.stable_truncation),
            (TERM_EXPANSION, expansion),
            (TERM_CENTERING, centering_at_one(law, &e, n)),
        ]
    } else {
        vec![
            (TERM_STABLE_TRUNCATION, e.stable_truncation),
            (TERM_EXPANSION, expansion),
            (TERM_CENTERING, f1 * 4.0 / sa * eps.sup),
            (TERM_SKEW_DRIFT, f1 * eps.skew_drift),
        ]
    };
    let mut report = BoundReport::new(law, n, mode, BoundKind::Improved, terms)?;
    report.assumptions = assumptions;
    Ok(report)
}

/// Predicted convergence rate: n^{n_exponent}·(log n)^{log_power} for
/// laws in the domain of normal attraction, or (log n)^{log_exponent} for
/// slowly varying tails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePrediction {
    pub n_exponent: Option<f64>,
    pub log_power: f64,
    pub log_exponent: Option<f64>,
    /// The α = 1 slowly varying rate holds up to an unspecified small θ > 0.
    pub theta_slack: bool,
}

/// Rate exponents for negligible ε (`gamma_negligible`) or for slowly
/// varying tails with log-exponent `delta`.
pub fn rate_exponent(alpha: f64, beta: f64, gamma_negligible: bool, delta: Option<f64>) -> Result<RatePrediction> {
    if !(alpha > 0.0 && alpha < 2.0) || !(-1.0..=1.0).contains(&beta) {
        return Err(Error::OutOfRange(format!(
            "need alpha in (0, 2) and beta in [-1, 1], got ({alpha}, {beta})"
        )));
    }
    if let Some(d) = delta {
        let base = if alpha < 1.0 {
            -1.0 + 1.0 / (alpha + 1.0)
        } else if alpha == 1.0 {
            -0.5
        } else {
            -1.0 + 1.0 / alpha
        };
        let exponent = if d > 0.0 && d <= 1.0 { base.min(-d) } else { base };
        return Ok(RatePrediction {
            n_exponent: None,
            log_power: 0.0,
            log_exponent: Some(exponent),
            theta_slack: alpha == 1.0,
        });
    }
    let mut out = RatePrediction {
        n_exponent: None,
        log_power: 0.0,
        log_exponent: None,
        theta_slack: false,
    };
    if !gamma_negligible {
        return Ok(out);
    }
    if alpha > 1.0 {
        out.n_exponent = Some((alpha - 2.0) / alpha);
    } else if alpha == 1.0 {
        if beta != 0.0 {
            return Err(Error::SingularCase { beta });
        }
        out.n_exponent = Some(-1.0);
        out.log_power = 1.0;
    } else if beta != 0.0 {
        out.n_exponent = Some((-1.0f64).max((alpha - 1.0) / alpha));
    } else {
        out.n_exponent = Some(-1.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attraction::{make_attracted_law, make_pareto, EpsilonSpec};
    use crate::smooth::SmoothFn;

    fn q() -> QuadConfig {
        QuadConfig::default()
    }

    #[test]
    fn pareto_above_one_unit() {
        let law = make_pareto(1.5).unwrap();
        for n in [8usize, 64, 1024] {
            let r = bound_main(&[None; 4], &law, n, ConstantMode::Unit, &q()).unwrap();
            let rate = (n as f64).powf(-1.0 / 3.0);
            assert!((r.term(TERM_RATE) - rate).abs() < 1e-15);
            assert_eq!(r.term(TERM_EPS_SUP), 0.0);
            // Only the interior |x| < 1 contributes to the ε-integral.
            let inner = law.abs_eps_moment(1.0, -0.5, &q()).unwrap();
            assert!((r.term(TERM_EPS_INTEGRAL) - rate * inner).abs() < 1e-12);
            assert!((r.total - r.terms.values().sum::<f64>()).abs() < 1e-15);
        }
    }

    #[test]
    fn symmetric_drift_vanishes() {
        let law = make_pareto(0.5).unwrap();
        let r = bound_main(&[None; 4], &law, 100, ConstantMode::Unit, &q()).unwrap();
        assert_eq!(r.term(TERM_SKEW_DRIFT), 0.0);
    }

    #[test]
    fn skewed_power_drift_closed_form() {
        let (k, g, beta, alpha) = (0.2, 2.0, 0.5, 0.7);
        let law = make_attracted_law(
            alpha,
            0.5,
            beta,
            EpsilonSpec::Power {
                k,
                gamma: g,
                k_left: None,
            },
            2.0,
        )
        .unwrap();
        let n = 1000usize;
        let t = law.sigma() * (n as f64).powf(1.0 / alpha);
        let e = eps_terms(&law, n, &q()).unwrap();
        // Beyond the floor the signed integrand is 2βK x^{−α−γ}.
        let beyond = 2.0 * beta * k * (2f64.powf(1.0 - alpha - g) - t.powf(1.0 - alpha - g)) / (alpha + g - 1.0);
        let inside = law.signed_eps_integral(2.0, &q()).unwrap();
        let expect = (n as f64).powf((alpha - 1.0) / alpha) / law.sigma() * (inside + beyond).abs();
        assert!(
            (e.skew_drift - expect).abs() < 1e-9 * expect,
            "{} vs {expect}",
            e.skew_drift
        );
    }

    #[test]
    fn explicit_mode_is_finite_and_positive() {
        let f = SmoothFn::smoothed_indicator(0.0, 2.0).unwrap();
        for alpha in [0.5, 1.0, 1.5] {
            let law = make_pareto(alpha).unwrap();
            let r = bound_main(&f.norms(), &law, 64, ConstantMode::Explicit, &q()).unwrap();
            assert!(r.total.is_finite() && r.total > 0.0);
            assert!((r.total - r.terms.values().sum::<f64>()).abs() < 1e-12 * r.total);
        }
        assert!(matches!(
            bound_main(&[None; 4], &make_pareto(1.5).unwrap(), 64, ConstantMode::Explicit, &q()),
            Err(Error::MissingNorm(_))
        ));
    }

    #[test]
    fn improved_bound_gates() {
        let law = make_pareto(1.0).unwrap();
        let r = bound_improved(&[None; 4], &law, 64, ConstantMode::Unit, &q()).unwrap();
        let n = 64f64;
        let inner = law.abs_eps_moment(law.sigma() * n, 0.0, &q()).unwrap();
        assert!((r.total - (n.ln() / n + inner / n)).abs() < 1e-12);
        let osc = make_attracted_law(
            0.5,
            0.5,
            0.0,
            EpsilonSpec::Table {
                right: vec![[2.0, 0.02], [4.0, -0.02], [8.0, 0.02], [16.0, -0.02], [32.0, 0.0]],
                left: None,
            },
            2.0,
        )
        .unwrap();
        assert!(matches!(
            bound_improved(&[None; 4], &osc, 64, ConstantMode::Unit, &q()),
            Err(Error::HypothesisViolation(_))
        ));
        assert!(bound_improved(&[None; 4], &make_pareto(1.5).unwrap(), 64, ConstantMode::Unit, &q()).is_err());
    }

    #[test]
    fn rate_exponents() {
        assert!((rate_exponent(1.5, 0.0, true, None).unwrap().n_exponent.unwrap() + 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(rate_exponent(0.5, 0.0, true, None).unwrap().n_exponent, Some(-1.0));
        assert_eq!(rate_exponent(0.5, 0.5, true, None).unwrap().n_exponent, Some(-1.0));
        assert!((rate_exponent(0.7, 0.5, true, None).unwrap().n_exponent.unwrap() + 3.0 / 7.0).abs() < 1e-15);
        let one = rate_exponent(1.0, 0.0, true, None).unwrap();
        assert_eq!((one.n_exponent, one.log_power), (Some(-1.0), 1.0));
        let lt = rate_exponent(0.5, 0.0, false, Some(0.0)).unwrap();
        assert!((lt.log_exponent.unwrap() + 1.0 / 3.0).abs() < 1e-15);
        // With 0 < δ ≤ 1 the rate is the minimum of the two powers of log n.
        let capped = rate_exponent(0.5, 0.0, false, Some(1.0)).unwrap();
        assert_eq!(capped.log_exponent, Some(-1.0));
        let weak = rate_exponent(0.5, 0.0, false, Some(0.1)).unwrap();
        assert!((weak.log_exponent.unwrap() + 1.0 / 3.0).abs() < 1e-15);
    }
}
