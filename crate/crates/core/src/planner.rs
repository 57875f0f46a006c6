//! Sufficient choices of truncation level `L`, sample count `M` and mesh
//! size `h` for a target accuracy `ε`.
//!
//! Every "≳" is realized as "≥ constant × term" with a user-visible
//! constant (default 1). Integer thresholds are found by exact search on
//! their defining inequality, evaluated in log space.

use crate::analysis::functionals::{h_closed_brownian, h_functional};
use crate::error::{invalid, Error, Result};
use crate::field::{brownian_lambda, brownian_spectrum_tensor};
use crate::lambert::lambert_w_m1;

/// Default search cap for integer thresholds.
pub const DEFAULT_CAP: u64 = 1 << 62;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `n_h < M^{1/(2α+1)}`.
    Case1,
    /// `n_h ≥ M^{1/(2α+1)}` with the logarithmic term dominating the rate.
    Case2,
    /// `n_h ≥ M^{1/(2α+1)}` with the algebraic term dominating.
    Case3,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::Case1, Regime::Case2, Regime::Case3];

    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Case1 => "case-1",
            Regime::Case2 => "case-2",
            Regime::Case3 => "case-3",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "case-1" | "1" => Ok(Regime::Case1),
            "case-2" | "2" => Ok(Regime::Case2),
            "case-3" | "3" => Ok(Regime::Case3),
            other => Err(Error::Parse(format!("unknown regime `{other}`"))),
        }
    }
}

/// Where `H(L)`, `λ_L` and `λ_{L+1}` come from.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionalSource {
    /// Brownian motion (d = 1) or the Brownian sheet (d = 2), closed form.
    Brownian,
    /// A non-increasing eigenvalue list.
    Spectrum(Vec<f64>),
    /// Functionals supplied directly.
    Explicit {
        h_l: f64,
        lambda_l: f64,
        lambda_l1: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanInputs {
    pub eps: f64,
    pub s: f64,
    pub d: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub beta: f64,
    pub rho1: f64,
    pub h0: f64,
    pub lambda_max_mass: f64,
    /// Multiplicative constant realizing every "≳".
    pub constant: f64,
    pub cap: u64,
    pub functionals: FunctionalSource,
}

impl PlanInputs {
    /// Univariate Brownian motion with `s = ½`, `γ = 3/2` and unit surrogates.
    pub fn brownian(eps: f64) -> Self {
        Self {
            eps,
            s: 0.5,
            d: 1,
            alpha: 1.0,
            gamma: 1.5,
            beta: 1.0,
            rho1: 1.0,
            h0: 1.0,
            lambda_max_mass: 1.0,
            constant: 1.0,
            cap: DEFAULT_CAP,
            functionals: FunctionalSource::Brownian,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be positive and finite, got {v}")))
            }
        };
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(invalid("eps", format!("must lie in (0, 1), got {}", self.eps)));
        }
        pos("s", self.s)?;
        pos("alpha", self.alpha)?;
        pos("beta", self.beta)?;
        pos("gamma", self.gamma)?;
        pos("rho1", self.rho1)?;
        pos("h0", self.h0)?;
        pos("lambda_max_mass", self.lambda_max_mass)?;
        pos("constant", self.constant)?;
        if !(1..=2).contains(&self.d) {
            return Err(invalid("d", format!("must be 1 or 2, got {}", self.d)));
        }
        if self.cap < 2 {
            return Err(invalid("cap", "must be at least 2"));
        }
        Ok(())
    }

    fn p(&self) -> f64 {
        2.0 * self.alpha + 1.0
    }
}

/// `L_ε = ⌈ε^{−2d/(4s+d)}⌉`.
pub fn truncation_level(eps: f64, s: f64, d: usize) -> usize {
    let d = d as f64;
    let raw = eps.powf(-2.0 * d / (4.0 * s + d));
    // guard against 21.999999… from rounding in powf
    let r = raw.round();
    if (raw - r).abs() <= 1e-9 * r {
        r.max(1.0) as usize
    } else {
        raw.ceil().max(1.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Functionals {
    pub h_l: f64,
    pub lambda_l: f64,
    pub lambda_l1: f64,
}

fn resolve_functionals(inputs: &PlanInputs, l: usize) -> Result<Functionals> {
    match &inputs.functionals {
        FunctionalSource::Brownian => match inputs.d {
            1 => Ok(Functionals {
                h_l: h_closed_brownian(l, 1),
                lambda_l: brownian_lambda(l),
                lambda_l1: brownian_lambda(l + 1),
            }),
            _ => {
                let sheet = brownian_spectrum_tensor(inputs.d)?;
                Ok(Functionals {
                    h_l: h_closed_brownian(l, inputs.d),
                    lambda_l: sheet.eigenvalue(l)?,
                    lambda_l1: sheet.eigenvalue(l + 1)?,
                })
            }
        },
        FunctionalSource::Spectrum(lambda) => {
            if lambda.len() < l + 1 {
                return Err(Error::MissingFunctional(format!(
                    "H(L) and λ_(L+1) need {} eigenvalues, spectrum has {}",
                    l + 1,
                    lambda.len()
                )));
            }
            Ok(Functionals {
                h_l: h_functional(lambda, l)?.value,
                lambda_l: lambda[l - 1],
                lambda_l1: lambda[l],
            })
        }
        FunctionalSource::Explicit {
            h_l,
            lambda_l,
            lambda_l1,
        } => Ok(Functionals {
            h_l: *h_l,
            lambda_l: *lambda_l,
            lambda_l1: *lambda_l1,
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub value: u64,
    /// The inequality still failed at the search cap.
    pub capped: bool,
}

/// Least `M ∈ ℕ` with `holds(M)`, assuming the failing set is an interval
/// containing 1 whenever `holds(1)` is false (true for the concave
/// log-space inequalities used here). Doubling, then bisection.
pub fn least_satisfying(cap: u64, holds: impl Fn(u64) -> bool) -> Threshold {
    if holds(1) {
        return Threshold {
            value: 1,
            capped: false,
        };
    }
    let mut lo = 1u64; // fails
    let mut hi = 2u64;
    while !holds(hi) {
        if hi >= cap {
            return Threshold {
                value: cap,
                capped: true,
            };
        }
        lo = hi;
        hi = hi.saturating_mul(2).min(cap);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Threshold {
        value: hi,
        capped: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// `M̄_ε` (first regime).
    pub m_bar: Threshold,
    /// `M̃_ε` (second regime).
    pub m_tilde: Threshold,
    /// `M̂_ε` (third regime).
    pub m_hat: Threshold,
    /// `M′_ε` (third regime).
    pub m_prime: Threshold,
}

/// Least `M` with `e^{c} e^{−Mκ} ≤ M^{−1/p}`, where `e^{c} = L^{1/2}/ε`.
pub fn sampling_threshold(c: f64, kappa: f64, p: f64, cap: u64) -> Threshold {
    least_satisfying(cap, |m| {
        let m = m as f64;
        c - m * kappa + m.ln() / p <= 0.0
    })
}

/// Effective exponential rate `ρ₁ H(L) / λ_max(M)²`.
fn kappa(inputs: &PlanInputs, f: &Functionals) -> f64 {
    inputs.rho1 * f.h_l / (inputs.lambda_max_mass * inputs.lambda_max_mass)
}

/// `log(L^{1/2} ε^{−1})`.
fn log_sampling_prefactor(inputs: &PlanInputs, l: usize) -> f64 {
    0.5 * (l as f64).ln() - inputs.eps.ln()
}

pub fn fixed_point_thresholds(inputs: &PlanInputs) -> Result<Thresholds> {
    inputs.validate()?;
    let l = truncation_level(inputs.eps, inputs.s, inputs.d);
    let f = resolve_functionals(inputs, l)?;
    Ok(thresholds_with(inputs, l, &f))
}

fn thresholds_with(inputs: &PlanInputs, l: usize, f: &Functionals) -> Thresholds {
    let k = kappa(inputs, f);
    let c = log_sampling_prefactor(inputs, l);
    let p = inputs.p();
    let d = inputs.d as f64;
    let m_bar = sampling_threshold(c, k, p, inputs.cap);
    let m_tilde = m_bar;
    // exp(−M^{1/p}/d) ≤ M^{−1/(dp)}
    let m_hat = least_satisfying(inputs.cap, |m| {
        let m = m as f64;
        -m.powf(1.0 / p) / d <= -m.ln() / (d * p)
    });
    // (L^{1/2} ε^{−1} e^{−Mκ})^{1/d} ≤ exp(−M^{1/p}/d)
    let m_prime = least_satisfying(inputs.cap, |m| {
        let m = m as f64;
        c - m * k + m.powf(1.0 / p) <= 0.0
    });
    Thresholds {
        m_bar,
        m_tilde,
        m_hat,
        m_prime,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub regime: Regime,
    pub l_eps: usize,
    /// Integer-valued; may exceed `u64` for small ε.
    pub m_eps: f64,
    pub h_lo: f64,
    pub h_hi: f64,
    /// The largest admissible mesh size (`h_hi`).
    pub h_eps: f64,
    pub vacuous: bool,
    pub capped: bool,
    /// Every intermediate quantity, in evaluation order.
    pub terms: Vec<(String, f64)>,
    pub flags: Vec<String>,
}

impl Plan {
    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    pub fn to_key_value(&self) -> String {
        let f = crate::csvio::fmt;
        let mut s = format!(
            "regime = {}\nL_eps = {}\nM_eps = {}\nh_lo = {}\nh_hi = {}\nh_eps = {}\nvacuous = {}\ncapped = {}\n",
            self.regime.as_str(),
            self.l_eps,
            f(self.m_eps),
            f(self.h_lo),
            f(self.h_hi),
            f(self.h_eps),
            self.vacuous,
            self.capped
        );
        for (k, v) in &self.terms {
            s.push_str(&format!("term.{k} = {}\n", f(*v)));
        }
        for flag in &self.flags {
            s.push_str(&format!("flag = {flag}\n"));
        }
        s
    }
}

/// `min{H^{1/(4s)} λ_{L+1}^{1/(2s)}, λ_L^{1/s}}`.
fn spectral_mesh_bound(inputs: &PlanInputs, f: &Functionals) -> f64 {
    let s = inputs.s;
    (f.h_l.powf(1.0 / (4.0 * s)) * f.lambda_l1.powf(1.0 / (2.0 * s))).min(f.lambda_l.powf(1.0 / s))
}

pub fn plan_parameters(inputs: &PlanInputs, regime: Regime) -> Result<Plan> {
    inputs.validate()?;
    let l = truncation_level(inputs.eps, inputs.s, inputs.d);
    let f = resolve_functionals(inputs, l)?;
    let th = thresholds_with(inputs, l, &f);
    let eps = inputs.eps;
    let (s, d, p) = (inputs.s, inputs.d as f64, inputs.p());
    let alpha = inputs.alpha;
    let lf = l as f64;
    let k = kappa(inputs, &f);
    let hb = spectral_mesh_bound(inputs, &f);
    let c = inputs.constant;

    let mut terms: Vec<(String, f64)> = vec![
        ("H_L".into(), f.h_l),
        ("lambda_L".into(), f.lambda_l),
        ("lambda_L+1".into(), f.lambda_l1),
        ("kappa".into(), k),
        ("spectral_mesh_bound".into(), hb),
    ];
    let rate_term = eps.powf(-p / alpha) * lf.powf(inputs.gamma * p / alpha);
    let mesh_term = hb.powf(-d * p);
    let (m_terms, capped): (Vec<(&str, f64)>, bool) = match regime {
        Regime::Case1 => (
            vec![
                ("M_bar", th.m_bar.value as f64),
                ("rate", rate_term),
                ("mesh", mesh_term),
            ],
            th.m_bar.capped,
        ),
        Regime::Case2 => {
            let exponent = (2.0 * (2.0 * s + d) * inputs.beta + 2.0 * s * d * inputs.gamma) / (s * d);
            (
                vec![
                    ("M_tilde", th.m_tilde.value as f64),
                    ("log_rate", lf.powf(exponent) * eps.powi(-2)),
                ],
                th.m_tilde.capped,
            )
        }
        Regime::Case3 => (
            vec![
                ("M_hat", th.m_hat.value as f64),
                ("M_prime", th.m_prime.value as f64),
                ("rate", rate_term),
                ("mesh", mesh_term),
            ],
            th.m_hat.capped || th.m_prime.capped,
        ),
    };
    let mut m_eps: f64 = 1.0;
    for (name, v) in &m_terms {
        terms.push(((*name).to_string(), *v));
        m_eps = m_eps.max(*v);
    }
    m_eps = (c * m_eps).ceil().max(1.0);
    terms.push(("M_eps".into(), m_eps));

    let sample_mesh = m_eps.powf(-1.0 / (d * p));
    // (L^{1/2} ε^{−1} e^{−Mκ})^{1/d}, in log space
    let sampling_floor = ((log_sampling_prefactor(inputs, l) - m_eps * k) / d).exp();
    let dominance = (-m_eps.powf(1.0 / p) / d).exp();
    terms.push(("sample_mesh".into(), sample_mesh));
    terms.push(("sampling_floor".into(), sampling_floor));
    terms.push(("dominance_mesh".into(), dominance));

    let (h_lo, h_hi) = match regime {
        Regime::Case1 => (sample_mesh, hb.min(inputs.h0)),
        Regime::Case2 => (
            sampling_floor,
            hb.min(sample_mesh).min(inputs.h0).min(dominance),
        ),
        Regime::Case3 => (
            sampling_floor.max(dominance),
            hb.min(sample_mesh).min(inputs.h0),
        ),
    };
    let underflow = !(h_hi > 0.0);
    let vacuous = underflow
        || match regime {
            // the branch condition n_h < M^{1/(2α+1)} is strict
            Regime::Case1 => !(h_lo < h_hi),
            _ => !(h_lo <= h_hi),
        };
    let mut flags = Vec::new();
    if underflow {
        flags.push("mesh upper bound underflows to zero".to_string());
    } else if vacuous {
        flags.push("empty mesh interval".to_string());
    }
    if capped {
        flags.push(format!("threshold search reached cap {}", inputs.cap));
    }
    Ok(Plan {
        regime,
        l_eps: l,
        m_eps,
        h_lo,
        h_hi,
        h_eps: h_hi,
        vacuous,
        capped,
        terms,
        flags,
    })
}

/// Re-check a plan against its own defining inequalities.
pub fn verify_plan(inputs: &PlanInputs, plan: &Plan) -> Result<bool> {
    if plan.vacuous || plan.capped {
        return Ok(true);
    }
    let l = truncation_level(inputs.eps, inputs.s, inputs.d);
    let f = resolve_functionals(inputs, l)?;
    let th = thresholds_with(inputs, l, &f);
    let (d, p) = (inputs.d as f64, inputs.p());
    let m = plan.m_eps;
    let h = plan.h_eps;
    let tol = 1e-12;
    let mut ok = l == plan.l_eps && h >= plan.h_lo * (1.0 - tol) && h <= plan.h_hi * (1.0 + tol);
    ok &= h <= inputs.h0 * (1.0 + tol);
    let n_h = h.powf(-d);
    let branch = m.powf(1.0 / p);
    match plan.regime {
        Regime::Case1 => {
            ok &= m >= th.m_bar.value as f64;
            ok &= n_h < branch * (1.0 + tol);
        }
        Regime::Case2 => {
            ok &= m >= th.m_tilde.value as f64;
            ok &= n_h >= branch * (1.0 - tol);
            // log term dominates: M^{1/p} ≤ d log(1/h)
            ok &= branch <= d * (1.0 / h).ln() * (1.0 + tol);
        }
        Regime::Case3 => {
            ok &= m >= th.m_hat.value as f64 && m >= th.m_prime.value as f64;
            ok &= n_h >= branch * (1.0 - tol);
            ok &= branch >= d * (1.0 / h).ln() * (1.0 - tol);
        }
    }
    Ok(ok)
}

/// The univariate Brownian-motion specialization.
///
/// `L = ⌈ε^{−2/3}⌉`, `M = max{Lambert threshold, ⌈ε^{−2/3}⌉^{8β+3} ε^{−2}}`
/// and `h = min{ε^{10/3}, M^{−1}, h₀}`; the ceiling that appears around
/// `ε^{10/3}` in the source expression is dropped and flagged, since it
/// would evaluate to 1.
pub fn brownian_plan(eps: f64, beta: f64, rho1: f64, h0: f64) -> Result<Plan> {
    let mut inputs = PlanInputs::brownian(eps);
    inputs.beta = beta;
    inputs.rho1 = rho1;
    inputs.h0 = h0;
    inputs.validate()?;
    let l = truncation_level(eps, 0.5, 1);
    let h_l = h_closed_brownian(l, 1);
    let k = rho1 * h_l;
    // L^{1/2} ε^{−1} e^{−Mκ} = M^{−1}  ⇔  M = −W₋₁(−κ ε L^{−1/2}) / κ
    let arg = -k * eps / (l as f64).sqrt();
    let lambert = if arg < -1.0 / std::f64::consts::E {
        1.0
    } else {
        (-lambert_w_m1(arg)? / k).ceil().max(1.0)
    };
    let ceil_l = eps.powf(-2.0 / 3.0).ceil();
    let poly = (ceil_l.powf(8.0 * beta + 3.0) * eps.powi(-2)).ceil();
    let m_eps = lambert.max(poly);
    let h_eps = eps.powf(10.0 / 3.0).min(1.0 / m_eps).min(h0);
    Ok(Plan {
        regime: Regime::Case2,
        l_eps: l,
        m_eps,
        h_lo: 0.0,
        h_hi: h_eps,
        h_eps,
        vacuous: false,
        capped: false,
        terms: vec![
            ("H_L".into(), h_l),
            ("lambert_threshold".into(), lambert),
            ("log_rate".into(), poly),
            ("M_eps".into(), m_eps),
            ("eps_mesh".into(), eps.powf(10.0 / 3.0)),
        ],
        flags: vec!["ceiling around eps^(10/3) read as eps^(10/3)".into()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_levels() {
        assert_eq!(truncation_level(0.01, 0.5, 1), 22);
        assert_eq!(truncation_level(0.1, 0.5, 1), 5);
    }

    #[test]
    fn m_tilde_example() {
        // least M with 10 e^{−M} ≤ M^{−1/3}: M = 2 gives 1.35 > 0.79, M = 3 gives 0.498 ≤ 0.693
        let th = sampling_threshold(10f64.ln(), 1.0, 3.0, DEFAULT_CAP);
        assert_eq!(th.value, 3);
        assert!(!th.capped);
    }

    #[test]
    fn huge_h_gives_threshold_one() {
        let mut i = PlanInputs::brownian(0.05);
        i.functionals = FunctionalSource::Explicit {
            h_l: 1e12,
            lambda_l: 0.1,
            lambda_l1: 0.05,
        };
        let th = fixed_point_thresholds(&i).unwrap();
        assert_eq!(th.m_tilde.value, 1);
        assert_eq!(th.m_hat.value, 1);
    }

    #[test]
    fn cap_is_reported() {
        let th = least_satisfying(1024, |_| false);
        assert!(th.capped);
        assert_eq!(th.value, 1024);
    }

    #[test]
    fn brownian_plan_basics() {
        let p = brownian_plan(0.1, 1.0, 1.0, 0.5).unwrap();
        assert_eq!(p.l_eps, 5);
        assert!(p.h_eps <= 0.5);
    }

    #[test]
    fn missing_spectrum_is_named() {
        let mut i = PlanInputs::brownian(0.01);
        i.functionals = FunctionalSource::Spectrum(vec![1.0, 0.5]);
        let err = plan_parameters(&i, Regime::Case2).unwrap_err();
        assert!(matches!(err, Error::MissingFunctional(_)));
    }
}
