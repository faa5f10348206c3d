//! Closed-form sample-complexity conditions and concentration tails.
//!
//! The universal constants in the sample-complexity conditions are unknown,
//! so they are taken as explicit inputs (1.0 is a reasonable default).
//! Tail probabilities are capped at 1.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::RestrictedNorms;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Domain(msg()))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    check(eps > 0.0 && eps < 1.0, || format!("eps must lie in (0, 1), got {eps}"))
}

fn check_constant(c: f64) -> Result<()> {
    check(c > 0.0 && c.is_finite(), || format!("constant must be positive, got {c}"))
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    check(v >= 0.0 && v.is_finite(), || format!("{name} must be finite and nonnegative, got {v}"))
}

/// C(1 + ‖Λ_S‖_∞) ln N ln(sk) ln(1/ε), the nonuniform Bernoulli condition.
pub fn m_nonuniform_bernoulli(norm_inf_s: f64, n: usize, s: usize, k: usize, eps: f64, c: f64) -> Result<f64> {
    check_nonneg("‖Λ_S‖_∞", norm_inf_s)?;
    check(n >= 2, || format!("N must be at least 2, got {n}"))?;
    check(s * k >= 2, || format!("sk must be at least 2, got {}", s * k))?;
    check_eps(eps)?;
    check_constant(c)?;
    Ok(c * (1.0 + norm_inf_s) * (n as f64).ln() * ((s * k) as f64).ln() * (1.0 / eps).ln())
}

/// C̃(1 + λs) ln²(6Nk) ln²(1/ε), the Gaussian condition.
pub fn m_gaussian(lambda: f64, n: usize, s: usize, k: usize, eps: f64, c: f64) -> Result<f64> {
    check_lambda(lambda)?;
    check(n >= 1 && s >= 1 && k >= 1, || format!("N, s, k must be positive, got {n}, {s}, {k}"))?;
    check_eps(eps)?;
    check_constant(c)?;
    let l1 = (6.0 * (n * k) as f64).ln();
    let l2 = (1.0 / eps).ln();
    Ok(c * (1.0 + lambda * s as f64) * l1 * l1 * l2 * l2)
}

/// C(1 + λs) ln(Nsk) ln(1/ε), the condition in terms of the maximal incoherence.
pub fn m_corollary(lambda: f64, n: usize, s: usize, k: usize, eps: f64, c: f64) -> Result<f64> {
    check_lambda(lambda)?;
    check(n * s * k >= 2, || format!("Nsk must be at least 2, got {}", n * s * k))?;
    check_eps(eps)?;
    check_constant(c)?;
    Ok(c * (1.0 + lambda * s as f64) * ((n * s * k) as f64).ln() * (1.0 / eps).ln())
}

/// δ⁻²(2‖Λ^S‖²_{2,∞} + (2/3) max(‖Λ^S‖, 1)) ln(2sk/ε), the restricted conditioning condition.
pub fn m_submatrix(two_inf_ss: f64, spec_ss: f64, s: usize, k: usize, delta: f64, eps: f64) -> Result<f64> {
    check_nonneg("‖Λ^S‖_{2,∞}", two_inf_ss)?;
    check_nonneg("‖Λ^S‖", spec_ss)?;
    check(s >= 1 && k >= 1, || format!("s and k must be positive, got {s}, {k}"))?;
    check(delta > 0.0 && delta < 1.0, || format!("delta must lie in (0, 1), got {delta}"))?;
    check_eps(eps)?;
    let inner = 2.0 * two_inf_ss * two_inf_ss + (2.0 / 3.0) * spec_ss.max(1.0);
    Ok(inner * (2.0 * (s * k) as f64 / eps).ln() / (delta * delta))
}

/// 6‖Λ_S‖²_{2,∞} ln(N(s+1)k/ε): the size at which the off-support cross term is at most 1.
pub fn m_cross_term(two_inf_s: f64, n: usize, s: usize, k: usize, eps: f64) -> Result<f64> {
    check_nonneg("‖Λ_S‖_{2,∞}", two_inf_s)?;
    check(n >= 1 && s >= 1 && k >= 1, || format!("N, s, k must be positive, got {n}, {s}, {k}"))?;
    check_eps(eps)?;
    Ok(6.0 * two_inf_s * two_inf_s * ((n * (s + 1) * k) as f64 / eps).ln())
}

fn check_lambda(lambda: f64) -> Result<()> {
    check((0.0..=1.0).contains(&lambda), || format!("lambda must lie in [0, 1], got {lambda}"))
}

fn cap(p: f64) -> f64 {
    p.min(1.0)
}

fn bernstein_exponent(sigma2: f64, k: f64, t: f64) -> f64 {
    let den = sigma2 + k * t / 3.0;
    if t == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::NEG_INFINITY
    } else {
        -(t * t / 2.0) / den
    }
}

/// 2r exp(−(t²/2)/(σ² + Kt/3)) for sums of self-adjoint matrices of rank ≤ r.
pub fn bernstein_matrix_tail(sigma2: f64, k: f64, t: f64, r: f64) -> Result<f64> {
    for (name, v) in [("sigma2", sigma2), ("K", k), ("t", t)] {
        check_nonneg(name, v)?;
    }
    check(r >= 1.0, || format!("r must be at least 1, got {r}"))?;
    Ok(cap(2.0 * r * bernstein_exponent(sigma2, k, t).exp()))
}

/// (d₁ + d₂) exp(−(t²/2)/(σ² + Kt/3)) for rectangular d₁×d₂ sums.
pub fn bernstein_rect_tail(sigma2: f64, k: f64, t: f64, d1: f64, d2: f64) -> Result<f64> {
    for (name, v) in [("sigma2", sigma2), ("K", k), ("t", t)] {
        check_nonneg(name, v)?;
    }
    check(d1 >= 1.0 && d2 >= 1.0, || format!("dimensions must be at least 1, got {d1}, {d2}"))?;
    Ok(cap((d1 + d2) * bernstein_exponent(sigma2, k, t).exp()))
}

/// exp(−(t²/2)/(Mσ² + 2K√(𝔼Z²) + tK/3)) for the norm of a vector sum.
pub fn bernstein_vector_tail(ez2: f64, sigma2_m: f64, k: f64, t: f64) -> Result<f64> {
    for (name, v) in [("EZ2", ez2), ("sigma2M", sigma2_m), ("K", k), ("t", t)] {
        check_nonneg(name, v)?;
    }
    let den = sigma2_m + 2.0 * k * ez2.sqrt() + t * k / 3.0;
    if t == 0.0 {
        return Ok(1.0);
    }
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(cap((-(t * t / 2.0) / den).exp()))
}

fn check_m(m: usize) -> Result<f64> {
    check(m >= 1, || "m must be at least 1".to_string())?;
    Ok(m as f64)
}

fn exp_ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        1.0
    } else if den == 0.0 {
        0.0
    } else {
        (-num / den).exp()
    }
}

/// P(‖Ã_S*Ã_S − P_S‖ > δ) via matrix Bernstein with σ² = ‖Λ^S‖²_{2,∞}/m,
/// K = max(‖Λ^S‖, 1)/m and rank sk.
pub fn submatrix_tail(norms: &RestrictedNorms, s: usize, k: usize, delta: f64, m: usize) -> Result<f64> {
    let mf = check_m(m)?;
    check(s >= 1 && k >= 1, || format!("s and k must be positive, got {s}, {k}"))?;
    let sigma2 = norms.two_inf_ss * norms.two_inf_ss / mf;
    let kk = norms.spec_ss.max(1.0) / mf;
    bernstein_matrix_tail(sigma2, kk, delta, (s * k) as f64)
}

/// Bound on P(max_{ℓ∉S} ‖Ã_ℓ* Ã_S v‖ ≥ κ‖Λ_S‖_{2,∞}/√m + t) for max‖v_i‖ ≤ κ ≤ 1.
pub fn aux1_tail(norms: &RestrictedNorms, n: usize, kappa: f64, t: f64, m: usize) -> Result<f64> {
    let mf = check_m(m)?;
    check_nonneg("t", t)?;
    check((0.0..=1.0).contains(&kappa), || format!("kappa must lie in [0, 1], got {kappa}"))?;
    let (a2, a) = (norms.two_inf_s * norms.two_inf_s, norms.inf_s);
    let den = 2.0 * kappa * kappa * a2 + 4.0 * kappa * kappa * a + t * kappa * a;
    Ok(cap(n as f64 * exp_ratio(t * t * mf, den)))
}

/// Bound on P(‖(Ã_S*Ã_S − P_S) v‖₂ ≥ (‖Λ^S‖_{2,∞}/√m + t)‖v‖₂).
pub fn aux2_tail(norms: &RestrictedNorms, t: f64, m: usize) -> Result<f64> {
    let mf = check_m(m)?;
    check_nonneg("t", t)?;
    let (a2, a) = (norms.two_inf_ss * norms.two_inf_ss, norms.inf_ss);
    let den = 8.0 + 4.0 * a + 2.0 * a2 + t * (4.0 / 3.0 + (2.0 / 3.0) * a);
    Ok(cap(exp_ratio(mf * t * t, den)))
}

/// Bound on P(‖(Ã_S*Ã_S − P_S) v‖_{2,∞} ≥ (‖Λ^S‖_{2,∞}/√m + t)‖v‖_{2,∞}).
pub fn aux22_tail(norms: &RestrictedNorms, s: usize, t: f64, m: usize) -> Result<f64> {
    let mf = check_m(m)?;
    check_nonneg("t", t)?;
    let (a2, a) = (norms.two_inf_ss * norms.two_inf_ss, norms.inf_ss);
    let den = 4.0 * a + 2.0 * a2 + (2.0 / 3.0) * t * a;
    Ok(cap(s as f64 * exp_ratio(mf * t * t, den)))
}

/// Bound on P(max_{i∉S} ‖Ã_S* Ã_i‖ ≥ t), stated for t ∈ (0, 3/2).
pub fn aux3_tail(norms: &RestrictedNorms, n: usize, s: usize, k: usize, t: f64, m: usize) -> Result<f64> {
    let mf = check_m(m)?;
    check(t > 0.0 && t < 1.5, || format!("t must lie in (0, 3/2), got {t}"))?;
    let den = 3.0 * norms.two_inf_s * norms.two_inf_s;
    Ok(cap(2.0 * ((s + 1) * n * k) as f64 * exp_ratio(t * t * mf, den)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremId {
    NonuniMain,
    GaussMain,
    NonuniCorol,
    RobustMain,
    RobustGauss,
    Submatrix,
    Aux3Imp3,
}

impl TheoremId {
    pub const ALL: [TheoremId; 7] = [
        TheoremId::NonuniMain,
        TheoremId::GaussMain,
        TheoremId::NonuniCorol,
        TheoremId::RobustMain,
        TheoremId::RobustGauss,
        TheoremId::Submatrix,
        TheoremId::Aux3Imp3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TheoremId::NonuniMain => "nonuni_main",
            TheoremId::GaussMain => "gauss_main",
            TheoremId::NonuniCorol => "nonuni_corol",
            TheoremId::RobustMain => "robust_main",
            TheoremId::RobustGauss => "robust_gauss",
            TheoremId::Submatrix => "submatrix",
            TheoremId::Aux3Imp3 => "aux3_imp3",
        }
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything any of the conditions may consume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityInputs {
    #[serde(rename = "N")]
    pub n: usize,
    pub s: usize,
    pub k: usize,
    pub eps: f64,
    /// Maximal incoherence λ.
    pub lambda: f64,
    pub norms: RestrictedNorms,
    /// Universal constant (C or C̃).
    pub c: f64,
    /// Conditioning level for the restricted Gram.
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexityEstimate {
    pub theorem_id: TheoremId,
    pub m_required: f64,
    pub inputs: ComplexityInputs,
}

pub fn estimate(theorem_id: TheoremId, inputs: &ComplexityInputs) -> Result<ComplexityEstimate> {
    let i = inputs;
    let m_required = match theorem_id {
        TheoremId::NonuniMain | TheoremId::RobustMain => {
            m_nonuniform_bernoulli(i.norms.inf_s, i.n, i.s, i.k, i.eps, i.c)?
        }
        TheoremId::GaussMain | TheoremId::RobustGauss => m_gaussian(i.lambda, i.n, i.s, i.k, i.eps, i.c)?,
        TheoremId::NonuniCorol => m_corollary(i.lambda, i.n, i.s, i.k, i.eps, i.c)?,
        TheoremId::Submatrix => m_submatrix(i.norms.two_inf_ss, i.norms.spec_ss, i.s, i.k, i.delta, i.eps)?,
        TheoremId::Aux3Imp3 => m_cross_term(i.norms.two_inf_s, i.n, i.s, i.k, i.eps)?,
    };
    Ok(ComplexityEstimate {
        theorem_id,
        m_required,
        inputs: *inputs,
    })
}
