//! Recovery certificates for a fixed support.
//!
//! All quantities refer to the rescaled operator Ã = A/√m, whatever the
//! normalization flag of the ensemble. Restricted Gram matrices are formed in
//! coefficient space, where the block (i, j) of Ã_S*Ã_S restricted to 𝓗 is
//! (1/m Σ_l a_li a_lj) U_iᵀU_j.

use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block::{BlockForm, BlockSupport, BlockVector};
use crate::bounds;
use crate::error::{Error, Result};
use crate::frame::FusionFrame;
use crate::linalg::{spectral_norm, sym_eigen_range};
use crate::measurement::{MatrixKind, MeasurementEnsemble};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GramConditionReport {
    /// ‖[Ã_S*Ã_S]⁻¹‖ on 𝓗_S; +∞ when the restricted Gram is singular.
    pub inv_norm: f64,
    /// max_{ℓ∉S} ‖Ã_S*Ã_ℓ‖ (0 when S is everything).
    pub cross_max: f64,
    /// ‖Ã_S*Ã_S − P_S‖
    pub deviation: f64,
}

/// (1/|rows|) Σ_{l∈rows} a_li a_lj
fn row_mean_product(a: &DMatrix<f64>, rows: &Range<usize>, i: usize, j: usize) -> f64 {
    let len = rows.len() as f64;
    rows.clone().map(|l| a[(l, i)] * a[(l, j)]).sum::<f64>() / len
}

/// Restricted Gram in coefficient space for the given rows, averaged over those rows.
fn restricted_gram(e: &MeasurementEnsemble, support: &BlockSupport, rows: Range<usize>) -> DMatrix<f64> {
    let frame = e.frame();
    let k = frame.subspace_dim();
    let idx = support.indices();
    let s = idx.len();
    let a = e.matrix();
    let mut g = DMatrix::zeros(s * k, s * k);
    for (p, &i) in idx.iter().enumerate() {
        for (q, &j) in idx.iter().enumerate().skip(p) {
            let c = row_mean_product(a, &rows, i, j);
            let block = if i == j {
                DMatrix::identity(k, k) * c
            } else {
                frame.basis(i).tr_mul(frame.basis(j)) * c
            };
            g.view_mut((p * k, q * k), (k, k)).copy_from(&block);
            if p != q {
                g.view_mut((q * k, p * k), (k, k)).copy_from(&block.transpose());
            }
        }
    }
    g
}

/// The sk×k coefficient matrix of Ã_S*Ã_ℓ.
fn cross_block(e: &MeasurementEnsemble, support: &BlockSupport, l: usize) -> DMatrix<f64> {
    let frame = e.frame();
    let k = frame.subspace_dim();
    let rows = 0..e.num_measurements();
    let idx = support.indices();
    let mut out = DMatrix::zeros(idx.len() * k, k);
    for (p, &i) in idx.iter().enumerate() {
        let c = row_mean_product(e.matrix(), &rows, i, l);
        out.view_mut((p * k, 0), (k, k))
            .copy_from(&(frame.basis(i).tr_mul(frame.basis(l)) * c));
    }
    out
}

fn check_support(e: &MeasurementEnsemble, support: &BlockSupport) -> Result<()> {
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    support.check_within(e.num_blocks())
}

pub fn gram_conditions(e: &MeasurementEnsemble, support: &BlockSupport) -> Result<GramConditionReport> {
    check_support(e, support)?;
    let g = restricted_gram(e, support, 0..e.num_measurements());
    let (lo, hi) = sym_eigen_range(&g);
    let deviation = (1.0 - lo).abs().max((hi - 1.0).abs());
    let inv_norm = if lo > 1e-12 * hi.max(1.0) { 1.0 / lo } else { f64::INFINITY };
    let cross_max = support
        .complement(e.num_blocks())
        .indices()
        .iter()
        .map(|&l| spectral_norm(&cross_block(e, support, l)))
        .fold(0.0, f64::max);
    Ok(GramConditionReport {
        inv_norm,
        cross_max,
        deviation,
    })
}

/// Row partition m_1, …, m_L of the golfing scheme.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GolfingSchedule {
    partition: Vec<usize>,
}

impl GolfingSchedule {
    /// L = ⌈ln s / ln ln N⌉ + 3. The ratio is taken as 0 for s = 1 and as 1 when
    /// ln ln N ≤ 0 (N ≤ 2) with s > 1.
    pub fn default_levels(n: usize, s: usize) -> usize {
        let lnln = (n as f64).ln().ln();
        let ratio = if s <= 1 {
            0
        } else if !(lnln > 0.0) {
            1
        } else {
            ((s as f64).ln() / lnln).ceil() as usize
        };
        ratio + 3
    }

    /// Default schedule: L levels (at most m), the first block carrying an
    /// L-times larger share than each of the others.
    pub fn default_for(m: usize, n: usize, s: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Schedule("m must be at least 1".into()));
        }
        let levels = Self::default_levels(n, s).min(m);
        if levels == 1 {
            return Ok(Self { partition: vec![m] });
        }
        let first = ((m * levels) as f64 / (2 * levels - 1) as f64).floor() as usize;
        let first = first.clamp(1, m - (levels - 1));
        let rest = m - first;
        let (base, extra) = (rest / (levels - 1), rest % (levels - 1));
        let mut partition = vec![first];
        partition.extend((0..levels - 1).map(|i| base + usize::from(i < extra)));
        Ok(Self { partition })
    }

    pub fn custom(partition: Vec<usize>, m: usize) -> Result<Self> {
        if partition.is_empty() || partition.contains(&0) {
            return Err(Error::Schedule("partition sizes must be positive and nonempty".into()));
        }
        let total: usize = partition.iter().sum();
        if total != m {
            return Err(Error::Schedule(format!("partition sums to {total}, expected m = {m}")));
        }
        Ok(Self { partition })
    }

    pub fn levels(&self) -> usize {
        self.partition.len()
    }

    pub fn partition(&self) -> &[usize] {
        &self.partition
    }

    fn ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.partition
            .iter()
            .map(|&len| {
                let r = start..start + len;
                start += len;
                r
            })
            .collect()
    }
}

/// Output of the golfing scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    pub support: BlockSupport,
    /// u = Ã*h, N ambient blocks.
    pub u: BlockVector,
    /// m ambient blocks.
    pub h: BlockVector,
    /// ‖w^(n)‖₂ for n = 0..L.
    pub residual_l2: Vec<f64>,
    /// ‖w^(n)‖_{2,∞} for n = 0..L.
    pub residual_l2inf: Vec<f64>,
    pub partition: Vec<usize>,
    /// ‖u_S − sgn(x_S)‖₂
    pub cond2_on_s: f64,
    /// max_{i∉S} ‖u_i‖₂
    pub cond2_off_s: f64,
    pub h_norm: f64,
    /// ‖u − Ã*h‖₂
    pub identity_residual: f64,
    /// Largest deviation of a step from w^(n) = [P_S − Ã^(n)_S*Ã^(n)_S (m/m_n)] w^(n−1).
    pub recursion_residual: f64,
}

impl DualCertificate {
    /// ‖w^(n)‖₂ / ‖w^(n−1)‖₂ for n = 1..L.
    pub fn contractions(&self) -> Vec<f64> {
        self.residual_l2
            .windows(2)
            .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
            .collect()
    }

    pub fn identities_hold(&self, tol: f64) -> bool {
        self.identity_residual <= tol && self.recursion_residual <= tol
    }

    pub fn to_json(&self, report: Option<&GramConditionReport>) -> Result<String> {
        let dump = CertificateDump {
            support: self.support.indices().to_vec(),
            partition: self.partition.clone(),
            residual_l2: self.residual_l2.clone(),
            residual_l2inf: self.residual_l2inf.clone(),
            contractions: self.contractions(),
            cond2_on_s: self.cond2_on_s,
            cond2_off_s: self.cond2_off_s,
            h_norm: self.h_norm,
            identity_residual: self.identity_residual,
            recursion_residual: self.recursion_residual,
            gram: report.copied(),
            verdict: report.map(|r| verify_inexact(self, r)),
        };
        Ok(serde_json::to_string_pretty(&dump)?)
    }
}

#[derive(Serialize)]
struct CertificateDump {
    support: Vec<usize>,
    partition: Vec<usize>,
    residual_l2: Vec<f64>,
    residual_l2inf: Vec<f64>,
    contractions: Vec<f64>,
    cond2_on_s: f64,
    cond2_off_s: f64,
    h_norm: f64,
    identity_residual: f64,
    recursion_residual: f64,
    gram: Option<GramConditionReport>,
    verdict: Option<InexactVerdict>,
}

/// Runs the golfing iteration on the support of `x` (its exactly nonzero blocks).
pub fn golfing_build(e: &MeasurementEnsemble, x: &BlockVector, schedule: &GolfingSchedule) -> Result<DualCertificate> {
    let frame = e.frame().clone();
    let (n, d) = (e.num_blocks(), frame.ambient_dim());
    let m = e.num_measurements();
    if x.num_blocks() != n || x.block_len() != d {
        return Err(Error::mismatch(format!("{n}x{d}"), format!("{}x{}", x.num_blocks(), x.block_len())));
    }
    let support = x.support(0.0);
    check_support(e, &support)?;
    let total: usize = schedule.partition().iter().sum();
    if total != m {
        return Err(Error::Schedule(format!("partition sums to {total}, expected m = {m}")));
    }
    let a = e.matrix();
    let idx = support.indices();
    let sqrt_m = (m as f64).sqrt();

    let sgn = x.block_sgn().mask(&support)?;
    let mut w = sgn.clone();
    let mut u = BlockVector::zeros(n, d, BlockForm::Ambient);
    let mut h = BlockVector::zeros(m, d, BlockForm::Ambient);
    let mut residual_l2 = vec![w.restrict(&support)?.norm_l2()];
    let mut residual_l2inf = vec![w.restrict(&support)?.norm_l2inf()];
    let mut recursion_residual: f64 = 0.0;

    for rows in schedule.ranges() {
        let mn = rows.len() as f64;
        // z_l = Σ_{j∈S} a_lj P_j w_j for the rows of this step
        let mut delta_u = BlockVector::zeros(n, d, BlockForm::Ambient);
        let projected: Vec<Vec<f64>> = idx.iter().map(|&j| frame.project(j, w.block(j))).collect();
        for l in rows.clone() {
            let mut z = vec![0.0; d];
            for (p, &j) in idx.iter().enumerate() {
                let c = a[(l, j)];
                z.iter_mut().zip(&projected[p]).for_each(|(t, v)| *t += c * v);
            }
            h.block_mut(l).iter_mut().zip(&z).for_each(|(t, v)| *t = v * sqrt_m / mn);
            for i in 0..n {
                let c = a[(l, i)] / mn;
                if c != 0.0 {
                    delta_u.block_mut(i).iter_mut().zip(&z).for_each(|(t, v)| *t += c * v);
                }
            }
        }
        for i in 0..n {
            let p = frame.project(i, delta_u.block(i));
            delta_u.block_mut(i).copy_from_slice(&p);
        }
        u = u.add(&delta_u)?;

        // independent path for the recursion: coefficients of w through the step Gram
        let g = restricted_gram(e, &support, rows);
        let w_coeff = frame.compress(&w)?.restrict(&support)?;
        let predicted = DVector::from_column_slice(w_coeff.as_slice())
            - &g * DVector::from_column_slice(w_coeff.as_slice());

        w = sgn.sub(&u.mask(&support)?)?;
        let got = frame.compress(&w)?.restrict(&support)?;
        let dev = (DVector::from_column_slice(got.as_slice()) - predicted).norm();
        recursion_residual = recursion_residual.max(dev);

        let ws = w.restrict(&support)?;
        residual_l2.push(ws.norm_l2());
        residual_l2inf.push(ws.norm_l2inf());
    }

    let u_from_h = e.with_normalization(true).adjoint_ap(&h)?;
    let identity_residual = u.distance(&u_from_h)?;
    let cond2_on_s = *residual_l2.last().expect("at least one entry");
    let cond2_off_s = support
        .complement(n)
        .indices()
        .iter()
        .map(|&i| u.block_norm(i))
        .fold(0.0, f64::max);
    Ok(DualCertificate {
        support,
        h_norm: h.norm_l2(),
        u,
        h,
        residual_l2,
        residual_l2inf,
        partition: schedule.partition().to_vec(),
        cond2_on_s,
        cond2_off_s,
        identity_residual,
        recursion_residual,
    })
}

pub const INV_NORM_MAX: f64 = 2.0;
pub const CROSS_MAX: f64 = 1.0;
pub const ON_SUPPORT_GAP_MAX: f64 = 0.25;
pub const OFF_SUPPORT_MAX: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InexactVerdict {
    pub passed: bool,
    pub reasons: Vec<String>,
}

/// The four sufficient conditions for x to be the unique ℓ2,1 minimiser.
pub fn verify_inexact(cert: &DualCertificate, report: &GramConditionReport) -> InexactVerdict {
    let mut reasons = Vec::new();
    if !(report.inv_norm <= INV_NORM_MAX) {
        reasons.push("restricted inverse norm".to_string());
    }
    if !(report.cross_max <= CROSS_MAX) {
        reasons.push("off-support cross term".to_string());
    }
    if !(cert.cond2_on_s <= ON_SUPPORT_GAP_MAX) {
        reasons.push("on-support dual gap".to_string());
    }
    if !(cert.cond2_off_s <= OFF_SUPPORT_MAX) {
        reasons.push("off-support dual magnitude".to_string());
    }
    InexactVerdict {
        passed: reasons.is_empty(),
        reasons,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustParams {
    pub delta: f64,
    pub beta: f64,
    pub gamma: f64,
    pub theta: f64,
    pub tau: f64,
}

impl RobustParams {
    /// The tightest parameters the measured values allow.
    pub fn from_measured(cert: &DualCertificate, report: &GramConditionReport) -> Self {
        Self {
            delta: report.deviation,
            beta: report.cross_max,
            gamma: cert.cond2_on_s,
            theta: cert.cond2_off_s,
            tau: cert.h_norm / (cert.support.len() as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustVerdict {
    pub valid: bool,
    pub b: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub reasons: Vec<String>,
}

impl RobustVerdict {
    /// C₁σ + (C₂ + C₃√s)η
    pub fn error_bound(&self, sigma_s: f64, eta: f64, s: usize) -> f64 {
        self.c1 * sigma_s + (self.c2 + self.c3 * (s as f64).sqrt()) * eta
    }
}

/// Stability constants b = θ + βγ/(1−δ),
/// C₁ = (1 + β/(1−δ))·2/(1−b),
/// C₂ = 2√(1+δ)/(1−δ) + (1 + β/(1−δ))·2γ√(1+δ)/((1−δ)(1−b)),
/// C₃ = (1 + β/(1−δ))·2τ/(1−b).
pub fn robust_constants(p: &RobustParams) -> (f64, f64, f64, f64) {
    let RobustParams {
        delta,
        beta,
        gamma,
        theta,
        tau,
    } = *p;
    let b = theta + beta * gamma / (1.0 - delta);
    let lead = 1.0 + beta / (1.0 - delta);
    let root = (1.0 + delta).sqrt();
    let c1 = lead * 2.0 / (1.0 - b);
    let c2 = 2.0 * root / (1.0 - delta) + lead * 2.0 * gamma * root / ((1.0 - delta) * (1.0 - b));
    let c3 = lead * 2.0 * tau / (1.0 - b);
    (b, c1, c2, c3)
}

/// Checks the measured values against `params` and evaluates the constants.
pub fn verify_robust(cert: &DualCertificate, report: &GramConditionReport, params: &RobustParams) -> Result<RobustVerdict> {
    for (name, v) in [
        ("delta", params.delta),
        ("beta", params.beta),
        ("gamma", params.gamma),
        ("theta", params.theta),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(format!("{name} must lie in [0, 1], got {v}")));
        }
    }
    if !(params.tau >= 0.0) || !params.tau.is_finite() {
        return Err(Error::Domain(format!("tau must be finite and nonnegative, got {}", params.tau)));
    }
    let mut reasons = Vec::new();
    if params.delta >= 1.0 {
        reasons.push("delta must be below 1".to_string());
    }
    let (b, c1, c2, c3) = robust_constants(params);
    if !(b < 1.0) {
        reasons.push(format!("b = {b} is not below 1"));
    }
    let s = cert.support.len() as f64;
    let checks = [
        (report.deviation <= params.delta, "restricted Gram deviation exceeds delta"),
        (report.cross_max <= params.beta, "off-support cross term exceeds beta"),
        (cert.cond2_on_s <= params.gamma, "on-support dual gap exceeds gamma"),
        (cert.cond2_off_s <= params.theta, "off-support dual magnitude exceeds theta"),
        (cert.h_norm <= params.tau * s.sqrt() * (1.0 + 1e-12), "dual preimage norm exceeds tau·sqrt(s)"),
    ];
    for (ok, why) in checks {
        if !ok {
            reasons.push(why.to_string());
        }
    }
    Ok(RobustVerdict {
        valid: reasons.is_empty(),
        b,
        c1,
        c2,
        c3,
        reasons,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailEstimator {
    /// ‖Ã_S*Ã_S − P_S‖ > δ
    Deviation,
    /// max_{ℓ∉S} ‖Ã_ℓ*Ã_S v‖₂ ≥ κ‖Λ_S‖_{2,∞}/√m + t
    Aux1,
    /// ‖(Ã_S*Ã_S − P_S)v‖₂ ≥ (‖Λ^S‖_{2,∞}/√m + t)‖v‖₂
    Aux2,
    /// ‖(Ã_S*Ã_S − P_S)v‖_{2,∞} ≥ (‖Λ^S‖_{2,∞}/√m + t)‖v‖_{2,∞}
    Aux22,
    /// max_{ℓ∉S} ‖Ã_S*Ã_ℓ‖ ≥ t
    Aux3,
}

#[derive(Debug, Clone)]
pub struct TailParams {
    pub frame: Arc<FusionFrame>,
    pub support: BlockSupport,
    pub kind: MatrixKind,
    pub m: usize,
    /// Deviation level δ for [`TailEstimator::Deviation`], else the excess t.
    pub t: f64,
    /// Block norm bound for [`TailEstimator::Aux1`].
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailAudit {
    pub frequency: f64,
    pub bound: f64,
    pub standard_error: f64,
    pub trials: usize,
    pub pass: bool,
}

/// Monte-Carlo frequency of a concentration event next to its closed-form bound.
/// Passes when frequency ≤ bound + 3·√(p(1−p)/trials) with p the capped bound.
pub fn empirical_tail(estimator: TailEstimator, params: &TailParams, trials: usize, seed: u64) -> Result<TailAudit> {
    if trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    let frame = &params.frame;
    let n = frame.num_subspaces();
    let k = frame.subspace_dim();
    check_support_n(&params.support, n)?;
    let norms = frame.incoherence().restricted_norms(&params.support)?;
    let (s, m, t) = (params.support.len(), params.m, params.t);
    let mf = m as f64;
    let bound = match estimator {
        TailEstimator::Deviation => bounds::submatrix_tail(&norms, s, k, t, m)?,
        TailEstimator::Aux1 => bounds::aux1_tail(&norms, n, params.kappa, t, m)?,
        TailEstimator::Aux2 => bounds::aux2_tail(&norms, t, m)?,
        TailEstimator::Aux22 => bounds::aux22_tail(&norms, s, t, m)?,
        TailEstimator::Aux3 => bounds::aux3_tail(&norms, n, s, k, t, m)?,
    };

    // fixed test vector in 𝓗_S, coefficient blocks of norm κ (or 1)
    let mut rng = seeded(derive_seed(seed, 0x7465_7374));
    let block_norm = if estimator == TailEstimator::Aux1 { params.kappa } else { 1.0 };
    let mut v = DVector::<f64>::zeros(s * k);
    for p in 0..s {
        let mut blk: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let nrm = blk.iter().map(|a| a * a).sum::<f64>().sqrt();
        blk.iter_mut().for_each(|a| *a *= block_norm / nrm);
        v.rows_mut(p * k, k).copy_from_slice(&blk);
    }
    let v_l2 = v.norm();
    let v_l2inf = block_max_norm(&v, k);

    let hits: usize = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<usize> {
            let e = MeasurementEnsemble::draw(params.kind, m, frame.clone(), derive_seed(seed, trial as u64 + 1), true)?;
            let hit = match estimator {
                TailEstimator::Deviation => gram_conditions(&e, &params.support)?.deviation > t,
                TailEstimator::Aux3 => gram_conditions(&e, &params.support)?.cross_max >= t,
                TailEstimator::Aux2 | TailEstimator::Aux22 => {
                    let g = restricted_gram(&e, &params.support, 0..m);
                    let r = &g * &v - &v;
                    let level = norms.two_inf_ss / mf.sqrt() + t;
                    if estimator == TailEstimator::Aux2 {
                        r.norm() >= level * v_l2
                    } else {
                        block_max_norm(&r, k) >= level * v_l2inf
                    }
                }
                TailEstimator::Aux1 => {
                    let level = params.kappa * norms.two_inf_s / mf.sqrt() + t;
                    let mut worst: f64 = 0.0;
                    for &l in params.support.complement(n).indices() {
                        let c = cross_block(&e, &params.support, l);
                        worst = worst.max((c.transpose() * &v).norm());
                    }
                    worst >= level
                }
            };
            Ok(usize::from(hit))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();

    let frequency = hits as f64 / trials as f64;
    let p = bound.min(1.0);
    let standard_error = (p * (1.0 - p) / trials as f64).sqrt();
    Ok(TailAudit {
        frequency,
        bound,
        standard_error,
        trials,
        pass: frequency <= bound + 3.0 * standard_error,
    })
}

fn check_support_n(support: &BlockSupport, n: usize) -> Result<()> {
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    support.check_within(n)
}

fn block_max_norm(v: &DVector<f64>, k: usize) -> f64 {
    v.as_slice()
        .chunks_exact(k)
        .map(|b| b.iter().map(|a| a * a).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn orthogonal_frame(d: usize, seed: u64) -> Arc<FusionFrame> {
        let q = FusionFrame::random(1, d, d, seed).unwrap().basis(0).clone();
        let bases = (0..d).map(|j| q.columns(j, 1).into_owned()).collect();
        Arc::new(FusionFrame::from_bases(bases, None).unwrap())
    }

    fn signal(frame: &FusionFrame, support: &[usize], seed: u64) -> BlockVector {
        let mut rng = seeded(seed);
        let k = frame.subspace_dim();
        let mut c = BlockVector::zeros(frame.num_subspaces(), k, BlockForm::Coefficient);
        for &j in support {
            for v in c.block_mut(j) {
                *v = rng.sample(StandardNormal);
            }
        }
        frame.expand(&c).unwrap()
    }

    /// Dense ambient oracle for Ã_S*Ã_S − P_S restricted to 𝓗_S, through an explicit basis.
    fn dense_deviation(e: &MeasurementEnsemble, support: &BlockSupport) -> f64 {
        let frame = e.frame();
        let (d, k, m) = (frame.ambient_dim(), frame.subspace_dim(), e.num_measurements());
        let idx = support.indices();
        // columns: Ã_P applied to each basis vector of 𝓗_S, as md-vectors
        let mut cols = DMatrix::zeros(m * d, idx.len() * k);
        for (p, &j) in idx.iter().enumerate() {
            for c in 0..k {
                let mut x = BlockVector::zeros(e.num_blocks(), d, BlockForm::Ambient);
                x.block_mut(j).copy_from_slice(frame.basis(j).column(c).as_slice());
                let y = e.with_normalization(true).apply_ap(&x).unwrap();
                cols.column_mut(p * k + c).copy_from_slice(y.as_slice());
            }
        }
        let g = cols.transpose() * &cols - DMatrix::identity(idx.len() * k, idx.len() * k);
        g.singular_values().max()
    }

    #[test]
    fn gram_matches_dense_oracle() {
        let f = Arc::new(FusionFrame::random(9, 5, 2, 3).unwrap());
        for seed in 0..5 {
            let e = MeasurementEnsemble::draw(MatrixKind::Gaussian, 7, f.clone(), seed, false).unwrap();
            let s = BlockSupport::new(vec![0, 4, 6]).unwrap();
            let r = gram_conditions(&e, &s).unwrap();
            assert!((r.deviation - dense_deviation(&e, &s)).abs() < 1e-10);
            assert!(r.inv_norm >= 0.0 && r.cross_max >= 0.0);
        }
    }

    #[test]
    fn orthogonal_single_measurement_gram_is_identity() {
        let f = orthogonal_frame(4, 9);
        let e = MeasurementEnsemble::new(DMatrix::from_row_slice(1, 4, &[1.0, -1.0, 1.0, 1.0]), MatrixKind::Bernoulli, f, false)
            .unwrap();
        let r = gram_conditions(&e, &BlockSupport::new(vec![0, 2, 3]).unwrap()).unwrap();
        assert!(r.deviation < 1e-15);
        assert!((r.inv_norm - 1.0).abs() < 1e-15);
        assert!(r.cross_max < 1e-15);
    }

    #[test]
    fn singleton_bernoulli_support_has_zero_deviation() {
        let f = Arc::new(FusionFrame::random(6, 4, 2, 1).unwrap());
        let e = MeasurementEnsemble::draw(MatrixKind::Bernoulli, 5, f, 2, false).unwrap();
        let r = gram_conditions(&e, &BlockSupport::new(vec![3]).unwrap()).unwrap();
        assert_eq!(r.deviation, 0.0);
    }

    #[test]
    fn singular_gram_reports_infinity() {
        // one measurement cannot resolve two blocks of a 3-dim subspace each in ℝ³
        let f = Arc::new(FusionFrame::random(3, 3, 3, 4).unwrap());
        let e = MeasurementEnsemble::draw(MatrixKind::Bernoulli, 1, f, 5, false).unwrap();
        let r = gram_conditions(&e, &BlockSupport::new(vec![0, 1]).unwrap()).unwrap();
        assert!(r.inv_norm.is_infinite());
        assert!(gram_conditions(&e, &BlockSupport::empty()).is_err());
    }

    #[test]
    fn deviation_bounds_inverse() {
        let f = Arc::new(FusionFrame::random(12, 6, 2, 10).unwrap());
        for seed in 0..30 {
            let e = MeasurementEnsemble::draw(MatrixKind::Bernoulli, 20, f.clone(), seed, true).unwrap();
            let r = gram_conditions(&e, &BlockSupport::new(vec![1, 5, 9]).unwrap()).unwrap();
            if r.deviation < 1.0 {
                assert!(r.inv_norm <= 1.0 / (1.0 - r.deviation) + 1e-12);
            }
        }
    }

    #[test]
    fn default_levels_and_partition() {
        // ⌈ln 4 / ln ln 60⌉ + 3 = ⌈1.386/1.410⌉ + 3 = 4
        assert_eq!(GolfingSchedule::default_levels(60, 4), 4);
        assert_eq!(GolfingSchedule::default_levels(60, 1), 3);
        assert_eq!(GolfingSchedule::default_levels(2, 2), 4);
        let sch = GolfingSchedule::default_for(40, 60, 4).unwrap();
        assert_eq!(sch.partition().iter().sum::<usize>(), 40);
        assert_eq!(sch.levels(), 4);
        assert_eq!(sch.partition(), &[22, 6, 6, 6]);
        assert_eq!(GolfingSchedule::default_for(2, 60, 4).unwrap().partition(), &[1, 1]);
        assert_eq!(GolfingSchedule::default_for(1, 60, 4).unwrap().partition(), &[1]);
        assert!(GolfingSchedule::custom(vec![3, 0], 3).is_err());
        assert!(GolfingSchedule::custom(vec![3, 2], 6).is_err());
    }

    #[test]
    fn one_step_fixed_point_with_exact_gram() {
        let f = orthogonal_frame(4, 2);
        let x = signal(&f, &[0, 2], 3);
        let e = MeasurementEnsemble::new(DMatrix::from_row_slice(1, 4, &[1.0, 1.0, -1.0, 1.0]), MatrixKind::Bernoulli, f, false)
            .unwrap();
        let cert = golfing_build(&e, &x, &GolfingSchedule::custom(vec![1], 1).unwrap()).unwrap();
        assert!(cert.cond2_on_s < 1e-14);
        assert!(cert.residual_l2[1] < 1e-14);
        assert!((cert.residual_l2[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!(cert.cond2_off_s < 1e-14);
    }

    #[test]
    fn construction_identities_hold() {
        let f = Arc::new(FusionFrame::random(30, 6, 2, 11).unwrap());
        let x = signal(&f, &[2, 9, 17, 25], 12);
        for (seed, kind) in [(1, MatrixKind::Bernoulli), (2, MatrixKind::Gaussian)] {
            let e = MeasurementEnsemble::draw(kind, 40, f.clone(), seed, false).unwrap();
            let sch = GolfingSchedule::default_for(40, 30, 4).unwrap();
            let cert = golfing_build(&e, &x, &sch).unwrap();
            assert!(cert.identities_hold(1e-9), "{} {}", cert.identity_residual, cert.recursion_residual);
            assert_eq!(cert.residual_l2.len(), sch.levels() + 1);
            assert_eq!(cert.partition.iter().sum::<usize>(), 40);
            assert!((cert.residual_l2[0] - 2.0).abs() < 1e-12);
            assert_eq!(cert.u.num_blocks(), 30);
            assert_eq!(cert.h.num_blocks(), 40);
            assert!((cert.h_norm - cert.h.norm_l2()).abs() < 1e-15);
        }
    }

    #[test]
    fn golfing_errors() {
        let f = Arc::new(FusionFrame::random(5, 3, 1, 1).unwrap());
        let e = MeasurementEnsemble::draw(MatrixKind::Bernoulli, 4, f.clone(), 1, false).unwrap();
        let zero = BlockVector::zeros(5, 3, BlockForm::Ambient);
        let sch = GolfingSchedule::custom(vec![2, 2], 4).unwrap();
        assert!(matches!(golfing_build(&e, &zero, &sch), Err(Error::EmptySupport)));
        let x = signal(&f, &[1], 2);
        let bad = GolfingSchedule::custom(vec![2, 3], 5).unwrap();
        assert!(matches!(golfing_build(&e, &x, &bad), Err(Error::Schedule(_))));
    }

    fn dummy_cert(on: f64, off: f64, h_norm: f64) -> DualCertificate {
        DualCertificate {
            support: BlockSupport::new(vec![0]).unwrap(),
            u: BlockVector::zeros(2, 1, BlockForm::Ambient),
            h: BlockVector::zeros(1, 1, BlockForm::Ambient),
            residual_l2: vec![1.0, on],
            residual_l2inf: vec![1.0, on],
            partition: vec![1],
            cond2_on_s: on,
            cond2_off_s: off,
            h_norm,
            identity_residual: 0.0,
            recursion_residual: 0.0,
        }
    }

    #[test]
    fn inexact_thresholds() {
        let zero = GramConditionReport {
            inv_norm: 0.0,
            cross_max: 0.0,
            deviation: 0.0,
        };
        assert!(verify_inexact(&dummy_cert(0.0, 0.0, 0.0), &zero).passed);
        let v = verify_inexact(&dummy_cert(0.26, 0.0, 0.0), &zero);
        assert!(!v.passed);
        assert_eq!(v.reasons, vec!["on-support dual gap"]);
        let bad = GramConditionReport {
            inv_norm: f64::INFINITY,
            cross_max: 1.01,
            deviation: 0.0,
        };
        let v = verify_inexact(&dummy_cert(0.25, 0.3, 0.0), &bad);
        assert_eq!(v.reasons.len(), 3);
    }

    #[test]
    fn robust_constants_examples() {
        let (b, c1, _, c3) = robust_constants(&RobustParams {
            delta: 0.0,
            beta: 0.0,
            gamma: 0.0,
            theta: 0.0,
            tau: 0.7,
        });
        assert_eq!((b, c1), (0.0, 2.0));
        assert!((c3 - 1.4).abs() < 1e-15);

        let p = RobustParams {
            delta: 0.5,
            beta: 1.0,
            gamma: 0.25,
            theta: 0.25,
            tau: 1.0,
        };
        let (b, c1, c2, _) = robust_constants(&p);
        assert!((b - 0.75).abs() < 1e-15);
        assert!((c1 - 24.0).abs() < 1e-12);
        // 2√1.5/0.5 + 3·0.5·√1.5/(0.5·0.25)
        let want = 4.0 * 1.5f64.sqrt() + 12.0 * 1.5f64.sqrt();
        assert!((c2 - want).abs() < 1e-12);

        let report = GramConditionReport {
            inv_norm: 1.0,
            cross_max: 0.0,
            deviation: 0.0,
        };
        let v = verify_robust(&dummy_cert(0.0, 0.0, 0.0), &report, &RobustParams { theta: 1.0, ..p }).unwrap();
        assert!(!v.valid);
        let v = verify_robust(&dummy_cert(0.1, 0.2, 0.5), &report, &p).unwrap();
        assert!(v.valid, "{:?}", v.reasons);
        let v = verify_robust(&dummy_cert(0.3, 0.2, 0.5), &report, &p).unwrap();
        assert!(!v.valid);
        assert!(verify_robust(&dummy_cert(0.0, 0.0, 0.0), &report, &RobustParams { beta: -0.1, ..p }).is_err());
    }

    #[test]
    fn tail_vanishes_for_huge_t() {
        let f = Arc::new(FusionFrame::random(10, 4, 2, 6).unwrap());
        let s = BlockSupport::new(vec![0, 3]).unwrap();
        for est in [TailEstimator::Aux1, TailEstimator::Aux2, TailEstimator::Aux22] {
            let params = TailParams {
                frame: f.clone(),
                support: s.clone(),
                kind: MatrixKind::Bernoulli,
                m: 12,
                t: 1e6,
                kappa: 1.0,
            };
            let a = empirical_tail(est, &params, 20, 1).unwrap();
            assert_eq!(a.frequency, 0.0);
            assert!(a.bound < 1e-12 && a.pass);
        }
    }

    #[test]
    fn orthogonal_aux2_events_never_fire() {
        let f = orthogonal_frame(5, 3);
        let s = BlockSupport::new(vec![1, 2, 4]).unwrap();
        let params = TailParams {
            frame: f,
            support: s,
            kind: MatrixKind::Bernoulli,
            m: 3,
            t: 1e-6,
            kappa: 1.0,
        };
        let a = empirical_tail(TailEstimator::Aux2, &params, 50, 2).unwrap();
        assert_eq!(a.frequency, 0.0);
        assert!(a.pass);
    }
}
