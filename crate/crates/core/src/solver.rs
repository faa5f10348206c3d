//! Mixed ℓ2,1 recovery programs.
//!
//! Every program is solved in coefficient space: writing x_j = U_j c_j turns
//! the constraint x ∈ 𝓗 into free coefficients, and ‖x_j‖₂ = ‖c_j‖₂ because the
//! bases are orthonormal. What remains is group basis pursuit
//!
//! ```text
//! minimize Σ_j ‖c_j‖₂  subject to  M c ∈ C
//! ```
//!
//! with `M` the coefficient matrix and `C` either the point {y} or the ball
//! ‖M c − y‖₂ ≤ r. It is solved by ADMM on the splitting c = z: a Euclidean
//! projection onto {c : M c ∈ C} followed by block soft-thresholding. Both
//! steps use one SVD of `M`, computed up front.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::block::{BlockForm, BlockSupport, BlockVector};
use crate::error::{Error, Result};
use crate::frame::FusionFrame;
use crate::measurement::MeasurementEnsemble;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Relative primal residual tolerance.
    pub tol_primal: f64,
    /// Relative dual residual tolerance.
    pub tol_dual: f64,
    /// Initial ADMM penalty ρ.
    pub penalty: f64,
    /// Relative error below which a recovery counts as a success.
    pub success_rel_err: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 50_000,
            tol_primal: 1e-9,
            tol_dual: 1e-9,
            penalty: 1.0,
            success_rel_err: 1e-4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::Domain("max_iter must be at least 1".into()));
        }
        for (name, v) in [
            ("tol_primal", self.tol_primal),
            ("tol_dual", self.tol_dual),
            ("penalty", self.penalty),
            ("success_rel_err", self.success_rel_err),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Recovered signal in ambient form.
    pub x_hat: BlockVector,
    /// ‖x̂‖_{2,1}
    pub objective: f64,
    /// ‖A x̂ − y‖₂ for the operator the program was posed with.
    pub constraint_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// ‖x − x̂‖₂ / ‖x‖₂ (absolute error when x = 0), once the truth is attached.
    pub rel_err_vs_truth: Option<f64>,
    /// Seconds.
    pub wall_time: f64,
}

impl SolveReport {
    pub fn with_truth(mut self, truth: &BlockVector) -> Result<Self> {
        let err = self.x_hat.distance(truth)?;
        let nrm = truth.norm_l2();
        self.rel_err_vs_truth = Some(if nrm > 0.0 { err / nrm } else { err });
        Ok(self)
    }

    pub fn abs_err(&self, truth: &BlockVector) -> Result<f64> {
        self.x_hat.distance(truth)
    }

    /// True when the attached relative error is within `threshold`.
    pub fn is_success(&self, threshold: f64) -> bool {
        self.rel_err_vs_truth.is_some_and(|e| e <= threshold)
    }
}

/// Result of a coefficient-space solve.
#[derive(Debug, Clone)]
pub struct CoefficientSolution {
    pub coefficients: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
}

/// Group basis pursuit on a fixed matrix with equal-size column groups.
#[derive(Debug, Clone)]
pub struct GroupBasisPursuit {
    matrix: DMatrix<f64>,
    group: usize,
    // thin SVD restricted to the numerical rank
    u: DMatrix<f64>,
    sigma: DVector<f64>,
    v: DMatrix<f64>,
}

impl GroupBasisPursuit {
    pub fn new(matrix: DMatrix<f64>, group: usize) -> Result<Self> {
        let (rows, cols) = matrix.shape();
        if rows == 0 || cols == 0 || group == 0 || cols % group != 0 {
            return Err(Error::InvalidDimension(format!(
                "matrix {rows}x{cols} with column groups of {group}"
            )));
        }
        let svd = matrix.clone().svd(true, true);
        let u_full = svd.u.expect("requested U");
        let vt_full = svd.v_t.expect("requested Vᵀ");
        let smax = svd.singular_values.max();
        let cutoff = smax * (rows.max(cols) as f64) * f64::EPSILON;
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > cutoff && svd.singular_values[i] > 0.0)
            .collect();
        let r = keep.len();
        let u = DMatrix::from_fn(rows, r, |i, c| u_full[(i, keep[c])]);
        let v = DMatrix::from_fn(cols, r, |i, c| vt_full[(keep[c], i)]);
        let sigma = DVector::from_iterator(r, keep.iter().map(|&i| svd.singular_values[i]));
        Ok(Self {
            matrix,
            group,
            u,
            sigma,
            v,
        })
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// min Σ‖c_j‖₂ s.t. ‖M c − y‖₂ ≤ radius (radius = 0 gives M c = y).
    pub fn solve(&self, y: &DVector<f64>, radius: f64, cfg: &SolverConfig) -> Result<CoefficientSolution> {
        cfg.validate()?;
        if y.len() != self.matrix.nrows() {
            return Err(Error::mismatch(self.matrix.nrows(), y.len()));
        }
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::Domain(format!("radius must be finite and nonnegative, got {radius}")));
        }
        let n = self.matrix.ncols();
        let y_norm = y.norm();
        if y_norm <= radius || y_norm == 0.0 {
            // zero is feasible, and it minimises the norm
            return Ok(CoefficientSolution {
                coefficients: DVector::zeros(n),
                iterations: 0,
                converged: true,
                residual: y_norm,
            });
        }
        // work at unit data scale; the program is positively homogeneous
        let y_unit = y / y_norm;
        let set = FeasibleSet::new(self, &y_unit, radius / y_norm);
        let sol = self.admm(&set, cfg);
        let coefficients = sol.0 * y_norm;
        let residual = (&self.matrix * &coefficients - y).norm();
        let feas_tol = 1e-8 * y_norm;
        let converged = sol.2 && residual <= radius + feas_tol;
        Ok(CoefficientSolution {
            coefficients,
            iterations: sol.1,
            converged,
            residual,
        })
    }

    fn admm(&self, set: &FeasibleSet<'_>, cfg: &SolverConfig) -> (DVector<f64>, usize, bool) {
        let n = self.matrix.ncols();
        let mut rho = cfg.penalty;
        let mut z = DVector::<f64>::zeros(n);
        let mut u = DVector::<f64>::zeros(n);
        let mut x = set.project(&z);
        let adapt_until = cfg.max_iter / 2;
        for it in 1..=cfg.max_iter {
            x = set.project(&(&z - &u));
            let z_old = std::mem::replace(&mut z, &x + &u);
            block_soft_threshold(z.as_mut_slice(), self.group, 1.0 / rho);
            u += &x - &z;

            let r = (&x - &z).norm();
            let s = rho * (&z - &z_old).norm();
            let eps_pri = cfg.tol_primal * x.norm().max(z.norm());
            let eps_dual = cfg.tol_dual * rho * u.norm();
            if r <= eps_pri && s <= eps_dual {
                return (x, it, true);
            }
            if it <= adapt_until && it % 10 == 0 {
                if r > 10.0 * s {
                    rho *= 2.0;
                    u /= 2.0;
                } else if s > 10.0 * r {
                    rho /= 2.0;
                    u *= 2.0;
                }
            }
        }
        (x, cfg.max_iter, false)
    }
}

/// Scales each length-`group` block by max(0, 1 − τ/‖v_j‖₂).
pub fn block_soft_threshold(v: &mut [f64], group: usize, tau: f64) {
    for block in v.chunks_exact_mut(group) {
        let nrm = block.iter().map(|a| a * a).sum::<f64>().sqrt();
        let shrink = if nrm > tau { 1.0 - tau / nrm } else { 0.0 };
        block.iter_mut().for_each(|a| *a *= shrink);
    }
}

/// Euclidean projection onto {c : ‖M c − y‖₂ ≤ radius}, via the SVD of M.
struct FeasibleSet<'a> {
    gbp: &'a GroupBasisPursuit,
    /// Uᵀ y
    b: DVector<f64>,
    /// squared norm of the part of y outside range(M)
    y_perp_sq: f64,
    radius: f64,
    /// least-norm solution V Σ⁻¹ Uᵀ y
    x0: DVector<f64>,
}

impl<'a> FeasibleSet<'a> {
    fn new(gbp: &'a GroupBasisPursuit, y: &DVector<f64>, radius: f64) -> Self {
        let b = gbp.u.tr_mul(y);
        let y_perp_sq = (y.norm_squared() - b.norm_squared()).max(0.0);
        let x0 = &gbp.v * b.component_div(&gbp.sigma);
        Self {
            gbp,
            b,
            y_perp_sq,
            radius,
            x0,
        }
    }

    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        let a = self.gbp.v.tr_mul(v);
        let v_perp = v - &self.gbp.v * &a;
        let slack_sq = self.radius * self.radius - self.y_perp_sq;
        if slack_sq <= 0.0 {
            // affine case (or unreachable ball): nearest least-squares solution
            return v_perp + &self.x0;
        }
        let sigma = &self.gbp.sigma;
        let rho: DVector<f64> = sigma.component_mul(&a) - &self.b;
        if rho.norm_squared() <= slack_sq {
            return v.clone();
        }
        let mu = secular_root(&rho, sigma, slack_sq.sqrt());
        let a_new = DVector::from_fn(a.len(), |i, _| {
            let s = sigma[i];
            a[i] - mu * s * rho[i] / (1.0 + mu * s * s)
        });
        v_perp + &self.gbp.v * a_new
    }
}

/// Solves Σ_i (ρ_i / (1 + μ σ_i²))² = target² for μ > 0, assuming the left side exceeds
/// target² at μ = 0. Newton on 1/‖r(μ)‖ − 1/target with a bisection safeguard.
fn secular_root(rho: &DVector<f64>, sigma: &DVector<f64>, target: f64) -> f64 {
    let eval = |mu: f64| -> (f64, f64) {
        let mut f = 0.0;
        let mut df = 0.0;
        for i in 0..rho.len() {
            let s2 = sigma[i] * sigma[i];
            let den = 1.0 + mu * s2;
            let r = rho[i] / den;
            f += r * r;
            df += -2.0 * r * r * s2 / den;
        }
        (f, df)
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while eval(hi).0.sqrt() > target {
        lo = hi;
        hi *= 4.0;
        if hi > 1e300 {
            return hi;
        }
    }
    let mut mu = lo;
    for _ in 0..200 {
        let (f, df) = eval(mu);
        let nrm = f.sqrt();
        if (nrm - target).abs() <= 1e-14 * target {
            return mu;
        }
        if nrm > target {
            lo = lo.max(mu);
        } else {
            hi = hi.min(mu);
        }
        // φ(μ) = 1/√F − 1/target,  φ' = −F'/(2 F^{3/2})
        let phi = 1.0 / nrm - 1.0 / target;
        let dphi = -df / (2.0 * f * nrm);
        let mut next = mu - phi / dphi;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (hi - lo) <= 1e-15 * hi {
            return next;
        }
        mu = next;
    }
    mu
}

fn check_measurements(e: &MeasurementEnsemble, y: &BlockVector) -> Result<DVector<f64>> {
    let d = e.frame().ambient_dim();
    let m = e.num_measurements();
    if y.num_blocks() != m || y.block_len() != d {
        return Err(Error::mismatch(format!("{m}x{d}"), format!("{}x{}", y.num_blocks(), y.block_len())));
    }
    Ok(DVector::from_column_slice(y.as_slice()))
}

fn solve_in_frame(e: &MeasurementEnsemble, y: &BlockVector, radius: f64, cfg: &SolverConfig) -> Result<SolveReport> {
    let start = Instant::now();
    let yv = check_measurements(e, y)?;
    let frame = e.frame();
    let gbp = GroupBasisPursuit::new(e.coefficient_matrix(), frame.subspace_dim())?;
    let sol = gbp.solve(&yv, radius, cfg)?;
    let coeffs = BlockVector::from_flat(
        sol.coefficients.as_slice().to_vec(),
        frame.subspace_dim(),
        BlockForm::Coefficient,
    )?;
    let x_hat = frame.expand(&coeffs)?;
    Ok(SolveReport {
        objective: x_hat.norm_l21(),
        x_hat,
        constraint_residual: sol.residual,
        iterations: sol.iterations,
        converged: sol.converged,
        rel_err_vs_truth: None,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// min ‖x‖_{2,1} s.t. A_P x = y, x ∈ 𝓗.
pub fn solve_l1_equality(e: &MeasurementEnsemble, y: &BlockVector, cfg: &SolverConfig) -> Result<SolveReport> {
    solve_in_frame(e, y, 0.0, cfg)
}

/// min ‖x‖_{2,1} s.t. ‖A_P x − y‖₂ ≤ η√m, x ∈ 𝓗. For a normalized ensemble the
/// radius is η (see [`MeasurementEnsemble::noise_radius`]).
pub fn solve_l1_noisy(e: &MeasurementEnsemble, y: &BlockVector, eta: f64, cfg: &SolverConfig) -> Result<SolveReport> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::Domain(format!("eta must be finite and nonnegative, got {eta}")));
    }
    solve_in_frame(e, y, e.noise_radius(eta), cfg)
}

/// The block-sparsity baseline: min ‖x‖_{2,1} s.t. A_I x = y with every x_j free in ℝ^d.
pub fn solve_block_baseline(e: &MeasurementEnsemble, y: &BlockVector, cfg: &SolverConfig) -> Result<SolveReport> {
    let frame = e.frame();
    let identity = Arc::new(FusionFrame::identity(frame.num_subspaces(), frame.ambient_dim())?);
    solve_l1_equality(&e.with_frame(identity)?, y, cfg)
}

/// Exact recovery from a single measurement when the subspaces are mutually
/// orthogonal: x_i = P_i y / a_i.
pub fn orthogonal_closed_form(e: &MeasurementEnsemble, y: &BlockVector) -> Result<BlockVector> {
    if e.num_measurements() != 1 {
        return Err(Error::Precondition(format!(
            "closed form needs exactly one measurement, got {}",
            e.num_measurements()
        )));
    }
    check_measurements(e, y)?;
    let frame = e.frame();
    let lambda = frame.incoherence().lambda_max();
    if lambda > 1e-12 {
        return Err(Error::Precondition(format!("subspaces are not mutually orthogonal (λ = {lambda:e})")));
    }
    let n = e.num_blocks();
    let mut x = BlockVector::zeros(n, frame.ambient_dim(), BlockForm::Ambient);
    for i in 0..n {
        let a = e.entry(0, i);
        if a == 0.0 {
            return Err(Error::Precondition(format!("coefficient a_{i} is zero")));
        }
        let p = frame.project(i, y.block(0));
        x.block_mut(i).iter_mut().zip(p).for_each(|(t, v)| *t = v / a);
    }
    Ok(x)
}

/// Outcome of the brute-force ℓ0 search.
#[derive(Debug, Clone, PartialEq)]
pub struct L0Solution {
    pub x: BlockVector,
    pub support: BlockSupport,
}

pub const L0_MAX_BLOCKS: usize = 12;
pub const L0_MAX_SPARSITY: usize = 3;

/// Exhaustive search over supports of size ≤ `max_s`, smallest size first and
/// lexicographic within a size. Returns `None` when no support reproduces `y`
/// to a residual of 1e-8 (relative to max(1, ‖y‖)).
pub fn solve_l0_oracle(e: &MeasurementEnsemble, y: &BlockVector, max_s: usize) -> Result<Option<L0Solution>> {
    let n = e.num_blocks();
    if n > L0_MAX_BLOCKS || max_s > L0_MAX_SPARSITY {
        return Err(Error::GuardExceeded(format!(
            "N = {n} (max {L0_MAX_BLOCKS}), max_s = {max_s} (max {L0_MAX_SPARSITY})"
        )));
    }
    let yv = check_measurements(e, y)?;
    let frame = e.frame();
    let (d, k) = (frame.ambient_dim(), frame.subspace_dim());
    let tol = 1e-8 * yv.norm().max(1.0);
    if yv.norm() <= tol {
        return Ok(Some(L0Solution {
            x: BlockVector::zeros(n, d, BlockForm::Ambient),
            support: BlockSupport::empty(),
        }));
    }
    let mat = e.coefficient_matrix();
    for size in 1..=max_s.min(n) {
        for combo in combinations(n, size) {
            let cols: Vec<usize> = combo.iter().flat_map(|&j| j * k..(j + 1) * k).collect();
            let sub = mat.select_columns(&cols);
            let svd = sub.svd(true, true);
            let Ok(c) = svd.solve(&yv, 1e-12) else { continue };
            if (mat.select_columns(&cols) * &c - &yv).norm() <= tol {
                let mut coeffs = BlockVector::zeros(n, k, BlockForm::Coefficient);
                for (slot, &j) in combo.iter().enumerate() {
                    coeffs.block_mut(j).copy_from_slice(&c.as_slice()[slot * k..(slot + 1) * k]);
                }
                return Ok(Some(L0Solution {
                    x: frame.expand(&coeffs)?,
                    support: BlockSupport::new(combo)?,
                }));
            }
        }
    }
    Ok(None)
}

fn combinations(n: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for j in start..n {
            cur.push(j);
            rec(j + 1, n, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, size, &mut Vec::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::MatrixKind;
    use crate::rng::seeded;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn sparse_in_h(frame: &FusionFrame, support: &[usize], seed: u64) -> BlockVector {
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

    fn orthogonal_lines(d: usize) -> Arc<FusionFrame> {
        let q = FusionFrame::random(1, d, d, 77).unwrap().basis(0).clone();
        let bases = (0..d).map(|j| q.columns(j, 1).into_owned()).collect();
        Arc::new(FusionFrame::from_bases(bases, None).unwrap())
    }

    #[test]
    fn soft_threshold_blocks() {
        let mut v = vec![3.0, 4.0, 0.1, 0.0];
        block_soft_threshold(&mut v, 2, 1.0);
        assert!((v[0] - 2.4).abs() < 1e-15 && (v[1] - 3.2).abs() < 1e-15);
        assert_eq!(&v[2..], &[0.0, 0.0]);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig { max_iter: 0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { tol_primal: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn zero_measurements_give_zero() {
        let f = Arc::new(FusionFrame::random(5, 4, 2, 1).unwrap());
        let e = MeasurementEnsemble::draw(MatrixKind::Bernoulli, 3, f, 2, false).unwrap();
        let y = BlockVector::zeros(3, 4, BlockForm::Ambient);
        let r = solve_l1_equality(&e, &y, &SolverConfig::default()).unwrap();
        assert_eq!(r.x_hat.norm_l2(), 0.0);
        assert!(r.converged);
        let b = solve_block_baseline(&e, &y, &SolverConfig::default()).unwrap();
        assert_eq!(b.x_hat.norm_l2(), 0.0);
    }

    #[test]
    fn wrong_measurement_shape_errors() {
        let f = Arc::new(FusionFrame::random(5, 4, 2, 1).unwrap());
        let e = MeasurementEnsemble::draw(MatrixKind::Bernoulli, 3, f, 2, false).unwrap();
        let y = BlockVector::zeros(2, 4, BlockForm::Ambient);
        assert!(solve_l1_equality(&e, &y, &SolverConfig::default()).is_err());
    }

    #[test]
    fn secular_projection_lands_on_ball() {
        let m = DMatrix::from_row_slice(3, 4, &[1.0, 2.0, 0.0, -1.0, 0.5, 0.0, 1.0, 1.0, 0.0, 1.0, -1.0, 2.0]);
        let gbp = GroupBasisPursuit::new(m.clone(), 2).unwrap();
        let y = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let set = FeasibleSet::new(&gbp, &y, 0.3);
        let v = DVector::from_vec(vec![5.0, -1.0, 2.0, 0.0]);
        let p = set.project(&v);
        assert!(((&m * &p - &y).norm() - 0.3).abs() < 1e-10);
        // optimality: v − p is a nonnegative multiple of Mᵀ(Mp − y)
        let g = m.transpose() * (&m * &p - &y);
        let diff = &v - &p;
        let t = diff.dot(&g) / g.norm_squared();
        assert!(t > 0.0);
        assert!((diff - g * t).norm() < 1e-9);
    }

    #[test]
    fn equality_recovers_one_sparse_signals() {
        let f = Arc::new(FusionFrame::random(6, 4, 1, 3).unwrap());
        let cfg = SolverConfig::default();
        let mut ok = 0;
        for t in 0..100u64 {
            let x = sparse_in_h(&f, &[(t % 6) as usize], 1000 + t);
            let e = MeasurementEnsemble::draw(MatrixKind::Bernoulli, 4, f.clone(), 2000 + t, false).unwrap();
            let y = e.apply_ap(&x).unwrap();
            let r = solve_l1_equality(&e, &y, &cfg).unwrap().with_truth(&x).unwrap();
            if r.is_success(1e-4) {
                ok += 1;
            }
        }
        assert!(ok >= 99, "only {ok}/100 recovered");
    }

    #[test]
    fn matches_orthogonal_closed_form() {
        let f = orthogonal_lines(4);
        let x = sparse_in_h(&f, &[0, 1, 2, 3], 5);
        let a = DMatrix::from_row_slice(1, 4, &[1.0, -1.0, -1.0, 1.0]);
        let e = MeasurementEnsemble::new(a, MatrixKind::Bernoulli, f, false).unwrap();
        let y = e.apply_ap(&x).unwrap();
        let closed = orthogonal_closed_form(&e, &y).unwrap();
        assert!(closed.distance(&x).unwrap() <= 1e-12);
        let r = solve_l1_equality(&e, &y, &SolverConfig::default()).unwrap();
        assert!(r.x_hat.distance(&closed).unwrap() <= 1e-6);
    }

    #[test]
    fn closed_form_preconditions() {
        let f = orthogonal_lines(3);
        let x = sparse_in_h(&f, &[1], 6);
        let e = MeasurementEnsemble::new(DMatrix::from_element(1, 3, 2.0), MatrixKind::Gaussian, f.clone(), false)
            .unwrap();
        let y = e.apply_ap(&x).unwrap();
        assert!(orthogonal_closed_form(&e, &y).unwrap().distance(&x).unwrap() < 1e-14);
        let zero = e.apply_ap(&BlockVector::zeros(3, 3, BlockForm::Ambient)).unwrap();
        assert_eq!(orthogonal_closed_form(&e, &zero).unwrap().norm_l2(), 0.0);

        let bad = MeasurementEnsemble::new(DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 1.0]), MatrixKind::Gaussian, f, false)
            .unwrap();
        assert!(orthogonal_closed_form(&bad, &y).is_err());

        let g = Arc::new(FusionFrame::random(3, 3, 1, 1).unwrap());
        let e2 = MeasurementEnsemble::new(DMatrix::from_element(1, 3, 1.0), MatrixKind::Gaussian, g, false).unwrap();
        assert!(orthogonal_closed_form(&e2, &y).is_err());
    }

    #[test]
    fn noisy_with_zero_eta_matches_equality() {
        let f = Arc::new(FusionFrame::random(10, 4, 2, 8).unwrap());
        let x = sparse_in_h(&f, &[2, 7], 9);
        let e = MeasurementEnsemble::draw(MatrixKind::Gaussian, 6, f, 10, true).unwrap();
        let y = e.apply_ap(&x).unwrap();
        let cfg = SolverConfig::default();
        let a = solve_l1_equality(&e, &y, &cfg).unwrap();
        let b = solve_l1_noisy(&e, &y, 0.0, &cfg).unwrap();
        assert!(a.x_hat.distance(&b.x_hat).unwrap() <= 1e-6);
    }

    #[test]
    fn noisy_with_huge_eta_returns_zero() {
        let f = Arc::new(FusionFrame::random(10, 4, 2, 8).unwrap());
        let x = sparse_in_h(&f, &[2, 7], 9);
        let e = MeasurementEnsemble::draw(MatrixKind::Gaussian, 6, f, 10, false).unwrap();
        let y = e.apply_ap(&x).unwrap();
        let eta = y.norm_l2() / 6f64.sqrt();
        let r = solve_l1_noisy(&e, &y, eta, &SolverConfig::default()).unwrap();
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn noisy_solution_respects_constraint() {
        let f = Arc::new(FusionFrame::random(12, 5, 2, 12).unwrap());
        let x = sparse_in_h(&f, &[0, 5], 13);
        let e = MeasurementEnsemble::draw(MatrixKind::Gaussian, 8, f, 14, false).unwrap();
        let y = e.apply_ap(&x).unwrap();
        let noisy = e.add_noise(&y, 0.05, 15).unwrap();
        let r = solve_l1_noisy(&e, &noisy.y, 0.05, &SolverConfig::default()).unwrap();
        assert!(r.converged);
        assert!(r.constraint_residual <= e.noise_radius(0.05) * (1.0 + 1e-6));
        // the truth is feasible, so the minimiser cannot have a larger norm
        assert!(r.objective <= x.norm_l21() + 1e-6);
    }

    #[test]
    fn block_baseline_coincides_when_k_equals_d() {
        let f = Arc::new(FusionFrame::identity(8, 3).unwrap());
        let x = sparse_in_h(&f, &[1, 4], 3);
        let e = MeasurementEnsemble::draw(MatrixKind::Gaussian, 4, f, 4, true).unwrap();
        let y = e.apply_ap(&x).unwrap();
        let cfg = SolverConfig::default();
        let a = solve_l1_equality(&e, &y, &cfg).unwrap();
        let b = solve_block_baseline(&e, &y, &cfg).unwrap();
        assert!(a.x_hat.distance(&b.x_hat).unwrap() <= 1e-8);
    }

    #[test]
    fn scaling_equivariance() {
        let f = Arc::new(FusionFrame::random(10, 4, 2, 30).unwrap());
        let x = sparse_in_h(&f, &[1, 3, 8], 31);
        let e = MeasurementEnsemble::draw(MatrixKind::Gaussian, 4, f, 32, false).unwrap();
        let y = e.apply_ap(&x).unwrap();
        let cfg = SolverConfig::default();
        let base = solve_l1_equality(&e, &y, &cfg).unwrap();
        let scaled = solve_l1_equality(&e, &y.scale(37.5), &cfg).unwrap();
        let diff = scaled.x_hat.distance(&base.x_hat.scale(37.5)).unwrap();
        assert!(diff <= 1e-6 * 37.5 * base.x_hat.norm_l2(), "diff {diff}");
    }

    #[test]
    fn l0_oracle_finds_sparsest() {
        let f = Arc::new(FusionFrame::random(8, 3, 1, 40).unwrap());
        let x = sparse_in_h(&f, &[5], 41);
        let e = MeasurementEnsemble::draw(MatrixKind::Bernoulli, 2, f, 42, false).unwrap();
        let y = e.apply_ap(&x).unwrap();
        let sol = solve_l0_oracle(&e, &y, 2).unwrap().unwrap();
        assert_eq!(sol.support.indices(), &[5]);
        assert!(sol.x.distance(&x).unwrap() < 1e-10);

        let zero = BlockVector::zeros(2, 3, BlockForm::Ambient);
        let z = solve_l0_oracle(&e, &zero, 2).unwrap().unwrap();
        assert!(z.support.is_empty());
    }

    #[test]
    fn l0_oracle_guard_and_infeasible() {
        let big = Arc::new(FusionFrame::random(13, 2, 1, 1).unwrap());
        let e = MeasurementEnsemble::draw(MatrixKind::Bernoulli, 2, big, 1, false).unwrap();
        let y = BlockVector::zeros(2, 2, BlockForm::Ambient);
        assert!(matches!(solve_l0_oracle(&e, &y, 1), Err(Error::GuardExceeded(_))));

        // 4 scalar equations, one unknown per block: a generic y needs 4 blocks
        let f = Arc::new(FusionFrame::random(6, 2, 1, 2).unwrap());
        let e = MeasurementEnsemble::draw(MatrixKind::Gaussian, 2, f, 3, false).unwrap();
        let y = BlockVector::from_flat(vec![1.0, -0.3, 0.7, 2.0], 2, BlockForm::Ambient).unwrap();
        assert!(solve_l0_oracle(&e, &y, 3).unwrap().is_none());
        assert!(matches!(solve_l0_oracle(&e, &y, 4), Err(Error::GuardExceeded(_))));
    }

    #[test]
    fn combinations_enumerate_lexicographically() {
        let c = combinations(4, 2);
        assert_eq!(c, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
    }
}
