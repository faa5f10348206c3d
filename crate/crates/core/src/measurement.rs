//! Random scalar matrices A ∈ ℝ^{m×N} and the block operators they induce.
//!
//! `A_P` has blocks a_ij P_j and `A_I` has blocks a_ij I_d; on 𝓗 they agree.
//! With `normalized` set, every entry is scaled by 1/√m (the operator Ã_P).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::block::{BlockForm, BlockVector};
use crate::error::{Error, Result};
use crate::frame::FusionFrame;
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Bernoulli,
    Gaussian,
}

impl MatrixKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MatrixKind::Bernoulli => "bernoulli",
            MatrixKind::Gaussian => "gaussian",
        }
    }
}

impl std::str::FromStr for MatrixKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bernoulli" => Ok(MatrixKind::Bernoulli),
            "gaussian" => Ok(MatrixKind::Gaussian),
            other => Err(Error::Domain(format!("unknown matrix kind '{other}'"))),
        }
    }
}

/// I.i.d. ±1 (Bernoulli) or N(0,1) (Gaussian) entries, reproducible from `seed`.
pub fn draw_matrix(kind: MatrixKind, m: usize, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidDimension(format!("need m, N >= 1, got m={m}, N={n}")));
    }
    let mut rng = seeded(seed);
    // row-major fill so a fixed seed gives the same leading rows for any N
    let mut a = DMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            a[(i, j)] = match kind {
                MatrixKind::Bernoulli => {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                }
                MatrixKind::Gaussian => rng.sample(StandardNormal),
            };
        }
    }
    Ok(a)
}

#[derive(Debug, Clone)]
pub struct MeasurementEnsemble {
    a: DMatrix<f64>,
    kind: MatrixKind,
    frame: Arc<FusionFrame>,
    normalized: bool,
}

impl MeasurementEnsemble {
    pub fn new(a: DMatrix<f64>, kind: MatrixKind, frame: Arc<FusionFrame>, normalized: bool) -> Result<Self> {
        if a.nrows() == 0 {
            return Err(Error::InvalidDimension("m must be at least 1".into()));
        }
        if a.ncols() != frame.num_subspaces() {
            return Err(Error::mismatch(
                format!("{} columns", frame.num_subspaces()),
                a.ncols(),
            ));
        }
        Ok(Self {
            a,
            kind,
            frame,
            normalized,
        })
    }

    pub fn draw(kind: MatrixKind, m: usize, frame: Arc<FusionFrame>, seed: u64, normalized: bool) -> Result<Self> {
        let a = draw_matrix(kind, m, frame.num_subspaces(), seed)?;
        Self::new(a, kind, frame, normalized)
    }

    /// Same matrix, other frame (e.g. the identity frame for the block program).
    pub fn with_frame(&self, frame: Arc<FusionFrame>) -> Result<Self> {
        Self::new(self.a.clone(), self.kind, frame, self.normalized)
    }

    pub fn with_normalization(&self, normalized: bool) -> Self {
        Self {
            normalized,
            ..self.clone()
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn frame(&self) -> &Arc<FusionFrame> {
        &self.frame
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn num_measurements(&self) -> usize {
        self.a.nrows()
    }

    pub fn num_blocks(&self) -> usize {
        self.a.ncols()
    }

    /// 1/√m when normalized, else 1.
    pub fn scale(&self) -> f64 {
        if self.normalized {
            1.0 / (self.num_measurements() as f64).sqrt()
        } else {
            1.0
        }
    }

    /// Entry of the operator actually applied (a_ij times the scale).
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.scale() * self.a[(i, j)]
    }

    /// y_i = Σ_j a_ij P_j x_j
    pub fn apply_ap(&self, x: &BlockVector) -> Result<BlockVector> {
        self.check_signal(x)?;
        let projected: Vec<Vec<f64>> = (0..self.num_blocks())
            .map(|j| self.frame.project(j, x.block(j)))
            .collect();
        Ok(self.combine(|j| &projected[j]))
    }

    /// y_i = Σ_j a_ij x_j
    pub fn apply_ai(&self, x: &BlockVector) -> Result<BlockVector> {
        self.check_signal(x)?;
        Ok(self.combine(|j| x.block(j)))
    }

    /// u_j = Σ_i a_ij P_j h_i
    pub fn adjoint_ap(&self, h: &BlockVector) -> Result<BlockVector> {
        let d = self.frame.ambient_dim();
        let m = self.num_measurements();
        if h.num_blocks() != m || h.block_len() != d {
            return Err(Error::mismatch(format!("{m}x{d}"), format!("{}x{}", h.num_blocks(), h.block_len())));
        }
        let mut out = BlockVector::zeros(self.num_blocks(), d, BlockForm::Ambient);
        for j in 0..self.num_blocks() {
            let mut acc = vec![0.0; d];
            for i in 0..m {
                let a = self.entry(i, j);
                if a != 0.0 {
                    acc.iter_mut().zip(h.block(i)).for_each(|(s, v)| *s += a * v);
                }
            }
            out.block_mut(j).copy_from_slice(&self.frame.project(j, &acc));
        }
        Ok(out)
    }

    /// The md×Nk matrix with block (i,j) = a_ij U_j, mapping subspace coefficients
    /// c to A_P(expand(c)).
    pub fn coefficient_matrix(&self) -> DMatrix<f64> {
        let d = self.frame.ambient_dim();
        let k = self.frame.subspace_dim();
        let m = self.num_measurements();
        let n = self.num_blocks();
        let mut out = DMatrix::zeros(m * d, n * k);
        for j in 0..n {
            let u = self.frame.basis(j);
            for i in 0..m {
                let a = self.entry(i, j);
                if a != 0.0 {
                    out.view_mut((i * d, j * k), (d, k)).copy_from(&(u * a));
                }
            }
        }
        out
    }

    /// Applies the coefficient matrix without materialising it.
    pub fn apply_coefficients(&self, c: &BlockVector) -> Result<BlockVector> {
        self.apply_ap(&self.frame.expand(c)?)
    }

    /// Radius of the noise ball ‖e‖₂ ≤ η√m, expressed in the units of this
    /// operator (η when normalized).
    pub fn noise_radius(&self, eta: f64) -> f64 {
        eta * (self.num_measurements() as f64).sqrt() * self.scale()
    }

    /// Adds Gaussian noise of norm exactly [`noise_radius(eta)`](Self::noise_radius).
    pub fn add_noise(&self, y: &BlockVector, eta: f64, seed: u64) -> Result<NoisySample> {
        add_noise_with_norm(y, eta, self.noise_radius(eta), seed)
    }

    fn combine<'a>(&self, block: impl Fn(usize) -> &'a [f64]) -> BlockVector {
        let d = self.frame.ambient_dim();
        let m = self.num_measurements();
        let mut y = BlockVector::zeros(m, d, BlockForm::Ambient);
        for j in 0..self.num_blocks() {
            let b = block(j);
            for i in 0..m {
                let a = self.entry(i, j);
                if a != 0.0 {
                    y.block_mut(i).iter_mut().zip(b).for_each(|(s, v)| *s += a * v);
                }
            }
        }
        y
    }

    fn check_signal(&self, x: &BlockVector) -> Result<()> {
        let d = self.frame.ambient_dim();
        if x.num_blocks() != self.num_blocks() || x.block_len() != d {
            return Err(Error::mismatch(
                format!("{}x{}", self.num_blocks(), d),
                format!("{}x{}", x.num_blocks(), x.block_len()),
            ));
        }
        Ok(())
    }
}

/// Noisy measurements y + e with ‖e‖₂ ≤ η√m.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisySample {
    pub y: BlockVector,
    pub e: BlockVector,
    pub eta: f64,
}

/// Draws a Gaussian direction and rescales it to ‖e‖₂ = η√m (m = number of
/// blocks of `y`), i.e. onto the boundary of the admissible noise ball.
pub fn add_noise(y: &BlockVector, eta: f64, seed: u64) -> Result<NoisySample> {
    let radius = eta * (y.num_blocks() as f64).sqrt();
    add_noise_with_norm(y, eta, radius, seed)
}

fn add_noise_with_norm(y: &BlockVector, eta: f64, norm: f64, seed: u64) -> Result<NoisySample> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::Domain(format!("noise level must be finite and nonnegative, got {eta}")));
    }
    if eta == 0.0 || norm == 0.0 {
        return Ok(NoisySample {
            y: y.clone(),
            e: BlockVector::zeros(y.num_blocks(), y.block_len(), y.form()),
            eta,
        });
    }
    let mut rng = seeded(seed);
    let mut dir: Vec<f64> = (0..y.as_slice().len()).map(|_| rng.sample(StandardNormal)).collect();
    let nrm = DVector::from_column_slice(&dir).norm();
    dir.iter_mut().for_each(|v| *v *= norm / nrm);
    let e = BlockVector::from_flat(dir, y.block_len(), y.form())?;
    Ok(NoisySample { y: y.add(&e)?, e, eta })
}
