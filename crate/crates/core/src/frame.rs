//! Fusion frames: N subspaces W_j ⊆ ℝ^d of common dimension k, each stored
//! through an orthonormal basis U_j (d×k), with the projector P_j = U_j U_jᵀ.
//!
//! The incoherence matrix Λ has entries ‖P_i P_j‖ off the diagonal. Because the
//! bases are orthonormal, ‖P_i P_j‖ = ‖U_iᵀ U_j‖, the largest cosine of the
//! principal angles between W_i and W_j, so only k×k SVDs are needed.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block::{BlockForm, BlockSupport, BlockVector};
use crate::error::{Error, Result};
use crate::linalg::{orthonormalize, spectral_norm, sym_eigen_range, sym_spectral_norm};
use crate::rng::seeded;

const ORTHONORMAL_TOL: f64 = 1e-10;

#[derive(Debug)]
pub struct FusionFrame {
    d: usize,
    k: usize,
    bases: Vec<DMatrix<f64>>,
    weights: Vec<f64>,
    seed: Option<u64>,
    incoherence: OnceLock<IncoherenceMatrix>,
}

impl Clone for FusionFrame {
    fn clone(&self) -> Self {
        let incoherence = OnceLock::new();
        if let Some(inc) = self.incoherence.get() {
            let _ = incoherence.set(inc.clone());
        }
        Self {
            d: self.d,
            k: self.k,
            bases: self.bases.clone(),
            weights: self.weights.clone(),
            seed: self.seed,
            incoherence,
        }
    }
}

impl FusionFrame {
    /// Draws k i.i.d. standard Gaussian vectors in ℝ^d per subspace and
    /// orthonormalises them. Deterministic in `seed`.
    pub fn random(n: usize, d: usize, k: usize, seed: u64) -> Result<Self> {
        check_dims(n, d, k)?;
        let mut rng = seeded(seed);
        let mut bases = Vec::with_capacity(n);
        for _ in 0..n {
            let basis = loop {
                let g = fill_gaussian(DMatrix::zeros(d, k), &mut rng);
                // rank < k has probability zero; redraw if it happens numerically
                if let Some(q) = orthonormalize(g) {
                    break q;
                }
            };
            bases.push(basis);
        }
        Ok(Self {
            d,
            k,
            bases,
            weights: vec![1.0; n],
            seed: Some(seed),
            incoherence: OnceLock::new(),
        })
    }

    /// Builds a frame from explicit orthonormal bases (each d×k).
    pub fn from_bases(bases: Vec<DMatrix<f64>>, weights: Option<Vec<f64>>) -> Result<Self> {
        let first = bases
            .first()
            .ok_or_else(|| Error::InvalidDimension("a fusion frame needs at least one subspace".into()))?;
        let (d, k) = first.shape();
        check_dims(bases.len(), d, k)?;
        for (j, u) in bases.iter().enumerate() {
            if u.shape() != (d, k) {
                return Err(Error::mismatch(format!("{d}x{k}"), format!("{}x{} (basis {j})", u.nrows(), u.ncols())));
            }
            let gram_err = (u.transpose() * u - DMatrix::<f64>::identity(k, k)).amax();
            if gram_err > ORTHONORMAL_TOL {
                return Err(Error::Precondition(format!(
                    "basis {j} is not orthonormal (max |UᵀU - I| = {gram_err:e})"
                )));
            }
        }
        let weights = match weights {
            Some(w) if w.len() != bases.len() => return Err(Error::mismatch(bases.len(), w.len())),
            Some(w) if w.iter().any(|v| !(*v > 0.0)) => {
                return Err(Error::Domain("weights must be positive".into()))
            }
            Some(w) => w,
            None => vec![1.0; bases.len()],
        };
        Ok(Self {
            d,
            k,
            bases,
            weights,
            seed: None,
            incoherence: OnceLock::new(),
        })
    }

    /// N copies of the identity basis of ℝ^d; 𝓗 is then all of ℝ^{Nd}.
    pub fn identity(n: usize, d: usize) -> Result<Self> {
        Self::from_bases(vec![DMatrix::identity(d, d); n], None)
    }

    pub fn num_subspaces(&self) -> usize {
        self.bases.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.d
    }

    pub fn subspace_dim(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn basis(&self, j: usize) -> &DMatrix<f64> {
        &self.bases[j]
    }

    pub fn bases(&self) -> &[DMatrix<f64>] {
        &self.bases
    }

    pub fn projector(&self, j: usize) -> DMatrix<f64> {
        &self.bases[j] * self.bases[j].transpose()
    }

    /// P_j v for a length-d slice.
    pub fn project(&self, j: usize, v: &[f64]) -> Vec<f64> {
        let u = &self.bases[j];
        let c = u.tr_mul(&DVector::from_column_slice(v));
        (u * c).as_slice().to_vec()
    }

    /// Maps coefficients c_j ∈ ℝ^k to ambient blocks U_j c_j.
    pub fn expand(&self, coeffs: &BlockVector) -> Result<BlockVector> {
        self.check_blocks(coeffs, self.k)?;
        let mut out = BlockVector::zeros(self.num_subspaces(), self.d, BlockForm::Ambient);
        for (j, u) in self.bases.iter().enumerate() {
            let x = u * DVector::from_column_slice(coeffs.block(j));
            out.block_mut(j).copy_from_slice(x.as_slice());
        }
        Ok(out)
    }

    /// Maps ambient blocks x_j to coefficients U_jᵀ x_j (exact inverse of
    /// [`expand`](Self::expand) on 𝓗).
    pub fn compress(&self, x: &BlockVector) -> Result<BlockVector> {
        self.check_blocks(x, self.d)?;
        let mut out = BlockVector::zeros(self.num_subspaces(), self.k, BlockForm::Coefficient);
        for (j, u) in self.bases.iter().enumerate() {
            let c = u.tr_mul(&DVector::from_column_slice(x.block(j)));
            out.block_mut(j).copy_from_slice(c.as_slice());
        }
        Ok(out)
    }

    /// Projects each ambient block onto its subspace, giving the nearest point of 𝓗.
    pub fn project_onto_h(&self, x: &BlockVector) -> Result<BlockVector> {
        self.expand(&self.compress(x)?)
    }

    /// Extreme eigenvalues (A, B) of Σ_j v_j² P_j.
    pub fn frame_bounds(&self) -> (f64, f64) {
        let mut op = DMatrix::<f64>::zeros(self.d, self.d);
        for (u, v) in self.bases.iter().zip(&self.weights) {
            op += (u * u.transpose()) * (v * v);
        }
        let (lo, hi) = sym_eigen_range(&op);
        (lo.max(0.0), hi)
    }

    /// Λ, computed once and cached.
    pub fn incoherence(&self) -> &IncoherenceMatrix {
        self.incoherence.get_or_init(|| {
            let n = self.num_subspaces();
            let rows: Vec<Vec<f64>> = (0..n)
                .into_par_iter()
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            if j <= i {
                                0.0
                            } else {
                                spectral_norm(&self.bases[i].tr_mul(&self.bases[j])).min(1.0)
                            }
                        })
                        .collect()
                })
                .collect();
            let entries = DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
                std::cmp::Ordering::Less => rows[i][j],
                std::cmp::Ordering::Greater => rows[j][i],
                std::cmp::Ordering::Equal => 0.0,
            });
            IncoherenceMatrix { entries }
        })
    }

    pub fn to_document(&self) -> FrameDocument {
        FrameDocument {
            n: self.num_subspaces(),
            d: self.d,
            k: self.k,
            seed: self.seed,
            bases: self
                .bases
                .iter()
                .map(|u| {
                    let mut row_major = Vec::with_capacity(self.d * self.k);
                    for r in 0..self.d {
                        for c in 0..self.k {
                            row_major.push(u[(r, c)]);
                        }
                    }
                    row_major
                })
                .collect(),
            weights: if self.weights.iter().all(|w| *w == 1.0) {
                None
            } else {
                Some(self.weights.clone())
            },
        }
    }

    pub fn from_document(doc: &FrameDocument) -> Result<Self> {
        if doc.bases.len() != doc.n {
            return Err(Error::mismatch(format!("{} bases", doc.n), doc.bases.len()));
        }
        check_dims(doc.n, doc.d, doc.k)?;
        let mut bases = Vec::with_capacity(doc.n);
        for b in &doc.bases {
            if b.len() != doc.d * doc.k {
                return Err(Error::mismatch(doc.d * doc.k, b.len()));
            }
            bases.push(DMatrix::from_row_slice(doc.d, doc.k, b));
        }
        let mut frame = Self::from_bases(bases, doc.weights.clone())?;
        frame.seed = doc.seed;
        Ok(frame)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: FrameDocument = serde_json::from_str(s)?;
        Self::from_document(&doc)
    }

    fn check_blocks(&self, x: &BlockVector, len: usize) -> Result<()> {
        if x.num_blocks() != self.num_subspaces() || x.block_len() != len {
            return Err(Error::mismatch(
                format!("{}x{}", self.num_subspaces(), len),
                format!("{}x{}", x.num_blocks(), x.block_len()),
            ));
        }
        Ok(())
    }
}

fn check_dims(n: usize, d: usize, k: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidDimension("N must be at least 1".into()));
    }
    if k == 0 || k > d {
        return Err(Error::InvalidDimension(format!("need 1 <= k <= d, got k={k}, d={d}")));
    }
    Ok(())
}

fn fill_gaussian<R: Rng>(mut g: DMatrix<f64>, rng: &mut R) -> DMatrix<f64> {
    // column-major: one Gaussian vector per column
    for v in g.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    g
}

/// Serialized form of a fusion frame; each basis is a row-major d×k array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameDocument {
    #[serde(rename = "N")]
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub seed: Option<u64>,
    pub bases: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

/// Λ = (‖P_i P_j‖)_{i,j} with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct IncoherenceMatrix {
    entries: DMatrix<f64>,
}

/// Support-restricted norms of Λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestrictedNorms {
    /// ‖Λ_S‖_∞: max over all rows i of Σ_{j∈S, j≠i} α_ij
    pub inf_s: f64,
    /// ‖Λ^S‖_∞: same, rows restricted to S
    pub inf_ss: f64,
    /// ‖Λ_S‖_{2,∞}
    pub two_inf_s: f64,
    /// ‖Λ^S‖_{2,∞}
    pub two_inf_ss: f64,
    /// ‖Λ^S‖, spectral norm of the principal S×S submatrix
    pub spec_ss: f64,
}

impl IncoherenceMatrix {
    /// Validates symmetry, zero diagonal and entries in [0, 1].
    pub fn from_entries(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 || entries.ncols() != n {
            return Err(Error::InvalidDimension("incoherence matrix must be square and nonempty".into()));
        }
        for i in 0..n {
            if entries[(i, i)] != 0.0 {
                return Err(Error::Domain("incoherence diagonal must be zero".into()));
            }
            for j in 0..n {
                let a = entries[(i, j)];
                if !(0.0..=1.0).contains(&a) {
                    return Err(Error::Domain(format!("entry ({i},{j}) = {a} outside [0,1]")));
                }
                if (a - entries[(j, i)]).abs() > 1e-12 {
                    return Err(Error::Domain("incoherence matrix must be symmetric".into()));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// λ = max_{i≠j} ‖P_i P_j‖
    pub fn lambda_max(&self) -> f64 {
        self.entries.max().max(0.0)
    }

    pub fn restricted_norms(&self, support: &BlockSupport) -> Result<RestrictedNorms> {
        if support.is_empty() {
            return Err(Error::EmptySupport);
        }
        support.check_within(self.size())?;
        let row = |i: usize| -> (f64, f64) {
            support
                .indices()
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| self.entries[(i, j)])
                .fold((0.0, 0.0), |(sum, sq), a| (sum + a, sq + a * a))
        };
        let mut norms = RestrictedNorms {
            inf_s: 0.0,
            inf_ss: 0.0,
            two_inf_s: 0.0,
            two_inf_ss: 0.0,
            spec_ss: 0.0,
        };
        for i in 0..self.size() {
            let (sum, sq) = row(i);
            norms.inf_s = norms.inf_s.max(sum);
            norms.two_inf_s = norms.two_inf_s.max(sq.sqrt());
            if support.contains(i) {
                norms.inf_ss = norms.inf_ss.max(sum);
                norms.two_inf_ss = norms.two_inf_ss.max(sq.sqrt());
            }
        }
        let idx = support.indices();
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.entries[(idx[a], idx[b])]);
        norms.spec_ss = sym_spectral_norm(&sub);
        Ok(norms)
    }

    /// λ_eff = ‖Λ_S‖_∞ / |S|
    pub fn lambda_eff(&self, support: &BlockSupport) -> Result<f64> {
        Ok(self.restricted_norms(support)?.inf_s / support.len() as f64)
    }
}
