//! Block vectors and the mixed norms used throughout the crate.
//!
//! A [`BlockVector`] is `N` blocks of equal length stored contiguously. Blocks
//! are either ambient vectors in ℝ^d or subspace coefficients in ℝ^k; the
//! [`BlockForm`] tag records which, and never changes after construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockForm {
    Ambient,
    Coefficient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    data: Vec<f64>,
    block_len: usize,
    form: BlockForm,
}

impl BlockVector {
    pub fn new(blocks: Vec<Vec<f64>>, form: BlockForm) -> Result<Self> {
        let block_len = blocks
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidDimension("block vector needs at least one block".into()))?;
        if block_len == 0 {
            return Err(Error::InvalidDimension("block length must be at least 1".into()));
        }
        if let Some(bad) = blocks.iter().find(|b| b.len() != block_len) {
            return Err(Error::mismatch(block_len, bad.len()));
        }
        Ok(Self {
            data: blocks.concat(),
            block_len,
            form,
        })
    }

    pub fn from_flat(data: Vec<f64>, block_len: usize, form: BlockForm) -> Result<Self> {
        if block_len == 0 {
            return Err(Error::InvalidDimension("block length must be at least 1".into()));
        }
        if data.is_empty() || data.len() % block_len != 0 {
            return Err(Error::InvalidDimension(format!(
                "{} entries do not form a positive number of blocks of length {}",
                data.len(),
                block_len
            )));
        }
        Ok(Self {
            data,
            block_len,
            form,
        })
    }

    /// # Panics
    /// If `block_len` is zero.
    pub fn zeros(num_blocks: usize, block_len: usize, form: BlockForm) -> Self {
        assert!(block_len >= 1, "block length must be at least 1");
        Self {
            data: vec![0.0; num_blocks * block_len],
            block_len,
            form,
        }
    }

    pub fn num_blocks(&self) -> usize {
        self.data.len() / self.block_len
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn form(&self) -> BlockForm {
        self.form
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn block(&self, j: usize) -> &[f64] {
        &self.data[j * self.block_len..(j + 1) * self.block_len]
    }

    pub fn block_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.block_len..(j + 1) * self.block_len]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.block_len)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    pub fn block_norm(&self, j: usize) -> f64 {
        euclid(self.block(j))
    }

    pub fn block_norms(&self) -> Vec<f64> {
        self.blocks().map(euclid).collect()
    }

    /// Σ_j ‖x_j‖₂
    pub fn norm_l21(&self) -> f64 {
        self.blocks().map(euclid).sum()
    }

    /// max_j ‖x_j‖₂
    pub fn norm_l2inf(&self) -> f64 {
        self.blocks().map(euclid).fold(0.0, f64::max)
    }

    pub fn norm_l2(&self) -> f64 {
        euclid(&self.data)
    }

    /// Number of blocks with Euclidean norm strictly above `tol`.
    pub fn norm_l0_block(&self, tol: f64) -> usize {
        self.blocks().filter(|b| euclid(b) > tol).count()
    }

    pub fn support(&self, tol: f64) -> BlockSupport {
        BlockSupport {
            indices: self
                .blocks()
                .enumerate()
                .filter(|(_, b)| euclid(b) > tol)
                .map(|(j, _)| j)
                .collect(),
        }
    }

    /// Normalises every nonzero block; exactly-zero blocks stay zero.
    pub fn block_sgn(&self) -> Self {
        let mut out = self.clone();
        for j in 0..out.num_blocks() {
            let nrm = out.block_norm(j);
            let b = out.block_mut(j);
            if nrm != 0.0 {
                b.iter_mut().for_each(|v| *v /= nrm);
            }
        }
        out
    }

    /// Indices of the `s` largest blocks in ℓ2 norm, ties resolved towards the lower index.
    pub fn best_s_term_support(&self, s: usize) -> BlockSupport {
        let norms = self.block_norms();
        let mut order: Vec<usize> = (0..norms.len()).collect();
        // stable sort keeps lower indices first among equal norms
        order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
        let mut indices: Vec<usize> = order.into_iter().take(s.min(norms.len())).collect();
        indices.sort_unstable();
        BlockSupport { indices }
    }

    /// σ_s(x)₁: the ℓ2,1 norm of `x` after zeroing its `s` largest blocks.
    pub fn best_s_term_error(&self, s: usize) -> f64 {
        let keep = self.best_s_term_support(s);
        self.blocks()
            .enumerate()
            .filter(|(j, _)| !keep.contains(*j))
            .map(|(_, b)| euclid(b))
            .sum()
    }

    /// The |S|-block vector of the selected blocks, in index order.
    pub fn restrict(&self, support: &BlockSupport) -> Result<Self> {
        support.check_within(self.num_blocks())?;
        let mut data = Vec::with_capacity(support.len() * self.block_len);
        for &j in support.indices() {
            data.extend_from_slice(self.block(j));
        }
        Ok(Self {
            data,
            block_len: self.block_len,
            form: self.form,
        })
    }

    /// Zeroes every block outside `support`, keeping the block count.
    pub fn mask(&self, support: &BlockSupport) -> Result<Self> {
        support.check_within(self.num_blocks())?;
        let mut out = Self::zeros(self.num_blocks(), self.block_len, self.form);
        for &j in support.indices() {
            out.block_mut(j).copy_from_slice(self.block(j));
        }
        Ok(out)
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self {
            data: self.data.iter().map(|v| alpha * v).collect(),
            block_len: self.block_len,
            form: self.form,
        }
    }

    /// ‖self − other‖₂
    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.check_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
            block_len: self.block_len,
            form: self.form,
        }
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.block_len != other.block_len || self.data.len() != other.data.len() {
            return Err(Error::mismatch(
                format!("{}x{}", self.num_blocks(), self.block_len),
                format!("{}x{}", other.num_blocks(), other.block_len),
            ));
        }
        Ok(())
    }
}

pub(crate) fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// A strictly increasing set of (zero-based) block indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct BlockSupport {
    indices: Vec<usize>,
}

impl BlockSupport {
    /// Sorts the indices; duplicates are rejected.
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSupport("duplicate index".into()));
        }
        Ok(Self { indices })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn full(n: usize) -> Self {
        Self {
            indices: (0..n).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }

    /// S̄ = [n] \ S
    pub fn complement(&self, n: usize) -> Self {
        Self {
            indices: (0..n).filter(|j| !self.contains(*j)).collect(),
        }
    }

    pub fn check_within(&self, n: usize) -> Result<()> {
        match self.indices.last() {
            Some(&last) if last >= n => Err(Error::IndexOutOfRange { index: last, len: n }),
            _ => Ok(()),
        }
    }
}

impl TryFrom<Vec<usize>> for BlockSupport {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<BlockSupport> for Vec<usize> {
    fn from(s: BlockSupport) -> Self {
        s.indices
    }
}
