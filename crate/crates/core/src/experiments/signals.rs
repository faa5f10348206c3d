//! Test signals in 𝓗.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::block::{BlockForm, BlockSupport, BlockVector};
use crate::frame::FusionFrame;
use crate::rng::SeededRng;

fn gaussian_coeffs(frame: &FusionFrame, blocks: &[usize], rng: &mut SeededRng) -> BlockVector {
    let k = frame.subspace_dim();
    let mut c = BlockVector::zeros(frame.num_subspaces(), k, BlockForm::Coefficient);
    for &j in blocks {
        for v in c.block_mut(j) {
            *v = rng.sample(StandardNormal);
        }
    }
    c
}

fn random_subset(n: usize, s: usize, rng: &mut SeededRng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.partial_shuffle(rng, s);
    let mut out = idx[..s].to_vec();
    out.sort_unstable();
    out
}

/// s blocks chosen uniformly, a standard Gaussian vector in each subspace, ‖x‖₂ = 1.
pub fn sparse_signal(frame: &FusionFrame, s: usize, rng: &mut SeededRng) -> (BlockVector, BlockSupport) {
    let n = frame.num_subspaces();
    let s = s.min(n);
    let support = random_subset(n, s, rng);
    let c = gaussian_coeffs(frame, &support, rng);
    let x = frame.expand(&c).expect("coefficient shape matches frame");
    let nrm = x.norm_l2();
    let x = if nrm > 0.0 { x.scale(1.0 / nrm) } else { x };
    (x, BlockSupport::new(support).expect("distinct indices"))
}

/// x = x_S + θ z_{S̄} with ‖x_S‖_{2,1} = ‖z_{S̄}‖_{2,1} = 1.
pub fn compressible_signal(
    frame: &FusionFrame,
    s: usize,
    theta: f64,
    rng: &mut SeededRng,
) -> (BlockVector, BlockSupport) {
    let n = frame.num_subspaces();
    let s = s.min(n);
    let support = random_subset(n, s, rng);
    let head = frame.expand(&gaussian_coeffs(frame, &support, rng)).expect("shape");
    let rest: Vec<usize> = (0..n).filter(|j| !support.contains(j)).collect();
    let tail = frame.expand(&gaussian_coeffs(frame, &rest, rng)).expect("shape");
    let unit = |v: BlockVector| {
        let l = v.norm_l21();
        if l > 0.0 {
            v.scale(1.0 / l)
        } else {
            v
        }
    };
    let x = unit(head).add(&unit(tail).scale(theta)).expect("same shape");
    (x, BlockSupport::new(support).expect("distinct indices"))
}

/// Block norms c·j^{−1/q} (j = 1..N) on a random block order, random directions
/// within each subspace, ‖x‖₂ = 1.
pub fn power_law_signal(frame: &FusionFrame, q: f64, rng: &mut SeededRng) -> BlockVector {
    let n = frame.num_subspaces();
    let k = frame.subspace_dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let weights: Vec<f64> = (1..=n).map(|j| (j as f64).powf(-1.0 / q)).collect();
    let c_norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    let mut c = BlockVector::zeros(n, k, BlockForm::Coefficient);
    for (rank, &j) in order.iter().enumerate() {
        let mut dir: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let nrm = dir.iter().map(|a| a * a).sum::<f64>().sqrt();
        let target = weights[rank] / c_norm;
        dir.iter_mut().for_each(|a| *a *= target / nrm);
        c.block_mut(j).copy_from_slice(&dir);
    }
    frame.expand(&c).expect("shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn sparse_signal_shape() {
        let f = FusionFrame::random(20, 5, 2, 1).unwrap();
        let mut rng = seeded(3);
        let (x, s) = sparse_signal(&f, 6, &mut rng);
        assert_eq!(s.len(), 6);
        assert_eq!(x.support(0.0), s);
        assert!((x.norm_l2() - 1.0).abs() < 1e-12);
        assert!((f.project_onto_h(&x).unwrap().distance(&x).unwrap()) < 1e-12);
        let (z, s0) = sparse_signal(&f, 0, &mut rng);
        assert!(s0.is_empty() && z.norm_l2() == 0.0);
    }

    #[test]
    fn compressible_parts_are_normalised() {
        let f = FusionFrame::random(15, 4, 2, 2).unwrap();
        let (x, s) = compressible_signal(&f, 3, 0.12, &mut seeded(4));
        let head = x.mask(&s).unwrap();
        let tail = x.sub(&head).unwrap();
        assert!((head.norm_l21() - 1.0).abs() < 1e-12);
        assert!((tail.norm_l21() - 0.12).abs() < 1e-12);
        assert!((x.best_s_term_error(3) - 0.12).abs() < 1e-12);
    }

    #[test]
    fn power_law_is_unit_norm_with_decaying_blocks() {
        let f = FusionFrame::random(30, 4, 2, 5).unwrap();
        for (i, q) in [0.1, 0.3, 0.5, 1.0, 2.0].into_iter().enumerate() {
            let x = power_law_signal(&f, q, &mut seeded(i as u64));
            assert!((x.norm_l2() - 1.0).abs() < 1e-12);
            let mut norms = x.block_norms();
            norms.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let ratio = norms[1] / norms[0];
            assert!((ratio - 2f64.powf(-1.0 / q)).abs() < 1e-9);
        }
    }
}
