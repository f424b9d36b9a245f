//! Synthetic problem generators: draw seeded factors, push them through a
//! nonlinearity, and hand back the exact instance for recovery experiments.

use crate::matrix::DenseMatrix;
use crate::model::{apply_nonlinearity, Nonlinearity};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

/// Distribution of the ground-truth factor entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorDist {
    /// Standard Gaussian entries.
    Gaussian,
    /// Uniform entries on `[0, 1]` (makes CSF sign recovery trivial).
    Uniform01,
}

/// A generated instance `x = f(w h)` with its ground-truth factors.
#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub x: DenseMatrix,
    pub w: DenseMatrix,
    pub h: DenseMatrix,
}

/// Seeded Gaussian matrix.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = StdRng::seed_from_u64(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

/// Generates `x = f(w h)` with factors of the given rank and distribution.
pub fn generate(
    f: &Nonlinearity,
    rows: usize,
    cols: usize,
    rank: usize,
    dist: FactorDist,
    seed: u64,
) -> SyntheticInstance {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut draw = |_: usize, _: usize| -> f64 {
        match dist {
            FactorDist::Gaussian => StandardNormal.sample(&mut rng),
            FactorDist::Uniform01 => rng.random(),
        }
    };
    let w = DenseMatrix::from_fn(rows, rank, &mut draw);
    let h = DenseMatrix::from_fn(rank, cols, &mut draw);
    let x = apply_nonlinearity(f, &w.matmul(&h).expect("generated shapes agree"));
    SyntheticInstance { x, w, h }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic_and_valid() {
        let f = Nonlinearity::Relu;
        let a = generate(&f, 10, 8, 3, FactorDist::Gaussian, 42);
        let b = generate(&f, 10, 8, 3, FactorDist::Gaussian, 42);
        assert_eq!(a.x.as_slice(), b.x.as_slice());
        assert!(a.x.as_slice().iter().all(|&v| v >= 0.0));
        assert_eq!(a.x.shape(), (10, 8));
        assert_eq!(a.w.shape(), (10, 3));
        assert_eq!(a.h.shape(), (3, 8));
    }

    #[test]
    fn uniform_factors_are_nonnegative() {
        let inst = generate(&Nonlinearity::Csf, 6, 5, 2, FactorDist::Uniform01, 7);
        assert!(inst.w.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
        // with nonnegative factors, sqrt(x) recovers wh exactly
        let wh = inst.w.matmul(&inst.h).unwrap();
        let sqrt_x = inst.x.map(f64::sqrt);
        assert!(sqrt_x.sub(&wh).unwrap().frob_norm() < 1e-12);
    }
}
