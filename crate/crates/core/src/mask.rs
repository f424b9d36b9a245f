//! Observation masks for matrix completion, train/test splits, and the RMSE
//! metric evaluated on a mask.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

/// Boolean membership of each entry in the observed set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationMask {
    rows: usize,
    cols: usize,
    observed: Vec<bool>,
}

impl ObservationMask {
    /// Mask with every entry observed.
    pub fn full(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            observed: vec![true; rows * cols],
        }
    }

    /// Builds a mask from row-major booleans; at least one entry must be
    /// observed.
    pub fn from_vec(rows: usize, cols: usize, observed: Vec<bool>) -> Result<Self> {
        if observed.len() != rows * cols {
            return Err(Error::shape(format!(
                "mask expected {} entries, got {}",
                rows * cols,
                observed.len()
            )));
        }
        if !observed.iter().any(|&b| b) {
            return Err(Error::Mask("mask has no observed entries".into()));
        }
        Ok(Self {
            rows,
            cols,
            observed,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.observed[i * self.cols + j]
    }

    #[inline]
    pub fn is_observed_linear(&self, idx: usize) -> bool {
        self.observed[idx]
    }

    /// Number of observed entries.
    pub fn count(&self) -> usize {
        self.observed.iter().filter(|&&b| b).count()
    }

    /// Row-major linear indices of the observed entries.
    pub fn observed_indices(&self) -> Vec<usize> {
        self.observed
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    pub fn is_full(&self) -> bool {
        self.observed.iter().all(|&b| b)
    }
}

/// Disjoint train/test partition of an observed set.
#[derive(Debug, Clone)]
pub struct CompletionSplit {
    pub train: ObservationMask,
    pub test: ObservationMask,
}

/// Uniformly random mask with exactly `round(fraction * rows * cols)`
/// observed entries, deterministic per seed.
pub fn make_mask(rows: usize, cols: usize, fraction: f64, seed: u64) -> Result<ObservationMask> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::config(format!(
            "observed fraction must lie in [0, 1], got {fraction}"
        )));
    }
    let total = rows * cols;
    let count = (fraction * total as f64).round() as usize;
    if count == 0 {
        return Err(Error::Mask("mask would have no observed entries".into()));
    }
    let mut idx: Vec<usize> = (0..total).collect();
    let mut rng = StdRng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let mut observed = vec![false; total];
    for &i in idx.iter().take(count) {
        observed[i] = true;
    }
    ObservationMask::from_vec(rows, cols, observed)
}

/// Seeded partition of the observed entries into train and test with exact
/// counts (`train = round(train_fraction * |observed|)`).
pub fn split_train_test(
    mask: &ObservationMask,
    train_fraction: f64,
    seed: u64,
) -> Result<CompletionSplit> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::config(format!(
            "train fraction must lie strictly in (0, 1), got {train_fraction}"
        )));
    }
    let mut indices = mask.observed_indices();
    let n = indices.len();
    let n_train = (train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::Mask(format!(
            "split of {n} observed entries at fraction {train_fraction} leaves one side empty"
        )));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let (rows, cols) = mask.shape();
    let mut train = vec![false; rows * cols];
    let mut test = vec![false; rows * cols];
    for (pos, &idx) in indices.iter().enumerate() {
        if pos < n_train {
            train[idx] = true;
        } else {
            test[idx] = true;
        }
    }
    Ok(CompletionSplit {
        train: ObservationMask::from_vec(rows, cols, train)?,
        test: ObservationMask::from_vec(rows, cols, test)?,
    })
}

/// Root mean squared error between `x` and `p` over the observed entries.
pub fn rmse_on(x: &DenseMatrix, p: &DenseMatrix, mask: &ObservationMask) -> Result<f64> {
    if x.shape() != p.shape() || x.shape() != mask.shape() {
        return Err(Error::shape("rmse_on: inconsistent shapes"));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (idx, (&xv, &pv)) in x.as_slice().iter().zip(p.as_slice()).enumerate() {
        if mask.is_observed_linear(idx) {
            let d = xv - pv;
            sum += d * d;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Mask("rmse over an empty mask".into()));
    }
    Ok((sum / count as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_fraction_observes_everything() {
        let m = make_mask(4, 3, 1.0, 0).unwrap();
        assert_eq!(m.count(), 12);
        assert!(m.is_full());
    }

    #[test]
    fn exact_count_contract() {
        let m = make_mask(10, 10, 0.5, 123).unwrap();
        assert_eq!(m.count(), 50);
    }

    #[test]
    fn empty_mask_rejected() {
        assert!(make_mask(10, 10, 0.0, 0).is_err());
    }

    #[test]
    fn mask_deterministic_per_seed() {
        let a = make_mask(8, 8, 0.3, 9).unwrap();
        let b = make_mask(8, 8, 0.3, 9).unwrap();
        let c = make_mask(8, 8, 0.3, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn split_is_disjoint_covering_with_exact_counts() {
        let mask = make_mask(10, 10, 0.5, 7).unwrap();
        let split = split_train_test(&mask, 0.8, 3).unwrap();
        assert_eq!(split.train.count(), 40);
        assert_eq!(split.test.count(), 10);
        for i in 0..10 {
            for j in 0..10 {
                let t = split.train.is_observed(i, j);
                let e = split.test.is_observed(i, j);
                assert!(!(t && e), "train and test overlap at ({i}, {j})");
                assert_eq!(t || e, mask.is_observed(i, j), "coverage at ({i}, {j})");
            }
        }
    }

    #[test]
    fn split_rejects_empty_sides() {
        let mask = make_mask(1, 2, 1.0, 0).unwrap();
        assert!(split_train_test(&mask, 0.1, 0).is_err());
        assert!(split_train_test(&mask, 0.0, 0).is_err());
    }

    #[test]
    fn rmse_cases() {
        let x = DenseMatrix::from_vec(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        let full = ObservationMask::full(1, 3);
        assert_eq!(rmse_on(&x, &x, &full).unwrap(), 0.0);

        let single = ObservationMask::from_vec(1, 3, vec![false, true, false]).unwrap();
        let p = DenseMatrix::from_vec(1, 3, vec![9.0, 4.0, 9.0]).unwrap();
        assert_eq!(rmse_on(&x, &p, &single).unwrap(), 2.0);

        // direct-sum recomputation on a random-ish instance
        let p2 = DenseMatrix::from_vec(1, 3, vec![1.5, 1.0, 2.0]).unwrap();
        let got = rmse_on(&x, &p2, &full).unwrap();
        let expect = ((0.25 + 1.0 + 1.0) / 3.0f64).sqrt();
        assert!((got - expect).abs() < 1e-15);
    }
}
