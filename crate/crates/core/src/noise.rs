//! Noise generators and normalization matching the experiment protocol.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

/// Divides every entry by the maximum value, mapping the data into
/// `[min/max, 1]`.
pub fn normalize_max(x: &DenseMatrix) -> Result<DenseMatrix> {
    let max = x.max_value();
    if !(max > 0.0) {
        return Err(Error::domain(format!(
            "normalize_max requires a positive maximum, got {max}"
        )));
    }
    Ok(x.scale(1.0 / max))
}

/// Salt-and-pepper corruption of data in `[0, 1]`. Each entry draws
/// `u ~ U(0, 1)`: `u < d/2` becomes 0 (pepper), `d/2 <= u < d` becomes 1
/// (salt), the rest pass through.
pub fn add_salt_pepper(x: &DenseMatrix, density: f64, seed: u64) -> Result<DenseMatrix> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::config(format!(
            "noise density must lie in [0, 1], got {density}"
        )));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    Ok(x.map(|v| {
        let u: f64 = rng.random();
        if u < density / 2.0 {
            0.0
        } else if u < density {
            1.0
        } else {
            v
        }
    }))
}

/// Entrywise Poisson corruption: each output entry is
/// `Poisson(scale * x) / scale`, so the mean is preserved and the noise
/// level is set by `scale` (photon count per unit intensity).
pub fn add_poisson(x: &DenseMatrix, scale: f64, seed: u64) -> Result<DenseMatrix> {
    if !(scale > 0.0) {
        return Err(Error::config(format!(
            "poisson scale must be positive, got {scale}"
        )));
    }
    if x.as_slice().iter().any(|&v| v < 0.0) {
        return Err(Error::domain("poisson noise requires nonnegative data"));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    Ok(x.map(|v| poisson_sample(scale * v, &mut rng) / scale))
}

/// Poisson sampler: inversion by sequential search below mean 30, a normal
/// approximation with continuity correction above.
pub(crate) fn poisson_sample(mean: f64, rng: &mut StdRng) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    if mean < 30.0 {
        let mut k = 0u64;
        let mut p = (-mean).exp();
        let mut cdf = p;
        let u: f64 = rng.random();
        while u > cdf && k < 10_000 {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
        }
        k as f64
    } else {
        let z: f64 = StandardNormal.sample(rng);
        (mean + mean.sqrt() * z + 0.5).floor().max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_max_cases() {
        let x = DenseMatrix::from_vec(1, 3, vec![0.0, 128.0, 255.0]).unwrap();
        let n = normalize_max(&x).unwrap();
        assert_eq!(n.get(0, 0), 0.0);
        assert!((n.get(0, 1) - 128.0 / 255.0).abs() < 1e-15);
        assert_eq!(n.get(0, 2), 1.0);

        // idempotent once the max is 1
        let again = normalize_max(&n).unwrap();
        assert_eq!(again.as_slice(), n.as_slice());

        assert!(normalize_max(&DenseMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn salt_pepper_zero_density_is_identity() {
        let x = DenseMatrix::from_fn(10, 10, |i, j| ((i * 10 + j) as f64) / 100.0);
        let y = add_salt_pepper(&x, 0.0, 1).unwrap();
        assert_eq!(x.as_slice(), y.as_slice());
    }

    #[test]
    fn salt_pepper_full_density_is_binary() {
        let x = DenseMatrix::from_fn(250, 400, |_, _| 0.5);
        let y = add_salt_pepper(&x, 1.0, 2).unwrap();
        let pepper = y.as_slice().iter().filter(|&&v| v == 0.0).count();
        let salt = y.as_slice().iter().filter(|&&v| v == 1.0).count();
        assert_eq!(pepper + salt, 100_000);
        let pepper_frac = pepper as f64 / 100_000.0;
        assert!(
            (pepper_frac - 0.5).abs() < 0.01,
            "pepper fraction {pepper_frac}"
        );
    }

    #[test]
    fn salt_pepper_corruption_fraction_concentrates() {
        let x = DenseMatrix::from_fn(250, 400, |_, _| 0.5);
        let y = add_salt_pepper(&x, 0.2, 3).unwrap();
        let corrupted = y
            .as_slice()
            .iter()
            .filter(|&&v| v == 0.0 || v == 1.0)
            .count();
        let frac = corrupted as f64 / 100_000.0;
        assert!((frac - 0.2).abs() < 0.01, "corrupted fraction {frac}");
        assert!(y.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn salt_pepper_rejects_bad_density() {
        let x = DenseMatrix::zeros(1, 1);
        assert!(add_salt_pepper(&x, -0.1, 0).is_err());
        assert!(add_salt_pepper(&x, 1.1, 0).is_err());
    }

    #[test]
    fn poisson_zero_stays_zero() {
        let x = DenseMatrix::zeros(10, 10);
        let y = add_poisson(&x, 255.0, 4).unwrap();
        assert!(y.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn poisson_preserves_mean() {
        // mean over many draws at intensity 0.75, scale 255 (mean 191.25,
        // normal-approximation branch)
        let x = DenseMatrix::from_fn(250, 400, |_, _| 0.75);
        let y = add_poisson(&x, 255.0, 5).unwrap();
        let mean = y.mean();
        assert!((mean - 0.75).abs() < 0.01, "empirical mean {mean}");
        assert!(y.as_slice().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn poisson_small_mean_branch_preserves_mean() {
        let x = DenseMatrix::from_fn(250, 400, |_, _| 0.02);
        let y = add_poisson(&x, 255.0, 6).unwrap(); // mean 5.1 per entry
        let mean = y.mean();
        assert!((mean - 0.02).abs() < 0.001, "empirical mean {mean}");
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let x = DenseMatrix::from_fn(20, 20, |i, j| ((i + j) as f64 * 0.1).fract());
        assert_eq!(
            add_salt_pepper(&x, 0.3, 9).unwrap().as_slice(),
            add_salt_pepper(&x, 0.3, 9).unwrap().as_slice()
        );
        assert_eq!(
            add_poisson(&x, 100.0, 9).unwrap().as_slice(),
            add_poisson(&x, 100.0, 9).unwrap().as_slice()
        );
    }
}
