//! The four entrywise nonlinearities, the three loss functions, and the
//! relative-error metrics reported by every experiment.
//!
//! A model is a `(nonlinearity, loss)` pair; all twelve combinations are
//! supported. Each pair carries a data-validity rule that is enforced once
//! at solver setup, not per iteration.

use crate::error::{Error, Result};
use crate::mask::ObservationMask;
use crate::matrix::DenseMatrix;

/// Entrywise nonlinearity `f` in `X ~ f(WH)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nonlinearity {
    /// `f(t) = max(0, t)`, for nonnegative sparse data.
    Relu,
    /// `f(t) = t^2` (component-wise square).
    Csf,
    /// `f(t) = min(upper, max(lower, t))`, for data bounded in an interval.
    MinMax { lower: f64, upper: f64 },
    /// `f(t) = |t|`.
    Modulus,
}

impl Nonlinearity {
    pub fn min_max(lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) {
            return Err(Error::config(format!(
                "MinMax bounds require lower < upper, got [{lower}, {upper}]"
            )));
        }
        Ok(Nonlinearity::MinMax { lower, upper })
    }

    #[inline]
    pub fn apply_scalar(&self, t: f64) -> f64 {
        match *self {
            Nonlinearity::Relu => t.max(0.0),
            Nonlinearity::Csf => t * t,
            Nonlinearity::MinMax { lower, upper } => t.clamp(lower, upper),
            Nonlinearity::Modulus => t.abs(),
        }
    }

    /// MinMax bounds, if this is the MinMax model.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match *self {
            Nonlinearity::MinMax { lower, upper } => Some((lower, upper)),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Nonlinearity::Relu => "relu",
            Nonlinearity::Csf => "csf",
            Nonlinearity::MinMax { .. } => "minmax",
            Nonlinearity::Modulus => "modulus",
        }
    }
}

/// Loss function `d` measuring the misfit `d(X, f(T))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// Squared Frobenius norm.
    Frobenius,
    /// Entrywise absolute-value sum.
    L1,
    /// Kullback-Leibler divergence for nonnegative data.
    Kl,
}

impl Loss {
    pub fn name(&self) -> &'static str {
        match self {
            Loss::Frobenius => "fro",
            Loss::L1 => "l1",
            Loss::Kl => "kl",
        }
    }
}

/// One of the twelve supported model combinations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub nonlinearity: Nonlinearity,
    pub loss: Loss,
}

impl ModelSpec {
    pub fn new(nonlinearity: Nonlinearity, loss: Loss) -> Result<Self> {
        if let Nonlinearity::MinMax { lower, upper } = nonlinearity {
            if !(lower < upper) {
                return Err(Error::config(format!(
                    "MinMax bounds require lower < upper, got [{lower}, {upper}]"
                )));
            }
            // KL evaluates log(lower) on the lower clip region whenever the
            // data entry is positive.
            if loss == Loss::Kl && lower <= 0.0 {
                return Err(Error::config(
                    "MinMax with KL loss requires a positive lower bound".to_string(),
                ));
            }
        }
        Ok(ModelSpec { nonlinearity, loss })
    }

    pub fn name(&self) -> String {
        format!("{}+{}", self.nonlinearity.name(), self.loss.name())
    }

    /// Checks the model's data-validity rule on `x`, restricted to the
    /// observed entries when a mask is given. ReLU, CSF and Modulus require
    /// nonnegative data; MinMax requires data inside its bounds.
    pub fn validate_data(&self, x: &DenseMatrix, mask: Option<&ObservationMask>) -> Result<()> {
        if let Some(m) = mask {
            if m.shape() != x.shape() {
                return Err(Error::shape(format!(
                    "mask shape {:?} does not match data shape {:?}",
                    m.shape(),
                    x.shape()
                )));
            }
        }
        let observed = |i: usize, j: usize| mask.map_or(true, |m| m.is_observed(i, j));
        for i in 0..x.rows() {
            for j in 0..x.cols() {
                if !observed(i, j) {
                    continue;
                }
                let v = x.get(i, j);
                if !v.is_finite() {
                    return Err(Error::domain(format!("non-finite entry at ({i}, {j})")));
                }
                match self.nonlinearity {
                    Nonlinearity::MinMax { lower, upper } => {
                        if v < lower || v > upper {
                            return Err(Error::domain(format!(
                                "entry {v} at ({i}, {j}) outside MinMax bounds [{lower}, {upper}]"
                            )));
                        }
                    }
                    _ => {
                        if v < 0.0 {
                            return Err(Error::domain(format!(
                                "negative entry {v} at ({i}, {j}) for the {} model",
                                self.nonlinearity.name()
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Clips out-of-range entries to the MinMax bounds and reports how many
    /// were touched. The explicit alternative to rejection for data that is
    /// only approximately bounded (e.g. after noise corruption).
    pub fn clip_to_bounds(&self, x: &DenseMatrix) -> (DenseMatrix, usize) {
        match self.nonlinearity {
            Nonlinearity::MinMax { lower, upper } => {
                let mut clipped = 0usize;
                let out = x.map(|v| {
                    if v < lower || v > upper {
                        clipped += 1;
                        v.clamp(lower, upper)
                    } else {
                        v
                    }
                });
                (out, clipped)
            }
            _ => (x.clone(), 0),
        }
    }
}

/// Entrywise application of `f`.
pub fn apply_nonlinearity(f: &Nonlinearity, t: &DenseMatrix) -> DenseMatrix {
    t.map(|v| f.apply_scalar(v))
}

/// KL divergence between nonnegative scalars, with `x log(x/y)` evaluated as
/// `x (ln x - ln y)` and the `x = 0` branch taken before any log.
#[inline]
pub(crate) fn kl_scalar_raw(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        y
    } else if y <= 0.0 {
        f64::INFINITY
    } else {
        x * (x.ln() - y.ln()) - x + y
    }
}

/// Scalar KL divergence `d_KL(x, y)`; `+inf` when `x > 0` and `y = 0`.
pub fn kl_scalar(x: f64, y: f64) -> Result<f64> {
    if x < 0.0 || y < 0.0 {
        return Err(Error::domain(format!(
            "kl_scalar requires nonnegative arguments, got ({x}, {y})"
        )));
    }
    Ok(kl_scalar_raw(x, y))
}

/// Scalar loss contribution used in the entrywise subproblems. The
/// Frobenius case carries the 1/2 factor of the quadratic form.
#[inline]
pub(crate) fn scalar_loss(loss: Loss, x: f64, y: f64) -> f64 {
    match loss {
        Loss::Frobenius => 0.5 * (x - y) * (x - y),
        Loss::L1 => (x - y).abs(),
        Loss::Kl => kl_scalar_raw(x, y),
    }
}

/// Matrix loss `d(X, Y)`: squared Frobenius norm, entrywise l1 norm, or the
/// summed KL divergence.
pub fn loss_value(loss: Loss, x: &DenseMatrix, y: &DenseMatrix) -> Result<f64> {
    if x.shape() != y.shape() {
        return Err(Error::shape(format!(
            "loss_value: {:?} vs {:?}",
            x.shape(),
            y.shape()
        )));
    }
    match loss {
        Loss::Frobenius => Ok(x
            .as_slice()
            .iter()
            .zip(y.as_slice())
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum()),
        Loss::L1 => Ok(x
            .as_slice()
            .iter()
            .zip(y.as_slice())
            .map(|(&a, &b)| (a - b).abs())
            .sum()),
        Loss::Kl => {
            let mut total = 0.0;
            for (&a, &b) in x.as_slice().iter().zip(y.as_slice()) {
                total += kl_scalar(a, b)?;
            }
            Ok(total)
        }
    }
}

/// Relative objective of a model on data `x` against the pre-nonlinearity
/// prediction `z` (usually `WH`): the nonlinearity is applied inside.
///
/// Frobenius and l1 report `||X - f(Z)|| / ||X||` (unsquared); KL reports
/// `KL(X, f(Z)) / KL(X, X_mean)` with `X_mean` the constant grand-mean
/// matrix.
pub fn relative_objective(spec: &ModelSpec, x: &DenseMatrix, z: &DenseMatrix) -> Result<f64> {
    relative_objective_masked(spec, x, z, None)
}

/// [`relative_objective`] restricted to the observed entries of a mask.
pub fn relative_objective_masked(
    spec: &ModelSpec,
    x: &DenseMatrix,
    z: &DenseMatrix,
    mask: Option<&ObservationMask>,
) -> Result<f64> {
    if x.shape() != z.shape() {
        return Err(Error::shape(format!(
            "relative_objective: {:?} vs {:?}",
            x.shape(),
            z.shape()
        )));
    }
    if let Some(m) = mask {
        if m.shape() != x.shape() {
            return Err(Error::shape("mask shape mismatch"));
        }
    }
    let f = &spec.nonlinearity;
    let observed = |idx: usize| mask.map_or(true, |m| m.is_observed_linear(idx));

    match spec.loss {
        Loss::Frobenius => {
            let mut num = 0.0;
            let mut den = 0.0;
            for (idx, (&xv, &zv)) in x.as_slice().iter().zip(z.as_slice()).enumerate() {
                if !observed(idx) {
                    continue;
                }
                let d = xv - f.apply_scalar(zv);
                num += d * d;
                den += xv * xv;
            }
            if den == 0.0 {
                return Err(Error::DegenerateMetric("||X||_F is zero".into()));
            }
            Ok((num / den).sqrt())
        }
        Loss::L1 => {
            let mut num = 0.0;
            let mut den = 0.0;
            for (idx, (&xv, &zv)) in x.as_slice().iter().zip(z.as_slice()).enumerate() {
                if !observed(idx) {
                    continue;
                }
                num += (xv - f.apply_scalar(zv)).abs();
                den += xv.abs();
            }
            if den == 0.0 {
                return Err(Error::DegenerateMetric("||X||_1 is zero".into()));
            }
            Ok(num / den)
        }
        Loss::Kl => {
            let mut sum = 0.0;
            let mut count = 0usize;
            for (idx, &xv) in x.as_slice().iter().enumerate() {
                if !observed(idx) {
                    continue;
                }
                if xv < 0.0 {
                    return Err(Error::domain("KL metric requires nonnegative data"));
                }
                sum += xv;
                count += 1;
            }
            if count == 0 {
                return Err(Error::Mask("no observed entries".into()));
            }
            let mean = sum / count as f64;
            let mut num = 0.0;
            let mut den = 0.0;
            for (idx, (&xv, &zv)) in x.as_slice().iter().zip(z.as_slice()).enumerate() {
                if !observed(idx) {
                    continue;
                }
                num += kl_scalar_raw(xv, f.apply_scalar(zv));
                den += kl_scalar_raw(xv, mean);
            }
            if den == 0.0 {
                return Err(Error::DegenerateMetric(
                    "KL(X, X_mean) is zero (constant data)".into(),
                ));
            }
            Ok(num / den)
        }
    }
}
