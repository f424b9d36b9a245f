//! Closed-form solvers for the entrywise auxiliary-variable subproblems.
//!
//! Each entry of the T-update minimizes
//!
//! ```text
//!   g(t) = d(x, f(t)) + lambda * t + (rho/2) * (t - a)^2
//! ```
//!
//! over a scalar `t`. This is the only model-dependent step of the solver.
//! Every one of the twelve `(nonlinearity, loss)` pairs admits a small
//! candidate set: the stationary points of the smooth pieces plus the piece
//! boundaries and kinks. Rather than threading through case tables, each
//! solver enumerates its candidates (clipped to their branch domains),
//! evaluates the exact objective at each, and returns the argmin. Ties
//! within `1e-12 * (1 + |objective|)` resolve to the larger `t`.
//!
//! Extension point: a new nonlinearity/loss pairing only needs its own
//! candidate enumeration (stationary points of each smooth piece plus the
//! kinks); selection via [`subproblem_objective`] and the matrix-level
//! plumbing in [`update_t`] are model-agnostic. A bracketed line search
//! would do for pairings with no closed-form stationary points.

use crate::cubic::depressed_cubic_roots;
use crate::error::{Error, Result};
use crate::mask::ObservationMask;
use crate::matrix::DenseMatrix;
use crate::model::{scalar_loss, Loss, ModelSpec, Nonlinearity};

/// One entrywise subproblem instance.
#[derive(Debug, Clone, Copy)]
pub struct ScalarSubproblem {
    /// Data entry `X_ij` (must satisfy the model's validity rule).
    pub x: f64,
    /// Entry of `A = WH`.
    pub a: f64,
    /// Entry of the multiplier.
    pub lambda: f64,
    /// Penalty parameter, strictly positive.
    pub rho: f64,
    /// MinMax bounds, required by the MinMax solvers.
    pub bounds: Option<(f64, f64)>,
}

impl ScalarSubproblem {
    pub fn new(x: f64, a: f64, lambda: f64, rho: f64) -> Self {
        Self {
            x,
            a,
            lambda,
            rho,
            bounds: None,
        }
    }

    pub fn with_bounds(x: f64, a: f64, lambda: f64, rho: f64, lower: f64, upper: f64) -> Self {
        Self {
            x,
            a,
            lambda,
            rho,
            bounds: Some((lower, upper)),
        }
    }

    /// `s = rho * a - lambda`, the shifted penalty center used throughout.
    #[inline]
    fn s(&self) -> f64 {
        self.rho * self.a - self.lambda
    }
}

/// Which piece of the piecewise objective produced the minimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `t >= 0` piece.
    Positive,
    /// `t <= 0` piece.
    Negative,
    /// `lower <= t <= upper` piece of the MinMax objective.
    Within,
    /// `t <= lower` clip region of the MinMax objective.
    BelowLower,
    /// `t >= upper` clip region of the MinMax objective.
    AboveUpper,
    /// A kink shared by two adjacent pieces (`0`, the MinMax bounds, or
    /// `±sqrt(x)`).
    Boundary,
    /// Stationary point of a smooth objective (domain is all of R).
    Stationary,
    /// `t^2 <= x` inner region of the CSF + l1 objective.
    InsideSqrt,
    /// `t^2 >= x` outer region of the CSF + l1 objective.
    OutsideSqrt,
}

impl Branch {
    /// Whether `t` lies in the closed domain of this branch for the given
    /// subproblem.
    pub fn contains(&self, t: f64, sub: &ScalarSubproblem) -> bool {
        let eps = 1e-10 * (1.0 + t.abs());
        match *self {
            Branch::Positive => t >= -eps,
            Branch::Negative => t <= eps,
            Branch::Stationary => true,
            Branch::Within => {
                let (p, q) = sub.bounds.expect("Within branch requires bounds");
                t >= p - eps && t <= q + eps
            }
            Branch::BelowLower => {
                let (p, _) = sub.bounds.expect("BelowLower branch requires bounds");
                t <= p + eps
            }
            Branch::AboveUpper => {
                let (_, q) = sub.bounds.expect("AboveUpper branch requires bounds");
                t >= q - eps
            }
            Branch::Boundary => {
                let mut kinks = [0.0, f64::NAN, f64::NAN, f64::NAN, f64::NAN];
                if let Some((p, q)) = sub.bounds {
                    kinks[1] = p;
                    kinks[2] = q;
                }
                if sub.x >= 0.0 {
                    kinks[3] = sub.x.sqrt();
                    kinks[4] = -sub.x.sqrt();
                }
                kinks.iter().any(|&k| k.is_finite() && (t - k).abs() <= eps)
            }
            Branch::InsideSqrt => t * t <= sub.x + 1e-10 * (1.0 + sub.x),
            Branch::OutsideSqrt => t * t >= sub.x - 1e-10 * (1.0 + sub.x),
        }
    }
}

/// Minimizer of one scalar subproblem.
#[derive(Debug, Clone, Copy)]
pub struct ProxResult {
    pub t: f64,
    /// `d(x, f(t)) + lambda*t + (rho/2)(t-a)^2` at the minimizer.
    pub objective: f64,
    /// Diagnostic label of the selected case.
    pub branch: Branch,
}

/// Exact subproblem objective for any model; `+inf` where the KL term
/// blows up.
pub fn subproblem_objective(nl: &Nonlinearity, loss: Loss, sub: &ScalarSubproblem, t: f64) -> f64 {
    let d = scalar_loss(loss, sub.x, nl.apply_scalar(t));
    d + sub.lambda * t + 0.5 * sub.rho * (t - sub.a) * (t - sub.a)
}

/// Fixed-capacity candidate list; the largest solver produces five points.
struct Candidates {
    buf: [(f64, Branch); 6],
    len: usize,
}

impl Candidates {
    fn new() -> Self {
        Self {
            buf: [(0.0, Branch::Boundary); 6],
            len: 0,
        }
    }

    #[inline]
    fn push(&mut self, t: f64, branch: Branch) {
        debug_assert!(self.len < self.buf.len());
        self.buf[self.len] = (t, branch);
        self.len += 1;
    }

    fn as_slice(&self) -> &[(f64, Branch)] {
        &self.buf[..self.len]
    }
}

/// Evaluates the exact objective at every candidate and returns the argmin,
/// breaking near-ties toward the larger `t`.
fn select(nl: &Nonlinearity, loss: Loss, sub: &ScalarSubproblem, cands: &Candidates) -> ProxResult {
    debug_assert!(sub.rho > 0.0, "penalty parameter must be positive");
    let mut best: Option<(f64, f64, Branch)> = None;
    for &(t, branch) in cands.as_slice() {
        if !t.is_finite() {
            continue;
        }
        let obj = subproblem_objective(nl, loss, sub, t);
        if obj.is_nan() {
            continue;
        }
        best = Some(match best {
            None => (t, obj, branch),
            Some(cur) => {
                let tol = 1e-12 * (1.0 + cur.1.abs().min(obj.abs()));
                if obj < cur.1 - tol || ((obj - cur.1).abs() <= tol && t > cur.0) {
                    (t, obj, branch)
                } else {
                    cur
                }
            }
        });
    }
    let (t, objective, branch) = best.expect("candidate set contains a finite point");
    debug_assert!(
        objective.is_finite(),
        "scalar subproblem has no finite candidate"
    );
    ProxResult {
        t,
        objective,
        branch,
    }
}

/// Positive root of `rho t^2 + b t - c = 0` with `c >= 0`, in a
/// cancellation-free form.
#[inline]
fn positive_quadratic_root(rho: f64, b: f64, c: f64) -> f64 {
    let sq = (b * b + 4.0 * rho * c).sqrt();
    if b >= 0.0 {
        let denom = b + sq;
        if denom == 0.0 {
            0.0
        } else {
            2.0 * c / denom
        }
    } else {
        (sq - b) / (2.0 * rho)
    }
}

/// Negative root of `rho t^2 + b t - c = 0` with `c >= 0`.
#[inline]
fn negative_quadratic_root(rho: f64, b: f64, c: f64) -> f64 {
    let sq = (b * b + 4.0 * rho * c).sqrt();
    if b > 0.0 {
        (-b - sq) / (2.0 * rho)
    } else {
        let denom = sq - b;
        if denom == 0.0 {
            0.0
        } else {
            -2.0 * c / denom
        }
    }
}

/// Minimizer of `|x - t| + lambda t + (rho/2)(t - a)^2` over all `t`
/// (soft-threshold form), written with `s = rho a - lambda`.
#[inline]
fn soft_identity_min(s: f64, rho: f64, x: f64) -> f64 {
    ((s + 1.0) / rho).min(x).max((s - 1.0) / rho)
}

// ---------------------------------------------------------------------------
// ReLU
// ---------------------------------------------------------------------------

/// ReLU + Frobenius: two quadratic pieces split at zero.
pub fn prox_relu_frobenius(sub: &ScalarSubproblem) -> ProxResult {
    let s = sub.s();
    let mut c = Candidates::new();
    c.push(((sub.x + s) / (sub.rho + 1.0)).max(0.0), Branch::Positive);
    c.push((s / sub.rho).min(0.0), Branch::Negative);
    c.push(0.0, Branch::Boundary);
    select(&Nonlinearity::Relu, Loss::Frobenius, sub, &c)
}

/// ReLU + KL. For `x > 0` the divergence pins `t > 0` and the stationarity
/// condition is the quadratic `rho t^2 + (1 - s) t - x = 0`; for `x = 0` the
/// objective is piecewise quadratic around zero.
pub fn prox_relu_kl(sub: &ScalarSubproblem) -> ProxResult {
    let s = sub.s();
    let mut c = Candidates::new();
    if sub.x > 0.0 {
        c.push(
            positive_quadratic_root(sub.rho, 1.0 - s, sub.x),
            Branch::Positive,
        );
    } else {
        c.push(((s - 1.0) / sub.rho).max(0.0), Branch::Positive);
        c.push((s / sub.rho).min(0.0), Branch::Negative);
        c.push(0.0, Branch::Boundary);
    }
    select(&Nonlinearity::Relu, Loss::Kl, sub, &c)
}

/// ReLU + l1: quadratic on `t <= 0`, soft-thresholded identity fit on
/// `t > 0`.
pub fn prox_relu_l1(sub: &ScalarSubproblem) -> ProxResult {
    let s = sub.s();
    let mut c = Candidates::new();
    c.push(
        soft_identity_min(s, sub.rho, sub.x).max(0.0),
        Branch::Positive,
    );
    c.push((s / sub.rho).min(0.0), Branch::Negative);
    c.push(0.0, Branch::Boundary);
    select(&Nonlinearity::Relu, Loss::L1, sub, &c)
}

// ---------------------------------------------------------------------------
// CSF
// ---------------------------------------------------------------------------

/// CSF + Frobenius: the stationarity condition is the depressed cubic
/// `t^3 + (rho - 2x)/2 t + (lambda - rho a)/2 = 0`; the best real root wins.
pub fn prox_csf_frobenius(sub: &ScalarSubproblem) -> ProxResult {
    let p = (sub.rho - 2.0 * sub.x) / 2.0;
    let q = (sub.lambda - sub.rho * sub.a) / 2.0;
    let mut roots = [0.0; 3];
    let n = depressed_cubic_roots(p, q, &mut roots);
    let mut c = Candidates::new();
    for &t in &roots[..n] {
        c.push(t, Branch::Stationary);
    }
    select(&Nonlinearity::Csf, Loss::Frobenius, sub, &c)
}

/// CSF + KL. For `x > 0` the two stationary points solve
/// `(rho + 2) t^2 - s t - 2x = 0`; for `x = 0` the objective is a strictly
/// convex quadratic.
pub fn prox_csf_kl(sub: &ScalarSubproblem) -> ProxResult {
    let s = sub.s();
    let mut c = Candidates::new();
    if sub.x > 0.0 {
        let a2 = sub.rho + 2.0;
        c.push(
            positive_quadratic_root(a2, -s, 2.0 * sub.x),
            Branch::Positive,
        );
        c.push(
            negative_quadratic_root(a2, -s, 2.0 * sub.x),
            Branch::Negative,
        );
    } else {
        c.push(s / (sub.rho + 2.0), Branch::Stationary);
    }
    select(&Nonlinearity::Csf, Loss::Kl, sub, &c)
}

/// CSF + l1: quadratic pieces inside and outside `t^2 = x` with kinks at
/// `±sqrt(x)`. The inner stationary point only exists (and is only convex)
/// for `rho > 2`.
pub fn prox_csf_l1(sub: &ScalarSubproblem) -> ProxResult {
    let s = sub.s();
    let sqrt_x = sub.x.max(0.0).sqrt();
    let mut c = Candidates::new();
    if sub.rho > 2.0 {
        let t_in = s / (sub.rho - 2.0);
        if t_in * t_in <= sub.x {
            c.push(t_in, Branch::InsideSqrt);
        }
    }
    let t_out = s / (sub.rho + 2.0);
    if t_out * t_out >= sub.x {
        c.push(t_out, Branch::OutsideSqrt);
    }
    c.push(sqrt_x, Branch::Boundary);
    c.push(-sqrt_x, Branch::Boundary);
    select(&Nonlinearity::Csf, Loss::L1, sub, &c)
}

// ---------------------------------------------------------------------------
// MinMax
// ---------------------------------------------------------------------------

fn require_bounds(sub: &ScalarSubproblem) -> Result<(f64, f64)> {
    match sub.bounds {
        Some((p, q)) if p < q => Ok((p, q)),
        Some((p, q)) => Err(Error::config(format!(
            "MinMax bounds require lower < upper, got [{p}, {q}]"
        ))),
        None => Err(Error::config(
            "MinMax subproblem requires bounds".to_string(),
        )),
    }
}

/// MinMax + Frobenius: three quadratic pieces split at the bounds.
pub fn prox_minmax_frobenius(sub: &ScalarSubproblem) -> Result<ProxResult> {
    let (p, q) = require_bounds(sub)?;
    let nl = Nonlinearity::MinMax { lower: p, upper: q };
    let s = sub.s();
    let t_clip = s / sub.rho;
    let mut c = Candidates::new();
    c.push(t_clip.min(p), Branch::BelowLower);
    c.push(t_clip.max(q), Branch::AboveUpper);
    c.push(((sub.x + s) / (sub.rho + 1.0)).clamp(p, q), Branch::Within);
    c.push(p, Branch::Boundary);
    c.push(q, Branch::Boundary);
    Ok(select(&nl, Loss::Frobenius, sub, &c))
}

/// MinMax + KL. The clip regions keep the quadratic minimizer `s/rho`; the
/// interior piece has the positive stationary root of
/// `rho t^2 + (1 - s) t - x = 0`. For `x > 0` the lower bound must be
/// positive, otherwise the divergence is infinite on the lower clip region.
pub fn prox_minmax_kl(sub: &ScalarSubproblem) -> Result<ProxResult> {
    let (p, q) = require_bounds(sub)?;
    if sub.x > 0.0 && p <= 0.0 {
        return Err(Error::domain(format!(
            "MinMax + KL with positive data requires a positive lower bound, got {p}"
        )));
    }
    let nl = Nonlinearity::MinMax { lower: p, upper: q };
    let s = sub.s();
    let t_clip = s / sub.rho;
    let mut c = Candidates::new();
    c.push(t_clip.min(p), Branch::BelowLower);
    c.push(t_clip.max(q), Branch::AboveUpper);
    if sub.x > 0.0 {
        c.push(
            positive_quadratic_root(sub.rho, 1.0 - s, sub.x).clamp(p, q),
            Branch::Within,
        );
    } else {
        c.push(((s - 1.0) / sub.rho).clamp(p, q), Branch::Within);
    }
    c.push(p, Branch::Boundary);
    c.push(q, Branch::Boundary);
    Ok(select(&nl, Loss::Kl, sub, &c))
}

/// MinMax + l1: clip regions keep `s/rho`; the interior piece is the
/// soft-thresholded identity fit clamped to the bounds.
pub fn prox_minmax_l1(sub: &ScalarSubproblem) -> Result<ProxResult> {
    let (p, q) = require_bounds(sub)?;
    let nl = Nonlinearity::MinMax { lower: p, upper: q };
    let s = sub.s();
    let t_clip = s / sub.rho;
    let mut c = Candidates::new();
    c.push(t_clip.min(p), Branch::BelowLower);
    c.push(t_clip.max(q), Branch::AboveUpper);
    c.push(
        soft_identity_min(s, sub.rho, sub.x).clamp(p, q),
        Branch::Within,
    );
    c.push(p, Branch::Boundary);
    c.push(q, Branch::Boundary);
    Ok(select(&nl, Loss::L1, sub, &c))
}

// ---------------------------------------------------------------------------
// Modulus
// ---------------------------------------------------------------------------

/// Modulus + Frobenius: two quadratic pieces split at zero.
pub fn prox_modulus_frobenius(sub: &ScalarSubproblem) -> ProxResult {
    let s = sub.s();
    let mut c = Candidates::new();
    c.push(((s + sub.x) / (sub.rho + 1.0)).max(0.0), Branch::Positive);
    c.push(((s - sub.x) / (sub.rho + 1.0)).min(0.0), Branch::Negative);
    c.push(0.0, Branch::Boundary);
    select(&Nonlinearity::Modulus, Loss::Frobenius, sub, &c)
}

/// Modulus + KL. For `x > 0` the divergence pins `t != 0`, giving one
/// positive and one negative stationary root; for `x = 0` the objective is
/// `|t|` plus a quadratic.
pub fn prox_modulus_kl(sub: &ScalarSubproblem) -> ProxResult {
    let s = sub.s();
    let mut c = Candidates::new();
    if sub.x > 0.0 {
        c.push(
            positive_quadratic_root(sub.rho, 1.0 - s, sub.x),
            Branch::Positive,
        );
        c.push(
            negative_quadratic_root(sub.rho, -(s + 1.0), sub.x),
            Branch::Negative,
        );
    } else {
        c.push(((s - 1.0) / sub.rho).max(0.0), Branch::Positive);
        c.push(((s + 1.0) / sub.rho).min(0.0), Branch::Negative);
        c.push(0.0, Branch::Boundary);
    }
    select(&Nonlinearity::Modulus, Loss::Kl, sub, &c)
}

/// Modulus + l1: soft-thresholded fits against `x` on `t > 0` and against
/// `-x` on `t <= 0`.
pub fn prox_modulus_l1(sub: &ScalarSubproblem) -> ProxResult {
    let s = sub.s();
    let rho = sub.rho;
    let t_pos = ((s + 1.0) / rho).min(sub.x).max((s - 1.0) / rho);
    let t_neg = ((s + 1.0) / rho).min(-sub.x).max((s - 1.0) / rho);
    let mut c = Candidates::new();
    c.push(t_pos.max(0.0), Branch::Positive);
    c.push(t_neg.min(0.0), Branch::Negative);
    c.push(0.0, Branch::Boundary);
    select(&Nonlinearity::Modulus, Loss::L1, sub, &c)
}

// ---------------------------------------------------------------------------
// Dispatch and matrix-level update
// ---------------------------------------------------------------------------

/// Solves one subproblem for the given model.
pub fn solve_scalar(spec: &ModelSpec, sub: &ScalarSubproblem) -> Result<ProxResult> {
    match (spec.nonlinearity, spec.loss) {
        (Nonlinearity::Relu, Loss::Frobenius) => Ok(prox_relu_frobenius(sub)),
        (Nonlinearity::Relu, Loss::Kl) => Ok(prox_relu_kl(sub)),
        (Nonlinearity::Relu, Loss::L1) => Ok(prox_relu_l1(sub)),
        (Nonlinearity::Csf, Loss::Frobenius) => Ok(prox_csf_frobenius(sub)),
        (Nonlinearity::Csf, Loss::Kl) => Ok(prox_csf_kl(sub)),
        (Nonlinearity::Csf, Loss::L1) => Ok(prox_csf_l1(sub)),
        (Nonlinearity::MinMax { .. }, Loss::Frobenius) => prox_minmax_frobenius(sub),
        (Nonlinearity::MinMax { .. }, Loss::Kl) => prox_minmax_kl(sub),
        (Nonlinearity::MinMax { .. }, Loss::L1) => prox_minmax_l1(sub),
        (Nonlinearity::Modulus, Loss::Frobenius) => Ok(prox_modulus_frobenius(sub)),
        (Nonlinearity::Modulus, Loss::Kl) => Ok(prox_modulus_kl(sub)),
        (Nonlinearity::Modulus, Loss::L1) => Ok(prox_modulus_l1(sub)),
    }
}

/// Closed-form update for an entry with no data attached: the minimizer of
/// `lambda t + (rho/2)(t - a)^2`.
#[inline]
pub fn missing_entry_update(a: f64, lambda: f64, rho: f64) -> f64 {
    a - lambda / rho
}

/// Full T-update: observed entries go through the model's scalar solver,
/// missing entries through [`missing_entry_update`]. Entry `(i, j)` depends
/// only on `(X_ij, A_ij, Lambda_ij, rho)`, so the result is independent of
/// evaluation order.
pub fn update_t(
    spec: &ModelSpec,
    x: &DenseMatrix,
    a: &DenseMatrix,
    lambda: &DenseMatrix,
    rho: f64,
    mask: Option<&ObservationMask>,
) -> Result<DenseMatrix> {
    if x.shape() != a.shape() || x.shape() != lambda.shape() {
        return Err(Error::shape(format!(
            "update_t: X {:?}, A {:?}, Lambda {:?}",
            x.shape(),
            a.shape(),
            lambda.shape()
        )));
    }
    if let Some(m) = mask {
        if m.shape() != x.shape() {
            return Err(Error::shape("update_t: mask shape mismatch"));
        }
    }
    if !(rho > 0.0) {
        return Err(Error::config(format!("rho must be positive, got {rho}")));
    }
    let bounds = spec.nonlinearity.bounds();
    let mut t = DenseMatrix::zeros(x.rows(), x.cols());
    let (xs, as_, ls) = (x.as_slice(), a.as_slice(), lambda.as_slice());
    let out = t.as_mut_slice();
    for idx in 0..xs.len() {
        let observed = mask.map_or(true, |m| m.is_observed_linear(idx));
        out[idx] = if observed {
            let sub = ScalarSubproblem {
                x: xs[idx],
                a: as_[idx],
                lambda: ls[idx],
                rho,
                bounds,
            };
            solve_scalar(spec, &sub)?.t
        } else {
            missing_entry_update(as_[idx], ls[idx], rho)
        };
    }
    Ok(t)
}
