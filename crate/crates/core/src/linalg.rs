//! Numerical kernels for the alternating updates: ridge-regularized
//! least-squares solves and a seeded randomized truncated SVD.
//!
//! The factor updates only ever solve small r-by-r symmetric positive
//! definite systems, so everything here is written directly against
//! [`DenseMatrix`] with no external linear-algebra backend.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

/// Rank-r factors `X ~ U * diag(S) * V^T` with orthonormal `U`, `V` columns
/// and nonincreasing nonnegative `S`.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

impl SvdFactors {
    /// Reconstructs `U * diag(S) * V^T`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let m = self.u.rows();
        let n = self.v.rows();
        let r = self.s.len();
        DenseMatrix::from_fn(m, n, |i, j| {
            (0..r)
                .map(|k| self.u.get(i, k) * self.s[k] * self.v.get(j, k))
                .sum()
        })
    }
}

/// `H * H^T` for `H` of shape r-by-n.
fn gram_rows(h: &DenseMatrix) -> DenseMatrix {
    let r = h.rows();
    let mut g = DenseMatrix::zeros(r, r);
    for i in 0..r {
        for j in i..r {
            let dot: f64 = h.row(i).iter().zip(h.row(j)).map(|(a, b)| a * b).sum();
            g.set(i, j, dot);
            g.set(j, i, dot);
        }
    }
    g
}

/// `W^T * W` for `W` of shape m-by-r.
fn gram_cols(w: &DenseMatrix) -> DenseMatrix {
    let r = w.cols();
    let mut g = DenseMatrix::zeros(r, r);
    for k in 0..w.rows() {
        let row = w.row(k);
        for i in 0..r {
            let wi = row[i];
            if wi == 0.0 {
                continue;
            }
            for j in i..r {
                let v = g.get(i, j) + wi * row[j];
                g.set(i, j, v);
            }
        }
    }
    for i in 0..r {
        for j in 0..i {
            g.set(i, j, g.get(j, i));
        }
    }
    g
}

/// Cholesky factorization `G = L L^T`; `None` if a pivot is not positive.
fn cholesky(g: &DenseMatrix) -> Option<DenseMatrix> {
    let n = g.rows();
    let mut l = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = g.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l.set(i, i, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Some(l)
}

/// Solves `G Y = B` for SPD `G` (r-by-r) and `B` (r-by-k).
///
/// On Cholesky failure the diagonal is lifted by `1e-12 * trace(G)/r` and the
/// factorization retried once before reporting a singular system.
fn solve_spd(g: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    let r = g.rows();
    if g.cols() != r || b.rows() != r {
        return Err(Error::shape("solve_spd: inconsistent shapes"));
    }
    let l = match cholesky(g) {
        Some(l) => l,
        None => {
            let trace: f64 = (0..r).map(|i| g.get(i, i)).sum();
            let lift = 1e-12 * trace / r as f64;
            let lifted =
                DenseMatrix::from_fn(r, r, |i, j| g.get(i, j) + if i == j { lift } else { 0.0 });
            cholesky(&lifted)
                .ok_or_else(|| Error::Singular("Cholesky failed even after diagonal lift".into()))?
        }
    };
    let k = b.cols();
    let mut y = DenseMatrix::zeros(r, k);
    let mut col = vec![0.0; r];
    for c in 0..k {
        // forward: L z = b
        for i in 0..r {
            let mut s = b.get(i, c);
            for j in 0..i {
                s -= l.get(i, j) * col[j];
            }
            col[i] = s / l.get(i, i);
        }
        // backward: L^T y = z
        for i in (0..r).rev() {
            let mut s = col[i];
            for j in i + 1..r {
                s -= l.get(j, i) * col[j];
            }
            col[i] = s / l.get(i, i);
        }
        for i in 0..r {
            y.set(i, c, col[i]);
        }
    }
    Ok(y)
}

/// Ridge-regularized right solve: `W = M H^T (H H^T + eps I)^{-1}`.
///
/// Minimizes `||M - W H||_F^2 + eps ||W||_F^2` over `W`.
pub fn ridge_solve_right(m: &DenseMatrix, h: &DenseMatrix, eps: f64) -> Result<DenseMatrix> {
    if m.cols() != h.cols() {
        return Err(Error::shape(format!(
            "ridge_solve_right: M is {}x{}, H is {}x{}",
            m.rows(),
            m.cols(),
            h.rows(),
            h.cols()
        )));
    }
    if eps < 0.0 {
        return Err(Error::config("ridge eps must be nonnegative"));
    }
    let r = h.rows();
    let mut g = gram_rows(h);
    for i in 0..r {
        g.set(i, i, g.get(i, i) + eps);
    }
    // B^T = H M^T, assembled directly as r-by-m.
    let mut bt = DenseMatrix::zeros(r, m.rows());
    for i in 0..r {
        for k in 0..m.rows() {
            let dot: f64 = h.row(i).iter().zip(m.row(k)).map(|(a, b)| a * b).sum();
            bt.set(i, k, dot);
        }
    }
    Ok(solve_spd(&g, &bt)?.transpose())
}

/// Ridge-regularized left solve: `H = (W^T W + eps I)^{-1} W^T M`.
pub fn ridge_solve_left(w: &DenseMatrix, m: &DenseMatrix, eps: f64) -> Result<DenseMatrix> {
    if w.rows() != m.rows() {
        return Err(Error::shape(format!(
            "ridge_solve_left: W is {}x{}, M is {}x{}",
            w.rows(),
            w.cols(),
            m.rows(),
            m.cols()
        )));
    }
    if eps < 0.0 {
        return Err(Error::config("ridge eps must be nonnegative"));
    }
    let r = w.cols();
    let mut g = gram_cols(w);
    for i in 0..r {
        g.set(i, i, g.get(i, i) + eps);
    }
    // B = W^T M (r-by-n), accumulated row by row of W/M.
    let mut b = DenseMatrix::zeros(r, m.cols());
    for k in 0..w.rows() {
        let wrow = w.row(k);
        let mrow = m.row(k);
        for i in 0..r {
            let wi = wrow[i];
            if wi == 0.0 {
                continue;
            }
            let brow = &mut b.as_mut_slice()[i * m.cols()..(i + 1) * m.cols()];
            for (o, &mv) in brow.iter_mut().zip(mrow) {
                *o += wi * mv;
            }
        }
    }
    solve_spd(&g, &b)
}

/// Thin QR orthonormalization of the columns of `a` (modified Gram-Schmidt
/// with one reorthogonalization pass).
///
/// A column whose norm collapses below `1e-10` of its original norm is
/// numerically inside the span of its predecessors; it is replaced by the
/// first canonical basis vector with a healthy orthogonal residual, so the
/// result always has orthonormal columns and stays deterministic.
fn orthonormalize(a: &DenseMatrix) -> DenseMatrix {
    let (m, k) = a.shape();
    debug_assert!(k <= m, "orthonormalize expects a tall matrix");
    let mut q = a.clone();
    let col_dot = |q: &DenseMatrix, i: usize, j: usize| -> f64 {
        (0..m).map(|row| q.get(row, i) * q.get(row, j)).sum()
    };
    let project_out = |q: &mut DenseMatrix, j: usize| {
        for _pass in 0..2 {
            for i in 0..j {
                let proj = (0..m).map(|row| q.get(row, i) * q.get(row, j)).sum::<f64>();
                for row in 0..m {
                    q.set(row, j, q.get(row, j) - proj * q.get(row, i));
                }
            }
        }
    };
    for j in 0..k {
        let norm_before = col_dot(&q, j, j).sqrt();
        project_out(&mut q, j);
        let mut norm = col_dot(&q, j, j).sqrt();
        if norm <= 1e-10 * norm_before || norm == 0.0 {
            // Replace with a basis vector outside the current span.
            let mut found = false;
            for basis in 0..m {
                for row in 0..m {
                    q.set(row, j, if row == basis { 1.0 } else { 0.0 });
                }
                project_out(&mut q, j);
                norm = col_dot(&q, j, j).sqrt();
                if norm > 0.1 {
                    found = true;
                    break;
                }
            }
            debug_assert!(found, "no basis vector escapes the span of {j} columns");
        }
        for row in 0..m {
            q.set(row, j, q.get(row, j) / norm);
        }
    }
    q
}

/// One-sided Jacobi orthogonalization of the columns of `c` (n-by-k).
/// Returns the accumulated right rotation `J` (k-by-k) with `c_in * J = c_out`.
fn one_sided_jacobi(c: &mut DenseMatrix, max_sweeps: usize) -> DenseMatrix {
    let (n, k) = c.shape();
    let mut j_acc = DenseMatrix::identity(k);
    for _sweep in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..k {
            for q in p + 1..k {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for row in 0..n {
                    let cp = c.get(row, p);
                    let cq = c.get(row, q);
                    alpha += cp * cp;
                    beta += cq * cq;
                    gamma += cp * cq;
                }
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for row in 0..n {
                    let cp = c.get(row, p);
                    let cq = c.get(row, q);
                    c.set(row, p, cs * cp - sn * cq);
                    c.set(row, q, sn * cp + cs * cq);
                }
                for row in 0..k {
                    let jp = j_acc.get(row, p);
                    let jq = j_acc.get(row, q);
                    j_acc.set(row, p, cs * jp - sn * jq);
                    j_acc.set(row, q, sn * jp + cs * jq);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    j_acc
}

/// Rank-r truncated SVD by randomized subspace iteration (oversampling 10,
/// two power iterations, seeded Gaussian test matrix). Deterministic for a
/// fixed `(x, r, seed)`.
pub fn truncated_svd(x: &DenseMatrix, r: usize, seed: u64) -> Result<SvdFactors> {
    let (m, n) = x.shape();
    let min_dim = m.min(n);
    if r == 0 || r > min_dim {
        return Err(Error::shape(format!(
            "truncated_svd: rank {} out of range for {}x{}",
            r, m, n
        )));
    }
    let k = (r + 10).min(min_dim);

    let mut rng = StdRng::seed_from_u64(seed);
    let omega = DenseMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng));

    let mut q = orthonormalize(&x.matmul(&omega)?);
    let xt = x.transpose();
    for _ in 0..2 {
        let z = orthonormalize(&xt.matmul(&q)?);
        q = orthonormalize(&x.matmul(&z)?);
    }

    // B = Q^T X, SVD'd through one-sided Jacobi on C = B^T.
    let b = q.transpose().matmul(x)?;
    let mut c = b.transpose();
    let j_acc = one_sided_jacobi(&mut c, 60);

    let mut order: Vec<usize> = (0..k).collect();
    let norms: Vec<f64> = (0..k)
        .map(|col| {
            (0..n)
                .map(|row| c.get(row, col).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap());

    let mut u = DenseMatrix::zeros(m, r);
    let mut v = DenseMatrix::zeros(n, r);
    let mut s = Vec::with_capacity(r);
    for (out_col, &src) in order.iter().take(r).enumerate() {
        let sigma = norms[src];
        s.push(sigma);
        if sigma > 1e-150 {
            for row in 0..n {
                v.set(row, out_col, c.get(row, src) / sigma);
            }
        } else {
            v.set(out_col % n, out_col, 1.0);
        }
        // U = Q * J, column `src`.
        for row in 0..m {
            let val: f64 = (0..k).map(|kk| q.get(row, kk) * j_acc.get(kk, src)).sum();
            u.set(row, out_col, val);
        }
    }
    Ok(SvdFactors { u, s, v })
}
