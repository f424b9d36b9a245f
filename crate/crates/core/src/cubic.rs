//! Real roots of the depressed cubic `t^3 + p t + q = 0`.
//!
//! The discriminant decides the branch: one real root goes through Cardano
//! radicals, three real roots through the trigonometric form. Each root gets
//! a Newton polish step, which matters near repeated roots.

/// All real roots of `t^3 + p t + q = 0`, deduplicated. Always 1, 2, or 3
/// values.
pub fn solve_depressed_cubic(p: f64, q: f64) -> Vec<f64> {
    let mut buf = [0.0; 3];
    let n = depressed_cubic_roots(p, q, &mut buf);
    buf[..n].to_vec()
}

/// Allocation-free variant for the entrywise update loop. Fills `out` and
/// returns the number of distinct real roots.
pub(crate) fn depressed_cubic_roots(p: f64, q: f64, out: &mut [f64; 3]) -> usize {
    let mut n = raw_roots(p, q, out);
    for r in out[..n].iter_mut() {
        *r = newton_polish(*r, p, q);
    }
    out[..n].sort_by(|a, b| a.partial_cmp(b).unwrap());
    // A double root found by both branches collapses to one entry.
    let mut w = 1;
    for i in 1..n {
        let prev = out[w - 1];
        let cur = out[i];
        if (cur - prev).abs() > 1e-9 * (1.0 + prev.abs().max(cur.abs())) {
            out[w] = cur;
            w += 1;
        }
    }
    n = w.min(n);
    n
}

fn raw_roots(p: f64, q: f64, out: &mut [f64; 3]) -> usize {
    if p == 0.0 && q == 0.0 {
        out[0] = 0.0;
        return 1;
    }
    // discriminant of the depressed cubic: (q/2)^2 + (p/3)^3
    let half_q = q / 2.0;
    let third_p = p / 3.0;
    let disc = half_q * half_q + third_p * third_p * third_p;

    if disc > 0.0 {
        // One real root. Take the larger-magnitude radicand first to avoid
        // cancellation, recover the partner from A*B = -p/3.
        let sq = disc.sqrt();
        let a3 = -half_q + if half_q <= 0.0 { sq } else { -sq };
        let a = a3.cbrt();
        let b = if a != 0.0 { -third_p / a } else { 0.0 };
        out[0] = a + b;
        1
    } else if disc == 0.0 {
        // Repeated roots: single 3q/p, double -3q/(2p) (p != 0 here).
        out[0] = 3.0 * q / p;
        out[1] = -1.5 * q / p;
        2
    } else {
        // Three distinct real roots (p < 0 in this branch).
        let m = 2.0 * (-third_p).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        let two_thirds_pi = 2.0 * std::f64::consts::FRAC_PI_3;
        out[0] = m * theta.cos();
        out[1] = m * (theta - two_thirds_pi).cos();
        out[2] = m * (theta + two_thirds_pi).cos();
        3
    }
}

fn newton_polish(t: f64, p: f64, q: f64) -> f64 {
    let f = t * t * t + p * t + q;
    let df = 3.0 * t * t + p;
    if df.abs() > 1e-300 {
        let step = f / df;
        if step.is_finite() {
            let polished = t - step;
            // keep the polish only if it actually reduced the residual
            let f2 = polished * polished * polished + p * polished + q;
            if f2.abs() <= f.abs() {
                return polished;
            }
        }
    }
    t
}
