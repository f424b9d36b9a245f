//! Brute-force verification of the closed-form scalar solvers.
//!
//! The oracle minimizes the exact subproblem objective on a dense uniform
//! grid and then refines the best bracket by golden-section search. It never
//! consults the closed-form case analysis, so agreement between the two is
//! meaningful evidence. Batch checking over seeded random subproblems is the
//! primary correctness gate for the entrywise solvers.

use crate::error::{Error, Result};
use crate::model::{Loss, ModelSpec, Nonlinearity};
use crate::prox::{solve_scalar, subproblem_objective, Branch, ProxResult, ScalarSubproblem};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Search window and resolution for the brute-force oracle.
#[derive(Debug, Clone, Copy)]
pub struct OracleSpec {
    pub lo: f64,
    pub hi: f64,
    pub grid_points: usize,
    pub refine_tol: f64,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            lo: -20.0,
            hi: 20.0,
            grid_points: 200_000,
            refine_tol: 1e-12,
        }
    }
}

impl OracleSpec {
    /// Default window, widened when the subproblem's natural scale exceeds
    /// it. Coercivity keeps the minimizer within `|a| + |lambda|/rho +
    /// sqrt(max(x, 1)) + 5` of the origin.
    pub fn for_subproblem(sub: &ScalarSubproblem) -> Self {
        let mut spec = Self::default();
        let mut radius = sub.a.abs() + sub.lambda.abs() / sub.rho + sub.x.max(1.0).sqrt() + 5.0;
        if let Some((p, q)) = sub.bounds {
            radius = radius.max(p.abs() + 1.0).max(q.abs() + 1.0);
        }
        if radius > 20.0 {
            spec.lo = -radius;
            spec.hi = radius;
        }
        spec
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi) {
            return Err(Error::config("oracle window requires lo < hi"));
        }
        if self.grid_points < 1000 {
            return Err(Error::config("oracle grid needs at least 1000 points"));
        }
        Ok(())
    }
}

/// Position-based diagnostic label, computed without the closed-form case
/// analysis.
fn position_label(nl: &Nonlinearity, t: f64) -> Branch {
    let eps = 1e-9 * (1.0 + t.abs());
    match *nl {
        Nonlinearity::Relu | Nonlinearity::Modulus => {
            if t > eps {
                Branch::Positive
            } else if t < -eps {
                Branch::Negative
            } else {
                Branch::Boundary
            }
        }
        Nonlinearity::Csf => Branch::Stationary,
        Nonlinearity::MinMax { lower, upper } => {
            if (t - lower).abs() <= eps || (t - upper).abs() <= eps {
                Branch::Boundary
            } else if t < lower {
                Branch::BelowLower
            } else if t > upper {
                Branch::AboveUpper
            } else {
                Branch::Within
            }
        }
    }
}

/// Grid search plus golden-section refinement for one subproblem.
pub fn scalar_oracle(
    spec: &ModelSpec,
    sub: &ScalarSubproblem,
    oracle: &OracleSpec,
) -> Result<ProxResult> {
    oracle.validate()?;
    let nl = &spec.nonlinearity;
    let loss = spec.loss;
    let f = |t: f64| subproblem_objective(nl, loss, sub, t);

    let n = oracle.grid_points;
    let step = (oracle.hi - oracle.lo) / (n - 1) as f64;
    let mut best_idx = 0usize;
    let mut best_val = f64::INFINITY;
    for i in 0..n {
        let t = oracle.lo + step * i as f64;
        let v = f(t);
        if v < best_val {
            best_val = v;
            best_idx = i;
        }
    }
    if best_val.is_infinite() {
        return Err(Error::domain(
            "oracle objective is infinite on the whole grid".to_string(),
        ));
    }

    let lo = oracle.lo + step * best_idx.saturating_sub(1) as f64;
    let hi = oracle.lo + step * (best_idx + 1).min(n - 1) as f64;
    let (mut t_best, mut v_best) = (oracle.lo + step * best_idx as f64, best_val);

    // Golden-section on the bracket around the best grid point.
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > oracle.refine_tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        let (t_cur, v_cur) = if fc <= fd { (c, fc) } else { (d, fd) };
        if v_cur < v_best {
            t_best = t_cur;
            v_best = v_cur;
        }
    }

    Ok(ProxResult {
        t: t_best,
        objective: v_best,
        branch: position_label(nl, t_best),
    })
}

/// One random subproblem together with both solutions and their objective
/// gap.
#[derive(Debug, Clone, Copy)]
pub struct BatchInstance {
    pub x: f64,
    pub a: f64,
    pub lambda: f64,
    pub rho: f64,
    pub bounds: Option<(f64, f64)>,
    pub closed_t: f64,
    pub closed_objective: f64,
    pub oracle_t: f64,
    pub oracle_objective: f64,
    /// `closed_objective - oracle_objective`; positive means the closed form
    /// missed the global minimum.
    pub gap: f64,
}

/// Result of a seeded batch comparison for one model.
#[derive(Debug, Clone)]
pub struct BatchReport {
    pub model: String,
    pub n: usize,
    pub seed: u64,
    pub max_gap: f64,
    pub mean_gap: f64,
    pub instances: Vec<BatchInstance>,
    /// Instances whose gap exceeds the acceptance threshold of `1e-6`.
    pub violations: Vec<BatchInstance>,
}

pub const GAP_THRESHOLD: f64 = 1e-6;

impl BatchReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "model={} n={} seed={} max_gap={:.3e} mean_gap={:.3e} violations={}\n",
            self.model,
            self.n,
            self.seed,
            self.max_gap,
            self.mean_gap,
            self.violations.len()
        );
        for v in &self.violations {
            out.push_str(&format!(
                "  VIOLATION x={} a={} lambda={} rho={} bounds={:?} closed=({}, {:.12e}) oracle=({}, {:.12e}) gap={:.3e}\n",
                v.x, v.a, v.lambda, v.rho, v.bounds, v.closed_t, v.closed_objective,
                v.oracle_t, v.oracle_objective, v.gap
            ));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "x,a,lambda,rho,lower,upper,closed_t,closed_objective,oracle_t,oracle_objective,gap\n",
        );
        for v in &self.instances {
            let (lower, upper) = match v.bounds {
                Some((p, q)) => (p.to_string(), q.to_string()),
                None => (String::new(), String::new()),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                v.x,
                v.a,
                v.lambda,
                v.rho,
                lower,
                upper,
                v.closed_t,
                v.closed_objective,
                v.oracle_t,
                v.oracle_objective,
                v.gap
            ));
        }
        out
    }
}

/// Draws `n` seeded subproblems from the model's valid domain, solves each
/// with the closed form and the oracle, and reports the objective gaps.
///
/// Draws: `a, lambda ~ U[-5, 5]`, `rho ∈ {0.1, 1, 10}`, `x` uniform on the
/// valid domain with a 20% atom at its lower edge (so the `x = 0` branches
/// are exercised). MinMax instances draw bounds from `{[0,1], [0.5,1]}`,
/// restricted to `[0.5, 1]` under KL where the lower bound must be positive.
pub fn check_prox_batch(spec: &ModelSpec, n: usize, seed: u64) -> Result<BatchReport> {
    if n == 0 {
        return Err(Error::config("batch size must be at least 1"));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut instances = Vec::with_capacity(n);
    let mut violations = Vec::new();
    let mut max_gap = f64::NEG_INFINITY;
    let mut sum_gap = 0.0;

    for _ in 0..n {
        let bounds = match spec.nonlinearity {
            Nonlinearity::MinMax { .. } => {
                let standard: [(f64, f64); 2] = [(0.0, 1.0), (0.5, 1.0)];
                let choice = if spec.loss == Loss::Kl {
                    (0.5, 1.0)
                } else {
                    standard[rng.random_range(0..2)]
                };
                Some(choice)
            }
            _ => None,
        };
        let x = match bounds {
            Some((p, q)) => {
                if rng.random::<f64>() < 0.2 {
                    p
                } else {
                    p + rng.random::<f64>() * (q - p)
                }
            }
            None => {
                if rng.random::<f64>() < 0.2 {
                    0.0
                } else {
                    rng.random::<f64>() * 5.0
                }
            }
        };
        let a = rng.random::<f64>() * 10.0 - 5.0;
        let lambda = rng.random::<f64>() * 10.0 - 5.0;
        let rho = [0.1, 1.0, 10.0][rng.random_range(0..3)];
        let sub = ScalarSubproblem {
            x,
            a,
            lambda,
            rho,
            bounds,
        };
        let inst_spec = match bounds {
            Some((p, q)) => ModelSpec::new(Nonlinearity::MinMax { lower: p, upper: q }, spec.loss)?,
            None => *spec,
        };

        let closed = solve_scalar(&inst_spec, &sub)?;
        let oracle = scalar_oracle(&inst_spec, &sub, &OracleSpec::for_subproblem(&sub))?;
        let gap = closed.objective - oracle.objective;
        let inst = BatchInstance {
            x,
            a,
            lambda,
            rho,
            bounds,
            closed_t: closed.t,
            closed_objective: closed.objective,
            oracle_t: oracle.t,
            oracle_objective: oracle.objective,
            gap,
        };
        max_gap = max_gap.max(gap);
        sum_gap += gap;
        if gap > GAP_THRESHOLD {
            violations.push(inst);
        }
        instances.push(inst);
    }

    Ok(BatchReport {
        model: spec.name(),
        n,
        seed,
        max_gap,
        mean_gap: sum_gap / n as f64,
        instances,
        violations,
    })
}
