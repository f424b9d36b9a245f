//! Property-based checks of the scalar solvers and the model layer.

use nmd_core::model::{kl_scalar, Loss, ModelSpec, Nonlinearity};
use nmd_core::oracle::{scalar_oracle, OracleSpec};
use nmd_core::prox::{solve_scalar, ScalarSubproblem};
use proptest::prelude::*;

fn loss_strategy() -> impl Strategy<Value = Loss> {
    prop_oneof![Just(Loss::Frobenius), Just(Loss::Kl), Just(Loss::L1)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// The closed form never loses to the brute-force oracle by more than
    /// the acceptance threshold, on any valid subproblem.
    #[test]
    fn closed_form_matches_oracle(
        loss in loss_strategy(),
        x_raw in 0.0f64..5.0,
        x_is_edge in proptest::bool::ANY,
        a in -5.0f64..5.0,
        lambda in -5.0f64..5.0,
        rho_idx in 0usize..3,
        nl_idx in 0usize..4,
    ) {
        let nl = match nl_idx {
            0 => Nonlinearity::Relu,
            1 => Nonlinearity::Csf,
            2 => Nonlinearity::min_max(if loss == Loss::Kl { 0.5 } else { 0.0 }, 1.0).unwrap(),
            _ => Nonlinearity::Modulus,
        };
        let spec = ModelSpec::new(nl, loss).unwrap();
        let x = match nl.bounds() {
            Some((p, q)) => if x_is_edge { p } else { p + (x_raw / 5.0) * (q - p) },
            None => if x_is_edge { 0.0 } else { x_raw },
        };
        let sub = ScalarSubproblem {
            x,
            a,
            lambda,
            rho: [0.1, 1.0, 10.0][rho_idx],
            bounds: nl.bounds(),
        };
        let closed = solve_scalar(&spec, &sub).unwrap();
        let oracle = scalar_oracle(&spec, &sub, &OracleSpec::for_subproblem(&sub)).unwrap();
        prop_assert!(
            closed.objective <= oracle.objective + 1e-6,
            "{}: closed {} vs oracle {} at x={x}, a={a}, lambda={lambda}, rho={}",
            spec.name(), closed.objective, oracle.objective, sub.rho
        );
        prop_assert!(closed.t.is_finite() && closed.objective.is_finite());
    }

    /// ReLU, MinMax, and Modulus are idempotent; CSF is not (except at
    /// fixed points of t^2).
    #[test]
    fn nonlinearity_idempotence(t in -10.0f64..10.0) {
        for nl in [
            Nonlinearity::Relu,
            Nonlinearity::min_max(0.0, 1.0).unwrap(),
            Nonlinearity::Modulus,
        ] {
            let once = nl.apply_scalar(t);
            prop_assert_eq!(nl.apply_scalar(once), once);
        }
        let csf = Nonlinearity::Csf;
        let once = csf.apply_scalar(t);
        if (t - 1.0).abs() > 1e-3 && t.abs() > 1e-3 {
            prop_assert_ne!(csf.apply_scalar(once), once);
        }
    }

    /// Predictions respect the model ranges: MinMax stays in its interval,
    /// the other three are nonnegative.
    #[test]
    fn prediction_ranges(t in -50.0f64..50.0) {
        let mm = Nonlinearity::min_max(0.25, 1.5).unwrap();
        let y = mm.apply_scalar(t);
        prop_assert!((0.25..=1.5).contains(&y));
        for nl in [Nonlinearity::Relu, Nonlinearity::Csf, Nonlinearity::Modulus] {
            prop_assert!(nl.apply_scalar(t) >= 0.0);
        }
    }

    /// Scalar KL divergence is nonnegative and vanishes only on the
    /// diagonal.
    #[test]
    fn kl_scalar_nonnegative(x in 1e-6f64..10.0, y in 1e-6f64..10.0) {
        let v = kl_scalar(x, y).unwrap();
        prop_assert!(v >= 0.0);
        if (x - y).abs() > 1e-6 * (x + y) {
            prop_assert!(v > 0.0);
        }
    }
}
