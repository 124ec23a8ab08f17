//! Enclosures against values frozen from `oracles/erm_oracle.py`.

use erm_bounds::bisample::{erm_revenue_enclosure, erm_revenue_mc, ratio};
use erm_bounds::curve::{validate_curve, RevenueCurve};

fn curve(knots: &[f64], values: &[f64]) -> RevenueCurve {
    validate_curve(knots.to_vec(), values.to_vec()).unwrap()
}

fn cases() -> Vec<(&'static str, RevenueCurve, f64)> {
    vec![
        ("identity", curve(&[0.0, 1.0], &[0.0, 1.0]), 0.6510995000526771),
        ("tent_half", curve(&[0.0, 0.5, 1.0], &[0.0, 1.0, 0.0]), 0.6265919610649662),
        ("tent_55", curve(&[0.0, 0.55, 1.0], &[0.0, 1.0, 0.0]), 0.623365621073792),
        ("four_knot", curve(&[0.0, 0.55, 0.975, 1.0], &[0.0, 1.0, 0.136, 0.0006]), 0.610467940943011),
        ("plateau", curve(&[0.0, 0.2, 0.7, 1.0], &[0.1, 0.8, 0.8, 0.3]), 0.6643330673803228),
        ("affine_down", curve(&[0.0, 1.0], &[1.0, 0.0]), 2.0 / 3.0),
    ]
}

// quadrature error of the oracle
const ORACLE_SLACK: f64 = 1e-12;

#[test]
fn enclosures_contain_oracle_values() {
    for (name, c, value) in cases() {
        for tol in [1e-4, 1e-6, 1e-8] {
            let e = erm_revenue_enclosure(&c, tol);
            assert!(e.converged && e.width() <= tol, "{name} tol {tol}: {e:?}");
            assert!(
                e.lower - ORACLE_SLACK <= value && value <= e.upper + ORACLE_SLACK,
                "{name} tol {tol}: {e:?} misses {value}"
            );
        }
    }
}

#[test]
fn constant_curve_ratio_is_one() {
    let r = ratio(&curve(&[0.0, 1.0], &[1.0, 1.0]), 1e-6).unwrap();
    assert!(r.contains(1.0) && r.width() <= 1e-6);
}

#[test]
fn monte_carlo_agrees() {
    for (name, c, value) in cases() {
        let est = erm_revenue_mc(&c, 400_000, 7).unwrap();
        assert!((est.estimate - value).abs() <= 5.0 * est.stderr, "{name}: {est:?} vs {value}");
    }
}
