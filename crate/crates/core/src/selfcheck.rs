//! Randomized property checks shared by the CLI self-test and the
//! acceptance suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bisample::{classify_pair, erm_revenue_enclosure, PairClass};
use crate::curve::{concave_hull_curve, renormalize, RevenueCurve};
use crate::gauge::{lower_gauge, Gauge, Weighting};
use crate::model::build_lower_model;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Hull of up to eight random points plus random endpoint values, scaled
/// to peak value 1.
pub fn random_hull_curve(rng: &mut impl Rng) -> RevenueCurve {
    loop {
        let m = rng.random_range(0..=6);
        let mut pts = vec![(0.0, rng.random::<f64>() * 0.3), (1.0, rng.random::<f64>() * 0.3)];
        for _ in 0..m {
            pts.push((rng.random::<f64>(), rng.random::<f64>()));
        }
        if rng.random_bool(0.3) {
            pts[0].1 = 0.0;
            pts[1].1 = 0.0;
        }
        if let Ok(hull) = concave_hull_curve(&pts) {
            if let Ok((curve, _)) = renormalize(&hull.curve) {
                return curve;
            }
        }
    }
}

/// Random hull curve with peak value 1 attained inside `[a, b]`.
pub fn random_curve_peaking_in(rng: &mut impl Rng, a: f64, b: f64) -> RevenueCurve {
    let peak = a + (b - a) * rng.random::<f64>();
    let left: Vec<(f64, f64)> = (0..rng.random_range(0..3))
        .map(|_| {
            let q = peak * rng.random::<f64>();
            (q, (q / peak.max(1e-12)) + (1.0 - q / peak.max(1e-12)) * rng.random::<f64>())
        })
        .collect();
    let right: Vec<(f64, f64)> = (0..rng.random_range(0..3))
        .map(|_| {
            let q = peak + (1.0 - peak) * rng.random::<f64>();
            let t = (1.0 - q) / (1.0 - peak).max(1e-12);
            (q, t + (1.0 - t) * rng.random::<f64>())
        })
        .collect();
    let mut pts = vec![(0.0, 0.0), (peak, 1.0), (1.0, rng.random::<f64>() * 0.5)];
    if peak > 0.0 {
        pts[0].1 = rng.random::<f64>() * 0.5;
    }
    pts.extend(left.into_iter().map(|(q, v)| (q, v.min(1.0))));
    pts.extend(right.into_iter().map(|(q, v)| (q, v.min(1.0))));
    let hull = concave_hull_curve(&pts).expect("valid points");
    // points lie below 1, so the peak value is exactly 1
    hull.curve
}

/// Random triples `y < y' < x < x'` checked against both monotonicity
/// clauses of the classification; returns the number of violations.
pub fn w_monotonicity_violations(curve: &RevenueCurve, triples: usize, rng: &mut impl Rng) -> usize {
    let mut bad = 0;
    for _ in 0..triples {
        let mut v = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
        v.sort_by(f64::total_cmp);
        let [y, mid, x] = v;
        // clause one: raising the larger quantile keeps HigherSample
        if classify_pair(curve, mid, y) == PairClass::HigherSample
            && classify_pair(curve, x, y) == PairClass::LowerSample
        {
            bad += 1;
        }
        // clause two: raising the smaller quantile keeps LowerSample
        if classify_pair(curve, x, y) == PairClass::LowerSample
            && classify_pair(curve, x, mid) == PairClass::HigherSample
        {
            bad += 1;
        }
    }
    bad
}

pub fn random_gauge(rng: &mut impl Rng) -> Gauge {
    loop {
        let n = rng.random_range(2..=7);
        let big_n = rng.random_range(1..=12);
        let k = rng.random_range(1..=big_n);
        let weighting =
            [Weighting::Uniform, Weighting::ApproxUniform, Weighting::SquareWeighted][rng.random_range(0..3)];
        if let Ok(g) = lower_gauge(n, big_n, k, weighting) {
            return g;
        }
    }
}

/// Objective of the lower model at the curve-derived assignment, and the
/// upper end of the curve's revenue enclosure.
pub fn lower_soundness_gap(gauge: &Gauge, curve: &RevenueCurve, tol: f64) -> (f64, f64) {
    let model = build_lower_model(gauge).expect("valid gauge");
    let values = model.curve_assignment(curve);
    (model.objective_value(&values), erm_revenue_enclosure(curve, tol).upper)
}

/// Random lower gauge whose optimal interval contains `q`.
pub fn random_gauge_containing(rng: &mut impl Rng, q: f64) -> Gauge {
    loop {
        let n = rng.random_range(2..=7);
        let big_n = rng.random_range(1..=12);
        let weighting =
            [Weighting::Uniform, Weighting::ApproxUniform, Weighting::SquareWeighted][rng.random_range(0..3)];
        let fits: Vec<Gauge> = (1..=big_n)
            .filter_map(|k| lower_gauge(n, big_n, k, weighting).ok())
            .filter(|g| {
                let (a, b) = g.opt_interval();
                a <= q && q <= b
            })
            .collect();
        if !fits.is_empty() {
            let i = rng.random_range(0..fits.len());
            return fits.into_iter().nth(i).expect("in range");
        }
    }
}
