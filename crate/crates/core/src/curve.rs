//! Piecewise-linear concave revenue curves on the quantile interval `[0, 1]`.
//!
//! A [`RevenueCurve`] is described by its knots and the values it attains there;
//! between knots it is the linear interpolant. Every curve that leaves this
//! module has passed [`validate_curve`], so downstream code may rely on the
//! knot ordering, non-negativity and discrete concavity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for every curve predicate (concavity cross products,
/// hull membership, non-negativity).
pub const CURVE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("bad knots: {0}")]
    BadKnots(String),
    #[error("negative value {value} at knot {index}")]
    NegativeValue { index: usize, value: f64 },
    #[error("concavity violated at knot {index}")]
    ConcavityViolation { index: usize },
    #[error("curve is identically zero")]
    ZeroCurve,
    #[error("non-finite number in curve input")]
    NonFinite,
}

/// A quantile in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Quantile(f64);

impl Quantile {
    pub fn new(value: f64) -> Option<Self> {
        (0.0..=1.0).contains(&value).then_some(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Quantile {
    type Error = String;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Self::new(value).ok_or_else(|| format!("quantile {value} outside [0, 1]"))
    }
}

impl From<Quantile> for f64 {
    fn from(q: Quantile) -> f64 {
        q.0
    }
}

/// Price at a quantile, `R(q) / (1 - q)`. Infinite only at `q = 1` when the
/// curve has a point mass at the top of the support.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PricePoint(f64);

impl PricePoint {
    pub fn price(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

/// Serialized form: `{"knots": [...], "values": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CurveFile {
    knots: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CurveFile")]
pub struct RevenueCurve {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<CurveFile> for RevenueCurve {
    type Error = CurveError;

    fn try_from(file: CurveFile) -> Result<Self, Self::Error> {
        validate_curve(file.knots, file.values)
    }
}

/// Checks knot ordering, non-negativity and discrete concavity and wraps the
/// data in a [`RevenueCurve`].
pub fn validate_curve(knots: Vec<f64>, values: Vec<f64>) -> Result<RevenueCurve, CurveError> {
    if knots.iter().chain(&values).any(|v| !v.is_finite()) {
        return Err(CurveError::NonFinite);
    }
    if knots.len() != values.len() {
        return Err(CurveError::BadKnots(format!("{} knots but {} values", knots.len(), values.len())));
    }
    if knots.len() < 2 {
        return Err(CurveError::BadKnots("need at least two knots".into()));
    }
    if knots[0] != 0.0 || knots[knots.len() - 1] != 1.0 {
        return Err(CurveError::BadKnots("knots must start at 0 and end at 1".into()));
    }
    if let Some(i) = knots.windows(2).position(|w| w[1] <= w[0]) {
        return Err(CurveError::BadKnots(format!("knots not strictly increasing at {}", i + 1)));
    }
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(CurveError::NegativeValue { index, value });
    }
    for i in 1..knots.len() - 1 {
        let lhs = values[i] * (knots[i + 1] - knots[i - 1]);
        let rhs = values[i + 1] * (knots[i] - knots[i - 1]) + values[i - 1] * (knots[i + 1] - knots[i]);
        if lhs < rhs - CURVE_TOL {
            return Err(CurveError::ConcavityViolation { index: i });
        }
    }
    Ok(RevenueCurve { knots, values })
}

impl RevenueCurve {
    /// The zero curve on `[0, 1]`.
    pub fn zero() -> Self {
        Self { knots: vec![0.0, 1.0], values: vec![0.0, 0.0] }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// First knot attaining the maximum value.
    pub fn argmax(&self) -> f64 {
        let max = self.max_value();
        let i = self.values.iter().position(|&v| v == max).unwrap_or(0);
        self.knots[i]
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Index `i` of the knot interval `[knots[i], knots[i+1]]` containing `q`.
    /// The right endpoint 1 belongs to the last interval.
    pub fn segment_index(&self, q: f64) -> usize {
        let last = self.knots.len() - 2;
        self.knots.partition_point(|&k| k <= q).saturating_sub(1).min(last)
    }

    /// Linear interpolation between the bracketing knots; exact at knots.
    pub fn interpolate(&self, q: f64) -> f64 {
        let i = self.segment_index(q);
        let (k0, k1) = (self.knots[i], self.knots[i + 1]);
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        if q == k0 {
            return v0;
        }
        if q == k1 {
            return v1;
        }
        v0 + (v1 - v0) * (q - k0) / (k1 - k0)
    }

    /// Intercept and slope of the affine piece on segment `i`.
    pub fn segment_affine(&self, i: usize) -> (f64, f64) {
        let (k0, k1) = (self.knots[i], self.knots[i + 1]);
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        let slope = (v1 - v0) / (k1 - k0);
        (v0 - slope * k0, slope)
    }

    /// Price inverse `R(q) / (1 - q)`; at `q = 1` the left limit along the
    /// final linear piece.
    pub fn price_inverse(&self, q: f64) -> PricePoint {
        if q < 1.0 {
            return PricePoint(self.interpolate(q) / (1.0 - q));
        }
        let m = self.knots.len() - 1;
        if self.values[m] > 0.0 {
            return PricePoint(f64::INFINITY);
        }
        // R(q) = v * (1 - q) / (1 - k) on the last piece, so the ratio is constant.
        PricePoint(self.values[m - 1] / (1.0 - self.knots[m - 1]))
    }

    /// Same knots, values multiplied by `c >= 0`.
    pub fn scaled(&self, c: f64) -> RevenueCurve {
        RevenueCurve { knots: self.knots.clone(), values: self.values.iter().map(|v| v * c).collect() }
    }
}

/// Result of an upper-hull construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Hull {
    pub curve: RevenueCurve,
    /// Set when the input carried no positive value (the zero curve is
    /// returned) or when conflicting values at one quantile were merged.
    pub degenerate: bool,
}

/// Upper concave hull of a point set in `[0,1] x [0, inf)`. The points must
/// include quantiles 0 and 1. Every knot of the result is an input point.
pub fn concave_hull_curve(points: &[(f64, f64)]) -> Result<Hull, CurveError> {
    if points.iter().any(|(q, v)| !q.is_finite() || !v.is_finite()) {
        return Err(CurveError::NonFinite);
    }
    if let Some(&(q, _)) = points.iter().find(|(q, _)| !(0.0..=1.0).contains(q)) {
        return Err(CurveError::BadKnots(format!("quantile {q} outside [0, 1]")));
    }
    if let Some((index, &(_, value))) = points.iter().enumerate().find(|(_, (_, v))| *v < 0.0) {
        return Err(CurveError::NegativeValue { index, value });
    }
    if !points.iter().any(|p| p.0 == 0.0) || !points.iter().any(|p| p.0 == 1.0) {
        return Err(CurveError::BadKnots("hull input must contain quantiles 0 and 1".into()));
    }

    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut merged_conflict = false;
    let mut dedup: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    for p in sorted {
        match dedup.last_mut() {
            Some(last) if last.0 == p.0 => {
                if last.1 != p.1 {
                    merged_conflict = true;
                }
                last.1 = p.1;
            }
            _ => dedup.push(p),
        }
    }

    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(dedup.len());
    for p in dedup {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // keep b only if it lies strictly above the chord a--p
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= -CURVE_TOL {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }

    let all_zero = hull.iter().all(|p| p.1 == 0.0);
    let (knots, values): (Vec<f64>, Vec<f64>) = hull.into_iter().unzip();
    let curve = if all_zero { RevenueCurve::zero() } else { validate_curve(knots, values)? };
    Ok(Hull { curve, degenerate: all_zero || merged_conflict })
}

/// `n`-interval piecewise approximation: uniform knots `k/n` with the sampled
/// values, linear in between.
pub fn piecewise_approximation(sampler: impl Fn(f64) -> f64, n: usize) -> Result<RevenueCurve, CurveError> {
    if n == 0 {
        return Err(CurveError::BadKnots("need at least one interval".into()));
    }
    let knots: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
    let values = knots.iter().map(|&q| sampler(q)).collect();
    validate_curve(knots, values)
}

/// The curve plus `eps * q * (1 - q)`: strictly concave, so its price
/// inverse is strictly increasing.
#[derive(Debug, Clone)]
pub struct Strictified {
    curve: RevenueCurve,
    eps: f64,
}

impl Strictified {
    pub fn at(&self, q: f64) -> f64 {
        self.curve.interpolate(q) + self.eps * q * (1.0 - q)
    }
}

pub fn strictify(curve: &RevenueCurve, eps: f64) -> Strictified {
    Strictified { curve: curve.clone(), eps }
}

/// Divides by the maximum value; returns the normalized curve and the scale.
pub fn renormalize(curve: &RevenueCurve) -> Result<(RevenueCurve, f64), CurveError> {
    let scale = curve.max_value();
    if scale <= 0.0 {
        return Err(CurveError::ZeroCurve);
    }
    if scale == 1.0 {
        return Ok((curve.clone(), 1.0));
    }
    Ok((curve.scaled(1.0 / scale), scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tent() -> RevenueCurve {
        validate_curve(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 0.0]).unwrap()
    }

    #[test]
    fn validate_examples() {
        assert!(validate_curve(vec![0.0, 1.0], vec![0.0, 0.0]).is_ok());
        assert!(validate_curve(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 0.0]).is_ok());
        assert_eq!(
            validate_curve(vec![0.0, 0.5, 1.0], vec![0.0, 0.2, 1.0]),
            Err(CurveError::ConcavityViolation { index: 1 })
        );
    }

    #[test]
    fn validate_rejects_bad_input() {
        assert!(matches!(validate_curve(vec![0.0, 0.5, 0.5, 1.0], vec![0.0; 4]), Err(CurveError::BadKnots(_))));
        assert!(matches!(
            validate_curve(vec![0.0, 1.0], vec![0.0, -1.0]),
            Err(CurveError::NegativeValue { index: 1, .. })
        ));
        assert!(matches!(validate_curve(vec![0.1, 1.0], vec![0.0, 0.0]), Err(CurveError::BadKnots(_))));
        assert!(matches!(validate_curve(vec![0.0, 1.0], vec![0.0]), Err(CurveError::BadKnots(_))));
        assert_eq!(validate_curve(vec![0.0, 1.0], vec![f64::NAN, 0.0]), Err(CurveError::NonFinite));
    }

    #[test]
    fn interpolate_examples() {
        assert_eq!(tent().interpolate(0.25), 0.5);
        let affine = validate_curve(vec![0.0, 0.5, 1.0], vec![1.0, 0.5, 0.0]).unwrap();
        assert_eq!(affine.interpolate(0.75), 0.25);
        assert_eq!(affine.interpolate(1.0), 0.0);
        assert_eq!(affine.interpolate(0.0), 1.0);
    }

    #[test]
    fn price_inverse_examples() {
        let affine = validate_curve(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(affine.price_inverse(0.3).price(), 1.0, epsilon = 1e-15);
        assert_eq!(affine.price_inverse(1.0).price(), 1.0);
        let constant = validate_curve(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(constant.price_inverse(0.5).price(), 2.0);
        assert!(constant.price_inverse(1.0).is_infinite());
    }

    #[test]
    fn hull_examples() {
        let h = concave_hull_curve(&[(0.0, 0.0), (0.5, 1.0), (1.0, 0.0)]).unwrap();
        assert_eq!(h.curve, tent());
        assert!(!h.degenerate);

        // chord value at .75 is .5, so (.75, .9) stays
        let h = concave_hull_curve(&[(0.0, 0.0), (0.5, 1.0), (0.75, 0.9), (1.0, 0.0)]).unwrap();
        assert_eq!(h.curve.knots(), &[0.0, 0.5, 0.75, 1.0]);
        let h = concave_hull_curve(&[(0.0, 0.0), (0.5, 1.0), (0.75, 0.5), (1.0, 0.0)]).unwrap();
        assert_eq!(h.curve.knots(), &[0.0, 0.5, 1.0]);

        let h = concave_hull_curve(&[(0.0, 0.0), (0.55, 1.0), (0.975, 0.136), (1.0, 0.0006)]).unwrap();
        assert_eq!(h.curve.knots(), &[0.0, 0.55, 0.975, 1.0]);
        assert_eq!(h.curve.values(), &[0.0, 1.0, 0.136, 0.0006]);
    }

    #[test]
    fn hull_degenerate_and_errors() {
        let h = concave_hull_curve(&[(0.0, 0.0), (0.3, 0.0), (1.0, 0.0)]).unwrap();
        assert!(h.degenerate);
        assert!(h.curve.is_zero());
        assert!(matches!(concave_hull_curve(&[(0.0, 1.0), (0.5, 1.0)]), Err(CurveError::BadKnots(_))));
    }

    #[test]
    fn piecewise_examples() {
        let c = piecewise_approximation(|q| q * (1.0 - q), 2).unwrap();
        assert_eq!(c.knots(), &[0.0, 0.5, 1.0]);
        assert_eq!(c.values(), &[0.0, 0.25, 0.0]);

        let c = piecewise_approximation(|q| 1.0 - q, 7).unwrap();
        for q in [0.0, 0.1, 0.33, 0.9, 1.0] {
            assert_abs_diff_eq!(c.interpolate(q), 1.0 - q, epsilon = 1e-15);
        }

        let f = |q: f64| (1.0 - q) * (1.0 + 0.01 * q);
        let c = piecewise_approximation(f, 4).unwrap();
        for (k, v) in c.values().iter().enumerate() {
            assert_eq!(*v, f(k as f64 / 4.0));
        }

        assert!(matches!(piecewise_approximation(|q| q * q, 4), Err(CurveError::ConcavityViolation { .. })));
    }

    #[test]
    fn strictify_examples() {
        let s = strictify(&RevenueCurve::zero(), 1.0);
        assert_eq!(s.at(0.3), 0.3 * 0.7);
        let affine = validate_curve(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(strictify(&affine, 0.1).at(0.5), 0.525, epsilon = 1e-15);
        assert_abs_diff_eq!(strictify(&affine, 1e-12).at(0.5), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn renormalize_examples() {
        let c = validate_curve(vec![0.0, 0.5, 1.0], vec![0.0, 0.5, 0.25]).unwrap();
        let (r, s) = renormalize(&c).unwrap();
        assert_eq!(s, 0.5);
        assert_eq!(r.values(), &[0.0, 1.0, 0.5]);
        let (r, s) = renormalize(&tent()).unwrap();
        assert_eq!((r, s), (tent(), 1.0));
        assert_eq!(renormalize(&RevenueCurve::zero()), Err(CurveError::ZeroCurve));

        // peak at 1/3 falls between the knots of the 2-interval approximation
        let peaked = concave_hull_curve(&[(0.0, 0.0), (1.0 / 3.0, 1.0), (1.0, 0.0)]).unwrap().curve;
        let approx = piecewise_approximation(|q| peaked.interpolate(q), 2).unwrap();
        let (_, s) = renormalize(&approx).unwrap();
        assert!(s < 1.0);
    }

    #[test]
    fn json_round_trip_and_rejection() {
        let c = tent();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(text, r#"{"knots":[0.0,0.5,1.0],"values":[0.0,1.0,0.0]}"#);
        let back: RevenueCurve = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<RevenueCurve>(r#"{"knots":[0,0.6,0.5,1],"values":[0,1,1,0]}"#).is_err());
        assert!(serde_json::from_str::<RevenueCurve>(r#"{"knots":[0,1],"values":[0,NaN]}"#).is_err());
    }
}
