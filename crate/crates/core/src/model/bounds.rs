//! Closed-form lower bounds on the revenue contribution of a gauge cell.

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::curve::{concave_hull_curve, RevenueCurve};
use crate::gauge::Gauge;

/// `constant + sum c * R(q_l)` over one-based knot indices `l`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinearForm {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinearForm {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    fn pair(a: usize, ca: f64, b: usize, cb: f64) -> Self {
        Self { terms: vec![(a, ca), (b, cb)], constant: 0.0 }
    }

    /// Value with `r(l)` supplying `R(q_l)`.
    pub fn eval(&self, r: impl Fn(usize) -> f64) -> f64 {
        self.constant + self.terms.iter().map(|&(l, c)| c * r(l)).sum::<f64>()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.constant >= 0.0 && self.terms.iter().all(|&(_, c)| c >= 0.0)
    }
}

/// Lower bounds on the mean of `phi` over `I(i, j)` given its corner pattern:
/// 1-definite, 0-definite, or indefinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalBounds {
    pub f1: LinearForm,
    pub f0: LinearForm,
    pub f_iota: LinearForm,
}

fn check_interval(gauge: &Gauge, i: usize) -> Result<(), ModelError> {
    if (1..=gauge.n()).contains(&i) {
        Ok(())
    } else {
        Err(ModelError::BadIndex(format!("interval {i} outside 1..={}", gauge.n())))
    }
}

/// Lower bound on the mean of `phi` over the diagonal cell `I(i, i)`.
pub fn diag_coeffs(gauge: &Gauge, i: usize) -> Result<LinearForm, ModelError> {
    check_interval(gauge, i)?;
    let opt = gauge.opt_index;
    Ok(match i.cmp(&opt) {
        std::cmp::Ordering::Less => LinearForm::pair(i, 2.0 / 3.0, i + 1, 1.0 / 3.0),
        std::cmp::Ordering::Equal => LinearForm::zero(),
        std::cmp::Ordering::Greater => LinearForm::pair(i, 1.0 / 3.0, i + 1, 2.0 / 3.0),
    })
}

pub fn offdiag_bounds(gauge: &Gauge, i: usize, j: usize) -> Result<ConditionalBounds, ModelError> {
    check_interval(gauge, i)?;
    check_interval(gauge, j)?;
    if j >= i {
        return Err(ModelError::BadIndex(format!("off-diagonal cell needs j < i, got ({i}, {j})")));
    }
    let f1 = LinearForm::pair(i, 0.5, i + 1, 0.5);
    let f0 = LinearForm::pair(j, 0.5, j + 1, 0.5);
    let opt = gauge.opt_index;
    let f_iota = if i < opt {
        f0.clone()
    } else if j > opt {
        f1.clone()
    } else {
        LinearForm::constant(case_e_constant(gauge, i, j)?)
    };
    Ok(ConditionalBounds { f1, f0, f_iota })
}

/// The smallest concave non-negative curve meeting the relaxed peak
/// constraints of the gauge.
pub fn minimal_curve(gauge: &Gauge) -> RevenueCurve {
    let (a, b) = gauge.opt_interval();
    let points = [(0.0, 0.0), (a, a / b), (b, (1.0 - b) / (1.0 - a)), (1.0, 0.0)];
    concave_hull_curve(&points).expect("hull of valid gauge points").curve
}

/// `E[min(R(x), R(y))]` for `(x, y)` uniform on `I(i, j)`, with `R` the
/// minimal curve of the gauge. Requires `j <= opt <= i`.
pub fn case_e_constant(gauge: &Gauge, i: usize, j: usize) -> Result<f64, ModelError> {
    check_interval(gauge, i)?;
    check_interval(gauge, j)?;
    let opt = gauge.opt_index;
    if !(j <= opt && opt <= i) {
        return Err(ModelError::BadIndex(format!("cell ({i}, {j}) does not straddle opt {opt}")));
    }
    let curve = minimal_curve(gauge);
    let (x0, x1) = (gauge.q(i), gauge.q(i + 1));
    let (y0, y1) = (gauge.q(j), gauge.q(j + 1));
    Ok(mean_min_over_rect(&curve, x0, x1, y0, y1))
}

/// Splits `[a, b]` at the curve's interior knots.
fn pieces(curve: &RevenueCurve, a: f64, b: f64) -> Vec<(f64, f64)> {
    let mut cuts = vec![a];
    cuts.extend(curve.knots().iter().copied().filter(|&k| k > a && k < b));
    cuts.push(b);
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Exact `E[min(R(x), R(y))]` over `[x0,x1] x [y0,y1]` for piecewise-linear `R`.
pub fn mean_min_over_rect(curve: &RevenueCurve, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let area = (x1 - x0) * (y1 - y0);
    let mut total = 0.0;
    for (xa, xb) in pieces(curve, x0, x1) {
        let (ax, bx) = curve.segment_affine(curve.segment_index(0.5 * (xa + xb)));
        for (ya, yb) in pieces(curve, y0, y1) {
            let (ay, by) = curve.segment_affine(curve.segment_index(0.5 * (ya + yb)));
            let rect = vec![(xa, ya), (xb, ya), (xb, yb), (xa, yb)];
            // d(x, y) = R(x) - R(y); where d <= 0 the minimum is R(x)
            let d = |p: (f64, f64)| (ax + bx * p.0) - (ay + by * p.1);
            let below = clip(&rect, d);
            let ry = |p: (f64, f64)| ay + by * p.1;
            total += integral_affine(&below, |p| ax + bx * p.0);
            total += integral_affine(&rect, ry) - integral_affine(&below, ry);
        }
    }
    total / area
}

/// Part of a convex polygon where `f <= 0`, for affine `f`.
fn clip(poly: &[(f64, f64)], f: impl Fn((f64, f64)) -> f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    for k in 0..poly.len() {
        let p = poly[k];
        let q = poly[(k + 1) % poly.len()];
        let (fp, fq) = (f(p), f(q));
        if fp <= 0.0 {
            out.push(p);
        }
        if (fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0) {
            let t = fp / (fp - fq);
            out.push((p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)));
        }
    }
    out
}

/// Integral of an affine function over a polygon: area times value at the centroid.
fn integral_affine(poly: &[(f64, f64)], f: impl Fn((f64, f64)) -> f64) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for k in 0..poly.len() {
        let p = poly[k];
        let q = poly[(k + 1) % poly.len()];
        let cross = p.0 * q.1 - q.0 * p.1;
        a2 += cross;
        cx += (p.0 + q.0) * cross;
        cy += (p.1 + q.1) * cross;
    }
    if a2.abs() < f64::MIN_POSITIVE {
        return 0.0;
    }
    let area = 0.5 * a2;
    let centroid = (cx / (3.0 * a2), cy / (3.0 * a2));
    area.abs() * f(centroid)
}
