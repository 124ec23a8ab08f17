//! Grid search for the smallest ERM revenue over three-piece revenue curves
//! with a given peak quantile.

use serde::{Deserialize, Serialize};

use crate::bisample::erm_revenue_enclosure;
use crate::curve::{concave_hull_curve, CurveError, RevenueCurve};

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ThreePieceParams {
    pub q_opt: f64,
    pub q2: f64,
    pub r2: f64,
    pub r3: f64,
}

impl ThreePieceParams {
    fn key(&self) -> [f64; 3] {
        [self.q2, self.r2, self.r3]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreePieceCurve {
    pub curve: RevenueCurve,
    /// Conflicting points were merged, e.g. `q_opt = 0`.
    pub degenerate: bool,
}

/// Least concave curve whose hypograph holds `(0,0)`, `(q_opt,1)`,
/// `(q2,r2)` and `(1,r3)`.
pub fn three_piece_curve(p: &ThreePieceParams) -> Result<ThreePieceCurve, CurveError> {
    for v in [p.q_opt, p.q2, p.r2, p.r3] {
        if !(0.0..=1.0).contains(&v) {
            return Err(CurveError::BadKnots(format!("parameter {v} outside [0, 1]")));
        }
    }
    let hull = concave_hull_curve(&[(0.0, 0.0), (p.q_opt, 1.0), (p.q2, p.r2), (1.0, p.r3)])?;
    Ok(ThreePieceCurve { curve: hull.curve, degenerate: hull.degenerate })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub q2: Vec<f64>,
    pub r2: Vec<f64>,
    pub r3: Vec<f64>,
}

fn steps(lo: usize, hi: usize, denom: f64) -> Vec<f64> {
    (lo..=hi).map(|k| k as f64 / denom).collect()
}

impl GridSpec {
    /// `q2 = k/80` for `71 <= k <= 80`, `r2 = k/1000` for `k <= 300`,
    /// `r3 = k/1000` for `k <= 18`.
    pub fn reference_box() -> Self {
        Self { q2: steps(71, 80, 80.0), r2: steps(0, 300, 1000.0), r3: steps(0, 18, 1000.0) }
    }

    /// Coarser grid over the whole unit cube.
    pub fn full_cube() -> Self {
        Self { q2: steps(0, 80, 80.0), r2: steps(0, 50, 50.0), r3: steps(0, 50, 50.0) }
    }

    pub fn single(q2: f64, r2: f64, r3: f64) -> Self {
        Self { q2: vec![q2], r2: vec![r2], r3: vec![r3] }
    }

    pub fn len(&self) -> usize {
        self.q2.len() * self.r2.len() * self.r3.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn point(&self, q_opt: f64, index: usize) -> ThreePieceParams {
        let (n2, n3) = (self.r2.len(), self.r3.len());
        ThreePieceParams {
            q_opt,
            q2: self.q2[index / (n2 * n3)],
            r2: self.r2[(index / n3) % n2],
            r3: self.r3[index % n3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaResult {
    pub min_value: f64,
    pub params: ThreePieceParams,
    pub evaluated: usize,
}

/// Upper end of the revenue enclosure; the peak value is 1 so this is the ratio.
pub fn eta_value(p: &ThreePieceParams, tol: f64) -> f64 {
    match three_piece_curve(p) {
        Ok(c) => erm_revenue_enclosure(&c.curve, tol).upper,
        Err(_) => f64::INFINITY,
    }
}

fn evaluate_all(spec: &GridSpec, q_opt: f64, tol: f64) -> Vec<f64> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..spec.len()).into_par_iter().map(|i| eta_value(&spec.point(q_opt, i), tol)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..spec.len()).map(|i| eta_value(&spec.point(q_opt, i), tol)).collect()
    }
}

fn better(a: (f64, &ThreePieceParams), b: (f64, &ThreePieceParams)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1.key() < b.1.key())
}

/// Minimum of the enclosure upper end over the grid. Ties go to the
/// lexicographically smallest `(q2, r2, r3)`. `None` for an empty grid.
pub fn eta_grid(q_opt: f64, spec: &GridSpec, tol: f64) -> Option<EtaResult> {
    let values = evaluate_all(spec, q_opt, tol);
    let mut best: Option<(f64, ThreePieceParams)> = None;
    for (i, &v) in values.iter().enumerate() {
        let p = spec.point(q_opt, i);
        if best.as_ref().is_none_or(|(bv, bp)| better((v, &p), (*bv, bp))) {
            best = Some((v, p));
        }
    }
    best.filter(|b| b.0.is_finite()).map(|(min_value, params)| EtaResult { min_value, params, evaluated: values.len() })
}

/// Local refinement from a grid minimum by coordinate descent with shrinking
/// steps. Its output is a heuristic upper bound only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polished {
    pub min_value: f64,
    pub params: ThreePieceParams,
    pub evaluations: usize,
    pub certifying: bool,
}

pub fn polish(start: &EtaResult, initial_step: f64, tol: f64) -> Polished {
    let mut p = start.params;
    let mut value = start.min_value;
    let mut step = initial_step;
    let mut evaluations = 0;
    while step > 1e-6 && evaluations < 2000 {
        let mut improved = false;
        for coord in 0..3 {
            for dir in [-1.0, 1.0] {
                let mut c = p;
                let slot = match coord {
                    0 => &mut c.q2,
                    1 => &mut c.r2,
                    _ => &mut c.r3,
                };
                *slot = (*slot + dir * step).clamp(0.0, 1.0);
                let v = eta_value(&c, tol);
                evaluations += 1;
                if v < value {
                    (p, value, improved) = (c, v, true);
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Polished { min_value: value, params: p, evaluations, certifying: false }
}

/// `eta_grid` at `q_opt = k/80` for each `k` in `ks`.
pub fn eta_batch(ks: impl IntoIterator<Item = usize>, spec: &GridSpec, tol: f64) -> Vec<EtaResult> {
    ks.into_iter().filter_map(|k| eta_grid(k as f64 / 80.0, spec, tol)).collect()
}

/// Series as `q_opt,eta,q2,r2,r3`.
pub fn eta_csv(results: &[EtaResult]) -> String {
    let mut out = String::from("q_opt,eta,q2,r2,r3\n");
    for r in results {
        let p = &r.params;
        out.push_str(&format!("{:?},{:?},{:?},{:?},{:?}\n", p.q_opt, r.min_value, p.q2, p.r2, p.r3));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(q_opt: f64, q2: f64, r2: f64, r3: f64) -> ThreePieceParams {
        ThreePieceParams { q_opt, q2, r2, r3 }
    }

    #[test]
    fn curve_examples() {
        let tent = three_piece_curve(&params(0.5, 0.75, 0.5, 0.0)).unwrap().curve;
        assert_eq!(tent.knots(), &[0.0, 0.5, 1.0]);
        let four = three_piece_curve(&params(0.55, 0.975, 0.136, 0.0006)).unwrap().curve;
        assert_eq!(four.knots(), &[0.0, 0.55, 0.975, 1.0]);
        let id = three_piece_curve(&params(1.0, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(id.curve.knots(), &[0.0, 1.0]);
        assert_eq!(id.curve.values(), &[0.0, 1.0]);
        assert!(three_piece_curve(&params(0.0, 0.5, 0.2, 0.0)).unwrap().degenerate);
    }

    #[test]
    fn single_point_grid() {
        let spec = GridSpec::single(0.9, 0.1, 0.0);
        let r = eta_grid(0.55, &spec, 1e-6).unwrap();
        assert_eq!(r.min_value, eta_value(&params(0.55, 0.9, 0.1, 0.0), 1e-6));
        assert_eq!(r.evaluated, 1);
    }

    #[test]
    fn refinement_never_increases() {
        let coarse = GridSpec { q2: vec![0.9, 1.0], r2: vec![0.0, 0.2], r3: vec![0.0] };
        let fine = GridSpec { q2: vec![0.9, 0.95, 1.0], r2: vec![0.0, 0.1, 0.2], r3: vec![0.0, 0.01] };
        let a = eta_grid(0.55, &coarse, 1e-6).unwrap().min_value;
        let b = eta_grid(0.55, &fine, 1e-6).unwrap().min_value;
        assert!(b <= a);
    }

    #[test]
    fn polish_does_not_worsen() {
        let spec = GridSpec { q2: vec![0.95, 1.0], r2: vec![0.1, 0.2], r3: vec![0.0] };
        let r = eta_grid(0.55, &spec, 1e-6).unwrap();
        let p = polish(&r, 0.02, 1e-6);
        assert!(p.min_value <= r.min_value && !p.certifying);
    }
}
