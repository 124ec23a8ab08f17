//! Interval partitions of `[0, 1]` with a designated optimal interval.

use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

type Q = Ratio<i128>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaugeError {
    #[error("bad index: {0}")]
    BadIndex(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum Weighting {
    Uniform,
    ApproxUniform,
    SquareWeighted,
}

impl std::str::FromStr for Weighting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "uniform" => Ok(Self::Uniform),
            "approxuniform" | "approx" => Ok(Self::ApproxUniform),
            "squareweighted" | "square" => Ok(Self::SquareWeighted),
            _ => Err(format!("unknown weighting {s:?}")),
        }
    }
}

/// Breakpoints `q_1 = 0 < ... < q_{n+1} = 1`, stored zero-based, and the
/// one-based index of the optimal interval `[q_opt, q_{opt+1}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gauge {
    pub breakpoints: Vec<f64>,
    pub opt_index: usize,
    /// Left-interval count chosen by the split rule, when one was applied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<usize>,
}

impl Gauge {
    pub fn new(breakpoints: Vec<f64>, opt_index: usize) -> Result<Self, GaugeError> {
        let n = breakpoints.len().saturating_sub(1);
        if n == 0 || breakpoints[0] != 0.0 || breakpoints[n] != 1.0 {
            return Err(GaugeError::BadIndex("breakpoints must run from 0 to 1".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GaugeError::BadIndex("breakpoints must increase strictly".into()));
        }
        if !(1..=n).contains(&opt_index) {
            return Err(GaugeError::BadIndex(format!("opt index {opt_index} outside 1..={n}")));
        }
        Ok(Self { breakpoints, opt_index, split: None })
    }

    /// Number of intervals.
    pub fn n(&self) -> usize {
        self.breakpoints.len() - 1
    }

    /// One-based breakpoint `q_i`.
    pub fn q(&self, i: usize) -> f64 {
        self.breakpoints[i - 1]
    }

    /// Length of interval `i` (one-based).
    pub fn len_of(&self, i: usize) -> f64 {
        self.q(i + 1) - self.q(i)
    }

    /// Midpoint of interval `i` (one-based).
    pub fn mid(&self, i: usize) -> f64 {
        0.5 * (self.q(i) + self.q(i + 1))
    }

    pub fn opt_interval(&self) -> (f64, f64) {
        (self.q(self.opt_index), self.q(self.opt_index + 1))
    }
}

fn to_f64(q: Q) -> f64 {
    q.to_f64().expect("rational in range")
}

fn equal_parts(from: Q, to: Q, parts: usize, out: &mut Vec<Q>) {
    for p in 0..parts {
        out.push(from + (to - from) * Q::from_integer(p as i128) / Q::from_integer(parts as i128));
    }
}

/// Uniform gauge `q_i = (i-1)/n`. `k` indexes the knot pinned to 1 by the
/// upper model; the optimal interval is `k` clamped to `1..=n`.
pub fn uniform_gauge(n: usize, k: usize) -> Result<Gauge, GaugeError> {
    if n == 0 {
        return Err(GaugeError::BadIndex("n must be positive".into()));
    }
    if !(1..=n + 1).contains(&k) {
        return Err(GaugeError::BadIndex(format!("k = {k} outside 1..={}", n + 1)));
    }
    let breakpoints = (0..=n).map(|i| to_f64(Q::new(i as i128, n as i128))).collect();
    Gauge::new(breakpoints, k.min(n))
}

/// Rule for the number `m` of intervals left of the optimal interval
/// `[(k-1)/N, k/N]` when `1 < k < N`. Minimizes over `2 <= mu <= n-2`
/// with ties to the smaller `mu`; when that range is empty, `mu = 1`.
pub fn split_count(n: usize, big_n: usize, k: usize, weighting: Weighting) -> usize {
    let (n, nn, k) = (n as i128, big_n as i128, k as i128);
    let square = weighting == Weighting::SquareWeighted && 2 * k < nn;
    let cost = |mu: i128| -> Q {
        let right = n - mu - 1;
        let (dl, dr) = if square { (mu * mu, right * right) } else { (mu, right) };
        let v = Q::new(k - 1, nn * dl) - Q::new(nn - k, nn * dr);
        if v < Q::from_integer(0) {
            -v
        } else {
            v
        }
    };
    let mut best: Option<(Q, i128)> = None;
    for mu in 2..=n - 2 {
        let c = cost(mu);
        if best.as_ref().is_none_or(|(b, _)| c < *b) {
            best = Some((c, mu));
        }
    }
    best.map_or(1, |(_, mu)| mu as usize)
}

/// Lower-model gauge whose optimal interval is exactly `[(k-1)/N, k/N]`.
pub fn lower_gauge(n: usize, big_n: usize, k: usize, weighting: Weighting) -> Result<Gauge, GaugeError> {
    if n < 2 {
        return Err(GaugeError::BadIndex(format!("n = {n} below 2")));
    }
    if big_n == 0 || !(1..=big_n).contains(&k) {
        return Err(GaugeError::BadIndex(format!("k = {k} outside 1..={big_n}")));
    }
    let nn = big_n as i128;
    let lo = Q::new(k as i128 - 1, nn);
    let hi = Q::new(k as i128, nn);
    let one = Q::from_integer(1);
    let zero = Q::from_integer(0);
    let mut pts = Vec::with_capacity(n + 1);
    let (opt, split) = if big_n == 1 {
        if n != 1 {
            // the single optimal interval is all of [0, 1]; nothing is left to split
            return Err(GaugeError::BadIndex("N = 1 leaves no room for further intervals".into()));
        }
        (1, None)
    } else if k == 1 {
        pts.push(zero);
        equal_parts(hi, one, n - 1, &mut pts);
        (1, None)
    } else if k == big_n {
        equal_parts(zero, lo, n - 1, &mut pts);
        pts.push(lo);
        (n, None)
    } else {
        if n < 3 {
            return Err(GaugeError::BadIndex(format!("n = {n} cannot place intervals on both sides of k = {k}")));
        }
        let m = split_count(n, big_n, k, weighting);
        equal_parts(zero, lo, m, &mut pts);
        pts.push(lo);
        equal_parts(hi, one, n - m - 1, &mut pts);
        (m + 1, Some(m))
    };
    pts.push(one);
    let breakpoints = pts.into_iter().map(to_f64).collect();
    let mut g = Gauge::new(breakpoints, opt)?;
    g.split = split;
    Ok(g)
}

/// Area of `I(i, j)`, one-based.
pub fn cell_area(gauge: &Gauge, i: usize, j: usize) -> Result<f64, GaugeError> {
    let n = gauge.n();
    if !(1..=n).contains(&i) || !(1..=n).contains(&j) || j > i {
        return Err(GaugeError::BadIndex(format!("cell ({i}, {j}) outside 1 <= j <= i <= {n}")));
    }
    Ok(gauge.len_of(i) * gauge.len_of(j))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_examples() {
        assert_eq!(uniform_gauge(4, 1).unwrap().breakpoints, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(uniform_gauge(80, 45).unwrap().breakpoints.len(), 81);
        assert_eq!(uniform_gauge(1, 1).unwrap().breakpoints, vec![0.0, 1.0]);
        assert_eq!(uniform_gauge(4, 5).unwrap().opt_index, 4);
        assert!(uniform_gauge(4, 6).is_err());
        assert!(uniform_gauge(4, 0).is_err());
    }

    #[test]
    fn lower_gauge_endpoints() {
        let g = lower_gauge(5, 10, 1, Weighting::ApproxUniform).unwrap();
        assert_eq!(g.breakpoints, vec![0.0, 0.1, 0.325, 0.55, 0.775, 1.0]);
        assert_eq!(g.opt_index, 1);
        let g = lower_gauge(5, 10, 10, Weighting::ApproxUniform).unwrap();
        assert_eq!(g.breakpoints, vec![0.0, 0.225, 0.45, 0.675, 0.9, 1.0]);
        assert_eq!(g.opt_index, 5);
    }

    #[test]
    fn lower_gauge_interior() {
        let g = lower_gauge(5, 10, 4, Weighting::ApproxUniform).unwrap();
        assert_eq!(g.n(), 5);
        assert_eq!(g.opt_interval(), (0.3, 0.4));
        assert!(lower_gauge(2, 10, 4, Weighting::ApproxUniform).is_err());
        assert!(lower_gauge(5, 10, 11, Weighting::ApproxUniform).is_err());
        assert!(lower_gauge(1, 10, 1, Weighting::ApproxUniform).is_err());
    }

    #[test]
    fn cell_area_examples() {
        let g = uniform_gauge(10, 1).unwrap();
        assert!((cell_area(&g, 7, 3).unwrap() - 0.01).abs() < 1e-15);
        let g = lower_gauge(5, 10, 1, Weighting::ApproxUniform).unwrap();
        assert!((cell_area(&g, 2, 1).unwrap() - 0.225 * 0.1).abs() < 1e-15);
        assert!(cell_area(&g, 1, 2).is_err());
        assert!(cell_area(&g, 6, 1).is_err());
    }
}
