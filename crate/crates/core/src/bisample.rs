//! The bisample revenue function and its integral over the unit square.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::RevenueCurve;

/// Relative tolerance for declaring a tie in the cleared-denominator price comparison.
pub const TIE_TOL: f64 = 1e-12;

/// Maximum depth for triangle subdivision along the diagonal.
pub const MAX_DEPTH: u32 = 40;

/// Largest number of x-columns a single off-diagonal rectangle is refined to.
pub const MAX_COLUMNS: u64 = 1 << 22;

const MC_CHUNK: u64 = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BisampleError {
    #[error("curve is identically zero")]
    ZeroCurve,
    #[error("tolerance unreachable; achieved [{lower}, {upper}]")]
    ToleranceUnreachable { lower: f64, upper: f64 },
    #[error("sample count must be positive")]
    NoSamples,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairClass {
    /// ERM posts the higher sample (w = 1).
    HigherSample,
    /// ERM posts the lower sample (w = 0).
    LowerSample,
    Tie,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Enclosure {
    pub lower: f64,
    pub upper: f64,
    /// False when refinement limits stopped short of the requested width.
    pub converged: bool,
}

impl Enclosure {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn require_converged(self) -> Result<Self, BisampleError> {
        if self.converged {
            Ok(self)
        } else {
            Err(BisampleError::ToleranceUnreachable { lower: self.lower, upper: self.upper })
        }
    }
}

/// `R(x)(1-y) - 2R(y)(1-x)`; positive exactly when the higher sample is posted.
fn price_gap(rx: f64, ry: f64, x: f64, y: f64) -> f64 {
    rx * (1.0 - y) - 2.0 * ry * (1.0 - x)
}

/// Classifies the sample pair `x >= y` by which sample the ERM price lands on.
pub fn classify_pair(curve: &RevenueCurve, x: f64, y: f64) -> PairClass {
    debug_assert!(x >= y);
    if x == y {
        return PairClass::LowerSample;
    }
    let a = curve.interpolate(x) * (1.0 - y);
    let b = 2.0 * curve.interpolate(y) * (1.0 - x);
    let d = a - b;
    if d.abs() <= TIE_TOL * (a + b) {
        PairClass::Tie
    } else if d > 0.0 {
        PairClass::HigherSample
    } else {
        PairClass::LowerSample
    }
}

/// ERM revenue conditional on the sample quantiles, symmetric in its arguments.
pub fn phi(curve: &RevenueCurve, x: f64, y: f64) -> f64 {
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    match classify_pair(curve, hi, lo) {
        PairClass::HigherSample => curve.interpolate(hi),
        PairClass::LowerSample => curve.interpolate(lo),
        PairClass::Tie => curve.interpolate(hi).min(curve.interpolate(lo)),
    }
}

#[derive(Debug, Clone, Copy)]
struct Affine {
    a: f64,
    b: f64,
}

impl Affine {
    fn at(self, q: f64) -> f64 {
        (self.a + self.b * q).max(0.0)
    }
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    Rect { x0: f64, x1: f64, y0: f64, y1: f64, rx: Affine, ry: Affine, columns: u64 },
    Tri { c: f64, d: f64, r: Affine, depth: u32 },
}

#[derive(Debug, Clone, Copy)]
struct Region {
    shape: Shape,
    lo: f64,
    hi: f64,
    id: u64,
}

impl Region {
    fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

impl PartialEq for Region {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Region {}

impl PartialOrd for Region {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Region {
    fn cmp(&self, other: &Self) -> Ordering {
        self.width().total_cmp(&other.width()).then(other.id.cmp(&self.id))
    }
}

struct Integrator {
    eps: f64,
    next_id: u64,
}

impl Integrator {
    fn region(&mut self, shape: Shape) -> Region {
        let (lo, hi) = match shape {
            Shape::Rect { x0, x1, y0, y1, rx, ry, columns } => self.rect(x0, x1, y0, y1, rx, ry, columns),
            Shape::Tri { c, d, r, .. } => self.tri(c, d, r),
        };
        let id = self.next_id;
        self.next_id += 1;
        Region { shape, lo, hi: hi.max(lo), id }
    }

    /// Bounds for `int phi` over `[x0,x1] x [y0,y1]` with `y1 <= x0`.
    #[allow(clippy::too_many_arguments)]
    fn rect(&self, x0: f64, x1: f64, y0: f64, y1: f64, rx: Affine, ry: Affine, columns: u64) -> (f64, f64) {
        let (w, h) = (x1 - x0, y1 - y0);
        let g_min = price_gap(rx.at(x0), ry.at(y1), x0, y1);
        if g_min > self.eps {
            let v = h * w * 0.5 * (rx.at(x0) + rx.at(x1));
            return (v, v);
        }
        let g_max = price_gap(rx.at(x1), ry.at(y0), x1, y0);
        if g_max < -self.eps {
            let v = w * h * 0.5 * (ry.at(y0) + ry.at(y1));
            return (v, v);
        }

        // Threshold t(x): w = 1 below it, w = 0 above it; non-decreasing in x.
        let slack = 1e-12 * h;
        let threshold = |x: f64| -> (f64, f64, Option<f64>) {
            let r = rx.at(x);
            let g0 = price_gap(r, ry.at(y0), x, y0);
            let g1 = price_gap(r, ry.at(y1), x, y1);
            if g0 <= 0.0 && g1 > 0.0 {
                // rounding noise against the monotone sign; keep the whole column open
                (y0, y1, None)
            } else if g1 > 0.0 {
                (y1, y1, None)
            } else if g0 <= 0.0 {
                (y0, y0, None)
            } else {
                let t = y0 + h * g0 / (g0 - g1);
                ((t - slack).max(y0), (t + slack).min(y1), Some(t))
            }
        };

        let dx = w / columns as f64;
        let (mut lo, mut hi) = (0.0, 0.0);
        let mut a = x0;
        let mut ta = threshold(a);
        for c in 0..columns {
            let b = if c + 1 == columns { x1 } else { x0 + dx * (c + 1) as f64 };
            let tb = threshold(b);
            let smooth = match (ta.2, tb.2) {
                (Some(sa), Some(sb)) => smooth_column(a, b, sa, sb, y0, y1, rx, ry),
                _ => None,
            };
            let (clo, chi) = match smooth {
                Some((l, u)) => {
                    let pad = (b - a) * slack * rx.at(a).max(rx.at(b)).max(ry.at(y0)).max(ry.at(y1));
                    (l - pad, u + pad)
                }
                None => {
                    let t_lo = ta.0;
                    let t_hi = tb.1.max(t_lo);
                    let (ra, rb) = (rx.at(a), rx.at(b));
                    let (rl, rh) = (ry.at(t_lo), ry.at(t_hi));
                    let exact =
                        (b - a) * 0.5 * (ra + rb) * (t_lo - y0) + (b - a) * (y1 - t_hi) * 0.5 * (rh + ry.at(y1));
                    let band = (b - a) * (t_hi - t_lo);
                    let vmin = ra.min(rb).min(rl).min(rh);
                    let vmax = ra.max(rb).max(rl).max(rh);
                    (exact + band * vmin, exact + band * vmax)
                }
            };
            lo += clo;
            hi += chi;
            a = b;
            ta = tb;
        }
        (lo, hi)
    }

    /// Bounds for `int phi` over `{c <= y <= x <= d}`.
    fn tri(&self, c: f64, d: f64, r: Affine) -> (f64, f64) {
        let l = d - c;
        let area = 0.5 * l * l;
        let g_max = price_gap(r.at(d), r.at(c), d, c);
        if g_max < -self.eps {
            // phi = R(y), weighted by (d - y): centroid at c + l/3
            let v = area * (2.0 * r.at(c) + r.at(d)) / 3.0;
            return (v, v);
        }
        let (rc, rd) = (r.at(c), r.at(d));
        (area * rc.min(rd), area * rc.max(rd))
    }

    /// Replaces a region by finer ones; `None` when it cannot be refined further.
    fn refine(&mut self, region: &Region) -> Option<Vec<Region>> {
        match region.shape {
            Shape::Rect { columns, .. } if columns >= MAX_COLUMNS => None,
            Shape::Rect { x0, x1, y0, y1, rx, ry, columns } => {
                Some(vec![self.region(Shape::Rect { x0, x1, y0, y1, rx, ry, columns: columns * 2 })])
            }
            Shape::Tri { depth, .. } if depth >= MAX_DEPTH => None,
            Shape::Tri { c, d, r, depth } => {
                let m = 0.5 * (c + d);
                Some(vec![
                    self.region(Shape::Tri { c, d: m, r, depth: depth + 1 }),
                    self.region(Shape::Tri { c: m, d, r, depth: depth + 1 }),
                    self.region(Shape::Rect { x0: m, x1: d, y0: c, y1: m, rx: r, ry: r, columns: 1 }),
                ])
            }
        }
    }
}

/// Bounds for `int phi` over the column `[a,b] x [y0,y1]` when the threshold
/// is interior at both ends. The threshold is linear-fractional in `x`, so
/// it lies between its chord and its end tangents; the integrand is
/// quadratic along straight paths and monotone in the threshold when
/// `R(x) - R(t)` keeps one sign. `None` when those conditions fail.
#[allow(clippy::too_many_arguments)]
fn smooth_column(a: f64, b: f64, ta: f64, tb: f64, y0: f64, y1: f64, rx: Affine, ry: Affine) -> Option<(f64, f64)> {
    if tb < ta {
        return None;
    }
    let jump = [rx.at(a) - ry.at(ta), rx.at(a) - ry.at(tb), rx.at(b) - ry.at(ta), rx.at(b) - ry.at(tb)];
    let rising = jump.iter().all(|&v| v >= 0.0);
    if !rising && !jump.iter().all(|&v| v <= 0.0) {
        return None;
    }
    // t(x) = (p0 + p1 x) / (q0 + q1 x)
    let (p0, p1) = (rx.a - 2.0 * ry.a, rx.b + 2.0 * ry.a);
    let (q0, q1) = (rx.a + 2.0 * ry.b, rx.b - 2.0 * ry.b);
    let (qa, qb) = (q0 + q1 * a, q0 + q1 * b);
    if qa * qb <= 0.0 {
        return None;
    }
    let slope = |x: f64, q: f64| (p1 * q - (p0 + p1 * x) * q1) / (q * q);
    let (sa, sb) = (slope(a, qa), slope(b, qb));
    if !(sa >= 0.0 && sb >= 0.0 && sa.is_finite() && sb.is_finite()) {
        return None;
    }
    let chord = [(a, ta), (b, tb), (b, tb)];
    let tangents = if sa != sb {
        let xi = ((tb - ta + sa * a - sb * b) / (sa - sb)).clamp(a, b);
        [(a, ta), (xi, (ta + sa * (xi - a)).clamp(ta, tb)), (b, tb)]
    } else {
        chord
    };
    let (below, above) = if sb >= sa { (tangents, chord) } else { (chord, tangents) };
    let integrand = |x: f64, t: f64| rx.at(x) * (t - ta) + (tb - t) * 0.5 * (ry.at(t) + ry.at(tb));
    let along = |path: &[(f64, f64); 3]| -> f64 {
        path.windows(2)
            .map(|s| {
                let ((xa, za), (xb, zb)) = (s[0], s[1]);
                let (xm, zm) = (0.5 * (xa + xb), 0.5 * (za + zb));
                (xb - xa) / 6.0 * (integrand(xa, za) + 4.0 * integrand(xm, zm) + integrand(xb, zb))
            })
            .sum()
    };
    let (v_below, v_above) = (along(&below), along(&above));
    let (band_lo, band_hi) = if rising { (v_below, v_above) } else { (v_above, v_below) };
    let exact = (b - a) * 0.5 * (rx.at(a) + rx.at(b)) * (ta - y0) + (b - a) * (y1 - tb) * 0.5 * (ry.at(tb) + ry.at(y1));
    Some((exact + band_lo, exact + band_hi.max(band_lo)))
}

fn segment_affines(curve: &RevenueCurve) -> Vec<Affine> {
    (0..curve.len() - 1)
        .map(|i| {
            let (a, b) = curve.segment_affine(i);
            Affine { a, b }
        })
        .collect()
}

/// Certified bracket of the ERM revenue `int_{[0,1]^2} phi`. The width is at
/// most `tol` unless refinement limits are hit, which clears `converged`.
pub fn erm_revenue_enclosure(curve: &RevenueCurve, tol: f64) -> Enclosure {
    let max_r = curve.max_value();
    if max_r == 0.0 {
        return Enclosure { lower: 0.0, upper: 0.0, converged: true };
    }
    let knots = curve.knots();
    let segs = segment_affines(curve);
    let mut integ = Integrator { eps: 1e-14 * max_r, next_id: 0 };

    let mut heap = BinaryHeap::new();
    for a in 0..segs.len() {
        let shape = Shape::Tri { c: knots[a], d: knots[a + 1], r: segs[a], depth: 0 };
        heap.push(integ.region(shape));
        for b in 0..a {
            let shape = Shape::Rect {
                x0: knots[a],
                x1: knots[a + 1],
                y0: knots[b],
                y1: knots[b + 1],
                rx: segs[a],
                ry: segs[b],
                columns: 1,
            };
            heap.push(integ.region(shape));
        }
    }

    // Regions are over the lower triangle; the full integral is twice that.
    let half_tol = 0.5 * tol;
    let mut frozen: Vec<Region> = Vec::new();
    let mut width: f64 = heap.iter().map(Region::width).sum();
    let mut converged = true;
    loop {
        if width <= half_tol {
            width = heap.iter().chain(&frozen).map(Region::width).sum();
            if width <= half_tol {
                break;
            }
        }
        let Some(top) = heap.pop() else {
            converged = false;
            break;
        };
        if top.width() == 0.0 {
            heap.push(top);
            break;
        }
        match integ.refine(&top) {
            Some(children) => {
                width -= top.width();
                for child in children {
                    width += child.width();
                    heap.push(child);
                }
            }
            None => frozen.push(top),
        }
    }

    let mut regions: Vec<Region> = heap.into_vec();
    regions.extend(frozen);
    regions.sort_by_key(|r| r.id);
    let lo: f64 = regions.iter().map(|r| r.lo).sum();
    let hi: f64 = regions.iter().map(|r| r.hi).sum();
    Enclosure {
        lower: (2.0 * lo).clamp(0.0, max_r),
        upper: (2.0 * hi).clamp(0.0, max_r),
        converged: converged && 2.0 * (hi - lo) <= tol,
    }
}

/// Enclosure of ERM revenue divided by the optimal revenue `max R`.
pub fn ratio(curve: &RevenueCurve, tol: f64) -> Result<Enclosure, BisampleError> {
    let max_r = curve.max_value();
    if max_r <= 0.0 {
        return Err(BisampleError::ZeroCurve);
    }
    let e = erm_revenue_enclosure(curve, tol * max_r);
    Ok(Enclosure { lower: (e.lower / max_r).min(1.0), upper: (e.upper / max_r).min(1.0), converged: e.converged })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let delta = v - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (v - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * self.n as f64 * other.n as f64 / n as f64;
        Moments { n, mean, m2 }
    }
}

fn unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Sample `index` of the stream for `seed`: the generator is positioned by
/// index, so any partition of the index range yields the same pairs.
fn sample_pair(rng: &mut ChaCha8Rng, index: u64) -> (f64, f64) {
    rng.set_word_pos(u128::from(index) * 4);
    (unit(rng.random()), unit(rng.random()))
}

fn mc_chunk(curve: &RevenueCurve, seed: u64, start: u64, end: u64) -> Moments {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Moments::default();
    rng.set_word_pos(u128::from(start) * 4);
    for _ in start..end {
        let x = unit(rng.random());
        let y = unit(rng.random());
        m.push(phi(curve, x, y));
    }
    m
}

/// Monte Carlo estimate of the ERM revenue from i.i.d. uniform quantile pairs.
/// Deterministic in `(curve, n_samples, seed)` regardless of thread count.
/// With a single sample the standard error is reported as 0.
pub fn erm_revenue_mc(curve: &RevenueCurve, n_samples: u64, seed: u64) -> Result<McEstimate, BisampleError> {
    if n_samples == 0 {
        return Err(BisampleError::NoSamples);
    }
    let chunks = n_samples.div_ceil(MC_CHUNK);
    let run = |c: u64| mc_chunk(curve, seed, c * MC_CHUNK, ((c + 1) * MC_CHUNK).min(n_samples));

    #[cfg(feature = "parallel")]
    let parts: Vec<Moments> = {
        use rayon::prelude::*;
        (0..chunks).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Moments> = (0..chunks).map(run).collect();

    let total = parts.into_iter().fold(Moments::default(), Moments::merge);
    let stderr = if total.n > 1 { (total.m2 / (total.n - 1) as f64 / total.n as f64).sqrt() } else { 0.0 };
    Ok(McEstimate { estimate: total.mean, stderr })
}

/// The `index`-th quantile pair drawn by [`erm_revenue_mc`] for `seed`.
pub fn mc_sample(seed: u64, index: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_pair(&mut rng, index)
}
