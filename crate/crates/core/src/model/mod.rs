//! The two MILP families as explicit data: the upper-bound search program on a
//! uniform gauge and the lower-bound program on a general gauge.

mod bounds;
pub mod mps;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bounds::{
    case_e_constant, diag_coeffs, mean_min_over_rect, minimal_curve, offdiag_bounds, ConditionalBounds, LinearForm,
};

use crate::bisample::{classify_pair, PairClass};
use crate::curve::{concave_hull_curve, CurveError, RevenueCurve};
use crate::gauge::{cell_area, uniform_gauge, Gauge, GaugeError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("bad index: {0}")]
    BadIndex(String),
    #[error("bad gauge: {0}")]
    BadGauge(String),
    #[error("assignment violates {constraint} by {violation:e}")]
    InfeasibleAssignment { constraint: String, violation: f64 },
    #[error(transparent)]
    Curve(#[from] CurveError),
}

impl From<GaugeError> for ModelError {
    fn from(e: GaugeError) -> Self {
        match e {
            GaugeError::BadIndex(s) => ModelError::BadIndex(s),
        }
    }
}

/// What a variable stands for. Indices are one-based as in the formulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    R(usize),
    W(usize, usize),
    W2(usize, usize),
    Rw(usize, usize, usize),
    Rw2(usize, usize, usize),
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Role::R(i) => write!(f, "R[{i}]"),
            Role::W(i, j) => write!(f, "w[{i},{j}]"),
            Role::W2(i, j) => write!(f, "w2[{i},{j}]"),
            Role::Rw(l, i, j) => write!(f, "Rw[{l},{i},{j}]"),
            Role::Rw2(l, i, j) => write!(f, "Rw2[{l},{i},{j}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VarKind {
    Binary,
    Continuous { lb: f64, ub: f64 },
}

impl VarKind {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            VarKind::Binary => (0.0, 1.0),
            VarKind::Continuous { lb, ub } => (lb, ub),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub id: usize,
    pub name: String,
    pub kind: VarKind,
    pub role: Role,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn lhs(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v]).sum()
    }

    /// Amount by which `values` violates the constraint (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.lhs(values);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// Minimization objective `constant + sum c * x`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Objective {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Family {
    Upper { n: usize, k: usize },
    Lower { gauge: Gauge },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpModel {
    pub family: Family,
    /// Gauge breakpoints `q_1..q_{n+1}`, zero-based storage.
    pub breakpoints: Vec<f64>,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Objective,
    #[serde(skip)]
    roles: BTreeMap<Role, usize>,
}

impl MilpModel {
    pub fn n(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn q(&self, i: usize) -> f64 {
        self.breakpoints[i - 1]
    }

    pub fn var(&self, role: Role) -> Option<usize> {
        self.roles.get(&role).copied()
    }

    pub fn roles(&self) -> impl Iterator<Item = (Role, usize)> + '_ {
        self.roles.iter().map(|(r, v)| (*r, *v))
    }

    pub fn binaries(&self) -> Vec<usize> {
        self.variables.iter().filter(|v| v.kind == VarKind::Binary).map(|v| v.id).collect()
    }

    pub fn is_upper(&self) -> bool {
        matches!(self.family, Family::Upper { .. })
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.constant + self.objective.terms.iter().map(|&(v, c)| c * values[v]).sum::<f64>()
    }

    /// Worst constraint or bound violation of `values`.
    pub fn worst_violation(&self, values: &[f64]) -> (String, f64) {
        let mut worst = (String::new(), 0.0);
        for v in &self.variables {
            let (lb, ub) = v.kind.bounds();
            let x = values[v.id];
            let bad = (lb - x).max(x - ub).max(0.0);
            let bad = if v.kind == VarKind::Binary { bad.max(x.min(1.0 - x).max(0.0)) } else { bad };
            if bad > worst.1 {
                worst = (format!("bounds of {}", v.name), bad);
            }
        }
        for c in &self.constraints {
            let bad = c.violation(values);
            if bad > worst.1 {
                worst = (c.name.clone(), bad);
            }
        }
        worst
    }

    pub fn check_assignment(&self, values: &[f64], tol: f64) -> Result<(), ModelError> {
        if values.len() != self.variables.len() {
            return Err(ModelError::InfeasibleAssignment {
                constraint: format!("expected {} values, got {}", self.variables.len(), values.len()),
                violation: f64::INFINITY,
            });
        }
        let (constraint, violation) = self.worst_violation(values);
        if violation > tol {
            Err(ModelError::InfeasibleAssignment { constraint, violation })
        } else {
            Ok(())
        }
    }

    /// Assignment from knot values and a 0/1 rule for `w`; product variables
    /// are set to the products they stand for.
    pub fn assignment(&self, r: &[f64], w: impl Fn(usize, usize) -> f64) -> Vec<f64> {
        let n = self.n();
        assert_eq!(r.len(), n + 1, "need one value per knot");
        let rv = |l: usize| r[l - 1];
        let wv = |s: usize, t: usize| if s == t { 0.0 } else { w(s, t) };
        let upper = self.is_upper();
        let mut values = vec![0.0; self.variables.len()];
        for (&role, &id) in &self.roles {
            values[id] = match role {
                Role::R(i) => rv(i),
                Role::W(s, t) => wv(s, t),
                Role::W2(i, j) => wv(i + 1, j) * wv(i, j + 1),
                Role::Rw(l, s, t) if upper => 0.5 * (rv(l) + rv(l + 1)) * wv(s, t),
                Role::Rw(l, s, t) => rv(l) * wv(s, t),
                Role::Rw2(l, i, j) => rv(l) * wv(i + 1, j) * wv(i, j + 1),
            };
        }
        values
    }

    /// Points at which `w(s, t)` is evaluated: interval midpoints for the
    /// upper family, knots for the lower family.
    pub fn w_point(&self, s: usize) -> f64 {
        if self.is_upper() {
            0.5 * (self.q(s) + self.q(s + 1))
        } else {
            self.q(s)
        }
    }

    /// Feasible point derived from a curve: knot values, `w` from the price
    /// comparison, closed upward so that it is monotone where ties occur.
    pub fn curve_assignment(&self, curve: &RevenueCurve) -> Vec<f64> {
        let r: Vec<f64> = self.breakpoints.iter().map(|&q| curve.interpolate(q)).collect();
        let top = if self.is_upper() { self.n() } else { self.n() + 1 };
        let mut w = vec![vec![0.0; top + 1]; top + 1];
        for s in 2..=top {
            for t in (1..s).rev() {
                let raw = classify_pair(curve, self.w_point(s), self.w_point(t)) == PairClass::HigherSample;
                let from_left = s > t + 1 && w[s - 1][t] > 0.5;
                let from_above = t + 1 < s && w[s][t + 1] > 0.5;
                w[s][t] = if raw || from_left || from_above { 1.0 } else { 0.0 };
            }
        }
        self.assignment(&r, |s, t| w[s][t])
    }

    /// Knot values of an assignment.
    pub fn knot_values(&self, values: &[f64]) -> Vec<f64> {
        (1..=self.n() + 1).map(|i| values[self.var(Role::R(i)).expect("R variable")]).collect()
    }
}

/// Concave curve recovered from a (near-)feasible assignment: the hull of the
/// knot values, which repairs small concavity defects from solver noise.
pub fn extract_curve(model: &MilpModel, values: &[f64], tol: f64) -> Result<RevenueCurve, ModelError> {
    model.check_assignment(values, tol)?;
    let points: Vec<(f64, f64)> =
        model.breakpoints.iter().zip(model.knot_values(values)).map(|(&q, v)| (q, v.max(0.0))).collect();
    Ok(concave_hull_curve(&points)?.curve)
}

/// Sparse linear expression over model variables plus a constant.
#[derive(Debug, Clone, Default)]
struct Lin {
    terms: BTreeMap<usize, f64>,
    constant: f64,
}

impl Lin {
    fn add(&mut self, v: Option<usize>, c: f64) -> &mut Self {
        if let Some(v) = v {
            *self.terms.entry(v).or_insert(0.0) += c;
        }
        self
    }

    fn add_const(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    fn extend(&mut self, other: &Lin, scale: f64) -> &mut Self {
        for (&v, &c) in &other.terms {
            *self.terms.entry(v).or_insert(0.0) += scale * c;
        }
        self.constant += scale * other.constant;
        self
    }

    fn terms(&self) -> Vec<(usize, f64)> {
        self.terms.iter().filter(|(_, c)| **c != 0.0).map(|(v, c)| (*v, *c)).collect()
    }
}

struct Builder {
    model: MilpModel,
}

impl Builder {
    fn new(family: Family, breakpoints: Vec<f64>) -> Self {
        Self {
            model: MilpModel {
                family,
                breakpoints,
                variables: Vec::new(),
                constraints: Vec::new(),
                objective: Objective::default(),
                roles: BTreeMap::new(),
            },
        }
    }

    fn var(&mut self, role: Role, kind: VarKind) -> usize {
        if let Some(&id) = self.model.roles.get(&role) {
            return id;
        }
        let id = self.model.variables.len();
        self.model.variables.push(Variable { id, name: role.to_string(), kind, role });
        self.model.roles.insert(role, id);
        id
    }

    fn get(&self, role: Role) -> Option<usize> {
        self.model.roles.get(&role).copied()
    }

    fn r(&self, i: usize) -> usize {
        self.get(Role::R(i)).expect("R variables are created first")
    }

    fn con(&mut self, name: String, lin: &Lin, relation: Relation, rhs: f64) {
        self.model.constraints.push(Constraint { name, terms: lin.terms(), relation, rhs: rhs - lin.constant });
    }

    /// `x <= y`
    fn le(&mut self, name: String, x: usize, y: usize) {
        let mut lin = Lin::default();
        lin.add(Some(x), 1.0).add(Some(y), -1.0);
        self.con(name, &lin, Relation::Le, 0.0);
    }

    fn r_vars(&mut self, n: usize) {
        for i in 1..=n + 1 {
            self.var(Role::R(i), VarKind::Continuous { lb: 0.0, ub: 1.0 });
        }
    }

    fn concavity(&mut self) {
        let n = self.model.n();
        for i in 2..=n {
            let (qa, qb, qc) = (self.model.q(i - 1), self.model.q(i), self.model.q(i + 1));
            let mut lin = Lin::default();
            lin.add(Some(self.r(i)), qc - qa).add(Some(self.r(i + 1)), -(qb - qa)).add(Some(self.r(i - 1)), -(qc - qb));
            self.con(format!("concave[{i}]"), &lin, Relation::Ge, 0.0);
        }
    }

    /// Three unit-box product inequalities for `p = a * w` with `a, w` in `[0, 1]`.
    fn product_box(&mut self, name: &str, p: usize, a: &Lin, w: usize) {
        let mut l1 = Lin::default();
        l1.add(Some(p), 1.0).extend(a, -1.0);
        self.con(format!("{name}.a"), &l1, Relation::Le, 0.0);
        self.le(format!("{name}.w"), p, w);
        let mut l3 = Lin::default();
        l3.extend(a, 1.0).add(Some(w), 1.0).add(Some(p), -1.0);
        self.con(format!("{name}.aw"), &l3, Relation::Le, 1.0);
    }

    /// Price-comparison constraints at `(x, y)` where `ax`, `ay` are the curve
    /// values and `px`, `py` the corresponding products with `w`.
    #[allow(clippy::too_many_arguments)]
    fn w_defining(&mut self, tag: &str, x: f64, y: f64, ax: &Lin, ay: &Lin, px: usize, py: usize) {
        let (cx, cy) = (1.0 - y, -2.0 * (1.0 - x));
        let mut wx = Lin::default();
        wx.add(Some(px), cx).add(Some(py), cy);
        self.con(format!("wx{tag}"), &wx, Relation::Ge, 0.0);
        let mut wy = Lin::default();
        wy.extend(ax, cx).add(Some(px), -cx).extend(ay, cy).add(Some(py), -cy);
        self.con(format!("wy{tag}"), &wy, Relation::Le, 0.0);
    }

    fn finish(self) -> MilpModel {
        self.model
    }
}

/// Search program on the uniform gauge with `R(q_k) = 1`; `w` is evaluated at
/// interval midpoints and its products with the midpoint values are lifted.
pub fn build_upper_model(n: usize, k: usize) -> Result<MilpModel, ModelError> {
    let gauge = uniform_gauge(n, k)?;
    let mut b = Builder::new(Family::Upper { n, k }, gauge.breakpoints.clone());
    b.r_vars(n);
    for i in 2..=n {
        for j in 1..i {
            b.var(Role::W(i, j), VarKind::Binary);
        }
    }
    for i in 2..=n {
        for j in 1..i {
            for l in [i, j] {
                b.var(Role::Rw(l, i, j), VarKind::Continuous { lb: 0.0, ub: 1.0 });
            }
        }
    }
    let rbar = |b: &Builder, l: usize| {
        let mut lin = Lin::default();
        lin.add(Some(b.r(l)), 0.5).add(Some(b.r(l + 1)), 0.5);
        lin
    };

    b.concavity();
    let mut pin = Lin::default();
    pin.add(Some(b.r(k)), 1.0);
    b.con(format!("pin[{k}]"), &pin, Relation::Eq, 1.0);

    for i in 2..=n {
        for j in 1..i {
            let w = b.get(Role::W(i, j)).unwrap();
            let (pi, pj) = (b.get(Role::Rw(i, i, j)).unwrap(), b.get(Role::Rw(j, i, j)).unwrap());
            let (ri, rj) = (rbar(&b, i), rbar(&b, j));
            b.w_defining(&format!("[{i},{j}]"), gauge.mid(i), gauge.mid(j), &ri, &rj, pi, pj);
            for (l, p, a) in [(i, pi, &ri), (j, pj, &rj)] {
                b.product_box(&format!("sa[{l},{i},{j}]"), p, a, w);
            }
        }
    }
    for i in 2..n {
        for j in 1..i {
            let (lo, hi) = (b.get(Role::W(i, j)).unwrap(), b.get(Role::W(i + 1, j)).unwrap());
            b.le(format!("mono_i[{i},{j}]"), lo, hi);
        }
    }
    for i in 3..=n {
        for j in 1..i - 1 {
            let (lo, hi) = (b.get(Role::W(i, j + 1)).unwrap(), b.get(Role::W(i, j)).unwrap());
            b.le(format!("mono_j[{i},{j}]"), lo, hi);
        }
    }

    let scale = 1.0 / (n * n) as f64;
    let mut obj = Lin::default();
    for i in 1..=n {
        obj.extend(&rbar(&b, i), scale);
    }
    for i in 2..=n {
        for j in 1..i {
            obj.add(b.get(Role::Rw(i, i, j)), 2.0 * scale);
            obj.extend(&rbar(&b, j), 2.0 * scale);
            obj.add(b.get(Role::Rw(j, i, j)), -2.0 * scale);
        }
    }
    b.model.objective = Objective { terms: obj.terms(), constant: obj.constant };
    Ok(b.finish())
}

/// Lower-bound program for a gauge: `w` at knot corners with `w(q_i, q_i) = 0`,
/// relaxed peak constraints, and a degree-three lift of the cell bounds.
pub fn build_lower_model(gauge: &Gauge) -> Result<MilpModel, ModelError> {
    let n = gauge.n();
    if n < 2 {
        return Err(ModelError::BadGauge(format!("gauge has {n} interval(s); need at least 2")));
    }
    let opt = gauge.opt_index;
    let mut b = Builder::new(Family::Lower { gauge: gauge.clone() }, gauge.breakpoints.clone());
    b.r_vars(n);
    for s in 2..=n + 1 {
        for t in 1..s {
            b.var(Role::W(s, t), VarKind::Binary);
        }
    }
    let nonneg = VarKind::Continuous { lb: 0.0, ub: f64::INFINITY };
    // Rw keys: corner products for the comparison constraints, then cell products.
    let mut rw_keys: Vec<(usize, usize, usize)> = Vec::new();
    for s in 2..=n + 1 {
        for t in 1..s {
            rw_keys.extend([(s, s, t), (t, s, t)]);
        }
    }
    for i in 2..=n {
        for j in 1..i {
            for (s, t) in [(i + 1, j), (i, j + 1)] {
                if s == t {
                    continue;
                }
                for l in [i, i + 1, j, j + 1] {
                    rw_keys.push((l, s, t));
                }
            }
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    rw_keys.retain(|k| seen.insert(*k));
    for &(l, s, t) in &rw_keys {
        b.var(Role::Rw(l, s, t), nonneg);
    }
    for i in 3..=n {
        for j in 1..i - 1 {
            b.var(Role::W2(i, j), nonneg);
            for l in [i, i + 1, j, j + 1] {
                b.var(Role::Rw2(l, i, j), nonneg);
            }
        }
    }
    let rl = |b: &Builder, l: usize| {
        let mut lin = Lin::default();
        lin.add(Some(b.r(l)), 1.0);
        lin
    };

    b.concavity();
    let (qa, qb) = gauge.opt_interval();
    let mut l = Lin::default();
    l.add(Some(b.r(opt)), 1.0);
    b.con("opt_left".into(), &l, Relation::Ge, qa / qb);
    let mut l = Lin::default();
    l.add(Some(b.r(opt + 1)), 1.0);
    b.con("opt_right".into(), &l, Relation::Ge, (1.0 - qb) / (1.0 - qa));
    for i in 1..opt {
        b.le(format!("rise[{i}]"), b.r(i), b.r(i + 1));
    }
    for i in opt + 1..=n {
        b.le(format!("fall[{i}]"), b.r(i + 1), b.r(i));
    }

    for s in 2..=n + 1 {
        for t in 1..s {
            let (ps, pt) = (b.get(Role::Rw(s, s, t)).unwrap(), b.get(Role::Rw(t, s, t)).unwrap());
            let (rs, rt) = (rl(&b, s), rl(&b, t));
            b.w_defining(&format!("[{s},{t}]"), gauge.q(s), gauge.q(t), &rs, &rt, ps, pt);
        }
    }
    for &(l, s, t) in &rw_keys {
        let p = b.get(Role::Rw(l, s, t)).unwrap();
        let w = b.get(Role::W(s, t)).unwrap();
        let a = rl(&b, l);
        b.product_box(&format!("rw[{l},{s},{t}]"), p, &a, w);
    }
    for i in 3..=n {
        for j in 1..i - 1 {
            let w2 = b.get(Role::W2(i, j)).unwrap();
            let wa = b.get(Role::W(i + 1, j)).unwrap();
            let wb = b.get(Role::W(i, j + 1)).unwrap();
            b.le(format!("w2a[{i},{j}]"), w2, wa);
            b.le(format!("w2b[{i},{j}]"), w2, wb);
            let mut lin = Lin::default();
            lin.add(Some(wa), 1.0).add(Some(wb), 1.0).add(Some(w2), -1.0);
            b.con(format!("w2ab[{i},{j}]"), &lin, Relation::Le, 1.0);
            for l in [i, i + 1, j, j + 1] {
                let p2 = b.get(Role::Rw2(l, i, j)).unwrap();
                let pa = b.get(Role::Rw(l, i + 1, j)).unwrap();
                let pb = b.get(Role::Rw(l, i, j + 1)).unwrap();
                let r = b.r(l);
                let tag = format!("[{l},{i},{j}]");
                b.le(format!("rw2.w2{tag}"), p2, w2);
                b.le(format!("rw2.a{tag}"), p2, pa);
                b.le(format!("rw2.b{tag}"), p2, pb);
                let mut c = Lin::default();
                c.add(Some(wa), -1.0).add(Some(w2), 1.0).add(Some(pa), 1.0).add(Some(p2), -1.0);
                b.con(format!("rw2.wa{tag}"), &c, Relation::Le, 0.0);
                let mut c = Lin::default();
                c.add(Some(wb), -1.0).add(Some(w2), 1.0).add(Some(pb), 1.0).add(Some(p2), -1.0);
                b.con(format!("rw2.wb{tag}"), &c, Relation::Le, 0.0);
                let mut c = Lin::default();
                c.add(Some(r), -1.0).add(Some(pa), 1.0).add(Some(pb), 1.0).add(Some(p2), -1.0);
                b.con(format!("rw2.r{tag}"), &c, Relation::Le, 0.0);
                let mut c = Lin::default();
                c.add(Some(r), 1.0)
                    .add(Some(wa), 1.0)
                    .add(Some(wb), 1.0)
                    .add(Some(pa), -1.0)
                    .add(Some(pb), -1.0)
                    .add(Some(w2), -1.0)
                    .add(Some(p2), 1.0);
                b.con(format!("rw2.all{tag}"), &c, Relation::Le, 1.0);
            }
        }
    }
    for s in 2..=n {
        for t in 1..s {
            let (lo, hi) = (b.get(Role::W(s, t)).unwrap(), b.get(Role::W(s + 1, t)).unwrap());
            b.le(format!("mono_i[{s},{t}]"), lo, hi);
        }
    }
    for s in 3..=n + 1 {
        for t in 1..s - 1 {
            let (lo, hi) = (b.get(Role::W(s, t + 1)).unwrap(), b.get(Role::W(s, t)).unwrap());
            b.le(format!("mono_j[{s},{t}]"), lo, hi);
        }
    }

    let mut obj = Lin::default();
    for i in 1..=n {
        let area = cell_area(gauge, i, i)?;
        let form = diag_coeffs(gauge, i)?;
        obj.extend(&form_times(&b, &form, Mono::One, i, i), area);
    }
    for i in 2..=n {
        for j in 1..i {
            let area = 2.0 * cell_area(gauge, i, j)?;
            let cb = offdiag_bounds(gauge, i, j)?;
            // f1 wa wb + f0 (1 - wa)(1 - wb) + f_iota (wa (1 - wb) + (1 - wa) wb)
            let mut t = Lin::default();
            t.extend(&form_times(&b, &cb.f1, Mono::Both, i, j), 1.0);
            t.extend(&form_times(&b, &cb.f0, Mono::One, i, j), 1.0);
            t.extend(&form_times(&b, &cb.f0, Mono::A, i, j), -1.0);
            t.extend(&form_times(&b, &cb.f0, Mono::B, i, j), -1.0);
            t.extend(&form_times(&b, &cb.f0, Mono::Both, i, j), 1.0);
            t.extend(&form_times(&b, &cb.f_iota, Mono::A, i, j), 1.0);
            t.extend(&form_times(&b, &cb.f_iota, Mono::B, i, j), 1.0);
            t.extend(&form_times(&b, &cb.f_iota, Mono::Both, i, j), -2.0);
            obj.extend(&t, area);
        }
    }
    b.model.objective = Objective { terms: obj.terms(), constant: obj.constant };
    Ok(b.finish())
}

/// Monomials in the two corner indicators of cell `(i, j)`:
/// `wa = w(q_{i+1}, q_j)` and `wb = w(q_i, q_{j+1})`.
#[derive(Clone, Copy)]
enum Mono {
    One,
    A,
    B,
    Both,
}

/// Linearized `form * mono` for cell `(i, j)`. Products involving the fixed
/// diagonal value `w(q_i, q_i) = 0` vanish.
fn form_times(b: &Builder, form: &LinearForm, mono: Mono, i: usize, j: usize) -> Lin {
    let diag_b = j + 1 == i;
    let mut lin = Lin::default();
    match mono {
        Mono::One => {
            lin.add_const(form.constant);
            for &(l, c) in &form.terms {
                lin.add(Some(b.r(l)), c);
            }
        }
        Mono::A => {
            lin.add(b.get(Role::W(i + 1, j)), form.constant);
            for &(l, c) in &form.terms {
                lin.add(b.get(Role::Rw(l, i + 1, j)), c);
            }
        }
        Mono::B | Mono::Both if diag_b => {}
        Mono::B => {
            lin.add(b.get(Role::W(i, j + 1)), form.constant);
            for &(l, c) in &form.terms {
                lin.add(b.get(Role::Rw(l, i, j + 1)), c);
            }
        }
        Mono::Both => {
            lin.add(b.get(Role::W2(i, j)), form.constant);
            for &(l, c) in &form.terms {
                lin.add(b.get(Role::Rw2(l, i, j)), c);
            }
        }
    }
    lin
}
