//! Solver contract: a built-in enumeration solver for tiny models and an
//! external backend driven through MPS files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, Solution, SolveOutcome, Variable};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{mps::to_mps, MilpModel, Relation, Role};

/// Largest binary count the enumeration solvers accept.
pub const MAX_REFERENCE_BINARIES: usize = 36;

/// Largest binary count for exhaustive enumeration over all 0/1 patterns.
pub const MAX_BRUTE_FORCE_BINARIES: usize = 20;

/// Environment variable naming the backend when no flag is given.
pub const BACKEND_ENV: &str = "ERM_BACKEND";

/// Environment variable with the path of the HiGHS driver executable.
pub const HIGHS_ENV: &str = "ERM_HIGHS";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("solver error: {0}")]
    SolverError(String),
    #[error("model has {binaries} binaries; the reference solver takes at most {max}")]
    TooLarge { binaries: usize, max: usize },
    #[error("result carries no dual bound")]
    NoBound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backend {
    /// Enumerates monotone `w` patterns and solves an LP for each.
    Reference,
    /// Enumerates every 0/1 pattern; for cross-checks only.
    BruteForce,
    /// External executable speaking the file-and-flags contract.
    External(PathBuf),
}

impl Backend {
    /// Parses `reference`, `brute-force`, `highs` or an executable path.
    /// `highs` resolves through `ERM_HIGHS`, then an `erm-highs` executable
    /// next to the running program.
    pub fn parse(spec: &str) -> Result<Backend, SolveError> {
        match spec {
            "reference" => Ok(Backend::Reference),
            "brute-force" | "bruteforce" => Ok(Backend::BruteForce),
            "highs" => locate_highs().map(Backend::External),
            path => {
                let p = PathBuf::from(path);
                if p.is_file() {
                    Ok(Backend::External(p))
                } else {
                    Err(SolveError::BackendUnavailable(format!("no backend named {path:?}")))
                }
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            Backend::Reference => "reference".into(),
            Backend::BruteForce => "brute-force".into(),
            Backend::External(p) => p.display().to_string(),
        }
    }
}

/// Finds the HiGHS driver executable.
pub fn locate_highs() -> Result<PathBuf, SolveError> {
    if let Ok(p) = std::env::var(HIGHS_ENV) {
        let p = PathBuf::from(p);
        return if p.is_file() {
            Ok(p)
        } else {
            Err(SolveError::BackendUnavailable(format!("{HIGHS_ENV}={} is not a file", p.display())))
        };
    }
    let exe = std::env::current_exe().map_err(|e| SolveError::BackendUnavailable(e.to_string()))?;
    let mut dirs: Vec<PathBuf> = exe.parent().map(Path::to_path_buf).into_iter().collect();
    // test harnesses live one level below the executables
    if let Some(up) = exe.parent().and_then(Path::parent) {
        dirs.push(up.to_path_buf());
    }
    for d in dirs {
        let candidate = d.join(format!("erm-highs{}", std::env::consts::EXE_SUFFIX));
        if candidate.is_file() {
            return Ok(candidate);
        }
    }
    Err(SolveError::BackendUnavailable("erm-highs not found; set ERM_HIGHS".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub relative_gap: f64,
    /// Seconds; `None` for no limit.
    pub time_limit: Option<f64>,
    pub threads: usize,
    pub backend: Backend,
    /// Directory for exchange files of external backends.
    pub work_dir: Option<PathBuf>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { relative_gap: 0.002, time_limit: None, threads: 1, backend: Backend::Reference, work_dir: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    GapReached,
    TimeLimit,
    Infeasible,
}

/// Files exchanged with an external backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditPaths {
    pub backend: PathBuf,
    pub model: PathBuf,
    pub solution: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub incumbent_value: Option<f64>,
    /// Values indexed by variable id; empty without an incumbent.
    pub incumbent: Vec<f64>,
    /// Proven lower bound on the minimum.
    pub dual_bound: Option<f64>,
    pub gap: f64,
    pub runtime: f64,
    pub audit: Option<AuditPaths>,
}

impl SolveResult {
    fn infeasible(runtime: f64) -> Self {
        Self {
            status: SolveStatus::Infeasible,
            incumbent_value: None,
            incumbent: Vec::new(),
            dual_bound: None,
            gap: 0.0,
            runtime,
            audit: None,
        }
    }
}

pub fn relative_gap(incumbent: f64, dual: f64) -> f64 {
    (incumbent - dual) / incumbent.abs().max(1e-10)
}

pub fn solve(model: &MilpModel, options: &SolveOptions) -> Result<SolveResult, SolveError> {
    match &options.backend {
        Backend::Reference => reference_solve(model),
        Backend::BruteForce => brute_force_solve(model),
        Backend::External(exe) => external_solve(model, options, exe),
    }
}

/// The certified lower bound on the model's minimum: the proven dual bound.
pub fn certified_bound(result: &SolveResult) -> Result<f64, SolveError> {
    match (result.status, result.dual_bound) {
        (SolveStatus::Infeasible, _) | (_, None) => Err(SolveError::NoBound),
        (_, Some(d)) => Ok(d),
    }
}

/// LP with binaries relaxed to `[0, 1]` except those fixed in `fixed`.
fn build_lp(model: &MilpModel, fixed: &[Option<f64>]) -> (Problem, Vec<Variable>) {
    let mut obj = vec![0.0; model.variables.len()];
    for &(v, c) in &model.objective.terms {
        obj[v] += c;
    }
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = model
        .variables
        .iter()
        .map(|v| {
            let (lb, ub) = match fixed[v.id] {
                Some(x) => (x, x),
                None => v.kind.bounds(),
            };
            lp.add_var(obj[v.id], (lb, ub))
        })
        .collect();
    for c in &model.constraints {
        let mut expr = LinearExpr::empty();
        for &(v, coef) in &c.terms {
            expr.add(vars[v], coef);
        }
        let op = match c.relation {
            Relation::Le => ComparisonOp::Le,
            Relation::Ge => ComparisonOp::Ge,
            Relation::Eq => ComparisonOp::Eq,
        };
        lp.add_constraint(expr, op, c.rhs);
    }
    (lp, vars)
}

fn lp_result(outcome: Result<SolveOutcome, microlp::Error>) -> Result<Option<Solution>, SolveError> {
    match outcome {
        Ok(outcome) => outcome.into_solution().map(Some).map_err(|_| SolveError::SolverError("LP interrupted".into())),
        Err(microlp::Error::Infeasible) => Ok(None),
        Err(e) => Err(SolveError::SolverError(e.to_string())),
    }
}

/// LP over the continuous variables with every binary fixed to `pattern`.
fn solve_fixed(model: &MilpModel, binaries: &[usize], pattern: &[f64]) -> Result<Option<(f64, Vec<f64>)>, SolveError> {
    let mut fixed: Vec<Option<f64>> = vec![None; model.variables.len()];
    for (&v, &x) in binaries.iter().zip(pattern) {
        fixed[v] = Some(x);
    }
    let (lp, vars) = build_lp(model, &fixed);
    Ok(lp_result(lp.solve())?.map(|sol| {
        let values: Vec<f64> = vars.iter().map(|&v| sol.var_value(v)).collect();
        (sol.objective() + model.objective.constant, values)
    }))
}

/// Binary `w` variables in enumeration order (first index ascending, second
/// descending) with, for each, the earlier positions it must dominate.
fn monotone_order(model: &MilpModel) -> (Vec<usize>, Vec<Vec<usize>>) {
    let mut cells: Vec<(usize, usize, usize)> = model
        .roles()
        .filter_map(|(r, v)| match r {
            Role::W(s, t) => Some((s, t, v)),
            _ => None,
        })
        .collect();
    cells.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
    let pos: BTreeMap<(usize, usize), usize> = cells.iter().enumerate().map(|(p, c)| ((c.0, c.1), p)).collect();
    let preds = cells
        .iter()
        .map(|&(s, t, _)| [(s - 1, t), (s, t + 1)].iter().filter_map(|k| pos.get(k).copied()).collect())
        .collect();
    (cells.iter().map(|c| c.2).collect(), preds)
}

/// Every 0/1 pattern on the `w` grid that is non-decreasing in the first
/// index and non-increasing in the second.
pub fn monotone_patterns(model: &MilpModel) -> (Vec<usize>, Vec<Vec<f64>>) {
    let (order, preds) = monotone_order(model);
    let mut out = Vec::new();
    let mut cur = vec![0.0; order.len()];
    fn dfs(p: usize, preds: &[Vec<usize>], cur: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if p == cur.len() {
            out.push(cur.clone());
            return;
        }
        let forced = preds[p].iter().any(|&q| cur[q] > 0.5);
        if !forced {
            cur[p] = 0.0;
            dfs(p + 1, preds, cur, out);
        }
        cur[p] = 1.0;
        dfs(p + 1, preds, cur, out);
    }
    dfs(0, &preds, &mut cur, &mut out);
    (order, out)
}

fn enumerate(model: &MilpModel, binaries: &[usize], patterns: &[Vec<f64>]) -> Result<SolveResult, SolveError> {
    let start = Instant::now();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for pattern in patterns {
        if let Some((value, values)) = solve_fixed(model, binaries, pattern)? {
            if best.as_ref().is_none_or(|(b, _)| value < *b) {
                best = Some((value, values));
            }
        }
    }
    let runtime = start.elapsed().as_secs_f64();
    Ok(match best {
        Some((value, values)) => SolveResult {
            status: SolveStatus::Optimal,
            incumbent_value: Some(value),
            incumbent: values,
            dual_bound: Some(value),
            gap: 0.0,
            runtime,
            audit: None,
        },
        None => SolveResult::infeasible(runtime),
    })
}

/// Exact minimum by depth-first branch and bound over monotone `w`
/// patterns, with the LP relaxation of each partial pattern as its bound.
pub fn reference_solve(model: &MilpModel) -> Result<SolveResult, SolveError> {
    let b = model.binaries().len();
    if b > MAX_REFERENCE_BINARIES {
        return Err(SolveError::TooLarge { binaries: b, max: MAX_REFERENCE_BINARIES });
    }
    let start = Instant::now();
    let (order, preds) = monotone_order(model);

    struct Search<'a> {
        model: &'a MilpModel,
        order: &'a [usize],
        preds: &'a [Vec<usize>],
        pattern: Vec<f64>,
        best: Option<(f64, Vec<f64>)>,
    }

    impl Search<'_> {
        fn visit(&mut self, p: usize) -> Result<(), SolveError> {
            let mut fixed: Vec<Option<f64>> = vec![None; self.model.variables.len()];
            for (&v, &x) in self.order[..p].iter().zip(&self.pattern) {
                fixed[v] = Some(x);
            }
            let (lp, vars) = build_lp(self.model, &fixed);
            let Some(sol) = lp_result(lp.solve())? else {
                return Ok(());
            };
            let bound = sol.objective();
            if self.best.as_ref().is_some_and(|(v, _)| bound >= *v - 1e-12 * v.abs().max(1.0)) {
                return Ok(());
            }
            let rest: Vec<f64> = self.order[p..].iter().map(|&v| sol.var_value(vars[v])).collect();
            if rest.iter().all(|x| x.min(1.0 - x).abs() <= 1e-9) {
                let mut pattern = self.pattern[..p].to_vec();
                pattern.extend(rest.iter().map(|x| x.round()));
                self.best = Some((bound, pattern));
                return Ok(());
            }
            let forced = self.preds[p].iter().any(|&q| self.pattern[q] > 0.5);
            let choices: &[f64] = if forced { &[1.0] } else { &[0.0, 1.0] };
            for &x in choices {
                self.pattern[p] = x;
                self.visit(p + 1)?;
            }
            Ok(())
        }
    }

    let mut search = Search { model, order: &order, preds: &preds, pattern: vec![0.0; order.len()], best: None };
    search.visit(0)?;
    // re-solve the winning pattern from scratch for clean values
    let best = match search.best {
        Some((_, pattern)) => solve_fixed(model, &order, &pattern)?,
        None => None,
    };
    let runtime = start.elapsed().as_secs_f64();
    Ok(match best {
        Some((value, values)) => SolveResult {
            status: SolveStatus::Optimal,
            incumbent_value: Some(value),
            incumbent: values,
            dual_bound: Some(value),
            gap: 0.0,
            runtime,
            audit: None,
        },
        None => SolveResult::infeasible(runtime),
    })
}

/// Exact minimum by enumerating all `2^b` binary patterns.
pub fn brute_force_solve(model: &MilpModel) -> Result<SolveResult, SolveError> {
    let binaries = model.binaries();
    let b = binaries.len();
    if b > MAX_BRUTE_FORCE_BINARIES {
        return Err(SolveError::TooLarge { binaries: b, max: MAX_BRUTE_FORCE_BINARIES });
    }
    let patterns: Vec<Vec<f64>> = (0u64..1 << b).map(|m| (0..b).map(|i| ((m >> i) & 1) as f64).collect()).collect();
    enumerate(model, &binaries, &patterns)
}

/// Solution file written by an external backend.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendSolution {
    pub status: String,
    pub objective: Option<f64>,
    pub dual_bound: Option<f64>,
    pub gap: Option<f64>,
    pub runtime: f64,
    #[serde(default)]
    pub values: BTreeMap<String, f64>,
}

static EXCHANGE_COUNTER: AtomicU64 = AtomicU64::new(0);

fn exchange_dir(options: &SolveOptions) -> Result<PathBuf, SolveError> {
    let base = options.work_dir.clone().unwrap_or_else(|| std::env::temp_dir().join("erm-exchange"));
    let n = EXCHANGE_COUNTER.fetch_add(1, Ordering::Relaxed);
    let dir = base.join(format!("p{}-{n}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| SolveError::SolverError(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

/// Hands the model to an external executable:
/// `exe --model m.mps --solution s.json --gap g [--time-limit t] --threads n`.
pub fn external_solve(model: &MilpModel, options: &SolveOptions, exe: &Path) -> Result<SolveResult, SolveError> {
    if !exe.is_file() {
        return Err(SolveError::BackendUnavailable(exe.display().to_string()));
    }
    let dir = exchange_dir(options)?;
    let model_path = dir.join("model.mps");
    let solution_path = dir.join("solution.json");
    let io = |e: std::io::Error| SolveError::SolverError(e.to_string());
    std::fs::write(&model_path, to_mps(model, "erm")).map_err(io)?;
    log::info!("backend {} model {} solution {}", exe.display(), model_path.display(), solution_path.display());

    let mut cmd = Command::new(exe);
    cmd.arg("--model")
        .arg(&model_path)
        .arg("--solution")
        .arg(&solution_path)
        .arg("--gap")
        .arg(options.relative_gap.to_string())
        .arg("--threads")
        .arg(options.threads.max(1).to_string());
    if let Some(t) = options.time_limit {
        cmd.arg("--time-limit").arg(t.to_string());
    }
    let output = cmd.output().map_err(|e| SolveError::BackendUnavailable(format!("{}: {e}", exe.display())))?;
    if !output.status.success() {
        return Err(SolveError::SolverError(format!(
            "{} exited with {}: {}",
            exe.display(),
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }
    let text = std::fs::read_to_string(&solution_path).map_err(io)?;
    let sol: BackendSolution =
        serde_json::from_str(&text).map_err(|e| SolveError::SolverError(format!("bad solution file: {e}")))?;
    let audit = Some(AuditPaths { backend: exe.to_path_buf(), model: model_path, solution: solution_path });
    parse_backend_solution(model, sol, audit)
}

fn parse_backend_solution(
    model: &MilpModel,
    sol: BackendSolution,
    audit: Option<AuditPaths>,
) -> Result<SolveResult, SolveError> {
    let status = match sol.status.as_str() {
        "Optimal" => SolveStatus::Optimal,
        "GapReached" => SolveStatus::GapReached,
        "TimeLimit" => SolveStatus::TimeLimit,
        "Infeasible" => {
            return Ok(SolveResult { audit, ..SolveResult::infeasible(sol.runtime) });
        }
        other => return Err(SolveError::SolverError(format!("backend status {other}"))),
    };
    let incumbent = if sol.values.is_empty() {
        Vec::new()
    } else {
        model
            .variables
            .iter()
            .map(|v| {
                sol.values
                    .get(&v.name)
                    .copied()
                    .ok_or_else(|| SolveError::SolverError(format!("solution lacks {}", v.name)))
            })
            .collect::<Result<Vec<_>, _>>()?
    };
    let dual_bound = match (sol.dual_bound, sol.objective) {
        (Some(d), Some(o)) => Some(d.min(o)),
        (d, _) => d,
    };
    let gap = match (sol.objective, dual_bound) {
        (Some(o), Some(d)) => relative_gap(o, d),
        _ => sol.gap.unwrap_or(f64::INFINITY),
    };
    Ok(SolveResult { status, incumbent_value: sol.objective, incumbent, dual_bound, gap, runtime: sol.runtime, audit })
}
