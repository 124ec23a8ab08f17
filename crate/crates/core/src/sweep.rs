//! Per-k sweeps over both model families, their aggregates, and run
//! directories with checkpoint resume.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bisample::{ratio, Enclosure};
use crate::curve::RevenueCurve;
use crate::gauge::{lower_gauge, Weighting};
use crate::model::{build_lower_model, build_upper_model, extract_curve, MilpModel};
use crate::solve::{certified_bound, solve, AuditPaths, SolveOptions, SolveStatus};

/// Enclosure tolerance for exact re-evaluation of primal curves.
pub const REEVAL_TOL: f64 = 1e-6;

/// Feasibility tolerance when reading a curve back from solver output.
pub const EXTRACT_TOL: f64 = 1e-5;

/// Relative gap used for square-weighted gauges with `k <= N/10`.
pub const COARSE_GAP: f64 = 0.01;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("bad parameters: {0}")]
    BadParameters(String),
    #[error("io error at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed file {path}: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("run directory holds a different configuration")]
    ConfigMismatch,
    #[error("report mismatch: {0}")]
    Mismatch(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SweepError + '_ {
    move |source| SweepError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepFamily {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub riemann_error: f64,
    pub normalization_loss: f64,
}

pub fn error_budget(n: usize) -> ErrorBudget {
    let nf = n as f64;
    ErrorBudget {
        riemann_error: 2.0 / (nf - 1.0) + (5.0 * nf - 6.0) / (nf * nf),
        normalization_loss: (nf - 1.0) / (nf + 1.0),
    }
}

/// Everything that determines a sweep's results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub family: SweepFamily,
    pub n: usize,
    /// Number of optimal-interval positions (lower family only).
    pub big_n: Option<usize>,
    pub weighting: Option<Weighting>,
    /// Inclusive k range; `None` for the full range.
    pub k_range: Option<(usize, usize)>,
    pub relative_gap: f64,
    /// Apply the coarse gap to square-weighted gauges with small k.
    pub tiered_gap: bool,
    pub time_limit: Option<f64>,
    pub backend: String,
}

impl SweepConfig {
    pub fn upper(n: usize, solve: &SolveOptions) -> Self {
        Self {
            family: SweepFamily::Upper,
            n,
            big_n: None,
            weighting: None,
            k_range: None,
            relative_gap: solve.relative_gap,
            tiered_gap: false,
            time_limit: solve.time_limit,
            backend: solve.backend.name(),
        }
    }

    pub fn lower(n: usize, big_n: usize, weighting: Weighting, solve: &SolveOptions) -> Self {
        Self {
            family: SweepFamily::Lower,
            n,
            big_n: Some(big_n),
            weighting: Some(weighting),
            k_range: None,
            relative_gap: solve.relative_gap,
            tiered_gap: true,
            time_limit: solve.time_limit,
            backend: solve.backend.name(),
        }
    }

    fn k_max(&self) -> usize {
        match self.family {
            SweepFamily::Upper => self.n + 1,
            SweepFamily::Lower => self.big_n.unwrap_or(0),
        }
    }

    pub fn ks(&self) -> Vec<usize> {
        let (lo, hi) = self.k_range.unwrap_or((1, self.k_max()));
        (lo.max(1)..=hi.min(self.k_max())).collect()
    }

    pub fn is_full_range(&self) -> bool {
        self.ks().len() == self.k_max()
    }

    /// Relative gap for one k under the tier rule.
    pub fn gap_for(&self, k: usize) -> f64 {
        match (self.tiered_gap, self.weighting, self.big_n) {
            (true, Some(Weighting::SquareWeighted), Some(big_n)) if 10 * k <= big_n => {
                self.relative_gap.max(COARSE_GAP)
            }
            _ => self.relative_gap,
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |m: String| Err(SweepError::BadParameters(m));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if !(0.0..1.0).contains(&self.relative_gap) {
            return bad(format!("relative gap {} outside [0, 1)", self.relative_gap));
        }
        if self.family == SweepFamily::Lower {
            match (self.big_n, self.weighting) {
                (Some(b), Some(_)) if b >= 1 => {}
                _ => return bad("lower sweep needs N >= 1 and a weighting".into()),
            }
        }
        if self.ks().is_empty() {
            return bad("empty k range".into());
        }
        Ok(())
    }
}

/// Shape of the gauge a record was solved on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeSummary {
    pub intervals: usize,
    pub opt_interval: (f64, f64),
    pub split: Option<usize>,
}

/// Outcome for one k. Wall-clock data lives in [`Timing`] so that these
/// records are reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KRecord {
    pub k: usize,
    pub gauge: GaugeSummary,
    pub relative_gap: f64,
    pub status: Option<SolveStatus>,
    pub incumbent: Option<f64>,
    pub dual_bound: Option<f64>,
    pub certified: Option<f64>,
    pub primal_curve: Option<RevenueCurve>,
    /// Ratio enclosure of the primal curve.
    pub exact_reevaluation: Option<Enclosure>,
    pub error: Option<String>,
}

impl KRecord {
    pub fn failed(&self) -> bool {
        self.certified.is_none()
    }

    /// Position of the optimal quantile used on plot axes.
    pub fn q_opt(&self, family: SweepFamily) -> f64 {
        match family {
            SweepFamily::Upper => self.gauge.opt_interval.0,
            SweepFamily::Lower => 0.5 * (self.gauge.opt_interval.0 + self.gauge.opt_interval.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub k: usize,
    pub runtime: f64,
    pub audit: Option<AuditPaths>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// Minimum certified bound over k (lower family).
    pub alpha_lower: Option<f64>,
    /// Minimum exact re-evaluation upper end over k (upper family).
    pub best_upper: Option<f64>,
    pub best_k: Option<usize>,
    /// Minimum model value over k.
    pub min_model_value: Option<f64>,
    /// Minimum certified model value minus the Riemann error (upper family).
    pub implied_lower: Option<f64>,
    pub budget: ErrorBudget,
    pub completed: usize,
    pub failed: Vec<usize>,
    /// False when the lower aggregate misses some k and so certifies nothing.
    pub certifying: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub config: SweepConfig,
    pub records: Vec<KRecord>,
    pub aggregate: Aggregate,
}

fn min_by_key<T: Copy>(items: impl Iterator<Item = (f64, T)>) -> Option<(f64, T)> {
    items.fold(None, |best, (v, t)| match best {
        Some((b, _)) if b <= v => best,
        _ => Some((v, t)),
    })
}

/// Aggregate recomputed from records; records must be sorted by k.
pub fn aggregate(config: &SweepConfig, records: &[KRecord]) -> Aggregate {
    let budget = error_budget(config.n);
    let done: Vec<&KRecord> = records.iter().filter(|r| !r.failed()).collect();
    let failed: Vec<usize> = records.iter().filter(|r| r.failed()).map(|r| r.k).collect();
    let min_model_value = done.iter().filter_map(|r| r.incumbent).reduce(f64::min);
    let min_certified = min_by_key(done.iter().filter_map(|r| r.certified.map(|c| (c, r.k))));
    match config.family {
        SweepFamily::Upper => {
            let best = min_by_key(done.iter().filter_map(|r| r.exact_reevaluation.map(|e| (e.upper, r.k))));
            Aggregate {
                alpha_lower: None,
                best_upper: best.map(|b| b.0),
                best_k: best.map(|b| b.1),
                min_model_value,
                implied_lower: min_certified
                    .filter(|_| failed.is_empty() && done.len() == config.k_max())
                    .map(|(c, _)| c - budget.riemann_error),
                budget,
                completed: done.len(),
                failed,
                certifying: true,
            }
        }
        SweepFamily::Lower => {
            let complete = config.is_full_range() && done.len() == config.k_max();
            Aggregate {
                alpha_lower: min_certified.map(|c| c.0),
                best_upper: None,
                best_k: min_certified.map(|c| c.1),
                min_model_value,
                implied_lower: None,
                budget,
                completed: done.len(),
                failed,
                certifying: complete,
            }
        }
    }
}

fn summarize(model: &MilpModel, opt: usize, split: Option<usize>) -> GaugeSummary {
    GaugeSummary {
        intervals: model.n(),
        opt_interval: (model.q(opt), model.breakpoints.get(opt).copied().unwrap_or(1.0)),
        split,
    }
}

/// Builds and solves the model for one k.
pub fn solve_one(config: &SweepConfig, solve_options: &SolveOptions, k: usize) -> (KRecord, Timing) {
    let start = Instant::now();
    let gap = config.gap_for(k);
    let built = match config.family {
        SweepFamily::Upper => build_upper_model(config.n, k).map(|m| {
            let g = summarize(&m, k, None);
            (m, g)
        }),
        SweepFamily::Lower => {
            let weighting = config.weighting.unwrap_or(Weighting::ApproxUniform);
            lower_gauge(config.n, config.big_n.unwrap_or(1), k, weighting)
                .map_err(Into::into)
                .and_then(|g| build_lower_model(&g).map(|m| (m, g)))
                .map(|(m, g)| {
                    let s = summarize(&m, g.opt_index, g.split);
                    (m, s)
                })
        }
    };
    let mut record = KRecord {
        k,
        gauge: GaugeSummary { intervals: config.n, opt_interval: (0.0, 0.0), split: None },
        relative_gap: gap,
        status: None,
        incumbent: None,
        dual_bound: None,
        certified: None,
        primal_curve: None,
        exact_reevaluation: None,
        error: None,
    };
    let mut timing = Timing { k, runtime: 0.0, audit: None };
    let (model, gauge) = match built {
        Ok(x) => x,
        Err(e) => {
            record.error = Some(e.to_string());
            return (record, timing);
        }
    };
    record.gauge = gauge;
    let options = SolveOptions { relative_gap: gap, time_limit: config.time_limit, ..solve_options.clone() };
    match solve(&model, &options) {
        Ok(result) => {
            record.status = Some(result.status);
            record.incumbent = result.incumbent_value;
            record.dual_bound = result.dual_bound;
            timing.audit = result.audit.clone();
            match certified_bound(&result) {
                Ok(c) => record.certified = Some(c),
                Err(e) => record.error = Some(e.to_string()),
            }
            if !result.incumbent.is_empty() {
                match extract_curve(&model, &result.incumbent, EXTRACT_TOL) {
                    Ok(curve) => {
                        record.exact_reevaluation = ratio(&curve, REEVAL_TOL).ok();
                        record.primal_curve = Some(curve);
                    }
                    Err(e) => log::warn!("k={k}: primal curve unavailable: {e}"),
                }
            }
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    if config.family == SweepFamily::Upper && record.exact_reevaluation.is_none() && record.error.is_none() {
        record.error = Some("no primal curve to re-evaluate".into());
        record.certified = None;
    }
    timing.runtime = start.elapsed().as_secs_f64();
    log::info!("k={k} status={:?} certified={:?} runtime={:.2}s", record.status, record.certified, timing.runtime);
    (record, timing)
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    pub solve: SolveOptions,
    pub workers: usize,
    /// Persist config, checkpoints and reports here; resume from it if present.
    pub run_dir: Option<PathBuf>,
    /// Set to stop handing out new k values.
    pub cancel: Option<Arc<AtomicBool>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Checkpoint {
    record: KRecord,
    timing: Timing,
}

pub fn run_upper_sweep(n: usize, options: &SweepOptions) -> Result<BoundReport, SweepError> {
    run_sweep(&SweepConfig::upper(n, &options.solve), options)
}

pub fn run_lower_sweep(
    n: usize,
    big_n: usize,
    weighting: Weighting,
    options: &SweepOptions,
) -> Result<BoundReport, SweepError> {
    run_sweep(&SweepConfig::lower(n, big_n, weighting, &options.solve), options)
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), SweepError> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("serializable");
    s.push(b'\n');
    s
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, SweepError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| SweepError::Malformed { path: path.to_path_buf(), message: e.to_string() })
}

fn checkpoint_dir(run_dir: &Path) -> PathBuf {
    run_dir.join("checkpoints")
}

fn load_checkpoints(run_dir: &Path) -> Result<BTreeMap<usize, Checkpoint>, SweepError> {
    let dir = checkpoint_dir(run_dir);
    let mut out = BTreeMap::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
        let path = entry.map_err(io_err(&dir))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            let c: Checkpoint = read_json(&path)?;
            out.insert(c.record.k, c);
        }
    }
    Ok(out)
}

/// Runs every pending k of `config`, resuming from the run directory when
/// one is given. Failed k values are retried on resume.
pub fn run_sweep(config: &SweepConfig, options: &SweepOptions) -> Result<BoundReport, SweepError> {
    config.validate()?;
    let mut done: BTreeMap<usize, Checkpoint> = BTreeMap::new();
    if let Some(dir) = &options.run_dir {
        fs::create_dir_all(checkpoint_dir(dir)).map_err(io_err(dir))?;
        let config_path = dir.join("config.json");
        if config_path.exists() {
            let existing: SweepConfig = read_json(&config_path)?;
            if &existing != config {
                return Err(SweepError::ConfigMismatch);
            }
        } else {
            write_atomic(&config_path, &to_json(config))?;
        }
        done = load_checkpoints(dir)?;
        done.retain(|_, c| !c.record.failed());
        if !done.is_empty() {
            log::info!("resuming with {} completed k values", done.len());
        }
    }
    let pending: Vec<usize> = config.ks().into_iter().filter(|k| !done.contains_key(k)).collect();
    let cancel = options.cancel.clone().unwrap_or_default();
    let workers = options.workers.max(1).min(pending.len().max(1));
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<Checkpoint>();

    let mut write_error = None;
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, pending, cancel) = (&next, &pending, &cancel);
            scope.spawn(move || loop {
                if cancel.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&k) = pending.get(i) else { break };
                let (record, timing) = solve_one(config, &options.solve, k);
                if tx.send(Checkpoint { record, timing }).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for c in rx {
            if cancel.load(Ordering::SeqCst) && c.record.failed() {
                // interrupted solves are redone on resume
                continue;
            }
            if let (Some(dir), None) = (&options.run_dir, &write_error) {
                let path = checkpoint_dir(dir).join(format!("k{:05}.json", c.record.k));
                if let Err(e) = write_atomic(&path, &to_json(&c)) {
                    write_error = Some(e);
                    cancel.store(true, Ordering::SeqCst);
                }
            }
            done.insert(c.record.k, c);
        }
    });
    if let Some(e) = write_error {
        return Err(e);
    }

    let records: Vec<KRecord> = done.values().map(|c| c.record.clone()).collect();
    let report = BoundReport { config: config.clone(), aggregate: aggregate(config, &records), records };
    if let Some(dir) = &options.run_dir {
        let timings: Vec<Timing> = done.values().map(|c| c.timing.clone()).collect();
        write_run_files(dir, &report, &timings)?;
    }
    Ok(report)
}

fn jsonl<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("serializable");
        out.push(b'\n');
    }
    out
}

pub const REPORT_FILES: [&str; 3] = ["config.json", "records.jsonl", "summary.json"];

/// Writes records, summary, timings and the manifest of content hashes.
pub fn write_run_files(dir: &Path, report: &BoundReport, timings: &[Timing]) -> Result<(), SweepError> {
    write_atomic(&dir.join("config.json"), &to_json(&report.config))?;
    write_atomic(&dir.join("records.jsonl"), &jsonl(&report.records))?;
    write_atomic(&dir.join("summary.json"), &to_json(&report.aggregate))?;
    write_atomic(&dir.join("timings.jsonl"), &jsonl(timings))?;
    let mut manifest = BTreeMap::new();
    for name in REPORT_FILES {
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        manifest.insert(name.to_string(), sha256_hex(&bytes));
    }
    write_atomic(&dir.join("manifest.json"), &to_json(&manifest))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Loads a run directory, checks the manifest, and recomputes the aggregate.
pub fn load_report(dir: &Path) -> Result<BoundReport, SweepError> {
    let manifest: BTreeMap<String, String> = read_json(&dir.join("manifest.json"))?;
    for name in REPORT_FILES {
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let expected = manifest.get(name).ok_or_else(|| SweepError::Mismatch(format!("manifest lacks {name}")))?;
        if &sha256_hex(&bytes) != expected {
            return Err(SweepError::Mismatch(format!("{name} does not match its manifest hash")));
        }
    }
    let config: SweepConfig = read_json(&dir.join("config.json"))?;
    let path = dir.join("records.jsonl");
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let records = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect::<Result<Vec<KRecord>, _>>()
        .map_err(|e| SweepError::Malformed { path: path.clone(), message: e.to_string() })?;
    if records.windows(2).any(|w| w[0].k >= w[1].k) {
        return Err(SweepError::Mismatch("records are not sorted by k".into()));
    }
    let stored: Aggregate = read_json(&dir.join("summary.json"))?;
    let recomputed = aggregate(&config, &records);
    if stored != recomputed {
        return Err(SweepError::Mismatch(format!(
            "summary disagrees with records: stored {stored:?}, recomputed {recomputed:?}"
        )));
    }
    Ok(BoundReport { config, records, aggregate: recomputed })
}

/// Figure series: `q_opt_midpoint,model_value,certified_or_exact`.
pub fn plot_csv(report: &BoundReport) -> String {
    let mut out = String::from("q_opt_midpoint,model_value,certified_or_exact\n");
    let cell = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
    for r in &report.records {
        let third = match report.config.family {
            SweepFamily::Upper => r.exact_reevaluation.map(|e| e.upper),
            SweepFamily::Lower => r.certified,
        };
        out.push_str(&format!("{:?},{},{}\n", r.q_opt(report.config.family), cell(r.incumbent), cell(third)));
    }
    out
}
