//! Acceptance suite. Prints one line per criterion and exits nonzero if any
//! criterion fails. Pass criterion numbers as arguments to run a subset;
//! criterion 10 runs only with `ERM_ACCEPTANCE_FULL=1`.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use erm_bounds::bisample::{erm_revenue_enclosure, ratio};
use erm_bounds::curve::{validate_curve, RevenueCurve};
use erm_bounds::gauge::{lower_gauge, Weighting};
use erm_bounds::gridsearch::{eta_grid, GridSpec};
use erm_bounds::model::{build_lower_model, build_upper_model, MilpModel};
use erm_bounds::selfcheck::{random_gauge_containing, random_hull_curve, rng, w_monotonicity_violations};
use erm_bounds::solve::{brute_force_solve, reference_solve, solve, Backend, SolveOptions};
use erm_bounds::sweep::{error_budget, run_lower_sweep, run_upper_sweep, SweepOptions, Timing};

type Outcome = Result<String, String>;
type Criterion = (u32, f64, fn() -> Outcome);

fn highs() -> Backend {
    Backend::External(PathBuf::from(env!("CARGO_BIN_EXE_erm-highs")))
}

fn tmp(name: &str) -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name)
}

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: f64, start: Instant, outcome: Outcome) -> Outcome {
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(d) if secs < limit => Ok(d),
        Ok(d) => Err(format!("{d}; took {secs:.1}s, limit {limit}s")),
        e => e,
    }
}

fn affine_integral() -> Outcome {
    let dir = tmp("c1");
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let path = dir.join("affine.json");
    std::fs::write(&path, r#"{"knots":[0.0,1.0],"values":[1.0,0.0]}"#).map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_erm"))
        .args(["eval", "--curve"])
        .arg(&path)
        .args(["--tol", "1e-6"])
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("eval exited with {}", out.status));
    }
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let (lo, hi) = (v["lower"].as_f64().unwrap_or(f64::NAN), v["upper"].as_f64().unwrap_or(f64::NAN));
    check(hi - lo <= 1e-6 && lo <= 2.0 / 3.0 && 2.0 / 3.0 <= hi, format!("[{lo}, {hi}]"))
}

fn constant_curve() -> Outcome {
    let c = validate_curve(vec![0.0, 1.0], vec![1.0, 1.0]).map_err(|e| e.to_string())?;
    let r = ratio(&c, 1e-6).map_err(|e| e.to_string())?;
    check(r.contains(1.0) && r.width() <= 1e-6, format!("[{}, {}]", r.lower, r.upper))
}

fn known_curve() -> Outcome {
    let c: RevenueCurve =
        serde_json::from_str(include_str!("../../core/tests/data/n80_k45.json")).map_err(|e| e.to_string())?;
    let r = ratio(&c, 1e-6).map_err(|e| e.to_string())?;
    check(r.converged && (r.midpoint() - 0.61035).abs() <= 5e-4, format!("[{}, {}]", r.lower, r.upper))
}

fn budget() -> Outcome {
    let e = error_budget(80).riemann_error;
    check((0.0868..=0.0869).contains(&e), format!("riemann_error {e}"))
}

fn oracle_models(max_upper: usize, max_lower: usize) -> Vec<(String, MilpModel)> {
    let mut out = Vec::new();
    for n in 1..=max_upper {
        for k in 1..=n + 1 {
            if let Ok(m) = build_upper_model(n, k) {
                out.push((format!("upper n={n} k={k}"), m));
            }
        }
    }
    for n in 1..=max_lower {
        for w in [Weighting::Uniform, Weighting::ApproxUniform, Weighting::SquareWeighted] {
            for k in 1..=10 {
                if let Ok(m) = lower_gauge(n, 10, k, w)
                    .map_err(|e| e.to_string())
                    .and_then(|g| build_lower_model(&g).map_err(|e| e.to_string()))
                {
                    out.push((format!("lower n={n} N=10 {w:?} k={k}"), m));
                }
            }
        }
    }
    out
}

fn compare(models: &[(String, MilpModel)], other: impl Fn(&MilpModel) -> Result<Option<f64>, String>) -> Outcome {
    let mut worst: f64 = 0.0;
    for (name, m) in models {
        let a = reference_solve(m).map_err(|e| format!("{name}: {e}"))?.incumbent_value;
        let b = other(m).map_err(|e| format!("{name}: {e}"))?;
        match (a, b) {
            (Some(a), Some(b)) if (a - b).abs() <= 1e-6 => worst = worst.max((a - b).abs()),
            (None, None) => {}
            _ => return Err(format!("{name}: reference {a:?} vs {b:?}")),
        }
    }
    Ok(format!("{} models, max difference {worst:.1e}", models.len()))
}

fn oracle_equivalence() -> Outcome {
    let options =
        SolveOptions { relative_gap: 1e-9, backend: highs(), work_dir: Some(tmp("c5")), ..SolveOptions::default() };
    let backend =
        compare(&oracle_models(6, 5), |m| solve(m, &options).map(|r| r.incumbent_value).map_err(|e| e.to_string()))?;
    let brute =
        compare(&oracle_models(4, 4), |m| brute_force_solve(m).map(|r| r.incumbent_value).map_err(|e| e.to_string()))?;
    Ok(format!("backend: {backend}; brute force: {brute}"))
}

fn lower_soundness() -> Outcome {
    let mut r = rng(6);
    let mut worst = f64::NEG_INFINITY;
    let mut models = 0;
    for _ in 0..200 {
        let c = random_hull_curve(&mut r);
        let upper = erm_revenue_enclosure(&c, 1e-6).upper;
        for _ in 0..20 {
            let g = random_gauge_containing(&mut r, c.argmax());
            let m = build_lower_model(&g).map_err(|e| e.to_string())?;
            worst = worst.max(m.objective_value(&m.curve_assignment(&c)) - upper);
            models += 1;
        }
    }
    check(worst <= 1e-6, format!("{models} curve/gauge pairs, max excess {worst:.2e}"))
}

fn w_monotonicity() -> Outcome {
    let mut r = rng(7);
    let bad: usize = (0..1000)
        .map(|_| {
            let c = random_hull_curve(&mut r);
            w_monotonicity_violations(&c, 10_000, &mut r)
        })
        .sum();
    check(bad == 0, format!("1000 curves x 10000 triples, {bad} violations"))
}

fn read_timings(dir: &Path) -> Result<Vec<Timing>, String> {
    let text = std::fs::read_to_string(dir.join("timings.jsonl")).map_err(|e| e.to_string())?;
    text.lines().map(|l| serde_json::from_str(l).map_err(|e| e.to_string())).collect()
}

fn desk_sweep() -> Outcome {
    let dir = tmp("c8");
    let options = SweepOptions {
        solve: SolveOptions {
            relative_gap: 0.01,
            backend: highs(),
            work_dir: Some(dir.join("exchange")),
            ..SolveOptions::default()
        },
        workers: 1,
        run_dir: Some(dir.clone()),
        cancel: None,
    };
    let report = run_lower_sweep(25, 100, Weighting::SquareWeighted, &options).map_err(|e| e.to_string())?;
    let agg = &report.aggregate;
    let hours: f64 = read_timings(&dir)?.iter().map(|t| t.runtime).sum::<f64>() / 3600.0;
    let alpha =
        agg.alpha_lower.filter(|_| agg.certifying).ok_or(format!("not certifying, failed k {:?}", agg.failed))?;
    if !(alpha > 0.0 && alpha <= 0.6104) {
        return Err(format!("aggregate {alpha} outside (0, .6104]"));
    }
    if hours >= 4.0 {
        return Err(format!("compute time {hours:.2} h"));
    }
    let anchor_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/c8_anchor.json");
    let anchor = match std::fs::read_to_string(&anchor_path) {
        Ok(text) => {
            let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
            v["alpha_lower"].as_f64().ok_or("anchor without alpha_lower")?
        }
        Err(_) => {
            let v = serde_json::json!({ "n": 25, "big_n": 100, "weighting": "SquareWeighted", "gap": 0.01, "alpha_lower": alpha });
            std::fs::write(&anchor_path, serde_json::to_string_pretty(&v).unwrap() + "\n")
                .map_err(|e| e.to_string())?;
            alpha
        }
    };
    check(
        (alpha - anchor).abs() <= 0.01 * anchor,
        format!("certified {alpha:.6} at k={:?}, anchor {anchor:.6}, compute {hours:.2} h", agg.best_k),
    )
}

fn grid_endpoint() -> Outcome {
    let r = eta_grid(1.0, &GridSpec::reference_box(), 1e-6).ok_or("empty grid")?;
    let p = r.params;
    check(
        (r.min_value - 0.6511).abs() <= 1e-3,
        format!("{:.7} at q2={} r2={} r3={} over {} points", r.min_value, p.q2, p.r2, p.r3, r.evaluated),
    )
}

fn full_scale() -> Outcome {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let options = |name: &str, gap: f64| SweepOptions {
        solve: SolveOptions {
            relative_gap: gap,
            backend: highs(),
            work_dir: Some(tmp(name).join("exchange")),
            ..SolveOptions::default()
        },
        workers,
        run_dir: Some(tmp(name)),
        cancel: None,
    };
    let lower = |n, big_n, w, name: &str| -> Result<f64, String> {
        let r = run_lower_sweep(n, big_n, w, &options(name, 0.002)).map_err(|e| e.to_string())?;
        r.aggregate.alpha_lower.filter(|_| r.aggregate.certifying).ok_or(format!("{name} not certifying"))
    };
    let a = lower(50, 500, Weighting::SquareWeighted, "c10-lower-50")?;
    let b = lower(40, 500, Weighting::ApproxUniform, "c10-lower-40-approx")?;
    let c = lower(40, 500, Weighting::SquareWeighted, "c10-lower-40-square")?;
    let u = run_upper_sweep(80, &options("c10-upper-80", 0.002)).map_err(|e| e.to_string())?;
    let best = u.aggregate.best_upper.ok_or("upper sweep without a re-evaluated curve")?;
    check(
        a >= 0.5914 && (b - 0.5847).abs() <= 0.002 && (c - 0.5874).abs() <= 0.002 && best <= 0.6104,
        format!("n=50 {a:.5}, n=40 approx {b:.5}, n=40 square {c:.5}, upper n=80 {best:.5}"),
    )
}

fn main() -> ExitCode {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [Criterion; 10] = [
        (1, 5.0, affine_integral),
        (2, 5.0, constant_curve),
        (3, 30.0, known_curve),
        (4, 1.0, budget),
        (5, 600.0, oracle_equivalence),
        (6, 1200.0, lower_soundness),
        (7, 300.0, w_monotonicity),
        (8, f64::INFINITY, desk_sweep),
        (9, 1800.0, grid_endpoint),
        (10, f64::INFINITY, full_scale),
    ];
    let full = std::env::var("ERM_ACCEPTANCE_FULL").is_ok_and(|v| v == "1");
    let mut failed = 0;
    for (id, limit, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        if id == 10 && !full {
            println!("criterion 10: SKIP (set ERM_ACCEPTANCE_FULL=1)");
            continue;
        }
        let start = Instant::now();
        let outcome = within(limit, start, run());
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {id}: PASS ({secs:.1}s) {d}"),
            Err(d) => {
                println!("criterion {id}: FAIL ({secs:.1}s) {d}");
                failed += 1;
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
