//! The `erm` command line.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, OnceLock};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use erm_bounds::bisample::{erm_revenue_enclosure, erm_revenue_mc, ratio};
use erm_bounds::curve::RevenueCurve;
use erm_bounds::gauge::{lower_gauge, Weighting};
use erm_bounds::gridsearch::{eta_batch, eta_csv, eta_grid, polish, GridSpec};
use erm_bounds::model::{build_lower_model, build_upper_model, mps::to_mps};
use erm_bounds::solve::{Backend, SolveOptions, BACKEND_ENV};
use erm_bounds::sweep::{load_report, plot_csv, run_sweep, BoundReport, SweepConfig, SweepFamily, SweepOptions};

mod selftest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_COMPUTE: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "erm", version, about = "Certified bounds on the two-sample ERM revenue ratio")]
pub struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certified enclosure of the ERM revenue of a curve.
    Eval {
        #[arg(long)]
        curve: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Divide by the curve's maximum.
        #[arg(long)]
        ratio: bool,
    },
    /// Monte Carlo estimate of the ERM revenue of a curve.
    Mc {
        #[arg(long)]
        curve: PathBuf,
        #[arg(long)]
        samples: u64,
        #[arg(long)]
        seed: u64,
    },
    /// Upper-bound sweep over the peak knot k = 1..n+1.
    Upper {
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Certified lower-bound sweep over k = 1..N.
    Lower {
        #[arg(long)]
        n: usize,
        #[arg(long = "N")]
        big_n: usize,
        #[arg(long, default_value = "approx-uniform")]
        weighting: Weighting,
        /// Use the given gap for every k, including small square-weighted k.
        #[arg(long)]
        no_tiers: bool,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Grid search over three-piece curves peaking at q_opt.
    Grid {
        #[arg(long, required_unless_present = "batch")]
        q_opt: Option<f64>,
        /// Evaluate q_opt = k/80 for k = 1..80 and print CSV.
        #[arg(long)]
        batch: bool,
        #[arg(long)]
        full_cube: bool,
        /// Refine the grid minimum by coordinate descent (heuristic, not certified).
        #[arg(long)]
        polish: bool,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Verify a run directory and print its summary or figure data.
    Report {
        run_dir: PathBuf,
        #[arg(long)]
        plot_data: bool,
    },
    /// Run the built-in property checks.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write one model as an MPS file.
    Export {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long = "N")]
        big_n: Option<usize>,
        #[arg(long, default_value = "approx-uniform")]
        weighting: Weighting,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum FamilyArg {
    Upper,
    Lower,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// reference, brute-force, highs, or a backend executable path.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long, default_value_t = 0.002)]
    gap: f64,
    /// Seconds per model.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Solver threads per model.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Models solved concurrently.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    /// Run directory; defaults to runs/<family>-<parameters>.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl ToString) -> Failure {
    Failure { code: EXIT_USAGE, message: message.to_string() }
}

fn compute(message: impl ToString) -> Failure {
    Failure { code: EXIT_COMPUTE, message: message.to_string() }
}

fn print_json<T: Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn read_curve(path: &Path) -> Result<RevenueCurve, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn check_tol(tol: f64) -> Result<(), Failure> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("--tol must be positive, got {tol}")))
    }
}

fn cancel_flag() -> Arc<AtomicBool> {
    static FLAG: OnceLock<Arc<AtomicBool>> = OnceLock::new();
    FLAG.get_or_init(|| {
        let flag = Arc::new(AtomicBool::new(false));
        let f = flag.clone();
        if let Err(e) = ctrlc::set_handler(move || {
            eprintln!("interrupt: finishing running models and writing checkpoints");
            f.store(true, Ordering::SeqCst);
        }) {
            log::warn!("cannot install interrupt handler: {e}");
        }
        flag
    })
    .clone()
}

fn sweep_options(args: &SweepArgs, default_dir: String) -> Result<(SweepOptions, Option<(usize, usize)>), Failure> {
    let spec = match &args.backend {
        Some(b) => b.clone(),
        None => std::env::var(BACKEND_ENV).unwrap_or_else(|_| "reference".into()),
    };
    let backend = Backend::parse(&spec).map_err(usage)?;
    if !(0.0..1.0).contains(&args.gap) {
        return Err(usage(format!("--gap must lie in [0, 1), got {}", args.gap)));
    }
    let k_range = match (args.k_min, args.k_max) {
        (None, None) => None,
        (lo, hi) => Some((lo.unwrap_or(1), hi.unwrap_or(usize::MAX))),
    };
    let run_dir = args.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(default_dir));
    let solve = SolveOptions {
        relative_gap: args.gap,
        time_limit: args.time_limit,
        threads: args.threads.max(1),
        backend,
        work_dir: Some(run_dir.join("exchange")),
    };
    let options =
        SweepOptions { solve, workers: args.workers.max(1), run_dir: Some(run_dir), cancel: Some(cancel_flag()) };
    Ok((options, k_range))
}

fn finish_sweep(config: SweepConfig, options: SweepOptions) -> Result<i32, Failure> {
    config.validate().map_err(usage)?;
    let dir = options.run_dir.clone().expect("run directory");
    log::info!("run directory {}", dir.display());
    let report = run_sweep(&config, &options).map_err(compute)?;
    print_summary(&report, &dir);
    let cancelled = options.cancel.as_ref().is_some_and(|c| c.load(Ordering::SeqCst));
    let partial = cancelled
        || !report.aggregate.failed.is_empty()
        || report.records.len() < config.ks().len()
        || (config.family == SweepFamily::Lower && !report.aggregate.certifying);
    Ok(if partial { EXIT_PARTIAL } else { EXIT_OK })
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    run_dir: String,
    family: SweepFamily,
    records: usize,
    aggregate: &'a erm_bounds::sweep::Aggregate,
}

fn print_summary(report: &BoundReport, dir: &Path) {
    print_json(&SweepSummary {
        run_dir: dir.display().to_string(),
        family: report.config.family,
        records: report.records.len(),
        aggregate: &report.aggregate,
    });
}

fn execute(cli: Cli) -> Result<i32, Failure> {
    match cli.command {
        Command::Eval { curve, tol, ratio: as_ratio } => {
            check_tol(tol)?;
            let curve = read_curve(&curve)?;
            let enc = if as_ratio { ratio(&curve, tol).map_err(compute)? } else { erm_revenue_enclosure(&curve, tol) };
            print_json(&serde_json::json!({
                "lower": enc.lower,
                "upper": enc.upper,
                "width": enc.width(),
                "converged": enc.converged,
            }));
            Ok(if enc.converged { EXIT_OK } else { EXIT_PARTIAL })
        }
        Command::Mc { curve, samples, seed } => {
            let curve = read_curve(&curve)?;
            let est = erm_revenue_mc(&curve, samples, seed).map_err(usage)?;
            print_json(&est);
            Ok(EXIT_OK)
        }
        Command::Upper { n, sweep } => {
            let (options, k_range) = sweep_options(&sweep, format!("upper-n{n}"))?;
            let mut config = SweepConfig::upper(n, &options.solve);
            config.k_range = k_range;
            finish_sweep(config, options)
        }
        Command::Lower { n, big_n, weighting, no_tiers, sweep } => {
            let (options, k_range) = sweep_options(&sweep, format!("lower-n{n}-N{big_n}-{weighting:?}"))?;
            let mut config = SweepConfig::lower(n, big_n, weighting, &options.solve);
            config.k_range = k_range;
            config.tiered_gap = !no_tiers;
            finish_sweep(config, options)
        }
        Command::Grid { q_opt, batch, full_cube, polish: do_polish, tol } => {
            check_tol(tol)?;
            let spec = if full_cube { GridSpec::full_cube() } else { GridSpec::reference_box() };
            if batch {
                print!("{}", eta_csv(&eta_batch(1..=80, &spec, tol)));
                return Ok(EXIT_OK);
            }
            let q_opt = q_opt.expect("required by clap");
            if !(0.0..=1.0).contains(&q_opt) {
                return Err(usage(format!("--q-opt must lie in [0, 1], got {q_opt}")));
            }
            let result = eta_grid(q_opt, &spec, tol).ok_or_else(|| compute("empty grid"))?;
            let polished = do_polish.then(|| polish(&result, 1.0 / 80.0, tol));
            print_json(&serde_json::json!({
                "min_value": result.min_value,
                "params": result.params,
                "evaluated": result.evaluated,
                "polished": polished,
            }));
            Ok(EXIT_OK)
        }
        Command::Report { run_dir, plot_data } => {
            let report = load_report(&run_dir).map_err(compute)?;
            if plot_data {
                print!("{}", plot_csv(&report));
            } else {
                print_summary(&report, &run_dir);
            }
            let certifying = report.config.family == SweepFamily::Upper || report.aggregate.certifying;
            Ok(if certifying && report.aggregate.failed.is_empty() { EXIT_OK } else { EXIT_PARTIAL })
        }
        Command::Selftest { seed } => Ok(if selftest::run(seed) { EXIT_OK } else { EXIT_COMPUTE }),
        Command::Export { family, n, k, big_n, weighting, out } => {
            let model = match family {
                FamilyArg::Upper => build_upper_model(n, k).map_err(usage)?,
                FamilyArg::Lower => {
                    let big_n = big_n.ok_or_else(|| usage("--N is required for the lower family"))?;
                    let gauge = lower_gauge(n, big_n, k, weighting).map_err(usage)?;
                    build_lower_model(&gauge).map_err(usage)?
                }
            };
            std::fs::write(&out, to_mps(&model, "erm")).map_err(|e| compute(format!("{}: {e}", out.display())))?;
            Ok(EXIT_OK)
        }
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("erm: {}", f.message);
            f.code
        }
    }
}
