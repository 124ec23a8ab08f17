//! HiGHS driver speaking the backend file contract:
//! reads an MPS model, writes a JSON solution.

use std::collections::BTreeMap;
use std::ffi::{c_char, c_void, CStr, CString};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use erm_bounds::solve::BackendSolution;
use highs_sys::*;

#[derive(Parser)]
#[command(name = "erm-highs", about = "Solve an MPS model with HiGHS and write a JSON solution")]
struct Args {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    solution: PathBuf,
    #[arg(long, default_value_t = 1e-4)]
    gap: f64,
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long, default_value_t = 1)]
    threads: i32,
    /// Show solver log on stderr.
    #[arg(long)]
    verbose: bool,
}

struct Highs(*mut c_void);

impl Drop for Highs {
    fn drop(&mut self) {
        unsafe { Highs_destroy(self.0) }
    }
}

fn cstr(s: &str) -> CString {
    CString::new(s).expect("no interior nul")
}

impl Highs {
    fn set_f64(&self, key: &str, v: f64) -> Result<(), String> {
        let k = cstr(key);
        match unsafe { Highs_setDoubleOptionValue(self.0, k.as_ptr(), v) } {
            0 => Ok(()),
            s => Err(format!("option {key}={v} rejected ({s})")),
        }
    }

    fn set_int(&self, key: &str, v: i32) -> Result<(), String> {
        let k = cstr(key);
        match unsafe { Highs_setIntOptionValue(self.0, k.as_ptr(), v as HighsInt) } {
            0 => Ok(()),
            s => Err(format!("option {key}={v} rejected ({s})")),
        }
    }

    fn set_bool(&self, key: &str, v: bool) -> Result<(), String> {
        let k = cstr(key);
        match unsafe { Highs_setBoolOptionValue(self.0, k.as_ptr(), v as HighsInt) } {
            0 => Ok(()),
            s => Err(format!("option {key} rejected ({s})")),
        }
    }

    fn info_f64(&self, key: &str) -> Option<f64> {
        let k = cstr(key);
        let mut v = 0.0;
        let s = unsafe { Highs_getDoubleInfoValue(self.0, k.as_ptr(), &mut v) };
        (s == 0 && v.is_finite()).then_some(v)
    }

    fn col_name(&self, col: usize) -> String {
        let mut buf = vec![0 as c_char; kHighsMaximumStringLength as usize];
        unsafe {
            Highs_getColName(self.0, col as HighsInt, buf.as_mut_ptr());
            CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
        }
    }
}

fn run(args: &Args) -> Result<BackendSolution, String> {
    let start = Instant::now();
    let h = Highs(unsafe { Highs_create() });
    if h.0.is_null() {
        return Err("Highs_create failed".into());
    }
    if !args.verbose {
        h.set_bool("output_flag", false)?;
    }
    h.set_f64("mip_rel_gap", args.gap)?;
    h.set_int("threads", args.threads.max(1))?;
    if let Some(t) = args.time_limit {
        h.set_f64("time_limit", t)?;
    }
    let path = cstr(&args.model.to_string_lossy());
    let status = unsafe { Highs_readModel(h.0, path.as_ptr()) };
    if status == kHighsStatusError {
        return Err(format!("cannot read {}", args.model.display()));
    }
    let status = unsafe { Highs_run(h.0) };
    if status == kHighsStatusError {
        return Err("Highs_run failed".into());
    }
    let model_status = unsafe { Highs_getModelStatus(h.0) };
    let runtime = start.elapsed().as_secs_f64();
    let label = match model_status {
        s if s == kHighsModelStatusOptimal => "Optimal",
        s if s == kHighsModelStatusTimeLimit || s == kHighsModelStatusInterrupt => "TimeLimit",
        s if s == kHighsModelStatusInfeasible => {
            return Ok(BackendSolution {
                status: "Infeasible".into(),
                objective: None,
                dual_bound: None,
                gap: None,
                runtime,
                values: BTreeMap::new(),
            });
        }
        s => return Err(format!("HiGHS model status {s}")),
    };

    let ncol = unsafe { Highs_getNumCol(h.0) } as usize;
    let mut primal_status: HighsInt = 0;
    let key = cstr("primal_solution_status");
    unsafe { Highs_getIntInfoValue(h.0, key.as_ptr(), &mut primal_status) };
    let has_incumbent = primal_status == kHighsSolutionStatusFeasible;
    let (objective, values) = if has_incumbent {
        let mut cols = vec![0.0; ncol];
        let nrow = unsafe { Highs_getNumRow(h.0) } as usize;
        let mut rows = vec![0.0; nrow];
        unsafe {
            Highs_getSolution(h.0, cols.as_mut_ptr(), std::ptr::null_mut(), rows.as_mut_ptr(), std::ptr::null_mut())
        };
        let values = (0..ncol).map(|c| (h.col_name(c), cols[c])).collect();
        (Some(unsafe { Highs_getObjectiveValue(h.0) }), values)
    } else {
        (None, BTreeMap::new())
    };
    // pure LPs carry no MIP dual bound; their optimum is the bound
    let dual_bound = if mip_ran(&h) {
        h.info_f64("mip_dual_bound")
    } else if label == "Optimal" {
        objective
    } else {
        None
    };
    let gap = match (objective, dual_bound) {
        (Some(o), Some(d)) => Some(erm_bounds::solve::relative_gap(o, d)),
        _ => None,
    };
    let status = match (label, gap) {
        ("Optimal", Some(g)) if g > 1e-9 => "GapReached",
        (l, _) => l,
    };
    Ok(BackendSolution { status: status.into(), objective, dual_bound, gap, runtime, values })
}

fn mip_ran(h: &Highs) -> bool {
    let k = cstr("mip_node_count");
    let mut nodes: i64 = -1;
    let s = unsafe { Highs_getInt64InfoValue(h.0, k.as_ptr(), &mut nodes) };
    s == 0 && nodes >= 0
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(sol) => {
            let text = serde_json::to_string_pretty(&sol).expect("serializable");
            if let Err(e) = std::fs::write(&args.solution, text) {
                eprintln!("erm-highs: {}: {e}", args.solution.display());
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("erm-highs: {e}");
            ExitCode::from(2)
        }
    }
}
