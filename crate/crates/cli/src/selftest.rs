use std::time::Instant;

use erm_bounds::bisample::erm_revenue_enclosure;
use erm_bounds::curve::validate_curve;
use erm_bounds::gauge::{lower_gauge, Weighting};
use erm_bounds::model::{build_lower_model, build_upper_model, MilpModel};
use erm_bounds::selfcheck::{
    lower_soundness_gap, random_curve_peaking_in, random_gauge, random_hull_curve, rng, w_monotonicity_violations,
};
use erm_bounds::solve::{brute_force_solve, reference_solve, solve, Backend, SolveOptions, BACKEND_ENV};

fn report(name: &str, start: Instant, outcome: Result<String, String>) -> bool {
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("PASS {name} ({secs:.1}s) {detail}");
            true
        }
        Err(detail) => {
            println!("FAIL {name} ({secs:.1}s) {detail}");
            false
        }
    }
}

fn small_models() -> Vec<(String, MilpModel)> {
    let mut out = Vec::new();
    for n in 2..=3 {
        for k in 1..=n + 1 {
            out.push((format!("upper n={n} k={k}"), build_upper_model(n, k).expect("valid")));
        }
    }
    for k in 1..=4 {
        let g = lower_gauge(3, 4, k, Weighting::ApproxUniform).expect("valid");
        out.push((format!("lower n=3 N=4 k={k}"), build_lower_model(&g).expect("valid")));
    }
    out
}

fn compare(models: &[(String, MilpModel)], other: impl Fn(&MilpModel) -> Option<f64>) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for (name, m) in models {
        let a = reference_solve(m).map_err(|e| format!("{name}: {e}"))?.incumbent_value;
        let b = other(m);
        match (a, b) {
            (Some(a), Some(b)) if (a - b).abs() <= 1e-6 => worst = worst.max((a - b).abs()),
            _ => return Err(format!("{name}: reference {a:?} vs {b:?}")),
        }
    }
    Ok(format!("{} models, max difference {worst:.1e}", models.len()))
}

/// Runs the quick property suite; true when everything passes.
pub fn run(seed: u64) -> bool {
    let mut ok = true;
    let mut r = rng(seed);

    let t = Instant::now();
    ok &= report(
        "affine curve integral",
        t,
        validate_curve(vec![0.0, 1.0], vec![1.0, 0.0]).map_err(|e| e.to_string()).and_then(|c| {
            let e = erm_revenue_enclosure(&c, 1e-6);
            if e.contains(2.0 / 3.0) && e.width() <= 1e-6 {
                Ok(format!("[{}, {}]", e.lower, e.upper))
            } else {
                Err(format!("{e:?}"))
            }
        }),
    );

    let t = Instant::now();
    let mut outcome = Ok("200 curves".to_string());
    for _ in 0..200 {
        let c = random_hull_curve(&mut r);
        let round = validate_curve(c.knots().to_vec(), c.values().to_vec());
        let prices_rise = (0..99).all(|i| {
            let (a, b) = (i as f64 / 100.0, (i + 1) as f64 / 100.0);
            c.price_inverse(a).price() <= c.price_inverse(b).price() + 1e-9
        });
        if round.is_err() || !prices_rise || (c.max_value() - 1.0).abs() > 1e-12 {
            outcome = Err(format!("bad curve {c:?}"));
            break;
        }
    }
    ok &= report("curve invariants", t, outcome);

    let t = Instant::now();
    let bad: usize = (0..100)
        .map(|_| {
            let c = random_hull_curve(&mut r);
            w_monotonicity_violations(&c, 1000, &mut r)
        })
        .sum();
    ok &= report(
        "w monotonicity",
        t,
        if bad == 0 { Ok("100 curves x 1000 triples".into()) } else { Err(format!("{bad} violations")) },
    );

    let t = Instant::now();
    let mut outcome = Ok("curve-derived assignments satisfy every lifted constraint".to_string());
    for _ in 0..20 {
        let g = random_gauge(&mut r);
        let (a, b) = g.opt_interval();
        let c = random_curve_peaking_in(&mut r, a, b);
        let lower = build_lower_model(&g).expect("valid gauge");
        let k = 1 + (c.argmax() * 4.0).round() as usize;
        let upper = build_upper_model(4, k).expect("valid");
        for m in [&lower, &upper] {
            let scaled = if m.is_upper() {
                // the upper family pins the value at q_k
                let q = m.q(k);
                let at = c.interpolate(q);
                if at <= 0.0 {
                    continue;
                }
                c.scaled(1.0 / at)
            } else {
                c.clone()
            };
            if m.is_upper() && scaled.max_value() > 1.0 + 1e-12 {
                continue;
            }
            if let Err(e) = m.check_assignment(&m.curve_assignment(&scaled), 1e-9) {
                outcome = Err(format!("{e}"));
            }
        }
    }
    ok &= report("linearization exactness", t, outcome);

    let t = Instant::now();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let g = random_gauge(&mut r);
        let (a, b) = g.opt_interval();
        let c = random_curve_peaking_in(&mut r, a, b);
        let (model_value, upper) = lower_soundness_gap(&g, &c, 1e-6);
        worst = worst.max(model_value - upper);
    }
    ok &= report(
        "lower model soundness",
        t,
        if worst <= 1e-6 { Ok(format!("max excess {worst:.2e}")) } else { Err(format!("excess {worst:.2e}")) },
    );

    let models = small_models();
    let t = Instant::now();
    ok &= report(
        "reference vs brute force",
        t,
        compare(&models, |m| brute_force_solve(m).ok().and_then(|r| r.incumbent_value)),
    );

    let backend = std::env::var(BACKEND_ENV).ok().or(Some("highs".into())).and_then(|s| Backend::parse(&s).ok());
    match backend {
        Some(b @ Backend::External(_)) => {
            let t = Instant::now();
            let options = SolveOptions { relative_gap: 1e-9, backend: b, ..SolveOptions::default() };
            ok &= report(
                "reference vs backend",
                t,
                compare(&models, |m| solve(m, &options).ok().and_then(|r| r.incumbent_value)),
            );
        }
        _ => println!("SKIP reference vs backend (no external backend configured)"),
    }
    ok
}
