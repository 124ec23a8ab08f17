use erm_bounds::gauge::{lower_gauge, Weighting};
use erm_bounds::model::{build_lower_model, build_upper_model, MilpModel, Role};
use erm_bounds::solve::{brute_force_solve, certified_bound, monotone_patterns, reference_solve};

/// Counts 0/1 fillings of the `w` grid that respect both monotonicity
/// directions by checking every one of the `2^b` patterns.
fn brute_monotone_count(model: &MilpModel) -> usize {
    let cells: Vec<(usize, usize)> =
        model.roles().filter_map(|(r, _)| if let Role::W(s, t) = r { Some((s, t)) } else { None }).collect();
    let b = cells.len();
    (0u64..1 << b)
        .filter(|mask| {
            let on = |s: usize, t: usize| cells.iter().position(|&c| c == (s, t)).map(|p| mask >> p & 1 == 1);
            cells.iter().all(|&(s, t)| {
                let v = on(s, t).unwrap();
                let left_ok = on(s + 1, t).is_none_or(|u| !v || u);
                let down_ok = if t > 1 { on(s, t - 1).is_none_or(|u| !v || u) } else { true };
                left_ok && down_ok
            })
        })
        .count()
}

#[test]
fn monotone_pattern_counts() {
    for n in 2..=4 {
        let m = build_upper_model(n, 1).unwrap();
        assert_eq!(monotone_patterns(&m).1.len(), brute_monotone_count(&m), "upper n={n}");
    }
    for n in 2..=3 {
        let g = lower_gauge(n, 4, 1, Weighting::ApproxUniform).unwrap();
        let m = build_lower_model(&g).unwrap();
        assert_eq!(monotone_patterns(&m).1.len(), brute_monotone_count(&m), "lower n={n}");
    }
}

#[test]
fn reference_equals_brute_force() {
    for n in 2..=4 {
        for k in 1..=n + 1 {
            let m = build_upper_model(n, k).unwrap();
            let a = reference_solve(&m).unwrap().incumbent_value.unwrap();
            let b = brute_force_solve(&m).unwrap().incumbent_value.unwrap();
            assert!((a - b).abs() <= 1e-6, "upper n={n} k={k}: {a} vs {b}");
        }
    }
    for n in 3..=4 {
        for k in 1..=10 {
            let g = lower_gauge(n, 10, k, Weighting::ApproxUniform).unwrap();
            let m = build_lower_model(&g).unwrap();
            let a = reference_solve(&m).unwrap().incumbent_value.unwrap();
            let b = brute_force_solve(&m).unwrap().incumbent_value.unwrap();
            assert!((a - b).abs() <= 1e-6, "lower n={n} k={k}: {a} vs {b}");
        }
    }
}

#[test]
fn certified_bound_below_curve_points() {
    use erm_bounds::selfcheck::{random_curve_peaking_in, rng};
    let mut r = rng(3);
    for k in 1..=6 {
        let g = lower_gauge(4, 6, k, Weighting::SquareWeighted).unwrap();
        let m = build_lower_model(&g).unwrap();
        let bound = certified_bound(&reference_solve(&m).unwrap()).unwrap();
        let (a, b) = g.opt_interval();
        for _ in 0..20 {
            let c = random_curve_peaking_in(&mut r, a, b);
            let values = m.curve_assignment(&c);
            assert!(bound <= m.objective_value(&values) + 1e-9);
        }
    }
}

#[test]
fn monotonicity_rows_do_not_cut() {
    for n in 2..=5 {
        for k in 1..=n + 1 {
            let m = build_upper_model(n, k).unwrap();
            let mut relaxed = m.clone();
            relaxed.constraints.retain(|c| !c.name.starts_with("mono"));
            let a = reference_solve(&m).unwrap().incumbent_value.unwrap();
            let b = reference_solve(&relaxed).unwrap().incumbent_value.unwrap();
            assert!((a - b).abs() <= 1e-9, "n={n} k={k}: {a} vs {b}");
        }
    }
}
