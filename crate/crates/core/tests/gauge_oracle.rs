use erm_bounds::gauge::{lower_gauge, split_count, Weighting};

/// Exhaustive argmin of the split cost in floating point, ties to smaller mu.
fn argmin_f64(n: usize, big_n: usize, k: usize, square: bool) -> usize {
    let (n, nn, k) = (n as f64, big_n as f64, k as f64);
    let mut best = (f64::INFINITY, 0);
    for mu in 2..(n as usize - 1) {
        let m = mu as f64;
        let right = n - m - 1.0;
        let (dl, dr) = if square { (m * m, right * right) } else { (m, right) };
        let c = ((k - 1.0) / (nn * dl) - (nn - k) / (nn * dr)).abs();
        if c < best.0 - 1e-15 {
            best = (c, mu);
        }
    }
    best.1
}

#[test]
fn split_matches_exhaustive_argmin() {
    assert_eq!(split_count(40, 500, 250, Weighting::ApproxUniform), 19);
    assert_eq!(argmin_f64(40, 500, 250, false), 19);
    for &(n, big_n) in &[(10, 50), (25, 100), (40, 500)] {
        for k in 2..big_n {
            assert_eq!(
                split_count(n, big_n, k, Weighting::ApproxUniform),
                argmin_f64(n, big_n, k, false),
                "{n} {big_n} {k}"
            );
            let square = 2 * k < big_n;
            assert_eq!(
                split_count(n, big_n, k, Weighting::SquareWeighted),
                argmin_f64(n, big_n, k, square),
                "square {n} {big_n} {k}"
            );
        }
    }
}

#[test]
fn square_rule_puts_more_intervals_left() {
    let a = split_count(40, 500, 100, Weighting::ApproxUniform);
    let s = split_count(40, 500, 100, Weighting::SquareWeighted);
    assert!(s > a, "{s} vs {a}");
}

#[test]
fn small_example() {
    let g = lower_gauge(5, 10, 1, Weighting::ApproxUniform).unwrap();
    let expect = [0.0, 0.1, 0.325, 0.55, 0.775, 1.0];
    for (a, b) in g.breakpoints.iter().zip(expect) {
        assert!((a - b).abs() < 1e-15);
    }
    assert_eq!(g.opt_index, 1);
}

#[test]
fn optimal_intervals_are_exact_and_cover() {
    for &(n, big_n) in &[(5, 10), (25, 100), (40, 500), (50, 500)] {
        for w in [Weighting::ApproxUniform, Weighting::SquareWeighted] {
            let mut covered = 0.0;
            for k in 1..=big_n {
                let g = lower_gauge(n, big_n, k, w).unwrap();
                let (a, b) = g.opt_interval();
                assert_eq!(a.to_bits(), ((k - 1) as f64 / big_n as f64).to_bits());
                assert_eq!(b.to_bits(), (k as f64 / big_n as f64).to_bits());
                let total: f64 = (1..=n).map(|i| g.len_of(i)).sum();
                assert!((total - 1.0).abs() <= 1e-15);
                covered += b - a;
                if 2 * k >= big_n {
                    assert_eq!(g, lower_gauge(n, big_n, k, Weighting::ApproxUniform).unwrap());
                }
            }
            assert!((covered - 1.0).abs() < 1e-12);
        }
    }
}
