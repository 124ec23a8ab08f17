use erm_bounds::bisample::ratio;
use erm_bounds::curve::RevenueCurve;

fn n80_k45() -> RevenueCurve {
    serde_json::from_str(include_str!("data/n80_k45.json")).unwrap()
}

#[test]
fn n80_k45_ratio() {
    let c = n80_k45();
    assert_eq!(c.interpolate(0.55), 1.0);
    let t = std::time::Instant::now();
    let r = ratio(&c, 1e-6).unwrap();
    eprintln!("{r:?} {:?}", t.elapsed());
    assert!(r.converged);
    assert!((r.midpoint() - 0.61035).abs() < 5e-4);
}
