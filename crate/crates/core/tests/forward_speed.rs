use pareto_coalescent::forward::{speed_estimate, ForwardConfig};
use pareto_coalescent::RngStream;

#[test]
fn speed_near_log_log_n() {
    let n = 10_000usize;
    let e = speed_estimate(&ForwardConfig::new(n, 1.0, 1000).unwrap(), 10, &RngStream::new(21, 0)).unwrap();
    let v = (n as f64).ln().ln();
    assert!((e.value - v).abs() < 0.15 * v, "speed {} vs ln ln N {v}", e.value);
}

#[test]
fn speed_grows_with_population() {
    let small = speed_estimate(&ForwardConfig::new(16, 1.0, 200).unwrap(), 20, &RngStream::new(22, 0)).unwrap();
    let large = speed_estimate(&ForwardConfig::new(1_000_000, 1.0, 100).unwrap(), 2, &RngStream::new(22, 1)).unwrap();
    assert!(large.value - small.value > 3.0 * (large.stderr.powi(2) + small.stderr.powi(2)).sqrt());
}
