//! Shared inputs for the criterion benchmarks.

use droopsim::oracle::prepare;
use droopsim::Scenario;

/// Calibrated reference scenario with `n` identical inverters sharing a
/// load scaled with `n`.
pub fn scaled_table1(n: usize) -> Scenario {
    let mut s = Scenario::table1();
    let inv = s.inverters[0];
    s.inverters = vec![inv; n];
    let k = n as f64 / 2.0;
    for ev in &mut s.load_schedule {
        ev.load.p_rated *= k;
        ev.load.q_rated *= k;
    }
    prepare(&s).expect("reference scenario calibrates")
}
