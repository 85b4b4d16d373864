//! Distributional laws of the shared exponential variates.

mod common;

use common::measure_exp_laws;

#[test]
fn exponential_laws_hold() {
    let stats = measure_exp_laws(0xabc);
    assert!(
        stats.max_stability_ks <= 0.02,
        "max-stability KS {}",
        stats.max_stability_ks
    );
    assert!(
        stats.argmax_max_dev <= 0.02,
        "argmax deviation {}",
        stats.argmax_max_dev
    );
    assert!(
        stats.heavy_hitter_fail_frac <= 0.01,
        "heavy-hitter failure fraction {}",
        stats.heavy_hitter_fail_frac
    );
    assert!(
        stats.median_hit_frac >= 0.90,
        "median estimator hit fraction {}",
        stats.median_hit_frac
    );
}
