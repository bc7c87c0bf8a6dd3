//! Slow full-scale profile (M = 30, K_d = K_u = 5), not part of the default run:
//! `cargo test --release -p vfdcf-core --test paper_scale -- --ignored --nocapture`
//! `VFDCF_REALIZATIONS` overrides the 200 realizations.

use vfdcf_core::harness::{run_experiment, ExperimentConfig, Scheme};
use vfdcf_core::SystemConfig;

#[test]
#[ignore = "hours of compute"]
fn m30_percentiles_within_15_percent() {
    let mut cfg = ExperimentConfig::desk();
    cfg.system = SystemConfig::full_scale(30);
    cfg.realizations = std::env::var("VFDCF_REALIZATIONS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(200);
    let s = run_experiment(&cfg).unwrap();
    let mut ok = true;
    for (scheme, reference) in [(Scheme::Vfd, 19.47), (Scheme::Heu, 13.0), (Scheme::Hd, 7.8)] {
        let p5 = s.scheme(scheme).and_then(|x| x.p5).unwrap_or(f64::NAN);
        let within = (p5 / reference - 1.0).abs() <= 0.15;
        println!("{}: p5 {p5:.2} vs {reference} ({})", scheme.as_str(), if within { "ok" } else { "off" });
        ok &= within;
    }
    assert!(ok);
}
