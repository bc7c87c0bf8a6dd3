use std::path::Path;

use vfdcf_core::harness::{cdf, export, percentile, run_experiment, write_samples, ExperimentConfig, Scheme};
use vfdcf_core::sca::RunStatus;
use vfdcf_core::{Error, SystemConfig};

fn small(workers: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::desk();
    cfg.system = SystemConfig::reference(4, 1, 1);
    cfg.realizations = 4;
    cfg.base_seed = 11;
    cfg.parallelism = workers;
    cfg
}

fn samples_csv(cfg: &ExperimentConfig) -> Vec<u8> {
    let summary = run_experiment(cfg).unwrap();
    let mut buf = Vec::new();
    write_samples(&summary.samples, &mut buf).unwrap();
    buf
}

#[test]
fn samples_are_identical_across_worker_counts() {
    let serial = samples_csv(&small(1));
    assert_eq!(serial, samples_csv(&small(3)));
    assert_eq!(serial, samples_csv(&small(1)));
    let text = String::from_utf8(serial).unwrap();
    assert_eq!(text.lines().count(), 1 + 4 * 3);
    assert!(text.starts_with("scheme,realization,seed,status,sum_se,dl_se_0,ul_se_0,iterations,c1,c2,c3\n"));
}

#[test]
fn summary_counts_reconcile_and_export_writes_everything() {
    let cfg = small(0);
    let summary = run_experiment(&cfg).unwrap();
    for s in &summary.schemes {
        assert_eq!(s.converged + s.infeasible + s.failed, cfg.realizations);
        assert_eq!(s.sum_se.len(), s.converged);
        if let (Some(p5), Some(med)) = (s.p5, s.median) {
            let min = s.sum_se.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(min <= p5 && p5 <= med);
        }
    }
    for smp in &summary.samples {
        assert_eq!(smp.seed, cfg.base_seed + smp.realization as u64);
        if smp.status == RunStatus::Converged {
            assert!(smp.dl_se.iter().chain(&smp.ul_se).all(|&v| v >= 0.2 - 1e-4));
        }
    }
    let dir = tempfile::tempdir().unwrap();
    export(&summary, dir.path()).unwrap();
    for f in ["samples.csv", "cdf.csv", "summary.json", "plot_cdf.py", "traces/vfd_0.csv", "traces/hd_3.csv"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["schemes"].as_array().unwrap().len(), 3);
    let cdf_rows = std::fs::read_to_string(dir.path().join("cdf.csv")).unwrap().lines().count() - 1;
    assert_eq!(cdf_rows, summary.schemes.iter().map(|s| s.converged).sum::<usize>());
}

#[test]
fn shipped_configs_load() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["desk.json", "tiny.json", "paper_m30.json"] {
        let cfg = ExperimentConfig::load(&root.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(cfg.schemes, Scheme::ALL.to_vec());
    }
    let desk = ExperimentConfig::load(&root.join("desk.json")).unwrap();
    let reference = SystemConfig::desk();
    assert_eq!(desk.system.num_aps, 10);
    assert!((desk.system.rho_d / reference.rho_d - 1.0).abs() < 1e-12);
}

#[test]
fn bad_configs_are_rejected() {
    assert!(matches!(
        ExperimentConfig::from_json(r#"{"realizations": 0}"#),
        Err(Error::InvalidConfig(_))
    ));
    assert!(ExperimentConfig::from_json(r#"{"realizations": 2, "schemes": ["fd"]}"#).is_err());
    let mut bad = ExperimentConfig::desk();
    bad.system.pilot_len = 1;
    assert!(run_experiment(&bad).is_err());
}

#[test]
fn statistics_edge_cases() {
    assert!(matches!(percentile(&[], 50.0), Err(Error::EmptySamples)));
    assert_eq!(percentile(&[2.0], 5.0).unwrap(), 2.0);
    assert_eq!(percentile(&[2.0, 1.0], 100.0).unwrap(), 2.0);
    assert!(cdf(&[]).is_empty());
}
