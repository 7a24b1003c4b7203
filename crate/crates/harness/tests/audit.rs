use std::collections::HashSet;

use pgsom_core::estimator::{hess_diag_sample, EstimatorConfig, Trajectory};
use pgsom_core::oracle::audit::AuditOptions;
use pgsom_core::policy::PolicyError;
use pgsom_core::PolicySpec;
use pgsom_harness::run_audit;

#[test]
fn default_audit_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("reports/audit.json");
    let report = run_audit(&AuditOptions::default(), &path).unwrap();
    assert!(report.all_passed, "{report:#?}");

    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    let checks = json["checks"].as_array().unwrap();
    assert_eq!(checks.len(), report.checks.len());
    let names: HashSet<&str> = checks.iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names.len(), checks.len(), "duplicate check names");
    for c in checks {
        for key in ["max_abs_error", "tolerance", "passed"] {
            assert!(c.get(key).is_some(), "missing {key}");
        }
    }
}

fn negated(
    spec: &PolicySpec,
    traj: &Trajectory<f64>,
    theta: &[f64],
    cfg: &EstimatorConfig<f64>,
    b: f64,
) -> Result<Vec<f64>, PolicyError> {
    Ok(hess_diag_sample(spec, traj, theta, cfg, b)?.into_iter().map(|x| -x).collect())
}

#[test]
fn sign_corrupted_hessian_fails_the_audit() {
    let dir = tempfile::tempdir().unwrap();
    let opts = AuditOptions {
        hess_sample: negated,
        n_theta: 3,
        ..AuditOptions::default()
    };
    let report = run_audit(&opts, &dir.path().join("audit.json")).unwrap();
    assert!(!report.all_passed);
    assert!(!report.check("hessian_diag_unbiasedness").unwrap().passed);
    assert!(report.check("gradient_unbiasedness").unwrap().passed);
}
