//! Estimator audit: every oracle identity checked on fixture MDPs at
//! randomized parameters, collected into a serializable report.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use super::{
    enumerate, enumerated_return, estimator_expectation, exact_return, fd_gradient, fd_hessian_diag,
    occupancy_return, value_tables, KernelProbe, OracleError, DEFAULT_ENUMERATION_CAP,
};
use crate::env::{MdpModel, TabularMdp};
use crate::estimator::{grad_psi, hess_diag_sample, score, EstimatorConfig, Trajectory};
use crate::policy::{PolicyError, PolicySpec};
use crate::vecops::max_abs_diff;

/// Per-trajectory second-order sample used by the Hessian-diagonal check.
pub type HessSampleFn =
    fn(&PolicySpec, &Trajectory<f64>, &[f64], &EstimatorConfig<f64>, f64) -> Result<Vec<f64>, PolicyError>;

pub const TOL_RETURN_CONSISTENCY: f64 = 1e-10;
pub const TOL_ADVANTAGE_CENTERING: f64 = 1e-12;
pub const TOL_EXPECTED_SCORE: f64 = 1e-10;
pub const TOL_GRADIENT: f64 = 1e-6;
pub const TOL_HESSIAN_DIAG: f64 = 1e-5;
pub const TOL_BASELINE_INVARIANCE: f64 = 1e-8;
pub const TOL_NORMALIZATION: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct AuditOptions {
    pub seed: u64,
    /// Random parameter draws per fixture.
    pub n_theta: usize,
    /// Random instances for the return-consistency checks.
    pub n_instances: usize,
    pub discount: f64,
    pub fd_grad_step: f64,
    pub fd_hess_step: f64,
    pub hess_sample: HessSampleFn,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            seed: 2024,
            n_theta: 20,
            n_instances: 100,
            discount: 0.9,
            fd_grad_step: super::DEFAULT_FD_GRAD_STEP,
            fd_hess_step: super::DEFAULT_FD_HESS_STEP,
            hess_sample: hess_diag_sample::<f64>,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub max_abs_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub cases: usize,
}

/// Observed sign of E[ĥ] per coordinate for one fixture draw.
#[derive(Debug, Clone, Serialize)]
pub struct SignPattern {
    pub policy: String,
    pub theta_index: usize,
    /// '+', '-' or '0' per coordinate.
    pub signs: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub checks: Vec<CheckResult>,
    pub hessian_sign_patterns: Vec<SignPattern>,
    pub all_passed: bool,
}

impl AuditReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Accumulator {
    name: &'static str,
    tol: f64,
    worst: f64,
    cases: usize,
}

impl Accumulator {
    fn new(name: &'static str, tol: f64) -> Self {
        Self { name, tol, worst: 0.0, cases: 0 }
    }

    fn record(&mut self, err: f64) {
        self.cases += 1;
        // NaN must fail the check
        self.worst = if err.is_nan() { f64::NAN } else { self.worst.max(err) };
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name.to_string(),
            max_abs_error: self.worst,
            tolerance: self.tol,
            passed: self.cases > 0 && self.worst < self.tol,
            cases: self.cases,
        }
    }
}

/// The audit fixture: 2 states, 2 actions, horizon 3, all rows stochastic.
pub fn default_fixture(seed: u64, discount: f64) -> TabularMdp<f64> {
    TabularMdp::random(2, 2, 3, discount, &mut StdRng::seed_from_u64(seed))
}

/// Policies audited on a fixture: the closed-form linear class and the MLP.
pub fn fixture_policies(n_states: usize, n_actions: usize) -> Vec<(String, PolicySpec)> {
    vec![
        ("softmax-linear".into(), PolicySpec::softmax_linear(n_states, n_actions)),
        ("mlp-1h".into(), PolicySpec::mlp(n_states, 3, n_actions)),
    ]
}

fn random_theta(rng: &mut StdRng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn sign_string(v: &[f64]) -> String {
    v.iter()
        .map(|&x| if x > 0.0 { '+' } else if x < 0.0 { '-' } else { '0' })
        .collect()
}

/// Runs every check. Only evaluation errors (not check failures) are returned as `Err`.
pub fn run_checks(opts: &AuditOptions) -> Result<AuditReport, OracleError> {
    let mut rng = StdRng::seed_from_u64(opts.seed);
    let cap = DEFAULT_ENUMERATION_CAP;

    let mut normalization = Accumulator::new("enumeration_normalization", TOL_NORMALIZATION);
    let mut bi_vs_enum = Accumulator::new("return_backward_induction_vs_enumeration", TOL_RETURN_CONSISTENCY);
    let mut occupancy = Accumulator::new("return_occupancy_decomposition", TOL_RETURN_CONSISTENCY);
    let mut value_consistency = Accumulator::new("value_q_consistency", TOL_ADVANTAGE_CENTERING);
    let mut centering = Accumulator::new("advantage_centering", TOL_ADVANTAGE_CENTERING);

    for i in 0..opts.n_instances {
        let n_states = 2 + i % 2;
        let mdp = TabularMdp::random(n_states, 2, 3, opts.discount, &mut rng);
        let spec = PolicySpec::softmax_linear(n_states, 2);
        let theta = random_theta(&mut rng, spec.dim());
        let trajs = enumerate(&mdp, &spec, &theta, cap)?;
        normalization.record((trajs.iter().map(|t| t.probability).sum::<f64>() - 1.0).abs());
        let j = exact_return(&mdp, &spec, &theta)?;
        bi_vs_enum.record((j - enumerated_return(&trajs)).abs());
        let tables = value_tables(&mdp, &spec, &theta)?;
        occupancy.record((j - occupancy_return(&mdp, &tables)).abs());
        for t in 0..mdp.horizon() {
            for s in 0..n_states {
                let pi = &tables.policy[s];
                let v_from_q: f64 = (0..2).map(|a| pi[a] * tables.q[t][s][a]).sum();
                value_consistency.record((tables.v[t][s] - v_from_q).abs());
                let centered: f64 = (0..2).map(|a| pi[a] * tables.advantage(t, s, a)).sum();
                centering.record(centered.abs());
            }
        }
    }

    let mut expected_score = Accumulator::new("expected_score_zero", TOL_EXPECTED_SCORE);
    let mut gradient = Accumulator::new("gradient_unbiasedness", TOL_GRADIENT);
    let mut hessian = Accumulator::new("hessian_diag_unbiasedness", TOL_HESSIAN_DIAG);
    let mut baseline = Accumulator::new("baseline_invariance", TOL_BASELINE_INVARIANCE);
    let mut kernel = Accumulator::new("kernel_independence", f64::MIN_POSITIVE);
    let mut patterns = Vec::new();

    let fixture = default_fixture(opts.seed, opts.discount);
    let other_kernel = TabularMdp::random(2, 2, 3, opts.discount, &mut rng);
    let swapped = fixture
        .with_transition(
            (0..2)
                .map(|s| (0..2).map(|a| other_kernel.transition_row(s, a).to_vec()).collect())
                .collect(),
        )
        .expect("valid swapped kernel");
    let cfg = EstimatorConfig::unbiased(opts.discount);

    for (policy_name, spec) in fixture_policies(2, 2) {
        for ti in 0..opts.n_theta {
            let theta = random_theta(&mut rng, spec.dim());

            let e_score = estimator_expectation(&fixture, &spec, &theta, cap, |t| score(&spec, t, &theta))?;
            expected_score.record(e_score.iter().fold(0.0f64, |m, x| m.max(x.abs())));

            let e_grad = estimator_expectation(&fixture, &spec, &theta, cap, |t| grad_psi(&spec, t, &theta, &cfg, 0.0))?;
            let fd_g = fd_gradient(&fixture, &spec, &theta, opts.fd_grad_step)?;
            gradient.record(max_abs_diff(&e_grad, &fd_g));

            let b = rng.gen_range(-5.0..5.0);
            let e_grad_b = estimator_expectation(&fixture, &spec, &theta, cap, |t| grad_psi(&spec, t, &theta, &cfg, b))?;
            baseline.record(max_abs_diff(&e_grad, &e_grad_b));

            let e_hess = estimator_expectation(&fixture, &spec, &theta, cap, |t| {
                (opts.hess_sample)(&spec, t, &theta, &cfg, 0.0)
            })?;
            let fd_h = fd_hessian_diag(&fixture, &spec, &theta, opts.fd_hess_step)?;
            hessian.record(max_abs_diff(&e_hess, &fd_h));
            patterns.push(SignPattern {
                policy: policy_name.clone(),
                theta_index: ti,
                signs: sign_string(&e_hess),
            });

            // Kernel independence: enumeration reads the kernel, scoring never does,
            // and swapping the kernel leaves every per-path score unchanged.
            let probe = KernelProbe::new(&fixture);
            let paths = enumerate(&probe, &spec, &theta, cap)?;
            let enumeration_reads = probe.reads();
            probe.reset();
            let mut scores = Vec::with_capacity(paths.len());
            for p in &paths {
                scores.push(score(&spec, &p.to_trajectory(&spec, &theta)?, &theta)?);
            }
            let scoring_reads = probe.reads();
            let swapped_paths = enumerate(&swapped, &spec, &theta, cap)?;
            let mut worst = if enumeration_reads > 0 && scoring_reads == 0 { 0.0 } else { f64::INFINITY };
            if swapped_paths.len() != paths.len() {
                worst = f64::INFINITY;
            }
            for ((p, q), s) in paths.iter().zip(&swapped_paths).zip(&scores) {
                if p.states != q.states || p.actions != q.actions {
                    worst = f64::INFINITY;
                    continue;
                }
                let s2 = score(&spec, &q.to_trajectory(&spec, &theta)?, &theta)?;
                worst = worst.max(max_abs_diff(s, &s2));
            }
            kernel.record(worst);
        }
    }

    let checks: Vec<CheckResult> = [
        normalization,
        bi_vs_enum,
        occupancy,
        value_consistency,
        centering,
        expected_score,
        gradient,
        hessian,
        baseline,
        kernel,
    ]
    .into_iter()
    .map(Accumulator::finish)
    .collect();
    let all_passed = checks.iter().all(|c| c.passed);
    Ok(AuditReport {
        checks,
        hessian_sign_patterns: patterns,
        all_passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> AuditOptions {
        AuditOptions {
            n_theta: 3,
            n_instances: 10,
            ..AuditOptions::default()
        }
    }

    #[test]
    fn default_audit_passes_with_unique_names() {
        let report = run_checks(&quick()).unwrap();
        for c in &report.checks {
            assert!(c.passed, "{c:?}");
        }
        let mut names: Vec<&str> = report.checks.iter().map(|c| c.name.as_str()).collect();
        let n = names.len();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), n);
        assert!(report.all_passed);
    }

    #[test]
    fn corrupted_hessian_sign_fails() {
        fn negated(
            spec: &PolicySpec,
            t: &Trajectory<f64>,
            theta: &[f64],
            cfg: &EstimatorConfig<f64>,
            b: f64,
        ) -> Result<Vec<f64>, PolicyError> {
            Ok(hess_diag_sample(spec, t, theta, cfg, b)?.into_iter().map(|x| -x).collect())
        }
        let report = run_checks(&AuditOptions {
            hess_sample: negated,
            ..quick()
        })
        .unwrap();
        assert!(!report.check("hessian_diag_unbiasedness").unwrap().passed);
        assert!(report.check("gradient_unbiasedness").unwrap().passed);
        assert!(!report.all_passed);
    }
}
