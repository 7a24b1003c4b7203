//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fs;
use std::time::{Duration, Instant};

use pgsom_core::estimator::{grad_psi, hess_diag_sample, score, EstimatorConfig};
use pgsom_core::optim::clip_gradient;
use pgsom_core::oracle::audit::{default_fixture, fixture_policies};
use pgsom_core::oracle::{estimator_expectation, fd_gradient, fd_hessian_diag, DEFAULT_ENUMERATION_CAP};
use pgsom_core::vecops::{max_abs_diff, norm2};
use pgsom_core::{ClipConfig, GradEstimate, ParamVector, PolicySpec, SomState};
use pgsom_harness::output::{CURVES_FILE, TRAJECTORIES_FILE};
use pgsom_harness::{emit_outputs, run_experiment, run_grid, Method, RunConfig, RunRecord, Stabilizer};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const FIXTURE_SEED: u64 = 2024;
const FIXTURE_DISCOUNT: f64 = 0.9;
const N_THETA: usize = 20;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn random_thetas(dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..N_THETA)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

/// Worst |E[f] − reference| over both fixture policies at 20 random θ.
fn oracle_check<F, G>(mut estimate: F, mut reference: G) -> f64
where
    F: FnMut(&PolicySpec, &pgsom_core::estimator::Trajectory<f64>, &[f64]) -> Vec<f64>,
    G: FnMut(&PolicySpec, &[f64]) -> Vec<f64>,
{
    let mdp = default_fixture(FIXTURE_SEED, FIXTURE_DISCOUNT);
    let mut worst = 0.0_f64;
    for (i, (_, spec)) in fixture_policies(2, 2).into_iter().enumerate() {
        for theta in random_thetas(spec.dim(), 7 + i as u64) {
            let expected = estimator_expectation(&mdp, &spec, &theta, DEFAULT_ENUMERATION_CAP, |t| {
                Ok(estimate(&spec, t, &theta))
            })
            .unwrap();
            let err = max_abs_diff(&expected, &reference(&spec, &theta));
            worst = if err.is_nan() { f64::NAN } else { worst.max(err) };
        }
    }
    worst
}

fn within(err: f64, tol: f64) -> bool {
    err < tol
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn criterion_1() -> Outcome {
    let cfg = EstimatorConfig::unbiased(FIXTURE_DISCOUNT);
    let mdp = default_fixture(FIXTURE_SEED, FIXTURE_DISCOUNT);
    let (err, t) = timed(|| {
        oracle_check(
            |spec, traj, theta| grad_psi(spec, traj, theta, &cfg, 0.0).unwrap(),
            |spec, theta| fd_gradient(&mdp, spec, theta, 1e-5).unwrap(),
        )
    });
    let ok = within(err, 1e-6) && t < Duration::from_secs(10);
    outcome(ok, format!("max |E[grad_psi] - fd grad J| = {err:.3e} (< 1e-6), {:.2}s (< 10s)", t.as_secs_f64()))
}

fn criterion_2() -> Outcome {
    let cfg = EstimatorConfig::unbiased(FIXTURE_DISCOUNT);
    let mdp = default_fixture(FIXTURE_SEED, FIXTURE_DISCOUNT);
    let (err, t) = timed(|| {
        oracle_check(
            |spec, traj, theta| hess_diag_sample(spec, traj, theta, &cfg, 0.0).unwrap(),
            |spec, theta| fd_hessian_diag(&mdp, spec, theta, 1e-3).unwrap(),
        )
    });
    let ok = within(err, 1e-5) && t < Duration::from_secs(30);
    outcome(
        ok,
        format!("max |E[diag hess psi + score*grad psi] - fd diag hess J| = {err:.3e} (< 1e-5), {:.2}s (< 30s)", t.as_secs_f64()),
    )
}

fn criterion_3() -> Outcome {
    let err = oracle_check(
        |spec, traj, theta| score(spec, traj, theta).unwrap(),
        |spec, _| vec![0.0; spec.dim()],
    );
    outcome(within(err, 1e-10), format!("max |E[score]| = {err:.3e} (< 1e-10)"))
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

/// Denominator floor: central differences carry ~1e-11 absolute round-off,
/// so smaller entries cannot be resolved to 1e-5 relative accuracy.
const REL_FLOOR: f64 = 1e-5;

fn criterion_4() -> Outcome {
    let h = 1e-5;
    let bump = |theta: &[f64], k: usize, d: f64| {
        let mut t = theta.to_vec();
        t[k] += d;
        t
    };
    let (res, t) = timed(|| {
        let mut rng = StdRng::seed_from_u64(44);
        let specs = [PolicySpec::softmax_linear(4, 3), PolicySpec::mlp(4, 5, 3)];
        let (mut worst_g, mut worst_h, mut cases) = (0.0_f64, 0.0_f64, 0);
        for spec in specs {
            for _ in 0..100 {
                let theta: Vec<f64> = (0..spec.dim()).map(|_| rng.gen_range(-1.5..1.5)).collect();
                let obs: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let a = rng.gen_range(0..3);
                let d = spec.log_prob_derivatives(&theta, &obs, a).unwrap();
                for k in 0..spec.dim() {
                    let fd_g = (spec.log_prob(&bump(&theta, k, h), &obs, a).unwrap()
                        - spec.log_prob(&bump(&theta, k, -h), &obs, a).unwrap())
                        / (2.0 * h);
                    let fd_h = (spec.log_prob_grad(&bump(&theta, k, h), &obs, a).unwrap()[k]
                        - spec.log_prob_grad(&bump(&theta, k, -h), &obs, a).unwrap()[k])
                        / (2.0 * h);
                    worst_g = worst_g.max(rel_err(d.grad[k], fd_g));
                    worst_h = worst_h.max(rel_err(d.hess_diag[k], fd_h));
                }
                cases += 1;
            }
        }
        (worst_g, worst_h, cases)
    });
    let (g, hd, cases) = res;
    let ok = g < 1e-5 && hd < 1e-5 && t < Duration::from_secs(30);
    outcome(
        ok,
        format!(
            "{cases} cases (softmax-linear + mlp-1h): grad rel err {g:.3e}, hess_diag rel err {hd:.3e} (< 1e-5), {:.2}s (< 30s)",
            t.as_secs_f64()
        ),
    )
}

fn find(records: &[RunRecord], m: Method, s: Stabilizer) -> &RunRecord {
    records.iter().find(|r| r.method == m && r.stabilizer == s).unwrap()
}

fn criterion_5(records: &[RunRecord], elapsed: Duration) -> Outcome {
    let get = |m, s| find(records, m, s);
    let mut parts = Vec::new();
    let mut ok = elapsed < Duration::from_secs(30 * 60);
    for m in Method::ALL {
        let (clip, none) = (get(m, Stabilizer::Clip), get(m, Stabilizer::None));
        let c = clip.final_mean > none.final_mean;
        ok &= c;
        parts.push(format!("{m}+clip {:.1} > {m} {:.1}: {c}", clip.final_mean, none.final_mean));
    }
    let (rk, pg) = (get(Method::Rk, Stabilizer::None), get(Method::Pg, Stabilizer::None));
    let b = rk.final_mean > pg.final_mean;
    ok &= b;
    parts.push(format!("rk {:.1} > pg {:.1}: {b}", rk.final_mean, pg.final_mean));
    for m in [Method::Hessian, Method::Rk] {
        let (clip, none) = (get(m, Stabilizer::Clip), get(m, Stabilizer::None));
        let c = clip.final_std < none.final_std;
        ok &= c;
        parts.push(format!("std {m}+clip {:.1} < {m} {:.1}: {c}", clip.final_std, none.final_std));
    }
    parts.push(format!("grid {:.1}s", elapsed.as_secs_f64()));
    outcome(ok, parts.join("; "))
}

fn criterion_6(records: &[RunRecord]) -> Outcome {
    let rk = find(records, Method::Rk, Stabilizer::None).episodes_to_200;
    let pg = find(records, Method::Pg, Stabilizer::None).episodes_to_200;
    let ok = match (rk, pg) {
        (Some(r), Some(p)) => r <= p,
        (Some(_), None) => true,
        (None, _) => false,
    };
    let speedup = match (rk, pg) {
        (Some(r), Some(p)) => format!(", rk reaches 200 {:.0}% sooner", 100.0 * (1.0 - r / p)),
        _ => String::new(),
    };
    let show = |x: Option<f64>| x.map_or("never".to_string(), |v| v.to_string());
    outcome(ok, format!("median episodes-to-200: rk {} <= pg {}{speedup}", show(rk), show(pg)))
}

fn criterion_7() -> Outcome {
    let run = |m| {
        let cfg = RunConfig {
            method: m,
            episodes: 25,
            seeds: vec![3],
            ..RunConfig::default()
        };
        run_experiment(&cfg).unwrap().seeds.remove(0)
    };
    let (pg, hess, rk) = (run(Method::Pg), run(Method::Hessian), run(Method::Rk));
    let per_update = |s: &pgsom_harness::SeedRun| s.derivative_passes() as f64 / s.updates as f64;
    let no_divergence = [&pg, &hess, &rk].iter().all(|s| s.diverged_at.is_none() && s.updates == 25);
    let ok = no_divergence
        && pg.derivative_passes() == pg.updates
        && hess.derivative_passes() == 2 * hess.updates
        && hess.grad_passes == hess.hess_passes
        && rk.trajectories == 2 * rk.updates
        && pg.trajectories == pg.updates;
    outcome(
        ok,
        format!(
            "passes/update: pg {}, hessian {}; trajectories/update: pg {}, rk {}",
            per_update(&pg),
            per_update(&hess),
            pg.trajectories as f64 / pg.updates as f64,
            rk.trajectories as f64 / rk.updates as f64
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = StdRng::seed_from_u64(8);
    let mut bias_ok = true;
    for &b1 in &[0.0, 0.3, 0.9, 0.99, 0.999_999] {
        for _ in 0..50 {
            let v: Vec<f64> = (0..6).map(|_| rng.gen_range(-1e3..1e3) * rng.gen::<f64>().powi(6)).collect();
            let mut s = SomState::new(6, 0.01, b1, 0.999, 1e-8);
            s.step(
                &ParamVector::zeros(6),
                &GradEstimate {
                    g: v.clone(),
                    h: vec![1.0; 6],
                    n_trajectories: 1,
                },
            )
            .unwrap();
            bias_ok &= s.corrected_moments().0 == v;
        }
    }

    let clip = ClipConfig::new(50.0);
    let mut clip_ok = clip_gradient(&[60.0, 80.0], &clip) == [30.0, 40.0];
    let mut worst_norm = 0.0_f64;
    for _ in 0..1000 {
        let scale = 10f64.powf(rng.gen_range(-3.0..6.0));
        let g: Vec<f64> = (0..8).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
        let n = norm2(&clip_gradient(&g, &clip));
        worst_norm = worst_norm.max(n);
        clip_ok &= n <= 50.0 + 1e-12;
    }

    // independent momentum-ascent reference: S ← βS + g, N ← βN + 1, θ ← θ + η S/N
    let (eta, beta) = (0.02, 0.9);
    let mut som = SomState::new(4, eta, beta, 0.999, 0.0);
    let mut theta = ParamVector::from_vec(vec![0.5, -0.25, 1.0, 0.0]);
    let mut reference = theta.to_vec();
    let (mut s_ref, mut n_ref) = (vec![0.0; 4], 0.0);
    let mut momentum_ok = true;
    for _ in 0..200 {
        let g: Vec<f64> = (0..4).map(|_| rng.gen_range(-100.0..100.0)).collect();
        theta = som
            .step(
                &theta,
                &GradEstimate {
                    g: g.clone(),
                    h: vec![1.0; 4],
                    n_trajectories: 1,
                },
            )
            .unwrap();
        n_ref = beta * n_ref + 1.0;
        for k in 0..4 {
            s_ref[k] = beta * s_ref[k] + g[k];
            reference[k] += eta * (s_ref[k] / n_ref);
        }
        momentum_ok &= theta.iter().zip(&reference).all(|(a, b)| a.to_bits() == b.to_bits());
    }

    outcome(
        bias_ok && clip_ok && momentum_ok,
        format!(
            "first-step bias correction exact: {bias_ok}; clip norm <= 50 (worst {worst_norm:.6}): {clip_ok}; unit-curvature PG-SOM == momentum ascent bitwise over 200 steps: {momentum_ok}"
        ),
    )
}

fn criterion_9(records: &[RunRecord]) -> Outcome {
    let picked: Vec<RunRecord> = [(Method::Hessian, Stabilizer::None), (Method::Rk, Stabilizer::Clip)]
        .iter()
        .map(|&(m, s)| find(records, m, s).clone())
        .collect();
    let rerun: Vec<RunRecord> = picked
        .iter()
        .map(|r| run_experiment(&RunConfig::default().variant(r.method, r.stabilizer)).unwrap())
        .collect();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    emit_outputs(&picked, a.path()).unwrap();
    emit_outputs(&rerun, b.path()).unwrap();
    let same = |f: &str| fs::read(a.path().join(f)).unwrap() == fs::read(b.path().join(f)).unwrap();
    let ok = same(CURVES_FILE) && same(TRAJECTORIES_FILE);
    outcome(
        ok,
        "hessian/none and rk/clip (5 seeds x 500 episodes) rerun serially vs the parallel grid: curves.csv and trajectories.csv byte-identical",
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "oracle gradient unbiasedness", criterion_1()),
        (2, "diagonal-Hessian unbiasedness", criterion_2()),
        (3, "expected score is zero", criterion_3()),
        (4, "policy derivative correctness", criterion_4()),
    ];
    let (grid, elapsed) = timed(|| run_grid(&RunConfig::default()).unwrap());
    println!("CartPole grid, 5 seeds x 500 episodes (final-episode return):");
    println!("  {:<18} {:>8} {:>8} {:>8}", "model", "mean", "std", "ep->200");
    for r in &grid {
        println!(
            "  {:<18} {:>8.2} {:>8.2} {:>8}",
            r.model(),
            r.final_mean,
            r.final_std,
            r.episodes_to_200.map_or("NA".into(), |v| v.to_string())
        );
    }
    results.push((5, "ablation ordering pattern on CartPole", criterion_5(&grid, elapsed)));
    results.push((6, "sample efficiency, rk <= pg", criterion_6(&grid)));
    results.push((7, "complexity instrumentation", criterion_7()));
    results.push((8, "optimizer unit identities", criterion_8()));
    results.push((9, "determinism", criterion_9(&grid)));

    let mut all = true;
    for (n, name, o) in &results {
        all &= o.passed;
        println!("criterion {n} {}: {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    if !all {
        eprintln!("acceptance: at least one criterion failed");
        std::process::exit(1);
    }
}
