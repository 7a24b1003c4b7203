use pgsom_core::env::{Episodic, MdpEnv, TabularMdp};
use pgsom_core::estimator::{grad_psi, hess_diag_sample, psi_derivatives, returns_to_go, rollout, score, Estimator};
use pgsom_core::{BaselineState, EstimatorConfig, PolicySpec, ReturnConvention, Trajectory};
use rand::rngs::StdRng;
use rand::SeedableRng;

fn fixture() -> (TabularMdp<f64>, PolicySpec, Vec<f64>) {
    let mdp = TabularMdp::random(3, 2, 5, 0.95, &mut StdRng::seed_from_u64(3));
    let spec = PolicySpec::softmax_linear(3, 2);
    let theta = vec![0.4, -0.2, 0.1, 0.9, -0.5, 0.3];
    (mdp, spec, theta)
}

fn sample(seed: u64) -> Trajectory<f64> {
    let (mdp, spec, theta) = fixture();
    let mut env = MdpEnv::new(mdp);
    rollout(&mut env, &spec, &theta, &mut StdRng::seed_from_u64(seed)).unwrap()
}

#[test]
fn return_conventions_hand_values() {
    let r = [1.0, 1.0, 1.0];
    assert_eq!(returns_to_go(&r, 1.0, ReturnConvention::FromStep), vec![3.0, 2.0, 1.0]);
    assert_eq!(returns_to_go(&r, 1.0, ReturnConvention::FromStart), vec![3.0, 2.0, 1.0]);
    assert_eq!(returns_to_go(&r, 0.5, ReturnConvention::FromStep), vec![1.75, 1.5, 1.0]);
    assert_eq!(returns_to_go(&r, 0.5, ReturnConvention::FromStart), vec![1.75, 0.75, 0.25]);
}

#[test]
fn cached_log_probs_match_recomputation() {
    let (_, spec, theta) = fixture();
    for seed in 0..20 {
        let traj = sample(seed);
        assert_eq!(traj.len(), 5);
        for s in &traj.steps {
            assert_eq!(s.log_prob, spec.log_prob(&theta, &s.obs, s.action).unwrap());
        }
    }
}

#[test]
fn rollouts_are_reproducible() {
    assert_eq!(sample(9), sample(9));
}

#[test]
fn grad_psi_matches_finite_differences_of_psi() {
    let (_, spec, theta) = fixture();
    let cfg = EstimatorConfig::unbiased(0.95);
    let traj = sample(1);
    let g = grad_psi(&spec, &traj, &theta, &cfg, 0.0).unwrap();
    let h = 1e-6;
    for k in 0..theta.len() {
        let mut up = theta.clone();
        up[k] += h;
        let mut down = theta.clone();
        down[k] -= h;
        let fd = (psi_derivatives(&spec, &traj, &up, &cfg, 0.0).unwrap().psi
            - psi_derivatives(&spec, &traj, &down, &cfg, 0.0).unwrap().psi)
            / (2.0 * h);
        assert!((g[k] - fd).abs() / g[k].abs().max(1e-3) < 1e-6, "k={k}: {} vs {fd}", g[k]);
    }
}

#[test]
fn zero_reward_trajectory_gives_zero_estimates() {
    let (_, spec, theta) = fixture();
    let mut traj = sample(2);
    for s in &mut traj.steps {
        s.reward = 0.0;
    }
    let cfg = EstimatorConfig::default();
    let est = Estimator::new(spec, cfg);
    let out = est.second_order(std::slice::from_ref(&traj), &theta, 0.0).unwrap();
    assert!(out.g.iter().chain(&out.h).all(|&x| x == 0.0));
    assert_eq!(psi_derivatives(&spec, &traj, &theta, &cfg, 0.0).unwrap().psi, 0.0);
}

#[test]
fn single_step_unit_weight_is_the_log_prob_gradient() {
    let (_, spec, theta) = fixture();
    let mut traj = sample(4);
    traj.steps.truncate(1);
    traj.steps[0].reward = 1.0;
    let s = &traj.steps[0];
    let g = grad_psi(&spec, &traj, &theta, &EstimatorConfig::default(), 0.0).unwrap();
    assert_eq!(g, spec.log_prob_grad(&theta, &s.obs, s.action).unwrap());
    assert_eq!(score(&spec, &traj, &theta).unwrap(), g);
    assert!(score(&spec, &Trajectory::default(), &theta).unwrap().iter().all(|&x| x == 0.0));
}

#[test]
fn duplicated_batches_leave_means_unchanged() {
    let (_, spec, theta) = fixture();
    let est = Estimator::new(spec, EstimatorConfig::default());
    let t = sample(5);
    let one = est.second_order(std::slice::from_ref(&t), &theta, 0.0).unwrap();
    let three = est.second_order(&[t.clone(), t.clone(), t.clone()], &theta, 0.0).unwrap();
    for (a, b) in one.g.iter().zip(&three.g).chain(one.h.iter().zip(&three.h)) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
    assert_eq!(three.n_trajectories, 3);
    assert!(est.grad_estimate(&[], &theta, 0.0).is_err());
}

#[test]
fn second_order_costs_one_extra_pass_per_trajectory() {
    let (_, spec, theta) = fixture();
    let est = Estimator::new(spec, EstimatorConfig::default());
    let batch = [sample(6), sample(7)];
    est.first_order(&batch, &theta, 0.0).unwrap();
    let first = est.counter.total();
    est.counter.reset();
    est.second_order(&batch, &theta, 0.0).unwrap();
    assert_eq!(first, 2);
    assert_eq!(est.counter.total(), 2 * first);
}

#[test]
fn hess_sample_is_weighted_hessian_plus_score_product() {
    let (_, spec, theta) = fixture();
    let cfg = EstimatorConfig::unbiased(0.95);
    let t = sample(8);
    let d = psi_derivatives(&spec, &t, &theta, &cfg, 0.0).unwrap();
    let sc = score(&spec, &t, &theta).unwrap();
    let h = hess_diag_sample(&spec, &t, &theta, &cfg, 0.0).unwrap();
    for k in 0..theta.len() {
        assert!((h[k] - (d.hess_diag[k] + sc[k] * d.grad[k])).abs() < 1e-12);
    }
}

#[test]
fn entropy_bonus_points_toward_higher_entropy() {
    // near-deterministic linear policy on a single observation
    let spec = PolicySpec::softmax_linear(1, 2);
    let theta = vec![6.0, -6.0];
    let obs = [1.0];
    let cfg = EstimatorConfig {
        entropy_coeff: 0.5,
        ..EstimatorConfig::default()
    };
    let traj = Trajectory {
        steps: vec![pgsom_core::estimator::Step {
            obs: obs.to_vec(),
            action: 0,
            reward: 0.0,
            log_prob: spec.log_prob(&theta, &obs, 0).unwrap(),
        }],
    };
    let g = Estimator::new(spec, cfg).grad_estimate(&[traj], &theta, 0.0).unwrap();
    let h0 = spec.entropy(&theta, &obs).unwrap();
    let probe: Vec<f64> = theta.iter().zip(&g).map(|(t, d)| t + 1e-3 * d).collect();
    assert!(spec.entropy(&probe, &obs).unwrap() > h0);
}

#[test]
fn baseline_running_mean_rules() {
    let mut b = BaselineState::<f64>::default();
    assert_eq!(b.value(), 0.0);
    b.update(100.0, 0.9);
    assert_eq!(b.value(), 100.0);
    b.update(200.0, 0.9);
    assert!((b.value() - 110.0).abs() < 1e-12);

    let mut last = BaselineState::<f64>::default();
    for r in [3.0, 8.0, -2.0] {
        last.update(r, 0.0);
        assert_eq!(last.value(), r);
    }
}

#[test]
fn env_reports_dimensions() {
    let (mdp, _, _) = fixture();
    let env = MdpEnv::new(mdp);
    assert_eq!((env.obs_dim(), env.n_actions()), (3, 2));
}
