//! Training loops and the method × stabilizer grid.

use std::time::Instant;

use pgsom_core::env::{CartPole, Episodic, MdpEnv, TabularMdp};
use pgsom_core::estimator::{rollout, BaselineKind, Estimator, EstimatorError};
use pgsom_core::optim::{clip_gradient, rk_round, vanilla_step, OptimError};
use pgsom_core::{BaselineState, ClipConfig, GradEstimate, ParamVector, PolicySpec, RkConfig, SomState};
use rand::rngs::StdRng;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{EnvChoice, Method, RunConfig, Stabilizer};
use crate::stats::{censored_median, episodes_to_threshold, mean_std, SMOOTHING_WINDOW};
use crate::HarnessError;

/// One seed's learning curve and bookkeeping.
#[derive(Debug, Clone, Serialize)]
pub struct SeedRun {
    pub seed: u64,
    /// Undiscounted return of the trajectory collected at the pre-update
    /// parameters, one per episode (update).
    pub returns: Vec<f64>,
    /// Every collected trajectory in order; rk contributes two per update.
    pub trajectory_returns: Vec<f64>,
    pub episode_seconds: Vec<f64>,
    /// 0-based episode whose update produced non-finite parameters.
    pub diverged_at: Option<usize>,
    pub updates: u64,
    pub trajectories: u64,
    pub grad_passes: u64,
    pub hess_passes: u64,
}

impl SeedRun {
    pub fn derivative_passes(&self) -> u64 {
        self.grad_passes + self.hess_passes
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub method: Method,
    pub stabilizer: Stabilizer,
    pub lr: f64,
    pub episodes: usize,
    pub seeds: Vec<SeedRun>,
    pub final_mean: f64,
    pub final_std: f64,
    /// Median across seeds of the first episode whose 10-episode moving
    /// average reaches the threshold; `None` if the median seed never does.
    pub episodes_to_200: Option<f64>,
    pub episodes_to_400: Option<f64>,
}

impl RunRecord {
    fn from_seeds(cfg: &RunConfig, seeds: Vec<SeedRun>) -> Self {
        let finals: Vec<f64> = seeds.iter().map(|s| *s.returns.last().expect("episodes ≥ 1")).collect();
        let (final_mean, final_std) = mean_std(&finals);
        let to = |r: f64| {
            let per_seed: Vec<Option<usize>> = seeds
                .iter()
                .map(|s| episodes_to_threshold(&s.returns, r, SMOOTHING_WINDOW))
                .collect();
            censored_median(&per_seed)
        };
        Self {
            method: cfg.method,
            stabilizer: cfg.stabilizer,
            lr: cfg.learning_rate(),
            episodes: cfg.episodes,
            final_mean,
            final_std,
            episodes_to_200: to(200.0),
            episodes_to_400: to(400.0),
            seeds,
        }
    }

    /// Table label, e.g. `rk` or `hessian+clip`.
    pub fn model(&self) -> String {
        match self.stabilizer {
            Stabilizer::None => self.method.to_string(),
            s => format!("{}+{}", self.method, s),
        }
    }

    pub fn any_diverged(&self) -> bool {
        self.seeds.iter().any(|s| s.diverged_at.is_some())
    }
}

enum Failure {
    Diverged,
    Fatal(HarnessError),
}

impl From<OptimError> for Failure {
    fn from(e: OptimError) -> Self {
        match e {
            OptimError::NonFinite(_) => Failure::Diverged,
            other => Failure::Fatal(other.into()),
        }
    }
}

impl From<EstimatorError> for Failure {
    fn from(e: EstimatorError) -> Self {
        Failure::Fatal(e.into())
    }
}

/// Policy used when the config does not name one.
pub fn resolve_policy(cfg: &RunConfig, obs_dim: usize, n_actions: usize) -> Result<PolicySpec, HarnessError> {
    let spec = cfg.policy.unwrap_or_else(|| PolicySpec::softmax_linear(obs_dim, n_actions));
    if spec.obs_dim != obs_dim || spec.n_actions != n_actions {
        return Err(HarnessError::Config(format!(
            "policy expects {}×{} but the environment has {obs_dim} observations and {n_actions} actions",
            spec.obs_dim, spec.n_actions
        )));
    }
    Ok(spec)
}

struct Learner<'a, E> {
    cfg: &'a RunConfig,
    env: E,
    rng: StdRng,
    estimator: Estimator<f64>,
    clip: ClipConfig<f64>,
    baseline: BaselineState<f64>,
    trajectory_returns: Vec<f64>,
}

impl<E: Episodic<f64>> Learner<'_, E> {
    /// Collects one fresh trajectory at θ and turns it into a (clipped) estimate.
    fn sample(&mut self, theta: &ParamVector<f64>) -> Result<GradEstimate<f64>, Failure> {
        let traj = rollout(&mut self.env, &self.estimator.spec, theta, &mut self.rng)?;
        self.trajectory_returns.push(traj.total_reward());
        let b = self.baseline.value();
        let batch = std::slice::from_ref(&traj);
        let mut est = match self.cfg.method {
            Method::Hessian => self.estimator.second_order(batch, theta, b)?,
            Method::Pg | Method::Rk => self.estimator.first_order(batch, theta, b)?,
        };
        if self.estimator.config.baseline == BaselineKind::RunningMean {
            self.baseline.update_from(&traj, &self.estimator.config);
        }
        est.g = clip_gradient(&est.g, &self.clip);
        if self.cfg.method == Method::Hessian {
            est.h = clip_gradient(&est.h, &self.clip);
        }
        Ok(est)
    }
}

fn run_seed<E: Episodic<f64>>(cfg: &RunConfig, spec: PolicySpec, env: E, seed: u64) -> Result<SeedRun, HarnessError> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut theta: ParamVector<f64> = spec.init_params(&mut rng);
    let lr = cfg.learning_rate();
    let mut learner = Learner {
        cfg,
        env,
        rng,
        estimator: Estimator::new(spec, cfg.effective_estimator()),
        clip: if cfg.clipping() {
            ClipConfig::new(cfg.clip_norm)
        } else {
            ClipConfig::disabled()
        },
        baseline: BaselineState::default(),
        trajectory_returns: Vec::with_capacity(cfg.episodes),
    };
    let mut som = SomState::new(spec.dim(), lr, cfg.beta1, cfg.beta2, cfg.epsilon);
    let rk = RkConfig {
        alpha: cfg.alpha,
        kappa: cfg.lookahead(),
        eta: lr,
    };

    let mut returns = Vec::with_capacity(cfg.episodes);
    let mut episode_seconds = Vec::with_capacity(cfg.episodes);
    let mut diverged_at = None;
    let mut updates = 0;
    for episode in 0..cfg.episodes {
        if diverged_at.is_some() {
            let last = returns.last().copied().unwrap_or(0.0);
            returns.push(last);
            episode_seconds.push(0.0);
            continue;
        }
        let start = Instant::now();
        let first_traj = learner.trajectory_returns.len();
        let next = match cfg.method {
            Method::Pg => learner
                .sample(&theta)
                .and_then(|est| vanilla_step(&theta, &est.g, lr).map_err(Failure::from)),
            Method::Hessian => learner
                .sample(&theta)
                .and_then(|est| som.step(&theta, &est).map_err(Failure::from)),
            Method::Rk => rk_round(&theta, &rk, |p| learner.sample(p)),
        };
        if let Some(&r) = learner.trajectory_returns.get(first_traj) {
            returns.push(r);
        }
        match next {
            Ok(p) if p.is_finite() => {
                theta = p;
                updates += 1;
            }
            Ok(_) | Err(Failure::Diverged) => {
                diverged_at = Some(episode);
                if returns.len() == episode {
                    let last = returns.last().copied().unwrap_or(0.0);
                    returns.push(last);
                }
            }
            Err(Failure::Fatal(e)) => return Err(e),
        }
        episode_seconds.push(start.elapsed().as_secs_f64());
    }

    Ok(SeedRun {
        seed,
        returns,
        trajectories: learner.trajectory_returns.len() as u64,
        trajectory_returns: learner.trajectory_returns,
        episode_seconds,
        diverged_at,
        updates,
        grad_passes: learner.estimator.counter.grad_passes(),
        hess_passes: learner.estimator.counter.hess_passes(),
    })
}

enum LoadedEnv {
    CartPole,
    Mdp(TabularMdp<f64>),
}

impl LoadedEnv {
    fn load(choice: &EnvChoice) -> Result<Self, HarnessError> {
        Ok(match choice {
            EnvChoice::CartPole => LoadedEnv::CartPole,
            EnvChoice::Mdp(path) => LoadedEnv::Mdp(TabularMdp::from_json_file(path)?),
        })
    }

    fn run(&self, cfg: &RunConfig, seed: u64) -> Result<SeedRun, HarnessError> {
        match self {
            LoadedEnv::CartPole => {
                let env = CartPole::<f64>::default();
                let spec = resolve_policy(cfg, env.obs_dim(), env.n_actions())?;
                run_seed(cfg, spec, env, seed)
            }
            LoadedEnv::Mdp(mdp) => {
                let env = MdpEnv::new(mdp.clone());
                let spec = resolve_policy(cfg, env.obs_dim(), env.n_actions())?;
                run_seed(cfg, spec, env, seed)
            }
        }
    }
}

/// Trains every seed of `cfg` sequentially.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunRecord, HarnessError> {
    cfg.validate()?;
    let env = LoadedEnv::load(&cfg.env)?;
    let seeds = cfg
        .seeds
        .iter()
        .map(|&s| env.run(cfg, s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RunRecord::from_seeds(cfg, seeds))
}

/// Runs all 12 method × stabilizer combinations of `base`, parallel over
/// (method, stabilizer, seed). Records come back in a fixed order.
pub fn run_grid(base: &RunConfig) -> Result<Vec<RunRecord>, HarnessError> {
    base.validate()?;
    let env = LoadedEnv::load(&base.env)?;
    let variants: Vec<RunConfig> = Method::ALL
        .iter()
        .flat_map(|&m| Stabilizer::ALL.iter().map(move |&s| base.variant(m, s)))
        .collect();
    let jobs: Vec<(usize, u64)> = variants
        .iter()
        .enumerate()
        .flat_map(|(i, v)| v.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let mut results = jobs
        .par_iter()
        .map(|&(i, seed)| env.run(&variants[i], seed).map(|r| (i, r)))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter();
    // par_iter().collect() preserves job order
    Ok(variants
        .iter()
        .map(|v| RunRecord::from_seeds(v, results.by_ref().take(v.seeds.len()).map(|(_, r)| r).collect()))
        .collect())
}
