//! Ground truth on enumerable tabular MDPs.
//!
//! Observations are one-hot state encodings, so any [`PolicySpec`] with
//! `obs_dim == n_states` can be evaluated exactly. The expected return is
//! computed by backward induction; trajectory enumeration gives exact
//! expectations of arbitrary per-trajectory estimators; central differences
//! of the exact return give the derivative references.

pub mod audit;

use std::cell::Cell;

use serde::Serialize;
use thiserror::Error;

use crate::env::{one_hot, MdpModel};
use crate::estimator::{returns_to_go, ReturnConvention, Step, Trajectory};
use crate::policy::{floored_ln, PolicyError, PolicySpec};
use crate::vecops::{axpy, zeros};
use crate::Real;

/// Default bound on enumerated paths.
pub const DEFAULT_ENUMERATION_CAP: usize = 1_000_000;
pub const DEFAULT_FD_GRAD_STEP: f64 = 1e-5;
pub const DEFAULT_FD_HESS_STEP: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("enumeration would visit up to {paths} paths ({n_states} states x {n_actions} actions, horizon {horizon}), above the cap of {cap}")]
    CapExceeded {
        paths: f64,
        n_states: usize,
        n_actions: usize,
        horizon: usize,
        cap: usize,
    },
    #[error("policy observation dimension {obs_dim} does not match {n_states} states")]
    ObsDim { obs_dim: usize, n_states: usize },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// One full-horizon trajectory with its exact probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnumeratedTrajectory<T> {
    /// s_0 .. s_H (the last entry is the terminal state).
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<T>,
    pub probability: T,
    /// From-start returns-to-go Σ_{k≥t} γ^k r_k.
    pub return_weights: Vec<T>,
}

impl<T: Real> EnumeratedTrajectory<T> {
    /// Sampled-trajectory view with one-hot observations.
    pub fn to_trajectory(&self, spec: &PolicySpec, theta: &[T]) -> Result<Trajectory<T>, PolicyError> {
        let n = spec.obs_dim;
        let steps = self
            .actions
            .iter()
            .enumerate()
            .map(|(h, &a)| {
                let obs = one_hot(n, self.states[h]);
                Ok(Step {
                    log_prob: spec.log_prob(theta, &obs, a)?,
                    obs,
                    action: a,
                    reward: self.rewards[h],
                })
            })
            .collect::<Result<_, PolicyError>>()?;
        Ok(Trajectory { steps })
    }
}

/// Per-state action distributions of π_θ on one-hot observations.
fn policy_table<T: Real, M: MdpModel<T>>(
    mdp: &M,
    spec: &PolicySpec,
    theta: &[T],
) -> Result<Vec<Vec<T>>, OracleError> {
    let n = mdp.n_states();
    if spec.obs_dim != n {
        return Err(OracleError::ObsDim {
            obs_dim: spec.obs_dim,
            n_states: n,
        });
    }
    (0..n)
        .map(|s| Ok(spec.action_distribution(theta, &one_hot(n, s))?))
        .collect()
}

/// Lists every positive-probability trajectory exactly once.
pub fn enumerate<T: Real, M: MdpModel<T>>(
    mdp: &M,
    spec: &PolicySpec,
    theta: &[T],
    cap: usize,
) -> Result<Vec<EnumeratedTrajectory<T>>, OracleError> {
    let (ns, na, horizon) = (mdp.n_states(), mdp.n_actions(), mdp.horizon());
    let paths = ((ns * na) as f64).powi(horizon as i32);
    if paths > cap as f64 {
        return Err(OracleError::CapExceeded {
            paths,
            n_states: ns,
            n_actions: na,
            horizon,
            cap,
        });
    }
    let pi = policy_table(mdp, spec, theta)?;
    let gamma = mdp.discount();
    let mut out = Vec::new();
    let mut states = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);

    struct Ctx<'a, T, M> {
        mdp: &'a M,
        pi: &'a [Vec<T>],
        gamma: T,
        horizon: usize,
    }

    fn recurse<T: Real, M: MdpModel<T>>(
        ctx: &Ctx<'_, T, M>,
        s: usize,
        p: T,
        states: &mut Vec<usize>,
        actions: &mut Vec<usize>,
        out: &mut Vec<EnumeratedTrajectory<T>>,
    ) {
        states.push(s);
        if actions.len() == ctx.horizon {
            let rewards: Vec<T> = (0..ctx.horizon)
                .map(|h| ctx.mdp.reward(states[h], actions[h]))
                .collect();
            out.push(EnumeratedTrajectory {
                return_weights: returns_to_go(&rewards, ctx.gamma, ReturnConvention::FromStart),
                rewards,
                states: states.clone(),
                actions: actions.clone(),
                probability: p,
            });
        } else {
            for a in 0..ctx.pi[s].len() {
                let pa = p * ctx.pi[s][a];
                if pa <= T::zero() {
                    continue;
                }
                actions.push(a);
                for next in 0..ctx.pi.len() {
                    let pt = ctx.mdp.transition(s, a, next);
                    if pt > T::zero() {
                        recurse(ctx, next, pa * pt, states, actions, out);
                    }
                }
                actions.pop();
            }
        }
        states.pop();
    }

    let ctx = Ctx {
        mdp,
        pi: &pi,
        gamma,
        horizon,
    };
    for s0 in 0..ns {
        let p0 = mdp.initial(s0);
        if p0 > T::zero() {
            recurse(&ctx, s0, p0, &mut states, &mut actions, &mut out);
        }
    }
    Ok(out)
}

/// Backward-induction tables for π_θ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueTables<T> {
    /// `v[t][s]`, t = 0..H−1.
    pub v: Vec<Vec<T>>,
    /// `q[t][s][a]`.
    pub q: Vec<Vec<Vec<T>>>,
    /// `state_dist[t][s] = Pr(s_t = s)`.
    pub state_dist: Vec<Vec<T>>,
    /// Σ_t γ^t Pr(s_t = s), unnormalized.
    pub occupancy: Vec<T>,
    /// π(a | s) used to build the tables.
    pub policy: Vec<Vec<T>>,
}

impl<T: Real> ValueTables<T> {
    /// A_t(s, a) = Q_t(s, a) − V_t(s).
    pub fn advantage(&self, t: usize, s: usize, a: usize) -> T {
        self.q[t][s][a] - self.v[t][s]
    }
}

pub fn value_tables<T: Real, M: MdpModel<T>>(
    mdp: &M,
    spec: &PolicySpec,
    theta: &[T],
) -> Result<ValueTables<T>, OracleError> {
    let pi = policy_table(mdp, spec, theta)?;
    let (ns, na, horizon, gamma) = (mdp.n_states(), mdp.n_actions(), mdp.horizon(), mdp.discount());

    let mut v = vec![zeros::<T>(ns); horizon];
    let mut q = vec![vec![zeros::<T>(na); ns]; horizon];
    for t in (0..horizon).rev() {
        for s in 0..ns {
            for a in 0..na {
                let mut cont = T::zero();
                if t + 1 < horizon {
                    for next in 0..ns {
                        cont += mdp.transition(s, a, next) * v[t + 1][next];
                    }
                }
                q[t][s][a] = mdp.reward(s, a) + gamma * cont;
            }
            v[t][s] = (0..na).map(|a| pi[s][a] * q[t][s][a]).sum();
        }
    }

    let mut state_dist = Vec::with_capacity(horizon);
    let mut cur: Vec<T> = (0..ns).map(|s| mdp.initial(s)).collect();
    let mut occupancy = zeros::<T>(ns);
    let mut disc = T::one();
    for _ in 0..horizon {
        axpy(disc, &cur, &mut occupancy);
        let mut next_dist = zeros::<T>(ns);
        for s in 0..ns {
            for a in 0..na {
                let w = cur[s] * pi[s][a];
                for next in 0..ns {
                    next_dist[next] += w * mdp.transition(s, a, next);
                }
            }
        }
        state_dist.push(std::mem::replace(&mut cur, next_dist));
        disc *= gamma;
    }

    Ok(ValueTables {
        v,
        q,
        state_dist,
        occupancy,
        policy: pi,
    })
}

/// J(θ) = Σ_s ρ(s) V_0(s) by backward induction (no enumeration cap).
pub fn exact_return<T: Real, M: MdpModel<T>>(mdp: &M, spec: &PolicySpec, theta: &[T]) -> Result<T, OracleError> {
    let tables = value_tables(mdp, spec, theta)?;
    Ok((0..mdp.n_states()).map(|s| mdp.initial(s) * tables.v[0][s]).sum())
}

/// J through the occupancy measure: Σ_s d^π(s) Σ_a π(a | s) r(s, a).
pub fn occupancy_return<T: Real, M: MdpModel<T>>(mdp: &M, tables: &ValueTables<T>) -> T {
    (0..mdp.n_states())
        .map(|s| {
            let r_bar: T = (0..mdp.n_actions())
                .map(|a| tables.policy[s][a] * mdp.reward(s, a))
                .sum();
            tables.occupancy[s] * r_bar
        })
        .sum()
}

/// Σ_τ p(τ) Σ_t γ^t r_t over the enumeration.
pub fn enumerated_return<T: Real>(trajs: &[EnumeratedTrajectory<T>]) -> T {
    trajs
        .iter()
        .map(|t| t.probability * t.return_weights.first().copied().unwrap_or_else(T::zero))
        .sum()
}

fn perturbed<T: Real>(theta: &[T], k: usize, delta: T) -> Vec<T> {
    let mut t = theta.to_vec();
    t[k] += delta;
    t
}

/// Central-difference gradient of the exact return.
pub fn fd_gradient<T: Real, M: MdpModel<T>>(
    mdp: &M,
    spec: &PolicySpec,
    theta: &[T],
    step: T,
) -> Result<Vec<T>, OracleError> {
    assert!(step > T::zero(), "finite-difference step must be positive");
    (0..theta.len())
        .map(|k| {
            let up = exact_return(mdp, spec, &perturbed(theta, k, step))?;
            let down = exact_return(mdp, spec, &perturbed(theta, k, -step))?;
            Ok((up - down) / (step + step))
        })
        .collect()
}

/// Second-order central differences for each diagonal entry of ∇²J.
pub fn fd_hessian_diag<T: Real, M: MdpModel<T>>(
    mdp: &M,
    spec: &PolicySpec,
    theta: &[T],
    step: T,
) -> Result<Vec<T>, OracleError> {
    assert!(step > T::zero(), "finite-difference step must be positive");
    let center = exact_return(mdp, spec, theta)?;
    (0..theta.len())
        .map(|k| {
            let up = exact_return(mdp, spec, &perturbed(theta, k, step))?;
            let down = exact_return(mdp, spec, &perturbed(theta, k, -step))?;
            Ok((up - center - center + down) / (step * step))
        })
        .collect()
}

/// Σ_τ p(τ) · f(τ) over all enumerated trajectories.
pub fn estimator_expectation<T, M, F>(
    mdp: &M,
    spec: &PolicySpec,
    theta: &[T],
    cap: usize,
    mut f: F,
) -> Result<Vec<T>, OracleError>
where
    T: Real,
    M: MdpModel<T>,
    F: FnMut(&Trajectory<T>) -> Result<Vec<T>, PolicyError>,
{
    let trajs = enumerate(mdp, spec, theta, cap)?;
    let mut acc: Option<Vec<T>> = None;
    for et in &trajs {
        let v = f(&et.to_trajectory(spec, theta)?)?;
        let sum = acc.get_or_insert_with(|| zeros(v.len()));
        axpy(et.probability, &v, sum);
    }
    Ok(acc.unwrap_or_default())
}

/// Log-probability of an enumerated path under π_θ, excluding the kernel.
pub fn policy_log_likelihood<T: Real>(et: &EnumeratedTrajectory<T>, spec: &PolicySpec, theta: &[T]) -> Result<T, PolicyError> {
    let n = spec.obs_dim;
    et.actions
        .iter()
        .enumerate()
        .map(|(h, &a)| {
            let lp = crate::policy::log_softmax(&spec.logits(theta, &one_hot(n, et.states[h]))?);
            Ok(floored_ln(lp[a]))
        })
        .sum()
}

/// Wraps a model and counts transition-kernel reads.
pub struct KernelProbe<'a, M> {
    inner: &'a M,
    reads: Cell<usize>,
}

impl<'a, M> KernelProbe<'a, M> {
    pub fn new(inner: &'a M) -> Self {
        Self {
            inner,
            reads: Cell::new(0),
        }
    }

    pub fn reads(&self) -> usize {
        self.reads.get()
    }

    pub fn reset(&self) {
        self.reads.set(0);
    }
}

impl<T: Real, M: MdpModel<T>> MdpModel<T> for KernelProbe<'_, M> {
    fn n_states(&self) -> usize {
        self.inner.n_states()
    }
    fn n_actions(&self) -> usize {
        self.inner.n_actions()
    }
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }
    fn discount(&self) -> T {
        self.inner.discount()
    }
    fn initial(&self, s: usize) -> T {
        self.inner.initial(s)
    }
    fn transition(&self, s: usize, a: usize, next: usize) -> T {
        self.reads.set(self.reads.get() + 1);
        self.inner.transition(s, a, next)
    }
    fn reward(&self, s: usize, a: usize) -> T {
        self.inner.reward(s, a)
    }
}
