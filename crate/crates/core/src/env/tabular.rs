use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EnvError, Episodic, StepOutcome};
use crate::vecops::sample_index;
use crate::Real;

/// Read-only view of a finite-horizon tabular MDP.
///
/// The oracle reads the model exclusively through this trait, so a wrapper
/// can observe which parts of the model a computation touches.
pub trait MdpModel<T: Real> {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn horizon(&self) -> usize;
    fn discount(&self) -> T;
    fn initial(&self, s: usize) -> T;
    fn transition(&self, s: usize, a: usize, next: usize) -> T;
    fn reward(&self, s: usize, a: usize) -> T;
}

/// Finite MDP with rewards r(s, a), initial distribution and fixed horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp<T> {
    n_states: usize,
    n_actions: usize,
    /// `transition[s][a][s']`
    transition: Vec<Vec<Vec<T>>>,
    reward: Vec<Vec<T>>,
    initial_dist: Vec<T>,
    horizon: usize,
    discount: T,
}

/// On-disk JSON layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct MdpDocument {
    n_states: usize,
    n_actions: usize,
    transition: Vec<Vec<Vec<f64>>>,
    reward: Vec<Vec<f64>>,
    initial_dist: Vec<f64>,
    horizon: usize,
    discount: f64,
}

fn check_distribution<T: Real>(p: &[T], what: &str) -> Result<(), EnvError> {
    let tol = T::lit(1e-12).max(T::epsilon() * T::lit(8.0));
    if p.iter().any(|&x| !(x >= T::zero()) || !x.is_finite()) {
        return Err(EnvError::InvalidMdp(format!("{what} has a negative or non-finite entry")));
    }
    let total: T = p.iter().copied().sum();
    if (total - T::one()).abs() > tol {
        return Err(EnvError::InvalidMdp(format!("{what} sums to {total}, expected 1")));
    }
    Ok(())
}

impl<T: Real> TabularMdp<T> {
    pub fn new(
        transition: Vec<Vec<Vec<T>>>,
        reward: Vec<Vec<T>>,
        initial_dist: Vec<T>,
        horizon: usize,
        discount: T,
    ) -> Result<Self, EnvError> {
        let n_states = initial_dist.len();
        if n_states == 0 {
            return Err(EnvError::InvalidMdp("no states".into()));
        }
        let n_actions = reward.first().map_or(0, Vec::len);
        if n_actions == 0 {
            return Err(EnvError::InvalidMdp("no actions".into()));
        }
        if transition.len() != n_states || reward.len() != n_states {
            return Err(EnvError::InvalidMdp("state dimension mismatch".into()));
        }
        for s in 0..n_states {
            if transition[s].len() != n_actions || reward[s].len() != n_actions {
                return Err(EnvError::InvalidMdp(format!("action dimension mismatch at state {s}")));
            }
            for a in 0..n_actions {
                if transition[s][a].len() != n_states {
                    return Err(EnvError::InvalidMdp(format!("row P[{s}][{a}] has wrong length")));
                }
                check_distribution(&transition[s][a], &format!("P[{s}][{a}]"))?;
                if !reward[s][a].is_finite() {
                    return Err(EnvError::InvalidMdp(format!("r({s},{a}) is not finite")));
                }
            }
        }
        check_distribution(&initial_dist, "initial_dist")?;
        if horizon == 0 {
            return Err(EnvError::InvalidMdp("horizon must be at least 1".into()));
        }
        if !(discount > T::zero() && discount <= T::one()) {
            return Err(EnvError::InvalidMdp(format!("discount {discount} outside (0, 1]")));
        }
        Ok(Self {
            n_states,
            n_actions,
            transition,
            reward,
            initial_dist,
            horizon,
            discount,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self, EnvError> {
        let doc: MdpDocument = serde_json::from_str(text)?;
        let conv2 = |m: Vec<Vec<f64>>| -> Vec<Vec<T>> {
            m.into_iter().map(|r| r.into_iter().map(T::lit).collect()).collect()
        };
        let mdp = Self::new(
            doc.transition.into_iter().map(conv2).collect(),
            conv2(doc.reward),
            doc.initial_dist.into_iter().map(T::lit).collect(),
            doc.horizon,
            T::lit(doc.discount),
        )?;
        if mdp.n_states != doc.n_states || mdp.n_actions != doc.n_actions {
            return Err(EnvError::InvalidMdp(format!(
                "declared {}x{} but tables are {}x{}",
                doc.n_states, doc.n_actions, mdp.n_states, mdp.n_actions
            )));
        }
        Ok(mdp)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, EnvError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        let conv2 = |m: &Vec<Vec<T>>| -> Vec<Vec<f64>> {
            m.iter().map(|r| r.iter().map(|x| x.as_f64()).collect()).collect()
        };
        let doc = MdpDocument {
            n_states: self.n_states,
            n_actions: self.n_actions,
            transition: self.transition.iter().map(conv2).collect(),
            reward: conv2(&self.reward),
            initial_dist: self.initial_dist.iter().map(|x| x.as_f64()).collect(),
            horizon: self.horizon,
            discount: self.discount.as_f64(),
        };
        serde_json::to_string_pretty(&doc).expect("MDP document serializes")
    }

    /// Random instance with strictly positive transition rows, rewards in [-1, 1].
    pub fn random<R: Rng + ?Sized>(
        n_states: usize,
        n_actions: usize,
        horizon: usize,
        discount: T,
        rng: &mut R,
    ) -> Self {
        let mut dist = |n: usize| -> Vec<T> {
            let w: Vec<f64> = (0..n).map(|_| 0.05 + rng.gen::<f64>()).collect();
            let total: f64 = w.iter().sum();
            let mut p: Vec<T> = w.iter().map(|x| T::lit(x / total)).collect();
            // absorb rounding so the row sums to one in T
            let head: T = p[..n - 1].iter().copied().sum();
            p[n - 1] = T::one() - head;
            p
        };
        let transition = (0..n_states)
            .map(|_| (0..n_actions).map(|_| dist(n_states)).collect())
            .collect();
        let initial = dist(n_states);
        let reward = (0..n_states)
            .map(|_| (0..n_actions).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect())
            .collect();
        Self::new(transition, reward, initial, horizon, discount).expect("random MDP is valid")
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[T] {
        &self.transition[s][a]
    }

    pub fn initial_dist(&self) -> &[T] {
        &self.initial_dist
    }

    /// Copy of this MDP with another transition tensor.
    pub fn with_transition(&self, transition: Vec<Vec<Vec<T>>>) -> Result<Self, EnvError> {
        Self::new(
            transition,
            self.reward.clone(),
            self.initial_dist.clone(),
            self.horizon,
            self.discount,
        )
    }

    /// Bound on the number of (state, action) paths of full length.
    pub fn path_count(&self) -> f64 {
        ((self.n_states * self.n_actions) as f64).powi(self.horizon as i32)
    }

    fn check_indices(&self, s: usize, a: usize) -> Result<(), EnvError> {
        if s >= self.n_states {
            return Err(EnvError::IndexOutOfRange {
                what: "state",
                index: s,
                limit: self.n_states,
            });
        }
        if a >= self.n_actions {
            return Err(EnvError::IndexOutOfRange {
                what: "action",
                index: a,
                limit: self.n_actions,
            });
        }
        Ok(())
    }
}

impl<T: Real> MdpModel<T> for TabularMdp<T> {
    fn n_states(&self) -> usize {
        self.n_states
    }
    fn n_actions(&self) -> usize {
        self.n_actions
    }
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn discount(&self) -> T {
        self.discount
    }
    fn initial(&self, s: usize) -> T {
        self.initial_dist[s]
    }
    fn transition(&self, s: usize, a: usize, next: usize) -> T {
        self.transition[s][a][next]
    }
    fn reward(&self, s: usize, a: usize) -> T {
        self.reward[s][a]
    }
}

pub fn one_hot<T: Real>(n: usize, i: usize) -> Vec<T> {
    let mut v = vec![T::zero(); n];
    v[i] = T::one();
    v
}

/// Draws s_0 from the initial distribution.
pub fn mdp_reset<T: Real, R: Rng + ?Sized>(mdp: &TabularMdp<T>, rng: &mut R) -> usize {
    sample_index(&mdp.initial_dist, rng)
}

/// Samples s' ~ P[s][a][.]; `t` is the zero-based index of this step.
///
/// Returns `(s', r(s, a), done)` where `done` is set once `t + 1` reaches the horizon.
pub fn mdp_step<T: Real, R: Rng + ?Sized>(
    mdp: &TabularMdp<T>,
    s: usize,
    a: usize,
    t: usize,
    rng: &mut R,
) -> Result<(usize, T, bool), EnvError> {
    mdp.check_indices(s, a)?;
    if t >= mdp.horizon {
        return Err(EnvError::TerminalStep);
    }
    let next = sample_index(&mdp.transition[s][a], rng);
    Ok((next, mdp.reward[s][a], t + 1 >= mdp.horizon))
}

/// Stateful episodic wrapper; observations are one-hot state encodings.
#[derive(Debug, Clone)]
pub struct MdpEnv<T> {
    mdp: TabularMdp<T>,
    state: usize,
    t: usize,
}

impl<T: Real> MdpEnv<T> {
    pub fn new(mdp: TabularMdp<T>) -> Self {
        let horizon = mdp.horizon;
        Self { mdp, state: 0, t: horizon }
    }

    pub fn mdp(&self) -> &TabularMdp<T> {
        &self.mdp
    }

    pub fn state(&self) -> usize {
        self.state
    }
}

impl<T: Real> Episodic<T> for MdpEnv<T> {
    fn obs_dim(&self) -> usize {
        self.mdp.n_states
    }

    fn n_actions(&self) -> usize {
        self.mdp.n_actions
    }

    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<T> {
        self.state = mdp_reset(&self.mdp, rng);
        self.t = 0;
        one_hot(self.mdp.n_states, self.state)
    }

    fn step<R: Rng + ?Sized>(&mut self, action: usize, rng: &mut R) -> Result<StepOutcome<T>, EnvError> {
        let (next, reward, done) = mdp_step(&self.mdp, self.state, action, self.t, rng)?;
        self.state = next;
        self.t += 1;
        Ok(StepOutcome {
            observation: one_hot(self.mdp.n_states, next),
            reward,
            done,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn chain() -> TabularMdp<f64> {
        TabularMdp::new(
            vec![
                vec![vec![0.3, 0.7], vec![0.0, 1.0]],
                vec![vec![1.0, 0.0], vec![0.5, 0.5]],
            ],
            vec![vec![1.0, 0.0], vec![0.0, 2.0]],
            vec![0.5, 0.5],
            2,
            0.9,
        )
        .unwrap()
    }

    #[test]
    fn point_mass_initial_state() {
        let mdp = TabularMdp::new(
            vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]],
            vec![vec![0.0], vec![0.0]],
            vec![1.0, 0.0],
            1,
            1.0,
        )
        .unwrap();
        let mut rng = StdRng::seed_from_u64(0);
        assert!((0..1000).all(|_| mdp_reset(&mdp, &mut rng) == 0));
    }

    #[test]
    fn uniform_initial_frequency() {
        let mdp = chain();
        let mut rng = StdRng::seed_from_u64(7);
        let n = 100_000;
        let zeros = (0..n).filter(|_| mdp_reset(&mdp, &mut rng) == 0).count();
        let freq = zeros as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.01, "freq {freq}");
    }

    #[test]
    fn reset_sequence_is_reproducible() {
        let mdp = chain();
        let a: Vec<usize> = {
            let mut rng = StdRng::seed_from_u64(42);
            (0..100).map(|_| mdp_reset(&mdp, &mut rng)).collect()
        };
        let b: Vec<usize> = {
            let mut rng = StdRng::seed_from_u64(42);
            (0..100).map(|_| mdp_reset(&mdp, &mut rng)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn deterministic_row_and_transition_frequency() {
        let mdp = chain();
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(mdp_step(&mdp, 0, 1, 0, &mut rng).unwrap().0, 1);
        }
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| mdp_step(&mdp, 0, 0, 0, &mut rng).unwrap().0 == 0)
            .count();
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.3).abs() < 0.01, "freq {freq}");
    }

    #[test]
    fn zero_rewards_and_done_flag() {
        let mdp = TabularMdp::new(
            vec![vec![vec![1.0]; 2]],
            vec![vec![0.0, 0.0]],
            vec![1.0],
            3,
            1.0,
        )
        .unwrap();
        let mut env = MdpEnv::new(mdp);
        let mut rng = StdRng::seed_from_u64(0);
        env.reset(&mut rng);
        let dones: Vec<bool> = (0..3)
            .map(|_| {
                let out = env.step(1, &mut rng).unwrap();
                assert_eq!(out.reward, 0.0);
                out.done
            })
            .collect();
        assert_eq!(dones, vec![false, false, true]);
        assert!(env.step(0, &mut rng).is_err());
    }

    #[test]
    fn out_of_range_indices() {
        let mdp = chain();
        let mut rng = StdRng::seed_from_u64(0);
        assert!(matches!(
            mdp_step(&mdp, 2, 0, 0, &mut rng),
            Err(EnvError::IndexOutOfRange { what: "state", .. })
        ));
        assert!(matches!(
            mdp_step(&mdp, 0, 5, 0, &mut rng),
            Err(EnvError::IndexOutOfRange { what: "action", .. })
        ));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let mdp = chain();
        let back = TabularMdp::<f64>::from_json_str(&mdp.to_json_string()).unwrap();
        assert_eq!(mdp, back);

        let bad = r#"{"n_states":1,"n_actions":1,"transition":[[[0.9]]],"reward":[[0]],
                      "initial_dist":[1.0],"horizon":1,"discount":1.0}"#;
        assert!(matches!(
            TabularMdp::<f64>::from_json_str(bad),
            Err(EnvError::InvalidMdp(_))
        ));
        let mismatch = r#"{"n_states":2,"n_actions":1,"transition":[[[1.0]]],"reward":[[0]],
                      "initial_dist":[1.0],"horizon":1,"discount":1.0}"#;
        assert!(TabularMdp::<f64>::from_json_str(mismatch).is_err());
    }
}
