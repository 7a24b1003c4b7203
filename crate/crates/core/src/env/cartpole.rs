use rand::Rng;

use super::{EnvError, Episodic, StepOutcome};
use crate::Real;

/// Classic-control cart-pole constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartPoleParams {
    pub gravity: f64,
    pub mass_cart: f64,
    pub mass_pole: f64,
    /// Half the pole length.
    pub half_length: f64,
    pub force_mag: f64,
    pub tau: f64,
    pub x_threshold: f64,
    pub theta_threshold: f64,
    pub max_steps: u32,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        Self {
            gravity: 9.8,
            mass_cart: 1.0,
            mass_pole: 0.1,
            half_length: 0.5,
            force_mag: 10.0,
            tau: 0.02,
            x_threshold: 2.4,
            theta_threshold: 12.0 * std::f64::consts::PI / 180.0,
            max_steps: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CartAction {
    PushLeft,
    PushRight,
}

impl CartAction {
    pub fn from_index(a: usize) -> Result<Self, EnvError> {
        match a {
            0 => Ok(Self::PushLeft),
            1 => Ok(Self::PushRight),
            _ => Err(EnvError::IndexOutOfRange {
                what: "action",
                index: a,
                limit: 2,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartPoleState<T> {
    pub x: T,
    pub x_dot: T,
    pub theta: T,
    pub theta_dot: T,
    pub steps_elapsed: u32,
}

impl<T: Real> CartPoleState<T> {
    pub fn observation(&self) -> Vec<T> {
        vec![self.x, self.x_dot, self.theta, self.theta_dot]
    }

    pub fn out_of_bounds(&self, params: &CartPoleParams) -> bool {
        self.x.abs() > T::lit(params.x_threshold) || self.theta.abs() > T::lit(params.theta_threshold)
    }

    pub fn is_terminal(&self, params: &CartPoleParams) -> bool {
        self.out_of_bounds(params) || self.steps_elapsed >= params.max_steps
    }
}

/// Samples each coordinate uniformly from [-0.05, 0.05].
pub fn cartpole_reset<T: Real, R: Rng + ?Sized>(rng: &mut R) -> CartPoleState<T> {
    let mut draw = || T::lit((2.0 * rng.gen::<f64>() - 1.0) * 0.05);
    CartPoleState {
        x: draw(),
        x_dot: draw(),
        theta: draw(),
        theta_dot: draw(),
        steps_elapsed: 0,
    }
}

/// One semi-implicit Euler step (velocities first, then positions).
///
/// Reward is 1 on every step, including the one that terminates the episode.
pub fn cartpole_step<T: Real>(
    params: &CartPoleParams,
    state: &CartPoleState<T>,
    action: CartAction,
) -> Result<(CartPoleState<T>, T, bool), EnvError> {
    if state.is_terminal(params) {
        return Err(EnvError::TerminalStep);
    }
    let g = T::lit(params.gravity);
    let m_pole = T::lit(params.mass_pole);
    let total_mass = T::lit(params.mass_cart + params.mass_pole);
    let length = T::lit(params.half_length);
    let pole_mass_length = m_pole * length;
    let tau = T::lit(params.tau);
    let force = match action {
        CartAction::PushRight => T::lit(params.force_mag),
        CartAction::PushLeft => -T::lit(params.force_mag),
    };

    let (sin, cos) = state.theta.sin_cos();
    let temp = (force + pole_mass_length * state.theta_dot * state.theta_dot * sin) / total_mass;
    let theta_acc = (g * sin - cos * temp)
        / (length * (T::lit(4.0 / 3.0) - m_pole * cos * cos / total_mass));
    let x_acc = temp - pole_mass_length * theta_acc * cos / total_mass;

    let x_dot = state.x_dot + tau * x_acc;
    let theta_dot = state.theta_dot + tau * theta_acc;
    let next = CartPoleState {
        x: state.x + tau * x_dot,
        x_dot,
        theta: state.theta + tau * theta_dot,
        theta_dot,
        steps_elapsed: state.steps_elapsed + 1,
    };
    let done = next.is_terminal(params);
    Ok((next, T::one(), done))
}

/// Stateful CartPole wrapper implementing [`Episodic`].
#[derive(Debug, Clone)]
pub struct CartPole<T> {
    pub params: CartPoleParams,
    state: CartPoleState<T>,
    done: bool,
}

impl<T: Real> Default for CartPole<T> {
    fn default() -> Self {
        Self::new(CartPoleParams::default())
    }
}

impl<T: Real> CartPole<T> {
    pub fn new(params: CartPoleParams) -> Self {
        Self {
            params,
            state: CartPoleState {
                x: T::zero(),
                x_dot: T::zero(),
                theta: T::zero(),
                theta_dot: T::zero(),
                steps_elapsed: 0,
            },
            done: true,
        }
    }

    pub fn state(&self) -> &CartPoleState<T> {
        &self.state
    }
}

impl<T: Real> Episodic<T> for CartPole<T> {
    fn obs_dim(&self) -> usize {
        4
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<T> {
        self.state = cartpole_reset(rng);
        self.done = false;
        self.state.observation()
    }

    fn step<R: Rng + ?Sized>(&mut self, action: usize, _rng: &mut R) -> Result<StepOutcome<T>, EnvError> {
        if self.done {
            return Err(EnvError::TerminalStep);
        }
        let (next, reward, done) = cartpole_step(&self.params, &self.state, CartAction::from_index(action)?)?;
        self.state = next;
        self.done = done;
        Ok(StepOutcome {
            observation: next.observation(),
            reward,
            done,
        })
    }
}
