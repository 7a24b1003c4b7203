//! Policy-gradient optimization toolkit.
//!
//! Three update rules are provided for stochastic categorical policies:
//! vanilla REINFORCE ascent, PG-SOM (bias-corrected gradient momentum
//! preconditioned by a running diagonal-Hessian estimate) and a two-stage
//! Runge-Kutta lookahead update. Gradient clipping, an entropy bonus and a
//! running-mean baseline act as stabilizers.
//!
//! The [`oracle`] module evaluates expected returns and estimator
//! expectations exactly on small tabular MDPs so every estimator can be
//! audited against finite differences of the true objective.
//!
//! All numerical code is generic over a [`Real`] scalar (`f32` or `f64`).
//! The `*F64` aliases at the crate root fix the scalar to `f64`, which is
//! what the oracle tolerances assume.

pub mod env;
pub mod estimator;
pub mod optim;
pub mod oracle;
pub mod policy;
pub mod vecops;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar used throughout the crate: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + NumAssign + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar type")
    }

    /// Lossy view of the value as `f64`, for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub use env::{CartPole, CartPoleState, Episodic, MdpEnv, StepOutcome, TabularMdp};
pub use estimator::{
    BaselineState, EstimatorConfig, GradEstimate, PassCounter, ReturnConvention, Trajectory,
};
pub use optim::{ClipConfig, RkConfig, SomState};
pub use policy::{Activation, LogProbDerivatives, ParamVector, PolicyKind, PolicySpec};

pub type ParamVectorF64 = ParamVector<f64>;
pub type ParamVectorF32 = ParamVector<f32>;
pub type TrajectoryF64 = Trajectory<f64>;
pub type TrajectoryF32 = Trajectory<f32>;
pub type GradEstimateF64 = GradEstimate<f64>;
pub type GradEstimateF32 = GradEstimate<f32>;
pub type SomStateF64 = SomState<f64>;
pub type SomStateF32 = SomState<f32>;
pub type RkConfigF64 = RkConfig<f64>;
pub type EstimatorConfigF64 = EstimatorConfig<f64>;
pub type TabularMdpF64 = TabularMdp<f64>;
pub type CartPoleF64 = CartPole<f64>;
pub type CartPoleF32 = CartPole<f32>;
