//! Scalar abstraction used by the hand-written MLP reverse pass.
//!
//! The reverse pass is written once over [`Smooth`]. Running it on plain
//! reals yields the gradient; running it on [`Dual`] numbers whose tangent is
//! seeded with a basis vector yields one Hessian-vector product
//! (forward-over-reverse).

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::Real;

pub trait Smooth<T: Real>:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn lift(x: T) -> Self;
    fn primal(self) -> T;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn tanh(self) -> Self;
}

impl<T: Real> Smooth<T> for T {
    #[inline]
    fn lift(x: T) -> Self {
        x
    }
    #[inline]
    fn primal(self) -> T {
        self
    }
    #[inline]
    fn exp(self) -> Self {
        num_traits::Float::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        num_traits::Float::ln(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        num_traits::Float::tanh(self)
    }
}

/// First-order dual number `v + d·ε`, ε² = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<T> {
    pub v: T,
    pub d: T,
}

impl<T: Real> Dual<T> {
    pub fn new(v: T, d: T) -> Self {
        Self { v, d }
    }
}

impl<T: Real> Add for Dual<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.v + o.v, self.d + o.d)
    }
}

impl<T: Real> Sub for Dual<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.v - o.v, self.d - o.d)
    }
}

impl<T: Real> Mul for Dual<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(self.v * o.v, self.d * o.v + self.v * o.d)
    }
}

impl<T: Real> Div for Dual<T> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let q = self.v / o.v;
        Self::new(q, (self.d - q * o.d) / o.v)
    }
}

impl<T: Real> Neg for Dual<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.v, -self.d)
    }
}

impl<T: Real> Smooth<T> for Dual<T> {
    #[inline]
    fn lift(x: T) -> Self {
        Self::new(x, T::zero())
    }
    #[inline]
    fn primal(self) -> T {
        self.v
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.v.exp();
        Self::new(e, self.d * e)
    }
    #[inline]
    fn ln(self) -> Self {
        Self::new(self.v.ln(), self.d / self.v)
    }
    #[inline]
    fn tanh(self) -> Self {
        let t = self.v.tanh();
        Self::new(t, self.d * (T::one() - t * t))
    }
}
