//! Scalar abstraction: every numeric routine in this crate is generic over
//! [`Real`], implemented for `f32` and `f64`.
//!
//! Besides the arithmetic from `num_traits::Float`, the trait carries the
//! special functions and random draws the samplers need, so that all
//! type-concrete code lives in the two impl blocks below.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::distr::uniform::SampleUniform;
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};

use crate::special;

pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + SampleUniform
    + Sum<Self>
    + Display
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, for literals and tolerances.
    fn of(v: f64) -> Self;

    fn to_f64(self) -> f64;

    fn pi() -> Self {
        Self::of(std::f64::consts::PI)
    }

    fn ln_gamma(self) -> Self;

    /// Modified Bessel function of the second kind, fractional order `nu >= 0`.
    fn bessel_k(nu: Self, x: Self) -> Self;

    fn sample_std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Gamma draw with shape `a` and *rate* `b`.
    fn sample_gamma<R: Rng + ?Sized>(rng: &mut R, a: Self, b: Self) -> Self;

    fn sample_beta<R: Rng + ?Sized>(rng: &mut R, a: Self, b: Self) -> Self;

    fn sample_uniform<R: Rng + ?Sized>(rng: &mut R, lo: Self, hi: Self) -> Self {
        rng.random_range(lo..hi)
    }

    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::sample_uniform(rng, Self::zero(), Self::one())
    }
}

impl Real for f64 {
    fn of(v: f64) -> Self {
        v
    }

    fn to_f64(self) -> f64 {
        self
    }

    fn ln_gamma(self) -> Self {
        special::ln_gamma(self)
    }

    fn bessel_k(nu: Self, x: Self) -> Self {
        special::bessel_k(nu, x)
    }

    fn sample_std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn sample_gamma<R: Rng + ?Sized>(rng: &mut R, a: Self, b: Self) -> Self {
        Gamma::new(a, 1.0 / b).expect("gamma parameters").sample(rng)
    }

    fn sample_beta<R: Rng + ?Sized>(rng: &mut R, a: Self, b: Self) -> Self {
        Beta::new(a, b).expect("beta parameters").sample(rng)
    }
}

impl Real for f32 {
    fn of(v: f64) -> Self {
        v as f32
    }

    fn to_f64(self) -> f64 {
        self as f64
    }

    fn ln_gamma(self) -> Self {
        special::ln_gamma(self as f64) as f32
    }

    fn bessel_k(nu: Self, x: Self) -> Self {
        special::bessel_k(nu as f64, x as f64) as f32
    }

    fn sample_std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn sample_gamma<R: Rng + ?Sized>(rng: &mut R, a: Self, b: Self) -> Self {
        Gamma::new(a, 1.0 / b).expect("gamma parameters").sample(rng)
    }

    fn sample_beta<R: Rng + ?Sized>(rng: &mut R, a: Self, b: Self) -> Self {
        Beta::new(a, b).expect("beta parameters").sample(rng)
    }
}
