//! Long-run average impulse and singular control of one-dimensional diffusions.
//!
//! The crate builds numerical tables of the scale/speed potentials of a
//! diffusion, maximizes the long-run average reward of `(w, y)` impulse
//! policies, solves the associated reflection (singular) problem, computes
//! parameter sensitivities, and checks every analytic quantity against a
//! Monte Carlo engine.
//!
//! Numerical cores are generic over the floating-point type through [`Real`];
//! the aliases at the crate root fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod impulse;
pub mod model;
pub mod numerics;
pub mod potentials;
pub mod sensitivity;
pub mod simulate;
pub mod singular;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

pub use error::{Error, Result};

/// Floating-point scalar usable by the numerical core.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + Sum + 'static
{
}

impl<T> Real for T where
    T: Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + Sum + 'static
{
}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("f64 literal representable in scalar type")
}

#[inline]
pub(crate) fn to_f64<T: Real>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

pub type Model = model::DiffusionModel<f64>;
pub type Params = model::EconomicParams<f64>;
pub type ConditionReport = model::ConditionReport<f64>;
pub type Table = potentials::PotentialTable<f64>;
pub type ImpulseSolution = impulse::ImpulseSolution<f64>;
pub type ImpulseOutcome = impulse::ImpulseOutcome<f64>;
pub type StationaryDensity = impulse::StationaryDensity<f64>;
pub type SingularSolution = singular::SingularSolution<f64>;
pub type SingularOutcome = singular::SingularOutcome<f64>;
pub type KSweepReport = singular::KSweepReport<f64>;
pub type SensitivityReport = sensitivity::SensitivityReport<f64>;

pub use simulate::{Estimate, PathConfig, Scheme};
