//! Online swap multicalibration and swap omniprediction.

pub mod batch;
pub mod domain;
pub mod error;
pub mod forecaster;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod ons;
pub mod rng;
pub mod scalar;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Forecaster64 = forecaster::BmForecaster<f64>;
pub type Forecaster32 = forecaster::BmForecaster<f32>;
pub type Transcript64 = domain::Transcript<f64>;
pub type Transcript32 = domain::Transcript<f32>;
pub type OnsState64 = ons::OnsState<f64>;
pub type OnsState32 = ons::OnsState<f32>;
pub type Mixture64 = batch::MixturePredictor<f64>;
pub type Mixture32 = batch::MixturePredictor<f32>;
