//! Microgrid power-market workbench.
//!
//! Market dynamics, fuzzy identification of the affine drift, H∞ synthesis of
//! state-feedback pricing gains through LMIs, and closed-loop simulation of the
//! fuzzy pricing law against the ACE baseline.
//!
//! Numeric code is generic over [`Real`]; the aliases below fix it to `f64`.

pub mod config;
pub mod control;
pub mod error;
pub mod formats;
pub mod fuzzy;
pub mod lmi;
pub mod market;
pub mod pipeline;
pub mod scalar;
pub mod sim;

pub use config::{parse_config, ScenarioConfig};
pub use control::PolicyKind;
pub use error::{Error, Result};
pub use pipeline::{run_pipeline, Stage};
pub use scalar::Real;

pub type MarketParams = market::MarketParams<f64>;
pub type MarketState = market::MarketState<f64>;
pub type Disturbance = market::Disturbance<f64>;
pub type SystemMatrices = market::SystemMatrices<f64>;
pub type AxisPartition = fuzzy::AxisPartition<f64>;
pub type FuzzyBox = fuzzy::FuzzyBox<f64>;
pub type IdentifiedModel = fuzzy::IdentifiedModel<f64>;
pub type LmiProblem = lmi::LmiProblem<f64>;
pub type LmiSolution = lmi::LmiSolution<f64>;
pub type GainSet = lmi::GainSet<f64>;
pub type VerificationReport = lmi::VerificationReport<f64>;
pub type PricingPolicy = control::PricingPolicy<f64>;
pub type DisturbanceSpec = sim::DisturbanceSpec<f64>;
pub type SimConfig = sim::SimConfig<f64>;
pub type Trajectory = sim::Trajectory<f64>;
pub type Metrics = sim::Metrics<f64>;
