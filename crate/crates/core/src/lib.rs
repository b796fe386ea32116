//! Dynamic-tariff demand response between one retailer and a set of
//! flexible consumers, under spot-price and preference uncertainty.
//!
//! Two market models are provided:
//!
//! * a Stackelberg game ([`mpec`]) where the retailer sets an hourly tariff
//!   anticipating each consumer's best response ([`consumer`]), and
//! * a perfect-competition equilibrium ([`equilibrium`]) found by solving the
//!   joint KKT system of retailer and consumers, either through a big-M
//!   branch-and-bound over complementarity patterns or through a
//!   complementarity-penalty NLP.
//!
//! [`model`] holds the decision/dual types and the objective and residual
//! evaluators every solver is checked against. [`scenario`] builds the
//! stochastic instance, [`analytics`] runs the case studies and sensitivity
//! tables, and [`app`] is the batch front end used by the `retail-dr` binary.

pub mod analytics;
pub mod app;
pub mod consumer;
pub mod equilibrium;
mod error;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod mpec;
pub mod scenario;

pub use error::{Error, Result};
pub use model::{
    ConsumerDecision, ConsumerDuals, Dims, KktResiduals, PriceView, RetailerDecision,
    RetailerDuals, ScenarioPrices, SolveReport, Tariff,
};
pub use scenario::{CaseName, CaseSpec, ScenarioSet, SpotObservation};
