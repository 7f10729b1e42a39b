//! Density update rules and the optimization driver.
//!
//! [`objective`] evaluates compliance, volume, and their density
//! sensitivities; [`oc`] and [`mma`] propose design updates from those
//! gradients; [`driver`] ties analysis, filtering, and updates into the
//! outer loop.

pub mod driver;
pub mod mma;
pub mod objective;
pub mod oc;

pub use driver::{
    run_optimization, DriverSettings, IterationRecord, Observer, OptimizationResult,
    OptimizerKind,
};
pub use mma::{MmaOptions, MmaState, MmaStep};
pub use objective::{compliance, compliance_sensitivity, volume_fraction, volume_sensitivity};
pub use oc::{oc_update, OcOptions, OcOutcome};
