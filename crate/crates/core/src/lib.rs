//! Simulation and hypothesis checking for jump-diffusion SDEs of the form
//!
//! ```text
//! dX = b(t, X) dt + σ(t, X) dB + ∫ f₁(t, X₋, u) Ñ(dt, du) + ∫ f₂(t, X₋, u) N(dt, du)
//! ```
//!
//! with a finite atomic jump measure. The crate is organised bottom-up:
//!
//! * [`measure`]: jump measures, exact jump clocks, Brownian increments and the
//!   shared [`NoiseRealization`] that couples solutions from different initial values.
//! * [`model`]: coefficient sets, concave moduli, test functions and the built-in
//!   model registry.
//! * [`engine`]: Euler integration with exact jump insertion, synchronous coupling and
//!   the minimal-norm inverse of the diffusion matrix.
//! * [`conditions`]: sampled residual checks of monotonicity, growth and ellipticity
//!   hypotheses.
//! * [`experiments`]: Monte Carlo harnesses for stochastic continuity, non-confluence,
//!   maximal moments, the Girsanov bridge and irreducibility.

pub mod conditions;
pub mod engine;
mod error;
pub mod experiments;
pub mod measure;
pub mod model;
pub mod quad;
pub mod rng;
pub mod stats;

pub use conditions::{check_condition, CheckParams, ConditionId, ConditionReport, SampleGrid, Witness};
pub use engine::{
    left_inverse_sigma, simulate_coupled_pair, simulate_path, CoupledPair, LeftInverse, PathRecord,
    SimConfig,
};
pub use error::{Error, Result};
pub use experiments::{BridgeSpec, Estimate, ExperimentSummary, McConfig};
pub use measure::{Atom, JumpEvent, JumpMeasure, NoiseRealization, TimeGrid};
pub use model::{
    build_registry, CoefficientSet, Coefficients, Envelope, ModulusSpec, Registry, SupportTag,
    TestFunction,
};
pub use rng::{StreamKey, StreamRole};
