//! Multivariable Newton-based stochastic extremum seeking for static maps
//! whose inputs arrive through distinct, known delays.
//!
//! Each input channel is perturbed by `a_i sin η_i(t)`, where the phase is
//! driven by an independent Brownian motion on the circle. The measured
//! output is demodulated into gradient and Hessian estimates, a Riccati
//! filter tracks the Hessian inverse, and a filtered predictor
//!
//! ```text
//! U_i = c_i/(s + c_i) { −k_i [ z_i(t) + ∫_{t−D_i}^t U_i(τ) dτ ] }
//! ```
//!
//! compensates each channel's delay so the averaged error decays at the
//! designer-chosen rate `K`, independent of the unknown Hessian.
//!
//! The crate also carries a deterministic averaged-model oracle, an
//! uncompensated baseline, a gradient comparator and the study presets.

pub mod averaged;
pub mod controller;
pub mod dither;
pub mod error;
pub mod estimator;
pub mod history;
pub mod metrics;
pub mod model;
pub mod scenario;
pub mod simulator;
pub mod trajectory;
pub mod validation;

pub use error::{EscError, Result};
pub use model::{
    ControllerMode, DelayVector, FilterDiscretization, GainConfig, QuadraticMap, SimConfig,
};
pub use simulator::{run, run_problem, Problem, Simulation};
pub use trajectory::{DivergenceEvent, Trajectory};
