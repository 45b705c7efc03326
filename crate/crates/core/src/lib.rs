//! Polynomial ARX/NARX structure identification.
//!
//! Candidate monomials are built from lagged inputs and outputs, scored along
//! orthogonal forward regression paths under an ERR or PRESS criterion, and
//! chosen by simulation: every path is free-run simulated, unstable models are
//! discarded and the survivor with the lowest BIC on the simulated error wins.
//! The [`rct`] module layers candidate-reduction strategies on top.
//!
//! All numerical code is generic over [`Real`]; `f64` and `f32` aliases are
//! provided below.

#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod io;
pub mod iofrs;
pub mod ofr;
pub mod rct;
pub mod regressors;
pub mod scalar;
pub mod sim;
pub mod synth;
pub mod term;
pub mod validation;

pub use error::{CandidateSummary, Error, Result};
pub use iofrs::{iofrs, iofrs_on, IofrsConfig, IofrsResult, ModelPool, PoolEntry};
pub use ofr::{back_substitute, ofr_select, Criterion, SelectionPath, StopReason, StopRule};
pub use rct::{compare_methods, identify, IdentificationReport, ModelKind, RctMethod, StageReport};
pub use regressors::{build_problem, least_squares, IoData, RegressionProblem};
pub use scalar::Real;
pub use sim::{predict_one_step, simulate_free_run, stability_probe, Model, ProbeSettings, StabilityVerdict};
pub use synth::{dc_motor_reference, generate_signal, SignalKind, SignalSpec};
pub use term::{
    build_linear_dictionary, expand_dictionary, reduce_dictionary, Dictionary, LagSpec, Lagged, Signal, Term,
};
pub use validation::{residual_tests, ValidationReport};

pub type IoData64 = IoData<f64>;
pub type Model64 = Model<f64>;
pub type RegressionProblem64 = RegressionProblem<f64>;
pub type SelectionPath64 = SelectionPath<f64>;
pub type IofrsResult64 = IofrsResult<f64>;
pub type IdentificationReport64 = IdentificationReport<f64>;
pub type ValidationReport64 = ValidationReport<f64>;

pub type IoData32 = IoData<f32>;
pub type Model32 = Model<f32>;
pub type IdentificationReport32 = IdentificationReport<f32>;
