//! Phasor-domain simulation of parallel droop-controlled inverters.
//!
//! The crate couples per-inverter droop controllers ([`droop`]) to an
//! algebraic star network ([`powerflow`]) in a fixed-step loop
//! ([`simulator`]), and provides an independent steady-state solver
//! ([`oracle`]) to check the simulation against. [`waveform`] turns
//! reference magnitude and angle into instantaneous three-phase voltages.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod droop;
pub mod error;
pub mod format;
pub mod oracle;
pub mod powerflow;
pub mod scenario;
pub mod simulator;
pub mod waveform;

pub use droop::{ControllerState, DroopGains, Measurements, Mode, Setpoints};
pub use error::{Error, Result};
pub use oracle::{OracleOptions, StabilityReport, SteadyState, SweepParam, SweepRow};
pub use powerflow::{LineModel, LoadModel, NetworkSolution, Phasor};
pub use scenario::{GridSource, InverterConfig, LoadEvent, Scenario};
pub use simulator::{LogRow, SimState, TimeSeries};
