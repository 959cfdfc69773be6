//! Instantaneous three-phase reference voltages and RMS extraction.
//!
//! The default [`PhaseOrder::BLeads`] places phase b at `+120°` and phase
//! c at `−120°` relative to phase a, so b leads a. That is an a-c-b
//! (negative) rotation under the usual naming. [`PhaseOrder::Conventional`]
//! swaps the offsets to the usual a-b-c order.
//!
//! Synthesis is a post-processing layer; the simulation itself runs on
//! phasors.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEG_120: f64 = 2.0 * PI / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseOrder {
    /// b = +120°, c = −120°.
    #[default]
    BLeads,
    /// b = −120°, c = +120°.
    Conventional,
}

impl PhaseOrder {
    fn offsets(self) -> (f64, f64) {
        match self {
            PhaseOrder::BLeads => (DEG_120, -DEG_120),
            PhaseOrder::Conventional => (-DEG_120, DEG_120),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreePhaseSample {
    pub t: f64,
    pub va: f64,
    pub vb: f64,
    pub vc: f64,
}

/// `va = E·sin(ωt + δ)`, `vb = E·sin(ωt + δ + 120°)`, `vc = E·sin(ωt + δ − 120°)`.
pub fn synth_three_phase(e_ref: f64, delta_ref: f64, f: f64, t: f64) -> ThreePhaseSample {
    synth_three_phase_ordered(e_ref, delta_ref, f, t, PhaseOrder::BLeads)
}

pub fn synth_three_phase_ordered(
    e_ref: f64,
    delta_ref: f64,
    f: f64,
    t: f64,
    order: PhaseOrder,
) -> ThreePhaseSample {
    // reduce ωt to one period so the phase stays accurate for large t
    let cycles = f * t;
    let theta = 2.0 * PI * (cycles - cycles.floor()) + delta_ref;
    let (b, c) = order.offsets();
    ThreePhaseSample {
        t,
        va: e_ref * theta.sin(),
        vb: e_ref * (theta + b).sin(),
        vc: e_ref * (theta + c).sin(),
    }
}

/// `n` uniformly spaced samples covering one period starting at `t0`.
pub fn sample_period(
    e_ref: f64,
    delta_ref: f64,
    f: f64,
    t0: f64,
    n: usize,
    order: PhaseOrder,
) -> Vec<ThreePhaseSample> {
    let period = 1.0 / f;
    (0..n)
        .map(|k| synth_three_phase_ordered(e_ref, delta_ref, f, t0 + period * k as f64 / n as f64, order))
        .collect()
}

/// Root mean square of samples spanning exactly one period.
pub fn rms_periodic(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("samples", "empty input"));
    }
    let mean_sq = samples.iter().map(|v| v * v).sum::<f64>() / samples.len() as f64;
    Ok(mean_sq.sqrt())
}
