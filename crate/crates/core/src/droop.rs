//! Per-inverter droop controller.
//!
//! Each controller sees only its own terminal measurements. One step runs,
//! in this order:
//!
//! 1. first-order low-pass filters on measured P, Q and V;
//! 2. frequency estimate from the rate of change of the reference angle;
//! 3. restoration layer: `(f, V)` to modified power references;
//! 4. droop layer: power errors to `(δ_ref, E_ref)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::powerflow::{ll_to_phase, rms_to_peak, SQRT_3};

/// Loop gain the default angle and magnitude droop gains are designed for.
pub const DESIGN_LOOP_GAIN: f64 = 0.3;
/// Frequency deviation at rated active power for the default gains.
pub const DESIGN_FREQ_DEVIATION_HZ: f64 = 0.5;
/// Fractional voltage deviation at rated reactive power for the default gains.
pub const DESIGN_VOLT_DEVIATION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DroopGains {
    /// Frequency droop slope, Hz/W.
    pub k_pf: f64,
    /// Voltage droop slope, V/var.
    pub k_qv: f64,
    /// Frequency restoration gain, W/Hz.
    pub k_fp: f64,
    /// Voltage restoration gain, var/V.
    pub k_vq: f64,
    /// Angle droop gain, rad/W.
    pub k_pdelta: f64,
    /// Magnitude droop gain, V/var (peak volts).
    pub k_qe: f64,
}

impl DroopGains {
    /// Conventional gains for a unit rated `p_rated`/`q_rated` on a bus of
    /// nominal line-to-line voltage `v0_ll`, connected through reactance
    /// `line_x`.
    ///
    /// The characteristic slopes give 0.5 Hz and 5 % voltage deviation at
    /// rated power, and the restoration gains are their inverses. The angle
    /// gain is sized so that `k_pdelta · 3·V_ln²/X` equals
    /// [`DESIGN_LOOP_GAIN`]; the magnitude gain likewise against the
    /// linearized `∂Q/∂E_peak ≈ 3·V_ln/(√2·X)`.
    pub fn design(p_rated: f64, q_rated: f64, v0_ll: f64, line_x: f64) -> Result<Self> {
        if !(p_rated > 0.0) || !(q_rated > 0.0) {
            return Err(Error::invalid("rated power", "p_rated and q_rated must be > 0"));
        }
        if !(v0_ll > 0.0) || !(line_x > 0.0) {
            return Err(Error::invalid("v0/line_x", "must be > 0"));
        }
        let v_ln = ll_to_phase(v0_ll);
        let dp_ddelta = 3.0 * v_ln * v_ln / line_x;
        let dq_de = 3.0 * v_ln / (std::f64::consts::SQRT_2 * line_x);
        Ok(Self {
            k_pf: DESIGN_FREQ_DEVIATION_HZ / p_rated,
            k_qv: DESIGN_VOLT_DEVIATION * v0_ll / q_rated,
            k_fp: p_rated / DESIGN_FREQ_DEVIATION_HZ,
            k_vq: q_rated / (DESIGN_VOLT_DEVIATION * v0_ll),
            k_pdelta: DESIGN_LOOP_GAIN / dp_ddelta,
            k_qe: DESIGN_LOOP_GAIN / dq_de,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("k_pf", self.k_pf),
            ("k_qv", self.k_qv),
            ("k_fp", self.k_fp),
            ("k_vq", self.k_vq),
            ("k_pdelta", self.k_pdelta),
            ("k_qe", self.k_qe),
        ];
        for (name, k) in all {
            if !(k > 0.0) || !k.is_finite() {
                return Err(Error::invalid(name, format!("droop gains must be > 0, got {k}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Setpoints {
    /// Nominal frequency, Hz.
    pub f0: f64,
    /// Nominal line-to-line RMS voltage.
    pub v0: f64,
    /// Active power reference, W.
    pub p0: f64,
    /// Reactive power reference, var.
    pub q0: f64,
    /// Base power angle, rad.
    pub delta0: f64,
    /// Base per-phase peak EMF amplitude, V.
    pub e0: f64,
}

impl Setpoints {
    /// Setpoints with `delta0 = 0` and `e0` at the nominal per-phase peak.
    pub fn nominal(f0: f64, v0: f64, p0: f64, q0: f64) -> Self {
        Self {
            f0,
            v0,
            p0,
            q0,
            delta0: 0.0,
            e0: rms_to_peak(ll_to_phase(v0)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f0 > 0.0) {
            return Err(Error::invalid("f0", format!("must be > 0, got {}", self.f0)));
        }
        if !(self.v0 > 0.0) {
            return Err(Error::invalid("v0", format!("must be > 0, got {}", self.v0)));
        }
        if !(self.e0 > 0.0) {
            return Err(Error::invalid("e0", format!("must be > 0, got {}", self.e0)));
        }
        if ![self.p0, self.q0, self.delta0].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("setpoints", "p0, q0 and delta0 must be finite"));
        }
        Ok(())
    }
}

/// Frequency/active-power droop characteristic, `f = f0 − k_pf·(p − P0)`.
pub fn freq_droop_char(p: f64, gains: &DroopGains, sp: &Setpoints) -> f64 {
    sp.f0 - gains.k_pf * (p - sp.p0)
}

/// Voltage/reactive-power droop characteristic, `v = V0 − k_qv·(q − Q0)`.
pub fn volt_droop_char(q: f64, gains: &DroopGains, sp: &Setpoints) -> f64 {
    sp.v0 - gains.k_qv * (q - sp.q0)
}

/// Restoration layer: modified power references from measured `f` and `V`.
pub fn restoration_refs(f_meas: f64, v_meas: f64, gains: &DroopGains, sp: &Setpoints) -> (f64, f64) {
    let p_ref = sp.p0 - gains.k_fp * (sp.f0 - f_meas);
    let q_ref = sp.q0 - gains.k_vq * (sp.v0 - v_meas);
    (p_ref, q_ref)
}

/// Droop layer: reference angle and peak magnitude from the power errors.
pub fn droop_refs(
    p_ref: f64,
    q_ref: f64,
    p_filt: f64,
    q_filt: f64,
    gains: &DroopGains,
    sp: &Setpoints,
) -> (f64, f64) {
    let delta_ref = sp.delta0 - gains.k_pdelta * (p_ref - p_filt);
    let e_ref = sp.e0 - gains.k_qe * (q_ref - q_filt);
    (delta_ref, e_ref)
}

/// Forward-Euler first-order low-pass filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementFilter {
    pub tau: f64,
    pub state: f64,
}

impl MeasurementFilter {
    pub fn new(tau: f64, initial: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::invalid("tau_s", format!("must be > 0, got {tau}")));
        }
        Ok(Self { tau, state: initial })
    }

    /// Per-step error contraction factor `1 − dt/tau`.
    pub fn contraction(&self, dt: f64) -> f64 {
        1.0 - dt / self.tau
    }
}

/// Checks the explicit-Euler stability guard `0 < dt < tau`.
pub fn check_step(dt: f64, tau: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid("dt_s", format!("must be > 0, got {dt}")));
    }
    if !(dt < tau) {
        return Err(Error::Config(format!(
            "dt_s = {dt} must be smaller than tau_s = {tau} (explicit Euler filter stability)"
        )));
    }
    Ok(())
}

/// `state' = state + (dt/tau)·(input − state)`.
pub fn lowpass_update(filter: MeasurementFilter, input: f64, dt: f64) -> Result<MeasurementFilter> {
    check_step(dt, filter.tau)?;
    Ok(MeasurementFilter {
        tau: filter.tau,
        state: lowpass(filter.state, input, dt, filter.tau),
    })
}

#[inline]
fn lowpass(state: f64, input: f64, dt: f64, tau: f64) -> f64 {
    state + (dt / tau) * (input - state)
}

/// Islanded units derive frequency from their own angle; grid-connected
/// units see the stiff grid's frequency and voltage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Islanded,
    GridConnected,
}

/// Local measurements handed to a controller each step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurements {
    /// Three-phase active power at the terminal, W.
    pub p_out: f64,
    /// Three-phase reactive power at the terminal, var.
    pub q_out: f64,
    /// Line-to-line RMS bus voltage.
    pub v_meas: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    pub p_filt: f64,
    pub q_filt: f64,
    /// Filtered bus voltage, line-to-line RMS.
    pub v_filt: f64,
    pub delta_ref: f64,
    /// Per-phase peak amplitude.
    pub e_ref: f64,
    pub f_meas: f64,
    pub prev_delta_ref: f64,
}

impl ControllerState {
    /// Equilibrium state at the setpoints: references at `(delta0, E0)`,
    /// filters pre-loaded to `(P0, Q0, V0)`, frequency at `f0`.
    pub fn at_setpoints(sp: &Setpoints) -> Self {
        Self {
            p_filt: sp.p0,
            q_filt: sp.q0,
            v_filt: sp.v0,
            delta_ref: sp.delta0,
            e_ref: sp.e0,
            f_meas: sp.f0,
            prev_delta_ref: sp.delta0,
        }
    }
}

/// Filtered frequency estimate `f0 + Δδ/(2π·dt)`.
pub fn measured_frequency(state: &ControllerState, dt: f64, f0: f64, tau: f64) -> f64 {
    let raw = f0 + (state.delta_ref - state.prev_delta_ref) / (2.0 * PI * dt);
    lowpass(state.f_meas, raw, dt, tau)
}

/// Advances one controller by one step.
pub fn controller_step(
    state: &ControllerState,
    meas: &Measurements,
    gains: &DroopGains,
    sp: &Setpoints,
    dt: f64,
    tau: f64,
    mode: Mode,
) -> Result<ControllerState> {
    check_step(dt, tau)?;

    let p_filt = lowpass(state.p_filt, meas.p_out, dt, tau);
    let q_filt = lowpass(state.q_filt, meas.q_out, dt, tau);
    let v_filt = lowpass(state.v_filt, meas.v_meas, dt, tau);
    let f_meas = match mode {
        Mode::Islanded => measured_frequency(state, dt, sp.f0, tau),
        Mode::GridConnected => sp.f0,
    };
    let (p_ref, q_ref) = restoration_refs(f_meas, v_filt, gains, sp);
    let (delta_ref, e_ref) = droop_refs(p_ref, q_ref, p_filt, q_filt, gains, sp);

    if !delta_ref.is_finite() || !e_ref.is_finite() {
        return Err(Error::invalid("reference", "non-finite delta_ref or e_ref"));
    }
    if !(e_ref > 0.0) {
        return Err(Error::invalid("e_ref", format!("EMF magnitude collapsed to {e_ref}")));
    }

    Ok(ControllerState {
        p_filt,
        q_filt,
        v_filt,
        delta_ref,
        e_ref,
        f_meas,
        prev_delta_ref: state.delta_ref,
    })
}

/// Per-phase peak EMF for a line-to-line RMS bus voltage.
pub fn ll_rms_to_phase_peak(v_ll: f64) -> f64 {
    rms_to_peak(v_ll / SQRT_3)
}
