//! Fixed-step quasi-static simulation.
//!
//! Each step solves the network algebraically for the current references,
//! hands every controller its own terminal power and bus voltage, and
//! advances all controllers. Controllers share nothing with each other.

use crate::droop::{controller_step, ControllerState, Measurements};
use crate::error::{Error, Result};
use crate::oracle::prepare;
use crate::powerflow::{LoadModel, NetworkSolution, Phasor};
use crate::scenario::{LoadEvent, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub step: u64,
    pub controllers: Vec<ControllerState>,
    pub v_pcc: Phasor,
    /// Network solution the most recent step was computed from.
    pub last_solution: Option<NetworkSolution>,
}

impl SimState {
    /// Controllers at their setpoints with pre-loaded filters.
    pub fn initial(scenario: &Scenario) -> Self {
        Self {
            t: 0.0,
            step: 0,
            controllers: scenario
                .inverters
                .iter()
                .map(|i| ControllerState::at_setpoints(&i.setpoints))
                .collect(),
            v_pcc: Phasor::new(0.0, 0.0),
            last_solution: None,
        }
    }

    fn refs(&self) -> Vec<(f64, f64)> {
        self.controllers.iter().map(|c| (c.delta_ref, c.e_ref)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverterSample {
    pub p_out: f64,
    pub q_out: f64,
    pub e_ref: f64,
    pub delta_ref: f64,
    pub f_meas: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub inverters: Vec<InverterSample>,
    /// PCC voltage, line-to-line RMS.
    pub v_pcc_ll: f64,
    pub load_p: f64,
    pub load_q: f64,
    pub solution: NetworkSolution,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSeries {
    pub n_inverters: usize,
    pub rows: Vec<LogRow>,
}

impl TimeSeries {
    pub fn last(&self) -> Option<&LogRow> {
        self.rows.last()
    }

    /// Rows with `t` in `[from, to)`.
    pub fn window(&self, from: f64, to: f64) -> impl Iterator<Item = &LogRow> {
        self.rows.iter().filter(move |r| r.t >= from && r.t < to)
    }
}

/// The load active at `t`: the entry with the largest `t_start <= t`.
pub fn apply_events(schedule: &[LoadEvent], t: f64) -> Result<&LoadModel> {
    let idx = schedule.partition_point(|ev| ev.t_start <= t);
    if idx == 0 {
        return Err(Error::invalid("t", format!("t = {t} precedes the first load entry")));
    }
    Ok(&schedule[idx - 1].load)
}

fn abort(t: f64, reason: impl Into<String>) -> Error {
    Error::SimulationAbort {
        t,
        reason: reason.into(),
    }
}

fn active_load(scenario: &Scenario, t: f64) -> Result<&LoadModel> {
    // event times resolve onto the step grid despite rounding in n·dt
    apply_events(&scenario.load_schedule, t + 1e-9 * scenario.dt)
}

fn network_at(state: &SimState, scenario: &Scenario) -> Result<NetworkSolution> {
    let load = active_load(scenario, state.t)?;
    let sol = scenario
        .solve_network(&state.refs(), load)
        .map_err(|e| abort(state.t, e.to_string()))?;
    if !sol.v_pcc.re.is_finite() || !sol.v_pcc.im.is_finite() {
        return Err(abort(state.t, "non-finite PCC voltage"));
    }
    if let Some(i) = sol.s_out.iter().position(|s| !s.re.is_finite() || !s.im.is_finite()) {
        return Err(abort(state.t, format!("non-finite output power at source {}", i + 1)));
    }
    Ok(sol)
}

fn advance(state: &SimState, sol: NetworkSolution, scenario: &Scenario) -> Result<SimState> {
    let v_meas = scenario.measured_voltage(&sol);
    let controllers = state
        .controllers
        .iter()
        .zip(&scenario.inverters)
        .zip(&sol.s_out)
        .enumerate()
        .map(|(i, ((c, inv), s))| {
            let meas = Measurements {
                p_out: s.re,
                q_out: s.im,
                v_meas,
            };
            controller_step(
                c,
                &meas,
                &inv.gains,
                &inv.setpoints,
                scenario.dt,
                scenario.filter_tau,
                scenario.mode,
            )
            .map_err(|e| abort(state.t, format!("inverter {}: {e}", i + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    let step = state.step + 1;
    Ok(SimState {
        t: step as f64 * scenario.dt,
        step,
        controllers,
        v_pcc: sol.v_pcc,
        last_solution: Some(sol),
    })
}

/// One simulation step: solve the network at the current references, then
/// advance every controller by `dt`.
pub fn step(state: &SimState, scenario: &Scenario) -> Result<SimState> {
    let sol = network_at(state, scenario)?;
    advance(state, sol, scenario)
}

fn log_row(state: &SimState, sol: &NetworkSolution) -> LogRow {
    LogRow {
        t: state.t,
        inverters: state
            .controllers
            .iter()
            .zip(&sol.s_out)
            .map(|(c, s)| InverterSample {
                p_out: s.re,
                q_out: s.im,
                e_ref: c.e_ref,
                delta_ref: c.delta_ref,
                f_meas: c.f_meas,
            })
            .collect(),
        v_pcc_ll: sol.v_pcc_ll(),
        load_p: sol.s_load.re,
        load_q: sol.s_load.im,
        solution: sol.clone(),
    }
}

/// Runs `scenario` from `t = 0` to `t_end`, logging every
/// `log_decimation` steps plus the final step.
pub fn run(scenario: &Scenario) -> Result<TimeSeries> {
    let prepared = prepare(scenario)?;
    run_from(&prepared, SimState::initial(&prepared)).map(|(ts, _)| ts)
}

/// Runs an already prepared scenario from an explicit state; returns the log
/// and the final state.
pub fn run_from(scenario: &Scenario, mut state: SimState) -> Result<(TimeSeries, SimState)> {
    let steps = scenario.step_count();
    let mut series = TimeSeries {
        n_inverters: scenario.inverters.len(),
        rows: Vec::with_capacity((steps / scenario.log_decimation as u64 + 2) as usize),
    };
    loop {
        let sol = network_at(&state, scenario)?;
        let last = state.step >= steps;
        if last || state.step.is_multiple_of(scenario.log_decimation as u64) {
            series.rows.push(log_row(&state, &sol));
        }
        if last {
            break;
        }
        state = advance(&state, sol, scenario)?;
    }
    log::debug!("simulated {} steps, logged {} rows", steps, series.rows.len());
    Ok((series, state))
}
