//! Scenario description: network, controllers, load schedule and solver
//! settings.

use serde::{Deserialize, Serialize};

use crate::droop::{check_step, ll_rms_to_phase_peak, DroopGains, Mode, Setpoints};
use crate::error::{Error, Result};
use crate::powerflow::{
    load_admittance, ll_to_phase, phasor_from_polar, peak_to_rms, solve_star_network, LineModel,
    LoadModel, NetworkSolution, Phasor,
};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_TAU: f64 = 0.1;
pub const DEFAULT_LINE_X: f64 = 2.5;
pub const DEFAULT_GRID_X: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverterConfig {
    pub setpoints: Setpoints,
    pub gains: DroopGains,
    pub line: LineModel,
    pub p_rated: f64,
    pub q_rated: f64,
}

impl InverterConfig {
    /// Inverter with nominal `(delta0, E0)` and gains from
    /// [`DroopGains::design`].
    pub fn with_default_gains(
        f0: f64,
        v0: f64,
        p0: f64,
        q0: f64,
        p_rated: f64,
        q_rated: f64,
        line: LineModel,
    ) -> Result<Self> {
        Ok(Self {
            setpoints: Setpoints::nominal(f0, v0, p0, q0),
            gains: DroopGains::design(p_rated, q_rated, v0, line.x)?,
            line,
            p_rated,
            q_rated,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadEvent {
    pub t_start: f64,
    pub load: LoadModel,
}

/// Stiff source used in grid-connected mode and for setpoint calibration.
/// It runs at the system's nominal frequency with angle zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSource {
    /// Line-to-line RMS voltage.
    pub v_ll: f64,
    pub line: LineModel,
}

impl GridSource {
    pub fn emf(&self) -> Phasor {
        phasor_from_polar(ll_to_phase(self.v_ll), 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Nominal line-to-line RMS voltage.
    pub v_nominal_ll: f64,
    /// Nominal frequency, Hz.
    pub frequency: f64,
    pub inverters: Vec<InverterConfig>,
    pub load_schedule: Vec<LoadEvent>,
    pub mode: Mode,
    pub grid: GridSource,
    pub dt: f64,
    pub t_end: f64,
    pub filter_tau: f64,
    pub log_decimation: usize,
    /// When set, `(delta0, E0)` are recomputed against the grid before use.
    pub calibrate: bool,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_nominal_ll > 0.0) {
            return Err(Error::invalid("v_nominal_ll", "must be > 0"));
        }
        if !(self.frequency > 0.0) {
            return Err(Error::invalid("frequency", "must be > 0"));
        }
        if self.inverters.is_empty() {
            return Err(Error::Config("at least one inverter is required".into()));
        }
        for inv in &self.inverters {
            inv.setpoints.validate()?;
            inv.gains.validate()?;
            LineModel::new(inv.line.r, inv.line.x)?;
        }
        LineModel::new(self.grid.line.r, self.grid.line.x)?;
        if !(self.grid.v_ll > 0.0) {
            return Err(Error::invalid("grid voltage", "must be > 0"));
        }
        match self.load_schedule.first() {
            None => return Err(Error::Config("load schedule is empty".into())),
            Some(first) if first.t_start != 0.0 => {
                return Err(Error::Config(format!(
                    "first load entry must start at t = 0, got {}",
                    first.t_start
                )))
            }
            _ => {}
        }
        for pair in self.load_schedule.windows(2) {
            if !(pair[1].t_start > pair[0].t_start) {
                return Err(Error::Config(format!(
                    "load schedule times must be strictly increasing ({} then {})",
                    pair[0].t_start, pair[1].t_start
                )));
            }
        }
        for ev in &self.load_schedule {
            ev.load.validate()?;
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::invalid("t_end_s", format!("must be >= 0, got {}", self.t_end)));
        }
        if self.log_decimation == 0 {
            return Err(Error::invalid("log_decimation", "must be >= 1"));
        }
        check_step(self.dt, self.filter_tau)
    }

    /// Number of fixed steps covering `[0, t_end]`.
    pub fn step_count(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }

    pub fn initial_load(&self) -> &LoadModel {
        &self.load_schedule[0].load
    }

    /// Series branches of every source in the network, grid last when
    /// grid-connected.
    pub fn source_lines(&self) -> Vec<LineModel> {
        let mut lines: Vec<LineModel> = self.inverters.iter().map(|i| i.line).collect();
        if self.mode == Mode::GridConnected {
            lines.push(self.grid.line);
        }
        lines
    }

    /// Network solve with inverter EMFs `(delta, e_peak)`.
    pub fn solve_network(&self, refs: &[(f64, f64)], load: &LoadModel) -> Result<NetworkSolution> {
        solve_with_grid(
            &self.inverters.iter().map(|i| i.line).collect::<Vec<_>>(),
            refs,
            (self.mode == Mode::GridConnected).then_some(&self.grid),
            load,
        )
    }

    /// The bus voltage each controller measures: the PCC when islanded, the
    /// grid's set voltage when grid-connected.
    pub fn measured_voltage(&self, sol: &NetworkSolution) -> f64 {
        match self.mode {
            Mode::Islanded => sol.v_pcc_ll(),
            Mode::GridConnected => self.grid.v_ll,
        }
    }

    /// Nominal per-phase peak EMF.
    pub fn nominal_peak(&self) -> f64 {
        ll_rms_to_phase_peak(self.v_nominal_ll)
    }

    /// The two-unit islanded system of the bundled reference scenario: 400 V,
    /// 60 Hz, R = 0.5 Ω lines, 5 kW / 2.5 kvar setpoints on 10 kW / 5 kvar
    /// units, and a 10 kW / 5 kvar load that steps to 20 kW / 10 kvar over
    /// `[1 s, 2 s)`.
    pub fn table1() -> Self {
        let (v0, f0) = (400.0, 60.0);
        let line = LineModel {
            r: 0.5,
            x: DEFAULT_LINE_X,
        };
        let inv = InverterConfig::with_default_gains(f0, v0, 5_000.0, 2_500.0, 10_000.0, 5_000.0, line)
            .expect("valid bundled ratings");
        let load = |t_start, p, q| LoadEvent {
            t_start,
            load: LoadModel {
                p_rated: p,
                q_rated: q,
                v_ref: v0,
            },
        };
        Self {
            v_nominal_ll: v0,
            frequency: f0,
            inverters: vec![inv, inv],
            load_schedule: vec![
                load(0.0, 10_000.0, 5_000.0),
                load(1.0, 20_000.0, 10_000.0),
                load(2.0, 10_000.0, 5_000.0),
            ],
            mode: Mode::Islanded,
            grid: GridSource {
                v_ll: v0,
                line: LineModel {
                    r: 0.0,
                    x: DEFAULT_GRID_X,
                },
            },
            dt: DEFAULT_DT,
            t_end: 3.0,
            filter_tau: DEFAULT_TAU,
            log_decimation: 1,
            calibrate: true,
        }
    }
}

/// Star-network solve for inverter EMFs `(delta, e_peak)` plus an optional
/// stiff grid source.
pub fn solve_with_grid(
    lines: &[LineModel],
    refs: &[(f64, f64)],
    grid: Option<&GridSource>,
    load: &LoadModel,
) -> Result<NetworkSolution> {
    let mut emfs: Vec<Phasor> = refs
        .iter()
        .map(|&(delta, e)| phasor_from_polar(peak_to_rms(e), delta))
        .collect();
    let mut all_lines = lines.to_vec();
    if let Some(g) = grid {
        emfs.push(g.emf());
        all_lines.push(g.line);
    }
    solve_star_network(&emfs, &all_lines, load_admittance(load)?)
}
