//! Scenario files and CSV time series.
//!
//! A scenario file is TOML with four sections. Units are part of the key
//! names and unknown keys are rejected.
//!
//! ```toml
//! [system]
//! v_nominal_ll = 400.0      # volts, line-to-line RMS
//! frequency = 60.0          # Hz
//! grid_r_ohm = 0.0          # optional, stiff-grid series resistance
//! grid_x_ohm = 0.01         # optional, stiff-grid series reactance
//!
//! [inverter.1]
//! p0_w = 5000.0
//! q0_var = 2500.0
//! p_rated_w = 10000.0
//! q_rated_var = 5000.0
//! line_r_ohm = 0.5
//! line_x_ohm = 2.5          # optional, default 2.5
//! # optional explicit gains: k_pf_hz_per_w, k_qv_v_per_var, k_fp_w_per_hz,
//! # k_vq_var_per_v, k_pdelta_rad_per_w, k_qe_v_per_var
//! # optional when calibrate = false: delta0_rad, e0_v (per-phase peak)
//!
//! [load.1]
//! t_start_s = 0.0
//! p_w = 10000.0
//! q_var = 5000.0
//! v_ref_ll = 400.0          # optional, default v_nominal_ll
//!
//! [sim]
//! t_end_s = 3.0
//! dt_s = 0.001              # optional
//! tau_s = 0.1               # optional
//! mode = "islanded"         # or "grid_connected"; optional
//! log_decimation = 1        # optional
//! calibrate = true          # optional
//! ```
//!
//! CSV output has one header row, `,` separators, `\n` line ends and
//! numbers in shortest round-trip decimal form.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::droop::{DroopGains, Mode, Setpoints};
use crate::error::{Error, Result};
use crate::powerflow::{LineModel, LoadModel};
use crate::scenario::{
    GridSource, InverterConfig, LoadEvent, Scenario, DEFAULT_DT, DEFAULT_GRID_X, DEFAULT_LINE_X,
    DEFAULT_TAU,
};
use crate::simulator::TimeSeries;

/// The bundled scenario encoding the reference two-unit experiment.
pub const TABLE1_SCENARIO: &str = include_str!("../scenarios/table1.scenario");

const REQUIRED_SECTIONS: [&str; 4] = ["system", "inverter", "load", "sim"];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileDoc {
    system: SystemSection,
    inverter: BTreeMap<String, InverterSection>,
    load: BTreeMap<String, LoadSection>,
    sim: SimSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    v_nominal_ll: f64,
    frequency: f64,
    grid_r_ohm: Option<f64>,
    grid_x_ohm: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InverterSection {
    p0_w: f64,
    q0_var: f64,
    p_rated_w: f64,
    q_rated_var: f64,
    line_r_ohm: f64,
    line_x_ohm: Option<f64>,
    k_pf_hz_per_w: Option<f64>,
    k_qv_v_per_var: Option<f64>,
    k_fp_w_per_hz: Option<f64>,
    k_vq_var_per_v: Option<f64>,
    k_pdelta_rad_per_w: Option<f64>,
    k_qe_v_per_var: Option<f64>,
    delta0_rad: Option<f64>,
    e0_v: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoadSection {
    t_start_s: f64,
    p_w: f64,
    q_var: f64,
    v_ref_ll: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimSection {
    t_end_s: f64,
    dt_s: Option<f64>,
    tau_s: Option<f64>,
    mode: Option<Mode>,
    log_decimation: Option<i64>,
    calibrate: Option<bool>,
}

/// 1-based line of a byte offset.
fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

/// Best-effort line of `key` inside `[section]`, falling back to the
/// section header, then to line 1.
fn locate(src: &str, section: &str, key: Option<&str>) -> usize {
    let header = format!("[{section}]");
    let mut in_section = false;
    let mut header_line = None;
    for (i, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            in_section = line.replace(' ', "") == header;
            if in_section {
                header_line = Some(i + 1);
            }
            continue;
        }
        if in_section {
            if let Some(k) = key {
                if line.split('=').next().map(str::trim) == Some(k) {
                    return i + 1;
                }
            }
        }
    }
    header_line.unwrap_or(1)
}

struct Ctx<'a> {
    src: &'a str,
    origin: &'a str,
}

impl Ctx<'_> {
    fn err(&self, section: &str, key: Option<&str>, msg: impl std::fmt::Display) -> Error {
        let line = locate(self.src, section, key);
        match key {
            Some(k) => Error::Parse(format!("{}:{line}: [{section}] {k}: {msg}", self.origin)),
            None => Error::Parse(format!("{}:{line}: [{section}]: {msg}", self.origin)),
        }
    }
}

fn numbered<T>(ctx: &Ctx, kind: &str, map: BTreeMap<String, T>) -> Result<Vec<(String, T)>> {
    if map.is_empty() {
        return Err(Error::Parse(format!("{}: section [{kind}.N] requires at least one entry", ctx.origin)));
    }
    let mut entries = Vec::with_capacity(map.len());
    for (name, v) in map {
        match name.parse::<u32>() {
            Ok(n) if n >= 1 => entries.push((n, name, v)),
            _ => {
                return Err(ctx.err(
                    &format!("{kind}.{name}"),
                    None,
                    format!("section index must be a positive integer, got `{name}`"),
                ))
            }
        }
    }
    entries.sort_by_key(|e| e.0);
    Ok(entries.into_iter().map(|(_, name, v)| (name, v)).collect())
}

/// Parses scenario text. `origin` names the source in error messages.
pub fn parse_scenario_str(src: &str, origin: &str) -> Result<Scenario> {
    let ctx = Ctx { src, origin };
    let table: toml::Table = toml::from_str(src).map_err(|e| toml_error(&ctx, &e))?;
    let missing: Vec<&str> = REQUIRED_SECTIONS
        .iter()
        .copied()
        .filter(|s| !table.contains_key(*s))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Parse(format!(
            "{origin}:1: missing required section(s): {}",
            missing.iter().map(|s| format!("[{s}]")).collect::<Vec<_>>().join(", ")
        )));
    }
    let doc: FileDoc = toml::from_str(src).map_err(|e| toml_error(&ctx, &e))?;

    let sys = &doc.system;
    let (v0, f0) = (sys.v_nominal_ll, sys.frequency);
    if !(v0 > 0.0) {
        return Err(ctx.err("system", Some("v_nominal_ll"), "must be > 0"));
    }
    if !(f0 > 0.0) {
        return Err(ctx.err("system", Some("frequency"), "must be > 0"));
    }
    let grid_line = LineModel::new(sys.grid_r_ohm.unwrap_or(0.0), sys.grid_x_ohm.unwrap_or(DEFAULT_GRID_X))
        .map_err(|e| ctx.err("system", Some("grid_x_ohm"), e))?;

    let calibrate = doc.sim.calibrate.unwrap_or(true);
    let mut inverters = Vec::new();
    for (name, inv) in numbered(&ctx, "inverter", doc.inverter)? {
        let section = format!("inverter.{name}");
        let line_x = inv.line_x_ohm.unwrap_or(DEFAULT_LINE_X);
        let line = LineModel::new(inv.line_r_ohm, line_x).map_err(|e| {
            let key = if line_x > 0.0 { "line_r_ohm" } else { "line_x_ohm" };
            ctx.err(&section, Some(key), e)
        })?;
        let base = DroopGains::design(inv.p_rated_w, inv.q_rated_var, v0, line.x)
            .map_err(|e| ctx.err(&section, Some("p_rated_w"), e))?;
        let gains = DroopGains {
            k_pf: inv.k_pf_hz_per_w.unwrap_or(base.k_pf),
            k_qv: inv.k_qv_v_per_var.unwrap_or(base.k_qv),
            k_fp: inv.k_fp_w_per_hz.unwrap_or(base.k_fp),
            k_vq: inv.k_vq_var_per_v.unwrap_or(base.k_vq),
            k_pdelta: inv.k_pdelta_rad_per_w.unwrap_or(base.k_pdelta),
            k_qe: inv.k_qe_v_per_var.unwrap_or(base.k_qe),
        };
        gains.validate().map_err(|e| ctx.err(&section, None, e))?;
        let mut setpoints = Setpoints::nominal(f0, v0, inv.p0_w, inv.q0_var);
        for (key, given) in [("delta0_rad", inv.delta0_rad), ("e0_v", inv.e0_v)] {
            if given.is_some() && calibrate {
                return Err(ctx.err(&section, Some(key), "explicit setpoint conflicts with calibrate = true"));
            }
        }
        if let Some(d) = inv.delta0_rad {
            setpoints.delta0 = d;
        }
        if let Some(e) = inv.e0_v {
            setpoints.e0 = e;
        }
        setpoints.validate().map_err(|e| ctx.err(&section, None, e))?;
        inverters.push(InverterConfig {
            setpoints,
            gains,
            line,
            p_rated: inv.p_rated_w,
            q_rated: inv.q_rated_var,
        });
    }

    let mut load_schedule: Vec<LoadEvent> = Vec::new();
    for (name, ld) in numbered(&ctx, "load", doc.load)? {
        let section = format!("load.{name}");
        let load = LoadModel::new(ld.p_w, ld.q_var, ld.v_ref_ll.unwrap_or(v0)).map_err(|e| ctx.err(&section, None, e))?;
        match load_schedule.last() {
            None if ld.t_start_s != 0.0 => {
                return Err(ctx.err(&section, Some("t_start_s"), "first load entry must start at 0"))
            }
            Some(prev) if !(ld.t_start_s > prev.t_start) => {
                return Err(ctx.err(
                    &section,
                    Some("t_start_s"),
                    format!("load times must be strictly increasing ({} after {})", ld.t_start_s, prev.t_start),
                ))
            }
            _ => {}
        }
        load_schedule.push(LoadEvent {
            t_start: ld.t_start_s,
            load,
        });
    }

    let sim = &doc.sim;
    let dt = sim.dt_s.unwrap_or(DEFAULT_DT);
    let tau = sim.tau_s.unwrap_or(DEFAULT_TAU);
    if !(dt > 0.0) {
        return Err(ctx.err("sim", Some("dt_s"), "must be > 0"));
    }
    if !(dt < tau) {
        return Err(ctx.err(
            "sim",
            Some("dt_s"),
            format!("dt_s = {dt} must be smaller than tau_s = {tau} (explicit Euler filter stability)"),
        ));
    }
    if !(sim.t_end_s >= 0.0) {
        return Err(ctx.err("sim", Some("t_end_s"), "must be >= 0"));
    }
    let log_decimation = match sim.log_decimation {
        None => 1,
        Some(n) if n >= 1 => n as usize,
        Some(n) => return Err(ctx.err("sim", Some("log_decimation"), format!("must be >= 1, got {n}"))),
    };

    let scenario = Scenario {
        v_nominal_ll: v0,
        frequency: f0,
        inverters,
        load_schedule,
        mode: sim.mode.unwrap_or_default(),
        grid: GridSource {
            v_ll: v0,
            line: grid_line,
        },
        dt,
        t_end: sim.t_end_s,
        filter_tau: tau,
        log_decimation,
        calibrate,
    };
    scenario
        .validate()
        .map_err(|e| Error::Parse(format!("{origin}: {e}")))?;
    Ok(scenario)
}

fn toml_error(ctx: &Ctx, e: &toml::de::Error) -> Error {
    let line = e.span().map(|s| line_of(ctx.src, s.start)).unwrap_or(1);
    Error::Parse(format!("{}:{line}: {}", ctx.origin, e.message()))
}

pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: cannot read: {e}", path.display())))?;
    parse_scenario_str(&src, &path.display().to_string())
}

/// Floats in a form TOML reads back as floats, losslessly.
fn toml_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Renders a scenario as a scenario file. Gains are always written out;
/// `(delta0, E0)` only when calibration is disabled.
pub fn print_scenario(s: &Scenario) -> String {
    let mut out = String::new();
    let f = toml_f64;
    let _ = writeln!(out, "[system]");
    let _ = writeln!(out, "v_nominal_ll = {}", f(s.v_nominal_ll));
    let _ = writeln!(out, "frequency = {}", f(s.frequency));
    let _ = writeln!(out, "grid_r_ohm = {}", f(s.grid.line.r));
    let _ = writeln!(out, "grid_x_ohm = {}", f(s.grid.line.x));
    for (i, inv) in s.inverters.iter().enumerate() {
        let g = &inv.gains;
        let _ = writeln!(out, "\n[inverter.{}]", i + 1);
        let _ = writeln!(out, "p0_w = {}", f(inv.setpoints.p0));
        let _ = writeln!(out, "q0_var = {}", f(inv.setpoints.q0));
        let _ = writeln!(out, "p_rated_w = {}", f(inv.p_rated));
        let _ = writeln!(out, "q_rated_var = {}", f(inv.q_rated));
        let _ = writeln!(out, "line_r_ohm = {}", f(inv.line.r));
        let _ = writeln!(out, "line_x_ohm = {}", f(inv.line.x));
        let _ = writeln!(out, "k_pf_hz_per_w = {}", f(g.k_pf));
        let _ = writeln!(out, "k_qv_v_per_var = {}", f(g.k_qv));
        let _ = writeln!(out, "k_fp_w_per_hz = {}", f(g.k_fp));
        let _ = writeln!(out, "k_vq_var_per_v = {}", f(g.k_vq));
        let _ = writeln!(out, "k_pdelta_rad_per_w = {}", f(g.k_pdelta));
        let _ = writeln!(out, "k_qe_v_per_var = {}", f(g.k_qe));
        if !s.calibrate {
            let _ = writeln!(out, "delta0_rad = {}", f(inv.setpoints.delta0));
            let _ = writeln!(out, "e0_v = {}", f(inv.setpoints.e0));
        }
    }
    for (i, ev) in s.load_schedule.iter().enumerate() {
        let _ = writeln!(out, "\n[load.{}]", i + 1);
        let _ = writeln!(out, "t_start_s = {}", f(ev.t_start));
        let _ = writeln!(out, "p_w = {}", f(ev.load.p_rated));
        let _ = writeln!(out, "q_var = {}", f(ev.load.q_rated));
        let _ = writeln!(out, "v_ref_ll = {}", f(ev.load.v_ref));
    }
    let mode = match s.mode {
        Mode::Islanded => "islanded",
        Mode::GridConnected => "grid_connected",
    };
    let _ = writeln!(out, "\n[sim]");
    let _ = writeln!(out, "dt_s = {}", f(s.dt));
    let _ = writeln!(out, "t_end_s = {}", f(s.t_end));
    let _ = writeln!(out, "tau_s = {}", f(s.filter_tau));
    let _ = writeln!(out, "mode = \"{mode}\"");
    let _ = writeln!(out, "log_decimation = {}", s.log_decimation);
    let _ = writeln!(out, "calibrate = {}", s.calibrate);
    out
}

/// CSV header for `n` inverters.
pub fn csv_header(n: usize) -> Vec<String> {
    let mut cols = vec!["t_s".to_string()];
    for i in 1..=n {
        for c in ["p_out_w", "q_out_var", "e_ref_v", "delta_ref_rad", "f_meas_hz"] {
            cols.push(format!("{c}_{i}"));
        }
    }
    cols.extend(["v_pcc_rms_ll_v", "load_p_w", "load_q_var"].map(String::from));
    cols
}

/// Shortest round-trip decimal rendering.
pub fn csv_number(v: f64) -> String {
    format!("{v}")
}

/// Numeric values of one CSV row, in header order.
pub fn csv_values(row: &crate::simulator::LogRow) -> Vec<f64> {
    let mut vals = Vec::with_capacity(1 + 5 * row.inverters.len() + 3);
    vals.push(row.t);
    for s in &row.inverters {
        vals.extend([s.p_out, s.q_out, s.e_ref, s.delta_ref, s.f_meas]);
    }
    vals.extend([row.v_pcc_ll, row.load_p, row.load_q]);
    vals
}

pub fn write_csv(ts: &TimeSeries) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let write = |w: &mut csv::Writer<Vec<u8>>| -> csv::Result<()> {
        w.write_record(csv_header(ts.n_inverters))?;
        for row in &ts.rows {
            w.write_record(csv_values(row).into_iter().map(csv_number))?;
        }
        w.flush()?;
        Ok(())
    };
    // writing into memory cannot fail
    write(&mut w).expect("in-memory CSV write");
    String::from_utf8(w.into_inner().expect("flushed writer")).expect("ASCII CSV")
}

/// A numeric CSV table as written by [`write_csv`].
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

pub fn read_csv(text: &str) -> Result<CsvTable> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Error::Parse(format!("CSV header: {e}")))?
        .iter()
        .map(String::from)
        .collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(Error::Parse("empty CSV".into()));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Parse(format!("CSV: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse(format!("CSV line {line}: {e}")))?;
        rows.push(row);
    }
    Ok(CsvTable { header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> Result<Scenario> {
        parse_scenario_str(src, "test.scenario")
    }

    #[test]
    fn bundled_table1_matches_builder() {
        let s = parse(TABLE1_SCENARIO).unwrap();
        assert_eq!(s, Scenario::table1());
        assert_eq!(s.inverters.len(), 2);
        assert_eq!(s.inverters[0].setpoints.p0, 5_000.0);
        assert_eq!(s.inverters[1].setpoints.q0, 2_500.0);
        assert_eq!(s.inverters[0].line.r, 0.5);
        let loads: Vec<(f64, f64)> = s.load_schedule.iter().map(|e| (e.t_start, e.load.p_rated)).collect();
        assert_eq!(loads, vec![(0.0, 10_000.0), (1.0, 20_000.0), (2.0, 10_000.0)]);
        assert_eq!((s.v_nominal_ll, s.frequency), (400.0, 60.0));
    }

    #[test]
    fn empty_file_lists_every_section() {
        let msg = parse("").unwrap_err().to_string();
        for s in ["[system]", "[inverter]", "[load]", "[sim]"] {
            assert!(msg.contains(s), "{msg}");
        }
    }

    #[test]
    fn euler_guard_is_a_parse_error() {
        let src = TABLE1_SCENARIO.replace("tau_s = 0.1", "tau_s = 0.001");
        let msg = parse(&src).unwrap_err().to_string();
        assert!(msg.contains("Euler"), "{msg}");
        assert!(msg.contains("dt_s"), "{msg}");
    }

    #[test]
    fn unknown_and_unitless_keys_rejected() {
        let src = TABLE1_SCENARIO.replace("p0_w = 5000.0", "p0 = 5000.0");
        let msg = parse(&src).unwrap_err().to_string();
        assert!(msg.starts_with("test.scenario:"), "{msg}");
        assert!(msg.contains("p0"), "{msg}");
        let src = format!("{TABLE1_SCENARIO}\n[extra]\nx = 1\n");
        assert!(parse(&src).is_err());
    }

    #[test]
    fn missing_key_names_line_and_key() {
        let src = TABLE1_SCENARIO.replacen("q_rated_var = 5000.0\n", "", 1);
        let msg = parse(&src).unwrap_err().to_string();
        assert!(msg.contains("q_rated_var"), "{msg}");
    }

    #[test]
    fn non_increasing_load_times() {
        let src = TABLE1_SCENARIO.replace("t_start_s = 2.0", "t_start_s = 0.5");
        let msg = parse(&src).unwrap_err().to_string();
        assert!(msg.contains("t_start_s") && msg.contains("strictly increasing"), "{msg}");
        let line: usize = msg.split(':').nth(1).unwrap().parse().unwrap();
        assert_eq!(src.lines().nth(line - 1).unwrap().trim(), "t_start_s = 0.5");
    }

    #[test]
    fn integers_accepted_for_floats() {
        let src = TABLE1_SCENARIO.replace("p0_w = 5000.0", "p0_w = 5000");
        assert_eq!(parse(&src).unwrap().inverters[0].setpoints.p0, 5000.0);
    }

    #[test]
    fn explicit_setpoints_need_calibration_off() {
        let src = TABLE1_SCENARIO.replace("p0_w = 5000.0", "p0_w = 5000.0\ndelta0_rad = 0.05");
        assert!(parse(&src).is_err());
        let src = src.replace("calibrate = true", "calibrate = false");
        assert_eq!(parse(&src).unwrap().inverters[0].setpoints.delta0, 0.05);
    }

    #[test]
    fn printer_round_trip() {
        let s = Scenario::table1();
        assert_eq!(parse(&print_scenario(&s)).unwrap(), s);
        let mut odd = crate::oracle::prepare(&s).unwrap();
        odd.inverters[1].gains.k_pdelta = 1.234_567_890_123e-7;
        odd.mode = Mode::GridConnected;
        odd.log_decimation = 7;
        assert_eq!(parse(&print_scenario(&odd)).unwrap(), odd);
    }

    #[test]
    fn csv_shape() {
        let h = csv_header(2);
        assert_eq!(h.len(), 1 + 5 * 2 + 3);
        assert_eq!(h[1], "p_out_w_1");
        assert_eq!(h.last().unwrap(), "load_q_var");
    }

    #[test]
    fn csv_read_errors() {
        assert!(read_csv("").is_err());
        assert!(read_csv("a,b\n1,2,3\n").is_err());
        assert!(read_csv("a,b\n1,x\n").is_err());
        assert_eq!(read_csv("a,b\n").unwrap().rows.len(), 0);
    }
}
