//! `run` and `steady` subcommands and their human-readable summaries.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use droopsim::format::write_csv;
use droopsim::oracle::{prepare, stability_margin, steady_state_solve};
use droopsim::simulator::run_from;
use droopsim::{LoadModel, OracleOptions, Scenario, SimState, SteadyState, TimeSeries};

use crate::error::CliError;
use crate::{waveform_csv, write_output};

/// Settling band around the segment's steady value.
const BAND: f64 = 0.02;

struct Segment {
    start: f64,
    end: f64,
    /// Whether the segment runs to the end of the horizon, final row included.
    last: bool,
    load: LoadModel,
    /// Tolerance for matching row times against event times.
    eps: f64,
}

impl Segment {
    fn contains(&self, t: f64) -> bool {
        t >= self.start - self.eps && (t < self.end - self.eps || (self.last && t <= self.end + self.eps))
    }
}

fn segments(s: &Scenario) -> Vec<Segment> {
    let eps = 1e-9 * s.dt;
    let sched: Vec<_> = s.load_schedule.iter().filter(|ev| ev.t_start <= s.t_end + eps).collect();
    sched
        .iter()
        .enumerate()
        .map(|(i, ev)| {
            let next = sched.get(i + 1).map(|n| n.t_start);
            Segment {
                start: ev.t_start,
                end: next.unwrap_or(s.t_end),
                last: next.is_none(),
                load: ev.load,
                eps,
            }
        })
        .collect()
}

/// Time from the segment start until every inverter's P stays within the
/// band; `None` when the segment ends outside it.
fn settling_time(ts: &TimeSeries, seg: &Segment, target: &SteadyState) -> Option<f64> {
    let rows: Vec<_> = ts.rows.iter().filter(|r| seg.contains(r.t)).collect();
    let outside = |r: &droopsim::LogRow| {
        r.inverters
            .iter()
            .zip(&target.inverters)
            .any(|(m, o)| (m.p_out - o.p).abs() > BAND * o.p.abs())
    };
    match rows.iter().rposition(|r| outside(r)) {
        None => Some(0.0),
        Some(i) => rows.get(i + 1).map(|r| r.t - seg.start),
    }
}

fn summary(s: &Scenario, ts: &TimeSeries, elapsed_ms: f64) -> String {
    let opts = OracleOptions::default();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "simulated {} s in {} steps ({:.0} ms), {} rows logged",
        s.t_end,
        s.step_count(),
        elapsed_ms,
        ts.rows.len()
    );
    for (k, seg) in segments(s).iter().enumerate() {
        let _ = writeln!(
            out,
            "segment {}: [{} s, {} s)  load {} W / {} var",
            k + 1,
            seg.start,
            seg.end,
            seg.load.p_rated,
            seg.load.q_rated
        );
        let end_row = ts.rows.iter().rev().find(|r| seg.contains(r.t));
        let oracle = steady_state_solve(s, &seg.load, &opts);
        let _ = writeln!(out, "  {:>3} {:>12} {:>12} {:>12} {:>12}", "DG", "P_end W", "Q_end var", "P_ss W", "Q_ss var");
        for i in 0..s.inverters.len() {
            let (p_end, q_end) = end_row.map_or((f64::NAN, f64::NAN), |r| (r.inverters[i].p_out, r.inverters[i].q_out));
            let (p_ss, q_ss) = match &oracle {
                Ok(ss) => (ss.inverters[i].p, ss.inverters[i].q),
                Err(_) => (f64::NAN, f64::NAN),
            };
            let _ = writeln!(out, "  {:>3} {:>12.2} {:>12.2} {:>12.2} {:>12.2}", i + 1, p_end, q_end, p_ss, q_ss);
        }
        let settle = match &oracle {
            Ok(ss) => settling_time(ts, seg, ss).map_or("not settled".to_string(), |t| format!("{t:.3} s")),
            Err(e) => format!("no steady state ({e})"),
        };
        let _ = writeln!(out, "  settling to the {:.0}% band: {settle}", BAND * 100.0);
    }
    if let Some(min) = ts.rows.iter().min_by(|a, b| a.v_pcc_ll.total_cmp(&b.v_pcc_ll)) {
        let _ = writeln!(out, "minimum PCC voltage {:.3} V (line-to-line) at t = {} s", min.v_pcc_ll, min.t);
    }
    out
}

pub fn run(s: &Scenario, output: Option<&Path>, waveform: Option<usize>) -> Result<(), CliError> {
    if let Some(inv) = waveform {
        if inv == 0 || inv > s.inverters.len() {
            return Err(CliError::Usage(format!(
                "--waveform expects an inverter between 1 and {}, got {inv}",
                s.inverters.len()
            )));
        }
    }
    let prepared = prepare(s)?;
    let start = Instant::now();
    let (ts, _) = run_from(&prepared, SimState::initial(&prepared))?;
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    log::info!("run finished in {elapsed_ms:.1} ms");

    let csv = match waveform {
        Some(inv) => waveform_csv::expand(&ts, &prepared, inv - 1),
        None => write_csv(&ts),
    };
    write_output(output, &csv)?;

    let text = summary(&prepared, &ts, elapsed_ms);
    // keep stdout clean when it carries the CSV
    if output.is_some() {
        print!("{text}");
    } else {
        eprint!("{text}");
    }
    Ok(())
}

pub fn print_steady(s: &Scenario) -> Result<(), CliError> {
    let prepared = prepare(s)?;
    let opts = OracleOptions::default();
    for (k, seg) in segments(&prepared).iter().enumerate() {
        println!(
            "segment {}: from {} s, load {} W / {} var",
            k + 1,
            seg.start,
            seg.load.p_rated,
            seg.load.q_rated
        );
        let ss = steady_state_solve(&prepared, &seg.load, &opts)?;
        println!(
            "  {:>3} {:>12} {:>12} {:>12} {:>12}",
            "DG", "delta rad", "E peak V", "P W", "Q var"
        );
        for (i, inv) in ss.inverters.iter().enumerate() {
            println!("  {:>3} {:>12.6} {:>12.4} {:>12.3} {:>12.3}", i + 1, inv.delta, inv.e, inv.p, inv.q);
        }
        let report = stability_margin(&prepared, &ss, &opts);
        println!(
            "  PCC {:.4} V (line-to-line), {} iterations",
            droopsim::powerflow::phase_to_ll(ss.v_pcc.norm()),
            ss.iterations
        );
        println!(
            "  loop gains {}, spectral radius {:.4} (damped {:.4}), {}",
            report
                .loop_gains
                .iter()
                .map(|g| format!("{g:.4}"))
                .collect::<Vec<_>>()
                .join(" "),
            report.spectral_radius,
            report.damped_radius,
            if report.stable { "stable" } else { "UNSTABLE" }
        );
    }
    Ok(())
}
