//! CSV with instantaneous phase voltages of one inverter.
//!
//! The simulation logs one row per step, far too coarse to show a 60 Hz
//! sine. Each logged interval is subdivided so that the waveform gets at
//! least [`POINTS_PER_CYCLE`] samples per cycle; the phasor columns hold
//! their value from the preceding logged row.

use droopsim::format::{csv_header, csv_number, csv_values};
use droopsim::waveform::synth_three_phase;
use droopsim::{Scenario, TimeSeries};

pub const POINTS_PER_CYCLE: usize = 64;

/// Sub-samples per logged interval of length `span`.
fn subdivisions(span: f64, f: f64) -> usize {
    ((POINTS_PER_CYCLE as f64 * f * span).ceil() as usize).max(1)
}

pub fn expand(ts: &TimeSeries, s: &Scenario, inverter: usize) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = csv_header(ts.n_inverters);
    header.extend(["va_v", "vb_v", "vc_v"].map(String::from));
    let write = |w: &mut csv::Writer<Vec<u8>>| -> csv::Result<()> {
        w.write_record(&header)?;
        for (k, row) in ts.rows.iter().enumerate() {
            let values = csv_values(row);
            let inv = &row.inverters[inverter];
            let n = ts.rows.get(k + 1).map_or(1, |next| subdivisions(next.t - row.t, s.frequency));
            let span = ts.rows.get(k + 1).map_or(0.0, |next| next.t - row.t);
            for j in 0..n {
                let t = row.t + span * j as f64 / n as f64;
                let v = synth_three_phase(inv.e_ref, inv.delta_ref, s.frequency, t);
                let mut rec = values.clone();
                rec[0] = t;
                rec.extend([v.va, v.vb, v.vc]);
                w.write_record(rec.into_iter().map(csv_number))?;
            }
        }
        w.flush().map_err(csv::Error::from)
    };
    write(&mut w).expect("in-memory CSV write");
    String::from_utf8(w.into_inner().expect("flushed writer")).expect("ASCII CSV")
}
