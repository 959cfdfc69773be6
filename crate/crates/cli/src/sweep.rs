//! Parallel parameter sweeps over the steady-state oracle.

use droopsim::format::csv_number;
use droopsim::oracle::{sweep_point, sweep_point_scaled};
use droopsim::{OracleOptions, Scenario, SweepParam, SweepRow};
use rayon::prelude::*;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    /// Values multiply the scenario's own parameter instead of replacing it.
    pub relative: bool,
}

impl SweepSpec {
    pub fn new(param: &str, from: f64, to: f64, steps: usize, relative: bool) -> Result<Self, CliError> {
        let param = SweepParam::from_name(param).ok_or_else(|| {
            let known: Vec<_> = SweepParam::ALL.iter().map(|p| p.name()).collect();
            CliError::Input(format!("unknown sweep parameter `{param}` (expected one of {})", known.join(", ")))
        })?;
        if steps == 0 {
            return Err(CliError::Usage("--steps must be at least 1".into()));
        }
        if !from.is_finite() || !to.is_finite() {
            return Err(CliError::Usage("--from and --to must be finite".into()));
        }
        let values = if steps == 1 {
            vec![from]
        } else {
            (0..steps).map(|i| from + (to - from) * i as f64 / (steps - 1) as f64).collect()
        };
        Ok(Self { param, values, relative })
    }
}

fn header(spec: &SweepSpec, n: usize) -> Vec<String> {
    let value_col = if spec.relative {
        format!("{}_factor", spec.param.name())
    } else {
        spec.param.name().to_string()
    };
    let mut cols = vec![value_col, "converged".into(), "loop_gain".into(), "spectral_radius".into()];
    for i in 1..=n {
        cols.push(format!("p_out_w_{i}"));
        cols.push(format!("q_out_var_{i}"));
    }
    cols.push("v_pcc_rms_ll_v".into());
    cols.push("note".into());
    cols
}

fn record(row: &SweepRow, n: usize) -> Vec<String> {
    let mut rec = vec![
        csv_number(row.value),
        row.converged.to_string(),
        csv_number(row.loop_gain),
        csv_number(row.spectral_radius),
    ];
    match &row.steady {
        Some(ss) => {
            for inv in &ss.inverters {
                rec.push(csv_number(inv.p));
                rec.push(csv_number(inv.q));
            }
            rec.push(csv_number(droopsim::powerflow::phase_to_ll(ss.v_pcc.norm())));
        }
        None => rec.extend(std::iter::repeat_n(String::new(), 2 * n + 1)),
    }
    rec.push(row.note.clone().unwrap_or_default());
    rec
}

/// Evaluates every grid point, concurrently, and renders the rows in grid
/// order.
pub fn run_sweep(s: &Scenario, spec: &SweepSpec) -> String {
    let opts = OracleOptions::default();
    let rows: Vec<SweepRow> = spec
        .values
        .par_iter()
        .map(|&v| {
            if spec.relative {
                sweep_point_scaled(s, spec.param, v, &opts)
            } else {
                sweep_point(s, spec.param, v, &opts)
            }
        })
        .collect();
    let n = s.inverters.len();
    let mut w = csv::Writer::from_writer(Vec::new());
    let write = |w: &mut csv::Writer<Vec<u8>>| -> csv::Result<()> {
        w.write_record(header(spec, n))?;
        for row in &rows {
            log::debug!("{} = {}: converged {}", spec.param.name(), row.value, row.converged);
            w.write_record(record(row, n))?;
        }
        w.flush().map_err(csv::Error::from)
    };
    write(&mut w).expect("in-memory CSV write");
    String::from_utf8(w.into_inner().expect("flushed writer")).expect("UTF-8 CSV")
}
