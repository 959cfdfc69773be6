//! Static SVG line charts of a run CSV.
//!
//! Output is a pure function of the input table: fixed layout, fixed
//! palette and fixed number formatting, so identical CSVs give identical
//! files.

use std::fmt::Write as _;
use std::path::Path;

use droopsim::format::{read_csv, CsvTable};

use crate::error::CliError;

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

struct Series {
    label: String,
    ys: Vec<f64>,
    dashed: bool,
}

struct Chart<'a> {
    title: &'a str,
    y_label: &'a str,
    t: &'a [f64],
    series: Vec<Series>,
}

/// Tick spacing of 1, 2 or 5 times a power of ten giving about `target`
/// intervals over `span`.
fn nice_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let m = raw / mag;
    let f = if m <= 1.0 {
        1.0
    } else if m <= 2.0 {
        2.0
    } else if m <= 5.0 {
        5.0
    } else {
        10.0
    };
    f * mag
}

fn ticks(lo: f64, hi: f64) -> (Vec<f64>, usize) {
    let step = nice_step(hi - lo, 5.0);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    ((first..=last).map(|k| k as f64 * step).collect(), decimals)
}

/// Axis range covering `values` with a small margin; flat data gets a
/// window around its value.
fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if hi - lo <= 1e-9 * hi.abs().max(lo.abs()).max(1.0) {
        let w = (lo.abs() * 1e-3).max(1e-3);
        return (lo - w, hi + w);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Reduces a trace to at most four points per pixel column (first, min,
/// max, last) so long runs stay small without losing extremes.
fn decimate(xs: &[f64], ys: &[f64], x_of: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut i = 0;
    while i < xs.len() {
        let col = x_of(xs[i]).floor();
        let mut j = i;
        while j + 1 < xs.len() && x_of(xs[j + 1]).floor() == col {
            j += 1;
        }
        let bucket = i..=j;
        let min = bucket.clone().min_by(|&a, &b| ys[a].total_cmp(&ys[b])).unwrap();
        let max = bucket.clone().max_by(|&a, &b| ys[a].total_cmp(&ys[b])).unwrap();
        let mut picks = vec![i, min, max, j];
        picks.sort_unstable();
        picks.dedup();
        out.extend(picks.into_iter().map(|k| (xs[k], ys[k])));
        i = j + 1;
    }
    out
}

fn render(chart: &Chart) -> String {
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let (t0, t1) = {
        let lo = chart.t.first().copied().unwrap_or(0.0);
        let hi = chart.t.last().copied().unwrap_or(1.0);
        if hi > lo { (lo, hi) } else { (lo, lo + 1.0) }
    };
    let (y0, y1) = padded_range(chart.series.iter().flat_map(|s| s.ys.iter().copied()));
    let px = |t: f64| LEFT + (t - t0) / (t1 - t0) * plot_w;
    let py = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + plot_w / 2.0,
        chart.title
    );

    let (xt, xd) = ticks(t0, t1);
    for t in xt {
        let x = px(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#e0e0e0"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{t:.xd$}</text>"##,
            TOP + plot_h,
            TOP + plot_h + 16.0
        );
    }
    let (yt, yd) = ticks(y0, y1);
    for y in yt {
        let yy = py(y);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#e0e0e0"/><text x="{:.2}" y="{:.2}" text-anchor="end">{y:.yd$}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            yy + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">time (s)</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        chart.y_label
    );

    for (k, s) in chart.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let dash = if s.dashed { r#" stroke-dasharray="6 3""# } else { "" };
        let points: Vec<String> = decimate(chart.t, &s.ys, px)
            .into_iter()
            .map(|(t, y)| format!("{:.2},{:.2}", px(t), py(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
            points.join(" ")
        );
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = LEFT + plot_w + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn column(table: &CsvTable, name: &str) -> Result<Vec<f64>, CliError> {
    let col = table
        .column(name)
        .ok_or_else(|| CliError::Input(format!("CSV has no `{name}` column")))?;
    if let Some(i) = col.iter().position(|v| !v.is_finite()) {
        return Err(CliError::Input(format!("non-finite `{name}` on data row {}", i + 1)));
    }
    Ok(col)
}

/// Renders the three charts for `table` as `(file name, svg)` pairs.
pub fn charts(table: &CsvTable) -> Result<Vec<(&'static str, String)>, CliError> {
    if table.rows.is_empty() {
        return Err(CliError::Input("CSV has no data rows".into()));
    }
    let t = column(table, "t_s")?;
    let n = (1..).take_while(|i| table.header.iter().any(|h| *h == format!("p_out_w_{i}"))).count();
    if n == 0 {
        return Err(CliError::Input("CSV has no `p_out_w_1` column".into()));
    }

    let mut power = Vec::new();
    let mut freq = Vec::new();
    for i in 1..=n {
        power.push(Series {
            label: format!("P{i} (W)"),
            ys: column(table, &format!("p_out_w_{i}"))?,
            dashed: false,
        });
        power.push(Series {
            label: format!("Q{i} (var)"),
            ys: column(table, &format!("q_out_var_{i}"))?,
            dashed: true,
        });
        freq.push(Series {
            label: format!("DG{i}"),
            ys: column(table, &format!("f_meas_hz_{i}"))?,
            dashed: false,
        });
    }
    let voltage = vec![Series {
        label: "PCC".into(),
        ys: column(table, "v_pcc_rms_ll_v")?,
        dashed: false,
    }];

    Ok(vec![
        (
            "power.svg",
            render(&Chart {
                title: "Inverter output power",
                y_label: "P (W), Q (var)",
                t: &t,
                series: power,
            }),
        ),
        (
            "voltage.svg",
            render(&Chart {
                title: "PCC voltage, line-to-line RMS",
                y_label: "V",
                t: &t,
                series: voltage,
            }),
        ),
        (
            "frequency.svg",
            render(&Chart {
                title: "Measured frequency",
                y_label: "Hz",
                t: &t,
                series: freq,
            }),
        ),
    ])
}

pub fn emit_plots(csv_path: &Path, out_dir: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(csv_path).map_err(|e| CliError::io(csv_path, e))?;
    let table = read_csv(&text)?;
    // everything is rendered before the first file is written
    let files = charts(&table)?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    for (name, svg) in files {
        let path = out_dir.join(name);
        std::fs::write(&path, svg).map_err(|e| CliError::io(&path, e))?;
        log::info!("wrote {}", path.display());
    }
    Ok(())
}
