//! Steady-state analysis of the coupled droop + network equations.
//!
//! At equilibrium the reference angle is constant, so the measured frequency
//! equals `f0` and the restoration layer returns `p_ref = P0`. What remains
//! is the algebraic fixed point
//!
//! ```text
//! δ_i = δ0_i − k_pδ·(P0_i − P_i(δ, E))
//! E_i = E0_i − k_qE·(q_ref_i − Q_i(δ, E)),   q_ref_i = Q0_i − k_vq·(V0 − V_meas)
//! ```
//!
//! solved here by damped fixed-point iteration, independent of the
//! simulator's time stepping. Setpoint calibration uses Newton's method with
//! a finite-difference Jacobian.

use nalgebra::{DMatrix, DVector};

use crate::droop::restoration_refs;
use crate::error::{Error, Result};
use crate::powerflow::{LoadModel, NetworkSolution, Phasor};
use crate::scenario::{solve_with_grid, GridSource, Scenario};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Relaxation factor λ in `x ← x + λ·(F(x) − x)`.
    pub damping: f64,
    /// Convergence threshold on `max |F(x) − x|` (rad and peak volts).
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Finite-difference step for angle derivatives, rad.
    pub fd_step: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tolerance: 1e-10,
            max_iterations: 10_000,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverterSteadyState {
    pub delta: f64,
    /// Per-phase peak EMF.
    pub e: f64,
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub inverters: Vec<InverterSteadyState>,
    pub v_pcc: Phasor,
    pub load: LoadModel,
    pub residual: f64,
    pub iterations: usize,
}

impl SteadyState {
    pub fn refs(&self) -> Vec<(f64, f64)> {
        self.inverters.iter().map(|s| (s.delta, s.e)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// `k_pδ · ∂P_i/∂δ_i` per inverter, other sources held fixed.
    pub loop_gains: Vec<f64>,
    /// All loop gains below one.
    pub stable: bool,
    /// Spectral radius of the full Jacobian of the undamped fixed-point map,
    /// including angle/magnitude and inverter/inverter coupling.
    pub spectral_radius: f64,
    /// Spectral radius of the damped iteration actually run by
    /// [`steady_state_solve`]; below one when the point attracts it.
    pub damped_radius: f64,
}

impl StabilityReport {
    pub fn max_loop_gain(&self) -> f64 {
        self.loop_gains.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// The undamped fixed-point map `F(δ, E)` together with the network
/// solution it was evaluated on.
fn droop_map(scenario: &Scenario, refs: &[(f64, f64)], load: &LoadModel) -> Result<(Vec<(f64, f64)>, NetworkSolution)> {
    let sol = scenario.solve_network(refs, load)?;
    let v_meas = scenario.measured_voltage(&sol);
    let next = scenario
        .inverters
        .iter()
        .zip(&sol.s_out)
        .map(|(inv, s)| {
            let sp = &inv.setpoints;
            let (p_ref, q_ref) = restoration_refs(sp.f0, v_meas, &inv.gains, sp);
            (
                sp.delta0 - inv.gains.k_pdelta * (p_ref - s.re),
                sp.e0 - inv.gains.k_qe * (q_ref - s.im),
            )
        })
        .collect();
    Ok((next, sol))
}

/// Loss of synchronism: some EMF leads or lags the PCC by more than 90°.
fn angle_excursion(refs: &[(f64, f64)], v_pcc: Phasor) -> Option<usize> {
    let pcc_angle = v_pcc.arg();
    refs.iter().position(|&(delta, _)| {
        let d = (delta - pcc_angle + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI)
            - std::f64::consts::PI;
        d.abs() > std::f64::consts::FRAC_PI_2
    })
}

/// Damped fixed-point solve of the steady state under `load`, started from
/// a flat profile (all angles zero, nominal magnitude).
pub fn steady_state_solve(scenario: &Scenario, load: &LoadModel, opts: &OracleOptions) -> Result<SteadyState> {
    let flat = vec![(0.0, scenario.nominal_peak()); scenario.inverters.len()];
    let mut x = flat;
    let diverged = |iterations: usize, reason: String| Error::Divergence {
        iterations,
        reason,
        report: Box::new(design_point_stability(scenario, load, opts)),
    };

    for it in 0..opts.max_iterations {
        let (next, sol) = match droop_map(scenario, &x, load) {
            Ok(v) => v,
            Err(e) => return Err(diverged(it, e.to_string())),
        };
        if let Some(i) = angle_excursion(&x, sol.v_pcc) {
            return Err(diverged(it, format!("inverter {} lost synchronism", i + 1)));
        }
        let residual = x
            .iter()
            .zip(&next)
            .map(|(a, b)| (a.0 - b.0).abs().max((a.1 - b.1).abs()))
            .fold(0.0, f64::max);
        if !residual.is_finite() {
            return Err(diverged(it, "non-finite iterate".into()));
        }
        if residual < opts.tolerance {
            // a symmetric start can land exactly on a repelling fixed point
            // without ever exciting the mode that repels it
            let local = stability_at(scenario, &x, load, opts);
            if !(local.damped_radius < 1.0) {
                return Err(Error::Divergence {
                    iterations: it,
                    reason: format!(
                        "fixed point does not attract the iteration (damped spectral radius {:.4})",
                        local.damped_radius
                    ),
                    report: Box::new(local),
                });
            }
            let inverters = x
                .iter()
                .zip(&sol.s_out)
                .map(|(&(delta, e), s)| InverterSteadyState {
                    delta,
                    e,
                    p: s.re,
                    q: s.im,
                })
                .collect();
            return Ok(SteadyState {
                inverters,
                v_pcc: sol.v_pcc,
                load: *load,
                residual,
                iterations: it,
            });
        }
        for (xi, ni) in x.iter_mut().zip(&next) {
            xi.0 += opts.damping * (ni.0 - xi.0);
            xi.1 += opts.damping * (ni.1 - xi.1);
        }
    }
    Err(diverged(opts.max_iterations, "iteration limit reached".into()))
}

/// Per-inverter loop gains and the fixed-point spectral radius at `at`.
pub fn stability_margin(scenario: &Scenario, at: &SteadyState, opts: &OracleOptions) -> StabilityReport {
    stability_at(scenario, &at.refs(), &at.load, opts)
}

/// Stability evaluated at the configured `(delta0, E0)` of every inverter.
pub fn design_point_stability(scenario: &Scenario, load: &LoadModel, opts: &OracleOptions) -> StabilityReport {
    let at: Vec<(f64, f64)> = scenario
        .inverters
        .iter()
        .map(|i| (i.setpoints.delta0, i.setpoints.e0))
        .collect();
    stability_at(scenario, &at, load, opts)
}

fn stability_at(scenario: &Scenario, refs: &[(f64, f64)], load: &LoadModel, opts: &OracleOptions) -> StabilityReport {
    let n = refs.len();
    let h = opts.fd_step;
    let mut loop_gains = Vec::with_capacity(n);
    for i in 0..n {
        let p_at = |d: f64| {
            let mut r = refs.to_vec();
            r[i].0 += d;
            scenario.solve_network(&r, load).map(|s| s.s_out[i].re)
        };
        let slope = match (p_at(h), p_at(-h)) {
            (Ok(hi), Ok(lo)) => (hi - lo) / (2.0 * h),
            _ => f64::NAN,
        };
        loop_gains.push(scenario.inverters[i].gains.k_pdelta * slope);
    }
    let stable = loop_gains.iter().all(|g| *g < 1.0);
    let (spectral_radius, damped_radius) = match map_eigenvalues(scenario, refs, load, h) {
        Some(eig) => {
            let lambda = opts.damping;
            (
                eig.iter().map(|z| z.norm()).fold(0.0, f64::max),
                eig.iter().map(|z| (z * lambda + (1.0 - lambda)).norm()).fold(0.0, f64::max),
            )
        }
        None => (f64::NAN, f64::NAN),
    };
    StabilityReport {
        loop_gains,
        stable,
        spectral_radius,
        damped_radius,
    }
}

/// Eigenvalues of the finite-difference Jacobian of the undamped map.
fn map_eigenvalues(
    scenario: &Scenario,
    refs: &[(f64, f64)],
    load: &LoadModel,
    h: f64,
) -> Option<Vec<num_complex::Complex64>> {
    let n = refs.len();
    let eval = |r: &[(f64, f64)]| -> Option<Vec<f64>> {
        let (next, _) = droop_map(scenario, r, load).ok()?;
        Some(next.iter().map(|v| v.0).chain(next.iter().map(|v| v.1)).collect())
    };
    let mut jac = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for col in 0..2 * n {
        let (idx, is_mag) = (col % n, col >= n);
        let step = if is_mag { h * refs[idx].1.abs().max(1.0) } else { h };
        let shifted = |s: f64| {
            let mut r = refs.to_vec();
            if is_mag {
                r[idx].1 += s;
            } else {
                r[idx].0 += s;
            }
            r
        };
        let (hi, lo) = (eval(&shifted(step))?, eval(&shifted(-step))?);
        for row in 0..2 * n {
            jac[(row, col)] = (hi[row] - lo[row]) / (2.0 * step);
        }
    }
    Some(jac.complex_eigenvalues().iter().copied().collect())
}

/// Finds `(delta0, E0)` per inverter such that, against the stiff `grid`
/// with the scenario's initial load, each inverter delivers its target
/// `(P0, Q0)` exactly.
pub fn calibrate_setpoints(
    scenario: &Scenario,
    targets: &[(f64, f64)],
    grid: &GridSource,
) -> Result<Vec<(f64, f64)>> {
    const MAX_NEWTON: usize = 50;
    const REL_TOL: f64 = 1e-9;

    let n = scenario.inverters.len();
    if targets.len() != n {
        return Err(Error::invalid("targets", format!("expected {n} targets, got {}", targets.len())));
    }
    let lines: Vec<_> = scenario.inverters.iter().map(|i| i.line).collect();
    let load = scenario.initial_load();
    let residual = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let refs: Vec<(f64, f64)> = (0..n).map(|i| (x[i], x[n + i])).collect();
        let sol = solve_with_grid(&lines, &refs, Some(grid), load)?;
        Ok(DVector::from_fn(2 * n, |r, _| {
            if r < n {
                sol.s_out[r].re - targets[r].0
            } else {
                sol.s_out[r - n].im - targets[r - n].1
            }
        }))
    };
    let within_tol = |f: &DVector<f64>| {
        (0..n).all(|i| {
            let scale = targets[i].0.hypot(targets[i].1).max(1.0);
            f[i].abs() <= REL_TOL * scale && f[n + i].abs() <= REL_TOL * scale
        })
    };

    let e_nom = crate::droop::ll_rms_to_phase_peak(grid.v_ll);
    let mut x = DVector::from_fn(2 * n, |r, _| if r < n { 0.0 } else { e_nom });
    let mut f = residual(&x)?;
    let mut best: Option<(DVector<f64>, f64)> = None;
    for _ in 0..MAX_NEWTON {
        if within_tol(&f) {
            // keep polishing while Newton still reduces the residual, so the
            // calibrated point is an equilibrium to round-off
            let norm = f.amax();
            match &best {
                Some((_, b)) if norm >= *b => break,
                _ => best = Some((x.clone(), norm)),
            }
            if norm == 0.0 {
                break;
            }
        }
        let mut jac = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for col in 0..2 * n {
            let h = if col < n { 1e-6 } else { 1e-6 * x[col].abs().max(1.0) };
            let mut hi = x.clone();
            hi[col] += h;
            let mut lo = x.clone();
            lo[col] -= h;
            let d = (residual(&hi)? - residual(&lo)?) / (2.0 * h);
            jac.set_column(col, &d);
        }
        let step = jac
            .lu()
            .solve(&f)
            .ok_or_else(|| Error::InfeasibleTarget("singular calibration Jacobian".into()))?;
        x -= step;
        if (0..n).any(|i| x[i].abs() >= std::f64::consts::FRAC_PI_2) {
            return Err(Error::InfeasibleTarget(
                "power angle would exceed 90 degrees (beyond maximum transfer)".into(),
            ));
        }
        if (0..n).any(|i| !(x[n + i] > 0.0)) {
            return Err(Error::InfeasibleTarget("EMF magnitude would be non-positive".into()));
        }
        f = residual(&x)?;
    }
    if let Some((xb, _)) = best {
        return Ok((0..n).map(|i| (xb[i], xb[n + i])).collect());
    }
    Err(Error::InfeasibleTarget(format!("Newton did not converge in {MAX_NEWTON} iterations")))
}

/// Resolves calibration: when the scenario asks for it, replaces every
/// inverter's `(delta0, E0)` with calibrated values and clears the flag.
pub fn prepare(scenario: &Scenario) -> Result<Scenario> {
    scenario.validate()?;
    let mut out = scenario.clone();
    if !scenario.calibrate {
        return Ok(out);
    }
    let targets: Vec<(f64, f64)> = scenario
        .inverters
        .iter()
        .map(|i| (i.setpoints.p0, i.setpoints.q0))
        .collect();
    let cal = calibrate_setpoints(scenario, &targets, &scenario.grid)?;
    for (inv, (delta0, e0)) in out.inverters.iter_mut().zip(cal) {
        inv.setpoints.delta0 = delta0;
        inv.setpoints.e0 = e0;
    }
    out.calibrate = false;
    Ok(out)
}

/// Parameters accepted by [`sweep_point`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    KPdelta,
    KQe,
    TauS,
    LineXOhm,
}

impl SweepParam {
    pub const ALL: [SweepParam; 4] = [SweepParam::KPdelta, SweepParam::KQe, SweepParam::TauS, SweepParam::LineXOhm];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::KPdelta => "k_pdelta",
            SweepParam::KQe => "k_qE",
            SweepParam::TauS => "tau_s",
            SweepParam::LineXOhm => "line_x_ohm",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name().eq_ignore_ascii_case(name))
    }

    /// Copy of `scenario` with the parameter set to `value` on every
    /// inverter. Gains stay fixed when the line reactance changes.
    pub fn apply(self, scenario: &Scenario, value: f64) -> Scenario {
        let mut s = scenario.clone();
        match self {
            SweepParam::TauS => s.filter_tau = value,
            _ => {
                for inv in &mut s.inverters {
                    match self {
                        SweepParam::KPdelta => inv.gains.k_pdelta = value,
                        SweepParam::KQe => inv.gains.k_qe = value,
                        SweepParam::LineXOhm => inv.line.x = value,
                        SweepParam::TauS => unreachable!(),
                    }
                }
            }
        }
        s
    }

    /// Copy of `scenario` with the parameter multiplied by `factor`,
    /// keeping any differences between inverters.
    pub fn scale(self, scenario: &Scenario, factor: f64) -> Scenario {
        let mut s = scenario.clone();
        match self {
            SweepParam::TauS => s.filter_tau *= factor,
            _ => {
                for inv in &mut s.inverters {
                    match self {
                        SweepParam::KPdelta => inv.gains.k_pdelta *= factor,
                        SweepParam::KQe => inv.gains.k_qe *= factor,
                        SweepParam::LineXOhm => inv.line.x *= factor,
                        SweepParam::TauS => unreachable!(),
                    }
                }
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub converged: bool,
    pub loop_gain: f64,
    pub spectral_radius: f64,
    /// Present only when the steady state converged.
    pub steady: Option<SteadyState>,
    pub note: Option<String>,
}

/// One sweep grid point: set the parameter, calibrate if requested, solve
/// the steady state under the initial load. Never fails; divergence and
/// infeasibility are recorded in the row.
pub fn sweep_point(scenario: &Scenario, param: SweepParam, value: f64, opts: &OracleOptions) -> SweepRow {
    evaluate_point(&param.apply(scenario, value), value, opts)
}

/// Like [`sweep_point`], with `factor` multiplying the scenario's own value.
pub fn sweep_point_scaled(scenario: &Scenario, param: SweepParam, factor: f64, opts: &OracleOptions) -> SweepRow {
    evaluate_point(&param.scale(scenario, factor), factor, opts)
}

fn evaluate_point(modified: &Scenario, value: f64, opts: &OracleOptions) -> SweepRow {
    let failed = |note: String| SweepRow {
        value,
        converged: false,
        loop_gain: f64::NAN,
        spectral_radius: f64::NAN,
        steady: None,
        note: Some(note),
    };
    let prepared = match prepare(modified) {
        Ok(s) => s,
        Err(e) => return failed(e.to_string()),
    };
    let load = *prepared.initial_load();
    match steady_state_solve(&prepared, &load, opts) {
        Ok(ss) => {
            let report = design_point_stability(&prepared, &load, opts);
            // past the crossing the iteration can still settle, on a
            // different equilibrium than the one the setpoints describe
            let note = (!report.stable).then(|| "settled away from the design operating point".to_string());
            SweepRow {
                value,
                converged: true,
                loop_gain: report.max_loop_gain(),
                spectral_radius: report.spectral_radius,
                steady: Some(ss),
                note,
            }
        }
        Err(Error::Divergence { report, reason, .. }) => SweepRow {
            value,
            converged: false,
            loop_gain: report.max_loop_gain(),
            spectral_radius: report.spectral_radius,
            steady: None,
            note: Some(reason),
        },
        Err(e) => failed(e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::droop::{Mode, Setpoints};
    use approx::assert_relative_eq;

    fn grid_single(p0: f64, q0: f64) -> Scenario {
        let base = Scenario::table1();
        let mut inv = base.inverters[0];
        inv.setpoints = Setpoints::nominal(60.0, 400.0, p0, q0);
        Scenario {
            inverters: vec![inv],
            mode: Mode::GridConnected,
            ..base
        }
    }

    #[test]
    fn unloaded_single_inverter_sits_at_setpoint() {
        let mut s = Scenario::table1();
        s.inverters.truncate(1);
        s.inverters[0].setpoints = Setpoints::nominal(60.0, 400.0, 0.0, 0.0);
        s.calibrate = false;
        let none = LoadModel::new(0.0, 0.0, 400.0).unwrap();
        // with V_meas = V0 restoration is inert; islanded PCC equals the EMF
        let ss = steady_state_solve(&s, &none, &OracleOptions::default()).unwrap();
        let inv = ss.inverters[0];
        assert!(inv.delta.abs() < 1e-12);
        assert_relative_eq!(inv.e, s.nominal_peak(), max_relative = 1e-12);
        assert!(inv.p.abs() < 1e-6 && inv.q.abs() < 1e-6);
    }

    #[test]
    fn fixed_point_resubstitutes() {
        let s = prepare(&Scenario::table1()).unwrap();
        let ss = steady_state_solve(&s, s.initial_load(), &OracleOptions::default()).unwrap();
        let (next, sol) = droop_map(&s, &ss.refs(), &ss.load).unwrap();
        for (a, b) in ss.refs().iter().zip(&next) {
            assert!((a.0 - b.0).abs() < 1e-10);
            assert!((a.1 - b.1).abs() < 1e-10);
        }
        for (inv, out) in ss.inverters.iter().zip(&sol.s_out) {
            assert_relative_eq!(inv.p, out.re, max_relative = 1e-9);
            assert_relative_eq!(inv.q, out.im, max_relative = 1e-9);
        }
    }

    #[test]
    fn symmetric_pair_shares_and_balances() {
        let s = prepare(&Scenario::table1()).unwrap();
        let ss = steady_state_solve(&s, s.initial_load(), &OracleOptions::default()).unwrap();
        let (a, b) = (ss.inverters[0], ss.inverters[1]);
        assert_eq!(a.delta.to_bits(), b.delta.to_bits());
        assert_eq!(a.p.to_bits(), b.p.to_bits());
        // an independent solve at the reported references closes the balance
        let sol = s.solve_network(&ss.refs(), &ss.load).unwrap();
        let losses: f64 = sol.s_loss.iter().map(|l| l.re).sum();
        assert_relative_eq!(a.p + b.p, sol.s_load.re + losses, max_relative = 1e-9);
    }

    #[test]
    fn zero_target_calibrates_to_grid_voltage() {
        let mut s = grid_single(0.0, 0.0);
        s.load_schedule[0].load = LoadModel::new(0.0, 0.0, 400.0).unwrap();
        let cal = calibrate_setpoints(&s, &[(0.0, 0.0)], &s.grid).unwrap();
        assert!(cal[0].0.abs() < 1e-12);
        assert_relative_eq!(cal[0].1, s.nominal_peak(), max_relative = 1e-12);
    }

    #[test]
    fn calibration_round_trip() {
        let s = Scenario::table1();
        let targets = [(5_000.0, 2_500.0), (5_000.0, 2_500.0)];
        let cal = calibrate_setpoints(&s, &targets, &s.grid).unwrap();
        let lines: Vec<_> = s.inverters.iter().map(|i| i.line).collect();
        let sol = solve_with_grid(&lines, &cal, Some(&s.grid), s.initial_load()).unwrap();
        for (out, t) in sol.s_out.iter().zip(&targets) {
            assert_relative_eq!(out.re, t.0, max_relative = 1e-9);
            assert_relative_eq!(out.im, t.1, max_relative = 1e-9);
        }
        assert!(cal[0].0 > 0.0 && cal[0].1 > s.nominal_peak());
    }

    #[test]
    fn infeasible_target_is_rejected() {
        let s = grid_single(1e7, 0.0);
        assert!(matches!(
            calibrate_setpoints(&s, &[(1e7, 0.0)], &s.grid),
            Err(Error::InfeasibleTarget(_))
        ));
    }

    #[test]
    fn default_gains_give_design_loop_gain() {
        let s = prepare(&grid_single(5_000.0, 2_500.0)).unwrap();
        let opts = OracleOptions::default();
        let ss = steady_state_solve(&s, s.initial_load(), &opts).unwrap();
        let report = stability_margin(&s, &ss, &opts);
        let g = report.loop_gains[0];
        assert!((g - 0.3).abs() <= 0.03, "loop gain {g}");
        assert!(report.stable);
    }

    #[test]
    fn loop_gain_linear_in_gain() {
        let s = prepare(&grid_single(5_000.0, 2_500.0)).unwrap();
        let opts = OracleOptions::default();
        let ss = steady_state_solve(&s, s.initial_load(), &opts).unwrap();
        let base = stability_margin(&s, &ss, &opts).loop_gains[0];
        let doubled = SweepParam::KPdelta.apply(&s, 2.0 * s.inverters[0].gains.k_pdelta);
        let g2 = stability_margin(&doubled, &ss, &opts).loop_gains[0];
        assert_relative_eq!(g2, 2.0 * base, max_relative = 1e-6);
        let zero = SweepParam::KPdelta.apply(&s, 0.0);
        let r0 = stability_margin(&zero, &ss, &opts);
        assert_eq!(r0.loop_gains[0], 0.0);
        assert!(r0.stable);
    }

    #[test]
    fn high_gain_diverges_without_damping() {
        let s = prepare(&grid_single(5_000.0, 2_500.0)).unwrap();
        let k = s.inverters[0].gains.k_pdelta * 5.0;
        let hot = SweepParam::KPdelta.apply(&s, k);
        let undamped = OracleOptions {
            damping: 1.0,
            ..OracleOptions::default()
        };
        match steady_state_solve(&hot, hot.initial_load(), &undamped) {
            Err(Error::Divergence { report, .. }) => assert!(report.max_loop_gain() >= 1.0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn load_increase_raises_output() {
        let s = prepare(&Scenario::table1()).unwrap();
        let opts = OracleOptions::default();
        let mut prev = f64::NEG_INFINITY;
        for p in [2e3, 6e3, 10e3, 14e3, 18e3, 22e3] {
            let load = LoadModel::new(p, p / 2.0, 400.0).unwrap();
            let ss = steady_state_solve(&s, &load, &opts).unwrap();
            assert!(ss.inverters[0].p > prev);
            prev = ss.inverters[0].p;
        }
    }

    #[test]
    fn sweep_names_round_trip() {
        for p in SweepParam::ALL {
            assert_eq!(SweepParam::from_name(p.name()), Some(p));
        }
        assert_eq!(SweepParam::from_name("k_bogus"), None);
    }

    #[test]
    fn symmetric_repeller_is_not_a_steady_state() {
        // two identical islanded units: past the differential-mode limit the
        // symmetric start still reaches the symmetric fixed point exactly,
        // which must not be reported as converged
        let s = prepare(&SweepParam::KPdelta.scale(&Scenario::table1(), 4.0)).unwrap();
        let opts = OracleOptions::default();
        match steady_state_solve(&s, s.initial_load(), &opts) {
            Err(Error::Divergence { report, reason, .. }) => {
                assert!(report.damped_radius >= 1.0, "{reason}");
                assert!(report.spectral_radius > 1.0);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
        let ok = prepare(&SweepParam::KPdelta.scale(&Scenario::table1(), 2.0)).unwrap();
        let ss = steady_state_solve(&ok, ok.initial_load(), &opts).unwrap();
        assert!(stability_margin(&ok, &ss, &opts).damped_radius < 1.0);
    }

    #[test]
    fn scale_keeps_per_inverter_ratio() {
        let mut s = Scenario::table1();
        s.inverters[1].gains.k_pdelta *= 2.0;
        let scaled = SweepParam::KPdelta.scale(&s, 3.0);
        assert_eq!(scaled.inverters[0].gains.k_pdelta, 3.0 * s.inverters[0].gains.k_pdelta);
        assert_eq!(scaled.inverters[1].gains.k_pdelta, 3.0 * s.inverters[1].gains.k_pdelta);
        assert_eq!(SweepParam::TauS.scale(&s, 2.0).filter_tau, 0.2);
        let row = sweep_point_scaled(&s, SweepParam::LineXOhm, 1.0, &OracleOptions::default());
        assert!(row.converged);
        assert_eq!(row.value, 1.0);
    }

    #[test]
    fn prepare_clears_flag() {
        let s = prepare(&Scenario::table1()).unwrap();
        assert!(!s.calibrate);
        let again = prepare(&s).unwrap();
        assert_eq!(again, s);
    }
}
