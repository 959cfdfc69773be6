//! Phasor arithmetic and the algebraic solve of a star network.
//!
//! Conventions used throughout the crate:
//!
//! * configured voltages are line-to-line RMS;
//! * phasors are per-phase, line-to-neutral RMS, positive sequence;
//! * powers are three-phase totals (`S = 3·V·conj(I)`), except for the
//!   textbook [`lossless_line_flow`] and [`small_angle_flow`] forms, which are
//!   per-phase.
//!
//! The network is a star: every source reaches the common load bus (PCC)
//! through its own series impedance, and the load is a constant admittance
//! at the PCC.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex RMS quantity (volts or amps), per phase.
pub type Phasor = Complex64;

pub const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Line-to-line RMS magnitude to per-phase (line-to-neutral) RMS magnitude.
pub fn ll_to_phase(v_ll: f64) -> f64 {
    v_ll / SQRT_3
}

/// Per-phase RMS magnitude to line-to-line RMS magnitude.
pub fn phase_to_ll(v_ln: f64) -> f64 {
    v_ln * SQRT_3
}

/// Per-phase peak amplitude to per-phase RMS.
pub fn peak_to_rms(peak: f64) -> f64 {
    peak / std::f64::consts::SQRT_2
}

/// Per-phase RMS to per-phase peak amplitude.
pub fn rms_to_peak(rms: f64) -> f64 {
    rms * std::f64::consts::SQRT_2
}

pub fn phasor_from_polar(magnitude: f64, angle: f64) -> Phasor {
    Complex64::from_polar(magnitude, angle)
}

/// Series R + jX branch between a source and the PCC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineModel {
    /// Series resistance, ohms.
    pub r: f64,
    /// Series reactance, ohms.
    pub x: f64,
}

impl LineModel {
    pub fn new(r: f64, x: f64) -> Result<Self> {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::invalid("line_x_ohm", format!("must be > 0, got {x}")));
        }
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::invalid("line_r_ohm", format!("must be >= 0, got {r}")));
        }
        Ok(Self { r, x })
    }

    pub fn impedance(&self) -> Complex64 {
        Complex64::new(self.r, self.x)
    }
}

/// Constant-impedance load defined by its ratings at a reference voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadModel {
    /// Three-phase active power at `v_ref`, watts.
    pub p_rated: f64,
    /// Three-phase reactive power at `v_ref`, vars.
    pub q_rated: f64,
    /// Line-to-line RMS voltage at which the ratings apply.
    pub v_ref: f64,
}

impl LoadModel {
    pub fn new(p_rated: f64, q_rated: f64, v_ref: f64) -> Result<Self> {
        let load = Self {
            p_rated,
            q_rated,
            v_ref,
        };
        load.validate()?;
        Ok(load)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_ref > 0.0) || !self.v_ref.is_finite() {
            return Err(Error::invalid("v_ref_ll", format!("must be > 0, got {}", self.v_ref)));
        }
        if !(self.p_rated >= 0.0) || !self.p_rated.is_finite() {
            return Err(Error::invalid("p_w", format!("must be >= 0, got {}", self.p_rated)));
        }
        if !self.q_rated.is_finite() {
            return Err(Error::invalid("q_var", "must be finite"));
        }
        Ok(())
    }
}

/// Result of one star-network solve.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSolution {
    /// PCC voltage, per-phase RMS.
    pub v_pcc: Phasor,
    /// Per-source current, source to PCC direction.
    pub currents: Vec<Phasor>,
    /// Three-phase complex power leaving each source terminal.
    pub s_out: Vec<Complex64>,
    /// Three-phase complex power absorbed by each series branch.
    pub s_loss: Vec<Complex64>,
    /// Three-phase complex power absorbed by the load.
    pub s_load: Complex64,
}

impl NetworkSolution {
    /// PCC voltage magnitude, line-to-line RMS.
    pub fn v_pcc_ll(&self) -> f64 {
        phase_to_ll(self.v_pcc.norm())
    }

    /// Largest power-balance mismatch relative to the total apparent power
    /// handled by the sources.
    pub fn balance_residual(&self) -> f64 {
        let supplied: Complex64 = self.s_out.iter().sum();
        let lost: Complex64 = self.s_loss.iter().sum();
        let mismatch = supplied - self.s_load - lost;
        let scale: f64 = self.s_out.iter().map(|s| s.norm()).sum::<f64>() + self.s_load.norm();
        if scale == 0.0 {
            return mismatch.re.abs().max(mismatch.im.abs());
        }
        mismatch.re.abs().max(mismatch.im.abs()) / scale
    }
}

/// Per-phase admittance of a constant-impedance load.
///
/// `Y = (P − jQ) / (3·V_ln²)`, so a balanced source at exactly `v_ref`
/// line-to-line delivers `(P, Q)` into it.
pub fn load_admittance(load: &LoadModel) -> Result<Complex64> {
    if !(load.v_ref > 0.0) || !load.v_ref.is_finite() {
        return Err(Error::invalid("v_ref_ll", format!("must be > 0, got {}", load.v_ref)));
    }
    let v_ln = ll_to_phase(load.v_ref);
    Ok(Complex64::new(load.p_rated, -load.q_rated) / (3.0 * v_ln * v_ln))
}

/// Solves the star network for the PCC voltage, branch currents and powers.
pub fn solve_star_network(
    emfs: &[Phasor],
    lines: &[LineModel],
    load_y: Complex64,
) -> Result<NetworkSolution> {
    if emfs.is_empty() {
        return Err(Error::invalid("emfs", "at least one source is required"));
    }
    if emfs.len() != lines.len() {
        return Err(Error::invalid(
            "lines",
            format!("{} EMFs but {} lines", emfs.len(), lines.len()),
        ));
    }

    let mut injection = Complex64::new(0.0, 0.0);
    let mut total_y = load_y;
    let mut scale = load_y.norm();
    let mut admittances = Vec::with_capacity(lines.len());
    for (emf, line) in emfs.iter().zip(lines) {
        let z = line.impedance();
        if z.norm() == 0.0 {
            return Err(Error::invalid("line", "zero series impedance"));
        }
        let y = z.inv();
        injection += emf * y;
        total_y += y;
        scale += y.norm();
        admittances.push(y);
    }
    if !(total_y.norm() > 1e-12 * scale) {
        return Err(Error::DegenerateNetwork);
    }

    let v_pcc = injection / total_y;
    let currents: Vec<Phasor> = emfs
        .iter()
        .zip(&admittances)
        .map(|(emf, y)| (emf - v_pcc) * y)
        .collect();
    let s_out = emfs
        .iter()
        .zip(&currents)
        .map(|(emf, i)| 3.0 * emf * i.conj())
        .collect();
    let s_loss = currents
        .iter()
        .zip(lines)
        .map(|(i, line)| 3.0 * i.norm_sqr() * line.impedance())
        .collect();
    let s_load = 3.0 * v_pcc.norm_sqr() * load_y.conj();

    Ok(NetworkSolution {
        v_pcc,
        currents,
        s_out,
        s_loss,
        s_load,
    })
}

/// Exact three-phase sending-end power of a lossy line.
pub fn complex_line_flow(v_send: Phasor, v_recv: Phasor, line: &LineModel) -> Result<(f64, f64)> {
    let z = line.impedance();
    if !(z.norm() > 0.0) {
        return Err(Error::invalid("line", "zero series impedance"));
    }
    let s = 3.0 * v_send * ((v_send - v_recv) / z).conj();
    Ok((s.re, s.im))
}

/// Per-phase power injected into a purely inductive line.
///
/// `P = v1·v2·sin(δ)/x`, `Q = v1²/x − v1·v2·cos(δ)/x`.
pub fn lossless_line_flow(v1_mag: f64, v2_mag: f64, delta: f64, x: f64) -> Result<(f64, f64)> {
    if !(x > 0.0) {
        return Err(Error::invalid("x", format!("must be > 0, got {x}")));
    }
    let (sin, cos) = delta.sin_cos();
    let p = v1_mag * v2_mag * sin / x;
    let q = v1_mag * v1_mag / x - v1_mag * v2_mag * cos / x;
    Ok((p, q))
}

/// Small-angle inversion of [`lossless_line_flow`]: returns the angle
/// `δ = x·p/(v1·v2)` and the magnitude drop `v1 − v2 = x·q/v1`.
pub fn small_angle_flow(p: f64, q: f64, v1: f64, v2: f64, x: f64) -> Result<(f64, f64)> {
    if !(x > 0.0) {
        return Err(Error::invalid("x", format!("must be > 0, got {x}")));
    }
    if !(v1 > 0.0) || !(v2 > 0.0) {
        return Err(Error::invalid("v", "voltages must be > 0"));
    }
    Ok((x * p / (v1 * v2), x * q / v1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const V_LN: f64 = 230.940_107_675_850_3;

    fn table1_load() -> LoadModel {
        LoadModel::new(10_000.0, 5_000.0, 400.0).unwrap()
    }

    #[test]
    fn zero_load_has_zero_admittance() {
        let y = load_admittance(&LoadModel::new(0.0, 0.0, 230.0).unwrap()).unwrap();
        assert_eq!(y, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn table1_load_admittance() {
        let y = load_admittance(&table1_load()).unwrap();
        let v_ln2 = (400.0 / SQRT_3).powi(2);
        assert_relative_eq!(y.re, 10_000.0 / (3.0 * v_ln2), max_relative = 1e-15);
        assert_relative_eq!(y.im, -5_000.0 / (3.0 * v_ln2), max_relative = 1e-15);
        // S = 3·V²·conj(Y) at the reference voltage
        let s = 3.0 * v_ln2 * y.conj();
        assert_relative_eq!(s.re, 10_000.0, max_relative = 1e-9);
        assert_relative_eq!(s.im, 5_000.0, max_relative = 1e-9);
    }

    #[test]
    fn load_admittance_rejects_bad_reference() {
        let bad = LoadModel {
            p_rated: 1.0,
            q_rated: 0.0,
            v_ref: 0.0,
        };
        assert!(matches!(load_admittance(&bad), Err(Error::InvalidParameter { .. })));
        let neg = LoadModel { v_ref: -400.0, ..bad };
        assert!(load_admittance(&neg).is_err());
    }

    #[test]
    fn line_model_validation() {
        assert!(LineModel::new(0.5, 2.5).is_ok());
        assert!(LineModel::new(0.0, 2.5).is_ok());
        assert!(LineModel::new(0.5, 0.0).is_err());
        assert!(LineModel::new(-0.1, 2.5).is_err());
    }

    #[test]
    fn open_circuit_single_source() {
        let e = phasor_from_polar(V_LN, 0.3);
        let sol = solve_star_network(&[e], &[LineModel::new(0.5, 2.5).unwrap()], Complex64::new(0.0, 0.0))
            .unwrap();
        assert_relative_eq!(sol.v_pcc.re, e.re, max_relative = 1e-15);
        assert_relative_eq!(sol.v_pcc.im, e.im, max_relative = 1e-15);
        assert!(sol.currents[0].norm() < 1e-12 * V_LN);
        assert!(sol.s_out[0].norm() < 1e-9);
    }

    #[test]
    fn identical_sources_share_exactly() {
        let e = phasor_from_polar(V_LN, 0.0);
        let line = LineModel::new(0.5, 2.5).unwrap();
        let y = load_admittance(&table1_load()).unwrap();
        let sol = solve_star_network(&[e, e], &[line, line], y).unwrap();
        assert_eq!(sol.currents[0], sol.currents[1]);
        assert_eq!(sol.s_out[0], sol.s_out[1]);
    }

    // Golden values from direct evaluation of the closed form with Python's
    // complex arithmetic:
    //   E = 230.94∠0, Z = 0.5 + 2.5j, Y = (10000 − 5000j)/400²
    //   V = 2E/Z / (2/Z + Y); I = (E − V)/Z; S = 3·E·conj(I)
    #[test]
    fn table1_two_source_golden() {
        let e = phasor_from_polar(230.94, 0.0);
        let line = LineModel::new(0.5, 2.5).unwrap();
        let y = load_admittance(&table1_load()).unwrap();
        let sol = solve_star_network(&[e, e], &[line, line], y).unwrap();
        assert_relative_eq!(sol.v_pcc.re, GOLDEN_V_RE, max_relative = 1e-12);
        assert_relative_eq!(sol.v_pcc.im, GOLDEN_V_IM, max_relative = 1e-12);
        assert_relative_eq!(sol.s_out[0].re, GOLDEN_P, max_relative = 1e-12);
        assert_relative_eq!(sol.s_out[0].im, GOLDEN_Q, max_relative = 1e-12);
        assert!(sol.balance_residual() < 1e-12);
    }

    const GOLDEN_V_RE: f64 = 217.996_460_176_991_18;
    const GOLDEN_V_IM: f64 = -14.533_097_345_132_745;
    const GOLDEN_P: f64 = 4_562.434_290_265_484;
    const GOLDEN_Q: f64 = 2_674.530_446_017_691;

    #[test]
    fn degenerate_network_is_reported() {
        // lossless inductive lines resonating with a capacitive load
        let line = LineModel::new(0.0, 1.0).unwrap();
        let y = Complex64::new(0.0, 1.0);
        let e = phasor_from_polar(100.0, 0.0);
        assert!(matches!(
            solve_star_network(&[e], &[line], y),
            Err(Error::DegenerateNetwork)
        ));
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let line = LineModel::new(0.5, 2.5).unwrap();
        assert!(solve_star_network(&[], &[], Complex64::new(0.0, 0.0)).is_err());
        assert!(solve_star_network(&[Complex64::new(1.0, 0.0)], &[line, line], Complex64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn equal_voltages_carry_no_power() {
        let v = phasor_from_polar(V_LN, 0.2);
        let (p, q) = complex_line_flow(v, v, &LineModel::new(0.5, 2.5).unwrap()).unwrap();
        assert_eq!((p, q), (0.0, 0.0));
    }

    #[test]
    fn complex_flow_rejects_zero_impedance() {
        let line = LineModel { r: 0.0, x: 0.0 };
        let v = phasor_from_polar(V_LN, 0.0);
        assert!(complex_line_flow(v, v, &line).is_err());
    }

    #[test]
    fn lossless_flow_special_angles() {
        assert_eq!(lossless_line_flow(230.0, 230.0, 0.0, 2.5).unwrap(), (0.0, 0.0));
        let (p, _) = lossless_line_flow(230.0, 220.0, std::f64::consts::FRAC_PI_2, 2.5).unwrap();
        assert_relative_eq!(p, 230.0 * 220.0 / 2.5, max_relative = 1e-15);
        assert!(lossless_line_flow(230.0, 230.0, 0.1, 0.0).is_err());
        assert!(lossless_line_flow(230.0, 230.0, 0.1, -1.0).is_err());
    }

    // P = 230.94² · sin(0.05) / 2.5, evaluated independently in Python.
    #[test]
    fn lossless_flow_reference_point() {
        let (p, _) = lossless_line_flow(230.94, 230.94, 0.05, 2.5).unwrap();
        assert_relative_eq!(p, GOLDEN_LOSSLESS_P, max_relative = 1e-12);
        let (p3, _) = complex_line_flow(
            phasor_from_polar(230.94, 0.05),
            phasor_from_polar(230.94, 0.0),
            &LineModel::new(0.0, 2.5).unwrap(),
        )
        .unwrap();
        assert_relative_eq!(p3, 3.0 * GOLDEN_LOSSLESS_P, max_relative = 1e-12);
    }

    const GOLDEN_LOSSLESS_P: f64 = 1_066.221_283_522_197_2;

    #[test]
    fn small_angle_trivial_cases() {
        assert_eq!(small_angle_flow(0.0, 100.0, 230.0, 229.0, 2.5).unwrap().0, 0.0);
        assert_eq!(small_angle_flow(100.0, 0.0, 230.0, 229.0, 2.5).unwrap().1, 0.0);
        assert!(small_angle_flow(1.0, 1.0, 0.0, 230.0, 2.5).is_err());
        assert!(small_angle_flow(1.0, 1.0, 230.0, 0.0, 2.5).is_err());
    }

    #[test]
    fn small_angle_matches_arcsin_inversion() {
        let (v1, v2, x) = (230.94, 228.0, 2.5);
        for i in 1..=50 {
            let delta = 0.1 * i as f64 / 50.0;
            let (p, _) = lossless_line_flow(v1, v2, delta, x).unwrap();
            let exact = (p * x / (v1 * v2)).asin();
            let (approx, _) = small_angle_flow(p, 0.0, v1, v2, x).unwrap();
            assert!(((approx - exact) / exact).abs() < 0.01, "delta {delta}");
        }
    }

    proptest! {
        #[test]
        fn polar_round_trip(mag in 1e-3f64..1e4, angle in -3.1f64..3.1) {
            let p = phasor_from_polar(mag, angle);
            let (m2, a2) = p.to_polar();
            prop_assert!(((m2 - mag) / mag).abs() < 1e-12);
            prop_assert!((a2 - angle).abs() < 1e-12);
        }

        #[test]
        fn load_ratings_recovered(p in 0.0f64..1e6, q in -1e6f64..1e6, v in 10.0f64..1e4) {
            let load = LoadModel::new(p, q, v).unwrap();
            let y = load_admittance(&load).unwrap();
            let s = 3.0 * ll_to_phase(v).powi(2) * y.conj();
            let scale = p.abs().max(q.abs()).max(1.0);
            prop_assert!((s.re - p).abs() <= 1e-9 * scale);
            prop_assert!((s.im - q).abs() <= 1e-9 * scale);
        }

        #[test]
        fn kirchhoff_and_power_balance(
            mags in proptest::collection::vec(200.0f64..260.0, 1..5),
            angles in proptest::collection::vec(-0.3f64..0.3, 4),
            rs in proptest::collection::vec(0.0f64..1.0, 4),
            xs in proptest::collection::vec(0.5f64..5.0, 4),
            p_load in 0.0f64..50e3,
            q_load in -20e3f64..30e3,
        ) {
            let n = mags.len();
            let emfs: Vec<_> = (0..n).map(|i| phasor_from_polar(mags[i], angles[i])).collect();
            let lines: Vec<_> = (0..n).map(|i| LineModel::new(rs[i], xs[i]).unwrap()).collect();
            let y = load_admittance(&LoadModel::new(p_load, q_load, 400.0).unwrap()).unwrap();
            let sol = solve_star_network(&emfs, &lines, y).unwrap();
            let i_sum: Complex64 = sol.currents.iter().sum();
            let i_load = sol.v_pcc * y;
            let i_scale = sol.currents.iter().map(|i| i.norm()).sum::<f64>().max(1e-9);
            prop_assert!((i_sum - i_load).re.abs() <= 1e-9 * i_scale);
            prop_assert!((i_sum - i_load).im.abs() <= 1e-9 * i_scale);
            prop_assert!(sol.balance_residual() <= 1e-9);
        }

        #[test]
        fn permutation_symmetry(a in -0.2f64..0.2, b in -0.2f64..0.2, x1 in 1.0f64..4.0, x2 in 1.0f64..4.0) {
            let e1 = phasor_from_polar(231.0, a);
            let e2 = phasor_from_polar(229.0, b);
            let l1 = LineModel::new(0.3, x1).unwrap();
            let l2 = LineModel::new(0.6, x2).unwrap();
            let y = load_admittance(&LoadModel::new(12e3, 4e3, 400.0).unwrap()).unwrap();
            let fwd = solve_star_network(&[e1, e2], &[l1, l2], y).unwrap();
            let rev = solve_star_network(&[e2, e1], &[l2, l1], y).unwrap();
            prop_assert!((fwd.s_out[0] - rev.s_out[1]).norm() <= 1e-9 * fwd.s_out[0].norm().max(1.0));
            prop_assert!((fwd.s_out[1] - rev.s_out[0]).norm() <= 1e-9 * fwd.s_out[1].norm().max(1.0));
            prop_assert!((fwd.v_pcc - rev.v_pcc).norm() <= 1e-12 * fwd.v_pcc.norm());
        }

        #[test]
        fn emf_scaling(k in 0.5f64..2.0, a in -0.2f64..0.2) {
            let emfs = [phasor_from_polar(231.0, a), phasor_from_polar(229.0, 0.0)];
            let lines = [LineModel::new(0.5, 2.5).unwrap(), LineModel::new(0.4, 2.0).unwrap()];
            let y = load_admittance(&LoadModel::new(10e3, 5e3, 400.0).unwrap()).unwrap();
            let base = solve_star_network(&emfs, &lines, y).unwrap();
            let scaled = solve_star_network(&[emfs[0] * k, emfs[1] * k], &lines, y).unwrap();
            prop_assert!((scaled.v_pcc - base.v_pcc * k).norm() <= 1e-12 * scaled.v_pcc.norm());
            for i in 0..2 {
                prop_assert!((scaled.s_out[i] - base.s_out[i] * k * k).norm() <= 1e-9 * scaled.s_out[i].norm().max(1.0));
            }
        }

        #[test]
        fn lossless_reduction(v1 in 200.0f64..260.0, v2 in 200.0f64..260.0, a1 in -0.5f64..0.5, a2 in -0.5f64..0.5, x in 0.5f64..5.0) {
            let (p, q) = complex_line_flow(
                phasor_from_polar(v1, a1),
                phasor_from_polar(v2, a2),
                &LineModel::new(0.0, x).unwrap(),
            ).unwrap();
            let (pl, ql) = lossless_line_flow(v1, v2, a1 - a2, x).unwrap();
            let scale = (3.0 * v1 * v1 / x).max(1.0);
            prop_assert!((p - 3.0 * pl).abs() <= 1e-12 * scale);
            prop_assert!((q - 3.0 * ql).abs() <= 1e-12 * scale);
        }
    }
}
