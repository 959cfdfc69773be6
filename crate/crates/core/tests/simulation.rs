use droopsim::oracle::{prepare, steady_state_solve};
use droopsim::simulator::{run, run_from};
use droopsim::{LoadEvent, OracleOptions, Scenario, SimState};

fn constant_load(t_end: f64, dt: f64) -> Scenario {
    let base = Scenario::table1();
    Scenario {
        load_schedule: vec![LoadEvent {
            t_start: 0.0,
            load: base.load_schedule[1].load,
        }],
        t_end,
        dt,
        ..base
    }
}

#[test]
fn identical_units_share_at_every_step() {
    let ts = run(&Scenario::table1()).unwrap();
    for row in &ts.rows {
        let (a, b) = (row.inverters[0].p_out, row.inverters[1].p_out);
        assert!((a - b).abs() < 1e-9 * (a + b), "t = {}: {a} vs {b}", row.t);
    }
}

#[test]
fn runs_are_bitwise_repeatable() {
    let s = Scenario::table1();
    assert_eq!(run(&s).unwrap(), run(&s).unwrap());
}

#[test]
fn per_step_change_dies_out_under_constant_load() {
    let s = prepare(&constant_load(4.0, 1e-3)).unwrap();
    let (_, fin) = run_from(&s, SimState::initial(&s)).unwrap();
    let next = droopsim::simulator::step(&fin, &s).unwrap();
    for (a, b) in fin.controllers.iter().zip(&next.controllers) {
        assert!((a.delta_ref - b.delta_ref).abs() < 1e-12);
        assert!((a.e_ref - b.e_ref).abs() < 1e-9 * a.e_ref);
        assert!((a.p_filt - b.p_filt).abs() < 1e-9 * a.p_filt.abs());
    }
}

#[test]
fn halving_dt_keeps_the_steady_state() {
    let coarse = run(&constant_load(4.0, 1e-3)).unwrap();
    let fine = run(&constant_load(4.0, 5e-4)).unwrap();
    let (c, f) = (coarse.last().unwrap(), fine.last().unwrap());
    for (a, b) in c.inverters.iter().zip(&f.inverters) {
        assert!((a.p_out - b.p_out).abs() < 1e-3 * b.p_out.abs());
        assert!((a.q_out - b.q_out).abs() < 1e-3 * b.q_out.abs());
        assert!((a.e_ref - b.e_ref).abs() < 1e-3 * b.e_ref);
    }
    assert!((c.v_pcc_ll - f.v_pcc_ll).abs() < 1e-3 * f.v_pcc_ll);
}

#[test]
fn twenty_time_constants_after_the_last_event_match_the_oracle() {
    let base = Scenario::table1();
    let s = prepare(&Scenario {
        t_end: 2.0 + 20.0 * base.filter_tau,
        ..base
    })
    .unwrap();
    let (ts, fin) = run_from(&s, SimState::initial(&s)).unwrap();
    let ss = steady_state_solve(&s, &s.load_schedule[2].load, &OracleOptions::default()).unwrap();
    let last = ts.last().unwrap();
    for (i, o) in ss.inverters.iter().enumerate() {
        let c = &fin.controllers[i];
        assert!((c.delta_ref - o.delta).abs() <= 1e-6 * o.delta.abs());
        assert!((c.e_ref - o.e).abs() <= 1e-6 * o.e);
        assert!((last.inverters[i].p_out - o.p).abs() <= 1e-6 * o.p.abs());
        assert!((last.inverters[i].q_out - o.q).abs() <= 1e-6 * o.q.abs());
    }
}

#[test]
fn bundled_file_round_trips_through_the_printer() {
    let s = droopsim::format::parse_scenario_str(droopsim::format::TABLE1_SCENARIO, "table1").unwrap();
    let printed = droopsim::format::print_scenario(&s);
    assert_eq!(droopsim::format::parse_scenario_str(&printed, "printed").unwrap(), s);
}
