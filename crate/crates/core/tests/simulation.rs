use gfm_core::config::{Config, BUILTIN_SCENARIOS};
use gfm_core::model::{table1, ControllerKind, GridSource, LoadProfile};
use gfm_core::sim::{assemble, simulate, simulate_partial, summarize, GridImpedance, Inverter, Scenario};

#[test]
fn every_builtin_scenario_runs_to_completion() {
    for name in BUILTIN_SCENARIOS {
        let cfg = Config::builtin(name).unwrap();
        let ts = simulate(&cfg.build().unwrap(), &cfg.simulation()).unwrap();
        let s = summarize(&ts, cfg.omega_0());
        assert!(ts.max_kcl_residual < 1e-9, "{name}: {}", ts.max_kcl_residual);
        assert_eq!(s.plateaus.len(), s.events.len() + 1, "{name}");
        assert!((ts.t[ts.len() - 1] - cfg.scenario.duration).abs() < 1e-9, "{name}");
    }
}

#[test]
fn identical_grid_tied_inverters_share_equally() {
    let cfg = Config::builtin("s5-grid-disconnect").unwrap();
    let ts = simulate(&cfg.build().unwrap(), &cfg.simulation()).unwrap();
    let s = summarize(&ts, cfg.omega_0());
    for p in &s.plateaus {
        let err = p.sharing_error.unwrap();
        assert!(err < 0.01, "sharing error {err} before t = {}", p.t_end);
    }
    // Grid-tied, the pair delivers its references; islanded, it feeds the load alone.
    assert!((s.plateaus[0].p[0] - 1000.0).abs() < 30.0, "{:?}", s.plateaus[0].p);
    assert!(s.plateaus[1].p[0] < 600.0, "{:?}", s.plateaus[1].p);
}

#[test]
fn breaker_opening_keeps_waveforms_continuous() {
    let cfg = Config::builtin("s5-grid-disconnect").unwrap();
    let ts = simulate(&cfg.build().unwrap(), &cfg.simulation()).unwrap();
    let k = ts.index_at(2.0);
    let ch = &ts.inverters[0];
    let jump = (ch.v_alpha[k + 1] - ch.v_alpha[k - 1]).abs();
    let swing = ch.v_p[k];
    assert!(jump < 0.2 * swing, "voltage jump {jump} V at the breaker event");
    assert!(ts.i_g[ts.len() - 1].abs() < 1e-9);
}

#[test]
fn single_inverter_tracks_its_reference() {
    for kind in [ControllerKind::Eaho, ControllerKind::Droop] {
        let sp = table1::setpoints().with_power(1200.0, 0.0);
        let c = table1::circuit();
        let sys = assemble(
            vec![Inverter::new(table1::params(kind), sp, &c)],
            LoadProfile::open(),
            Some(GridSource::nominal(&sp)),
            GridImpedance::from(&c),
        )
        .unwrap();
        let (ts, err) = simulate_partial(&sys, &Scenario::new(1.5)).unwrap();
        assert!(err.is_none());
        let p = summarize(&ts, table1::omega_0()).last().unwrap().p[0];
        assert!((p - 1200.0).abs() < 24.0, "{kind}: {p}");
    }
}
