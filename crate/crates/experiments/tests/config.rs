use mmia::SystemParams;
use mmia_experiments::config::*;
use mmia_experiments::presets::FIG6_DRAWN_GRID;

#[test]
fn empty_config_is_table1_custom() {
    let spec = parse_config("").unwrap();
    assert_eq!(spec.preset, Preset::Custom);
    assert_eq!(spec.params, SystemParams::table1());
    let commented = parse_config("# nothing here\n\n   # or here\n").unwrap();
    assert_eq!(commented, spec);
}

#[test]
fn decibel_keys_convert() {
    let spec = parse_config("[system]\nsinr_threshold_db = 0\np_bs_control_dbm = 30\n").unwrap();
    assert_eq!(spec.params.sinr_threshold, 1.0);
    assert!((spec.params.p_bs_control - 1.0).abs() < 1e-12);
}

#[test]
fn invalid_value_names_key_and_line() {
    let err = parse_config("[experiment]\ntrials = 10\n\n[system]\nn_bs = 0\n").unwrap_err();
    assert_eq!(err.key, "n_bs");
    assert_eq!(err.line, 5);
    let msg = err.to_string();
    assert!(msg.contains("n_bs") && msg.contains('5'), "{msg}");

    let err = parse_config("[system]\nsinr_threshold_db = nan\n").unwrap_err();
    assert_eq!((err.line, err.key.as_str()), (2, "sinr_threshold_db"));
}

#[test]
fn unknown_keys_and_sections_are_errors() {
    let err = parse_config("[system]\nlambda = 1e-4\n").unwrap_err();
    assert_eq!((err.line, err.key.as_str()), (2, "lambda"));
    let err = parse_config("\n[sytem]\n").unwrap_err();
    assert_eq!(err.line, 2);
    let err = parse_config("[system]\nbeta = 0.01\nbeta = 0.02\n").unwrap_err();
    assert_eq!(err.line, 3);
}

#[test]
fn sweep_value_forms_are_exclusive() {
    let err = parse_config("[sweep]\nparameter = beta\nvalues = 0, 0.01\nrange = 0, 0.1, 0.01\n").unwrap_err();
    assert_eq!(err.line, 4);
    let spec = parse_config("[sweep]\nparameter = beta\nrange = 0, 0.1, 0.005\n").unwrap();
    assert_eq!(spec.sweep.values.len(), 21);
    assert!((spec.sweep.values[20] - 0.1).abs() < 1e-12);
    let spec = parse_config("[sweep]\nparameter = lambda_bs\nlog_range = 1e-5, 1e-3, 3\n").unwrap();
    let v = &spec.sweep.values;
    assert!((v[0] - 1e-5).abs() < 1e-18 && (v[1] - 1e-4).abs() < 1e-16 && (v[2] - 1e-3).abs() < 1e-15);
}

#[test]
fn every_preset_round_trips() {
    for preset in Preset::ALL {
        let spec = ExperimentSpec::for_preset(preset);
        let text = emit_config(&spec);
        let back = parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}\n{text}", preset.name()));
        assert_eq!(back, spec, "{}", preset.name());
    }
}

#[test]
fn preset_grids() {
    let fig2 = ExperimentSpec::for_preset(Preset::Fig2);
    assert_eq!(fig2.sweep.param, Param::LambdaBs);
    assert_eq!(fig2.sweep.len(), 21);
    assert!((fig2.sweep.values[0] - 1e-5).abs() < 1e-18);
    assert!((fig2.sweep.values[20] - 1e-3).abs() < 1e-15);

    let fig4 = ExperimentSpec::for_preset(Preset::Fig4);
    assert_eq!(fig4.sweep.param, Param::Beta);
    assert_eq!(fig4.sweep.len(), 21);
    assert_eq!(fig4.series.as_ref().unwrap().beams, vec![(12, 4), (3, 4), (1, 1)]);

    let fig5 = ExperimentSpec::for_preset(Preset::Fig5);
    assert_eq!(fig5.sweep.values, (1..=60).map(f64::from).collect::<Vec<_>>());

    let fig6 = ExperimentSpec::for_preset(Preset::Fig6);
    assert_eq!(fig6.kind, Kind::Optimize);
    assert_eq!(fig6.sweep.len(), 50);
    assert_eq!(fig6.series.as_ref().unwrap().values, vec![1e-4, 2e-4, 5e-4, 1e-3]);
    assert!(FIG6_DRAWN_GRID.iter().all(|n| (1..=50).contains(n)));
    assert!(FIG6_DRAWN_GRID.windows(2).all(|w| w[0] < w[1]));

    let fig7 = ExperimentSpec::for_preset(Preset::Fig7);
    assert_eq!(fig7.kind, Kind::TotalLatency);
    assert_eq!(fig7.sweep.len(), 7);
    assert_eq!(fig7.series.as_ref().unwrap().values, vec![1e-4, 1e-3]);
}

#[test]
fn beam_axis_sets_array_sizes() {
    let axis = Axis::beams(vec![(3, 4)]);
    let mut p = SystemParams::table1();
    axis.apply(0, &mut p);
    assert_eq!((p.n_bs, p.n_ue, p.m_bs, p.m_ue), (3, 4, 3, 4));
    assert!(p.validate().is_ok());
}
