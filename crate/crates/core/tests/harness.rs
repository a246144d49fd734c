use risestim::harness::{self, validate, ExperimentConfig, ExperimentKind, Grid, HarnessError, CSV_HEADER};

fn config(kind: ExperimentKind, grid: Grid, trials: usize) -> ExperimentConfig {
    ExperimentConfig::new(kind, grid, trials, 42)
}

#[test]
fn spectral_efficiency_row_count() {
    let grid = Grid {
        n: Some(vec![32]),
        t: Some(vec![150]),
        snr_db: Some(vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]),
        ..Grid::default()
    };
    let records = harness::run(&config(ExperimentKind::SpectralEfficiency, grid, 20)).unwrap();
    assert_eq!(records.len(), 28);
    let schemes: std::collections::BTreeSet<_> = records.iter().map(|r| r.scheme.as_str()).collect();
    assert_eq!(
        schemes.into_iter().collect::<Vec<_>>(),
        ["canonical-equal", "canonical-optimal", "dft-equal", "dft-optimal"]
    );
    assert!(records
        .iter()
        .all(|r| r.std_error >= 0.0 && r.t == Some(150) && r.j == Some(32)));
}

#[test]
fn hadamard_needs_power_of_two() {
    let grid = Grid {
        n: Some(vec![6]),
        families: Some(vec!["hadamard".into()]),
        ..Grid::default()
    };
    let errors = validate(&config(ExperimentKind::NarrowbandMse, grid, 10));
    assert_eq!(errors.len(), 1);
    assert!(errors[0].contains("N must be a power of 2"), "{errors:?}");
}

#[test]
fn training_length_must_exceed_ris_size() {
    let grid = Grid {
        n: Some(vec![150]),
        t: Some(vec![150]),
        ..Grid::default()
    };
    let errors = validate(&config(ExperimentKind::SpectralEfficiency, grid, 10));
    assert!(
        errors.iter().any(|e| e.contains("N=150 must be smaller than T=150")),
        "{errors:?}"
    );
}

#[test]
fn valid_configs_have_no_errors() {
    for kind in ExperimentKind::ALL {
        assert_eq!(
            validate(&config(kind, Grid::default(), 10)),
            Vec::<String>::new(),
            "{kind}"
        );
    }
}

#[test]
fn errors_are_aggregated_and_name_fields() {
    let grid = Grid {
        n_p: Some(vec![3]),
        n_g: Some(vec![3]),
        l: Some(vec![4]),
        q: Some(vec![2]),
        ..Grid::default()
    };
    let mut cfg = config(ExperimentKind::Ofdm, grid, 0);
    let errors = validate(&cfg);
    for field in ["trials", "N_p", "N_g", "Q"] {
        assert!(
            errors.iter().any(|e| e.starts_with(field)),
            "{field} missing from {errors:?}"
        );
    }
    cfg.trials = 5;
    match harness::run(&cfg) {
        Err(HarnessError::Config(list)) => assert_eq!(list.len(), errors.len() - 1),
        other => panic!("expected config error, got {other:?}"),
    }
}

#[test]
fn narrowband_mse_ratio_tracks_ris_size() {
    let grid = Grid {
        n: Some(vec![8]),
        snr_db: Some(vec![10.0]),
        ..Grid::default()
    };
    let records = harness::run(&config(ExperimentKind::NarrowbandMse, grid, 4000)).unwrap();
    let ls = |scheme: &str| {
        records
            .iter()
            .find(|r| r.scheme == scheme && r.metric_name == "ls_mse")
            .unwrap()
            .metric_value
    };
    let ratio = ls("canonical") / ls("dft");
    assert!((ratio / 8.0 - 1.0).abs() <= 0.1, "ratio {ratio}");
}

#[test]
fn thread_count_does_not_change_results() {
    let grid = Grid {
        n: Some(vec![4, 8]),
        snr_db: Some(vec![0.0, 10.0]),
        ..Grid::default()
    };
    let cfg = config(ExperimentKind::NarrowbandMse, grid, 300);
    let pool = |threads| rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let sequential = pool(1).install(|| {
        harness::Experiment::resolve(cfg.experiment.unwrap(), &cfg.grid)
            .unwrap()
            .run(300, 42)
    });
    let parallel = pool(4).install(|| {
        harness::Experiment::resolve(cfg.experiment.unwrap(), &cfg.grid)
            .unwrap()
            .run(300, 42)
    });
    let (a, b) = (sequential.unwrap(), parallel.unwrap());
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x.metric_value - y.metric_value).abs() <= 1e-12 * x.metric_value.abs().max(1.0));
        assert!((x.std_error - y.std_error).abs() <= 1e-12 * x.std_error.abs().max(1.0));
    }
}

#[test]
fn csv_layout() {
    let grid = Grid {
        k: Some(vec![2]),
        m: Some(vec![4]),
        n: Some(vec![4]),
        alpha: Some(vec![2.5]),
        ..Grid::default()
    };
    let cfg = config(ExperimentKind::Multiuser, grid, 5);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/out.csv");
    let records = harness::run_to_file(&cfg, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(lines.clone().count(), records.len());
    let two_timescale = lines.find(|l| l.contains("two-timescale")).unwrap();
    // 2(N+1)/alpha + K*ceil(N/M) + K = 4 + 2 + 2
    assert_eq!(
        two_timescale,
        "multiuser,two-timescale-alpha2.5,10,4,,,overhead,8,0,5,42"
    );
}

#[test]
fn config_file_round_trip() {
    let json = r#"{
        "experiment": "opportunistic",
        "trials": 12,
        "seed": 3,
        "grid": { "Q": [1, 4], "N": [4], "M_t": [2], "measurement_pilots": 2 }
    }"#;
    let cfg = ExperimentConfig::from_json(json).unwrap();
    assert_eq!(cfg.experiment, Some(ExperimentKind::Opportunistic));
    let records = harness::run(&cfg).unwrap();
    assert_eq!(records.iter().map(|r| r.j).collect::<Vec<_>>(), [Some(2), Some(8)]);
    assert!(records.iter().all(|r| r.trials == 12 && r.seed == 3));
}

#[test]
fn unused_parameters_rejected() {
    let grid = Grid {
        alpha: Some(vec![1.0]),
        ..Grid::default()
    };
    let errors = validate(&config(ExperimentKind::Sparse, grid, 1));
    assert_eq!(errors, ["alpha: not a parameter of the sparse experiment"]);
}
