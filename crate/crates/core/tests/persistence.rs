use proptest::prelude::*;
use qel_core::checkpoint::{read_checkpoint, write_checkpoint};
use qel_core::comparison::{integrate, ComparisonMode, ComparisonState};
use qel_core::config::RunConfig;
use qel_core::diagnostics::DiagnosticsRecord;
use qel_core::evolution::EvolutionState;
use qel_core::initial_data::build_initial_fields;
use qel_core::series::{read_series, write_series};

fn record(v: &[f64; 19]) -> DiagnosticsRecord {
    DiagnosticsRecord::from_csv_values(v)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn series_round_trip_is_bit_exact(rows in prop::collection::vec(prop::array::uniform19(-1e6..1e6f64), 1..6)) {
        let records: Vec<_> = rows.iter().map(record).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.csv");
        write_series(&records, &path).unwrap();
        let back = read_series(&path).unwrap();
        prop_assert_eq!(back.len(), records.len());
        for (a, b) in records.iter().zip(&back) {
            for (x, y) in a.csv_values().iter().zip(b.csv_values()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}

#[test]
fn checkpoint_file_round_trip() {
    let mut cfg = RunConfig::default();
    cfg.grid.n_r = 33;
    cfg.grid.n_z = 41;
    let grid = cfg.grid.build(&cfg.data).unwrap();
    let (g, gamma) = build_initial_fields(&cfg.data, &grid).unwrap();
    let mut state = EvolutionState::new(g, gamma, cfg.data.initial_frame().unwrap()).unwrap();
    state.t = 1.25e-3;
    state.frame.t = 1.25e-3;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.qel");
    write_checkpoint(&path, &cfg.data, &state).unwrap();
    let back = read_checkpoint(&path).unwrap();
    assert_eq!(back.params, cfg.data);
    assert_eq!(back.state.t, state.t);
    assert_eq!(back.state.frame, state.frame);
    assert_eq!(back.state.g.values(), state.g.values());
    assert_eq!(back.state.gamma.values(), state.gamma.values());
    assert!(read_checkpoint(&dir.path().join("missing.qel")).is_err());
}

#[test]
fn config_file_layer_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "[data]\nlambda0 = 0.04\n[grid]\nn_r = 129\n").unwrap();
    let mut cfg = RunConfig::load(&path).unwrap();
    assert_eq!(cfg.data.lambda0, 0.04);
    assert_eq!(cfg.grid.n_r, 129);
    assert_eq!(cfg.grid.n_z, RunConfig::default().grid.n_z);
    cfg.set("data.kappa", "0.2").unwrap();
    assert!(cfg.set("kappa", "0.2").is_err());

    let manifest = dir.path().join("manifest.toml");
    cfg.write_manifest(&manifest, "qel evolve").unwrap();
    let text = std::fs::read_to_string(&manifest).unwrap();
    let value: toml::Value = toml::from_str(&text).unwrap();
    assert_eq!(value["command"].as_str(), Some("qel evolve"));
    assert_eq!(value["data"]["kappa"].as_float(), Some(0.2));
    assert!(RunConfig::load(&dir.path().join("absent.toml")).is_err());
}

#[test]
fn blowup_time_is_stable_under_tolerance_refinement() {
    for (state, exact) in [
        (
            ComparisonState::new(1.0, 1.0, 1.0, 1.0).unwrap(),
            std::f64::consts::FRAC_PI_2,
        ),
        (ComparisonState::new(2.0, 3.0, 0.5, 0.2).unwrap(), f64::NAN),
    ] {
        let times: Vec<f64> = [1e-6, 1e-8, 1e-10]
            .iter()
            .map(|&tol| {
                integrate(&state, ComparisonMode::Coupled, 100.0, tol)
                    .unwrap()
                    .blowup_time
                    .unwrap()
            })
            .collect();
        let (d1, d2) = ((times[0] - times[1]).abs(), (times[1] - times[2]).abs());
        assert!(d2 <= d1.max(1e-9), "{times:?}");
        assert!(d2 <= 1e-6 * times[2], "{times:?}");
        if exact.is_finite() {
            assert!((times[2] - exact).abs() <= 1e-6, "{} vs {exact}", times[2]);
        }
    }
}
