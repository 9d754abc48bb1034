use std::sync::Arc;

use qel_core::config::RunConfig;
use qel_core::diagnostics::DiagnosticOptions;
use qel_core::evolution::{run, EvolutionState, HaltReason, RunSettings, VelocityModel};
use qel_core::fields::{MeridionalGrid, PacketFrame, ScalarField};
use qel_core::initial_data::build_initial_fields;

fn datum(n: usize) -> (RunConfig, EvolutionState) {
    let mut cfg = RunConfig::default();
    cfg.grid.n_r = n;
    cfg.grid.n_z = n;
    let grid = cfg.grid.build(&cfg.data).unwrap();
    let (g, gamma) = build_initial_fields(&cfg.data, &grid).unwrap();
    let state = EvolutionState::new(g, gamma, cfg.data.initial_frame().unwrap()).unwrap();
    (cfg, state)
}

fn short(t_final: f64) -> RunSettings {
    RunSettings {
        t_final,
        ..Default::default()
    }
}

#[test]
fn zero_vorticity_and_swirl_stay_zero() {
    let grid = Arc::new(MeridionalGrid::centered(1.0, 0.3, 0.3, 49, 49).unwrap());
    let frame = PacketFrame::new(1.0, 0.05, 0.0).unwrap();
    let state = EvolutionState::new(ScalarField::zeros(&grid), ScalarField::zeros(&grid), frame).unwrap();
    let out = run(
        state,
        VelocityModel::Recovered,
        &short(2e-4),
        &DiagnosticOptions::default(),
    )
    .unwrap();
    assert!(matches!(out.halt, HaltReason::FinalTime), "{}", out.halt);
    assert!(out.records.len() > 1);
    for r in &out.records {
        assert_eq!(r.q, 0.0);
        assert_eq!(r.c, 0.0);
        assert_eq!(r.sigma, 0.0);
        assert_eq!(r.lambda, 0.05);
        assert_eq!(r.r_star, 1.0);
    }
    assert_eq!(out.final_state.g.max_abs(), 0.0);
    assert_eq!(out.final_state.gamma.max_abs(), 0.0);
}

#[test]
fn frame_scale_matches_strain_integral() {
    let (cfg, state) = datum(129);
    let lambda0 = state.frame.lambda;
    let out = run(state, VelocityModel::Recovered, &short(4e-4), &cfg.diagnostics).unwrap();
    let lambda = out.final_state.frame.lambda;
    let expected = lambda0 * (-out.sigma_integral).exp();
    assert!((lambda - expected).abs() <= 1e-12 * lambda0, "{lambda} vs {expected}");
    assert!((out.strain_time - out.sigma_integral.abs()).abs() <= 1e-15 + 1e-9 * out.strain_time);
    let last = out.records.last().unwrap();
    assert_eq!(last.lambda, lambda);
    assert_eq!(last.r_star, out.final_state.frame.r_star);
}

#[test]
fn swirl_obeys_a_discrete_maximum_principle() {
    let (cfg, state) = datum(129);
    let (lo, hi) = (state.gamma.min(), state.gamma.max());
    let out = run(state, VelocityModel::Recovered, &short(4e-4), &cfg.diagnostics).unwrap();
    // cubic interpolation may overshoot slightly at the support edge
    let slack = 1e-6 * (hi - lo);
    assert!(out.final_state.gamma.max() <= hi + slack);
    assert!(out.final_state.gamma.min() >= lo - slack);
}

#[test]
fn refinement_changes_the_score_little() {
    let q_at = |n: usize| {
        let (cfg, state) = datum(n);
        let out = run(state, VelocityModel::Recovered, &short(3e-4), &cfg.diagnostics).unwrap();
        let last = *out.records.last().unwrap();
        assert!(matches!(out.halt, HaltReason::FinalTime), "{}", out.halt);
        (last.q, last.sigma)
    };
    let (q1, s1) = q_at(129);
    let (q2, s2) = q_at(193);
    assert!((q1 - q2).abs() <= 1e-3 * q2, "Q {q1} vs {q2}");
    assert!((s1 - s2).abs() <= 1e-2 * s2.abs(), "sigma {s1} vs {s2}");
}

#[test]
fn invalid_settings_are_rejected() {
    let (cfg, state) = datum(65);
    let bad = RunSettings {
        dt: -1.0,
        ..Default::default()
    };
    assert!(run(state, VelocityModel::Recovered, &bad, &cfg.diagnostics).is_err());
}
