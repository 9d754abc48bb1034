//! Short-time evolution of `(Γ, G)`: semi-Lagrangian transport with the swirl
//! source, the tracked frame, the monitored run loop, and the flat-model mode
//! hierarchy simulator.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, DiagnosticOptions, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::fields::{d_dz, MeridionalGrid, PacketFrame, ScalarField, VelocityField};
use crate::recovery::{split_exterior_velocity, strain_from_uz, RecoveryResult, RecoverySolver};

/// How the meridional velocity is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VelocityModel {
    /// Recovered from `G` by the 5D elliptic solve every stage.
    Recovered,
    /// Prescribed hyperbolic strain `u^r = σ (r - r_c)`, `u^z = -σ z`.
    LinearStrain { sigma: f64, r_center: f64 },
}

/// Snapshot of the evolving fields and the tracked frame.
#[derive(Debug, Clone)]
pub struct EvolutionState {
    pub t: f64,
    pub g: ScalarField,
    pub gamma: ScalarField,
    pub frame: PacketFrame,
    /// Velocity of the current `G` (cache; `None` until first computed).
    pub velocity: Option<VelocityField>,
}

impl EvolutionState {
    pub fn new(g: ScalarField, gamma: ScalarField, frame: PacketFrame) -> Result<Self> {
        if !Arc::ptr_eq(g.grid_arc(), gamma.grid_arc()) && g.grid() != gamma.grid() {
            return Err(Error::InvalidGrid("G and Γ live on different grids".into()));
        }
        frame.validate()?;
        Ok(Self {
            t: frame.t,
            g,
            gamma,
            frame,
            velocity: None,
        })
    }

    pub fn grid(&self) -> &Arc<MeridionalGrid> {
        self.g.grid_arc()
    }
}

/// Per-step quantities used by the frame update and the run loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub dt: f64,
    /// Strain at the midpoint frame.
    pub sigma_mid: f64,
    /// `u^r(r_*, 0)` at the start and midpoint of the step.
    pub ur_start: f64,
    pub ur_mid: f64,
    /// `dt · max|u| / min(dr, dz)` of the midpoint velocity.
    pub courant: f64,
}

/// Semi-Lagrangian stepper bound to one grid.
pub struct Stepper {
    pub model: VelocityModel,
    pub source: bool,
    pub recovery_tol: f64,
    /// Maximum admissible Courant number.
    pub cfl: f64,
    solver: Option<RecoverySolver>,
}

impl Stepper {
    pub fn new(grid: &Arc<MeridionalGrid>, model: VelocityModel, source: bool, recovery_tol: f64) -> Self {
        let solver = matches!(model, VelocityModel::Recovered).then(|| RecoverySolver::new(grid));
        Self {
            model,
            source,
            recovery_tol,
            cfl: 0.5,
            solver,
        }
    }

    pub fn solver_mut(&mut self) -> Option<&mut RecoverySolver> {
        self.solver.as_mut()
    }

    /// Meridional velocity of `g` as `(u^r, u^z)`, plus the full recovery when solved.
    pub fn velocity(&mut self, g: &ScalarField) -> Result<(ScalarField, ScalarField, Option<RecoveryResult>)> {
        match self.model {
            VelocityModel::Recovered => {
                let solver = self.solver.as_mut().expect("solver for recovered model");
                let rec = solver.solve(g, self.recovery_tol)?;
                Ok((rec.u_r.clone(), rec.u_z.clone(), Some(rec)))
            }
            VelocityModel::LinearStrain { sigma, r_center } => {
                let grid = g.grid_arc();
                let ur = ScalarField::from_fn(grid, |r, _| sigma * (r - r_center));
                let uz = ScalarField::from_fn(grid, |_, z| -sigma * z);
                Ok((ur, uz, None))
            }
        }
    }

    /// Source `r^{-4} ∂_z(Γ²)` on the grid.
    pub fn source_field(gamma: &ScalarField) -> ScalarField {
        let sq = gamma.map(|v| v * v);
        d_dz(&sq).map_nodes(|r, _, v| v / r.powi(4))
    }

    /// One midpoint step: velocity at `t`, half-step transport and source, velocity
    /// at `t + dt/2`, then the full step along midpoint characteristics with the
    /// source evaluated at the half step.
    pub fn step(&mut self, state: &EvolutionState, dt: f64) -> Result<(EvolutionState, StepInfo)> {
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameters(format!("time step {dt}")));
        }
        let grid = state.grid().clone();
        let h = grid.dr.min(grid.dz);
        let (ur0, uz0, _) = self.velocity(&state.g)?;
        let half = 0.5 * dt;
        let source0 = self.source.then(|| Self::source_field(&state.gamma));

        // half step along straight characteristics with the start velocity
        let mut g_half = vec![0.0; grid.len()];
        let mut gam_half = vec![0.0; grid.len()];
        for (i, j, r, z) in grid.nodes() {
            let k = grid.index(i, j);
            let (rd, zd) = (r - half * ur0.at(i, j), z - half * uz0.at(i, j));
            gam_half[k] = state.gamma.sample(rd, zd);
            let mut gv = state.g.sample(rd, zd);
            if let Some(s) = &source0 {
                gv += half * s.sample(rd, zd);
            }
            g_half[k] = gv;
        }
        let g_half = ScalarField::from_values(&grid, g_half)?;
        let gam_half = ScalarField::from_values(&grid, gam_half)?;
        let (ur1, uz1, _) = self.velocity(&g_half)?;
        let umax = ur1
            .values()
            .iter()
            .zip(uz1.values())
            .map(|(a, b)| a.hypot(*b))
            .fold(0.0, f64::max);
        let courant = dt * umax / h;
        if courant > self.cfl {
            return Err(Error::Cfl(courant));
        }
        let source1 = self.source.then(|| Self::source_field(&gam_half));

        let mut g_new = vec![0.0; grid.len()];
        let mut gam_new = vec![0.0; grid.len()];
        for (i, j, r, z) in grid.nodes() {
            let k = grid.index(i, j);
            let (rm, zm) = (r - half * ur1.at(i, j), z - half * uz1.at(i, j));
            let (rd, zd) = (r - dt * ur1.sample(rm, zm), z - dt * uz1.sample(rm, zm));
            gam_new[k] = state.gamma.sample(rd, zd);
            let mut gv = state.g.sample(rd, zd);
            if let Some(s) = &source1 {
                gv += dt * s.sample(rm, zm);
            }
            g_new[k] = gv;
        }
        let g_new = ScalarField::from_values(&grid, g_new)?;
        let gam_new = ScalarField::from_values(&grid, gam_new)?;

        let ur_start = ur0.sample(state.frame.r_star, 0.0);
        let r_mid = state.frame.r_star + half * ur_start;
        let mid_frame = PacketFrame {
            r_star: r_mid,
            lambda: state.frame.lambda,
            t: state.t + half,
        };
        let ur_mid = ur1.sample(r_mid, 0.0);
        let sigma_mid = strain_from_uz(&uz1, &mid_frame)?;
        let info = StepInfo {
            dt,
            sigma_mid,
            ur_start,
            ur_mid,
            courant,
        };
        let frame = advance_frame(&state.frame, &info)?;
        let next = EvolutionState {
            t: state.t + dt,
            g: g_new,
            gamma: gam_new,
            frame,
            velocity: None,
        };
        Ok((next, info))
    }
}

/// `r_* += dt · u^r(r_*^{n+1/2}, 0)` and `λ *= exp(-σ dt)`.
pub fn advance_frame(frame: &PacketFrame, info: &StepInfo) -> Result<PacketFrame> {
    let next = PacketFrame {
        r_star: frame.r_star + info.dt * info.ur_mid,
        lambda: frame.lambda * (-info.sigma_mid * info.dt).exp(),
        t: frame.t + info.dt,
    };
    next.validate()?;
    Ok(next)
}

/// Stopping and cadence controls of a monitored run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub t_final: f64,
    /// Largest time step; the run also respects the CFL and strain limits.
    pub dt: f64,
    /// Smallest time step before the run halts.
    pub dt_min: f64,
    pub record_interval: f64,
    pub e_cap: f64,
    pub cfl: f64,
    /// Upper bound on `|σ| dt`.
    pub max_sigma_dt: f64,
    /// Halt once `∫|σ| dt` reaches this value (`0` disables).
    pub strain_horizon: f64,
    /// Near/far split radius for `η_ext` in units of `λ` (`0` disables).
    pub split_radius: f64,
    pub source: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            t_final: 2e-3,
            dt: 5e-5,
            dt_min: 1e-10,
            record_interval: 5e-5,
            e_cap: 1.0,
            cfl: 0.5,
            max_sigma_dt: 0.1,
            strain_horizon: 0.5,
            split_radius: 4.0,
            source: true,
        }
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum HaltReason {
    FinalTime,
    StrainHorizon,
    ErrorCap { component: &'static str },
    FrameInvalid(String),
    CflFloor,
    NonFinite,
}

impl std::fmt::Display for HaltReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HaltReason::FinalTime => write!(f, "final time reached"),
            HaltReason::StrainHorizon => write!(f, "strain horizon reached"),
            HaltReason::ErrorCap { component } => {
                write!(f, "master error above cap (first exit: {component})")
            }
            HaltReason::FrameInvalid(m) => write!(f, "frame invalid: {m}"),
            HaltReason::CflFloor => write!(f, "time step fell below the floor"),
            HaltReason::NonFinite => write!(f, "non-finite diagnostics"),
        }
    }
}

/// Records and final state of a run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<DiagnosticsRecord>,
    pub halt: HaltReason,
    pub final_state: EvolutionState,
    pub steps: usize,
    /// `∫ |σ| dt` accumulated over the run.
    pub strain_time: f64,
    /// `∫ σ dt` (signed), for the frame-scale identity.
    pub sigma_integral: f64,
}

/// Component of `E` responsible for a cap exit: the first one that exceeds the
/// cap on its own, otherwise the largest.
pub fn first_exit_component(rec: &DiagnosticsRecord, cap: f64) -> &'static str {
    let comps = rec.error_components();
    if let Some((name, _)) = comps.iter().find(|(_, v)| v.is_nan() || *v > cap) {
        return name;
    }
    comps
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|c| c.0)
        .unwrap_or("E")
}

fn record_of(
    stepper: &mut Stepper,
    state: &EvolutionState,
    settings: &RunSettings,
    opts: &DiagnosticOptions,
) -> Result<DiagnosticsRecord> {
    let (_, _, rec) = stepper.velocity(&state.g)?;
    let rec = match rec {
        Some(r) => r,
        None => {
            let (u_r, u_z, _) = stepper.velocity(&state.g)?;
            RecoveryResult {
                phi: ScalarField::zeros(state.grid()),
                div_residual_max: crate::recovery::divergence_residual(&u_r, &u_z),
                u_r,
                u_z,
                residual: 0.0,
                iterations: 0,
            }
        }
    };
    let far = if settings.split_radius > 0.0 {
        match stepper.solver_mut() {
            Some(solver) => {
                let r0 = settings.split_radius * state.frame.lambda;
                Some(split_exterior_velocity(solver, &state.g, &state.frame, r0, opts.recovery_tol)?.1)
            }
            None => None,
        }
    } else {
        None
    };
    diagnostics::assemble_record(&state.g, &state.gamma, &rec, far.as_ref(), &state.frame, opts)
}

/// Evolve with adaptive steps, recording every `record_interval`, until one of the
/// halt criteria fires.
pub fn run(
    initial: EvolutionState,
    model: VelocityModel,
    settings: &RunSettings,
    opts: &DiagnosticOptions,
) -> Result<RunOutput> {
    if !(settings.t_final >= 0.0 && settings.dt > 0.0 && settings.record_interval > 0.0) {
        return Err(Error::InvalidParameters(
            "t_final, dt and record_interval must be positive".into(),
        ));
    }
    let grid = initial.grid().clone();
    let h = grid.dr.min(grid.dz);
    let mut stepper = Stepper::new(&grid, model, settings.source, opts.recovery_tol);
    stepper.cfl = settings.cfl;
    let t0 = initial.t;
    let mut state = initial;
    let mut records = Vec::new();
    let mut steps = 0;
    let mut strain_time = 0.0;
    let mut sigma_integral = 0.0;
    let mut next_record = 1usize;
    let mut dt_next = settings.dt;

    let halt = loop {
        let rec = record_of(&mut stepper, &state, settings, opts)?;
        records.push(rec);
        if !(rec.q.is_finite() && rec.sigma.is_finite() && rec.e.is_finite() || rec.e == f64::INFINITY) {
            break HaltReason::NonFinite;
        }
        if rec.e > settings.e_cap {
            break HaltReason::ErrorCap {
                component: first_exit_component(&rec, settings.e_cap),
            };
        }
        if settings.strain_horizon > 0.0 && strain_time >= settings.strain_horizon * (1.0 - 1e-12) {
            break HaltReason::StrainHorizon;
        }
        if state.t >= t0 + settings.t_final - 1e-12 * settings.t_final.max(1.0) {
            break HaltReason::FinalTime;
        }
        let t_rec = (t0 + next_record as f64 * settings.record_interval).min(t0 + settings.t_final);
        // advance to the next record time
        let mut frame_error = None;
        let mut floor = false;
        while state.t < t_rec - 1e-13 * t_rec.abs().max(1.0) {
            let (u_r, u_z, _) = stepper.velocity(&state.g)?;
            let umax = u_r
                .values()
                .iter()
                .zip(u_z.values())
                .map(|(a, b)| a.hypot(*b))
                .fold(0.0, f64::max);
            let sigma_now = strain_from_uz(&u_z, &state.frame).unwrap_or(0.0).abs();
            let mut dt = dt_next.min(settings.dt).min(t_rec - state.t);
            if umax > 0.0 {
                dt = dt.min(0.9 * settings.cfl * h / umax);
            }
            if sigma_now > 0.0 {
                dt = dt.min(settings.max_sigma_dt / sigma_now);
            }
            if settings.strain_horizon > 0.0 && sigma_now > 0.0 {
                let remaining = settings.strain_horizon - strain_time;
                if remaining > 0.0 {
                    dt = dt.min(remaining / sigma_now * 1.0000001);
                }
            }
            let outcome = loop {
                if dt < settings.dt_min {
                    break None;
                }
                match stepper.step(&state, dt) {
                    Ok(out) if out.1.sigma_mid.abs() * dt <= settings.max_sigma_dt * 1.5 => break Some(out),
                    Ok(_) | Err(Error::Cfl(_)) => dt *= 0.5,
                    Err(Error::InvalidFrame(m)) => {
                        frame_error = Some(m);
                        break None;
                    }
                    Err(e) => return Err(e),
                }
            };
            let Some((next, info)) = outcome else {
                floor = frame_error.is_none();
                break;
            };
            strain_time += info.sigma_mid.abs() * info.dt;
            sigma_integral += info.sigma_mid * info.dt;
            steps += 1;
            state = next;
            dt_next = (2.0 * dt).min(settings.dt);
            if settings.strain_horizon > 0.0 && strain_time >= settings.strain_horizon * (1.0 - 1e-12) {
                break;
            }
        }
        if let Some(m) = frame_error {
            break HaltReason::FrameInvalid(m);
        }
        if floor {
            break HaltReason::CflFloor;
        }
        if state.t >= t_rec - 1e-13 * t_rec.abs().max(1.0) {
            next_record += 1;
        }
    };
    Ok(RunOutput {
        records,
        halt,
        final_state: state,
        steps,
        strain_time,
        sigma_integral,
    })
}

/// One coefficient `c_pq` of the flat-model jet hierarchy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub p: i32,
    pub q: i32,
    pub c: f64,
}

/// Mode coefficients, scale and strain of the flat hyperbolic model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeState {
    pub t: f64,
    pub lambda: f64,
    pub modes: Vec<Mode>,
}

impl ModeState {
    /// Active mode `(1,2)` with coefficient `b`, the neutral tower `(1,4)`, `(1,6)`
    /// and damped samples `(2,2)`, `(3,2)` with coefficients chosen so that every
    /// scale-weighted ratio starts at `ratio0`.
    pub fn standard(lambda: f64, b: f64, ratio0: f64) -> Self {
        let mut modes = vec![Mode { p: 1, q: 2, c: b }];
        for (p, q) in [(1, 4), (1, 6), (2, 2), (3, 2)] {
            let c = ratio0 * b * lambda.powi(3) / lambda.powi(p + q);
            modes.push(Mode { p, q, c });
        }
        Self { t: 0.0, lambda, modes }
    }

    pub fn active(&self) -> f64 {
        self.modes
            .iter()
            .find(|m| m.p == 1 && m.q == 2)
            .map(|m| m.c)
            .expect("active mode present")
    }

    /// `R_pq = |c_pq| λ^{p+q} / (|b| λ³)`.
    pub fn ratio(&self, p: i32, q: i32) -> Option<f64> {
        let b = self.active().abs();
        self.modes
            .iter()
            .find(|m| m.p == p && m.q == q)
            .map(|m| m.c.abs() * self.lambda.powi(p + q) / (b * self.lambda.powi(3)))
    }
}

/// Integrate `c_pq' = (q - p) σ c_pq` and `λ' = -σ λ` for a prescribed `σ(t)`.
///
/// The equations are linear in `log|c|` and `log λ`, so each step integrates
/// `σ` by Simpson's rule and exponentiates; for frozen `σ` this is exact.
pub fn mode_simulate(m0: &ModeState, t_end: f64, dt: f64, sigma: impl Fn(f64) -> f64) -> Result<Vec<ModeState>> {
    if !(dt > 0.0 && t_end >= 0.0) {
        return Err(Error::InvalidParameters("dt must be positive and T nonnegative".into()));
    }
    if m0.modes.iter().all(|m| !(m.p == 1 && m.q == 2)) {
        return Err(Error::InvalidParameters("mode set must contain (1,2)".into()));
    }
    let n = (t_end / dt).ceil() as usize;
    let mut out = Vec::with_capacity(n + 1);
    let mut cur = m0.clone();
    out.push(cur.clone());
    for k in 0..n {
        let t = m0.t + k as f64 * dt;
        let h = dt.min(m0.t + t_end - t);
        let (s0, s1, s2) = (sigma(t), sigma(t + 0.5 * h), sigma(t + h));
        if [s0, s1, s2].iter().any(|s| s.abs() * h > 0.1) {
            return Err(Error::InvalidParameters(format!("sigma * dt exceeds 0.1 at t = {t}")));
        }
        let integral = h * (s0 + 4.0 * s1 + s2) / 6.0;
        for m in &mut cur.modes {
            m.c *= ((m.q - m.p) as f64 * integral).exp();
        }
        cur.lambda *= (-integral).exp();
        cur.t = t + h;
        out.push(cur.clone());
    }
    Ok(out)
}
