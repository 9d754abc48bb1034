use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use qel_core::checkpoint::{read_checkpoint, write_checkpoint};
use qel_core::comparison::{fit_constants, integrate, ComparisonMode, ComparisonState};
use qel_core::config::RunConfig;
use qel_core::evolution::{run, EvolutionState, HaltReason, VelocityModel};
use qel_core::initial_data::{build_initial_fields, self_entry_check, SelfEntryReport};
use qel_core::kernel_lab::{
    parity_table, score_constant, score_constant_monte_carlo, tangential_constant, TANGENTIAL_CLOSED_FORM,
};
use qel_core::recovery::RecoverySolver;
use qel_core::series::{read_series, write_series};

use crate::Outcome;

pub fn output_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}

pub fn verify_kernel(cfg: &RunConfig) -> Result<Outcome> {
    let tol = cfg.kernel.quad_tol;
    let tan = tangential_constant(tol)?;
    let tan_ok = tan.relative_error() < 1e-10;
    println!(
        "C_tan = {:.15} (closed form 8pi/15 = {:.15}, rel. error {:.2e}) {}",
        tan.value,
        TANGENTIAL_CLOSED_FORM,
        tan.relative_error(),
        verdict(tan_ok)
    );

    let cq = score_constant(1.0, tol)?;
    let cq_small = score_constant(cfg.data.lambda0, tol)?;
    let drift = (cq - cq_small).abs() / cq;
    let (mc, se) = score_constant_monte_carlo(cfg.kernel.monte_carlo_samples, cfg.kernel.seed);
    let mc_ok = (mc - cq).abs() <= 3.0 * se;
    let cq_ok = cq > 0.0 && drift < 1e-10;
    println!(
        "c_Q = {cq:.15} (lambda drift {drift:.2e}) {}; Monte-Carlo {mc:.6} +- {se:.1e} {}",
        verdict(cq_ok),
        verdict(mc_ok)
    );

    let grid = cfg.grid.build(&cfg.data)?;
    let frame = cfg.data.initial_frame()?;
    let mut solver = RecoverySolver::new(&grid);
    let p = parity_table(cfg.data.a0, &frame, &mut solver, cfg.diagnostics.recovery_tol)?;
    let parity_ok = p.off_diagonal_ratio() <= 1e-4;
    println!("parity table at {}x{}:", grid.n_r, grid.n_z);
    let m = p.matrix;
    println!(
        "  [[dU/dx, dU/dy], [dV/dx, dV/dy]] = [[{:.6e}, {:.6e}], [{:.6e}, {:.6e}]]",
        m[0][0], m[0][1], m[1][0], m[1][1]
    );
    println!(
        "  sigma = {:.6e}, off-diagonal/sigma = {:.2e} {}, trace/sigma = {:.2e}, sigma/Q = {:.4}",
        p.sigma,
        p.off_diagonal_ratio(),
        verdict(parity_ok),
        p.trace_ratio(),
        p.c_hat()
    );
    if p.sigma * cfg.data.a0 < 0.0 {
        println!("  note: sigma has the sign of -a0 under sigma = -dz u^z");
    }
    Ok(if tan_ok && cq_ok && mc_ok && parity_ok {
        Outcome::Pass
    } else {
        Outcome::CheckFailed
    })
}

fn entry_report(cfg: &RunConfig) -> Result<(SelfEntryReport, EvolutionState)> {
    let grid = cfg.grid.build(&cfg.data)?;
    let (g0, gamma0) = build_initial_fields(&cfg.data, &grid)?;
    let mut solver = RecoverySolver::new(&grid);
    let report = self_entry_check(&cfg.data, &g0, &gamma0, &mut solver, &cfg.diagnostics)?;
    let state = EvolutionState::new(g0, gamma0, cfg.data.initial_frame()?)?;
    Ok((report, state))
}

fn render_entry(r: &SelfEntryReport, kappa: f64) -> String {
    let mut s = String::new();
    s += &format!("Q(0)      = {:.10e}\n", r.q0);
    s += &format!("C(0)      = {:.10e}\n", r.c0);
    s += &format!("mu(0)     = {:.10e}\n", r.mu0);
    s += &format!("rho(0)    = {:.10e}\n", r.rho0);
    s += &format!("Dsign(0)  = {:.3e}\n", r.dsign0);
    s += &format!("Dang(0)   = {:.3e}\n", r.dang0);
    s += &format!("E(0)      = {:.6}\n", r.e0);
    s += &format!(
        "C(0) >= kappa Q(0)^2: {:.4e} >= {:.4e} {}\n",
        r.c0,
        kappa * r.q0 * r.q0,
        verdict(r.source_dominance_ok)
    );
    for v in &r.violations {
        s += &format!("{v}\n");
    }
    s += &format!("self-entry: {}\n", if r.passed() { "passed" } else { "FAILED" });
    s
}

pub fn self_entry(cfg: &RunConfig) -> Result<Outcome> {
    let (r, _) = entry_report(cfg)?;
    print!("{}", render_entry(&r, cfg.data.kappa));
    Ok(if r.passed() {
        Outcome::Pass
    } else {
        Outcome::CheckFailed
    })
}

pub fn make_data(cfg: &RunConfig, command: &str) -> Result<Outcome> {
    let dir = output_dir(cfg)?;
    let (r, state) = entry_report(cfg)?;
    write_checkpoint(&dir.join("initial.qel"), &cfg.data, &state)?;
    let text = render_entry(&r, cfg.data.kappa);
    fs::write(dir.join("self-entry.txt"), &text)?;
    cfg.write_manifest(&dir.join("run-manifest.toml"), command)?;
    print!("{text}");
    println!("wrote {}", dir.join("initial.qel").display());
    Ok(if r.passed() {
        Outcome::Pass
    } else {
        Outcome::CheckFailed
    })
}

pub fn evolve(cfg: &RunConfig, checkpoint: Option<&Path>, force: bool, command: &str) -> Result<Outcome> {
    let dir = output_dir(cfg)?;
    let (params, state) = match checkpoint {
        Some(path) => {
            let c = read_checkpoint(path).with_context(|| format!("reading {}", path.display()))?;
            (c.params, c.state)
        }
        None => {
            let (r, state) = entry_report(cfg)?;
            if !r.passed() {
                eprint!("{}", render_entry(&r, cfg.data.kappa));
                if !force {
                    eprintln!("initial self-entry check failed; pass --force to run anyway");
                    return Ok(Outcome::CheckFailed);
                }
                log::warn!("running despite a failed self-entry check");
            }
            (cfg.data, state)
        }
    };
    cfg.write_manifest(&dir.join("run-manifest.toml"), command)?;
    let out = run(state, VelocityModel::Recovered, &cfg.run, &cfg.diagnostics)?;
    write_series(&out.records, &dir.join("series.csv"))?;
    write_checkpoint(&dir.join("final.qel"), &params, &out.final_state)?;
    let last = out.records.last().expect("at least one record");
    println!(
        "{} records, {} steps, t = {:.6e}, E = {:.4}, integral |sigma| dt = {:.3e}",
        out.records.len(),
        out.steps,
        last.t,
        last.e,
        out.strain_time
    );
    println!("halt: {}", out.halt);
    if let HaltReason::ErrorCap { component } = out.halt {
        println!("first exit: {component}");
    }
    println!("wrote {}", dir.join("series.csv").display());
    Ok(Outcome::Pass)
}

pub fn compare_ode(cfg: &RunConfig, series: Option<&Path>) -> Result<Outcome> {
    let (state, mode) = match series {
        Some(path) => {
            let records = read_series(path).with_context(|| format!("reading {}", path.display()))?;
            let fit = fit_constants(&records)?;
            println!(
                "Dini band [{:.6}, {:.6}], kappa_max = {:.6}, dominance C >= kappa_max Q^2 {}",
                fit.c_lower,
                fit.c0_upper,
                fit.kappa_max,
                if fit.dominance_holds { "holds" } else { "FAILS" }
            );
            if fit.degenerate {
                println!("degenerate band: no comparison flow");
                return Ok(Outcome::CheckFailed);
            }
            let first = records[0];
            let s = ComparisonState::new(first.q, first.c, fit.c_lower, fit.kappa_max)?;
            (s, ComparisonMode::Coupled)
        }
        None => (cfg.comparison.state()?, cfg.comparison.mode),
    };
    let run = integrate(
        &state,
        mode,
        cfg.comparison.t_max.max(10.0 * state.blowup_bound()),
        cfg.comparison.rtol,
    )?;
    println!(
        "{mode:?} flow from Q = {:.6e}, C = {:.6e}, c = {:.6}, kappa = {:.6}",
        state.q, state.c_amp, state.c, state.kappa
    );
    let checked = mode == ComparisonMode::Reduced || state.margin_preserving();
    match run.blowup_time {
        Some(t) => {
            println!("blow-up time {t:.10}, bound 1/(c kappa Q0) = {:.10}", run.bound);
            if checked {
                println!("bound {}", verdict(run.within_bound()));
            } else {
                println!("start has kappa > c/4: the bound is not implied and is reported only");
            }
        }
        None => println!(
            "no blow-up before t = {}",
            run.trajectory.last().map(|p| p.t).unwrap_or(0.0)
        ),
    }
    Ok(if !checked || run.within_bound() {
        Outcome::Pass
    } else {
        Outcome::CheckFailed
    })
}
