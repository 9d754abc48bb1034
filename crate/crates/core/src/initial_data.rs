//! Explicit compactly supported quadrupole datum and its self-entry check.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bump;
use crate::diagnostics::{self, DiagnosticOptions, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::fields::{MeridionalGrid, PacketFrame, ScalarField, Window};
use crate::recovery::RecoverySolver;

/// Parameters of the explicit datum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataParameters {
    pub r0: f64,
    pub lambda0: f64,
    pub a0: f64,
    pub gamma_star0: f64,
    /// Swirl-jet multiplier: `b0 = a_b a0² λ0²`.
    pub a_b: f64,
    pub epsilon0: f64,
    /// Source-dominance constant.
    pub kappa: f64,
}

impl Default for DataParameters {
    fn default() -> Self {
        Self {
            r0: 1.0,
            lambda0: 0.05,
            a0: 1.0,
            gamma_star0: 1.0,
            a_b: 64.0,
            epsilon0: 0.05,
            kappa: 0.125,
        }
    }
}

/// A violated smallness or positivity condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub condition: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} violated: {:.6e} > {:.6e}", self.condition, self.lhs, self.rhs)
    }
}

impl DataParameters {
    pub fn b0(&self) -> f64 {
        self.a_b * self.a0 * self.a0 * self.lambda0 * self.lambda0
    }

    /// Half-width of the support window, `4 λ0`.
    pub fn support_half_width(&self) -> f64 {
        4.0 * self.lambda0
    }

    pub fn support_window(&self) -> Window {
        let h = self.support_half_width();
        Window {
            r_lo: self.r0 - h,
            r_hi: self.r0 + h,
            z_lo: -h,
            z_hi: h,
        }
    }

    pub fn initial_frame(&self) -> Result<PacketFrame> {
        PacketFrame::new(self.r0, self.lambda0, 0.0)
    }

    /// Positivity requirements; violations here make the datum meaningless.
    pub fn check_basic(&self) -> Result<()> {
        let pos = [
            ("r0", self.r0),
            ("lambda0", self.lambda0),
            ("gamma_star0", self.gamma_star0),
            ("a_b", self.a_b),
            ("epsilon0", self.epsilon0),
            ("kappa", self.kappa),
        ];
        for (name, v) in pos {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameters(format!("{name} = {v} must be positive")));
            }
        }
        if !self.a0.is_finite() {
            return Err(Error::InvalidParameters("a0 must be finite".into()));
        }
        if 4.0 * self.lambda0 >= self.r0 {
            return Err(Error::InvalidParameters(
                "support reaches the axis: need 4 lambda0 < r0".into(),
            ));
        }
        Ok(())
    }

    /// Smallness inequalities `A_b a0² λ0⁵ ≤ ε0 Γ*,0` and `λ0/r0 ≤ ε0`.
    pub fn smallness_violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let lhs = self.a_b * self.a0 * self.a0 * self.lambda0.powi(5);
        let rhs = self.epsilon0 * self.gamma_star0;
        if lhs > rhs {
            out.push(Violation {
                condition: "A_b a0^2 lambda0^5 <= epsilon0 Gamma_star0",
                lhs,
                rhs,
            });
        }
        let lhs = self.lambda0 / self.r0;
        if lhs > self.epsilon0 {
            out.push(Violation {
                condition: "lambda0 / r0 <= epsilon0",
                lhs,
                rhs: self.epsilon0,
            });
        }
        out
    }
}

/// Tensor cutoff `χ(x/λ0) χ(y/λ0)`: 1 on `[-2λ0, 2λ0]²`, 0 outside `(-4λ0, 4λ0)²`.
pub fn cutoff(x: f64, y: f64, lambda0: f64) -> f64 {
    bump::chi(x / lambda0) * bump::chi(y / lambda0)
}

/// `G0 = a0 (r - r0) z χ` and `Γ0 = χ (Γ*,0 + ½ b0 (r - r0) z²)`.
pub fn build_initial_fields(p: &DataParameters, grid: &Arc<MeridionalGrid>) -> Result<(ScalarField, ScalarField)> {
    p.check_basic()?;
    let window = p.support_window();
    if !window.strictly_inside(grid) {
        return Err(Error::SupportTouchesBoundary);
    }
    let b0 = p.b0();
    let g0 = ScalarField::from_fn(grid, |r, z| {
        let x = r - p.r0;
        p.a0 * x * z * cutoff(x, z, p.lambda0)
    })
    .with_support(window);
    let gamma0 = ScalarField::from_fn(grid, |r, z| {
        let x = r - p.r0;
        cutoff(x, z, p.lambda0) * (p.gamma_star0 + 0.5 * b0 * x * z * z)
    })
    .with_support(window);
    Ok((g0, gamma0))
}

/// Verdict of the initial-entry check.
#[derive(Debug, Clone)]
pub struct SelfEntryReport {
    pub q0: f64,
    pub c0: f64,
    pub mu0: f64,
    pub rho0: f64,
    pub dsign0: f64,
    pub dang0: f64,
    pub e0: f64,
    pub source_dominance_ok: bool,
    pub violations: Vec<Violation>,
    /// Full diagnostics record of the initial state.
    pub record: DiagnosticsRecord,
}

impl SelfEntryReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.source_dominance_ok
    }
}

/// Evaluate the initial scores, defects and master error of the explicit datum.
pub fn self_entry_check(
    p: &DataParameters,
    g0: &ScalarField,
    gamma0: &ScalarField,
    solver: &mut RecoverySolver,
    opts: &DiagnosticOptions,
) -> Result<SelfEntryReport> {
    p.check_basic()?;
    let frame = p.initial_frame()?;
    let recovery = solver.solve(g0, opts.recovery_tol)?;
    let record = diagnostics::assemble_record(g0, gamma0, &recovery, None, &frame, opts)?;
    let b0 = p.b0();
    let q0 = record.q;
    let c0 = p.lambda0 * p.lambda0 * b0;
    Ok(SelfEntryReport {
        q0,
        c0,
        mu0: b0 * p.lambda0.powi(3) / p.gamma_star0,
        rho0: p.lambda0 / p.r0,
        dsign0: record.dsign,
        dang0: record.dang,
        e0: record.e,
        source_dominance_ok: c0 >= p.kappa * q0 * q0,
        violations: p.smallness_violations(),
        record,
    })
}
