//! Static checks of the kernel calculation: the tangential integral of the 5D
//! kernel, the score constant, the strain parity table and the source expansion.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bump;
use crate::diagnostics::{self, DiagnosticOptions};
use crate::error::{Error, Result};
use crate::fields::{MeridionalGrid, PacketFrame, ScalarField};
use crate::quadrature::adaptive;
use crate::recovery::{strain_at_center, RecoverySolver};

/// Closed form `8π/15` of `4π ∫_0^∞ τ² (1+τ²)^{-7/2} dτ`.
pub const TANGENTIAL_CLOSED_FORM: f64 = 8.0 * PI / 15.0;

/// Truncation point of the tangential integral.
pub const TANGENTIAL_CUTOFF: f64 = 1.0e3;

/// Default relative tolerance of the adaptive quadratures.
pub const DEFAULT_QUAD_TOL: f64 = 1e-12;

fn tangential_integrand(tau: f64) -> f64 {
    tau * tau * (1.0 + tau * tau).powf(-3.5)
}

/// Value of the tangential integral and its error budget.
#[derive(Debug, Clone, Copy)]
pub struct TangentialReport {
    pub value: f64,
    pub closed_form: f64,
    pub cutoff: f64,
    /// Quadrature error estimate on `[0, T]`, times `4π`.
    pub quadrature_error: f64,
    /// Upper bound `π T^{-4}` on the discarded tail.
    pub tail_bound: f64,
}

impl TangentialReport {
    pub fn relative_error(&self) -> f64 {
        (self.value - self.closed_form).abs() / self.closed_form
    }
}

/// `4π ∫_0^T τ²(1+τ²)^{-7/2} dτ`, with the interval split at `τ = 1` and
/// geometric breakpoints so the algebraic tail is resolved.
pub fn tangential_truncated(cutoff: f64, tol: f64) -> Result<(f64, f64)> {
    let mut value = 0.0;
    let mut err = 0.0;
    let mut lo = 0.0;
    let mut hi: f64 = 1.0_f64.min(cutoff);
    while lo < cutoff {
        let r = adaptive(tangential_integrand, lo, hi, tol * 1e-3, tol)?;
        value += r.value;
        err += r.error;
        lo = hi;
        hi = (hi * 4.0).min(cutoff);
    }
    Ok((4.0 * PI * value, 4.0 * PI * err))
}

/// Truncated integral plus the leading tail `4π ∫_T^∞ τ^{-5} dτ = π T^{-4}`;
/// the remaining error is `O(T^{-6})`.
pub fn tangential_with_tail(cutoff: f64, tol: f64) -> Result<(f64, f64)> {
    let (head, err) = tangential_truncated(cutoff, tol)?;
    Ok((head + PI * cutoff.powi(-4), err))
}

/// The tangential constant, truncated at [`TANGENTIAL_CUTOFF`] with the leading tail added back.
pub fn tangential_constant(tol: f64) -> Result<TangentialReport> {
    let t = TANGENTIAL_CUTOFF;
    let (value, quadrature_error) = tangential_with_tail(t, tol)?;
    if !value.is_finite() {
        return Err(Error::Quadrature("non-finite tangential integral".into()));
    }
    Ok(TangentialReport {
        value,
        closed_form: TANGENTIAL_CLOSED_FORM,
        cutoff: t,
        quadrature_error,
        tail_bound: PI * t.powi(-4),
    })
}

fn score_integrand(x: f64, y: f64) -> f64 {
    let s = x * x + y * y;
    if s == 0.0 {
        0.0
    } else {
        x * x * y * y / (s * s)
    }
}

/// Integral of `x²y²/(x²+y²)²` over one quadrant `[0, λ]²` times the quadrant signs,
/// by nested adaptive quadrature. Index `k` is the quadrant `(±x, ±y)`.
pub fn score_quadrants(lambda: f64, tol: f64) -> Result<[f64; 4]> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameters(format!("lambda = {lambda} must be positive")));
    }
    let mut out = [0.0; 4];
    for (k, (sx, sy)) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
        .into_iter()
        .enumerate()
    {
        let (x0, x1) = if sx > 0.0 { (0.0, lambda) } else { (-lambda, 0.0) };
        let (y0, y1) = if sy > 0.0 { (0.0, lambda) } else { (-lambda, 0.0) };
        let inner = |x: f64| {
            adaptive(|y| score_integrand(x, y), y0, y1, 1e-15 * lambda, tol)
                .map(|r| r.value)
                .unwrap_or(f64::NAN)
        };
        let r = adaptive(inner, x0, x1, 1e-15 * lambda * lambda, tol)?;
        if !r.value.is_finite() {
            return Err(Error::Quadrature("inner score integral failed".into()));
        }
        out[k] = r.value;
    }
    Ok(out)
}

/// `c_Q = λ^{-2} ∫_{[-λ,λ]²} x²y²/(x²+y²)² dx dy`.
pub fn score_constant(lambda: f64, tol: f64) -> Result<f64> {
    let q = score_quadrants(lambda, tol)?;
    Ok(q.iter().sum::<f64>() / (lambda * lambda))
}

/// Cached `c_Q` at unit scale.
pub fn score_constant_value() -> f64 {
    static CQ: OnceLock<f64> = OnceLock::new();
    *CQ.get_or_init(|| score_constant(1.0, DEFAULT_QUAD_TOL).expect("score constant quadrature"))
}

/// Monte-Carlo estimate of `c_Q` from uniform samples on `[-1, 1]²`: `(mean, standard error)`.
pub fn score_constant_monte_carlo(samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        let x: f64 = rng.gen_range(-1.0..1.0);
        let y: f64 = rng.gen_range(-1.0..1.0);
        let v = 4.0 * score_integrand(x, y);
        s1 += v;
        s2 += v * v;
    }
    let n = samples as f64;
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Strain matrix `∇_{x,y}(U, V)(0,0)` of a recovered quadrupole packet.
#[derive(Debug, Clone, Copy)]
pub struct StrainMatrix {
    /// `[[∂_x U, ∂_y U], [∂_x V, ∂_y V]]`.
    pub matrix: [[f64; 2]; 2],
    pub sigma: f64,
    /// Full score of the synthetic packet.
    pub q: f64,
}

impl StrainMatrix {
    pub fn off_diagonal_ratio(&self) -> f64 {
        self.matrix[0][1].abs().max(self.matrix[1][0].abs()) / self.sigma.abs()
    }

    pub fn trace_ratio(&self) -> f64 {
        (self.matrix[0][0] + self.matrix[1][1]).abs() / self.sigma.abs()
    }

    /// Empirical `σ/Q` of the packet.
    pub fn c_hat(&self) -> f64 {
        self.sigma / self.q
    }
}

/// Synthetic packet `G = a xy χ(x/λ) χ(y/λ)` on the given grid.
pub fn quadrupole_packet(grid: &Arc<MeridionalGrid>, a: f64, frame: &PacketFrame) -> ScalarField {
    ScalarField::from_fn(grid, |r, z| {
        let (x, y) = frame.to_local(r, z);
        a * x * y * bump::chi(x / frame.lambda) * bump::chi(y / frame.lambda)
    })
}

/// Recover the velocity of the synthetic packet and read off the strain matrix at
/// the centre. The grid must be symmetric about the packet centre.
pub fn parity_table(a: f64, frame: &PacketFrame, solver: &mut RecoverySolver, tol: f64) -> Result<StrainMatrix> {
    let grid = solver.grid().clone();
    let rc = 0.5 * (grid.r_min + grid.r_max);
    if !grid.is_z_symmetric() || (rc - frame.r_star).abs() > 1e-12 * frame.r_star {
        return Err(Error::InvalidGrid(
            "parity table needs a grid symmetric about the packet centre".into(),
        ));
    }
    let g = quadrupole_packet(&grid, a, frame);
    let rec = solver.solve(&g, tol)?;
    let sigma = strain_at_center(&rec, frame)?;
    let matrix = rec.velocity_gradient().at(frame.r_star, 0.0);
    let q = diagnostics::full_score(&g, frame, &DiagnosticOptions::default())?;
    Ok(StrainMatrix { matrix, sigma, q })
}

/// Outcome of the source-expansion check.
#[derive(Debug, Clone, Copy)]
pub struct SourceCheck {
    /// `max |Err| / (r_*^{-4} Γ_* b |xy|)` over the packet, `|xy| > 10⁻³ λ²`.
    pub max_relative_error: f64,
    /// `δ_jet + λ/r_* + bλ³/Γ_*`.
    pub reference: f64,
}

impl SourceCheck {
    /// Measured constant in `error ≤ C · reference`.
    pub fn constant(&self) -> f64 {
        self.max_relative_error / self.reference
    }
}

/// Parameters of the source-expansion check.
#[derive(Debug, Clone, Copy)]
pub struct SourceSetup {
    pub b: f64,
    pub gamma_star: f64,
    pub lambda: f64,
    pub r_star: f64,
    /// Jet deviation assigned to the perturbation.
    pub delta_jet: f64,
    /// Evaluate `r^{-4}` at `r_*` instead of `r_* + x`.
    pub freeze_radius: bool,
}

/// Source `r^{-4} ∂_y(Γ²) = 2 Γ ∂_yΓ / r⁴`.
#[inline]
pub fn swirl_source(gamma: f64, gamma_y: f64, r: f64) -> f64 {
    2.0 * gamma * gamma_y / r.powi(4)
}

/// Evaluate `r^{-4} ∂_y(Γ²)` for `Γ = Γ_* + ½bxy² + R_Γ` on the packet, subtract
/// `2 r_*^{-4} Γ_* b xy`, and normalize. `perturbation` returns `(R_Γ, ∂_y R_Γ)`.
pub fn source_expansion_check(setup: &SourceSetup, perturbation: impl Fn(f64, f64) -> (f64, f64)) -> SourceCheck {
    let SourceSetup {
        b,
        gamma_star,
        lambda,
        r_star,
        delta_jet,
        freeze_radius,
    } = *setup;
    let n = 200;
    let mut worst: f64 = 0.0;
    let lead_scale = gamma_star * b / r_star.powi(4);
    for i in 0..=n {
        for j in 0..=n {
            let x = lambda * (2.0 * i as f64 / n as f64 - 1.0);
            let y = lambda * (2.0 * j as f64 / n as f64 - 1.0);
            if (x * y).abs() <= 1e-3 * lambda * lambda {
                continue;
            }
            let (rg, rg_y) = perturbation(x, y);
            let gamma = gamma_star + 0.5 * b * x * y * y + rg;
            let gamma_y = b * x * y + rg_y;
            let r = if freeze_radius { r_star } else { r_star + x };
            let source = swirl_source(gamma, gamma_y, r);
            let lead = 2.0 * lead_scale * x * y;
            let rel = (source - lead).abs() / (lead_scale * (x * y).abs());
            worst = worst.max(rel);
        }
    }
    SourceCheck {
        max_relative_error: worst,
        reference: delta_jet + lambda / r_star + b * lambda.powi(3) / gamma_star,
    }
}

/// Kernel constants reported by `verify-kernel`.
#[derive(Debug, Clone, Copy)]
pub struct KernelConstants {
    pub c_tan: f64,
    pub c_q: f64,
    /// Sign of the measured `σ/(a Q)` for a positive-amplitude model packet.
    pub c0_sign: f64,
}
