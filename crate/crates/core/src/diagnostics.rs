//! Tracked-packet diagnostics: scores, profile defects, weighted projections,
//! strain and exterior errors, the jet deviation and the master error.
//!
//! All packet integrals are taken in the local frame `x = r - r_*`, `y = z`
//! at the tracked scale `λ` of the frame.

use std::f64::consts::{FRAC_PI_4, PI};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bump;
use crate::error::{Error, Result};
use crate::fields::{d_dr, d_dz, sample_local, PacketFrame, ScalarField};
use crate::kernel_lab;
use crate::quadrature::{composite_gauss, gauss_legendre};
use crate::recovery::{strain_at_center, RecoveryResult, VelocityGradient};

/// Numerical knobs of the diagnostics pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticOptions {
    /// Half-opening of the diagonal sectors, `0 < δ_c < 1/10`.
    pub delta_c: f64,
    pub recovery_tol: f64,
    /// Gauss–Legendre order per panel.
    pub quad_order: usize,
    /// Relative size of `|G(0,0)|` above which the origin warning fires.
    pub origin_tol: f64,
    /// Relative bracket tolerance of the golden-section search for `D_ang`.
    pub golden_tol: f64,
}

impl Default for DiagnosticOptions {
    fn default() -> Self {
        Self {
            delta_c: 0.05,
            recovery_tol: 1e-10,
            quad_order: 6,
            origin_tol: 1e-8,
            golden_tol: 1e-13,
        }
    }
}

/// Main quadrupole kernel `K_Q = xy/(x²+y²)²`.
#[inline]
pub fn kernel_q(x: f64, y: f64) -> f64 {
    let s = x * x + y * y;
    x * y / (s * s)
}

/// Positive weight `W_Q = |xy|/(x²+y²)²`.
#[inline]
pub fn weight_q(x: f64, y: f64) -> f64 {
    kernel_q(x, y).abs()
}

/// Projection weight `w_λ = ψ(x/λ)² ψ(y/λ)²`.
#[inline]
pub fn projection_weight(x: f64, y: f64, lambda: f64) -> f64 {
    let p = bump::psi(x / lambda) * bump::psi(y / lambda);
    p * p
}

fn check_window(g: &ScalarField, frame: &PacketFrame, half: f64) -> Result<()> {
    let grid = g.grid();
    let (r_lo, r_hi) = (frame.r_star - half, frame.r_star + half);
    if !(grid.contains(r_lo, -half) && grid.contains(r_hi, half)) {
        let r = if grid.contains(r_lo, 0.0) { r_hi } else { r_lo };
        return Err(Error::OutsideHull { r, z: half });
    }
    Ok(())
}

/// Quadrature nodes `(x, y, area weight)` on the part of the square
/// `|x|, |y| < half` lying in the angular range `[theta_lo, theta_hi]`.
///
/// The rule is polar about the origin, so `K_Q G` (bounded when `G` vanishes
/// linearly at the centre) is integrated without a singular cell.
pub fn polar_square_rule(half: f64, theta_lo: f64, theta_hi: f64, h: f64, order: usize) -> Vec<(f64, f64, f64)> {
    let (gx, gw) = gauss_legendre(order);
    let rho_panels = ((half / h).ceil() as usize).max(4);
    let mut nodes = Vec::new();
    let mut cuts = vec![theta_lo];
    let first = (theta_lo / FRAC_PI_4).floor() as i64 + 1;
    let mut k = first;
    while (k as f64) * FRAC_PI_4 < theta_hi - 1e-15 {
        cuts.push(k as f64 * FRAC_PI_4);
        k += 1;
    }
    cuts.push(theta_hi);
    for win in cuts.windows(2) {
        let (t0, t1) = (win[0], win[1]);
        if t1 - t0 <= 0.0 {
            continue;
        }
        let panels = ((t1 - t0) / (PI / 16.0)).ceil().max(1.0) as usize;
        for (theta, wt) in composite_gauss(t0, t1, panels, order) {
            let (s, c) = theta.sin_cos();
            let rho_max = half / c.abs().max(s.abs());
            let hp = rho_max / rho_panels as f64;
            for p in 0..rho_panels {
                let mid = (p as f64 + 0.5) * hp;
                for (xi, wi) in gx.iter().zip(&gw) {
                    let rho = mid + 0.5 * hp * xi;
                    let w = wt * 0.5 * hp * wi * rho;
                    nodes.push((rho * c, rho * s, w));
                }
            }
        }
    }
    nodes
}

/// Angular intervals of the four diagonal sectors `||y|/|x| - 1| < δ_c`.
pub fn diagonal_sectors(delta_c: f64) -> [(f64, f64); 4] {
    let lo = (1.0 - delta_c).atan();
    let hi = (1.0 + delta_c).atan();
    [
        (lo, hi),
        (PI - hi, PI - lo),
        (PI + lo, PI + hi),
        (2.0 * PI - hi, 2.0 * PI - lo),
    ]
}

fn warn_origin(g: &ScalarField, frame: &PacketFrame, opts: &DiagnosticOptions) {
    let g0 = g.sample(frame.r_star, 0.0);
    let scale = g.max_abs();
    if scale > 0.0 && g0.abs() > opts.origin_tol * scale {
        log::warn!(
            "G(r_*, 0) = {g0:.3e} is not small; the score kernel is singular there and the packet is not quadrupolar"
        );
    }
}

fn score_on(g: &ScalarField, frame: &PacketFrame, nodes: &[(f64, f64, f64)]) -> f64 {
    nodes
        .iter()
        .map(|&(x, y, w)| w * kernel_q(x, y) * sample_local(g, frame, x, y))
        .sum()
}

/// Full quadrupole score `∫_{|x|,|y|<λ} K_Q G`.
pub fn full_score(g: &ScalarField, frame: &PacketFrame, opts: &DiagnosticOptions) -> Result<f64> {
    check_window(g, frame, frame.lambda)?;
    warn_origin(g, frame, opts);
    let nodes = polar_square_rule(frame.lambda, 0.0, 2.0 * PI, g.grid().h(), opts.quad_order);
    Ok(score_on(g, frame, &nodes))
}

/// Diagonal subscore: the full-score integrand restricted to the diagonal sectors.
pub fn diagonal_subscore(g: &ScalarField, frame: &PacketFrame, delta_c: f64, opts: &DiagnosticOptions) -> Result<f64> {
    if !(delta_c > 0.0 && delta_c < 0.1) {
        return Err(Error::InvalidParameters(format!(
            "delta_c = {delta_c} outside (0, 1/10)"
        )));
    }
    check_window(g, frame, frame.lambda)?;
    let h = g.grid().h();
    let mut total = 0.0;
    for (t0, t1) in diagonal_sectors(delta_c) {
        let nodes = polar_square_rule(frame.lambda, t0, t1, h, opts.quad_order);
        total += score_on(g, frame, &nodes);
    }
    Ok(total)
}

/// Sign and angular-profile defects and their ratio to the score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileDefects {
    pub dsign: f64,
    pub dang: f64,
    pub dprof: f64,
    /// `D_prof / Q`, or `+∞` when `Q ≤ 0`.
    pub rprof: f64,
    /// Set when `Q ≤ 0` and `rprof` is the sentinel.
    pub degenerate: bool,
    /// Minimizing amplitude of the angular defect.
    pub a_best: f64,
}

/// Weighted-L¹ angular objective `a ↦ ∫ W_Q |G - a xy|` on pre-sampled nodes.
pub struct AngularObjective {
    terms: Vec<(f64, f64, f64)>,
}

impl AngularObjective {
    pub fn new(g: &ScalarField, frame: &PacketFrame, nodes: &[(f64, f64, f64)]) -> Self {
        let terms = nodes
            .iter()
            .map(|&(x, y, w)| (w * weight_q(x, y), sample_local(g, frame, x, y), x * y))
            .collect();
        Self { terms }
    }

    pub fn eval(&self, a: f64) -> f64 {
        self.terms.iter().map(|&(w, g, xy)| w * (g - a * xy).abs()).sum()
    }

    /// `∫ W_Q [-sgn(xy) G]_+`.
    pub fn sign_defect(&self) -> f64 {
        self.terms
            .iter()
            .map(|&(w, g, xy)| w * (-xy.signum() * g).max(0.0))
            .sum()
    }
}

/// Golden-section minimization of a convex function on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, lo: f64, hi: f64, rel_tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let tol = rel_tol * (hi - lo).abs().max(f64::MIN_POSITIVE);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    for x in [lo, hi] {
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best
}

/// `D_sign`, `D_ang` (golden section over `a ∈ [0, 4 a_λ]`), `D_prof` and `R_prof`.
pub fn profile_defects(
    g: &ScalarField,
    frame: &PacketFrame,
    q: f64,
    a_lam: f64,
    opts: &DiagnosticOptions,
) -> Result<ProfileDefects> {
    check_window(g, frame, frame.lambda)?;
    let nodes = polar_square_rule(frame.lambda, 0.0, 2.0 * PI, g.grid().h(), opts.quad_order);
    let obj = AngularObjective::new(g, frame, &nodes);
    let dsign = obj.sign_defect();
    let hi = 4.0 * a_lam.max(0.0);
    let (a_best, dang) = if hi > 0.0 {
        golden_section(|a| obj.eval(a), 0.0, hi, opts.golden_tol)
    } else {
        (0.0, obj.eval(0.0))
    };
    let dprof = dsign + dang;
    // no defect at all is a zero ratio even for an empty packet
    let degenerate = q <= 0.0 && dprof > 0.0;
    let rprof = if degenerate {
        f64::INFINITY
    } else if dprof == 0.0 {
        0.0
    } else {
        dprof / q
    };
    Ok(ProfileDefects {
        dsign,
        dang,
        dprof,
        rprof,
        degenerate,
        a_best,
    })
}

/// Weighted tensor rule on the projection window `[-2λ, 2λ]²`.
pub struct ProjectionRule {
    /// `(x, y, w_λ · quadrature weight)`, zero-weight nodes dropped.
    pub nodes: Vec<(f64, f64, f64)>,
    pub lambda: f64,
}

impl ProjectionRule {
    pub fn new(lambda: f64, h: f64, order: usize) -> Self {
        let panels = ((4.0 * lambda / h).ceil() as usize).max(8);
        let line = composite_gauss(-2.0 * lambda, 2.0 * lambda, panels, order);
        let mut nodes = Vec::with_capacity(line.len() * line.len());
        for &(x, wx) in &line {
            for &(y, wy) in &line {
                let w = wx * wy * projection_weight(x, y, lambda);
                if w > 0.0 {
                    nodes.push((x, y, w));
                }
            }
        }
        Self { nodes, lambda }
    }

    pub fn inner(&self, f: impl Fn(f64, f64) -> f64, g: impl Fn(f64, f64) -> f64) -> f64 {
        self.nodes.iter().map(|&(x, y, w)| w * f(x, y) * g(x, y)).sum()
    }
}

/// Weighted projections of `G` and `Γ` on the tracked packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projections {
    pub a_lam: f64,
    pub b_lam: f64,
    pub gamma_star: f64,
    pub q_lam: f64,
    pub c_lam: f64,
}

/// `a_λ`, `b_λ`, `Γ_*`, `Q_λ = c_Q a_λ λ²`, `C_λ = λ² b_λ`.
pub fn projected_amplitudes(
    g: &ScalarField,
    gamma: &ScalarField,
    frame: &PacketFrame,
    opts: &DiagnosticOptions,
) -> Result<Projections> {
    check_window(g, frame, 2.0 * frame.lambda)?;
    let rule = ProjectionRule::new(frame.lambda, g.grid().h(), opts.quad_order);
    Ok(projections_on(&rule, g, gamma, frame))
}

fn projections_on(rule: &ProjectionRule, g: &ScalarField, gamma: &ScalarField, frame: &PacketFrame) -> Projections {
    let lambda = frame.lambda;
    let (mut gxy, mut xyxy, mut mass, mut gam) = (0.0, 0.0, 0.0, 0.0);
    let mut gamma_vals = Vec::with_capacity(rule.nodes.len());
    for &(x, y, w) in &rule.nodes {
        let xy = x * y;
        gxy += w * sample_local(g, frame, x, y) * xy;
        xyxy += w * xy * xy;
        let gv = sample_local(gamma, frame, x, y);
        gamma_vals.push(gv);
        mass += w;
        gam += w * gv;
    }
    let gamma_star = gam / mass;
    let (mut num, mut den) = (0.0, 0.0);
    for (&(x, y, w), gv) in rule.nodes.iter().zip(&gamma_vals) {
        let m = x * y * y;
        num += w * (gv - gamma_star) * m;
        den += w * m * m;
    }
    let a_lam = gxy / xyxy;
    let b_lam = 2.0 * num / den;
    Projections {
        a_lam,
        b_lam,
        gamma_star,
        q_lam: kernel_lab::score_constant_value() * a_lam * lambda * lambda,
        c_lam: lambda * lambda * b_lam,
    }
}

/// Pointwise jet coefficient `b = ∂_x ∂_y² Γ(0,0)` by fourth-order differences.
pub fn jet_coefficient(gamma: &ScalarField, frame: &PacketFrame) -> f64 {
    let dzz = d_dz(&d_dz(gamma));
    d_dr(&dzz).sample(frame.r_star, 0.0)
}

/// Normalized strain remainder: the max over the packet of the Frobenius norm of
/// `∇(U - σx, V + σy)`, divided by `|σ|`.
pub fn strain_error(grad: &VelocityGradient, frame: &PacketFrame, sigma: f64) -> f64 {
    let m = packet_samples(frame, grad.dur_dr.grid().h());
    let mut worst: f64 = 0.0;
    for (x, y) in m {
        let (r, z) = frame.from_local(x, y);
        let j = grad.at(r, z);
        let e = [[j[0][0] - sigma, j[0][1]], [j[1][0], j[1][1] + sigma]];
        let n = (e[0][0].powi(2) + e[0][1].powi(2) + e[1][0].powi(2) + e[1][1].powi(2)).sqrt();
        worst = worst.max(n);
    }
    normalized(worst, sigma.abs())
}

/// Tensor sample points covering the closed packet `|x|, |y| ≤ λ`.
fn packet_samples(frame: &PacketFrame, h: f64) -> Vec<(f64, f64)> {
    let m = ((frame.lambda / h).ceil() as usize).max(4);
    let step = frame.lambda / m as f64;
    let mut out = Vec::with_capacity((2 * m + 1).pow(2));
    for a in 0..=2 * m {
        for b in 0..=2 * m {
            out.push(((a as f64 - m as f64) * step, (b as f64 - m as f64) * step));
        }
    }
    out
}

/// Exterior affine-tail ratio: max over the packet of the far velocity minus its
/// affine Taylor polynomial at the centre, divided by `|σ| λ`.
pub fn exterior_tail(far: &RecoveryResult, frame: &PacketFrame, sigma: f64) -> f64 {
    let grad = far.velocity_gradient();
    let (rc, zc) = (frame.r_star, 0.0);
    let u0 = [far.u_r.sample(rc, zc), far.u_z.sample(rc, zc)];
    let j = grad.at(rc, zc);
    let mut worst: f64 = 0.0;
    for (x, y) in packet_samples(frame, far.u_r.grid().h()) {
        let (r, z) = frame.from_local(x, y);
        let du = far.u_r.sample(r, z) - u0[0] - j[0][0] * x - j[0][1] * y;
        let dv = far.u_z.sample(r, z) - u0[1] - j[1][0] * x - j[1][1] * y;
        worst = worst.max(du.hypot(dv));
    }
    normalized(worst, sigma.abs() * frame.lambda)
}

/// `num / den`, with `0` for a vanishing numerator and `+∞` for a vanishing denominator.
fn normalized(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 || !den.is_finite() {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Monomial exponents of the jet fit, in the order of [`JetFit::coefficients`].
/// The first two, `1` and `xy²`, are nuisance terms absorbed by `Γ_*` and `b_λ`.
pub const JET_MONOMIALS: [(i32, i32); 11] = [
    (0, 0),
    (1, 2),
    (1, 0),
    (0, 1),
    (2, 0),
    (0, 2),
    (1, 1),
    (3, 0),
    (2, 1),
    (0, 3),
    (1, 4),
];
const JET_NUISANCE: usize = 2;

/// Result of the weighted least-squares fit of the swirl jet.
#[derive(Debug, Clone, PartialEq)]
pub struct JetFit {
    pub delta_jet: f64,
    /// Scale-weighted coefficients `c_pq λ^{p+q}` in [`JET_MONOMIALS`] order.
    pub coefficients: Vec<f64>,
    /// Weighted RMS of the fit residual (modes outside the basis).
    pub residual: f64,
}

impl JetFit {
    /// Scale-weighted ratio `|c_14| λ⁵ / (b λ³)` of the first neutral-tower mode.
    pub fn neutral_ratio(&self, b_lam: f64, lambda: f64) -> f64 {
        normalized(self.coefficients[10].abs(), b_lam.abs() * lambda.powi(3))
    }
}

/// Fit `Γ - Γ_* - ½ b_λ xy²` onto the jet monomials with weight `w_λ` and
/// return `δ_jet = Σ |c_pq| λ^{p+q} / (b_λ λ³)` over the counted modes.
pub fn jet_deviation(
    gamma: &ScalarField,
    frame: &PacketFrame,
    b_lam: f64,
    gamma_star: f64,
    opts: &DiagnosticOptions,
) -> Result<JetFit> {
    check_window(gamma, frame, 2.0 * frame.lambda)?;
    let rule = ProjectionRule::new(frame.lambda, gamma.grid().h(), opts.quad_order);
    jet_fit_on(&rule, gamma, frame, b_lam, gamma_star)
}

fn jet_fit_on(
    rule: &ProjectionRule,
    gamma: &ScalarField,
    frame: &PacketFrame,
    b_lam: f64,
    gamma_star: f64,
) -> Result<JetFit> {
    let lambda = frame.lambda;
    let k = JET_MONOMIALS.len();
    let mut ata = DMatrix::<f64>::zeros(k, k);
    let mut atb = DVector::<f64>::zeros(k);
    let mut rows = Vec::with_capacity(rule.nodes.len());
    let mut phi = vec![0.0; k];
    for &(x, y, w) in &rule.nodes {
        let (xi, eta) = (x / lambda, y / lambda);
        for (p, &(a, b)) in phi.iter_mut().zip(&JET_MONOMIALS) {
            *p = xi.powi(a) * eta.powi(b);
        }
        let f = sample_local(gamma, frame, x, y) - gamma_star - 0.5 * b_lam * x * y * y;
        for a in 0..k {
            atb[a] += w * phi[a] * f;
            for b in a..k {
                ata[(a, b)] += w * phi[a] * phi[b];
            }
        }
        rows.push((w, f));
    }
    for a in 0..k {
        for b in 0..a {
            ata[(a, b)] = ata[(b, a)];
        }
    }
    let svd = ata.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax.is_nan() || smax <= 0.0 || smin < 1e-13 * smax {
        return Err(Error::DegenerateFit);
    }
    let coef = svd.solve(&atb, 0.0).map_err(|_| Error::DegenerateFit)?;
    let mut res2 = 0.0;
    let mut wsum = 0.0;
    for (&(x, y, _), &(w, f)) in rule.nodes.iter().zip(&rows) {
        let (xi, eta) = (x / lambda, y / lambda);
        let model: f64 = JET_MONOMIALS
            .iter()
            .zip(coef.iter())
            .map(|(&(a, b), c)| c * xi.powi(a) * eta.powi(b))
            .sum();
        res2 += w * (f - model).powi(2);
        wsum += w;
    }
    let numerator: f64 = coef.iter().skip(JET_NUISANCE).map(|c| c.abs()).sum();
    let scale = b_lam.abs() * lambda.powi(3);
    let delta_jet = normalized(numerator, scale);
    Ok(JetFit {
        delta_jet,
        coefficients: coef.iter().copied().collect(),
        residual: (res2 / wsum).sqrt(),
    })
}

/// `E = δ_jet + μ + R_prof + ρ + ε_strain`.
pub fn master_error(delta_jet: f64, mu: f64, rprof: f64, rho: f64, eps_strain: f64) -> f64 {
    delta_jet + mu + rprof + rho + eps_strain
}

/// One time slice of every tracked scalar.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub q: f64,
    pub qdiag: f64,
    pub c: f64,
    pub sigma: f64,
    pub a_lam: f64,
    pub b_lam: f64,
    pub q_lam: f64,
    pub c_lam: f64,
    pub b: f64,
    pub mu: f64,
    pub rho: f64,
    pub rprof: f64,
    pub delta_jet: f64,
    pub eps_strain: f64,
    /// NaN when no near/far split was solved for this slice.
    pub eta_ext: f64,
    pub e: f64,
    pub r_star: f64,
    pub lambda: f64,
    pub gamma_star: f64,
    pub dsign: f64,
    pub dang: f64,
    pub dprof: f64,
    pub rprof_degenerate: bool,
    /// Radial velocity at the centre, the drift `r_*'`.
    pub u_r_center: f64,
    /// `|c_14| λ⁵ / (b_λ λ³)`.
    pub neutral_ratio: f64,
    pub jet_residual: f64,
}

impl DiagnosticsRecord {
    pub const CSV_HEADER: [&'static str; 19] = [
        "t",
        "Q",
        "Qdiag",
        "C",
        "sigma",
        "a_lam",
        "b_lam",
        "Q_lam",
        "C_lam",
        "b",
        "mu",
        "rho",
        "Rprof",
        "delta_jet",
        "eps_strain",
        "eta_ext",
        "E",
        "r_star",
        "lambda",
    ];

    pub fn csv_values(&self) -> [f64; 19] {
        [
            self.t,
            self.q,
            self.qdiag,
            self.c,
            self.sigma,
            self.a_lam,
            self.b_lam,
            self.q_lam,
            self.c_lam,
            self.b,
            self.mu,
            self.rho,
            self.rprof,
            self.delta_jet,
            self.eps_strain,
            self.eta_ext,
            self.e,
            self.r_star,
            self.lambda,
        ]
    }

    pub fn from_csv_values(v: &[f64; 19]) -> Self {
        Self {
            t: v[0],
            q: v[1],
            qdiag: v[2],
            c: v[3],
            sigma: v[4],
            a_lam: v[5],
            b_lam: v[6],
            q_lam: v[7],
            c_lam: v[8],
            b: v[9],
            mu: v[10],
            rho: v[11],
            rprof: v[12],
            delta_jet: v[13],
            eps_strain: v[14],
            eta_ext: v[15],
            e: v[16],
            r_star: v[17],
            lambda: v[18],
            ..Default::default()
        }
    }

    /// Components of `E` in the order `(δ_jet, μ, R_prof, ρ, ε_strain)`.
    pub fn error_components(&self) -> [(&'static str, f64); 5] {
        [
            ("delta_jet", self.delta_jet),
            ("mu", self.mu),
            ("Rprof", self.rprof),
            ("rho", self.rho),
            ("eps_strain", self.eps_strain),
        ]
    }
}

/// Compute every diagnostic of one snapshot. `far` is the far part of a
/// near/far split solve; without it `η_ext` is NaN.
pub fn assemble_record(
    g: &ScalarField,
    gamma: &ScalarField,
    recovery: &RecoveryResult,
    far: Option<&RecoveryResult>,
    frame: &PacketFrame,
    opts: &DiagnosticOptions,
) -> Result<DiagnosticsRecord> {
    check_window(g, frame, 2.0 * frame.lambda)?;
    let h = g.grid().h();
    let lambda = frame.lambda;
    warn_origin(g, frame, opts);

    let square = polar_square_rule(lambda, 0.0, 2.0 * PI, h, opts.quad_order);
    let q = score_on(g, frame, &square);
    let qdiag = diagonal_subscore(g, frame, opts.delta_c, opts)?;

    let rule = ProjectionRule::new(lambda, h, opts.quad_order);
    let proj = projections_on(&rule, g, gamma, frame);
    let defects = profile_defects(g, frame, q, proj.a_lam, opts)?;
    let jet = jet_fit_on(&rule, gamma, frame, proj.b_lam, proj.gamma_star)?;

    let sigma = strain_at_center(recovery, frame)?;
    let grad = recovery.velocity_gradient();
    let eps_strain = strain_error(&grad, frame, sigma);
    let eta_ext = far.map_or(f64::NAN, |f| exterior_tail(f, frame, sigma));

    let b = jet_coefficient(gamma, frame);
    let mu = normalized(b * lambda.powi(3), proj.gamma_star);
    let rho = frame.rho();
    let e = master_error(jet.delta_jet, mu, defects.rprof, rho, eps_strain);
    Ok(DiagnosticsRecord {
        t: frame.t,
        q,
        qdiag,
        c: lambda * lambda * b,
        sigma,
        a_lam: proj.a_lam,
        b_lam: proj.b_lam,
        q_lam: proj.q_lam,
        c_lam: proj.c_lam,
        b,
        mu,
        rho,
        rprof: defects.rprof,
        delta_jet: jet.delta_jet,
        eps_strain,
        eta_ext,
        e,
        r_star: frame.r_star,
        lambda,
        gamma_star: proj.gamma_star,
        dsign: defects.dsign,
        dang: defects.dang,
        dprof: defects.dprof,
        rprof_degenerate: defects.degenerate,
        u_r_center: recovery.u_r.sample(frame.r_star, 0.0),
        neutral_ratio: jet.neutral_ratio(proj.b_lam, lambda),
        jet_residual: jet.residual,
    })
}
