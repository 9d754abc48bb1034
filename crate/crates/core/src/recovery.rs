//! Meridional velocity recovery from the lifted vorticity `G`.
//!
//! The potential solves `-Δ₅φ = G` with `Δ₅ = ∂_r² + (3/r)∂_r + ∂_z²`, the
//! radial part of the Laplacian on `R⁴ x R`. The velocity follows from
//! `u^r = -r ∂_z φ`, `u^z = 2φ + r ∂_r φ`.
//!
//! Boundary values on the rectangle are the whole-space Newtonian potential
//! of the source, evaluated by direct quadrature against the ring kernel
//! (the 5D kernel `|X - X'|^{-3}` integrated over the `S³` orbit). The
//! interior Dirichlet problem is discretized in the conservative form
//! `r⁻³ ∂_r (r³ ∂_r φ) + ∂_z² φ` (second order) and solved exactly by a sine
//! transform in `z` and tridiagonal sweeps in `r`, followed by defect
//! correction until the relative residual meets the requested tolerance.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::bump;
use crate::error::{Error, Result};
use crate::fields::{d_dr, d_dz, MeridionalGrid, PacketFrame, ScalarField};
use crate::quadrature::{composite_gauss, elliptic_ke};

/// Reduced Green's function of `-Δ₅`: `φ(r,z) = ∬ G(r',z') K r'³ dr' dz'`.
///
/// `K = (1/8π²) ∫_{S³} |X - X'|^{-3} dΩ`, evaluated in closed form with
/// complete elliptic integrals.
pub fn ring_kernel(r: f64, z: f64, rp: f64, zp: f64) -> f64 {
    let dz = z - zp;
    let a = r * r + rp * rp + dz * dz;
    let b = 2.0 * r * rp;
    if b < 0.05 * a {
        // closed form cancels badly for far sources; the angular integrand is smooth there
        return ring_kernel_quadrature(r, z, rp, zp);
    }
    let s = a + b;
    let m = 2.0 * b / s;
    let (k, e) = elliptic_ke(m);
    let i1 = 2.0 * k / s.sqrt();
    let i2 = 2.0 * s.sqrt() * e;
    let angular = 2.0 / (b * b) * (a * i1 - i2);
    angular / (2.0 * PI)
}

/// Same kernel by Gauss–Legendre quadrature of the angular integral
/// `(1/2π) ∫_0^π sin²θ (A - B cos θ)^{-3/2} dθ`.
pub fn ring_kernel_quadrature(r: f64, z: f64, rp: f64, zp: f64) -> f64 {
    let dz = z - zp;
    let a = r * r + rp * rp + dz * dz;
    let b = 2.0 * r * rp;
    let panels = if b > 0.5 * a { 16 } else { 4 };
    let sum: f64 = composite_gauss(0.0, PI, panels, 16)
        .into_iter()
        .map(|(t, w)| w * t.sin().powi(2) * (a - b * t.cos()).powf(-1.5))
        .sum();
    sum / (2.0 * PI)
}

/// Boundary node of the rectangle: index plus grid coordinates.
#[derive(Debug, Clone, Copy)]
struct BoundaryNode {
    i: usize,
    j: usize,
}

fn boundary_nodes(g: &MeridionalGrid) -> Vec<BoundaryNode> {
    let mut out = Vec::with_capacity(2 * (g.n_r + g.n_z));
    for i in 0..g.n_r {
        out.push(BoundaryNode { i, j: 0 });
        out.push(BoundaryNode { i, j: g.n_z - 1 });
    }
    for j in 1..g.n_z - 1 {
        out.push(BoundaryNode { i: 0, j });
        out.push(BoundaryNode { i: g.n_r - 1, j });
    }
    out
}

/// Kernel weights from a rectangular source box to every boundary node.
///
/// Translation invariance in `z` keeps the table at
/// `O(n_r · box_r · box_z)` instead of one weight per (boundary, source) pair.
struct BoundaryTable {
    i0: usize,
    i1: usize,
    j0: usize,
    j1: usize,
    d_lo: usize,
    d_len: usize,
    /// `[ib][i' - i0][d - d_lo]` for the `z = z_min`, `z = z_max` edges.
    zedge: Vec<f64>,
    /// `[side][i' - i0][d]` for the `r = r_min`, `r = r_max` edges.
    redge: Vec<f64>,
}

impl BoundaryTable {
    fn build(g: &MeridionalGrid, i0: usize, i1: usize, j0: usize, j1: usize) -> Self {
        let ni = i1 - i0 + 1;
        let top = g.n_z - 1;
        let d_lo = j0.min(top - j1);
        let d_hi = j1.max(top - j0);
        let d_len = d_hi - d_lo + 1;
        let cell = g.dr * g.dz;
        let mut zedge = vec![0.0; g.n_r * ni * d_len];
        for ib in 0..g.n_r {
            let rb = g.r(ib);
            for (k, ip) in (i0..=i1).enumerate() {
                let rp = g.r(ip);
                let w = rp * rp * rp * cell;
                let base = (ib * ni + k) * d_len;
                for d in 0..d_len {
                    let dz = (d_lo + d) as f64 * g.dz;
                    zedge[base + d] = w * ring_kernel(rb, dz, rp, 0.0);
                }
            }
        }
        let mut redge = vec![0.0; 2 * ni * g.n_z];
        for (side, ib) in [0, g.n_r - 1].into_iter().enumerate() {
            let rb = g.r(ib);
            for (k, ip) in (i0..=i1).enumerate() {
                let rp = g.r(ip);
                let w = rp * rp * rp * cell;
                let base = (side * ni + k) * g.n_z;
                for d in 0..g.n_z {
                    redge[base + d] = w * ring_kernel(rb, d as f64 * g.dz, rp, 0.0);
                }
            }
        }
        Self {
            i0,
            i1,
            j0,
            j1,
            d_lo,
            d_len,
            zedge,
            redge,
        }
    }

    fn covers(&self, i0: usize, i1: usize, j0: usize, j1: usize) -> bool {
        self.i0 <= i0 && i1 <= self.i1 && self.j0 <= j0 && j1 <= self.j1
    }

    fn potential(&self, g: &MeridionalGrid, src: &ScalarField, node: BoundaryNode) -> f64 {
        let ni = self.i1 - self.i0 + 1;
        let vals = src.values();
        let mut acc = 0.0;
        if node.j == 0 || node.j == g.n_z - 1 {
            for (k, ip) in (self.i0..=self.i1).enumerate() {
                let base = (node.i * ni + k) * self.d_len;
                let row = &vals[ip * g.n_z..(ip + 1) * g.n_z];
                for (jp, &gv) in row.iter().enumerate().take(self.j1 + 1).skip(self.j0) {
                    if gv != 0.0 {
                        let d = node.j.abs_diff(jp);
                        acc += gv * self.zedge[base + d - self.d_lo];
                    }
                }
            }
        } else {
            let side = usize::from(node.i != 0);
            for (k, ip) in (self.i0..=self.i1).enumerate() {
                let base = (side * ni + k) * g.n_z;
                let row = &vals[ip * g.n_z..(ip + 1) * g.n_z];
                for (jp, &gv) in row.iter().enumerate().take(self.j1 + 1).skip(self.j0) {
                    if gv != 0.0 {
                        acc += gv * self.redge[base + node.j.abs_diff(jp)];
                    }
                }
            }
        }
        acc
    }
}

/// Potential, meridional velocity and solver bookkeeping.
#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub phi: ScalarField,
    pub u_r: ScalarField,
    pub u_z: ScalarField,
    /// Max over interior nodes of `|(1/r)∂_r(r u^r) + ∂_z u^z|` (centred differences).
    pub div_residual_max: f64,
    /// Relative residual of the discrete elliptic equation.
    pub residual: f64,
    pub iterations: usize,
}

impl RecoveryResult {
    fn zero(grid: &Arc<MeridionalGrid>) -> Self {
        Self {
            phi: ScalarField::zeros(grid),
            u_r: ScalarField::zeros(grid),
            u_z: ScalarField::zeros(grid),
            div_residual_max: 0.0,
            residual: 0.0,
            iterations: 0,
        }
    }

    pub fn velocity_gradient(&self) -> VelocityGradient {
        VelocityGradient {
            dur_dr: d_dr(&self.u_r),
            dur_dz: d_dz(&self.u_r),
            duz_dr: d_dr(&self.u_z),
            duz_dz: d_dz(&self.u_z),
        }
    }

    /// Sum of two recoveries (superposition).
    pub fn combine(&self, other: &Self) -> Self {
        let u_r = self.u_r.add(&other.u_r);
        let u_z = self.u_z.add(&other.u_z);
        let div = divergence_residual(&u_r, &u_z);
        Self {
            phi: self.phi.add(&other.phi),
            u_r,
            u_z,
            div_residual_max: div,
            residual: self.residual.max(other.residual),
            iterations: self.iterations + other.iterations,
        }
    }
}

/// Fourth-order velocity-gradient fields.
#[derive(Debug, Clone)]
pub struct VelocityGradient {
    pub dur_dr: ScalarField,
    pub dur_dz: ScalarField,
    pub duz_dr: ScalarField,
    pub duz_dz: ScalarField,
}

impl VelocityGradient {
    /// `[[∂_r u^r, ∂_z u^r], [∂_r u^z, ∂_z u^z]]` at `(r, z)`.
    pub fn at(&self, r: f64, z: f64) -> [[f64; 2]; 2] {
        [
            [self.dur_dr.sample(r, z), self.dur_dz.sample(r, z)],
            [self.duz_dr.sample(r, z), self.duz_dz.sample(r, z)],
        ]
    }
}

/// Reusable solver bound to one grid: sine-transform plans, tridiagonal
/// coefficients and a cached boundary-kernel table.
pub struct RecoverySolver {
    grid: Arc<MeridionalGrid>,
    fft: Arc<dyn Fft<f64>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    eig: Vec<f64>,
    table: Option<BoundaryTable>,
    boundary: Vec<BoundaryNode>,
    pub max_iterations: usize,
}

impl RecoverySolver {
    pub fn new(grid: &Arc<MeridionalGrid>) -> Self {
        let g = &**grid;
        let m = g.n_z - 2;
        let fft = FftPlanner::new().plan_fft_forward(2 * (m + 1));
        let inv_dr2 = 1.0 / (g.dr * g.dr);
        let mut lower = vec![0.0; g.n_r];
        let mut upper = vec![0.0; g.n_r];
        for i in 1..g.n_r - 1 {
            let r = g.r(i);
            let rm = r - 0.5 * g.dr;
            let rp = r + 0.5 * g.dr;
            let r3 = r * r * r;
            lower[i] = rm * rm * rm / r3 * inv_dr2;
            upper[i] = rp * rp * rp / r3 * inv_dr2;
        }
        let eig = (1..=m)
            .map(|k| {
                let s = (PI * k as f64 / (2.0 * (m + 1) as f64)).sin();
                -4.0 * s * s / (g.dz * g.dz)
            })
            .collect();
        Self {
            grid: Arc::clone(grid),
            fft,
            lower,
            upper,
            eig,
            table: None,
            boundary: boundary_nodes(g),
            max_iterations: 8,
        }
    }

    pub fn grid(&self) -> &Arc<MeridionalGrid> {
        &self.grid
    }

    /// Discrete `Δ₅φ` at interior nodes (zero on the boundary ring).
    pub fn apply(&self, phi: &[f64]) -> Vec<f64> {
        let g = &*self.grid;
        let nz = g.n_z;
        let inv_dz2 = 1.0 / (g.dz * g.dz);
        let mut out = vec![0.0; g.len()];
        for i in 1..g.n_r - 1 {
            for j in 1..nz - 1 {
                let c = i * nz + j;
                out[c] = self.lower[i] * (phi[c - nz] - phi[c])
                    + self.upper[i] * (phi[c + nz] - phi[c])
                    + (phi[c - 1] - 2.0 * phi[c] + phi[c + 1]) * inv_dz2;
            }
        }
        out
    }

    fn dst_rows(&self, data: &mut [f64]) {
        // DST-I along z for every interior radial row, in place on the interior slots.
        let g = &*self.grid;
        let m = g.n_z - 2;
        let n = 2 * (m + 1);
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        for i in 1..g.n_r - 1 {
            let row = &mut data[i * g.n_z + 1..i * g.n_z + 1 + m];
            buf[0] = Complex::new(0.0, 0.0);
            buf[m + 1] = Complex::new(0.0, 0.0);
            for k in 0..m {
                buf[k + 1] = Complex::new(row[k], 0.0);
                buf[n - 1 - k] = Complex::new(-row[k], 0.0);
            }
            self.fft.process(&mut buf);
            for k in 0..m {
                row[k] = -0.5 * buf[k + 1].im;
            }
        }
    }

    /// Solve `Δ₅φ = f` at interior nodes with the Dirichlet data already in `phi`'s ring.
    fn direct(&self, f: &[f64], phi: &mut [f64]) {
        let g = &*self.grid;
        let nz = g.n_z;
        let m = nz - 2;
        let p = g.n_r - 2;
        let inv_dz2 = 1.0 / (g.dz * g.dz);
        let mut rhs = vec![0.0; g.len()];
        for i in 1..g.n_r - 1 {
            for j in 1..nz - 1 {
                rhs[i * nz + j] = f[i * nz + j];
            }
            rhs[i * nz + 1] -= phi[i * nz] * inv_dz2;
            rhs[i * nz + nz - 2] -= phi[i * nz + nz - 1] * inv_dz2;
        }
        for j in 1..nz - 1 {
            rhs[nz + j] -= self.lower[1] * phi[j];
            let il = g.n_r - 2;
            rhs[il * nz + j] -= self.upper[il] * phi[(il + 1) * nz + j];
        }
        self.dst_rows(&mut rhs);
        // tridiagonal solve per sine mode
        let mut cp = vec![0.0; p];
        let mut dp = vec![0.0; p];
        for k in 0..m {
            let lam = self.eig[k];
            for (t, i) in (1..=p).enumerate() {
                let a = self.lower[i];
                let c = self.upper[i];
                let b = -(a + c) + lam;
                let d = rhs[i * nz + 1 + k];
                if t == 0 {
                    cp[0] = c / b;
                    dp[0] = d / b;
                } else {
                    let den = b - a * cp[t - 1];
                    cp[t] = c / den;
                    dp[t] = (d - a * dp[t - 1]) / den;
                }
            }
            for t in (0..p).rev() {
                let v = if t + 1 < p { dp[t] - cp[t] * dp[t + 1] } else { dp[t] };
                dp[t] = v;
                rhs[(t + 1) * nz + 1 + k] = v;
            }
        }
        self.dst_rows(&mut rhs);
        let scale = 2.0 / (m + 1) as f64;
        for i in 1..g.n_r - 1 {
            for j in 1..nz - 1 {
                phi[i * nz + j] = scale * rhs[i * nz + j];
            }
        }
    }

    /// Whole-space boundary values of the potential of `g`.
    pub fn boundary_potential(&mut self, g: &ScalarField) -> Result<Vec<(usize, usize, f64)>> {
        let grid = Arc::clone(&self.grid);
        let Some((i0, i1, j0, j1)) = g.nonzero_box() else {
            return Ok(self.boundary.iter().map(|n| (n.i, n.j, 0.0)).collect());
        };
        if i0 == 0 || j0 == 0 || i1 == grid.n_r - 1 || j1 == grid.n_z - 1 {
            return Err(Error::SupportTouchesBoundary);
        }
        let fresh = match &self.table {
            Some(t) => !t.covers(i0, i1, j0, j1),
            None => true,
        };
        if fresh {
            let pad = 4;
            let bi0 = i0.saturating_sub(pad).max(1);
            let bi1 = (i1 + pad).min(grid.n_r - 2);
            let bj0 = j0.saturating_sub(pad).max(1);
            let bj1 = (j1 + pad).min(grid.n_z - 2);
            self.table = Some(BoundaryTable::build(&grid, bi0, bi1, bj0, bj1));
        }
        let table = self.table.as_ref().expect("table built");
        Ok(self
            .boundary
            .iter()
            .map(|&n| (n.i, n.j, table.potential(&grid, g, n)))
            .collect())
    }

    /// Solve for the potential only.
    pub fn solve_potential(&mut self, g: &ScalarField, tol: f64) -> Result<(ScalarField, f64, usize)> {
        if tol.is_nan() || tol <= 0.0 {
            return Err(Error::InvalidParameters(format!("tolerance {tol} must be positive")));
        }
        let grid = Arc::clone(&self.grid);
        let scale = g.max_abs();
        if scale == 0.0 {
            return Ok((ScalarField::zeros(&grid), 0.0, 0));
        }
        let mut phi = vec![0.0; grid.len()];
        for (i, j, v) in self.boundary_potential(g)? {
            phi[grid.index(i, j)] = v;
        }
        let minus_g: Vec<f64> = g.values().iter().map(|v| -v).collect();
        self.direct(&minus_g, &mut phi);
        let mut iterations = 1;
        let mut rel = self.relative_residual(&phi, g.values(), scale);
        while rel > tol {
            if iterations >= self.max_iterations {
                return Err(Error::NoConvergence {
                    tol,
                    iterations,
                    residual: rel,
                });
            }
            // defect correction: Δ δ = -(Δφ + G), homogeneous Dirichlet ring
            let lap = self.apply(&phi);
            let defect: Vec<f64> = lap.iter().zip(g.values()).map(|(l, s)| -(l + s)).collect();
            let mut delta = vec![0.0; grid.len()];
            self.direct(&defect, &mut delta);
            for (p, d) in phi.iter_mut().zip(&delta) {
                *p += d;
            }
            iterations += 1;
            rel = self.relative_residual(&phi, g.values(), scale);
        }
        Ok((ScalarField::from_values(&grid, phi)?, rel, iterations))
    }

    fn relative_residual(&self, phi: &[f64], g: &[f64], scale: f64) -> f64 {
        let grid = &*self.grid;
        let lap = self.apply(phi);
        let mut worst = 0.0_f64;
        for i in 1..grid.n_r - 1 {
            for j in 1..grid.n_z - 1 {
                let c = grid.index(i, j);
                worst = worst.max((lap[c] + g[c]).abs());
            }
        }
        worst / scale
    }

    /// Full recovery: potential, velocity, divergence residual.
    pub fn solve(&mut self, g: &ScalarField, tol: f64) -> Result<RecoveryResult> {
        if !Arc::ptr_eq(g.grid_arc(), &self.grid) && **g.grid_arc() != *self.grid {
            return Err(Error::InvalidGrid("source lives on a different grid".into()));
        }
        if g.max_abs() == 0.0 {
            if tol.is_nan() || tol <= 0.0 {
                return Err(Error::InvalidParameters(format!("tolerance {tol} must be positive")));
            }
            return Ok(RecoveryResult::zero(&self.grid));
        }
        let (phi, residual, iterations) = self.solve_potential(g, tol)?;
        let (u_r, u_z) = velocity_from_potential(&phi);
        let div_residual_max = divergence_residual(&u_r, &u_z);
        Ok(RecoveryResult {
            phi,
            u_r,
            u_z,
            div_residual_max,
            residual,
            iterations,
        })
    }
}

/// `u^r = -r ∂_z φ`, `u^z = 2φ + r ∂_r φ` with fourth-order differences.
pub fn velocity_from_potential(phi: &ScalarField) -> (ScalarField, ScalarField) {
    let phi_r = d_dr(phi);
    let phi_z = d_dz(phi);
    let u_r = phi_z.map_nodes(|r, _, v| -r * v);
    let u_z = phi_r.map_nodes(|r, _, v| r * v).add(&phi.scale(2.0));
    (u_r, u_z)
}

/// Max over interior nodes of the centred discrete axisymmetric divergence.
pub fn divergence_residual(u_r: &ScalarField, u_z: &ScalarField) -> f64 {
    let g = u_r.grid();
    let mut worst = 0.0_f64;
    for i in 1..g.n_r - 1 {
        let r = g.r(i);
        let (rm, rp) = (g.r(i - 1), g.r(i + 1));
        for j in 1..g.n_z - 1 {
            let div = (rp * u_r.at(i + 1, j) - rm * u_r.at(i - 1, j)) / (2.0 * g.dr * r)
                + (u_z.at(i, j + 1) - u_z.at(i, j - 1)) / (2.0 * g.dz);
            worst = worst.max(div.abs());
        }
    }
    worst
}

/// One-shot recovery on the source's own grid.
pub fn solve_recovery(g: &ScalarField, tol: f64) -> Result<RecoveryResult> {
    RecoverySolver::new(g.grid_arc()).solve(g, tol)
}

/// Hyperbolic strain `σ = -∂_z u^z` at the packet centre `(r_*, 0)`.
pub fn strain_at_center(result: &RecoveryResult, frame: &PacketFrame) -> Result<f64> {
    strain_from_uz(&result.u_z, frame)
}

/// `σ = -∂_z u^z(r_*, 0)` from a bare `u^z` field.
pub fn strain_from_uz(u_z: &ScalarField, frame: &PacketFrame) -> Result<f64> {
    let g = u_z.grid();
    let margin_r = 2.0 * g.dr;
    let margin_z = 2.0 * g.dz;
    if frame.r_star < g.r_min + margin_r
        || frame.r_star > g.r_max - margin_r
        || g.z_min > -margin_z
        || g.z_max < margin_z
    {
        return Err(Error::OutsideHull {
            r: frame.r_star,
            z: 0.0,
        });
    }
    Ok(-d_dz(u_z).sample(frame.r_star, 0.0))
}

/// Smooth radial partition about the packet centre: 1 inside `R0`, 0 beyond `2 R0`.
pub fn near_weight(frame: &PacketFrame, r0_split: f64, r: f64, z: f64) -> f64 {
    let (x, y) = frame.to_local(r, z);
    bump::plateau(x.hypot(y) / r0_split, 1.0, 2.0)
}

/// Solve the near (`|X| < R0`, smoothly to `2 R0`) and far parts of `g` separately.
pub fn split_exterior_velocity(
    solver: &mut RecoverySolver,
    g: &ScalarField,
    frame: &PacketFrame,
    r0_split: f64,
    tol: f64,
) -> Result<(RecoveryResult, RecoveryResult)> {
    let grid = g.grid();
    let clearance = (frame.r_star - grid.r_min)
        .min(grid.r_max - frame.r_star)
        .min(-grid.z_min)
        .min(grid.z_max);
    if !(r0_split > frame.lambda && r0_split < clearance) {
        return Err(Error::InvalidParameters(format!(
            "split radius {r0_split} must lie in (lambda = {}, boundary clearance = {clearance})",
            frame.lambda
        )));
    }
    let near_src = g.map_nodes(|r, z, v| v * near_weight(frame, r0_split, r, z));
    let far_src = g.zip_with(&near_src, |a, b| a - b);
    let near = solver.solve(&near_src, tol)?;
    let far = solver.solve(&far_src, tol)?;
    Ok((near, far))
}
