//! Meridional grids, grid-sampled scalar fields, packet frames and the
//! finite-difference / interpolation machinery shared by every other module.
//!
//! Fields are stored row-major with the radial index outermost:
//! `values[i * n_z + j]` holds the value at `(r_i, z_j)`.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Uniform tensor grid on `[r_min, r_max] x [z_min, z_max]`, strictly off the axis.
#[derive(Debug, Clone, PartialEq)]
pub struct MeridionalGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub n_r: usize,
    pub n_z: usize,
    pub dr: f64,
    pub dz: f64,
}

impl MeridionalGrid {
    pub const MIN_POINTS: usize = 8;

    pub fn new(r_min: f64, r_max: f64, z_min: f64, z_max: f64, n_r: usize, n_z: usize) -> Result<Self> {
        if !(r_min.is_finite() && r_max.is_finite() && z_min.is_finite() && z_max.is_finite()) {
            return Err(Error::InvalidGrid("non-finite extent".into()));
        }
        if r_min <= 0.0 {
            return Err(Error::InvalidGrid(format!("r_min = {r_min} must be > 0")));
        }
        if r_max <= r_min || z_max <= z_min {
            return Err(Error::InvalidGrid("empty extent".into()));
        }
        if n_r < Self::MIN_POINTS || n_z < Self::MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {} points per axis, got {n_r} x {n_z}",
                Self::MIN_POINTS
            )));
        }
        Ok(Self {
            r_min,
            r_max,
            z_min,
            z_max,
            n_r,
            n_z,
            dr: (r_max - r_min) / (n_r - 1) as f64,
            dz: (z_max - z_min) / (n_z - 1) as f64,
        })
    }

    /// Square-cell grid centred on `(r_c, 0)` with half-widths `half_r`, `half_z`.
    pub fn centered(r_c: f64, half_r: f64, half_z: f64, n_r: usize, n_z: usize) -> Result<Self> {
        Self::new(r_c - half_r, r_c + half_r, -half_z, half_z, n_r, n_z)
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        self.r_min + i as f64 * self.dr
    }

    #[inline]
    pub fn z(&self, j: usize) -> f64 {
        // Evaluated from whichever end is closer so that grids symmetric about
        // z = 0 produce exactly mirrored node coordinates.
        if 2 * j < self.n_z {
            self.z_min + j as f64 * self.dz
        } else {
            self.z_max - (self.n_z - 1 - j) as f64 * self.dz
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_z + j
    }

    pub fn len(&self) -> usize {
        self.n_r * self.n_z
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn h(&self) -> f64 {
        self.dr.max(self.dz)
    }

    pub fn contains(&self, r: f64, z: f64) -> bool {
        r >= self.r_min && r <= self.r_max && z >= self.z_min && z <= self.z_max
    }

    /// True when the node layout is mirror-symmetric about `z = 0`.
    pub fn is_z_symmetric(&self) -> bool {
        (self.z_min + self.z_max).abs() <= 1e-12 * self.z_max.abs().max(1.0)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        (0..self.n_r).flat_map(move |i| (0..self.n_z).map(move |j| (i, j, self.r(i), self.z(j))))
    }
}

/// Axis-aligned rectangle in the meridional plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub r_lo: f64,
    pub r_hi: f64,
    pub z_lo: f64,
    pub z_hi: f64,
}

impl Window {
    pub fn contains(&self, r: f64, z: f64) -> bool {
        r >= self.r_lo && r <= self.r_hi && z >= self.z_lo && z <= self.z_hi
    }

    pub fn strictly_inside(&self, grid: &MeridionalGrid) -> bool {
        self.r_lo > grid.r_min && self.r_hi < grid.r_max && self.z_lo > grid.z_min && self.z_hi < grid.z_max
    }
}

/// Grid-sampled scalar. The grid is shared, never copied.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<MeridionalGrid>,
    values: Vec<f64>,
    support: Option<Window>,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<MeridionalGrid>) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.len()],
            support: None,
        }
    }

    pub fn from_values(grid: &Arc<MeridionalGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("values"));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
            support: None,
        })
    }

    pub fn from_fn(grid: &Arc<MeridionalGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = grid.nodes().map(|(_, _, r, z)| f(r, z)).collect();
        Self {
            grid: Arc::clone(grid),
            values,
            support: None,
        }
    }

    /// Declare a support window: samples outside it are zero.
    pub fn with_support(mut self, window: Window) -> Self {
        self.support = Some(window);
        self
    }

    pub fn support(&self) -> Option<Window> {
        self.support
    }

    pub fn grid(&self) -> &MeridionalGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<MeridionalGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
            support: self.support,
        }
    }

    /// Pointwise `f(r, z, value)`.
    pub fn map_nodes(&self, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let values = self
            .grid
            .nodes()
            .zip(&self.values)
            .map(|((_, _, r, z), &v)| f(r, z, v))
            .collect();
        Self {
            grid: Arc::clone(&self.grid),
            values,
            support: self.support,
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.values.len(), other.values.len());
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
            support: None,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    /// Bounding index box `(i0, i1, j0, j1)` of the nonzero values, inclusive.
    pub fn nonzero_box(&self) -> Option<(usize, usize, usize, usize)> {
        let g = &self.grid;
        let mut bx: Option<(usize, usize, usize, usize)> = None;
        for i in 0..g.n_r {
            let row = &self.values[i * g.n_z..(i + 1) * g.n_z];
            let first = row.iter().position(|v| *v != 0.0);
            if let Some(j0) = first {
                let j1 = row.iter().rposition(|v| *v != 0.0).unwrap_or(j0);
                bx = Some(match bx {
                    None => (i, i, j0, j1),
                    Some((a, _, c, d)) => (a, i, c.min(j0), d.max(j1)),
                });
            }
        }
        bx
    }

    /// Bicubic (tensor 4-point Lagrange) interpolant; zero outside the hull
    /// and outside the declared support window.
    pub fn sample(&self, r: f64, z: f64) -> f64 {
        if !(r.is_finite() && z.is_finite()) || !self.grid.contains(r, z) {
            return 0.0;
        }
        if let Some(w) = &self.support {
            if !w.contains(r, z) {
                return 0.0;
            }
        }
        let g = &*self.grid;
        let (i0, wr) = stencil((r - g.r_min) / g.dr, g.n_r);
        let (j0, wz) = stencil((z - g.z_min) / g.dz, g.n_z);
        let mut acc = 0.0;
        for (a, wa) in wr.iter().enumerate() {
            let base = (i0 + a) * g.n_z + j0;
            let row = &self.values[base..base + 4];
            acc += wa * (wz[0] * row[0] + wz[1] * row[1] + wz[2] * row[2] + wz[3] * row[3]);
        }
        acc
    }
}

/// Four-node Lagrange stencil covering fractional index `s` on `n` nodes.
#[inline]
fn stencil(s: f64, n: usize) -> (usize, [f64; 4]) {
    let k = s.floor() as isize - 1;
    let i0 = k.clamp(0, n as isize - 4) as usize;
    let t = s - i0 as f64;
    // nodes at 0, 1, 2, 3
    let w0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
    let w1 = t * (t - 2.0) * (t - 3.0) / 2.0;
    let w2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
    let w3 = t * (t - 1.0) * (t - 2.0) / 6.0;
    (i0, [w0, w1, w2, w3])
}

/// Fourth-order first derivative along one axis of a strided line.
fn diff_line(src: &[f64], dst: &mut [f64], n: usize, stride: usize, h: f64) {
    let f = |k: usize| src[k * stride];
    let inv = 1.0 / (12.0 * h);
    dst[0] = (-25.0 * f(0) + 48.0 * f(1) - 36.0 * f(2) + 16.0 * f(3) - 3.0 * f(4)) * inv;
    dst[stride] = (-3.0 * f(0) - 10.0 * f(1) + 18.0 * f(2) - 6.0 * f(3) + f(4)) * inv;
    for k in 2..n - 2 {
        dst[k * stride] = (f(k - 2) - 8.0 * f(k - 1) + 8.0 * f(k + 1) - f(k + 2)) * inv;
    }
    let m = n - 1;
    dst[(m - 1) * stride] = (3.0 * f(m) + 10.0 * f(m - 1) - 18.0 * f(m - 2) + 6.0 * f(m - 3) - f(m - 4)) * inv;
    dst[m * stride] = (25.0 * f(m) - 48.0 * f(m - 1) + 36.0 * f(m - 2) - 16.0 * f(m - 3) + 3.0 * f(m - 4)) * inv;
}

/// `d/dr` of a field: fourth-order centred in the interior, one-sided at edges.
pub fn d_dr(field: &ScalarField) -> ScalarField {
    let g = field.grid();
    let mut out = vec![0.0; g.len()];
    for j in 0..g.n_z {
        diff_line(&field.values[j..], &mut out[j..], g.n_r, g.n_z, g.dr);
    }
    ScalarField {
        grid: Arc::clone(&field.grid),
        values: out,
        support: None,
    }
}

/// `d/dz` of a field.
pub fn d_dz(field: &ScalarField) -> ScalarField {
    let g = field.grid();
    let mut out = vec![0.0; g.len()];
    for i in 0..g.n_r {
        let s = i * g.n_z;
        diff_line(&field.values[s..s + g.n_z], &mut out[s..s + g.n_z], g.n_z, 1, g.dz);
    }
    ScalarField {
        grid: Arc::clone(&field.grid),
        values: out,
        support: None,
    }
}

/// `(d/dr, d/dz)` of a field.
pub fn gradient(field: &ScalarField) -> (ScalarField, ScalarField) {
    (d_dr(field), d_dz(field))
}

/// Tracked packet centre and scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketFrame {
    pub r_star: f64,
    pub lambda: f64,
    pub t: f64,
}

impl PacketFrame {
    pub fn new(r_star: f64, lambda: f64, t: f64) -> Result<Self> {
        let f = Self { r_star, lambda, t };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_star.is_finite() && self.lambda.is_finite() && self.t.is_finite()) {
            return Err(Error::InvalidFrame("non-finite frame".into()));
        }
        if self.r_star <= 0.0 || self.lambda <= 0.0 {
            return Err(Error::InvalidFrame(format!(
                "r_star = {}, lambda = {} must be positive",
                self.r_star, self.lambda
            )));
        }
        if self.lambda / self.r_star >= 0.5 {
            return Err(Error::InvalidFrame(format!(
                "lambda / r_star = {} is not below 1/2",
                self.lambda / self.r_star
            )));
        }
        Ok(())
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_ok()
    }

    #[inline]
    pub fn to_local(&self, r: f64, z: f64) -> (f64, f64) {
        (r - self.r_star, z)
    }

    #[inline]
    pub fn from_local(&self, x: f64, y: f64) -> (f64, f64) {
        (x + self.r_star, y)
    }

    /// Radial localization ratio `lambda / r_star`.
    pub fn rho(&self) -> f64 {
        self.lambda / self.r_star
    }
}

/// Sample `field` at local packet coordinates.
pub fn sample_local(field: &ScalarField, frame: &PacketFrame, x: f64, y: f64) -> f64 {
    let (r, z) = frame.from_local(x, y);
    field.sample(r, z)
}

/// Axisymmetric velocity with swirl.
#[derive(Debug, Clone)]
pub struct VelocityField {
    pub u_r: ScalarField,
    pub u_z: ScalarField,
    pub u_theta: ScalarField,
}

impl VelocityField {
    pub fn max_meridional_speed(&self) -> f64 {
        self.u_r
            .values()
            .iter()
            .zip(self.u_z.values())
            .fold(0.0_f64, |m, (a, b)| m.max(a.hypot(*b)))
    }
}
