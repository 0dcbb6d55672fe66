//! Grids, transforms and shearing-frame symbols.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Periodic box and resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    pub lx: f64,
    pub ly: f64,
    pub lz: f64,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            lx: 1.0,
            ly: 2.0,
            lz: 1.0,
            nx: 48,
            ny: 48,
            nz: 48,
        }
    }
}

impl DomainConfig {
    pub fn cube(n: usize, l: f64) -> Self {
        Self {
            lx: l,
            ly: l,
            lz: l,
            nx: n,
            ny: n,
            nz: n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lx", self.lx), ("ly", self.ly), ("lz", self.lz)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("domain.{name} must be positive, got {v}")));
            }
        }
        for (name, n) in [("nx", self.nx), ("ny", self.ny), ("nz", self.nz)] {
            if n < 4 || n % 2 != 0 {
                return Err(Error::Config(format!(
                    "domain.{name} must be even and at least 4, got {n}"
                )));
            }
        }
        if rational_approx(self.lx / self.ly, 1000, 1e-9).is_none() {
            return Err(Error::Config(format!(
                "lx/ly = {} is not a ratio of integers below 1000",
                self.lx / self.ly
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        self.validate()?;
        Grid::new(self.nx, self.ny, self.nz, self.lx, self.ly, self.lz)
    }
}

/// Best rational approximation p/q of `x` with q <= `max_den`, if within `rel_tol`.
pub fn rational_approx(x: f64, max_den: u64, rel_tol: f64) -> Option<(u64, u64)> {
    if !(x.is_finite() && x > 0.0) {
        return None;
    }
    let (mut h0, mut h1) = (0u64, 1u64);
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a > 1e12 {
            break;
        }
        let a = a as u64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > max_den {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if ((h1 as f64 / k1 as f64) - x).abs() <= rel_tol * x {
            return Some((h1, k1));
        }
        let frac = r - r.floor();
        if frac < 1e-15 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}

/// Which coordinates a spectral field is expressed in.
///
/// In the shearing frame the stored y-index `n` of a mode with x-index `m`
/// carries the frame wavenumber `2π(n + m·remaps)/ly`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    Lab,
    Shearing { remaps: u64 },
}

impl Frame {
    pub fn shearing() -> Self {
        Frame::Shearing { remaps: 0 }
    }

    pub fn remaps(&self) -> u64 {
        match self {
            Frame::Lab => 0,
            Frame::Shearing { remaps } => *remaps,
        }
    }
}

/// A wavenumber (k, η, l).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTriple {
    pub k: f64,
    pub eta: f64,
    pub l: f64,
}

impl FrequencyTriple {
    pub const fn new(k: f64, eta: f64, l: f64) -> Self {
        Self { k, eta, l }
    }

    pub fn norm(&self) -> f64 {
        (self.k * self.k + self.eta * self.eta + self.l * self.l).sqrt()
    }
}

impl fmt::Display for FrequencyTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.k, self.eta, self.l)
    }
}

/// Symbol of the shearing-frame Laplacian, k² + (η − kt)² + l².
#[inline]
pub fn laplacian_l_symbol(xi: &FrequencyTriple, t: f64) -> f64 {
    let e = xi.eta - xi.k * t;
    xi.k * xi.k + e * e + xi.l * xi.l
}

/// Index space of a periodic box. `nx == 1` gives an x-independent (y, z) plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub lx: f64,
    pub ly: f64,
    pub lz: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, nz: usize, lx: f64, ly: f64, lz: f64) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::Config(format!("empty grid {nx}x{ny}x{nz}")));
        }
        if !(lx > 0.0 && ly > 0.0 && lz > 0.0) {
            return Err(Error::Config(format!("non-positive box {lx}x{ly}x{lz}")));
        }
        Ok(Self {
            nx,
            ny,
            nz,
            lx,
            ly,
            lz,
        })
    }

    pub fn plane(ny: usize, nz: usize, ly: f64, lz: f64) -> Result<Self> {
        Self::new(1, ny, nz, 1.0, ly, lz)
    }

    /// The k = 0 plane of this grid.
    pub fn zero_plane(&self) -> Grid {
        Grid {
            nx: 1,
            lx: 1.0,
            ..*self
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn volume(&self) -> f64 {
        self.lx * self.ly * self.lz
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, p: usize) -> usize {
        (i * self.ny + j) * self.nz + p
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> (usize, usize, usize) {
        let p = idx % self.nz;
        let r = idx / self.nz;
        (r / self.ny, r % self.ny, p)
    }

    /// Storage offset to signed mode number in [−n/2, n/2).
    #[inline]
    pub fn signed(i: usize, n: usize) -> i64 {
        if i < n.div_ceil(2) || n == 1 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// Signed mode number to storage offset.
    #[inline]
    pub fn offset(m: i64, n: usize) -> usize {
        m.rem_euclid(n as i64) as usize
    }

    #[inline]
    pub fn mode(&self, idx: usize) -> (i64, i64, i64) {
        let (i, j, p) = self.unravel(idx);
        (
            Self::signed(i, self.nx),
            Self::signed(j, self.ny),
            Self::signed(p, self.nz),
        )
    }

    /// Index of a signed mode, if it lies on the grid.
    pub fn mode_index(&self, m: i64, n: i64, p: i64) -> Option<usize> {
        let inside = |v: i64, len: usize| {
            let h = (len / 2) as i64;
            if len == 1 {
                v == 0
            } else {
                v >= -h && v < len as i64 - h
            }
        };
        if inside(m, self.nx) && inside(n, self.ny) && inside(p, self.nz) {
            Some(self.index(
                Self::offset(m, self.nx),
                Self::offset(n, self.ny),
                Self::offset(p, self.nz),
            ))
        } else {
            None
        }
    }

    #[inline]
    pub fn neg_index(&self, idx: usize) -> usize {
        let (i, j, p) = self.unravel(idx);
        self.index(
            (self.nx - i) % self.nx,
            (self.ny - j) % self.ny,
            (self.nz - p) % self.nz,
        )
    }

    #[inline]
    pub fn kx(&self, m: i64) -> f64 {
        2.0 * PI * m as f64 / self.lx
    }

    #[inline]
    pub fn ky(&self, n: i64) -> f64 {
        2.0 * PI * n as f64 / self.ly
    }

    #[inline]
    pub fn kz(&self, p: i64) -> f64 {
        2.0 * PI * p as f64 / self.lz
    }

    /// Largest retained |mode| per axis under the two-thirds rule (3M < N).
    pub fn dealias_cutoffs(&self) -> [i64; 3] {
        let c = |n: usize| ((n as i64) - 1) / 3;
        [c(self.nx), c(self.ny), c(self.nz)]
    }

    #[inline]
    pub fn retained(&self, m: i64, n: i64, p: i64) -> bool {
        let c = self.dealias_cutoffs();
        m.abs() <= c[0] && n.abs() <= c[1] && p.abs() <= c[2]
    }

    /// Shear time after which the y-index shifts by exactly one slot per unit x-mode.
    pub fn remap_interval(&self) -> f64 {
        self.lx / self.ly
    }

    /// Frame wavenumber of storage index `idx`.
    #[inline]
    pub fn frequency(&self, idx: usize, frame: Frame) -> FrequencyTriple {
        let (m, n, p) = self.mode(idx);
        self.frequency_of(m, n, p, frame)
    }

    #[inline]
    pub fn frequency_of(&self, m: i64, n: i64, p: i64, frame: Frame) -> FrequencyTriple {
        let shift = m * frame.remaps() as i64;
        FrequencyTriple::new(self.kx(m), self.ky(n + shift), self.kz(p))
    }

    /// Effective gradient symbol (k, η − kt, l) at time `t`.
    #[inline]
    pub fn wavevector(&self, idx: usize, frame: Frame, t: f64) -> [f64; 3] {
        let xi = self.frequency(idx, frame);
        match frame {
            Frame::Lab => [xi.k, xi.eta, xi.l],
            Frame::Shearing { .. } => [xi.k, xi.eta - xi.k * t, xi.l],
        }
    }

    /// Grid spacings.
    pub fn spacing(&self) -> [f64; 3] {
        [
            self.lx / self.nx as f64,
            self.ly / self.ny as f64,
            self.lz / self.nz as f64,
        ]
    }

    /// Physical sample coordinates of point (i, j, p).
    pub fn point(&self, i: usize, j: usize, p: usize) -> [f64; 3] {
        let h = self.spacing();
        [i as f64 * h[0], j as f64 * h[1], p as f64 * h[2]]
    }
}

/// Complex coefficients of a real scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub grid: Grid,
    pub frame: Frame,
    pub t: f64,
    pub data: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: Grid, frame: Frame, t: f64) -> Self {
        Self {
            grid,
            frame,
            t,
            data: vec![ZERO; grid.len()],
        }
    }

    pub fn from_modes(
        grid: Grid,
        frame: Frame,
        t: f64,
        f: impl Fn(i64, i64, i64) -> Complex64,
    ) -> Self {
        let data = (0..grid.len())
            .map(|idx| {
                let (m, n, p) = grid.mode(idx);
                f(m, n, p)
            })
            .collect();
        Self {
            grid,
            frame,
            t,
            data,
        }
    }

    pub fn get(&self, m: i64, n: i64, p: i64) -> Complex64 {
        self.grid.mode_index(m, n, p).map_or(ZERO, |i| self.data[i])
    }

    pub fn set(&mut self, m: i64, n: i64, p: i64, v: Complex64) {
        if let Some(i) = self.grid.mode_index(m, n, p) {
            self.data[i] = v;
        }
    }

    /// Sum of |f̂|², the squared L² norm under the averaged measure.
    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// max |f̂(ξ) − conj f̂(−ξ)|.
    pub fn hermitian_defect(&self) -> f64 {
        hermitian_defect(&self.grid, &self.data)
    }

    pub fn dealias(&mut self) {
        dealias_in_place(&self.grid, &mut self.data);
    }

    pub fn dealiased(&self) -> Self {
        let mut out = self.clone();
        out.dealias();
        out
    }

    pub fn x_average(&self) -> Self {
        let mut out = self.clone();
        zero_where(&self.grid, &mut out.data, |m| m != 0);
        out
    }

    pub fn nonzero_part(&self) -> Self {
        let mut out = self.clone();
        zero_where(&self.grid, &mut out.data, |m| m == 0);
        out
    }
}

/// Three coefficient arrays (u¹, u², u³) sharing one grid, frame and time.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralVectorField {
    pub grid: Grid,
    pub frame: Frame,
    pub t: f64,
    pub comps: [Vec<Complex64>; 3],
    pub div_free: bool,
}

impl SpectralVectorField {
    pub fn zeros(grid: Grid, frame: Frame, t: f64) -> Self {
        Self {
            grid,
            frame,
            t,
            comps: [vec![ZERO; grid.len()], vec![ZERO; grid.len()], vec![ZERO; grid.len()]],
            div_free: true,
        }
    }

    pub fn from_components(c: [SpectralField; 3]) -> Result<Self> {
        let [a, b, d] = c;
        if a.grid != b.grid || a.grid != d.grid || a.frame != b.frame || a.frame != d.frame {
            return Err(Error::DimensionMismatch {
                expected: format!("{:?}", a.grid.shape()),
                found: format!("{:?} / {:?}", b.grid.shape(), d.grid.shape()),
            });
        }
        Ok(Self {
            grid: a.grid,
            frame: a.frame,
            t: a.t,
            comps: [a.data, b.data, d.data],
            div_free: false,
        })
    }

    pub fn component(&self, i: usize) -> SpectralField {
        SpectralField {
            grid: self.grid,
            frame: self.frame,
            t: self.t,
            data: self.comps[i].clone(),
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.comps
            .iter()
            .map(|c| c.iter().map(|v| v.norm_sqr()).sum::<f64>())
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|v| *v == ZERO))
    }

    pub fn scale(&mut self, s: f64) {
        for c in self.comps.iter_mut() {
            c.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn hermitian_defect(&self) -> f64 {
        self.comps
            .iter()
            .map(|c| hermitian_defect(&self.grid, c))
            .fold(0.0, f64::max)
    }

    /// Leray projection with the gradient symbol of the field's frame at its time.
    pub fn project_div_free(&mut self) {
        let (grid, frame, t) = (self.grid, self.frame, self.t);
        let [a, b, c] = &mut self.comps;
        project_slices(&grid, frame, t, a, b, c);
        self.div_free = true;
    }

    pub fn projected(&self) -> Self {
        let mut out = self.clone();
        out.project_div_free();
        out
    }

    /// max over modes of |K·û(ξ)| / |K|, relative to the field's ℓ² norm.
    pub fn divergence_residual(&self) -> f64 {
        let norm = self.norm_sq().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for idx in 0..self.grid.len() {
            let kv = self.grid.wavevector(idx, self.frame, self.t);
            let k2 = kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2];
            if k2 == 0.0 {
                continue;
            }
            let d = self.comps[0][idx] * kv[0]
                + self.comps[1][idx] * kv[1]
                + self.comps[2][idx] * kv[2];
            worst = worst.max(d.norm() / k2.sqrt());
        }
        worst / norm
    }

    pub fn dealias(&mut self) {
        for c in self.comps.iter_mut() {
            dealias_in_place(&self.grid, c);
        }
    }

    pub fn x_average(&self) -> Self {
        let mut out = self.clone();
        for c in out.comps.iter_mut() {
            zero_where(&self.grid, c, |m| m != 0);
        }
        out
    }

    pub fn nonzero_part(&self) -> Self {
        let mut out = self.clone();
        for c in out.comps.iter_mut() {
            zero_where(&self.grid, c, |m| m == 0);
        }
        out
    }
}

/// In-place Leray projection of three coefficient slices; the K = 0 mode passes through.
pub fn project_slices(
    grid: &Grid,
    frame: Frame,
    t: f64,
    a: &mut [Complex64],
    b: &mut [Complex64],
    c: &mut [Complex64],
) {
    a.par_iter_mut()
        .zip(b.par_iter_mut())
        .zip(c.par_iter_mut())
        .enumerate()
        .for_each(|(idx, ((ua, ub), uc))| {
            let kv = grid.wavevector(idx, frame, t);
            let k2 = kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2];
            if k2 == 0.0 {
                return;
            }
            let d = (*ua * kv[0] + *ub * kv[1] + *uc * kv[2]) / k2;
            *ua -= d * kv[0];
            *ub -= d * kv[1];
            *uc -= d * kv[2];
        });
}

pub fn dealias_in_place(grid: &Grid, data: &mut [Complex64]) {
    let g = *grid;
    data.par_iter_mut().enumerate().for_each(|(idx, v)| {
        let (m, n, p) = g.mode(idx);
        if !g.retained(m, n, p) {
            *v = ZERO;
        }
    });
}

fn zero_where(grid: &Grid, data: &mut [Complex64], pred: impl Fn(i64) -> bool) {
    let plane = grid.ny * grid.nz;
    for (i, chunk) in data.chunks_mut(plane).enumerate() {
        if pred(Grid::signed(i, grid.nx)) {
            chunk.iter_mut().for_each(|v| *v = ZERO);
        }
    }
}

pub fn hermitian_defect(grid: &Grid, data: &[Complex64]) -> f64 {
    (0..grid.len())
        .map(|idx| (data[idx] - data[grid.neg_index(idx)].conj()).norm())
        .fold(0.0, f64::max)
}

/// Symmetrize so that f̂(−ξ) = conj f̂(ξ) exactly.
pub fn enforce_hermitian(grid: &Grid, data: &mut [Complex64]) {
    for idx in 0..grid.len() {
        let j = grid.neg_index(idx);
        if j < idx {
            continue;
        }
        let v = 0.5 * (data[idx] + data[j].conj());
        data[idx] = v;
        data[j] = v.conj();
    }
}

/// 3D FFT engine for one grid shape. Forward transforms return averaged
/// coefficients (the constant field 1 maps to coefficient 1).
#[derive(Clone)]
pub struct Transform {
    grid: Grid,
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
}

impl fmt::Debug for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Transform").field("grid", &self.grid).finish()
    }
}

impl Transform {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::<f64>::new();
        let s = grid.shape();
        let fwd = [
            planner.plan_fft_forward(s[0]),
            planner.plan_fft_forward(s[1]),
            planner.plan_fft_forward(s[2]),
        ];
        let inv = [
            planner.plan_fft_inverse(s[0]),
            planner.plan_fft_inverse(s[1]),
            planner.plan_fft_inverse(s[2]),
        ];
        Self { grid, fwd, inv }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.grid.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} samples", self.grid.len()),
                found: format!("{n} samples"),
            });
        }
        Ok(())
    }

    pub fn forward(&self, samples: &[f64], frame: Frame, t: f64) -> Result<SpectralField> {
        self.check_len(samples.len())?;
        let mut data: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fft(&mut data, false);
        let s = 1.0 / self.grid.len() as f64;
        data.iter_mut().for_each(|v| *v *= s);
        Ok(SpectralField {
            grid: self.grid,
            frame,
            t,
            data,
        })
    }

    pub fn inverse(&self, field: &SpectralField) -> Result<Vec<f64>> {
        Ok(self.inverse_complex(field)?.into_iter().map(|c| c.re).collect())
    }

    pub fn inverse_complex(&self, field: &SpectralField) -> Result<Vec<Complex64>> {
        if field.grid.shape() != self.grid.shape() {
            return Err(Error::DimensionMismatch {
                expected: format!("{:?}", self.grid.shape()),
                found: format!("{:?}", field.grid.shape()),
            });
        }
        let mut data = field.data.clone();
        self.fft(&mut data, true);
        Ok(data)
    }

    /// Two real fields forward with one complex transform.
    pub fn forward_pair(&self, a: &[f64], b: &[f64], out_a: &mut [Complex64], out_b: &mut [Complex64]) {
        let g = self.grid;
        let mut c: Vec<Complex64> = a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect();
        self.fft(&mut c, false);
        let s = 0.5 / g.len() as f64;
        out_a
            .par_iter_mut()
            .zip(out_b.par_iter_mut())
            .enumerate()
            .for_each(|(idx, (oa, ob))| {
                let p = c[idx];
                let q = c[g.neg_index(idx)].conj();
                *oa = (p + q) * s;
                let d = (p - q) * s;
                *ob = Complex64::new(d.im, -d.re);
            });
    }

    /// Two Hermitian spectra back to real samples with one complex transform.
    pub fn inverse_pair(&self, a: &[Complex64], b: &[Complex64], out_a: &mut [f64], out_b: &mut [f64]) {
        let mut c: Vec<Complex64> = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| x + Complex64::new(-y.im, y.re))
            .collect();
        self.fft(&mut c, true);
        for ((v, oa), ob) in c.iter().zip(out_a.iter_mut()).zip(out_b.iter_mut()) {
            *oa = v.re;
            *ob = v.im;
        }
    }

    /// Unnormalized in-place 3D transform.
    pub fn fft(&self, data: &mut [Complex64], inverse: bool) {
        let [n0, n1, n2] = self.grid.shape();
        let plans = if inverse { &self.inv } else { &self.fwd };
        let plane = n1 * n2;
        if n2 > 1 {
            let plan = &plans[2];
            data.par_chunks_mut(plane).for_each(|chunk| {
                let mut scratch = vec![ZERO; plan.get_inplace_scratch_len()];
                plan.process_with_scratch(chunk, &mut scratch);
            });
        }
        if n1 > 1 {
            let plan = &plans[1];
            data.par_chunks_mut(plane).for_each(|chunk| {
                let mut buf = vec![ZERO; plane];
                let mut scratch = vec![ZERO; plan.get_inplace_scratch_len()];
                transpose(chunk, &mut buf, n1, n2);
                plan.process_with_scratch(&mut buf, &mut scratch);
                transpose(&buf, chunk, n2, n1);
            });
        }
        if n0 > 1 {
            let plan = &plans[0];
            let mut buf = vec![ZERO; data.len()];
            transpose(data, &mut buf, n0, plane);
            let lines = (plane / rayon::current_num_threads().max(1)).max(1) * n0;
            buf.par_chunks_mut(lines).for_each(|chunk| {
                let mut scratch = vec![ZERO; plan.get_inplace_scratch_len()];
                plan.process_with_scratch(chunk, &mut scratch);
            });
            transpose(&buf, data, plane, n0);
        }
    }
}

/// Row-major `rows × cols` into `cols × rows`.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const B: usize = 16;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid {
        Grid::new(n, n, n, 1.0, 2.0, 1.0).unwrap()
    }

    #[test]
    fn signed_offsets_round_trip() {
        for n in [1usize, 4, 5, 8] {
            for i in 0..n {
                assert_eq!(Grid::offset(Grid::signed(i, n), n), i);
            }
        }
        assert_eq!(Grid::signed(4, 8), -4);
        assert_eq!(Grid::signed(3, 8), 3);
    }

    #[test]
    fn dealias_cutoff_is_strict_two_thirds() {
        let g = Grid::new(48, 8, 64, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(g.dealias_cutoffs(), [15, 2, 21]);
        assert_eq!(g.zero_plane().dealias_cutoffs()[0], 0);
    }

    #[test]
    fn rational_ratio_detection() {
        assert_eq!(rational_approx(0.5, 1000, 1e-9), Some((1, 2)));
        assert_eq!(rational_approx(1.5, 1000, 1e-9), Some((3, 2)));
        assert!(rational_approx(std::f64::consts::PI / 3.0, 1000, 1e-9).is_none());
    }

    #[test]
    fn domain_validation() {
        assert!(DomainConfig::default().validate().is_ok());
        let bad = DomainConfig {
            nx: 6 + 1,
            ..DomainConfig::default()
        };
        assert!(bad.validate().is_err());
        let tiny = DomainConfig {
            ny: 2,
            ..DomainConfig::default()
        };
        assert!(tiny.validate().is_err());
    }

    #[test]
    fn neg_index_is_involution() {
        let g = grid(6);
        for idx in 0..g.len() {
            assert_eq!(g.neg_index(g.neg_index(idx)), idx);
            let (m, n, p) = g.mode(idx);
            let (a, b, c) = g.mode(g.neg_index(idx));
            for (x, y, len) in [(m, a, 6), (n, b, 6), (p, c, 6)] {
                assert_eq!((x + y).rem_euclid(len), 0);
            }
        }
    }

    #[test]
    fn pair_transform_matches_single() {
        let g = Grid::new(4, 6, 8, 1.0, 2.0, 3.0).unwrap();
        let tr = Transform::new(g);
        let a: Vec<f64> = (0..g.len()).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let b: Vec<f64> = (0..g.len()).map(|i| ((i * 5) % 13) as f64 * 0.3).collect();
        let fa = tr.forward(&a, Frame::Lab, 0.0).unwrap();
        let fb = tr.forward(&b, Frame::Lab, 0.0).unwrap();
        let mut pa = vec![ZERO; g.len()];
        let mut pb = vec![ZERO; g.len()];
        tr.forward_pair(&a, &b, &mut pa, &mut pb);
        for i in 0..g.len() {
            assert!((pa[i] - fa.data[i]).norm() < 1e-13);
            assert!((pb[i] - fb.data[i]).norm() < 1e-13);
        }
        let mut ra = vec![0.0; g.len()];
        let mut rb = vec![0.0; g.len()];
        tr.inverse_pair(&pa, &pb, &mut ra, &mut rb);
        for i in 0..g.len() {
            assert!((ra[i] - a[i]).abs() < 1e-12);
            assert!((rb[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn shearing_frame_wavenumber_tracks_remaps() {
        let g = grid(8);
        let idx = g.mode_index(1, 1, 0).unwrap();
        let xi = g.frequency(idx, Frame::Shearing { remaps: 2 });
        assert!((xi.eta - g.ky(3)).abs() < 1e-14);
        let kv = g.wavevector(idx, Frame::Shearing { remaps: 0 }, 0.25);
        assert!((kv[1] - (g.ky(1) - g.kx(1) * 0.25)).abs() < 1e-14);
    }
}
