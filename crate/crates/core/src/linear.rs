//! Per-mode closed-form evolution of the linearized perturbation equations.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::sobolev_weight;
use crate::error::{Error, Result};
use crate::spectral::{laplacian_l_symbol, Frame, FrequencyTriple, SpectralVectorField};

/// ν∫ₐ^{a+Δ}(k² + (e − kτ)² + l²)dτ where `e` is the effective η at the start.
#[inline]
pub fn dissipation_increment(k: f64, e: f64, l: f64, nu: f64, dt: f64) -> f64 {
    nu * ((k * k + l * l + e * e) * dt - e * k * dt * dt + k * k * dt * dt * dt / 3.0)
}

/// Φ(t; ξ, ν) = ν∫₀ᵗ(k² + (η − kτ)² + l²)dτ.
#[inline]
pub fn dissipation_integral(xi: &FrequencyTriple, nu: f64, t: f64) -> f64 {
    dissipation_increment(xi.k, xi.eta, xi.l, nu, t)
}

/// Heat-decayed zero modes with lift-up: û¹₀(t) = e^{−νt(η²+l²)}(û¹ − tû²).
pub fn evolve_zero_modes(u_in: &SpectralVectorField, t: f64, nu: f64) -> Result<SpectralVectorField> {
    let g = u_in.grid;
    let mut out = u_in.clone();
    for idx in 0..g.len() {
        let xi = g.frequency(idx, u_in.frame);
        if xi.k != 0.0 {
            if u_in.comps.iter().any(|c| c[idx] != Complex64::new(0.0, 0.0)) {
                return Err(Error::Config(
                    "evolve_zero_modes requires x-independent data".into(),
                ));
            }
            continue;
        }
        let heat = (-nu * t * (xi.eta * xi.eta + xi.l * xi.l)).exp();
        let (a, b, c) = (u_in.comps[0][idx], u_in.comps[1][idx], u_in.comps[2][idx]);
        out.comps[0][idx] = heat * (a - b * t);
        out.comps[1][idx] = heat * b;
        out.comps[2][idx] = heat * c;
    }
    out.t = u_in.t + t;
    Ok(out)
}

/// q̂²(t) = e^{−Φ(t)} q̂²_in, for k ≠ 0.
pub fn evolve_q2(q2_in: Complex64, t: f64, xi: &FrequencyTriple, nu: f64) -> Complex64 {
    q2_in * (-dissipation_integral(xi, nu, t)).exp()
}

/// û² = q̂² / (k² + (η − kt)² + l²).
pub fn recover_u2(q2: Complex64, xi: &FrequencyTriple, t: f64) -> Complex64 {
    q2 / laplacian_l_symbol(xi, t)
}

/// Forcing kernels of û¹ and û³ per unit q̂²_in once the integrating factor
/// has cancelled the decay of û²: (−1/|K|² + 2k²/|K|⁴, 2kl/|K|⁴).
#[inline]
fn forcing_kernels(xi: &FrequencyTriple, s: f64) -> (f64, f64) {
    let lap = laplacian_l_symbol(xi, s);
    let inv = 1.0 / lap;
    (-inv + 2.0 * xi.k * xi.k * inv * inv, 2.0 * xi.k * xi.l * inv * inv)
}

/// Composite Simpson of the forcing kernels over [a, b] with at most `h` spacing.
fn simpson_kernels(xi: &FrequencyTriple, a: f64, b: f64, h: f64) -> (f64, f64) {
    if b <= a {
        return (0.0, 0.0);
    }
    let mut n = ((b - a) / h).ceil() as usize;
    n = n.max(2);
    if n % 2 == 1 {
        n += 1;
    }
    let dx = (b - a) / n as f64;
    let (mut s1, mut s3) = (0.0, 0.0);
    for i in 0..=n {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let (f1, f3) = forcing_kernels(xi, a + i as f64 * dx);
        s1 += w * f1;
        s3 += w * f3;
    }
    (s1 * dx / 3.0, s3 * dx / 3.0)
}

/// (û¹(t), û³(t)) = e^{−Φ(t)}[û_in + ∫₀ᵗ e^{Φ(s)}F(s)ds], Simpson at spacing `quad_dt`.
pub fn evolve_u13(
    u_in: [Complex64; 3],
    xi: &FrequencyTriple,
    t: f64,
    nu: f64,
    quad_dt: f64,
) -> Result<(Complex64, Complex64)> {
    if !(quad_dt > 0.0 && quad_dt.is_finite()) {
        return Err(Error::Quadrature {
            a: 0.0,
            b: t,
            msg: format!("quadrature step must be positive, got {quad_dt}"),
        });
    }
    if xi.k == 0.0 {
        return Err(Error::Config("evolve_u13 requires k != 0".into()));
    }
    let q2 = u_in[1] * laplacian_l_symbol(xi, 0.0);
    let (i1, i3) = simpson_kernels(xi, 0.0, t, quad_dt);
    let decay = (-dissipation_integral(xi, nu, t)).exp();
    Ok((decay * (u_in[0] + q2 * i1), decay * (u_in[2] + q2 * i3)))
}

/// As [`evolve_u13`], rejecting the step when a half-step Richardson estimate exceeds `tol`.
pub fn evolve_u13_checked(
    u_in: [Complex64; 3],
    xi: &FrequencyTriple,
    t: f64,
    nu: f64,
    quad_dt: f64,
    tol: f64,
) -> Result<(Complex64, Complex64)> {
    let coarse = evolve_u13(u_in, xi, t, nu, quad_dt)?;
    let fine = evolve_u13(u_in, xi, t, nu, 0.5 * quad_dt)?;
    let est = ((fine.0 - coarse.0).norm() + (fine.1 - coarse.1).norm()) / 15.0;
    if est > tol {
        return Err(Error::Quadrature {
            a: 0.0,
            b: t,
            msg: format!("step {quad_dt} too large: estimated error {est:e} > {tol:e}"),
        });
    }
    Ok(fine)
}

/// Exact linear solution of one k ≠ 0 mode, advanced along an increasing time grid.
#[derive(Debug, Clone)]
pub struct LinearMode {
    pub xi: FrequencyTriple,
    pub u_in: [Complex64; 3],
    q2: Complex64,
    t: f64,
    acc: (f64, f64),
    quad_dt: f64,
}

impl LinearMode {
    pub fn new(xi: FrequencyTriple, u_in: [Complex64; 3], quad_dt: f64) -> Self {
        Self {
            xi,
            u_in,
            q2: u_in[1] * laplacian_l_symbol(&xi, 0.0),
            t: 0.0,
            acc: (0.0, 0.0),
            quad_dt,
        }
    }

    /// Velocity at `t ≥` the previously requested time.
    pub fn advance(&mut self, t: f64, nu: f64) -> [Complex64; 3] {
        if t > self.t {
            let (a, b) = simpson_kernels(&self.xi, self.t, t, self.quad_dt);
            self.acc.0 += a;
            self.acc.1 += b;
            self.t = t;
        }
        let decay = (-dissipation_integral(&self.xi, nu, t)).exp();
        [
            decay * (self.u_in[0] + self.q2 * self.acc.0),
            decay * self.q2 / laplacian_l_symbol(&self.xi, t),
            decay * (self.u_in[2] + self.q2 * self.acc.1),
        ]
    }
}

/// Evolve a full field with the exact linear propagator (zero modes included).
pub fn evolve_field(u_in: &SpectralVectorField, t: f64, nu: f64, quad_dt: f64) -> Result<SpectralVectorField> {
    let g = u_in.grid;
    let mut out = SpectralVectorField::zeros(g, u_in.frame, u_in.t + t);
    for idx in 0..g.len() {
        let xi = g.frequency(idx, u_in.frame);
        let u = [u_in.comps[0][idx], u_in.comps[1][idx], u_in.comps[2][idx]];
        let v = if xi.k == 0.0 {
            let heat = (-nu * t * (xi.eta * xi.eta + xi.l * xi.l)).exp();
            [heat * (u[0] - u[1] * t), heat * u[1], heat * u[2]]
        } else {
            let (a, c) = evolve_u13(u, &xi, t, nu, quad_dt)?;
            [a, recover_u2(evolve_q2(u[1] * laplacian_l_symbol(&xi, 0.0), t, &xi, nu), &xi, t), c]
        };
        for c in 0..3 {
            out.comps[c][idx] = v[c];
        }
    }
    out.div_free = u_in.div_free;
    Ok(out)
}

/// One row of the linear decay report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearDecayRow {
    pub t: f64,
    pub u2_neq_l2: f64,
    pub u2_neq_hs: f64,
    pub u13_neq_l2: f64,
    pub u13_neq_hs: f64,
}

/// Fitted envelope ‖ū^{1,3}_≠(t)‖ ≈ C e^{−cνk_min²t³}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub nu: f64,
    pub c: f64,
    pub prefactor: f64,
    pub window: (f64, f64),
    pub points: usize,
    pub c_in_range: bool,
    /// sup over the grid of t²e^{cνk_min²t³}‖ū²_≠(t)‖.
    pub sup_weighted_u2: f64,
    pub bounded: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearDecayReport {
    pub nu: f64,
    pub sobolev_index: f64,
    pub rows: Vec<LinearDecayRow>,
    /// sup over t ≥ 1 of t²‖ū²_≠(t)‖ / ‖q̄²_{in,≠}‖_{H²}.
    pub inviscid_damping_constant: f64,
    pub fit: Option<EnvelopeFit>,
}

/// Norm time series of the exact linear solution plus the enhanced-dissipation fit.
pub fn linear_decay_report(
    u_in: &SpectralVectorField,
    nu: f64,
    times: &[f64],
    sobolev_index: f64,
    quad_dt: f64,
) -> Result<LinearDecayReport> {
    if u_in.frame != Frame::shearing() && u_in.frame != Frame::Lab {
        return Err(Error::Config("linear report expects unremapped initial data".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("time grid must be nondecreasing".into()));
    }
    let g = u_in.grid;
    let mut modes = Vec::new();
    let mut q2_h2_sq = 0.0;
    for idx in 0..g.len() {
        let xi = g.frequency(idx, Frame::shearing());
        if xi.k == 0.0 {
            continue;
        }
        let u = [u_in.comps[0][idx], u_in.comps[1][idx], u_in.comps[2][idx]];
        if u.iter().all(|c| c.norm_sqr() == 0.0) {
            continue;
        }
        let w = sobolev_weight(xi.norm(), sobolev_index);
        let q2 = u[1] * laplacian_l_symbol(&xi, 0.0);
        q2_h2_sq += q2.norm_sqr() * sobolev_weight(xi.norm(), 2.0).powi(2);
        modes.push((LinearMode::new(xi, u, quad_dt), w));
    }
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
        for (mode, w) in modes.iter_mut() {
            let v = mode.advance(t, nu);
            let u2 = v[1].norm_sqr();
            let u13 = v[0].norm_sqr() + v[2].norm_sqr();
            a += u2;
            b += u2 * *w * *w;
            c += u13;
            d += u13 * *w * *w;
        }
        rows.push(LinearDecayRow {
            t,
            u2_neq_l2: a.sqrt(),
            u2_neq_hs: b.sqrt(),
            u13_neq_l2: c.sqrt(),
            u13_neq_hs: d.sqrt(),
        });
    }
    let q2_h2 = q2_h2_sq.sqrt();
    let inviscid_damping_constant = if q2_h2 > 0.0 {
        rows.iter()
            .filter(|r| r.t >= 1.0)
            .map(|r| r.t * r.t * r.u2_neq_l2 / q2_h2)
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    let fit = if nu > 0.0 { fit_envelope(&rows, nu, 2.0 * PI / g.lx) } else { None };
    Ok(LinearDecayReport {
        nu,
        sobolev_index,
        rows,
        inviscid_damping_constant,
        fit,
    })
}

/// Least squares of log‖ū^{1,3}_≠‖ against νt³ over t ∈ [0.5ν^{-1/3}, 3ν^{-1/3}].
/// Fits ‖ū^{1,3}_≠‖ ≈ C e^{−cν(t/T)³} with T = 1/k_min, so that c is measured in
/// units of the slowest streamwise wavenumber.
pub fn fit_envelope(rows: &[LinearDecayRow], nu: f64, k_min: f64) -> Option<EnvelopeFit> {
    let s = nu.powf(-1.0 / 3.0);
    let nu = nu * k_min * k_min;
    let window = (0.5 * s, 3.0 * s);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.t >= window.0 && r.t <= window.1 && r.u13_neq_l2 > 0.0)
        .map(|r| (nu * r.t.powi(3), r.u13_neq_l2.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let (slope, intercept) = least_squares(&pts)?;
    let c = -slope;
    let sup_weighted_u2 = rows
        .iter()
        .map(|r| r.t * r.t * (c * nu * r.t.powi(3)).exp() * r.u2_neq_l2)
        .fold(0.0, f64::max);
    Some(EnvelopeFit {
        nu: nu / (k_min * k_min),
        c,
        prefactor: intercept.exp(),
        window,
        points: pts.len(),
        c_in_range: c > 0.0 && c < 1.0 / 3.0,
        sup_weighted_u2,
        bounded: sup_weighted_u2.is_finite(),
    })
}

/// Ordinary least squares y = a x + b.
pub fn least_squares(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let a = sxy / sxx;
    Some((a, my - a * mx))
}
