//! x-independent dynamics: 2D Navier–Stokes in (y, z) in vorticity form plus
//! the forced advection–diffusion of the streamwise velocity u¹.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{dealias_in_place, Frame, Grid, SpectralVectorField, Transform};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Spectral vorticity ω = ∂_y u³ − ∂_z u² and streamwise velocity u¹ on a (y, z) plane.
#[derive(Debug, Clone, PartialEq)]
pub struct StreakState {
    pub grid: Grid,
    pub t: f64,
    pub nu: f64,
    pub omega: Vec<Complex64>,
    pub u1: Vec<Complex64>,
}

/// Time derivatives of a streak state.
#[derive(Debug, Clone, PartialEq)]
pub struct StreakTendency {
    pub omega: Vec<Complex64>,
    pub u1: Vec<Complex64>,
}

impl StreakState {
    pub fn zeros(grid: Grid, nu: f64, t: f64) -> Self {
        Self {
            grid,
            t,
            nu,
            omega: vec![ZERO; grid.len()],
            u1: vec![ZERO; grid.len()],
        }
    }

    /// From (u¹, u², u³) on the plane; the (0, 0) means of u², u³ are dropped.
    pub fn from_velocity(grid: Grid, nu: f64, t: f64, u: [&[Complex64]; 3]) -> Result<Self> {
        if grid.nx != 1 {
            return Err(Error::Config("streak states live on an x-independent plane".into()));
        }
        let mut omega = vec![ZERO; grid.len()];
        for (idx, w) in omega.iter_mut().enumerate() {
            let (_, n, p) = grid.mode(idx);
            let (eta, l) = (grid.ky(n), grid.kz(p));
            *w = I * eta * u[2][idx] - I * l * u[1][idx];
        }
        Ok(Self {
            grid,
            t,
            nu,
            omega,
            u1: u[0].to_vec(),
        })
    }

    /// The k = 0 plane of a 3D field.
    pub fn from_zero_modes(u: &SpectralVectorField, nu: f64) -> Result<Self> {
        let plane = u.grid.ny * u.grid.nz;
        let g = u.grid.zero_plane();
        Self::from_velocity(
            g,
            nu,
            u.t,
            [&u.comps[0][..plane], &u.comps[1][..plane], &u.comps[2][..plane]],
        )
    }

    /// (u¹, u², u³) with û² = ilφ̂, û³ = −iηφ̂, φ̂ = ω̂/|ξ|².
    pub fn velocity(&self) -> [Vec<Complex64>; 3] {
        let g = self.grid;
        let mut u2 = vec![ZERO; g.len()];
        let mut u3 = vec![ZERO; g.len()];
        for idx in 0..g.len() {
            let (_, n, p) = g.mode(idx);
            let (eta, l) = (g.ky(n), g.kz(p));
            let k2 = eta * eta + l * l;
            if k2 == 0.0 {
                continue;
            }
            let phi = self.omega[idx] / k2;
            u2[idx] = I * l * phi;
            u3[idx] = -I * eta * phi;
        }
        [self.u1.clone(), u2, u3]
    }

    pub fn enstrophy(&self) -> f64 {
        self.omega.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.omega.iter().chain(self.u1.iter()).all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn dealias(&mut self) {
        dealias_in_place(&self.grid, &mut self.omega);
        dealias_in_place(&self.grid, &mut self.u1);
    }

    /// Max |ι·(u², u³)| / |(u², u³)| over the plane, ι = (η, l).
    pub fn divergence_residual(&self) -> f64 {
        let [_, u2, u3] = self.velocity();
        let norm: f64 = u2.iter().chain(u3.iter()).map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for idx in 0..self.grid.len() {
            let (_, n, p) = self.grid.mode(idx);
            let (eta, l) = (self.grid.ky(n), self.grid.kz(p));
            let k = (eta * eta + l * l).sqrt();
            if k > 0.0 {
                worst = worst.max((u2[idx] * eta + u3[idx] * l).norm() / k);
            }
        }
        worst / norm
    }
}

/// Pseudo-spectral streak solver on one plane grid.
#[derive(Debug, Clone)]
pub struct StreakSolver {
    grid: Grid,
    transform: Transform,
    pub cfl: f64,
}

impl StreakSolver {
    pub fn new(grid: Grid) -> Result<Self> {
        if grid.nx != 1 {
            return Err(Error::Config("streak solver needs a plane grid".into()));
        }
        Ok(Self {
            grid,
            transform: Transform::new(grid),
            cfl: 0.5,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Advective tendencies −(u²,u³)·∇ω and −(u²,u³)·∇u¹ − u², plus the CFL number per unit dt.
    fn advective(&self, s: &StreakState) -> (StreakTendency, f64) {
        let g = self.grid;
        let n = g.len();
        let [_, u2, u3] = s.velocity();
        let (mut r2, mut r3, mut rw, mut r1) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        self.transform.inverse_pair(&u2, &u3, &mut r2, &mut r3);
        self.transform.inverse_pair(&s.omega, &s.u1, &mut rw, &mut r1);
        let h = g.spacing();
        let m2 = r2.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let m3 = r3.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let cfl_rate = m2 / h[1] + m3 / h[2];

        let p2w: Vec<f64> = r2.iter().zip(&rw).map(|(a, b)| a * b).collect();
        let p3w: Vec<f64> = r3.iter().zip(&rw).map(|(a, b)| a * b).collect();
        let p21: Vec<f64> = r2.iter().zip(&r1).map(|(a, b)| a * b).collect();
        let p31: Vec<f64> = r3.iter().zip(&r1).map(|(a, b)| a * b).collect();
        let (mut f2w, mut f3w, mut f21, mut f31) =
            (vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]);
        self.transform.forward_pair(&p2w, &p3w, &mut f2w, &mut f3w);
        self.transform.forward_pair(&p21, &p31, &mut f21, &mut f31);

        let mut dw = vec![ZERO; n];
        let mut d1 = vec![ZERO; n];
        dw.par_iter_mut()
            .zip(d1.par_iter_mut())
            .enumerate()
            .for_each(|(idx, (w, v))| {
                let (_, nn, p) = g.mode(idx);
                if !g.retained(0, nn, p) {
                    return;
                }
                let (eta, l) = (g.ky(nn), g.kz(p));
                *w = -(I * eta * f2w[idx] + I * l * f3w[idx]);
                *v = -(I * eta * f21[idx] + I * l * f31[idx]) - u2[idx];
            });
        (StreakTendency { omega: dw, u1: d1 }, cfl_rate)
    }

    /// Full tendency including viscous terms.
    pub fn streak_rhs(&self, s: &StreakState) -> StreakTendency {
        let (mut tend, _) = self.advective(s);
        let g = self.grid;
        for idx in 0..g.len() {
            let (_, n, p) = g.mode(idx);
            let k2 = g.ky(n).powi(2) + g.kz(p).powi(2);
            tend.omega[idx] -= s.nu * k2 * s.omega[idx];
            tend.u1[idx] -= s.nu * k2 * s.u1[idx];
        }
        tend
    }

    /// Integrating-factor RK4 step; the viscous factor is exact.
    pub fn step(&self, s: &StreakState, dt: f64) -> Result<StreakState> {
        let g = self.grid;
        let n = g.len();
        let (k1, rate) = self.advective(s);
        let limit = if rate > 0.0 { self.cfl / rate } else { f64::INFINITY };
        if dt > limit {
            return Err(Error::Cfl { dt, limit });
        }
        let e_half: Vec<f64> = (0..n)
            .map(|idx| {
                let (_, nn, p) = g.mode(idx);
                (-0.5 * s.nu * dt * (g.ky(nn).powi(2) + g.kz(p).powi(2))).exp()
            })
            .collect();
        let stage = |base: &StreakState, f: &dyn Fn(usize, Complex64, Complex64) -> (Complex64, Complex64), t: f64| {
            let mut out = base.clone();
            out.t = t;
            for idx in 0..n {
                let (a, b) = f(idx, base.omega[idx], base.u1[idx]);
                out.omega[idx] = a;
                out.u1[idx] = b;
            }
            out
        };
        let h = dt;
        let s2 = stage(
            s,
            &|i, w, v| (e_half[i] * (w + 0.5 * h * k1.omega[i]), e_half[i] * (v + 0.5 * h * k1.u1[i])),
            s.t + 0.5 * h,
        );
        let (k2, _) = self.advective(&s2);
        let s3 = stage(
            s,
            &|i, w, v| (e_half[i] * w + 0.5 * h * k2.omega[i], e_half[i] * v + 0.5 * h * k2.u1[i]),
            s.t + 0.5 * h,
        );
        let (k3, _) = self.advective(&s3);
        let s4 = stage(
            s,
            &|i, w, v| {
                let e = e_half[i] * e_half[i];
                (e * w + h * e_half[i] * k3.omega[i], e * v + h * e_half[i] * k3.u1[i])
            },
            s.t + h,
        );
        let (k4, _) = self.advective(&s4);
        let mut out = stage(
            s,
            &|i, w, v| {
                let e1 = e_half[i] * e_half[i];
                let eh = e_half[i];
                (
                    e1 * w + h / 6.0 * (e1 * k1.omega[i] + 2.0 * eh * (k2.omega[i] + k3.omega[i]) + k4.omega[i]),
                    e1 * v + h / 6.0 * (e1 * k1.u1[i] + 2.0 * eh * (k2.u1[i] + k3.u1[i]) + k4.u1[i]),
                )
            },
            s.t + h,
        );
        out.dealias();
        Ok(out)
    }
}

/// One row of the streak diagnostics CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreakRecord {
    pub t: f64,
    pub u1_l2: f64,
    pub u1_hn: f64,
    pub u23_l2: f64,
    pub enstrophy: f64,
}

pub const STREAK_COLUMNS: [&str; 5] = ["t", "u1_L2", "u1_HN", "u23_L2", "enstrophy"];

impl StreakRecord {
    pub fn values(&self) -> [f64; 5] {
        [self.t, self.u1_l2, self.u1_hn, self.u23_l2, self.enstrophy]
    }

    pub fn of(state: &StreakState, sobolev_n: f64) -> Self {
        let g = state.grid;
        let [u1, u2, u3] = state.velocity();
        let mut hn = 0.0;
        for (idx, c) in u1.iter().enumerate() {
            let (_, n, p) = g.mode(idx);
            let k = (g.ky(n).powi(2) + g.kz(p).powi(2)).sqrt();
            hn += c.norm_sqr() * crate::diagnostics::sobolev_weight(k, sobolev_n).powi(2);
        }
        Self {
            t: state.t,
            u1_l2: u1.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt(),
            u1_hn: hn.sqrt(),
            u23_l2: u2.iter().chain(u3.iter()).map(|c| c.norm_sqr()).sum::<f64>().sqrt(),
            enstrophy: state.enstrophy(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreakRunConfig {
    pub dt: f64,
    pub t_end: f64,
    pub out_interval: f64,
    pub sobolev_n: f64,
}

#[derive(Debug, Clone)]
pub struct StreakRun {
    pub records: Vec<StreakRecord>,
    pub states: Vec<StreakState>,
    pub final_state: StreakState,
    pub blowup: bool,
}

/// Integrate to `t_end` with fixed steps (the last one shortened to land exactly).
pub fn run_streak(cfg: &StreakRunConfig, initial: StreakState, keep_states: bool) -> Result<StreakRun> {
    let solver = StreakSolver::new(initial.grid)?;
    let mut s = initial;
    s.dealias();
    let mut records = vec![StreakRecord::of(&s, cfg.sobolev_n)];
    let mut states = if keep_states { vec![s.clone()] } else { Vec::new() };
    let mut next_out = s.t + cfg.out_interval;
    let mut blowup = false;
    while s.t < cfg.t_end - 1e-12 {
        let dt = cfg.dt.min(cfg.t_end - s.t);
        s = solver.step(&s, dt)?;
        if (cfg.t_end - s.t).abs() < 1e-9 {
            s.t = cfg.t_end;
        }
        if !s.is_finite() {
            blowup = true;
            break;
        }
        if s.t >= next_out - 1e-9 || s.t >= cfg.t_end {
            records.push(StreakRecord::of(&s, cfg.sobolev_n));
            if keep_states {
                states.push(s.clone());
            }
            next_out += cfg.out_interval;
        }
    }
    Ok(StreakRun {
        records,
        states,
        final_state: s,
        blowup,
    })
}

/// Embed a streak state as the k = 0 plane of a 3D field.
pub fn embed_in_3d(s: &StreakState, grid3: Grid, frame: Frame) -> Result<SpectralVectorField> {
    if grid3.ny != s.grid.ny || grid3.nz != s.grid.nz {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", grid3.ny, grid3.nz),
            found: format!("{}x{}", s.grid.ny, s.grid.nz),
        });
    }
    let mut out = SpectralVectorField::zeros(grid3, frame, s.t);
    let vel = s.velocity();
    let plane = grid3.ny * grid3.nz;
    for c in 0..3 {
        out.comps[c][..plane].copy_from_slice(&vel[c]);
    }
    out.div_free = true;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn velocity_vorticity_round_trip() {
        let g = Grid::plane(8, 8, 2.0, 1.0).unwrap();
        let mut s = StreakState::zeros(g, 0.01, 0.0);
        let idx = g.mode_index(0, 1, 2).unwrap();
        s.omega[idx] = Complex64::new(0.5, -0.25);
        s.omega[g.neg_index(idx)] = s.omega[idx].conj();
        let [u1, u2, u3] = s.velocity();
        let back = StreakState::from_velocity(g, 0.01, 0.0, [&u1, &u2, &u3]).unwrap();
        for i in 0..g.len() {
            assert!((back.omega[i] - s.omega[i]).norm() < 1e-15);
        }
        assert!(s.divergence_residual() < 1e-15);
    }

    #[test]
    fn zero_velocity_gives_pure_diffusion() {
        let g = Grid::plane(8, 8, 2.0 * PI, 2.0 * PI).unwrap();
        let mut s = StreakState::zeros(g, 0.1, 0.0);
        let idx = g.mode_index(0, 1, 1).unwrap();
        s.u1[idx] = Complex64::new(1.0, 0.0);
        s.u1[g.neg_index(idx)] = Complex64::new(1.0, 0.0);
        let solver = StreakSolver::new(g).unwrap();
        let r = solver.streak_rhs(&s);
        assert!((r.u1[idx].re + 0.1 * 2.0).abs() < 1e-14);
        assert!(r.omega.iter().all(|c| c.norm() < 1e-15));
    }
}
