//! Sobolev and multiplier-weighted norms, the ψ/g auxiliary fields and run-level reports.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multipliers::{Multipliers, Which};
use crate::nonlinear::{RunFlag, RunRecord};
use crate::spectral::{dealias_in_place, Frame, Grid, SpectralField, SpectralVectorField, Transform};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// ⟨x⟩^s = (1 + x²)^{s/2}.
#[inline]
pub fn sobolev_weight(x: f64, s: f64) -> f64 {
    (1.0 + x * x).powf(0.5 * s)
}

/// ‖⟨D⟩^s f‖ with frame wavenumbers.
pub fn sobolev_norm(f: &SpectralField, s: f64) -> f64 {
    sobolev_norm_slice(&f.grid, f.frame, &f.data, s)
}

pub fn sobolev_norm_slice(grid: &Grid, frame: Frame, data: &[Complex64], s: f64) -> f64 {
    data.iter()
        .enumerate()
        .map(|(idx, c)| {
            let w = sobolev_weight(grid.frequency(idx, frame).norm(), s);
            w * w * c.norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// Multiplier stack applied before the ℓ² sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Weight {
    Unit,
    /// m^{1/2} M
    A,
    /// m M
    B,
    /// M = M⁰M¹M²
    M,
    /// √(−ṀM)·m^α
    SqrtNegMdotM { m_power: f64 },
}

/// Per-mode values of m, M and −ṀM at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeWeights {
    pub t: f64,
    pub m: Vec<f64>,
    pub big_m: Vec<f64>,
    pub neg_mdot_m: Vec<f64>,
}

impl ModeWeights {
    pub fn new(grid: Grid, frame: Frame, t: f64, mult: &Multipliers) -> Self {
        let vals: Vec<(f64, f64, f64)> = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let xi = grid.frequency(idx, frame);
                if xi.k == 0.0 {
                    return (1.0, 1.0, 0.0);
                }
                (
                    mult.eval_m(t, &xi),
                    mult.eval(t, &xi, Which::Product),
                    mult.eval_neg_mdot_m(t, &xi, Which::Product),
                )
            })
            .collect();
        Self {
            t,
            m: vals.iter().map(|v| v.0).collect(),
            big_m: vals.iter().map(|v| v.1).collect(),
            neg_mdot_m: vals.iter().map(|v| v.2).collect(),
        }
    }

    /// All multipliers equal to one (t = 0 or no multipliers configured).
    pub fn unit(grid: Grid, t: f64) -> Self {
        Self {
            t,
            m: vec![1.0; grid.len()],
            big_m: vec![1.0; grid.len()],
            neg_mdot_m: vec![0.0; grid.len()],
        }
    }

    #[inline]
    pub fn factor(&self, idx: usize, w: Weight) -> f64 {
        match w {
            Weight::Unit => 1.0,
            Weight::A => self.m[idx].sqrt() * self.big_m[idx],
            Weight::B => self.m[idx] * self.big_m[idx],
            Weight::M => self.big_m[idx],
            Weight::SqrtNegMdotM { m_power } => self.neg_mdot_m[idx].sqrt() * self.m[idx].powf(m_power),
        }
    }
}

/// ‖w(t,ξ)⟨ξ⟩^s f̂‖.
pub fn weighted_norm(f: &SpectralField, weights: &ModeWeights, w: Weight, s: f64) -> f64 {
    f.data
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            let a = weights.factor(idx, w) * sobolev_weight(f.grid.frequency(idx, f.frame).norm(), s);
            a * a * c.norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// The bootstrap quantities at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapNorms {
    /// ‖⟨t⟩⁻¹Q₀¹‖_{H^N}
    pub hn_q1_0_over_t: f64,
    /// ‖Q₀¹‖_{H^N}
    pub hn_q1_0: f64,
    /// ‖mMQ¹_≠‖_{H^N}
    pub b_q1_neq: f64,
    /// ‖m^{1/2}MQ²‖_{H^N}
    pub a_q2: f64,
    /// ‖mMQ³‖_{H^N}
    pub b_q3: f64,
    /// ‖MQ²_≠‖_{H^{N−1}}
    pub m_q2_neq_nm1: f64,
    /// ‖Mu¹_≠‖_{H^{N−1}}
    pub m_u1_neq_nm1: f64,
    /// ‖u₀ⁱ‖_{H^{N−1}}
    pub u0_nm1: [f64; 3],
    /// ‖√(−ṀM) mM Q¹_≠‖, ‖√(−ṀM) m^{1/2}M Q²‖, ‖√(−ṀM) mM Q³‖ in H^N
    pub rates: [f64; 3],
}

impl BootstrapNorms {
    pub fn compute(u: &SpectralVectorField, weights: &ModeWeights, n: f64) -> Self {
        let g = u.grid;
        let t = u.t;
        let mut acc = [0.0f64; 13];
        for idx in 0..g.len() {
            let xi = g.frequency(idx, u.frame);
            let kv = g.wavevector(idx, u.frame, t);
            let lap = kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2];
            let sn = sobolev_weight(xi.norm(), n).powi(2);
            let snm1 = sobolev_weight(xi.norm(), n - 1.0).powi(2);
            let u2 = [u.comps[0][idx].norm_sqr(), u.comps[1][idx].norm_sqr(), u.comps[2][idx].norm_sqr()];
            let q2 = [u2[0] * lap * lap, u2[1] * lap * lap, u2[2] * lap * lap];
            let (m, bm, nmm) = (weights.m[idx], weights.big_m[idx], weights.neg_mdot_m[idx]);
            let a2 = m * bm * bm;
            let b2 = m * m * bm * bm;
            if xi.k == 0.0 {
                acc[0] += q2[0] * sn;
                for c in 0..3 {
                    acc[1 + c] += u2[c] * snm1;
                }
            } else {
                acc[4] += b2 * q2[0] * sn;
                acc[5] += bm * bm * q2[1] * snm1;
                acc[6] += bm * bm * u2[0] * snm1;
                acc[10] += nmm * b2 * q2[0] * sn;
            }
            acc[7] += a2 * q2[1] * sn;
            acc[8] += b2 * q2[2] * sn;
            acc[11] += nmm * a2 * q2[1] * sn;
            acc[12] += nmm * b2 * q2[2] * sn;
        }
        let r = |v: f64| v.sqrt();
        let hn_q1_0 = r(acc[0]);
        Self {
            hn_q1_0_over_t: hn_q1_0 / (1.0 + t * t).sqrt(),
            hn_q1_0,
            b_q1_neq: r(acc[4]),
            a_q2: r(acc[7]),
            b_q3: r(acc[8]),
            m_q2_neq_nm1: r(acc[5]),
            m_u1_neq_nm1: r(acc[6]),
            u0_nm1: [r(acc[1]), r(acc[2]), r(acc[3])],
            rates: [r(acc[10]), r(acc[11]), r(acc[12])],
        }
    }
}

/// CSV column order of [`DiagnosticsRecord`].
pub const DIAGNOSTICS_COLUMNS: [&str; 17] = [
    "t",
    "E_total",
    "E_zero",
    "E_nonzero",
    "div_max",
    "HN_Q1_0_over_t",
    "B_Q1_neq",
    "A_Q2",
    "B_Q3",
    "M_Q2_neq_Nm1",
    "M_U1_neq_Nm1",
    "U1_0_Nm1",
    "U2_0_Nm1",
    "U3_0_Nm1",
    "g_Nm1_t2",
    "psi_Hs",
    "remap_discard",
];

/// One row of monitored quantities. The ψ and g columns are NaN until filled
/// from the zero-mode history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub e_total: f64,
    pub e_zero: f64,
    pub e_nonzero: f64,
    pub div_max: f64,
    pub norms: BootstrapNorms,
    pub g_nm1_t2: f64,
    pub psi_hs: f64,
    pub remap_discard: f64,
}

impl DiagnosticsRecord {
    pub fn compute(u: &SpectralVectorField, weights: Option<&ModeWeights>, n: f64, remap_discard: f64) -> Self {
        let g = u.grid;
        let plane = g.ny * g.nz;
        let unit;
        let w = match weights {
            Some(w) => w,
            None => {
                unit = ModeWeights::unit(g, u.t);
                &unit
            }
        };
        let e_zero: f64 = u.comps.iter().map(|c| c[..plane].iter().map(|v| v.norm_sqr()).sum::<f64>()).sum();
        let e_all = u.norm_sq();
        Self {
            t: u.t,
            e_total: 0.5 * e_all,
            e_zero: 0.5 * e_zero,
            e_nonzero: 0.5 * (e_all - e_zero).max(0.0),
            div_max: u.divergence_residual(),
            norms: BootstrapNorms::compute(u, w, n),
            g_nm1_t2: f64::NAN,
            psi_hs: f64::NAN,
            remap_discard,
        }
    }

    pub fn values(&self) -> [f64; 17] {
        let b = &self.norms;
        [
            self.t,
            self.e_total,
            self.e_zero,
            self.e_nonzero,
            self.div_max,
            b.hn_q1_0_over_t,
            b.b_q1_neq,
            b.a_q2,
            b.b_q3,
            b.m_q2_neq_nm1,
            b.m_u1_neq_nm1,
            b.u0_nm1[0],
            b.u0_nm1[1],
            b.u0_nm1[2],
            self.g_nm1_t2,
            self.psi_hs,
            self.remap_discard,
        ]
    }
}

/// k = 0 plane of the velocity and of P₀[∇_L·(u_≠ u¹_≠)] at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroModeSample {
    pub t: f64,
    pub u: [Vec<Complex64>; 3],
    pub nl0: Vec<Complex64>,
}

/// ψ with its y, z derivatives and the coefficient (1+ψ_y)² + ψ_z² − 1, on the physical plane.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiState {
    pub t: f64,
    pub psi: Vec<Complex64>,
    pub psi_y: Vec<f64>,
    pub psi_z: Vec<f64>,
    pub coef: Vec<f64>,
}

impl PsiState {
    pub fn new(grid: Grid, transform: &Transform, t: f64, psi: Vec<Complex64>) -> Self {
        let mut dy = vec![ZERO; grid.len()];
        let mut dz = vec![ZERO; grid.len()];
        for idx in 0..grid.len() {
            let (_, n, p) = grid.mode(idx);
            dy[idx] = I * grid.ky(n) * psi[idx];
            dz[idx] = I * grid.kz(p) * psi[idx];
        }
        let (mut psi_y, mut psi_z) = (vec![0.0; grid.len()], vec![0.0; grid.len()]);
        transform.inverse_pair(&dy, &dz, &mut psi_y, &mut psi_z);
        let coef = psi_y
            .iter()
            .zip(&psi_z)
            .map(|(a, b)| (1.0 + a) * (1.0 + a) + b * b - 1.0)
            .collect();
        Self {
            t,
            psi,
            psi_y,
            psi_z,
            coef,
        }
    }
}

/// Ψ = tψ on the solver's time grid, with its forcing history interpolated from samples.
#[derive(Debug, Clone)]
pub struct PsiSeries {
    pub grid: Grid,
    pub nu: f64,
    pub times: Vec<f64>,
    /// Ψ = tψ
    pub big_psi: Vec<Vec<Complex64>>,
    /// G = t²g evolved by its own equation.
    pub big_g: Vec<Vec<Complex64>>,
    /// t u₀¹ at the same times (interpolated between samples).
    pub t_u1: Vec<Vec<Complex64>>,
    /// max ‖dΨ/dt − rhs‖ / max ‖rhs‖, derivative by 5-point finite differences.
    pub residual: f64,
}

impl PsiSeries {
    pub fn psi(&self, i: usize) -> Vec<Complex64> {
        let t = self.times[i];
        if t == 0.0 {
            return self.t_u1[i].iter().map(|_| ZERO).collect();
        }
        self.big_psi[i].iter().map(|c| c / t).collect()
    }

    /// G = t u₀¹ − Ψ from the ψ solve.
    pub fn g_direct(&self, i: usize) -> Vec<Complex64> {
        self.t_u1[i].iter().zip(&self.big_psi[i]).map(|(a, b)| a - b).collect()
    }

    pub fn index_of(&self, t: f64) -> Option<usize> {
        let i = self.times.partition_point(|&s| s < t - 1e-9);
        (i < self.times.len() && (self.times[i] - t).abs() < 1e-9).then_some(i)
    }

    /// max_t ‖G_pde − G_direct‖ / max_t ‖t u₀¹‖.
    pub fn g_mismatch(&self) -> f64 {
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..self.times.len() {
            let d = self.g_direct(i);
            let e: f64 = d.iter().zip(&self.big_g[i]).map(|(a, b)| (a - b).norm_sqr()).sum();
            num = num.max(e.sqrt());
            den = den.max(self.t_u1[i].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt());
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    /// sup_{t≥1} ‖ψ‖²_{H^s} + ν∫_{t≥1}‖∇ψ‖²_{H^s}dt (trapezoid on stored times).
    pub fn bound_functional(&self, s: f64) -> f64 {
        let g = self.grid;
        let mut sup = 0.0f64;
        let mut integral = 0.0;
        let mut prev: Option<(f64, f64)> = None;
        for (i, &t) in self.times.iter().enumerate() {
            if t < 1.0 - 1e-12 {
                continue;
            }
            let psi = self.psi(i);
            let (mut hs, mut grad) = (0.0, 0.0);
            for (idx, c) in psi.iter().enumerate() {
                let (_, n, p) = g.mode(idx);
                let k2 = g.ky(n).powi(2) + g.kz(p).powi(2);
                let w = (1.0 + k2).powf(s);
                hs += w * c.norm_sqr();
                grad += w * k2 * c.norm_sqr();
            }
            sup = sup.max(hs);
            if let Some((tp, gp)) = prev {
                integral += 0.5 * (t - tp) * (grad + gp);
            }
            prev = Some((t, grad));
        }
        sup + self.nu * integral
    }
}

fn lagrange_weights(ts: &[f64], t: f64) -> Vec<f64> {
    (0..ts.len())
        .map(|j| {
            let mut w = 1.0;
            for (m, &tm) in ts.iter().enumerate() {
                if m != j {
                    w *= (t - tm) / (ts[j] - tm);
                }
            }
            w
        })
        .collect()
}

/// Derivative weights of the Lagrange interpolant through `ts` at `t`.
fn lagrange_derivative_weights(ts: &[f64], t: f64) -> Vec<f64> {
    let n = ts.len();
    (0..n)
        .map(|j| {
            let mut total = 0.0;
            for i in 0..n {
                if i == j {
                    continue;
                }
                let mut prod = 1.0 / (ts[j] - ts[i]);
                for m in 0..n {
                    if m != j && m != i {
                        prod *= (t - ts[m]) / (ts[j] - ts[m]);
                    }
                }
                total += prod;
            }
            total
        })
        .collect()
}

struct Forcing<'a> {
    samples: &'a [ZeroModeSample],
    times: Vec<f64>,
}

impl<'a> Forcing<'a> {
    fn window(&self, t: f64) -> std::ops::Range<usize> {
        let n = self.times.len();
        let w = n.min(4);
        let i = self.times.partition_point(|&s| s <= t).saturating_sub(1);
        let lo = i.saturating_sub(1).min(n - w);
        lo..lo + w
    }

    /// (u₀¹, u₀², u₀³, NL₀) at `t` by cubic Lagrange interpolation.
    fn at(&self, t: f64) -> [Vec<Complex64>; 4] {
        if let Some(i) = self.times.iter().position(|&s| (s - t).abs() < 1e-12) {
            let s = &self.samples[i];
            return [s.u[0].clone(), s.u[1].clone(), s.u[2].clone(), s.nl0.clone()];
        }
        let r = self.window(t);
        let w = lagrange_weights(&self.times[r.clone()], t);
        let len = self.samples[0].nl0.len();
        let mut out = [vec![ZERO; len], vec![ZERO; len], vec![ZERO; len], vec![ZERO; len]];
        for (wj, s) in w.iter().zip(&self.samples[r]) {
            for c in 0..3 {
                for (o, v) in out[c].iter_mut().zip(&s.u[c]) {
                    *o += *wj * v;
                }
            }
            for (o, v) in out[3].iter_mut().zip(&s.nl0) {
                *o += *wj * v;
            }
        }
        out
    }
}

/// Plane advection helper for the Ψ and G equations.
struct PlaneOps {
    grid: Grid,
    transform: Transform,
    cfl: f64,
}

impl PlaneOps {
    /// −(u₀², u₀³)·∇f and the CFL rate.
    fn advect(&self, u2: &[Complex64], u3: &[Complex64], f: &[Complex64]) -> (Vec<Complex64>, f64) {
        let g = self.grid;
        let n = g.len();
        let (mut r2, mut r3) = (vec![0.0; n], vec![0.0; n]);
        self.transform.inverse_pair(u2, u3, &mut r2, &mut r3);
        let mut dy = vec![ZERO; n];
        let mut dz = vec![ZERO; n];
        for idx in 0..n {
            let (_, nn, p) = g.mode(idx);
            dy[idx] = I * g.ky(nn) * f[idx];
            dz[idx] = I * g.kz(p) * f[idx];
        }
        let (mut fy, mut fz) = (vec![0.0; n], vec![0.0; n]);
        self.transform.inverse_pair(&dy, &dz, &mut fy, &mut fz);
        let prod: Vec<f64> = (0..n).map(|i| -(r2[i] * fy[i] + r3[i] * fz[i])).collect();
        let mut out = vec![ZERO; n];
        let zeros = vec![0.0; n];
        let mut scratch = vec![ZERO; n];
        self.transform.forward_pair(&prod, &zeros, &mut out, &mut scratch);
        dealias_in_place(&g, &mut out);
        let h = g.spacing();
        let m2 = r2.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let m3 = r3.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        (out, m2 / h[1] + m3 / h[2])
    }
}

/// Integrate Ψ = tψ and G = t²g from zero at the first sample to the last one.
/// Forcing between samples is interpolated with cubic Lagrange polynomials;
/// each sample interval is split into steps no longer than `dt`.
pub fn solve_psi(history: &[ZeroModeSample], grid: Grid, nu: f64, dt: f64) -> Result<PsiSeries> {
    if history.len() < 2 {
        return Err(Error::Config("ψ solve needs at least two zero-mode samples".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::Config(format!("ψ step must be positive, got {dt}")));
    }
    let plane = grid.zero_plane();
    if history.iter().any(|s| s.nl0.len() != plane.len() || s.u.iter().any(|c| c.len() != plane.len())) {
        return Err(Error::DimensionMismatch {
            expected: format!("{} plane modes", plane.len()),
            found: "a sample of another size".into(),
        });
    }
    let ops = PlaneOps {
        grid: plane,
        transform: Transform::new(plane),
        cfl: 0.5,
    };
    let forcing = Forcing {
        samples: history,
        times: history.iter().map(|s| s.t).collect(),
    };
    let n = plane.len();
    let lap: Vec<f64> = (0..n)
        .map(|idx| {
            let (_, nn, p) = plane.mode(idx);
            plane.ky(nn).powi(2) + plane.kz(p).powi(2)
        })
        .collect();
    // tendencies of (Ψ, G) excluding νΔ
    let rhs = |t: f64, psi: &[Complex64], gg: &[Complex64]| -> Result<(Vec<Complex64>, Vec<Complex64>, f64)> {
        let [u1, u2, u3, nl0] = forcing.at(t);
        let (mut ap, rate) = ops.advect(&u2, &u3, psi);
        let (mut ag, _) = ops.advect(&u2, &u3, gg);
        for i in 0..n {
            ap[i] += u1[i] - t * u2[i];
            ag[i] -= t * nl0[i];
        }
        Ok((ap, ag, rate))
    };

    let t0 = forcing.times[0];
    let mut times = vec![t0];
    let mut big_psi = vec![vec![ZERO; n]];
    let mut big_g = vec![vec![ZERO; n]];
    let mut t_u1 = vec![history[0].u[0].iter().map(|c| c * t0).collect::<Vec<_>>()];
    let mut psi = vec![ZERO; n];
    let mut gg = vec![ZERO; n];
    let mut t = t0;
    for w in forcing.times.windows(2) {
        let span = w[1] - w[0];
        let steps = (span / dt).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        let e_half: Vec<f64> = lap.iter().map(|k2| (-0.5 * nu * h * k2).exp()).collect();
        for s in 0..steps {
            let (k1p, k1g, rate) = rhs(t, &psi, &gg)?;
            if rate > 0.0 && h > ops.cfl / rate {
                return Err(Error::Cfl { dt: h, limit: ops.cfl / rate });
            }
            let comb = |base: &[Complex64], f: &dyn Fn(usize, Complex64) -> Complex64| -> Vec<Complex64> {
                base.iter().enumerate().map(|(i, &b)| f(i, b)).collect()
            };
            let p2 = comb(&psi, &|i, b| e_half[i] * (b + 0.5 * h * k1p[i]));
            let g2 = comb(&gg, &|i, b| e_half[i] * (b + 0.5 * h * k1g[i]));
            let (k2p, k2g, _) = rhs(t + 0.5 * h, &p2, &g2)?;
            let p3 = comb(&psi, &|i, b| e_half[i] * b + 0.5 * h * k2p[i]);
            let g3 = comb(&gg, &|i, b| e_half[i] * b + 0.5 * h * k2g[i]);
            let (k3p, k3g, _) = rhs(t + 0.5 * h, &p3, &g3)?;
            let p4 = comb(&psi, &|i, b| e_half[i] * e_half[i] * b + h * e_half[i] * k3p[i]);
            let g4 = comb(&gg, &|i, b| e_half[i] * e_half[i] * b + h * e_half[i] * k3g[i]);
            let t1 = if s + 1 == steps { w[1] } else { t + h };
            let (k4p, k4g, _) = rhs(t1, &p4, &g4)?;
            let fin = |b: &[Complex64], k1: &[Complex64], k2: &[Complex64], k3: &[Complex64], k4: &[Complex64]| {
                comb(b, &|i, v| {
                    let e1 = e_half[i] * e_half[i];
                    e1 * v + h / 6.0 * (e1 * k1[i] + 2.0 * e_half[i] * (k2[i] + k3[i]) + k4[i])
                })
            };
            psi = fin(&psi, &k1p, &k2p, &k3p, &k4p);
            gg = fin(&gg, &k1g, &k2g, &k3g, &k4g);
            t = t1;
            times.push(t);
            big_psi.push(psi.clone());
            big_g.push(gg.clone());
            let u1 = forcing.at(t)[0].clone();
            t_u1.push(u1.iter().map(|c| c * t).collect());
        }
    }

    // residual of the Ψ equation on the stored series
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    let m = times.len();
    for i in 0..m {
        let (ap, _, _) = rhs(times[i], &big_psi[i], &big_g[i])?;
        let full: Vec<Complex64> = (0..n).map(|j| ap[j] - nu * lap[j] * big_psi[i][j]).collect();
        scale = scale.max(full.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt());
        if m < 5 {
            continue;
        }
        let lo = i.saturating_sub(2).min(m - 5);
        let ts = &times[lo..lo + 5];
        let dw = lagrange_derivative_weights(ts, times[i]);
        let mut err = 0.0;
        for j in 0..n {
            let mut d = ZERO;
            for (k, wk) in dw.iter().enumerate() {
                d += *wk * big_psi[lo + k][j];
            }
            err += (d - full[j]).norm_sqr();
        }
        worst = worst.max(err.sqrt());
    }
    let residual = if scale > 0.0 { worst / scale } else { 0.0 };
    Ok(PsiSeries {
        grid: plane,
        nu,
        times,
        big_psi,
        big_g,
        t_u1,
        residual,
    })
}

/// g = (u₀¹ − ψ)/t.
pub fn compute_g(psi: &[Complex64], u1: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
    if t <= 0.0 {
        return Err(Error::Config(format!("g is defined for t > 0, got {t}")));
    }
    if psi.len() != u1.len() {
        return Err(Error::DimensionMismatch {
            expected: psi.len().to_string(),
            found: u1.len().to_string(),
        });
    }
    Ok(psi.iter().zip(u1).map(|(p, u)| (u - p) / t).collect())
}

/// Summary of the ψ/g post-processing attached to a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiSummary {
    pub residual: f64,
    pub g_mismatch: f64,
    /// sup‖ψ‖²_{H^σ} + ν∫‖∇ψ‖²_{H^σ}
    pub bound_functional: f64,
    pub sigma: f64,
}

/// Solve ψ from the run's zero-mode history and fill the ψ and g columns.
pub fn fill_psi_columns(rec: &mut RunRecord, psi_dt: f64, n: f64) -> Result<()> {
    let grid = rec.final_state.grid();
    let series = solve_psi(&rec.zero_mode_history, grid, rec.nu, psi_dt)?;
    let plane = series.grid;
    for row in rec.diagnostics.iter_mut() {
        let Some(i) = series.index_of(row.t) else { continue };
        if row.t > 0.0 {
            row.psi_hs = sobolev_norm_slice(&plane, Frame::Lab, &series.psi(i), n + 2.0);
        }
        if row.t >= 1.0 {
            row.g_nm1_t2 = sobolev_norm_slice(&plane, Frame::Lab, &series.g_direct(i), n - 1.0);
        }
    }
    rec.psi = Some(PsiSummary {
        residual: series.residual,
        g_mismatch: series.g_mismatch(),
        bound_functional: series.bound_functional(n + 2.0),
        sigma: n + 2.0,
    });
    Ok(())
}

/// First time ‖u_≠‖ falls to half its initial value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreakConvergence {
    pub t_half: f64,
    /// t_half · ν^{1/3}
    pub ratio: f64,
    pub reached: bool,
    pub residual: Vec<(f64, f64)>,
}

pub fn streak_convergence_metric(rec: &RunRecord) -> StreakConvergence {
    let series = rec.nonzero_series.clone();
    let init = rec.nonzero_initial();
    let mut t_half = f64::INFINITY;
    if init == 0.0 {
        t_half = 0.0;
    } else if rec.flag != RunFlag::Blowup && rec.flag != RunFlag::Transitioned {
        if let Some(p) = series.iter().find(|p| p.1 <= 0.5 * init) {
            t_half = p.0;
        }
    }
    StreakConvergence {
        t_half,
        ratio: t_half * rec.nu.cbrt(),
        reached: t_half.is_finite(),
        residual: series,
    }
}

/// Ids and ε·ν-power normalizations of the bootstrap ratios.
pub const BOOTSTRAP_IDS: [(&str, f64); 11] = [
    ("HN_Q1_0_over_t", 0.0),
    ("B_Q1_neq", -1.0 / 3.0),
    ("A_Q2", 0.0),
    ("B_Q3", 0.0),
    ("M_Q2_neq_Nm1", 0.0),
    ("M_U1_neq_Nm1", 0.0),
    ("U1_0_Nm1", -1.0),
    ("U2_0_Nm1", 0.0),
    ("U3_0_Nm1", 0.0),
    ("g_Nm1_t2", 0.0),
    ("psi_Hs", -1.0),
];

pub const PSI_BOUND_ID: &str = "psi_bound";

/// sup-in-time of each bootstrap quantity over (ε ν^p). NaN entries are skipped;
/// a quantity never recorded yields NaN.
pub fn bootstrap_ratios(rec: &RunRecord) -> Vec<(String, f64)> {
    let eps = rec.eps;
    let nu = rec.nu;
    let mut out = Vec::new();
    for (k, (id, p)) in BOOTSTRAP_IDS.iter().enumerate() {
        let col = 5 + k;
        let mut sup = f64::NAN;
        for r in &rec.diagnostics {
            let v = r.values()[col];
            if v.is_finite() {
                sup = if sup.is_nan() { v } else { sup.max(v) };
            }
        }
        out.push((id.to_string(), normalize(sup, eps * nu.powf(*p))));
    }
    let psi = rec.psi.map_or(f64::NAN, |s| s.bound_functional);
    out.push((PSI_BOUND_ID.to_string(), normalize(psi, eps * eps / (nu * nu))));
    out
}

fn normalize(v: f64, scale: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v / scale
    }
}

/// JSON row of the bootstrap report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEntry {
    pub inequality_id: String,
    /// Largest ratio over the runs.
    pub ratio: f64,
    pub pass: bool,
    pub per_nu: Vec<(f64, f64)>,
    /// max/min across runs.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub entries: Vec<BootstrapEntry>,
    pub stability_factor: f64,
    pub pass: bool,
}

impl BootstrapReport {
    pub fn entry(&self, id: &str) -> Option<&BootstrapEntry> {
        self.entries.iter().find(|e| e.inequality_id == id)
    }
}

/// Ratios across a ν-sweep at fixed δ = εν^{−3/2}; each passes iff every ratio is
/// finite and max/min < `stability_factor`.
pub fn bootstrap_report(runs: &[&RunRecord], stability_factor: f64) -> BootstrapReport {
    let per_run: Vec<(f64, Vec<(String, f64)>)> = runs.iter().map(|r| (r.nu, bootstrap_ratios(r))).collect();
    let mut entries = Vec::new();
    let ids: Vec<String> = per_run.first().map(|p| p.1.iter().map(|e| e.0.clone()).collect()).unwrap_or_default();
    for (k, id) in ids.iter().enumerate() {
        let per_nu: Vec<(f64, f64)> = per_run.iter().map(|(nu, v)| (*nu, v[k].1)).collect();
        let finite = per_nu.iter().all(|p| p.1.is_finite());
        let max = per_nu.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let min = per_nu.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let spread = if max == 0.0 { 1.0 } else { max / min };
        entries.push(BootstrapEntry {
            inequality_id: id.clone(),
            ratio: max,
            pass: finite && spread < stability_factor,
            per_nu,
            spread,
        });
    }
    let pass = entries.iter().all(|e| e.pass);
    BootstrapReport {
        entries,
        stability_factor,
        pass,
    }
}
