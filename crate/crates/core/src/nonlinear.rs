//! Full 3D perturbation dynamics in the shearing frame.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{DiagnosticsRecord, ModeWeights, PsiSummary, ZeroModeSample};
use crate::error::{Error, Result};
use crate::linear::dissipation_increment;
use crate::multipliers::{MultiplierParams, Multipliers};
use crate::spectral::{project_slices, Frame, Grid, SpectralField, SpectralVectorField, Transform};
use crate::streak::{embed_in_3d, StreakSolver, StreakState};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Velocity perturbation in the shearing frame.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearState {
    pub u: SpectralVectorField,
    pub nu: f64,
}

impl NonlinearState {
    pub fn new(mut u: SpectralVectorField, nu: f64) -> Result<Self> {
        if u.frame == Frame::Lab {
            if u.t != 0.0 {
                return Err(Error::Config("lab-frame data can only seed a run at t = 0".into()));
            }
            u.frame = Frame::shearing();
        }
        u.dealias();
        u.project_div_free();
        Ok(Self { u, nu })
    }

    pub fn t(&self) -> f64 {
        self.u.t
    }

    pub fn remaps(&self) -> u64 {
        self.u.frame.remaps()
    }

    pub fn grid(&self) -> Grid {
        self.u.grid
    }

    pub fn energy(&self) -> f64 {
        0.5 * self.u.norm_sq()
    }

    pub fn is_finite(&self) -> bool {
        self.u
            .comps
            .iter()
            .all(|c| c.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
    }

    pub fn q_fields(&self) -> QFields {
        QFields::from_velocity(&self.u)
    }
}

/// Qⁱ = Δ_L uⁱ.
#[derive(Debug, Clone, PartialEq)]
pub struct QFields {
    pub grid: Grid,
    pub frame: Frame,
    pub t: f64,
    pub comps: [Vec<Complex64>; 3],
}

impl QFields {
    pub fn from_velocity(u: &SpectralVectorField) -> Self {
        let g = u.grid;
        let mut comps = u.comps.clone();
        for idx in 0..g.len() {
            let kv = g.wavevector(idx, u.frame, u.t);
            let lap = -(kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2]);
            for c in comps.iter_mut() {
                c[idx] *= lap;
            }
        }
        Self {
            grid: g,
            frame: u.frame,
            t: u.t,
            comps,
        }
    }

    /// Inverse of [`QFields::from_velocity`]; the K = 0 mode maps to zero.
    pub fn to_velocity(&self) -> SpectralVectorField {
        let g = self.grid;
        let mut out = SpectralVectorField::zeros(g, self.frame, self.t);
        for idx in 0..g.len() {
            let kv = g.wavevector(idx, self.frame, self.t);
            let k2 = kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2];
            if k2 == 0.0 {
                continue;
            }
            for c in 0..3 {
                out.comps[c][idx] = -self.comps[c][idx] / k2;
            }
        }
        out.div_free = false;
        out
    }

    pub fn component(&self, i: usize) -> SpectralField {
        SpectralField {
            grid: self.grid,
            frame: self.frame,
            t: self.t,
            data: self.comps[i].clone(),
        }
    }
}

struct Tendency {
    comps: [Vec<Complex64>; 3],
    cfl_rate: f64,
}

/// Pseudo-spectral integrator for one grid and viscosity.
#[derive(Debug, Clone)]
pub struct Solver {
    grid: Grid,
    transform: Transform,
    pub nu: f64,
    /// Advective CFL limit.
    pub cfl: f64,
}

impl Solver {
    pub fn new(grid: Grid, nu: f64) -> Self {
        Self {
            grid,
            transform: Transform::new(grid),
            nu,
            cfl: 0.5,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    fn physical(&self, comps: &[Vec<Complex64>; 3]) -> [Vec<f64>; 3] {
        let n = self.grid.len();
        let (mut r1, mut r2) = (vec![0.0; n], vec![0.0; n]);
        self.transform.inverse_pair(&comps[0], &comps[1], &mut r1, &mut r2);
        let mut c3 = comps[2].clone();
        self.transform.fft(&mut c3, true);
        let r3 = c3.into_iter().map(|c| c.re).collect();
        [r1, r2, r3]
    }

    /// Largest retained wavenumber magnitudes per axis; y includes the shear drift.
    fn max_wavenumbers(&self) -> [f64; 3] {
        let g = self.grid;
        let c = g.dealias_cutoffs();
        [g.kx(c[0]), g.ky(c[1] + c[0]), g.kz(c[2])]
    }

    fn cfl_rate(&self, r: &[Vec<f64>; 3]) -> f64 {
        let kmax = self.max_wavenumbers();
        let mut rate = 0.0;
        for c in 0..3 {
            let m = r[c].iter().fold(0.0f64, |a, v| a.max(v.abs()));
            rate += m * kmax[c];
        }
        rate / std::f64::consts::PI
    }

    /// Tendency excluding νΔ_L: lift-up, linear pressure and projected advection.
    fn tendency(&self, comps: &[Vec<Complex64>; 3], frame: Frame, t: f64, nonlinear: bool) -> Tendency {
        let g = self.grid;
        let n = g.len();
        let mut f = [vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]];
        let mut cfl_rate = 0.0;
        if nonlinear {
            let r = self.physical(comps);
            cfl_rate = self.cfl_rate(&r);
            let prod = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x * y).collect() };
            let p11 = prod(&r[0], &r[0]);
            let p12 = prod(&r[0], &r[1]);
            let p13 = prod(&r[0], &r[2]);
            let p22 = prod(&r[1], &r[1]);
            let p23 = prod(&r[1], &r[2]);
            let p33 = prod(&r[2], &r[2]);
            let [f11, f12, f13, f22, f23, f33] = &mut f;
            self.transform.forward_pair(&p11, &p12, f11, f12);
            self.transform.forward_pair(&p13, &p22, f13, f22);
            self.transform.forward_pair(&p23, &p33, f23, f33);
        }
        let mut out = [vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]];
        let [o1, o2, o3] = &mut out;
        let [f11, f12, f13, f22, f23, f33] = &f;
        let u2 = &comps[1];
        o1.par_iter_mut()
            .zip(o2.par_iter_mut())
            .zip(o3.par_iter_mut())
            .enumerate()
            .for_each(|(idx, ((a, b), c))| {
                let (m, nn, p) = g.mode(idx);
                if !g.retained(m, nn, p) {
                    return;
                }
                let kv = g.wavevector(idx, frame, t);
                let k2 = kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2];
                if k2 == 0.0 {
                    return;
                }
                let mut v = [ZERO; 3];
                if nonlinear {
                    let d = |x: Complex64, y: Complex64, z: Complex64| -I * (x * kv[0] + y * kv[1] + z * kv[2]);
                    v = [
                        d(f11[idx], f12[idx], f13[idx]),
                        d(f12[idx], f22[idx], f23[idx]),
                        d(f13[idx], f23[idx], f33[idx]),
                    ];
                    let dv = (v[0] * kv[0] + v[1] * kv[1] + v[2] * kv[2]) / k2;
                    for (vc, kc) in v.iter_mut().zip(kv) {
                        *vc -= dv * kc;
                    }
                }
                let w = u2[idx] * (2.0 * kv[0] / k2);
                *a = v[0] - u2[idx] + w * kv[0];
                *b = v[1] + w * kv[1];
                *c = v[2] + w * kv[2];
            });
        Tendency { comps: out, cfl_rate }
    }

    pub fn nonlinear_rhs(&self, state: &NonlinearState) -> SpectralVectorField {
        let tend = self.tendency(&state.u.comps, state.u.frame, state.u.t, true);
        SpectralVectorField {
            grid: self.grid,
            frame: state.u.frame,
            t: state.u.t,
            comps: tend.comps,
            div_free: false,
        }
    }

    /// Linear part of the tendency only.
    pub fn linearized_rhs(&self, state: &NonlinearState) -> SpectralVectorField {
        let tend = self.tendency(&state.u.comps, state.u.frame, state.u.t, false);
        SpectralVectorField {
            grid: self.grid,
            frame: state.u.frame,
            t: state.u.t,
            comps: tend.comps,
            div_free: false,
        }
    }

    /// Advective CFL number per unit time step of `state`.
    pub fn cfl_rate_of(&self, state: &NonlinearState) -> f64 {
        self.cfl_rate(&self.physical(&state.u.comps))
    }

    pub fn step(&self, state: &NonlinearState, dt: f64) -> Result<NonlinearState> {
        self.step_with(state, dt, true).map(|(s, _)| s)
    }

    /// Integrating-factor RK4 with the exact Φ increments; every stage is projected.
    /// Returns the new state and the CFL rate measured at the start of the step.
    pub fn step_with(&self, state: &NonlinearState, dt: f64, nonlinear: bool) -> Result<(NonlinearState, f64)> {
        let g = self.grid;
        let n = g.len();
        let frame = state.u.frame;
        let t0 = state.u.t;
        let tr = g.remap_interval();
        if !(dt > 0.0) || dt > tr * (1.0 + 1e-12) {
            return Err(Error::Config(format!("time step {dt} outside (0, {tr}]")));
        }
        let nu = self.nu;
        let mut e_nh = vec![0.0; n];
        let mut e_n1 = vec![0.0; n];
        let mut e_h1 = vec![0.0; n];
        e_nh.par_iter_mut()
            .zip(e_n1.par_iter_mut())
            .zip(e_h1.par_iter_mut())
            .enumerate()
            .for_each(|(idx, ((a, b), c))| {
                let kv = g.wavevector(idx, frame, t0);
                let ph = dissipation_increment(kv[0], kv[1], kv[2], nu, 0.5 * dt);
                let pf = dissipation_increment(kv[0], kv[1], kv[2], nu, dt);
                *a = (-ph).exp();
                *b = (-pf).exp();
                *c = (-(pf - ph)).exp();
            });

        let u0 = &state.u.comps;
        let k1 = self.tendency(u0, frame, t0, nonlinear);
        if nonlinear && k1.cfl_rate > 0.0 {
            let limit = self.cfl / k1.cfl_rate;
            if dt > limit {
                return Err(Error::Cfl { dt, limit });
            }
        }
        let h = dt;
        let combine = |f: &(dyn Fn(usize, usize) -> Complex64 + Sync), t: f64| -> [Vec<Complex64>; 3] {
            let mut out: [Vec<Complex64>; 3] = [vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]];
            for (c, oc) in out.iter_mut().enumerate() {
                oc.par_iter_mut().enumerate().for_each(|(i, v)| *v = f(c, i));
            }
            let [a, b, cc] = &mut out;
            project_slices(&g, frame, t, a, b, cc);
            out
        };
        let th = t0 + 0.5 * h;
        let t1 = t0 + h;
        let u2 = combine(&|c, i| e_nh[i] * (u0[c][i] + 0.5 * h * k1.comps[c][i]), th);
        let k2 = self.tendency(&u2, frame, th, nonlinear);
        let u3 = combine(&|c, i| e_nh[i] * u0[c][i] + 0.5 * h * k2.comps[c][i], th);
        let k3 = self.tendency(&u3, frame, th, nonlinear);
        let u4 = combine(&|c, i| e_n1[i] * u0[c][i] + h * e_h1[i] * k3.comps[c][i], t1);
        let k4 = self.tendency(&u4, frame, t1, nonlinear);
        let un = combine(
            &|c, i| {
                e_n1[i] * u0[c][i]
                    + h / 6.0
                        * (e_n1[i] * k1.comps[c][i]
                            + 2.0 * e_h1[i] * (k2.comps[c][i] + k3.comps[c][i])
                            + k4.comps[c][i])
            },
            t1,
        );
        let u = SpectralVectorField {
            grid: g,
            frame,
            t: t1,
            comps: un,
            div_free: true,
        };
        Ok((NonlinearState { u, nu: state.nu }, k1.cfl_rate))
    }

    /// Next scheduled remap time for `state`.
    pub fn next_remap_time(&self, state: &NonlinearState) -> f64 {
        (state.remaps() + 1) as f64 * self.grid.remap_interval()
    }

    /// Re-index y so that η − kt is back on the grid. Returns the new state and
    /// the energy of modes pushed out of the retained band.
    pub fn remap(&self, state: &NonlinearState) -> Result<(NonlinearState, f64)> {
        let g = self.grid;
        let due = self.next_remap_time(state);
        if (state.t() - due).abs() > 1e-9 * due.max(1.0) {
            return Err(Error::RemapSchedule {
                t: state.t(),
                interval: g.remap_interval(),
            });
        }
        let mut out = SpectralVectorField::zeros(g, Frame::Shearing { remaps: state.remaps() + 1 }, due);
        let mut discarded = 0.0;
        for idx in 0..g.len() {
            let (m, nn, p) = g.mode(idx);
            let vals = [state.u.comps[0][idx], state.u.comps[1][idx], state.u.comps[2][idx]];
            let e: f64 = vals.iter().map(|v| v.norm_sqr()).sum();
            if e == 0.0 {
                continue;
            }
            let target = nn - m;
            match g.mode_index(m, target, p) {
                Some(j) if g.retained(m, target, p) => {
                    for c in 0..3 {
                        out.comps[c][j] = vals[c];
                    }
                }
                _ => discarded += 0.5 * e,
            }
        }
        out.div_free = state.u.div_free;
        Ok((NonlinearState { u: out, nu: state.nu }, discarded))
    }

    /// P₀[∇_L·(u_≠ u¹_≠)] on the k = 0 plane.
    pub fn zero_mode_advection(&self, u: &SpectralVectorField) -> Vec<Complex64> {
        let g = self.grid;
        let n = g.len();
        let plane = g.ny * g.nz;
        let mut neq = u.comps.clone();
        for c in neq.iter_mut() {
            c[..plane].iter_mut().for_each(|v| *v = ZERO);
        }
        let r = self.physical(&neq);
        let p21: Vec<f64> = r[1].iter().zip(&r[0]).map(|(a, b)| a * b).collect();
        let p31: Vec<f64> = r[2].iter().zip(&r[0]).map(|(a, b)| a * b).collect();
        let (mut f21, mut f31) = (vec![ZERO; n], vec![ZERO; n]);
        self.transform.forward_pair(&p21, &p31, &mut f21, &mut f31);
        let mut out = vec![ZERO; plane];
        for (idx, o) in out.iter_mut().enumerate() {
            let (_, nn, p) = g.mode(idx);
            if !g.retained(0, nn, p) {
                continue;
            }
            let xi = g.frequency(idx, u.frame);
            *o = I * (f21[idx] * xi.eta + f31[idx] * xi.l);
        }
        out
    }

    /// ∫ u¹u² under the averaged measure.
    pub fn production(&self, u: &SpectralVectorField) -> f64 {
        u.comps[0]
            .iter()
            .zip(&u.comps[1])
            .map(|(a, b)| (a * b.conj()).re)
            .sum()
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunFlag {
    Completed,
    Transitioned,
    Blowup,
    Partial,
}

/// Knobs of [`run_simulation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub horizon: f64,
    pub out_interval: f64,
    pub cfl: f64,
    pub dt_max: f64,
    pub max_steps: usize,
    /// Stop as transitioned once ‖u‖_{L²} exceeds this.
    pub stop_l2: Option<f64>,
    /// Record zero-mode samples at this spacing (enables ψ and g diagnostics).
    pub history_interval: Option<f64>,
    /// Continue the x-independent modes with the streak solver for this long after the horizon.
    pub zero_mode_extension: f64,
    pub extension_dt: f64,
    pub extension_out_interval: f64,
    /// Multiplier parameters for the bootstrap columns.
    pub multipliers: Option<MultiplierParams>,
    /// Sobolev index N of the bootstrap norms.
    pub sobolev_n: f64,
    /// Amplitude ε of the initial data, carried for normalization.
    pub eps: f64,
    /// Step size used by the ψ solve.
    pub psi_dt: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            out_interval: 0.5,
            cfl: 0.5,
            dt_max: 0.05,
            max_steps: usize::MAX,
            stop_l2: None,
            history_interval: None,
            zero_mode_extension: 0.0,
            extension_dt: 0.1,
            extension_out_interval: 1.0,
            multipliers: None,
            sobolev_n: 3.0,
            eps: 0.0,
            psi_dt: 0.025,
        }
    }
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub nu: f64,
    pub eps: f64,
    pub horizon: f64,
    pub t_end: f64,
    pub flag: RunFlag,
    pub steps: usize,
    pub diagnostics: Vec<DiagnosticsRecord>,
    /// (t, ‖u_≠‖_{L²}) after every step.
    pub nonzero_series: Vec<(f64, f64)>,
    pub sup_l2: f64,
    pub remap_discard: f64,
    pub zero_mode_history: Vec<ZeroModeSample>,
    pub continuation_start: Option<f64>,
    pub psi: Option<PsiSummary>,
    pub final_state: NonlinearState,
}

impl RunRecord {
    pub fn nonzero_initial(&self) -> f64 {
        self.nonzero_series.first().map_or(0.0, |p| p.1)
    }

    pub fn nonzero_final(&self) -> f64 {
        self.nonzero_series.last().map_or(0.0, |p| p.1)
    }
}

fn nonzero_l2(u: &SpectralVectorField) -> f64 {
    let plane = u.grid.ny * u.grid.nz;
    u.comps
        .iter()
        .map(|c| c[plane..].iter().map(|v| v.norm_sqr()).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

fn zero_sample(solver: &Solver, u: &SpectralVectorField) -> ZeroModeSample {
    let plane = u.grid.ny * u.grid.nz;
    ZeroModeSample {
        t: u.t,
        u: [
            u.comps[0][..plane].to_vec(),
            u.comps[1][..plane].to_vec(),
            u.comps[2][..plane].to_vec(),
        ],
        nl0: solver.zero_mode_advection(u),
    }
}

/// Step `initial` to `opts.horizon`, remapping on schedule and recording diagnostics.
pub fn run_simulation(initial: NonlinearState, opts: &RunOptions) -> Result<RunRecord> {
    let grid = initial.grid();
    let mut solver = Solver::new(grid, initial.nu);
    solver.cfl = opts.cfl;
    let mult = match opts.multipliers {
        Some(p) => Some(Multipliers::new(p)?),
        None => None,
    };
    let mut state = initial;
    state.u.dealias();
    let nu = state.nu;
    let mut discard = 0.0;
    let mut diagnostics = Vec::new();
    let mut history = Vec::new();
    let record = |s: &NonlinearState, discard: f64, out: &mut Vec<DiagnosticsRecord>| {
        // multipliers are identically one on the k = 0 plane
        let plane = s.grid().ny * s.grid().nz;
        let has_neq = s.u.comps.iter().any(|c| c[plane..].iter().any(|v| v.norm_sqr() != 0.0));
        let w = match (&mult, has_neq) {
            (Some(m), true) => Some(ModeWeights::new(s.grid(), s.u.frame, s.t(), m)),
            _ => None,
        };
        out.push(DiagnosticsRecord::compute(&s.u, w.as_ref(), opts.sobolev_n, discard));
    };
    record(&state, discard, &mut diagnostics);
    if opts.history_interval.is_some() {
        history.push(zero_sample(&solver, &state.u));
    }
    let e0 = state.u.norm_sq().sqrt();
    let mut sup_l2 = e0;
    let mut nonzero_series = vec![(state.t(), nonzero_l2(&state.u))];
    let mut flag = RunFlag::Completed;
    if let Some(limit) = opts.stop_l2 {
        if e0 > limit {
            flag = RunFlag::Transitioned;
        }
    }
    let mut next_out = state.t() + opts.out_interval;
    let mut next_hist = state.t() + opts.history_interval.unwrap_or(f64::INFINITY);
    let mut rate = solver.cfl_rate_of(&state);
    let mut steps = 0usize;
    let tiny = 1e-9;
    while flag == RunFlag::Completed && state.t() < opts.horizon - tiny {
        if steps >= opts.max_steps {
            flag = RunFlag::Partial;
            break;
        }
        let next_remap = solver.next_remap_time(&state);
        let target = next_remap.min(opts.horizon);
        let mut cand = opts.dt_max;
        if rate > 0.0 {
            cand = cand.min(opts.cfl / rate);
        }
        let mut attempt = 0;
        let new_state = loop {
            let n_sub = ((target - state.t()) / cand).ceil().max(1.0);
            let dt = (target - state.t()) / n_sub;
            match solver.step_with(&state, dt, true) {
                Ok((s, r)) => {
                    rate = r;
                    break s;
                }
                Err(Error::Cfl { limit, .. }) if attempt < 8 => {
                    cand = 0.9 * limit;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        };
        state = new_state;
        steps += 1;
        if !state.is_finite() {
            flag = RunFlag::Blowup;
            break;
        }
        if (state.t() - next_remap).abs() < tiny * next_remap.max(1.0) {
            state.u.t = next_remap;
            let (s, d) = solver.remap(&state)?;
            state = s;
            discard += d;
        } else if (state.t() - opts.horizon).abs() < tiny {
            state.u.t = opts.horizon;
        }
        let l2 = state.u.norm_sq().sqrt();
        sup_l2 = sup_l2.max(l2);
        nonzero_series.push((state.t(), nonzero_l2(&state.u)));
        if let Some(limit) = opts.stop_l2 {
            if l2 > limit {
                flag = RunFlag::Transitioned;
            }
        }
        let at_out = state.t() >= next_out - tiny;
        let at_hist = state.t() >= next_hist - tiny;
        if at_out || flag != RunFlag::Completed || state.t() >= opts.horizon - tiny {
            record(&state, discard, &mut diagnostics);
            while next_out <= state.t() + tiny {
                next_out += opts.out_interval;
            }
        }
        if opts.history_interval.is_some()
            && (at_hist || at_out || state.t() >= opts.horizon - tiny)
        {
            history.push(zero_sample(&solver, &state.u));
            if let Some(hi) = opts.history_interval {
                while next_hist <= state.t() + tiny {
                    next_hist += hi;
                }
            }
        }
    }
    let t_end = state.t();
    let mut continuation_start = None;
    if flag == RunFlag::Completed && opts.zero_mode_extension > 0.0 {
        continuation_start = Some(t_end);
        let streak = StreakSolver::new(grid.zero_plane())?;
        let mut s = StreakState::from_zero_modes(&state.u, nu)?;
        let t_stop = t_end + opts.zero_mode_extension;
        let mut next_out = t_end + opts.extension_out_interval;
        while s.t < t_stop - tiny {
            let dt = opts.extension_dt.min(t_stop - s.t);
            s = streak.step(&s, dt)?;
            if (s.t - t_stop).abs() < tiny {
                s.t = t_stop;
            }
            if !s.is_finite() {
                flag = RunFlag::Blowup;
                break;
            }
            if s.t >= next_out - tiny || s.t >= t_stop {
                let u = embed_in_3d(&s, grid, state.u.frame)?;
                record(&NonlinearState { u: u.clone(), nu }, discard, &mut diagnostics);
                if opts.history_interval.is_some() {
                    history.push(zero_sample(&solver, &u));
                }
                next_out += opts.extension_out_interval;
            }
        }
    }
    let mut rec = RunRecord {
        nu,
        eps: opts.eps,
        horizon: opts.horizon,
        t_end,
        flag,
        steps,
        diagnostics,
        nonzero_series,
        sup_l2,
        remap_discard: discard,
        zero_mode_history: history,
        continuation_start,
        psi: None,
        final_state: state,
    };
    if opts.history_interval.is_some() && rec.zero_mode_history.len() >= 2 && flag != RunFlag::Blowup {
        crate::diagnostics::fill_psi_columns(&mut rec, opts.psi_dt, opts.sobolev_n)?;
    }
    Ok(rec)
}
