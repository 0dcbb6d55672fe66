//! Time-dependent Fourier multipliers m, M⁰, M¹, M² and their sampled inequalities.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;
use crate::spectral::{laplacian_l_symbol, FrequencyTriple};

/// Parameters of the multiplier family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierParams {
    pub nu: f64,
    pub kappa: f64,
    pub c_window: f64,
}

impl MultiplierParams {
    pub fn new(nu: f64, kappa: f64) -> Result<Self> {
        let p = Self {
            nu,
            kappa,
            c_window: 1000.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(Error::Config(format!("nu must lie in (0, 1), got {}", self.nu)));
        }
        if !(self.kappa > 0.0 && self.kappa < 0.5) {
            return Err(Error::Config(format!(
                "kappa must lie in (0, 1/2), got {}",
                self.kappa
            )));
        }
        if !(self.c_window > 0.0 && self.c_window.is_finite()) {
            return Err(Error::Config(format!(
                "window constant must be positive, got {}",
                self.c_window
            )));
        }
        Ok(())
    }

    /// Window length c_window·ν^{-1/3}.
    pub fn window(&self) -> f64 {
        self.c_window * self.nu.powf(-1.0 / 3.0)
    }
}

/// Selects one factor of M = M⁰M¹M², or the product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Which {
    M0,
    M1,
    M2,
    Product,
}

const F_X_MIN: f64 = 1e-6;
const F_X_MAX: f64 = 1e8;
const F_RATIO: f64 = 1.1;

/// Evaluator with a memoized antiderivative table for M².
#[derive(Debug, Clone)]
pub struct Multipliers {
    params: MultiplierParams,
    p: f64,
    nu_third: f64,
    f_inf: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl Multipliers {
    pub fn new(params: MultiplierParams) -> Result<Self> {
        params.validate()?;
        let p = 1.0 + params.kappa;
        let f_inf = (PI / p) / (PI / p).sin();
        let mut nodes = vec![F_X_MIN];
        let mut values = vec![series_small(F_X_MIN, p)];
        while *nodes.last().expect("seeded") < F_X_MAX {
            let a = *nodes.last().expect("seeded");
            let b = (a * F_RATIO).min(F_X_MAX);
            let v = quadrature::integrate(|u| kernel(u, p), a, b, 1e-15)?;
            values.push(values.last().expect("seeded") + v);
            nodes.push(b);
        }
        Ok(Self {
            params,
            p,
            nu_third: params.nu.cbrt(),
            f_inf,
            nodes,
            values,
        })
    }

    pub fn params(&self) -> &MultiplierParams {
        &self.params
    }

    /// ∫₀^∞ du/(u^{1+κ}+1) = (π/p)/sin(π/p).
    pub fn f_infinity(&self) -> f64 {
        self.f_inf
    }

    /// F(x) = ∫₀ˣ du/(|u|^{1+κ}+1), odd in x.
    pub fn antiderivative(&self, x: f64) -> f64 {
        let s = x.signum();
        let a = x.abs();
        if a == 0.0 {
            return 0.0;
        }
        let v = if a <= F_X_MIN {
            series_small(a, self.p)
        } else if a >= F_X_MAX {
            self.f_inf - tail_large(a, self.p)
        } else {
            let i = self.nodes.partition_point(|&n| n <= a) - 1;
            let base = self.values[i];
            let (panel, err) = quadrature::gk15(&|u| kernel(u, self.p), self.nodes[i], a);
            if err < 1e-14 {
                base + panel
            } else {
                base + quadrature::integrate(|u| kernel(u, self.p), self.nodes[i], a, 1e-14)
                    .unwrap_or(panel)
            }
        };
        s * v
    }

    /// m(t, ξ): the closed-form solution of ṁ/m = 2k(η−kt)/|K|² on the window.
    pub fn eval_m(&self, t: f64, xi: &FrequencyTriple) -> f64 {
        if xi.k == 0.0 {
            return 1.0;
        }
        let h = xi.eta / xi.k;
        let lo = h.max(0.0);
        let hi = h + self.params.window();
        if t <= lo || hi <= lo {
            return 1.0;
        }
        let s = t.min(hi);
        laplacian_l_symbol(xi, lo) / laplacian_l_symbol(xi, s)
    }

    /// d log m / dt, right-continuous at the window endpoints.
    pub fn eval_dlogm_dt(&self, t: f64, xi: &FrequencyTriple) -> f64 {
        if xi.k == 0.0 {
            return 0.0;
        }
        let h = xi.eta / xi.k;
        let hi = h + self.params.window();
        if t >= h && t < hi {
            2.0 * xi.k * (xi.eta - xi.k * t) / laplacian_l_symbol(xi, t)
        } else {
            0.0
        }
    }

    fn arctan_bracket(t: f64, xi: &FrequencyTriple) -> (f64, f64) {
        let a = (xi.k * xi.k + xi.l * xi.l).sqrt();
        let d = ((xi.eta - xi.k * t) / a).atan() - (xi.eta / a).atan();
        (a, d)
    }

    pub fn log_m0(&self, t: f64, xi: &FrequencyTriple) -> f64 {
        if xi.k == 0.0 {
            return 0.0;
        }
        let (a, d) = Self::arctan_bracket(t, xi);
        xi.k / a * d
    }

    pub fn log_m1(&self, t: f64, xi: &FrequencyTriple) -> f64 {
        if xi.k == 0.0 {
            return 0.0;
        }
        let (a, d) = Self::arctan_bracket(t, xi);
        let kl = (1.0 + xi.k * xi.k * xi.l * xi.l).sqrt();
        2.0 * kl / (xi.k * a) * d
    }

    pub fn log_m2(&self, t: f64, xi: &FrequencyTriple) -> f64 {
        if xi.k == 0.0 {
            return 0.0;
        }
        let h = xi.eta / xi.k;
        -(self.antiderivative(self.nu_third * (t - h)) - self.antiderivative(-self.nu_third * h))
    }

    pub fn eval_m0(&self, t: f64, xi: &FrequencyTriple) -> f64 {
        self.log_m0(t, xi).exp()
    }

    pub fn eval_m1(&self, t: f64, xi: &FrequencyTriple) -> f64 {
        self.log_m1(t, xi).exp()
    }

    pub fn eval_m2(&self, t: f64, xi: &FrequencyTriple) -> f64 {
        self.log_m2(t, xi).exp()
    }

    pub fn eval(&self, t: f64, xi: &FrequencyTriple, which: Which) -> f64 {
        match which {
            Which::M0 => self.eval_m0(t, xi),
            Which::M1 => self.eval_m1(t, xi),
            Which::M2 => self.eval_m2(t, xi),
            Which::Product => (self.log_m0(t, xi) + self.log_m1(t, xi) + self.log_m2(t, xi)).exp(),
        }
    }

    /// −d log Mⁱ/dt, nonnegative.
    pub fn decay_rate(&self, t: f64, xi: &FrequencyTriple, which: Which) -> f64 {
        if xi.k == 0.0 {
            return 0.0;
        }
        let lap = laplacian_l_symbol(xi, t);
        let r0 = || xi.k * xi.k / lap;
        let r1 = || 2.0 * (1.0 + xi.k * xi.k * xi.l * xi.l).sqrt() / lap;
        let r2 = || {
            let u = self.nu_third * (t - xi.eta / xi.k).abs();
            self.nu_third / (u.powf(self.p) + 1.0)
        };
        match which {
            Which::M0 => r0(),
            Which::M1 => r1(),
            Which::M2 => r2(),
            Which::Product => r0() + r1() + r2(),
        }
    }

    /// −Ṁ M = (−d log M/dt)·M².
    pub fn eval_neg_mdot_m(&self, t: f64, xi: &FrequencyTriple, which: Which) -> f64 {
        let m = self.eval(t, xi, which);
        self.decay_rate(t, xi, which) * m * m
    }

    /// √(−Ṁ M).
    pub fn eval_sqrt_neg_mdot_m(&self, t: f64, xi: &FrequencyTriple, which: Which) -> f64 {
        self.eval_neg_mdot_m(t, xi, which).sqrt()
    }

    /// Universal lower bound of M²: exp(−2F(∞)).
    pub fn m2_lower_bound(&self) -> f64 {
        (-2.0 * self.f_inf).exp()
    }
}

#[inline]
fn kernel(u: f64, p: f64) -> f64 {
    1.0 / (u.abs().powf(p) + 1.0)
}

fn series_small(x: f64, p: f64) -> f64 {
    x - x.powf(p + 1.0) / (p + 1.0) + x.powf(2.0 * p + 1.0) / (2.0 * p + 1.0)
}

/// ∫ₓ^∞ du/(u^p+1) for large x.
fn tail_large(x: f64, p: f64) -> f64 {
    let mut s = 0.0;
    let mut sign = 1.0;
    for j in 1..8 {
        let e = p * j as f64 - 1.0;
        s += sign * x.powf(-e) / e;
        sign = -sign;
    }
    s
}

/// Sampling ranges for [`verify_inequalities`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleSpec {
    pub nus: Vec<f64>,
    pub samples_per_nu: usize,
    pub k_max: i64,
    pub l_max: i64,
    /// Critical times are drawn within ±`h_span`·ν^{-1/3}.
    pub h_span: f64,
    pub kappa: f64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self {
            nus: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
            samples_per_nu: 20_000,
            k_max: 8,
            l_max: 8,
            h_span: 30.0,
            kappa: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub nu: f64,
    pub t: f64,
    pub k: f64,
    pub eta: f64,
    pub l: f64,
    pub eta_prime: f64,
    pub l_prime: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerNuConstant {
    pub nu: f64,
    pub worst_constant: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InequalityEntry {
    pub inequality_id: String,
    pub samples: usize,
    pub worst_constant: f64,
    pub argmax_point: SamplePoint,
    pub pass: bool,
    pub per_nu: Vec<PerNuConstant>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InequalityReport {
    pub entries: Vec<InequalityEntry>,
    pub pass: bool,
}

impl InequalityReport {
    pub fn entry(&self, id: &str) -> Option<&InequalityEntry> {
        self.entries.iter().find(|e| e.inequality_id == id)
    }
}

/// Identifiers in report order.
pub const INEQUALITY_IDS: [&str; 10] = [
    "m_upper",
    "m_lower",
    "m_laplacian",
    "ed_lemma",
    "M0_lower",
    "M1_lower",
    "M2_lower",
    "m_commutator",
    "dM0_commutator",
    "dM1_commutator",
];
const DM2_ID: &str = "dM2_commutator";

/// Hard ceilings on observed constants for the inequalities that carry one.
fn absolute_ceiling(id: &str) -> f64 {
    match id {
        "m_upper" | "M0_lower" | "M1_lower" | "M2_lower" => 1.0 + 1e-12,
        "m_lower" => 1e7,
        _ => f64::INFINITY,
    }
}

struct Tracker {
    worst: f64,
    at: Option<SamplePoint>,
}

impl Tracker {
    fn new() -> Self {
        Self {
            worst: 0.0,
            at: None,
        }
    }

    fn push(&mut self, v: f64, at: SamplePoint) {
        if !v.is_finite() {
            self.worst = f64::INFINITY;
            self.at = Some(at);
        } else if v > self.worst || self.at.is_none() {
            self.worst = v;
            self.at = Some(at);
        }
    }
}

fn japanese(x: f64, y: f64) -> f64 {
    (1.0 + x * x + y * y).sqrt()
}

/// Samples every multiplier inequality and reports the worst observed constant
/// (sup of LHS/RHS) per inequality. An entry passes iff its constants are finite,
/// below any hard ceiling, and within a factor 2 of each other across ν.
pub fn verify_inequalities(spec: &SampleSpec, seed: u64) -> Result<InequalityReport> {
    if spec.nus.is_empty() || spec.samples_per_nu == 0 {
        return Err(Error::Config("inequality sample spec is empty".into()));
    }
    let ids: Vec<&str> = INEQUALITY_IDS.iter().copied().chain([DM2_ID]).collect();
    let mut per_nu: Vec<Vec<Tracker>> = Vec::new();
    for (ni, &nu) in spec.nus.iter().enumerate() {
        let mult = Multipliers::new(MultiplierParams::new(nu, spec.kappa)?)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(ni as u64 + 1)));
        let mut tr: Vec<Tracker> = ids.iter().map(|_| Tracker::new()).collect();
        let s = nu.powf(-1.0 / 3.0);
        let w = mult.params().window();
        let nu23 = nu.powf(2.0 / 3.0);
        let e_pi = (-PI).exp();
        let e_4pi = (-4.0 * PI).exp();
        let m2_floor = mult.m2_lower_bound();
        let exp2 = (1.0 + spec.kappa) / 2.0;
        for _ in 0..spec.samples_per_nu {
            let k = rng.random_range(1..=spec.k_max) as f64 * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let l = rng.random_range(-spec.l_max..=spec.l_max) as f64;
            let h = match rng.random_range(0..3) {
                0 => s * rng.random_range(-spec.h_span..spec.h_span),
                1 => rng.random_range(-5.0..5.0),
                _ => -w * rng.random_range(0.5..1.5),
            };
            let eta = k * h;
            let t = match rng.random_range(0..4) {
                0 => (h + s * rng.random_range(-5.0..5.0)).max(0.0),
                1 => rng.random_range(0.0..(h.max(0.0) + 1.5 * w)),
                2 => h.max(0.0) + w * rng.random_range(0.9..1.1),
                _ => 10f64.powf(rng.random_range(-3.0..1.0)),
            };
            let d_eta = match rng.random_range(0..3) {
                0 => k * s * rng.random_range(-spec.h_span..spec.h_span),
                1 => rng.random_range(-3.0..3.0),
                _ => k * w * rng.random_range(-2.0..2.0),
            };
            let l2 = l + rng.random_range(-3..=3) as f64;
            let eta2 = eta + d_eta;
            let at = SamplePoint {
                nu,
                t,
                k,
                eta,
                l,
                eta_prime: eta2,
                l_prime: l2,
            };
            let xi = FrequencyTriple::new(k, eta, l);
            let xi2 = FrequencyTriple::new(k, eta2, l2);

            let m = mult.eval_m(t, &xi);
            let lap = laplacian_l_symbol(&xi, t);
            tr[0].push(m, at);
            tr[1].push(nu23 / m, at);
            tr[2].push((k * k + l * l) / lap / m, at);
            let ed = nu.powf(-1.0 / 6.0) * mult.eval_sqrt_neg_mdot_m(t, &xi, Which::M2) + nu.cbrt() * lap.sqrt();
            tr[3].push(1.0 / ed, at);
            tr[4].push(e_pi / mult.eval_m0(t, &xi), at);
            tr[5].push(e_4pi / mult.eval_m1(t, &xi), at);
            tr[6].push(m2_floor / mult.eval_m2(t, &xi), at);

            let jp = japanese(eta - eta2, l - l2);
            tr[7].push(m / (jp * jp * mult.eval_m(t, &xi2)), at);
            let q0 = mult.eval_sqrt_neg_mdot_m(t, &xi, Which::M0) / mult.eval_sqrt_neg_mdot_m(t, &xi2, Which::M0);
            tr[8].push(q0 / jp, at);
            let q1 = mult.eval_sqrt_neg_mdot_m(t, &xi, Which::M1) / mult.eval_sqrt_neg_mdot_m(t, &xi2, Which::M1);
            tr[9].push(q1 / jp.powf(1.5), at);
            let q2 = mult.eval_sqrt_neg_mdot_m(t, &xi, Which::M2) / mult.eval_sqrt_neg_mdot_m(t, &xi2, Which::M2);
            let j2 = japanese(nu.cbrt() * (eta - eta2), 0.0).powf(exp2);
            tr[10].push(q2 / j2, at);
        }
        per_nu.push(tr);
    }

    let mut entries = Vec::new();
    for (ii, id) in ids.iter().enumerate() {
        let consts: Vec<PerNuConstant> = spec
            .nus
            .iter()
            .zip(per_nu.iter())
            .map(|(&nu, tr)| PerNuConstant {
                nu,
                worst_constant: tr[ii].worst,
            })
            .collect();
        let (wi, worst) = consts
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.worst_constant))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty sweep");
        let lo = consts.iter().map(|c| c.worst_constant).fold(f64::INFINITY, f64::min);
        let finite = consts.iter().all(|c| c.worst_constant.is_finite());
        let stable = lo > 0.0 && worst / lo <= 2.0;
        let pass = finite && stable && worst <= absolute_ceiling(id);
        entries.push(InequalityEntry {
            inequality_id: id.to_string(),
            samples: spec.samples_per_nu * spec.nus.len(),
            worst_constant: worst,
            argmax_point: per_nu[wi][ii].at.expect("samples taken"),
            pass,
            per_nu: consts,
        });
    }
    let pass = entries.iter().all(|e| e.pass);
    Ok(InequalityReport { entries, pass })
}
