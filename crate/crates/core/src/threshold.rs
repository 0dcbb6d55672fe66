//! Initial-data families, the transition indicator, amplitude bisection and the γ fit.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::sobolev_norm_slice;
use crate::error::{Error, Result};
use crate::linear::least_squares;
use crate::nonlinear::{run_simulation, NonlinearState, RunFlag, RunOptions, RunRecord};
use crate::spectral::{Frame, Grid, SpectralVectorField};

/// Spectral roughness of a data family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataClass {
    /// Modes restricted to the band.
    Smooth,
    /// Every retained mode above the band's lower edge.
    Noisy,
}

impl std::str::FromStr for DataClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smooth" => Ok(Self::Smooth),
            "noisy" => Ok(Self::Noisy),
            _ => Err(Error::Config(format!("unknown data class `{s}` (smooth | noisy)"))),
        }
    }
}

impl std::fmt::Display for DataClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Smooth => "smooth",
            Self::Noisy => "noisy",
        })
    }
}

/// Random divergence-free data with coefficients ∝ ⟨|ξ|⟩^{−q} on a band of
/// max-index shells, normalized to unit H^σ norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataFamily {
    pub q: f64,
    /// Inclusive range of max(|m|, |n|, |p|).
    pub band: [f64; 2],
    pub seed: u64,
    pub class: DataClass,
    pub sigma: f64,
}

impl Default for DataFamily {
    fn default() -> Self {
        Self {
            q: 7.0,
            band: [1.0, 2.0],
            seed: 1,
            class: DataClass::Smooth,
            sigma: 5.0,
        }
    }
}

impl DataFamily {
    pub fn validate(&self) -> Result<()> {
        if !(self.band[0] >= 0.0 && self.band[1] >= self.band[0]) {
            return Err(Error::Config(format!("data band {:?} is not an interval", self.band)));
        }
        if !self.q.is_finite() {
            return Err(Error::Config("data.q must be finite".into()));
        }
        Ok(())
    }

    fn in_band(&self, m: i64, n: i64, p: i64) -> bool {
        let s = m.abs().max(n.abs()).max(p.abs()) as f64;
        match self.class {
            DataClass::Smooth => s >= self.band[0] && s <= self.band[1],
            DataClass::Noisy => s >= self.band[0],
        }
    }

    /// Unit-H^σ field at t = 0 in the shearing frame.
    pub fn generate(&self, grid: Grid) -> Result<SpectralVectorField> {
        self.validate()?;
        let frame = Frame::shearing();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut u = SpectralVectorField::zeros(grid, frame, 0.0);
        for idx in 0..grid.len() {
            let (m, n, p) = grid.mode(idx);
            let neg = grid.neg_index(idx);
            if neg <= idx || !grid.retained(m, n, p) || !self.in_band(m, n, p) {
                continue;
            }
            let xi = grid.frequency(idx, frame);
            let amp = (1.0 + xi.norm().powi(2)).powf(-0.5 * self.q);
            let mut a = [Complex64::new(0.0, 0.0); 3];
            for c in a.iter_mut() {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                *c = Complex64::new(re, im) * amp;
            }
            let kv = [xi.k, xi.eta, xi.l];
            let k2 = xi.norm().powi(2);
            let d = (a[0] * kv[0] + a[1] * kv[1] + a[2] * kv[2]) / k2;
            for c in 0..3 {
                let v = a[c] - d * kv[c];
                u.comps[c][idx] = v;
                u.comps[c][neg] = v.conj();
            }
        }
        let norm = hs_norm(&u, self.sigma);
        if norm == 0.0 {
            return Err(Error::Config(format!(
                "data band {:?} contains no retained modes on a {}x{}x{} grid",
                self.band, grid.nx, grid.ny, grid.nz
            )));
        }
        u.scale(1.0 / norm);
        u.div_free = true;
        Ok(u)
    }

    pub fn initial_state(&self, grid: Grid, eps: f64, nu: f64) -> Result<NonlinearState> {
        let mut u = self.generate(grid)?;
        u.scale(eps);
        NonlinearState::new(u, nu)
    }
}

/// ‖u‖_{H^s} with frame wavenumbers.
pub fn hs_norm(u: &SpectralVectorField, s: f64) -> f64 {
    u.comps
        .iter()
        .map(|c| sobolev_norm_slice(&u.grid, u.frame, c, s).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Constants of the transition indicator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionCriteria {
    pub c_trans: f64,
    pub decay_fraction: f64,
    pub horizon_multiple: f64,
}

impl Default for TransitionCriteria {
    fn default() -> Self {
        Self {
            c_trans: 10.0,
            decay_fraction: 0.5,
            horizon_multiple: 3.0,
        }
    }
}

impl TransitionCriteria {
    pub fn horizon(&self, nu: f64) -> f64 {
        self.horizon_multiple * nu.powf(-1.0 / 3.0)
    }

    pub fn l2_limit(&self, nu: f64) -> f64 {
        self.c_trans * nu.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Laminar,
    Transitioned,
    Indeterminate,
}

/// Transitioned on blowup, on sup‖u‖ > C ν^{1/2}, or when ‖u_≠(T)‖ has not
/// fallen below the decay fraction of ‖u_≠(0)‖ by the horizon.
pub fn classify_transition(rec: &RunRecord, criteria: &TransitionCriteria) -> Classification {
    if rec.flag == RunFlag::Blowup || rec.flag == RunFlag::Transitioned {
        return Classification::Transitioned;
    }
    if rec.sup_l2 > criteria.l2_limit(rec.nu) {
        return Classification::Transitioned;
    }
    if rec.flag == RunFlag::Partial || rec.t_end < criteria.horizon(rec.nu) - 1e-9 {
        return Classification::Indeterminate;
    }
    if rec.nonzero_final() > criteria.decay_fraction * rec.nonzero_initial() {
        return Classification::Transitioned;
    }
    Classification::Laminar
}

/// One classified run in a bisection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub eps: f64,
    pub outcome: Classification,
    pub grid: usize,
    pub sup_l2: f64,
    pub nonzero_ratio: f64,
}

/// Something that decides whether amplitude ε transitions.
pub trait Classifier {
    fn classify(&mut self, eps: f64) -> Result<AuditEntry>;
}

/// Classifier backed by full simulations.
#[derive(Debug, Clone)]
pub struct SimClassifier {
    pub grid: Grid,
    pub nu: f64,
    pub family: DataFamily,
    pub criteria: TransitionCriteria,
    pub options: RunOptions,
    /// Reruns on a 3/2-finer grid after an indeterminate outcome.
    pub max_refinements: usize,
}

impl SimClassifier {
    pub fn run(&self, grid: Grid, eps: f64) -> Result<RunRecord> {
        let state = self.family.initial_state(grid, eps, self.nu)?;
        let mut opts = self.options.clone();
        opts.horizon = self.criteria.horizon(self.nu);
        opts.stop_l2 = Some(self.criteria.l2_limit(self.nu));
        opts.eps = eps;
        run_simulation(state, &opts)
    }
}

fn refine(n: usize) -> usize {
    let r = (n * 3).div_ceil(2);
    r + r % 2
}

impl Classifier for SimClassifier {
    fn classify(&mut self, eps: f64) -> Result<AuditEntry> {
        let mut grid = self.grid;
        let mut attempt = 0;
        loop {
            let rec = self.run(grid, eps)?;
            let outcome = classify_transition(&rec, &self.criteria);
            let init = rec.nonzero_initial();
            let entry = AuditEntry {
                eps,
                outcome,
                grid: grid.nx.max(grid.ny).max(grid.nz),
                sup_l2: rec.sup_l2,
                nonzero_ratio: if init > 0.0 { rec.nonzero_final() / init } else { 0.0 },
            };
            if outcome != Classification::Indeterminate || attempt >= self.max_refinements {
                return Ok(entry);
            }
            attempt += 1;
            grid = Grid::new(refine(grid.nx), refine(grid.ny), refine(grid.nz), grid.lx, grid.ly, grid.lz)?;
        }
    }
}

/// Bisection settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectOptions {
    pub bracket: [f64; 2],
    /// Stop once ε_hi/ε_lo ≤ tolerance.
    pub tolerance: f64,
    pub max_runs: usize,
    pub expand: f64,
}

impl Default for BisectOptions {
    fn default() -> Self {
        Self {
            bracket: [1e-6, 1e-3],
            tolerance: 1.2,
            max_runs: 40,
            expand: 4.0,
        }
    }
}

/// Bracketed threshold at one ν.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPoint {
    pub nu: f64,
    pub eps_lo: f64,
    pub eps_hi: f64,
    pub eps_star: f64,
    pub runs: Vec<AuditEntry>,
    /// Every laminar ε lies below every transitioned ε.
    pub monotone: bool,
}

pub fn audit_is_monotone(runs: &[AuditEntry]) -> bool {
    let lam = runs
        .iter()
        .filter(|r| r.outcome == Classification::Laminar)
        .map(|r| r.eps)
        .fold(f64::NEG_INFINITY, f64::max);
    let tr = runs
        .iter()
        .filter(|r| r.outcome == Classification::Transitioned)
        .map(|r| r.eps)
        .fold(f64::INFINITY, f64::min);
    lam < tr
}

/// Geometric bisection of the amplitude with automatic bracket expansion.
pub fn bisect_threshold(classifier: &mut dyn Classifier, nu: f64, opts: &BisectOptions) -> Result<ThresholdPoint> {
    let [mut lo, mut hi] = opts.bracket;
    if !(lo > 0.0 && hi > lo) || !(opts.tolerance > 1.0) || !(opts.expand > 1.0) {
        return Err(Error::Bracket(format!(
            "invalid bracket {:?} / tolerance {} / expansion {}",
            opts.bracket, opts.tolerance, opts.expand
        )));
    }
    let mut runs: Vec<AuditEntry> = Vec::new();
    let mut eval = |eps: f64, runs: &mut Vec<AuditEntry>| -> Result<Classification> {
        if runs.len() >= opts.max_runs {
            return Err(Error::Bracket(format!(
                "run budget of {} exhausted at nu = {nu:e}",
                opts.max_runs
            )));
        }
        let e = classifier.classify(eps)?;
        let out = e.outcome;
        runs.push(e);
        if out == Classification::Indeterminate {
            return Err(Error::Bracket(format!("indeterminate classification at eps = {eps:e}, nu = {nu:e}")));
        }
        Ok(out)
    };
    let mut hi_known = false;
    while eval(lo, &mut runs)? == Classification::Transitioned {
        hi = lo;
        lo /= opts.expand;
        hi_known = true;
    }
    if !hi_known {
        while eval(hi, &mut runs)? == Classification::Laminar {
            lo = hi;
            hi *= opts.expand;
        }
    }
    while hi / lo > opts.tolerance {
        let mid = (lo * hi).sqrt();
        match eval(mid, &mut runs)? {
            Classification::Laminar => lo = mid,
            _ => hi = mid,
        }
    }
    Ok(ThresholdPoint {
        nu,
        eps_lo: lo,
        eps_hi: hi,
        eps_star: (lo * hi).sqrt(),
        monotone: audit_is_monotone(&runs),
        runs,
    })
}

/// log ε* = γ log ν + intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaFit {
    pub gamma: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
    pub spans_decade: bool,
}

/// Least-squares slope of log ε* against log ν. Needs three distinct ν spanning
/// at least a factor of two.
pub fn fit_gamma(points: &[ThresholdPoint]) -> Result<GammaFit> {
    let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.nu, p.eps_star)).collect();
    fit_power_law(&pts)
}

pub fn fit_power_law(pts: &[(f64, f64)]) -> Result<GammaFit> {
    if pts.iter().any(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
        return Err(Error::Fit("nu and eps* must be positive".into()));
    }
    let mut nus: Vec<f64> = pts.iter().map(|p| p.0).collect();
    nus.sort_by(f64::total_cmp);
    nus.dedup();
    if nus.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 distinct nu, got {}", nus.len())));
    }
    let spread = nus[nus.len() - 1] / nus[0];
    if spread < 2.0 {
        return Err(Error::Fit(format!("nu values span only a factor {spread:.3}")));
    }
    let logs: Vec<(f64, f64)> = pts.iter().map(|p| (p.0.ln(), p.1.ln())).collect();
    let (gamma, intercept) = least_squares(&logs).ok_or_else(|| Error::Fit("degenerate nu spread".into()))?;
    Ok(GammaFit {
        gamma,
        intercept,
        residuals: logs.iter().map(|(x, y)| y - (gamma * x + intercept)).collect(),
        spans_decade: spread >= 10.0 * (1.0 - 1e-12),
    })
}

/// Aggregated campaign result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub points: Vec<ThresholdPoint>,
    pub gamma: Option<f64>,
    pub intercept: Option<f64>,
    pub residuals: Vec<f64>,
    pub spans_decade: bool,
    pub fit_error: Option<String>,
    pub indicator: TransitionCriteria,
    pub fingerprint: String,
}

impl CampaignReport {
    pub fn eps_star_nonincreasing(&self) -> bool {
        let mut p: Vec<&ThresholdPoint> = self.points.iter().collect();
        p.sort_by(|a, b| b.nu.total_cmp(&a.nu));
        p.windows(2).all(|w| w[1].eps_star <= w[0].eps_star)
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("nu,eps_lo,eps_hi,eps_star,runs,monotone\n");
        for p in &self.points {
            s.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{},{}\n",
                p.nu,
                p.eps_lo,
                p.eps_hi,
                p.eps_star,
                p.runs.len(),
                p.monotone
            ));
        }
        s
    }
}

/// Hex SHA-256 of a configuration text.
pub fn fingerprint(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct LogLine {
    fingerprint: String,
    point: ThresholdPoint,
    digest: String,
}

/// Append-only JSONL log of finished threshold points.
#[derive(Debug, Clone)]
pub struct CampaignLog {
    path: PathBuf,
    fingerprint: String,
}

impl CampaignLog {
    pub fn new(path: impl Into<PathBuf>, fingerprint: &str) -> Self {
        Self {
            path: path.into(),
            fingerprint: fingerprint.to_string(),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Points already in the log. A final line without a newline (interrupted
    /// write) is ignored; any other damage is an integrity error.
    pub fn load(&self) -> Result<Vec<ThresholdPoint>> {
        let f = match File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let text = {
            let mut r = BufReader::new(f);
            let mut s = String::new();
            loop {
                let mut line = String::new();
                if r.read_line(&mut line)? == 0 {
                    break;
                }
                s.push_str(&line);
            }
            s
        };
        let complete = match text.rfind('\n') {
            Some(i) => &text[..=i],
            None => "",
        };
        let mut out = Vec::new();
        for (no, line) in complete.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: LogLine = serde_json::from_str(line)
                .map_err(|e| Error::Integrity(format!("{}:{}: {e}", self.path.display(), no + 1)))?;
            if parsed.fingerprint != self.fingerprint {
                return Err(Error::Integrity(format!(
                    "{}:{}: configuration fingerprint {} does not match {}",
                    self.path.display(),
                    no + 1,
                    parsed.fingerprint,
                    self.fingerprint
                )));
            }
            let body = serde_json::to_string(&parsed.point)?;
            if fingerprint(&body) != parsed.digest {
                return Err(Error::Integrity(format!(
                    "{}:{}: digest mismatch",
                    self.path.display(),
                    no + 1
                )));
            }
            out.push(parsed.point);
        }
        Ok(out)
    }

    /// Drop a dangling partial line so appends start on a fresh line.
    fn truncate_partial(&self) -> Result<()> {
        let Ok(text) = std::fs::read_to_string(&self.path) else {
            return Ok(());
        };
        if !text.is_empty() && !text.ends_with('\n') {
            let keep = text.rfind('\n').map_or(0, |i| i + 1);
            std::fs::write(&self.path, &text[..keep])?;
        }
        Ok(())
    }

    pub fn append(&self, point: &ThresholdPoint) -> Result<()> {
        let body = serde_json::to_string(point)?;
        let line = LogLine {
            fingerprint: self.fingerprint.clone(),
            digest: fingerprint(&body),
            point: point.clone(),
        };
        let mut text = serde_json::to_string(&line)?;
        text.push('\n');
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path)?;
        f.lock()?;
        f.write_all(text.as_bytes())?;
        f.flush()?;
        f.unlock()?;
        Ok(())
    }
}

/// Run one bisection per ν (in parallel), reusing points found in `log`.
pub fn sweep<F, C>(
    nus: &[f64],
    make_classifier: F,
    opts_for: impl Fn(f64) -> BisectOptions + Sync,
    criteria: TransitionCriteria,
    fingerprint: &str,
    log: Option<&CampaignLog>,
) -> Result<CampaignReport>
where
    F: Fn(f64) -> C + Sync,
    C: Classifier,
{
    let done = match log {
        Some(l) => {
            let pts = l.load()?;
            l.truncate_partial()?;
            pts
        }
        None => Vec::new(),
    };
    let todo: Vec<f64> = nus
        .iter()
        .copied()
        .filter(|nu| !done.iter().any(|p| p.nu == *nu))
        .collect();
    let fresh: Vec<Result<ThresholdPoint>> = todo
        .par_iter()
        .map(|&nu| {
            let mut c = make_classifier(nu);
            let p = bisect_threshold(&mut c, nu, &opts_for(nu))?;
            if let Some(l) = log {
                l.append(&p)?;
            }
            Ok(p)
        })
        .collect();
    let mut points: Vec<ThresholdPoint> = done.into_iter().filter(|p| nus.contains(&p.nu)).collect();
    for p in fresh {
        points.push(p?);
    }
    points.sort_by(|a, b| b.nu.total_cmp(&a.nu));
    let (mut gamma, mut intercept, mut residuals, mut spans, mut fit_error) = (None, None, Vec::new(), false, None);
    if !points.is_empty() {
        match fit_gamma(&points) {
            Ok(f) => {
                gamma = Some(f.gamma);
                intercept = Some(f.intercept);
                residuals = f.residuals;
                spans = f.spans_decade;
            }
            Err(e) => fit_error = Some(e.to_string()),
        }
    }
    Ok(CampaignReport {
        points,
        gamma,
        intercept,
        residuals,
        spans_decade: spans,
        fit_error,
        indicator: criteria,
        fingerprint: fingerprint.to_string(),
    })
}
