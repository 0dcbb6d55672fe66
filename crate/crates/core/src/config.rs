//! Flat `key = value` run configuration.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multipliers::MultiplierParams;
use crate::nonlinear::RunOptions;
use crate::spectral::{DomainConfig, Grid};
use crate::threshold::{BisectOptions, DataClass, DataFamily, SimClassifier, TransitionCriteria};

/// How long the x-independent modes are continued after the 3D horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Extension {
    /// Up to t = 1/ν.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub nu: f64,
    pub sigma: f64,
    pub cfl: f64,
    pub dt_max: f64,
    pub out_interval: f64,
    /// None: horizon_multiple · ν^{−1/3}.
    pub horizon: Option<f64>,
    pub max_steps: usize,
    pub history_interval: Option<f64>,
    pub zero_mode_extension: Extension,
    pub extension_dt: f64,
    pub psi_dt: f64,
    pub kappa: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            nu: 5e-3,
            sigma: 5.0,
            cfl: 0.5,
            dt_max: 0.05,
            out_interval: 1.0,
            horizon: None,
            max_steps: 1_000_000,
            history_interval: None,
            zero_mode_extension: Extension::Fixed(0.0),
            extension_dt: 0.25,
            psi_dt: 0.25,
            kappa: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub criteria: TransitionCriteria,
    pub tolerance: f64,
    /// Initial bracket in δ = εν^{−3/2}.
    pub delta_lo: f64,
    pub delta_hi: f64,
    pub max_runs: usize,
    pub max_refinements: usize,
    pub nus: Vec<f64>,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            criteria: TransitionCriteria::default(),
            tolerance: 1.2,
            delta_lo: 1.0,
            delta_hi: 16.0,
            max_runs: 40,
            max_refinements: 1,
            nus: vec![5e-3, 2e-3, 1e-3],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub domain: DomainConfig,
    pub solver: SolverConfig,
    pub threshold: ThresholdConfig,
    pub data: DataFamily,
}


/// Every accepted key, in serialization order.
pub const KEYS: [&str; 32] = [
    "domain.lx",
    "domain.ly",
    "domain.lz",
    "domain.nx",
    "domain.ny",
    "domain.nz",
    "solver.nu",
    "solver.sigma",
    "solver.cfl",
    "solver.dt_max",
    "solver.out_interval",
    "solver.horizon",
    "solver.max_steps",
    "solver.history_interval",
    "solver.zero_mode_extension",
    "solver.extension_dt",
    "solver.psi_dt",
    "solver.kappa",
    "threshold.c_trans",
    "threshold.decay_fraction",
    "threshold.horizon_multiple",
    "threshold.tolerance",
    "threshold.delta_lo",
    "threshold.delta_hi",
    "threshold.max_runs",
    "threshold.max_refinements",
    "threshold.nus",
    "data.q",
    "data.band_lo",
    "data.band_hi",
    "data.seed",
    "data.class",
];

fn num<T: std::str::FromStr>(v: &str, what: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("expected {what}, got `{v}`"))
}

impl SimConfig {
    /// N = σ − 2.
    pub fn sobolev_n(&self) -> f64 {
        self.solver.sigma - 2.0
    }

    pub fn grid(&self) -> Result<Grid> {
        self.domain.grid()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected `key = value`, got `{body}`"),
                });
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown key `{k}`"),
                });
            }
            if let Some(&first) = seen.get(k) {
                return Err(Error::DuplicateKey {
                    key: k.to_string(),
                    first,
                    second: line,
                });
            }
            seen.insert(k.to_string(), line);
            cfg.set(k, v).map_err(|msg| Error::Parse { line, msg })?;
        }
        cfg.data.sigma = cfg.solver.sigma;
        if let Some((key, msg)) = cfg.violations().into_iter().next() {
            return Err(match seen.get(key) {
                Some(&line) => Error::Parse { line, msg },
                None => Error::Config(msg),
            });
        }
        Ok(cfg)
    }

    fn set(&mut self, k: &str, v: &str) -> std::result::Result<(), String> {
        let d = &mut self.domain;
        let s = &mut self.solver;
        let t = &mut self.threshold;
        match k {
            "domain.lx" => d.lx = num(v, "a number")?,
            "domain.ly" => d.ly = num(v, "a number")?,
            "domain.lz" => d.lz = num(v, "a number")?,
            "domain.nx" => d.nx = num(v, "an integer")?,
            "domain.ny" => d.ny = num(v, "an integer")?,
            "domain.nz" => d.nz = num(v, "an integer")?,
            "solver.nu" => s.nu = num(v, "a number")?,
            "solver.sigma" => s.sigma = num(v, "a number")?,
            "solver.cfl" => s.cfl = num(v, "a number")?,
            "solver.dt_max" => s.dt_max = num(v, "a number")?,
            "solver.out_interval" => s.out_interval = num(v, "a number")?,
            "solver.horizon" => {
                s.horizon = if v == "auto" { None } else { Some(num(v, "a number or `auto`")?) }
            }
            "solver.max_steps" => s.max_steps = num(v, "an integer")?,
            "solver.history_interval" => {
                s.history_interval = if v == "none" { None } else { Some(num(v, "a number or `none`")?) }
            }
            "solver.zero_mode_extension" => {
                s.zero_mode_extension = if v == "auto" {
                    Extension::Auto
                } else {
                    Extension::Fixed(num(v, "a number or `auto`")?)
                }
            }
            "solver.extension_dt" => s.extension_dt = num(v, "a number")?,
            "solver.psi_dt" => s.psi_dt = num(v, "a number")?,
            "solver.kappa" => s.kappa = num(v, "a number")?,
            "threshold.c_trans" => t.criteria.c_trans = num(v, "a number")?,
            "threshold.decay_fraction" => t.criteria.decay_fraction = num(v, "a number")?,
            "threshold.horizon_multiple" => t.criteria.horizon_multiple = num(v, "a number")?,
            "threshold.tolerance" => t.tolerance = num(v, "a number")?,
            "threshold.delta_lo" => t.delta_lo = num(v, "a number")?,
            "threshold.delta_hi" => t.delta_hi = num(v, "a number")?,
            "threshold.max_runs" => t.max_runs = num(v, "an integer")?,
            "threshold.max_refinements" => t.max_refinements = num(v, "an integer")?,
            "threshold.nus" => {
                t.nus = if v.is_empty() {
                    Vec::new()
                } else {
                    v.split(',').map(|x| num(x.trim(), "a comma-separated list of numbers")).collect::<std::result::Result<_, _>>()?
                }
            }
            "data.q" => self.data.q = num(v, "a number")?,
            "data.band_lo" => self.data.band[0] = num(v, "a number")?,
            "data.band_hi" => self.data.band[1] = num(v, "a number")?,
            "data.seed" => self.data.seed = num(v, "an integer")?,
            "data.class" => self.data.class = v.parse::<DataClass>().map_err(|e| e.to_string())?,
            _ => unreachable!("key list checked by caller"),
        }
        Ok(())
    }

    /// Constraint violations as (key, message).
    fn violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if let Err(e) = self.domain.validate() {
            out.push(("domain.lx", e.to_string()));
        }
        let s = &self.solver;
        if !(s.sigma > 4.5) {
            out.push(("solver.sigma", format!("sigma must exceed 9/2, got {}", s.sigma)));
        } else if !(self.sobolev_n() > 2.5) {
            out.push(("solver.sigma", format!("N = sigma - 2 must exceed 5/2, got {}", self.sobolev_n())));
        }
        if !(s.nu > 0.0 && s.nu < 1.0) {
            out.push(("solver.nu", format!("nu must lie in (0, 1), got {}", s.nu)));
        }
        if !(s.kappa > 0.0 && s.kappa < 0.5) {
            out.push(("solver.kappa", format!("kappa must lie in (0, 1/2), got {}", s.kappa)));
        }
        let positive: [(&'static str, f64); 11] = [
            ("solver.cfl", s.cfl),
            ("solver.dt_max", s.dt_max),
            ("solver.out_interval", s.out_interval),
            ("solver.extension_dt", s.extension_dt),
            ("solver.psi_dt", s.psi_dt),
            ("threshold.c_trans", self.threshold.criteria.c_trans),
            ("threshold.decay_fraction", self.threshold.criteria.decay_fraction),
            ("threshold.horizon_multiple", self.threshold.criteria.horizon_multiple),
            ("threshold.delta_lo", self.threshold.delta_lo),
            ("threshold.delta_hi", self.threshold.delta_hi),
            ("data.band_hi", self.data.band[1]),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                out.push((k, format!("{k} must be positive, got {v}")));
            }
        }
        if let Some(h) = s.horizon {
            if !(h > 0.0) {
                out.push(("solver.horizon", format!("horizon must be positive, got {h}")));
            }
        }
        if let Some(h) = s.history_interval {
            if !(h > 0.0) {
                out.push(("solver.history_interval", format!("history interval must be positive, got {h}")));
            }
        }
        if let Extension::Fixed(e) = s.zero_mode_extension {
            if !(e >= 0.0) {
                out.push(("solver.zero_mode_extension", format!("extension must be nonnegative, got {e}")));
            }
        }
        if !(self.threshold.tolerance > 1.0) {
            out.push(("threshold.tolerance", format!("tolerance must exceed 1, got {}", self.threshold.tolerance)));
        }
        if !(self.threshold.delta_hi > self.threshold.delta_lo) {
            out.push(("threshold.delta_hi", "delta_hi must exceed delta_lo".into()));
        }
        if let Some(nu) = self.threshold.nus.iter().find(|nu| !(**nu > 0.0 && **nu < 1.0)) {
            out.push(("threshold.nus", format!("every nu must lie in (0, 1), got {nu}")));
        }
        if let Err(e) = self.data.validate() {
            out.push(("data.band_lo", e.to_string()));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            Some((_, msg)) => Err(Error::Config(msg)),
            None => Ok(()),
        }
    }

    /// Every key with its current value; `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let d = &self.domain;
        let s = &self.solver;
        let t = &self.threshold;
        let opt = |v: Option<f64>, none: &str| v.map_or(none.to_string(), |x| format!("{x:?}"));
        let vals: [String; 32] = [
            format!("{:?}", d.lx),
            format!("{:?}", d.ly),
            format!("{:?}", d.lz),
            d.nx.to_string(),
            d.ny.to_string(),
            d.nz.to_string(),
            format!("{:?}", s.nu),
            format!("{:?}", s.sigma),
            format!("{:?}", s.cfl),
            format!("{:?}", s.dt_max),
            format!("{:?}", s.out_interval),
            opt(s.horizon, "auto"),
            s.max_steps.to_string(),
            opt(s.history_interval, "none"),
            match s.zero_mode_extension {
                Extension::Auto => "auto".into(),
                Extension::Fixed(e) => format!("{e:?}"),
            },
            format!("{:?}", s.extension_dt),
            format!("{:?}", s.psi_dt),
            format!("{:?}", s.kappa),
            format!("{:?}", t.criteria.c_trans),
            format!("{:?}", t.criteria.decay_fraction),
            format!("{:?}", t.criteria.horizon_multiple),
            format!("{:?}", t.tolerance),
            format!("{:?}", t.delta_lo),
            format!("{:?}", t.delta_hi),
            t.max_runs.to_string(),
            t.max_refinements.to_string(),
            t.nus.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(","),
            format!("{:?}", self.data.q),
            format!("{:?}", self.data.band[0]),
            format!("{:?}", self.data.band[1]),
            self.data.seed.to_string(),
            self.data.class.to_string(),
        ];
        let mut out = String::new();
        for (k, v) in KEYS.iter().zip(vals) {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn horizon(&self, nu: f64) -> f64 {
        self.solver.horizon.unwrap_or_else(|| self.threshold.criteria.horizon(nu))
    }

    pub fn extension(&self, nu: f64) -> f64 {
        match self.solver.zero_mode_extension {
            Extension::Auto => (1.0 / nu - self.horizon(nu)).max(0.0),
            Extension::Fixed(e) => e,
        }
    }

    pub fn run_options(&self, nu: f64, eps: f64) -> Result<RunOptions> {
        let s = &self.solver;
        Ok(RunOptions {
            horizon: self.horizon(nu),
            out_interval: s.out_interval,
            cfl: s.cfl,
            dt_max: s.dt_max,
            max_steps: s.max_steps,
            stop_l2: None,
            history_interval: s.history_interval,
            zero_mode_extension: self.extension(nu),
            extension_dt: s.extension_dt,
            extension_out_interval: s.out_interval,
            multipliers: Some(MultiplierParams::new(nu, s.kappa)?),
            sobolev_n: self.sobolev_n(),
            eps,
            psi_dt: s.psi_dt,
        })
    }

    pub fn bisect_options(&self, nu: f64) -> BisectOptions {
        let scale = nu.powf(1.5);
        BisectOptions {
            bracket: [self.threshold.delta_lo * scale, self.threshold.delta_hi * scale],
            tolerance: self.threshold.tolerance,
            max_runs: self.threshold.max_runs,
            expand: 4.0,
        }
    }

    /// Simulation classifier for one ν; threshold runs skip the ψ machinery.
    pub fn classifier(&self, nu: f64) -> Result<SimClassifier> {
        let mut options = self.run_options(nu, 0.0)?;
        options.history_interval = None;
        options.zero_mode_extension = 0.0;
        options.multipliers = None;
        let mut family = self.data;
        family.sigma = self.solver.sigma;
        Ok(SimClassifier {
            grid: self.grid()?,
            nu,
            family,
            criteria: self.threshold.criteria,
            options,
            max_refinements: self.threshold.max_refinements,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let c = SimConfig::parse("# nothing\n\n").unwrap();
        assert_eq!(c, SimConfig::default());
        assert_eq!(c.sobolev_n(), 3.0);
    }

    #[test]
    fn serializer_round_trips() {
        let mut c = SimConfig::default();
        c.solver.nu = 0.1 + 0.2;
        c.solver.horizon = Some(12.5);
        c.solver.history_interval = Some(0.1);
        c.solver.zero_mode_extension = Extension::Auto;
        c.threshold.nus = vec![1e-3, 3e-4];
        c.data.class = DataClass::Noisy;
        assert_eq!(SimConfig::parse(&c.serialize()).unwrap(), c);
    }

    #[test]
    fn low_sigma_is_rejected_on_its_line() {
        match SimConfig::parse("solver.nu = 0.01\nsolver.sigma = 4\n") {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("sigma must exceed 9/2"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_key_names_both_lines() {
        match SimConfig::parse("data.q = 6\n\ndata.q = 7\n") {
            Err(Error::DuplicateKey { key, first, second }) => {
                assert_eq!((key.as_str(), first, second), ("data.q", 1, 3));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_and_bad_value() {
        assert!(matches!(SimConfig::parse("solver.bogus = 1"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(SimConfig::parse("\ndomain.nx = many"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(SimConfig::parse("domain.nx"), Err(Error::Parse { line: 1, .. })));
    }
}
