use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use couette_lab::checkpoint::{read_checkpoint, write_checkpoint};
use couette_lab::config::SimConfig;
use couette_lab::diagnostics::{bootstrap_ratios, bootstrap_report, streak_convergence_metric};
use couette_lab::io::{emit_diagnostics, emit_linear, emit_streak, write_json};
use couette_lab::linear::linear_decay_report;
use couette_lab::multipliers::{verify_inequalities, SampleSpec};
use couette_lab::nonlinear::{run_simulation, RunRecord};
use couette_lab::spectral::SpectralVectorField;
use couette_lab::streak::{run_streak, StreakRunConfig, StreakState};
use couette_lab::threshold::{bisect_threshold, classify_transition, fingerprint, sweep, CampaignLog};
use couette_lab::Complex64;

#[derive(Parser)]
#[command(name = "couette-lab", version, about = "Simulate and verify perturbations of plane Couette flow")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override solver.nu
    #[arg(long)]
    nu: Option<f64>,
    /// Override data.seed
    #[arg(long)]
    seed: Option<u64>,
    /// Resolution, `N` or `NXxNYxNZ`
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Exact linear solution norms and the enhanced-dissipation fit
    LinearReport {
        #[command(flatten)]
        common: Common,
    },
    /// Evolve the x-independent part of the data with the 2.5D solver
    StreakRun {
        #[command(flatten)]
        common: Common,
        /// Amplitude ε = δ·ν^{3/2}
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
    },
    /// Full nonlinear run with diagnostics
    NlRun {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        /// Continue from a checkpoint instead of fresh data
        #[arg(long)]
        restart: Option<PathBuf>,
    },
    /// Nonlinear runs for every threshold.nus at a fixed δ, with the bootstrap report
    Bootstrap {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        #[arg(long, default_value_t = 4.0)]
        stability_factor: f64,
    },
    /// Bisect the transition threshold at one ν
    Bisect {
        #[command(flatten)]
        common: Common,
    },
    /// Threshold campaign over threshold.nus with the power-law fit
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Reuse points already in the campaign log
        #[arg(long)]
        resume: bool,
    },
    /// Sample the multiplier inequalities
    VerifyMultipliers {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
    },
}

fn parse_grid(s: &str) -> Result<[usize; 3]> {
    let parts: Vec<usize> = s
        .split('x')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("bad --grid `{s}`"))?;
    match parts[..] {
        [n] => Ok([n, n, n]),
        [a, b, c] => Ok([a, b, c]),
        _ => bail!("bad --grid `{s}`: expected N or NXxNYxNZ"),
    }
}

fn load_config(c: &Common) -> Result<SimConfig> {
    let mut cfg = match &c.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            SimConfig::parse(&text).with_context(|| format!("in {}", p.display()))?
        }
        None => SimConfig::default(),
    };
    if let Some(nu) = c.nu {
        cfg.solver.nu = nu;
    }
    if let Some(seed) = c.seed {
        cfg.data.seed = seed;
    }
    if let Some(g) = &c.grid {
        let [nx, ny, nz] = parse_grid(g)?;
        cfg.domain.nx = nx;
        cfg.domain.ny = ny;
        cfg.domain.nz = nz;
    }
    cfg.data.sigma = cfg.solver.sigma;
    cfg.validate()?;
    fs::create_dir_all(&c.out_dir).with_context(|| format!("creating {}", c.out_dir.display()))?;
    fs::write(c.out_dir.join("config.txt"), cfg.serialize())?;
    Ok(cfg)
}

fn zero_plane_only(mut u: SpectralVectorField) -> SpectralVectorField {
    let plane = u.grid.ny * u.grid.nz;
    for c in u.comps.iter_mut() {
        c[plane..].fill(Complex64::new(0.0, 0.0));
    }
    u
}

fn run_summary(rec: &RunRecord, cfg: &SimConfig) -> serde_json::Value {
    let ratios: serde_json::Map<String, serde_json::Value> =
        bootstrap_ratios(rec).into_iter().map(|(k, v)| (k, json!(v))).collect();
    json!({
        "nu": rec.nu,
        "eps": rec.eps,
        "delta": rec.eps / rec.nu.powf(1.5),
        "horizon": rec.horizon,
        "t_end": rec.t_end,
        "flag": rec.flag,
        "steps": rec.steps,
        "sup_l2": rec.sup_l2,
        "remap_discard": rec.remap_discard,
        "classification": classify_transition(rec, &cfg.threshold.criteria),
        "streak_convergence": streak_convergence_metric(rec),
        "psi": rec.psi,
        "bootstrap_ratios": ratios,
    })
}

fn nl_run(cfg: &SimConfig, nu: f64, delta: f64, restart: Option<&Path>, out: &Path) -> Result<RunRecord> {
    let grid = cfg.grid()?;
    let eps = delta * nu.powf(1.5);
    let initial = match restart {
        Some(p) => {
            let s = read_checkpoint(p, Some(grid))?;
            if s.nu != nu {
                bail!("checkpoint {} was written with nu = {}, not {nu}", p.display(), s.nu);
            }
            s
        }
        None => cfg.data.initial_state(grid, eps, nu)?,
    };
    let rec = run_simulation(initial, &cfg.run_options(nu, eps)?)?;
    emit_diagnostics(&rec.diagnostics, out.join("diagnostics.csv"))?;
    write_checkpoint(&rec.final_state, out.join("final.ckpt"))?;
    write_json(out.join("run.json"), &run_summary(&rec, cfg))?;
    Ok(rec)
}

fn threads() -> Result<()> {
    if let Ok(v) = std::env::var("COUETTE_LAB_THREADS") {
        let n: usize = v.parse().with_context(|| format!("COUETTE_LAB_THREADS=`{v}`"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> Result<()> {
    threads()?;
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::LinearReport { common } => {
            let cfg = load_config(&common)?;
            let nu = cfg.solver.nu;
            let u = cfg.data.generate(cfg.grid()?)?;
            let end = cfg.threshold.criteria.horizon(nu);
            let n = (end / cfg.solver.out_interval).ceil() as usize;
            let times: Vec<f64> = (0..=n).map(|i| (i as f64 * cfg.solver.out_interval).min(end)).collect();
            let report = linear_decay_report(&u, nu, &times, cfg.sobolev_n(), 1e-2)?;
            emit_linear(&report.rows, common.out_dir.join("linear.csv"))?;
            write_json(common.out_dir.join("linear.json"), &report)?;
            match &report.fit {
                Some(f) => println!("c = {:.4} (in range: {}), inviscid damping constant {:.4e}", f.c, f.c_in_range, report.inviscid_damping_constant),
                None => println!("no envelope fit; inviscid damping constant {:.4e}", report.inviscid_damping_constant),
            }
        }
        Cmd::StreakRun { common, delta } => {
            let cfg = load_config(&common)?;
            let nu = cfg.solver.nu;
            let mut u = zero_plane_only(cfg.data.generate(cfg.grid()?)?);
            u.scale(delta * nu.powf(1.5));
            let s = StreakState::from_zero_modes(&u, nu)?;
            let run = run_streak(
                &StreakRunConfig {
                    dt: cfg.solver.extension_dt,
                    t_end: cfg.horizon(nu) + cfg.extension(nu),
                    out_interval: cfg.solver.out_interval,
                    sobolev_n: cfg.sobolev_n(),
                },
                s,
                false,
            )?;
            emit_streak(&run.records, common.out_dir.join("streak.csv"))?;
            println!("{} records, blowup: {}", run.records.len(), run.blowup);
        }
        Cmd::NlRun { common, delta, restart } => {
            let cfg = load_config(&common)?;
            let rec = nl_run(&cfg, cfg.solver.nu, delta, restart.as_deref(), &common.out_dir)?;
            println!(
                "{:?} after {} steps at t = {}; {:?}",
                rec.flag,
                rec.steps,
                rec.t_end,
                classify_transition(&rec, &cfg.threshold.criteria)
            );
        }
        Cmd::Bootstrap { common, delta, stability_factor } => {
            let cfg = load_config(&common)?;
            let mut records = Vec::new();
            for &nu in &cfg.threshold.nus {
                let dir = common.out_dir.join(format!("nu_{nu:e}"));
                fs::create_dir_all(&dir)?;
                records.push(nl_run(&cfg, nu, delta, None, &dir)?);
                println!("nu = {nu:e} done");
            }
            let refs: Vec<&RunRecord> = records.iter().collect();
            let report = bootstrap_report(&refs, stability_factor);
            write_json(common.out_dir.join("bootstrap.json"), &report)?;
            println!("bootstrap stable within {stability_factor}: {}", report.pass);
        }
        Cmd::Bisect { common } => {
            let cfg = load_config(&common)?;
            let nu = cfg.solver.nu;
            let mut c = cfg.classifier(nu)?;
            let p = bisect_threshold(&mut c, nu, &cfg.bisect_options(nu))?;
            write_json(common.out_dir.join("bisect.json"), &p)?;
            println!("nu = {nu:e}: eps* = {:.6e} in [{:.6e}, {:.6e}] after {} runs", p.eps_star, p.eps_lo, p.eps_hi, p.runs.len());
        }
        Cmd::Sweep { common, resume } => {
            let cfg = load_config(&common)?;
            let fp = fingerprint(&cfg.serialize());
            let log_path = common.out_dir.join("campaign.jsonl");
            if !resume && log_path.exists() {
                fs::remove_file(&log_path)?;
            }
            let log = CampaignLog::new(&log_path, &fp);
            let classifiers = cfg
                .threshold
                .nus
                .iter()
                .map(|&nu| cfg.classifier(nu))
                .collect::<couette_lab::Result<Vec<_>>>()?;
            let nus = cfg.threshold.nus.clone();
            let report = sweep(
                &nus,
                |nu| {
                    let i = nus.iter().position(|x| *x == nu).expect("nu from list");
                    classifiers[i].clone()
                },
                |nu| cfg.bisect_options(nu),
                cfg.threshold.criteria,
                &fp,
                Some(&log),
            )?;
            fs::write(common.out_dir.join("threshold.csv"), report.csv())?;
            write_json(common.out_dir.join("campaign.json"), &report)?;
            match report.gamma {
                Some(g) => println!("gamma = {g:.4}"),
                None => println!("no fit: {}", report.fit_error.as_deref().unwrap_or("unknown")),
            }
        }
        Cmd::VerifyMultipliers { common, samples } => {
            let cfg = load_config(&common)?;
            let spec = SampleSpec {
                samples_per_nu: samples,
                kappa: cfg.solver.kappa,
                ..Default::default()
            };
            let report = verify_inequalities(&spec, cfg.data.seed)?;
            write_json(common.out_dir.join("inequalities.json"), &report)?;
            println!("{} inequalities, all hold: {}", report.entries.len(), report.pass);
            if !report.pass {
                std::process::exit(2);
            }
        }
    }
    Ok(())
}
