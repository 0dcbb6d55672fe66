//! One verdict line per acceptance criterion; each test also fails when its
//! criterion does.

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use couette_lab::config::{Extension, SimConfig};
use couette_lab::diagnostics::{bootstrap_report, streak_convergence_metric, PSI_BOUND_ID};
use couette_lab::linear::{evolve_q2, evolve_zero_modes, linear_decay_report, recover_u2, LinearMode};
use couette_lab::multipliers::{verify_inequalities, MultiplierParams, Multipliers, SampleSpec};
use couette_lab::nonlinear::{run_simulation, NonlinearState, RunRecord, Solver};
use couette_lab::spectral::{laplacian_l_symbol, Frame, FrequencyTriple, Grid, SpectralVectorField};
use couette_lab::streak::{StreakSolver, StreakState};
use couette_lab::threshold::{
    classify_transition, fit_gamma, sweep, Classification, DataFamily, ThresholdPoint,
};
use couette_lab::Complex64;
use couette_lab_verify::{lift_up_rk4, log_m0_oracle, log_m1_oracle, log_m_oracle, streak_rhs_convolution, verdict};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const THEOREM_NUS: [f64; 3] = [5e-3, 2e-3, 1e-3];
const THEOREM_DELTA: f64 = 0.01;

fn spread(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

fn random_streak(g: Grid, nu: f64, band: i64, seed: u64) -> StreakState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = StreakState::zeros(g, nu, 0.0);
    for idx in 0..g.len() {
        let (_, n, p) = g.mode(idx);
        let neg = g.neg_index(idx);
        if neg <= idx || n.abs().max(p.abs()) > band || (n, p) == (0, 0) {
            continue;
        }
        for f in [&mut s.omega, &mut s.u1] {
            let v = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            f[idx] = v;
            f[neg] = v.conj();
        }
    }
    s
}

fn l2(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn data_with_l2(g: Grid, target: f64, seed: u64) -> SpectralVectorField {
    let mut u = DataFamily {
        seed,
        ..Default::default()
    }
    .generate(g)
    .unwrap();
    let n = u.norm_sq().sqrt();
    u.scale(target / n);
    u
}

fn step_to(solver: &Solver, mut s: NonlinearState, t_end: f64, dt: f64) -> NonlinearState {
    while s.t() < t_end - 1e-12 {
        let next = solver.next_remap_time(&s).min(t_end);
        let n = ((next - s.t()) / dt).round().max(1.0) as usize;
        let h = (next - s.t()) / n as f64;
        for _ in 0..n {
            s = solver.step(&s, h).unwrap();
        }
        let due = solver.next_remap_time(&s);
        if (s.t() - due).abs() < 1e-9 {
            s.u.t = due;
            s = solver.remap(&s).unwrap().0;
        }
    }
    s
}

fn field_diff(a: &SpectralVectorField, b: &SpectralVectorField) -> f64 {
    (0..3)
        .map(|c| a.comps[c].iter().zip(&b.comps[c]).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

#[test]
fn multiplier_exactness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let kappa = 0.25;
    let mut cache: Vec<(f64, Multipliers)> = Vec::new();
    let (mut worst_m, mut worst_0, mut worst_1) = (0.0f64, 0.0f64, 0.0f64);
    let samples = 100_000;
    for i in 0..samples {
        // a small pool of ν keeps the M² tables cheap; the pool itself is random
        if i % 2000 == 0 {
            let nu = 10f64.powf(rng.random_range(-6.0..-1.0));
            cache.push((nu, Multipliers::new(MultiplierParams::new(nu, kappa).unwrap()).unwrap()));
        }
        let (nu, mult) = cache.last().unwrap();
        let s = nu.powf(-1.0 / 3.0);
        let k = rng.random_range(1..=8) as f64 * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let l = rng.random_range(-8..=8) as f64;
        let h = s * rng.random_range(-20.0..20.0);
        let t = match rng.random_range(0..3) {
            0 => (h + s * rng.random_range(-5.0..5.0)).max(0.0),
            1 => rng.random_range(0.0..(h.max(0.0) + 1500.0 * s)),
            _ => 10f64.powf(rng.random_range(-3.0..2.0)),
        };
        let xi = FrequencyTriple::new(k, k * h, l);
        let rel = |got: f64, log_want: f64| (got / log_want.exp() - 1.0).abs();
        worst_m = worst_m.max(rel(mult.eval_m(t, &xi), log_m_oracle(t, k, k * h, l, *nu, 1000.0)));
        worst_0 = worst_0.max(rel(mult.eval_m0(t, &xi), log_m0_oracle(t, k, k * h, l)));
        worst_1 = worst_1.max(rel(mult.eval_m1(t, &xi), log_m1_oracle(t, k, k * h, l)));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst_m <= 1e-8 && worst_0 <= 1e-8 && worst_1 <= 1e-8 && secs < 60.0;
    verdict(
        "multiplier exactness",
        pass,
        &format!("{samples} samples, worst relative error m {worst_m:.2e}, M0 {worst_0:.2e}, M1 {worst_1:.2e} (limit 1e-8), {secs:.1}s"),
    );
    assert!(pass);
}

#[test]
fn multiplier_bounds() {
    let start = Instant::now();
    let report = verify_inequalities(&SampleSpec::default(), 1).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let e = |id: &str| report.entry(id).unwrap_or_else(|| panic!("missing {id}"));
    let stable = |id: &str| spread(&e(id).per_nu.iter().map(|c| c.worst_constant).collect::<Vec<_>>());
    let mut notes = Vec::new();
    let mut pass = true;
    for id in ["m_upper", "m_lower", "M0_lower", "M1_lower", "M2_lower"] {
        let ok = e(id).pass;
        pass &= ok;
        notes.push(format!("{id} {:.4} {}", e(id).worst_constant, if ok { "ok" } else { "VIOLATED" }));
    }
    for id in ["m_laplacian", "ed_lemma"] {
        let sp = stable(id);
        let ok = e(id).worst_constant.is_finite() && sp <= 2.0;
        pass &= ok;
        notes.push(format!("{id} constant {:.3} spread {sp:.2}{}", e(id).worst_constant, if ok { "" } else { " (>2)" }));
    }
    for id in ["m_commutator", "dM0_commutator", "dM1_commutator", "dM2_commutator"] {
        let ok = e(id).worst_constant.is_finite();
        pass &= ok;
        notes.push(format!("{id} {:.3}", e(id).worst_constant));
    }
    pass &= secs < 120.0;
    let samples = e("m_upper").samples;
    verdict(
        "multiplier bounds",
        pass,
        &format!("{samples} pairs; {}; {secs:.1}s", notes.join(", ")),
    );
    assert!(pass);
}

#[test]
fn linear_mechanisms() {
    let start = Instant::now();
    // (a) lift-up closed form against RK4
    let g = Grid::new(4, 16, 16, 1.0, 2.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut u = SpectralVectorField::zeros(g, Frame::shearing(), 0.0);
    for idx in 0..g.ny * g.nz {
        let neg = g.neg_index(idx);
        let (_, n, p) = g.mode(idx);
        if neg <= idx || !g.retained(0, n, p) {
            continue;
        }
        for c in 0..3 {
            let v = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            u.comps[c][idx] = v;
            u.comps[c][neg] = v.conj();
        }
    }
    let (nu, t) = (0.01, 10.0);
    let lin = evolve_zero_modes(&u, t, nu).unwrap();
    let mut err_a = 0.0f64;
    for idx in 0..g.ny * g.nz {
        let xi = g.frequency(idx, Frame::shearing());
        let a = xi.eta * xi.eta + xi.l * xi.l;
        let (r1, r2) = lift_up_rk4(u.comps[0][idx], u.comps[1][idx], a, nu, t, 20_000);
        let scale = r1.norm().max(r2.norm()).max(1e-300);
        err_a = err_a.max((lin.comps[0][idx] - r1).norm() / scale).max((lin.comps[1][idx] - r2).norm() / scale);
    }
    let ok_a = err_a <= 1e-8;

    // (b) Orr amplification of û² for k=1, η=10, l=0 at the critical time
    let xi = FrequencyTriple::new(1.0, 10.0, 0.0);
    let q = Complex64::new(1.0, 0.0);
    let u2_0 = recover_u2(evolve_q2(q, 0.0, &xi, 0.0), &xi, 0.0);
    let u2_c = recover_u2(evolve_q2(q, 10.0, &xi, 0.0), &xi, 10.0);
    let growth = u2_c.norm() / u2_0.norm();
    let ok_b = (growth / 101.0 - 1.0).abs() <= 0.01;

    // (c) inviscid damping: t²‖ū²_≠‖ ≤ (4/k_min²)‖q²_in‖_{H²} on [10, 100]
    let g3 = Grid::new(16, 16, 16, 1.0, 2.0, 1.0).unwrap();
    let data = DataFamily::default().generate(g3).unwrap();
    let times: Vec<f64> = (10..=100).map(|t| t as f64).collect();
    let rep = linear_decay_report(&data, 0.0, &times, 3.0, 0.01).unwrap();
    let kmin = 2.0 * PI / g3.lx;
    let ceiling = 4.0 / (kmin * kmin);
    let ok_c = rep.inviscid_damping_constant.is_finite() && rep.inviscid_damping_constant <= ceiling;

    // (d) enhanced-dissipation envelope exponent
    let mut cs = Vec::new();
    for nu in [1e-3f64, 1e-4] {
        let end = 3.0 * nu.powf(-1.0 / 3.0);
        let times: Vec<f64> = (0..=300).map(|i| end * i as f64 / 300.0).collect();
        let rep = linear_decay_report(&data, nu, &times, 3.0, 0.01).unwrap();
        cs.push(rep.fit.map_or(f64::NAN, |f| f.c));
    }
    let ok_d = cs.iter().all(|c| *c > 0.0 && *c < 1.0 / 3.0);
    let secs = start.elapsed().as_secs_f64();
    let pass = ok_a && ok_b && ok_c && ok_d && secs < 300.0;
    verdict(
        "linear mechanisms",
        pass,
        &format!(
            "(a) lift-up vs RK4 {err_a:.2e}; (b) Orr growth {growth:.4} vs 101; (c) t^2 damping constant {:.4} <= {ceiling:.4}; (d) c = {:.4} (nu 1e-3), {:.4} (nu 1e-4); {secs:.1}s",
            rep.inviscid_damping_constant, cs[0], cs[1]
        ),
    );
    assert!(pass);
}

#[test]
fn streak_solver() {
    let start = Instant::now();
    // Taylor–Green on the (y, z) torus
    let (ly, lz) = (2.0, 1.0);
    let g = Grid::plane(64, 64, ly, lz).unwrap();
    let nu = 0.01;
    let quarter = Complex64::new(0.0, 0.25);
    let mut u2 = vec![ZERO; g.len()];
    let mut u3 = vec![ZERO; g.len()];
    for (n, p) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
        let idx = g.mode_index(0, n, p).unwrap();
        // sin(ay)cos(bz) and −(Lz/Ly)cos(ay)sin(bz)
        u2[idx] = -quarter * n as f64;
        u3[idx] = quarter * (lz / ly) * p as f64;
    }
    let u1 = vec![ZERO; g.len()];
    let s0 = StreakState::from_velocity(g, nu, 0.0, [&u1, &u2, &u3]).unwrap();
    let solver = StreakSolver::new(g).unwrap();
    let mut s = s0.clone();
    let dt = 0.005;
    for _ in 0..2000 {
        s = solver.step(&s, dt).unwrap();
    }
    let a2 = (2.0 * PI / ly).powi(2) + (2.0 * PI / lz).powi(2);
    let decay = (-nu * a2 * s.t).exp();
    let want: Vec<Complex64> = s0.omega.iter().map(|w| w * decay).collect();
    let diff: Vec<Complex64> = s.omega.iter().zip(&want).map(|(a, b)| a - b).collect();
    let tg_err = l2(&diff) / l2(&want);
    let ok_tg = tg_err <= 1e-6;

    // lift-up at tiny amplitude
    let gp = Grid::plane(32, 32, 2.0, 1.0).unwrap();
    let nu = 1e-3;
    let mut s = random_streak(gp, nu, 4, 5);
    let [v1, v2, v3] = s.velocity();
    let norm = (l2(&v1).powi(2) + l2(&v2).powi(2) + l2(&v3).powi(2)).sqrt();
    let amp = 1e-6 / norm;
    s.omega.iter_mut().chain(s.u1.iter_mut()).for_each(|c| *c *= amp);
    let [u1_in, u2_in, _] = s.velocity();
    let solver = StreakSolver::new(gp).unwrap();
    let mut lift_err = 0.0f64;
    for step in 1..=200 {
        s = solver.step(&s, 0.05).unwrap();
        if step % 20 == 0 {
            let u1 = &s.velocity()[0];
            let pred: Vec<Complex64> = (0..gp.len())
                .map(|idx| {
                    let (_, n, p) = gp.mode(idx);
                    let a = gp.ky(n).powi(2) + gp.kz(p).powi(2);
                    (-nu * a * s.t).exp() * (u1_in[idx] - u2_in[idx] * s.t)
                })
                .collect();
            let d: Vec<Complex64> = u1.iter().zip(&pred).map(|(a, b)| a - b).collect();
            lift_err = lift_err.max(l2(&d) / l2(&pred));
        }
    }
    let ok_lift = lift_err <= 1e-4;

    // pseudo-spectral rhs against the direct convolution
    let g8 = Grid::plane(8, 8, 2.0, 1.0).unwrap();
    let s8 = random_streak(g8, 0.01, 2, 9);
    let rhs = StreakSolver::new(g8).unwrap().streak_rhs(&s8);
    let (cw, c1) = streak_rhs_convolution(&s8);
    let scale = rhs.omega.iter().chain(&rhs.u1).fold(0.0f64, |a, c| a.max(c.norm()));
    let conv_err = rhs
        .omega
        .iter()
        .zip(&cw)
        .chain(rhs.u1.iter().zip(&c1))
        .fold(0.0f64, |a, (x, y)| a.max((x - y).norm()))
        / scale;
    let ok_conv = conv_err <= 1e-12;
    let secs = start.elapsed().as_secs_f64();
    let pass = ok_tg && ok_lift && ok_conv && secs < 120.0;
    verdict(
        "streak solver",
        pass,
        &format!("Taylor-Green 64^2 {tg_err:.2e}; lift-up to t=10 {lift_err:.2e}; 8^2 convolution {conv_err:.2e}; {secs:.1}s"),
    );
    assert!(pass);
}

#[test]
fn nonlinear_solver() {
    let start = Instant::now();
    let g = Grid::new(32, 32, 32, 1.0, 2.0, 1.0).unwrap();

    // self-convergence in dt
    let nu = 0.01;
    let u0 = data_with_l2(g, 0.1, 5);
    let solver = Solver::new(g, nu);
    let run = |dt: f64| step_to(&solver, NonlinearState::new(u0.clone(), nu).unwrap(), 1.0, dt);
    let (a, b, c) = (run(0.1), run(0.05), run(0.025));
    let order = (field_diff(&a.u, &b.u) / field_diff(&b.u, &c.u)).log2();
    let ok_order = (order - 4.0).abs() <= 0.5;

    // tiny amplitude against the linear propagator
    let nu = 1e-3;
    let mut u0 = DataFamily {
        seed: 3,
        ..Default::default()
    }
    .generate(g)
    .unwrap();
    u0.scale(1e-8);
    let solver = Solver::new(g, nu);
    let mut s = NonlinearState::new(u0.clone(), nu).unwrap();
    let mut modes: Vec<(usize, [Complex64; 3], Option<LinearMode>)> = Vec::new();
    for idx in 0..g.len() {
        let u_in = [u0.comps[0][idx], u0.comps[1][idx], u0.comps[2][idx]];
        if u_in.iter().all(|c| c.norm() == 0.0) {
            continue;
        }
        let xi = g.frequency(idx, Frame::shearing());
        let lm = (xi.k != 0.0).then(|| LinearMode::new(xi, u_in, 1e-3));
        modes.push((idx, u_in, lm));
    }
    let (mut worst_rel, mut worst_abs) = (0.0f64, 0.0f64);
    for t_end in [1.0, 2.0, 3.0, 4.0, 5.0] {
        s = step_to(&solver, s, t_end, 0.01);
        let r = s.remaps() as i64;
        let mut preds = Vec::new();
        for (idx, u_in, lm) in modes.iter_mut() {
            let (m, n, p) = g.mode(*idx);
            let xi = g.frequency(*idx, Frame::shearing());
            let lin = match lm {
                Some(lm) => lm.advance(t_end, nu),
                None => {
                    let heat = (-nu * t_end * (xi.eta * xi.eta + xi.l * xi.l)).exp();
                    [heat * (u_in[0] - u_in[1] * t_end), heat * u_in[1], heat * u_in[2]]
                }
            };
            if let Some(j) = g.mode_index(m, n - m * r, p).filter(|_| g.retained(m, n - m * r, p)) {
                preds.push((j, lin));
            }
        }
        let scale = preds.iter().flat_map(|(_, l)| l.iter().map(|c| c.norm())).fold(0.0f64, f64::max);
        for (j, lin) in &preds {
            for c in 0..3 {
                let d = (s.u.comps[c][*j] - lin[c]).norm();
                worst_abs = worst_abs.max(d / scale);
                if lin[c].norm() >= 1e-3 * scale {
                    worst_rel = worst_rel.max(d / lin[c].norm());
                }
            }
        }
    }
    let ok_tiny = worst_rel <= 1e-5 && worst_abs <= 1e-5;

    // x-independent data against the streak solver
    let nu = 0.01;
    let plane = g.ny * g.nz;
    let mut u = data_with_l2(g, 0.1, 7);
    for c in u.comps.iter_mut() {
        c[plane..].fill(ZERO);
    }
    u.project_div_free();
    let solver = Solver::new(g, nu);
    let s3 = step_to(&solver, NonlinearState::new(u.clone(), nu).unwrap(), 2.0, 0.01);
    let ss = StreakSolver::new(g.zero_plane()).unwrap();
    let mut st = StreakState::from_zero_modes(&u, nu).unwrap();
    st.dealias();
    for _ in 0..200 {
        st = ss.step(&st, 0.01).unwrap();
    }
    let v = st.velocity();
    let (mut d, mut sc) = (0.0f64, 0.0f64);
    for c in 0..3 {
        for idx in 0..plane {
            d = d.max((s3.u.comps[c][idx] - v[c][idx]).norm());
            sc = sc.max(v[c][idx].norm());
        }
    }
    let streak_err = d / sc;
    let ok_streak = streak_err <= 1e-8;

    // inviscid energy budget
    let u0 = data_with_l2(g, 0.1, 9);
    let solver = Solver::new(g, 0.0);
    let mut s = NonlinearState::new(u0, 0.0).unwrap();
    let dt = 0.01;
    let mut budget = 0.0f64;
    for _ in 0..20 {
        let e0 = s.energy();
        let next = solver.step(&s, dt).unwrap();
        let mid = solver.step(&s, 0.5 * dt).unwrap();
        let prod = dt / 6.0 * (solver.production(&s.u) + 4.0 * solver.production(&mid.u) + solver.production(&next.u));
        budget = budget.max((next.energy() - e0 + prod).abs() / (e0 * dt));
        s = next;
    }
    let ok_budget = budget <= 1e-6;
    let secs = start.elapsed().as_secs_f64();
    let pass = ok_order && ok_tiny && ok_streak && ok_budget && secs < 600.0;
    verdict(
        "nonlinear solver",
        pass,
        &format!(
            "32^3: dt order {order:.3}; tiny amplitude per-mode {worst_rel:.2e}, global {worst_abs:.2e}; x-independent vs streak {streak_err:.2e}; nu=0 budget {budget:.2e}/unit time; {secs:.1}s"
        ),
    );
    assert!(pass);
}

fn theorem_config() -> SimConfig {
    let mut cfg = SimConfig::default();
    cfg.solver.history_interval = Some(0.1);
    cfg.solver.psi_dt = 0.25;
    cfg.solver.zero_mode_extension = Extension::Auto;
    cfg
}

/// The δ = 0.01 runs at 48³, shared by the theorem-regime and ψ criteria.
fn theorem_runs() -> &'static (Vec<RunRecord>, f64) {
    static RUNS: OnceLock<(Vec<RunRecord>, f64)> = OnceLock::new();
    RUNS.get_or_init(|| {
        let start = Instant::now();
        let cfg = theorem_config();
        let grid = cfg.grid().unwrap();
        let runs = THEOREM_NUS
            .iter()
            .map(|&nu| {
                let eps = THEOREM_DELTA * nu.powf(1.5);
                let init = cfg.data.initial_state(grid, eps, nu).unwrap();
                run_simulation(init, &cfg.run_options(nu, eps).unwrap()).unwrap()
            })
            .collect();
        (runs, start.elapsed().as_secs_f64())
    })
}

#[test]
fn theorem_regime() {
    let (runs, secs) = theorem_runs();
    let cfg = theorem_config();
    let classes: Vec<Classification> = runs.iter().map(|r| classify_transition(r, &cfg.threshold.criteria)).collect();
    let laminar = classes.iter().all(|c| *c == Classification::Laminar);
    let ks: Vec<f64> = runs.iter().map(|r| streak_convergence_metric(r).ratio).collect();
    let k_spread = spread(&ks);
    let ok_k = ks.iter().all(|k| k.is_finite() && *k > 0.0) && k_spread <= 2.0;
    let refs: Vec<&RunRecord> = runs.iter().collect();
    let report = bootstrap_report(&refs, 4.0);
    let unstable: Vec<String> = report
        .entries
        .iter()
        .filter(|e| !e.pass)
        .map(|e| format!("{} spread {:.2}", e.inequality_id, e.spread))
        .collect();
    let pass = laminar && ok_k && report.pass && *secs < 3600.0;
    verdict(
        "theorem regime",
        pass,
        &format!(
            "48^3, delta {THEOREM_DELTA}: classes {classes:?}; K = {:.3}/{:.3}/{:.3} spread {k_spread:.2}; bootstrap ratios unstable beyond 4: [{}]; {secs:.0}s",
            ks[0],
            ks[1],
            ks[2],
            unstable.join(", ")
        ),
    );
    assert!(pass);
}

#[test]
fn threshold_campaign() {
    let start = Instant::now();
    let synthetic: Vec<ThresholdPoint> = [1e-2, 5e-3, 2e-3, 1e-3, 5e-4]
        .iter()
        .map(|&nu: &f64| {
            let e = 0.3 * nu.powf(1.5);
            ThresholdPoint {
                nu,
                eps_lo: e,
                eps_hi: e,
                eps_star: e,
                runs: Vec::new(),
                monotone: true,
            }
        })
        .collect();
    let syn = fit_gamma(&synthetic).unwrap();
    let ok_syn = (syn.gamma - 1.5).abs() <= 1e-12;

    let cfg = SimConfig::default();
    let nus = cfg.threshold.nus.clone();
    let report = sweep(
        &nus,
        |nu| cfg.classifier(nu).unwrap(),
        |nu| cfg.bisect_options(nu),
        cfg.threshold.criteria,
        "acceptance",
        None,
    )
    .unwrap();
    let gamma = report.gamma.unwrap_or(f64::NAN);
    let ok_mono = report.eps_star_nonincreasing();
    let ok_band = (1.0..=2.0).contains(&gamma);
    let secs = start.elapsed().as_secs_f64();
    let pass = ok_syn && ok_mono && ok_band && secs < 3.0 * 3600.0;
    let stars: Vec<String> = report.points.iter().map(|p| format!("{:e}:{:.4e}", p.nu, p.eps_star)).collect();
    let c = &report.indicator;
    verdict(
        "threshold campaign",
        pass,
        &format!(
            "synthetic gamma {:.15}; eps* [{}] nonincreasing {ok_mono}; fitted gamma {gamma:.4} (band [1, 2]), residuals {:?}; indicator C_trans {} decay {} horizon {}nu^(-1/3); {secs:.0}s",
            syn.gamma,
            stars.join(", "),
            report.residuals.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>(),
            c.c_trans,
            c.decay_fraction,
            c.horizon_multiple
        ),
    );
    assert!(pass);
}

#[test]
fn psi_diagnostics() {
    let (runs, _) = theorem_runs();
    let residuals: Vec<f64> = runs.iter().map(|r| r.psi.map_or(f64::NAN, |p| p.residual)).collect();
    let ok_res = residuals.iter().all(|r| *r <= 1e-6);
    let refs: Vec<&RunRecord> = runs.iter().collect();
    let report = bootstrap_report(&refs, 4.0);
    let e = report.entry(PSI_BOUND_ID).unwrap();
    let ok_bound = e.per_nu.iter().all(|p| p.1.is_finite()) && e.spread <= 4.0;
    let pass = ok_res && ok_bound;
    verdict(
        "psi/g diagnostics",
        pass,
        &format!(
            "residuals {:?}; psi bound ratios {:?} spread {:.2} (limit 4)",
            residuals.iter().map(|r| format!("{r:.2e}")).collect::<Vec<_>>(),
            e.per_nu.iter().map(|p| format!("{:e}:{:.3e}", p.0, p.1)).collect::<Vec<_>>(),
            e.spread
        ),
    );
    assert!(pass);
}

#[test]
fn multiplier_table_matches_at_zero_time() {
    // m(0) = M(0) = 1 exactly for every frequency
    let m = Multipliers::new(MultiplierParams::new(1e-3, 0.25).unwrap()).unwrap();
    for (k, eta, l) in [(1.0, 0.0, 0.0), (-3.0, 7.0, 2.0), (2.0, -50.0, 1.0)] {
        let xi = FrequencyTriple::new(k, eta, l);
        assert_eq!(m.eval_m(0.0, &xi), 1.0);
        assert_eq!(m.eval_m0(0.0, &xi), 1.0);
        assert_eq!(m.eval_m1(0.0, &xi), 1.0);
        assert_eq!(m.eval_m2(0.0, &xi), 1.0);
        assert!(laplacian_l_symbol(&xi, 0.0) > 0.0);
    }
}
