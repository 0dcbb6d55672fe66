use couette_lab::linear::LinearMode;
use couette_lab::nonlinear::{run_simulation, NonlinearState, RunFlag, RunOptions, Solver};
use couette_lab::spectral::{Frame, Grid, SpectralVectorField, Transform};
use couette_lab::streak::{embed_in_3d, StreakSolver, StreakState};
use couette_lab::threshold::DataFamily;
use couette_lab::Complex64;

fn cube(n: usize) -> Grid {
    Grid::new(n, n, n, 1.0, 1.0, 1.0).unwrap()
}

fn data(g: Grid, eps: f64, seed: u64) -> SpectralVectorField {
    let mut u = DataFamily {
        seed,
        ..Default::default()
    }
    .generate(g)
    .unwrap();
    u.scale(eps);
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

fn diff_norm(a: &SpectralVectorField, b: &SpectralVectorField) -> f64 {
    (0..3)
        .map(|c| {
            a.comps[c]
                .iter()
                .zip(&b.comps[c])
                .map(|(x, y)| (x - y).norm_sqr())
                .sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

fn streak_data(g: Grid, amp: f64) -> SpectralVectorField {
    let mut u = data(g, amp, 7);
    let plane = g.ny * g.nz;
    for c in u.comps.iter_mut() {
        c[plane..].iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
    }
    u.project_div_free();
    u
}

#[test]
fn x_independent_rhs_matches_streak_rhs() {
    let g = cube(16);
    let nu = 0.01;
    let u = streak_data(g, 0.3);
    let state = NonlinearState::new(u.clone(), nu).unwrap();
    let solver = Solver::new(g, nu);
    let rhs = solver.nonlinear_rhs(&state);
    let plane = g.ny * g.nz;
    for c in 0..3 {
        assert!(rhs.comps[c][plane..].iter().all(|v| v.norm() == 0.0));
    }
    let s = StreakState::from_zero_modes(&u, nu).unwrap();
    let ss = StreakSolver::new(g.zero_plane()).unwrap();
    let tend = ss.streak_rhs(&s);
    // streak tendency minus its viscous part, as velocities
    let p = g.zero_plane();
    let mut adv = StreakState::zeros(p, nu, 0.0);
    for idx in 0..p.len() {
        let (_, n, q) = p.mode(idx);
        let k2 = p.ky(n).powi(2) + p.kz(q).powi(2);
        adv.omega[idx] = tend.omega[idx] + nu * k2 * s.omega[idx];
        adv.u1[idx] = tend.u1[idx] + nu * k2 * s.u1[idx];
    }
    let want = embed_in_3d(&adv, g, Frame::shearing()).unwrap();
    let scale = want.norm_sq().sqrt();
    assert!(diff_norm(&rhs, &want) <= 1e-10 * scale, "{}", diff_norm(&rhs, &want) / scale);
}

#[test]
fn tiny_amplitude_matches_linear_propagator() {
    let g = cube(16);
    let nu = 0.01;
    let u0 = data(g, 1e-8, 3);
    let solver = Solver::new(g, nu);
    let t_end = 3.0;
    let s = step_to(&solver, NonlinearState::new(u0.clone(), nu).unwrap(), t_end, 0.01);
    let r = s.remaps() as i64;
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for idx in 0..g.len() {
        let (m, n, p) = g.mode(idx);
        let u_in = [u0.comps[0][idx], u0.comps[1][idx], u0.comps[2][idx]];
        if u_in.iter().all(|c| c.norm() == 0.0) {
            continue;
        }
        let xi = g.frequency(idx, Frame::shearing());
        let lin = if m == 0 {
            let heat = (-nu * t_end * (xi.eta * xi.eta + xi.l * xi.l)).exp();
            [heat * (u_in[0] - u_in[1] * t_end), heat * u_in[1], heat * u_in[2]]
        } else {
            LinearMode::new(xi, u_in, 1e-3).advance(t_end, nu)
        };
        let Some(j) = g.mode_index(m, n - m * r, p) else { continue };
        if !g.retained(m, n - m * r, p) {
            continue;
        }
        for c in 0..3 {
            worst = worst.max((s.u.comps[c][j] - lin[c]).norm());
            scale = scale.max(lin[c].norm());
        }
    }
    eprintln!("tiny amplitude relative error {:e}", worst / scale);
    assert!(worst <= 1e-5 * scale);
}

#[test]
fn fourth_order_in_time() {
    let g = cube(16);
    let nu = 0.01;
    let u0 = data(g, 0.05, 5);
    let solver = Solver::new(g, nu);
    let t_end = 1.0;
    let run = |dt: f64| step_to(&solver, NonlinearState::new(u0.clone(), nu).unwrap(), t_end, dt);
    let a = run(0.1);
    let b = run(0.05);
    let c = run(0.025);
    let ratio = diff_norm(&a.u, &b.u) / diff_norm(&b.u, &c.u);
    eprintln!("self-convergence ratio {ratio}");
    assert!(ratio > 12.0 && ratio < 20.0, "{ratio}");
}

#[test]
fn inviscid_energy_budget_closes() {
    let g = cube(16);
    let u0 = data(g, 0.05, 9);
    let solver = Solver::new(g, 0.0);
    let mut s = NonlinearState::new(u0, 0.0).unwrap();
    let dt = 0.01;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let e0 = s.energy();
        let p0 = solver.production(&s.u);
        let next = solver.step(&s, dt).unwrap();
        let mid = solver.step(&s, 0.5 * dt).unwrap();
        let pm = solver.production(&mid.u);
        let p1 = solver.production(&next.u);
        let de = next.energy() - e0;
        let prod = dt / 6.0 * (p0 + 4.0 * pm + p1);
        worst = worst.max((de + prod).abs() / dt);
        s = next;
    }
    eprintln!("energy budget defect per unit time {worst:e}");
    assert!(worst <= 1e-6);
}

#[test]
fn remap_is_a_grid_resampling() {
    // before the remap the samples live on a grid sheared by one box period;
    // with Nx = Ny that grid is the lab grid with x-index shifted by the y-index
    let g = cube(16);
    let mut u = data(g, 1.0, 11);
    u.t = g.remap_interval();
    let s = NonlinearState { u, nu: 0.0 };
    let solver = Solver::new(g, 0.0);
    let (r, lost) = solver.remap(&s).unwrap();
    assert_eq!(lost, 0.0);
    let t = Transform::new(g);
    for c in 0..3 {
        let before = t.inverse(&s.u.component(c)).unwrap();
        let after = t.inverse(&r.u.component(c)).unwrap();
        let amp = after.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for i in 0..g.nx {
            for j in 0..g.ny {
                for p in 0..g.nz {
                    let a = before[g.index(i, j, p)];
                    let b = after[g.index((i + j) % g.nx, j, p)];
                    assert!((a - b).abs() <= 1e-12 * amp);
                }
            }
        }
    }
}

#[test]
fn zero_data_gives_zero_record() {
    let g = cube(8);
    let s = NonlinearState::new(SpectralVectorField::zeros(g, Frame::shearing(), 0.0), 0.01).unwrap();
    let rec = run_simulation(
        s,
        &RunOptions {
            horizon: 2.0,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(rec.flag, RunFlag::Completed);
    assert!(rec.final_state.u.is_zero());
    assert!(rec.diagnostics.iter().all(|r| r.e_total == 0.0));
}
