//! Reference computations that share no numerics with `couette_lab`: adaptive
//! Simpson quadrature of the multiplier ODEs, classical RK4 on single modes and
//! a direct convolution of the streak advection.

use std::io::Write;

use couette_lab::spectral::Grid;
use couette_lab::streak::StreakState;
use couette_lab::Complex64;

/// Adaptive Simpson on [a, b] to absolute tolerance `tol`.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 60)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Simpson over [a, b] split at the Lorentzian peak `s0` and at a geometric
/// ladder of distances from it, so narrow peaks on long intervals are seen.
pub fn peaked_integral(f: &dyn Fn(f64) -> f64, a: f64, b: f64, s0: f64, width: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut cuts = vec![a, b];
    let mut d = width.max(1e-12);
    while d < (b - a) {
        for c in [s0 - d, s0 + d] {
            if c > a && c < b {
                cuts.push(c);
            }
        }
        d *= 4.0;
    }
    if s0 > a && s0 < b {
        cuts.push(s0);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let n = cuts.len() - 1;
    cuts.windows(2).map(|w| simpson(f, w[0], w[1], tol / n as f64)).sum()
}

fn lap(k: f64, eta: f64, l: f64, s: f64) -> f64 {
    let e = eta - k * s;
    k * k + e * e + l * l
}

/// log m by integrating ṁ/m = 2k(η−ks)/|K(s)|² over the window ∩ [0, t].
pub fn log_m_oracle(t: f64, k: f64, eta: f64, l: f64, nu: f64, c_window: f64) -> f64 {
    if k == 0.0 {
        return 0.0;
    }
    let h = eta / k;
    let lo = h.max(0.0);
    let hi = (h + c_window * nu.powf(-1.0 / 3.0)).min(t);
    let width = (k * k + l * l).sqrt() / k.abs();
    peaked_integral(&|s| 2.0 * k * (eta - k * s) / lap(k, eta, l, s), lo, hi, h, width, 1e-12)
}

/// log M⁰ = −∫₀ᵗ k²/|K|².
pub fn log_m0_oracle(t: f64, k: f64, eta: f64, l: f64) -> f64 {
    if k == 0.0 {
        return 0.0;
    }
    let width = (k * k + l * l).sqrt() / k.abs();
    -peaked_integral(&|s| k * k / lap(k, eta, l, s), 0.0, t, eta / k, width, 1e-12)
}

/// log M¹ = −∫₀ᵗ 2⟨kl⟩/|K|².
pub fn log_m1_oracle(t: f64, k: f64, eta: f64, l: f64) -> f64 {
    if k == 0.0 {
        return 0.0;
    }
    let kl = (1.0 + k * k * l * l).sqrt();
    let width = (k * k + l * l).sqrt() / k.abs();
    -peaked_integral(&|s| 2.0 * kl / lap(k, eta, l, s), 0.0, t, eta / k, width, 1e-12)
}

/// Classical RK4 for one zero mode: u̇¹ = −u² − νa u¹, u̇² = −νa u², a = η² + l².
pub fn lift_up_rk4(u1: Complex64, u2: Complex64, a: f64, nu: f64, t: f64, steps: usize) -> (Complex64, Complex64) {
    let f = |x: (Complex64, Complex64)| (-x.1 - nu * a * x.0, -nu * a * x.1);
    let h = t / steps as f64;
    let mut x = (u1, u2);
    let add = |x: (Complex64, Complex64), k: (Complex64, Complex64), s: f64| (x.0 + k.0 * s, x.1 + k.1 * s);
    for _ in 0..steps {
        let k1 = f(x);
        let k2 = f(add(x, k1, 0.5 * h));
        let k3 = f(add(x, k2, 0.5 * h));
        let k4 = f(add(x, k3, h));
        x = (
            x.0 + (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0) * (h / 6.0),
            x.1 + (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1) * (h / 6.0),
        );
    }
    x
}

/// Streak tendency by direct double sum over mode pairs, returned as (ω, u¹).
/// Only output modes inside the dealiasing band are filled.
pub fn streak_rhs_convolution(s: &StreakState) -> (Vec<Complex64>, Vec<Complex64>) {
    let g: Grid = s.grid;
    let i = Complex64::new(0.0, 1.0);
    let [u1, u2, u3] = s.velocity();
    let n = g.len();
    let mut dw = vec![Complex64::new(0.0, 0.0); n];
    let mut d1 = vec![Complex64::new(0.0, 0.0); n];
    for out in 0..n {
        let (_, no, po) = g.mode(out);
        if !g.retained(0, no, po) {
            continue;
        }
        let (mut aw, mut a1) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for a in 0..n {
            let (_, na, pa) = g.mode(a);
            let Some(b) = g.mode_index(0, no - na, po - pa) else { continue };
            let (_, nb, pb) = g.mode(b);
            let (eb, lb) = (g.ky(nb), g.kz(pb));
            aw += u2[a] * i * eb * s.omega[b] + u3[a] * i * lb * s.omega[b];
            a1 += u2[a] * i * eb * u1[b] + u3[a] * i * lb * u1[b];
        }
        let k2 = g.ky(no).powi(2) + g.kz(po).powi(2);
        dw[out] = -aw - s.nu * k2 * s.omega[out];
        d1[out] = -a1 - u2[out] - s.nu * k2 * s.u1[out];
    }
    (dw, d1)
}

/// One verdict line on the real stdout, outside the test harness capture.
pub fn verdict(name: &str, pass: bool, detail: &str) {
    let line = format!("{} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}
