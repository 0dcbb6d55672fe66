//! Adaptive Gauss–Kronrod (7/15) quadrature.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel: (estimate, error estimate).
pub fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// ∫ₐᵇ f to absolute tolerance `tol` by bisection of the worst panel.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = gk15(&f, a, b);
    let mut panels = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    let mut iters = 0usize;
    while err > tol {
        iters += 1;
        if iters > 2000 {
            return Err(Error::Quadrature {
                a,
                b,
                msg: format!("no convergence after {iters} subdivisions (error {err:e})"),
            });
        }
        let (wi, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (pa, pb, pv, pe) = panels.swap_remove(wi);
        let mid = 0.5 * (pa + pb);
        let l = gk15(&f, pa, mid);
        let r = gk15(&f, mid, pb);
        total += l.0 + r.0 - pv;
        err += l.1 + r.1 - pe;
        panels.push((pa, mid, l.0, l.1));
        panels.push((mid, pb, r.0, r.1));
        if !total.is_finite() {
            return Err(Error::Quadrature {
                a,
                b,
                msg: "non-finite integrand".into(),
            });
        }
    }
    Ok(panels.iter().map(|p| p.2).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| x.powi(7) - 3.0 * x * x, -1.0, 2.0, 1e-14).unwrap();
        let exact = (2f64.powi(8) - 1.0) / 8.0 - (8.0 + 1.0);
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn lorentzian_peak() {
        let v = integrate(|x| 1.0 / (1.0 + x * x), -1e3, 1e3, 1e-12).unwrap();
        let exact = 2.0 * 1e3f64.atan();
        assert!((v - exact).abs() < 1e-11);
    }

    #[test]
    fn reversed_interval_is_negative() {
        let v = integrate(|x| x.exp(), 1.0, 0.0, 1e-13).unwrap();
        assert!((v + (1f64.exp() - 1.0)).abs() < 1e-12);
    }
}
