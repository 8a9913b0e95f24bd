//! Quadrature.
//!
//! Two deliberately independent routes live here: the primary adaptive
//! Gauss-Legendre integrator used by pairings, and an adaptive Simpson
//! integrator (`oracle`) used only for cross-checks. Keep them independent;
//! several checks rely on the two routes disagreeing when one is wrong.

use crate::error::{Error, Result};
use crate::C64;
use std::sync::OnceLock;

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the Legendre recurrence.
pub fn gl_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-style initial guess; converges in a handful of steps.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_pd(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_pd(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn gl15() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gl_rule(15))
}

pub fn gl64() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gl_rule(64))
}

fn gl15_panel(f: &mut dyn FnMut(f64) -> C64, a: f64, b: f64) -> C64 {
    let (nodes, weights) = gl15();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = C64::new(0.0, 0.0);
    for (x, w) in nodes.iter().zip(weights) {
        acc += f(mid + half * x) * *w;
    }
    acc * half
}

/// Fixed 64-node Gauss-Legendre integral over [a, b].
pub fn gl64_integrate(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> f64 {
    let (nodes, weights) = gl64();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        acc += f(mid + half * x) * *w;
    }
    acc * half
}

const MAX_DEPTH: usize = 30;
/// Panels whose refinement disagreement sits below this absolute level are
/// at the f64 roundoff floor; further splitting cannot improve them.
const NOISE_FLOOR: f64 = 1e-15;

/// Adaptive Gauss-Legendre on [a, b] to absolute tolerance `tol`.
pub fn adaptive_1d(f: &mut dyn FnMut(f64) -> C64, a: f64, b: f64, tol: f64) -> Result<C64> {
    if a >= b {
        return Ok(C64::new(0.0, 0.0));
    }
    let whole = gl15_panel(f, a, b);
    adaptive_step(f, a, b, whole, tol, 0)
}

fn adaptive_step(
    f: &mut dyn FnMut(f64) -> C64,
    a: f64,
    b: f64,
    whole: C64,
    tol: f64,
    depth: usize,
) -> Result<C64> {
    let m = 0.5 * (a + b);
    let left = gl15_panel(f, a, m);
    let right = gl15_panel(f, m, b);
    let refined = left + right;
    let err = (refined - whole).norm();
    if err <= tol.max(1e-300) {
        return Ok(refined);
    }
    if depth >= MAX_DEPTH {
        if err <= NOISE_FLOOR {
            return Ok(refined);
        }
        return Err(Error::QuadratureAccuracy(format!(
            "panel [{a}, {b}] at depth {depth}: estimate {err:.3e} > tol {tol:.3e}"
        )));
    }
    let l = adaptive_step(f, a, m, left, 0.5 * tol, depth + 1)?;
    let r = adaptive_step(f, m, b, right, 0.5 * tol, depth + 1)?;
    Ok(l + r)
}

/// Adaptive integral over an axis-aligned box by nested 1-D integration.
pub fn adaptive_box(f: &dyn Fn(&[f64]) -> C64, bx: &[(f64, f64)], tol: f64) -> Result<C64> {
    let mut point = vec![0.0; bx.len()];
    nested(f, bx, tol, 0, &mut point)
}

fn nested(
    f: &dyn Fn(&[f64]) -> C64,
    bx: &[(f64, f64)],
    tol: f64,
    axis: usize,
    point: &mut Vec<f64>,
) -> Result<C64> {
    let (a, b) = bx[axis];
    if axis + 1 == bx.len() {
        let mut g = |x: f64| {
            point[axis] = x;
            f(point)
        };
        return adaptive_1d(&mut g, a, b, tol);
    }
    // Inner errors integrate up over the outer width; shrink accordingly.
    let inner_tol = tol / (4.0 * (b - a).max(1.0));
    let mut err: Option<Error> = None;
    let mut g = |x: f64| {
        point[axis] = x;
        // A cloned cursor keeps the closure reentrant for the outer panels.
        let mut sub = point.clone();
        match nested(f, bx, inner_tol, axis + 1, &mut sub) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                C64::new(0.0, 0.0)
            }
        }
    };
    let out = adaptive_1d(&mut g, a, b, tol)?;
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Independent cross-check route: adaptive Simpson with Richardson update.
pub mod oracle {
    use super::*;

    pub fn simpson_1d(f: &mut dyn FnMut(f64) -> C64, a: f64, b: f64, tol: f64) -> Result<C64> {
        if a >= b {
            return Ok(C64::new(0.0, 0.0));
        }
        let fa = f(a);
        let fb = f(b);
        let m = 0.5 * (a + b);
        let fm = f(m);
        let whole = simpson_rule(a, b, fa, fm, fb);
        step(f, a, b, fa, fm, fb, whole, tol, 0)
    }

    fn simpson_rule(a: f64, b: f64, fa: C64, fm: C64, fb: C64) -> C64 {
        (fa + fm * 4.0 + fb) * ((b - a) / 6.0)
    }

    #[allow(clippy::too_many_arguments)]
    fn step(
        f: &mut dyn FnMut(f64) -> C64,
        a: f64,
        b: f64,
        fa: C64,
        fm: C64,
        fb: C64,
        whole: C64,
        tol: f64,
        depth: usize,
    ) -> Result<C64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson_rule(a, m, fa, flm, fm);
        let right = simpson_rule(m, b, fm, frm, fb);
        let refined = left + right;
        let err = (refined - whole).norm();
        if err <= 15.0 * tol.max(1e-300) {
            return Ok(refined + (refined - whole) / 15.0);
        }
        if depth >= MAX_DEPTH + 12 {
            if err <= NOISE_FLOOR {
                return Ok(refined + (refined - whole) / 15.0);
            }
            return Err(Error::QuadratureAccuracy(format!(
                "simpson panel [{a}, {b}] at depth {depth}: estimate {err:.3e}"
            )));
        }
        let l = step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)?;
        let r = step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)?;
        Ok(l + r)
    }

    pub fn simpson_box(f: &dyn Fn(&[f64]) -> C64, bx: &[(f64, f64)], tol: f64) -> Result<C64> {
        let mut point = vec![0.0; bx.len()];
        nested(f, bx, tol, 0, &mut point)
    }

    fn nested(
        f: &dyn Fn(&[f64]) -> C64,
        bx: &[(f64, f64)],
        tol: f64,
        axis: usize,
        point: &mut Vec<f64>,
    ) -> Result<C64> {
        let (a, b) = bx[axis];
        if axis + 1 == bx.len() {
            let mut g = |x: f64| {
                point[axis] = x;
                f(point)
            };
            return simpson_1d(&mut g, a, b, tol);
        }
        let inner_tol = tol / (4.0 * (b - a).max(1.0));
        let mut err: Option<Error> = None;
        let mut g = |x: f64| {
            point[axis] = x;
            let mut sub = point.clone();
            match nested(f, bx, inner_tol, axis + 1, &mut sub) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    C64::new(0.0, 0.0)
                }
            }
        };
        let out = simpson_1d(&mut g, a, b, tol)?;
        match err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_rule_integrates_polynomials_exactly() {
        let (n, w) = gl_rule(5);
        // degree-9 polynomial x^8 over [-1,1] = 2/9
        let s: f64 = n.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_matches_closed_form() {
        let mut f = |x: f64| C64::new((x * 3.0).sin(), 0.0);
        let v = adaptive_1d(&mut f, 0.0, 2.0, 1e-12).unwrap();
        let exact = (1.0 - (6.0f64).cos()) / 3.0;
        assert!((v.re - exact).abs() < 1e-11);
    }

    #[test]
    fn both_routes_agree_on_a_2d_gaussian() {
        let f = |x: &[f64]| C64::new((-x[0] * x[0] - x[1] * x[1]).exp(), 0.0);
        let bx = [(-3.0, 3.0), (-3.0, 3.0)];
        let a = adaptive_box(&f, &bx, 1e-10).unwrap();
        let b = oracle::simpson_box(&f, &bx, 1e-10).unwrap();
        assert!((a - b).norm() < 1e-8);
    }
}
