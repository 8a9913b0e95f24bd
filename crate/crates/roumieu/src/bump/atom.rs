//! One-dimensional primitives of the closed function algebra.
//!
//! [`Bump1`] is the boundary-exponential atom
//! num(u) * (1-u^2)^{-m} * exp(-e/(1-u^2)) on |u| < 1, u = (x-c)/rho,
//! extended by zero. Differentiation stays in the family: m rises by
//! exactly 2 and the numerator degree by at most 3. [`Step1`] is the smooth
//! monotone step obtained by integrating the standard atom across a margin;
//! its derivative is again an atom, so only order-zero values ever need
//! quadrature, and those come from a cumulative table built once.

use crate::poly::Poly1;
use std::sync::OnceLock;

/// Evaluation cutoff on t = 1 - u^2: below this, exp(-e/t) < 1e-300 crushes
/// every rational factor the algebra can produce at sane derivative orders.
pub const EPS_B: f64 = 1e-4;

/// num(u) * (1-u^2)^{-m} * exp(-e/(1-u^2)) on |u| < 1, zero outside.
#[derive(Debug, Clone, PartialEq)]
pub struct Bump1 {
    pub center: f64,
    pub radius: f64,
    /// Numerator polynomial in the normalized coordinate u.
    pub num: Poly1,
    /// Boundary power of (1-u^2)^{-1}.
    pub m: u32,
    /// Multiplicity of the exponential: exp(-e/(1-u^2)). Products of
    /// aligned atoms add their multiplicities, so e is structural, not
    /// always 1.
    pub e: u32,
}

impl Bump1 {
    pub fn standard(center: f64, radius: f64) -> Self {
        Bump1 {
            center,
            radius,
            num: Poly1::constant(1.0),
            m: 0,
            e: 1,
        }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.radius, self.center + self.radius)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let u = (x - self.center) / self.radius;
        let t = 1.0 - u * u;
        if t <= EPS_B {
            return 0.0;
        }
        let rational = self.num.eval(u) * t.powi(-(self.m as i32));
        rational * (-(self.e as f64) / t).exp()
    }

    /// Exact d/dx. With t = 1 - u^2 the quotient/chain rules give
    /// d/du [num t^{-m} e^{-e/t}] =
    ///   [num' t^2 + 2u num (m t - e)] t^{-(m+2)} e^{-e/t},
    /// and the outer 1/rho converts d/du to d/dx.
    pub fn d_dx(&self) -> Bump1 {
        let t = Poly1::from_coeffs(vec![1.0, 0.0, -1.0]);
        let a = self.num.derivative().mul(&t).mul(&t);
        let mt_minus_e = t
            .scale(self.m as f64)
            .add(&Poly1::constant(-(self.e as f64)));
        let b = Poly1::from_coeffs(vec![0.0, 2.0]).mul(&self.num).mul(&mt_minus_e);
        Bump1 {
            center: self.center,
            radius: self.radius,
            num: a.add(&b).scale(1.0 / self.radius),
            m: self.m + 2,
            e: self.e,
        }
    }

    /// Product with an aligned atom (same center and radius): numerators
    /// multiply, boundary powers and exponential multiplicities add.
    pub fn mul_aligned(&self, other: &Bump1) -> Option<Bump1> {
        if (self.center - other.center).abs() > 1e-12 * (1.0 + self.center.abs())
            || (self.radius - other.radius).abs() > 1e-12 * (1.0 + self.radius.abs())
        {
            return None;
        }
        Some(Bump1 {
            center: self.center,
            radius: self.radius,
            num: self.num.mul(&other.num),
            m: self.m + other.m,
            e: self.e + other.e,
        })
    }

    /// Folds a polynomial in the ambient coordinate x into the numerator
    /// (rewritten in u via x = rho u + c).
    pub fn absorb_poly(&self, p: &Poly1) -> Bump1 {
        let in_u = p.compose_affine(self.radius, self.center);
        Bump1 {
            center: self.center,
            radius: self.radius,
            num: self.num.mul(&in_u),
            m: self.m,
            e: self.e,
        }
    }

    /// x -> x/a rescaling of the ambient coordinate (support grows by a).
    pub fn dilate(&self, a: f64) -> Bump1 {
        Bump1 {
            center: self.center * a,
            radius: self.radius * a,
            num: self.num.clone(),
            m: self.m,
            e: self.e,
        }
    }

    pub fn translate(&self, v: f64) -> Bump1 {
        Bump1 {
            center: self.center + v,
            radius: self.radius,
            num: self.num.clone(),
            m: self.m,
            e: self.e,
        }
    }

    pub fn max_abs_coef(&self) -> f64 {
        self.num.max_abs_coef()
    }
}

/// Number of subintervals in the cumulative table of the step profile.
const TABLE_CELLS: usize = 2048;

struct StepTable {
    /// Cumulative integral of g(u) = exp(-1/(1-u^2)) from -1 to the node.
    cumulative: Vec<f64>,
    total: f64,
}

fn profile(u: f64) -> f64 {
    let t = 1.0 - u * u;
    if t <= EPS_B {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

fn step_table() -> &'static StepTable {
    static TABLE: OnceLock<StepTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let h = 2.0 / TABLE_CELLS as f64;
        let mut cumulative = Vec::with_capacity(TABLE_CELLS + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        let mut g = profile;
        for i in 0..TABLE_CELLS {
            let a = -1.0 + i as f64 * h;
            acc += crate::quad::gl64_integrate(&mut g, a, a + h);
            cumulative.push(acc);
        }
        StepTable {
            total: acc,
            cumulative,
        }
    })
}

/// Normalized cumulative of the standard profile: F(-1) = 0, F(1) = 1,
/// evaluated by cubic Hermite interpolation (the derivative at the table
/// nodes is the profile itself, known exactly).
fn cumulative_fraction(u: f64) -> f64 {
    if u <= -1.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let table = step_table();
    let h = 2.0 / TABLE_CELLS as f64;
    let pos = (u + 1.0) / h;
    let i = (pos.floor() as usize).min(TABLE_CELLS - 1);
    let s = pos - i as f64;
    let u0 = -1.0 + i as f64 * h;
    let g0 = profile(u0);
    let g1 = profile(u0 + h);
    let y0 = table.cumulative[i];
    let y1 = table.cumulative[i + 1];
    let s2 = s * s;
    let s3 = s2 * s;
    let v = (1.0 - 3.0 * s2 + 2.0 * s3) * y0
        + (3.0 * s2 - 2.0 * s3) * y1
        + h * ((s - 2.0 * s2 + s3) * g0 + (-s2 + s3) * g1);
    v / table.total
}

/// Smooth monotone step across [lo, hi]: exactly 0 on one side, exactly 1
/// on the other, transitioning via the integrated standard profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Step1 {
    pub lo: f64,
    pub hi: f64,
    /// false: 0 before lo, 1 after hi (rise). true: mirrored (fall).
    pub falling: bool,
}

impl Step1 {
    pub fn rise(lo: f64, hi: f64) -> Self {
        assert!(hi > lo, "step needs a positive margin");
        Step1 {
            lo,
            hi,
            falling: false,
        }
    }

    pub fn fall(lo: f64, hi: f64) -> Self {
        assert!(hi > lo, "step needs a positive margin");
        Step1 {
            lo,
            hi,
            falling: true,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let u = 2.0 * (x - self.lo) / (self.hi - self.lo) - 1.0;
        let f = cumulative_fraction(u);
        if self.falling {
            1.0 - f
        } else {
            f
        }
    }

    /// The nonzero set: a half line (the step is 1 beyond its margin).
    pub fn support_bounds(&self) -> (Option<f64>, Option<f64>) {
        if self.falling {
            (None, Some(self.hi))
        } else {
            (Some(self.lo), None)
        }
    }

    /// Exact derivative: a standard atom over the margin, scaled by the
    /// normalization and the margin width (negated for falling steps).
    pub fn d_dx(&self) -> (f64, Bump1) {
        let width = self.hi - self.lo;
        let scale = 2.0 / (width * step_table().total);
        let atom = Bump1 {
            center: 0.5 * (self.lo + self.hi),
            radius: 0.5 * width,
            num: Poly1::constant(scale),
            m: 0,
            e: 1,
        };
        (if self.falling { -1.0 } else { 1.0 }, atom)
    }

    pub fn dilate(&self, a: f64) -> Step1 {
        // For a > 0 the margin scales without flipping orientation.
        Step1 {
            lo: self.lo * a,
            hi: self.hi * a,
            falling: self.falling,
        }
    }

    pub fn translate(&self, v: f64) -> Step1 {
        Step1 {
            lo: self.lo + v,
            hi: self.hi + v,
            falling: self.falling,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;

    #[test]
    fn standard_bump_value_at_center_is_inverse_e() {
        let b = Bump1::standard(0.0, 1.0);
        assert!((b.eval(0.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(b.eval(1.0), 0.0);
        assert_eq!(b.eval(-2.0), 0.0);
    }

    #[test]
    fn derivative_matches_finite_differences_inside() {
        let b = Bump1::standard(0.5, 2.0);
        let db = b.d_dx();
        assert_eq!(db.m, b.m + 2);
        for &x in &[-0.8, 0.0, 0.5, 1.3, 2.2] {
            let h = 1e-5;
            let fd = (b.eval(x + h) - b.eval(x - h)) / (2.0 * h);
            assert!(
                (db.eval(x) - fd).abs() < 1e-8 * (1.0 + fd.abs()),
                "x={x}: exact {} vs fd {}",
                db.eval(x),
                fd
            );
        }
    }

    #[test]
    fn step_is_exact_outside_its_margin_and_monotone_inside() {
        let s = Step1::rise(1.0, 2.0);
        assert_eq!(s.eval(0.9), 0.0);
        assert_eq!(s.eval(1.0), 0.0);
        assert_eq!(s.eval(2.0), 1.0);
        assert_eq!(s.eval(5.0), 1.0);
        let mut last = 0.0;
        for i in 0..=100 {
            let v = s.eval(1.0 + i as f64 / 100.0);
            assert!(v >= last - 1e-15);
            assert!((0.0..=1.0).contains(&v));
            last = v;
        }
    }

    #[test]
    fn step_derivative_integrates_back_to_one() {
        let s = Step1::rise(-1.5, 0.5);
        let (sign, atom) = s.d_dx();
        let mut f = |x: f64| C64::new(sign * atom.eval(x), 0.0);
        let total = crate::quad::adaptive_1d(&mut f, -1.5, 0.5, 1e-12).unwrap();
        assert!((total.re - 1.0).abs() < 1e-9, "got {}", total.re);
    }

    #[test]
    fn step_value_agrees_with_direct_quadrature() {
        let s = Step1::fall(0.0, 1.0);
        for &x in &[0.1, 0.25, 0.5, 0.75, 0.9] {
            let mut f = |t: f64| C64::new(profile(2.0 * t - 1.0), 0.0);
            let part = crate::quad::adaptive_1d(&mut f, 0.0, x, 1e-13)
                .unwrap()
                .re;
            let whole = crate::quad::adaptive_1d(&mut f, 0.0, 1.0, 1e-13)
                .unwrap()
                .re;
            let expect = 1.0 - part / whole;
            assert!(
                (s.eval(x) - expect).abs() < 1e-10,
                "x={x}: {} vs {}",
                s.eval(x),
                expect
            );
        }
    }
}
