//! Dense 1-D real polynomials; the numerators of bump atoms live here.

/// Coefficient count above which eval switches to the compensated scheme.
const COMPENSATED_MIN_LEN: usize = 12;

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let z = s - a;
    (s, (a - (s - z)) + (b - z))
}

fn split(a: f64) -> (f64, f64) {
    // Dekker split at 2^27 + 1; avoids relying on a hardware FMA.
    let c = 134_217_729.0 * a;
    let hi = c - (c - a);
    (hi, a - hi)
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
}

/// Coefficients in ascending degree order; the zero polynomial is `[]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly1 {
    pub c: Vec<f64>,
}

impl Poly1 {
    pub fn zero() -> Self {
        Poly1 { c: Vec::new() }
    }

    pub fn constant(a: f64) -> Self {
        if a == 0.0 {
            Self::zero()
        } else {
            Poly1 { c: vec![a] }
        }
    }

    pub fn monomial(coef: f64, degree: u32) -> Self {
        if coef == 0.0 {
            return Self::zero();
        }
        let mut c = vec![0.0; degree as usize + 1];
        c[degree as usize] = coef;
        Poly1 { c }
    }

    pub fn from_coeffs(c: Vec<f64>) -> Self {
        let mut p = Poly1 { c };
        p.trim();
        p
    }

    fn trim(&mut self) {
        while matches!(self.c.last(), Some(&x) if x == 0.0) {
            self.c.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.c.len().saturating_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        // High-degree numerators of derived atoms cancel catastrophically
        // under plain Horner; the compensated scheme keeps those at
        // roundoff and costs nothing at the low degrees everything else
        // uses.
        if self.c.len() > COMPENSATED_MIN_LEN {
            return self.eval_compensated(x);
        }
        let mut acc = 0.0;
        for &ci in self.c.iter().rev() {
            acc = acc * x + ci;
        }
        acc
    }

    /// Compensated Horner (error-free transformations): result accurate to
    /// about eps + cond * eps^2, which restores full precision wherever the
    /// stored coefficients themselves are exact.
    fn eval_compensated(&self, x: f64) -> f64 {
        let mut s = self.c[self.c.len() - 1];
        let mut e = 0.0;
        for &ci in self.c[..self.c.len() - 1].iter().rev() {
            let (p, pe) = two_prod(s, x);
            let (v, ve) = two_sum(p, ci);
            s = v;
            e = e * x + (pe + ve);
        }
        s + e
    }

    /// Taylor coefficients of p(x0 + h) in powers of h, length n + 1
    /// (repeated synthetic division; exact coefficient arithmetic pattern).
    pub fn taylor_at(&self, x0: f64, n: usize) -> Vec<f64> {
        let mut b = self.c.clone();
        if b.is_empty() {
            return vec![0.0; n + 1];
        }
        let deg = b.len() - 1;
        for j in 0..deg {
            for i in (j..deg).rev() {
                b[i] += x0 * b[i + 1];
            }
        }
        b.resize(n + 1, 0.0);
        b
    }

    pub fn derivative(&self) -> Poly1 {
        if self.c.len() <= 1 {
            return Poly1::zero();
        }
        let c = self
            .c
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &ci)| ci * i as f64)
            .collect();
        Poly1::from_coeffs(c)
    }

    pub fn add(&self, other: &Poly1) -> Poly1 {
        let n = self.c.len().max(other.c.len());
        let mut c = vec![0.0; n];
        for (i, &ci) in self.c.iter().enumerate() {
            c[i] += ci;
        }
        for (i, &ci) in other.c.iter().enumerate() {
            c[i] += ci;
        }
        Poly1::from_coeffs(c)
    }

    pub fn mul(&self, other: &Poly1) -> Poly1 {
        if self.is_zero() || other.is_zero() {
            return Poly1::zero();
        }
        let mut c = vec![0.0; self.c.len() + other.c.len() - 1];
        for (i, &a) in self.c.iter().enumerate() {
            for (j, &b) in other.c.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly1::from_coeffs(c)
    }

    pub fn scale(&self, a: f64) -> Poly1 {
        Poly1::from_coeffs(self.c.iter().map(|&ci| ci * a).collect())
    }

    /// p(a*x + b) expanded; used to re-center polynomial factors into atom
    /// coordinates.
    pub fn compose_affine(&self, a: f64, b: f64) -> Poly1 {
        let mut acc = Poly1::zero();
        let lin = Poly1::from_coeffs(vec![b, a]);
        for &ci in self.c.iter().rev() {
            acc = acc.mul(&lin).add(&Poly1::constant(ci));
        }
        acc
    }

    pub fn max_abs_coef(&self) -> f64 {
        self.c.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_matches_direct_sum() {
        let p = Poly1::from_coeffs(vec![1.0, -2.0, 0.5, 3.0]);
        let x = 1.3;
        let direct = 1.0 - 2.0 * x + 0.5 * x * x + 3.0 * x * x * x;
        assert!((p.eval(x) - direct).abs() < 1e-14);
    }

    #[test]
    fn derivative_drops_degree_by_one() {
        let p = Poly1::from_coeffs(vec![0.0, 0.0, 1.0]);
        assert_eq!(p.derivative(), Poly1::from_coeffs(vec![0.0, 2.0]));
    }

    #[test]
    fn affine_composition() {
        let p = Poly1::from_coeffs(vec![0.0, 0.0, 1.0]); // x^2
        let q = p.compose_affine(2.0, -1.0); // (2x-1)^2 = 1 - 4x + 4x^2
        assert_eq!(q, Poly1::from_coeffs(vec![1.0, -4.0, 4.0]));
    }

    #[test]
    fn product_degree_adds() {
        let p = Poly1::from_coeffs(vec![1.0, 1.0]);
        let q = p.mul(&p);
        assert_eq!(q, Poly1::from_coeffs(vec![1.0, 2.0, 1.0]));
    }

    #[test]
    fn compensated_eval_survives_catastrophic_cancellation() {
        // (x - 1)^20 expanded: alternating binomials up to 184756. Near
        // x = 1.25 the true value 0.25^20 sits eleven decades below the
        // plain-Horner noise floor eps * (1 + 1.25)^20.
        let mut c = vec![0.0; 21];
        let mut binom = 1.0f64;
        for (k, slot) in c.iter_mut().enumerate() {
            *slot = binom * if (20 - k) % 2 == 0 { 1.0 } else { -1.0 };
            binom = binom * (20 - k) as f64 / (k + 1) as f64;
        }
        let p = Poly1::from_coeffs(c);
        let x = 1.25;
        let exact = 0.25f64.powi(20);
        let rel = (p.eval(x) - exact).abs() / exact;
        assert!(rel < 1e-9, "relative error {rel:.3e}");
    }

    #[test]
    fn taylor_recentering_reproduces_values_and_derivatives() {
        let p = Poly1::from_coeffs(vec![1.0, 2.0, 3.0, 4.0]);
        let x0 = 0.5;
        let t = p.taylor_at(x0, 5);
        // Degree-3 input: coefficients past index 3 are exactly zero.
        assert_eq!(t.len(), 6);
        assert_eq!(&t[4..], &[0.0, 0.0]);
        // t[j] = p^(j)(x0) / j!
        let d1 = 2.0 + 6.0 * x0 + 12.0 * x0 * x0;
        let d2 = 6.0 + 24.0 * x0;
        assert!((t[0] - p.eval(x0)).abs() < 1e-14);
        assert!((t[1] - d1).abs() < 1e-14);
        assert!((t[2] - d2 / 2.0).abs() < 1e-14);
        assert!((t[3] - 4.0).abs() < 1e-14);
        for &s in &[-0.4, 0.3, 1.1] {
            let shifted: f64 = t
                .iter()
                .rev()
                .fold(0.0, |acc, &tc| acc * s + tc);
            assert!((shifted - p.eval(x0 + s)).abs() < 1e-13);
        }
    }
}
