//! Compactly supported algebra elements with exact derivatives.
//!
//! An [`Element`] is a finite sum of separable terms. Each term carries a
//! complex coefficient and, per axis, a product list of one-dimensional
//! primitives (polynomial, boundary-exponential atom, smooth step). The
//! family is closed under partial differentiation, addition, scalar
//! multiplication, dilation, translation, and aligned products, and every
//! term's support is a compact box, which the constructor enforces.
//!
//! Differentiation acts axis by axis on separable terms, so mixed partials
//! commute exactly (bit for bit), not merely up to rounding.

use crate::bump::atom::{Bump1, Step1, EPS_B};
use crate::error::{Error, Result};
use crate::poly::Poly1;
use crate::{C64, COEF_GUARD};

/// Highest per-axis derivative order taken by the closed-form chain rule.
/// Beyond it the canonicalized numerator polynomials carry integer
/// coefficients that exceed f64's exact range, so `partial` switches to a
/// derivative bundle evaluated by truncated Taylor recurrences.
pub const CANONICAL_ORDER_LIMIT: usize = 12;

// ---- truncated Taylor series in the ambient offset (bundle evaluation) ----

fn series_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for (i, &ai) in a.iter().enumerate().take(n + 1) {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(n + 1 - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// 1/t as a series; t[0] must be nonzero.
fn series_recip(t: &[f64], n: usize) -> Vec<f64> {
    let mut q = vec![0.0; n + 1];
    q[0] = 1.0 / t[0];
    for k in 1..=n {
        let mut acc = 0.0;
        for m in 1..=k.min(t.len() - 1) {
            acc += t[m] * q[k - m];
        }
        q[k] = -acc / t[0];
    }
    q
}

/// exp(w) as a series via the derivative recurrence y' = w' y.
fn series_exp(w: &[f64], n: usize) -> Vec<f64> {
    let mut y = vec![0.0; n + 1];
    y[0] = w[0].exp();
    for k in 1..=n {
        let mut acc = 0.0;
        for (m, &wm) in w.iter().enumerate().take(k + 1).skip(1) {
            acc += m as f64 * wm * y[k - m];
        }
        y[k] = acc / k as f64;
    }
    y
}

/// Taylor coefficients of one atom at x, in the ambient offset. Outside the
/// support (or past the boundary cutoff) every derivative is crushed to
/// zero, matching pointwise evaluation.
fn bump_series(b: &Bump1, x: f64, n: usize) -> Vec<f64> {
    let u0 = (x - b.center) / b.radius;
    let t0 = 1.0 - u0 * u0;
    if t0 <= EPS_B {
        return vec![0.0; n + 1];
    }
    // t(s) = t0 - (2 u0 / r) s - s^2 / r^2.
    let t = [
        t0,
        -2.0 * u0 / b.radius,
        -1.0 / (b.radius * b.radius),
    ];
    let q = series_recip(&t, n);
    let w: Vec<f64> = q.iter().map(|v| -(b.e as f64) * v).collect();
    let mut out = series_exp(&w, n);
    for _ in 0..b.m {
        out = series_mul(&out, &q, n);
    }
    if !(b.num.degree() == 0 && b.num.eval(0.0) == 1.0) {
        // num(u0 + s/r): shift in u, then rescale powers to the ambient s.
        let mut num = b.num.taylor_at(u0, n);
        let mut scale = 1.0;
        for c in num.iter_mut() {
            *c *= scale;
            scale /= b.radius;
        }
        out = series_mul(&out, &num, n);
    }
    out
}

fn prim_series(p: &Prim, x: f64, n: usize) -> Vec<f64> {
    match p {
        Prim::Poly(q) => q.taylor_at(x, n),
        Prim::Bump(b) => bump_series(b, x, n),
        Prim::Step(s) => {
            // The step's derivative is an atom: integrate its series.
            let (sign, atom) = s.d_dx();
            let mut out = vec![0.0; n + 1];
            out[0] = s.eval(x);
            if n > 0 {
                let a = bump_series(&atom, x, n - 1);
                for j in 1..=n {
                    out[j] = sign * a[j - 1] / j as f64;
                }
            }
            out
        }
        Prim::Bundle1 { coefs, base } => {
            // Series of the bundle itself: differentiate the base series.
            let m = n + coefs.len() - 1;
            let t = product_series(base, x, m);
            let mut out = vec![0.0; n + 1];
            for (j, &cj) in coefs.iter().enumerate() {
                if cj == 0.0 {
                    continue;
                }
                // d^j of sum_k t_k s^k has i-th Taylor coefficient
                // t_{i+j} (i+j)!/i! = t_{i+j} C(i+j, i) j!.
                let mut binom = 1.0;
                let jf = factorial(j);
                for (i, slot) in out.iter_mut().enumerate() {
                    if i > 0 {
                        binom = binom * (i + j) as f64 / i as f64;
                    }
                    *slot += cj * jf * binom * t[i + j];
                }
            }
            out
        }
    }
}

fn product_series(prims: &[Prim], x: f64, n: usize) -> Vec<f64> {
    let mut acc = vec![0.0; n + 1];
    acc[0] = 1.0;
    for p in prims {
        acc = series_mul(&acc, &prim_series(p, x, n), n);
    }
    acc
}

fn factorial(n: usize) -> f64 {
    let mut f = 1.0;
    for k in 2..=n {
        f *= k as f64;
    }
    f
}

fn dilate_prim(p: &Prim, a: f64) -> Prim {
    match p {
        Prim::Poly(q) => Prim::Poly(q.compose_affine(1.0 / a, 0.0)),
        Prim::Bump(b) => Prim::Bump(b.dilate(a)),
        Prim::Step(s) => Prim::Step(s.dilate(a)),
        Prim::Bundle1 { coefs, base } => {
            // With B_a(x) = B(x/a), (d^j B)(x/a) = a^j (d^j B_a)(x).
            let mut scaled = coefs.clone();
            let mut pw = 1.0;
            for c in scaled.iter_mut() {
                *c *= pw;
                pw *= a;
            }
            Prim::Bundle1 {
                coefs: scaled,
                base: base.iter().map(|q| dilate_prim(q, a)).collect(),
            }
        }
    }
}

fn translate_prim(p: &Prim, v: f64) -> Prim {
    match p {
        Prim::Poly(q) => Prim::Poly(q.compose_affine(1.0, -v)),
        Prim::Bump(b) => Prim::Bump(b.translate(v)),
        Prim::Step(s) => Prim::Step(s.translate(v)),
        Prim::Bundle1 { coefs, base } => Prim::Bundle1 {
            coefs: coefs.clone(),
            base: base.iter().map(|q| translate_prim(q, v)).collect(),
        },
    }
}

/// One-dimensional building block of a term's axis product.
#[derive(Debug, Clone, PartialEq)]
pub enum Prim {
    Poly(Poly1),
    Bump(Bump1),
    Step(Step1),
    /// Derivative bundle: sum_j coefs[j] (d/dx)^j of the product of `base`.
    /// Closed under d/dx by an index shift and evaluated through truncated
    /// Taylor recurrences, which stay at roundoff accuracy at orders where
    /// canonicalized numerators cannot: their integer coefficient growth
    /// leaves the exact range of f64 past order twelve or so.
    Bundle1 { coefs: Vec<f64>, base: Vec<Prim> },
}

impl Prim {
    fn eval(&self, x: f64) -> f64 {
        match self {
            Prim::Poly(p) => p.eval(x),
            Prim::Bump(b) => b.eval(x),
            Prim::Step(s) => s.eval(x),
            Prim::Bundle1 { coefs, base } => {
                let n = coefs.len() - 1;
                let t = product_series(base, x, n);
                let mut acc = 0.0;
                let mut fact = 1.0;
                for (j, &cj) in coefs.iter().enumerate() {
                    if j > 0 {
                        fact *= j as f64;
                    }
                    acc += cj * fact * t[j];
                }
                acc
            }
        }
    }

    /// Bounds of the nonzero set: None means unbounded on that side.
    fn support_bounds(&self) -> (Option<f64>, Option<f64>) {
        match self {
            Prim::Poly(_) => (None, None),
            Prim::Bump(b) => {
                let (lo, hi) = b.support();
                (Some(lo), Some(hi))
            }
            Prim::Step(s) => s.support_bounds(),
            Prim::Bundle1 { base, .. } => {
                let mut lo: Option<f64> = None;
                let mut hi: Option<f64> = None;
                for p in base {
                    let (plo, phi) = p.support_bounds();
                    if let Some(v) = plo {
                        lo = Some(lo.map_or(v, |c: f64| c.max(v)));
                    }
                    if let Some(v) = phi {
                        hi = Some(hi.map_or(v, |c: f64| c.min(v)));
                    }
                }
                (lo, hi)
            }
        }
    }

    fn max_abs_coef(&self) -> f64 {
        match self {
            Prim::Poly(p) => p.max_abs_coef(),
            Prim::Bump(b) => b.max_abs_coef(),
            Prim::Step(_) => 1.0,
            Prim::Bundle1 { coefs, base } => {
                let own = coefs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
                base.iter().fold(own, |m, p| m.max(p.max_abs_coef()))
            }
        }
    }
}

/// One separable term: coef * prod_i (prod of prims on axis i).
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coef: C64,
    pub axes: Vec<Vec<Prim>>,
}

impl Term {
    pub fn eval(&self, x: &[f64]) -> C64 {
        let mut acc = 1.0;
        for (axis, prims) in self.axes.iter().enumerate() {
            for p in prims {
                acc *= p.eval(x[axis]);
                if acc == 0.0 {
                    return C64::new(0.0, 0.0);
                }
            }
        }
        self.coef * acc
    }

    /// Combined support bounds on one axis; `None` when unbounded on a
    /// side, `Some((lo, hi))` with lo >= hi signalling an empty set.
    fn axis_bounds(&self, axis: usize) -> (Option<f64>, Option<f64>) {
        let mut lo: Option<f64> = None;
        let mut hi: Option<f64> = None;
        for p in &self.axes[axis] {
            let (plo, phi) = p.support_bounds();
            if let Some(v) = plo {
                lo = Some(lo.map_or(v, |c: f64| c.max(v)));
            }
            if let Some(v) = phi {
                hi = Some(hi.map_or(v, |c: f64| c.min(v)));
            }
        }
        (lo, hi)
    }

    fn is_empty_on(&self, axis: usize) -> bool {
        match self.axis_bounds(axis) {
            (Some(lo), Some(hi)) => lo >= hi,
            _ => false,
        }
    }

    /// Canonical form: per axis, polynomials are multiplied together,
    /// aligned atoms are merged, and a lone atom absorbs the polynomial.
    /// Returns None when the term is structurally zero.
    fn canonicalized(mut self) -> Option<Term> {
        if self.coef.norm() == 0.0 {
            return None;
        }
        for axis in 0..self.axes.len() {
            let prims = std::mem::take(&mut self.axes[axis]);
            let mut poly: Option<Poly1> = None;
            let mut bumps: Vec<Bump1> = Vec::new();
            let mut steps: Vec<Step1> = Vec::new();
            let mut bundles: Vec<Prim> = Vec::new();
            for p in prims {
                match p {
                    Prim::Poly(q) => {
                        poly = Some(match poly {
                            Some(acc) => acc.mul(&q),
                            None => q,
                        });
                    }
                    Prim::Bump(b) => bumps.push(b),
                    Prim::Step(s) => steps.push(s),
                    b @ Prim::Bundle1 { .. } => bundles.push(b),
                }
            }
            if let Some(p) = &poly {
                if p.is_zero() {
                    return None;
                }
            }
            // Greedy aligned merging keeps at most one atom per distinct
            // (center, radius) on the axis.
            let mut merged: Vec<Bump1> = Vec::new();
            'next: for b in bumps {
                for m in merged.iter_mut() {
                    if let Some(prod) = m.mul_aligned(&b) {
                        *m = prod;
                        continue 'next;
                    }
                }
                merged.push(b);
            }
            if merged.len() == 1 {
                if let Some(p) = poly.take() {
                    if p.degree() == 0 {
                        self.coef *= p.eval(0.0);
                        if self.coef.norm() == 0.0 {
                            return None;
                        }
                    } else {
                        merged[0] = merged[0].absorb_poly(&p);
                    }
                }
            }
            let mut out: Vec<Prim> = Vec::new();
            if let Some(p) = poly {
                if p.degree() == 0 {
                    // A constant that could not be absorbed folds into coef.
                    self.coef *= p.eval(0.0);
                    if self.coef.norm() == 0.0 {
                        return None;
                    }
                } else {
                    out.push(Prim::Poly(p));
                }
            }
            out.extend(merged.into_iter().map(Prim::Bump));
            out.extend(steps.into_iter().map(Prim::Step));
            out.extend(bundles);
            self.axes[axis] = out;
            if self.is_empty_on(axis) {
                return None;
            }
        }
        Some(self)
    }

    fn max_abs_coef(&self) -> f64 {
        let mut worst = self.coef.norm();
        for prims in &self.axes {
            for p in prims {
                worst = worst.max(p.max_abs_coef());
            }
        }
        worst
    }
}

/// Finite sum of separable compactly supported terms on R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    d: usize,
    terms: Vec<Term>,
}

impl Element {
    pub fn new(d: usize, terms: Vec<Term>) -> Result<Self> {
        if d == 0 {
            return Err(Error::OutOfRange("dimension must be at least 1".into()));
        }
        let mut canon = Vec::new();
        for t in terms {
            if t.axes.len() != d {
                return Err(Error::OutOfRange(format!(
                    "term has {} axes, element has dimension {d}",
                    t.axes.len()
                )));
            }
            if let Some(c) = t.canonicalized() {
                canon.push(c);
            }
        }
        for (i, t) in canon.iter().enumerate() {
            for axis in 0..d {
                match t.axis_bounds(axis) {
                    (Some(_), Some(_)) => {}
                    _ => {
                        return Err(Error::NoCompactDomain(format!(
                            "term {i} is unbounded on axis {axis}"
                        )))
                    }
                }
            }
            if !t.max_abs_coef().is_finite() || t.max_abs_coef() > COEF_GUARD {
                return Err(Error::TruncationGuard(format!(
                    "coefficient magnitude exceeds {COEF_GUARD:e}"
                )));
            }
        }
        Ok(Element { d, terms: canon })
    }

    pub fn zero(d: usize) -> Self {
        Element { d, terms: Vec::new() }
    }

    /// The standard atom: per axis exp(-1/(1-u_i^2)) with u_i centered and
    /// scaled; value at the center is e^{-d}.
    pub fn standard_bump(center: &[f64], radius: &[f64]) -> Result<Self> {
        if center.len() != radius.len() || center.is_empty() {
            return Err(Error::OutOfRange(
                "center and radius must agree in a positive dimension".into(),
            ));
        }
        for r in radius {
            if !(*r > 0.0) {
                return Err(Error::OutOfRange(format!("radius must be positive, got {r}")));
            }
        }
        let axes = center
            .iter()
            .zip(radius)
            .map(|(c, r)| vec![Prim::Bump(Bump1::standard(*c, *r))])
            .collect();
        Element::new(
            center.len(),
            vec![Term {
                coef: C64::new(1.0, 0.0),
                axes,
            }],
        )
    }

    /// Smooth plateau: exactly 1 on the inner box, 0 outside the inner box
    /// inflated by `margin`, monotone in between.
    pub fn plateau(inner: &[(f64, f64)], margin: f64) -> Result<Self> {
        if inner.is_empty() {
            return Err(Error::OutOfRange("dimension must be at least 1".into()));
        }
        if !(margin > 0.0) {
            return Err(Error::OutOfRange(format!(
                "plateau margin must be positive, got {margin}"
            )));
        }
        for (lo, hi) in inner {
            if !(hi > lo) {
                return Err(Error::OutOfRange(format!(
                    "inner box side [{lo}, {hi}] is empty"
                )));
            }
        }
        let axes = inner
            .iter()
            .map(|(lo, hi)| {
                vec![
                    Prim::Step(Step1::rise(lo - margin, *lo)),
                    Prim::Step(Step1::fall(*hi, hi + margin)),
                ]
            })
            .collect();
        Element::new(
            inner.len(),
            vec![Term {
                coef: C64::new(1.0, 0.0),
                axes,
            }],
        )
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        debug_assert_eq!(x.len(), self.d);
        let mut acc = C64::new(0.0, 0.0);
        for t in &self.terms {
            acc += t.eval(x);
        }
        acc
    }

    /// Union bounding box of all term supports; None for the zero element.
    pub fn support_box(&self) -> Option<Vec<(f64, f64)>> {
        if self.terms.is_empty() {
            return None;
        }
        let mut bx = vec![(f64::INFINITY, f64::NEG_INFINITY); self.d];
        for t in &self.terms {
            for axis in 0..self.d {
                if let (Some(lo), Some(hi)) = t.axis_bounds(axis) {
                    bx[axis].0 = bx[axis].0.min(lo);
                    bx[axis].1 = bx[axis].1.max(hi);
                }
            }
        }
        Some(bx)
    }

    /// Per-term support boxes; every term in a validated element is compact,
    /// so each box is finite. Sup searches seed their grids from these.
    pub fn term_boxes(&self) -> Vec<Vec<(f64, f64)>> {
        self.terms
            .iter()
            .map(|t| {
                (0..self.d)
                    .map(|axis| match t.axis_bounds(axis) {
                        (Some(lo), Some(hi)) => (lo, hi),
                        _ => (f64::NEG_INFINITY, f64::INFINITY),
                    })
                    .collect()
            })
            .collect()
    }

    /// When the element is a single unit-coefficient product of steps, the
    /// box on which it is identically 1 (used for plateau fast paths).
    pub fn constant_one_box(&self) -> Option<Vec<(f64, f64)>> {
        if self.terms.len() != 1 {
            return None;
        }
        let t = &self.terms[0];
        if (t.coef - C64::new(1.0, 0.0)).norm() > 1e-12 {
            return None;
        }
        let mut bx = Vec::with_capacity(self.d);
        for prims in &t.axes {
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            for p in prims {
                match p {
                    Prim::Step(s) => {
                        if s.falling {
                            hi = hi.min(s.lo);
                        } else {
                            lo = lo.max(s.hi);
                        }
                    }
                    _ => return None,
                }
            }
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return None;
            }
            bx.push((lo, hi));
        }
        Some(bx)
    }

    /// Exact single-axis partial derivative (plain d/dx_axis, no complex
    /// convention factor).
    pub fn partial_axis(&self, axis: usize) -> Result<Element> {
        if axis >= self.d {
            return Err(Error::OutOfRange(format!(
                "axis {axis} out of range for dimension {}",
                self.d
            )));
        }
        let mut out: Vec<Term> = Vec::new();
        for t in &self.terms {
            for j in 0..t.axes[axis].len() {
                let mut nt = t.clone();
                match &t.axes[axis][j] {
                    Prim::Poly(p) => {
                        let dp = p.derivative();
                        if dp.is_zero() {
                            continue;
                        }
                        nt.axes[axis][j] = Prim::Poly(dp);
                    }
                    Prim::Bump(b) => {
                        nt.axes[axis][j] = Prim::Bump(b.d_dx());
                    }
                    Prim::Step(s) => {
                        let (sign, atom) = s.d_dx();
                        nt.coef *= sign;
                        nt.axes[axis][j] = Prim::Bump(atom);
                    }
                    Prim::Bundle1 { coefs, base } => {
                        // d/dx of sum_j c_j d^j is the same bundle with
                        // orders shifted up by one.
                        let mut shifted = Vec::with_capacity(coefs.len() + 1);
                        shifted.push(0.0);
                        shifted.extend_from_slice(coefs);
                        nt.axes[axis][j] = Prim::Bundle1 {
                            coefs: shifted,
                            base: base.clone(),
                        };
                    }
                }
                if let Some(c) = nt.canonicalized() {
                    out.push(c);
                }
            }
        }
        if out.len() > 200_000 {
            return Err(Error::TruncationGuard(format!(
                "term count {} exceeds the expansion guard",
                out.len()
            )));
        }
        for t in &out {
            let worst = t.max_abs_coef();
            if !worst.is_finite() || worst > COEF_GUARD {
                return Err(Error::TruncationGuard(format!(
                    "coefficient magnitude exceeds {COEF_GUARD:e}"
                )));
            }
        }
        Ok(Element {
            d: self.d,
            terms: out,
        })
    }

    /// Iterated exact partials in multi-index order k (pure d^|k|/dx^k).
    /// Past CANONICAL_ORDER_LIMIT per axis the closed-form chain is replaced
    /// by a one-shot derivative bundle: the canonicalized numerators grow
    /// integer coefficients beyond f64's exact range at those orders.
    pub fn partial(&self, k: &[u32]) -> Result<Element> {
        debug_assert_eq!(k.len(), self.d);
        let mut cur = self.clone();
        for (axis, reps) in k.iter().enumerate() {
            let reps = *reps as usize;
            if reps > CANONICAL_ORDER_LIMIT {
                let mut coefs = vec![0.0; reps + 1];
                coefs[reps] = 1.0;
                let mut terms = Vec::with_capacity(cur.terms.len());
                for t in &cur.terms {
                    let mut nt = t.clone();
                    nt.axes[axis] = vec![Prim::Bundle1 {
                        coefs: coefs.clone(),
                        base: t.axes[axis].clone(),
                    }];
                    terms.push(nt);
                }
                cur = Element::new(cur.d, terms)?;
            } else {
                for _ in 0..reps {
                    cur = cur.partial_axis(axis)?;
                }
            }
        }
        Ok(cur)
    }

    /// Derivative in the complex convention: (1/i)^{|k|} times the partial.
    pub fn differentiate(&self, k: &[u32]) -> Result<Element> {
        let part = self.partial(k)?;
        Ok(part.scale(inv_i_pow(crate::mindex::abs(k))))
    }

    pub fn scale(&self, c: C64) -> Element {
        if c.norm() == 0.0 {
            return Element::zero(self.d);
        }
        Element {
            d: self.d,
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coef: t.coef * c,
                    axes: t.axes.clone(),
                })
                .collect(),
        }
    }

    pub fn add(&self, other: &Element) -> Result<Element> {
        if self.d != other.d {
            return Err(Error::UnsupportedCombination(
                "cannot add elements of different dimensions".into(),
            ));
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Element::new(self.d, terms)
    }

    /// Structural product. Works when, per axis, atoms from the two sides
    /// are aligned or disjoint; two overlapping unaligned atoms on one axis
    /// leave the separable family, and the caller should fall back to a
    /// pointwise product wrapper.
    pub fn mul(&self, other: &Element) -> Result<Element> {
        if self.d != other.d {
            return Err(Error::UnsupportedCombination(
                "cannot multiply elements of different dimensions".into(),
            ));
        }
        let mut terms = Vec::new();
        for a in &self.terms {
            for b in &other.terms {
                let axes: Vec<Vec<Prim>> = a
                    .axes
                    .iter()
                    .zip(&b.axes)
                    .map(|(pa, pb)| {
                        let mut v = pa.clone();
                        v.extend(pb.iter().cloned());
                        v
                    })
                    .collect();
                let cand = Term {
                    coef: a.coef * b.coef,
                    axes,
                };
                if let Some(c) = cand.canonicalized() {
                    // Reject terms that still hold two overlapping
                    // unaligned atoms on one axis.
                    for prims in &c.axes {
                        let bumps: Vec<&Bump1> = prims
                            .iter()
                            .filter_map(|p| match p {
                                Prim::Bump(b) => Some(b),
                                _ => None,
                            })
                            .collect();
                        for i in 0..bumps.len() {
                            for j in i + 1..bumps.len() {
                                let (l1, h1) = bumps[i].support();
                                let (l2, h2) = bumps[j].support();
                                if l1.max(l2) < h1.min(h2) {
                                    return Err(Error::UnsupportedCombination(
                                        "product of overlapping unaligned atoms is not separable; use a pointwise product wrapper".into(),
                                    ));
                                }
                            }
                        }
                    }
                    terms.push(c);
                }
            }
        }
        Element::new(self.d, terms)
    }

    /// phi(x / a) for a > 0; exact (supports and centers scale by a).
    pub fn dilate(&self, a: f64) -> Result<Element> {
        if !(a > 0.0) {
            return Err(Error::OutOfRange(format!(
                "dilation scale must be positive, got {a}"
            )));
        }
        let terms = self
            .terms
            .iter()
            .map(|t| Term {
                coef: t.coef,
                axes: t
                    .axes
                    .iter()
                    .map(|prims| {
                        prims
                            .iter()
                            .map(|p| dilate_prim(p, a))
                            .collect()
                    })
                    .collect(),
            })
            .collect();
        Element::new(self.d, terms)
    }

    /// phi(x - v); exact.
    pub fn translate(&self, v: &[f64]) -> Result<Element> {
        if v.len() != self.d {
            return Err(Error::OutOfRange(
                "translation vector dimension mismatch".into(),
            ));
        }
        let terms = self
            .terms
            .iter()
            .map(|t| Term {
                coef: t.coef,
                axes: t
                    .axes
                    .iter()
                    .enumerate()
                    .map(|(axis, prims)| {
                        prims
                            .iter()
                            .map(|p| translate_prim(p, v[axis]))
                            .collect()
                    })
                    .collect(),
            })
            .collect();
        Element::new(self.d, terms)
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }
}

/// (1/i)^n = (-i)^n as a complex scalar.
pub fn inv_i_pow(n: u32) -> C64 {
    match n % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, -1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, 1.0),
    }
}

/// A plateau with its construction metadata kept alongside the element.
#[derive(Debug, Clone)]
pub struct PlateauFunction {
    pub element: Element,
    pub inner: Vec<(f64, f64)>,
    pub outer: Vec<(f64, f64)>,
    pub margin: f64,
}

impl PlateauFunction {
    pub fn new(inner: &[(f64, f64)], margin: f64) -> Result<Self> {
        let element = Element::plateau(inner, margin)?;
        let outer = inner
            .iter()
            .map(|(lo, hi)| (lo - margin, hi + margin))
            .collect();
        Ok(PlateauFunction {
            element,
            inner: inner.to_vec(),
            outer,
            margin,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_bump_center_value_matches_dimension() {
        let b = Element::standard_bump(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let v = b.eval(&[0.0, 0.0]);
        assert!((v.re - (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(b.eval(&[1.5, 0.0]), C64::new(0.0, 0.0));
    }

    #[test]
    fn mixed_partials_commute_bit_for_bit() {
        let b = Element::standard_bump(&[0.2, -0.3], &[1.0, 2.0]).unwrap();
        let xy = b
            .partial(&[1, 0])
            .unwrap()
            .partial(&[0, 1])
            .unwrap();
        let yx = b
            .partial(&[0, 1])
            .unwrap()
            .partial(&[1, 0])
            .unwrap();
        assert_eq!(xy, yx);
        let p = [0.5, 0.7];
        assert_eq!(xy.eval(&p), yx.eval(&p));
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let b = Element::standard_bump(&[0.0], &[1.0]).unwrap();
        let db = b.partial(&[1]).unwrap();
        let h = 1e-5;
        for &x in &[-0.7, -0.2, 0.0, 0.4, 0.8] {
            let fd = (b.eval(&[x + h]).re - b.eval(&[x - h]).re) / (2.0 * h);
            let ex = db.eval(&[x]).re;
            assert!((fd - ex).abs() < 1e-8 * (1.0 + ex.abs()), "x={x}");
        }
    }

    #[test]
    fn plateau_is_exactly_one_inside_and_zero_outside() {
        let p = Element::plateau(&[(-2.0, 2.0), (-1.0, 1.0)], 1.0).unwrap();
        assert_eq!(p.eval(&[0.0, 0.0]), C64::new(1.0, 0.0));
        assert_eq!(p.eval(&[2.0, 1.0]), C64::new(1.0, 0.0));
        assert_eq!(p.eval(&[3.1, 0.0]), C64::new(0.0, 0.0));
        let mid = p.eval(&[2.5, 0.0]).re;
        assert!(mid > 0.0 && mid < 1.0);
        assert_eq!(
            p.constant_one_box(),
            Some(vec![(-2.0, 2.0), (-1.0, 1.0)])
        );
    }

    #[test]
    fn plateau_derivative_lives_on_the_margin_shell() {
        let p = Element::plateau(&[(-2.0, 2.0)], 1.0).unwrap();
        let dp = p.partial(&[1]).unwrap();
        assert_eq!(dp.eval(&[0.0]), C64::new(0.0, 0.0));
        assert!(dp.eval(&[2.5]).re < 0.0);
        assert!(dp.eval(&[-2.5]).re > 0.0);
        // second derivative prunes the cross terms with disjoint margins
        let d2 = dp.partial(&[1]).unwrap();
        assert!(d2.term_count() <= 2, "got {}", d2.term_count());
    }

    #[test]
    fn aligned_product_merges_into_single_atom_terms() {
        let b = Element::standard_bump(&[0.0], &[1.0]).unwrap();
        let sq = b.mul(&b).unwrap();
        assert_eq!(sq.term_count(), 1);
        let x = 0.3;
        let expect = b.eval(&[x]).re * b.eval(&[x]).re;
        assert!((sq.eval(&[x]).re - expect).abs() < 1e-15);
    }

    #[test]
    fn overlapping_unaligned_product_is_refused() {
        let a = Element::standard_bump(&[0.0], &[1.0]).unwrap();
        let b = Element::standard_bump(&[0.5], &[1.0]).unwrap();
        assert!(matches!(
            a.mul(&b),
            Err(Error::UnsupportedCombination(_))
        ));
        // disjoint unaligned atoms multiply to zero, which is fine
        let c = Element::standard_bump(&[5.0], &[1.0]).unwrap();
        let z = a.mul(&c).unwrap();
        assert!(z.is_zero());
    }

    #[test]
    fn lone_rising_step_is_not_compact() {
        let t = Term {
            coef: C64::new(1.0, 0.0),
            axes: vec![vec![Prim::Step(Step1::rise(0.0, 1.0))]],
        };
        assert!(matches!(
            Element::new(1, vec![t]),
            Err(Error::NoCompactDomain(_))
        ));
    }

    #[test]
    fn dilation_scales_supports_exactly() {
        let b = Element::standard_bump(&[1.0], &[1.0]).unwrap();
        let d = b.dilate(3.0).unwrap();
        assert_eq!(d.support_box(), Some(vec![(0.0, 6.0)]));
        assert!((d.eval(&[3.0]).re - b.eval(&[1.0]).re).abs() < 1e-15);
    }

    #[test]
    fn complex_convention_scales_odd_orders_by_minus_i() {
        let b = Element::standard_bump(&[0.0], &[1.0]).unwrap();
        let d1 = b.differentiate(&[1]).unwrap();
        let p1 = b.partial(&[1]).unwrap();
        let x = [0.4];
        let got = d1.eval(&x);
        let expect = p1.eval(&x) * C64::new(0.0, -1.0);
        assert!((got - expect).norm() < 1e-15);
    }

    #[test]
    fn derivative_bundle_matches_canonical_chain_at_moderate_order() {
        let b = Element::standard_bump(&[0.1], &[1.0]).unwrap();
        let canonical = b.partial(&[6]).unwrap();
        let mut coefs = vec![0.0; 7];
        coefs[6] = 1.0;
        let bundled = Element::new(
            1,
            b.terms
                .iter()
                .map(|t| Term {
                    coef: t.coef,
                    axes: vec![vec![Prim::Bundle1 {
                        coefs: coefs.clone(),
                        base: t.axes[0].clone(),
                    }]],
                })
                .collect(),
        )
        .unwrap();
        for &x in &[-0.7, -0.3, 0.0, 0.25, 0.6, 0.88] {
            let c = canonical.eval(&[x]);
            let s = bundled.eval(&[x]);
            assert!(
                (c - s).norm() <= 1e-12 * (1.0 + c.norm()),
                "x={x}: canonical {c}, bundle {s}"
            );
        }
    }

    #[test]
    fn high_order_partial_matches_finite_difference_of_canonical_order() {
        // Order 13 exceeds the canonical limit, so partial builds a bundle;
        // check it against a central difference of the exact order-12 chain.
        let b = Element::standard_bump(&[0.0], &[1.0]).unwrap();
        let d12 = b.partial(&[12]).unwrap();
        let d13 = b.partial(&[13]).unwrap();
        let h = 3e-5;
        for &x in &[-0.45, -0.1, 0.2, 0.55] {
            let fd = (d12.eval(&[x + h]).re - d12.eval(&[x - h]).re) / (2.0 * h);
            let ex = d13.eval(&[x]).re;
            let scale = fd.abs().max(ex.abs()).max(1.0);
            assert!(
                (fd - ex).abs() <= 1e-3 * scale,
                "x={x}: fd {fd:.6e}, bundle {ex:.6e}"
            );
        }
    }

    #[test]
    fn high_order_partial_commutes_with_dilation() {
        let b = Element::standard_bump(&[0.0], &[1.0]).unwrap();
        let a = 1.7;
        let left = b.dilate(a).unwrap().partial(&[14]).unwrap();
        let right = b.partial(&[14]).unwrap();
        let factor = a.powi(-14);
        for &x in &[-0.5, 0.05, 0.3, 0.72] {
            let l = left.eval(&[a * x]);
            let r = right.eval(&[x]) * factor;
            assert!(
                (l - r).norm() <= 1e-10 * (1.0 + r.norm()),
                "x={x}: dilated-then-derived {l}, derived-then-scaled {r}"
            );
        }
    }

    #[test]
    fn high_order_partial_commutes_with_translation() {
        let b = Element::standard_bump(&[0.0], &[1.0]).unwrap();
        let v = [0.35];
        let left = b.translate(&v).unwrap().partial(&[15]).unwrap();
        let right = b.partial(&[15]).unwrap();
        for &x in &[-0.4, 0.0, 0.27, 0.6] {
            let l = left.eval(&[x + v[0]]);
            let r = right.eval(&[x]);
            assert!(
                (l - r).norm() <= 1e-12 * (1.0 + r.norm()),
                "x={x}: translated {l}, reference {r}"
            );
        }
    }
}
