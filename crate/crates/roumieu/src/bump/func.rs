//! Composite function objects over the closed algebra.
//!
//! [`Func`] closes the algebra elements under three extra formers that the
//! pairings need: the diagonal composition x, y -> phi(x + y) (dimension
//! doubles), pointwise products that are not separable (differentiated via
//! the product rule at the tree level), and finite linear combinations.
//! Derivatives remain exact: every former rewrites D^k into algebra
//! operations without any numerical differentiation.

use crate::bump::element::{inv_i_pow, Element};
use crate::error::{Error, Result};
use crate::C64;

/// Support description of a composite function.
#[derive(Debug, Clone, PartialEq)]
pub enum SupportInfo {
    /// Identically zero.
    Empty,
    /// Contained in the closed box (an over-approximation is allowed).
    Bounded(Vec<(f64, f64)>),
    /// Not contained in any box (e.g. a bare diagonal composition).
    Unbounded,
}

/// A function object: algebra element, diagonal composition, pointwise
/// product, or linear combination.
#[derive(Debug, Clone, PartialEq)]
pub enum Func {
    Elem(Element),
    /// Diag(phi) is the function (x, y) -> phi(x + y) on R^{2d}.
    Diag(Element),
    Prod(Vec<Func>),
    Sum(Vec<(C64, Func)>),
}

impl Func {
    pub fn dim(&self) -> usize {
        match self {
            Func::Elem(e) => e.dim(),
            Func::Diag(e) => 2 * e.dim(),
            Func::Prod(fs) => fs.first().map_or(0, |f| f.dim()),
            Func::Sum(fs) => fs.first().map_or(0, |(_, f)| f.dim()),
        }
    }

    pub fn zero(dim: usize) -> Func {
        Func::Elem(Element::zero(dim))
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        match self {
            Func::Elem(e) => e.eval(x),
            Func::Diag(e) => {
                let d = e.dim();
                let w: Vec<f64> = (0..d).map(|i| x[i] + x[d + i]).collect();
                e.eval(&w)
            }
            Func::Prod(fs) => {
                let mut acc = C64::new(1.0, 0.0);
                for f in fs {
                    acc *= f.eval(x);
                    if acc.norm() == 0.0 {
                        return acc;
                    }
                }
                acc
            }
            Func::Sum(fs) => {
                let mut acc = C64::new(0.0, 0.0);
                for (c, f) in fs {
                    acc += *c * f.eval(x);
                }
                acc
            }
        }
    }

    pub fn support(&self) -> SupportInfo {
        match self {
            Func::Elem(e) => match e.support_box() {
                None => SupportInfo::Empty,
                Some(bx) => SupportInfo::Bounded(bx),
            },
            Func::Diag(e) => {
                if e.is_zero() {
                    SupportInfo::Empty
                } else {
                    SupportInfo::Unbounded
                }
            }
            Func::Prod(fs) => {
                let mut acc: Option<Vec<(f64, f64)>> = None;
                let mut all_unbounded = true;
                for f in fs {
                    match f.support() {
                        SupportInfo::Empty => return SupportInfo::Empty,
                        SupportInfo::Unbounded => {}
                        SupportInfo::Bounded(bx) => {
                            all_unbounded = false;
                            acc = Some(match acc {
                                None => bx,
                                Some(cur) => {
                                    let mut out = Vec::with_capacity(cur.len());
                                    for (a, b) in cur.iter().zip(&bx) {
                                        out.push((a.0.max(b.0), a.1.min(b.1)));
                                    }
                                    out
                                }
                            });
                        }
                    }
                }
                match acc {
                    Some(bx) => {
                        if bx.iter().any(|(lo, hi)| lo >= hi) {
                            SupportInfo::Empty
                        } else {
                            SupportInfo::Bounded(bx)
                        }
                    }
                    None => {
                        if all_unbounded && !fs.is_empty() {
                            SupportInfo::Unbounded
                        } else {
                            // empty product is the constant 1
                            SupportInfo::Unbounded
                        }
                    }
                }
            }
            Func::Sum(fs) => {
                let mut acc: Option<Vec<(f64, f64)>> = None;
                for (c, f) in fs {
                    if c.norm() == 0.0 {
                        continue;
                    }
                    match f.support() {
                        SupportInfo::Empty => {}
                        SupportInfo::Unbounded => return SupportInfo::Unbounded,
                        SupportInfo::Bounded(bx) => {
                            acc = Some(match acc {
                                None => bx,
                                Some(cur) => {
                                    let mut out = Vec::with_capacity(cur.len());
                                    for (a, b) in cur.iter().zip(&bx) {
                                        out.push((a.0.min(b.0), a.1.max(b.1)));
                                    }
                                    out
                                }
                            });
                        }
                    }
                }
                match acc {
                    None => SupportInfo::Empty,
                    Some(bx) => SupportInfo::Bounded(bx),
                }
            }
        }
    }

    /// Bounding box, or an error when the support is not compact.
    pub fn bounded_support(&self) -> Result<Option<Vec<(f64, f64)>>> {
        match self.support() {
            SupportInfo::Empty => Ok(None),
            SupportInfo::Bounded(bx) => Ok(Some(bx)),
            SupportInfo::Unbounded => Err(Error::NoCompactDomain(
                "function has no compact support box".into(),
            )),
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        matches!(self.support(), SupportInfo::Empty)
    }

    /// Tighten per-axis constraints against this function's support.
    ///
    /// `fixed[i]` is an externally known interval for axis `i` (`None` = no
    /// prior bound). Diagonal factors move information between the two
    /// halves of their axis block: once x_i is bounded, x_i + y_i in supp
    /// bounds y_i. Returns a finite box covering supp intersected with the
    /// constraints, where an inverted axis (lo > hi) signals an empty
    /// intersection; `None` means some axis cannot be bounded at all.
    pub fn inferred_box(&self, fixed: &[Option<(f64, f64)>]) -> Option<Vec<(f64, f64)>> {
        debug_assert_eq!(fixed.len(), self.dim());
        let mut cur = fixed.to_vec();
        // Each pass moves information across at most one former level, so a
        // few passes reach the fixpoint for any nesting the formers build.
        for _ in 0..4 {
            let next = self.refine_constraints(&cur);
            if next == cur {
                break;
            }
            cur = next;
        }
        cur.into_iter().collect()
    }

    fn refine_constraints(&self, cur: &[Option<(f64, f64)>]) -> Vec<Option<(f64, f64)>> {
        fn meet(a: Option<(f64, f64)>, b: (f64, f64)) -> Option<(f64, f64)> {
            Some(match a {
                None => b,
                Some((l, h)) => (l.max(b.0), h.min(b.1)),
            })
        }
        const EMPTY: (f64, f64) = (0.0, -1.0);
        match self {
            Func::Elem(e) => {
                let mut out = cur.to_vec();
                match e.support_box() {
                    Some(bx) => {
                        for (slot, b) in out.iter_mut().zip(bx) {
                            *slot = meet(*slot, b);
                        }
                    }
                    None => out.iter_mut().for_each(|s| *s = Some(EMPTY)),
                }
                out
            }
            Func::Diag(e) => {
                let mut out = cur.to_vec();
                let d = e.dim();
                match e.support_box() {
                    Some(bx) => {
                        for (i, (lo, hi)) in bx.iter().enumerate() {
                            if let Some((xl, xh)) = out[i] {
                                out[d + i] = meet(out[d + i], (lo - xh, hi - xl));
                            }
                            if let Some((yl, yh)) = out[d + i] {
                                out[i] = meet(out[i], (lo - yh, hi - yl));
                            }
                        }
                    }
                    None => out.iter_mut().for_each(|s| *s = Some(EMPTY)),
                }
                out
            }
            Func::Prod(fs) => {
                let mut out = cur.to_vec();
                for f in fs {
                    out = f.refine_constraints(&out);
                }
                out
            }
            Func::Sum(fs) => {
                // Union hull over the branches that survive the constraints,
                // then meet the hull back into the incoming intervals.
                let mut hull: Vec<Option<(f64, f64)>> = Vec::new();
                let mut any_branch = false;
                for (c, f) in fs {
                    if c.norm() == 0.0 {
                        continue;
                    }
                    let b = f.refine_constraints(cur);
                    if b.iter().any(|s| matches!(s, Some((l, h)) if l > h)) {
                        continue;
                    }
                    if !any_branch {
                        hull = b;
                        any_branch = true;
                    } else {
                        for (slot, nb) in hull.iter_mut().zip(b) {
                            *slot = match (*slot, nb) {
                                (Some((al, ah)), Some((bl, bh))) => {
                                    Some((al.min(bl), ah.max(bh)))
                                }
                                _ => None,
                            };
                        }
                    }
                }
                if !any_branch {
                    return vec![Some(EMPTY); cur.len()];
                }
                cur.iter()
                    .zip(hull)
                    .map(|(c, h)| match (*c, h) {
                        (Some(ci), Some(hi)) => Some((ci.0.max(hi.0), ci.1.min(hi.1))),
                        (Some(ci), None) => Some(ci),
                        (None, other) => other,
                    })
                    .collect()
            }
        }
    }

    /// Exact partial along one axis (plain d/dx_axis).
    pub fn partial_axis(&self, axis: usize) -> Result<Func> {
        let out = match self {
            Func::Elem(e) => Func::Elem(e.partial_axis(axis)?),
            Func::Diag(e) => {
                let d = e.dim();
                let inner = if axis < d { axis } else { axis - d };
                Func::Diag(e.partial_axis(inner)?)
            }
            Func::Prod(fs) => {
                let mut branches = Vec::with_capacity(fs.len());
                for i in 0..fs.len() {
                    let mut factors = fs.clone();
                    factors[i] = fs[i].partial_axis(axis)?;
                    branches.push((C64::new(1.0, 0.0), Func::Prod(factors)));
                }
                Func::Sum(branches)
            }
            Func::Sum(fs) => {
                let mut out = Vec::with_capacity(fs.len());
                for (c, f) in fs {
                    out.push((*c, f.partial_axis(axis)?));
                }
                Func::Sum(out)
            }
        };
        Ok(out.simplified())
    }

    /// Exact partial for a multi-index. Products expand by the Leibniz rule
    /// with collected terms (one branch per split, not per differentiation
    /// path), so high orders stay polynomial in |k|.
    pub fn partial(&self, k: &[u32]) -> Result<Func> {
        debug_assert_eq!(k.len(), self.dim());
        if crate::mindex::abs(k) == 0 {
            return Ok(self.clone());
        }
        let out = match self {
            Func::Elem(e) => Func::Elem(e.partial(k)?),
            Func::Diag(e) => {
                let d = e.dim();
                let inner: Vec<u32> = (0..d).map(|i| k[i] + k[d + i]).collect();
                Func::Diag(e.partial(&inner)?)
            }
            Func::Sum(fs) => {
                let mut out = Vec::with_capacity(fs.len());
                for (c, f) in fs {
                    out.push((*c, f.partial(k)?));
                }
                Func::Sum(out)
            }
            Func::Prod(fs) => match fs.len() {
                0 => {
                    return Err(Error::UnsupportedCombination(
                        "cannot differentiate an empty product".into(),
                    ))
                }
                1 => fs[0].partial(k)?,
                _ => {
                    let head = &fs[0];
                    let rest = if fs.len() == 2 {
                        fs[1].clone()
                    } else {
                        Func::Prod(fs[1..].to_vec())
                    };
                    let mut branches = Vec::new();
                    for j in crate::mindex::below(k) {
                        let c = crate::mindex::binom(k, &j);
                        let da = head.partial(&j)?;
                        let db = rest.partial(&crate::mindex::sub(k, &j).expect("j <= k"))?;
                        branches.push((C64::new(c, 0.0), Func::Prod(vec![da, db])));
                    }
                    Func::Sum(branches)
                }
            },
        };
        Ok(out.simplified())
    }

    /// Derivative in the complex convention: (1/i)^{|k|} D^k.
    pub fn differentiate(&self, k: &[u32]) -> Result<Func> {
        let p = self.partial(k)?;
        Ok(p.scale(inv_i_pow(crate::mindex::abs(k))))
    }

    pub fn scale(&self, c: C64) -> Func {
        if c.norm() == 0.0 {
            return Func::zero(self.dim());
        }
        match self {
            Func::Elem(e) => Func::Elem(e.scale(c)),
            Func::Sum(fs) => Func::Sum(fs.iter().map(|(a, f)| (*a * c, f.clone())).collect()),
            other => Func::Sum(vec![(c, other.clone())]),
        }
    }

    /// Pointwise product with structural fast paths: separable products
    /// merge into a single element, a plateau acting as the constant 1 on
    /// the partner's support disappears, and disjoint supports give zero.
    pub fn prod(a: Func, b: Func) -> Func {
        Func::Prod(vec![a, b]).simplified()
    }

    pub fn sum(parts: Vec<(C64, Func)>) -> Func {
        Func::Sum(parts).simplified()
    }

    /// Structural cleanup: flattens nested sums/products, drops zero
    /// branches, merges separable element products, and removes plateau
    /// factors that are identically 1 on the rest of the product's support.
    pub fn simplified(self) -> Func {
        let dim = self.dim();
        match self {
            Func::Sum(fs) => {
                let mut flat: Vec<(C64, Func)> = Vec::new();
                for (c, f) in fs {
                    if c.norm() == 0.0 {
                        continue;
                    }
                    let f = f.simplified();
                    match f {
                        Func::Sum(inner) => {
                            for (ci, fi) in inner {
                                if !fi.is_identically_zero() {
                                    flat.push((c * ci, fi));
                                }
                            }
                        }
                        other => {
                            if !other.is_identically_zero() {
                                flat.push((c, other));
                            }
                        }
                    }
                }
                // Merge element branches into a single element when possible.
                let mut merged_elem: Option<Element> = None;
                let mut rest: Vec<(C64, Func)> = Vec::new();
                for (c, f) in flat {
                    match f {
                        Func::Elem(e) => {
                            let scaled = e.scale(c);
                            merged_elem = Some(match merged_elem {
                                None => scaled,
                                Some(acc) => match acc.add(&scaled) {
                                    Ok(s) => s,
                                    Err(_) => {
                                        rest.push((C64::new(1.0, 0.0), Func::Elem(scaled)));
                                        acc
                                    }
                                },
                            });
                        }
                        other => rest.push((c, other)),
                    }
                }
                if let Some(e) = merged_elem {
                    if !e.is_zero() || rest.is_empty() {
                        rest.push((C64::new(1.0, 0.0), Func::Elem(e)));
                    }
                }
                match rest.len() {
                    0 => Func::zero(dim),
                    1 if rest[0].0 == C64::new(1.0, 0.0) => rest.swap_remove(0).1,
                    _ => Func::Sum(rest),
                }
            }
            Func::Prod(fs) => {
                let mut flat: Vec<Func> = Vec::new();
                for f in fs {
                    let f = f.simplified();
                    if f.is_identically_zero() {
                        return Func::zero(dim);
                    }
                    match f {
                        Func::Prod(inner) => flat.extend(inner),
                        other => flat.push(other),
                    }
                }
                if flat.is_empty() {
                    return Func::Prod(flat);
                }
                // Drop plateau-like factors that are 1 on the support of
                // the remaining product.
                let remaining_box = |fs: &[Func], skip: usize| -> Option<Vec<(f64, f64)>> {
                    let mut acc: Option<Vec<(f64, f64)>> = None;
                    for (i, f) in fs.iter().enumerate() {
                        if i == skip {
                            continue;
                        }
                        if let SupportInfo::Bounded(bx) = f.support() {
                            acc = Some(match acc {
                                None => bx,
                                Some(cur) => cur
                                    .iter()
                                    .zip(&bx)
                                    .map(|(a, b)| (a.0.max(b.0), a.1.min(b.1)))
                                    .collect(),
                            });
                        } else {
                            return None;
                        }
                    }
                    acc
                };
                let mut i = 0;
                while i < flat.len() && flat.len() > 1 {
                    let one_box = match &flat[i] {
                        Func::Elem(e) => e.constant_one_box(),
                        _ => None,
                    };
                    let dropped = match (one_box, remaining_box(&flat, i)) {
                        (Some(ones), Some(rest_box)) => {
                            let covered = ones
                                .iter()
                                .zip(&rest_box)
                                .all(|(o, r)| o.0 <= r.0 && r.1 <= o.1);
                            if covered {
                                flat.remove(i);
                                true
                            } else {
                                false
                            }
                        }
                        _ => false,
                    };
                    if !dropped {
                        i += 1;
                    }
                }
                // Merge adjacent separable element factors when the product
                // stays separable.
                let mut out: Vec<Func> = Vec::new();
                for f in flat {
                    if let (Some(Func::Elem(last)), Func::Elem(e)) = (out.last(), &f) {
                        if let Ok(m) = last.mul(e) {
                            let idx = out.len() - 1;
                            out[idx] = Func::Elem(m);
                            continue;
                        }
                    }
                    out.push(f);
                }
                match out.len() {
                    1 => out.swap_remove(0),
                    _ => {
                        let p = Func::Prod(out);
                        if p.is_identically_zero() {
                            Func::zero(dim)
                        } else {
                            p
                        }
                    }
                }
            }
            other => other,
        }
    }

    pub fn as_element(&self) -> Option<&Element> {
        match self {
            Func::Elem(e) => Some(e),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump1(c: f64, r: f64) -> Element {
        Element::standard_bump(&[c], &[r]).unwrap()
    }

    #[test]
    fn diagonal_composition_restricts_to_the_original() {
        let phi = bump1(0.0, 1.0);
        let f = Func::Diag(phi.clone());
        for &x in &[-0.8, -0.2, 0.0, 0.5] {
            assert_eq!(f.eval(&[x, 0.0]), phi.eval(&[x]));
            assert_eq!(f.eval(&[0.0, x]), phi.eval(&[x]));
            assert_eq!(f.eval(&[x / 2.0, x / 2.0]), phi.eval(&[x]));
        }
    }

    #[test]
    fn diagonal_partials_agree_between_both_variables() {
        let phi = bump1(0.0, 1.0);
        let f = Func::Diag(phi);
        let dx = f.partial(&[1, 0]).unwrap();
        let dy = f.partial(&[0, 1]).unwrap();
        for &p in &[[0.3, 0.1], [-0.5, 0.2], [0.0, 0.0]] {
            assert_eq!(dx.eval(&p), dy.eval(&p));
        }
    }

    #[test]
    fn product_rule_matches_structural_product() {
        // aligned case: structural merge and tree product must agree
        let a = bump1(0.0, 1.0);
        let b = bump1(0.0, 1.0);
        let merged = Func::prod(Func::Elem(a.clone()), Func::Elem(b.clone()));
        assert!(matches!(merged, Func::Elem(_)));
        let tree = Func::Prod(vec![Func::Elem(a.clone()), Func::Elem(b.clone())]);
        let d_merged = merged.partial(&[1]).unwrap();
        let d_tree = tree.partial(&[1]).unwrap();
        for &x in &[-0.6, 0.0, 0.4, 0.9] {
            let u = d_merged.eval(&[x]);
            let v = d_tree.eval(&[x]);
            assert!((u - v).norm() < 1e-13 * (1.0 + u.norm()), "x={x}");
        }
    }

    #[test]
    fn plateau_times_inner_bump_collapses_to_the_bump() {
        let pl = Element::plateau(&[(-3.0, 3.0)], 1.0).unwrap();
        let phi = bump1(0.0, 2.0);
        let p = Func::prod(Func::Elem(pl), Func::Elem(phi.clone()));
        match &p {
            Func::Elem(e) => assert_eq!(e, &phi),
            other => panic!("expected collapse, got {other:?}"),
        }
    }

    #[test]
    fn disjoint_product_is_zero() {
        let a = bump1(0.0, 1.0);
        let b = bump1(10.0, 1.0);
        let p = Func::prod(Func::Elem(a), Func::Elem(b));
        assert!(p.is_identically_zero());
    }

    #[test]
    fn unaligned_product_keeps_a_wrapper_and_differentiates_by_leibniz() {
        let a = bump1(0.0, 1.0);
        let b = bump1(0.5, 1.0);
        let p = Func::prod(Func::Elem(a.clone()), Func::Elem(b.clone()));
        assert!(matches!(p, Func::Prod(_)));
        let dp = p.partial(&[1]).unwrap();
        let h = 1e-5;
        for &x in &[0.1, 0.4, 0.8] {
            let fd = (p.eval(&[x + h]).re - p.eval(&[x - h]).re) / (2.0 * h);
            let ex = dp.eval(&[x]).re;
            assert!((fd - ex).abs() < 1e-7 * (1.0 + ex.abs()), "x={x}");
        }
    }

    #[test]
    fn product_with_diagonal_has_the_compact_factor_box() {
        let pl = Element::plateau(&[(-2.0, 2.0), (-2.0, 2.0)], 1.0).unwrap();
        let phi = bump1(0.0, 1.0);
        let p = Func::prod(Func::Elem(pl), Func::Diag(phi));
        match p.support() {
            SupportInfo::Bounded(bx) => {
                assert_eq!(bx, vec![(-3.0, 3.0), (-3.0, 3.0)]);
            }
            other => panic!("expected bounded support, got {other:?}"),
        }
    }

    #[test]
    fn strip_inference_bounds_the_free_half_from_the_fixed_half() {
        let phi = bump1(0.0, 2.0);
        let diag = Func::Diag(phi);
        // x restricted to [-1, 1], x + y in [-2, 2] forces y into [-3, 3]
        let bx = diag
            .inferred_box(&[Some((-1.0, 1.0)), None])
            .expect("strip should bound y once x is known");
        assert_eq!(bx[0], (-1.0, 1.0));
        assert_eq!(bx[1], (-3.0, 3.0));
        // with neither half constrained, nothing bounds the strip
        assert!(diag.inferred_box(&[None, None]).is_none());
        // a compact product factor supplies the missing bounds on its own
        let window = Func::Elem(Element::plateau(&[(-4.0, 4.0), (-4.0, 4.0)], 1.0).unwrap());
        let prod = Func::Prod(vec![window, diag]);
        let bx = prod.inferred_box(&[None, None]).expect("bounded via window");
        assert_eq!(bx[0], (-5.0, 5.0));
        assert_eq!(bx[1], (-5.0, 5.0));
    }
}
