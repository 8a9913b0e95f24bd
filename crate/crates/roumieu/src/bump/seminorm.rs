//! Weighted derivative seminorms over the closed algebra.
//!
//! A seminorm here is a supremum over derivative orders |k| <= K_max and
//! over points x of |D^k phi(x)| divided by an order-dependent denominator.
//! Two denominator families are supported: geometric h^{|k|} M_{|k|} and
//! running-product R_{|k|} M_{|k|}, each optionally restricted to a compact
//! box or weighted by a fixed envelope function. Derivatives come from the
//! exact algebra (no finite differences); the spatial sup uses per-term
//! grids refined by coordinate-cyclic golden sections, so results are
//! deterministic.

use std::collections::HashMap;

use serde::Serialize;

use crate::bump::element::Element;
use crate::bump::func::{Func, SupportInfo};
use crate::error::{Error, Result};
use crate::exec::{self, Parallelism};
use crate::mindex;
use crate::poly::Poly1;
use crate::rclass::{ProductSequence, RSequence};
use crate::weights::WeightSequence;
use crate::C64;

/// Default derivative-order truncation for seminorm sups.
pub const DEFAULT_K_MAX: u32 = 16;
/// Hard lower bound on the truncation order.
pub const MIN_K_MAX: u32 = 8;
/// Spatial refinement target for the golden-section polish.
const GOLDEN_TOL: f64 = 1e-10;
/// Golden ratio step for the section search.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Envelope multiplier for weighted seminorms: either an algebra element or
/// a separable polynomial (one factor per axis).
#[derive(Debug, Clone, PartialEq)]
pub enum Weight {
    Element(Element),
    PolyEnvelope(Vec<Poly1>),
}

impl Weight {
    pub fn eval_abs(&self, x: &[f64]) -> f64 {
        match self {
            Weight::Element(e) => e.eval(x).norm(),
            Weight::PolyEnvelope(ps) => ps
                .iter()
                .zip(x)
                .map(|(p, &xi)| p.eval(xi))
                .product::<f64>()
                .abs(),
        }
    }

    fn dim(&self) -> usize {
        match self {
            Weight::Element(e) => e.dim(),
            Weight::PolyEnvelope(ps) => ps.len(),
        }
    }
}

/// The seminorm family: which denominator and which spatial domain.
#[derive(Debug, Clone)]
pub enum SeminormKind {
    /// sup_k sup_{x in K} |D^k phi(x)| / (h^{|k|} M_{|k|}).
    GeometricOnBox { h: f64, region: Vec<(f64, f64)> },
    /// sup_k ||D^k phi||_inf / (h^{|k|} M_{|k|}).
    Geometric { h: f64 },
    /// sup_k sup_{x in K} |D^k phi(x)| / (R_{|k|} M_{|k|}).
    SequenceOnBox {
        r: RSequence,
        region: Vec<(f64, f64)>,
    },
    /// sup_k ||D^k phi||_inf / (R_{|k|} M_{|k|}).
    Sequence { r: RSequence },
    /// sup_k sup_x |g(x) D^k phi(x)| / (R_{|k|} M_{|k|}).
    SequenceWeighted { r: RSequence, weight: Weight },
}

/// Full parameter set: the kind, the weight table M, and the truncation.
#[derive(Debug, Clone)]
pub struct SeminormParams {
    pub kind: SeminormKind,
    pub weights: WeightSequence,
    pub k_max: u32,
    pub parallelism: Parallelism,
    /// product table R, precomputed for the sequence kinds
    product: Option<ProductSequence>,
}

impl SeminormParams {
    pub fn new(kind: SeminormKind, weights: WeightSequence, k_max: u32) -> Result<Self> {
        if k_max < MIN_K_MAX {
            return Err(Error::SeminormParams(format!(
                "truncation order must be at least {MIN_K_MAX}, got {k_max}"
            )));
        }
        if (weights.n() as u32) < k_max {
            return Err(Error::SeminormParams(format!(
                "weight table stores orders up to {}, need {k_max}",
                weights.n()
            )));
        }
        let product = match &kind {
            SeminormKind::GeometricOnBox { h, region } => {
                check_h(*h)?;
                check_region(region)?;
                None
            }
            SeminormKind::Geometric { h } => {
                check_h(*h)?;
                None
            }
            SeminormKind::SequenceOnBox { r, region } => {
                check_region(region)?;
                Some(check_r(r, k_max)?)
            }
            SeminormKind::Sequence { r } => Some(check_r(r, k_max)?),
            SeminormKind::SequenceWeighted { r, .. } => Some(check_r(r, k_max)?),
        };
        Ok(SeminormParams {
            kind,
            weights,
            k_max,
            parallelism: Parallelism::Auto,
            product,
        })
    }

    /// Geometric global-sup seminorm with the default Gevrey-2 table.
    pub fn geometric(h: f64, k_max: u32) -> Result<Self> {
        let weights = WeightSequence::gevrey(2.0, (k_max as usize).max(16))?;
        Self::new(SeminormKind::Geometric { h }, weights, k_max)
    }

    /// Sequence global-sup seminorm with the default Gevrey-2 table.
    pub fn sequence(r: RSequence, k_max: u32) -> Result<Self> {
        let weights = WeightSequence::gevrey(2.0, (k_max as usize).max(16))?;
        Self::new(SeminormKind::Sequence { r }, weights, k_max)
    }

    fn region(&self) -> Option<&[(f64, f64)]> {
        match &self.kind {
            SeminormKind::GeometricOnBox { region, .. }
            | SeminormKind::SequenceOnBox { region, .. } => Some(region),
            _ => None,
        }
    }

    fn weight(&self) -> Option<&Weight> {
        match &self.kind {
            SeminormKind::SequenceWeighted { weight, .. } => Some(weight),
            _ => None,
        }
    }

    /// log of the order-j denominator.
    fn log_denominator(&self, j: u32) -> f64 {
        let log_m = self.weights.log_m(j as usize);
        match &self.kind {
            SeminormKind::GeometricOnBox { h, .. } | SeminormKind::Geometric { h } => {
                j as f64 * h.ln() + log_m
            }
            _ => {
                let p = self.product.as_ref().expect("sequence kind has product");
                p.log_r(j as usize) + log_m
            }
        }
    }
}

fn check_h(h: f64) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::SeminormParams(format!(
            "geometric factor must be positive and finite, got {h}"
        )));
    }
    Ok(())
}

fn check_region(region: &[(f64, f64)]) -> Result<()> {
    if region.is_empty() {
        return Err(Error::SeminormParams("empty region".into()));
    }
    for &(lo, hi) in region {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::SeminormParams(format!(
                "region axis must be a finite interval, got ({lo}, {hi})"
            )));
        }
    }
    Ok(())
}

fn check_r(r: &RSequence, k_max: u32) -> Result<ProductSequence> {
    if (r.n() as u32) < k_max {
        return Err(Error::SeminormParams(format!(
            "sequence stores indices up to {}, need {k_max}",
            r.n()
        )));
    }
    Ok(r.product_sequence())
}

/// Outcome of a seminorm computation.
#[derive(Debug, Clone, Serialize)]
pub struct SeminormReport {
    pub value: f64,
    /// multi-index achieving the sup
    pub achieved_k: Vec<u32>,
    /// point achieving the sup
    pub achieved_x: Vec<f64>,
    /// true when the achieving order sits strictly inside the truncation
    pub stabilized: bool,
    pub k_max: u32,
    /// best weighted value at each derivative order 0..=k_max
    pub per_order: Vec<f64>,
}

/// Table of exact partial derivatives of a function object up to a total
/// order, indexed by multi-index. Built once per sweep so product-rule
/// expansions are shared instead of recomputed per index.
pub struct DerivativeTable {
    dim: usize,
    entries: HashMap<Vec<u32>, Func>,
}

impl DerivativeTable {
    pub fn build(f: &Func, k_max: u32) -> Result<DerivativeTable> {
        let dim = f.dim();
        let mut entries: HashMap<Vec<u32>, Func> = HashMap::new();
        match f {
            Func::Elem(e) => {
                let mut prev: HashMap<Vec<u32>, Element> = HashMap::new();
                prev.insert(mindex::zeros(dim), e.clone());
                entries.insert(mindex::zeros(dim), Func::Elem(e.clone()));
                for order in 1..=k_max {
                    let mut cur: HashMap<Vec<u32>, Element> = HashMap::new();
                    for k in mindex::of_degree(dim, order) {
                        let axis = k.iter().position(|&v| v > 0).expect("positive order");
                        let mut pred = k.clone();
                        pred[axis] -= 1;
                        let d = prev[&pred].partial_axis(axis)?;
                        entries.insert(k.clone(), Func::Elem(d.clone()));
                        cur.insert(k, d);
                    }
                    prev = cur;
                }
            }
            Func::Diag(e) => {
                let din = e.dim();
                let inner = DerivativeTable::build(&Func::Elem(e.clone()), k_max)?;
                for k in mindex::graded(dim, k_max) {
                    let kin: Vec<u32> = (0..din).map(|i| k[i] + k[din + i]).collect();
                    let de = inner.entries[&kin]
                        .as_element()
                        .expect("element table stores elements")
                        .clone();
                    entries.insert(k, Func::Diag(de));
                }
            }
            Func::Sum(parts) => {
                let mut tables = Vec::with_capacity(parts.len());
                for (c, g) in parts {
                    tables.push((*c, DerivativeTable::build(g, k_max)?));
                }
                for k in mindex::graded(dim, k_max) {
                    let branches: Vec<(C64, Func)> = tables
                        .iter()
                        .map(|(c, t)| (*c, t.entries[&k].clone()))
                        .collect();
                    entries.insert(k, Func::Sum(branches).simplified());
                }
            }
            Func::Prod(fs) => match fs.len() {
                0 => {
                    return Err(Error::UnsupportedCombination(
                        "cannot differentiate an empty product".into(),
                    ))
                }
                1 => return DerivativeTable::build(&fs[0], k_max),
                _ => {
                    let head = DerivativeTable::build(&fs[0], k_max)?;
                    let rest = if fs.len() == 2 {
                        DerivativeTable::build(&fs[1], k_max)?
                    } else {
                        DerivativeTable::build(&Func::Prod(fs[1..].to_vec()), k_max)?
                    };
                    for k in mindex::graded(dim, k_max) {
                        let mut branches: Vec<(C64, Func)> = Vec::new();
                        for j in mindex::below(&k) {
                            let c = mindex::binom(&k, &j);
                            let a = head.entries[&j].clone();
                            let b = rest.entries[&mindex::sub(&k, &j).expect("j <= k")].clone();
                            branches.push((C64::new(c, 0.0), Func::Prod(vec![a, b])));
                        }
                        entries.insert(k, Func::Sum(branches).simplified());
                    }
                }
            },
        }
        Ok(DerivativeTable { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, k: &[u32]) -> Option<&Func> {
        self.entries.get(k)
    }
}

/// Location and value of a spatial supremum.
#[derive(Debug, Clone)]
pub struct SupResult {
    pub value: f64,
    pub x: Vec<f64>,
}

fn grid_points_per_axis(dim: usize) -> usize {
    match dim {
        0 | 1 => 512,
        2 => 128,
        _ => 24,
    }
}

/// Candidate sample boxes covering the support of `f`. The bool is false
/// when the support is not contained in any box.
fn candidate_boxes(f: &Func) -> (Vec<Vec<(f64, f64)>>, bool) {
    match f {
        Func::Elem(e) => (e.term_boxes(), true),
        Func::Diag(_) => (Vec::new(), false),
        Func::Prod(fs) => {
            let overall = match f.support() {
                SupportInfo::Empty => return (Vec::new(), true),
                SupportInfo::Unbounded => return (Vec::new(), false),
                SupportInfo::Bounded(bx) => bx,
            };
            let mut out = Vec::new();
            for g in fs {
                let (boxes, bounded) = candidate_boxes(g);
                if !bounded {
                    continue;
                }
                for bx in boxes {
                    if let Some(cut) = intersect(&bx, &overall) {
                        out.push(cut);
                    }
                }
            }
            if out.is_empty() {
                out.push(overall);
            }
            (out, true)
        }
        Func::Sum(parts) => {
            let mut out = Vec::new();
            let mut all_bounded = true;
            for (c, g) in parts {
                if c.norm() == 0.0 {
                    continue;
                }
                let (boxes, bounded) = candidate_boxes(g);
                all_bounded &= bounded;
                out.extend(boxes);
            }
            (out, all_bounded)
        }
    }
}

fn intersect(a: &[(f64, f64)], b: &[(f64, f64)]) -> Option<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(a.len());
    for (x, y) in a.iter().zip(b) {
        let lo = x.0.max(y.0);
        let hi = x.1.min(y.1);
        if !(lo < hi) {
            return None;
        }
        out.push((lo, hi));
    }
    Some(out)
}

/// Supremum of |f| (times |weight| when given) over its support, or over
/// `region` when supplied. Dense per-term grids seed a coordinate-cyclic
/// golden-section polish; fully deterministic.
pub fn sup_abs(
    f: &Func,
    region: Option<&[(f64, f64)]>,
    weight: Option<&Weight>,
    par: Parallelism,
) -> Result<SupResult> {
    // A bare diagonal composition has unbounded support, but its global sup
    // equals the inner sup along the slice y = 0.
    if let (Func::Diag(e), None) = (f, region) {
        let inner = sup_abs(&Func::Elem(e.clone()), None, None, par)?;
        if weight.is_some() {
            return Err(Error::NoCompactDomain(
                "weighted sup over an unbounded diagonal strip".into(),
            ));
        }
        let d = e.dim();
        let mut x = inner.x.clone();
        x.extend(std::iter::repeat(0.0).take(d));
        return Ok(SupResult {
            value: inner.value,
            x,
        });
    }

    let dim = f.dim();
    let (mut boxes, bounded) = candidate_boxes(f);
    match region {
        Some(reg) => {
            if reg.len() != dim {
                return Err(Error::SeminormParams(format!(
                    "region dimension {} does not match function dimension {dim}",
                    reg.len()
                )));
            }
            if bounded {
                boxes = boxes.iter().filter_map(|bx| intersect(bx, reg)).collect();
            } else {
                boxes = vec![reg.to_vec()];
            }
        }
        None => {
            if !bounded {
                return Err(Error::NoCompactDomain(
                    "global sup of a function without compact support".into(),
                ));
            }
        }
    }
    boxes.retain(|bx| bx.iter().all(|&(lo, hi)| lo < hi && lo.is_finite() && hi.is_finite()));
    boxes.sort_by(|a, b| a.partial_cmp(b).expect("finite box bounds"));
    boxes.dedup();

    let fallback_x = match region {
        Some(reg) => reg.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect(),
        None => vec![0.0; dim],
    };
    if boxes.is_empty() {
        return Ok(SupResult {
            value: 0.0,
            x: fallback_x,
        });
    }

    let n = grid_points_per_axis(dim);
    let target = |x: &[f64]| -> f64 {
        let v = f.eval(x).norm();
        match weight {
            Some(w) => v * w.eval_abs(x),
            None => v,
        }
    };

    let per_box: Vec<SupResult> = exec::map_collect(
        &boxes,
        |bx| {
            let mut best = SupResult {
                value: -1.0,
                x: vec![0.0; dim],
            };
            let total = n.pow(dim as u32);
            let mut x = vec![0.0; dim];
            for idx in 0..total {
                let mut rem = idx;
                for (axis, &(lo, hi)) in bx.iter().enumerate() {
                    let j = rem % n;
                    rem /= n;
                    x[axis] = lo + (hi - lo) * (j as f64) / ((n - 1) as f64);
                }
                let v = target(&x);
                if v > best.value {
                    best.value = v;
                    best.x.copy_from_slice(&x);
                }
            }
            let spacing: Vec<f64> = bx
                .iter()
                .map(|&(lo, hi)| (hi - lo) / ((n - 1) as f64))
                .collect();
            golden_refine(&target, bx, &spacing, &mut best);
            best
        },
        par,
    );

    let mut best = SupResult {
        value: 0.0,
        x: fallback_x,
    };
    for r in per_box {
        if r.value > best.value {
            best = r;
        }
    }
    Ok(best)
}

/// Coordinate-cyclic golden-section polish of a grid maximum.
pub(crate) fn golden_refine(
    target: &dyn Fn(&[f64]) -> f64,
    bx: &[(f64, f64)],
    spacing: &[f64],
    best: &mut SupResult,
) {
    let dim = bx.len();
    for _cycle in 0..3 {
        for axis in 0..dim {
            let mut lo = (best.x[axis] - spacing[axis]).max(bx[axis].0);
            let mut hi = (best.x[axis] + spacing[axis]).min(bx[axis].1);
            if !(lo < hi) {
                continue;
            }
            let mut x = best.x.clone();
            let mut slice = |t: f64| -> f64 {
                x[axis] = t;
                target(&x)
            };
            let mut a = hi - INV_PHI * (hi - lo);
            let mut b = lo + INV_PHI * (hi - lo);
            let mut fa = slice(a);
            let mut fb = slice(b);
            let mut iter = 0;
            while hi - lo > GOLDEN_TOL * (1.0 + best.x[axis].abs()) && iter < 90 {
                if fa < fb {
                    lo = a;
                    a = b;
                    fa = fb;
                    b = lo + INV_PHI * (hi - lo);
                    fb = slice(b);
                } else {
                    hi = b;
                    b = a;
                    fb = fa;
                    a = hi - INV_PHI * (hi - lo);
                    fa = slice(a);
                }
                iter += 1;
            }
            let mid = 0.5 * (lo + hi);
            let fm = slice(mid);
            let (vx, vv) = if fa >= fb && fa >= fm {
                (a, fa)
            } else if fb >= fa && fb >= fm {
                (b, fb)
            } else {
                (mid, fm)
            };
            if vv > best.value {
                best.value = vv;
                best.x[axis] = vx;
            }
        }
    }
}

/// Computes the seminorm of a function object: the sup over |k| <= K_max
/// and over x of the kind's weighted derivative magnitude. The report
/// carries the achieving index and point plus a stabilization flag (false
/// when the sup is still attained at the truncation order).
pub fn seminorm(phi: &Func, params: &SeminormParams) -> Result<SeminormReport> {
    let dim = phi.dim();
    if let Some(w) = params.weight() {
        if w.dim() != dim {
            return Err(Error::SeminormParams(format!(
                "weight dimension {} does not match function dimension {dim}",
                w.dim()
            )));
        }
    }
    if let Some(reg) = params.region() {
        if reg.len() != dim {
            return Err(Error::SeminormParams(format!(
                "region dimension {} does not match function dimension {dim}",
                reg.len()
            )));
        }
    }
    let table = DerivativeTable::build(phi, params.k_max)?;
    let mut report = SeminormReport {
        value: 0.0,
        achieved_k: mindex::zeros(dim),
        achieved_x: vec![0.0; dim],
        stabilized: true,
        k_max: params.k_max,
        per_order: Vec::with_capacity(params.k_max as usize + 1),
    };
    for order in 0..=params.k_max {
        let log_den = params.log_denominator(order);
        let mut order_best = 0.0f64;
        for k in mindex::of_degree(dim, order) {
            let dk = table.get(&k).expect("table covers all orders");
            let sup = sup_abs(dk, params.region(), params.weight(), params.parallelism)?;
            let weighted = if sup.value > 0.0 {
                (sup.value.ln() - log_den).exp()
            } else {
                0.0
            };
            order_best = order_best.max(weighted);
            if weighted > report.value {
                report.value = weighted;
                report.achieved_k = k.clone();
                report.achieved_x = sup.x.clone();
            }
        }
        report.per_order.push(order_best);
    }
    report.stabilized = mindex::abs(&report.achieved_k) < params.k_max;
    Ok(report)
}

/// Report for the submultiplicativity check of products under halved
/// sequences.
#[derive(Debug, Clone, Serialize)]
pub struct ProductSeminormReport {
    pub left: f64,
    pub right_first: f64,
    pub right_second: f64,
    pub holds: bool,
    pub k_max: u32,
}

/// Checks ||phi1 phi2||_(r) <= ||phi1||_(r/2) ||phi2||_(r/2) at matched
/// truncation. Requires r_1 > 2 so the halved sequence stays in class.
pub fn check_product_seminorm(
    phi1: &Element,
    phi2: &Element,
    r: &RSequence,
    weights: &WeightSequence,
    k_max: u32,
) -> Result<ProductSeminormReport> {
    if !(r.r(1) > 2.0) {
        return Err(Error::ClassViolation(format!(
            "halved sequence needs r_1 > 2, got r_1 = {}",
            r.r(1)
        )));
    }
    let half = r.scale_lambda(0.5)?;
    let full_params = SeminormParams::new(
        SeminormKind::Sequence { r: r.clone() },
        weights.clone(),
        k_max,
    )?;
    let half_params = SeminormParams::new(
        SeminormKind::Sequence { r: half },
        weights.clone(),
        k_max,
    )?;
    let product = Func::prod(Func::Elem(phi1.clone()), Func::Elem(phi2.clone()));
    let left = seminorm(&product, &full_params)?.value;
    let right_first = seminorm(&Func::Elem(phi1.clone()), &half_params)?.value;
    let right_second = seminorm(&Func::Elem(phi2.clone()), &half_params)?.value;
    let rhs = right_first * right_second;
    Ok(ProductSeminormReport {
        left,
        right_first,
        right_second,
        holds: left <= rhs * (1.0 + 1e-9) || (left == 0.0 && rhs == 0.0),
        k_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard() -> Element {
        Element::standard_bump(&[0.0], &[1.0]).unwrap()
    }

    #[test]
    fn zero_function_has_zero_seminorm_for_every_kind() {
        let zero = Func::Elem(Element::zero(1));
        let r = RSequence::linear(32).unwrap();
        let w = WeightSequence::gevrey(2.0, 16).unwrap();
        let kinds = vec![
            SeminormKind::Geometric { h: 1.0 },
            SeminormKind::GeometricOnBox {
                h: 1.0,
                region: vec![(-1.0, 1.0)],
            },
            SeminormKind::Sequence { r: r.clone() },
            SeminormKind::SequenceOnBox {
                r: r.clone(),
                region: vec![(-1.0, 1.0)],
            },
            SeminormKind::SequenceWeighted {
                r,
                weight: Weight::PolyEnvelope(vec![Poly1::constant(1.0)]),
            },
        ];
        for kind in kinds {
            let p = SeminormParams::new(kind, w.clone(), 8).unwrap();
            let rep = seminorm(&zero, &p).unwrap();
            assert_eq!(rep.value, 0.0);
        }
    }

    #[test]
    fn order_zero_sup_of_standard_bump_is_at_center() {
        let phi = Func::Elem(standard());
        let p = SeminormParams::geometric(1.0, 8).unwrap();
        let rep = seminorm(&phi, &p).unwrap();
        assert!(rep.per_order[0] >= (-1.0f64).exp() - 1e-12);
        assert!(rep.value >= rep.per_order[0]);
    }

    #[test]
    fn dilation_does_not_increase_the_sequence_seminorm() {
        let phi = standard();
        let wide = phi.dilate(3.0).unwrap();
        let r = RSequence::linear(32).unwrap();
        let p = SeminormParams::sequence(r, 10).unwrap();
        let v_orig = seminorm(&Func::Elem(phi), &p).unwrap().value;
        let v_wide = seminorm(&Func::Elem(wide), &p).unwrap().value;
        assert!(
            v_wide <= v_orig * (1.0 + 1e-9),
            "wide {v_wide} vs orig {v_orig}"
        );
    }

    #[test]
    fn seminorm_is_monotone_in_truncation_order() {
        let phi = Func::Elem(standard());
        let r = RSequence::linear(40).unwrap();
        let w = WeightSequence::gevrey(2.0, 40).unwrap();
        let mut last = 0.0f64;
        for k_max in [8u32, 12, 16] {
            let p = SeminormParams::new(
                SeminormKind::Sequence { r: r.clone() },
                w.clone(),
                k_max,
            )
            .unwrap();
            let rep = seminorm(&phi, &p).unwrap();
            assert!(rep.value >= last - 1e-12 * last.abs());
            last = rep.value;
        }
    }

    #[test]
    fn product_seminorm_inequality_holds_for_the_standard_bump() {
        let phi = standard();
        let r = RSequence::explicit(
            &(0..=16)
                .map(|p| if p == 0 { 1.0 } else { 2.5 * p as f64 })
                .collect::<Vec<_>>(),
            true,
        )
        .unwrap();
        let w = WeightSequence::gevrey(2.0, 16).unwrap();
        let rep = check_product_seminorm(&phi, &phi, &r, &w, 12).unwrap();
        assert!(rep.holds, "left {} right {}", rep.left, rep.right_first * rep.right_second);
        assert!(rep.left > 0.0);
    }

    #[test]
    fn product_check_rejects_sequences_without_halving_headroom() {
        let phi = standard();
        let r = RSequence::linear(16).unwrap();
        let w = WeightSequence::gevrey(2.0, 16).unwrap();
        let err = check_product_seminorm(&phi, &phi, &r, &w, 8).unwrap_err();
        assert!(matches!(err, Error::ClassViolation(_)));
    }

    #[test]
    fn plateau_times_bump_has_equal_seminorms() {
        let pl = Element::plateau(&[(-3.0, 3.0)], 1.0).unwrap();
        let phi = standard();
        let prod = Func::prod(Func::Elem(pl), Func::Elem(phi.clone()));
        let p = SeminormParams::geometric(2.0, 8).unwrap();
        let a = seminorm(&prod, &p).unwrap().value;
        let b = seminorm(&Func::Elem(phi), &p).unwrap().value;
        assert_eq!(a, b);
    }

    #[test]
    fn diagonal_composition_keeps_the_global_sup() {
        let phi = standard();
        let diag = Func::Diag(phi.clone());
        let s_inner = sup_abs(&Func::Elem(phi), None, None, Parallelism::Sequential).unwrap();
        let s_diag = sup_abs(&diag, None, None, Parallelism::Sequential).unwrap();
        assert_eq!(s_inner.value, s_diag.value);
    }

    #[test]
    fn params_reject_short_truncation_and_bad_region() {
        let w = WeightSequence::gevrey(2.0, 16).unwrap();
        assert!(SeminormParams::new(SeminormKind::Geometric { h: 1.0 }, w.clone(), 4).is_err());
        assert!(SeminormParams::new(
            SeminormKind::GeometricOnBox {
                h: 1.0,
                region: vec![(2.0, 1.0)],
            },
            w,
            8
        )
        .is_err());
    }

    #[test]
    fn report_marks_unstabilized_sups_at_the_truncation_edge() {
        // Factorial weights make the denominator too weak for the bump's
        // derivative growth, so the sup keeps climbing to the last order.
        let phi = Func::Elem(standard());
        let w = WeightSequence::factorial(16).unwrap();
        let p = SeminormParams::new(SeminormKind::Geometric { h: 1.0 }, w, 8).unwrap();
        let rep = seminorm(&phi, &p).unwrap();
        assert!(!rep.stabilized);
        assert_eq!(mindex::abs(&rep.achieved_k), 8);
    }
}
