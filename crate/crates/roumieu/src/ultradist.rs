//! Concrete ultradistributions and their sequential convolution.
//!
//! A distribution here is a finite sum of three kinds of terms: derivatives
//! of point masses, compactly supported smooth densities from the bump
//! algebra, and polynomial densities (the one deliberately non-compact
//! ingredient). Pairings against point terms are exact; density and
//! polynomial terms integrate by adaptive quadrature over an effective
//! support box inferred from the test object, so a pairing either resolves
//! to a finite box or fails loudly as divergent.
//!
//! Convolvability is probed sequentially: a pairing is repeated along an
//! approximate unit and the resulting scalar sequence is classified as
//! Cauchy or not. Four localization modes are implemented (plane unit on
//! the tensor side, both factors windowed, or one factor windowed), plus
//! the same modes driven by a second, structurally different unit family.
//! Once a window is identically 1 on the effective support the remaining
//! values are equal by construction, so the sweep reuses the stabilized
//! value instead of re-integrating.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::bump::element::{Element, Prim, Term};
use crate::bump::units::{ApproximateUnit, Schedule};
use crate::bump::{seminorm, Func, SeminormParams};
use crate::error::{Error, Result};
use crate::exec::{self, Parallelism};
use crate::poly::Poly1;
use crate::rclass::RSequence;
use crate::{mindex, quad, C64};

/// Default absolute quadrature tolerance for pairings.
pub const TOL_PAIR: f64 = 1e-10;
/// Trailing window length used by the Cauchy classifier.
pub const CAUCHY_WINDOW: usize = 5;
/// The Cauchy tolerance is this factor times max(1, |last value|).
pub const CAUCHY_TOL_SCALE: f64 = 1e-8;
/// A value whose modulus exceeds this factor times (1 + |first value|)
/// marks the sequence as unbounded outright.
pub const UNBOUNDED_FACTOR: f64 = 1e6;
/// Default length of convolvability sequences.
pub const DEFAULT_N_MAX: usize = 20;
/// Default cross-mode agreement tolerance for convolution limits.
pub const TOL_AGREE: f64 = 1e-7;

/// One point-mass term c * D^k delta_a with the pairing convention
/// <D^k delta_a, phi> = (-1)^{|k|} (D^k phi)(a).
#[derive(Debug, Clone, PartialEq)]
pub struct PointTerm {
    pub coef: C64,
    pub order: Vec<u32>,
    pub location: Vec<f64>,
}

/// A polynomial density: coef * prod_i p_i(x_i), supported everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyTerm {
    pub coef: C64,
    pub axes: Vec<Poly1>,
}

/// Finite combination of point masses, compact densities, and polynomial
/// densities on R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct Ultradistribution {
    d: usize,
    point_terms: Vec<PointTerm>,
    density_terms: Vec<Element>,
    poly_terms: Vec<PolyTerm>,
}

impl Ultradistribution {
    pub fn zero(d: usize) -> Self {
        Ultradistribution {
            d,
            point_terms: Vec::new(),
            density_terms: Vec::new(),
            poly_terms: Vec::new(),
        }
    }

    /// The unit point mass at `location`.
    pub fn delta(location: &[f64]) -> Result<Self> {
        Self::zero(location.len()).with_point(C64::new(1.0, 0.0), &vec![0; location.len()], location)
    }

    /// c * D^k delta_a.
    pub fn delta_derivative(coef: C64, order: &[u32], location: &[f64]) -> Result<Self> {
        Self::zero(location.len()).with_point(coef, order, location)
    }

    /// A compactly supported smooth density.
    pub fn density(e: Element) -> Self {
        let mut out = Self::zero(e.dim());
        if !e.is_zero() {
            out.density_terms.push(e);
        }
        out
    }

    /// The constant-one polynomial density.
    pub fn constant_one(d: usize) -> Result<Self> {
        Self::zero(d).with_poly(C64::new(1.0, 0.0), &vec![Poly1::constant(1.0); d])
    }

    pub fn with_point(mut self, coef: C64, order: &[u32], location: &[f64]) -> Result<Self> {
        if order.len() != self.d || location.len() != self.d {
            return Err(Error::OutOfRange(format!(
                "point term needs order and location of length {}, got {} and {}",
                self.d,
                order.len(),
                location.len()
            )));
        }
        if coef.norm() > 0.0 {
            self.point_terms.push(PointTerm {
                coef,
                order: order.to_vec(),
                location: location.to_vec(),
            });
        }
        Ok(self)
    }

    pub fn with_density(mut self, e: Element) -> Result<Self> {
        if e.dim() != self.d {
            return Err(Error::OutOfRange(format!(
                "density has dimension {}, distribution has {}",
                e.dim(),
                self.d
            )));
        }
        if !e.is_zero() {
            self.density_terms.push(e);
        }
        Ok(self)
    }

    pub fn with_poly(mut self, coef: C64, axes: &[Poly1]) -> Result<Self> {
        if axes.len() != self.d {
            return Err(Error::OutOfRange(format!(
                "polynomial density needs {} axis factors, got {}",
                self.d,
                axes.len()
            )));
        }
        if coef.norm() > 0.0 && !axes.iter().any(|p| p.is_zero()) {
            self.poly_terms.push(PolyTerm {
                coef,
                axes: axes.to_vec(),
            });
        }
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn point_terms(&self) -> &[PointTerm] {
        &self.point_terms
    }

    pub fn density_terms(&self) -> &[Element] {
        &self.density_terms
    }

    pub fn poly_terms(&self) -> &[PolyTerm] {
        &self.poly_terms
    }

    pub fn is_zero(&self) -> bool {
        self.point_terms.is_empty() && self.density_terms.is_empty() && self.poly_terms.is_empty()
    }

    /// True when no polynomial density contributes.
    pub fn has_compact_support(&self) -> bool {
        self.poly_terms.is_empty()
    }

    /// Hull of point locations and density boxes; `None` when a polynomial
    /// term makes the support unbounded or when nothing carries support.
    pub fn support_hull(&self) -> Option<Vec<(f64, f64)>> {
        if !self.poly_terms.is_empty() {
            return None;
        }
        let mut hull: Option<Vec<(f64, f64)>> = None;
        let mut meet = |bx: Vec<(f64, f64)>| {
            hull = Some(match hull.take() {
                None => bx,
                Some(cur) => cur
                    .iter()
                    .zip(&bx)
                    .map(|(a, b)| (a.0.min(b.0), a.1.max(b.1)))
                    .collect(),
            });
        };
        for pt in &self.point_terms {
            meet(pt.location.iter().map(|&a| (a, a)).collect());
        }
        for f in &self.density_terms {
            if let Some(bx) = f.support_box() {
                meet(bx);
            }
        }
        hull
    }

    /// Total variation proxy: sum of point coefficient moduli plus L^1
    /// norms of the densities. Polynomial terms have no finite mass.
    pub fn action_mass(&self, tol: f64) -> Result<f64> {
        if !self.poly_terms.is_empty() {
            return Err(Error::UnsupportedCombination(
                "polynomial densities carry infinite mass".into(),
            ));
        }
        let mut mass: f64 = self.point_terms.iter().map(|p| p.coef.norm()).sum();
        for f in &self.density_terms {
            if let Some(bx) = f.support_box() {
                let g = |x: &[f64]| C64::new(f.eval(x).norm(), 0.0);
                mass += quad::adaptive_box(&g, &bx, tol)?.re;
            }
        }
        Ok(mass)
    }
}

/// Borrowed view of one term, shared by the pairing paths.
enum TermRef<'a> {
    Point {
        coef: C64,
        order: &'a [u32],
        location: &'a [f64],
    },
    Density(&'a Element),
    Poly {
        coef: C64,
        axes: &'a [Poly1],
    },
}

struct Side<'a> {
    offset: usize,
    dim: usize,
    term: TermRef<'a>,
}

fn term_refs(u: &Ultradistribution) -> Vec<TermRef<'_>> {
    let mut out = Vec::with_capacity(u.point_terms.len() + u.density_terms.len() + u.poly_terms.len());
    for p in &u.point_terms {
        out.push(TermRef::Point {
            coef: p.coef,
            order: &p.order,
            location: &p.location,
        });
    }
    for f in &u.density_terms {
        out.push(TermRef::Density(f));
    }
    for p in &u.poly_terms {
        out.push(TermRef::Poly {
            coef: p.coef,
            axes: &p.axes,
        });
    }
    out
}

/// Action of a tensor of single terms on `phi`. Point blocks evaluate
/// derivatives exactly; density and polynomial blocks integrate over the
/// inferred effective box.
fn term_action(sides: &[Side<'_>], phi: &Func, tol: f64) -> Result<C64> {
    let zero = C64::new(0.0, 0.0);
    let total = phi.dim();

    let mut k_full = vec![0u32; total];
    let mut coef = C64::new(1.0, 0.0);
    for s in sides {
        match &s.term {
            TermRef::Point { coef: c, order, .. } => {
                for (i, o) in order.iter().enumerate() {
                    k_full[s.offset + i] = *o;
                }
                let sign = if mindex::abs(order) % 2 == 1 { -1.0 } else { 1.0 };
                coef *= *c * sign;
            }
            TermRef::Poly { coef: c, .. } => coef *= *c,
            TermRef::Density(_) => {}
        }
    }
    if coef.norm() == 0.0 {
        return Ok(zero);
    }

    let storage;
    let dphi: &Func = if mindex::abs(&k_full) > 0 {
        storage = phi.differentiate(&k_full)?;
        &storage
    } else {
        phi
    };
    if dphi.is_identically_zero() {
        return Ok(zero);
    }

    let mut fixed: Vec<Option<(f64, f64)>> = vec![None; total];
    for s in sides {
        match &s.term {
            TermRef::Point { location, .. } => {
                for (i, a) in location.iter().enumerate() {
                    fixed[s.offset + i] = Some((*a, *a));
                }
            }
            TermRef::Density(e) => match e.support_box() {
                None => return Ok(zero),
                Some(bx) => {
                    for (i, b) in bx.into_iter().enumerate() {
                        fixed[s.offset + i] = Some(b);
                    }
                }
            },
            TermRef::Poly { .. } => {}
        }
    }
    let domain_full = dphi.inferred_box(&fixed).ok_or_else(|| {
        Error::DivergentPairing("pairing has non-compact effective support".into())
    })?;
    if domain_full.iter().any(|(lo, hi)| lo > hi) {
        return Ok(zero);
    }

    let mut coords = vec![0.0; total];
    let mut integ: Vec<usize> = Vec::new();
    for s in sides {
        match &s.term {
            TermRef::Point { location, .. } => {
                for (i, a) in location.iter().enumerate() {
                    coords[s.offset + i] = *a;
                }
            }
            _ => integ.extend(s.offset..s.offset + s.dim),
        }
    }
    if integ.is_empty() {
        return Ok(coef * dphi.eval(&coords));
    }

    let domain: Vec<(f64, f64)> = integ.iter().map(|&ax| domain_full[ax]).collect();
    // The term coefficient scales the integrand itself, not the finished
    // integral: high-order point terms pair tiny coefficients with huge
    // derivative amplitudes, and the absolute tolerance is only meaningful
    // against the product.
    let integrand = |q: &[f64]| -> C64 {
        let mut x = coords.clone();
        for (v, &ax) in q.iter().zip(&integ) {
            x[ax] = *v;
        }
        let mut w = dphi.eval(&x);
        if w.norm() == 0.0 {
            return w;
        }
        for s in sides {
            match &s.term {
                TermRef::Density(e) => {
                    w *= e.eval(&x[s.offset..s.offset + s.dim]);
                }
                TermRef::Poly { axes, .. } => {
                    for (i, p) in axes.iter().enumerate() {
                        w *= p.eval(x[s.offset + i]);
                    }
                }
                TermRef::Point { .. } => {}
            }
        }
        coef * w
    };
    quad::adaptive_box(&integrand, &domain, tol)
}

/// <T, phi>: exact on point terms, adaptive quadrature on the rest.
pub fn pair(u: &Ultradistribution, phi: &Func, tol: f64) -> Result<C64> {
    if phi.dim() != u.d {
        return Err(Error::OutOfRange(format!(
            "test function has dimension {}, distribution has {}",
            phi.dim(),
            u.d
        )));
    }
    let mut acc = C64::new(0.0, 0.0);
    let terms = term_refs(u);
    // Per-term share so the summed error stays within the caller's budget.
    let tol_term = tol / terms.len().max(1) as f64;
    for term in terms {
        acc += term_action(
            &[Side {
                offset: 0,
                dim: u.d,
                term,
            }],
            phi,
            tol_term,
        )?;
    }
    Ok(acc)
}

/// <S tensor T, Phi> for a test object on R^{d_S + d_T}.
pub fn tensor_pair(
    s: &Ultradistribution,
    t: &Ultradistribution,
    phi: &Func,
    tol: f64,
) -> Result<C64> {
    if phi.dim() != s.d + t.d {
        return Err(Error::OutOfRange(format!(
            "tensor test object has dimension {}, factors give {}",
            phi.dim(),
            s.d + t.d
        )));
    }
    let mut acc = C64::new(0.0, 0.0);
    let s_terms = term_refs(s);
    let t_count = term_refs(t).len();
    // Per-pair share so the summed error stays within the caller's budget.
    let tol_term = tol / (s_terms.len() * t_count).max(1) as f64;
    for st in s_terms {
        let s_side = |term| Side {
            offset: 0,
            dim: s.d,
            term,
        };
        for tt in term_refs(t) {
            let sides = [
                s_side(clone_ref(&st)),
                Side {
                    offset: s.d,
                    dim: t.d,
                    term: tt,
                },
            ];
            acc += term_action(&sides, phi, tol_term)?;
        }
    }
    Ok(acc)
}

fn clone_ref<'a>(t: &TermRef<'a>) -> TermRef<'a> {
    match t {
        TermRef::Point {
            coef,
            order,
            location,
        } => TermRef::Point {
            coef: *coef,
            order,
            location,
        },
        TermRef::Density(e) => TermRef::Density(e),
        TermRef::Poly { coef, axes } => TermRef::Poly {
            coef: *coef,
            axes,
        },
    }
}

/// Multiply by a smooth window from the algebra. Point terms redistribute
/// by the Leibniz rule
/// psi * D^k delta_a = sum_{j <= k} (-1)^{|k-j|} C(k,j) (D^{k-j} psi)(a) D^j delta_a,
/// densities multiply in the algebra, and polynomial terms become compact
/// densities under the window's support.
pub fn multiply(u: &Ultradistribution, window: &Element) -> Result<Ultradistribution> {
    if window.dim() != u.d {
        return Err(Error::OutOfRange(format!(
            "window has dimension {}, distribution has {}",
            window.dim(),
            u.d
        )));
    }
    let mut out = Ultradistribution::zero(u.d);
    for pt in &u.point_terms {
        for j in mindex::below(&pt.order) {
            let diff = mindex::sub(&pt.order, &j).expect("j <= k");
            let dw = if mindex::abs(&diff) == 0 {
                window.eval(&pt.location)
            } else {
                window.differentiate(&diff)?.eval(&pt.location)
            };
            let sign = if mindex::abs(&diff) % 2 == 1 { -1.0 } else { 1.0 };
            let coef = pt.coef * mindex::binom(&pt.order, &j) * sign * dw;
            if coef.norm() > 0.0 {
                out.point_terms.push(PointTerm {
                    coef,
                    order: j,
                    location: pt.location.clone(),
                });
            }
        }
    }
    for f in &u.density_terms {
        let prod = f.mul(window)?;
        if !prod.is_zero() {
            out.density_terms.push(prod);
        }
    }
    for p in &u.poly_terms {
        let mut terms = Vec::with_capacity(window.terms().len());
        for t in window.terms() {
            let mut axes = t.axes.clone();
            for (axis, poly) in p.axes.iter().enumerate() {
                axes[axis].push(Prim::Poly(poly.clone()));
            }
            terms.push(Term {
                coef: t.coef * p.coef,
                axes,
            });
        }
        let e = Element::new(u.d, terms)?;
        if !e.is_zero() {
            out.density_terms.push(e);
        }
    }
    Ok(out)
}

/// Why a scalar sequence failed to stabilize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    /// Crossed the hard modulus threshold, or grew monotonically with
    /// increments that never shrink.
    Unbounded,
    /// Stayed bounded but kept moving within the trailing window.
    Oscillating,
}

/// Cauchy classification of a pairing sequence.
#[derive(Debug, Clone, Serialize)]
pub struct CauchyDiagnostics {
    pub values: Vec<C64>,
    pub converged: bool,
    pub limit: Option<C64>,
    /// Max pairwise distance over the trailing window.
    pub oscillation: f64,
    pub tol: f64,
    pub divergence_kind: Option<DivergenceKind>,
}

impl CauchyDiagnostics {
    pub fn analyze(values: Vec<C64>) -> CauchyDiagnostics {
        debug_assert!(!values.is_empty());
        let n = values.len();
        let w = CAUCHY_WINDOW.min(n);
        let last = values[n - 1];
        let tol = CAUCHY_TOL_SCALE * last.norm().max(1.0);
        let tail = &values[n - w..];
        let mut osc: f64 = 0.0;
        for i in 0..tail.len() {
            for j in i + 1..tail.len() {
                osc = osc.max((tail[i] - tail[j]).norm());
            }
        }
        let converged = osc <= tol;
        let divergence_kind = if converged {
            None
        } else {
            let threshold = UNBOUNDED_FACTOR * (1.0 + values[0].norm());
            let crossed = values.iter().any(|v| v.norm() > threshold);
            let mags: Vec<f64> = tail.iter().map(|v| v.norm()).collect();
            let diffs: Vec<f64> = mags.windows(2).map(|p| p[1] - p[0]).collect();
            let monotone_growth = !diffs.is_empty()
                && diffs.iter().all(|d| *d > tol)
                && *diffs.last().expect("non-empty") >= 0.9 * diffs[0];
            if crossed || monotone_growth {
                Some(DivergenceKind::Unbounded)
            } else {
                Some(DivergenceKind::Oscillating)
            }
        };
        CauchyDiagnostics {
            converged,
            limit: converged.then_some(last),
            oscillation: osc,
            tol,
            divergence_kind,
            values,
        }
    }
}

/// Outcome of the integrability probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrabilityVerdict {
    IntegrableEvidence,
    NotIntegrable,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct UnitIntegrability {
    pub unit_index: usize,
    pub diagnostics: CauchyDiagnostics,
}

/// One row of the boundedness diagnostic: the largest |<V, phi>| over a
/// fixed dictionary, normalized by the sequence seminorm of phi.
#[derive(Debug, Clone, Serialize)]
pub struct BoundDiagnosticRow {
    pub r_index: usize,
    pub max_ratio: f64,
    pub argmax_phi: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct IntegrabilityReport {
    pub verdict: IntegrabilityVerdict,
    pub per_unit: Vec<UnitIntegrability>,
    pub bound_rows: Vec<BoundDiagnosticRow>,
}

/// Pair V against the members of each unit and classify the sequences;
/// also report the normalized-action diagnostic over a fixed dictionary.
pub fn integrability_test(
    v: &Ultradistribution,
    units: &[&ApproximateUnit],
    r_list: &[RSequence],
    n_max: usize,
    tol_q: f64,
) -> Result<IntegrabilityReport> {
    let d = v.d;
    let mut per_unit = Vec::with_capacity(units.len());
    for (unit_index, unit) in units.iter().enumerate() {
        if unit.dim() != d {
            return Err(Error::OutOfRange(format!(
                "unit {unit_index} has dimension {}, distribution has {d}",
                unit.dim()
            )));
        }
        let mut values = Vec::with_capacity(n_max);
        for n in 1..=n_max {
            let member = unit.member(n)?;
            values.push(pair(v, &Func::Elem(member), tol_q)?);
        }
        per_unit.push(UnitIntegrability {
            unit_index,
            diagnostics: CauchyDiagnostics::analyze(values),
        });
    }
    let all_converged = per_unit.iter().all(|u| u.diagnostics.converged);
    let any_unbounded = per_unit
        .iter()
        .any(|u| u.diagnostics.divergence_kind == Some(DivergenceKind::Unbounded));
    let verdict = if all_converged && !per_unit.is_empty() {
        IntegrabilityVerdict::IntegrableEvidence
    } else if any_unbounded {
        IntegrabilityVerdict::NotIntegrable
    } else {
        IntegrabilityVerdict::Inconclusive
    };

    let dictionary = bound_dictionary(d)?;
    let mut bound_rows = Vec::with_capacity(r_list.len());
    for (r_index, r) in r_list.iter().enumerate() {
        let mut max_ratio: f64 = 0.0;
        let mut argmax_phi = 0usize;
        for (i, phi) in dictionary.iter().enumerate() {
            let action = pair(v, &Func::Elem(phi.clone()), tol_q)?.norm();
            let params = SeminormParams::sequence(r.clone(), 12)?;
            let norm = seminorm(&Func::Elem(phi.clone()), &params)?.value;
            if norm > 0.0 && action / norm > max_ratio {
                max_ratio = action / norm;
                argmax_phi = i;
            }
        }
        bound_rows.push(BoundDiagnosticRow {
            r_index,
            max_ratio,
            argmax_phi,
        });
    }
    Ok(IntegrabilityReport {
        verdict,
        per_unit,
        bound_rows,
    })
}

fn bound_dictionary(d: usize) -> Result<Vec<Element>> {
    let ones = vec![1.0; d];
    let zeros = vec![0.0; d];
    Ok(vec![
        Element::standard_bump(&zeros, &ones)?,
        Element::standard_bump(&vec![0.5; d], &vec![0.75; d])?,
        Element::standard_bump(&vec![-1.0; d], &vec![1.25; d])?,
        Element::plateau(&vec![(-1.0, 1.0); d], 1.0)?,
        Element::plateau(&vec![(-2.0, 2.0); d], 0.5)?,
    ])
}

/// Localization mode of the convolvability probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvolutionMode {
    /// Plane window on the tensor: <S tensor T, pi_n * phi^diag>.
    Epsilon,
    /// Both factors windowed: <(pi^1_n S) tensor (pi^2_n T), phi^diag>.
    Pi,
    /// Only the first factor windowed.
    Pi1,
    /// Only the second factor windowed.
    Pi2,
}

impl ConvolutionMode {
    pub const ALL: [ConvolutionMode; 4] = [
        ConvolutionMode::Epsilon,
        ConvolutionMode::Pi,
        ConvolutionMode::Pi1,
        ConvolutionMode::Pi2,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ConvolutionMode::Epsilon => "epsilon",
            ConvolutionMode::Pi => "pi",
            ConvolutionMode::Pi1 => "pi1",
            ConvolutionMode::Pi2 => "pi2",
        }
    }
}

/// The units driving one family of convolvability sweeps: a plane unit on
/// R^{2d} and one unit per tensor factor.
pub struct ConvolutionUnits {
    pub plane: ApproximateUnit,
    pub left: ApproximateUnit,
    pub right: ApproximateUnit,
}

impl ConvolutionUnits {
    /// Plateau windows; left and right deliberately use different margins
    /// and schedules so agreement across them is informative.
    pub fn plateau_family(d: usize, n_max: usize) -> Result<Self> {
        let shifted: Vec<f64> = (1..=n_max).map(|n| n as f64 + 0.5).collect();
        Ok(ConvolutionUnits {
            plane: ApproximateUnit::plateau(2 * d, 1.0, Schedule::linear(n_max), true)?,
            left: ApproximateUnit::plateau(d, 1.0, Schedule::linear(n_max), true)?,
            right: ApproximateUnit::plateau(d, 0.75, Schedule::explicit(&shifted), true)?,
        })
    }

    /// Dilated-profile windows, structurally different from the plateau
    /// family (the margin grows with the scale).
    pub fn dilation_family(d: usize, n_max: usize) -> Result<Self> {
        let plane_profile = Element::plateau(&vec![(-1.0, 1.0); 2 * d], 1.0)?;
        let left_profile = Element::plateau(&vec![(-1.0, 1.0); d], 1.0)?;
        let right_profile = Element::plateau(&vec![(-1.0, 1.0); d], 0.5)?;
        let shifted: Vec<f64> = (1..=n_max).map(|n| n as f64 + 0.25).collect();
        Ok(ConvolutionUnits {
            plane: ApproximateUnit::dilation(plane_profile, Schedule::linear(n_max), true)?,
            left: ApproximateUnit::dilation(left_profile, Schedule::linear(n_max), true)?,
            right: ApproximateUnit::dilation(right_profile, Schedule::explicit(&shifted), true)?,
        })
    }
}

/// One convolvability sweep: the values, their classification, and the
/// step (if any) from which the window covers the effective support and
/// the value is exact without further integration.
#[derive(Debug, Clone, Serialize)]
pub struct ModeRun {
    pub mode: ConvolutionMode,
    pub diagnostics: CauchyDiagnostics,
    pub stabilized_at: Option<usize>,
}

fn box_covers(cover: Option<Vec<(f64, f64)>>, region: &[(f64, f64)]) -> bool {
    match cover {
        None => false,
        Some(bx) => bx
            .iter()
            .zip(region)
            .all(|(c, r)| c.0 <= r.0 && r.1 <= c.1),
    }
}

/// Run one mode of the sequential convolvability probe.
pub fn convolvability_sequence(
    s: &Ultradistribution,
    t: &Ultradistribution,
    phi: &Element,
    mode: ConvolutionMode,
    units: &ConvolutionUnits,
    n_max: usize,
    tol_q: f64,
) -> Result<ModeRun> {
    let d = s.d;
    if t.d != d || phi.dim() != d {
        return Err(Error::OutOfRange(
            "convolution factors and test function must share one dimension".into(),
        ));
    }
    let diag = Func::Diag(phi.clone());

    // effective support of the pairing, given what the factors allow
    let mut fixed: Vec<Option<(f64, f64)>> = vec![None; 2 * d];
    if let Some(hs) = s.support_hull() {
        for (i, b) in hs.into_iter().enumerate() {
            fixed[i] = Some(b);
        }
    }
    if let Some(ht) = t.support_hull() {
        for (i, b) in ht.into_iter().enumerate() {
            fixed[d + i] = Some(b);
        }
    }
    let region = diag.inferred_box(&fixed);
    if let Some(reg) = &region {
        if reg.iter().any(|(lo, hi)| lo > hi) {
            // the factors never meet the diagonal: every value is exactly 0
            let values = vec![C64::new(0.0, 0.0); n_max];
            return Ok(ModeRun {
                mode,
                diagnostics: CauchyDiagnostics::analyze(values),
                stabilized_at: Some(1),
            });
        }
    }

    let mut values = Vec::with_capacity(n_max);
    let mut stabilized_at: Option<usize> = None;
    let mut base: Option<C64> = None;
    for n in 1..=n_max {
        let covered = if let Some(reg) = &region {
            match mode {
                ConvolutionMode::Epsilon => {
                    box_covers(units.plane.member(n)?.constant_one_box(), reg)
                }
                ConvolutionMode::Pi => {
                    box_covers(units.left.member(n)?.constant_one_box(), &reg[..d])
                        && box_covers(units.right.member(n)?.constant_one_box(), &reg[d..])
                }
                ConvolutionMode::Pi1 => {
                    box_covers(units.left.member(n)?.constant_one_box(), &reg[..d])
                }
                ConvolutionMode::Pi2 => {
                    box_covers(units.right.member(n)?.constant_one_box(), &reg[d..])
                }
            }
        } else {
            false
        };
        let value = if covered {
            if base.is_none() {
                base = Some(tensor_pair(s, t, &diag, tol_q)?);
                stabilized_at = Some(n);
            }
            base.expect("just set")
        } else {
            match mode {
                ConvolutionMode::Epsilon => {
                    let window = units.plane.member(n)?;
                    let test = Func::prod(Func::Elem(window), diag.clone());
                    tensor_pair(s, t, &test, tol_q)?
                }
                ConvolutionMode::Pi => {
                    let sn = multiply(s, &units.left.member(n)?)?;
                    let tn = multiply(t, &units.right.member(n)?)?;
                    tensor_pair(&sn, &tn, &diag, tol_q)?
                }
                ConvolutionMode::Pi1 => {
                    let sn = multiply(s, &units.left.member(n)?)?;
                    tensor_pair(&sn, t, &diag, tol_q)?
                }
                ConvolutionMode::Pi2 => {
                    let tn = multiply(t, &units.right.member(n)?)?;
                    tensor_pair(s, &tn, &diag, tol_q)?
                }
            }
        };
        values.push(value);
    }
    Ok(ModeRun {
        mode,
        diagnostics: CauchyDiagnostics::analyze(values),
        stabilized_at,
    })
}

#[derive(Debug, Clone)]
pub struct ConvolveConfig {
    pub n_max: usize,
    pub tol_q: f64,
    pub tol_agree: f64,
    /// Also run every mode against the dilation unit family.
    pub special_variants: bool,
    /// Compare against the swapped-factor limit.
    pub check_commutativity: bool,
    pub par: Parallelism,
}

impl Default for ConvolveConfig {
    fn default() -> Self {
        ConvolveConfig {
            n_max: DEFAULT_N_MAX,
            tol_q: TOL_PAIR,
            tol_agree: TOL_AGREE,
            special_variants: true,
            check_commutativity: true,
            par: Parallelism::Auto,
        }
    }
}

/// Convolvability verdict for one test function.
#[derive(Debug, Clone, Serialize)]
pub struct PhiConvolution {
    pub modes: BTreeMap<String, ModeRun>,
    pub all_converged: bool,
    pub agreed_value: Option<C64>,
    pub cross_mode_spread: Option<f64>,
    pub commutativity_spread: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvolveReport {
    pub per_phi: Vec<PhiConvolution>,
    pub convolvable: bool,
    pub worst_spread: f64,
    pub tol_agree: f64,
}

/// Probe S * T against every test function: all localization modes, both
/// unit families, and the swapped-factor check. `agreed_value` is set only
/// when every run converges and the limits sit within `tol_agree`.
pub fn convolve(
    s: &Ultradistribution,
    t: &Ultradistribution,
    phis: &[Element],
    cfg: &ConvolveConfig,
) -> Result<ConvolveReport> {
    let d = s.d;
    let general = ConvolutionUnits::plateau_family(d, cfg.n_max)?;
    let special = if cfg.special_variants {
        Some(ConvolutionUnits::dilation_family(d, cfg.n_max)?)
    } else {
        None
    };

    let mut per_phi = Vec::with_capacity(phis.len());
    for phi in phis {
        let mut jobs: Vec<(String, ConvolutionMode, &ConvolutionUnits, bool)> = Vec::new();
        for mode in ConvolutionMode::ALL {
            jobs.push((mode.label().to_string(), mode, &general, false));
            if let Some(sp) = &special {
                jobs.push((format!("{}_special", mode.label()), mode, sp, false));
            }
        }
        if cfg.check_commutativity {
            jobs.push((
                "epsilon_swapped".to_string(),
                ConvolutionMode::Epsilon,
                &general,
                true,
            ));
        }
        let runs = exec::map_collect(
            &jobs,
            |(label, mode, units, swapped)| -> Result<(String, ModeRun)> {
                let run = if *swapped {
                    convolvability_sequence(t, s, phi, *mode, units, cfg.n_max, cfg.tol_q)?
                } else {
                    convolvability_sequence(s, t, phi, *mode, units, cfg.n_max, cfg.tol_q)?
                };
                Ok((label.clone(), run))
            },
            cfg.par,
        );

        let mut modes = BTreeMap::new();
        let mut swapped_run: Option<ModeRun> = None;
        for r in runs {
            let (label, run) = r?;
            if label == "epsilon_swapped" {
                swapped_run = Some(run);
            } else {
                modes.insert(label, run);
            }
        }

        let limits: Vec<C64> = modes
            .values()
            .filter_map(|m| m.diagnostics.limit)
            .collect();
        let all_converged = modes.values().all(|m| m.diagnostics.converged);
        let cross_mode_spread = if limits.len() >= 2 {
            let mut spread: f64 = 0.0;
            for i in 0..limits.len() {
                for j in i + 1..limits.len() {
                    spread = spread.max((limits[i] - limits[j]).norm());
                }
            }
            Some(spread)
        } else {
            None
        };
        let agreed_value = (all_converged
            && !limits.is_empty()
            && cross_mode_spread.is_none_or(|sp| sp <= cfg.tol_agree))
        .then(|| limits[0]);
        let commutativity_spread = match (&swapped_run, agreed_value) {
            (Some(sw), Some(v)) => sw.diagnostics.limit.map(|l| (l - v).norm()),
            _ => None,
        };
        per_phi.push(PhiConvolution {
            modes,
            all_converged,
            agreed_value,
            cross_mode_spread,
            commutativity_spread,
        });
    }

    let convolvable = !per_phi.is_empty() && per_phi.iter().all(|p| p.agreed_value.is_some());
    let worst_spread = per_phi
        .iter()
        .filter_map(|p| p.cross_mode_spread)
        .fold(0.0, f64::max);
    Ok(ConvolveReport {
        per_phi,
        convolvable,
        worst_spread,
        tol_agree: cfg.tol_agree,
    })
}

/// Integrability probe for the pointwise product of the two regularized
/// factors: u = (reflected S) * phi and v = T * psi are evaluated
/// pointwise and |u v| is integrated over boxes of growing halfwidth.
#[derive(Debug, Clone, Serialize)]
pub struct C3Report {
    pub halfwidths: Vec<f64>,
    pub integrals: Vec<f64>,
    pub converged: bool,
    pub final_increment: f64,
}

/// Default halfwidth ladder for [`c3_check`].
pub const C3_HALFWIDTHS: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];

pub fn c3_check(
    s: &Ultradistribution,
    t: &Ultradistribution,
    phi: &Element,
    psi: &Element,
    halfwidths: &[f64],
    tol_q: f64,
) -> Result<C3Report> {
    let d = s.d;
    if t.d != d || phi.dim() != d || psi.dim() != d {
        return Err(Error::OutOfRange(
            "product check needs matching dimensions".into(),
        ));
    }
    if halfwidths.is_empty() || halfwidths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::OutOfRange(
            "halfwidths must be strictly increasing and non-empty".into(),
        ));
    }

    // u(x) = <S_y, phi(x + y)>, v(x) = <T_y, psi(x - y)>
    let u_parts = RegularizedParts::build(s, phi, Shift::Plus)?;
    let v_parts = RegularizedParts::build(t, psi, Shift::Minus)?;

    // The product is zero outside the intersection of the part supports;
    // clipping the boxes there makes saturated increments exactly zero
    // instead of quadrature slop on ever coarser grids.
    let clip: Option<Vec<(f64, f64)>> = match (u_parts.support_box(), v_parts.support_box()) {
        (Some(ub), Some(vb)) => Some(
            ub.iter()
                .zip(&vb)
                .map(|((a, b), (c, e))| (a.max(*c), b.min(*e)))
                .collect(),
        ),
        _ => None,
    };

    let (nodes, weights) = quad::gl_rule(15);
    let mut integrals = Vec::with_capacity(halfwidths.len());
    for &half in halfwidths {
        let domain: Vec<(f64, f64)> = (0..d)
            .map(|i| match &clip {
                Some(c) => ((-half).max(c[i].0), half.min(c[i].1)),
                None => (-half, half),
            })
            .collect();
        if domain.iter().any(|(lo, hi)| lo >= hi) {
            integrals.push(0.0);
            continue;
        }
        let cells_per_axis = 16usize;
        let mut total = 0.0;
        let mut cell = vec![0usize; d];
        'cells: loop {
            // integrate |u v| over this cell by a tensor GL rule
            let mut idx = vec![0usize; d];
            'nodes: loop {
                let mut x = vec![0.0; d];
                let mut w = 1.0;
                for axis in 0..d {
                    let cell_w = (domain[axis].1 - domain[axis].0) / cells_per_axis as f64;
                    let half_w = 0.5 * cell_w;
                    let mid = domain[axis].0 + cell[axis] as f64 * cell_w + half_w;
                    x[axis] = mid + half_w * nodes[idx[axis]];
                    w *= half_w * weights[idx[axis]];
                }
                let u = u_parts.eval(&x, tol_q)?;
                let v = v_parts.eval(&x, tol_q)?;
                total += w * (u * v).norm();
                for axis in 0..d {
                    idx[axis] += 1;
                    if idx[axis] < nodes.len() {
                        continue 'nodes;
                    }
                    idx[axis] = 0;
                }
                break 'nodes;
            }
            for axis in 0..d {
                cell[axis] += 1;
                if cell[axis] < cells_per_axis {
                    continue 'cells;
                }
                cell[axis] = 0;
            }
            break 'cells;
        }
        integrals.push(total);
    }

    let final_increment = if integrals.len() >= 2 {
        (integrals[integrals.len() - 1] - integrals[integrals.len() - 2]).abs()
    } else {
        f64::INFINITY
    };
    let last = integrals.last().copied().unwrap_or(0.0);
    let converged = final_increment <= 1e-6 * last.abs().max(1.0);
    Ok(C3Report {
        halfwidths: halfwidths.to_vec(),
        integrals,
        converged,
        final_increment,
    })
}

#[derive(Clone, Copy)]
enum Shift {
    /// phi(x + y): the reflected-factor side of the product.
    Plus,
    /// psi(x - y): the plain convolution side.
    Minus,
}

/// Pointwise evaluator for <U_y, chi(x +/- y)>.
struct RegularizedParts {
    shift: Shift,
    /// (coef, D^k chi, location); the pairing sign is already folded in.
    points: Vec<(C64, Element, Vec<f64>)>,
    densities: Vec<Element>,
    polys: Vec<PolyTerm>,
    chi: Element,
    chi_box: Option<Vec<(f64, f64)>>,
}

impl RegularizedParts {
    fn build(u: &Ultradistribution, chi: &Element, shift: Shift) -> Result<RegularizedParts> {
        let mut points = Vec::with_capacity(u.point_terms.len());
        for pt in &u.point_terms {
            let dchi = if mindex::abs(&pt.order) == 0 {
                chi.clone()
            } else {
                chi.differentiate(&pt.order)?
            };
            // d/dy chi(x + y) carries +1 per order, chi(x - y) carries -1;
            // the pairing contributes another (-1)^{|k|}
            let inner_sign = match shift {
                Shift::Plus => 1.0,
                Shift::Minus => -1.0,
            };
            let total = if mindex::abs(&pt.order) % 2 == 1 {
                -inner_sign
            } else {
                1.0
            };
            points.push((pt.coef * total, dchi, pt.location.clone()));
        }
        Ok(RegularizedParts {
            shift,
            points,
            densities: u.density_terms.clone(),
            polys: u.poly_terms.clone(),
            chi: chi.clone(),
            chi_box: chi.support_box(),
        })
    }

    fn arg(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        match self.shift {
            Shift::Plus => x.iter().zip(y).map(|(a, b)| a + b).collect(),
            Shift::Minus => x.iter().zip(y).map(|(a, b)| a - b).collect(),
        }
    }

    /// Box outside which the evaluator is identically zero: the union over
    /// parts of the shifted test-function support. `None` when a polynomial
    /// part makes the support unbounded.
    fn support_box(&self) -> Option<Vec<(f64, f64)>> {
        if !self.polys.is_empty() {
            return None;
        }
        let chi_box = self.chi_box.as_ref()?;
        let d = chi_box.len();
        let mut out: Option<Vec<(f64, f64)>> = None;
        let mut push = |bx: Vec<(f64, f64)>| match &mut out {
            None => out = Some(bx),
            Some(acc) => {
                for (a, b) in acc.iter_mut().zip(bx) {
                    a.0 = a.0.min(b.0);
                    a.1 = a.1.max(b.1);
                }
            }
        };
        for (_, dchi, loc) in &self.points {
            let bx = dchi.support_box()?;
            push(
                bx.iter()
                    .zip(loc)
                    .map(|((lo, hi), y)| match self.shift {
                        Shift::Plus => (lo - y, hi - y),
                        Shift::Minus => (lo + y, hi + y),
                    })
                    .collect(),
            );
        }
        for f in &self.densities {
            let Some(g) = f.support_box() else { continue };
            push(
                (0..d)
                    .map(|i| match self.shift {
                        Shift::Plus => (chi_box[i].0 - g[i].1, chi_box[i].1 - g[i].0),
                        Shift::Minus => (chi_box[i].0 + g[i].0, chi_box[i].1 + g[i].1),
                    })
                    .collect(),
            );
        }
        out.or_else(|| Some(vec![(0.0, 0.0); d]))
    }

    fn eval(&self, x: &[f64], tol: f64) -> Result<C64> {
        let mut acc = C64::new(0.0, 0.0);
        for (coef, dchi, loc) in &self.points {
            acc += *coef * dchi.eval(&self.arg(x, loc));
        }
        for f in &self.densities {
            if let Some(bx) = f.support_box() {
                let g = |y: &[f64]| f.eval(y) * self.chi.eval(&self.arg(x, y));
                acc += quad::adaptive_box(&g, &bx, tol)?;
            }
        }
        for p in &self.polys {
            let chi_box = match &self.chi_box {
                Some(bx) => bx,
                None => continue,
            };
            // y-domain where chi(x +/- y) is supported
            let domain: Vec<(f64, f64)> = chi_box
                .iter()
                .zip(x)
                .map(|((lo, hi), xi)| match self.shift {
                    Shift::Plus => (lo - xi, hi - xi),
                    Shift::Minus => (xi - hi, xi - lo),
                })
                .collect();
            let g = |y: &[f64]| {
                let mut w = p.coef * self.chi.eval(&self.arg(x, y));
                for (i, poly) in p.axes.iter().enumerate() {
                    w *= poly.eval(y[i]);
                }
                w
            };
            acc += quad::adaptive_box(&g, &domain, tol)?;
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::oracle;

    fn bump1() -> Element {
        Element::standard_bump(&[0.0], &[1.0]).unwrap()
    }

    #[test]
    fn delta_pairing_evaluates_the_test_function() {
        let phi = bump1();
        let s = Ultradistribution::delta(&[0.3]).unwrap();
        let got = pair(&s, &Func::Elem(phi.clone()), TOL_PAIR).unwrap();
        assert!((got - phi.eval(&[0.3])).norm() < 1e-14);
    }

    #[test]
    fn delta_derivative_pairing_flips_sign() {
        let phi = bump1();
        let s = Ultradistribution::delta_derivative(C64::new(1.0, 0.0), &[1], &[0.2]).unwrap();
        let got = pair(&s, &Func::Elem(phi.clone()), TOL_PAIR).unwrap();
        let want = -phi.differentiate(&[1]).unwrap().eval(&[0.2]);
        assert!((got - want).norm() < 1e-14);
    }

    #[test]
    fn density_pairing_matches_the_independent_quadrature() {
        let f = bump1();
        let window = Element::plateau(&[(-2.0, 2.0)], 1.0).unwrap();
        let s = Ultradistribution::density(f.clone());
        let got = pair(&s, &Func::Elem(window), TOL_PAIR).unwrap();
        // the window is identically 1 on supp f, so this is the mass of f
        let mut g = |x: f64| f.eval(&[x]);
        let want = oracle::simpson_1d(&mut g, -1.0, 1.0, 1e-12).unwrap();
        assert!((got - want).norm() < 1e-8);
    }

    #[test]
    fn constant_one_pairing_is_the_window_volume() {
        let one = Ultradistribution::constant_one(1).unwrap();
        let window = Element::plateau(&[(-3.0, 3.0)], 1.0).unwrap();
        let got = pair(&one, &Func::Elem(window.clone()), TOL_PAIR).unwrap();
        let mut g = |x: f64| window.eval(&[x]);
        let want = oracle::simpson_1d(&mut g, -4.0, 4.0, 1e-12).unwrap();
        assert!((got - want).norm() < 1e-8);
    }

    #[test]
    fn tensor_of_deltas_hits_the_diagonal_sum() {
        let phi = bump1();
        let s = Ultradistribution::delta(&[0.25]).unwrap();
        let t = Ultradistribution::delta(&[-0.1]).unwrap();
        let got = tensor_pair(&s, &t, &Func::Diag(phi.clone()), TOL_PAIR).unwrap();
        assert!((got - phi.eval(&[0.15])).norm() < 1e-14);
    }

    #[test]
    fn tensor_with_a_derivative_delta_differentiates_the_diagonal() {
        let phi = bump1();
        let s = Ultradistribution::delta_derivative(C64::new(1.0, 0.0), &[1], &[0.0]).unwrap();
        let t = Ultradistribution::delta(&[0.0]).unwrap();
        let got = tensor_pair(&s, &t, &Func::Diag(phi.clone()), TOL_PAIR).unwrap();
        let want = -phi.differentiate(&[1]).unwrap().eval(&[0.0]);
        assert!((got - want).norm() < 1e-13);
    }

    #[test]
    fn tensor_of_densities_matches_the_oracle_route() {
        let f = bump1();
        let g = Element::standard_bump(&[0.5], &[0.8]).unwrap();
        let phi = Element::standard_bump(&[0.0], &[2.0]).unwrap();
        let s = Ultradistribution::density(f.clone());
        let t = Ultradistribution::density(g.clone());
        let got = tensor_pair(&s, &t, &Func::Diag(phi.clone()), TOL_PAIR).unwrap();
        let integrand = |x: &[f64]| f.eval(&[x[0]]) * g.eval(&[x[1]]) * phi.eval(&[x[0] + x[1]]);
        let want =
            oracle::simpson_box(&integrand, &[(-1.0, 1.0), (-0.3, 1.3)], 1e-11).unwrap();
        assert!((got - want).norm() < 1e-7);
    }

    #[test]
    fn bare_diagonal_against_two_polynomials_is_divergent() {
        let one = Ultradistribution::constant_one(1).unwrap();
        let phi = bump1();
        let err = tensor_pair(&one, &one, &Func::Diag(phi), TOL_PAIR).unwrap_err();
        assert!(matches!(err, Error::DivergentPairing(_)));
    }

    #[test]
    fn cauchy_classifier_separates_the_three_behaviours() {
        let flat: Vec<C64> = (0..10).map(|_| C64::new(2.5, 0.0)).collect();
        let d = CauchyDiagnostics::analyze(flat);
        assert!(d.converged);
        assert_eq!(d.limit, Some(C64::new(2.5, 0.0)));

        let growing: Vec<C64> = (1..=10).map(|n| C64::new(2.0 * n as f64, 0.0)).collect();
        let d = CauchyDiagnostics::analyze(growing);
        assert!(!d.converged);
        assert_eq!(d.divergence_kind, Some(DivergenceKind::Unbounded));

        let alternating: Vec<C64> = (0..10)
            .map(|n| C64::new(if n % 2 == 0 { 1.0 } else { -1.0 }, 0.0))
            .collect();
        let d = CauchyDiagnostics::analyze(alternating);
        assert!(!d.converged);
        assert_eq!(d.divergence_kind, Some(DivergenceKind::Oscillating));
    }

    #[test]
    fn window_multiplication_redistributes_derivative_point_masses() {
        // window identically 1 near the point: the term must pass through
        let window = Element::plateau(&[(-1.0, 1.0)], 1.0).unwrap();
        let s = Ultradistribution::delta_derivative(C64::new(2.0, 0.0), &[2], &[0.25]).unwrap();
        let prod = multiply(&s, &window).unwrap();
        assert_eq!(prod.point_terms().len(), 1);
        let pt = &prod.point_terms()[0];
        assert_eq!(pt.order, vec![2]);
        assert!((pt.coef - C64::new(2.0, 0.0)).norm() < 1e-15);

        // window sloping at the point: compare against <D^2 delta, w phi>
        let slope = Element::plateau(&[(-3.0, 0.0)], 1.0).unwrap();
        let s1 = Ultradistribution::delta_derivative(C64::new(1.0, 0.0), &[2], &[0.5]).unwrap();
        let prod = multiply(&s1, &slope).unwrap();
        let phi = Element::standard_bump(&[0.0], &[2.0]).unwrap();
        let lhs = pair(&prod, &Func::Elem(phi.clone()), TOL_PAIR).unwrap();
        let wphi = slope.mul(&phi).unwrap();
        let rhs = pair(&s1, &Func::Elem(wphi), TOL_PAIR).unwrap();
        assert!((lhs - rhs).norm() < 1e-12, "lhs={lhs} rhs={rhs}");
    }

    #[test]
    fn window_multiplication_clips_a_polynomial_to_a_density() {
        let window = Element::plateau(&[(-2.0, 2.0)], 1.0).unwrap();
        let one = Ultradistribution::constant_one(1).unwrap();
        let prod = multiply(&one, &window).unwrap();
        assert!(prod.poly_terms().is_empty());
        assert_eq!(prod.density_terms().len(), 1);
        let e = &prod.density_terms()[0];
        assert!((e.eval(&[0.0]) - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(e.eval(&[5.0]), C64::new(0.0, 0.0));
    }

    #[test]
    fn bump_density_shows_integrable_evidence() {
        let f = bump1();
        let v = Ultradistribution::density(f.clone());
        let unit = ApproximateUnit::plateau(1, 1.0, Schedule::linear(8), true).unwrap();
        let r = RSequence::linear(24).unwrap();
        let report = integrability_test(&v, &[&unit], &[r], 8, TOL_PAIR).unwrap();
        assert_eq!(report.verdict, IntegrabilityVerdict::IntegrableEvidence);
        let limit = report.per_unit[0].diagnostics.limit.unwrap();
        let mut g = |x: f64| f.eval(&[x]);
        let mass = oracle::simpson_1d(&mut g, -1.0, 1.0, 1e-12).unwrap();
        assert!((limit - mass).norm() < 1e-8);
        assert!(report.bound_rows[0].max_ratio > 0.0);
    }

    #[test]
    fn constant_one_is_not_integrable() {
        let one = Ultradistribution::constant_one(1).unwrap();
        let unit = ApproximateUnit::plateau(1, 1.0, Schedule::linear(8), true).unwrap();
        let r = RSequence::linear(24).unwrap();
        let report = integrability_test(&one, &[&unit], &[r], 8, TOL_PAIR).unwrap();
        assert_eq!(report.verdict, IntegrabilityVerdict::NotIntegrable);
        assert_eq!(
            report.per_unit[0].diagnostics.divergence_kind,
            Some(DivergenceKind::Unbounded)
        );
    }

    #[test]
    fn delta_convolution_agrees_across_modes_and_units() {
        let s = Ultradistribution::delta(&[0.5]).unwrap();
        let t = Ultradistribution::delta(&[-0.2]).unwrap();
        let phi = bump1();
        let cfg = ConvolveConfig {
            n_max: 6,
            ..ConvolveConfig::default()
        };
        let report = convolve(&s, &t, &[phi.clone()], &cfg).unwrap();
        assert!(report.convolvable);
        let per = &report.per_phi[0];
        assert_eq!(per.modes.len(), 8);
        assert!(per.all_converged);
        let want = phi.eval(&[0.3]);
        assert!((per.agreed_value.unwrap() - want).norm() < 1e-9);
        assert!(per.cross_mode_spread.unwrap() < 1e-9);
        assert!(per.commutativity_spread.unwrap() < 1e-9);
        // the windows cover two deltas almost immediately
        assert!(per.modes["epsilon"].stabilized_at.is_some());
    }

    #[test]
    fn incompatible_polynomial_pair_fails_every_mode() {
        let one = Ultradistribution::constant_one(1).unwrap();
        let phi = bump1();
        let cfg = ConvolveConfig {
            n_max: 8,
            special_variants: false,
            check_commutativity: false,
            ..ConvolveConfig::default()
        };
        let report = convolve(&one, &one, &[phi], &cfg).unwrap();
        let per = &report.per_phi[0];
        assert!(!report.convolvable);
        assert!(per.agreed_value.is_none());
        for (label, run) in &per.modes {
            assert!(!run.diagnostics.converged, "{label} should not converge");
            assert_eq!(
                run.diagnostics.divergence_kind,
                Some(DivergenceKind::Unbounded),
                "{label} should grow without bound"
            );
            assert!(run.stabilized_at.is_none());
        }
    }

    #[test]
    fn product_integrability_separates_compact_from_polynomial_pairs() {
        let s = Ultradistribution::delta(&[0.0]).unwrap();
        let t = Ultradistribution::density(bump1());
        let phi = bump1();
        let psi = Element::standard_bump(&[0.0], &[1.5]).unwrap();
        let report = c3_check(&s, &t, &phi, &psi, &[1.0, 2.0, 4.0, 8.0], TOL_PAIR).unwrap();
        assert!(report.converged, "compact factors: {:?}", report.integrals);

        let one = Ultradistribution::constant_one(1).unwrap();
        let report = c3_check(&one, &one, &phi, &psi, &[1.0, 2.0, 4.0, 8.0], TOL_PAIR).unwrap();
        assert!(!report.converged, "growing product: {:?}", report.integrals);
        let inc: Vec<f64> = report.integrals.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(inc.iter().all(|d| *d > 0.0));
    }
}
