//! Differential operators with certified coefficient decay, their action on
//! test functions and compactly supported distributions, and the machinery
//! for exchanging an operator with a regularized convolution.
//!
//! An operator is a finite table `k -> c_k` of multi-index coefficients,
//! applied as `P(D) f = sum_k c_k D^k f` with the same normalized derivative
//! `D` used everywhere else in the crate. The table is either explicitly
//! finite or the truncation of an inverse-factorial-weighted series; in the
//! latter case the dropped tail is estimated, never ignored. Certification
//! scalarizes the weighted coefficient sizes and demands rapid decay, then
//! re-verifies the emitted `(bound, witness)` pair against every stored
//! entry exactly.
//!
//! The exchange question - does applying the operator before or after a
//! sequential convolution give the same number - is probed on three legs.
//! Moving the operator onto the test function through a window leaves a
//! correction term supported where the window varies; [`nu_correction`]
//! builds that correction exactly via the product rule, and
//! [`nu_bound_check`] reports its seminorm size, its pairing decay, and the
//! combinatorial inequalities that control it.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::bump::element::{inv_i_pow, Prim, Term};
use crate::bump::seminorm::{sup_abs, DerivativeTable};
use crate::bump::{Element, Func};
use crate::error::{Error, Result};
use crate::exec::{map_collect, Parallelism};
use crate::komatsu::{classify_decay, DecayCertificate, DecayVerdict};
use crate::mindex;
use crate::rclass::RSequence;
use crate::ultradist::{
    convolvability_sequence, tensor_pair, ConvolutionMode, ConvolutionUnits, ModeRun,
    Ultradistribution,
};
use crate::weights::WeightSequence;
use crate::C64;

/// Orders summed past the truncation bound when estimating a dropped tail.
const TAIL_ORDERS: u32 = 16;
/// Prefix length of the canonical scaling witness for rule-built tables;
/// long enough that downstream shifts stay inside the prefix.
const WITNESS_LEN: usize = 1024;
/// Multiplier on the quadrature tolerance when comparing exchange legs.
const EXCHANGE_TOL_FACTOR: f64 = 10.0;
/// A windowed-correction seminorm row exceeding the first positive row by
/// this factor counts as unbounded growth.
const SUP_GROWTH_GUARD: f64 = 50.0;
/// Relative slack when re-verifying a certificate in log space.
const CERT_LOG_SLACK: f64 = 1e-9;
/// Minimal scalar prefix fed to the decay classifier; genuinely finite
/// tables are padded with exact zeros up to this order.
const MIN_DECAY_PREFIX: u32 = 16;

/// How the coefficient table was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientRule {
    /// Caller-supplied finite table.
    Explicit,
    /// `c_k = 1 / (k! M_{|k|})`, truncated at the order bound.
    InverseFactorialWeight,
}

/// Certified decay data: a verified sup `bound` with a scaling `witness`
/// such that `|c_k| <= bound / (W_{|k|} M_{|k|})` for every stored entry,
/// together with the classifier evidence that produced the verdict.
#[derive(Debug, Clone)]
pub struct ClassCertificate {
    pub bound: f64,
    pub witness: RSequence,
    pub decay: DecayCertificate,
}

/// Finite multi-index coefficient table acting as `sum_k c_k D^k`.
#[derive(Debug, Clone)]
pub struct UltradiffOperator {
    d: usize,
    k_op: u32,
    coefficients: BTreeMap<Vec<u32>, C64>,
    finite_order: bool,
    rule: CoefficientRule,
    weights: Option<WeightSequence>,
    certificate: Option<ClassCertificate>,
}

fn ln_factorial(n: u32) -> f64 {
    (1..=n).map(|v| f64::from(v).ln()).sum()
}

fn ln_multi_factorial(k: &[u32]) -> f64 {
    k.iter().map(|&v| ln_factorial(v)).sum()
}

impl UltradiffOperator {
    /// Wraps an explicit finite table. Zero entries are dropped; the order
    /// bound is the largest stored total order, floored at two.
    pub fn explicit(d: usize, entries: Vec<(Vec<u32>, C64)>) -> Result<Self> {
        if d == 0 {
            return Err(Error::OutOfRange("operator dimension must be positive".into()));
        }
        let mut coefficients = BTreeMap::new();
        let mut max_order = 0u32;
        for (k, c) in entries {
            if k.len() != d {
                return Err(Error::OutOfRange(format!(
                    "coefficient index has {} axes, operator has {}",
                    k.len(),
                    d
                )));
            }
            if c.norm() == 0.0 {
                continue;
            }
            max_order = max_order.max(mindex::abs(&k));
            coefficients.insert(k, c);
        }
        if coefficients.is_empty() {
            return Err(Error::OutOfRange("operator table has no nonzero entries".into()));
        }
        Ok(UltradiffOperator {
            d,
            k_op: max_order.max(2),
            coefficients,
            finite_order: true,
            rule: CoefficientRule::Explicit,
            weights: None,
            certificate: None,
        })
    }

    /// The operator `f -> f`.
    pub fn identity(d: usize) -> Result<Self> {
        Self::explicit(d, vec![(mindex::zeros(d), C64::new(1.0, 0.0))])
    }

    /// Truncation of the series with `c_k = 1 / (k! M_{|k|})` at total
    /// order `k_op`. The weight table must cover the tail window used by
    /// the dropped-tail estimate.
    pub fn inverse_factorial_weights(
        d: usize,
        weights: &WeightSequence,
        k_op: u32,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::OutOfRange("operator dimension must be positive".into()));
        }
        if k_op < 2 {
            return Err(Error::OutOfRange(format!(
                "order bound must be at least 2, got {k_op}"
            )));
        }
        if (weights.n() as u32) < k_op + TAIL_ORDERS {
            return Err(Error::PrefixTooShort(format!(
                "weight table stores {} orders, rule truncated at {} needs {}",
                weights.n(),
                k_op,
                k_op + TAIL_ORDERS
            )));
        }
        let mut coefficients = BTreeMap::new();
        for k in mindex::graded(d, k_op) {
            let j = mindex::abs(&k) as usize;
            let ln_c = -(ln_multi_factorial(&k) + weights.log_m(j));
            let c = ln_c.exp();
            if c > 0.0 {
                coefficients.insert(k, C64::new(c, 0.0));
            }
        }
        Ok(UltradiffOperator {
            d,
            k_op,
            coefficients,
            finite_order: false,
            rule: CoefficientRule::InverseFactorialWeight,
            weights: Some(weights.clone()),
            certificate: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Largest total order carried by the table (declared bound, >= 2).
    pub fn order_bound(&self) -> u32 {
        self.k_op
    }

    pub fn coefficients(&self) -> &BTreeMap<Vec<u32>, C64> {
        &self.coefficients
    }

    pub fn is_finite_order(&self) -> bool {
        self.finite_order
    }

    pub fn rule(&self) -> CoefficientRule {
        self.rule
    }

    pub fn certificate(&self) -> Option<&ClassCertificate> {
        self.certificate.as_ref()
    }

    /// Scalarized weighted coefficient sizes `a_j = max_{|k|=j} M_j |c_k|`,
    /// padded with exact zeros when the table is genuinely finite.
    fn weighted_profile(&self, weights: &WeightSequence) -> Result<Vec<f64>> {
        let j_hi = if self.finite_order {
            self.k_op.max(MIN_DECAY_PREFIX)
        } else {
            self.k_op
        };
        if (weights.n() as u32) < j_hi {
            return Err(Error::PrefixTooShort(format!(
                "weight table stores {} orders, profile needs {}",
                weights.n(),
                j_hi
            )));
        }
        let mut a = vec![0.0f64; j_hi as usize + 1];
        for (k, c) in &self.coefficients {
            let j = mindex::abs(k) as usize;
            let v = (c.norm().ln() + weights.log_m(j)).exp();
            if v > a[j] {
                a[j] = v;
            }
        }
        Ok(a)
    }

    /// Classifies the weighted coefficient decay and, on a positive
    /// verdict, stores and returns a certificate whose inequality
    /// `|c_k| <= bound / (W_{|k|} M_{|k|})` is re-verified entry by entry.
    pub fn certify_class(&mut self, weights: &WeightSequence) -> Result<ClassCertificate> {
        let a = self.weighted_profile(weights)?;
        let decay = classify_decay(&a)?;
        match decay.verdict {
            DecayVerdict::RapidlyDecreasing => {}
            DecayVerdict::NotRapidlyDecreasing => {
                let h = decay.failing_h.unwrap_or(1.0);
                let mut worst = (0usize, f64::NEG_INFINITY);
                for (j, v) in a.iter().enumerate() {
                    if *v > 0.0 {
                        let amplified = v.ln() + j as f64 * h.ln();
                        if amplified > worst.1 {
                            worst = (j, amplified);
                        }
                    }
                }
                return Err(Error::NotOfClass(format!(
                    "weighted coefficient size escapes rate {h} at order {} (weighted size {:.3e})",
                    worst.0, a[worst.0]
                )));
            }
            DecayVerdict::Inconclusive => {
                return Err(Error::NotOfClass(
                    "weighted coefficient profile is flat on the stored prefix; no scaling witness certifies it"
                        .into(),
                ));
            }
        }
        // Rule-built tables get the canonical linear witness: every entry
        // beyond the truncation is exactly zero, so the long prefix stays
        // valid and survives the shifts used by the correction bounds.
        let witness = match self.rule {
            CoefficientRule::InverseFactorialWeight => RSequence::linear(WITNESS_LEN)?,
            CoefficientRule::Explicit => decay.r_witness.clone().ok_or_else(|| {
                Error::NotOfClass("decay verdict came back without a scaling witness".into())
            })?,
        };
        let prods = witness.product_sequence();
        let mut ln_bound = f64::NEG_INFINITY;
        for (k, c) in &self.coefficients {
            let j = mindex::abs(k) as usize;
            if j > prods.n() {
                return Err(Error::PrefixTooShort(format!(
                    "scaling witness stores {} orders, table reaches {}",
                    prods.n(),
                    j
                )));
            }
            let v = c.norm().ln() + prods.log_r(j) + weights.log_m(j);
            if v > ln_bound {
                ln_bound = v;
            }
        }
        let bound = ln_bound.exp();
        for (k, c) in &self.coefficients {
            let j = mindex::abs(k) as usize;
            let lhs = c.norm().ln() + prods.log_r(j) + weights.log_m(j);
            if lhs > ln_bound + CERT_LOG_SLACK {
                return Err(Error::NotOfClass(format!(
                    "certificate re-verification failed at index {k:?}"
                )));
            }
        }
        let cert = ClassCertificate {
            bound,
            witness,
            decay,
        };
        self.certificate = Some(cert.clone());
        Ok(cert)
    }

    /// `P(D) phi = sum_k c_k D^k phi`, exact in the element algebra.
    pub fn apply_to_function(&self, phi: &Element) -> Result<Element> {
        if phi.dim() != self.d {
            return Err(Error::OutOfRange(format!(
                "function has dimension {}, operator has {}",
                phi.dim(),
                self.d
            )));
        }
        if self.d == 1 && !self.finite_order {
            if let Some(img) = self.bundle_image(phi)? {
                return Ok(img);
            }
        }
        let mut acc = Element::zero(self.d);
        for (k, c) in &self.coefficients {
            acc = acc.add(&phi.differentiate(k)?.scale(*c))?;
        }
        Ok(acc)
    }

    /// One-dimensional image as derivative bundles. Canonicalized high-order
    /// numerators round (their integer coefficients outgrow f64's exact
    /// range past order twelve), so truncated infinite-order images are
    /// built as bundles instead, which evaluate at roundoff accuracy at any
    /// order. The complex derivative convention splits into an even part
    /// ((1/i)^k real) and an odd part (pure imaginary), each a bundle with
    /// real coefficients.
    fn bundle_image(&self, phi: &Element) -> Result<Option<Element>> {
        if self.coefficients.values().any(|c| c.im != 0.0) {
            return Ok(None);
        }
        let k_max = self
            .coefficients
            .keys()
            .map(|k| k[0] as usize)
            .max()
            .unwrap_or(0);
        let mut even = vec![0.0; k_max + 1];
        let mut odd = vec![0.0; k_max + 1];
        for (k, c) in &self.coefficients {
            let j = k[0] as usize;
            // (1/i)^j = (-i)^j cycles +1, -i, -1, +i.
            match j % 4 {
                0 => even[j] = c.re,
                1 => odd[j] = -c.re,
                2 => even[j] = -c.re,
                _ => odd[j] = c.re,
            }
        }
        while even.last() == Some(&0.0) {
            even.pop();
        }
        while odd.last() == Some(&0.0) {
            odd.pop();
        }
        let mut terms = Vec::new();
        for t in phi.terms() {
            let base = &t.axes[0];
            if !even.is_empty() {
                terms.push(Term {
                    coef: t.coef,
                    axes: vec![vec![Prim::Bundle1 {
                        coefs: even.clone(),
                        base: base.clone(),
                    }]],
                });
            }
            if !odd.is_empty() {
                terms.push(Term {
                    coef: t.coef * C64::i(),
                    axes: vec![vec![Prim::Bundle1 {
                        coefs: odd.clone(),
                        base: base.clone(),
                    }]],
                });
            }
        }
        Element::new(1, terms).map(Some)
    }

    /// The operator `P(-D)`: odd total orders flip sign.
    pub fn adjoint(&self) -> Self {
        let coefficients = self
            .coefficients
            .iter()
            .map(|(k, c)| {
                let sign = if mindex::abs(k) % 2 == 0 { 1.0 } else { -1.0 };
                (k.clone(), c * sign)
            })
            .collect();
        UltradiffOperator {
            d: self.d,
            k_op: self.k_op,
            coefficients,
            finite_order: self.finite_order,
            rule: self.rule,
            weights: self.weights.clone(),
            certificate: self.certificate.clone(),
        }
    }

    /// `P(D) T` term by term: point masses gain derivative orders,
    /// densities are differentiated as functions, polynomial terms are
    /// differentiated axis by axis. A table that stands for a truncated
    /// series is refused on polynomial terms: the dropped tail would act on
    /// an unbounded function with nothing to control it.
    pub fn apply_to_distribution(&self, u: &Ultradistribution) -> Result<Ultradistribution> {
        if u.dim() != self.d {
            return Err(Error::OutOfRange(format!(
                "distribution has dimension {}, operator has {}",
                u.dim(),
                self.d
            )));
        }
        if !self.finite_order && !u.poly_terms().is_empty() {
            return Err(Error::UnsupportedCombination(
                "truncated series applied to a polynomial term; only genuinely finite tables act there"
                    .into(),
            ));
        }
        let mut out = Ultradistribution::zero(self.d);
        for pt in u.point_terms() {
            for (k, c) in &self.coefficients {
                let order = mindex::add(&pt.order, k);
                out = out.with_point(pt.coef * c, &order, &pt.location)?;
            }
        }
        for e in u.density_terms() {
            let image = self.apply_to_function(e)?;
            if !image.is_zero() {
                out = out.with_density(image)?;
            }
        }
        for pt in u.poly_terms() {
            for (k, c) in &self.coefficients {
                let mut axes = Vec::with_capacity(self.d);
                let mut vanished = false;
                for (m, p) in pt.axes.iter().enumerate() {
                    let mut q = p.clone();
                    for _ in 0..k[m] {
                        q = q.derivative();
                    }
                    if q.is_zero() {
                        vanished = true;
                        break;
                    }
                    axes.push(q);
                }
                if vanished {
                    continue;
                }
                let coef = pt.coef * c * inv_i_pow(mindex::abs(k));
                out = out.with_poly(coef, &axes)?;
            }
        }
        Ok(out)
    }

    /// `P(-D)` applied in the first block of variables of a function on the
    /// doubled space: `sum_k c_k (-1)^{|k|} D_x^k f(x, y)`.
    pub fn apply_adjoint_first_block(&self, f: &Func) -> Result<Func> {
        if f.dim() != 2 * self.d {
            return Err(Error::OutOfRange(format!(
                "doubled-space function has dimension {}, expected {}",
                f.dim(),
                2 * self.d
            )));
        }
        let mut parts = Vec::with_capacity(self.coefficients.len());
        for (k, c) in &self.coefficients {
            let sign = if mindex::abs(k) % 2 == 0 { 1.0 } else { -1.0 };
            let mut ext = k.clone();
            ext.extend(mindex::zeros(self.d));
            parts.push((c * sign, f.differentiate(&ext)?));
        }
        Ok(Func::sum(parts).simplified())
    }

    /// The correction left over when `P(-D_x)` is pulled through a window
    /// on the doubled space:
    /// `P(-D_x)(w phi^diag) = w P(-D_x) phi^diag + correction`.
    /// Expanding the product rule and collecting by the window derivative
    /// gives, for each nonzero `i` with `|i| + |b| <= trunc`,
    /// `(D_x^i w) * c_{b+i} (-1)^{|b+i|} C(b+i, i) (D^b phi)^diag`.
    pub fn nu_correction(&self, phi: &Element, window: &Element, trunc: u32) -> Result<Func> {
        let d = self.d;
        if phi.dim() != d {
            return Err(Error::OutOfRange(format!(
                "test function has dimension {}, operator has {}",
                phi.dim(),
                d
            )));
        }
        if window.dim() != 2 * d {
            return Err(Error::OutOfRange(format!(
                "window has dimension {}, doubled space needs {}",
                window.dim(),
                2 * d
            )));
        }
        let cap = trunc.min(self.k_op);
        let mut branches: Vec<(C64, Func)> = Vec::new();
        for i in mindex::graded(d, cap) {
            let ai = mindex::abs(&i);
            if ai == 0 {
                continue;
            }
            let mut ext = i.clone();
            ext.extend(mindex::zeros(d));
            let dwin = window.differentiate(&ext)?;
            if dwin.is_zero() {
                continue;
            }
            let mut inner: Vec<(C64, Func)> = Vec::new();
            for beta in mindex::graded(d, cap - ai) {
                let k = mindex::add(&beta, &i);
                let Some(c) = self.coefficients.get(&k) else {
                    continue;
                };
                let sign = if mindex::abs(&k) % 2 == 0 { 1.0 } else { -1.0 };
                let dphi = phi.differentiate(&beta)?;
                if dphi.is_zero() {
                    continue;
                }
                inner.push((c * sign * mindex::binom(&k, &i), Func::Diag(dphi)));
            }
            if inner.is_empty() {
                continue;
            }
            branches.push((
                C64::new(1.0, 0.0),
                Func::Prod(vec![Func::Elem(dwin), Func::Sum(inner)]),
            ));
        }
        if branches.is_empty() {
            return Ok(Func::zero(2 * d));
        }
        Ok(Func::Sum(branches).simplified())
    }
}

/// Largest pointwise gap, over the given samples, of the window product
/// rule identity completed by [`UltradiffOperator::nu_correction`]. Exact
/// algebra should push this to rounding noise.
pub fn nu_identity_gap(
    op: &UltradiffOperator,
    phi: &Element,
    window: &Element,
    samples: &[Vec<f64>],
) -> Result<f64> {
    let base = Func::Prod(vec![
        Func::Elem(window.clone()),
        Func::Diag(phi.clone()),
    ]);
    let lhs = op.apply_adjoint_first_block(&base)?;
    let moved = op.apply_adjoint_first_block(&Func::Diag(phi.clone()))?;
    let windowed = Func::Prod(vec![Func::Elem(window.clone()), moved]);
    let nu = op.nu_correction(phi, window, op.order_bound())?;
    let mut gap = 0.0f64;
    for x in samples {
        let g = (lhs.eval(x) - windowed.eval(x) - nu.eval(x)).norm();
        if g > gap {
            gap = g;
        }
    }
    Ok(gap)
}

/// Uniform grid over a box, for pointwise identity checks.
pub fn sample_grid(bx: &[(f64, f64)], per_axis: usize) -> Vec<Vec<f64>> {
    let steps = per_axis.max(2);
    let mut points = vec![Vec::new()];
    for &(lo, hi) in bx {
        let mut next = Vec::with_capacity(points.len() * steps);
        for base in &points {
            for s in 0..steps {
                let t = s as f64 / (steps - 1) as f64;
                let mut p = base.clone();
                p.push(lo + t * (hi - lo));
                next.push(p);
            }
        }
        points = next;
    }
    points
}

/// Controls for the three-leg exchange probe.
#[derive(Debug, Clone)]
pub struct ExchangeConfig {
    pub n_max: usize,
    pub tol_q: f64,
    pub par: Parallelism,
}

impl Default for ExchangeConfig {
    fn default() -> Self {
        ExchangeConfig {
            n_max: 8,
            tol_q: 1e-9,
            par: Parallelism::Auto,
        }
    }
}

/// One exchange leg: which side carried the operator, and its sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ExchangeLeg {
    pub label: String,
    pub run: ModeRun,
}

/// Outcome of the three-leg exchange probe.
#[derive(Debug, Clone, Serialize)]
pub struct ExchangeReport {
    pub legs: Vec<ExchangeLeg>,
    pub all_converged: bool,
    /// Largest pairwise distance between leg limits, when all converged.
    pub spread: Option<f64>,
    /// Allowed spread: a quadrature multiple plus any dropped tail.
    pub tolerance: f64,
    /// Estimated contribution of the truncated-away series tail; `None`
    /// for genuinely finite tables.
    pub dropped_tail: Option<f64>,
    pub within: bool,
}

/// Compares `<S * T, P(-D) phi>`, `<(P(D) S) * T, phi>`, and
/// `<S * (P(D) T), phi>` through the plane-window sequential engine.
pub fn exchange_check(
    op: &UltradiffOperator,
    s: &Ultradistribution,
    t: &Ultradistribution,
    phi: &Element,
    units: &ConvolutionUnits,
    cfg: &ExchangeConfig,
) -> Result<ExchangeReport> {
    let d = op.dim();
    if s.dim() != d || t.dim() != d || phi.dim() != d {
        return Err(Error::OutOfRange(
            "exchange probe needs factors, test function, and operator in one dimension".into(),
        ));
    }
    let psi = op.adjoint().apply_to_function(phi)?;
    let ps = op.apply_to_distribution(s)?;
    let pt = op.apply_to_distribution(t)?;
    let jobs: Vec<(String, Ultradistribution, Ultradistribution, Element)> = vec![
        ("operator_on_test".into(), s.clone(), t.clone(), psi),
        ("operator_on_left_factor".into(), ps, t.clone(), phi.clone()),
        ("operator_on_right_factor".into(), s.clone(), pt, phi.clone()),
    ];
    let runs = map_collect(
        &jobs,
        |job| {
            convolvability_sequence(
                &job.1,
                &job.2,
                &job.3,
                ConvolutionMode::Epsilon,
                units,
                cfg.n_max,
                cfg.tol_q,
            )
        },
        cfg.par,
    );
    let mut legs = Vec::with_capacity(jobs.len());
    for (job, run) in jobs.iter().zip(runs) {
        legs.push(ExchangeLeg {
            label: job.0.clone(),
            run: run?,
        });
    }
    let all_converged = legs.iter().all(|l| l.run.diagnostics.converged);
    let spread = if all_converged {
        let limits: Vec<C64> = legs
            .iter()
            .filter_map(|l| l.run.diagnostics.limit)
            .collect();
        let mut worst = 0.0f64;
        for i in 0..limits.len() {
            for j in i + 1..limits.len() {
                worst = worst.max((limits[i] - limits[j]).norm());
            }
        }
        Some(worst)
    } else {
        None
    };
    let dropped_tail = if op.is_finite_order() {
        None
    } else {
        Some(dropped_tail_estimate(op, s, t, phi, cfg.par, cfg.tol_q)?)
    };
    let tolerance = EXCHANGE_TOL_FACTOR * cfg.tol_q + dropped_tail.unwrap_or(0.0);
    let within = matches!(spread, Some(sp) if sp <= tolerance);
    Ok(ExchangeReport {
        legs,
        all_converged,
        spread,
        tolerance,
        dropped_tail,
        within,
    })
}

/// Largest derivative order whose pointwise sups are trusted: past this,
/// evaluating the stored derivative polynomials in f64 is dominated by
/// cancellation noise near the support edge.
const RELIABLE_SUP_ORDER: u32 = 12;

/// Bounds the contribution of the series tail dropped by the truncation.
/// Derivative sups of the test function are measured on a reliable prefix
/// and extended through the class envelope `sup|D^m phi| <= b0 h^m M_m`,
/// with the rate `h` witnessed on that prefix; standing on that envelope,
/// each missing order `j` contributes at most
/// `count_d(j) * max|c_j| * b0 h^(j+km) M_(j+km)` against the factor
/// masses (`km` collects the point-mass derivative orders), and the
/// remainder past the sampled window is closed off geometrically. Doubled,
/// because two truncated quantities are compared.
fn dropped_tail_estimate(
    op: &UltradiffOperator,
    s: &Ultradistribution,
    t: &Ultradistribution,
    phi: &Element,
    par: Parallelism,
    tol_q: f64,
) -> Result<f64> {
    let weights = op.weights.as_ref().ok_or_else(|| {
        Error::UnsupportedCombination("tail estimate needs the defining weight table".into())
    })?;
    let d = op.dim();
    let point_order = |u: &Ultradistribution| {
        u.point_terms()
            .iter()
            .map(|p| mindex::abs(&p.order))
            .max()
            .unwrap_or(0)
    };
    let km = point_order(s) + point_order(t);
    let top = op.order_bound() + TAIL_ORDERS + km;
    if (weights.n() as u32) < top {
        return Err(Error::PrefixTooShort(format!(
            "weight table stores {} orders, tail estimate needs {}",
            weights.n(),
            top
        )));
    }
    let table = DerivativeTable::build(&Func::Elem(phi.clone()), RELIABLE_SUP_ORDER)?;
    let mut peak = vec![0.0f64; RELIABLE_SUP_ORDER as usize + 1];
    for m in 0..=RELIABLE_SUP_ORDER {
        for k in mindex::of_degree(d, m) {
            let f = table
                .get(&k)
                .ok_or_else(|| Error::OutOfRange("derivative table missed an index".into()))?;
            let sup = sup_abs(f, None, None, par)?.value;
            let slot = &mut peak[m as usize];
            if sup > *slot {
                *slot = sup;
            }
        }
    }
    let b0 = peak[0];
    if b0 == 0.0 {
        return Ok(0.0);
    }
    let ln_b0 = b0.ln();
    let mut ln_h = 0.0f64;
    for (m, b) in peak.iter().enumerate().skip(1) {
        if *b > 0.0 {
            let implied = (b.ln() - ln_b0 - weights.log_m(m)) / m as f64;
            ln_h = ln_h.max(implied);
        }
    }
    let mut sum = 0.0f64;
    let mut prev = 0.0f64;
    let mut ratio = 0.0f64;
    for j in op.order_bound() + 1..=op.order_bound() + TAIL_ORDERS {
        let count = mindex::of_degree(d, j).len() as f64;
        let ln_max_c = mindex::of_degree(d, j)
            .iter()
            .map(|k| -(ln_multi_factorial(k) + weights.log_m(j as usize)))
            .fold(f64::NEG_INFINITY, f64::max);
        let ln_envelope = ln_b0 + f64::from(j + km) * ln_h + weights.log_m((j + km) as usize);
        let term = count * (ln_max_c + ln_envelope).exp();
        if prev > 0.0 && term > 0.0 {
            ratio = term / prev;
        }
        sum += term;
        prev = term;
    }
    if ratio >= 0.9 {
        return Err(Error::TruncationGuard(format!(
            "dropped-tail terms stopped contracting (last ratio {ratio:.3})"
        )));
    }
    let closure = if ratio > 0.0 {
        prev * ratio / (1.0 - ratio)
    } else {
        0.0
    };
    let mass = s.action_mass(tol_q)? * t.action_mass(tol_q)?;
    Ok(2.0 * mass * (sum + closure))
}

/// Controls for the correction-size probe.
#[derive(Debug, Clone)]
pub struct NuBoundConfig {
    /// Window indices swept.
    pub n_max: usize,
    /// Total-order truncation of the correction used for pairings.
    pub trunc: u32,
    /// Total-order truncation of the correction used for seminorm rows.
    pub sup_trunc: u32,
    /// Largest first-block derivative order in the seminorm rows.
    pub j_max: u32,
    /// Quadrature tolerance for pairings.
    pub tol_q: f64,
    /// Largest order sampled by the combinatorial spot checks.
    pub spot_order: u32,
    pub par: Parallelism,
}

impl Default for NuBoundConfig {
    fn default() -> Self {
        NuBoundConfig {
            n_max: 4,
            trunc: 12,
            sup_trunc: 5,
            j_max: 5,
            tol_q: 1e-8,
            spot_order: 12,
            par: Parallelism::Auto,
        }
    }
}

/// One seminorm row: weighted sup of the correction at one window index.
#[derive(Debug, Clone, Serialize)]
pub struct NuSupRow {
    pub n: usize,
    pub value: f64,
    pub argmax_order: u32,
}

/// One pairing row: the correction against the factor tensor.
#[derive(Debug, Clone, Serialize)]
pub struct NuPairRow {
    pub n: usize,
    pub value: C64,
    pub exact_zero: bool,
}

/// One sampled inequality family.
#[derive(Debug, Clone, Serialize)]
pub struct SpotCheck {
    pub label: String,
    pub worst_ratio: f64,
    pub holds: bool,
    pub samples: usize,
}

/// Everything the correction-size probe measured.
#[derive(Debug, Clone, Serialize)]
pub struct NuBoundReport {
    pub sup_rows: Vec<NuSupRow>,
    pub sup_stabilized: bool,
    pub pair_rows: Vec<NuPairRow>,
    /// First window index from which every pairing is exactly zero.
    pub vanished_from: Option<usize>,
    pub spot_checks: Vec<SpotCheck>,
    /// Cut applied to the combined scaling sequence before rescaling.
    pub shift_cut: f64,
    pub shifted_first: f64,
    /// First entries after dividing by `8H` and `16H^2`; both must stay
    /// above one for the rescaled sequences to remain in class.
    pub scaled_first: f64,
    pub scaled_twice_first: f64,
}

/// Measures the window correction three ways: its weighted derivative sups
/// stay bounded along the window family, its pairings against the factor
/// tensor die out (exactly, once supports separate), and the combinatorial
/// inequalities behind those facts hold on sampled tuples.
pub fn nu_bound_check(
    op: &UltradiffOperator,
    s: &Ultradistribution,
    t: &Ultradistribution,
    phi: &Element,
    tseq: &RSequence,
    weights: &WeightSequence,
    units: &ConvolutionUnits,
    cfg: &NuBoundConfig,
) -> Result<NuBoundReport> {
    let d = op.dim();
    if s.dim() != d || t.dim() != d || phi.dim() != d {
        return Err(Error::OutOfRange(
            "correction probe needs factors, test function, and operator in one dimension".into(),
        ));
    }
    let cert = op.certificate().ok_or_else(|| {
        Error::NotOfClass("certify the operator class before probing corrections".into())
    })?;
    // Combined scaling sequence: entrywise min of the seminorm scale and
    // the certificate witness, taken through its superadditive minorant,
    // then cut and rescaled. Successful construction already proves the
    // rescaled sequences stay in class; their first entries are reported.
    let m2 = weights.check_m2();
    let (_, h) = m2.witness_constants.ok_or_else(|| {
        Error::InvalidWeightTable("no near-submultiplicativity witness on the weight table".into())
    })?;
    let len = tseq.n().min(cert.witness.n());
    let combined: Vec<f64> = (0..=len)
        .map(|p| tseq.r(p).min(cert.witness.r(p)))
        .collect();
    let smin = RSequence::explicit(&combined, true)?;
    let minor = smin.minorant()?;
    let shift_cut = 16.0 * h * h;
    let shifted = minor.shift(shift_cut)?;
    let scaled = shifted.scale_lambda(1.0 / (8.0 * h))?;
    let scaled_twice = shifted.scale_lambda(1.0 / (16.0 * h * h))?;

    // (a) weighted first-block derivative sups along the window family
    let tprod = tseq.product_sequence();
    if (weights.n() as u32) < cfg.j_max || (tprod.n() as u32) < cfg.j_max {
        return Err(Error::PrefixTooShort(
            "seminorm scale or weight table shorter than the derivative rows".into(),
        ));
    }
    let mut sup_rows = Vec::with_capacity(cfg.n_max);
    for n in 1..=cfg.n_max {
        let window = units.plane.member(n)?;
        let nu = op.nu_correction(phi, &window, cfg.sup_trunc)?;
        if nu.is_identically_zero() {
            sup_rows.push(NuSupRow {
                n,
                value: 0.0,
                argmax_order: 0,
            });
            continue;
        }
        let mut best = 0.0f64;
        let mut arg = 0u32;
        for j in 0..=cfg.j_max {
            let mut ext = mindex::zeros(2 * d);
            ext[0] = j;
            let dj = nu.differentiate(&ext)?;
            if dj.is_identically_zero() {
                continue;
            }
            let region = dj.inferred_box(&vec![None; 2 * d]).ok_or_else(|| {
                Error::NoCompactDomain("correction term lost its bounding box".into())
            })?;
            let sup = sup_abs(&dj, Some(&region), None, cfg.par)?.value;
            let v = sup / (tprod.r(j as usize) * weights.m(j as usize));
            if v > best {
                best = v;
                arg = j;
            }
        }
        sup_rows.push(NuSupRow {
            n,
            value: best,
            argmax_order: arg,
        });
    }
    let first_positive = sup_rows.iter().map(|r| r.value).find(|v| *v > 0.0);
    if let Some(base) = first_positive {
        if let Some(last) = sup_rows.last() {
            let monotone = sup_rows.windows(2).all(|w| w[1].value >= w[0].value);
            if monotone && last.value > SUP_GROWTH_GUARD * base {
                return Err(Error::ClassViolation(format!(
                    "correction seminorm grows without settling: n={}, order k={}, value {:.3e}",
                    last.n, last.argmax_order, last.value
                )));
            }
        }
    }
    let sup_stabilized = match sup_rows.len() {
        0 | 1 => true,
        len => {
            let a = sup_rows[len - 2].value;
            let b = sup_rows[len - 1].value;
            (a - b).abs() <= 0.05 * b.max(a).max(1e-300)
        }
    };

    // (b) pairings against the factor tensor
    let mut pair_rows = Vec::with_capacity(cfg.n_max);
    for n in 1..=cfg.n_max {
        let window = units.plane.member(n)?;
        let nu = op.nu_correction(phi, &window, cfg.trunc)?;
        let value = if nu.is_identically_zero() {
            C64::new(0.0, 0.0)
        } else {
            tensor_pair(s, t, &nu, cfg.tol_q)?
        };
        let exact_zero = value.re == 0.0 && value.im == 0.0;
        pair_rows.push(NuPairRow {
            n,
            value,
            exact_zero,
        });
    }
    let vanished_from = (1..=pair_rows.len())
        .find(|&n| pair_rows[n - 1..].iter().all(|r| r.exact_zero));

    // (c) sampled inequalities
    let q = cfg.spot_order as usize;
    let mut spot_checks = Vec::with_capacity(4);

    let mut worst = 0.0f64;
    let mut samples = 0usize;
    for b in 0..=q as u32 {
        for i in 0..=q as u32 {
            let ratio = mindex::binom_u128(b + i, i) as f64 / (f64::from(b + i)).exp2();
            worst = worst.max(ratio);
            samples += 1;
        }
    }
    spot_checks.push(SpotCheck {
        label: "binomial_two_power".into(),
        worst_ratio: worst,
        holds: worst <= 1.0 + 1e-12,
        samples,
    });

    let rprod = shifted.product_sequence();
    if rprod.n() < 2 * q {
        return Err(Error::PrefixTooShort(format!(
            "shifted scaling sequence stores {} orders, spot checks need {}",
            rprod.n(),
            2 * q
        )));
    }
    let mut worst = 0.0f64;
    let mut samples = 0usize;
    for a in 0..=q {
        for b in 0..=q {
            for i in 0..=q {
                for j in 0..=i {
                    let lhs = rprod.log_r(a + i - j) + rprod.log_r(b + j);
                    let rhs = rprod.log_r(a)
                        + rprod.log_r(b)
                        + rprod.log_r(i)
                        + ((a + i + b + j) as f64) * std::f64::consts::LN_2;
                    worst = worst.max((lhs - rhs).exp());
                    samples += 1;
                }
            }
        }
    }
    spot_checks.push(SpotCheck {
        label: "shifted_product_doubling".into(),
        worst_ratio: worst,
        holds: worst <= 1.0 + 1e-12,
        samples,
    });

    if weights.n() < 2 * q {
        return Err(Error::PrefixTooShort(format!(
            "weight table stores {} orders, spot checks need {}",
            weights.n(),
            2 * q
        )));
    }
    let (a_const, h_const) = (m2.witness_constants.unwrap().0, h);
    let mut worst = 0.0f64;
    let mut samples = 0usize;
    for b in 0..=q {
        for i in 0..=q {
            let lhs = weights.log_m(b + i);
            let rhs = a_const.ln()
                + ((b + i) as f64) * h_const.ln()
                + weights.log_m(b)
                + weights.log_m(i);
            worst = worst.max((lhs - rhs).exp());
            samples += 1;
        }
    }
    spot_checks.push(SpotCheck {
        label: "weight_near_submultiplicative".into(),
        worst_ratio: worst,
        holds: worst <= 1.0 + 1e-12,
        samples,
    });

    let uprod = cert.witness.product_sequence();
    let mut worst = 0.0f64;
    let mut samples = 0usize;
    for (k, c) in op.coefficients() {
        let jk = mindex::abs(k) as usize;
        if jk > q || c.norm() == 0.0 {
            continue;
        }
        let ratio = (c.norm().ln() + uprod.log_r(jk) + weights.log_m(jk) - cert.bound.ln()).exp();
        worst = worst.max(ratio);
        samples += 1;
    }
    spot_checks.push(SpotCheck {
        label: "certificate_decay".into(),
        worst_ratio: worst,
        holds: worst <= 1.0 + 1e-9,
        samples,
    });

    Ok(NuBoundReport {
        sup_rows,
        sup_stabilized,
        pair_rows,
        vanished_from,
        spot_checks,
        shift_cut,
        shifted_first: shifted.r(1),
        scaled_first: scaled.r(1),
        scaled_twice_first: scaled_twice.r(1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rclass::RSequence;
    use crate::ultradist::pair;
    use crate::weights::WeightSequence;

    fn gevrey(n: usize) -> WeightSequence {
        WeightSequence::gevrey(2.0, n).unwrap()
    }

    fn bump(center: f64, radius: f64) -> Element {
        Element::standard_bump(&[center], &[radius]).unwrap()
    }

    #[test]
    fn identity_certifies_with_unit_bound() {
        let w = gevrey(64);
        let mut op = UltradiffOperator::identity(1).unwrap();
        let cert = op.certify_class(&w).unwrap();
        assert!((cert.bound - 1.0).abs() <= 1e-9);
        assert_eq!(cert.decay.verdict, DecayVerdict::RapidlyDecreasing);
        assert!(op.certificate().is_some());
    }

    #[test]
    fn inverse_factorial_rule_certifies() {
        let w = gevrey(64);
        let mut op = UltradiffOperator::inverse_factorial_weights(1, &w, 24).unwrap();
        assert_eq!(op.coefficients().len(), 25);
        assert!(!op.is_finite_order());
        let cert = op.certify_class(&w).unwrap();
        assert!((cert.bound - 1.0).abs() <= 1e-6);
        assert!(cert.witness.n() >= 1000);
    }

    #[test]
    fn constant_weighted_table_is_rejected() {
        let w = gevrey(64);
        let entries: Vec<(Vec<u32>, C64)> = (0..=24u32)
            .map(|k| (vec![k], C64::new(1.0 / w.m(k as usize), 0.0)))
            .collect();
        let mut op = UltradiffOperator::explicit(1, entries).unwrap();
        match op.certify_class(&w) {
            Err(Error::NotOfClass(msg)) => assert!(msg.contains("order")),
            other => panic!("expected a class rejection, got {other:?}"),
        }
    }

    #[test]
    fn second_order_action_matches_finite_differences() {
        let op = UltradiffOperator::explicit(
            1,
            vec![
                (vec![0], C64::new(1.0, 0.0)),
                (vec![2], C64::new(1.0, 0.0)),
            ],
        )
        .unwrap();
        let phi = bump(0.0, 1.0);
        let image = op.apply_to_function(&phi).unwrap();
        let x = 0.1;
        let h = 1e-3;
        let f = |v: f64| phi.eval(&[v]).re;
        let second = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
        // D^2 carries (1/i)^2 = -1, so the image is phi - phi''.
        let expected = f(x) - second;
        assert!((image.eval(&[x]).re - expected).abs() <= 1e-4);
        assert!(image.eval(&[x]).im.abs() <= 1e-12);
    }

    #[test]
    fn action_is_linear_on_the_element_algebra() {
        let op = UltradiffOperator::explicit(
            1,
            vec![
                (vec![1], C64::new(0.5, 0.25)),
                (vec![3], C64::new(-1.0, 2.0)),
            ],
        )
        .unwrap();
        let a = bump(0.0, 1.0);
        let b = bump(0.4, 0.7);
        let combo = a.add(&b.scale(C64::new(2.0, 0.0))).unwrap();
        let lhs = op.apply_to_function(&combo).unwrap();
        let rhs = op
            .apply_to_function(&a)
            .unwrap()
            .add(&op.apply_to_function(&b).unwrap().scale(C64::new(2.0, 0.0)))
            .unwrap();
        for i in 0..=20 {
            let x = -1.1 + 2.2 * i as f64 / 20.0;
            assert!((lhs.eval(&[x]) - rhs.eval(&[x])).norm() <= 1e-12);
        }
    }

    #[test]
    fn adjoint_negates_odd_orders() {
        let op = UltradiffOperator::explicit(
            1,
            vec![
                (vec![0], C64::new(1.0, 0.0)),
                (vec![1], C64::new(1.0, 0.0)),
                (vec![2], C64::new(1.0, 0.0)),
            ],
        )
        .unwrap();
        let adj = op.adjoint();
        assert_eq!(adj.coefficients()[&vec![0u32]], C64::new(1.0, 0.0));
        assert_eq!(adj.coefficients()[&vec![1u32]], C64::new(-1.0, 0.0));
        assert_eq!(adj.coefficients()[&vec![2u32]], C64::new(1.0, 0.0));
    }

    #[test]
    fn point_masses_gain_derivative_orders() {
        let op = UltradiffOperator::explicit(1, vec![(vec![1], C64::new(1.0, 0.0))]).unwrap();
        let s = Ultradistribution::delta(&[0.0]).unwrap();
        let image = op.apply_to_distribution(&s).unwrap();
        assert_eq!(image.point_terms().len(), 1);
        assert_eq!(image.point_terms()[0].order, vec![1]);
        assert_eq!(image.point_terms()[0].coef, C64::new(1.0, 0.0));
    }

    #[test]
    fn distribution_action_satisfies_duality() {
        let op = UltradiffOperator::explicit(
            1,
            vec![
                (vec![0], C64::new(1.0, 0.0)),
                (vec![2], C64::new(1.0, 0.0)),
            ],
        )
        .unwrap();
        let t = Ultradistribution::density(bump(0.0, 0.8));
        let phi = Func::Elem(bump(0.2, 0.9));
        let lhs = pair(&op.apply_to_distribution(&t).unwrap(), &phi, 1e-10).unwrap();
        let psi = Func::Elem(
            op.adjoint()
                .apply_to_function(&bump(0.2, 0.9))
                .unwrap(),
        );
        let rhs = pair(&t, &psi, 1e-10).unwrap();
        assert!((lhs - rhs).norm() <= 1e-8);
    }

    #[test]
    fn truncated_series_refuses_polynomial_terms() {
        let w = gevrey(64);
        let op = UltradiffOperator::inverse_factorial_weights(1, &w, 8).unwrap();
        let one = Ultradistribution::constant_one(1).unwrap();
        assert!(matches!(
            op.apply_to_distribution(&one),
            Err(Error::UnsupportedCombination(_))
        ));
    }

    #[test]
    fn exchange_legs_agree_for_point_masses() {
        let op = UltradiffOperator::explicit(1, vec![(vec![1], C64::new(1.0, 0.0))]).unwrap();
        let s = Ultradistribution::delta(&[0.2]).unwrap();
        let t = Ultradistribution::delta(&[0.3]).unwrap();
        let phi = bump(0.5, 1.0);
        let units = ConvolutionUnits::plateau_family(1, 6).unwrap();
        let cfg = ExchangeConfig {
            n_max: 6,
            tol_q: 1e-9,
            par: Parallelism::Auto,
        };
        let report = exchange_check(&op, &s, &t, &phi, &units, &cfg).unwrap();
        assert!(report.all_converged);
        assert!(report.within, "spread {:?}", report.spread);
        assert!(report.dropped_tail.is_none());
        // All legs equal i * phi'(0.5) under the normalized derivative.
        let h = 1e-4;
        let slope = (phi.eval(&[0.5 + h]).re - phi.eval(&[0.5 - h]).re) / (2.0 * h);
        let expected = C64::new(0.0, slope);
        for leg in &report.legs {
            let limit = leg.run.diagnostics.limit.unwrap();
            assert!(
                (limit - expected).norm() <= 1e-4,
                "{} gave {limit}",
                leg.label
            );
        }
    }

    #[test]
    fn truncated_exchange_stays_within_its_tail_budget() {
        let w = gevrey(64);
        let op = UltradiffOperator::inverse_factorial_weights(1, &w, 8).unwrap();
        let s = Ultradistribution::delta(&[0.2]).unwrap();
        let t = Ultradistribution::density(bump(0.1, 0.3));
        let phi = bump(0.3, 1.0);
        let units = ConvolutionUnits::plateau_family(1, 6).unwrap();
        let cfg = ExchangeConfig {
            n_max: 6,
            tol_q: 1e-9,
            par: Parallelism::Auto,
        };
        let report = exchange_check(&op, &s, &t, &phi, &units, &cfg).unwrap();
        assert!(report.all_converged);
        let tail = report.dropped_tail.unwrap();
        assert!(tail.is_finite() && tail > 0.0);
        assert!(tail <= 0.1, "tail {tail}");
        assert!(report.within, "spread {:?}", report.spread);
        // The estimate contracts fast as the truncation order grows.
        let op16 = UltradiffOperator::inverse_factorial_weights(1, &w, 16).unwrap();
        let tail16 =
            dropped_tail_estimate(&op16, &s, &t, &phi, Parallelism::Auto, 1e-9).unwrap();
        assert!(tail16 < tail * 1e-4, "tail16 {tail16} vs {tail}");
    }

    #[test]
    fn correction_vanishes_for_an_order_zero_table() {
        let op = UltradiffOperator::identity(1).unwrap();
        let units = ConvolutionUnits::plateau_family(1, 4).unwrap();
        let window = units.plane.member(1).unwrap();
        let nu = op.nu_correction(&bump(0.0, 1.0), &window, 12).unwrap();
        assert!(nu.is_identically_zero());
    }

    #[test]
    fn correction_completes_the_window_product_rule() {
        let op = UltradiffOperator::explicit(
            1,
            vec![
                (vec![0], C64::new(1.0, 0.0)),
                (vec![2], C64::new(1.0, 0.0)),
            ],
        )
        .unwrap();
        let units = ConvolutionUnits::plateau_family(1, 4).unwrap();
        let window = units.plane.member(1).unwrap();
        let phi = bump(0.0, 1.0);
        let samples = sample_grid(&[(-2.2, 2.2), (-2.2, 2.2)], 9);
        let gap = nu_identity_gap(&op, &phi, &window, &samples).unwrap();
        assert!(gap <= 1e-9, "gap {gap}");
    }

    #[test]
    fn correction_vanishes_where_the_window_is_flat() {
        let w = gevrey(64);
        let op = UltradiffOperator::inverse_factorial_weights(1, &w, 8).unwrap();
        let units = ConvolutionUnits::plateau_family(1, 4).unwrap();
        let window = units.plane.member(1).unwrap();
        let phi = bump(2.0, 1.0);
        let nu = op.nu_correction(&phi, &window, 8).unwrap();
        // Interior of the flat core: every window derivative is exactly zero.
        assert_eq!(nu.eval(&[0.2, -0.3]).norm(), 0.0);
        // Margin point whose diagonal lands inside the test support.
        assert!(nu.eval(&[1.5, 0.5]).norm() > 0.0);
    }

    #[test]
    fn correction_pairs_to_exact_zero_once_supports_separate() {
        let w = gevrey(64);
        let mut op = UltradiffOperator::inverse_factorial_weights(1, &w, 24).unwrap();
        op.certify_class(&w).unwrap();
        let s = Ultradistribution::delta(&[1.5]).unwrap();
        let t = Ultradistribution::density(bump(0.5, 0.4));
        let phi = bump(2.0, 1.0);
        let tseq = RSequence::linear(1024).unwrap();
        let units = ConvolutionUnits::plateau_family(1, 6).unwrap();
        let cfg = NuBoundConfig {
            n_max: 3,
            trunc: 8,
            sup_trunc: 4,
            j_max: 4,
            tol_q: 1e-8,
            spot_order: 12,
            par: Parallelism::Auto,
        };
        let report = nu_bound_check(&op, &s, &t, &phi, &tseq, &w, &units, &cfg).unwrap();
        assert!(!report.pair_rows[0].exact_zero);
        assert_eq!(report.vanished_from, Some(2));
        for check in &report.spot_checks {
            assert!(check.holds, "{} worst {}", check.label, check.worst_ratio);
            assert!(check.samples > 0);
        }
        assert_eq!(report.shift_cut, 256.0);
        assert!(report.shifted_first > 256.0);
        assert!(report.scaled_first > 1.0);
        assert!(report.scaled_twice_first > 1.0);
        assert!(report.sup_rows.iter().all(|r| r.value.is_finite()));
        assert!(report.sup_rows.iter().any(|r| r.value > 0.0));
    }

    #[test]
    fn bundle_image_agrees_with_explicit_canonical_image() {
        // Same coefficient table, two evaluation routes: the rule-built
        // operator applies as a derivative bundle, while an explicit copy
        // of its table expands through exact canonical derivatives.
        let w = gevrey(64);
        let rule_op = UltradiffOperator::inverse_factorial_weights(1, &w, 8).unwrap();
        let entries: Vec<(Vec<u32>, C64)> = rule_op
            .coefficients()
            .iter()
            .map(|(k, c)| (k.clone(), *c))
            .collect();
        let explicit_op = UltradiffOperator::explicit(1, entries).unwrap();
        assert!(!rule_op.is_finite_order());
        assert!(explicit_op.is_finite_order());
        let phi = bump(0.15, 0.9);
        let via_bundle = rule_op.apply_to_function(&phi).unwrap();
        let via_chain = explicit_op.apply_to_function(&phi).unwrap();
        for &x in &[-0.6, -0.2, 0.15, 0.4, 0.9] {
            let b = via_bundle.eval(&[x]);
            let c = via_chain.eval(&[x]);
            assert!(
                (b - c).norm() <= 1e-12 * (1.0 + c.norm()),
                "x={x}: bundle {b}, canonical {c}"
            );
        }
    }
}
