//! Monotone scaling sequences and their product sequences.
//!
//! An [`RSequence`] is a finite prefix r_0..r_N with r_0 = 1, nondecreasing
//! entries, and strict growth witnessed on the prefix (r_N > 1). Product
//! sequences R_p = r_0 r_1 ... r_p are kept in log domain. The module also
//! hosts the scaling and shift transforms, the minorant construction that
//! repairs a sequence into one whose product sequence obeys the doubling
//! bound R_{p+q} <= 2^{p+q} R_p R_q, and the exhaustive checkers for both
//! product inequalities.

use crate::error::{Error, Result};
use crate::weights::{Condition, ConditionReport};
use crate::LOG_REL_TOL;
use serde::{Deserialize, Serialize};

/// Family metadata for a scaling sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum RFamily {
    /// r_p = max(1, p).
    Linear,
    /// r_p = max(1, p^alpha).
    Power { alpha: f64 },
    /// r_p = 1 + ln(1 + p).
    Log,
    /// Caller-supplied table.
    Explicit,
}

/// Finite prefix of a nondecreasing sequence with r_0 = 1 and r_N > 1.
#[derive(Debug, Clone, PartialEq)]
pub struct RSequence {
    values: Vec<f64>,
    family: RFamily,
    /// Family-level claim that the sequence grows without bound; a finite
    /// prefix cannot decide this, so it is carried as metadata.
    declared_unbounded: bool,
}

impl RSequence {
    /// r_p = max(1, p) up to index n.
    pub fn linear(n: usize) -> Result<Self> {
        let values = (0..=n).map(|p| (p as f64).max(1.0)).collect();
        Self::validated(values, RFamily::Linear, true)
    }

    /// r_p = max(1, p^alpha) up to index n; alpha must be positive.
    pub fn power(alpha: f64, n: usize) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::ClassViolation(format!(
                "power family needs a positive exponent, got {alpha}"
            )));
        }
        let values = (0..=n)
            .map(|p| (p as f64).powf(alpha).max(1.0))
            .collect();
        Self::validated(values, RFamily::Power { alpha }, true)
    }

    /// r_p = 1 + ln(1 + p) up to index n.
    pub fn log(n: usize) -> Result<Self> {
        let values = (0..=n).map(|p| 1.0 + (1.0 + p as f64).ln()).collect();
        Self::validated(values, RFamily::Log, true)
    }

    /// Wraps a caller-supplied table; r_0 must equal 1.
    pub fn explicit(values: &[f64], declared_unbounded: bool) -> Result<Self> {
        Self::validated(values.to_vec(), RFamily::Explicit, declared_unbounded)
    }

    fn validated(mut values: Vec<f64>, family: RFamily, declared_unbounded: bool) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::PrefixTooShort(format!(
                "need entries r_0 and r_1 at least, got {} values",
                values.len()
            )));
        }
        if (values[0] - 1.0).abs() > 1e-12 {
            return Err(Error::ClassViolation(format!(
                "r_0 must be 1, got {}",
                values[0]
            )));
        }
        values[0] = 1.0;
        for p in 0..values.len() - 1 {
            if !values[p + 1].is_finite() || values[p + 1] < values[p] * (1.0 - 1e-14) {
                return Err(Error::ClassViolation(format!(
                    "sequence decreases at index {}: {} > {}",
                    p,
                    values[p],
                    values[p + 1]
                )));
            }
        }
        let last = *values.last().unwrap();
        if last <= 1.0 {
            return Err(Error::ClassViolation(format!(
                "no growth on the prefix: r_N = {last} does not exceed r_0 = 1"
            )));
        }
        Ok(RSequence {
            values,
            family,
            declared_unbounded,
        })
    }

    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn r(&self, p: usize) -> f64 {
        self.values[p]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn family(&self) -> &RFamily {
        &self.family
    }

    pub fn declared_unbounded(&self) -> bool {
        self.declared_unbounded
    }

    /// Scaled sequence: r'_0 = 1 and r'_p = lambda r_p for p >= 1.
    /// For lambda < 1 this stays in class only when lambda r_1 > 1.
    pub fn scale_lambda(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::ClassViolation(format!(
                "scale factor must be positive, got {lambda}"
            )));
        }
        if lambda < 1.0 && self.values[1] * lambda <= 1.0 {
            return Err(Error::ClassViolation(format!(
                "scaling by {lambda} pushes r_1 = {} to {} <= 1, leaving the class",
                self.values[1],
                self.values[1] * lambda
            )));
        }
        let mut values = vec![1.0];
        values.extend(self.values[1..].iter().map(|r| lambda * r));
        Self::validated(values, self.family.clone(), self.declared_unbounded)
    }

    /// Shifted sequence r'_p = r_{p + p0}, with p0 the smallest offset such
    /// that every shifted entry past index 0 exceeds `c`. The prefix
    /// shortens by p0.
    pub fn shift(&self, c: f64) -> Result<Self> {
        let n = self.n();
        let p0 = match (1..=n).find(|&p| self.values[p] > c) {
            Some(p) => p - 1,
            None => {
                return Err(Error::InsufficientPrefix(format!(
                    "no entry on the prefix exceeds {c}; extend the sequence"
                )))
            }
        };
        if p0 == 0 {
            return Ok(self.clone());
        }
        let mut values = vec![1.0];
        values.extend_from_slice(&self.values[p0 + 1..]);
        if values.len() < 2 || *values.last().unwrap() <= 1.0 {
            return Err(Error::InsufficientPrefix(format!(
                "shifting past {c} leaves fewer than two entries; extend the sequence"
            )));
        }
        Self::validated(values, self.family.clone(), self.declared_unbounded)
    }

    /// Nondecreasing minorant with nonincreasing r_p / p:
    /// r_p = p * min_{1 <= j <= p} (s_j / j). The output is dominated by
    /// `self`, and its product sequence satisfies the doubling bound
    /// because R_{p+q} / (R_p R_q) <= C(p+q, q) <= 2^{p+q}.
    pub fn minorant(&self) -> Result<Self> {
        let n = self.n();
        let mut values = Vec::with_capacity(n + 1);
        values.push(1.0);
        let mut min_ratio = f64::INFINITY;
        for p in 1..=n {
            min_ratio = min_ratio.min(self.values[p] / p as f64);
            values.push(p as f64 * min_ratio);
        }
        Self::validated(values, RFamily::Explicit, self.declared_unbounded)
    }

    /// Product sequence R_p = r_0 r_1 ... r_p, in log domain.
    pub fn product_sequence(&self) -> ProductSequence {
        let mut log_values = Vec::with_capacity(self.values.len());
        let mut acc = 0.0;
        for r in &self.values {
            acc += r.ln();
            log_values.push(acc);
        }
        ProductSequence {
            log_values,
            source: self.clone(),
        }
    }

    /// Exhaustive check of R_{p+q} <= 2^{p+q} R_p R_q over p + q <= N.
    pub fn check_doubling_product(&self) -> ConditionReport {
        self.product_sequence().check_doubling_product()
    }
}

/// Cumulative products of an [`RSequence`], held as log R_p.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductSequence {
    log_values: Vec<f64>,
    source: RSequence,
}

impl ProductSequence {
    pub fn n(&self) -> usize {
        self.log_values.len() - 1
    }

    /// log R_p.
    pub fn log_r(&self, p: usize) -> f64 {
        self.log_values[p]
    }

    /// R_p as a plain double; overflows to +inf far beyond the double range.
    pub fn r(&self, p: usize) -> f64 {
        self.log_values[p].exp()
    }

    /// log R_{|k|} for a multi-index.
    pub fn log_multiindex(&self, k: &[u32]) -> Result<f64> {
        let total = crate::mindex::abs(k) as usize;
        if total > self.n() {
            return Err(Error::OutOfRange(format!(
                "multi-index order {total} exceeds stored prefix {}",
                self.n()
            )));
        }
        Ok(self.log_values[total])
    }

    pub fn source(&self) -> &RSequence {
        &self.source
    }

    /// Superadditivity R_p R_q <= R_{p+q} over p + q <= N. The multi-index
    /// form R_{|k|} R_{|l|} <= R_{|k+l|} reduces to these scalar instances
    /// for every dimension, so `d` only documents the intended reading.
    pub fn check_superadditive(&self, _d: usize) -> ConditionReport {
        let n = self.n();
        for p in 0..=n {
            for q in 0..=(n - p) {
                let lhs = self.log_values[p] + self.log_values[q];
                let rhs = self.log_values[p + q];
                if lhs > rhs + log_tol(lhs, rhs) {
                    return ConditionReport {
                        condition: Condition::Superadditive,
                        prefix_len: n,
                        holds_on_prefix: false,
                        witness_constants: None,
                        first_violation: Some(vec![p, q]),
                    };
                }
            }
        }
        ConditionReport {
            condition: Condition::Superadditive,
            prefix_len: n,
            holds_on_prefix: true,
            witness_constants: None,
            first_violation: None,
        }
    }

    /// Doubling bound R_{p+q} <= 2^{p+q} R_p R_q over p + q <= N.
    pub fn check_doubling_product(&self) -> ConditionReport {
        let n = self.n();
        let ln2 = std::f64::consts::LN_2;
        for p in 0..=n {
            for q in 0..=(n - p) {
                let lhs = self.log_values[p + q];
                let rhs = (p + q) as f64 * ln2 + self.log_values[p] + self.log_values[q];
                if lhs > rhs + log_tol(lhs, rhs) {
                    return ConditionReport {
                        condition: Condition::DoublingProduct,
                        prefix_len: n,
                        holds_on_prefix: false,
                        witness_constants: None,
                        first_violation: Some(vec![p, q]),
                    };
                }
            }
        }
        ConditionReport {
            condition: Condition::DoublingProduct,
            prefix_len: n,
            holds_on_prefix: true,
            witness_constants: Some((1.0, 2.0)),
            first_violation: None,
        }
    }
}

fn log_tol(a: f64, b: f64) -> f64 {
    LOG_REL_TOL * (1.0 + a.abs().max(b.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_product_sequence_is_factorial() {
        let r = RSequence::linear(20).unwrap();
        let big = r.product_sequence();
        let mut log_fact = 0.0;
        for p in 1..=20usize {
            log_fact += (p as f64).ln();
            assert!((big.log_r(p) - log_fact).abs() < 1e-12 * (1.0 + log_fact));
        }
    }

    #[test]
    fn flat_sequence_is_rejected() {
        assert!(RSequence::explicit(&[1.0, 1.0, 1.0], true).is_err());
    }

    #[test]
    fn scale_below_one_needs_headroom_at_r1() {
        let r = RSequence::linear(16).unwrap();
        assert!(r.scale_lambda(0.5).is_err());
        let s = RSequence::explicit(&[1.0, 3.0, 4.0, 5.0], true).unwrap();
        let scaled = s.scale_lambda(0.5).unwrap();
        assert_eq!(scaled.r(0), 1.0);
        assert!((scaled.r(1) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn shift_drops_entries_at_or_below_the_cut() {
        let r = RSequence::linear(64).unwrap();
        let shifted = r.shift(16.0).unwrap();
        assert_eq!(shifted.r(0), 1.0);
        for p in 1..=shifted.n() {
            assert_eq!(shifted.r(p), (p + 16) as f64);
            assert!(shifted.r(p) > 16.0);
        }
        let noop = r.shift(0.5).unwrap();
        assert_eq!(noop.values(), r.values());
        assert!(r.shift(1e6).is_err());
    }

    #[test]
    fn minorant_is_dominated_monotone_and_doubling() {
        let mut vals = vec![1.0];
        for p in 1..=9 {
            vals.push(1.0 + 0.1 * p as f64);
        }
        for p in 10..=40u32 {
            vals.push(p as f64 + 1.0);
        }
        let s = RSequence::explicit(&vals, true).unwrap();
        let r = s.minorant().unwrap();
        for p in 0..=s.n() {
            assert!(r.r(p) <= s.r(p) * (1.0 + 1e-14), "domination at {p}");
        }
        for p in 1..s.n() {
            let a = r.r(p) / p as f64;
            let b = r.r(p + 1) / (p + 1) as f64;
            assert!(b <= a * (1.0 + 1e-14), "ratio rises at {p}");
        }
        assert!(r.check_doubling_product().holds_on_prefix);
    }

    #[test]
    fn geometric_sequence_fails_doubling_at_two_three() {
        let vals: Vec<f64> = (0..=20).map(|p| (p as f64).exp2()).collect();
        let mut fixed = vals.clone();
        fixed[0] = 1.0;
        let r = RSequence::explicit(&fixed, true).unwrap();
        let rep = r.check_doubling_product();
        assert!(!rep.holds_on_prefix);
        assert_eq!(rep.first_violation, Some(vec![2, 3]));
    }

    #[test]
    fn superadditivity_holds_for_valid_sequences() {
        let r = RSequence::log(48).unwrap();
        let rep = r.product_sequence().check_superadditive(3);
        assert!(rep.holds_on_prefix, "{rep:?}");
    }
}
