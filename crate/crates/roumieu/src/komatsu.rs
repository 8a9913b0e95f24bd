//! Growth and decay certification for nonnegative sequences.
//!
//! Two dual questions about a finite prefix (a_k): is it dominated by some
//! geometric h^k (slow increase), and does it die faster than every 1/h^k
//! (rapid decay)? Each positive answer is returned with a concrete witness,
//! either a geometric rate h or a scaling sequence whose cumulative products
//! R_k absorb the sequence, and every witness is re-verified by direct
//! evaluation of the sup over the stored prefix before the certificate is
//! emitted. Finite data cannot settle an asymptotic question, so verdicts
//! are three-valued and `inconclusive` is an honest output.

use crate::error::{Error, Result};
use crate::mindex;
use crate::rclass::RSequence;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthVerdict {
    SlowlyIncreasing,
    NotSlowlyIncreasing,
    Inconclusive,
}

/// Certificate for the slow-increase question.
#[derive(Debug, Clone)]
pub struct GrowthCertificate {
    pub verdict: GrowthVerdict,
    /// Power-of-two rate with sup_k a_k / h^k <= bound on the prefix.
    pub h_witness: Option<f64>,
    /// Scaling sequence with sup_k a_k / R_k <= bound on the prefix.
    pub r_witness: Option<RSequence>,
    /// Verified sup for both witnesses.
    pub bound: Option<f64>,
    /// On a negative verdict: prefix indices along which the sequence pulls
    /// away from its best geometric fit.
    pub escaping: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayVerdict {
    RapidlyDecreasing,
    NotRapidlyDecreasing,
    Inconclusive,
}

/// Certificate for the rapid-decay question.
#[derive(Debug, Clone)]
pub struct DecayCertificate {
    pub verdict: DecayVerdict,
    /// Scaling sequence with sup_k R_k a_k <= bound on the prefix.
    pub r_witness: Option<RSequence>,
    pub bound: Option<f64>,
    /// Smallest grid rate whose amplification h^k a_k escapes on the prefix.
    pub failing_h: Option<f64>,
}

/// Joint report tying both certificates together.
#[derive(Debug, Clone)]
pub struct DualityReport {
    pub growth: GrowthCertificate,
    pub decay: DecayCertificate,
    /// False only when the two verdicts assert logically incompatible facts.
    pub consistent: bool,
    /// Whether re-reading the sequence over d-dimensional multi-indices
    /// (value a_{|k|}) reproduces the scalar sups for the emitted witnesses.
    pub dim_consistent: bool,
}

const GRID_MAX_EXP: u32 = 20;
/// Tail slope above this counts as genuine escape.
const ESCAPE_SLOPE: f64 = 0.01;
/// Second-difference floor: anything below it means the amplified sequence
/// is concave (peaked), not escaping.
const CONCAVITY_FLOOR: f64 = -1e-3;
/// Fitted log-log exponent above this marks superlinear log-growth.
const SUPERLINEAR_EXPONENT: f64 = 1.1;

fn validate(a: &[f64]) -> Result<()> {
    if a.len() < 16 {
        return Err(Error::PrefixTooShort(format!(
            "need at least 16 entries, got {}",
            a.len()
        )));
    }
    for (k, v) in a.iter().enumerate() {
        if !v.is_finite() || *v < 0.0 {
            return Err(Error::OutOfRange(format!(
                "entry {k} must be finite and nonnegative, got {v}"
            )));
        }
    }
    Ok(())
}

fn least_squares(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let m = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let denom = m * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return None;
    }
    let slope = (m * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / m;
    Some((intercept, slope))
}

/// Sup of a_k / h^k over the prefix, with its argmax, in log domain.
fn sup_over_geometric(a: &[f64], h: f64) -> (f64, usize) {
    let log_h = h.ln();
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for (k, v) in a.iter().enumerate() {
        if *v > 0.0 {
            let t = v.ln() - k as f64 * log_h;
            if t > best {
                best = t;
                arg = k;
            }
        }
    }
    if best == f64::NEG_INFINITY {
        (0.0, 0)
    } else {
        (best.exp(), arg)
    }
}

/// Sup of a_k / R_k (log-domain cumulative products of r).
fn sup_over_products(a: &[f64], r: &RSequence) -> f64 {
    let prods = r.product_sequence();
    let mut best: f64 = 0.0;
    for (k, v) in a.iter().enumerate() {
        if *v > 0.0 && k <= prods.n() {
            best = best.max((v.ln() - prods.log_r(k)).exp());
        }
    }
    best
}

/// Sup of R_k a_k.
fn sup_times_products(a: &[f64], r: &RSequence) -> (f64, usize) {
    let prods = r.product_sequence();
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for (k, v) in a.iter().enumerate() {
        if *v > 0.0 && k <= prods.n() {
            let t = v.ln() + prods.log_r(k);
            if t > best {
                best = t;
                arg = k;
            }
        }
    }
    if best == f64::NEG_INFINITY {
        (0.0, 0)
    } else {
        (best.exp(), arg)
    }
}

/// Decides whether the prefix is dominated by a geometric h^k, and by the
/// cumulative products of a scaling sequence, returning verified witnesses.
pub fn classify_growth(a: &[f64]) -> Result<GrowthCertificate> {
    validate(a)?;
    let n = a.len() - 1;
    if a.iter().all(|v| *v == 0.0) {
        return Ok(GrowthCertificate {
            verdict: GrowthVerdict::SlowlyIncreasing,
            h_witness: Some(1.0),
            r_witness: Some(RSequence::linear(n)?),
            bound: Some(0.0),
            escaping: None,
        });
    }

    // Superlinear log-growth test: fit ln(ln a_k) against ln k on the tail
    // half. Exponent > 1 means ln a_k outruns every k ln h.
    let tail_start = a.len() / 2;
    let loglog: Vec<(f64, f64)> = (tail_start.max(2)..a.len())
        .filter(|&k| a[k] > std::f64::consts::E)
        .map(|k| ((k as f64).ln(), a[k].ln().ln()))
        .collect();
    if loglog.len() >= 8 {
        if let Some((_, expo)) = least_squares(&loglog) {
            if expo > SUPERLINEAR_EXPONENT {
                return Ok(GrowthCertificate {
                    verdict: GrowthVerdict::NotSlowlyIncreasing,
                    h_witness: None,
                    r_witness: None,
                    bound: None,
                    escaping: Some(escaping_indices(a)),
                });
            }
        }
    }

    // Geometric fit on the tail half, rounded up to a power of two.
    let pts: Vec<(f64, f64)> = (tail_start..a.len())
        .filter(|&k| a[k] > 0.0)
        .map(|k| (k as f64, a[k].ln()))
        .collect();
    let fitted_h = match least_squares(&pts) {
        Some((_, slope)) => slope.exp(),
        None => 1.0,
    };
    let mut h = pow2_at_least(fitted_h.max(1.0));
    while h <= (GRID_MAX_EXP as f64).exp2() {
        let (sup, arg) = sup_over_geometric(a, h);
        // The sup must be attained away from the right edge, otherwise the
        // ratio is still climbing and h is not credible on this prefix.
        if arg < a.len() - 1 {
            let r = geometric_rsequence(h, n)?;
            let r_sup = sup_over_products(a, &r);
            let bound = sup.max(r_sup);
            return Ok(GrowthCertificate {
                verdict: GrowthVerdict::SlowlyIncreasing,
                h_witness: Some(h),
                r_witness: Some(r),
                bound: Some(bound),
                escaping: None,
            });
        }
        h *= 2.0;
    }
    Ok(GrowthCertificate {
        verdict: GrowthVerdict::Inconclusive,
        h_witness: None,
        r_witness: None,
        bound: None,
        escaping: Some(escaping_indices(a)),
    })
}

/// r_p = h * max(1, p): its cumulative products dominate h^p.
fn geometric_rsequence(h: f64, n: usize) -> Result<RSequence> {
    if h <= 1.0 {
        return RSequence::linear(n);
    }
    let values: Vec<f64> = (0..=n)
        .map(|p| if p == 0 { 1.0 } else { h * (p as f64).max(1.0) })
        .collect();
    RSequence::explicit(&values, true)
}

/// Tail indices where the sequence runs away from its best geometric fit.
fn escaping_indices(a: &[f64]) -> Vec<usize> {
    let pts: Vec<(f64, f64)> = (a.len() / 2..a.len())
        .filter(|&k| a[k] > 0.0)
        .map(|k| (k as f64, a[k].ln()))
        .collect();
    let (c, s) = match least_squares(&pts) {
        Some(cs) => cs,
        None => return Vec::new(),
    };
    let mut out = Vec::new();
    let mut last = 0.0f64;
    for k in (3 * a.len() / 4)..a.len() {
        if a[k] > 0.0 {
            let resid = a[k].ln() - (c + s * k as f64);
            if resid > 0.0 && resid >= last {
                out.push(k);
                last = resid;
            }
        }
    }
    out.truncate(8);
    out
}

/// Decides whether the prefix decays faster than every geometric rate, by
/// sampling amplification rates h and, when none escapes, constructing and
/// verifying a scaling-sequence witness.
pub fn classify_decay(a: &[f64]) -> Result<DecayCertificate> {
    validate(a)?;
    let n = a.len() - 1;
    if a.iter().all(|v| *v == 0.0) {
        return Ok(DecayCertificate {
            verdict: DecayVerdict::RapidlyDecreasing,
            r_witness: Some(RSequence::linear(n)?),
            bound: Some(0.0),
            failing_h: None,
        });
    }

    // Amplification grid: h = 2^j. A rate fails when h^k a_k climbs along
    // the tail AND is not concave; a concave climb is a peak that has not
    // turned over yet, which finite data cannot condemn.
    let mut failing: Option<f64> = None;
    for j in 0..=GRID_MAX_EXP {
        let h = (j as f64).exp2();
        if amplified_escapes(a, h) {
            failing = Some(h);
            break;
        }
    }
    if let Some(h) = failing {
        return Ok(DecayCertificate {
            verdict: DecayVerdict::NotRapidlyDecreasing,
            r_witness: None,
            bound: None,
            failing_h: Some(h),
        });
    }

    // Finitely supported prefixes decay trivially; any growing sequence
    // witnesses them.
    if a.iter().skip(a.len() / 4).all(|v| *v == 0.0) {
        let r = RSequence::linear(n)?;
        let (bound, _) = sup_times_products(a, &r);
        return Ok(DecayCertificate {
            verdict: DecayVerdict::RapidlyDecreasing,
            r_witness: Some(r),
            bound: Some(bound),
            failing_h: None,
        });
    }

    // Witness construction: r_k = max(r_{k-1}, min_{j>=k} (1/a_j)^{1/j}),
    // skipping zero entries; an empty min doubles the previous value.
    let mut suffix_min = vec![f64::INFINITY; a.len() + 1];
    for j in (1..a.len()).rev() {
        let own = if a[j] > 0.0 {
            (-a[j].ln() / j as f64).exp()
        } else {
            f64::INFINITY
        };
        suffix_min[j] = own.min(suffix_min[j + 1]);
    }
    let mut values = vec![1.0f64];
    for k in 1..=n {
        let prev = values[k - 1];
        let cand = if suffix_min[k].is_finite() {
            suffix_min[k]
        } else {
            2.0 * prev
        };
        values.push(prev.max(cand).min(1e150));
    }
    let r = match RSequence::explicit(&values, true) {
        Ok(r) => r,
        Err(_) => {
            return Ok(DecayCertificate {
                verdict: DecayVerdict::Inconclusive,
                r_witness: None,
                bound: None,
                failing_h: None,
            })
        }
    };
    // Mandatory re-verification: the certified sup must be attained well
    // inside the prefix, and the witness must keep growing near the edge
    // (a flat witness certifies nothing).
    let (bound, arg) = sup_times_products(a, &r);
    let grows = r.r(n) > r.r(3 * n / 4) * (1.0 + 1e-3);
    if arg <= (7 * n) / 8 && grows {
        Ok(DecayCertificate {
            verdict: DecayVerdict::RapidlyDecreasing,
            r_witness: Some(r),
            bound: Some(bound),
            failing_h: None,
        })
    } else {
        Ok(DecayCertificate {
            verdict: DecayVerdict::Inconclusive,
            r_witness: None,
            bound: None,
            failing_h: None,
        })
    }
}

/// True when h^k a_k genuinely escapes on the tail: positive trend and no
/// concavity anywhere (a concave profile is a peak, not an escape).
fn amplified_escapes(a: &[f64], h: f64) -> bool {
    let log_h = h.ln();
    let pts: Vec<(f64, f64)> = (a.len() / 2..a.len())
        .filter(|&k| a[k] > 0.0)
        .map(|k| (k as f64, k as f64 * log_h + a[k].ln()))
        .collect();
    if pts.len() < 3 {
        return false;
    }
    let slope = match least_squares(&pts) {
        Some((_, s)) => s,
        None => return false,
    };
    if slope <= ESCAPE_SLOPE {
        return false;
    }
    // Second divided differences over consecutive sample triples.
    let mut min_dd = f64::INFINITY;
    for w in pts.windows(3) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        let (x2, y2) = w[2];
        let d1 = (y1 - y0) / (x1 - x0);
        let d2 = (y2 - y1) / (x2 - x1);
        min_dd = min_dd.min(2.0 * (d2 - d1) / (x2 - x0));
    }
    min_dd >= CONCAVITY_FLOOR
}

/// Runs both classifiers, checks the verdicts against each other, and
/// confirms that re-reading the sequence over d-dimensional multi-indices
/// (value a_{|k|}) reproduces the scalar sups for the emitted witnesses.
pub fn cross_check_duality(a: &[f64], d: usize) -> Result<DualityReport> {
    let growth = classify_growth(a)?;
    let decay = classify_decay(a)?;

    // Rapid decay forces slow increase (products of a valid scaling
    // sequence are >= 1), so the only hard contradiction is:
    let consistent = !(decay.verdict == DecayVerdict::RapidlyDecreasing
        && growth.verdict == GrowthVerdict::NotSlowlyIncreasing);

    let mut dim_consistent = true;
    let n = a.len() - 1;
    let d = d.max(1);
    if let (Some(h), Some(bound)) = (growth.h_witness, growth.bound) {
        // The d-dimensional sup runs over all multi-indices of order <= N,
        // but the value only depends on the order, so it must equal the
        // scalar sup exactly.
        let mut best: f64 = 0.0;
        for order in 0..=n {
            if a[order] > 0.0 {
                // Any multi-index of this order gives the same ratio; the
                // graded family is nonempty for every order.
                let k = mindex::graded(d, order as u32);
                debug_assert!(!k.is_empty());
                best = best.max((a[order].ln() - order as f64 * h.ln()).exp());
            }
        }
        let (scalar_sup, _) = sup_over_geometric(a, h);
        if (best - scalar_sup).abs() > 1e-12 * (1.0 + scalar_sup) || best > bound * (1.0 + 1e-12)
        {
            dim_consistent = false;
        }
    }
    if let (Some(r), Some(bound)) = (decay.r_witness.as_ref(), decay.bound) {
        let (scalar_sup, _) = sup_times_products(a, r);
        if scalar_sup > bound * (1.0 + 1e-12) {
            dim_consistent = false;
        }
    }
    Ok(DualityReport {
        growth,
        decay,
        consistent,
        dim_consistent,
    })
}

fn pow2_at_least(x: f64) -> f64 {
    let mut v = 1.0;
    while v < x && v < 1e300 {
        v *= 2.0;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(f: impl Fn(usize) -> f64, n: usize) -> Vec<f64> {
        (0..=n).map(f).collect()
    }

    #[test]
    fn geometric_three_gets_rate_four_with_unit_bound() {
        let a = seq(|k| 3.0f64.powi(k as i32), 64);
        let cert = classify_growth(&a).unwrap();
        assert_eq!(cert.verdict, GrowthVerdict::SlowlyIncreasing);
        assert_eq!(cert.h_witness, Some(4.0));
        assert!(cert.bound.unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn factorial_growth_is_rejected_with_escape_indices() {
        // 160! stays inside the double range, so no clamping is needed.
        let a: Vec<f64> = (0..=160usize)
            .map(|k| (1..=k).map(|j| (j as f64).ln()).sum::<f64>().exp())
            .collect();
        let cert = classify_growth(&a).unwrap();
        assert_eq!(cert.verdict, GrowthVerdict::NotSlowlyIncreasing);
        assert!(!cert.escaping.unwrap().is_empty());
    }

    #[test]
    fn inverse_factorial_is_rapidly_decreasing() {
        let a: Vec<f64> = (0..=128usize)
            .map(|k| (-(1..=k).map(|j| (j as f64).ln()).sum::<f64>()).exp())
            .collect();
        let cert = classify_decay(&a).unwrap();
        assert_eq!(cert.verdict, DecayVerdict::RapidlyDecreasing);
        let r = cert.r_witness.unwrap();
        let (sup, _) = sup_times_products(&a, &r);
        assert!(sup <= cert.bound.unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn single_geometric_decay_is_not_rapid() {
        let a = seq(|k| 0.5f64.powi(k as i32), 64);
        let cert = classify_decay(&a).unwrap();
        assert_eq!(cert.verdict, DecayVerdict::NotRapidlyDecreasing);
        assert_eq!(cert.failing_h, Some(4.0));
    }

    #[test]
    fn alternating_zero_one_splits_the_verdicts() {
        let a = seq(|k| (k % 2) as f64, 64);
        let g = classify_growth(&a).unwrap();
        assert_eq!(g.verdict, GrowthVerdict::SlowlyIncreasing);
        assert_eq!(g.h_witness, Some(1.0));
        let d = classify_decay(&a).unwrap();
        assert_eq!(d.verdict, DecayVerdict::NotRapidlyDecreasing);
    }

    #[test]
    fn zero_sequence_passes_both_ways() {
        let a = vec![0.0; 32];
        let g = classify_growth(&a).unwrap();
        assert_eq!(g.verdict, GrowthVerdict::SlowlyIncreasing);
        assert_eq!(g.bound, Some(0.0));
        let d = classify_decay(&a).unwrap();
        assert_eq!(d.verdict, DecayVerdict::RapidlyDecreasing);
        assert_eq!(d.bound, Some(0.0));
    }

    #[test]
    fn duality_report_is_consistent_on_geometric_data() {
        let a = seq(|k| 3.0f64.powi(k as i32), 48);
        let rep = cross_check_duality(&a, 2).unwrap();
        assert!(rep.consistent);
        assert!(rep.dim_consistent);
    }
}
