//! Approximate units: sequences of cutoff functions converging to 1.
//!
//! Two constructions are provided. A dilation unit stretches a fixed
//! plateau profile, member n being psi(x / a_n); a plateau unit rebuilds a
//! plateau with inner box [-a_n, a_n]^d and a fixed margin. Verification
//! checks three properties over the stored schedule prefix: (a) the
//! sequence seminorms stay bounded uniformly in n for every supplied
//! sequence, (b) every derivative up to the truncation converges to that of
//! the constant 1 on each test box, and (c) when the unit claims to be
//! special, each test box is eventually covered by the region where the
//! member is identically 1. Failures are reported with a named
//! counterexample rather than a bare flag.

use serde::Serialize;

use crate::bump::element::Element;
use crate::bump::func::Func;
use crate::bump::seminorm::{
    golden_refine, seminorm, sup_abs, DerivativeTable, SeminormKind, SeminormParams,
};
use crate::error::{Error, Result};
use crate::exec::Parallelism;
use crate::mindex;
use crate::rclass::RSequence;
use crate::weights::WeightSequence;

/// Tolerance for "converged to 1" at the last schedule index.
const CONVERGENCE_TOL: f64 = 1e-9;
/// Slack for the dilation bound comparison against the profile.
const PROFILE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Dilation,
    Plateau,
}

/// Scale schedule n -> a_n, 1-based. The constructor accepts any values;
/// `verify` is where bad schedules are rejected, so that defective units
/// can still be built for negative tests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    scales: Vec<f64>,
}

impl Schedule {
    /// a_n = n for n = 1..=n_max.
    pub fn linear(n_max: usize) -> Schedule {
        Schedule {
            scales: (1..=n_max).map(|n| n as f64).collect(),
        }
    }

    pub fn explicit(scales: &[f64]) -> Schedule {
        Schedule {
            scales: scales.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    /// a_n for 1-based n.
    pub fn scale(&self, n: usize) -> Result<f64> {
        if n == 0 || n > self.scales.len() {
            return Err(Error::OutOfRange(format!(
                "schedule index {n} outside 1..={}",
                self.scales.len()
            )));
        }
        Ok(self.scales[n - 1])
    }

    /// Positive, finite, strictly increasing.
    pub fn verify(&self) -> Result<()> {
        if self.scales.is_empty() {
            return Err(Error::ClassViolation("empty schedule".into()));
        }
        for (i, &a) in self.scales.iter().enumerate() {
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::ClassViolation(format!(
                    "schedule value a_{} = {a} must be positive and finite",
                    i + 1
                )));
            }
            if i > 0 && a <= self.scales[i - 1] {
                return Err(Error::ClassViolation(format!(
                    "schedule must increase strictly: a_{} = {} !< a_{} = {a}",
                    i,
                    self.scales[i - 1],
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// A sequence of smooth compactly supported cutoffs converging to 1.
#[derive(Debug, Clone)]
pub struct ApproximateUnit {
    kind: UnitKind,
    /// dilation: the fixed profile; plateau: unused template of dimension d
    profile: Option<Element>,
    d: usize,
    margin: f64,
    schedule: Schedule,
    special: bool,
}

impl ApproximateUnit {
    /// Dilation unit psi(x / a_n). The profile must be identically 1 on a
    /// neighborhood of the origin, which restricts it to plateau-shaped
    /// elements.
    pub fn dilation(profile: Element, schedule: Schedule, special: bool) -> Result<Self> {
        let one_box = profile.constant_one_box().ok_or_else(|| {
            Error::ClassViolation(
                "dilation profile must be identically 1 near the origin".into(),
            )
        })?;
        if !one_box.iter().all(|&(lo, hi)| lo < 0.0 && 0.0 < hi) {
            return Err(Error::ClassViolation(
                "dilation profile's constant region must contain the origin".into(),
            ));
        }
        Ok(ApproximateUnit {
            kind: UnitKind::Dilation,
            d: profile.dim(),
            profile: Some(profile),
            margin: 0.0,
            schedule,
            special,
        })
    }

    /// Plateau unit with inner box [-a_n, a_n]^d and the given fixed margin.
    pub fn plateau(d: usize, margin: f64, schedule: Schedule, special: bool) -> Result<Self> {
        if d == 0 {
            return Err(Error::ClassViolation("dimension must be at least 1".into()));
        }
        if !(margin > 0.0) || !margin.is_finite() {
            return Err(Error::ClassViolation(format!(
                "plateau margin must be positive, got {margin}"
            )));
        }
        Ok(ApproximateUnit {
            kind: UnitKind::Plateau,
            profile: None,
            d,
            margin,
            schedule,
            special,
        })
    }

    pub fn kind(&self) -> UnitKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn is_special(&self) -> bool {
        self.special
    }

    /// Member pi_n for 1-based n.
    pub fn member(&self, n: usize) -> Result<Element> {
        let a = self.schedule.scale(n)?;
        match self.kind {
            UnitKind::Dilation => self
                .profile
                .as_ref()
                .expect("dilation unit stores a profile")
                .dilate(a),
            UnitKind::Plateau => {
                let inner: Vec<(f64, f64)> = (0..self.d).map(|_| (-a, a)).collect();
                Element::plateau(&inner, self.margin)
            }
        }
    }

    /// Seminorm of the dilation profile, used as the uniform bound oracle.
    fn profile_seminorm(&self, params: &SeminormParams) -> Result<Option<f64>> {
        match (&self.kind, &self.profile) {
            (UnitKind::Dilation, Some(p)) => {
                Ok(Some(seminorm(&Func::Elem(p.clone()), params)?.value))
            }
            _ => Ok(None),
        }
    }
}

/// Per-sequence boundedness evidence: seminorm values over the prefix.
#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    pub r_index: usize,
    pub per_n: Vec<f64>,
    pub sup: f64,
    /// 1-based index attaining the sup (first attainment)
    pub argmax_n: usize,
    pub holds: bool,
}

/// Per-box convergence evidence: worst derivative distance to 1 per n.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub box_index: usize,
    pub per_n: Vec<f64>,
    pub holds: bool,
}

/// Per-box specialness evidence.
#[derive(Debug, Clone, Serialize)]
pub struct SpecialRow {
    pub box_index: usize,
    /// smallest 1-based n with the member identically 1 on the box
    pub n0: Option<usize>,
    pub holds: bool,
}

/// Full verification report; `pass` is the conjunction of every check.
#[derive(Debug, Clone, Serialize)]
pub struct UnitVerification {
    pub schedule_ok: bool,
    pub bounded: bool,
    pub converges: bool,
    pub special_ok: bool,
    pub pass: bool,
    pub bound_rows: Vec<BoundRow>,
    pub convergence_rows: Vec<ConvergenceRow>,
    pub special_rows: Vec<SpecialRow>,
    pub counterexamples: Vec<String>,
}

/// Knobs for unit verification.
#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub k_max: u32,
    pub n_max: usize,
    pub test_boxes: Vec<Vec<(f64, f64)>>,
    pub weights: WeightSequence,
    pub parallelism: Parallelism,
}

impl VerifyOptions {
    /// Default boxes [-1,1]^d and [-2.5,2.5]^d with a Gevrey-2 table.
    pub fn standard(d: usize, k_max: u32, n_max: usize) -> Result<VerifyOptions> {
        let weights = WeightSequence::gevrey(2.0, (k_max as usize).max(16))?;
        Ok(VerifyOptions {
            k_max,
            n_max,
            test_boxes: vec![
                (0..d).map(|_| (-1.0, 1.0)).collect(),
                (0..d).map(|_| (-2.5, 2.5)).collect(),
            ],
            weights,
            parallelism: Parallelism::Auto,
        })
    }
}

/// Sup over a box of |e(x) - 1|, by dense grid plus golden refinement.
/// Exact 0 when the member is identically 1 on the whole box.
fn sup_distance_to_one(e: &Element, bx: &[(f64, f64)]) -> f64 {
    if let Some(ones) = e.constant_one_box() {
        if ones
            .iter()
            .zip(bx)
            .all(|(o, b)| o.0 <= b.0 && b.1 <= o.1)
        {
            return 0.0;
        }
    }
    let n: usize = match bx.len() {
        0 | 1 => 512,
        2 => 128,
        _ => 24,
    };
    let target = |x: &[f64]| (e.eval(x).norm_sqr().sqrt() - 1.0).abs();
    let dim = bx.len();
    let total = n.pow(dim as u32);
    let mut best_v = -1.0;
    let mut best_x = vec![0.0; dim];
    let mut x = vec![0.0; dim];
    for idx in 0..total {
        let mut rem = idx;
        for (axis, &(lo, hi)) in bx.iter().enumerate() {
            let j = rem % n;
            rem /= n;
            x[axis] = lo + (hi - lo) * (j as f64) / ((n - 1) as f64);
        }
        let v = target(&x);
        if v > best_v {
            best_v = v;
            best_x.copy_from_slice(&x);
        }
    }
    let spacing: Vec<f64> = bx
        .iter()
        .map(|&(lo, hi)| (hi - lo) / ((n - 1) as f64))
        .collect();
    let mut best = crate::bump::seminorm::SupResult {
        value: best_v,
        x: best_x,
    };
    golden_refine(&target, bx, &spacing, &mut best);
    best.value
}

/// Runs all three unit checks over the schedule prefix. Every check runs
/// even after an earlier one fails, so the report names each defect.
pub fn verify_unit(
    unit: &ApproximateUnit,
    r_list: &[RSequence],
    opts: &VerifyOptions,
) -> Result<UnitVerification> {
    let n_max = opts.n_max.min(unit.schedule.len());
    if n_max == 0 {
        return Err(Error::ClassViolation("empty schedule prefix".into()));
    }
    let mut counterexamples = Vec::new();

    let schedule_ok = match unit.schedule.verify() {
        Ok(()) => true,
        Err(e) => {
            counterexamples.push(format!("schedule: {e}"));
            false
        }
    };

    let members: Vec<Element> = (1..=n_max)
        .map(|n| unit.member(n))
        .collect::<Result<Vec<_>>>()?;

    // (a) uniform boundedness of the sequence seminorms
    let mut bounded = true;
    let mut bound_rows = Vec::with_capacity(r_list.len());
    for (r_index, r) in r_list.iter().enumerate() {
        let params = SeminormParams::new(
            SeminormKind::Sequence { r: r.clone() },
            opts.weights.clone(),
            opts.k_max,
        )?;
        let profile_bound = unit.profile_seminorm(&params)?;
        let mut per_n = Vec::with_capacity(n_max);
        for m in &members {
            per_n.push(seminorm(&Func::Elem(m.clone()), &params)?.value);
        }
        let (mut argmax_n, mut sup) = (1usize, per_n[0]);
        for (i, &v) in per_n.iter().enumerate() {
            if v > sup {
                sup = v;
                argmax_n = i + 1;
            }
        }
        // bounded means the running max settles before the end of the
        // prefix (or the family is flat); a sup still climbing at the last
        // member is treated as unbounded growth
        let mut holds = argmax_n < n_max || sup <= per_n[0] * (1.0 + 1e-6);
        if let Some(pb) = profile_bound {
            if sup > pb * (1.0 + PROFILE_SLACK) {
                holds = false;
                counterexamples.push(format!(
                    "bound: sequence {r_index}, n = {argmax_n}, value {sup:.6e} exceeds the profile bound {pb:.6e}"
                ));
            }
        }
        if argmax_n == n_max && !holds {
            counterexamples.push(format!(
                "bound: sequence {r_index}, seminorm still climbing at n = {n_max} (value {sup:.6e})"
            ));
        }
        bounded &= holds;
        bound_rows.push(BoundRow {
            r_index,
            per_n,
            sup,
            argmax_n,
            holds,
        });
    }

    // (b) convergence to 1: sup over each test box of |D^k(pi_n - 1)|
    // for all |k| <= k_max; for |k| >= 1 this is |D^k pi_n|
    let mut converges = true;
    let mut convergence_rows = Vec::with_capacity(opts.test_boxes.len());
    let tables: Vec<DerivativeTable> = members
        .iter()
        .map(|m| DerivativeTable::build(&Func::Elem(m.clone()), opts.k_max))
        .collect::<Result<Vec<_>>>()?;
    for (box_index, bx) in opts.test_boxes.iter().enumerate() {
        if bx.len() != unit.d {
            return Err(Error::SeminormParams(format!(
                "test box {box_index} has dimension {}, unit has {}",
                bx.len(),
                unit.d
            )));
        }
        let mut per_n = Vec::with_capacity(n_max);
        for (ni, m) in members.iter().enumerate() {
            let mut worst = sup_distance_to_one(m, bx);
            for k in mindex::graded(unit.d, opts.k_max) {
                if mindex::abs(&k) == 0 {
                    continue;
                }
                let dk = tables[ni].get(&k).expect("table covers all orders");
                let s = sup_abs(dk, Some(bx), None, opts.parallelism)?;
                worst = worst.max(s.value);
            }
            per_n.push(worst);
        }
        let holds = *per_n.last().expect("n_max >= 1") <= CONVERGENCE_TOL;
        if !holds {
            converges = false;
            counterexamples.push(format!(
                "convergence: box {box_index}, distance to 1 still {:.6e} at n = {n_max}",
                per_n.last().unwrap()
            ));
        }
        convergence_rows.push(ConvergenceRow {
            box_index,
            per_n,
            holds,
        });
    }

    // (c) specialness: each box eventually inside the identically-1 region
    let mut special_ok = true;
    let mut special_rows = Vec::with_capacity(opts.test_boxes.len());
    if unit.special {
        for (box_index, bx) in opts.test_boxes.iter().enumerate() {
            let mut n0 = None;
            for (ni, m) in members.iter().enumerate() {
                let covered = m.constant_one_box().is_some_and(|ones| {
                    ones.iter()
                        .zip(bx)
                        .all(|(o, b)| o.0 <= b.0 && b.1 <= o.1)
                });
                if covered {
                    n0 = Some(ni + 1);
                    break;
                }
            }
            let mut holds = n0.is_some();
            if let Some(first) = n0 {
                // spot checks: the member evaluates to exactly 1 on the box
                for n in [first, n_max] {
                    let m = &members[n - 1];
                    let mut spots: Vec<Vec<f64>> =
                        vec![bx.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect()];
                    for corner in 0..(1usize << unit.d.min(10)) {
                        spots.push(
                            bx.iter()
                                .enumerate()
                                .map(|(i, &(lo, hi))| if corner >> i & 1 == 1 { hi } else { lo })
                                .collect(),
                        );
                    }
                    for x in &spots {
                        let v = m.eval(x);
                        if (v - crate::C64::new(1.0, 0.0)).norm() > 0.0 {
                            holds = false;
                            counterexamples.push(format!(
                                "special: box {box_index}, n = {n}, value {v} at {x:?} is not 1"
                            ));
                        }
                    }
                }
            } else {
                counterexamples.push(format!(
                    "special: box {box_index} is never covered within n <= {n_max}"
                ));
            }
            special_ok &= holds;
            special_rows.push(SpecialRow {
                box_index,
                n0,
                holds,
            });
        }
    }

    let pass = schedule_ok && bounded && converges && special_ok;
    Ok(UnitVerification {
        schedule_ok,
        bounded,
        converges,
        special_ok,
        pass,
        bound_rows,
        convergence_rows,
        special_rows,
        counterexamples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile() -> Element {
        Element::plateau(&[(-1.0, 1.0)], 1.0).unwrap()
    }

    fn small_r_list() -> Vec<RSequence> {
        vec![
            RSequence::linear(24).unwrap(),
            RSequence::power(0.5, 24).unwrap(),
        ]
    }

    #[test]
    fn dilation_unit_passes_all_checks() {
        let unit =
            ApproximateUnit::dilation(profile(), Schedule::linear(6), true).unwrap();
        let opts = VerifyOptions::standard(1, 8, 6).unwrap();
        let rep = verify_unit(&unit, &small_r_list(), &opts).unwrap();
        assert!(rep.pass, "counterexamples: {:?}", rep.counterexamples);
        assert!(rep.bound_rows.iter().all(|r| r.holds));
        // special: [-1,1] is covered from n = 1 (inner box is [-n, n])
        assert_eq!(rep.special_rows[0].n0, Some(1));
    }

    #[test]
    fn plateau_unit_covers_boxes_at_the_predicted_index() {
        let unit = ApproximateUnit::plateau(1, 1.0, Schedule::linear(6), true).unwrap();
        let opts = VerifyOptions::standard(1, 8, 6).unwrap();
        let rep = verify_unit(&unit, &small_r_list(), &opts).unwrap();
        assert!(rep.pass, "counterexamples: {:?}", rep.counterexamples);
        // the box [-2.5, 2.5] needs inner half-width >= 2.5, so n0 = 3
        assert_eq!(rep.special_rows[1].n0, Some(3));
    }

    #[test]
    fn shrinking_family_fails_convergence() {
        let schedule = Schedule::explicit(&[1.0, 0.5, 0.25, 0.125, 0.0625]);
        let unit = ApproximateUnit::dilation(profile(), schedule, false).unwrap();
        let opts = VerifyOptions::standard(1, 8, 5).unwrap();
        let rep = verify_unit(&unit, &small_r_list(), &opts).unwrap();
        assert!(!rep.pass);
        assert!(!rep.schedule_ok);
        assert!(!rep.converges, "rows: {:?}", rep.convergence_rows);
        assert!(!rep.counterexamples.is_empty());
    }

    #[test]
    fn dilation_profile_must_be_one_near_zero() {
        let bump = Element::standard_bump(&[0.0], &[1.0]).unwrap();
        let err = ApproximateUnit::dilation(bump, Schedule::linear(4), true).unwrap_err();
        assert!(matches!(err, Error::ClassViolation(_)));
        let off_center = Element::plateau(&[(2.0, 4.0)], 1.0).unwrap();
        let err = ApproximateUnit::dilation(off_center, Schedule::linear(4), true).unwrap_err();
        assert!(matches!(err, Error::ClassViolation(_)));
    }

    #[test]
    fn plateau_members_have_unit_sup_and_margin_supported_derivatives() {
        let unit = ApproximateUnit::plateau(1, 1.0, Schedule::linear(4), true).unwrap();
        let m = unit.member(2).unwrap();
        assert_eq!(m.eval(&[0.0]), crate::C64::new(1.0, 0.0));
        assert_eq!(m.eval(&[5.0]), crate::C64::new(0.0, 0.0));
        let dm = m.partial(&[1]).unwrap();
        // derivative vanishes on the plateau interior
        assert_eq!(dm.eval(&[0.0]), crate::C64::new(0.0, 0.0));
        let bx = dm.support_box().unwrap();
        assert!(bx[0].0 >= -3.0 - 1e-12 && bx[0].1 <= 3.0 + 1e-12);
    }

    #[test]
    fn schedule_verification_rejects_flat_and_nonpositive_scales() {
        assert!(Schedule::explicit(&[1.0, 1.0, 2.0]).verify().is_err());
        assert!(Schedule::explicit(&[-1.0, 2.0]).verify().is_err());
        assert!(Schedule::explicit(&[]).verify().is_err());
        assert!(Schedule::linear(5).verify().is_ok());
    }
}
