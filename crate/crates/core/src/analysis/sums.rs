use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{traverse, Traversal, TraversalOptions};
use crate::interval::{pow2_neg, Interval};
use crate::lattice::DyadicCube;
use crate::rational::{serde_ratio, Rational};
use crate::sets::SetModel;

pub(crate) fn check_alpha(alpha: &Rational, d: usize, allow_d: bool) -> Result<()> {
    let d = Rational::from_integer(d.into());
    let bad = alpha.is_negative() || alpha > &d || (!allow_d && alpha == &d);
    if bad {
        return Err(Error::AlphaOutOfRange(crate::rational::fmt_ratio(alpha)));
    }
    Ok(())
}

/// Relative terms `2^{-k(d-α)}` for offsets `0..=j`.
#[derive(Debug, Clone)]
pub struct Terms {
    pub x: Rational,
    pub rel: Vec<Interval>,
}

impl Terms {
    pub fn new(d: usize, alpha: &Rational, j: u32) -> Terms {
        let x = Rational::from_integer(d.into()) - alpha;
        let rel = (0..=j as u64)
            .map(|k| pow2_neg(&(&x * Rational::from_integer(k.into()))))
            .collect();
        Terms { x, rel }
    }

    /// `Σ_{i≥1} 2^{-i(d-α)}`, or `None` when it diverges.
    pub fn geometric_tail(&self) -> Option<Interval> {
        if !self.x.is_positive() {
            return None;
        }
        let q = pow2_neg(&self.x);
        let one_minus = Interval::new(Rational::one() - &q.hi, Rational::one() - &q.lo);
        Some(q.div_pos(&one_minus))
    }

    pub fn weighted(&self, counts: &[u64], upto: u32) -> Interval {
        counts
            .iter()
            .zip(&self.rel)
            .take(upto as usize + 1)
            .filter(|(c, _)| **c > 0)
            .map(|(c, t)| t.scale_int(*c))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SumKind {
    Dynkin,
    De,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SumReport {
    pub kind: SumKind,
    pub root: DyadicCube,
    #[serde(with = "serde_ratio")]
    pub alpha: Rational,
    #[serde(rename = "J")]
    pub j: u32,
    /// Terms per depth offset.
    pub counts: Vec<u64>,
    /// Finite-depth sum.
    pub value: Interval,
    pub residual_count: u64,
    /// `residual_count · (2^{-J}ℓ(R))^{d-α}`.
    pub residual_bound: Interval,
    /// Certified bound on every term below depth `J` (finite `E` only).
    #[serde(with = "serde_ratio::option")]
    pub tail_bound: Option<Rational>,
    /// `value + [0, tail_bound]`: contains the untruncated sum when the tail
    /// is certified.
    pub total: Interval,
    /// `|R|^{1-α/d}`.
    pub normalizer: Interval,
    /// `value / normalizer`.
    pub ratio: Interval,
}

/// Both sums of one traversal for one `α`.
pub(crate) fn reports_from(
    e: &SetModel,
    r: &DyadicCube,
    alpha: &Rational,
    j: u32,
    t: &Traversal,
) -> (SumReport, SumReport) {
    let d = r.dim();
    let terms = Terms::new(d, alpha, j);
    let normalizer = pow2_neg(&(&terms.x * Rational::from_integer(r.depth().into())));
    let residual_count = t.de_count[j as usize];
    let res_rel = terms.rel[j as usize].scale_int(residual_count);
    let residual_bound = &res_rel * &normalizer;
    // finite E: below a residual cube holding k points every deeper level has
    // at most k cubes meeting E and k(2^d - 1) free cubes
    // (exact oracle: every point of E inside R sits in some residual cube)
    let points_below: Option<u64> = e
        .finite_points()
        .map(|pts| pts.iter().filter(|p| r.contains_point(p)).count() as u64);
    let tail_rel = match (points_below, terms.geometric_tail()) {
        (Some(k), Some(g)) => Some(&terms.rel[j as usize].scale_int(k) * &g),
        (Some(0), None) => Some(Interval::zero()),
        _ => None,
    };
    let make = |kind: SumKind, counts: &[u64], tail_mult: u64| {
        let rel = terms.weighted(counts, j);
        let value = &rel * &normalizer;
        let tail_bound = tail_rel
            .as_ref()
            .map(|tr| (&tr.scale_int(tail_mult) * &normalizer).hi);
        let total = match &tail_bound {
            Some(tb) => value.widen_up(tb),
            None => value.clone(),
        };
        SumReport {
            kind,
            root: r.clone(),
            alpha: alpha.clone(),
            j,
            counts: counts.to_vec(),
            ratio: rel,
            value,
            residual_count,
            residual_bound: residual_bound.clone(),
            tail_bound,
            total,
            normalizer: normalizer.clone(),
        }
    };
    let free_mult = (1u64 << d) - 1;
    (
        make(SumKind::Dynkin, &t.free_count, free_mult),
        make(SumKind::De, &t.de_count, 1),
    )
}

/// `Σ_{Q'∈F_E(R)} |Q'|^{1-α/d}` to depth offset `j`.
pub fn dynkin_sum(e: &SetModel, r: &DyadicCube, alpha: &Rational, j: u32) -> Result<SumReport> {
    check_alpha(alpha, r.dim(), true)?;
    if !e.cube_status(r).meets() {
        return Err(Error::RootIsFree(r.clone()));
    }
    let t = traverse(e, r, j, TraversalOptions::COUNTS)?;
    Ok(reports_from(e, r, alpha, j, &t).0)
}

/// `Σ_{Q∈D_E(R)} |Q|^{1-α/d}` to depth offset `j`.
pub fn de_sum(e: &SetModel, r: &DyadicCube, alpha: &Rational, j: u32) -> Result<SumReport> {
    check_alpha(alpha, r.dim(), true)?;
    let t = traverse(e, r, j, TraversalOptions::COUNTS)?;
    Ok(reports_from(e, r, alpha, j, &t).1)
}

/// Both sums for every `α` from a single traversal, in grid order.
pub fn sum_sweep(
    e: &SetModel,
    r: &DyadicCube,
    alphas: &[Rational],
    j: u32,
) -> Result<Vec<(SumReport, SumReport)>> {
    for a in alphas {
        check_alpha(a, r.dim(), true)?;
    }
    if !e.cube_status(r).meets() {
        return Err(Error::RootIsFree(r.clone()));
    }
    let t = traverse(e, r, j, TraversalOptions::COUNTS)?;
    Ok(alphas.iter().map(|a| reports_from(e, r, a, j, &t)).collect())
}

/// The multiplicity relation behind the codimension criterion:
/// `Σ_{D_E}|Q|^{1-α/d} ≥ 2^{-d} Σ_{F_E}|πQ'|^{1-α/d}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiplicityCheck {
    #[serde(with = "serde_ratio")]
    pub alpha: Rational,
    pub lhs: Interval,
    pub rhs: Interval,
    /// `lhs.lo ≥ rhs.hi`.
    pub certified: bool,
    /// `free[k] ≤ 2^d · de[k-1]` at every offset (exact integers).
    pub per_level: bool,
}

pub fn multiplicity_check(d: usize, alpha: &Rational, de: &[u64], free: &[u64]) -> MultiplicityCheck {
    let j = de.len().saturating_sub(1) as u32;
    let terms = Terms::new(d, alpha, j);
    let lhs = terms.weighted(de, j);
    // free cubes at offset k have parents at offset k - 1
    let shifted: Vec<u64> = free.iter().skip(1).copied().collect();
    let rhs = terms
        .weighted(&shifted, j)
        .scale(&Rational::new(1.into(), (1u64 << d).into()));
    let per_level = (1..free.len()).all(|k| free[k] <= (de[k - 1] << d));
    MultiplicityCheck {
        alpha: alpha.clone(),
        certified: lhs.lo >= rhs.hi,
        lhs,
        rhs,
        per_level,
    }
}

impl SumReport {
    pub fn is_zero(&self) -> bool {
        self.value.hi.is_zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::inv_pow2;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn origin() -> SetModel {
        SetModel::points(vec![vec![r(0, 1)]]).unwrap()
    }

    /// `Σ_{k=a}^{b} 2^{-k/2}` in f64.
    fn geo(a: i32, b: i32) -> f64 {
        (a..=b).map(|k| (-(k as f64) / 2.0).exp2()).sum()
    }

    #[test]
    fn alpha_zero_is_volume() {
        let root = DyadicCube::root(1);
        let s = dynkin_sum(&origin(), &root, &r(0, 1), 10).unwrap();
        assert_eq!(s.value, Interval::exact(Rational::one() - inv_pow2(10)));
        assert_eq!(s.residual_count, 1);
    }

    #[test]
    fn single_point_closed_forms() {
        let root = DyadicCube::root(1);
        let half = r(1, 2);
        let s = dynkin_sum(&origin(), &root, &half, 40).unwrap();
        let want = 1.0 / (std::f64::consts::SQRT_2 - 1.0);
        assert!(s.total.contains_f64_within(want, 1e-12));
        assert!(s.value.contains_f64_within(geo(1, 40), 1e-12));
        let s = de_sum(&origin(), &root, &half, 2).unwrap();
        assert!(s.value.contains_f64_within(geo(0, 2), 1e-12));
        assert!((s.value.mid_f64() - 2.20711).abs() < 1e-5);
        let s = de_sum(&origin(), &root, &half, 40).unwrap();
        let want = 1.0 / (1.0 - 0.5f64.sqrt());
        assert!(s.total.contains_f64_within(want, 1e-12));
        let s = dynkin_sum(&origin(), &root, &r(1, 1), 25).unwrap();
        assert_eq!(s.value, Interval::exact(r(25, 1)));
        let s = de_sum(&SetModel::empty(1), &root, &half, 5).unwrap();
        assert!(s.is_zero());
    }

    #[test]
    fn errors() {
        let root = DyadicCube::root(1);
        assert!(matches!(
            dynkin_sum(&origin(), &root, &r(3, 2), 3),
            Err(Error::AlphaOutOfRange(_))
        ));
        assert!(matches!(
            dynkin_sum(&origin(), &DyadicCube::new(1, [1]).unwrap(), &r(1, 2), 3),
            Err(Error::RootIsFree(_))
        ));
    }

    #[test]
    fn normalizer_scales_with_root() {
        let q = DyadicCube::new(2, [0]).unwrap();
        let s = de_sum(&origin(), &q, &r(1, 2), 3).unwrap();
        // |Q|^{1/2} = 1/2
        assert!(s.normalizer.contains(&r(1, 2)));
        assert!(s.ratio.contains_f64_within(geo(0, 3), 1e-12));
    }

    #[test]
    fn multiplicity_on_cantor() {
        let root = DyadicCube::root(1);
        let t = traverse(&SetModel::cantor(), &root, 10, TraversalOptions::COUNTS).unwrap();
        for a in [r(0, 1), r(1, 4), r(1, 2), r(1, 1)] {
            let m = multiplicity_check(1, &a, &t.de_count, &t.free_count);
            assert!(m.certified && m.per_level);
        }
    }
}
