//! From a parent-closed Carleson family to a porous corner set.

use std::collections::{HashMap, HashSet};

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{enumerate_de, CubeFamily};
use crate::lattice::DyadicCube;
use crate::rational::{serde_ratio, Rational};
use crate::sets::{corner_set, SetModel, Status};
use crate::sparse::carleson_constant;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParentClosed {
    pub pass: bool,
    /// First member in cube order whose parent is missing.
    pub offender: Option<DyadicCube>,
}

pub fn check_parent_closed(s: &CubeFamily) -> ParentClosed {
    let set = s.member_set();
    let offender = s
        .members()
        .iter()
        .find(|q| **q != s.root && !q.parent().is_ok_and(|p| set.contains(&p)))
        .cloned();
    ParentClosed {
        pass: offender.is_none(),
        offender,
    }
}

/// `Q ⊃ cQ ⊃ c²Q ⊃ …`, all sharing the lower corner of `Q`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainFamily {
    pub base: DyadicCube,
    pub members: Vec<DyadicCube>,
}

impl ChainFamily {
    pub fn corner(&self) -> Vec<Rational> {
        self.base.lower_corner()
    }

    pub fn volume(&self) -> Rational {
        self.members.iter().map(DyadicCube::volume).sum()
    }
}

/// The `j + 1` corner descendants of `q` (depth capped by the lattice).
pub fn chain(q: &DyadicCube, j: u32) -> ChainFamily {
    let mut members = vec![q.clone()];
    let mut cur = q.clone();
    for _ in 0..j {
        if cur.depth() >= crate::lattice::MAX_DEPTH {
            break;
        }
        cur = cur.corner_child();
        members.push(cur.clone());
    }
    ChainFamily {
        base: q.clone(),
        members,
    }
}

/// `2^d / (2^d − 1)`.
pub fn chain_factor(d: usize) -> Rational {
    let p = 1i64 << d;
    Rational::new(p.into(), (p - 1).into())
}

/// `ξ + 2^d/(2^d−1) + 2^d/(2^d−1)·ξ`.
pub fn inverse_bound(xi: &Rational, d: usize) -> Rational {
    let k = chain_factor(d);
    xi + &k + &k * xi
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootSplit {
    pub root: DyadicCube,
    /// Volume of `S ∩ D_E` inside the root.
    #[serde(with = "serde_ratio")]
    pub s1: Rational,
    /// Volume of `D_E ∖ S` inside the root.
    #[serde(with = "serde_ratio")]
    pub s2: Rational,
    /// Part of `s2` on chains of members inside the root.
    #[serde(with = "serde_ratio")]
    pub s3: Rational,
    /// Part of `s2` on chains of members strictly above the root.
    #[serde(with = "serde_ratio")]
    pub s4: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InverseReport {
    #[serde(with = "serde_ratio", rename = "xi")]
    pub xi_input: Rational,
    #[serde(with = "serde_ratio")]
    pub bound: Rational,
    #[serde(with = "serde_ratio")]
    pub measured: Rational,
    #[serde(rename = "J")]
    pub j: u32,
    pub holds: bool,
    /// Every member of `S` contains its own corner.
    pub s_subset_de: bool,
    /// Every cube of `D_E ∖ S` lies on the chain of some member.
    pub chain_coverage: bool,
    /// `s4 ≤ k|R|` and `s3 ≤ kξ|R|` at every root, `k = 2^d/(2^d−1)`.
    pub split_bounds: bool,
    pub roots: Vec<RootSplit>,
}

/// Default truncation: eight levels below the deepest member.
pub fn default_depth(s: &CubeFamily) -> u32 {
    s.max_depth() - s.root.depth() + 8
}

/// Builds `E = corner_set(S)`, checks `S ⊆ D_E` and splits the packing sums
/// of `D_E(root)` to depth offset `j` along member chains.
pub fn invert(s: &CubeFamily, j: Option<u32>) -> Result<(SetModel, InverseReport)> {
    if s.is_empty() {
        return Err(Error::EmptyFamily);
    }
    if let Some(q) = check_parent_closed(s).offender {
        return Err(Error::NotParentClosed(q));
    }
    let d = s.dim();
    let j = j.unwrap_or_else(|| default_depth(s));
    let xi = carleson_constant(s, None)?.xi_hat;
    let e = corner_set(s.members())?;
    let s_subset_de = s
        .members()
        .iter()
        .all(|q| q.contains_point(&q.lower_corner()) && e.cube_status(q) == Status::Intersects);
    let de = enumerate_de(&e, &s.root, j)?;
    let measured = carleson_constant(&de, None)?.xi_hat;
    let bound = inverse_bound(&xi, d);

    let in_s = s.member_set();
    let deepest = de.max_depth() as u64;
    let top = s.root.depth();
    let roots: HashSet<&DyadicCube> = de.members().iter().collect();
    let mut acc: HashMap<DyadicCube, [BigUint; 3]> = HashMap::new();
    let mut chain_coverage = true;
    for q in de.members() {
        let w = BigUint::one() << ((deepest - q.depth() as u64) * d as u64);
        // owner: deepest member strictly above q with the same lower corner
        let owner_depth = if in_s.contains(q) {
            None
        } else {
            let corner = q.lower_corner();
            let o = (top..q.depth())
                .rev()
                .map(|t| q.ancestor_at(t))
                .find(|a| in_s.contains(a) && a.lower_corner() == corner);
            if o.is_none() {
                chain_coverage = false;
            }
            Some(o.map(|o| o.depth()))
        };
        for t in top..=q.depth() {
            let r = q.ancestor_at(t);
            if !roots.contains(&r) {
                continue;
            }
            let slot = match owner_depth {
                None => 0,
                Some(Some(od)) if od >= t => 1,
                Some(_) => 2,
            };
            acc.entry(r).or_insert_with(|| [BigUint::zero(), BigUint::zero(), BigUint::zero()])[slot] += &w;
        }
    }
    let scale = Rational::from_integer((BigUint::one() << (deepest * d as u64)).into());
    let k = chain_factor(d);
    let mut split_bounds = true;
    let mut splits: Vec<RootSplit> = de
        .members()
        .iter()
        .map(|r| {
            let a = &acc[r];
            let v = |x: &BigUint| Rational::from_integer(x.clone().into()) / &scale;
            let (s1, s3, s4) = (v(&a[0]), v(&a[1]), v(&a[2]));
            let vol = r.volume();
            if s4 > &k * &vol || s3 > &k * &xi * &vol {
                split_bounds = false;
            }
            RootSplit {
                root: r.clone(),
                s2: &s3 + &s4,
                s1,
                s3,
                s4,
            }
        })
        .collect();
    splits.sort_by(|a, b| a.root.cmp(&b.root));
    let report = InverseReport {
        holds: measured <= bound,
        xi_input: xi,
        bound,
        measured,
        j,
        s_subset_de,
        chain_coverage,
        split_bounds,
        roots: splits,
    };
    Ok((e, report))
}
