//! Half-open dyadic cubes inside the normalized root `[0,1)^d`, and general
//! axis-parallel boxes with rational corners, under the l∞ metric.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::Error;
use crate::rational::{dyadic, inv_pow2, Rational};

/// Deepest supported level; coordinates must fit in a `u64`.
pub const MAX_DEPTH: u32 = 62;

/// `levels` below `r` stay within the lattice.
pub fn check_depth(r: &DyadicCube, levels: u32) -> Result<(), Error> {
    if u64::from(r.depth()) + u64::from(levels) > u64::from(MAX_DEPTH) {
        return Err(Error::InvalidArgument(format!(
            "{levels} levels below {r} exceed the lattice depth limit {MAX_DEPTH}"
        )));
    }
    Ok(())
}

pub type Coords = SmallVec<[u64; 4]>;


/// `[k_1 2^-j, (k_1+1) 2^-j) × … × [k_d 2^-j, (k_d+1) 2^-j)`.
///
/// The derived ordering is the canonical cube order: depth ascending, then
/// coordinates lexicographically.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "CubeRepr")]
pub struct DyadicCube {
    depth: u32,
    coords: Coords,
}

#[derive(Deserialize)]
struct CubeRepr {
    depth: u32,
    coords: Vec<u64>,
}

impl TryFrom<CubeRepr> for DyadicCube {
    type Error = Error;
    fn try_from(r: CubeRepr) -> Result<Self, Self::Error> {
        DyadicCube::new(r.depth, r.coords)
    }
}

/// Parses the display form `j:k1;k2;…`.
impl std::str::FromStr for DyadicCube {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::InvalidCube(format!("expected j:k1;k2;..., got {s:?}"));
        let (j, ks) = s.trim().split_once(':').ok_or_else(bad)?;
        let depth = j.parse().map_err(|_| bad())?;
        let coords = ks
            .split(';')
            .map(|k| k.trim().parse::<u64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>, _>>()?;
        DyadicCube::new(depth, coords)
    }
}

impl fmt::Debug for DyadicCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q(j={}, k={:?})", self.depth, self.coords.as_slice())
    }
}

impl fmt::Display for DyadicCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.depth)?;
        for (i, k) in self.coords.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{k}")?;
        }
        Ok(())
    }
}

/// Set relation between two dyadic cubes. Partial overlap cannot occur.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Equal,
    QinsideR,
    RinsideQ,
    Disjoint,
}

impl DyadicCube {
    pub fn new(depth: u32, coords: impl IntoIterator<Item = u64>) -> Result<Self, Error> {
        let coords: Coords = coords.into_iter().collect();
        if coords.is_empty() {
            return Err(Error::InvalidCube("dimension must be positive".into()));
        }
        if depth > MAX_DEPTH {
            return Err(Error::InvalidCube(format!(
                "depth {depth} exceeds {MAX_DEPTH}"
            )));
        }
        let side = 1u64 << depth;
        if let Some(k) = coords.iter().find(|&&k| k >= side) {
            return Err(Error::InvalidCube(format!(
                "coordinate {k} out of range at depth {depth}"
            )));
        }
        Ok(DyadicCube { depth, coords })
    }

    pub fn root(dim: usize) -> Self {
        assert!(dim > 0);
        DyadicCube {
            depth: 0,
            coords: std::iter::repeat(0).take(dim).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn coords(&self) -> &[u64] {
        &self.coords
    }

    pub fn is_root(&self) -> bool {
        self.depth == 0
    }

    /// `ℓ(Q) = 2^-j`.
    pub fn side(&self) -> Rational {
        inv_pow2(self.depth as u64)
    }

    /// `|Q| = 2^-jd`.
    pub fn volume(&self) -> Rational {
        inv_pow2(self.volume_exponent())
    }

    /// The `n` in `|Q| = 2^-n`.
    pub fn volume_exponent(&self) -> u64 {
        self.depth as u64 * self.dim() as u64
    }

    pub fn parent(&self) -> Result<DyadicCube, Error> {
        if self.depth == 0 {
            return Err(Error::RootHasNoParent);
        }
        Ok(DyadicCube {
            depth: self.depth - 1,
            coords: self.coords.iter().map(|k| k >> 1).collect(),
        })
    }

    /// The ancestor at `depth` (itself when `depth == self.depth`).
    pub fn ancestor_at(&self, depth: u32) -> DyadicCube {
        assert!(depth <= self.depth);
        let s = self.depth - depth;
        DyadicCube {
            depth,
            coords: self.coords.iter().map(|k| k >> s).collect(),
        }
    }

    /// All `2^{gd}` cubes of `D_g(Q)` in canonical order.
    pub fn children(&self, g: u32) -> Vec<DyadicCube> {
        let depth = self.depth + g;
        assert!(depth <= MAX_DEPTH, "children beyond MAX_DEPTH");
        let d = self.dim();
        let per_axis = 1u64 << g;
        let total = per_axis.checked_pow(d as u32).expect("too many children");
        let base: Coords = self.coords.iter().map(|k| k << g).collect();
        let mut out = Vec::with_capacity(total as usize);
        let mut offs: Coords = std::iter::repeat(0).take(d).collect();
        for _ in 0..total {
            out.push(DyadicCube {
                depth,
                coords: base.iter().zip(&offs).map(|(b, o)| b + o).collect(),
            });
            // odometer, last axis fastest: lexicographic order
            for ax in (0..d).rev() {
                offs[ax] += 1;
                if offs[ax] < per_axis {
                    break;
                }
                offs[ax] = 0;
            }
        }
        out
    }

    /// The child sharing this cube's lower corner, `cQ`.
    pub fn corner_child(&self) -> DyadicCube {
        DyadicCube {
            depth: self.depth + 1,
            coords: self.coords.iter().map(|k| k << 1).collect(),
        }
    }

    pub fn relate(&self, other: &DyadicCube) -> Result<Relation, Error> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(if self.depth == other.depth {
            if self.coords == other.coords {
                Relation::Equal
            } else {
                Relation::Disjoint
            }
        } else if self.depth > other.depth {
            if self.ancestor_at(other.depth).coords == other.coords {
                Relation::QinsideR
            } else {
                Relation::Disjoint
            }
        } else if other.ancestor_at(self.depth).coords == self.coords {
            Relation::RinsideQ
        } else {
            Relation::Disjoint
        })
    }

    /// `other ⊆ self`.
    pub fn contains(&self, other: &DyadicCube) -> bool {
        self.dim() == other.dim()
            && other.depth >= self.depth
            && other.ancestor_at(self.depth).coords == self.coords
    }

    pub fn is_disjoint(&self, other: &DyadicCube) -> bool {
        !(self.contains(other) || other.contains(self))
    }

    pub fn lower_corner(&self) -> Vec<Rational> {
        self.coords.iter().map(|&k| dyadic(k, self.depth)).collect()
    }

    pub fn to_box(&self) -> AxisBox {
        AxisBox {
            lo: self.coords.iter().map(|&k| dyadic(k, self.depth)).collect(),
            hi: self
                .coords
                .iter()
                .map(|&k| dyadic(k + 1, self.depth))
                .collect(),
        }
    }

    /// `(2n+1)Q`: same center, side `(2n+1)ℓ(Q)`; may leave the root.
    pub fn dilate(&self, n: u64) -> AxisBox {
        let side = self.side();
        let grow = &side * Rational::from_integer(BigInt::from(n));
        let b = self.to_box();
        AxisBox {
            lo: b.lo.iter().map(|x| x - &grow).collect(),
            hi: b.hi.iter().map(|x| x + &grow).collect(),
        }
    }

    /// Does the half-open cube contain the point?
    pub fn contains_point(&self, p: &[Rational]) -> bool {
        p.len() == self.dim() && self.to_box().contains_point(p)
    }
}

/// Axis-parallel box `[lo_1,hi_1) × … × [lo_d,hi_d)`.
///
/// `lo_i == hi_i` is allowed for degenerate (point-like) query boxes;
/// distances are taken between closures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BoxRepr")]
pub struct AxisBox {
    #[serde(with = "crate::rational::serde_ratio::vec")]
    pub lo: Vec<Rational>,
    #[serde(with = "crate::rational::serde_ratio::vec")]
    pub hi: Vec<Rational>,
}

#[derive(Deserialize)]
struct BoxRepr {
    #[serde(with = "crate::rational::serde_ratio::vec")]
    lo: Vec<Rational>,
    #[serde(with = "crate::rational::serde_ratio::vec")]
    hi: Vec<Rational>,
}

impl TryFrom<BoxRepr> for AxisBox {
    type Error = Error;
    fn try_from(r: BoxRepr) -> Result<Self, Self::Error> {
        AxisBox::new(r.lo, r.hi)
    }
}

impl AxisBox {
    pub fn new(lo: Vec<Rational>, hi: Vec<Rational>) -> Result<Self, Error> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch(lo.len(), hi.len()));
        }
        if lo.is_empty() {
            return Err(Error::InvalidBox("dimension must be positive".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(Error::InvalidBox("lo exceeds hi".into()));
        }
        Ok(AxisBox { lo, hi })
    }

    pub fn point(p: &[Rational]) -> Self {
        AxisBox {
            lo: p.to_vec(),
            hi: p.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> Rational {
        self.lo
            .iter()
            .zip(&self.hi)
            .fold(Rational::one(), |acc, (a, b)| acc * (b - a))
    }

    /// l∞ diameter: the longest side.
    pub fn diam(&self) -> Rational {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| b - a)
            .max()
            .unwrap_or_else(Rational::zero)
    }

    /// Half-open membership: `lo_i ≤ p_i < hi_i`.
    pub fn contains_point(&self, p: &[Rational]) -> bool {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(p)
            .all(|((a, b), x)| a <= x && x < b)
    }

    pub fn closure_contains_point(&self, p: &[Rational]) -> bool {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(p)
            .all(|((a, b), x)| a <= x && x <= b)
    }

    pub fn closures_intersect(&self, other: &AxisBox) -> bool {
        (0..self.dim()).all(|i| self.lo[i] <= other.hi[i] && other.lo[i] <= self.hi[i])
    }

    /// Closure of `self` lies in the open interior of `other`.
    pub fn strictly_inside(&self, other: &AxisBox) -> bool {
        (0..self.dim()).all(|i| other.lo[i] < self.lo[i] && self.hi[i] < other.hi[i])
    }

    /// Closure of `self` lies in the closure of `other`.
    pub fn inside_closed(&self, other: &AxisBox) -> bool {
        (0..self.dim()).all(|i| other.lo[i] <= self.lo[i] && self.hi[i] <= other.hi[i])
    }

    pub fn intersection(&self, other: &AxisBox) -> Option<AxisBox> {
        let lo: Vec<Rational> = (0..self.dim())
            .map(|i| (&self.lo[i]).max(&other.lo[i]).clone())
            .collect();
        let hi: Vec<Rational> = (0..self.dim())
            .map(|i| (&self.hi[i]).min(&other.hi[i]).clone())
            .collect();
        if lo.iter().zip(&hi).all(|(a, b)| a < b) {
            Some(AxisBox { lo, hi })
        } else {
            None
        }
    }

    /// Grows every side outward by `m`.
    pub fn expand(&self, m: &Rational) -> AxisBox {
        AxisBox {
            lo: self.lo.iter().map(|x| x - m).collect(),
            hi: self.hi.iter().map(|x| x + m).collect(),
        }
    }
}

/// Exact l∞ distance between the closures of two boxes.
pub fn linf_dist(a: &AxisBox, b: &AxisBox) -> Result<Rational, Error> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(linf_dist_unchecked(a, b))
}

pub(crate) fn linf_dist_unchecked(a: &AxisBox, b: &AxisBox) -> Rational {
    let mut best = Rational::zero();
    for i in 0..a.dim() {
        let g1 = &a.lo[i] - &b.hi[i];
        let g2 = &b.lo[i] - &a.hi[i];
        let g = if g1 > g2 { g1 } else { g2 };
        if g.is_positive() && g > best {
            best = g;
        }
    }
    best
}

/// l∞ distance from a point to the closure of a box.
pub(crate) fn point_box_dist(p: &[Rational], b: &AxisBox) -> Rational {
    let mut best = Rational::zero();
    for i in 0..b.dim() {
        let g = if p[i] < b.lo[i] {
            &b.lo[i] - &p[i]
        } else if p[i] > b.hi[i] {
            &p[i] - &b.hi[i]
        } else {
            continue;
        };
        if g > best {
            best = g;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cube(j: u32, k: &[u64]) -> DyadicCube {
        DyadicCube::new(j, k.iter().copied()).unwrap()
    }

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn parent_examples() {
        assert_eq!(cube(1, &[1]).parent().unwrap(), cube(0, &[0]));
        assert_eq!(cube(2, &[3, 1]).parent().unwrap(), cube(1, &[1, 0]));
        assert_eq!(cube(0, &[0]).parent(), Err(Error::RootHasNoParent));
    }

    #[test]
    fn children_examples() {
        let root = DyadicCube::root(1);
        assert_eq!(root.children(1), vec![cube(1, &[0]), cube(1, &[1])]);
        let q = DyadicCube::root(2).children(1);
        assert_eq!(q.len(), 4);
        assert_eq!(q[0], cube(1, &[0, 0]));
        assert_eq!(q[1], cube(1, &[0, 1]));
        assert_eq!(q[3], cube(1, &[1, 1]));
        let eight = root.children(3);
        assert_eq!(eight.len(), 8);
        assert!(eight.iter().all(|c| c.volume() == r(1, 8)));
        let total: Rational = eight.iter().map(|c| c.volume()).sum();
        assert_eq!(total, r(1, 1));
    }

    #[test]
    fn relate_examples() {
        let half = cube(1, &[0]);
        assert_eq!(half.relate(&DyadicCube::root(1)).unwrap(), Relation::QinsideR);
        assert_eq!(half.relate(&cube(1, &[1])).unwrap(), Relation::Disjoint);
        assert_eq!(cube(2, &[1]).relate(&cube(2, &[1])).unwrap(), Relation::Equal);
        assert_eq!(
            DyadicCube::root(1).relate(&half).unwrap(),
            Relation::RinsideQ
        );
        assert!(matches!(
            half.relate(&DyadicCube::root(2)),
            Err(Error::DimensionMismatch(1, 2))
        ));
    }

    #[test]
    fn display_round_trip() {
        let q = DyadicCube::new(3, [5, 2]).unwrap();
        assert_eq!(q.to_string(), "3:5;2");
        assert_eq!("3:5;2".parse::<DyadicCube>().unwrap(), q);
        assert!("3:8".parse::<DyadicCube>().is_err());
        assert!("x".parse::<DyadicCube>().is_err());
    }

    #[test]
    fn distance_examples() {
        let a = AxisBox::new(vec![r(0, 1); 2], vec![r(1, 4); 2]).unwrap();
        let b = AxisBox::new(vec![r(1, 2); 2], vec![r(1, 1); 2]).unwrap();
        assert_eq!(linf_dist(&a, &b).unwrap(), r(1, 4));
        let c = AxisBox::new(vec![r(0, 1)], vec![r(1, 2)]).unwrap();
        let d = AxisBox::new(vec![r(1, 4)], vec![r(3, 4)]).unwrap();
        assert_eq!(linf_dist(&c, &d).unwrap(), r(0, 1));
        let p = AxisBox::point(&[r(0, 1)]);
        let e = AxisBox::new(vec![r(1, 2)], vec![r(3, 4)]).unwrap();
        assert_eq!(linf_dist(&p, &e).unwrap(), r(1, 2));
        assert!(linf_dist(&a, &c).is_err());
    }

    #[test]
    fn dilate_examples() {
        let q = cube(2, &[1]);
        assert_eq!(
            q.dilate(1),
            AxisBox::new(vec![r(0, 1)], vec![r(3, 4)]).unwrap()
        );
        assert_eq!(
            DyadicCube::root(1).dilate(1),
            AxisBox::new(vec![r(-1, 1)], vec![r(2, 1)]).unwrap()
        );
        let q2 = cube(1, &[0, 0]);
        let b = q2.dilate(2);
        assert_eq!(b.diam(), r(5, 2));
        assert_eq!(b.volume(), r(25, 4));
        assert_eq!(b.volume(), r(25, 1) * q2.volume());
        assert_eq!(b.lo[0], r(-1, 1));
        assert_eq!(b.hi[0], r(3, 2));
    }

    #[test]
    fn cube_json_shape() {
        let q = cube(2, &[3, 1]);
        let s = serde_json::to_string(&q).unwrap();
        assert_eq!(s, r#"{"depth":2,"coords":[3,1]}"#);
        let back: DyadicCube = serde_json::from_str(&s).unwrap();
        assert_eq!(back, q);
        assert!(serde_json::from_str::<DyadicCube>(r#"{"depth":1,"coords":[2]}"#).is_err());
        let b = AxisBox::new(vec![r(0, 1)], vec![r(3, 4)]).unwrap();
        assert_eq!(
            serde_json::to_string(&b).unwrap(),
            r#"{"lo":["0/1"],"hi":["3/4"]}"#
        );
    }

    fn arb_cube(dim: usize, max_depth: u32) -> impl Strategy<Value = DyadicCube> {
        (0..=max_depth).prop_flat_map(move |j| {
            prop::collection::vec(0..(1u64 << j), dim)
                .prop_map(move |k| DyadicCube::new(j, k).unwrap())
        })
    }

    fn arb_box(dim: usize) -> impl Strategy<Value = AxisBox> {
        prop::collection::vec((-8i64..8, 0i64..8, 1i64..9), dim).prop_map(|v| {
            let lo: Vec<Rational> = v.iter().map(|&(a, _, q)| r(a, q)).collect();
            let hi: Vec<Rational> = v
                .iter()
                .zip(&lo)
                .map(|(&(_, w, q), l)| l + r(w, q))
                .collect();
            AxisBox::new(lo, hi).unwrap()
        })
    }

    /// Brute-force relation from the rational intervals themselves.
    fn brute_relation(a: &DyadicCube, b: &DyadicCube) -> Relation {
        let (x, y) = (a.to_box(), b.to_box());
        let inside = |p: &AxisBox, q: &AxisBox| {
            (0..p.dim()).all(|i| q.lo[i] <= p.lo[i] && p.hi[i] <= q.hi[i])
        };
        let overlap = (0..x.dim()).all(|i| x.lo[i] < y.hi[i] && y.lo[i] < x.hi[i]);
        match (inside(&x, &y), inside(&y, &x), overlap) {
            (true, true, _) => Relation::Equal,
            (true, false, _) => Relation::QinsideR,
            (false, true, _) => Relation::RinsideQ,
            (false, false, false) => Relation::Disjoint,
            (false, false, true) => panic!("partial overlap of dyadic cubes"),
        }
    }

    proptest! {
        #[test]
        fn children_partition(q in arb_cube(2, 5), g in 1u32..3) {
            let kids = q.children(g);
            prop_assert_eq!(kids.len(), 1usize << (2 * g));
            let total: Rational = kids.iter().map(|c| c.volume()).sum();
            prop_assert_eq!(total, q.volume());
            for (i, a) in kids.iter().enumerate() {
                prop_assert!(q.contains(a));
                for b in &kids[i + 1..] {
                    prop_assert_eq!(a.relate(b).unwrap(), Relation::Disjoint);
                    prop_assert!(a < b);
                }
            }
            for c in q.children(1) {
                prop_assert_eq!(c.parent().unwrap(), q.clone());
            }
        }

        #[test]
        fn relate_matches_brute_force(a in arb_cube(2, 4), b in arb_cube(2, 4)) {
            prop_assert_eq!(a.relate(&b).unwrap(), brute_relation(&a, &b));
        }

        #[test]
        fn dist_triangle_like(a in arb_box(2), b in arb_box(2), c in arb_box(2)) {
            let ab = linf_dist(&a, &b).unwrap();
            let bc = linf_dist(&b, &c).unwrap();
            let ac = linf_dist(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + b.diam());
            prop_assert_eq!(linf_dist(&a, &b).unwrap(), linf_dist(&b, &a).unwrap());
        }

        #[test]
        fn dilation_margin(q in arb_cube(2, 5), n in 1u64..4) {
            let big = q.dilate(n);
            let b = q.to_box();
            prop_assert!(b.inside_closed(&big));
            // distance from Q to the complement of the dilation: smallest face gap
            let gap = (0..b.dim())
                .flat_map(|i| [&b.lo[i] - &big.lo[i], &big.hi[i] - &b.hi[i]])
                .min()
                .unwrap();
            prop_assert_eq!(gap, q.side() * Rational::from_integer(n.into()));
            let f = Rational::from_integer((2 * n + 1).into());
            prop_assert_eq!(big.volume(), num_traits::pow(f, 2) * q.volume());
        }
    }
}
