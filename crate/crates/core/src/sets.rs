//! Set models for `E`: three-valued intersection oracles and certified
//! distance intervals.
//!
//! Finite point sets answer exactly. Attractors of rational similarity IFS
//! are explored through images of their bounding box, which is spanned by
//! the fixed points of the maps; boundary-touching cases come back
//! `Undetermined` instead of guessing.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::lattice::{linf_dist_unchecked, point_box_dist, AxisBox, DyadicCube};
use crate::rational::{Rational, WireRational};

pub type Point = Vec<Rational>;

/// Default refinement depth for IFS oracles.
pub const DEFAULT_BUDGET: u32 = 24;

/// Frontier size beyond which an IFS query gives up.
const NODE_CAP: usize = 1 << 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Intersects,
    Free,
    Undetermined,
}

impl Status {
    /// Conservative commitment: only a certain `Free` counts as free.
    pub fn meets(self) -> bool {
        self != Status::Free
    }
}

/// `x ↦ ratio·x + shift`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimilarityMap {
    pub ratio: Rational,
    pub shift: Vec<Rational>,
}

impl SimilarityMap {
    pub fn apply(&self, x: &[Rational]) -> Point {
        x.iter()
            .zip(&self.shift)
            .map(|(xi, ti)| &self.ratio * xi + ti)
            .collect()
    }

    pub fn apply_box(&self, b: &AxisBox) -> AxisBox {
        AxisBox {
            lo: self.apply(&b.lo),
            hi: self.apply(&b.hi),
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &SimilarityMap) -> SimilarityMap {
        SimilarityMap {
            ratio: &self.ratio * &other.ratio,
            shift: self.apply(&other.shift),
        }
    }

    pub fn fixed_point(&self) -> Point {
        let k = (Rational::one() - &self.ratio).recip();
        self.shift.iter().map(|t| t * &k).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ifs {
    pub maps: Vec<SimilarityMap>,
    pub hull: AxisBox,
    /// Smallest box containing the attractor.
    bbox: AxisBox,
    fixed_points: Vec<Point>,
    max_ratio: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Kind {
    Points(Vec<Point>),
    Corners { family: Vec<DyadicCube>, points: Vec<Point> },
    Ifs(Ifs),
    Union { parts: Vec<SetModel>, merged: Option<Vec<Point>> },
    Empty,
}

/// A set `E ⊂ ℝ^d` behind a verified oracle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SetSpec", into = "SetSpec")]
pub struct SetModel {
    kind: Arc<Kind>,
    dim: usize,
    budget: u32,
}

fn normalize_points(mut pts: Vec<Point>) -> Vec<Point> {
    pts.sort();
    pts.dedup();
    pts
}

/// Half-open membership; a degenerate axis is treated as closed.
fn box_member(a: &AxisBox, p: &[Rational]) -> bool {
    a.lo.iter()
        .zip(&a.hi)
        .zip(p)
        .all(|((lo, hi), x)| lo <= x && (x < hi || (lo == hi && x == hi)))
}

/// Bounding box of the attractor of positive-ratio similarities: the box
/// spanned by the fixed points is invariant, and its faces hold fixed points.
fn bounding_box(fixed: &[Point]) -> AxisBox {
    let d = fixed[0].len();
    let lo = (0..d).map(|i| fixed.iter().map(|p| &p[i]).min().unwrap().clone()).collect();
    let hi = (0..d).map(|i| fixed.iter().map(|p| &p[i]).max().unwrap().clone()).collect();
    AxisBox::new(lo, hi).expect("lo <= hi")
}

/// Closed box `b` can meet `a` under the same conventions as `box_member`.
fn may_meet(a: &AxisBox, b: &AxisBox) -> bool {
    (0..a.dim()).all(|i| {
        if a.lo[i] == a.hi[i] {
            b.lo[i] <= a.lo[i] && a.lo[i] <= b.hi[i]
        } else {
            b.lo[i] < a.hi[i] && b.hi[i] >= a.lo[i]
        }
    })
}

/// Every point of the closed box `b` is a member of `a`.
fn inside_half_open(b: &AxisBox, a: &AxisBox) -> bool {
    (0..a.dim()).all(|i| {
        if a.lo[i] == a.hi[i] {
            b.lo[i] == a.lo[i] && b.hi[i] == a.hi[i]
        } else {
            a.lo[i] <= b.lo[i] && b.hi[i] < a.hi[i]
        }
    })
}

impl SetModel {
    pub fn points(points: Vec<Point>) -> Result<SetModel> {
        let dim = points
            .first()
            .map(|p| p.len())
            .ok_or_else(|| Error::InvalidSet("point list is empty".into()))?;
        if dim == 0 {
            return Err(Error::InvalidSet("points need a positive dimension".into()));
        }
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch(dim, p.len()));
        }
        Ok(SetModel {
            kind: Arc::new(Kind::Points(normalize_points(points))),
            dim,
            budget: DEFAULT_BUDGET,
        })
    }

    pub fn ifs(maps: Vec<SimilarityMap>, hull: AxisBox) -> Result<SetModel> {
        let dim = hull.dim();
        if maps.is_empty() {
            return Err(Error::InvalidSet("an IFS needs at least one map".into()));
        }
        for (i, m) in maps.iter().enumerate() {
            if m.shift.len() != dim {
                return Err(Error::DimensionMismatch(dim, m.shift.len()));
            }
            if !m.ratio.is_positive() || m.ratio >= Rational::one() {
                return Err(Error::InvalidSet(format!("map {i}: ratio must lie in (0,1)")));
            }
            if !m.apply_box(&hull).inside_closed(&hull) {
                return Err(Error::InvalidSet(format!("map {i} does not send the hull into itself")));
            }
        }
        let fixed_points: Vec<Point> = maps.iter().map(SimilarityMap::fixed_point).collect();
        let bbox = bounding_box(&fixed_points);
        let max_ratio = maps.iter().map(|m| m.ratio.clone()).max().unwrap();
        Ok(SetModel {
            kind: Arc::new(Kind::Ifs(Ifs {
                maps,
                hull,
                bbox,
                fixed_points,
                max_ratio,
            })),
            dim,
            budget: DEFAULT_BUDGET,
        })
    }

    /// Middle-thirds Cantor set `{x/3, x/3 + 2/3}` on `[0,1]`.
    pub fn cantor() -> SetModel {
        let third = Rational::new(1.into(), 3.into());
        let maps = vec![
            SimilarityMap {
                ratio: third.clone(),
                shift: vec![Rational::zero()],
            },
            SimilarityMap {
                ratio: third,
                shift: vec![Rational::new(2.into(), 3.into())],
            },
        ];
        let hull = AxisBox::new(vec![Rational::zero()], vec![Rational::one()]).unwrap();
        SetModel::ifs(maps, hull).unwrap()
    }

    pub fn union(parts: Vec<SetModel>) -> Result<SetModel> {
        let dim = parts
            .first()
            .map(|p| p.dim)
            .ok_or_else(|| Error::InvalidSet("union of nothing".into()))?;
        if let Some(p) = parts.iter().find(|p| p.dim != dim) {
            return Err(Error::DimensionMismatch(dim, p.dim));
        }
        let merged = if parts.iter().all(|p| p.finite_points().is_some()) {
            Some(normalize_points(
                parts
                    .iter()
                    .flat_map(|p| p.finite_points().unwrap().iter().cloned())
                    .collect(),
            ))
        } else {
            None
        };
        let budget = parts.iter().map(|p| p.budget).max().unwrap();
        Ok(SetModel {
            kind: Arc::new(Kind::Union { parts, merged }),
            dim,
            budget,
        })
    }

    pub fn empty(dim: usize) -> SetModel {
        assert!(dim > 0);
        SetModel {
            kind: Arc::new(Kind::Empty),
            dim,
            budget: DEFAULT_BUDGET,
        }
    }

    pub fn with_budget(mut self, budget: u32) -> SetModel {
        self.budget = budget;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn budget(&self) -> u32 {
        self.budget
    }

    /// True when the model certainly has no points.
    pub fn is_empty(&self) -> bool {
        match &*self.kind {
            Kind::Empty => true,
            Kind::Union { parts, .. } => parts.iter().all(SetModel::is_empty),
            _ => false,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match &*self.kind {
            Kind::Points(_) => "points",
            Kind::Corners { .. } => "corners",
            Kind::Ifs(_) => "ifs",
            Kind::Union { .. } => "union",
            Kind::Empty => "empty",
        }
    }

    /// The point list when `E` is finite.
    pub fn finite_points(&self) -> Option<&[Point]> {
        match &*self.kind {
            Kind::Points(p) | Kind::Corners { points: p, .. } => Some(p),
            Kind::Union { merged, .. } => merged.as_deref(),
            Kind::Empty => Some(&[]),
            Kind::Ifs(_) => None,
        }
    }

    pub fn as_ifs(&self) -> Option<&Ifs> {
        match &*self.kind {
            Kind::Ifs(f) => Some(f),
            _ => None,
        }
    }

    pub fn intersect_status(&self, a: &AxisBox, budget: u32) -> Status {
        if let Some(pts) = self.finite_points() {
            return if points_meet(pts, a) {
                Status::Intersects
            } else {
                Status::Free
            };
        }
        match &*self.kind {
            Kind::Ifs(f) => ifs_status(f, a, budget),
            Kind::Union { parts, .. } => {
                let mut out = Status::Free;
                for p in parts {
                    match p.intersect_status(a, budget) {
                        Status::Intersects => return Status::Intersects,
                        Status::Undetermined => out = Status::Undetermined,
                        Status::Free => {}
                    }
                }
                out
            }
            _ => unreachable!(),
        }
    }

    /// `intersect_status` at the model's own budget.
    pub fn status(&self, a: &AxisBox) -> Status {
        self.intersect_status(a, self.budget)
    }

    pub fn cube_status(&self, q: &DyadicCube) -> Status {
        self.status(&q.to_box())
    }

    pub fn dist_interval(&self, a: &AxisBox, budget: u32) -> Result<Interval> {
        if self.is_empty() {
            return Err(Error::EmptySet);
        }
        if a.dim() != self.dim {
            return Err(Error::DimensionMismatch(self.dim, a.dim()));
        }
        if let Some(pts) = self.finite_points() {
            return Ok(Interval::exact(points_dist(pts, a)));
        }
        match &*self.kind {
            Kind::Ifs(f) => Ok(ifs_dist(f, a, budget)),
            Kind::Union { parts, .. } => {
                let mut out: Option<Interval> = None;
                for p in parts.iter().filter(|p| !p.is_empty()) {
                    let d = p.dist_interval(a, budget)?;
                    out = Some(match out {
                        None => d,
                        Some(o) => o.min(&d),
                    });
                }
                Ok(out.unwrap())
            }
            _ => unreachable!(),
        }
    }

    /// Distance interval with a budget matched to the size of `a`.
    pub fn dist(&self, a: &AxisBox) -> Result<Interval> {
        let scale = a.diam();
        self.dist_interval(a, self.budget_for_scale(&scale))
    }

    /// Smallest refinement depth whose IFS pieces are a sixteenth of
    /// `scale` (or smaller), capped at the model budget.
    pub fn budget_for_scale(&self, scale: &Rational) -> u32 {
        match &*self.kind {
            Kind::Ifs(f) => {
                if !scale.is_positive() {
                    return self.budget;
                }
                let target = scale / Rational::from_integer(16.into());
                let mut size = f.bbox.diam();
                let mut b = 0;
                while b < self.budget && size > target {
                    size *= &f.max_ratio;
                    b += 1;
                }
                b
            }
            Kind::Union { parts, .. } => parts
                .iter()
                .map(|p| p.budget_for_scale(scale).min(self.budget))
                .max()
                .unwrap_or(0),
            _ => self.budget,
        }
    }

    /// A model that agrees with `self` for boxes inside `region` whenever the
    /// true distance is at most `margin`; larger distances come back larger
    /// than `margin`. Finite sets drop far points, other kinds are unchanged.
    pub fn localize(&self, region: &AxisBox, margin: &Rational) -> SetModel {
        let Some(pts) = self.finite_points() else {
            return self.clone();
        };
        if pts.is_empty() {
            return self.clone();
        }
        let mut kept: Vec<Point> = pts
            .iter()
            .filter(|p| &point_box_dist(p, region) <= margin)
            .cloned()
            .collect();
        if kept.is_empty() {
            let nearest = pts
                .iter()
                .min_by(|a, b| point_box_dist(a, region).cmp(&point_box_dist(b, region)))
                .unwrap();
            kept.push(nearest.clone());
        }
        SetModel {
            kind: Arc::new(Kind::Points(kept)),
            dim: self.dim,
            budget: self.budget,
        }
    }
}

/// `{a_Q : Q ∈ S}`, the lower corners of a cube family.
pub fn corner_set(family: &[DyadicCube]) -> Result<SetModel> {
    let dim = family.first().map(|q| q.dim()).ok_or(Error::EmptyFamily)?;
    if let Some(q) = family.iter().find(|q| q.dim() != dim) {
        return Err(Error::DimensionMismatch(dim, q.dim()));
    }
    let mut fam = family.to_vec();
    fam.sort();
    fam.dedup();
    let points = normalize_points(fam.iter().map(|q| q.lower_corner()).collect());
    Ok(SetModel {
        kind: Arc::new(Kind::Corners {
            family: fam,
            points,
        }),
        dim,
        budget: DEFAULT_BUDGET,
    })
}

fn points_meet(pts: &[Point], a: &AxisBox) -> bool {
    let start = pts.partition_point(|p| p[0] < a.lo[0]);
    for p in &pts[start..] {
        if p[0] > a.hi[0] || (p[0] == a.hi[0] && a.lo[0] != a.hi[0]) {
            break;
        }
        if box_member(a, p) {
            return true;
        }
    }
    false
}

/// Exact distance; scans outward from `a` along the first axis, which is the
/// sort key, and stops once that axis alone rules out improvement.
fn points_dist(pts: &[Point], a: &AxisBox) -> Rational {
    let start = pts.partition_point(|p| p[0] < a.lo[0]);
    let mut best: Option<Rational> = None;
    for p in &pts[start..] {
        let gap = &p[0] - &a.hi[0];
        if let Some(b) = &best {
            if &gap >= b {
                break;
            }
        }
        let d = point_box_dist(p, a);
        if best.as_ref().map_or(true, |b| &d < b) {
            best = Some(d);
        }
    }
    for p in pts[..start].iter().rev() {
        let gap = &a.lo[0] - &p[0];
        if let Some(b) = &best {
            if &gap >= b {
                break;
            }
        }
        let d = point_box_dist(p, a);
        if best.as_ref().map_or(true, |b| &d < b) {
            best = Some(d);
        }
    }
    best.expect("non-empty point set")
}

impl Ifs {
    fn identity(&self) -> SimilarityMap {
        SimilarityMap {
            ratio: Rational::one(),
            shift: vec![Rational::zero(); self.hull.dim()],
        }
    }

    /// Known points of `E` inside the piece `w(E)`.
    fn sample_points<'a>(&'a self, w: &'a SimilarityMap) -> impl Iterator<Item = Point> + 'a {
        let own = if w.ratio.is_one() {
            None
        } else {
            Some(w.fixed_point())
        };
        own.into_iter()
            .chain(self.fixed_points.iter().map(move |fp| w.apply(fp)))
    }
}

/// `w⁻¹(a) ∩ bbox` with a closed-upper flag per axis: whether `E` meets
/// `w(bbox) ∩ a` depends only on this box.
type Problem = Vec<(Rational, Rational, bool)>;

fn problem(f: &Ifs, w: &SimilarityMap, a: &AxisBox) -> Problem {
    (0..a.dim())
        .map(|i| {
            let lo = (&a.lo[i] - &w.shift[i]) / &w.ratio;
            let hi = (&a.hi[i] - &w.shift[i]) / &w.ratio;
            let closed = a.lo[i] == a.hi[i];
            let lo = lo.max(f.bbox.lo[i].clone());
            if hi > f.bbox.hi[i] {
                (lo, f.bbox.hi[i].clone(), true)
            } else {
                (lo, hi, closed)
            }
        })
        .collect()
}

/// Breadth-first over pieces `w(bbox)`. A piece posing a problem already
/// met elsewhere is dropped: any point it would find is found through the
/// earlier piece. Dropping rules out a `Free` answer.
fn ifs_status(f: &Ifs, a: &AxisBox, budget: u32) -> Status {
    if !may_meet(a, &f.bbox) {
        return Status::Free;
    }
    let root = f.identity();
    let mut seen: HashSet<Problem> = HashSet::new();
    seen.insert(problem(f, &root, a));
    let mut frontier = vec![root];
    let mut dropped = false;
    let mut level = 0;
    loop {
        let mut next = Vec::new();
        for w in &frontier {
            if f.sample_points(w).any(|p| box_member(a, &p)) {
                return Status::Intersects;
            }
            let img = w.apply_box(&f.bbox);
            if inside_half_open(&img, a) {
                return Status::Intersects;
            }
            if level < budget {
                for m in &f.maps {
                    let c = w.compose(m);
                    if !may_meet(a, &c.apply_box(&f.bbox)) {
                        continue;
                    }
                    if seen.insert(problem(f, &c, a)) {
                        next.push(c);
                    } else {
                        dropped = true;
                    }
                }
            }
        }
        if level >= budget || next.len() > NODE_CAP {
            return Status::Undetermined;
        }
        if next.is_empty() {
            return if dropped { Status::Undetermined } else { Status::Free };
        }
        frontier = next;
        level += 1;
    }
}

struct Node {
    dist: Rational,
    seq: u64,
    depth: u32,
    map: SimilarityMap,
}

impl PartialEq for Node {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Node {
    // reversed: BinaryHeap pops the nearest piece, oldest first on ties
    fn cmp(&self, o: &Self) -> Ordering {
        o.dist.cmp(&self.dist).then(o.seq.cmp(&self.seq))
    }
}

/// Best-first branch and bound over the pieces `w(bbox)`.
fn ifs_dist(f: &Ifs, a: &AxisBox, budget: u32) -> Interval {
    let mut best_hi: Option<Rational> = None;
    let seen = |p: Point, best: &mut Option<Rational>| {
        let d = point_box_dist(&p, a);
        if best.as_ref().map_or(true, |b| &d < b) {
            *best = Some(d);
        }
    };
    let root = f.identity();
    for p in f.sample_points(&root) {
        seen(p, &mut best_hi);
    }
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Node {
        dist: linf_dist_unchecked(&f.bbox, a),
        seq,
        depth: 0,
        map: root,
    });
    let mut popped = 0usize;
    let lo = loop {
        let node = heap.pop().expect("frontier never empties before a cut");
        let hi = best_hi.as_ref().unwrap();
        if &node.dist >= hi {
            break hi.clone();
        }
        popped += 1;
        if node.depth >= budget || popped > NODE_CAP {
            break node.dist;
        }
        for m in &f.maps {
            let c = node.map.compose(m);
            for p in f.sample_points(&c) {
                seen(p, &mut best_hi);
            }
            seq += 1;
            heap.push(Node {
                dist: linf_dist_unchecked(&c.apply_box(&f.bbox), a),
                seq,
                depth: node.depth + 1,
                map: c,
            });
        }
    };
    Interval::new(lo, best_hi.unwrap())
}

#[derive(Serialize, Deserialize)]
pub struct MapSpec {
    ratio: WireRational,
    shift: Vec<WireRational>,
}

/// Wire form of a set description.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SetSpec {
    Points {
        points: Vec<Vec<WireRational>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        budget: Option<u32>,
    },
    Ifs {
        maps: Vec<MapSpec>,
        hull: AxisBox,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        budget: Option<u32>,
    },
    Union {
        parts: Vec<SetSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        budget: Option<u32>,
    },
    Corners {
        family: Vec<DyadicCube>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        budget: Option<u32>,
    },
    Empty {
        dim: usize,
    },
}

fn unwire(v: Vec<WireRational>) -> Vec<Rational> {
    v.into_iter().map(|w| w.0).collect()
}

fn wire(v: &[Rational]) -> Vec<WireRational> {
    v.iter().cloned().map(WireRational).collect()
}

impl TryFrom<SetSpec> for SetModel {
    type Error = Error;
    fn try_from(s: SetSpec) -> Result<SetModel> {
        let (model, budget) = match s {
            SetSpec::Points { points, budget } => (
                SetModel::points(points.into_iter().map(unwire).collect())?,
                budget,
            ),
            SetSpec::Ifs { maps, hull, budget } => (
                SetModel::ifs(
                    maps.into_iter()
                        .map(|m| SimilarityMap {
                            ratio: m.ratio.0,
                            shift: unwire(m.shift),
                        })
                        .collect(),
                    hull,
                )?,
                budget,
            ),
            SetSpec::Union { parts, budget } => (
                SetModel::union(
                    parts
                        .into_iter()
                        .map(SetModel::try_from)
                        .collect::<Result<Vec<_>>>()?,
                )?,
                budget,
            ),
            SetSpec::Corners { family, budget } => (corner_set(&family)?, budget),
            SetSpec::Empty { dim } => {
                if dim == 0 {
                    return Err(Error::InvalidSet("dimension must be positive".into()));
                }
                (SetModel::empty(dim), None)
            }
        };
        Ok(match budget {
            Some(b) => model.with_budget(b),
            None => model,
        })
    }
}

impl From<SetModel> for SetSpec {
    fn from(m: SetModel) -> SetSpec {
        let budget = (m.budget != DEFAULT_BUDGET).then_some(m.budget);
        match &*m.kind {
            Kind::Points(p) => SetSpec::Points {
                points: p.iter().map(|x| wire(x)).collect(),
                budget,
            },
            Kind::Corners { family, .. } => SetSpec::Corners {
                family: family.clone(),
                budget,
            },
            Kind::Ifs(f) => SetSpec::Ifs {
                maps: f
                    .maps
                    .iter()
                    .map(|mp| MapSpec {
                        ratio: WireRational(mp.ratio.clone()),
                        shift: wire(&mp.shift),
                    })
                    .collect(),
                hull: f.hull.clone(),
                budget,
            },
            Kind::Union { parts, .. } => SetSpec::Union {
                parts: parts.iter().cloned().map(SetSpec::from).collect(),
                budget: (parts.iter().map(|p| p.budget).max() != Some(m.budget))
                    .then_some(m.budget),
            },
            Kind::Empty => SetSpec::Empty { dim: m.dim },
        }
    }
}
