//! Enclosures of `μ_{α,E}(R) = ∫_R dist(x,E)^{-α} dx`, assembled cell by
//! cell over the free decomposition of `R`.

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::sums::check_alpha;
use crate::error::{Error, Result};
use crate::families::enumerate_fe;
use crate::interval::{pow_enclosure, Interval};
use crate::lattice::{point_box_dist, DyadicCube, MAX_DEPTH};
use crate::rational::{serde_ratio, Rational};
use crate::sets::{Point, SetModel, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MuOptions {
    /// How many times a free cell touching `E` may be split.
    pub split_budget: u32,
    /// Integrate every cell exactly when `E` is a finite subset of the line.
    pub exact_points_1d: bool,
}

impl Default for MuOptions {
    fn default() -> Self {
        MuOptions {
            split_budget: 6,
            exact_points_1d: false,
        }
    }
}

/// Which bound produced each cell's contribution.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodTally {
    pub dist_bound: u64,
    pub refined: u64,
    pub boundary_layer: u64,
    pub point_bound: u64,
    pub exact_1d: u64,
    pub unbounded: u64,
}

impl MethodTally {
    fn add(&mut self, o: &MethodTally) {
        self.dist_bound += o.dist_bound;
        self.refined += o.refined;
        self.boundary_layer += o.boundary_layer;
        self.point_bound += o.point_bound;
        self.exact_1d += o.exact_1d;
        self.unbounded += o.unbounded;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureEnclosure {
    pub root: DyadicCube,
    #[serde(with = "serde_ratio")]
    pub alpha: Rational,
    #[serde(rename = "J")]
    pub j: u32,
    #[serde(with = "serde_ratio")]
    pub lower: Rational,
    /// `None` means no finite upper bound could be certified.
    #[serde(with = "serde_ratio::option")]
    pub upper: Option<Rational>,
    pub unbounded: bool,
    /// First cell (cube order) without a finite bound.
    pub unresolved: Option<DyadicCube>,
    pub methods: MethodTally,
}

impl MeasureEnclosure {
    pub fn interval(&self) -> Option<Interval> {
        self.upper
            .as_ref()
            .map(|u| Interval::new(self.lower.clone(), u.clone()))
    }

    pub fn contains_f64(&self, x: f64) -> bool {
        crate::rational::to_f64(&self.lower) <= x
            && self
                .upper
                .as_ref()
                .map_or(true, |u| x <= crate::rational::to_f64(u))
    }
}

#[derive(Debug, Clone, Default)]
struct Part {
    lo: Rational,
    hi: Option<Rational>,
    unresolved: Option<DyadicCube>,
    tally: MethodTally,
}

impl Part {
    fn new(lo: Rational, hi: Option<Rational>) -> Part {
        Part {
            lo,
            hi,
            ..Default::default()
        }
    }

    fn plus(mut self, o: Part) -> Part {
        self.lo += o.lo;
        self.hi = match (self.hi, o.hi) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        if self.unresolved.is_none() {
            self.unresolved = o.unresolved;
        }
        self.tally.add(&o.tally);
        self
    }

    fn unbounded(q: &DyadicCube, lo: Rational) -> Part {
        let mut p = Part::new(lo, None);
        p.unresolved = Some(q.clone());
        p.tally.unbounded += 1;
        p
    }
}

fn rat(n: u64) -> Rational {
    Rational::from_integer(n.into())
}

struct Ctx<'a> {
    e: &'a SetModel,
    alpha: &'a Rational,
    d: usize,
    opts: MuOptions,
}

impl Ctx<'_> {
    fn points(&self) -> Option<&[Point]> {
        self.e.finite_points().filter(|p| !p.is_empty())
    }

    fn exact_1d_ok(&self) -> bool {
        self.d == 1 && self.points().is_some() && self.alpha < &Rational::one()
    }

    /// `∫_{[a,b)} dist(x,E)^{-α} dx` on the line, split at the points of `E`
    /// and at midpoints between neighbours.
    fn exact_1d(&self, q: &DyadicCube) -> Interval {
        let pts = self.points().unwrap();
        let b = q.to_box();
        let (a, bb) = (&b.lo[0], &b.hi[0]);
        let start = pts.partition_point(|p| &p[0] < a);
        let mut cand: Vec<&Rational> = Vec::new();
        if start > 0 {
            cand.push(&pts[start - 1][0]);
        }
        let mut i = start;
        while i < pts.len() && &pts[i][0] < bb {
            cand.push(&pts[i][0]);
            i += 1;
        }
        if i < pts.len() {
            cand.push(&pts[i][0]);
        }
        let mut cuts: Vec<Rational> = vec![a.clone(), bb.clone()];
        for w in cand.windows(2) {
            cuts.push((w[0] + w[1]) / rat(2));
        }
        cuts.extend(cand.iter().map(|p| (*p).clone()));
        cuts.retain(|x| a <= x && x <= bb);
        cuts.sort();
        cuts.dedup();
        let one_minus = Rational::one() - self.alpha;
        let scale = one_minus.recip();
        let f = |t: &Rational| -> Interval {
            if t.is_zero() {
                Interval::zero()
            } else {
                pow_enclosure(t, &one_minus).scale(&scale)
            }
        };
        let mut acc = Interval::zero();
        for w in cuts.windows(2) {
            let (u, v) = (&w[0], &w[1]);
            let m = (u + v) / rat(2);
            let p = cand
                .iter()
                .min_by(|x, y| (&m - **x).abs().cmp(&(&m - **y).abs()))
                .unwrap();
            let (near, far) = if *p <= u { (u - *p, v - *p) } else { (*p - v, *p - u) };
            let (fn_, ff) = (f(&near), f(&far));
            let lo = &ff.lo - &fn_.hi;
            let piece = Interval::new(
                if lo.is_negative() { Rational::zero() } else { lo },
                &ff.hi - &fn_.lo,
            );
            acc = &acc + &piece;
        }
        acc
    }

    /// Upper bound from the points of a finite `E`: near points contribute at
    /// most the integral over a cube centred on them, far points at most
    /// `|Q|·δ^{-α}`.
    fn point_bound(&self, q: &DyadicCube) -> Option<Rational> {
        let pts = self.points()?;
        let b = q.to_box();
        let side = q.side();
        let mut near = 0u64;
        let mut far: Option<Rational> = None;
        for p in pts {
            let dp = point_box_dist(p, &b);
            if dp <= side {
                near += 1;
            } else if far.as_ref().map_or(true, |f| &dp < f) {
                far = Some(dp);
            }
        }
        let dm = rat(self.d as u64) - self.alpha;
        let mut total = Rational::zero();
        if near > 0 {
            let half = &side / rat(2);
            let k = rat(near * self.d as u64 * (1u64 << self.d)) / &dm;
            total += pow_enclosure(&half, &dm).scale(&k).hi;
        }
        if let Some(delta) = far {
            total += pow_enclosure(&delta, &-self.alpha).scale(&q.volume()).hi;
        }
        Some(total)
    }

    fn fallback(&self, q: &DyadicCube, lo: Rational) -> Part {
        let mut best: Option<(Rational, bool)> = None;
        if self.d == 1 && self.alpha < &Rational::one() {
            let one_minus = Rational::one() - self.alpha;
            let half = q.side() / rat(2);
            let bl = pow_enclosure(&half, &one_minus)
                .scale(&(rat(2) / &one_minus))
                .hi;
            best = Some((bl, true));
        }
        if let Some(pb) = self.point_bound(q) {
            if best.as_ref().map_or(true, |(b, _)| &pb < b) {
                best = Some((pb, false));
            }
        }
        match best {
            Some((hi, layer)) => {
                let mut p = Part::new(lo, Some(hi));
                if layer {
                    p.tally.boundary_layer += 1;
                } else {
                    p.tally.point_bound += 1;
                }
                p
            }
            None => Part::unbounded(q, lo),
        }
    }

    /// A cell known to avoid `E`; `cap` bounds `dist(x,E)` on it when known.
    fn free_cell(&self, q: &DyadicCube, dist: &Interval, cap: Option<&Rational>, splits: u32) -> Result<Part> {
        let vol = q.volume();
        if self.alpha.is_zero() {
            return Ok(Part::new(vol.clone(), Some(vol)));
        }
        if self.opts.exact_points_1d && self.exact_1d_ok() {
            let x = self.exact_1d(q);
            let mut p = Part::new(x.lo, Some(x.hi));
            p.tally.exact_1d += 1;
            return Ok(p);
        }
        let mut up = &dist.hi + q.side();
        if let Some(c) = cap {
            if c < &up {
                up = c.clone();
            }
        }
        let lo = pow_enclosure(&up, &-self.alpha).scale(&vol).lo;
        if dist.lo.is_positive() {
            let hi = pow_enclosure(&dist.lo, &-self.alpha).scale(&vol).hi;
            let mut p = Part::new(lo, Some(hi));
            p.tally.dist_bound += 1;
            return Ok(p);
        }
        if splits > 0 && q.depth() < MAX_DEPTH {
            let mut acc = Part::new(Rational::zero(), Some(Rational::zero()));
            for c in q.children(1) {
                let dc = self.e.dist(&c.to_box())?;
                acc = acc.plus(self.free_cell(&c, &dc, cap, splits - 1)?);
            }
            if acc.lo < lo {
                acc.lo = lo;
            }
            acc.tally.refined += 1;
            return Ok(acc);
        }
        Ok(self.fallback(q, lo))
    }

    /// A depth-`J` cell that may meet `E`.
    fn residual_cell(&self, q: &DyadicCube) -> Part {
        let vol = q.volume();
        if self.alpha.is_zero() {
            return Part::new(Rational::zero(), Some(vol));
        }
        if self.exact_1d_ok() {
            let x = self.exact_1d(q);
            let mut p = Part::new(x.lo, Some(x.hi));
            p.tally.exact_1d += 1;
            return p;
        }
        match self.point_bound(q) {
            Some(hi) => {
                let mut p = Part::new(Rational::zero(), Some(hi));
                p.tally.point_bound += 1;
                p
            }
            None => Part::unbounded(q, Rational::zero()),
        }
    }
}

pub fn mu_enclosure(e: &SetModel, r: &DyadicCube, alpha: &Rational, j: u32) -> Result<MeasureEnclosure> {
    mu_enclosure_with(e, r, alpha, j, MuOptions::default())
}

/// Requires `R` to meet `E`.
pub fn mu_enclosure_with(
    e: &SetModel,
    r: &DyadicCube,
    alpha: &Rational,
    j: u32,
    opts: MuOptions,
) -> Result<MeasureEnclosure> {
    check_alpha(alpha, r.dim(), false)?;
    if e.is_empty() {
        return Err(Error::EmptySet);
    }
    let ctx = Ctx {
        e,
        alpha,
        d: r.dim(),
        opts,
    };
    if opts.exact_points_1d && ctx.exact_1d_ok() && e.dim() == r.dim() {
        let x = ctx.exact_1d(r);
        return Ok(MeasureEnclosure {
            root: r.clone(),
            alpha: alpha.clone(),
            j,
            lower: x.lo,
            upper: Some(x.hi),
            unbounded: false,
            unresolved: None,
            methods: MethodTally {
                exact_1d: 1,
                ..MethodTally::default()
            },
        });
    }
    let fe = enumerate_fe(e, r, j)?;
    let free_parts: Vec<Result<Part>> = fe
        .free
        .par_iter()
        .map(|f| {
            let parent = f.cube.parent()?;
            let cap = (e.cube_status(&parent) == Status::Intersects).then(|| f.cube.side() * rat(2));
            ctx.free_cell(&f.cube, &f.dist, cap.as_ref(), opts.split_budget)
        })
        .collect();
    let res_parts: Vec<Part> = fe.residual.par_iter().map(|q| ctx.residual_cell(q)).collect();
    let mut acc = Part::new(Rational::zero(), Some(Rational::zero()));
    for p in free_parts {
        acc = acc.plus(p?);
    }
    for p in res_parts {
        acc = acc.plus(p);
    }
    Ok(MeasureEnclosure {
        root: r.clone(),
        alpha: alpha.clone(),
        j,
        lower: acc.lo,
        unbounded: acc.hi.is_none(),
        upper: acc.hi,
        unresolved: acc.unresolved,
        methods: acc.tally,
    })
}

/// `μ_{α,E}(Q)` for any cube: free cubes are bounded directly, others
/// through their own decomposition to depth offset `j`.
pub fn mu_cube(e: &SetModel, q: &DyadicCube, alpha: &Rational, j: u32, opts: MuOptions) -> Result<MeasureEnclosure> {
    if e.cube_status(q).meets() {
        return mu_enclosure_with(e, q, alpha, j, opts);
    }
    check_alpha(alpha, q.dim(), false)?;
    let ctx = Ctx {
        e,
        alpha,
        d: q.dim(),
        opts,
    };
    let dist = e.dist(&q.to_box())?;
    let cap = match q.parent() {
        Ok(p) if e.cube_status(&p) == Status::Intersects => Some(q.side() * rat(2)),
        _ => None,
    };
    let p = ctx.free_cell(q, &dist, cap.as_ref(), opts.split_budget)?;
    Ok(MeasureEnclosure {
        root: q.clone(),
        alpha: alpha.clone(),
        j,
        lower: p.lo,
        unbounded: p.hi.is_none(),
        upper: p.hi,
        unresolved: p.unresolved,
        methods: p.tally,
    })
}
