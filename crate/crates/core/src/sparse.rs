//! Carleson packing constants and well-sparse witnesses.

use std::collections::{HashMap, HashSet};

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::porosity::largest_free_cube;
use crate::error::{Error, Result};
use crate::families::CubeFamily;
use crate::lattice::DyadicCube;
use crate::rational::{serde_ratio, Rational};
use crate::sets::{SetModel, Status};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootRatio {
    pub root: DyadicCube,
    #[serde(with = "serde_ratio")]
    pub ratio: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CarlesonReport {
    pub family: CubeFamily,
    pub ratios: Vec<RootRatio>,
    #[serde(with = "serde_ratio")]
    pub xi_hat: Rational,
}

/// `Σ_{Q∈S, Q⊆R'} |Q| / |R'|` for each test root, exactly. Default roots are
/// the members of `S` and its root.
pub fn carleson_constant(s: &CubeFamily, test_roots: Option<&[DyadicCube]>) -> Result<CarlesonReport> {
    if s.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let roots: Vec<DyadicCube> = match test_roots {
        Some(r) if !r.is_empty() => {
            let mut v = r.to_vec();
            v.sort();
            v.dedup();
            v
        }
        Some(_) => return Err(Error::InvalidArgument("no test roots".into())),
        None => {
            let mut v = s.members().to_vec();
            v.push(s.root.clone());
            v.sort();
            v.dedup();
            v
        }
    };
    let d = s.dim() as u64;
    let deepest = s.max_depth() as u64;
    // volumes scaled by 2^{deepest·d} are integers
    let mut mass: HashMap<DyadicCube, BigUint> = HashMap::new();
    let wanted: HashSet<&DyadicCube> = roots.iter().collect();
    let min_depth = roots.iter().map(|r| r.depth()).min().unwrap();
    for q in s.members() {
        let w = BigUint::one() << ((deepest - q.depth() as u64) * d);
        for t in min_depth..=q.depth() {
            let a = q.ancestor_at(t);
            if wanted.contains(&a) {
                *mass.entry(a).or_insert_with(BigUint::zero) += &w;
            }
        }
    }
    let ratios: Vec<RootRatio> = roots
        .into_iter()
        .map(|r| {
            let m = mass.get(&r).cloned().unwrap_or_default();
            let denom = BigUint::one() << ((deepest.saturating_sub(r.depth() as u64)) * d);
            let num = if (r.depth() as u64) > deepest {
                // roots below every member hold nothing
                BigUint::zero()
            } else {
                m
            };
            RootRatio {
                root: r,
                ratio: Rational::new(num.into(), denom.into()),
            }
        })
        .collect();
    let xi_hat = ratios.iter().map(|r| r.ratio.clone()).max().unwrap();
    Ok(CarlesonReport {
        family: s.clone(),
        ratios,
        xi_hat,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub q: DyadicCube,
    pub m: DyadicCube,
    /// Owner of the free cube `q` carried down when `M(q)` was chosen.
    pub inherited_from: Option<DyadicCube>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseWitness {
    pub root: DyadicCube,
    #[serde(rename = "J")]
    pub j: u32,
    pub search_depth: u32,
    pub assignments: Vec<Assignment>,
    #[serde(with = "serde_ratio")]
    pub lambda_hat: Rational,
}

impl SparseWitness {
    pub fn new(root: DyadicCube, j: u32, search_depth: u32, mut assignments: Vec<Assignment>) -> Self {
        assignments.sort_by(|a, b| a.q.cmp(&b.q));
        let lambda_hat = assignments
            .iter()
            .map(|a| a.q.volume() / a.m.volume())
            .max()
            .unwrap_or_else(Rational::one);
        SparseWitness {
            root,
            j,
            search_depth,
            assignments,
            lambda_hat,
        }
    }

    pub fn get(&self, q: &DyadicCube) -> Option<&Assignment> {
        self.assignments
            .binary_search_by(|a| a.q.cmp(q))
            .ok()
            .map(|i| &self.assignments[i])
    }

    /// Keeps only the assignments of the given cubes.
    pub fn restrict(&self, keep: &HashSet<&DyadicCube>) -> SparseWitness {
        SparseWitness::new(
            self.root.clone(),
            self.j,
            self.search_depth,
            self.assignments
                .iter()
                .filter(|a| keep.contains(&a.q))
                .cloned()
                .collect(),
        )
    }
}

struct Pending {
    q: DyadicCube,
    /// `(owner, M(owner))` carried from an ancestor.
    inherited: Option<(DyadicCube, DyadicCube)>,
}

fn largest_or_fail(e: &SetModel, g: &DyadicCube, search_depth: u32) -> Result<DyadicCube> {
    largest_free_cube(e, g, search_depth).ok_or_else(|| Error::PorosityFailure(g.clone()))
}

/// `M(q)`: the largest free cube of `q`, or when `q` carries an inherited
/// free cube, the largest free cube of the first child avoiding it.
fn choose(e: &SetModel, p: &Pending, search_depth: u32) -> Result<DyadicCube> {
    match &p.inherited {
        None => largest_or_fail(e, &p.q, search_depth),
        Some((_, x)) => {
            let kids: Vec<DyadicCube> = p.q.children(1).into_iter().filter(|c| !c.contains(x)).collect();
            let g = kids
                .iter()
                .find(|c| e.cube_status(c).meets())
                .or_else(|| kids.first())
                .expect("a cube has at least two children");
            largest_or_fail(e, g, search_depth)
        }
    }
}

/// Runs the level-by-level induction on `D_E(start)` down to absolute depth
/// `bottom`, starting from the given pending cubes.
fn induct(
    e: &SetModel,
    mut level: Vec<Pending>,
    bottom: u32,
    search_depth: u32,
    out: &mut Vec<Assignment>,
) -> Result<()> {
    while !level.is_empty() {
        level.sort_by(|a, b| a.q.cmp(&b.q));
        let chosen: Vec<Result<DyadicCube>> = level.par_iter().map(|p| choose(e, p, search_depth)).collect();
        let mut next = Vec::new();
        for (p, m) in level.into_iter().zip(chosen) {
            let m = m?;
            if p.q.depth() < bottom {
                for c in p.q.children(1) {
                    if !e.cube_status(&c).meets() {
                        continue;
                    }
                    let inherited = if c.contains(&m) {
                        Some((p.q.clone(), m.clone()))
                    } else {
                        p.inherited.clone().filter(|(_, x)| c.contains(x))
                    };
                    next.push(Pending { q: c, inherited });
                }
            }
            out.push(Assignment {
                inherited_from: p.inherited.as_ref().map(|(o, _)| o.clone()),
                q: p.q,
                m,
            });
        }
        level = next;
    }
    Ok(())
}

/// Free cubes `M(Q) ⊆ Q`, pairwise disjoint, for every `Q ∈ D_E(R)` down to
/// depth offset `j`. When `R` is not the lattice root the construction is
/// extended upward through every ancestor of `R`, each getting its cube in a
/// sibling of the previous one.
pub fn build_witness(e: &SetModel, r: &DyadicCube, j: u32, search_depth: u32) -> Result<SparseWitness> {
    if e.dim() != r.dim() {
        return Err(Error::DimensionMismatch(e.dim(), r.dim()));
    }
    crate::lattice::check_depth(r, j.saturating_add(search_depth).saturating_add(1))?;
    if !e.cube_status(r).meets() {
        return Err(Error::RootIsFree(r.clone()));
    }
    let bottom = r.depth() + j;
    let mut out = Vec::new();
    induct(
        e,
        vec![Pending {
            q: r.clone(),
            inherited: None,
        }],
        bottom,
        search_depth,
        &mut out,
    )?;
    let mut cur = r.clone();
    while let Ok(p) = cur.parent() {
        // best sibling: largest free cube, first in cube order on ties
        let mut best: Option<(DyadicCube, DyadicCube)> = None;
        for s in p.children(1).into_iter().filter(|s| s != &cur) {
            let Some(m) = largest_free_cube(e, &s, search_depth) else {
                continue;
            };
            if best.as_ref().map_or(true, |(_, b)| m.depth() < b.depth()) {
                best = Some((s, m));
            }
        }
        let (star, m) = best.ok_or_else(|| Error::PorosityFailure(p.clone()))?;
        out.push(Assignment {
            q: p.clone(),
            m: m.clone(),
            inherited_from: None,
        });
        let mut level = Vec::new();
        for s in p.children(1).into_iter().filter(|s| s != &cur) {
            if !e.cube_status(&s).meets() {
                continue;
            }
            let inherited = (s == star).then(|| (p.clone(), m.clone()));
            level.push(Pending { q: s, inherited });
        }
        induct(e, level, bottom, search_depth, &mut out)?;
        cur = p;
    }
    Ok(SparseWitness::new(r.clone(), j, search_depth, out))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NotContained { q: DyadicCube, m: DyadicCube },
    NotFree { q: DyadicCube, m: DyadicCube, status: Status },
    Overlap { q1: DyadicCube, q2: DyadicCube },
    RatioExceeded {
        q: DyadicCube,
        #[serde(with = "serde_ratio")]
        ratio: Rational,
    },
    /// The inherited cube and `M(q)` share a child of `q`, or the inherited
    /// cube is not inside `q`.
    Inheritance { q: DyadicCube, owner: DyadicCube },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    pub violation: Option<Violation>,
}

impl Verdict {
    fn fail(v: Violation) -> Verdict {
        Verdict {
            pass: false,
            violation: Some(v),
        }
    }
}

/// Re-checks a witness from scratch and names the first violation.
pub fn verify_witness(w: &SparseWitness, e: &SetModel) -> Verdict {
    for a in &w.assignments {
        if !a.q.contains(&a.m) {
            return Verdict::fail(Violation::NotContained {
                q: a.q.clone(),
                m: a.m.clone(),
            });
        }
    }
    let status: Vec<Status> = w.assignments.par_iter().map(|a| e.cube_status(&a.m)).collect();
    for (a, s) in w.assignments.iter().zip(status) {
        if s != Status::Free {
            return Verdict::fail(Violation::NotFree {
                q: a.q.clone(),
                m: a.m.clone(),
                status: s,
            });
        }
    }
    let mut owner: HashMap<&DyadicCube, &DyadicCube> = HashMap::new();
    for a in &w.assignments {
        if let Some(prev) = owner.insert(&a.m, &a.q) {
            return Verdict::fail(Violation::Overlap {
                q1: prev.clone(),
                q2: a.q.clone(),
            });
        }
    }
    for a in &w.assignments {
        for t in 0..a.m.depth() {
            if let Some(o) = owner.get(&a.m.ancestor_at(t)) {
                let (q1, q2) = if *o < &a.q { (*o, &a.q) } else { (&a.q, *o) };
                return Verdict::fail(Violation::Overlap {
                    q1: q1.clone(),
                    q2: q2.clone(),
                });
            }
        }
    }
    for a in &w.assignments {
        let ratio = a.q.volume() / a.m.volume();
        if ratio > w.lambda_hat {
            return Verdict::fail(Violation::RatioExceeded { q: a.q.clone(), ratio });
        }
    }
    for a in &w.assignments {
        let Some(o) = &a.inherited_from else { continue };
        let bad = match w.get(o) {
            None => true,
            Some(oa) => {
                let x = &oa.m;
                !a.q.contains(x)
                    || a.q == *x
                    || a.q.depth() >= a.m.depth()
                    || x.ancestor_at(a.q.depth() + 1) == a.m.ancestor_at(a.q.depth() + 1)
            }
        };
        if bad {
            return Verdict::fail(Violation::Inheritance {
                q: a.q.clone(),
                owner: o.clone(),
            });
        }
    }
    Verdict {
        pass: true,
        violation: None,
    }
}
