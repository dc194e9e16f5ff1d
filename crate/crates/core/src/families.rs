//! Finite-depth enumeration of `D_E(R)`, `F_E(R)` and `D_{γ,E}(R)`.

use std::collections::HashSet;

use num_traits::Signed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::lattice::{check_depth, DyadicCube};
use crate::rational::Rational;
use crate::sets::SetModel;

/// Levels below the root that fan out over the thread pool.
const PAR_LEVELS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    #[serde(rename = "DE")]
    De,
    #[serde(rename = "FE")]
    Fe,
    #[serde(rename = "DGAMMA")]
    DGamma,
    #[serde(rename = "USER")]
    User,
}

/// A sorted, deduplicated set of cubes under a root, truncated at depth
/// offset `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FamilyRepr")]
pub struct CubeFamily {
    pub root: DyadicCube,
    #[serde(rename = "J")]
    pub j: u32,
    pub provenance: Provenance,
    members: Vec<DyadicCube>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyRepr {
    root: DyadicCube,
    #[serde(rename = "J")]
    j: u32,
    provenance: Provenance,
    members: Vec<DyadicCube>,
}

impl TryFrom<FamilyRepr> for CubeFamily {
    type Error = Error;
    fn try_from(f: FamilyRepr) -> Result<Self> {
        CubeFamily::new(f.root, f.j, f.provenance, f.members)
    }
}

impl CubeFamily {
    pub fn new(
        root: DyadicCube,
        j: u32,
        provenance: Provenance,
        mut members: Vec<DyadicCube>,
    ) -> Result<CubeFamily> {
        for q in &members {
            if q.dim() != root.dim() {
                return Err(Error::DimensionMismatch(root.dim(), q.dim()));
            }
            if !root.contains(q) {
                return Err(Error::InvalidCube(format!("{q} lies outside the root {root}")));
            }
            if q.depth() > root.depth() + j {
                return Err(Error::InvalidCube(format!("{q} is deeper than J = {j}")));
            }
        }
        members.sort();
        members.dedup();
        Ok(CubeFamily {
            root,
            j,
            provenance,
            members,
        })
    }

    /// A user family whose truncation depth is its deepest member.
    pub fn from_members(root: DyadicCube, members: Vec<DyadicCube>) -> Result<CubeFamily> {
        let j = members
            .iter()
            .map(|q| q.depth().saturating_sub(root.depth()))
            .max()
            .unwrap_or(0);
        CubeFamily::new(root, j, Provenance::User, members)
    }

    pub fn members(&self) -> &[DyadicCube] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, q: &DyadicCube) -> bool {
        self.members.binary_search(q).is_ok()
    }

    pub fn member_set(&self) -> HashSet<&DyadicCube> {
        self.members.iter().collect()
    }

    pub fn dim(&self) -> usize {
        self.root.dim()
    }

    pub fn max_depth(&self) -> u32 {
        self.members.iter().map(|q| q.depth()).max().unwrap_or(self.root.depth())
    }

    /// Number of members at each depth offset `0..=j`.
    pub fn level_sizes(&self) -> Vec<u64> {
        let mut v = vec![0u64; self.j as usize + 1];
        for q in &self.members {
            v[(q.depth() - self.root.depth()) as usize] += 1;
        }
        v
    }
}

/// A maximal free cube with its certified distance to `E`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreeCube {
    pub cube: DyadicCube,
    pub dist: Interval,
}

/// `F_E(R)` to depth offset `J` plus the depth-`J` cubes still meeting `E`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreeDecomposition {
    pub root: DyadicCube,
    #[serde(rename = "J")]
    pub j: u32,
    pub provenance: Provenance,
    /// `D_E(R)` to the same depth.
    pub members: Vec<DyadicCube>,
    pub free: Vec<FreeCube>,
    pub residual: Vec<DyadicCube>,
}

impl FreeDecomposition {
    /// `Σ|free| + Σ|residual|`, which must equal `|root|`.
    pub fn covered_volume(&self) -> Rational {
        self.free
            .iter()
            .map(|f| f.cube.volume())
            .chain(self.residual.iter().map(DyadicCube::volume))
            .sum()
    }

    pub fn partition_exact(&self) -> bool {
        self.covered_volume() == self.root.volume()
    }
}

/// Everything one pass over `D_E(R)` can collect.
#[derive(Debug, Clone, Default)]
pub struct Traversal {
    pub members: Vec<DyadicCube>,
    pub free: Vec<FreeCube>,
    /// Free cubes without distances (counts-only or no-distance runs).
    pub free_cubes: Vec<DyadicCube>,
    pub residual: Vec<DyadicCube>,
    /// `|D_E(R)|` per depth offset `0..=J`.
    pub de_count: Vec<u64>,
    /// `|F_E(R)|` per depth offset `0..=J` (offset 0 is always 0).
    pub free_count: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraversalOptions {
    pub collect_members: bool,
    pub collect_free: bool,
    pub with_dist: bool,
}

impl TraversalOptions {
    pub const FULL: TraversalOptions = TraversalOptions {
        collect_members: true,
        collect_free: true,
        with_dist: true,
    };
    pub const COUNTS: TraversalOptions = TraversalOptions {
        collect_members: false,
        collect_free: false,
        with_dist: false,
    };
    pub const CUBES: TraversalOptions = TraversalOptions {
        collect_members: true,
        collect_free: true,
        with_dist: false,
    };
}

impl Traversal {
    fn new(levels: usize) -> Traversal {
        Traversal {
            de_count: vec![0; levels],
            free_count: vec![0; levels],
            ..Default::default()
        }
    }

    fn merge(mut self, o: Traversal) -> Traversal {
        self.members.extend(o.members);
        self.free.extend(o.free);
        self.free_cubes.extend(o.free_cubes);
        self.residual.extend(o.residual);
        for (a, b) in self.de_count.iter_mut().zip(o.de_count) {
            *a += b;
        }
        for (a, b) in self.free_count.iter_mut().zip(o.free_count) {
            *a += b;
        }
        self
    }

    fn finish(mut self) -> Traversal {
        self.members.sort();
        self.free.sort_by(|a, b| a.cube.cmp(&b.cube));
        self.free_cubes.sort();
        self.residual.sort();
        self
    }
}

struct Walk<'a, F: Fn(&DyadicCube) -> bool + Sync> {
    e: &'a SetModel,
    root_depth: u32,
    j: u32,
    opts: TraversalOptions,
    member: F,
}

impl<F: Fn(&DyadicCube) -> bool + Sync> Walk<'_, F> {
    /// Visits a member cube `q`.
    fn visit(&self, q: &DyadicCube) -> Result<Traversal> {
        let k = q.depth() - self.root_depth;
        let mut out = Traversal::new(self.j as usize + 1);
        out.de_count[k as usize] += 1;
        if self.opts.collect_members {
            out.members.push(q.clone());
        }
        if k == self.j {
            out.residual.push(q.clone());
            return Ok(out);
        }
        let kids = q.children(1);
        let step = |c: &DyadicCube| -> Result<Traversal> {
            if (self.member)(c) {
                self.visit(c)
            } else {
                let mut t = Traversal::new(self.j as usize + 1);
                t.free_count[k as usize + 1] += 1;
                if self.opts.collect_free {
                    if self.opts.with_dist {
                        let dist = self.e.dist(&c.to_box())?;
                        t.free.push(FreeCube {
                            cube: c.clone(),
                            dist,
                        });
                    } else {
                        t.free_cubes.push(c.clone());
                    }
                }
                Ok(t)
            }
        };
        let parts: Vec<Result<Traversal>> = if k < PAR_LEVELS {
            kids.par_iter().map(step).collect()
        } else {
            kids.iter().map(step).collect()
        };
        for p in parts {
            out = out.merge(p?);
        }
        Ok(out)
    }
}

/// One pass over `D_E(R)` to depth offset `j`. An empty result when `R`
/// itself is free.
pub fn traverse(e: &SetModel, r: &DyadicCube, j: u32, opts: TraversalOptions) -> Result<Traversal> {
    check_dims(e, r)?;
    check_depth(r, j)?;
    let walk = Walk {
        e,
        root_depth: r.depth(),
        j,
        opts,
        member: |c: &DyadicCube| e.cube_status(c).meets(),
    };
    if !(walk.member)(r) {
        return Ok(Traversal::new(j as usize + 1));
    }
    Ok(walk.visit(r)?.finish())
}

fn check_dims(e: &SetModel, r: &DyadicCube) -> Result<()> {
    if e.dim() != r.dim() {
        return Err(Error::DimensionMismatch(e.dim(), r.dim()));
    }
    Ok(())
}

pub fn enumerate_de(e: &SetModel, r: &DyadicCube, j: u32) -> Result<CubeFamily> {
    let t = traverse(
        e,
        r,
        j,
        TraversalOptions {
            collect_members: true,
            collect_free: false,
            with_dist: false,
        },
    )?;
    Ok(CubeFamily {
        root: r.clone(),
        j,
        provenance: Provenance::De,
        members: t.members,
    })
}

pub fn enumerate_fe(e: &SetModel, r: &DyadicCube, j: u32) -> Result<FreeDecomposition> {
    check_dims(e, r)?;
    if !e.cube_status(r).meets() {
        return Err(Error::RootIsFree(r.clone()));
    }
    let t = traverse(e, r, j, TraversalOptions::FULL)?;
    Ok(FreeDecomposition {
        root: r.clone(),
        j,
        provenance: Provenance::Fe,
        members: t.members,
        free: t.free,
        residual: t.residual,
    })
}

/// Membership in `D_{γ,E}`: `dist_lo(Q,E) < γ·ℓ(Q)`, or `Q` possibly meets `E`.
pub fn in_dgamma(e: &SetModel, q: &DyadicCube, gamma: &Rational) -> Result<bool> {
    if e.cube_status(q).meets() {
        return Ok(true);
    }
    let d = e.dist(&q.to_box())?;
    Ok(d.lo < gamma * q.side())
}

pub fn enumerate_dgamma(
    e: &SetModel,
    r: &DyadicCube,
    gamma: &Rational,
    j: u32,
) -> Result<CubeFamily> {
    check_dims(e, r)?;
    check_depth(r, j)?;
    if e.is_empty() {
        return Err(Error::EmptySet);
    }
    if !gamma.is_positive() {
        return Err(Error::InvalidArgument("gamma must be positive".into()));
    }
    // membership errors cannot occur once E is known to be nonempty
    let walk = Walk {
        e,
        root_depth: r.depth(),
        j,
        opts: TraversalOptions {
            collect_members: true,
            collect_free: false,
            with_dist: false,
        },
        member: |c: &DyadicCube| in_dgamma(e, c, gamma).unwrap_or(true),
    };
    let members = if (walk.member)(r) {
        walk.visit(r)?.finish().members
    } else {
        Vec::new()
    };
    Ok(CubeFamily {
        root: r.clone(),
        j,
        provenance: Provenance::DGamma,
        members,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::dyadic;
    use crate::sets::{SetModel, Status};
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn c1(j: u32, k: u64) -> DyadicCube {
        DyadicCube::new(j, [k]).unwrap()
    }

    fn origin() -> SetModel {
        SetModel::points(vec![vec![r(0, 1)]]).unwrap()
    }

    #[test]
    fn de_examples() {
        let root = DyadicCube::root(1);
        let f = enumerate_de(&origin(), &root, 2).unwrap();
        assert_eq!(f.members(), &[c1(0, 0), c1(1, 0), c1(2, 0)]);
        assert!(enumerate_de(&SetModel::empty(1), &root, 5).unwrap().is_empty());
        let f = enumerate_de(&SetModel::cantor(), &root, 1).unwrap();
        assert_eq!(f.members(), &[c1(0, 0), c1(1, 0), c1(1, 1)]);
        assert_eq!(enumerate_de(&origin(), &root, 62).unwrap().len(), 63);
        assert!(matches!(
            enumerate_de(&origin(), &c1(2, 0), 61),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn fe_examples() {
        let root = DyadicCube::root(1);
        let fe = enumerate_fe(&origin(), &root, 3).unwrap();
        let free: Vec<_> = fe.free.iter().map(|f| f.cube.clone()).collect();
        assert_eq!(free, vec![c1(1, 1), c1(2, 1), c1(3, 1)]);
        assert_eq!(fe.residual, vec![c1(3, 0)]);
        assert!(fe.partition_exact());
        assert_eq!(fe.free[0].dist, Interval::exact(r(1, 2)));
        assert_eq!(
            enumerate_fe(&origin(), &c1(1, 1), 3),
            Err(Error::RootIsFree(c1(1, 1)))
        );
        let fe = enumerate_fe(&SetModel::cantor(), &root, 2).unwrap();
        assert!(fe.free.is_empty());
        assert_eq!(fe.residual, root.children(2));
    }

    #[test]
    fn dgamma_examples() {
        let root = DyadicCube::root(1);
        let f = enumerate_dgamma(&origin(), &root, &r(2, 1), 1).unwrap();
        assert_eq!(f.members(), &[c1(0, 0), c1(1, 0), c1(1, 1)]);
        let f = enumerate_dgamma(&origin(), &root, &r(1, 4), 1).unwrap();
        assert_eq!(f.members(), &[c1(0, 0), c1(1, 0)]);
        assert!(!in_dgamma(&origin(), &c1(1, 1), &r(1, 1)).unwrap());
        assert_eq!(
            enumerate_dgamma(&SetModel::empty(1), &root, &r(1, 1), 2),
            Err(Error::EmptySet)
        );
        // per level at most three cubes within distance < 2ℓ of 0
        let f = enumerate_dgamma(&origin(), &root, &r(2, 1), 10).unwrap();
        assert!(f.level_sizes().iter().all(|&n| n <= 3));
    }

    #[test]
    fn family_json_shape() {
        let f = enumerate_de(&origin(), &DyadicCube::root(1), 1).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(
            s,
            r#"{"root":{"depth":0,"coords":[0]},"J":1,"provenance":"DE","members":[{"depth":0,"coords":[0]},{"depth":1,"coords":[0]}]}"#
        );
        assert_eq!(serde_json::from_str::<CubeFamily>(&s).unwrap(), f);
        let outside = r#"{"root":{"depth":1,"coords":[0]},"J":1,"provenance":"USER","members":[{"depth":1,"coords":[1]}]}"#;
        assert!(serde_json::from_str::<CubeFamily>(outside).is_err());
        let fe = enumerate_fe(&origin(), &DyadicCube::root(1), 2).unwrap();
        let back: FreeDecomposition =
            serde_json::from_str(&serde_json::to_string(&fe).unwrap()).unwrap();
        assert_eq!(back, fe);
    }

    #[test]
    fn cantor_free_cubes_sit_in_gaps() {
        let fe = enumerate_fe(&SetModel::cantor(), &DyadicCube::root(1), 6).unwrap();
        assert!(fe.partition_exact());
        for f in &fe.free {
            assert_eq!(SetModel::cantor().cube_status(&f.cube), Status::Free);
            assert!(f.dist.lo.is_positive());
        }
        assert!(fe.free.iter().any(|f| f.cube == DyadicCube::new(3, [3]).unwrap()));
    }

    fn arb_points(dim: usize) -> impl Strategy<Value = SetModel> {
        prop::collection::vec(prop::collection::vec(0u64..64, dim), 1..6).prop_map(|pts| {
            SetModel::points(
                pts.into_iter()
                    .map(|p| p.into_iter().map(|k| dyadic(k, 6)).collect())
                    .collect(),
            )
            .unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn partition_and_closure(e in arb_points(2), j in 0u32..6) {
            let root = DyadicCube::root(2);
            let fe = enumerate_fe(&e, &root, j).unwrap();
            prop_assert!(fe.partition_exact());
            let de = enumerate_de(&e, &root, j).unwrap();
            prop_assert_eq!(&de.members, &fe.members);
            for q in de.members() {
                if !q.is_root() {
                    prop_assert!(de.contains(&q.parent().unwrap()));
                }
            }
            for f in &fe.free {
                prop_assert!(de.contains(&f.cube.parent().unwrap()));
                prop_assert_eq!(e.cube_status(&f.cube), Status::Free);
            }
        }

        #[test]
        fn refinement_is_monotone(e in arb_points(1), j in 0u32..8) {
            let root = DyadicCube::root(1);
            let a = enumerate_de(&e, &root, j).unwrap();
            let b = enumerate_de(&e, &root, j + 2).unwrap();
            let shallow: Vec<_> = b.members().iter().filter(|q| q.depth() <= j).cloned().collect();
            prop_assert_eq!(a.members(), &shallow[..]);
        }

        #[test]
        fn dgamma_nesting(e in arb_points(1), j in 0u32..7, g in 1i64..12) {
            let root = DyadicCube::root(1);
            let de = enumerate_de(&e, &root, j).unwrap();
            let g1 = enumerate_dgamma(&e, &root, &r(g, 4), j).unwrap();
            let g2 = enumerate_dgamma(&e, &root, &r(g + 1, 4), j).unwrap();
            let s1 = g1.member_set();
            let s2 = g2.member_set();
            prop_assert!(de.members().iter().all(|q| s1.contains(q)));
            prop_assert!(s1.is_subset(&s2));
            for q in g1.members() {
                if !q.is_root() {
                    prop_assert!(g1.contains(&q.parent().unwrap()));
                }
            }
        }
    }
}
