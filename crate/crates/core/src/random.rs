//! Seeded generators for porous sets and cube families.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::families::CubeFamily;
use crate::lattice::{AxisBox, DyadicCube};
use crate::rational::Rational;
use crate::sets::{SetModel, SimilarityMap};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn coord(rng: &mut SeededRng) -> Rational {
    // dyadic denominators put points on cube boundaries, the rest do not
    const DENOMS: [i64; 8] = [2, 3, 4, 5, 7, 8, 16, 1024];
    let q = DENOMS[rng.gen_range(0..DENOMS.len())];
    Rational::new(rng.gen_range(0..q).into(), q.into())
}

/// `1..=max_points` points in `[0,1)^d`.
pub fn random_points(rng: &mut SeededRng, d: usize, max_points: usize) -> SetModel {
    let n = rng.gen_range(1..=max_points.max(1));
    let pts = (0..n).map(|_| (0..d).map(|_| coord(rng)).collect()).collect();
    SetModel::points(pts).unwrap()
}

/// Self-similar set on `[0,1]^d`: `m^d` grid cells of ratio `1/m`, a proper
/// nonempty subset of them kept as maps.
pub fn random_ifs(rng: &mut SeededRng, d: usize) -> SetModel {
    let m: u64 = rng.gen_range(3..=4);
    let cells = m.pow(d as u32) as usize;
    let k = rng.gen_range(1..cells.min(5));
    let ratio = Rational::new(1.into(), (m as i64).into());
    let maps = sample(rng, cells, k)
        .into_iter()
        .map(|mut c| {
            let shift = (0..d)
                .map(|_| {
                    let i = (c as u64 % m) as i64;
                    c /= m as usize;
                    Rational::new(i.into(), (m as i64).into())
                })
                .collect();
            SimilarityMap {
                ratio: ratio.clone(),
                shift,
            }
        })
        .collect();
    let hull = AxisBox::new(vec![Rational::from_integer(0.into()); d], vec![Rational::from_integer(1.into()); d]).unwrap();
    SetModel::ifs(maps, hull).unwrap().with_budget(12)
}

/// Finite point sets and self-similar sets, roughly half each.
pub fn random_porous(rng: &mut SeededRng, d: usize) -> SetModel {
    if rng.gen_bool(0.5) {
        random_points(rng, d, 6)
    } else {
        random_ifs(rng, d)
    }
}

/// Parent-closed family under the root of dimension `d`: each child of a
/// member joins with probability `keep`, down to `max_depth`, at most
/// `max_members` cubes.
pub fn random_parent_closed(
    rng: &mut SeededRng,
    d: usize,
    max_depth: u32,
    keep: f64,
    max_members: usize,
) -> CubeFamily {
    let root = DyadicCube::root(d);
    let mut members = vec![root.clone()];
    let mut level = vec![root.clone()];
    for _ in 0..max_depth {
        let mut next = Vec::new();
        for q in &level {
            for c in q.children(1) {
                if members.len() < max_members && rng.gen_bool(keep) {
                    members.push(c.clone());
                    next.push(c);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        level = next;
    }
    CubeFamily::from_members(root, members).unwrap()
}

/// Random cube of dimension `d` at depth at most `max_depth`.
pub fn random_cube(rng: &mut SeededRng, d: usize, max_depth: u32) -> DyadicCube {
    let j = rng.gen_range(0..=max_depth);
    DyadicCube::new(j, (0..d).map(|_| rng.gen_range(0..1u64 << j))).unwrap()
}
