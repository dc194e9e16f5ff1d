use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::families::enumerate_de;
use crate::lattice::DyadicCube;
use crate::rational::{serde_ratio, Rational};
use crate::sets::{SetModel, Status};

/// A free descendant of `r` (offset `0..=j`) of maximal volume; the first in
/// cube order among equals.
pub fn largest_free_cube(e: &SetModel, r: &DyadicCube, j: u32) -> Option<DyadicCube> {
    if e.cube_status(r) == Status::Free {
        return Some(r.clone());
    }
    // a free cube whose parent is free was already found one level up, so
    // only children of non-free cubes need checking
    let mut parents = vec![r.clone()];
    for _ in 0..j.min(crate::lattice::MAX_DEPTH - r.depth()) {
        let mut kids: Vec<DyadicCube> = parents.iter().flat_map(|p| p.children(1)).collect();
        kids.sort();
        let status: Vec<Status> = kids.par_iter().map(|c| e.cube_status(c)).collect();
        if let Some(i) = status.iter().position(|s| *s == Status::Free) {
            return Some(kids.swap_remove(i));
        }
        parents = kids;
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PorosityRecord {
    pub cube: DyadicCube,
    pub m: Option<DyadicCube>,
    #[serde(with = "serde_ratio::option")]
    pub ratio: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PorosityReport {
    pub records: Vec<PorosityRecord>,
    /// Largest `|R|/|M(R)|`; absent when no record found a free cube.
    #[serde(with = "serde_ratio::option")]
    pub eta_hat: Option<Rational>,
    pub absent: usize,
    pub depth: u32,
    #[serde(rename = "J")]
    pub j: u32,
}

/// `largest_free_cube` for every `R ∈ D_E(root)` down to `depth`.
pub fn porosity_scan(e: &SetModel, root: &DyadicCube, depth: u32, j: u32) -> Result<PorosityReport> {
    let fam = enumerate_de(e, root, depth)?;
    let records: Vec<PorosityRecord> = fam
        .members()
        .par_iter()
        .map(|q| {
            let m = largest_free_cube(e, q, j);
            let ratio = m.as_ref().map(|m| q.volume() / m.volume());
            PorosityRecord {
                cube: q.clone(),
                m,
                ratio,
            }
        })
        .collect();
    let eta_hat = records.iter().filter_map(|r| r.ratio.clone()).max();
    let absent = records.iter().filter(|r| r.m.is_none()).count();
    Ok(PorosityReport {
        records,
        eta_hat,
        absent,
        depth,
        j,
    })
}
