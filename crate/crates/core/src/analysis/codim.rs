//! Finite-depth estimate of the Aikawa–Assouad codimension: the largest grid
//! `α` for which the normalized `D_E` sums stay bounded as `J` grows.

use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::sums::{check_alpha, multiplicity_check, MultiplicityCheck, Terms};
use crate::error::{Error, Result};
use crate::families::{traverse, Traversal, TraversalOptions};
use crate::interval::Interval;
use crate::lattice::DyadicCube;
use crate::rational::{serde_ratio, Rational};
use crate::sets::SetModel;

/// Slopes below this count as decaying.
const SLOPE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    #[serde(rename = "J")]
    pub j: u32,
    pub de_ratio: Interval,
    pub dynkin_ratio: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    #[serde(with = "serde_ratio")]
    pub alpha: Rational,
    pub root: DyadicCube,
    pub points: Vec<TrajectoryPoint>,
    /// `ln(S_J / S_J')` over the last two depths, per unit of depth.
    pub increment: Option<f64>,
    /// Least-squares slope of `log2(count_k · 2^{-k(d-α)})` over the deeper
    /// half of the levels.
    pub slope: Option<f64>,
    pub bounded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaVerdict {
    #[serde(with = "serde_ratio")]
    pub alpha: Rational,
    pub bounded: bool,
    /// Largest `D_E` ratio over the roots at the deepest `J`.
    pub de_ratio: Interval,
    /// Largest Dyn'kin ratio over the roots at the deepest `J`.
    pub dynkin_ratio: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodimEstimate {
    #[serde(with = "serde_ratio::vec")]
    pub alpha_grid: Vec<Rational>,
    #[serde(rename = "J_list")]
    pub j_list: Vec<u32>,
    pub roots: Vec<DyadicCube>,
    #[serde(with = "serde_ratio")]
    pub tau: Rational,
    #[serde(with = "serde_ratio")]
    pub estimate: Rational,
    pub verdicts: Vec<AlphaVerdict>,
    pub trajectories: Vec<Trajectory>,
    pub multiplicity: Vec<MultiplicityCheck>,
    /// `|cells of depth J meeting E| · 2^{-Jd}` relative to the first root,
    /// evidence for `|Ē| = 0`.
    pub cell_fraction: Vec<(u32, f64)>,
}

fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

fn trajectory(
    t: &Traversal,
    root: &DyadicCube,
    alpha: &Rational,
    j_list: &[u32],
    tau: f64,
) -> Trajectory {
    let d = root.dim();
    let j_max = *j_list.last().unwrap();
    let terms = Terms::new(d, alpha, j_max);
    let points: Vec<TrajectoryPoint> = j_list
        .iter()
        .map(|&j| TrajectoryPoint {
            j,
            de_ratio: terms.weighted(&t.de_count, j),
            dynkin_ratio: terms.weighted(&t.free_count, j),
        })
        .collect();
    let increment = match points.len() {
        0 | 1 => None,
        n => {
            let (p, q) = (&points[n - 2], &points[n - 1]);
            let (a, b) = (p.de_ratio.mid_f64(), q.de_ratio.mid_f64());
            (a > 0.0).then(|| (b / a).ln() / (q.j - p.j) as f64)
        }
    };
    let x = terms.x.to_f64().unwrap_or(0.0);
    let from = j_max.div_ceil(2);
    let samples: Vec<(f64, f64)> = (from..=j_max)
        .filter(|&k| t.de_count[k as usize] > 0)
        .map(|k| {
            let k_f = k as f64;
            (k_f, (t.de_count[k as usize] as f64).log2() - k_f * x)
        })
        .collect();
    let slope = least_squares_slope(&samples);
    let bounded = increment.is_some_and(|i| i < tau) || slope.is_some_and(|s| s < -SLOPE_EPS);
    Trajectory {
        alpha: alpha.clone(),
        root: root.clone(),
        points,
        increment,
        slope,
        bounded,
    }
}

/// Boundedness is decided per root from the `D_E` sums: the last-step log
/// increment below `tau`, or a decaying per-level term sequence. An `α`
/// counts as bounded when every root agrees; the estimate is the last `α` of
/// the bounded prefix of the sorted grid, or 0.
pub fn codim_estimate(
    e: &SetModel,
    alpha_grid: &[Rational],
    j_list: &[u32],
    roots: &[DyadicCube],
    tau: &Rational,
) -> Result<CodimEstimate> {
    if roots.is_empty() || j_list.is_empty() || alpha_grid.is_empty() {
        return Err(Error::InvalidArgument(
            "codim needs roots, depths and an alpha grid".into(),
        ));
    }
    let d = roots[0].dim();
    let mut grid = alpha_grid.to_vec();
    grid.sort();
    grid.dedup();
    for a in &grid {
        check_alpha(a, d, true)?;
    }
    let mut js = j_list.to_vec();
    js.sort_unstable();
    js.dedup();
    let j_max = *js.last().unwrap();
    for r in roots {
        if r.dim() != d {
            return Err(Error::DimensionMismatch(d, r.dim()));
        }
        if !e.cube_status(r).meets() {
            return Err(Error::RootIsFree(r.clone()));
        }
    }
    let travs: Vec<Traversal> = roots
        .iter()
        .map(|r| traverse(e, r, j_max, TraversalOptions::COUNTS))
        .collect::<Result<_>>()?;
    let tau_f = tau.to_f64().unwrap_or(0.0);
    let trajectories: Vec<Trajectory> = grid
        .par_iter()
        .flat_map_iter(|a| {
            roots
                .iter()
                .zip(&travs)
                .map(|(r, t)| trajectory(t, r, a, &js, tau_f))
                .collect::<Vec<_>>()
        })
        .collect();
    let verdicts: Vec<AlphaVerdict> = grid
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let rows = &trajectories[i * roots.len()..(i + 1) * roots.len()];
            let pick = |f: fn(&TrajectoryPoint) -> &Interval| {
                rows.iter()
                    .map(|tr| f(tr.points.last().unwrap()).clone())
                    .reduce(|x, y| x.max(&y))
                    .unwrap()
            };
            AlphaVerdict {
                alpha: a.clone(),
                bounded: rows.iter().all(|tr| tr.bounded),
                de_ratio: pick(|p| &p.de_ratio),
                dynkin_ratio: pick(|p| &p.dynkin_ratio),
            }
        })
        .collect();
    let estimate = verdicts
        .iter()
        .take_while(|v| v.bounded)
        .last()
        .map(|v| v.alpha.clone())
        .unwrap_or_else(Rational::zero);
    let multiplicity = travs
        .iter()
        .flat_map(|t| {
            grid.iter()
                .map(|a| multiplicity_check(d, a, &t.de_count, &t.free_count))
                .collect::<Vec<_>>()
        })
        .collect();
    let cell_fraction = js
        .iter()
        .map(|&j| {
            let c = travs[0].de_count[j as usize] as f64;
            (j, c * (-((j as u64 * d as u64) as f64)).exp2())
        })
        .collect();
    Ok(CodimEstimate {
        alpha_grid: grid,
        j_list: js,
        roots: roots.to_vec(),
        tau: tau.clone(),
        estimate,
        verdicts,
        trajectories,
        multiplicity,
        cell_fraction,
    })
}

/// `lo, lo+step, …` up to and including `hi`.
pub fn alpha_range(lo: &Rational, hi: &Rational, step: &Rational) -> Vec<Rational> {
    let mut out = Vec::new();
    let mut a = lo.clone();
    while &a <= hi {
        out.push(a.clone());
        a += step;
    }
    out
}
