use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::analysis::measure::{mu_cube, mu_enclosure_with, MeasureEnclosure, MuOptions};
use crate::error::{Error, Result};
use crate::families::{enumerate_fe, CubeFamily, Provenance};
use crate::lattice::DyadicCube;
use crate::rational::{serde_ratio, Rational};
use crate::sets::SetModel;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bracket {
    #[serde(with = "serde_ratio")]
    pub lo: Rational,
    #[serde(with = "serde_ratio::option")]
    pub hi: Option<Rational>,
}

impl Bracket {
    fn zero() -> Bracket {
        Bracket {
            lo: Rational::zero(),
            hi: Some(Rational::zero()),
        }
    }

    fn add(&mut self, m: &MeasureEnclosure, mult: u64) {
        let k = Rational::from_integer(mult.into());
        self.lo += &m.lower * &k;
        self.hi = match (self.hi.take(), &m.upper) {
            (Some(a), Some(b)) => Some(a + b * &k),
            _ => None,
        };
    }

    pub fn overlaps(&self, o: &Bracket) -> bool {
        self.hi.as_ref().map_or(true, |h| &o.lo <= h) && o.hi.as_ref().map_or(true, |h| &self.lo <= h)
    }

    pub fn contains_f64(&self, x: f64) -> bool {
        crate::rational::to_f64(&self.lo) <= x
            && self.hi.as_ref().map_or(true, |h| x <= crate::rational::to_f64(h))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedCarlesonReport {
    pub root: DyadicCube,
    #[serde(with = "serde_ratio")]
    pub alpha: Rational,
    #[serde(rename = "J")]
    pub j: u32,
    /// `Σ_{Q∈S} μ(Q)`.
    pub sum: Bracket,
    pub mu_root: Bracket,
    /// `sum / μ(R)`.
    pub ratio: Bracket,
    /// For `S = D_E(R)`: `Σ_{F_E} k(Q')μ(Q') + (J+1)Σ_residual μ`, where
    /// `k(Q')` is the depth offset of `Q'`.
    pub log_identity: Option<Bracket>,
    pub identity_consistent: Option<bool>,
}

fn bracket(m: &MeasureEnclosure) -> Bracket {
    Bracket {
        lo: m.lower.clone(),
        hi: m.upper.clone(),
    }
}

/// Ratio enclosure of `Σ_{Q∈S} μ_{α,E}(Q) / μ_{α,E}(R)`; every `μ` is taken to
/// the same absolute depth `depth(R) + j`.
pub fn weighted_carleson_sum(
    e: &SetModel,
    r: &DyadicCube,
    alpha: &Rational,
    j: u32,
    family: &CubeFamily,
    opts: MuOptions,
) -> Result<WeightedCarlesonReport> {
    let mu_r = mu_enclosure_with(e, r, alpha, j, opts)?;
    let mut sum = Bracket::zero();
    for q in family.members() {
        if !r.contains(q) {
            return Err(Error::InvalidCube(format!("{q} is not inside {r}")));
        }
        let off = q.depth() - r.depth();
        let jq = j.saturating_sub(off);
        sum.add(&mu_cube(e, q, alpha, jq, opts)?, 1);
    }
    let mu_root = bracket(&mu_r);
    let lo = match &mu_root.hi {
        Some(h) if h.is_positive() => &sum.lo / h,
        _ => Rational::zero(),
    };
    let hi = match (&sum.hi, mu_root.lo.is_positive()) {
        (Some(s), true) => Some(s / &mu_root.lo),
        _ => None,
    };
    let (log_identity, identity_consistent) =
        if family.provenance == Provenance::De && &family.root == r && family.j == j {
            let fe = enumerate_fe(e, r, j)?;
            let mut rhs = Bracket::zero();
            for f in &fe.free {
                let k = (f.cube.depth() - r.depth()) as u64;
                rhs.add(&mu_cube(e, &f.cube, alpha, 0, opts)?, k);
            }
            for q in &fe.residual {
                rhs.add(&mu_cube(e, q, alpha, 0, opts)?, j as u64 + 1);
            }
            let ok = rhs.overlaps(&sum);
            (Some(rhs), Some(ok))
        } else {
            (None, None)
        };
    Ok(WeightedCarlesonReport {
        root: r.clone(),
        alpha: alpha.clone(),
        j,
        sum,
        mu_root,
        ratio: Bracket { lo, hi },
        log_identity,
        identity_consistent,
    })
}

impl WeightedCarlesonReport {
    /// Whether the ratio bracket admits `1`, as it must for `S = {R}`.
    pub fn admits_one(&self) -> bool {
        self.ratio.lo <= Rational::one() && self.ratio.hi.as_ref().map_or(true, |h| h >= &Rational::one())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::enumerate_de;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn origin_chain_ratio() {
        let e = SetModel::points(vec![vec![r(0, 1)]]).unwrap();
        let root = DyadicCube::root(1);
        let j = 14;
        let fam = enumerate_de(&e, &root, j).unwrap();
        let opts = MuOptions {
            exact_points_1d: true,
            ..MuOptions::default()
        };
        let rep = weighted_carleson_sum(&e, &root, &r(1, 2), j, &fam, opts).unwrap();
        // Σ_{k≤J} 2·2^{-k/2} / 2
        let want: f64 = (0..=j).map(|k| (-(k as f64) / 2.0).exp2()).sum();
        let lo = crate::rational::to_f64(&rep.ratio.lo);
        let hi = crate::rational::to_f64(rep.ratio.hi.as_ref().unwrap());
        assert!(lo - 1e-12 <= want && want <= hi + 1e-12, "{rep:?}");
        assert_eq!(rep.identity_consistent, Some(true));
        let single = CubeFamily::from_members(root.clone(), vec![root.clone()]).unwrap();
        let rep = weighted_carleson_sum(&e, &root, &r(1, 2), 8, &single, MuOptions::default()).unwrap();
        assert!(rep.admits_one());
    }
}
