//! The enlarged families `D_{γ,E}`: packing bound through dilation and
//! covering, witnesses through the corner set, and the weighted embedding.

use std::collections::{HashMap, HashSet};

use num_bigint::BigUint;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::measure::{mu_cube, MuOptions};
use crate::analysis::sums::check_alpha;
use crate::error::{Error, Result};
use crate::families::{enumerate_de, enumerate_dgamma, CubeFamily};
use crate::interval::{pow2_neg, pow_enclosure, Interval};
use crate::inverse::check_parent_closed;
use crate::lattice::DyadicCube;
use crate::rational::{serde_ratio, Rational};
use crate::sets::{corner_set, SetModel};
use crate::sparse::{build_witness, carleson_constant, verify_witness, SparseWitness, Verdict};

fn int(n: u64) -> Rational {
    Rational::from_integer(n.into())
}

/// Least integer strictly above `γ`.
pub fn gamma_n(gamma: &Rational) -> u64 {
    (gamma.floor().to_integer() + 1u8).try_into().expect("gamma too large")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GammaRoot {
    pub root: DyadicCube,
    #[serde(with = "serde_ratio")]
    pub ratio: Rational,
    /// Covering cubes of the dilated root, clipped to the fixed root.
    pub cover: Vec<DyadicCube>,
    /// `(2n+1)^d · Σ_i Σ_{Q∈D_E, Q⊆R_i}|Q| / |R|`.
    #[serde(with = "serde_ratio")]
    pub proof_bound: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GammaReport {
    #[serde(with = "serde_ratio")]
    pub gamma: Rational,
    pub n: u64,
    pub root: DyadicCube,
    #[serde(rename = "J")]
    pub j: u32,
    pub members: usize,
    /// Packing constant of `D_{γ,E}` over all its members.
    #[serde(with = "serde_ratio")]
    pub measured: Rational,
    /// Packing constant of `D_E` over the covering cubes.
    #[serde(with = "serde_ratio")]
    pub c_de: Rational,
    /// `c_de · (γ+1)^d · 6^d`.
    #[serde(with = "serde_ratio")]
    pub bound: Rational,
    pub holds: bool,
    /// Every root satisfies `ratio ≤ proof_bound`.
    pub proof_holds: bool,
    pub max_cover: usize,
    pub cover_limit: u64,
    /// Some dilation or neighbour search left the fixed root.
    pub clipped: bool,
    /// Members with no `D_E` cube among their `(2n+1)^d` neighbours.
    pub unmapped: usize,
    pub max_multiplicity: usize,
    pub multiplicity_limit: u64,
    pub roots: Vec<GammaRoot>,
}

/// Depth-`m` cubes meeting the half-open box `(2n+1)R`, with `m` the depth
/// whose side is the least dyadic length `≥ (2n+1)ℓ(R)`, clipped to `top`.
fn cover(r: &DyadicCube, n: u64, top: &DyadicCube) -> (Vec<DyadicCube>, bool) {
    let bits = 64 - (2 * n).leading_zeros(); // ceil(log2(2n+1))
    let m = r.depth().saturating_sub(bits);
    if m <= top.depth() {
        let b = r.dilate(n);
        let t = top.to_box();
        let clipped = !b.inside_closed(&t);
        return (vec![top.clone()], clipped);
    }
    let b = r.dilate(n);
    let scale = int(1u64 << m);
    let mut clipped = false;
    let mut ranges = Vec::with_capacity(r.dim());
    for (i, (lo, hi)) in b.lo.iter().zip(&b.hi).enumerate() {
        let base = top.coords()[i] << (m - top.depth());
        let span = 1u64 << (m - top.depth());
        let lo_k = (lo * &scale).floor().to_integer();
        let hi_k = (hi * &scale).ceil().to_integer() - 1u8;
        let first = base as i128;
        let last = (base + span - 1) as i128;
        let lo_k: i128 = lo_k.try_into().unwrap_or(i128::MIN);
        let hi_k: i128 = hi_k.try_into().unwrap_or(i128::MAX);
        if lo_k < first || hi_k > last {
            clipped = true;
        }
        ranges.push((lo_k.max(first) as u64, hi_k.min(last) as u64));
    }
    let mut out = Vec::new();
    let mut idx: Vec<u64> = ranges.iter().map(|r| r.0).collect();
    loop {
        out.push(DyadicCube::new(m, idx.iter().copied()).unwrap());
        let mut i = 0;
        loop {
            if i == idx.len() {
                return (out, clipped);
            }
            if idx[i] < ranges[i].1 {
                idx[i] += 1;
                break;
            }
            idx[i] = ranges[i].0;
            i += 1;
        }
    }
}

/// Same-depth cubes within `n` steps along every axis, in cube order, and
/// whether any fell outside `top`.
fn neighbours(q: &DyadicCube, n: u64, top: &DyadicCube) -> (Vec<DyadicCube>, bool) {
    let span = 1i128 << (q.depth() - top.depth());
    let base: Vec<i128> = top.coords().iter().map(|&k| (k as i128) * span).collect();
    let n = n as i128;
    let mut clipped = false;
    let ranges: Vec<(i128, i128)> = q
        .coords()
        .iter()
        .zip(&base)
        .map(|(&k, &b)| {
            let (lo, hi) = (k as i128 - n, k as i128 + n);
            if lo < b || hi > b + span - 1 {
                clipped = true;
            }
            (lo.max(b), hi.min(b + span - 1))
        })
        .collect();
    let mut out = Vec::new();
    let mut idx: Vec<i128> = ranges.iter().map(|r| r.0).collect();
    'outer: loop {
        out.push(DyadicCube::new(q.depth(), idx.iter().map(|&k| k as u64)).unwrap());
        for i in 0..idx.len() {
            if idx[i] < ranges[i].1 {
                idx[i] += 1;
                continue 'outer;
            }
            idx[i] = ranges[i].0;
        }
        break;
    }
    out.sort();
    (out, clipped)
}

/// Measures the packing constant of `D_{γ,E}(R)` and audits it against the
/// dilation-and-covering argument built on the measured constant of `D_E`.
pub fn gamma_carleson(e: &SetModel, r: &DyadicCube, gamma: &Rational, j: u32) -> Result<GammaReport> {
    let fam = enumerate_dgamma(e, r, gamma, j)?;
    if fam.is_empty() {
        return Err(Error::RootIsFree(r.clone()));
    }
    let d = r.dim();
    let n = gamma_n(gamma);
    let measured_rep = carleson_constant(&fam, None)?;
    let de = enumerate_de(e, r, j)?;
    let de_set = de.member_set();

    // D_E volume below every cube, scaled by 2^{deepest·d}
    let deepest = r.depth() as u64 + j as u64;
    let mut mass: HashMap<DyadicCube, BigUint> = HashMap::new();
    for q in de.members() {
        let w = BigUint::one() << ((deepest - q.depth() as u64) * d as u64);
        for t in r.depth()..=q.depth() {
            *mass.entry(q.ancestor_at(t)).or_insert_with(BigUint::zero) += &w;
        }
    }
    let scale = Rational::from_integer((BigUint::one() << (deepest * d as u64)).into());
    let vol = |c: &DyadicCube| -> Rational {
        Rational::from_integer(mass.get(c).cloned().unwrap_or_default().into()) / &scale
    };

    let mapping: Vec<(Option<DyadicCube>, bool)> = fam
        .members()
        .par_iter()
        .map(|q| {
            let (nb, clipped) = neighbours(q, n, r);
            (nb.into_iter().find(|c| de_set.contains(c)), clipped)
        })
        .collect();
    let mut clipped = mapping.iter().any(|m| m.1);
    let unmapped = mapping.iter().filter(|m| m.0.is_none()).count();
    let mut mult: HashMap<&DyadicCube, usize> = HashMap::new();
    for (star, _) in &mapping {
        if let Some(s) = star {
            *mult.entry(s).or_default() += 1;
        }
    }
    let max_multiplicity = mult.values().copied().max().unwrap_or(0);

    let pow = (2 * n + 1).pow(d as u32);
    let mut c_de = Rational::zero();
    let mut max_cover = 0;
    let mut roots = Vec::with_capacity(measured_rep.ratios.len());
    let mut proof_holds = true;
    for rr in &measured_rep.ratios {
        let (cv, clip) = cover(&rr.root, n, r);
        clipped |= clip;
        max_cover = max_cover.max(cv.len());
        let mut total = Rational::zero();
        for c in &cv {
            let m = vol(c);
            c_de = c_de.max(&m / c.volume());
            total += m;
        }
        let proof_bound = total * int(pow) / rr.root.volume();
        proof_holds &= rr.ratio <= proof_bound;
        roots.push(GammaRoot {
            root: rr.root.clone(),
            ratio: rr.ratio.clone(),
            cover: cv,
            proof_bound,
        });
    }
    let g1 = gamma + Rational::one();
    let mut bound = c_de.clone();
    for _ in 0..d {
        bound = bound * &g1 * int(6);
    }
    Ok(GammaReport {
        gamma: gamma.clone(),
        n,
        root: r.clone(),
        j,
        members: fam.len(),
        holds: measured_rep.xi_hat <= bound,
        measured: measured_rep.xi_hat,
        c_de,
        bound,
        proof_holds,
        max_cover,
        cover_limit: 3u64.pow(d as u32),
        clipped,
        unmapped,
        max_multiplicity,
        multiplicity_limit: pow,
        roots,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GammaWitness {
    pub witness: SparseWitness,
    /// Witness checked against the corner set of the family.
    pub corner_verdict: Verdict,
    /// Witness checked against `E` itself.
    pub set_verdict: Verdict,
}

/// Witness for `D_{γ,E}(R)` built through the corner set of the family.
pub fn gamma_witness(e: &SetModel, r: &DyadicCube, gamma: &Rational, j: u32) -> Result<GammaWitness> {
    let fam = enumerate_dgamma(e, r, gamma, j)?;
    if fam.is_empty() {
        return Err(Error::RootIsFree(r.clone()));
    }
    family_witness(e, &fam, j + 4)
}

/// Builds the witness for a parent-closed family `S ⊇ D_E` via the corner
/// set of `S` joined with `E`, then keeps the members of `S`.
pub fn family_witness(e: &SetModel, fam: &CubeFamily, search_depth: u32) -> Result<GammaWitness> {
    if let Some(q) = check_parent_closed(fam).offender {
        return Err(Error::NotParentClosed(q));
    }
    let corners = corner_set(fam.members())?;
    // D_{E ∪ Ẽ} = D_Ẽ ∪ D_E, and D_E ⊆ D_{γ,E} ⊆ D_Ẽ
    let joined = SetModel::union(vec![corners.clone(), e.clone()])?;
    let w = build_witness(&joined, &fam.root, fam.j, search_depth)?;
    let keep: HashSet<&DyadicCube> = fam.members().iter().collect();
    let witness = w.restrict(&keep);
    Ok(GammaWitness {
        corner_verdict: verify_witness(&witness, &corners),
        set_verdict: verify_witness(&witness, e),
        witness,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coefficient {
    pub q: DyadicCube,
    #[serde(with = "serde_ratio")]
    pub a: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingQuery {
    #[serde(with = "serde_ratio")]
    pub p: Rational,
    #[serde(with = "serde_ratio")]
    pub alpha: Rational,
    #[serde(with = "serde_ratio")]
    pub gamma: Rational,
    #[serde(rename = "R")]
    pub root: DyadicCube,
    #[serde(rename = "J")]
    pub j: u32,
    pub coeffs: Vec<Coefficient>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    #[serde(with = "serde_ratio")]
    pub p: Rational,
    #[serde(with = "serde_ratio")]
    pub alpha: Rational,
    /// `‖Σ a_Q χ_Q‖_{p,α}`.
    pub lhs: Interval,
    /// `‖sup a_Q χ_Q‖_{p,α}`.
    pub rhs: Interval,
    /// `None` when the right side may vanish.
    pub ratio: Option<Interval>,
    pub cells: usize,
    /// Members with `a_Q > 0` checked for `|Q|^{1-α/d} ≤ (γ+2)^α μ(Q)`.
    pub comparison_tested: usize,
    pub comparison_holds: bool,
    pub comparison_failure: Option<DyadicCube>,
}

/// Cell measures of a family, reusable across coefficient draws.
#[derive(Debug, Clone)]
pub struct EmbeddingContext {
    pub family: CubeFamily,
    pub alpha: Rational,
    pub gamma: Rational,
    /// Cells of the finest partition and their `μ` enclosures.
    cells: Vec<(DyadicCube, Option<Interval>)>,
    /// `μ` enclosure of every member (`None` if any cell below is unresolved).
    member_mu: HashMap<DyadicCube, Option<Interval>>,
}

impl EmbeddingContext {
    pub fn new(e: &SetModel, root: &DyadicCube, alpha: &Rational, gamma: &Rational, j: u32) -> Result<Self> {
        check_alpha(alpha, root.dim(), false)?;
        crate::lattice::check_depth(root, j.saturating_add(1))?;
        if alpha.is_zero() {
            return Err(Error::AlphaOutOfRange("0/1".into()));
        }
        let family = enumerate_dgamma(e, root, gamma, j)?;
        if family.is_empty() {
            return Err(Error::RootIsFree(root.clone()));
        }
        let set = family.member_set();
        // members have parent-closed stacks, so the cells are the non-member
        // children of members plus the deepest members
        let mut cells: Vec<DyadicCube> = Vec::new();
        for q in family.members() {
            if q.depth() == root.depth() + j {
                cells.push(q.clone());
                continue;
            }
            cells.extend(q.children(1).into_iter().filter(|c| !set.contains(c)));
        }
        cells.sort();
        let opts = MuOptions {
            exact_points_1d: true,
            ..MuOptions::default()
        };
        let mus: Vec<Result<Option<Interval>>> = cells
            .par_iter()
            .map(|c| Ok(mu_cube(e, c, alpha, j, opts)?.interval()))
            .collect();
        let mut out = Vec::with_capacity(cells.len());
        for (c, m) in cells.into_iter().zip(mus) {
            out.push((c, m?));
        }
        let mut member_mu: HashMap<DyadicCube, Option<Interval>> = HashMap::new();
        for (c, m) in &out {
            for t in root.depth()..=c.depth() {
                let a = c.ancestor_at(t);
                if !set.contains(&a) {
                    continue;
                }
                let slot = member_mu.entry(a).or_insert_with(|| Some(Interval::zero()));
                *slot = match (slot.take(), m) {
                    (Some(s), Some(m)) => Some(s + m.clone()),
                    _ => None,
                };
            }
        }
        Ok(EmbeddingContext {
            family,
            alpha: alpha.clone(),
            gamma: gamma.clone(),
            cells: out,
            member_mu,
        })
    }

    pub fn cells(&self) -> usize {
        self.cells.len()
    }

    pub fn evaluate(&self, p: &Rational, coeffs: &[Coefficient]) -> Result<EmbeddingReport> {
        if p < &Rational::one() {
            return Err(Error::InvalidArgument(format!("p must be at least 1, got {}", crate::rational::fmt_ratio(p))));
        }
        let root = &self.family.root;
        let mut a: HashMap<&DyadicCube, &Rational> = HashMap::new();
        for c in coeffs {
            if !self.family.contains(&c.q) {
                return Err(Error::NotAMember(c.q.clone()));
            }
            if c.a.is_negative() {
                return Err(Error::InvalidArgument(format!("negative coefficient on {}", c.q)));
            }
            if !c.a.is_zero() {
                a.insert(&c.q, &c.a);
            }
        }
        let pieces: Vec<Result<(Interval, Interval)>> = self
            .cells
            .par_iter()
            .map(|(c, mu)| {
                let mut sum = Rational::zero();
                let mut sup = Rational::zero();
                for t in root.depth()..=c.depth() {
                    if let Some(v) = a.get(&c.ancestor_at(t)) {
                        sum += *v;
                        if *v > &sup {
                            sup = (*v).clone();
                        }
                    }
                }
                if sum.is_zero() {
                    return Ok((Interval::zero(), Interval::zero()));
                }
                let mu = mu.as_ref().ok_or_else(|| Error::UnresolvedMeasure(c.clone()))?;
                Ok((&pow_enclosure(&sum, p) * mu, &pow_enclosure(&sup, p) * mu))
            })
            .collect();
        let mut lhs_p = Interval::zero();
        let mut rhs_p = Interval::zero();
        for piece in pieces {
            let (l, r) = piece?;
            lhs_p = lhs_p + l;
            rhs_p = rhs_p + r;
        }
        let inv = p.recip();
        let lhs = lhs_p.powr(&inv);
        let rhs = rhs_p.powr(&inv);
        let ratio = rhs.lo.is_positive().then(|| lhs.div_pos(&rhs));

        let d = root.dim();
        let x = Rational::one() - &self.alpha / int(d as u64);
        let factor = pow_enclosure(&(&self.gamma + int(2)), &self.alpha);
        let mut tested: Vec<&DyadicCube> = a.keys().copied().collect();
        tested.sort();
        let failure = tested.iter().find(|q| {
            let lhs = pow2_neg(&(&x * int(q.volume_exponent())));
            match &self.member_mu[**q] {
                Some(mu) => lhs.hi > (&factor * mu).lo,
                None => true,
            }
        });
        Ok(EmbeddingReport {
            p: p.clone(),
            alpha: self.alpha.clone(),
            lhs,
            rhs,
            ratio,
            cells: self.cells.len(),
            comparison_tested: tested.len(),
            comparison_holds: failure.is_none(),
            comparison_failure: failure.map(|q| (*q).clone()),
        })
    }
}

/// Certified enclosures of both sides of the embedding inequality.
pub fn embedding_check(e: &SetModel, q: &EmbeddingQuery) -> Result<EmbeddingReport> {
    EmbeddingContext::new(e, &q.root, &q.alpha, &q.gamma, q.j)?.evaluate(&q.p, &q.coeffs)
}
