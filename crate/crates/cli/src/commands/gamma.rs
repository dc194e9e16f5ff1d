use cubeporos::gamma::{gamma_carleson, gamma_witness, Coefficient, EmbeddingContext, EmbeddingReport, GammaReport, GammaWitness};
use cubeporos::random::rng;
use cubeporos::rational::fmt_ratio;
use cubeporos::{Interval, Rational, SetModel};
use rand::Rng;
use serde::Serialize;

use crate::commands::Outcome;
use crate::config::RunConfig;
use crate::error::{is_budget, CliError};
use crate::io::{lo_hi, to_json, Table};

/// Random coefficients are integers in `0..=COEFF_MAX`.
const COEFF_MAX: u32 = 4;

#[derive(Serialize)]
struct Draw {
    index: u32,
    lhs: Interval,
    rhs: Interval,
    ratio: Option<Interval>,
}

#[derive(Serialize)]
struct Embedding {
    constant: EmbeddingReport,
    draws: Vec<Draw>,
    /// Largest ratio upper end over the constant draw and all random draws.
    #[serde(with = "cubeporos::rational::serde_ratio::option")]
    ratio_bound: Option<Rational>,
    /// The constant draw reaches the largest random ratio within the
    /// enclosure widths.
    constant_attains_max: bool,
}

#[derive(Serialize)]
#[serde(rename_all = "snake_case")]
enum Part<T> {
    Ok(T),
    Failed { kind: &'static str, message: String },
}

#[derive(Serialize)]
struct GammaCommandReport<'a> {
    config: &'a RunConfig,
    carleson: GammaReport,
    witness: Part<GammaWitness>,
    embedding: Part<Embedding>,
}

fn part<T>(r: cubeporos::Result<T>, failed: &mut bool) -> Result<Part<T>, CliError> {
    match r {
        Ok(v) => Ok(Part::Ok(v)),
        Err(e) if is_budget(&e) => {
            *failed = true;
            let kind = match e {
                cubeporos::Error::PorosityFailure(_) => "PorosityFailure",
                _ => "UnresolvedMeasure",
            };
            Ok(Part::Failed {
                kind,
                message: e.to_string(),
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn embedding(cfg: &RunConfig, e: &SetModel, j: u32) -> cubeporos::Result<Embedding> {
    let root = cfg.root_cube();
    let ctx = EmbeddingContext::new(e, &root, &cfg.alpha.0, &cfg.gamma.0, j)?;
    let members = ctx.family.members().to_vec();
    let ones: Vec<Coefficient> = members
        .iter()
        .map(|q| Coefficient {
            q: q.clone(),
            a: Rational::from_integer(1.into()),
        })
        .collect();
    let constant = ctx.evaluate(&cfg.p.0, &ones)?;
    let mut g = rng(cfg.seed);
    let mut draws = Vec::with_capacity(cfg.draws as usize);
    for index in 0..cfg.draws {
        let coeffs: Vec<Coefficient> = members
            .iter()
            .map(|q| Coefficient {
                q: q.clone(),
                a: Rational::from_integer(g.gen_range(0..=COEFF_MAX).into()),
            })
            .collect();
        let r = ctx.evaluate(&cfg.p.0, &coeffs)?;
        draws.push(Draw {
            index,
            lhs: r.lhs,
            rhs: r.rhs,
            ratio: r.ratio,
        });
    }
    let ratio_bound = draws
        .iter()
        .filter_map(|d| d.ratio.as_ref().map(|r| r.hi.clone()))
        .chain(constant.ratio.as_ref().map(|r| r.hi.clone()))
        .max();
    let best_lo = draws.iter().filter_map(|d| d.ratio.as_ref().map(|r| r.lo.clone())).max();
    let constant_attains_max = match (&constant.ratio, best_lo) {
        (Some(c), Some(b)) => c.hi >= b,
        (Some(_), None) => true,
        _ => false,
    };
    Ok(Embedding {
        constant,
        draws,
        ratio_bound,
        constant_attains_max,
    })
}

pub fn run(cfg: &RunConfig, e: &SetModel) -> Result<Outcome, CliError> {
    if e.is_empty() {
        return Err(CliError::Input("the set is empty".into()));
    }
    let root = cfg.root_cube();
    let j = cfg.depth.expect("gamma has a default depth");
    let carleson = gamma_carleson(e, &root, &cfg.gamma.0, j)?;
    let mut failed = false;
    let witness = part(gamma_witness(e, &root, &cfg.gamma.0, j), &mut failed)?;
    let embedding = part(embedding(cfg, e, j), &mut failed)?;

    let mut table = Table::new(&["root", "ratio", "proof_bound", "cover"]);
    for r in &carleson.roots {
        table.push(vec![
            r.root.to_string(),
            fmt_ratio(&r.ratio),
            fmt_ratio(&r.proof_bound),
            r.cover.len().to_string(),
        ]);
    }
    let mut draws = Table::new(&["draw", "lhs_lo", "lhs_hi", "rhs_lo", "rhs_hi", "ratio_lo", "ratio_hi"]);
    if let Part::Ok(emb) = &embedding {
        let rows = std::iter::once(("constant".to_string(), &emb.constant.lhs, &emb.constant.rhs, &emb.constant.ratio))
            .chain(emb.draws.iter().map(|d| (d.index.to_string(), &d.lhs, &d.rhs, &d.ratio)));
        for (name, l, r, q) in rows {
            let [ll, lh] = lo_hi(l);
            let [rl, rh] = lo_hi(r);
            let [ql, qh] = q.as_ref().map(lo_hi).unwrap_or_default();
            draws.push(vec![name, ll, lh, rl, rh, ql, qh]);
        }
    }
    failed |= !carleson.holds;
    Ok(Outcome {
        json: to_json(&GammaCommandReport {
            config: cfg,
            carleson,
            witness,
            embedding,
        }),
        table: Some(table),
        extra: vec![("_draws", draws)],
        budget_failure: failed,
    })
}
