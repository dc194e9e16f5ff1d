use cubeporos::analysis::{codim_estimate, mu_enclosure, porosity_scan, sum_sweep, CodimEstimate, MeasureEnclosure, PorosityReport, SumReport};
use cubeporos::rational::WireRational;
use cubeporos::{Rational, SetModel};
use serde::Serialize;

use crate::commands::Outcome;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{lo_hi, opt_f64, Table};

/// Porosity is scanned no deeper than this.
const POROSITY_DEPTH: u32 = 10;

#[derive(Serialize)]
struct SumPair {
    alpha: WireRational,
    dynkin: SumReport,
    de: SumReport,
}

#[derive(Serialize)]
struct AnalyzeReport<'a> {
    config: &'a RunConfig,
    porosity: PorosityReport,
    sums: Vec<SumPair>,
    mu: Vec<MeasureEnclosure>,
    codim: CodimEstimate,
    failures: Vec<String>,
}

pub fn run(cfg: &RunConfig, e: &SetModel) -> Result<Outcome, CliError> {
    if e.is_empty() {
        return Err(CliError::Input("the set is empty; nothing to analyze".into()));
    }
    let root = cfg.root_cube();
    let j = cfg.depth.expect("analyze has a default depth");
    if j == 0 {
        return Err(CliError::Input("--depth must be at least 1".into()));
    }
    if !e.cube_status(&root).meets() {
        return Err(cubeporos::Error::RootIsFree(root).into());
    }
    let alphas = cfg.alphas();
    let d = Rational::from_integer(cfg.dim.into());

    let porosity = porosity_scan(e, &root, j.min(POROSITY_DEPTH), cfg.search_depth)?;
    let sums = sum_sweep(e, &root, &alphas, j)?
        .into_iter()
        .zip(&alphas)
        .map(|((dynkin, de), a)| SumPair {
            alpha: WireRational(a.clone()),
            dynkin,
            de,
        })
        .collect();
    let mu = alphas
        .iter()
        .filter(|a| **a < d)
        .map(|a| mu_enclosure(e, &root, a, j))
        .collect::<Result<Vec<_>, _>>()?;
    let j_list: Vec<u32> = (j.saturating_sub(2).max(1)..=j).collect();
    let codim = codim_estimate(e, &alphas, &j_list, std::slice::from_ref(&root), &cfg.tau.0)?;

    let mut failures = Vec::new();
    if let Some(r) = porosity.records.iter().find(|r| r.m.is_none()) {
        failures.push(cubeporos::Error::PorosityFailure(r.cube.clone()).to_string());
    }
    if let Some(c) = mu.iter().find_map(|m| m.unresolved.clone()) {
        failures.push(cubeporos::Error::UnresolvedMeasure(c).to_string());
    }

    let mut table = Table::new(&[
        "alpha",
        "J",
        "de_ratio_lo",
        "de_ratio_hi",
        "dynkin_ratio_lo",
        "dynkin_ratio_hi",
        "increment",
        "slope",
        "bounded",
    ]);
    for t in &codim.trajectories {
        for p in &t.points {
            let [dl, dh] = lo_hi(&p.de_ratio);
            let [yl, yh] = lo_hi(&p.dynkin_ratio);
            table.push(vec![
                cubeporos::rational::fmt_ratio(&t.alpha),
                p.j.to_string(),
                dl,
                dh,
                yl,
                yh,
                opt_f64(t.increment),
                opt_f64(t.slope),
                t.bounded.to_string(),
            ]);
        }
    }
    let failed = !failures.is_empty();
    let report = AnalyzeReport {
        config: cfg,
        porosity,
        sums,
        mu,
        codim,
        failures,
    };
    Ok(Outcome {
        json: crate::io::to_json(&report),
        table: Some(table),
        extra: Vec::new(),
        budget_failure: failed,
    })
}
