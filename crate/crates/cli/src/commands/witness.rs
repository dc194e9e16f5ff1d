use cubeporos::analysis::porosity_scan;
use cubeporos::rational::fmt_ratio;
use cubeporos::sparse::{build_witness, verify_witness, SparseWitness, Verdict};
use cubeporos::{Rational, SetModel};
use serde::Serialize;

use crate::commands::Outcome;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{to_json, Table};

#[derive(Serialize)]
struct WitnessReport<'a> {
    config: &'a RunConfig,
    #[serde(flatten)]
    witness: SparseWitness,
    verify: Verdict,
    /// Porosity constant over the same cubes and one level deeper.
    #[serde(with = "cubeporos::rational::serde_ratio::option")]
    eta_hat: Option<Rational>,
    /// `lambda_hat ≤ 2^d · eta_hat`.
    within_porosity_bound: bool,
}

pub fn run(cfg: &RunConfig, e: &SetModel) -> Result<Outcome, CliError> {
    if e.is_empty() {
        return Err(CliError::Input("the set is empty; there is nothing to witness".into()));
    }
    let root = cfg.root_cube();
    let j = cfg.depth.expect("witness has a default depth");
    let w = build_witness(e, &root, j, cfg.search_depth)?;
    let verify = verify_witness(&w, e);
    let eta_hat = porosity_scan(e, &root, j + 1, cfg.search_depth)?.eta_hat;
    let scale = Rational::from_integer((1i64 << cfg.dim).into());
    let within = eta_hat.as_ref().map_or(false, |eta| w.lambda_hat <= eta * scale);
    let mut table = Table::new(&["q", "m", "inherited_from", "ratio"]);
    for a in &w.assignments {
        table.push(vec![
            a.q.to_string(),
            a.m.to_string(),
            a.inherited_from.as_ref().map(|o| o.to_string()).unwrap_or_default(),
            fmt_ratio(&(a.q.volume() / a.m.volume())),
        ]);
    }
    let failed = !verify.pass;
    Ok(Outcome {
        json: to_json(&WitnessReport {
            config: cfg,
            witness: w,
            verify,
            eta_hat,
            within_porosity_bound: within,
        }),
        table: Some(table),
        extra: Vec::new(),
        budget_failure: failed,
    })
}
