use cubeporos::inverse::{check_parent_closed, invert, InverseReport};
use cubeporos::random::{random_parent_closed, rng};
use cubeporos::rational::fmt_ratio;
use cubeporos::{CubeFamily, Error};
use serde::Serialize;

use crate::commands::Outcome;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{to_json, Table};

/// Shape of generated families when no `--family` is given.
pub const RANDOM_DEPTH: u32 = 6;
pub const RANDOM_KEEP: f64 = 0.45;
pub const RANDOM_MAX_MEMBERS: usize = 400;

#[derive(Serialize)]
struct InvertReport<'a> {
    config: &'a RunConfig,
    family: &'a CubeFamily,
    report: InverseReport,
}

/// The family from `--family`, or one drawn from the seed.
pub fn family(cfg: &RunConfig, given: Option<CubeFamily>) -> CubeFamily {
    given.unwrap_or_else(|| {
        random_parent_closed(&mut rng(cfg.seed), cfg.dim, RANDOM_DEPTH, RANDOM_KEEP, RANDOM_MAX_MEMBERS)
    })
}

pub fn run(cfg: &RunConfig, s: &CubeFamily) -> Result<Outcome, CliError> {
    if s.is_empty() {
        return Err(Error::EmptyFamily.into());
    }
    if let Some(q) = check_parent_closed(s).offender {
        return Err(Error::NotParentClosed(q).into());
    }
    let (_, report) = invert(s, cfg.depth)?;
    let mut table = Table::new(&["root", "s1", "s2", "s3", "s4"]);
    for r in &report.roots {
        table.push(vec![
            r.root.to_string(),
            fmt_ratio(&r.s1),
            fmt_ratio(&r.s2),
            fmt_ratio(&r.s3),
            fmt_ratio(&r.s4),
        ]);
    }
    let failed = !report.holds;
    Ok(Outcome {
        json: to_json(&InvertReport {
            config: cfg,
            family: s,
            report,
        }),
        table: Some(table),
        extra: Vec::new(),
        budget_failure: failed,
    })
}
