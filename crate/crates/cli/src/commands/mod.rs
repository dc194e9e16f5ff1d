pub mod analyze;
pub mod gamma;
pub mod invert;
pub mod plotdata;
pub mod witness;

use std::path::Path;

use cubeporos::{DyadicCube, Error};
use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::error::CliError;
use crate::io::{sibling, to_json, write_out, Table};

/// What a command produced.
pub struct Outcome {
    pub json: String,
    /// Main table, written next to the JSON report or instead of it.
    pub table: Option<Table>,
    /// Further tables, written to `<stem><suffix>.csv` beside `--out`.
    pub extra: Vec<(&'static str, Table)>,
    /// The report is complete but records a failure at this resolution.
    pub budget_failure: bool,
}

pub fn emit(out: Option<&Path>, format: Format, o: &Outcome) -> Result<(), CliError> {
    match format {
        Format::Json => {
            write_out(out, &o.json)?;
            if let (Some(p), Some(t)) = (out, &o.table) {
                let suffix = if p.extension().is_some_and(|e| e == "csv") { "_table" } else { "" };
                write_out(Some(&sibling(p, suffix)), &t.to_csv())?;
            }
        }
        Format::Csv => match &o.table {
            Some(t) => write_out(out, &t.to_csv())?,
            None => write_out(out, &o.json)?,
        },
    }
    if let Some(p) = out {
        for (suffix, t) in &o.extra {
            write_out(Some(&sibling(p, suffix)), &t.to_csv())?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ErrorBody {
    kind: &'static str,
    message: String,
    cube: Option<DyadicCube>,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    config: &'a RunConfig,
    error: ErrorBody,
}

fn kind(e: &Error) -> (&'static str, Option<DyadicCube>) {
    match e {
        Error::PorosityFailure(q) => ("PorosityFailure", Some(q.clone())),
        Error::UnresolvedMeasure(q) => ("UnresolvedMeasure", Some(q.clone())),
        Error::NotParentClosed(q) => ("NotParentClosed", Some(q.clone())),
        Error::RootIsFree(q) => ("RootIsFree", Some(q.clone())),
        Error::NotAMember(q) => ("NotAMember", Some(q.clone())),
        Error::EmptySet => ("EmptySet", None),
        Error::EmptyFamily => ("EmptyFamily", None),
        Error::AlphaOutOfRange(_) => ("AlphaOutOfRange", None),
        Error::DimensionMismatch(..) => ("DimensionMismatch", None),
        _ => ("InvalidInput", None),
    }
}

/// Report written in place of the normal one when a library call fails.
pub fn error_report(cfg: &RunConfig, e: &Error) -> String {
    let (kind, cube) = kind(e);
    to_json(&ErrorReport {
        config: cfg,
        error: ErrorBody {
            kind,
            message: e.to_string(),
            cube,
        },
    })
}
