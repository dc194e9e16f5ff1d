use cubeporos::analysis::codim_estimate;
use cubeporos::families::{traverse, TraversalOptions};
use cubeporos::rational::fmt_ratio;
use cubeporos::{CubeFamily, SetModel};

use crate::commands::Outcome;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{lo_hi, Table};

/// `(α, J, ratio)` sweep for every `J ≤ depth`, plus per-level family sizes.
pub fn run_set(cfg: &RunConfig, e: &SetModel) -> Result<Outcome, CliError> {
    let root = cfg.root_cube();
    let j = cfg.depth.expect("plotdata has a default depth");
    let mut sweep = Table::new(&["alpha", "J", "de_ratio_lo", "de_ratio_hi", "dynkin_ratio_lo", "dynkin_ratio_hi"]);
    let mut sizes = Table::new(&["depth", "de_count", "free_count"]);
    if !e.is_empty() && e.cube_status(&root).meets() && j > 0 {
        let js: Vec<u32> = (1..=j).collect();
        let est = codim_estimate(e, &cfg.alphas(), &js, std::slice::from_ref(&root), &cfg.tau.0)?;
        for t in &est.trajectories {
            for p in &t.points {
                let [dl, dh] = lo_hi(&p.de_ratio);
                let [yl, yh] = lo_hi(&p.dynkin_ratio);
                sweep.push(vec![fmt_ratio(&t.alpha), p.j.to_string(), dl, dh, yl, yh]);
            }
        }
        let t = traverse(e, &root, j, TraversalOptions::COUNTS)?;
        for (k, (de, free)) in t.de_count.iter().zip(&t.free_count).enumerate() {
            sizes.push(vec![(root.depth() + k as u32).to_string(), de.to_string(), free.to_string()]);
        }
    }
    Ok(Outcome {
        json: sweep.to_json(),
        table: Some(sweep),
        extra: vec![("_sizes", sizes)],
        budget_failure: false,
    })
}

/// Per-level sizes of a given family; an empty family gives only the header.
pub fn run_family(f: &CubeFamily) -> Result<Outcome, CliError> {
    let mut sizes = Table::new(&["depth", "size"]);
    if !f.is_empty() {
        for (k, n) in f.level_sizes().iter().enumerate() {
            sizes.push(vec![(f.root.depth() + k as u32).to_string(), n.to_string()]);
        }
    }
    Ok(Outcome {
        json: sizes.to_json(),
        table: Some(sizes),
        extra: Vec::new(),
        budget_failure: false,
    })
}
