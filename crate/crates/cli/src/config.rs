use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cubeporos::analysis::alpha_range;
use cubeporos::rational::{parse_decimal_or_ratio, WireRational};
use cubeporos::{DyadicCube, Rational};
use serde::Serialize;

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "cubeporos", version, about = "Dyadic-lattice analytics for porous sets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Porosity scan, sums, measure enclosures and codimension estimate.
    Analyze(Flags),
    /// Build and re-verify a well-sparse witness.
    Witness(Flags),
    /// Corner set of a parent-closed family and its packing bound.
    Invert(Flags),
    /// Enlarged families: packing bound, witness and embedding check.
    Gamma(Flags),
    /// CSV tables for plotting.
    Plotdata(Flags),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Analyze(_) => "analyze",
            Command::Witness(_) => "witness",
            Command::Invert(_) => "invert",
            Command::Gamma(_) => "gamma",
            Command::Plotdata(_) => "plotdata",
        }
    }

    pub fn flags(&self) -> &Flags {
        match self {
            Command::Analyze(f)
            | Command::Witness(f)
            | Command::Invert(f)
            | Command::Gamma(f)
            | Command::Plotdata(f) => f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct Flags {
    /// Set description (JSON).
    #[arg(long)]
    pub set: Option<PathBuf>,
    /// Cube family (JSON).
    #[arg(long)]
    pub family: Option<PathBuf>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Root cube as `j:k1;k2;…` (default: the unit cube).
    #[arg(long)]
    pub root: Option<String>,
    /// Truncation depth below the root.
    #[arg(long)]
    pub depth: Option<u32>,
    /// Oracle refinement budget.
    #[arg(long)]
    pub budget: Option<u32>,
    /// `LO:HI:STEP`, decimals or `p/q`.
    #[arg(long)]
    pub alpha_grid: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub tau: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// How far below a cube the largest free cube is searched for.
    #[arg(long)]
    pub search_depth: Option<u32>,
    /// Random coefficient draws for the embedding check.
    #[arg(long)]
    pub draws: Option<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

/// Fully resolved run parameters, embedded in every report. The output path
/// is left out so that reports do not depend on where they are written.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub set: Option<String>,
    pub family: Option<String>,
    pub dim: usize,
    pub root: String,
    #[serde(rename = "J")]
    pub depth: Option<u32>,
    pub budget: Option<u32>,
    pub alpha_grid: Vec<WireRational>,
    pub alpha: WireRational,
    pub gamma: WireRational,
    pub p: WireRational,
    pub tau: WireRational,
    pub seed: u64,
    pub search_depth: u32,
    pub draws: u32,
    pub format: Format,
}

impl RunConfig {
    pub fn root_cube(&self) -> DyadicCube {
        self.root.parse().expect("validated when resolving")
    }

    pub fn alphas(&self) -> Vec<Rational> {
        self.alpha_grid.iter().map(|w| w.0.clone()).collect()
    }
}

fn ratio(flag: &str, s: Option<&str>, default: &str) -> Result<Rational, CliError> {
    let s = s.unwrap_or(default);
    parse_decimal_or_ratio(s).map_err(|e| CliError::Input(format!("--{flag}: {e}")))
}

fn grid(s: Option<&str>) -> Result<Vec<Rational>, CliError> {
    let s = s.unwrap_or("1/10:1:1/10");
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Input(format!("--alpha-grid: expected LO:HI:STEP, got {s:?}")));
    }
    let lo = ratio("alpha-grid", Some(parts[0]), "")?;
    let hi = ratio("alpha-grid", Some(parts[1]), "")?;
    let step = ratio("alpha-grid", Some(parts[2]), "")?;
    if step <= Rational::from_integer(0.into()) || lo > hi {
        return Err(CliError::Input("--alpha-grid: need LO ≤ HI and STEP > 0".into()));
    }
    let g = alpha_range(&lo, &hi, &step);
    if g.len() > 10_000 {
        return Err(CliError::Input("--alpha-grid: more than 10000 points".into()));
    }
    Ok(g)
}

/// Per-command defaults: `(depth, search_depth)`.
fn defaults(command: &str) -> (Option<u32>, u32) {
    match command {
        "analyze" => (Some(12), 6),
        "witness" => (Some(6), 8),
        "invert" => (None, 8),
        "gamma" => (Some(8), 8),
        _ => (Some(10), 6),
    }
}

pub fn resolve(cmd: &Command, dim_hint: Option<usize>) -> Result<RunConfig, CliError> {
    let f = cmd.flags();
    let name = cmd.name();
    let dim = match (f.dim, dim_hint) {
        (Some(d), Some(h)) if d != h => {
            return Err(CliError::Input(format!("--dim {d} does not match the input dimension {h}")));
        }
        (Some(d), _) | (None, Some(d)) => d,
        (None, None) => 1,
    };
    if !(1..=8).contains(&dim) {
        return Err(CliError::Input(format!("--dim must lie in 1..=8, got {dim}")));
    }
    let root = match &f.root {
        Some(s) => {
            let q: DyadicCube = s.parse().map_err(|e| CliError::Input(format!("--root: {e}")))?;
            if q.dim() != dim {
                return Err(CliError::Input(format!("--root has dimension {}, expected {dim}", q.dim())));
            }
            q
        }
        None => DyadicCube::root(dim),
    };
    let (depth_default, search_default) = defaults(name);
    let depth = f.depth.or(depth_default);
    if let Some(j) = depth {
        if root.depth() + j > cubeporos::lattice::MAX_DEPTH {
            return Err(CliError::Input(format!("--depth {j} exceeds the lattice depth limit")));
        }
    }
    let wire = |q: Rational| WireRational(q);
    let gamma = ratio("gamma", f.gamma.as_deref(), "1")?;
    if gamma <= Rational::from_integer(0.into()) {
        return Err(CliError::Input("--gamma must be positive".into()));
    }
    let p = ratio("p", f.p.as_deref(), "1")?;
    if p < Rational::from_integer(1.into()) || p.denom() > &1000.into() || p.numer() > &1000.into() {
        return Err(CliError::Input("--p must be a rational ≥ 1 with numerator and denominator ≤ 1000".into()));
    }
    Ok(RunConfig {
        command: name,
        set: f.set.as_ref().map(|p| p.display().to_string()),
        family: f.family.as_ref().map(|p| p.display().to_string()),
        dim,
        root: root.to_string(),
        depth,
        budget: f.budget,
        alpha_grid: grid(f.alpha_grid.as_deref())?.into_iter().map(wire).collect(),
        alpha: wire(ratio("alpha", f.alpha.as_deref(), "1/2")?),
        gamma: wire(gamma),
        p: wire(p),
        tau: wire(ratio("tau", f.tau.as_deref(), "1/20")?),
        seed: f.seed.unwrap_or(0),
        search_depth: f.search_depth.unwrap_or(search_default),
        draws: f.draws.unwrap_or(100),
        format: f.format,
    })
}
