use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use cubeporos::rational::decimal_directed;
use cubeporos::{CubeFamily, Interval, Rational, SetModel};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::CliError;

/// Digits after the point in CSV output.
pub const DIGITS: usize = 12;

fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let mut at = e.path().to_string();
        let inner = e.into_inner().to_string();
        if at == "." {
            // tagged enums buffer their content and lose the position
            if let Ok(v) = serde_json::from_str::<serde_json::Value>(&text) {
                if let Some(p) = locate(&v, &inner, String::new()) {
                    at = p;
                }
            }
        }
        CliError::Input(format!("{}: at {at}: {inner}", path.display()))
    })
}

/// Path of the first string leaf quoted in `msg`.
fn locate(v: &serde_json::Value, msg: &str, here: String) -> Option<String> {
    use serde_json::Value;
    match v {
        Value::String(s) => msg.contains(&format!("{s:?}")).then_some(here),
        Value::Array(xs) => xs
            .iter()
            .enumerate()
            .find_map(|(i, x)| locate(x, msg, format!("{here}[{i}]"))),
        Value::Object(m) => m
            .iter()
            .filter(|(k, _)| k.as_str() != "kind")
            .find_map(|(k, x)| {
                let sep = if here.is_empty() { "" } else { "." };
                locate(x, msg, format!("{here}{sep}{k}"))
            }),
        _ => None,
    }
}

pub fn load_set(path: &Path, budget: Option<u32>) -> Result<SetModel, CliError> {
    let e: SetModel = load(path)?;
    Ok(match budget {
        Some(b) => e.with_budget(b),
        None => e,
    })
}

pub fn load_family(path: &Path) -> Result<CubeFamily, CliError> {
    load(path)
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

pub fn write_out(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, content)?;
        }
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(content.as_bytes())?;
            so.flush()?;
        }
    }
    Ok(())
}

/// `report.json` → `report<suffix>.csv`.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}{suffix}.csv"))
}

pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Table {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<serde_json::Map<String, serde_json::Value>> = self
            .rows
            .iter()
            .map(|r| {
                self.header
                    .iter()
                    .zip(r)
                    .map(|(h, v)| (h.to_string(), serde_json::Value::String(v.clone())))
                    .collect()
            })
            .collect();
        to_json(&rows)
    }
}

pub fn down(q: &Rational) -> String {
    decimal_directed(q, DIGITS, false)
}

pub fn up(q: &Rational) -> String {
    decimal_directed(q, DIGITS, true)
}

pub fn lo_hi(i: &Interval) -> [String; 2] {
    [down(&i.lo), up(&i.hi)]
}

pub fn opt_f64(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_default()
}
