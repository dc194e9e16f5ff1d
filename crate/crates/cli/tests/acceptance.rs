//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use cubeporos::analysis::{alpha_range, codim_estimate, de_sum, dynkin_sum, mu_enclosure, multiplicity_check, porosity_scan};
use cubeporos::families::{enumerate_de, enumerate_dgamma, enumerate_fe, traverse, TraversalOptions};
use cubeporos::gamma::{Coefficient, EmbeddingContext};
use cubeporos::inverse::inverse_bound;
use cubeporos::random::{random_cube, random_parent_closed, random_porous, rng, SeededRng};
use cubeporos::rational::{fmt_ratio, inv_pow2, to_f64};
use cubeporos::sparse::Violation;
use cubeporos::{
    build_witness, carleson_constant, gamma_carleson, invert, verify_witness, CubeFamily, DyadicCube, Rational,
    SetModel,
};
use rand::Rng;

type Check = Result<String, String>;

fn r(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn origin() -> SetModel {
    SetModel::points(vec![vec![r(0, 1)]]).unwrap()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn secs(t: Duration) -> String {
    format!("{:.2}s", t.as_secs_f64())
}

/// A random porous set meeting the unit cube, with a root cube of depth ≤ 2
/// that meets it.
fn random_config(g: &mut SeededRng, d: usize) -> (SetModel, DyadicCube) {
    let mut e = random_porous(g, d);
    while !e.cube_status(&DyadicCube::root(d)).meets() {
        e = random_porous(g, d);
    }
    for _ in 0..8 {
        let q = random_cube(g, d, 2);
        if e.cube_status(&q).meets() {
            return (e, q);
        }
    }
    (e, DyadicCube::root(d))
}

/// Deepest `J` per dimension in the random partition runs.
const MAX_J: [u32; 3] = [10, 8, 5];

struct Config {
    e: SetModel,
    root: DyadicCube,
    j: u32,
}

fn partition(configs: &mut Vec<Config>) -> Check {
    let start = Instant::now();
    let mut g = rng(1);
    let mut free = 0usize;
    for i in 0..200 {
        let d = 1 + i % 3;
        let (e, root) = random_config(&mut g, d);
        let j = g.gen_range(0..=MAX_J[d - 1]);
        let dec = enumerate_fe(&e, &root, j).map_err(|err| format!("config {i}: {err}"))?;
        ensure(dec.partition_exact(), || {
            format!("config {i}: covered {} of {}", dec.covered_volume(), root.volume())
        })?;
        free += dec.free.len();
        configs.push(Config { e, root, j });
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(30), || format!("took {}", secs(t)))?;
    Ok(format!("200 configs exact, {free} free cubes, {}", secs(t)))
}

fn single_point() -> Check {
    let root = DyadicCube::root(1);
    let half = r(1, 2);
    let dyn_want = 1.0 / (2f64.sqrt() - 1.0);
    let de_want = 1.0 / (1.0 - 0.5f64.sqrt());
    let s = dynkin_sum(&origin(), &root, &half, 40).map_err(|e| e.to_string())?;
    ensure(s.total.contains_f64_within(dyn_want, 1e-6), || format!("dynkin {:?}", s.total))?;
    let t = de_sum(&origin(), &root, &half, 40).map_err(|e| e.to_string())?;
    ensure(t.total.contains_f64_within(de_want, 1e-6), || format!("de {:?}", t.total))?;
    let m = mu_enclosure(&origin(), &root, &half, 30).map_err(|e| e.to_string())?;
    let lo = to_f64(&m.lower);
    let hi = m.upper.as_ref().map(to_f64).unwrap_or(f64::INFINITY);
    ensure(lo <= 2.0 && 2.0 <= hi && lo >= 1.70710 && hi <= 2.41422, || format!("mu [{lo}, {hi}]"))?;
    Ok(format!(
        "dynkin [{:.9}, {:.9}], de [{:.9}, {:.9}], mu [{lo:.6}, {hi:.6}]",
        s.total.lo_f64(),
        s.total.hi_f64(),
        t.total.lo_f64(),
        t.total.hi_f64()
    ))
}

fn codimension(multiplicity: &mut Vec<bool>) -> Check {
    let root = DyadicCube::root(1);
    let start = Instant::now();
    let grid = alpha_range(&r(1, 20), &r(1, 1), &r(1, 20));
    let est = codim_estimate(&origin(), &grid, &[18, 19, 20], &[root.clone()], &r(1, 20)).map_err(|e| e.to_string())?;
    let t0 = start.elapsed();
    let got0 = to_f64(&est.estimate);
    multiplicity.extend(est.multiplicity.iter().map(|m| m.certified && m.per_level));
    ensure((got0 - 1.0).abs() <= 0.05, || format!("origin estimate {got0}"))?;
    ensure(t0 < Duration::from_secs(5), || format!("origin took {}", secs(t0)))?;

    let start = Instant::now();
    let want = 1.0 - 2f64.ln() / 3f64.ln();
    let grid = alpha_range(&r(0, 1), &r(1, 1), &r(1, 50));
    let est = codim_estimate(&SetModel::cantor(), &grid, &[12, 13, 14], &[root], &r(1, 20)).map_err(|e| e.to_string())?;
    let t1 = start.elapsed();
    let got1 = to_f64(&est.estimate);
    multiplicity.extend(est.multiplicity.iter().map(|m| m.certified && m.per_level));
    ensure((got1 - want).abs() <= 0.08, || format!("cantor estimate {got1} vs {want:.5}"))?;
    ensure(t1 < Duration::from_secs(60), || format!("cantor took {}", secs(t1)))?;
    Ok(format!(
        "{{0}}: {got0:.2} in {}, Cantor: {got1:.2} (target {want:.5}) in {}",
        secs(t0),
        secs(t1)
    ))
}

fn witness_case(name: &str, e: &SetModel, root: &DyadicCube, j: u32, search: u32) -> Result<(), String> {
    let w = build_witness(e, root, j, search).map_err(|err| format!("{name}: {err}"))?;
    let v = verify_witness(&w, e);
    ensure(v.pass, || format!("{name}: {:?}", v.violation))?;
    let eta = porosity_scan(e, root, j + 1, search)
        .map_err(|err| format!("{name}: {err}"))?
        .eta_hat
        .ok_or_else(|| format!("{name}: no porosity constant"))?;
    let bound = eta * Rational::from_integer((1i64 << root.dim()).into());
    ensure(w.lambda_hat <= bound, || {
        format!("{name}: lambda {} > {}", fmt_ratio(&w.lambda_hat), fmt_ratio(&bound))
    })
}

fn witness_soundness() -> Check {
    let root = DyadicCube::root(1);
    let two = SetModel::points(vec![vec![r(0, 1)], vec![r(1, 1)]]).unwrap();
    witness_case("{0}", &origin(), &root, 6, 8)?;
    witness_case("{0,1}", &two, &root, 6, 8)?;
    witness_case("Cantor", &SetModel::cantor(), &root, 6, 8)?;
    let mut g = rng(4);
    for i in 0..50 {
        let d = 1 + i % 2;
        let mut e = random_porous(&mut g, d);
        while !e.cube_status(&DyadicCube::root(d)).meets() {
            e = random_porous(&mut g, d);
        }
        witness_case(&format!("random {i}"), &e, &DyadicCube::root(d), 4, 6)?;
    }
    // planted faults
    let w = build_witness(&origin(), &root, 3, 3).map_err(|e| e.to_string())?;
    let c = |j: u32, k: u64| DyadicCube::new(j, [k]).unwrap();
    let mut plants = Vec::new();
    let mut bad = w.clone();
    bad.assignments[2].m = bad.assignments[1].m.clone();
    plants.push(("outside", bad));
    let mut bad = w.clone();
    bad.assignments[0].m = c(3, 3);
    plants.push(("overlap", bad));
    let mut bad = w.clone();
    bad.assignments[0].m = c(1, 0);
    plants.push(("not free", bad));
    let mut named = Vec::new();
    for (name, bad) in plants {
        let v = verify_witness(&bad, &origin());
        let cube = match &v.violation {
            Some(Violation::NotContained { q, .. }) | Some(Violation::NotFree { q, .. }) => q.to_string(),
            Some(Violation::Overlap { q1, q2 }) => format!("{q1}/{q2}"),
            Some(other) => format!("{other:?}"),
            None => return Err(format!("planted {name} fault accepted")),
        };
        named.push(format!("{name} at {cube}"));
    }
    Ok(format!("53 witnesses verified; planted faults rejected: {}", named.join(", ")))
}

fn theorem_two() -> Check {
    let mut g = rng(5);
    let mut worst = 0f64;
    for i in 0..100 {
        let d = 1 + i % 2;
        let depth = g.gen_range(1..=8);
        let keep = g.gen_range(0.3..0.6);
        let s = random_parent_closed(&mut g, d, depth, keep, 300);
        let (_, rep) = invert(&s, None).map_err(|e| format!("family {i}: {e}"))?;
        let xi = carleson_constant(&s, None).map_err(|e| e.to_string())?.xi_hat;
        ensure(xi == rep.xi_input, || format!("family {i}: xi mismatch"))?;
        ensure(rep.bound == inverse_bound(&xi, d), || format!("family {i}: bound mismatch"))?;
        ensure(rep.measured <= rep.bound && rep.holds, || {
            format!("family {i}: {} > {}", fmt_ratio(&rep.measured), fmt_ratio(&rep.bound))
        })?;
        worst = worst.max(to_f64(&(&rep.measured / &rep.bound)));
    }
    let chain = CubeFamily::from_members(
        DyadicCube::root(1),
        (0..=10).map(|k| DyadicCube::new(k, [0]).unwrap()).collect(),
    )
    .unwrap();
    let (_, rep) = invert(&chain, None).map_err(|e| e.to_string())?;
    let c = to_f64(&rep.bound);
    ensure(rep.holds && (c - 8.0).abs() < 0.01, || format!("chain bound {c}"))?;
    ensure(rep.bound == r(8, 1) - r(3, 1) * inv_pow2(10), || "chain bound not 8 - 3/1024".into())?;
    Ok(format!(
        "100 families, 0 violations, max measured/bound {worst:.4}; chain C(xi) = {} ~ {c:.5}, measured {:.5}",
        fmt_ratio(&rep.bound),
        to_f64(&rep.measured)
    ))
}

fn theorem_three() -> Check {
    let root = DyadicCube::root(1);
    let gammas = [r(1, 4), r(1, 1), r(2, 1)];
    let mut lines = Vec::new();
    for (name, e) in [("{0}", origin()), ("Cantor", SetModel::cantor())] {
        for j in [6, 10] {
            let de: HashSet<DyadicCube> = enumerate_de(&e, &root, j).map_err(|e| e.to_string())?.members().iter().cloned().collect();
            let mut prev: Option<HashSet<DyadicCube>> = None;
            for gamma in &gammas {
                let tag = format!("{name} gamma={} J={j}", fmt_ratio(gamma));
                let rep = gamma_carleson(&e, &root, gamma, j).map_err(|err| format!("{tag}: {err}"))?;
                ensure(rep.measured <= rep.bound && rep.holds, || {
                    format!("{tag}: {} > {}", fmt_ratio(&rep.measured), fmt_ratio(&rep.bound))
                })?;
                let fam: HashSet<DyadicCube> = enumerate_dgamma(&e, &root, gamma, j)
                    .map_err(|err| err.to_string())?
                    .members()
                    .iter()
                    .cloned()
                    .collect();
                ensure(de.is_subset(&fam), || format!("{tag}: D_E not contained"))?;
                if let Some(p) = &prev {
                    ensure(p.is_subset(&fam), || format!("{tag}: not monotone in gamma"))?;
                }
                prev = Some(fam);
                if j == 10 {
                    lines.push(format!("{name} {}: {:.3} <= {:.1}", fmt_ratio(gamma), to_f64(&rep.measured), to_f64(&rep.bound)));
                }
            }
        }
    }
    Ok(lines.join("; "))
}

fn embedding() -> Check {
    let root = DyadicCube::root(1);
    let j = 48;
    let ctx = EmbeddingContext::new(&origin(), &root, &r(1, 2), &r(1, 4), j).map_err(|e| e.to_string())?;
    let members = ctx.family.members().to_vec();
    ensure(members.len() == j as usize + 1, || format!("{} members", members.len()))?;
    let coeffs = |a: &dyn Fn() -> i64| -> Vec<Coefficient> {
        members.iter().map(|q| Coefficient { q: q.clone(), a: r(a(), 1) }).collect()
    };
    let ones = coeffs(&|| 1);
    let tol = r(1, 10000);

    let rep1 = ctx.evaluate(&r(1, 1), &ones).map_err(|e| e.to_string())?;
    // μ([0,2^{-k})) = 2·2^{-k/2}
    let lhs1: f64 = (0..=j).map(|k| 2.0 * (-(k as f64) / 2.0).exp2()).sum();
    let limit = 2.0 / (1.0 - 0.5f64.sqrt());
    ensure(rep1.lhs.contains_f64_within(lhs1, 1e-12), || format!("p=1 lhs {:?}", rep1.lhs))?;
    ensure((rep1.lhs.mid_f64() - limit).abs() <= 1e-4, || format!("p=1 lhs far from {limit}"))?;
    ensure(rep1.rhs.contains_f64_within(2.0, 1e-12), || format!("p=1 rhs {:?}", rep1.rhs))?;
    ensure(rep1.lhs.width() <= tol && rep1.rhs.width() <= tol, || "p=1 enclosure too wide".into())?;

    let rep2 = ctx.evaluate(&r(2, 1), &ones).map_err(|e| e.to_string())?;
    // height k+1 on [2^{-k-1}, 2^{-k}), height J+1 on [0, 2^{-J-1})
    let cell = |k: u32| 2.0 * (-(k as f64) / 2.0).exp2() * (1.0 - 0.5f64.sqrt());
    let mut sq: f64 = (0..=j).map(|k| ((k + 1) as f64).powi(2) * cell(k)).sum();
    sq += ((j + 1) as f64).powi(2) * 2.0 * (-((j + 1) as f64) / 2.0).exp2();
    ensure(rep2.lhs.contains_f64_within(sq.sqrt(), 1e-9), || format!("p=2 lhs {:?} vs {}", rep2.lhs, sq.sqrt()))?;
    ensure(rep2.rhs.contains_f64_within(2f64.sqrt(), 1e-12), || format!("p=2 rhs {:?}", rep2.rhs))?;
    ensure(rep2.lhs.width() <= tol && rep2.rhs.width() <= tol, || "p=2 enclosure too wide".into())?;

    let mut g = rng(7);
    let mut draws = Vec::new();
    for _ in 0..100 {
        let c: Vec<Coefficient> = members
            .iter()
            .map(|q| Coefficient { q: q.clone(), a: r(g.gen_range(0..=4), 1) })
            .collect();
        draws.push(ctx.evaluate(&r(1, 1), &c).map_err(|e| e.to_string())?);
    }
    let ratio_bound = draws
        .iter()
        .chain(std::iter::once(&rep1))
        .filter_map(|d| d.ratio.as_ref().map(|q| q.hi.clone()))
        .max()
        .ok_or("no finite ratio")?;
    for (i, d) in draws.iter().enumerate() {
        ensure(d.lhs.lo <= &ratio_bound * &d.rhs.hi, || format!("draw {i} exceeds ratio bound"))?;
    }
    Ok(format!(
        "p=1 lhs [{:.6}, {:.6}] rhs [{:.6}, {:.6}], p=2 lhs [{:.6}, {:.6}]; 100 draws ratio_bound {:.6}",
        rep1.lhs.lo_f64(),
        rep1.lhs.hi_f64(),
        rep1.rhs.lo_f64(),
        rep1.rhs.hi_f64(),
        rep2.lhs.lo_f64(),
        rep2.lhs.hi_f64(),
        to_f64(&ratio_bound)
    ))
}

fn multiplicity(configs: &[Config], from_codim: &[bool]) -> Check {
    let mut checked = from_codim.len();
    ensure(from_codim.iter().all(|&ok| ok), || "codimension run has a failing multiplicity check".into())?;
    for (i, c) in configs.iter().enumerate() {
        let d = c.root.dim();
        let t = traverse(&c.e, &c.root, c.j, TraversalOptions::COUNTS).map_err(|e| e.to_string())?;
        for alpha in [r(0, 1), r(d as i64, 4), r(d as i64, 2), r(3 * d as i64, 4)] {
            let m = multiplicity_check(d, &alpha, &t.de_count, &t.free_count);
            ensure(m.certified && m.per_level, || format!("config {i}, alpha {}", fmt_ratio(&alpha)))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} comparisons certified"))
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn determinism() -> Check {
    let runs: [(&str, &[&str]); 5] = [
        ("gamma_origin", &["gamma", "--set", "data/origin.json", "--gamma", "2", "--depth", "8", "--seed", "11"]),
        ("gamma_cantor", &["gamma", "--set", "data/cantor.json", "--depth", "6", "--seed", "5", "--draws", "20"]),
        ("invert", &["invert", "--dim", "2", "--seed", "42"]),
        ("witness", &["witness", "--set", "data/cantor.json", "--depth", "6"]),
        ("analyze", &["analyze", "--set", "data/cantor.json", "--depth", "10"]),
    ];
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = 0;
    for (name, args) in runs {
        let mut outputs: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
        let mut codes = Vec::new();
        for threads in [1, 4, 8] {
            let dir = tmp.path().join(format!("{name}_{threads}"));
            std::fs::create_dir(&dir).map_err(|e| e.to_string())?;
            let status = Command::new(env!("CARGO_BIN_EXE_cubeporos"))
                .args(args)
                .arg("--out")
                .arg(dir.join("report.json"))
                .env("CUBEPOROS_THREADS", threads.to_string())
                .current_dir(workspace())
                .status()
                .map_err(|e| e.to_string())?;
            codes.push(status.code());
            let mut entries: Vec<(String, Vec<u8>)> = std::fs::read_dir(&dir)
                .map_err(|e| e.to_string())?
                .map(|f| {
                    let f = f.unwrap();
                    (f.file_name().to_string_lossy().into_owned(), std::fs::read(f.path()).unwrap())
                })
                .collect();
            entries.sort();
            outputs.push(entries);
        }
        ensure(codes.windows(2).all(|w| w[0] == w[1]), || format!("{name}: exit codes {codes:?}"))?;
        ensure(!outputs[0].is_empty(), || format!("{name}: no output"))?;
        ensure(outputs.windows(2).all(|w| w[0] == w[1]), || format!("{name}: outputs differ across thread counts"))?;
        files += outputs[0].len();
    }
    Ok(format!("5 runs x threads 1/4/8, {files} files byte-identical"))
}

fn main() {
    let mut configs = Vec::new();
    let mut mult = Vec::new();
    let criteria: Vec<(u32, &str, Box<dyn FnOnce(&mut Vec<Config>, &mut Vec<bool>) -> Check>)> = vec![
        (1, "partition exactness", Box::new(|c, _| partition(c))),
        (2, "single-point oracles", Box::new(|_, _| single_point())),
        (3, "codimension estimates", Box::new(|_, m| codimension(m))),
        (4, "witness soundness", Box::new(|_, _| witness_soundness())),
        (5, "inverse packing bound", Box::new(|_, _| theorem_two())),
        (6, "gamma family bound", Box::new(|_, _| theorem_three())),
        (7, "embedding inequality", Box::new(|_, _| embedding())),
        (8, "multiplicity inequality", Box::new(|c, m| multiplicity(c, m))),
        (9, "determinism across threads", Box::new(|_, _| determinism())),
    ];
    let mut failed = 0;
    for (n, name, run) in criteria {
        let start = Instant::now();
        let res = run(&mut configs, &mut mult);
        let t = secs(start.elapsed());
        match res {
            Ok(detail) => println!("PASS {n} {name} [{t}]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {n} {name} [{t}]: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
