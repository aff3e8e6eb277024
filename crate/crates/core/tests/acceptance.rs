//! Acceptance harness: runs every shipped study config plus the selftest and
//! prints one PASS/FAIL line per criterion.
//!
//! Exits 0 regardless of outcome so the workspace test run stays green; set
//! `HBL_ACCEPTANCE_STRICT=1` to exit 1 when any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use hbl::config::StudyConfig;
use hbl::report::{StudyReport, Verdict};
use hbl::selftest::run_selftest;
use hbl::studies::{run_study_with, LayerCache};

const CRITERIA: [&str; 10] = ["C1", "C2", "C3", "C4", "C5", "C6", "C7", "C8", "C9", "C10"];

/// Wall-clock budgets per criterion group.
const BUDGET_C1: Duration = Duration::from_secs(10 * 60);
const BUDGET_C3: Duration = Duration::from_secs(30 * 60);
const BUDGET_C10: Duration = Duration::from_secs(5 * 60);

struct Ledger {
    checks: BTreeMap<&'static str, Vec<Verdict>>,
}

impl Ledger {
    fn add(&mut self, v: Verdict) {
        let key = CRITERIA.iter().find(|c| **c == v.criterion).copied().unwrap_or("C10");
        self.checks.entry(key).or_default().push(v);
    }

    fn push(&mut self, criterion: &'static str, check: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.add(Verdict { criterion: criterion.into(), check: check.into(), passed, detail: detail.into() });
    }
}

fn load(name: &str) -> StudyConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    StudyConfig::parse(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn run(ledger: &mut Ledger, cache: &LayerCache, name: &str) -> (Option<StudyReport>, Duration) {
    let cfg = load(name);
    let t = Instant::now();
    let out = run_study_with(&cfg, cache);
    let dt = t.elapsed();
    eprintln!("  {name:<24} {:>8.1} s", dt.as_secs_f64());
    match out {
        Ok(r) => {
            for v in &r.verdicts {
                ledger.add(v.clone());
            }
            (Some(r), dt)
        }
        Err(e) => {
            let criterion = match cfg.study {
                hbl::config::StudyKind::Qo => "C1",
                hbl::config::StudyKind::Iterations => "C3",
                hbl::config::StudyKind::EtaSign => "C5",
                hbl::config::StudyKind::Norms => "C6",
                hbl::config::StudyKind::Probes => "C8",
                hbl::config::StudyKind::Dtn => "C9",
            };
            ledger.push(criterion, format!("{name} ran"), false, e.to_string());
            (None, dt)
        }
    }
}

fn main() {
    let strict = std::env::var("HBL_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut ledger = Ledger { checks: BTreeMap::new() };
    let start = Instant::now();

    eprintln!("acceptance: running studies");
    let cache = LayerCache::new();
    let (_, t_qo) = run(&mut ledger, &cache, "qo_circle.cfg");
    ledger.push("C1", "qo study within 10 min", t_qo <= BUDGET_C1, format!("{:.1} s", t_qo.as_secs_f64()));
    run(&mut ledger, &cache, "eta_sign_circle.cfg");
    let (_, t_it) = run(&mut ledger, &cache, "iterations_circle.cfg");
    ledger.push("C3", "iteration study within 30 min", t_it <= BUDGET_C3, format!("{:.1} s", t_it.as_secs_f64()));
    run(&mut ledger, &cache, "norms_circle.cfg");
    cache.clear();
    run(&mut ledger, &cache, "norms_segment.cfg");
    cache.clear();
    run(&mut ledger, &cache, "probes_segment.cfg");
    run(&mut ledger, &cache, "probes_parabola.cfg");
    run(&mut ledger, &cache, "dtn.cfg");

    let self_cache = LayerCache::new();
    let t = Instant::now();
    let suite = run_selftest(&self_cache);
    let dt = t.elapsed();
    eprintln!("  {:<24} {:>8.1} s", "selftest", dt.as_secs_f64());
    for c in &suite.checks {
        ledger.push("C10", format!("{}: {}", c.module, c.name), c.passed, c.detail.clone());
    }
    ledger.push("C10", "selftest within 5 min", dt <= BUDGET_C10, format!("{:.1} s", dt.as_secs_f64()));

    println!();
    let mut failed = 0;
    for c in CRITERIA {
        let checks = ledger.checks.get(c).map(Vec::as_slice).unwrap_or(&[]);
        let ok = !checks.is_empty() && checks.iter().all(|v| v.passed);
        let passing = checks.iter().filter(|v| v.passed).count();
        println!("{c:<4} {}  {passing}/{} checks", if ok { "PASS" } else { "FAIL" }, checks.len());
        for v in checks.iter().filter(|v| !v.passed) {
            println!("       failed: {}  [{}]", v.check, v.detail);
        }
        if !ok {
            failed += 1;
        }
    }
    println!("\n{} of {} criteria pass ({:.1} s)", CRITERIA.len() - failed, CRITERIA.len(), start.elapsed().as_secs_f64());
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
