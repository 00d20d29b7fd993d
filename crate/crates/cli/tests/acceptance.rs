//! All twelve acceptance criteria, one PASS/FAIL line each.

use std::process::Command;

use ssf_cli::suites::{run_suite, Suite};
use ssf_core::numerics::Numerics;

const SEED: u64 = 2024;

fn verify_bytes(suite: &str) -> Vec<u8> {
    let o = Command::new(env!("CARGO_BIN_EXE_ssf"))
        .args(["verify", "--suite", suite, "--seed", &SEED.to_string()])
        .env_remove("SSF_OUT_DIR")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    o.stdout
}

fn main() {
    let nm = Numerics::default();
    let reports: Vec<_> = [Suite::Lattice, Suite::Finite, Suite::Rank1].iter().map(|&s| run_suite(s, SEED, &nm)).collect();
    let mut failed = Vec::new();
    for n in 1..=12u32 {
        let mut passed = true;
        let mut name = "";
        let mut summary = Vec::new();
        let mut problems = Vec::new();
        for r in &reports {
            for c in r.checks.iter().filter(|c| c.criterion == n) {
                name = c.name;
                passed &= c.passed;
                problems.extend(c.failure_summary());
                for p in &c.parts {
                    summary.push(format!("{}/{} {}/{} worst {:.2e} <= {:.0e}", r.suite, p.name, p.samples - p.failures, p.samples, p.worst, p.threshold));
                }
            }
        }
        if summary.is_empty() {
            passed = false;
            problems.push("no check covers this criterion".into());
        }
        if n == 12 {
            let same = ["finite", "rank1"].iter().all(|s| verify_bytes(s) == verify_bytes(s));
            summary.push(format!("binary reruns identical: {same}"));
            passed &= same;
        }
        println!("criterion {n}: {} [{name}] {}", if passed { "PASS" } else { "FAIL" }, summary.join("; "));
        for line in problems {
            println!("    {line}");
        }
        if !passed {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        println!("failing criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("all 12 criteria passed");
}
