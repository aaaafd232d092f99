mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use garding_core::registry::{cells, lookup, KSel};
use garding_core::{
    minimize_lambda, run_check, sigma, sigma_excl, CheckResult, CurvatureVector, IndexSet, RunOptions, SearchConfig,
    Verdict,
};
use rand::Rng;
use rayon::prelude::*;

struct Line {
    ok: bool,
    detail: String,
}

fn cell_runs(ids: &[&str], ns: &[usize], samples: usize, seed: u64) -> Vec<CheckResult> {
    let mut jobs = Vec::new();
    for &id in ids {
        let c = lookup(id).unwrap();
        for &n in ns {
            for k in cells(c, n, KSel::Auto) {
                jobs.push((id, n, k));
            }
        }
    }
    jobs.par_iter()
        .map(|&(id, n, k)| {
            let o = RunOptions { samples: Some(samples), ..RunOptions::new(n, k, seed) };
            run_check(id, &o).unwrap_or_else(|e| panic!("{id} n={n} k={k:?}: {e}"))
        })
        .collect()
}

fn summarize(rs: &[CheckResult]) -> Line {
    let bad: Vec<String> = rs
        .iter()
        .filter(|r| r.verdict != Verdict::Pass)
        .map(|r| format!("{} n={} k={:?} slack={:e}", r.id, r.n, r.k, r.min_slack))
        .collect();
    let worst = rs.iter().map(|r| r.min_slack).fold(f64::INFINITY, f64::min);
    Line {
        ok: bad.is_empty(),
        detail: if bad.is_empty() {
            format!("{} cells, worst slack {worst:e}", rs.len())
        } else {
            format!("{} failing: {}", bad.len(), bad.join("; "))
        },
    }
}

fn oracle_agreement() -> Option<String> {
    let mut r = common::rng(2024);
    for n in 3..=9 {
        for _ in 0..1000 {
            let v = common::rand_vec(&mut r, n, 5.0);
            let x = CurvatureVector::new(v.clone()).unwrap();
            let i = r.gen_range(0..n);
            let set = IndexSet::new(&[i], n).unwrap();
            for m in 0..=n as i32 {
                let d = (sigma(m, &x) - common::sigma_enum(&v, m)).abs();
                if d > 1e-10 * (1.0 + common::magnitude(&v, m, &[])) {
                    return Some(format!("σ_{m} n={n} off by {d:e}"));
                }
                let d = (sigma_excl(m, &x, &set).unwrap() - common::sigma_enum_excl(&v, m, &[i])).abs();
                if d > 1e-10 * (1.0 + common::magnitude(&v, m, &[i])) {
                    return Some(format!("σ_{m}(κ|{i}) n={n} off by {d:e}"));
                }
            }
        }
    }
    None
}

fn c1() -> Line {
    let ids = [
        "L4_2_id1", "L4_2_id2", "L4_2_id3", "L4_2_id4", "L4_2_id5", "L5_1_identity", "L5_4_identity",
        "L5_5_identity", "fact_recursion", "fact_sum_excl", "fact_sum_weighted",
    ];
    let mut l = summarize(&cell_runs(&ids, &[3, 4, 5, 6, 7, 8, 9], 10_000, 1));
    if let Some(msg) = oracle_agreement() {
        l.ok = false;
        l.detail.push_str(&format!("; oracle: {msg}"));
    } else {
        l.detail.push_str("; subset oracle agrees");
    }
    l
}

fn c2() -> Line {
    let ids = [
        "newton", "maclaurin", "gen_newton", "L2_1_guan", "L2_2_theta", "L2_3_ratio", "L2_4a", "L2_4b",
        "L2_5_product", "L2_6_theta", "L5_8_sum", "L5_9_lower",
    ];
    summarize(&cell_runs(&ids, &[3, 4, 5, 6, 7, 8, 9], 10_000, 2))
}

fn c3() -> Line {
    let ids = ["L5_2_psd", "L5_3_psd", "L5_6_psd", "L5_7_psd", "D_gram", "A_psd", "B_psd", "L6_4_H"];
    summarize(&cell_runs(&ids, &[5, 6, 7, 8], 1000, 3))
}

/// (n, k, K, κ_1) for the headline cells.
fn headline_cells() -> Vec<(usize, usize, f64, f64)> {
    let mut v = Vec::new();
    for n in [5, 6, 7] {
        for k in [n - 2, n - 1] {
            for big_k in [1e2, 1e3] {
                for kappa1 in [1e3, 1e4, 1e5] {
                    v.push((n, k, big_k, kappa1));
                }
            }
        }
    }
    v
}

fn matrix_cells(id: &str, seed: u64) -> Vec<CheckResult> {
    headline_cells()
        .par_iter()
        .map(|&(n, k, big_k, kappa1)| {
            let o = RunOptions {
                samples: Some(10_000),
                kappa1: Some(kappa1),
                big_k: Some(big_k),
                ..RunOptions::new(n, Some(k), seed)
            };
            run_check(id, &o).unwrap_or_else(|e| panic!("{id} n={n} k={k}: {e}"))
        })
        .collect()
}

fn c4() -> Line {
    let mut l = summarize(&matrix_cells("C3_1_key", 4));
    let found: Vec<String> = headline_cells()
        .par_iter()
        .enumerate()
        .filter_map(|(j, &(n, k, big_k, kappa1))| {
            let i = j % (k - 1);
            let cfg = SearchConfig { restarts: 50, ..SearchConfig::new(n, k, i, kappa1, big_k, 4) };
            let rep = minimize_lambda(&cfg).unwrap_or_else(|e| panic!("search n={n} k={k}: {e}"));
            rep.best.robust.then(|| format!("n={n} k={k} i={i} K={big_k} κ1={kappa1}: {:e}", rep.best.relative))
        })
        .collect();
    if found.is_empty() {
        l.detail.push_str("; search: no robust negative witness");
    } else {
        l.ok = false;
        l.detail.push_str(&format!("; search found {}", found.join("; ")));
    }
    l
}

fn c5() -> (Line, String) {
    let l = summarize(&matrix_cells("L4_1_ex1", 5));
    let lit = matrix_cells("L4_1_ex1_literal", 5);
    let fails = lit.iter().filter(|r| r.verdict != Verdict::Pass).count();
    let worst = lit.iter().map(|r| r.min_slack).fold(f64::INFINITY, f64::min);
    (l, format!("unscaled variant (reported only): {fails}/{} cells fail, worst relative λ {worst:e}", lit.len()))
}

fn c6() -> Line {
    let ids = ["L3_2", "L3_4", "L6_1_ratio", "L6_2_bound", "L6_3_bound", "T6_1_s601", "T6_1_s602", "S7_case_key"];
    let mut jobs = Vec::new();
    for id in ids {
        for n in [5, 6] {
            jobs.push((id, n));
        }
    }
    let rs: Vec<CheckResult> = jobs
        .par_iter()
        .map(|&(id, n)| run_check(id, &RunOptions::new(n, Some(n - 2), 6)).unwrap_or_else(|e| panic!("{id}: {e}")))
        .collect();
    let bad: Vec<String> = rs
        .iter()
        .filter(|r| !matches!(r.verdict, Verdict::Threshold { .. }))
        .map(|r| format!("{} n={}", r.id, r.n))
        .collect();
    let stars: Vec<String> = rs
        .iter()
        .filter_map(|r| match r.verdict {
            Verdict::Threshold { kappa1 } => Some(format!("{}@{}={kappa1:e}", r.id, r.n)),
            _ => None,
        })
        .collect();
    Line {
        ok: bad.is_empty(),
        detail: if bad.is_empty() { format!("κ1*: {}", stars.join(" ")) } else { format!("no threshold: {}", bad.join(", ")) },
    }
}

fn c7() -> Line {
    // a manifest round trip: options and results through JSON, then rerun
    let mut runs = Vec::new();
    for (id, n, k) in [
        ("newton", 6, Some(4)),
        ("L4_2_id3", 5, Some(2)),
        ("L5_6_psd", 6, Some(3)),
        ("C3_1_key", 5, Some(3)),
        ("L3_4", 6, Some(4)),
        ("gen_newton_literal", 5, Some(2)),
    ] {
        let o = RunOptions { samples: Some(500), ..RunOptions::new(n, k, 42) };
        let r = run_check(id, &o).unwrap();
        runs.push((id, serde_json::to_string(&o).unwrap(), serde_json::to_string(&r).unwrap()));
    }
    let mut mismatches = Vec::new();
    for (id, o, r) in &runs {
        let o: RunOptions = serde_json::from_str(o).unwrap();
        let old: CheckResult = serde_json::from_str(r).unwrap();
        let new = run_check(id, &o).unwrap();
        if new.min_slack.to_bits() != old.min_slack.to_bits() || new != old {
            mismatches.push(id.to_string());
        }
    }
    Line {
        ok: mismatches.is_empty(),
        detail: if mismatches.is_empty() {
            format!("{} runs reproduced bit for bit", runs.len())
        } else {
            format!("mismatch: {}", mismatches.join(", "))
        },
    }
}

fn report(no: usize, name: &str, budget: Duration, f: impl FnOnce() -> Line) -> bool {
    let t = Instant::now();
    let l = f();
    let el = t.elapsed();
    let in_time = el <= budget;
    let ok = l.ok && in_time;
    println!(
        "criterion {no} {name}: {} ({}) [{:.1}s of {}s{}]",
        if ok { "PASS" } else { "FAIL" },
        l.detail,
        el.as_secs_f64(),
        budget.as_secs(),
        if in_time { "" } else { ", over budget" }
    );
    ok
}

fn main() -> ExitCode {
    let min = |m: u64| Duration::from_secs(60 * m);
    let mut all = true;
    all &= report(1, "identities", Duration::from_secs(60), c1);
    all &= report(2, "inequalities", min(2), c2);
    all &= report(3, "psd forms", min(2), c3);
    all &= report(4, "key form k=n-2,n-1", min(10), c4);
    let mut extra = String::new();
    all &= report(5, "reduction difference", min(10), || {
        let (l, e) = c5();
        extra = e;
        l
    });
    println!("  {extra}");
    all &= report(6, "asymptotic thresholds", min(10), c6);
    all &= report(7, "reproducibility", min(1), c7);
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
