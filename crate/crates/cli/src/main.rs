use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use garding_core::registry::{self, cells, k_schedule, CheckResult, KSel, RunOptions, Verdict, DEFAULT_PSD_EPS, DEFAULT_TOL};
use garding_core::search::{minimize_lambda, threshold_bisect, SearchConfig, ThresholdConfig};
use garding_core::Error;

const OK: u8 = 0;
const FAILED: u8 = 1;
const USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "garding", version, about = "Sampled checks for σ_k curvature-estimate algebra")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run registry checks and write one JSON line per result.
    Verify(VerifyArgs),
    /// Search for negative eigenvalues of the key form.
    Search(SearchArgs),
    /// Bisect the κ_1 scale at which an asymptotic check starts to pass.
    Threshold(ThresholdArgs),
    /// Re-run a manifest and compare every result bit for bit.
    Replay(ReplayArgs),
    /// Print the catalog.
    List,
}

/// Inclusive dimension range written `a..b`, or a single value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct Dims {
    lo: usize,
    hi: usize,
}

fn parse_dims(s: &str) -> Result<Dims, String> {
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("bad dimension '{t}': {e}"));
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (num(a)?, num(b.trim_start_matches('='))?),
        None => {
            let v = num(s)?;
            (v, v)
        }
    };
    if lo == 0 || lo > hi {
        return Err(format!("empty dimension range '{s}'"));
    }
    Ok(Dims { lo, hi })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
enum Level {
    Auto,
    At(usize),
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Level::Auto => f.write_str("auto"),
            Level::At(k) => write!(f, "{k}"),
        }
    }
}

fn parse_level(s: &str) -> Result<Level, String> {
    if s == "auto" {
        Ok(Level::Auto)
    } else {
        s.parse().map(Level::At).map_err(|e| format!("bad level '{s}': {e}"))
    }
}

fn parse_pos(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("'{s}' is not a positive number")),
    }
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected lo,hi but got '{s}'"))?;
    Ok((parse_pos(a.trim())?, parse_pos(b.trim())?))
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
struct VerifyArgs {
    #[arg(long, value_parser = parse_dims, default_value = "5..7")]
    n: Dims,
    #[arg(long, value_parser = parse_level, default_value = "auto")]
    k: Level,
    /// Per check, or per κ_1 grid point for asymptotic checks.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_parser = parse_pos)]
    kappa1: Option<f64>,
    #[arg(long = "K", value_parser = parse_pos)]
    big_k: Option<f64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Manifest path; defaults to `<out>.manifest.json` when --out is given.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Comma-separated check ids.
    #[arg(long, value_delimiter = ',')]
    only: Vec<String>,
    #[arg(long = "psd-eps", value_parser = parse_pos, default_value_t = DEFAULT_PSD_EPS)]
    psd_eps: f64,
    #[arg(long, value_parser = parse_pos, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(Args, Clone, Debug)]
struct SearchArgs {
    #[arg(long, value_parser = parse_dims)]
    n: Dims,
    /// `auto` is n-2.
    #[arg(long, value_parser = parse_level, default_value = "auto")]
    k: Level,
    /// Row of the key form; every admissible row when absent.
    #[arg(long)]
    i: Option<usize>,
    #[arg(long, value_parser = parse_pos, default_value_t = 1e4)]
    kappa1: f64,
    #[arg(long = "K", value_parser = parse_pos)]
    big_k: Option<f64>,
    #[arg(long = "sigma-range", value_parser = parse_range, default_value = "1,10")]
    sigma_range: (f64, f64),
    #[arg(long, default_value_t = 50)]
    restarts: usize,
    #[arg(long = "max-iters", default_value_t = 400)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "psd-eps", value_parser = parse_pos, default_value_t = DEFAULT_PSD_EPS)]
    psd_eps: f64,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug)]
struct ThresholdArgs {
    /// Check id.
    #[arg(long)]
    only: String,
    #[arg(long, value_parser = parse_dims)]
    n: Dims,
    #[arg(long, value_parser = parse_level, default_value = "auto")]
    k: Level,
    #[arg(long, value_parser = parse_pos, default_value_t = 1.0)]
    lo: f64,
    #[arg(long, value_parser = parse_pos, default_value_t = 1e6)]
    hi: f64,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 20)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "K", value_parser = parse_pos)]
    big_k: Option<f64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug)]
struct ReplayArgs {
    manifest: PathBuf,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct ManifestRun {
    id: String,
    options: RunOptions,
    result: CheckResult,
}

#[derive(Serialize, Deserialize)]
struct RunManifest {
    schema_version: u32,
    command: String,
    argv: Vec<String>,
    params: VerifyArgs,
    seed: u64,
    tool_version: String,
    started: String,
    finished: String,
    runs: Vec<ManifestRun>,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

fn set_jobs(jobs: Option<usize>) {
    if let Some(j) = jobs.filter(|&j| j > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
}

fn sink(out: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn line<T: Serialize>(w: &mut dyn Write, v: &T) -> io::Result<()> {
    serde_json::to_writer(&mut *w, v)?;
    w.write_all(b"\n")
}

fn err_code(e: &Error) -> u8 {
    eprintln!("error: {e}");
    USAGE
}

fn verify(a: VerifyArgs) -> io::Result<u8> {
    set_jobs(a.jobs);
    let started = now();
    let checks: Vec<_> = if a.only.is_empty() {
        registry::registry().iter().collect()
    } else {
        let mut v = Vec::new();
        for id in &a.only {
            match registry::lookup(id) {
                Ok(c) => v.push(c),
                Err(e) => return Ok(err_code(&e)),
            }
        }
        v
    };
    let ksel = match a.k {
        Level::Auto => KSel::Auto,
        Level::At(k) => KSel::Fixed(k),
    };
    let mut jobs = Vec::new();
    for n in a.n.lo..=a.n.hi {
        for c in &checks {
            for k in cells(c, n, ksel) {
                jobs.push((c.id, n, k));
            }
        }
    }
    if !a.only.is_empty() {
        for c in &checks {
            if !jobs.iter().any(|j| j.0 == c.id) {
                eprintln!("error: {} has no admissible cell for n in {}..={} with k={}", c.id, a.n.lo, a.n.hi, a.k);
                return Ok(USAGE);
            }
        }
    }

    let mut w = sink(&a.out)?;
    let mut runs = Vec::new();
    let mut code = OK;
    for (id, n, k) in jobs {
        let options = RunOptions {
            n,
            k,
            samples: a.samples,
            seed: a.seed,
            kappa1: a.kappa1,
            big_k: a.big_k,
            tol: a.tol,
            psd_eps: a.psd_eps,
        };
        match registry::run_check(id, &options) {
            Ok(r) => {
                let tag = if r.verdict.is_fail() { "FAIL" } else { "ok" };
                eprintln!("{tag:4} {id} n={n} k={} min_slack={:e} {}", show_k(k), r.min_slack, show_verdict(&r.verdict));
                if r.verdict.is_fail() && r.gated && code == OK {
                    code = FAILED;
                }
                line(&mut *w, &r)?;
                runs.push(ManifestRun { id: id.to_string(), options, result: r });
            }
            Err(e) => {
                eprintln!("error: {id} n={n} k={}: {e}", show_k(k));
                code = USAGE;
            }
        }
    }
    w.flush()?;

    let manifest_path = a.manifest.clone().or_else(|| a.out.as_ref().map(|p| manifest_next_to(p)));
    if let Some(p) = manifest_path {
        let m = RunManifest {
            schema_version: registry::SCHEMA_VERSION,
            command: "verify".into(),
            argv: std::env::args().collect(),
            seed: a.seed,
            params: a,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            started,
            finished: now(),
            runs,
        };
        serde_json::to_writer_pretty(BufWriter::new(File::create(&p)?), &m)?;
    }
    Ok(code)
}

fn manifest_next_to(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn replay(a: ReplayArgs) -> io::Result<u8> {
    set_jobs(a.jobs);
    let m: RunManifest = match File::open(&a.manifest).map(io::BufReader::new).map(serde_json::from_reader) {
        Ok(Ok(m)) => m,
        Ok(Err(e)) => {
            eprintln!("error: cannot parse {}: {e}", a.manifest.display());
            return Ok(USAGE);
        }
        Err(e) => {
            eprintln!("error: cannot open {}: {e}", a.manifest.display());
            return Ok(USAGE);
        }
    };
    let mut mismatches = 0;
    for run in &m.runs {
        match registry::run_check(&run.id, &run.options) {
            Ok(r) => {
                let same = r.min_slack.to_bits() == run.result.min_slack.to_bits() && r.verdict == run.result.verdict;
                if !same {
                    mismatches += 1;
                    eprintln!("MISMATCH {} n={} k={}: {:e} vs recorded {:e}", run.id, run.options.n, show_k(run.options.k), r.min_slack, run.result.min_slack);
                }
            }
            Err(e) => {
                mismatches += 1;
                eprintln!("MISMATCH {} n={}: {e}", run.id, run.options.n);
            }
        }
    }
    eprintln!("replayed {} results, {} mismatches", m.runs.len(), mismatches);
    Ok(if mismatches == 0 { OK } else { FAILED })
}

fn search(a: SearchArgs) -> io::Result<u8> {
    set_jobs(a.jobs);
    let mut w = sink(&a.out)?;
    for n in a.n.lo..=a.n.hi {
        let k = match a.k {
            Level::Auto if n >= 2 => n - 2,
            Level::Auto => return Ok(USAGE),
            Level::At(k) => k,
        };
        let rows: Vec<usize> = match a.i {
            Some(i) => vec![i],
            None => (0..k.saturating_sub(1)).collect(),
        };
        if rows.is_empty() {
            eprintln!("error: no admissible row for k={k}");
            return Ok(USAGE);
        }
        for i in rows {
            let mut cfg = SearchConfig::new(n, k, i, a.kappa1, a.big_k.unwrap_or_else(|| k_schedule(a.kappa1)), a.seed);
            cfg.sigma_k_range = a.sigma_range;
            cfg.restarts = a.restarts;
            cfg.max_iters = a.max_iters;
            cfg.psd_eps = a.psd_eps;
            match minimize_lambda(&cfg) {
                Ok(rep) => {
                    let robust = rep.ranked.iter().filter(|w| w.robust).count();
                    eprintln!("n={n} k={k} i={i} best relative λ_min={:e} robust negatives={robust}", rep.best.relative);
                    line(&mut *w, &rep)?;
                }
                Err(e) => return Ok(err_code(&e)),
            }
        }
    }
    w.flush()?;
    Ok(OK)
}

fn threshold(a: ThresholdArgs) -> io::Result<u8> {
    set_jobs(a.jobs);
    let check = match registry::lookup(&a.only) {
        Ok(c) => c,
        Err(e) => return Ok(err_code(&e)),
    };
    let mut w = sink(&a.out)?;
    for n in a.n.lo..=a.n.hi {
        let ksel = match a.k {
            Level::Auto => KSel::Auto,
            Level::At(k) => KSel::Fixed(k),
        };
        let Some(k) = cells(check, n, ksel).into_iter().next() else {
            eprintln!("error: {} has no admissible cell at n={n}", a.only);
            return Ok(USAGE);
        };
        let mut cfg = ThresholdConfig::new(&a.only, n, k, a.lo, a.hi, a.seed);
        cfg.samples = a.samples;
        cfg.big_k = a.big_k;
        cfg.steps = a.steps;
        match threshold_bisect(&cfg) {
            Ok(rep) => {
                eprintln!("{} n={n} k={} κ_1*={:e} {}", a.only, show_k(k), rep.kappa1_star, rep.flag.as_deref().unwrap_or(""));
                line(&mut *w, &rep)?;
            }
            Err(e) => return Ok(err_code(&e)),
        }
    }
    w.flush()?;
    Ok(OK)
}

fn list() -> io::Result<u8> {
    let mut w = sink(&None)?;
    for e in registry::registry_list() {
        line(&mut *w, &e)?;
    }
    w.flush()?;
    Ok(OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Verify(a) => verify(a),
        Cmd::Search(a) => search(a),
        Cmd::Threshold(a) => threshold(a),
        Cmd::Replay(a) => replay(a),
        Cmd::List => list(),
    };
    match res {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(USAGE)
        }
    }
}

fn show_k(k: Option<usize>) -> String {
    k.map_or_else(|| "-".to_string(), |k| k.to_string())
}

fn show_verdict(v: &Verdict) -> String {
    match v {
        Verdict::Pass => "PASS".into(),
        Verdict::Fail => "FAIL".into(),
        Verdict::Threshold { kappa1 } => format!("THRESHOLD from κ_1={kappa1:e}"),
    }
}
