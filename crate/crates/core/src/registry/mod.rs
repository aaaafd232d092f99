//! Catalog of sampled checks and the machinery that runs them.

mod checks;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::HashMap;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::rng::{self, SampleRng};

pub use checks::k_schedule;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_PSD_EPS: f64 = 1e-8;
/// κ_1 grid for asymptotic checks.
pub const KAPPA1_GRID: [f64; 6] = [1e1, 1e2, 1e3, 1e4, 1e5, 1e6];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Kind {
    Identity,
    Inequality,
    Psd,
    Asymptotic,
}

/// Which tolerance a check's slack is compared against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TolKind {
    Scalar,
    Matrix,
}

/// Admissible levels for a check in dimension `n`.
#[derive(Clone, Copy, Debug)]
pub enum LevelRule {
    /// No level parameter.
    None,
    /// Fixed at `n - 2`.
    Fixed,
    /// Every level in the range is a cell under `--k auto`.
    All(fn(usize) -> (usize, usize)),
    /// `--k auto` selects `n - 2` if admissible.
    Headline(fn(usize) -> (usize, usize)),
}

#[derive(Clone, Debug, Serialize)]
pub struct Anchor {
    pub citation: String,
    pub quote: String,
}

fn anchors() -> &'static HashMap<String, (String, String)> {
    static A: OnceLock<HashMap<String, (String, String)>> = OnceLock::new();
    A.get_or_init(|| serde_json::from_str(include_str!("anchors.json")).expect("anchor table parses"))
}

/// Source reference for a check; empty when none is recorded.
pub fn anchor(id: &str) -> Anchor {
    let (citation, quote) = anchors().get(id).cloned().unwrap_or_default();
    Anchor { citation, quote }
}

/// Per-sample evaluation context.
#[derive(Clone, Copy, Debug)]
pub struct Ctx {
    pub n: usize,
    /// Zero when the check has no level.
    pub k: usize,
    pub kappa1: f64,
    pub big_k: f64,
}

/// Outcome of one sample: slack, the sampled vector and anything else needed
/// to read the witness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eval {
    pub slack: f64,
    pub kappa: Vec<f64>,
    pub aux: Value,
}

pub type EvalFn = fn(&Ctx, &mut SampleRng) -> Result<Eval>;

#[derive(Clone, Copy)]
pub struct LemmaCheck {
    pub id: &'static str,
    pub kind: Kind,
    pub tol_kind: TolKind,
    pub min_n: usize,
    pub levels: LevelRule,
    /// Whether a FAIL counts towards the exit status.
    pub gated: bool,
    pub default_samples: usize,
    pub eval: EvalFn,
}

impl std::fmt::Debug for LemmaCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LemmaCheck").field("id", &self.id).field("kind", &self.kind).finish()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub kind: Kind,
    pub anchor: Anchor,
}

pub fn registry() -> &'static [LemmaCheck] {
    checks::CATALOG
}

pub fn registry_list() -> Vec<CatalogEntry> {
    registry().iter().map(|c| CatalogEntry { id: c.id, kind: c.kind, anchor: anchor(c.id) }).collect()
}

pub fn lookup(id: &str) -> Result<&'static LemmaCheck> {
    registry().iter().find(|c| c.id == id).ok_or_else(|| Error::UnknownCheck(id.to_string()))
}

/// Level selection from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KSel {
    Auto,
    Fixed(usize),
}

/// Levels to run for `check` in dimension `n`; `None` in the list means the
/// check has no level. Empty when the check does not apply.
pub fn cells(check: &LemmaCheck, n: usize, ksel: KSel) -> Vec<Option<usize>> {
    if n < check.min_n {
        return vec![];
    }
    let within = |(lo, hi): (usize, usize), k: usize| lo <= k && k <= hi;
    match (check.levels, ksel) {
        (LevelRule::None, _) => vec![None],
        (LevelRule::Fixed, KSel::Auto) => vec![Some(n - 2)],
        (LevelRule::Fixed, KSel::Fixed(k)) => {
            if k == n - 2 {
                vec![Some(k)]
            } else {
                vec![]
            }
        }
        (LevelRule::All(f), KSel::Auto) => {
            let (lo, hi) = f(n);
            (lo..=hi).map(Some).collect()
        }
        (LevelRule::Headline(f), KSel::Auto) => {
            if n >= 2 && within(f(n), n - 2) {
                vec![Some(n - 2)]
            } else {
                vec![]
            }
        }
        (LevelRule::All(f) | LevelRule::Headline(f), KSel::Fixed(k)) => {
            if within(f(n), k) {
                vec![Some(k)]
            } else {
                vec![]
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub n: usize,
    pub k: Option<usize>,
    /// Per grid point for asymptotic checks; the check's default when absent.
    pub samples: Option<usize>,
    pub seed: u64,
    /// Replaces the κ_1 grid by a single value.
    pub kappa1: Option<f64>,
    /// Replaces the K schedule.
    pub big_k: Option<f64>,
    pub tol: f64,
    pub psd_eps: f64,
}

impl RunOptions {
    pub fn new(n: usize, k: Option<usize>, seed: u64) -> Self {
        RunOptions { n, k, samples: None, seed, kappa1: None, big_k: None, tol: DEFAULT_TOL, psd_eps: DEFAULT_PSD_EPS }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    Threshold { kappa1: f64 },
}

impl Verdict {
    pub fn is_fail(&self) -> bool {
        matches!(self, Verdict::Fail)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub kappa: Vec<f64>,
    pub aux: Value,
    pub seed: u64,
    pub grid_index: usize,
    pub sample_index: usize,
    pub kappa1: Option<f64>,
    pub big_k: Option<f64>,
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub kappa1: f64,
    pub big_k: f64,
    pub samples: usize,
    pub min_slack: Option<f64>,
    pub pass: bool,
    /// No hypothesis-satisfying sample could be drawn at this scale.
    pub infeasible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub schema_version: u32,
    pub id: String,
    pub kind: Kind,
    pub gated: bool,
    pub n: usize,
    pub k: Option<usize>,
    pub samples: usize,
    pub min_slack: f64,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub seed: u64,
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub profile: Vec<GridPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn sample_rng(seed: u64, id: &str, n: usize, k: usize, grid: usize, idx: usize) -> SampleRng {
    rng::stream(&[seed, rng::label_hash(id), n as u64, k as u64, grid as u64, idx as u64])
}

fn ord_key(s: f64) -> f64 {
    if s.is_nan() {
        f64::NEG_INFINITY
    } else {
        s
    }
}

/// Minimum slack over `count` samples with its index; ties go to the lower index
/// and errors to the lowest failing index.
fn min_over(check: &LemmaCheck, ctx: &Ctx, seed: u64, grid: usize, count: usize) -> Result<(f64, usize)> {
    let out = (0..count)
        .into_par_iter()
        .map(|idx| {
            let mut r = sample_rng(seed, check.id, ctx.n, ctx.k, grid, idx);
            (idx, (check.eval)(ctx, &mut r).map(|e| e.slack))
        })
        .reduce_with(|a, b| match (&a.1, &b.1) {
            (Err(_), Err(_)) => {
                if a.0 <= b.0 {
                    a
                } else {
                    b
                }
            }
            (Err(_), Ok(_)) => a,
            (Ok(_), Err(_)) => b,
            (Ok(x), Ok(y)) => {
                let (x, y) = (ord_key(*x), ord_key(*y));
                if x < y || (x == y && a.0 <= b.0) {
                    a
                } else {
                    b
                }
            }
        });
    match out {
        None => Err(Error::Config("sample count must be positive".into())),
        Some((idx, r)) => r.map(|s| (s, idx)),
    }
}

fn threshold(check: &LemmaCheck, opts: &RunOptions) -> f64 {
    match check.tol_kind {
        TolKind::Scalar => opts.tol,
        TolKind::Matrix => opts.psd_eps,
    }
}

fn validate(check: &LemmaCheck, opts: &RunOptions) -> Result<usize> {
    if opts.n < check.min_n || opts.n > crate::symfun::MAX_DIM {
        return Err(Error::Config(format!("{} needs dimension in {}..={}", check.id, check.min_n, crate::symfun::MAX_DIM)));
    }
    let admissible = cells(check, opts.n, opts.k.map_or(KSel::Auto, KSel::Fixed));
    let k = match (opts.k, check.levels) {
        (_, LevelRule::None) => 0,
        (None, LevelRule::Fixed) => opts.n - 2,
        (None, _) => return Err(Error::Config(format!("{} needs a level k", check.id))),
        (Some(k), _) => {
            if !admissible.contains(&Some(k)) {
                return Err(Error::Config(format!("level k={k} is not admissible for {} at n={}", check.id, opts.n)));
            }
            k
        }
    };
    if opts.samples == Some(0) {
        return Err(Error::Config("sample count must be positive".into()));
    }
    for (name, v) in [("tol", Some(opts.tol)), ("psd-eps", Some(opts.psd_eps)), ("kappa1", opts.kappa1), ("K", opts.big_k)] {
        if let Some(v) = v {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
    }
    Ok(k)
}

/// Runs one check on one `(n, k)` cell.
pub fn run_check(id: &str, opts: &RunOptions) -> Result<CheckResult> {
    let check = lookup(id)?;
    let k = validate(check, opts)?;
    let tol = threshold(check, opts);
    let samples = opts.samples.unwrap_or(check.default_samples);
    let reported_k = if matches!(check.levels, LevelRule::None) { None } else { Some(k) };

    let grid: Vec<f64> = match (check.kind, opts.kappa1) {
        (_, Some(t)) => vec![t],
        (Kind::Asymptotic, None) => KAPPA1_GRID.to_vec(),
        (_, None) => vec![checks::DESK_SCALE],
    };
    let sweep = grid.len() > 1;

    let mut profile = Vec::new();
    let mut worst: Option<(f64, usize, usize, Ctx)> = None;
    let mut total = 0;
    for (g, &kappa1) in grid.iter().enumerate() {
        let big_k = opts.big_k.unwrap_or_else(|| k_schedule(kappa1));
        let ctx = Ctx { n: opts.n, k, kappa1, big_k };
        // A sweep tolerates scales where the hypotheses cannot be met.
        if sweep {
            let mut r = sample_rng(opts.seed, check.id, ctx.n, ctx.k, g, 0);
            if let Err(Error::SamplingExhausted { .. }) = (check.eval)(&ctx, &mut r) {
                profile.push(GridPoint { kappa1, big_k, samples: 0, min_slack: None, pass: true, infeasible: true });
                continue;
            }
        }
        let (s, idx) = min_over(check, &ctx, opts.seed, g, samples)?;
        total += samples;
        profile.push(GridPoint { kappa1, big_k, samples, min_slack: Some(s), pass: ord_key(s) >= -tol, infeasible: false });
        if worst.map_or(true, |(w, ..)| ord_key(s) < ord_key(w)) {
            worst = Some((s, g, idx, ctx));
        }
    }

    let Some((min_slack, g, idx, ctx)) = worst else {
        return Err(Error::SamplingExhausted {
            constraint: format!("hypotheses of {} at every tested scale", check.id),
            attempts: crate::cones::MAX_ATTEMPTS,
        });
    };
    let mut r = sample_rng(opts.seed, check.id, ctx.n, ctx.k, g, idx);
    let e = (check.eval)(&ctx, &mut r)?;
    let asym = check.kind == Kind::Asymptotic || opts.kappa1.is_some();
    let witness = Witness {
        kappa: e.kappa,
        aux: e.aux,
        seed: opts.seed,
        grid_index: g,
        sample_index: idx,
        kappa1: asym.then_some(ctx.kappa1),
        big_k: asym.then_some(ctx.big_k),
        slack: e.slack,
    };

    let verdict = if sweep {
        let top_ok = profile.last().map_or(false, |p| p.pass);
        if !top_ok {
            Verdict::Fail
        } else {
            let from = profile.iter().rposition(|p| !p.pass).map_or(0, |j| j + 1);
            Verdict::Threshold { kappa1: profile[from].kappa1 }
        }
    } else if ord_key(min_slack) >= -tol {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let note = profile.iter().any(|p| p.infeasible).then(|| "some scales admit no sample satisfying the hypotheses".to_string());

    Ok(CheckResult {
        schema_version: SCHEMA_VERSION,
        id: check.id.to_string(),
        kind: check.kind,
        gated: check.gated,
        n: opts.n,
        k: reported_k,
        samples: total,
        min_slack,
        verdict,
        witness: Some(witness),
        seed: opts.seed,
        tol,
        profile: if sweep { profile } else { vec![] },
        note,
    })
}

/// Re-evaluates the sample a witness was taken from.
pub fn replay(id: &str, n: usize, k: Option<usize>, w: &Witness) -> Result<Eval> {
    let check = lookup(id)?;
    let kappa1 = w.kappa1.unwrap_or(checks::DESK_SCALE);
    let ctx = Ctx { n, k: k.unwrap_or(0), kappa1, big_k: w.big_k.unwrap_or_else(|| k_schedule(kappa1)) };
    let mut r = sample_rng(w.seed, check.id, n, ctx.k, w.grid_index, w.sample_index);
    (check.eval)(&ctx, &mut r)
}
