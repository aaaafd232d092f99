//! Counterexample search on the key form and empirical κ_1 thresholds.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cones::{self, SampleSpec};
use crate::error::{Error, Result};
use crate::linalg::min_eig;
use crate::quadforms::key_matrix_with;
use crate::registry::{self, CheckResult, Kind, RunOptions, DEFAULT_PSD_EPS};
use crate::rng::{self, SampleRng};
use crate::symfun::{Compensated, CurvatureVector, Plain, MAX_DIM};

pub const RANKED: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub n: usize,
    pub k: usize,
    /// Row of the key form; must satisfy `i ≤ k - 2`.
    pub i: usize,
    pub big_k: f64,
    pub kappa1: f64,
    pub sigma_k_range: (f64, f64),
    pub restarts: usize,
    pub max_iters: usize,
    pub step_init: f64,
    pub seed: u64,
    pub psd_eps: f64,
}

impl SearchConfig {
    pub fn new(n: usize, k: usize, i: usize, kappa1: f64, big_k: f64, seed: u64) -> Self {
        SearchConfig {
            n,
            k,
            i,
            big_k,
            kappa1,
            sigma_k_range: (1.0, 10.0),
            restarts: 50,
            max_iters: 400,
            step_init: 0.5,
            seed,
            psd_eps: DEFAULT_PSD_EPS,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let (n, k) = (self.n, self.k);
        if n < 3 || n > MAX_DIM {
            return bad(format!("dimension {n} outside 3..={MAX_DIM}"));
        }
        if k < 2 || k > n || 2 * k <= n {
            return bad(format!("level k={k} needs 2 ≤ k ≤ n and 2k > n"));
        }
        if self.i + 2 > k {
            return bad(format!("row i={} needs i ≤ k-2", self.i));
        }
        if self.restarts == 0 || self.max_iters == 0 {
            return bad("restarts and iterations must be positive".into());
        }
        let (lo, hi) = self.sigma_k_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad(format!("σ_k range [{lo}, {hi}] is not a positive interval"));
        }
        for (name, v) in [("kappa1", self.kappa1), ("K", self.big_k), ("step", self.step_init), ("psd-eps", self.psd_eps)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        Ok(())
    }

    fn spec(&self) -> SampleSpec {
        SampleSpec {
            n: self.n,
            k: self.k,
            kappa1_target: self.kappa1,
            near_top_index: Some(self.i),
            sigma_k_range: Some(self.sigma_k_range),
            seed: self.seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub restart: usize,
    pub iteration: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchWitness {
    pub kappa: Vec<f64>,
    pub k: usize,
    pub i: usize,
    pub big_k: f64,
    pub c: f64,
    pub lambda_min: f64,
    pub frobenius: f64,
    /// `λ_min / ‖M‖_F`.
    pub relative: f64,
    pub eigvec: Vec<f64>,
    pub provenance: Provenance,
    /// Below `-psd_eps` in relative terms under both plain and compensated evaluation.
    pub robust: bool,
    pub compensated_relative: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub config: SearchConfig,
    pub best: SearchWitness,
    /// Best point of each restart, most negative first, at most ten.
    pub ranked: Vec<SearchWitness>,
    pub evaluations: usize,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Parameter layout for a restart with `l` entries at the top scale:
/// `l-1` top offsets, `n-l` raw tail entries, one `σ_k` level.
struct Layout<'a> {
    cfg: &'a SearchConfig,
    l: usize,
}

impl Layout<'_> {
    fn decode(&self, x: &[f64]) -> Option<Vec<f64>> {
        let SearchConfig { n, k, i, kappa1: t, sigma_k_range: (lo, hi), .. } = *self.cfg;
        let l = self.l;
        let mut top = Vec::with_capacity(l);
        top.push(t);
        for j in 1..l {
            let u = sigmoid(x[j - 1]);
            top.push(if j <= i { t - u * 0.999 * t.sqrt() / n as f64 } else { t * (n as f64).powf(-u) });
        }
        let tail = &x[l - 1..n - 1];
        let s = lo + (hi - lo) * sigmoid(x[n - 1]);
        let lam = cones::solve_scale(&top, tail, k, s)?;
        let mut v = top;
        v.extend(tail.iter().map(|u| lam * u));
        cones::sort_desc(&mut v);
        cones::accept(&self.cfg.spec(), &v).then_some(v)
    }

    fn start(&self, r: &mut SampleRng) -> Option<Vec<f64>> {
        let SearchConfig { n, k, .. } = *self.cfg;
        let mut x: Vec<f64> = (0..self.l - 1).map(|_| r.gen_range(-3.0..3.0)).collect();
        x.extend(cones::draw_tail(n - self.l, k - self.l, r)?);
        x.push(r.gen_range(-3.0..3.0));
        Some(x)
    }
}

fn objective(cfg: &SearchConfig, v: &[f64]) -> f64 {
    match key_matrix_with(&Plain, v, cfg.k, cfg.i, cfg.big_k).and_then(|m| min_eig(&m.matrix)) {
        Ok(e) if e.relative().is_finite() => e.relative(),
        _ => f64::INFINITY,
    }
}

struct Best {
    f: f64,
    kappa: Vec<f64>,
    iteration: usize,
    evals: usize,
}

/// Nelder–Mead with reflection 1, expansion 2, contraction and shrink 1/2.
fn nelder_mead(lay: &Layout, x0: Vec<f64>, best: &mut Best) {
    let cfg = lay.cfg;
    let d = x0.len();
    let eval = |x: &[f64], it: usize, best: &mut Best| -> f64 {
        best.evals += 1;
        match lay.decode(x) {
            Some(v) => {
                let f = objective(cfg, &v);
                if f < best.f {
                    *best = Best { f, kappa: v, iteration: it, evals: best.evals };
                }
                f
            }
            None => f64::INFINITY,
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    let f0 = eval(&x0, 0, best);
    simplex.push((x0.clone(), f0));
    for j in 0..d {
        let mut x = x0.clone();
        x[j] += cfg.step_init * x[j].abs().max(1.0);
        let f = eval(&x, 0, best);
        simplex.push((x, f));
    }
    for it in 1..=cfg.max_iters {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let x0 = &simplex[0].0;
        let diam = simplex[1..].iter().flat_map(|(x, _)| x.iter().zip(x0).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max);
        if diam < 1e-10 {
            break;
        }
        let mut cen = vec![0.0; d];
        for (x, _) in &simplex[..d] {
            for (c, xi) in cen.iter_mut().zip(x) {
                *c += xi / d as f64;
            }
        }
        let toward = |t: f64| -> Vec<f64> { cen.iter().zip(&simplex[d].0).map(|(c, w)| c + t * (w - c)).collect() };
        let xr = toward(-1.0);
        let fr = eval(&xr, it, best);
        if fr < simplex[0].1 {
            let xe = toward(-2.0);
            let fe = eval(&xe, it, best);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[d].1 {
                let x = toward(-0.5);
                let f = eval(&x, it, best);
                (x, f)
            } else {
                let x = toward(0.5);
                let f = eval(&x, it, best);
                (x, f)
            };
            if fc < fr.min(simplex[d].1) {
                simplex[d] = (xc, fc);
            } else {
                let x0 = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = x0.iter().zip(&v.0).map(|(a, b)| a + 0.5 * (b - a)).collect();
                    let f = eval(&x, it, best);
                    *v = (x, f);
                }
            }
        }
    }
}

fn restart(cfg: &SearchConfig, idx: usize) -> Result<Best> {
    let mut r = rng::stream(&[cfg.seed, rng::label_hash("search"), cfg.n as u64, cfg.k as u64, cfg.i as u64, idx as u64]);
    let mut best = Best { f: f64::INFINITY, kappa: vec![], iteration: 0, evals: 0 };
    for _ in 0..cones::MAX_ATTEMPTS {
        let l = r.gen_range(cfg.i + 1..=cfg.k - 1);
        let lay = Layout { cfg, l };
        let Some(x0) = lay.start(&mut r) else { continue };
        if lay.decode(&x0).is_none() {
            continue;
        }
        nelder_mead(&lay, x0, &mut best);
        return Ok(best);
    }
    Err(Error::SamplingExhausted { constraint: "a feasible starting simplex".into(), attempts: cones::MAX_ATTEMPTS })
}

fn witness(cfg: &SearchConfig, kappa: Vec<f64>, prov: Provenance) -> Result<SearchWitness> {
    if !cones::accept(&cfg.spec(), &kappa) {
        return Err(Error::Domain(format!("search point {kappa:?} left the feasible set")));
    }
    let m = key_matrix_with(&Plain, &kappa, cfg.k, cfg.i, cfg.big_k)?;
    let e = min_eig(&m.matrix)?;
    let mc = key_matrix_with(&Compensated, &kappa, cfg.k, cfg.i, cfg.big_k)?;
    let ec = min_eig(&mc.matrix)?;
    let c = crate::quadforms::c_const(&CurvatureVector::new(kappa.clone())?, cfg.k, cfg.i, cfg.big_k)?;
    Ok(SearchWitness {
        k: cfg.k,
        i: cfg.i,
        big_k: cfg.big_k,
        c,
        lambda_min: e.value,
        frobenius: e.frobenius,
        relative: e.relative(),
        robust: e.relative() < -cfg.psd_eps && ec.relative() < -cfg.psd_eps,
        compensated_relative: ec.relative(),
        eigvec: e.vector,
        provenance: prov,
        kappa,
    })
}

/// Minimizes the relative least eigenvalue of the key form over the constrained cone.
pub fn minimize_lambda(cfg: &SearchConfig) -> Result<SearchReport> {
    cfg.validate()?;
    let runs: Vec<Result<Best>> = (0..cfg.restarts).into_par_iter().map(|j| restart(cfg, j)).collect();
    let mut found = Vec::with_capacity(runs.len());
    let mut evaluations = 0;
    for (j, run) in runs.into_iter().enumerate() {
        let b = run?;
        evaluations += b.evals;
        if b.f.is_finite() {
            found.push((b.f, j, b));
        }
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let ranked = found
        .into_iter()
        .take(RANKED)
        .map(|(f, j, b)| {
            let w = witness(cfg, b.kappa, Provenance { seed: cfg.seed, restart: j, iteration: b.iteration })?;
            if w.relative != f {
                return Err(Error::Domain(format!("witness of restart {j} does not reproduce its eigenvalue")));
            }
            Ok(w)
        })
        .collect::<Result<Vec<_>>>()?;
    let best = ranked.first().cloned().ok_or_else(|| Error::SamplingExhausted {
        constraint: "a feasible point in any restart".into(),
        attempts: cfg.restarts,
    })?;
    Ok(SearchReport { config: cfg.clone(), best, ranked, evaluations })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub id: String,
    pub n: usize,
    pub k: Option<usize>,
    pub lo: f64,
    pub hi: f64,
    pub samples: usize,
    pub seed: u64,
    pub big_k: Option<f64>,
    pub steps: usize,
}

impl ThresholdConfig {
    pub fn new(id: &str, n: usize, k: Option<usize>, lo: f64, hi: f64, seed: u64) -> Self {
        ThresholdConfig { id: id.to_string(), n, k, lo, hi, samples: 1000, seed, big_k: None, steps: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    pub kappa1: f64,
    pub min_slack: Option<f64>,
    pub pass: bool,
    pub infeasible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub config: ThresholdConfig,
    pub kappa1_star: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
    /// Every scale evaluated, in evaluation order.
    pub profile: Vec<ProbePoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst: Option<CheckResult>,
}

fn probe(cfg: &ThresholdConfig, t: f64) -> Result<(ProbePoint, Option<CheckResult>)> {
    let mut o = RunOptions::new(cfg.n, cfg.k, cfg.seed);
    o.samples = Some(cfg.samples);
    o.kappa1 = Some(t);
    o.big_k = cfg.big_k;
    match registry::run_check(&cfg.id, &o) {
        Ok(r) => {
            let pass = !r.verdict.is_fail();
            Ok((ProbePoint { kappa1: t, min_slack: Some(r.min_slack), pass, infeasible: false }, Some(r)))
        }
        Err(Error::SamplingExhausted { .. }) => Ok((ProbePoint { kappa1: t, min_slack: None, pass: false, infeasible: true }, None)),
        Err(e) => Err(e),
    }
}

/// Log-scale bisection for the κ_1 at which an asymptotic check starts passing.
/// Monotonicity is not assumed; every probe is reported. Scales where no
/// sample meets the hypotheses count as not passing.
pub fn threshold_bisect(cfg: &ThresholdConfig) -> Result<ThresholdReport> {
    let check = registry::lookup(&cfg.id)?;
    if check.kind != Kind::Asymptotic {
        return Err(Error::Config(format!("{} has no κ_1 scale", cfg.id)));
    }
    if !(cfg.lo > 0.0 && cfg.lo < cfg.hi && cfg.hi.is_finite()) {
        return Err(Error::Config(format!("scale interval [{}, {}] is not increasing and positive", cfg.lo, cfg.hi)));
    }
    if cfg.samples == 0 {
        return Err(Error::Config("sample count must be positive".into()));
    }
    let mut profile = Vec::new();
    let (p_lo, _) = probe(cfg, cfg.lo)?;
    profile.push(p_lo.clone());
    if p_lo.pass {
        return Ok(ThresholdReport {
            config: cfg.clone(),
            kappa1_star: cfg.lo,
            flag: Some("no transition observed".into()),
            profile,
            worst: None,
        });
    }
    let (p_hi, r_hi) = probe(cfg, cfg.hi)?;
    profile.push(p_hi.clone());
    if !p_hi.pass {
        return Ok(ThresholdReport {
            config: cfg.clone(),
            kappa1_star: cfg.hi,
            flag: Some("no passing scale found".into()),
            profile,
            worst: r_hi,
        });
    }
    let (mut a, mut b) = (cfg.lo.ln(), cfg.hi.ln());
    for _ in 0..cfg.steps {
        let mid = 0.5 * (a + b);
        let (p, _) = probe(cfg, mid.exp())?;
        if p.pass {
            b = mid;
        } else {
            a = mid;
        }
        profile.push(p);
    }
    Ok(ThresholdReport { config: cfg.clone(), kappa1_star: b.exp(), flag: None, profile, worst: None })
}
