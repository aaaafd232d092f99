//! Gårding cones `Γ_k = {σ_1 > 0, …, σ_k > 0}` and samplers for them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};
use crate::rng::{self, SampleRng};
use crate::symfun::{coeffs, CurvatureVector, MAX_DIM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeVariant {
    Open,
    /// Closure: `σ_1..σ_{k-1} > 0` and `σ_k ≥ 0`.
    Barred,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeQuery {
    pub n: usize,
    pub k: usize,
    pub variant: ConeVariant,
}

/// Membership by the signs of the computed `σ_1..σ_k`.
pub fn in_gamma(q: &ConeQuery, kappa: &CurvatureVector) -> Result<bool> {
    if kappa.len() != q.n {
        return Err(invalid(format!("vector of length {} queried against dimension {}", kappa.len(), q.n)));
    }
    if q.k == 0 || q.k > q.n {
        return Err(invalid(format!("level k={} outside 1..={}", q.k, q.n)));
    }
    Ok(in_cone(kappa.as_slice(), q.k, q.variant))
}

pub fn in_cone(kappa: &[f64], k: usize, variant: ConeVariant) -> bool {
    let c = coeffs(kappa, &[]);
    if (1..k).any(|m| c.get(m as i32) <= 0.0) {
        return false;
    }
    match variant {
        ConeVariant::Open => c.get(k as i32) > 0.0,
        ConeVariant::Barred => c.get(k as i32) >= 0.0,
    }
}

/// `κ_k + … + κ_n` for a descending vector (`k` counted from one).
pub fn tail_sum_check(k: usize, kappa: &CurvatureVector) -> Result<f64> {
    if !kappa.is_sorted_desc() {
        return Err(invalid("vector is not sorted in descending order"));
    }
    if k == 0 || k > kappa.len() {
        return Err(invalid(format!("level k={k} outside 1..={}", kappa.len())));
    }
    Ok(kappa.as_slice()[k - 1..].iter().sum())
}

/// Rescales so that `σ_k` equals `target`.
pub fn normalize_sigma_k(kappa: &CurvatureVector, k: usize, target: f64) -> Result<CurvatureVector> {
    if k == 0 || k > kappa.len() {
        return Err(invalid(format!("level k={k} outside 1..={}", kappa.len())));
    }
    if !(target > 0.0 && target.is_finite()) {
        return Err(invalid(format!("target {target} must be positive")));
    }
    let s = coeffs(kappa.as_slice(), &[]).get(k as i32);
    if !(s > 0.0) {
        return Err(domain(format!("σ_{k} = {s} is not positive")));
    }
    Ok(kappa.scaled((target / s).powf(1.0 / k as f64)))
}

/// `κ_i > κ_1 − √κ_1/n` where `κ_1` is the largest entry.
pub fn near_top(kappa: &[f64], i: usize) -> bool {
    let top = kappa.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    top > 0.0 && kappa[i] > top - top.sqrt() / kappa.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub n: usize,
    pub k: usize,
    pub kappa1_target: f64,
    /// Position (from zero, in descending order) that must lie within `√κ_1/n` of the top.
    pub near_top_index: Option<usize>,
    pub sigma_k_range: Option<(f64, f64)>,
    pub seed: u64,
}

pub const MAX_ATTEMPTS: usize = 100_000;

/// Seeded draw from `Γ_k`; output sorted in descending order.
pub fn sample_gamma(spec: &SampleSpec) -> Result<CurvatureVector> {
    let mut r = rng::stream(&[spec.seed, rng::label_hash("sample_gamma")]);
    draw_gamma(spec, &mut r)
}

fn validate(spec: &SampleSpec) -> Result<()> {
    let SampleSpec { n, k, kappa1_target: t, .. } = *spec;
    if n == 0 || n > MAX_DIM {
        return Err(invalid(format!("dimension {n} outside 1..={MAX_DIM}")));
    }
    if k == 0 || k > n {
        return Err(invalid(format!("level k={k} outside 1..={n}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!("κ_1 target {t} must be positive")));
    }
    if let Some(i) = spec.near_top_index {
        if i >= n {
            return Err(invalid(format!("near-top index {i} out of range")));
        }
    }
    if let Some((lo, hi)) = spec.sigma_k_range {
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(invalid(format!("σ_k range [{lo}, {hi}] is not a positive interval")));
        }
    }
    Ok(())
}

/// Draw from `Γ_k` using the caller's stream.
pub fn draw_gamma(spec: &SampleSpec, r: &mut SampleRng) -> Result<CurvatureVector> {
    validate(spec)?;
    for _ in 0..MAX_ATTEMPTS {
        let cand = match spec.sigma_k_range {
            None => box_candidate(spec, r),
            Some(range) => {
                if r.gen_bool(0.9) {
                    scaled_tail_candidate(spec, range, r).or_else(|| solved_candidate(spec, range, r))
                } else {
                    solved_candidate(spec, range, r)
                }
            }
        };
        if let Some(v) = cand {
            if accept(spec, &v) {
                return CurvatureVector::new(v);
            }
        }
    }
    Err(Error::SamplingExhausted { constraint: describe(spec), attempts: MAX_ATTEMPTS })
}

/// Draw from the closure `Γ̄_k`; about half of the draws lie on `σ_k = 0`.
pub fn draw_gamma_bar(spec: &SampleSpec, r: &mut SampleRng) -> Result<CurvatureVector> {
    let base = SampleSpec { sigma_k_range: None, ..spec.clone() };
    validate(&base)?;
    for _ in 0..MAX_ATTEMPTS {
        let v = draw_gamma(&base, r)?.into_vec();
        if r.gen_bool(0.5) {
            return CurvatureVector::new(v);
        }
        if let Some(b) = to_boundary(v, spec.k) {
            if in_cone(&b, spec.k, ConeVariant::Barred) && spec.near_top_index.map_or(true, |i| near_top(&b, i)) {
                return CurvatureVector::new(b);
            }
        }
    }
    Err(Error::SamplingExhausted { constraint: describe(&base), attempts: MAX_ATTEMPTS })
}

fn describe(spec: &SampleSpec) -> String {
    let mut s = format!("κ ∈ Γ_{} in dimension {} with κ_1 ≈ {}", spec.k, spec.n, spec.kappa1_target);
    if let Some(i) = spec.near_top_index {
        s += &format!(", κ_{i} near the top");
    }
    if let Some((lo, hi)) = spec.sigma_k_range {
        s += &format!(", σ_k ∈ [{lo}, {hi}]");
    }
    s
}

pub(crate) fn sort_desc(v: &mut [f64]) {
    v.sort_by(|a, b| b.total_cmp(a));
}

pub(crate) fn accept(spec: &SampleSpec, v: &[f64]) -> bool {
    if v.iter().any(|x| !x.is_finite()) {
        return false;
    }
    let top = v[0];
    if (top - spec.kappa1_target).abs() > 0.01 * spec.kappa1_target {
        return false;
    }
    if !in_cone(v, spec.k, ConeVariant::Open) {
        return false;
    }
    if let Some(i) = spec.near_top_index {
        if !near_top(v, i) {
            return false;
        }
    }
    if let Some((lo, hi)) = spec.sigma_k_range {
        let s = coeffs(v, &[]).get(spec.k as i32);
        if !(s >= lo && s <= hi) {
            return false;
        }
    }
    true
}

pub(crate) fn log_uniform(r: &mut SampleRng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + r.gen::<f64>() * (hi / lo).ln()).exp()
}

pub(crate) fn band_value(r: &mut SampleRng, top: f64, n: usize) -> f64 {
    if r.gen_bool(0.2) {
        top
    } else {
        top - 0.999 * r.gen::<f64>() * top.sqrt() / n as f64
    }
}

/// Top block log-uniform near the target scale, tail uniform down to the
/// most negative value the cone allows, optionally pushed towards `σ_k = 0`.
fn box_candidate(spec: &SampleSpec, r: &mut SampleRng) -> Option<Vec<f64>> {
    let (n, k, t) = (spec.n, spec.k, spec.kappa1_target);
    let top = t * (0.995 + 0.01 * r.gen::<f64>());
    let floor = (n - k) as f64 * t / k as f64 * 0.95;
    let p_neg = 0.6 * r.gen::<f64>();
    let mut v = Vec::with_capacity(n);
    v.push(top);
    let band = spec.near_top_index.unwrap_or(0);
    for j in 1..n {
        let x = if j <= band {
            band_value(r, top, n)
        } else if j < k {
            log_uniform(r, top / n as f64, top)
        } else if r.gen_bool(p_neg) {
            -floor * r.gen::<f64>().powi(2)
        } else {
            top * 10f64.powf(-3.0 * r.gen::<f64>())
        };
        v.push(x);
    }
    sort_desc(&mut v);
    if r.gen_bool(1.0 / 3.0) && in_cone(&v, k, ConeVariant::Open) {
        let shrink = 10f64.powf(-8.0 * r.gen::<f64>());
        v = solve_last(v, k, shrink)?;
    }
    Some(v)
}

/// Moves the smallest entry so that `σ_k` becomes `shrink · σ_k`.
fn solve_last(mut v: Vec<f64>, k: usize, shrink: f64) -> Option<Vec<f64>> {
    let n = v.len();
    let c = coeffs(&v, &[n - 1]);
    let (rest_k, rest_k1) = (c.get(k as i32), c.get(k as i32 - 1));
    if !(rest_k1 > 0.0) {
        return None;
    }
    let cur = v[n - 1] * rest_k1 + rest_k;
    v[n - 1] -= (1.0 - shrink) * cur / rest_k1;
    sort_desc(&mut v);
    Some(v)
}

fn to_boundary(mut v: Vec<f64>, k: usize) -> Option<Vec<f64>> {
    let n = v.len();
    let c = coeffs(&v, &[n - 1]);
    let (rest_k, rest_k1) = (c.get(k as i32), c.get(k as i32 - 1));
    if !(rest_k1 > 0.0) {
        return None;
    }
    v[n - 1] = -rest_k / rest_k1;
    for _ in 0..1000 {
        if coeffs(&v, &[]).get(k as i32) >= 0.0 {
            sort_desc(&mut v);
            return Some(v);
        }
        v[n - 1] = v[n - 1].next_up();
    }
    None
}

/// Draws all entries at scale, then solves the smallest for `σ_k = s`.
fn solved_candidate(spec: &SampleSpec, (lo, hi): (f64, f64), r: &mut SampleRng) -> Option<Vec<f64>> {
    let base = SampleSpec { sigma_k_range: None, ..spec.clone() };
    let v = box_candidate(&base, r)?;
    let n = v.len();
    let c = coeffs(&v, &[n - 1]);
    let (rest_k, rest_k1) = (c.get(spec.k as i32), c.get(spec.k as i32 - 1));
    if !(rest_k1 > 0.0) {
        return None;
    }
    let s = lo + (hi - lo) * r.gen::<f64>();
    let mut w = v;
    w[n - 1] = (s - rest_k) / rest_k1;
    sort_desc(&mut w);
    Some(w)
}

/// `L` large entries near the target and a tail `λu` with `u ∈ Γ_{k-L}`,
/// where `λ` is the smallest positive root of `σ_k(top, λu) = s`.
fn scaled_tail_candidate(spec: &SampleSpec, (lo, hi): (f64, f64), r: &mut SampleRng) -> Option<Vec<f64>> {
    let (n, k, t) = (spec.n, spec.k, spec.kappa1_target);
    let l_min = spec.near_top_index.map_or(1, |i| i + 1);
    if k < 2 || l_min > k - 1 {
        return None;
    }
    let l = r.gen_range(l_min..=k - 1);
    let top_val = t * (0.995 + 0.01 * r.gen::<f64>());
    let mut top = vec![top_val];
    for j in 1..l {
        top.push(if j < l_min { band_value(r, top_val, n) } else { log_uniform(r, top_val / n as f64, top_val) });
    }
    let tail = draw_tail(n - l, k - l, r)?;
    let s = lo + (hi - lo) * (1e-9 + (1.0 - 2e-9) * r.gen::<f64>());
    let lam = solve_scale(&top, &tail, k, s)?;
    let mut v = top;
    v.extend(tail.iter().map(|u| lam * u));
    sort_desc(&mut v);
    Some(v)
}

pub(crate) fn draw_tail(dim: usize, level: usize, r: &mut SampleRng) -> Option<Vec<f64>> {
    for _ in 0..200 {
        let p_neg = 0.5 * r.gen::<f64>();
        let spread = 6.0 * r.gen::<f64>();
        let u: Vec<f64> = (0..dim)
            .map(|_| {
                let mag = 10f64.powf(-spread * r.gen::<f64>());
                if r.gen_bool(p_neg) {
                    -mag
                } else {
                    mag
                }
            })
            .collect();
        if in_cone(&u, level, ConeVariant::Open) {
            return Some(u);
        }
    }
    None
}

/// Smallest `λ > 0` with `Σ_m σ_{k-m}(top) σ_m(u) λ^m = s`.
pub(crate) fn solve_scale(top: &[f64], tail: &[f64], k: usize, s: f64) -> Option<f64> {
    let ct = coeffs(top, &[]);
    let cu = coeffs(tail, &[]);
    let poly: Vec<f64> = (0..=k as i32).map(|m| ct.get(k as i32 - m) * cu.get(m)).collect();
    let lead = poly.iter().position(|&c| c != 0.0)?;
    if !(poly[lead] > 0.0) || lead == 0 {
        return None;
    }
    let p = |x: f64| poly.iter().rev().fold(0.0, |acc, c| acc * x + c);
    let start = (s / poly[lead]).powf(1.0 / lead as f64) / 8.0;
    if !(start > 0.0 && start.is_finite()) {
        return None;
    }
    let mut a = 0.0;
    let mut b = start;
    let mut found = false;
    for _ in 0..400 {
        if p(b) >= s {
            found = true;
            break;
        }
        a = b;
        b *= 1.25;
        if !b.is_finite() {
            return None;
        }
    }
    if !found {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if p(mid) >= s {
            b = mid;
        } else {
            a = mid;
        }
    }
    Some(b)
}
