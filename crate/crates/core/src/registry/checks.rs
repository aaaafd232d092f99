use rand::Rng;
use serde_json::{json, Value};

use super::{ord_key, Ctx, Eval, Kind, LemmaCheck, LevelRule, TolKind};
use crate::cases::{classify_case, Case, CaseLabel};
use crate::cones::{draw_gamma, draw_gamma_bar, log_uniform, SampleSpec};
use crate::error::{Error, Result};
use crate::linalg::{min_eig, SymMatrix};
use crate::quadforms::{
    abcd_with, c_const, exp_divided_difference, h_lower_bound, h_matrix, key_matrix_with, lhs_minus_rhs_with,
    testfn_terms,
};
use crate::rng::SampleRng;
use crate::symfun::{binomial, coeffs, CurvatureVector, Plain};

/// Nominal κ_1 recorded for checks that draw their own scale.
pub const DESK_SCALE: f64 = 1.0;
const HYP_ATTEMPTS: usize = 2000;
/// `σ_k` window for checks that need two-sided bounds.
const SIGMA_RANGE: (f64, f64) = (1.0, 10.0);

/// K used together with a given κ_1 unless overridden.
pub fn k_schedule(kappa1: f64) -> f64 {
    if kappa1 < 1e2 {
        1e1
    } else if kappa1 < 1e3 {
        1e2
    } else if kappa1 < 1e4 {
        1e3
    } else {
        1e4
    }
}

// ---------------------------------------------------------------- helpers

fn s(v: &[f64], m: i32, excl: &[usize]) -> f64 {
    coeffs(v, excl).get(m)
}

fn abs(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.abs()).collect()
}

fn rel(l: f64, r: f64) -> f64 {
    let d = l.abs() + r.abs();
    if d == 0.0 {
        0.0
    } else {
        (l - r) / d
    }
}

fn scaled(l: f64, r: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        0.0
    } else {
        (l - r) / scale
    }
}

/// `−|Σl − Σr| / (1 + Σ|terms at |κ||)`.
fn identity(v: &[f64], f: impl Fn(&[f64]) -> (Vec<f64>, Vec<f64>)) -> (f64, f64, f64) {
    let (l, r) = f(v);
    let (la, ra) = f(&abs(v));
    let mag: f64 = la.iter().chain(&ra).map(|x| x.abs()).sum();
    let (l, r): (f64, f64) = (l.iter().sum(), r.iter().sum());
    (-(l - r).abs() / (1.0 + mag), l, r)
}

struct Worst {
    slack: f64,
    aux: Value,
}

impl Worst {
    fn new() -> Self {
        Worst { slack: f64::INFINITY, aux: Value::Null }
    }

    fn add(&mut self, slack: f64, aux: impl FnOnce() -> Value) {
        if ord_key(slack) < ord_key(self.slack) {
            self.slack = slack;
            self.aux = aux();
        }
    }

    fn eval(self, kappa: Vec<f64>) -> Eval {
        let slack = if self.slack == f64::INFINITY { 0.0 } else { self.slack };
        Eval { slack, kappa, aux: self.aux }
    }
}

fn retry<T>(what: &str, r: &mut SampleRng, mut f: impl FnMut(&mut SampleRng) -> Result<Option<T>>) -> Result<T> {
    for _ in 0..HYP_ATTEMPTS {
        if let Some(t) = f(r)? {
            return Ok(t);
        }
    }
    Err(Error::SamplingExhausted { constraint: what.to_string(), attempts: HYP_ATTEMPTS })
}

fn spec(n: usize, k: usize, t: f64, near: Option<usize>, range: Option<(f64, f64)>) -> SampleSpec {
    SampleSpec { n, k, kappa1_target: t, near_top_index: near, sigma_k_range: range, seed: 0 }
}

fn desk_cone(r: &mut SampleRng, n: usize, k: usize) -> Result<Vec<f64>> {
    let t = log_uniform(r, 0.1, 10.0);
    Ok(draw_gamma(&spec(n, k, t, None, None), r)?.into_vec())
}

fn desk_bar(r: &mut SampleRng, n: usize, k: usize) -> Result<Vec<f64>> {
    let t = log_uniform(r, 0.1, 10.0);
    Ok(draw_gamma_bar(&spec(n, k, t, None, None), r)?.into_vec())
}

/// Signed entries over two decades, with occasional ties and zeros.
fn free_vec(r: &mut SampleRng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            let m = 10f64.powf(r.gen_range(-1.0..1.0));
            if r.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    if n > 1 && r.gen_bool(0.3) {
        let (a, b) = (r.gen_range(0..n), r.gen_range(0..n));
        v[a] = v[b];
    }
    if r.gen_bool(0.1) {
        let a = r.gen_range(0..n);
        v[a] = 0.0;
    }
    v
}

fn unit_box(r: &mut SampleRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()
}

fn distinct(r: &mut SampleRng, n: usize, count: usize) -> Vec<usize> {
    rand::seq::index::sample(r, n, count).into_vec()
}

fn insert_at(bar: &[f64], i: usize, x: f64) -> Vec<f64> {
    let mut v = bar.to_vec();
    v.insert(i, x);
    v
}

/// Relative least eigenvalue and its eigenvector.
fn psd(m: &SymMatrix) -> Result<(f64, Vec<f64>)> {
    let e = min_eig(m)?;
    Ok((e.relative(), e.vector))
}

fn psd_eval(m: &SymMatrix, kappa: Vec<f64>, mut aux: Value) -> Result<Eval> {
    let (slack, vec) = psd(m)?;
    aux["eigvec"] = json!(vec);
    Ok(Eval { slack, kappa, aux })
}

/// Near-top draw under two-sided `σ_k` bounds, with `i` drawn in `0..=k-2`.
fn conj_draw(c: &Ctx, r: &mut SampleRng, k: usize) -> Result<(Vec<f64>, usize)> {
    let i = if k >= 2 { r.gen_range(0..=k - 2) } else { 0 };
    let v = draw_gamma(&spec(c.n, k, c.kappa1, Some(i), Some(SIGMA_RANGE)), r)?.into_vec();
    Ok((v, i))
}

/// As [`conj_draw`] but also requiring `c_{k,K} > 0`.
fn conj_draw_k(c: &Ctx, r: &mut SampleRng, k: usize) -> Result<(Vec<f64>, usize, f64)> {
    retry("K κ_i σ_(k-1)(κ|i) > 1", r, |r| {
        let (v, i) = conj_draw(c, r, k)?;
        let cv = CurvatureVector::new(v.clone())?;
        match c_const(&cv, k, i, c.big_k) {
            Ok(cc) => Ok(Some((v, i, cc))),
            Err(Error::Domain(_)) => Ok(None),
            Err(e) => Err(e),
        }
    })
}

fn label(v: &[f64], i: usize) -> Result<CaseLabel> {
    classify_case(&CurvatureVector::new(v.to_vec())?, i)
}

/// Near-top draw at level `n-2` whose case label satisfies `want`.
fn case_draw(c: &Ctx, r: &mut SampleRng, what: &str, want: fn(&CaseLabel) -> bool) -> Result<(Vec<f64>, usize, f64, CaseLabel)> {
    retry(what, r, |r| {
        let (v, i, cc) = conj_draw_k(c, r, c.n - 2)?;
        let l = label(&v, i)?;
        Ok(want(&l).then_some((v, i, cc, l)))
    })
}

fn in_abb(l: &CaseLabel) -> bool {
    l.contains(Case::A) || l.contains(Case::B1) || l.contains(Case::B2)
}

fn in_b3c(l: &CaseLabel) -> bool {
    l.contains(Case::B3) || l.contains(Case::C)
}

fn case_json(v: &[f64], i: usize) -> Value {
    if v.len() >= 5 {
        label(v, i).map(|l| json!(l)).unwrap_or(Value::Null)
    } else {
        Value::Null
    }
}

fn grad(v: &[f64], m: i32, x: &[f64]) -> f64 {
    (0..v.len()).map(|p| s(v, m - 1, &[p]) * x[p]).sum()
}

fn hess(v: &[f64], m: i32, x: &[f64]) -> f64 {
    let n = v.len();
    let mut t = 0.0;
    for p in 0..n {
        for q in 0..n {
            if p != q {
                t += s(v, m - 2, &[p, q]) * x[p] * x[q];
            }
        }
    }
    t
}

/// `(1 − e^{−t})/t` with its limit 1 at `t = 0`.
fn g(t: f64) -> f64 {
    if t.abs() < 1e-6 {
        1.0 - t / 2.0 + t * t / 6.0
    } else {
        -(-t).exp_m1() / t
    }
}

// ------------------------------------------------------------ inequalities

fn newton(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let v = free_vec(r, c.n);
    let (n, k) = (c.n, c.k as i32);
    let f = |v: &[f64]| {
        let t = coeffs(v, &[]);
        (
            t.get(k - 1).powi(2) / binomial(n, k - 1).powi(2),
            t.get(k) * t.get(k - 2) / (binomial(n, k) * binomial(n, k - 2)),
        )
    };
    let (l, rr) = f(&v);
    let (la, ra) = f(&abs(&v));
    Ok(Eval { slack: scaled(l, rr, la.abs() + ra.abs()), kappa: v, aux: json!({"lhs": l, "rhs": rr}) })
}

fn maclaurin(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let (n, k) = (c.n, c.k);
    let v = desk_cone(r, n, k)?;
    let t = coeffs(&v, &[]);
    let rhs = (t.get(k as i32) / binomial(n, k as i32)).powf(1.0 / k as f64);
    let mut w = Worst::new();
    for l in 1..=k {
        let lhs = (t.get(l as i32) / binomial(n, l as i32)).powf(1.0 / l as f64);
        w.add(rel(lhs, rhs), || json!({"l": l, "lhs": lhs, "rhs": rhs}));
    }
    Ok(w.eval(v))
}

/// With `chain`, pairs whose intermediate `σ_{k+1..k+r-1}` are not all positive are skipped.
fn gen_newton_impl(c: &Ctx, r: &mut SampleRng, chain: bool) -> Result<Eval> {
    let (n, k) = (c.n, c.k as i32);
    let v = desk_cone(r, n, c.k)?;
    let t = coeffs(&v, &[]);
    let q = |m: i32| if m as usize > n { 0.0 } else { t.get(m) / binomial(n, m) };
    let mut w = Worst::new();
    for r_ in 1..=k {
        if chain && (1..r_).any(|j| !(q(k + j) > 0.0)) {
            break;
        }
        for s_ in r_..=k {
            let (lhs, rhs) = (q(s_) * q(k), q(s_ - r_) * q(k + r_));
            w.add(rel(lhs, rhs), || json!({"s": s_, "r": r_, "lhs": lhs, "rhs": rhs}));
        }
    }
    Ok(w.eval(v))
}

fn gen_newton(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    gen_newton_impl(c, r, true)
}

fn gen_newton_literal(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    gen_newton_impl(c, r, false)
}

fn l2_1_guan(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let (n, k) = (c.n, c.k);
    let v = desk_cone(r, n, k)?;
    let l = r.gen_range(1..k);
    let alpha = 1.0 / (k - l) as f64;
    let delta = log_uniform(r, 1e-2, 1e2);
    let x = unit_box(r, n);
    let (ki, li) = (k as i32, l as i32);
    let (sk, sl) = (s(&v, ki, &[]), s(&v, li, &[]));
    let (gk, gl) = (grad(&v, ki, &x), grad(&v, li, &x));
    let (hk, hl) = (hess(&v, ki, &x), hess(&v, li, &x));
    let c1 = 1.0 - alpha + alpha / delta;
    let c2 = alpha + 1.0 - delta * alpha;
    let lhs = -hk + c1 * gk * gk / sk;
    let rhs = sk * c2 * (gl / sl).powi(2) - sk / sl * hl;
    let scale = hk.abs() + c1.abs() * gk * gk / sk + sk * c2.abs() * (gl / sl).powi(2) + (sk / sl * hl).abs();
    Ok(Eval {
        slack: scaled(lhs, rhs, scale),
        kappa: v,
        aux: json!({"l": l, "delta": delta, "alpha": alpha, "xi": x, "lhs": lhs, "rhs": rhs}),
    })
}

fn l2_2_theta(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let (n, k) = (c.n, c.k);
    let v = desk_cone(r, n, k)?;
    let theta = ((k * (n - k)) as f64 / (n - 1) as f64).sqrt();
    let ki = k as i32;
    let mut w = Worst::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && v[i] >= v[j] {
                let lhs = theta * s(&v, ki - 1, &[j]);
                let rhs = s(&v, ki - 1, &[i, j]).abs();
                w.add(rel(lhs, rhs), || json!({"i": i, "j": j, "lhs": lhs, "rhs": rhs}));
            }
        }
    }
    Ok(w.eval(v))
}

fn l2_3_ratio(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let (n, k) = (c.n, c.k as i32);
    let v = desk_cone(r, n, c.k)?;
    let t = coeffs(&v, &[]);
    let mut w = Worst::new();
    for s_ in 0..=k {
        let lhs = v[0].powi(s_) * t.get(k - s_) / t.get(k);
        let rhs = binomial(n, k - s_) / binomial(n, k);
        w.add(rel(lhs, rhs), || json!({"s": s_, "lhs": lhs, "rhs": rhs}));
    }
    Ok(w.eval(v))
}

fn l2_4a(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let (n, k) = (c.n, c.k);
    let v = retry("a non-positive entry", r, |r| {
        let v = desk_cone(r, n, k)?;
        Ok(v.iter().any(|&x| x <= 0.0).then_some(v))
    })?;
    let bound = (n - k) as f64 * v[0] / k as f64;
    let mut w = Worst::new();
    for (i, &x) in v.iter().enumerate().filter(|(_, &x)| x <= 0.0) {
        w.add(rel(bound, -x), || json!({"i": i, "lhs": bound, "rhs": -x}));
    }
    Ok(w.eval(v))
}

fn l2_4b(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let (n, k) = (c.n, c.k);
    let v = retry("two non-positive entries", r, |r| {
        let v = desk_cone(r, n, k)?;
        Ok((v.iter().filter(|&&x| x <= 0.0).count() >= 2).then_some(v))
    })?;
    let ki = k as i32;
    let mut w = Worst::new();
    for i in 0..n {
        for j in i + 1..n {
            if v[i] > 0.0 || v[j] > 0.0 {
                continue;
            }
            let t = coeffs(&v, &[i, j]);
            let (num, den) = (2.0 * t.get(ki), t.get(ki - 1));
            let lhs = -(v[i] + v[j]);
            let slack = if den > 0.0 { rel(num / den, lhs) } else { -1.0 };
            w.add(slack, || json!({"i": i, "j": j, "lhs": lhs, "bound": num / den, "denominator": den}));
        }
    }
    Ok(w.eval(v))
}

fn l2_5_product(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let k = c.k;
    let v = desk_bar(r, c.n, k)?;
    let t = coeffs(&v, &[]);
    let mut w = Worst::new();
    for s_ in 1..k {
        let lhs = t.get(s_ as i32);
        let rhs: f64 = v[..s_].iter().product();
        w.add(rel(lhs, rhs), || json!({"s": s_, "lhs": lhs, "rhs": rhs}));
    }
    Ok(w.eval(v))
}

fn l2_6_theta(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let (n, k) = (c.n, c.k);
    let v = desk_cone(r, n, k)?;
    let theta = 1.0 / ((n as f64).powi((n - k) as i32) * binomial(n, k as i32));
    let rhs = theta * s(&v, k as i32, &[]);
    let mut w = Worst::new();
    for j in 0..k {
        let lhs = v[j] * s(&v, k as i32 - 1, &[j]);
        w.add(rel(lhs, rhs), || json!({"j": j, "theta": theta, "lhs": lhs, "rhs": rhs}));
    }
    Ok(w.eval(v))
}

fn l5_8_sum(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let m = c.n;
    let v = desk_cone(r, m, m - 2)?;
    let d = m as i32 - 4;
    let lhs = 4.0 * s(&v, d, &[]).powi(2);
    let mut w = Worst::new();
    for j in 0..m {
        let rhs: f64 = (0..m).filter(|&q| q != j).map(|q| s(&v, d, &[j, q]).powi(2)).sum();
        w.add(rel(lhs, rhs), || json!({"j": j, "lhs": lhs, "rhs": rhs}));
    }
    Ok(w.eval(v))
}

fn l5_9_lower(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let m = c.n;
    let (v, delta) = retry("a large negative or second-smallest entry", r, |r| {
        let v = desk_cone(r, m, m - 2)?;
        let dmax = (-v[m - 1]).max(v[m - 2]) / v[0];
        if !(dmax > 0.0) {
            return Ok(None);
        }
        let delta = dmax.min(0.99) * r.gen_range(0.2..=1.0);
        Ok(Some((v, delta)))
    })?;
    let mi = m as i32;
    let dp = (delta.powi(mi - 2) / 2f64.powi(mi - 1)).min(delta.powi(mi - 1));
    let ratio = s(&v, mi - 3, &[0]) / v[0].powi(mi - 3);
    Ok(Eval { slack: rel(ratio, dp), kappa: v, aux: json!({"delta": delta, "delta_prime": dp, "ratio": ratio}) })
}

// -------------------------------------------------------------- identities

fn fact_recursion(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let v = free_vec(r, c.n);
    let k = c.k as i32;
    let mut w = Worst::new();
    for i in 0..c.n {
        let (sl, l, rr) = identity(&v, |v| (vec![s(v, k, &[])], vec![v[i] * s(v, k - 1, &[i]), s(v, k, &[i])]));
        w.add(sl, || json!({"i": i, "lhs": l, "rhs": rr}));
    }
    Ok(w.eval(v))
}

fn fact_sum_excl(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let v = free_vec(r, c.n);
    let (n, k) = (c.n, c.k as i32);
    let (sl, l, rr) = identity(&v, |v| ((0..n).map(|i| s(v, k, &[i])).collect(), vec![(n as f64 - k as f64) * s(v, k, &[])]));
    Ok(Eval { slack: sl, kappa: v, aux: json!({"lhs": l, "rhs": rr}) })
}

fn fact_sum_weighted(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let v = free_vec(r, c.n);
    let (n, k) = (c.n, c.k as i32);
    let (sl, l, rr) = identity(&v, |v| ((0..n).map(|i| v[i] * s(v, k - 1, &[i])).collect(), vec![k as f64 * s(v, k, &[])]));
    Ok(Eval { slack: sl, kappa: v, aux: json!({"lhs": l, "rhs": rr}) })
}

fn l4_2_id1(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let v = free_vec(r, c.n);
    let ij = distinct(r, c.n, 2);
    let (i, j) = (ij[0], ij[1]);
    let bk = log_uniform(r, 1.0, 1e4);
    let k = c.k as i32;
    let (sl, l, rr) = identity(&v, |v| {
        let (a, b) = (s(v, k - 1, &[i]), s(v, k - 1, &[j]));
        let (e, f) = (s(v, k - 2, &[i, j]), s(v, k - 1, &[i, j]));
        let (ki, kj) = (v[i], v[j]);
        let lhs = vec![
            -bk * ki * a * b * b,
            2.0 * bk * ki * ki * a * b * e,
            -ki * ki * e * e,
            bk * ki * a * a * b,
            bk * ki * ki * a * a * e,
            bk * ki * kj * a * a * e,
            -a * b,
            -ki * a * e,
            -kj * a * e,
        ];
        let rhs = vec![
            bk * ki * ki * a * a * e,
            bk * ki * kj * a * a * e,
            bk * ki * ki * a * b * e,
            bk * ki * kj * a * b * e,
            -ki * a * e,
            -kj * a * e,
            -ki * b * e,
            -kj * b * e,
            -f * f,
        ];
        (lhs, rhs)
    });
    Ok(Eval { slack: sl, kappa: v, aux: json!({"i": i, "j": j, "K": bk, "lhs": l, "rhs": rr}) })
}

fn l4_2_id2(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let v = free_vec(r, c.n);
    let ipq = distinct(r, c.n, 3);
    let (i, p, q) = (ipq[0], ipq[1], ipq[2]);
    let k = c.k as i32;
    let (sl, l, rr) = identity(&v, |v| {
        let d1 = |a: usize| s(v, k - 1, &[a]);
        let d2 = |a: usize, b: usize| s(v, k - 2, &[a, b]);
        let ki = v[i];
        let lhs = vec![
            ki * d1(p) * d2(i, q),
            ki * d1(q) * d2(i, p),
            -ki * d1(i) * d2(p, q),
            -d1(p) * d1(q),
            -ki * ki * d2(i, p) * d2(i, q),
            ki * d1(i) * d2(p, q),
        ];
        (lhs, vec![-s(v, k - 1, &[i, p]) * s(v, k - 1, &[i, q])])
    });
    Ok(Eval { slack: sl, kappa: v, aux: json!({"i": i, "p": p, "q": q, "lhs": l, "rhs": rr}) })
}

fn l4_2_id3(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let v = free_vec(r, c.n);
    let ij = distinct(r, c.n, 2);
    let (i, j) = (ij[0], ij[1]);
    let k = c.k as i32;
    let (sl, l, rr) = identity(&v, |v| {
        let (a, b) = (s(v, k - 1, &[i]), s(v, k - 1, &[j]));
        let e = s(v, k - 2, &[i, j]);
        let (ki, kj) = (v[i], v[j]);
        (
            vec![a * ki, a * kj, b * ki, b * kj],
            vec![2.0 * s(v, k, &[]), -2.0 * s(v, k, &[i, j]), ki * ki * e, kj * kj * e],
        )
    });
    Ok(Eval { slack: sl, kappa: v, aux: json!({"i": i, "j": j, "lhs": l, "rhs": rr}) })
}

fn l4_2_id4(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let v = free_vec(r, c.n);
    let ipq = distinct(r, c.n, 3);
    let (i, p, q) = (ipq[0], ipq[1], ipq[2]);
    let k = c.k as i32;
    let (sl, l, rr) = identity(&v, |v| {
        let t = coeffs(v, &[i, p, q]);
        let (t1, t2, t3) = (t.get(k - 1), t.get(k - 2), t.get(k - 3));
        let (ki, kq) = (v[i], v[q]);
        (
            vec![s(v, k - 1, &[q]) * s(v, k - 2, &[i, p]), -s(v, k - 1, &[i]) * s(v, k - 2, &[p, q])],
            vec![ki * t2 * t2, -ki * t1 * t3, kq * t3 * t1, -kq * t2 * t2],
        )
    });
    Ok(Eval { slack: sl, kappa: v, aux: json!({"i": i, "p": p, "q": q, "lhs": l, "rhs": rr}) })
}

fn l4_2_id5(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let v = free_vec(r, c.n);
    let ipq = distinct(r, c.n, 3);
    let (i, p, q) = (ipq[0], ipq[1], ipq[2]);
    let k = c.k as i32;
    let (sl, l, rr) = identity(&v, |v| {
        let t = coeffs(v, &[i, p, q]);
        let (t0, t1, t2, t3) = (t.get(k), t.get(k - 1), t.get(k - 2), t.get(k - 3));
        let (ki, kq) = (v[i], v[q]);
        (
            vec![s(v, k - 1, &[p]) * s(v, k - 1, &[i, q])],
            vec![s(v, k, &[]) * t2, t1 * t1, -t0 * t2, -kq * ki * t2 * t2, kq * ki * t3 * t1],
        )
    });
    Ok(Eval { slack: sl, kappa: v, aux: json!({"i": i, "p": p, "q": q, "lhs": l, "rhs": rr}) })
}

fn l5_1_identity(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let v = free_vec(r, c.n);
    let k = c.k as i32;
    let (sl, l, rr) = identity(&v, |v| {
        let t = coeffs(v, &[]);
        let sq: Vec<f64> = v.iter().map(|x| x * x).collect();
        let mut rhs = vec![s(&sq, k, &[])];
        for i in 1..=k {
            let sign = if i % 2 == 1 { 2.0 } else { -2.0 };
            rhs.push(sign * t.get(k + i) * t.get(k - i));
        }
        (vec![t.get(k) * t.get(k)], rhs)
    });
    Ok(Eval { slack: sl, kappa: v, aux: json!({"lhs": l, "rhs": rr}) })
}

fn l5_4_identity(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let v = free_vec(r, c.n);
    let (m, sv) = (c.n as i32, c.k as i32);
    let (sl, l, rr) = identity(&v, |v| {
        let t = coeffs(v, &[]);
        (
            (0..v.len()).map(|i| s(v, m - sv, &[i]) * s(v, m - 1, &[i])).collect(),
            vec![t.get(m - sv) * t.get(m - 1), -(sv as f64 + 1.0) * t.get(m) * t.get(m - sv - 1)],
        )
    });
    Ok(Eval { slack: sl, kappa: v, aux: json!({"lhs": l, "rhs": rr}) })
}

fn l5_5_identity(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let v = free_vec(r, c.n);
    let m = c.n as i32;
    let mut w = Worst::new();
    for j in 0..c.n {
        let (sl, l, rr) = identity(&v, |v| {
            let t = coeffs(v, &[j]);
            (
                (0..v.len()).filter(|&q| q != j).map(|q| s(v, m - 4, &[j, q]).powi(2)).collect(),
                vec![
                    3.0 * t.get(m - 4).powi(2),
                    -2.0 * t.get(m - 5) * t.get(m - 3),
                    -4.0 * t.get(m - 6) * t.get(m - 2),
                    -6.0 * t.get(m - 7) * t.get(m - 1),
                ],
            )
        });
        w.add(sl, || json!({"j": j, "lhs": l, "rhs": rr}));
    }
    Ok(w.eval(v))
}

// ------------------------------------------------------------------- forms

fn excl_form(v: &[f64], diag: impl Fn(usize) -> f64, off: impl Fn(usize, usize) -> f64) -> SymMatrix {
    SymMatrix::from_fn(v.len(), |p, q| if p == q { diag(p) } else { off(p, q) })
}

fn l5_2_psd(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let v = desk_bar(r, c.n, c.n)?;
    let sv = c.k as i32;
    let m = excl_form(&v, |j| s(&v, sv, &[j]), |p, q| s(&v, sv, &[p, q]));
    psd_eval(&m, v, json!({}))
}

fn newkappa_form(v: &[f64]) -> SymMatrix {
    let d = v.len() as i32 - 3;
    excl_form(v, |j| 2.0 * s(v, d, &[j]), |p, q| -s(v, d, &[p, q]))
}

fn l5_3_psd(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let v = desk_bar(r, c.n, c.n)?;
    psd_eval(&newkappa_form(&v), v, json!({}))
}

fn l5_6_psd(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let v = desk_cone(r, c.n, c.k)?;
    let sv = c.k as i32;
    let m = excl_form(
        &v,
        |j| s(&v, sv - 1, &[j]).powi(2),
        |p, q| {
            let t = coeffs(&v, &[p, q]);
            t.get(sv - 1).powi(2) - t.get(sv) * t.get(sv - 2)
        },
    );
    psd_eval(&m, v, json!({}))
}

fn l5_7_psd(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let v = desk_cone(r, c.n, c.n - 2)?;
    psd_eval(&newkappa_form(&v), v, json!({}))
}

fn d_gram(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let v = desk_cone(r, c.n, c.k)?;
    let i = r.gen_range(0..c.n);
    let f = abcd_with(&Plain, &v, c.k, i)?;
    psd_eval(&f.d.matrix, v, json!({"i": i}))
}

/// `κ` with `(κ|i)` drawn from `Γ_level` in dimension `n-1` and `κ_i` free.
fn reduced_draw(r: &mut SampleRng, n: usize, level: usize) -> Result<(Vec<f64>, usize)> {
    let bar = desk_cone(r, n - 1, level)?;
    let i = r.gen_range(0..n);
    let x = bar[0] * r.gen_range(-2.0..2.0);
    Ok((insert_at(&bar, i, x), i))
}

fn a_psd(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let (v, i) = reduced_draw(r, c.n, c.k - 1)?;
    let f = abcd_with(&Plain, &v, c.k, i)?;
    psd_eval(&f.a.matrix, v, json!({"i": i}))
}

fn b_psd(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let (v, i) = reduced_draw(r, c.n, c.n - 3)?;
    let f = abcd_with(&Plain, &v, c.n - 2, i)?;
    psd_eval(&f.b.matrix, v, json!({"i": i}))
}

fn l6_4_h(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let (v, i) = reduced_draw(r, c.n, c.n - 3)?;
    let cv = CurvatureVector::new(v.clone())?;
    let h = h_matrix(&cv, i)?.matrix;
    let lb = h_lower_bound(&cv, i)?;
    let neg: Vec<f64> = lb.iter().map(|x| -x).collect();
    psd_eval(&h.add_diag(&neg), v, json!({"i": i}))
}

// -------------------------------------------------------- asymptotic, forms

fn c3_1_key(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let (v, i, cc) = conj_draw_k(c, r, c.k)?;
    let m = key_matrix_with(&Plain, &v, c.k, i, c.big_k)?;
    let case = if c.k + 2 == c.n { case_json(&v, i) } else { Value::Null };
    psd_eval(&m.matrix, v, json!({"i": i, "K": c.big_k, "c": cc, "case": case}))
}

fn ex1(c: &Ctx, r: &mut SampleRng, scaled_form: bool) -> Result<Eval> {
    let (v, i, cc) = conj_draw_k(c, r, c.k)?;
    let m = lhs_minus_rhs_with(&Plain, &v, c.k, i, c.big_k, scaled_form)?;
    psd_eval(&m.matrix, v, json!({"i": i, "K": c.big_k, "c": cc}))
}

fn l4_1_ex1(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    ex1(c, r, true)
}

fn l4_1_ex1_literal(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    ex1(c, r, false)
}

fn s7_case_key(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let (v, i, cc, l) = case_draw(c, r, "case B3 or C", in_b3c)?;
    let m = key_matrix_with(&Plain, &v, c.n - 2, i, c.big_k)?;
    psd_eval(&m.matrix, v, json!({"i": i, "K": c.big_k, "c": cc, "case": l}))
}

fn t6_1(c: &Ctx, r: &mut SampleRng, first: bool) -> Result<Eval> {
    let (v, i, cc, l) = case_draw(c, r, "case A, B1 or B2", in_abb)?;
    let k = c.n - 2;
    let f = abcd_with(&Plain, &v, k, i)?;
    let ki2 = v[i] * v[i];
    let shift = s(&v, k as i32 - 1, &[i]).powi(2) / 20.0;
    let id = vec![1.0; c.n - 1];
    let m = if first {
        f.a.matrix.scale(8.0 * ki2 / 9.0).add_scaled(&f.c.matrix, 1.0).add_diag(&id.iter().map(|x| -shift * x).collect::<Vec<_>>())
    } else {
        let sk = s(&v, k as i32, &[]);
        f.a.matrix
            .scale(ki2 / 9.0)
            .add_scaled(&f.b.matrix, sk)
            .add_scaled(&f.d.matrix, -cc)
            .add_diag(&id.iter().map(|x| shift * x).collect::<Vec<_>>())
    };
    psd_eval(&m, v, json!({"i": i, "K": c.big_k, "c": cc, "case": l}))
}

fn t6_1_s601(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    t6_1(c, r, true)
}

fn t6_1_s602(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    t6_1(c, r, false)
}

fn l6_2_bound(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let k = c.n - 2;
    let (v, i) = conj_draw(c, r, k)?;
    let f = abcd_with(&Plain, &v, k, i)?;
    let bar: Vec<f64> = CurvatureVector::new(v.clone())?.without(&[i]);
    let nn = c.n as i32;
    let full = coeffs(&bar, &[]);
    let rh = 2.0 * full.get(nn - 3) / (3.0 * full.get(nn - 5));
    let rm = SymMatrix::from_fn(bar.len(), |p, q| {
        if p == q {
            let t = coeffs(&bar, &[p]);
            2.0 * t.get(nn - 3) * t.get(nn - 5) - 2.0 * t.get(nn - 2) * t.get(nn - 6)
        } else {
            let t = coeffs(&bar, &[p, q]);
            t.get(nn - 3) * t.get(nn - 5)
        }
    });
    let m = f.a.matrix.scale(8.0 * v[i] * v[i] / 9.0).add_scaled(&rm, -rh);
    psd_eval(&m, v, json!({"i": i, "r": rh}))
}

// ------------------------------------------------------ asymptotic, scalars

fn l6_1_ratio(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let k = c.n - 2;
    let (v, i) = conj_draw(c, r, k)?;
    let bar: Vec<f64> = CurvatureVector::new(v.clone())?.without(&[i]);
    let nn = c.n as i32;
    let t = coeffs(&bar, &[]);
    let ratio = t.get(nn - 3) / t.get(nn - 5);
    let bound = 1.1 * v[0] * v[0] + s(&v, k as i32, &[]) / v[i];
    let slack = if ratio > 0.0 { rel(bound, ratio) } else { -1.0 };
    Ok(Eval { slack, kappa: v, aux: json!({"i": i, "ratio": ratio, "bound": bound}) })
}

fn l6_3_bound(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let (v, i, _, l) = case_draw(c, r, "case A, B1 or B2", in_abb)?;
    let bar: Vec<f64> = CurvatureVector::new(v.clone())?.without(&[i]);
    let nn = c.n as i32;
    let full = coeffs(&bar, &[]);
    let tail = full.get(nn - 3) * full.get(nn - 5) / 40.0;
    let mut w = Worst::new();
    for j in 0..bar.len() {
        let t = coeffs(&bar, &[j]);
        let a = -full.get(nn - 2) * t.get(nn - 6);
        let b = -t.get(nn - 2) * t.get(nn - 6);
        let total = a + b + tail;
        let scale = a.abs() + b.abs() + tail.abs();
        w.add(scaled(total, 0.0, scale), || json!({"i": i, "j": j, "value": total, "case": l}));
    }
    Ok(w.eval(v))
}

fn l3_2(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let (n, k) = (c.n, c.k);
    let v = draw_gamma(&spec(n, k, c.kappa1, None, None), r)?.into_vec();
    let eps = 1.0 / (3.0 * k as f64);
    let ki = k as i32;
    let top = v[0];
    let mut w = Worst::new();
    for i in 0..n {
        for l in 0..n {
            if i == l {
                continue;
            }
            let shift = v[i].max(v[l]);
            let wl = (v[l] - shift).exp();
            let dd = exp_divided_difference(v[l], v[i], shift);
            let lhs = (2.0 - eps) * (wl * s(&v, ki - 2, &[i, l]) + dd * s(&v, ki - 1, &[l]));
            let rhs = wl / top * s(&v, ki - 1, &[i]);
            w.add(rel(lhs, rhs), || json!({"i": i, "l": l, "lhs": lhs, "rhs": rhs, "shift": shift}));
        }
    }
    Ok(w.eval(v))
}

fn l3_4(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let (v, i) = conj_draw(c, r, c.k)?;
    let k = c.k as i32;
    let sii = s(&v, k - 1, &[i]);
    let ki = v[i];
    let mut w = Worst::new();
    for j in (0..c.n).filter(|&j| j != i) {
        let kj = v[j];
        let sjj = s(&v, k - 1, &[j]);
        let mixed = s(&v, k - 2, &[i, j]);
        let lhs = 2.0 * ki * g(ki - kj) * sjj;
        let rhs = sjj + (ki + kj) * mixed;
        w.add(rel(lhs, rhs), || json!({"i": i, "j": j, "part": "divided", "lhs": lhs, "rhs": rhs}));
        let ll = if ki > kj {
            let e = (kj - ki).exp();
            scaled((ki + kj) * sii, 2.0 * ki * sjj * e, ((ki + kj) * sii).abs() + 2.0 * ki * sjj * e)
        } else if ki < kj {
            let e = (kj - ki).exp();
            scaled(2.0 * ki * e * sjj, (ki + kj) * sii, 2.0 * ki * e * sjj + ((ki + kj) * sii).abs())
        } else {
            0.0
        };
        w.add(ll, || json!({"i": i, "j": j, "part": "L"}));
    }
    Ok(w.eval(v))
}

/// `h` in the box, projected half of the time onto `Σ σ^{jj} h_j = 0`.
fn draw_h(r: &mut SampleRng, v: &[f64], k: usize) -> Vec<f64> {
    let mut h = unit_box(r, v.len());
    if r.gen_bool(0.5) {
        let g: Vec<f64> = (0..v.len()).map(|j| s(v, k as i32 - 1, &[j])).collect();
        let gg: f64 = g.iter().map(|x| x * x).sum();
        let gh: f64 = g.iter().zip(&h).map(|(a, b)| a * b).sum();
        if gg > 0.0 {
            for (x, gj) in h.iter_mut().zip(&g) {
                *x -= gh / gg * gj;
            }
        }
    }
    h
}

fn l3_5_a(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let (v, i, _) = conj_draw_k(c, r, c.k)?;
    let h = draw_h(r, &v, c.k);
    let t = testfn_terms(&CurvatureVector::new(v.clone())?, c.k, i, &h, c.big_k)?;
    let lhs = t.a + t.d;
    let rhs = (v[i] - t.scale_log).exp() * s(&v, c.k as i32 - 1, &[i]) * h[i] * h[i] / t.log_p;
    Ok(Eval { slack: rel(lhs, rhs), kappa: v, aux: json!({"i": i, "h": h, "K": c.big_k, "lhs": lhs, "rhs": rhs}) })
}

fn l3_5_b(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let (v, i) = conj_draw(c, r, c.k)?;
    let h = unit_box(r, c.n);
    let k = c.k as i32;
    let sii = s(&v, k - 1, &[i]);
    let top = v[0];
    let w_all: f64 = v.iter().map(|x| (x - top).exp()).sum();
    let log_p = top + w_all.ln();
    let others: Vec<usize> = (0..c.n).filter(|&l| l != i).collect();
    let shift = others.iter().map(|&l| v[l]).fold(f64::NEG_INFINITY, f64::max);
    let (mut pos, mut neg) = (0.0, 0.0);
    let mut w = Worst::new();
    for &l in &others {
        let mixed = s(&v, k - 2, &[i, l]);
        let wl = (v[l] - shift).exp() * h[l] * h[l];
        pos += 2.0 * wl * mixed;
        neg += wl * sii / log_p;
        let (a, b) = (2.0 * top * mixed, sii);
        w.add(rel(a, b), || json!({"i": i, "l": l, "part": "pointwise", "lhs": a, "rhs": b}));
    }
    w.add(rel(pos, neg), || json!({"i": i, "h": h, "part": "weighted", "lhs": pos, "rhs": neg}));
    Ok(w.eval(v))
}

fn s3_02_testfn(c: &Ctx, r: &mut SampleRng) -> Result<Eval> {
    let (v, i, _) = conj_draw_k(c, r, c.k)?;
    let h = draw_h(r, &v, c.k);
    let t = testfn_terms(&CurvatureVector::new(v.clone())?, c.k, i, &h, c.big_k)?;
    let scale = t.a.abs() + t.b.abs() + t.c.abs() + t.d.abs() + t.e.abs();
    Ok(Eval { slack: scaled(t.total(), 0.0, scale), kappa: v, aux: json!({"i": i, "h": h, "K": c.big_k, "terms": t}) })
}

// ----------------------------------------------------------------- catalog

fn lv_from2(n: usize) -> (usize, usize) {
    (2, n)
}
fn lv_from1(n: usize) -> (usize, usize) {
    (1, n)
}
fn lv_from0(n: usize) -> (usize, usize) {
    (0, n)
}
fn lv_below_n(n: usize) -> (usize, usize) {
    (1, n - 1)
}
fn lv_below_n1(n: usize) -> (usize, usize) {
    (1, n - 2)
}
/// `2k > n` and `k ≥ 2`.
fn lv_half(n: usize) -> (usize, usize) {
    ((n / 2 + 1).max(2), n)
}

const fn chk(
    id: &'static str,
    kind: Kind,
    min_n: usize,
    levels: LevelRule,
    eval: super::EvalFn,
) -> LemmaCheck {
    let (tol_kind, default_samples) = match kind {
        Kind::Identity | Kind::Inequality => (TolKind::Scalar, 10_000),
        Kind::Psd => (TolKind::Matrix, 1_000),
        Kind::Asymptotic => (TolKind::Scalar, 1_000),
    };
    LemmaCheck { id, kind, tol_kind, min_n, levels, gated: true, default_samples, eval }
}

const fn matrix(mut c: LemmaCheck) -> LemmaCheck {
    c.tol_kind = TolKind::Matrix;
    c
}

const fn ungated(mut c: LemmaCheck) -> LemmaCheck {
    c.gated = false;
    c
}

use Kind::{Asymptotic as Asy, Identity as Id, Inequality as Ineq, Psd};
use LevelRule::{All, Fixed, Headline, None as NoLevel};

pub static CATALOG: &[LemmaCheck] = &[
    chk("fact_recursion", Id, 1, All(lv_from1), fact_recursion),
    chk("fact_sum_excl", Id, 1, All(lv_from1), fact_sum_excl),
    chk("fact_sum_weighted", Id, 1, All(lv_from1), fact_sum_weighted),
    chk("newton", Ineq, 2, All(lv_from2), newton),
    chk("maclaurin", Ineq, 1, All(lv_from1), maclaurin),
    chk("gen_newton", Ineq, 1, All(lv_from1), gen_newton),
    ungated(chk("gen_newton_literal", Ineq, 1, All(lv_from1), gen_newton_literal)),
    chk("L2_1_guan", Ineq, 2, All(lv_from2), l2_1_guan),
    chk("L2_2_theta", Ineq, 2, All(lv_from1), l2_2_theta),
    chk("L2_3_ratio", Ineq, 1, All(lv_from1), l2_3_ratio),
    chk("L2_4a", Ineq, 2, All(lv_below_n), l2_4a),
    chk("L2_4b", Ineq, 3, All(lv_below_n1), l2_4b),
    chk("L2_5_product", Ineq, 2, All(lv_from2), l2_5_product),
    chk("L2_6_theta", Ineq, 1, All(lv_from1), l2_6_theta),
    chk("L3_2", Asy, 3, Headline(lv_half), l3_2),
    chk("L3_4", Asy, 3, Headline(lv_half), l3_4),
    chk("L3_5_a", Asy, 3, Headline(lv_half), l3_5_a),
    chk("L3_5_b", Asy, 3, Headline(lv_half), l3_5_b),
    chk("S3_02_testfn", Asy, 3, Headline(lv_half), s3_02_testfn),
    matrix(chk("L4_1_ex1", Asy, 3, Headline(lv_half), l4_1_ex1)),
    ungated(matrix(chk("L4_1_ex1_literal", Asy, 3, Headline(lv_half), l4_1_ex1_literal))),
    chk("L4_2_id1", Id, 2, All(lv_from1), l4_2_id1),
    chk("L4_2_id2", Id, 3, All(lv_from1), l4_2_id2),
    chk("L4_2_id3", Id, 2, All(lv_from1), l4_2_id3),
    chk("L4_2_id4", Id, 3, All(lv_from1), l4_2_id4),
    chk("L4_2_id5", Id, 3, All(lv_from1), l4_2_id5),
    chk("L5_1_identity", Id, 1, All(lv_from1), l5_1_identity),
    chk("L5_2_psd", Psd, 1, All(lv_from0), l5_2_psd),
    chk("L5_3_psd", Psd, 3, NoLevel, l5_3_psd),
    chk("L5_4_identity", Id, 1, All(lv_from1), l5_4_identity),
    chk("L5_5_identity", Id, 4, NoLevel, l5_5_identity),
    chk("L5_6_psd", Psd, 1, All(lv_from1), l5_6_psd),
    chk("L5_7_psd", Psd, 3, NoLevel, l5_7_psd),
    chk("L5_8_sum", Ineq, 3, NoLevel, l5_8_sum),
    chk("L5_9_lower", Ineq, 5, NoLevel, l5_9_lower),
    chk("L6_1_ratio", Asy, 5, Fixed, l6_1_ratio),
    matrix(chk("L6_2_bound", Asy, 5, Fixed, l6_2_bound)),
    chk("L6_3_bound", Asy, 5, Fixed, l6_3_bound),
    chk("L6_4_H", Psd, 5, NoLevel, l6_4_h),
    matrix(chk("T6_1_s601", Asy, 5, Fixed, t6_1_s601)),
    matrix(chk("T6_1_s602", Asy, 5, Fixed, t6_1_s602)),
    matrix(chk("C3_1_key", Asy, 3, Headline(lv_half), c3_1_key)),
    matrix(chk("S7_case_key", Asy, 5, Fixed, s7_case_key)),
    chk("D_gram", Psd, 2, All(lv_from1), d_gram),
    chk("A_psd", Psd, 3, All(lv_from2), a_psd),
    chk("B_psd", Psd, 4, Fixed, b_psd),
];
