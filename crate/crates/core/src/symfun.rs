//! Elementary symmetric functions and their exclusion variants.
//!
//! `σ_k(κ)` is the coefficient of `t^k` in `∏(1 + κ_i t)`. Degrees are signed
//! so that expressions like `σ_{k-3}` can be written directly: negative
//! degrees and degrees above the dimension evaluate to zero, `σ_0 = 1`.

use std::fmt;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 64;

/// Principal curvatures. Finite, nonempty, at most [`MAX_DIM`] entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CurvatureVector(Vec<f64>);

impl CurvatureVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(invalid("curvature vector is empty"));
        }
        if entries.len() > MAX_DIM {
            return Err(invalid(format!("dimension {} exceeds {MAX_DIM}", entries.len())));
        }
        if let Some(pos) = entries.iter().position(|x| !x.is_finite()) {
            return Err(invalid(format!("entry {pos} is not finite")));
        }
        Ok(CurvatureVector(entries))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_sorted_desc(&self) -> bool {
        self.0.windows(2).all(|w| w[0] >= w[1])
    }

    pub fn sorted_desc(&self) -> CurvatureVector {
        let mut v = self.0.clone();
        v.sort_by(|a, b| b.total_cmp(a));
        CurvatureVector(v)
    }

    pub fn squared(&self) -> CurvatureVector {
        CurvatureVector(self.0.iter().map(|x| x * x).collect())
    }

    pub fn scaled(&self, t: f64) -> CurvatureVector {
        CurvatureVector(self.0.iter().map(|x| x * t).collect())
    }

    /// Entries with the given positions removed.
    pub fn without(&self, excl: &[usize]) -> Vec<f64> {
        self.0
            .iter()
            .enumerate()
            .filter(|(j, _)| !excl.contains(j))
            .map(|(_, &x)| x)
            .collect()
    }
}

impl TryFrom<Vec<f64>> for CurvatureVector {
    type Error = crate::error::Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        CurvatureVector::new(v)
    }
}

impl From<CurvatureVector> for Vec<f64> {
    fn from(v: CurvatureVector) -> Vec<f64> {
        v.0
    }
}

impl AsRef<[f64]> for CurvatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for CurvatureVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A sorted, duplicate-free set of at most three positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct IndexSet {
    idx: [usize; 3],
    len: usize,
}

impl IndexSet {
    pub fn empty() -> Self {
        IndexSet::default()
    }

    /// Validates against dimension `n`; input order does not matter.
    pub fn new(indices: &[usize], n: usize) -> Result<Self> {
        if indices.len() > 3 {
            return Err(invalid(format!("at most 3 excluded indices, got {}", indices.len())));
        }
        let mut idx = [0usize; 3];
        idx[..indices.len()].copy_from_slice(indices);
        idx[..indices.len()].sort_unstable();
        for w in idx[..indices.len()].windows(2) {
            if w[0] == w[1] {
                return Err(invalid(format!("duplicate index {}", w[0])));
            }
        }
        if let Some(&bad) = indices.iter().find(|&&j| j >= n) {
            return Err(invalid(format!("index {bad} out of range for dimension {n}")));
        }
        Ok(IndexSet { idx, len: indices.len() })
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.idx[..self.len]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.as_slice())
    }
}

/// All `σ_0..σ_d` of some vector of dimension `d`, stored inline.
#[derive(Clone, Copy, Debug)]
pub struct Coeffs {
    c: [f64; MAX_DIM + 1],
    dim: usize,
}

impl Coeffs {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `σ_m`, zero outside `0..=dim`.
    #[inline]
    pub fn get(&self, m: i32) -> f64 {
        if m < 0 || m as usize > self.dim {
            0.0
        } else {
            self.c[m as usize]
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.c[..=self.dim]
    }
}

/// Coefficients of `∏_{j ∉ excl} (1 + κ_j t)` by the standard product recursion.
pub fn coeffs(kappa: &[f64], excl: &[usize]) -> Coeffs {
    let mut c = [0.0; MAX_DIM + 1];
    c[0] = 1.0;
    let mut d = 0usize;
    for (j, &x) in kappa.iter().enumerate() {
        if excl.contains(&j) {
            continue;
        }
        d += 1;
        for m in (1..=d).rev() {
            c[m] += x * c[m - 1];
        }
    }
    Coeffs { c, dim: d }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Same as [`coeffs`] but carries each coefficient as an unevaluated sum of two
/// doubles, so cancellation in the recursion loses far less.
pub fn coeffs_compensated(kappa: &[f64], excl: &[usize]) -> Coeffs {
    let mut hi = [0.0; MAX_DIM + 1];
    let mut lo = [0.0; MAX_DIM + 1];
    hi[0] = 1.0;
    let mut d = 0usize;
    for (j, &x) in kappa.iter().enumerate() {
        if excl.contains(&j) {
            continue;
        }
        d += 1;
        for m in (1..=d).rev() {
            let (p, mut pe) = two_prod(x, hi[m - 1]);
            pe += x * lo[m - 1];
            let (s, mut se) = two_sum(hi[m], p);
            se += lo[m] + pe;
            let (h, l) = two_sum(s, se);
            hi[m] = h;
            lo[m] = l;
        }
    }
    let mut c = [0.0; MAX_DIM + 1];
    for m in 0..=d {
        c[m] = hi[m] + lo[m];
    }
    Coeffs { c, dim: d }
}

/// How symmetric functions are evaluated by the matrix builders.
pub trait SymEval: Sync {
    fn coeffs(&self, kappa: &[f64], excl: &[usize]) -> Coeffs;

    fn sigma(&self, m: i32, kappa: &[f64], excl: &[usize]) -> f64 {
        if m < 0 {
            return 0.0;
        }
        self.coeffs(kappa, excl).get(m)
    }
}

/// Plain double precision.
#[derive(Clone, Copy, Debug, Default)]
pub struct Plain;

/// Double-double accumulation.
#[derive(Clone, Copy, Debug, Default)]
pub struct Compensated;

impl SymEval for Plain {
    fn coeffs(&self, kappa: &[f64], excl: &[usize]) -> Coeffs {
        coeffs(kappa, excl)
    }
}

impl SymEval for Compensated {
    fn coeffs(&self, kappa: &[f64], excl: &[usize]) -> Coeffs {
        coeffs_compensated(kappa, excl)
    }
}

/// `σ_k(κ)`.
pub fn sigma(k: i32, kappa: &CurvatureVector) -> f64 {
    coeffs(kappa.as_slice(), &[]).get(k)
}

/// `[σ_0, …, σ_n]`.
pub fn sigma_all(kappa: &CurvatureVector) -> Vec<f64> {
    coeffs(kappa.as_slice(), &[]).as_slice().to_vec()
}

/// `σ_k(κ | S)`, the function of κ with the positions in `S` deleted.
pub fn sigma_excl(k: i32, kappa: &CurvatureVector, excl: &IndexSet) -> Result<f64> {
    check_indices(kappa.len(), excl.as_slice())?;
    Ok(coeffs(kappa.as_slice(), excl.as_slice()).get(k))
}

/// `∂σ_k/∂κ_p = σ_{k-1}(κ | p)`.
pub fn sigma_d1(k: i32, kappa: &CurvatureVector, p: usize) -> Result<f64> {
    check_indices(kappa.len(), &[p])?;
    Ok(coeffs(kappa.as_slice(), &[p]).get(k - 1))
}

/// `∂²σ_k/∂κ_p∂κ_q = σ_{k-2}(κ | pq)` for `p ≠ q`, and zero on the diagonal.
pub fn sigma_d2(k: i32, kappa: &CurvatureVector, p: usize, q: usize) -> Result<f64> {
    check_indices(kappa.len(), &[p, q])?;
    if p == q {
        return Ok(0.0);
    }
    Ok(coeffs(kappa.as_slice(), &[p, q]).get(k - 2))
}

fn check_indices(n: usize, idx: &[usize]) -> Result<()> {
    match idx.iter().find(|&&j| j >= n) {
        Some(j) => Err(invalid(format!("index {j} out of range for dimension {n}"))),
        None => Ok(()),
    }
}

/// Cached `σ_0..σ_n` of one vector, with exclusion queries.
#[derive(Clone, Debug)]
pub struct SymTable {
    base: CurvatureVector,
    values: Vec<f64>,
}

impl SymTable {
    pub fn new(kappa: &CurvatureVector) -> Self {
        SymTable { base: kappa.clone(), values: sigma_all(kappa) }
    }

    pub fn base(&self) -> &CurvatureVector {
        &self.base
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, k: i32) -> f64 {
        if k < 0 || k as usize >= self.values.len() {
            0.0
        } else {
            self.values[k as usize]
        }
    }

    /// Table of `(κ | S)`. Rebuilt from the reduced vector rather than
    /// divided out, which keeps full accuracy when a removed entry dominates.
    pub fn excl(&self, excl: &IndexSet) -> Result<Coeffs> {
        check_indices(self.base.len(), excl.as_slice())?;
        Ok(coeffs(self.base.as_slice(), excl.as_slice()))
    }
}

/// `n choose k` as a float; zero outside `0..=n`.
pub fn binomial(n: usize, k: i32) -> f64 {
    if k < 0 || k as usize > n {
        return 0.0;
    }
    let k = (k as usize).min(n - k as usize);
    let mut r = 1.0;
    for t in 0..k {
        r = r * (n - t) as f64 / (t + 1) as f64;
    }
    r.round()
}
