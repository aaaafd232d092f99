//! Quadratic forms built from symmetric functions of a curvature vector.
//!
//! Forms indexed by `j ≠ i` are `(n-1)×(n-1)` matrices whose rows follow the
//! increasing order of the remaining positions; [`SymMatrix::embed`] maps them
//! back to `n×n` with a zero row at `i`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};
use crate::linalg::{min_eig, MinEig, SymMatrix};
use crate::symfun::{CurvatureVector, Plain, SymEval};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FormLabel {
    Key,
    A,
    B,
    C,
    D,
    H,
    Rhs,
    LhsMinusRhs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadForm {
    pub label: FormLabel,
    pub matrix: SymMatrix,
}

impl QuadForm {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn eval(&self, xi: &[f64]) -> Result<f64> {
        if xi.len() != self.dim() {
            return Err(invalid(format!("vector length {} for a form of dimension {}", xi.len(), self.dim())));
        }
        Ok(self.matrix.quad(xi))
    }

    pub fn min_eig(&self) -> Result<MinEig> {
        min_eig(&self.matrix)
    }
}

fn check_common(n: usize, k: usize, i: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(invalid(format!("level k={k} outside 1..={n}")));
    }
    if i >= n {
        return Err(invalid(format!("index {i} out of range for dimension {n}")));
    }
    Ok(())
}

fn check_big_k(big_k: f64) -> Result<()> {
    if !(big_k.is_finite() && big_k > 0.0) {
        return Err(invalid(format!("K must be positive and finite, got {big_k}")));
    }
    Ok(())
}

/// Positions other than `i`, in increasing order.
pub fn others(n: usize, i: usize) -> Vec<usize> {
    (0..n).filter(|&j| j != i).collect()
}

/// `1 / (K κ_i σ_{k-1}(κ|i) - 1)`; a domain error unless positive.
pub fn c_const(kappa: &CurvatureVector, k: usize, i: usize, big_k: f64) -> Result<f64> {
    check_common(kappa.len(), k, i)?;
    check_big_k(big_k)?;
    c_const_with(&Plain, kappa.as_slice(), k, i, big_k)
}

fn c_const_with<E: SymEval>(e: &E, kappa: &[f64], k: usize, i: usize, big_k: f64) -> Result<f64> {
    let sii = e.sigma(k as i32 - 1, kappa, &[i]);
    let inv = big_k * kappa[i] * sii - 1.0;
    if !(inv > 0.0) {
        return Err(domain(format!("K κ_i σ_(k-1)(κ|i) - 1 = {inv} is not positive")));
    }
    Ok(1.0 / inv)
}

/// The form
/// `κ_i[K(Σ σ^{jj}ξ_j)² − Σ_{p≠q} σ^{pp,qq}ξ_pξ_q] − σ^{ii}ξ_i² + Σ_{j≠i} a_j ξ_j²`
/// with `a_j = σ^{jj} + (κ_i+κ_j)σ^{ii,jj}`.
pub fn key_matrix(kappa: &CurvatureVector, k: usize, i: usize, big_k: f64) -> Result<QuadForm> {
    key_matrix_with(&Plain, kappa.as_slice(), k, i, big_k)
}

pub fn key_matrix_with<E: SymEval>(e: &E, kappa: &[f64], k: usize, i: usize, big_k: f64) -> Result<QuadForm> {
    let n = kappa.len();
    check_common(n, k, i)?;
    check_big_k(big_k)?;
    c_const_with(e, kappa, k, i, big_k)?;
    let k = k as i32;
    let v: Vec<f64> = (0..n).map(|j| e.sigma(k - 1, kappa, &[j])).collect();
    let ki = kappa[i];
    let mut m = SymMatrix::zeros(n);
    for p in 0..n {
        for q in p + 1..n {
            let s = e.sigma(k - 2, kappa, &[p, q]);
            m.set(p, q, ki * big_k * v[p] * v[q] - ki * s);
        }
        let d = if p == i {
            -v[i]
        } else {
            v[p] + (ki + kappa[p]) * e.sigma(k - 2, kappa, &[i, p])
        };
        m.set(p, p, ki * big_k * v[p] * v[p] + d);
    }
    Ok(QuadForm { label: FormLabel::Key, matrix: m })
}

/// The four `(n-1)×(n-1)` forms entering the reduction of the key form.
#[derive(Clone, Debug)]
pub struct Abcd {
    pub a: QuadForm,
    pub b: QuadForm,
    pub c: QuadForm,
    pub d: QuadForm,
    /// Original positions of the rows.
    pub positions: Vec<usize>,
}

pub fn abcd_matrices(kappa: &CurvatureVector, k: usize, i: usize) -> Result<Abcd> {
    abcd_with(&Plain, kappa.as_slice(), k, i)
}

pub fn abcd_with<E: SymEval>(e: &E, kappa: &[f64], k: usize, i: usize) -> Result<Abcd> {
    let n = kappa.len();
    check_common(n, k, i)?;
    let k = k as i32;
    let pos = others(n, i);
    let m = pos.len();
    let (mut a, mut b, mut c, mut d) =
        (SymMatrix::zeros(m), SymMatrix::zeros(m), SymMatrix::zeros(m), SymMatrix::zeros(m));
    let s1: Vec<f64> = pos.iter().map(|&j| e.sigma(k - 1, kappa, &[i, j])).collect();
    for (x, &p) in pos.iter().enumerate() {
        let t = e.coeffs(kappa, &[i, p]);
        let (s0, sm2) = (t.get(k), t.get(k - 2));
        a.set(x, x, sm2 * sm2);
        b.set(x, x, 2.0 * sm2);
        c.set(x, x, kappa[p] * kappa[p] * sm2 * sm2 - 2.0 * s0 * sm2);
        d.set(x, x, s1[x] * s1[x]);
        for (y, &q) in pos.iter().enumerate().skip(x + 1) {
            let t = e.coeffs(kappa, &[i, p, q]);
            let (s0, sm1, sm2, sm3) = (t.get(k), t.get(k - 1), t.get(k - 2), t.get(k - 3));
            a.set(x, y, sm2 * sm2 - sm1 * sm3);
            b.set(x, y, -sm2);
            c.set(x, y, s0 * sm2 - sm1 * sm1);
            d.set(x, y, s1[x] * s1[y]);
        }
    }
    Ok(Abcd {
        a: QuadForm { label: FormLabel::A, matrix: a },
        b: QuadForm { label: FormLabel::B, matrix: b },
        c: QuadForm { label: FormLabel::C, matrix: c },
        d: QuadForm { label: FormLabel::D, matrix: d },
        positions: pos,
    })
}

/// `(1/c)[α A + σ_k B + C − c D]` with `α = κ_i²` or `α = 1`.
pub fn rhs_combination(
    kappa: &CurvatureVector,
    k: usize,
    i: usize,
    big_k: f64,
    with_kappa_i_sq: bool,
) -> Result<QuadForm> {
    rhs_with(&Plain, kappa.as_slice(), k, i, big_k, with_kappa_i_sq)
}

pub fn rhs_with<E: SymEval>(
    e: &E,
    kappa: &[f64],
    k: usize,
    i: usize,
    big_k: f64,
    with_kappa_i_sq: bool,
) -> Result<QuadForm> {
    check_common(kappa.len(), k, i)?;
    check_big_k(big_k)?;
    let c = c_const_with(e, kappa, k, i, big_k)?;
    let f = abcd_with(e, kappa, k, i)?;
    let alpha = if with_kappa_i_sq { kappa[i] * kappa[i] } else { 1.0 };
    let sk = e.sigma(k as i32, kappa, &[]);
    let m = f
        .a
        .matrix
        .scale(alpha)
        .add_scaled(&f.b.matrix, sk)
        .add_scaled(&f.c.matrix, 1.0)
        .add_scaled(&f.d.matrix, -c)
        .scale(1.0 / c);
    Ok(QuadForm { label: FormLabel::Rhs, matrix: m })
}

/// Difference between the key form and the reduced right-hand side, as an
/// `n×n` form.
///
/// With `with_kappa_i_sq` the key form is first multiplied by
/// `κ_i K (σ^{ii})² − σ^{ii}`, which makes the difference an exact rank-one
/// square. Without it the key form is compared unscaled against
/// `(1/c)[A + σ_k B + C − c D]`.
pub fn lhs_minus_rhs(kappa: &CurvatureVector, k: usize, i: usize, big_k: f64, with_kappa_i_sq: bool) -> Result<QuadForm> {
    lhs_minus_rhs_with(&Plain, kappa.as_slice(), k, i, big_k, with_kappa_i_sq)
}

pub fn lhs_minus_rhs_with<E: SymEval>(
    e: &E,
    kappa: &[f64],
    k: usize,
    i: usize,
    big_k: f64,
    with_kappa_i_sq: bool,
) -> Result<QuadForm> {
    let key = key_matrix_with(e, kappa, k, i, big_k)?;
    let rhs = rhs_with(e, kappa, k, i, big_k, with_kappa_i_sq)?;
    let lhs = if with_kappa_i_sq {
        let sii = e.sigma(k as i32 - 1, kappa, &[i]);
        let c = c_const_with(e, kappa, k, i, big_k)?;
        key.matrix.scale(sii / c)
    } else {
        key.matrix
    };
    Ok(QuadForm { label: FormLabel::LhsMinusRhs, matrix: lhs.add_scaled(&rhs.matrix.embed(i), -1.0) })
}

fn h_prelude(kappa: &CurvatureVector, i: usize) -> Result<(Vec<f64>, i32, f64)> {
    let n = kappa.len();
    if n < 5 {
        return Err(invalid(format!("dimension {n} below 5")));
    }
    if i >= n {
        return Err(invalid(format!("index {i} out of range for dimension {n}")));
    }
    let bar = kappa.without(&[i]);
    let nn = n as i32;
    let c = crate::symfun::coeffs(&bar, &[]);
    let lo = c.get(nn - 5);
    if lo == 0.0 {
        return Err(domain("σ_(n-5)(κ|i) vanishes"));
    }
    Ok((bar, nn, 2.0 * c.get(nn - 3) / (3.0 * lo)))
}

/// The form with diagonal `σ_{n-3}(κ̄²|j)` and off-diagonal
/// `r σ_{n-5}(κ̄|pq)σ_{n-3}(κ̄|pq) − σ²_{n-3}(κ̄|pq)`, where `κ̄ = (κ|i)` and
/// `r = 2σ_{n-3}(κ̄)/(3σ_{n-5}(κ̄))`.
pub fn h_matrix(kappa: &CurvatureVector, i: usize) -> Result<QuadForm> {
    let (bar, nn, r) = h_prelude(kappa, i)?;
    let sq: Vec<f64> = bar.iter().map(|x| x * x).collect();
    let m = bar.len();
    let matrix = SymMatrix::from_fn(m, |p, q| {
        if p == q {
            crate::symfun::coeffs(&sq, &[p]).get(nn - 3)
        } else {
            let t = crate::symfun::coeffs(&bar, &[p, q]);
            r * t.get(nn - 5) * t.get(nn - 3) - t.get(nn - 3).powi(2)
        }
    });
    Ok(QuadForm { label: FormLabel::H, matrix })
}

/// Diagonal of the lower bound for [`h_matrix`]:
/// `r [σ_{n-5}(κ̄|j)σ_{n-3}(κ̄|j) − 4σ_{n-6}(κ̄|j)σ_{n-2}(κ̄|j) − (4/3)σ_{n-5}(κ̄)σ_{n-3}(κ̄)]`.
pub fn h_lower_bound(kappa: &CurvatureVector, i: usize) -> Result<Vec<f64>> {
    let (bar, nn, r) = h_prelude(kappa, i)?;
    let full = crate::symfun::coeffs(&bar, &[]);
    Ok((0..bar.len())
        .map(|j| {
            let t = crate::symfun::coeffs(&bar, &[j]);
            r * (t.get(nn - 5) * t.get(nn - 3)
                - 4.0 * t.get(nn - 6) * t.get(nn - 2)
                - 4.0 / 3.0 * full.get(nn - 5) * full.get(nn - 3))
        })
        .collect())
}

/// `(e^a − e^b)/(a − b) · e^{-shift}`, with the limit `e^{a-shift}` at `a = b`.
pub fn exp_divided_difference(a: f64, b: f64, shift: f64) -> f64 {
    let hi = a.max(b);
    let d = (a - b).abs();
    let f = if d < 1e-6 {
        1.0 - d / 2.0 + d * d / 6.0 - d * d * d / 24.0
    } else {
        -(-d).exp_m1() / d
    };
    (hi - shift).exp() * f
}

/// The five terms of the third-order test-function inequality, each divided by
/// `e^{scale_log}` with `scale_log = max κ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFnTerms {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub scale_log: f64,
    pub log_p: f64,
    /// Set when the largest entry is at most 1, where the expansion is not meaningful.
    pub warning: bool,
}

impl TestFnTerms {
    pub fn total(&self) -> f64 {
        self.a + self.b + self.c + self.d - self.e
    }
}

pub fn testfn_terms(kappa: &CurvatureVector, k: usize, i: usize, h: &[f64], big_k: f64) -> Result<TestFnTerms> {
    let n = kappa.len();
    check_common(n, k, i)?;
    check_big_k(big_k)?;
    if h.len() != n || h.iter().any(|x| !x.is_finite()) {
        return Err(invalid("h must be a finite vector of the same length as κ"));
    }
    let ks = kappa.as_slice();
    let k = k as i32;
    let top = kappa.max();
    let w: Vec<f64> = ks.iter().map(|x| (x - top).exp()).collect();
    let wsum: f64 = w.iter().sum();
    let log_p = top + wsum.ln();
    if !(log_p > 0.0) {
        return Err(domain(format!("log P = {log_p} is not positive")));
    }
    let v: Vec<f64> = (0..n).map(|l| crate::symfun::coeffs(ks, &[l]).get(k - 1)).collect();
    let sk_i: f64 = v.iter().zip(h).map(|(a, b)| a * b).sum();
    let mut mixed = 0.0;
    for p in 0..n {
        for q in 0..n {
            if p != q {
                mixed += crate::symfun::coeffs(ks, &[p, q]).get(k - 2) * h[p] * h[q];
            }
        }
    }
    let a = w[i] * (big_k * sk_i * sk_i - mixed);
    let mut b = 0.0;
    let mut d = 0.0;
    for l in (0..n).filter(|&l| l != i) {
        let sil = crate::symfun::coeffs(ks, &[i, l]).get(k - 2);
        b += 2.0 * sil * w[l] * h[l] * h[l];
        d += 2.0 * v[l] * exp_divided_difference(ks[l], ks[i], top) * h[l] * h[l];
    }
    let weighted_sq: f64 = w.iter().zip(h).map(|(wl, hl)| wl * hl * hl).sum();
    let c = v[i] * weighted_sq;
    let p_i: f64 = w.iter().zip(h).map(|(wl, hl)| wl * hl).sum();
    let e = (1.0 + log_p) / (wsum * log_p) * v[i] * p_i * p_i;
    Ok(TestFnTerms { a, b, c, d, e, scale_log: top, log_p, warning: top <= 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(n: usize) -> CurvatureVector {
        CurvatureVector::new(vec![1.0; n]).unwrap()
    }

    #[test]
    fn key_on_all_ones() {
        let m = key_matrix(&ones(5), 3, 0, 1.0).unwrap().matrix;
        assert_eq!(m.get(0, 0), 30.0);
        for j in 1..5 {
            assert_eq!(m.get(j, j), 48.0);
        }
        for p in 0..5 {
            for q in 0..5 {
                if p != q {
                    assert_eq!(m.get(p, q), 33.0);
                }
            }
        }
    }

    #[test]
    fn b_on_all_ones() {
        let f = abcd_matrices(&ones(5), 3, 0).unwrap();
        let b = &f.b.matrix;
        assert_eq!(b.dim(), 4);
        for p in 0..4 {
            for q in 0..4 {
                assert_eq!(b.get(p, q), if p == q { 6.0 } else { -2.0 });
            }
        }
    }

    #[test]
    fn key_rejects_nonpositive_c() {
        let k = CurvatureVector::new(vec![0.1, 0.1, 0.1]).unwrap();
        assert!(matches!(key_matrix(&k, 2, 0, 1.0), Err(crate::Error::Domain(_))));
        assert!(matches!(key_matrix(&k, 2, 3, 1.0), Err(crate::Error::InvalidInput(_))));
    }

    #[test]
    fn divided_difference_limits() {
        let x = exp_divided_difference(2.0, 2.0, 0.0);
        assert!((x - 2f64.exp()).abs() < 1e-15 * x);
        let y = exp_divided_difference(2.0, 2.0 + 1e-7, 0.0);
        let direct = ((2.0f64 + 1e-7).exp() - 2f64.exp()) / 1e-7;
        assert!((y - direct).abs() < 1e-6 * y);
        let z = exp_divided_difference(-3.0, 1.0, 1.0);
        assert!((z - (1.0 - (-4f64).exp()) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn testfn_warns_on_small_scale() {
        let k = CurvatureVector::new(vec![1.0, 0.5, 0.2, 0.1, 0.05]).unwrap();
        let t = testfn_terms(&k, 3, 0, &[1.0, 0.0, 0.0, 0.0, 0.0], 10.0).unwrap();
        assert!(t.warning);
    }
}
