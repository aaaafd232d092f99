//! Dense symmetric matrices and a cyclic Jacobi eigensolver.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::symfun::MAX_DIM;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix { n, data: vec![0.0; n * n] }
    }

    /// Builds from `f(i, j)` evaluated on the upper triangle.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Rows must form a square matrix; the upper triangle is mirrored.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(invalid("matrix is not square"));
        }
        Ok(SymMatrix::from_fn(n, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n.max(1)).map(|r| r.to_vec()).collect()
    }

    pub fn frobenius(&self) -> f64 {
        let scale = self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if scale == 0.0 || !scale.is_finite() {
            return scale;
        }
        scale * self.data.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `ξᵀ M ξ`.
    pub fn quad(&self, xi: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            s += xi[i] * row.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>();
        }
        s
    }

    /// `self + t * other`.
    pub fn add_scaled(&self, other: &SymMatrix, t: f64) -> SymMatrix {
        assert_eq!(self.n, other.n);
        SymMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + t * b).collect(),
        }
    }

    pub fn scale(&self, t: f64) -> SymMatrix {
        SymMatrix { n: self.n, data: self.data.iter().map(|a| a * t).collect() }
    }

    pub fn add_diag(&self, d: &[f64]) -> SymMatrix {
        let mut m = self.clone();
        for (i, x) in d.iter().enumerate() {
            m.data[i * self.n + i] += x;
        }
        m
    }

    /// Inserts a zero row and column at position `at`.
    pub fn embed(&self, at: usize) -> SymMatrix {
        let n = self.n + 1;
        let map = |j: usize| if j < at { Some(j) } else if j == at { None } else { Some(j - 1) };
        SymMatrix::from_fn(n, |p, q| match (map(p), map(q)) {
            (Some(a), Some(b)) => self.get(a, b),
            _ => 0.0,
        })
    }
}

#[derive(Clone, Debug)]
pub struct Eigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// `vectors[j]` is the unit eigenvector for `values[j]`.
    pub vectors: Vec<Vec<f64>>,
}

const MAX_SWEEPS: usize = 80;

/// Full eigendecomposition by cyclic Jacobi rotations.
pub fn sym_eigen(m: &SymMatrix) -> Result<Eigen> {
    let n = m.dim();
    if n > MAX_DIM {
        return Err(invalid(format!("dimension {n} exceeds {MAX_DIM}")));
    }
    if !m.is_finite() {
        return Err(invalid("matrix has non-finite entries"));
    }
    let mut a = m.data.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let fro = m.frobenius();
    let target = 1e-15 * fro;
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(a[p * n + q].abs());
            }
        }
        if off <= target || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_infinite() {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + theta.hypot(1.0))
                };
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                for r in 0..n {
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    a[r * n + p] = c * arp - s * arq;
                    a[r * n + q] = s * arp + c * arq;
                }
                for r in 0..n {
                    let apr = a[p * n + r];
                    let aqr = a[q * n + r];
                    a[p * n + r] = c * apr - s * aqr;
                    a[q * n + r] = s * apr + c * aqr;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for r in 0..n {
                    let vrp = v[r * n + p];
                    let vrq = v[r * n + q];
                    v[r * n + p] = c * vrp - s * vrq;
                    v[r * n + q] = s * vrp + c * vrq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[x * n + x].total_cmp(&a[y * n + y]));
    Ok(Eigen {
        values: order.iter().map(|&j| a[j * n + j]).collect(),
        vectors: order.iter().map(|&j| (0..n).map(|r| v[r * n + j]).collect()).collect(),
    })
}

#[derive(Clone, Debug)]
pub struct MinEig {
    pub value: f64,
    pub vector: Vec<f64>,
    pub frobenius: f64,
}

impl MinEig {
    /// `λ_min / ‖M‖_F`, zero for the zero matrix.
    pub fn relative(&self) -> f64 {
        if self.frobenius == 0.0 {
            0.0
        } else {
            self.value / self.frobenius
        }
    }

    pub fn is_psd(&self, eps: f64) -> bool {
        self.value >= -eps * self.frobenius
    }
}

pub fn min_eig(m: &SymMatrix) -> Result<MinEig> {
    if m.dim() == 0 {
        return Err(invalid("empty matrix"));
    }
    let e = sym_eigen(m)?;
    Ok(MinEig { value: e.values[0], vector: e.vectors[0].clone(), frobenius: m.frobenius() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_and_rank_one() {
        let m = SymMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        let e = min_eig(&m).unwrap();
        assert_eq!(e.value, -1.0);
        assert!(!e.is_psd(1e-8));
        let ones = SymMatrix::from_fn(4, |_, _| 1.0);
        let e = sym_eigen(&ones).unwrap();
        assert!(e.values[0].abs() < 1e-14);
        assert!((e.values[3] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_nan() {
        let m = SymMatrix::from_rows(&[vec![1.0, f64::NAN], vec![f64::NAN, 1.0]]).unwrap();
        assert!(min_eig(&m).is_err());
    }

    #[test]
    fn embed_inserts_zero_row() {
        let m = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let e = m.embed(1);
        assert_eq!(e.rows(), vec![vec![1.0, 0.0, 2.0], vec![0.0, 0.0, 0.0], vec![2.0, 0.0, 3.0]]);
    }
}
