//! Five-way split of `Γ_{n-2}` used by the `k = n-2` argument.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::symfun::{coeffs, CurvatureVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    A,
    B1,
    B2,
    B3,
    C,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseLabel {
    pub primary: Case,
    /// Every case whose defining conditions hold, in listing order.
    pub all: Vec<Case>,
}

impl CaseLabel {
    pub fn contains(&self, c: Case) -> bool {
        self.all.contains(&c)
    }
}

/// `1 / (32 n (n-2))`.
pub fn delta0(n: usize) -> f64 {
    1.0 / (32.0 * n as f64 * (n as f64 - 2.0))
}

/// Classifies a descending `κ ∈ Γ_{n-2}` relative to position `i`.
///
/// With `s_i = σ_{n-2}(κ|i)`:
/// * A: `s_i ≤ 0` and `κ_{n-1} ≤ 0`;
/// * B1, B2, B3: `s_i ≤ 0` and `κ_n < 0 < κ_{n-1}`, split by
///   `κ_i σ_{n-3}(κ|i)` against `(1+δ_0)σ_{n-2}` and `κ_1⋯κ_{n-2}` against `2(n-2)σ_{n-2}`;
/// * C: `s_i ≥ 0`.
///
/// The primary label is C whenever `s_i ≥ 0`, otherwise the first that applies.
pub fn classify_case(kappa: &CurvatureVector, i: usize) -> Result<CaseLabel> {
    let n = kappa.len();
    if n < 5 {
        return Err(invalid(format!("dimension {n} below 5")));
    }
    if i >= n {
        return Err(invalid(format!("index {i} out of range for dimension {n}")));
    }
    if !kappa.is_sorted_desc() {
        return Err(invalid("vector is not sorted in descending order"));
    }
    let v = kappa.as_slice();
    let nn = n as i32;
    let full = coeffs(v, &[]);
    let sig = full.get(nn - 2);
    let excl = coeffs(v, &[i]);
    let s_i = excl.get(nn - 2);
    let lead = v[i] * excl.get(nn - 3);
    let prod: f64 = v[..n - 2].iter().product();
    let d0 = delta0(n);

    let mut all = Vec::new();
    if s_i <= 0.0 {
        if v[n - 2] <= 0.0 {
            all.push(Case::A);
        }
        if v[n - 1] < 0.0 && v[n - 2] > 0.0 {
            let b1 = lead >= (1.0 + d0) * sig;
            let b2 = prod >= 2.0 * (n as f64 - 2.0) * sig;
            if b1 {
                all.push(Case::B1);
            }
            if b2 {
                all.push(Case::B2);
            }
            if lead <= (1.0 + d0) * sig && !b2 {
                all.push(Case::B3);
            }
        }
    }
    if s_i >= 0.0 {
        all.push(Case::C);
    }
    let primary = if s_i >= 0.0 { Case::C } else { all.first().copied().unwrap_or(Case::C) };
    if all.is_empty() {
        all.push(primary);
    }
    Ok(CaseLabel { primary, all })
}
