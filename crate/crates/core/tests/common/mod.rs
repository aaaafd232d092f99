#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// σ_k by summing products over all k-subsets.
pub fn sigma_enum(v: &[f64], k: i32) -> f64 {
    if k < 0 || k as usize > v.len() {
        return 0.0;
    }
    let n = v.len();
    let mut total = 0.0;
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as i32 != k {
            continue;
        }
        let mut p = 1.0;
        for (j, x) in v.iter().enumerate() {
            if mask >> j & 1 == 1 {
                p *= x;
            }
        }
        total += p;
    }
    total
}

/// Same sum, with the listed positions removed first.
pub fn sigma_enum_excl(v: &[f64], k: i32, excl: &[usize]) -> f64 {
    let r: Vec<f64> = v.iter().enumerate().filter(|(j, _)| !excl.contains(j)).map(|(_, x)| *x).collect();
    sigma_enum(&r, k)
}

/// Size of the sum in absolute value, used as the error scale.
pub fn magnitude(v: &[f64], k: i32, excl: &[usize]) -> f64 {
    let a: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    sigma_enum_excl(&a, k, excl)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_vec(r: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-scale..scale)).collect()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
