mod common;

use common::*;
use garding_core::symfun::{binomial, coeffs, coeffs_compensated, SymTable};
use garding_core::{sample_gamma, sigma, sigma_all, sigma_d1, sigma_d2, sigma_excl, CurvatureVector, Error, IndexSet, SampleSpec};
use proptest::prelude::*;

fn cv(v: &[f64]) -> CurvatureVector {
    CurvatureVector::new(v.to_vec()).unwrap()
}

#[test]
fn sigma_examples() {
    assert_eq!(sigma(2, &cv(&[1.0, 1.0, 1.0])), 3.0);
    assert_eq!(sigma(4, &cv(&[1.0, 1.0, 1.0])), 0.0);
    assert_eq!(sigma(2, &cv(&[1.0, 2.0, 3.0])), 11.0);
    assert_eq!(sigma(0, &cv(&[4.0, -2.0])), 1.0);
    assert_eq!(sigma(-1, &cv(&[4.0, -2.0])), 0.0);
}

#[test]
fn sigma_all_examples() {
    assert_eq!(sigma_all(&cv(&[1.0, 2.0])), vec![1.0, 3.0, 2.0]);
    assert_eq!(sigma_all(&cv(&[0.0, 0.0, 0.0])), vec![1.0, 0.0, 0.0, 0.0]);
    assert_eq!(sigma_all(&cv(&[1.0, -1.0])), vec![1.0, 0.0, -1.0]);
}

#[test]
fn sigma_excl_examples() {
    let k = cv(&[1.0, 2.0, 3.0]);
    assert_eq!(sigma_excl(1, &k, &IndexSet::new(&[1], 3).unwrap()).unwrap(), 4.0);
    assert_eq!(sigma_excl(2, &k, &IndexSet::new(&[0, 2], 3).unwrap()).unwrap(), 0.0);
    assert_eq!(sigma_excl(0, &k, &IndexSet::new(&[0, 1, 2], 3).unwrap()).unwrap(), 1.0);
    assert_eq!(sigma_excl(2, &k, &IndexSet::empty()).unwrap(), 11.0);
}

#[test]
fn derivative_examples() {
    let k = cv(&[1.0, 2.0, 3.0]);
    assert_eq!(sigma_d1(2, &k, 0).unwrap(), 5.0);
    assert_eq!(sigma_d1(1, &k, 2).unwrap(), 1.0);
    assert_eq!(sigma_d1(2, &cv(&[1.0, 1.0, 1.0]), 2).unwrap(), 2.0);
    assert_eq!(sigma_d2(2, &k, 0, 1).unwrap(), 1.0);
    assert_eq!(sigma_d2(2, &k, 1, 1).unwrap(), 0.0);
    assert_eq!(sigma_d2(3, &cv(&[1.0, 2.0, 3.0, 4.0]), 0, 3).unwrap(), 5.0);
}

#[test]
fn bad_inputs() {
    assert!(matches!(CurvatureVector::new(vec![1.0, f64::NAN]), Err(Error::InvalidInput(_))));
    assert!(matches!(CurvatureVector::new(vec![f64::INFINITY]), Err(Error::InvalidInput(_))));
    assert!(IndexSet::new(&[0, 0], 3).is_err());
    assert!(IndexSet::new(&[3], 3).is_err());
    assert!(IndexSet::new(&[0, 1, 2, 3], 5).is_err());
    let k = cv(&[1.0, 2.0, 3.0]);
    assert!(sigma_d1(1, &k, 3).is_err());
    assert!(sigma_d2(1, &k, 0, 5).is_err());
    assert!(sigma_excl(1, &k, &IndexSet::new(&[3], 4).unwrap()).is_err());
}

#[test]
fn binomial_counts() {
    assert_eq!(binomial(5, 2), 10.0);
    assert_eq!(binomial(5, 0), 1.0);
    assert_eq!(binomial(5, 6), 0.0);
    assert_eq!(binomial(5, -1), 0.0);
    for n in 1..12 {
        let ones = cv(&vec![1.0; n]);
        for k in 0..=n as i32 {
            assert_eq!(sigma(k, &ones), binomial(n, k));
        }
    }
}

#[test]
fn agrees_with_subset_enumeration() {
    let mut r = rng(11);
    for n in 1..=10 {
        for _ in 0..40 {
            let v = rand_vec(&mut r, n, 5.0);
            let k = cv(&v);
            let all = sigma_all(&k);
            for m in -1..=n as i32 + 1 {
                let want = sigma_enum(&v, m);
                let got = sigma(m, &k);
                assert!((got - want).abs() <= 1e-12 * (1.0 + magnitude(&v, m, &[])), "n={n} m={m}");
                if (0..=n as i32).contains(&m) {
                    assert_eq!(all[m as usize], got);
                }
            }
            let sets: Vec<Vec<usize>> = match n {
                1 => vec![vec![0]],
                2 => vec![vec![1], vec![0, 1]],
                _ => vec![vec![n - 1], vec![0, n / 2], vec![0, 1, n - 1]],
            };
            for s in sets {
                let set = IndexSet::new(&s, n).unwrap();
                for m in 0..=n as i32 {
                    let want = sigma_enum_excl(&v, m, &s);
                    let got = sigma_excl(m, &k, &set).unwrap();
                    assert!((got - want).abs() <= 1e-12 * (1.0 + magnitude(&v, m, &s)));
                }
            }
        }
    }
}

#[test]
fn table_matches_direct() {
    let mut r = rng(3);
    let v = rand_vec(&mut r, 8, 3.0);
    let k = cv(&v);
    let t = SymTable::new(&k);
    assert_eq!(t.values()[0], 1.0);
    for m in 0..=8 {
        assert_eq!(t.get(m), sigma(m, &k));
    }
    let set = IndexSet::new(&[2, 5], 8).unwrap();
    let ex = t.excl(&set).unwrap();
    for m in 0..=6 {
        assert_eq!(ex.get(m), sigma_excl(m, &k, &set).unwrap());
    }
}

#[test]
fn compensated_is_at_least_as_close() {
    // Heavy cancellation: large entries of both signs around a small remainder.
    let v = [1e8, -1e8 + 1.0, 3.0, -2.0, 1e-3];
    let exact = sigma_enum(&v, 2);
    let plain = coeffs(&v, &[]).get(2);
    let comp = coeffs_compensated(&v, &[]).get(2);
    assert!((comp - exact).abs() <= (plain - exact).abs() + 1e-6);
    let mut r = rng(5);
    for _ in 0..50 {
        let v = rand_vec(&mut r, 9, 4.0);
        for m in 0..=9 {
            let a = coeffs(&v, &[1]).get(m);
            let b = coeffs_compensated(&v, &[1]).get(m);
            assert!((a - b).abs() <= 1e-12 * (1.0 + magnitude(&v, m, &[1])));
        }
    }
}

fn vec_strategy() -> impl Strategy<Value = Vec<f64>> {
    (1usize..=10).prop_flat_map(|n| prop::collection::vec(-10.0f64..10.0, n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn recursion_in_one_entry(v in vec_strategy(), pick in 0usize..10) {
        let n = v.len();
        let i = pick % n;
        let k = cv(&v);
        let set = IndexSet::new(&[i], n).unwrap();
        for m in 0..=n as i32 {
            let lhs = sigma(m, &k);
            let rhs = sigma_excl(m, &k, &set).unwrap() + v[i] * sigma_excl(m - 1, &k, &set).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-11 * (1.0 + magnitude(&v, m, &[])));
        }
    }

    #[test]
    fn sums_over_positions(v in vec_strategy()) {
        let n = v.len();
        let k = cv(&v);
        for m in 0..=n as i32 {
            let mut plain = 0.0;
            let mut weighted = 0.0;
            for i in 0..n {
                let set = IndexSet::new(&[i], n).unwrap();
                plain += sigma_excl(m, &k, &set).unwrap();
                weighted += v[i] * sigma_excl(m - 1, &k, &set).unwrap();
            }
            let scale = 1.0 + n as f64 * magnitude(&v, m, &[]);
            prop_assert!((plain - (n as f64 - m as f64) * sigma(m, &k)).abs() <= 1e-11 * scale);
            prop_assert!((weighted - m as f64 * sigma(m, &k)).abs() <= 1e-11 * scale);
        }
    }

    #[test]
    fn homogeneous_of_degree_k(v in vec_strategy(), ti in 0usize..3) {
        let t = [-2.0, 0.5, 10.0][ti];
        let k = cv(&v);
        let kt = k.scaled(t);
        for m in 0..=v.len() as i32 {
            let want = t.powi(m) * sigma(m, &k);
            let scale = 1.0 + t.abs().powi(m) * magnitude(&v, m, &[]);
            prop_assert!((sigma(m, &kt) - want).abs() <= 1e-11 * scale);
        }
    }

    #[test]
    fn permutation_invariant(v in vec_strategy(), rot in 0usize..10) {
        let n = v.len();
        let mut w = v.clone();
        w.rotate_left(rot % n);
        w.reverse();
        let (a, b) = (sigma_all(&cv(&v)), sigma_all(&cv(&w)));
        for m in 0..=n {
            prop_assert!((a[m] - b[m]).abs() <= 1e-12 * (1.0 + magnitude(&v, m as i32, &[])));
        }
    }

    #[test]
    fn first_derivative_ordering_on_cone(n in 3usize..=8, kk in 1usize..=8, seed in any::<u64>()) {
        let k = 1 + (kk - 1) % n;
        let spec = SampleSpec { n, k, kappa1_target: 50.0, near_top_index: None, sigma_k_range: None, seed };
        let x = sample_gamma(&spec).unwrap();
        // descending entries give ascending σ_{k-1}(κ|i)
        let d: Vec<f64> = (0..n).map(|i| sigma_d1(k as i32, &x, i).unwrap()).collect();
        for i in 0..n - 1 {
            let tol = 1e-10 * (1.0 + magnitude(x.as_slice(), k as i32 - 1, &[]));
            prop_assert!(d[i] <= d[i + 1] + tol, "{:?} {:?}", x.as_slice(), d);
            prop_assert!(d[i] > 0.0);
        }
    }
}
