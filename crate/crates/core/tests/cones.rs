mod common;

use common::*;
use rand::Rng;
use garding_core::cones::{in_cone, near_top, MAX_ATTEMPTS};
use garding_core::rng::stream;
use garding_core::{
    draw_gamma, in_gamma, normalize_sigma_k, sample_gamma, sigma, sigma_excl, tail_sum_check, ConeQuery,
    ConeVariant, CurvatureVector, Error, IndexSet, SampleSpec,
};

fn cv(v: &[f64]) -> CurvatureVector {
    CurvatureVector::new(v.to_vec()).unwrap()
}

fn q(n: usize, k: usize, variant: ConeVariant) -> ConeQuery {
    ConeQuery { n, k, variant }
}

fn spec(n: usize, k: usize, t: f64, seed: u64) -> SampleSpec {
    SampleSpec { n, k, kappa1_target: t, near_top_index: None, sigma_k_range: None, seed }
}

#[test]
fn membership_examples() {
    assert!(in_gamma(&q(3, 3, ConeVariant::Open), &cv(&[1.0, 1.0, 1.0])).unwrap());
    let b = cv(&[2.0, 2.0, -1.0]);
    assert!(!in_gamma(&q(3, 2, ConeVariant::Open), &b).unwrap());
    assert!(in_gamma(&q(3, 2, ConeVariant::Barred), &b).unwrap());
    assert!(!in_gamma(&q(2, 1, ConeVariant::Open), &cv(&[1.0, -1.0])).unwrap());
    assert!(in_gamma(&q(2, 1, ConeVariant::Barred), &cv(&[1.0, -1.0])).unwrap());
}

#[test]
fn membership_errors() {
    assert!(in_gamma(&q(4, 2, ConeVariant::Open), &cv(&[1.0, 1.0, 1.0])).is_err());
    assert!(in_gamma(&q(3, 0, ConeVariant::Open), &cv(&[1.0, 1.0, 1.0])).is_err());
    assert!(in_gamma(&q(3, 4, ConeVariant::Open), &cv(&[1.0, 1.0, 1.0])).is_err());
}

#[test]
fn tail_sum_examples() {
    assert_eq!(tail_sum_check(2, &cv(&[3.0, 1.0, 1.0])).unwrap(), 2.0);
    assert_eq!(tail_sum_check(2, &cv(&[5.0, 2.0, -1.0])).unwrap(), 1.0);
    assert_eq!(tail_sum_check(3, &cv(&[5.0, 2.0, 0.5])).unwrap(), 0.5);
    assert!(tail_sum_check(2, &cv(&[1.0, 3.0, 1.0])).is_err());
}

#[test]
fn normalize_examples() {
    let out = normalize_sigma_k(&cv(&[1.0, 1.0, 1.0]), 2, 12.0).unwrap();
    for x in out.as_slice() {
        assert!((x - 2.0).abs() < 1e-14);
    }
    let out = normalize_sigma_k(&cv(&[2.0, 2.0, 2.0]), 3, 1.0).unwrap();
    for x in out.as_slice() {
        assert!((x - 1.0).abs() < 1e-14);
    }
    let k = cv(&[4.0, 3.0, -1.0]);
    let s2 = sigma(2, &k);
    assert_eq!(normalize_sigma_k(&k, 2, s2).unwrap(), k);
    assert!(matches!(normalize_sigma_k(&cv(&[1.0, -1.0]), 2, 1.0), Err(Error::Domain(_))));
}

#[test]
fn sampler_hits_target() {
    let mut s = spec(5, 3, 100.0, 7);
    let x = sample_gamma(&s).unwrap();
    assert!(x.is_sorted_desc());
    assert!((99.0..=101.0).contains(&x[0]));
    assert!(in_gamma(&q(5, 3, ConeVariant::Open), &x).unwrap());

    s.sigma_k_range = Some((1.0 - 1e-9, 1.0 + 1e-9));
    let x = sample_gamma(&s).unwrap();
    assert!((sigma(3, &x) - 1.0).abs() <= 1e-9);
    assert!((99.0..=101.0).contains(&x[0]));

    let s = SampleSpec { near_top_index: Some(1), ..spec(5, 3, 1e4, 7) };
    let x = sample_gamma(&s).unwrap();
    assert!(x[1] > x[0] - x[0].sqrt() / 5.0);
    assert!(near_top(x.as_slice(), 1));
}

#[test]
fn sampler_is_deterministic() {
    let s = SampleSpec { sigma_k_range: Some((1.0, 10.0)), near_top_index: Some(0), ..spec(6, 4, 1e3, 99) };
    assert_eq!(sample_gamma(&s).unwrap(), sample_gamma(&s).unwrap());
    let mut a = stream(&[1, 2, 3]);
    let mut b = stream(&[1, 2, 3]);
    for _ in 0..5 {
        assert_eq!(draw_gamma(&s, &mut a).unwrap(), draw_gamma(&s, &mut b).unwrap());
    }
    let other = SampleSpec { seed: 100, ..s.clone() };
    assert_ne!(sample_gamma(&s).unwrap(), sample_gamma(&other).unwrap());
}

#[test]
fn sampler_rejects_bad_specs() {
    assert!(matches!(sample_gamma(&spec(0, 1, 1.0, 0)), Err(Error::InvalidInput(_))));
    assert!(matches!(sample_gamma(&spec(3, 4, 1.0, 0)), Err(Error::InvalidInput(_))));
    assert!(matches!(sample_gamma(&spec(3, 2, -1.0, 0)), Err(Error::InvalidInput(_))));
    let s = SampleSpec { near_top_index: Some(3), ..spec(3, 2, 1.0, 0) };
    assert!(matches!(sample_gamma(&s), Err(Error::InvalidInput(_))));
    let s = SampleSpec { sigma_k_range: Some((2.0, 1.0)), ..spec(3, 2, 1.0, 0) };
    assert!(matches!(sample_gamma(&s), Err(Error::InvalidInput(_))));
}

#[test]
fn unreachable_constraint_exhausts() {
    // all entries are at most about 1, so σ_3 cannot reach 100
    let s = SampleSpec { sigma_k_range: Some((100.0, 100.0)), ..spec(3, 3, 1.0, 0) };
    match sample_gamma(&s) {
        Err(Error::SamplingExhausted { attempts, .. }) => assert_eq!(attempts, MAX_ATTEMPTS),
        other => panic!("expected exhaustion, got {other:?}"),
    }
}

#[test]
fn cone_properties_on_samples() {
    for n in 2..=9 {
        for k in 1..=n {
            for seed in 0..30u64 {
                let s = spec(n, k, [1.0, 30.0, 1e4][seed as usize % 3], seed);
                let x = sample_gamma(&s).unwrap();
                let v = x.as_slice();
                // nested cones
                for l in 1..=k {
                    assert!(in_cone(v, l, ConeVariant::Open), "n={n} k={k} l={l}");
                }
                assert!(sigma(k as i32, &x) > 0.0);
                // at most n-k entries are nonpositive
                assert!(v.iter().filter(|&&e| e <= 0.0).count() <= n - k);
                assert!(tail_sum_check(k, &x).unwrap() > 0.0);
                // lower bound on negative entries
                let bound = -(n as f64 - k as f64) / k as f64 * v[0];
                assert!(v[n - 1] >= bound - 1e-12 * v[0].abs());
                // all σ_{k-1}(κ|i) positive
                for i in 0..n {
                    let set = IndexSet::new(&[i], n).unwrap();
                    let s1 = sigma_excl(k as i32 - 1, &x, &set).unwrap();
                    let tol = 1e-12 * magnitude(v, k as i32 - 1, &[i]);
                    assert!(s1 > -tol, "n={n} k={k} {v:?}");
                }
            }
        }
    }
}

#[test]
fn random_vectors_agree_with_oracle_membership() {
    let mut r = rng(21);
    for _ in 0..2000 {
        let n = r.gen_range(2..8);
        let v = rand_vec(&mut r, n, 3.0);
        for k in 1..=n {
            let want = (1..=k as i32).all(|m| sigma_enum(&v, m) > 0.0);
            let edge = (1..=k as i32).any(|m| sigma_enum(&v, m).abs() < 1e-9 * (1.0 + magnitude(&v, m, &[])));
            if !edge {
                assert_eq!(in_cone(&v, k, ConeVariant::Open), want);
            }
        }
    }
}
