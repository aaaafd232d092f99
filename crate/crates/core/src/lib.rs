//! Numerical verification toolkit for the algebra of elementary symmetric
//! functions behind `σ_k` curvature estimates.

pub mod cases;
pub mod cones;
pub mod error;
pub mod linalg;
pub mod quadforms;
pub mod registry;
pub mod rng;
pub mod search;
pub mod symfun;

pub use cones::{draw_gamma, in_gamma, normalize_sigma_k, sample_gamma, tail_sum_check, ConeQuery, ConeVariant, SampleSpec};
pub use error::{Error, Result};
pub use linalg::{min_eig, MinEig, SymMatrix};
pub use quadforms::{abcd_matrices, h_matrix, key_matrix, rhs_combination, testfn_terms, FormLabel, QuadForm};
pub use symfun::{sigma, sigma_all, sigma_d1, sigma_d2, sigma_excl, CurvatureVector, IndexSet, SymTable};
pub use cases::{classify_case, Case, CaseLabel};
pub use registry::{registry_list, run_check, CheckResult, Kind, RunOptions, Verdict, Witness};
pub use search::{minimize_lambda, threshold_bisect, SearchConfig, SearchReport, SearchWitness, ThresholdConfig, ThresholdReport};
