//! Multimode boson-bunching probabilities for linear interferometers under
//! explicit photon-distinguishability models.
//!
//! The probability that all n photons of a linear-optics experiment land
//! inside a detected subset of output modes is `perm(H ⊙ S)`, where H is a
//! PSD matrix built from the interferometer and the detected modes, and S is
//! the Gram matrix of the photons' internal states. This crate provides:
//!
//! - exact permanent engines (Ryser and Glynn with Gray-code updates, plus a
//!   factorial-time oracle) with cross-engine agreement as the error
//!   certificate ([`permanent`]);
//! - dense complex linear algebra sized for these problems: Jacobi
//!   eigensolver, PSD square roots, Gram construction ([`matrix`]);
//! - constructors for the distinguishability models — uniform and
//!   photon-dependent interpolation, two-set overlaps, direct sums, Gaussian
//!   time-delay overlaps — and gauge utilities ([`gram`]);
//! - interferometer tooling: detection scenes, Haar sampling, block
//!   embeddings into larger unitaries, triangular beam-splitter
//!   decompositions ([`interferometer`]);
//! - bunching probabilities for pure and mixed states, parameter
//!   derivatives, the anomalous-bunching criterion
//!   `λ_max^R(F^G) > perm(G)`, and violation-ratio scans ([`bunching`]);
//! - a bundled 16-photon instance in an 18-mode interferometer where time
//!   delays *increase* two-mode bunching, with an end-to-end reproduction
//!   report, plus a randomized counterexample search harness
//!   ([`counterexample`]);
//! - a brute-force first-quantization simulator used as an independent
//!   physics oracle ([`firstquant`]), and seeded verification suites
//!   ([`selftest`]).

pub mod bunching;
pub mod counterexample;
pub mod error;
pub mod firstquant;
pub mod gram;
pub mod interferometer;
pub mod matrix;
pub mod permanent;
pub mod selftest;

pub use bunching::{
    anomaly_criterion, bunching_prob, bunching_prob_mixed, delay_derivative, monotonicity_check,
    perm_derivative, single_mode_bunching, violation_scan, AnomalyReport, BunchingResult,
    MixedEnsemble, ViolationScan,
};
pub use counterexample::{
    conjecture_search, load_counterexample, reproduce_paper, CounterexampleBundle,
    ReproduceReport, Sampler, SearchReport,
};
pub use error::{Error, Result};
pub use firstquant::simulate_bunching;
pub use gram::{compile_gram, compile_time_delay, gauge_transform, nonneg_class_test, DelayProfile, GramSpec};
pub use interferometer::{
    cascade_rank_one, embed_rows, h_matrix, haar_unitary, reck_decompose, BsNetwork,
    InterferometerScene,
};
pub use matrix::{
    check_psd_hermitian, gram_from_vectors, hadamard, psd_sqrt, spectral_norm, sym_eig_max, CMatrix,
    HermitianCheckReport,
};
pub use permanent::{f_matrix, perm_glynn, perm_minor, perm_naive, perm_ryser, FMatrix, PermanentValue};

use std::sync::OnceLock;

/// Configure the global worker pool from the `BUNCHLAB_THREADS` environment
/// variable (unset or 0 means automatic). Safe to call more than once; only
/// the first call takes effect.
pub fn configure_threads_from_env() {
    static DONE: OnceLock<()> = OnceLock::new();
    DONE.get_or_init(|| {
        if let Ok(raw) = std::env::var("BUNCHLAB_THREADS") {
            if let Ok(n) = raw.trim().parse::<usize>() {
                if n > 0 {
                    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
                }
            }
        }
    });
}
