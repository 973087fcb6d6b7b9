//! The bundled 16-photon anomalous-bunching instance and its end-to-end
//! reproduction pipeline, plus a randomized search harness over PSD matrix
//! families for further violations of the eigenvalue–permanent inequality.
//!
//! The instance is a rank-two PSD matrix A = M†M built from two 2×16 integer
//! arrays. The integers are embedded in source under a content checksum (the
//! integers are the ground truth; file I/O would only add a corruption
//! vector). All derived quantities — γ, the 18-mode unitary embedding, the
//! maximizing delay direction, the violation-ratio curve — are recomputed
//! from scratch and compared against their reference values.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::bunching::{anomaly_criterion, bunching_prob, violation_scan, AnomalyReport, ViolationScan};
use crate::error::{Error, Result};
use crate::gram::{compile_time_delay, DelayProfile};
use crate::interferometer::{
    embed_rows, gaussian_complex_rng, h_matrix, reck_decompose, InterferometerScene,
};
use crate::matrix::{gram_from_vectors, hadamard, hermitian_eigenvalues, CMatrix};
use crate::permanent::{perm_glynn, perm_ryser};

/// Real part of the 2×16 seed block M.
pub const M_REAL: [[i32; 16]; 2] = [
    [25, -23, 29, 11, -20, 47, 18, 29, 35, -25, -32, -28, -18, 25, 12, -36],
    [8, 38, -11, 34, 61, 42, -23, 10, 35, 24, 11, 9, 13, -9, 34, 22],
];

/// Imaginary part of the 2×16 seed block M.
pub const M_IMAG: [[i32; 16]; 2] = [
    [30, 20, 51, -43, -11, 47, 4, 27, -26, -2, 11, 37, 64, 26, -28, 23],
    [0, 20, 10, 4, 28, 12, -46, 24, -43, 10, -17, -63, -23, 50, -40, 15],
];

const DATA_SHA256: &str = "45445b4debaef92fa0b1d1c3ac8f339a7f6ddc8c10bbada3eb8b54ac02af0967";

pub(crate) fn data_checksum(m_real: &[[i32; 16]; 2], m_imag: &[[i32; 16]; 2]) -> String {
    let mut parts = Vec::with_capacity(4);
    for row in m_real.iter().chain(m_imag.iter()) {
        parts.push(
            row.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
    }
    let canon = parts.join(";");
    let digest = Sha256::digest(canon.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// The seed block and everything derived from it at load time.
#[derive(Debug, Clone)]
pub struct CounterexampleBundle {
    /// 2×16 complex block M = M_R + i·M_I
    pub m: CMatrix,
    /// A = M†M, PSD of rank two
    pub a: CMatrix,
    /// 1 / σ_max(M)², so that ‖γ M†M‖ = 1 in spectral norm
    pub gamma: f64,
    /// 18-mode embedding: 16 photons, detected modes {0, 1}
    pub scene: InterferometerScene,
    /// unit eigenvector of the symmetric part of Re F^A with largest
    /// eigenvalue — the delay direction that maximizes the bunching
    /// derivative
    pub tau_max: Vec<f64>,
    /// the anomaly evaluation of A (λ_max, perm, margin)
    pub anomaly: AnomalyReport,
}

/// Validate the embedded integers against their checksum and build the
/// bundle.
pub fn load_counterexample() -> Result<CounterexampleBundle> {
    let checksum = data_checksum(&M_REAL, &M_IMAG);
    if checksum != DATA_SHA256 {
        return Err(Error::DataCorruption(format!(
            "embedded matrix data checksum {checksum} does not match {DATA_SHA256}"
        )));
    }
    let m = CMatrix::from_fn(2, 16, |i, j| {
        Complex64::new(M_REAL[i][j] as f64, M_IMAG[i][j] as f64)
    });
    let a = m.dagger().matmul(&m)?;

    // A is PSD, so its singular values are its eigenvalues; computing them
    // directly avoids squaring the conditioning through A†A
    let eigs = hermitian_eigenvalues(&a)?;
    let top = eigs.last().copied().unwrap_or(0.0);
    let third = eigs[eigs.len() - 3].abs();
    if third > 1e-8 * top {
        return Err(Error::Internal(format!(
            "A should have rank 2, third singular value ratio {:.3e}",
            third / top
        )));
    }

    let (scene, gamma) = embed_rows(&m)?;
    let anomaly = anomaly_criterion(&a)?;
    Ok(CounterexampleBundle {
        m,
        a,
        gamma,
        tau_max: anomaly.tau_max.clone(),
        scene,
        anomaly,
    })
}

/// One computed-vs-reference comparison in the reproduction report.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub computed: f64,
    pub reference: f64,
    pub tolerance: f64,
    /// "relative" or "absolute"
    pub tolerance_kind: String,
    pub pass: bool,
}

impl CheckResult {
    fn relative(name: &str, computed: f64, reference: f64, tol: f64) -> Self {
        let pass = (computed - reference).abs() <= tol * reference.abs();
        CheckResult {
            name: name.into(),
            computed,
            reference,
            tolerance: tol,
            tolerance_kind: "relative".into(),
            pass,
        }
    }

    fn absolute(name: &str, computed: f64, reference: f64, tol: f64) -> Self {
        let pass = (computed - reference).abs() <= tol;
        CheckResult {
            name: name.into(),
            computed,
            reference,
            tolerance: tol,
            tolerance_kind: "absolute".into(),
            pass,
        }
    }
}

/// Full reproduction report: every derived quantity with its reference value
/// and pass/fail state, the violation-ratio scan, and the beam-splitter
/// decomposition summary.
#[derive(Debug, Clone, Serialize)]
pub struct ReproduceReport {
    pub checks: Vec<CheckResult>,
    pub all_pass: bool,
    pub gamma: f64,
    pub tau_max: Vec<f64>,
    /// Ryser-vs-Glynn relative spread on the scaled 16×16 permanent; if it
    /// exceeds the base tolerance the relative checks widen to it (and
    /// `tolerance_widened` records that)
    pub engine_agreement: f64,
    pub effective_relative_tolerance: f64,
    pub tolerance_widened: bool,
    pub reck_elements: usize,
    pub reck_reconstruction_error: f64,
    pub reck_note: String,
    pub scan: ViolationScan,
}

/// Reference values quoted to 4–5 significant figures; the base tolerance is
/// half a unit in the last quoted place.
const REF_PERM_A: f64 = 2.1978e64;
const REF_LAMBDA_MAX: f64 = 2.2632e64;
const REF_RATIO: f64 = 1.0298;
const REF_GAMMA: f64 = 3.3767e-5;
const REF_PERM_H: f64 = 6.2797e-8;
const REF_QUAD_COEFF: f64 = 0.0595;
const REF_D_MAX: f64 = 0.6201;
const REF_R_MAX: f64 = 1.0123;
const REF_PERM_HS_DMAX: f64 = 6.3568e-8;
const REF_RECK_COUNT: usize = 32;
const BASE_REL_TOL: f64 = 5e-4;

/// Default scan grid: d from 0 to 2 in steps of 0.001.
pub fn default_scan_grid() -> Vec<f64> {
    crate::bunching::uniform_grid(0.0, 2.0, 2001)
}

/// Run the whole pipeline (load → embed → H → anomaly criterion → violation
/// scan → mesh decomposition) and compare every number against its
/// reference. Deterministic: no randomness anywhere in the chain.
pub fn reproduce_paper() -> Result<ReproduceReport> {
    reproduce_with_grid(&default_scan_grid())
}

/// Same pipeline on a caller-selected scan grid (the quadratic-coefficient
/// fit and the maximum refinement do not depend on the grid density).
pub fn reproduce_with_grid(d_grid: &[f64]) -> Result<ReproduceReport> {
    let bundle = load_counterexample()?;
    let n = 16;

    // engine agreement on the scaled matrix is the measured error
    // certificate for all permanent-derived checks
    let h = h_matrix(&bundle.scene)?;
    let scaled_target = bundle.a.scale_re(bundle.gamma);
    let embed_err = h.max_abs_diff(&scaled_target)?;
    if embed_err > 1e-10 {
        return Err(Error::Internal(format!(
            "embedded H deviates from γA by {embed_err:.3e}"
        )));
    }
    let ryser = perm_ryser(&h)?;
    let glynn = perm_glynn(&h)?;
    let engine_agreement = ryser.rel_diff(&glynn);
    let effective_rel_tol = BASE_REL_TOL.max(engine_agreement);
    let tolerance_widened = engine_agreement > BASE_REL_TOL;

    let perm_h = bunching_prob(&h, &CMatrix::ones(n, n))?.probability;
    let scan = violation_scan(&h, &bundle.tau_max, d_grid)?;
    let profile = DelayProfile::new(bundle.tau_max.clone(), scan.d_max, 1.0)?;
    let s_at_dmax = compile_time_delay(&profile)?;
    let perm_hs_dmax = bunching_prob(&h, &s_at_dmax)?.probability;

    let reck = reck_decompose(bundle.scene.unitary())?;
    let reck_err = reck.reconstruct().max_abs_diff(bundle.scene.unitary())?;
    if reck_err > 1e-9 {
        return Err(Error::Internal(format!(
            "mesh reconstruction error {reck_err:.3e} exceeds 1e-9"
        )));
    }

    let ratio = bundle.anomaly.lambda_max_r / bundle.anomaly.perm_g;
    let checks = vec![
        CheckResult::relative("gamma", bundle.gamma, REF_GAMMA, effective_rel_tol),
        CheckResult::relative("perm(A)", bundle.anomaly.perm_g, REF_PERM_A, effective_rel_tol),
        CheckResult::relative(
            "lambda_max_R(F^A)",
            bundle.anomaly.lambda_max_r,
            REF_LAMBDA_MAX,
            effective_rel_tol,
        ),
        CheckResult::relative("lambda/perm ratio", ratio, REF_RATIO, effective_rel_tol),
        CheckResult::relative("perm(H)", perm_h, REF_PERM_H, effective_rel_tol),
        CheckResult::relative("quadratic coefficient", scan.quad_coeff, REF_QUAD_COEFF, 0.02),
        CheckResult::absolute("d_max", scan.d_max, REF_D_MAX, 1e-3),
        CheckResult::absolute("R(d_max)", scan.r_max, REF_R_MAX, 5e-4),
        CheckResult::relative(
            "perm(H .* S(d_max))",
            perm_hs_dmax,
            REF_PERM_HS_DMAX,
            effective_rel_tol,
        ),
    ];
    let all_pass = checks.iter().all(|c| c.pass) && bundle.anomaly.anomalous;

    let reck_note = format!(
        "mesh uses {} two-mode elements (full {}-mode triangle is {}); the reference \
         count of {} is reported, not asserted — its counting convention is unspecified",
        reck.elements.len(),
        bundle.scene.modes(),
        bundle.scene.modes() * (bundle.scene.modes() - 1) / 2,
        REF_RECK_COUNT,
    );

    Ok(ReproduceReport {
        checks,
        all_pass,
        gamma: bundle.gamma,
        tau_max: bundle.tau_max,
        engine_agreement,
        effective_relative_tolerance: effective_rel_tol,
        tolerance_widened,
        reck_elements: reck.elements.len(),
        reck_reconstruction_error: reck_err,
        reck_note,
        scan,
    })
}

impl std::fmt::Display for ReproduceReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{:<24} {:>24} {:>14} {:>12} {:>10}  {}",
            "quantity", "computed", "reference", "tolerance", "kind", "status"
        )?;
        for c in &self.checks {
            writeln!(
                f,
                "{:<24} {:>24.10e} {:>14.5e} {:>12.1e} {:>10}  {}",
                c.name,
                c.computed,
                c.reference,
                c.tolerance,
                c.tolerance_kind,
                if c.pass { "pass" } else { "FAIL" }
            )?;
        }
        writeln!(f, "engine agreement (Ryser vs Glynn): {:.3e}", self.engine_agreement)?;
        if self.tolerance_widened {
            writeln!(
                f,
                "note: relative tolerance widened to the measured engine agreement {:.3e}",
                self.effective_relative_tolerance
            )?;
        }
        writeln!(
            f,
            "mesh: {} elements, reconstruction error {:.3e}",
            self.reck_elements, self.reck_reconstruction_error
        )?;
        writeln!(f, "note: {}", self.reck_note)?;
        write!(f, "overall: {}", if self.all_pass { "pass" } else { "FAIL" })
    }
}

/// Random PSD matrix families for the search harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// Gram matrix of n random unit vectors in dimension n
    HaarGram,
    /// trace-normalized G†G for a square complex Gaussian G
    Wishart,
    /// G†G for an r×n complex Gaussian G
    LowRank(usize),
    /// a random base Gram interpolated by random per-photon coefficients
    StructuredInterp,
}

impl Sampler {
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        match t {
            "haar_gram" => return Ok(Sampler::HaarGram),
            "wishart" => return Ok(Sampler::Wishart),
            "structured_interp" => return Ok(Sampler::StructuredInterp),
            _ => {}
        }
        for (open, close) in [("low_rank(", ")"), ("low_rank:", "")] {
            if let Some(rest) = t.strip_prefix(open) {
                let digits = if close.is_empty() {
                    rest
                } else if let Some(d) = rest.strip_suffix(close) {
                    d
                } else {
                    continue;
                };
                let r: usize = digits
                    .parse()
                    .map_err(|_| Error::Domain(format!("bad rank in sampler '{t}'")))?;
                if r == 0 {
                    return Err(Error::Domain("sampler rank must be >= 1".into()));
                }
                return Ok(Sampler::LowRank(r));
            }
        }
        Err(Error::Domain(format!(
            "unknown sampler '{t}' (expected haar_gram, wishart, low_rank(r), structured_interp)"
        )))
    }
}

impl std::fmt::Display for Sampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sampler::HaarGram => write!(f, "haar_gram"),
            Sampler::Wishart => write!(f, "wishart"),
            Sampler::LowRank(r) => write!(f, "low_rank({r})"),
            Sampler::StructuredInterp => write!(f, "structured_interp"),
        }
    }
}

/// Best margin found by a randomized search, with the maximizing matrix and
/// a histogram of relative margins (λ/perm − 1).
#[derive(Debug, Clone, Serialize)]
pub struct SearchReport {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub sampler: String,
    pub best_ratio: f64,
    pub best_margin: f64,
    pub best_trial: usize,
    pub best_matrix: CMatrix,
    pub positive_count: usize,
    pub histogram_edges: Vec<f64>,
    pub histogram_counts: Vec<usize>,
}

fn mix_seed(seed: u64, trial: u64) -> u64 {
    // splitmix64 step over (seed, trial)
    let mut z = seed
        .wrapping_add(trial.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sample_matrix(sampler: Sampler, n: usize, rng: &mut ChaCha12Rng) -> Result<CMatrix> {
    match sampler {
        Sampler::HaarGram => {
            let states: Vec<Vec<Complex64>> = (0..n)
                .map(|_| {
                    let mut v: Vec<Complex64> = (0..n).map(|_| gaussian_complex_rng(rng)).collect();
                    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                    v.iter_mut().for_each(|z| *z /= norm);
                    v
                })
                .collect();
            gram_from_vectors(&states)
        }
        Sampler::Wishart => {
            let g = CMatrix::from_fn(n, n, |_, _| gaussian_complex_rng(rng));
            let a = g.dagger().matmul(&g)?;
            let trace: f64 = (0..n).map(|i| a.at(i, i).re).sum();
            Ok(a.scale_re(1.0 / trace))
        }
        Sampler::LowRank(r) => {
            let g = CMatrix::from_fn(r, n, |_, _| gaussian_complex_rng(rng));
            g.dagger().matmul(&g)
        }
        Sampler::StructuredInterp => {
            let base = sample_matrix(Sampler::HaarGram, n, rng)?;
            let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let xi = CMatrix::from_fn(n, n, |i, j| {
                Complex64::new(if i == j { 1.0 } else { x[i] * x[j] }, 0.0)
            });
            hadamard(&base, &xi)
        }
    }
}

/// Sample `trials` random PSD matrices, evaluate the anomaly criterion on
/// each, and report the largest margin. Deterministic per seed: each trial
/// draws from its own hashed stream, so parallel execution cannot reorder
/// the randomness.
pub fn conjecture_search(n: usize, trials: usize, sampler: Sampler, seed: u64) -> Result<SearchReport> {
    if !(2..=crate::permanent::MAX_F_MATRIX_DIM).contains(&n) {
        return Err(Error::Domain(format!(
            "search dimension must satisfy 2 <= n <= {}, got {n}",
            crate::permanent::MAX_F_MATRIX_DIM
        )));
    }
    if trials == 0 {
        return Err(Error::Domain("trials must be >= 1".into()));
    }
    if let Sampler::LowRank(r) = sampler {
        if r > n {
            return Err(Error::Domain(format!("low_rank({r}) needs r <= n = {n}")));
        }
    }

    let rel_margins: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(seed, t));
            let a = sample_matrix(sampler, n, &mut rng)?;
            let report = anomaly_criterion(&a)?;
            Ok(report.lambda_max_r / report.perm_g.max(f64::MIN_POSITIVE) - 1.0)
        })
        .collect::<Result<_>>()?;

    let (best_trial, &best_rel) = rel_margins
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    let positive_count = rel_margins.iter().filter(|&&m| m > 1e-9).count();

    // regenerate the argmax trial for the full report
    let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(seed, best_trial as u64));
    let best_matrix = sample_matrix(sampler, n, &mut rng)?;
    let best_report = anomaly_criterion(&best_matrix)?;

    // fixed histogram over relative margins
    let lo = -1.0;
    let hi = 0.1;
    let bins = 22;
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &m in &rel_margins {
        let idx = (((m - lo) / width).floor() as isize).clamp(0, bins as isize - 1) as usize;
        counts[idx] += 1;
    }
    let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();

    Ok(SearchReport {
        n,
        trials,
        seed,
        sampler: sampler.to_string(),
        best_ratio: best_rel + 1.0,
        best_margin: best_report.criterion_margin,
        best_trial,
        best_matrix,
        positive_count,
        histogram_edges: edges,
        histogram_counts: counts,
    })
}

/// Margins of rank-two perturbations of the bundled instance: M is shifted
/// by a random complex Gaussian block scaled to a target relative size of A,
/// so A' = M'†M' stays exactly PSD and rank two.
#[derive(Debug, Clone, Serialize)]
pub struct PerturbationReport {
    pub trials: usize,
    pub target_rel: f64,
    /// measured ‖A' − A‖_F / ‖A‖_F per trial
    pub measured_rel: Vec<f64>,
    pub margins: Vec<f64>,
    pub all_positive: bool,
}

pub fn perturbed_counterexample_margins(
    target_rel: f64,
    trials: usize,
    seed: u64,
) -> Result<PerturbationReport> {
    if trials == 0 {
        return Err(Error::Domain("trials must be >= 1".into()));
    }
    if !(target_rel > 0.0) || target_rel > 1e-2 {
        return Err(Error::Domain(
            "perturbation size must be positive and small (<= 1e-2 relative)".into(),
        ));
    }
    let bundle = load_counterexample()?;
    let a_norm = bundle.a.fro_norm();

    let results: Vec<(f64, f64)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(seed, t));
            let g = CMatrix::from_fn(2, 16, |_, _| gaussian_complex_rng(&mut rng));
            // first-order: ‖A' − A‖ ≈ 2 ‖M† dM‖, so scale dM to half the
            // target relative size of A
            let eps = 0.5 * target_rel * bundle.m.fro_norm() / g.fro_norm();
            let m_pert = bundle.m.add(&g.scale_re(eps))?;
            let a_pert = m_pert.dagger().matmul(&m_pert)?;
            let rel = a_pert.sub(&bundle.a)?.fro_norm() / a_norm;
            let report = anomaly_criterion(&a_pert)?;
            Ok((rel, report.criterion_margin))
        })
        .collect::<Result<_>>()?;

    let measured_rel: Vec<f64> = results.iter().map(|r| r.0).collect();
    let margins: Vec<f64> = results.iter().map(|r| r.1).collect();
    let all_positive = margins.iter().all(|&m| m > 0.0);
    Ok(PerturbationReport {
        trials,
        target_rel,
        measured_rel,
        margins,
        all_positive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checksum_guards_the_integers() {
        assert_eq!(data_checksum(&M_REAL, &M_IMAG), DATA_SHA256);
        let mut corrupted = M_REAL;
        corrupted[0][0] = 26;
        assert_ne!(data_checksum(&corrupted, &M_IMAG), DATA_SHA256);
    }

    #[test]
    fn first_column_values() {
        assert_eq!(M_REAL[0][0], 25);
        assert_eq!(M_REAL[1][0], 8);
        assert_eq!(M_IMAG[0][0], 30);
        assert_eq!(M_IMAG[1][0], 0);
    }

    #[test]
    fn bundle_derivations() {
        let bundle = load_counterexample().unwrap();
        assert_eq!(bundle.a.rows(), 16);
        assert_eq!(bundle.scene.modes(), 18);
        assert_eq!(bundle.scene.photons(), 16);
        assert_eq!(bundle.scene.kappa(), &[0, 1]);
        // gamma within the quoted figure
        assert!((bundle.gamma - 3.3767e-5).abs() <= 5e-4 * 3.3767e-5);
        // rank 2
        let eigs = hermitian_eigenvalues(&bundle.a).unwrap();
        assert!(eigs[13].abs() <= 1e-8 * eigs[15]);
        // the instance is anomalous by a wide margin
        assert!(bundle.anomaly.anomalous);
        // sign convention on the delay direction
        let first_big = bundle.tau_max.iter().find(|t| t.abs() > 1e-12).unwrap();
        assert!(*first_big > 0.0);
    }

    #[test]
    fn hermitian_perturbations_keep_positive_margin() {
        use crate::matrix::psd_clip;
        use rand::Rng;
        // additive Hermitian noise pushes the rank-two instance slightly
        // outside the PSD cone (its null space is 14-dimensional), so the
        // perturbed matrix is projected back by eigenvalue clipping before
        // the criterion is evaluated
        let bundle = load_counterexample().unwrap();
        let scale = 1e-6 * bundle.a.fro_norm();
        let mut rng = ChaCha12Rng::seed_from_u64(0xE16);
        for _ in 0..6 {
            let g = CMatrix::from_fn(16, 16, |_, _| {
                Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            let herm = g.add(&g.dagger()).unwrap().scale_re(0.5);
            let noise = herm.scale_re(scale / herm.fro_norm());
            let perturbed = psd_clip(&bundle.a.add(&noise).unwrap()).unwrap();
            let report = anomaly_criterion(&perturbed).unwrap();
            assert!(
                report.criterion_margin > 0.0,
                "margin lost under 1e-6 Hermitian perturbation: {:.3e}",
                report.criterion_margin
            );
        }
    }

    #[test]
    fn search_rejects_bad_arguments() {
        assert!(matches!(
            conjecture_search(3, 0, Sampler::HaarGram, 1),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            conjecture_search(1, 10, Sampler::HaarGram, 1),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            conjecture_search(3, 10, Sampler::LowRank(5), 1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn sampler_parsing() {
        assert_eq!(Sampler::parse("haar_gram").unwrap(), Sampler::HaarGram);
        assert_eq!(Sampler::parse("wishart").unwrap(), Sampler::Wishart);
        assert_eq!(Sampler::parse("low_rank(2)").unwrap(), Sampler::LowRank(2));
        assert_eq!(Sampler::parse("low_rank:4").unwrap(), Sampler::LowRank(4));
        assert_eq!(
            Sampler::parse("structured_interp").unwrap(),
            Sampler::StructuredInterp
        );
        assert!(Sampler::parse("bogus").is_err());
        assert!(Sampler::parse("low_rank(0)").is_err());
    }

    #[test]
    fn search_is_deterministic_per_seed() {
        let a = conjecture_search(4, 50, Sampler::Wishart, 9).unwrap();
        let b = conjecture_search(4, 50, Sampler::Wishart, 9).unwrap();
        assert_eq!(a.best_ratio, b.best_ratio);
        assert_eq!(a.best_trial, b.best_trial);
        assert_eq!(a.histogram_counts, b.histogram_counts);
        assert_eq!(a.best_matrix, b.best_matrix);
        let c = conjecture_search(4, 50, Sampler::Wishart, 10).unwrap();
        assert_ne!(a.best_ratio, c.best_ratio);
    }

    #[test]
    fn search_small_dimension_finds_no_violation() {
        for sampler in [
            Sampler::HaarGram,
            Sampler::Wishart,
            Sampler::LowRank(2),
            Sampler::StructuredInterp,
        ] {
            let report = conjecture_search(3, 300, sampler, 21).unwrap();
            assert_eq!(
                report.positive_count, 0,
                "{sampler}: found spurious positive margins"
            );
            assert!(report.best_ratio <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn histogram_covers_all_trials() {
        let report = conjecture_search(4, 123, Sampler::HaarGram, 3).unwrap();
        let total: usize = report.histogram_counts.iter().sum();
        assert_eq!(total, 123);
        assert_eq!(report.histogram_edges.len(), report.histogram_counts.len() + 1);
    }
}
