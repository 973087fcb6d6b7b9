//! Bunching probabilities for pure and mixed internal states, derivative
//! formulas with respect to model parameters, the anomalous-bunching
//! criterion, and violation-ratio scans over the delay strength.
//!
//! The multimode bunching probability of a detection scene is
//! `perm(H ⊙ S)`: H encodes the interferometer and detected modes, S the
//! pairwise overlaps of the photons' internal states. Every probability here
//! is evaluated with both permanent engines and the relative spread is
//! carried along as an error certificate.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gram::{time_delay_matrix, validate_gram, DelayProfile};
use crate::interferometer::{h_matrix, InterferometerScene};
use crate::matrix::{check_psd_hermitian, hadamard, hermitian_eigenvalues, sym_eig_max, CMatrix};
use crate::permanent::{f_matrix, minor_permanents, perm_glynn, perm_ryser};

/// Engine spread beyond this relative level is a precision failure.
pub const ENGINE_AGREEMENT_TOL: f64 = 1e-7;

/// Term-count guard for mixed-ensemble sums.
pub const MAX_ENSEMBLE_TERMS: usize = 1 << 20;

/// A bunching probability with the matrices that produced it and the
/// relative spread between the two permanent engines.
#[derive(Debug, Clone, Serialize)]
pub struct BunchingResult {
    /// Re perm(H ⊙ S), clamped into [0, 1].
    pub probability: f64,
    pub h_used: CMatrix,
    pub s_used: CMatrix,
    pub engine_agreement: f64,
}

fn scale_aware_tol(m: &CMatrix) -> f64 {
    crate::matrix::HERMITIAN_TOL * m.max_abs().max(1.0)
}

fn validate_h(h: &CMatrix) -> Result<()> {
    let report = check_psd_hermitian(h, scale_aware_tol(h))?;
    if !report.is_psd {
        return Err(Error::Domain(format!(
            "H must be PSD Hermitian (asymmetry {:.3e}, min eigenvalue {:.3e})",
            report.max_asymmetry, report.min_eigenvalue
        )));
    }
    let eigs = hermitian_eigenvalues(h)?;
    if eigs.last().copied().unwrap_or(0.0) > 1.0 + 1e-10 {
        return Err(Error::Domain(format!(
            "H spectrum exceeds 1 (max eigenvalue {:.12})",
            eigs.last().unwrap()
        )));
    }
    Ok(())
}

/// Evaluate perm(H ⊙ S) with both engines. Validates that H is PSD with
/// spectrum in [0, 1] and S a unit-diagonal Gram matrix.
pub fn bunching_prob(h: &CMatrix, s: &CMatrix) -> Result<BunchingResult> {
    if h.rows() != s.rows() || h.cols() != s.cols() {
        return Err(Error::Dimension(format!(
            "H is {}x{} but S is {}x{}",
            h.rows(),
            h.cols(),
            s.rows(),
            s.cols()
        )));
    }
    validate_h(h)?;
    validate_gram(s)?;
    let (prob, agreement) = perm_pair(&hadamard(h, s)?)?;
    Ok(BunchingResult {
        probability: prob.clamp(0.0, 1.0),
        h_used: h.clone(),
        s_used: s.clone(),
        engine_agreement: agreement,
    })
}

/// Both engines on one product matrix; returns (Re perm, relative spread).
/// The permanent of a PSD ⊙ PSD product is real, so a large imaginary part
/// is also flagged.
fn perm_pair(g: &CMatrix) -> Result<(f64, f64)> {
    let r = perm_ryser(g)?;
    let gl = perm_glynn(g)?;
    let agreement = r.rel_diff(&gl);
    if agreement > ENGINE_AGREEMENT_TOL {
        return Err(Error::Precision(format!(
            "permanent engines disagree by {agreement:.3e} relative"
        )));
    }
    let z = r.to_complex();
    if z.im.abs() > 1e-9 * z.re.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Precision(format!(
            "permanent of PSD Hadamard product has imaginary part {:.3e} relative",
            z.im.abs() / z.re.abs().max(f64::MIN_POSITIVE)
        )));
    }
    Ok((z.re, agreement))
}

/// Single-mode bunching decomposition P_k = P_k^d · perm(S), with
/// P_k^d = Π_i |U_{k,i}|². Cross-validated against the general multimode
/// formula on the singleton subset.
#[derive(Debug, Clone, Serialize)]
pub struct SingleModeBunching {
    pub probability: f64,
    /// bunching probability of fully distinguishable photons
    pub classical: f64,
    pub perm_s: f64,
}

pub fn single_mode_bunching(
    scene: &InterferometerScene,
    s: &CMatrix,
    k: usize,
) -> Result<SingleModeBunching> {
    if k >= scene.modes() {
        return Err(Error::Index(format!(
            "output mode {k} outside 0..{}",
            scene.modes()
        )));
    }
    validate_gram(s)?;
    let n = scene.photons();
    if s.rows() != n {
        return Err(Error::Dimension(format!(
            "S is {}x{} but the scene has {n} photons",
            s.rows(),
            s.cols()
        )));
    }
    let u = scene.unitary();
    let classical: f64 = (0..n).map(|i| u.at(k, i).norm_sqr()).product();
    let (perm_s, _) = perm_pair(s)?;
    let probability = classical * perm_s;

    let general = bunching_prob(&h_matrix(&scene.with_kappa(&[k])?)?, s)?;
    if (general.probability - probability).abs() > 1e-10 * probability.abs().max(1e-15) {
        return Err(Error::Internal(format!(
            "single-mode factorization {probability:.15e} disagrees with perm(H ⊙ S) = {:.15e}",
            general.probability
        )));
    }
    Ok(SingleModeBunching {
        probability,
        classical,
        perm_s,
    })
}

/// How a mixed ensemble was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    /// every photon carries the same internal density matrix
    Uniform,
    /// shared eigenbasis, photon-dependent spectra
    SharedBasis,
    /// photon-dependent mixtures of two fixed overlapping states
    RankTwo,
    /// explicit convex combination of Gram matrices
    GeneralProduct,
}

/// A classical mixture of pure product internal states: a list of
/// (weight, Gram matrix) terms. Weights are nonnegative and sum to one.
#[derive(Debug, Clone)]
pub struct MixedEnsemble {
    kind: EnsembleKind,
    components: Vec<(f64, CMatrix)>,
}

impl MixedEnsemble {
    /// All photons share the density matrix with the given eigenvalue
    /// spectrum (the eigenbasis is irrelevant: only label coincidences
    /// matter). Enumerates all L^n basis-label tuples.
    pub fn uniform(n: usize, spectrum: &[f64]) -> Result<Self> {
        let spectra = vec![spectrum.to_vec(); n];
        let mut e = Self::shared_basis(&spectra)?;
        e.kind = EnsembleKind::Uniform;
        Ok(e)
    }

    /// Photon i has spectrum `spectra[i]` over one shared orthonormal basis.
    pub fn shared_basis(spectra: &[Vec<f64>]) -> Result<Self> {
        let n = spectra.len();
        if n == 0 {
            return Err(Error::Dimension("ensemble needs at least one photon".into()));
        }
        for (i, sp) in spectra.iter().enumerate() {
            validate_spectrum(sp).map_err(|e| match e {
                Error::Domain(msg) => Error::Domain(format!("photon {i}: {msg}")),
                other => other,
            })?;
        }
        let sizes: Vec<usize> = spectra.iter().map(|sp| sp.len()).collect();
        let terms: usize = sizes.iter().try_fold(1usize, |acc, &l| {
            acc.checked_mul(l).filter(|&t| t <= MAX_ENSEMBLE_TERMS)
        })
        .ok_or_else(|| {
            Error::SizeGuard(format!(
                "ensemble would need more than {MAX_ENSEMBLE_TERMS} terms"
            ))
        })?;
        let mut components = Vec::with_capacity(terms);
        let mut labels = vec![0usize; n];
        loop {
            let weight: f64 = labels.iter().zip(spectra).map(|(&j, sp)| sp[j]).product();
            let s = CMatrix::from_fn(n, n, |a, b| {
                Complex64::new(if labels[a] == labels[b] { 1.0 } else { 0.0 }, 0.0)
            });
            components.push((weight, s));
            // odometer over the label tuple
            let mut pos = n;
            loop {
                if pos == 0 {
                    return Ok(MixedEnsemble {
                        kind: EnsembleKind::SharedBasis,
                        components,
                    });
                }
                pos -= 1;
                labels[pos] += 1;
                if labels[pos] < sizes[pos] {
                    break;
                }
                labels[pos] = 0;
            }
        }
    }

    /// Photon i is α_i |φ1⟩⟨φ1| + (1−α_i) |φ2⟩⟨φ2| with ⟨φ1|φ2⟩ = x.
    pub fn rank_two(alphas: &[f64], x: f64) -> Result<Self> {
        let n = alphas.len();
        if n == 0 {
            return Err(Error::Dimension("ensemble needs at least one photon".into()));
        }
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("overlap x must lie in [0, 1] (got {x})")));
        }
        for &a in alphas {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::Domain(format!("mixture weight must lie in [0, 1] (got {a})")));
            }
        }
        if n > 20 {
            return Err(Error::SizeGuard(format!(
                "rank-two ensemble of {n} photons exceeds the 2^20 term guard"
            )));
        }
        let mut components = Vec::with_capacity(1 << n);
        for mask in 0u32..(1 << n) {
            let mut weight = 1.0;
            for (i, &a) in alphas.iter().enumerate() {
                weight *= if (mask >> i) & 1 == 0 { a } else { 1.0 - a };
            }
            let s = CMatrix::from_fn(n, n, |a, b| {
                let same = ((mask >> a) & 1) == ((mask >> b) & 1);
                Complex64::new(if same { 1.0 } else { x }, 0.0)
            });
            components.push((weight, s));
        }
        Ok(MixedEnsemble {
            kind: EnsembleKind::RankTwo,
            components,
        })
    }

    /// Explicit convex combination. Each component matrix must be a valid
    /// Gram matrix; the weights must sum to one.
    pub fn general(components: Vec<(f64, CMatrix)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Dimension("ensemble needs at least one component".into()));
        }
        if components.len() > MAX_ENSEMBLE_TERMS {
            return Err(Error::SizeGuard(format!(
                "ensemble exceeds {MAX_ENSEMBLE_TERMS} terms"
            )));
        }
        let n = components[0].1.rows();
        let mut total = 0.0;
        for (w, s) in &components {
            if *w < 0.0 {
                return Err(Error::Domain(format!("negative ensemble weight {w}")));
            }
            if s.rows() != n || s.cols() != n {
                return Err(Error::Dimension("ensemble components must share one shape".into()));
            }
            validate_gram(s)?;
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "ensemble weights sum to {total:.15}, expected 1 within 1e-12"
            )));
        }
        Ok(MixedEnsemble {
            kind: EnsembleKind::GeneralProduct,
            components,
        })
    }

    pub fn kind(&self) -> EnsembleKind {
        self.kind
    }

    pub fn components(&self) -> &[(f64, CMatrix)] {
        &self.components
    }

    pub fn photons(&self) -> usize {
        self.components[0].1.rows()
    }
}

fn validate_spectrum(sp: &[f64]) -> Result<()> {
    if sp.is_empty() {
        return Err(Error::Domain("spectrum must be nonempty".into()));
    }
    if sp.iter().any(|&a| a < 0.0 || !a.is_finite()) {
        return Err(Error::Domain("spectrum entries must be nonnegative".into()));
    }
    let total: f64 = sp.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!(
            "spectrum sums to {total:.15}, expected 1 within 1e-12"
        )));
    }
    Ok(())
}

/// Bunching probability of a mixed internal state:
/// P = Σ_j w_j perm(H ⊙ S^j), accumulated with both engines. The reported
/// `s_used` is the ensemble-averaged Gram matrix (informational).
pub fn bunching_prob_mixed(h: &CMatrix, ensemble: &MixedEnsemble) -> Result<BunchingResult> {
    validate_h(h)?;
    let n = ensemble.photons();
    if h.rows() != n {
        return Err(Error::Dimension(format!(
            "H is {}x{} but the ensemble has {n} photons",
            h.rows(),
            h.cols()
        )));
    }
    let mut total_r = 0.0f64;
    let mut total_g = 0.0f64;
    let mut s_mean = CMatrix::zeros(n, n);
    for (w, s) in ensemble.components() {
        if *w == 0.0 {
            continue;
        }
        let g = hadamard(h, s)?;
        total_r += w * perm_ryser(&g)?.re();
        total_g += w * perm_glynn(&g)?.re();
        s_mean = s_mean.add(&s.scale_re(*w))?;
    }
    let agreement = (total_r - total_g).abs() / total_r.abs().max(total_g.abs()).max(f64::MIN_POSITIVE);
    if agreement > ENGINE_AGREEMENT_TOL {
        return Err(Error::Precision(format!(
            "mixed-sum engines disagree by {agreement:.3e} relative"
        )));
    }
    if !(-1e-10..=1.0 + 1e-10).contains(&total_r) {
        return Err(Error::Internal(format!(
            "mixed bunching probability {total_r} escapes [0, 1]"
        )));
    }
    Ok(BunchingResult {
        probability: total_r.clamp(0.0, 1.0),
        h_used: h.clone(),
        s_used: s_mean,
        engine_agreement: agreement,
    })
}

/// A one-parameter matrix family with an analytic entrywise derivative.
pub trait MatrixFamily {
    fn value(&self, x: f64) -> Result<CMatrix>;
    /// Entrywise derivative dG_ij/dx at `x`.
    fn derivative(&self, x: f64) -> Result<CMatrix>;
}

/// G(x) = H ⊙ S^x with uniform pairwise overlap x².
pub struct XModelFamily {
    pub h: CMatrix,
}

impl MatrixFamily for XModelFamily {
    fn value(&self, x: f64) -> Result<CMatrix> {
        let n = self.h.rows();
        Ok(CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.h.at(i, j)
            } else {
                self.h.at(i, j) * (x * x)
            }
        }))
    }

    fn derivative(&self, x: f64) -> Result<CMatrix> {
        let n = self.h.rows();
        Ok(CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(0.0, 0.0)
            } else {
                self.h.at(i, j) * (2.0 * x)
            }
        }))
    }
}

/// G = H ⊙ S^x with photon-dependent coefficients, varying only x[index].
pub struct XiModelFamily {
    pub h: CMatrix,
    pub x: Vec<f64>,
    pub index: usize,
}

impl MatrixFamily for XiModelFamily {
    fn value(&self, xi: f64) -> Result<CMatrix> {
        let n = self.h.rows();
        let mut x = self.x.clone();
        x[self.index] = xi;
        Ok(CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.h.at(i, j)
            } else {
                self.h.at(i, j) * (x[i] * x[j])
            }
        }))
    }

    fn derivative(&self, xi: f64) -> Result<CMatrix> {
        let n = self.h.rows();
        let mut x = self.x.clone();
        x[self.index] = xi;
        let k = self.index;
        Ok(CMatrix::from_fn(n, n, |i, j| {
            if i == j || (i != k && j != k) {
                Complex64::new(0.0, 0.0)
            } else if i == k {
                self.h.at(i, j) * x[j]
            } else {
                self.h.at(i, j) * x[i]
            }
        }))
    }
}

/// G(x) = H ⊙ S(x) for the two-set block model: off-block entries equal x.
pub struct TwoSetFamily {
    pub h: CMatrix,
    pub k: usize,
}

impl MatrixFamily for TwoSetFamily {
    fn value(&self, x: f64) -> Result<CMatrix> {
        let n = self.h.rows();
        let k = self.k;
        Ok(CMatrix::from_fn(n, n, |i, j| {
            if (i < k) == (j < k) {
                self.h.at(i, j)
            } else {
                self.h.at(i, j) * x
            }
        }))
    }

    fn derivative(&self, _x: f64) -> Result<CMatrix> {
        let n = self.h.rows();
        let k = self.k;
        Ok(CMatrix::from_fn(n, n, |i, j| {
            if (i < k) == (j < k) {
                Complex64::new(0.0, 0.0)
            } else {
                self.h.at(i, j)
            }
        }))
    }
}

/// G(d) = H ⊙ S^τ(d) with dG_ij/dd = −2(τ_i − τ_j)² d G_ij.
pub struct TimeDelayFamily {
    pub h: CMatrix,
    pub tau: Vec<f64>,
}

impl MatrixFamily for TimeDelayFamily {
    fn value(&self, d: f64) -> Result<CMatrix> {
        hadamard(&self.h, &time_delay_matrix(&self.tau, d))
    }

    fn derivative(&self, d: f64) -> Result<CMatrix> {
        let g = self.value(d)?;
        let n = g.rows();
        let tau = &self.tau;
        Ok(CMatrix::from_fn(n, n, |i, j| {
            let diff = tau[i] - tau[j];
            g.at(i, j) * (-2.0 * diff * diff * d)
        }))
    }
}

/// d/dx perm(G(x)) = Σ_ij dG_ij/dx · perm(G(i;j)), validated against a
/// Richardson-extrapolated central finite difference (step 1e-5).
pub fn perm_derivative(family: &dyn MatrixFamily, x: f64) -> Result<f64> {
    let g = family.value(x)?;
    let dg = family.derivative(x)?;
    let minors = minor_permanents(&g)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..g.rows() {
        for j in 0..g.cols() {
            acc += dg.at(i, j) * minors.at(i, j);
        }
    }
    let analytic = acc.re;

    let fd = |step: f64| -> Result<f64> {
        let plus = perm_ryser(&family.value(x + step)?)?.re();
        let minus = perm_ryser(&family.value(x - step)?)?.re();
        Ok((plus - minus) / (2.0 * step))
    };
    let h = 1e-5;
    let d1 = fd(h)?;
    let d2 = fd(h / 2.0)?;
    let richardson = (4.0 * d2 - d1) / 3.0;

    let perm_scale = perm_ryser(&g)?.re().abs().max(1.0);
    if analytic.abs() > 1e-12 {
        let rel = (analytic - richardson).abs() / analytic.abs().max(richardson.abs());
        // floor for finite-difference roundoff when the derivative is tiny
        // relative to the permanent itself
        if rel > 1e-6 && (analytic - richardson).abs() > 1e-9 * perm_scale {
            return Err(Error::Precision(format!(
                "analytic derivative {analytic:.12e} disagrees with finite differences {richardson:.12e} ({rel:.3e} relative)"
            )));
        }
    }
    Ok(analytic)
}

/// First derivative of perm(G(d)) at the profile's delay strength, and the
/// second derivative at d = 0:
/// d/dd perm(G(d)) = 4d (τᵀ F^G τ − perm G(d)),
/// d²/dd² perm(G)|_{d=0} = 4 (τᵀ F^{G(0)} τ − perm G(0)).
pub fn delay_derivative(h: &CMatrix, profile: &DelayProfile) -> Result<(f64, f64)> {
    validate_h(h)?;
    if h.rows() != profile.tau().len() {
        return Err(Error::Dimension(format!(
            "H is {}x{} but the delay direction has {} entries",
            h.rows(),
            h.cols(),
            profile.tau().len()
        )));
    }
    let d = profile.delay_strength();
    let tau = profile.tau();

    let g = hadamard(h, &time_delay_matrix(tau, d))?;
    let fg = f_matrix(&g)?;
    let perm_g = perm_ryser(&g)?.re();
    let first = 4.0 * d * (quadratic_form(&fg.entries, tau) - perm_g);

    let f0 = f_matrix(h)?;
    let perm_h = perm_ryser(h)?.re();
    let second_at_zero = 4.0 * (quadratic_form(&f0.entries, tau) - perm_h);
    Ok((first, second_at_zero))
}

/// τᵀ Re(F) τ for a real vector τ; equals τᵀFτ when F is Hermitian.
fn quadratic_form(f: &CMatrix, tau: &[f64]) -> f64 {
    let n = f.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += tau[i] * f.at(i, j).re * tau[j];
        }
    }
    acc
}

/// Anomaly criterion for a PSD Hermitian matrix G: compare the largest
/// eigenvalue of the real symmetric part of F^G against perm(G). A positive
/// margin means a small delay along `tau_max` increases the permanent —
/// anomalous bunching.
#[derive(Debug, Clone, Serialize)]
pub struct AnomalyReport {
    pub perm_g: f64,
    pub lambda_max_r: f64,
    pub tau_max: Vec<f64>,
    /// lambda_max_r − perm_g
    pub criterion_margin: f64,
    /// margin strictly above the 1e-9 relative noise floor
    pub anomalous: bool,
}

pub fn anomaly_criterion(g: &CMatrix) -> Result<AnomalyReport> {
    let n = g.rows();
    if !(2..=crate::permanent::MAX_F_MATRIX_DIM).contains(&n) {
        return Err(Error::SizeGuard(format!(
            "anomaly criterion needs 2 <= n <= {}, got {n}",
            crate::permanent::MAX_F_MATRIX_DIM
        )));
    }
    let report = check_psd_hermitian(g, scale_aware_tol(g))?;
    if !report.is_psd {
        return Err(Error::Domain(format!(
            "anomaly criterion needs a PSD Hermitian matrix (min eigenvalue {:.3e})",
            report.min_eigenvalue
        )));
    }
    let fg = f_matrix(g)?;
    let (lambda_max_r, tau_max) = sym_eig_max(&fg.entries)?;
    let perm_g = perm_ryser(g)?.re();
    let criterion_margin = lambda_max_r - perm_g;
    let floor = 1e-9 * lambda_max_r.abs().max(perm_g.abs());
    Ok(AnomalyReport {
        perm_g,
        lambda_max_r,
        tau_max,
        criterion_margin,
        anomalous: criterion_margin > floor,
    })
}

/// One row of a violation-ratio scan.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScanRow {
    pub d: f64,
    pub ratio: f64,
    pub perm_hs: f64,
    pub perm_h: f64,
}

/// Violation-ratio scan R(d) = perm(H ⊙ S^τ(d)) / perm(H) over a delay grid,
/// with a golden-section refinement of the maximum and the least-squares
/// small-d quadratic coefficient of R ≈ 1 + c d².
#[derive(Debug, Clone, Serialize)]
pub struct ViolationScan {
    pub rows: Vec<ScanRow>,
    pub d_max: f64,
    pub r_max: f64,
    pub quad_coeff: f64,
}

impl ViolationScan {
    /// CSV rendering with 17-significant-digit floats (lossless round trip).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("d,R,perm_HS,perm_H\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                row.d, row.ratio, row.perm_hs, row.perm_h
            ));
        }
        out
    }
}

/// Evenly spaced grid including both endpoints.
pub fn uniform_grid(start: f64, stop: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2 && stop > start);
    let step = (stop - start) / (points - 1) as f64;
    (0..points).map(|i| start + step * i as f64).collect()
}

/// Window and point count of the small-d quadratic fit.
const QUAD_FIT_MAX_D: f64 = 0.05;
const QUAD_FIT_POINTS: usize = 11;

pub fn violation_scan(h: &CMatrix, tau: &[f64], d_grid: &[f64]) -> Result<ViolationScan> {
    validate_h(h)?;
    if tau.len() != h.rows() {
        return Err(Error::Dimension(format!(
            "delay direction has {} entries for a {}x{} matrix",
            tau.len(),
            h.rows(),
            h.cols()
        )));
    }
    let norm = tau.iter().map(|t| t * t).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Domain(format!(
            "delay direction must be unit norm (got {norm:.15})"
        )));
    }
    if d_grid.is_empty() {
        return Err(Error::Domain("scan grid is empty".into()));
    }
    if d_grid.iter().any(|&d| d < 0.0 || !d.is_finite()) {
        return Err(Error::Domain("scan grid must be nonnegative".into()));
    }

    let (perm_h, _) = perm_pair(h)?;
    if perm_h <= 0.0 {
        return Err(Error::Domain("perm(H) must be positive for ratio scans".into()));
    }
    let eval = |d: f64| -> Result<f64> {
        let g = hadamard(h, &time_delay_matrix(tau, d))?;
        let (p, _) = perm_pair(&g)?;
        Ok(p)
    };

    let rows: Vec<ScanRow> = d_grid
        .par_iter()
        .map(|&d| {
            let perm_hs = eval(d)?;
            Ok(ScanRow {
                d,
                ratio: perm_hs / perm_h,
                perm_hs,
                perm_h,
            })
        })
        .collect::<Result<_>>()?;

    // refine the grid maximum by golden-section search over the bracketing
    // interval (argmax ± one grid step)
    let imax = rows
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.ratio.partial_cmp(&b.1.ratio).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let lo = rows[imax.saturating_sub(1)].d;
    let hi = rows[(imax + 1).min(rows.len() - 1)].d;
    let (d_max, r_max) = if hi > lo {
        let (d, p) = golden_max(&eval, lo, hi, 1e-6)?;
        (d, p / perm_h)
    } else {
        (rows[imax].d, rows[imax].ratio)
    };

    // quadratic coefficient from a fixed 11-point window d <= 0.05,
    // least squares through R(0) = 1 in the variable d²
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..QUAD_FIT_POINTS {
        let d = QUAD_FIT_MAX_D * i as f64 / (QUAD_FIT_POINTS - 1) as f64;
        let r = eval(d)? / perm_h;
        num += (r - 1.0) * d * d;
        den += d.powi(4);
    }
    let quad_coeff = num / den;

    Ok(ViolationScan {
        rows,
        d_max,
        r_max,
        quad_coeff,
    })
}

fn golden_max(eval: &dyn Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d)?;
        }
    }
    let mid = 0.5 * (a + b);
    Ok((mid, eval(mid)?))
}

/// Families accepted by [`monotonicity_check`].
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotoneModel {
    XModel,
    XiModel,
    TwoSet { k: usize },
}

/// Result of sampling derivative signs over random parameter points. The
/// families here are proven monotone, so any derivative below the noise
/// floor signals an implementation bug, not a discovery.
#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub samples: usize,
    pub evaluations: usize,
    pub min_derivative: f64,
    pub violations: usize,
}

pub fn monotonicity_check(
    model: MonotoneModel,
    h: &CMatrix,
    samples: usize,
    seed: u64,
) -> Result<MonotonicityReport> {
    use rand::{Rng, SeedableRng};
    validate_h(h)?;
    let n = h.rows();
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let perm_scale = perm_ryser(h)?.re().abs().max(1.0);
    let floor = -1e-9 * perm_scale;

    let mut min_derivative = f64::INFINITY;
    let mut evaluations = 0usize;
    let mut violations = 0usize;
    for _ in 0..samples {
        let derivs: Vec<f64> = match model {
            MonotoneModel::XModel => {
                let x = rng.random::<f64>();
                vec![perm_derivative(&XModelFamily { h: h.clone() }, x)?]
            }
            MonotoneModel::XiModel => {
                let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                (0..n)
                    .map(|index| {
                        let fam = XiModelFamily {
                            h: h.clone(),
                            x: x.clone(),
                            index,
                        };
                        perm_derivative(&fam, x[index])
                    })
                    .collect::<Result<_>>()?
            }
            MonotoneModel::TwoSet { k } => {
                if k == 0 || k >= n {
                    return Err(Error::Domain(format!("two-set split needs 1 <= k < n, got {k}")));
                }
                let x = rng.random::<f64>();
                vec![perm_derivative(&TwoSetFamily { h: h.clone(), k }, x)?]
            }
        };
        for d in derivs {
            evaluations += 1;
            min_derivative = min_derivative.min(d);
            if d < floor {
                violations += 1;
            }
        }
    }
    Ok(MonotonicityReport {
        samples,
        evaluations,
        min_derivative,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gram::{compile_gram, GramSpec};
    use crate::interferometer::haar_unitary;
    use crate::matrix::gram_from_vectors;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn hom_h() -> CMatrix {
        CMatrix::from_real_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap()
    }

    fn random_gram(rng: &mut ChaCha12Rng, n: usize) -> CMatrix {
        let states: Vec<Vec<Complex64>> = (0..n)
            .map(|_| {
                let mut v: Vec<Complex64> = (0..n)
                    .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                    .collect();
                let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                v.iter_mut().for_each(|z| *z /= norm);
                v
            })
            .collect();
        gram_from_vectors(&states).unwrap()
    }

    fn random_h(rng: &mut ChaCha12Rng, n: usize) -> CMatrix {
        // random PSD with spectrum in [0, 1]: Gram scaled below its top
        // eigenvalue
        let g = random_gram(rng, n);
        let eigs = hermitian_eigenvalues(&g).unwrap();
        let top = eigs.last().unwrap();
        g.scale_re(1.0 / (top * (1.0 + 1e-12)))
    }

    #[test]
    fn hom_probabilities() {
        let ones = CMatrix::ones(2, 2);
        let id = CMatrix::identity(2);
        let r = bunching_prob(&hom_h(), &ones).unwrap();
        assert!((r.probability - 0.5).abs() < 1e-12);
        let r = bunching_prob(&hom_h(), &id).unwrap();
        assert!((r.probability - 0.25).abs() < 1e-12);
    }

    #[test]
    fn indistinguishable_s_gives_perm_h() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for n in 2..=5 {
            let h = random_h(&mut rng, n);
            let r = bunching_prob(&h, &CMatrix::ones(n, n)).unwrap();
            let direct = perm_ryser(&h).unwrap().re();
            assert!((r.probability - direct).abs() <= 1e-12 * direct.max(1e-300));
        }
    }

    #[test]
    fn rejects_oversized_spectrum() {
        let h = CMatrix::from_real_rows(&[vec![2.0, 0.0], vec![0.0, 0.5]]).unwrap();
        assert!(matches!(
            bunching_prob(&h, &CMatrix::ones(2, 2)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn single_mode_closed_forms() {
        let u = haar_unitary(4, 3);
        let scene = InterferometerScene::new(u.clone(), 3, &[1]).unwrap();
        let classical: f64 = (0..3).map(|i| u.at(1, i).norm_sqr()).product();

        let id = CMatrix::identity(3);
        let r = single_mode_bunching(&scene, &id, 1).unwrap();
        assert!((r.probability - classical).abs() < 1e-14);

        let ones = CMatrix::ones(3, 3);
        let r = single_mode_bunching(&scene, &ones, 1).unwrap();
        assert!((r.probability - classical * 6.0).abs() < 1e-12);
    }

    #[test]
    fn single_mode_matches_multimode_on_x_model() {
        let u = haar_unitary(4, 11);
        let scene = InterferometerScene::new(u, 4, &[2]).unwrap();
        let s = compile_gram(&GramSpec::XModel { n: 4, x: 0.7 }).unwrap();
        // the cross-validation against perm(H ⊙ S) runs inside the call
        single_mode_bunching(&scene, &s, 2).unwrap();
    }

    #[test]
    fn mixed_pure_limit_reduces_to_ones() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let h = random_h(&mut rng, 3);
        let ens = MixedEnsemble::uniform(3, &[1.0]).unwrap();
        let mixed = bunching_prob_mixed(&h, &ens).unwrap();
        let pure = bunching_prob(&h, &CMatrix::ones(3, 3)).unwrap();
        assert!((mixed.probability - pure.probability).abs() < 1e-13);
    }

    #[test]
    fn mixed_hom_maximally_mixed_hand_value() {
        // two photons, each maximally mixed over two orthogonal states, on
        // the 50:50 splitter: 1/2 · 1/2 + 1/2 · 1/4 = 3/8 by enumerating the
        // four label tuples
        let ens = MixedEnsemble::uniform(2, &[0.5, 0.5]).unwrap();
        assert_eq!(ens.components().len(), 4);
        let r = bunching_prob_mixed(&hom_h(), &ens).unwrap();
        assert!((r.probability - 0.375).abs() < 1e-14, "got {}", r.probability);
    }

    #[test]
    fn mixed_term_guard() {
        assert!(matches!(
            MixedEnsemble::uniform(21, &[0.5, 0.5]),
            Err(Error::SizeGuard(_))
        ));
    }

    #[test]
    fn mixed_bound_by_indistinguishable() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for _ in 0..200 {
            let n = 2 + (rng.random::<u32>() % 4) as usize; // 2..=5
            let h = random_h(&mut rng, n);
            let perm_h = perm_ryser(&h).unwrap().re();
            let l = 1 + (rng.random::<u32>() % 3) as usize;
            let mut sp: Vec<f64> = (0..l).map(|_| rng.random::<f64>() + 1e-3).collect();
            let total: f64 = sp.iter().sum();
            sp.iter_mut().for_each(|a| *a /= total);
            let ens = MixedEnsemble::uniform(n, &sp).unwrap();
            let r = bunching_prob_mixed(&h, &ens).unwrap();
            assert!(
                r.probability <= perm_h + 1e-9 * perm_h.max(1.0),
                "uniform mixed state bunches more than perm(H): {} > {}",
                r.probability,
                perm_h
            );
        }
    }

    #[test]
    fn derivative_constant_family_is_zero() {
        struct Const(CMatrix);
        impl MatrixFamily for Const {
            fn value(&self, _x: f64) -> Result<CMatrix> {
                Ok(self.0.clone())
            }
            fn derivative(&self, _x: f64) -> Result<CMatrix> {
                Ok(CMatrix::zeros(self.0.rows(), self.0.cols()))
            }
        }
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let fam = Const(random_gram(&mut rng, 4));
        let d = perm_derivative(&fam, 0.3).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn derivative_2x2_square_family() {
        // G(x) = [[x², x²/2], [x²/2, x²]]: perm = x⁴ + x⁴/4, d/dx = 5x³
        struct Sq;
        impl MatrixFamily for Sq {
            fn value(&self, x: f64) -> Result<CMatrix> {
                CMatrix::from_real_rows(&[vec![x * x, x * x / 2.0], vec![x * x / 2.0, x * x]])
            }
            fn derivative(&self, x: f64) -> Result<CMatrix> {
                CMatrix::from_real_rows(&[vec![2.0 * x, x], vec![x, 2.0 * x]])
            }
        }
        let d = perm_derivative(&Sq, 0.7).unwrap();
        assert!((d - 5.0 * 0.7f64.powi(3)).abs() < 1e-10);
    }

    #[test]
    fn delay_derivative_formulas_agree() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for trial in 0..20 {
            let n = 3 + (trial % 4);
            let h = random_h(&mut rng, n);
            let mut tau: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            let norm = tau.iter().map(|t| t * t).sum::<f64>().sqrt();
            tau.iter_mut().for_each(|t| *t /= norm);
            let d = 0.3 + rng.random::<f64>();

            let profile = DelayProfile::new(tau.clone(), d, 1.0).unwrap();
            let (first, _) = delay_derivative(&h, &profile).unwrap();
            let fam = TimeDelayFamily { h: h.clone(), tau };
            let generic = perm_derivative(&fam, d).unwrap();
            assert!(
                (first - generic).abs() <= 1e-9 * first.abs().max(generic.abs()).max(1e-12),
                "closed form {first:.12e} vs generic {generic:.12e}"
            );
        }
    }

    #[test]
    fn delay_derivative_zero_at_origin() {
        let mut rng = ChaCha12Rng::seed_from_u64(88);
        let h = random_h(&mut rng, 4);
        let tau = vec![0.5; 4];
        let profile = DelayProfile::new(tau, 0.0, 1.0).unwrap();
        let (first, _) = delay_derivative(&h, &profile).unwrap();
        assert_eq!(first, 0.0);
    }

    #[test]
    fn anomaly_margin_of_ones_is_zero() {
        for n in 2..=7 {
            let report = anomaly_criterion(&CMatrix::ones(n, n)).unwrap();
            let nf: f64 = (1..=n).map(|k| k as f64).product();
            assert!(
                report.criterion_margin.abs() <= 1e-9 * nf,
                "n={n}: margin {} exceeds noise floor",
                report.criterion_margin
            );
            assert!(!report.anomalous);
        }
    }

    #[test]
    fn small_grams_never_anomalous() {
        let mut rng = ChaCha12Rng::seed_from_u64(3000);
        for _ in 0..500 {
            let n = 2 + (rng.random::<u32>() % 2) as usize;
            let g = random_gram(&mut rng, n);
            let report = anomaly_criterion(&g).unwrap();
            assert!(!report.anomalous, "margin {} at n={n}", report.criterion_margin);
        }
    }

    #[test]
    fn scan_starts_at_one() {
        let mut rng = ChaCha12Rng::seed_from_u64(15);
        let h = random_h(&mut rng, 4);
        let mut tau = vec![0.1, -0.4, 0.7, 0.2];
        let norm: f64 = tau.iter().map(|t| t * t).sum::<f64>().sqrt();
        tau.iter_mut().for_each(|t| *t /= norm);
        let grid = uniform_grid(0.0, 0.5, 26);
        let scan = violation_scan(&h, &tau, &grid).unwrap();
        assert_eq!(scan.rows[0].ratio, 1.0);
        assert_eq!(scan.rows.len(), 26);
        // CSV round trip at 17 significant digits
        let csv = scan.to_csv();
        let line = csv.lines().nth(5).unwrap();
        let fields: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields[0], scan.rows[4].d);
        assert_eq!(fields[1], scan.rows[4].ratio);
    }

    #[test]
    fn monotone_families_have_nonnegative_derivatives() {
        let mut rng = ChaCha12Rng::seed_from_u64(61);
        let h = random_h(&mut rng, 5);
        for model in [MonotoneModel::XModel, MonotoneModel::XiModel, MonotoneModel::TwoSet { k: 2 }] {
            let report = monotonicity_check(model, &h, 20, 17).unwrap();
            assert_eq!(report.violations, 0, "{model:?}: {report:?}");
        }
    }

    #[test]
    fn x_model_endpoint_recovers_perm_h() {
        let mut rng = ChaCha12Rng::seed_from_u64(62);
        let h = random_h(&mut rng, 4);
        let fam = XModelFamily { h: h.clone() };
        let s1 = fam.value(1.0).unwrap();
        let direct = perm_ryser(&h).unwrap();
        let at_one = perm_ryser(&s1).unwrap();
        assert!(direct.rel_diff(&at_one) < 1e-15);
    }
}
