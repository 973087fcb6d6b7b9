//! Distinguishability matrices: declarative Gram-matrix models, gauge
//! transformations, and the test for membership in the gauge class of
//! entrywise-nonnegative matrices.
//!
//! Every model compiles to an n×n PSD Hermitian matrix with unit diagonal;
//! compilation re-validates both properties and fails hard otherwise, since
//! every downstream inequality presumes them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{check_psd_hermitian, hadamard, CMatrix, HERMITIAN_TOL};

/// Angular tolerance for the cycle-consistency check in
/// [`nonneg_class_test`].
const ANGULAR_TOL: f64 = 1e-8;

/// Declarative description of a distinguishability model; compiles to a Gram
/// matrix with [`compile_gram`]. The JSON form tags the variant with `kind`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GramSpec {
    /// Fully indistinguishable photons: the all-ones matrix.
    AllOnes { n: usize },
    /// Fully distinguishable photons: the identity.
    Identity { n: usize },
    /// Uniform pairwise overlap: S_ij = x² off the diagonal.
    XModel { n: usize, x: f64 },
    /// Photon-dependent interpolation: S_ij = x_i x_j off the diagonal.
    XiModel { x: Vec<f64> },
    /// Entrywise product of a base Gram matrix with an `XiModel`:
    /// S_ij = base_ij · x_i x_j off the diagonal.
    Interpolated { base: Box<GramSpec>, x: Vec<f64> },
    /// Two internally indistinguishable sets of k and n−k photons with
    /// mutual overlap x.
    TwoSet { k: usize, n: usize, x: f64 },
    /// Block-diagonal concatenation of mutually orthogonal sets.
    DirectSum { blocks: Vec<GramSpec> },
    /// Gaussian wave packets offset along a delay direction.
    TimeDelay {
        tau: Vec<f64>,
        d: f64,
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
    /// An explicit Gram matrix, validated at compile time.
    Explicit { matrix: CMatrix },
}

fn default_sigma() -> f64 {
    1.0
}

impl GramSpec {
    /// Photon count of the compiled matrix.
    pub fn photons(&self) -> usize {
        match self {
            GramSpec::AllOnes { n } | GramSpec::Identity { n } | GramSpec::XModel { n, .. } => *n,
            GramSpec::XiModel { x } => x.len(),
            GramSpec::Interpolated { x, .. } => x.len(),
            GramSpec::TwoSet { n, .. } => *n,
            GramSpec::DirectSum { blocks } => blocks.iter().map(|b| b.photons()).sum(),
            GramSpec::TimeDelay { tau, .. } => tau.len(),
            GramSpec::Explicit { matrix } => matrix.rows(),
        }
    }
}

/// Normalized arrival-time direction plus delay strength for Gaussian wave
/// packets. `sigma` is informational: the compiled matrix depends only on
/// `tau` and `d`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DelayProfile {
    tau: Vec<f64>,
    d: f64,
    sigma: f64,
}

impl DelayProfile {
    pub fn new(tau: Vec<f64>, d: f64, sigma: f64) -> Result<Self> {
        if tau.is_empty() {
            return Err(Error::Dimension("delay direction must be nonempty".into()));
        }
        if tau.iter().any(|t| !t.is_finite()) {
            return Err(Error::Domain("delay direction has non-finite entries".into()));
        }
        let norm = tau.iter().map(|t| t * t).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "delay direction must be unit norm (got {norm:.15})"
            )));
        }
        if !(d >= 0.0) || !d.is_finite() {
            return Err(Error::Domain(format!("delay strength must be >= 0 (got {d})")));
        }
        if !(sigma > 0.0) {
            return Err(Error::Domain(format!("wave-packet width must be > 0 (got {sigma})")));
        }
        Ok(DelayProfile { tau, d, sigma })
    }

    /// Normalize an arbitrary nonzero direction vector first.
    pub fn from_direction(dir: &[f64], d: f64, sigma: f64) -> Result<Self> {
        let norm = dir.iter().map(|t| t * t).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Domain("cannot normalize a zero delay direction".into()));
        }
        Self::new(dir.iter().map(|t| t / norm).collect(), d, sigma)
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn delay_strength(&self) -> f64 {
        self.d
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

fn check_x_range(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) || !x.is_finite() {
        return Err(Error::Domain(format!(
            "interpolation parameter must lie in [0, 1] (got {x})"
        )));
    }
    Ok(())
}

/// Validate PSD-Hermitian-with-unit-diagonal, the contract of every compiled
/// Gram matrix.
pub fn validate_gram(s: &CMatrix) -> Result<()> {
    let report = check_psd_hermitian(s, HERMITIAN_TOL)?;
    if !report.is_psd {
        return Err(Error::Domain(format!(
            "compiled matrix is not PSD Hermitian (asymmetry {:.3e}, min eigenvalue {:.3e})",
            report.max_asymmetry, report.min_eigenvalue
        )));
    }
    for i in 0..s.rows() {
        if (s.at(i, i) - Complex64::new(1.0, 0.0)).norm() > 1e-10 {
            return Err(Error::Domain(format!(
                "compiled matrix diagonal entry {i} is {} instead of 1",
                s.at(i, i)
            )));
        }
    }
    Ok(())
}

/// Compile a [`GramSpec`] to its distinguishability matrix and validate it.
pub fn compile_gram(spec: &GramSpec) -> Result<CMatrix> {
    let s = compile_unchecked(spec)?;
    validate_gram(&s)?;
    Ok(s)
}

fn compile_unchecked(spec: &GramSpec) -> Result<CMatrix> {
    match spec {
        GramSpec::AllOnes { n } => {
            require_photons(*n)?;
            Ok(CMatrix::ones(*n, *n))
        }
        GramSpec::Identity { n } => {
            require_photons(*n)?;
            Ok(CMatrix::identity(*n))
        }
        GramSpec::XModel { n, x } => {
            require_photons(*n)?;
            check_x_range(*x)?;
            let off = x * x;
            Ok(CMatrix::from_fn(*n, *n, |i, j| {
                Complex64::new(if i == j { 1.0 } else { off }, 0.0)
            }))
        }
        GramSpec::XiModel { x } => {
            require_photons(x.len())?;
            for &xi in x {
                check_x_range(xi)?;
            }
            let n = x.len();
            Ok(CMatrix::from_fn(n, n, |i, j| {
                Complex64::new(if i == j { 1.0 } else { x[i] * x[j] }, 0.0)
            }))
        }
        GramSpec::Interpolated { base, x } => {
            let base_s = compile_gram(base)?;
            if base_s.rows() != x.len() {
                return Err(Error::Dimension(format!(
                    "interpolation vector length {} does not match base size {}",
                    x.len(),
                    base_s.rows()
                )));
            }
            let xi = compile_unchecked(&GramSpec::XiModel { x: x.clone() })?;
            hadamard(&base_s, &xi)
        }
        GramSpec::TwoSet { k, n, x } => {
            require_photons(*n)?;
            check_x_range(*x)?;
            if *k == 0 || *k >= *n {
                return Err(Error::Domain(format!(
                    "two-set split needs 1 <= k < n, got k={k}, n={n}"
                )));
            }
            let k = *k;
            Ok(CMatrix::from_fn(*n, *n, |i, j| {
                let same_set = (i < k) == (j < k);
                Complex64::new(if same_set { 1.0 } else { *x }, 0.0)
            }))
        }
        GramSpec::DirectSum { blocks } => {
            if blocks.is_empty() {
                return Err(Error::Dimension("direct sum needs at least one block".into()));
            }
            let compiled: Vec<CMatrix> = blocks
                .iter()
                .map(compile_gram)
                .collect::<Result<_>>()?;
            let n: usize = compiled.iter().map(|b| b.rows()).sum();
            let mut s = CMatrix::zeros(n, n);
            let mut off = 0;
            for b in &compiled {
                for i in 0..b.rows() {
                    for j in 0..b.rows() {
                        s.set(off + i, off + j, b.at(i, j));
                    }
                }
                off += b.rows();
            }
            Ok(s)
        }
        GramSpec::TimeDelay { tau, d, sigma } => {
            let profile = DelayProfile::new(tau.clone(), *d, *sigma)?;
            compile_time_delay_unchecked(&profile)
        }
        GramSpec::Explicit { matrix } => {
            if !matrix.is_square() {
                return Err(Error::Dimension("explicit Gram matrix must be square".into()));
            }
            Ok(matrix.clone())
        }
    }
}

fn require_photons(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Dimension("photon count must be >= 1".into()));
    }
    Ok(())
}

/// Gaussian-overlap matrix S_ij = exp(−(τ_i − τ_j)² d²). Real symmetric,
/// unit diagonal, entries in (0, 1]; already gauge-canonical.
pub fn compile_time_delay(profile: &DelayProfile) -> Result<CMatrix> {
    let s = compile_time_delay_unchecked(profile)?;
    validate_gram(&s)?;
    Ok(s)
}

fn compile_time_delay_unchecked(profile: &DelayProfile) -> Result<CMatrix> {
    let tau = &profile.tau;
    let d2 = profile.d * profile.d;
    let n = tau.len();
    Ok(CMatrix::from_fn(n, n, |i, j| {
        let diff = tau[i] - tau[j];
        Complex64::new((-diff * diff * d2).exp(), 0.0)
    }))
}

/// Time-delay matrix for a raw (possibly negative) delay parameter, used by
/// derivative formulas and finite differencing. The matrix is even in `d`.
pub(crate) fn time_delay_matrix(tau: &[f64], d: f64) -> CMatrix {
    let n = tau.len();
    let d2 = d * d;
    CMatrix::from_fn(n, n, |i, j| {
        let diff = tau[i] - tau[j];
        Complex64::new((-diff * diff * d2).exp(), 0.0)
    })
}

/// Entrywise phase rotation s_ij → e^{i(θ_j − θ_i)} s_ij. Leaves the
/// diagonal, PSD-ness, and all bunching probabilities unchanged.
pub fn gauge_transform(s: &CMatrix, thetas: &[f64]) -> Result<CMatrix> {
    if !s.is_square() {
        return Err(Error::Dimension("gauge transform needs a square matrix".into()));
    }
    if thetas.len() != s.rows() {
        return Err(Error::Dimension(format!(
            "phase vector length {} does not match matrix size {}",
            thetas.len(),
            s.rows()
        )));
    }
    let n = s.rows();
    Ok(CMatrix::from_fn(n, n, |i, j| {
        s.at(i, j) * Complex64::from_polar(1.0, thetas[j] - thetas[i])
    }))
}

/// Result of [`nonneg_class_test`]: whether the matrix is gauge-equivalent to
/// an entrywise-nonnegative matrix, with witnessing phases when it is.
#[derive(Debug, Clone, Serialize)]
pub struct NonnegClassReport {
    pub member: bool,
    pub thetas: Option<Vec<f64>>,
}

/// Scale-free default threshold below which entries count as zero
/// (phase wildcards) in [`nonneg_class_test`].
pub fn default_nonneg_tol(h: &CMatrix) -> f64 {
    1e-12 * h.max_abs()
}

/// Decide whether `h` lies in the gauge equivalence class of entrywise
/// nonnegative matrices. Entries with |h_ij| <= tol are wildcards. The
/// decision is exact up to the tolerance: a spanning forest fixes candidate
/// phases and every remaining edge is checked for phase consistency.
pub fn nonneg_class_test(h: &CMatrix, tol: f64) -> Result<NonnegClassReport> {
    if !h.is_square() {
        return Err(Error::Dimension("nonneg class test needs a square matrix".into()));
    }
    let n = h.rows();
    let significant = |i: usize, j: usize| h.at(i, j).norm() > tol;

    let mut thetas = vec![0.0f64; n];
    let mut visited = vec![false; n];
    for root in 0..n {
        if visited[root] {
            continue;
        }
        visited[root] = true;
        thetas[root] = 0.0;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if !visited[j] && significant(i, j) {
                    // want e^{i(θ_j − θ_i)} h_ij >= 0, i.e. θ_j = θ_i − arg(h_ij)
                    thetas[j] = thetas[i] - h.at(i, j).arg();
                    visited[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }

    for i in 0..n {
        for j in 0..n {
            if i == j || !significant(i, j) {
                continue;
            }
            let rotated = h.at(i, j) * Complex64::from_polar(1.0, thetas[j] - thetas[i]);
            if rotated.arg().abs() > ANGULAR_TOL {
                return Ok(NonnegClassReport {
                    member: false,
                    thetas: None,
                });
            }
        }
    }
    Ok(NonnegClassReport {
        member: true,
        thetas: Some(thetas),
    })
}
