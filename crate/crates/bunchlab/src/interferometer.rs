//! Everything that produces or consumes a unitary: detection scenes and
//! their H matrices, row-block embeddings into larger unitaries, Haar-random
//! sampling, triangular beam-splitter decompositions, and the cascaded
//! construction that yields rank-one H matrices.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{hermitian_eigenvalues, psd_sqrt, singular_values, CMatrix};

/// Max-entry tolerance on ‖U†U − 1‖ for accepting a matrix as unitary.
pub const UNITARY_TOL: f64 = 1e-10;

/// Gram–Schmidt candidates whose residual norm falls below this are skipped
/// during row completion.
const COMPLETION_RESIDUAL_TOL: f64 = 1e-8;

/// A unitary together with a photon count and a detected output-mode subset.
///
/// Photons enter modes 0..n−1. `kappa` must be a nonempty proper subset of
/// the output modes (all indices 0-based).
#[derive(Debug, Clone)]
pub struct InterferometerScene {
    u: CMatrix,
    n: usize,
    kappa: Vec<usize>,
}

/// Max entry of |U†U − 1|.
pub fn unitarity_residual(u: &CMatrix) -> Result<f64> {
    if !u.is_square() {
        return Err(Error::Dimension("unitarity check needs a square matrix".into()));
    }
    let gram = u.dagger().matmul(u)?;
    Ok(gram.sub(&CMatrix::identity(u.rows()))?.max_abs())
}

impl InterferometerScene {
    pub fn new(u: CMatrix, n: usize, kappa: &[usize]) -> Result<Self> {
        let m = u.rows();
        let residual = unitarity_residual(&u)?;
        if residual > UNITARY_TOL {
            return Err(Error::Domain(format!(
                "matrix is not unitary: residual {residual:.3e} exceeds {UNITARY_TOL:.0e}"
            )));
        }
        if n == 0 || n > m {
            return Err(Error::Domain(format!(
                "photon count must satisfy 1 <= n <= m (n={n}, m={m})"
            )));
        }
        let mut kappa: Vec<usize> = kappa.to_vec();
        kappa.sort_unstable();
        kappa.dedup();
        if kappa.is_empty() || kappa.len() >= m {
            return Err(Error::Domain(
                "detected subset must be a nonempty proper subset of the output modes".into(),
            ));
        }
        if kappa.iter().any(|&k| k >= m) {
            return Err(Error::Index(format!("mode index outside 0..{m}")));
        }
        Ok(InterferometerScene { u, n, kappa })
    }

    pub fn unitary(&self) -> &CMatrix {
        &self.u
    }

    pub fn photons(&self) -> usize {
        self.n
    }

    pub fn kappa(&self) -> &[usize] {
        &self.kappa
    }

    pub fn modes(&self) -> usize {
        self.u.rows()
    }

    /// Same unitary and photons, detecting the complementary mode subset.
    pub fn complement(&self) -> Result<Self> {
        let comp: Vec<usize> = (0..self.modes()).filter(|k| !self.kappa.contains(k)).collect();
        InterferometerScene::new(self.u.clone(), self.n, &comp)
    }

    /// Same unitary and photons, different detected subset.
    pub fn with_kappa(&self, kappa: &[usize]) -> Result<Self> {
        InterferometerScene::new(self.u.clone(), self.n, kappa)
    }
}

/// The n×n matrix H_ij = Σ_{k∈κ} U*_{k,i} U_{k,j}. Always PSD Hermitian with
/// spectrum inside [0, 1].
pub fn h_matrix(scene: &InterferometerScene) -> Result<CMatrix> {
    let u = scene.unitary();
    let n = scene.photons();
    let mut h = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for &k in scene.kappa() {
                acc += u.at(k, i).conj() * u.at(k, j);
            }
            h.set(i, j, acc);
            if j != i {
                h.set(j, i, acc.conj());
            } else {
                h.set(i, i, Complex64::new(acc.re, 0.0));
            }
        }
    }
    let eigs = hermitian_eigenvalues(&h)?;
    let min = eigs.first().copied().unwrap_or(0.0);
    let max = eigs.last().copied().unwrap_or(0.0);
    if min < -1e-10 || max > 1.0 + 1e-10 {
        return Err(Error::Internal(format!(
            "H spectrum [{min:.3e}, {max:.3e}] escapes [0, 1]"
        )));
    }
    Ok(h)
}

/// Embed a full-row-rank r×c block `m_block` (r <= c) as the upper-left block
/// of a (c+r)×(c+r) unitary, scaled by √γ with γ = 1/σ_max(m_block)².
///
/// The first r rows are [√γ·M | B] with Hermitian B solving BB† = 1 − γMM†;
/// the remaining rows come from deterministic modified Gram–Schmidt over
/// canonical basis vectors. Returns the scene (photons = c, detected modes =
/// the first r) and γ, so that h_matrix(scene) = γ·M†M.
pub fn embed_rows(m_block: &CMatrix) -> Result<(InterferometerScene, f64)> {
    let r = m_block.rows();
    let c = m_block.cols();
    if r > c {
        return Err(Error::Dimension(format!(
            "embedding needs r <= c, got {r}x{c}"
        )));
    }
    let svs = singular_values(m_block)?;
    let sigma_max = svs[0];
    let sigma_min = svs[r - 1];
    if sigma_max <= 0.0 || sigma_min <= 1e-12 * sigma_max {
        return Err(Error::Domain(format!(
            "block is rank-deficient: sigma_min/sigma_max = {:.3e}",
            sigma_min / sigma_max.max(f64::MIN_POSITIVE)
        )));
    }
    let gamma = 1.0 / (sigma_max * sigma_max);
    let sqrt_gamma = gamma.sqrt();

    // completion block B with BB† = 1 − γ M M†  (Hermitian PSD square root)
    let mm = m_block.matmul(&m_block.dagger())?;
    let defect = CMatrix::identity(r).sub(&mm.scale_re(gamma))?;
    let b = psd_sqrt(&defect)?;

    let total = c + r;
    let mut u = CMatrix::zeros(total, total);
    for i in 0..r {
        for j in 0..c {
            u.set(i, j, m_block.at(i, j) * sqrt_gamma);
        }
        for j in 0..r {
            u.set(i, j + c, b.at(i, j));
        }
    }

    // fill remaining c rows from canonical basis vectors, two Gram–Schmidt
    // passes each, skipping candidates that collapse
    let mut have = r;
    let mut cand = 0usize;
    while have < total {
        if cand >= total {
            return Err(Error::Internal(
                "ran out of completion candidates during row embedding".into(),
            ));
        }
        let mut v = vec![Complex64::new(0.0, 0.0); total];
        v[cand] = Complex64::new(1.0, 0.0);
        cand += 1;
        for _pass in 0..2 {
            for row in 0..have {
                let mut ip = Complex64::new(0.0, 0.0);
                for k in 0..total {
                    ip += u.at(row, k).conj() * v[k];
                }
                for k in 0..total {
                    let delta = ip * u.at(row, k);
                    v[k] -= delta;
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < COMPLETION_RESIDUAL_TOL {
            continue;
        }
        for k in 0..total {
            u.set(have, k, v[k] / norm);
        }
        have += 1;
    }

    let kappa: Vec<usize> = (0..r).collect();
    let scene = InterferometerScene::new(u, c, &kappa)?;
    Ok((scene, gamma))
}

/// Haar-distributed m×m unitary: QR of a complex Ginibre matrix by modified
/// Gram–Schmidt, with the R diagonal kept real positive (which fixes the
/// column phases and makes the distribution exactly Haar). Deterministic for
/// a fixed seed.
pub fn haar_unitary(m: usize, seed: u64) -> CMatrix {
    assert!(m >= 1, "mode count must be positive");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut g = CMatrix::from_fn(m, m, |_, _| gaussian_complex(&mut rng));
    // MGS on columns, two passes per column
    for j in 0..m {
        let mut col: Vec<Complex64> = (0..m).map(|i| g.at(i, j)).collect();
        for _pass in 0..2 {
            for prev in 0..j {
                let mut ip = Complex64::new(0.0, 0.0);
                for i in 0..m {
                    ip += g.at(i, prev).conj() * col[i];
                }
                for i in 0..m {
                    let delta = ip * g.at(i, prev);
                    col[i] -= delta;
                }
            }
        }
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for i in 0..m {
            g.set(i, j, col[i] / norm);
        }
    }
    g
}

/// One standard complex Gaussian (components N(0, 1/2)), via Box–Muller on
/// the raw RNG stream so the output is stable across rand versions.
fn gaussian_complex(rng: &mut ChaCha12Rng) -> Complex64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random::<f64>();
    let r = (-2.0 * u1.ln()).sqrt() / 2f64.sqrt();
    let phase = 2.0 * std::f64::consts::PI * u2;
    Complex64::new(r * phase.cos(), r * phase.sin())
}

pub(crate) fn gaussian_complex_rng(rng: &mut ChaCha12Rng) -> Complex64 {
    gaussian_complex(rng)
}

/// One two-mode element of a beam-splitter mesh, acting on `(mode_a, mode_b)`
/// as the block [[e^{iφ}cosθ, −sinθ], [e^{iφ}sinθ, cosθ]].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BsElement {
    pub mode_a: usize,
    pub mode_b: usize,
    pub theta: f64,
    pub phi: f64,
}

/// Ordered beam-splitter mesh plus final per-mode phases. Reconstruction
/// applies the elements in list order to the input, then the phases.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BsNetwork {
    pub modes: usize,
    pub elements: Vec<BsElement>,
    pub phases: Vec<f64>,
}

impl BsNetwork {
    /// Rebuild the unitary this network implements.
    pub fn reconstruct(&self) -> CMatrix {
        let m = self.modes;
        let mut acc = CMatrix::identity(m);
        for el in &self.elements {
            // left-multiply by the element: rows mode_a, mode_b change
            let (a, b) = (el.mode_a, el.mode_b);
            let (ct, st) = (el.theta.cos(), el.theta.sin());
            let ph = Complex64::from_polar(1.0, el.phi);
            for j in 0..m {
                let ra = acc.at(a, j);
                let rb = acc.at(b, j);
                acc.set(a, j, ph * ct * ra - st * rb);
                acc.set(b, j, ph * st * ra + ct * rb);
            }
        }
        for (k, &phase) in self.phases.iter().enumerate() {
            let ph = Complex64::from_polar(1.0, phase);
            for j in 0..m {
                acc.set(k, j, acc.at(k, j) * ph);
            }
        }
        acc
    }
}

/// Triangular beam-splitter decomposition. Entries of the last row are
/// nulled leftward against the diagonal pivot, then the scheme recurses on
/// the leading block; at most m(m−1)/2 elements, near-zero rotations are
/// dropped.
pub fn reck_decompose(u: &CMatrix) -> Result<BsNetwork> {
    let residual = unitarity_residual(u)?;
    if residual > UNITARY_TOL {
        return Err(Error::Domain(format!(
            "cannot decompose a non-unitary matrix (residual {residual:.3e})"
        )));
    }
    let m = u.rows();
    let mut work = u.clone();
    let mut elements = Vec::new();
    for r in (1..m).rev() {
        for a in (0..r).rev() {
            let za = work.at(r, a);
            let zb = work.at(r, r);
            if za.norm() <= 1e-14 {
                work.set(r, a, Complex64::new(0.0, 0.0));
                continue;
            }
            let phi = za.arg() - zb.arg();
            let theta = za.norm().atan2(zb.norm());
            // right-multiply work by T†(a, r; θ, φ): columns a and r mix
            let eiphi = Complex64::from_polar(1.0, -phi);
            let (ct, st) = (theta.cos(), theta.sin());
            for row in 0..m {
                let ca = work.at(row, a);
                let cr = work.at(row, r);
                work.set(row, a, eiphi * ct * ca - st * cr);
                work.set(row, r, eiphi * st * ca + ct * cr);
            }
            work.set(r, a, Complex64::new(0.0, 0.0));
            elements.push(BsElement {
                mode_a: a,
                mode_b: r,
                theta,
                phi,
            });
        }
    }
    let phases: Vec<f64> = (0..m).map(|k| work.at(k, k).arg()).collect();
    Ok(BsNetwork {
        modes: m,
        elements,
        phases,
    })
}

/// Cascade two interferometers: the photons traverse `u1`, then output mode
/// `out_mode` of `u1` is split by `u2` (its other inputs in vacuum). The
/// returned scene has m1 photons entering `u1`, detects all outputs of `u2`,
/// and its H matrix is rank one.
pub fn cascade_rank_one(u1: &CMatrix, out_mode: usize, u2: &CMatrix) -> Result<InterferometerScene> {
    let r1 = unitarity_residual(u1)?;
    let r2 = unitarity_residual(u2)?;
    if r1 > UNITARY_TOL || r2 > UNITARY_TOL {
        return Err(Error::Domain("cascade inputs must be unitary".into()));
    }
    let m1 = u1.rows();
    let m2 = u2.rows();
    if out_mode >= m1 {
        return Err(Error::Index(format!(
            "output mode {out_mode} outside the {m1} modes of the first interferometer"
        )));
    }
    let m = m1 + m2 - 1;

    // stage 1: u1 on modes 0..m1, identity on the extra modes
    let mut stage1 = CMatrix::identity(m);
    for i in 0..m1 {
        for j in 0..m1 {
            stage1.set(i, j, u1.at(i, j));
        }
    }
    // stage 2: u2 on [out_mode, m1, .., m1+m2-2]
    let mut modes2 = Vec::with_capacity(m2);
    modes2.push(out_mode);
    modes2.extend(m1..m);
    let mut stage2 = CMatrix::identity(m);
    for (a, &ma) in modes2.iter().enumerate() {
        for (b, &mb) in modes2.iter().enumerate() {
            stage2.set(ma, mb, u2.at(a, b));
        }
    }
    let w = stage2.matmul(&stage1)?;

    let mut kappa = modes2;
    kappa.sort_unstable();
    let scene = InterferometerScene::new(w, m1, &kappa)?;

    // rank-one guarantee: second eigenvalue of H negligible
    let h = h_matrix(&scene)?;
    let eigs = hermitian_eigenvalues(&h)?;
    let top = eigs.last().copied().unwrap_or(0.0);
    let second = if eigs.len() >= 2 { eigs[eigs.len() - 2] } else { 0.0 };
    if second.abs() > 1e-10 * top.max(f64::MIN_POSITIVE) {
        return Err(Error::Internal(format!(
            "cascade H has second eigenvalue {second:.3e}, expected rank one"
        )));
    }
    Ok(scene)
}
