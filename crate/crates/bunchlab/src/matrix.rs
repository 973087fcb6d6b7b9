//! Dense complex matrices and the small-matrix linear algebra primitives the
//! rest of the crate is built on: Hermitian/PSD checks, Hadamard products,
//! a cyclic-Jacobi eigensolver, PSD square roots, Gram construction, and
//! spectral norms.
//!
//! Everything here targets matrices of dimension a few dozen at most. The
//! eigensolver is a plain cyclic Jacobi on real symmetric matrices; Hermitian
//! problems are reduced to real symmetric ones of doubled dimension via the
//! `[[Re, -Im], [Im, Re]]` embedding so there is a single eigensolver code
//! path.

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default absolute tolerance on entry asymmetry `|a_ij - conj(a_ji)|`.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Eigenvalues above `-PSD_EIG_TOL * lambda_max` are treated as zero when
/// deciding positive semidefiniteness or clipping for square roots.
pub const PSD_EIG_TOL: f64 = 1e-12;

/// Jacobi stops when the off-diagonal Frobenius norm drops below this
/// fraction of the full Frobenius norm.
const JACOBI_OFF_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Components below this magnitude are skipped when fixing eigenvector signs.
const SIGN_CONVENTION_TOL: f64 = 1e-12;

/// Dense rectangular complex matrix, row-major storage.
///
/// The JSON form is `{rows, cols, re: [...], im: [...]}` with flat row-major
/// arrays; deserialization rejects length mismatches and non-finite entries.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    /// Build from row-major data. Errors on an empty shape, a length
    /// mismatch, or any non-finite entry.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!("empty shape {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        let m = CMatrix { rows, cols, data };
        if !m.is_finite() {
            return Err(Error::Domain("matrix contains NaN or Inf".into()));
        }
        Ok(m)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// The all-ones matrix (every entry 1).
    pub fn ones(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![Complex64::new(1.0, 0.0); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMatrix { rows, cols, data }
    }

    pub fn from_rows(rows_in: &[Vec<Complex64>]) -> Result<Self> {
        let rows = rows_in.len();
        if rows == 0 {
            return Err(Error::Dimension("no rows".into()));
        }
        let cols = rows_in[0].len();
        if rows_in.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(rows, cols, rows_in.concat())
    }

    pub fn from_real_rows(rows_in: &[Vec<f64>]) -> Result<Self> {
        let converted: Vec<Vec<Complex64>> = rows_in
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&converted)
    }

    pub fn diag(entries: &[Complex64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &e) in entries.iter().enumerate() {
            m.set(i, i, e);
        }
        m
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn transpose(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self.at(j, i))
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self.at(j, i).conj())
    }

    pub fn matmul(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.at(i, k);
                if aik.re == 0.0 && aik.im == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    let v = out.at(i, j) + aik * rhs.at(k, j);
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, rhs: &CMatrix) -> Result<CMatrix> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &CMatrix) -> Result<CMatrix> {
        self.zip_with(rhs, |a, b| a - b)
    }

    fn zip_with(&self, rhs: &CMatrix, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<CMatrix> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::Dimension(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let data = self
            .data
            .iter()
            .zip(rhs.data.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(CMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, s: Complex64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_re(&self, s: f64) -> CMatrix {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise absolute difference; shapes must match.
    pub fn max_abs_diff(&self, rhs: &CMatrix) -> Result<f64> {
        let diff = self.sub(rhs)?;
        Ok(diff.max_abs())
    }

    /// Remove row `i` and column `j`.
    pub fn delete_row_col(&self, i: usize, j: usize) -> Result<CMatrix> {
        if !self.is_square() {
            return Err(Error::Dimension("minor of non-square matrix".into()));
        }
        let n = self.rows;
        if n < 2 {
            return Err(Error::Dimension("matrix too small for a minor".into()));
        }
        if i >= n || j >= n {
            return Err(Error::Index(format!("({i},{j}) outside {n}x{n}")));
        }
        let mut data = Vec::with_capacity((n - 1) * (n - 1));
        for r in 0..n {
            if r == i {
                continue;
            }
            for c in 0..n {
                if c == j {
                    continue;
                }
                data.push(self.at(r, c));
            }
        }
        Ok(CMatrix {
            rows: n - 1,
            cols: n - 1,
            data,
        })
    }

    /// Principal submatrix on the given (sorted, in-range) index set.
    pub fn principal_block(&self, idx: &[usize]) -> Result<CMatrix> {
        if !self.is_square() {
            return Err(Error::Dimension("principal block of non-square matrix".into()));
        }
        if idx.is_empty() || idx.iter().any(|&i| i >= self.rows) {
            return Err(Error::Index("principal block indices out of range".into()));
        }
        let k = idx.len();
        Ok(CMatrix::from_fn(k, k, |a, b| self.at(idx[a], idx[b])))
    }

    /// Row-major real parts, used by the real-symmetric eigensolver path.
    pub fn real_parts(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.re).collect()
    }
}

impl std::fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self.at(i, j);
                write!(f, "{:+.4e}{:+.4e}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixFileRepr {
    rows: usize,
    cols: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Serialize for CMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = MatrixFileRepr {
            rows: self.rows,
            cols: self.cols,
            re: self.data.iter().map(|z| z.re).collect(),
            im: self.data.iter().map(|z| z.im).collect(),
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = MatrixFileRepr::deserialize(deserializer)?;
        if repr.re.len() != repr.rows * repr.cols || repr.im.len() != repr.rows * repr.cols {
            return Err(D::Error::custom(format!(
                "matrix file: re/im must each hold {} entries",
                repr.rows * repr.cols
            )));
        }
        let data: Vec<Complex64> = repr
            .re
            .iter()
            .zip(repr.im.iter())
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        CMatrix::new(repr.rows, repr.cols, data).map_err(D::Error::custom)
    }
}

/// Entrywise (Hadamard) product.
pub fn hadamard(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    a.zip_with(b, |x, y| x * y)
}

/// Outcome of a combined Hermiticity / positive-semidefiniteness test.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HermitianCheckReport {
    pub is_hermitian: bool,
    /// max over (i,j) of |a_ij - conj(a_ji)|
    pub max_asymmetry: f64,
    /// smallest eigenvalue of the Hermitized matrix (a + a†)/2
    pub min_eigenvalue: f64,
    pub is_psd: bool,
}

/// Check Hermiticity within `tol` and positive semidefiniteness of the
/// Hermitized matrix. `is_psd` implies `is_hermitian`.
pub fn check_psd_hermitian(a: &CMatrix, tol: f64) -> Result<HermitianCheckReport> {
    if !a.is_square() {
        return Err(Error::Dimension("hermitian check needs a square matrix".into()));
    }
    let n = a.rows();
    let mut max_asym = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let asym = (a.at(i, j) - a.at(j, i).conj()).norm();
            max_asym = max_asym.max(asym);
        }
    }
    let herm = a.add(&a.dagger())?.scale_re(0.5);
    let eigs = hermitian_eigenvalues(&herm)?;
    let min_eig = eigs.first().copied().unwrap_or(0.0);
    let spread = eigs
        .iter()
        .map(|e| e.abs())
        .fold(0.0, f64::max);
    let is_hermitian = max_asym <= tol;
    let is_psd = is_hermitian && min_eig >= -PSD_EIG_TOL * spread;
    Ok(HermitianCheckReport {
        is_hermitian,
        max_asymmetry: max_asym,
        min_eigenvalue: min_eig,
        is_psd,
    })
}

/// Largest eigenvalue and unit eigenvector of the real symmetric part
/// `(Re(a) + Re(a)ᵀ)/2`. The eigenvector sign is fixed by making its first
/// component with magnitude above 1e-12 positive.
pub fn sym_eig_max(a: &CMatrix) -> Result<(f64, Vec<f64>)> {
    if !a.is_square() {
        return Err(Error::Dimension("sym_eig_max needs a square matrix".into()));
    }
    let n = a.rows();
    let mut sym = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            sym[i * n + j] = 0.5 * (a.at(i, j).re + a.at(j, i).re);
        }
    }
    let eig = jacobi_sym_eig(&sym, n)?;
    let idx = eig
        .values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let lambda = eig.values[idx];
    let mut v = eig.vectors[idx].clone();
    fix_sign(&mut v);

    // Residual guard: ||Sym(Re a) v - lambda v|| <= 1e-10 ||a||_F.
    let mut res = 0.0f64;
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += sym[i * n + j] * v[j];
        }
        res += (acc - lambda * v[i]).powi(2);
    }
    let scale = a.fro_norm().max(f64::MIN_POSITIVE);
    if res.sqrt() > 1e-10 * scale {
        return Err(Error::Convergence(format!(
            "eigenpair residual {:.3e} exceeds 1e-10 * ||a||",
            res.sqrt()
        )));
    }
    Ok((lambda, v))
}

fn fix_sign(v: &mut [f64]) {
    for &c in v.iter() {
        if c.abs() > SIGN_CONVENTION_TOL {
            if c < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            break;
        }
    }
}

/// All eigenvalues of a Hermitian matrix, ascending, via the doubled real
/// symmetric embedding `[[Re, -Im], [Im, Re]]` (each eigenvalue of the input
/// appears twice in the embedding; pairs are averaged).
pub fn hermitian_eigenvalues(a: &CMatrix) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::Dimension("eigenvalues of non-square matrix".into()));
    }
    let n = a.rows();
    let doubled = double_embedding(a);
    let eig = jacobi_sym_eig(&doubled, 2 * n)?;
    let mut vals = eig.values;
    vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let paired: Vec<f64> = vals.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect();
    Ok(paired)
}

fn double_embedding(a: &CMatrix) -> Vec<f64> {
    let n = a.rows();
    let m = 2 * n;
    let mut d = vec![0.0; m * m];
    for i in 0..n {
        for j in 0..n {
            let z = a.at(i, j);
            d[i * m + j] = z.re;
            d[i * m + (n + j)] = -z.im;
            d[(n + i) * m + j] = z.im;
            d[(n + i) * m + (n + j)] = z.re;
        }
    }
    d
}

/// Hermitian square root of a PSD Hermitian matrix. Eigenvalues down to
/// `-1e-12 * lambda_max` are clipped to zero; anything more negative is a
/// domain error.
pub fn psd_sqrt(a: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(Error::Dimension("psd_sqrt needs a square matrix".into()));
    }
    let n = a.rows();
    let scale = a.max_abs().max(1.0);
    let mut max_asym = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            max_asym = max_asym.max((a.at(i, j) - a.at(j, i).conj()).norm());
        }
    }
    if max_asym > HERMITIAN_TOL * scale {
        return Err(Error::Domain(format!(
            "psd_sqrt input not Hermitian (asymmetry {max_asym:.3e})"
        )));
    }

    let doubled = double_embedding(a);
    let eig = jacobi_sym_eig(&doubled, 2 * n)?;
    let lam_max = eig.values.iter().cloned().fold(0.0, f64::max);
    let clip = -PSD_EIG_TOL * lam_max.max(f64::MIN_POSITIVE);
    let mut roots = Vec::with_capacity(2 * n);
    for &lam in &eig.values {
        if lam < clip {
            return Err(Error::Domain(format!(
                "matrix not PSD: eigenvalue {lam:.6e} below tolerance"
            )));
        }
        roots.push(lam.max(0.0).sqrt());
    }

    // sqrt in the doubled representation: Q sqrt(Lambda) Qᵀ, then read the
    // complex matrix back off the block structure.
    let m = 2 * n;
    let mut sq = vec![0.0; m * m];
    for (k, &r) in roots.iter().enumerate() {
        if r == 0.0 {
            continue;
        }
        let v = &eig.vectors[k];
        for i in 0..m {
            let vi = r * v[i];
            if vi == 0.0 {
                continue;
            }
            for j in 0..m {
                sq[i * m + j] += vi * v[j];
            }
        }
    }
    let b = extract_from_doubled(&sq, n);

    let resid = b.matmul(&b)?.sub(a)?.fro_norm();
    let denom = a.fro_norm().max(f64::MIN_POSITIVE);
    if resid > 1e-10 * denom {
        return Err(Error::Internal(format!(
            "psd_sqrt residual {:.3e} relative to input norm",
            resid / denom
        )));
    }
    Ok(b)
}

/// Project a Hermitian matrix to the PSD cone by clipping negative
/// eigenvalues to zero.
pub fn psd_clip(a: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(Error::Dimension("psd_clip needs a square matrix".into()));
    }
    let n = a.rows();
    let doubled = double_embedding(a);
    let eig = jacobi_sym_eig(&doubled, 2 * n)?;
    let m = 2 * n;
    let mut out = vec![0.0; m * m];
    for (k, &lam) in eig.values.iter().enumerate() {
        if lam <= 0.0 {
            continue;
        }
        let v = &eig.vectors[k];
        for i in 0..m {
            let vi = lam * v[i];
            for j in 0..m {
                out[i * m + j] += vi * v[j];
            }
        }
    }
    Ok(extract_from_doubled(&out, n))
}

/// Read a complex matrix off its doubled real representation, averaging the
/// two block copies. Eigensolvers mix degenerate pairs arbitrarily, which
/// leaves the result only approximately inside the embedded algebra; the
/// average is the exact projection back onto it and makes the extracted
/// matrix Hermitian whenever the doubled input is symmetric.
fn extract_from_doubled(d: &[f64], n: usize) -> CMatrix {
    let m = 2 * n;
    CMatrix::from_fn(n, n, |i, j| {
        let re = 0.5 * (d[i * m + j] + d[(n + i) * m + (n + j)]);
        let im = 0.5 * (d[(n + i) * m + j] - d[i * m + (n + j)]);
        Complex64::new(re, im)
    })
}

/// Gram matrix `S_ij = <phi_i|phi_j>` of a list of unit-norm vectors.
pub fn gram_from_vectors(states: &[Vec<Complex64>]) -> Result<CMatrix> {
    if states.is_empty() {
        return Err(Error::Dimension("no state vectors".into()));
    }
    let dim = states[0].len();
    if dim == 0 || states.iter().any(|s| s.len() != dim) {
        return Err(Error::Dimension("state vectors must share one nonzero dimension".into()));
    }
    for (i, s) in states.iter().enumerate() {
        let norm = s.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Domain(format!(
                "state {i} has norm {norm:.12}, expected 1 within 1e-10"
            )));
        }
    }
    let n = states.len();
    let mut g = CMatrix::zeros(n, n);
    for i in 0..n {
        g.set(i, i, Complex64::new(states[i].iter().map(|z| z.norm_sqr()).sum(), 0.0));
        for j in (i + 1)..n {
            let ip: Complex64 = states[i]
                .iter()
                .zip(states[j].iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
            g.set(i, j, ip);
            g.set(j, i, ip.conj());
        }
    }
    Ok(g)
}

/// Largest singular value, computed from the eigenvalues of `a†a` (or `aa†`,
/// whichever is smaller).
pub fn spectral_norm(a: &CMatrix) -> Result<f64> {
    let sq = if a.rows() <= a.cols() {
        a.matmul(&a.dagger())?
    } else {
        a.dagger().matmul(a)?
    };
    let eigs = hermitian_eigenvalues(&sq)?;
    let max = eigs.iter().cloned().fold(0.0, f64::max);
    Ok(max.max(0.0).sqrt())
}

/// All singular values, descending.
pub fn singular_values(a: &CMatrix) -> Result<Vec<f64>> {
    let sq = if a.rows() <= a.cols() {
        a.matmul(&a.dagger())?
    } else {
        a.dagger().matmul(a)?
    };
    let mut eigs = hermitian_eigenvalues(&sq)?;
    eigs.reverse();
    Ok(eigs.into_iter().map(|e| e.max(0.0).sqrt()).collect())
}

pub(crate) struct SymEig {
    pub values: Vec<f64>,
    /// vectors[k] is the unit eigenvector for values[k]
    pub vectors: Vec<Vec<f64>>,
}

/// Cyclic Jacobi eigendecomposition of a real symmetric matrix given in
/// row-major order. Converges when the off-diagonal Frobenius norm falls
/// below 1e-13 of the total Frobenius norm; errors after 100 sweeps.
pub(crate) fn jacobi_sym_eig(mat: &[f64], n: usize) -> Result<SymEig> {
    assert_eq!(mat.len(), n * n);
    let mut a = mat.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let fro: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if fro == 0.0 || n == 1 {
        return Ok(SymEig {
            values: (0..n).map(|i| a[i * n + i]).collect(),
            vectors: (0..n)
                .map(|i| (0..n).map(|j| v[j * n + i]).collect())
                .collect(),
        });
    }
    let target = JACOBI_OFF_TOL * fro;

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += 2.0 * a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() <= target {
            let values: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
            let vectors: Vec<Vec<f64>> = (0..n)
                .map(|k| (0..n).map(|j| v[j * n + k]).collect())
                .collect();
            return Ok(SymEig { values, vectors });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta.abs() > 1e150 {
                    // avoid overflow in theta^2
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for j in 0..n {
                    if j == p || j == q {
                        continue;
                    }
                    let ajp = a[j * n + p];
                    let ajq = a[j * n + q];
                    let new_jp = ajp - s * (ajq + tau * ajp);
                    let new_jq = ajq + s * (ajp - tau * ajq);
                    a[j * n + p] = new_jp;
                    a[p * n + j] = new_jp;
                    a[j * n + q] = new_jq;
                    a[q * n + j] = new_jq;
                }
                for j in 0..n {
                    let vjp = v[j * n + p];
                    let vjq = v[j * n + q];
                    v[j * n + p] = vjp - s * (vjq + tau * vjp);
                    v[j * n + q] = vjq + s * (vjp - tau * vjq);
                }
            }
        }
    }
    Err(Error::Convergence(format!(
        "Jacobi did not reach off-norm target after {JACOBI_MAX_SWEEPS} sweeps (n = {n})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_cmatrix(rng: &mut ChaCha12Rng, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| {
            c(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)
        })
    }

    #[test]
    fn hadamard_identity_with_ones() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let h = random_cmatrix(&mut rng, 5, 5);
        let e = CMatrix::ones(5, 5);
        let prod = hadamard(&h, &e).unwrap();
        assert_eq!(prod, h);
    }

    #[test]
    fn hadamard_hand_expansion() {
        let a = CMatrix::from_real_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let p = hadamard(&a, &b).unwrap();
        let expect = CMatrix::from_real_rows(&[vec![0.0, 2.0], vec![3.0, 0.0]]).unwrap();
        assert_eq!(p, expect);
    }

    #[test]
    fn hadamard_shape_mismatch_errors() {
        let a = CMatrix::ones(2, 3);
        let b = CMatrix::ones(3, 2);
        assert!(matches!(hadamard(&a, &b), Err(Error::Dimension(_))));
    }

    #[test]
    fn hadamard_commutes_on_random_pairs() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..100 {
            let a = random_cmatrix(&mut rng, 6, 6);
            let b = random_cmatrix(&mut rng, 6, 6);
            let ab = hadamard(&a, &b).unwrap();
            let ba = hadamard(&b, &a).unwrap();
            // elementwise products commute exactly in IEEE arithmetic
            assert_eq!(ab, ba);
        }
    }

    #[test]
    fn check_psd_identity() {
        let report = check_psd_hermitian(&CMatrix::identity(3), HERMITIAN_TOL).unwrap();
        assert!(report.is_hermitian);
        assert!(report.is_psd);
        assert!((report.min_eigenvalue - 1.0).abs() < 1e-12);
    }

    #[test]
    fn check_psd_indefinite_2x2() {
        // eigenvalues -1 and 3
        let a = CMatrix::from_real_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let report = check_psd_hermitian(&a, HERMITIAN_TOL).unwrap();
        assert!(report.is_hermitian);
        assert!(!report.is_psd);
        assert!((report.min_eigenvalue + 1.0).abs() < 1e-10);
    }

    #[test]
    fn check_psd_gram_of_random_matrix() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let g = random_cmatrix(&mut rng, 5, 3);
        let gram = g.dagger().matmul(&g).unwrap();
        let report = check_psd_hermitian(&gram, HERMITIAN_TOL).unwrap();
        assert!(report.is_psd, "G†G must be PSD, report: {report:?}");
    }

    #[test]
    fn check_psd_non_square_errors() {
        let a = CMatrix::ones(2, 3);
        assert!(matches!(
            check_psd_hermitian(&a, HERMITIAN_TOL),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn sym_eig_max_diagonal() {
        let a = CMatrix::diag(&[c(1.0, 0.0), c(5.0, 0.0), c(3.0, 0.0)]);
        let (lam, v) = sym_eig_max(&a).unwrap();
        assert!((lam - 5.0).abs() < 1e-12);
        assert!((v[0]).abs() < 1e-12 && (v[1] - 1.0).abs() < 1e-12 && (v[2]).abs() < 1e-12);
    }

    #[test]
    fn sym_eig_max_all_ones() {
        let n = 6;
        let a = CMatrix::ones(n, n);
        let (lam, v) = sym_eig_max(&a).unwrap();
        assert!((lam - n as f64).abs() < 1e-10);
        let expect = 1.0 / (n as f64).sqrt();
        for &x in &v {
            assert!((x - expect).abs() < 1e-10);
        }
    }

    /// Independent oracle: count eigenvalues below t from the inertia of an
    /// LDLᵀ factorization, and bisect on that count to locate lambda_max.
    fn bisect_lambda_max(sym: &[f64], n: usize) -> f64 {
        fn count_below(sym: &[f64], n: usize, t: f64) -> usize {
            // LDLᵀ of (A - tI) without pivoting; a tiny pivot is nudged,
            // which is fine for bisection purposes.
            let mut a = sym.to_vec();
            for i in 0..n {
                a[i * n + i] -= t;
            }
            let mut d = vec![0.0; n];
            let mut l = vec![0.0; n * n];
            for j in 0..n {
                let mut dj = a[j * n + j];
                for k in 0..j {
                    dj -= l[j * n + k] * l[j * n + k] * d[k];
                }
                if dj == 0.0 {
                    dj = 1e-300;
                }
                d[j] = dj;
                for i in (j + 1)..n {
                    let mut lij = a[i * n + j];
                    for k in 0..j {
                        lij -= l[i * n + k] * l[j * n + k] * d[k];
                    }
                    l[i * n + j] = lij / dj;
                }
            }
            d.iter().filter(|&&x| x < 0.0).count()
        }
        let bound: f64 = (0..n)
            .map(|i| (0..n).map(|j| sym[i * n + j].abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let (mut lo, mut hi) = (-bound - 1.0, bound + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if count_below(sym, n, mid) == n {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn sym_eig_max_matches_bisection_oracle_on_random_hermitian() {
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        for _ in 0..10 {
            let g = random_cmatrix(&mut rng, 16, 16);
            let h = g.add(&g.dagger()).unwrap().scale_re(0.5);
            let n = 16;
            let mut sym = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    sym[i * n + j] = 0.5 * (h.at(i, j).re + h.at(j, i).re);
                }
            }
            let (lam, _) = sym_eig_max(&h).unwrap();
            let oracle = bisect_lambda_max(&sym, n);
            assert!(
                (lam - oracle).abs() <= 1e-10 * oracle.abs().max(1.0),
                "jacobi {lam} vs bisection {oracle}"
            );
        }
    }

    #[test]
    fn sym_eig_recovers_known_spectrum() {
        // QᵀDQ for a random orthogonal Q (from Jacobi vectors of a random
        // symmetric seed matrix) must return max(D).
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = 8;
            let mut seed = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let x = rng.random::<f64>() - 0.5;
                    seed[i * n + j] = x;
                    seed[j * n + i] = x;
                }
            }
            let q = jacobi_sym_eig(&seed, n).unwrap().vectors;
            let d: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
            let mut m = CMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let mut acc = 0.0;
                    for k in 0..n {
                        acc += q[k][i] * d[k] * q[k][j];
                    }
                    m.set(i, j, c(acc, 0.0));
                }
            }
            let (lam, _) = sym_eig_max(&m).unwrap();
            let dmax = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!((lam - dmax).abs() <= 1e-10 * dmax.abs().max(1.0));
        }
    }

    #[test]
    fn psd_sqrt_identity_and_diag() {
        let b = psd_sqrt(&CMatrix::identity(4)).unwrap();
        assert!(b.max_abs_diff(&CMatrix::identity(4)).unwrap() < 1e-12);
        let d = CMatrix::diag(&[c(4.0, 0.0), c(9.0, 0.0)]);
        let b = psd_sqrt(&d).unwrap();
        let expect = CMatrix::diag(&[c(2.0, 0.0), c(3.0, 0.0)]);
        assert!(b.max_abs_diff(&expect).unwrap() < 1e-12);
    }

    #[test]
    fn psd_sqrt_reconstructs_random_psd() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for &n in &[2usize, 5, 12, 18] {
            let g = random_cmatrix(&mut rng, n, n);
            let a = g.dagger().matmul(&g).unwrap();
            let b = psd_sqrt(&a).unwrap();
            let back = b.matmul(&b).unwrap();
            let rel = back.sub(&a).unwrap().fro_norm() / a.fro_norm();
            assert!(rel < 1e-10, "n={n}: relative residual {rel}");
        }
    }

    #[test]
    fn psd_sqrt_rejects_indefinite() {
        let a = CMatrix::from_real_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(psd_sqrt(&a), Err(Error::Domain(_))));
    }

    #[test]
    fn gram_of_identical_vectors_is_ones() {
        let v = vec![c(0.6, 0.0), c(0.0, 0.8)];
        let g = gram_from_vectors(&[v.clone(), v.clone(), v]).unwrap();
        assert!(g.max_abs_diff(&CMatrix::ones(3, 3)).unwrap() < 1e-12);
    }

    #[test]
    fn gram_of_orthonormal_basis_is_identity() {
        let e0 = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let e1 = vec![c(0.0, 0.0), c(1.0, 0.0)];
        let g = gram_from_vectors(&[e0, e1]).unwrap();
        assert!(g.max_abs_diff(&CMatrix::identity(2)).unwrap() < 1e-14);
    }

    #[test]
    fn gram_real_overlap() {
        let x = 0.6f64;
        let a = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let b = vec![c(x, 0.0), c((1.0 - x * x).sqrt(), 0.0)];
        let g = gram_from_vectors(&[a, b]).unwrap();
        let expect = CMatrix::from_real_rows(&[vec![1.0, 0.6], vec![0.6, 1.0]]).unwrap();
        assert!(g.max_abs_diff(&expect).unwrap() < 1e-12);
    }

    #[test]
    fn gram_rejects_non_unit_norm() {
        let v = vec![c(2.0, 0.0)];
        assert!(matches!(gram_from_vectors(&[v]), Err(Error::Domain(_))));
    }

    #[test]
    fn spectral_norm_examples() {
        assert!((spectral_norm(&CMatrix::identity(7)).unwrap() - 1.0).abs() < 1e-12);
        let d = CMatrix::diag(&[c(3.0, 0.0), c(-7.0, 0.0)]);
        assert!((spectral_norm(&d).unwrap() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn matrix_json_round_trip() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let m = random_cmatrix(&mut rng, 3, 4);
        let json = serde_json::to_string(&m).unwrap();
        let back: CMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn matrix_json_rejects_bad_lengths() {
        let bad = r#"{"rows":2,"cols":2,"re":[1.0,2.0,3.0],"im":[0,0,0,0]}"#;
        assert!(serde_json::from_str::<CMatrix>(bad).is_err());
        let nan = r#"{"rows":1,"cols":1,"re":[null],"im":[0.0]}"#;
        assert!(serde_json::from_str::<CMatrix>(nan).is_err());
    }

    proptest! {
        #[test]
        fn prop_hadamard_associative(seed in 0u64..5000) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let a = random_cmatrix(&mut rng, 4, 4);
            let b = random_cmatrix(&mut rng, 4, 4);
            let d = random_cmatrix(&mut rng, 4, 4);
            let left = hadamard(&hadamard(&a, &b).unwrap(), &d).unwrap();
            let right = hadamard(&a, &hadamard(&b, &d).unwrap()).unwrap();
            let scale = left.max_abs().max(1e-300);
            prop_assert!(left.max_abs_diff(&right).unwrap() <= 1e-15 * scale);
        }

        #[test]
        fn prop_normalized_columns_give_unit_diag_psd_gram(seed in 0u64..2000) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let g = random_cmatrix(&mut rng, 5, 4);
            let cols: Vec<Vec<Complex64>> = (0..4).map(|j| {
                let col: Vec<Complex64> = (0..5).map(|i| g.at(i, j)).collect();
                let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                col.into_iter().map(|z| z / norm).collect()
            }).collect();
            let gram = gram_from_vectors(&cols).unwrap();
            let report = check_psd_hermitian(&gram, HERMITIAN_TOL).unwrap();
            prop_assert!(report.is_psd);
            for i in 0..4 {
                prop_assert!((gram.at(i, i).re - 1.0).abs() < 1e-12);
            }
        }
    }
}
