//! Exact matrix permanents and permanent-derived objects.
//!
//! Two independent O(2^n n) engines are provided — Ryser's inclusion-exclusion
//! formula and Glynn's ±1 formula, both with Gray-code updates — plus a
//! factorial-time enumeration used as a cross-validation oracle for small
//! matrices. Their measured agreement is the error certificate for the
//! cancellation-prone alternating sums.
//!
//! All engines pre-scale the input by a power of two chosen from the largest
//! entry magnitude, so the alternating sums stay near unit scale regardless of
//! the raw magnitude of the input; the shift is returned in
//! [`PermanentValue::log2_scale`] (power-of-two scaling is exact in binary
//! floating point).

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::CMatrix;

/// Hard ceiling for the O(2^n) engines.
pub const MAX_EXACT_DIM: usize = 24;
/// Hard ceiling for the factorial-time oracle.
pub const MAX_NAIVE_DIM: usize = 9;
/// Ceiling for the n² minor sweeps (F-matrix, derivative formulas).
pub const MAX_F_MATRIX_DIM: usize = 18;

/// A permanent as `value * 2^log2_scale`, with the mantissa normalized into
/// `[1, 2)` in magnitude (or zero with scale 0). The split keeps permanents
/// of badly scaled matrices representable and exact to rescale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PermanentValue {
    pub value: Complex64,
    pub log2_scale: i32,
}

impl PermanentValue {
    pub fn zero() -> Self {
        PermanentValue {
            value: Complex64::new(0.0, 0.0),
            log2_scale: 0,
        }
    }

    /// Normalize a raw accumulator value carrying an existing binary shift.
    fn from_scaled(raw: Complex64, log2_scale: i32) -> Self {
        let mag = raw.norm();
        if mag == 0.0 {
            return Self::zero();
        }
        let k = mag.log2().floor() as i32;
        PermanentValue {
            value: raw * f64::exp2(-k as f64),
            log2_scale: log2_scale + k,
        }
    }

    /// The permanent at true scale. May overflow to infinity if the value
    /// exceeds the double range; callers that care use the mantissa form.
    pub fn to_complex(&self) -> Complex64 {
        self.value * f64::exp2(self.log2_scale as f64)
    }

    pub fn re(&self) -> f64 {
        self.to_complex().re
    }

    pub fn abs(&self) -> f64 {
        self.value.norm() * f64::exp2(self.log2_scale as f64)
    }

    /// Relative difference computed on the mantissa/scale form, safe against
    /// overflow of the true-scale values.
    pub fn rel_diff(&self, other: &PermanentValue) -> f64 {
        let a_mag = self.value.norm();
        let b_mag = other.value.norm();
        if a_mag == 0.0 && b_mag == 0.0 {
            return 0.0;
        }
        if a_mag == 0.0 || b_mag == 0.0 {
            return 1.0;
        }
        let shift = self.log2_scale - other.log2_scale;
        // align other to self's scale; shifts beyond ~100 mean wildly
        // different magnitudes
        if shift.abs() > 100 {
            return 1.0;
        }
        let aligned = other.value * f64::exp2(shift as f64).recip();
        let denom = a_mag.max(other.value.norm() * f64::exp2(-shift as f64));
        (self.value - aligned).norm() / denom
    }
}

impl std::fmt::Display for PermanentValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let z = self.to_complex();
        if z.re.is_finite() && z.im.is_finite() {
            if z.im.abs() <= 1e-12 * z.re.abs().max(f64::MIN_POSITIVE) {
                write!(f, "{}", z.re)
            } else {
                write!(f, "{}{:+}i", z.re, z.im)
            }
        } else {
            write!(
                f,
                "({}{:+}i) * 2^{}",
                self.value.re, self.value.im, self.log2_scale
            )
        }
    }
}

/// Complex Kahan-compensated accumulator.
#[derive(Clone, Copy)]
struct KahanSum {
    sum: Complex64,
    comp: Complex64,
}

impl KahanSum {
    fn new() -> Self {
        KahanSum {
            sum: Complex64::new(0.0, 0.0),
            comp: Complex64::new(0.0, 0.0),
        }
    }

    #[inline]
    fn add(&mut self, v: Complex64) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }
}

fn require_square(a: &CMatrix, what: &str) -> Result<usize> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "{what} needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    Ok(a.rows())
}

/// Copy the entries scaled by 2^-k with k from the largest magnitude, so the
/// scaled entries sit in [0, 2). Returns (scaled data, per-entry shift k).
fn prescale(a: &CMatrix) -> (Vec<Complex64>, i32) {
    let max = a.max_abs();
    if max == 0.0 || !max.is_finite() {
        return (a.data().to_vec(), 0);
    }
    let k = max.log2().floor() as i32;
    if k == 0 {
        return (a.data().to_vec(), 0);
    }
    let f = f64::exp2(-k as f64);
    (a.data().iter().map(|&z| z * f).collect(), k)
}

/// Permanent via Ryser's inclusion-exclusion formula with Gray-code subset
/// ordering: O(2^n n) arithmetic, one compensated accumulator.
pub fn perm_ryser(a: &CMatrix) -> Result<PermanentValue> {
    let n = require_square(a, "perm_ryser")?;
    if n > MAX_EXACT_DIM {
        return Err(Error::SizeGuard(format!(
            "perm engines are limited to n <= {MAX_EXACT_DIM}, got {n}"
        )));
    }
    let (b, k) = prescale(a);
    if n == 1 {
        return Ok(PermanentValue::from_scaled(b[0], k as i32));
    }

    let mut row_sums = vec![Complex64::new(0.0, 0.0); n];
    let mut acc = KahanSum::new();
    let mut subset_size: u32 = 0;
    let total: u64 = 1u64 << n;
    for s in 1..total {
        let j = s.trailing_zeros() as usize;
        let gray = s ^ (s >> 1);
        let added = (gray >> j) & 1 == 1;
        if added {
            subset_size += 1;
            for i in 0..n {
                row_sums[i] += b[i * n + j];
            }
        } else {
            subset_size -= 1;
            for i in 0..n {
                row_sums[i] -= b[i * n + j];
            }
        }
        let mut prod = Complex64::new(1.0, 0.0);
        for &r in &row_sums {
            prod *= r;
        }
        // sign (-1)^n (-1)^|S| = (-1)^(n - |S|)
        if (n as u32 - subset_size) % 2 == 1 {
            acc.add(-prod);
        } else {
            acc.add(prod);
        }
    }
    Ok(PermanentValue::from_scaled(acc.sum, n as i32 * k))
}

/// Permanent via Glynn's formula over ±1 vectors with Gray-code updates:
/// the structurally independent second engine.
pub fn perm_glynn(a: &CMatrix) -> Result<PermanentValue> {
    let n = require_square(a, "perm_glynn")?;
    if n > MAX_EXACT_DIM {
        return Err(Error::SizeGuard(format!(
            "perm engines are limited to n <= {MAX_EXACT_DIM}, got {n}"
        )));
    }
    let (b, k) = prescale(a);
    if n == 1 {
        return Ok(PermanentValue::from_scaled(b[0], k as i32));
    }

    // col_sums[j] = sum_i delta_i b[i][j]; delta_0 is pinned to +1.
    let mut col_sums = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        for j in 0..n {
            col_sums[j] += b[i * n + j];
        }
    }
    let mut delta = vec![1.0f64; n];
    let mut sign = 1.0f64;
    let mut acc = KahanSum::new();
    let steps: u64 = 1u64 << (n - 1);
    for s in 0..steps {
        if s > 0 {
            let bit = s.trailing_zeros() as usize;
            let i = bit + 1;
            let old = delta[i];
            delta[i] = -old;
            sign = -sign;
            let twice = 2.0 * old;
            for j in 0..n {
                col_sums[j] -= twice * b[i * n + j];
            }
        }
        let mut prod = Complex64::new(1.0, 0.0);
        for &c in &col_sums {
            prod *= c;
        }
        acc.add(sign * prod);
    }
    // divide by 2^(n-1) through the scale: exact
    Ok(PermanentValue::from_scaled(
        acc.sum,
        n as i32 * k - (n as i32 - 1),
    ))
}

/// Factorial-time oracle: sum over all n! permutations enumerated with
/// Heap's algorithm. Guarded at n <= 9.
pub fn perm_naive(a: &CMatrix) -> Result<PermanentValue> {
    let n = require_square(a, "perm_naive")?;
    if n > MAX_NAIVE_DIM {
        return Err(Error::SizeGuard(format!(
            "perm_naive is limited to n <= {MAX_NAIVE_DIM}, got {n}"
        )));
    }
    let (b, k) = prescale(a);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut acc = KahanSum::new();
    let product = |p: &[usize]| -> Complex64 {
        let mut prod = Complex64::new(1.0, 0.0);
        for (i, &pi) in p.iter().enumerate() {
            prod *= b[i * n + pi];
        }
        prod
    };
    acc.add(product(&perm));
    let mut c = vec![0usize; n];
    let mut i = 0usize;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            acc.add(product(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(PermanentValue::from_scaled(acc.sum, n as i32 * k))
}

/// Permanent of the deletion submatrix A(i;j).
pub fn perm_minor(a: &CMatrix, i: usize, j: usize) -> Result<PermanentValue> {
    let n = require_square(a, "perm_minor")?;
    if n < 2 {
        return Err(Error::Dimension("perm_minor needs n >= 2".into()));
    }
    if i >= n || j >= n {
        return Err(Error::Index(format!("minor index ({i},{j}) outside {n}x{n}")));
    }
    perm_ryser(&a.delete_row_col(i, j)?)
}

/// All n² minor permanents perm(A(i;j)) at true scale, computed in parallel
/// with a fixed reduction order per entry.
pub fn minor_permanents(a: &CMatrix) -> Result<CMatrix> {
    let n = require_square(a, "minor_permanents")?;
    if n < 2 {
        return Err(Error::Dimension("minor sweep needs n >= 2".into()));
    }
    if n > MAX_F_MATRIX_DIM {
        return Err(Error::SizeGuard(format!(
            "minor sweep is limited to n <= {MAX_F_MATRIX_DIM}, got {n}"
        )));
    }
    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                let sub = a.delete_row_col(i, j)?;
                row.push(perm_ryser(&sub)?.to_complex());
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let m = CMatrix::from_rows(&rows)?;
    if !m.is_finite() {
        return Err(Error::Precision(
            "minor permanents exceed the double-precision range".into(),
        ));
    }
    Ok(m)
}

/// The matrix F^A with F_ij = A_ij · perm(A(i;j)), together with the base
/// matrix it was derived from. Row and column sums of F reproduce perm(A)
/// by Laplace expansion; that identity is validated at construction.
#[derive(Debug, Clone)]
pub struct FMatrix {
    pub base: CMatrix,
    pub entries: CMatrix,
}

pub fn f_matrix(a: &CMatrix) -> Result<FMatrix> {
    let n = require_square(a, "f_matrix")?;
    if !(2..=MAX_F_MATRIX_DIM).contains(&n) {
        return Err(Error::SizeGuard(format!(
            "f_matrix needs 2 <= n <= {MAX_F_MATRIX_DIM}, got {n}"
        )));
    }
    let minors = minor_permanents(a)?;
    let mut entries = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            entries.set(i, j, a.at(i, j) * minors.at(i, j));
        }
    }

    let perm_a = perm_ryser(a)?.to_complex();
    let scale = perm_a.norm().max(f64::MIN_POSITIVE);
    for i in 0..n {
        let mut row = Complex64::new(0.0, 0.0);
        let mut col = Complex64::new(0.0, 0.0);
        for j in 0..n {
            row += entries.at(i, j);
            col += entries.at(j, i);
        }
        if (row - perm_a).norm() > 1e-9 * scale || (col - perm_a).norm() > 1e-9 * scale {
            return Err(Error::Internal(format!(
                "Laplace sum of F row/col {i} deviates from perm(A) by {:.3e} rel",
                ((row - perm_a).norm().max((col - perm_a).norm())) / scale
            )));
        }
    }
    Ok(FMatrix {
        base: a.clone(),
        entries,
    })
}
