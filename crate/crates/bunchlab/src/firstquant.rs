//! Independent first-quantization simulator for small photon numbers.
//!
//! Builds the explicitly symmetrized n-photon state over the
//! (mode ⊗ internal) product basis, applies the interferometer photon by
//! photon, projects every photon's spatial index onto the detected subset,
//! and returns the squared norm. No permanents anywhere — this is the
//! independent route used to validate the permanent-based bunching formula.
//!
//! Deliberately brute force and tiny: the state dimension is (m·L)^n with
//! n ≤ 3, m ≤ 4, L ≤ 3.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::interferometer::unitarity_residual;
use crate::matrix::CMatrix;

pub const MAX_PHOTONS: usize = 3;
pub const MAX_MODES: usize = 4;
pub const MAX_INTERNAL: usize = 3;

/// n-photon pure state over the photon-major, (mode, internal)-minor
/// lexicographic product basis.
#[derive(Debug, Clone)]
pub struct FirstQuantState {
    n: usize,
    m: usize,
    l: usize,
    amplitudes: Vec<Complex64>,
}

impl FirstQuantState {
    /// The symmetrized input state (1/√n!) Σ_σ ⊗_i |σ(i), φ_σ(i)⟩ for one
    /// photon entering each of the first n modes.
    pub fn symmetrized_input(m: usize, internal_states: &[Vec<Complex64>]) -> Result<Self> {
        let n = internal_states.len();
        if n == 0 || n > MAX_PHOTONS {
            return Err(Error::SizeGuard(format!(
                "first-quantization simulator handles 1..={MAX_PHOTONS} photons, got {n}"
            )));
        }
        if m < n || m > MAX_MODES {
            return Err(Error::SizeGuard(format!(
                "mode count must satisfy n <= m <= {MAX_MODES}, got {m}"
            )));
        }
        let l = internal_states[0].len();
        if l == 0 || l > MAX_INTERNAL {
            return Err(Error::SizeGuard(format!(
                "internal dimension must be 1..={MAX_INTERNAL}, got {l}"
            )));
        }
        if internal_states.iter().any(|s| s.len() != l) {
            return Err(Error::Dimension("internal states must share one dimension".into()));
        }
        for (i, s) in internal_states.iter().enumerate() {
            let norm = s.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-10 {
                return Err(Error::Domain(format!(
                    "internal state {i} has norm {norm:.12}, expected 1"
                )));
            }
        }

        let base = m * l;
        let dim = base.pow(n as u32);
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];

        for sigma in permutations(n) {
            // photon slot i carries photon sigma[i]: spatial mode sigma[i],
            // internal state phi_{sigma[i]}
            let mut internal = vec![0usize; n];
            loop {
                let mut amp = Complex64::new(1.0, 0.0);
                let mut idx = 0usize;
                for slot in 0..n {
                    let photon = sigma[slot];
                    amp *= internal_states[photon][internal[slot]];
                    idx = idx * base + photon * l + internal[slot];
                }
                amplitudes[idx] += amp;
                // odometer over the internal labels
                let mut pos = n;
                let mut done = false;
                loop {
                    if pos == 0 {
                        done = true;
                        break;
                    }
                    pos -= 1;
                    internal[pos] += 1;
                    if internal[pos] < l {
                        break;
                    }
                    internal[pos] = 0;
                }
                if done {
                    break;
                }
            }
        }
        let norm_factor = 1.0 / factorial(n).sqrt();
        amplitudes.iter_mut().for_each(|a| *a *= norm_factor);

        let state = FirstQuantState { n, m, l, amplitudes };
        let norm = state.norm_sq().sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Internal(format!(
                "symmetrized state has norm {norm:.12}, expected 1"
            )));
        }
        Ok(state)
    }

    pub fn photons(&self) -> usize {
        self.n
    }

    pub fn dimension(&self) -> usize {
        self.amplitudes.len()
    }

    /// Apply û⊗ⁿ with û|i, φ⟩ = Σ_k U_{k,i} |k, φ⟩, one photon slot at a
    /// time.
    pub fn apply_interferometer(&mut self, u: &CMatrix) -> Result<()> {
        if u.rows() != self.m || !u.is_square() {
            return Err(Error::Dimension(format!(
                "unitary is {}x{} but the state has {} modes",
                u.rows(),
                u.cols(),
                self.m
            )));
        }
        let base = self.m * self.l;
        let dim = self.amplitudes.len();
        for slot in 0..self.n {
            let stride = base.pow((self.n - 1 - slot) as u32);
            let mut next = vec![Complex64::new(0.0, 0.0); dim];
            for (idx, &amp) in self.amplitudes.iter().enumerate() {
                if amp.re == 0.0 && amp.im == 0.0 {
                    continue;
                }
                let digit = (idx / stride) % base;
                let in_mode = digit / self.l;
                let internal = digit % self.l;
                let rest = idx - digit * stride;
                for k in 0..self.m {
                    let coeff = u.at(k, in_mode);
                    if coeff.re == 0.0 && coeff.im == 0.0 {
                        continue;
                    }
                    let new_idx = rest + (k * self.l + internal) * stride;
                    next[new_idx] += coeff * amp;
                }
            }
            self.amplitudes = next;
        }
        Ok(())
    }

    /// Zero every amplitude in which any photon sits outside `kappa`.
    pub fn project_modes(&mut self, kappa: &[usize]) {
        let base = self.m * self.l;
        let mut keep = vec![false; self.m];
        for &k in kappa {
            if k < self.m {
                keep[k] = true;
            }
        }
        for idx in 0..self.amplitudes.len() {
            let mut rem = idx;
            let mut inside = true;
            for _ in 0..self.n {
                let digit = rem % base;
                if !keep[digit / self.l] {
                    inside = false;
                    break;
                }
                rem /= base;
            }
            if !inside {
                self.amplitudes[idx] = Complex64::new(0.0, 0.0);
            }
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Relabel the photon slots by `sigma` (used to test permutation
    /// invariance of the symmetrized state).
    pub fn permute_photons(&self, sigma: &[usize]) -> FirstQuantState {
        assert_eq!(sigma.len(), self.n);
        let base = self.m * self.l;
        let dim = self.amplitudes.len();
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        for (idx, &amp) in self.amplitudes.iter().enumerate() {
            let mut digits = vec![0usize; self.n];
            let mut rem = idx;
            for slot in (0..self.n).rev() {
                digits[slot] = rem % base;
                rem /= base;
            }
            let mut new_idx = 0usize;
            for slot in 0..self.n {
                new_idx = new_idx * base + digits[sigma[slot]];
            }
            out[new_idx] += amp;
        }
        FirstQuantState {
            n: self.n,
            m: self.m,
            l: self.l,
            amplitudes: out,
        }
    }

    pub fn max_abs_diff(&self, other: &FirstQuantState) -> f64 {
        self.amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..n).collect();
    heap_recurse(&mut items, n, &mut out);
    out
}

fn heap_recurse(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(items.clone());
        return;
    }
    for i in 0..k {
        heap_recurse(items, k - 1, out);
        if k % 2 == 0 {
            items.swap(i, k - 1);
        } else {
            items.swap(0, k - 1);
        }
    }
}

/// Probability that all photons land inside `kappa`, by direct state-vector
/// evolution: symmetrize, apply û⊗ⁿ, project, take the squared norm.
pub fn simulate_bunching(
    u: &CMatrix,
    internal_states: &[Vec<Complex64>],
    kappa: &[usize],
) -> Result<f64> {
    let residual = unitarity_residual(u)?;
    if residual > crate::interferometer::UNITARY_TOL {
        return Err(Error::Domain(format!(
            "simulator needs a unitary (residual {residual:.3e})"
        )));
    }
    if kappa.is_empty() || kappa.iter().any(|&k| k >= u.rows()) {
        return Err(Error::Index("detected subset must be nonempty mode indices".into()));
    }
    let mut state = FirstQuantState::symmetrized_input(u.rows(), internal_states)?;
    state.apply_interferometer(u)?;
    state.project_modes(kappa);
    Ok(state.norm_sq())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interferometer::haar_unitary;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_internal(rng: &mut ChaCha12Rng, l: usize) -> Vec<Complex64> {
        let mut v: Vec<Complex64> = (0..l)
            .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|z| *z /= norm);
        v
    }

    #[test]
    fn single_photon_no_interference() {
        let u = haar_unitary(3, 14);
        let phi = vec![vec![c(1.0, 0.0)]];
        let p = simulate_bunching(&u, &phi, &[0, 2]).unwrap();
        let expect = u.at(0, 0).norm_sqr() + u.at(2, 0).norm_sqr();
        assert!((p - expect).abs() < 1e-12);
    }

    #[test]
    fn hom_dip_textbook_values() {
        let s = 1.0 / 2f64.sqrt();
        let u = CMatrix::from_real_rows(&[vec![s, s], vec![s, -s]]).unwrap();
        // indistinguishable internals: bunching probability 1/2
        let same = vec![vec![c(1.0, 0.0), c(0.0, 0.0)]; 2];
        let p = simulate_bunching(&u, &same, &[0]).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        // orthogonal internals: classical 1/4
        let orth = vec![
            vec![c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(1.0, 0.0)],
        ];
        let p = simulate_bunching(&u, &orth, &[0]).unwrap();
        assert!((p - 0.25).abs() < 1e-12);
    }

    #[test]
    fn full_subset_gives_unity() {
        let mut rng = ChaCha12Rng::seed_from_u64(19);
        let u = haar_unitary(3, 20);
        let internals: Vec<Vec<Complex64>> = (0..3).map(|_| random_internal(&mut rng, 2)).collect();
        let p = simulate_bunching(&u, &internals, &[0, 1, 2]).unwrap();
        assert!((p - 1.0).abs() < 1e-10);
    }

    #[test]
    fn symmetrized_state_is_permutation_invariant() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let internals: Vec<Vec<Complex64>> = (0..3).map(|_| random_internal(&mut rng, 2)).collect();
        let state = FirstQuantState::symmetrized_input(4, &internals).unwrap();
        for sigma in permutations(3) {
            let permuted = state.permute_photons(&sigma);
            assert!(state.max_abs_diff(&permuted) < 1e-10);
        }
    }

    #[test]
    fn global_phase_on_internal_state_is_invisible() {
        let mut rng = ChaCha12Rng::seed_from_u64(29);
        let u = haar_unitary(3, 31);
        let mut internals: Vec<Vec<Complex64>> = (0..2).map(|_| random_internal(&mut rng, 3)).collect();
        let p0 = simulate_bunching(&u, &internals, &[1]).unwrap();
        let phase = Complex64::from_polar(1.0, 1.234);
        internals[0].iter_mut().for_each(|z| *z *= phase);
        let p1 = simulate_bunching(&u, &internals, &[1]).unwrap();
        assert!((p0 - p1).abs() < 1e-12);
    }

    #[test]
    fn size_guards() {
        let u = haar_unitary(5, 1);
        let internals = vec![vec![c(1.0, 0.0)]; 2];
        assert!(matches!(
            simulate_bunching(&u, &internals, &[0]),
            Err(Error::SizeGuard(_))
        ));
        let u = haar_unitary(4, 1);
        let internals = vec![vec![c(1.0, 0.0)]; 4];
        assert!(matches!(
            simulate_bunching(&u, &internals, &[0]),
            Err(Error::SizeGuard(_))
        ));
    }

    #[test]
    fn matches_permanent_formula_on_random_scenes() {
        use crate::bunching::bunching_prob;
        use crate::interferometer::{h_matrix, InterferometerScene};
        use crate::matrix::gram_from_vectors;
        let mut rng = ChaCha12Rng::seed_from_u64(37);
        for trial in 0..40u64 {
            let n = 2 + (trial as usize % 2);
            let m = (n + 1).max(3);
            let l = 1 + (trial as usize % 3);
            let u = haar_unitary(m, 1000 + trial);
            let internals: Vec<Vec<Complex64>> =
                (0..n).map(|_| random_internal(&mut rng, l)).collect();
            let kappa: Vec<usize> = vec![0, (trial as usize % (m - 1)) + 1];
            let mut kappa = kappa;
            kappa.dedup();

            let direct = simulate_bunching(&u, &internals, &kappa).unwrap();
            let scene = InterferometerScene::new(u, n, &kappa).unwrap();
            let h = h_matrix(&scene).unwrap();
            let s = gram_from_vectors(&internals).unwrap();
            let formula = bunching_prob(&h, &s).unwrap().probability;
            assert!(
                (direct - formula).abs() < 1e-10,
                "trial {trial}: simulator {direct:.15e} vs permanent formula {formula:.15e}"
            );
        }
    }
}
