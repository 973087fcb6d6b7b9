//! Randomized verification suites: engine cross-checks, the first-quantization
//! oracle equivalence, the permanental inequality families, derivative
//! consistency, and structural identities. Shared by the `selftest` CLI
//! subcommand and the acceptance test suite.
//!
//! Every suite is seeded and deterministic; trial counts shrink under
//! `quick`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::bunching::{
    anomaly_criterion, bunching_prob, bunching_prob_mixed, delay_derivative, monotonicity_check,
    perm_derivative, MixedEnsemble, MonotoneModel, TimeDelayFamily,
};
use crate::counterexample::{conjecture_search, perturbed_counterexample_margins, Sampler};
use crate::error::Result;
use crate::firstquant::simulate_bunching;
use crate::gram::{compile_gram, gauge_transform, DelayProfile, GramSpec};
use crate::interferometer::{
    cascade_rank_one, h_matrix, haar_unitary, reck_decompose, unitarity_residual, InterferometerScene,
};
use crate::matrix::{gram_from_vectors, hadamard, hermitian_eigenvalues, CMatrix};
use crate::permanent::{perm_glynn, perm_naive, perm_ryser};

/// Outcome of one randomized suite.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteOutcome {
    pub name: String,
    pub trials: usize,
    pub failures: usize,
    /// worst observed figure of merit (meaning depends on the suite)
    pub worst: f64,
    pub detail: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub quick: bool,
    pub seed: u64,
    pub suites: Vec<SuiteOutcome>,
    pub pass: bool,
}

impl std::fmt::Display for SelftestReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{:<44} {:>8} {:>9} {:>13}  {}",
            "suite", "trials", "failures", "worst", "status"
        )?;
        for s in &self.suites {
            writeln!(
                f,
                "{:<44} {:>8} {:>9} {:>13.3e}  {}",
                s.name,
                s.trials,
                s.failures,
                s.worst,
                if s.pass { "pass" } else { "FAIL" }
            )?;
        }
        let passed = self.suites.iter().filter(|s| s.pass).count();
        write!(
            f,
            "suites passed: {}/{} — {}",
            passed,
            self.suites.len(),
            if self.pass { "pass" } else { "FAIL" }
        )
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_unit_vector(rng: &mut ChaCha12Rng, dim: usize) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = (0..dim)
        .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|z| *z /= norm);
    v
}

pub fn random_gram(rng: &mut ChaCha12Rng, n: usize) -> CMatrix {
    let states: Vec<Vec<Complex64>> = (0..n).map(|_| random_unit_vector(rng, n)).collect();
    gram_from_vectors(&states).expect("random Gram construction")
}

/// Random PSD matrix with spectrum inside [0, 1] (a Gram matrix scaled just
/// below its top eigenvalue).
pub fn random_h(rng: &mut ChaCha12Rng, n: usize) -> CMatrix {
    let g = random_gram(rng, n);
    let eigs = hermitian_eigenvalues(&g).expect("eigenvalues of a Gram matrix");
    let top = eigs.last().copied().unwrap();
    g.scale_re(1.0 / (top * (1.0 + 1e-12)))
}

fn random_unit_real(rng: &mut ChaCha12Rng, n: usize) -> Vec<f64> {
    let mut t: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let norm = t.iter().map(|x| x * x).sum::<f64>().sqrt();
    t.iter_mut().for_each(|x| *x /= norm);
    t
}

struct Suite {
    name: String,
    trials: usize,
    failures: usize,
    worst: f64,
    detail: String,
}

impl Suite {
    fn new(name: &str) -> Self {
        Suite {
            name: name.into(),
            trials: 0,
            failures: 0,
            worst: 0.0,
            detail: String::new(),
        }
    }

    /// Record one trial; `violation` > 0 counts as a failure and the largest
    /// violation is kept as the worst figure.
    fn record(&mut self, violation: f64, context: impl Fn() -> String) {
        self.trials += 1;
        if violation > self.worst {
            self.worst = violation;
            if violation > 0.0 {
                self.detail = context();
            }
        }
        if violation > 0.0 {
            self.failures += 1;
        }
    }

    fn finish(self) -> SuiteOutcome {
        SuiteOutcome {
            pass: self.failures == 0,
            name: self.name,
            trials: self.trials,
            failures: self.failures,
            worst: self.worst,
            detail: self.detail,
        }
    }
}

/// Ryser vs Glynn vs the factorial oracle on random complex matrices,
/// n from 1 to 8. Worst figure: relative spread minus the 1e-10 allowance.
pub fn suite_engine_agreement(trials: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut suite = Suite::new("engine agreement (ryser/glynn/naive)");
    for t in 0..trials {
        let n = 1 + t % 8;
        let m = CMatrix::from_fn(n, n, |_, _| {
            c(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)
        });
        let r = perm_ryser(&m)?;
        let g = perm_glynn(&m)?;
        let o = perm_naive(&m)?;
        let spread = r.rel_diff(&g).max(r.rel_diff(&o)).max(g.rel_diff(&o));
        suite.record(spread - 1e-10, || format!("n={n} trial {t} spread {spread:.3e}"));
    }
    Ok(suite.finish())
}

/// First-quantization simulator vs perm(H ⊙ S) on random small scenes.
/// Worst figure: absolute deviation minus 1e-10.
pub fn suite_oracle_equivalence(trials: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut suite = Suite::new("first-quantization oracle equivalence");
    for t in 0..trials {
        let n = 1 + t % 3;
        let m = (n + 1).max(2) + t % 2;
        let m = m.min(4);
        let l = 1 + t % 3;
        let u = haar_unitary(m, seed ^ (t as u64).wrapping_mul(0x9E37));
        let internals: Vec<Vec<Complex64>> = (0..n).map(|_| random_unit_vector(&mut rng, l)).collect();
        let subset_size = 1 + t % (m - 1);
        let mut kappa: Vec<usize> = (0..m).collect();
        for i in (1..m).rev() {
            let j = rng.random_range(0..=i);
            kappa.swap(i, j);
        }
        kappa.truncate(subset_size);
        kappa.sort_unstable();

        let direct = simulate_bunching(&u, &internals, &kappa)?;
        let scene = InterferometerScene::new(u, n, &kappa)?;
        let h = h_matrix(&scene)?;
        let s = gram_from_vectors(&internals)?;
        let formula = bunching_prob(&h, &s)?.probability;
        let dev = (direct - formula).abs();
        suite.record(dev - 1e-10, || {
            format!("n={n} m={m} L={l} kappa={kappa:?}: |{direct:.12e} - {formula:.12e}|")
        });
    }
    Ok(suite.finish())
}

/// perm(H ⊙ S) <= perm(H) for Gram matrices of dimension <= 3.
pub fn suite_small_dimension_bound(trials: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut suite = Suite::new("bound: n <= 3 Gram matrices");
    for t in 0..trials {
        let n = 2 + t % 2;
        let h = random_h(&mut rng, n);
        let s = random_gram(&mut rng, n);
        let perm_h = perm_ryser(&h)?.re();
        let perm_hs = perm_ryser(&hadamard(&h, &s)?)?.re();
        suite.record(perm_hs - perm_h - 1e-9 * perm_h.abs(), || {
            format!("n={n}: perm(H.S)={perm_hs:.12e} > perm(H)={perm_h:.12e}")
        });
    }
    Ok(suite.finish())
}

/// Rank-one H: perm(H ⊙ S) = (Π H_ii) perm(S) exactly, hence bounded by
/// perm(H). Worst figure: relative factorization error minus 1e-10.
pub fn suite_rank_one_factorization(trials: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut suite = Suite::new("bound: rank-one H factorization");
    for t in 0..trials {
        let m1 = 3 + t % 3;
        let m2 = 1 + t % 3;
        let u1 = haar_unitary(m1, seed ^ (2 * t as u64 + 1));
        let u2 = haar_unitary(m2, seed ^ (2 * t as u64 + 2));
        let out_mode = t % m1;
        let scene = cascade_rank_one(&u1, out_mode, &u2)?;
        let h = h_matrix(&scene)?;
        let s = random_gram(&mut rng, scene.photons());
        let lhs = perm_ryser(&hadamard(&h, &s)?)?.re();
        let diag: f64 = (0..scene.photons()).map(|i| h.at(i, i).re).product();
        let rhs = diag * perm_ryser(&s)?.re();
        let rel = (lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE);
        suite.record(rel - 1e-10, || {
            format!("m1={m1} m2={m2}: {lhs:.12e} vs {rhs:.12e}")
        });
    }
    Ok(suite.finish())
}

/// perm(H ⊙ S) <= perm(H) for entrywise-nonnegative H and gauge transforms
/// of such H.
pub fn suite_nonneg_class_bound(trials: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut suite = Suite::new("bound: nonnegative-class H");
    for t in 0..trials {
        let n = 2 + t % 4;
        // nonnegative PSD: Gram of entrywise-nonnegative vectors, scaled into
        // spectrum <= 1
        let states: Vec<Vec<Complex64>> = (0..n)
            .map(|_| {
                let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter_mut().for_each(|x| *x /= norm);
                v.into_iter().map(|x| c(x, 0.0)).collect()
            })
            .collect();
        let base = gram_from_vectors(&states)?;
        let eigs = hermitian_eigenvalues(&base)?;
        let h_nonneg = base.scale_re(1.0 / eigs.last().unwrap().max(1.0));
        // random gauge member of the class
        let thetas: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect();
        let h_gauged = gauge_transform(&h_nonneg, &thetas)?;

        let s = random_gram(&mut rng, n);
        for h in [&h_nonneg, &h_gauged] {
            let perm_h = perm_ryser(h)?.re();
            let perm_hs = perm_ryser(&hadamard(h, &s)?)?.re();
            suite.record(perm_hs - perm_h - 1e-9 * perm_h.abs(), || {
                format!("n={n}: perm(H.S)={perm_hs:.12e} > perm(H)={perm_h:.12e}")
            });
        }
    }
    Ok(suite.finish())
}

/// perm(H ⊙ S) <= perm(H) for every structured S family.
pub fn suite_structured_s_bound(trials_per_family: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut suite = Suite::new("bound: structured S families");
    for t in 0..trials_per_family {
        let n = 2 + t % 4;
        let h = random_h(&mut rng, n);
        let perm_h = perm_ryser(&h)?.re();
        let mut specs: Vec<GramSpec> = vec![
            GramSpec::XModel {
                n,
                x: rng.random::<f64>(),
            },
            GramSpec::XiModel {
                x: (0..n).map(|_| rng.random::<f64>()).collect(),
            },
            GramSpec::Interpolated {
                base: Box::new(GramSpec::XModel {
                    n,
                    x: rng.random::<f64>(),
                }),
                x: (0..n).map(|_| rng.random::<f64>()).collect(),
            },
        ];
        if n >= 2 {
            specs.push(GramSpec::TwoSet {
                k: 1 + t % (n - 1).max(1),
                n,
                x: rng.random::<f64>(),
            });
        }
        if n >= 3 {
            specs.push(GramSpec::DirectSum {
                blocks: vec![
                    GramSpec::XModel {
                        n: n - 1,
                        x: rng.random::<f64>(),
                    },
                    GramSpec::AllOnes { n: 1 },
                ],
            });
        }
        for spec in specs {
            let s = compile_gram(&spec)?;
            let perm_hs = perm_ryser(&hadamard(&h, &s)?)?.re();
            suite.record(perm_hs - perm_h - 1e-9 * perm_h.abs(), || {
                format!("{spec:?}: perm(H.S)={perm_hs:.12e} > perm(H)={perm_h:.12e}")
            });
        }
    }
    Ok(suite.finish())
}

/// Block factorization of direct sums:
/// perm(H ⊙ (S1 ⊕ S2)) = Π perm(H_block ⊙ S_block).
pub fn suite_direct_sum_factorization(trials: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut suite = Suite::new("direct-sum block factorization");
    for t in 0..trials {
        let n1 = 1 + t % 3;
        let n2 = 1 + (t / 3) % 3;
        let n = n1 + n2;
        let h = random_h(&mut rng, n);
        let s1 = random_gram(&mut rng, n1);
        let s2 = random_gram(&mut rng, n2);
        let mut s = CMatrix::zeros(n, n);
        for i in 0..n1 {
            for j in 0..n1 {
                s.set(i, j, s1.at(i, j));
            }
        }
        for i in 0..n2 {
            for j in 0..n2 {
                s.set(n1 + i, n1 + j, s2.at(i, j));
            }
        }
        let whole = perm_ryser(&hadamard(&h, &s)?)?.re();
        let idx1: Vec<usize> = (0..n1).collect();
        let idx2: Vec<usize> = (n1..n).collect();
        let p1 = perm_ryser(&hadamard(&h.principal_block(&idx1)?, &s1)?)?.re();
        let p2 = perm_ryser(&hadamard(&h.principal_block(&idx2)?, &s2)?)?.re();
        let rel = (whole - p1 * p2).abs() / (p1 * p2).abs().max(f64::MIN_POSITIVE);
        suite.record(rel - 1e-12, || {
            format!("n1={n1} n2={n2}: {whole:.12e} vs {:.12e}", p1 * p2)
        });
    }
    Ok(suite.finish())
}

/// Marcus inequality Π H_ii <= perm(H) and Lieb block inequality
/// perm(H) >= perm(H1) perm(H2) on random PSD matrices.
pub fn suite_marcus_lieb(trials: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut suite = Suite::new("Marcus and Lieb inequalities");
    for t in 0..trials {
        let n = 2 + t % 5;
        let h = random_gram(&mut rng, n);
        let perm_h = perm_ryser(&h)?.re();
        let diag: f64 = (0..n).map(|i| h.at(i, i).re).product();
        suite.record(diag - perm_h - 1e-9 * perm_h.abs(), || {
            format!("Marcus violated at n={n}: {diag:.12e} > {perm_h:.12e}")
        });

        if n >= 2 {
            let k = 1 + t % (n - 1);
            let idx1: Vec<usize> = (0..k).collect();
            let idx2: Vec<usize> = (k..n).collect();
            let p1 = perm_ryser(&h.principal_block(&idx1)?)?.re();
            let p2 = perm_ryser(&h.principal_block(&idx2)?)?.re();
            suite.record(p1 * p2 - perm_h - 1e-9 * perm_h.abs(), || {
                format!("Lieb violated at n={n} k={k}: {:.12e} > {perm_h:.12e}", p1 * p2)
            });
        }
    }
    Ok(suite.finish())
}

/// Mixed ensembles (uniform, shared-basis, rank-two) never exceed the
/// indistinguishable probability perm(H).
pub fn suite_mixed_bound(trials: usize, seed: u64) -> Result<SuiteOutcomeTriple> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut uniform = Suite::new("bound: uniform mixed states");
    let mut shared = Suite::new("bound: shared-basis mixed states");
    let mut rank_two = Suite::new("bound: rank-two mixed states");
    for t in 0..trials {
        let n = 2 + t % 4; // up to 5 photons
        let h = random_h(&mut rng, n);
        let perm_h = perm_ryser(&h)?.re();
        let tol = 1e-9 * perm_h.abs().max(1e-30);

        let l = 1 + t % 3;
        let mut sp: Vec<f64> = (0..l).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = sp.iter().sum();
        sp.iter_mut().for_each(|a| *a /= total);
        let p = bunching_prob_mixed(&h, &MixedEnsemble::uniform(n, &sp)?)?.probability;
        uniform.record(p - perm_h - tol, || format!("uniform n={n} L={l}: {p:.12e} > {perm_h:.12e}"));

        let spectra: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut sp: Vec<f64> = (0..l).map(|_| rng.random::<f64>() + 1e-3).collect();
                let total: f64 = sp.iter().sum();
                sp.iter_mut().for_each(|a| *a /= total);
                sp
            })
            .collect();
        let p = bunching_prob_mixed(&h, &MixedEnsemble::shared_basis(&spectra)?)?.probability;
        shared.record(p - perm_h - tol, || format!("shared n={n} L={l}: {p:.12e} > {perm_h:.12e}"));

        let alphas: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let x = rng.random::<f64>();
        let p = bunching_prob_mixed(&h, &MixedEnsemble::rank_two(&alphas, x)?)?.probability;
        rank_two.record(p - perm_h - tol, || format!("rank-two n={n} x={x:.3}: {p:.12e} > {perm_h:.12e}"));
    }
    Ok(SuiteOutcomeTriple(
        uniform.finish(),
        shared.finish(),
        rank_two.finish(),
    ))
}

pub struct SuiteOutcomeTriple(pub SuiteOutcome, pub SuiteOutcome, pub SuiteOutcome);

/// Three-way derivative agreement for the time-delay family: the generic
/// minor-sum formula, the closed form 4d(τᵀFτ − perm), and Richardson
/// finite differences (the finite-difference check runs inside
/// `perm_derivative`). Also pins the d = 0 endpoints.
pub fn suite_derivative_consistency(trials: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut suite = Suite::new("derivative consistency (time delay)");
    for t in 0..trials {
        let n = 2 + t % 7; // up to 8 photons
        let h = random_h(&mut rng, n);
        let tau = random_unit_real(&mut rng, n);
        let d = 0.05 + 1.5 * rng.random::<f64>();

        let profile = DelayProfile::new(tau.clone(), d, 1.0)?;
        let (closed, second0) = delay_derivative(&h, &profile)?;
        let generic = perm_derivative(
            &TimeDelayFamily {
                h: h.clone(),
                tau: tau.clone(),
            },
            d,
        )?;
        let scale = closed.abs().max(generic.abs()).max(1e-12);
        let rel = (closed - generic).abs() / scale;
        suite.record(rel - 1e-6, || {
            format!("n={n} d={d:.3}: closed {closed:.10e} vs generic {generic:.10e}")
        });

        // first derivative vanishes exactly at d = 0
        let profile0 = DelayProfile::new(tau.clone(), 0.0, 1.0)?;
        let (first0, second0_again) = delay_derivative(&h, &profile0)?;
        suite.record(first0.abs() - 1e-10, || format!("d=0 derivative {first0:.3e}"));
        suite.record(
            (second0 - second0_again).abs() - 1e-12 * second0.abs().max(1.0),
            || "second derivative at 0 depends on profile d".to_string(),
        );
    }
    Ok(suite.finish())
}

/// Complement identity H(κ) + H(κᶜ) = 1, mesh round trips, the zero margin
/// of the all-ones matrix, and monotone-family derivative signs.
pub fn suite_structural(trials: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut suite = Suite::new("structural identities");
    for t in 0..trials {
        let m = 2 + t % 17;
        let u = haar_unitary(m, seed ^ (t as u64) << 3);
        let n = 1 + t % m;
        let subset = 1 + t % (m - 1).max(1);
        let kappa: Vec<usize> = (0..subset).collect();
        let scene = InterferometerScene::new(u.clone(), n, &kappa)?;
        let h1 = h_matrix(&scene)?;
        let h2 = h_matrix(&scene.complement()?)?;
        let dev = h1.add(&h2)?.max_abs_diff(&CMatrix::identity(n))?;
        suite.record(dev - 1e-10, || format!("complement identity at m={m} n={n}"));

        let net = reck_decompose(&u)?;
        let err = net.reconstruct().max_abs_diff(&u)?;
        suite.record(err - 1e-9, || format!("mesh round trip at m={m}: {err:.3e}"));
        suite.record(
            unitarity_residual(&net.reconstruct())? - 1e-9,
            || format!("mesh reconstruction not unitary at m={m}"),
        );
    }
    for n in 2..=10 {
        let report = anomaly_criterion(&CMatrix::ones(n, n))?;
        let nf: f64 = (1..=n).map(|k| k as f64).product();
        suite.record(report.criterion_margin.abs() - 1e-9 * nf, || {
            format!("all-ones margin at n={n}: {:.3e}", report.criterion_margin)
        });
    }
    // monotone families: proven nonnegative derivatives
    let h = random_h(&mut rng, 5);
    for model in [
        MonotoneModel::XModel,
        MonotoneModel::XiModel,
        MonotoneModel::TwoSet { k: 2 },
    ] {
        let report = monotonicity_check(model, &h, (trials / 4).max(5), seed ^ 0xABCD)?;
        suite.record(report.violations as f64, || {
            format!("{model:?} produced {} negative derivatives", report.violations)
        });
    }
    Ok(suite.finish())
}

/// Search sanity: no positive margins at dimension 3, persistent positive
/// margins under small rank-two perturbations of the bundled instance.
pub fn suite_search_sanity(trials_small: usize, trials_perturb: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut suite = Suite::new("search sanity (n=3 clean, perturbed instance)");
    let report = conjecture_search(3, trials_small, Sampler::HaarGram, seed)?;
    suite.record(report.positive_count as f64, || {
        format!("n=3 search found ratio {}", report.best_ratio)
    });
    let report = conjecture_search(3, trials_small, Sampler::LowRank(2), seed ^ 1)?;
    suite.record(report.positive_count as f64, || {
        format!("n=3 low-rank search found ratio {}", report.best_ratio)
    });

    let perturb = perturbed_counterexample_margins(1e-6, trials_perturb, seed ^ 2)?;
    for (i, &m) in perturb.margins.iter().enumerate() {
        suite.record(-m, || {
            format!(
                "perturbation {i} (rel {:.2e}) lost the violation: margin {m:.3e}",
                perturb.measured_rel[i]
            )
        });
        suite.record(perturb.measured_rel[i] - 1e-6, || {
            format!("perturbation {i} overshot the 1e-6 relative target")
        });
    }
    Ok(suite.finish())
}

/// Run every suite. `quick` shrinks trial counts to finish within seconds.
pub fn run_selftest(quick: bool, seed: u64) -> Result<SelftestReport> {
    let full = |n: usize, q: usize| if quick { q } else { n };
    let mut suites = Vec::new();
    suites.push(suite_engine_agreement(full(500, 100), seed)?);
    suites.push(suite_oracle_equivalence(full(200, 40), seed.wrapping_add(1))?);
    suites.push(suite_small_dimension_bound(full(1000, 200), seed.wrapping_add(2))?);
    suites.push(suite_rank_one_factorization(full(1000, 100), seed.wrapping_add(3))?);
    suites.push(suite_nonneg_class_bound(full(1000, 200), seed.wrapping_add(4))?);
    suites.push(suite_structured_s_bound(full(1000, 150), seed.wrapping_add(5))?);
    suites.push(suite_direct_sum_factorization(full(1000, 200), seed.wrapping_add(6))?);
    suites.push(suite_marcus_lieb(full(1000, 200), seed.wrapping_add(7))?);
    let triple = suite_mixed_bound(full(1000, 120), seed.wrapping_add(8))?;
    suites.push(triple.0);
    suites.push(triple.1);
    suites.push(triple.2);
    suites.push(suite_derivative_consistency(full(100, 15), seed.wrapping_add(9))?);
    suites.push(suite_structural(full(100, 20), seed.wrapping_add(10))?);
    suites.push(suite_search_sanity(
        full(10_000, 1000),
        full(12, 3),
        seed.wrapping_add(11),
    )?);
    let pass = suites.iter().all(|s| s.pass);
    Ok(SelftestReport {
        quick,
        seed,
        suites,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_selftest_passes_and_is_deterministic() {
        let a = run_selftest(true, 7).unwrap();
        assert!(a.pass, "failing suites: {:#?}", a.suites.iter().filter(|s| !s.pass).collect::<Vec<_>>());
        let b = run_selftest(true, 7).unwrap();
        let ja = serde_json::to_string(&a).unwrap();
        let jb = serde_json::to_string(&b).unwrap();
        assert_eq!(ja, jb);
    }
}
