//! Positivity and conditional positivity of functionals through Gram matrices.

use alloc::vec::Vec;

use crate::coalg::counit_word;
use crate::error::{Error, Result};
use crate::functional::{conv_exp, Functional};
use crate::linalg::{self, CMatrix};
use crate::ncpoly::{NCPolynomial, Word};
use crate::scalar::{real, ONE, ZERO};

/// Relative eigenvalue tolerance, multiplied by the 1-norm of the Gram matrix.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Gram matrix `M[a][b] = φ(a* b)` over an ordered basis.
#[derive(Clone, Debug)]
pub struct MomentMatrix {
    pub basis: Vec<NCPolynomial>,
    pub entries: CMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsdReport {
    pub min_eigenvalue: f64,
    pub is_psd: bool,
    /// Absolute tolerance actually applied to the smallest eigenvalue.
    pub tolerance: f64,
}

impl MomentMatrix {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Eigenvalue test `λ_min ≥ −tol·‖M‖₁`.
    pub fn psd_report(&self, tol: f64) -> PsdReport {
        let tolerance = tol * linalg::norm1(&self.entries);
        let min_eigenvalue = linalg::min_eigenvalue(&self.entries);
        PsdReport { min_eigenvalue, is_psd: min_eigenvalue >= -tolerance, tolerance }
    }
}

fn require_degree(phi: &Functional, k: usize) -> Result<()> {
    if 2 * k > phi.max_degree() {
        return Err(Error::BeyondTruncation { degree: 2 * k, max_degree: phi.max_degree() });
    }
    Ok(())
}

/// Gram matrix of `φ` over an arbitrary family of polynomials.
pub fn gram_matrix(phi: &Functional, basis: Vec<NCPolynomial>) -> Result<MomentMatrix> {
    let n = basis.len();
    let mut entries = linalg::zeros(n, n);
    for (i, a) in basis.iter().enumerate() {
        phi.alphabet().check_same(a.alphabet())?;
        for (j, b) in basis.iter().enumerate() {
            let mut acc = ZERO;
            for (u, &alpha) in a.terms() {
                let ustar = u.involution();
                for (w, &beta) in b.terms() {
                    acc += alpha.conj() * beta * phi.value(&ustar.concat(w))?;
                }
            }
            entries[(i, j)] = acc;
        }
    }
    Ok(MomentMatrix { basis, entries })
}

fn word_basis(phi: &Functional, words: impl Iterator<Item = Word>) -> Result<Vec<NCPolynomial>> {
    words.map(|w| NCPolynomial::from_word(phi.alphabet(), w)).collect()
}

/// Gram matrix over all words of degree `≤ k`; needs `2k ≤` the truncation of `φ`.
pub fn moment_matrix(phi: &Functional, k: usize) -> Result<MomentMatrix> {
    require_degree(phi, k)?;
    gram_matrix(phi, word_basis(phi, phi.alphabet().words_up_to(k).into_iter())?)
}

pub fn is_positive(phi: &Functional, k: usize, tol: f64) -> Result<PsdReport> {
    Ok(moment_matrix(phi, k)?.psd_report(tol))
}

/// Gram matrix over a basis of the counit kernel among polynomials of degree
/// `≤ k`: the non-empty words for self-adjoint letters, `w − δ(w)·1` for
/// unitary ones.
pub fn kernel_moment_matrix(psi: &Functional, k: usize) -> Result<MomentMatrix> {
    require_degree(psi, k)?;
    let alphabet = psi.alphabet();
    let words = (1..=k).flat_map(|n| alphabet.words_of_degree(n));
    let basis = if alphabet.is_self_adjoint() {
        word_basis(psi, words)?
    } else {
        words
            .map(|w| {
                let delta = counit_word(&w);
                NCPolynomial::from_terms(alphabet, [(w, ONE), (Word::empty(), -delta)])
            })
            .collect::<Result<Vec<_>>>()?
    };
    gram_matrix(psi, basis)
}

/// `ψ(b* b) ≥ 0` for `b` in the counit kernel, tested up to degree `k`.
pub fn is_conditionally_positive(psi: &Functional, k: usize, tol: f64) -> Result<PsdReport> {
    Ok(kernel_moment_matrix(psi, k)?.psd_report(tol))
}

pub fn is_hermitian_functional(psi: &Functional) -> bool {
    psi.is_hermitian()
}

/// Positivity report of `exp_⋆(tψ)` at degree `k` for each `t ≥ 0`.
pub fn schoenberg_verify(psi: &Functional, ts: &[f64], k: usize, tol: f64) -> Result<Vec<PsdReport>> {
    ts.iter()
        .map(|&t| {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::InvalidParameter("times must be finite and non-negative"));
            }
            let phi = conv_exp(&psi.scale(real(t)))?;
            debug_assert!((phi.unit_value() - ONE).norm() < 1e-12);
            is_positive(&phi, k, tol)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::{convolve, cumulant_functional, gaussian_moments, CovarianceMatrix};
    use crate::ncpoly::{Alphabet, Letter};
    use crate::scalar::{c, I};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn example_q() -> CovarianceMatrix {
        CovarianceMatrix::new(CMatrix::from_row_slice(2, 2, &[real(0.5), c(0.0, 0.5), c(0.0, -0.5), real(0.5)])).unwrap()
    }

    fn scalar_q(v: f64) -> CovarianceMatrix {
        CovarianceMatrix::new(CMatrix::from_element(1, 1, real(v))).unwrap()
    }

    fn random_covariance(d: usize, seed: u64) -> CovarianceMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = CMatrix::from_fn(d, d, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let q = &a * a.adjoint();
        CovarianceMatrix::new((&q + q.adjoint()).scale(0.5)).unwrap()
    }

    #[test]
    fn moment_matrix_examples() {
        let phi = gaussian_moments(&scalar_q(1.0), 4);
        let m0 = moment_matrix(&phi, 0).unwrap();
        assert_eq!(m0.entries, CMatrix::from_element(1, 1, ONE));
        let m1 = moment_matrix(&phi, 1).unwrap();
        assert_eq!(m1.entries, linalg::identity(2));
        assert!(matches!(moment_matrix(&phi, 3), Err(Error::BeyondTruncation { .. })));
    }

    #[test]
    fn positivity_examples() {
        assert!(is_positive(&gaussian_moments(&example_q(), 4), 2, DEFAULT_TOL).unwrap().is_psd);
        let a = Alphabet::self_adjoint(1);
        let bad = Functional::from_values(a, 2, [(Word::empty(), ONE), (Word::new(alloc::vec![Letter::X(0); 2]), real(-1.0))]).unwrap();
        let report = is_positive(&bad, 1, DEFAULT_TOL).unwrap();
        assert!(!report.is_psd && report.min_eigenvalue < -0.5);
        for alphabet in [Alphabet::self_adjoint(2), Alphabet::matrix_unitary(1)] {
            for k in 0..=2 {
                assert!(is_positive(&Functional::counit(alphabet, 4), k, DEFAULT_TOL).unwrap().is_psd);
            }
        }
    }

    #[test]
    fn conditional_positivity_examples() {
        for k in 1..=3 {
            assert!(is_conditionally_positive(&cumulant_functional(&example_q(), 6), k, DEFAULT_TOL).unwrap().is_psd);
        }
        assert!(!is_conditionally_positive(&cumulant_functional(&scalar_q(-1.0), 2), 1, DEFAULT_TOL).unwrap().is_psd);
        let zero = Functional::zero(Alphabet::matrix_unitary(2), 4);
        assert!(is_conditionally_positive(&zero, 2, DEFAULT_TOL).unwrap().is_psd);
        let kernel = kernel_moment_matrix(&zero, 1).unwrap();
        assert_eq!(kernel.dim(), 8);
        assert!(kernel.basis.iter().all(|b| crate::coalg::counit(b) == ZERO));
    }

    #[test]
    fn hermiticity_examples() {
        assert!(is_hermitian_functional(&cumulant_functional(&example_q(), 4)));
        let a = Alphabet::self_adjoint(1);
        let psi = Functional::from_values(a, 2, [(Word::new(alloc::vec![Letter::X(0)]), I)]).unwrap();
        assert!(!is_hermitian_functional(&psi));
        assert!(is_hermitian_functional(&Functional::counit(Alphabet::matrix_unitary(2), 2)));
    }

    #[test]
    fn schoenberg_examples() {
        let reports = schoenberg_verify(&cumulant_functional(&example_q(), 6), &[0.25, 1.0, 4.0], 3, DEFAULT_TOL).unwrap();
        assert!(reports.iter().all(|r| r.is_psd));
        let zero = Functional::zero(Alphabet::self_adjoint(2), 4);
        assert!(schoenberg_verify(&zero, &[0.0, 1.0], 2, DEFAULT_TOL).unwrap().iter().all(|r| r.is_psd));
        let failed = schoenberg_verify(&cumulant_functional(&scalar_q(-1.0), 2), &[1.0], 1, DEFAULT_TOL).unwrap();
        assert!(!failed[0].is_psd);
        assert!(matches!(schoenberg_verify(&zero, &[-1.0], 1, DEFAULT_TOL), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn refutation_is_monotone_in_degree() {
        let a = Alphabet::self_adjoint(1);
        let bad = Functional::from_fn(a, 6, |w| match w.degree() {
            0 => ONE,
            2 => real(-1.0),
            _ => ZERO,
        });
        for k in 1..=3 {
            assert!(!is_positive(&bad, k, DEFAULT_TOL).unwrap().is_psd);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn convolution_of_gaussian_states_is_positive(d in 1usize..=2, s1 in any::<u64>(), s2 in any::<u64>()) {
            let f = gaussian_moments(&random_covariance(d, s1), 4);
            let g = gaussian_moments(&random_covariance(d, s2), 4);
            let h = convolve(&f, &g).unwrap();
            for k in 0..=2 {
                prop_assert!(is_positive(&h, k, DEFAULT_TOL).unwrap().is_psd);
            }
        }

        #[test]
        fn hermitian_functionals_have_hermitian_gram(d in 1usize..=2, seed in any::<u64>()) {
            let phi = gaussian_moments(&random_covariance(d, seed), 4);
            let m = moment_matrix(&phi, 2).unwrap();
            prop_assert!(linalg::hermitian_defect(&m.entries) < 1e-12);
        }
    }
}
