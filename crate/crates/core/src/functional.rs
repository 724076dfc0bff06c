//! Linear functionals on the truncated word basis and their convolution calculus.
//!
//! A [`Functional`] stores one value per word of degree `≤ max_degree`, laid
//! out densely by degree and word index. Convolution runs over the Sweedler
//! terms of each word without building tensors.

use alloc::vec::Vec;

use crate::coalg::for_each_split;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::ncpoly::{Alphabet, Letter, NCPolynomial, Word};
use crate::scalar::{is_finite, powi, real, sqrt, Scalar, ONE, ZERO};

/// Hermiticity tolerance for covariance matrices.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Functional {
    alphabet: Alphabet,
    max_degree: usize,
    values: Vec<Vec<Scalar>>,
}

/// A functional with `φ(1) = 1` in intended use.
pub type MomentFunctional = Functional;
/// A functional with `ψ(1) = 0` in intended use.
pub type GeneratorFunctional = Functional;

impl Functional {
    pub fn zero(alphabet: Alphabet, max_degree: usize) -> Self {
        let values = (0..=max_degree).map(|n| alloc::vec![ZERO; alphabet.word_count(n)]).collect();
        Functional { alphabet, max_degree, values }
    }

    /// The counit `δ`, the unit of convolution.
    pub fn counit(alphabet: Alphabet, max_degree: usize) -> Self {
        Self::from_fn(alphabet, max_degree, crate::coalg::counit_word)
    }

    pub fn from_fn<F: FnMut(&Word) -> Scalar>(alphabet: Alphabet, max_degree: usize, mut f: F) -> Self {
        let values = (0..=max_degree)
            .map(|n| alphabet.words_of_degree(n).map(|w| f(&w)).collect())
            .collect();
        Functional { alphabet, max_degree, values }
    }

    /// Words not listed are zero.
    pub fn from_values<I>(alphabet: Alphabet, max_degree: usize, values: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Word, Scalar)>,
    {
        let mut out = Self::zero(alphabet, max_degree);
        for (w, v) in values {
            out.set(&w, v)?;
        }
        Ok(out)
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Values on the words of degree `n`, in word-index order.
    pub fn degree_values(&self, n: usize) -> &[Scalar] {
        &self.values[n]
    }

    fn locate(&self, word: &Word) -> Result<(usize, usize)> {
        let n = word.degree();
        if n > self.max_degree {
            return Err(Error::BeyondTruncation { degree: n, max_degree: self.max_degree });
        }
        self.alphabet.check_word(word)?;
        Ok((n, self.alphabet.word_index(word).expect("checked word")))
    }

    pub fn value(&self, word: &Word) -> Result<Scalar> {
        let (n, k) = self.locate(word)?;
        Ok(self.values[n][k])
    }

    pub fn set(&mut self, word: &Word, value: Scalar) -> Result<()> {
        if !is_finite(value) {
            return Err(Error::NonFinite);
        }
        let (n, k) = self.locate(word)?;
        self.values[n][k] = value;
        Ok(())
    }

    pub fn unit_value(&self) -> Scalar {
        self.values[0][0]
    }

    /// Linear extension to a polynomial.
    pub fn evaluate(&self, p: &NCPolynomial) -> Result<Scalar> {
        self.alphabet.check_same(p.alphabet())?;
        p.terms().try_fold(ZERO, |acc, (w, &c)| Ok(acc + c * self.value(w)?))
    }

    /// Restriction to words of degree `≤ max_degree`.
    pub fn truncate(&self, max_degree: usize) -> Self {
        let max_degree = max_degree.min(self.max_degree);
        Functional {
            alphabet: self.alphabet,
            max_degree,
            values: self.values[..=max_degree].to_vec(),
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Scalar, Scalar) -> Scalar) -> Result<Self> {
        self.alphabet.check_same(other.alphabet)?;
        let max_degree = self.max_degree.min(other.max_degree);
        let values = (0..=max_degree)
            .map(|n| self.values[n].iter().zip(&other.values[n]).map(|(&a, &b)| f(a, b)).collect())
            .collect();
        Ok(Functional { alphabet: self.alphabet, max_degree, values })
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: Scalar) -> Self {
        self.map_degrees(|_, v| v * factor)
    }

    fn map_degrees(&self, f: impl Fn(usize, Scalar) -> Scalar) -> Self {
        Functional {
            alphabet: self.alphabet,
            max_degree: self.max_degree,
            values: self
                .values
                .iter()
                .enumerate()
                .map(|(n, vs)| vs.iter().map(|&v| f(n, v)).collect())
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest difference over the words both functionals define.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let max_degree = self.max_degree.min(other.max_degree);
        (0..=max_degree)
            .flat_map(|n| self.values[n].iter().zip(&other.values[n]).map(|(a, b)| (a - b).norm()))
            .fold(0.0, f64::max)
    }

    /// `max_w |φ(w*) − conj φ(w)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for n in 0..=self.max_degree {
            for (k, w) in self.alphabet.words_of_degree(n).enumerate() {
                let star = self.alphabet.word_index(&w.involution()).expect("same alphabet");
                worst = worst.max((self.values[n][star] - self.values[n][k].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian_defect() <= HERMITIAN_TOL
    }

    fn require_generator(&self) -> Result<()> {
        let v = self.unit_value();
        if v.norm() > 1e-12 {
            return Err(Error::NonZeroAtUnit(v));
        }
        Ok(())
    }

    fn require_normalized(&self) -> Result<()> {
        let v = self.unit_value();
        if (v - ONE).norm() > 1e-12 {
            return Err(Error::NotNormalized(v));
        }
        Ok(())
    }
}

/// Letter indices of the word with the given degree and index.
fn decode(base: usize, degree: usize, mut index: usize, out: &mut Vec<usize>) {
    out.clear();
    out.resize(degree, 0);
    for slot in out.iter_mut().rev() {
        *slot = index % base;
        index /= base;
    }
}

/// `φ ⋆ ψ = (φ ⊗ ψ)∘Δ`, truncated at the smaller of the two degrees.
pub fn convolve(phi: &Functional, psi: &Functional) -> Result<Functional> {
    phi.alphabet.check_same(psi.alphabet)?;
    let alphabet = phi.alphabet;
    let base = alphabet.letter_count();
    let mut out = Functional::zero(alphabet, phi.max_degree.min(psi.max_degree));
    let mut letters = Vec::new();
    for n in 0..=out.max_degree {
        for k in 0..out.values[n].len() {
            decode(base, n, k, &mut letters);
            let mut acc = ZERO;
            for_each_split(alphabet, &letters, |ld, li, rd, ri| {
                acc += phi.values[ld][li] * psi.values[rd][ri];
            });
            out.values[n][k] = acc;
        }
    }
    Ok(out)
}

/// `φ^{⋆n}` by binary squaring; `φ^{⋆0} = δ`.
pub fn conv_power(phi: &Functional, mut n: usize) -> Functional {
    let mut acc: Option<Functional> = None;
    let mut base = phi.clone();
    loop {
        if n & 1 == 1 {
            acc = Some(match acc {
                None => base.clone(),
                Some(a) => convolve(&a, &base).expect("same alphabet"),
            });
        }
        n >>= 1;
        if n == 0 {
            break;
        }
        base = convolve(&base, &base).expect("same alphabet");
    }
    acc.unwrap_or_else(|| Functional::counit(phi.alphabet, phi.max_degree))
}

/// Convolution exponential `exp_⋆ψ = Σ_k ψ^{⋆k}/k!`.
///
/// Self-adjoint alphabet: the series is a finite sum on each degree, because
/// `ψ(1) = 0` and every Sweedler term of a degree-`n` word has at most `n`
/// non-empty legs in a `k`-fold split.
///
/// Matrix-unitary alphabet: the coproduct keeps the degree and star pattern
/// of every leg, and on the words with fixed degree `n` and star pattern the
/// coalgebra is the matrix coalgebra `Δe_IJ = Σ_M e_IM ⊗ e_MJ` with
/// multi-indices `I, J ∈ [d]^n`. The exponential there is the matrix
/// exponential of `Ψ[I][J] = ψ(e_IJ)`.
pub fn conv_exp(psi: &Functional) -> Result<Functional> {
    psi.require_generator()?;
    match psi.alphabet {
        Alphabet::SelfAdjoint { .. } => {
            let mut out = Functional::counit(psi.alphabet, psi.max_degree);
            let mut term = out.clone();
            for k in 1..=psi.max_degree {
                term = convolve(&term, psi)?.scale(real(1.0 / k as f64));
                out = out.checked_add(&term)?;
            }
            Ok(out)
        }
        Alphabet::MatrixUnitary { d } => Ok(matrix_coalgebra_exp(psi, d)),
    }
}

/// Word index of `x_{I_1 J_1}^{ε_1} … x_{I_n J_n}^{ε_n}` where the
/// multi-indices are given as base-`d` numbers and `stars` as a bitmask
/// (most significant bit first).
fn matrix_word_index(d: usize, n: usize, row: usize, col: usize, stars: usize) -> usize {
    let base = 2 * d * d;
    let mut index = 0;
    let (mut r, mut c) = (row, col);
    let mut place = 1;
    for k in 0..n {
        let (rk, ck) = (r % d, c % d);
        r /= d;
        c /= d;
        let star = stars >> k & 1;
        index += (2 * (rk * d + ck) + star) * place;
        place *= base;
    }
    index
}

fn matrix_coalgebra_exp(psi: &Functional, d: usize) -> Functional {
    let mut out = Functional::zero(psi.alphabet, psi.max_degree);
    out.values[0][0] = ONE;
    for n in 1..=psi.max_degree {
        let dim = d.pow(n as u32);
        for stars in 0..(1usize << n) {
            let generator = CMatrix::from_fn(dim, dim, |i, j| psi.values[n][matrix_word_index(d, n, i, j, stars)]);
            let e = linalg::expm(&generator);
            for i in 0..dim {
                for j in 0..dim {
                    out.values[n][matrix_word_index(d, n, i, j, stars)] = e[(i, j)];
                }
            }
        }
    }
    out
}

/// Convolution logarithm `Σ_{k≥1} (−1)^{k+1}(φ − δ)^{⋆k}/k`, a finite sum per
/// degree on the self-adjoint alphabet.
pub fn conv_log(phi: &Functional) -> Result<Functional> {
    phi.require_normalized()?;
    if !phi.alphabet.is_self_adjoint() {
        return Err(Error::Unsupported {
            operation: "conv_log",
            alphabet: phi.alphabet,
            reason: "the logarithmic series does not terminate on this coalgebra",
        });
    }
    let delta = Functional::counit(phi.alphabet, phi.max_degree);
    let centered = phi.checked_sub(&delta)?;
    let mut out = Functional::zero(phi.alphabet, phi.max_degree);
    let mut power = centered.clone();
    for k in 1..=phi.max_degree {
        if k > 1 {
            power = convolve(&power, &centered)?;
        }
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        out = out.checked_add(&power.scale(real(sign / k as f64)))?;
    }
    Ok(out)
}

/// Hermitian covariance matrix of a gaussian functional.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceMatrix {
    q: CMatrix,
    psd: bool,
}

impl CovarianceMatrix {
    pub fn new(q: CMatrix) -> Result<Self> {
        if !q.is_square() {
            return Err(Error::DimensionMismatch { what: "covariance matrix columns", expected: q.nrows(), found: q.ncols() });
        }
        if q.iter().any(|&z| !is_finite(z)) {
            return Err(Error::NonFinite);
        }
        let defect = linalg::hermitian_defect(&q);
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian { what: "covariance matrix", defect });
        }
        let psd = q.nrows() == 0 || linalg::min_eigenvalue(&q) >= -1e-10;
        Ok(CovarianceMatrix { q, psd })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.q
    }

    pub fn d(&self) -> usize {
        self.q.nrows()
    }

    pub fn is_psd(&self) -> bool {
        self.psd
    }

    pub fn alphabet(&self) -> Alphabet {
        Alphabet::self_adjoint(self.d())
    }

    pub fn entry(&self, i: usize, j: usize) -> Scalar {
        self.q[(i, j)]
    }

    pub fn scale(&self, factor: f64) -> Self {
        CovarianceMatrix { q: self.q.scale(factor), psd: if factor >= 0.0 { self.psd } else { false } }
    }
}

fn letter_positions(q: &CovarianceMatrix, word: &Word) -> Result<Vec<usize>> {
    let alphabet = q.alphabet();
    word.letters()
        .iter()
        .map(|&l| match l {
            Letter::X(i) if (i as usize) < q.d() => Ok(i as usize),
            _ => Err(Error::ForeignLetter { letter: l, alphabet }),
        })
        .collect()
}

/// All pair partitions of `{0, …, n−1}`, each as pairs `(k, l)` with `k < l`.
/// The smallest unpaired element is always paired first, which fixes the order.
pub fn pair_partitions(n: usize) -> Vec<Vec<(usize, usize)>> {
    fn go(free: &mut Vec<usize>, current: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if free.is_empty() {
            out.push(current.clone());
            return;
        }
        let first = free.remove(0);
        for pos in 0..free.len() {
            let partner = free.remove(pos);
            current.push((first, partner));
            go(free, current, out);
            current.pop();
            free.insert(pos, partner);
        }
        free.insert(0, first);
    }
    let mut out = Vec::new();
    if n.is_multiple_of(2) {
        go(&mut (0..n).collect(), &mut Vec::new(), &mut out);
    }
    out
}

fn gaussian_sum(q: &CovarianceMatrix, idx: &[usize], partitions: &[Vec<(usize, usize)>]) -> Scalar {
    partitions
        .iter()
        .map(|p| p.iter().fold(ONE, |acc, &(k, l)| acc * q.q[(idx[k], idx[l])]))
        .sum()
}

/// `γ_Q(x_{i1} … x_{in})`: zero for odd `n`, otherwise the sum over pair
/// partitions of the products `Q_{i_k i_l}` (`k < l`) of the pairs.
pub fn gaussian_functional(q: &CovarianceMatrix, word: &Word) -> Result<Scalar> {
    let idx = letter_positions(q, word)?;
    Ok(gaussian_sum(q, &idx, &pair_partitions(idx.len())))
}

/// `γ_Q` on all words of degree `≤ max_degree`.
pub fn gaussian_moments(q: &CovarianceMatrix, max_degree: usize) -> Functional {
    let alphabet = q.alphabet();
    let mut out = Functional::zero(alphabet, max_degree);
    let mut idx = Vec::new();
    for n in (0..=max_degree).step_by(2) {
        let partitions = pair_partitions(n);
        for k in 0..out.values[n].len() {
            decode(alphabet.letter_count(), n, k, &mut idx);
            out.values[n][k] = gaussian_sum(q, &idx, &partitions);
        }
    }
    out
}

/// `g_Q(x_i x_j) = Q_ij`, zero on all other words.
pub fn cumulant_functional(q: &CovarianceMatrix, max_degree: usize) -> Functional {
    let alphabet = q.alphabet();
    let mut out = Functional::zero(alphabet, max_degree);
    if max_degree >= 2 {
        let d = q.d();
        for i in 0..d {
            for j in 0..d {
                out.values[2][i * d + j] = q.q[(i, j)];
            }
        }
    }
    out
}

/// `w ↦ λ^{deg w} φ(w)`, i.e. `φ` composed with `x ↦ λx`.
pub fn dilate(phi: &Functional, lambda: Scalar) -> Functional {
    phi.map_degrees(|n, v| v * powi(lambda, n))
}

fn require_centralized(phi: &Functional) -> Result<()> {
    phi.require_normalized()?;
    if phi.max_degree >= 1 {
        for (k, &v) in phi.values[1].iter().enumerate() {
            if v.norm() > 1e-12 {
                return Err(Error::NotCentralized { letter: phi.alphabet.letter(k), value: v });
            }
        }
    }
    Ok(())
}

/// `φ^{⋆n}` of the `n^{−1/2}`-dilated functional on all words up to its truncation.
pub fn clt_functional(phi: &Functional, n: usize) -> Result<Functional> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive"));
    }
    require_centralized(phi)?;
    Ok(conv_power(&dilate(phi, real(1.0 / sqrt(n as f64))), n))
}

/// `φ^{⋆n}(w(x/√n))`, which tends to `γ_Q(w)` with `Q_ij = φ(x_i x_j)`.
pub fn clt_value(phi: &Functional, n: usize, word: &Word) -> Result<Scalar> {
    phi.locate(word)?;
    clt_functional(&phi.truncate(word.degree()), n)?.value(word)
}

/// `γ_Q(u (x_i x_j − x_j x_i − (Q_ij − Q_ji)·1) w)`, which vanishes for every
/// gaussian functional.
pub fn commutator_ideal_check(q: &CovarianceMatrix, u: &Word, w: &Word, i: usize, j: usize) -> Result<Scalar> {
    let alphabet = q.alphabet();
    if i >= q.d() || j >= q.d() {
        return Err(Error::InvalidParameter("generator index out of range"));
    }
    alphabet.check_word(u)?;
    alphabet.check_word(w)?;
    let (xi, xj) = (Letter::X(i as u16), Letter::X(j as u16));
    let middle = NCPolynomial::from_terms(
        alphabet,
        [
            (Word::new(alloc::vec![xi, xj]), ONE),
            (Word::new(alloc::vec![xj, xi]), -ONE),
            (Word::empty(), -(q.entry(i, j) - q.entry(j, i))),
        ],
    )?;
    let element = NCPolynomial::from_word(alphabet, u.clone())?
        .checked_mul(&middle)?
        .checked_mul(&NCPolynomial::from_word(alphabet, w.clone())?)?;
    let value = element
        .terms()
        .try_fold(ZERO, |acc, (word, &c)| Ok(acc + c * gaussian_functional(q, word)?));
    value
}

/// `(δ + ψ/n)^{⋆n}` on all words up to the truncation of `ψ`.
pub fn euler_limit_functional(psi: &Functional, n: usize) -> Result<Functional> {
    psi.require_generator()?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive"));
    }
    let step = Functional::counit(psi.alphabet, psi.max_degree).checked_add(&psi.scale(real(1.0 / n as f64)))?;
    Ok(conv_power(&step, n))
}

pub fn euler_limit(psi: &Functional, n: usize, word: &Word) -> Result<Scalar> {
    psi.locate(word)?;
    euler_limit_functional(&psi.truncate(word.degree()), n)?.value(word)
}

/// One-variable functional with all even moments 1 and odd moments 0: the
/// law of a fair ±1 coin.
pub fn bernoulli_moments(max_degree: usize) -> Functional {
    Functional::from_fn(Alphabet::self_adjoint(1), max_degree, |w| if w.degree() % 2 == 0 { ONE } else { ZERO })
}
