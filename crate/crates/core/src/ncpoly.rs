//! Free *-algebras over two generator alphabets: `d` self-adjoint letters
//! `x_1 … x_d`, or the `2d²` letters `x_ij`, `x_ij*` of the non-commutative
//! unitary coefficient algebra.
//!
//! Indices are zero-based in the API and one-based in text (`X(0)` prints as
//! `x1`, `U { row: 0, col: 1, star: true }` as `x12*`).

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::error::{Error, Result};
use crate::scalar::{is_finite, powi, Scalar, ONE, PRUNE_EPS, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Alphabet {
    /// Letters `x_1 … x_d` with `x_i* = x_i`.
    SelfAdjoint { d: usize },
    /// Letters `x_ij` and `x_ij*`, `i, j ∈ [d]`, with the star swapping each pair.
    MatrixUnitary { d: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Letter {
    X(u16),
    U { row: u16, col: u16, star: bool },
}

impl Letter {
    pub fn star(self) -> Letter {
        match self {
            Letter::X(i) => Letter::X(i),
            Letter::U { row, col, star } => Letter::U { row, col, star: !star },
        }
    }

    pub fn u(row: usize, col: usize, star: bool) -> Letter {
        Letter::U { row: row as u16, col: col as u16, star }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Letter::X(i) => write!(f, "x{}", i + 1),
            Letter::U { row, col, star } => {
                write!(f, "x{}{}{}", row + 1, col + 1, if star { "*" } else { "" })
            }
        }
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alphabet::SelfAdjoint { d } => write!(f, "self-adjoint(d={d})"),
            Alphabet::MatrixUnitary { d } => write!(f, "matrix-unitary(d={d})"),
        }
    }
}

impl Alphabet {
    pub const fn self_adjoint(d: usize) -> Self {
        Alphabet::SelfAdjoint { d }
    }

    pub const fn matrix_unitary(d: usize) -> Self {
        Alphabet::MatrixUnitary { d }
    }

    pub fn d(self) -> usize {
        match self {
            Alphabet::SelfAdjoint { d } | Alphabet::MatrixUnitary { d } => d,
        }
    }

    pub fn is_self_adjoint(self) -> bool {
        matches!(self, Alphabet::SelfAdjoint { .. })
    }

    pub fn letter_count(self) -> usize {
        match self {
            Alphabet::SelfAdjoint { d } => d,
            Alphabet::MatrixUnitary { d } => 2 * d * d,
        }
    }

    /// Letter with position `index` in the alphabet order.
    pub fn letter(self, index: usize) -> Letter {
        match self {
            Alphabet::SelfAdjoint { .. } => Letter::X(index as u16),
            Alphabet::MatrixUnitary { d } => {
                let pair = index / 2;
                Letter::u(pair / d, pair % d, index % 2 == 1)
            }
        }
    }

    pub fn letter_index(self, letter: Letter) -> Option<usize> {
        match (self, letter) {
            (Alphabet::SelfAdjoint { d }, Letter::X(i)) if (i as usize) < d => Some(i as usize),
            (Alphabet::MatrixUnitary { d }, Letter::U { row, col, star })
                if (row as usize) < d && (col as usize) < d =>
            {
                Some(2 * (row as usize * d + col as usize) + star as usize)
            }
            _ => None,
        }
    }

    pub fn contains(self, letter: Letter) -> bool {
        self.letter_index(letter).is_some()
    }

    pub fn letters(self) -> impl Iterator<Item = Letter> {
        (0..self.letter_count()).map(move |k| self.letter(k))
    }

    pub fn check_word(self, word: &Word) -> Result<()> {
        match word.letters().iter().find(|&&l| !self.contains(l)) {
            Some(&letter) => Err(Error::ForeignLetter { letter, alphabet: self }),
            None => Ok(()),
        }
    }

    pub fn check_same(self, other: Alphabet) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::AlphabetMismatch { left: self, right: other })
        }
    }

    /// Number of words of the given degree.
    pub fn word_count(self, degree: usize) -> usize {
        self.letter_count().pow(degree as u32)
    }

    /// Position of `word` among the words of its degree, in lexicographic
    /// order of letter indices.
    pub fn word_index(self, word: &Word) -> Option<usize> {
        let base = self.letter_count();
        word.letters()
            .iter()
            .try_fold(0usize, |acc, &l| Some(acc * base + self.letter_index(l)?))
    }

    pub fn word_at(self, degree: usize, mut index: usize) -> Word {
        let base = self.letter_count();
        let mut letters = alloc::vec![Letter::X(0); degree];
        for slot in letters.iter_mut().rev() {
            *slot = self.letter(index % base);
            index /= base;
        }
        Word(letters)
    }

    pub fn words_of_degree(self, degree: usize) -> impl Iterator<Item = Word> {
        (0..self.word_count(degree)).map(move |k| self.word_at(degree, k))
    }

    /// All words of degree `≤ max_degree` in the canonical (degree, lexicographic) order.
    pub fn words_up_to(self, max_degree: usize) -> Vec<Word> {
        (0..=max_degree).flat_map(|n| self.words_of_degree(n)).collect()
    }

    pub fn parse_letter(self, text: &str) -> Result<Letter> {
        let bad = || Error::BadLetter(text.to_string());
        let body = text.trim().strip_prefix('x').ok_or_else(bad)?;
        let letter = match self {
            Alphabet::SelfAdjoint { .. } => {
                let i: usize = body.parse().map_err(|_| bad())?;
                Letter::X(i.checked_sub(1).ok_or_else(bad)? as u16)
            }
            Alphabet::MatrixUnitary { .. } => {
                let (digits, star) = match body.strip_suffix('*') {
                    Some(rest) => (rest, true),
                    None => (body, false),
                };
                let bytes = digits.as_bytes();
                if bytes.len() != 2 || !bytes.iter().all(u8::is_ascii_digit) {
                    return Err(bad());
                }
                let row = (bytes[0] - b'0') as usize;
                let col = (bytes[1] - b'0') as usize;
                if row == 0 || col == 0 {
                    return Err(bad());
                }
                Letter::u(row - 1, col - 1, star)
            }
        };
        if self.contains(letter) {
            Ok(letter)
        } else {
            Err(Error::ForeignLetter { letter, alphabet: self })
        }
    }

    /// Parses `"1"` (the empty word) or a concatenation such as `"x1x2"`,
    /// `"x12 x21*"`.
    pub fn parse_word(self, text: &str) -> Result<Word> {
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() || compact == "1" {
            return Ok(Word::empty());
        }
        if !compact.starts_with('x') {
            return Err(Error::BadLetter(compact));
        }
        compact
            .split('x')
            .skip(1)
            .map(|piece| {
                let mut s = String::from("x");
                s.push_str(piece);
                self.parse_letter(&s)
            })
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }
}

/// A monomial; the empty word is the unit `1`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn new(letters: Vec<Letter>) -> Self {
        Word(letters)
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut letters = Vec::with_capacity(self.0.len() + other.0.len());
        letters.extend_from_slice(&self.0);
        letters.extend_from_slice(&other.0);
        Word(letters)
    }

    /// `(l_1 … l_n)* = l_n* … l_1*`.
    pub fn involution(&self) -> Word {
        Word(self.0.iter().rev().map(|l| l.star()).collect())
    }
}

impl From<&[Letter]> for Word {
    fn from(letters: &[Letter]) -> Self {
        Word(letters.to_vec())
    }
}

impl FromIterator<Letter> for Word {
    fn from_iter<T: IntoIterator<Item = Letter>>(iter: T) -> Self {
        Word(iter.into_iter().collect())
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        self.0.iter().try_for_each(|l| write!(f, "{l}"))
    }
}

/// Sparse complex combination of words over one alphabet, kept in canonical
/// form: no coefficient of modulus below [`PRUNE_EPS`] is stored.
#[derive(Clone, Debug, PartialEq)]
pub struct NCPolynomial {
    alphabet: Alphabet,
    terms: BTreeMap<Word, Scalar>,
}

impl NCPolynomial {
    pub fn zero(alphabet: Alphabet) -> Self {
        NCPolynomial { alphabet, terms: BTreeMap::new() }
    }

    pub fn one(alphabet: Alphabet) -> Self {
        Self::monomial_unchecked(alphabet, Word::empty(), ONE)
    }

    fn monomial_unchecked(alphabet: Alphabet, word: Word, coeff: Scalar) -> Self {
        let mut p = Self::zero(alphabet);
        p.add_term(word, coeff);
        p
    }

    pub fn monomial(alphabet: Alphabet, word: Word, coeff: Scalar) -> Result<Self> {
        alphabet.check_word(&word)?;
        if !is_finite(coeff) {
            return Err(Error::NonFinite);
        }
        Ok(Self::monomial_unchecked(alphabet, word, coeff))
    }

    pub fn from_word(alphabet: Alphabet, word: Word) -> Result<Self> {
        Self::monomial(alphabet, word, ONE)
    }

    pub fn from_terms<I>(alphabet: Alphabet, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Word, Scalar)>,
    {
        let mut p = Self::zero(alphabet);
        for (word, coeff) in terms {
            alphabet.check_word(&word)?;
            if !is_finite(coeff) {
                return Err(Error::NonFinite);
            }
            p.accumulate(word, coeff);
        }
        p.prune();
        Ok(p)
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &Scalar)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Same as [`Self::is_zero`].
    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    pub fn coeff(&self, word: &Word) -> Scalar {
        self.terms.get(word).copied().unwrap_or(ZERO)
    }

    /// Largest degree carrying a non-zero coefficient; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.terms.keys().map(Word::degree).max()
    }

    // Callers guarantee the word belongs to the alphabet.
    pub(crate) fn accumulate(&mut self, word: Word, coeff: Scalar) {
        *self.terms.entry(word).or_insert(ZERO) += coeff;
    }

    fn add_term(&mut self, word: Word, coeff: Scalar) {
        self.accumulate(word, coeff);
        self.prune();
    }

    pub(crate) fn prune(&mut self) {
        self.terms.retain(|_, c| c.norm() >= PRUNE_EPS);
    }

    fn combine(&self, other: &Self, sign: f64) -> Result<Self> {
        self.alphabet.check_same(other.alphabet)?;
        let mut out = self.clone();
        for (w, &c) in &other.terms {
            out.accumulate(w.clone(), c * sign);
        }
        out.prune();
        Ok(out)
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.combine(other, 1.0)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, -1.0)
    }

    /// Bilinear extension of word concatenation.
    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        self.alphabet.check_same(other.alphabet)?;
        let mut out = Self::zero(self.alphabet);
        for (u, &a) in &self.terms {
            for (v, &b) in &other.terms {
                out.accumulate(u.concat(v), a * b);
            }
        }
        out.prune();
        Ok(out)
    }

    pub fn scale(&self, factor: Scalar) -> Self {
        let mut out = NCPolynomial {
            alphabet: self.alphabet,
            terms: self.terms.iter().map(|(w, &c)| (w.clone(), c * factor)).collect(),
        };
        out.prune();
        out
    }

    /// `(Σ c_w w)* = Σ conj(c_w) w*`.
    pub fn involution(&self) -> Self {
        NCPolynomial {
            alphabet: self.alphabet,
            terms: self.terms.iter().map(|(w, c)| (w.involution(), c.conj())).collect(),
        }
    }

    /// Replaces every generator `x` by `λ·x`, i.e. multiplies each word by `λ^deg`.
    pub fn scale_generators(&self, lambda: Scalar) -> Self {
        let mut out = NCPolynomial {
            alphabet: self.alphabet,
            terms: self
                .terms
                .iter()
                .map(|(w, &c)| (w.clone(), c * powi(lambda, w.degree())))
                .collect(),
        };
        out.prune();
        out
    }

    /// Largest coefficient-wise modulus of `self − other` (alphabets must agree).
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst: f64 = 0.0;
        for (w, &c) in &self.terms {
            worst = worst.max((c - other.coeff(w)).norm());
        }
        for (w, &c) in &other.terms {
            if !self.terms.contains_key(w) {
                worst = worst.max(c.norm());
            }
        }
        worst
    }

    /// Euclidean norm of the coefficient vector.
    pub fn coeff_norm(&self) -> f64 {
        crate::scalar::sqrt(self.terms.values().map(|c| c.norm_sqr()).sum())
    }
}

impl fmt::Display for NCPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (w, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "({c})·{w}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{c, real, I};
    use proptest::prelude::*;

    const SA2: Alphabet = Alphabet::self_adjoint(2);
    const MU3: Alphabet = Alphabet::matrix_unitary(3);

    fn x(i: u16) -> Letter {
        Letter::X(i)
    }

    fn p(terms: &[(&[Letter], Scalar)]) -> NCPolynomial {
        NCPolynomial::from_terms(SA2, terms.iter().map(|(l, c)| (Word::from(*l), *c))).unwrap()
    }

    #[test]
    fn word_involution_examples() {
        assert_eq!(Word::empty().involution(), Word::empty());
        assert_eq!(Word::new(alloc::vec![x(0), x(1)]).involution(), Word::new(alloc::vec![x(1), x(0)]));
        let w = Word::new(alloc::vec![Letter::u(0, 1, false), Letter::u(2, 2, true)]);
        let expected = Word::new(alloc::vec![Letter::u(2, 2, false), Letter::u(0, 1, true)]);
        assert_eq!(w.involution(), expected);
        assert_eq!(w.to_string(), "x12x33*");
        assert_eq!(expected.to_string(), "x33x12*");
    }

    #[test]
    fn letter_indices_round_trip() {
        for a in [SA2, MU3, Alphabet::matrix_unitary(1)] {
            for k in 0..a.letter_count() {
                assert_eq!(a.letter_index(a.letter(k)), Some(k));
            }
            for n in 0..4 {
                for (k, w) in a.words_of_degree(n).enumerate() {
                    assert_eq!(a.word_index(&w), Some(k));
                }
            }
        }
    }

    #[test]
    fn canonical_word_order_is_degree_then_lexicographic() {
        let words = SA2.words_up_to(3);
        assert!(words.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(words.len(), 1 + 2 + 4 + 8);
    }

    #[test]
    fn parse_words() {
        assert_eq!(SA2.parse_word("1").unwrap(), Word::empty());
        assert_eq!(SA2.parse_word("x1x2").unwrap(), Word::new(alloc::vec![x(0), x(1)]));
        assert_eq!(MU3.parse_word("x12 x33*").unwrap().to_string(), "x12x33*");
        assert!(SA2.parse_word("x3").is_err());
        assert!(SA2.parse_word("y1").is_err());
        assert!(MU3.parse_word("x1").is_err());
        assert!(MU3.parse_word("x41").is_err());
    }

    #[test]
    fn multiplication_examples() {
        let one = NCPolynomial::one(SA2);
        let q = p(&[(&[x(0), x(1)], c(1.0, 2.0)), (&[x(1)], real(-3.0))]);
        assert_eq!(one.checked_mul(&q).unwrap(), q);
        assert_eq!(
            p(&[(&[x(0)], real(1.0))]).checked_mul(&p(&[(&[x(1)], real(1.0))])).unwrap(),
            p(&[(&[x(0), x(1)], real(1.0))])
        );
        let sum = p(&[(&[x(0)], real(1.0)), (&[x(1)], real(1.0))]);
        let diff = p(&[(&[x(0)], real(1.0)), (&[x(1)], real(-1.0))]);
        let expected = p(&[
            (&[x(0), x(0)], real(1.0)),
            (&[x(0), x(1)], real(-1.0)),
            (&[x(1), x(0)], real(1.0)),
            (&[x(1), x(1)], real(-1.0)),
        ]);
        assert_eq!(sum.checked_mul(&diff).unwrap(), expected);
    }

    #[test]
    fn alphabet_mismatch_is_an_error() {
        let a = NCPolynomial::one(SA2);
        let b = NCPolynomial::one(MU3);
        assert!(matches!(a.checked_mul(&b), Err(Error::AlphabetMismatch { .. })));
        assert!(a.checked_add(&b).is_err());
    }

    #[test]
    fn involution_examples() {
        let ix = p(&[(&[x(0)], I)]);
        assert_eq!(ix.involution(), p(&[(&[x(0)], -I)]));
        assert_eq!(p(&[(&[x(0), x(1)], ONE)]).involution(), p(&[(&[x(1), x(0)], ONE)]));
    }

    #[test]
    fn scale_generators_examples() {
        let w = p(&[(&[x(0), x(1)], ONE)]);
        let lam = c(0.5, 0.25);
        assert_eq!(w.scale_generators(lam), p(&[(&[x(0), x(1)], lam * lam)]));
        assert_eq!(w.scale_generators(ONE), w);
    }

    #[test]
    fn pruning_keeps_canonical_form() {
        let a = p(&[(&[x(0)], real(1.0))]);
        let z = a.checked_sub(&a).unwrap();
        assert!(z.is_zero());
        assert_eq!(z.degree(), None);
        assert!(NCPolynomial::from_terms(SA2, [(Word::empty(), real(1e-15))]).unwrap().is_zero());
        assert!(matches!(
            NCPolynomial::monomial(SA2, Word::empty(), c(f64::NAN, 0.0)),
            Err(Error::NonFinite)
        ));
    }

    fn arb_poly(alphabet: Alphabet, max_degree: usize) -> impl Strategy<Value = NCPolynomial> {
        let n = alphabet.letter_count();
        prop::collection::vec(
            (
                prop::collection::vec(0..n, 0..=max_degree),
                -2i32..=2,
                -2i32..=2,
            ),
            0..6,
        )
        .prop_map(move |terms| {
            NCPolynomial::from_terms(
                alphabet,
                terms.into_iter().map(|(idx, re, im)| {
                    (idx.into_iter().map(|k| alphabet.letter(k)).collect(), c(re as f64, im as f64))
                }),
            )
            .unwrap()
        })
    }

    fn arb_alphabet() -> impl Strategy<Value = Alphabet> {
        prop_oneof![
            (1usize..=3).prop_map(Alphabet::self_adjoint),
            (1usize..=2).prop_map(Alphabet::matrix_unitary)
        ]
    }

    proptest! {
        #[test]
        fn involution_is_involutive(p in arb_alphabet().prop_flat_map(|a| arb_poly(a, 5))) {
            prop_assert_eq!(p.involution().involution(), p);
        }

        #[test]
        fn multiplication_is_associative(
            (a, b, cc) in arb_alphabet().prop_flat_map(|al| (arb_poly(al, 4), arb_poly(al, 4), arb_poly(al, 4)))
        ) {
            let left = a.checked_mul(&b).unwrap().checked_mul(&cc).unwrap();
            let right = a.checked_mul(&b.checked_mul(&cc).unwrap()).unwrap();
            prop_assert!(left.max_abs_diff(&right) == 0.0);
        }

        #[test]
        fn star_is_anti_multiplicative(
            (a, b) in arb_alphabet().prop_flat_map(|al| (arb_poly(al, 4), arb_poly(al, 4)))
        ) {
            let lhs = a.checked_mul(&b).unwrap().involution();
            let rhs = b.involution().checked_mul(&a.involution()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn scaling_is_a_homomorphism(
            (a, b) in arb_alphabet().prop_flat_map(|al| (arb_poly(al, 4), arb_poly(al, 4))),
            re in -1.5f64..1.5, im in -1.5f64..1.5, re2 in -1.5f64..1.5,
        ) {
            let lam = c(re, im);
            let lhs = a.checked_mul(&b).unwrap().scale_generators(lam);
            let rhs = a.scale_generators(lam).checked_mul(&b.scale_generators(lam)).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10);
            let mu = real(re2);
            let twice = a.scale_generators(lam).scale_generators(mu);
            prop_assert!(twice.max_abs_diff(&a.scale_generators(lam * mu)) < 1e-10);
        }
    }
}
