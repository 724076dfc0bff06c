//! Sparse elements of `B ⊗ B` and `B ⊗ B ⊗ B` over the word basis.

use alloc::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::ncpoly::{Alphabet, NCPolynomial, Word};
use crate::scalar::{is_finite, Scalar, PRUNE_EPS, ZERO};

/// Basis key of a tensor power: a tuple of words, one per leg.
pub trait Legs: Clone + Ord {
    fn check(&self, alphabet: Alphabet) -> Result<()>;
    /// Leg-wise involution `(a ⊗ b)* = a* ⊗ b*`.
    fn involution(&self) -> Self;
    /// Leg-wise concatenation, the product of the tensor-product algebra.
    fn concat(&self, other: &Self) -> Self;
}

impl Legs for (Word, Word) {
    fn check(&self, alphabet: Alphabet) -> Result<()> {
        alphabet.check_word(&self.0)?;
        alphabet.check_word(&self.1)
    }
    fn involution(&self) -> Self {
        (self.0.involution(), self.1.involution())
    }
    fn concat(&self, other: &Self) -> Self {
        (self.0.concat(&other.0), self.1.concat(&other.1))
    }
}

impl Legs for (Word, Word, Word) {
    fn check(&self, alphabet: Alphabet) -> Result<()> {
        alphabet.check_word(&self.0)?;
        alphabet.check_word(&self.1)?;
        alphabet.check_word(&self.2)
    }
    fn involution(&self) -> Self {
        (self.0.involution(), self.1.involution(), self.2.involution())
    }
    fn concat(&self, other: &Self) -> Self {
        (self.0.concat(&other.0), self.1.concat(&other.1), self.2.concat(&other.2))
    }
}

/// Sparse tensor in canonical form (no coefficient below [`PRUNE_EPS`]).
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<K: Legs> {
    alphabet: Alphabet,
    terms: BTreeMap<K, Scalar>,
}

pub type TensorElement = Tensor<(Word, Word)>;
pub type TripleTensorElement = Tensor<(Word, Word, Word)>;

impl<K: Legs> Tensor<K> {
    pub fn zero(alphabet: Alphabet) -> Self {
        Tensor { alphabet, terms: BTreeMap::new() }
    }

    pub fn from_terms<I: IntoIterator<Item = (K, Scalar)>>(alphabet: Alphabet, terms: I) -> Result<Self> {
        let mut t = Self::zero(alphabet);
        for (key, coeff) in terms {
            key.check(alphabet)?;
            if !is_finite(coeff) {
                return Err(Error::NonFinite);
            }
            t.accumulate(key, coeff);
        }
        t.prune();
        Ok(t)
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn terms(&self) -> impl Iterator<Item = (&K, &Scalar)> {
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

    pub fn coeff(&self, key: &K) -> Scalar {
        self.terms.get(key).copied().unwrap_or(ZERO)
    }

    pub(crate) fn accumulate(&mut self, key: K, coeff: Scalar) {
        *self.terms.entry(key).or_insert(ZERO) += coeff;
    }

    pub(crate) fn prune(&mut self) {
        self.terms.retain(|_, c| c.norm() >= PRUNE_EPS);
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.alphabet.check_same(other.alphabet)?;
        let mut out = self.clone();
        for (k, &c) in &other.terms {
            out.accumulate(k.clone(), c);
        }
        out.prune();
        Ok(out)
    }

    pub fn scale(&self, factor: Scalar) -> Self {
        let mut out = Tensor {
            alphabet: self.alphabet,
            terms: self.terms.iter().map(|(k, &c)| (k.clone(), c * factor)).collect(),
        };
        out.prune();
        out
    }

    pub fn involution(&self) -> Self {
        Tensor {
            alphabet: self.alphabet,
            terms: self.terms.iter().map(|(k, c)| (k.involution(), c.conj())).collect(),
        }
    }

    /// Product in the tensor-product algebra: `(a ⊗ b)(c ⊗ d) = ac ⊗ bd`.
    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        self.alphabet.check_same(other.alphabet)?;
        let mut out = Self::zero(self.alphabet);
        for (k, &a) in &self.terms {
            for (l, &b) in &other.terms {
                out.accumulate(k.concat(l), a * b);
            }
        }
        out.prune();
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, &c) in &self.terms {
            worst = worst.max((c - other.coeff(k)).norm());
        }
        for (k, &c) in &other.terms {
            if !self.terms.contains_key(k) {
                worst = worst.max(c.norm());
            }
        }
        worst
    }
}

impl TensorElement {
    /// `p ⊗ q` for polynomials over the same alphabet.
    pub fn pure(p: &NCPolynomial, q: &NCPolynomial) -> Result<Self> {
        p.alphabet().check_same(q.alphabet())?;
        let mut out = Self::zero(p.alphabet());
        for (u, &a) in p.terms() {
            for (v, &b) in q.terms() {
                out.accumulate((u.clone(), v.clone()), a * b);
            }
        }
        out.prune();
        Ok(out)
    }

    /// The multiplication map `M(a ⊗ b) = ab`.
    pub fn multiply_legs(&self) -> NCPolynomial {
        let mut out = NCPolynomial::zero(self.alphabet);
        for ((u, v), &c) in &self.terms {
            out.accumulate(u.concat(v), c);
        }
        out.prune();
        out
    }

    /// `(f ⊗ g)` applied leg-wise with linear maps given on basis words.
    pub fn map_legs<F, G>(&self, mut f: F, mut g: G) -> Result<Self>
    where
        F: FnMut(&Word) -> Result<NCPolynomial>,
        G: FnMut(&Word) -> Result<NCPolynomial>,
    {
        let mut out = Self::zero(self.alphabet);
        for ((u, v), &c) in &self.terms {
            let fu = f(u)?;
            let gv = g(v)?;
            for (a, &x) in fu.terms() {
                for (b, &y) in gv.terms() {
                    out.accumulate((a.clone(), b.clone()), c * x * y);
                }
            }
        }
        out.prune();
        Ok(out)
    }
}
