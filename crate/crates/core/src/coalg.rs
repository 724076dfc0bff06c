//! Bialgebra structure of the two alphabets.
//!
//! * Self-adjoint letters are primitive: `Δx = x ⊗ 1 + 1 ⊗ x`, extended
//!   multiplicatively, so `Δ(x_{i1} … x_{im})` is the sum over all `2^m`
//!   ordered splittings of the word into a sub-word and its complement.
//! * Matrix-unitary letters are matrix-like: `Δx_ij = Σ_n x_in ⊗ x_nj` and
//!   `Δx_ij* = Σ_n x_in* ⊗ x_nj*`. A degree-`m` word has `d^m` Sweedler terms,
//!   all enumerated eagerly.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::ncpoly::{Alphabet, Letter, NCPolynomial, Word};
use crate::scalar::{Scalar, ONE, ZERO};
use crate::tensor::{TensorElement, TripleTensorElement};

/// Relative singular-value threshold below which components count as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Enumerates the Sweedler terms of `Δ(w)` for the word with letter indices
/// `letters`, calling `f(left_degree, left_index, right_degree, right_index)`
/// with word indices as defined by [`Alphabet::word_index`]. Every term has
/// coefficient one; repeated terms are reported repeatedly.
pub(crate) fn for_each_split<F>(alphabet: Alphabet, letters: &[usize], mut f: F)
where
    F: FnMut(usize, usize, usize, usize),
{
    let n = letters.len();
    let base = alphabet.letter_count();
    match alphabet {
        Alphabet::SelfAdjoint { .. } => {
            for mask in 0u64..(1u64 << n) {
                let (mut li, mut ld, mut ri, mut rd) = (0usize, 0usize, 0usize, 0usize);
                for (k, &l) in letters.iter().enumerate() {
                    if mask >> (n - 1 - k) & 1 == 1 {
                        li = li * base + l;
                        ld += 1;
                    } else {
                        ri = ri * base + l;
                        rd += 1;
                    }
                }
                f(ld, li, rd, ri);
            }
        }
        Alphabet::MatrixUnitary { d } => {
            if d == 0 {
                return;
            }
            let mut middle = alloc::vec![0usize; n];
            loop {
                let (mut li, mut ri) = (0usize, 0usize);
                for (k, &l) in letters.iter().enumerate() {
                    let (pair, star) = (l / 2, l % 2);
                    let (row, col) = (pair / d, pair % d);
                    li = li * base + 2 * (row * d + middle[k]) + star;
                    ri = ri * base + 2 * (middle[k] * d + col) + star;
                }
                f(n, li, n, ri);
                // odometer over [d]^n
                let mut k = n;
                loop {
                    if k == 0 {
                        return;
                    }
                    k -= 1;
                    middle[k] += 1;
                    if middle[k] < d {
                        break;
                    }
                    middle[k] = 0;
                }
            }
        }
    }
}

pub(crate) fn letter_indices(alphabet: Alphabet, word: &Word) -> Result<Vec<usize>> {
    word.letters()
        .iter()
        .map(|&l| alphabet.letter_index(l).ok_or(Error::ForeignLetter { letter: l, alphabet }))
        .collect()
}

/// `Δ(w)` for a single word.
pub fn coproduct_word(alphabet: Alphabet, word: &Word) -> Result<TensorElement> {
    let letters = letter_indices(alphabet, word)?;
    let mut out = TensorElement::zero(alphabet);
    for_each_split(alphabet, &letters, |ld, li, rd, ri| {
        out.accumulate((alphabet.word_at(ld, li), alphabet.word_at(rd, ri)), ONE);
    });
    out.prune();
    Ok(out)
}

/// Linear extension of [`coproduct_word`].
pub fn coproduct(p: &NCPolynomial) -> Result<TensorElement> {
    let alphabet = p.alphabet();
    let mut out = TensorElement::zero(alphabet);
    for (w, &c) in p.terms() {
        for (key, &x) in coproduct_word(alphabet, w)?.terms() {
            out.accumulate(key.clone(), c * x);
        }
    }
    out.prune();
    Ok(out)
}

pub fn counit_letter(letter: Letter) -> Scalar {
    match letter {
        Letter::X(_) => ZERO,
        Letter::U { row, col, .. } => {
            if row == col {
                ONE
            } else {
                ZERO
            }
        }
    }
}

/// Multiplicative extension of `δ(x_i) = 0`, `δ(x_ij) = δ(x_ij*) = δ_ij`.
pub fn counit_word(word: &Word) -> Scalar {
    word.letters().iter().fold(ONE, |acc, &l| acc * counit_letter(l))
}

pub fn counit(p: &NCPolynomial) -> Scalar {
    p.terms().map(|(w, &c)| c * counit_word(w)).sum()
}

/// Anti-multiplicative extension of `x_i ↦ −x_i`. Only the self-adjoint
/// alphabet carries an antipode; the unitary coefficient algebra does not.
pub fn antipode(p: &NCPolynomial) -> Result<NCPolynomial> {
    let alphabet = p.alphabet();
    if !alphabet.is_self_adjoint() {
        return Err(Error::Unsupported {
            operation: "antipode",
            alphabet,
            reason: "the non-commutative unitary coefficient algebra admits no antipode",
        });
    }
    NCPolynomial::from_terms(
        alphabet,
        p.terms().map(|(w, &c)| {
            let sign = if w.degree() % 2 == 0 { 1.0 } else { -1.0 };
            (w.letters().iter().rev().copied().collect(), c * sign)
        }),
    )
}

/// `(Δ ⊗ id)(t)`.
pub fn coproduct_left(t: &TensorElement) -> Result<TripleTensorElement> {
    let alphabet = t.alphabet();
    let mut out = TripleTensorElement::zero(alphabet);
    for ((u, v), &c) in t.terms() {
        for ((a, b), &x) in coproduct_word(alphabet, u)?.terms() {
            out.accumulate((a.clone(), b.clone(), v.clone()), c * x);
        }
    }
    out.prune();
    Ok(out)
}

/// `(id ⊗ Δ)(t)`.
pub fn coproduct_right(t: &TensorElement) -> Result<TripleTensorElement> {
    let alphabet = t.alphabet();
    let mut out = TripleTensorElement::zero(alphabet);
    for ((u, v), &c) in t.terms() {
        for ((a, b), &x) in coproduct_word(alphabet, v)?.terms() {
            out.accumulate((u.clone(), a.clone(), b.clone()), c * x);
        }
    }
    out.prune();
    Ok(out)
}

/// Both sides of the coassociativity law for `w`: `((Δ⊗id)Δw, (id⊗Δ)Δw)`.
pub fn coassociativity_check(alphabet: Alphabet, word: &Word) -> Result<(TripleTensorElement, TripleTensorElement)> {
    let delta = coproduct_word(alphabet, word)?;
    Ok((coproduct_left(&delta)?, coproduct_right(&delta)?))
}

/// `(δ ⊗ id)(t)`.
pub fn counit_left(t: &TensorElement) -> NCPolynomial {
    let mut out = NCPolynomial::zero(t.alphabet());
    for ((u, v), &c) in t.terms() {
        out.accumulate(v.clone(), c * counit_word(u));
    }
    out.prune();
    out
}

/// `(id ⊗ δ)(t)`.
pub fn counit_right(t: &TensorElement) -> NCPolynomial {
    let mut out = NCPolynomial::zero(t.alphabet());
    for ((u, v), &c) in t.terms() {
        out.accumulate(u.clone(), c * counit_word(v));
    }
    out.prune();
    out
}

/// Ordered word basis shared by a family of polynomials, used to move
/// between polynomials and coordinate vectors.
#[derive(Clone, Debug)]
pub struct WordCoords {
    alphabet: Alphabet,
    words: Vec<Word>,
    index: BTreeMap<Word, usize>,
}

impl WordCoords {
    pub fn new<'a, I: IntoIterator<Item = &'a Word>>(alphabet: Alphabet, words: I) -> Self {
        let set: BTreeSet<Word> = words.into_iter().cloned().collect();
        let words: Vec<Word> = set.into_iter().collect();
        let index = words.iter().cloned().enumerate().map(|(k, w)| (w, k)).collect();
        WordCoords { alphabet, words, index }
    }

    pub fn spanning(polys: &[NCPolynomial]) -> Result<Self> {
        let alphabet = polys.first().map(|p| p.alphabet()).ok_or(Error::ZeroElement)?;
        for p in polys {
            alphabet.check_same(p.alphabet())?;
        }
        Ok(Self::new(alphabet, polys.iter().flat_map(|p| p.terms().map(|(w, _)| w))))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn position(&self, word: &Word) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Columns are the coordinate vectors of `polys`; words outside the basis are ignored.
    pub fn matrix(&self, polys: &[NCPolynomial]) -> CMatrix {
        let mut m = linalg::zeros(self.len(), polys.len());
        for (j, p) in polys.iter().enumerate() {
            for (w, &c) in p.terms() {
                if let Some(i) = self.position(w) {
                    m[(i, j)] = c;
                }
            }
        }
        m
    }

    pub fn polynomial(&self, column: impl Iterator<Item = Scalar>) -> NCPolynomial {
        let mut p = NCPolynomial::zero(self.alphabet);
        for (w, c) in self.words.iter().zip(column) {
            p.accumulate(w.clone(), c);
        }
        p.prune();
        p
    }

    fn columns_to_polys(&self, m: &CMatrix) -> Vec<NCPolynomial> {
        (0..m.ncols()).map(|j| self.polynomial(m.column(j).iter().copied())).collect()
    }
}

/// A representation `T = Σ_ij middle[i][j] · left_i ⊗ right_j` with linearly
/// independent leg families; its size equals the rank of `T`.
#[derive(Clone, Debug)]
pub struct MinimalRepresentation {
    pub left: Vec<NCPolynomial>,
    pub middle: CMatrix,
    pub right: Vec<NCPolynomial>,
}

impl MinimalRepresentation {
    pub fn rank(&self) -> usize {
        self.left.len()
    }

    pub fn reconstruct(&self) -> Result<TensorElement> {
        let alphabet = self.left.first().map(|p| p.alphabet()).ok_or(Error::ZeroElement)?;
        let mut out = TensorElement::zero(alphabet);
        for (i, u) in self.left.iter().enumerate() {
            for (j, w) in self.right.iter().enumerate() {
                let c = self.middle[(i, j)];
                if c != ZERO {
                    out = out.checked_add(&TensorElement::pure(u, w)?.scale(c))?;
                }
            }
        }
        Ok(out)
    }
}

/// Rank factorization of the coefficient matrix of `t` over the word basis.
/// The legs come out orthonormal in word coordinates and the middle is the
/// diagonal of singular values.
pub fn minimal_tensor_representation(t: &TensorElement) -> Result<MinimalRepresentation> {
    if t.is_zero() {
        return Err(Error::ZeroElement);
    }
    let alphabet = t.alphabet();
    let left = WordCoords::new(alphabet, t.terms().map(|((u, _), _)| u));
    let right = WordCoords::new(alphabet, t.terms().map(|((_, v), _)| v));
    let mut coeffs = linalg::zeros(left.len(), right.len());
    for ((u, v), &c) in t.terms() {
        coeffs[(left.position(u).unwrap(), right.position(v).unwrap())] = c;
    }
    let (u, sigma, vt) = linalg::truncated_svd(&coeffs, RANK_TOL);
    let r = sigma.len();
    Ok(MinimalRepresentation {
        left: left.columns_to_polys(&u),
        middle: CMatrix::from_fn(r, r, |i, j| if i == j { Scalar::new(sigma[i], 0.0) } else { ZERO }),
        right: (0..r).map(|i| right.polynomial(vt.row(i).iter().copied())).collect(),
    })
}

/// Finite-dimensional subcoalgebra generated by `c`.
///
/// `(Δ ⊗ id)Δc` is factored as `Σ_ij u_i ⊗ v_ij ⊗ w_j` with the families
/// `(u_i)` and `(w_j)` linearly independent; the span of the middle vectors
/// `v_ij` is a subcoalgebra containing `c`. The result is returned as a
/// canonical orthonormal basis (see [`canonical_basis`]).
pub fn generated_subcoalgebra(c: &NCPolynomial) -> Result<Vec<NCPolynomial>> {
    if c.is_zero() {
        return Err(Error::ZeroElement);
    }
    let alphabet = c.alphabet();
    let triple = coproduct_left(&coproduct(c)?)?;

    let lefts = WordCoords::new(alphabet, triple.terms().map(|((a, _, _), _)| a));
    let mids = WordCoords::new(alphabet, triple.terms().map(|((_, b, _), _)| b));
    let rights = WordCoords::new(alphabet, triple.terms().map(|((_, _, e), _)| e));
    let (nl, nm, nr) = (lefts.len(), mids.len(), rights.len());

    // Stage 1: split off a linearly independent left leg, T = Σ_i u_i ⊗ X_i.
    let mut unfold_left = linalg::zeros(nl, nm * nr);
    for ((a, b, e), &x) in triple.terms() {
        let (ia, ib, ie) = (lefts.position(a).unwrap(), mids.position(b).unwrap(), rights.position(e).unwrap());
        unfold_left[(ia, ib * nr + ie)] = x;
    }
    let (_, sigma1, vt1) = linalg::truncated_svd(&unfold_left, RANK_TOL);
    let r1 = sigma1.len();

    // Stage 2: stack the X_i and split off a linearly independent right leg,
    // X_i = Σ_j v_ij ⊗ w_j.
    let mut stacked = linalg::zeros(r1 * nm, nr);
    for i in 0..r1 {
        for ib in 0..nm {
            for ie in 0..nr {
                stacked[(i * nm + ib, ie)] = vt1[(i, ib * nr + ie)] * sigma1[i];
            }
        }
    }
    let (u2, sigma2, _) = linalg::truncated_svd(&stacked, RANK_TOL);
    let r2 = sigma2.len();

    let mut middles = linalg::zeros(nm, r1 * r2);
    for i in 0..r1 {
        for j in 0..r2 {
            for ib in 0..nm {
                middles[(ib, i * r2 + j)] = u2[(i * nm + ib, j)] * sigma2[j];
            }
        }
    }
    let span = linalg::column_space(&middles, RANK_TOL);
    Ok(canonical_basis(&mids, &span))
}

/// Sum of the subcoalgebras generated by each element of `elements`.
pub fn generated_subcoalgebra_of_set(elements: &[NCPolynomial]) -> Result<Vec<NCPolynomial>> {
    let mut all = Vec::new();
    for c in elements.iter().filter(|c| !c.is_zero()) {
        all.extend(generated_subcoalgebra(c)?);
    }
    if all.is_empty() {
        return Err(Error::ZeroElement);
    }
    orthonormal_span(&all)
}

/// Canonical orthonormal basis of the span of `polys`.
pub fn orthonormal_span(polys: &[NCPolynomial]) -> Result<Vec<NCPolynomial>> {
    let coords = WordCoords::spanning(polys)?;
    let span = linalg::column_space(&coords.matrix(polys), RANK_TOL);
    Ok(canonical_basis(&coords, &span))
}

/// Canonical basis of the column span of `span`: reduced row echelon form
/// (pivots in word order), then Gram–Schmidt in pivot order. Two inputs with
/// the same span give the same output up to round-off.
fn canonical_basis(coords: &WordCoords, span: &CMatrix) -> Vec<NCPolynomial> {
    let r = span.ncols();
    let n = span.nrows();
    // rows of `rows` are the spanning vectors
    let mut rows = span.transpose();
    let mut pivot_row = 0;
    for col in 0..n {
        if pivot_row == r {
            break;
        }
        let (best, best_abs) = (pivot_row..r)
            .map(|i| (i, rows[(i, col)].norm()))
            .fold((pivot_row, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best_abs <= 1e-9 {
            continue;
        }
        rows.swap_rows(pivot_row, best);
        let p = rows[(pivot_row, col)];
        for j in 0..n {
            rows[(pivot_row, j)] /= p;
        }
        for i in 0..r {
            if i != pivot_row {
                let f = rows[(i, col)];
                if f != ZERO {
                    for j in 0..n {
                        let v = rows[(pivot_row, j)];
                        rows[(i, j)] -= f * v;
                    }
                }
            }
        }
        pivot_row += 1;
    }
    let mut basis: Vec<Vec<Scalar>> = Vec::with_capacity(pivot_row);
    for i in 0..pivot_row {
        let mut v: Vec<Scalar> = rows.row(i).iter().copied().collect();
        for b in &basis {
            let proj: Scalar = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
            for (vk, bk) in v.iter_mut().zip(b) {
                *vk -= proj * bk;
            }
        }
        let norm = crate::scalar::sqrt(v.iter().map(|z| z.norm_sqr()).sum());
        v.iter_mut().for_each(|z| *z /= norm);
        basis.push(v);
    }
    basis.into_iter().map(|v| coords.polynomial(v.into_iter())).collect()
}

/// Orthonormal column basis (in the coordinates of `coords`) of the span of `basis`.
fn projector_basis(coords: &WordCoords, basis: &[NCPolynomial]) -> CMatrix {
    linalg::column_space(&coords.matrix(basis), RANK_TOL)
}

/// Distance of `p` from the span of `basis`, in the word-coefficient norm.
pub fn span_residual(basis: &[NCPolynomial], p: &NCPolynomial) -> Result<f64> {
    let mut all = basis.to_vec();
    all.push(p.clone());
    let coords = WordCoords::spanning(&all)?;
    let q = projector_basis(&coords, basis);
    let v = coords.matrix(core::slice::from_ref(p));
    let residual = &v - &q * (q.adjoint() * &v);
    Ok(residual.norm())
}

/// `max_b ‖Δb − (P ⊗ P)Δb‖` over the basis, where `P` projects onto the span
/// of `basis`; zero exactly when the span is a subcoalgebra.
pub fn subcoalgebra_defect(basis: &[NCPolynomial]) -> Result<f64> {
    let deltas = basis.iter().map(coproduct).collect::<Result<Vec<_>>>()?;
    let alphabet = basis.first().map(|p| p.alphabet()).ok_or(Error::ZeroElement)?;
    let words: Vec<Word> = basis
        .iter()
        .flat_map(|p| p.terms().map(|(w, _)| w.clone()))
        .chain(deltas.iter().flat_map(|t| t.terms().flat_map(|((u, v), _)| [u.clone(), v.clone()])))
        .collect();
    let coords = WordCoords::new(alphabet, words.iter());
    let q = projector_basis(&coords, basis);
    let proj = &q * q.adjoint();
    let mut worst: f64 = 0.0;
    for t in &deltas {
        let mut m = linalg::zeros(coords.len(), coords.len());
        for ((u, v), &c) in t.terms() {
            m[(coords.position(u).unwrap(), coords.position(v).unwrap())] = c;
        }
        let projected = &proj * &m * proj.transpose();
        worst = worst.max(linalg::max_abs_diff(&m, &projected));
    }
    Ok(worst)
}

/// Intersection of the spans of two families of polynomials.
pub fn intersect_subspaces(a: &[NCPolynomial], b: &[NCPolynomial]) -> Result<Vec<NCPolynomial>> {
    let mut all = a.to_vec();
    all.extend_from_slice(b);
    let coords = WordCoords::spanning(&all)?;
    let n = coords.len();
    let qa = projector_basis(&coords, a);
    let qb = projector_basis(&coords, b);
    let id = linalg::identity(n);
    let ca = &id - &qa * qa.adjoint();
    let cb = &id - &qb * qb.adjoint();
    let mut stacked = linalg::zeros(2 * n, n);
    stacked.view_mut((0, 0), (n, n)).copy_from(&ca);
    stacked.view_mut((n, 0), (n, n)).copy_from(&cb);
    let null = linalg::null_space(&stacked, 1e-9);
    if null.ncols() == 0 {
        return Ok(Vec::new());
    }
    Ok(canonical_basis(&coords, &null))
}
