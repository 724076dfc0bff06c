//! Generator triplets and a truncated symmetric Fock space over time bins.
//!
//! The one-particle space is `ℂ^{n_bins} ⊗ ℂ^h` with orthonormal bin
//! indicators `e_b = χ_b/√dt`, so mode `b·h + k` is the `k`-th noise channel of
//! bin `b`. Fock vectors are sparse maps from occupation numbers to amplitudes,
//! truncated at a total particle number.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::functional::{CovarianceMatrix, Functional};
use crate::linalg::{self, CMatrix, CVector};
use crate::ncpoly::{Alphabet, Letter, Word};
use crate::scalar::{real, sqrt, Scalar, ONE, ZERO};

/// Triplet `(ρ₀, η₀, ψ₀)` on the self-adjoint alphabet with `d` letters:
/// hermitian `h×h` matrices, vectors in `ℂ^h` and real numbers, one per letter.
#[derive(Clone, Debug, PartialEq)]
pub struct Triplet {
    h: usize,
    rho0: Vec<CMatrix>,
    eta0: Vec<CVector>,
    psi0: Vec<Scalar>,
}

impl Triplet {
    pub fn new(h: usize, rho0: Vec<CMatrix>, eta0: Vec<CVector>, psi0: Vec<Scalar>) -> Result<Self> {
        let d = psi0.len();
        for (what, found) in [("rho0 letters", rho0.len()), ("eta0 letters", eta0.len())] {
            if found != d {
                return Err(Error::DimensionMismatch { what, expected: d, found });
            }
        }
        for r in &rho0 {
            if r.nrows() != h || r.ncols() != h {
                return Err(Error::DimensionMismatch { what: "rho0 matrix", expected: h, found: r.nrows().max(r.ncols()) });
            }
            let defect = linalg::hermitian_defect(r);
            if defect > 1e-12 {
                return Err(Error::NotHermitian { what: "rho0 of a self-adjoint letter", defect });
            }
        }
        for e in &eta0 {
            if e.len() != h {
                return Err(Error::DimensionMismatch { what: "eta0 vector", expected: h, found: e.len() });
            }
        }
        for p in &psi0 {
            if p.im.abs() > 1e-12 {
                return Err(Error::NotHermitian { what: "psi0 of a self-adjoint letter", defect: p.im.abs() });
            }
        }
        Ok(Triplet { h, rho0, eta0, psi0 })
    }

    /// `ρ₀ = 0`, `ψ₀ = 0`, `η₀(x_i) = Q^{1/2} e_i`, whose generator is `g_Q`.
    pub fn gaussian(q: &CovarianceMatrix) -> Result<Self> {
        if !q.is_psd() {
            return Err(Error::InvalidParameter("gaussian triplet needs a positive semi-definite covariance"));
        }
        let d = q.d();
        let root = linalg::psd_sqrt(q.matrix());
        Triplet::new(
            d,
            alloc::vec![linalg::zeros(d, d); d],
            (0..d).map(|i| root.column(i).into_owned()).collect(),
            alloc::vec![ZERO; d],
        )
    }

    /// Gaussian triplet with `Q = 1`: the components of the quantum Wiener process.
    pub fn quantum_wiener(d: usize) -> Self {
        Triplet {
            h: d,
            rho0: alloc::vec![linalg::zeros(d, d); d],
            eta0: (0..d).map(|i| linalg::unit_vector(d, i)).collect(),
            psi0: alloc::vec![ZERO; d],
        }
    }

    pub fn d(&self) -> usize {
        self.psi0.len()
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn alphabet(&self) -> Alphabet {
        Alphabet::self_adjoint(self.d())
    }

    pub fn rho0(&self, i: usize) -> &CMatrix {
        &self.rho0[i]
    }

    pub fn eta0(&self, i: usize) -> &CVector {
        &self.eta0[i]
    }

    pub fn psi0(&self, i: usize) -> Scalar {
        self.psi0[i]
    }

    fn letter(&self, l: Letter) -> Result<usize> {
        match l {
            Letter::X(i) if (i as usize) < self.d() => Ok(i as usize),
            _ => Err(Error::ForeignLetter { letter: l, alphabet: self.alphabet() }),
        }
    }
}

/// The generator of the triplet: `ψ(1) = 0`, `ψ(v) = ψ₀(v)`,
/// `ψ(v₁ v₂) = ⟨η₀(v₁*), η₀(v₂)⟩` and
/// `ψ(v₁ … v_n) = ⟨η₀(v₁*), ρ₀(v₂) … ρ₀(v_{n−1}) η₀(v_n)⟩`.
pub fn triplet_generator(t: &Triplet, word: &Word) -> Result<Scalar> {
    let idx = word.letters().iter().map(|&l| t.letter(l)).collect::<Result<Vec<_>>>()?;
    Ok(match idx.len() {
        0 => ZERO,
        1 => t.psi0[idx[0]],
        n => {
            let mut v = t.eta0[idx[n - 1]].clone();
            for &k in idx[1..n - 1].iter().rev() {
                v = &t.rho0[k] * v;
            }
            t.eta0[idx[0]].dotc(&v)
        }
    })
}

pub fn generator_functional(t: &Triplet, max_degree: usize) -> Functional {
    Functional::from_fn(t.alphabet(), max_degree, |w| triplet_generator(t, w).expect("word over the triplet alphabet"))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BinGrid {
    t_max: f64,
    n_bins: usize,
}

impl BinGrid {
    pub fn new(t_max: f64, n_bins: usize) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::InvalidParameter("t_max must be positive"));
        }
        if n_bins == 0 {
            return Err(Error::InvalidParameter("n_bins must be positive"));
        }
        Ok(BinGrid { t_max, n_bins })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.n_bins as f64
    }

    /// Number of bins covering `[0, t)`; `t` must be a grid point.
    pub fn bins_before(&self, t: f64) -> Result<usize> {
        let x = t / self.dt();
        let k = libm::round(x);
        if !(k >= 0.0 && k <= self.n_bins as f64 && (x - k).abs() <= 1e-9 * (1.0 + k)) {
            return Err(Error::OffGrid { t, dt: self.dt() });
        }
        Ok(k as usize)
    }

    pub fn time_of(&self, bin: usize) -> f64 {
        bin as f64 * self.dt()
    }
}

/// Sparse vector of the one-particle space `ℂ^m`.
#[derive(Clone, Debug, PartialEq)]
pub struct OneParticleVector {
    m: usize,
    entries: Vec<(usize, Scalar)>,
}

impl OneParticleVector {
    pub fn zero(m: usize) -> Self {
        OneParticleVector { m, entries: Vec::new() }
    }

    pub fn from_entries(m: usize, entries: impl IntoIterator<Item = (usize, Scalar)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, z) in entries {
            if i >= m {
                return Err(Error::DimensionMismatch { what: "one-particle mode", expected: m, found: i + 1 });
            }
            *map.entry(i).or_insert(ZERO) += z;
        }
        Ok(OneParticleVector { m, entries: map.into_iter().filter(|(_, z)| *z != ZERO).collect() })
    }

    pub fn from_dense(v: &CVector) -> Self {
        Self::from_entries(v.len(), v.iter().copied().enumerate()).expect("in range")
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn entries(&self) -> &[(usize, Scalar)] {
        &self.entries
    }

    pub fn scale(&self, z: Scalar) -> Self {
        Self::from_entries(self.m, self.entries.iter().map(|&(i, x)| (i, x * z))).expect("in range")
    }

    /// `⟨self, other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &Self) -> Scalar {
        let mut acc = ZERO;
        let (mut a, mut b) = (self.entries.iter().peekable(), other.entries.iter().peekable());
        while let (Some(&&(i, x)), Some(&&(j, y))) = (a.peek(), b.peek()) {
            match i.cmp(&j) {
                core::cmp::Ordering::Less => {
                    a.next();
                }
                core::cmp::Ordering::Greater => {
                    b.next();
                }
                core::cmp::Ordering::Equal => {
                    acc += x.conj() * y;
                    a.next();
                    b.next();
                }
            }
        }
        acc
    }
}

/// Sparse operator on the one-particle space.
#[derive(Clone, Debug, PartialEq)]
pub struct OneParticleOperator {
    m: usize,
    entries: Vec<(usize, usize, Scalar)>,
}

impl OneParticleOperator {
    pub fn zero(m: usize) -> Self {
        OneParticleOperator { m, entries: Vec::new() }
    }

    pub fn from_entries(m: usize, entries: impl IntoIterator<Item = (usize, usize, Scalar)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, j, z) in entries {
            if i >= m || j >= m {
                return Err(Error::DimensionMismatch { what: "one-particle mode", expected: m, found: i.max(j) + 1 });
            }
            *map.entry((i, j)).or_insert(ZERO) += z;
        }
        Ok(OneParticleOperator { m, entries: map.into_iter().filter(|(_, z)| *z != ZERO).map(|((i, j), z)| (i, j, z)).collect() })
    }

    pub fn from_dense(t: &CMatrix) -> Self {
        let m = t.nrows();
        Self::from_entries(m, (0..m).flat_map(|i| (0..m).map(move |j| (i, j, t[(i, j)])))).expect("in range")
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn entries(&self) -> &[(usize, usize, Scalar)] {
        &self.entries
    }

    pub fn adjoint(&self) -> Self {
        Self::from_entries(self.m, self.entries.iter().map(|&(i, j, z)| (j, i, z.conj()))).expect("in range")
    }

    pub fn apply(&self, v: &OneParticleVector) -> OneParticleVector {
        let dense: BTreeMap<usize, Scalar> = v.entries.iter().copied().collect();
        OneParticleVector::from_entries(
            self.m,
            self.entries.iter().filter_map(|&(i, j, z)| dense.get(&j).map(|&x| (i, z * x))),
        )
        .expect("in range")
    }
}

/// `χ_{[s,t)} ⊗ x` in the bin basis: coefficient `√dt·x_k` on mode `b·h + k`
/// for every bin inside `[s, t)`.
pub fn time_indexed_vector(grid: &BinGrid, s: f64, t: f64, x: &CVector) -> Result<OneParticleVector> {
    let (b0, b1) = (grid.bins_before(s)?, grid.bins_before(t)?);
    let h = x.len();
    let w = sqrt(grid.dt());
    OneParticleVector::from_entries(
        grid.n_bins * h,
        (b0..b1.max(b0)).flat_map(|b| x.iter().enumerate().map(move |(k, &z)| (b * h + k, z * w))),
    )
}

/// `χ_{[s,t)} ⊗ T`: acts as `T` on every bin inside `[s, t)` and as zero elsewhere.
pub fn time_indexed_operator(grid: &BinGrid, s: f64, t: f64, op: &CMatrix) -> Result<OneParticleOperator> {
    let (b0, b1) = (grid.bins_before(s)?, grid.bins_before(t)?);
    let h = op.nrows();
    OneParticleOperator::from_entries(
        grid.n_bins * h,
        (b0..b1.max(b0)).flat_map(|b| {
            (0..h).flat_map(move |i| (0..h).map(move |j| (b * h + i, b * h + j, op[(i, j)])))
        }),
    )
}

/// Occupation numbers, stored as `(mode, count)` pairs with positive counts,
/// sorted by mode.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Occupation(Vec<(u32, u32)>);

impl Occupation {
    pub fn vacuum() -> Self {
        Occupation(Vec::new())
    }

    pub fn from_counts(counts: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut map = BTreeMap::new();
        for (mode, n) in counts {
            *map.entry(mode as u32).or_insert(0u32) += n as u32;
        }
        Occupation(map.into_iter().filter(|&(_, n)| n > 0).collect())
    }

    pub fn total(&self) -> usize {
        self.0.iter().map(|&(_, n)| n as usize).sum()
    }

    pub fn count(&self, mode: usize) -> usize {
        match self.0.binary_search_by_key(&(mode as u32), |&(m, _)| m) {
            Ok(k) => self.0[k].1 as usize,
            Err(_) => 0,
        }
    }

    pub fn modes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.0.iter().map(|&(m, n)| (m as usize, n as usize))
    }

    fn raised(&self, mode: usize) -> Self {
        let mut v = self.0.clone();
        match v.binary_search_by_key(&(mode as u32), |&(m, _)| m) {
            Ok(k) => v[k].1 += 1,
            Err(k) => v.insert(k, (mode as u32, 1)),
        }
        Occupation(v)
    }

    fn lowered(&self, mode: usize) -> Option<Self> {
        let k = self.0.binary_search_by_key(&(mode as u32), |&(m, _)| m).ok()?;
        let mut v = self.0.clone();
        if v[k].1 == 1 {
            v.remove(k);
        } else {
            v[k].1 -= 1;
        }
        Some(Occupation(v))
    }
}

/// Vector of the symmetric Fock space over `ℂ^m`, truncated at `cutoff` particles.
#[derive(Clone, Debug, PartialEq)]
pub struct FockVector {
    m: usize,
    cutoff: usize,
    amplitudes: BTreeMap<Occupation, Scalar>,
    saturated: bool,
}

impl FockVector {
    pub fn zero(m: usize, cutoff: usize) -> Self {
        FockVector { m, cutoff, amplitudes: BTreeMap::new(), saturated: false }
    }

    pub fn vacuum(m: usize, cutoff: usize) -> Self {
        let mut v = Self::zero(m, cutoff);
        v.amplitudes.insert(Occupation::vacuum(), ONE);
        v
    }

    pub fn basis(m: usize, cutoff: usize, occupation: Occupation) -> Result<Self> {
        if occupation.total() > cutoff {
            return Err(Error::CutoffTooSmall { cutoff, needed: occupation.total() });
        }
        if let Some((mode, _)) = occupation.modes().last() {
            if mode >= m {
                return Err(Error::DimensionMismatch { what: "one-particle mode", expected: m, found: mode + 1 });
            }
        }
        let mut v = Self::zero(m, cutoff);
        v.amplitudes.insert(occupation, ONE);
        Ok(v)
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Whether some creation pushed amplitude above the cutoff, where it was dropped.
    pub fn saturated(&self) -> bool {
        self.saturated
    }

    pub fn amplitudes(&self) -> impl Iterator<Item = (&Occupation, &Scalar)> {
        self.amplitudes.iter()
    }

    pub fn amplitude(&self, occupation: &Occupation) -> Scalar {
        self.amplitudes.get(occupation).copied().unwrap_or(ZERO)
    }

    /// Highest particle number present.
    pub fn max_particles(&self) -> usize {
        self.amplitudes.keys().map(Occupation::total).max().unwrap_or(0)
    }

    pub fn inner(&self, other: &Self) -> Scalar {
        self.amplitudes
            .iter()
            .filter_map(|(k, a)| other.amplitudes.get(k).map(|b| a.conj() * b))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        sqrt(self.amplitudes.values().map(|z| z.norm_sqr()).sum())
    }

    fn empty_like(&self) -> Self {
        FockVector { m: self.m, cutoff: self.cutoff, amplitudes: BTreeMap::new(), saturated: self.saturated }
    }

    fn add_amplitude(&mut self, occupation: Occupation, z: Scalar) {
        *self.amplitudes.entry(occupation).or_insert(ZERO) += z;
    }

    fn pruned(mut self) -> Self {
        self.amplitudes.retain(|_, z| z.norm() > 0.0);
        self
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check_space(other.m, other.cutoff)?;
        let mut out = self.clone();
        out.saturated |= other.saturated;
        for (k, &z) in &other.amplitudes {
            out.add_amplitude(k.clone(), z);
        }
        Ok(out.pruned())
    }

    pub fn scale(&self, z: Scalar) -> Self {
        let mut out = self.clone();
        out.amplitudes.values_mut().for_each(|a| *a *= z);
        out.pruned()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let keys: alloc::collections::BTreeSet<&Occupation> = self.amplitudes.keys().chain(other.amplitudes.keys()).collect();
        keys.into_iter().map(|k| (self.amplitude(k) - other.amplitude(k)).norm()).fold(0.0, f64::max)
    }

    fn check_space(&self, m: usize, cutoff: usize) -> Result<()> {
        if self.m != m {
            return Err(Error::DimensionMismatch { what: "one-particle dimension", expected: self.m, found: m });
        }
        if self.cutoff != cutoff {
            return Err(Error::DimensionMismatch { what: "particle cutoff", expected: self.cutoff, found: cutoff });
        }
        Ok(())
    }
}

/// `A*(ξ)`: raises `n_i` with factor `ξ_i √(n_i+1)`. Components that would
/// exceed the cutoff are dropped and the result is flagged as saturated.
pub fn create(xi: &OneParticleVector, v: &FockVector) -> Result<FockVector> {
    check_dim(xi.m, v.m)?;
    let mut out = v.empty_like();
    for (occ, &a) in &v.amplitudes {
        if xi.entries.is_empty() {
            break;
        }
        if occ.total() >= v.cutoff {
            out.saturated = true;
            continue;
        }
        for &(i, z) in &xi.entries {
            let n = occ.count(i) as f64;
            out.add_amplitude(occ.raised(i), a * z * sqrt(n + 1.0));
        }
    }
    Ok(out.pruned())
}

/// `A(ξ)`: lowers `n_i` with factor `conj(ξ_i) √n_i`; antilinear in `ξ`, the
/// adjoint of [`create`].
pub fn annihilate(xi: &OneParticleVector, v: &FockVector) -> Result<FockVector> {
    check_dim(xi.m, v.m)?;
    let mut out = v.empty_like();
    for (occ, &a) in &v.amplitudes {
        for &(i, z) in &xi.entries {
            if let Some(lower) = occ.lowered(i) {
                let n = occ.count(i) as f64;
                out.add_amplitude(lower, a * z.conj() * sqrt(n));
            }
        }
    }
    Ok(out.pruned())
}

/// `Λ(T) = Σ_ij T_ij A*(e_i) A(e_j)`, which preserves the particle number.
pub fn preserve(t: &OneParticleOperator, v: &FockVector) -> Result<FockVector> {
    check_dim(t.m, v.m)?;
    let mut out = v.empty_like();
    for (occ, &a) in &v.amplitudes {
        for &(i, j, z) in &t.entries {
            if let Some(lower) = occ.lowered(j) {
                let nj = occ.count(j) as f64;
                let ni = lower.count(i) as f64;
                out.add_amplitude(lower.raised(i), a * z * sqrt(nj) * sqrt(ni + 1.0));
            }
        }
    }
    Ok(out.pruned())
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { what: "one-particle dimension", expected, found });
    }
    Ok(())
}

/// `A(annihilation) + Λ(preservation) + A*(creation) + scalar·1`.
#[derive(Clone, Debug, PartialEq)]
pub struct FockOperator {
    pub annihilation: OneParticleVector,
    pub preservation: OneParticleOperator,
    pub creation: OneParticleVector,
    pub scalar: Scalar,
}

impl FockOperator {
    pub fn zero(m: usize) -> Self {
        FockOperator {
            annihilation: OneParticleVector::zero(m),
            preservation: OneParticleOperator::zero(m),
            creation: OneParticleVector::zero(m),
            scalar: ZERO,
        }
    }

    pub fn dim(&self) -> usize {
        self.creation.m
    }

    pub fn apply(&self, v: &FockVector) -> Result<FockVector> {
        let mut out = annihilate(&self.annihilation, v)?;
        out = out.checked_add(&preserve(&self.preservation, v)?)?;
        out = out.checked_add(&create(&self.creation, v)?)?;
        out.checked_add(&v.scale(self.scalar))
    }

    /// Formal adjoint; exact on vectors below the cutoff.
    pub fn adjoint(&self) -> Self {
        FockOperator {
            annihilation: self.creation.clone(),
            preservation: self.preservation.adjoint(),
            creation: self.annihilation.clone(),
            scalar: self.scalar.conj(),
        }
    }
}

/// `F_{s,t}(v) = A(χ⊗η₀(v*)) + Λ(χ⊗ρ₀(v)) + A*(χ⊗η₀(v)) + ψ₀(v)(t−s)` with
/// `χ = χ_{[s,t)}`; `F_t = F_{0,t}`.
pub fn additive_increment(triplet: &Triplet, grid: &BinGrid, s: f64, t: f64, letter: Letter) -> Result<FockOperator> {
    let i = triplet.letter(letter)?;
    let (b0, b1) = (grid.bins_before(s)?, grid.bins_before(t)?);
    let eta = time_indexed_vector(grid, s, t, &triplet.eta0[i])?;
    Ok(FockOperator {
        annihilation: eta.clone(),
        preservation: time_indexed_operator(grid, s, t, &triplet.rho0[i])?,
        creation: eta,
        scalar: triplet.psi0[i] * real(b1.saturating_sub(b0) as f64 * grid.dt()),
    })
}

pub fn additive_operator(triplet: &Triplet, grid: &BinGrid, t: f64, letter: Letter) -> Result<FockOperator> {
    additive_increment(triplet, grid, 0.0, t, letter)
}

/// `⟨Ω, F_1 ⋯ F_n Ω⟩`. The cutoff must be at least `n`; then no truncation
/// can occur and the value is exact.
pub fn vacuum_moment(ops: &[FockOperator], cutoff: usize) -> Result<Scalar> {
    if cutoff < ops.len() {
        return Err(Error::CutoffTooSmall { cutoff, needed: ops.len() });
    }
    let m = ops.first().map(FockOperator::dim).unwrap_or(0);
    let vacuum = FockVector::vacuum(m, cutoff);
    let mut v = vacuum.clone();
    for op in ops.iter().rev() {
        v = op.apply(&v)?;
    }
    Ok(vacuum.inner(&v))
}

/// Vacuum moment of `F_t(v_1) ⋯ F_t(v_n)` for the letters of `word`.
pub fn word_vacuum_moment(triplet: &Triplet, grid: &BinGrid, t: f64, word: &Word, cutoff: usize) -> Result<Scalar> {
    let ops = word
        .letters()
        .iter()
        .map(|&l| additive_operator(triplet, grid, t, l))
        .collect::<Result<Vec<_>>>()?;
    if ops.is_empty() {
        return Ok(ONE);
    }
    vacuum_moment(&ops, cutoff)
}
