//! Time-discretized unitary solutions of `dU = U dI` on `ℂ^d ⊗ Γ`.
//!
//! The noise increment of bin `b` is
//! `(ΔI)_ij = A*_b(L_ij) + Λ_b((W − 1)_ij) − A_b((W*L)_ji) + G_ij dt`,
//! and the solution after `n` bins is the ordered product `U = F_1 ⋯ F_n` of
//! bin factors, each acting on the system and on one bin only.
//!
//! Every bin carries the same local noise space, the symmetric Fock space of
//! `ℂ^h` truncated at `cap` particles per bin (default 1). With one particle
//! per bin the discrete Itô table is exact to first order; with more, the
//! two-photon terms `a†²` make the Euler defect scale like `√dt`.
//!
//! Nothing global is ever materialized. The vacuum transition is the product
//! of the bins' vacuum blocks, and defects are evaluated on product probe
//! states by exact affine recursions over the bins.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fock::{time_indexed_operator, time_indexed_vector, BinGrid, FockOperator};
use crate::linalg::{self, CMatrix, CVector};
use crate::scalar::{real, sqrt, Scalar, I, ONE, ZERO};

/// Default particle cap per bin.
pub const DEFAULT_BIN_CAP: usize = 1;

/// How the drift is built from `D` and `L`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Drift {
    /// `G = iD − ½L*L`; with this choice the solution is asymptotically unitary.
    #[default]
    Consistent,
    /// `G = D − ½L*L`, taking the hermitian `D` at face value.
    Literal,
}

/// Coefficients `(L, W, D)`: `L_ij ∈ ℂ^h`, `W` a unitary on `ℂ^d ⊗ ℂ^h`
/// seen as `d×d` blocks of `h×h` matrices, and `D` hermitian.
#[derive(Clone, Debug, PartialEq)]
pub struct QsdeModel {
    d: usize,
    h: usize,
    l: Vec<Vec<CVector>>,
    w: CMatrix,
    dmat: CMatrix,
}

impl QsdeModel {
    pub fn new(d: usize, h: usize, l: Vec<Vec<CVector>>, w: CMatrix, dmat: CMatrix) -> Result<Self> {
        if d == 0 || h == 0 {
            return Err(Error::InvalidParameter("d and h must be positive"));
        }
        if l.len() != d || l.iter().any(|row| row.len() != d) {
            return Err(Error::DimensionMismatch { what: "L rows and columns", expected: d, found: l.len() });
        }
        for v in l.iter().flatten() {
            if v.len() != h {
                return Err(Error::DimensionMismatch { what: "L entry", expected: h, found: v.len() });
            }
        }
        if w.shape() != (d * h, d * h) {
            return Err(Error::DimensionMismatch { what: "W", expected: d * h, found: w.nrows() });
        }
        if dmat.shape() != (d, d) {
            return Err(Error::DimensionMismatch { what: "D", expected: d, found: dmat.nrows() });
        }
        let defect = linalg::unitarity_defect(&w);
        if defect > 1e-10 {
            return Err(Error::NotUnitary { what: "W", defect });
        }
        let defect = linalg::hermitian_defect(&dmat);
        if defect > 1e-12 {
            return Err(Error::NotHermitian { what: "D", defect });
        }
        Ok(QsdeModel { d, h, l, w, dmat })
    }

    /// `L = 0`, `W = 1`, `D = 0`.
    pub fn zero(d: usize, h: usize) -> Self {
        QsdeModel {
            d,
            h,
            l: alloc::vec![alloc::vec![CVector::zeros(h); d]; d],
            w: linalg::identity(d * h),
            dmat: linalg::zeros(d, d),
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn l(&self, i: usize, j: usize) -> &CVector {
        &self.l[i][j]
    }

    pub fn w(&self) -> &CMatrix {
        &self.w
    }

    pub fn d_matrix(&self) -> &CMatrix {
        &self.dmat
    }

    pub fn w_block(&self, i: usize, j: usize) -> CMatrix {
        self.w.view((i * self.h, j * self.h), (self.h, self.h)).into_owned()
    }

    pub fn has_trivial_scattering(&self) -> bool {
        linalg::max_abs_diff(&self.w, &linalg::identity(self.d * self.h)) <= 1e-12
    }

    /// `(L*L)_ij = Σ_k ⟨L_ki, L_kj⟩`.
    pub fn gram(&self) -> CMatrix {
        CMatrix::from_fn(self.d, self.d, |i, j| (0..self.d).map(|k| self.l[k][i].dotc(&self.l[k][j])).sum())
    }

    /// `(W*L)_ji = Σ_k (W_kj)† L_ki`.
    pub fn scattered_l(&self, j: usize, i: usize) -> CVector {
        (0..self.d).fold(CVector::zeros(self.h), |acc, k| acc + self.w_block(k, j).adjoint() * &self.l[k][i])
    }

    pub fn drift(&self, mode: Drift) -> CMatrix {
        self.hamiltonian_part(mode) - self.gram().scale(0.5)
    }

    fn hamiltonian_part(&self, mode: Drift) -> CMatrix {
        match mode {
            Drift::Consistent => self.dmat.map(|z| z * I),
            Drift::Literal => self.dmat.clone(),
        }
    }
}

/// Symmetric Fock space of `ℂ^h` truncated at `cap` particles, in the basis
/// of occupation numbers ordered by total number, then lexicographically.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalSpace {
    h: usize,
    cap: usize,
    basis: Vec<Vec<usize>>,
    lowering: Vec<CMatrix>,
}

impl LocalSpace {
    pub fn new(h: usize, cap: usize) -> Result<Self> {
        if cap == 0 {
            return Err(Error::InvalidParameter("the per-bin particle cap must be positive"));
        }
        fn fill(h: usize, total: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if prefix.len() == h {
                if prefix.iter().sum::<usize>() == total {
                    out.push(prefix.clone());
                }
                return;
            }
            let used: usize = prefix.iter().sum();
            for n in (0..=total - used).rev() {
                prefix.push(n);
                fill(h, total, prefix, out);
                prefix.pop();
            }
        }
        let mut basis = Vec::new();
        for total in 0..=cap {
            fill(h, total, &mut Vec::new(), &mut basis);
        }
        let position = |occ: &[usize]| basis.iter().position(|b| b.as_slice() == occ);
        let dim = basis.len();
        let lowering = (0..h)
            .map(|k| {
                let mut a = linalg::zeros(dim, dim);
                for (col, occ) in basis.iter().enumerate() {
                    if occ[k] > 0 {
                        let mut lower = occ.clone();
                        lower[k] -= 1;
                        a[(position(&lower).expect("closed under lowering"), col)] = real(sqrt(occ[k] as f64));
                    }
                }
                a
            })
            .collect();
        Ok(LocalSpace { h, cap, basis, lowering })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn occupation(&self, index: usize) -> &[usize] {
        &self.basis[index]
    }

    /// Index of the state with one particle in channel `k`.
    pub fn one_particle(&self, k: usize) -> usize {
        1 + k
    }

    /// `A*(x) = Σ_k x_k a_k†`.
    pub fn create(&self, x: &CVector) -> CMatrix {
        self.lowering.iter().zip(x.iter()).fold(linalg::zeros(self.dim(), self.dim()), |acc, (a, &z)| acc + a.adjoint() * z)
    }

    /// `A(x) = Σ_k conj(x_k) a_k`.
    pub fn annihilate(&self, x: &CVector) -> CMatrix {
        self.create(x).adjoint()
    }

    /// `Λ(T) = Σ_kl T_kl a_k† a_l`.
    pub fn preserve(&self, t: &CMatrix) -> CMatrix {
        let mut out = linalg::zeros(self.dim(), self.dim());
        for k in 0..self.h {
            for l in 0..self.h {
                if t[(k, l)] != ZERO {
                    out += self.lowering[k].adjoint() * &self.lowering[l] * t[(k, l)];
                }
            }
        }
        out
    }
}

fn block_operator(d: usize, m: usize, mut block: impl FnMut(usize, usize) -> CMatrix) -> CMatrix {
    let mut out = linalg::zeros(d * m, d * m);
    for i in 0..d {
        for j in 0..d {
            out.view_mut((i * m, j * m), (m, m)).copy_from(&block(i, j));
        }
    }
    out
}

/// The bin increment `ΔI` as an operator on `ℂ^d ⊗ Γ_loc` (system index major).
pub fn local_increment(model: &QsdeModel, drift: Drift, dt: f64, space: &LocalSpace) -> CMatrix {
    let g = model.drift(drift);
    let root = sqrt(dt);
    let m = space.dim();
    block_operator(model.d, m, |i, j| {
        let mut gauge = model.w_block(i, j);
        if i == j {
            gauge -= linalg::identity(model.h);
        }
        space.create(&model.l[i][j]) * real(root) + space.preserve(&gauge)
            - space.annihilate(&model.scattered_l(j, i)) * real(root)
            + linalg::scalar_matrix(m, g[(i, j)] * dt)
    })
}

/// Euler bin factor `1 + ΔI`.
pub fn euler_factor(model: &QsdeModel, drift: Drift, dt: f64, space: &LocalSpace) -> CMatrix {
    local_increment(model, drift, dt, space) + linalg::identity(model.d * space.dim())
}

/// Exponential bin factor `exp(X)` with
/// `X_ij = √dt (A*(L_ij) − A(L_ji)) + K_ij dt`, where `K = iD` in the
/// consistent mode. `X` is anti-hermitian on the truncated space, so the
/// factor is unitary up to round-off. Requires `W = 1`.
pub fn exponential_factor(model: &QsdeModel, drift: Drift, dt: f64, space: &LocalSpace) -> Result<CMatrix> {
    if !model.has_trivial_scattering() {
        return Err(Error::InvalidParameter("the exponential step needs W = 1"));
    }
    let k = model.hamiltonian_part(drift);
    let root = sqrt(dt);
    let m = space.dim();
    let x = block_operator(model.d, m, |i, j| {
        (space.create(&model.l[i][j]) - space.annihilate(&model.l[j][i])) * real(root)
            + linalg::scalar_matrix(m, k[(i, j)] * dt)
    });
    Ok(linalg::expm(&x))
}

/// `ΔI` of one bin as a `d×d` array of operators on the Fock space over all
/// bins (`m = n_bins·h` modes).
pub fn ito_increment(model: &QsdeModel, drift: Drift, grid: &BinGrid, bin: usize) -> Result<Vec<Vec<FockOperator>>> {
    if bin >= grid.n_bins() {
        return Err(Error::InvalidParameter("bin index out of range"));
    }
    let (s, t) = (grid.time_of(bin), grid.time_of(bin + 1));
    let g = model.drift(drift);
    (0..model.d)
        .map(|i| {
            (0..model.d)
                .map(|j| {
                    let mut gauge = model.w_block(i, j);
                    if i == j {
                        gauge -= linalg::identity(model.h);
                    }
                    Ok(FockOperator {
                        annihilation: time_indexed_vector(grid, s, t, &model.scattered_l(j, i))?.scale(-ONE),
                        preservation: time_indexed_operator(grid, s, t, &gauge)?,
                        creation: time_indexed_vector(grid, s, t, &model.l[i][j])?,
                        scalar: g[(i, j)] * grid.dt(),
                    })
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stepper {
    Euler,
    Exponential,
}

/// Product probe state: the vacuum in every bin except the listed
/// `(bin, local basis index)` pairs.
type Probe = Vec<(usize, usize)>;

/// Solution of the discretized equation after a number of bins.
#[derive(Clone, Debug)]
pub struct UnitaryProcess {
    model: QsdeModel,
    drift: Drift,
    grid: BinGrid,
    space: LocalSpace,
    euler: CMatrix,
    exponential: Option<CMatrix>,
    steps: Vec<Stepper>,
}

impl UnitaryProcess {
    pub fn new(model: QsdeModel, grid: BinGrid, drift: Drift, cap: usize) -> Result<Self> {
        let space = LocalSpace::new(model.h, cap)?;
        let euler = euler_factor(&model, drift, grid.dt(), &space);
        let exponential = if model.has_trivial_scattering() {
            Some(exponential_factor(&model, drift, grid.dt(), &space)?)
        } else {
            None
        };
        Ok(UnitaryProcess { model, drift, grid, space, euler, exponential, steps: Vec::new() })
    }

    pub fn model(&self) -> &QsdeModel {
        &self.model
    }

    pub fn grid(&self) -> &BinGrid {
        &self.grid
    }

    pub fn drift(&self) -> Drift {
        self.drift
    }

    pub fn local_space(&self) -> &LocalSpace {
        &self.space
    }

    /// Number of bins integrated so far.
    pub fn bin(&self) -> usize {
        self.steps.len()
    }

    pub fn time(&self) -> f64 {
        self.grid.time_of(self.bin())
    }

    fn push(mut self, step: Stepper) -> Result<Self> {
        if self.bin() >= self.grid.n_bins() {
            return Err(Error::InvalidParameter("the grid is exhausted"));
        }
        self.steps.push(step);
        Ok(self)
    }

    /// `U ← U (1 + ΔI)`.
    pub fn euler_step(self) -> Result<Self> {
        self.push(Stepper::Euler)
    }

    pub fn exponential_step(self) -> Result<Self> {
        if self.exponential.is_none() {
            return Err(Error::InvalidParameter("the exponential step needs W = 1"));
        }
        self.push(Stepper::Exponential)
    }

    pub fn euler_steps(mut self, n: usize) -> Result<Self> {
        for _ in 0..n {
            self = self.euler_step()?;
        }
        Ok(self)
    }

    pub fn exponential_steps(mut self, n: usize) -> Result<Self> {
        for _ in 0..n {
            self = self.exponential_step()?;
        }
        Ok(self)
    }

    fn factor(&self, step: Stepper) -> &CMatrix {
        match step {
            Stepper::Euler => &self.euler,
            Stepper::Exponential => self.exponential.as_ref().expect("checked when stepping"),
        }
    }

    /// Whether the per-bin cap has discarded amplitude: creation into a full
    /// bin is dropped, which happens as soon as a step was taken with some
    /// `L_ij ≠ 0`.
    pub fn saturated(&self) -> bool {
        self.bin() > 0 && self.model.l.iter().flatten().any(|v| v.iter().any(|z| *z != ZERO))
    }

    /// `Φ(U_t)_ij = ⟨Ω, (U_t)_ij Ω⟩`.
    pub fn vacuum_transition(&self) -> CMatrix {
        let (d, m) = (self.model.d, self.space.dim());
        let vacuum_block = |f: &CMatrix| CMatrix::from_fn(d, d, |i, j| f[(i * m, j * m)]);
        let blocks = [vacuum_block(&self.euler), self.exponential.as_ref().map(vacuum_block).unwrap_or_else(|| linalg::identity(d))];
        self.steps.iter().fold(linalg::identity(d), |acc, s| acc * &blocks[*s as usize])
    }

    /// `e^{tG}` at the current time.
    pub fn exact_vacuum_transition(&self) -> CMatrix {
        linalg::expm(&self.model.drift(self.drift).scale(self.time()))
    }

    pub fn vacuum_error(&self) -> f64 {
        linalg::max_abs_diff(&self.vacuum_transition(), &self.exact_vacuum_transition())
    }

    /// Vacuum, every one-particle state and a deterministic spread of
    /// two-particle states in distinct bins.
    fn probes(&self) -> Vec<Probe> {
        let n = self.bin();
        let h = self.model.h;
        let mut probes: Vec<Probe> = alloc::vec![Vec::new()];
        for b in 0..n {
            for k in 0..h {
                probes.push(alloc::vec![(b, self.space.one_particle(k))]);
            }
        }
        if n >= 2 {
            let samples = 8.min(n / 2);
            for s in 0..samples {
                let b1 = s * n / (2 * samples);
                let b2 = n - 1 - s * n / (4 * samples);
                let b2 = if b2 == b1 { b1 + 1 } else { b2 };
                probes.push(alloc::vec![(b1, self.space.one_particle(s % h)), (b2, self.space.one_particle((s + 1) % h))]);
                let b3 = (b1 + 1).min(n - 1);
                if b3 != b1 {
                    probes.push(alloc::vec![(b1, self.space.one_particle(0)), (b3, self.space.one_particle(h - 1))]);
                }
            }
        }
        probes
    }

    /// `max ‖(U†U − 1) v‖ / ‖v‖` over `v = u ⊗ φ` with `u ∈ ℂ^d` arbitrary and
    /// `φ` in the probe set.
    pub fn unitarity_defect(&self) -> f64 {
        let factors: Vec<&CMatrix> = self.steps.iter().map(|&s| self.factor(s)).collect();
        DefectRecursion::new(self.model.d, self.space.dim(), &factors).max_defect(&self.probes())
    }

    /// Largest defect of the two families of unitarity relations
    /// `Σ_n U_in U_jn* = δ_ij` and `Σ_n U_ni* U_nj = δ_ij` on the probe set,
    /// that is of `UU† = 1` and `U†U = 1`.
    pub fn bgw_relation_defect(&self) -> f64 {
        let n = self.bin();
        // U U† = G_1 ⋯ G_n G_n† ⋯ G_1†: the same recursion with factors F_b†
        // taken in reverse bin order.
        let adjoints: Vec<CMatrix> = self.steps.iter().rev().map(|&s| self.factor(s).adjoint()).collect();
        let refs: Vec<&CMatrix> = adjoints.iter().collect();
        let reversed: Vec<Probe> = self
            .probes()
            .into_iter()
            .map(|p| {
                let mut q: Probe = p.into_iter().map(|(b, s)| (n - 1 - b, s)).collect();
                q.sort();
                q
            })
            .collect();
        let left = DefectRecursion::new(self.model.d, self.space.dim(), &refs).max_defect(&reversed);
        self.unitarity_defect().max(left)
    }
}

/// Exact evaluation of `‖(G_n† ⋯ G_1† G_1 ⋯ G_n − 1)(u ⊗ φ)‖` for product
/// probes `φ`, where `G_b` acts on the system and bin `b`.
///
/// With `A_b = G_b†(A_{b−1} ⊗ 1)G_b`, `D_b = A_b − 1` and `E = G†G − 1`,
/// the partial expectations `R_b = ⟨φ|D_b|φ⟩` and
/// `S_b(X) = ⟨φ|D_b (X ⊗ 1) D_b|φ⟩` over the first `b` bins obey
///
/// * `R_b = ⟨G†(R ⊗ 1)G⟩ + ⟨E⟩`
/// * `S_b(X) = ⟨G† [Σ_αβ S(E_αβ) ⊗ (G X G†)_αβ] G⟩ + ⟨G†(R⊗1)G X E⟩ + ⟨E X G†(R⊗1)G⟩ + ⟨E X E⟩`
///
/// where `⟨·⟩` is the expectation in the bin's local state. Both are affine
/// in `(R, S)`, so each (factor, local state) pair becomes one matrix. The
/// defect for system vector `u` is `⟨u|S_n(1)|u⟩^{1/2}`.
struct DefectRecursion<'a> {
    d: usize,
    m: usize,
    factors: &'a [&'a CMatrix],
    /// Distinct factors, identified by address.
    distinct: Vec<&'a CMatrix>,
    /// `maps[f][s]`: affine map of distinct factor `f` with local state `s`.
    maps: Vec<Vec<CMatrix>>,
}

impl<'a> DefectRecursion<'a> {
    fn new(d: usize, m: usize, factors: &'a [&'a CMatrix]) -> Self {
        let mut distinct: Vec<&CMatrix> = Vec::new();
        for f in factors {
            if !distinct.iter().any(|g| core::ptr::eq(*g, *f) || *g == *f) {
                distinct.push(f);
            }
        }
        let mut rec = DefectRecursion { d, m, factors, distinct, maps: Vec::new() };
        rec.maps = rec.distinct.iter().map(|f| (0..m).map(|s| rec.affine_map(f, s)).collect()).collect();
        rec
    }

    fn state_len(&self) -> usize {
        self.d * self.d * (1 + self.d * self.d) + 1
    }

    fn factor_index(&self, f: &CMatrix) -> usize {
        self.distinct.iter().position(|g| core::ptr::eq(*g, f) || *g == f).expect("registered")
    }

    fn local_expectation(&self, y: &CMatrix, s: usize) -> CMatrix {
        CMatrix::from_fn(self.d, self.d, |i, j| y[(i * self.m + s, j * self.m + s)])
    }

    fn unpack(&self, v: &[Scalar]) -> (CMatrix, Vec<CMatrix>) {
        let d2 = self.d * self.d;
        let r = CMatrix::from_fn(self.d, self.d, |i, j| v[i * self.d + j]);
        let s = (0..d2)
            .map(|u| CMatrix::from_fn(self.d, self.d, |i, j| v[d2 * (1 + u) + i * self.d + j]))
            .collect();
        (r, s)
    }

    fn step(&self, g: &CMatrix, s_state: usize, r: &CMatrix, s: &[CMatrix]) -> (CMatrix, Vec<CMatrix>) {
        let (d, m) = (self.d, self.m);
        let id_loc = linalg::identity(m);
        let gd = g.adjoint();
        let e = &gd * g - linalg::identity(d * m);
        let k = &gd * linalg::kron(r, &id_loc) * g;
        let r_next = self.local_expectation(&k, s_state) + self.local_expectation(&e, s_state);
        let s_next = (0..d * d)
            .map(|unit| {
                let x = CMatrix::from_fn(d, d, |i, j| if i * d + j == unit { ONE } else { ZERO });
                let xi = linalg::kron(&x, &id_loc);
                let mid = g * &xi * &gd;
                let mut inner = linalg::zeros(d * m, d * m);
                for a in 0..d {
                    for b in 0..d {
                        let block = mid.view((a * m, b * m), (m, m)).into_owned();
                        inner += linalg::kron(&s[a * d + b], &block);
                    }
                }
                let total = &gd * inner * g + &k * &xi * &e + &e * &xi * &k + &e * &xi * &e;
                self.local_expectation(&total, s_state)
            })
            .collect();
        (r_next, s_next)
    }

    fn apply_raw(&self, g: &CMatrix, s_state: usize, v: &[Scalar]) -> Vec<Scalar> {
        let (r, s) = self.unpack(v);
        let (r, s) = self.step(g, s_state, &r, &s);
        let mut out: Vec<Scalar> = r.transpose().iter().copied().collect();
        for x in &s {
            out.extend(x.transpose().iter().copied());
        }
        out.push(v[v.len() - 1]);
        out
    }

    fn affine_map(&self, g: &CMatrix, s_state: usize) -> CMatrix {
        let n = self.state_len();
        let origin = {
            let mut v = alloc::vec![ZERO; n];
            v[n - 1] = ONE;
            self.apply_raw(g, s_state, &v)
        };
        let mut map = linalg::zeros(n, n);
        for k in 0..n - 1 {
            let mut v = alloc::vec![ZERO; n];
            v[k] = ONE;
            v[n - 1] = ONE;
            let image = self.apply_raw(g, s_state, &v);
            for i in 0..n {
                map[(i, k)] = image[i] - origin[i];
            }
        }
        for i in 0..n {
            map[(i, n - 1)] = origin[i];
        }
        map
    }

    fn map(&self, bin: usize, s_state: usize) -> &CMatrix {
        &self.maps[self.factor_index(self.factors[bin])][s_state]
    }

    fn defect_of(&self, state: &CVector) -> f64 {
        let (_, s) = self.unpack(state.as_slice());
        let d = self.d;
        let total = (0..d).fold(linalg::zeros(d, d), |acc, a| acc + &s[a * d + a]);
        let (values, _) = linalg::hermitian_eigen(&total);
        sqrt(values.last().copied().unwrap_or(0.0).max(0.0))
    }

    fn max_defect(&self, probes: &[Probe]) -> f64 {
        let n = self.factors.len();
        let len = self.state_len();
        let mut start = CVector::zeros(len);
        start[len - 1] = ONE;
        // vacuum prefixes
        let mut prefix = Vec::with_capacity(n + 1);
        prefix.push(start);
        for b in 0..n {
            let next = self.map(b, 0) * &prefix[b];
            prefix.push(next);
        }
        let mut worst = self.defect_of(&prefix[n]);

        let (single, multi): (Vec<&Probe>, Vec<&Probe>) = probes.iter().filter(|p| !p.is_empty()).partition(|p| p.len() == 1);
        // one-particle probes through vacuum suffix maps
        let mut by_bin: Vec<Vec<usize>> = alloc::vec![Vec::new(); n];
        for p in &single {
            by_bin[p[0].0].push(p[0].1);
        }
        let mut suffix = linalg::identity(len);
        for b in (0..n).rev() {
            for &s in &by_bin[b] {
                let state = &suffix * (self.map(b, s) * &prefix[b]);
                worst = worst.max(self.defect_of(&state));
            }
            suffix = &suffix * self.map(b, 0);
        }
        for p in multi {
            let first = p[0].0;
            let mut state = prefix[first].clone();
            for b in first..n {
                let s = p.iter().find(|(pb, _)| *pb == b).map(|&(_, s)| s).unwrap_or(0);
                state = self.map(b, s) * state;
            }
            worst = worst.max(self.defect_of(&state));
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{FockVector, OneParticleVector};
    use crate::scalar::c;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_model(l: Scalar) -> QsdeModel {
        QsdeModel::new(1, 1, alloc::vec![alloc::vec![CVector::from_element(1, l)]], linalg::identity(1), linalg::zeros(1, 1)).unwrap()
    }

    fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let a = CMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let hermitian = (&a + a.adjoint()).scale(0.5);
        linalg::expm(&hermitian.map(|z| z * I))
    }

    fn random_model(d: usize, h: usize, seed: u64, trivial_w: bool) -> QsdeModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = (0..d)
            .map(|_| (0..d).map(|_| CVector::from_fn(h, |_, _| c(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)))).collect())
            .collect();
        let w = if trivial_w { linalg::identity(d * h) } else { random_unitary(d * h, &mut rng) };
        let a = CMatrix::from_fn(d, d, |_, _| c(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)));
        QsdeModel::new(d, h, l, w, (&a + a.adjoint()).scale(0.5)).unwrap()
    }

    fn euler_run(model: &QsdeModel, n: usize, cap: usize, drift: Drift) -> UnitaryProcess {
        UnitaryProcess::new(model.clone(), BinGrid::new(1.0, n).unwrap(), drift, cap).unwrap().euler_steps(n).unwrap()
    }

    /// `U = F_1 ⋯ F_n` built densely on `ℂ^d ⊗ Γ_loc^{⊗n}`.
    fn dense_solution(factors: &[CMatrix], d: usize, m: usize) -> CMatrix {
        let n = factors.len();
        let noise_dim = m.pow(n as u32);
        let dim = d * noise_dim;
        let digit = |g: usize, b: usize| (g / m.pow((n - 1 - b) as u32)) % m;
        let mut u = linalg::identity(dim);
        for (b, f) in factors.iter().enumerate() {
            let mut global = linalg::zeros(dim, dim);
            for col in 0..dim {
                let (j, noise) = (col / noise_dim, col % noise_dim);
                let sb = digit(noise, b);
                let rest = noise - sb * m.pow((n - 1 - b) as u32);
                for i in 0..d {
                    for s in 0..m {
                        let z = f[(i * m + s, j * m + sb)];
                        if z != ZERO {
                            global[(i * noise_dim + rest + s * m.pow((n - 1 - b) as u32), col)] += z;
                        }
                    }
                }
            }
            u *= global;
        }
        u
    }

    fn dense_probe_defect(u: &CMatrix, d: usize, m: usize, n: usize, probe: &[(usize, usize)], left: bool) -> f64 {
        let noise_dim = m.pow(n as u32);
        let index: usize = probe.iter().map(|&(b, s)| s * m.pow((n - 1 - b) as u32)).sum();
        let prod = if left { u * u.adjoint() } else { u.adjoint() * u };
        let defect = prod - linalg::identity(d * noise_dim);
        let embed = CMatrix::from_fn(d * noise_dim, d, |row, j| if row == j * noise_dim + index { ONE } else { ZERO });
        let v = defect * embed;
        sqrt(linalg::hermitian_eigen(&(v.adjoint() * v)).0.last().copied().unwrap().max(0.0))
    }

    #[test]
    fn local_space_layout() {
        let space = LocalSpace::new(2, 2).unwrap();
        assert_eq!(space.dim(), 6);
        assert_eq!(space.occupation(0), &[0, 0]);
        assert_eq!(space.occupation(space.one_particle(1)), &[0, 1]);
        let x = CVector::from_vec(alloc::vec![ONE, c(0.0, 2.0)]);
        // A(x) A*(x) on the vacuum gives ‖x‖²
        let v = space.annihilate(&x) * space.create(&x);
        assert!((v[(0, 0)] - real(5.0)).norm() < 1e-14);
        assert!(matches!(LocalSpace::new(1, 0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn model_validation() {
        let bad_w = QsdeModel::new(1, 1, alloc::vec![alloc::vec![CVector::zeros(1)]], CMatrix::from_element(1, 1, real(2.0)), linalg::zeros(1, 1));
        assert!(matches!(bad_w, Err(Error::NotUnitary { .. })));
        let bad_d = QsdeModel::new(1, 1, alloc::vec![alloc::vec![CVector::zeros(1)]], linalg::identity(1), CMatrix::from_element(1, 1, I));
        assert!(matches!(bad_d, Err(Error::NotHermitian { .. })));
        let model = random_model(2, 2, 1, true);
        let g = model.drift(Drift::Consistent);
        assert!(linalg::max_abs_diff(&(&g + g.adjoint()), &model.gram().scale(-1.0)) < 1e-14);
        assert!(linalg::hermitian_eigen(&model.gram()).0[0] >= -1e-14);
    }

    #[test]
    fn ito_increment_examples() {
        let grid = BinGrid::new(1.0, 4).unwrap();
        for row in ito_increment(&QsdeModel::zero(2, 2), Drift::Consistent, &grid, 1).unwrap() {
            for op in row {
                assert_eq!(op, FockOperator::zero(8));
            }
        }
        let l = c(0.6, 0.8);
        let inc = ito_increment(&scalar_model(l), Drift::Consistent, &grid, 2).unwrap();
        let op = &inc[0][0];
        let root = sqrt(grid.dt());
        assert_eq!(op.creation.entries(), &[(2, l * root)]);
        assert_eq!(op.annihilation.entries(), &[(2, -l * root)]);
        assert!((op.scalar - real(-0.5 * grid.dt())).norm() < 1e-15);
        // pure scattering
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = random_unitary(2, &mut rng);
        let model = QsdeModel::new(2, 1, alloc::vec![alloc::vec![CVector::zeros(1); 2]; 2], w.clone(), linalg::zeros(2, 2)).unwrap();
        let inc = ito_increment(&model, Drift::Consistent, &grid, 0).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let op = &inc[i][j];
                assert!(op.creation.entries().is_empty() && op.annihilation.entries().is_empty() && op.scalar == ZERO);
                let expected = w[(i, j)] - if i == j { ONE } else { ZERO };
                let found = op.preservation.entries().first().map(|e| e.2).unwrap_or(ZERO);
                assert!((found - expected).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn global_increment_matches_local_factor() {
        let grid = BinGrid::new(1.0, 3).unwrap();
        let model = random_model(2, 2, 7, false);
        let space = LocalSpace::new(2, 1).unwrap();
        let local = local_increment(&model, Drift::Consistent, grid.dt(), &space);
        let inc = ito_increment(&model, Drift::Consistent, &grid, 1).unwrap();
        let m = space.dim();
        // global basis states restricted to bin 1 with at most one particle
        let global_state = |s: usize| {
            let mut v = FockVector::vacuum(6, 3);
            if s > 0 {
                let xi = OneParticleVector::from_entries(6, [(2 + s - 1, ONE)]).unwrap();
                v = crate::fock::create(&xi, &v).unwrap();
            }
            v
        };
        for i in 0..2 {
            for j in 0..2 {
                for col in 0..m {
                    let image = inc[i][j].apply(&global_state(col)).unwrap();
                    for row in 0..m {
                        let found = global_state(row).inner(&image);
                        assert!((found - local[(i * m + row, j * m + col)]).norm() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn one_euler_step_vacuum_transition() {
        let model = random_model(2, 2, 3, false);
        let grid = BinGrid::new(1.0, 16).unwrap();
        let p = UnitaryProcess::new(model.clone(), grid, Drift::Consistent, 1).unwrap();
        assert_eq!(p.vacuum_transition(), linalg::identity(2));
        let p = p.euler_step().unwrap();
        let expected = linalg::identity(2) + model.drift(Drift::Consistent).scale(grid.dt());
        assert!(linalg::max_abs_diff(&p.vacuum_transition(), &expected) < 1e-15);
    }

    #[test]
    fn zero_model_is_trivial() {
        let p = euler_run(&QsdeModel::zero(2, 2), 8, 1, Drift::Consistent);
        assert_eq!(p.vacuum_transition(), linalg::identity(2));
        assert_eq!(p.unitarity_defect(), 0.0);
        assert_eq!(p.bgw_relation_defect(), 0.0);
        assert!(!p.saturated());
        let space = LocalSpace::new(2, 1).unwrap();
        let f = exponential_factor(&QsdeModel::zero(2, 2), Drift::Consistent, 0.1, &space).unwrap();
        assert!(linalg::max_abs_diff(&f, &linalg::identity(6)) < 1e-15);
    }

    #[test]
    fn recursion_matches_dense_construction() {
        for (seed, h, trivial) in [(1u64, 1usize, false), (2, 2, false), (3, 1, true)] {
            let model = random_model(2, h, seed, trivial);
            let n = 3;
            let p = euler_run(&model, n, 1, Drift::Consistent);
            let m = p.local_space().dim();
            let factors = alloc::vec![p.euler.clone(); n];
            let u = dense_solution(&factors, 2, m);
            let mut dense_right: f64 = 0.0;
            let mut dense_left: f64 = 0.0;
            for probe in p.probes() {
                dense_right = dense_right.max(dense_probe_defect(&u, 2, m, n, &probe, false));
                dense_left = dense_left.max(dense_probe_defect(&u, 2, m, n, &probe, true));
            }
            assert!((p.unitarity_defect() - dense_right).abs() < 1e-12 * (1.0 + dense_right));
            assert!((p.bgw_relation_defect() - dense_right.max(dense_left)).abs() < 1e-12 * (1.0 + dense_left));
            // vacuum transition
            let noise_dim = m.pow(n as u32);
            let vac = CMatrix::from_fn(2, 2, |i, j| u[(i * noise_dim, j * noise_dim)]);
            assert!(linalg::max_abs_diff(&vac, &p.vacuum_transition()) < 1e-14);
        }
    }

    #[test]
    fn mixed_steppers_match_dense_construction() {
        let model = random_model(1, 2, 5, true);
        let p = UnitaryProcess::new(model, BinGrid::new(1.0, 3).unwrap(), Drift::Consistent, 1).unwrap();
        let p = p.euler_step().unwrap().exponential_step().unwrap().euler_step().unwrap();
        let m = p.local_space().dim();
        let ex = p.exponential.clone().unwrap();
        let u = dense_solution(&[p.euler.clone(), ex, p.euler.clone()], 1, m);
        let dense = p.probes().iter().map(|pr| dense_probe_defect(&u, 1, m, 3, pr, false)).fold(0.0, f64::max);
        assert!((p.unitarity_defect() - dense).abs() < 1e-12);
    }

    #[test]
    fn scalar_model_vacuum_and_defect_orders() {
        let model = scalar_model(ONE);
        let mut errors = Vec::new();
        let mut defects = Vec::new();
        for n in [128usize, 256, 512] {
            let p = euler_run(&model, n, 1, Drift::Consistent);
            let err = (p.vacuum_transition()[(0, 0)] - real(libm::exp(-0.5))).norm();
            errors.push(err);
            defects.push(p.unitarity_defect());
            if n == 256 {
                assert!(err <= 5e-3 && p.saturated());
            }
        }
        for k in 0..2 {
            let ratio = errors[k] / errors[k + 1];
            assert!((1.6..=2.4).contains(&ratio), "vacuum ratio {ratio}");
            let ratio = defects[k] / defects[k + 1];
            assert!((1.6..=2.4).contains(&ratio), "defect ratio {ratio}");
        }
    }

    #[test]
    fn bosonic_bins_give_half_order_defect() {
        let model = scalar_model(ONE);
        let d1 = euler_run(&model, 64, 2, Drift::Consistent).unitarity_defect();
        let d2 = euler_run(&model, 128, 2, Drift::Consistent).unitarity_defect();
        let ratio = d1 / d2;
        assert!((1.3..1.55).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn exponential_steps_stay_unitary() {
        let model = random_model(2, 2, 8, true);
        let p = UnitaryProcess::new(model.clone(), BinGrid::new(1.0, 256).unwrap(), Drift::Consistent, 1).unwrap();
        let p = p.exponential_steps(256).unwrap();
        assert!(p.unitarity_defect() <= 1e-10);
        assert!(p.bgw_relation_defect() <= 1e-10);
        assert!(p.vacuum_error() < 0.05);
        let scattering = random_model(1, 1, 9, false);
        let q = UnitaryProcess::new(scattering, BinGrid::new(1.0, 4).unwrap(), Drift::Consistent, 1).unwrap();
        assert!(matches!(q.exponential_step(), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn random_model_is_first_order() {
        let model = random_model(2, 2, 11, false);
        let runs: Vec<UnitaryProcess> = [64usize, 128, 256].iter().map(|&n| euler_run(&model, n, 1, Drift::Consistent)).collect();
        for k in 0..2 {
            let r = runs[k].vacuum_error() / runs[k + 1].vacuum_error();
            assert!((1.6..=2.4).contains(&r), "vacuum ratio {r}");
            let r = runs[k].unitarity_defect() / runs[k + 1].unitarity_defect();
            assert!((1.6..=2.4).contains(&r), "unitarity ratio {r}");
            let r = runs[k].bgw_relation_defect() / runs[k + 1].bgw_relation_defect();
            assert!((1.6..=2.4).contains(&r), "relation ratio {r}");
        }
        for p in &runs {
            assert!(p.bgw_relation_defect() <= 2.0 * p.unitarity_defect() + 1e-12);
        }
    }

    #[test]
    fn literal_drift_keeps_a_defect() {
        let model = random_model(2, 1, 12, true);
        let d1 = euler_run(&model, 64, 1, Drift::Literal).unitarity_defect();
        let d2 = euler_run(&model, 256, 1, Drift::Literal).unitarity_defect();
        assert!(d2 > 0.5 * d1 && d2 > 0.1);
    }

    #[test]
    fn vacuum_semigroup_and_grid_exhaustion() {
        let model = random_model(2, 2, 13, false);
        let grid = BinGrid::new(1.0, 8).unwrap();
        let p = UnitaryProcess::new(model, grid, Drift::Consistent, 1).unwrap();
        let a = p.clone().euler_steps(3).unwrap().vacuum_transition();
        let b = p.clone().euler_steps(5).unwrap().vacuum_transition();
        let full = p.euler_steps(8).unwrap();
        assert!(linalg::max_abs_diff(&(a * b), &full.vacuum_transition()) < 1e-14);
        assert!(matches!(full.euler_step(), Err(Error::InvalidParameter(_))));
    }
}
