//! Dense complex linear algebra on top of `nalgebra`: hermitian eigenvalues,
//! rank-revealing factorizations, Kronecker products and the matrix exponential.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::scalar::{real, Scalar, ONE, ZERO};

pub type CMatrix = DMatrix<Scalar>;
pub type CVector = DVector<Scalar>;

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Maximum absolute column sum.
pub fn norm1(m: &CMatrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn hermitian_defect(m: &CMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

/// `‖M†M − I‖` measured entrywise.
pub fn unitarity_defect(m: &CMatrix) -> f64 {
    let n = m.ncols();
    max_abs_diff(&(m.adjoint() * m), &identity(n))
}

/// Eigenvalues (ascending) and eigenvectors of the hermitian part of `m`.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    assert!(m.is_square(), "hermitian_eigen needs a square matrix");
    if m.nrows() == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let h = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigen(m).0.first().copied().unwrap_or(0.0)
}

/// Hermitian square root of a positive semi-definite matrix; small negative
/// eigenvalues from round-off are clamped to zero.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let roots = CMatrix::from_diagonal(&CVector::from_iterator(
        values.len(),
        values.iter().map(|&v| real(crate::scalar::sqrt(v.max(0.0)))),
    ));
    &vectors * roots * vectors.adjoint()
}

/// Kronecker product `a ⊗ b` with row index `i_a * rows(b) + i_b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Thin SVD with singular values sorted in decreasing order, keeping only the
/// components whose singular value exceeds `rel_tol` times the largest one.
///
/// Returns `(u, sigma, v_adjoint)` with `m ≈ u · diag(sigma) · v_adjoint`.
pub fn truncated_svd(m: &CMatrix, rel_tol: f64) -> (CMatrix, Vec<f64>, CMatrix) {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return (CMatrix::zeros(rows, 0), Vec::new(), CMatrix::zeros(0, cols));
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let largest = order.first().map(|&k| svd.singular_values[k]).unwrap_or(0.0);
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&k| largest > 0.0 && svd.singular_values[k] > rel_tol * largest)
        .collect();
    let r = kept.len();
    let u_r = CMatrix::from_fn(rows, r, |i, j| u[(i, kept[j])]);
    let vt_r = CMatrix::from_fn(r, cols, |i, j| vt[(kept[i], j)]);
    let sigma = kept.iter().map(|&k| svd.singular_values[k]).collect();
    (u_r, sigma, vt_r)
}

pub fn rank(m: &CMatrix, rel_tol: f64) -> usize {
    truncated_svd(m, rel_tol).1.len()
}

/// Orthonormal basis (as columns) of the column span of `m`.
pub fn column_space(m: &CMatrix, rel_tol: f64) -> CMatrix {
    truncated_svd(m, rel_tol).0
}

/// Orthonormal basis (as columns) of the null space of `m`, where singular
/// values below `abs_tol` count as zero.
pub fn null_space(m: &CMatrix, abs_tol: f64) -> CMatrix {
    let cols = m.ncols();
    if cols == 0 {
        return CMatrix::zeros(0, 0);
    }
    // Pad to at least square so that the SVD returns a full set of right vectors.
    let padded = if m.nrows() < cols {
        let mut p = CMatrix::zeros(cols, cols);
        p.view_mut((0, 0), m.shape()).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let null: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] <= abs_tol)
        .collect();
    CMatrix::from_fn(cols, null.len(), |i, j| vt[(null[j], i)].conj())
}

const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371_920_351_148_152;

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn expm(a: &CMatrix) -> CMatrix {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    if n == 0 {
        return CMatrix::zeros(0, 0);
    }
    let norm = norm1(a);
    let squarings = if norm > THETA13 {
        libm::ceil(libm::log2(norm / THETA13)) as u32
    } else {
        0
    };
    let a = a.scale(libm::pow(2.0, -(squarings as f64)));
    let b = |k: usize| real(PADE13[k]);
    let id = identity(n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9))
        + &a6 * b(7)
        + &a4 * b(5)
        + &a2 * b(3)
        + &id * b(1);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8))
        + &a6 * b(6)
        + &a4 * b(4)
        + &a2 * b(2)
        + &id * b(0);
    let mut result = (&v - &u)
        .lu()
        .solve(&(&v + &u))
        .expect("Padé denominator is invertible for scaled arguments");
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

pub fn scalar_matrix(n: usize, z: Scalar) -> CMatrix {
    CMatrix::from_diagonal_element(n, n, z)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_element(rows, cols, ZERO)
}

pub fn unit_vector(n: usize, k: usize) -> CVector {
    let mut v = CVector::from_element(n, ZERO);
    v[k] = ONE;
    v
}
