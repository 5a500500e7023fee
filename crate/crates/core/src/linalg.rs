//! Small dense linear-algebra helpers shared by the simulator and the oracles.
//!
//! All matrices are `nalgebra::DMatrix<Complex64>`. Qubit ordering is
//! little-endian throughout the crate: qubit 0 is the least significant bit of
//! a basis index, so `kron(high, low)` places `low` on the lower qubits.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Hermitian eigendecomposition with eigenvalues sorted in descending order.
///
/// Column `k` of the returned matrix is the eigenvector for `values[k]`. The
/// input is symmetrized first so rounding noise in the strictly-lower half
/// cannot leak into the result.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Eigenvalues of a Hermitian matrix, descending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut values: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

/// Square root of a positive semidefinite Hermitian matrix. Eigenvalues in
/// `[-clip, 0)` are treated as zero.
pub fn psd_sqrt(m: &CMatrix, clip: f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let roots: Vec<C64> = values
        .iter()
        .map(|&v| {
            let v = if v < 0.0 && v >= -clip { 0.0 } else { v.max(0.0) };
            C64::new(v.sqrt(), 0.0)
        })
        .collect();
    let scaled = scale_columns(&vectors, &roots);
    &scaled * vectors.adjoint()
}

/// Returns `m · diag(d)`.
pub fn scale_columns(m: &CMatrix, d: &[C64]) -> CMatrix {
    let mut out = m.clone();
    for (k, mut col) in out.column_iter_mut().enumerate() {
        col *= d[k];
    }
    out
}

/// Kronecker product with `high` on the more significant qubits.
pub fn kron(high: &CMatrix, low: &CMatrix) -> CMatrix {
    high.kronecker(low)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// `max |U†U - I|` entrywise.
pub fn unitarity_deviation(u: &CMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    let prod = u.adjoint() * u;
    max_abs_diff(&prod, &identity(u.nrows()))
}

/// `max |M - M†|` entrywise.
pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Deposits the low bits of `value` onto the bit positions listed in
/// `positions` (bit `i` of `value` goes to bit `positions[i]`).
#[inline]
pub fn deposit(value: usize, positions: &[usize]) -> usize {
    positions
        .iter()
        .enumerate()
        .fold(0, |acc, (i, &p)| acc | (((value >> i) & 1) << p))
}

/// Inverse of [`deposit`]: gathers the bits at `positions` into a compact value.
#[inline]
pub fn extract(index: usize, positions: &[usize]) -> usize {
    positions
        .iter()
        .enumerate()
        .fold(0, |acc, (i, &p)| acc | (((index >> p) & 1) << i))
}

pub fn bit_mask(positions: &[usize]) -> usize {
    positions.iter().fold(0, |acc, &p| acc | (1 << p))
}

/// Calls `f` for every index below `dim` whose bits inside `fixed_mask` are zero,
/// in ascending order.
#[inline]
pub fn for_each_free_index(dim: usize, fixed_mask: usize, mut f: impl FnMut(usize)) {
    let free = (dim - 1) & !fixed_mask;
    let mut s = 0usize;
    loop {
        f(s);
        if s == free {
            break;
        }
        s = ((s | !free) + 1) & free;
    }
}

/// Offsets `deposit(l, positions)` for every `l < 2^positions.len()`.
pub fn offsets(positions: &[usize]) -> Vec<usize> {
    (0..1usize << positions.len())
        .map(|l| deposit(l, positions))
        .collect()
}

/// Rotates a vector by a global phase so that its first component with
/// modulus above `tol` is real and positive.
pub fn fix_global_phase(v: &mut [C64], tol: f64) {
    if let Some(first) = v.iter().find(|z| z.norm() > tol).copied() {
        let phase = first.conj() / first.norm();
        for z in v.iter_mut() {
            *z *= phase;
        }
    }
}
