use std::path::Path;

use serde::{Deserialize, Serialize};

use super::state::validate_register;
use crate::error::{Error, Result};
use crate::linalg::{
    bit_mask, for_each_free_index, hermitian_eigen, hermitian_eigenvalues, hermiticity_deviation,
    offsets, trace, CMatrix, C64,
};

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-9;

/// Hermitian, positive semidefinite, unit-trace matrix over a qubit register.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validates the density-matrix invariants.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let dim = matrix.nrows();
        if !matrix.is_square() || dim < 2 || !dim.is_power_of_two() {
            return Err(Error::InvalidDensityMatrix(format!(
                "shape {}×{} is not a square power of two ≥ 2",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidDensityMatrix("non-finite entry".into()));
        }
        let herm = hermiticity_deviation(&matrix);
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidDensityMatrix(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let tr = trace(&matrix);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr} is not 1")));
        }
        let min = hermitian_eigenvalues(&matrix).last().copied().unwrap_or(0.0);
        if min < -PSD_TOL {
            return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(DensityMatrix { matrix })
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        DensityMatrix { matrix }
    }

    /// `I / dim`.
    pub fn maximally_mixed(num_qubits: usize) -> Self {
        let dim = 1usize << num_qubits;
        DensityMatrix { matrix: CMatrix::identity(dim, dim) * C64::new(1.0 / dim as f64, 0.0) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// Eigenvalues (descending) and the matching eigenvector columns.
    pub fn eigen(&self) -> (Vec<f64>, CMatrix) {
        hermitian_eigen(&self.matrix)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// Von Neumann entropy in bits; eigenvalues below `1e-15` contribute zero.
    pub fn entropy(&self) -> f64 {
        self.eigenvalues()
            .into_iter()
            .filter(|&l| l > 1e-15)
            .map(|l| -l * l.log2())
            .sum()
    }

    /// Reduced state on `keep` (bit `i` of the reduced index is `keep[i]`).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let n = self.num_qubits();
        validate_register(keep, n)?;
        let k_off = offsets(keep);
        let k = k_off.len();
        let mut out = CMatrix::zeros(k, k);
        for_each_free_index(self.dim(), bit_mask(keep), |base| {
            for (a, &oa) in k_off.iter().enumerate() {
                for (b, &ob) in k_off.iter().enumerate() {
                    out[(a, b)] += self.matrix[(base | oa, base | ob)];
                }
            }
        });
        Ok(DensityMatrix { matrix: out })
    }

    /// Partial transpose over the listed qubits. The result is Hermitian and
    /// unit-trace but generally not positive, so it is returned as a raw matrix.
    pub fn partial_transpose(&self, qubits: &[usize]) -> Result<CMatrix> {
        let n = self.num_qubits();
        validate_register(qubits, n)?;
        let mask = bit_mask(qubits);
        let dim = self.dim();
        let mut out = CMatrix::zeros(dim, dim);
        for r in 0..dim {
            for c in 0..dim {
                // swap the transposed bits between row and column index
                let r2 = (r & !mask) | (c & mask);
                let c2 = (c & !mask) | (r & mask);
                out[(r2, c2)] = self.matrix[(r, c)];
            }
        }
        Ok(out)
    }

    /// `self ⊗ high` (`high` on the more significant qubits).
    pub fn tensor(&self, high: &DensityMatrix) -> DensityMatrix {
        DensityMatrix { matrix: high.matrix.kronecker(&self.matrix) }
    }

    /// Conjugation `U ρ U†` by a unitary on the full register.
    pub fn conjugate(&self, u: &CMatrix) -> Result<DensityMatrix> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: u.nrows() });
        }
        Ok(DensityMatrix { matrix: u * &self.matrix * u.adjoint() })
    }

    /// Convex mixture `Σ w_i ρ_i`; weights must be nonnegative and sum to one.
    pub fn mixture(terms: &[(f64, &DensityMatrix)]) -> Result<DensityMatrix> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidDensityMatrix("empty mixture".into()))?;
        let dim = first.1.dim();
        let mut acc = CMatrix::zeros(dim, dim);
        for (w, rho) in terms {
            if rho.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: rho.dim() });
            }
            acc += &rho.matrix * C64::new(*w, 0.0);
        }
        DensityMatrix::new(acc)
    }

    pub fn to_json(&self) -> DensityMatrixJson {
        let d = self.dim();
        DensityMatrixJson {
            dim: d,
            re: (0..d).map(|r| (0..d).map(|c| self.matrix[(r, c)].re).collect()).collect(),
            im: (0..d).map(|r| (0..d).map(|c| self.matrix[(r, c)].im).collect()).collect(),
        }
    }

    pub fn from_json(json: &DensityMatrixJson) -> Result<DensityMatrix> {
        let d = json.dim;
        if json.re.len() != d || json.im.len() != d {
            return Err(Error::InvalidDensityMatrix(format!("expected {d} rows")));
        }
        let mut m = CMatrix::zeros(d, d);
        for r in 0..d {
            if json.re[r].len() != d || json.im[r].len() != d {
                return Err(Error::InvalidDensityMatrix(format!("row {r} does not have {d} entries")));
            }
            for c in 0..d {
                m[(r, c)] = C64::new(json.re[r][c], json.im[r][c]);
            }
        }
        DensityMatrix::new(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<DensityMatrix> {
        let text = std::fs::read_to_string(path)?;
        let json: DensityMatrixJson = serde_json::from_str(&text)?;
        DensityMatrix::from_json(&json)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_json())?)?;
        Ok(())
    }
}

/// `{ "dim": d, "re": [[...]], "im": [[...]] }`, row-major.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DensityMatrixJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}
