//! Classical exact references used to check the variational results.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, hermitian_eigenvalues, scale_columns, CMatrix, C64};
use crate::simulator::DensityMatrix;
use crate::states::{check_probability, werner};

/// Eigenvalues in `[-CLIP, 0)` are treated as zero before square roots.
pub const CLIP: f64 = 1e-9;

/// Positive eigenvalues below this are round-off on a zero eigenvalue; their
/// square roots (~1e-8) would otherwise dominate the error budget.
pub const NOISE_FLOOR: f64 = 1e-13;

fn clipped_sqrt(v: f64) -> f64 {
    if v < NOISE_FLOOR {
        0.0
    } else {
        v.sqrt()
    }
}

fn sqrt_psd(m: &CMatrix) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let roots: Vec<C64> = values.iter().map(|&v| C64::new(clipped_sqrt(v), 0.0)).collect();
    &scale_columns(&vectors, &roots) * vectors.adjoint()
}

fn same_dim(a: &DensityMatrix, b: &DensityMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    Ok(())
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
pub fn fidelity_exact(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho, sigma)?;
    let s = sqrt_psd(rho.matrix());
    let inner = &s * sigma.matrix() * &s;
    let root_trace: f64 = hermitian_eigenvalues(&inner).into_iter().map(clipped_sqrt).sum();
    Ok(root_trace * root_trace)
}

/// Trace distance `½‖ρ − σ‖₁`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho, sigma)?;
    let diff = rho.matrix() - sigma.matrix();
    Ok(hermitian_eigenvalues(&diff).iter().map(|l| l.abs()).sum::<f64>() / 2.0)
}

/// Wootters concurrence of a two-qubit state, from the spectrum of
/// `√ρ ρ̃ √ρ` with `ρ̃ = (Y⊗Y) ρ* (Y⊗Y)`.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, found: rho.dim() });
    }
    // Y⊗Y is real: antidiagonal (-1, 1, 1, -1)
    let mut yy = CMatrix::zeros(4, 4);
    for (r, s) in [(0, -1.0), (1, 1.0), (2, 1.0), (3, -1.0)] {
        yy[(r, 3 - r)] = C64::new(s, 0.0);
    }
    let flipped = &yy * rho.matrix().map(|z| z.conj()) * &yy;
    let s = sqrt_psd(rho.matrix());
    let lambdas: Vec<f64> = hermitian_eigenvalues(&(&s * flipped * &s)).into_iter().map(clipped_sqrt).collect();
    Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).max(0.0))
}

/// Closed-form half Bures entanglement of the Werner state,
/// `1 − √((1 + √(1 − C²))/2)` with `C` its concurrence.
pub fn werner_bures_reference(p: f64) -> Result<f64> {
    check_probability(p)?;
    let c = concurrence(&werner(p)?)?;
    Ok(1.0 - ((1.0 + (1.0 - c * c).max(0.0).sqrt()) / 2.0).sqrt())
}

/// A cut of the qubits into two disjoint, covering sides.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bipartition {
    pub side_a: Vec<usize>,
    pub side_b: Vec<usize>,
}

impl Bipartition {
    pub fn new(side_a: Vec<usize>, side_b: Vec<usize>, num_qubits: usize) -> Result<Self> {
        let mut seen = vec![false; num_qubits];
        for &q in side_a.iter().chain(&side_b) {
            if q >= num_qubits {
                return Err(Error::QubitOutOfRange { qubit: q, num_qubits });
            }
            if seen[q] {
                return Err(Error::InvalidRegister(format!("qubit {q} appears on both sides or twice")));
            }
            seen[q] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidRegister("bipartition does not cover every qubit".into()));
        }
        if side_a.is_empty() || side_b.is_empty() {
            return Err(Error::InvalidRegister("bipartition side is empty".into()));
        }
        Ok(Bipartition { side_a, side_b })
    }

    /// `side_a` against everything else.
    pub fn split_off(side_a: Vec<usize>, num_qubits: usize) -> Result<Self> {
        let side_b = (0..num_qubits).filter(|q| !side_a.contains(q)).collect();
        Bipartition::new(side_a, side_b, num_qubits)
    }
}

/// `(‖ρ^{T_B}‖₁ − 1)/2` with the partial transpose taken over `side_b`,
/// computed as the sum of `|λ|` over negative eigenvalues. Eigenvalues in
/// `[-CLIP, 0)` count as zero, so PPT states report exactly 0.
pub fn negativity(rho: &DensityMatrix, cut: &Bipartition) -> Result<f64> {
    Bipartition::new(cut.side_a.clone(), cut.side_b.clone(), rho.num_qubits())?;
    let pt = rho.partial_transpose(&cut.side_b)?;
    Ok(hermitian_eigenvalues(&pt).iter().filter(|&&l| l < -CLIP).fold(0.0, |acc, l| acc - l))
}
