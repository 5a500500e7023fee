use crate::error::{Error, Result};
use crate::linalg::{unitarity_deviation, CMatrix, C64, ONE, ZERO};

/// Tolerance for the bind-time unitarity check.
pub const UNITARY_TOL: f64 = 1e-10;

/// A concrete (parameter-free) circuit element.
///
/// Matrices act on the listed `targets` in little-endian order: bit `i` of a
/// local basis index corresponds to `targets[i]`. The same convention is used
/// for control registers, so control value `v` asserts `controls[i]` equal to
/// bit `i` of `v`.
#[derive(Clone, Debug)]
pub enum CircuitOp {
    /// Dense unitary on one or more target qubits.
    Unitary { targets: Vec<usize>, matrix: CMatrix },
    /// Applies `matrix` to the targets only where the control register holds `value`.
    Controlled {
        controls: Vec<usize>,
        value: usize,
        targets: Vec<usize>,
        matrix: CMatrix,
    },
    /// `Σ_j |j⟩⟨j|_controls ⊗ U_j`; a `None` block is the identity.
    Multiplexed {
        controls: Vec<usize>,
        targets: Vec<usize>,
        blocks: Vec<Option<CMatrix>>,
    },
    /// `|j⟩_controls |k⟩_targets → |j⟩ |(k + j + offset) mod 2^t⟩`. With no
    /// controls this is the plain shift `X(offset)`.
    Shift {
        controls: Vec<usize>,
        targets: Vec<usize>,
        offset: usize,
    },
}

pub fn hadamard_matrix() -> CMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_row_slice(2, 2, &[C64::new(h, 0.0), C64::new(h, 0.0), C64::new(h, 0.0), C64::new(-h, 0.0)])
}

pub fn pauli_x_matrix() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

/// SWAP of two qubits as a 4×4 matrix.
pub fn swap_matrix() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = ONE;
    m[(1, 2)] = ONE;
    m[(2, 1)] = ONE;
    m[(3, 3)] = ONE;
    m
}

impl CircuitOp {
    pub fn single(qubit: usize, matrix: CMatrix) -> Self {
        CircuitOp::Unitary { targets: vec![qubit], matrix }
    }

    pub fn hadamard(qubit: usize) -> Self {
        Self::single(qubit, hadamard_matrix())
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        CircuitOp::Controlled {
            controls: vec![control],
            value: 1,
            targets: vec![target],
            matrix: pauli_x_matrix(),
        }
    }

    /// Controlled SWAP of `a` and `b`.
    pub fn fredkin(control: usize, a: usize, b: usize) -> Self {
        CircuitOp::Controlled {
            controls: vec![control],
            value: 1,
            targets: vec![a, b],
            matrix: swap_matrix(),
        }
    }

    pub fn shift(targets: Vec<usize>, offset: usize) -> Self {
        CircuitOp::Shift { controls: Vec::new(), targets, offset }
    }

    /// `Σ_j |j⟩⟨j|_controls ⊗ X(j)_targets`.
    pub fn controlled_shift(controls: Vec<usize>, targets: Vec<usize>) -> Self {
        CircuitOp::Shift { controls, targets, offset: 0 }
    }

    pub fn targets(&self) -> &[usize] {
        match self {
            CircuitOp::Unitary { targets, .. }
            | CircuitOp::Controlled { targets, .. }
            | CircuitOp::Multiplexed { targets, .. }
            | CircuitOp::Shift { targets, .. } => targets,
        }
    }

    pub fn controls(&self) -> &[usize] {
        match self {
            CircuitOp::Unitary { .. } => &[],
            CircuitOp::Controlled { controls, .. }
            | CircuitOp::Multiplexed { controls, .. }
            | CircuitOp::Shift { controls, .. } => controls,
        }
    }

    /// Structural checks: indices in range, no duplicates, control/target
    /// disjointness and matrix shapes. Cheap; run on every application.
    pub fn check_layout(&self, num_qubits: usize) -> Result<()> {
        let targets = self.targets();
        let controls = self.controls();
        if targets.is_empty() {
            return Err(Error::InvalidRegister("operation has no target qubits".into()));
        }
        let mut seen = 0usize;
        for &q in targets.iter().chain(controls) {
            if q >= num_qubits {
                return Err(Error::QubitOutOfRange { qubit: q, num_qubits });
            }
            if seen & (1 << q) != 0 {
                return Err(Error::InvalidRegister(format!(
                    "qubit {q} appears more than once among controls and targets"
                )));
            }
            seen |= 1 << q;
        }
        let dim = 1usize << targets.len();
        let check_shape = |m: &CMatrix| {
            if m.nrows() != dim || m.ncols() != dim {
                Err(Error::DimensionMismatch { expected: dim, found: m.nrows() })
            } else {
                Ok(())
            }
        };
        match self {
            CircuitOp::Unitary { matrix, .. } => check_shape(matrix)?,
            CircuitOp::Controlled { matrix, value, controls, .. } => {
                check_shape(matrix)?;
                if *value >= 1usize << controls.len() {
                    return Err(Error::InvalidRegister(format!(
                        "control value {value} does not fit in {} control qubits",
                        controls.len()
                    )));
                }
            }
            CircuitOp::Multiplexed { blocks, controls, .. } => {
                if blocks.len() != 1usize << controls.len() {
                    return Err(Error::DimensionMismatch {
                        expected: 1usize << controls.len(),
                        found: blocks.len(),
                    });
                }
                for m in blocks.iter().flatten() {
                    check_shape(m)?;
                }
            }
            CircuitOp::Shift { .. } => {}
        }
        Ok(())
    }

    /// Maximum unitarity deviation over every matrix carried by the op.
    pub fn unitarity_deviation(&self) -> f64 {
        match self {
            CircuitOp::Unitary { matrix, .. } | CircuitOp::Controlled { matrix, .. } => {
                unitarity_deviation(matrix)
            }
            CircuitOp::Multiplexed { blocks, .. } => blocks
                .iter()
                .flatten()
                .map(unitarity_deviation)
                .fold(0.0, f64::max),
            CircuitOp::Shift { .. } => 0.0,
        }
    }

    /// Full validation: layout plus unitarity within [`UNITARY_TOL`].
    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        self.check_layout(num_qubits)?;
        let deviation = self.unitarity_deviation();
        if !(deviation <= UNITARY_TOL) {
            return Err(Error::NonUnitary { deviation });
        }
        Ok(())
    }

    /// The inverse operation.
    pub fn adjoint(&self) -> CircuitOp {
        match self {
            CircuitOp::Unitary { targets, matrix } => CircuitOp::Unitary {
                targets: targets.clone(),
                matrix: matrix.adjoint(),
            },
            CircuitOp::Controlled { controls, value, targets, matrix } => CircuitOp::Controlled {
                controls: controls.clone(),
                value: *value,
                targets: targets.clone(),
                matrix: matrix.adjoint(),
            },
            CircuitOp::Multiplexed { controls, targets, blocks } => CircuitOp::Multiplexed {
                controls: controls.clone(),
                targets: targets.clone(),
                blocks: blocks.iter().map(|b| b.as_ref().map(|m| m.adjoint())).collect(),
            },
            CircuitOp::Shift { controls, targets, offset } => {
                // Inverse shift as a multiplexed permutation: subtract (offset + j) mod 2^t.
                let dim = 1usize << targets.len();
                CircuitOp::Multiplexed {
                    controls: controls.clone(),
                    targets: targets.clone(),
                    blocks: (0..1usize << controls.len())
                        .map(|j| Some(shift_matrix(dim, dim - (offset + j) % dim)))
                        .collect(),
                }
            }
        }
    }

    /// Dense `2^n × 2^n` matrix of the op embedded in an `n`-qubit register.
    /// Only intended for small registers (tests, oracles).
    pub fn dense(&self, num_qubits: usize) -> Result<CMatrix> {
        let dim = 1usize << num_qubits;
        let mut out = CMatrix::zeros(dim, dim);
        for col in 0..dim {
            let mut state = vec![ZERO; dim];
            state[col] = ONE;
            super::apply_to_amplitudes(&mut state, num_qubits, self)?;
            for (row, a) in state.into_iter().enumerate() {
                out[(row, col)] = a;
            }
        }
        Ok(out)
    }
}

/// Permutation matrix of `X(j)|k⟩ = |(k + j) mod dim⟩`.
pub fn shift_matrix(dim: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    for k in 0..dim {
        m[((k + j) % dim, k)] = ONE;
    }
    m
}
