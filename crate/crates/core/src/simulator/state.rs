use serde::{Deserialize, Serialize};

use super::{apply_unchecked, CircuitOp, DensityMatrix, MAX_QUBITS};
use crate::error::{Error, Result};
use crate::linalg::{bit_mask, for_each_free_index, offsets, CMatrix, C64, ONE, ZERO};

const NORM_TOL: f64 = 1e-10;

/// Unit-norm pure state of `num_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// `|0…0⟩`.
    pub fn zero(num_qubits: usize) -> Self {
        Self::basis(num_qubits, 0)
    }

    pub fn basis(num_qubits: usize, index: usize) -> Self {
        assert!(num_qubits <= MAX_QUBITS, "register too large");
        let mut amplitudes = vec![ZERO; 1 << num_qubits];
        amplitudes[index] = ONE;
        StateVector { num_qubits, amplitudes }
    }

    /// Wraps amplitudes, rejecting lengths that are not a power of two and
    /// vectors whose norm differs from one by more than `1e-10`.
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidState(format!("length {len} is not a power of two ≥ 2")));
        }
        let num_qubits = len.trailing_zeros() as usize;
        if num_qubits > MAX_QUBITS {
            return Err(Error::CapacityExceeded { requested: num_qubits, cap: MAX_QUBITS });
        }
        let state = StateVector { num_qubits, amplitudes };
        let norm = state.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("norm {norm} is not 1")));
        }
        Ok(state)
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(mut amplitudes: Vec<C64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero or non-finite vector".into()));
        }
        for a in amplitudes.iter_mut() {
            *a /= norm;
        }
        Self::from_amplitudes(amplitudes)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Returns `op|self⟩`.
    pub fn apply(&self, op: &CircuitOp) -> Result<StateVector> {
        let mut out = self.clone();
        out.apply_in_place(op)?;
        Ok(out)
    }

    pub fn apply_in_place(&mut self, op: &CircuitOp) -> Result<()> {
        op.check_layout(self.num_qubits)?;
        apply_unchecked(&mut self.amplitudes, op, false);
        Ok(())
    }

    /// Applies `op†` in place.
    pub fn apply_adjoint_in_place(&mut self, op: &CircuitOp) -> Result<()> {
        op.check_layout(self.num_qubits)?;
        apply_unchecked(&mut self.amplitudes, op, true);
        Ok(())
    }

    pub fn apply_all<'a>(&mut self, ops: impl IntoIterator<Item = &'a CircuitOp>) -> Result<()> {
        for op in ops {
            self.apply_in_place(op)?;
        }
        Ok(())
    }

    /// `⟨self|other⟩ = Σ conj(self_i) · other_i`.
    pub fn inner_product(&self, other: &StateVector) -> Result<C64> {
        if self.num_qubits != other.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits,
                found: other.num_qubits,
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `self ⊗ high`: `self` keeps the low qubits, `high` is placed above them.
    pub fn tensor(&self, high: &StateVector) -> Result<StateVector> {
        let num_qubits = self.num_qubits + high.num_qubits;
        if num_qubits > MAX_QUBITS {
            return Err(Error::CapacityExceeded { requested: num_qubits, cap: MAX_QUBITS });
        }
        let mut amplitudes = Vec::with_capacity(1 << num_qubits);
        for h in &high.amplitudes {
            amplitudes.extend(self.amplitudes.iter().map(|l| l * h));
        }
        Ok(StateVector { num_qubits, amplitudes })
    }

    /// Appends `extra` qubits in `|0⟩` above the existing register.
    pub fn pad_qubits(&self, extra: usize) -> Result<StateVector> {
        self.tensor(&StateVector::zero(extra))
    }

    /// Reduced density matrix on `keep`. Bit `i` of the reduced basis index
    /// corresponds to `keep[i]`.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        validate_register(keep, self.num_qubits)?;
        let t_off = offsets(keep);
        let k = t_off.len();
        let mut rho = CMatrix::zeros(k, k);
        let mut buf = vec![ZERO; k];
        for_each_free_index(self.dim(), bit_mask(keep), |base| {
            for (slot, &o) in buf.iter_mut().zip(&t_off) {
                *slot = self.amplitudes[base | o];
            }
            for a in 0..k {
                if buf[a] == ZERO {
                    continue;
                }
                for b in 0..k {
                    rho[(a, b)] += buf[a] * buf[b].conj();
                }
            }
        });
        Ok(DensityMatrix::from_matrix_unchecked(rho))
    }

    /// Marginal outcome distribution of a computational-basis measurement on
    /// `register`; entry `j` is `Pr(|j⟩)` with `register[i]` as bit `i` of `j`.
    pub fn register_probabilities(&self, register: &[usize]) -> Result<Vec<f64>> {
        validate_register(register, self.num_qubits)?;
        let t_off = offsets(register);
        let mut probs = vec![0.0; t_off.len()];
        for_each_free_index(self.dim(), bit_mask(register), |base| {
            for (p, &o) in probs.iter_mut().zip(&t_off) {
                *p += self.amplitudes[base | o].norm_sqr();
            }
        });
        Ok(probs)
    }

    /// Unnormalized slice of the amplitudes where `register` holds `value`,
    /// indexed by the remaining qubits in ascending order.
    pub fn conditional_amplitudes(&self, register: &[usize], value: usize) -> Result<Vec<C64>> {
        validate_register(register, self.num_qubits)?;
        if value >= 1 << register.len() {
            return Err(Error::InvalidRegister(format!("value {value} does not fit the register")));
        }
        let fixed = bit_mask(register);
        let base_off = crate::linalg::deposit(value, register);
        let mut out = Vec::with_capacity(self.dim() >> register.len());
        for_each_free_index(self.dim(), fixed, |base| out.push(self.amplitudes[base | base_off]));
        Ok(out)
    }

    pub fn to_density_matrix(&self) -> DensityMatrix {
        let v = nalgebra::DVector::from_column_slice(&self.amplitudes);
        DensityMatrix::from_matrix_unchecked(&v * v.adjoint())
    }

    pub fn to_json(&self) -> ComplexVectorJson {
        ComplexVectorJson::from_slice(&self.amplitudes)
    }
}

pub(crate) fn validate_register(register: &[usize], num_qubits: usize) -> Result<()> {
    if register.is_empty() {
        return Err(Error::InvalidRegister("register is empty".into()));
    }
    let mut seen = 0usize;
    for &q in register {
        if q >= num_qubits {
            return Err(Error::QubitOutOfRange { qubit: q, num_qubits });
        }
        if seen & (1 << q) != 0 {
            return Err(Error::InvalidRegister(format!("qubit {q} listed twice")));
        }
        seen |= 1 << q;
    }
    Ok(())
}

/// Serialized complex vector: parallel real and imaginary arrays.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ComplexVectorJson {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexVectorJson {
    pub fn from_slice(v: &[C64]) -> Self {
        ComplexVectorJson {
            re: v.iter().map(|z| z.re).collect(),
            im: v.iter().map(|z| z.im).collect(),
        }
    }

    pub fn to_complex(&self) -> Result<Vec<C64>> {
        if self.re.len() != self.im.len() {
            return Err(Error::DimensionMismatch { expected: self.re.len(), found: self.im.len() });
        }
        Ok(self.re.iter().zip(&self.im).map(|(&r, &i)| C64::new(r, i)).collect())
    }
}
