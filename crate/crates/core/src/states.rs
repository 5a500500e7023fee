//! Benchmark mixed states and Kraus channels.
//!
//! Qubit order is little-endian throughout: the first qubit named in a ket
//! such as `|abc⟩` is qubit 0.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::linalg::{bit_mask, extract, max_abs_diff, CMatrix, C64, ONE, ZERO};
use crate::simulator::{DensityMatrix, StateVector};

/// Completeness tolerance for `Σ K† K = I`.
pub const COMPLETENESS_TOL: f64 = 1e-10;

/// Rejects noise parameters outside `[0, 1]` (and NaN).
pub fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParameters(format!("noise parameter {p} is outside [0, 1]")))
    }
}

/// Trace-preserving channel given by its Kraus operators.
#[derive(Clone, Debug)]
pub struct KrausChannel {
    kraus_ops: Vec<CMatrix>,
}

impl KrausChannel {
    pub fn new(kraus_ops: Vec<CMatrix>) -> Result<Self> {
        let dim = kraus_ops
            .first()
            .ok_or_else(|| Error::InvalidChannel("no Kraus operators".into()))?
            .nrows();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::InvalidChannel(format!("dimension {dim} is not a power of two ≥ 2")));
        }
        let mut sum = CMatrix::zeros(dim, dim);
        for k in &kraus_ops {
            if k.nrows() != dim || k.ncols() != dim {
                return Err(Error::InvalidChannel(format!(
                    "Kraus operator is {}×{}, expected {dim}×{dim}",
                    k.nrows(),
                    k.ncols()
                )));
            }
            sum += k.adjoint() * k;
        }
        let dev = max_abs_diff(&sum, &CMatrix::identity(dim, dim));
        if !(dev <= COMPLETENESS_TOL) {
            return Err(Error::InvalidChannel(format!("Σ K†K deviates from I by {dev:.3e}")));
        }
        Ok(KrausChannel { kraus_ops })
    }

    pub fn identity(num_qubits: usize) -> Self {
        let d = 1usize << num_qubits;
        KrausChannel { kraus_ops: vec![CMatrix::identity(d, d)] }
    }

    /// Single-qubit dephasing `K_0 = |0⟩⟨0| + √(1−p)|1⟩⟨1|`, `K_1 = √p|1⟩⟨1|`.
    pub fn dephasing(p: f64) -> Result<Self> {
        check_probability(p)?;
        let k0 = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, C64::new((1.0 - p).sqrt(), 0.0)]);
        let k1 = CMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, C64::new(p.sqrt(), 0.0)]);
        KrausChannel::new(vec![k0, k1])
    }

    pub fn kraus_ops(&self) -> &[CMatrix] {
        &self.kraus_ops
    }

    pub fn num_qubits(&self) -> usize {
        self.kraus_ops[0].nrows().trailing_zeros() as usize
    }
}

/// `Σ_i (K_i on targets) ρ (K_i on targets)†`, with bit `i` of the channel
/// index on qubit `targets[i]`.
pub fn apply_channel(rho: &DensityMatrix, channel: &KrausChannel, targets: &[usize]) -> Result<DensityMatrix> {
    let n = rho.num_qubits();
    if targets.len() != channel.num_qubits() {
        return Err(Error::DimensionMismatch { expected: channel.num_qubits(), found: targets.len() });
    }
    if let Some(&q) = targets.iter().find(|&&q| q >= n) {
        return Err(Error::QubitOutOfRange { qubit: q, num_qubits: n });
    }
    if bit_mask(targets).count_ones() as usize != targets.len() {
        return Err(Error::InvalidRegister("repeated target qubit".into()));
    }
    let mut out = CMatrix::zeros(rho.dim(), rho.dim());
    for k in channel.kraus_ops() {
        let full = embed(k, targets, n);
        out += &full * rho.matrix() * full.adjoint();
    }
    DensityMatrix::new(out)
}

/// `op` acting on `targets` of an `n`-qubit register, identity elsewhere.
fn embed(op: &CMatrix, targets: &[usize], n: usize) -> CMatrix {
    let dim = 1usize << n;
    let mask = bit_mask(targets);
    CMatrix::from_fn(dim, dim, |r, c| {
        if r & !mask == c & !mask {
            op[(extract(r, targets), extract(c, targets))]
        } else {
            ZERO
        }
    })
}

fn pure(amps: Vec<C64>) -> DensityMatrix {
    StateVector::normalized(amps).expect("nonzero state").to_density_matrix()
}

/// `p|Φ+⟩⟨Φ+| + (1−p) I/4`.
pub fn werner(p: f64) -> Result<DensityMatrix> {
    check_probability(p)?;
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    let bell = pure(vec![h, ZERO, ZERO, h]);
    DensityMatrix::mixture(&[(p, &bell), (1.0 - p, &DensityMatrix::maximally_mixed(2))])
}

/// `|L_3⟩ = (|+0+⟩ + |−1−⟩)/√2`.
pub fn linear_cluster_3() -> StateVector {
    let amps = (0..8usize)
        .map(|i| {
            let (b0, b1, b2) = (i & 1, (i >> 1) & 1, (i >> 2) & 1);
            // |+⟩ ⊗ |+⟩ on the outer qubits contributes 1/2; |−⟩ ⊗ |−⟩ a sign per 1
            let v = if b1 == 1 && b0 != b2 { -0.5 } else { 0.5 };
            C64::new(v * FRAC_1_SQRT_2, 0.0)
        })
        .collect();
    StateVector::from_amplitudes(amps).expect("normalized by construction")
}

/// `(E_z ⊗ E_z ⊗ E_z)(|L_3⟩⟨L_3|)` with [`KrausChannel::dephasing`].
pub fn dephased_cluster(p: f64) -> Result<DensityMatrix> {
    let channel = KrausChannel::dephasing(p)?;
    let mut rho = linear_cluster_3().to_density_matrix();
    for q in 0..3 {
        rho = apply_channel(&rho, &channel, &[q])?;
    }
    Ok(rho)
}

/// `|Φ_jk⟩ = (|j,0⟩ + e^{iπk}|j⊕1,1⟩)/√2` on two qubits.
pub fn bell_state(j: usize, k: usize) -> StateVector {
    let mut amps = vec![ZERO; 4];
    amps[j & 1] = C64::new(FRAC_1_SQRT_2, 0.0);
    amps[((j ^ 1) & 1) | 2] = C64::new(if k & 1 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 }, 0.0);
    StateVector::from_amplitudes(amps).expect("normalized by construction")
}

/// `(1/4) Σ_jk |Φ_jk⟩⟨Φ_jk|_AB ⊗ |Φ_jk⟩⟨Φ_jk|_CD` with AB on qubits 0, 1 and CD on 2, 3.
pub fn smolin() -> DensityMatrix {
    let mut m = CMatrix::zeros(16, 16);
    for j in 0..2 {
        for k in 0..2 {
            let b = bell_state(j, k);
            let v = b.tensor(&b).expect("two qubits each");
            let col = CMatrix::from_column_slice(16, 1, v.amplitudes());
            m += &col * col.adjoint() * C64::new(0.25, 0.0);
        }
    }
    DensityMatrix::new(m).expect("Bell mixture is a density matrix")
}

/// `(1−p) ρ_S + (p/16) I`.
pub fn noisy_smolin(p: f64) -> Result<DensityMatrix> {
    check_probability(p)?;
    DensityMatrix::mixture(&[(1.0 - p, &smolin()), (p, &DensityMatrix::maximally_mixed(4))])
}
