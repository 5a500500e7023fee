//! Overlap fidelity between the fixed and variational purifications.
//!
//! By Uhlmann's theorem `|⟨Ψ(ρ)|Φ(θ)⟩|² ≤ F(ρ, Tr_anc |Φ(θ)⟩⟨Φ(θ)|)`, with
//! equality at the optimal `θ` when the ansatz is expressive enough, so the
//! trained `1 − √F` upper-bounds half the Bures resource.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::purify::PurificationPlan;
use crate::simulator::{CircuitOp, DensityMatrix, StateVector, MAX_QUBITS};

/// Added under the square root of the training cost so its derivative stays
/// finite at zero overlap.
pub const FIDELITY_GUARD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FidelityMode {
    Exact,
    Shots,
    SwapCircuit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityEstimate {
    pub value: f64,
    pub mode: FidelityMode,
    pub shots: Option<u64>,
    pub std_error: Option<f64>,
}

impl FidelityEstimate {
    fn exact(value: f64, mode: FidelityMode) -> Self {
        FidelityEstimate { value, mode, shots: None, std_error: None }
    }
}

/// `|⟨ψ|φ⟩|²`.
pub fn overlap_fidelity(psi: &StateVector, phi: &StateVector) -> Result<FidelityEstimate> {
    Ok(FidelityEstimate::exact(psi.inner_product(phi)?.norm_sqr(), FidelityMode::Exact))
}

/// Shot-sampled SWAP test: the ancilla reads 0 with `P₀ = (1 + |⟨ψ|φ⟩|²)/2`;
/// the zero count over `shots` trials is one binomial draw. Returns
/// `F̂ = 2P̂₀ − 1` (not clamped) with its propagated standard error.
pub fn swap_test_sample(psi: &StateVector, phi: &StateVector, shots: u64, seed: u64) -> Result<FidelityEstimate> {
    if shots == 0 {
        return Err(Error::InvalidConfig("shots must be at least 1".into()));
    }
    let f = psi.inner_product(phi)?.norm_sqr();
    let p0 = ((1.0 + f) / 2.0).clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zeros = Binomial::new(shots, p0)
        .map_err(|e| Error::InvalidParameters(format!("binomial sampler: {e}")))?
        .sample(&mut rng);
    let p_hat = zeros as f64 / shots as f64;
    Ok(FidelityEstimate {
        value: 2.0 * p_hat - 1.0,
        mode: FidelityMode::Shots,
        shots: Some(shots),
        std_error: Some((4.0 * p_hat * (1.0 - p_hat) / shots as f64).sqrt()),
    })
}

/// Exact simulation of the `2m + 1`-qubit SWAP-test circuit: ancilla on
/// qubit 0, `ψ` on qubits `1..=m`, `φ` on `m+1..=2m`; H, controlled swaps of
/// matching qubits, H, then `F = 2P₀ − 1`.
pub fn swap_circuit_fidelity(psi: &StateVector, phi: &StateVector) -> Result<FidelityEstimate> {
    let m = psi.num_qubits();
    if phi.num_qubits() != m {
        return Err(Error::DimensionMismatch { expected: m, found: phi.num_qubits() });
    }
    if 2 * m + 1 > MAX_QUBITS {
        return Err(Error::CapacityExceeded { requested: 2 * m + 1, cap: MAX_QUBITS });
    }
    let mut state = StateVector::zero(1).tensor(psi)?.tensor(phi)?;
    state.apply_in_place(&CircuitOp::hadamard(0))?;
    for q in 0..m {
        state.apply_in_place(&CircuitOp::fredkin(0, 1 + q, 1 + m + q))?;
    }
    state.apply_in_place(&CircuitOp::hadamard(0))?;
    let p0 = state.register_probabilities(&[0])?[0];
    Ok(FidelityEstimate::exact(2.0 * p0 - 1.0, FidelityMode::SwapCircuit))
}

/// Bures cost `2(1 − √F)`, with sampling noise below zero clamped away.
pub fn bures_cost(f: &FidelityEstimate) -> f64 {
    2.0 * half_bures(f.value)
}

/// `R/2 = 1 − √F`, the quantity plotted against the noise parameter.
pub fn half_bures(fidelity: f64) -> f64 {
    1.0 - fidelity.max(0.0).sqrt()
}

/// Cost minimized during training: `1 − √(F + guard)`.
pub fn training_cost(fidelity: f64) -> f64 {
    1.0 - (fidelity.max(0.0) + FIDELITY_GUARD).sqrt()
}

/// A plan together with the fixed purification of its target.
#[derive(Clone, Debug)]
pub struct PurificationObjective {
    plan: PurificationPlan,
    target: StateVector,
}

impl PurificationObjective {
    pub fn new(plan: PurificationPlan, rho: &DensityMatrix) -> Result<Self> {
        let target = plan.fixed_target(rho)?;
        Ok(PurificationObjective { plan, target })
    }

    pub fn plan(&self) -> &PurificationPlan {
        &self.plan
    }

    pub fn target(&self) -> &StateVector {
        &self.target
    }

    pub fn num_params(&self) -> usize {
        self.plan.num_params()
    }

    /// Exact overlap fidelity at `params`.
    pub fn fidelity(&self, params: &[f64]) -> Result<f64> {
        Ok(overlap_fidelity(&self.target, &self.plan.run(params)?)?.value)
    }

    /// Fidelity estimate at `params`, sampled when `shots` is set.
    pub fn estimate(&self, params: &[f64], shots: Option<u64>, seed: u64) -> Result<FidelityEstimate> {
        let phi = self.plan.run(params)?;
        match shots {
            None => overlap_fidelity(&self.target, &phi),
            Some(s) => swap_test_sample(&self.target, &phi, s, seed),
        }
    }

    /// `R/2` at `params` from the exact overlap.
    pub fn half_bures(&self, params: &[f64]) -> Result<f64> {
        Ok(half_bures(self.fidelity(params)?))
    }
}
