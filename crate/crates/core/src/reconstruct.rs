//! Closest separable state from trained parameters.
//!
//! Undoing the mixer `U_C` leaves `Σ_j √p_j |j⟩_C ⊗ ⊗_m |ψ_j^{(m)}⟩`, so the
//! control-register distribution gives the weights and each post-selected
//! branch is a product state. Post-selection is done by slicing amplitudes,
//! not by sampling.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{fix_global_phase, C64};
use crate::purify::{classical_free_state, Family, FreeComponents, PurificationPlan, SeparableTerm, COMPONENT_TOL};
use crate::simulator::{ComplexVectorJson, DensityMatrix, StateVector};

/// Branches lighter than this are dropped before renormalizing.
pub const WEIGHT_CUTOFF: f64 = 1e-12;

/// Each part's marginal in a branch must have at least this purity.
pub const PRODUCT_PURITY_TOL: f64 = 1e-8;

/// Amplitudes below this are skipped when fixing a factor's phase.
const PHASE_TOL: f64 = 1e-12;

/// `Σ_j p_j ⊗_m |ψ_j^{(m)}⟩⟨ψ_j^{(m)}|`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparableEnsemble {
    partition: Vec<usize>,
    probabilities: Vec<f64>,
    components: Vec<Vec<StateVector>>,
}

impl SeparableEnsemble {
    pub fn new(partition: Vec<usize>, probabilities: Vec<f64>, components: Vec<Vec<StateVector>>) -> Result<Self> {
        if probabilities.len() != components.len() {
            return Err(Error::DimensionMismatch { expected: probabilities.len(), found: components.len() });
        }
        let total: f64 = probabilities.iter().sum();
        if probabilities.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > COMPONENT_TOL {
            return Err(Error::InvalidParameters(format!("ensemble weights sum to {total}, not 1")));
        }
        for factors in &components {
            if factors.len() != partition.len() {
                return Err(Error::DimensionMismatch { expected: partition.len(), found: factors.len() });
            }
            for (f, &w) in factors.iter().zip(&partition) {
                if f.num_qubits() != w {
                    return Err(Error::DimensionMismatch { expected: w, found: f.num_qubits() });
                }
                if (f.norm() - 1.0).abs() > COMPONENT_TOL {
                    return Err(Error::InvalidState(format!("component norm {} is not 1", f.norm())));
                }
            }
        }
        Ok(SeparableEnsemble { partition, probabilities, components })
    }

    pub fn partition(&self) -> &[usize] {
        &self.partition
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// One factor per part for each term.
    pub fn components(&self) -> &[Vec<StateVector>] {
        &self.components
    }

    /// Effective cardinality.
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn to_components(&self) -> FreeComponents {
        FreeComponents::Separable {
            partition: self.partition.clone(),
            terms: self
                .probabilities
                .iter()
                .zip(&self.components)
                .map(|(&weight, factors)| SeparableTerm { weight, factors: factors.clone() })
                .collect(),
        }
    }

    pub fn density_matrix(&self) -> Result<DensityMatrix> {
        classical_free_state(&self.to_components())
    }

    pub fn to_json(&self) -> SeparableEnsembleJson {
        SeparableEnsembleJson {
            partition: self.partition.clone(),
            probabilities: self.probabilities.clone(),
            components: self.components.iter().map(|fs| fs.iter().map(StateVector::to_json).collect()).collect(),
        }
    }

    pub fn from_json(json: &SeparableEnsembleJson) -> Result<Self> {
        let components = json
            .components
            .iter()
            .map(|fs| fs.iter().map(|f| StateVector::from_amplitudes(f.to_complex()?)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        SeparableEnsemble::new(json.partition.clone(), json.probabilities.clone(), components)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        SeparableEnsemble::from_json(&serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_json())?)?;
        Ok(())
    }
}

/// Serialized ensemble: weights plus per-part `{re, im}` state vectors.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SeparableEnsembleJson {
    pub partition: Vec<usize>,
    pub probabilities: Vec<f64>,
    pub components: Vec<Vec<ComplexVectorJson>>,
}

/// Reads the separable state encoded by `theta` off the purification.
///
/// Fails if a post-selected branch is not a product across the partition,
/// which would mean the plan or the binding is broken.
pub fn reconstruct_free_state(plan: &PurificationPlan, theta: &[f64]) -> Result<(SeparableEnsemble, DensityMatrix)> {
    if plan.spec().family != Family::Separable {
        return Err(Error::Reconstruction(format!("only the separable family is supported, got {}", plan.spec().family)));
    }
    let bound = plan.circuit().bind(theta)?;
    let mut state = plan.run(theta)?;
    for op in bound[plan.mixer_ops()].iter().rev() {
        state.apply_adjoint_in_place(op)?;
    }

    let regs = plan.registers();
    let control = regs.ancilla();
    let probs = state.register_probabilities(&control)?;
    let kept: f64 = probs.iter().filter(|&&p| p >= WEIGHT_CUTOFF).sum();

    let mut probabilities = Vec::new();
    let mut components = Vec::new();
    for (j, &p) in probs.iter().enumerate() {
        if p < WEIGHT_CUTOFF {
            continue;
        }
        let branch = StateVector::normalized(state.conditional_amplitudes(&control, j)?)?;
        let factors = regs
            .parts
            .iter()
            .enumerate()
            .map(|(m, part)| product_factor(&branch, part, j, m))
            .collect::<Result<Vec<_>>>()?;
        probabilities.push(p / kept);
        components.push(factors);
    }

    let ensemble = SeparableEnsemble::new(plan.spec().partition.clone(), probabilities, components)?;
    let rho = ensemble.density_matrix()?;
    Ok((ensemble, rho))
}

/// Pure factor of `branch` on `part`, checked against the product tolerance.
fn product_factor(branch: &StateVector, part: &[usize], j: usize, m: usize) -> Result<StateVector> {
    let marginal = branch.partial_trace(part)?;
    let purity = marginal.purity();
    if purity < 1.0 - PRODUCT_PURITY_TOL {
        return Err(Error::Reconstruction(format!("branch {j} is not a product state: part {m} has purity {purity}")));
    }
    let (_, vectors) = marginal.eigen();
    let mut amps: Vec<C64> = vectors.column(0).iter().copied().collect();
    fix_global_phase(&mut amps, PHASE_TOL);
    StateVector::normalized(amps)
}
