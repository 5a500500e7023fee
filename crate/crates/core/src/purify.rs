//! Fixed purification of the target and variational purifications of free states.
//!
//! System qubits come first (`0..n`, parts contiguous in partition order) and
//! ancilla registers follow. Every plan traces out all ancillas, so a free
//! state is always `Tr_anc |Φ(θ)⟩⟨Φ(θ)|`.
//!
//! Register use per family:
//! - separable: `c1` = C (`n_C` qubits).
//! - biseparable: `c1` = C_1 (`n_C` qubits, cardinality), `c2` = C_2 (bipartition label).
//! - quantum-classical: `c1` = C_1 (width of B), `c2` = C_2 (width of A).
//! - incoherent: `c1` = the copy register B (width of A).
//! - product: `c1` = C_1 (width of A), `c2` = C_2 (width of B).

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ansatz::{AnsatzConfig, Generator, ParamCircuit};
use crate::error::{Error, Result};
use crate::linalg::{bit_mask, extract, fix_global_phase, max_abs_diff, CMatrix, C64, ZERO};
use crate::simulator::{CircuitOp, DensityMatrix, StateVector, MAX_QUBITS};

/// Eigenvalues of the target below this are dropped from the purification.
pub const EIGEN_CUTOFF: f64 = 1e-12;

/// Neighbouring eigenvalues closer than this are treated as one degenerate cluster.
const DEGENERACY_TOL: f64 = 1e-10;

/// Tolerance on probabilities and norms accepted by [`classical_free_state`].
pub const COMPONENT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Separable,
    Biseparable,
    QuantumClassical,
    Incoherent,
    Product,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Separable,
        Family::Biseparable,
        Family::QuantumClassical,
        Family::Incoherent,
        Family::Product,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Separable => "separable",
            Family::Biseparable => "biseparable",
            Family::QuantumClassical => "quantum-classical",
            Family::Incoherent => "incoherent",
            Family::Product => "product",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown family '{s}'")))
    }
}

/// Which free set to project onto and how large the ancilla is.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceSpec {
    pub family: Family,
    /// Qubits per part.
    pub partition: Vec<usize>,
    /// Width `n_C` of the cardinality register (`K = 2^{n_C}` terms).
    pub control_qubits: usize,
}

impl ResourceSpec {
    pub fn num_system_qubits(&self) -> usize {
        self.partition.iter().sum()
    }

    /// System qubits of each part, contiguous and in partition order.
    pub fn part_qubits(&self) -> Vec<Vec<usize>> {
        let mut start = 0;
        self.partition
            .iter()
            .map(|&w| {
                let part = (start..start + w).collect();
                start += w;
                part
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let parts = self.partition.len();
        if self.partition.contains(&0) {
            return Err(Error::InvalidSpec("partition contains an empty part".into()));
        }
        let ok = match self.family {
            Family::Separable => parts >= 2,
            Family::Biseparable => parts >= 3,
            Family::QuantumClassical | Family::Product => parts == 2,
            Family::Incoherent => parts == 1,
        };
        if !ok {
            return Err(Error::InvalidSpec(format!(
                "family {} does not accept a partition into {parts} parts",
                self.family
            )));
        }
        let n = self.num_system_qubits();
        if self.control_qubits < n {
            return Err(Error::InvalidSpec(format!(
                "control register of {} qubits cannot hold the {}-qubit purification",
                self.control_qubits, n
            )));
        }
        Ok(())
    }
}

/// Canonical eigenpairs of `ρ` kept in the purification: eigenvalues in
/// descending order, each degenerate cluster re-expressed in the basis obtained
/// by Gram–Schmidt on the projected standard basis vectors, each vector with
/// its first non-negligible component real and positive.
pub fn canonical_eigenpairs(rho: &DensityMatrix) -> Vec<(f64, Vec<C64>)> {
    let (values, vectors) = rho.eigen();
    let d = values.len();
    let mut out = Vec::new();
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && values[end - 1] - values[end] <= DEGENERACY_TOL {
            end += 1;
        }
        if values[start] >= EIGEN_CUTOFF {
            let cluster = vectors.columns(start, end - start).into_owned();
            for v in cluster_basis(&cluster) {
                let col = CMatrix::from_column_slice(d, 1, &v);
                let r = (col.adjoint() * rho.matrix() * &col)[(0, 0)].re;
                if r >= EIGEN_CUTOFF {
                    out.push((r, v));
                }
            }
        }
        start = end;
    }
    out
}

fn cluster_basis(cluster: &CMatrix) -> Vec<Vec<C64>> {
    let (d, k) = cluster.shape();
    let projector = cluster * cluster.adjoint();
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(k);
    for i in 0..d {
        if basis.len() == k {
            break;
        }
        let mut v: Vec<C64> = projector.column(i).iter().copied().collect();
        // two Gram–Schmidt passes for numerical orthogonality
        for _ in 0..2 {
            for b in &basis {
                let overlap: C64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                for (y, x) in v.iter_mut().zip(b) {
                    *y -= overlap * x;
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|z| *z /= norm);
            fix_global_phase(&mut v, 1e-10);
            basis.push(v);
        }
    }
    basis
}

/// `|Ψ(ρ)⟩ = Σ_j √r_j |φ_j⟩_sys |j⟩_anc` over `n + ancilla_qubits` qubits, the
/// system on the low qubits and unused ancilla values zero.
pub fn fixed_purification(rho: &DensityMatrix, ancilla_qubits: usize) -> Result<StateVector> {
    let n = rho.num_qubits();
    if ancilla_qubits < n {
        return Err(Error::InvalidSpec(format!(
            "ancilla of {ancilla_qubits} qubits cannot purify a {n}-qubit state"
        )));
    }
    if n + ancilla_qubits > MAX_QUBITS {
        return Err(Error::CapacityExceeded { requested: n + ancilla_qubits, cap: MAX_QUBITS });
    }
    let dim = 1usize << n;
    let mut amps = vec![ZERO; 1usize << (n + ancilla_qubits)];
    for (j, (r, v)) in canonical_eigenpairs(rho).into_iter().enumerate() {
        let w = r.sqrt();
        for (s, z) in v.into_iter().enumerate() {
            amps[s + dim * j] = z * w;
        }
    }
    StateVector::normalized(amps)
}

/// Named parameter slices; together they cover `0..num_params` exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamLayout {
    pub v_c: Range<usize>,
    pub controlled_blocks: Range<usize>,
    pub u_c: Range<usize>,
    pub extra: Range<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Registers {
    /// System qubits of each part.
    pub parts: Vec<Vec<usize>>,
    pub c1: Vec<usize>,
    pub c2: Vec<usize>,
}

impl Registers {
    pub fn system(&self) -> Vec<usize> {
        self.parts.concat()
    }

    pub fn ancilla(&self) -> Vec<usize> {
        [self.c1.as_slice(), self.c2.as_slice()].concat()
    }
}

/// Positions of the ops component extraction needs.
#[derive(Clone, Debug, Default)]
struct OpIndex {
    blocks: Vec<usize>,
    extra: Vec<usize>,
    mixer: Range<usize>,
}

/// A variational purification `|Φ(θ)⟩` of a free-family state.
#[derive(Clone, Debug)]
pub struct PurificationPlan {
    spec: ResourceSpec,
    config: AnsatzConfig,
    registers: Registers,
    circuit: ParamCircuit,
    layout: ParamLayout,
    ops: OpIndex,
}

impl PurificationPlan {
    pub fn build(spec: &ResourceSpec, config: &AnsatzConfig) -> Result<Self> {
        spec.validate()?;
        config.validate()?;
        match spec.family {
            Family::Separable => build_separable(spec, config),
            Family::Biseparable => build_biseparable(spec, config),
            Family::QuantumClassical => build_qc(spec, config),
            Family::Incoherent => build_incoherent(spec, config),
            Family::Product => build_product(spec, config),
        }
    }

    pub fn spec(&self) -> &ResourceSpec {
        &self.spec
    }

    pub fn config(&self) -> &AnsatzConfig {
        &self.config
    }

    pub fn registers(&self) -> &Registers {
        &self.registers
    }

    pub fn circuit(&self) -> &ParamCircuit {
        &self.circuit
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn num_params(&self) -> usize {
        self.circuit.num_params()
    }

    pub fn system_qubits(&self) -> usize {
        self.spec.num_system_qubits()
    }

    pub fn total_qubits(&self) -> usize {
        self.circuit.num_qubits()
    }

    /// Op positions of the final mixer on the control register.
    pub(crate) fn mixer_ops(&self) -> Range<usize> {
        self.ops.mixer.clone()
    }

    /// Fixed purification of `rho` on this plan's full register.
    pub fn fixed_target(&self, rho: &DensityMatrix) -> Result<StateVector> {
        if rho.num_qubits() != self.system_qubits() {
            return Err(Error::DimensionMismatch { expected: self.system_qubits(), found: rho.num_qubits() });
        }
        fixed_purification(rho, self.total_qubits() - self.system_qubits())
    }

    pub fn run(&self, params: &[f64]) -> Result<StateVector> {
        self.circuit.run(params)
    }

    /// `Tr_anc |Φ(θ)⟩⟨Φ(θ)|`.
    pub fn reduced_state(&self, params: &[f64]) -> Result<DensityMatrix> {
        self.run(params)?.partial_trace(&self.registers.system())
    }

    /// The free-state components encoded by `params`.
    pub fn components(&self, params: &[f64]) -> Result<FreeComponents> {
        let bound = self.circuit.bind(params)?;
        let mut prefix = StateVector::zero(self.total_qubits());
        prefix.apply_all(&bound[..self.ops.mixer.start])?;
        let regs = &self.registers;
        let block = |op: usize, v: usize| -> CMatrix {
            match &bound[op] {
                CircuitOp::Multiplexed { blocks, .. } => blocks[v].clone().expect("every block is parameterized"),
                CircuitOp::Unitary { matrix, .. } => matrix.clone(),
                _ => unreachable!("component ops are parameterized blocks"),
            }
        };
        let first_column = |m: &CMatrix| -> Result<StateVector> { StateVector::normalized(m.column(0).iter().copied().collect()) };
        Ok(match self.spec.family {
            Family::Separable => {
                let probs = prefix.register_probabilities(&regs.c1)?;
                let terms = probs
                    .into_iter()
                    .enumerate()
                    .map(|(j, weight)| {
                        let factors = self
                            .ops
                            .blocks
                            .iter()
                            .map(|&op| first_column(&block(op, j)))
                            .collect::<Result<_>>()?;
                        Ok(SeparableTerm { weight, factors })
                    })
                    .collect::<Result<_>>()?;
                FreeComponents::Separable { partition: self.spec.partition.clone(), terms }
            }
            Family::Biseparable => {
                let controls = regs.ancilla();
                let probs = prefix.register_probabilities(&controls)?;
                let nc = regs.c1.len();
                let count = bipartition_count(regs.parts.len());
                let terms = probs
                    .into_iter()
                    .enumerate()
                    .map(|(v, weight)| {
                        let b = (v >> nc) % count;
                        let (side_b, side_bbar) = bipartition_sides(&regs.parts, b);
                        Ok(BiseparableTerm {
                            weight,
                            side_b,
                            side_bbar,
                            psi_b: first_column(&block(self.ops.blocks[2 * b], v))?,
                            psi_bbar: first_column(&block(self.ops.blocks[2 * b + 1], v))?,
                        })
                    })
                    .collect::<Result<_>>()?;
                FreeComponents::Biseparable { num_qubits: self.system_qubits(), terms }
            }
            Family::QuantumClassical => {
                let probs = prefix.register_probabilities(&regs.parts[1])?;
                let u_b = block(self.ops.extra[0], 0);
                let terms = probs
                    .into_iter()
                    .enumerate()
                    .map(|(j, weight)| {
                        let v_j = block(self.ops.blocks[0], j);
                        let u_j = block(self.ops.blocks[1], j);
                        let diag: Vec<C64> = v_j.column(0).iter().map(|c| C64::new(c.norm_sqr(), 0.0)).collect();
                        let rho_a = &u_j * CMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)) * u_j.adjoint();
                        Ok(QuantumClassicalTerm {
                            weight,
                            rho_a: DensityMatrix::new(rho_a)?,
                            phi_b: StateVector::normalized(u_b.column(j).iter().copied().collect())?,
                        })
                    })
                    .collect::<Result<_>>()?;
                FreeComponents::QuantumClassical { terms }
            }
            Family::Incoherent => FreeComponents::Incoherent {
                probabilities: prefix.register_probabilities(&regs.parts[0])?,
            },
            Family::Product => {
                let mixed = |probs: Vec<f64>, u: CMatrix| -> Result<DensityMatrix> {
                    let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                        probs.len(),
                        probs.iter().map(|&p| C64::new(p, 0.0)),
                    ));
                    DensityMatrix::new(&u * d * u.adjoint())
                };
                FreeComponents::Product {
                    rho_a: mixed(prefix.register_probabilities(&regs.c1)?, block(self.ops.extra[1], 0))?,
                    rho_b: mixed(prefix.register_probabilities(&regs.c2)?, block(self.ops.extra[0], 0))?,
                }
            }
        })
    }

    /// Deviation of the traced purification from the family's structural
    /// test: assembly equality (separable, biseparable), off-diagonal size
    /// (incoherent), off-block size after undoing `U_B` (quantum-classical),
    /// or distance from the product of its marginals (product).
    pub fn membership_deviation(&self, params: &[f64]) -> Result<f64> {
        let rho = self.reduced_state(params)?;
        let m = rho.matrix();
        Ok(match self.spec.family {
            Family::Separable | Family::Biseparable => {
                max_abs_diff(m, classical_free_state(&self.components(params)?)?.matrix())
            }
            Family::Incoherent => {
                let mut worst: f64 = 0.0;
                for r in 0..m.nrows() {
                    for c in 0..m.ncols() {
                        if r != c {
                            worst = worst.max(m[(r, c)].norm());
                        }
                    }
                }
                worst
            }
            Family::Product => {
                let a = rho.partial_trace(&self.registers.parts[0])?;
                let b = rho.partial_trace(&self.registers.parts[1])?;
                max_abs_diff(m, a.tensor(&b).matrix())
            }
            Family::QuantumClassical => {
                let bound = self.circuit.bind(params)?;
                let u_b = match &bound[self.ops.extra[0]] {
                    CircuitOp::Unitary { matrix, .. } => matrix.clone(),
                    _ => unreachable!("U_B is a single gate"),
                };
                let wa = self.spec.partition[0];
                // I_A ⊗ U_B† with A on the low qubits
                let full = u_b.adjoint().kronecker(&CMatrix::identity(1 << wa, 1 << wa));
                let rotated = &full * m * full.adjoint();
                let mut worst: f64 = 0.0;
                for r in 0..rotated.nrows() {
                    for c in 0..rotated.ncols() {
                        if (r >> wa) != (c >> wa) {
                            worst = worst.max(rotated[(r, c)].norm());
                        }
                    }
                }
                worst
            }
        })
    }
}

fn ceil_log2(x: usize) -> usize {
    if x <= 1 {
        0
    } else {
        (usize::BITS - (x - 1).leading_zeros()) as usize
    }
}

/// Number of bipartitions of `parts` parts: `2^{M−1} − 1`.
pub fn bipartition_count(parts: usize) -> usize {
    (1usize << (parts - 1)) - 1
}

/// Qubits on each side of bipartition `index`. Side B always holds part 0;
/// bit `m − 1` of `index` moves part `m` onto side B. Index 0 is `1|23…`.
pub fn bipartition_sides(parts: &[Vec<usize>], index: usize) -> (Vec<usize>, Vec<usize>) {
    let mut b = parts[0].clone();
    let mut bbar = Vec::new();
    for (m, part) in parts.iter().enumerate().skip(1) {
        if index >> (m - 1) & 1 == 1 {
            b.extend(part);
        } else {
            bbar.extend(part);
        }
    }
    (b, bbar)
}

fn finish(
    spec: &ResourceSpec,
    config: &AnsatzConfig,
    registers: Registers,
    circuit: ParamCircuit,
    layout: ParamLayout,
    ops: OpIndex,
) -> Result<PurificationPlan> {
    circuit.validate()?;
    debug_assert_eq!(layout.extra.end.max(layout.u_c.end), circuit.num_params());
    Ok(PurificationPlan { spec: spec.clone(), config: *config, registers, circuit, layout, ops })
}

fn check_width(total: usize) -> Result<()> {
    if total > MAX_QUBITS {
        return Err(Error::CapacityExceeded { requested: total, cap: MAX_QUBITS });
    }
    Ok(())
}

fn build_separable(spec: &ResourceSpec, config: &AnsatzConfig) -> Result<PurificationPlan> {
    let n = spec.num_system_qubits();
    let nc = spec.control_qubits;
    check_width(n + nc)?;
    let parts = spec.part_qubits();
    let c: Vec<usize> = (n..n + nc).collect();
    let mut circuit = ParamCircuit::new(n + nc);
    let v_c = circuit.append(&config.entangler(nc)?, &c)?;
    let start = circuit.num_params();
    let mut blocks = Vec::new();
    for part in &parts {
        blocks.push(circuit.len());
        circuit.push_multiplexed(c.clone(), part.clone(), vec![Some(Generator::general(part.len())); 1 << nc])?;
    }
    let controlled_blocks = start..circuit.num_params();
    let mixer_start = circuit.len();
    let u_c = circuit.append(&config.mixer(nc)?, &c)?;
    let end = circuit.num_params();
    let ops = OpIndex { blocks, extra: Vec::new(), mixer: mixer_start..circuit.len() };
    let layout = ParamLayout { v_c, controlled_blocks, u_c, extra: end..end };
    finish(spec, config, Registers { parts, c1: c, c2: Vec::new() }, circuit, layout, ops)
}

fn build_biseparable(spec: &ResourceSpec, config: &AnsatzConfig) -> Result<PurificationPlan> {
    let n = spec.num_system_qubits();
    let nc = spec.control_qubits;
    let parts = spec.part_qubits();
    let count = bipartition_count(parts.len());
    let w2 = ceil_log2(count);
    check_width(n + nc + w2)?;
    let c1: Vec<usize> = (n..n + nc).collect();
    let c2: Vec<usize> = (n + nc..n + nc + w2).collect();
    let controls = [c1.as_slice(), c2.as_slice()].concat();
    let mut circuit = ParamCircuit::new(n + nc + w2);
    let v_c = circuit.append(&config.entangler(nc + w2)?, &controls)?;
    let start = circuit.num_params();
    let mut blocks = Vec::new();
    for b in 0..count {
        let (side_b, side_bbar) = bipartition_sides(&parts, b);
        for side in [side_b, side_bbar] {
            // unused label values alias bipartition `label mod count`
            let gens = (0..1usize << controls.len())
                .map(|v| ((v >> nc) % count == b).then(|| Generator::general(side.len())))
                .collect();
            blocks.push(circuit.len());
            circuit.push_multiplexed(controls.clone(), side, gens)?;
        }
    }
    let controlled_blocks = start..circuit.num_params();
    let mixer_start = circuit.len();
    let u_c = circuit.append(&config.mixer(nc + w2)?, &controls)?;
    let end = circuit.num_params();
    let ops = OpIndex { blocks, extra: Vec::new(), mixer: mixer_start..circuit.len() };
    let layout = ParamLayout { v_c, controlled_blocks, u_c, extra: end..end };
    finish(spec, config, Registers { parts, c1, c2 }, circuit, layout, ops)
}

fn build_qc(spec: &ResourceSpec, config: &AnsatzConfig) -> Result<PurificationPlan> {
    let n = spec.num_system_qubits();
    let parts = spec.part_qubits();
    let (a, b) = (parts[0].clone(), parts[1].clone());
    let (wa, wb) = (a.len(), b.len());
    check_width(2 * n)?;
    let c1: Vec<usize> = (n..n + wb).collect();
    let c2: Vec<usize> = (n + wb..2 * n).collect();
    let mut circuit = ParamCircuit::new(2 * n);
    let v_c = circuit.append(&config.entangler(wb)?, &b)?;
    circuit.push_fixed(CircuitOp::controlled_shift(b.clone(), c1.clone()))?;
    let start = circuit.num_params();
    let mut blocks = vec![circuit.len()];
    circuit.push_multiplexed(c1.clone(), c2.clone(), vec![Some(Generator::general(wa)); 1 << wb])?;
    circuit.push_fixed(CircuitOp::controlled_shift(c2.clone(), a.clone()))?;
    blocks.push(circuit.len());
    circuit.push_multiplexed(b.clone(), a.clone(), vec![Some(Generator::general(wa)); 1 << wb])?;
    let controlled_blocks = start..circuit.num_params();
    let mixer_start = circuit.len();
    let anc = [c1.as_slice(), c2.as_slice()].concat();
    let u_c = circuit.append(&config.mixer(n)?, &anc)?;
    let mixer = mixer_start..circuit.len();
    let extra_start = circuit.num_params();
    let extra_ops = vec![circuit.len()];
    circuit.push_gate(b.clone(), Generator::general(wb))?;
    let layout = ParamLayout { v_c, controlled_blocks, u_c, extra: extra_start..circuit.num_params() };
    let ops = OpIndex { blocks, extra: extra_ops, mixer };
    finish(spec, config, Registers { parts, c1, c2 }, circuit, layout, ops)
}

fn build_incoherent(spec: &ResourceSpec, config: &AnsatzConfig) -> Result<PurificationPlan> {
    let n = spec.num_system_qubits();
    check_width(2 * n)?;
    let parts = spec.part_qubits();
    let a = parts[0].clone();
    let b: Vec<usize> = (n..2 * n).collect();
    let mut circuit = ParamCircuit::new(2 * n);
    let v_c = circuit.append(&config.entangler(n)?, &a)?;
    circuit.push_fixed(CircuitOp::controlled_shift(a, b.clone()))?;
    let mid = circuit.num_params();
    let mixer_start = circuit.len();
    let u_c = circuit.append(&config.mixer(n)?, &b)?;
    let end = circuit.num_params();
    let ops = OpIndex { blocks: Vec::new(), extra: Vec::new(), mixer: mixer_start..circuit.len() };
    let layout = ParamLayout { v_c, controlled_blocks: mid..mid, u_c, extra: end..end };
    finish(spec, config, Registers { parts, c1: b, c2: Vec::new() }, circuit, layout, ops)
}

fn build_product(spec: &ResourceSpec, config: &AnsatzConfig) -> Result<PurificationPlan> {
    let n = spec.num_system_qubits();
    check_width(2 * n)?;
    let parts = spec.part_qubits();
    let (a, b) = (parts[0].clone(), parts[1].clone());
    let c1: Vec<usize> = (n..n + a.len()).collect();
    let c2: Vec<usize> = (n + a.len()..2 * n).collect();
    let mut circuit = ParamCircuit::new(2 * n);
    let v1 = circuit.append(&config.entangler(a.len())?, &c1)?;
    let v2 = circuit.append(&config.entangler(b.len())?, &c2)?;
    circuit.push_fixed(CircuitOp::controlled_shift(c1.clone(), a.clone()))?;
    circuit.push_fixed(CircuitOp::controlled_shift(c2.clone(), b.clone()))?;
    let mid = circuit.num_params();
    let mixer_start = circuit.len();
    let anc = [c1.as_slice(), c2.as_slice()].concat();
    let u_c = circuit.append(&config.mixer(n)?, &anc)?;
    let mixer = mixer_start..circuit.len();
    let extra_start = circuit.num_params();
    let extra_ops = vec![circuit.len(), circuit.len() + 1];
    circuit.push_gate(b.clone(), Generator::general(b.len()))?;
    circuit.push_gate(a.clone(), Generator::general(a.len()))?;
    let layout = ParamLayout {
        v_c: v1.start..v2.end,
        controlled_blocks: mid..mid,
        u_c,
        extra: extra_start..circuit.num_params(),
    };
    let ops = OpIndex { blocks: Vec::new(), extra: extra_ops, mixer };
    finish(spec, config, Registers { parts, c1, c2 }, circuit, layout, ops)
}

/// One term `p_j ⊗_m |ψ_j^{(m)}⟩⟨ψ_j^{(m)}|`.
#[derive(Clone, Debug)]
pub struct SeparableTerm {
    pub weight: f64,
    /// One factor per part, in partition order.
    pub factors: Vec<StateVector>,
}

/// One term `p |ψ⟩⟨ψ|_B ⊗ |ψ̄⟩⟨ψ̄|_B̄`.
#[derive(Clone, Debug)]
pub struct BiseparableTerm {
    pub weight: f64,
    pub side_b: Vec<usize>,
    pub side_bbar: Vec<usize>,
    pub psi_b: StateVector,
    pub psi_bbar: StateVector,
}

/// One term `p_j ρ_j^A ⊗ |φ_j⟩⟨φ_j|_B`.
#[derive(Clone, Debug)]
pub struct QuantumClassicalTerm {
    pub weight: f64,
    pub rho_a: DensityMatrix,
    pub phi_b: StateVector,
}

/// Classical description of a free state, one variant per family.
#[derive(Clone, Debug)]
pub enum FreeComponents {
    Separable { partition: Vec<usize>, terms: Vec<SeparableTerm> },
    Biseparable { num_qubits: usize, terms: Vec<BiseparableTerm> },
    QuantumClassical { terms: Vec<QuantumClassicalTerm> },
    Incoherent { probabilities: Vec<f64> },
    Product { rho_a: DensityMatrix, rho_b: DensityMatrix },
}

fn check_weights(weights: impl Iterator<Item = f64>) -> Result<()> {
    let mut total = 0.0;
    for w in weights {
        if !(w >= -COMPONENT_TOL) {
            return Err(Error::InvalidParameters(format!("negative or non-finite weight {w}")));
        }
        total += w;
    }
    if (total - 1.0).abs() > COMPONENT_TOL {
        return Err(Error::InvalidParameters(format!("weights sum to {total}, not 1")));
    }
    Ok(())
}

fn check_norm(v: &StateVector) -> Result<()> {
    if (v.norm() - 1.0).abs() > COMPONENT_TOL {
        return Err(Error::InvalidState(format!("component norm {} is not 1", v.norm())));
    }
    Ok(())
}

fn add_projector(acc: &mut CMatrix, weight: f64, amps: &[C64]) {
    let v = nalgebra::DVector::from_column_slice(amps);
    *acc += &v * v.adjoint() * C64::new(weight, 0.0);
}

/// Assembles the density matrix described by `components` directly.
pub fn classical_free_state(components: &FreeComponents) -> Result<DensityMatrix> {
    match components {
        FreeComponents::Separable { partition, terms } => {
            check_weights(terms.iter().map(|t| t.weight))?;
            let n: usize = partition.iter().sum();
            let mut acc = CMatrix::zeros(1 << n, 1 << n);
            for t in terms {
                if t.factors.len() != partition.len() {
                    return Err(Error::DimensionMismatch { expected: partition.len(), found: t.factors.len() });
                }
                let mut state = t.factors[0].clone();
                for (f, &w) in t.factors.iter().zip(partition) {
                    check_norm(f)?;
                    if f.num_qubits() != w {
                        return Err(Error::DimensionMismatch { expected: w, found: f.num_qubits() });
                    }
                }
                for f in &t.factors[1..] {
                    state = state.tensor(f)?;
                }
                add_projector(&mut acc, t.weight, state.amplitudes());
            }
            DensityMatrix::new(acc)
        }
        FreeComponents::Biseparable { num_qubits, terms } => {
            check_weights(terms.iter().map(|t| t.weight))?;
            let dim = 1usize << num_qubits;
            let mut acc = CMatrix::zeros(dim, dim);
            for t in terms {
                check_norm(&t.psi_b)?;
                check_norm(&t.psi_bbar)?;
                if bit_mask(&t.side_b) | bit_mask(&t.side_bbar) != dim - 1
                    || t.side_b.len() + t.side_bbar.len() != *num_qubits
                    || t.psi_b.num_qubits() != t.side_b.len()
                    || t.psi_bbar.num_qubits() != t.side_bbar.len()
                {
                    return Err(Error::InvalidRegister("biseparable term does not match its cut".into()));
                }
                let amps: Vec<C64> = (0..dim)
                    .map(|i| {
                        t.psi_b.amplitudes()[extract(i, &t.side_b)] * t.psi_bbar.amplitudes()[extract(i, &t.side_bbar)]
                    })
                    .collect();
                add_projector(&mut acc, t.weight, &amps);
            }
            DensityMatrix::new(acc)
        }
        FreeComponents::QuantumClassical { terms } => {
            check_weights(terms.iter().map(|t| t.weight))?;
            let first = terms.first().ok_or_else(|| Error::InvalidParameters("no terms".into()))?;
            let dim = first.rho_a.dim() * first.phi_b.dim();
            let mut acc = CMatrix::zeros(dim, dim);
            for t in terms {
                check_norm(&t.phi_b)?;
                let phi = t.phi_b.to_density_matrix();
                let block = t.rho_a.tensor(&phi);
                if block.dim() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: block.dim() });
                }
                acc += block.matrix() * C64::new(t.weight, 0.0);
            }
            DensityMatrix::new(acc)
        }
        FreeComponents::Incoherent { probabilities } => {
            check_weights(probabilities.iter().copied())?;
            let d = nalgebra::DVector::from_iterator(probabilities.len(), probabilities.iter().map(|&p| C64::new(p, 0.0)));
            DensityMatrix::new(CMatrix::from_diagonal(&d))
        }
        FreeComponents::Product { rho_a, rho_b } => Ok(rho_a.tensor(rho_b)),
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::random::{random_angles, random_density_matrix, random_state};
    use crate::states::werner;

    fn spec(family: Family, partition: &[usize], nc: usize) -> ResourceSpec {
        ResourceSpec { family, partition: partition.to_vec(), control_qubits: nc }
    }

    fn cfg(l1: usize, l2: usize) -> AnsatzConfig {
        AnsatzConfig { l1, l2, use_arbitrary_u: false }
    }

    fn all_plans() -> Vec<PurificationPlan> {
        let c = cfg(2, 1);
        vec![
            PurificationPlan::build(&spec(Family::Separable, &[1, 1], 2), &c).unwrap(),
            PurificationPlan::build(&spec(Family::Separable, &[1, 2], 3), &c).unwrap(),
            PurificationPlan::build(&spec(Family::Biseparable, &[1, 1, 1], 3), &c).unwrap(),
            PurificationPlan::build(&spec(Family::QuantumClassical, &[1, 1], 2), &c).unwrap(),
            PurificationPlan::build(&spec(Family::QuantumClassical, &[2, 1], 3), &c).unwrap(),
            PurificationPlan::build(&spec(Family::Incoherent, &[2], 2), &c).unwrap(),
            PurificationPlan::build(&spec(Family::Product, &[1, 2], 3), &c).unwrap(),
        ]
    }

    #[test]
    fn fixed_purification_of_maximally_mixed_qubit() {
        let psi = fixed_purification(&DensityMatrix::maximally_mixed(1), 1).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [h, 0.0, 0.0, h];
        for (a, e) in psi.amplitudes().iter().zip(expected) {
            assert!((a - C64::new(e, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn fixed_purification_of_pure_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let psi = random_state(2, &mut rng);
        let out = fixed_purification(&psi.to_density_matrix(), 2).unwrap();
        let expected = psi.pad_qubits(2).unwrap();
        assert!((out.inner_product(&expected).unwrap().norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fixed_purification_werner_weights() {
        let psi = fixed_purification(&werner(0.5).unwrap(), 2).unwrap();
        let probs = psi.register_probabilities(&[2, 3]).unwrap();
        let expected = [0.625, 0.125, 0.125, 0.125];
        for (p, e) in probs.iter().zip(expected) {
            assert!((p - e).abs() < 1e-12);
        }
    }

    #[test]
    fn fixed_purification_recovers_target_and_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for (dim, rank, extra) in [(2, 2, 1), (4, 3, 2), (8, 8, 3), (4, 4, 5)] {
            let rho = random_density_matrix(dim, rank, &mut rng);
            let psi = fixed_purification(&rho, extra).unwrap();
            let n = rho.num_qubits();
            let back = psi.partial_trace(&(0..n).collect::<Vec<_>>()).unwrap();
            assert!(max_abs_diff(back.matrix(), rho.matrix()) < 1e-10);
            let again = fixed_purification(&rho, extra).unwrap();
            assert_eq!(psi.amplitudes(), again.amplitudes());
        }
        assert!(fixed_purification(&DensityMatrix::maximally_mixed(2), 1).is_err());
    }

    #[test]
    fn degenerate_clusters_are_canonical() {
        let rho = werner(0.5).unwrap();
        let pairs = canonical_eigenpairs(&rho);
        assert_eq!(pairs.len(), 4);
        for (r, v) in &pairs[1..] {
            assert!((r - 0.125).abs() < 1e-12);
            let first = v.iter().find(|z| z.norm() > 1e-10).unwrap();
            assert!(first.im.abs() < 1e-12 && first.re > 0.0);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(spec(Family::Separable, &[2], 2).validate().is_err());
        assert!(spec(Family::Biseparable, &[1, 1], 2).validate().is_err());
        assert!(spec(Family::Incoherent, &[1, 1], 2).validate().is_err());
        assert!(spec(Family::Product, &[1, 1, 1], 3).validate().is_err());
        assert!(spec(Family::Separable, &[1, 1], 1).validate().is_err());
        assert!(spec(Family::Separable, &[1, 0, 1], 2).validate().is_err());
        assert!(spec(Family::Separable, &[1, 1, 1], 3).validate().is_ok());
        assert_eq!("quantum-classical".parse::<Family>().unwrap(), Family::QuantumClassical);
        assert!("entangled".parse::<Family>().is_err());
    }

    #[test]
    fn layouts_partition_the_parameters() {
        for plan in all_plans() {
            let l = plan.layout();
            let mut slices = vec![l.v_c.clone(), l.controlled_blocks.clone(), l.u_c.clone(), l.extra.clone()];
            slices.sort_by_key(|r| (r.start, r.end));
            let mut cursor = 0;
            for r in slices {
                assert_eq!(r.start, cursor, "{:?}", plan.spec());
                cursor = r.end;
            }
            assert_eq!(cursor, plan.num_params());
        }
    }

    #[test]
    fn werner_plan_counts() {
        let plan = PurificationPlan::build(&spec(Family::Separable, &[1, 1], 2), &cfg(1, 16)).unwrap();
        assert_eq!(plan.total_qubits(), 4);
        assert_eq!(plan.layout().v_c.len(), 2);
        assert_eq!(plan.layout().controlled_blocks.len(), 2 * 4 * 3);
        assert_eq!(plan.layout().u_c.len(), 16 * 9);
    }

    #[test]
    fn biseparable_register_sizes() {
        let plan = PurificationPlan::build(&spec(Family::Biseparable, &[1, 1, 1], 3), &cfg(1, 1)).unwrap();
        assert_eq!(plan.registers().c2.len(), 2);
        assert_eq!(bipartition_count(3), 3);
        assert_eq!(bipartition_count(4), 7);
        let parts = vec![vec![0], vec![1], vec![2]];
        assert_eq!(bipartition_sides(&parts, 0), (vec![0], vec![1, 2]));
        assert_eq!(bipartition_sides(&parts, 1), (vec![0, 1], vec![2]));
        assert_eq!(bipartition_sides(&parts, 2), (vec![0, 2], vec![1]));
    }

    #[test]
    fn zero_parameters_give_the_all_zero_state() {
        for plan in all_plans() {
            let rho = plan.reduced_state(&vec![0.0; plan.num_params()]).unwrap();
            assert!((rho.matrix()[(0, 0)].re - 1.0).abs() < 1e-12, "{:?}", plan.spec());
        }
    }

    #[test]
    fn incoherent_single_rotation() {
        let plan = PurificationPlan::build(&spec(Family::Incoherent, &[1], 1), &cfg(1, 1)).unwrap();
        let mut theta = vec![0.0; plan.num_params()];
        theta[0] = FRAC_PI_2;
        let rho = plan.reduced_state(&theta).unwrap();
        let expected = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(0.5, 0.0); 2]));
        assert!(max_abs_diff(rho.matrix(), &expected) < 1e-12);
    }

    #[test]
    fn traced_purifications_match_their_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for plan in all_plans() {
            for _ in 0..10 {
                let theta = random_angles(plan.num_params(), &mut rng);
                let traced = plan.reduced_state(&theta).unwrap();
                let assembled = classical_free_state(&plan.components(&theta).unwrap()).unwrap();
                assert!(max_abs_diff(traced.matrix(), assembled.matrix()) < 1e-10, "{:?}", plan.spec());
                assert!(plan.membership_deviation(&theta).unwrap() < 1e-10, "{:?}", plan.spec());
                assert!((plan.run(&theta).unwrap().norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn qc_probabilities_are_normalized() {
        let plan = PurificationPlan::build(&spec(Family::QuantumClassical, &[1, 1], 2), &cfg(1, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let theta = random_angles(plan.num_params(), &mut rng);
        let FreeComponents::QuantumClassical { terms } = plan.components(&theta).unwrap() else {
            panic!("wrong family");
        };
        let total: f64 = terms.iter().map(|t| t.weight).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn classical_constructor_examples() {
        let zero = StateVector::zero(1);
        let one = StateVector::basis(1, 1);
        let single = FreeComponents::Separable {
            partition: vec![1, 1],
            terms: vec![SeparableTerm { weight: 1.0, factors: vec![zero.clone(), one.clone()] }],
        };
        let rho = classical_free_state(&single).unwrap();
        assert!((rho.matrix()[(2, 2)].re - 1.0).abs() < 1e-15);
        let mix = FreeComponents::Separable {
            partition: vec![1, 1],
            terms: vec![
                SeparableTerm { weight: 0.5, factors: vec![zero.clone(), zero.clone()] },
                SeparableTerm { weight: 0.5, factors: vec![one.clone(), one.clone()] },
            ],
        };
        let rho = classical_free_state(&mix).unwrap();
        let expected = [0.5, 0.0, 0.0, 0.5];
        for (i, e) in expected.iter().enumerate() {
            assert!((rho.matrix()[(i, i)].re - e).abs() < 1e-15);
        }
        assert!(rho.matrix().iter().filter(|z| z.norm() > 0.0).count() == 2);
        let bad = FreeComponents::Incoherent { probabilities: vec![0.7, 0.7] };
        assert!(classical_free_state(&bad).is_err());
    }

    #[test]
    fn product_has_zero_mutual_information() {
        let plan = PurificationPlan::build(&spec(Family::Product, &[1, 1], 2), &cfg(2, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..10 {
            let rho = plan.reduced_state(&random_angles(plan.num_params(), &mut rng)).unwrap();
            let sa = rho.partial_trace(&[0]).unwrap().entropy();
            let sb = rho.partial_trace(&[1]).unwrap().entropy();
            assert!((sa + sb - rho.entropy()).abs() < 1e-9);
        }
    }
}
