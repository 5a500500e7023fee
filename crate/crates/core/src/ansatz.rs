//! Parameterized circuit families.
//!
//! A [`ParamCircuit`] is a list of [`ParamOp`]s whose parameterized blocks own
//! contiguous slices of one flat parameter vector. Binding a vector yields
//! concrete [`CircuitOp`]s for the simulator; [`BoundGenerator`] additionally
//! keeps what the adjoint gradient needs to differentiate each block.
//!
//! Families:
//! - [`build_vc`]: `l1` layers of `R_Y` on every qubit followed by an open CNOT
//!   chain. Real-orthogonal, so real inputs stay real.
//! - [`build_uc`]: `l2` layers of a general single-qubit rotation on every
//!   qubit followed by a controlled general rotation on every pair `i < j`
//!   (control `i`, target `j`, lexicographic order).
//! - [`build_arbitrary_unitary`]: `exp(−i Σ_k θ_k P_k)` over all non-identity
//!   Pauli words.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, scale_columns, CMatrix, C64, I, ONE, ZERO};
use crate::simulator::{CircuitOp, StateVector};

/// Largest register for which the dense arbitrary unitary is built.
pub const MAX_ARBITRARY_QUBITS: usize = 6;

/// A parameterized unitary on a fixed number of local qubits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Generator {
    /// `R_Y(θ) = exp(−iθY/2)`.
    Ry,
    /// General rotation `P(α) · e^{iβ/2}R_Y(β) · P(γ)` with `P(x) = diag(1, e^{ix})`.
    /// A Z-Y-Z Euler decomposition with a phase convention that makes every
    /// angle 2π-periodic, including inside controlled blocks.
    Rot,
    /// `exp(−i Σ_k θ_k P_k)` over the `4^n − 1` non-identity Pauli words.
    PauliExp { num_qubits: usize },
}

impl Generator {
    pub fn num_params(&self) -> usize {
        match self {
            Generator::Ry => 1,
            Generator::Rot => 3,
            Generator::PauliExp { num_qubits } => (1usize << (2 * num_qubits)) - 1,
        }
    }

    pub fn num_qubits(&self) -> usize {
        match self {
            Generator::Ry | Generator::Rot => 1,
            Generator::PauliExp { num_qubits } => *num_qubits,
        }
    }

    /// General unitary on `width` qubits: [`Generator::Rot`] for one qubit,
    /// the Pauli exponential otherwise.
    pub fn general(width: usize) -> Generator {
        if width == 1 {
            Generator::Rot
        } else {
            Generator::PauliExp { num_qubits: width }
        }
    }

    pub fn evaluate(&self, params: &[f64]) -> BoundGenerator {
        debug_assert_eq!(params.len(), self.num_params());
        match self {
            Generator::Ry => BoundGenerator { matrix: ry(params[0]), spectrum: None },
            Generator::Rot => BoundGenerator {
                matrix: rot(params[0], params[1], params[2]),
                spectrum: None,
            },
            Generator::PauliExp { num_qubits } => {
                let h = pauli_hamiltonian(*num_qubits, params);
                let (values, vectors) = hermitian_eigen(&h);
                let phases: Vec<C64> = values.iter().map(|&l| (-I * l).exp()).collect();
                let matrix = &scale_columns(&vectors, &phases) * vectors.adjoint();
                BoundGenerator { matrix, spectrum: Some((values, vectors)) }
            }
        }
    }

    /// `∂/∂θ_k Tr(U(θ) · env)` for every parameter `k`.
    pub fn trace_gradient(&self, params: &[f64], bound: &BoundGenerator, env: &CMatrix) -> Vec<C64> {
        let tr = |d: &CMatrix| -> C64 {
            let mut acc = ZERO;
            for r in 0..d.nrows() {
                for c in 0..d.ncols() {
                    acc += d[(r, c)] * env[(c, r)];
                }
            }
            acc
        };
        match self {
            Generator::Ry => vec![tr(&ry_derivative(params[0]))],
            Generator::Rot => {
                let (a, b, g) = (params[0], params[1], params[2]);
                let (pa, yb, pg) = (phase(a), yhat(b), phase(g));
                let da = phase_derivative(a) * &yb * &pg;
                let db = &pa * yhat_derivative(b) * &pg;
                let dg = &pa * &yb * phase_derivative(g);
                vec![tr(&da), tr(&db), tr(&dg)]
            }
            Generator::PauliExp { num_qubits } => {
                let (values, vectors) = bound
                    .spectrum
                    .as_ref()
                    .expect("Pauli exponential is bound with its spectrum");
                pauli_exp_gradient(*num_qubits, values, vectors, env)
            }
        }
    }
}

/// A generator evaluated at concrete parameters.
#[derive(Clone, Debug)]
pub struct BoundGenerator {
    pub matrix: CMatrix,
    spectrum: Option<(Vec<f64>, CMatrix)>,
}

pub fn ry(theta: f64) -> CMatrix {
    let (s, c) = (theta / 2.0).sin_cos();
    CMatrix::from_row_slice(2, 2, &[C64::new(c, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0), C64::new(c, 0.0)])
}

fn ry_derivative(theta: f64) -> CMatrix {
    let (s, c) = (theta / 2.0).sin_cos();
    CMatrix::from_row_slice(
        2,
        2,
        &[C64::new(-s / 2.0, 0.0), C64::new(-c / 2.0, 0.0), C64::new(c / 2.0, 0.0), C64::new(-s / 2.0, 0.0)],
    )
}

fn phase(x: f64) -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, (I * x).exp()])
}

fn phase_derivative(x: f64) -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, I * (I * x).exp()])
}

fn yhat(b: f64) -> CMatrix {
    ry(b) * (I * (b / 2.0)).exp()
}

fn yhat_derivative(b: f64) -> CMatrix {
    let g = (I * (b / 2.0)).exp();
    ry(b) * (g * I * 0.5) + ry_derivative(b) * g
}

/// General single-qubit rotation, see [`Generator::Rot`].
pub fn rot(alpha: f64, beta: f64, gamma: f64) -> CMatrix {
    phase(alpha) * yhat(beta) * phase(gamma)
}

/// Non-identity Pauli word `k + 1` on `n` qubits, encoded as bit masks.
#[derive(Clone, Copy, Debug)]
struct PauliWord {
    x: usize,
    yz: usize,
    phase: C64,
}

fn pauli_word(n: usize, index: usize) -> PauliWord {
    let (mut x, mut yz, mut ny) = (0usize, 0usize, 0u32);
    for q in 0..n {
        match (index >> (2 * q)) & 3 {
            1 => x |= 1 << q,
            2 => {
                x |= 1 << q;
                yz |= 1 << q;
                ny += 1;
            }
            3 => yz |= 1 << q,
            _ => {}
        }
    }
    PauliWord { x, yz, phase: I.powu(ny) }
}

impl PauliWord {
    /// `(row, value)` of the single nonzero entry in column `b`.
    #[inline]
    fn column(&self, b: usize) -> (usize, C64) {
        let sign = if (b & self.yz).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
        (b ^ self.x, self.phase * sign)
    }
}

/// Dense matrix of Pauli word `index` (1-based over non-identity words,
/// qubit `q` selected by base-4 digit `q`: 1 = X, 2 = Y, 3 = Z).
pub fn pauli_word_matrix(n: usize, index: usize) -> CMatrix {
    let w = pauli_word(n, index);
    let d = 1usize << n;
    let mut m = CMatrix::zeros(d, d);
    for b in 0..d {
        let (r, v) = w.column(b);
        m[(r, b)] = v;
    }
    m
}

fn pauli_hamiltonian(n: usize, params: &[f64]) -> CMatrix {
    let d = 1usize << n;
    let mut h = CMatrix::zeros(d, d);
    for (k, &theta) in params.iter().enumerate() {
        if theta == 0.0 {
            continue;
        }
        let w = pauli_word(n, k + 1);
        for b in 0..d {
            let (r, v) = w.column(b);
            h[(r, b)] += v * theta;
        }
    }
    h
}

/// Gradient of `Tr(exp(−iH(θ)) E)` through the Daleckii–Krein formula in the
/// eigenbasis of `H`, reduced to `Tr(P_k W)` per Pauli word.
fn pauli_exp_gradient(n: usize, values: &[f64], vectors: &CMatrix, env: &CMatrix) -> Vec<C64> {
    let d = values.len();
    let e_tilde = vectors.adjoint() * env * vectors;
    let mut m = CMatrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            let half = (values[a] - values[b]) / 2.0;
            let sinc = if half.abs() < 1e-8 { 1.0 - half * half / 6.0 } else { half.sin() / half };
            let gamma = -I * (-I * ((values[a] + values[b]) / 2.0)).exp() * sinc;
            m[(b, a)] = gamma * e_tilde[(b, a)];
        }
    }
    let w = vectors * m * vectors.adjoint();
    (1..1usize << (2 * n))
        .map(|k| {
            let word = pauli_word(n, k);
            (0..d)
                .map(|b| {
                    let (r, v) = word.column(b);
                    v * w[(b, r)]
                })
                .sum()
        })
        .collect()
}

/// A generator instance owning the parameter slice `offset..offset + n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamBlock {
    pub generator: Generator,
    pub offset: usize,
}

impl ParamBlock {
    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.generator.num_params()
    }
}

#[derive(Clone, Debug)]
pub enum ParamOp {
    Fixed(CircuitOp),
    Gate { targets: Vec<usize>, block: ParamBlock },
    /// `Σ_j |j⟩⟨j|_controls ⊗ U_j(θ_j)`; `None` blocks are the identity.
    Multiplexed {
        controls: Vec<usize>,
        targets: Vec<usize>,
        blocks: Vec<Option<ParamBlock>>,
    },
}

/// A bound op together with the evaluated generators behind it, aligned with
/// the op's blocks (`Gate` has one entry, `Fixed` none).
#[derive(Clone, Debug)]
pub struct BoundOp {
    pub op: CircuitOp,
    pub generators: Vec<Option<BoundGenerator>>,
}

/// Ordered gate sequence over `num_qubits` qubits with `num_params` slots.
#[derive(Clone, Debug, Default)]
pub struct ParamCircuit {
    num_qubits: usize,
    num_params: usize,
    ops: Vec<ParamOp>,
}

impl ParamCircuit {
    pub fn new(num_qubits: usize) -> Self {
        ParamCircuit { num_qubits, num_params: 0, ops: Vec::new() }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn ops(&self) -> &[ParamOp] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    fn allocate(&mut self, generator: Generator) -> ParamBlock {
        let block = ParamBlock { generator, offset: self.num_params };
        self.num_params += generator.num_params();
        block
    }

    fn check_qubits(&self, qubits: &[usize]) -> Result<()> {
        let mut seen = 0usize;
        for &q in qubits {
            if q >= self.num_qubits {
                return Err(Error::QubitOutOfRange { qubit: q, num_qubits: self.num_qubits });
            }
            if seen & (1 << q) != 0 {
                return Err(Error::InvalidRegister(format!("qubit {q} used twice in one op")));
            }
            seen |= 1 << q;
        }
        Ok(())
    }

    pub fn push_fixed(&mut self, op: CircuitOp) -> Result<()> {
        op.validate(self.num_qubits)?;
        self.ops.push(ParamOp::Fixed(op));
        Ok(())
    }

    pub fn push_gate(&mut self, targets: Vec<usize>, generator: Generator) -> Result<()> {
        self.check_qubits(&targets)?;
        if targets.len() != generator.num_qubits() {
            return Err(Error::DimensionMismatch { expected: generator.num_qubits(), found: targets.len() });
        }
        let block = self.allocate(generator);
        self.ops.push(ParamOp::Gate { targets, block });
        Ok(())
    }

    /// Register-controlled block; `generators[j]` is applied when the control
    /// register holds `j` (`None` for identity).
    pub fn push_multiplexed(
        &mut self,
        controls: Vec<usize>,
        targets: Vec<usize>,
        generators: Vec<Option<Generator>>,
    ) -> Result<()> {
        let all: Vec<usize> = controls.iter().chain(&targets).copied().collect();
        self.check_qubits(&all)?;
        if generators.len() != 1usize << controls.len() {
            return Err(Error::DimensionMismatch {
                expected: 1usize << controls.len(),
                found: generators.len(),
            });
        }
        if let Some(g) = generators.iter().flatten().find(|g| g.num_qubits() != targets.len()) {
            return Err(Error::DimensionMismatch { expected: g.num_qubits(), found: targets.len() });
        }
        let blocks = generators.into_iter().map(|g| g.map(|g| self.allocate(g))).collect();
        self.ops.push(ParamOp::Multiplexed { controls, targets, blocks });
        Ok(())
    }

    /// Appends `other` with its qubit `q` mapped to `qubit_map[q]`; returns the
    /// parameter range the appended ops occupy.
    pub fn append(&mut self, other: &ParamCircuit, qubit_map: &[usize]) -> Result<Range<usize>> {
        if qubit_map.len() != other.num_qubits {
            return Err(Error::DimensionMismatch { expected: other.num_qubits, found: qubit_map.len() });
        }
        self.check_qubits(qubit_map)?;
        let shift = self.num_params;
        let map = |qs: &[usize]| qs.iter().map(|&q| qubit_map[q]).collect::<Vec<_>>();
        let move_block = |b: &ParamBlock| ParamBlock { generator: b.generator, offset: b.offset + shift };
        for op in &other.ops {
            let moved = match op {
                ParamOp::Fixed(op) => ParamOp::Fixed(remap_op(op, qubit_map)),
                ParamOp::Gate { targets, block } => ParamOp::Gate {
                    targets: map(targets),
                    block: move_block(block),
                },
                ParamOp::Multiplexed { controls, targets, blocks } => ParamOp::Multiplexed {
                    controls: map(controls),
                    targets: map(targets),
                    blocks: blocks.iter().map(|b| b.as_ref().map(move_block)).collect(),
                },
            };
            self.ops.push(moved);
        }
        self.num_params += other.num_params;
        Ok(shift..self.num_params)
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params {
            return Err(Error::InvalidParameters(format!(
                "expected {} parameters, got {}",
                self.num_params,
                params.len()
            )));
        }
        if let Some(k) = params.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite(format!("parameter {k} = {}", params[k])));
        }
        Ok(())
    }

    /// Binds a parameter vector, validating every produced op (layout and
    /// unitarity within [`crate::simulator::UNITARY_TOL`]).
    pub fn bind(&self, params: &[f64]) -> Result<Vec<CircuitOp>> {
        Ok(self.bind_detailed(params)?.into_iter().map(|b| b.op).collect())
    }

    pub fn bind_detailed(&self, params: &[f64]) -> Result<Vec<BoundOp>> {
        self.check_params(params)?;
        self.ops
            .iter()
            .map(|op| {
                let bound = match op {
                    ParamOp::Fixed(op) => BoundOp { op: op.clone(), generators: Vec::new() },
                    ParamOp::Gate { targets, block } => {
                        let g = block.generator.evaluate(&params[block.range()]);
                        BoundOp {
                            op: CircuitOp::Unitary { targets: targets.clone(), matrix: g.matrix.clone() },
                            generators: vec![Some(g)],
                        }
                    }
                    ParamOp::Multiplexed { controls, targets, blocks } => {
                        let generators: Vec<Option<BoundGenerator>> = blocks
                            .iter()
                            .map(|b| b.as_ref().map(|b| b.generator.evaluate(&params[b.range()])))
                            .collect();
                        BoundOp {
                            op: CircuitOp::Multiplexed {
                                controls: controls.clone(),
                                targets: targets.clone(),
                                blocks: generators.iter().map(|g| g.as_ref().map(|g| g.matrix.clone())).collect(),
                            },
                            generators,
                        }
                    }
                };
                bound.op.validate(self.num_qubits)?;
                Ok(bound)
            })
            .collect()
    }

    /// Applies the bound circuit to `|0…0⟩`.
    pub fn run(&self, params: &[f64]) -> Result<StateVector> {
        let mut s = StateVector::zero(self.num_qubits);
        s.apply_all(&self.bind(params)?)?;
        Ok(s)
    }

    /// Dense unitary of the bound circuit (small registers only).
    pub fn dense_unitary(&self, params: &[f64]) -> Result<CMatrix> {
        let ops = self.bind(params)?;
        let d = 1usize << self.num_qubits;
        let mut u = CMatrix::zeros(d, d);
        for col in 0..d {
            let mut s = StateVector::basis(self.num_qubits, col);
            s.apply_all(&ops)?;
            for (row, a) in s.amplitudes().iter().enumerate() {
                u[(row, col)] = *a;
            }
        }
        Ok(u)
    }

    /// Checks that every parameter slot is referenced by some block.
    pub fn validate(&self) -> Result<()> {
        let mut used = vec![false; self.num_params];
        for op in &self.ops {
            let blocks: Vec<&ParamBlock> = match op {
                ParamOp::Fixed(_) => Vec::new(),
                ParamOp::Gate { block, .. } => vec![block],
                ParamOp::Multiplexed { blocks, .. } => blocks.iter().flatten().collect(),
            };
            for b in blocks {
                for k in b.range() {
                    if k >= self.num_params {
                        return Err(Error::InvalidParameters(format!("slot {k} out of range")));
                    }
                    used[k] = true;
                }
            }
        }
        match used.iter().position(|u| !u) {
            Some(k) => Err(Error::InvalidParameters(format!("slot {k} is never referenced"))),
            None => Ok(()),
        }
    }
}

fn remap_op(op: &CircuitOp, map: &[usize]) -> CircuitOp {
    let m = |qs: &[usize]| qs.iter().map(|&q| map[q]).collect::<Vec<_>>();
    match op {
        CircuitOp::Unitary { targets, matrix } => CircuitOp::Unitary { targets: m(targets), matrix: matrix.clone() },
        CircuitOp::Controlled { controls, value, targets, matrix } => CircuitOp::Controlled {
            controls: m(controls),
            value: *value,
            targets: m(targets),
            matrix: matrix.clone(),
        },
        CircuitOp::Multiplexed { controls, targets, blocks } => CircuitOp::Multiplexed {
            controls: m(controls),
            targets: m(targets),
            blocks: blocks.clone(),
        },
        CircuitOp::Shift { controls, targets, offset } => CircuitOp::Shift {
            controls: m(controls),
            targets: m(targets),
            offset: *offset,
        },
    }
}

/// Layer counts for the entangler `V_C` and the mixer `U_C`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzConfig {
    pub l1: usize,
    pub l2: usize,
    #[serde(default)]
    pub use_arbitrary_u: bool,
}

impl AnsatzConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l1 == 0 {
            return Err(Error::InvalidConfig("l1 must be at least 1".into()));
        }
        Ok(())
    }

    /// The entangler `V_C` on `num_qubits` qubits.
    pub fn entangler(&self, num_qubits: usize) -> Result<ParamCircuit> {
        build_vc(num_qubits, self.l1)
    }

    /// The mixer `U_C`: layered, arbitrary, or empty when `l2 = 0`.
    pub fn mixer(&self, num_qubits: usize) -> Result<ParamCircuit> {
        if self.use_arbitrary_u {
            build_arbitrary_unitary(num_qubits)
        } else if self.l2 == 0 {
            Ok(ParamCircuit::new(num_qubits))
        } else {
            build_uc(num_qubits, self.l2)
        }
    }
}

fn check_size(num_qubits: usize, layers: usize, what: &str) -> Result<()> {
    if num_qubits == 0 {
        return Err(Error::InvalidConfig(format!("{what} needs at least one qubit")));
    }
    if layers == 0 {
        return Err(Error::InvalidConfig(format!("{what} needs at least one layer")));
    }
    Ok(())
}

/// Entangler: `l1` layers of `R_Y` per qubit then CNOT(i, i+1) along an open chain.
pub fn build_vc(num_qubits: usize, l1: usize) -> Result<ParamCircuit> {
    check_size(num_qubits, l1, "V_C")?;
    let mut c = ParamCircuit::new(num_qubits);
    for _ in 0..l1 {
        for q in 0..num_qubits {
            c.push_gate(vec![q], Generator::Ry)?;
        }
        for q in 0..num_qubits.saturating_sub(1) {
            c.push_fixed(CircuitOp::cnot(q, q + 1))?;
        }
    }
    Ok(c)
}

/// Mixer: `l2` layers of [`Generator::Rot`] per qubit then a controlled
/// [`Generator::Rot`] for every pair `(i, j)`, `i < j`, in lexicographic order.
pub fn build_uc(num_qubits: usize, l2: usize) -> Result<ParamCircuit> {
    check_size(num_qubits, l2, "U_C")?;
    let mut c = ParamCircuit::new(num_qubits);
    for _ in 0..l2 {
        for q in 0..num_qubits {
            c.push_gate(vec![q], Generator::Rot)?;
        }
        for i in 0..num_qubits {
            for j in i + 1..num_qubits {
                c.push_multiplexed(vec![i], vec![j], vec![None, Some(Generator::Rot)])?;
            }
        }
    }
    Ok(c)
}

/// Fully expressive block `exp(−i Σ θ_k P_k)`, `4^n − 1` parameters.
pub fn build_arbitrary_unitary(num_qubits: usize) -> Result<ParamCircuit> {
    if num_qubits == 0 {
        return Err(Error::InvalidConfig("arbitrary unitary needs at least one qubit".into()));
    }
    if num_qubits > MAX_ARBITRARY_QUBITS {
        return Err(Error::CapacityExceeded { requested: num_qubits, cap: MAX_ARBITRARY_QUBITS });
    }
    let mut c = ParamCircuit::new(num_qubits);
    c.push_gate((0..num_qubits).collect(), Generator::PauliExp { num_qubits })?;
    Ok(c)
}
