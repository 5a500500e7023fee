//! Gradients, Adam and the restart loop.
//!
//! Training minimizes `1 − √(F(θ) + guard)` over the joint parameter vector of
//! a purification plan. Restarts run in parallel on the rayon pool; each owns
//! a ChaCha stream derived from the base seed, so reports are reproducible
//! regardless of thread count.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{AnsatzConfig, ParamOp};
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::objective::{half_bures, training_cost, PurificationObjective, FIDELITY_GUARD};
use crate::purify::{PurificationPlan, ResourceSpec};
use crate::random::random_angles;
use crate::simulator::{transition_matrices, DensityMatrix, StateVector};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMethod {
    CentralFd,
    Adjoint,
    Spsa,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub eta: f64,
    pub epochs: usize,
    pub restarts: usize,
    #[serde(default = "default_method")]
    pub grad_method: GradientMethod,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    #[serde(default)]
    pub seed: u64,
    /// Sample the SWAP test with this many shots instead of the exact overlap.
    #[serde(default)]
    pub shots: Option<u64>,
}

fn default_method() -> GradientMethod {
    GradientMethod::Adjoint
}

fn default_fd_step() -> f64 {
    1e-4
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eta: 0.01,
            epochs: 1000,
            restarts: 10,
            grad_method: default_method(),
            fd_step: default_fd_step(),
            seed: 0,
            shots: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate {} must be positive", self.eta)));
        }
        if self.epochs == 0 || self.restarts == 0 {
            return Err(Error::InvalidConfig("epochs and restarts must be at least 1".into()));
        }
        if self.grad_method != GradientMethod::Adjoint && !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return Err(Error::InvalidConfig(format!("fd_step {} must be positive", self.fd_step)));
        }
        match self.shots {
            Some(0) => return Err(Error::InvalidConfig("shots must be at least 1".into())),
            Some(_) if self.grad_method == GradientMethod::Adjoint => {
                return Err(Error::InvalidConfig(
                    "the adjoint gradient needs exact amplitudes; use central-fd or spsa with shots".into(),
                ))
            }
            _ => {}
        }
        Ok(())
    }
}

/// First and second moment estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState { m: vec![0.0; len], v: vec![0.0; len] }
    }
}

/// One bias-corrected Adam update at step `t ≥ 1`.
pub fn adam_step(theta: &[f64], grad: &[f64], state: &AdamState, eta: f64, t: u64) -> Result<(Vec<f64>, AdamState)> {
    if theta.len() != grad.len() || state.m.len() != theta.len() || state.v.len() != theta.len() {
        return Err(Error::DimensionMismatch { expected: theta.len(), found: grad.len() });
    }
    if t == 0 {
        return Err(Error::InvalidParameters("Adam step counter starts at 1".into()));
    }
    if let Some(k) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient component {k} = {}", grad[k])));
    }
    let c1 = 1.0 - ADAM_BETA1.powf(t as f64);
    let c2 = 1.0 - ADAM_BETA2.powf(t as f64);
    let mut next = state.clone();
    let mut out = theta.to_vec();
    for i in 0..theta.len() {
        next.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * grad[i];
        next.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
        let m_hat = next.m[i] / c1;
        let v_hat = next.v[i] / c2;
        out[i] -= eta * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
    }
    Ok((out, next))
}

/// Exact fidelity and its gradient by one forward and one reverse sweep.
///
/// With `z = ⟨Ψ|U_L⋯U_1|0⟩`, each parameter of op `k` contributes
/// `∂z = ⟨λ_k|∂U_k|φ_{k−1}⟩ = Tr(∂U_k · E)`, where `φ_{k−1}` is the forward
/// state before op `k`, `λ_k = U_{k+1}†⋯U_L†|Ψ⟩`, and `E` is the transition
/// matrix of the pair on the op's targets. Then `∂F = 2 Re(z̄ ∂z)`.
pub fn adjoint_fidelity_gradient(objective: &PurificationObjective, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
    let circuit = objective.plan().circuit();
    let bound = circuit.bind_detailed(theta)?;
    let mut phi = StateVector::zero(circuit.num_qubits());
    for b in &bound {
        phi.apply_in_place(&b.op)?;
    }
    let mut lambda = objective.target().clone();
    let z = lambda.inner_product(&phi)?;
    let mut dz = vec![C64::new(0.0, 0.0); theta.len()];
    for (op, b) in circuit.ops().iter().zip(&bound).rev() {
        phi.apply_adjoint_in_place(&b.op)?;
        match op {
            ParamOp::Fixed(_) => {}
            ParamOp::Gate { targets, block } => {
                let e = transition_matrices(phi.amplitudes(), lambda.amplitudes(), targets, &[], |_| true);
                let env = e[0].as_ref().expect("requested");
                let g = b.generators[0].as_ref().expect("gate is parameterized");
                let r = block.range();
                for (k, d) in block.generator.trace_gradient(&theta[r.clone()], g, env).into_iter().enumerate() {
                    dz[r.start + k] += d;
                }
            }
            ParamOp::Multiplexed { controls, targets, blocks } => {
                let envs = transition_matrices(phi.amplitudes(), lambda.amplitudes(), targets, controls, |v| {
                    blocks[v].is_some()
                });
                for (v, block) in blocks.iter().enumerate() {
                    let (Some(block), Some(env)) = (block, envs[v].as_ref()) else { continue };
                    let g = b.generators[v].as_ref().expect("block is parameterized");
                    let r = block.range();
                    for (k, d) in block.generator.trace_gradient(&theta[r.clone()], g, env).into_iter().enumerate() {
                        dz[r.start + k] += d;
                    }
                }
            }
        }
        lambda.apply_adjoint_in_place(&b.op)?;
    }
    let grad = dz.iter().map(|d| 2.0 * (z.conj() * d).re).collect();
    Ok((z.norm_sqr(), grad))
}

/// Gradient of the training cost at `theta`. Cost evaluations are exact, or
/// sampled SWAP tests when `shots` is set (seeds drawn from `rng`).
pub fn gradient<R: Rng + ?Sized>(
    objective: &PurificationObjective,
    theta: &[f64],
    method: GradientMethod,
    fd_step: f64,
    shots: Option<u64>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if theta.len() != objective.num_params() {
        return Err(Error::InvalidParameters(format!(
            "expected {} parameters, got {}",
            objective.num_params(),
            theta.len()
        )));
    }
    let cost = |t: &[f64], rng: &mut R| -> Result<f64> {
        let f = objective.estimate(t, shots, rng.gen())?.value;
        let c = training_cost(f);
        if c.is_finite() {
            Ok(c)
        } else {
            Err(Error::NonFinite(format!("cost {c}")))
        }
    };
    let grad = match method {
        GradientMethod::Adjoint => {
            if shots.is_some() {
                return Err(Error::InvalidConfig("the adjoint gradient is exact-only".into()));
            }
            let (f, df) = adjoint_fidelity_gradient(objective, theta)?;
            let scale = -1.0 / (2.0 * (f + FIDELITY_GUARD).sqrt());
            df.into_iter().map(|d| d * scale).collect()
        }
        GradientMethod::CentralFd => {
            let mut probe = theta.to_vec();
            let mut out = Vec::with_capacity(theta.len());
            for i in 0..theta.len() {
                probe[i] = theta[i] + fd_step;
                let plus = cost(&probe, rng)?;
                probe[i] = theta[i] - fd_step;
                let minus = cost(&probe, rng)?;
                probe[i] = theta[i];
                out.push((plus - minus) / (2.0 * fd_step));
            }
            out
        }
        GradientMethod::Spsa => {
            let delta: Vec<f64> = (0..theta.len()).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
            let plus: Vec<f64> = theta.iter().zip(&delta).map(|(t, d)| t + fd_step * d).collect();
            let minus: Vec<f64> = theta.iter().zip(&delta).map(|(t, d)| t - fd_step * d).collect();
            let diff = cost(&plus, rng)? - cost(&minus, rng)?;
            delta.iter().map(|d| diff / (2.0 * fd_step * d)).collect()
        }
    };
    if let Some(k) = grad.iter().position(|g: &f64| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient component {k}")));
    }
    Ok(grad)
}

/// Order statistics of the final `R/2` over successful restarts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartReport {
    pub restart: usize,
    /// Exact `R/2` at the parameters entering each epoch's update.
    pub cost_trace: Vec<f64>,
    /// Exact `R/2` after the last update; `None` when the restart failed.
    pub final_cost: Option<f64>,
    pub error: Option<String>,
    #[serde(skip)]
    pub final_params: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Trace of the best restart.
    pub cost_trace: Vec<f64>,
    pub best_params: Vec<f64>,
    pub best_cost: f64,
    pub restart_stats: RestartStats,
    pub n_failed: usize,
    pub restarts: Vec<RestartReport>,
    pub wall_time: f64,
}

fn run_restart(objective: &PurificationObjective, cfg: &TrainConfig, restart: usize) -> RestartReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(restart as u64);
    let mut theta = random_angles(objective.num_params(), &mut rng);
    let mut state = AdamState::new(theta.len());
    let mut trace = Vec::with_capacity(cfg.epochs);
    let outcome = (|| -> Result<f64> {
        for epoch in 1..=cfg.epochs {
            let grad = if cfg.grad_method == GradientMethod::Adjoint {
                let (f, df) = adjoint_fidelity_gradient(objective, &theta)?;
                trace.push(half_bures(f));
                let scale = -1.0 / (2.0 * (f + FIDELITY_GUARD).sqrt());
                df.into_iter().map(|d| d * scale).collect()
            } else {
                trace.push(objective.half_bures(&theta)?);
                gradient(objective, &theta, cfg.grad_method, cfg.fd_step, cfg.shots, &mut rng)?
            };
            if !trace.last().is_some_and(|c| c.is_finite()) {
                return Err(Error::NonFinite(format!("cost at epoch {epoch}")));
            }
            let (next, next_state) = adam_step(&theta, &grad, &state, cfg.eta, epoch as u64)?;
            theta = next;
            state = next_state;
        }
        let last = objective.half_bures(&theta)?;
        if last.is_finite() {
            Ok(last)
        } else {
            Err(Error::NonFinite("final cost".into()))
        }
    })();
    match outcome {
        Ok(c) => RestartReport { restart, cost_trace: trace, final_cost: Some(c), error: None, final_params: theta },
        Err(e) => RestartReport {
            restart,
            cost_trace: trace,
            final_cost: None,
            error: Some(e.to_string()),
            final_params: theta,
        },
    }
}

/// Trains `cfg.restarts` independent purifications of `rho` and reports the best.
pub fn train_resource(
    rho: &DensityMatrix,
    spec: &ResourceSpec,
    ansatz: &AnsatzConfig,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    let plan = PurificationPlan::build(spec, ansatz)?;
    let objective = PurificationObjective::new(plan, rho)?;
    train_objective(&objective, cfg)
}

/// [`train_resource`] for a prebuilt objective.
pub fn train_objective(objective: &PurificationObjective, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let start = Instant::now();
    let restarts: Vec<RestartReport> =
        (0..cfg.restarts).into_par_iter().map(|r| run_restart(objective, cfg, r)).collect();
    let ok: Vec<&RestartReport> = restarts.iter().filter(|r| r.final_cost.is_some()).collect();
    let best = ok
        .iter()
        .min_by(|a, b| a.final_cost.unwrap().total_cmp(&b.final_cost.unwrap()))
        .ok_or_else(|| {
            Error::NonFinite(format!(
                "all {} restarts failed: {}",
                restarts.len(),
                restarts[0].error.clone().unwrap_or_default()
            ))
        })?;
    let finals: Vec<f64> = ok.iter().map(|r| r.final_cost.unwrap()).collect();
    let stats = RestartStats {
        mean: finals.iter().sum::<f64>() / finals.len() as f64,
        min: finals.iter().copied().fold(f64::INFINITY, f64::min),
        max: finals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    Ok(TrainReport {
        cost_trace: best.cost_trace.clone(),
        best_params: best.final_params.clone(),
        best_cost: best.final_cost.unwrap(),
        restart_stats: stats,
        n_failed: restarts.len() - ok.len(),
        wall_time: start.elapsed().as_secs_f64(),
        restarts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::werner_bures_reference;
    use crate::purify::Family;
    use crate::random::{random_angles, random_density_matrix};
    use crate::states::werner;

    fn objective(family: Family, partition: &[usize], nc: usize, arbitrary: bool, rho: &DensityMatrix) -> PurificationObjective {
        let spec = ResourceSpec { family, partition: partition.to_vec(), control_qubits: nc };
        let cfg = AnsatzConfig { l1: 2, l2: 2, use_arbitrary_u: arbitrary };
        PurificationObjective::new(PurificationPlan::build(&spec, &cfg).unwrap(), rho).unwrap()
    }

    #[test]
    fn adam_examples() {
        let s = AdamState::new(3);
        let theta = [0.1, 0.2, 0.3];
        let (same, _) = adam_step(&theta, &[0.0; 3], &s, 0.01, 1).unwrap();
        assert_eq!(same, theta);
        let g = [2.0, -0.5, 1e-3];
        let (next, state) = adam_step(&theta, &g, &s, 0.01, 1).unwrap();
        for i in 0..3 {
            let expected = theta[i] - 0.01 * g[i] / (g[i].abs() + ADAM_EPSILON);
            assert!((next[i] - expected).abs() < 1e-15);
        }
        let (again, state2) = adam_step(&theta, &g, &s, 0.01, 1).unwrap();
        assert_eq!(next, again);
        assert_eq!(state, state2);
        assert!(adam_step(&theta, &[f64::NAN, 0.0, 0.0], &s, 0.01, 1).is_err());
        assert!(adam_step(&theta, &g, &s, 0.01, 0).is_err());
    }

    #[test]
    fn adjoint_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rho2 = random_density_matrix(4, 4, &mut rng);
        let rho3 = random_density_matrix(8, 3, &mut rng);
        let rho1 = random_density_matrix(2, 2, &mut rng);
        let objectives = [
            objective(Family::Separable, &[1, 1], 2, false, &rho2),
            objective(Family::Separable, &[1, 1], 2, true, &rho2),
            objective(Family::Separable, &[2, 1], 3, false, &rho3),
            objective(Family::Biseparable, &[1, 1, 1], 3, false, &rho3),
            objective(Family::QuantumClassical, &[1, 1], 2, true, &rho2),
            objective(Family::Incoherent, &[1], 1, false, &rho1),
            objective(Family::Product, &[1, 1], 2, false, &rho2),
        ];
        for obj in &objectives {
            let theta = random_angles(obj.num_params(), &mut rng);
            let adj = gradient(obj, &theta, GradientMethod::Adjoint, 1e-4, None, &mut rng).unwrap();
            let fd = gradient(obj, &theta, GradientMethod::CentralFd, 1e-5, None, &mut rng).unwrap();
            for (a, f) in adj.iter().zip(&fd) {
                assert!((a - f).abs() / (f.abs() + 1e-8) <= 1e-5 || (a - f).abs() < 1e-9, "{a} vs {f}");
            }
        }
    }

    #[test]
    fn flat_directions_have_zero_gradient() {
        // all-zero parameters reproduce the |0…0⟩ target exactly: a maximum
        let rho = crate::simulator::StateVector::zero(2).to_density_matrix();
        let obj = objective(Family::Separable, &[1, 1], 2, false, &rho);
        let theta = vec![0.0; obj.num_params()];
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let g = gradient(&obj, &theta, GradientMethod::Adjoint, 1e-4, None, &mut rng).unwrap();
        assert!(g.iter().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = TrainConfig { shots: Some(100), ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
        cfg.grad_method = GradientMethod::Spsa;
        assert!(cfg.validate().is_ok());
        cfg.fd_step = 0.0;
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig { eta: -1.0, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn training_is_deterministic_and_consistent() {
        let rho = werner(0.8).unwrap();
        let spec = ResourceSpec { family: Family::Separable, partition: vec![1, 1], control_qubits: 2 };
        let ansatz = AnsatzConfig { l1: 1, l2: 2, use_arbitrary_u: false };
        let cfg = TrainConfig { epochs: 60, restarts: 3, seed: 7, ..TrainConfig::default() };
        let a = train_resource(&rho, &spec, &ansatz, &cfg).unwrap();
        let b = train_resource(&rho, &spec, &ansatz, &cfg).unwrap();
        assert_eq!(a.best_params, b.best_params);
        assert_eq!(a.restarts, b.restarts);
        assert_eq!(a.cost_trace.len(), 60);
        let s = a.restart_stats;
        assert!(s.min <= s.mean && s.mean <= s.max);
        assert_eq!(a.best_cost, s.min);
        // every traced value upper-bounds the true resource
        let truth = werner_bures_reference(0.8).unwrap();
        for r in &a.restarts {
            assert!(r.cost_trace.iter().all(|&c| c >= truth - 1e-6));
        }
    }
}
