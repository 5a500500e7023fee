//! Brute-force two-qubit separable minimization, independent of the
//! variational machinery: `σ = Σ_k w_k |a_k⟩⟨a_k| ⊗ |b_k⟩⟨b_k|` with softmax
//! weights and Bloch-angle qubits, optimized by Adam on central differences.

use bures_core::linalg::{CMatrix, C64};
use bures_core::oracle::fidelity_exact;
use bures_core::simulator::DensityMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PARAMS_PER_TERM: usize = 5;

fn qubit(theta: f64, phi: f64) -> [C64; 2] {
    [C64::new((theta / 2.0).cos(), 0.0), C64::from_polar((theta / 2.0).sin(), phi)]
}

fn separable_state(x: &[f64]) -> DensityMatrix {
    let terms = x.len() / PARAMS_PER_TERM;
    let max = x.chunks(PARAMS_PER_TERM).map(|c| c[0]).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.chunks(PARAMS_PER_TERM).map(|c| (c[0] - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let mut m = CMatrix::zeros(4, 4);
    for k in 0..terms {
        let c = &x[k * PARAMS_PER_TERM..(k + 1) * PARAMS_PER_TERM];
        let (a, b) = (qubit(c[1], c[2]), qubit(c[3], c[4]));
        // Qubit A is the low bit.
        let v: Vec<C64> = (0..4).map(|i| a[i & 1] * b[i >> 1]).collect();
        for r in 0..4 {
            for s in 0..4 {
                m[(r, s)] += v[r] * v[s].conj() * (exps[k] / total);
            }
        }
    }
    DensityMatrix::new(m).expect("a convex mixture of product states is a density matrix")
}

fn cost(rho: &DensityMatrix, x: &[f64]) -> f64 {
    1.0 - fidelity_exact(rho, &separable_state(x)).unwrap().max(0.0).sqrt()
}

/// Smallest `1 − √F(ρ, σ)` found over two-qubit separable `σ` with `terms`
/// product terms.
pub fn brute_force_half_bures(rho: &DensityMatrix, terms: usize, restarts: usize, iters: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = terms * PARAMS_PER_TERM;
    let h = 1e-6;
    let mut best = f64::INFINITY;
    for _ in 0..restarts {
        let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
        for t in 1..=iters {
            let lr = if t < iters * 2 / 3 { 0.05 } else { 0.005 };
            for i in 0..n {
                let mut xp = x.clone();
                xp[i] += h;
                let mut xm = x.clone();
                xm[i] -= h;
                let g = (cost(rho, &xp) - cost(rho, &xm)) / (2.0 * h);
                m[i] = 0.9 * m[i] + 0.1 * g;
                v[i] = 0.999 * v[i] + 0.001 * g * g;
                let mh = m[i] / (1.0 - 0.9f64.powi(t as i32));
                let vh = v[i] / (1.0 - 0.999f64.powi(t as i32));
                x[i] -= lr * mh / (vh.sqrt() + 1e-8);
            }
        }
        best = best.min(cost(rho, &x));
    }
    best
}
