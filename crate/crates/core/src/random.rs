//! Seeded random states, unitaries and density matrices for property checks.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{CMatrix, C64};
use crate::simulator::{DensityMatrix, StateVector};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-random pure state.
pub fn random_state<R: Rng + ?Sized>(num_qubits: usize, rng: &mut R) -> StateVector {
    let amps = (0..1usize << num_qubits).map(|_| gaussian(rng)).collect();
    StateVector::normalized(amps).expect("gaussian vector is nonzero")
}

/// Haar-random unitary via QR of a complex Ginibre matrix with the phase fix
/// on the diagonal of R.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        let mut col = q.column_mut(k);
        col *= phase;
    }
    q
}

/// Random density matrix of the given rank (`A A† / Tr`, A Ginibre `dim × rank`).
pub fn random_density_matrix<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> DensityMatrix {
    let a = CMatrix::from_fn(dim, rank.max(1), |_, _| gaussian(rng));
    let m = &a * a.adjoint();
    let tr = m.trace().re;
    DensityMatrix::new(m / C64::new(tr, 0.0)).expect("Wishart matrix is a density matrix")
}

/// Uniform angles in `[0, 2π)`.
pub fn random_angles<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect()
}
