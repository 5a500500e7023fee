use std::f64::consts::FRAC_1_SQRT_2;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::linalg::{kron, max_abs_diff, ONE};
use crate::random::{random_density_matrix, random_state, random_unitary};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn close(a: &[C64], b: &[C64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() <= tol)
}

#[test]
fn hadamard_on_zero() {
    let s = StateVector::zero(1).apply(&CircuitOp::hadamard(0)).unwrap();
    assert!(close(s.amplitudes(), &[c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)], 1e-15));
}

#[test]
fn controlled_block_not_asserted_leaves_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // qubit 2 is the control register C, qubits 0..2 the target A
    let psi = random_state(2, &mut rng);
    let input = psi.tensor(&StateVector::zero(1)).unwrap();
    let op = CircuitOp::Controlled {
        controls: vec![2],
        value: 1,
        targets: vec![0, 1],
        matrix: random_unitary(4, &mut rng),
    };
    let out = input.apply(&op).unwrap();
    assert!(close(out.amplitudes(), input.amplitudes(), 1e-15));
}

#[test]
fn shift_wraps_modulo_register() {
    let s = StateVector::basis(2, 3).apply(&CircuitOp::shift(vec![0, 1], 1)).unwrap();
    assert_eq!(s, StateVector::basis(2, 0));
    let s = StateVector::basis(2, 1).apply(&CircuitOp::shift(vec![0, 1], 2)).unwrap();
    assert_eq!(s, StateVector::basis(2, 3));
}

#[test]
fn controlled_shift_copies_basis_value() {
    // |j⟩ on qubits 0,1 copied onto qubits 2,3 initially |0⟩
    for j in 0..4 {
        let s = StateVector::basis(4, j)
            .apply(&CircuitOp::controlled_shift(vec![0, 1], vec![2, 3]))
            .unwrap();
        assert_eq!(s, StateVector::basis(4, j | (j << 2)));
    }
}

#[test]
fn inner_product_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let psi = random_state(3, &mut rng);
    assert!((psi.inner_product(&psi).unwrap() - ONE).norm() < 1e-12);
    let z = StateVector::basis(1, 0);
    let o = StateVector::basis(1, 1);
    assert_eq!(z.inner_product(&o).unwrap(), C64::new(0.0, 0.0));
    let plus = z.apply(&CircuitOp::hadamard(0)).unwrap();
    assert!((z.inner_product(&plus).unwrap() - c(FRAC_1_SQRT_2)).norm() < 1e-15);
    assert!(matches!(
        z.inner_product(&psi),
        Err(crate::Error::DimensionMismatch { .. })
    ));
}

#[test]
fn out_of_range_and_overlapping_ops_are_rejected() {
    let s = StateVector::zero(2);
    assert!(matches!(
        s.apply(&CircuitOp::hadamard(2)),
        Err(crate::Error::QubitOutOfRange { qubit: 2, .. })
    ));
    assert!(s.apply(&CircuitOp::cnot(1, 1)).is_err());
}

#[test]
fn bell_marginal_is_maximally_mixed() {
    let bell = StateVector::zero(2)
        .apply(&CircuitOp::hadamard(0))
        .unwrap()
        .apply(&CircuitOp::cnot(0, 1))
        .unwrap();
    let rho = bell.partial_trace(&[0]).unwrap();
    assert!(max_abs_diff(rho.matrix(), DensityMatrix::maximally_mixed(1).matrix()) < 1e-15);
    let p = bell.register_probabilities(&[0]).unwrap();
    assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
}

#[test]
fn product_state_marginal_is_factor() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let psi = random_state(1, &mut rng);
    let phi = random_state(2, &mut rng);
    let prod = psi.tensor(&phi).unwrap();
    let rho = prod.partial_trace(&[0]).unwrap();
    assert!(max_abs_diff(rho.matrix(), psi.to_density_matrix().matrix()) < 1e-14);
    let rho_hi = prod.partial_trace(&[1, 2]).unwrap();
    assert!(max_abs_diff(rho_hi.matrix(), phi.to_density_matrix().matrix()) < 1e-14);
}

/// Brute-force partial trace: build |ψ⟩⟨ψ| densely and sum the traced indices.
fn partial_trace_reference(psi: &StateVector, keep: &[usize]) -> CMatrix {
    let n = psi.num_qubits();
    let full = psi.to_density_matrix().into_matrix();
    let k = keep.len();
    let mut out = CMatrix::zeros(1 << k, 1 << k);
    for r in 0..1usize << n {
        for col in 0..1usize << n {
            let agree = (0..n).filter(|q| !keep.contains(q)).all(|q| (r >> q) & 1 == (col >> q) & 1);
            if !agree {
                continue;
            }
            let a = keep.iter().enumerate().fold(0, |acc, (i, &q)| acc | (((r >> q) & 1) << i));
            let b = keep.iter().enumerate().fold(0, |acc, (i, &q)| acc | (((col >> q) & 1) << i));
            out[(a, b)] += full[(r, col)];
        }
    }
    out
}

#[test]
fn partial_trace_matches_dense_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let psi = random_state(3, &mut rng);
        for keep in [vec![0, 1], vec![2, 0], vec![1], vec![0, 1, 2]] {
            let fast = psi.partial_trace(&keep).unwrap();
            let slow = partial_trace_reference(&psi, &keep);
            assert!(max_abs_diff(fast.matrix(), &slow) < 1e-12);
        }
    }
}

#[test]
fn register_probabilities_match_partial_trace_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let psi = random_state(3, &mut rng);
        for reg in [vec![0], vec![2, 1], vec![0, 1, 2]] {
            let p = psi.register_probabilities(&reg).unwrap();
            let rho = psi.partial_trace(&reg).unwrap();
            for (j, pj) in p.iter().enumerate() {
                assert!((pj - rho.matrix()[(j, j)].re).abs() < 1e-12);
            }
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn invalid_keep_lists_are_rejected() {
    let s = StateVector::zero(2);
    assert!(s.partial_trace(&[]).is_err());
    assert!(s.partial_trace(&[0, 0]).is_err());
    assert!(s.register_probabilities(&[]).is_err());
}

#[test]
fn partial_trace_of_dense_purification_recovers_rho() {
    // Σ_j √r_j |φ_j⟩|j⟩ built from the eigendecomposition; independent of purify.
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for n in 1..=4 {
        let rho = random_density_matrix(1 << n, 1 << n, &mut rng);
        let (vals, vecs) = rho.eigen();
        let d = 1usize << n;
        let mut amps = vec![C64::new(0.0, 0.0); d * d];
        for j in 0..d {
            for s in 0..d {
                amps[s + d * j] = vecs[(s, j)] * vals[j].max(0.0).sqrt();
            }
        }
        let purified = StateVector::from_amplitudes(amps).unwrap();
        let keep: Vec<usize> = (0..n).collect();
        let back = purified.partial_trace(&keep).unwrap();
        assert!(max_abs_diff(back.matrix(), rho.matrix()) < 1e-10);
    }
}

fn random_op(n: usize, rng: &mut ChaCha8Rng) -> CircuitOp {
    use rand::seq::SliceRandom;
    use rand::Rng;
    let mut qubits: Vec<usize> = (0..n).collect();
    qubits.shuffle(rng);
    match rng.gen_range(0..5) {
        0 => CircuitOp::single(qubits[0], random_unitary(2, rng)),
        1 if n >= 2 => CircuitOp::Unitary {
            targets: vec![qubits[0], qubits[1]],
            matrix: random_unitary(4, rng),
        },
        2 if n >= 2 => CircuitOp::Controlled {
            controls: vec![qubits[0]],
            value: 1,
            targets: vec![qubits[1]],
            matrix: random_unitary(2, rng),
        },
        3 if n >= 3 => CircuitOp::Multiplexed {
            controls: vec![qubits[0], qubits[1]],
            targets: vec![qubits[2]],
            blocks: (0..4)
                .map(|v| (v != 2).then(|| random_unitary(2, rng)))
                .collect(),
        },
        4 if n >= 3 => CircuitOp::Shift {
            controls: vec![qubits[0]],
            targets: vec![qubits[1], qubits[2]],
            offset: rng.gen_range(0..4),
        },
        _ => CircuitOp::single(qubits[0], random_unitary(2, rng)),
    }
}

#[test]
fn norm_preserved_over_long_sequences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut s = random_state(5, &mut rng);
    for _ in 0..10_000 {
        let op = random_op(5, &mut rng);
        s.apply_in_place(&op).unwrap();
    }
    assert!((s.norm() - 1.0).abs() <= 1e-9);
}

#[test]
fn composition_matches_dense_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let n = 4;
        let a = random_op(n, &mut rng);
        let b = random_op(n, &mut rng);
        let s = random_state(n, &mut rng);
        let seq = s.apply(&a).unwrap().apply(&b).unwrap();
        let dense = b.dense(n).unwrap() * a.dense(n).unwrap();
        let v = nalgebra::DVector::from_column_slice(s.amplitudes());
        let expect = dense * v;
        assert!(close(seq.amplitudes(), expect.as_slice(), 1e-10));
    }
}

#[test]
fn multiplexed_block_equals_block_diagonal_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    // controls = qubits 2,3 (high), targets = qubits 0,1 (low): Σ_j |j⟩⟨j| ⊗ U_j
    let blocks: Vec<CMatrix> = (0..4).map(|_| random_unitary(4, &mut rng)).collect();
    let op = CircuitOp::Multiplexed {
        controls: vec![2, 3],
        targets: vec![0, 1],
        blocks: blocks.iter().cloned().map(Some).collect(),
    };
    let mut expect = CMatrix::zeros(16, 16);
    for (j, u) in blocks.iter().enumerate() {
        let mut proj = CMatrix::zeros(4, 4);
        proj[(j, j)] = ONE;
        expect += kron(&proj, u);
    }
    assert!(max_abs_diff(&op.dense(4).unwrap(), &expect) < 1e-12);
}

#[test]
fn adjoint_inverts_every_kind() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..100 {
        let op = random_op(4, &mut rng);
        let s = random_state(4, &mut rng);
        let mut t = s.apply(&op).unwrap();
        t.apply_adjoint_in_place(&op).unwrap();
        assert!(close(t.amplitudes(), s.amplitudes(), 1e-12));
        let mut u = s.apply(&op).unwrap();
        u.apply_in_place(&op.adjoint()).unwrap();
        assert!(close(u.amplitudes(), s.amplitudes(), 1e-12));
    }
}

#[test]
fn non_unitary_matrix_fails_validation() {
    let mut m = CMatrix::identity(2, 2);
    m[(0, 0)] = c(1.1);
    assert!(matches!(
        CircuitOp::single(0, m).validate(1),
        Err(crate::Error::NonUnitary { .. })
    ));
}

#[test]
fn density_json_round_trip_and_validation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rho = random_density_matrix(4, 3, &mut rng);
    let back = DensityMatrix::from_json(&rho.to_json()).unwrap();
    assert!(max_abs_diff(back.matrix(), rho.matrix()) < 1e-15);
    let bad: crate::simulator::DensityMatrixJson =
        serde_json::from_str(r#"{"dim":2,"re":[[1,0],[0,1]],"im":[[0,0],[0,0]]}"#).unwrap();
    assert!(DensityMatrix::from_json(&bad).is_err());
}

proptest! {
    #[test]
    fn random_circuits_preserve_norm(seed in any::<u64>(), len in 1usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = random_state(4, &mut rng);
        for _ in 0..len {
            let op = random_op(4, &mut rng);
            s.apply_in_place(&op).unwrap();
        }
        prop_assert!((s.norm() - 1.0).abs() <= 1e-10);
    }
}
