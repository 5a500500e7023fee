//! Dense statevector engine.
//!
//! Amplitudes are stored as a flat `Vec<Complex64>` indexed little-endian
//! (qubit 0 is the least significant bit). Register-controlled blocks are
//! applied slice by slice over the control values; the full `2^m × 2^m`
//! operator is never materialized on the hot path.

mod density;
mod op;
mod state;

pub use density::{DensityMatrix, DensityMatrixJson, HERMITIAN_TOL, PSD_TOL, TRACE_TOL};
pub use op::{hadamard_matrix, pauli_x_matrix, shift_matrix, swap_matrix, CircuitOp, UNITARY_TOL};
pub use state::{ComplexVectorJson, StateVector};

use crate::error::Result;
use crate::linalg::{bit_mask, for_each_free_index, offsets, CMatrix, C64, ZERO};

/// Largest register the dense engine accepts.
pub const MAX_QUBITS: usize = 24;

/// Applies `op` in place to a raw amplitude buffer of `num_qubits` qubits.
pub fn apply_to_amplitudes(amps: &mut [C64], num_qubits: usize, op: &CircuitOp) -> Result<()> {
    op.check_layout(num_qubits)?;
    apply_unchecked(amps, op, false);
    Ok(())
}

/// Applies `op†` in place.
pub fn apply_adjoint_to_amplitudes(
    amps: &mut [C64],
    num_qubits: usize,
    op: &CircuitOp,
) -> Result<()> {
    op.check_layout(num_qubits)?;
    apply_unchecked(amps, op, true);
    Ok(())
}

pub(crate) fn apply_unchecked(amps: &mut [C64], op: &CircuitOp, dagger: bool) {
    match op {
        CircuitOp::Unitary { targets, matrix } => {
            apply_blocks(amps, targets, &[], |_| Some(matrix), dagger)
        }
        CircuitOp::Controlled { controls, value, targets, matrix } => apply_blocks(
            amps,
            targets,
            controls,
            |v| (v == *value).then_some(matrix),
            dagger,
        ),
        CircuitOp::Multiplexed { controls, targets, blocks } => {
            apply_blocks(amps, targets, controls, |v| blocks[v].as_ref(), dagger)
        }
        CircuitOp::Shift { controls, targets, offset } => {
            apply_shift(amps, controls, targets, *offset, dagger)
        }
    }
}

fn row_major(m: &CMatrix, dagger: bool) -> Vec<C64> {
    let d = m.nrows();
    let mut out = Vec::with_capacity(d * d);
    for r in 0..d {
        for c in 0..d {
            out.push(if dagger { m[(c, r)].conj() } else { m[(r, c)] });
        }
    }
    out
}

fn apply_blocks<'a>(
    amps: &mut [C64],
    targets: &[usize],
    controls: &[usize],
    block: impl Fn(usize) -> Option<&'a CMatrix>,
    dagger: bool,
) {
    let dim = amps.len();
    let fixed = bit_mask(targets) | bit_mask(controls);
    let t_off = offsets(targets);
    let c_off = offsets(controls);
    let k = t_off.len();
    let mut buf = vec![ZERO; k];
    for (v, &coff) in c_off.iter().enumerate() {
        let Some(m) = block(v) else { continue };
        let u = row_major(m, dagger);
        if k == 2 {
            let (u00, u01, u10, u11) = (u[0], u[1], u[2], u[3]);
            let step = t_off[1];
            for_each_free_index(dim, fixed, |base| {
                let i0 = base | coff;
                let i1 = i0 | step;
                let a = amps[i0];
                let b = amps[i1];
                amps[i0] = u00 * a + u01 * b;
                amps[i1] = u10 * a + u11 * b;
            });
        } else {
            for_each_free_index(dim, fixed, |base| {
                let i0 = base | coff;
                for (slot, &o) in buf.iter_mut().zip(&t_off) {
                    *slot = amps[i0 | o];
                }
                for (r, &o) in t_off.iter().enumerate() {
                    let row = &u[r * k..(r + 1) * k];
                    amps[i0 | o] = row.iter().zip(&buf).map(|(x, y)| x * y).sum();
                }
            });
        }
    }
}

fn apply_shift(amps: &mut [C64], controls: &[usize], targets: &[usize], offset: usize, dagger: bool) {
    let dim = amps.len();
    let fixed = bit_mask(targets) | bit_mask(controls);
    let t_off = offsets(targets);
    let c_off = offsets(controls);
    let k = t_off.len();
    let mut buf = vec![ZERO; k];
    for (v, &coff) in c_off.iter().enumerate() {
        let forward = (offset + v) % k;
        let s = if dagger { (k - forward) % k } else { forward };
        if s == 0 {
            continue;
        }
        for_each_free_index(dim, fixed, |base| {
            let i0 = base | coff;
            for (slot, &o) in buf.iter_mut().zip(&t_off) {
                *slot = amps[i0 | o];
            }
            for (l, &val) in buf.iter().enumerate() {
                amps[i0 | t_off[(l + s) % k]] = val;
            }
        });
    }
}

/// Transition matrices `E_v[c, c'] = Σ_rest ket[c] · conj(bra[c'])` restricted
/// to each control value `v`, so that `⟨bra| (|v⟩⟨v| ⊗ U) |ket⟩ = Tr(U · E_v)`.
pub(crate) fn transition_matrices(
    ket: &[C64],
    bra: &[C64],
    targets: &[usize],
    controls: &[usize],
    wanted: impl Fn(usize) -> bool,
) -> Vec<Option<CMatrix>> {
    let dim = ket.len();
    let fixed = bit_mask(targets) | bit_mask(controls);
    let t_off = offsets(targets);
    let c_off = offsets(controls);
    let k = t_off.len();
    c_off
        .iter()
        .enumerate()
        .map(|(v, &coff)| {
            if !wanted(v) {
                return None;
            }
            let mut e = CMatrix::zeros(k, k);
            if k == 2 {
                let step = t_off[1];
                let (mut e00, mut e01, mut e10, mut e11) = (ZERO, ZERO, ZERO, ZERO);
                for_each_free_index(dim, fixed, |base| {
                    let i0 = base | coff;
                    let i1 = i0 | step;
                    let (k0, k1) = (ket[i0], ket[i1]);
                    let (b0, b1) = (bra[i0].conj(), bra[i1].conj());
                    e00 += k0 * b0;
                    e01 += k0 * b1;
                    e10 += k1 * b0;
                    e11 += k1 * b1;
                });
                e[(0, 0)] = e00;
                e[(0, 1)] = e01;
                e[(1, 0)] = e10;
                e[(1, 1)] = e11;
            } else {
                for_each_free_index(dim, fixed, |base| {
                    let i0 = base | coff;
                    for (c, &oc) in t_off.iter().enumerate() {
                        let kc = ket[i0 | oc];
                        for (cp, &ocp) in t_off.iter().enumerate() {
                            e[(c, cp)] += kc * bra[i0 | ocp].conj();
                        }
                    }
                });
            }
            Some(e)
        })
        .collect()
}

#[cfg(test)]
mod tests;
