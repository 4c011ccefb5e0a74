//! Pauli twirling of compiled circuits.
//!
//! Every two-qubit gate is conjugated by random single-qubit Paulis chosen
//! so the gate (and hence the circuit) is unchanged up to global phase:
//! CZ, being Clifford, admits the full two-qubit Pauli group with the
//! compensating pair read off the CZ conjugation table; the parameterized
//! RZZ gates use pseudo-twirling, sampling only the subset of the Pauli
//! group that commutes with the ZZ interaction. Sampled Paulis are absorbed
//! into the neighbouring single-qubit gates, so the native two-qubit gate
//! count and depth are untouched.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand::Rng;

use crate::compiler::native::{NativeCircuit, NativeGate};
use crate::compiler::oneq::decompose_1q;
use crate::error::Result;
use crate::mat::{self, Mat2};

/// A single-qubit Pauli (or identity) label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliLabel {
    I,
    X,
    Y,
    Z,
}

impl PauliLabel {
    fn matrix(self) -> Mat2 {
        match self {
            PauliLabel::I => Mat2::identity(),
            PauliLabel::X => mat::pauli_x(),
            PauliLabel::Y => mat::pauli_y(),
            PauliLabel::Z => mat::pauli_z(),
        }
    }

    /// Product of two labels, dropping the phase (it is a global phase for
    /// the twirled circuit).
    fn mul(self, rhs: PauliLabel) -> PauliLabel {
        use PauliLabel::*;
        match (self, rhs) {
            (I, p) | (p, I) => p,
            (a, b) if a == b => I,
            (X, Y) | (Y, X) => Z,
            (Y, Z) | (Z, Y) => X,
            (Z, X) | (X, Z) => Y,
            _ => unreachable!(),
        }
    }
}

/// CZ conjugation of a Pauli on the first wire: `CZ (P ⊗ I) CZ`.
fn cz_conj_low(p: PauliLabel) -> (PauliLabel, PauliLabel) {
    match p {
        PauliLabel::I => (PauliLabel::I, PauliLabel::I),
        PauliLabel::X => (PauliLabel::X, PauliLabel::Z),
        PauliLabel::Y => (PauliLabel::Y, PauliLabel::Z),
        PauliLabel::Z => (PauliLabel::Z, PauliLabel::I),
    }
}

fn cz_conj_high(p: PauliLabel) -> (PauliLabel, PauliLabel) {
    let (h, l) = cz_conj_low(p);
    (l, h)
}

/// The eight Pauli pairs commuting with `Z ⊗ Z`.
pub const RZZ_COMMUTANT: [(PauliLabel, PauliLabel); 8] = [
    (PauliLabel::I, PauliLabel::I),
    (PauliLabel::I, PauliLabel::Z),
    (PauliLabel::Z, PauliLabel::I),
    (PauliLabel::Z, PauliLabel::Z),
    (PauliLabel::X, PauliLabel::X),
    (PauliLabel::X, PauliLabel::Y),
    (PauliLabel::Y, PauliLabel::X),
    (PauliLabel::Y, PauliLabel::Y),
];

const ALL_PAULIS: [PauliLabel; 4] = [PauliLabel::I, PauliLabel::X, PauliLabel::Y, PauliLabel::Z];

/// Sampled dressing for one two-qubit gate.
struct TwirlPair {
    pre: (PauliLabel, PauliLabel),
    post: (PauliLabel, PauliLabel),
}

fn sample_pair(gate: &NativeGate, rng: &mut ChaCha12Rng) -> TwirlPair {
    match gate {
        NativeGate::Cz { .. } => {
            let pre = (
                ALL_PAULIS[rng.random_range(0..4)],
                ALL_PAULIS[rng.random_range(0..4)],
            );
            // post = CZ (pre) CZ, so that post . CZ . pre = CZ up to phase.
            let (l1, h1) = cz_conj_low(pre.0);
            let (l2, h2) = cz_conj_high(pre.1);
            TwirlPair {
                pre,
                post: (l1.mul(l2), h1.mul(h2)),
            }
        }
        NativeGate::Rzz { .. } => {
            let pre = RZZ_COMMUTANT[rng.random_range(0..8)];
            TwirlPair { pre, post: pre }
        }
        _ => unreachable!("only two-qubit gates are twirled"),
    }
}

/// Produce `n_twirl` unitarily-equivalent randomized variants.
pub fn twirl(native: &NativeCircuit, n_twirl: usize, seed: u64) -> Result<Vec<NativeCircuit>> {
    if n_twirl == 0 {
        return Err(crate::error::Error::invalid("n_twirl must be >= 1"));
    }
    (0..n_twirl)
        .map(|variant| {
            let mut rng = ChaCha12Rng::seed_from_u64(
                seed.wrapping_add((variant as u64).wrapping_mul(0x9E3779B97F4A7C15)),
            );
            Ok(twirl_once(native, &mut rng))
        })
        .collect()
}

fn twirl_once(native: &NativeCircuit, rng: &mut ChaCha12Rng) -> NativeCircuit {
    let width = native.width;
    let mut pending: Vec<Mat2> = vec![Mat2::identity(); width];
    let mut layers: Vec<Vec<NativeGate>> = Vec::with_capacity(native.layers.len());

    let flush = |pending: &mut Vec<Mat2>, qubits: &[usize], layers: &mut Vec<Vec<NativeGate>>| {
        let seqs: Vec<Vec<NativeGate>> = qubits
            .iter()
            .map(|&q| {
                let m = std::mem::replace(&mut pending[q], Mat2::identity());
                decompose_1q(&m, q)
            })
            .collect();
        let max_len = seqs.iter().map(|s| s.len()).max().unwrap_or(0);
        for t in 0..max_len {
            let layer: Vec<NativeGate> = seqs.iter().filter_map(|s| s.get(t).cloned()).collect();
            if !layer.is_empty() {
                layers.push(layer);
            }
        }
    };

    for layer in &native.layers {
        let has_2q = layer.iter().any(|g| g.is_two_qubit());
        if !has_2q {
            for gate in layer {
                let q = gate.qubits()[0];
                let m = gate.matrix_1q().expect("one-qubit native gate");
                pending[q] = m.matmul(&pending[q]);
            }
            continue;
        }
        // Sample dressings, fold the pre-Paulis, flush, emit the 2q layer,
        // then leave the post-Paulis pending.
        let mut emitted = Vec::with_capacity(layer.len());
        let mut posts: Vec<(usize, PauliLabel)> = Vec::new();
        let mut wires: Vec<usize> = Vec::new();
        for gate in layer {
            debug_assert!(gate.is_two_qubit());
            let qs = gate.qubits();
            let pair = sample_pair(gate, rng);
            pending[qs[0]] = pair.pre.0.matrix().matmul(&pending[qs[0]]);
            pending[qs[1]] = pair.pre.1.matrix().matmul(&pending[qs[1]]);
            posts.push((qs[0], pair.post.0));
            posts.push((qs[1], pair.post.1));
            wires.extend_from_slice(&qs);
            emitted.push(gate.clone());
        }
        flush(&mut pending, &wires, &mut layers);
        layers.push(emitted);
        for (q, p) in posts {
            pending[q] = p.matrix().matmul(&pending[q]);
        }
    }
    let all: Vec<usize> = (0..width).collect();
    flush(&mut pending, &all, &mut layers);

    NativeCircuit {
        width,
        layers,
        mode_perm: native.mode_perm.clone(),
        source_gate_count: native.source_gate_count,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::build_trotter_circuit;
    use crate::compiler::lower::lower;
    use crate::compiler::native::metrics;
    use crate::model::HubbardParams;

    #[test]
    fn commutant_members_commute_with_zz() {
        // P⊗Q commutes with Z⊗Z iff it anticommutes with Z on an even
        // number of wires.
        let anti = |p: PauliLabel| matches!(p, PauliLabel::X | PauliLabel::Y);
        for (a, b) in RZZ_COMMUTANT {
            assert_eq!(anti(a), anti(b));
        }
        // And the commutant is exactly 8 of the 16 pairs.
        let mut n = 0;
        for a in ALL_PAULIS {
            for b in ALL_PAULIS {
                if anti(a) == anti(b) {
                    n += 1;
                    assert!(RZZ_COMMUTANT.contains(&(a, b)));
                }
            }
        }
        assert_eq!(n, RZZ_COMMUTANT.len());
    }

    #[test]
    fn twirl_is_deterministic_per_seed() {
        let params = HubbardParams::new(2, 1.0, 2.0, 0.0).unwrap();
        let native = lower(&build_trotter_circuit(&params, 0.2, 1).unwrap()).unwrap();
        let a = twirl(&native, 3, 42).unwrap();
        let b = twirl(&native, 3, 42).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.layers, y.layers);
        }
        let c = twirl(&native, 3, 43).unwrap();
        assert!(a.iter().zip(&c).any(|(x, y)| x.layers != y.layers));
    }

    #[test]
    fn twirl_preserves_two_qubit_structure() {
        let params = HubbardParams::new(3, 4.0, 1.0, 0.2).unwrap();
        let native = lower(&build_trotter_circuit(&params, 0.15, 2).unwrap()).unwrap();
        let base = metrics(&native);
        for variant in twirl(&native, 5, 7).unwrap() {
            let m = metrics(&variant);
            assert_eq!(m, base);
        }
    }
}
