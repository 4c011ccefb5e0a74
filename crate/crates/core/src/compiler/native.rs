//! Native gate set and compiled-circuit metrics.
//!
//! The target instruction set is the Heron-class fractional set:
//! `RZ(theta)`, `RX(theta)`, `RZZ(theta)` plus fixed-angle `CZ`, `X` and
//! `SX`. Two-qubit depth counts layers containing at least one two-qubit
//! gate; for the standard Trotter circuits it obeys
//! `D2Q = 5 n_step + 2` and `N2Q = (5L-2) n_step + 2(L-1) - 1`.

use serde::{Deserialize, Serialize};

use crate::circuit::ModePermutation;
use crate::mat::{self, CMat, Mat2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum NativeGate {
    #[serde(rename = "RZ")]
    Rz { q: usize, theta: f64 },
    #[serde(rename = "RX")]
    Rx { q: usize, theta: f64 },
    #[serde(rename = "SX")]
    Sx { q: usize },
    #[serde(rename = "X")]
    X { q: usize },
    #[serde(rename = "RZZ")]
    Rzz { q1: usize, q2: usize, theta: f64 },
    #[serde(rename = "CZ")]
    Cz { q1: usize, q2: usize },
}

impl NativeGate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            NativeGate::Rz { q, .. }
            | NativeGate::Rx { q, .. }
            | NativeGate::Sx { q }
            | NativeGate::X { q } => vec![q],
            NativeGate::Rzz { q1, q2, .. } | NativeGate::Cz { q1, q2 } => vec![q1, q2],
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self, NativeGate::Rzz { .. } | NativeGate::Cz { .. })
    }

    pub fn matrix_1q(&self) -> Option<Mat2> {
        match *self {
            NativeGate::Rz { theta, .. } => Some(mat::rz(theta)),
            NativeGate::Rx { theta, .. } => Some(mat::rx(theta)),
            NativeGate::Sx { .. } => Some(mat::sx()),
            NativeGate::X { .. } => Some(mat::pauli_x()),
            _ => None,
        }
    }

    /// Two-qubit matrix in the `bit_q1 + 2*bit_q2` basis.
    pub fn matrix_2q(&self) -> Option<CMat> {
        match *self {
            NativeGate::Rzz { theta, .. } => {
                let e = num_complex::Complex64::from_polar(1.0, -theta / 2.0);
                let mut m = CMat::zeros(4);
                m.set(0, 0, e);
                m.set(1, 1, e.conj());
                m.set(2, 2, e.conj());
                m.set(3, 3, e);
                Some(m)
            }
            NativeGate::Cz { .. } => {
                let mut m = CMat::identity(4);
                m.set(3, 3, -mat::ONE);
                Some(m)
            }
            _ => None,
        }
    }
}

/// Compiled circuit over native gates only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NativeCircuit {
    pub width: usize,
    pub layers: Vec<Vec<NativeGate>>,
    /// Mode labelling carried over from the source circuit.
    pub mode_perm: ModePermutation,
    /// Gate count of the abstract circuit this was lowered from.
    pub source_gate_count: usize,
}

impl NativeCircuit {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("native circuit serialization cannot fail")
    }

    pub fn gate_count(&self) -> usize {
        self.layers.iter().map(|l| l.len()).sum()
    }
}

/// Two-qubit depth and count of a compiled circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileMetrics {
    pub d2q: usize,
    pub n2q: usize,
}

/// Scan layers for two-qubit structure.
pub fn metrics(native: &NativeCircuit) -> CompileMetrics {
    let mut d2q = 0;
    let mut n2q = 0;
    for layer in &native.layers {
        let twoq = layer.iter().filter(|g| g.is_two_qubit()).count();
        if twoq > 0 {
            d2q += 1;
        }
        n2q += twoq;
    }
    CompileMetrics { d2q, n2q }
}

/// Closed-form metrics of the standard `n`-step Trotter circuit.
pub fn trotter_metrics_formula(l: usize, n_steps: usize) -> CompileMetrics {
    CompileMetrics {
        d2q: 5 * n_steps + 2,
        n2q: (5 * l - 2) * n_steps + 2 * (l - 1) - 1,
    }
}
