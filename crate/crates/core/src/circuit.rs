//! Mirrored Trotter circuits and echo circuits as layered abstract gates.
//!
//! One Trotter step follows the fixed layer sequence
//!
//! ```text
//! RZ | XX+YY hops | RZZ onsite | fSWAP | XX+YY hops | RZ
//! ```
//!
//! which realises
//! `exp(-i dt/2 H_1Q) exp(-i dt H_S) F exp(-i dt H_U2Q) exp(-i dt H_S) exp(-i dt/2 H_1Q)`.
//! Consecutive steps share their boundary RZ layers, which the builder merges
//! into a single layer of doubled angle. Each fSWAP layer exchanges the two
//! spin modes on every site, so after an odd number of steps the measured
//! bits carry swapped labels; [`ModePermutation`] tracks this and
//! [`apply_virtual_permutation`] undoes it classically on sampled shots.
//!
//! Angle conventions (`RZ(t) = exp(-i t Z/2)` etc., see [`crate::mat`]):
//! `RZ` angle `(mu - U/2) dt / 2`, `RZZ` angle `U dt / 2`, hopping rotation
//! `XX+YY` angle `-t_h dt`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::{self, CMat, Mat2, ONE, ZERO};
use crate::model::{mode_index, mode_label, FockState, HubbardParams, Spin};
use crate::statevector::ShotTable;

/// Abstract gate kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Gate {
    #[serde(rename = "RZ")]
    Rz { q: usize, theta: f64 },
    #[serde(rename = "RZZ")]
    Rzz { q1: usize, q2: usize, theta: f64 },
    #[serde(rename = "RXXplusYY")]
    XxPlusYy { q1: usize, q2: usize, theta: f64 },
    #[serde(rename = "FSWAP")]
    Fswap { q1: usize, q2: usize },
    #[serde(rename = "X")]
    X { q: usize },
    /// State-preparation X: same unitary as `X`, but marks a qubit whose
    /// basis state is known to the compiler from the initial `|0...0>`.
    #[serde(rename = "PREP")]
    Prep { q: usize },
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::Rz { q, .. } | Gate::X { q } | Gate::Prep { q } => vec![q],
            Gate::Rzz { q1, q2, .. }
            | Gate::XxPlusYy { q1, q2, .. }
            | Gate::Fswap { q1, q2 } => vec![q1, q2],
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(
            self,
            Gate::Rzz { .. } | Gate::XxPlusYy { .. } | Gate::Fswap { .. }
        )
    }

    /// Exact gate-wise inverse.
    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::Rz { q, theta } => Gate::Rz { q, theta: -theta },
            Gate::Rzz { q1, q2, theta } => Gate::Rzz {
                q1,
                q2,
                theta: -theta,
            },
            Gate::XxPlusYy { q1, q2, theta } => Gate::XxPlusYy {
                q1,
                q2,
                theta: -theta,
            },
            Gate::Fswap { q1, q2 } => Gate::Fswap { q1, q2 },
            Gate::X { q } => Gate::X { q },
            Gate::Prep { q } => Gate::X { q },
        }
    }

    /// Single-qubit matrix, if this is a one-qubit gate.
    pub fn matrix_1q(&self) -> Option<Mat2> {
        match *self {
            Gate::Rz { theta, .. } => Some(mat::rz(theta)),
            Gate::X { .. } | Gate::Prep { .. } => Some(mat::pauli_x()),
            _ => None,
        }
    }

    /// Two-qubit matrix in the `bit_q1 + 2*bit_q2` basis, if applicable.
    pub fn matrix_2q(&self) -> Option<CMat> {
        match *self {
            Gate::Rzz { theta, .. } => {
                let e = num_complex::Complex64::from_polar(1.0, -theta / 2.0);
                let mut m = CMat::zeros(4);
                m.set(0, 0, e);
                m.set(1, 1, e.conj());
                m.set(2, 2, e.conj());
                m.set(3, 3, e);
                Some(m)
            }
            Gate::XxPlusYy { theta, .. } => {
                // exp(-i theta (XX+YY)/2): rotation within span{|01>, |10>}.
                let c = num_complex::Complex64::new(theta.cos(), 0.0);
                let s = num_complex::Complex64::new(0.0, -theta.sin());
                let mut m = CMat::identity(4);
                m.set(1, 1, c);
                m.set(1, 2, s);
                m.set(2, 1, s);
                m.set(2, 2, c);
                Some(m)
            }
            Gate::Fswap { .. } => Some(CMat::from_rows(&[
                &[ONE, ZERO, ZERO, ZERO],
                &[ZERO, ZERO, ONE, ZERO],
                &[ZERO, ONE, ZERO, ZERO],
                &[ZERO, ZERO, ZERO, -ONE],
            ])),
            _ => None,
        }
    }
}

/// Map from physical qubit index to the fermionic mode label it carries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModePermutation {
    pub l: usize,
    /// `labels[q]` = (site, spin) encoded on qubit `q`.
    pub labels: Vec<(usize, Spin)>,
}

impl ModePermutation {
    /// Pair-interleaved identity labelling.
    pub fn identity(l: usize) -> Self {
        let labels = (0..2 * l).map(|j| mode_label(j, l).unwrap()).collect();
        ModePermutation { l, labels }
    }

    /// Apply one full fSWAP layer: swap the labels on every site pair.
    pub fn apply_fswap_layer(&mut self) {
        for i in 0..self.l {
            self.labels.swap(2 * i, 2 * i + 1);
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == ModePermutation::identity(self.l)
    }

    /// Canonical qubit index that the bit currently on qubit `q` belongs to.
    pub fn canonical_index(&self, q: usize) -> usize {
        let (site, spin) = self.labels[q];
        mode_index(site, spin, self.l).unwrap()
    }
}

/// Layered circuit: gates within one layer act on disjoint qubits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Circuit {
    pub width: usize,
    pub layers: Vec<Vec<Gate>>,
    pub mode_perm: ModePermutation,
}

impl Circuit {
    pub fn validate(&self) -> Result<()> {
        for layer in &self.layers {
            let mut used = vec![false; self.width];
            for gate in layer {
                let qs = gate.qubits();
                for &q in &qs {
                    if q >= self.width {
                        return Err(Error::invalid(format!(
                            "gate qubit {q} out of range for width {}",
                            self.width
                        )));
                    }
                    if used[q] {
                        return Err(Error::invalid(
                            "layer contains overlapping gates".to_string(),
                        ));
                    }
                    used[q] = true;
                }
                if qs.len() == 2 && qs[0].abs_diff(qs[1]) != 1 {
                    return Err(Error::invalid(
                        "two-qubit gate is not on chain-adjacent qubits".to_string(),
                    ));
                }
            }
        }
        if self.mode_perm.labels.len() != self.width {
            return Err(Error::invalid("mode permutation width mismatch".to_string()));
        }
        Ok(())
    }

    pub fn gate_count(&self) -> usize {
        self.layers.iter().map(|l| l.len()).sum()
    }

    /// Prepend a preparation layer setting the given Fock state from
    /// `|0...0>`. The compiler uses the PREP marks for its initial-state
    /// gate cancellation.
    pub fn with_preparation(mut self, state: &FockState) -> Result<Circuit> {
        if state.n_qubits() != self.width {
            return Err(Error::invalid("preparation width mismatch".to_string()));
        }
        let prep: Vec<Gate> = state
            .bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(q, _)| Gate::Prep { q })
            .collect();
        self.layers.insert(0, prep);
        Ok(self)
    }

    /// Deterministic JSON dump.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Circuit> {
        let c: Circuit =
            serde_json::from_str(s).map_err(|e| Error::invalid(format!("circuit JSON: {e}")))?;
        c.validate()?;
        Ok(c)
    }
}

/// Per-step rotation angles, override-aware.
struct StepAngles<'a> {
    params: &'a HubbardParams,
    dt: f64,
}

impl StepAngles<'_> {
    /// RZ angle for the qubit currently carrying `(site, spin)`.
    fn rz(&self, site: usize, spin: Spin) -> f64 {
        (self.params.mu_mode(site, spin) - self.params.u_site(site) / 2.0) * self.dt / 2.0
    }

    /// Hopping rotation angle for bond `j` (same for both hop layers: the
    /// qubit pair `(2j+1, 2j+2)` always couples sites `j` and `j+1`).
    fn hop(&self, bond: usize) -> f64 {
        -self.params.t_bond(bond) * self.dt
    }

    fn rzz(&self, site: usize) -> f64 {
        self.params.u_site(site) * self.dt / 2.0
    }
}

fn rz_layer(perm: &ModePermutation, angles: &StepAngles, scale: f64) -> Vec<Gate> {
    (0..perm.labels.len())
        .map(|q| {
            let (site, spin) = perm.labels[q];
            Gate::Rz {
                q,
                theta: scale * angles.rz(site, spin),
            }
        })
        .collect()
}

fn hop_layer(l: usize, angles: &StepAngles, sign: f64) -> Vec<Gate> {
    (0..l - 1)
        .map(|j| Gate::XxPlusYy {
            q1: 2 * j + 1,
            q2: 2 * j + 2,
            theta: sign * angles.hop(j),
        })
        .collect()
}

fn rzz_layer(l: usize, angles: &StepAngles, sign: f64) -> Vec<Gate> {
    (0..l)
        .map(|i| Gate::Rzz {
            q1: 2 * i,
            q2: 2 * i + 1,
            theta: sign * angles.rzz(i),
        })
        .collect()
}

fn fswap_layer(l: usize) -> Vec<Gate> {
    (0..l)
        .map(|i| Gate::Fswap {
            q1: 2 * i,
            q2: 2 * i + 1,
        })
        .collect()
}

/// Build the `n_steps`-step mirrored Trotter circuit.
pub fn build_trotter_circuit(params: &HubbardParams, dt: f64, n_steps: usize) -> Result<Circuit> {
    if dt <= 0.0 {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    if n_steps == 0 {
        return Err(Error::invalid("n_steps must be >= 1".to_string()));
    }
    params.validate()?;
    let l = params.l;
    let angles = StepAngles { params, dt };
    let mut perm = ModePermutation::identity(l);
    let mut layers: Vec<Vec<Gate>> = Vec::with_capacity(5 * n_steps + 1);

    layers.push(rz_layer(&perm, &angles, 1.0));
    for step in 0..n_steps {
        layers.push(hop_layer(l, &angles, 1.0));
        layers.push(rzz_layer(l, &angles, 1.0));
        layers.push(fswap_layer(l));
        perm.apply_fswap_layer();
        layers.push(hop_layer(l, &angles, 1.0));
        // Boundary RZ layers of adjacent steps are contiguous; merge them.
        let scale = if step + 1 < n_steps { 2.0 } else { 1.0 };
        layers.push(rz_layer(&perm, &angles, scale));
    }

    let circuit = Circuit {
        width: 2 * l,
        layers,
        mode_perm: perm,
    };
    circuit.validate()?;
    Ok(circuit)
}

/// Build the echo circuit: `n/2` forward steps followed by `n/2` exact
/// inverse steps. Noiselessly the identity on any input.
pub fn build_echo_circuit(params: &HubbardParams, dt: f64, n_steps: usize) -> Result<Circuit> {
    if n_steps % 2 != 0 {
        return Err(Error::invalid(format!(
            "echo circuits need an even step count, got {n_steps}"
        )));
    }
    params.validate()?;
    if n_steps == 0 {
        // Bare preparation reference point.
        return Ok(Circuit {
            width: 2 * params.l,
            layers: Vec::new(),
            mode_perm: ModePermutation::identity(params.l),
        });
    }
    let forward = build_trotter_circuit(params, dt, n_steps / 2)?;
    let mut layers = forward.layers.clone();
    let mut perm = forward.mode_perm.clone();
    // Gate-wise inversion in reverse order; the junction RZ layers merge.
    let inverse_layers: Vec<Vec<Gate>> = forward
        .layers
        .iter()
        .rev()
        .map(|layer| layer.iter().map(Gate::inverse).collect())
        .collect();
    for (k, inv) in inverse_layers.into_iter().enumerate() {
        if k == 0 {
            // Merge with the forward circuit's final RZ layer: angles cancel
            // exactly, leaving a zero-angle RZ layer.
            let last = layers.last_mut().expect("forward circuit is nonempty");
            let merged: Vec<Gate> = last
                .iter()
                .map(|g| match g {
                    Gate::Rz { q, .. } => Gate::Rz { q: *q, theta: 0.0 },
                    _ => unreachable!("trotter circuits end in an RZ layer"),
                })
                .collect();
            *last = merged;
            continue;
        }
        for gate in &inv {
            if matches!(gate, Gate::Fswap { .. }) {
                // One perm update per fSWAP layer.
                perm.apply_fswap_layer();
                break;
            }
        }
        layers.push(inv);
    }
    let circuit = Circuit {
        width: 2 * params.l,
        layers,
        mode_perm: perm,
    };
    debug_assert!(circuit.mode_perm.is_identity());
    circuit.validate()?;
    Ok(circuit)
}

/// Relabel sampled bitstrings back to canonical pair-interleaved mode order.
pub fn apply_virtual_permutation(shots: &ShotTable, perm: &ModePermutation) -> Result<ShotTable> {
    if shots.width != perm.labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "shot width {} does not match permutation width {}",
            shots.width,
            perm.labels.len()
        )));
    }
    let mut out = ShotTable::empty(shots.width);
    for (&bits, &count) in &shots.counts {
        let mut relabeled = 0u64;
        for q in 0..shots.width {
            if (bits >> q) & 1 == 1 {
                relabeled |= 1 << perm.canonical_index(q);
            }
        }
        out.add(relabeled, count);
    }
    Ok(out)
}
