//! Lowering from abstract circuits to the native gate set.
//!
//! Block templates (all angles in closed form, every instantiation verified
//! against its 4x4 target to 1e-12 before emission):
//!
//! * `XX+YY` hopping block: two-RZZ sandwich
//!   `(H⊗H) RZZ(t) (SX⊗SX) RZZ(t) (HS†⊗HS†)`.
//! * Boundary block: the trailing hop layer of one step, the merged RZ
//!   layer, and the leading hop layer of the next step collapse into a
//!   single two-RZZ block; the dressing angles come from an Euler solve of
//!   the particle-number-conserving 2x2 block, which also covers unequal RZ
//!   angles on the two wires.
//! * `RZZ·fSWAP` block: three two-qubit gates via
//!   `(V⊗V) RZZ(-pi/2) (V†⊗V†) CX (RX(-pi/2)⊗RZ(t)) CX (S†⊗S†)`, `V = SH`,
//!   with the CXs expanded over CZ.
//!
//! For circuits carrying a preparation layer the pass tracks which qubits
//! are still in a known computational basis state and removes the one
//! two-qubit gate whose control wire is known — the leading CZ of the very
//! first `RZZ·fSWAP` block — fixing its action up with single-qubit gates.
//! This is the `-1` in the gate-count formula. For prepared circuits the
//! lowered circuit therefore agrees with the abstract one as a map on the
//! prepared input (and on the full space when nothing was cancelled).

use crate::circuit::{Circuit, Gate};
use crate::compiler::native::{NativeCircuit, NativeGate};
use crate::compiler::oneq::decompose_1q;
use crate::error::{Error, Result};
use crate::mat::{self, CMat, Mat2};

const SYNTH_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
enum TwoQKind {
    Rzz(f64),
    Cz,
}

/// One element of a block template, in time order.
#[derive(Debug, Clone)]
enum BlockOp {
    OneQ { low: Mat2, high: Mat2 },
    TwoQ(TwoQKind),
}

/// An instantiated two-qubit block awaiting emission.
struct BlockInstance {
    low: usize,
    high: usize,
    ops: Vec<BlockOp>,
    target: CMat,
    name: &'static str,
}

impl BlockInstance {
    /// 4x4 realization of the template ops.
    fn realization(&self) -> CMat {
        let mut m = CMat::identity(4);
        for op in &self.ops {
            let step = match op {
                BlockOp::OneQ { low, high } => high.to_cmat().kron(&low.to_cmat()),
                BlockOp::TwoQ(TwoQKind::Rzz(theta)) => NativeGate::Rzz {
                    q1: 0,
                    q2: 1,
                    theta: *theta,
                }
                .matrix_2q()
                .unwrap(),
                BlockOp::TwoQ(TwoQKind::Cz) => NativeGate::Cz { q1: 0, q2: 1 }.matrix_2q().unwrap(),
            };
            m = step.matmul(&m);
        }
        m
    }

    fn verify(&self) -> Result<()> {
        let residual = self.target.phase_aligned_distance(&self.realization());
        if residual > SYNTH_TOL {
            return Err(Error::Synthesis {
                block: self.name,
                residual,
            });
        }
        Ok(())
    }
}

fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    a.matmul(b)
}

/// Hopping block `exp(-i theta (XX+YY)/2)` as a two-RZZ sandwich.
fn hop_ops(theta: f64) -> Vec<BlockOp> {
    let h = mat::hadamard();
    let hs_dag = mul(&h, &mat::s_dagger());
    vec![
        BlockOp::OneQ {
            low: hs_dag,
            high: hs_dag,
        },
        BlockOp::TwoQ(TwoQKind::Rzz(theta)),
        BlockOp::OneQ {
            low: mat::sx(),
            high: mat::sx(),
        },
        BlockOp::TwoQ(TwoQKind::Rzz(theta)),
        BlockOp::OneQ { low: h, high: h },
    ]
}

fn hop_target(theta: f64) -> CMat {
    Gate::XxPlusYy {
        q1: 0,
        q2: 1,
        theta,
    }
    .matrix_2q()
    .unwrap()
}

fn hop_block(low: usize, high: usize, theta: f64) -> BlockInstance {
    BlockInstance {
        low,
        high,
        ops: hop_ops(theta),
        target: hop_target(theta),
        name: "hop",
    }
}

/// Standalone fSWAP: `RXXplusYY(-pi/2) · (S†⊗S†)`.
fn fswap_block(low: usize, high: usize) -> BlockInstance {
    let mut ops = hop_ops(-std::f64::consts::FRAC_PI_2);
    if let BlockOp::OneQ { low: l, high: h } = &mut ops[0] {
        *l = mul(l, &mat::s_dagger());
        *h = mul(h, &mat::s_dagger());
    }
    BlockInstance {
        low,
        high,
        ops,
        target: Gate::Fswap { q1: 0, q2: 1 }.matrix_2q().unwrap(),
        name: "fswap",
    }
}

/// Fused `RZZ(theta) then fSWAP` block (three two-qubit gates; the leading
/// CZ is the initial-state cancellation site).
fn fswap_rzz_block(low: usize, high: usize, theta_u: f64) -> BlockInstance {
    let h = mat::hadamard();
    let s_dag = mat::s_dagger();
    let v = mul(&mat::s_gate(), &h);
    let v_dag = v.adjoint();
    let ops = vec![
        BlockOp::OneQ {
            low: s_dag,
            high: mul(&h, &s_dag),
        },
        BlockOp::TwoQ(TwoQKind::Cz),
        BlockOp::OneQ {
            low: mat::rx(-std::f64::consts::FRAC_PI_2),
            high: mul(&h, &mul(&mat::rz(theta_u), &h)),
        },
        BlockOp::TwoQ(TwoQKind::Cz),
        BlockOp::OneQ {
            low: v_dag,
            high: mul(&v_dag, &h),
        },
        BlockOp::TwoQ(TwoQKind::Rzz(-std::f64::consts::FRAC_PI_2)),
        BlockOp::OneQ { low: v, high: v },
    ];
    let target = Gate::Fswap { q1: 0, q2: 1 }
        .matrix_2q()
        .unwrap()
        .matmul(
            &Gate::Rzz {
                q1: 0,
                q2: 1,
                theta: theta_u,
            }
            .matrix_2q()
            .unwrap(),
        );
    BlockInstance {
        low,
        high,
        ops,
        target,
        name: "rzz_fswap",
    }
}

/// Consolidated step-boundary block:
/// `hop(theta_b) · (RZ(alpha_low)⊗RZ(alpha_high)) · hop(theta_a)`.
///
/// The symmetric RZ part commutes with the hopping generator and slides out;
/// the remainder is a particle-number-conserving gate whose 2x2 block is
/// Euler-decomposed into `RZ-like . hop(theta_eff) . RZ-like`.
fn boundary_block(
    low: usize,
    high: usize,
    theta_a: f64,
    theta_b: f64,
    alpha_low: f64,
    alpha_high: f64,
) -> BlockInstance {
    let rz_pair = |al: f64, ah: f64| -> CMat {
        mat::rz(ah).to_cmat().kron(&mat::rz(al).to_cmat())
    };
    let target = hop_target(theta_b)
        .matmul(&rz_pair(alpha_low, alpha_high))
        .matmul(&hop_target(theta_a));

    let s = 0.5 * (alpha_low + alpha_high);
    let d = 0.5 * (alpha_low - alpha_high);
    // Inner gate with trivial phases on |00> and |11>.
    let inner = hop_target(theta_b)
        .matmul(&rz_pair(d, -d))
        .matmul(&hop_target(theta_a));
    // 2x2 block on span{idx1 = |low occupied>, idx2 = |high occupied>}.
    let v = Mat2([
        [inner.at(1, 1), inner.at(1, 2)],
        [inner.at(2, 1), inner.at(2, 2)],
    ]);
    // Euler ZYZ, then RY(t) = RZ(pi/2) RX(t) RZ(-pi/2) gives ZXZ.
    let (t, phi, lam) = block_euler(&v);
    let p = phi + std::f64::consts::FRAC_PI_2;
    let q = lam - std::f64::consts::FRAC_PI_2;
    let theta_eff = t / 2.0;

    // Physical realization of a block RZ(angle): RZ(-angle/2) ⊗ RZ(angle/2).
    let make_pair = |angle: f64| (mat::rz(-angle / 2.0), mat::rz(angle / 2.0));
    let (q_low, q_high) = make_pair(q);
    let (p_low, p_high) = make_pair(p);

    let mut ops = hop_ops(theta_eff);
    if let BlockOp::OneQ { low: l, high: h } = &mut ops[0] {
        *l = mul(l, &q_low);
        *h = mul(h, &q_high);
    }
    let last = ops.len() - 1;
    if let BlockOp::OneQ { low: l, high: h } = &mut ops[last] {
        // Time order: hop epilogue, then block-RZ(p), then symmetric RZ(s).
        *l = mul(&mat::rz(s), &mul(&p_low, l));
        *h = mul(&mat::rz(s), &mul(&p_high, h));
    }
    let mut block = BlockInstance {
        low,
        high,
        ops,
        target,
        name: "boundary",
    };
    // SU(2) Euler angles are defined modulo a sign; absorb it by shifting
    // the block-RZ if the first attempt lands on -V.
    if block.verify().is_err() {
        if let BlockOp::OneQ { low: l, high: h } = &mut block.ops[last] {
            let (fl, fh) = make_pair(2.0 * std::f64::consts::PI);
            *l = mul(&fl, l);
            *h = mul(&fh, h);
        }
    }
    block
}

/// ZYZ Euler angles of a (special-)unitary 2x2 block.
fn block_euler(v: &Mat2) -> (f64, f64, f64) {
    let a = v.0[0][0];
    let c = v.0[1][0];
    let theta = 2.0 * c.norm().atan2(a.norm());
    if c.norm() < 1e-14 {
        let lam = (v.0[1][1] / a).arg();
        (0.0, 0.0, lam)
    } else if a.norm() < 1e-14 {
        let gamma = c.arg();
        let lam = (-v.0[0][1]).arg() - gamma;
        (std::f64::consts::PI, 0.0, lam)
    } else {
        let gamma = a.arg();
        (theta, c.arg() - gamma, (-v.0[0][1]).arg() - gamma)
    }
}

/// Streaming native-gate emitter with known-basis tracking.
struct Emitter {
    width: usize,
    layers: Vec<Vec<NativeGate>>,
    pending: Vec<Mat2>,
    known: Vec<Option<bool>>,
}

impl Emitter {
    fn new(width: usize, prepared: bool) -> Self {
        Emitter {
            width,
            layers: Vec::new(),
            pending: vec![Mat2::identity(); width],
            known: if prepared {
                vec![Some(false); width]
            } else {
                vec![None; width]
            },
        }
    }

    fn push_1q(&mut self, q: usize, m: &Mat2) {
        self.pending[q] = m.matmul(&self.pending[q]);
    }

    /// Materialize the pending matrix on a wire, updating basis tracking.
    fn flush_wire(&mut self, q: usize) -> Vec<NativeGate> {
        let m = std::mem::replace(&mut self.pending[q], Mat2::identity());
        self.known[q] = match self.known[q] {
            Some(b) if m.is_diagonal(1e-12) => Some(b),
            Some(b) if m.is_antidiagonal(1e-12) => Some(!b),
            _ => None,
        };
        decompose_1q(&m, q)
    }

    /// Pack per-wire gate sequences into minimal parallel layers.
    fn pack_1q(&mut self, seqs: Vec<Vec<NativeGate>>) {
        let max_len = seqs.iter().map(|s| s.len()).max().unwrap_or(0);
        for t in 0..max_len {
            let layer: Vec<NativeGate> = seqs
                .iter()
                .filter_map(|s| s.get(t).cloned())
                .collect();
            if !layer.is_empty() {
                self.layers.push(layer);
            }
        }
    }

    /// Emit a group of same-shaped blocks with their 2q sub-layers aligned.
    fn emit_group(&mut self, blocks: Vec<BlockInstance>) -> Result<()> {
        if blocks.is_empty() {
            return Ok(());
        }
        for b in &blocks {
            b.verify()?;
        }
        let n_ops = blocks[0].ops.len();
        debug_assert!(blocks.iter().all(|b| b.ops.len() == n_ops));
        for j in 0..n_ops {
            match &blocks[0].ops[j] {
                BlockOp::OneQ { .. } => {
                    for b in &blocks {
                        if let BlockOp::OneQ { low, high } = &b.ops[j] {
                            let (low, high) = (*low, *high);
                            self.push_1q(b.low, &low);
                            self.push_1q(b.high, &high);
                        }
                    }
                }
                BlockOp::TwoQ(_) => {
                    let mut seqs = Vec::new();
                    for b in &blocks {
                        seqs.push(self.flush_wire(b.low));
                        seqs.push(self.flush_wire(b.high));
                    }
                    self.pack_1q(seqs);
                    let mut layer = Vec::new();
                    for b in &blocks {
                        let kind = match &b.ops[j] {
                            BlockOp::TwoQ(k) => k.clone(),
                            _ => unreachable!("block shapes are uniform within a group"),
                        };
                        match (self.known[b.low], self.known[b.high]) {
                            (None, None) => {
                                layer.push(match kind {
                                    TwoQKind::Rzz(theta) => NativeGate::Rzz {
                                        q1: b.low,
                                        q2: b.high,
                                        theta,
                                    },
                                    TwoQKind::Cz => NativeGate::Cz {
                                        q1: b.low,
                                        q2: b.high,
                                    },
                                });
                            }
                            (ka, kb) => {
                                // Initial-state cancellation: the gate acts
                                // as a single-qubit gate (or a phase) on the
                                // unknown wire.
                                self.reduce_2q(&kind, b.low, ka, b.high, kb);
                            }
                        }
                    }
                    if !layer.is_empty() {
                        self.layers.push(layer);
                    }
                }
            }
        }
        Ok(())
    }

    fn reduce_2q(
        &mut self,
        kind: &TwoQKind,
        low: usize,
        known_low: Option<bool>,
        high: usize,
        known_high: Option<bool>,
    ) {
        let (other, bit) = match (known_low, known_high) {
            (Some(_), Some(_)) => return, // pure phase
            (Some(b), None) => (high, b),
            (None, Some(b)) => (low, b),
            (None, None) => unreachable!(),
        };
        match kind {
            TwoQKind::Rzz(theta) => {
                let sign = if bit { -1.0 } else { 1.0 };
                self.push_1q(other, &mat::rz(sign * theta));
            }
            TwoQKind::Cz => {
                if bit {
                    self.push_1q(other, &mat::pauli_z());
                }
            }
        }
    }

    fn finish(mut self) -> Vec<Vec<NativeGate>> {
        let seqs: Vec<Vec<NativeGate>> = (0..self.width).map(|q| self.flush_wire(q)).collect();
        self.pack_1q(seqs);
        self.layers
    }
}

fn is_all<F: Fn(&Gate) -> bool>(layer: &[Gate], f: F) -> bool {
    !layer.is_empty() && layer.iter().all(f)
}

fn hop_pairs(layer: &[Gate]) -> Option<Vec<(usize, usize, f64)>> {
    if !is_all(layer, |g| matches!(g, Gate::XxPlusYy { .. })) {
        return None;
    }
    Some(
        layer
            .iter()
            .map(|g| match *g {
                Gate::XxPlusYy { q1, q2, theta } => (q1.min(q2), q1.max(q2), theta),
                _ => unreachable!(),
            })
            .collect(),
    )
}

fn rzz_pairs(layer: &[Gate]) -> Option<Vec<(usize, usize, f64)>> {
    if !is_all(layer, |g| matches!(g, Gate::Rzz { .. })) {
        return None;
    }
    Some(
        layer
            .iter()
            .map(|g| match *g {
                Gate::Rzz { q1, q2, theta } => (q1.min(q2), q1.max(q2), theta),
                _ => unreachable!(),
            })
            .collect(),
    )
}

fn fswap_pairs(layer: &[Gate]) -> Option<Vec<(usize, usize)>> {
    if !is_all(layer, |g| matches!(g, Gate::Fswap { .. })) {
        return None;
    }
    Some(
        layer
            .iter()
            .map(|g| match *g {
                Gate::Fswap { q1, q2 } => (q1.min(q2), q1.max(q2)),
                _ => unreachable!(),
            })
            .collect(),
    )
}

fn same_pairs(a: &[(usize, usize, f64)], b: &[(usize, usize, f64)]) -> bool {
    let mut pa: Vec<(usize, usize)> = a.iter().map(|&(x, y, _)| (x, y)).collect();
    let mut pb: Vec<(usize, usize)> = b.iter().map(|&(x, y, _)| (x, y)).collect();
    pa.sort_unstable();
    pb.sort_unstable();
    pa == pb
}

fn is_1q_layer(layer: &[Gate]) -> bool {
    layer
        .iter()
        .all(|g| matches!(g, Gate::Rz { .. } | Gate::X { .. } | Gate::Prep { .. }))
}

fn is_rz_layer(layer: &[Gate]) -> bool {
    !layer.is_empty() && layer.iter().all(|g| matches!(g, Gate::Rz { .. }))
}

/// Lower an abstract circuit to the native gate set.
pub fn lower(circuit: &Circuit) -> Result<NativeCircuit> {
    circuit.validate()?;
    let prepared = circuit
        .layers
        .first()
        .is_some_and(|l| l.iter().all(|g| matches!(g, Gate::Prep { .. })));
    let mut em = Emitter::new(circuit.width, prepared);

    let layers = &circuit.layers;
    let mut i = 0;
    while i < layers.len() {
        let layer = &layers[i];

        // Step boundary: hop | RZ | hop on the same pairs.
        if let Some(hops_a) = hop_pairs(layer) {
            let boundary = if i + 2 < layers.len() && is_rz_layer(&layers[i + 1]) {
                hop_pairs(&layers[i + 2]).filter(|hops_b| same_pairs(&hops_a, hops_b))
            } else {
                None
            };
            if let Some(hops_b) = boundary {
                let mut rz_angles = vec![0.0f64; circuit.width];
                for g in &layers[i + 1] {
                    if let Gate::Rz { q, theta } = g {
                        rz_angles[*q] = *theta;
                    }
                }
                let mut in_pairs = vec![false; circuit.width];
                let mut blocks = Vec::new();
                for &(low, high, theta_a) in &hops_a {
                    let theta_b = hops_b
                        .iter()
                        .find(|&&(l, h, _)| (l, h) == (low, high))
                        .map(|&(_, _, t)| t)
                        .expect("pair sets match");
                    in_pairs[low] = true;
                    in_pairs[high] = true;
                    blocks.push(boundary_block(
                        low,
                        high,
                        theta_a,
                        theta_b,
                        rz_angles[low],
                        rz_angles[high],
                    ));
                }
                // RZ gates on wires outside the hop pairs stay single-qubit.
                for g in &layers[i + 1] {
                    if let Gate::Rz { q, theta } = g {
                        if !in_pairs[*q] {
                            em.push_1q(*q, &mat::rz(*theta));
                        }
                    }
                }
                em.emit_group(blocks)?;
                i += 3;
                continue;
            }
            // Plain hopping layer.
            let blocks = hops_a
                .iter()
                .map(|&(low, high, theta)| hop_block(low, high, theta))
                .collect();
            em.emit_group(blocks)?;
            i += 1;
            continue;
        }

        // Fused RZZ + fSWAP (either order; the two commute as a block).
        if let Some(rzzs) = rzz_pairs(layer) {
            if i + 1 < layers.len() {
                if let Some(swaps) = fswap_pairs(&layers[i + 1]) {
                    let with_dummy: Vec<(usize, usize, f64)> =
                        swaps.iter().map(|&(a, b)| (a, b, 0.0)).collect();
                    if same_pairs(&rzzs, &with_dummy) {
                        let blocks = rzzs
                            .iter()
                            .map(|&(low, high, theta)| fswap_rzz_block(low, high, theta))
                            .collect();
                        em.emit_group(blocks)?;
                        i += 2;
                        continue;
                    }
                }
            }
            // Standalone RZZ layer: already native.
            let blocks = rzzs
                .iter()
                .map(|&(low, high, theta)| BlockInstance {
                    low,
                    high,
                    ops: vec![BlockOp::TwoQ(TwoQKind::Rzz(theta))],
                    target: Gate::Rzz {
                        q1: 0,
                        q2: 1,
                        theta,
                    }
                    .matrix_2q()
                    .unwrap(),
                    name: "rzz",
                })
                .collect();
            em.emit_group(blocks)?;
            i += 1;
            continue;
        }

        if let Some(swaps) = fswap_pairs(layer) {
            if i + 1 < layers.len() {
                if let Some(rzzs) = rzz_pairs(&layers[i + 1]) {
                    let with_dummy: Vec<(usize, usize, f64)> =
                        swaps.iter().map(|&(a, b)| (a, b, 0.0)).collect();
                    if same_pairs(&rzzs, &with_dummy) {
                        let blocks = rzzs
                            .iter()
                            .map(|&(low, high, theta)| fswap_rzz_block(low, high, theta))
                            .collect();
                        em.emit_group(blocks)?;
                        i += 2;
                        continue;
                    }
                }
            }
            let blocks = swaps
                .iter()
                .map(|&(low, high)| fswap_block(low, high))
                .collect();
            em.emit_group(blocks)?;
            i += 1;
            continue;
        }

        if is_1q_layer(layer) {
            for g in layer {
                match g {
                    Gate::Rz { q, theta } => em.push_1q(*q, &mat::rz(*theta)),
                    Gate::X { q } | Gate::Prep { q } => em.push_1q(*q, &mat::pauli_x()),
                    _ => unreachable!(),
                }
            }
            i += 1;
            continue;
        }

        // Mixed layer: lower gate by gate.
        for g in layer {
            match g {
                Gate::Rz { q, theta } => em.push_1q(*q, &mat::rz(*theta)),
                Gate::X { q } | Gate::Prep { q } => em.push_1q(*q, &mat::pauli_x()),
                Gate::Rzz { q1, q2, theta } => {
                    let (low, high) = (*q1.min(q2), *q1.max(q2));
                    em.emit_group(vec![BlockInstance {
                        low,
                        high,
                        ops: vec![BlockOp::TwoQ(TwoQKind::Rzz(*theta))],
                        target: g.matrix_2q().unwrap(),
                        name: "rzz",
                    }])?;
                }
                Gate::XxPlusYy { q1, q2, theta } => {
                    em.emit_group(vec![hop_block(*q1.min(q2), *q1.max(q2), *theta)])?;
                }
                Gate::Fswap { q1, q2 } => {
                    em.emit_group(vec![fswap_block(*q1.min(q2), *q1.max(q2))])?;
                }
            }
        }
        i += 1;
    }

    let layers = em.finish();
    Ok(NativeCircuit {
        width: circuit.width,
        layers,
        mode_perm: circuit.mode_perm.clone(),
        source_gate_count: circuit.gate_count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::ONE;

    fn dist(a: &CMat, b: &CMat) -> f64 {
        a.phase_aligned_distance(b)
    }

    #[test]
    fn hop_template_hits_target() {
        for theta in [-1.3f64, -0.2, 0.0, 0.4, 2.9] {
            let b = hop_block(0, 1, theta);
            assert!(
                dist(&b.target, &b.realization()) < 1e-13,
                "theta={theta}"
            );
        }
    }

    #[test]
    fn fswap_template_hits_target() {
        let b = fswap_block(0, 1);
        assert!(dist(&b.target, &b.realization()) < 1e-13);
    }

    #[test]
    fn fswap_rzz_template_hits_target() {
        for theta in [-2.0f64, -0.6, 0.0, 0.17, 1.9, 3.0] {
            let b = fswap_rzz_block(0, 1, theta);
            assert!(
                dist(&b.target, &b.realization()) < 1e-13,
                "theta={theta}: {}",
                dist(&b.target, &b.realization())
            );
        }
    }

    #[test]
    fn fswap_rzz_first_gate_is_cz_with_diagonal_low_prologue() {
        // The cancellation contract: the block's first two-qubit gate must be
        // a CZ whose low-wire prologue preserves computational basis states.
        let b = fswap_rzz_block(0, 1, 0.7);
        match &b.ops[0] {
            BlockOp::OneQ { low, high } => {
                assert!(low.is_diagonal(1e-12));
                assert!(!high.is_diagonal(1e-12) && !high.is_antidiagonal(1e-12));
            }
            _ => panic!("expected 1q dressing first"),
        }
        assert!(matches!(b.ops[1], BlockOp::TwoQ(TwoQKind::Cz)));
        // And the low wire is scrambled right after, so at most one gate
        // cancels per block.
        match &b.ops[2] {
            BlockOp::OneQ { low, .. } => {
                assert!(!low.is_diagonal(1e-12) && !low.is_antidiagonal(1e-12));
            }
            _ => panic!("expected 1q dressing after the first CZ"),
        }
    }

    #[test]
    fn boundary_template_hits_target_including_asymmetric_rz() {
        let cases = [
            (0.3, 0.3, -0.4, -0.4),
            (-0.8, -0.8, 0.0, 0.0),
            (0.25, -0.7, 0.9, 0.9),
            (0.5, 0.5, 0.3, -1.1), // unequal RZ angles
            (1.2, -0.3, -0.5, 0.8),
            (0.0, 0.0, 0.0, 0.0),
        ];
        for (ta, tb, al, ah) in cases {
            let b = boundary_block(0, 1, ta, tb, al, ah);
            assert!(
                dist(&b.target, &b.realization()) < 1e-12,
                "case ({ta},{tb},{al},{ah}): {}",
                dist(&b.target, &b.realization())
            );
            let n2q = b
                .ops
                .iter()
                .filter(|op| matches!(op, BlockOp::TwoQ(_)))
                .count();
            assert_eq!(n2q, 2);
        }
    }

    #[test]
    fn boundary_verify_reports_synthesis_failures() {
        let mut b = boundary_block(0, 1, 0.3, 0.3, 0.1, 0.1);
        // Corrupt the target to force a residual.
        b.target.set(0, 0, b.target.at(0, 0) + ONE);
        assert!(matches!(b.verify(), Err(Error::Synthesis { .. })));
    }
}
