//! Desk-scale exact execution: a gate-by-gate statevector simulator with
//! optional stochastic noise, multinomial sampling with readout flips, and
//! occupation estimation with shot-noise error bars.
//!
//! Bit convention (fixed crate-wide): qubit `j` is bit `j` of a basis-state
//! index, least significant first, so `FockState::basis_index` addresses the
//! amplitude directly.
//!
//! Noise is simulated with stochastic trajectories: after every two-qubit
//! gate a uniformly random non-identity two-qubit Pauli is applied with
//! probability `p_dep2q`, and readout flips act independently per bit at
//! sampling time. Trajectories are deterministic functions of
//! `(seed, trajectory index)`.

mod exact;

pub use exact::{exact_evolve, ExactEvolver};

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate, ModePermutation};
use crate::compiler::native::{NativeCircuit, NativeGate};
use crate::error::{Error, Result};
use crate::mat::{CMat, Mat2};
use crate::model::{mode_index, FockState, HubbardParams, Spin};

/// Default width cap for statevector execution.
pub const DEFAULT_QUBIT_CAP: usize = 24;

/// Dense complex state over `2^n` amplitudes.
#[derive(Debug, Clone)]
pub struct StateVector {
    pub n_qubits: usize,
    pub amps: Vec<Complex64>,
}

impl StateVector {
    pub fn from_fock(state: &FockState) -> Result<StateVector> {
        Self::from_basis_index(state.n_qubits(), state.basis_index())
    }

    pub fn from_basis_index(n_qubits: usize, index: usize) -> Result<StateVector> {
        cap_check(n_qubits, DEFAULT_QUBIT_CAP)?;
        let mut amps = vec![Complex64::ZERO; 1 << n_qubits];
        amps[index] = Complex64::ONE;
        Ok(StateVector { n_qubits, amps })
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn fidelity_with_basis(&self, index: usize) -> f64 {
        self.amps[index].norm_sqr()
    }

    /// Overlap `<self|other>`.
    pub fn overlap(&self, other: &StateVector) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn apply_1q(&mut self, q: usize, m: &Mat2) {
        let bit = 1usize << q;
        let (m00, m01, m10, m11) = (m.0[0][0], m.0[0][1], m.0[1][0], m.0[1][1]);
        for base in 0..self.amps.len() {
            if base & bit != 0 {
                continue;
            }
            let i0 = base;
            let i1 = base | bit;
            let a0 = self.amps[i0];
            let a1 = self.amps[i1];
            self.amps[i0] = m00 * a0 + m01 * a1;
            self.amps[i1] = m10 * a0 + m11 * a1;
        }
    }

    /// Apply a 4x4 matrix in the `bit_q1 + 2*bit_q2` basis.
    pub fn apply_2q(&mut self, q1: usize, q2: usize, m: &CMat) {
        debug_assert_eq!(m.dim, 4);
        let b1 = 1usize << q1;
        let b2 = 1usize << q2;
        for base in 0..self.amps.len() {
            if base & b1 != 0 || base & b2 != 0 {
                continue;
            }
            let idx = [base, base | b1, base | b2, base | b1 | b2];
            let a = [
                self.amps[idx[0]],
                self.amps[idx[1]],
                self.amps[idx[2]],
                self.amps[idx[3]],
            ];
            for (r, &i) in idx.iter().enumerate() {
                self.amps[i] =
                    m.at(r, 0) * a[0] + m.at(r, 1) * a[1] + m.at(r, 2) * a[2] + m.at(r, 3) * a[3];
            }
        }
    }

    pub fn apply_gate(&mut self, gate: &Gate) {
        if let Some(m) = gate.matrix_1q() {
            let q = gate.qubits()[0];
            self.apply_1q(q, &m);
        } else if let Some(m) = gate.matrix_2q() {
            let qs = gate.qubits();
            self.apply_2q(qs[0], qs[1], &m);
        }
    }

    pub fn apply_native(&mut self, gate: &NativeGate) {
        if let Some(m) = gate.matrix_1q() {
            let q = gate.qubits()[0];
            self.apply_1q(q, &m);
        } else if let Some(m) = gate.matrix_2q() {
            let qs = gate.qubits();
            self.apply_2q(qs[0], qs[1], &m);
        }
    }

    /// `<Z_q>`.
    pub fn z_expectation(&self, q: usize) -> f64 {
        let bit = 1usize << q;
        self.amps
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let sign = if i & bit == 0 { 1.0 } else { -1.0 };
                sign * a.norm_sqr()
            })
            .sum()
    }

    /// `<n_q n_r>` for number operators on two qubits.
    pub fn joint_occupation(&self, q: usize, r: usize) -> f64 {
        let bq = 1usize << q;
        let br = 1usize << r;
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & bq != 0 && i & br != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }
}

fn cap_check(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::SizeLimit {
            what: "statevector width",
            requested: n,
            cap,
        });
    }
    Ok(())
}

/// Synthetic noise description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Depolarizing probability per two-qubit gate.
    pub p_dep2q: f64,
    /// Readout flip probability p(1|0) per qubit.
    pub p10: f64,
    /// Readout flip probability p(0|1) per qubit.
    pub p01: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn noiseless(seed: u64) -> Self {
        NoiseModel {
            p_dep2q: 0.0,
            p10: 0.0,
            p01: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_dep2q", self.p_dep2q),
            ("p10", self.p10),
            ("p01", self.p01),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} = {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn is_noiseless_gates(&self) -> bool {
        self.p_dep2q == 0.0
    }
}

/// Bitstring -> count table; the unit of post-processing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotTable {
    pub width: usize,
    pub total: u64,
    /// Keyed by the basis index of the bitstring (bit j = qubit j).
    pub counts: BTreeMap<u64, u64>,
}

impl ShotTable {
    pub fn empty(width: usize) -> Self {
        ShotTable {
            width,
            total: 0,
            counts: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, bits: u64, count: u64) {
        if count > 0 {
            *self.counts.entry(bits).or_insert(0) += count;
            self.total += count;
        }
    }

    pub fn merge(&mut self, other: &ShotTable) {
        debug_assert_eq!(self.width, other.width);
        for (&b, &c) in &other.counts {
            self.add(b, c);
        }
    }

    /// CSV dump: `bitstring,count` with qubit 0 as the leftmost character.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bitstring,count\n");
        for (&bits, &count) in &self.counts {
            let s: String = (0..self.width)
                .map(|q| if bits >> q & 1 == 1 { '1' } else { '0' })
                .collect();
            out.push_str(&format!("{s},{count}\n"));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<ShotTable> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::invalid("empty shot CSV"))?;
        if header.trim() != "bitstring,count" {
            return Err(Error::invalid("bad shot CSV header"));
        }
        let mut table: Option<ShotTable> = None;
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let (bits_s, count_s) = line
                .split_once(',')
                .ok_or_else(|| Error::invalid("bad shot CSV row"))?;
            let width = bits_s.len();
            let t = table.get_or_insert_with(|| ShotTable::empty(width));
            if t.width != width {
                return Err(Error::invalid("inconsistent bitstring width in CSV"));
            }
            let mut bits = 0u64;
            for (q, ch) in bits_s.chars().enumerate() {
                match ch {
                    '1' => bits |= 1 << q,
                    '0' => {}
                    _ => return Err(Error::invalid("bad bit character in CSV")),
                }
            }
            let count: u64 = count_s
                .trim()
                .parse()
                .map_err(|_| Error::invalid("bad count in CSV"))?;
            t.add(bits, count);
        }
        table.ok_or_else(|| Error::invalid("shot CSV has no rows"))
    }
}

/// Expectation estimate with its shot-noise error bar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
    pub n_shots: u64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            value,
            std_err: 0.0,
            n_shots: 0,
        }
    }

    /// Binomial error bar of a Z-basis Pauli expectation:
    /// `std_err^2 = (1 - value^2) / n_shots`.
    pub fn z_basis(value: f64, n_shots: u64) -> Self {
        let var = ((1.0 - value * value) / n_shots as f64).max(0.0);
        Estimate {
            value,
            std_err: var.sqrt(),
            n_shots,
        }
    }
}

/// Run a circuit from a Fock state with the default width cap.
pub fn run(circuit: &Circuit, initial: &FockState) -> Result<StateVector> {
    run_capped(circuit, initial, DEFAULT_QUBIT_CAP)
}

pub fn run_capped(circuit: &Circuit, initial: &FockState, cap: usize) -> Result<StateVector> {
    if circuit.width != initial.n_qubits() {
        return Err(Error::ShapeMismatch(
            "circuit width does not match initial state".to_string(),
        ));
    }
    cap_check(circuit.width, cap)?;
    let mut sv = StateVector::from_fock(initial)?;
    for layer in &circuit.layers {
        for gate in layer {
            sv.apply_gate(gate);
        }
    }
    Ok(sv)
}

/// Run a lowered circuit from a Fock state.
pub fn run_native(circuit: &NativeCircuit, initial: &FockState) -> Result<StateVector> {
    if circuit.width != initial.n_qubits() {
        return Err(Error::ShapeMismatch(
            "native circuit width does not match initial state".to_string(),
        ));
    }
    cap_check(circuit.width, DEFAULT_QUBIT_CAP)?;
    let mut sv = StateVector::from_fock(initial)?;
    for layer in &circuit.layers {
        for gate in layer {
            sv.apply_native(gate);
        }
    }
    Ok(sv)
}

const PAULI_1Q: [fn() -> Mat2; 3] = [crate::mat::pauli_x, crate::mat::pauli_y, crate::mat::pauli_z];

fn apply_random_2q_pauli(sv: &mut StateVector, q1: usize, q2: usize, rng: &mut ChaCha12Rng) {
    // Uniform over the 15 non-identity two-qubit Paulis.
    let k = rng.random_range(1..16u8);
    let (a, b) = (k % 4, k / 4);
    if a > 0 {
        sv.apply_1q(q1, &PAULI_1Q[(a - 1) as usize]());
    }
    if b > 0 {
        sv.apply_1q(q2, &PAULI_1Q[(b - 1) as usize]());
    }
}

/// One noisy trajectory of a circuit: every two-qubit gate is followed by a
/// random non-identity two-qubit Pauli with probability `p_dep2q`.
pub fn run_trajectory(
    circuit: &Circuit,
    initial: &FockState,
    noise: &NoiseModel,
    rng: &mut ChaCha12Rng,
) -> Result<StateVector> {
    noise.validate()?;
    cap_check(circuit.width, DEFAULT_QUBIT_CAP)?;
    let mut sv = StateVector::from_fock(initial)?;
    for layer in &circuit.layers {
        for gate in layer {
            sv.apply_gate(gate);
            if gate.is_two_qubit() && noise.p_dep2q > 0.0 && rng.random::<f64>() < noise.p_dep2q {
                let qs = gate.qubits();
                apply_random_2q_pauli(&mut sv, qs[0], qs[1], rng);
            }
        }
    }
    Ok(sv)
}

/// Multinomial sampling with per-bit readout flips. Deterministic per
/// `noise.seed` (stream offset lets callers decorrelate related tables).
pub fn sample(state: &StateVector, n_shots: u64, noise: &NoiseModel, stream: u64) -> Result<ShotTable> {
    if n_shots == 0 {
        return Err(Error::invalid("n_shots must be >= 1"));
    }
    noise.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(noise.seed.wrapping_add(stream.wrapping_mul(0x9E3779B97F4A7C15)));
    let mut cdf = Vec::with_capacity(state.amps.len());
    let mut acc = 0.0f64;
    for a in &state.amps {
        acc += a.norm_sqr();
        cdf.push(acc);
    }
    let norm = acc;
    let mut table = ShotTable::empty(state.n_qubits);
    for _ in 0..n_shots {
        let u: f64 = rng.random::<f64>() * norm;
        let idx = cdf.partition_point(|&c| c <= u).min(state.amps.len() - 1);
        let mut bits = idx as u64;
        if noise.p10 > 0.0 || noise.p01 > 0.0 {
            for q in 0..state.n_qubits {
                let b = bits >> q & 1;
                let p = if b == 0 { noise.p10 } else { noise.p01 };
                if p > 0.0 && rng.random::<f64>() < p {
                    bits ^= 1 << q;
                }
            }
        }
        table.add(bits, 1);
    }
    Ok(table)
}

/// Sample a noisy circuit by splitting shots over stochastic trajectories.
pub fn sample_noisy_run(
    circuit: &Circuit,
    initial: &FockState,
    noise: &NoiseModel,
    n_shots: u64,
    n_trajectories: usize,
) -> Result<ShotTable> {
    if noise.is_noiseless_gates() {
        let sv = run(circuit, initial)?;
        return sample(&sv, n_shots, noise, 0);
    }
    let n_traj = n_trajectories.max(1).min(n_shots as usize);
    let mut table = ShotTable::empty(circuit.width);
    let base = n_shots / n_traj as u64;
    let extra = (n_shots % n_traj as u64) as usize;
    for t in 0..n_traj {
        let mut rng =
            ChaCha12Rng::seed_from_u64(noise.seed.wrapping_add((t as u64).wrapping_mul(0xA24BAED4963EE407)));
        let sv = run_trajectory(circuit, initial, noise, &mut rng)?;
        let quota = base + if t < extra { 1 } else { 0 };
        if quota == 0 {
            continue;
        }
        let shots = sample(&sv, quota, noise, t as u64 + 1)?;
        table.merge(&shots);
    }
    Ok(table)
}

/// Per-step shot tables from a noisy Trotter run, relabeled to canonical
/// mode order. Shots at step `k` are split over stochastic trajectories;
/// each trajectory is stepped once and sampled at every step boundary.
pub fn sample_noisy_series(
    params: &HubbardParams,
    initial: &FockState,
    dt: f64,
    n_steps: usize,
    noise: &NoiseModel,
    shots_per_step: u64,
    n_trajectories: usize,
) -> Result<Vec<ShotTable>> {
    noise.validate()?;
    let circuit = crate::circuit::build_trotter_circuit(params, dt, n_steps)?;
    cap_check(circuit.width, DEFAULT_QUBIT_CAP)?;
    let n_traj = if noise.is_noiseless_gates() {
        1
    } else {
        n_trajectories.max(1).min(shots_per_step as usize)
    };
    let mut tables: Vec<ShotTable> = (0..=n_steps).map(|_| ShotTable::empty(circuit.width)).collect();
    let base = shots_per_step / n_traj as u64;
    let extra = (shots_per_step % n_traj as u64) as usize;
    for t in 0..n_traj {
        let quota = base + if t < extra { 1 } else { 0 };
        if quota == 0 {
            continue;
        }
        let mut rng = ChaCha12Rng::seed_from_u64(
            noise.seed.wrapping_add((t as u64).wrapping_mul(0xA24BAED4963EE407)),
        );
        let mut sv = StateVector::from_fock(initial)?;
        let mut perm = ModePermutation::identity(params.l);
        let mut step = 0usize;
        let shots0 = sample(&sv, quota, noise, (t as u64) << 32)?;
        tables[0].merge(&crate::circuit::apply_virtual_permutation(&shots0, &perm)?);
        for (i, layer) in circuit.layers.iter().enumerate() {
            let is_fswap = layer.iter().any(|g| matches!(g, Gate::Fswap { .. }));
            for gate in layer {
                sv.apply_gate(gate);
                if gate.is_two_qubit()
                    && noise.p_dep2q > 0.0
                    && rng.random::<f64>() < noise.p_dep2q
                {
                    let qs = gate.qubits();
                    apply_random_2q_pauli(&mut sv, qs[0], qs[1], &mut rng);
                }
            }
            if is_fswap {
                perm.apply_fswap_layer();
            }
            if i > 0 && !layer.is_empty() && layer.iter().all(|g| matches!(g, Gate::Rz { .. })) {
                step += 1;
                let shots = sample(&sv, quota, noise, ((t as u64) << 32) | step as u64)?;
                tables[step].merge(&crate::circuit::apply_virtual_permutation(&shots, &perm)?);
            }
        }
    }
    Ok(tables)
}

/// Occupation estimates `<n_{i,sigma}> = (1 - <Z>)/2` per canonical mode.
///
/// `perm` maps physical qubits to mode labels when the measured circuit left
/// the modes permuted (odd Trotter steps).
pub fn occupations_from_state(state: &StateVector, perm: Option<&ModePermutation>) -> Vec<Estimate> {
    let mut out = vec![Estimate::exact(0.0); state.n_qubits];
    for q in 0..state.n_qubits {
        let z = state.z_expectation(q);
        let canonical = canonical_of(q, perm);
        out[canonical] = Estimate::exact((1.0 - z) / 2.0);
    }
    out
}

pub fn occupations_from_shots(shots: &ShotTable, perm: Option<&ModePermutation>) -> Vec<Estimate> {
    let mut ones = vec![0u64; shots.width];
    for (&bits, &count) in &shots.counts {
        for (q, ones_q) in ones.iter_mut().enumerate() {
            if bits >> q & 1 == 1 {
                *ones_q += count;
            }
        }
    }
    let mut out = vec![Estimate::exact(0.0); shots.width];
    for q in 0..shots.width {
        let p1 = ones[q] as f64 / shots.total as f64;
        let z = 1.0 - 2.0 * p1;
        let z_est = Estimate::z_basis(z, shots.total);
        let canonical = canonical_of(q, perm);
        out[canonical] = Estimate {
            value: p1,
            std_err: z_est.std_err / 2.0,
            n_shots: shots.total,
        };
    }
    out
}

fn canonical_of(q: usize, perm: Option<&ModePermutation>) -> usize {
    perm.map_or(q, |p| p.canonical_index(q))
}

/// Per-site occupations `(n_up, n_down)` from canonical mode estimates.
pub fn site_occupations(modes: &[Estimate], l: usize) -> Vec<(f64, f64)> {
    (0..l)
        .map(|site| {
            let up = modes[mode_index(site, Spin::Up, l).unwrap()].value;
            let dn = modes[mode_index(site, Spin::Down, l).unwrap()].value;
            (up, dn)
        })
        .collect()
}

/// Step-by-step Trotter execution recording canonical occupations after
/// every step (step 0 = initial state).
pub fn trotter_occupation_series(
    params: &HubbardParams,
    initial: &FockState,
    dt: f64,
    n_steps: usize,
) -> Result<Vec<Vec<f64>>> {
    let circuit = crate::circuit::build_trotter_circuit(params, dt, n_steps)?;
    cap_check(circuit.width, DEFAULT_QUBIT_CAP)?;
    let mut sv = StateVector::from_fock(initial)?;
    let mut perm = ModePermutation::identity(params.l);
    let mut series = Vec::with_capacity(n_steps + 1);
    series.push(
        occupations_from_state(&sv, Some(&perm))
            .iter()
            .map(|e| e.value)
            .collect::<Vec<f64>>(),
    );
    let mut step = 0usize;
    for (i, layer) in circuit.layers.iter().enumerate() {
        let is_fswap = layer.iter().any(|g| matches!(g, Gate::Fswap { .. }));
        for gate in layer {
            sv.apply_gate(gate);
        }
        if is_fswap {
            perm.apply_fswap_layer();
        }
        // A step completes at its trailing RZ layer (which does not change
        // Z-basis observables, so recording there is exact); layer 0 is the
        // leading RZ layer, not a boundary.
        if i > 0 && !layer.is_empty() && layer.iter().all(|g| matches!(g, Gate::Rz { .. })) {
            step += 1;
            series.push(
                occupations_from_state(&sv, Some(&perm))
                    .iter()
                    .map(|e| e.value)
                    .collect(),
            );
        }
    }
    debug_assert_eq!(step, n_steps);
    Ok(series)
}

/// Root-mean-square error over all `2L` mode occupations.
pub fn occupation_rmse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::ShapeMismatch(
            "occupation vectors differ in length".to_string(),
        ));
    }
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((sum / a.len() as f64).sqrt())
}

/// Per-time RMSE between Trotter occupations and the exact oracle, for a
/// list of step sizes. Returns `(dt, vec of (t, rmse))` rows.
pub fn trotter_error_scan(
    params: &HubbardParams,
    dt_list: &[f64],
    n_steps: usize,
    initial: &FockState,
) -> Result<Vec<(f64, Vec<(f64, f64)>)>> {
    let mut out = Vec::new();
    for &dt in dt_list {
        let trotter = trotter_occupation_series(params, initial, dt, n_steps)?;
        let mut evolver = ExactEvolver::new_auto(params, initial)?;
        let mut rows = Vec::with_capacity(n_steps + 1);
        for (k, occ_trotter) in trotter.iter().enumerate() {
            if k > 0 {
                evolver.advance(dt)?;
            }
            let occ_exact = evolver.occupations();
            rows.push((k as f64 * dt, occupation_rmse(occ_trotter, &occ_exact)?));
        }
        out.push((dt, rows));
    }
    Ok(out)
}

/// Unitary of an abstract circuit (small widths only; testing aid).
pub fn circuit_unitary(circuit: &Circuit) -> Result<CMat> {
    unitary_of(circuit.width, |sv| {
        for layer in &circuit.layers {
            for gate in layer {
                sv.apply_gate(gate);
            }
        }
    })
}

/// Unitary of a native circuit (small widths only; testing aid).
pub fn native_unitary(circuit: &NativeCircuit) -> Result<CMat> {
    unitary_of(circuit.width, |sv| {
        for layer in &circuit.layers {
            for gate in layer {
                sv.apply_native(gate);
            }
        }
    })
}

fn unitary_of<F: Fn(&mut StateVector)>(width: usize, apply: F) -> Result<CMat> {
    if width > 10 {
        return Err(Error::SizeLimit {
            what: "dense circuit unitary",
            requested: width,
            cap: 10,
        });
    }
    let dim = 1usize << width;
    let mut u = CMat::zeros(dim);
    for col in 0..dim {
        let mut sv = StateVector::from_basis_index(width, col)?;
        apply(&mut sv);
        for row in 0..dim {
            u.set(row, col, sv.amps[row]);
        }
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_echo_circuit, build_trotter_circuit};
    use crate::model::neel_state;

    fn params(l: usize, u: f64, mu: f64) -> HubbardParams {
        HubbardParams::new(l, 1.0, u, mu).unwrap()
    }

    #[test]
    fn empty_circuit_returns_basis_state() {
        let state = neel_state(2, None).unwrap();
        let c = Circuit {
            width: 4,
            layers: vec![],
            mode_perm: ModePermutation::identity(2),
        };
        let sv = run(&c, &state).unwrap();
        assert!((sv.fidelity_with_basis(state.basis_index()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fswap_flips_sign_of_doubly_occupied_pair() {
        // fSWAP |11> = -|11>
        let mut sv = StateVector::from_basis_index(2, 0b11).unwrap();
        sv.apply_gate(&Gate::Fswap { q1: 0, q2: 1 });
        assert!((sv.amps[3] + Complex64::ONE).norm() < 1e-12);
    }

    #[test]
    fn echo_circuits_are_identities() {
        for (l, n) in [(2usize, 2usize), (3, 4), (4, 8)] {
            let p = params(l, 3.0, 0.4);
            let state = neel_state(l, Some(l / 2)).unwrap();
            let echo = build_echo_circuit(&p, 0.23, n).unwrap();
            let sv = run(&echo, &state).unwrap();
            assert!(
                sv.fidelity_with_basis(state.basis_index()) > 1.0 - 1e-12,
                "echo L={l} n={n}"
            );
        }
    }

    #[test]
    fn norm_and_particle_numbers_preserved() {
        let p = params(3, 2.0, 0.3);
        let state = neel_state(3, None).unwrap();
        let c = build_trotter_circuit(&p, 0.2, 5).unwrap();
        let sv = run(&c, &state).unwrap();
        assert!((sv.norm() - 1.0).abs() < 1e-9);
        let occ = occupations_from_state(&sv, Some(&c.mode_perm));
        let total: f64 = occ.iter().map(|e| e.value).sum();
        assert!((total - state.n_particles() as f64).abs() < 1e-9);
    }

    #[test]
    fn neel_occupations_at_time_zero() {
        let state = neel_state(4, None).unwrap();
        let sv = StateVector::from_fock(&state).unwrap();
        let occ = occupations_from_state(&sv, None);
        for (q, est) in occ.iter().enumerate() {
            let expect = if state.bits[q] { 1.0 } else { 0.0 };
            assert!((est.value - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_exact_on_basis_states() {
        let sv = StateVector::from_basis_index(4, 0b0110).unwrap();
        let noise = NoiseModel::noiseless(7);
        let t1 = sample(&sv, 100, &noise, 0).unwrap();
        let t2 = sample(&sv, 100, &noise, 0).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(t1.counts.get(&0b0110), Some(&100));
        assert_eq!(t1.total, 100);
    }

    #[test]
    fn readout_flips_drive_bits_to_half() {
        let sv = StateVector::from_basis_index(4, 0).unwrap();
        let noise = NoiseModel {
            p_dep2q: 0.0,
            p10: 0.5,
            p01: 0.5,
            seed: 11,
        };
        let n = 20_000u64;
        let shots = sample(&sv, n, &noise, 0).unwrap();
        let occ = occupations_from_shots(&shots, None);
        let sigma = 0.5 / (n as f64).sqrt();
        for est in occ {
            assert!((est.value - 0.5).abs() < 3.0 * sigma);
        }
    }

    #[test]
    fn z_basis_error_bar_formula() {
        let est = Estimate::z_basis(0.0, 20_000);
        assert!((est.std_err - (1.0f64 / 20_000.0).sqrt()).abs() < 1e-12);
        assert!((est.std_err - 7.07e-3).abs() < 5e-5);
    }

    #[test]
    fn shot_table_csv_round_trip() {
        let mut t = ShotTable::empty(3);
        t.add(0b101, 7);
        t.add(0b010, 3);
        let csv = t.to_csv();
        let back = ShotTable::from_csv(&csv).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn shot_occupations_converge_to_state_values() {
        let p = params(2, 4.0, 0.0);
        let state = neel_state(2, None).unwrap();
        let c = build_trotter_circuit(&p, 0.3, 2).unwrap();
        let sv = run(&c, &state).unwrap();
        let exact: Vec<f64> = occupations_from_state(&sv, Some(&c.mode_perm))
            .iter()
            .map(|e| e.value)
            .collect();
        let n = 40_000u64;
        let shots = sample(&sv, n, &NoiseModel::noiseless(3), 0).unwrap();
        let sampled = occupations_from_shots(&shots, Some(&c.mode_perm));
        for (est, ex) in sampled.iter().zip(&exact) {
            let sigma = (est.std_err).max(1e-4);
            assert!(
                (est.value - ex).abs() < 4.0 * sigma,
                "value {} vs {ex} (sigma {sigma})",
                est.value
            );
        }
    }

    #[test]
    fn width_cap_is_enforced() {
        let err = StateVector::from_basis_index(30, 0);
        assert!(matches!(err, Err(Error::SizeLimit { .. })));
    }
}
