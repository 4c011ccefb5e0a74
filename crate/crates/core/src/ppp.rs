//! Sparse Pauli-path propagation: a Heisenberg-picture classical baseline
//! with coefficient, weight, and XY-weight truncation.
//!
//! An observable `O = sum_P c_P P` is back-propagated through the Trotter
//! circuit gate by gate, in the exact reverse of the forward layer order.
//! A rotation `U = exp(-i t sigma / 2)` maps commuting terms to themselves
//! and branches anticommuting ones into `cos(t) P + i sin(t) sigma P`; the
//! `i` always resolves against the `+-i` of the anticommuting product, so
//! coefficients stay real. fSWAP layers are Clifford and act as a symbolic
//! relabeling. Truncation fires once per Trotter step.
//!
//! Keys pack two bits per qubit (an X mask and a Z mask), so weight and
//! XY-weight are population counts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{mode_index_with, Axis, FockState, HubbardParams, ModeOrdering, PauliString, Spin};

/// Packed Pauli: X mask and Z mask over up to 64 qubits
/// (`X = x`, `Z = z`, `Y = x & z`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliKey {
    pub x: u64,
    pub z: u64,
}

impl PauliKey {
    pub const IDENTITY: PauliKey = PauliKey { x: 0, z: 0 };

    pub fn weight(self) -> u32 {
        (self.x | self.z).count_ones()
    }

    pub fn xy_weight(self) -> u32 {
        self.x.count_ones()
    }

    pub fn is_z_type(self) -> bool {
        self.x == 0
    }

    pub fn commutes_with(self, other: PauliKey) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// Packed product `self * other`: returns the key and the power of `i`
    /// in the phase.
    pub fn multiply(self, other: PauliKey) -> (PauliKey, u8) {
        let key = PauliKey {
            x: self.x ^ other.x,
            z: self.z ^ other.z,
        };
        let mut phase = 0u8;
        let mut overlap = (self.x | self.z) & (other.x | other.z);
        while overlap != 0 {
            let q = overlap.trailing_zeros();
            overlap &= overlap - 1;
            let a = ((self.x >> q & 1) as u8) | (((self.z >> q & 1) as u8) << 1);
            let b = ((other.x >> q & 1) as u8) | (((other.z >> q & 1) as u8) << 1);
            // 1 = X, 2 = Z, 3 = Y; cyclic X->Y->Z gains i, reverse gains -i.
            phase = (phase
                + match (a, b) {
                    (1, 3) | (3, 2) | (2, 1) => 1, // XY, YZ, ZX
                    (3, 1) | (2, 3) | (1, 2) => 3, // YX, ZY, XZ
                    _ => 0,
                })
                % 4;
        }
        (key, phase)
    }

    pub fn from_pauli_string(ps: &PauliString) -> Result<PauliKey> {
        let mut key = PauliKey::IDENTITY;
        for (&q, &axis) in &ps.letters {
            if q >= 64 {
                return Err(Error::invalid("packed Pauli keys support up to 64 qubits"));
            }
            match axis {
                Axis::X => key.x |= 1 << q,
                Axis::Y => {
                    key.x |= 1 << q;
                    key.z |= 1 << q;
                }
                Axis::Z => key.z |= 1 << q,
            }
        }
        Ok(key)
    }

    /// Evaluate on a Fock state: `0` for any X/Y letter, otherwise the
    /// product of Z eigenvalues.
    pub fn fock_expectation(self, bits: u64) -> f64 {
        if !self.is_z_type() {
            return 0.0;
        }
        if (self.z & bits).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Sorted-map store from packed key to real coefficient; zero coefficients
/// are never stored.
#[derive(Debug, Clone, Default)]
pub struct PauliStore {
    terms: Vec<(PauliKey, f64)>,
}

impl PauliStore {
    pub fn new() -> Self {
        PauliStore { terms: Vec::new() }
    }

    pub fn from_terms(mut terms: Vec<(PauliKey, f64)>) -> Self {
        terms.sort_unstable_by_key(|&(k, _)| k);
        let mut merged: Vec<(PauliKey, f64)> = Vec::with_capacity(terms.len());
        for (k, c) in terms {
            match merged.last_mut() {
                Some((lk, lc)) if *lk == k => *lc += c,
                _ => merged.push((k, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        PauliStore { terms: merged }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, key: PauliKey) -> f64 {
        self.terms
            .binary_search_by_key(&key, |&(k, _)| k)
            .map(|i| self.terms[i].1)
            .unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = &(PauliKey, f64)> {
        self.terms.iter()
    }

    /// Conjugate every term by `exp(-i angle sigma / 2)` (Heisenberg
    /// picture): commuting terms unchanged, anticommuting terms branch.
    pub fn rotate(&mut self, generator: PauliKey, angle: f64) {
        if angle == 0.0 {
            return;
        }
        let (cos_t, sin_t) = (angle.cos(), angle.sin());
        let mut branched: Vec<(PauliKey, f64)> = Vec::new();
        for (key, coeff) in &mut self.terms {
            if key.commutes_with(generator) {
                continue;
            }
            let (new_key, phase) = generator.multiply(*key);
            // i * i^phase must be real: phase is odd for anticommuting pairs.
            debug_assert!(phase % 2 == 1);
            let sign = if phase == 1 { -1.0 } else { 1.0 };
            branched.push((new_key, sign * sin_t * *coeff));
            *coeff *= cos_t;
        }
        if branched.is_empty() {
            return;
        }
        branched.sort_unstable_by_key(|&(k, _)| k);
        // Merge two sorted lists, summing coefficients on equal keys.
        let old = std::mem::take(&mut self.terms);
        let mut merged = Vec::with_capacity(old.len() + branched.len());
        let (mut i, mut j) = (0, 0);
        while i < old.len() || j < branched.len() {
            let take_old = match (old.get(i), branched.get(j)) {
                (Some(a), Some(b)) => {
                    if a.0 == b.0 {
                        let c = a.1 + b.1;
                        if c != 0.0 {
                            merged.push((a.0, c));
                        }
                        i += 1;
                        j += 1;
                        continue;
                    }
                    a.0 < b.0
                }
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => break,
            };
            if take_old {
                if old[i].1 != 0.0 {
                    merged.push(old[i]);
                }
                i += 1;
            } else {
                let mut entry = branched[j];
                j += 1;
                while j < branched.len() && branched[j].0 == entry.0 {
                    entry.1 += branched[j].1;
                    j += 1;
                }
                if entry.1 != 0.0 {
                    merged.push(entry);
                }
            }
        }
        self.terms = merged;
    }

    /// Conjugate by the full fSWAP layer using a per-pair lookup table.
    fn conjugate_fswap_layer(&mut self, l: usize, table: &FswapTable) {
        for (key, coeff) in &mut self.terms {
            let (new_key, sign) = table.conjugate(*key, l);
            *key = new_key;
            *coeff *= sign;
        }
        self.terms.sort_unstable_by_key(|&(k, _)| k);
    }

    pub fn evaluate_on_fock(&self, bits: u64) -> f64 {
        self.terms
            .iter()
            .map(|&(k, c)| c * k.fock_expectation(bits))
            .sum()
    }
}

/// Dense coefficient array over all `4^n` Pauli keys, used for untruncated
/// propagation at small widths where the sparse store saturates anyway.
/// Index packing: `(z << n) | x`.
struct DenseStore {
    n_qubits: usize,
    coeffs: Vec<f64>,
}

/// Shared mutable pointer for the scatter-parallel dense rotation; the pair
/// partition guarantees disjoint writes.
struct SendPtr(*mut f64);
unsafe impl Send for SendPtr {}
unsafe impl Sync for SendPtr {}

impl DenseStore {
    const MAX_QUBITS: usize = 13;

    fn new(n_qubits: usize, key: PauliKey, coeff: f64) -> Self {
        debug_assert!(n_qubits <= Self::MAX_QUBITS);
        let mut coeffs = vec![0.0; 1usize << (2 * n_qubits)];
        coeffs[Self::index_of(key, n_qubits)] = coeff;
        DenseStore { n_qubits, coeffs }
    }

    fn index_of(key: PauliKey, n: usize) -> usize {
        ((key.z as usize) << n) | key.x as usize
    }

    fn key_of(idx: usize, n: usize) -> PauliKey {
        let mask = (1u64 << n) - 1;
        PauliKey {
            x: idx as u64 & mask,
            z: (idx as u64 >> n) & mask,
        }
    }

    /// In-place conjugation by `exp(-i angle sigma / 2)`: anticommuting keys
    /// pair up as `(P, sigma P)` and rotate orthogonally.
    fn rotate(&mut self, generator: PauliKey, angle: f64) {
        if angle == 0.0 {
            return;
        }
        let n = self.n_qubits;
        let delta = Self::index_of(generator, n);
        let (cos_t, sin_t) = (angle.cos(), angle.sin());
        // The branch sign of P -> i sin(t) sigma P depends only on P's
        // letters on the generator support (<= 2 qubits for our circuits):
        // precompute a flat table over those gathered bits, with 0.0
        // marking commuting configurations.
        let mut qubits = Vec::new();
        for q in 0..n {
            if (generator.x | generator.z) >> q & 1 == 1 {
                qubits.push(q);
            }
        }
        let n_sub = qubits.len();
        debug_assert!(n_sub <= 3, "circuit generators have weight <= 3");
        let table_len = 1usize << (2 * n_sub);
        let mut sign_table = vec![0.0f64; table_len];
        for (m, entry) in sign_table.iter_mut().enumerate() {
            let mut key = PauliKey::IDENTITY;
            for (j, &q) in qubits.iter().enumerate() {
                if m >> j & 1 == 1 {
                    key.x |= 1 << q;
                }
                if m >> (n_sub + j) & 1 == 1 {
                    key.z |= 1 << q;
                }
            }
            if !key.commutes_with(generator) {
                let (_, phase) = generator.multiply(key);
                debug_assert!(phase % 2 == 1);
                *entry = if phase == 1 { -1.0 } else { 1.0 };
            }
        }
        let gather = |idx: usize| -> usize {
            let mut g = 0usize;
            for (j, &q) in qubits.iter().enumerate() {
                g |= (idx >> q & 1) << j;
                g |= (idx >> (n + q) & 1) << (n_sub + j);
            }
            g
        };
        // Every index belongs to exactly one pair `(idx, idx ^ delta)`, so
        // contiguous chunks of the low-half indices write disjoint memory
        // and can run in parallel; the result is bit-identical to the
        // serial pass.
        let len = self.coeffs.len();
        let ptr = SendPtr(self.coeffs.as_mut_ptr());
        let n_threads = std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
            .min(8)
            .max(1);
        let chunk = len.div_ceil(n_threads);
        let run_range = |range: std::ops::Range<usize>, ptr: &SendPtr| {
            let coeffs = ptr.0;
            for idx in range {
                let partner = idx ^ delta;
                if idx >= partner {
                    continue;
                }
                // SAFETY: each (idx, partner) pair is visited by exactly one
                // range (the one containing the smaller index), and pairs
                // partition the array.
                unsafe {
                    let a = *coeffs.add(idx);
                    let b = *coeffs.add(partner);
                    if a == 0.0 && b == 0.0 {
                        continue;
                    }
                    let s = sign_table[gather(idx)];
                    if s == 0.0 {
                        continue;
                    }
                    // P -> cos P + s sin P'; P' -> cos P' - s sin P.
                    *coeffs.add(idx) = cos_t * a - s * sin_t * b;
                    *coeffs.add(partner) = cos_t * b + s * sin_t * a;
                }
            }
        };
        if n_threads == 1 || len < (1 << 18) {
            run_range(0..len, &ptr);
        } else {
            std::thread::scope(|scope| {
                for t in 0..n_threads {
                    let range = (t * chunk)..((t + 1) * chunk).min(len);
                    let ptr_ref = &ptr;
                    let run = &run_range;
                    scope.spawn(move || run(range, ptr_ref));
                }
            });
        }
    }

    fn conjugate_fswap_layer(&mut self, l: usize, table: &FswapTable) {
        let n = self.n_qubits;
        let mut out = vec![0.0; self.coeffs.len()];
        for (idx, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let (key, sign) = table.conjugate(Self::key_of(idx, n), l);
            out[Self::index_of(key, n)] = sign * c;
        }
        self.coeffs = out;
    }

    fn evaluate_on_fock(&self, bits: u64) -> f64 {
        let n = self.n_qubits;
        let mut total = 0.0;
        for z in 0..(1usize << n) {
            let c = self.coeffs[z << n];
            if c != 0.0 {
                let sign = if (z as u64 & bits).count_ones() % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                total += sign * c;
            }
        }
        total
    }

    /// One combined census-and-truncation pass.
    fn truncate(&mut self, policy: &TruncationPolicy, census: &mut StepCensus) {
        let n = self.n_qubits;
        let xy_cap = policy.xy_cap();
        let x_mask = (1usize << n) - 1;
        for (idx, c) in self.coeffs.iter_mut().enumerate() {
            if *c == 0.0 {
                continue;
            }
            census.before += 1;
            let x = idx & x_mask;
            let z = idx >> n;
            if ((x | z) as u64).count_ones() > policy.mw {
                census.discarded_weight += 1;
                *c = 0.0;
            } else if (x as u64).count_ones() > xy_cap {
                census.discarded_xy += 1;
                *c = 0.0;
            } else if c.abs() < policy.delta_min {
                census.discarded_coeff += 1;
                *c = 0.0;
            } else {
                census.retained += 1;
            }
        }
    }
}

/// Per-pair fSWAP conjugation table over the 16 two-qubit Paulis, derived
/// from the symbolic single-pair conjugation in [`crate::model`].
struct FswapTable {
    /// Indexed by `low_letter | high_letter << 2`; letters encode
    /// I=0, X=1, Z=2, Y=3 as `(x, z)` bit pairs.
    entries: [(u8, u8, f64); 16],
}

impl FswapTable {
    fn build() -> FswapTable {
        let mut entries = [(0u8, 0u8, 1.0); 16];
        for low in 0..4u8 {
            for high in 0..4u8 {
                let mut letters = BTreeMap::new();
                if let Some(a) = decode_axis(low) {
                    letters.insert(0usize, a);
                }
                if let Some(a) = decode_axis(high) {
                    letters.insert(1usize, a);
                }
                let ps = PauliString::new(1.0, 0, letters);
                let conj = ps.conjugate_by_fswap_layer(1);
                debug_assert!(conj.phase_pow % 2 == 0, "fSWAP conjugation is real");
                let sign = if conj.phase_pow == 0 { 1.0 } else { -1.0 };
                let lo = encode_axis(conj.letters.get(&0).copied());
                let hi = encode_axis(conj.letters.get(&1).copied());
                entries[(low | high << 2) as usize] = (lo, hi, sign * conj.magnitude);
            }
        }
        FswapTable { entries }
    }

    fn conjugate(&self, key: PauliKey, l: usize) -> (PauliKey, f64) {
        let mut out = PauliKey::IDENTITY;
        let mut sign = 1.0;
        for pair in 0..l {
            let a = 2 * pair;
            let b = a + 1;
            let low = ((key.x >> a & 1) as u8) | (((key.z >> a & 1) as u8) << 1);
            let high = ((key.x >> b & 1) as u8) | (((key.z >> b & 1) as u8) << 1);
            let (lo, hi, s) = self.entries[(low | high << 2) as usize];
            sign *= s;
            out.x |= ((lo & 1) as u64) << a | ((hi & 1) as u64) << b;
            out.z |= (((lo >> 1) & 1) as u64) << a | (((hi >> 1) & 1) as u64) << b;
        }
        (out, sign)
    }
}

fn decode_axis(code: u8) -> Option<Axis> {
    match code {
        0 => None,
        1 => Some(Axis::X),
        2 => Some(Axis::Z),
        3 => Some(Axis::Y),
        _ => unreachable!(),
    }
}

fn encode_axis(axis: Option<Axis>) -> u8 {
    match axis {
        None => 0,
        Some(Axis::X) => 1,
        Some(Axis::Z) => 2,
        Some(Axis::Y) => 3,
    }
}

/// Truncation thresholds applied once per Trotter step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruncationPolicy {
    /// Maximum Pauli weight.
    pub mw: u32,
    /// Coefficient threshold.
    pub delta_min: f64,
    /// Maximum XY weight; `None` defaults to `mw / 2`.
    pub mw_xy: Option<u32>,
}

impl TruncationPolicy {
    pub fn disabled() -> Self {
        TruncationPolicy {
            mw: u32::MAX,
            delta_min: 0.0,
            mw_xy: Some(u32::MAX),
        }
    }

    pub fn is_disabled(&self) -> bool {
        self.mw == u32::MAX && self.delta_min == 0.0 && self.mw_xy == Some(u32::MAX)
    }

    pub fn with_mw(mw: u32, delta_min: f64) -> Self {
        TruncationPolicy {
            mw,
            delta_min,
            mw_xy: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mw < 1 {
            return Err(Error::invalid("mw must be >= 1"));
        }
        if self.delta_min < 0.0 {
            return Err(Error::invalid("delta_min must be >= 0"));
        }
        Ok(())
    }

    pub fn xy_cap(&self) -> u32 {
        self.mw_xy.unwrap_or(self.mw / 2)
    }
}

/// Per-step truncation bookkeeping.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct StepCensus {
    pub step: usize,
    pub before: usize,
    pub retained: usize,
    pub discarded_weight: usize,
    pub discarded_coeff: usize,
    pub discarded_xy: usize,
}

impl StepCensus {
    pub fn totals_consistent(&self) -> bool {
        self.before
            == self.retained + self.discarded_weight + self.discarded_coeff + self.discarded_xy
    }
}

/// Result of a propagation run: one expectation value per step (step 0 is
/// the bare initial expectation) plus the truncation census.
#[derive(Debug, Clone)]
pub struct PppRun {
    pub values: Vec<f64>,
    pub census: Vec<StepCensus>,
}

/// Which Trotterized rotation sequence to back-propagate through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PppScheme {
    /// The pair-interleaved fSWAP-network circuit built by this crate
    /// (matches the statevector executor step for step).
    PairInterleavedCircuit,
    /// Direct first-order Trotterization of the interleaved-ordering
    /// Hamiltonian (weight-3 hop strings, no fSWAP layers).
    InterleavedDirect,
}

enum StepOp {
    Rotation { generator: PauliKey, angle: f64 },
    FswapLayer,
}

/// One Trotter step, listed in reverse time order for Heisenberg
/// conjugation.
fn reversed_step_ops(params: &HubbardParams, dt: f64, scheme: PppScheme) -> Result<Vec<StepOp>> {
    let l = params.l;
    let mut forward: Vec<StepOp> = Vec::new();
    let z_key = |q: usize| PauliKey { x: 0, z: 1 << q };
    match scheme {
        PppScheme::PairInterleavedCircuit => {
            let rz_layer = |forward: &mut Vec<StepOp>| {
                for site in 0..l {
                    for spin in [Spin::Up, Spin::Down] {
                        let q = mode_index_with(ModeOrdering::PairInterleaved, site, spin, l)?;
                        forward.push(StepOp::Rotation {
                            generator: z_key(q),
                            angle: (params.mu_mode(site, spin) - params.u_site(site) / 2.0) * dt
                                / 2.0,
                        });
                    }
                }
                Ok::<(), Error>(())
            };
            let hop_layer = |forward: &mut Vec<StepOp>| {
                for bond in 0..l - 1 {
                    let (a, b) = (2 * bond + 1, 2 * bond + 2);
                    let theta = -params.t_bond(bond) * dt;
                    for xx in [true, false] {
                        let key = if xx {
                            PauliKey {
                                x: (1 << a) | (1 << b),
                                z: 0,
                            }
                        } else {
                            PauliKey {
                                x: (1 << a) | (1 << b),
                                z: (1 << a) | (1 << b),
                            }
                        };
                        forward.push(StepOp::Rotation {
                            generator: key,
                            angle: theta,
                        });
                    }
                }
            };
            rz_layer(&mut forward)?;
            hop_layer(&mut forward);
            for site in 0..l {
                forward.push(StepOp::Rotation {
                    generator: PauliKey {
                        x: 0,
                        z: (1 << (2 * site)) | (1 << (2 * site + 1)),
                    },
                    angle: params.u_site(site) * dt / 2.0,
                });
            }
            forward.push(StepOp::FswapLayer);
            hop_layer(&mut forward);
            rz_layer(&mut forward)?;
        }
        PppScheme::InterleavedDirect => {
            for site in 0..l {
                for spin in [Spin::Up, Spin::Down] {
                    let q = mode_index_with(ModeOrdering::Interleaved, site, spin, l)?;
                    forward.push(StepOp::Rotation {
                        generator: z_key(q),
                        angle: (params.mu_mode(site, spin) - params.u_site(site) / 2.0) * dt,
                    });
                }
            }
            for bond in 0..l - 1 {
                for spin in [Spin::Up, Spin::Down] {
                    let a = mode_index_with(ModeOrdering::Interleaved, bond, spin, l)?;
                    let b = mode_index_with(ModeOrdering::Interleaved, bond + 1, spin, l)?;
                    let (a, b) = (a.min(b), a.max(b));
                    let theta = -params.t_bond(bond) * dt;
                    let mid: u64 = ((a + 1)..b).map(|k| 1u64 << k).sum();
                    for xx in [true, false] {
                        let ends = (1u64 << a) | (1 << b);
                        let key = if xx {
                            PauliKey { x: ends, z: mid }
                        } else {
                            PauliKey {
                                x: ends,
                                z: mid | ends,
                            }
                        };
                        forward.push(StepOp::Rotation {
                            generator: key,
                            angle: theta,
                        });
                    }
                }
            }
            for site in 0..l {
                let a = mode_index_with(ModeOrdering::Interleaved, site, Spin::Up, l)?;
                let b = mode_index_with(ModeOrdering::Interleaved, site, Spin::Down, l)?;
                forward.push(StepOp::Rotation {
                    generator: PauliKey {
                        x: 0,
                        z: (1u64 << a) | (1 << b),
                    },
                    angle: params.u_site(site) * dt / 2.0,
                });
            }
        }
    }
    forward.reverse();
    Ok(forward)
}

/// Heisenberg-picture propagation of a Z-type observable through `n_steps`
/// Trotter steps, evaluated on `initial` after every step.
pub fn propagate(
    observable: &PauliString,
    params: &HubbardParams,
    dt: f64,
    n_steps: usize,
    policy: &TruncationPolicy,
    initial: &FockState,
    scheme: PppScheme,
) -> Result<PppRun> {
    policy.validate()?;
    params.validate()?;
    if initial.l != params.l {
        return Err(Error::ShapeMismatch("initial state size".to_string()));
    }
    let key = PauliKey::from_pauli_string(observable)?;
    if !key.is_z_type() {
        return Err(Error::invalid(
            "Fock-state evaluation needs a Z-type observable",
        ));
    }
    let coeff = observable.coefficient();
    if coeff.im != 0.0 {
        return Err(Error::invalid("observable coefficient must be real"));
    }
    // Fock states are stored in pair-interleaved order; the direct
    // interleaved scheme evaluates in its own mode order.
    let bits = match scheme {
        PppScheme::PairInterleavedCircuit => initial.basis_index() as u64,
        PppScheme::InterleavedDirect => {
            let mut b = 0u64;
            for site in 0..params.l {
                for spin in [Spin::Up, Spin::Down] {
                    if initial.occupation(site, spin)? {
                        b |= 1 << mode_index_with(ModeOrdering::Interleaved, site, spin, params.l)?;
                    }
                }
            }
            b
        }
    };
    let ops = reversed_step_ops(params, dt, scheme)?;
    let table = FswapTable::build();
    let l = params.l;
    let n_qubits = 2 * l;
    let needs_odd = matches!(scheme, PppScheme::PairInterleavedCircuit);

    // Weakly-truncated propagation saturates the sparse store, where the
    // dense coefficient array is far cheaper; tightly-capped runs stay
    // sparse.
    let weakly_truncated =
        policy.mw.min(policy.xy_cap().saturating_mul(2)) as usize + 2 >= n_qubits;
    if weakly_truncated && n_qubits <= DenseStore::MAX_QUBITS {
        return propagate_dense(
            key, coeff.re, bits, &ops, &table, l, n_qubits, n_steps, needs_odd, policy,
        );
    }

    // Mode labels alternate with the fSWAP parity, so even and odd steps
    // measure F-conjugated observables; run one store per parity.
    let mut even_store = PauliStore::from_terms(vec![(key, coeff.re)]);
    let mut odd_store = if needs_odd {
        let (okey, sign) = table.conjugate(key, l);
        Some(PauliStore::from_terms(vec![(okey, sign * coeff.re)]))
    } else {
        None
    };

    let mut values = Vec::with_capacity(n_steps + 1);
    let mut census = Vec::with_capacity(n_steps);
    values.push(even_store.evaluate_on_fock(bits));

    for step in 1..=n_steps {
        let mut c = StepCensus {
            step,
            ..Default::default()
        };
        for store in std::iter::once(&mut even_store).chain(odd_store.iter_mut()) {
            for op in &ops {
                match op {
                    StepOp::Rotation { generator, angle } => store.rotate(*generator, *angle),
                    StepOp::FswapLayer => store.conjugate_fswap_layer(l, &table),
                }
            }
            truncate(store, policy, &mut c);
        }
        let value = if step % 2 == 1 {
            odd_store.as_ref().unwrap_or(&even_store).evaluate_on_fock(bits)
        } else {
            even_store.evaluate_on_fock(bits)
        };
        values.push(value);
        census.push(c);
    }
    Ok(PppRun { values, census })
}

#[allow(clippy::too_many_arguments)]
fn propagate_dense(
    key: PauliKey,
    coeff: f64,
    bits: u64,
    ops: &[StepOp],
    table: &FswapTable,
    l: usize,
    n_qubits: usize,
    n_steps: usize,
    needs_odd: bool,
    policy: &TruncationPolicy,
) -> Result<PppRun> {
    let mut even_store = DenseStore::new(n_qubits, key, coeff);
    let mut odd_store = if needs_odd {
        let (okey, sign) = table.conjugate(key, l);
        Some(DenseStore::new(n_qubits, okey, sign * coeff))
    } else {
        None
    };
    let mut values = Vec::with_capacity(n_steps + 1);
    let mut census = Vec::with_capacity(n_steps);
    values.push(even_store.evaluate_on_fock(bits));
    for step in 1..=n_steps {
        let mut c = StepCensus {
            step,
            ..Default::default()
        };
        for store in std::iter::once(&mut even_store).chain(odd_store.iter_mut()) {
            for op in ops {
                match op {
                    StepOp::Rotation { generator, angle } => store.rotate(*generator, *angle),
                    StepOp::FswapLayer => store.conjugate_fswap_layer(l, table),
                }
            }
            store.truncate(policy, &mut c);
        }
        let value = if step % 2 == 1 {
            odd_store.as_ref().unwrap_or(&even_store).evaluate_on_fock(bits)
        } else {
            even_store.evaluate_on_fock(bits)
        };
        values.push(value);
        census.push(c);
    }
    Ok(PppRun { values, census })
}

fn truncate(store: &mut PauliStore, policy: &TruncationPolicy, census: &mut StepCensus) {
    let xy_cap = policy.xy_cap();
    census.before += store.terms.len();
    store.terms.retain(|&(k, c)| {
        if k.weight() > policy.mw {
            census.discarded_weight += 1;
            false
        } else if k.xy_weight() > xy_cap {
            census.discarded_xy += 1;
            false
        } else if c.abs() < policy.delta_min {
            census.discarded_coeff += 1;
            false
        } else {
            true
        }
    });
    census.retained += store.terms.len();
}

/// Occupation trace `<n_{site,spin}>(t_k)` via PPP.
pub fn occupation_trace(
    site: usize,
    spin: Spin,
    params: &HubbardParams,
    dt: f64,
    n_steps: usize,
    policy: &TruncationPolicy,
    initial: &FockState,
    scheme: PppScheme,
) -> Result<PppRun> {
    let ordering = match scheme {
        PppScheme::PairInterleavedCircuit => ModeOrdering::PairInterleaved,
        PppScheme::InterleavedDirect => ModeOrdering::Interleaved,
    };
    let q = mode_index_with(ordering, site, spin, params.l)?;
    let z = PauliString::single(q, Axis::Z, 1.0);
    let run = propagate(&z, params, dt, n_steps, policy, initial, scheme)?;
    // n = (1 - <Z>)/2.
    let values = run.values.iter().map(|z| (1.0 - z) / 2.0).collect();
    Ok(PppRun {
        values,
        census: run.census,
    })
}
