//! Fermi-Hubbard model definition, Fock states, the pair-interleaved
//! Jordan-Wigner mapping, and the qubitized Hamiltonian.
//!
//! Mode ordering: the crate-wide convention is the pair-interleaved sequence
//! starting with the spin-down mode of site 0,
//!
//! ```text
//! (0,dn) (0,up) (1,up) (1,dn) (2,dn) (2,up) (3,up) (3,dn) ...
//! ```
//!
//! so even sites map `(i,dn) -> 2i, (i,up) -> 2i+1` and odd sites the
//! reverse. This places every onsite pair and every other hopping bond on
//! adjacent qubits; the remaining bonds become weight-4 "long hops" that the
//! circuit layer turns back into short hops with an fSWAP layer.
//!
//! The qubitized Hamiltonian splits into four term groups,
//!
//! ```text
//! H = H_short + H_long + H_1Q + H_U2Q  (+ dropped constant)
//! ```
//!
//! with coefficients `-t/2` on hopping strings, `(mu - U/2)/2` on the
//! single-qubit Z terms and `U/4` on the onsite ZZ terms.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::{self, CMat, Mat2};

/// Spin species of a fermionic mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Spin {
    #[serde(rename = "up")]
    Up,
    #[serde(rename = "down")]
    Down,
}

impl Spin {
    pub fn flipped(self) -> Spin {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }
}

/// Fermion-to-qubit mode orderings supported by the workbench.
///
/// The pipeline uses `PairInterleaved` throughout; `Interleaved` exists for
/// the ordering comparison and as an alternative convention for the Pauli
/// path baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeOrdering {
    PairInterleaved,
    Interleaved,
}

/// Qubit index of mode `(site, spin)` in the pair-interleaved ordering.
pub fn mode_index(site: usize, spin: Spin, l: usize) -> Result<usize> {
    mode_index_with(ModeOrdering::PairInterleaved, site, spin, l)
}

/// Qubit index of mode `(site, spin)` under a chosen ordering.
pub fn mode_index_with(ordering: ModeOrdering, site: usize, spin: Spin, l: usize) -> Result<usize> {
    if site >= l {
        return Err(Error::invalid(format!(
            "site {site} out of range for L={l}"
        )));
    }
    let j = match ordering {
        ModeOrdering::PairInterleaved => {
            let down_first = site % 2 == 0;
            match (down_first, spin) {
                (true, Spin::Down) | (false, Spin::Up) => 2 * site,
                _ => 2 * site + 1,
            }
        }
        ModeOrdering::Interleaved => match spin {
            Spin::Up => 2 * site,
            Spin::Down => 2 * site + 1,
        },
    };
    Ok(j)
}

/// Inverse of [`mode_index`]: the `(site, spin)` label carried by qubit `j`.
pub fn mode_label(j: usize, l: usize) -> Result<(usize, Spin)> {
    if j >= 2 * l {
        return Err(Error::invalid(format!("qubit {j} out of range for L={l}")));
    }
    let site = j / 2;
    let down_first = site % 2 == 0;
    let spin = match (down_first, j % 2 == 0) {
        (true, true) | (false, false) => Spin::Down,
        _ => Spin::Up,
    };
    Ok((site, spin))
}

/// Couplings of the 1D Fermi-Hubbard chain.
///
/// Scalars describe the homogeneous model; the optional per-bond / per-site
/// / per-mode arrays override them without changing the term structure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HubbardParams {
    pub l: usize,
    pub t_h: f64,
    pub u: f64,
    pub mu: f64,
    /// Per-bond hopping `t_{i,i+1}`, length `L-1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_bonds: Option<Vec<f64>>,
    /// Per-site onsite coupling, length `L`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_sites: Option<Vec<f64>>,
    /// Per-site, per-spin chemical potential, length `L`, entries `[up, down]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_modes: Option<Vec<[f64; 2]>>,
}

impl HubbardParams {
    pub fn new(l: usize, t_h: f64, u: f64, mu: f64) -> Result<Self> {
        let p = HubbardParams {
            l,
            t_h,
            u,
            mu,
            t_bonds: None,
            u_sites: None,
            mu_modes: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 2 {
            return Err(Error::invalid(format!("L must be >= 2, got {}", self.l)));
        }
        if let Some(t) = &self.t_bonds {
            if t.len() != self.l - 1 {
                return Err(Error::invalid(format!(
                    "t_bonds has length {}, expected L-1 = {}",
                    t.len(),
                    self.l - 1
                )));
            }
        }
        if let Some(u) = &self.u_sites {
            if u.len() != self.l {
                return Err(Error::invalid(format!(
                    "u_sites has length {}, expected L = {}",
                    u.len(),
                    self.l
                )));
            }
        }
        if let Some(m) = &self.mu_modes {
            if m.len() != self.l {
                return Err(Error::invalid(format!(
                    "mu_modes has length {}, expected L = {}",
                    m.len(),
                    self.l
                )));
            }
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        2 * self.l
    }

    pub fn t_bond(&self, bond: usize) -> f64 {
        self.t_bonds
            .as_ref()
            .map_or(self.t_h, |t| t[bond])
    }

    pub fn u_site(&self, site: usize) -> f64 {
        self.u_sites.as_ref().map_or(self.u, |u| u[site])
    }

    pub fn mu_mode(&self, site: usize, spin: Spin) -> f64 {
        self.mu_modes.as_ref().map_or(self.mu, |m| match spin {
            Spin::Up => m[site][0],
            Spin::Down => m[site][1],
        })
    }
}

/// Fock state over `2L` modes, stored in pair-interleaved qubit order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockState {
    pub l: usize,
    /// `bits[j]` is the occupation of mode/qubit `j`.
    pub bits: Vec<bool>,
}

impl FockState {
    pub fn from_bits(l: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != 2 * l {
            return Err(Error::invalid(format!(
                "Fock state needs {} bits, got {}",
                2 * l,
                bits.len()
            )));
        }
        Ok(FockState { l, bits })
    }

    pub fn vacuum(l: usize) -> Self {
        FockState {
            l,
            bits: vec![false; 2 * l],
        }
    }

    pub fn occupation(&self, site: usize, spin: Spin) -> Result<bool> {
        Ok(self.bits[mode_index(site, spin, self.l)?])
    }

    pub fn n_spin(&self, spin: Spin) -> usize {
        (0..self.l)
            .filter(|&i| self.occupation(i, spin).unwrap())
            .count()
    }

    pub fn n_particles(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Basis index with qubit `j` as bit `j`, least significant first.
    pub fn basis_index(&self) -> usize {
        self.bits
            .iter()
            .enumerate()
            .fold(0usize, |acc, (j, &b)| acc | ((b as usize) << j))
    }

    pub fn n_qubits(&self) -> usize {
        2 * self.l
    }
}

/// Half-filled Neel state `|dn up dn up ...>`, optionally with one empty site.
pub fn neel_state(l: usize, vacancy: Option<usize>) -> Result<FockState> {
    if let Some(v) = vacancy {
        if v >= l {
            return Err(Error::invalid(format!(
                "vacancy site {v} out of range for L={l}"
            )));
        }
    }
    let mut bits = vec![false; 2 * l];
    for site in 0..l {
        if Some(site) == vacancy {
            continue;
        }
        let spin = if site % 2 == 0 { Spin::Down } else { Spin::Up };
        bits[mode_index(site, spin, l)?] = true;
    }
    FockState::from_bits(l, bits)
}

/// Single-qubit Pauli letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn matrix(self) -> Mat2 {
        match self {
            Axis::X => mat::pauli_x(),
            Axis::Y => mat::pauli_y(),
            Axis::Z => mat::pauli_z(),
        }
    }
}

/// Product of two Pauli letters on the same qubit: returns `(i^k, letter)`.
fn axis_product(a: Axis, b: Axis) -> (u8, Option<Axis>) {
    use Axis::*;
    match (a, b) {
        (X, X) | (Y, Y) | (Z, Z) => (0, None),
        (X, Y) => (1, Some(Z)),
        (Y, X) => (3, Some(Z)),
        (Y, Z) => (1, Some(X)),
        (Z, Y) => (3, Some(X)),
        (Z, X) => (1, Some(Y)),
        (X, Z) => (3, Some(Y)),
    }
}

/// Sparse Pauli string with its coefficient split into an exact unit phase
/// `i^k` and a real magnitude, so symbolic identities never accumulate
/// floating-point phase error.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliString {
    /// Power of `i` in the coefficient, in `0..4`.
    pub phase_pow: u8,
    /// Real, non-negative magnitude (zero allowed).
    pub magnitude: f64,
    /// Qubit index -> letter; identity qubits are absent.
    pub letters: BTreeMap<usize, Axis>,
}

impl PauliString {
    pub fn new(magnitude: f64, phase_pow: u8, letters: BTreeMap<usize, Axis>) -> Self {
        let mut ps = PauliString {
            phase_pow: phase_pow % 4,
            magnitude,
            letters,
        };
        ps.canonicalize();
        ps
    }

    pub fn identity(magnitude: f64) -> Self {
        PauliString::new(magnitude, 0, BTreeMap::new())
    }

    pub fn single(q: usize, axis: Axis, magnitude: f64) -> Self {
        let mut letters = BTreeMap::new();
        letters.insert(q, axis);
        PauliString::new(magnitude, 0, letters)
    }

    fn canonicalize(&mut self) {
        if self.magnitude < 0.0 {
            self.magnitude = -self.magnitude;
            self.phase_pow = (self.phase_pow + 2) % 4;
        }
    }

    pub fn coefficient(&self) -> Complex64 {
        let unit = match self.phase_pow {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        unit * self.magnitude
    }

    /// Number of non-identity letters.
    pub fn weight(&self) -> usize {
        self.letters.len()
    }

    /// Number of X or Y letters.
    pub fn xy_weight(&self) -> usize {
        self.letters
            .values()
            .filter(|&&a| a != Axis::Z)
            .count()
    }

    /// Group product `self * rhs` with exact phase tracking.
    pub fn multiply(&self, rhs: &PauliString) -> PauliString {
        let mut phase = (self.phase_pow + rhs.phase_pow) % 4;
        let mut letters = self.letters.clone();
        for (&q, &b) in &rhs.letters {
            match letters.remove(&q) {
                None => {
                    letters.insert(q, b);
                }
                Some(a) => {
                    let (k, prod) = axis_product(a, b);
                    phase = (phase + k) % 4;
                    if let Some(p) = prod {
                        letters.insert(q, p);
                    }
                }
            }
        }
        PauliString::new(self.magnitude * rhs.magnitude, phase, letters)
    }

    /// True if the strings commute as operators.
    pub fn commutes_with(&self, rhs: &PauliString) -> bool {
        let mut anti = 0usize;
        for (q, &a) in &self.letters {
            if let Some(&b) = rhs.letters.get(q) {
                if a != b {
                    anti += 1;
                }
            }
        }
        anti % 2 == 0
    }

    /// Dense matrix on `n` qubits (qubit 0 = least significant bit).
    pub fn to_dense(&self, n: usize) -> Result<CMat> {
        dense_cap(n, "PauliString::to_dense")?;
        let mut out = CMat::identity(1);
        for q in (0..n).rev() {
            let factor = match self.letters.get(&q) {
                Some(a) => a.matrix().to_cmat(),
                None => CMat::identity(2),
            };
            out = out.kron(&factor);
        }
        Ok(out.scale(self.coefficient()))
    }

    /// Conjugate by the full fSWAP layer `F = prod_i fSWAP(2i, 2i+1)`.
    ///
    /// fSWAP maps Paulis to Paulis, so this stays symbolic. Per site pair the
    /// single-letter action is
    ///
    /// ```text
    /// X. -> ZX   Y. -> ZY   Z. -> .Z
    /// .X -> XZ   .Y -> YZ   .Z -> Z.
    /// ```
    ///
    /// and two-letter products follow by multiplying images.
    pub fn conjugate_by_fswap_layer(&self, l: usize) -> PauliString {
        let mut out = PauliString::identity(self.magnitude);
        out.phase_pow = self.phase_pow;
        for pair in 0..l {
            let a = 2 * pair;
            let b = a + 1;
            let la = self.letters.get(&a).copied();
            let lb = self.letters.get(&b).copied();
            if la.is_none() && lb.is_none() {
                continue;
            }
            let mut piece = PauliString::identity(1.0);
            if let Some(ax) = la {
                piece = piece.multiply(&fswap_image_low(ax, a, b));
            }
            if let Some(ax) = lb {
                piece = piece.multiply(&fswap_image_high(ax, a, b));
            }
            out = out.multiply(&piece);
        }
        out
    }
}

/// fSWAP image of a letter on the low qubit of a pair.
fn fswap_image_low(ax: Axis, a: usize, b: usize) -> PauliString {
    let mut letters = BTreeMap::new();
    match ax {
        Axis::X => {
            letters.insert(a, Axis::Z);
            letters.insert(b, Axis::X);
        }
        Axis::Y => {
            letters.insert(a, Axis::Z);
            letters.insert(b, Axis::Y);
        }
        Axis::Z => {
            letters.insert(b, Axis::Z);
        }
    }
    PauliString::new(1.0, 0, letters)
}

/// fSWAP image of a letter on the high qubit of a pair.
fn fswap_image_high(ax: Axis, a: usize, b: usize) -> PauliString {
    let mut letters = BTreeMap::new();
    match ax {
        Axis::X => {
            letters.insert(a, Axis::X);
            letters.insert(b, Axis::Z);
        }
        Axis::Y => {
            letters.insert(a, Axis::Y);
            letters.insert(b, Axis::Z);
        }
        Axis::Z => {
            letters.insert(a, Axis::Z);
        }
    }
    PauliString::new(1.0, 0, letters)
}

/// Dense-construction size guard (design cap: 16 qubits).
fn dense_cap(n: usize, what: &'static str) -> Result<()> {
    if n > 16 {
        return Err(Error::SizeLimit {
            what,
            requested: n,
            cap: 16,
        });
    }
    Ok(())
}

/// Kind of Jordan-Wigner operator to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JwKind {
    Creation,
    Annihilation,
    Number,
}

/// Jordan-Wigner image of a single ladder or number operator as a sum of
/// Pauli strings, under the pair-interleaved ordering.
pub fn jw_operator(kind: JwKind, site: usize, spin: Spin, l: usize) -> Result<Vec<PauliString>> {
    let j = mode_index(site, spin, l)?;
    let string_z = |top: Axis| {
        let mut letters = BTreeMap::new();
        for k in 0..j {
            letters.insert(k, Axis::Z);
        }
        letters.insert(j, top);
        letters
    };
    Ok(match kind {
        // c^dag = (prod Z) (X - iY)/2
        JwKind::Creation => vec![
            PauliString::new(0.5, 0, string_z(Axis::X)),
            PauliString::new(0.5, 3, string_z(Axis::Y)),
        ],
        // c = (prod Z) (X + iY)/2
        JwKind::Annihilation => vec![
            PauliString::new(0.5, 0, string_z(Axis::X)),
            PauliString::new(0.5, 1, string_z(Axis::Y)),
        ],
        // n = (1 - Z)/2
        JwKind::Number => vec![
            PauliString::identity(0.5),
            PauliString::single(j, Axis::Z, -0.5),
        ],
    })
}

/// The qubitized Hamiltonian, grouped the way the circuit consumes it.
#[derive(Debug, Clone)]
pub struct QubitizedHamiltonian {
    /// Weight-2 `XX`/`YY` strings on qubit pairs `(2j+1, 2j+2)`.
    pub h_short: Vec<PauliString>,
    /// Weight-4 `XZZX`/`YZZY` strings on `(2j .. 2j+3)`.
    pub h_long: Vec<PauliString>,
    /// Weight-1 `Z` strings, one per qubit.
    pub h_1q: Vec<PauliString>,
    /// Weight-2 `ZZ` strings on site pairs `(2i, 2i+1)`.
    pub h_u2q: Vec<PauliString>,
    /// Additive constant discarded by the mapping.
    pub dropped_constant: f64,
    pub l: usize,
}

impl QubitizedHamiltonian {
    pub fn all_terms(&self) -> impl Iterator<Item = &PauliString> {
        self.h_short
            .iter()
            .chain(&self.h_long)
            .chain(&self.h_1q)
            .chain(&self.h_u2q)
    }

    /// Dense matrix of the full Hamiltonian, optionally including the
    /// dropped constant (needed when comparing against raw fermionic
    /// constructions).
    pub fn to_dense(&self, include_constant: bool) -> Result<CMat> {
        let n = 2 * self.l;
        dense_cap(n, "QubitizedHamiltonian::to_dense")?;
        let dim = 1usize << n;
        let mut out = CMat::zeros(dim);
        for term in self.all_terms() {
            out = out.add(&term.to_dense(n)?);
        }
        if include_constant {
            for k in 0..dim {
                out.data[k * dim + k] += Complex64::new(self.dropped_constant, 0.0);
            }
        }
        Ok(out)
    }
}

/// Jordan-Wigner transform of the Hubbard chain into grouped Pauli terms.
pub fn build_hamiltonian(params: &HubbardParams) -> Result<QubitizedHamiltonian> {
    params.validate()?;
    let l = params.l;
    let mut h_short = Vec::with_capacity(2 * (l - 1));
    let mut h_long = Vec::with_capacity(2 * (l - 1));
    for j in 0..l - 1 {
        let coeff = -params.t_bond(j) / 2.0;
        for axis in [Axis::X, Axis::Y] {
            let mut letters = BTreeMap::new();
            letters.insert(2 * j + 1, axis);
            letters.insert(2 * j + 2, axis);
            h_short.push(PauliString::new(coeff, 0, letters));

            let mut letters = BTreeMap::new();
            letters.insert(2 * j, axis);
            letters.insert(2 * j + 1, Axis::Z);
            letters.insert(2 * j + 2, Axis::Z);
            letters.insert(2 * j + 3, axis);
            h_long.push(PauliString::new(coeff, 0, letters));
        }
    }
    let mut h_1q = Vec::with_capacity(2 * l);
    for j in 0..2 * l {
        let (site, spin) = mode_label(j, l)?;
        let coeff = (params.mu_mode(site, spin) - params.u_site(site) / 2.0) / 2.0;
        h_1q.push(PauliString::single(j, Axis::Z, coeff));
    }
    let mut h_u2q = Vec::with_capacity(l);
    for i in 0..l {
        let mut letters = BTreeMap::new();
        letters.insert(2 * i, Axis::Z);
        letters.insert(2 * i + 1, Axis::Z);
        h_u2q.push(PauliString::new(params.u_site(i) / 4.0, 0, letters));
    }
    let mut dropped = 0.0;
    for i in 0..l {
        dropped += params.u_site(i) / 4.0;
        dropped -= params.mu_mode(i, Spin::Up) / 2.0;
        dropped -= params.mu_mode(i, Spin::Down) / 2.0;
    }
    Ok(QubitizedHamiltonian {
        h_short,
        h_long,
        h_1q,
        h_u2q,
        dropped_constant: dropped,
        l,
    })
}

/// On-disk model configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(default = "default_t_h")]
    pub t_h: f64,
    #[serde(rename = "U")]
    pub u: f64,
    pub mu: f64,
    pub initial_state: InitialStateConfig,
}

fn default_t_h() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialStateConfig {
    Neel {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        vacancy: Option<usize>,
    },
    Fock {
        /// One '0'/'1' character per mode, qubit 0 first.
        bits: String,
    },
}

impl ModelConfig {
    pub fn params(&self) -> Result<HubbardParams> {
        HubbardParams::new(self.l, self.t_h, self.u, self.mu)
    }

    pub fn initial_state(&self) -> Result<FockState> {
        match &self.initial_state {
            InitialStateConfig::Neel { vacancy } => neel_state(self.l, *vacancy),
            InitialStateConfig::Fock { bits } => {
                let parsed: Result<Vec<bool>> = bits
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(false),
                        '1' => Ok(true),
                        other => Err(Error::invalid(format!(
                            "invalid bit character '{other}' in initial state"
                        ))),
                    })
                    .collect();
                FockState::from_bits(self.l, parsed?)
            }
        }
    }
}
