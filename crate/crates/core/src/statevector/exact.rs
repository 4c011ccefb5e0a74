//! Continuous-time exact evolution `exp(-i H t)|psi0>`.
//!
//! Two representations share one matrix-free matvec built straight from the
//! fermionic ladder-operator rules (independent of the Pauli machinery):
//!
//! * full Hilbert space, up to 16 qubits;
//! * the conserved `(N_up, N_down)` sector, up to 28 qubits, with dimension
//!   `C(L, N_up) * C(L, N_down)`.
//!
//! Propagation uses a Lanczos (Krylov) short-time integrator with full
//! reorthogonalization and adaptive substepping; the small tridiagonal
//! exponential comes from a dense symmetric eigensolve.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{mode_index, FockState, HubbardParams, Spin};
use crate::statevector::{StateVector, DEFAULT_QUBIT_CAP};

const FULL_CAP: usize = 16;
const SECTOR_CAP: usize = 28;
const KRYLOV_MAX: usize = 40;
const KRYLOV_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Hop {
    a: usize,
    b: usize,
    between_mask: u64,
    /// Matrix element prefactor `-t`.
    amp: f64,
}

enum Repr {
    Full {
        n_qubits: usize,
    },
    Sector {
        n_qubits: usize,
        basis: Vec<u64>,
    },
}

/// Exact-evolution engine holding the current state.
pub struct ExactEvolver {
    repr: Repr,
    hops: Vec<Hop>,
    diag: Vec<f64>,
    psi: Vec<Complex64>,
    hnorm: f64,
    l: usize,
}

fn hop_list(params: &HubbardParams) -> Result<Vec<Hop>> {
    let l = params.l;
    let mut hops = Vec::with_capacity(2 * (l - 1));
    for bond in 0..l - 1 {
        for spin in [Spin::Up, Spin::Down] {
            let m1 = mode_index(bond, spin, l)?;
            let m2 = mode_index(bond + 1, spin, l)?;
            let (a, b) = (m1.min(m2), m1.max(m2));
            let mut between_mask = 0u64;
            for k in a + 1..b {
                between_mask |= 1 << k;
            }
            hops.push(Hop {
                a,
                b,
                between_mask,
                amp: -params.t_bond(bond),
            });
        }
    }
    Ok(hops)
}

fn diagonal_energy(params: &HubbardParams, bits: u64) -> f64 {
    let l = params.l;
    let mut e = 0.0;
    for site in 0..l {
        let up = bits >> mode_index(site, Spin::Up, l).unwrap() & 1;
        let dn = bits >> mode_index(site, Spin::Down, l).unwrap() & 1;
        e += params.u_site(site) * (up * dn) as f64;
        e -= params.mu_mode(site, Spin::Up) * up as f64;
        e -= params.mu_mode(site, Spin::Down) * dn as f64;
    }
    e
}

/// Loose spectral-norm bound from coefficient magnitudes; only used to pick
/// substep sizes.
fn norm_bound(params: &HubbardParams) -> f64 {
    let l = params.l;
    let mut n = 0.0;
    for bond in 0..l - 1 {
        n += 2.0 * params.t_bond(bond).abs() * 2.0;
    }
    for site in 0..l {
        n += params.u_site(site).abs();
        n += params.mu_mode(site, Spin::Up).abs();
        n += params.mu_mode(site, Spin::Down).abs();
    }
    n.max(1.0)
}

fn combinations(positions: &[usize], k: usize) -> Vec<u64> {
    fn rec(positions: &[usize], k: usize, start: usize, acc: u64, out: &mut Vec<u64>) {
        if k == 0 {
            out.push(acc);
            return;
        }
        for i in start..=positions.len() - k {
            rec(positions, k - 1, i + 1, acc | (1 << positions[i]), out);
        }
    }
    let mut out = Vec::new();
    if k <= positions.len() {
        rec(positions, k, 0, 0, &mut out);
    }
    out
}

impl ExactEvolver {
    /// Full-space evolution (<= 16 qubits).
    pub fn new_full(params: &HubbardParams, initial: &FockState) -> Result<Self> {
        params.validate()?;
        let n = params.n_qubits();
        if n > FULL_CAP {
            return Err(Error::SizeLimit {
                what: "full-space exact evolution",
                requested: n,
                cap: FULL_CAP,
            });
        }
        let dim = 1usize << n;
        let mut psi = vec![Complex64::ZERO; dim];
        psi[initial.basis_index()] = Complex64::ONE;
        let diag = (0..dim as u64)
            .map(|b| diagonal_energy(params, b))
            .collect();
        Ok(ExactEvolver {
            repr: Repr::Full { n_qubits: n },
            hops: hop_list(params)?,
            diag,
            psi,
            hnorm: norm_bound(params),
            l: params.l,
        })
    }

    /// Sector-restricted evolution in the `(N_up, N_down)` block of the
    /// initial state (<= 28 qubits).
    pub fn new_sector(params: &HubbardParams, initial: &FockState) -> Result<Self> {
        params.validate()?;
        let n = params.n_qubits();
        if n > SECTOR_CAP {
            return Err(Error::SizeLimit {
                what: "sector-restricted exact evolution",
                requested: n,
                cap: SECTOR_CAP,
            });
        }
        let l = params.l;
        let up_modes: Vec<usize> = (0..l)
            .map(|site| mode_index(site, Spin::Up, l).unwrap())
            .collect();
        let down_modes: Vec<usize> = (0..l)
            .map(|site| mode_index(site, Spin::Down, l).unwrap())
            .collect();
        let ups = combinations(&up_modes, initial.n_spin(Spin::Up));
        let downs = combinations(&down_modes, initial.n_spin(Spin::Down));
        let mut basis = Vec::with_capacity(ups.len() * downs.len());
        for &u in &ups {
            for &d in &downs {
                basis.push(u | d);
            }
        }
        basis.sort_unstable();
        let init_bits = initial.basis_index() as u64;
        let init_pos = basis
            .binary_search(&init_bits)
            .map_err(|_| Error::invalid("initial state not in its own sector"))?;
        let mut psi = vec![Complex64::ZERO; basis.len()];
        psi[init_pos] = Complex64::ONE;
        let diag = basis.iter().map(|&b| diagonal_energy(params, b)).collect();
        Ok(ExactEvolver {
            repr: Repr::Sector { n_qubits: n, basis },
            hops: hop_list(params)?,
            diag,
            psi,
            hnorm: norm_bound(params),
            l: params.l,
        })
    }

    /// Full space when it fits, otherwise the symmetry sector.
    pub fn new_auto(params: &HubbardParams, initial: &FockState) -> Result<Self> {
        if params.n_qubits() <= FULL_CAP {
            ExactEvolver::new_full(params, initial)
        } else {
            ExactEvolver::new_sector(params, initial)
        }
    }

    pub fn dim(&self) -> usize {
        self.psi.len()
    }

    fn n_qubits(&self) -> usize {
        match &self.repr {
            Repr::Full { n_qubits } => *n_qubits,
            Repr::Sector { n_qubits, .. } => *n_qubits,
        }
    }

    fn bits_of(&self, idx: usize) -> u64 {
        match &self.repr {
            Repr::Full { .. } => idx as u64,
            Repr::Sector { basis, .. } => basis[idx],
        }
    }

    fn matvec(&self, input: &[Complex64], output: &mut [Complex64]) {
        for (o, (&x, &d)) in output.iter_mut().zip(input.iter().zip(&self.diag)) {
            *o = x * d;
        }
        match &self.repr {
            Repr::Full { .. } => {
                for hop in &self.hops {
                    let ba = 1u64 << hop.a;
                    let bb = 1u64 << hop.b;
                    for i in 0..input.len() {
                        let bits = i as u64;
                        if ((bits >> hop.a) ^ (bits >> hop.b)) & 1 == 1 {
                            let j = (bits ^ ba ^ bb) as usize;
                            let sign = if (bits & hop.between_mask).count_ones() % 2 == 0 {
                                1.0
                            } else {
                                -1.0
                            };
                            output[j] += hop.amp * sign * input[i];
                        }
                    }
                }
            }
            Repr::Sector { basis, .. } => {
                for hop in &self.hops {
                    let ba = 1u64 << hop.a;
                    let bb = 1u64 << hop.b;
                    for (i, &bits) in basis.iter().enumerate() {
                        if ((bits >> hop.a) ^ (bits >> hop.b)) & 1 == 1 {
                            let target = bits ^ ba ^ bb;
                            let j = basis
                                .binary_search(&target)
                                .expect("hopping stays inside the sector");
                            let sign = if (bits & hop.between_mask).count_ones() % 2 == 0 {
                                1.0
                            } else {
                                -1.0
                            };
                            output[j] += hop.amp * sign * input[i];
                        }
                    }
                }
            }
        }
    }

    /// Advance the state by `exp(-i H dt)`.
    pub fn advance(&mut self, dt: f64) -> Result<()> {
        if dt == 0.0 {
            return Ok(());
        }
        // Initial substep guess; each substep still verifies convergence and
        // splits itself if needed.
        let substeps = ((dt.abs() * self.hnorm / 8.0).ceil() as usize).max(1);
        let tau = dt / substeps as f64;
        for _ in 0..substeps {
            self.krylov_substep(tau, 0)?;
        }
        Ok(())
    }

    fn krylov_substep(&mut self, tau: f64, depth: usize) -> Result<()> {
        if depth > 30 {
            return Err(Error::invalid(
                "krylov propagator failed to converge".to_string(),
            ));
        }
        let dim = self.psi.len();
        let norm0 = self.psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm0 == 0.0 {
            return Ok(());
        }
        let m_max = KRYLOV_MAX.min(dim);
        let mut vs: Vec<Vec<Complex64>> = Vec::with_capacity(m_max);
        vs.push(self.psi.iter().map(|a| a / norm0).collect());
        let mut alphas: Vec<f64> = Vec::with_capacity(m_max);
        let mut betas: Vec<f64> = Vec::with_capacity(m_max);
        let mut w = vec![Complex64::ZERO; dim];
        let mut happy = false;

        // exp(-i tau T) e_1 via the dense symmetric eigensolve of the
        // tridiagonal T built so far.
        let expm_coeff = |alphas: &[f64], betas: &[f64]| -> Vec<Complex64> {
            let m = alphas.len();
            let mut t = nalgebra::DMatrix::<f64>::zeros(m, m);
            for j in 0..m {
                t[(j, j)] = alphas[j];
                if j + 1 < m {
                    t[(j, j + 1)] = betas[j];
                    t[(j + 1, j)] = betas[j];
                }
            }
            let eig = nalgebra::SymmetricEigen::new(t);
            let mut coeff = vec![Complex64::ZERO; m];
            for k in 0..m {
                let phase = Complex64::from_polar(1.0, -eig.eigenvalues[k] * tau);
                let v0k = eig.eigenvectors[(0, k)];
                for (j, c) in coeff.iter_mut().enumerate() {
                    *c += eig.eigenvectors[(j, k)] * phase * v0k;
                }
            }
            coeff
        };

        let mut coeff: Vec<Complex64> = Vec::new();
        let mut converged = false;
        for j in 0..m_max {
            self.matvec(&vs[j], &mut w);
            let alpha: f64 = vs[j]
                .iter()
                .zip(&w)
                .map(|(v, x)| (v.conj() * x).re)
                .sum();
            alphas.push(alpha);
            for (wi, vi) in w.iter_mut().zip(&vs[j]) {
                *wi -= alpha * vi;
            }
            if j > 0 {
                let beta = betas[j - 1];
                for (wi, vi) in w.iter_mut().zip(&vs[j - 1]) {
                    *wi -= beta * vi;
                }
            }
            // Full reorthogonalization for numerical robustness.
            for v in &vs {
                let c: Complex64 = v.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                if c.norm() > 0.0 {
                    for (wi, vi) in w.iter_mut().zip(v) {
                        *wi -= c * vi;
                    }
                }
            }
            let beta = w.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            if beta < 1e-13 * self.hnorm.max(1.0) {
                happy = true;
                break;
            }
            // Cheap a-posteriori convergence test on the small subspace.
            if j + 1 >= 6 && (j + 1) % 3 == 0 {
                coeff = expm_coeff(&alphas, &betas);
                if coeff[j].norm() < KRYLOV_TOL {
                    converged = true;
                    break;
                }
            }
            if vs.len() == m_max {
                break;
            }
            betas.push(beta);
            vs.push(w.iter().map(|a| a / beta).collect());
        }

        let m = alphas.len();
        if coeff.len() != m {
            coeff = expm_coeff(&alphas, &betas[..m.saturating_sub(1)]);
        }
        if !happy && !converged && m == m_max {
            let err = coeff[m - 1].norm();
            if err > KRYLOV_TOL {
                // Too large a step for this Krylov dimension: split it.
                self.krylov_substep(tau / 2.0, depth + 1)?;
                self.krylov_substep(tau / 2.0, depth + 1)?;
                return Ok(());
            }
        }
        let mut next = vec![Complex64::ZERO; dim];
        for (j, c) in coeff.iter().enumerate() {
            let scaled = c * norm0;
            for (ni, vi) in next.iter_mut().zip(&vs[j]) {
                *ni += scaled * vi;
            }
        }
        self.psi = next;
        Ok(())
    }

    /// Occupation `<n_q>` per canonical mode.
    pub fn occupations(&self) -> Vec<f64> {
        let n = self.n_qubits();
        let mut occ = vec![0.0; n];
        for (i, a) in self.psi.iter().enumerate() {
            let p = a.norm_sqr();
            if p == 0.0 {
                continue;
            }
            let bits = self.bits_of(i);
            for (q, occ_q) in occ.iter_mut().enumerate() {
                if bits >> q & 1 == 1 {
                    *occ_q += p;
                }
            }
        }
        occ
    }

    /// `<n_q n_r>` joint occupation of two modes.
    pub fn joint_occupation(&self, q: usize, r: usize) -> f64 {
        self.psi
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let bits = self.bits_of(*i);
                bits >> q & 1 == 1 && bits >> r & 1 == 1
            })
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Materialize the state on the full Hilbert space.
    pub fn to_statevector(&self) -> Result<StateVector> {
        let n = self.n_qubits();
        if n > DEFAULT_QUBIT_CAP {
            return Err(Error::SizeLimit {
                what: "materialized exact state",
                requested: n,
                cap: DEFAULT_QUBIT_CAP,
            });
        }
        let mut amps = vec![Complex64::ZERO; 1 << n];
        for (i, a) in self.psi.iter().enumerate() {
            amps[self.bits_of(i) as usize] = *a;
        }
        Ok(StateVector { n_qubits: n, amps })
    }

    pub fn l(&self) -> usize {
        self.l
    }
}

/// Convenience wrapper: evolve a Fock state for time `t` and materialize.
pub fn exact_evolve(params: &HubbardParams, initial: &FockState, t: f64) -> Result<StateVector> {
    let mut ev = ExactEvolver::new_auto(params, initial)?;
    ev.advance(t)?;
    ev.to_statevector()
}
