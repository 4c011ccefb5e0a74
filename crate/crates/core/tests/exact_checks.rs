//! The Krylov propagator against an independent dense eigendecomposition,
//! plus cross-module consistency of the Trotter-error scan.

use num_complex::Complex64;

use fhsim_core::analysis::rmse;
use fhsim_core::model::{build_hamiltonian, neel_state, HubbardParams};
use fhsim_core::statevector::{
    exact_evolve, occupations_from_state, trotter_error_scan, trotter_occupation_series,
    ExactEvolver, StateVector,
};

/// exp(-i H t)|psi> via nalgebra's dense symmetric eigensolver: an
/// implementation-independent route to the same state.
fn dense_evolve(params: &HubbardParams, initial_index: usize, t: f64) -> StateVector {
    let h = build_hamiltonian(params).unwrap().to_dense(false).unwrap();
    let dim = h.dim;
    let mut hr = nalgebra::DMatrix::<f64>::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            hr[(r, c)] = h.at(r, c).re;
        }
    }
    let eig = nalgebra::SymmetricEigen::new(hr);
    // amps = V exp(-i lambda t) V^T e_init.
    let mut amps = vec![Complex64::ZERO; dim];
    for k in 0..dim {
        let phase = Complex64::from_polar(1.0, -eig.eigenvalues[k] * t)
            * eig.eigenvectors[(initial_index, k)];
        for (r, a) in amps.iter_mut().enumerate() {
            *a += phase * eig.eigenvectors[(r, k)];
        }
    }
    StateVector {
        n_qubits: params.n_qubits(),
        amps,
    }
}

#[test]
fn krylov_matches_dense_eigendecomposition() {
    for (l, u, mu, t) in [(2usize, 3.0, 0.4, 1.7), (3, -2.0, 0.0, 2.5), (3, 6.0, 1.0, 0.9)] {
        let params = HubbardParams::new(l, 1.0, u, mu).unwrap();
        let state = neel_state(l, Some(l / 2)).unwrap();
        let krylov = exact_evolve(&params, &state, t).unwrap();
        let dense = dense_evolve(&params, state.basis_index(), t);
        let fidelity = krylov.overlap(&dense).norm();
        assert!(
            fidelity > 1.0 - 1e-10,
            "L={l} U={u} t={t}: fidelity {fidelity}"
        );
    }
}

#[test]
fn krylov_handles_long_times_and_strong_coupling() {
    let params = HubbardParams::new(3, 1.0, 12.0, 0.0).unwrap();
    let state = neel_state(3, None).unwrap();
    let krylov = exact_evolve(&params, &state, 9.0).unwrap();
    let dense = dense_evolve(&params, state.basis_index(), 9.0);
    assert!(krylov.overlap(&dense).norm() > 1.0 - 1e-9);
    assert!((krylov.norm() - 1.0).abs() < 1e-9);
}

#[test]
fn scan_rows_match_direct_rmse() {
    // Cross-module consistency: the scan's numbers equal rmse() applied to
    // independently recomputed occupation vectors.
    let params = HubbardParams::new(4, 1.0, 2.0, 0.0).unwrap();
    let state = neel_state(4, Some(2)).unwrap();
    let dt = 0.2;
    let n = 5;
    let scan = trotter_error_scan(&params, &[dt], n, &state).unwrap();
    let trotter = trotter_occupation_series(&params, &state, dt, n).unwrap();
    for (k, &(t, value)) in scan[0].1.iter().enumerate() {
        let exact = exact_evolve(&params, &state, t).unwrap();
        let occ_exact: Vec<f64> = occupations_from_state(&exact, None)
            .iter()
            .map(|e| e.value)
            .collect();
        let direct = rmse(&trotter[k], &occ_exact).unwrap();
        assert!(
            (value - direct).abs() < 1e-9,
            "step {k}: scan {value} vs direct {direct}"
        );
    }
}

#[test]
fn scan_error_vanishes_with_dt() {
    let params = HubbardParams::new(4, 1.0, 2.0, 0.0).unwrap();
    let state = neel_state(4, None).unwrap();
    // Fixed total time 0.8 at shrinking dt.
    let mut final_errors = Vec::new();
    for (dt, n) in [(0.2, 4usize), (0.1, 8), (0.05, 16)] {
        let scan = trotter_error_scan(&params, &[dt], n, &state).unwrap();
        final_errors.push(scan[0].1.last().unwrap().1);
    }
    assert!(final_errors[0] > final_errors[1] && final_errors[1] > final_errors[2]);
}

#[test]
fn sector_evolver_matches_full_on_occupations() {
    let params = HubbardParams::new(5, 1.0, 5.0, 0.2).unwrap();
    let state = neel_state(5, Some(2)).unwrap();
    let mut full = ExactEvolver::new_full(&params, &state).unwrap();
    let mut sector = ExactEvolver::new_sector(&params, &state).unwrap();
    for _ in 0..4 {
        full.advance(0.35).unwrap();
        sector.advance(0.35).unwrap();
    }
    for (a, b) in full.occupations().iter().zip(sector.occupations()) {
        assert!((a - b).abs() < 1e-10);
    }
    // Joint occupations agree too (used by the spin tracer).
    for q in 0..10 {
        let a = full.joint_occupation(q, 4);
        let b = sector.joint_occupation(q, 4);
        assert!((a - b).abs() < 1e-10);
    }
}
