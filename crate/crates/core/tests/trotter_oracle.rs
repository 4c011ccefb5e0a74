//! Dense-matrix oracles for the model and circuit layers: the qubitized
//! Hamiltonian against a raw fermionic ladder-operator construction, and
//! the Trotter circuit unitary against the exact matrix exponential.

use num_complex::Complex64;

use fhsim_core::circuit::{build_trotter_circuit, Gate};
use fhsim_core::mat::{CMat, Mat2, ONE, ZERO};
use fhsim_core::model::{build_hamiltonian, mode_index, HubbardParams, Spin};
use fhsim_core::statevector::circuit_unitary;

/// Dense annihilation operator c_J on n modes, built from the occupation
/// rule `c_J |b> = (-1)^{sum_{k<J} b_k} b_J |b without J>` (ladder-operator
/// oracle, independent of the Pauli-string path).
fn annihilation_dense(j: usize, n: usize) -> CMat {
    let dim = 1usize << n;
    let mut m = CMat::zeros(dim);
    for col in 0..dim {
        if col >> j & 1 == 1 {
            let row = col & !(1usize << j);
            let parity = (col & ((1 << j) - 1)).count_ones();
            let sign = if parity % 2 == 0 { 1.0 } else { -1.0 };
            m.set(row, col, Complex64::new(sign, 0.0));
        }
    }
    m
}

/// Dense Fermi-Hubbard Hamiltonian from ladder operators.
fn fermionic_hamiltonian_dense(params: &HubbardParams) -> CMat {
    let l = params.l;
    let n = 2 * l;
    let dim = 1usize << n;
    let mut h = CMat::zeros(dim);
    for bond in 0..l - 1 {
        for spin in [Spin::Up, Spin::Down] {
            let a = mode_index(bond, spin, l).unwrap();
            let b = mode_index(bond + 1, spin, l).unwrap();
            let ca = annihilation_dense(a, n);
            let cb = annihilation_dense(b, n);
            let hop = ca.adjoint().matmul(&cb).add(&cb.adjoint().matmul(&ca));
            h = h.add(&hop.scale(Complex64::new(-params.t_bond(bond), 0.0)));
        }
    }
    for site in 0..l {
        let up = mode_index(site, Spin::Up, l).unwrap();
        let dn = mode_index(site, Spin::Down, l).unwrap();
        let cu = annihilation_dense(up, n);
        let cd = annihilation_dense(dn, n);
        let nu = cu.adjoint().matmul(&cu);
        let nd = cd.adjoint().matmul(&cd);
        h = h.add(&nu.matmul(&nd).scale(Complex64::new(params.u_site(site), 0.0)));
        h = h.add(&nu.scale(Complex64::new(-params.mu_mode(site, Spin::Up), 0.0)));
        h = h.add(&nd.scale(Complex64::new(-params.mu_mode(site, Spin::Down), 0.0)));
    }
    h
}

/// exp(-i H t) via a dense symmetric eigendecomposition (H is real
/// symmetric in the Fock basis).
fn expm_minus_iht(h: &CMat, t: f64) -> CMat {
    let dim = h.dim;
    let mut hr = nalgebra::DMatrix::<f64>::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            let v = h.at(r, c);
            assert!(v.im.abs() < 1e-12, "Hamiltonian must be real");
            hr[(r, c)] = v.re;
        }
    }
    let eig = nalgebra::SymmetricEigen::new(hr);
    let mut out = CMat::zeros(dim);
    for k in 0..dim {
        let phase = Complex64::from_polar(1.0, -eig.eigenvalues[k] * t);
        for r in 0..dim {
            let vr = eig.eigenvectors[(r, k)];
            if vr == 0.0 {
                continue;
            }
            for c in 0..dim {
                out.data[r * dim + c] += phase * vr * eig.eigenvectors[(c, k)];
            }
        }
    }
    out
}

#[test]
fn qubitized_hamiltonian_matches_fermionic_construction() {
    for l in 2..=4 {
        let params = HubbardParams::new(l, 1.0, 3.2, 0.45).unwrap();
        let qubitized = build_hamiltonian(&params).unwrap().to_dense(true).unwrap();
        let fermionic = fermionic_hamiltonian_dense(&params);
        let dist = qubitized.sub(&fermionic).frobenius_norm();
        assert!(dist < 1e-12, "L={l}: distance {dist}");
    }
}

#[test]
fn qubitized_hamiltonian_matches_fermionic_with_overrides() {
    let mut params = HubbardParams::new(3, 1.0, 2.0, 0.1).unwrap();
    params.t_bonds = Some(vec![0.7, 1.3]);
    params.u_sites = Some(vec![1.0, 4.0, 2.5]);
    params.mu_modes = Some(vec![[0.2, -0.1], [0.0, 0.3], [-0.4, 0.1]]);
    let qubitized = build_hamiltonian(&params).unwrap().to_dense(true).unwrap();
    let fermionic = fermionic_hamiltonian_dense(&params);
    assert!(qubitized.sub(&fermionic).frobenius_norm() < 1e-12);
}

/// Unitary of the mode permutation left by an odd number of steps: the
/// fSWAP layer itself.
fn fswap_layer_unitary(l: usize) -> CMat {
    let fswap = Gate::Fswap { q1: 0, q2: 1 }.matrix_2q().unwrap();
    let mut u = CMat::identity(1);
    for _ in 0..l {
        u = fswap.kron(&u);
    }
    u
}

#[test]
fn single_step_circuit_equals_u_step_with_permutation() {
    // For one step the circuit implements P * exp(-i H dt) + O(dt^2), where
    // P is the virtual relabeling. Check the dt^2 scaling of the residual.
    let params = HubbardParams::new(2, 1.0, 3.0, 0.5).unwrap();
    let h = build_hamiltonian(&params).unwrap().to_dense(false).unwrap();
    let perm_u = fswap_layer_unitary(2);
    let mut prev_err = f64::INFINITY;
    for dt in [0.2, 0.1, 0.05] {
        let circ = build_trotter_circuit(&params, dt, 1).unwrap();
        let u_circ = circuit_unitary(&circ).unwrap();
        let exact = expm_minus_iht(&h, dt);
        // Undo the relabeling before comparing.
        let undone = perm_u.matmul(&u_circ);
        let err = undone.phase_aligned_distance(&exact);
        assert!(err < prev_err);
        // O(dt^2): quartering when dt halves, up to ~35% slack.
        if prev_err.is_finite() {
            assert!(err > prev_err / 6.0 && err < prev_err / 2.6, "err {err}, prev {prev_err}");
        }
        prev_err = err;
    }
}

#[test]
fn mirrored_pair_error_scales_as_dt_cubed() {
    // Even step counts: || U_circ - exp(-2 i H dt) || = O(dt^3) per pair;
    // halving dt shrinks the two-step error ~8x.
    let params = HubbardParams::new(2, 1.0, 4.0, 0.3).unwrap();
    let h = build_hamiltonian(&params).unwrap().to_dense(false).unwrap();
    let mut errs = Vec::new();
    for dt in [0.2, 0.1] {
        let circ = build_trotter_circuit(&params, dt, 2).unwrap();
        let u_circ = circuit_unitary(&circ).unwrap();
        let exact = expm_minus_iht(&h, 2.0 * dt);
        errs.push(u_circ.phase_aligned_distance(&exact));
    }
    let ratio = errs[0] / errs[1];
    assert!(
        (5.5..11.0).contains(&ratio),
        "expected ~8x per halving, got {ratio} ({errs:?})"
    );
}

#[test]
fn fixed_time_global_error_slope_is_second_order() {
    // log-log slope of operator-norm error vs dt at fixed total time, L=2.
    let params = HubbardParams::new(2, 1.0, 3.0, 0.0).unwrap();
    let h = build_hamiltonian(&params).unwrap().to_dense(false).unwrap();
    let total_t = 1.2;
    let mut points = Vec::new();
    for n in [6usize, 12, 24] {
        let dt = total_t / n as f64;
        let circ = build_trotter_circuit(&params, dt, n).unwrap();
        let u_circ = circuit_unitary(&circ).unwrap();
        let exact = expm_minus_iht(&h, total_t);
        let err = u_circ.phase_aligned_distance(&exact);
        points.push((dt.ln(), err.ln()));
    }
    let slope = (points[2].1 - points[0].1) / (points[2].0 - points[0].0);
    assert!(
        (1.8..=2.2).contains(&slope),
        "global Trotter slope {slope} outside [1.8, 2.2]"
    );
}

#[test]
fn hopping_gate_matches_generator_exponential() {
    // Random-angle RXXplusYY against the dense exponential of the
    // generator (XX + YY)/2.
    let xs = |q: usize| -> CMat {
        let x = Mat2([[ZERO, ONE], [ONE, ZERO]]);
        if q == 0 {
            CMat::identity(2).kron(&x.to_cmat())
        } else {
            x.to_cmat().kron(&CMat::identity(2))
        }
    };
    let ys = |q: usize| -> CMat {
        let y = Mat2([
            [ZERO, Complex64::new(0.0, -1.0)],
            [Complex64::new(0.0, 1.0), ZERO],
        ]);
        if q == 0 {
            CMat::identity(2).kron(&y.to_cmat())
        } else {
            y.to_cmat().kron(&CMat::identity(2))
        }
    };
    let gen = xs(0).matmul(&xs(1)).add(&ys(0).matmul(&ys(1)));
    for theta in [0.17f64, -0.9, 2.3] {
        let gate = Gate::XxPlusYy {
            q1: 0,
            q2: 1,
            theta,
        }
        .matrix_2q()
        .unwrap();
        let exact = expm_minus_iht(&gen.scale(Complex64::new(0.5, 0.0)), theta);
        assert!(gate.sub(&exact).frobenius_norm() < 1e-12, "theta {theta}");
    }
}
