//! Single-qubit materialization into the native basis.
//!
//! Any U(2) collapses (up to global phase) into the ZXZXZ form
//! `RZ(phi+pi) SX RZ(theta+pi) SX RZ(lambda)`; diagonal and antidiagonal
//! matrices take the shorter `RZ` / `RZ X RZ` forms. The twirl pass and the
//! lowering pass both funnel their accumulated 1q matrices through here.

use crate::compiler::native::NativeGate;
use crate::mat::Mat2;

const TOL: f64 = 1e-12;

/// Wrap an angle into `(-pi, pi]`.
fn wrap(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut t = theta % two_pi;
    if t <= -std::f64::consts::PI {
        t += two_pi;
    } else if t > std::f64::consts::PI {
        t -= two_pi;
    }
    t
}

fn push_rz(out: &mut Vec<NativeGate>, q: usize, theta: f64) {
    let t = wrap(theta);
    if t.abs() > TOL {
        out.push(NativeGate::Rz { q, theta: t });
    }
}

/// Euler angles `(theta, phi, lambda)` of `u` in the U3 convention
/// `diag-phase * [[cos(t/2), -e^{i l} sin(t/2)], [e^{i p} sin(t/2), e^{i(p+l)} cos(t/2)]]`.
fn euler_angles(u: &Mat2) -> (f64, f64, f64) {
    let a = u.0[0][0];
    let c = u.0[1][0];
    let theta = 2.0 * c.norm().atan2(a.norm());
    if c.norm() < TOL {
        // Diagonal.
        let lam = (u.0[1][1] / a).arg();
        (0.0, 0.0, lam)
    } else if a.norm() < TOL {
        // Antidiagonal.
        let gamma = c.arg();
        let lam = (-u.0[0][1]).arg() - gamma;
        (std::f64::consts::PI, 0.0, lam)
    } else {
        let gamma = a.arg();
        let phi = c.arg() - gamma;
        let lam = (-u.0[0][1]).arg() - gamma;
        (theta, phi, lam)
    }
}

/// Native gate sequence (time order) realizing `u` up to global phase.
pub fn decompose_1q(u: &Mat2, q: usize) -> Vec<NativeGate> {
    let mut out = Vec::new();
    let (theta, phi, lam) = euler_angles(u);
    if theta.abs() < TOL {
        push_rz(&mut out, q, phi + lam);
    } else if (theta - std::f64::consts::PI).abs() < TOL {
        // RZ(phi+pi) X RZ(lambda) up to phase.
        push_rz(&mut out, q, lam);
        out.push(NativeGate::X { q });
        push_rz(&mut out, q, phi + std::f64::consts::PI);
    } else {
        push_rz(&mut out, q, lam);
        out.push(NativeGate::Sx { q });
        push_rz(&mut out, q, theta + std::f64::consts::PI);
        out.push(NativeGate::Sx { q });
        push_rz(&mut out, q, phi + std::f64::consts::PI);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::{self, Mat2, ONE, ZERO};
    use num_complex::Complex64;

    fn realize(gates: &[NativeGate]) -> Mat2 {
        let mut m = Mat2::identity();
        for g in gates {
            m = g.matrix_1q().unwrap().matmul(&m);
        }
        m
    }

    fn dist_up_to_phase(a: &Mat2, b: &Mat2) -> f64 {
        a.to_cmat().phase_aligned_distance(&b.to_cmat())
    }

    #[test]
    fn recovers_assorted_unitaries() {
        let cases: Vec<Mat2> = vec![
            Mat2::identity(),
            mat::pauli_x(),
            mat::pauli_y(),
            mat::pauli_z(),
            mat::hadamard(),
            mat::s_gate(),
            mat::s_dagger(),
            mat::sx(),
            mat::rz(0.37),
            mat::rx(-1.2),
            mat::rz(2.0).matmul(&mat::rx(0.4)).matmul(&mat::rz(-0.9)),
            mat::hadamard().matmul(&mat::s_dagger()),
        ];
        for u in cases {
            let gates = decompose_1q(&u, 0);
            assert!(gates.len() <= 5);
            let v = realize(&gates);
            assert!(
                dist_up_to_phase(&u, &v) < 1e-10,
                "bad decomposition for {u:?}: got {v:?}"
            );
        }
    }

    #[test]
    fn random_unitaries_round_trip() {
        // Haar-ish samples from random Euler angles including a phase.
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 * std::f64::consts::PI
                - std::f64::consts::PI
        };
        for _ in 0..200 {
            let u = mat::rz(next())
                .matmul(&mat::rx(next()))
                .matmul(&mat::rz(next()));
            let g = Complex64::from_polar(1.0, next());
            let u = Mat2([
                [u.0[0][0] * g, u.0[0][1] * g],
                [u.0[1][0] * g, u.0[1][1] * g],
            ]);
            let v = realize(&decompose_1q(&u, 0));
            assert!(dist_up_to_phase(&u, &v) < 1e-10);
        }
    }

    #[test]
    fn diagonal_inputs_stay_short() {
        let gates = decompose_1q(&mat::rz(0.8), 0);
        assert_eq!(gates.len(), 1);
        let gates = decompose_1q(&Mat2::identity(), 0);
        assert!(gates.is_empty());
        let anti = Mat2([[ZERO, ONE], [ONE, ZERO]]);
        let gates = decompose_1q(&anti, 0);
        assert!(gates.iter().any(|g| matches!(g, NativeGate::X { .. })));
        assert!(gates.len() <= 3);
    }
}
