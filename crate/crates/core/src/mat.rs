//! Small dense complex-matrix helpers.
//!
//! These back the gate-template verification in the compiler and the dense
//! oracles in tests. Matrices are row-major `Vec<Complex64>`; nothing here is
//! meant for large dimensions.
//!
//! Convention used across the crate: qubit `q` is bit `q` of a basis-state
//! index, least significant first. A two-qubit operator on qubits `(a, b)`
//! is written in the basis indexed by `bit_a + 2 * bit_b`.

use num_complex::Complex64;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    pub dim: usize,
    pub data: Vec<C64>,
}

impl CMat {
    pub fn zeros(dim: usize) -> Self {
        CMat {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = CMat::zeros(dim);
        for k in 0..dim {
            m.data[k * dim + k] = ONE;
        }
        m
    }

    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            assert_eq!(r.len(), dim);
            data.extend_from_slice(r);
        }
        CMat { dim, data }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.dim + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.data[r * self.dim + c] = v;
    }

    pub fn matmul(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut out = CMat::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self.at(r, k);
                if a == ZERO {
                    continue;
                }
                for c in 0..n {
                    out.data[r * n + c] += a * rhs.at(k, c);
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> CMat {
        let n = self.dim;
        let mut out = CMat::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out.set(r, c, self.at(c, r).conj());
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> CMat {
        CMat {
            dim: self.dim,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.dim, rhs.dim);
        CMat {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.dim, rhs.dim);
        CMat {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Kronecker product with `self` on the high bits: `(self ⊗ low)`.
    pub fn kron(&self, low: &CMat) -> CMat {
        let n = self.dim * low.dim;
        let mut out = CMat::zeros(n);
        for rh in 0..self.dim {
            for ch in 0..self.dim {
                let a = self.at(rh, ch);
                if a == ZERO {
                    continue;
                }
                for rl in 0..low.dim {
                    for cl in 0..low.dim {
                        out.set(
                            rh * low.dim + rl,
                            ch * low.dim + cl,
                            a * low.at(rl, cl),
                        );
                    }
                }
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Frobenius distance after aligning global phase on the
    /// largest-magnitude entry of `self`.
    pub fn phase_aligned_distance(&self, rhs: &CMat) -> f64 {
        assert_eq!(self.dim, rhs.dim);
        let mut best = 0usize;
        let mut mag = -1.0;
        for (k, v) in self.data.iter().enumerate() {
            if v.norm() > mag {
                mag = v.norm();
                best = k;
            }
        }
        let a = self.data[best];
        let b = rhs.data[best];
        if b.norm() < 1e-300 {
            // No common phase reference; fall back to raw distance.
            return self.sub(rhs).frobenius_norm();
        }
        let phase = (a / b) / (a / b).norm();
        self.sub(&rhs.scale(phase)).frobenius_norm()
    }
}

/// 2x2 complex matrix, used for single-qubit gates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const fn identity() -> Self {
        Mat2([[ONE, ZERO], [ZERO, ONE]])
    }

    pub fn matmul(&self, rhs: &Mat2) -> Mat2 {
        let mut out = [[ZERO; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                out[r][c] = self.0[r][0] * rhs.0[0][c] + self.0[r][1] * rhs.0[1][c];
            }
        }
        Mat2(out)
    }

    pub fn adjoint(&self) -> Mat2 {
        Mat2([
            [self.0[0][0].conj(), self.0[1][0].conj()],
            [self.0[0][1].conj(), self.0[1][1].conj()],
        ])
    }

    pub fn to_cmat(&self) -> CMat {
        CMat::from_rows(&[&self.0[0], &self.0[1]])
    }

    /// True if both off-diagonal entries vanish: maps basis states to basis
    /// states without flipping.
    pub fn is_diagonal(&self, tol: f64) -> bool {
        self.0[0][1].norm() < tol && self.0[1][0].norm() < tol
    }

    /// True if both diagonal entries vanish: maps basis states to flipped
    /// basis states.
    pub fn is_antidiagonal(&self, tol: f64) -> bool {
        self.0[0][0].norm() < tol && self.0[1][1].norm() < tol
    }
}

pub fn pauli_x() -> Mat2 {
    Mat2([[ZERO, ONE], [ONE, ZERO]])
}

pub fn pauli_y() -> Mat2 {
    Mat2([[ZERO, -I], [I, ZERO]])
}

pub fn pauli_z() -> Mat2 {
    Mat2([[ONE, ZERO], [ZERO, -ONE]])
}

pub fn hadamard() -> Mat2 {
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    Mat2([[s, s], [s, -s]])
}

/// S = diag(1, i).
pub fn s_gate() -> Mat2 {
    Mat2([[ONE, ZERO], [ZERO, I]])
}

pub fn s_dagger() -> Mat2 {
    Mat2([[ONE, ZERO], [ZERO, -I]])
}

/// RZ(theta) = exp(-i theta Z / 2).
pub fn rz(theta: f64) -> Mat2 {
    let e = C64::from_polar(1.0, -theta / 2.0);
    Mat2([[e, ZERO], [ZERO, e.conj()]])
}

/// RX(theta) = exp(-i theta X / 2).
pub fn rx(theta: f64) -> Mat2 {
    let c = C64::new((theta / 2.0).cos(), 0.0);
    let s = C64::new(0.0, -(theta / 2.0).sin());
    Mat2([[c, s], [s, c]])
}

/// Sqrt-X with the usual global phase: SX = e^{i pi/4} RX(pi/2).
pub fn sx() -> Mat2 {
    let a = C64::new(0.5, 0.5);
    let b = C64::new(0.5, -0.5);
    Mat2([[a, b], [b, a]])
}

/// Embed a single-qubit matrix on qubit `q` of an `n`-qubit operator.
pub fn embed_1q(m: &Mat2, q: usize, n: usize) -> CMat {
    let mut out = CMat::identity(1);
    for k in (0..n).rev() {
        let factor = if k == q {
            m.to_cmat()
        } else {
            CMat::identity(2)
        };
        out = out.kron(&factor);
    }
    out
}

/// Embed a two-qubit matrix (basis `bit_a + 2*bit_b`) on qubits `(a, b)`.
pub fn embed_2q(m: &CMat, a: usize, b: usize, n: usize) -> CMat {
    assert_eq!(m.dim, 4);
    let dim = 1usize << n;
    let mut out = CMat::zeros(dim);
    for col in 0..dim {
        let ca = (col >> a) & 1;
        let cb = (col >> b) & 1;
        let mcol = ca | (cb << 1);
        for mrow in 0..4 {
            let v = m.at(mrow, mcol);
            if v == ZERO {
                continue;
            }
            let row = (col & !((1 << a) | (1 << b)))
                | ((mrow & 1) << a)
                | (((mrow >> 1) & 1) << b);
            out.data[row * dim + col] += v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_algebra() {
        let x = pauli_x();
        let y = pauli_y();
        let z = pauli_z();
        // XY = iZ
        let xy = x.matmul(&y);
        let iz = Mat2([[I, ZERO], [ZERO, -I]]);
        for r in 0..2 {
            for c in 0..2 {
                assert!((xy.0[r][c] - iz.0[r][c]).norm() < 1e-15);
            }
        }
        let zz = z.matmul(&z);
        assert!(zz.to_cmat().sub(&CMat::identity(2)).frobenius_norm() < 1e-15);
    }

    #[test]
    fn embed_matches_kron() {
        // X on qubit 0 of 2 == I (x) X with high-bit-first kron.
        let direct = embed_1q(&pauli_x(), 0, 2);
        let kron = CMat::identity(2).kron(&pauli_x().to_cmat());
        assert!(direct.sub(&kron).frobenius_norm() < 1e-15);
    }

    #[test]
    fn phase_alignment() {
        let a = CMat::identity(4);
        let b = a.scale(C64::from_polar(1.0, 0.7));
        assert!(a.phase_aligned_distance(&b) < 1e-12);
    }
}
