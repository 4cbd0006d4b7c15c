//! Small dense complex matrices used for gate definitions, channel
//! construction and cross-checks. Matrices on several qubits use the
//! `kron(first, second, ...)` ordering: qubit 0 is the most significant
//! index bit.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn from_rows(rows: &[&[Complex64]]) -> CMatrix {
    let n = rows.len();
    CMatrix::from_fn(n, rows[0].len(), |r, c| rows[r][c])
}

pub fn pauli_x() -> CMatrix {
    from_rows(&[&[ZERO, ONE], &[ONE, ZERO]])
}

pub fn pauli_y() -> CMatrix {
    from_rows(&[&[ZERO, -I], &[I, ZERO]])
}

pub fn pauli_z() -> CMatrix {
    from_rows(&[&[ONE, ZERO], &[ZERO, -ONE]])
}

pub fn hadamard() -> CMatrix {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    from_rows(&[&[h, h], &[h, -h]])
}

pub fn cz() -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![ONE, ONE, ONE, -ONE]))
}

/// Controlled-X with the first qubit as control.
pub fn cnot() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = ONE;
    m[(1, 1)] = ONE;
    m[(2, 3)] = ONE;
    m[(3, 2)] = ONE;
    m
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `exp(-i angle/2 * generator)` for an involutory generator (`G^2 = 1`).
pub fn involution_exp(generator: &CMatrix, angle: f64) -> CMatrix {
    let dim = generator.nrows();
    let (s, c) = (angle / 2.0).sin_cos();
    identity(dim) * Complex64::new(c, 0.0) - generator * Complex64::new(0.0, s)
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `|Tr(U^dagger V)| / dim`, equal to one iff the unitaries agree up to a global phase.
pub fn phase_overlap(u: &CMatrix, v: &CMatrix) -> f64 {
    trace(&(u.adjoint() * v)).norm() / u.nrows() as f64
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn is_unitary(u: &CMatrix, tol: f64) -> bool {
    max_abs_diff(&(u.adjoint() * u), &identity(u.nrows())) < tol
}

/// Embeds a gate given in `kron(qubits[0], qubits[1], ...)` order into an
/// `n`-qubit operator. Intended for small registers and cross-checks.
pub fn embed(gate: &CMatrix, qubits: &[usize], n: usize) -> CMatrix {
    let dim = 1usize << n;
    let k = qubits.len();
    assert_eq!(gate.nrows(), 1 << k, "gate size does not match qubit count");
    let bit = |q: usize| n - 1 - q;
    let local = |idx: usize| -> usize {
        qubits
            .iter()
            .fold(0, |acc, &q| (acc << 1) | ((idx >> bit(q)) & 1))
    };
    let mask: usize = qubits.iter().map(|&q| 1 << bit(q)).sum();
    CMatrix::from_fn(dim, dim, |r, c| {
        if r & !mask != c & !mask {
            ZERO
        } else {
            gate[(local(r), local(c))]
        }
    })
}
