//! Pauli and single-qubit Clifford twirling of generic channels.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dense::{self, CMatrix};
use crate::error::{Result, VcemError};
use crate::noise::{DepolarizingChannel, GenericChannel, PauliChannel};
use crate::pauli::{self, PauliString};

/// `R_ij = Tr(P_i E(P_j)) / 2^n` over the lexicographic Pauli basis.
pub fn pauli_transfer_matrix<F>(n: usize, map: F) -> Result<DMatrix<f64>>
where
    F: Fn(&CMatrix) -> Result<CMatrix>,
{
    let basis: Vec<CMatrix> = PauliString::all(n).iter().map(PauliString::to_dense).collect();
    let dim = (1 << n) as f64;
    let mut r = DMatrix::zeros(basis.len(), basis.len());
    for (j, pj) in basis.iter().enumerate() {
        let out = map(pj)?;
        for (i, pi) in basis.iter().enumerate() {
            r[(i, j)] = dense::trace(&(pi * &out)).re / dim;
        }
    }
    Ok(r)
}

/// Largest off-diagonal magnitude of a square matrix.
pub fn off_diagonal_residual(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                worst = worst.max(m[(i, j)].abs());
            }
        }
    }
    worst
}

/// The Pauli channel with `p_k = Σ_j |c_jk|²`, `c_jk = Tr(P_k E_j) / 2^n`.
pub fn pauli_twirl(g: &GenericChannel) -> Result<PauliChannel> {
    let n = g.num_qubits();
    let terms = PauliString::all(n)
        .into_iter()
        .map(|p| {
            let weight: f64 = g.kraus().iter().map(|e| pauli::pauli_coefficient(e, &p).norm_sqr()).sum();
            (weight, p)
        })
        .collect::<Vec<_>>();
    // Rounding can leave the sum a few ulps away from one.
    let total: f64 = terms.iter().map(|(p, _)| p).sum();
    let terms = terms.into_iter().map(|(p, s)| (p / total, s)).collect();
    PauliChannel::new(n, (0..n).collect(), terms)
}

/// Transfer matrix of `ρ ↦ 4^{-n} Σ_P P E(P ρ P) P`, evaluated densely.
pub fn pauli_group_average(g: &GenericChannel) -> Result<DMatrix<f64>> {
    let n = g.num_qubits();
    let paulis: Vec<CMatrix> = PauliString::all(n).iter().map(PauliString::to_dense).collect();
    let weight = Complex64::new(1.0 / paulis.len() as f64, 0.0);
    pauli_transfer_matrix(n, |rho| {
        let mut acc = CMatrix::zeros(rho.nrows(), rho.ncols());
        for p in &paulis {
            acc += p * g.apply_dense(&(p * rho * p))? * p;
        }
        Ok(acc * weight)
    })
}

/// The 24 single-qubit Cliffords modulo global phase.
pub fn single_qubit_cliffords() -> Vec<CMatrix> {
    let s = dense::from_rows(&[&[dense::ONE, dense::ZERO], &[dense::ZERO, dense::I]]);
    let generators = [dense::hadamard(), s];
    let mut group = vec![dense::identity(2)];
    let mut frontier = group.clone();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for u in &frontier {
            for g in &generators {
                let v = g * u;
                if !group.iter().any(|w| dense::phase_overlap(w, &v) > 1.0 - 1e-9) {
                    group.push(v.clone());
                    next.push(v);
                }
            }
        }
        frontier = next;
    }
    group
}

/// Depolarizing probability `p = (4^n - Σ_j |Tr E_j|²) / (4^n - 1)` of the
/// Clifford-twirled channel, for single-qubit inputs.
pub fn clifford_twirl(g: &GenericChannel) -> Result<DepolarizingChannel> {
    if g.num_qubits() != 1 {
        return Err(VcemError::ResourceLimit(format!(
            "Clifford twirling is implemented for one qubit, got {}",
            g.num_qubits()
        )));
    }
    let d2 = 4.0;
    let overlap: f64 = g.kraus().iter().map(|e| dense::trace(e).norm_sqr()).sum();
    let p = ((d2 - overlap) / (d2 - 1.0)).clamp(0.0, 1.0);
    DepolarizingChannel::new(1, p)
}

/// Transfer matrix of the average of `C† E(C ρ C†) C` over all 24 single-qubit
/// Cliffords.
pub fn clifford_group_average(g: &GenericChannel) -> Result<DMatrix<f64>> {
    if g.num_qubits() != 1 {
        return Err(VcemError::ResourceLimit("Clifford group average is implemented for one qubit".into()));
    }
    let group = single_qubit_cliffords();
    let weight = Complex64::new(1.0 / group.len() as f64, 0.0);
    pauli_transfer_matrix(1, |rho| {
        let mut acc = CMatrix::zeros(2, 2);
        for c in &group {
            acc += c.adjoint() * g.apply_dense(&(c * rho * c.adjoint()))? * c;
        }
        Ok(acc * weight)
    })
}

/// Reads `p` off a depolarizing transfer matrix `diag(1, 1-p, ..., 1-p)`.
pub fn depolarizing_probability_from_ptm(ptm: &DMatrix<f64>) -> f64 {
    let k = ptm.nrows() as f64;
    1.0 - (ptm.trace() - 1.0) / (k - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn group_has_24_elements() {
        let g = single_qubit_cliffords();
        assert_eq!(g.len(), 24);
        for u in &g {
            assert!(dense::is_unitary(u, 1e-12));
        }
    }

    #[test]
    fn pauli_channels_are_fixed_points() {
        let ch = PauliChannel::from_full_terms(
            2,
            vec![(0.7, ps("II")), (0.1, ps("XZ")), (0.15, ps("YI")), (0.05, ps("ZZ"))],
        )
        .unwrap();
        let twirled = pauli_twirl(&ch.to_generic().unwrap()).unwrap();
        for s in PauliString::all(2) {
            assert!((twirled.probability(&s) - ch.probability(&s)).abs() < 1e-14, "{s}");
        }
    }

    #[test]
    fn amplitude_damping_pauli_twirl() {
        let ad = GenericChannel::amplitude_damping(0.1).unwrap();
        let before = pauli_transfer_matrix(1, |r| ad.apply_dense(r)).unwrap();
        assert!(off_diagonal_residual(&before) > 0.05);
        let average = pauli_group_average(&ad).unwrap();
        assert!(off_diagonal_residual(&average) < 1e-12);
        let twirled = pauli_twirl(&ad).unwrap();
        let sum: f64 = twirled.terms().iter().map(|(p, _)| p).sum();
        assert!((sum - 1.0).abs() < 1e-15);
        for (i, s) in PauliString::all(1).iter().enumerate() {
            assert!((twirled.chi_factor(s).unwrap() - average[(i, i)]).abs() < 1e-12);
        }
    }

    #[test]
    fn small_z_rotation_twirls_to_z_flip() {
        let angle = 0.3;
        let g = GenericChannel::unitary(dense::involution_exp(&dense::pauli_z(), angle)).unwrap();
        let t = pauli_twirl(&g).unwrap();
        let (s, c) = (angle / 2.0).sin_cos();
        assert!((t.probability(&ps("I")) - c * c).abs() < 1e-15);
        assert!((t.probability(&ps("Z")) - s * s).abs() < 1e-15);
        assert_eq!(t.probability(&ps("X")), 0.0);
    }

    #[test]
    fn clifford_twirl_examples() {
        let id = GenericChannel::identity(1).unwrap();
        assert!(clifford_twirl(&id).unwrap().p().abs() < 1e-15);
        let half = Complex64::new(0.5, 0.0);
        let full = GenericChannel::new(PauliString::all(1).iter().map(|p| p.to_dense() * half).collect()).unwrap();
        assert!((clifford_twirl(&full).unwrap().p() - 1.0).abs() < 1e-15);
        let ad = GenericChannel::amplitude_damping(0.1).unwrap();
        let ptm = clifford_group_average(&ad).unwrap();
        assert!(off_diagonal_residual(&ptm) < 1e-12);
        let oracle = depolarizing_probability_from_ptm(&ptm);
        assert!((clifford_twirl(&ad).unwrap().p() - oracle).abs() < 1e-10);
        assert!(clifford_twirl(&GenericChannel::identity(2).unwrap()).is_err());
    }
}
