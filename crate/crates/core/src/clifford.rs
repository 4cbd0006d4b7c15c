//! Clifford maps stored as images of the single-qubit X and Z generators.

use crate::circuit::{Moment, ParamCircuit};
use crate::dense::CMatrix;
use crate::error::{Result, VcemError};
use crate::pauli::{self, Pauli, PauliString, Phase};

/// `R P R†` for `R = exp(-i (k π/2)/2 · G)`.
pub fn conjugate_by_rotation(p: &PauliString, generator: &PauliString, quarter_turns: i32) -> PauliString {
    if p.commutes_unchecked(generator) {
        return p.clone();
    }
    // For anticommuting P: R P R† = (cos φ - i sin φ G) P.
    match quarter_turns.rem_euclid(4) {
        0 => p.clone(),
        1 => generator.multiply_unchecked(p).with_phase_mul(Phase::MINUS_I),
        2 => p.negate(),
        _ => generator.multiply_unchecked(p).with_phase_mul(Phase::PLUS_I),
    }
}

impl PauliString {
    pub(crate) fn with_phase_mul(self, phase: Phase) -> PauliString {
        let p = self.phase() * phase;
        self.with_phase(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliffordTableau {
    n: usize,
    x_images: Vec<PauliString>,
    z_images: Vec<PauliString>,
}

impl CliffordTableau {
    pub fn identity(n: usize) -> Self {
        CliffordTableau {
            n,
            x_images: (0..n).map(|q| PauliString::single(n, q, Pauli::X)).collect(),
            z_images: (0..n).map(|q| PauliString::single(n, q, Pauli::Z)).collect(),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    /// Appends a π/2-multiple Pauli rotation: the map becomes `R ∘ self`.
    pub fn then_rotation(&mut self, generator: &PauliString, quarter_turns: i32) {
        for img in self.x_images.iter_mut().chain(self.z_images.iter_mut()) {
            *img = conjugate_by_rotation(img, generator, quarter_turns);
        }
    }

    /// Clifford part (θ + ε = 0) of one moment.
    pub fn for_moment(moment: &Moment, n: usize) -> Self {
        let mut t = Self::identity(n);
        for g in &moment.gates {
            t.then_rotation(&g.generator(n), g.quarter_turns as i32);
        }
        t
    }

    /// Clifford parts of every moment of `circuit`.
    pub fn moments_of(circuit: &ParamCircuit) -> Vec<Self> {
        circuit
            .moments()
            .iter()
            .map(|m| Self::for_moment(m, circuit.num_qubits()))
            .collect()
    }

    /// Reads off the tableau of a dense unitary, rejecting non-Clifford input.
    pub fn from_dense(u: &CMatrix) -> Result<Self> {
        let dim = u.nrows();
        if u.ncols() != dim || !dim.is_power_of_two() {
            return Err(VcemError::invalid("conjugator must be a square 2^n matrix"));
        }
        let n = dim.trailing_zeros() as usize;
        let image = |g: PauliString| -> Result<PauliString> {
            let m = u * g.to_dense() * u.adjoint();
            let terms = pauli::decompose(&m)?;
            match terms.as_slice() {
                [(c, p)] if (c.re.abs() - 1.0).abs() < 1e-10 && c.im.abs() < 1e-10 => {
                    Ok(if c.re > 0.0 { p.clone() } else { p.negate() })
                }
                _ => Err(VcemError::NonClifford(format!("image of {g} is not a single Pauli string"))),
            }
        };
        let mut t = Self::identity(n);
        for q in 0..n {
            t.x_images[q] = image(PauliString::single(n, q, Pauli::X))?;
            t.z_images[q] = image(PauliString::single(n, q, Pauli::Z))?;
        }
        Ok(t)
    }

    /// `U P U†`.
    pub fn apply(&self, p: &PauliString) -> Result<PauliString> {
        VcemError::check_size(self.n, p.num_qubits())?;
        let mut out = PauliString::identity(self.n).with_phase(p.phase());
        for q in 0..self.n {
            out = match p.get(q) {
                Pauli::I => out,
                Pauli::X => out.multiply_unchecked(&self.x_images[q]),
                Pauli::Z => out.multiply_unchecked(&self.z_images[q]),
                // Y = i X Z
                Pauli::Y => out
                    .multiply_unchecked(&self.x_images[q])
                    .multiply_unchecked(&self.z_images[q])
                    .with_phase_mul(Phase::PLUS_I),
            };
        }
        Ok(out)
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &CliffordTableau) -> Result<CliffordTableau> {
        VcemError::check_size(self.n, next.n)?;
        let map = |imgs: &[PauliString]| imgs.iter().map(|p| next.apply(p)).collect::<Result<Vec<_>>>();
        Ok(CliffordTableau {
            n: self.n,
            x_images: map(&self.x_images)?,
            z_images: map(&self.z_images)?,
        })
    }
}

/// `C† P C` for the Clifford part `C` of `moment`.
pub fn conjugate_moment_adjoint(moment: &Moment, p: &PauliString) -> PauliString {
    let n = p.num_qubits();
    moment.gates.iter().rev().fold(p.clone(), |acc, g| {
        conjugate_by_rotation(&acc, &g.generator(n), -(g.quarter_turns as i32))
    })
}
