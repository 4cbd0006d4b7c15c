//! Dense statevector and density-matrix simulation.
//!
//! Basis index bit `n - 1 - q` holds qubit `q`, matching the kron ordering of
//! [`crate::dense`]. Pauli rotations and Pauli channels act through bit masks
//! on indices; no full-register operator is ever materialized.

use num_complex::Complex64;

use crate::circuit::ParamCircuit;
use crate::dense::CMatrix;
use crate::error::{Result, VcemError};
use crate::noise::{Channel, DepolarizingChannel, GenericChannel, NoiseLayout, PauliChannel};
use crate::pauli::PauliString;

/// Largest register accepted by [`StateVector`].
pub const MAX_PURE_QUBITS: usize = 14;
/// Largest register accepted by [`DensityMatrix`].
pub const MAX_NOISY_QUBITS: usize = 12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[inline]
fn parity(v: usize) -> bool {
    v.count_ones() & 1 == 1
}

#[inline]
fn signed(v: Complex64, negative: bool) -> Complex64 {
    if negative {
        -v
    } else {
        v
    }
}

/// Precomputed bit-mask form of a Pauli rotation `exp(-i angle/2 P)`.
#[derive(Debug, Clone, Copy)]
struct MaskedRotation {
    x: usize,
    z: usize,
    cos: f64,
    /// `-i sin(angle/2) ω` where `P = ω X^x Z^z`.
    coupling: Complex64,
}

impl MaskedRotation {
    fn new(generator: &PauliString, angle: f64) -> Self {
        let (x, z) = generator.index_masks();
        let (s, c) = (angle / 2.0).sin_cos();
        MaskedRotation {
            x: x as usize,
            z: z as usize,
            cos: c,
            coupling: Complex64::new(0.0, -s) * generator.xz_scalar(),
        }
    }

    /// The same rotation acting on complex-conjugated vectors.
    fn conjugated(self) -> Self {
        MaskedRotation {
            coupling: self.coupling.conj(),
            ..self
        }
    }

    /// Diagonal factor at index `k` when `x == 0`.
    #[inline]
    fn diagonal(&self, k: usize) -> Complex64 {
        signed(self.coupling, parity(self.z & k)) + self.cos
    }
}

/// Applies `cos + coupling·X^x Z^z` to the first `dim` entries of `data`.
fn rotate_vector(data: &mut [Complex64], rot: &MaskedRotation, dim: usize) {
    if rot.x == 0 {
        for (k, v) in data.iter_mut().enumerate().take(dim) {
            *v *= rot.diagonal(k);
        }
        return;
    }
    let high = 1usize << (usize::BITS - 1 - rot.x.leading_zeros());
    for k in 0..dim {
        if k & high != 0 {
            continue;
        }
        let j = k ^ rot.x;
        let (a, b) = (data[k], data[j]);
        data[k] = a * rot.cos + signed(rot.coupling, parity(rot.z & j)) * b;
        data[j] = b * rot.cos + signed(rot.coupling, parity(rot.z & k)) * a;
    }
}

/// Calls `f(c0, c0 | b)` for every index `c0 < dim` with bit `b` clear.
#[inline]
fn for_each_pair(dim: usize, b: usize, mut f: impl FnMut(usize, usize)) {
    let mut hi = 0;
    while hi < dim {
        for c0 in hi..hi + b {
            f(c0, c0 | b);
        }
        hi += 2 * b;
    }
}

/// Calls `f(r0, row r0, row r0|b)` for every row `r0` with bit `b` clear.
#[inline]
fn for_each_row_pair_indexed(
    data: &mut [Complex64],
    dim: usize,
    b: usize,
    mut f: impl FnMut(usize, &mut [Complex64], &mut [Complex64]),
) {
    for_each_pair(dim, b, |r0, r1| {
        let (lo, hi) = data.split_at_mut(r1 * dim);
        f(r0, &mut lo[r0 * dim..(r0 + 1) * dim], &mut hi[..dim]);
    });
}

#[inline]
fn for_each_row_pair(data: &mut [Complex64], dim: usize, b: usize, mut f: impl FnMut(&mut [Complex64], &mut [Complex64])) {
    for_each_row_pair_indexed(data, dim, b, |_, r0, r1| f(r0, r1));
}

/// Row ranges of the four rows `base | offsets[l]`.
fn quad_rows(offsets: &[usize], base: usize, dim: usize) -> [std::ops::Range<usize>; 4] {
    std::array::from_fn(|l| {
        let r = base | offsets[l];
        r * dim..(r + 1) * dim
    })
}

fn bit_of(n: usize, q: usize) -> usize {
    n - 1 - q
}

/// Offsets of the `2^k` local basis states of `qubits` (kron order).
fn local_offsets(n: usize, qubits: &[usize]) -> (Vec<usize>, usize) {
    let k = qubits.len();
    let mut offsets = vec![0usize; 1 << k];
    for (l, off) in offsets.iter_mut().enumerate() {
        for (i, &q) in qubits.iter().enumerate() {
            if (l >> (k - 1 - i)) & 1 == 1 {
                *off |= 1 << bit_of(n, q);
            }
        }
    }
    let mask = qubits.iter().map(|&q| 1usize << bit_of(n, q)).sum();
    (offsets, mask)
}

fn check_qubits(n: usize, qubits: &[usize], matrix: &CMatrix) -> Result<()> {
    for (i, &q) in qubits.iter().enumerate() {
        if q >= n || qubits[..i].contains(&q) {
            return Err(VcemError::invalid(format!("bad target qubits {qubits:?} for {n} qubits")));
        }
    }
    let d = 1usize << qubits.len();
    if matrix.nrows() != d || matrix.ncols() != d {
        return Err(VcemError::SizeMismatch {
            expected: d,
            actual: matrix.nrows(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0⟩`.
    pub fn zero_state(n: usize) -> Result<Self> {
        if n > MAX_PURE_QUBITS {
            return Err(VcemError::ResourceLimit(format!(
                "statevector simulation supports at most {MAX_PURE_QUBITS} qubits, got {n}"
            )));
        }
        let mut amps = vec![ZERO; 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n, amps })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let dim = amps.len();
        if !dim.is_power_of_two() {
            return Err(VcemError::invalid(format!("{dim} amplitudes is not a power of two")));
        }
        let n = dim.trailing_zeros() as usize;
        if n > MAX_PURE_QUBITS {
            return Err(VcemError::ResourceLimit(format!("{n} qubits exceeds the statevector ceiling")));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(VcemError::invalid(format!("state has squared norm {norm}")));
        }
        Ok(StateVector { n, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `exp(-i angle/2 P)`.
    pub fn apply_rotation(&mut self, generator: &PauliString, angle: f64) -> Result<()> {
        VcemError::check_size(self.n, generator.num_qubits())?;
        let dim = self.amps.len();
        rotate_vector(&mut self.amps, &MaskedRotation::new(generator, angle), dim);
        Ok(())
    }

    /// Applies a dense gate given in kron order of `qubits`.
    pub fn apply_unitary(&mut self, matrix: &CMatrix, qubits: &[usize]) -> Result<()> {
        check_qubits(self.n, qubits, matrix)?;
        let (offsets, mask) = local_offsets(self.n, qubits);
        let d = offsets.len();
        let mut buf = vec![ZERO; d];
        for base in 0..self.amps.len() {
            if base & mask != 0 {
                continue;
            }
            for (l, &o) in offsets.iter().enumerate() {
                buf[l] = self.amps[base | o];
            }
            for (l, &o) in offsets.iter().enumerate() {
                self.amps[base | o] = (0..d).map(|m| matrix[(l, m)] * buf[m]).sum();
            }
        }
        Ok(())
    }

    /// `⟨ψ|P|ψ⟩`, real for Hermitian `P`.
    pub fn expectation(&self, p: &PauliString) -> Result<f64> {
        VcemError::check_size(self.n, p.num_qubits())?;
        let (x, z) = p.index_masks();
        let (x, z) = (x as usize, z as usize);
        let mut acc = ZERO;
        for (k, a) in self.amps.iter().enumerate() {
            let j = k ^ x;
            acc += a.conj() * signed(self.amps[j], parity(z & j));
        }
        Ok((acc * p.xz_scalar()).re)
    }

    pub fn to_density(&self) -> Result<DensityMatrix> {
        let mut rho = DensityMatrix::zero_state(self.n)?;
        let dim = self.amps.len();
        for r in 0..dim {
            for c in 0..dim {
                rho.data[r * dim + c] = self.amps[r] * self.amps[c].conj();
            }
        }
        Ok(rho)
    }
}

/// Row-major `2^n × 2^n` complex matrix.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl PartialEq for DensityMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.data == other.data
    }
}

impl DensityMatrix {
    /// `|0...0⟩⟨0...0|`.
    pub fn zero_state(n: usize) -> Result<Self> {
        let mut rho = Self::zeros(n)?;
        rho.data[0] = Complex64::new(1.0, 0.0);
        Ok(rho)
    }

    fn zeros(n: usize) -> Result<Self> {
        if n > MAX_NOISY_QUBITS {
            return Err(VcemError::ResourceLimit(format!(
                "density-matrix simulation supports at most {MAX_NOISY_QUBITS} qubits, got {n}"
            )));
        }
        Ok(DensityMatrix {
            n,
            data: vec![ZERO; 1 << (2 * n)],
        })
    }

    /// Wraps an arbitrary square operator (Hermitian observables included).
    pub fn from_dense(m: &CMatrix) -> Result<Self> {
        let dim = m.nrows();
        if m.ncols() != dim || !dim.is_power_of_two() {
            return Err(VcemError::invalid("operator must be square with power-of-two size"));
        }
        let mut rho = Self::zeros(dim.trailing_zeros() as usize)?;
        for r in 0..dim {
            for c in 0..dim {
                rho.data[r * dim + c] = m[(r, c)];
            }
        }
        Ok(rho)
    }

    /// `Σ_i w_i P_i` as an operator.
    pub fn from_pauli_sum(n: usize, terms: &[(f64, PauliString)]) -> Result<Self> {
        let mut m = Self::zeros(n)?;
        let dim = m.dim();
        for (w, p) in terms {
            VcemError::check_size(n, p.num_qubits())?;
            let (x, z) = p.index_masks();
            let (x, z) = (x as usize, z as usize);
            let scale = p.xz_scalar() * *w;
            for r in 0..dim {
                let c = r ^ x;
                m.data[r * dim + c] += signed(scale, parity(z & c));
            }
        }
        Ok(m)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn entry(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.dim() + c]
    }

    pub fn to_dense(&self) -> CMatrix {
        let dim = self.dim();
        CMatrix::from_fn(dim, dim, |r, c| self.data[r * dim + c])
    }

    pub fn trace(&self) -> Complex64 {
        let dim = self.dim();
        (0..dim).map(|r| self.data[r * dim + r]).sum()
    }

    /// Largest entry of `ρ - ρ†`.
    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.dim();
        let mut worst = 0.0f64;
        for r in 0..dim {
            for c in r..dim {
                worst = worst.max((self.data[r * dim + c] - self.data[c * dim + r].conj()).norm());
            }
        }
        worst
    }

    /// Frobenius distance.
    pub fn distance(&self, other: &DensityMatrix) -> Result<f64> {
        VcemError::check_size(self.n, other.n)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// `R ρ R†` with `R = exp(-i angle/2 P)`.
    pub fn apply_rotation(&mut self, generator: &PauliString, angle: f64) -> Result<()> {
        VcemError::check_size(self.n, generator.num_qubits())?;
        let rot = MaskedRotation::new(generator, angle);
        let dim = self.dim();
        if rot.x == 0 {
            // Entries whose row and column parities agree pick up |f|^2 = 1.
            let odd: Vec<bool> = (0..dim).map(|k| parity(rot.z & k)).collect();
            let (f0, f1) = (rot.diagonal(0), rot.cos - rot.coupling);
            let phase = [f0 * f1.conj(), f1 * f0.conj()];
            for (row, &pr) in self.data.chunks_exact_mut(dim).zip(&odd) {
                let w = phase[pr as usize];
                for (v, &pc) in row.iter_mut().zip(&odd) {
                    if pc != pr {
                        *v *= w;
                    }
                }
            }
            return Ok(());
        }
        if rot.x.is_power_of_two() {
            // One pass over 2x2 blocks: rows r0/r1 and columns c0/c1 differ in the X bit.
            let b = rot.x;
            let z = rot.z;
            let c = rot.cos;
            let (u, w) = (rot.coupling, rot.coupling.conj());
            for_each_row_pair_indexed(&mut self.data, dim, b, |r0, row0, row1| {
                let r1 = r0 | b;
                let (ur0, ur1) = (signed(u, parity(z & r1)), signed(u, parity(z & r0)));
                for_each_pair(dim, b, |c0, c1| {
                    let (wc0, wc1) = (signed(w, parity(z & c1)), signed(w, parity(z & c0)));
                    let (a00, a01, a10, a11) = (row0[c0], row0[c1], row1[c0], row1[c1]);
                    // Left multiplication by R.
                    let (b00, b01) = (a00 * c + ur0 * a10, a01 * c + ur0 * a11);
                    let (b10, b11) = (a10 * c + ur1 * a00, a11 * c + ur1 * a01);
                    // Right multiplication by R†.
                    row0[c0] = b00 * c + wc0 * b01;
                    row0[c1] = b01 * c + wc1 * b00;
                    row1[c0] = b10 * c + wc0 * b11;
                    row1[c1] = b11 * c + wc1 * b10;
                });
            });
            return Ok(());
        }
        // Rows: ρ ← R ρ.
        let high = 1usize << (usize::BITS - 1 - rot.x.leading_zeros());
        for r in 0..dim {
            if r & high != 0 {
                continue;
            }
            let j = r ^ rot.x;
            let (lo, hi) = self.data.split_at_mut(j * dim);
            let a = &mut lo[r * dim..(r + 1) * dim];
            let b = &mut hi[..dim];
            let ca = signed(rot.coupling, parity(rot.z & j));
            let cb = signed(rot.coupling, parity(rot.z & r));
            for (va, vb) in a.iter_mut().zip(b.iter_mut()) {
                let (x, y) = (*va, *vb);
                *va = x * rot.cos + ca * y;
                *vb = y * rot.cos + cb * x;
            }
        }
        // Columns: ρ ← ρ R†, i.e. each row is multiplied by conj(R).
        let conj = rot.conjugated();
        for row in self.data.chunks_exact_mut(dim) {
            rotate_vector(row, &conj, dim);
        }
        Ok(())
    }

    /// `M ρ N` for gates on `qubits`; `right` is applied from the right.
    fn apply_two_sided(&mut self, left: &CMatrix, right: &CMatrix, qubits: &[usize]) -> Result<()> {
        check_qubits(self.n, qubits, left)?;
        check_qubits(self.n, qubits, right)?;
        let (offsets, mask) = local_offsets(self.n, qubits);
        let d = offsets.len();
        let dim = self.dim();
        let mut rows = vec![ZERO; d * dim];
        for base in 0..dim {
            if base & mask != 0 {
                continue;
            }
            for (l, &o) in offsets.iter().enumerate() {
                rows[l * dim..(l + 1) * dim].copy_from_slice(&self.data[(base | o) * dim..((base | o) + 1) * dim]);
            }
            for (l, &o) in offsets.iter().enumerate() {
                let out = &mut self.data[(base | o) * dim..((base | o) + 1) * dim];
                out.fill(ZERO);
                for m in 0..d {
                    let w = left[(l, m)];
                    if w == ZERO {
                        continue;
                    }
                    for (v, s) in out.iter_mut().zip(&rows[m * dim..(m + 1) * dim]) {
                        *v += w * s;
                    }
                }
            }
        }
        let mut buf = vec![ZERO; d];
        for row in self.data.chunks_exact_mut(dim) {
            for base in 0..dim {
                if base & mask != 0 {
                    continue;
                }
                for (l, &o) in offsets.iter().enumerate() {
                    buf[l] = row[base | o];
                }
                for (l, &o) in offsets.iter().enumerate() {
                    row[base | o] = (0..d).map(|m| buf[m] * right[(m, l)]).sum();
                }
            }
        }
        Ok(())
    }

    /// `U ρ U†` for a dense gate given in kron order of `qubits`.
    pub fn apply_unitary(&mut self, matrix: &CMatrix, qubits: &[usize]) -> Result<()> {
        self.apply_two_sided(matrix, &matrix.adjoint(), qubits)
    }

    pub fn apply_pauli_channel(&mut self, ch: &PauliChannel) -> Result<()> {
        VcemError::check_size(self.n, ch.num_qubits())?;
        let support = ch.support();
        let m = support.len();
        if m == 0 {
            return Ok(());
        }
        let n = self.n;
        let dim = self.dim();
        let (offsets, mask) = local_offsets(n, support);
        // kernel[d * k + x]: weight of the block entry (lr^x, lc^x) in the
        // output entry (lr, lc) when lr^lc = d.
        let k = 1usize << m;
        let mut kernel = vec![0.0f64; k * k];
        for (p, s) in ch.terms() {
            let (x, z) = s.index_masks();
            for d in 0..k {
                kernel[d * k + x as usize] += if parity(z as usize & d) { -p } else { *p };
            }
        }
        if m == 1 {
            let b = 1usize << bit_of(n, support[0]);
            let (alpha, beta, gamma, delta) = (kernel[0], kernel[1], kernel[2], kernel[3]);
            for_each_row_pair(&mut self.data, dim, b, |row0, row1| {
                for_each_pair(dim, b, |c0, c1| {
                    let (a00, a01, a10, a11) = (row0[c0], row0[c1], row1[c0], row1[c1]);
                    row0[c0] = a00 * alpha + a11 * beta;
                    row1[c1] = a11 * alpha + a00 * beta;
                    row0[c1] = a01 * gamma + a10 * delta;
                    row1[c0] = a10 * gamma + a01 * delta;
                });
            });
            return Ok(());
        }
        let active: Vec<usize> = (0..k).filter(|&x| (0..k).any(|d| kernel[d * k + x] != 0.0)).collect();
        if m == 2 {
            // Four rows at a time, walked contiguously.
            let mut block = [ZERO; 16];
            for rb in (0..dim).filter(|v| v & mask == 0) {
                let rows = self.data.get_disjoint_mut(quad_rows(&offsets, rb, dim)).expect("distinct rows");
                for cb in (0..dim).filter(|v| v & mask == 0) {
                    for lr in 0..4 {
                        for (lc, &co) in offsets.iter().enumerate() {
                            block[lr * 4 + lc] = rows[lr][cb | co];
                        }
                    }
                    for lr in 0..4 {
                        for (lc, &co) in offsets.iter().enumerate() {
                            let kd = &kernel[(lr ^ lc) * 4..(lr ^ lc) * 4 + 4];
                            let mut acc = ZERO;
                            for &x in &active {
                                acc += block[(lr ^ x) * 4 + (lc ^ x)] * kd[x];
                            }
                            rows[lr][cb | co] = acc;
                        }
                    }
                }
            }
            return Ok(());
        }
        let bases: Vec<usize> = (0..dim).filter(|v| v & mask == 0).collect();
        let mut block = vec![ZERO; k * k];
        for &rb in &bases {
            for &cb in &bases {
                for (lr, &ro) in offsets.iter().enumerate() {
                    let row = (rb | ro) * dim + cb;
                    for (lc, &co) in offsets.iter().enumerate() {
                        block[lr * k + lc] = self.data[row | co];
                    }
                }
                for (lr, &ro) in offsets.iter().enumerate() {
                    let row = (rb | ro) * dim + cb;
                    for (lc, &co) in offsets.iter().enumerate() {
                        let d = lr ^ lc;
                        let mut acc = ZERO;
                        for &x in &active {
                            acc += block[(lr ^ x) * k + (lc ^ x)] * kernel[d * k + x];
                        }
                        self.data[row | co] = acc;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn apply_depolarizing(&mut self, ch: &DepolarizingChannel) -> Result<()> {
        VcemError::check_size(self.n, ch.num_qubits())?;
        let p = ch.p();
        let dim = self.dim();
        let shift = self.trace() * (p / dim as f64);
        for v in self.data.iter_mut() {
            *v *= 1.0 - p;
        }
        for r in 0..dim {
            self.data[r * dim + r] += shift;
        }
        Ok(())
    }

    /// `Σ_j E_j ρ E_j†`, or the adjoint map `Σ_j E_j† ρ E_j` when `adjoint`.
    fn apply_kraus(&mut self, qubits: &[usize], ch: &GenericChannel, adjoint: bool) -> Result<()> {
        let original = self.data.clone();
        let mut acc = vec![ZERO; self.data.len()];
        for e in ch.kraus() {
            self.data.copy_from_slice(&original);
            let (l, r) = if adjoint { (e.adjoint(), e.clone()) } else { (e.clone(), e.adjoint()) };
            self.apply_two_sided(&l, &r, qubits)?;
            for (a, v) in acc.iter_mut().zip(&self.data) {
                *a += v;
            }
        }
        self.data = acc;
        Ok(())
    }

    pub fn apply_channel(&mut self, ch: &Channel) -> Result<()> {
        match ch {
            Channel::Pauli(p) => self.apply_pauli_channel(p),
            Channel::Depolarizing(d) => self.apply_depolarizing(d),
            Channel::Kraus { qubits, channel } => self.apply_kraus(qubits, channel, false),
        }
    }

    /// Heisenberg-picture action; Pauli and depolarizing channels are self-adjoint.
    pub fn apply_channel_adjoint(&mut self, ch: &Channel) -> Result<()> {
        match ch {
            Channel::Kraus { qubits, channel } => self.apply_kraus(qubits, channel, true),
            other => self.apply_channel(other),
        }
    }

    /// `Tr(P ρ)`; the real part for Hermitian `ρ`.
    pub fn expectation(&self, p: &PauliString) -> Result<f64> {
        Ok(self.pauli_trace(p)?.re)
    }

    /// `Tr(P ρ)` as a complex number.
    pub fn pauli_trace(&self, p: &PauliString) -> Result<Complex64> {
        VcemError::check_size(self.n, p.num_qubits())?;
        let (x, z) = p.index_masks();
        let (x, z) = (x as usize, z as usize);
        let dim = self.dim();
        let mut acc = ZERO;
        for r in 0..dim {
            let k = r ^ x;
            acc += signed(self.data[k * dim + r], parity(z & k));
        }
        Ok(acc * p.xz_scalar())
    }

    /// `Tr(A P_g B)` for every `P_g` with `A = self`, for Hermitian `A`.
    /// Row dot products are shared between generators with equal X masks.
    fn traces_with_paulis(&self, ps: &[&PauliString], b: &DensityMatrix) -> Vec<Complex64> {
        let dim = self.dim();
        let masks: Vec<(usize, usize)> = ps
            .iter()
            .map(|p| {
                let (x, z) = p.index_masks();
                (x as usize, z as usize)
            })
            .collect();
        let mut xs: Vec<usize> = masks.iter().map(|m| m.0).collect();
        xs.sort_unstable();
        xs.dedup();
        let slot: Vec<usize> = masks.iter().map(|m| xs.binary_search(&m.0).unwrap()).collect();
        // Σ_{k,r} conj(A[k,r]) ω σ(k^x) B[k^x, r], walking both operands by rows.
        let mut acc = vec![ZERO; ps.len()];
        let mut dots = vec![ZERO; xs.len()];
        for (k, arow) in self.data.chunks_exact(dim).enumerate() {
            for (d, &x) in dots.iter_mut().zip(&xs) {
                let j = k ^ x;
                let brow = &b.data[j * dim..(j + 1) * dim];
                *d = arow.iter().zip(brow).map(|(a, v)| a.conj() * v).sum();
            }
            for ((a, &(x, z)), &s) in acc.iter_mut().zip(&masks).zip(&slot) {
                *a += signed(dots[s], parity(z & (k ^ x)));
            }
        }
        acc.iter().zip(ps).map(|(a, p)| a * p.xz_scalar()).collect()
    }
}

/// One gate of a simulation program.
#[derive(Debug, Clone)]
pub enum Operation {
    Rotation { generator: PauliString, angle: f64 },
    Unitary { matrix: CMatrix, qubits: Vec<usize> },
}

/// Gates of one moment followed by the channels acting after it.
#[derive(Debug, Clone, Default)]
pub struct Layer {
    pub ops: Vec<Operation>,
    pub channels: Vec<Channel>,
}

/// Layers for `circuit` with explicit per-gate angles (in [`ParamCircuit::gates`] order).
pub fn circuit_layers(circuit: &ParamCircuit, angles: &[f64], layout: Option<&NoiseLayout>) -> Result<Vec<Layer>> {
    VcemError::check_size(circuit.gate_count(), angles.len())?;
    if let Some(l) = layout {
        l.check_aligned(circuit)?;
    }
    let n = circuit.num_qubits();
    let mut idx = 0;
    Ok(circuit
        .moments()
        .iter()
        .enumerate()
        .map(|(q, m)| {
            let ops = m
                .gates
                .iter()
                .map(|g| {
                    let op = Operation::Rotation {
                        generator: g.generator(n),
                        angle: angles[idx],
                    };
                    idx += 1;
                    op
                })
                .collect();
            let channels = layout.map_or_else(Vec::new, |l| l.moments()[q].clone());
            Layer { ops, channels }
        })
        .collect())
}

/// Runs a noiseless program from `|0...0⟩`.
pub fn simulate_pure(n: usize, layers: &[Layer]) -> Result<StateVector> {
    let mut psi = StateVector::zero_state(n)?;
    for layer in layers {
        if !layer.channels.is_empty() {
            return Err(VcemError::invalid("pure simulation cannot apply channels"));
        }
        for op in &layer.ops {
            match op {
                Operation::Rotation { generator, angle } => psi.apply_rotation(generator, *angle)?,
                Operation::Unitary { matrix, qubits } => psi.apply_unitary(matrix, qubits)?,
            }
        }
    }
    Ok(psi)
}

fn apply_ops(rho: &mut DensityMatrix, ops: &[Operation]) -> Result<()> {
    for op in ops {
        match op {
            Operation::Rotation { generator, angle } => rho.apply_rotation(generator, *angle)?,
            Operation::Unitary { matrix, qubits } => rho.apply_unitary(matrix, qubits)?,
        }
    }
    Ok(())
}

/// Runs a program from `|0...0⟩⟨0...0|`, applying each layer's channels after its gates.
pub fn simulate_noisy(n: usize, layers: &[Layer]) -> Result<DensityMatrix> {
    let mut rho = DensityMatrix::zero_state(n)?;
    for layer in layers {
        apply_ops(&mut rho, &layer.ops)?;
        for ch in &layer.channels {
            rho.apply_channel(ch)?;
        }
    }
    Ok(rho)
}

/// `U(θ + ε)|0...0⟩`.
pub fn run_pure(circuit: &ParamCircuit, theta: &[f64]) -> Result<StateVector> {
    let angles = circuit.gate_angles(theta)?;
    run_pure_with_angles(circuit, &angles)
}

pub fn run_pure_with_angles(circuit: &ParamCircuit, angles: &[f64]) -> Result<StateVector> {
    simulate_pure(circuit.num_qubits(), &circuit_layers(circuit, angles, None)?)
}

/// Interleaves each moment with the channels that follow it in `layout`.
pub fn run_noisy(circuit: &ParamCircuit, theta: &[f64], layout: &NoiseLayout) -> Result<DensityMatrix> {
    let angles = circuit.gate_angles(theta)?;
    run_noisy_with_angles(circuit, &angles, layout)
}

pub fn run_noisy_with_angles(circuit: &ParamCircuit, angles: &[f64], layout: &NoiseLayout) -> Result<DensityMatrix> {
    simulate_noisy(circuit.num_qubits(), &circuit_layers(circuit, angles, Some(layout))?)
}

fn apply_pauli_sum(psi: &[Complex64], terms: &[(f64, PauliString)]) -> Vec<Complex64> {
    let mut out = vec![ZERO; psi.len()];
    for (w, p) in terms {
        let (x, z) = p.index_masks();
        let (x, z) = (x as usize, z as usize);
        let scale = p.xz_scalar() * *w;
        for (k, o) in out.iter_mut().enumerate() {
            let j = k ^ x;
            *o += scale * signed(psi[j], parity(z & j));
        }
    }
    out
}

/// `Im ⟨λ|P|ψ⟩`.
fn pauli_overlap_im(lambda: &[Complex64], p: &PauliString, psi: &[Complex64]) -> f64 {
    let (x, z) = p.index_masks();
    let (x, z) = (x as usize, z as usize);
    let mut acc = ZERO;
    for (k, l) in lambda.iter().enumerate() {
        let j = k ^ x;
        acc += l.conj() * signed(psi[j], parity(z & j));
    }
    (acc * p.xz_scalar()).im
}

/// Value and per-gate derivatives of `⟨ψ|O|ψ⟩`, `O = Σ w_j P_j`, from one
/// forward and one backward statevector pass.
pub fn pure_adjoint_gradient(
    circuit: &ParamCircuit,
    angles: &[f64],
    observable: &[(f64, PauliString)],
) -> Result<(f64, Vec<f64>)> {
    let n = circuit.num_qubits();
    for (_, p) in observable {
        VcemError::check_size(n, p.num_qubits())?;
    }
    let layers = circuit_layers(circuit, angles, None)?;
    let mut psi = simulate_pure(n, &layers)?;
    let dim = psi.amps.len();
    let mut lambda = apply_pauli_sum(&psi.amps, observable);
    let value: f64 = psi.amps.iter().zip(&lambda).map(|(a, b)| (a.conj() * b).re).sum();
    let mut grads = vec![0.0; angles.len()];
    let ops: Vec<&Operation> = layers.iter().flat_map(|l| l.ops.iter()).collect();
    for (i, op) in ops.iter().enumerate().rev() {
        match op {
            Operation::Rotation { generator, angle } => {
                // d/dφ ⟨ψ|R†O R|ψ⟩ = Im ⟨λ|P|ψ'⟩ with ψ' = Rψ and λ = O-evolved.
                grads[i] = pauli_overlap_im(&lambda, generator, &psi.amps);
                let back = MaskedRotation::new(generator, -angle);
                rotate_vector(&mut psi.amps, &back, dim);
                rotate_vector(&mut lambda, &back, dim);
            }
            Operation::Unitary { matrix, qubits } => {
                let inverse = matrix.adjoint();
                psi.apply_unitary(&inverse, qubits)?;
                let mut l = StateVector { n, amps: lambda };
                l.apply_unitary(&inverse, qubits)?;
                lambda = l.amps;
            }
        }
    }
    Ok((value, grads))
}

/// `Tr(O ρ_final)` for `O = Σ w_i P_i` and its derivative with respect to
/// every gate angle, by one forward pass with checkpoints and one
/// Heisenberg-picture backward pass.
pub fn noisy_adjoint_gradient(
    circuit: &ParamCircuit,
    angles: &[f64],
    layout: &NoiseLayout,
    observable: &[(f64, PauliString)],
) -> Result<(f64, Vec<f64>)> {
    let n = circuit.num_qubits();
    let layers = circuit_layers(circuit, angles, Some(layout))?;
    // checkpoints[q] = state right after the gates of moment q.
    let mut checkpoints = Vec::with_capacity(layers.len());
    let mut rho = DensityMatrix::zero_state(n)?;
    for layer in &layers {
        apply_ops(&mut rho, &layer.ops)?;
        checkpoints.push(rho.clone());
        for ch in &layer.channels {
            rho.apply_channel(ch)?;
        }
    }
    let value: f64 = observable
        .iter()
        .map(|(w, p)| Ok(w * rho.expectation(p)?))
        .sum::<Result<f64>>()?;
    drop(rho);

    let mut grads = vec![0.0; angles.len()];
    let mut op = DensityMatrix::from_pauli_sum(n, observable)?;
    let mut end = angles.len();
    for (layer, state) in layers.iter().zip(checkpoints.iter()).rev() {
        for ch in layer.channels.iter().rev() {
            op.apply_channel_adjoint(ch)?;
        }
        let start = end - layer.ops.len();
        let (slots, generators): (Vec<usize>, Vec<&PauliString>) = layer
            .ops
            .iter()
            .enumerate()
            .filter_map(|(i, g)| match g {
                Operation::Rotation { generator, .. } => Some((start + i, generator)),
                Operation::Unitary { .. } => None,
            })
            .unzip();
        // d/dφ Tr(O R ρ R†) = Im Tr(O P ρ') for R = exp(-iφ/2 P).
        for (slot, t) in slots.into_iter().zip(op.traces_with_paulis(&generators, state)) {
            grads[slot] = t.im;
        }
        for g in layer.ops.iter().rev() {
            if let Operation::Rotation { generator, angle } = g {
                op.apply_rotation(generator, -angle)?;
            }
        }
        end = start;
    }
    Ok((value, grads))
}
