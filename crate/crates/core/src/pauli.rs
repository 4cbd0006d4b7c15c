//! Pauli strings in symplectic form, stabilizer generator sets and
//! Pauli-basis decomposition of small operators.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dense::{self, CMatrix};
use crate::error::{Result, VcemError};
use crate::graph::Graph;

const WORD: usize = 64;

/// Single-qubit Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' | '_' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn matrix(self) -> CMatrix {
        match self {
            Pauli::I => dense::identity(2),
            Pauli::X => dense::pauli_x(),
            Pauli::Y => dense::pauli_y(),
            Pauli::Z => dense::pauli_z(),
        }
    }
}

/// A power of `i`: `i^k` for `k` in `0..4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Phase(u8);

impl Phase {
    pub const PLUS_ONE: Phase = Phase(0);
    pub const PLUS_I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_exponent(k: u32) -> Self {
        Phase((k % 4) as u8)
    }

    pub fn exponent(self) -> u8 {
        self.0
    }

    pub fn is_real(self) -> bool {
        self.0.is_multiple_of(2)
    }

    pub fn to_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

/// An n-qubit Pauli operator `phase * σ_0 ⊗ σ_1 ⊗ ... ⊗ σ_{n-1}` stored as
/// packed X/Z indicator words. A qubit with both bits set carries a literal Y.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    xs: Vec<u64>,
    zs: Vec<u64>,
    phase: Phase,
}

fn words_for(n: usize) -> usize {
    n.div_ceil(WORD).max(1)
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        PauliString {
            n,
            xs: vec![0; words_for(n)],
            zs: vec![0; words_for(n)],
            phase: Phase::PLUS_ONE,
        }
    }

    /// A single non-trivial factor `p` on qubit `q`.
    pub fn single(n: usize, q: usize, p: Pauli) -> Self {
        let mut s = Self::identity(n);
        s.set(q, p);
        s
    }

    pub fn from_paulis(paulis: &[Pauli]) -> Self {
        let mut s = Self::identity(paulis.len());
        for (q, &p) in paulis.iter().enumerate() {
            s.set(q, p);
        }
        s
    }

    /// Builds a string from `(qubit, pauli)` pairs; unlisted qubits are identity.
    pub fn from_sparse(n: usize, ops: &[(usize, Pauli)]) -> Self {
        let mut s = Self::identity(n);
        for &(q, p) in ops {
            s.set(q, p);
        }
        s
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = phase;
        self
    }

    /// The same operator with phase +1.
    pub fn unsigned(&self) -> Self {
        self.clone().with_phase(Phase::PLUS_ONE)
    }

    pub fn get(&self, q: usize) -> Pauli {
        let (w, b) = (q / WORD, q % WORD);
        Pauli::from_bits((self.xs[w] >> b) & 1 == 1, (self.zs[w] >> b) & 1 == 1)
    }

    pub fn set(&mut self, q: usize, p: Pauli) {
        assert!(q < self.n, "qubit {q} out of range for {} qubits", self.n);
        let (w, b) = (q / WORD, q % WORD);
        let (x, z) = p.bits();
        self.xs[w] = (self.xs[w] & !(1 << b)) | ((x as u64) << b);
        self.zs[w] = (self.zs[w] & !(1 << b)) | ((z as u64) << b);
    }

    pub fn paulis(&self) -> impl Iterator<Item = Pauli> + '_ {
        (0..self.n).map(move |q| self.get(q))
    }

    pub fn is_identity(&self) -> bool {
        self.xs.iter().chain(self.zs.iter()).all(|&w| w == 0)
    }

    pub fn is_hermitian(&self) -> bool {
        self.phase.is_real()
    }

    pub fn weight(&self) -> usize {
        self.xs
            .iter()
            .zip(&self.zs)
            .map(|(x, z)| (x | z).count_ones() as usize)
            .sum()
    }

    /// Qubits carrying a non-identity factor, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&q| self.get(q) != Pauli::I).collect()
    }

    pub fn x_words(&self) -> &[u64] {
        &self.xs
    }

    pub fn z_words(&self) -> &[u64] {
        &self.zs
    }

    /// True iff `self` and `other` commute (symplectic inner product is zero).
    pub fn commutes(&self, other: &PauliString) -> Result<bool> {
        VcemError::check_size(self.n, other.n)?;
        Ok(self.commutes_unchecked(other))
    }

    pub(crate) fn commutes_unchecked(&self, other: &PauliString) -> bool {
        let mut parity = 0u32;
        for w in 0..self.xs.len() {
            parity ^= ((self.xs[w] & other.zs[w]) ^ (self.zs[w] & other.xs[w])).count_ones();
        }
        parity.is_multiple_of(2)
    }

    /// The operator product `self * other`.
    pub fn multiply(&self, other: &PauliString) -> Result<PauliString> {
        VcemError::check_size(self.n, other.n)?;
        Ok(self.multiply_unchecked(other))
    }

    pub(crate) fn multiply_unchecked(&self, other: &PauliString) -> PauliString {
        let mut plus_i = 0u32;
        let mut minus_i = 0u32;
        let mut xs = Vec::with_capacity(self.xs.len());
        let mut zs = Vec::with_capacity(self.zs.len());
        for w in 0..self.xs.len() {
            let (x1, z1, x2, z2) = (self.xs[w], self.zs[w], other.xs[w], other.zs[w]);
            // XY = iZ, YZ = iX, ZX = iY and the reversed orders give -i.
            let pos = (x1 & !z1 & x2 & z2) | (x1 & z1 & !x2 & z2) | (!x1 & z1 & x2 & !z2);
            let neg = (x1 & z1 & x2 & !z2) | (!x1 & z1 & x2 & z2) | (x1 & !z1 & !x2 & z2);
            plus_i += pos.count_ones();
            minus_i += neg.count_ones();
            xs.push(x1 ^ x2);
            zs.push(z1 ^ z2);
        }
        let k = self.phase.0 as u32 + other.phase.0 as u32 + plus_i + 3 * minus_i;
        PauliString {
            n: self.n,
            xs,
            zs,
            phase: Phase::from_exponent(k),
        }
    }

    pub fn negate(&self) -> PauliString {
        self.clone().with_phase(self.phase * Phase::MINUS_ONE)
    }

    /// Restricts to `qubits` (in the listed order), discarding the phase.
    pub fn restrict(&self, qubits: &[usize]) -> PauliString {
        let mut s = PauliString::identity(qubits.len());
        for (i, &q) in qubits.iter().enumerate() {
            s.set(i, self.get(q));
        }
        s
    }

    /// Places a local string acting on `qubits` into an `n`-qubit register.
    pub fn embed(&self, n: usize, qubits: &[usize]) -> Result<PauliString> {
        VcemError::check_size(self.n, qubits.len())?;
        let mut s = PauliString::identity(n);
        for (i, &q) in qubits.iter().enumerate() {
            if q >= n {
                return Err(VcemError::invalid(format!("qubit {q} outside register of {n}")));
            }
            s.set(q, self.get(i));
        }
        s.phase = self.phase;
        Ok(s)
    }

    /// X and Z masks in state-index convention (qubit `q` is index bit `n-1-q`).
    pub fn index_masks(&self) -> (u64, u64) {
        assert!(self.n <= 64, "index masks need at most 64 qubits");
        let mut x = 0u64;
        let mut z = 0u64;
        for q in 0..self.n {
            let bit = 1u64 << (self.n - 1 - q);
            match self.get(q) {
                Pauli::I => {}
                Pauli::X => x |= bit,
                Pauli::Z => z |= bit,
                Pauli::Y => {
                    x |= bit;
                    z |= bit;
                }
            }
        }
        (x, z)
    }

    /// The scalar `ω` with `self = ω X^x Z^z`; each literal Y contributes `i`.
    pub fn xz_scalar(&self) -> Complex64 {
        let ys: u32 = self
            .xs
            .iter()
            .zip(&self.zs)
            .map(|(x, z)| (x & z).count_ones())
            .sum();
        (self.phase * Phase::from_exponent(ys)).to_complex()
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = dense::identity(1);
        for p in self.paulis() {
            m = dense::kron(&m, &p.matrix());
        }
        m * self.phase.to_complex()
    }

    /// Enumerates all `4^n` unsigned strings in lexicographic I<X<Y<Z order.
    pub fn all(n: usize) -> Vec<PauliString> {
        let total = 1usize << (2 * n);
        (0..total)
            .map(|mut k| {
                let mut s = PauliString::identity(n);
                for q in (0..n).rev() {
                    s.set(q, Pauli::ALL[k & 3]);
                    k >>= 2;
                }
                s
            })
            .collect()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase.0 {
            0 => "",
            1 => "i",
            2 => "-",
            _ => "-i",
        };
        f.write_str(prefix)?;
        for p in self.paulis() {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({self})")
    }
}

impl FromStr for PauliString {
    type Err = VcemError;

    fn from_str(label: &str) -> Result<Self> {
        let label = label.trim();
        let (phase, body) = if let Some(rest) = label.strip_prefix("-i") {
            (Phase::MINUS_I, rest)
        } else if let Some(rest) = label.strip_prefix("+i") {
            (Phase::PLUS_I, rest)
        } else if let Some(rest) = label.strip_prefix('i') {
            (Phase::PLUS_I, rest)
        } else if let Some(rest) = label.strip_prefix('-') {
            (Phase::MINUS_ONE, rest)
        } else if let Some(rest) = label.strip_prefix('+') {
            (Phase::PLUS_ONE, rest)
        } else {
            (Phase::PLUS_ONE, label)
        };
        if body.is_empty() {
            return Err(VcemError::Parse(format!("empty Pauli label {label:?}")));
        }
        let paulis = body
            .chars()
            .map(|c| {
                Pauli::from_char(c)
                    .ok_or_else(|| VcemError::Parse(format!("bad Pauli character {c:?} in {label:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PauliString::from_paulis(&paulis).with_phase(phase))
    }
}

impl Serialize for PauliString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Rank over GF(2) of the symplectic rows `(x | z)` of `strings`.
pub fn symplectic_rank(strings: &[PauliString]) -> usize {
    let mut rows: Vec<Vec<u64>> = strings
        .iter()
        .map(|s| s.x_words().iter().chain(s.z_words()).copied().collect())
        .collect();
    let width = rows.first().map_or(0, |r| r.len() * WORD);
    let mut rank = 0;
    for col in 0..width {
        let (w, b) = (col / WORD, col % WORD);
        let Some(pivot) = (rank..rows.len()).find(|&r| (rows[r][w] >> b) & 1 == 1) else {
            continue;
        };
        rows.swap(rank, pivot);
        for r in 0..rows.len() {
            if r != rank && (rows[r][w] >> b) & 1 == 1 {
                let pivot_row = rows[rank].clone();
                for (a, p) in rows[r].iter_mut().zip(pivot_row) {
                    *a ^= p;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Independent, mutually commuting generators of a stabilizer group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilizerSet {
    generators: Vec<PauliString>,
    labels: Vec<String>,
}

impl StabilizerSet {
    pub fn new(generators: Vec<PauliString>, labels: Vec<String>) -> Result<Self> {
        let n = generators
            .first()
            .map(PauliString::num_qubits)
            .ok_or_else(|| VcemError::InvalidStabilizers("no generators".into()))?;
        if generators.len() != n {
            return Err(VcemError::InvalidStabilizers(format!(
                "{} generators for {n} qubits",
                generators.len()
            )));
        }
        VcemError::check_size(generators.len(), labels.len())?;
        for g in &generators {
            VcemError::check_size(n, g.num_qubits())?;
            if g.phase() != Phase::PLUS_ONE {
                return Err(VcemError::InvalidStabilizers(format!("generator {g} has a non-unit phase")));
            }
        }
        for (i, a) in generators.iter().enumerate() {
            for b in &generators[i + 1..] {
                if !a.commutes_unchecked(b) {
                    return Err(VcemError::InvalidStabilizers(format!("{a} and {b} anticommute")));
                }
            }
        }
        if symplectic_rank(&generators) != n {
            return Err(VcemError::InvalidStabilizers("generators are not independent".into()));
        }
        Ok(StabilizerSet { generators, labels })
    }

    /// Generators labelled `S1`, `S2`, ...
    pub fn from_generators(generators: Vec<PauliString>) -> Result<Self> {
        let labels = (1..=generators.len()).map(|i| format!("S{i}")).collect();
        Self::new(generators, labels)
    }

    pub fn generators(&self) -> &[PauliString] {
        &self.generators
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn num_qubits(&self) -> usize {
        self.generators[0].num_qubits()
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }
}

/// Graph-state generators: X on node `i`, Z on each neighbour of `i`.
pub fn graph_stabilizers(g: &Graph) -> Result<StabilizerSet> {
    g.validate()?;
    let n = g.num_nodes();
    let generators = (0..n)
        .map(|i| {
            let mut s = PauliString::single(n, i, Pauli::X);
            for j in g.neighbors(i) {
                s.set(j, Pauli::Z);
            }
            s
        })
        .collect();
    let labels = (0..n).map(|i| format!("G{i}")).collect();
    StabilizerSet::new(generators, labels)
}

/// GHZ generators `X...X, Z_0 Z_1, Z_1 Z_2, ...`.
pub fn ghz_stabilizers(n: usize) -> Result<StabilizerSet> {
    if n < 2 {
        return Err(VcemError::invalid(format!("GHZ state needs at least 2 qubits, got {n}")));
    }
    let mut generators = vec![PauliString::from_paulis(&vec![Pauli::X; n])];
    for i in 0..n - 1 {
        generators.push(PauliString::from_sparse(n, &[(i, Pauli::Z), (i + 1, Pauli::Z)]));
    }
    StabilizerSet::from_generators(generators)
}

/// Largest operator size accepted by [`decompose`].
pub const MAX_DECOMPOSE_QUBITS: usize = 4;

/// Expands `m = Σ c_j P_j` with `c_j = Tr(P_j m) / 2^k`. Terms with
/// coefficients below `1e-14` in magnitude are dropped.
pub fn decompose(m: &CMatrix) -> Result<Vec<(Complex64, PauliString)>> {
    if m.nrows() != m.ncols() {
        return Err(VcemError::invalid(format!("matrix is {}x{}, not square", m.nrows(), m.ncols())));
    }
    let dim = m.nrows();
    if !dim.is_power_of_two() || dim < 2 {
        return Err(VcemError::invalid(format!("dimension {dim} is not a power of two")));
    }
    let k = dim.trailing_zeros() as usize;
    if k > MAX_DECOMPOSE_QUBITS {
        return Err(VcemError::ResourceLimit(format!(
            "decompose supports at most {MAX_DECOMPOSE_QUBITS} qubits, got {k}"
        )));
    }
    let mut out = Vec::new();
    for p in PauliString::all(k) {
        let coeff = pauli_coefficient(m, &p);
        if coeff.norm() > 1e-14 {
            out.push((coeff, p));
        }
    }
    Ok(out)
}

/// `Tr(P m) / 2^k` evaluated from the sparse structure of `P`.
pub(crate) fn pauli_coefficient(m: &CMatrix, p: &PauliString) -> Complex64 {
    let dim = m.nrows();
    let (x, z) = p.index_masks();
    let omega = p.xz_scalar();
    // P[r, r^x] = ω (-1)^{z·(r^x)}, so Tr(P m) = Σ_r P[r, r^x] m[r^x, r].
    let mut acc = Complex64::new(0.0, 0.0);
    for r in 0..dim {
        let c = r ^ x as usize;
        let v = m[(c, r)];
        if (z as usize & c).count_ones() % 2 == 1 {
            acc -= v;
        } else {
            acc += v;
        }
    }
    acc * omega / dim as f64
}

/// Re-sums a Pauli expansion into a dense matrix.
pub fn recompose(terms: &[(Complex64, PauliString)], k: usize) -> CMatrix {
    let dim = 1 << k;
    terms
        .iter()
        .fold(CMatrix::zeros(dim, dim), |acc, (c, p)| acc + p.to_dense() * *c)
}
