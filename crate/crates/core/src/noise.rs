//! Pauli, depolarizing and Kraus channels, χ-factors, Clifford conjugation
//! of Pauli channels and the effective end-of-circuit channel.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{keyed_seed, GateKind, ParamCircuit};
use crate::clifford::{conjugate_moment_adjoint, CliffordTableau};
use crate::dense::{self, CMatrix};
use crate::error::{Result, VcemError};
use crate::pauli::PauliString;

/// Terms lighter than this are dropped when channels are composed.
pub const PRUNE_THRESHOLD: f64 = 1e-15;

const SUM_TOLERANCE: f64 = 1e-12;
const TP_TOLERANCE: f64 = 1e-10;
/// Largest register for which a depolarizing channel is expanded term by term.
pub const MAX_EXPLICIT_DEPOLARIZING_QUBITS: usize = 3;
/// Largest register for dense channel application.
const MAX_DENSE_QUBITS: usize = 6;

/// `ρ ↦ Σ_j p_j P_j ρ P_j` with the `P_j` stored on a small support.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliChannel {
    n: usize,
    support: Vec<usize>,
    /// Unsigned strings on `support.len()` qubits, distinct, sorted by label.
    terms: Vec<(f64, PauliString)>,
}

impl PauliChannel {
    /// `terms` hold local strings acting on `support` (in the listed order).
    /// Duplicate strings are merged and signs dropped.
    pub fn new(n: usize, support: Vec<usize>, terms: Vec<(f64, PauliString)>) -> Result<Self> {
        for (i, &q) in support.iter().enumerate() {
            if q >= n {
                return Err(VcemError::InvalidChannel(format!("qubit {q} outside register of {n}")));
            }
            if support[..i].contains(&q) {
                return Err(VcemError::InvalidChannel(format!("qubit {q} repeated in support")));
            }
        }
        let mut total = 0.0;
        for (p, s) in &terms {
            if !p.is_finite() || *p < 0.0 {
                return Err(VcemError::InvalidChannel(format!("probability {p} for {s}")));
            }
            VcemError::check_size(support.len(), s.num_qubits())?;
            total += p;
        }
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(VcemError::InvalidChannel(format!("probabilities sum to {total}")));
        }
        // Sort the support so that equal channels compare equal.
        let mut order: Vec<usize> = (0..support.len()).collect();
        order.sort_by_key(|&i| support[i]);
        let sorted: Vec<usize> = order.iter().map(|&i| support[i]).collect();
        let terms = terms.into_iter().map(|(p, s)| (p, s.restrict(&order)));
        Ok(PauliChannel {
            n,
            support: sorted,
            terms: merge_terms(terms),
        })
    }

    pub fn identity(n: usize) -> Self {
        PauliChannel {
            n,
            support: Vec::new(),
            terms: vec![(1.0, PauliString::identity(0))],
        }
    }

    /// Builds a channel from full-register strings; the support is the union of
    /// their supports.
    pub fn from_full_terms(n: usize, terms: Vec<(f64, PauliString)>) -> Result<Self> {
        let mut support: Vec<usize> = Vec::new();
        for (_, s) in &terms {
            VcemError::check_size(n, s.num_qubits())?;
            support.extend(s.support());
        }
        support.sort_unstable();
        support.dedup();
        let local = terms.into_iter().map(|(p, s)| (p, s.restrict(&support))).collect();
        Self::new(n, support, local)
    }

    /// `(1 - p) ρ + p P ρ P` for a single string `P`.
    pub fn flip(p_string: &PauliString, p: f64) -> Result<Self> {
        let n = p_string.num_qubits();
        Self::from_full_terms(n, vec![(1.0 - p, PauliString::identity(n)), (p, p_string.unsigned())])
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Terms as `(probability, local string on support)`.
    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    /// Terms embedded into the full register.
    pub fn full_terms(&self) -> Vec<(f64, PauliString)> {
        self.terms
            .iter()
            .map(|(p, s)| (*p, s.embed(self.n, &self.support).expect("support fits register")))
            .collect()
    }

    pub fn probability(&self, s: &PauliString) -> f64 {
        if s.num_qubits() != self.n || s.support().iter().any(|q| !self.support.contains(q)) {
            return 0.0;
        }
        let local = s.restrict(&self.support);
        self.terms.iter().find(|(_, t)| *t == local).map_or(0.0, |(p, _)| *p)
    }

    pub fn identity_probability(&self) -> f64 {
        self.terms.iter().find(|(_, s)| s.is_identity()).map_or(0.0, |(p, _)| *p)
    }

    /// Whether the identity weight is at least 1/2.
    pub fn is_realistic(&self) -> bool {
        self.identity_probability() >= 0.5
    }

    pub fn check_realistic(&self) -> Result<()> {
        if self.is_realistic() {
            Ok(())
        } else {
            Err(VcemError::InvalidChannel(format!(
                "identity probability {} is below 1/2",
                self.identity_probability()
            )))
        }
    }

    /// Total weight of terms that anticommute with `s`.
    pub fn anticommuting_weight(&self, s: &PauliString) -> Result<f64> {
        VcemError::check_size(self.n, s.num_qubits())?;
        let local = s.restrict(&self.support);
        Ok(self
            .terms
            .iter()
            .filter(|(_, t)| !t.commutes_unchecked(&local))
            .map(|(p, _)| p)
            .sum())
    }

    /// `χ = 1 - 2Γ`: the factor by which the channel rescales `s`.
    pub fn chi_factor(&self, s: &PauliString) -> Result<f64> {
        Ok(1.0 - 2.0 * self.anticommuting_weight(s)?)
    }

    /// Applies `U P U†` to every term.
    pub fn conjugate(&self, clifford: &CliffordTableau) -> Result<PauliChannel> {
        VcemError::check_size(self.n, clifford.num_qubits())?;
        let terms = self
            .full_terms()
            .into_iter()
            .map(|(p, s)| Ok((p, clifford.apply(&s)?.unsigned())))
            .collect::<Result<Vec<_>>>()?;
        Self::from_full_terms(self.n, terms)
    }

    /// The channel `self` followed by `other` (convolution of the term
    /// distributions). Terms below [`PRUNE_THRESHOLD`] are dropped and the
    /// remainder renormalized.
    pub fn compose(&self, other: &PauliChannel) -> Result<PauliChannel> {
        VcemError::check_size(self.n, other.n)?;
        let mut support: Vec<usize> = self.support.iter().chain(&other.support).copied().collect();
        support.sort_unstable();
        support.dedup();
        let lift = |ch: &PauliChannel| -> Vec<(f64, PauliString)> {
            ch.full_terms().into_iter().map(|(p, s)| (p, s.restrict(&support))).collect()
        };
        let (a, b) = (lift(self), lift(other));
        let mut acc: HashMap<PauliString, f64> = HashMap::new();
        for (pa, sa) in &a {
            for (pb, sb) in &b {
                *acc.entry(sa.multiply_unchecked(sb).unsigned()).or_insert(0.0) += pa * pb;
            }
        }
        let kept = merge_terms(
            acc.into_iter()
                .filter(|(_, p)| *p >= PRUNE_THRESHOLD)
                .map(|(s, p)| (p, s)),
        );
        let total: f64 = kept.iter().map(|(p, _)| p).sum();
        Ok(PauliChannel {
            n: self.n,
            support,
            terms: kept.into_iter().map(|(p, s)| (p / total, s)).collect(),
        })
    }

    pub fn to_generic(&self) -> Result<GenericChannel> {
        let kraus = self
            .terms
            .iter()
            .map(|(p, s)| s.to_dense() * Complex64::new(p.sqrt(), 0.0))
            .collect();
        GenericChannel::new(kraus)
    }
}

fn merge_terms(terms: impl IntoIterator<Item = (f64, PauliString)>) -> Vec<(f64, PauliString)> {
    let mut acc: HashMap<PauliString, f64> = HashMap::new();
    for (p, s) in terms {
        *acc.entry(s.unsigned()).or_insert(0.0) += p;
    }
    let mut out: Vec<(String, f64, PauliString)> = acc.into_iter().map(|(s, p)| (s.to_string(), p, s)).collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out.into_iter().map(|(_, p, s)| (p, s)).collect()
}

/// `ρ ↦ (1 - p) ρ + p Tr(ρ) 𝟙 / 2^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepolarizingChannel {
    n: usize,
    p: f64,
}

impl DepolarizingChannel {
    pub fn new(n: usize, p: f64) -> Result<Self> {
        check_probability(p)?;
        Ok(DepolarizingChannel { n, p })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn chi_factor(&self, s: &PauliString) -> Result<f64> {
        VcemError::check_size(self.n, s.num_qubits())?;
        Ok(if s.is_identity() { 1.0 } else { 1.0 - self.p })
    }

    /// Explicit expansion with weight `p / 4^n` on each of the `4^n` strings.
    pub fn as_pauli(&self) -> Result<PauliChannel> {
        if self.n > MAX_EXPLICIT_DEPOLARIZING_QUBITS {
            return Err(VcemError::ResourceLimit(format!(
                "explicit depolarizing expansion supports at most {MAX_EXPLICIT_DEPOLARIZING_QUBITS} qubits, got {}",
                self.n
            )));
        }
        let all = PauliString::all(self.n);
        let w = self.p / all.len() as f64;
        let terms = all
            .into_iter()
            .map(|s| (if s.is_identity() { 1.0 - self.p + w } else { w }, s))
            .collect();
        PauliChannel::new(self.n, (0..self.n).collect(), terms)
    }
}

/// `p' = 1 - Π(1 - p_q)`: a sequence of depolarizing channels as one.
pub fn compose_depolarizing(ps: &[f64]) -> Result<f64> {
    let mut keep = 1.0;
    for &p in ps {
        check_probability(p)?;
        keep *= 1.0 - p;
    }
    Ok(1.0 - keep)
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(VcemError::InvalidChannel(format!("probability {p} outside [0, 1]")))
    }
}

/// A trace-preserving channel on at most two qubits given by Kraus operators.
#[derive(Debug, Clone, PartialEq)]
pub struct GenericChannel {
    n: usize,
    kraus: Vec<CMatrix>,
}

/// Largest register accepted by [`GenericChannel`].
pub const MAX_GENERIC_QUBITS: usize = 2;

impl GenericChannel {
    pub fn new(kraus: Vec<CMatrix>) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| VcemError::InvalidChannel("no Kraus operators".into()))?;
        let dim = first.nrows();
        if !dim.is_power_of_two() || dim < 2 {
            return Err(VcemError::InvalidChannel(format!("dimension {dim} is not a power of two")));
        }
        let n = dim.trailing_zeros() as usize;
        if n > MAX_GENERIC_QUBITS {
            return Err(VcemError::ResourceLimit(format!(
                "Kraus channels support at most {MAX_GENERIC_QUBITS} qubits, got {n}"
            )));
        }
        let mut sum = CMatrix::zeros(dim, dim);
        for k in &kraus {
            if k.nrows() != dim || k.ncols() != dim {
                return Err(VcemError::InvalidChannel("Kraus operators differ in shape".into()));
            }
            sum += k.adjoint() * k;
        }
        if dense::max_abs_diff(&sum, &dense::identity(dim)) > TP_TOLERANCE {
            return Err(VcemError::InvalidChannel("Kraus operators are not trace preserving".into()));
        }
        Ok(GenericChannel { n, kraus })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(vec![dense::identity(1 << n)])
    }

    pub fn unitary(u: CMatrix) -> Result<Self> {
        Self::new(vec![u])
    }

    /// Single-qubit amplitude damping with decay probability `gamma`.
    pub fn amplitude_damping(gamma: f64) -> Result<Self> {
        check_probability(gamma)?;
        let r = |x: f64| Complex64::new(x, 0.0);
        let e0 = dense::from_rows(&[&[r(1.0), r(0.0)], &[r(0.0), r((1.0 - gamma).sqrt())]]);
        let e1 = dense::from_rows(&[&[r(0.0), r(gamma.sqrt())], &[r(0.0), r(0.0)]]);
        Self::new(vec![e0, e1])
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    /// `Σ_j E_j ρ E_j†` on the channel's own register.
    pub fn apply_dense(&self, rho: &CMatrix) -> Result<CMatrix> {
        VcemError::check_size(1 << self.n, rho.nrows())?;
        Ok(self
            .kraus
            .iter()
            .fold(CMatrix::zeros(rho.nrows(), rho.ncols()), |acc, e| acc + e * rho * e.adjoint()))
    }
}

/// One channel in a noise layout.
#[derive(Debug, Clone, PartialEq)]
pub enum Channel {
    Pauli(PauliChannel),
    Depolarizing(DepolarizingChannel),
    /// A generic channel acting on the listed qubits.
    Kraus { qubits: Vec<usize>, channel: GenericChannel },
}

impl Channel {
    pub fn kind(&self) -> &'static str {
        match self {
            Channel::Pauli(_) => "pauli",
            Channel::Depolarizing(_) => "depolarizing",
            Channel::Kraus { .. } => "kraus",
        }
    }

    pub fn is_pauli(&self) -> bool {
        !matches!(self, Channel::Kraus { .. })
    }

    pub fn chi_factor(&self, s: &PauliString) -> Result<f64> {
        match self {
            Channel::Pauli(c) => c.chi_factor(s),
            Channel::Depolarizing(d) => d.chi_factor(s),
            Channel::Kraus { .. } => Err(VcemError::InvalidChannel(
                "χ-factors are defined only for Pauli channels".into(),
            )),
        }
    }

    pub fn as_pauli(&self) -> Result<PauliChannel> {
        match self {
            Channel::Pauli(c) => Ok(c.clone()),
            Channel::Depolarizing(d) => d.as_pauli(),
            Channel::Kraus { .. } => Err(VcemError::InvalidChannel("Kraus channel is not a Pauli channel".into())),
        }
    }

    fn check_register(&self, n: usize) -> Result<()> {
        match self {
            Channel::Pauli(c) => VcemError::check_size(n, c.num_qubits()),
            Channel::Depolarizing(d) => VcemError::check_size(n, d.num_qubits()),
            Channel::Kraus { qubits, channel } => {
                VcemError::check_size(channel.num_qubits(), qubits.len())?;
                for (i, &q) in qubits.iter().enumerate() {
                    if q >= n || qubits[..i].contains(&q) {
                        return Err(VcemError::InvalidChannel(format!("bad Kraus target qubits {qubits:?}")));
                    }
                }
                Ok(())
            }
        }
    }

    /// Dense application on an `n`-qubit density matrix (small registers).
    pub fn apply_dense(&self, rho: &CMatrix) -> Result<CMatrix> {
        let dim = rho.nrows();
        let n = dim.trailing_zeros() as usize;
        if n > MAX_DENSE_QUBITS {
            return Err(VcemError::ResourceLimit(format!("dense channel application on {n} qubits")));
        }
        self.check_register(n)?;
        Ok(match self {
            Channel::Pauli(c) => c.full_terms().iter().fold(CMatrix::zeros(dim, dim), |acc, (p, s)| {
                let m = s.to_dense();
                acc + (&m * rho * &m) * Complex64::new(*p, 0.0)
            }),
            Channel::Depolarizing(d) => {
                let tr = dense::trace(rho);
                rho * Complex64::new(1.0 - d.p(), 0.0) + dense::identity(dim) * (tr * d.p() / dim as f64)
            }
            Channel::Kraus { qubits, channel } => channel.kraus().iter().fold(CMatrix::zeros(dim, dim), |acc, e| {
                let big = dense::embed(e, qubits, n);
                acc + &big * rho * big.adjoint()
            }),
        })
    }

    pub fn to_document(&self) -> ChannelDocument {
        match self {
            Channel::Pauli(c) => ChannelDocument::Pauli {
                support: c.support().to_vec(),
                terms: c
                    .terms()
                    .iter()
                    .map(|(p, s)| TermDocument {
                        label: s.to_string(),
                        probability: *p,
                    })
                    .collect(),
            },
            Channel::Depolarizing(d) => ChannelDocument::Depolarizing { p: d.p() },
            Channel::Kraus { qubits, channel } => ChannelDocument::Kraus {
                qubits: qubits.clone(),
                kraus: channel
                    .kraus()
                    .iter()
                    .map(|m| {
                        (0..m.nrows())
                            .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
                            .collect()
                    })
                    .collect(),
            },
        }
    }

    pub fn from_document(n: usize, doc: &ChannelDocument) -> Result<Self> {
        let ch = match doc {
            ChannelDocument::Pauli { support, terms } => {
                let terms = terms
                    .iter()
                    .map(|t| Ok((t.probability, t.label.parse::<PauliString>()?)))
                    .collect::<Result<Vec<_>>>()?;
                Channel::Pauli(PauliChannel::new(n, support.clone(), terms)?)
            }
            ChannelDocument::Depolarizing { p } => Channel::Depolarizing(DepolarizingChannel::new(n, *p)?),
            ChannelDocument::Kraus { qubits, kraus } => {
                let mats = kraus
                    .iter()
                    .map(|rows| {
                        let dim = rows.len();
                        if rows.iter().any(|r| r.len() != dim) {
                            return Err(VcemError::InvalidChannel("Kraus matrix is not square".into()));
                        }
                        Ok(CMatrix::from_fn(dim, dim, |r, c| Complex64::new(rows[r][c][0], rows[r][c][1])))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Channel::Kraus {
                    qubits: qubits.clone(),
                    channel: GenericChannel::new(mats)?,
                }
            }
        };
        ch.check_register(n)?;
        Ok(ch)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermDocument {
    pub label: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelDocument {
    Pauli { support: Vec<usize>, terms: Vec<TermDocument> },
    Depolarizing { p: f64 },
    Kraus { qubits: Vec<usize>, kraus: Vec<Vec<Vec<[f64; 2]>>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutDocument {
    pub num_qubits: usize,
    pub prune_threshold: f64,
    pub moments: Vec<Vec<ChannelDocument>>,
}

/// Channels applied after each moment of a circuit, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseLayout {
    n: usize,
    moments: Vec<Vec<Channel>>,
}

impl NoiseLayout {
    pub fn new(n: usize, moments: Vec<Vec<Channel>>) -> Result<Self> {
        for ch in moments.iter().flatten() {
            ch.check_register(n)?;
        }
        Ok(NoiseLayout { n, moments })
    }

    /// No noise after any of `num_moments` moments.
    pub fn noiseless(n: usize, num_moments: usize) -> Self {
        NoiseLayout {
            n,
            moments: vec![Vec::new(); num_moments],
        }
    }

    pub fn uniform_depolarizing(n: usize, num_moments: usize, p: f64) -> Result<Self> {
        let d = DepolarizingChannel::new(n, p)?;
        Ok(NoiseLayout {
            n,
            moments: vec![vec![Channel::Depolarizing(d)]; num_moments],
        })
    }

    /// Independently sampled channels after every moment. For `m = 1` each
    /// qubit receives a 1-local channel; for `m = 2` each `Rzx` pair receives
    /// a 2-local channel and the remaining qubits 1-local ones. Each channel's
    /// draw depends only on `(seed, moment, support)`, so circuits on nested
    /// registers share their common channels.
    pub fn sample_local_pauli(circuit: &ParamCircuit, locality: usize, magnitude: f64, seed: u64) -> Result<Self> {
        if !(1..=2).contains(&locality) {
            return Err(VcemError::invalid(format!("locality m={locality} must be 1 or 2")));
        }
        let n = circuit.num_qubits();
        let moments = circuit
            .moments()
            .iter()
            .enumerate()
            .map(|(q, moment)| {
                let mut supports: Vec<Vec<usize>> = Vec::new();
                let mut covered = vec![false; n];
                if locality == 2 {
                    for g in moment.gates.iter().filter(|g| g.kind == GateKind::Rzx) {
                        supports.push(g.qubits.clone());
                        for &t in &g.qubits {
                            covered[t] = true;
                        }
                    }
                }
                supports.extend((0..n).filter(|&t| !covered[t]).map(|t| vec![t]));
                supports.sort();
                supports
                    .into_iter()
                    .map(|s| {
                        let label = format!("moment{q}:{s:?}");
                        sample_pauli_channel(n, &s, magnitude, keyed_seed(seed, &label)).map(Channel::Pauli)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NoiseLayout { n, moments })
    }

    /// Builds a layout for `circuit` from a noise spec string; see [`NoiseSpec`].
    /// A `;`-separated list gives one spec per moment.
    pub fn from_spec(spec: &str, circuit: &ParamCircuit, seed: u64) -> Result<Self> {
        let parts: Vec<&str> = spec.split(';').map(str::trim).collect();
        let m = circuit.num_moments();
        let n = circuit.num_qubits();
        if parts.len() == 1 {
            return parts[0].parse::<NoiseSpec>()?.layout(circuit, seed);
        }
        if parts.len() != m {
            return Err(VcemError::Config(format!(
                "per-moment noise spec has {} entries for {m} moments",
                parts.len()
            )));
        }
        let mut moments = Vec::with_capacity(m);
        for (q, part) in parts.iter().enumerate() {
            let full = part.parse::<NoiseSpec>()?.layout(circuit, keyed_seed(seed, &format!("spec{q}")))?;
            moments.push(full.moments[q].clone());
        }
        Self::new(n, moments)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn num_moments(&self) -> usize {
        self.moments.len()
    }

    pub fn moments(&self) -> &[Vec<Channel>] {
        &self.moments
    }

    pub fn channels(&self) -> impl Iterator<Item = &Channel> {
        self.moments.iter().flatten()
    }

    pub fn is_noiseless(&self) -> bool {
        self.channels().all(|c| match c {
            Channel::Pauli(p) => p.identity_probability() == 1.0,
            Channel::Depolarizing(d) => d.p() == 0.0,
            Channel::Kraus { .. } => false,
        })
    }

    pub fn is_pauli(&self) -> bool {
        self.channels().all(Channel::is_pauli)
    }

    pub fn check_aligned(&self, circuit: &ParamCircuit) -> Result<()> {
        VcemError::check_size(circuit.num_qubits(), self.n)?;
        if circuit.num_moments() != self.moments.len() {
            return Err(VcemError::invalid(format!(
                "noise layout has {} moments, circuit has {}",
                self.moments.len(),
                circuit.num_moments()
            )));
        }
        Ok(())
    }

    pub fn to_document(&self) -> LayoutDocument {
        LayoutDocument {
            num_qubits: self.n,
            prune_threshold: PRUNE_THRESHOLD,
            moments: self
                .moments
                .iter()
                .map(|m| m.iter().map(Channel::to_document).collect())
                .collect(),
        }
    }

    pub fn from_document(doc: &LayoutDocument) -> Result<Self> {
        let moments = doc
            .moments
            .iter()
            .map(|m| m.iter().map(|c| Channel::from_document(doc.num_qubits, c)).collect())
            .collect::<Result<Vec<_>>>()?;
        Self::new(doc.num_qubits, moments)
    }
}

/// Textual noise description: `none`, `depol:p=P` or `pauli:m=M,mag=A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    None,
    Depolarizing { p: f64 },
    LocalPauli { locality: usize, magnitude: f64 },
}

impl NoiseSpec {
    pub fn layout(&self, circuit: &ParamCircuit, seed: u64) -> Result<NoiseLayout> {
        let (n, m) = (circuit.num_qubits(), circuit.num_moments());
        match *self {
            NoiseSpec::None => Ok(NoiseLayout::noiseless(n, m)),
            NoiseSpec::Depolarizing { p } => NoiseLayout::uniform_depolarizing(n, m, p),
            NoiseSpec::LocalPauli { locality, magnitude } => {
                NoiseLayout::sample_local_pauli(circuit, locality, magnitude, seed)
            }
        }
    }
}

impl FromStr for NoiseSpec {
    type Err = VcemError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("none") {
            return Ok(NoiseSpec::None);
        }
        let bad = |msg: &str| VcemError::Config(format!("noise spec {s:?}: {msg}"));
        let (kind, args) = s.split_once(':').ok_or_else(|| bad("expected kind:key=value,..."))?;
        let mut fields = HashMap::new();
        for kv in args.split(',') {
            let (k, v) = kv.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            let v: f64 = v.trim().parse().map_err(|_| bad("value is not a number"))?;
            fields.insert(k.trim().to_string(), v);
        }
        let mut take = |k: &str| fields.remove(k).ok_or_else(|| bad(&format!("missing {k}")));
        let spec = match kind.trim() {
            "depol" => NoiseSpec::Depolarizing { p: take("p")? },
            "pauli" => {
                let m = take("m")?;
                if m != 1.0 && m != 2.0 {
                    return Err(bad("m must be 1 or 2"));
                }
                NoiseSpec::LocalPauli {
                    locality: m as usize,
                    magnitude: take("mag")?,
                }
            }
            other => return Err(bad(&format!("unknown kind {other:?}"))),
        };
        if let Some(k) = fields.keys().next() {
            return Err(bad(&format!("unknown key {k:?}")));
        }
        Ok(spec)
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseSpec::None => f.write_str("none"),
            NoiseSpec::Depolarizing { p } => write!(f, "depol:p={p}"),
            NoiseSpec::LocalPauli { locality, magnitude } => write!(f, "pauli:m={locality},mag={magnitude}"),
        }
    }
}

/// A random Pauli channel on one or two qubits: each non-identity term gets a
/// uniform weight in `[0, magnitude]` and the identity takes the rest.
pub fn sample_pauli_channel(n: usize, support: &[usize], magnitude: f64, seed: u64) -> Result<PauliChannel> {
    if !(1..=2).contains(&support.len()) {
        return Err(VcemError::invalid(format!("support of size {} must be 1 or 2", support.len())));
    }
    if !(magnitude.is_finite() && magnitude >= 0.0) {
        return Err(VcemError::invalid(format!("magnitude {magnitude} must be finite and >= 0")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::new();
    let mut rest = 1.0;
    for s in PauliString::all(support.len()).into_iter().skip(1) {
        let p = if magnitude == 0.0 { 0.0 } else { rng.gen_range(0.0..=magnitude) };
        rest -= p;
        terms.push((p, s));
    }
    if rest < 0.5 {
        return Err(VcemError::InvalidChannel(format!(
            "identity probability {rest} is below 1/2 for magnitude {magnitude}"
        )));
    }
    terms.insert(0, (rest, PauliString::identity(support.len())));
    PauliChannel::new(n, support.to_vec(), terms)
}

/// Conjugates every term of `ch` by a Clifford map.
pub fn conjugate_channel(ch: &PauliChannel, clifford: &CliffordTableau) -> Result<PauliChannel> {
    ch.conjugate(clifford)
}

/// The single channel at the end of the circuit obtained by pushing every
/// moment's noise through the Clifford parts of the later moments and
/// composing. All-depolarizing layouts stay depolarizing.
pub fn effective_end_channel(layout: &NoiseLayout, circuit: &ParamCircuit) -> Result<Channel> {
    layout.check_aligned(circuit)?;
    let n = circuit.num_qubits();
    let channels: Vec<&Channel> = layout.channels().collect();
    if !channels.is_empty() && channels.iter().all(|c| matches!(c, Channel::Depolarizing(_))) {
        let ps: Vec<f64> = channels
            .iter()
            .map(|c| match c {
                Channel::Depolarizing(d) => d.p(),
                _ => unreachable!(),
            })
            .collect();
        return Ok(Channel::Depolarizing(DepolarizingChannel::new(n, compose_depolarizing(&ps)?)?));
    }
    let tableaux = CliffordTableau::moments_of(circuit);
    // Walk backwards, keeping the Clifford map of everything after moment q.
    let mut later = CliffordTableau::identity(n);
    let mut pushed: Vec<PauliChannel> = Vec::new();
    for q in (0..layout.num_moments()).rev() {
        for ch in layout.moments()[q].iter().rev() {
            pushed.push(ch.as_pauli()?.conjugate(&later)?);
        }
        later = tableaux[q].then(&later)?;
    }
    let mut total = PauliChannel::identity(n);
    for ch in pushed.iter().rev() {
        total = total.compose(ch)?;
    }
    Ok(Channel::Pauli(total))
}

/// χ-factors of the effective end channel for each observable, computed by
/// pulling the observables back through the Clifford moments instead of
/// building the channel.
pub fn effective_chi_factors(layout: &NoiseLayout, circuit: &ParamCircuit, observables: &[PauliString]) -> Result<Vec<f64>> {
    layout.check_aligned(circuit)?;
    observables
        .iter()
        .map(|s| {
            VcemError::check_size(circuit.num_qubits(), s.num_qubits())?;
            let mut pulled = s.clone();
            let mut chi = 1.0;
            for q in (0..layout.num_moments()).rev() {
                for ch in &layout.moments()[q] {
                    chi *= ch.chi_factor(&pulled)?;
                }
                pulled = conjugate_moment_adjoint(&circuit.moments()[q], &pulled);
            }
            Ok(chi)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_ghz_circuit, build_graph_circuit, transpile};
    use crate::graph::Graph;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    /// The two-qubit end-of-circuit channel used in the GHZ examples.
    fn ghz_end_channel() -> PauliChannel {
        let terms = vec![
            (0.55, ps("II")),
            (0.01, ps("XX")),
            (0.02, ps("ZZ")),
            (0.2, ps("ZI")),
            (0.2, ps("IZ")),
            (0.01, ps("XI")),
            (0.01, ps("IX")),
        ];
        PauliChannel::from_full_terms(2, terms).unwrap()
    }

    #[test]
    fn chi_factor_examples() {
        let ch = ghz_end_channel();
        assert!((ch.chi_factor(&ps("XX")).unwrap() - 0.2).abs() < 1e-12);
        assert!((ch.chi_factor(&ps("ZZ")).unwrap() - 0.96).abs() < 1e-12);
        assert_eq!(PauliChannel::identity(2).chi_factor(&ps("XY")).unwrap(), 1.0);
        assert_eq!(ch.chi_factor(&ps("II")).unwrap(), 1.0);
        assert!(ch.chi_factor(&ps("X")).is_err());
    }

    #[test]
    fn rejects_bad_probabilities() {
        assert!(PauliChannel::from_full_terms(1, vec![(0.5, ps("I")), (0.6, ps("X"))]).is_err());
        assert!(PauliChannel::from_full_terms(1, vec![(1.1, ps("I")), (-0.1, ps("X"))]).is_err());
        assert!(PauliChannel::new(2, vec![0, 0], vec![(1.0, ps("II"))]).is_err());
    }

    #[test]
    fn depolarizing_expansion() {
        let x = ps("X");
        let ch = DepolarizingChannel::new(1, 0.2).unwrap().as_pauli().unwrap();
        assert!((ch.chi_factor(&x).unwrap() - 0.8).abs() < 1e-15);
        let zero = DepolarizingChannel::new(2, 0.0).unwrap().as_pauli().unwrap();
        assert_eq!(zero.identity_probability(), 1.0);
        let full = DepolarizingChannel::new(3, 1.0).unwrap().as_pauli().unwrap();
        for s in PauliString::all(3).iter().skip(1) {
            assert!(full.chi_factor(s).unwrap().abs() < 1e-15);
        }
        assert!(DepolarizingChannel::new(4, 0.1).unwrap().as_pauli().is_err());
        assert!(DepolarizingChannel::new(1, 1.5).is_err());
    }

    #[test]
    fn depolarizing_composition() {
        assert!((compose_depolarizing(&[0.2, 0.2]).unwrap() - 0.36).abs() < 1e-15);
        assert_eq!(compose_depolarizing(&[0.37]).unwrap(), 0.37);
        // 1 - 0.9 * 0.8 * 0.7
        assert!((compose_depolarizing(&[0.1, 0.2, 0.3]).unwrap() - 0.496).abs() < 1e-15);
        assert!(compose_depolarizing(&[0.1, -0.2]).is_err());
    }

    #[test]
    fn hadamard_turns_x_flips_into_z_flips() {
        let h = CliffordTableau::from_dense(&dense::hadamard()).unwrap();
        let ch = PauliChannel::flip(&ps("X"), 0.3).unwrap();
        assert_eq!(ch.conjugate(&h).unwrap(), PauliChannel::flip(&ps("Z"), 0.3).unwrap());
        assert_eq!(ch.conjugate(&CliffordTableau::identity(1)).unwrap(), ch);
    }

    #[test]
    fn cz_conjugation_matches_dense_superoperator() {
        let ch = ghz_end_channel();
        let cz = dense::cz();
        let conj = ch.conjugate(&CliffordTableau::from_dense(&cz).unwrap()).unwrap();
        // Dense oracle: U (Σ p P ρ P) U† applied to U† ρ U for basis inputs.
        for r in 0..4 {
            for c in 0..4 {
                let mut rho = CMatrix::zeros(4, 4);
                rho[(r, c)] = dense::ONE;
                let inner = cz.adjoint() * &rho * &cz;
                let expect = &cz * Channel::Pauli(ch.clone()).apply_dense(&inner).unwrap() * cz.adjoint();
                let got = Channel::Pauli(conj.clone()).apply_dense(&rho).unwrap();
                assert!(dense::max_abs_diff(&got, &expect) < 1e-14);
            }
        }
    }

    #[test]
    fn pauli_channels_are_self_adjoint() {
        let ch = Channel::Pauli(ghz_end_channel());
        let a = CMatrix::from_fn(4, 4, |r, c| Complex64::new((r * 3 + c) as f64 * 0.1, r as f64 - c as f64));
        let b = CMatrix::from_fn(4, 4, |r, c| Complex64::new((r + c) as f64, 0.5 * (c * c) as f64));
        let lhs = dense::trace(&(a.adjoint() * ch.apply_dense(&b).unwrap()));
        let rhs = dense::trace(&(ch.apply_dense(&a).unwrap().adjoint() * b));
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn composition_convolves() {
        let a = PauliChannel::flip(&ps("XI"), 0.1).unwrap();
        let b = PauliChannel::flip(&ps("XZ"), 0.2).unwrap();
        let c = a.compose(&b).unwrap();
        assert!((c.probability(&ps("II")) - 0.72).abs() < 1e-15);
        assert!((c.probability(&ps("XI")) - 0.08).abs() < 1e-15);
        assert!((c.probability(&ps("XZ")) - 0.18).abs() < 1e-15);
        assert!((c.probability(&ps("IZ")) - 0.02).abs() < 1e-15);
        for s in PauliString::all(2) {
            let prod = a.chi_factor(&s).unwrap() * b.chi_factor(&s).unwrap();
            assert!((c.chi_factor(&s).unwrap() - prod).abs() < 1e-14);
        }
    }

    #[test]
    fn sampled_channels() {
        let ch = sample_pauli_channel(3, &[1], 0.01, 7).unwrap();
        assert_eq!(ch.terms().len(), 4);
        assert!(ch.terms().iter().skip(1).all(|(p, _)| (0.0..=0.01).contains(p)));
        assert!(ch.identity_probability() >= 0.97);
        assert_eq!(ch, sample_pauli_channel(3, &[1], 0.01, 7).unwrap());
        assert_ne!(ch, sample_pauli_channel(3, &[1], 0.01, 8).unwrap());
        assert_eq!(sample_pauli_channel(3, &[0, 2], 0.0, 1).unwrap().identity_probability(), 1.0);
        assert!(sample_pauli_channel(3, &[0, 2], 0.2, 1).is_err());
        assert!(sample_pauli_channel(3, &[0, 1, 2], 0.01, 1).is_err());
    }

    #[test]
    fn noise_specs_parse() {
        assert_eq!("none".parse::<NoiseSpec>().unwrap(), NoiseSpec::None);
        assert_eq!("depol:p=0.2".parse::<NoiseSpec>().unwrap(), NoiseSpec::Depolarizing { p: 0.2 });
        assert_eq!(
            "pauli:m=2,mag=0.01".parse::<NoiseSpec>().unwrap(),
            NoiseSpec::LocalPauli { locality: 2, magnitude: 0.01 }
        );
        for bad in ["pauli:m=3,mag=0.1", "depol:q=0.1", "foo:p=1", "depol", "pauli:m=1"] {
            assert!(bad.parse::<NoiseSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn local_layouts_cover_the_register() {
        let c = transpile(&build_graph_circuit(&Graph::line(4).unwrap()).unwrap()).unwrap();
        let l1 = NoiseLayout::from_spec("pauli:m=1,mag=0.01", &c, 3).unwrap();
        assert_eq!(l1.num_moments(), c.num_moments());
        assert!(l1.moments().iter().all(|m| m.len() == 4));
        let l2 = NoiseLayout::from_spec("pauli:m=2,mag=0.01", &c, 3).unwrap();
        let two_local = l2
            .channels()
            .filter(|ch| matches!(ch, Channel::Pauli(p) if p.support().len() == 2))
            .count();
        assert_eq!(two_local, 3);
        // Nested registers share channels on common supports.
        let c5 = transpile(&build_graph_circuit(&Graph::line(5).unwrap()).unwrap()).unwrap();
        let l5 = NoiseLayout::from_spec("pauli:m=1,mag=0.01", &c5, 3).unwrap();
        let first = |l: &NoiseLayout| match &l.moments()[0][0] {
            Channel::Pauli(p) => p.terms().to_vec(),
            _ => unreachable!(),
        };
        assert_eq!(first(&l1), first(&l5));
    }

    #[test]
    fn layout_document_round_trip() {
        let c = transpile(&build_ghz_circuit(2).unwrap()).unwrap();
        let mut l = NoiseLayout::from_spec("pauli:m=2,mag=0.01", &c, 11).unwrap();
        l.moments[0].push(Channel::Depolarizing(DepolarizingChannel::new(2, 0.1).unwrap()));
        l.moments[1].push(Channel::Kraus {
            qubits: vec![1],
            channel: GenericChannel::amplitude_damping(0.1).unwrap(),
        });
        let text = serde_json::to_string(&l.to_document()).unwrap();
        let back = NoiseLayout::from_document(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, l);
    }

    #[test]
    fn effective_channel_of_single_moment_is_the_channel() {
        let c = transpile(&build_ghz_circuit(2).unwrap()).unwrap();
        let ch = ghz_end_channel();
        let mut moments = vec![Vec::new(); c.num_moments()];
        *moments.last_mut().unwrap() = vec![Channel::Pauli(ch.clone())];
        let layout = NoiseLayout::new(2, moments).unwrap();
        assert_eq!(effective_end_channel(&layout, &c).unwrap(), Channel::Pauli(ch));
    }

    #[test]
    fn all_depolarizing_layout_stays_depolarizing() {
        let c = transpile(&build_graph_circuit(&Graph::line(3).unwrap()).unwrap()).unwrap();
        let layout = NoiseLayout::uniform_depolarizing(3, c.num_moments(), 0.01).unwrap();
        let expect = compose_depolarizing(&vec![0.01; c.num_moments()]).unwrap();
        match effective_end_channel(&layout, &c).unwrap() {
            Channel::Depolarizing(d) => assert!((d.p() - expect).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn chi_path_matches_built_channel() {
        let c = transpile(&build_graph_circuit(&Graph::line(3).unwrap()).unwrap()).unwrap();
        let layout = NoiseLayout::from_spec("pauli:m=2,mag=0.05", &c, 5).unwrap();
        let Channel::Pauli(end) = effective_end_channel(&layout, &c).unwrap() else {
            panic!("expected a Pauli channel")
        };
        let all = PauliString::all(3);
        let fast = effective_chi_factors(&layout, &c, &all).unwrap();
        for (s, chi) in all.iter().zip(fast) {
            assert!((end.chi_factor(s).unwrap() - chi).abs() < 1e-12, "{s}");
        }
    }

    #[test]
    fn kraus_layouts_have_no_chi_factors() {
        let c = transpile(&build_ghz_circuit(2).unwrap()).unwrap();
        let mut moments = vec![Vec::new(); c.num_moments()];
        moments[0].push(Channel::Kraus {
            qubits: vec![0],
            channel: GenericChannel::amplitude_damping(0.1).unwrap(),
        });
        let layout = NoiseLayout::new(2, moments).unwrap();
        assert!(matches!(
            effective_chi_factors(&layout, &c, &[ps("XX")]),
            Err(VcemError::InvalidChannel(_))
        ));
    }
}
