//! Stabilizer-preparation circuits and their transpilation into the native
//! basis {Rz, Rx, Rzx} with shared variational parameters.
//!
//! A native gate applies `exp(-i (φ + θ_k + ε_k)/2 · P)` where `P` is Z, X
//! or Z⊗X, `φ` is a multiple of π/2 (the Clifford offset), `θ_k` the
//! variational parameter of the gate's shared key and `ε_k` its frozen
//! coherent error.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dense::{self, CMatrix};
use crate::error::{Result, VcemError};
use crate::graph::Graph;
use crate::pauli::{Pauli, PauliString};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateKind {
    Rz,
    Rx,
    Rzx,
}

impl GateKind {
    pub const ALL: [GateKind; 3] = [GateKind::Rz, GateKind::Rx, GateKind::Rzx];

    pub fn arity(self) -> usize {
        match self {
            GateKind::Rz | GateKind::Rx => 1,
            GateKind::Rzx => 2,
        }
    }

    /// Pauli generator on the gate's own support.
    pub fn local_generator(self) -> PauliString {
        match self {
            GateKind::Rz => PauliString::from_paulis(&[Pauli::Z]),
            GateKind::Rx => PauliString::from_paulis(&[Pauli::X]),
            GateKind::Rzx => PauliString::from_paulis(&[Pauli::Z, Pauli::X]),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Rz => "Rz",
            GateKind::Rx => "Rx",
            GateKind::Rzx => "Rzx",
        }
    }
}

impl FromStr for GateKind {
    type Err = VcemError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Rz" => Ok(GateKind::Rz),
            "Rx" => Ok(GateKind::Rx),
            "Rzx" => Ok(GateKind::Rzx),
            other => Err(VcemError::Parse(format!("unknown gate kind {other:?}"))),
        }
    }
}

/// Identifier of a shared variational slot: one per (kind, qubit) for
/// single-qubit gates and per (kind, ordered pair) for Rzx.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamKey {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
}

impl fmt::Display for ParamKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[", self.kind.name())?;
        for (i, q) in self.qubits.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{q}")?;
        }
        f.write_str("]")
    }
}

impl FromStr for ParamKey {
    type Err = VcemError;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || VcemError::Parse(format!("bad parameter key {s:?}"));
        let (kind, rest) = s.split_once('[').ok_or_else(bad)?;
        let inner = rest.strip_suffix(']').ok_or_else(bad)?;
        let qubits = inner
            .split(',')
            .map(|q| q.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        let kind: GateKind = kind.parse()?;
        if qubits.len() != kind.arity() {
            return Err(bad());
        }
        Ok(ParamKey { kind, qubits })
    }
}

/// Gates of the abstract (pre-transpilation) circuits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceGate {
    H(usize),
    Cz(usize, usize),
    /// Control first.
    Cnot(usize, usize),
}

impl SourceGate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            SourceGate::H(q) => vec![q],
            SourceGate::Cz(a, b) | SourceGate::Cnot(a, b) => vec![a, b],
        }
    }

    pub fn matrix(&self) -> CMatrix {
        match self {
            SourceGate::H(_) => dense::hadamard(),
            SourceGate::Cz(..) => dense::cz(),
            SourceGate::Cnot(..) => dense::cnot(),
        }
    }

    /// Native decomposition as a list of sub-moments of
    /// `(kind, qubits, quarter turns)`. Each decomposition equals the source
    /// gate up to a global phase.
    fn native_layers(&self) -> Vec<Vec<(GateKind, Vec<usize>, i8)>> {
        use GateKind::*;
        match *self {
            SourceGate::H(q) => vec![
                vec![(Rz, vec![q], 1)],
                vec![(Rx, vec![q], 1)],
                vec![(Rz, vec![q], -3)],
            ],
            SourceGate::Cnot(c, t) => vec![
                vec![(Rz, vec![c], 1), (Rx, vec![t], 1)],
                vec![(Rzx, vec![c, t], -1)],
            ],
            SourceGate::Cz(a, b) => vec![
                vec![(Rz, vec![b], 1)],
                vec![(Rx, vec![b], 1)],
                vec![(Rz, vec![b], -3)],
                vec![(Rz, vec![a], 1), (Rx, vec![b], 1)],
                vec![(Rzx, vec![a, b], -1)],
                vec![(Rz, vec![b], 1)],
                vec![(Rx, vec![b], 1)],
                vec![(Rz, vec![b], -3)],
            ],
        }
    }
}

/// A circuit of H / CZ / CNOT layers.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceCircuit {
    n: usize,
    moments: Vec<Vec<SourceGate>>,
}

impl SourceCircuit {
    pub fn new(n: usize, moments: Vec<Vec<SourceGate>>) -> Result<Self> {
        for m in &moments {
            check_disjoint(n, m.iter().map(SourceGate::qubits))?;
        }
        Ok(SourceCircuit { n, moments })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn moments(&self) -> &[Vec<SourceGate>] {
        &self.moments
    }

    /// Dense unitary of the whole circuit (small registers only).
    pub fn unitary(&self) -> Result<CMatrix> {
        check_dense_size(self.n)?;
        let mut u = dense::identity(1 << self.n);
        for gate in self.moments.iter().flatten() {
            u = dense::embed(&gate.matrix(), &gate.qubits(), self.n) * u;
        }
        Ok(u)
    }
}

fn check_disjoint(n: usize, supports: impl Iterator<Item = Vec<usize>>) -> Result<()> {
    let mut used = vec![false; n];
    for qubits in supports {
        for q in qubits {
            if q >= n {
                return Err(VcemError::invalid(format!("qubit {q} outside register of {n}")));
            }
            if std::mem::replace(&mut used[q], true) {
                return Err(VcemError::invalid(format!("qubit {q} used twice in one moment")));
            }
        }
    }
    Ok(())
}

fn check_dense_size(n: usize) -> Result<()> {
    if n > 10 {
        Err(VcemError::ResourceLimit(format!("dense unitary limited to 10 qubits, got {n}")))
    } else {
        Ok(())
    }
}

/// One H per qubit followed by CZ layers packed by first-fit edge colouring.
pub fn build_graph_circuit(g: &Graph) -> Result<SourceCircuit> {
    g.validate()?;
    let n = g.num_nodes();
    let mut moments = vec![(0..n).map(SourceGate::H).collect::<Vec<_>>()];
    for class in g.greedy_edge_coloring() {
        moments.push(class.into_iter().map(|(u, v)| SourceGate::Cz(u, v)).collect());
    }
    SourceCircuit::new(n, moments)
}

/// H on qubit 0 followed by the CNOT chain `(i, i+1)`.
pub fn build_ghz_circuit(n: usize) -> Result<SourceCircuit> {
    if n < 2 {
        return Err(VcemError::invalid(format!("GHZ circuit needs at least 2 qubits, got {n}")));
    }
    let mut moments = vec![vec![SourceGate::H(0)]];
    for i in 0..n - 1 {
        moments.push(vec![SourceGate::Cnot(i, i + 1)]);
    }
    SourceCircuit::new(n, moments)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NativeGate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    /// Clifford offset in units of π/2.
    pub quarter_turns: i8,
    /// Index into the circuit's parameter keys.
    pub param: usize,
}

impl NativeGate {
    pub fn clifford_angle(&self) -> f64 {
        self.quarter_turns as f64 * FRAC_PI_2
    }

    /// Generator embedded in an `n`-qubit register.
    pub fn generator(&self, n: usize) -> PauliString {
        self.kind
            .local_generator()
            .embed(n, &self.qubits)
            .expect("gate qubits validated at construction")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Moment {
    pub gates: Vec<NativeGate>,
}

/// `exp(-i (φ + θ + ε)/2 · P)` on the gate's support.
pub fn gate_unitary(gate: &NativeGate, theta: f64, epsilon: f64) -> Result<CMatrix> {
    if !theta.is_finite() || !epsilon.is_finite() {
        return Err(VcemError::NonFinite(format!("gate angle θ={theta}, ε={epsilon}")));
    }
    let generator = gate.kind.local_generator().to_dense();
    Ok(dense::involution_exp(&generator, gate.clifford_angle() + theta + epsilon))
}

/// A transpiled circuit with shared parameters and frozen coherent errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamCircuit {
    n: usize,
    moments: Vec<Moment>,
    param_keys: Vec<ParamKey>,
    epsilons: Vec<f64>,
    seed: Option<u64>,
}

impl ParamCircuit {
    pub fn new(n: usize, moments: Vec<Moment>, param_keys: Vec<ParamKey>, epsilons: Vec<f64>) -> Result<Self> {
        VcemError::check_size(param_keys.len(), epsilons.len())?;
        let mut seen = HashMap::new();
        for (i, key) in param_keys.iter().enumerate() {
            if seen.insert(key.clone(), i).is_some() {
                return Err(VcemError::invalid(format!("duplicate parameter key {key}")));
            }
        }
        for m in &moments {
            check_disjoint(n, m.gates.iter().map(|g| g.qubits.clone()))?;
            for g in &m.gates {
                if g.qubits.len() != g.kind.arity() {
                    return Err(VcemError::invalid(format!("{} acting on {:?}", g.kind.name(), g.qubits)));
                }
                let key = param_keys
                    .get(g.param)
                    .ok_or_else(|| VcemError::invalid(format!("gate parameter index {} out of range", g.param)))?;
                if key.kind != g.kind || key.qubits != g.qubits {
                    return Err(VcemError::invalid(format!(
                        "gate {} on {:?} bound to key {key}",
                        g.kind.name(),
                        g.qubits
                    )));
                }
            }
        }
        if epsilons.iter().any(|e| !e.is_finite()) {
            return Err(VcemError::NonFinite("coherent error".into()));
        }
        Ok(ParamCircuit { n, moments, param_keys, epsilons, seed: None })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn moments(&self) -> &[Moment] {
        &self.moments
    }

    pub fn num_moments(&self) -> usize {
        self.moments.len()
    }

    pub fn param_keys(&self) -> &[ParamKey] {
        &self.param_keys
    }

    pub fn num_params(&self) -> usize {
        self.param_keys.len()
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Gate family of each parameter key.
    pub fn param_kinds(&self) -> Vec<GateKind> {
        self.param_keys.iter().map(|k| k.kind).collect()
    }

    /// Gates in application order.
    pub fn gates(&self) -> impl Iterator<Item = &NativeGate> {
        self.moments.iter().flat_map(|m| m.gates.iter())
    }

    pub fn gate_count(&self) -> usize {
        self.moments.iter().map(|m| m.gates.len()).sum()
    }

    pub fn with_epsilons(mut self, epsilons: Vec<f64>) -> Result<Self> {
        VcemError::check_size(self.param_keys.len(), epsilons.len())?;
        if epsilons.iter().any(|e| !e.is_finite()) {
            return Err(VcemError::NonFinite("coherent error".into()));
        }
        self.epsilons = epsilons;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    /// Parameters that cancel the coherent errors exactly.
    pub fn ideal_theta(&self) -> Vec<f64> {
        self.epsilons.iter().map(|e| -e).collect()
    }

    pub fn check_theta(&self, theta: &[f64]) -> Result<()> {
        VcemError::check_size(self.num_params(), theta.len())?;
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(VcemError::NonFinite("parameter vector".into()));
        }
        Ok(())
    }

    /// Full rotation angle `φ + θ_k + ε_k` of every gate in application order.
    pub fn gate_angles(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        Ok(self
            .gates()
            .map(|g| g.clifford_angle() + theta[g.param] + self.epsilons[g.param])
            .collect())
    }

    /// Dense circuit unitary at the given parameters (small registers only).
    pub fn unitary(&self, theta: &[f64]) -> Result<CMatrix> {
        check_dense_size(self.n)?;
        self.check_theta(theta)?;
        let mut u = dense::identity(1 << self.n);
        for g in self.gates() {
            let local = gate_unitary(g, theta[g.param], self.epsilons[g.param])?;
            u = dense::embed(&local, &g.qubits, self.n) * u;
        }
        Ok(u)
    }

    pub fn to_document(&self) -> CircuitDocument {
        CircuitDocument {
            num_qubits: self.n,
            moments: self
                .moments
                .iter()
                .map(|m| {
                    m.gates
                        .iter()
                        .map(|g| GateDocument {
                            kind: g.kind,
                            qubits: g.qubits.clone(),
                            clifford_angle: g.clifford_angle(),
                            param_key: self.param_keys[g.param].to_string(),
                        })
                        .collect()
                })
                .collect(),
            param_keys: self.param_keys.iter().map(ToString::to_string).collect(),
            epsilons: self
                .param_keys
                .iter()
                .zip(&self.epsilons)
                .map(|(k, &e)| (k.to_string(), e))
                .collect(),
            seed: self.seed,
        }
    }

    pub fn from_document(doc: &CircuitDocument) -> Result<Self> {
        let param_keys = doc
            .param_keys
            .iter()
            .map(|k| k.parse())
            .collect::<Result<Vec<ParamKey>>>()?;
        let index: HashMap<&str, usize> = doc
            .param_keys
            .iter()
            .enumerate()
            .map(|(i, k)| (k.as_str(), i))
            .collect();
        let mut moments = Vec::with_capacity(doc.moments.len());
        for m in &doc.moments {
            let mut gates = Vec::with_capacity(m.len());
            for g in m {
                let turns = g.clifford_angle / FRAC_PI_2;
                if (turns - turns.round()).abs() > 1e-9 {
                    return Err(VcemError::invalid(format!(
                        "clifford angle {} is not a multiple of π/2",
                        g.clifford_angle
                    )));
                }
                let param = *index
                    .get(g.param_key.as_str())
                    .ok_or_else(|| VcemError::invalid(format!("unknown parameter key {}", g.param_key)))?;
                gates.push(NativeGate {
                    kind: g.kind,
                    qubits: g.qubits.clone(),
                    quarter_turns: turns.round() as i8,
                    param,
                });
            }
            moments.push(Moment { gates });
        }
        let epsilons = doc
            .param_keys
            .iter()
            .map(|k| {
                doc.epsilons
                    .get(k)
                    .copied()
                    .ok_or_else(|| VcemError::invalid(format!("missing epsilon for {k}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ParamCircuit::new(doc.num_qubits, moments, param_keys, epsilons)?.with_seed(doc.seed))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateDocument {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub clifford_angle: f64,
    pub param_key: String,
}

/// Serialized form of a [`ParamCircuit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitDocument {
    pub num_qubits: usize,
    pub moments: Vec<Vec<GateDocument>>,
    pub param_keys: Vec<String>,
    pub epsilons: BTreeMap<String, f64>,
    pub seed: Option<u64>,
}

/// Replaces every source gate by its native decomposition. Source moments
/// expand into as many native moments as their deepest decomposition.
pub fn transpile(source: &SourceCircuit) -> Result<ParamCircuit> {
    let mut keys: Vec<ParamKey> = Vec::new();
    let mut key_index: HashMap<ParamKey, usize> = HashMap::new();
    let mut moments = Vec::new();
    for layer in source.moments() {
        let expansions: Vec<_> = layer.iter().map(SourceGate::native_layers).collect();
        let depth = expansions.iter().map(Vec::len).max().unwrap_or(0);
        for d in 0..depth {
            let mut gates = Vec::new();
            for spec in expansions.iter().filter_map(|e| e.get(d)) {
                for (kind, qubits, turns) in spec {
                    let key = ParamKey { kind: *kind, qubits: qubits.clone() };
                    let param = *key_index.entry(key.clone()).or_insert_with(|| {
                        keys.push(key);
                        keys.len() - 1
                    });
                    gates.push(NativeGate {
                        kind: *kind,
                        qubits: qubits.clone(),
                        quarter_turns: *turns,
                        param,
                    });
                }
            }
            moments.push(Moment { gates });
        }
    }
    let epsilons = vec![0.0; keys.len()];
    ParamCircuit::new(source.num_qubits(), moments, keys, epsilons)
}

/// One uniform draw in `[-magnitude, magnitude]` per parameter key, in key order.
pub fn sample_coherent_errors(c: &ParamCircuit, magnitude: f64, seed: u64) -> Result<Vec<f64>> {
    check_magnitude(magnitude)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..c.num_params()).map(|_| draw(&mut rng, magnitude)).collect())
}

/// Like [`sample_coherent_errors`] but each key's value depends only on
/// `(seed, key)`, so circuits on nested registers share their common errors.
pub fn sample_coherent_errors_by_key(c: &ParamCircuit, magnitude: f64, seed: u64) -> Result<Vec<f64>> {
    check_magnitude(magnitude)?;
    Ok(c.param_keys()
        .iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(keyed_seed(seed, &k.to_string()));
            draw(&mut rng, magnitude)
        })
        .collect())
}

fn check_magnitude(magnitude: f64) -> Result<()> {
    if magnitude.is_finite() && magnitude >= 0.0 {
        Ok(())
    } else {
        Err(VcemError::invalid(format!("coherent error magnitude {magnitude} must be finite and >= 0")))
    }
}

fn draw(rng: &mut ChaCha8Rng, magnitude: f64) -> f64 {
    if magnitude == 0.0 {
        0.0
    } else {
        rng.gen_range(-magnitude..=magnitude)
    }
}

/// FNV-1a of `label`, mixed with `seed`.
pub(crate) fn keyed_seed(seed: u64, label: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn graph_circuit_layers() {
        let k2 = build_graph_circuit(&Graph::line(2).unwrap()).unwrap();
        assert_eq!(
            k2.moments(),
            &[vec![SourceGate::H(0), SourceGate::H(1)], vec![SourceGate::Cz(0, 1)]]
        );
        let empty = build_graph_circuit(&Graph::new(3, &[]).unwrap()).unwrap();
        assert_eq!(empty.moments().len(), 1);
        let grid = build_graph_circuit(&Graph::grid(2, 5).unwrap()).unwrap();
        let cz: usize = grid.moments()[1..].iter().map(Vec::len).sum();
        assert_eq!(cz, 13);
        assert!(grid.moments().len() - 1 <= 4);
    }

    #[test]
    fn ghz_circuit_layers() {
        let c = build_ghz_circuit(3).unwrap();
        assert_eq!(
            c.moments(),
            &[vec![SourceGate::H(0)], vec![SourceGate::Cnot(0, 1)], vec![SourceGate::Cnot(1, 2)]]
        );
        assert!(build_ghz_circuit(1).is_err());
    }

    #[test]
    fn hadamard_transpiles_with_shared_rz_key() {
        let src = SourceCircuit::new(1, vec![vec![SourceGate::H(0)]]).unwrap();
        let c = transpile(&src).unwrap();
        let gates: Vec<_> = c.gates().collect();
        assert_eq!(gates.len(), 3);
        assert_eq!((gates[0].kind, gates[0].clifford_angle()), (GateKind::Rz, PI / 2.0));
        assert_eq!((gates[1].kind, gates[1].clifford_angle()), (GateKind::Rx, PI / 2.0));
        assert_eq!((gates[2].kind, gates[2].clifford_angle()), (GateKind::Rz, -1.5 * PI));
        assert_eq!(gates[0].param, gates[2].param);
        assert_eq!(c.num_params(), 2);
        let u = c.unitary(&[0.0, 0.0]).unwrap();
        assert!((dense::phase_overlap(&u, &dense::hadamard()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_qubit_decompositions_match_source() {
        for gate in [SourceGate::Cz(0, 1), SourceGate::Cnot(0, 1), SourceGate::Cz(1, 0), SourceGate::Cnot(1, 0)] {
            let src = SourceCircuit::new(2, vec![vec![gate]]).unwrap();
            let c = transpile(&src).unwrap();
            let u = c.unitary(&vec![0.0; c.num_params()]).unwrap();
            let v = src.unitary().unwrap();
            assert!((dense::phase_overlap(&u, &v) - 1.0).abs() < 1e-12, "{gate:?}");
        }
    }

    #[test]
    fn empty_circuit_transpiles_to_nothing() {
        let c = transpile(&SourceCircuit::new(2, vec![]).unwrap()).unwrap();
        assert_eq!(c.num_moments(), 0);
        assert_eq!(c.num_params(), 0);
    }

    #[test]
    fn gate_unitary_examples() {
        let rx = NativeGate { kind: GateKind::Rx, qubits: vec![0], quarter_turns: 2, param: 0 };
        let u = gate_unitary(&rx, 0.0, 0.0).unwrap();
        let expected = dense::pauli_x() * Complex64::new(0.0, -1.0);
        assert!(dense::max_abs_diff(&u, &expected) < 1e-15);

        let rz = NativeGate { kind: GateKind::Rz, qubits: vec![0], quarter_turns: 1, param: 0 };
        let u = gate_unitary(&rz, -0.003, 0.003).unwrap();
        let expected = dense::involution_exp(&dense::pauli_z(), PI / 2.0);
        assert!(dense::max_abs_diff(&u, &expected) < 1e-15);

        assert!(gate_unitary(&rz, f64::NAN, 0.0).is_err());
    }

    use num_complex::Complex64;

    #[test]
    fn param_keys_round_trip() {
        for s in ["Rz[3]", "Rx[0]", "Rzx[2,5]"] {
            assert_eq!(s.parse::<ParamKey>().unwrap().to_string(), s);
        }
        assert!("Rzx[1]".parse::<ParamKey>().is_err());
        assert!("Ry[1]".parse::<ParamKey>().is_err());
    }

    #[test]
    fn coherent_error_sampling() {
        let c = transpile(&build_graph_circuit(&Graph::line(4).unwrap()).unwrap()).unwrap();
        assert!(sample_coherent_errors(&c, 0.0, 7).unwrap().iter().all(|&e| e == 0.0));
        let a = sample_coherent_errors(&c, 0.01, 7).unwrap();
        assert_eq!(a, sample_coherent_errors(&c, 0.01, 7).unwrap());
        assert!(a.iter().all(|e| e.abs() <= 0.01));
        assert_ne!(a, sample_coherent_errors(&c, 0.01, 8).unwrap());
        assert!(sample_coherent_errors(&c, -0.1, 7).is_err());
    }

    #[test]
    fn keyed_sampling_is_nested() {
        let small = transpile(&build_graph_circuit(&Graph::line(4).unwrap()).unwrap()).unwrap();
        let large = transpile(&build_graph_circuit(&Graph::line(6).unwrap()).unwrap()).unwrap();
        let es = sample_coherent_errors_by_key(&small, 0.01, 3).unwrap();
        let el = sample_coherent_errors_by_key(&large, 0.01, 3).unwrap();
        for (k, e) in small.param_keys().iter().zip(&es) {
            let j = large.param_keys().iter().position(|x| x == k).unwrap();
            assert_eq!(*e, el[j]);
        }
    }

    #[test]
    fn json_round_trip() {
        let c = transpile(&build_graph_circuit(&Graph::grid(2, 2).unwrap()).unwrap()).unwrap();
        let eps = sample_coherent_errors(&c, 0.01, 1).unwrap();
        let c = c.with_epsilons(eps).unwrap().with_seed(Some(1));
        let back = ParamCircuit::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn constructor_rejects_bad_binding() {
        let key = ParamKey { kind: GateKind::Rz, qubits: vec![0] };
        let gate = NativeGate { kind: GateKind::Rx, qubits: vec![0], quarter_turns: 1, param: 0 };
        let err = ParamCircuit::new(1, vec![Moment { gates: vec![gate] }], vec![key], vec![0.0]);
        assert!(err.is_err());
        let g1 = NativeGate { kind: GateKind::Rz, qubits: vec![0], quarter_turns: 1, param: 0 };
        let key = ParamKey { kind: GateKind::Rz, qubits: vec![0] };
        let err = ParamCircuit::new(1, vec![Moment { gates: vec![g1.clone(), g1] }], vec![key], vec![0.0]);
        assert!(err.is_err());
    }
}
