//! Stabilizer cost functions, their gradients and a finite-difference Hessian.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::ParamCircuit;
use crate::error::{Result, VcemError};
use crate::noise::{effective_chi_factors, Channel, NoiseLayout};
use crate::pauli::{PauliString, StabilizerSet};
use crate::sim::{self, DensityMatrix, StateVector};

/// Default step of [`hessian_fd`] in radians.
pub const DEFAULT_HESSIAN_STEP: f64 = 1e-4;
/// Default step of [`finite_difference_gradient`] in radians.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub total: f64,
    /// `C_i = -⟨S_i⟩`, possibly rescaled.
    pub per_stabilizer: Vec<f64>,
    pub theta: Vec<f64>,
}

impl CostReport {
    fn new(per_stabilizer: Vec<f64>, theta: &[f64]) -> Self {
        CostReport {
            total: per_stabilizer.iter().sum(),
            per_stabilizer,
            theta: theta.to_vec(),
        }
    }
}

fn check_stabs(c: &ParamCircuit, stabs: &StabilizerSet) -> Result<()> {
    VcemError::check_size(c.num_qubits(), stabs.num_qubits())
}

fn pure_terms(psi: &StateVector, stabs: &StabilizerSet) -> Result<Vec<f64>> {
    stabs.generators().iter().map(|s| Ok(-psi.expectation(s)?)).collect()
}

fn mixed_terms(rho: &DensityMatrix, stabs: &StabilizerSet) -> Result<Vec<f64>> {
    stabs.generators().iter().map(|s| Ok(-rho.expectation(s)?)).collect()
}

/// `C(θ) = -Σ_i ⟨ψ(θ+ε)|S_i|ψ(θ+ε)⟩`.
pub fn cost(c: &ParamCircuit, theta: &[f64], stabs: &StabilizerSet) -> Result<CostReport> {
    check_stabs(c, stabs)?;
    let psi = sim::run_pure(c, theta)?;
    Ok(CostReport::new(pure_terms(&psi, stabs)?, theta))
}

/// `C̃(θ) = -Σ_i Tr(S_i N ρ_0)` from the interleaved density-matrix simulation.
pub fn noisy_cost(c: &ParamCircuit, theta: &[f64], layout: &NoiseLayout, stabs: &StabilizerSet) -> Result<CostReport> {
    check_stabs(c, stabs)?;
    let rho = sim::run_noisy(c, theta, layout)?;
    Ok(CostReport::new(mixed_terms(&rho, stabs)?, theta))
}

/// `Σ_i χ_i C_i(θ)` for given χ-factors, from a pure simulation.
pub fn chi_scaled_cost_with_factors(c: &ParamCircuit, theta: &[f64], chis: &[f64], stabs: &StabilizerSet) -> Result<CostReport> {
    VcemError::check_size(stabs.len(), chis.len())?;
    let base = cost(c, theta, stabs)?;
    let terms = base.per_stabilizer.iter().zip(chis).map(|(ci, chi)| ci * chi).collect();
    Ok(CostReport::new(terms, theta))
}

/// The noiseless cost with each term rescaled by the χ-factor of a channel
/// acting at the end of the circuit.
pub fn chi_scaled_cost(c: &ParamCircuit, theta: &[f64], end_channel: &Channel, stabs: &StabilizerSet) -> Result<CostReport> {
    let chis = stabs
        .generators()
        .iter()
        .map(|s| end_channel.chi_factor(s))
        .collect::<Result<Vec<_>>>()?;
    chi_scaled_cost_with_factors(c, theta, &chis, stabs)
}

/// `C̃^(P)(θ)`: the prediction of the effective end-of-circuit channel.
pub fn effective_cost(c: &ParamCircuit, theta: &[f64], layout: &NoiseLayout, stabs: &StabilizerSet) -> Result<CostReport> {
    let chis = effective_chi_factors(layout, c, stabs.generators())?;
    chi_scaled_cost_with_factors(c, theta, &chis, stabs)
}

/// `ΔC̃(θ) = C̃(θ) - C̃^(P)(θ)`.
pub fn delta_cost(c: &ParamCircuit, theta: &[f64], layout: &NoiseLayout, stabs: &StabilizerSet) -> Result<f64> {
    if !layout.is_pauli() {
        return Err(VcemError::InvalidChannel("remainder is defined for Pauli layouts only".into()));
    }
    Ok(noisy_cost(c, theta, layout, stabs)?.total - effective_cost(c, theta, layout, stabs)?.total)
}

/// A scalar function of the shared parameters.
pub trait Objective: Sync {
    fn num_params(&self) -> usize;

    fn value(&self, theta: &[f64]) -> Result<f64>;

    fn value_and_gradient(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// An objective that depends on `θ` only through the circuit's gate angles,
/// so that it can be differentiated gate by gate.
pub trait AngleObjective: Sync {
    fn circuit(&self) -> &ParamCircuit;

    fn value_at_angles(&self, angles: &[f64]) -> Result<f64>;
}

/// `∂f/∂θ_k = ½ Σ_{g: key k} [f(φ_g + π/2) - f(φ_g - π/2)]`, exact for
/// half-angle Pauli rotations. Shifted evaluations run in parallel and are
/// summed in gate order.
pub fn parameter_shift_gradient<F: AngleObjective + ?Sized>(f: &F, theta: &[f64]) -> Result<Vec<f64>> {
    let c = f.circuit();
    let angles = c.gate_angles(theta)?;
    let diffs = (0..angles.len())
        .into_par_iter()
        .map(|g| {
            let mut shifted = angles.clone();
            shifted[g] = angles[g] + FRAC_PI_2;
            let up = f.value_at_angles(&shifted)?;
            shifted[g] = angles[g] - FRAC_PI_2;
            let down = f.value_at_angles(&shifted)?;
            Ok(0.5 * (up - down))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut grad = vec![0.0; c.num_params()];
    for (gate, d) in c.gates().zip(diffs) {
        grad[gate.param] += d;
    }
    Ok(grad)
}

/// Central differences with step `h`.
pub fn finite_difference_gradient<F>(f: F, theta: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    check_step(h)?;
    let mut x = theta.to_vec();
    (0..theta.len())
        .map(|k| {
            x[k] = theta[k] + h;
            let up = f(&x)?;
            x[k] = theta[k] - h;
            let down = f(&x)?;
            x[k] = theta[k];
            Ok((up - down) / (2.0 * h))
        })
        .collect()
}

/// Symmetrized central-difference Hessian with step `h`.
pub fn hessian_fd<F>(f: F, theta: &[f64], h: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    check_step(h)?;
    let k = theta.len();
    let f0 = f(theta)?;
    let mut x = theta.to_vec();
    let mut eval = |shifts: &[(usize, f64)]| -> Result<f64> {
        for &(i, s) in shifts {
            x[i] += s;
        }
        let v = f(&x);
        for &(i, s) in shifts {
            x[i] -= s;
        }
        // Undo accumulated rounding.
        for &(i, _) in shifts {
            x[i] = theta[i];
        }
        v
    };
    let mut hess = DMatrix::zeros(k, k);
    for i in 0..k {
        let up = eval(&[(i, h)])?;
        let down = eval(&[(i, -h)])?;
        hess[(i, i)] = (up - 2.0 * f0 + down) / (h * h);
        for j in 0..i {
            let pp = eval(&[(i, h), (j, h)])?;
            let pm = eval(&[(i, h), (j, -h)])?;
            let mp = eval(&[(i, -h), (j, h)])?;
            let mm = eval(&[(i, -h), (j, -h)])?;
            let v = (pp - pm - mp + mm) / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok((&hess + hess.transpose()) * 0.5)
}

fn check_step(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(VcemError::invalid(format!("step {h} must be positive")))
    }
}

fn stabilizer_observable(stabs: &StabilizerSet) -> Vec<(f64, PauliString)> {
    stabs.generators().iter().map(|s| (-1.0, s.clone())).collect()
}

/// Noiseless cost evaluated on statevectors.
#[derive(Debug, Clone)]
pub struct PureCost {
    circuit: ParamCircuit,
    stabs: StabilizerSet,
    method: GradientMethod,
}

impl PureCost {
    /// Differentiates with the parameter-shift rule.
    pub fn new(circuit: ParamCircuit, stabs: StabilizerSet) -> Result<Self> {
        Self::with_method(circuit, stabs, GradientMethod::ParameterShift)
    }

    pub fn with_method(circuit: ParamCircuit, stabs: StabilizerSet, method: GradientMethod) -> Result<Self> {
        check_stabs(&circuit, &stabs)?;
        Ok(PureCost { circuit, stabs, method })
    }

    pub fn report(&self, theta: &[f64]) -> Result<CostReport> {
        cost(&self.circuit, theta, &self.stabs)
    }
}

impl AngleObjective for PureCost {
    fn circuit(&self) -> &ParamCircuit {
        &self.circuit
    }

    fn value_at_angles(&self, angles: &[f64]) -> Result<f64> {
        let psi = sim::run_pure_with_angles(&self.circuit, angles)?;
        Ok(pure_terms(&psi, &self.stabs)?.iter().sum())
    }
}

impl Objective for PureCost {
    fn num_params(&self) -> usize {
        self.circuit.num_params()
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        self.value_at_angles(&self.circuit.gate_angles(theta)?)
    }

    fn value_and_gradient(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        match self.method {
            GradientMethod::ParameterShift => Ok((self.value(theta)?, parameter_shift_gradient(self, theta)?)),
            GradientMethod::Adjoint => {
                let angles = self.circuit.gate_angles(theta)?;
                let obs = stabilizer_observable(&self.stabs);
                let (value, per_gate) = sim::pure_adjoint_gradient(&self.circuit, &angles, &obs)?;
                Ok((value, accumulate(&self.circuit, per_gate)))
            }
        }
    }
}

fn accumulate(c: &ParamCircuit, per_gate: Vec<f64>) -> Vec<f64> {
    let mut grad = vec![0.0; c.num_params()];
    for (gate, d) in c.gates().zip(per_gate) {
        grad[gate.param] += d;
    }
    grad
}

/// How [`PureCost`] and [`NoisyCost`] differentiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethod {
    ParameterShift,
    /// One forward and one backward pass (Heisenberg picture for density matrices).
    Adjoint,
}

/// Noisy cost evaluated on density matrices.
#[derive(Debug, Clone)]
pub struct NoisyCost {
    circuit: ParamCircuit,
    layout: NoiseLayout,
    stabs: StabilizerSet,
    method: GradientMethod,
}

impl NoisyCost {
    pub fn new(circuit: ParamCircuit, layout: NoiseLayout, stabs: StabilizerSet, method: GradientMethod) -> Result<Self> {
        check_stabs(&circuit, &stabs)?;
        layout.check_aligned(&circuit)?;
        Ok(NoisyCost {
            circuit,
            layout,
            stabs,
            method,
        })
    }

    pub fn report(&self, theta: &[f64]) -> Result<CostReport> {
        noisy_cost(&self.circuit, theta, &self.layout, &self.stabs)
    }
}

impl AngleObjective for NoisyCost {
    fn circuit(&self) -> &ParamCircuit {
        &self.circuit
    }

    fn value_at_angles(&self, angles: &[f64]) -> Result<f64> {
        let rho = sim::run_noisy_with_angles(&self.circuit, angles, &self.layout)?;
        Ok(mixed_terms(&rho, &self.stabs)?.iter().sum())
    }
}

impl Objective for NoisyCost {
    fn num_params(&self) -> usize {
        self.circuit.num_params()
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        self.value_at_angles(&self.circuit.gate_angles(theta)?)
    }

    fn value_and_gradient(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        match self.method {
            GradientMethod::ParameterShift => Ok((self.value(theta)?, parameter_shift_gradient(self, theta)?)),
            GradientMethod::Adjoint => {
                let angles = self.circuit.gate_angles(theta)?;
                let obs = stabilizer_observable(&self.stabs);
                let (value, per_gate) = sim::noisy_adjoint_gradient(&self.circuit, &angles, &self.layout, &obs)?;
                Ok((value, accumulate(&self.circuit, per_gate)))
            }
        }
    }
}

/// The remainder `ΔC̃` as a function of `θ`; χ-factors are fixed at construction.
#[derive(Debug, Clone)]
pub struct DeltaCost {
    circuit: ParamCircuit,
    layout: NoiseLayout,
    stabs: StabilizerSet,
    chis: Vec<f64>,
}

impl DeltaCost {
    pub fn new(circuit: ParamCircuit, layout: NoiseLayout, stabs: StabilizerSet) -> Result<Self> {
        check_stabs(&circuit, &stabs)?;
        if !layout.is_pauli() {
            return Err(VcemError::InvalidChannel("remainder is defined for Pauli layouts only".into()));
        }
        let chis = effective_chi_factors(&layout, &circuit, stabs.generators())?;
        Ok(DeltaCost {
            circuit,
            layout,
            stabs,
            chis,
        })
    }

    pub fn chi_factors(&self) -> &[f64] {
        &self.chis
    }
}

impl AngleObjective for DeltaCost {
    fn circuit(&self) -> &ParamCircuit {
        &self.circuit
    }

    fn value_at_angles(&self, angles: &[f64]) -> Result<f64> {
        let rho = sim::run_noisy_with_angles(&self.circuit, angles, &self.layout)?;
        let psi = sim::run_pure_with_angles(&self.circuit, angles)?;
        let noisy: f64 = mixed_terms(&rho, &self.stabs)?.iter().sum();
        let predicted: f64 = pure_terms(&psi, &self.stabs)?.iter().zip(&self.chis).map(|(c, x)| c * x).sum();
        Ok(noisy - predicted)
    }
}

impl Objective for DeltaCost {
    fn num_params(&self) -> usize {
        self.circuit.num_params()
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        self.value_at_angles(&self.circuit.gate_angles(theta)?)
    }

    fn value_and_gradient(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((self.value(theta)?, parameter_shift_gradient(self, theta)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_ghz_circuit, build_graph_circuit, sample_coherent_errors, transpile};
    use crate::graph::Graph;
    use crate::noise::{DepolarizingChannel, PauliChannel};
    use crate::pauli::{ghz_stabilizers, graph_stabilizers};

    fn grid_2x2(mag: f64, seed: u64) -> (ParamCircuit, StabilizerSet) {
        let g = Graph::grid(2, 2).unwrap();
        let c = transpile(&build_graph_circuit(&g).unwrap()).unwrap();
        let eps = sample_coherent_errors(&c, mag, seed).unwrap();
        (c.with_epsilons(eps).unwrap(), graph_stabilizers(&g).unwrap())
    }

    #[test]
    fn ideal_parameters_reach_minus_n() {
        let (c, s) = grid_2x2(0.3, 1);
        let r = cost(&c, &c.ideal_theta(), &s).unwrap();
        assert!((r.total + 4.0).abs() < 1e-12);
        assert!((r.per_stabilizer.iter().sum::<f64>() - r.total).abs() < 1e-15);
        let g = transpile(&build_ghz_circuit(3).unwrap()).unwrap();
        assert!((cost(&g, &g.ideal_theta(), &ghz_stabilizers(3).unwrap()).unwrap().total + 3.0).abs() < 1e-12);
    }

    #[test]
    fn identity_layout_matches_pure_cost() {
        let (c, s) = grid_2x2(0.1, 2);
        let theta = vec![0.05; c.num_params()];
        let layout = NoiseLayout::noiseless(4, c.num_moments());
        let a = cost(&c, &theta, &s).unwrap().total;
        let b = noisy_cost(&c, &theta, &layout, &s).unwrap().total;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn end_channel_matches_chi_scaling() {
        let (c, s) = grid_2x2(0.1, 3);
        let theta: Vec<f64> = (0..c.num_params()).map(|k| 0.2 * (k as f64).sin()).collect();
        let end = crate::noise::sample_pauli_channel(4, &[1, 3], 0.03, 5).unwrap();
        let mut moments = vec![Vec::new(); c.num_moments()];
        *moments.last_mut().unwrap() = vec![Channel::Pauli(end.clone())];
        let layout = NoiseLayout::new(4, moments).unwrap();
        let sim = noisy_cost(&c, &theta, &layout, &s).unwrap();
        let pred = chi_scaled_cost(&c, &theta, &Channel::Pauli(end), &s).unwrap();
        assert!((sim.total - pred.total).abs() < 1e-12);
        let depol = Channel::Depolarizing(DepolarizingChannel::new(4, 0.3).unwrap());
        let scaled = chi_scaled_cost(&c, &theta, &depol, &s).unwrap();
        let base = cost(&c, &theta, &s).unwrap();
        for (a, b) in scaled.per_stabilizer.iter().zip(&base.per_stabilizer) {
            assert!((a - 0.7 * b).abs() < 1e-15);
        }
    }

    #[test]
    fn delta_vanishes_at_clifford_point_and_without_noise() {
        let (c, s) = grid_2x2(0.05, 4);
        let layout = NoiseLayout::from_spec("pauli:m=1,mag=0.05", &c, 6).unwrap();
        assert!(delta_cost(&c, &c.ideal_theta(), &layout, &s).unwrap().abs() < 1e-12);
        let quiet = NoiseLayout::noiseless(4, c.num_moments());
        assert!(delta_cost(&c, &vec![0.0; c.num_params()], &quiet, &s).unwrap().abs() < 1e-12);
        let mut kraus = quiet.moments().to_vec();
        kraus[0].push(Channel::Kraus {
            qubits: vec![0],
            channel: crate::noise::GenericChannel::amplitude_damping(0.1).unwrap(),
        });
        let kraus = NoiseLayout::new(4, kraus).unwrap();
        assert!(matches!(
            delta_cost(&c, &c.ideal_theta(), &kraus, &s),
            Err(VcemError::InvalidChannel(_))
        ));
    }

    #[test]
    fn gradients_agree() {
        let (c, s) = grid_2x2(0.2, 7);
        let theta: Vec<f64> = (0..c.num_params()).map(|k| 0.1 * (k as f64 + 0.5).cos()).collect();
        let pure = PureCost::new(c.clone(), s.clone()).unwrap();
        let (_, ps) = pure.value_and_gradient(&theta).unwrap();
        let fd = finite_difference_gradient(|t| pure.value(t), &theta, DEFAULT_FD_STEP).unwrap();
        for (a, b) in ps.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-6);
        }
        let fast = PureCost::with_method(c.clone(), s.clone(), GradientMethod::Adjoint).unwrap();
        for (a, b) in fast.value_and_gradient(&theta).unwrap().1.iter().zip(&ps) {
            assert!((a - b).abs() < 1e-12);
        }
        let layout = NoiseLayout::from_spec("pauli:m=2,mag=0.05", &c, 8).unwrap();
        let shift = NoisyCost::new(c.clone(), layout.clone(), s.clone(), GradientMethod::ParameterShift).unwrap();
        let adjoint = NoisyCost::new(c, layout, s, GradientMethod::Adjoint).unwrap();
        let (v1, g1) = shift.value_and_gradient(&theta).unwrap();
        let (v2, g2) = adjoint.value_and_gradient(&theta).unwrap();
        assert!((v1 - v2).abs() < 1e-12);
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn stationary_and_convex_at_ideal_point() {
        let (c, s) = grid_2x2(0.01, 9);
        let pure = PureCost::new(c.clone(), s.clone()).unwrap();
        let ideal = c.ideal_theta();
        let (_, g) = pure.value_and_gradient(&ideal).unwrap();
        assert!(g.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-8);
        let h = hessian_fd(|t| pure.value(t), &ideal, DEFAULT_HESSIAN_STEP).unwrap();
        assert!(h.symmetric_eigenvalues().min() > 0.0);
        let layout = NoiseLayout::from_spec("pauli:m=2,mag=0.01", &c, 10).unwrap();
        let noisy = NoisyCost::new(c, layout, s, GradientMethod::Adjoint).unwrap();
        let (_, g) = noisy.value_and_gradient(&ideal).unwrap();
        assert!(g.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-8);
        let h = hessian_fd(|t| noisy.value(t), &ideal, DEFAULT_HESSIAN_STEP).unwrap();
        assert!(h.symmetric_eigenvalues().min() > 0.0);
    }

    #[test]
    fn hessian_of_quadratic() {
        // f = x² + 3xy - 2y² + 5y, Hessian [[2, 3], [3, -4]].
        let f = |t: &[f64]| Ok(t[0] * t[0] + 3.0 * t[0] * t[1] - 2.0 * t[1] * t[1] + 5.0 * t[1]);
        let h = hessian_fd(f, &[0.3, -1.2], 1e-3).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[2.0, 3.0, 3.0, -4.0]);
        assert!((h - expect).abs().max() < 1e-6);
        assert!(hessian_fd(f, &[0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn pauli_flip_channel_rescales_cost() {
        let c = transpile(&build_ghz_circuit(2).unwrap()).unwrap();
        let s = ghz_stabilizers(2).unwrap();
        let ch = PauliChannel::flip(&"ZI".parse().unwrap(), 0.25).unwrap();
        let r = chi_scaled_cost(&c, &c.ideal_theta(), &Channel::Pauli(ch), &s).unwrap();
        assert!((r.per_stabilizer[0] + 0.5).abs() < 1e-12);
        assert!((r.per_stabilizer[1] + 1.0).abs() < 1e-12);
    }
}
