//! First-order minimization from `θ = 0` with per-family residual tracking.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::circuit::{GateKind, ParamCircuit};
use crate::cost::Objective;
use crate::error::{Result, VcemError};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub max_iters: usize,
    pub learning_rate: f64,
    pub grad_tolerance: f64,
    /// Adam-style first/second-moment rescaling; plain gradient descent when off.
    pub adaptive: bool,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            max_iters: 500,
            learning_rate: 0.01,
            grad_tolerance: 1e-7,
            adaptive: true,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(VcemError::Config("max_iters must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(VcemError::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if !(self.grad_tolerance.is_finite() && self.grad_tolerance > 0.0) {
            return Err(VcemError::Config(format!("gradient tolerance {} must be positive", self.grad_tolerance)));
        }
        Ok(())
    }
}

/// Euclidean norms of `θ + ε` restricted to each gate family.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EpsilonMetrics {
    pub rz: f64,
    pub rx: f64,
    pub rzx: f64,
}

impl EpsilonMetrics {
    pub fn get(&self, kind: GateKind) -> f64 {
        match kind {
            GateKind::Rz => self.rz,
            GateKind::Rx => self.rx,
            GateKind::Rzx => self.rzx,
        }
    }
}

pub fn epsilon_metrics(theta: &[f64], epsilons: &[f64], grouping: &[Option<GateKind>]) -> Result<EpsilonMetrics> {
    VcemError::check_size(epsilons.len(), theta.len())?;
    VcemError::check_size(epsilons.len(), grouping.len())?;
    let mut sq = [0.0f64; 3];
    for (k, ((t, e), kind)) in theta.iter().zip(epsilons).zip(grouping).enumerate() {
        let kind = kind.ok_or_else(|| VcemError::invalid(format!("parameter {k} has no gate family")))?;
        let slot = match kind {
            GateKind::Rz => 0,
            GateKind::Rx => 1,
            GateKind::Rzx => 2,
        };
        sq[slot] += (t + e) * (t + e);
    }
    Ok(EpsilonMetrics {
        rz: sq[0].sqrt(),
        rx: sq[1].sqrt(),
        rzx: sq[2].sqrt(),
    })
}

fn circuit_metrics(c: &ParamCircuit, theta: &[f64]) -> Result<EpsilonMetrics> {
    let grouping: Vec<_> = c.param_kinds().into_iter().map(Some).collect();
    epsilon_metrics(theta, c.epsilons(), &grouping)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub cost: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    /// One record per gradient evaluation; the cost is taken before the step.
    pub iterations: Vec<IterationRecord>,
    pub final_theta: Vec<f64>,
    pub converged: bool,
    pub epsilon_metrics_history: Vec<EpsilonMetrics>,
}

impl OptimizationTrace {
    pub fn final_cost(&self) -> f64 {
        self.iterations.last().map_or(f64::NAN, |r| r.cost)
    }

    pub fn final_grad_norm(&self) -> f64 {
        self.iterations.last().map_or(f64::NAN, |r| r.grad_norm)
    }

    pub fn num_iterations(&self) -> usize {
        self.iterations.len()
    }

    /// `iter,cost,grad_norm,eps_Rz,eps_Rx,eps_Rzx` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iter,cost,grad_norm,eps_Rz,eps_Rx,eps_Rzx")?;
        for (r, m) in self.iterations.iter().zip(&self.epsilon_metrics_history) {
            writeln!(w, "{},{:e},{:e},{:e},{:e},{:e}", r.iter, r.cost, r.grad_norm, m.rz, m.rx, m.rzx)?;
        }
        Ok(())
    }
}

/// Minimizes `f` starting from `θ = 0`.
pub fn minimize<F: Objective + ?Sized>(f: &F, c: &ParamCircuit, settings: &OptimizerSettings) -> Result<OptimizationTrace> {
    minimize_from(f, c, vec![0.0; c.num_params()], settings)
}

pub fn minimize_from<F: Objective + ?Sized>(
    f: &F,
    c: &ParamCircuit,
    mut theta: Vec<f64>,
    settings: &OptimizerSettings,
) -> Result<OptimizationTrace> {
    settings.validate()?;
    VcemError::check_size(c.num_params(), f.num_params())?;
    c.check_theta(&theta)?;
    let k = theta.len();
    let mut m = vec![0.0; k];
    let mut v = vec![0.0; k];
    let mut trace = OptimizationTrace {
        iterations: Vec::new(),
        final_theta: Vec::new(),
        converged: false,
        epsilon_metrics_history: Vec::new(),
    };
    for iter in 0..settings.max_iters {
        let (cost, grad) = f.value_and_gradient(&theta)?;
        if !cost.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(VcemError::NonFinite(format!("cost or gradient at iteration {iter}")));
        }
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        trace.iterations.push(IterationRecord { iter, cost, grad_norm });
        trace.epsilon_metrics_history.push(circuit_metrics(c, &theta)?);
        if grad_norm < settings.grad_tolerance {
            trace.converged = true;
            break;
        }
        if iter + 1 == settings.max_iters {
            break;
        }
        if settings.adaptive {
            let t = (iter + 1) as i32;
            let c1 = 1.0 - BETA1.powi(t);
            let c2 = 1.0 - BETA2.powi(t);
            for i in 0..k {
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * grad[i];
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * grad[i] * grad[i];
                theta[i] -= settings.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
            }
        } else {
            for (t, g) in theta.iter_mut().zip(&grad) {
                *t -= settings.learning_rate * g;
            }
        }
    }
    trace.final_theta = theta;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_ghz_circuit, sample_coherent_errors, transpile};
    use crate::cost::PureCost;
    use crate::pauli::ghz_stabilizers;

    struct Quadratic(Vec<f64>);

    impl Objective for Quadratic {
        fn num_params(&self) -> usize {
            self.0.len()
        }

        fn value(&self, theta: &[f64]) -> Result<f64> {
            Ok(theta.iter().zip(&self.0).map(|(t, c)| (t - c).powi(2)).sum())
        }

        fn value_and_gradient(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
            let g = theta.iter().zip(&self.0).map(|(t, c)| 2.0 * (t - c)).collect();
            Ok((self.value(theta)?, g))
        }
    }

    fn ghz2(mag: f64) -> (ParamCircuit, PureCost) {
        let c = transpile(&build_ghz_circuit(2).unwrap()).unwrap();
        let eps = if mag > 0.0 { sample_coherent_errors(&c, mag, 11).unwrap() } else { vec![0.0; c.num_params()] };
        let c = c.with_epsilons(eps).unwrap();
        let f = PureCost::new(c.clone(), ghz_stabilizers(2).unwrap()).unwrap();
        (c, f)
    }

    #[test]
    fn ghz_recovers_minus_epsilon() {
        let (c, f) = ghz2(0.01);
        let trace = minimize(&f, &c, &OptimizerSettings::default()).unwrap();
        assert!(trace.converged);
        for (t, e) in trace.final_theta.iter().zip(c.epsilons()) {
            assert!((t + e).abs() < 1e-4);
        }
        assert!(trace.final_cost() <= trace.iterations[0].cost);
        assert!(trace.final_grad_norm() < 1e-7);
    }

    #[test]
    fn zero_error_converges_immediately() {
        let (c, f) = ghz2(0.0);
        let trace = minimize(&f, &c, &OptimizerSettings::default()).unwrap();
        assert!(trace.converged);
        assert_eq!(trace.num_iterations(), 1);
        assert!(trace.final_theta.iter().all(|t| *t == 0.0));
    }

    #[test]
    fn plain_descent_on_quadratic() {
        let c = transpile(&build_ghz_circuit(2).unwrap()).unwrap();
        let target: Vec<f64> = (0..c.num_params()).map(|k| 0.1 * k as f64).collect();
        let settings = OptimizerSettings {
            learning_rate: 0.25,
            adaptive: false,
            ..Default::default()
        };
        let trace = minimize(&Quadratic(target.clone()), &c, &settings).unwrap();
        assert!(trace.converged);
        for (t, x) in trace.final_theta.iter().zip(&target) {
            assert!((t - x).abs() < 1e-7);
        }
    }

    #[test]
    fn metrics() {
        let grouping = [Some(GateKind::Rz), Some(GateKind::Rx), Some(GateKind::Rz), Some(GateKind::Rzx)];
        let eps = [0.3, -0.1, 0.4, 0.2];
        let m = epsilon_metrics(&[0.0; 4], &eps, &grouping).unwrap();
        assert!((m.rz - 0.5).abs() < 1e-15);
        assert!((m.rx - 0.1).abs() < 1e-15);
        assert!((m.get(GateKind::Rzx) - 0.2).abs() < 1e-15);
        let m = epsilon_metrics(&[-0.3, 0.1, -0.4, -0.2], &eps, &grouping).unwrap();
        assert_eq!(m, EpsilonMetrics::default());
        assert!(epsilon_metrics(&[0.0; 4], &eps, &[None, None, None, None]).is_err());
    }

    #[test]
    fn settings_validation_and_csv() {
        let bad = OptimizerSettings {
            learning_rate: 0.0,
            ..Default::default()
        };
        let (c, f) = ghz2(0.01);
        assert!(matches!(minimize(&f, &c, &bad), Err(VcemError::Config(_))));
        let trace = minimize(
            &f,
            &c,
            &OptimizerSettings {
                max_iters: 3,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(trace.num_iterations(), 3);
        let mut out = Vec::new();
        trace.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("iter,cost,grad_norm,eps_Rz,eps_Rx,eps_Rzx\n0,"));
    }
}
