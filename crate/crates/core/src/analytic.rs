//! Closed-form costs of the two-qubit GHZ circuit `U_CX(π+θ+ε) (H ⊗ 1) |00⟩`
//! under four noise scenarios, and dense simulations of the same circuits.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dense::{self, CMatrix};
use crate::error::{Result, VcemError};
use crate::noise::{Channel, DepolarizingChannel, PauliChannel};
use crate::pauli::PauliString;
use crate::sim::DensityMatrix;

fn half_angle(theta: f64, epsilon: f64) -> f64 {
    (PI + theta + epsilon) / 2.0
}

fn label(s: &str) -> PauliString {
    s.parse().expect("static Pauli label")
}

fn controlled(block: CMatrix) -> CMatrix {
    let mut u = CMatrix::zeros(4, 4);
    u[(0, 0)] = dense::ONE;
    u[(1, 1)] = dense::ONE;
    u.view_mut((2, 2), (2, 2)).copy_from(&block);
    u
}

/// `diag(1, i R_x(φ))`, control on qubit 0; equals CNOT at `φ = π`.
pub fn ucx_phase(phi: f64) -> CMatrix {
    controlled(dense::involution_exp(&dense::pauli_x(), phi) * dense::I)
}

/// `exp(-i φ H_CX)` with `H_CX = |1⟩⟨1| ⊗ (X - 1)/2`, i.e. `diag(1, e^{iφ/2} R_x(φ))`.
pub fn ucx_exponential(phi: f64) -> CMatrix {
    controlled(dense::involution_exp(&dense::pauli_x(), phi) * Complex64::from_polar(1.0, phi / 2.0))
}

/// `-sin(a) - sin²(a)` with `a = (π+θ+ε)/2`.
pub fn ghz_cost_noiseless(theta: f64, epsilon: f64) -> f64 {
    let s = half_angle(theta, epsilon).sin();
    -s - s * s
}

/// `dC/dθ` of [`ghz_cost_noiseless`].
pub fn ghz_cost_noiseless_derivative(theta: f64, epsilon: f64) -> f64 {
    let (s, c) = half_angle(theta, epsilon).sin_cos();
    -0.5 * c - s * c
}

/// End-of-circuit channel `p0 ρ + Σ p_P P ρ P` over the six listed strings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndPauliProbs {
    pub xx: f64,
    pub zz: f64,
    pub zi: f64,
    pub iz: f64,
    pub xi: f64,
    pub ix: f64,
}

impl EndPauliProbs {
    pub fn reference() -> Self {
        EndPauliProbs {
            xx: 0.01,
            zz: 0.02,
            zi: 0.2,
            iz: 0.2,
            xi: 0.01,
            ix: 0.01,
        }
    }

    pub fn channel(&self) -> Result<PauliChannel> {
        let rest = [self.xx, self.zz, self.zi, self.iz, self.xi, self.ix];
        PauliChannel::from_full_terms(
            2,
            vec![
                (1.0 - rest.iter().sum::<f64>(), label("II")),
                (self.xx, label("XX")),
                (self.zz, label("ZZ")),
                (self.zi, label("ZI")),
                (self.iz, label("IZ")),
                (self.xi, label("XI")),
                (self.ix, label("IX")),
            ],
        )
    }
}

/// `-(1-2Γ₁) sin(a) - (1-2Γ₂) sin²(a)` with `Γ₁ = p_ZI + p_IZ`, `Γ₂ = p_XI + p_IX`.
pub fn ghz_cost_end_pauli(theta: f64, epsilon: f64, probs: &EndPauliProbs) -> Result<f64> {
    probs.channel()?;
    let g1 = probs.zi + probs.iz;
    let g2 = probs.xi + probs.ix;
    let s = half_angle(theta, epsilon).sin();
    Ok(-(1.0 - 2.0 * g1) * s - (1.0 - 2.0 * g2) * s * s)
}

/// `(1-p)² C(θ)` for a two-moment circuit with global depolarizing after each moment.
pub fn ghz_cost_depol(theta: f64, epsilon: f64, p: f64) -> Result<f64> {
    DepolarizingChannel::new(2, p)?;
    Ok((1.0 - p).powi(2) * ghz_cost_noiseless(theta, epsilon))
}

/// Per-moment maps: `first` after the Hadamard moment with probabilities of
/// (ZI, XI, YI), `second` after the CNOT moment with (ZI, IZ, XI, IX).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentPauliMaps {
    pub first: [f64; 3],
    pub second: [f64; 4],
}

impl MomentPauliMaps {
    pub fn reference() -> Self {
        MomentPauliMaps {
            first: [0.01, 0.02, 0.17],
            second: [0.01, 0.1, 0.18, 0.01],
        }
    }

    pub fn first_channel(&self) -> Result<PauliChannel> {
        let [z, x, y] = self.first;
        PauliChannel::from_full_terms(
            2,
            vec![
                (1.0 - z - x - y, label("II")),
                (z, label("ZI")),
                (x, label("XI")),
                (y, label("YI")),
            ],
        )
    }

    pub fn second_channel(&self) -> Result<PauliChannel> {
        let [zi, iz, xi, ix] = self.second;
        PauliChannel::from_full_terms(
            2,
            vec![
                (1.0 - zi - iz - xi - ix, label("II")),
                (zi, label("ZI")),
                (iz, label("IZ")),
                (xi, label("XI")),
                (ix, label("IX")),
            ],
        )
    }

    /// The twelve probabilities `p₀…p₁₁` of the effective end channel, in the
    /// order II, ZI, IZ, XI, IX, YI, ZZ, XX, YY, ZX, XY, YX.
    pub fn effective_probabilities(&self) -> Result<[f64; 12]> {
        self.first_channel()?;
        self.second_channel()?;
        let [a1, a2, a3] = self.first;
        let a0 = 1.0 - a1 - a2 - a3;
        let [b1, b2, b3, b4] = self.second;
        let b0 = 1.0 - b1 - b2 - b3 - b4;
        Ok([
            a0 * b0 + a1 * b1,
            a1 * b0 + a0 * b1,
            a0 * b2,
            a0 * b3 + a2 * b4,
            a2 * b3 + a0 * b4,
            a1 * b3 + a3 * b4,
            a1 * b2,
            a2 * b0 + a3 * b1,
            a3 * b2,
            a3 * b3 + a1 * b4,
            a2 * b2,
            a3 * b0 + a2 * b1,
        ])
    }

    pub const EFFECTIVE_LABELS: [&'static str; 12] =
        ["II", "ZI", "IZ", "XI", "IX", "YI", "ZZ", "XX", "YY", "ZX", "XY", "YX"];

    pub fn effective_channel(&self) -> Result<PauliChannel> {
        let probs = self.effective_probabilities()?;
        PauliChannel::from_full_terms(
            2,
            probs.iter().zip(Self::EFFECTIVE_LABELS).map(|(p, l)| (*p, label(l))).collect(),
        )
    }

    /// `(Γ₁, Γ₂)`: weights of the effective terms anticommuting with XX and ZZ.
    pub fn gammas(&self) -> Result<(f64, f64)> {
        let p = self.effective_probabilities()?;
        Ok((p[1] + p[2] + p[5] + p[9] + p[10] + p[11], p[3] + p[4] + p[5] + p[9]))
    }
}

/// `(1 - Γ₁ - Γ₂) · (-2 sin²(a))`, for the exponential CNOT parametrization.
pub fn ghz_cost_moment_pauli(theta: f64, epsilon: f64, maps: &MomentPauliMaps) -> Result<f64> {
    let (g1, g2) = maps.gammas()?;
    let s = half_angle(theta, epsilon).sin();
    Ok((1.0 - g1 - g2) * (-2.0 * s * s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum GhzVariant {
    Noiseless,
    EndPauli(EndPauliProbs),
    PerMomentDepol { p: f64 },
    PerMomentPauli(MomentPauliMaps),
}

impl GhzVariant {
    pub fn name(&self) -> &'static str {
        match self {
            GhzVariant::Noiseless => "noiseless",
            GhzVariant::EndPauli(_) => "end_pauli",
            GhzVariant::PerMomentDepol { .. } => "per_moment_depol",
            GhzVariant::PerMomentPauli(_) => "per_moment_pauli",
        }
    }

    /// The four scenarios with the worked-example parameters.
    pub fn reference_variants() -> [GhzVariant; 4] {
        [
            GhzVariant::Noiseless,
            GhzVariant::EndPauli(EndPauliProbs::reference()),
            GhzVariant::PerMomentDepol { p: 0.2 },
            GhzVariant::PerMomentPauli(MomentPauliMaps::reference()),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GhzScenario {
    pub theta: f64,
    pub epsilon: f64,
    pub variant: GhzVariant,
}

fn ghz_stabilizer_cost(rho: &DensityMatrix) -> Result<f64> {
    Ok(-rho.expectation(&label("XX"))? - rho.expectation(&label("ZZ"))?)
}

impl GhzScenario {
    pub fn new(theta: f64, epsilon: f64, variant: GhzVariant) -> Self {
        GhzScenario { theta, epsilon, variant }
    }

    pub fn analytic_cost(&self) -> Result<f64> {
        let (t, e) = (self.theta, self.epsilon);
        match &self.variant {
            GhzVariant::Noiseless => Ok(ghz_cost_noiseless(t, e)),
            GhzVariant::EndPauli(p) => ghz_cost_end_pauli(t, e, p),
            GhzVariant::PerMomentDepol { p } => ghz_cost_depol(t, e, *p),
            GhzVariant::PerMomentPauli(m) => ghz_cost_moment_pauli(t, e, m),
        }
    }

    /// The CNOT parametrization the closed form assumes.
    fn cnot(&self) -> CMatrix {
        let phi = PI + self.theta + self.epsilon;
        match self.variant {
            GhzVariant::PerMomentPauli(_) => ucx_exponential(phi),
            _ => ucx_phase(phi),
        }
    }

    fn hadamard_moment() -> CMatrix {
        dense::kron(&dense::hadamard(), &dense::identity(2))
    }

    /// Moment channels after the Hadamard and CNOT moments.
    fn channels(&self) -> Result<[Vec<Channel>; 2]> {
        Ok(match &self.variant {
            GhzVariant::Noiseless => [vec![], vec![]],
            GhzVariant::EndPauli(p) => [vec![], vec![Channel::Pauli(p.channel()?)]],
            GhzVariant::PerMomentDepol { p } => {
                let d = Channel::Depolarizing(DepolarizingChannel::new(2, *p)?);
                [vec![d.clone()], vec![d]]
            }
            GhzVariant::PerMomentPauli(m) => {
                [vec![Channel::Pauli(m.first_channel()?)], vec![Channel::Pauli(m.second_channel()?)]]
            }
        })
    }

    /// Cost from an interleaved density-matrix simulation.
    pub fn simulated_cost(&self) -> Result<f64> {
        let [first, second] = self.channels()?;
        let mut rho = DensityMatrix::zero_state(2)?;
        rho.apply_unitary(&Self::hadamard_moment(), &[0, 1])?;
        for ch in &first {
            rho.apply_channel(ch)?;
        }
        rho.apply_unitary(&self.cnot(), &[0, 1])?;
        for ch in &second {
            rho.apply_channel(ch)?;
        }
        ghz_stabilizer_cost(&rho)
    }

    /// `ΔC̃ = C̃ - Σ_i χ_i C_i` with the χ-factors of the effective end
    /// channel; defined for the per-moment Pauli variant only.
    pub fn remainder(&self) -> Result<f64> {
        let GhzVariant::PerMomentPauli(maps) = &self.variant else {
            return Err(VcemError::invalid("remainder is defined for the per-moment Pauli scenario"));
        };
        let effective = maps.effective_channel()?;
        let mut pure = DensityMatrix::zero_state(2)?;
        pure.apply_unitary(&Self::hadamard_moment(), &[0, 1])?;
        pure.apply_unitary(&self.cnot(), &[0, 1])?;
        let mut predicted = 0.0;
        for s in ["XX", "ZZ"] {
            let s = label(s);
            predicted -= effective.chi_factor(&s)? * pure.expectation(&s)?;
        }
        Ok(self.simulated_cost()? - predicted)
    }
}
