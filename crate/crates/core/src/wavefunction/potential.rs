//! External four-potentials `A^μ(x)` with analytic derivatives.

use serde::{Deserialize, Serialize};

use super::gauge::GaugeFunction;
use crate::error::{Error, Result};
use crate::spacetime::{minkowski_dot, FieldTensor, FourVector, METRIC};

/// Scalar profile `f(s)` of a plane wave, `s = k·x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `f(s) = amplitude · cos(s + phase)`.
    Cosine { amplitude: f64, phase: f64 },
}

impl Profile {
    pub fn amplitude(&self) -> f64 {
        match self {
            Profile::Cosine { amplitude, .. } => *amplitude,
        }
    }

    /// `[f, f', f'', f''']` at `s`.
    pub fn derivatives(&self, s: f64) -> [f64; 4] {
        match self {
            Profile::Cosine { amplitude, phase } => {
                let (sn, cs) = (s + phase).sin_cos();
                [
                    amplitude * cs,
                    -amplitude * sn,
                    -amplitude * cs,
                    amplitude * sn,
                ]
            }
        }
    }

    /// `∫₀ˢ f` and `∫₀ˢ f²`.
    pub fn antiderivatives(&self, s: f64) -> (f64, f64) {
        match self {
            Profile::Cosine { amplitude, phase } => {
                let a = *amplitude;
                let i1 = a * ((s + phase).sin() - phase.sin());
                let i2 =
                    0.5 * a * a * (s + 0.5 * ((2.0 * (s + phase)).sin() - (2.0 * phase).sin()));
                (i1, i2)
            }
        }
    }
}

/// Plane-wave potential `A^μ(x) = a^μ f(k·x)` with null `k` and `k·a = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneWaveField {
    k: FourVector,
    polarization: FourVector,
    profile: Profile,
}

impl PlaneWaveField {
    pub fn new(k: FourVector, polarization: FourVector, profile: Profile) -> Result<Self> {
        if !k.is_finite() || !polarization.is_finite() {
            return Err(Error::InvalidModel(
                "plane wave vectors must be finite".into(),
            ));
        }
        let scale = k.0.iter().map(|c| c * c).sum::<f64>();
        if scale == 0.0 {
            return Err(Error::InvalidModel("wave vector k must be nonzero".into()));
        }
        if minkowski_dot(&k, &k).abs() > 1e-12 * scale {
            return Err(Error::InvalidModel(format!(
                "wave vector {:?} is not null",
                k.0
            )));
        }
        let ascale = polarization.0.iter().map(|c| c * c).sum::<f64>().sqrt();
        if minkowski_dot(&k, &polarization).abs() > 1e-12 * scale.sqrt() * ascale.max(1.0) {
            return Err(Error::InvalidModel(
                "polarization must satisfy k·a = 0".into(),
            ));
        }
        Ok(Self {
            k,
            polarization,
            profile,
        })
    }

    pub fn k(&self) -> &FourVector {
        &self.k
    }
    pub fn polarization(&self) -> &FourVector {
        &self.polarization
    }
    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn phase(&self, x: &FourVector) -> f64 {
        minkowski_dot(&self.k, x)
    }

    /// Same field with the profile amplitude scaled to zero.
    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        let profile = match self.profile {
            Profile::Cosine { phase, .. } => Profile::Cosine { amplitude, phase },
        };
        Self {
            profile,
            ..self.clone()
        }
    }
}

/// Values and derivatives of `A` at a point.
///
/// `d1[ν][μ] = ∂_ν A^μ`, `d2[ρ][ν][μ] = ∂_ρ∂_ν A^μ`.
#[derive(Clone, Copy, Debug, Default)]
pub struct PotentialJet {
    pub a: [f64; 4],
    pub d1: [[f64; 4]; 4],
    pub d2: [[[f64; 4]; 4]; 4],
}

impl PotentialJet {
    /// `F^{μν} = ∂^μA^ν − ∂^νA^μ`.
    pub fn field_tensor(&self) -> FieldTensor {
        let m: [[f64; 4]; 4] =
            std::array::from_fn(|mu| std::array::from_fn(|nu| METRIC[mu] * self.d1[mu][nu]));
        FieldTensor::from_antisymmetric_part(m)
    }

    /// `∂_ν F^{μν}` (contracted divergence, free index up).
    pub fn field_divergence(&self) -> [f64; 4] {
        std::array::from_fn(|mu| {
            (0..4)
                .map(|nu| METRIC[mu] * self.d2[nu][mu][nu] - METRIC[nu] * self.d2[nu][nu][mu])
                .sum()
        })
    }

    /// `∂_μ A^μ`.
    pub fn divergence(&self) -> f64 {
        (0..4).map(|mu| self.d1[mu][mu]).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PotentialModel {
    Zero,
    /// Uniform field, `A^μ = −½ F^{μν} x_ν`.
    ConstantField {
        f: FieldTensor,
    },
    PlaneWave(PlaneWaveField),
    /// `A'^μ = A^μ − ∂^μΛ`.
    Gauged {
        inner: Box<PotentialModel>,
        gauge: GaugeFunction,
    },
}

impl PotentialModel {
    pub fn label(&self) -> String {
        match self {
            PotentialModel::Zero => "zero".into(),
            PotentialModel::ConstantField { .. } => "constant_field".into(),
            PotentialModel::PlaneWave(_) => "plane_wave".into(),
            PotentialModel::Gauged { inner, .. } => format!("gauged({})", inner.label()),
        }
    }

    /// Innermost potential together with the gauge layers applied on top.
    pub fn peel(&self) -> (&PotentialModel, Vec<&GaugeFunction>) {
        let mut layers = Vec::new();
        let mut cur = self;
        while let PotentialModel::Gauged { inner, gauge } = cur {
            layers.push(gauge);
            cur = inner;
        }
        layers.reverse();
        (cur, layers)
    }

    pub fn value(&self, x: &FourVector) -> FourVector {
        FourVector(self.jet(x).a)
    }

    pub fn jet(&self, x: &FourVector) -> PotentialJet {
        match self {
            PotentialModel::Zero => PotentialJet::default(),
            PotentialModel::ConstantField { f } => {
                let xl = x.lower();
                let mut jet = PotentialJet::default();
                for mu in 0..4 {
                    jet.a[mu] = -0.5 * (0..4).map(|nu| f.get(mu, nu) * xl.0[nu]).sum::<f64>();
                    for rho in 0..4 {
                        jet.d1[rho][mu] = -0.5 * f.get(mu, rho) * METRIC[rho];
                    }
                }
                jet
            }
            PotentialModel::PlaneWave(pw) => {
                let s = pw.phase(x);
                let [f0, f1, f2, _] = pw.profile.derivatives(s);
                let kl = pw.k.lower();
                let a = pw.polarization.0;
                let mut jet = PotentialJet::default();
                for mu in 0..4 {
                    jet.a[mu] = a[mu] * f0;
                    for nu in 0..4 {
                        jet.d1[nu][mu] = a[mu] * kl.0[nu] * f1;
                        for rho in 0..4 {
                            jet.d2[rho][nu][mu] = a[mu] * kl.0[nu] * kl.0[rho] * f2;
                        }
                    }
                }
                jet
            }
            PotentialModel::Gauged { inner, gauge } => {
                let mut jet = inner.jet(x);
                let grad = gauge.gradient_upper(x);
                let hess = gauge.hessian();
                for mu in 0..4 {
                    jet.a[mu] -= grad.0[mu];
                    for nu in 0..4 {
                        jet.d1[nu][mu] -= METRIC[mu] * hess[nu][mu];
                    }
                }
                jet
            }
        }
    }

    pub fn field_tensor(&self, x: &FourVector) -> FieldTensor {
        self.jet(x).field_tensor()
    }
}
