//! Closed-form Klein-Gordon solutions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::gauge::GaugeFunction;
use super::potential::{PlaneWaveField, PotentialModel};
use crate::error::{Error, Result};
use crate::spacetime::{minkowski_dot, FourVector, PhysicalConstants};

/// Absolute tolerance on `|p·p − m0²c²|`.
pub const ON_SHELL_TOLERANCE: f64 = 1e-12;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub weight: Complex64,
    pub p: FourVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum WaveFunctionModel {
    /// `exp(−i p·x/ħ)`.
    PlaneWave { p: FourVector },
    /// `Σ w_j exp(−i p_j·x/ħ)`.
    ModeSum { modes: Vec<Mode> },
    /// Volkov solution `exp(−i S/ħ)` in a plane-wave potential.
    KgVolkov {
        p: FourVector,
        field: PlaneWaveField,
    },
    /// `exp(−ieΛ/ħ) · φ`.
    Gauged {
        inner: Box<WaveFunctionModel>,
        gauge: GaugeFunction,
    },
}

fn check_shell(p: &FourVector, consts: &PhysicalConstants) -> Result<()> {
    if !p.is_finite() {
        return Err(Error::InvalidModel("momentum must be finite".into()));
    }
    let off = minkowski_dot(p, p) - consts.mass_shell();
    if off.abs() > ON_SHELL_TOLERANCE {
        return Err(Error::InvalidModel(format!(
            "momentum {:?} is off shell by {off:e}",
            p.0
        )));
    }
    Ok(())
}

impl WaveFunctionModel {
    pub fn plane_wave(p: FourVector, consts: &PhysicalConstants) -> Result<Self> {
        check_shell(&p, consts)?;
        Ok(Self::PlaneWave { p })
    }

    /// Skips the mass-shell check. Only for negative controls.
    pub fn plane_wave_unchecked(p: FourVector) -> Self {
        Self::PlaneWave { p }
    }

    pub fn mode_sum(modes: Vec<Mode>, consts: &PhysicalConstants) -> Result<Self> {
        for m in &modes {
            check_shell(&m.p, consts)?;
        }
        Self::mode_sum_unchecked(modes)
    }

    /// Skips the mass-shell check but still rejects all-zero weights.
    pub fn mode_sum_unchecked(modes: Vec<Mode>) -> Result<Self> {
        if modes.is_empty() || modes.iter().all(|m| m.weight == Complex64::new(0.0, 0.0)) {
            return Err(Error::InvalidModel(
                "mode sum needs a nonzero weight".into(),
            ));
        }
        Ok(Self::ModeSum { modes })
    }

    pub fn volkov(
        p: FourVector,
        field: PlaneWaveField,
        consts: &PhysicalConstants,
    ) -> Result<Self> {
        check_shell(&p, consts)?;
        if minkowski_dot(field.k(), &p).abs() < 1e-12 {
            return Err(Error::InvalidModel("k·p must be nonzero".into()));
        }
        Ok(Self::KgVolkov { p, field })
    }

    pub fn label(&self) -> String {
        match self {
            WaveFunctionModel::PlaneWave { .. } => "plane_wave".into(),
            WaveFunctionModel::ModeSum { .. } => "mode_sum".into(),
            WaveFunctionModel::KgVolkov { .. } => "kg_volkov".into(),
            WaveFunctionModel::Gauged { inner, .. } => format!("gauged({})", inner.label()),
        }
    }

    pub fn peel(&self) -> (&WaveFunctionModel, Vec<&GaugeFunction>) {
        let mut layers = Vec::new();
        let mut cur = self;
        while let WaveFunctionModel::Gauged { inner, gauge } = cur {
            layers.push(gauge);
            cur = inner;
        }
        layers.reverse();
        (cur, layers)
    }

    /// True when `|φ|` is constant (pure phase).
    pub fn is_pure_phase(&self) -> bool {
        match self.peel().0 {
            WaveFunctionModel::PlaneWave { .. } | WaveFunctionModel::KgVolkov { .. } => true,
            WaveFunctionModel::ModeSum { modes } => {
                modes.iter().filter(|m| m.weight.norm() > 0.0).count() == 1
            }
            WaveFunctionModel::Gauged { .. } => unreachable!(),
        }
    }

    /// Upper bound on `|φ|²` over all of spacetime.
    pub fn density_bound(&self) -> f64 {
        match self.peel().0 {
            WaveFunctionModel::ModeSum { modes } => {
                modes.iter().map(|m| m.weight.norm()).sum::<f64>().powi(2)
            }
            _ => 1.0,
        }
    }

    /// Checks that the model and potential belong together.
    pub fn check_pair(&self, potential: &PotentialModel) -> Result<()> {
        let (m, mg) = self.peel();
        let (a, ag) = potential.peel();
        let mismatch = || Error::IncompatiblePair {
            model: self.label(),
            potential: potential.label(),
        };
        if mg != ag {
            return Err(mismatch());
        }
        match (m, a) {
            (WaveFunctionModel::PlaneWave { .. }, PotentialModel::Zero)
            | (WaveFunctionModel::ModeSum { .. }, PotentialModel::Zero) => Ok(()),
            (WaveFunctionModel::KgVolkov { field, .. }, PotentialModel::PlaneWave(pw))
                if field == pw =>
            {
                Ok(())
            }
            _ => Err(mismatch()),
        }
    }
}

/// `φ` and its partial derivatives `∂_μ`, `∂_μ∂_ν` (lower indices).
#[derive(Clone, Copy, Debug)]
pub struct PhiJet {
    pub phi: Complex64,
    pub d1: [Complex64; 4],
    pub d2: [[Complex64; 4]; 4],
}

/// `ln φ` up to third derivatives (lower indices), with `φ` itself.
#[derive(Clone, Copy, Debug)]
pub struct LogJet {
    pub phi: Complex64,
    pub d1: [Complex64; 4],
    pub d2: [[Complex64; 4]; 4],
    pub d3: [[[Complex64; 4]; 4]; 4],
}

const CZ: Complex64 = Complex64::new(0.0, 0.0);

impl LogJet {
    fn zero(phi: Complex64) -> Self {
        Self {
            phi,
            d1: [CZ; 4],
            d2: [[CZ; 4]; 4],
            d3: [[[CZ; 4]; 4]; 4],
        }
    }

    fn to_phi_jet(self) -> PhiJet {
        let phi = self.phi;
        PhiJet {
            phi,
            d1: self.d1.map(|u| phi * u),
            d2: std::array::from_fn(|a| {
                std::array::from_fn(|b| phi * (self.d2[a][b] + self.d1[a] * self.d1[b]))
            }),
        }
    }
}

/// Volkov classical action `S = p·x + G(k·x)` with derivatives of `G`.
fn volkov_g(p: &FourVector, field: &PlaneWaveField, e: f64, s: f64) -> [f64; 4] {
    let kp = minkowski_dot(field.k(), p);
    let pa = minkowski_dot(p, field.polarization());
    let aa = minkowski_dot(field.polarization(), field.polarization());
    let [f0, f1, f2, _] = field.profile().derivatives(s);
    let (i1, i2) = field.profile().antiderivatives(s);
    let c1 = -e * pa / kp;
    let c2 = -e * e * aa / (2.0 * kp);
    [
        c1 * i1 + c2 * i2,
        c1 * f0 + c2 * f0 * f0,
        c1 * f1 + c2 * 2.0 * f0 * f1,
        c1 * f2 + c2 * 2.0 * (f1 * f1 + f0 * f2),
    ]
}

impl WaveFunctionModel {
    pub fn phi(&self, x: &FourVector, consts: &PhysicalConstants) -> Complex64 {
        let hbar = consts.hbar();
        match self {
            WaveFunctionModel::PlaneWave { p } => (-I * minkowski_dot(p, x) / hbar).exp(),
            WaveFunctionModel::ModeSum { modes } => modes
                .iter()
                .map(|m| m.weight * (-I * minkowski_dot(&m.p, x) / hbar).exp())
                .sum(),
            WaveFunctionModel::KgVolkov { p, field } => {
                let g = volkov_g(p, field, consts.e(), field.phase(x))[0];
                (-I * (minkowski_dot(p, x) + g) / hbar).exp()
            }
            WaveFunctionModel::Gauged { inner, gauge } => {
                (-I * consts.e() * gauge.value(x) / hbar).exp() * inner.phi(x, consts)
            }
        }
    }

    /// Derivatives of `φ` up to second order, valid at nodes.
    pub fn phi_jet(&self, x: &FourVector, consts: &PhysicalConstants) -> PhiJet {
        let hbar = consts.hbar();
        match self {
            WaveFunctionModel::ModeSum { modes } => {
                let mut jet = PhiJet {
                    phi: CZ,
                    d1: [CZ; 4],
                    d2: [[CZ; 4]; 4],
                };
                for m in modes {
                    let term = m.weight * (-I * minkowski_dot(&m.p, x) / hbar).exp();
                    let q = m.p.lower().0.map(|c| -I * c / hbar);
                    jet.phi += term;
                    for a in 0..4 {
                        jet.d1[a] += term * q[a];
                        for b in 0..4 {
                            jet.d2[a][b] += term * q[a] * q[b];
                        }
                    }
                }
                jet
            }
            WaveFunctionModel::Gauged { inner, gauge } => {
                let j = inner.phi_jet(x, consts);
                let l = -I * consts.e() / hbar;
                let g = (l * gauge.value(x)).exp();
                let ga = gauge.gradient(x).map(|c| l * c);
                let gh = gauge.hessian();
                let g1: [Complex64; 4] = ga.map(|c| g * c);
                let g2: [[Complex64; 4]; 4] = std::array::from_fn(|a| {
                    std::array::from_fn(|b| g * (l * gh[a][b] + ga[a] * ga[b]))
                });
                PhiJet {
                    phi: j.phi * g,
                    d1: std::array::from_fn(|a| j.d1[a] * g + j.phi * g1[a]),
                    d2: std::array::from_fn(|a| {
                        std::array::from_fn(|b| {
                            j.d2[a][b] * g + j.d1[a] * g1[b] + j.d1[b] * g1[a] + j.phi * g2[a][b]
                        })
                    }),
                }
            }
            _ => self.log_jet_unchecked(x, consts).to_phi_jet(),
        }
    }

    /// `φ` and `∂_μ ln φ` (lower index) without the higher jet. Used by the sampler.
    pub fn grad_log(
        &self,
        x: &FourVector,
        consts: &PhysicalConstants,
    ) -> (Complex64, [Complex64; 4]) {
        let hbar = consts.hbar();
        match self {
            WaveFunctionModel::ModeSum { modes } => {
                let mut phi = CZ;
                let mut p1 = [CZ; 4];
                for m in modes {
                    let term = m.weight * (-I * minkowski_dot(&m.p, x) / hbar).exp();
                    let q = m.p.lower().0;
                    phi += term;
                    for a in 0..4 {
                        p1[a] += term * q[a];
                    }
                }
                let f = -I / (hbar * phi);
                (phi, p1.map(|c| c * f))
            }
            WaveFunctionModel::Gauged { inner, gauge } => {
                let (phi, mut d1) = inner.grad_log(x, consts);
                let l = -I * consts.e() / hbar;
                let grad = gauge.gradient(x);
                for a in 0..4 {
                    d1[a] += l * grad[a];
                }
                (phi * (l * gauge.value(x)).exp(), d1)
            }
            WaveFunctionModel::KgVolkov { p, field } => {
                let g = volkov_g(p, field, consts.e(), field.phase(x));
                let phi = (-I * (minkowski_dot(p, x) + g[0]) / hbar).exp();
                let (pl, kl) = (p.lower().0, field.k().lower().0);
                (
                    phi,
                    std::array::from_fn(|a| -I * (pl[a] + kl[a] * g[1]) / hbar),
                )
            }
            WaveFunctionModel::PlaneWave { p } => {
                (self.phi(x, consts), p.lower().0.map(|c| -I * c / hbar))
            }
        }
    }

    /// Derivatives of `ln φ` up to third order. `None` at an exact zero of `φ`.
    pub fn log_jet(&self, x: &FourVector, consts: &PhysicalConstants) -> Option<LogJet> {
        let jet = self.log_jet_unchecked(x, consts);
        if jet.phi == CZ || !jet.d3.iter().flatten().flatten().all(|z| z.is_finite()) {
            None
        } else {
            Some(jet)
        }
    }

    fn log_jet_unchecked(&self, x: &FourVector, consts: &PhysicalConstants) -> LogJet {
        let hbar = consts.hbar();
        match self {
            WaveFunctionModel::PlaneWave { p } => {
                let mut jet = LogJet::zero(self.phi(x, consts));
                jet.d1 = p.lower().0.map(|c| -I * c / hbar);
                jet
            }
            WaveFunctionModel::KgVolkov { p, field } => {
                let s = field.phase(x);
                let g = volkov_g(p, field, consts.e(), s);
                let phi = (-I * (minkowski_dot(p, x) + g[0]) / hbar).exp();
                let pl = p.lower().0;
                let kl = field.k().lower().0;
                let mut jet = LogJet::zero(phi);
                for a in 0..4 {
                    jet.d1[a] = -I * (pl[a] + kl[a] * g[1]) / hbar;
                    for b in 0..4 {
                        jet.d2[a][b] = -I * kl[a] * kl[b] * g[2] / hbar;
                        for c in 0..4 {
                            jet.d3[a][b][c] = -I * kl[a] * kl[b] * kl[c] * g[3] / hbar;
                        }
                    }
                }
                jet
            }
            WaveFunctionModel::ModeSum { modes } => {
                // φ derivatives to third order, then the log chain rule.
                let mut phi = CZ;
                let mut p1 = [CZ; 4];
                let mut p2 = [[CZ; 4]; 4];
                let mut p3 = [[[CZ; 4]; 4]; 4];
                for m in modes {
                    let term = m.weight * (-I * minkowski_dot(&m.p, x) / hbar).exp();
                    let q = m.p.lower().0.map(|c| -I * c / hbar);
                    phi += term;
                    for a in 0..4 {
                        p1[a] += term * q[a];
                        for b in 0..4 {
                            p2[a][b] += term * q[a] * q[b];
                            for c in 0..4 {
                                p3[a][b][c] += term * q[a] * q[b] * q[c];
                            }
                        }
                    }
                }
                let mut jet = LogJet::zero(phi);
                let inv = 1.0 / phi;
                for a in 0..4 {
                    jet.d1[a] = p1[a] * inv;
                }
                for a in 0..4 {
                    for b in 0..4 {
                        jet.d2[a][b] = p2[a][b] * inv - jet.d1[a] * jet.d1[b];
                    }
                }
                for a in 0..4 {
                    for b in 0..4 {
                        for c in 0..4 {
                            jet.d3[a][b][c] = p3[a][b][c] * inv
                                - p2[a][b] * inv * jet.d1[c]
                                - jet.d2[a][c] * jet.d1[b]
                                - jet.d1[a] * jet.d2[b][c];
                        }
                    }
                }
                jet
            }
            WaveFunctionModel::Gauged { inner, gauge } => {
                let mut jet = inner.log_jet_unchecked(x, consts);
                let l = -I * consts.e() / hbar;
                jet.phi *= (l * gauge.value(x)).exp();
                let grad = gauge.gradient(x);
                let hess = gauge.hessian();
                for a in 0..4 {
                    jet.d1[a] += l * grad[a];
                    for b in 0..4 {
                        jet.d2[a][b] += l * hess[a][b];
                    }
                }
                jet
            }
        }
    }
}
