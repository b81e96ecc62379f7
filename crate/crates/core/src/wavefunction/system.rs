//! Pointwise operators built on a validated (wave function, potential) pair.

use num_complex::Complex64;

use super::model::WaveFunctionModel;
use super::potential::PotentialModel;
use crate::error::{Error, Result};
use crate::spacetime::{ComplexFourVector, FieldTensor, FourVector, PhysicalConstants, METRIC};

const I: Complex64 = Complex64::new(0.0, 1.0);
const CZ: Complex64 = Complex64::new(0.0, 0.0);

pub const DEFAULT_NODE_EPSILON: f64 = 1e-10;
pub const DEFAULT_FD_STEP: f64 = 1e-3;

/// How derivatives of `φ` and `𝒱` are obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Derivatives {
    Analytic,
    /// Second-order central differences of `φ` and `A` values with step `h`.
    FiniteDifference {
        h: f64,
    },
}

/// Complex velocity with its first and second derivatives.
///
/// `d1[ν][μ] = ∂_ν𝒱^μ`, `box_v[μ] = ∂_ν∂^ν𝒱^μ`.
#[derive(Clone, Copy, Debug)]
pub struct VelocityJet {
    pub v: [Complex64; 4],
    pub d1: [[Complex64; 4]; 4],
    pub box_v: [Complex64; 4],
}

impl VelocityJet {
    pub fn velocity(&self) -> ComplexFourVector {
        ComplexFourVector::from_components(self.v)
    }

    /// `𝒱̂^ν∂_ν 𝒱^μ`.
    pub fn material_derivative(&self, lambda_sq: f64) -> [Complex64; 4] {
        std::array::from_fn(|mu| {
            let conv: Complex64 = (0..4).map(|nu| self.v[nu] * self.d1[nu][mu]).sum();
            conv + I * 0.5 * lambda_sq * self.box_v[mu]
        })
    }
}

#[derive(Clone, Debug)]
pub struct System {
    model: WaveFunctionModel,
    potential: PotentialModel,
    consts: PhysicalConstants,
    derivatives: Derivatives,
    node_epsilon: f64,
    velocity_scale: f64,
}

impl System {
    pub fn new(
        model: WaveFunctionModel,
        potential: PotentialModel,
        consts: PhysicalConstants,
    ) -> Result<Self> {
        model.check_pair(&potential)?;
        Ok(Self {
            model,
            potential,
            consts,
            derivatives: Derivatives::Analytic,
            node_epsilon: DEFAULT_NODE_EPSILON,
            velocity_scale: 1.0,
        })
    }

    pub fn with_derivatives(mut self, d: Derivatives) -> Self {
        self.derivatives = d;
        self
    }

    pub fn with_node_epsilon(mut self, eps: f64) -> Self {
        self.node_epsilon = eps;
        self
    }

    /// Multiplies every complex-velocity evaluation by `scale`. A corrupted
    /// drift for negative controls; `1.0` is the physical system.
    pub fn with_velocity_scale(mut self, scale: f64) -> Self {
        self.velocity_scale = scale;
        self
    }

    pub fn model(&self) -> &WaveFunctionModel {
        &self.model
    }
    pub fn potential(&self) -> &PotentialModel {
        &self.potential
    }
    pub fn consts(&self) -> &PhysicalConstants {
        &self.consts
    }
    pub fn derivatives(&self) -> Derivatives {
        self.derivatives
    }
    pub fn velocity_scale(&self) -> f64 {
        self.velocity_scale
    }

    pub fn phi(&self, x: &FourVector) -> Complex64 {
        self.model.phi(x, &self.consts)
    }

    pub fn potential_at(&self, x: &FourVector) -> FourVector {
        self.potential.value(x)
    }

    pub fn field_tensor(&self, x: &FourVector) -> FieldTensor {
        match self.derivatives {
            Derivatives::Analytic => self.potential.field_tensor(x),
            Derivatives::FiniteDifference { h } => {
                let d = fd_gradient(|y| self.potential.value(y).0, x, h);
                let m: [[f64; 4]; 4] =
                    std::array::from_fn(|mu| std::array::from_fn(|nu| METRIC[mu] * d[mu][nu]));
                FieldTensor::from_antisymmetric_part(m)
            }
        }
    }

    fn node_check(&self, x: &FourVector, phi: Complex64) -> Result<()> {
        let modulus = phi.norm();
        if !(modulus >= self.node_epsilon) {
            return Err(Error::NodeSingularity { x: *x, modulus });
        }
        Ok(())
    }

    /// `∂^α ln φ` (raised).
    pub fn grad_ln_phi(&self, x: &FourVector) -> Result<ComplexFourVector> {
        let phi = self.phi(x);
        self.node_check(x, phi)?;
        let lower: [Complex64; 4] = match self.derivatives {
            Derivatives::Analytic => {
                let (_, d1) = self.model.grad_log(x, &self.consts);
                if !d1.iter().all(|c| c.is_finite()) {
                    return Err(Error::NodeSingularity {
                        x: *x,
                        modulus: phi.norm(),
                    });
                }
                d1
            }
            Derivatives::FiniteDifference { h } => std::array::from_fn(|mu| {
                let (xp, xm) = shifted(x, mu, h);
                (self.phi(&xp) - self.phi(&xm)) / (2.0 * h) / phi
            }),
        };
        Ok(ComplexFourVector::from_components(std::array::from_fn(
            |mu| METRIC[mu] * lower[mu],
        )))
    }

    /// `𝒱^α = iλ² ∂^α ln φ + (e/m0) A^α`.
    pub fn complex_velocity(&self, x: &FourVector) -> Result<ComplexFourVector> {
        let g = self.grad_ln_phi(x)?.components();
        let a = self.potential_at(x);
        let ls = self.consts.lambda_sq();
        let q = self.consts.e() / self.consts.m0();
        let s = self.velocity_scale;
        Ok(ComplexFourVector::from_components(std::array::from_fn(
            |mu| s * (I * ls * g[mu] + q * a.0[mu]),
        )))
    }

    /// `(V₊, V₋)` with `𝒱 = (1−i)/2 V₊ + (1+i)/2 V₋`.
    pub fn drift_velocities(&self, x: &FourVector) -> Result<(FourVector, FourVector)> {
        Ok(drift_velocities(&self.complex_velocity(x)?))
    }

    pub fn velocity_jet(&self, x: &FourVector) -> Result<VelocityJet> {
        match self.derivatives {
            Derivatives::Analytic => self.velocity_jet_analytic(x),
            Derivatives::FiniteDifference { h } => self.velocity_jet_fd(x, h),
        }
    }

    fn velocity_jet_analytic(&self, x: &FourVector) -> Result<VelocityJet> {
        let jet = self
            .model
            .log_jet(x, &self.consts)
            .ok_or(Error::NodeSingularity {
                x: *x,
                modulus: 0.0,
            })?;
        self.node_check(x, jet.phi)?;
        let pot = self.potential.jet(x);
        let ls = self.consts.lambda_sq();
        let q = self.consts.e() / self.consts.m0();
        let s = self.velocity_scale;
        let v = std::array::from_fn(|mu| s * (I * ls * METRIC[mu] * jet.d1[mu] + q * pot.a[mu]));
        let d1 = std::array::from_fn(|nu| {
            std::array::from_fn(|mu| {
                s * (I * ls * METRIC[mu] * jet.d2[mu][nu] + q * pot.d1[nu][mu])
            })
        });
        let box_v = std::array::from_fn(|mu| {
            (0..4)
                .map(|nu| {
                    METRIC[nu]
                        * s
                        * (I * ls * METRIC[mu] * jet.d3[mu][nu][nu] + q * pot.d2[nu][nu][mu])
                })
                .sum()
        });
        Ok(VelocityJet { v, d1, box_v })
    }

    fn velocity_jet_fd(&self, x: &FourVector, h: f64) -> Result<VelocityJet> {
        let v0 = self.complex_velocity(x)?.components();
        let mut d1 = [[CZ; 4]; 4];
        let mut box_v = [CZ; 4];
        for nu in 0..4 {
            let (xp, xm) = shifted(x, nu, h);
            let vp = self.complex_velocity(&xp)?.components();
            let vm = self.complex_velocity(&xm)?.components();
            for mu in 0..4 {
                d1[nu][mu] = (vp[mu] - vm[mu]) / (2.0 * h);
                box_v[mu] += METRIC[nu] * (vp[mu] - 2.0 * v0[mu] + vm[mu]) / (h * h);
            }
        }
        Ok(VelocityJet { v: v0, d1, box_v })
    }

    /// `𝔇τ𝒱^μ = 𝒱̂^ν∂_ν𝒱^μ`.
    pub fn material_derivative_v(&self, x: &FourVector) -> Result<ComplexFourVector> {
        let jet = self.velocity_jet(x)?;
        Ok(ComplexFourVector::from_components(
            jet.material_derivative(self.consts.lambda_sq()),
        ))
    }

    /// `𝒱̂_ν F^{μν} = 𝒱_ν F^{μν} + (iλ²/2) ∂_ν F^{μν}`.
    pub fn hat_contraction(&self, x: &FourVector, v: &[Complex64; 4]) -> [Complex64; 4] {
        let (f, div) = self.field_and_divergence(x);
        let ls = self.consts.lambda_sq();
        std::array::from_fn(|mu| {
            let c: Complex64 = (0..4).map(|nu| METRIC[nu] * v[nu] * f.get(mu, nu)).sum();
            c + I * 0.5 * ls * div[mu]
        })
    }

    fn field_and_divergence(&self, x: &FourVector) -> (FieldTensor, [f64; 4]) {
        match self.derivatives {
            Derivatives::Analytic => {
                let jet = self.potential.jet(x);
                (jet.field_tensor(), jet.field_divergence())
            }
            Derivatives::FiniteDifference { h } => {
                let f = self.field_tensor(x);
                let div = std::array::from_fn(|mu| {
                    (0..4)
                        .map(|nu| {
                            let (xp, xm) = shifted(x, nu, h);
                            (self.field_tensor(&xp).get(mu, nu)
                                - self.field_tensor(&xm).get(mu, nu))
                                / (2.0 * h)
                        })
                        .sum()
                });
                (f, div)
            }
        }
    }

    /// Complex Lorentz force `f^μ = −e 𝒱̂_ν F^{μν}`.
    pub fn complex_force(&self, x: &FourVector) -> Result<ComplexFourVector> {
        let v = self.complex_velocity(x)?.components();
        let e = self.consts.e();
        Ok(ComplexFourVector::from_components(
            self.hat_contraction(x, &v).map(|c| -e * c),
        ))
    }

    /// `m0 𝔇τ𝒱^μ + e 𝒱̂_ν F^{μν}`; zero iff `φ` solves Klein-Gordon up to a constant mass.
    pub fn eom_residual(&self, x: &FourVector) -> Result<ComplexFourVector> {
        let jet = self.velocity_jet(x)?;
        let md = jet.material_derivative(self.consts.lambda_sq());
        let hat = self.hat_contraction(x, &jet.v);
        let m0 = self.consts.m0();
        let e = self.consts.e();
        Ok(ComplexFourVector::from_components(std::array::from_fn(
            |mu| m0 * md[mu] + e * hat[mu],
        )))
    }

    /// `∂^α𝒱^β − ∂^β𝒱^α − (e/m0)F^{αβ}`.
    pub fn curl_identity_residual(&self, x: &FourVector) -> Result<[[Complex64; 4]; 4]> {
        let jet = self.velocity_jet(x)?;
        let f = self.field_tensor(x);
        let q = self.consts.e() / self.consts.m0();
        Ok(std::array::from_fn(|a| {
            std::array::from_fn(|b| {
                METRIC[a] * jet.d1[a][b] - METRIC[b] * jet.d1[b][a] - q * f.get(a, b)
            })
        }))
    }

    /// `(iħ∂_ν + eA_ν)(iħ∂^ν + eA^ν)φ − m0²c²φ`. Defined at nodes.
    pub fn kg_residual(&self, x: &FourVector) -> Complex64 {
        let hbar = self.consts.hbar();
        let e = self.consts.e();
        let (phi, d1, box_phi) = match self.derivatives {
            Derivatives::Analytic => {
                let j = self.model.phi_jet(x, &self.consts);
                let b: Complex64 = (0..4).map(|mu| METRIC[mu] * j.d2[mu][mu]).sum();
                (j.phi, j.d1, b)
            }
            Derivatives::FiniteDifference { h } => {
                let phi = self.phi(x);
                let mut d1 = [CZ; 4];
                let mut b = CZ;
                for mu in 0..4 {
                    let (xp, xm) = shifted(x, mu, h);
                    let (fp, fm) = (self.phi(&xp), self.phi(&xm));
                    d1[mu] = (fp - fm) / (2.0 * h);
                    b += METRIC[mu] * (fp - 2.0 * phi + fm) / (h * h);
                }
                (phi, d1, b)
            }
        };
        let (a, div_a) = match self.derivatives {
            Derivatives::Analytic => {
                let j = self.potential.jet(x);
                (j.a, j.divergence())
            }
            Derivatives::FiniteDifference { h } => {
                let a = self.potential.value(x).0;
                let div = (0..4)
                    .map(|mu| {
                        let (xp, xm) = shifted(x, mu, h);
                        (self.potential.value(&xp).0[mu] - self.potential.value(&xm).0[mu])
                            / (2.0 * h)
                    })
                    .sum();
                (a, div)
            }
        };
        let a_dot_dphi: Complex64 = (0..4).map(|mu| a[mu] * d1[mu]).sum();
        let a_sq: f64 = (0..4).map(|mu| METRIC[mu] * a[mu] * a[mu]).sum();
        -hbar * hbar * box_phi
            + I * hbar * e * div_a * phi
            + 2.0 * I * hbar * e * a_dot_dphi
            + e * e * a_sq * phi
            - self.consts.mass_shell() * phi
    }

    /// `𝒱*_μ𝒱^μ` at `x`.
    pub fn invariant(&self, x: &FourVector) -> Result<f64> {
        let v = self.complex_velocity(x)?;
        Ok(crate::spacetime::complex_minkowski_dot(&v.conj(), &v).re)
    }

    /// Gauge-transformed copy, see [`super::gauge_transform`].
    pub fn gauge_transformed(&self, gauge: &super::GaugeFunction) -> Result<System> {
        let (model, potential) = super::gauge_transform(&self.model, &self.potential, gauge);
        let mut out = System::new(model, potential, self.consts)?;
        out.derivatives = self.derivatives;
        out.node_epsilon = self.node_epsilon;
        out.velocity_scale = self.velocity_scale;
        Ok(out)
    }
}

/// `V₊ = Re 𝒱 − Im 𝒱`, `V₋ = Re 𝒱 + Im 𝒱`.
pub fn drift_velocities(v: &ComplexFourVector) -> (FourVector, FourVector) {
    (v.re - v.im, v.re + v.im)
}

fn shifted(x: &FourVector, mu: usize, h: f64) -> (FourVector, FourVector) {
    let mut xp = *x;
    let mut xm = *x;
    xp.0[mu] += h;
    xm.0[mu] -= h;
    (xp, xm)
}

/// `out[ν][μ] = ∂_ν f^μ` by central differences.
fn fd_gradient(f: impl Fn(&FourVector) -> [f64; 4], x: &FourVector, h: f64) -> [[f64; 4]; 4] {
    std::array::from_fn(|nu| {
        let (xp, xm) = shifted(x, nu, h);
        let (fp, fm) = (f(&xp), f(&xm));
        std::array::from_fn(|mu| (fp[mu] - fm[mu]) / (2.0 * h))
    })
}
