//! Klein-Gordon solutions, external potentials and the complex velocity.
//!
//! Every drift field used by the sampler comes from
//! `𝒱^α = iλ²∂^α ln φ + (e/m0)A^α` evaluated on a closed-form solution, so all
//! pointwise identities (Klein-Gordon, equation of motion, curl) can be
//! checked against exact zero.

mod gauge;
mod model;
mod potential;
mod system;


pub use gauge::GaugeFunction;
pub use model::{LogJet, Mode, PhiJet, WaveFunctionModel, ON_SHELL_TOLERANCE};
pub use potential::{PlaneWaveField, PotentialJet, PotentialModel, Profile};
pub use system::{
    drift_velocities, Derivatives, System, VelocityJet, DEFAULT_FD_STEP, DEFAULT_NODE_EPSILON,
};

use num_complex::Complex64;

use crate::error::Result;
use crate::spacetime::{ComplexFourVector, FourVector, PhysicalConstants};

/// `φ(x)` after checking that `model` and `potential` form a valid pair.
pub fn evaluate_phi(
    model: &WaveFunctionModel,
    potential: &PotentialModel,
    x: &FourVector,
    consts: &PhysicalConstants,
) -> Result<Complex64> {
    model.check_pair(potential)?;
    Ok(model.phi(x, consts))
}

pub fn grad_ln_phi(
    model: &WaveFunctionModel,
    potential: &PotentialModel,
    x: &FourVector,
    consts: &PhysicalConstants,
) -> Result<ComplexFourVector> {
    System::new(model.clone(), potential.clone(), *consts)?.grad_ln_phi(x)
}

pub fn complex_velocity(
    model: &WaveFunctionModel,
    potential: &PotentialModel,
    x: &FourVector,
    consts: &PhysicalConstants,
) -> Result<ComplexFourVector> {
    System::new(model.clone(), potential.clone(), *consts)?.complex_velocity(x)
}

pub fn kg_residual(
    model: &WaveFunctionModel,
    potential: &PotentialModel,
    x: &FourVector,
    consts: &PhysicalConstants,
) -> Result<Complex64> {
    Ok(System::new(model.clone(), potential.clone(), *consts)?.kg_residual(x))
}

pub fn material_derivative_v(
    model: &WaveFunctionModel,
    potential: &PotentialModel,
    x: &FourVector,
    consts: &PhysicalConstants,
) -> Result<ComplexFourVector> {
    System::new(model.clone(), potential.clone(), *consts)?.material_derivative_v(x)
}

pub fn eom_residual(
    model: &WaveFunctionModel,
    potential: &PotentialModel,
    x: &FourVector,
    consts: &PhysicalConstants,
) -> Result<ComplexFourVector> {
    System::new(model.clone(), potential.clone(), *consts)?.eom_residual(x)
}

pub fn curl_identity_residual(
    model: &WaveFunctionModel,
    potential: &PotentialModel,
    x: &FourVector,
    consts: &PhysicalConstants,
) -> Result<[[Complex64; 4]; 4]> {
    System::new(model.clone(), potential.clone(), *consts)?.curl_identity_residual(x)
}

/// `(φ, A) ↦ (e^{−ieΛ/ħ}φ, A − ∂Λ)`.
pub fn gauge_transform(
    model: &WaveFunctionModel,
    potential: &PotentialModel,
    gauge: &GaugeFunction,
) -> (WaveFunctionModel, PotentialModel) {
    (
        WaveFunctionModel::Gauged {
            inner: Box::new(model.clone()),
            gauge: gauge.clone(),
        },
        PotentialModel::Gauged {
            inner: Box::new(potential.clone()),
            gauge: gauge.clone(),
        },
    )
}
