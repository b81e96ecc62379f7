use num_complex::Complex64;
use serde::Serialize;

use super::{CheckProvenance, CheckReport, Statistic, ToleranceBasis};
use crate::density::{analytic_density, GridLayout};
use crate::error::{Error, Result};
use crate::spacetime::{FourVector, METRIC};
use crate::wavefunction::System;

/// Relative bound on the linear coefficient, in units of `|c₂| ε_max`.
pub const ACTION_TOLERANCE: f64 = 1e-3;

/// Real displacement field `ξ^μ(x) = Σ a^μ cos(k_ν x^ν + θ)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Perturbation {
    terms: Vec<([f64; 4], [f64; 4], f64)>,
}

impl Perturbation {
    pub fn uniform(a: [f64; 4]) -> Self {
        Self {
            terms: vec![(a, [0.0; 4], 0.0)],
        }
    }

    pub fn harmonic(a: [f64; 4], k: [f64; 4], phase: f64) -> Self {
        Self {
            terms: vec![(a, k, phase)],
        }
    }

    pub fn and(mut self, other: Perturbation) -> Self {
        self.terms.extend(other.terms);
        self
    }

    /// `(ξ, ∂_ν ξ^μ, □ξ^μ)`.
    fn jet(&self, x: &FourVector) -> ([f64; 4], [[f64; 4]; 4], [f64; 4]) {
        let mut v = [0.0; 4];
        let mut d1 = [[0.0; 4]; 4];
        let mut wave = [0.0; 4];
        for (a, k, th) in &self.terms {
            let s: f64 = (0..4).map(|nu| k[nu] * x.0[nu]).sum::<f64>() + th;
            let (sn, cs) = s.sin_cos();
            let k2: f64 = (0..4).map(|nu| METRIC[nu] * k[nu] * k[nu]).sum();
            for mu in 0..4 {
                v[mu] += a[mu] * cs;
                for nu in 0..4 {
                    d1[nu][mu] -= a[mu] * k[nu] * sn;
                }
                wave[mu] -= a[mu] * k2 * cs;
            }
        }
        (v, d1, wave)
    }
}

/// Quadrature and sweep of the action variation.
///
/// The path perturbation is `ε η(τ) ξ(x)` with `η = sin²(πτ/T)` vanishing
/// at both ends; the induced drift change is `η' ξ + η 𝒱̂^ν∂_ν ξ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ActionSweep {
    pub layout: GridLayout,
    pub tau_span: f64,
    pub n_tau: usize,
    pub epsilons: Vec<f64>,
}

impl ActionSweep {
    pub fn new(layout: GridLayout, epsilon_max: f64) -> Self {
        Self {
            layout,
            tau_span: 1.0,
            n_tau: 32,
            epsilons: (-3..=3).map(|i| epsilon_max * i as f64 / 3.0).collect(),
        }
    }
}

struct Cell {
    weight: f64,
    x: FourVector,
    v: [Complex64; 4],
    xi: [f64; 4],
    d_xi: [Complex64; 4],
}

/// Particle part of `∫dτ E[(m0/2)𝒱*·𝒱 − e A·Re 𝒱]` under the sweep, fitted
/// by `c₀ + c₁ε + c₂ε²`. The linear coefficient must vanish relative to
/// `|c₂| ε_max`, and `c₂` must not.
pub fn action_stationarity_check(
    system: &System,
    xi: &Perturbation,
    sweep: &ActionSweep,
) -> Result<CheckReport> {
    if sweep.epsilons.len() < 3 || sweep.n_tau == 0 || !(sweep.tau_span > 0.0) {
        return Err(Error::InvalidSimulation(
            "action sweep needs three epsilons and a tau span".into(),
        ));
    }
    let layout = &sweep.layout;
    let p = analytic_density(system, layout, &[0.0], 1)?;
    let vol = layout.cell_volume();
    let ls = system.consts().lambda_sq();
    let cells: Vec<Cell> = (0..layout.n_cells())
        .map(|c| {
            let x = layout.cell_point(c);
            let v = system.complex_velocity(&x)?.components();
            let (xi_v, d1, wave) = xi.jet(&x);
            let d_xi = std::array::from_fn(|mu| {
                let conv: Complex64 = (0..4).map(|nu| v[nu] * d1[nu][mu]).sum();
                conv + Complex64::new(0.0, 0.5 * ls * wave[mu])
            });
            Ok(Cell {
                weight: p.slice(0)[c] * vol,
                x,
                v,
                xi: xi_v,
                d_xi,
            })
        })
        .collect::<Result<_>>()?;
    let m0 = system.consts().m0();
    let e = system.consts().e();
    let t = sweep.tau_span;
    let pi = std::f64::consts::PI;
    let dtau = t / sweep.n_tau as f64;
    let action = |eps: f64| -> f64 {
        let mut s = 0.0;
        for j in 0..sweep.n_tau {
            let tau = (j as f64 + 0.5) * dtau;
            let eta = (pi * tau / t).sin().powi(2);
            let eta_d = pi / t * (2.0 * pi * tau / t).sin();
            for c in &cells {
                let ve: [Complex64; 4] =
                    std::array::from_fn(|mu| c.v[mu] + eps * (eta_d * c.xi[mu] + eta * c.d_xi[mu]));
                let kinetic: f64 = (0..4).map(|mu| METRIC[mu] * ve[mu].norm_sqr()).sum();
                let mut xs = c.x;
                for mu in 0..4 {
                    xs.0[mu] += eps * eta * c.xi[mu];
                }
                let a = system.potential_at(&xs);
                let coupling: f64 = (0..4).map(|mu| METRIC[mu] * a.0[mu] * ve[mu].re).sum();
                s += c.weight * dtau * (0.5 * m0 * kinetic - e * coupling);
            }
        }
        s
    };
    let values: Vec<f64> = sweep.epsilons.iter().map(|&eps| action(eps)).collect();
    let [c0, c1, c2] = quadratic_fit(&sweep.epsilons, &values);
    let eps_max = sweep.epsilons.iter().fold(0.0, |m: f64, e| m.max(e.abs()));
    let unperturbed = action(0.0);
    let at_zero = sweep
        .epsilons
        .iter()
        .position(|&e| e == 0.0)
        .map(|i| values[i])
        .unwrap_or(c0);
    let stats = vec![
        Statistic::new(
            "linear coefficient",
            c1,
            0.0,
            ACTION_TOLERANCE * c2.abs() * eps_max,
        ),
        Statistic::new("S(0)", at_zero, unperturbed, 1e-12 * unperturbed.abs()),
    ];
    let h = layout.axes().iter().map(|a| a.width()).fold(0.0, f64::max);
    let mut report = CheckReport::new(
        "action_stationarity",
        stats,
        ACTION_TOLERANCE,
        ToleranceBasis::FdError,
        CheckProvenance::grid(h),
    )
    .with_note(format!("quadratic coefficient {c2:e}"));
    if !(c2.abs() > 0.0) {
        report.pass = false;
        report = report.with_note("quadratic coefficient vanishes");
    }
    Ok(report)
}

/// Least-squares `[c₀, c₁, c₂]` of `y ≈ c₀ + c₁x + c₂x²`.
pub(super) fn quadratic_fit(x: &[f64], y: &[f64]) -> [f64; 3] {
    let mut a = [[0.0; 3]; 3];
    let mut b = [0.0; 3];
    for (&xi, &yi) in x.iter().zip(y) {
        let row = [1.0, xi, xi * xi];
        for i in 0..3 {
            b[i] += row[i] * yi;
            for j in 0..3 {
                a[i][j] += row[i] * row[j];
            }
        }
    }
    // Gaussian elimination with partial pivoting on the 3×3 normal equations.
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for k in col..3 {
                a[r][k] -= f * a[col][k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut c = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| a[i][k] * c[k]).sum();
        c[i] = (b[i] - s) / a[i][i];
    }
    c
}
