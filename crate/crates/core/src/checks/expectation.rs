use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{
    ls_slope, Bootstrap, CheckProvenance, CheckReport, PathTable, Statistic, ToleranceBasis,
    MACHINE_TOLERANCE, SE_MULTIPLE,
};
use crate::error::{Error, Result};
use crate::spacetime::{FourVector, METRIC};
use crate::stochastic::PathEnsemble;
use crate::wavefunction::System;

const I: Complex64 = Complex64::new(0.0, 1.0);
const CZ: Complex64 = Complex64::new(0.0, 0.0);

/// `Ok(None)` at an interference node, so the sample can be excluded.
fn skip_node<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::NodeSingularity { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn require_records(ens: &PathEnsemble, needed: usize) -> Result<()> {
    if ens.n_records() < needed {
        return Err(Error::InsufficientSlices {
            needed,
            have: ens.n_records(),
        });
    }
    Ok(())
}

/// Monte Carlo mean of `𝒱*_μ𝒱^μ` over all recorded samples against `c²`.
///
/// Pure-phase models are checked pointwise at machine precision; otherwise
/// the mean must lie within 3 bootstrap SE.
pub fn lorentz_invariant_estimate(
    ens: &PathEnsemble,
    system: &System,
    boot: &Bootstrap,
) -> Result<CheckReport> {
    let c2 = system.consts().c().powi(2);
    let n = ens.n_records();
    let table = PathTable::build(ens.n_paths(), 3, |i, row| {
        for x in ens.path(i) {
            match skip_node(system.invariant(x))? {
                Some(v) => {
                    row[0] += v;
                    row[1] += 1.0;
                    row[2] = row[2].max((v - c2).abs());
                }
                None => {}
            }
        }
        Ok(())
    })?;
    let sums = table.means(None);
    let excluded = ens.n_paths() * n - (sums[1] * ens.n_paths() as f64).round() as usize;
    let (value, se) = table.estimate(boot, |m| vec![m[0] / m[1]])?;
    let max_dev = table.rows_max(2);
    let prov = CheckProvenance {
        excluded,
        ..CheckProvenance::ensemble(ens).with_bootstrap(boot)
    };
    let report = if system.model().is_pure_phase() {
        CheckReport::new(
            "lorentz_invariant",
            vec![
                Statistic::new("mean V*.V", value[0], c2, MACHINE_TOLERANCE * c2).with_se(se[0]),
                Statistic::new("max |V*.V - c^2|", max_dev, 0.0, MACHINE_TOLERANCE * c2),
            ],
            MACHINE_TOLERANCE,
            ToleranceBasis::Machine,
            prov,
        )
    } else {
        CheckReport::new(
            "lorentz_invariant",
            vec![Statistic::new("mean V*.V", value[0], c2, SE_MULTIPLE * se[0]).with_se(se[0])],
            SE_MULTIPLE,
            ToleranceBasis::BootstrapSe,
            prov,
        )
    };
    Ok(report)
}

impl PathTable {
    fn rows_max(&self, col: usize) -> f64 {
        self.rows
            .chunks(self.width)
            .map(|r| r[col])
            .fold(0.0, f64::max)
    }
}

/// Least-squares slope of the per-τ means of `𝒱*·𝒱`; target 0.
pub fn energy_constancy_check(
    ens: &PathEnsemble,
    system: &System,
    boot: &Bootstrap,
) -> Result<CheckReport> {
    require_records(ens, 3)?;
    let n = ens.n_records();
    let taus = ens.tau_grid().to_vec();
    let table = PathTable::build(ens.n_paths(), 2 * n, |i, row| {
        for (r, x) in ens.path(i).iter().enumerate() {
            if let Some(v) = skip_node(system.invariant(x))? {
                row[2 * r] += v;
                row[2 * r + 1] += 1.0;
            }
        }
        Ok(())
    })?;
    let slope = |m: &[f64]| {
        let y: Vec<f64> = (0..n).map(|r| m[2 * r] / m[2 * r + 1]).collect();
        vec![ls_slope(&taus, &y)]
    };
    let (value, se) = table.estimate(boot, slope)?;
    let prov = CheckProvenance::ensemble(ens).with_bootstrap(boot);
    let report = if system.model().is_pure_phase() {
        let span = taus[n - 1] - taus[0];
        let c2 = system.consts().c().powi(2);
        CheckReport::new(
            "energy_constancy",
            vec![Statistic::new(
                "slope of E[V*.V]",
                value[0],
                0.0,
                MACHINE_TOLERANCE * c2 / span,
            )
            .with_se(se[0])],
            MACHINE_TOLERANCE,
            ToleranceBasis::Machine,
            prov,
        )
    } else {
        CheckReport::new(
            "energy_constancy",
            vec![
                Statistic::new("slope of E[V*.V]", value[0], 0.0, SE_MULTIPLE * se[0])
                    .with_se(se[0]),
            ],
            SE_MULTIPLE,
            ToleranceBasis::BootstrapSe,
            prov,
        )
    };
    Ok(report)
}

/// `m0 d²/dτ² E[x̂^μ]` against `E[Re f^μ]` on interior records.
///
/// The left side is the second difference of the mean trajectory; the right
/// side is averaged with the matching three-point weights `(1, 10, 1)/12`.
/// Each component passes within `max(3 SE, rel_floor · max |RHS^μ|)`.
pub fn ehrenfest_check(
    ens: &PathEnsemble,
    system: &System,
    rel_floor: f64,
    boot: &Bootstrap,
) -> Result<CheckReport> {
    require_records(ens, 5)?;
    let n = ens.n_records();
    let m0 = system.consts().m0();
    let table = PathTable::build(ens.n_paths(), 8 * n, |i, row| {
        for (r, x) in ens.path(i).iter().enumerate() {
            let f = system.complex_force(x)?;
            for mu in 0..4 {
                row[8 * r + mu] = x.0[mu];
                row[8 * r + 4 + mu] = f.re.0[mu];
            }
        }
        Ok(())
    })?;
    let d2 = ens.record_dtau().powi(2);
    let sides = move |m: &[f64]| {
        let mut out = Vec::with_capacity(8 * (n - 2));
        for r in 1..n - 1 {
            for mu in 0..4 {
                let x = |s: usize| m[8 * s + mu];
                let f = |s: usize| m[8 * s + 4 + mu];
                let lhs = (x(r + 1) - 2.0 * x(r) + x(r - 1)) / d2;
                let rhs = (f(r - 1) + 10.0 * f(r) + f(r + 1)) / (12.0 * m0);
                out.push(lhs - rhs);
                out.push(rhs);
            }
        }
        out
    };
    let (value, se) = table.estimate(boot, sides)?;
    let mut scale = [0.0f64; 4];
    for (j, v) in value.chunks(2).enumerate() {
        scale[j % 4] = scale[j % 4].max(v[1].abs());
    }
    let mut stats = Vec::new();
    for (j, v) in value.chunks(2).enumerate() {
        let (r, mu) = (j / 4 + 1, j % 4);
        let s = se[2 * j];
        let allowed = (SE_MULTIPLE * s).max(rel_floor * scale[mu]);
        stats.push(
            Statistic::new(
                format!("lhs - rhs [record {r}, mu {mu}]"),
                v[0],
                0.0,
                allowed,
            )
            .with_se(s),
        );
    }
    Ok(CheckReport::new(
        "ehrenfest",
        stats,
        SE_MULTIPLE,
        ToleranceBasis::BootstrapSe,
        CheckProvenance::ensemble(ens).with_bootstrap(boot),
    )
    .with_note(format!(
        "relative floor {rel_floor} of max |E[Re f]/m0| per component"
    )))
}

/// `amplitude^μ · exp(i k_ν x^ν)`, coordinate wave numbers `k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrigTerm {
    pub amplitude: [Complex64; 4],
    pub k: [f64; 4],
}

/// Smooth complex four-vector test field with analytic derivatives.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum TestField {
    Constant([Complex64; 4]),
    /// `α^μ(x) = x^μ`.
    Coordinate,
    /// Sum of [`TrigTerm`]s.
    Trig(Vec<TrigTerm>),
}

/// Value, `d1[ν][μ] = ∂_ν α^μ` and `d2[ν][μ] = ∂_ν² α^μ`.
struct FieldJet {
    v: [Complex64; 4],
    d1: [[Complex64; 4]; 4],
    d2: [[Complex64; 4]; 4],
}

impl TestField {
    /// Random trigonometric polynomial whose harmonics fit the given
    /// periods; coordinates without a period are not varied.
    pub fn random_trig(seed: u64, n_terms: usize, periods: [Option<f64>; 4]) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let terms = (0..n_terms)
            .map(|_| {
                let k = std::array::from_fn(|nu| match periods[nu] {
                    Some(l) => 2.0 * std::f64::consts::PI * rng.random_range(-2i32..=2) as f64 / l,
                    None => 0.0,
                });
                let amplitude = std::array::from_fn(|_| {
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                });
                TrigTerm { amplitude, k }
            })
            .collect();
        TestField::Trig(terms)
    }

    pub fn value(&self, x: &FourVector) -> [Complex64; 4] {
        self.jet(x).v
    }

    fn jet(&self, x: &FourVector) -> FieldJet {
        let mut j = FieldJet {
            v: [CZ; 4],
            d1: [[CZ; 4]; 4],
            d2: [[CZ; 4]; 4],
        };
        match self {
            TestField::Constant(c) => j.v = *c,
            TestField::Coordinate => {
                for mu in 0..4 {
                    j.v[mu] = x.0[mu].into();
                    j.d1[mu][mu] = 1.0.into();
                }
            }
            TestField::Trig(terms) => {
                for t in terms {
                    let phase: f64 = (0..4).map(|nu| t.k[nu] * x.0[nu]).sum();
                    let e = Complex64::from_polar(1.0, phase);
                    for mu in 0..4 {
                        let a = t.amplitude[mu] * e;
                        j.v[mu] += a;
                        for nu in 0..4 {
                            j.d1[nu][mu] += I * t.k[nu] * a;
                            j.d2[nu][mu] -= t.k[nu] * t.k[nu] * a;
                        }
                    }
                }
            }
        }
        j
    }
}

/// Right-hand side used by [`partial_integration_check`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsForm {
    /// `E[𝔇τα·β + α·𝔇*τβ]` and `E[𝔇*τα·β + α·𝔇τβ]`. Exact for a law obeying
    /// the osmotic relation with no boundary terms.
    MeanDerivative,
    /// The sampler's forward generator applied to `α·β`, which carries the
    /// Itô term of the Euler–Maruyama moments.
    ForwardGenerator,
}

fn mink(a: &[Complex64; 4], b: &[Complex64; 4]) -> Complex64 {
    (0..4).map(|mu| METRIC[mu] * a[mu] * b[mu]).sum()
}

/// `𝔇τα^μ` (`star = false`) or `𝔇*τα^μ` (`star = true`).
fn mean_derivative(j: &FieldJet, v: &[Complex64; 4], ls: f64, star: bool) -> [Complex64; 4] {
    std::array::from_fn(|mu| {
        let mut s = CZ;
        let mut wave = CZ;
        for nu in 0..4 {
            let vn = if star { v[nu].conj() } else { v[nu] };
            s += vn * j.d1[nu][mu];
            wave += METRIC[nu] * j.d2[nu][mu];
        }
        let sign = if star { -1.0 } else { 1.0 };
        s + sign * I * 0.5 * ls * wave
    })
}

/// `d/dτ E[α_μβ^μ]` by central differences of per-record means, against
/// the chosen right-hand side. Each statistic is the record-averaged
/// difference, real and imaginary parts separately, within 3 SE.
pub fn partial_integration_check(
    ens: &PathEnsemble,
    alpha: &TestField,
    beta: &TestField,
    system: &System,
    form: RhsForm,
    boot: &Bootstrap,
) -> Result<CheckReport> {
    require_records(ens, 3)?;
    let n = ens.n_records();
    let ls = system.consts().lambda_sq();
    let n_rhs = match form {
        RhsForm::MeanDerivative => 2,
        RhsForm::ForwardGenerator => 1,
    };
    let w = 2 + 2 * n_rhs;
    let table = PathTable::build(ens.n_paths(), w * n, |i, row| {
        for (r, x) in ens.path(i).iter().enumerate() {
            let (a, b) = (alpha.jet(x), beta.jet(x));
            let v = system.complex_velocity(x)?.components();
            let ab = mink(&a.v, &b.v);
            let rhs: Vec<Complex64> = match form {
                RhsForm::MeanDerivative => {
                    let (da, dsa) = (
                        mean_derivative(&a, &v, ls, false),
                        mean_derivative(&a, &v, ls, true),
                    );
                    let (db, dsb) = (
                        mean_derivative(&b, &v, ls, false),
                        mean_derivative(&b, &v, ls, true),
                    );
                    vec![
                        mink(&da, &b.v) + mink(&a.v, &dsb),
                        mink(&dsa, &b.v) + mink(&a.v, &db),
                    ]
                }
                RhsForm::ForwardGenerator => {
                    let vp: [f64; 4] = std::array::from_fn(|mu| v[mu].re - v[mu].im);
                    let mut g = CZ;
                    for nu in 0..4 {
                        let d1: Complex64 = (0..4)
                            .map(|mu| {
                                METRIC[mu] * (a.d1[nu][mu] * b.v[mu] + a.v[mu] * b.d1[nu][mu])
                            })
                            .sum();
                        let d2: Complex64 = (0..4)
                            .map(|mu| {
                                METRIC[mu]
                                    * (a.d2[nu][mu] * b.v[mu]
                                        + 2.0 * a.d1[nu][mu] * b.d1[nu][mu]
                                        + a.v[mu] * b.d2[nu][mu])
                            })
                            .sum();
                        g += vp[nu] * d1 + 0.5 * ls * d2;
                    }
                    vec![g]
                }
            };
            let o = w * r;
            row[o] = ab.re;
            row[o + 1] = ab.im;
            for (k, c) in rhs.iter().enumerate() {
                row[o + 2 + 2 * k] = c.re;
                row[o + 3 + 2 * k] = c.im;
            }
        }
        Ok(())
    })?;
    let dt = 2.0 * ens.record_dtau();
    let interior = (n - 2) as f64;
    let diffs = move |m: &[f64]| {
        let mut out = vec![0.0; 2 * n_rhs];
        for r in 1..n - 1 {
            for part in 0..2 {
                let lhs = (m[w * (r + 1) + part] - m[w * (r - 1) + part]) / dt;
                for k in 0..n_rhs {
                    out[2 * k + part] += (lhs - m[w * r + 2 + 2 * k + part]) / interior;
                }
            }
        }
        out
    };
    let (value, se) = table.estimate(boot, diffs)?;
    let names = match form {
        RhsForm::MeanDerivative => vec![
            "D alpha.beta + alpha.D* beta",
            "D* alpha.beta + alpha.D beta",
        ],
        RhsForm::ForwardGenerator => vec!["forward generator"],
    };
    let mut stats = Vec::new();
    for (k, name) in names.iter().enumerate() {
        for (part, label) in ["re", "im"].iter().enumerate() {
            let j = 2 * k + part;
            stats.push(
                Statistic::new(
                    format!("lhs - rhs ({name}, {label})"),
                    value[j],
                    0.0,
                    SE_MULTIPLE * se[j],
                )
                .with_se(se[j]),
            );
        }
    }
    Ok(CheckReport::new(
        "partial_integration",
        stats,
        SE_MULTIPLE,
        ToleranceBasis::BootstrapSe,
        CheckProvenance::ensemble(ens).with_bootstrap(boot),
    ))
}
