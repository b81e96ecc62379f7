use num_complex::Complex64;

use super::{CheckProvenance, CheckReport, Statistic, ToleranceBasis, MACHINE_TOLERANCE};
use crate::error::{Error, Result};
use crate::spacetime::{FourVector, METRIC};
use crate::stochastic::{increment_statistics, PathEnsemble, RngStream};
use crate::wavefunction::{GaugeFunction, System};

/// Absolute bound on the stochastic equation of motion residual.
pub const EOM_TOLERANCE: f64 = 1e-5;
/// Entrywise bound on the curl identity.
pub const CURL_TOLERANCE: f64 = 1e-6;
/// Entrywise relative bound on the pooled increment covariance.
pub const WIENER_TOLERANCE: f64 = 0.05;

/// `n` points uniform in the box, from their own seeded stream.
pub fn sample_points(seed: u64, n: usize, min: [f64; 4], max: [f64; 4]) -> Vec<FourVector> {
    let mut rng = RngStream::new(seed, u64::MAX);
    (0..n)
        .map(|_| {
            FourVector(std::array::from_fn(|mu| {
                min[mu] + (max[mu] - min[mu]) * rng.uniform()
            }))
        })
        .collect()
}

fn require_points(points: &[FourVector]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::InvalidSimulation(
            "pointwise checks need at least one point".into(),
        ));
    }
    Ok(())
}

/// Pooled `(Δx − V₊Δτ)/λ` against a unit Wiener process: covariance over
/// `Δτ` within 5% of the identity entrywise, means within 5 SE of zero.
pub fn wiener_increment_check(ens: &PathEnsemble, system: &System) -> Result<CheckReport> {
    let st = increment_statistics(ens, system)?;
    let cov = st.normalized_covariance();
    let se = st.mean_standard_error();
    let mut stats = Vec::new();
    for a in 0..4 {
        for b in a..4 {
            let target = if a == b { 1.0 } else { 0.0 };
            stats.push(Statistic::new(
                format!("cov[{a}][{b}]/dtau"),
                cov[a][b],
                target,
                WIENER_TOLERANCE,
            ));
        }
    }
    for mu in 0..4 {
        stats.push(
            Statistic::new(format!("mean[{mu}]"), st.mean[mu], 0.0, 5.0 * se[mu]).with_se(se[mu]),
        );
    }
    Ok(CheckReport::new(
        "wiener_increments",
        stats,
        WIENER_TOLERANCE,
        ToleranceBasis::BootstrapSe,
        CheckProvenance::ensemble(ens),
    )
    .with_note(format!("{} increments over dtau {:e}", st.count, st.dtau)))
}

/// `m0·½∂^μ[KG(φ)/(m0²φ)]` by central differences of the ratio.
fn kg_ratio_gradient(s: &System, x: &FourVector, h: f64) -> [Complex64; 4] {
    let c = s.consts();
    let ratio = |y: &FourVector| s.kg_residual(y) / (c.m0() * c.m0() * s.phi(y));
    std::array::from_fn(|mu| {
        let (mut xp, mut xm) = (*x, *x);
        xp.0[mu] += h;
        xm.0[mu] -= h;
        c.m0() * 0.5 * METRIC[mu] * (ratio(&xp) - ratio(&xm)) / (2.0 * h)
    })
}

/// Stochastic equation of motion at the given points. The second statistic
/// compares the residual with the gradient of the Klein-Gordon ratio, which
/// it must equal for any wavefunction.
pub fn eom_residual_check(system: &System, points: &[FourVector]) -> Result<CheckReport> {
    require_points(points)?;
    let mut worst = 0.0f64;
    let mut dev = 0.0f64;
    let mut pred = 0.0f64;
    for x in points {
        let r = system.eom_residual(x)?.components();
        let o = kg_ratio_gradient(system, x, 1e-4);
        for mu in 0..4 {
            worst = worst.max(r[mu].norm());
            dev = dev.max((r[mu] - o[mu]).norm());
            pred = pred.max(o[mu].norm());
        }
    }
    Ok(CheckReport::new(
        "eom_residual",
        vec![
            Statistic::new("max |eom residual|", worst, 0.0, EOM_TOLERANCE),
            Statistic::new(
                "max |residual - kg ratio gradient|",
                dev,
                0.0,
                EOM_TOLERANCE * pred + 1e-8,
            ),
        ],
        EOM_TOLERANCE,
        ToleranceBasis::FdError,
        CheckProvenance::default(),
    )
    .with_note(format!(
        "{} points, largest predicted residual {pred:e}",
        points.len()
    )))
}

pub fn curl_identity_check(system: &System, points: &[FourVector]) -> Result<CheckReport> {
    require_points(points)?;
    let mut worst = 0.0f64;
    for x in points {
        for row in system.curl_identity_residual(x)? {
            for v in row {
                worst = worst.max(v.norm());
            }
        }
    }
    Ok(CheckReport::new(
        "curl_identity",
        vec![Statistic::new(
            "max |curl residual|",
            worst,
            0.0,
            CURL_TOLERANCE,
        )],
        CURL_TOLERANCE,
        ToleranceBasis::FdError,
        CheckProvenance::default(),
    )
    .with_note(format!("{} points", points.len())))
}

/// `𝒱`, `|KG(φ)|` and `j_KG` before and after `A → A − ∂Λ`, `φ → e^{−ieΛ/ħ}φ`.
pub fn gauge_invariance_check(
    system: &System,
    gauge: &GaugeFunction,
    points: &[FourVector],
) -> Result<CheckReport> {
    require_points(points)?;
    let gauged = system.gauge_transformed(gauge)?;
    let ec = system.consts().e() * system.consts().c();
    let current = |s: &System, x: &FourVector, v: &[Complex64; 4]| -> [f64; 4] {
        let rho = s.phi(x).norm_sqr();
        v.map(|c| -ec * c.re * rho)
    };
    let (mut dv, mut sv, mut dk, mut sk, mut dj, mut sj) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for x in points {
        let a = system.complex_velocity(x)?.components();
        let b = gauged.complex_velocity(x)?.components();
        let (ja, jb) = (current(system, x, &a), current(&gauged, x, &b));
        for mu in 0..4 {
            dv = dv.max((a[mu] - b[mu]).norm());
            sv = sv.max(a[mu].norm());
            dj = dj.max((ja[mu] - jb[mu]).abs());
            sj = sj.max(ja[mu].abs());
        }
        let (ka, kb) = (system.kg_residual(x).norm(), gauged.kg_residual(x).norm());
        dk = dk.max((ka - kb).abs());
        sk = sk
            .max(ka)
            .max(system.consts().mass_shell() * system.phi(x).norm());
    }
    Ok(CheckReport::new(
        "gauge_invariance",
        vec![
            Statistic::new("max |delta V|", dv, 0.0, MACHINE_TOLERANCE * sv.max(1.0)),
            Statistic::new(
                "max |delta |kg residual||",
                dk,
                0.0,
                MACHINE_TOLERANCE * sk.max(1.0),
            ),
            Statistic::new("max |delta j_kg|", dj, 0.0, MACHINE_TOLERANCE * sj.max(1.0)),
        ],
        MACHINE_TOLERANCE,
        ToleranceBasis::Machine,
        CheckProvenance::default(),
    )
    .with_note(format!("{} points", points.len())))
}
