use serde::Serialize;

use super::{
    spread, Bootstrap, CheckProvenance, CheckReport, Statistic, ToleranceBasis, SE_MULTIPLE,
};
use crate::density::{
    analytic_density, continuity_residual, fokker_planck_residual, osmotic_residual, Axis,
    BinnedEnsemble, DensityGrid, DiffusionSign, GridLayout, ResidualField, VectorField,
};
use crate::error::Result;
use crate::spacetime::FourVector;
use crate::stochastic::PathEnsemble;
use crate::wavefunction::System;

fn grid_step(grid: &DensityGrid) -> f64 {
    grid.layout()
        .axes()
        .iter()
        .map(|a| a.width())
        .fold(0.0, f64::max)
}

fn fd_report(field: &ResidualField, grid: &DensityGrid, tolerance: f64) -> CheckReport {
    let r = field.report(tolerance);
    CheckReport::new(
        field.name.clone(),
        vec![Statistic::new(
            "rms residual",
            r.rms_residual,
            0.0,
            tolerance * r.scale,
        )],
        tolerance,
        ToleranceBasis::FdError,
        CheckProvenance::grid(grid_step(grid)),
    )
    .with_note(format!(
        "term scale {:e}, {} positions",
        r.scale, r.evaluated
    ))
}

/// Fokker-Planck residual on an analytic grid, relative to the term scale.
pub fn fokker_planck_check(
    grid: &DensityGrid,
    drift: &VectorField,
    lambda: f64,
    sign: DiffusionSign,
    tolerance: f64,
) -> Result<CheckReport> {
    Ok(fd_report(
        &fokker_planck_residual(grid, drift, lambda, sign)?,
        grid,
        tolerance,
    ))
}

pub fn continuity_check(
    grid: &DensityGrid,
    re_v: &VectorField,
    tolerance: f64,
) -> Result<CheckReport> {
    Ok(fd_report(
        &continuity_residual(grid, re_v)?,
        grid,
        tolerance,
    ))
}

pub fn osmotic_check(
    grid: &DensityGrid,
    im_v: &VectorField,
    lambda: f64,
    tolerance: f64,
) -> Result<CheckReport> {
    Ok(fd_report(
        &osmotic_residual(grid, im_v, lambda)?,
        grid,
        tolerance,
    ))
}

/// Equation evaluated on histogram or analytic densities. Velocities come from the
/// system; `lambda` is explicit so a wrong value can be fed as a control.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "equation", rename_all = "snake_case")]
pub enum HistogramEquation {
    FokkerPlanck { sign: DiffusionSign, lambda: f64 },
    Continuity,
    Osmotic { lambda: f64 },
}

impl HistogramEquation {
    fn residual(&self, grid: &DensityGrid, system: &System) -> Result<ResidualField> {
        match *self {
            HistogramEquation::FokkerPlanck { sign, lambda } => {
                let drift = |x: &FourVector| {
                    let (vp, vm) = system.drift_velocities(x)?;
                    Ok(match sign {
                        DiffusionSign::Plus => vp,
                        DiffusionSign::Minus => vm,
                    })
                };
                fokker_planck_residual(grid, &drift, lambda, sign)
            }
            HistogramEquation::Continuity => {
                continuity_residual(grid, &|x: &FourVector| Ok(system.complex_velocity(x)?.re))
            }
            HistogramEquation::Osmotic { lambda } => osmotic_residual(
                grid,
                &|x: &FourVector| Ok(system.complex_velocity(x)?.im),
                lambda,
            ),
        }
    }
}

/// Residual of a histogram density against its bootstrap spread: the RMS
/// of per-position z-scores must stay within 3.
pub fn histogram_residual_check(
    ens: &PathEnsemble,
    system: &System,
    layout: &GridLayout,
    records: &[usize],
    equation: HistogramEquation,
    boot: &Bootstrap,
) -> Result<CheckReport> {
    let binned = BinnedEnsemble::new(ens, layout, records)?;
    let grid = binned.density(None)?;
    let field = equation.residual(&grid, system)?;
    let reps = boot.replicates(ens.n_paths(), |w| {
        let g = binned.density(Some(w))?;
        let r = equation.residual(&g, system)?;
        Ok(r.values.iter().map(|v| v.unwrap_or(f64::NAN)).collect())
    })?;
    let se = spread(&reps);
    let z: Vec<f64> = field
        .values
        .iter()
        .zip(&se)
        .filter_map(|(v, s)| match v {
            Some(v) if *s > 0.0 => Some(v / s),
            _ => None,
        })
        .collect();
    let rms_z = (z.iter().map(|v| v * v).sum::<f64>() / z.len().max(1) as f64).sqrt();
    let name = format!("{}_histogram", field.name);
    Ok(CheckReport::new(
        name,
        vec![Statistic::new("rms z", rms_z, 0.0, SE_MULTIPLE).with_se(1.0)],
        SE_MULTIPLE,
        ToleranceBasis::BootstrapSe,
        CheckProvenance {
            h: Some(grid_step(&grid)),
            ..CheckProvenance::ensemble(ens).with_bootstrap(boot)
        },
    )
    .with_note(format!(
        "rms residual {:e}, term scale {:e}, {} positions",
        field.rms(),
        field.scale,
        z.len()
    )))
}

/// Residual of `equation` on the analytic density over `layout` and over
/// the same window at half the step. Both must stay within `tolerance` of
/// the term scale; unless the coarse residual is at roundoff, the observed
/// order `log₂(r_h / r_{h/2})` must be within 0.5 of 2.
pub fn analytic_residual_check(
    system: &System,
    layout: &GridLayout,
    equation: HistogramEquation,
    tolerance: f64,
) -> Result<CheckReport> {
    let fine = GridLayout::new(
        layout
            .axes()
            .iter()
            .map(|a| Axis::new(a.coord, a.min, a.max, 2 * a.bins, a.periodic))
            .collect::<Result<_>>()?,
        *layout.base(),
    )?;
    let evaluate = |l: &GridLayout| -> Result<(ResidualField, f64)> {
        let h = l
            .axes()
            .iter()
            .map(|a| a.width())
            .fold(f64::INFINITY, f64::min);
        let grid = analytic_density(system, l, &[0.0, h, 2.0 * h], 1)?;
        Ok((equation.residual(&grid, system)?, grid_step(&grid)))
    };
    let (coarse, h) = evaluate(layout)?;
    let (refined, _) = evaluate(&fine)?;
    let (rc, rf) = (coarse.report(tolerance), refined.report(tolerance));
    let mut stats = vec![
        Statistic::new("rms residual", rc.rms_residual, 0.0, tolerance * rc.scale),
        Statistic::new(
            "rms residual at h/2",
            rf.rms_residual,
            0.0,
            tolerance * rf.scale,
        ),
    ];
    let roundoff = rc.rms_residual <= 1e-10 * rc.scale.max(f64::MIN_POSITIVE);
    if roundoff {
        stats[0].allowed = stats[0].allowed.max(1e-10 * rc.scale);
    } else {
        stats.push(Statistic::new(
            "observed order",
            (rc.rms_residual / rf.rms_residual).log2(),
            2.0,
            0.5,
        ));
    }
    let mut report = CheckReport::new(
        format!("{}_analytic", coarse.name),
        stats,
        tolerance,
        ToleranceBasis::FdError,
        CheckProvenance::grid(h),
    )
    .with_note(format!(
        "term scale {:e}, {} positions",
        rc.scale, rc.evaluated
    ));
    if roundoff {
        report = report.with_note("residual at roundoff; order not measured");
    }
    Ok(report)
}
