//! Theorem-level verifications over ensembles and grids, reported as
//! [`CheckReport`]s.

mod action;
mod current;
mod expectation;
mod pointwise;
mod residuals;


use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::stochastic::{PathEnsemble, RngStream};

pub use action::{action_stationarity_check, ActionSweep, Perturbation};
pub use current::{
    charge_conservation_check, compute_j_kg, compute_j_stochastic, current_equivalence_check,
    CurrentField,
};
pub use expectation::{
    ehrenfest_check, energy_constancy_check, lorentz_invariant_estimate, partial_integration_check,
    RhsForm, TestField, TrigTerm,
};
pub use pointwise::{
    curl_identity_check, eom_residual_check, gauge_invariance_check, sample_points,
    wiener_increment_check, CURL_TOLERANCE, EOM_TOLERANCE, WIENER_TOLERANCE,
};
pub use residuals::{
    analytic_residual_check, continuity_check, fokker_planck_check, histogram_residual_check,
    osmotic_check, HistogramEquation,
};

/// Default number of bootstrap resamples over paths.
pub const BOOTSTRAP_RESAMPLES: usize = 200;
/// Monte Carlo tolerances are this many standard errors.
pub const SE_MULTIPLE: f64 = 3.0;
/// Relative tolerance for pointwise-exact cases.
pub const MACHINE_TOLERANCE: f64 = 1e-10;
/// Relative tolerance for analytic-grid residuals.
pub const FD_TOLERANCE: f64 = 1e-4;

const BOOTSTRAP_SALT: u64 = 0x5eed_b007_5742_a11c;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ToleranceBasis {
    Machine,
    FdError,
    BootstrapSe,
}

/// One compared quantity. It passes iff `|value − target| ≤ allowed`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Statistic {
    pub name: String,
    pub value: f64,
    pub target: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se: Option<f64>,
    pub allowed: f64,
}

impl Statistic {
    pub fn new(name: impl Into<String>, value: f64, target: f64, allowed: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target,
            se: None,
            allowed,
        }
    }

    pub fn with_se(mut self, se: f64) -> Self {
        self.se = Some(se);
        self
    }

    pub fn pass(&self) -> bool {
        (self.value - self.target).abs() <= self.allowed
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CheckProvenance {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dtau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap_resamples: Option<usize>,
    /// Samples dropped at interference nodes.
    #[serde(skip_serializing_if = "is_zero")]
    pub excluded: usize,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

impl CheckProvenance {
    pub fn ensemble(ens: &PathEnsemble) -> Self {
        Self {
            n_paths: Some(ens.n_paths()),
            dtau: Some(ens.dtau()),
            ..Self::default()
        }
    }

    pub fn grid(h: f64) -> Self {
        Self {
            h: Some(h),
            ..Self::default()
        }
    }

    fn with_bootstrap(mut self, b: &Bootstrap) -> Self {
        self.bootstrap_resamples = Some(b.resamples);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub statistics: Vec<Statistic>,
    /// Multiple of the SE for `bootstrap-se`, relative bound otherwise.
    pub tolerance: f64,
    pub basis: ToleranceBasis,
    pub pass: bool,
    pub provenance: CheckProvenance,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn new(
        check: impl Into<String>,
        statistics: Vec<Statistic>,
        tolerance: f64,
        basis: ToleranceBasis,
        provenance: CheckProvenance,
    ) -> Self {
        let pass = statistics.iter().all(Statistic::pass);
        Self {
            check: check.into(),
            statistics,
            tolerance,
            basis,
            pass,
            provenance,
            notes: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn statistic(&self, name: &str) -> Option<&Statistic> {
        self.statistics.iter().find(|s| s.name == name)
    }

    /// Largest `|value − target| / allowed` over the statistics.
    pub fn worst_ratio(&self) -> f64 {
        self.statistics
            .iter()
            .map(|s| {
                let d = (s.value - s.target).abs();
                if s.allowed > 0.0 {
                    d / s.allowed
                } else if d == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    }
}

/// One JSON object per line.
pub fn write_reports<'a>(
    reports: impl IntoIterator<Item = &'a CheckReport>,
    mut out: impl Write,
) -> Result<()> {
    for r in reports {
        serde_json::to_writer(&mut out, r)?;
        writeln!(out)?;
    }
    Ok(())
}

/// Fixed-width text table, one row per check.
pub fn write_table<'a>(
    reports: impl IntoIterator<Item = &'a CheckReport>,
    mut out: impl Write,
) -> Result<()> {
    writeln!(
        out,
        "{:<40} {:<13} {:>10} {:>12}  result",
        "check", "basis", "tolerance", "worst ratio"
    )?;
    for r in reports {
        let basis = match r.basis {
            ToleranceBasis::Machine => "machine",
            ToleranceBasis::FdError => "fd-error",
            ToleranceBasis::BootstrapSe => "bootstrap-se",
        };
        writeln!(
            out,
            "{:<40} {:<13} {:>10.1e} {:>12.3e}  {}",
            r.check,
            basis,
            r.tolerance,
            r.worst_ratio(),
            if r.pass { "pass" } else { "FAIL" }
        )?;
    }
    Ok(())
}

/// Path resampling with its own seeded substreams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bootstrap {
    pub resamples: usize,
    pub seed: u64,
}

impl Bootstrap {
    pub fn new(seed: u64) -> Self {
        Self {
            resamples: BOOTSTRAP_RESAMPLES,
            seed,
        }
    }

    /// Multiplicity of each path in replicate `r`.
    pub fn weights(&self, r: usize, n: usize) -> Vec<f64> {
        let mut rng = RngStream::new(self.seed ^ BOOTSTRAP_SALT, r as u64);
        let mut w = vec![0.0; n];
        for _ in 0..n {
            let i = ((rng.uniform() * n as f64) as usize).min(n - 1);
            w[i] += 1.0;
        }
        w
    }

    /// Replicates of a vector statistic, in replicate order.
    pub fn replicates<F>(&self, n: usize, stat: F) -> Result<Vec<Vec<f64>>>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
    {
        (0..self.resamples)
            .into_par_iter()
            .map(|r| stat(&self.weights(r, n)))
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    }

    /// Componentwise standard deviation over replicates.
    pub fn standard_errors<F>(&self, n: usize, stat: F) -> Result<Vec<f64>>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
    {
        Ok(spread(&self.replicates(n, stat)?))
    }
}

/// Componentwise sample standard deviation; `NaN` entries are skipped.
pub(crate) fn spread(reps: &[Vec<f64>]) -> Vec<f64> {
    let k = reps.first().map_or(0, Vec::len);
    (0..k)
        .map(|j| {
            let vals: Vec<f64> = reps
                .iter()
                .map(|r| r[j])
                .filter(|v| v.is_finite())
                .collect();
            let n = vals.len();
            if n < 2 {
                return f64::NAN;
            }
            let mean = vals.iter().sum::<f64>() / n as f64;
            (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        })
        .collect()
}

/// Per-path rows of sums; column means under path weights drive every
/// expectation-valued check and its bootstrap.
#[derive(Clone, Debug)]
pub(crate) struct PathTable {
    width: usize,
    rows: Vec<f64>,
}

impl PathTable {
    pub fn build<F>(n_paths: usize, width: usize, row: F) -> Result<Self>
    where
        F: Fn(usize, &mut [f64]) -> Result<()> + Sync,
    {
        let rows: Vec<Vec<f64>> = (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let mut r = vec![0.0; width];
                row(i, &mut r)?;
                Ok(r)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            width,
            rows: rows.concat(),
        })
    }

    pub fn n_paths(&self) -> usize {
        self.rows.len() / self.width.max(1)
    }

    /// `Σ_i w_i row_i / Σ_i w_i`.
    pub fn means(&self, weights: Option<&[f64]>) -> Vec<f64> {
        let mut acc = vec![0.0; self.width];
        let mut total = 0.0;
        for (i, row) in self.rows.chunks(self.width).enumerate() {
            let w = weights.map_or(1.0, |w| w[i]);
            if w == 0.0 {
                continue;
            }
            total += w;
            for (a, v) in acc.iter_mut().zip(row) {
                *a += w * v;
            }
        }
        acc.iter().map(|a| a / total).collect()
    }

    /// Statistic of the column means with its bootstrap SE.
    pub fn estimate<F>(&self, boot: &Bootstrap, f: F) -> Result<(Vec<f64>, Vec<f64>)>
    where
        F: Fn(&[f64]) -> Vec<f64> + Sync,
    {
        let value = f(&self.means(None));
        let se = boot.standard_errors(self.n_paths(), |w| Ok(f(&self.means(Some(w)))))?;
        Ok((value, se))
    }
}

/// Least-squares slope of `y` against `x`.
pub(crate) fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
