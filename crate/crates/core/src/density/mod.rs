//! Histogram and analytic densities on reduced grids, and finite-difference
//! residuals of the Fokker-Planck, continuity and osmotic relations.

mod grid;
mod residual;

#[cfg(test)]
mod tests;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use grid::{Axis, GridLayout};
pub use residual::{
    continuity_residual, fokker_planck_residual, osmotic_residual, DiffusionSign, ResidualField,
    ResidualReport, VectorField, HALF_COUNT, MASK_COUNT,
};

use crate::error::{Error, Result};
use crate::spacetime::FourVector;
use crate::stochastic::PathEnsemble;
use crate::wavefunction::System;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSource {
    Histogram,
    Analytic,
}

/// `p(x, τ)` on a [`GridLayout`], one slice per τ.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityGrid {
    layout: GridLayout,
    taus: Vec<f64>,
    slices: Vec<Vec<f64>>,
    /// Weighted histogram counts per slice; `None` for analytic grids.
    counts: Option<Vec<Vec<f64>>>,
    /// Fraction of samples landing inside the window, per slice.
    coverage: Vec<f64>,
    source: GridSource,
}

impl DensityGrid {
    /// Grid from raw values. Values must be finite and nonnegative; no
    /// normalization is imposed.
    pub fn from_values(layout: GridLayout, taus: Vec<f64>, slices: Vec<Vec<f64>>) -> Result<Self> {
        if taus.len() != slices.len() || taus.is_empty() {
            return Err(Error::InvalidGrid("one slice per tau is required".into()));
        }
        for s in &slices {
            if s.len() != layout.n_cells() {
                return Err(Error::InvalidGrid(
                    "slice length does not match the layout".into(),
                ));
            }
            if !s.iter().all(|v| v.is_finite() && *v >= 0.0) {
                return Err(Error::InvalidGrid(
                    "densities must be finite and nonnegative".into(),
                ));
            }
        }
        if taus.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid("tau values must increase".into()));
        }
        let coverage = vec![1.0; taus.len()];
        Ok(Self {
            layout,
            taus,
            slices,
            counts: None,
            coverage,
            source: GridSource::Analytic,
        })
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }
    pub fn taus(&self) -> &[f64] {
        &self.taus
    }
    pub fn n_slices(&self) -> usize {
        self.taus.len()
    }
    pub fn slice(&self, s: usize) -> &[f64] {
        &self.slices[s]
    }
    pub fn counts(&self, s: usize) -> Option<&[f64]> {
        self.counts.as_ref().map(|c| c[s].as_slice())
    }
    pub fn coverage(&self) -> &[f64] {
        &self.coverage
    }
    pub fn source(&self) -> GridSource {
        self.source
    }

    /// `Σ p · cell volume` on slice `s`.
    pub fn normalization(&self, s: usize) -> f64 {
        self.slices[s].iter().sum::<f64>() * self.layout.cell_volume()
    }

    /// `a·self + b·other` on identical layouts and τ values.
    pub fn combine(&self, a: f64, other: &DensityGrid, b: f64) -> Result<DensityGrid> {
        if !self.layout.same_shape(&other.layout) || self.taus != other.taus {
            return Err(Error::AxesMismatch("grids differ in layout or tau".into()));
        }
        let slices = self
            .slices
            .iter()
            .zip(&other.slices)
            .map(|(x, y)| x.iter().zip(y).map(|(u, v)| a * u + b * v).collect())
            .collect();
        DensityGrid::from_values(self.layout.clone(), self.taus.clone(), slices)
    }

    /// L1 distance `Σ |p − q| · vol` on slice `s`.
    pub fn l1_distance(&self, other: &DensityGrid, s: usize, t: usize) -> Result<f64> {
        if !self.layout.same_shape(&other.layout) {
            return Err(Error::AxesMismatch("grids differ in layout".into()));
        }
        let d: f64 = self.slices[s]
            .iter()
            .zip(&other.slices[t])
            .map(|(a, b)| (a - b).abs())
            .sum();
        Ok(d * self.layout.cell_volume())
    }
}

/// Normalized histogram of the ensemble at each requested record.
///
/// `weights[i]` multiplies path `i` (bootstrap resampling); `None` means 1.
pub fn estimate_density(
    ensemble: &PathEnsemble,
    layout: &GridLayout,
    records: &[usize],
    weights: Option<&[f64]>,
) -> Result<DensityGrid> {
    BinnedEnsemble::new(ensemble, layout, records)?.density(weights)
}

/// Cell of every path at each requested record, located once so that
/// reweighted histograms skip the search.
#[derive(Debug, Clone)]
pub struct BinnedEnsemble {
    layout: GridLayout,
    taus: Vec<f64>,
    cells: Vec<Vec<Option<u32>>>,
    n_paths: usize,
}

impl BinnedEnsemble {
    pub fn new(ensemble: &PathEnsemble, layout: &GridLayout, records: &[usize]) -> Result<Self> {
        if ensemble.n_paths() == 0 {
            return Err(Error::InvalidGrid("empty ensemble".into()));
        }
        let mut taus = Vec::with_capacity(records.len());
        let mut cells = Vec::with_capacity(records.len());
        for &r in records {
            if r >= ensemble.n_records() {
                return Err(Error::InvalidGrid(format!("record {r} out of range")));
            }
            cells.push(
                ensemble
                    .slice(r)
                    .map(|x| layout.locate(x).map(|c| c as u32))
                    .collect(),
            );
            taus.push(ensemble.tau_grid()[r]);
        }
        Ok(Self {
            layout: layout.clone(),
            taus,
            cells,
            n_paths: ensemble.n_paths(),
        })
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    /// Histogram under per-path `weights`; `None` means 1.
    pub fn density(&self, weights: Option<&[f64]>) -> Result<DensityGrid> {
        if let Some(w) = weights {
            if w.len() != self.n_paths {
                return Err(Error::InvalidGrid("one weight per path is required".into()));
            }
        }
        let n = self.layout.n_cells();
        let vol = self.layout.cell_volume();
        let mut slices = Vec::with_capacity(self.cells.len());
        let mut counts = Vec::with_capacity(self.cells.len());
        let mut coverage = Vec::with_capacity(self.cells.len());
        for (cells, tau) in self.cells.iter().zip(&self.taus) {
            let mut c = vec![0.0; n];
            let mut inside = 0.0;
            let mut total = 0.0;
            for (i, cell) in cells.iter().enumerate() {
                let w = weights.map_or(1.0, |w| w[i]);
                total += w;
                if let Some(cell) = cell {
                    c[*cell as usize] += w;
                    inside += w;
                }
            }
            if inside <= 0.0 {
                return Err(Error::InvalidGrid(format!(
                    "no samples inside the window at tau {tau}"
                )));
            }
            slices.push(c.iter().map(|v| v / (inside * vol)).collect());
            counts.push(c);
            coverage.push(inside / total);
        }
        Ok(DensityGrid {
            layout: self.layout.clone(),
            taus: self.taus.clone(),
            slices,
            counts: Some(counts),
            coverage,
            source: GridSource::Histogram,
        })
    }
}

/// `φ*φ` normalized over the window, averaged over `sub^d` midpoints per
/// cell (`sub = 1` samples the cell centre).
pub fn analytic_density(
    system: &System,
    layout: &GridLayout,
    taus: &[f64],
    sub: usize,
) -> Result<DensityGrid> {
    let sub = sub.max(1);
    let dims = layout.axes().len();
    let offsets: Vec<Vec<f64>> = (0..sub.pow(dims as u32))
        .map(|k| {
            let mut rest = k;
            (0..dims)
                .map(|d| {
                    let j = rest % sub;
                    rest /= sub;
                    ((j as f64 + 0.5) / sub as f64 - 0.5) * layout.axes()[d].width()
                })
                .collect()
        })
        .collect();
    let pure = system.model().is_pure_phase();
    let values: Vec<f64> = (0..layout.n_cells())
        .map(|c| {
            if pure {
                return 1.0;
            }
            let centre = layout.cell_point(c);
            offsets
                .iter()
                .map(|off| {
                    let mut x = centre;
                    for (d, a) in layout.axes().iter().enumerate() {
                        x.0[a.coord] += off[d];
                    }
                    system.phi(&x).norm_sqr()
                })
                .sum::<f64>()
                / offsets.len() as f64
        })
        .collect();
    let norm = values.iter().sum::<f64>() * layout.cell_volume();
    if !(norm > 0.0) {
        return Err(Error::InvalidGrid("density vanishes on the window".into()));
    }
    let slice: Vec<f64> = values.iter().map(|v| v / norm).collect();
    DensityGrid::from_values(layout.clone(), taus.to_vec(), vec![slice; taus.len()])
}

/// Delimited text export: one row per (slice, cell) with the active
/// coordinates, τ and p.
pub fn write_grid(grid: &DensityGrid, header: Option<&str>, mut out: impl Write) -> Result<()> {
    if let Some(h) = header {
        writeln!(out, "# {h}")?;
    }
    let names = ["x0", "x1", "x2", "x3"];
    let cols: Vec<&str> = grid
        .layout()
        .axes()
        .iter()
        .map(|a| names[a.coord])
        .collect();
    writeln!(out, "{},tau,p", cols.join(","))?;
    for (s, tau) in grid.taus().iter().enumerate() {
        for (c, p) in grid.slice(s).iter().enumerate() {
            let x: FourVector = grid.layout().cell_point(c);
            let coords: Vec<String> = grid
                .layout()
                .axes()
                .iter()
                .map(|a| format!("{:e}", x.0[a.coord]))
                .collect();
            writeln!(out, "{},{tau:e},{p:e}", coords.join(","))?;
        }
    }
    Ok(())
}
