use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spacetime::FourVector;

/// One histogram/grid axis over spacetime coordinate `coord`.
///
/// A periodic axis wraps coordinates into `[min, max)` before binning and
/// uses wrapped stencils for derivatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub coord: usize,
    pub min: f64,
    pub max: f64,
    pub bins: usize,
    #[serde(default)]
    pub periodic: bool,
}

impl Axis {
    pub fn new(coord: usize, min: f64, max: f64, bins: usize, periodic: bool) -> Result<Self> {
        let a = Self {
            coord,
            min,
            max,
            bins,
            periodic,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if self.coord > 3 {
            return Err(Error::InvalidGrid(format!(
                "coordinate index {} out of range",
                self.coord
            )));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(Error::InvalidGrid(format!(
                "axis {}: need min < max",
                self.coord
            )));
        }
        if self.bins == 0 {
            return Err(Error::InvalidGrid(format!(
                "axis {}: too few bins",
                self.coord
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        (self.max - self.min) / self.bins as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.min + (i as f64 + 0.5) * self.width()
    }

    pub fn index_of(&self, x: f64) -> Option<usize> {
        let span = self.max - self.min;
        let mut u = x - self.min;
        if self.periodic {
            u = u.rem_euclid(span);
        } else if !(0.0..span).contains(&u) {
            return None;
        }
        Some(((u / self.width()) as usize).min(self.bins - 1))
    }
}

/// Cell geometry shared by density grids and current fields.
///
/// Cells are stored row-major with the last axis fastest. Coordinates not
/// covered by an axis take their value from `base`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridLayout {
    axes: Vec<Axis>,
    base: FourVector,
}

impl GridLayout {
    pub fn new(axes: Vec<Axis>, base: FourVector) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidGrid("a grid needs at least one axis".into()));
        }
        for (i, a) in axes.iter().enumerate() {
            a.validate()?;
            if axes[..i].iter().any(|b| b.coord == a.coord) {
                return Err(Error::InvalidGrid(format!(
                    "coordinate {} appears twice",
                    a.coord
                )));
            }
        }
        if !base.is_finite() {
            return Err(Error::InvalidGrid("base point must be finite".into()));
        }
        Ok(Self { axes, base })
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn base(&self) -> &FourVector {
        &self.base
    }

    pub fn n_cells(&self) -> usize {
        self.axes.iter().map(|a| a.bins).product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::width).product()
    }

    fn stride(&self, d: usize) -> usize {
        self.axes[d + 1..].iter().map(|a| a.bins).product()
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut rest = flat;
        let mut out = vec![0; self.axes.len()];
        for d in (0..self.axes.len()).rev() {
            out[d] = rest % self.axes[d].bins;
            rest /= self.axes[d].bins;
        }
        out
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .enumerate()
            .map(|(d, i)| i * self.stride(d))
            .sum()
    }

    pub fn cell_point(&self, flat: usize) -> FourVector {
        let idx = self.multi_index(flat);
        let mut x = self.base;
        for (d, a) in self.axes.iter().enumerate() {
            x.0[a.coord] = a.center(idx[d]);
        }
        x
    }

    /// Cell containing `x`, wrapping periodic axes.
    pub fn locate(&self, x: &FourVector) -> Option<usize> {
        let mut flat = 0;
        for (d, a) in self.axes.iter().enumerate() {
            flat += a.index_of(x.0[a.coord])? * self.stride(d);
        }
        Some(flat)
    }

    /// Neighbour one step along axis `d`; `None` across a non-periodic edge.
    pub fn neighbour(&self, flat: usize, d: usize, forward: bool) -> Option<usize> {
        let a = &self.axes[d];
        let s = self.stride(d);
        let i = (flat / s) % a.bins;
        let j = match (forward, i) {
            (true, i) if i + 1 < a.bins => i + 1,
            (true, _) if a.periodic => 0,
            (false, i) if i > 0 => i - 1,
            (false, _) if a.periodic => a.bins - 1,
            _ => return None,
        };
        Some(flat + j * s - i * s)
    }

    /// `(minus, plus)` neighbours along every axis, or `None` at an edge.
    pub fn stencil(&self, flat: usize) -> Option<Vec<(usize, usize)>> {
        (0..self.axes.len())
            .map(|d| {
                Some((
                    self.neighbour(flat, d, false)?,
                    self.neighbour(flat, d, true)?,
                ))
            })
            .collect()
    }

    pub fn same_shape(&self, other: &GridLayout) -> bool {
        self == other
    }
}
