use serde::Serialize;

use super::DensityGrid;
use crate::error::{Error, Result};
use crate::spacetime::{FourVector, METRIC};

/// Spacetime vector field evaluated at cell centres.
pub type VectorField<'a> = dyn Fn(&FourVector) -> Result<FourVector> + Sync + 'a;

/// Half-count smoothing added before taking `ln p` of a histogram.
pub const HALF_COUNT: f64 = 0.5;
/// Histogram cells with fewer (weighted) counts are masked for `ln p`.
pub const MASK_COUNT: f64 = 10.0;

/// Sign in front of the diffusion term: `+` pairs with `V₊`, `−` with `V₋`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionSign {
    Plus,
    Minus,
}

impl DiffusionSign {
    fn factor(self) -> f64 {
        match self {
            DiffusionSign::Plus => 1.0,
            DiffusionSign::Minus => -1.0,
        }
    }
}

/// Pointwise residual values at fixed positions. `None` marks a masked or
/// non-evaluable position, so bootstrap replicas stay aligned.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualField {
    pub name: String,
    pub values: Vec<Option<f64>>,
    /// RMS of each term of the equation over the evaluated positions.
    pub term_rms: Vec<(String, f64)>,
    /// Largest term RMS.
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualReport {
    pub name: String,
    pub rms_residual: f64,
    pub max_residual: f64,
    pub scale: f64,
    /// Relative tolerance: pass iff `rms_residual ≤ tolerance · scale`.
    pub tolerance: f64,
    pub pass: bool,
    pub evaluated: usize,
}

impl ResidualField {
    pub fn evaluated(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().flatten().copied()
    }

    pub fn count(&self) -> usize {
        self.values.iter().flatten().count()
    }

    pub fn rms(&self) -> f64 {
        rms(self.evaluated())
    }

    pub fn max_abs(&self) -> f64 {
        self.evaluated().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn report(&self, tolerance: f64) -> ResidualReport {
        let r = self.rms();
        ResidualReport {
            name: self.name.clone(),
            rms_residual: r,
            max_residual: self.max_abs(),
            scale: self.scale,
            tolerance,
            pass: r <= tolerance * self.scale,
            evaluated: self.count(),
        }
    }
}

fn rms(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (s / n as f64).sqrt()
    }
}

fn evaluate_field(grid: &DensityGrid, field: &VectorField) -> Result<Vec<FourVector>> {
    (0..grid.layout().n_cells())
        .map(|c| field(&grid.layout().cell_point(c)))
        .collect()
}

struct Terms {
    names: Vec<&'static str>,
    sq: Vec<f64>,
    n: usize,
}

impl Terms {
    fn new(names: Vec<&'static str>) -> Self {
        let k = names.len();
        Self {
            names,
            sq: vec![0.0; k],
            n: 0,
        }
    }
    fn add(&mut self, t: &[f64]) {
        for (s, v) in self.sq.iter_mut().zip(t) {
            *s += v * v;
        }
        self.n += 1;
    }
    fn finish(self) -> (Vec<(String, f64)>, f64) {
        let n = self.n.max(1) as f64;
        let rms: Vec<(String, f64)> = self
            .names
            .iter()
            .zip(&self.sq)
            .map(|(name, s)| (name.to_string(), (s / n).sqrt()))
            .collect();
        let scale = rms.iter().map(|(_, v)| *v).fold(0.0, f64::max);
        (rms, scale)
    }
}

fn transport(
    name: &str,
    grid: &DensityGrid,
    drift: &VectorField,
    diffusion: Option<(f64, DiffusionSign)>,
) -> Result<ResidualField> {
    let ns = grid.n_slices();
    if ns < 3 {
        return Err(Error::InsufficientSlices {
            needed: 3,
            have: ns,
        });
    }
    let layout = grid.layout();
    let v = evaluate_field(grid, drift)?;
    let axes = layout.axes();
    let stencils: Vec<Option<Vec<(usize, usize)>>> =
        (0..layout.n_cells()).map(|c| layout.stencil(c)).collect();
    // The flux form enters the residual; its two product-rule halves only set the scale.
    let mut terms = Terms::new(match diffusion {
        Some(_) => vec!["d_tau p", "V.grad p", "p div V", "diffusion"],
        None => vec!["d_tau p", "V.grad p", "p div V"],
    });
    let mut values = Vec::with_capacity((ns - 2) * layout.n_cells());
    for s in 1..ns - 1 {
        let p = grid.slice(s);
        let (pm, pp) = (grid.slice(s - 1), grid.slice(s + 1));
        let dtau = grid.taus()[s + 1] - grid.taus()[s - 1];
        for c in 0..layout.n_cells() {
            let Some(st) = &stencils[c] else {
                values.push(None);
                continue;
            };
            let dt = (pp[c] - pm[c]) / dtau;
            let mut div = 0.0;
            let mut adv = 0.0;
            let mut comp = 0.0;
            let mut lap = 0.0;
            for (d, &(m, q)) in st.iter().enumerate() {
                let mu = axes[d].coord;
                let h = axes[d].width();
                div += (v[q].0[mu] * p[q] - v[m].0[mu] * p[m]) / (2.0 * h);
                adv += v[c].0[mu] * (p[q] - p[m]) / (2.0 * h);
                comp += p[c] * (v[q].0[mu] - v[m].0[mu]) / (2.0 * h);
                lap += METRIC[mu] * (p[q] - 2.0 * p[c] + p[m]) / (h * h);
            }
            match diffusion {
                Some((lambda, sign)) => {
                    let diff = sign.factor() * 0.5 * lambda * lambda * lap;
                    terms.add(&[dt, adv, comp, diff]);
                    values.push(Some(dt + div + diff));
                }
                None => {
                    terms.add(&[dt, adv, comp]);
                    values.push(Some(dt + div));
                }
            }
        }
    }
    let (term_rms, scale) = terms.finish();
    Ok(ResidualField {
        name: name.to_string(),
        values,
        term_rms,
        scale,
    })
}

/// `∂_τ p + ∂_μ(V^μ p) ± (λ²/2) ∂^μ∂_μ p` on interior slices, with the
/// wave-operator signature in the diffusion term.
pub fn fokker_planck_residual(
    grid: &DensityGrid,
    drift: &VectorField,
    lambda: f64,
    sign: DiffusionSign,
) -> Result<ResidualField> {
    let name = match sign {
        DiffusionSign::Plus => "fokker_planck_forward",
        DiffusionSign::Minus => "fokker_planck_backward",
    };
    transport(name, grid, drift, Some((lambda, sign)))
}

/// `∂_τ p + ∂_μ(Re 𝒱^μ p)` on interior slices.
pub fn continuity_residual(grid: &DensityGrid, re_v: &VectorField) -> Result<ResidualField> {
    transport("continuity", grid, re_v, None)
}

/// `Im 𝒱^μ − (λ²/2) ∂^μ ln p` per active axis on every slice. Histogram
/// cells with fewer than [`MASK_COUNT`] counts in the stencil are masked.
pub fn osmotic_residual(
    grid: &DensityGrid,
    im_v: &VectorField,
    lambda: f64,
) -> Result<ResidualField> {
    let layout = grid.layout();
    let axes = layout.axes();
    let u = evaluate_field(grid, im_v)?;
    let mut terms = Terms::new(vec!["Im V", "(lambda^2/2) d ln p"]);
    let mut values = Vec::new();
    for s in 0..grid.n_slices() {
        let p = grid.slice(s);
        let ln_p: Vec<Option<f64>> = match grid.counts(s) {
            Some(counts) => {
                let total: f64 = counts.iter().sum();
                let factor = p.iter().sum::<f64>() / total;
                counts
                    .iter()
                    .map(|&n| (n >= MASK_COUNT).then(|| ((n + HALF_COUNT) * factor).ln()))
                    .collect()
            }
            None => p.iter().map(|&v| (v > 0.0).then(|| v.ln())).collect(),
        };
        for c in 0..layout.n_cells() {
            for (d, a) in axes.iter().enumerate() {
                let mu = a.coord;
                let st = (
                    layout.neighbour(c, d, false),
                    layout.neighbour(c, d, true),
                    ln_p[c],
                );
                let (Some(m), Some(q), Some(_)) = st else {
                    values.push(None);
                    continue;
                };
                let (Some(lm), Some(lq)) = (ln_p[m], ln_p[q]) else {
                    values.push(None);
                    continue;
                };
                let grad = METRIC[mu] * (lq - lm) / (2.0 * a.width());
                let rhs = 0.5 * lambda * lambda * grad;
                terms.add(&[u[c].0[mu], rhs]);
                values.push(Some(u[c].0[mu] - rhs));
            }
        }
    }
    if values.iter().all(Option::is_none) {
        return Err(Error::AllBinsMasked);
    }
    let (term_rms, scale) = terms.finish();
    Ok(ResidualField {
        name: "osmotic".into(),
        values,
        term_rms,
        scale,
    })
}
