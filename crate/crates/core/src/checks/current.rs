use super::{
    spread, Bootstrap, CheckProvenance, CheckReport, Statistic, ToleranceBasis, FD_TOLERANCE,
    MACHINE_TOLERANCE, SE_MULTIPLE,
};
use crate::density::{GridLayout, GridSource};
use crate::error::{Error, Result};
use crate::stochastic::PathEnsemble;
use crate::wavefunction::System;

/// Four-current `j^μ` on a grid of cells.
#[derive(Clone, Debug, PartialEq)]
pub struct CurrentField {
    layout: GridLayout,
    values: Vec<[f64; 4]>,
    source: GridSource,
    /// Bootstrap replicates of `values`, histogram fields only.
    replicates: Vec<Vec<[f64; 4]>>,
    /// How the histogram was normalized.
    normalization: &'static str,
}

impl CurrentField {
    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }
    pub fn values(&self) -> &[[f64; 4]] {
        &self.values
    }
    pub fn source(&self) -> GridSource {
        self.source
    }
    pub fn normalization(&self) -> &str {
        self.normalization
    }
    pub fn n_replicates(&self) -> usize {
        self.replicates.len()
    }

    /// Per-cell bootstrap SE, if replicates exist.
    pub fn standard_errors(&self) -> Option<Vec<[f64; 4]>> {
        if self.replicates.is_empty() {
            return None;
        }
        let flat: Vec<Vec<f64>> = self.replicates.iter().map(|r| r.concat()).collect();
        let se = spread(&flat);
        Some(se.chunks(4).map(|c| [c[0], c[1], c[2], c[3]]).collect())
    }
}

/// Current of the histogram convention: `Σ w · (−ec Re 𝒱)` per cell over
/// the (path, record) samples, divided by the in-window weight and the
/// cell volume. `records = None` uses every record. Samples at
/// interference nodes are dropped.
pub fn compute_j_stochastic(
    ens: &PathEnsemble,
    system: &System,
    layout: &GridLayout,
    records: Option<&[usize]>,
    boot: Option<&Bootstrap>,
) -> Result<CurrentField> {
    let ec = system.consts().e() * system.consts().c();
    let all: Vec<usize> = (0..ens.n_records()).collect();
    let records = records.unwrap_or(&all);
    if let Some(r) = records.iter().find(|&&r| r >= ens.n_records()) {
        return Err(Error::InvalidGrid(format!("record {r} out of range")));
    }
    let mut samples: Vec<(usize, usize, [f64; 4])> = Vec::new();
    for i in 0..ens.n_paths() {
        for x in records.iter().map(|&r| ens.point(i, r)) {
            let Some(cell) = layout.locate(x) else {
                continue;
            };
            match system.complex_velocity(x) {
                Ok(v) => samples.push((i, cell, v.re.0.map(|c| -ec * c))),
                Err(Error::NodeSingularity { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::InvalidGrid(
            "no samples inside the current window".into(),
        ));
    }
    let n = layout.n_cells();
    let vol = layout.cell_volume();
    let accumulate = |w: Option<&[f64]>| -> Result<Vec<[f64; 4]>> {
        let mut j = vec![[0.0; 4]; n];
        let mut total = 0.0;
        for (i, cell, v) in &samples {
            let wi = w.map_or(1.0, |w| w[*i]);
            total += wi;
            for mu in 0..4 {
                j[*cell][mu] += wi * v[mu];
            }
        }
        if !(total > 0.0) {
            return Err(Error::InvalidGrid(
                "resample has no weight in the window".into(),
            ));
        }
        Ok(j.into_iter()
            .map(|c| c.map(|v| v / (total * vol)))
            .collect())
    };
    let values = accumulate(None)?;
    let replicates = match boot {
        Some(b) => b
            .replicates(ens.n_paths(), |w| Ok(accumulate(Some(w))?.concat()))?
            .into_iter()
            .map(|r| r.chunks(4).map(|c| [c[0], c[1], c[2], c[3]]).collect())
            .collect(),
        None => Vec::new(),
    };
    Ok(CurrentField {
        layout: layout.clone(),
        values,
        source: GridSource::Histogram,
        replicates,
        normalization: "in-window samples x cell volume",
    })
}

/// `j_KG = −ec Re 𝒱 |φ|²` at cell centres; zero at nodes.
pub fn compute_j_kg(system: &System, layout: &GridLayout) -> Result<CurrentField> {
    let ec = system.consts().e() * system.consts().c();
    let values = (0..layout.n_cells())
        .map(|c| {
            let x = layout.cell_point(c);
            match system.complex_velocity(&x) {
                Ok(v) => {
                    let rho = system.phi(&x).norm_sqr();
                    Ok(v.re.0.map(|u| -ec * u * rho))
                }
                Err(Error::NodeSingularity { .. }) => Ok([0.0; 4]),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    Ok(CurrentField {
        layout: layout.clone(),
        values,
        source: GridSource::Analytic,
        replicates: Vec::new(),
        normalization: "unnormalized |phi|^2",
    })
}

fn interior(layout: &GridLayout) -> Vec<usize> {
    (0..layout.n_cells())
        .filter(|&c| layout.stencil(c).is_some())
        .collect()
}

fn dot(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Least-squares constant `C` with `js ≈ C jkg` over interior cells and
/// the relative L2 deviation `‖js − C jkg‖ / ‖C jkg‖`, which must stay
/// within `tolerance`.
pub fn current_equivalence_check(
    js: &CurrentField,
    jkg: &CurrentField,
    tolerance: f64,
) -> Result<CheckReport> {
    if !js.layout.same_shape(&jkg.layout) {
        return Err(Error::AxesMismatch(
            "current fields live on different grids".into(),
        ));
    }
    let cells = interior(&js.layout);
    let fit = |s: &[[f64; 4]]| -> (f64, f64) {
        let num: f64 = cells.iter().map(|&c| dot(&s[c], &jkg.values[c])).sum();
        let den: f64 = cells
            .iter()
            .map(|&c| dot(&jkg.values[c], &jkg.values[c]))
            .sum();
        if den == 0.0 {
            let res: f64 = cells.iter().map(|&c| dot(&s[c], &s[c])).sum();
            return (0.0, if res == 0.0 { 0.0 } else { f64::INFINITY });
        }
        let k = num / den;
        let res: f64 = cells
            .iter()
            .map(|&c| {
                (0..4)
                    .map(|mu| (s[c][mu] - k * jkg.values[c][mu]).powi(2))
                    .sum::<f64>()
            })
            .sum();
        (k, (res / (k * k * den)).sqrt())
    };
    let (k, dev) = fit(&js.values);
    let mut stat = Statistic::new("relative L2 deviation", dev, 0.0, tolerance);
    let basis = if js.replicates.is_empty() {
        ToleranceBasis::Machine
    } else {
        let reps: Vec<Vec<f64>> = js.replicates.iter().map(|r| vec![fit(r).1]).collect();
        stat = stat.with_se(spread(&reps)[0]);
        ToleranceBasis::BootstrapSe
    };
    let prov = CheckProvenance {
        bootstrap_resamples: (!js.replicates.is_empty()).then_some(js.replicates.len()),
        ..CheckProvenance::default()
    };
    Ok(
        CheckReport::new("current_equivalence", vec![stat], tolerance, basis, prov)
            .with_note(format!("fitted constant {k:e}"))
            .with_note(format!("js normalization: {}", js.normalization)),
    )
}

/// `∂_μ j^μ` by central differences over the active axes, with the RMS of
/// each axis term.
fn divergence(layout: &GridLayout, j: &[[f64; 4]]) -> (Vec<Option<f64>>, f64) {
    let axes = layout.axes();
    let mut sq = vec![0.0; axes.len()];
    let mut n = 0usize;
    let div = (0..layout.n_cells())
        .map(|c| {
            let st = layout.stencil(c)?;
            let mut d = 0.0;
            for (k, &(m, q)) in st.iter().enumerate() {
                let mu = axes[k].coord;
                let t = (j[q][mu] - j[m][mu]) / (2.0 * axes[k].width());
                sq[k] += t * t;
                d += t;
            }
            n += 1;
            Some(d)
        })
        .collect();
    let scale = sq
        .iter()
        .map(|s| (s / n.max(1) as f64).sqrt())
        .fold(0.0, f64::max);
    (div, scale)
}

/// Analytic fields: RMS of `∂_μ j^μ` within `1e−4` of the largest term
/// RMS, floored at roundoff of `|j|/h`. Histogram fields: RMS of per-cell bootstrap z-scores within 3.
pub fn charge_conservation_check(j: &CurrentField) -> Result<CheckReport> {
    let (div, scale) = divergence(&j.layout, &j.values);
    let vals: Vec<f64> = div.iter().flatten().copied().collect();
    if vals.is_empty() {
        return Err(Error::InvalidGrid(
            "no interior cells for the divergence".into(),
        ));
    }
    let rms = (vals.iter().map(|v| v * v).sum::<f64>() / vals.len() as f64).sqrt();
    let h = j
        .layout
        .axes()
        .iter()
        .map(|a| a.width())
        .fold(0.0, f64::max);
    if j.replicates.is_empty() {
        // Roundoff floor for fields whose terms vanish identically.
        let magnitude =
            (j.values.iter().map(|v| dot(v, v)).sum::<f64>() / j.values.len() as f64).sqrt();
        let allowed = (FD_TOLERANCE * scale).max(MACHINE_TOLERANCE * magnitude / h);
        return Ok(CheckReport::new(
            "charge_conservation",
            vec![Statistic::new("rms div j", rms, 0.0, allowed)],
            FD_TOLERANCE,
            ToleranceBasis::FdError,
            CheckProvenance::grid(h),
        )
        .with_note(format!("term scale {scale:e}")));
    }
    let reps: Vec<Vec<f64>> = j
        .replicates
        .iter()
        .map(|r| {
            divergence(&j.layout, r)
                .0
                .iter()
                .map(|v| v.unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    let se = spread(&reps);
    let z: Vec<f64> = div
        .iter()
        .zip(&se)
        .filter_map(|(d, s)| match d {
            Some(d) if *s > 0.0 => Some(d / s),
            _ => None,
        })
        .collect();
    let rms_z = (z.iter().map(|v| v * v).sum::<f64>() / z.len().max(1) as f64).sqrt();
    Ok(CheckReport::new(
        "charge_conservation",
        vec![Statistic::new("rms z of div j", rms_z, 0.0, SE_MULTIPLE).with_se(1.0)],
        SE_MULTIPLE,
        ToleranceBasis::BootstrapSe,
        CheckProvenance {
            h: Some(h),
            bootstrap_resamples: Some(j.replicates.len()),
            ..CheckProvenance::default()
        },
    )
    .with_note(format!("rms div j {rms:e}, {} cells", z.len())))
}
