//! Seeded Wiener increments and Euler–Maruyama integration of the D-process
//! `dx = V±(x) dτ + λ dW±`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spacetime::FourVector;
use crate::wavefunction::System;

#[cfg(test)]
mod tests;

/// Aborted-path fraction above which a run fails.
pub const MAX_ABORT_FRACTION: f64 = 1e-3;

/// Independent substream `(master_seed, path_index)`.
#[derive(Clone, Debug)]
pub struct RngStream {
    master_seed: u64,
    path_index: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, path_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(path_index);
        Self {
            master_seed,
            path_index,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WienerIncrement {
    pub dw: FourVector,
}

/// Four independent `N(0, dtau)` draws.
pub fn sample_increment(rng: &mut RngStream, dtau: f64) -> WienerIncrement {
    let s = dtau.sqrt();
    WienerIncrement {
        dw: FourVector(std::array::from_fn(|_| s * rng.normal())),
    }
}

/// `x + drift·dτ + λ·dW`.
pub fn step(
    x: &FourVector,
    drift: &FourVector,
    dtau: f64,
    dw: &WienerIncrement,
    lambda: f64,
) -> FourVector {
    FourVector(std::array::from_fn(|mu| {
        x.0[mu] + drift.0[mu] * dtau + lambda * dw.dw.0[mu]
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

/// Uniform grid `τ_i = start + i·dtau`, `i = 0..=n_steps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauGrid {
    pub start: f64,
    pub dtau: f64,
    pub n_steps: usize,
}

impl TauGrid {
    pub fn new(start: f64, dtau: f64, n_steps: usize) -> Result<Self> {
        if !(dtau > 0.0) || !dtau.is_finite() || !start.is_finite() {
            return Err(Error::InvalidSimulation(format!(
                "bad tau grid: start {start}, dtau {dtau}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::InvalidSimulation(
                "tau grid needs at least one step".into(),
            ));
        }
        Ok(Self {
            start,
            dtau,
            n_steps,
        })
    }

    pub fn tau(&self, i: usize) -> f64 {
        self.start + i as f64 * self.dtau
    }

    pub fn end(&self) -> f64 {
        self.tau(self.n_steps)
    }
}

/// Law of the starting point (terminal point for backward runs).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialDistribution {
    Point {
        x: [f64; 4],
    },
    /// Uniform on the box; `min == max` pins a coordinate.
    Uniform {
        min: [f64; 4],
        max: [f64; 4],
    },
    /// Rejection sampling from `|φ|²` restricted to the box.
    Density {
        min: [f64; 4],
        max: [f64; 4],
    },
}

impl InitialDistribution {
    fn validate(&self) -> Result<()> {
        match self {
            InitialDistribution::Point { x } => {
                if !x.iter().all(|c| c.is_finite()) {
                    return Err(Error::InvalidSimulation(
                        "initial point must be finite".into(),
                    ));
                }
            }
            InitialDistribution::Uniform { min, max }
            | InitialDistribution::Density { min, max } => {
                for mu in 0..4 {
                    if !(min[mu].is_finite() && max[mu].is_finite() && min[mu] <= max[mu]) {
                        return Err(Error::InvalidSimulation(format!(
                            "bad initial box on axis {mu}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn sample(&self, system: &System, rng: &mut RngStream) -> Result<FourVector> {
        let in_box = |rng: &mut RngStream, min: &[f64; 4], max: &[f64; 4]| {
            FourVector(std::array::from_fn(|mu| {
                min[mu] + (max[mu] - min[mu]) * rng.uniform()
            }))
        };
        match self {
            InitialDistribution::Point { x } => Ok(FourVector(*x)),
            InitialDistribution::Uniform { min, max } => Ok(in_box(rng, min, max)),
            InitialDistribution::Density { min, max } => {
                let bound = system.model().density_bound();
                for _ in 0..100_000 {
                    let x = in_box(rng, min, max);
                    if rng.uniform() * bound < system.phi(&x).norm_sqr() {
                        return Ok(x);
                    }
                }
                Err(Error::InvalidSimulation(
                    "rejection sampler found no support in the box".into(),
                ))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub init: InitialDistribution,
    pub n_paths: usize,
    pub tau: TauGrid,
    /// Keep every `record_stride`-th step; must divide `tau.n_steps`.
    pub record_stride: usize,
    pub master_seed: u64,
    /// Overrides `λ` from the constants (`Some(0.0)` gives the deterministic limit).
    pub noise: Option<f64>,
    pub scenario: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub master_seed: u64,
    pub scenario: String,
    pub model: String,
    pub potential: String,
}

/// Recorded paths, path-major. Aborted paths are dropped and listed.
#[derive(Clone, Debug, PartialEq)]
pub struct PathEnsemble {
    tau_grid: Vec<f64>,
    record_stride: usize,
    dtau: f64,
    lambda: f64,
    direction: Direction,
    path_indices: Vec<usize>,
    points: Vec<FourVector>,
    aborted: Vec<usize>,
    provenance: Provenance,
}

impl PathEnsemble {
    pub fn tau_grid(&self) -> &[f64] {
        &self.tau_grid
    }
    pub fn n_records(&self) -> usize {
        self.tau_grid.len()
    }
    pub fn n_paths(&self) -> usize {
        self.path_indices.len()
    }
    /// Integrator step.
    pub fn dtau(&self) -> f64 {
        self.dtau
    }
    /// Spacing of the recorded grid.
    pub fn record_dtau(&self) -> f64 {
        self.dtau * self.record_stride as f64
    }
    pub fn record_stride(&self) -> usize {
        self.record_stride
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn direction(&self) -> Direction {
        self.direction
    }
    pub fn path_indices(&self) -> &[usize] {
        &self.path_indices
    }
    pub fn aborted(&self) -> &[usize] {
        &self.aborted
    }
    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Recorded points of the `i`-th stored path, in increasing τ.
    pub fn path(&self, i: usize) -> &[FourVector] {
        let n = self.n_records();
        &self.points[i * n..(i + 1) * n]
    }

    pub fn point(&self, path: usize, record: usize) -> &FourVector {
        &self.points[path * self.n_records() + record]
    }

    /// All paths at one recorded τ.
    pub fn slice(&self, record: usize) -> impl Iterator<Item = &FourVector> + '_ {
        (0..self.n_paths()).map(move |i| self.point(i, record))
    }
}

fn simulate(system: &System, spec: &SimulationSpec, direction: Direction) -> Result<PathEnsemble> {
    spec.init.validate()?;
    if spec.n_paths == 0 {
        return Err(Error::InvalidSimulation(
            "n_paths must be at least 1".into(),
        ));
    }
    let stride = spec.record_stride;
    if stride == 0 || spec.tau.n_steps % stride != 0 {
        return Err(Error::InvalidSimulation(format!(
            "record_stride {stride} must divide n_steps {}",
            spec.tau.n_steps
        )));
    }
    let lambda = spec.noise.unwrap_or(system.consts().lambda());
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidSimulation(format!(
            "noise scale {lambda} must be finite and nonnegative"
        )));
    }
    let n_rec = spec.tau.n_steps / stride + 1;
    let dtau = spec.tau.dtau;

    let run_path = |i: usize| -> Result<Vec<FourVector>> {
        let mut rng = RngStream::new(spec.master_seed, i as u64);
        let mut x = spec.init.sample(system, &mut rng)?;
        let mut rec = Vec::with_capacity(n_rec);
        rec.push(x);
        for n in 1..=spec.tau.n_steps {
            let (vp, vm) = system.drift_velocities(&x)?;
            let dw = sample_increment(&mut rng, dtau);
            x = match direction {
                Direction::Forward => step(&x, &vp, dtau, &dw, lambda),
                Direction::Backward => {
                    step(&x, &-vm, dtau, &WienerIncrement { dw: -dw.dw }, lambda)
                }
            };
            if !x.is_finite() {
                return Err(Error::NonFinite(format!("path {i} at step {n}")));
            }
            if n % stride == 0 {
                rec.push(x);
            }
        }
        if direction == Direction::Backward {
            rec.reverse();
        }
        Ok(rec)
    };

    let results: Vec<Result<Vec<FourVector>>> =
        (0..spec.n_paths).into_par_iter().map(run_path).collect();

    let mut points = Vec::with_capacity(spec.n_paths * n_rec);
    let mut path_indices = Vec::with_capacity(spec.n_paths);
    let mut aborted = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(rec) => {
                points.extend(rec);
                path_indices.push(i);
            }
            Err(Error::NodeSingularity { .. }) => aborted.push(i),
            Err(e) => return Err(e),
        }
    }
    if aborted.len() as f64 > MAX_ABORT_FRACTION * spec.n_paths as f64 {
        return Err(Error::TooManyAborts {
            aborted: aborted.len(),
            total: spec.n_paths,
        });
    }

    let tau_grid = (0..n_rec).map(|r| spec.tau.tau(r * stride)).collect();
    Ok(PathEnsemble {
        tau_grid,
        record_stride: stride,
        dtau,
        lambda,
        direction,
        path_indices,
        points,
        aborted,
        provenance: Provenance {
            master_seed: spec.master_seed,
            scenario: spec.scenario.clone(),
            model: system.model().label(),
            potential: system.potential().label(),
        },
    })
}

/// Forward Euler–Maruyama with drift `V₊` from `spec.init` at `tau.start`.
pub fn simulate_forward(system: &System, spec: &SimulationSpec) -> Result<PathEnsemble> {
    simulate(system, spec, Direction::Forward)
}

/// Backward integration with drift `V₋` from `spec.init` at `tau.end()`:
/// `x(τ − δτ) = x(τ) − V₋ δτ − λ dW`. Stored in increasing τ.
pub fn simulate_backward(system: &System, spec: &SimulationSpec) -> Result<PathEnsemble> {
    simulate(system, spec, Direction::Backward)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IncrementStatistics {
    pub mean: [f64; 4],
    pub covariance: [[f64; 4]; 4],
    pub count: usize,
    /// Step the residuals were taken over.
    pub dtau: f64,
}

impl IncrementStatistics {
    /// `covariance / δτ`, the identity for a unit Wiener process.
    pub fn normalized_covariance(&self) -> [[f64; 4]; 4] {
        self.covariance.map(|row| row.map(|c| c / self.dtau))
    }

    pub fn mean_standard_error(&self) -> [f64; 4] {
        std::array::from_fn(|mu| (self.covariance[mu][mu] / self.count as f64).sqrt())
    }
}

/// Pooled statistics of `(Δx ∓ V±Δτ)/λ` over recorded steps, drift taken at
/// the step's starting point.
pub fn increment_statistics(
    ensemble: &PathEnsemble,
    system: &System,
) -> Result<IncrementStatistics> {
    if ensemble.n_records() < 2 {
        return Err(Error::InsufficientSlices {
            needed: 2,
            have: ensemble.n_records(),
        });
    }
    let lambda = ensemble.lambda();
    if lambda == 0.0 {
        return Err(Error::InvalidSimulation(
            "increments are undefined for zero noise".into(),
        ));
    }
    let dt = ensemble.record_dtau();
    let per_path: Vec<Result<Vec<[f64; 4]>>> = (0..ensemble.n_paths())
        .into_par_iter()
        .map(|i| {
            let path = ensemble.path(i);
            path.windows(2)
                .map(|w| {
                    let r = match ensemble.direction() {
                        Direction::Forward => {
                            let (vp, _) = system.drift_velocities(&w[0])?;
                            std::array::from_fn(|mu| {
                                (w[1].0[mu] - w[0].0[mu] - vp.0[mu] * dt) / lambda
                            })
                        }
                        Direction::Backward => {
                            let (_, vm) = system.drift_velocities(&w[1])?;
                            std::array::from_fn(|mu| {
                                (w[1].0[mu] - w[0].0[mu] - vm.0[mu] * dt) / lambda
                            })
                        }
                    };
                    Ok(r)
                })
                .collect()
        })
        .collect();

    let mut sum = [0.0; 4];
    let mut n = 0usize;
    let mut all = Vec::new();
    for p in per_path {
        for r in p? {
            for mu in 0..4 {
                sum[mu] += r[mu];
            }
            n += 1;
            all.push(r);
        }
    }
    let mean = sum.map(|s| s / n as f64);
    let mut cov = [[0.0; 4]; 4];
    for r in &all {
        for a in 0..4 {
            for b in 0..4 {
                cov[a][b] += (r[a] - mean[a]) * (r[b] - mean[b]);
            }
        }
    }
    let denom = (n.max(2) - 1) as f64;
    Ok(IncrementStatistics {
        mean,
        covariance: cov.map(|row| row.map(|c| c / denom)),
        count: n,
        dtau: dt,
    })
}

#[derive(Serialize)]
struct DumpRecord {
    path_index: usize,
    tau: f64,
    c0: f64,
    c1: f64,
    c2: f64,
    c3: f64,
}

/// One JSON object per `(path, recorded step)`, after an optional header line.
pub fn write_path_dump(
    ensemble: &PathEnsemble,
    header: Option<&str>,
    mut out: impl Write,
) -> Result<()> {
    if let Some(h) = header {
        writeln!(out, "{h}")?;
    }
    for (i, &pi) in ensemble.path_indices().iter().enumerate() {
        for (r, x) in ensemble.path(i).iter().enumerate() {
            let rec = DumpRecord {
                path_index: pi,
                tau: ensemble.tau_grid()[r],
                c0: x.0[0],
                c1: x.0[1],
                c2: x.0[2],
                c3: x.0[3],
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}
