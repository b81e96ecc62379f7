//! Simulation, check dispatch and artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{CheckName, ModelConfig, PotentialConfig, ScenarioConfig};
use super::CliError;
use crate::checks::{
    self, action_stationarity_check, analytic_residual_check, charge_conservation_check,
    compute_j_kg, compute_j_stochastic, curl_identity_check, current_equivalence_check,
    ehrenfest_check, energy_constancy_check, eom_residual_check, gauge_invariance_check,
    histogram_residual_check, lorentz_invariant_estimate, partial_integration_check, sample_points,
    wiener_increment_check, ActionSweep, Bootstrap, CheckReport, HistogramEquation, Perturbation,
    RhsForm, TestField, FD_TOLERANCE,
};
use crate::density::{analytic_density, estimate_density, write_grid, DiffusionSign, GridLayout};
use crate::error::{Error, Result};
use crate::spacetime::FourVector;
use crate::stochastic::{simulate_forward, write_path_dump, PathEnsemble, SimulationSpec, TauGrid};
use crate::wavefunction::{
    Mode, PlaneWaveField, PotentialModel, Profile, System, WaveFunctionModel,
};

/// Reports of one selected check against its expectation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Outcome {
    pub check: CheckName,
    pub expected_pass: bool,
    pub passed: bool,
    pub reports: Vec<CheckReport>,
}

impl Outcome {
    pub fn matched(&self) -> bool {
        self.expected_pass == self.passed
    }
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub config_hash: String,
    pub outcomes: Vec<Outcome>,
    pub artifacts: Vec<PathBuf>,
}

impl RunSummary {
    pub fn all_matched(&self) -> bool {
        self.outcomes.iter().all(Outcome::matched)
    }
}

/// SHA-256 of the canonical TOML, without the output directory.
pub fn config_hash(cfg: &ScenarioConfig) -> String {
    let mut c = cfg.clone();
    c.output_dir = None;
    let digest = Sha256::digest(c.to_toml().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// `(physical system, sampler system)`; they differ by the control's drift scale.
pub fn build_systems(cfg: &ScenarioConfig) -> Result<(System, System)> {
    let consts = cfg
        .constants
        .build()
        .map_err(|e| Error::InvalidConstant(e.to_string()))?;
    let energy = |e: Option<f64>| {
        e.ok_or_else(|| Error::InvalidModel("energy not resolved; validate the config".into()))
    };
    let potential = match &cfg.potential {
        PotentialConfig::Zero => PotentialModel::Zero,
        PotentialConfig::PlaneWave {
            k,
            polarization,
            amplitude,
            phase,
        } => PotentialModel::PlaneWave(PlaneWaveField::new(
            FourVector(*k),
            FourVector(*polarization),
            Profile::Cosine {
                amplitude: *amplitude,
                phase: *phase,
            },
        )?),
    };
    let model = match &cfg.model {
        ModelConfig::PlaneWave {
            momentum,
            energy: e,
        } => {
            let [a, b, c] = *momentum;
            WaveFunctionModel::plane_wave(FourVector([energy(*e)?, a, b, c]), &consts)?
        }
        ModelConfig::Volkov {
            momentum,
            energy: e,
        } => {
            let [a, b, c] = *momentum;
            let PotentialModel::PlaneWave(field) = &potential else {
                return Err(Error::InvalidModel(
                    "a volkov model needs a plane-wave potential".into(),
                ));
            };
            WaveFunctionModel::volkov(FourVector([energy(*e)?, a, b, c]), field.clone(), &consts)?
        }
        ModelConfig::ModeSum {
            modes,
            allow_off_shell,
        } => {
            let modes = modes
                .iter()
                .map(|m| {
                    let [a, b, c] = m.momentum;
                    Ok(Mode {
                        weight: Complex64::new(m.weight[0], m.weight[1]),
                        p: FourVector([energy(m.energy)?, a, b, c]),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if *allow_off_shell {
                WaveFunctionModel::mode_sum_unchecked(modes)?
            } else {
                WaveFunctionModel::mode_sum(modes, &consts)?
            }
        }
    };
    let system = System::new(model, potential, consts)?;
    let sampler = system
        .clone()
        .with_velocity_scale(cfg.control.velocity_scale);
    Ok((system, sampler))
}

pub fn simulation_spec(cfg: &ScenarioConfig) -> Result<SimulationSpec> {
    Ok(SimulationSpec {
        init: cfg.init.clone(),
        n_paths: cfg.n_paths,
        tau: TauGrid::new(0.0, cfg.tau.dtau, cfg.tau.steps)?,
        record_stride: cfg.tau.record_stride,
        master_seed: cfg.master_seed,
        noise: None,
        scenario: cfg.scenario.clone(),
    })
}

/// Forward ensemble of the sampler system, if any selected check needs one.
pub fn simulate(cfg: &ScenarioConfig) -> Result<Option<PathEnsemble>> {
    if !cfg.checks.iter().any(CheckName::needs_ensemble) {
        return Ok(None);
    }
    let (_, sampler) = build_systems(cfg)?;
    simulate_forward(&sampler, &simulation_spec(cfg)?).map(Some)
}

/// Records at or after `tau.analyze_from`.
pub fn analysis_records(cfg: &ScenarioConfig, ens: &PathEnsemble) -> Vec<usize> {
    let eps = 1e-9 * cfg.tau.dtau;
    (0..ens.n_records())
        .filter(|&r| ens.tau_grid()[r] >= cfg.tau.analyze_from - eps)
        .collect()
}

fn periods(layout: &GridLayout) -> [Option<f64>; 4] {
    let mut p = [None; 4];
    for a in layout.axes().iter().filter(|a| a.periodic) {
        p[a.coord] = Some(a.max - a.min);
    }
    p
}

fn labelled(mut r: CheckReport, label: &str) -> CheckReport {
    r.check = format!("{}[{label}]", r.check);
    r
}

fn partial_integration(
    ens: &PathEnsemble,
    system: &System,
    cfg: &ScenarioConfig,
    layout: &GridLayout,
    boot: &Bootstrap,
) -> Result<Vec<CheckReport>> {
    let c = TestField::Constant([
        Complex64::new(1.0, 0.5),
        0.0.into(),
        2.0.into(),
        Complex64::new(0.0, -1.0),
    ]);
    let mut out = vec![
        labelled(
            partial_integration_check(ens, &c, &c, system, RhsForm::MeanDerivative, boot)?,
            "constant",
        ),
        labelled(
            partial_integration_check(
                ens,
                &TestField::Coordinate,
                &TestField::Coordinate,
                system,
                RhsForm::ForwardGenerator,
                boot,
            )?,
            "coordinate",
        ),
    ];
    let p = periods(layout);
    if p.iter().any(Option::is_some) {
        let pi = &cfg.partial_integration;
        for &seed in &pi.trig_seeds {
            let a = TestField::random_trig(seed, pi.trig_terms, p);
            let b = TestField::random_trig(seed ^ 0x9e37_79b9, pi.trig_terms, p);
            out.push(labelled(
                partial_integration_check(ens, &a, &b, system, RhsForm::MeanDerivative, boot)?,
                &format!("trig seed {seed}"),
            ));
        }
    }
    Ok(out)
}

fn require<'a>(ens: Option<&'a PathEnsemble>, check: CheckName) -> Result<&'a PathEnsemble> {
    ens.ok_or_else(|| Error::InvalidSimulation(format!("{check} needs an ensemble")))
}

/// Runs one check. `ens` must be present for ensemble checks.
pub fn evaluate_check(
    check: CheckName,
    cfg: &ScenarioConfig,
    ens: Option<&PathEnsemble>,
) -> Result<Vec<CheckReport>> {
    let (system, sampler) = build_systems(cfg)?;
    let layout = cfg
        .grid
        .layout("grid.axes")
        .map_err(|e| Error::InvalidGrid(e.to_string()))?;
    let analytic = match &cfg.analytic_grid {
        Some(g) => g
            .layout("analytic_grid.axes")
            .map_err(|e| Error::InvalidGrid(e.to_string()))?,
        None => layout.clone(),
    };
    let boot = Bootstrap::new(cfg.master_seed);
    let lambda = system.consts().lambda();
    let fp = HistogramEquation::FokkerPlanck {
        sign: DiffusionSign::Plus,
        lambda,
    };
    let points = || {
        sample_points(
            cfg.master_seed,
            cfg.points.n,
            cfg.points.min,
            cfg.points.max,
        )
    };
    let records = || Ok::<_, Error>(analysis_records(cfg, require(ens, check)?));
    let histogram = |eq: HistogramEquation| -> Result<Vec<CheckReport>> {
        let e = require(ens, check)?;
        Ok(vec![histogram_residual_check(
            e,
            &system,
            &layout,
            &records()?,
            eq,
            &boot,
        )?])
    };
    let stochastic_current = || -> Result<_> {
        let e = require(ens, check)?;
        compute_j_stochastic(e, &system, &layout, Some(&records()?), Some(&boot))
    };
    Ok(match check {
        CheckName::WienerIncrements => vec![wiener_increment_check(require(ens, check)?, &system)?],
        CheckName::LorentzInvariant => vec![lorentz_invariant_estimate(
            require(ens, check)?,
            &system,
            &boot,
        )?],
        CheckName::EnergyConstancy => vec![energy_constancy_check(
            require(ens, check)?,
            &system,
            &boot,
        )?],
        CheckName::Ehrenfest => vec![ehrenfest_check(
            require(ens, check)?,
            &system,
            cfg.tolerances.ehrenfest_floor,
            &boot,
        )?],
        CheckName::PartialIntegration => {
            partial_integration(require(ens, check)?, &system, cfg, &layout, &boot)?
        }
        CheckName::FokkerPlanck => vec![analytic_residual_check(
            &sampler,
            &analytic,
            fp,
            FD_TOLERANCE,
        )?],
        CheckName::Osmotic => vec![analytic_residual_check(
            &sampler,
            &analytic,
            HistogramEquation::Osmotic { lambda },
            FD_TOLERANCE,
        )?],
        CheckName::Continuity => vec![analytic_residual_check(
            &sampler,
            &analytic,
            HistogramEquation::Continuity,
            FD_TOLERANCE,
        )?],
        CheckName::FokkerPlanckHistogram => histogram(fp)?,
        CheckName::OsmoticHistogram => histogram(HistogramEquation::Osmotic { lambda })?,
        CheckName::ContinuityHistogram => histogram(HistogramEquation::Continuity)?,
        CheckName::CurrentEquivalence => {
            let jkg = compute_j_kg(&system, &layout)?;
            vec![current_equivalence_check(
                &stochastic_current()?,
                &jkg,
                cfg.tolerances.current,
            )?]
        }
        CheckName::ChargeConservation => vec![charge_conservation_check(&compute_j_kg(
            &system, &analytic,
        )?)?],
        CheckName::ChargeConservationHistogram => {
            let mut r = charge_conservation_check(&stochastic_current()?)?;
            r.check = "charge_conservation_histogram".into();
            vec![r]
        }
        CheckName::ActionStationarity => {
            let a = cfg.action.as_ref().ok_or_else(|| {
                Error::InvalidSimulation("action_stationarity needs an [action] table".into())
            })?;
            let layout = GridLayout::new(a.axes.clone(), FourVector::ZERO)?;
            let xi = a
                .perturbation
                .iter()
                .map(|t| Perturbation::harmonic(t.amplitude, t.k, t.phase))
                .reduce(Perturbation::and)
                .ok_or_else(|| Error::InvalidSimulation("empty perturbation".into()))?;
            vec![action_stationarity_check(
                &system,
                &xi,
                &ActionSweep::new(layout, a.epsilon_max),
            )?]
        }
        CheckName::EomResidual => vec![eom_residual_check(&system, &points())?],
        CheckName::CurlIdentity => vec![curl_identity_check(&system, &points())?],
        CheckName::GaugeInvariance => vec![gauge_invariance_check(&system, &cfg.gauge, &points())?],
    })
}

/// Every selected check against its expectation, in config order.
pub fn evaluate(
    cfg: &ScenarioConfig,
    ens: Option<&PathEnsemble>,
) -> std::result::Result<Vec<Outcome>, CliError> {
    cfg.checks
        .iter()
        .map(|&check| {
            let reports = evaluate_check(check, cfg, ens).map_err(|source| CliError::Check {
                scenario: cfg.scenario.clone(),
                check,
                source,
            })?;
            Ok(Outcome {
                check,
                expected_pass: !cfg.expect_fail.contains(&check),
                passed: reports.iter().all(|r| r.pass),
                reports,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct Header<'a> {
    scenario: &'a str,
    master_seed: u64,
    config_sha256: &'a str,
}

fn header_json(cfg: &ScenarioConfig, hash: &str) -> String {
    serde_json::to_string(&Header {
        scenario: &cfg.scenario,
        master_seed: cfg.master_seed,
        config_sha256: hash,
    })
    .expect("header serializes")
}

fn header_text(cfg: &ScenarioConfig, hash: &str) -> String {
    format!(
        "scenario={} master_seed={} config_sha256={hash}",
        cfg.scenario, cfg.master_seed
    )
}

/// Reports document: header object, then one object per check report.
pub fn write_reports_document(
    cfg: &ScenarioConfig,
    hash: &str,
    outcomes: &[Outcome],
    mut out: impl Write,
) -> Result<()> {
    writeln!(out, "{}", header_json(cfg, hash))?;
    checks::write_reports(outcomes.iter().flat_map(|o| &o.reports), &mut out)
}

/// Summary table with the expectation of each check.
pub fn write_summary(
    cfg: &ScenarioConfig,
    hash: &str,
    outcomes: &[Outcome],
    mut out: impl Write,
) -> Result<()> {
    writeln!(out, "# {}", header_text(cfg, hash))?;
    checks::write_table(outcomes.iter().flat_map(|o| &o.reports), &mut out)?;
    writeln!(out)?;
    writeln!(
        out,
        "{:<32} {:<9} {:<9} status",
        "check", "expected", "observed"
    )?;
    let word = |p: bool| if p { "pass" } else { "fail" };
    for o in outcomes {
        writeln!(
            out,
            "{:<32} {:<9} {:<9} {}",
            o.check.as_str(),
            word(o.expected_pass),
            word(o.passed),
            if o.matched() { "ok" } else { "MISMATCH" }
        )?;
    }
    Ok(())
}

/// The resolved config with a comment header; loadable as a scenario.
pub fn provenance_document(cfg: &ScenarioConfig, hash: &str) -> String {
    format!(
        "# {}\n# code version: {} {}\n{}",
        header_text(cfg, hash),
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION"),
        cfg.to_toml()
    )
}

fn create(
    dir: &Path,
    name: &str,
    artifacts: &mut Vec<PathBuf>,
) -> std::io::Result<BufWriter<File>> {
    let p = dir.join(name);
    let f = File::create(&p)?;
    artifacts.push(p);
    Ok(BufWriter::new(f))
}

/// Simulates, checks and writes `reports.jsonl`, `summary.txt`,
/// `provenance.toml` and the optional dumps into `out_dir`.
pub fn run(cfg: &ScenarioConfig, out_dir: &Path) -> std::result::Result<RunSummary, CliError> {
    let hash = config_hash(cfg);
    let context = |source: Error| CliError::Run {
        scenario: cfg.scenario.clone(),
        source,
    };
    let ens = simulate(cfg).map_err(context)?;
    let outcomes = evaluate(cfg, ens.as_ref())?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    let io = |e: std::io::Error| CliError::Io {
        path: out_dir.to_path_buf(),
        source: e,
    };
    let mut artifacts = Vec::new();

    let mut w = create(out_dir, "reports.jsonl", &mut artifacts).map_err(io)?;
    write_reports_document(cfg, &hash, &outcomes, &mut w).map_err(context)?;
    w.flush().map_err(io)?;
    let mut w = create(out_dir, "summary.txt", &mut artifacts).map_err(io)?;
    write_summary(cfg, &hash, &outcomes, &mut w).map_err(context)?;
    w.flush().map_err(io)?;
    let mut w = create(out_dir, "provenance.toml", &mut artifacts).map_err(io)?;
    w.write_all(provenance_document(cfg, &hash).as_bytes())
        .map_err(io)?;
    w.flush().map_err(io)?;

    if cfg.dump_paths {
        if let Some(e) = &ens {
            let mut w = create(out_dir, "paths.jsonl", &mut artifacts).map_err(io)?;
            write_path_dump(e, Some(&header_json(cfg, &hash)), &mut w).map_err(context)?;
            w.flush().map_err(io)?;
        }
    }
    if cfg.dump_grid {
        let layout = cfg.grid.layout("grid.axes").map_err(CliError::Config)?;
        let grid = match &ens {
            Some(e) => estimate_density(e, &layout, &analysis_records(cfg, e), None),
            None => {
                let (system, _) = build_systems(cfg).map_err(context)?;
                analytic_density(&system, &layout, &[0.0], 1)
            }
        }
        .map_err(context)?;
        let mut w = create(out_dir, "density.csv", &mut artifacts).map_err(io)?;
        write_grid(&grid, Some(&header_text(cfg, &hash)), &mut w).map_err(context)?;
        w.flush().map_err(io)?;
    }
    Ok(RunSummary {
        config_hash: hash,
        outcomes,
        artifacts,
    })
}
