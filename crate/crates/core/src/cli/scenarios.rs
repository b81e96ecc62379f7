//! Builtin scenarios and their catalogue.

use std::f64::consts::PI;

use super::config::{
    default_gauge, ActionConfig, CheckName, ConstantsConfig, ControlConfig, GridConfig, ModeConfig,
    ModelConfig, PartialIntegrationConfig, PerturbationTerm, PointsConfig, PotentialConfig,
    ScenarioConfig, TauConfig, TolerancesConfig,
};
use crate::density::Axis;
use crate::stochastic::InitialDistribution;

use CheckName::*;

pub struct BuiltinInfo {
    pub id: &'static str,
    pub description: &'static str,
    pub identities: &'static str,
}

pub const BUILTINS: [BuiltinInfo; 5] = [
    BuiltinInfo {
        id: "plane_wave",
        description: "free plane wave, uniform law on a (t, z) torus; exact checks",
        identities: "Wiener law, V*.V = c^2, energy constancy, Ehrenfest, partial integration, FP/osmotic/continuity, \
                     current equivalence and conservation, action stationarity, EOM, curl, gauge",
    },
    BuiltinInfo {
        id: "mode_sum_stationary",
        description: "two counter-propagating modes, 10^6 paths from the stationary law",
        identities: "Wiener law, V*.V = c^2 in mean, energy constancy, Ehrenfest, partial integration, \
                     FP/osmotic/continuity on histograms, current equivalence and conservation, action stationarity",
    },
    BuiltinInfo {
        id: "volkov_plane_wave_field",
        description: "Volkov state in a slow linearly polarized wave, electron at rest at the origin",
        identities: "V*.V = c^2, energy constancy, Ehrenfest with Lorentz force, action stationarity, EOM, curl, gauge",
    },
    BuiltinInfo {
        id: "negative_control_offshell",
        description: "superposition of two masses; the equation of motion, action stationarity and charge conservation must fail",
        identities: "EOM residual equals the Klein-Gordon ratio gradient; curl and gauge identities still hold",
    },
    BuiltinInfo {
        id: "negative_control_scaled_drift",
        description: "mode sum sampled with twice the drift until relaxed; drift-sensitive checks must fail",
        identities: "Wiener law, FP/osmotic analytic, osmotic/continuity histograms, current equivalence and conservation",
    },
];

const K: f64 = 0.7;
const PW_LENGTH: f64 = 5.0;
const T_SPAN: f64 = 4.0;
const OMEGA: f64 = 0.01;

fn axis(coord: usize, min: f64, max: f64, bins: usize, periodic: bool) -> Axis {
    Axis {
        coord,
        min,
        max,
        bins,
        periodic,
    }
}

fn torus(tp: f64, nt: usize, zp: f64, nz: usize) -> Vec<Axis> {
    vec![axis(0, 0.0, tp, nt, true), axis(3, 0.0, zp, nz, true)]
}

fn term(amplitude: [f64; 4], k: [f64; 4], phase: f64) -> PerturbationTerm {
    PerturbationTerm {
        amplitude,
        k,
        phase,
    }
}

/// Perturbation with a uniform shift and one harmonic per torus period.
fn torus_perturbation(tp: f64, zp: f64) -> Vec<PerturbationTerm> {
    vec![
        term([0.1, 0.3, 0.0, -0.2], [0.0; 4], 0.0),
        term([0.2, 0.1, 0.0, 0.3], [0.0, 0.0, 0.0, 2.0 * PI / zp], 0.4),
        term(
            [0.1, 0.0, 0.2, -0.1],
            [2.0 * PI / tp, 0.0, 0.0, 4.0 * PI / zp],
            1.1,
        ),
    ]
}

fn mode(momentum: [f64; 3], weight: [f64; 2]) -> ModeConfig {
    ModeConfig {
        momentum,
        weight,
        energy: None,
    }
}

fn base(
    id: &str,
    model: ModelConfig,
    tau: TauConfig,
    init: InitialDistribution,
    axes: Vec<Axis>,
) -> ScenarioConfig {
    let description = BUILTINS
        .iter()
        .find(|b| b.id == id)
        .map_or("", |b| b.description);
    ScenarioConfig {
        scenario: id.into(),
        description: description.into(),
        master_seed: 20_240_601,
        n_paths: 1,
        active: vec![0, 3],
        checks: Vec::new(),
        expect_fail: Vec::new(),
        output_dir: None,
        dump_paths: false,
        dump_grid: false,
        constants: ConstantsConfig::default(),
        model,
        potential: PotentialConfig::Zero,
        tau,
        init,
        grid: GridConfig { axes },
        analytic_grid: None,
        control: ControlConfig::default(),
        tolerances: TolerancesConfig::default(),
        points: PointsConfig::default(),
        gauge: default_gauge(),
        action: None,
        partial_integration: PartialIntegrationConfig::default(),
    }
}

fn plane_wave() -> ScenarioConfig {
    let mut c = base(
        "plane_wave",
        ModelConfig::PlaneWave {
            momentum: [0.0, 0.0, 0.4],
            energy: None,
        },
        TauConfig {
            dtau: 0.01,
            steps: 100,
            record_stride: 20,
            analyze_from: 0.0,
        },
        InitialDistribution::Uniform {
            min: [0.0; 4],
            max: [T_SPAN, 0.0, 0.0, PW_LENGTH],
        },
        torus(T_SPAN, 2, PW_LENGTH, 24),
    );
    c.n_paths = 200_000;
    c.checks = vec![
        WienerIncrements,
        LorentzInvariant,
        EnergyConstancy,
        Ehrenfest,
        PartialIntegration,
        FokkerPlanck,
        Osmotic,
        Continuity,
        FokkerPlanckHistogram,
        OsmoticHistogram,
        ContinuityHistogram,
        CurrentEquivalence,
        ChargeConservation,
        ChargeConservationHistogram,
        ActionStationarity,
        EomResidual,
        CurlIdentity,
        GaugeInvariance,
    ];
    c.tolerances.current = 0.02;
    c.action = Some(ActionConfig {
        axes: torus(T_SPAN, 16, PW_LENGTH, 32),
        epsilon_max: 0.1,
        perturbation: torus_perturbation(T_SPAN, PW_LENGTH),
    });
    c
}

fn mode_sum_model() -> ModelConfig {
    ModelConfig::ModeSum {
        modes: vec![
            mode([0.0, 0.0, K], [1.0, 0.0]),
            mode([0.0, 0.0, -K], [0.5, 0.0]),
        ],
        allow_off_shell: false,
    }
}

fn stationary_init() -> InitialDistribution {
    InitialDistribution::Density {
        min: [0.0; 4],
        max: [T_SPAN, 0.0, 0.0, PI / K],
    }
}

fn mode_sum_stationary() -> ScenarioConfig {
    let l = PI / K;
    // Short records at a small step: the Euler-Maruyama law drifts away
    // from |φ|² at O(δτ) per unit time.
    let mut c = base(
        "mode_sum_stationary",
        mode_sum_model(),
        TauConfig {
            dtau: 0.005,
            steps: 20,
            record_stride: 5,
            analyze_from: 0.0,
        },
        stationary_init(),
        torus(T_SPAN, 1, l, 48),
    );
    c.n_paths = 1_000_000;
    // FD truncation of ∂ ln p must sit below 1e-4 of the term scale.
    c.analytic_grid = Some(GridConfig {
        axes: torus(T_SPAN, 1, l, 768),
    });
    c.checks = vec![
        WienerIncrements,
        LorentzInvariant,
        EnergyConstancy,
        Ehrenfest,
        PartialIntegration,
        FokkerPlanck,
        Osmotic,
        Continuity,
        FokkerPlanckHistogram,
        OsmoticHistogram,
        ContinuityHistogram,
        CurrentEquivalence,
        ChargeConservation,
        ChargeConservationHistogram,
        ActionStationarity,
        EomResidual,
        CurlIdentity,
        GaugeInvariance,
    ];
    c.action = Some(ActionConfig {
        axes: torus(T_SPAN, 16, l, 64),
        epsilon_max: 0.1,
        perturbation: torus_perturbation(T_SPAN, l),
    });
    c
}

fn volkov_plane_wave_field() -> ScenarioConfig {
    let lam = 2.0 * PI / OMEGA;
    let mut c = base(
        "volkov_plane_wave_field",
        ModelConfig::Volkov {
            momentum: [0.0; 3],
            energy: None,
        },
        // Records 40 apart resolve the quiver at ω = 0.01 with small
        // Monte Carlo error against the 5% floor.
        TauConfig {
            dtau: 0.1,
            steps: 2400,
            record_stride: 400,
            analyze_from: 0.0,
        },
        InitialDistribution::Point { x: [0.0; 4] },
        torus(lam, 48, lam, 48),
    );
    c.n_paths = 4000;
    c.potential = PotentialConfig::PlaneWave {
        k: [OMEGA, 0.0, 0.0, OMEGA],
        polarization: [0.0, 1.0, 0.0, 0.0],
        amplitude: 1.0,
        phase: 0.3,
    };
    c.checks = vec![
        LorentzInvariant,
        EnergyConstancy,
        Ehrenfest,
        ActionStationarity,
        EomResidual,
        CurlIdentity,
        GaugeInvariance,
    ];
    c.action = Some(ActionConfig {
        axes: torus(lam, 48, lam, 48),
        epsilon_max: 0.1,
        perturbation: vec![term([0.2, 0.3, -0.1, 0.1], [OMEGA, 0.0, 0.0, -OMEGA], 0.2)],
    });
    c
}

fn negative_control_offshell() -> ScenarioConfig {
    let mut heavy = mode([0.0, 0.0, -0.5], [0.4, 0.1]);
    heavy.energy = Some((1.44f64 + 0.25).sqrt());
    let mut c = base(
        "negative_control_offshell",
        ModelConfig::ModeSum {
            modes: vec![mode([0.0, 0.0, 0.6], [1.0, 0.0]), heavy],
            allow_off_shell: true,
        },
        TauConfig {
            dtau: 0.01,
            steps: 1,
            record_stride: 1,
            analyze_from: 0.0,
        },
        InitialDistribution::Point { x: [0.0; 4] },
        vec![axis(0, -0.2, 0.4, 60, false), axis(3, 0.1, 0.7, 60, false)],
    );
    c.checks = vec![
        EomResidual,
        ActionStationarity,
        ChargeConservation,
        CurlIdentity,
        GaugeInvariance,
    ];
    c.expect_fail = vec![EomResidual, ActionStationarity, ChargeConservation];
    c.action = Some(ActionConfig {
        axes: torus(2.0 * PI, 32, PI, 32),
        epsilon_max: 0.1,
        perturbation: vec![term([0.2, 0.1, 0.0, 0.3], [0.0, 0.0, 0.0, 2.0], 0.4)],
    });
    c
}

fn negative_control_scaled_drift() -> ScenarioConfig {
    // Started in the true stationary law and run for several relaxation
    // times, so the analyzed records sit in the wrong law.
    let mut c = base(
        "negative_control_scaled_drift",
        mode_sum_model(),
        TauConfig {
            dtau: 0.01,
            steps: 500,
            record_stride: 20,
            analyze_from: 4.2,
        },
        stationary_init(),
        torus(T_SPAN, 1, PI / K, 24),
    );
    c.n_paths = 100_000;
    c.control.velocity_scale = 2.0;
    c.checks = vec![
        WienerIncrements,
        FokkerPlanck,
        Osmotic,
        OsmoticHistogram,
        ContinuityHistogram,
        CurrentEquivalence,
        ChargeConservationHistogram,
    ];
    c.expect_fail = c.checks.clone();
    c
}

/// Resolved builtin by id.
pub fn builtin(id: &str) -> Option<ScenarioConfig> {
    let mut c = match id {
        "plane_wave" => plane_wave(),
        "mode_sum_stationary" => mode_sum_stationary(),
        "volkov_plane_wave_field" => volkov_plane_wave_field(),
        "negative_control_offshell" => negative_control_offshell(),
        "negative_control_scaled_drift" => negative_control_scaled_drift(),
        _ => return None,
    };
    c.validate().expect("builtin scenarios are valid");
    Some(c)
}

/// Plain-text catalogue, one block per builtin.
pub fn list_scenarios() -> String {
    let mut out = String::new();
    for b in &BUILTINS {
        out.push_str(&format!(
            "{:<32} {}\n{:<32} exercises: {}\n",
            b.id, b.description, "", b.identities
        ));
    }
    out
}
