use num_complex::Complex64;

use super::*;
use crate::spacetime::PhysicalConstants;
use crate::wavefunction::{Mode, PlaneWaveField, PotentialModel, Profile, WaveFunctionModel};

fn consts() -> PhysicalConstants {
    PhysicalConstants::natural(1.0)
}

fn plane_wave_system(spatial: [f64; 3]) -> (System, FourVector) {
    let p = consts().on_shell(spatial);
    let m = WaveFunctionModel::plane_wave(p, &consts()).unwrap();
    (System::new(m, PotentialModel::Zero, consts()).unwrap(), p)
}

fn volkov_system(omega: f64, amplitude: f64) -> System {
    let field = PlaneWaveField::new(
        FourVector([omega, 0.0, 0.0, omega]),
        FourVector([0.0, 1.0, 0.0, 0.0]),
        Profile::Cosine {
            amplitude,
            phase: 0.0,
        },
    )
    .unwrap();
    let p = consts().on_shell([0.0, 0.0, 0.0]);
    let m = WaveFunctionModel::volkov(p, field.clone(), &consts()).unwrap();
    System::new(m, PotentialModel::PlaneWave(field), consts()).unwrap()
}

fn spec(n_paths: usize, dtau: f64, n_steps: usize, stride: usize, seed: u64) -> SimulationSpec {
    SimulationSpec {
        init: InitialDistribution::Point { x: [0.0; 4] },
        n_paths,
        tau: TauGrid::new(0.0, dtau, n_steps).unwrap(),
        record_stride: stride,
        master_seed: seed,
        noise: None,
        scenario: "test".into(),
    }
}

#[test]
fn increments_have_wiener_moments() {
    let n = 100_000;
    let dtau = 0.01;
    let mut rng = RngStream::new(42, 0);
    let draws: Vec<WienerIncrement> = (0..n).map(|_| sample_increment(&mut rng, dtau)).collect();
    let mut mean = [0.0; 4];
    for d in &draws {
        for mu in 0..4 {
            mean[mu] += d.dw.0[mu] / n as f64;
        }
    }
    for m in mean {
        assert!(m.abs() <= 5.0 * (dtau / n as f64).sqrt(), "mean {m}");
    }
    for a in 0..4 {
        for b in 0..4 {
            let c: f64 = draws
                .iter()
                .map(|d| (d.dw.0[a] - mean[a]) * (d.dw.0[b] - mean[b]))
                .sum::<f64>()
                / (n - 1) as f64;
            let expect = if a == b { 1.0 } else { 0.0 };
            assert!(
                (c / dtau - expect).abs() <= 0.05,
                "cov[{a}][{b}] = {}",
                c / dtau
            );
        }
    }
}

#[test]
fn streams_are_deterministic_and_distinct() {
    let draw = |seed, idx| {
        let mut r = RngStream::new(seed, idx);
        (0..16)
            .map(|_| sample_increment(&mut r, 0.1))
            .collect::<Vec<_>>()
    };
    assert_eq!(draw(7, 3), draw(7, 3));
    assert_ne!(draw(7, 3), draw(7, 4));
    assert_ne!(draw(7, 3), draw(8, 3));
}

#[test]
fn step_examples() {
    let x = FourVector([1.0, 2.0, 3.0, 4.0]);
    let zero = WienerIncrement {
        dw: FourVector::ZERO,
    };
    assert_eq!(step(&x, &FourVector::ZERO, 0.1, &zero, 1.0), x);

    let v = FourVector([1.0, -0.5, 0.25, 2.0]);
    let mut y = x;
    for _ in 0..10 {
        y = step(&y, &v, 0.1, &zero, 0.0);
    }
    for mu in 0..4 {
        assert!((y.0[mu] - (x.0[mu] + 10.0 * 0.1 * v.0[mu])).abs() < 1e-12);
    }

    let (n_paths, n, dtau) = (100_000, 20, 0.05);
    let mut sum_sq = [0.0; 4];
    for i in 0..n_paths {
        let mut rng = RngStream::new(1, i);
        let mut y = FourVector::ZERO;
        for _ in 0..n {
            y = step(
                &y,
                &FourVector::ZERO,
                dtau,
                &sample_increment(&mut rng, dtau),
                1.0,
            );
        }
        for mu in 0..4 {
            sum_sq[mu] += y.0[mu] * y.0[mu];
        }
    }
    for s in sum_sq {
        let var = s / n_paths as f64;
        assert!(
            (var / (n as f64 * dtau) - 1.0).abs() <= 0.05,
            "variance {var}"
        );
    }
}

#[test]
fn forward_mean_velocity_is_momentum() {
    let (sys, p) = plane_wave_system([0.3, 0.0, -0.4]);
    let (n, dtau, steps) = (20_000, 0.05, 40);
    let ens = simulate_forward(&sys, &spec(n, dtau, steps, 10, 11)).unwrap();
    let t = dtau * steps as f64;
    let last = ens.n_records() - 1;
    for mu in 0..4 {
        let mean = ens.slice(last).map(|x| x.0[mu]).sum::<f64>() / n as f64 / t;
        let se = consts().lambda() * t.sqrt() / (n as f64).sqrt() / t;
        assert!(
            (mean - p.0[mu]).abs() <= 3.0 * se,
            "{mu}: {mean} vs {}",
            p.0[mu]
        );
    }
}

#[test]
fn backward_mean_velocity_matches_forward() {
    let (sys, p) = plane_wave_system([0.3, 0.0, -0.4]);
    let (n, dtau, steps) = (20_000, 0.05, 40);
    let ens = simulate_backward(&sys, &spec(n, dtau, steps, 10, 12)).unwrap();
    assert_eq!(ens.direction(), Direction::Backward);
    let t = dtau * steps as f64;
    let last = ens.n_records() - 1;
    for x in ens.slice(last) {
        assert_eq!(*x, FourVector::ZERO);
    }
    for mu in 0..4 {
        let mean = -ens.slice(0).map(|x| x.0[mu]).sum::<f64>() / n as f64 / t;
        let se = t.sqrt() / (n as f64).sqrt() / t;
        assert!(
            (mean - p.0[mu]).abs() <= 3.0 * se,
            "{mu}: {mean} vs {}",
            p.0[mu]
        );
    }
}

#[test]
fn zero_noise_follows_the_integral_curve() {
    let sys = volkov_system(0.5, 1.0);
    let mut s = spec(8, 0.05, 40, 1, 3);
    s.noise = Some(0.0);
    for (ens, dir) in [
        (simulate_forward(&sys, &s).unwrap(), Direction::Forward),
        (simulate_backward(&sys, &s).unwrap(), Direction::Backward),
    ] {
        let mut curve = vec![FourVector::ZERO];
        let zero = WienerIncrement {
            dw: FourVector::ZERO,
        };
        for _ in 0..40 {
            let x = *curve.last().unwrap();
            let (vp, vm) = sys.drift_velocities(&x).unwrap();
            let next = match dir {
                Direction::Forward => step(&x, &vp, 0.05, &zero, 0.0),
                Direction::Backward => step(&x, &-vm, 0.05, &zero, 0.0),
            };
            curve.push(next);
        }
        if dir == Direction::Backward {
            curve.reverse();
        }
        for i in 0..ens.n_paths() {
            assert_eq!(ens.path(i), &curve[..]);
        }
    }
}

#[test]
fn runs_are_bit_identical_across_worker_counts() {
    let sys = volkov_system(0.5, 1.0);
    let s = spec(300, 0.05, 20, 5, 99);
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let three = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap();
    let a = one.install(|| simulate_forward(&sys, &s).unwrap());
    let b = three.install(|| simulate_forward(&sys, &s).unwrap());
    let c = simulate_forward(&sys, &s).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
    let mut other = s.clone();
    other.master_seed = 100;
    assert_ne!(a, simulate_forward(&sys, &other).unwrap());
}

#[test]
fn plane_wave_increments_are_unit_wiener() {
    let (sys, _) = plane_wave_system([0.2, 0.1, 0.0]);
    let ens = simulate_forward(&sys, &spec(10_000, 0.02, 10, 1, 5)).unwrap();
    let st = increment_statistics(&ens, &sys).unwrap();
    assert_eq!(st.count, 100_000);
    let c = st.normalized_covariance();
    let se = st.mean_standard_error();
    for a in 0..4 {
        assert!(st.mean[a].abs() <= 5.0 * se[a]);
        for b in 0..4 {
            let expect = if a == b { 1.0 } else { 0.0 };
            assert!((c[a][b] - expect).abs() <= 0.05, "{a}{b}: {}", c[a][b]);
        }
    }

    let back = simulate_backward(&sys, &spec(10_000, 0.02, 10, 1, 6)).unwrap();
    let c = increment_statistics(&back, &sys)
        .unwrap()
        .normalized_covariance();
    for a in 0..4 {
        assert!((c[a][a] - 1.0).abs() <= 0.05);
    }

    let mut small = spec(10_000, 0.02, 10, 1, 7);
    small.noise = Some(1e-3);
    let ens = simulate_forward(&sys, &small).unwrap();
    let c = increment_statistics(&ens, &sys)
        .unwrap()
        .normalized_covariance();
    for a in 0..4 {
        assert!((c[a][a] - 1.0).abs() <= 0.05);
    }
}

#[test]
fn quadratic_variation_matches_ito_rule() {
    let (sys, p) = plane_wave_system([0.0, 0.0, 0.0]);
    let (n, dtau, steps) = (5_000, 0.01, 100);
    let ens = simulate_forward(&sys, &spec(n, dtau, steps, 1, 8)).unwrap();
    let span = dtau * steps as f64;
    for a in 0..4 {
        for b in a..4 {
            let per_path: Vec<f64> = (0..n)
                .map(|i| {
                    ens.path(i)
                        .windows(2)
                        .map(|w| (w[1].0[a] - w[0].0[a]) * (w[1].0[b] - w[0].0[b]))
                        .sum::<f64>()
                        / span
                })
                .collect();
            let mean = per_path.iter().sum::<f64>() / n as f64;
            let var = per_path.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            let lam2 = if a == b { consts().lambda_sq() } else { 0.0 };
            let expect = lam2 + p.0[a] * p.0[b] * dtau;
            assert!(
                (mean - expect).abs() <= 3.0 * se,
                "{a}{b}: {mean} vs {expect} ± {se}"
            );
        }
    }
}

/// `E[x¹(T)]` with coupled paths at `δτ`, `δτ/2`, `δτ/4`: successive
/// differences shrink by about 2 for a first-order scheme.
#[test]
fn euler_maruyama_weak_order_is_one() {
    let sys = volkov_system(1.0, 1.0);
    let (n, t, coarse) = (2_000, 2.0, 10);
    let fine = 4 * coarse;
    let mut means = [0.0; 3];
    for i in 0..n {
        let mut rng = RngStream::new(21, i as u64);
        let h = t / fine as f64;
        let dws: Vec<FourVector> = (0..fine)
            .map(|_| sample_increment(&mut rng, h).dw)
            .collect();
        for (level, m) in means.iter_mut().enumerate() {
            let group = 1 << (2 - level);
            let dt = h * group as f64;
            let mut x = FourVector::ZERO;
            for chunk in dws.chunks(group) {
                let dw = chunk.iter().fold(FourVector::ZERO, |acc, d| acc + *d);
                let (vp, _) = sys.drift_velocities(&x).unwrap();
                x = step(&x, &vp, dt, &WienerIncrement { dw }, 1.0);
            }
            *m += x.0[1] / n as f64;
        }
    }
    let ratio = (means[0] - means[1]) / (means[1] - means[2]);
    assert!(
        (1.5..=3.0).contains(&ratio),
        "ratio {ratio}, means {means:?}"
    );
}

#[test]
fn density_initialisation_respects_the_box() {
    let k = 0.7;
    let c = consts();
    let m = WaveFunctionModel::mode_sum(
        vec![
            Mode {
                weight: Complex64::new(1.0, 0.0),
                p: c.on_shell([0.0, 0.0, k]),
            },
            Mode {
                weight: Complex64::new(0.5, 0.0),
                p: c.on_shell([0.0, 0.0, -k]),
            },
        ],
        &c,
    )
    .unwrap();
    let sys = System::new(m, PotentialModel::Zero, c).unwrap();
    let period = std::f64::consts::PI / k;
    let mut s = spec(40_000, 0.01, 1, 1, 4);
    s.init = InitialDistribution::Density {
        min: [0.0, 0.0, 0.0, 0.0],
        max: [1.0, 0.0, 0.0, period],
    };
    let ens = simulate_forward(&sys, &s).unwrap();
    // Fraction in the first quarter period: ∫(1.25 + cos 2kz) over [0, π/4k] / (1.25·π/k) = 1/4 + 1/(2.5π).
    let frac = ens.slice(0).filter(|x| x.0[3] < 0.25 * period).count() as f64 / 40_000.0;
    let expect = 0.25 + 1.0 / (2.5 * std::f64::consts::PI);
    let se = (expect * (1.0 - expect) / 40_000.0).sqrt();
    assert!((frac - expect).abs() <= 4.0 * se, "{frac} vs {expect}");
    for x in ens.slice(0) {
        assert!(x.0[0] >= 0.0 && x.0[0] <= 1.0 && x.0[1] == 0.0 && x.0[2] == 0.0);
    }
}

#[test]
fn node_aborts_are_counted_and_limited() {
    let c = consts();
    let m = WaveFunctionModel::mode_sum(
        vec![
            Mode {
                weight: Complex64::new(1.0, 0.0),
                p: c.on_shell([0.0, 0.0, 0.7]),
            },
            Mode {
                weight: Complex64::new(1.0, 0.0),
                p: c.on_shell([0.0, 0.0, -0.7]),
            },
        ],
        &c,
    )
    .unwrap();
    let sys = System::new(m, PotentialModel::Zero, c)
        .unwrap()
        .with_node_epsilon(0.5);
    let mut s = spec(1_000, 0.01, 5, 1, 9);
    s.init = InitialDistribution::Uniform {
        min: [0.0; 4],
        max: [0.0, 0.0, 0.0, 5.0],
    };
    assert!(matches!(
        simulate_forward(&sys, &s),
        Err(Error::TooManyAborts { .. })
    ));
}

#[test]
fn invalid_specs_are_rejected() {
    let (sys, _) = plane_wave_system([0.0; 3]);
    assert!(TauGrid::new(0.0, 0.0, 3).is_err());
    assert!(TauGrid::new(0.0, -1.0, 3).is_err());
    let mut s = spec(10, 0.1, 10, 3, 1);
    assert!(simulate_forward(&sys, &s).is_err());
    s.record_stride = 5;
    s.n_paths = 0;
    assert!(simulate_forward(&sys, &s).is_err());
}

#[test]
fn path_dump_has_one_record_per_point() {
    let (sys, _) = plane_wave_system([0.0; 3]);
    let ens = simulate_forward(&sys, &spec(3, 0.1, 4, 2, 1)).unwrap();
    let mut buf = Vec::new();
    write_path_dump(&ens, Some("{\"seed\":1}"), &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 3 * 3);
    let v: serde_json::Value = serde_json::from_str(lines[4]).unwrap();
    assert_eq!(v["path_index"], 1);
    assert_eq!(v["tau"], 0.0);
    assert!(v["c3"].is_number());
}
