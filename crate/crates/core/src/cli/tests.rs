use super::config::{ModelConfig, PotentialConfig};
use super::*;

fn parse_err(text: &str) -> ConfigError {
    load_config_str(text).expect_err("document must be rejected")
}

/// A fast ensemble scenario: the plane wave with few paths and two checks.
fn small_plane_wave() -> ScenarioConfig {
    load_config_str(
        "scenario = \"plane_wave\"\nn_paths = 2000\nchecks = [\"wiener_increments\", \"lorentz_invariant\", \"eom_residual\"]\n",
    )
    .unwrap()
}

#[test]
fn minimal_document_takes_builtin_values() {
    let cfg = load_config_str("scenario = \"plane_wave\"\n").unwrap();
    assert_eq!(cfg, builtin("plane_wave").unwrap());
    let ModelConfig::PlaneWave { momentum, energy } = cfg.model else {
        panic!("plane wave model expected");
    };
    let e = energy.expect("energy is filled on shell");
    let p2: f64 = momentum.iter().map(|p| p * p).sum();
    assert!((e - (1.0 + p2).sqrt()).abs() < 1e-14);
}

#[test]
fn every_builtin_round_trips() {
    for b in &BUILTINS {
        let cfg = builtin(b.id).unwrap();
        let back = load_config_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg, "{}", b.id);
        assert_eq!(config_hash(&back), config_hash(&cfg));
    }
}

#[test]
fn overrides_merge_and_kind_tables_replace() {
    let cfg = load_config_str("scenario = \"mode_sum_stationary\"\n[tau]\nsteps = 40\n").unwrap();
    assert_eq!(cfg.tau.steps, 40);
    assert_eq!(cfg.tau.dtau, 0.005);
    let cfg = load_config_str(
        "scenario = \"volkov_plane_wave_field\"\n[potential]\nkind = \"plane_wave\"\nk = [0.02, 0, 0, 0.02]\n\
         polarization = [0, 0, 1, 0]\namplitude = 0.5\nphase = 0\n",
    )
    .unwrap();
    assert_eq!(
        cfg.potential,
        PotentialConfig::PlaneWave {
            k: [0.02, 0.0, 0.0, 0.02],
            polarization: [0.0, 0.0, 1.0, 0.0],
            amplitude: 0.5,
            phase: 0.0,
        }
    );
}

#[test]
fn off_shell_energy_is_a_validation_error() {
    let e = parse_err("scenario = \"plane_wave\"\n[model]\nkind = \"plane_wave\"\nmomentum = [0, 0, 0.4]\nenergy = 1.5\n");
    assert!(
        matches!(e, ConfigError::Validation { ref field, .. } if field == "model.energy"),
        "{e}"
    );
    let ok = "scenario = \"plane_wave\"\n[model]\nkind = \"plane_wave\"\nmomentum = [0, 0, 0.4]\nenergy = 1.0770329614269007\n";
    load_config_str(ok).unwrap();
}

#[test]
fn unknown_key_names_its_line() {
    let e = parse_err("scenario = \"plane_wave\"\nn_paths = 10\nfooo = 3\n");
    assert!(
        matches!(e, ConfigError::Parse { line: 3, ref message } if message.contains("fooo")),
        "{e}"
    );
    let e = parse_err("scenario = \"plane_wave\"\n[tau]\ndtau = 0.01\nstepz = 4\n");
    assert!(matches!(e, ConfigError::Parse { line: 4, .. }), "{e}");
}

#[test]
fn malformed_toml_is_a_parse_error() {
    let e = parse_err("scenario = \"plane_wave\"\nn_paths = = 3\n");
    assert!(matches!(e, ConfigError::Parse { line: 2, .. }), "{e}");
}

#[test]
fn invalid_values_are_rejected() {
    let cases = [
        ("checks = [\"no_such_check\"]", None),
        ("n_paths = 0", Some("n_paths")),
        ("[tau]\ndtau = 0.0", Some("tau.dtau")),
        ("[tau]\ndtau = -0.1", Some("tau.dtau")),
        ("[tau]\nrecord_stride = 30", Some("tau.record_stride")),
        ("checks = [\"ehrenfest\", \"ehrenfest\"]", Some("checks")),
        (
            "checks = [\"ehrenfest\"]\nexpect_fail = [\"osmotic\"]",
            Some("expect_fail"),
        ),
        ("master_seed = 9223372036854775808", None),
    ];
    for (body, field) in cases {
        let e = parse_err(&format!("scenario = \"plane_wave\"\n{body}\n"));
        match field {
            Some(f) => assert!(
                matches!(e, ConfigError::Validation { field: ref g, .. } if g == f),
                "{body}: {e}"
            ),
            None => assert!(matches!(e, ConfigError::Parse { .. }), "{body}: {e}"),
        }
    }
}

#[test]
fn unknown_scenario_needs_every_field() {
    let e = parse_err("scenario = \"custom\"\n");
    assert!(matches!(e, ConfigError::Validation { .. }), "{e}");
}

#[test]
fn catalogue_lists_every_builtin() {
    let text = list_scenarios();
    for b in &BUILTINS {
        assert!(text.contains(b.id), "{}", b.id);
        assert!(builtin(b.id).is_some());
    }
    assert!(builtin("nope").is_none());
}

#[test]
fn schema_is_a_loadable_document() {
    let s = schema();
    for c in CheckName::ALL {
        assert!(s.contains(c.as_str()));
    }
    load_config_str(&s).unwrap();
}

#[test]
fn check_names_round_trip() {
    for c in CheckName::ALL {
        let cfg =
            load_config_str(&format!("scenario = \"plane_wave\"\nchecks = [\"{c}\"]\n")).unwrap();
        assert_eq!(cfg.checks, vec![c]);
    }
}

#[test]
fn provenance_reruns_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_plane_wave();
    let first = run(&cfg, &dir.path().join("a")).unwrap();
    assert!(first.all_matched());
    let provenance = std::fs::read_to_string(dir.path().join("a/provenance.toml")).unwrap();
    let again = load_config_str(&provenance).unwrap();
    assert_eq!(again, cfg);
    let second = run(&again, &dir.path().join("b")).unwrap();
    assert_eq!(second.config_hash, first.config_hash);
    for name in ["reports.jsonl", "summary.txt", "provenance.toml"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn output_dir_does_not_change_the_hash() {
    let mut cfg = small_plane_wave();
    let h = config_hash(&cfg);
    cfg.output_dir = Some("elsewhere".into());
    assert_eq!(config_hash(&cfg), h);
    cfg.master_seed += 1;
    assert_ne!(config_hash(&cfg), h);
}

#[test]
fn reports_document_has_a_header_then_one_report_per_line() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_plane_wave();
    cfg.dump_paths = true;
    cfg.dump_grid = true;
    let summary = run(&cfg, dir.path()).unwrap();
    assert_eq!(summary.artifacts.len(), 5);
    let text = std::fs::read_to_string(dir.path().join("reports.jsonl")).unwrap();
    let mut lines = text.lines();
    let header: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(header["scenario"], "plane_wave");
    assert_eq!(header["config_sha256"], summary.config_hash.as_str());
    let reports: Vec<serde_json::Value> = lines.map(|l| serde_json::from_str(l).unwrap()).collect();
    let n: usize = summary.outcomes.iter().map(|o| o.reports.len()).sum();
    assert_eq!(reports.len(), n);
    assert!(reports.iter().all(|r| r["pass"].is_boolean()));
    let paths = std::fs::read_to_string(dir.path().join("paths.jsonl")).unwrap();
    assert_eq!(
        paths.lines().count(),
        1 + cfg.n_paths * (cfg.tau.steps / cfg.tau.record_stride + 1)
    );
}

#[test]
fn expected_failures_count_as_matched() {
    let cfg = builtin("negative_control_offshell").unwrap();
    let outcomes = evaluate(&cfg, None).unwrap();
    for o in &outcomes {
        assert_eq!(o.passed, o.expected_pass, "{}", o.check);
        assert!(o.matched());
    }
}
