use dnm_core::emit::{compare, emit, read_record, META_FILE};
use dnm_core::scenario::{calibrate, run_scenario, HalfLifeProbe, Scenario};
use dnm_core::{Error, Measure, SpectralDensity};

const SCENARIO: &str = r#"
markovian_gamma = 0.01
measures = ["trace", "hellinger", "bures", "fidelity-f1"]

[chain]
n_qubits = 2

[time]
t_end = 60.0
n_samples = 601

[[reservoirs]]
tag = "lorentzian"
kind = "lorentzian"
g = 1.0
gamma = 0.03

[[reservoirs]]
tag = "ohmic"
kind = "ohmic"
g = 1.0
s_param = 1.5
omega_c = 8.0
omega_eg = 10.0
"#;

fn scenario() -> Scenario {
    Scenario::from_toml_str(SCENARIO).unwrap()
}

#[test]
fn emitted_files_read_back_into_the_same_record() {
    let record = run_scenario(&scenario()).unwrap();
    assert_eq!(record.failures().count(), 0);
    let dir = tempfile::tempdir().unwrap();
    emit(&record, dir.path()).unwrap();
    for name in [
        META_FILE,
        "amplitudes_reference.csv",
        "population_reference_2.csv",
        "amplitudes_ohmic.csv",
        "population_lorentzian_1.csv",
        "env_population_ohmic.csv",
        "qsd_fidelity-f1_lorentzian.csv",
        "qsd_bures_ohmic.csv",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let header = std::fs::read_to_string(dir.path().join("amplitudes_ohmic.csv")).unwrap();
    assert!(header.starts_with("t,re_c1,im_c1,re_c2,im_c2\n"));
    assert_eq!(read_record(dir.path()).unwrap(), record);
}

#[test]
fn repeated_runs_write_identical_tables() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    emit(&run_scenario(&scenario()).unwrap(), a.path()).unwrap();
    emit(&run_scenario(&scenario()).unwrap(), b.path()).unwrap();
    let mut names: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    for name in names {
        let x = std::fs::read(a.path().join(&name)).unwrap();
        let y = std::fs::read(b.path().join(&name)).unwrap();
        assert!(x == y, "{name:?} differs");
    }
    let cmp = compare(a.path(), b.path(), 0.0).unwrap();
    assert!(cmp.matches());
    assert_eq!(cmp.max_difference, 0.0);
}

#[test]
fn compare_reports_changed_and_missing_tables() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let record = run_scenario(&scenario()).unwrap();
    emit(&record, a.path()).unwrap();
    emit(&record, b.path()).unwrap();
    let path = b.path().join("qsd_trace_ohmic.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[10] = format!("{},0.5", lines[10].split(',').next().unwrap());
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    std::fs::remove_file(b.path().join("env_population_lorentzian.csv")).unwrap();
    let cmp = compare(a.path(), b.path(), 1e-12).unwrap();
    assert_eq!(cmp.problems.len(), 2, "{:?}", cmp.problems);
    assert!(cmp.problems.iter().any(|p| p.contains("qsd_trace_ohmic.csv") && p.contains("row 10")));
}

#[test]
fn empty_measure_list_gives_trajectories_only() {
    let sc = Scenario::from_toml_str(&SCENARIO.replace(
        r#"measures = ["trace", "hellinger", "bures", "fidelity-f1"]"#,
        "measures = []",
    ))
    .unwrap();
    let record = run_scenario(&sc).unwrap();
    for r in &record.reservoirs {
        assert!(r.outcome.as_ref().unwrap().qsd.is_empty());
    }
}

#[test]
fn one_failing_reservoir_does_not_stop_the_others() {
    // g = 40 cannot be resolved at the default step and fails the gate
    let text = format!(
        "{SCENARIO}\n[[reservoirs]]\ntag = \"stiff\"\nkind = \"lorentzian\"\ng = 40.0\ngamma = 0.03\n"
    );
    let record = run_scenario(&Scenario::from_toml_str(&text).unwrap()).unwrap();
    let failures: Vec<_> = record.failures().collect();
    assert_eq!(failures.len(), 1);
    assert_eq!(failures[0].0, "stiff");
    assert!(failures[0].1.contains("gate"), "{}", failures[0].1);
    assert!(record.reservoirs[0].outcome.is_ok() && record.reservoirs[1].outcome.is_ok());

    let dir = tempfile::tempdir().unwrap();
    emit(&record, dir.path()).unwrap();
    assert!(!dir.path().join("amplitudes_stiff.csv").exists());
    assert_eq!(read_record(dir.path()).unwrap(), record);
}

#[test]
fn unknown_reservoir_keys_are_rejected() {
    let text = SCENARIO.replace("gamma = 0.03", "gamma = 0.03\nwidth = 2.0");
    assert!(matches!(Scenario::from_toml_str(&text), Err(Error::InvalidScenario(_))));
}

#[test]
fn series_share_the_grid_and_start_at_zero_distance() {
    let record = run_scenario(&scenario()).unwrap();
    for r in &record.reservoirs {
        let run = r.outcome.as_ref().unwrap();
        assert_eq!(run.trajectory.times, record.times());
        for q in &run.qsd {
            assert_eq!(q.times, record.times());
            if q.measure.is_distance() {
                assert!(q.values[0] <= 1e-12, "{} {}", q.measure, q.values[0]);
            }
        }
        let f1 = run.qsd.iter().find(|q| q.measure == Measure::FidelityF1).unwrap();
        assert!((f1.values[0] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn markovian_self_calibration_keeps_the_rate() {
    let sc = Scenario::from_toml_str(&format!(
        "{SCENARIO}\n[[reservoirs]]\ntag = \"markov\"\nkind = \"markovian\"\ngamma_m = 0.01\n"
    ))
    .unwrap();
    let probe = HalfLifeProbe::for_scenario(&sc).unwrap();
    let reference = dnm_core::scenario::reference_half_life(&sc).unwrap();
    let sd = SpectralDensity::Markovian { gamma_m: 0.01 };
    let (out, outcome) = calibrate(&probe, &sd, reference, &Default::default()).unwrap();
    assert_eq!(out, sd);
    assert_eq!(outcome.value, 0.01);
}

#[test]
fn bracket_missing_the_target_is_a_calibration_failure() {
    let sc = scenario();
    let probe = HalfLifeProbe::for_scenario(&sc).unwrap();
    let sd = SpectralDensity::lorentzian(1.0, 0.03, 0.0);
    let options = dnm_core::scenario::CalibrationOptions {
        free_parameter: Some("gamma".into()),
        bracket: Some([10.0, 20.0]),
        rel_tol: 0.05,
    };
    let err = calibrate(&probe, &sd, 34.657, &options).unwrap_err();
    match err {
        Error::Calibration(msg) => assert!(msg.contains("straddle"), "{msg}"),
        other => panic!("{other}"),
    }
}
