use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SIM: &str = env!("CARGO_BIN_EXE_sim");

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("scenario.toml");
    fs::write(&path, text).unwrap();
    path
}

fn sim(subcommand: &str, config: &Path, out: &Path, sets: &[&str]) -> Output {
    let mut cmd = Command::new(SIM);
    cmd.arg(subcommand).arg("--config").arg(config).arg("--out").arg(out);
    for s in sets {
        cmd.arg("--set").arg(s);
    }
    cmd.output().expect("sim runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let headers = reader.headers().unwrap().iter().map(String::from).collect();
    let rows = reader.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (headers, rows)
}

fn assert_ok(output: &Output) {
    assert!(
        output.status.success(),
        "exit {:?}\nstderr: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stderr)
    );
}

const SWITCHED_STIRAP: &str = r#"
[scenario]
name = "stirap"
switch_detuning = true

[ensemble]
atoms = [2]

[pulses.stirap]
preset = "fig2-stirap"

[integrator]
step_divisor = 200
snapshots = 101
"#;

#[test]
fn switched_double_stirap_returns_ground_phase_to_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SWITCHED_STIRAP);
    let out = tmp.path().join("out");
    assert_ok(&sim("double-stirap", &config, &out, &[]));

    let (headers, rows) = read_csv(&out.join("stirap_n2.csv"));
    assert_eq!(&headers[..3], ["t_us", "ground_pop", "ground_phase_rad"]);
    assert!(headers.len() > 3, "tracked populations present: {headers:?}");
    assert_eq!(rows.len(), 101);
    let last = rows.last().unwrap();
    let phase: f64 = last[2].parse().unwrap();
    let pop: f64 = last[1].parse().unwrap();
    assert!(phase.abs() < 1e-6, "final phase {phase}");
    assert!(pop > 0.999, "final ground population {pop}");
    // 17 significant digits: one leading digit plus 16 decimals.
    let mantissa = last[1].split('e').next().unwrap();
    assert_eq!(mantissa.len(), 18, "{}", last[1]);

    let summary = read_json(&out.join("stirap_summary.json"));
    assert_eq!(summary["protocol"], "double-stirap");
    let run = &summary["result"]["runs"][0];
    assert_eq!(run["atoms"], 2);
    assert!(run["final_ground_phase_rad"].as_f64().unwrap().abs() < 1e-6);
}

#[test]
fn constant_detuning_leaves_a_phase() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SWITCHED_STIRAP);
    let out = tmp.path().join("out");
    assert_ok(&sim("double-stirap", &config, &out, &["scenario.switch_detuning=false", "integrator.snapshots=11"]));
    let summary = read_json(&out.join("stirap_summary.json"));
    let phase = summary["result"]["runs"][0]["final_ground_phase_rad"].as_f64().unwrap();
    assert!(phase.abs() > 0.1, "phase {phase}");
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SWITCHED_STIRAP);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_ok(&sim("double-stirap", &config, &a, &["integrator.snapshots=51"]));
    assert_ok(&sim("double-stirap", &config, &b, &["integrator.snapshots=51"]));
    for name in ["stirap_n2.csv", "stirap_summary.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn cnot_reports_matrix_and_fidelity() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        r#"
[scenario]
name = "cnot"
input = [[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 0.0]]

[ensemble]
control_atoms = 1
target_atoms = 1

[integrator]
snapshots = 21
"#,
    );
    let out = tmp.path().join("out");
    assert_ok(&sim("cnot", &config, &out, &[]));
    let summary = read_json(&out.join("cnot_summary.json"));
    let result = &summary["result"];
    let matrix = result["logical_matrix"].as_array().unwrap();
    assert_eq!(matrix.len(), 4);
    for row in matrix {
        let row = row.as_array().unwrap();
        assert_eq!(row.len(), 4);
        assert!(row.iter().all(|z| z.as_array().unwrap().len() == 2));
    }
    let fidelity = result["fidelity"].as_f64().unwrap();
    assert!(fidelity > 0.99, "fidelity {fidelity}");
    assert!(result["state_fidelity"].as_f64().unwrap() > 0.99);

    let (headers, rows) = read_csv(&out.join("cnot_trace.csv"));
    assert_eq!(&headers[3..], ["pop_00", "pop_01", "pop_10", "pop_11"]);
    let last = rows.last().unwrap();
    let p11: f64 = last[6].parse().unwrap();
    assert!(p11 > 0.99, "|10> should flip to |11>, got {p11}");
}

#[test]
fn ratio_sweep_has_one_row_per_point() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        r#"
[scenario]
name = "sweep"
mechanism = "stirap"

[scenario.sweep]
axis = "ratio"
start = 0.9
end = 1.1
points = 21

[ensemble]
atoms = [1]

[integrator]
step_divisor = 100
"#,
    );
    let out = tmp.path().join("out");
    assert_ok(&sim("phase-sweep", &config, &out, &[]));
    let (headers, rows) = read_csv(&out.join("sweep_n1.csv"));
    assert_eq!(headers, ["ratio", "phase_error"]);
    assert_eq!(rows.len(), 21);
    let ratios: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!((ratios[0] - 0.9).abs() < 1e-12 && (ratios[20] - 1.1).abs() < 1e-12);
    let at_one: f64 = rows[10][1].parse().unwrap();
    assert!(at_one.abs() < 1e-6, "matched passes leave no phase: {at_one}");
    let at_edge: f64 = rows[0][1].parse().unwrap();
    assert!(at_edge > 1e-3);
}

#[test]
fn bad_config_exits_with_code_two_and_writes_error_json() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "[scenario]\nunknown_key = 1\n");
    let out = tmp.path().join("out");
    let output = sim("double-stirap", &config, &out, &[]);
    assert_eq!(output.status.code(), Some(2));
    let stderr: Value = serde_json::from_slice(&output.stderr).unwrap();
    assert_eq!(stderr["error"]["kind"], "config");
    let written = read_json(&out.join("error.json"));
    assert_eq!(written["error"]["exit_code"], 2);
}

#[test]
fn invalid_values_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SWITCHED_STIRAP);
    let out = tmp.path().join("out");
    for set in ["integrator.step_divisor=-1", "ensemble.atoms=[]", "pulses.stirap.preset=\"nope\""] {
        let output = sim("double-stirap", &config, &out, &[set]);
        assert_eq!(output.status.code(), Some(2), "{set}");
    }
    let missing = sim("double-stirap", &tmp.path().join("absent.toml"), &out, &[]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn protocol_mismatch_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "[scenario]\nprotocol = \"cnot\"\n");
    let output = sim("ramsey", &config, &tmp.path().join("out"), &[]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn integration_failure_exits_with_code_three() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SWITCHED_STIRAP);
    let out = tmp.path().join("out");
    let output = sim(
        "double-stirap",
        &config,
        &out,
        &["ensemble.atoms=[1]", "integrator.step_divisor=0.5", "integrator.min_steps=1", "integrator.norm_tolerance=1e-12"],
    );
    assert_eq!(output.status.code(), Some(3), "{}", String::from_utf8_lossy(&output.stderr));
    let written = read_json(&out.join("error.json"));
    assert_eq!(written["error"]["kind"], "integration");
}

#[test]
fn basis_lists_blockaded_configurations() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "[ensemble]\nscheme = \"stirap\"\natoms = [2]\n");
    let out = tmp.path().join("out");
    assert_ok(&sim("basis", &config, &out, &[]));
    let summary = read_json(&out.join("basis_summary.json"));
    let result = &summary["result"];
    // Two atoms on {0, e} with at most one in r: 4 + 2·2 = 8 states.
    assert_eq!(result["dimension"], 8);
    assert_eq!(result["formula_dimension"], 8);
    let (headers, rows) = read_csv(&out.join("basis_configurations.csv"));
    assert_eq!(headers, ["index", "configuration", "rydberg_count"]);
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r[2] == "0" || r[2] == "1"));
}

#[test]
fn blockade_estimate_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "[ensemble]\natoms = [1, 4]\n");
    let out = tmp.path().join("out");
    assert_ok(&sim("blockade-estimate", &config, &out, &[]));
    let (_, rows) = read_csv(&out.join("blockade-estimate_blockade.csv"));
    assert_eq!(rows.len(), 2);
    let rabi: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!((rabi[1] / rabi[0] - 2.0).abs() < 1e-12);
}

#[test]
fn poisson_average_weights_loading() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "[scenario]\nmetric = \"pi_error\"\nmean_atoms = 2.0\nn_max = 4\n",
    );
    let out = tmp.path().join("out");
    assert_ok(&sim("poisson-average", &config, &out, &[]));
    let summary = read_json(&out.join("poisson-average_summary.json"));
    let result = &summary["result"];
    let defect = result["defect_probability"].as_f64().unwrap();
    assert!((defect - (-2.0f64).exp()).abs() < 1e-12);
    let (headers, rows) = read_csv(&out.join("poisson-average_loading.csv"));
    assert_eq!(headers, ["atoms", "probability", "pi_error"]);
    assert_eq!(rows.len(), 4);
    let avg = result["average"].as_f64().unwrap();
    let values: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    assert!(avg >= 0.0 && avg <= max);
}

#[test]
fn presets_parse_for_their_subcommands() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        let table: toml::Table = text.parse().unwrap();
        let protocol: rydsim_cli::Protocol = table["scenario"]["protocol"].as_str().unwrap().parse().unwrap();
        rydsim_cli::parse_config(&text, protocol, &[]).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert_eq!(seen, 9);
}
