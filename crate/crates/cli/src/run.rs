//! Protocol execution: one function per subcommand, each writing its CSV
//! files and returning the JSON result block.

use num_complex::Complex64 as C64;
use serde_json::{json, Value};

use rydsim::analysis::{blockade_estimate, poisson_average, poisson_loading};
use rydsim::dynamics::{propagate_schrodinger, PropagationOptions};
use rydsim::protocols::{
    cnot, cnot_schedule, phase_aligned_deviation, phase_error_sweep, pi_pulse_baseline, pi_pulse_closed_form,
    ramsey_reference, ramsey_scan, run_double_arp_with_ratio, run_double_stirap_with_ratio, single_arp_error,
    single_qubit_gate, single_qubit_schedule, single_stirap_error, single_stirap_error_with_decay, LogicalLevel,
};
use rydsim::statespace::expected_dimension;
use rydsim::{
    build_basis, EvolutionTrace, GateReport, LevelScheme, LogicalEncoding, Passage, PulseSchedule, SequenceRun, StateVector,
    SymmetricSector,
};

use crate::config::{Mechanism, Metric, Protocol, ScenarioConfig};
use crate::error::CliError;
use crate::output::{complex, complex_matrix, trace_table, Cell, OutputDir, Table};

#[derive(Debug)]
pub struct RunSummary {
    pub protocol: Protocol,
    pub files: Vec<String>,
    pub result: Value,
}

impl RunSummary {
    pub fn to_json(&self, config: &ScenarioConfig) -> Value {
        json!({
            "protocol": self.protocol.name(),
            "name": config.name,
            "files": self.files,
            "result": self.result,
        })
    }
}

/// Run the scenario, writing CSV files and `<prefix>_summary.json` into the
/// configured output directory.
pub fn run(config: &ScenarioConfig) -> Result<RunSummary, CliError> {
    let mut out = OutputDir::create(&config.out_dir)?;
    let result = match config.protocol {
        Protocol::DoubleStirap | Protocol::DoubleArp => double_sequence(config, &mut out)?,
        Protocol::PiBaseline => pi_baseline(config, &mut out)?,
        Protocol::SingleQubitGate => single_qubit(config, &mut out)?,
        Protocol::Ramsey => ramsey(config, &mut out)?,
        Protocol::Cnot => cnot_gate(config, &mut out)?,
        Protocol::PhaseSweep => phase_sweep(config, &mut out)?,
        Protocol::PoissonAverage => loading_average(config, &mut out)?,
        Protocol::BlockadeEstimate => blockade(config, &mut out)?,
        Protocol::Basis => basis(config, &mut out)?,
    };
    let mut summary = RunSummary { protocol: config.protocol, files: out.files.clone(), result };
    let name = format!("{}_summary.json", config.prefix);
    summary.files.push(name.clone());
    out.json(&name, &summary.to_json(config))?;
    Ok(summary)
}

/// Options for runs that only need end-point values.
fn endpoint_options(config: &ScenarioConfig) -> PropagationOptions {
    PropagationOptions { snapshots: 2, ..config.options.clone() }
}

fn csv_name(config: &ScenarioConfig, suffix: &str) -> String {
    format!("{}_{suffix}.csv", config.prefix)
}

fn maybe_csv(config: &ScenarioConfig, out: &mut OutputDir, suffix: &str, table: &Table) -> Result<Value, CliError> {
    if config.write_csv {
        Ok(Value::String(out.csv(&csv_name(config, suffix), table)?))
    } else {
        Ok(Value::Null)
    }
}

fn sequence_json(run: &SequenceRun, csv: Value) -> Value {
    json!({
        "atoms": run.atoms,
        "final_ground_population": run.final_ground_population,
        "final_ground_phase_rad": run.final_ground_phase,
        "population_error": run.population_error,
        "max_norm_drift": run.trace.max_norm_drift,
        "steps": run.trace.steps,
        "step_us": run.trace.step_size,
        "csv": csv,
    })
}

fn double_sequence(config: &ScenarioConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let mut runs = Vec::new();
    for &n in &config.atoms {
        let run = match config.protocol {
            Protocol::DoubleStirap => {
                run_double_stirap_with_ratio(n, &config.stirap, config.switch_detuning, config.ratio, &config.options)?
            }
            _ => run_double_arp_with_ratio(n, &config.arp, config.invert_phase, config.ratio, &config.options)?,
        };
        let csv = maybe_csv(config, out, &format!("n{n}"), &trace_table(&run.trace))?;
        runs.push(sequence_json(&run, csv));
    }
    let compensation = match config.protocol {
        Protocol::DoubleStirap => json!({ "switch_detuning": config.switch_detuning }),
        _ => json!({ "invert_phase": config.invert_phase }),
    };
    Ok(json!({ "ratio": config.ratio, "compensation": compensation, "runs": runs }))
}

fn metric_value(metric: Metric, n: usize, config: &ScenarioConfig) -> Result<f64, CliError> {
    let opts = endpoint_options(config);
    Ok(match metric {
        Metric::PiError => pi_pulse_baseline(n, config.n_opt, config.pi_rabi, &opts)?,
        Metric::StirapError => single_stirap_error(n, &config.stirap, &opts)?,
        Metric::ArpError => single_arp_error(n, &config.arp, &opts)?,
        Metric::StirapDecayError => single_stirap_error_with_decay(n, &config.stirap, &config.decay, &opts)?,
        Metric::StirapFarDecayError => single_stirap_error_with_decay(n, &config.stirap_far, &config.decay, &opts)?,
        Metric::DoubleStirapError => {
            run_double_stirap_with_ratio(n, &config.stirap, config.switch_detuning, config.ratio, &opts)?.population_error
        }
        Metric::DoubleArpError => {
            run_double_arp_with_ratio(n, &config.arp, config.invert_phase, config.ratio, &opts)?.population_error
        }
    })
}

fn pi_baseline(config: &ScenarioConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let with_closed_form = config.columns.contains(&Metric::PiError);
    let mut headers = vec!["atoms".to_string()];
    headers.extend(config.columns.iter().map(|m| m.name().to_string()));
    if with_closed_form {
        headers.push("pi_error_closed_form".into());
    }
    let mut table = Table::new(headers.clone());
    let mut rows = Vec::new();
    for &n in &config.atoms {
        let mut row = vec![Cell::Int(n)];
        let mut entry = serde_json::Map::new();
        entry.insert("atoms".into(), json!(n));
        for &metric in &config.columns {
            let value = metric_value(metric, n, config)?;
            row.push(Cell::Num(value));
            entry.insert(metric.name().into(), json!(value));
        }
        if with_closed_form {
            let closed = pi_pulse_closed_form(n, config.n_opt);
            row.push(Cell::Num(closed));
            entry.insert("pi_error_closed_form".into(), json!(closed));
        }
        table.push(row);
        rows.push(Value::Object(entry));
    }
    let csv = maybe_csv(config, out, "errors", &table)?;
    Ok(json!({ "n_opt": config.n_opt, "columns": &headers[1..], "rows": rows, "csv": csv }))
}

fn gate_json(report: &GateReport, csv: Value) -> Value {
    json!({
        "logical_matrix": complex_matrix(&report.logical_matrix),
        "target_matrix": complex_matrix(&report.target_matrix),
        "fidelity": report.fidelity,
        "matrix_deviation": phase_aligned_deviation(&report.target_matrix, &report.logical_matrix),
        "output": report.output.iter().map(|z| complex(*z)).collect::<Vec<_>>(),
        "state_fidelity": report.state_fidelity,
        "ground_phase_final_rad": report.ground_phase_final,
        "population_error": report.population_error,
        "chi_rad": report.chi,
        "max_norm_drift": report.max_norm_drift,
        "steps": report.steps,
        "csv": csv,
    })
}

/// Trace of the requested input through `schedule`, tracking the logical and
/// auxiliary populations.
fn gate_trace(
    encoding: &LogicalEncoding,
    schedule: &PulseSchedule,
    input: &[C64],
    tracked: &[(&str, Vec<LogicalLevel>)],
    options: &PropagationOptions,
) -> Result<EvolutionTrace, CliError> {
    let logical = encoding.computational_basis()?;
    let mut psi = StateVector::zeros(encoding.basis.clone());
    for (a, l) in input.iter().zip(&logical) {
        psi = psi.add(&l.scaled(*a));
    }
    let mut options = options.clone();
    for (name, levels) in tracked {
        options.observables.push((name.to_string(), encoding.state(levels)?));
    }
    Ok(propagate_schrodinger(schedule, &psi, &options)?)
}

fn single_qubit(config: &ScenarioConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let input = (config.input[0], config.input[1]);
    let schedule = single_qubit_schedule(config.theta, config.phi, &config.gate)?;
    let mut runs = Vec::new();
    for &n in &config.atoms {
        let report = single_qubit_gate(n, input, config.theta, config.phi, &config.gate, &config.options)?;
        let csv = if config.write_csv {
            let encoding = LogicalEncoding::new(build_basis(LevelScheme::gate(), &[n])?, report.chi.clone())?;
            let tracked = [
                ("pop_1", vec![LogicalLevel::One]),
                ("pop_r0", vec![LogicalLevel::R0]),
                ("pop_r1", vec![LogicalLevel::R1]),
            ];
            let trace = gate_trace(&encoding, &schedule, &config.input, &tracked, &config.options)?;
            maybe_csv(config, out, &format!("n{n}"), &trace_table(&trace))?
        } else {
            Value::Null
        };
        let mut entry = gate_json(&report, csv);
        entry["atoms"] = json!(n);
        runs.push(entry);
    }
    Ok(json!({ "theta_rad": config.theta, "phi_rad": config.phi, "runs": runs }))
}

fn cnot_gate(config: &ScenarioConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let (nc, nt) = (config.control_atoms, config.target_atoms);
    let input: [C64; 4] = config.input.clone().try_into().expect("validated length");
    let report = cnot(nc, nt, input, &config.gate, &config.options)?;
    let csv = if config.write_csv {
        let encoding = LogicalEncoding::new(build_basis(LevelScheme::gate(), &[nc, nt])?, report.chi.clone())?;
        use LogicalLevel::{One, Zero};
        let tracked = [
            ("pop_00", vec![Zero, Zero]),
            ("pop_01", vec![Zero, One]),
            ("pop_10", vec![One, Zero]),
            ("pop_11", vec![One, One]),
        ];
        let trace = gate_trace(&encoding, &cnot_schedule(&config.gate)?, &config.input, &tracked, &config.options)?;
        maybe_csv(config, out, "trace", &trace_table(&trace))?
    } else {
        Value::Null
    };
    let mut result = gate_json(&report, csv);
    result["control_atoms"] = json!(nc);
    result["target_atoms"] = json!(nt);
    Ok(result)
}

fn ramsey(config: &ScenarioConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let phis = config.sweep.as_ref().expect("ramsey has a default sweep").values();
    let mut runs = Vec::new();
    for &n in &config.atoms {
        let p1 = ramsey_scan(n, &phis, &config.gate, &endpoint_options(config))?;
        let reference: Vec<f64> = phis.iter().map(|&phi| ramsey_reference(phi)).collect();
        let mut table = Table::new(["phi_rad", "p1", "reference"]);
        for k in 0..phis.len() {
            table.push(vec![Cell::Num(phis[k]), Cell::Num(p1[k]), Cell::Num(reference[k])]);
        }
        let csv = maybe_csv(config, out, &format!("n{n}"), &table)?;
        let worst = p1.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        runs.push(json!({ "atoms": n, "phi_rad": phis, "p1": p1, "reference": reference, "max_deviation": worst, "csv": csv }));
    }
    Ok(json!({ "switch_detuning": config.switch_detuning, "runs": runs }))
}

fn phase_sweep(config: &ScenarioConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let ratios = config.sweep.as_ref().expect("phase sweep has a default sweep").values();
    let passage = match config.mechanism {
        Mechanism::Stirap => Passage::Stirap(config.stirap),
        Mechanism::Arp => Passage::Arp(config.arp),
    };
    let opts = endpoint_options(config);
    let mut runs = Vec::new();
    for &n in &config.atoms {
        let mut table = Table::new(["ratio", "phase_error"]);
        let mut errors = Vec::with_capacity(ratios.len());
        for &ratio in &ratios {
            let e = phase_error_sweep(n, ratio, &passage, &opts)?;
            table.push(vec![Cell::Num(ratio), Cell::Num(e)]);
            errors.push(e);
        }
        let csv = maybe_csv(config, out, &format!("n{n}"), &table)?;
        runs.push(json!({ "atoms": n, "ratio": ratios, "phase_error_rad": errors, "csv": csv }));
    }
    let mechanism = match config.mechanism {
        Mechanism::Stirap => "stirap",
        Mechanism::Arp => "arp",
    };
    Ok(json!({ "mechanism": mechanism, "runs": runs }))
}

fn loading_average(config: &ScenarioConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let mut per_n = Vec::new();
    let avg = poisson_average(
        |n| {
            let v = metric_value(config.metric, n, config).map_err(|e| match e {
                CliError::Simulation(s) => s,
                other => rydsim::SimError::InvalidArgument(other.to_string()),
            })?;
            per_n.push((n, v));
            Ok(v)
        },
        config.mean_atoms,
        config.n_max,
    )?;
    let mut table = Table::new(["atoms", "probability", config.metric.name()]);
    for &(n, v) in &per_n {
        table.push(vec![Cell::Int(n), Cell::Num(poisson_loading(config.mean_atoms, n)?), Cell::Num(v)]);
    }
    let csv = maybe_csv(config, out, "loading", &table)?;
    Ok(json!({
        "metric": config.metric.name(),
        "mean_atoms": avg.mean,
        "n_max": avg.n_max,
        "average": avg.value,
        "weight": avg.weight,
        "defect_probability": avg.defect_probability,
        "csv": csv,
    }))
}

fn blockade(config: &ScenarioConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let mut table = Table::new(["atoms", "interaction_mhz", "collective_rabi_mhz", "ratio"]);
    let mut rows = Vec::new();
    for &n in &config.atoms {
        let b = blockade_estimate(config.c6, config.separation, config.rabi_mhz, n)?;
        table.push(vec![Cell::Int(n), Cell::Num(b.interaction), Cell::Num(b.collective_rabi), Cell::Num(b.ratio)]);
        rows.push(json!({
            "atoms": n,
            "interaction_mhz": b.interaction,
            "collective_rabi_mhz": b.collective_rabi,
            "ratio": b.ratio,
        }));
    }
    let csv = maybe_csv(config, out, "blockade", &table)?;
    Ok(json!({
        "c6_mhz_um6": config.c6,
        "separation_um": config.separation,
        "rabi_mhz": config.rabi_mhz,
        "rows": rows,
        "csv": csv,
    }))
}

/// `ensemble.atoms` lists the atom count of each ensemble (one or two).
fn basis(config: &ScenarioConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let basis = build_basis(config.scheme.clone(), &config.atoms)?;
    let scheme = basis.scheme();
    let labels: Vec<String> = basis.configurations().iter().map(|c| c.display(scheme)).collect();
    let csv = if config.write_csv {
        // Labels are text, so this table bypasses the numeric `Table`.
        let name = csv_name(config, "configurations");
        let mut writer = csv::Writer::from_path(out.dir.join(&name))?;
        writer.write_record(["index", "configuration", "rydberg_count"])?;
        for (k, (c, label)) in basis.configurations().iter().zip(&labels).enumerate() {
            writer.write_record([k.to_string(), label.clone(), c.rydberg_count(scheme).to_string()])?;
        }
        writer.flush()?;
        out.files.push(name.clone());
        Value::String(name)
    } else {
        Value::Null
    };
    let total: usize = config.atoms.iter().sum();
    Ok(json!({
        "scheme": config.scheme_name,
        "levels": scheme.labels().collect::<Vec<_>>(),
        "atom_counts": config.atoms,
        "dimension": basis.dimension(),
        "formula_dimension": expected_dimension(scheme, total),
        "symmetric_dimension": SymmetricSector::new(&basis).dimension(),
        "configurations": labels,
        "csv": csv,
    }))
}
