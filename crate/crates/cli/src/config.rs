//! Scenario files: sectioned TOML with frequencies as ν = Ω/2π in MHz and
//! times in µs. Units are converted to rad/µs exactly once, here.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::Deserialize;

use rydsim::dynamics::{DecayRates, PropagationOptions};
use rydsim::protocols::GateParams;
use rydsim::{mhz, ArpParams, LevelScheme, StirapParams};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Protocol {
    DoubleStirap,
    DoubleArp,
    PiBaseline,
    SingleQubitGate,
    Ramsey,
    Cnot,
    PhaseSweep,
    PoissonAverage,
    BlockadeEstimate,
    Basis,
}

impl Protocol {
    pub const ALL: [Protocol; 10] = [
        Protocol::DoubleStirap,
        Protocol::DoubleArp,
        Protocol::PiBaseline,
        Protocol::SingleQubitGate,
        Protocol::Ramsey,
        Protocol::Cnot,
        Protocol::PhaseSweep,
        Protocol::PoissonAverage,
        Protocol::BlockadeEstimate,
        Protocol::Basis,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::DoubleStirap => "double-stirap",
            Protocol::DoubleArp => "double-arp",
            Protocol::PiBaseline => "pi-baseline",
            Protocol::SingleQubitGate => "single-qubit-gate",
            Protocol::Ramsey => "ramsey",
            Protocol::Cnot => "cnot",
            Protocol::PhaseSweep => "phase-sweep",
            Protocol::PoissonAverage => "poisson-average",
            Protocol::BlockadeEstimate => "blockade-estimate",
            Protocol::Basis => "basis",
        }
    }
}

impl FromStr for Protocol {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown protocol '{s}'")))
    }
}

// --- raw file layout ---------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    scenario: RawScenario,
    ensemble: RawEnsemble,
    pulses: RawPulses,
    integrator: RawIntegrator,
    output: RawOutput,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawScenario {
    protocol: Option<String>,
    name: Option<String>,
    switch_detuning: Option<bool>,
    invert_phase: Option<bool>,
    /// Second-pass amplitude over first-pass amplitude.
    ratio: Option<f64>,
    /// Radians.
    theta: Option<f64>,
    phi: Option<f64>,
    /// Logical input amplitudes as `[re, im]` pairs.
    input: Option<Vec<[f64; 2]>>,
    mechanism: Option<String>,
    sweep: Option<RawSweep>,
    columns: Option<Vec<String>>,
    n_opt: Option<usize>,
    pi_rabi_mhz: Option<f64>,
    metric: Option<String>,
    mean_atoms: Option<f64>,
    n_max: Option<usize>,
    c6_mhz_um6: Option<f64>,
    separation_um: Option<f64>,
    rabi_mhz: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    axis: String,
    start: f64,
    end: f64,
    points: usize,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawEnsemble {
    scheme: Option<String>,
    atoms: Option<Vec<usize>>,
    control_atoms: Option<usize>,
    target_atoms: Option<usize>,
    gamma_e_mhz: Option<f64>,
    gamma_r_mhz: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawPulses {
    stirap: RawStirap,
    stirap_far: RawStirap,
    arp: RawArp,
    gate: RawGate,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawStirap {
    preset: Option<String>,
    omega1_mhz: Option<f64>,
    omega2_mhz: Option<f64>,
    t1_us: Option<f64>,
    t2_us: Option<f64>,
    tau_us: Option<f64>,
    delta_mhz: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawArp {
    preset: Option<String>,
    omega0_mhz: Option<f64>,
    tau_us: Option<f64>,
    chirp_mhz_per_us: Option<f64>,
    separation_us: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawGate {
    omega_r_mhz: Option<f64>,
    omega3_mhz: Option<f64>,
    gap_us: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawIntegrator {
    step_divisor: Option<f64>,
    min_steps: Option<usize>,
    snapshots: Option<usize>,
    norm_tolerance: Option<f64>,
    use_symmetry: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawOutput {
    dir: Option<PathBuf>,
    prefix: Option<String>,
    csv: Option<bool>,
}

// --- validated configuration --------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub axis: String,
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            1 => vec![self.start],
            n => (0..n).map(|k| self.start + (self.end - self.start) * k as f64 / (n - 1) as f64).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mechanism {
    Stirap,
    Arp,
}

/// Per-N quantities the loading average and the baseline table know about.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    PiError,
    StirapError,
    ArpError,
    StirapDecayError,
    StirapFarDecayError,
    DoubleStirapError,
    DoubleArpError,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::PiError,
        Metric::StirapError,
        Metric::ArpError,
        Metric::StirapDecayError,
        Metric::StirapFarDecayError,
        Metric::DoubleStirapError,
        Metric::DoubleArpError,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::PiError => "pi_error",
            Metric::StirapError => "stirap_error",
            Metric::ArpError => "arp_error",
            Metric::StirapDecayError => "stirap_decay_error",
            Metric::StirapFarDecayError => "stirap_far_decay_error",
            Metric::DoubleStirapError => "double_stirap_error",
            Metric::DoubleArpError => "double_arp_error",
        }
    }
}

impl FromStr for Metric {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Metric::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let known: Vec<_> = Metric::ALL.iter().map(|m| m.name()).collect();
            CliError::Config(format!("unknown metric '{s}' (known: {})", known.join(", ")))
        })
    }
}

#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub protocol: Protocol,
    pub name: String,
    pub switch_detuning: bool,
    pub invert_phase: bool,
    pub ratio: f64,
    pub theta: f64,
    pub phi: f64,
    pub input: Vec<C64>,
    pub mechanism: Mechanism,
    pub sweep: Option<Sweep>,
    pub columns: Vec<Metric>,
    pub n_opt: usize,
    pub pi_rabi: f64,
    pub metric: Metric,
    pub mean_atoms: f64,
    pub n_max: usize,
    pub c6: f64,
    pub separation: f64,
    pub rabi_mhz: f64,

    pub scheme: LevelScheme,
    pub scheme_name: String,
    pub atoms: Vec<usize>,
    pub control_atoms: usize,
    pub target_atoms: usize,
    pub decay: DecayRates,

    pub stirap: StirapParams,
    pub stirap_far: StirapParams,
    pub arp: ArpParams,
    pub gate: GateParams,

    pub options: PropagationOptions,

    pub out_dir: PathBuf,
    pub prefix: String,
    pub write_csv: bool,
}

fn config_err<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}

fn positive(name: &str, x: f64) -> Result<f64, CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        config_err(format!("{name} must be positive, got {x}"))
    }
}

fn finite(name: &str, x: f64) -> Result<f64, CliError> {
    if x.is_finite() {
        Ok(x)
    } else {
        config_err(format!("{name} must be finite"))
    }
}

fn stirap_params(raw: &RawStirap, default_preset: &str, section: &str) -> Result<StirapParams, CliError> {
    let base = match raw.preset.as_deref().unwrap_or(default_preset) {
        "fig2-stirap" => StirapParams::fig2(),
        "far-detuned" => StirapParams::far_detuned(),
        other => return config_err(format!("[{section}] unknown preset '{other}' (fig2-stirap, far-detuned)")),
    };
    let p = StirapParams {
        omega1: raw.omega1_mhz.map(mhz).unwrap_or(base.omega1),
        omega2: raw.omega2_mhz.map(mhz).unwrap_or(base.omega2),
        t1: raw.t1_us.unwrap_or(base.t1),
        t2: raw.t2_us.unwrap_or(base.t2),
        tau: raw.tau_us.unwrap_or(base.tau),
        delta: raw.delta_mhz.map(mhz).unwrap_or(base.delta),
    };
    positive(&format!("{section}.tau_us"), p.tau)?;
    finite(&format!("{section}.delta_mhz"), p.delta)?;
    if !(p.omega1 >= 0.0 && p.omega2 >= 0.0) {
        return config_err(format!("[{section}] Rabi frequencies must be non-negative"));
    }
    if !(p.t2 > p.t1) {
        return config_err(format!("[{section}] t2_us must exceed t1_us (the Stokes pulse comes first)"));
    }
    Ok(p)
}

fn arp_params(raw: &RawArp) -> Result<ArpParams, CliError> {
    let base = match raw.preset.as_deref().unwrap_or("fig2-arp") {
        "fig2-arp" => ArpParams::fig2(),
        other => return config_err(format!("[pulses.arp] unknown preset '{other}' (fig2-arp)")),
    };
    let p = ArpParams {
        omega0: raw.omega0_mhz.map(mhz).unwrap_or(base.omega0),
        tau: raw.tau_us.unwrap_or(base.tau),
        chirp_rate: raw.chirp_mhz_per_us.map(mhz).unwrap_or(base.chirp_rate),
        separation: raw.separation_us.unwrap_or(base.separation),
    };
    positive("pulses.arp.tau_us", p.tau)?;
    positive("pulses.arp.omega0_mhz", p.omega0)?;
    finite("pulses.arp.chirp_mhz_per_us", p.chirp_rate)?;
    Ok(p)
}

fn scheme_named(name: &str) -> Result<LevelScheme, CliError> {
    match name {
        "stirap" => Ok(LevelScheme::stirap()),
        "arp" => Ok(LevelScheme::arp()),
        "gate" => Ok(LevelScheme::gate()),
        other => config_err(format!("unknown level scheme '{other}' (stirap, arp, gate)")),
    }
}

fn default_scheme(protocol: Protocol) -> &'static str {
    match protocol {
        Protocol::DoubleArp => "arp",
        Protocol::SingleQubitGate | Protocol::Ramsey | Protocol::Cnot => "gate",
        _ => "stirap",
    }
}

/// Parse a scenario for `protocol`. `overrides` are `section.key=value`
/// assignments applied before validation; values are TOML literals, and bare
/// words are taken as strings.
pub fn parse_config(text: &str, protocol: Protocol, overrides: &[String]) -> Result<ScenarioConfig, CliError> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    for assignment in overrides {
        apply_override(&mut table, assignment)?;
    }
    let raw: RawConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    validate(raw, protocol)
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (path, literal) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects key=value, got '{assignment}'")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return config_err(format!("malformed key '{path}'"));
    }
    let literal = literal.trim();
    let value = match format!("v = {literal}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(literal.to_string()),
    };
    let (last, parents) = keys.split_last().unwrap();
    let mut node = table;
    for key in parents {
        let entry = node.entry(key.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = match entry {
            toml::Value::Table(t) => t,
            _ => return config_err(format!("'{key}' in '{path}' is not a section")),
        };
    }
    node.insert(last.to_string(), value);
    Ok(())
}

fn validate(raw: RawConfig, protocol: Protocol) -> Result<ScenarioConfig, CliError> {
    let s = raw.scenario;
    if let Some(declared) = &s.protocol {
        let declared: Protocol = declared.parse()?;
        if declared != protocol {
            return config_err(format!(
                "config declares protocol '{}' but the '{}' subcommand was run",
                declared.name(),
                protocol.name()
            ));
        }
    }

    let scheme_name = raw.ensemble.scheme.clone().unwrap_or_else(|| default_scheme(protocol).to_string());
    let scheme = scheme_named(&scheme_name)?;
    let atoms = raw.ensemble.atoms.clone().unwrap_or_else(|| vec![1]);
    if atoms.is_empty() || atoms.contains(&0) {
        return config_err("ensemble.atoms must be a non-empty list of positive atom numbers");
    }
    let control_atoms = raw.ensemble.control_atoms.unwrap_or(1);
    let target_atoms = raw.ensemble.target_atoms.unwrap_or(1);
    if control_atoms == 0 || target_atoms == 0 {
        return config_err("control_atoms and target_atoms must be at least 1");
    }
    let gamma_e = mhz(raw.ensemble.gamma_e_mhz.unwrap_or(5.0));
    let gamma_r = mhz(raw.ensemble.gamma_r_mhz.unwrap_or(0.8e-3));
    let decay = DecayRates::new(gamma_e, gamma_r).map_err(|e| CliError::Config(e.to_string()))?;

    let stirap = stirap_params(&raw.pulses.stirap, "fig2-stirap", "pulses.stirap")?;
    let stirap_far = stirap_params(&raw.pulses.stirap_far, "far-detuned", "pulses.stirap_far")?;
    let arp = arp_params(&raw.pulses.arp)?;
    let g = &raw.pulses.gate;
    let defaults = GateParams::default();
    let gate = GateParams {
        stirap,
        omega_r: positive("pulses.gate.omega_r_mhz", g.omega_r_mhz.map(mhz).unwrap_or(defaults.omega_r))?,
        omega3: positive("pulses.gate.omega3_mhz", g.omega3_mhz.map(mhz).unwrap_or(defaults.omega3))?,
        gap: g.gap_us.unwrap_or(defaults.gap),
        switch_detuning: s.switch_detuning.unwrap_or(true),
    };
    if !(gate.gap >= 0.0) {
        return config_err("pulses.gate.gap_us must be non-negative");
    }

    let i = raw.integrator;
    let base = PropagationOptions::default();
    let options = PropagationOptions {
        step_divisor: positive("integrator.step_divisor", i.step_divisor.unwrap_or(base.step_divisor))?,
        min_steps: i.min_steps.unwrap_or(base.min_steps),
        snapshots: i.snapshots.unwrap_or(base.snapshots),
        norm_tolerance: positive("integrator.norm_tolerance", i.norm_tolerance.unwrap_or(base.norm_tolerance))?,
        use_symmetry: i.use_symmetry.unwrap_or(base.use_symmetry),
        ..base
    };

    let input: Vec<C64> = match (&s.input, protocol) {
        (Some(pairs), _) => pairs.iter().map(|p| C64::new(p[0], p[1])).collect(),
        (None, Protocol::Cnot) => vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
        (None, _) => vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
    };
    let expected_inputs = match protocol {
        Protocol::Cnot => Some(4),
        Protocol::SingleQubitGate => Some(2),
        _ => None,
    };
    if let Some(n) = expected_inputs {
        if input.len() != n {
            return config_err(format!("scenario.input needs {n} [re, im] pairs, got {}", input.len()));
        }
        let norm: f64 = input.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-9 {
            return config_err(format!("scenario.input must be normalized (Σ|a|² = {norm})"));
        }
    }

    let mechanism = match s.mechanism.as_deref().unwrap_or("stirap") {
        "stirap" => Mechanism::Stirap,
        "arp" => Mechanism::Arp,
        other => return config_err(format!("unknown mechanism '{other}' (stirap, arp)")),
    };

    let sweep = match s.sweep {
        Some(w) => {
            if w.points == 0 {
                return config_err("scenario.sweep.points must be at least 1");
            }
            finite("scenario.sweep.start", w.start)?;
            finite("scenario.sweep.end", w.end)?;
            Some(Sweep { axis: w.axis, start: w.start, end: w.end, points: w.points })
        }
        None => match protocol {
            Protocol::PhaseSweep => Some(Sweep { axis: "ratio".into(), start: 0.9, end: 1.1, points: 21 }),
            Protocol::Ramsey => Some(Sweep { axis: "phi".into(), start: 0.0, end: PI, points: 9 }),
            _ => None,
        },
    };
    let wanted_axis = match protocol {
        Protocol::PhaseSweep => Some("ratio"),
        Protocol::Ramsey => Some("phi"),
        _ => None,
    };
    if let (Some(axis), Some(w)) = (wanted_axis, &sweep) {
        if w.axis != axis {
            return config_err(format!("{} sweeps over '{axis}', not '{}'", protocol.name(), w.axis));
        }
    }
    if protocol == Protocol::PhaseSweep {
        if let Some(w) = &sweep {
            if !(w.start > 0.0 && w.end > 0.0) {
                return config_err("amplitude ratios must be positive");
            }
        }
    }

    let columns = match &s.columns {
        Some(names) => names.iter().map(|n| n.parse()).collect::<Result<Vec<Metric>, _>>()?,
        None => vec![Metric::PiError, Metric::StirapError, Metric::ArpError],
    };
    if columns.is_empty() {
        return config_err("scenario.columns must name at least one metric");
    }
    let metric: Metric = s.metric.as_deref().unwrap_or("pi_error").parse()?;

    let name = s.name.clone().unwrap_or_else(|| protocol.name().to_string());
    let prefix = raw.output.prefix.clone().unwrap_or_else(|| name.clone());
    if prefix.is_empty() || prefix.contains(['/', '\\']) {
        return config_err("output.prefix must be a plain file-name stem");
    }

    Ok(ScenarioConfig {
        protocol,
        name,
        switch_detuning: gate.switch_detuning,
        invert_phase: s.invert_phase.unwrap_or(true),
        ratio: positive("scenario.ratio", s.ratio.unwrap_or(1.0))?,
        theta: finite("scenario.theta", s.theta.unwrap_or(PI))?,
        phi: finite("scenario.phi", s.phi.unwrap_or(0.0))?,
        input,
        mechanism,
        sweep,
        columns,
        n_opt: s.n_opt.unwrap_or(5),
        pi_rabi: positive("scenario.pi_rabi_mhz", mhz(s.pi_rabi_mhz.unwrap_or(2.0)))?,
        metric,
        mean_atoms: positive("scenario.mean_atoms", s.mean_atoms.unwrap_or(5.0))?,
        n_max: s.n_max.unwrap_or(15),
        c6: positive("scenario.c6_mhz_um6", s.c6_mhz_um6.unwrap_or(3.2e6))?,
        separation: positive("scenario.separation_um", s.separation_um.unwrap_or(5.0))?,
        rabi_mhz: positive("scenario.rabi_mhz", s.rabi_mhz.unwrap_or(1.0))?,
        scheme,
        scheme_name,
        atoms,
        control_atoms,
        target_atoms,
        decay,
        stirap,
        stirap_far,
        arp,
        gate,
        options,
        out_dir: raw.output.dir.unwrap_or_else(|| PathBuf::from("out")),
        prefix,
        write_csv: raw.output.csv.unwrap_or(true),
    })
}
