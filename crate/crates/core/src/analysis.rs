//! Derived quantities: unwrapped ground-state phase, Poissonian atom-number
//! statistics and blockade feasibility.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::dynamics::EvolutionTrace;
use crate::error::{invalid, Result, SimError};

/// Ground amplitudes smaller than this have no meaningful phase.
pub const PHASE_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub times: Vec<f64>,
    /// Unwrapped, zero at the first sample.
    pub phase: Vec<f64>,
    /// Phase of a single forward STIRAP, when the record was built for one.
    pub chi: Option<f64>,
}

impl PhaseRecord {
    pub fn final_phase(&self) -> f64 {
        *self.phase.last().unwrap()
    }
}

/// Wrap an angle into `(-π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

/// Distance between two angles on the circle, in `[0, π]`.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// Continuous phase of the all-ground amplitude relative to its first sample.
pub fn unwrap_phase(trace: &EvolutionTrace) -> Result<PhaseRecord> {
    let amps = trace
        .ground_amplitude
        .as_ref()
        .ok_or_else(|| SimError::InvalidArgument("trace carries no ground amplitudes (mixed-state run)".into()))?;
    if amps.is_empty() {
        return invalid("trace has no samples");
    }
    let mut phase = Vec::with_capacity(amps.len());
    let mut previous = 0.0;
    for (k, (a, &t)) in amps.iter().zip(&trace.times).enumerate() {
        let magnitude = a.norm();
        if magnitude < PHASE_THRESHOLD {
            return Err(SimError::UndefinedPhase { t, magnitude });
        }
        let raw = a.arg();
        let value = if k == 0 { raw } else { previous + wrap_angle(raw - previous) };
        phase.push(value);
        previous = value;
    }
    let origin = phase[0];
    phase.iter_mut().for_each(|p| *p -= origin);
    Ok(PhaseRecord { times: trace.times.clone(), phase, chi: None })
}

/// As [`unwrap_phase`] but samples whose amplitude is below
/// [`PHASE_THRESHOLD`] become NaN instead of an error; unwrapping resumes from
/// the last defined sample. `None` for mixed-state traces.
pub fn unwrap_phase_with_gaps(trace: &EvolutionTrace) -> Option<Vec<f64>> {
    let amps = trace.ground_amplitude.as_ref()?;
    let mut origin = None;
    let mut previous: Option<f64> = None;
    let phase = amps
        .iter()
        .map(|a| {
            if a.norm() < PHASE_THRESHOLD {
                return f64::NAN;
            }
            let raw = a.arg();
            let value = match previous {
                Some(p) => p + wrap_angle(raw - p),
                None => raw,
            };
            previous = Some(value);
            value - *origin.get_or_insert(value)
        })
        .collect();
    Some(phase)
}

/// Final ground phase relative to the initial one, wrapped into `(-π, π]`.
/// Unlike [`unwrap_phase`] this only needs the two end samples.
pub fn final_ground_phase(trace: &EvolutionTrace) -> Result<f64> {
    let amps = trace
        .ground_amplitude
        .as_ref()
        .ok_or_else(|| SimError::InvalidArgument("trace carries no ground amplitudes (mixed-state run)".into()))?;
    let (first, last) = match (amps.first(), amps.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return invalid("trace has no samples"),
    };
    for (a, t) in [(first, trace.times[0]), (last, *trace.times.last().unwrap())] {
        if a.norm() < PHASE_THRESHOLD {
            return Err(SimError::UndefinedPhase { t, magnitude: a.norm() });
        }
    }
    Ok(wrap_angle(last.arg() - first.arg()))
}

/// `e^{-N̄} N̄^N / N!`
pub fn poisson_loading(mean: f64, n: usize) -> Result<f64> {
    if !(mean > 0.0 && mean.is_finite()) {
        return invalid(format!("mean atom number must be positive, got {mean}"));
    }
    let log_factorial: f64 = (2..=n).map(|k| (k as f64).ln()).sum();
    Ok((-mean + n as f64 * mean.ln() - log_factorial).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonAverage {
    /// `Σ P(N) m(N) / Σ P(N)` over `N = 1..=N_max`.
    pub value: f64,
    /// `Σ P(N)` over the same range.
    pub weight: f64,
    /// `P(0)`: empty sites are register defects, not gate errors.
    pub defect_probability: f64,
    pub mean: f64,
    pub n_max: usize,
}

/// Average a per-atom-number metric over Poissonian loading, excluding empty sites.
pub fn poisson_average<F>(mut metric: F, mean: f64, n_max: usize) -> Result<PoissonAverage>
where
    F: FnMut(usize) -> Result<f64>,
{
    if n_max == 0 {
        return invalid("N_max must be at least 1");
    }
    let mut weighted = 0.0;
    let mut weight = 0.0;
    for n in 1..=n_max {
        let p = poisson_loading(mean, n)?;
        weighted += p * metric(n)?;
        weight += p;
    }
    Ok(PoissonAverage {
        value: weighted / weight,
        weight,
        defect_probability: poisson_loading(mean, 0)?,
        mean,
        n_max,
    })
}

/// One metric sampled along one parameter axis.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: String,
    pub values: Vec<f64>,
    pub metric: String,
    pub metrics: Vec<f64>,
    pub metadata: BTreeMap<String, String>,
}

impl SweepResult {
    pub fn new(axis: impl Into<String>, metric: impl Into<String>) -> Self {
        Self { axis: axis.into(), metric: metric.into(), ..Self::default() }
    }

    pub fn push(&mut self, value: f64, metric: f64) {
        self.values.push(value);
        self.metrics.push(metric);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockadeEstimate {
    /// MHz·µm⁶
    pub c6: f64,
    /// µm
    pub separation: f64,
    /// `C6 / R⁶` in MHz.
    pub interaction: f64,
    /// `√N · Ω/2π` in MHz.
    pub collective_rabi: f64,
    /// `interaction / collective_rabi`; well above 1 means the perfect-blockade
    /// model is self-consistent.
    pub ratio: f64,
}

pub fn blockade_estimate(c6: f64, separation: f64, rabi_mhz: f64, atoms: usize) -> Result<BlockadeEstimate> {
    if !(separation > 0.0) {
        return invalid(format!("separation must be positive, got {separation} µm"));
    }
    if atoms == 0 {
        return invalid("atom number must be at least 1");
    }
    let interaction = c6 / separation.powi(6);
    let collective_rabi = (atoms as f64).sqrt() * rabi_mhz;
    Ok(BlockadeEstimate { c6, separation, interaction, collective_rabi, ratio: interaction / collective_rabi })
}
