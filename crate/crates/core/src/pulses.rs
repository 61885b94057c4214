//! Time-dependent drive schedules.
//!
//! Times are in µs and frequencies are angular (rad/µs) everywhere in this
//! module; use [`mhz`] to convert a cyclic frequency ν = Ω/2π given in MHz.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SimError};
use crate::statespace::Target;

/// Gaussian envelopes are zero beyond this many widths from their center.
pub const GAUSSIAN_CUTOFF: f64 = 5.0;

const TIME_EPS: f64 = 1e-9;

/// Angular frequency (rad/µs) from a cyclic frequency in MHz.
pub fn mhz(nu: f64) -> f64 {
    TAU * nu
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Envelope {
    /// `peak · exp(-(t - center)² / 2 width²)` on `center ± 5 width`.
    Gaussian { peak: f64, center: f64, width: f64 },
    /// Constant `amplitude` on `[start, end)`.
    Rectangular { amplitude: f64, start: f64, end: f64 },
}

impl Envelope {
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Envelope::Gaussian { center, width, .. } => {
                (center - GAUSSIAN_CUTOFF * width, center + GAUSSIAN_CUTOFF * width)
            }
            Envelope::Rectangular { start, end, .. } => (start, end),
        }
    }

    /// Untruncated shape; callers decide whether `t` is inside the support.
    pub(crate) fn shape(&self, t: f64) -> f64 {
        match *self {
            Envelope::Gaussian { peak, center, width } => {
                let x = (t - center) / width;
                peak * (-0.5 * x * x).exp()
            }
            Envelope::Rectangular { amplitude, .. } => amplitude,
        }
    }

    /// Largest value on `[a, b]` (ignoring support truncation).
    pub(crate) fn max_on(&self, a: f64, b: f64) -> f64 {
        match *self {
            Envelope::Gaussian { center, .. } => {
                if center >= a && center <= b {
                    self.peak()
                } else {
                    self.shape(if center < a { a } else { b })
                }
            }
            Envelope::Rectangular { amplitude, .. } => amplitude,
        }
    }

    pub fn peak(&self) -> f64 {
        match *self {
            Envelope::Gaussian { peak, .. } => peak,
            Envelope::Rectangular { amplitude, .. } => amplitude,
        }
    }

    fn shifted(&self, dt: f64) -> Envelope {
        match *self {
            Envelope::Gaussian { peak, center, width } => Envelope::Gaussian { peak, center: center + dt, width },
            Envelope::Rectangular { amplitude, start, end } => {
                Envelope::Rectangular { amplitude, start: start + dt, end: end + dt }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveTerm {
    pub envelope: Envelope,
    /// Radians; the complex Rabi amplitude is `envelope(t)·e^{i·carrier_phase}`.
    pub carrier_phase: f64,
    /// `(a, b)` with `⟨…a…|H|…b…⟩ = Ω/2`.
    pub transition: (String, String),
    pub target: Target,
}

impl DriveTerm {
    pub fn new(envelope: Envelope, transition: (&str, &str), target: Target) -> Self {
        Self { envelope, carrier_phase: 0.0, transition: (transition.0.into(), transition.1.into()), target }
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.carrier_phase = phase;
        self
    }

    pub fn amplitude_at(&self, t: f64) -> C64 {
        let (lo, hi) = self.envelope.support();
        if t < lo || t > hi || (matches!(self.envelope, Envelope::Rectangular { .. }) && t >= hi) {
            return C64::new(0.0, 0.0);
        }
        C64::from_polar(self.envelope.shape(t), self.carrier_phase)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetuningProfile {
    Constant { delta: f64 },
    /// `+delta` before `switch_time`, `-delta` from it onwards.
    SignSwitch { delta: f64, switch_time: f64 },
    /// `rate · (t - origin)`.
    LinearChirp { rate: f64, origin: f64 },
}

impl DetuningProfile {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            DetuningProfile::Constant { delta } => delta,
            DetuningProfile::SignSwitch { delta, switch_time } => {
                if t < switch_time {
                    delta
                } else {
                    -delta
                }
            }
            DetuningProfile::LinearChirp { rate, origin } => rate * (t - origin),
        }
    }

    /// `∫_a^b δ(s) ds`
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match *self {
            DetuningProfile::Constant { delta } => delta * (b - a),
            DetuningProfile::SignSwitch { delta, switch_time } => {
                let before = (b.min(switch_time) - a).max(0.0);
                let after = (b - a.max(switch_time)).max(0.0);
                delta * (before - after)
            }
            DetuningProfile::LinearChirp { rate, origin } => {
                0.5 * rate * ((b - origin).powi(2) - (a - origin).powi(2))
            }
        }
    }

    pub(crate) fn max_abs(&self, a: f64, b: f64) -> f64 {
        match *self {
            DetuningProfile::Constant { delta } | DetuningProfile::SignSwitch { delta, .. } => delta.abs(),
            DetuningProfile::LinearChirp { .. } => self.value(a).abs().max(self.value(b).abs()),
        }
    }

    fn shifted(&self, dt: f64) -> DetuningProfile {
        match *self {
            DetuningProfile::Constant { delta } => DetuningProfile::Constant { delta },
            DetuningProfile::SignSwitch { delta, switch_time } => {
                DetuningProfile::SignSwitch { delta, switch_time: switch_time + dt }
            }
            DetuningProfile::LinearChirp { rate, origin } => DetuningProfile::LinearChirp { rate, origin: origin + dt },
        }
    }
}

/// Energy offset `-δ(t)` per atom in `level`, active on `[window.0, window.1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detuning {
    pub level: String,
    pub profile: DetuningProfile,
    pub target: Target,
    pub window: (f64, f64),
}

impl Detuning {
    fn active(&self, t: f64) -> bool {
        t >= self.window.0 && t < self.window.1
    }

    /// `∫ δ` from the window start up to `t` (clamped to the window).
    pub fn accumulated(&self, t: f64) -> f64 {
        if t <= self.window.0 {
            return 0.0;
        }
        self.profile.integral(self.window.0, t.min(self.window.1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub terms: Vec<DriveTerm>,
    pub detunings: Vec<Detuning>,
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriveSample {
    pub transition: (String, String),
    pub target: Target,
    pub amplitude: C64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetuningSample {
    pub level: String,
    pub target: Target,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ScheduleSample {
    pub drives: Vec<DriveSample>,
    pub detunings: Vec<DetuningSample>,
}

impl ScheduleSample {
    pub fn drive(&self, a: &str, b: &str) -> C64 {
        self.drives
            .iter()
            .filter(|d| d.transition.0 == a && d.transition.1 == b)
            .map(|d| d.amplitude)
            .sum()
    }

    pub fn detuning(&self, level: &str) -> f64 {
        self.detunings.iter().filter(|d| d.level == level).map(|d| d.value).sum()
    }
}

impl PulseSchedule {
    pub fn new(terms: Vec<DriveTerm>, detunings: Vec<Detuning>, t_start: f64, t_end: f64) -> Result<Self> {
        let s = Self { terms, detunings, t_start, t_end };
        s.validate()?;
        Ok(s)
    }

    pub fn empty(t_start: f64, t_end: f64) -> Result<Self> {
        Self::new(Vec::new(), Vec::new(), t_start, t_end)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_start.is_finite() && self.t_end.is_finite()) || self.t_start > self.t_end {
            return invalid(format!("schedule window [{}, {}] is not ordered", self.t_start, self.t_end));
        }
        for term in &self.terms {
            if term.transition.0 == term.transition.1 {
                return invalid(format!("transition {}↔{} must join distinct levels", term.transition.0, term.transition.1));
            }
            match term.envelope {
                Envelope::Gaussian { peak, width, .. } => {
                    if !(width > 0.0) {
                        return invalid("Gaussian width must be positive");
                    }
                    if !(peak >= 0.0) {
                        return invalid("Gaussian peak Rabi frequency must be non-negative");
                    }
                }
                Envelope::Rectangular { start, end, .. } => {
                    if !(end >= start) {
                        return invalid("rectangular pulse must end after it starts");
                    }
                }
            }
            let (lo, hi) = term.envelope.support();
            if lo < self.t_start - TIME_EPS || hi > self.t_end + TIME_EPS {
                return invalid(format!(
                    "pulse support [{lo}, {hi}] leaves the schedule window [{}, {}]",
                    self.t_start, self.t_end
                ));
            }
        }
        for d in &self.detunings {
            if d.window.0 > d.window.1 {
                return invalid("detuning window is not ordered");
            }
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Drive amplitudes summed per (transition, target) plus active detunings.
    pub fn evaluate(&self, t: f64) -> Result<ScheduleSample> {
        if t < self.t_start - TIME_EPS || t > self.t_end + TIME_EPS {
            return Err(SimError::OutOfRange { t, start: self.t_start, end: self.t_end });
        }
        let mut sample = ScheduleSample::default();
        for term in &self.terms {
            let amplitude = term.amplitude_at(t);
            match sample
                .drives
                .iter_mut()
                .find(|d| d.transition == term.transition && d.target == term.target)
            {
                Some(d) => d.amplitude += amplitude,
                None => sample.drives.push(DriveSample {
                    transition: term.transition.clone(),
                    target: term.target,
                    amplitude,
                }),
            }
        }
        let at_end = (t - self.t_end).abs() <= TIME_EPS;
        for d in &self.detunings {
            let active = d.active(t) || (at_end && (d.window.1 - self.t_end).abs() <= TIME_EPS);
            if active {
                sample.detunings.push(DetuningSample {
                    level: d.level.clone(),
                    target: d.target,
                    value: d.profile.value(t),
                });
            }
        }
        Ok(sample)
    }

    /// Times where some drive or detuning switches on, off or changes sign.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut points = vec![self.t_start, self.t_end];
        for term in &self.terms {
            let (lo, hi) = term.envelope.support();
            points.push(lo);
            points.push(hi);
        }
        for d in &self.detunings {
            points.push(d.window.0);
            points.push(d.window.1);
            if let DetuningProfile::SignSwitch { switch_time, .. } = d.profile {
                points.push(switch_time);
            }
        }
        let mut points: Vec<f64> = points
            .into_iter()
            .filter(|p| p.is_finite())
            .map(|p| p.clamp(self.t_start, self.t_end))
            .collect();
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        points.dedup_by(|a, b| (*a - *b).abs() <= TIME_EPS);
        points
    }

    /// Largest |δ| any detuning reaches inside the window.
    pub fn max_detuning(&self) -> f64 {
        self.detunings
            .iter()
            .map(|d| {
                let a = d.window.0.max(self.t_start);
                let b = d.window.1.min(self.t_end);
                if b < a {
                    0.0
                } else {
                    d.profile.max_abs(a, b)
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn shifted(&self, dt: f64) -> PulseSchedule {
        PulseSchedule {
            terms: self
                .terms
                .iter()
                .map(|t| DriveTerm { envelope: t.envelope.shifted(dt), ..t.clone() })
                .collect(),
            detunings: self
                .detunings
                .iter()
                .map(|d| Detuning {
                    profile: d.profile.shifted(dt),
                    window: (d.window.0 + dt, d.window.1 + dt),
                    ..d.clone()
                })
                .collect(),
            t_start: self.t_start + dt,
            t_end: self.t_end + dt,
        }
    }

    /// Union of two schedules; the window spans both.
    pub fn merged(mut self, other: PulseSchedule) -> PulseSchedule {
        self.t_start = self.t_start.min(other.t_start);
        self.t_end = self.t_end.max(other.t_end);
        self.terms.extend(other.terms);
        self.detunings.extend(other.detunings);
        self
    }

    /// Append `fragment` so that it starts `gap` after the current end.
    pub fn then(self, fragment: PulseSchedule, gap: f64) -> PulseSchedule {
        let offset = self.t_end + gap - fragment.t_start;
        let end = self.t_end + gap + fragment.duration();
        let mut merged = self.merged(fragment.shifted(offset));
        merged.t_end = end;
        merged
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StirapParams {
    /// Pump 0↔e peak Rabi frequency.
    pub omega1: f64,
    /// Stokes e↔r peak Rabi frequency.
    pub omega2: f64,
    /// Pump center offset.
    pub t1: f64,
    /// Stokes center offset.
    pub t2: f64,
    pub tau: f64,
    /// Intermediate-state detuning.
    pub delta: f64,
}

impl StirapParams {
    /// Ω1/2π = 30 MHz, Ω2/2π = 40 MHz, t1 = 3.5 µs, t2 = 5.5 µs, τ = 1 µs, δ/2π = 200 MHz.
    pub fn fig2() -> Self {
        Self { omega1: mhz(30.0), omega2: mhz(40.0), t1: 3.5, t2: 5.5, tau: 1.0, delta: mhz(200.0) }
    }

    /// Far-detuned variant: δ/2π = 2 GHz, Ω/2π = 250 MHz, τ = 0.2 µs; the
    /// pulse offsets keep the same ratio to τ as [`StirapParams::fig2`].
    pub fn far_detuned() -> Self {
        Self { omega1: mhz(250.0), omega2: mhz(250.0), t1: 0.7, t2: 1.1, tau: 0.2, delta: mhz(2000.0) }
    }

    fn check(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return invalid("STIRAP width τ must be positive");
        }
        if !(self.t2 > self.t1) {
            return invalid("the Stokes pulse must precede the pump (t2 > t1)");
        }
        if self.omega1 < 0.0 || self.omega2 < 0.0 {
            return invalid("Rabi frequencies must be non-negative");
        }
        Ok(())
    }

    /// Length of one single-STIRAP fragment window.
    pub fn fragment_duration(&self) -> f64 {
        self.t2 - self.t1 + 2.0 * GAUSSIAN_CUTOFF * self.tau
    }
}

/// Level labels a STIRAP fragment connects: `ground ↔ intermediate ↔ rydberg`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StirapLevels {
    pub ground: String,
    pub intermediate: String,
    pub rydberg: String,
}

impl StirapLevels {
    pub fn new(ground: &str, intermediate: &str, rydberg: &str) -> Self {
        Self { ground: ground.into(), intermediate: intermediate.into(), rydberg: rydberg.into() }
    }
}

impl Default for StirapLevels {
    fn default() -> Self {
        Self::new("0", "e", "r")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Ground → Rydberg: Stokes at `origin - t2`, pump at `origin - t1`.
    Forward,
    /// Rydberg → ground: pump at `origin + t1`, Stokes at `origin + t2`.
    Reverse,
}

/// One STIRAP pass with its own constant intermediate detuning `sign·δ`.
pub fn stirap_fragment(
    params: &StirapParams,
    levels: &StirapLevels,
    direction: Direction,
    time_origin: f64,
    detuning_sign: f64,
    target: Target,
) -> Result<PulseSchedule> {
    params.check()?;
    let (pump_center, stokes_center, start, end) = match direction {
        Direction::Forward => (
            time_origin - params.t1,
            time_origin - params.t2,
            time_origin - params.t2 - GAUSSIAN_CUTOFF * params.tau,
            time_origin - params.t1 + GAUSSIAN_CUTOFF * params.tau,
        ),
        Direction::Reverse => (
            time_origin + params.t1,
            time_origin + params.t2,
            time_origin + params.t1 - GAUSSIAN_CUTOFF * params.tau,
            time_origin + params.t2 + GAUSSIAN_CUTOFF * params.tau,
        ),
    };
    let pump = DriveTerm::new(
        Envelope::Gaussian { peak: params.omega1, center: pump_center, width: params.tau },
        (&levels.ground, &levels.intermediate),
        target,
    );
    let stokes = DriveTerm::new(
        Envelope::Gaussian { peak: params.omega2, center: stokes_center, width: params.tau },
        (&levels.intermediate, &levels.rydberg),
        target,
    );
    let detuning = Detuning {
        level: levels.intermediate.clone(),
        profile: DetuningProfile::Constant { delta: detuning_sign * params.delta },
        target,
        window: (start, end),
    };
    PulseSchedule::new(vec![stokes, pump], vec![detuning], start, end)
}

/// Forward STIRAP on the `{0,e}|{r}` ladder with detuning `+δ`.
pub fn single_stirap(params: &StirapParams, time_origin: f64) -> Result<PulseSchedule> {
    stirap_fragment(params, &StirapLevels::default(), Direction::Forward, time_origin, 1.0, Target::All)
}

/// Forward fragment on `t < 0` and its mirror image on `t > 0`.
pub fn double_stirap(params: &StirapParams, switch_detuning: bool) -> Result<PulseSchedule> {
    double_stirap_with_ratio(params, switch_detuning, 1.0)
}

/// As [`double_stirap`] with the second pump amplitude scaled by `ratio`
/// (Ω1 of the second pass over Ω1 of the first).
pub fn double_stirap_with_ratio(params: &StirapParams, switch_detuning: bool, ratio: f64) -> Result<PulseSchedule> {
    if !(ratio > 0.0) {
        return invalid("amplitude ratio must be positive");
    }
    let levels = StirapLevels::default();
    let forward = stirap_fragment(params, &levels, Direction::Forward, 0.0, 1.0, Target::All)?;
    let second = StirapParams { omega1: params.omega1 * ratio, ..*params };
    let reverse = stirap_fragment(&second, &levels, Direction::Reverse, 0.0, 1.0, Target::All)?;
    let mut schedule = forward.merged(reverse);
    let profile = if switch_detuning {
        DetuningProfile::SignSwitch { delta: params.delta, switch_time: 0.0 }
    } else {
        DetuningProfile::Constant { delta: params.delta }
    };
    schedule.detunings = vec![Detuning {
        level: levels.intermediate,
        profile,
        target: Target::All,
        window: (schedule.t_start, schedule.t_end),
    }];
    schedule.validate()?;
    Ok(schedule)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArpParams {
    pub omega0: f64,
    pub tau: f64,
    /// Linear chirp rate dδ/dt (rad/µs²).
    pub chirp_rate: f64,
    /// Center-to-center spacing of the two pulses of a double sequence.
    pub separation: f64,
}

impl ArpParams {
    /// Ω0/2π = 2 MHz, τ = 1 µs, α/2π = 1 MHz/µs, 8 µs spacing.
    pub fn fig2() -> Self {
        Self { omega0: mhz(2.0), tau: 1.0, chirp_rate: mhz(1.0), separation: 8.0 }
    }

    fn check(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return invalid("ARP width τ must be positive");
        }
        if self.omega0 < 0.0 {
            return invalid("Rabi frequency must be non-negative");
        }
        Ok(())
    }
}

/// One chirped Gaussian on `0↔r` centered at `center`; the chirp crosses
/// resonance at the pulse center.
pub fn single_arp(params: &ArpParams, center: f64) -> Result<PulseSchedule> {
    params.check()?;
    let half = GAUSSIAN_CUTOFF * params.tau;
    let term = DriveTerm::new(
        Envelope::Gaussian { peak: params.omega0, center, width: params.tau },
        ("0", "r"),
        Target::All,
    );
    let detuning = Detuning {
        level: "r".into(),
        profile: DetuningProfile::LinearChirp { rate: params.chirp_rate, origin: center },
        target: Target::All,
        window: (center - half, center + half),
    };
    PulseSchedule::new(vec![term], vec![detuning], center - half, center + half)
}

pub fn double_arp(params: &ArpParams, invert_phase: bool) -> Result<PulseSchedule> {
    double_arp_with_ratio(params, invert_phase, 1.0)
}

/// Two chirped pulses at `∓separation/2`; each chirp owns the half of the
/// window nearest its pulse. With `invert_phase` the second carrier is
/// shifted by π.
pub fn double_arp_with_ratio(params: &ArpParams, invert_phase: bool, ratio: f64) -> Result<PulseSchedule> {
    params.check()?;
    if params.separation < 6.0 * params.tau {
        return invalid(format!(
            "ARP separation {} µs is below 6τ = {} µs; the pulses would overlap",
            params.separation,
            6.0 * params.tau
        ));
    }
    if !(ratio > 0.0) {
        return invalid("amplitude ratio must be positive");
    }
    let half = GAUSSIAN_CUTOFF * params.tau;
    let c1 = -params.separation / 2.0;
    let c2 = params.separation / 2.0;
    let (start, end) = (c1 - half, c2 + half);
    let first = DriveTerm::new(
        Envelope::Gaussian { peak: params.omega0, center: c1, width: params.tau },
        ("0", "r"),
        Target::All,
    );
    let second = DriveTerm::new(
        Envelope::Gaussian { peak: params.omega0 * ratio, center: c2, width: params.tau },
        ("0", "r"),
        Target::All,
    )
    .with_phase(if invert_phase { PI } else { 0.0 });
    let mid = 0.5 * (c1 + c2);
    let detunings = vec![
        Detuning {
            level: "r".into(),
            profile: DetuningProfile::LinearChirp { rate: params.chirp_rate, origin: c1 },
            target: Target::All,
            window: (start, mid),
        },
        Detuning {
            level: "r".into(),
            profile: DetuningProfile::LinearChirp { rate: params.chirp_rate, origin: c2 },
            target: Target::All,
            window: (mid, end),
        },
    ];
    PulseSchedule::new(vec![first, second], detunings, start, end)
}

/// Resonant rectangular pulse of the given area starting at `start`.
pub fn resonant_pulse(
    transition: (&str, &str),
    area: f64,
    rabi: f64,
    phase: f64,
    start: f64,
    target: Target,
) -> Result<PulseSchedule> {
    if !(rabi > 0.0) {
        return invalid("Rabi frequency of a resonant pulse must be positive");
    }
    if !(area >= 0.0) {
        return invalid("pulse area must be non-negative");
    }
    let end = start + area / rabi;
    if area == 0.0 {
        return PulseSchedule::empty(start, end);
    }
    let term = DriveTerm::new(Envelope::Rectangular { amplitude: rabi, start, end }, transition, target).with_phase(phase);
    PulseSchedule::new(vec![term], Vec::new(), start, end)
}

/// Microwave rotation `R(θ, φ)` on `r0↔r1` for every ensemble.
///
/// Resonant and rectangular with complex amplitude `Ω3·e^{iφ}` for `θ/Ω3`,
/// giving `cos(θ/2)` on the diagonal and `-i e^{±iφ} sin(θ/2)` off it.
pub fn microwave_rotation(theta: f64, phi: f64, omega3: f64, start: f64) -> Result<PulseSchedule> {
    resonant_pulse(("r0", "r1"), theta, omega3, phi, start, Target::All)
}
