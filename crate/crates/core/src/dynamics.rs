//! Hamiltonian assembly and time propagation.
//!
//! `ħ = 1`: energies are angular frequencies in rad/µs. The Hamiltonian of a
//! schedule is `H(t) = D(t) + V(t)` with a diagonal detuning part
//! `D_kk = -Σ δ(t)·n_level(k)` and drive couplings `V`. Propagation runs a
//! fixed-step classical RK4 on the interaction-picture state
//! `ψ_I = exp(i∫D)ψ`; the diagonal phases are integrated in closed form so the
//! step only has to resolve the couplings and the detuning beat `δ`, not the
//! `n·δ` energies of multiply excited configurations.
//!
//! Every drive acts on whole ensembles, so `H(t)` commutes with permutations
//! of atoms inside an ensemble. Pure states that are invariant under those
//! permutations are propagated in the symmetric sector (one amplitude per
//! orbit of configurations) and embedded back into the full basis; this is
//! exact, not an approximation.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SimError};
use crate::pulses::PulseSchedule;
use crate::statespace::{CollectiveBasis, Configuration, Target};

pub use crate::statespace::{DensityMatrix, StateVector};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const SYMMETRY_TOLERANCE: f64 = 1e-13;

/// Spontaneous decay rates (angular, rad/µs).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DecayRates {
    /// `e → 0`, closed: population returns to the first ground level.
    pub gamma_e: f64,
    /// Every Rydberg level, open: population leaves the modeled space.
    pub gamma_r: f64,
}

impl DecayRates {
    pub fn new(gamma_e: f64, gamma_r: f64) -> Result<Self> {
        if !(gamma_e >= 0.0 && gamma_r >= 0.0) {
            return invalid("decay rates must be non-negative");
        }
        Ok(Self { gamma_e, gamma_r })
    }

    /// γe/2π = 5 MHz, γr/2π = 0.8 kHz.
    pub fn rubidium_like() -> Self {
        Self { gamma_e: TAU * 5.0, gamma_r: TAU * 0.8e-3 }
    }

    pub fn is_zero(&self) -> bool {
        self.gamma_e == 0.0 && self.gamma_r == 0.0
    }
}

#[derive(Clone, Debug)]
pub struct PropagationOptions {
    /// Step is `1 / (step_divisor · f)` with `f` (MHz) the larger of a bound on
    /// the coupling spectrum and the largest detuning, evaluated per segment.
    pub step_divisor: f64,
    /// Lower bound on the number of steps across the whole window.
    pub min_steps: usize,
    /// Equally spaced samples including both window ends.
    pub snapshots: usize,
    pub keep_states: bool,
    /// Use the symmetric sector for permutation-invariant pure states.
    pub use_symmetry: bool,
    /// Norm (or trace) drift above which a run is an integration failure.
    pub norm_tolerance: f64,
    /// Named states whose population `|⟨φ|ψ⟩|²` (or `⟨φ|ρ|φ⟩`) is recorded.
    pub observables: Vec<(String, StateVector)>,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            step_divisor: 200.0,
            min_steps: 1000,
            snapshots: 2000,
            keep_states: false,
            use_symmetry: true,
            norm_tolerance: 1e-6,
            observables: Vec::new(),
        }
    }
}

impl PropagationOptions {
    pub fn with_divisor(mut self, divisor: f64) -> Self {
        self.step_divisor = divisor;
        self
    }

    pub fn with_snapshots(mut self, snapshots: usize) -> Self {
        self.snapshots = snapshots;
        self
    }

    pub fn with_norm_tolerance(mut self, tolerance: f64) -> Self {
        self.norm_tolerance = tolerance;
        self
    }

    pub fn observe(mut self, name: impl Into<String>, state: StateVector) -> Self {
        self.observables.push((name.into(), state));
        self
    }
}

#[derive(Clone, Debug)]
pub enum Snapshot {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl Snapshot {
    pub fn as_pure(&self) -> Option<&StateVector> {
        match self {
            Snapshot::Pure(s) => Some(s),
            Snapshot::Mixed(_) => None,
        }
    }

    pub fn as_mixed(&self) -> Option<&DensityMatrix> {
        match self {
            Snapshot::Mixed(r) => Some(r),
            Snapshot::Pure(_) => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    pub ground_population: Vec<f64>,
    /// All-ground amplitude; `None` for density-matrix runs.
    pub ground_amplitude: Option<Vec<C64>>,
    /// `‖ψ‖²` or `Tr ρ` per sample.
    pub norm: Vec<f64>,
    pub tracked: Vec<(String, Vec<f64>)>,
    pub states: Vec<Snapshot>,
    pub final_state: Snapshot,
    /// Largest `|‖ψ‖ - ‖ψ₀‖|` seen (trace excess for open decay).
    pub max_norm_drift: f64,
    pub steps: usize,
    /// Smallest step used.
    pub step_size: f64,
    /// Whether the symmetric sector was used.
    pub reduced: bool,
}

impl EvolutionTrace {
    /// Raw (wrapped) phase of the all-ground amplitude per sample.
    pub fn ground_phase_wrapped(&self) -> Option<Vec<f64>> {
        self.ground_amplitude.as_ref().map(|a| a.iter().map(|z| z.arg()).collect())
    }

    pub fn final_ground_population(&self) -> f64 {
        *self.ground_population.last().unwrap()
    }

    /// `1 - Tr ρ` (or `1 - ‖ψ‖²`) at the end of the run.
    pub fn leaked_population(&self) -> f64 {
        1.0 - *self.norm.last().unwrap()
    }

    pub fn tracked(&self, name: &str) -> Option<&[f64]> {
        self.tracked.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn final_pure(&self) -> Option<&StateVector> {
        self.final_state.as_pure()
    }
}

/// Orbits of the configurations under permutations of atoms within each
/// ensemble. The orbit state is the normalized uniform superposition of its
/// configurations.
#[derive(Clone, Debug)]
pub struct SymmetricSector {
    orbit_of: Vec<u32>,
    sqrt_size: Vec<f64>,
    representative: Vec<u32>,
}

impl SymmetricSector {
    pub fn new(basis: &CollectiveBasis) -> Self {
        let levels = basis.scheme().num_levels();
        let mut index: HashMap<Vec<u16>, u32> = HashMap::new();
        let mut orbit_of = Vec::with_capacity(basis.dimension());
        let mut sizes: Vec<usize> = Vec::new();
        let mut representative = Vec::new();
        for (k, config) in basis.configurations().iter().enumerate() {
            let mut key = vec![0u16; levels * basis.num_ensembles()];
            for (atom, &l) in config.levels().iter().enumerate() {
                key[basis.ensemble_of(atom) * levels + l as usize] += 1;
            }
            let next = index.len() as u32;
            let o = *index.entry(key).or_insert(next);
            if o == next {
                sizes.push(0);
                representative.push(k as u32);
            }
            sizes[o as usize] += 1;
            orbit_of.push(o);
        }
        Self { orbit_of, sqrt_size: sizes.iter().map(|&s| (s as f64).sqrt()).collect(), representative }
    }

    pub fn dimension(&self) -> usize {
        self.sqrt_size.len()
    }

    pub fn orbit_of(&self, k: usize) -> usize {
        self.orbit_of[k] as usize
    }

    /// Orbit amplitudes of a permutation-invariant state, or `None` if the
    /// amplitudes differ inside some orbit.
    pub fn reduce(&self, amplitudes: &[C64]) -> Option<Vec<C64>> {
        let mut first: Vec<Option<C64>> = vec![None; self.dimension()];
        let scale = amplitudes.iter().map(|a| a.norm()).fold(0.0, f64::max).max(1e-300);
        for (k, &a) in amplitudes.iter().enumerate() {
            let o = self.orbit_of[k] as usize;
            match first[o] {
                None => first[o] = Some(a),
                Some(b) if (a - b).norm() <= SYMMETRY_TOLERANCE * scale => {}
                Some(_) => return None,
            }
        }
        Some(first.iter().zip(&self.sqrt_size).map(|(a, s)| a.unwrap_or(ZERO) * *s).collect())
    }

    pub fn embed(&self, reduced: &[C64]) -> Array1<C64> {
        self.orbit_of.iter().map(|&o| reduced[o as usize] / self.sqrt_size[o as usize]).collect()
    }
}

/// Off-diagonal coupling block: one transition on the atoms of one ensemble.
#[derive(Debug)]
struct Channel {
    transition: (u8, u8),
    ensemble: usize,
    /// `(k_a, k_b, weight)`: `⟨k_a|V|k_b⟩ = weight·Ω/2` for this channel.
    pairs: Vec<(u32, u32, f64)>,
    /// `(detuning index, n_level(b) - n_level(a))` for the interaction-picture phase.
    phase_weights: Vec<(usize, f64)>,
    /// Sum of weights per row, for the Gershgorin step bound.
    row_weight: Vec<f64>,
}

/// Couplings of a set of channels in one row-compressed matrix. Each row is a list of runs
/// sharing one coefficient slot: slot `2c` is the `a → b` entry of channel
/// `c`, slot `2c + 1` its conjugate partner. A run contributes
/// `slot · Σ weight·x[col]`, so each run costs one complex product.
#[derive(Debug)]
struct CouplingMatrix {
    /// Row `r` owns `runs[row_offsets[r]..row_offsets[r + 1]]`.
    row_offsets: Vec<u32>,
    /// `(slot, end)`: the run's columns end at `cols[end]`, starting where the
    /// previous run of the same row ended.
    runs: Vec<(u32, u32)>,
    /// Start of each row's first run in `cols`.
    col_starts: Vec<u32>,
    cols: Vec<(u32, f64)>,
}

impl CouplingMatrix {
    /// Only channels with `include[c]` set enter the matrix.
    fn new(dim: usize, channels: &[Channel], include: &[bool]) -> Self {
        let mut rows: Vec<Vec<(u32, u32, f64)>> = vec![Vec::new(); dim];
        for (c, channel) in channels.iter().enumerate().filter(|(c, _)| include[*c]) {
            for &(ka, kb, w) in &channel.pairs {
                rows[ka as usize].push((2 * c as u32, kb, w));
                rows[kb as usize].push((2 * c as u32 + 1, ka, w));
            }
        }
        let mut row_offsets = Vec::with_capacity(dim + 1);
        let mut col_starts = Vec::with_capacity(dim);
        let mut runs = Vec::new();
        let mut cols = Vec::new();
        row_offsets.push(0);
        for mut row in rows {
            row.sort_unstable_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
            col_starts.push(cols.len() as u32);
            for (i, &(slot, col, w)) in row.iter().enumerate() {
                cols.push((col, w));
                if i + 1 == row.len() || row[i + 1].0 != slot {
                    runs.push((slot, cols.len() as u32));
                }
            }
            row_offsets.push(runs.len() as u32);
        }
        Self { row_offsets, runs, col_starts, cols }
    }

    /// Row `r` of `-i V_I x`.
    #[inline(always)]
    fn row(&self, r: usize, slots: &[C64], x: &[C64]) -> C64 {
        let (lo, hi) = (self.row_offsets[r] as usize, self.row_offsets[r + 1] as usize);
        let mut start = self.col_starts[r] as usize;
        let mut sum = ZERO;
        for &(slot, end) in &self.runs[lo..hi] {
            let end = end as usize;
            let mut part = ZERO;
            for &(col, w) in &self.cols[start..end] {
                // SAFETY: columns come from basis lookups and callers pass
                // vectors of the space dimension.
                part += w * unsafe { *x.get_unchecked(col as usize) };
            }
            sum += slots[slot as usize] * part;
            start = end;
        }
        sum
    }
}

fn channel_pairs(basis: &CollectiveBasis, a: u8, b: u8, ensemble: usize) -> Vec<(u32, u32)> {
    let mut pairs = Vec::new();
    let atoms = basis.atoms_in(ensemble);
    for (k, config) in basis.configurations().iter().enumerate() {
        for atom in atoms.clone() {
            if config.levels()[atom] == a {
                if let Some(j) = basis.index_of(&config.with_level(atom, b)) {
                    pairs.push((k as u32, j as u32));
                }
            }
        }
    }
    pairs
}

fn count_in_target(basis: &CollectiveBasis, config: &Configuration, level: u8, target: Target) -> u8 {
    config
        .levels()
        .iter()
        .enumerate()
        .filter(|&(atom, &l)| l == level && target.includes(basis.ensemble_of(atom)))
        .count() as u8
}

/// Sparse, schedule-bound form of `H(t)` on the full basis or the symmetric
/// sector.
#[derive(Debug)]
struct Generator<'a> {
    dim: usize,
    schedule: &'a PulseSchedule,
    channels: Vec<Channel>,
    /// Channels driven by each schedule term.
    term_channels: Vec<Vec<usize>>,
    /// Atoms of the detuned level per basis state, one row per schedule detuning.
    detuning_counts: Vec<Vec<u8>>,
}

impl<'a> Generator<'a> {
    fn new(basis: &CollectiveBasis, schedule: &'a PulseSchedule, sector: Option<&SymmetricSector>) -> Result<Self> {
        schedule.validate()?;
        let scheme = basis.scheme();
        let dim = sector.map_or(basis.dimension(), |s| s.dimension());
        let config_of = |k: usize| match sector {
            Some(s) => basis.configuration(s.representative[k] as usize),
            None => basis.configuration(k),
        };
        let mut detuning_levels = Vec::with_capacity(schedule.detunings.len());
        let mut detuning_counts = Vec::with_capacity(schedule.detunings.len());
        for d in &schedule.detunings {
            basis.check_target(d.target)?;
            let level = scheme.require(&d.level)?;
            detuning_levels.push((level, d.target));
            detuning_counts.push((0..dim).map(|k| count_in_target(basis, config_of(k), level, d.target)).collect());
        }

        let mut channels: Vec<Channel> = Vec::new();
        let mut term_channels = Vec::with_capacity(schedule.terms.len());
        for term in &schedule.terms {
            basis.check_target(term.target)?;
            let a = scheme.require(&term.transition.0)?;
            let b = scheme.require(&term.transition.1)?;
            let mut ids = Vec::new();
            for ensemble in 0..basis.num_ensembles() {
                if !term.target.includes(ensemble) {
                    continue;
                }
                let id = match channels.iter().position(|c| c.transition == (a, b) && c.ensemble == ensemble) {
                    Some(id) => id,
                    None => {
                        let phase_weights = detuning_levels
                            .iter()
                            .enumerate()
                            .filter(|(_, (_, target))| target.includes(ensemble))
                            .map(|(d, &(level, _))| (d, (b == level) as i32 as f64 - (a == level) as i32 as f64))
                            .filter(|&(_, w)| w != 0.0)
                            .collect();
                        let full = channel_pairs(basis, a, b, ensemble);
                        let pairs = match sector {
                            None => full.into_iter().map(|(x, y)| (x, y, 1.0)).collect(),
                            Some(s) => reduce_pairs(s, &full),
                        };
                        let mut row_weight = vec![0.0; dim];
                        for &(ka, kb, w) in &pairs {
                            row_weight[ka as usize] += w;
                            row_weight[kb as usize] += w;
                        }
                        channels.push(Channel { transition: (a, b), ensemble, pairs, phase_weights, row_weight });
                        channels.len() - 1
                    }
                };
                ids.push(id);
            }
            term_channels.push(ids);
        }
        Ok(Self { dim, schedule, channels, term_channels, detuning_counts })
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    /// Largest frequency (MHz) the step has to resolve on `[a, b]`: a
    /// Gershgorin bound on the spectral radius of the couplings, or the
    /// largest detuning, whichever is larger.
    fn max_frequency_mhz(&self, a: f64, b: f64) -> f64 {
        let mut amp = vec![0.0; self.channels.len()];
        for (k, term) in self.schedule.terms.iter().enumerate() {
            let (lo, hi) = term.envelope.support();
            if hi <= a || lo >= b {
                continue;
            }
            let peak = term.envelope.max_on(a.max(lo), b.min(hi)).abs();
            for &c in &self.term_channels[k] {
                amp[c] += peak;
            }
        }
        let mut rows = vec![0.0; self.dim];
        for (channel, &w) in self.channels.iter().zip(&amp) {
            if w == 0.0 {
                continue;
            }
            for (r, &d) in rows.iter_mut().zip(&channel.row_weight) {
                *r += 0.5 * w * d;
            }
        }
        let rabi = rows.iter().copied().fold(0.0, f64::max);
        let detuning = self
            .schedule
            .detunings
            .iter()
            .filter(|d| d.window.0 < b && d.window.1 > a)
            .map(|d| d.profile.max_abs(a.max(d.window.0), b.min(d.window.1)))
            .fold(0.0, f64::max);
        rabi.max(detuning) / TAU
    }

    fn active_terms(&self, mid: f64) -> Vec<bool> {
        self.schedule
            .terms
            .iter()
            .map(|t| {
                let (lo, hi) = t.envelope.support();
                mid > lo && mid < hi && t.envelope.peak() != 0.0
            })
            .collect()
    }

    /// Channels driven by at least one active term.
    fn active_channels(&self, active: &[bool]) -> Vec<bool> {
        let mut include = vec![false; self.channels.len()];
        for (ids, _) in self.term_channels.iter().zip(active).filter(|(_, &a)| a) {
            ids.iter().for_each(|&c| include[c] = true);
        }
        include
    }

    fn coupling_matrix(&self, include: &[bool]) -> CouplingMatrix {
        CouplingMatrix::new(self.dim, &self.channels, include)
    }

    fn slot_count(&self) -> usize {
        2 * self.channels.len()
    }

    /// Interaction-picture coupling coefficients at `t`: slot `2c` holds
    /// `-i·Ω_c/2·e^{iθ_c}` and slot `2c + 1` its partner `-conj(·)`.
    fn coefficients(&self, t: f64, active: &[bool], out: &mut [C64]) {
        out.iter_mut().for_each(|c| *c = ZERO);
        for (k, term) in self.schedule.terms.iter().enumerate() {
            if !active[k] {
                continue;
            }
            let amp = C64::from_polar(0.5 * term.envelope.shape(t), term.carrier_phase);
            for &c in &self.term_channels[k] {
                out[2 * c] += amp;
            }
        }
        for (c, channel) in self.channels.iter().enumerate() {
            if out[2 * c] == ZERO {
                continue;
            }
            let phase: f64 =
                channel.phase_weights.iter().map(|&(d, w)| w * self.schedule.detunings[d].accumulated(t)).sum();
            let w = C64::new(0.0, -1.0) * out[2 * c] * C64::from_polar(1.0, phase);
            out[2 * c] = w;
            // -i·conj(Ω/2·e^{iθ}) = -conj(w)
            out[2 * c + 1] = -w.conj();
        }
    }

    /// One fused RK4 stage: `k = -i V_I x`, then `acc = keep·acc + weight·k`
    /// and `next = psi + a·k`.
    #[allow(clippy::too_many_arguments)]
    fn stage(
        &self,
        couplings: &CouplingMatrix,
        slots: &[C64],
        x: &[C64],
        psi: &[C64],
        a: f64,
        keep: f64,
        weight: f64,
        acc: &mut [C64],
        next: &mut [C64],
    ) {
        let dim = self.dim;
        assert!(x.len() == dim && psi.len() == dim && acc.len() == dim && next.len() == dim);
        assert!(slots.len() == self.slot_count());
        for (r, ((acc_r, next_r), psi_r)) in acc.iter_mut().zip(next.iter_mut()).zip(psi).enumerate() {
            let k = couplings.row(r, slots, x);
            *acc_r = keep * *acc_r + weight * k;
            *next_r = psi_r + a * k;
        }
    }

    /// `out = -i[V_I, ρ]` for a row-major `ρ`.
    fn apply_commutator(&self, slots: &[C64], rho: &[C64], scratch: &mut [C64], out: &mut [C64]) {
        let dim = self.dim;
        scratch.iter_mut().for_each(|v| *v = ZERO);
        // scratch = -i V ρ
        for (c, channel) in self.channels.iter().enumerate() {
            let w = slots[2 * c];
            if w == ZERO {
                continue;
            }
            let w_back = slots[2 * c + 1];
            for &(ka, kb, weight) in &channel.pairs {
                let (ka, kb) = (ka as usize, kb as usize);
                let (wf, wb) = (weight * w, weight * w_back);
                let (row_a, row_b) = (ka * dim, kb * dim);
                for j in 0..dim {
                    scratch[row_a + j] += wf * rho[row_b + j];
                }
                for j in 0..dim {
                    scratch[row_b + j] += wb * rho[row_a + j];
                }
            }
        }
        // -i[V,ρ] = -iVρ + (-iVρ)^†
        for i in 0..dim {
            for j in 0..dim {
                out[i * dim + j] = scratch[i * dim + j] + scratch[j * dim + i].conj();
            }
        }
    }

    /// Diagonal interaction-picture phases `Φ_k(t) = -Σ n_k θ(t)`.
    fn frame_phases(&self, t: f64) -> Vec<f64> {
        let mut phases = vec![0.0; self.dim];
        for (d, det) in self.schedule.detunings.iter().enumerate() {
            let theta = det.accumulated(t);
            if theta == 0.0 {
                continue;
            }
            for (k, &n) in self.detuning_counts[d].iter().enumerate() {
                phases[k] -= n as f64 * theta;
            }
        }
        phases
    }

    fn to_lab(&self, t: f64, psi_i: &[C64]) -> Vec<C64> {
        psi_i.iter().zip(self.frame_phases(t)).map(|(a, p)| a * C64::from_polar(1.0, -p)).collect()
    }

    fn from_lab(&self, t: f64, psi: &[C64]) -> Vec<C64> {
        psi.iter().zip(self.frame_phases(t)).map(|(a, p)| a * C64::from_polar(1.0, p)).collect()
    }
}

/// `⟨O_a|P|O_b⟩ = #pairs(O_a, O_b) / √(|O_a||O_b|)`
fn reduce_pairs(sector: &SymmetricSector, full: &[(u32, u32)]) -> Vec<(u32, u32, f64)> {
    let mut counts: HashMap<(u32, u32), usize> = HashMap::new();
    for &(ka, kb) in full {
        *counts.entry((sector.orbit_of[ka as usize], sector.orbit_of[kb as usize])).or_insert(0) += 1;
    }
    let mut pairs: Vec<(u32, u32, f64)> = counts
        .into_iter()
        .map(|((oa, ob), n)| (oa, ob, n as f64 / (sector.sqrt_size[oa as usize] * sector.sqrt_size[ob as usize])))
        .collect();
    pairs.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    pairs
}

/// Dense lab-frame `H(t)` (rad/µs).
pub fn hamiltonian_at(basis: &Arc<CollectiveBasis>, schedule: &PulseSchedule, t: f64) -> Result<Array2<C64>> {
    let generator = Generator::new(basis, schedule, None)?;
    let sample = schedule.evaluate(t)?;
    let scheme = basis.scheme();
    let dim = basis.dimension();
    let mut h = Array2::<C64>::zeros((dim, dim));
    for d in &sample.detunings {
        let level = scheme.require(&d.level)?;
        for (k, config) in basis.configurations().iter().enumerate() {
            h[[k, k]] -= d.value * count_in_target(basis, config, level, d.target) as f64;
        }
    }
    for drive in &sample.drives {
        let a = scheme.require(&drive.transition.0)?;
        let b = scheme.require(&drive.transition.1)?;
        for channel in &generator.channels {
            if channel.transition != (a, b) || !drive.target.includes(channel.ensemble) {
                continue;
            }
            for &(ka, kb, _) in &channel.pairs {
                h[[ka as usize, kb as usize]] += 0.5 * drive.amplitude;
                h[[kb as usize, ka as usize]] += 0.5 * drive.amplitude.conj();
            }
        }
    }
    Ok(h)
}

/// Sample times and integration segments shared by both propagators.
struct Grid {
    /// `(start, end, steps)`
    segments: Vec<(f64, f64, usize)>,
    samples: Vec<f64>,
    min_step: f64,
}

fn grid(generator: &Generator, schedule: &PulseSchedule, options: &PropagationOptions) -> Result<Grid> {
    if !(options.step_divisor > 0.0 && options.step_divisor.is_finite()) {
        return invalid("step divisor must be positive");
    }
    if !(options.norm_tolerance > 0.0) {
        return invalid("norm tolerance must be positive");
    }
    let duration = schedule.duration();
    let samples: Vec<f64> = match options.snapshots {
        0 | 1 => vec![schedule.t_end],
        n => (0..n).map(|k| schedule.t_start + duration * k as f64 / (n - 1) as f64).collect(),
    };
    let max_dt =
        if options.min_steps > 0 && duration > 0.0 { duration / options.min_steps as f64 } else { f64::INFINITY };
    let mut points = schedule.breakpoints();
    points.extend(samples.iter().copied());
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    let mut min_step = f64::INFINITY;
    let segments = points
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let f = generator.max_frequency_mhz(a, b);
            let dt = if f > 0.0 { (1.0 / (options.step_divisor * f)).min(max_dt) } else { max_dt };
            let n = if b > a { ((b - a) / dt).ceil().max(1.0) as usize } else { 0 };
            if n > 0 {
                min_step = min_step.min((b - a) / n as f64);
            }
            (a, b, n)
        })
        .collect();
    Ok(Grid { segments, samples, min_step })
}

/// Integrate `i dψ/dt = H(t) ψ` over the schedule window.
pub fn propagate_schrodinger(
    schedule: &PulseSchedule,
    psi0: &StateVector,
    options: &PropagationOptions,
) -> Result<EvolutionTrace> {
    let basis = psi0.basis().clone();
    let input = psi0.amplitudes().as_slice().unwrap();
    let reduction = if options.use_symmetry {
        let sector = SymmetricSector::new(&basis);
        sector.reduce(input).map(|r| (sector, r))
    } else {
        None
    };
    let (sector, start) = match reduction {
        Some((s, r)) => (Some(s), r),
        None => (None, input.to_vec()),
    };
    let generator = Generator::new(&basis, schedule, sector.as_ref())?;
    let grid = grid(&generator, schedule, options)?;
    let dim = generator.dimension();
    let ground = basis.ground_index();
    let norm0 = psi0.norm();

    let embed = |t: f64, psi_i: &[C64]| -> Result<StateVector> {
        let lab = generator.to_lab(t, psi_i);
        let full = match &sector {
            Some(s) => s.embed(&lab),
            None => Array1::from(lab),
        };
        StateVector::new(basis.clone(), full)
    };

    let mut psi = generator.from_lab(schedule.t_start, &start);
    let n_slots = generator.slot_count();
    let (mut c0, mut c1, mut c2) = (vec![ZERO; n_slots], vec![ZERO; n_slots], vec![ZERO; n_slots]);
    let mut acc = vec![ZERO; dim];
    let mut x1 = vec![ZERO; dim];
    let mut x2 = vec![ZERO; dim];

    // Only the channels driven inside a segment are multiplied through.
    let mut matrices: HashMap<Vec<bool>, CouplingMatrix> = HashMap::new();

    let mut trace = TraceBuilder::new(options, grid.samples.len());
    let mut next_sample = 0;
    let mut steps = 0usize;
    let record = |t: f64, psi: &[C64], trace: &mut TraceBuilder| -> Result<()> {
        let lab = embed(t, psi)?;
        let norm = lab.norm();
        trace.push_pure(t, &lab, ground, norm * norm, (norm - norm0).abs(), options);
        Ok(())
    };

    while next_sample < grid.samples.len() && grid.samples[next_sample] <= schedule.t_start + 1e-12 {
        record(grid.samples[next_sample], &psi, &mut trace)?;
        next_sample += 1;
    }
    for &(a, b, n) in &grid.segments {
        let active = generator.active_terms(0.5 * (a + b));
        if n > 0 && active.iter().any(|&x| x) {
            let include = generator.active_channels(&active);
            let m = matrices.entry(include).or_insert_with_key(|include| generator.coupling_matrix(include));
            let h = (b - a) / n as f64;
            generator.coefficients(a, &active, &mut c0);
            for s in 0..n {
                let t = a + s as f64 * h;
                generator.coefficients(t + 0.5 * h, &active, &mut c1);
                generator.coefficients(if s + 1 == n { b } else { t + h }, &active, &mut c2);
                generator.stage(m, &c0, &psi, &psi, 0.5 * h, 0.0, 1.0, &mut acc, &mut x1);
                generator.stage(m, &c1, &x1, &psi, 0.5 * h, 1.0, 2.0, &mut acc, &mut x2);
                generator.stage(m, &c1, &x2, &psi, h, 1.0, 2.0, &mut acc, &mut x1);
                // acc ← h/6 (k1 + 2k2 + 2k3 + k4)
                generator.stage(m, &c2, &x1, &psi, 0.0, h / 6.0, h / 6.0, &mut acc, &mut x2);
                for (p, d) in psi.iter_mut().zip(&acc) {
                    *p += d;
                }
                std::mem::swap(&mut c0, &mut c2);
            }
            steps += n;
        }
        while next_sample < grid.samples.len() && grid.samples[next_sample] <= b + 1e-12 {
            record(grid.samples[next_sample], &psi, &mut trace)?;
            next_sample += 1;
        }
    }
    let final_state = embed(schedule.t_end, &psi)?;
    let drift = (final_state.norm() - norm0).abs();
    let trace = trace.finish(Snapshot::Pure(final_state), drift, steps, grid.min_step, sector.is_some());
    if trace.max_norm_drift > options.norm_tolerance {
        return Err(SimError::IntegrationFailure {
            drift: trace.max_norm_drift,
            limit: options.norm_tolerance,
            t: schedule.t_end,
        });
    }
    Ok(trace)
}

struct TraceBuilder {
    times: Vec<f64>,
    ground_population: Vec<f64>,
    ground_amplitude: Vec<C64>,
    norm: Vec<f64>,
    tracked: Vec<(String, Vec<f64>)>,
    states: Vec<Snapshot>,
    max_drift: f64,
    pure: bool,
}

impl TraceBuilder {
    fn new(options: &PropagationOptions, capacity: usize) -> Self {
        Self {
            times: Vec::with_capacity(capacity),
            ground_population: Vec::with_capacity(capacity),
            ground_amplitude: Vec::with_capacity(capacity),
            norm: Vec::with_capacity(capacity),
            tracked: options.observables.iter().map(|(n, _)| (n.clone(), Vec::with_capacity(capacity))).collect(),
            states: Vec::new(),
            max_drift: 0.0,
            pure: true,
        }
    }

    fn push_pure(
        &mut self,
        t: f64,
        state: &StateVector,
        ground: usize,
        norm_sq: f64,
        drift: f64,
        options: &PropagationOptions,
    ) {
        let g = state.amplitudes()[ground];
        self.times.push(t);
        self.ground_population.push(g.norm_sqr());
        self.ground_amplitude.push(g);
        self.norm.push(norm_sq);
        for ((_, values), (_, phi)) in self.tracked.iter_mut().zip(&options.observables) {
            values.push(state.overlap_population(phi));
        }
        if options.keep_states {
            self.states.push(Snapshot::Pure(state.clone()));
        }
        self.max_drift = self.max_drift.max(drift);
    }

    fn push_mixed(&mut self, t: f64, rho: &DensityMatrix, ground: usize, drift: f64, options: &PropagationOptions) {
        self.pure = false;
        self.times.push(t);
        self.ground_population.push(rho.population(ground));
        self.norm.push(rho.trace());
        for ((_, values), (_, phi)) in self.tracked.iter_mut().zip(&options.observables) {
            values.push(rho.expectation_population(phi));
        }
        if options.keep_states {
            self.states.push(Snapshot::Mixed(rho.clone()));
        }
        self.max_drift = self.max_drift.max(drift);
    }

    fn finish(self, final_state: Snapshot, final_drift: f64, steps: usize, dt: f64, reduced: bool) -> EvolutionTrace {
        EvolutionTrace {
            times: self.times,
            ground_population: self.ground_population,
            ground_amplitude: if self.pure { Some(self.ground_amplitude) } else { None },
            norm: self.norm,
            tracked: self.tracked,
            states: self.states,
            final_state,
            max_norm_drift: self.max_drift.max(final_drift),
            steps,
            step_size: dt,
            reduced,
        }
    }
}

/// Precomputed structure of the dissipator for one basis and set of rates.
#[derive(Debug)]
struct Dissipator {
    dim: usize,
    /// `½ Σ_channels γ · n_from(k)` per configuration.
    half_loss: Vec<f64>,
    /// Per closed channel and atom: `(γ, [(k, k')])` where `k'` is `k` with
    /// the atom lifted from the destination level back to the decaying one.
    recycling: Vec<(f64, Vec<(u32, u32)>)>,
}

impl Dissipator {
    fn new(basis: &CollectiveBasis, rates: &DecayRates) -> Result<Self> {
        if !(rates.gamma_e >= 0.0 && rates.gamma_r >= 0.0) {
            return invalid("decay rates must be non-negative");
        }
        let scheme = basis.scheme();
        let dim = basis.dimension();
        let mut half_loss = vec![0.0; dim];
        let mut recycling = Vec::new();

        // closed e → 0
        if rates.gamma_e > 0.0 {
            if let (Some(e), Some(g)) = (scheme.level_index("e"), scheme.level_index("0")) {
                for (k, c) in basis.configurations().iter().enumerate() {
                    half_loss[k] += 0.5 * rates.gamma_e * c.count(e) as f64;
                }
                for atom in 0..basis.num_atoms() {
                    let mut pairs = Vec::new();
                    for (k, c) in basis.configurations().iter().enumerate() {
                        if c.levels()[atom] == g {
                            if let Some(kp) = basis.index_of(&c.with_level(atom, e)) {
                                pairs.push((k as u32, kp as u32));
                            }
                        }
                    }
                    recycling.push((rates.gamma_e, pairs));
                }
            }
        }
        // open Rydberg loss
        if rates.gamma_r > 0.0 {
            for (k, c) in basis.configurations().iter().enumerate() {
                half_loss[k] += 0.5 * rates.gamma_r * c.rydberg_count(scheme) as f64;
            }
        }
        Ok(Self { dim, half_loss, recycling })
    }

    fn is_zero(&self) -> bool {
        self.recycling.is_empty() && self.half_loss.iter().all(|&g| g == 0.0)
    }

    /// `out += L̂ρ` for a row-major `ρ`.
    fn accumulate(&self, rho: &[C64], out: &mut [C64]) {
        let dim = self.dim;
        for i in 0..dim {
            for j in 0..dim {
                out[i * dim + j] -= (self.half_loss[i] + self.half_loss[j]) * rho[i * dim + j];
            }
        }
        for (gamma, pairs) in &self.recycling {
            for &(a, ap) in pairs {
                for &(b, bp) in pairs {
                    out[a as usize * dim + b as usize] += *gamma * rho[ap as usize * dim + bp as usize];
                }
            }
        }
    }
}

/// The dissipator `L̂ρ`: closed `e → 0` decay and open Rydberg loss, summed
/// over atoms.
pub fn lindblad_apply(rho: &DensityMatrix, rates: &DecayRates) -> Result<Array2<C64>> {
    let basis = rho.basis();
    let dissipator = Dissipator::new(basis, rates)?;
    let dim = basis.dimension();
    let flat: Vec<C64> = rho.entries().iter().copied().collect();
    let mut out = vec![ZERO; dim * dim];
    dissipator.accumulate(&flat, &mut out);
    Ok(Array2::from_shape_vec((dim, dim), out).unwrap())
}

fn axpy(x: &[C64], a: f64, y: &[C64], out: &mut [C64]) {
    for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + a * yi;
    }
}

/// Integrate `dρ/dt = -i[H, ρ] + L̂ρ` over the schedule window.
pub fn propagate_master(
    schedule: &PulseSchedule,
    rho0: &DensityMatrix,
    rates: &DecayRates,
    options: &PropagationOptions,
) -> Result<EvolutionTrace> {
    let basis = rho0.basis().clone();
    let generator = Generator::new(&basis, schedule, None)?;
    let dissipator = Dissipator::new(&basis, rates)?;
    let grid = grid(&generator, schedule, options)?;
    let dim = basis.dimension();
    let n = dim * dim;
    let ground = basis.ground_index();
    let trace0 = rho0.trace();
    if rho0.hermiticity_error() > 1e-10 {
        return invalid("initial density matrix is not Hermitian");
    }

    let to_lab = |t: f64, rho_i: &[C64]| -> Result<DensityMatrix> {
        let phases = generator.frame_phases(t);
        let entries =
            Array2::from_shape_fn((dim, dim), |(i, j)| rho_i[i * dim + j] * C64::from_polar(1.0, phases[j] - phases[i]));
        DensityMatrix::new(basis.clone(), entries)
    };
    let phases0 = generator.frame_phases(schedule.t_start);
    let mut rho: Vec<C64> = Vec::with_capacity(n);
    for i in 0..dim {
        for j in 0..dim {
            rho.push(rho0.entries()[[i, j]] * C64::from_polar(1.0, phases0[i] - phases0[j]));
        }
    }

    let n_slots = generator.slot_count();
    let (mut c0, mut c1, mut c2) = (vec![ZERO; n_slots], vec![ZERO; n_slots], vec![ZERO; n_slots]);
    let mut k = [vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]];
    let mut tmp = vec![ZERO; n];
    let mut scratch = vec![ZERO; n];
    let rhs = |slots: &[C64], has_drive: bool, x: &[C64], scratch: &mut [C64], out: &mut [C64]| {
        if has_drive {
            generator.apply_commutator(slots, x, scratch, out);
        } else {
            out.iter_mut().for_each(|v| *v = ZERO);
        }
        dissipator.accumulate(x, out);
    };
    let open = rates.gamma_r > 0.0;
    let drift_of = |tr: f64| if open { (tr - trace0).max(0.0) } else { (tr - trace0).abs() };

    let mut trace = TraceBuilder::new(options, grid.samples.len());
    let mut next_sample = 0;
    let mut steps = 0usize;
    let record = |t: f64, rho: &[C64], trace: &mut TraceBuilder| -> Result<()> {
        let lab = to_lab(t, rho)?;
        let tr = lab.trace();
        trace.push_mixed(t, &lab, ground, drift_of(tr), options);
        Ok(())
    };
    while next_sample < grid.samples.len() && grid.samples[next_sample] <= schedule.t_start + 1e-12 {
        record(grid.samples[next_sample], &rho, &mut trace)?;
        next_sample += 1;
    }
    for &(a, b, steps_here) in &grid.segments {
        let active = generator.active_terms(0.5 * (a + b));
        let has_drive = active.iter().any(|&x| x);
        if steps_here > 0 && (has_drive || !dissipator.is_zero()) {
            let h = (b - a) / steps_here as f64;
            generator.coefficients(a, &active, &mut c0);
            for s in 0..steps_here {
                let t = a + s as f64 * h;
                generator.coefficients(t + 0.5 * h, &active, &mut c1);
                generator.coefficients(if s + 1 == steps_here { b } else { t + h }, &active, &mut c2);
                let [k1, k2, k3, k4] = &mut k;
                rhs(&c0, has_drive, &rho, &mut scratch, k1);
                axpy(&rho, 0.5 * h, k1, &mut tmp);
                rhs(&c1, has_drive, &tmp, &mut scratch, k2);
                axpy(&rho, 0.5 * h, k2, &mut tmp);
                rhs(&c1, has_drive, &tmp, &mut scratch, k3);
                axpy(&rho, h, k3, &mut tmp);
                rhs(&c2, has_drive, &tmp, &mut scratch, k4);
                let h6 = h / 6.0;
                for i in 0..n {
                    rho[i] += h6 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
                }
                std::mem::swap(&mut c0, &mut c2);
            }
            steps += steps_here;
        }
        while next_sample < grid.samples.len() && grid.samples[next_sample] <= b + 1e-12 {
            record(grid.samples[next_sample], &rho, &mut trace)?;
            next_sample += 1;
        }
    }
    let final_rho = to_lab(schedule.t_end, &rho)?;
    let drift = drift_of(final_rho.trace());
    let trace = trace.finish(Snapshot::Mixed(final_rho), drift, steps, grid.min_step, false);
    if trace.max_norm_drift > options.norm_tolerance {
        return Err(SimError::IntegrationFailure {
            drift: trace.max_norm_drift,
            limit: options.norm_tolerance,
            t: schedule.t_end,
        });
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::{
        double_stirap, mhz, resonant_pulse, Detuning, DetuningProfile, DriveTerm, Envelope, PulseSchedule, StirapParams,
    };
    use crate::statespace::{build_basis, LevelScheme, Target};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LABELS: [&str; 8] = ["00", "0e", "0r", "e0", "ee", "er", "r0", "re"];

    fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
        (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    fn pair_basis() -> (Arc<CollectiveBasis>, [usize; 8]) {
        let basis = build_basis(LevelScheme::stirap(), &[2]).unwrap();
        let idx = LABELS.map(|l| {
            let (a, b) = l.split_at(1);
            basis.index_of_labels(&[a, b]).unwrap()
        });
        (basis, idx)
    }

    fn constant_stirap(omega1: f64, omega2: f64, delta: f64) -> PulseSchedule {
        let rect = |amplitude| Envelope::Rectangular { amplitude, start: 0.0, end: 1.0 };
        PulseSchedule::new(
            vec![
                DriveTerm::new(rect(omega1), ("0", "e"), Target::All),
                DriveTerm::new(rect(omega2), ("e", "r"), Target::All),
            ],
            vec![Detuning {
                level: "e".into(),
                profile: DetuningProfile::Constant { delta },
                target: Target::All,
                window: (0.0, 1.0),
            }],
            0.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn two_atom_stirap_matrix() {
        let (o1, o2, d) = (1.3, 0.7, 2.9);
        let (basis, idx) = pair_basis();
        let h = hamiltonian_at(&basis, &constant_stirap(o1, o2, d), 0.5).unwrap();
        let z = 0.0;
        // (ħ/2) × the 8×8 matrix in the order of LABELS
        #[rustfmt::skip]
        let expected = [
            [z,  o1, z,  o1, z,  z,  z,  z ],
            [o1, -2.0 * d, o2, z, o1, z, z, z],
            [z,  o2, z,  z,  z,  o1, z,  z ],
            [o1, z,  z,  -2.0 * d, o1, z, o2, z],
            [z,  o1, z,  o1, -4.0 * d, o2, z, o2],
            [z,  z,  o1, z,  o2, -2.0 * d, z, z],
            [z,  z,  z,  o2, z,  z,  z,  o1],
            [z,  z,  z,  z,  o2, z,  o1, -2.0 * d],
        ];
        for i in 0..8 {
            for j in 0..8 {
                let got = h[[idx[i], idx[j]]];
                assert!((got - C64::new(0.5 * expected[i][j], 0.0)).norm() < 1e-14, "{} {}", LABELS[i], LABELS[j]);
            }
        }
    }

    #[test]
    fn two_atom_amplitude_equations() {
        let (o1, o2, d) = (0.9, 1.7, -0.4);
        let (basis, idx) = pair_basis();
        let h = hamiltonian_at(&basis, &constant_stirap(o1, o2, d), 0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let psi = Array1::from(random_vector(&mut rng, 8));
            let rate = h.dot(&psi).mapv(|z| z * C64::new(0.0, -1.0));
            let a = |l: &str| psi[idx[LABELS.iter().position(|x| *x == l).unwrap()]];
            let (h1, h2) = (0.5 * o1, 0.5 * o2);
            // i ȧ for each amplitude
            let rhs = [
                ("00", h1 * a("0e") + h1 * a("e0")),
                ("e0", -d * a("e0") + h1 * a("00") + h1 * a("ee") + h2 * a("r0")),
                ("0e", -d * a("0e") + h1 * a("00") + h1 * a("ee") + h2 * a("0r")),
                ("0r", h1 * a("er") + h2 * a("0e")),
                ("r0", h1 * a("re") + h2 * a("e0")),
                ("ee", -2.0 * d * a("ee") + h1 * a("0e") + h1 * a("e0") + h2 * a("er") + h2 * a("re")),
                ("re", -d * a("re") + h1 * a("r0") + h2 * a("ee")),
                ("er", -d * a("er") + h1 * a("0r") + h2 * a("ee")),
            ];
            for (label, value) in rhs {
                let k = idx[LABELS.iter().position(|x| *x == label).unwrap()];
                assert!((C64::new(0.0, 1.0) * rate[k] - value).norm() < 1e-12, "{label}");
            }
        }
    }

    #[test]
    fn two_atom_arp_equations() {
        let basis = build_basis(LevelScheme::arp(), &[2]).unwrap();
        assert_eq!(basis.dimension(), 3);
        let schedule = crate::pulses::single_arp(&crate::pulses::ArpParams::fig2(), 0.0).unwrap();
        let (k00, kr0, k0r) = (
            basis.index_of_labels(&["0", "0"]).unwrap(),
            basis.index_of_labels(&["r", "0"]).unwrap(),
            basis.index_of_labels(&["0", "r"]).unwrap(),
        );
        for &t in &[-3.0, -0.4, 0.0, 1.1, 2.5] {
            let h = hamiltonian_at(&basis, &schedule, t).unwrap();
            let omega = schedule.terms[0].amplitude_at(t).re;
            let delta = schedule.detunings[0].profile.value(t);
            let mut expected = Array2::<C64>::zeros((3, 3));
            expected[[k00, kr0]] = (0.5 * omega).into();
            expected[[k00, k0r]] = (0.5 * omega).into();
            expected[[kr0, k00]] = (0.5 * omega).into();
            expected[[k0r, k00]] = (0.5 * omega).into();
            expected[[kr0, kr0]] = (-delta).into();
            expected[[k0r, k0r]] = (-delta).into();
            assert!((&h - &expected).iter().all(|z| z.norm() < 1e-12), "t = {t}");
        }
    }

    #[test]
    fn single_atom_gate_equations() {
        let basis = build_basis(LevelScheme::gate(), &[1]).unwrap();
        assert_eq!(basis.dimension(), 5);
        let (o1, o2, orr, og, d) = (0.8, 1.1, 2.3, C64::from_polar(0.6, 0.9), 3.0);
        let rect = |amplitude| Envelope::Rectangular { amplitude, start: 0.0, end: 1.0 };
        let schedule = PulseSchedule::new(
            vec![
                DriveTerm::new(rect(o1), ("0", "e"), Target::All),
                DriveTerm::new(rect(o2), ("e", "r0"), Target::All),
                DriveTerm::new(rect(orr), ("1", "r1"), Target::All),
                DriveTerm::new(rect(og.norm()), ("r0", "r1"), Target::All).with_phase(og.arg()),
            ],
            vec![Detuning {
                level: "e".into(),
                profile: DetuningProfile::Constant { delta: d },
                target: Target::All,
                window: (0.0, 1.0),
            }],
            0.0,
            1.0,
        )
        .unwrap();
        let h = hamiltonian_at(&basis, &schedule, 0.5).unwrap();
        let k = |l: &str| basis.index_of_labels(&[l]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let psi = Array1::from(random_vector(&mut rng, 5));
        let i_rate = h.dot(&psi);
        let a = |l: &str| psi[k(l)];
        let rhs = [
            ("0", 0.5 * o1 * a("e")),
            ("1", 0.5 * orr * a("r1")),
            ("e", -d * a("e") + 0.5 * o1 * a("0") + 0.5 * o2 * a("r0")),
            ("r0", 0.5 * o2 * a("e") + 0.5 * og * a("r1")),
            ("r1", 0.5 * orr * a("1") + 0.5 * og.conj() * a("r0")),
        ];
        for (label, value) in rhs {
            assert!((i_rate[k(label)] - value).norm() < 1e-12, "{label}");
        }
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize) -> Array2<C64> {
        let a = Array2::from_shape_vec((dim, dim), random_vector(rng, dim * dim)).unwrap();
        &a + &a.t().mapv(|z| z.conj())
    }

    #[test]
    fn dissipator_trace_behaviour() {
        let basis = build_basis(LevelScheme::stirap(), &[3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = DensityMatrix::new(basis.clone(), random_hermitian(&mut rng, basis.dimension())).unwrap();
        let closed = lindblad_apply(&rho, &DecayRates::new(3.0, 0.0).unwrap()).unwrap();
        assert!(closed.diag().iter().map(|z| z.re).sum::<f64>().abs() < 1e-12);
        let open = lindblad_apply(&rho, &DecayRates::new(3.0, 0.5).unwrap()).unwrap();
        let r_pop: f64 =
            (0..basis.dimension()).map(|k| rho.population(k) * basis.configuration(k).rydberg_count(basis.scheme()) as f64).sum();
        assert!((open.diag().iter().map(|z| z.re).sum::<f64>() + 0.5 * r_pop).abs() < 1e-12);
    }

    fn probe_options() -> PropagationOptions {
        PropagationOptions { snapshots: 50, ..PropagationOptions::default() }
    }

    #[test]
    fn resonant_rabi_oscillation() {
        let omega = 2.0;
        for n in [1usize, 4] {
            let basis = build_basis(LevelScheme::arp(), &[n]).unwrap();
            let schedule = resonant_pulse(("0", "r"), 3.0, omega, 0.0, 0.0, Target::All).unwrap();
            let trace = propagate_schrodinger(&schedule, &StateVector::ground(basis), &probe_options()).unwrap();
            let collective = (n as f64).sqrt() * omega;
            for (t, p) in trace.times.iter().zip(&trace.ground_population) {
                assert!((p - (0.5 * collective * t).cos().powi(2)).abs() < 1e-9, "N = {n}, t = {t}");
            }
        }
    }

    #[test]
    fn rydberg_population_decays_exponentially() {
        let basis = build_basis(LevelScheme::stirap(), &[1]).unwrap();
        let k = basis.index_of_labels(&["r"]).unwrap();
        let mut entries = Array2::<C64>::zeros((3, 3));
        entries[[k, k]] = C64::new(1.0, 0.0);
        let rho = DensityMatrix::new(basis, entries).unwrap();
        let gamma_r = 0.7;
        let schedule = PulseSchedule::empty(0.0, 2.0).unwrap();
        let trace =
            propagate_master(&schedule, &rho, &DecayRates::new(0.0, gamma_r).unwrap(), &probe_options()).unwrap();
        for (t, tr) in trace.times.iter().zip(&trace.norm) {
            assert!((tr - (-gamma_r * t).exp()).abs() < 1e-10);
        }
        assert!(trace.norm.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn reduced_and_full_propagation_agree() {
        let basis = build_basis(LevelScheme::stirap(), &[3]).unwrap();
        let schedule = double_stirap(&StirapParams::fig2(), true).unwrap();
        let psi0 = StateVector::ground(basis);
        let reduced = propagate_schrodinger(&schedule, &psi0, &probe_options()).unwrap();
        let full = propagate_schrodinger(&schedule, &psi0, &PropagationOptions { use_symmetry: false, ..probe_options() })
            .unwrap();
        assert!(reduced.reduced && !full.reduced);
        let diff = reduced.final_pure().unwrap().amplitudes() - full.final_pure().unwrap().amplitudes();
        assert!(diff.iter().all(|z| z.norm() < 1e-9));
    }

    #[test]
    fn master_equation_without_decay_is_pure() {
        let basis = build_basis(LevelScheme::stirap(), &[2]).unwrap();
        let p = StirapParams::fig2();
        let schedule = crate::pulses::single_stirap(&p, 0.0).unwrap();
        let psi0 = StateVector::ground(basis);
        let opts = probe_options();
        let pure = propagate_schrodinger(&schedule, &psi0, &opts).unwrap();
        let mixed = propagate_master(&schedule, &psi0.to_density(), &DecayRates::default(), &opts).unwrap();
        let rho = mixed.final_state.as_mixed().unwrap();
        let expected = pure.final_pure().unwrap().to_density();
        assert!((rho.entries() - expected.entries()).iter().all(|z| z.norm() < 1e-8));
        assert!(mixed.norm.iter().all(|tr| (tr - 1.0).abs() < 1e-8));
        assert!(rho.hermiticity_error() < 1e-12);
    }

    #[test]
    fn open_decay_trace_is_monotone() {
        let basis = build_basis(LevelScheme::stirap(), &[2]).unwrap();
        let schedule = crate::pulses::single_stirap(&StirapParams::fig2(), 0.0).unwrap();
        let rho0 = StateVector::ground(basis).to_density();
        let rates = DecayRates::new(mhz(5.0), mhz(0.3)).unwrap();
        let trace = propagate_master(&schedule, &rho0, &rates, &probe_options()).unwrap();
        assert!(trace.norm.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(trace.leaked_population() > 0.0);
        let rho = trace.final_state.as_mixed().unwrap();
        assert!(rho.hermiticity_error() < 1e-12);
        // closed decay alone keeps the trace
        let closed =
            propagate_master(&schedule, &rho0, &DecayRates::new(mhz(5.0), 0.0).unwrap(), &probe_options()).unwrap();
        assert!(closed.norm.iter().all(|tr| (tr - 1.0).abs() < 1e-8));
    }

    #[test]
    fn symmetric_sector_round_trip() {
        let basis = build_basis(LevelScheme::gate(), &[2, 3]).unwrap();
        let sector = SymmetricSector::new(&basis);
        assert!(sector.dimension() < basis.dimension());
        let psi = StateVector::ground(basis.clone());
        let reduced = sector.reduce(psi.amplitudes().as_slice().unwrap()).unwrap();
        assert_eq!(sector.embed(&reduced), *psi.amplitudes());
        // a state that is not permutation invariant has no reduction
        let mut amps = Array1::<C64>::zeros(basis.dimension());
        amps[basis.index_of_labels(&["1", "0", "0", "0", "0"]).unwrap()] = C64::new(1.0, 0.0);
        assert!(sector.reduce(amps.as_slice().unwrap()).is_none());
    }
}
