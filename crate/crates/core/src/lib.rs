//! Collective dynamics of Rydberg-blockaded atomic ensembles.
//!
//! Ensembles of distinguishable atoms are driven by laser and microwave
//! pulses; at most one atom across all ensembles may occupy a Rydberg level.
//! The crate builds the blockaded basis, assembles time-dependent drive
//! schedules, propagates pure states and density matrices, and runs the
//! phase-compensated excitation and gate protocols built on top of them.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod protocols;
pub mod pulses;
pub mod statespace;

pub use analysis::{unwrap_phase, PhaseRecord, SweepResult};
pub use dynamics::{
    hamiltonian_at, lindblad_apply, propagate_master, propagate_schrodinger, DecayRates, EvolutionTrace,
    PropagationOptions, Snapshot, SymmetricSector,
};
pub use error::{Result, SimError};
pub use pulses::{mhz, ArpParams, PulseSchedule, StirapParams};
pub use protocols::{GateParams, GateReport, LogicalEncoding, Passage, SequenceRun};
pub use statespace::{build_basis, CollectiveBasis, DensityMatrix, LevelScheme, StateVector, Target};
