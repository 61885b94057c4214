//! Blockade-restricted collective basis for one or two ensembles of atoms.
//!
//! Atoms are distinguishable: a configuration assigns one level to every atom,
//! ensembles are concatenated (control first), and at most one atom in the
//! whole register may sit in a Rydberg level.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{invalid, Result};

/// Single-atom level structure: non-Rydberg levels first, then Rydberg levels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelScheme {
    ground: Vec<String>,
    rydberg: Vec<String>,
}

impl LevelScheme {
    pub fn new<S: AsRef<str>>(ground: &[S], rydberg: &[S]) -> Result<Self> {
        if ground.is_empty() || rydberg.is_empty() {
            return invalid("level scheme needs at least one ground and one Rydberg level");
        }
        let ground: Vec<String> = ground.iter().map(|s| s.as_ref().to_owned()).collect();
        let rydberg: Vec<String> = rydberg.iter().map(|s| s.as_ref().to_owned()).collect();
        let mut seen = std::collections::HashSet::new();
        for label in ground.iter().chain(rydberg.iter()) {
            if label.is_empty() {
                return invalid("empty level label");
            }
            if !seen.insert(label.as_str()) {
                return invalid(format!("duplicate level label '{label}'"));
            }
        }
        if ground.len() + rydberg.len() > u8::MAX as usize {
            return invalid("too many levels");
        }
        Ok(Self { ground, rydberg })
    }

    /// `{0, e} | {r}`: two-photon STIRAP ladder.
    pub fn stirap() -> Self {
        Self::new(&["0", "e"], &["r"]).unwrap()
    }

    /// `{0} | {r}`: single-photon ARP two-level atom.
    pub fn arp() -> Self {
        Self::new(&["0"], &["r"]).unwrap()
    }

    /// `{0, 1, e} | {r0, r1}`: qubit levels plus two Rydberg levels for gates.
    pub fn gate() -> Self {
        Self::new(&["0", "1", "e"], &["r0", "r1"]).unwrap()
    }

    pub fn ground_levels(&self) -> &[String] {
        &self.ground
    }

    pub fn rydberg_levels(&self) -> &[String] {
        &self.rydberg
    }

    pub fn num_levels(&self) -> usize {
        self.ground.len() + self.rydberg.len()
    }

    /// Level labels in basis order (ground levels first).
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.ground.iter().chain(self.rydberg.iter()).map(String::as_str)
    }

    pub fn label(&self, index: u8) -> &str {
        let i = index as usize;
        if i < self.ground.len() {
            &self.ground[i]
        } else {
            &self.rydberg[i - self.ground.len()]
        }
    }

    pub fn level_index(&self, label: &str) -> Option<u8> {
        self.labels().position(|l| l == label).map(|i| i as u8)
    }

    pub(crate) fn require(&self, label: &str) -> Result<u8> {
        self.level_index(label)
            .map_or_else(|| invalid(format!("level '{label}' is not in the scheme")), Ok)
    }

    pub fn is_rydberg(&self, index: u8) -> bool {
        index as usize >= self.ground.len()
    }
}

impl fmt::Display for LevelScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}|{{{}}}", self.ground.join(","), self.rydberg.join(","))
    }
}

/// Per-atom level indices into the scheme, concatenated over ensembles.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration(pub Vec<u8>);

impl Configuration {
    pub fn levels(&self) -> &[u8] {
        &self.0
    }

    pub fn count(&self, level: u8) -> usize {
        self.0.iter().filter(|&&l| l == level).count()
    }

    pub fn rydberg_count(&self, scheme: &LevelScheme) -> usize {
        self.0.iter().filter(|&&l| scheme.is_rydberg(l)).count()
    }

    pub fn with_level(&self, atom: usize, level: u8) -> Configuration {
        let mut levels = self.0.clone();
        levels[atom] = level;
        Configuration(levels)
    }

    /// Compact label such as `0er` (single-character labels) or `0|e|r0`.
    pub fn display(&self, scheme: &LevelScheme) -> String {
        let labels: Vec<&str> = self.0.iter().map(|&l| scheme.label(l)).collect();
        if labels.iter().all(|l| l.chars().count() == 1) {
            labels.concat()
        } else {
            labels.join("|")
        }
    }
}

/// Which ensemble(s) a drive or detuning acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Target {
    All,
    Ensemble(usize),
}

impl Target {
    pub fn includes(self, ensemble: usize) -> bool {
        match self {
            Target::All => true,
            Target::Ensemble(e) => e == ensemble,
        }
    }
}

#[derive(Debug)]
pub struct CollectiveBasis {
    scheme: LevelScheme,
    atom_counts: Vec<usize>,
    configurations: Vec<Configuration>,
    index: HashMap<Configuration, usize>,
    ensemble_of: Vec<usize>,
}

impl CollectiveBasis {
    pub fn scheme(&self) -> &LevelScheme {
        &self.scheme
    }

    pub fn atom_counts(&self) -> &[usize] {
        &self.atom_counts
    }

    pub fn num_atoms(&self) -> usize {
        self.ensemble_of.len()
    }

    pub fn num_ensembles(&self) -> usize {
        self.atom_counts.len()
    }

    pub fn dimension(&self) -> usize {
        self.configurations.len()
    }

    pub fn configurations(&self) -> &[Configuration] {
        &self.configurations
    }

    pub fn configuration(&self, k: usize) -> &Configuration {
        &self.configurations[k]
    }

    pub fn index_of(&self, config: &Configuration) -> Option<usize> {
        self.index.get(config).copied()
    }

    /// Index of the configuration given as level labels, one per atom.
    pub fn index_of_labels(&self, labels: &[&str]) -> Result<usize> {
        if labels.len() != self.num_atoms() {
            return invalid(format!("expected {} level labels, got {}", self.num_atoms(), labels.len()));
        }
        let levels = labels.iter().map(|l| self.scheme.require(l)).collect::<Result<Vec<_>>>()?;
        self.index_of(&Configuration(levels))
            .map_or_else(|| invalid("configuration is outside the blockade-restricted basis"), Ok)
    }

    pub fn ensemble_of(&self, atom: usize) -> usize {
        self.ensemble_of[atom]
    }

    pub fn atoms_in(&self, ensemble: usize) -> std::ops::Range<usize> {
        let start: usize = self.atom_counts[..ensemble].iter().sum();
        start..start + self.atom_counts[ensemble]
    }

    /// Number of atoms a drive with this target can address.
    pub fn target_size(&self, target: Target) -> usize {
        match target {
            Target::All => self.num_atoms(),
            Target::Ensemble(e) => self.atom_counts.get(e).copied().unwrap_or(0),
        }
    }

    pub fn check_target(&self, target: Target) -> Result<()> {
        match target {
            Target::Ensemble(e) if e >= self.num_ensembles() => {
                invalid(format!("ensemble {e} does not exist (basis has {})", self.num_ensembles()))
            }
            _ => Ok(()),
        }
    }

    /// Index of the configuration with every atom in the first ground level.
    pub fn ground_index(&self) -> usize {
        0
    }
}

/// Enumerate all configurations with at most one Rydberg atom across the
/// whole register, in lexicographic level order (atom 0 most significant).
pub fn build_basis(scheme: LevelScheme, atom_counts: &[usize]) -> Result<Arc<CollectiveBasis>> {
    if atom_counts.is_empty() || atom_counts.len() > 2 {
        return invalid("one or two ensembles are supported");
    }
    if atom_counts.iter().any(|&n| n == 0) {
        return invalid("every ensemble needs at least one atom");
    }
    let total: usize = atom_counts.iter().sum();
    let ensemble_of: Vec<usize> = atom_counts
        .iter()
        .enumerate()
        .flat_map(|(e, &n)| std::iter::repeat(e).take(n))
        .collect();

    let num_levels = scheme.num_levels() as u8;
    let mut configurations = Vec::new();
    let mut current = vec![0u8; total];
    fn recurse(
        pos: usize,
        rydberg_used: bool,
        current: &mut Vec<u8>,
        num_levels: u8,
        scheme: &LevelScheme,
        out: &mut Vec<Configuration>,
    ) {
        if pos == current.len() {
            out.push(Configuration(current.clone()));
            return;
        }
        for level in 0..num_levels {
            let ryd = scheme.is_rydberg(level);
            if ryd && rydberg_used {
                continue;
            }
            current[pos] = level;
            recurse(pos + 1, rydberg_used || ryd, current, num_levels, scheme, out);
        }
    }
    recurse(0, false, &mut current, num_levels, &scheme, &mut configurations);

    let index = configurations.iter().cloned().enumerate().map(|(k, c)| (c, k)).collect();
    Ok(Arc::new(CollectiveBasis {
        scheme,
        atom_counts: atom_counts.to_vec(),
        configurations,
        index,
        ensemble_of,
    }))
}

/// Closed-form basis size `g^N + r·N·g^(N-1)`.
pub fn expected_dimension(scheme: &LevelScheme, total_atoms: usize) -> usize {
    let g = scheme.ground_levels().len();
    let r = scheme.rydberg_levels().len();
    let n = total_atoms as u32;
    g.pow(n) + r * total_atoms * g.pow(n - 1)
}

/// Pure state over a collective basis.
#[derive(Clone, Debug)]
pub struct StateVector {
    basis: Arc<CollectiveBasis>,
    amplitudes: Array1<C64>,
}

impl StateVector {
    pub fn new(basis: Arc<CollectiveBasis>, amplitudes: Array1<C64>) -> Result<Self> {
        if amplitudes.len() != basis.dimension() {
            return invalid(format!(
                "state has {} amplitudes but the basis dimension is {}",
                amplitudes.len(),
                basis.dimension()
            ));
        }
        Ok(Self { basis, amplitudes })
    }

    pub fn zeros(basis: Arc<CollectiveBasis>) -> Self {
        let dim = basis.dimension();
        Self { basis, amplitudes: Array1::zeros(dim) }
    }

    /// All atoms in the first ground level.
    pub fn ground(basis: Arc<CollectiveBasis>) -> Self {
        let mut s = Self::zeros(basis);
        s.amplitudes[0] = C64::new(1.0, 0.0);
        s
    }

    pub fn basis(&self) -> &Arc<CollectiveBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut Array1<C64> {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Array1<C64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes.iter().zip(other.amplitudes.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    /// `|⟨other|self⟩|²`
    pub fn overlap_population(&self, other: &StateVector) -> f64 {
        other.inner(self).norm_sqr()
    }

    pub fn scaled(&self, factor: C64) -> StateVector {
        Self { basis: self.basis.clone(), amplitudes: &self.amplitudes * factor }
    }

    pub fn add(&self, other: &StateVector) -> StateVector {
        Self { basis: self.basis.clone(), amplitudes: &self.amplitudes + &other.amplitudes }
    }

    pub fn to_density(&self) -> DensityMatrix {
        let dim = self.amplitudes.len();
        let mut rho = Array2::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                rho[[i, j]] = self.amplitudes[i] * self.amplitudes[j].conj();
            }
        }
        DensityMatrix { basis: self.basis.clone(), entries: rho }
    }
}

#[derive(Clone, Debug)]
pub struct DensityMatrix {
    basis: Arc<CollectiveBasis>,
    entries: Array2<C64>,
}

impl DensityMatrix {
    pub fn new(basis: Arc<CollectiveBasis>, entries: Array2<C64>) -> Result<Self> {
        let dim = basis.dimension();
        if entries.dim() != (dim, dim) {
            return invalid(format!("density matrix shape {:?} does not match dimension {dim}", entries.dim()));
        }
        Ok(Self { basis, entries })
    }

    pub fn basis(&self) -> &Arc<CollectiveBasis> {
        &self.basis
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.diag().iter().map(|z| z.re).sum()
    }

    pub fn population(&self, k: usize) -> f64 {
        self.entries[[k, k]].re
    }

    /// `⟨φ|ρ|φ⟩`
    pub fn expectation_population(&self, state: &StateVector) -> f64 {
        let phi = state.amplitudes();
        let rho_phi = self.entries.dot(phi);
        phi.iter().zip(rho_phi.iter()).map(|(a, b)| (a.conj() * b).re).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.entries.nrows();
        let mut worst = 0.0f64;
        for i in 0..dim {
            for j in i..dim {
                worst = worst.max((self.entries[[i, j]] - self.entries[[j, i]].conj()).norm());
            }
        }
        worst
    }
}

/// Per-ensemble collective state used to build product states.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EnsembleState {
    /// Every atom of the ensemble in the first ground level.
    Ground,
    /// `(1/√N) Σ_j |0…x_j…0⟩` for level `x`.
    Single(String),
}

/// Product over ensembles of all-ground or symmetric singly-excited states.
pub fn collective_state(basis: &Arc<CollectiveBasis>, parts: &[EnsembleState]) -> Result<StateVector> {
    if parts.len() != basis.num_ensembles() {
        return invalid(format!("expected {} ensemble states, got {}", basis.num_ensembles(), parts.len()));
    }
    let scheme = basis.scheme();
    // Each ensemble contributes a list of (atom, level) choices; ground uses none.
    let mut excitations: Vec<Vec<Option<(usize, u8)>>> = Vec::with_capacity(parts.len());
    for (e, part) in parts.iter().enumerate() {
        match part {
            EnsembleState::Ground => excitations.push(vec![None]),
            EnsembleState::Single(label) => {
                let level = scheme.require(label)?;
                if level == 0 {
                    return invalid("the excited level must differ from the first ground level");
                }
                excitations.push(basis.atoms_in(e).map(|a| Some((a, level))).collect());
            }
        }
    }
    let norm: f64 = excitations.iter().map(|choices| choices.len() as f64).product::<f64>().sqrt();
    let amp = C64::new(1.0 / norm, 0.0);
    let mut state = StateVector::zeros(basis.clone());
    let mut stack = vec![0usize; excitations.len()];
    loop {
        let mut levels = vec![0u8; basis.num_atoms()];
        for (e, &choice) in stack.iter().enumerate() {
            if let Some((atom, level)) = excitations[e][choice] {
                levels[atom] = level;
            }
        }
        let k = basis
            .index_of(&Configuration(levels))
            .map_or_else(|| invalid("product state violates the blockade constraint"), Ok)?;
        state.amplitudes[k] += amp;
        // odometer increment
        let mut e = 0;
        loop {
            if e == stack.len() {
                return Ok(state);
            }
            stack[e] += 1;
            if stack[e] < excitations[e].len() {
                break;
            }
            stack[e] = 0;
            e += 1;
        }
    }
}

/// Normalized equal superposition with one atom of `ensemble` in `level` and
/// every other atom in the first ground level.
pub fn symmetric_singly_excited(basis: &Arc<CollectiveBasis>, level: &str, ensemble: usize) -> Result<StateVector> {
    if ensemble >= basis.num_ensembles() {
        return invalid(format!("ensemble {ensemble} does not exist"));
    }
    let parts: Vec<EnsembleState> = (0..basis.num_ensembles())
        .map(|e| if e == ensemble { EnsembleState::Single(level.to_owned()) } else { EnsembleState::Ground })
        .collect();
    collective_state(basis, &parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(basis: &CollectiveBasis) -> Vec<String> {
        basis.configurations().iter().map(|c| c.display(basis.scheme())).collect()
    }

    #[test]
    fn two_atom_stirap_order() {
        let basis = build_basis(LevelScheme::stirap(), &[2]).unwrap();
        assert_eq!(labels(&basis), ["00", "0e", "0r", "e0", "ee", "er", "r0", "re"]);
    }

    #[test]
    fn two_atom_arp_basis() {
        let basis = build_basis(LevelScheme::arp(), &[2]).unwrap();
        assert_eq!(basis.dimension(), 3);
        let mut l = labels(&basis);
        l.sort();
        assert_eq!(l, ["00", "0r", "r0"]);
    }

    #[test]
    fn single_atom_gate_scheme() {
        let basis = build_basis(LevelScheme::gate(), &[1]).unwrap();
        assert_eq!(basis.dimension(), 5);
    }

    #[test]
    fn four_atom_stirap_dimension() {
        let basis = build_basis(LevelScheme::stirap(), &[4]).unwrap();
        assert_eq!(basis.dimension(), 48);
        assert_eq!(expected_dimension(basis.scheme(), 4), 48);
    }

    #[test]
    fn two_ensembles_share_blockade() {
        let basis = build_basis(LevelScheme::gate(), &[1, 1]).unwrap();
        // 3·3 ground pairs + 2 Rydberg levels × 2 atoms × 3 partner levels
        assert_eq!(basis.dimension(), 9 + 12);
        assert!(basis.index_of_labels(&["r0", "r1"]).is_err());
        assert_eq!(basis.atoms_in(1), 1..2);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(build_basis(LevelScheme::stirap(), &[]).is_err());
        assert!(build_basis(LevelScheme::stirap(), &[0]).is_err());
        assert!(build_basis(LevelScheme::stirap(), &[1, 1, 1]).is_err());
        assert!(LevelScheme::new::<&str>(&[], &["r"]).is_err());
        assert!(LevelScheme::new(&["0"], &["0"]).is_err());
    }

    #[test]
    fn symmetric_states() {
        let basis = build_basis(LevelScheme::arp(), &[1]).unwrap();
        let s = symmetric_singly_excited(&basis, "r", 0).unwrap();
        assert_eq!(s.amplitudes()[basis.index_of_labels(&["r"]).unwrap()], C64::new(1.0, 0.0));

        let basis = build_basis(LevelScheme::stirap(), &[2]).unwrap();
        let s = symmetric_singly_excited(&basis, "e", 0).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for (k, c) in basis.configurations().iter().enumerate() {
            let expected = match c.display(basis.scheme()).as_str() {
                "e0" | "0e" => h,
                _ => 0.0,
            };
            assert!((s.amplitudes()[k].re - expected).abs() < 1e-15);
        }

        let basis = build_basis(LevelScheme::arp(), &[3]).unwrap();
        let s = symmetric_singly_excited(&basis, "r", 0).unwrap();
        let nonzero: Vec<f64> = s.amplitudes().iter().filter(|a| a.norm() > 0.0).map(|a| a.re).collect();
        assert_eq!(nonzero.len(), 3);
        assert!(nonzero.iter().all(|a| (a - 1.0 / 3f64.sqrt()).abs() < 1e-15));
        assert!((s.norm() - 1.0).abs() < 1e-15);

        assert!(symmetric_singly_excited(&basis, "x", 0).is_err());
        assert!(symmetric_singly_excited(&basis, "0", 0).is_err());
    }

    #[test]
    fn product_state_across_ensembles() {
        let basis = build_basis(LevelScheme::gate(), &[2, 2]).unwrap();
        let s = collective_state(&basis, &[EnsembleState::Single("1".into()), EnsembleState::Single("1".into())])
            .unwrap();
        assert_eq!(s.amplitudes().iter().filter(|a| a.norm() > 0.0).count(), 4);
        assert!((s.norm() - 1.0).abs() < 1e-14);
    }
}
