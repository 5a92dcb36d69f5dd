//! Occupation-number basis of the seven-qubit model and the reachable-state
//! generator.
//!
//! A basis state is the bitstring `p1 p2 m l1 l2 L k`, read most significant
//! bit first, so `|0000010⟩` encodes to `2`. The first two labels form the
//! photon subsystem, the remaining five the matter subsystem.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::operators::{interaction_images, jump_images, ModelParams};
use crate::scalar::Real;

/// Number of binary labels per basis state.
pub const QUBITS: usize = 7;
/// Size of the full product space.
pub const FULL_DIM: usize = 1 << QUBITS;
/// Number of photon-subsystem labels `(p1, p2)`.
pub const PHOTON_DIM: usize = 4;
/// Number of matter-subsystem labels `(m, l1, l2, L, k)`.
pub const MATTER_DIM: usize = 32;

/// The 26 states that take part in the evolution of the reference model,
/// in their published order.
pub const TABLE_I: [&str; 26] = [
    "0000000", "0100000", "1000000", "1100000", "0000010", "0000011", "0000100", "1000100",
    "0000110", "0000111", "0001000", "0101000", "0001010", "0001011", "0001100", "0001110",
    "0001111", "0010000", "0110000", "1010000", "1110000", "0010100", "1010100", "0011000",
    "0111000", "0011100",
];

/// Components of the initial molecular-orbital superposition, with the sign
/// each carries.
pub const INITIAL_COMPONENTS: [(&str, f64); 4] = [
    ("0000010", 1.0),
    ("0000110", -1.0),
    ("0001010", 1.0),
    ("0001110", -1.0),
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpaceError {
    #[error("seed list is empty")]
    EmptySeeds,
    #[error("seed {0} is not one of the 26 compatibility states")]
    SeedOutsideCompatTable(BasisState),
    #[error("occupation of {label:?} must be 0 or 1, got {value}")]
    InvalidOccupation { label: Label, value: u8 },
    #[error("state code {0} does not fit in seven bits")]
    InvalidCode(u32),
    #[error("cannot parse basis state from {0:?}")]
    Parse(String),
}

/// One of the seven binary registers of a basis state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    /// Photon count of mode Ω↑ (`p1`).
    PhotonUp,
    /// Photon count of mode Ω↓ (`p2`).
    PhotonDown,
    /// Phonon count of mode ω (`m`).
    Phonon,
    /// Spin-up electron in the excited orbital (`l1`).
    OrbitalUp,
    /// Spin-down electron in the excited orbital (`l2`).
    OrbitalDown,
    /// Covalent bond broken (`L`, 0 = formed).
    Bond,
    /// Nuclei in different cavities (`k`, 0 = same cavity).
    Nucleus,
}

impl Label {
    pub const ALL: [Label; QUBITS] = [
        Label::PhotonUp,
        Label::PhotonDown,
        Label::Phonon,
        Label::OrbitalUp,
        Label::OrbitalDown,
        Label::Bond,
        Label::Nucleus,
    ];

    /// Bit position inside the 7-bit code.
    pub const fn bit(self) -> u8 {
        match self {
            Label::PhotonUp => 6,
            Label::PhotonDown => 5,
            Label::Phonon => 4,
            Label::OrbitalUp => 3,
            Label::OrbitalDown => 2,
            Label::Bond => 1,
            Label::Nucleus => 0,
        }
    }
}

/// A configuration `|p1 p2 m l1 l2 L k⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisState(u8);

impl BasisState {
    pub const VACUUM: BasisState = BasisState(0);

    /// Builds a state from its seven occupations, in `p1 p2 m l1 l2 L k` order.
    pub fn new(occupations: [u8; QUBITS]) -> Result<Self, SpaceError> {
        let mut code = 0u8;
        for (label, &value) in Label::ALL.iter().zip(occupations.iter()) {
            if value > 1 {
                return Err(SpaceError::InvalidOccupation {
                    label: *label,
                    value,
                });
            }
            code |= value << label.bit();
        }
        Ok(BasisState(code))
    }

    pub fn from_code(code: u32) -> Result<Self, SpaceError> {
        if code as usize >= FULL_DIM {
            return Err(SpaceError::InvalidCode(code));
        }
        Ok(BasisState(code as u8))
    }

    /// Canonical 7-bit integer.
    #[inline]
    pub const fn code(self) -> u8 {
        self.0
    }

    #[inline]
    pub const fn get(self, label: Label) -> u8 {
        (self.0 >> label.bit()) & 1
    }

    /// Copy of `self` with `label` set to `value` (only the low bit is used).
    #[inline]
    pub const fn with(self, label: Label, value: u8) -> Self {
        let mask = 1u8 << label.bit();
        BasisState((self.0 & !mask) | ((value & 1) << label.bit()))
    }

    pub fn occupations(self) -> [u8; QUBITS] {
        Label::ALL.map(|l| self.get(l))
    }

    /// Bitstring form, e.g. `"0000010"`.
    pub fn bits(self) -> String {
        format!("{:07b}", self.0)
    }

    /// Parses `"0000010"` or `"|0000010>"`/`"|0000010⟩"`.
    pub fn parse(text: &str) -> Result<Self, SpaceError> {
        let t = text
            .trim()
            .trim_start_matches('|')
            .trim_end_matches('>')
            .trim_end_matches('⟩');
        if t.len() != QUBITS || !t.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(SpaceError::Parse(text.to_string()));
        }
        let code = u8::from_str_radix(t, 2).map_err(|_| SpaceError::Parse(text.to_string()))?;
        Ok(BasisState(code))
    }

    pub const fn photon(self) -> PhotonLabel {
        PhotonLabel(self.0 >> 5)
    }

    pub const fn matter(self) -> MatterLabel {
        MatterLabel(self.0 & 0b1_1111)
    }

    pub const fn join(photon: PhotonLabel, matter: MatterLabel) -> Self {
        BasisState((photon.0 << 5) | matter.0)
    }

    /// `p1 + p2 + m + l1 + l2 + L`, the quantity the interaction terms conserve.
    pub fn excitations(self) -> u8 {
        self.get(Label::PhotonUp)
            + self.get(Label::PhotonDown)
            + self.get(Label::Phonon)
            + self.get(Label::OrbitalUp)
            + self.get(Label::OrbitalDown)
            + self.get(Label::Bond)
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{:07b}⟩", self.0)
    }
}

/// Photon label `(p1, p2)`, stored as `2 p1 + p2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PhotonLabel(pub u8);

impl PhotonLabel {
    pub fn pair(self) -> (u8, u8) {
        (self.0 >> 1, self.0 & 1)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Matter label `(m, l1, l2, L, k)`, stored as a 5-bit integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MatterLabel(pub u8);

impl MatterLabel {
    pub fn tuple(self) -> (u8, u8, u8, u8, u8) {
        let b = self.0;
        ((b >> 4) & 1, (b >> 3) & 1, (b >> 2) & 1, (b >> 1) & 1, b & 1)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Canonical integer of a state.
pub fn encode(state: BasisState) -> u8 {
    state.code()
}

pub fn decode(code: u32) -> Result<BasisState, SpaceError> {
    BasisState::from_code(code)
}

/// Lossless split into photon and matter labels.
pub fn split_labels(state: BasisState) -> (PhotonLabel, MatterLabel) {
    (state.photon(), state.matter())
}

/// How a [`StateSpace`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceMode {
    /// All 128 states.
    Full,
    /// Reachability closure of the seeds.
    Closure,
    /// Closure restricted to the 26 compatibility states.
    TableCompat,
}

impl SpaceMode {
    pub fn name(self) -> &'static str {
        match self {
            SpaceMode::Full => "full",
            SpaceMode::Closure => "closure",
            SpaceMode::TableCompat => "table-compat",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text.trim() {
            "full" => Some(SpaceMode::Full),
            "closure" => Some(SpaceMode::Closure),
            "table-compat" | "table_compat" => Some(SpaceMode::TableCompat),
            _ => None,
        }
    }
}

/// Identity of a state set: bit `c` is set when the state with code `c` is
/// present. Operators and density matrices carry the tag of their space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpaceTag(pub u128);

/// Which interaction terms are switched on for which states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GatingPolicy {
    /// Tunneling only acts while the bond is broken (`L = 1`).
    pub tunneling_requires_broken_bond: bool,
    /// Bond formation/breaking only acts with co-located nuclei (`k = 0`).
    pub bond_term_requires_colocated: bool,
    /// Use `ζ(σ†σ + σσ†)` instead of `ζ(σ + σ†)` for the tunneling term.
    pub literal_tunneling_form: bool,
}

impl Default for GatingPolicy {
    fn default() -> Self {
        GatingPolicy {
            tunneling_requires_broken_bond: true,
            bond_term_requires_colocated: true,
            literal_tunneling_form: false,
        }
    }
}

/// Ordered, indexed set of basis states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    states: Vec<BasisState>,
    index: Vec<Option<usize>>,
    mode: SpaceMode,
}

impl StateSpace {
    /// Builds a space from arbitrary states; duplicates are removed and the
    /// result is sorted by code.
    pub fn from_states(states: impl IntoIterator<Item = BasisState>, mode: SpaceMode) -> Self {
        let mut present = [false; FULL_DIM];
        for s in states {
            present[s.code() as usize] = true;
        }
        let states: Vec<BasisState> = (0..FULL_DIM)
            .filter(|&c| present[c])
            .map(|c| BasisState(c as u8))
            .collect();
        let mut index = vec![None; FULL_DIM];
        for (i, s) in states.iter().enumerate() {
            index[s.code() as usize] = Some(i);
        }
        StateSpace {
            states,
            index,
            mode,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> BasisState {
        self.states[i]
    }

    pub fn index_of(&self, s: BasisState) -> Option<usize> {
        self.index[s.code() as usize]
    }

    pub fn contains(&self, s: BasisState) -> bool {
        self.index_of(s).is_some()
    }

    pub fn mode(&self) -> SpaceMode {
        self.mode
    }

    pub fn tag(&self) -> SpaceTag {
        SpaceTag(
            self.states
                .iter()
                .fold(0u128, |acc, s| acc | (1u128 << s.code())),
        )
    }

    /// Distinct matter labels present, ascending.
    pub fn matter_labels(&self) -> Vec<MatterLabel> {
        let mut seen = [false; MATTER_DIM];
        for s in &self.states {
            seen[s.matter().index()] = true;
        }
        (0..MATTER_DIM)
            .filter(|&b| seen[b])
            .map(|b| MatterLabel(b as u8))
            .collect()
    }

    /// Text dump, one `index<TAB>bitstring` line per state.
    pub fn dump(&self) -> String {
        let mut out = String::with_capacity(self.len() * 11);
        for (i, s) in self.states.iter().enumerate() {
            out.push_str(&format!("{}\t{}\n", i, s.bits()));
        }
        out
    }

    /// Parses the output of [`StateSpace::dump`].
    pub fn parse_dump(text: &str, mode: SpaceMode) -> Result<Self, SpaceError> {
        let mut states = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let bits = line
                .split('\t')
                .nth(1)
                .ok_or_else(|| SpaceError::Parse(line.to_string()))?;
            states.push(BasisState::parse(bits)?);
        }
        Ok(StateSpace::from_states(states, mode))
    }
}

/// The 26 compatibility states.
pub fn table_states() -> Vec<BasisState> {
    TABLE_I
        .iter()
        .map(|s| BasisState::parse(s).expect("table entries are valid bitstrings"))
        .collect()
}

/// The four seeds of the initial superposition.
pub fn initial_seeds() -> Vec<BasisState> {
    INITIAL_COMPONENTS
        .iter()
        .map(|(s, _)| BasisState::parse(s).expect("valid bitstring"))
        .collect()
}

/// All 128 states in canonical order.
pub fn full_space() -> StateSpace {
    StateSpace::from_states((0..FULL_DIM).map(|c| BasisState(c as u8)), SpaceMode::Full)
}

/// Breadth-first closure of `seeds` under the nonzero interaction terms and,
/// when `include_dissipation` is set, under the forward jump operators.
///
/// `SpaceMode::TableCompat` keeps only the 26 compatibility states, and
/// `SpaceMode::Full` ignores the closure and returns all 128 states.
pub fn generate_space<T: Real>(
    seeds: &[BasisState],
    params: &ModelParams<T>,
    gating: &GatingPolicy,
    include_dissipation: bool,
    mode: SpaceMode,
) -> Result<StateSpace, SpaceError> {
    if seeds.is_empty() {
        return Err(SpaceError::EmptySeeds);
    }
    if mode == SpaceMode::Full {
        return Ok(full_space());
    }
    let mut allowed = [true; FULL_DIM];
    if mode == SpaceMode::TableCompat {
        allowed = [false; FULL_DIM];
        for s in table_states() {
            allowed[s.code() as usize] = true;
        }
        if let Some(bad) = seeds.iter().find(|s| !allowed[s.code() as usize]) {
            return Err(SpaceError::SeedOutsideCompatTable(*bad));
        }
    }

    let mut seen = [false; FULL_DIM];
    let mut queue = VecDeque::new();
    for &s in seeds {
        if !seen[s.code() as usize] {
            seen[s.code() as usize] = true;
            queue.push_back(s);
        }
    }
    while let Some(s) = queue.pop_front() {
        let mut next: Vec<BasisState> = interaction_images(s, params, gating)
            .into_iter()
            .map(|(t, _)| t)
            .collect();
        if include_dissipation {
            next.extend(jump_images(s, params));
        }
        for t in next {
            let c = t.code() as usize;
            if allowed[c] && !seen[c] {
                seen[c] = true;
                queue.push_back(t);
            }
        }
    }
    Ok(StateSpace::from_states(
        (0..FULL_DIM)
            .filter(|&c| seen[c])
            .map(|c| BasisState(c as u8)),
        mode,
    ))
}
