//! Ladder and flip operators, the system Hamiltonian, and jump channels.
//!
//! Every bosonic mode is truncated at one quantum, so raising an occupied
//! mode gives zero. Matrices are dense and bound to the [`StateSpace`] they
//! were built on through its [`SpaceTag`].

use std::fmt::Write as _;
use std::ops::{Add, Mul};

use thiserror::Error;

use crate::scalar::{cre, hermiticity_error, lit, to_f64, CMatrix, Cx, Real};
use crate::statespace::{BasisState, GatingPolicy, Label, SpaceMode, SpaceTag, StateSpace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("image {image} of {state} is missing from a closure-mode space")]
    ImageOutsideSpace { state: BasisState, image: BasisState },
    #[error("operands are bound to different state spaces")]
    SpaceMismatch,
    #[error("model parameter {name} = {value} is invalid")]
    InvalidParameter { name: &'static str, value: f64 },
}

/// Bosonic mode of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    PhotonUp,
    PhotonDown,
    Phonon,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::PhotonUp, Mode::PhotonDown, Mode::Phonon];

    pub fn label(self) -> Label {
        match self {
            Mode::PhotonUp => Label::PhotonUp,
            Mode::PhotonDown => Label::PhotonDown,
            Mode::Phonon => Label::Phonon,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::PhotonUp => "photon_up",
            Mode::PhotonDown => "photon_down",
            Mode::Phonon => "phonon",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    Lower,
    Raise,
}

/// Two-level register acted on by a flip operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlipTarget {
    ElectronUp,
    ElectronDown,
    Bond,
    Nucleus,
}

impl FlipTarget {
    pub fn label(self) -> Label {
        match self {
            FlipTarget::ElectronUp => Label::OrbitalUp,
            FlipTarget::ElectronDown => Label::OrbitalDown,
            FlipTarget::Bond => Label::Bond,
            FlipTarget::Nucleus => Label::Nucleus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flip {
    /// `1 → 0`
    Down,
    /// `0 → 1`
    Up,
}

/// Physical parameters. Frequencies and couplings in rad/s, rates in 1/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams<T> {
    pub hbar: T,
    pub freq_up: T,
    pub freq_down: T,
    pub freq_phonon: T,
    pub g_up: T,
    pub g_down: T,
    pub g_bond: T,
    pub zeta: T,
    pub gamma_up: T,
    pub gamma_down: T,
    pub gamma_phonon: T,
    pub influx_up: T,
    pub influx_down: T,
    pub influx_phonon: T,
    /// Drop the free-evolution terms.
    pub interaction_picture: bool,
}

impl<T: Real> ModelParams<T> {
    /// Reference parameter set for coupling scale `g`: photon couplings and
    /// tunneling equal to `g`, bond coupling `0.5 g`, all free frequencies
    /// `10 g`, closed system.
    pub fn defaults(g: T) -> Self {
        let ten_g = g * lit(10.0);
        ModelParams {
            hbar: T::one(),
            freq_up: ten_g,
            freq_down: ten_g,
            freq_phonon: ten_g,
            g_up: g,
            g_down: g,
            g_bond: g * lit(0.5),
            zeta: g,
            gamma_up: T::zero(),
            gamma_down: T::zero(),
            gamma_phonon: T::zero(),
            influx_up: T::zero(),
            influx_down: T::zero(),
            influx_phonon: T::zero(),
            interaction_picture: false,
        }
    }

    /// Sets the three dissipation rates to `gamma`.
    pub fn with_uniform_dissipation(mut self, gamma: T) -> Self {
        self.gamma_up = gamma;
        self.gamma_down = gamma;
        self.gamma_phonon = gamma;
        self
    }

    pub fn dissipation_rate(&self, mode: Mode) -> T {
        match mode {
            Mode::PhotonUp => self.gamma_up,
            Mode::PhotonDown => self.gamma_down,
            Mode::Phonon => self.gamma_phonon,
        }
    }

    pub fn influx_rate(&self, mode: Mode) -> T {
        match mode {
            Mode::PhotonUp => self.influx_up,
            Mode::PhotonDown => self.influx_down,
            Mode::Phonon => self.influx_phonon,
        }
    }

    pub fn is_closed(&self) -> bool {
        Mode::ALL
            .iter()
            .all(|&m| self.dissipation_rate(m) == T::zero() && self.influx_rate(m) == T::zero())
    }

    fn named(&self) -> [(&'static str, T); 14] {
        [
            ("hbar", self.hbar),
            ("freq_up", self.freq_up),
            ("freq_down", self.freq_down),
            ("freq_phonon", self.freq_phonon),
            ("g_up", self.g_up),
            ("g_down", self.g_down),
            ("g_omega", self.g_bond),
            ("zeta", self.zeta),
            ("gamma_up", self.gamma_up),
            ("gamma_down", self.gamma_down),
            ("gamma_phonon", self.gamma_phonon),
            ("influx_up", self.influx_up),
            ("influx_down", self.influx_down),
            ("influx_phonon", self.influx_phonon),
        ]
    }

    pub fn validate(&self) -> Result<(), OperatorError> {
        for (name, value) in self.named() {
            let bad = !value.is_finite() || value < T::zero() || (name == "hbar" && value <= T::zero());
            if bad {
                return Err(OperatorError::InvalidParameter {
                    name,
                    value: to_f64(value),
                });
            }
        }
        Ok(())
    }

    /// Largest coupling, rate or (unless in the interaction picture) free
    /// frequency; the fastest time scale of the model.
    pub fn fastest_rate(&self) -> T {
        let mut v = [
            self.g_up,
            self.g_down,
            self.g_bond,
            self.zeta,
            self.gamma_up,
            self.gamma_down,
            self.gamma_phonon,
            self.influx_up,
            self.influx_down,
            self.influx_phonon,
        ]
        .to_vec();
        if !self.interaction_picture {
            v.extend([self.freq_up.abs(), self.freq_down.abs(), self.freq_phonon.abs()]);
        }
        v.into_iter().fold(T::zero(), |a, b| if b > a { b } else { a })
    }
}

/// Off-diagonal images of `s` under the interaction terms whose coupling is
/// nonzero, with their matrix elements `⟨image|H|s⟩`.
pub fn interaction_images<T: Real>(
    s: BasisState,
    params: &ModelParams<T>,
    gating: &GatingPolicy,
) -> Vec<(BasisState, T)> {
    let mut out = Vec::with_capacity(4);
    let bond_formed = s.get(Label::Bond) == 0;

    // g (a†σ + aσ†) σ_ω σ_ω†: photon exchange, only with the bond formed.
    for (photon, orbital, g) in [
        (Label::PhotonUp, Label::OrbitalUp, params.g_up),
        (Label::PhotonDown, Label::OrbitalDown, params.g_down),
    ] {
        if g == T::zero() || !bond_formed {
            continue;
        }
        match (s.get(photon), s.get(orbital)) {
            (0, 1) | (1, 0) => {
                let t = s.with(photon, 1 - s.get(photon)).with(orbital, 1 - s.get(orbital));
                out.push((t, g));
            }
            _ => {}
        }
    }

    // g_ω (a_ω† σ_ω + a_ω σ_ω†): bond formation emits a phonon.
    let bond_allowed = !gating.bond_term_requires_colocated || s.get(Label::Nucleus) == 0;
    if params.g_bond != T::zero() && bond_allowed {
        match (s.get(Label::Phonon), s.get(Label::Bond)) {
            (0, 1) | (1, 0) => {
                let t = s
                    .with(Label::Phonon, 1 - s.get(Label::Phonon))
                    .with(Label::Bond, 1 - s.get(Label::Bond));
                out.push((t, params.g_bond));
            }
            _ => {}
        }
    }

    // ζ (σ_n + σ_n†): nuclear tunneling.
    let tunnel_allowed = !gating.tunneling_requires_broken_bond || !bond_formed;
    if params.zeta != T::zero() && tunnel_allowed && !gating.literal_tunneling_form {
        let t = s.with(Label::Nucleus, 1 - s.get(Label::Nucleus));
        out.push((t, params.zeta));
    }
    out
}

/// Diagonal element `⟨s|H|s⟩`.
pub fn diagonal_energy<T: Real>(s: BasisState, params: &ModelParams<T>, gating: &GatingPolicy) -> T {
    let mut e = T::zero();
    if !params.interaction_picture {
        let n = |l: Label| lit::<T>(s.get(l) as f64);
        // ħΩ a†a terms and ħΩ σ†σ terms; σ_ω†σ_ω projects onto L = 1.
        e += params.hbar
            * (params.freq_up * (n(Label::PhotonUp) + n(Label::OrbitalUp))
                + params.freq_down * (n(Label::PhotonDown) + n(Label::OrbitalDown))
                + params.freq_phonon * (n(Label::Phonon) + n(Label::Bond)));
    }
    if gating.literal_tunneling_form {
        let tunnel_allowed =
            !gating.tunneling_requires_broken_bond || s.get(Label::Bond) == 1;
        if tunnel_allowed {
            // σ†σ + σσ† is the identity on the nuclear register.
            e += params.zeta;
        }
    }
    e
}

/// States reached from `s` by one forward jump: every occupied mode can lose
/// its quantum, and modes with a positive influx rate can gain one.
pub fn jump_images<T: Real>(s: BasisState, params: &ModelParams<T>) -> Vec<BasisState> {
    let mut out = Vec::new();
    for mode in Mode::ALL {
        let l = mode.label();
        if s.get(l) == 1 {
            out.push(s.with(l, 0));
        } else if params.influx_rate(mode) > T::zero() {
            out.push(s.with(l, 1));
        }
    }
    out
}

/// Dense complex operator bound to one state space.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix<T: Real> {
    matrix: CMatrix<T>,
    tag: SpaceTag,
}

impl<T: Real> OperatorMatrix<T> {
    pub fn new(matrix: CMatrix<T>, tag: SpaceTag) -> Self {
        assert!(matrix.is_square(), "operator matrices are square");
        OperatorMatrix { matrix, tag }
    }

    pub fn zeros(space: &StateSpace) -> Self {
        OperatorMatrix::new(CMatrix::zeros(space.len(), space.len()), space.tag())
    }

    pub fn identity(space: &StateSpace) -> Self {
        OperatorMatrix::new(CMatrix::identity(space.len(), space.len()), space.tag())
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.matrix
    }

    pub fn tag(&self) -> SpaceTag {
        self.tag
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dagger(&self) -> Self {
        OperatorMatrix::new(self.matrix.adjoint(), self.tag)
    }

    pub fn try_mul(&self, rhs: &Self) -> Result<Self, OperatorError> {
        if self.tag != rhs.tag {
            return Err(OperatorError::SpaceMismatch);
        }
        Ok(OperatorMatrix::new(&self.matrix * &rhs.matrix, self.tag))
    }

    pub fn try_add(&self, rhs: &Self) -> Result<Self, OperatorError> {
        if self.tag != rhs.tag {
            return Err(OperatorError::SpaceMismatch);
        }
        Ok(OperatorMatrix::new(&self.matrix + &rhs.matrix, self.tag))
    }

    pub fn commutator(&self, rhs: &Self) -> Result<Self, OperatorError> {
        if self.tag != rhs.tag {
            return Err(OperatorError::SpaceMismatch);
        }
        Ok(OperatorMatrix::new(
            &self.matrix * &rhs.matrix - &rhs.matrix * &self.matrix,
            self.tag,
        ))
    }

    pub fn hermiticity_error(&self) -> T {
        hermiticity_error(&self.matrix)
    }

    /// Nonzero entries as `row col re im` lines.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let n = self.dim();
        for i in 0..n {
            for j in 0..n {
                let z = self.matrix[(i, j)];
                if z.re != T::zero() || z.im != T::zero() {
                    let _ = writeln!(out, "{} {} {:e} {:e}", i, j, to_f64(z.re), to_f64(z.im));
                }
            }
        }
        out
    }
}

impl<'a, T: Real> Mul for &'a OperatorMatrix<T> {
    type Output = OperatorMatrix<T>;

    fn mul(self, rhs: Self) -> OperatorMatrix<T> {
        self.try_mul(rhs).expect("operators bound to the same space")
    }
}

impl<'a, T: Real> Add for &'a OperatorMatrix<T> {
    type Output = OperatorMatrix<T>;

    fn add(self, rhs: Self) -> OperatorMatrix<T> {
        self.try_add(rhs).expect("operators bound to the same space")
    }
}

fn place<T: Real>(
    m: &mut CMatrix<T>,
    space: &StateSpace,
    from: BasisState,
    to: BasisState,
    value: Cx<T>,
) -> Result<(), OperatorError> {
    let col = space.index_of(from).expect("source state belongs to the space");
    match space.index_of(to) {
        Some(row) => {
            m[(row, col)] += value;
            Ok(())
        }
        None if space.mode() == SpaceMode::Closure => Err(OperatorError::ImageOutsideSpace {
            state: from,
            image: to,
        }),
        None => Ok(()),
    }
}

fn single_register<T: Real>(
    space: &StateSpace,
    label: Label,
    from_value: u8,
) -> Result<OperatorMatrix<T>, OperatorError> {
    let mut m = CMatrix::zeros(space.len(), space.len());
    for &s in space.states() {
        if s.get(label) == from_value {
            place(&mut m, space, s, s.with(label, 1 - from_value), cre(T::one()))?;
        }
    }
    Ok(OperatorMatrix::new(m, space.tag()))
}

/// Annihilation (`Lower`) or creation (`Raise`) operator of `mode`.
pub fn ladder<T: Real>(
    mode: Mode,
    direction: Ladder,
    space: &StateSpace,
) -> Result<OperatorMatrix<T>, OperatorError> {
    // a|1⟩ = |0⟩ and a†|0⟩ = |1⟩; a†|1⟩ leaves the one-quantum truncation.
    let from = match direction {
        Ladder::Lower => 1,
        Ladder::Raise => 0,
    };
    single_register(space, mode.label(), from)
}

/// Two-level lowering (`Down`) or raising (`Up`) operator of `target`.
pub fn flip<T: Real>(
    target: FlipTarget,
    direction: Flip,
    space: &StateSpace,
) -> Result<OperatorMatrix<T>, OperatorError> {
    let from = match direction {
        Flip::Down => 1,
        Flip::Up => 0,
    };
    single_register(space, target.label(), from)
}

/// System Hamiltonian on `space`.
pub fn build_hamiltonian<T: Real>(
    params: &ModelParams<T>,
    space: &StateSpace,
    gating: &GatingPolicy,
) -> Result<OperatorMatrix<T>, OperatorError> {
    params.validate()?;
    let n = space.len();
    let mut m = CMatrix::zeros(n, n);
    for (i, &s) in space.states().iter().enumerate() {
        m[(i, i)] = cre(diagonal_energy(s, params, gating));
        for (t, coupling) in interaction_images(s, params, gating) {
            place(&mut m, space, s, t, cre(coupling))?;
        }
    }
    Ok(OperatorMatrix::new(m, space.tag()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Dissipation,
    Influx,
}

/// One Lindblad channel `γ (A ρ A† − ½{ρ, A†A})`. For influx channels `op`
/// already holds the creation operator.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpChannel<T: Real> {
    pub op: OperatorMatrix<T>,
    pub rate: T,
    pub kind: ChannelKind,
    pub mode: Mode,
}

/// Dissipation channels for every mode with a positive rate, followed by
/// influx channels for every mode with a positive influx rate.
pub fn build_jump_channels<T: Real>(
    params: &ModelParams<T>,
    space: &StateSpace,
) -> Result<Vec<JumpChannel<T>>, OperatorError> {
    params.validate()?;
    let mut out = Vec::new();
    for mode in Mode::ALL {
        let rate = params.dissipation_rate(mode);
        if rate > T::zero() {
            out.push(JumpChannel {
                op: ladder(mode, Ladder::Lower, space)?,
                rate,
                kind: ChannelKind::Dissipation,
                mode,
            });
        }
    }
    for mode in Mode::ALL {
        let rate = params.influx_rate(mode);
        if rate > T::zero() {
            out.push(JumpChannel {
                op: ladder(mode, Ladder::Raise, space)?,
                rate,
                kind: ChannelKind::Influx,
                mode,
            });
        }
    }
    Ok(out)
}

/// Diagonal operator `p1 + p2 + m + l1 + l2 + L`.
pub fn excitation_number<T: Real>(space: &StateSpace) -> OperatorMatrix<T> {
    let mut m = CMatrix::zeros(space.len(), space.len());
    for (i, s) in space.states().iter().enumerate() {
        m[(i, i)] = cre(lit(s.excitations() as f64));
    }
    OperatorMatrix::new(m, space.tag())
}
