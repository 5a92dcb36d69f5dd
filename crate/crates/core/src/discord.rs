//! Partial traces, entropies and the photon/matter quantum discord
//! `D(B:A) = I(A:B) − J(B:A)`, with `J` optimized over product projective
//! measurements on the two photon qubits.

use std::fmt::Write as _;

use nalgebra::linalg::SymmetricEigen;
use thiserror::Error;

use crate::dynamics::DensityMatrix;
use crate::scalar::{cabs, cre, cx, hermitian_eigenvalues, lit, to_f64, trace_re, CMatrix, Cx, Real};
use crate::statespace::{SpaceTag, StateSpace, PHOTON_DIM};

/// Eigenvalues at or below this weight contribute nothing to an entropy.
pub const ENTROPY_FLOOR: f64 = 1e-12;
/// Outcomes at or below this probability contribute nothing to `Σ p_k S(ρ_k)`.
pub const OUTCOME_FLOOR: f64 = 1e-12;
/// Angle configurations within this many nats of the minimum count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;
/// Distinct grid bases the local refinement starts from.
pub const REFINE_STARTS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscordError {
    #[error("not a density matrix: {0}")]
    NotDensityMatrix(String),
    #[error("density matrix is not bound to the given state space")]
    SpaceMismatch,
    #[error("measurement angle {name} = {value} is outside its range")]
    AngleOutOfRange { name: &'static str, value: f64 },
    #[error("invalid search settings: {0}")]
    InvalidSearch(String),
}

/// Angles of a product measurement basis on the two photon qubits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementConfig<T> {
    /// Polar angle for `p1`, in `[0, π/2]`.
    pub theta: T,
    /// Polar angle for `p2`, in `[0, π/2]`.
    pub theta_prime: T,
    /// Phase for `p1`, in `[0, 2π]`.
    pub phi: T,
    /// Phase for `p2`, in `[0, 2π]`.
    pub phi_prime: T,
    /// Use `θ′ = θ`.
    pub tie_thetas: bool,
    /// Use `φ′ = φ`.
    pub tie_phis: bool,
    /// Use `φ = φ′ = 0`.
    pub zero_phases: bool,
}

impl<T: Real> MeasurementConfig<T> {
    pub fn new(theta: T, theta_prime: T, phi: T, phi_prime: T) -> Self {
        MeasurementConfig {
            theta,
            theta_prime,
            phi,
            phi_prime,
            tie_thetas: false,
            tie_phis: false,
            zero_phases: false,
        }
    }

    /// Angles `(θ, θ′, φ, φ′)` after applying the tie flags.
    pub fn angles(&self) -> [T; 4] {
        let theta_prime = if self.tie_thetas { self.theta } else { self.theta_prime };
        let (phi, phi_prime) = if self.zero_phases {
            (T::zero(), T::zero())
        } else if self.tie_phis {
            (self.phi, self.phi)
        } else {
            (self.phi, self.phi_prime)
        };
        [self.theta, theta_prime, phi, phi_prime]
    }

    /// Copy with the tie flags applied to the stored angles.
    pub fn resolved(&self) -> Self {
        let [theta, theta_prime, phi, phi_prime] = self.angles();
        MeasurementConfig {
            theta,
            theta_prime,
            phi,
            phi_prime,
            ..*self
        }
    }
}

fn check_angles<T: Real>(cfg: &MeasurementConfig<T>) -> Result<(), DiscordError> {
    let [theta, theta_prime, phi, phi_prime] = cfg.angles();
    let half_pi = T::frac_pi_2();
    let two_pi = T::two_pi();
    for (name, v, hi) in [
        ("theta", theta, half_pi),
        ("theta_prime", theta_prime, half_pi),
        ("phi", phi, two_pi),
        ("phi_prime", phi_prime, two_pi),
    ] {
        if !(v >= T::zero() && v <= hi) {
            return Err(DiscordError::AngleOutOfRange {
                name,
                value: to_f64(v),
            });
        }
    }
    Ok(())
}

/// Orthonormal single-qubit basis `(cos θ, sin θ e^{iφ})`, `(sin θ e^{−iφ}, −cos θ)`.
fn qubit_basis<T: Real>(theta: T, phi: T) -> [[Cx<T>; 2]; 2] {
    let (s, c) = theta.sin_cos();
    let e = cx(phi.cos(), phi.sin());
    [
        [cre(c), e * cre(s)],
        [e.conj() * cre(s), cre(-c)],
    ]
}

/// Outcome `k` pairs basis vector `k mod 2` of `p1` with `k / 2` of `p2`.
fn product_vectors<T: Real>(angles: [T; 4]) -> [[Cx<T>; PHOTON_DIM]; 4] {
    let [theta, theta_prime, phi, phi_prime] = angles;
    let u = qubit_basis(theta, phi);
    let v = qubit_basis(theta_prime, phi_prime);
    let mut out = [[cre(T::zero()); PHOTON_DIM]; 4];
    for (k, row) in out.iter_mut().enumerate() {
        let (i, j) = (k % 2, k / 2);
        for a1 in 0..2 {
            for a2 in 0..2 {
                row[2 * a1 + a2] = u[i][a1] * v[j][a2];
            }
        }
    }
    out
}

/// Four rank-one projectors on the photon space.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorSet<T: Real> {
    pub projectors: [CMatrix<T>; 4],
    /// Unit vectors `|b_k⟩` with `Π_k = |b_k⟩⟨b_k|`.
    pub vectors: [[Cx<T>; PHOTON_DIM]; 4],
    pub source_config: MeasurementConfig<T>,
}

/// `Π_k = Pr ⊗ Pr′` for the bases selected by `config`.
pub fn projector_set<T: Real>(config: &MeasurementConfig<T>) -> Result<ProjectorSet<T>, DiscordError> {
    check_angles(config)?;
    let vectors = product_vectors(config.angles());
    let projectors = vectors.map(|b| CMatrix::from_fn(PHOTON_DIM, PHOTON_DIM, |i, j| b[i] * b[j].conj()));
    Ok(ProjectorSet {
        projectors,
        vectors,
        source_config: *config,
    })
}

/// Photon and matter coordinates of every state of a space.
#[derive(Debug, Clone)]
pub struct Bipartition {
    photon: Vec<usize>,
    matter: Vec<usize>,
    matter_dim: usize,
    tag: SpaceTag,
}

impl Bipartition {
    pub fn new(space: &StateSpace) -> Self {
        let labels = space.matter_labels();
        let matter = space
            .states()
            .iter()
            .map(|s| labels.binary_search(&s.matter()).expect("label listed"))
            .collect();
        Bipartition {
            photon: space.states().iter().map(|s| s.photon().index()).collect(),
            matter,
            matter_dim: labels.len(),
            tag: space.tag(),
        }
    }

    pub fn matter_dim(&self) -> usize {
        self.matter_dim
    }

    fn check<T: Real>(&self, rho: &DensityMatrix<T>) -> Result<(), DiscordError> {
        if rho.tag() != self.tag || rho.dim() != self.photon.len() {
            return Err(DiscordError::SpaceMismatch);
        }
        Ok(())
    }
}

/// `ρ_A = Tr_B ρ` on the four photon labels `2·p1 + p2`.
pub fn partial_trace_b<T: Real>(
    rho: &DensityMatrix<T>,
    space: &StateSpace,
) -> Result<DensityMatrix<T>, DiscordError> {
    let part = Bipartition::new(space);
    part.check(rho)?;
    Ok(DensityMatrix::new(reduce_b(rho.matrix(), &part), SpaceTag(0)))
}

fn reduce_b<T: Real>(m: &CMatrix<T>, part: &Bipartition) -> CMatrix<T> {
    let n = m.nrows();
    let mut out = CMatrix::zeros(PHOTON_DIM, PHOTON_DIM);
    for i in 0..n {
        for j in 0..n {
            if part.matter[i] == part.matter[j] {
                out[(part.photon[i], part.photon[j])] += m[(i, j)];
            }
        }
    }
    out
}

/// `ρ_B = Tr_A ρ`, indexed by the matter labels present in the space in
/// ascending order.
pub fn partial_trace_a<T: Real>(
    rho: &DensityMatrix<T>,
    space: &StateSpace,
) -> Result<DensityMatrix<T>, DiscordError> {
    let part = Bipartition::new(space);
    part.check(rho)?;
    Ok(DensityMatrix::new(reduce_a(rho.matrix(), &part), SpaceTag(0)))
}

fn reduce_a<T: Real>(m: &CMatrix<T>, part: &Bipartition) -> CMatrix<T> {
    let n = m.nrows();
    let mut out = CMatrix::zeros(part.matter_dim, part.matter_dim);
    for i in 0..n {
        for j in 0..n {
            if part.photon[i] == part.photon[j] {
                out[(part.matter[i], part.matter[j])] += m[(i, j)];
            }
        }
    }
    out
}

fn entropy_of_spectrum<T: Real>(values: &[T], total: T) -> T {
    let floor = lit::<T>(ENTROPY_FLOOR);
    let mut s = T::zero();
    for &v in values {
        let p = v / total;
        if p > floor {
            s -= p * p.ln();
        }
    }
    s.max(T::zero())
}

/// `S(ρ) = −tr(ρ ln ρ)` in nats.
pub fn von_neumann_entropy<T: Real>(rho: &DensityMatrix<T>) -> Result<T, DiscordError> {
    let tr = rho.trace();
    if (tr - T::one()).abs() > lit(1e-6) {
        return Err(DiscordError::NotDensityMatrix(format!("trace {:e}", tr)));
    }
    let ev = rho.eigenvalues();
    if let Some(&min) = ev.first() {
        if min < lit(-1e-6) {
            return Err(DiscordError::NotDensityMatrix(format!("eigenvalue {:e}", min)));
        }
    }
    Ok(entropy_of_spectrum(&ev, T::one()))
}

/// `I(A:B) = S(A) + S(B) − S(AB)`.
pub fn mutual_information<T: Real>(rho: &DensityMatrix<T>, space: &StateSpace) -> Result<T, DiscordError> {
    let a = von_neumann_entropy(&partial_trace_b(rho, space)?)?;
    let b = von_neumann_entropy(&partial_trace_a(rho, space)?)?;
    let ab = von_neumann_entropy(rho)?;
    Ok(a + b - ab)
}

/// Result of measuring the photon qubits with one projector set.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredOutcome<T: Real> {
    /// `Σ_k p_k S(ρ_k)` in nats.
    pub value: T,
    pub probs: [T; 4],
    /// Normalized matter states after each outcome; zero for outcomes below
    /// [`OUTCOME_FLOOR`].
    pub states: Vec<CMatrix<T>>,
}

/// Measures `Π_k ⊗ I_B` on `rho` by explicit sandwich and partial trace.
pub fn measured_conditional_entropy<T: Real>(
    rho: &DensityMatrix<T>,
    space: &StateSpace,
    pset: &ProjectorSet<T>,
) -> Result<MeasuredOutcome<T>, DiscordError> {
    let part = Bipartition::new(space);
    part.check(rho)?;
    let nb = part.matter_dim;
    let big = PHOTON_DIM * nb;
    // Embed into the product space C⁴ ⊗ C^{nB}.
    let pos: Vec<usize> = (0..rho.dim()).map(|i| part.photon[i] * nb + part.matter[i]).collect();
    let mut full = CMatrix::zeros(big, big);
    for i in 0..rho.dim() {
        for j in 0..rho.dim() {
            full[(pos[i], pos[j])] = rho.matrix()[(i, j)];
        }
    }
    let floor = lit::<T>(OUTCOME_FLOOR);
    let mut value = T::zero();
    let mut probs = [T::zero(); 4];
    let mut states = Vec::with_capacity(4);
    for (k, proj) in pset.projectors.iter().enumerate() {
        let lift = proj.kronecker(&CMatrix::<T>::identity(nb, nb));
        let post = &lift * &full * lift.adjoint();
        let mut reduced = CMatrix::zeros(nb, nb);
        for a in 0..PHOTON_DIM {
            reduced += post.view((a * nb, a * nb), (nb, nb));
        }
        let p = trace_re(&reduced);
        probs[k] = p;
        if p > floor {
            reduced /= cre(p);
            value += p * entropy_of_spectrum(&hermitian_eigenvalues(&reduced), T::one());
            states.push(reduced);
        } else {
            states.push(CMatrix::zeros(nb, nb));
        }
    }
    Ok(MeasuredOutcome { value, probs, states })
}

/// Snapshot factored as `ρ = W W†`, split into per-photon-label blocks, for
/// repeated conditional-entropy evaluations.
#[derive(Debug, Clone)]
pub struct PreparedState<T: Real> {
    blocks: Vec<CMatrix<T>>,
    rank: usize,
    matter_dim: usize,
}

impl<T: Real> PreparedState<T> {
    pub fn new(rho: &DensityMatrix<T>, part: &Bipartition) -> Result<Self, DiscordError> {
        part.check(rho)?;
        let eig = SymmetricEigen::new(rho.matrix().clone());
        let cutoff = lit::<T>(1e-14);
        let kept: Vec<usize> = (0..rho.dim()).filter(|&i| eig.eigenvalues[i] > cutoff).collect();
        let nb = part.matter_dim;
        let rank = kept.len();
        let mut blocks = vec![CMatrix::zeros(nb, rank); PHOTON_DIM];
        for (c, &col) in kept.iter().enumerate() {
            let w = eig.eigenvalues[col].sqrt();
            for i in 0..rho.dim() {
                blocks[part.photon[i]][(part.matter[i], c)] = eig.eigenvectors[(i, col)] * cre(w);
            }
        }
        Ok(PreparedState {
            blocks,
            rank,
            matter_dim: nb,
        })
    }

    /// `Σ p_k S(ρ_k)` and the outcome probabilities for the given angles.
    pub fn conditional_entropy(&self, angles: [T; 4]) -> (T, [T; 4]) {
        let vectors = product_vectors(angles);
        let floor = lit::<T>(OUTCOME_FLOOR);
        let mut value = T::zero();
        let mut probs = [T::zero(); 4];
        let mut x = CMatrix::zeros(self.matter_dim, self.rank);
        for (k, b) in vectors.iter().enumerate() {
            x.fill(cre(T::zero()));
            for a in 0..PHOTON_DIM {
                let c = b[a].conj();
                if c != cre(T::zero()) {
                    x.zip_apply(&self.blocks[a], |xv, w| *xv += c * w);
                }
            }
            let p = x.iter().fold(T::zero(), |acc, z| acc + z.re * z.re + z.im * z.im);
            probs[k] = p;
            if p <= floor {
                continue;
            }
            let gram = if self.rank <= self.matter_dim {
                x.adjoint() * &x
            } else {
                &x * x.adjoint()
            };
            let ev = small_hermitian_eigenvalues(&gram);
            value += p * entropy_of_spectrum(&ev, p);
        }
        (value, probs)
    }
}

fn small_hermitian_eigenvalues<T: Real>(m: &CMatrix<T>) -> Vec<T> {
    match m.nrows() {
        1 => vec![m[(0, 0)].re],
        2 => {
            let a = m[(0, 0)].re;
            let d = m[(1, 1)].re;
            let b = cabs(m[(0, 1)]);
            let mean = (a + d) * lit(0.5);
            let half = (a - d) * lit(0.5);
            let r = (half * half + b * b).sqrt();
            vec![mean - r, mean + r]
        }
        _ => hermitian_eigenvalues(m),
    }
}

/// Grid search followed by local refinement over the measurement family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig<T> {
    /// Grid points over `[0, π/2]` per polar angle.
    pub theta_points: usize,
    /// Grid points over `[0, 2π]` per phase.
    pub phi_points: usize,
    pub tie_thetas: bool,
    pub tie_phis: bool,
    pub zero_phases: bool,
    pub refine: bool,
    /// Refinement stops once the step falls below this many radians.
    pub angle_tolerance: T,
}

impl<T: Real> Default for SearchConfig<T> {
    fn default() -> Self {
        SearchConfig {
            theta_points: 17,
            phi_points: 17,
            tie_thetas: false,
            tie_phis: false,
            zero_phases: false,
            refine: true,
            angle_tolerance: lit(1e-4),
        }
    }
}

impl<T: Real> SearchConfig<T> {
    /// Same family with the grid density doubled.
    pub fn doubled(&self) -> Self {
        SearchConfig {
            theta_points: 2 * self.theta_points - 1,
            phi_points: 2 * self.phi_points - 1,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<(), DiscordError> {
        if self.theta_points < 2 || self.phi_points < 2 {
            return Err(DiscordError::InvalidSearch("grids need at least two points per angle".into()));
        }
        if !(self.angle_tolerance > T::zero()) {
            return Err(DiscordError::InvalidSearch("angle tolerance must be positive".into()));
        }
        Ok(())
    }

    fn template(&self) -> MeasurementConfig<T> {
        MeasurementConfig {
            theta: T::zero(),
            theta_prime: T::zero(),
            phi: T::zero(),
            phi_prime: T::zero(),
            tie_thetas: self.tie_thetas,
            tie_phis: self.tie_phis,
            zero_phases: self.zero_phases,
        }
    }
}

/// Canonical id of the single-qubit basis at grid point `(i, j)`: the poles
/// give the computational basis for every phase, `φ = 2π` repeats `φ = 0`, and
/// `(θ, φ)` spans the same basis as `(π/2 − θ, φ + π)`.
fn canonical_qubit(i: usize, j: usize, nt: usize, np: usize) -> usize {
    if i == 0 || i == nt - 1 {
        return 0;
    }
    let period = np - 1;
    let j = j % period;
    let mut best = (i, j);
    if period % 2 == 0 {
        let alt = (nt - 1 - i, (j + period / 2) % period);
        best = best.min(alt);
    }
    1 + (best.0 - 1) * period + best.1
}

/// Outcome of the measurement search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult<T: Real> {
    /// Minimal `Σ p_k S(ρ_k)`.
    pub min_conditional_entropy: T,
    pub argmin: MeasurementConfig<T>,
    pub probs: [T; 4],
    pub evaluations: usize,
}

/// Minimizes the measured conditional entropy over the family of `search`.
pub fn minimize_conditional_entropy<T: Real>(
    state: &PreparedState<T>,
    search: &SearchConfig<T>,
) -> Result<SearchResult<T>, DiscordError> {
    search.validate()?;
    let nt = search.theta_points;
    let np = if search.zero_phases { 1 } else { search.phi_points };
    let tgrid: Vec<T> = (0..nt)
        .map(|i| T::frac_pi_2() * lit(i as f64 / (nt - 1) as f64))
        .collect();
    let pgrid: Vec<T> = (0..np)
        .map(|j| if np == 1 { T::zero() } else { T::two_pi() * lit(j as f64 / (np - 1) as f64) })
        .collect();
    let template = search.template();
    let canon = |i: usize, j: usize| {
        if np == 1 {
            if i == 0 || i == nt - 1 {
                0
            } else {
                i
            }
        } else {
            canonical_qubit(i, j, nt, np)
        }
    };
    let ids = 1 + nt * np;
    let mut memo: Vec<Option<(T, [T; 4])>> = vec![None; ids * ids];

    let i2_range = |i1: usize| if search.tie_thetas { i1..i1 + 1 } else { 0..nt };
    let j2_range = |j1: usize| if search.tie_phis || search.zero_phases { j1..j1 + 1 } else { 0..np };
    let floor = lit::<T>(OUTCOME_FLOOR);

    // Raw tuples in lexicographic order of (θ, θ′, φ, φ′).
    let mut visited: Vec<([usize; 4], T)> = Vec::new();
    let mut evaluations = 0;
    'grid: for i1 in 0..nt {
        for i2 in i2_range(i1) {
            for j1 in 0..np {
                for j2 in j2_range(j1) {
                    let key = canon(i1, j1) * ids + canon(i2, j2);
                    let v = match memo[key] {
                        Some((v, _)) => v,
                        None => {
                            let r = state.conditional_entropy([tgrid[i1], tgrid[i2], pgrid[j1], pgrid[j2]]);
                            evaluations += 1;
                            memo[key] = Some(r);
                            r.0
                        }
                    };
                    visited.push(([i1, i2, j1, j2], v));
                    if v <= floor {
                        break 'grid;
                    }
                }
            }
        }
    }
    let angles_of = |[i1, i2, j1, j2]: [usize; 4]| [tgrid[i1], tgrid[i2], pgrid[j1], pgrid[j2]];
    let tol = lit::<T>(TIE_TOLERANCE);
    if !search.refine || visited.last().is_some_and(|&(_, v)| v <= floor) {
        let min = visited.iter().fold(visited[0].1, |m, &(_, v)| m.min(v));
        let &(idx, _) = visited.iter().find(|&&(_, v)| v <= min + tol).expect("minimum is attained");
        let angles = angles_of(idx);
        let (v, probs) = state.conditional_entropy(angles);
        return Ok(SearchResult {
            min_conditional_entropy: v,
            argmin: with_angles(template, angles),
            probs,
            evaluations: evaluations + 1,
        });
    }

    // Refine from the best few distinct bases: a single start can stall on
    // the θ = 0 pole, where the phase coordinate has no effect.
    let mut order: Vec<usize> = (0..visited.len()).collect();
    order.sort_by(|&a, &b| visited[a].1.partial_cmp(&visited[b].1).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    let mut seen = Vec::new();
    let mut starts = Vec::new();
    for &k in &order {
        let [i1, i2, j1, j2] = visited[k].0;
        let key = canon(i1, j1) * ids + canon(i2, j2);
        if !seen.contains(&key) {
            seen.push(key);
            starts.push(visited[k].0);
            if starts.len() == REFINE_STARTS {
                break;
            }
        }
    }
    let free = free_coordinates(search);
    let mut best: Option<([T; 4], (T, [T; 4]))> = None;
    for idx in starts {
        let mut angles = angles_of(idx);
        let mut current = state.conditional_entropy(angles);
        evaluations += 1;
        let mut steps: Vec<T> = free
            .iter()
            .map(|&c| if c < 2 { tgrid[1] } else if np > 1 { pgrid[1] } else { T::zero() })
            .collect();
        while current.0 > floor {
            let mut improved = false;
            for (slot, &c) in free.iter().enumerate() {
                for sign in [T::one(), -T::one()] {
                    let mut trial = angles;
                    trial[c] = clamp_angle(c, trial[c] + sign * steps[slot]);
                    tie_angles(&mut trial, search);
                    let r = state.conditional_entropy(trial);
                    evaluations += 1;
                    if r.0 < current.0 {
                        current = r;
                        angles = trial;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                let mut done = true;
                for s in steps.iter_mut() {
                    *s *= lit(0.5);
                    if *s >= search.angle_tolerance {
                        done = false;
                    }
                }
                if done {
                    break;
                }
            }
        }
        let replace = match &best {
            None => true,
            Some((a, b)) => current.0 < b.0 - tol || (current.0 <= b.0 + tol && lex_less(&angles, a)),
        };
        if replace {
            best = Some((angles, current));
        }
    }
    let (best_angles, best) = best.expect("at least one start");

    Ok(SearchResult {
        min_conditional_entropy: best.0,
        argmin: with_angles(template, best_angles),
        probs: best.1,
        evaluations,
    })
}

fn with_angles<T: Real>(template: MeasurementConfig<T>, [theta, theta_prime, phi, phi_prime]: [T; 4]) -> MeasurementConfig<T> {
    MeasurementConfig {
        theta,
        theta_prime,
        phi,
        phi_prime,
        ..template
    }
}

fn lex_less<T: Real>(a: &[T; 4], b: &[T; 4]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

fn free_coordinates<T: Real>(search: &SearchConfig<T>) -> Vec<usize> {
    let mut free = vec![0];
    if !search.tie_thetas {
        free.push(1);
    }
    if !search.zero_phases {
        free.push(2);
        if !search.tie_phis {
            free.push(3);
        }
    }
    free
}

fn clamp_angle<T: Real>(coordinate: usize, v: T) -> T {
    if coordinate < 2 {
        v.max(T::zero()).min(T::frac_pi_2())
    } else {
        let two_pi = T::two_pi();
        let w = v % two_pi;
        if w < T::zero() {
            w + two_pi
        } else {
            w
        }
    }
}

fn tie_angles<T: Real>(a: &mut [T; 4], search: &SearchConfig<T>) {
    if search.tie_thetas {
        a[1] = a[0];
    }
    if search.zero_phases {
        a[2] = T::zero();
        a[3] = T::zero();
    } else if search.tie_phis {
        a[3] = a[2];
    }
}

/// `J(B:A) = S(B) − min Σ p_k S(ρ_k)` with the optimizing measurement.
pub fn classical_correlation<T: Real>(
    rho: &DensityMatrix<T>,
    space: &StateSpace,
    search: &SearchConfig<T>,
) -> Result<(T, MeasurementConfig<T>), DiscordError> {
    let part = Bipartition::new(space);
    let s_b = von_neumann_entropy(&DensityMatrix::new(reduce_a(rho.matrix(), &part), SpaceTag(0)))?;
    let prepared = PreparedState::new(rho, &part)?;
    let r = minimize_conditional_entropy(&prepared, search)?;
    Ok((s_b - r.min_conditional_entropy, r.argmin))
}

/// Entropies, correlations and discord of one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscordPoint<T: Real> {
    pub t: T,
    pub s_a: T,
    pub s_b: T,
    pub s_ab: T,
    pub mutual_information: T,
    pub classical_correlation: T,
    pub discord: T,
    pub argmin: MeasurementConfig<T>,
    pub outcome_probs: [T; 4],
}

/// Column names of [`DiscordPoint::csv_row`].
pub const DISCORD_CSV_HEADER: &str =
    "t,S_A,S_B,S_AB,I,J,D,theta,theta_prime,phi,phi_prime,p0,p1,p2,p3";

impl<T: Real> DiscordPoint<T> {
    pub fn csv_row(&self) -> String {
        let [theta, theta_prime, phi, phi_prime] = self.argmin.angles();
        let mut out = String::new();
        let fields = [
            self.t,
            self.s_a,
            self.s_b,
            self.s_ab,
            self.mutual_information,
            self.classical_correlation,
            self.discord,
            theta,
            theta_prime,
            phi,
            phi_prime,
            self.outcome_probs[0],
            self.outcome_probs[1],
            self.outcome_probs[2],
            self.outcome_probs[3],
        ];
        for (i, v) in fields.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{:e}", to_f64(*v));
        }
        out
    }
}

/// Discord series as CSV text with [`DISCORD_CSV_HEADER`].
pub fn discord_csv<T: Real>(points: &[DiscordPoint<T>]) -> String {
    let mut out = String::from(DISCORD_CSV_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&p.csv_row());
        out.push('\n');
    }
    out
}

/// Reusable evaluator bound to one state space.
#[derive(Debug, Clone)]
pub struct DiscordEvaluator<T: Real> {
    part: Bipartition,
    search: SearchConfig<T>,
}

impl<T: Real> DiscordEvaluator<T> {
    pub fn new(space: &StateSpace, search: SearchConfig<T>) -> Result<Self, DiscordError> {
        search.validate()?;
        Ok(DiscordEvaluator {
            part: Bipartition::new(space),
            search,
        })
    }

    pub fn search(&self) -> &SearchConfig<T> {
        &self.search
    }

    pub fn evaluate(&self, rho: &DensityMatrix<T>, t: T) -> Result<DiscordPoint<T>, DiscordError> {
        self.part.check(rho)?;
        let s_ab = von_neumann_entropy(rho)?;
        let s_a = von_neumann_entropy(&DensityMatrix::new(reduce_b(rho.matrix(), &self.part), SpaceTag(0)))?;
        let s_b = von_neumann_entropy(&DensityMatrix::new(reduce_a(rho.matrix(), &self.part), SpaceTag(0)))?;
        let prepared = PreparedState::new(rho, &self.part)?;
        let r = minimize_conditional_entropy(&prepared, &self.search)?;
        let mutual = s_a + s_b - s_ab;
        let j = s_b - r.min_conditional_entropy;
        Ok(DiscordPoint {
            t,
            s_a,
            s_b,
            s_ab,
            mutual_information: mutual,
            classical_correlation: j,
            discord: mutual - j,
            argmin: r.argmin,
            outcome_probs: r.probs,
        })
    }
}

/// `D(B:A) = I(A:B) − J(B:A)` for one snapshot taken at time `t`.
pub fn discord<T: Real>(
    rho: &DensityMatrix<T>,
    space: &StateSpace,
    search: &SearchConfig<T>,
    t: T,
) -> Result<DiscordPoint<T>, DiscordError> {
    DiscordEvaluator::new(space, *search)?.evaluate(rho, t)
}
