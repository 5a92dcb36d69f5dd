//! Density matrices and the split-step integrator: an exact spectral
//! propagator for the unitary part followed by an explicit Euler step of the
//! Lindblad dissipator.

use std::fmt::Write as _;

use nalgebra::linalg::SymmetricEigen;
use thiserror::Error;

use crate::operators::{JumpChannel, ModelParams, OperatorMatrix};
use crate::scalar::{
    cabs, cre, cx, hermitian_eigenvalues, hermiticity_error, hermitize, lit, max_abs, to_f64,
    trace_re, CMatrix, Cx, Real,
};
use crate::statespace::{BasisState, SpaceTag, StateSpace, INITIAL_COMPONENTS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("state {0} is missing from the space")]
    StateMissing(BasisState),
    #[error("operator is not Hermitian (max |H - H^†| = {0:e})")]
    NotHermitian(f64),
    #[error("operands are bound to different state spaces")]
    SpaceMismatch,
    #[error("density matrix lost positivity at t = {t:e} s (min eigenvalue {min_eigenvalue:e}); reduce dt")]
    PositivityLost { t: f64, min_eigenvalue: f64 },
    #[error("invalid simulation settings: {0}")]
    InvalidConfig(String),
}

/// Density matrix bound to a state space. Reduced matrices produced by the
/// partial traces carry [`SpaceTag`]`(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T: Real> {
    matrix: CMatrix<T>,
    tag: SpaceTag,
}

impl<T: Real> DensityMatrix<T> {
    pub fn new(matrix: CMatrix<T>, tag: SpaceTag) -> Self {
        assert!(matrix.is_square(), "density matrices are square");
        DensityMatrix { matrix, tag }
    }

    /// `|ψ⟩⟨ψ|` for the amplitude vector `psi`, used as given.
    pub fn from_pure(psi: &[Cx<T>], tag: SpaceTag) -> Self {
        let n = psi.len();
        DensityMatrix::new(CMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj()), tag)
    }

    /// `|s⟩⟨s|` on `space`.
    pub fn basis(space: &StateSpace, s: BasisState) -> Result<Self, DynamicsError> {
        let i = space.index_of(s).ok_or(DynamicsError::StateMissing(s))?;
        let mut m = CMatrix::zeros(space.len(), space.len());
        m[(i, i)] = cre(T::one());
        Ok(DensityMatrix::new(m, space.tag()))
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

    pub fn trace(&self) -> T {
        trace_re(&self.matrix)
    }

    /// `tr(ρ²)`.
    pub fn purity(&self) -> T {
        let n = self.dim();
        let mut acc = T::zero();
        for i in 0..n {
            for j in 0..n {
                let z = self.matrix[(i, j)];
                acc += z.re * z.re + z.im * z.im;
            }
        }
        acc
    }

    pub fn hermiticity_error(&self) -> T {
        hermiticity_error(&self.matrix)
    }

    pub fn eigenvalues(&self) -> Vec<T> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> T {
        self.eigenvalues().first().copied().unwrap_or_else(T::zero)
    }

    /// Diagonal entry `i`.
    pub fn population(&self, i: usize) -> T {
        self.matrix[(i, i)].re
    }

    /// `Re tr(ρ O)`.
    pub fn expectation(&self, op: &OperatorMatrix<T>) -> Result<T, DynamicsError> {
        if op.tag() != self.tag {
            return Err(DynamicsError::SpaceMismatch);
        }
        let n = self.dim();
        let o = op.matrix();
        let mut acc = T::zero();
        for i in 0..n {
            for j in 0..n {
                acc += (self.matrix[(i, j)] * o[(j, i)]).re;
            }
        }
        Ok(acc)
    }
}

/// The entangled starting state `½(|0000010⟩ − |0000110⟩ + |0001010⟩ − |0001110⟩)`.
pub fn initial_state<T: Real>(space: &StateSpace) -> Result<DensityMatrix<T>, DynamicsError> {
    let mut psi = vec![Cx::<T>::new(T::zero(), T::zero()); space.len()];
    for (label, amp) in INITIAL_COMPONENTS {
        let s = BasisState::parse(label).expect("valid component label");
        let i = space.index_of(s).ok_or(DynamicsError::StateMissing(s))?;
        psi[i] = cre(lit(0.5 * amp));
    }
    Ok(DensityMatrix::from_pure(&psi, space.tag()))
}

/// How the open-system step is repeated between snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stepping {
    /// [`Stepping::Compose`] for segments of at least [`COMPOSE_MIN_STRIDE`] steps.
    #[default]
    Auto,
    /// Apply the one-step map once per step.
    Iterate,
    /// Apply the one-step map raised to the segment length, formed by
    /// repeated squaring on the entries of `ρ` the dynamics can reach.
    Compose,
}

/// Segment length from which [`Stepping::Auto`] composes.
pub const COMPOSE_MIN_STRIDE: usize = 4096;

/// Integration settings. Times in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig<T> {
    pub dt: T,
    pub t_end: T,
    /// Integrator steps between recorded snapshots.
    pub record_stride: usize,
    /// Divide by the trace after each step (each segment when composing).
    pub renormalize_trace: bool,
    pub stepping: Stepping,
}

impl<T: Real> SimConfig<T> {
    pub fn new(dt: T, t_end: T, record_stride: usize) -> Self {
        SimConfig {
            dt,
            t_end,
            record_stride,
            renormalize_trace: false,
            stepping: Stepping::Auto,
        }
    }

    /// Settings using [`default_dt`] with snapshots roughly every `record_interval` seconds.
    pub fn with_interval(params: &ModelParams<T>, t_end: T, record_interval: T) -> Self {
        let dt = default_dt(params);
        let stride = to_f64(record_interval / dt).round().max(1.0) as usize;
        SimConfig::new(dt, t_end, stride)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(DynamicsError::InvalidConfig(format!("dt = {:e} must be positive", self.dt)));
        }
        if !(self.t_end >= self.dt) || !self.t_end.is_finite() {
            return Err(DynamicsError::InvalidConfig(format!(
                "t_end = {:e} must be at least dt = {:e}",
                self.t_end, self.dt
            )));
        }
        if self.record_stride == 0 {
            return Err(DynamicsError::InvalidConfig("record_stride must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of integrator steps; the effective step is `t_end / steps`.
    pub fn steps(&self) -> usize {
        to_f64(self.t_end / self.dt).round().max(1.0) as usize
    }

    pub fn effective_dt(&self) -> T {
        self.t_end / lit(self.steps() as f64)
    }
}

/// `10⁻³ / max(couplings, rates, |free frequencies|)`.
pub fn default_dt<T: Real>(params: &ModelParams<T>) -> T {
    let fastest = params.fastest_rate();
    if fastest > T::zero() {
        lit::<T>(1e-3) / fastest
    } else {
        T::one()
    }
}

/// Recorded snapshots of one evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    pub times: Vec<T>,
    pub snapshots: Vec<DensityMatrix<T>>,
    pub params: ModelParams<T>,
    pub tag: SpaceTag,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&DensityMatrix<T>> {
        self.snapshots.last()
    }

    /// Full matrices, one row per snapshot: `t`, then `re(rho_i_j)` for all
    /// `i, j` in row-major order, then `im(rho_i_j)` in the same order.
    pub fn to_csv(&self) -> String {
        let n = self.snapshots.first().map_or(0, |r| r.dim());
        let mut out = String::from("t");
        for part in ["re", "im"] {
            for i in 0..n {
                for j in 0..n {
                    let _ = write!(out, ",{part}(rho_{i}_{j})");
                }
            }
        }
        out.push('\n');
        for (t, rho) in self.times.iter().zip(&self.snapshots) {
            let _ = write!(out, "{:e}", to_f64(*t));
            for i in 0..n {
                for j in 0..n {
                    let _ = write!(out, ",{:e}", to_f64(rho.matrix[(i, j)].re));
                }
            }
            for i in 0..n {
                for j in 0..n {
                    let _ = write!(out, ",{:e}", to_f64(rho.matrix[(i, j)].im));
                }
            }
            out.push('\n');
        }
        out
    }
}

fn check_hermitian<T: Real>(h: &CMatrix<T>) -> Result<(), DynamicsError> {
    let err = hermiticity_error(h);
    let scale = max_abs(h).max(T::one());
    if err > lit::<T>(1e-12) * scale {
        return Err(DynamicsError::NotHermitian(to_f64(err)));
    }
    Ok(())
}

/// Spectral factorization of `H`, done separately on each connected
/// component of its coupling graph and reused for several step sizes.
#[derive(Debug, Clone)]
pub struct Spectrum<T: Real> {
    blocks: Vec<SpectralBlock<T>>,
    dim: usize,
    tag: SpaceTag,
}

#[derive(Debug, Clone)]
struct SpectralBlock<T: Real> {
    /// Indices of the component, ascending.
    indices: Vec<usize>,
    values: Vec<T>,
    vectors: CMatrix<T>,
}

impl<T: Real> SpectralBlock<T> {
    fn propagator(&self, tau: T, hbar: T) -> CMatrix<T> {
        self.phased(tau, hbar, false)
    }

    /// `exp(−iHτ/ħ)`, or that minus the identity computed without
    /// cancellation when `minus_identity` is set.
    fn phased(&self, tau: T, hbar: T, minus_identity: bool) -> CMatrix<T> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (k, &lambda) in self.values.iter().enumerate() {
            let angle = -lambda * tau / hbar;
            let phase = if minus_identity {
                let half = (angle * lit(0.5)).sin();
                cx(-lit::<T>(2.0) * half * half, angle.sin())
            } else {
                cx(angle.cos(), angle.sin())
            };
            for i in 0..n {
                scaled[(i, k)] *= phase;
            }
        }
        scaled * self.vectors.adjoint()
    }
}

fn components<T: Real>(h: &CMatrix<T>) -> Vec<Vec<usize>> {
    let n = h.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if h[(i, j)] != cre(T::zero()) || h[(j, i)] != cre(T::zero()) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

impl<T: Real> Spectrum<T> {
    pub fn new(h: &OperatorMatrix<T>) -> Result<Self, DynamicsError> {
        let m = h.matrix();
        check_hermitian(m)?;
        let blocks = components(m)
            .into_iter()
            .map(|indices| {
                let k = indices.len();
                let sub = CMatrix::from_fn(k, k, |a, b| m[(indices[a], indices[b])]);
                let eig = SymmetricEigen::new(sub);
                SpectralBlock {
                    indices,
                    values: eig.eigenvalues.iter().copied().collect(),
                    vectors: eig.eigenvectors,
                }
            })
            .collect();
        Ok(Spectrum {
            blocks,
            dim: m.nrows(),
            tag: h.tag(),
        })
    }

    /// Sizes of the independent blocks.
    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.indices.len()).collect()
    }

    /// `exp(−i H τ / ħ)`.
    pub fn propagator(&self, tau: T, hbar: T) -> OperatorMatrix<T> {
        let mut u = CMatrix::zeros(self.dim, self.dim);
        for b in &self.blocks {
            let ub = b.propagator(tau, hbar);
            for (a, &i) in b.indices.iter().enumerate() {
                for (c, &j) in b.indices.iter().enumerate() {
                    u[(i, j)] = ub[(a, c)];
                }
            }
        }
        OperatorMatrix::new(u, self.tag)
    }

    /// Ordering that makes every block contiguous.
    fn block_order(&self) -> Vec<usize> {
        self.blocks.iter().flat_map(|b| b.indices.iter().copied()).collect()
    }

    /// Block propagators in block order.
    fn block_propagator(&self, tau: T, hbar: T) -> BlockPropagator<T> {
        let mut start = 0;
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let u = b.propagator(tau, hbar);
            let ud = u.adjoint();
            blocks.push((start, u, ud));
            start += b.indices.len();
        }
        BlockPropagator { blocks }
    }

    /// Dense `exp(−iHτ/ħ) − I` in block order.
    fn block_ordered_minus_identity(&self, tau: T, hbar: T) -> CMatrix<T> {
        let mut w = CMatrix::zeros(self.dim, self.dim);
        let mut start = 0;
        for b in &self.blocks {
            let k = b.indices.len();
            w.view_mut((start, start), (k, k)).copy_from(&b.phased(tau, hbar, true));
            start += k;
        }
        w
    }
}

/// Block-diagonal unitary acting on a matrix stored in block order.
struct BlockPropagator<T: Real> {
    /// `(offset, U_b, U_b†)`.
    blocks: Vec<(usize, CMatrix<T>, CMatrix<T>)>,
}

impl<T: Real> BlockPropagator<T> {
    /// `rho ← U rho U†`, using `tmp` as scratch.
    fn apply(&self, rho: &mut CMatrix<T>, tmp: &mut CMatrix<T>) {
        let one = cre(T::one());
        let zero = cre(T::zero());
        for (start, u, _) in &self.blocks {
            let k = u.nrows();
            tmp.rows_mut(*start, k).gemm(one, u, &rho.rows(*start, k), zero);
        }
        for (start, _, ud) in &self.blocks {
            let k = ud.nrows();
            rho.columns_mut(*start, k).gemm(one, &tmp.columns(*start, k), ud, zero);
        }
    }
}

/// `U = exp(−i H dt / ħ)` by spectral decomposition of `H`.
pub fn make_propagator<T: Real>(
    h: &OperatorMatrix<T>,
    dt: T,
    hbar: T,
) -> Result<OperatorMatrix<T>, DynamicsError> {
    Ok(Spectrum::new(h)?.propagator(dt, hbar))
}

/// `Σ_k γ_k (A_k ρ A_k† − ½{ρ, A_k†A_k})`.
pub fn dissipator<T: Real>(
    rho: &DensityMatrix<T>,
    channels: &[JumpChannel<T>],
) -> Result<CMatrix<T>, DynamicsError> {
    let n = rho.dim();
    let mut out = CMatrix::zeros(n, n);
    let half = lit::<T>(0.5);
    for ch in channels {
        if ch.op.tag() != rho.tag {
            return Err(DynamicsError::SpaceMismatch);
        }
        let a = ch.op.matrix();
        let ad = a.adjoint();
        let ada = &ad * a;
        let term = a * &rho.matrix * &ad - (&rho.matrix * &ada + &ada * &rho.matrix) * cre(half);
        out += term * cre(ch.rate);
    }
    Ok(out)
}

/// Dissipator specialized for sparse jump operators, applied once per step.
#[derive(Debug, Clone)]
pub struct PreparedDissipator<T: Real> {
    /// Per channel: rate and nonzero entries `(row, col, value)`.
    sandwiches: Vec<(T, Vec<(usize, usize, Cx<T>)>)>,
    /// `K = Σ γ A†A`.
    k: CMatrix<T>,
    k_diagonal: Option<Vec<T>>,
    tag: SpaceTag,
}

impl<T: Real> PreparedDissipator<T> {
    pub fn new(channels: &[JumpChannel<T>], space_tag: SpaceTag, dim: usize) -> Result<Self, DynamicsError> {
        let mut sandwiches = Vec::with_capacity(channels.len());
        let mut k = CMatrix::zeros(dim, dim);
        for ch in channels {
            if ch.op.tag() != space_tag || ch.op.dim() != dim {
                return Err(DynamicsError::SpaceMismatch);
            }
            let a = ch.op.matrix();
            let mut nz = Vec::new();
            for j in 0..dim {
                for i in 0..dim {
                    if a[(i, j)] != cre(T::zero()) {
                        nz.push((i, j, a[(i, j)]));
                    }
                }
            }
            sandwiches.push((ch.rate, nz));
            k += (a.adjoint() * a) * cre(ch.rate);
        }
        let is_diag = (0..dim).all(|i| (0..dim).all(|j| i == j || k[(i, j)] == cre(T::zero())));
        let k_diagonal = is_diag.then(|| (0..dim).map(|i| k[(i, i)].re).collect());
        Ok(PreparedDissipator {
            sandwiches,
            k,
            k_diagonal,
            tag: space_tag,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.sandwiches.is_empty()
    }

    /// Same dissipator with basis index `i` moved to `new_index[i]`.
    fn permuted(&self, new_index: &[usize]) -> Self {
        let n = new_index.len();
        let sandwiches = self
            .sandwiches
            .iter()
            .map(|(rate, nz)| {
                let moved = nz.iter().map(|&(i, j, v)| (new_index[i], new_index[j], v)).collect();
                (*rate, moved)
            })
            .collect();
        let mut k = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                k[(new_index[i], new_index[j])] = self.k[(i, j)];
            }
        }
        let k_diagonal = self.k_diagonal.as_ref().map(|d| {
            let mut out = vec![T::zero(); n];
            for i in 0..n {
                out[new_index[i]] = d[i];
            }
            out
        });
        PreparedDissipator {
            sandwiches,
            k,
            k_diagonal,
            tag: self.tag,
        }
    }

    /// Writes `L(ρ)` into `out`.
    pub fn apply_into(&self, rho: &CMatrix<T>, out: &mut CMatrix<T>) {
        let n = rho.nrows();
        out.fill(cre(T::zero()));
        for (rate, nz) in &self.sandwiches {
            for &(i, k, a) in nz {
                let ra = a * cre(*rate);
                for &(j, l, b) in nz {
                    out[(i, j)] += ra * rho[(k, l)] * b.conj();
                }
            }
        }
        let half = lit::<T>(0.5);
        match &self.k_diagonal {
            Some(d) => {
                for j in 0..n {
                    for i in 0..n {
                        let s = (d[i] + d[j]) * half;
                        if s != T::zero() {
                            out[(i, j)] -= rho[(i, j)] * cre(s);
                        }
                    }
                }
            }
            None => {
                let anti = &self.k * rho + rho * &self.k;
                *out -= anti * cre(half);
            }
        }
    }

    pub fn apply(&self, rho: &DensityMatrix<T>) -> Result<CMatrix<T>, DynamicsError> {
        if rho.tag != self.tag {
            return Err(DynamicsError::SpaceMismatch);
        }
        let mut out = CMatrix::zeros(rho.dim(), rho.dim());
        self.apply_into(&rho.matrix, &mut out);
        Ok(out)
    }
}

/// The linear one-step map `Φ`, stored as `Δ = Φ − I` and restricted to
/// the entries of `ρ` it can reach.
///
/// Keeping `Δ` rather than `Φ` preserves the relative precision of the
/// small per-step change, which otherwise drowns next to the identity and
/// compounds over many steps. Works on matrices in block order;
/// reachability is tracked per pair of blocks, so every entry outside the
/// active pairs stays exactly zero.
struct StepMap<T: Real> {
    /// Active entries `(row, col)`, the coordinates of [`StepMap::delta`].
    entries: Vec<(usize, usize)>,
    delta: CMatrix<T>,
}

impl<T: Real> StepMap<T> {
    /// `delta(X)` must return `Φ(X) − X`.
    fn new(rho0: &CMatrix<T>, sizes: &[usize], mut delta: impl FnMut(&CMatrix<T>) -> CMatrix<T>) -> Self {
        let n = rho0.nrows();
        let nb = sizes.len();
        let mut offsets = Vec::with_capacity(nb);
        let mut block_of = Vec::with_capacity(n);
        for (b, &size) in sizes.iter().enumerate() {
            offsets.push(block_of.len());
            block_of.extend(std::iter::repeat_n(b, size));
        }
        let zero = cre(T::zero());
        let mut active = vec![false; nb * nb];
        let mut queue = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let pair = block_of[i] * nb + block_of[j];
                if rho0[(i, j)] != zero && !active[pair] {
                    active[pair] = true;
                    queue.push(pair);
                }
            }
        }
        // Images of unit matrices, keyed by source entry.
        let mut columns: Vec<((usize, usize), Vec<(usize, usize, Cx<T>)>)> = Vec::new();
        while let Some(pair) = queue.pop() {
            let (a, b) = (pair / nb, pair % nb);
            for i in offsets[a]..offsets[a] + sizes[a] {
                for j in offsets[b]..offsets[b] + sizes[b] {
                    let mut x = CMatrix::zeros(n, n);
                    x[(i, j)] = cre(T::one());
                    let y = delta(&x);
                    let mut image = Vec::new();
                    for q in 0..n {
                        for p in 0..n {
                            if y[(p, q)] != zero {
                                image.push((p, q, y[(p, q)]));
                                let target = block_of[p] * nb + block_of[q];
                                if !active[target] {
                                    active[target] = true;
                                    queue.push(target);
                                }
                            }
                        }
                    }
                    columns.push(((i, j), image));
                }
            }
        }
        let mut entries = Vec::new();
        for a in 0..nb {
            for b in 0..nb {
                if active[a * nb + b] {
                    for j in offsets[b]..offsets[b] + sizes[b] {
                        for i in offsets[a]..offsets[a] + sizes[a] {
                            entries.push((i, j));
                        }
                    }
                }
            }
        }
        let mut position = vec![usize::MAX; n * n];
        for (k, &(i, j)) in entries.iter().enumerate() {
            position[i * n + j] = k;
        }
        let m = entries.len();
        let mut matrix = CMatrix::zeros(m, m);
        for ((i, j), image) in columns {
            let col = position[i * n + j];
            for (p, q, v) in image {
                matrix[(position[p * n + q], col)] = v;
            }
        }
        StepMap { entries, delta: matrix }
    }

    /// `Φᵏ − I`, by repeated squaring with `(I+A)(I+B) − I = A + B + AB`.
    fn power(&self, mut k: usize) -> CMatrix<T> {
        let m = self.delta.nrows();
        let mut result = CMatrix::zeros(m, m);
        let mut base = self.delta.clone();
        loop {
            if k & 1 == 1 {
                let cross = &base * &result;
                result += &base;
                result += cross;
            }
            k >>= 1;
            if k == 0 {
                break;
            }
            let square = &base * &base;
            base += base.clone();
            base += square;
        }
        result
    }

    /// `ρ ← ρ + power·ρ` on the active entries.
    fn apply(&self, power: &CMatrix<T>, rho: &mut CMatrix<T>) {
        let v = nalgebra::DVector::from_iterator(self.entries.len(), self.entries.iter().map(|&(i, j)| rho[(i, j)]));
        let w = power * v;
        for (k, &(i, j)) in self.entries.iter().enumerate() {
            rho[(i, j)] += w[k];
        }
    }
}

/// Evolves `rho0` under `h` and `channels` with the split-step scheme,
/// recording `t = 0`, every `record_stride` steps, and `t_end`.
///
/// Internally the basis is reordered so that the independent blocks of `h`
/// are contiguous; snapshots are returned in the original order.
pub fn evolve<T: Real>(
    rho0: &DensityMatrix<T>,
    h: &OperatorMatrix<T>,
    channels: &[JumpChannel<T>],
    params: &ModelParams<T>,
    cfg: &SimConfig<T>,
) -> Result<Trajectory<T>, DynamicsError> {
    cfg.validate()?;
    if h.tag() != rho0.tag || h.dim() != rho0.dim() {
        return Err(DynamicsError::SpaceMismatch);
    }
    let spectrum = Spectrum::new(h)?;
    let n = rho0.dim();
    let order = spectrum.block_order();
    let mut new_index = vec![0; n];
    for (k, &i) in order.iter().enumerate() {
        new_index[i] = k;
    }
    let dissipation = PreparedDissipator::new(channels, rho0.tag, n)?.permuted(&new_index);
    let steps = cfg.steps();
    let dt = cfg.effective_dt();
    let time_at = |k: usize| lit::<T>(k as f64) * dt;

    let mut times = vec![T::zero()];
    let mut snapshots = vec![rho0.clone()];
    let mut rho = CMatrix::from_fn(n, n, |a, b| rho0.matrix[(order[a], order[b])]);
    let mut tmp = CMatrix::zeros(n, n);

    let record = |rho: &CMatrix<T>, k: usize, times: &mut Vec<T>, snaps: &mut Vec<DensityMatrix<T>>| {
        let mut original = CMatrix::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                original[(order[a], order[b])] = rho[(a, b)];
            }
        }
        let snap = DensityMatrix::new(original, rho0.tag);
        let min = snap.min_eigenvalue();
        if min < lit(-1e-6) {
            return Err(DynamicsError::PositivityLost {
                t: to_f64(time_at(k)),
                min_eigenvalue: to_f64(min),
            });
        }
        times.push(time_at(k));
        snaps.push(snap);
        Ok(())
    };
    let renormalize = |rho: &mut CMatrix<T>| {
        if cfg.renormalize_trace {
            let tr = trace_re(rho);
            *rho /= cre(tr);
        }
    };

    if dissipation.is_empty() {
        // Closed system: one exact propagator per recorded segment.
        let stride = cfg.record_stride.min(steps);
        let u = spectrum.block_propagator(dt * lit(stride as f64), params.hbar);
        let mut k = 0;
        while k < steps {
            let seg = stride.min(steps - k);
            if seg == stride {
                u.apply(&mut rho, &mut tmp);
            } else {
                spectrum
                    .block_propagator(dt * lit(seg as f64), params.hbar)
                    .apply(&mut rho, &mut tmp);
            }
            hermitize(&mut rho);
            renormalize(&mut rho);
            k += seg;
            record(&rho, k, &mut times, &mut snapshots)?;
        }
    } else {
        let u = spectrum.block_propagator(dt, params.hbar);
        let mut incr = CMatrix::zeros(n, n);
        let dtc = cre(dt);
        let step = |rho: &mut CMatrix<T>, tmp: &mut CMatrix<T>, incr: &mut CMatrix<T>| {
            u.apply(rho, tmp);
            dissipation.apply_into(rho, incr);
            rho.zip_apply(incr, |r, d| *r += d * dtc);
        };
        let stride = cfg.record_stride.min(steps);
        let compose = match cfg.stepping {
            Stepping::Auto => stride >= COMPOSE_MIN_STRIDE,
            Stepping::Iterate => false,
            Stepping::Compose => true,
        };
        if compose {
            let w = spectrum.block_ordered_minus_identity(dt, params.hbar);
            let wd = w.adjoint();
            let map = StepMap::new(&rho, &spectrum.block_sizes(), |x| {
                // U X U† − X = W X U† + X W† with W = U − I.
                let wx = &w * x;
                let rotated_change = &wx * &wd + &wx + x * &wd;
                let rotated = x + &rotated_change;
                let mut d = CMatrix::zeros(n, n);
                dissipation.apply_into(&rotated, &mut d);
                rotated_change + d * dtc
            });
            let full = map.power(stride);
            let mut k = 0;
            while k < steps {
                let seg = stride.min(steps - k);
                if seg == stride {
                    map.apply(&full, &mut rho);
                } else {
                    map.apply(&map.power(seg), &mut rho);
                }
                hermitize(&mut rho);
                renormalize(&mut rho);
                k += seg;
                record(&rho, k, &mut times, &mut snapshots)?;
            }
        } else {
            for k in 1..=steps {
                step(&mut rho, &mut tmp, &mut incr);
                hermitize(&mut rho);
                renormalize(&mut rho);
                if k % cfg.record_stride == 0 || k == steps {
                    record(&rho, k, &mut times, &mut snapshots)?;
                }
            }
        }
    }

    Ok(Trajectory {
        times,
        snapshots,
        params: *params,
        tag: rho0.tag,
    })
}

/// Largest deviation of `U U†` from the identity.
pub fn unitarity_error<T: Real>(u: &OperatorMatrix<T>) -> T {
    let m = u.matrix();
    let p = m * m.adjoint();
    let n = m.nrows();
    let mut worst = T::zero();
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { T::one() } else { T::zero() };
            let d = cabs(p[(i, j)] - cre(target));
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}
