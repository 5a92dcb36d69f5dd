//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};

use qdiscord::analysis::{population, AggregatePredicate};
use qdiscord::discord::{partial_trace_a, partial_trace_b, projector_set, DiscordPoint, SearchConfig};
use qdiscord::dynamics::{evolve, DensityMatrix};
use qdiscord::operators::{build_hamiltonian, build_jump_channels, ModelParams};
use qdiscord::scalar::hermitian_eigenvalues;
use qdiscord::statespace::{full_space, generate_space, table_states, BasisState, GatingPolicy, SpaceMode, StateSpace};
use qdiscord::{CMatrix64, MeasurementConfig, Run, SimConfig, C64};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn table_space() -> StateSpace {
    StateSpace::from_states(table_states(), SpaceMode::TableCompat)
}

pub fn random_vector(rng: &mut StdRng, n: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..n)
        .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

/// `W W† / tr` for a random `n × rank` matrix `W`.
pub fn random_density(rng: &mut StdRng, n: usize, rank: usize) -> CMatrix64 {
    let w = CMatrix64::from_fn(n, rank, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let rho = &w * w.adjoint();
    let tr: f64 = (0..n).map(|i| rho[(i, i)].re).sum();
    rho / c(tr, 0.0)
}

pub fn pure_density(space: &StateSpace, psi: &[C64]) -> DensityMatrix<f64> {
    DensityMatrix::from_pure(psi, space.tag())
}

pub fn max_abs(m: &CMatrix64) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `Tr_B` by embedding into the 128-dimensional product space and summing
/// over the 32 matter configurations explicitly.
pub fn brute_trace_out_matter(rho: &CMatrix64, space: &StateSpace) -> CMatrix64 {
    let full = embed(rho, space);
    CMatrix64::from_fn(4, 4, |a, a2| (0..32).map(|b| full[((a << 5) | b, (a2 << 5) | b)]).sum())
}

/// `Tr_A` on all 32 matter configurations.
pub fn brute_trace_out_photons(rho: &CMatrix64, space: &StateSpace) -> CMatrix64 {
    let full = embed(rho, space);
    CMatrix64::from_fn(32, 32, |b, b2| (0..4).map(|a| full[((a << 5) | b, (a << 5) | b2)]).sum())
}

fn embed(rho: &CMatrix64, space: &StateSpace) -> CMatrix64 {
    let mut full = CMatrix64::zeros(128, 128);
    for (i, si) in space.states().iter().enumerate() {
        for (j, sj) in space.states().iter().enumerate() {
            full[(si.code() as usize, sj.code() as usize)] = rho[(i, j)];
        }
    }
    full
}

/// Worst deviation of both partial traces from the brute-force oracle over
/// `count` random states on `space`.
pub fn partial_trace_oracle_error(space: &StateSpace, count: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let labels = space.matter_labels();
    let mut worst: f64 = 0.0;
    for k in 0..count {
        let rank = 1 + k % space.len();
        let m = random_density(&mut r, space.len(), rank);
        let rho = DensityMatrix::new(m.clone(), space.tag());
        let a = partial_trace_b(&rho, space).unwrap();
        worst = worst.max(max_abs(&(a.matrix() - brute_trace_out_matter(&m, space))));
        let b = partial_trace_a(&rho, space).unwrap();
        let brute = brute_trace_out_photons(&m, space);
        for (x, lx) in labels.iter().enumerate() {
            for (y, ly) in labels.iter().enumerate() {
                let want = brute[(lx.0 as usize, ly.0 as usize)];
                worst = worst.max((b.matrix()[(x, y)] - want).norm());
            }
        }
    }
    worst
}

/// Photon-sector coefficients of the tied, zero-phase projectors as
/// `(C index, sign)` for each `(bra, ket)` pair, kets written `p1 p2`.
pub fn c_pattern() -> [[[(usize, f64); 4]; 4]; 4] {
    // Entries listed as (ket, bra, C index, sign).
    let terms: [&[(&str, &str, usize, f64)]; 4] = [
        &[
            ("00", "00", 0, 1.0),
            ("00", "01", 1, 1.0), ("01", "00", 1, 1.0), ("00", "10", 1, 1.0), ("10", "00", 1, 1.0),
            ("01", "11", 3, 1.0), ("11", "01", 3, 1.0), ("10", "11", 3, 1.0), ("11", "10", 3, 1.0),
            ("01", "01", 2, 1.0), ("10", "10", 2, 1.0), ("00", "11", 2, 1.0), ("11", "00", 2, 1.0),
            ("01", "10", 2, 1.0), ("10", "01", 2, 1.0),
            ("11", "11", 4, 1.0),
        ],
        &[
            ("10", "10", 0, 1.0),
            ("00", "10", 1, -1.0), ("10", "00", 1, -1.0), ("10", "11", 1, 1.0), ("11", "10", 1, 1.0),
            ("00", "01", 3, 1.0), ("01", "00", 3, 1.0), ("01", "11", 3, -1.0), ("11", "01", 3, -1.0),
            ("00", "00", 2, 1.0), ("11", "11", 2, 1.0), ("00", "11", 2, -1.0), ("11", "00", 2, -1.0),
            ("01", "10", 2, -1.0), ("10", "01", 2, -1.0),
            ("01", "01", 4, 1.0),
        ],
        &[
            ("01", "01", 0, 1.0),
            ("00", "01", 1, -1.0), ("01", "00", 1, -1.0), ("01", "11", 1, 1.0), ("11", "01", 1, 1.0),
            ("00", "10", 3, 1.0), ("10", "00", 3, 1.0), ("10", "11", 3, -1.0), ("11", "10", 3, -1.0),
            ("00", "00", 2, 1.0), ("11", "11", 2, 1.0), ("00", "11", 2, -1.0), ("11", "00", 2, -1.0),
            ("01", "10", 2, -1.0), ("10", "01", 2, -1.0),
            ("10", "10", 4, 1.0),
        ],
        &[
            ("11", "11", 0, 1.0),
            ("01", "11", 1, -1.0), ("11", "01", 1, -1.0), ("10", "11", 1, -1.0), ("11", "10", 1, -1.0),
            ("00", "01", 3, -1.0), ("01", "00", 3, -1.0), ("00", "10", 3, -1.0), ("10", "00", 3, -1.0),
            ("01", "01", 2, 1.0), ("10", "10", 2, 1.0), ("00", "11", 2, 1.0), ("11", "00", 2, 1.0),
            ("01", "10", 2, 1.0), ("10", "01", 2, 1.0),
            ("00", "00", 4, 1.0),
        ],
    ];
    let index = |s: &str| {
        let b = s.as_bytes();
        2 * (b[0] - b'0') as usize + (b[1] - b'0') as usize
    };
    let mut out = [[[(usize::MAX, 0.0); 4]; 4]; 4];
    for (k, list) in terms.iter().enumerate() {
        for &(ket, bra, ci, sign) in list.iter() {
            out[k][index(ket)][index(bra)] = (ci, sign);
        }
    }
    out
}

pub fn c_constants(theta: f64) -> [f64; 5] {
    let (s, co) = theta.sin_cos();
    [co.powi(4), co.powi(3) * s, co * co * s * s, co * s.powi(3), s.powi(4)]
}

/// Worst deviation of the tied, zero-phase projectors from the C pattern
/// over `thetas`.
pub fn c_pattern_error(thetas: &[f64]) -> f64 {
    let pattern = c_pattern();
    let mut worst: f64 = 0.0;
    for &theta in thetas {
        let cs = c_constants(theta);
        let p = projector_set(&MeasurementConfig::new(theta, theta, 0.0, 0.0)).unwrap();
        for k in 0..4 {
            for i in 0..4 {
                for j in 0..4 {
                    let (ci, sign) = pattern[k][i][j];
                    assert!(ci < 5, "pattern covers entry ({k}, {i}, {j})");
                    worst = worst.max((p.projectors[k][(i, j)] - c(sign * cs[ci], 0.0)).norm());
                }
            }
        }
    }
    worst
}

/// Worst violation of completeness, orthogonality, idempotence,
/// hermiticity and unit rank over `count` random angle tuples.
pub fn projector_algebra_error(count: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let eye = CMatrix64::identity(4, 4);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let cfg = MeasurementConfig::new(
            r.gen_range(0.0..=FRAC_PI_2),
            r.gen_range(0.0..=FRAC_PI_2),
            r.gen_range(0.0..=2.0 * PI),
            r.gen_range(0.0..=2.0 * PI),
        );
        let p = projector_set(&cfg).unwrap();
        let mut sum = CMatrix64::zeros(4, 4);
        for (k, pk) in p.projectors.iter().enumerate() {
            sum += pk;
            worst = worst.max(max_abs(&(pk * pk - pk)));
            worst = worst.max(max_abs(&(pk - pk.adjoint())));
            let tr: C64 = (0..4).map(|i| pk[(i, i)]).sum();
            worst = worst.max((tr - c(1.0, 0.0)).norm());
            let ev = hermitian_eigenvalues(pk);
            let ones = ev.iter().filter(|&&x| (x - 1.0).abs() < 1e-12).count();
            let zeros = ev.iter().filter(|&&x| x.abs() < 1e-12).count();
            if ones != 1 || zeros != 3 {
                worst = worst.max(1.0);
            }
            for (j, pj) in p.projectors.iter().enumerate() {
                if j != k {
                    worst = worst.max(max_abs(&(pk * pj)));
                }
            }
        }
        worst = worst.max(max_abs(&(sum - &eye)));
    }
    worst
}

/// Parameters under which the dynamics from the initial state stay inside
/// the table-compatible span on the full space: photon exchange switched
/// off, bond and tunneling terms on, optionally damped.
pub fn table_closed_params(gamma: f64) -> ModelParams<f64> {
    let mut p = ModelParams::defaults(1e7).with_uniform_dissipation(gamma);
    p.g_up = 0.0;
    p.g_down = 0.0;
    p
}

/// Largest deviation between evolving on the table-compatible space and
/// evolving on the full space projected onto it.
pub fn reduced_vs_full_error(params: &ModelParams<f64>, t_end: f64) -> f64 {
    let gating = GatingPolicy::default();
    let closure = generate_space(&qdiscord::statespace::initial_seeds(), params, &gating, true, SpaceMode::Closure).unwrap();
    let table = table_space();
    assert!(
        closure.states().iter().all(|s| table.contains(*s)),
        "parameters must keep the dynamics inside the table span"
    );
    let full = full_space();
    let run_on = |space: &StateSpace| {
        let h = build_hamiltonian(params, space, &gating).unwrap();
        let ch = build_jump_channels(params, space).unwrap();
        let rho0 = qdiscord::initial_state(space).unwrap();
        let dt = qdiscord::dynamics::default_dt(params);
        let cfg = SimConfig::new(dt, t_end, ((t_end / dt / 100.0).round() as usize).max(1));
        evolve(&rho0, &h, &ch, params, &cfg).unwrap()
    };
    let small = run_on(&table);
    let big = run_on(&full);
    let mut worst: f64 = 0.0;
    for (a, b) in small.snapshots.iter().zip(&big.snapshots) {
        for (i, si) in table.states().iter().enumerate() {
            for (j, sj) in table.states().iter().enumerate() {
                let bi = full.index_of(*si).unwrap();
                let bj = full.index_of(*sj).unwrap();
                worst = worst.max((a.matrix()[(i, j)] - b.matrix()[(bi, bj)]).norm());
            }
        }
        // Nothing may leak outside the span.
        let inside: f64 = table
            .states()
            .iter()
            .map(|s| b.population(full.index_of(*s).unwrap()))
            .sum();
        worst = worst.max((inside - b.trace()).abs());
    }
    worst
}

/// Two states coupled only by the `Ω↑` exchange, starting in the photon state.
pub fn rabi_error(g: f64, t_end: f64) -> f64 {
    let mut p = ModelParams::defaults(g);
    p.g_down = 0.0;
    p.g_bond = 0.0;
    p.zeta = 0.0;
    let gating = GatingPolicy::default();
    let photon = BasisState::parse("1000000").unwrap();
    let excited = BasisState::parse("0001000").unwrap();
    let space = StateSpace::from_states([photon, excited], SpaceMode::Closure);
    let h = build_hamiltonian(&p, &space, &gating).unwrap();
    let rho0 = DensityMatrix::basis(&space, photon).unwrap();
    let cfg = SimConfig::new(qdiscord::dynamics::default_dt(&p), t_end, 97);
    let tr = evolve(&rho0, &h, &[], &p, &cfg).unwrap();
    let i = space.index_of(photon).unwrap();
    tr.times
        .iter()
        .zip(&tr.snapshots)
        .map(|(t, s)| (s.population(i) - (g * t).cos().powi(2)).abs())
        .fold(0.0, f64::max)
}

/// Single damped photon mode against `e^{−γt}`.
pub fn damping_error(gamma: f64, t_end: f64) -> f64 {
    let mut p = ModelParams::defaults(1e7);
    p.g_up = 0.0;
    p.g_down = 0.0;
    p.g_bond = 0.0;
    p.zeta = 0.0;
    p.gamma_up = gamma;
    let photon = BasisState::parse("1000000").unwrap();
    let space = StateSpace::from_states([BasisState::VACUUM, photon], SpaceMode::Closure);
    let h = build_hamiltonian(&p, &space, &GatingPolicy::default()).unwrap();
    let ch = build_jump_channels(&p, &space).unwrap();
    let rho0 = DensityMatrix::basis(&space, photon).unwrap();
    let dt = 1e-3 / gamma;
    let cfg = SimConfig::new(dt, t_end, 50);
    let tr = evolve(&rho0, &h, &ch, &p, &cfg).unwrap();
    let i = space.index_of(photon).unwrap();
    tr.times
        .iter()
        .zip(&tr.snapshots)
        .map(|(t, s)| (s.population(i) - (-gamma * t).exp()).abs())
        .fold(0.0, f64::max)
}

/// Worst `|D − S(A)|` over random pure states on the table space.
pub fn pure_state_discord_error(count: usize, seed: u64) -> f64 {
    let space = table_space();
    let eval = qdiscord::DiscordEvaluator::new(&space, SearchConfig::default()).unwrap();
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let psi = random_vector(&mut r, space.len());
        let p = eval.evaluate(&pure_density(&space, &psi), 0.0).unwrap();
        worst = worst.max((p.discord - p.s_a).abs());
    }
    worst
}

/// `ρ_A ⊗ ρ_B` on the full space, matter factor of the given rank.
pub fn product_state(rng: &mut StdRng, rank_b: usize) -> DensityMatrix<f64> {
    let a = random_density(rng, 4, 4);
    let b = random_density(rng, 32, rank_b);
    let full = full_space();
    let m = CMatrix64::from_fn(128, 128, |i, j| {
        let (si, sj) = (full.state(i).code() as usize, full.state(j).code() as usize);
        a[(si >> 5, sj >> 5)] * b[(si & 31, sj & 31)]
    });
    DensityMatrix::new(m, full.tag())
}

/// `Σ p_ij |i⟩⟨i| ⊗ |j⟩⟨j|` with random weights on the full space.
pub fn classical_classical_state(rng: &mut StdRng) -> DensityMatrix<f64> {
    let full = full_space();
    let w: Vec<f64> = (0..128).map(|_| rng.gen_range(0.0..1.0)).collect();
    let total: f64 = w.iter().sum();
    let m = CMatrix64::from_fn(128, 128, |i, j| if i == j { c(w[i] / total, 0.0) } else { c(0.0, 0.0) });
    DensityMatrix::new(m, full.tag())
}

/// Worst discord over random product and classical-classical states.
pub fn uncorrelated_discord(count: usize, seed: u64) -> f64 {
    let full = full_space();
    let eval = qdiscord::DiscordEvaluator::new(&full, SearchConfig::default()).unwrap();
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let p = eval.evaluate(&product_state(&mut r, 2), 0.0).unwrap();
        worst = worst.max(p.discord.abs());
        let q = eval.evaluate(&classical_classical_state(&mut r), 0.0).unwrap();
        worst = worst.max(q.discord.abs());
    }
    worst
}

/// Running worst cases of the density-matrix and discord invariants.
#[derive(Debug, Clone)]
pub struct Invariants {
    pub snapshots: usize,
    pub trace: f64,
    pub hermiticity: f64,
    pub min_eigenvalue: f64,
    /// Closed runs only.
    pub purity: f64,
    /// `|tr(ρH) − tr(ρ₀H)| / ‖H‖`, closed runs only.
    pub energy: f64,
    pub points: usize,
    pub discord_min: f64,
    /// Largest `D − min(I, S_A)`.
    pub discord_excess: f64,
    /// Largest `|D − (I − J)|`.
    pub identity: f64,
    pub initial_discord: f64,
}

impl Default for Invariants {
    fn default() -> Self {
        Invariants {
            snapshots: 0,
            trace: 0.0,
            hermiticity: 0.0,
            min_eigenvalue: f64::INFINITY,
            purity: 0.0,
            energy: 0.0,
            points: 0,
            discord_min: f64::INFINITY,
            discord_excess: f64::NEG_INFINITY,
            identity: 0.0,
            initial_discord: 0.0,
        }
    }
}

impl Invariants {
    pub fn trajectory(&mut self, run: &Run<f64>, closed: bool) {
        let h = &run.hamiltonian;
        let norm = hermitian_eigenvalues(h.matrix())
            .iter()
            .fold(0.0_f64, |a, x| a.max(x.abs()))
            .max(f64::MIN_POSITIVE);
        let e0 = run.trajectory.snapshots[0].expectation(h).unwrap();
        for s in &run.trajectory.snapshots {
            self.snapshots += 1;
            self.trace = self.trace.max((s.trace() - 1.0).abs());
            self.hermiticity = self.hermiticity.max(s.hermiticity_error());
            self.min_eigenvalue = self.min_eigenvalue.min(s.min_eigenvalue());
            if closed {
                self.purity = self.purity.max((s.purity() - 1.0).abs());
                self.energy = self.energy.max((s.expectation(h).unwrap() - e0).abs() / norm);
            }
        }
    }

    pub fn points(&mut self, points: &[DiscordPoint<f64>]) {
        for (i, p) in points.iter().enumerate() {
            self.points += 1;
            self.discord_min = self.discord_min.min(p.discord);
            self.discord_excess = self.discord_excess.max(p.discord - p.mutual_information.min(p.s_a));
            self.identity = self
                .identity
                .max((p.discord - (p.mutual_information - p.classical_correlation)).abs());
            if i == 0 && p.t == 0.0 {
                self.initial_discord = self.initial_discord.max(p.discord.abs());
            }
        }
    }

    pub fn density_ok(&self) -> bool {
        self.trace <= 1e-9 && self.hermiticity <= 1e-12 && self.min_eigenvalue >= -1e-8
    }

    pub fn closed_ok(&self) -> bool {
        self.purity <= 1e-8 && self.energy <= 1e-8
    }

    pub fn discord_ok(&self) -> bool {
        self.discord_min >= -1e-9 && self.discord_excess <= 1e-6 && self.identity <= 1e-9 && self.initial_discord <= 1e-8
    }
}

/// Bond populations are complementary on every snapshot.
pub fn bond_partition_error(run: &Run<f64>) -> f64 {
    run.trajectory
        .snapshots
        .iter()
        .map(|s| {
            (population(s, &run.space, AggregatePredicate::BondFormed)
                + population(s, &run.space, AggregatePredicate::BondBroken)
                - s.trace())
            .abs()
        })
        .fold(0.0, f64::max)
}
