//! Model assembly and the standard simulation pipeline: state space,
//! Hamiltonian, channels, evolution and per-snapshot discord.

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::discord::{DiscordError, DiscordEvaluator, DiscordPoint, SearchConfig};
use crate::dynamics::{evolve, initial_state, DynamicsError, SimConfig, Trajectory};
use crate::operators::{build_hamiltonian, build_jump_channels, ModelParams, OperatorError, OperatorMatrix};
use crate::scalar::Real;
use crate::statespace::{generate_space, initial_seeds, GatingPolicy, SpaceError, SpaceMode, StateSpace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Discord(#[from] DiscordError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// Parameters plus the structural choices that fix the state space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model<T> {
    pub params: ModelParams<T>,
    pub gating: GatingPolicy,
    pub mode: SpaceMode,
    /// Close the space under jump operators as well as the Hamiltonian.
    pub include_dissipation: bool,
}

impl<T: Real> Model<T> {
    /// Table-compatible space, default gating, dissipative closure when any
    /// rate is nonzero.
    pub fn new(params: ModelParams<T>) -> Self {
        Model {
            params,
            gating: GatingPolicy::default(),
            mode: SpaceMode::TableCompat,
            include_dissipation: !params.is_closed(),
        }
    }

    pub fn with_mode(mut self, mode: SpaceMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn space(&self) -> Result<StateSpace, ExperimentError> {
        Ok(generate_space(
            &initial_seeds(),
            &self.params,
            &self.gating,
            self.include_dissipation,
            self.mode,
        )?)
    }

    /// Evolves the standard initial state.
    pub fn run(&self, cfg: &SimConfig<T>) -> Result<Run<T>, ExperimentError> {
        let space = self.space()?;
        let hamiltonian = build_hamiltonian(&self.params, &space, &self.gating)?;
        let channels = build_jump_channels(&self.params, &space)?;
        let rho0 = initial_state(&space)?;
        let trajectory = evolve(&rho0, &hamiltonian, &channels, &self.params, cfg)?;
        Ok(Run {
            space,
            hamiltonian,
            trajectory,
        })
    }
}

/// Output of [`Model::run`].
#[derive(Debug, Clone)]
pub struct Run<T: Real> {
    pub space: StateSpace,
    pub hamiltonian: OperatorMatrix<T>,
    pub trajectory: Trajectory<T>,
}

impl<T: Real> Run<T> {
    /// Discord of every `every`-th snapshot, always including the last.
    pub fn discord_series(
        &self,
        search: &SearchConfig<T>,
        every: usize,
    ) -> Result<Vec<DiscordPoint<T>>, ExperimentError> {
        let eval = DiscordEvaluator::new(&self.space, *search)?;
        let n = self.trajectory.len();
        let every = every.max(1);
        let mut out = Vec::with_capacity(n / every + 1);
        for (i, (t, rho)) in self.trajectory.times.iter().zip(&self.trajectory.snapshots).enumerate() {
            if i % every == 0 || i + 1 == n {
                out.push(eval.evaluate(rho, *t)?);
            }
        }
        Ok(out)
    }

    /// Snapshot of largest discord under `search`, earliest on ties.
    ///
    /// Discord under the tied, unrefined grid bounds the discord under
    /// `search` from above (its grid is a subset and refinement only lowers
    /// the minimum), so snapshots are evaluated in decreasing order of the
    /// bound until no remaining bound can beat the best value found.
    pub fn peak_discord(&self, search: &SearchConfig<T>) -> Result<PeakDiscord<T>, ExperimentError> {
        let bound_search = SearchConfig {
            tie_thetas: true,
            tie_phis: true,
            refine: false,
            ..*search
        };
        let bound_eval = DiscordEvaluator::new(&self.space, bound_search)?;
        let eval = DiscordEvaluator::new(&self.space, *search)?;
        let traj = &self.trajectory;
        let mut bounds = Vec::with_capacity(traj.len());
        for (i, (t, rho)) in traj.times.iter().zip(&traj.snapshots).enumerate() {
            bounds.push((bound_eval.evaluate(rho, *t)?.discord, i));
        }
        bounds.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
        let mut best: Option<(usize, DiscordPoint<T>)> = None;
        let mut evaluated = 0;
        for &(bound, i) in &bounds {
            if let Some((_, p)) = &best {
                if bound < p.discord {
                    break;
                }
            }
            let p = eval.evaluate(&traj.snapshots[i], traj.times[i])?;
            evaluated += 1;
            let better = match &best {
                None => true,
                Some((j, q)) => p.discord > q.discord || (p.discord == q.discord && i < *j),
            };
            if better {
                best = Some((i, p));
            }
        }
        let (index, point) = best.expect("trajectory has snapshots");
        Ok(PeakDiscord {
            index,
            point,
            full_evaluations: evaluated,
        })
    }
}

/// Result of [`Run::peak_discord`].
#[derive(Debug, Clone, PartialEq)]
pub struct PeakDiscord<T: Real> {
    /// Snapshot index in the trajectory.
    pub index: usize,
    pub point: DiscordPoint<T>,
    /// Snapshots evaluated with the requested search.
    pub full_evaluations: usize,
}
