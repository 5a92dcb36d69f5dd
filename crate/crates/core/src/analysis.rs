//! Aggregate populations, sinusoid fitting and the period-versus-bond-coupling law.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::discord::{DiscordPoint, SearchConfig};
use crate::dynamics::{DensityMatrix, SimConfig, Trajectory};
use crate::experiment::{ExperimentError, Model, Run};
use crate::operators::ModelParams;
use crate::scalar::{lit, to_f64, Real};
use crate::statespace::{BasisState, GatingPolicy, Label, SpaceMode, StateSpace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("series has no dominant frequency")]
    NoDominantFrequency,
    #[error("envelope window {window} exceeds series length {len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error("envelope window {0} must be odd and positive")]
    InvalidWindow(usize),
    #[error("times and values differ in length ({times} vs {values})")]
    LengthMismatch { times: usize, values: usize },
    #[error("coupling ratio {0} is outside (0, 1]")]
    RatioOutOfRange(f64),
}

/// Sets of basis states whose total population is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregatePredicate {
    /// `L = 0`.
    BondFormed,
    /// `L = 1`.
    BondBroken,
    /// `p1 + p2 = 0`.
    PhotonsZero,
    /// `p1 + p2 ≥ 1`.
    PhotonsPresent,
}

impl AggregatePredicate {
    pub const ALL: [AggregatePredicate; 4] = [
        AggregatePredicate::BondFormed,
        AggregatePredicate::BondBroken,
        AggregatePredicate::PhotonsZero,
        AggregatePredicate::PhotonsPresent,
    ];

    pub fn matches(self, s: BasisState) -> bool {
        let photons = s.get(Label::PhotonUp) + s.get(Label::PhotonDown);
        match self {
            AggregatePredicate::BondFormed => s.get(Label::Bond) == 0,
            AggregatePredicate::BondBroken => s.get(Label::Bond) == 1,
            AggregatePredicate::PhotonsZero => photons == 0,
            AggregatePredicate::PhotonsPresent => photons >= 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AggregatePredicate::BondFormed => "bond_formed",
            AggregatePredicate::BondBroken => "bond_broken",
            AggregatePredicate::PhotonsZero => "photons_zero",
            AggregatePredicate::PhotonsPresent => "photons_present",
        }
    }
}

/// Total weight of the states satisfying `predicate`.
pub fn population<T: Real>(rho: &DensityMatrix<T>, space: &StateSpace, predicate: AggregatePredicate) -> T {
    space
        .states()
        .iter()
        .enumerate()
        .filter(|(_, s)| predicate.matches(**s))
        .fold(T::zero(), |acc, (i, _)| acc + rho.population(i))
}

/// Weight of one basis state; zero when the space lacks it.
pub fn state_population<T: Real>(rho: &DensityMatrix<T>, space: &StateSpace, s: BasisState) -> T {
    space.index_of(s).map_or(T::zero(), |i| rho.population(i))
}

/// Column names of [`observables_csv`].
pub const OBSERVABLES_CSV_HEADER: &str =
    "t,bond_formed,bond_broken,photons_zero,photons_present,vacuum,trace,purity";

/// Aggregate populations, the `|0000000⟩` population, trace and purity per snapshot.
pub fn observables_csv<T: Real>(traj: &Trajectory<T>, space: &StateSpace) -> String {
    let mut out = String::from(OBSERVABLES_CSV_HEADER);
    out.push('\n');
    for (t, rho) in traj.times.iter().zip(&traj.snapshots) {
        let _ = write!(out, "{:e}", to_f64(*t));
        for p in AggregatePredicate::ALL {
            let _ = write!(out, ",{:e}", to_f64(population(rho, space, p)));
        }
        let _ = writeln!(
            out,
            ",{:e},{:e},{:e}",
            to_f64(state_population(rho, space, BasisState::VACUUM)),
            to_f64(rho.trace()),
            to_f64(rho.purity())
        );
    }
    out
}

/// Least-squares fit of `a·sin(b t + c) + d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult<T> {
    pub amplitude: T,
    pub angular_frequency: T,
    pub phase: T,
    pub offset: T,
    pub period: T,
    pub rms_residual: T,
}

/// Best `(A, B, d)` for `A sin(b t) + B cos(b t) + d` and its sum of squared residuals.
fn linear_fit<T: Real>(t: &[T], y: &[T], b: T) -> (Vector3<T>, T) {
    let mut ata = Matrix3::<T>::zeros();
    let mut aty = Vector3::<T>::zeros();
    for (&ti, &yi) in t.iter().zip(y) {
        let (s, c) = (b * ti).sin_cos();
        let row = Vector3::new(s, c, T::one());
        ata += row * row.transpose();
        aty += row * yi;
    }
    let coef = ata
        .cholesky()
        .map(|ch| ch.solve(&aty))
        .unwrap_or_else(|| ata.pseudo_inverse(lit(1e-14)).map(|p| p * aty).unwrap_or_else(|_| Vector3::zeros()));
    let mut ss = T::zero();
    for (&ti, &yi) in t.iter().zip(y) {
        let (s, c) = (b * ti).sin_cos();
        let r = yi - (coef[0] * s + coef[1] * c + coef[2]);
        ss += r * r;
    }
    (coef, ss)
}

/// Fits `a·sin(b t + c) + d`, seeding `b` from the strongest discrete Fourier
/// component of the mean-removed series.
pub fn fit_sinusoid<T: Real>(times: &[T], values: &[T]) -> Result<FitResult<T>, AnalysisError> {
    const MIN_SAMPLES: usize = 8;
    if times.len() != values.len() {
        return Err(AnalysisError::LengthMismatch {
            times: times.len(),
            values: values.len(),
        });
    }
    let n = times.len();
    if n < MIN_SAMPLES {
        return Err(AnalysisError::InsufficientData {
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    let t0 = times[0];
    let t: Vec<T> = times.iter().map(|&x| x - t0).collect();
    let span = t[n - 1];
    let mean = values.iter().fold(T::zero(), |a, &v| a + v) / lit(n as f64);
    let dev: Vec<T> = values.iter().map(|&v| v - mean).collect();
    let scale = values.iter().fold(T::zero(), |a, &v| a.max(v.abs())).max(lit(1e-300));
    let spread = dev.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
    if !(span > T::zero()) || spread <= scale * lit(1e-12) {
        return Err(AnalysisError::NoDominantFrequency);
    }

    // Periodogram on the actual sample times, bins of 2π / span.
    let bin = T::two_pi() / span;
    let mut best_k = 0;
    let mut best_power = T::zero();
    for k in 1..=n / 2 {
        let w = bin * lit(k as f64);
        let (mut re, mut im) = (T::zero(), T::zero());
        for (&ti, &yi) in t.iter().zip(&dev) {
            let (s, c) = (w * ti).sin_cos();
            re += yi * c;
            im += yi * s;
        }
        let power = re * re + im * im;
        if power > best_power {
            best_power = power;
            best_k = k;
        }
    }
    if best_k == 0 {
        return Err(AnalysisError::NoDominantFrequency);
    }

    // Scan ±1.5 bins, then golden-section refinement around the best scan point.
    let center = bin * lit(best_k as f64);
    let scan = 61;
    let width = bin * lit(1.5);
    let step = width * lit(2.0 / (scan - 1) as f64);
    let lowest = bin * lit(0.25);
    let mut best_b = center;
    let mut best_ss = linear_fit(&t, values, center).1;
    for i in 0..scan {
        let b = center - width + step * lit(i as f64);
        if b <= lowest {
            continue;
        }
        let ss = linear_fit(&t, values, b).1;
        if ss < best_ss {
            best_ss = ss;
            best_b = b;
        }
    }
    let golden = lit::<T>(0.5 * (5f64.sqrt() - 1.0));
    let mut lo = (best_b - step).max(lowest);
    let mut hi = best_b + step;
    let mut x1 = hi - golden * (hi - lo);
    let mut x2 = lo + golden * (hi - lo);
    let mut f1 = linear_fit(&t, values, x1).1;
    let mut f2 = linear_fit(&t, values, x2).1;
    for _ in 0..80 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - golden * (hi - lo);
            f1 = linear_fit(&t, values, x1).1;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + golden * (hi - lo);
            f2 = linear_fit(&t, values, x2).1;
        }
    }
    let candidate = (lo + hi) * lit(0.5);
    let (b, (coef, ss)) = {
        let refined = linear_fit(&t, values, candidate);
        if refined.1 <= best_ss {
            (candidate, refined)
        } else {
            (best_b, linear_fit(&t, values, best_b))
        }
    };

    let amplitude = coef[0].hypot(coef[1]);
    if amplitude <= scale * lit(1e-12) {
        return Err(AnalysisError::NoDominantFrequency);
    }
    // A sin + B cos = a sin(b(t − t0) + c₀); shift the phase back to absolute time.
    let c0 = coef[1].atan2(coef[0]);
    let phase = wrap_phase(c0 - b * t0);
    Ok(FitResult {
        amplitude,
        angular_frequency: b,
        phase,
        offset: coef[2],
        period: T::two_pi() / b,
        rms_residual: (ss / lit(n as f64)).sqrt(),
    })
}

fn wrap_phase<T: Real>(x: T) -> T {
    let two_pi = T::two_pi();
    let mut w = x % two_pi;
    if w > T::pi() {
        w -= two_pi;
    } else if w <= -T::pi() {
        w += two_pi;
    }
    w
}

/// Centered sliding-window maxima over an odd `window` of samples.
pub fn envelope<T: Real>(times: &[T], values: &[T], window: usize) -> Result<(Vec<T>, Vec<T>), AnalysisError> {
    if times.len() != values.len() {
        return Err(AnalysisError::LengthMismatch {
            times: times.len(),
            values: values.len(),
        });
    }
    if window == 0 || window % 2 == 0 {
        return Err(AnalysisError::InvalidWindow(window));
    }
    if window > values.len() {
        return Err(AnalysisError::WindowTooLarge {
            window,
            len: values.len(),
        });
    }
    let half = window / 2;
    let count = values.len() - window + 1;
    let mut out_t = Vec::with_capacity(count);
    let mut out_v = Vec::with_capacity(count);
    for i in 0..count {
        let m = values[i..i + window].iter().fold(values[i], |a, &v| a.max(v));
        out_t.push(times[i + half]);
        out_v.push(m);
    }
    Ok((out_t, out_v))
}

/// Smallest odd sample count covering `duration` at spacing `dt`.
pub fn window_for<T: Real>(duration: T, dt: T) -> usize {
    let w = to_f64(duration / dt).round().max(1.0) as usize;
    if w % 2 == 0 {
        w + 1
    } else {
        w
    }
}

/// Largest discord of a series with its time.
pub fn peak_discord<T: Real>(points: &[DiscordPoint<T>]) -> Option<(T, T)> {
    points
        .iter()
        .fold(None, |best: Option<(T, T)>, p| match best {
            Some((_, d)) if d >= p.discord => best,
            _ => Some((p.t, p.discord)),
        })
}

/// Settings of a period-law sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodLawSettings<T> {
    /// Horizon in units of `2π/g_ω`.
    pub horizon_periods: T,
    /// Snapshots per fast carrier period `2π/g`.
    pub samples_per_carrier: usize,
    /// Fit the envelope instead of the raw series; `None` chooses the envelope when `ζ > 0`.
    pub use_envelope: Option<bool>,
    pub mode: SpaceMode,
    pub gating: GatingPolicy,
    pub search: SearchConfig<T>,
    /// Integrator step; `None` uses the default.
    pub dt: Option<T>,
}

impl<T: Real> Default for PeriodLawSettings<T> {
    fn default() -> Self {
        PeriodLawSettings {
            horizon_periods: lit(6.0),
            samples_per_carrier: 16,
            use_envelope: None,
            mode: SpaceMode::TableCompat,
            gating: GatingPolicy::default(),
            search: SearchConfig::default(),
            dt: None,
        }
    }
}

/// Fitted period of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodSample<T: Real> {
    pub g_omega_over_g: T,
    pub period: T,
    pub rms_residual: T,
    pub used_envelope: bool,
    pub envelope_window: usize,
    pub fit: FitResult<T>,
    pub discord: Vec<DiscordPoint<T>>,
}

/// `T = c / (g_ω/g)` fitted to a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodLawResult<T: Real> {
    pub samples: Vec<PeriodSample<T>>,
    /// Seconds.
    pub constant_c: T,
    /// RMS relative misfit of `T·(g_ω/g)` about `c`.
    pub fit_residual: T,
}

/// Closed-system run for one coupling ratio, sampled for period fitting.
pub fn period_run<T: Real>(
    ratio: T,
    zeta: T,
    base_params: &ModelParams<T>,
    settings: &PeriodLawSettings<T>,
) -> Result<Run<T>, ExperimentError> {
    if !(ratio > T::zero() && ratio <= T::one()) {
        return Err(AnalysisError::RatioOutOfRange(to_f64(ratio)).into());
    }
    let g = base_params.g_up;
    let mut params = *base_params;
    params.g_bond = ratio * g;
    params.zeta = zeta;
    params.gamma_up = T::zero();
    params.gamma_down = T::zero();
    params.gamma_phonon = T::zero();
    params.influx_up = T::zero();
    params.influx_down = T::zero();
    params.influx_phonon = T::zero();
    let mut model = Model::new(params);
    model.mode = settings.mode;
    model.gating = settings.gating;

    let carrier = T::two_pi() / g;
    let horizon = settings.horizon_periods * T::two_pi() / params.g_bond;
    let spacing = carrier / lit(settings.samples_per_carrier as f64);
    let dt = settings.dt.unwrap_or_else(|| crate::dynamics::default_dt(&params));
    let stride = to_f64(spacing / dt).round().max(1.0) as usize;
    model.run(&SimConfig::new(dt, horizon, stride))
}

/// Discord series of a [`period_run`] and its fitted period.
pub fn period_from_run<T: Real>(
    run: &Run<T>,
    settings: &PeriodLawSettings<T>,
) -> Result<PeriodSample<T>, ExperimentError> {
    let params = run.trajectory.params;
    let g = params.g_up;
    let discord = run.discord_series(&settings.search, 1)?;
    if discord.len() < 2 {
        return Err(AnalysisError::InsufficientData {
            needed: 2,
            got: discord.len(),
        }
        .into());
    }
    let times: Vec<T> = discord.iter().map(|p| p.t).collect();
    let values: Vec<T> = discord.iter().map(|p| p.discord).collect();
    let used_envelope = settings.use_envelope.unwrap_or(params.zeta > T::zero());
    let (fit, window) = if used_envelope {
        let window = window_for(T::two_pi() / g, times[1] - times[0]);
        let (et, ev) = envelope(&times, &values, window)?;
        (fit_sinusoid(&et, &ev)?, window)
    } else {
        (fit_sinusoid(&times, &values)?, 1)
    };
    Ok(PeriodSample {
        g_omega_over_g: params.g_bond / g,
        period: fit.period,
        rms_residual: fit.rms_residual,
        used_envelope,
        envelope_window: window,
        fit,
        discord,
    })
}

/// Closed-system discord series for one coupling ratio, and its fitted period.
pub fn period_point<T: Real>(
    ratio: T,
    zeta: T,
    base_params: &ModelParams<T>,
    settings: &PeriodLawSettings<T>,
) -> Result<PeriodSample<T>, ExperimentError> {
    let mut sample = period_from_run(&period_run(ratio, zeta, base_params, settings)?, settings)?;
    sample.g_omega_over_g = ratio;
    Ok(sample)
}

/// Fits `T = c / (g_ω/g)` over closed-system runs at each ratio in
/// `g_omega_values` (units of `g = base_params.g_up`).
pub fn period_law<T: Real>(
    g_omega_values: &[T],
    zeta: T,
    base_params: &ModelParams<T>,
    settings: &PeriodLawSettings<T>,
) -> Result<PeriodLawResult<T>, ExperimentError> {
    let samples = g_omega_values
        .iter()
        .map(|&r| period_point(r, zeta, base_params, settings))
        .collect::<Result<Vec<_>, _>>()?;
    period_law_from_samples(samples)
}

/// Sorts samples by ratio and fits the inverse law.
pub fn period_law_from_samples<T: Real>(mut samples: Vec<PeriodSample<T>>) -> Result<PeriodLawResult<T>, ExperimentError> {
    if samples.is_empty() {
        return Err(AnalysisError::InsufficientData { needed: 1, got: 0 }.into());
    }
    samples.sort_by(|a, b| {
        a.g_omega_over_g
            .partial_cmp(&b.g_omega_over_g)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let (constant_c, fit_residual) = inverse_law_fit(
        &samples.iter().map(|s| (s.g_omega_over_g, s.period)).collect::<Vec<_>>(),
    );
    Ok(PeriodLawResult {
        samples,
        constant_c,
        fit_residual,
    })
}

/// Least-squares `c` for `T·r ≈ c` and the RMS relative misfit.
pub fn inverse_law_fit<T: Real>(points: &[(T, T)]) -> (T, T) {
    let n = lit::<T>(points.len() as f64);
    let c = points.iter().fold(T::zero(), |a, &(r, p)| a + r * p) / n;
    let res = points.iter().fold(T::zero(), |a, &(r, p)| {
        let e = r * p / c - T::one();
        a + e * e
    });
    (c, (res / n).sqrt())
}

/// Sweep CSV plus the law summary line.
pub fn period_law_csv<T: Real>(result: &PeriodLawResult<T>) -> (String, String) {
    let mut sweep = String::from("g_omega_over_g,fitted_period_s,rms_residual\n");
    for s in &result.samples {
        let _ = writeln!(
            sweep,
            "{:e},{:e},{:e}",
            to_f64(s.g_omega_over_g),
            to_f64(s.period),
            to_f64(s.rms_residual)
        );
    }
    let summary = format!(
        "c_seconds,residual\n{:e},{:e}\n",
        to_f64(result.constant_c),
        to_f64(result.fit_residual)
    );
    (sweep, summary)
}
