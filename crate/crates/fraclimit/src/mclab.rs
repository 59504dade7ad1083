//! Monte Carlo verification of the limit theorems for integrated Hermite
//! functionals of the stationary process: variance scaling against the
//! slowly varying norming, the weak / boundary / strong regime experiments,
//! and the exponential-smoothing limits. Everything is replicate-parallel
//! and bit-reproducible from (config, seed).

use crate::constants::{self, ConstError, Regime};
use crate::fracproc::{
    foup_cov_timedomain, foup_from_fbm, FbmSampler, FoupSpec, FracError, GaussPath, HurstIndex,
    StationaryFoupSampler, TimeGrid, EXP_SAFETY,
};
use crate::hermite::{hermite_eval, HermiteError, HermiteExpansion};
use crate::quad::{self, QuadConfig, QuadError};
use crate::seeds;
use crate::stats::{self, EmpiricalSummary, StatsError};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma;
use thiserror::Error;

pub use crate::stats::{empirical_summary, ks_normal, ks_statistic};

/// Floor on replicate counts for the scaling study, where the output is a
/// variance ratio and small samples are meaningless.
pub const MIN_SCALING_REPS: usize = 500;

#[derive(Debug, Error)]
pub enum McError {
    #[error("functional of rank {q} at H = {h} is in the {regime:?} regime, not the required one")]
    WrongRegime { q: usize, h: f64, regime: Regime },
    #[error("fraction u = {u} outside [0, 1]; the path does not cover the requested window")]
    GridTooShort { u: f64 },
    #[error("t ladder must be nonempty, positive and strictly increasing")]
    BadLadder,
    #[error("horizon t = {t} invalid here")]
    BadHorizon { t: f64 },
    #[error("Hermite rank {q} invalid; rank must be at least 1")]
    BadRank { q: usize },
    #[error("{reps} replicates below the minimum {minimum}")]
    TooFewReps { reps: usize, minimum: usize },
    #[error("long-run variance {sigma_sq:.3e} is degenerate relative to the functional's scale")]
    DegenerateNorming { sigma_sq: f64 },
    #[error(transparent)]
    Frac(#[from] FracError),
    #[error(transparent)]
    Hermite(#[from] HermiteError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Const(#[from] ConstError),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

fn factorial(q: usize) -> f64 {
    (1..=q).map(|k| k as f64).product()
}

/// Trapezoid approximation of int_0^{T u} f(path_s) ds, evaluated at grid
/// resolution (the window endpoint is rounded to the nearest grid node).
pub fn integrate_functional<F>(path: &GaussPath, f: F, u: f64) -> Result<f64, McError>
where
    F: Fn(f64) -> f64,
{
    if !u.is_finite() || !(0.0..=1.0).contains(&u) {
        return Err(McError::GridTooShort { u });
    }
    let k = (u * path.grid.steps() as f64).round() as usize;
    if k == 0 {
        return Ok(0.0);
    }
    let vals: Vec<f64> = path.values[..=k].iter().map(|&x| f(x)).collect();
    Ok(stats::trapezoid(&vals, path.grid.dt()))
}

fn l_eval_impl(
    h: HurstIndex,
    gamma_rate: f64,
    q: usize,
    t: f64,
    absolute: bool,
) -> Result<f64, McError> {
    if q == 0 {
        return Err(McError::BadRank { q });
    }
    if !(gamma_rate.is_finite() && gamma_rate > 0.0) {
        return Err(FracError::BadRate {
            gamma: gamma_rate,
            requirement: "gamma > 0",
        }
        .into());
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(McError::BadHorizon { t });
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    if h.value() == 0.5 {
        // r(u) = e^{-gamma u} exactly, and it is positive, so the absolute
        // variant coincides.
        let qg = q as f64 * gamma_rate;
        return Ok(-(-qg * t).exp_m1() / qg);
    }
    let cfg = QuadConfig {
        tol_abs: 1e-10,
        tol_rel: 1e-9,
        max_segments: 4000,
    };
    let f = |u: f64| {
        let r = foup_cov_timedomain(h, gamma_rate, u).unwrap_or(f64::NAN);
        if absolute {
            r.abs().powi(q as i32)
        } else {
            r.powi(q as i32)
        }
    };
    Ok(quad::adaptive(&f, 0.0, t, &cfg)?.value)
}

/// L(t) = int_0^t r^q(u) du, the slowly varying factor of the variance
/// norming. Exact exponential shortcut at H = 1/2.
pub fn l_eval(h: HurstIndex, gamma_rate: f64, q: usize, t: f64) -> Result<f64, McError> {
    l_eval_impl(h, gamma_rate, q, t, false)
}

/// Companion with |r|^q, used for the slowly-varying ratio diagnostic.
pub fn l_abs_eval(h: HurstIndex, gamma_rate: f64, q: usize, t: f64) -> Result<f64, McError> {
    l_eval_impl(h, gamma_rate, q, t, true)
}

/// L and L_abs tabulated over a ladder of horizons.
#[derive(Debug, Clone, Serialize)]
pub struct SlowlyVaryingPair {
    pub t: Vec<f64>,
    pub l: Vec<f64>,
    pub l_abs: Vec<f64>,
}

fn check_ladder(t_ladder: &[f64]) -> Result<(), McError> {
    let ok = !t_ladder.is_empty()
        && t_ladder.iter().all(|t| t.is_finite() && *t > 0.0)
        && t_ladder.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(McError::BadLadder)
    }
}

pub fn slowly_varying_pair(
    h: HurstIndex,
    gamma_rate: f64,
    q: usize,
    t_ladder: &[f64],
) -> Result<SlowlyVaryingPair, McError> {
    check_ladder(t_ladder)?;
    let mut l = Vec::with_capacity(t_ladder.len());
    let mut l_abs = Vec::with_capacity(t_ladder.len());
    for &t in t_ladder {
        l.push(l_eval(h, gamma_rate, q, t)?);
        l_abs.push(l_abs_eval(h, gamma_rate, q, t)?);
    }
    Ok(SlowlyVaryingPair {
        t: t_ladder.to_vec(),
        l,
        l_abs,
    })
}

/// Replicate-parallel map with one independent generator per replicate
/// index, so results are identical for any worker count.
fn run_replicates<F>(reps: usize, seed: u64, task: F) -> Result<Vec<f64>, McError>
where
    F: Fn(&mut ChaCha12Rng) -> Result<f64, McError> + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeds::rng_for(seed, i as u64);
            task(&mut rng)
        })
        .collect()
}

fn stationary_grid(t: f64, dt: f64) -> Result<TimeGrid, McError> {
    if !(dt.is_finite() && dt > 0.0 && t.is_finite() && t > 0.0) {
        return Err(McError::BadHorizon { t });
    }
    let steps = (t / dt).round().max(1.0) as usize;
    Ok(TimeGrid::new(steps as f64 * dt, steps)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingConfig {
    pub q: usize,
    pub h: f64,
    pub gamma: f64,
    pub dt: f64,
    pub reps: usize,
    pub seed: u64,
}

/// Variance of the integrated rank-q functional across a horizon ladder,
/// each entry normalized by 2 q! t L(t).
#[derive(Debug, Clone, Serialize)]
pub struct ScalingStudy {
    pub config: ScalingConfig,
    pub t_ladder: Vec<f64>,
    pub l_values: Vec<f64>,
    /// Var(Z_t) / (2 q! t L(t)); approaches one as t grows.
    pub variance_ratio: Vec<f64>,
    /// Summary of the fully normalized statistic at each horizon.
    pub summaries: Vec<EmpiricalSummary>,
    pub burn_in_short: bool,
}

pub fn variance_scaling(
    q: usize,
    h: HurstIndex,
    gamma_rate: f64,
    t_ladder: &[f64],
    reps: usize,
    dt: f64,
    seed: u64,
) -> Result<ScalingStudy, McError> {
    if q == 0 {
        return Err(McError::BadRank { q });
    }
    if reps < MIN_SCALING_REPS {
        return Err(McError::TooFewReps {
            reps,
            minimum: MIN_SCALING_REPS,
        });
    }
    check_ladder(t_ladder)?;

    let spec = FoupSpec::with_default_burn_in(h, gamma_rate)?;
    let mut l_values = Vec::with_capacity(t_ladder.len());
    let mut ratios = Vec::with_capacity(t_ladder.len());
    let mut summaries = Vec::with_capacity(t_ladder.len());
    let mut burn_in_short = false;

    for (ti, &t) in t_ladder.iter().enumerate() {
        let grid = stationary_grid(t, dt)?;
        let sampler = StationaryFoupSampler::new(spec, grid)?;
        burn_in_short |= sampler.burn_in_short();
        let t_eff = grid.horizon();
        let l = l_eval(h, gamma_rate, q, t_eff)?;
        let norm = (2.0 * factorial(q) * t_eff * l).sqrt();
        let seed_t = seeds::replicate_seed(seed, ti as u64);
        let zs = run_replicates(reps, seed_t, |rng| {
            let path = sampler.sample(rng)?;
            let z = integrate_functional(&path, |x| hermite_eval(q, x), 1.0)?;
            Ok(z / norm)
        })?;
        let summary = stats::empirical_summary(&zs)?;
        l_values.push(l);
        ratios.push(summary.variance);
        summaries.push(summary);
    }

    Ok(ScalingStudy {
        config: ScalingConfig {
            q,
            h: h.value(),
            gamma: gamma_rate,
            dt,
            reps,
            seed,
        },
        t_ladder: t_ladder.to_vec(),
        l_values,
        variance_ratio: ratios,
        summaries,
        burn_in_short,
    })
}

/// Long-run variance of the integrated functional per unit time,
/// sum_{k >= rank} (c_k^2 / k!) * 2 * [2 Gamma(2H+1)]^{-k} I_{k,H} / gamma,
/// i.e. the coefficient-series form with each lag integral in closed
/// quadrature form. Defined exactly on the weak regime of the rank.
pub fn weak_sigma_sq_series(
    f: &HermiteExpansion,
    h: HurstIndex,
    gamma_rate: f64,
) -> Result<f64, McError> {
    if !(gamma_rate.is_finite() && gamma_rate > 0.0) {
        return Err(FracError::BadRate {
            gamma: gamma_rate,
            requirement: "gamma > 0",
        }
        .into());
    }
    let g2 = 2.0 * gamma(2.0 * h.value() + 1.0);
    let mut total = 0.0;
    let mut fact = 1.0;
    for k in 1..=f.k_max {
        fact *= k as f64;
        let c = f.coeffs[k - 1];
        // Sub-rank coefficients are below detection threshold by
        // construction; their I integrals may not even converge.
        if k < f.rank || c * c / fact <= 1e-20 * f.second_moment {
            continue;
        }
        total +=
            c * c / fact * 2.0 * g2.powi(-(k as i32)) * constants::i_qh(k, h.value())? / gamma_rate;
    }
    Ok(total)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub h: f64,
    pub gamma: f64,
    pub t: f64,
    pub dt: f64,
    pub reps: usize,
    pub seed: u64,
}

/// Outcome of one distributional experiment. The raw integrated statistic is
/// divided by `target_sd` before summarizing, so `summary.variance` is the
/// ratio to the theoretical limit variance and `summary.ks_normal` compares
/// against the standard normal where that is the limit law.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rank: usize,
    pub regime: Regime,
    pub target_sd: f64,
    pub summary: EmpiricalSummary,
    pub ks_critical_1pct: f64,
    pub burn_in_short: bool,
}

/// Weak-regime experiment: t^{-1/2} int_0^t f(N_s) ds over the stationary
/// process, normalized by the series long-run standard deviation. The limit
/// is standard normal.
pub fn clt_experiment(
    f: &HermiteExpansion,
    h: HurstIndex,
    gamma_rate: f64,
    t: f64,
    dt: f64,
    reps: usize,
    seed: u64,
) -> Result<ExperimentReport, McError> {
    let q = f.rank;
    let regime = constants::regime(q, h.value());
    if regime != Regime::Weak {
        return Err(McError::WrongRegime {
            q,
            h: h.value(),
            regime,
        });
    }
    let sigma_sq = weak_sigma_sq_series(f, h, gamma_rate)?;
    if !(sigma_sq > 1e-8 * f.second_moment) {
        return Err(McError::DegenerateNorming { sigma_sq });
    }
    let target_sd = sigma_sq.sqrt();

    let grid = stationary_grid(t, dt)?;
    let t_eff = grid.horizon();
    let spec = FoupSpec::with_default_burn_in(h, gamma_rate)?;
    let sampler = StationaryFoupSampler::new(spec, grid)?;
    let zs = run_replicates(reps, seed, |rng| {
        let path = sampler.sample(rng)?;
        let z = integrate_functional(&path, |x| f.eval(x), 1.0)?;
        Ok(z / (t_eff.sqrt() * target_sd))
    })?;

    Ok(ExperimentReport {
        config: ExperimentConfig {
            h: h.value(),
            gamma: gamma_rate,
            t: t_eff,
            dt,
            reps,
            seed,
        },
        rank: q,
        regime,
        target_sd,
        summary: stats::empirical_summary(&zs)?,
        ks_critical_1pct: stats::ks_critical_1pct(reps),
        burn_in_short: sampler.burn_in_short(),
    })
}

/// Boundary-regime experiment at H = 1 - 1/(2q): the statistic
/// (t log t)^{-1/2} int_0^t H_q(N_s) ds over its limit standard deviation.
/// The limit is standard normal, approached at logarithmic speed.
pub fn boundary_experiment(
    q: usize,
    gamma_rate: f64,
    t: f64,
    dt: f64,
    reps: usize,
    seed: u64,
) -> Result<ExperimentReport, McError> {
    if q == 0 {
        return Err(McError::BadRank { q });
    }
    let hv = 1.0 - 1.0 / (2.0 * q as f64);
    let regime = constants::regime(q, hv);
    if regime != Regime::Boundary {
        return Err(McError::WrongRegime { q, h: hv, regime });
    }
    if !(t > 1.0) {
        return Err(McError::BadHorizon { t });
    }
    let h = HurstIndex::new(hv)?;
    let target_sd = constants::boundary_coeff(q, hv, gamma_rate)?;

    let grid = stationary_grid(t, dt)?;
    let t_eff = grid.horizon();
    let spec = FoupSpec::with_default_burn_in(h, gamma_rate)?;
    let sampler = StationaryFoupSampler::new(spec, grid)?;
    let norm = (t_eff * t_eff.ln()).sqrt() * target_sd;
    let zs = run_replicates(reps, seed, |rng| {
        let path = sampler.sample(rng)?;
        let z = integrate_functional(&path, |x| hermite_eval(q, x), 1.0)?;
        Ok(z / norm)
    })?;

    Ok(ExperimentReport {
        config: ExperimentConfig {
            h: hv,
            gamma: gamma_rate,
            t: t_eff,
            dt,
            reps,
            seed,
        },
        rank: q,
        regime,
        target_sd,
        summary: stats::empirical_summary(&zs)?,
        ks_critical_1pct: stats::ks_critical_1pct(reps),
        burn_in_short: sampler.burn_in_short(),
    })
}

/// Strong-regime experiment for the squared process (rank 2, H > 3/4):
/// t^{1-2H} int_0^t (X_s^2 - E X^2) ds over the limit standard deviation
/// h_H(gamma) sigma_H. The limit is non-Gaussian with positive excess
/// kurtosis.
pub fn nclt_experiment(
    q: usize,
    h: HurstIndex,
    gamma_rate: f64,
    t: f64,
    dt: f64,
    reps: usize,
    seed: u64,
) -> Result<ExperimentReport, McError> {
    let hv = h.value();
    let regime = constants::regime(q.max(1), hv);
    if q != 2 || regime != Regime::Strong {
        return Err(McError::WrongRegime { q, h: hv, regime });
    }
    if !(gamma_rate.is_finite() && gamma_rate > 0.0) {
        return Err(FracError::BadRate {
            gamma: gamma_rate,
            requirement: "gamma > 0",
        }
        .into());
    }
    let target_sd = constants::h(hv, gamma_rate) * constants::sigma(hv)?;
    // E X^2 for the stationary process; the sampler path is X / sqrt(var_x).
    let var_x = 1.0 / (constants::mu(hv) * gamma_rate.powf(2.0 * hv));

    let grid = stationary_grid(t, dt)?;
    let t_eff = grid.horizon();
    let spec = FoupSpec::with_default_burn_in(h, gamma_rate)?;
    let sampler = StationaryFoupSampler::new(spec, grid)?;
    let scale = var_x * t_eff.powf(1.0 - 2.0 * hv) / target_sd;
    let zs = run_replicates(reps, seed, |rng| {
        let path = sampler.sample(rng)?;
        let z = integrate_functional(&path, |x| x * x - 1.0, 1.0)?;
        Ok(scale * z)
    })?;

    Ok(ExperimentReport {
        config: ExperimentConfig {
            h: hv,
            gamma: gamma_rate,
            t: t_eff,
            dt,
            reps,
            seed,
        },
        rank: q,
        regime,
        target_sd,
        summary: stats::empirical_summary(&zs)?,
        ks_critical_1pct: stats::ks_critical_1pct(reps),
        burn_in_short: sampler.burn_in_short(),
    })
}

/// Upper bound on the smoothing error for a Hölder-beta function with
/// constant c_t: t^{-beta} c_t gamma^{-(1+beta)} [Gamma(beta+1) + (beta/e)^beta].
pub fn smoothing_bound(gamma_rate: f64, t: f64, c_t: f64, beta: f64) -> f64 {
    assert!(gamma_rate > 0.0 && t > 0.0 && beta > 0.0);
    let sup = (beta / std::f64::consts::E).powf(beta);
    t.powf(-beta) * c_t / gamma_rate.powf(1.0 + beta) * (gamma(beta + 1.0) + sup)
}

/// Sup over v in a uniform grid of |t int_0^v e^{gamma t (s-v)} psi(s) ds
/// - psi(v)/gamma|, the distance of the exponential smoothing from its
/// limit. The inner integral is taken in the backward variable w = v - s and
/// truncated where the kernel underflows, which keeps the quadrature scaled
/// to the surviving mass.
pub fn smoothing_deterministic<F>(
    psi: F,
    gamma_rate: f64,
    t: f64,
    v_points: usize,
) -> Result<f64, McError>
where
    F: Fn(f64) -> f64,
{
    if !(gamma_rate > 0.0) || v_points == 0 {
        return Err(McError::BadHorizon { t });
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(McError::BadHorizon { t });
    }
    let cfg = QuadConfig {
        tol_abs: 1e-12,
        tol_rel: 1e-10,
        max_segments: 4000,
    };
    let gt = gamma_rate * t;
    let mut worst = 0.0f64;
    for i in 1..=v_points {
        let v = i as f64 / v_points as f64;
        let hi = v.min(EXP_SAFETY / gt);
        let smoothed =
            t * quad::adaptive(&|w: f64| (-gt * w).exp() * psi(v - w), 0.0, hi, &cfg)?.value;
        worst = worst.max((smoothed - psi(v) / gamma_rate).abs());
    }
    Ok(worst)
}

/// Deterministic smoothing study across a horizon ladder, with the Hölder
/// bound evaluated alongside.
#[derive(Debug, Clone, Serialize)]
pub struct SmoothingReport {
    pub gamma: f64,
    pub c_t: f64,
    pub beta: f64,
    pub t_ladder: Vec<f64>,
    pub sup_error: Vec<f64>,
    pub bound: Vec<f64>,
    pub within_bound: bool,
}

pub fn smoothing_deterministic_study<F>(
    psi: F,
    gamma_rate: f64,
    c_t: f64,
    beta: f64,
    t_ladder: &[f64],
    v_points: usize,
) -> Result<SmoothingReport, McError>
where
    F: Fn(f64) -> f64,
{
    check_ladder(t_ladder)?;
    let mut sup_error = Vec::with_capacity(t_ladder.len());
    let mut bound = Vec::with_capacity(t_ladder.len());
    for &t in t_ladder {
        sup_error.push(smoothing_deterministic(&psi, gamma_rate, t, v_points)?);
        bound.push(smoothing_bound(gamma_rate, t, c_t, beta));
    }
    let within_bound = sup_error.iter().zip(&bound).all(|(e, b)| e <= b);
    Ok(SmoothingReport {
        gamma: gamma_rate,
        c_t,
        beta,
        t_ladder: t_ladder.to_vec(),
        sup_error,
        bound,
        within_bound,
    })
}

/// Stochastic smoothing experiment: gamma t^{-H} int_0^t X_s ds for the
/// zero-start process, whose limit variance is one.
pub fn smoothing_stochastic(
    h: HurstIndex,
    gamma_rate: f64,
    t: f64,
    dt: f64,
    reps: usize,
    seed: u64,
) -> Result<ExperimentReport, McError> {
    if !(gamma_rate.is_finite() && gamma_rate > 0.0) {
        return Err(FracError::BadRate {
            gamma: gamma_rate,
            requirement: "gamma > 0",
        }
        .into());
    }
    let grid = stationary_grid(t, dt)?;
    let t_eff = grid.horizon();
    let sampler = FbmSampler::new(h, grid)?;
    let scale = gamma_rate * t_eff.powf(-h.value());
    let zs = run_replicates(reps, seed, |rng| {
        let fbm = sampler.sample(rng);
        let path = foup_from_fbm(gamma_rate, &fbm)?;
        let z = integrate_functional(&path, |x| x, 1.0)?;
        Ok(scale * z)
    })?;

    Ok(ExperimentReport {
        config: ExperimentConfig {
            h: h.value(),
            gamma: gamma_rate,
            t: t_eff,
            dt,
            reps,
            seed,
        },
        rank: 1,
        regime: constants::regime(1, h.value()),
        target_sd: 1.0 / gamma_rate,
        summary: stats::empirical_summary(&zs)?,
        ks_critical_1pct: stats::ks_critical_1pct(reps),
        burn_in_short: false,
    })
}
