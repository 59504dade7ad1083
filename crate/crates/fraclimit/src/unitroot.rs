//! Near-unit-root autoregression and its continuous-time limits: the AR(1)
//! least-squares statistics, the tau functionals of the Ornstein-Uhlenbeck
//! path on [0, 1], and replicate samplers for the limit laws in the
//! mean-reverting (large positive rate) and explosive (negative rate)
//! regimes.

use crate::constants::{self, ConstError};
use crate::fracproc::{
    foup_explosive_factored, foup_from_fbm, FbmSampler, FracError, GaussPath, HurstIndex, PathKind,
    TimeGrid,
};
use crate::seeds;
use crate::stats::{self, StatsError};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma;
use thiserror::Error;

/// Largest |gamma| accepted by the explosive sampler. The third and fourth
/// components subtract two terms whose ratio to the difference grows like
/// e^{|gamma|}, so the relative cancellation error is about eps * e^{|gamma|};
/// at 30 that is ~2e-3, beyond it the columns degrade quickly.
pub const EXPLOSIVE_GAMMA_MAX: f64 = 30.0;

#[derive(Debug, Error)]
pub enum UnitRootError {
    #[error("series sum of squares is zero; least-squares statistics undefined")]
    DegenerateSeries,
    #[error("path has zero quadratic functional")]
    DegeneratePath,
    #[error("autoregression needs n >= 2, got {n}")]
    BadLength { n: usize },
    #[error("rate gamma = {gamma} outside the required range: {requirement}")]
    BadRate {
        gamma: f64,
        requirement: &'static str,
    },
    #[error("|gamma| = {gamma} exceeds the cancellation-safe bound {EXPLOSIVE_GAMMA_MAX}")]
    Overflow { gamma: f64 },
    #[error("expected an Ornstein-Uhlenbeck path on [0, 1], got {got:?} with horizon {horizon}")]
    WrongPath { got: PathKind, horizon: f64 },
    #[error(transparent)]
    Frac(#[from] FracError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Const(#[from] ConstError),
}

/// Innovation law of the autoregression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Innovation {
    IidNormal,
    /// Fractional Gaussian noise: increments of an exact fractional
    /// Brownian path on the integer grid.
    Fgn {
        h: HurstIndex,
    },
}

/// AR(1) scheme X_t = (1 - gamma/n) X_{t-1} + eps_t with X_0 = 0.
#[derive(Debug, Clone, Copy)]
pub struct Ar1Config {
    pub n: usize,
    /// Deviation rate from the unit root; the coefficient is 1 - gamma/n.
    pub gamma: f64,
    pub innovation: Innovation,
    /// Innovation variance. Zero is allowed and yields the zero series.
    pub sigma_sq: f64,
    pub seed: u64,
}

impl Ar1Config {
    pub fn coefficient(&self) -> f64 {
        1.0 - self.gamma / self.n as f64
    }

    fn validate(&self) -> Result<(), UnitRootError> {
        if self.n < 2 {
            return Err(UnitRootError::BadLength { n: self.n });
        }
        if !self.gamma.is_finite() {
            return Err(UnitRootError::BadRate {
                gamma: self.gamma,
                requirement: "finite",
            });
        }
        if !(self.sigma_sq.is_finite() && self.sigma_sq >= 0.0) {
            return Err(UnitRootError::BadRate {
                gamma: self.sigma_sq,
                requirement: "sigma_sq >= 0",
            });
        }
        Ok(())
    }
}

/// Run the recursion; returns X_0, ..., X_n.
pub fn simulate_ar1(cfg: &Ar1Config) -> Result<Vec<f64>, UnitRootError> {
    cfg.validate()?;
    let beta = cfg.coefficient();
    let sd = cfg.sigma_sq.sqrt();
    let mut rng = seeds::rng_for(cfg.seed, 0);
    let eps: Vec<f64> = match cfg.innovation {
        Innovation::IidNormal => (0..cfg.n)
            .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
            .collect(),
        Innovation::Fgn { h } => {
            let grid = TimeGrid::new(cfg.n as f64, cfg.n)?;
            let sampler = FbmSampler::new(h, grid)?;
            let path = sampler.sample(&mut rng);
            path.values.windows(2).map(|w| sd * (w[1] - w[0])).collect()
        }
    };
    let mut x = vec![0.0f64; cfg.n + 1];
    for t in 0..cfg.n {
        x[t + 1] = beta * x[t] + eps[t];
    }
    Ok(x)
}

fn lag_sums(series: &[f64]) -> Result<(f64, f64), UnitRootError> {
    if series.len() < 2 {
        return Err(UnitRootError::DegenerateSeries);
    }
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for t in 0..series.len() - 1 {
        num += series[t + 1] * series[t];
        den += series[t] * series[t];
    }
    if den > 0.0 {
        Ok((num, den))
    } else {
        Err(UnitRootError::DegenerateSeries)
    }
}

/// Least-squares slope sum X_{t+1} X_t / sum X_t^2, both sums over
/// t = 0, ..., n-1.
pub fn lse(series: &[f64]) -> Result<f64, UnitRootError> {
    let (num, den) = lag_sums(series)?;
    Ok(num / den)
}

/// Studentized slope deviation (sum X_t^2)^{1/2} (lse - beta). Scales
/// linearly with the innovation standard deviation, so compare against the
/// continuous limits with sigma_sq = 1.
pub fn tau_hat(series: &[f64], beta: f64) -> Result<f64, UnitRootError> {
    let (num, den) = lag_sums(series)?;
    Ok(den.sqrt() * (num / den - beta))
}

/// The four pathwise least-squares functionals of an Ornstein-Uhlenbeck
/// path on [0, 1].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TauVector {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
}

impl TauVector {
    pub fn as_array(&self) -> [f64; 4] {
        [self.t1, self.t2, self.t3, self.t4]
    }
}

fn check_unit_interval(path: &GaussPath) -> Result<(), UnitRootError> {
    let ok = matches!(
        path.kind,
        PathKind::Foup | PathKind::StationaryFoup | PathKind::Brownian
    ) && (path.grid.horizon() - 1.0).abs() < 1e-9;
    if ok {
        Ok(())
    } else {
        Err(UnitRootError::WrongPath {
            got: path.kind,
            horizon: path.grid.horizon(),
        })
    }
}

/// With Q = int_0^1 X_s^2 ds (trapezoid) and A = X_1^2 / 2 + gamma Q:
/// (Q^{-1/2}, Q^{-1}, A Q^{-1/2}, A Q^{-1}). The algebraic structure
/// t2 = t1^2 and t4 t1 = t3 t2 holds pathwise by construction.
pub fn tau_vector(gamma_rate: f64, path: &GaussPath) -> Result<TauVector, UnitRootError> {
    check_unit_interval(path)?;
    let sq: Vec<f64> = path.values.iter().map(|x| x * x).collect();
    let q = stats::trapezoid(&sq, path.grid.dt());
    if !(q > 0.0) {
        return Err(UnitRootError::DegeneratePath);
    }
    let end = *path.values.last().unwrap();
    let a = end * end / 2.0 + gamma_rate * q;
    let t1 = 1.0 / q.sqrt();
    let t2 = 1.0 / q;
    Ok(TauVector {
        t1,
        t2,
        t3: a * t1,
        t4: a * t2,
    })
}

/// t3 - t1/2 of the tau vector; for the Brownian-driven path this is the
/// limit of the studentized slope statistic and approaches a standard
/// normal as |gamma| grows.
pub fn tau_bar(gamma_rate: f64, path: &GaussPath) -> Result<f64, UnitRootError> {
    let tau = tau_vector(gamma_rate, path)?;
    Ok(tau.t3 - 0.5 * tau.t1)
}

/// (X_1^2 - 1) / (2 sqrt(int_0^1 X_s^2 ds)): the direct form that tau_bar
/// reduces to at gamma = 0 for a Brownian path.
pub fn brownian_quadratic_functional(path: &GaussPath) -> Result<f64, UnitRootError> {
    check_unit_interval(path)?;
    let sq: Vec<f64> = path.values.iter().map(|x| x * x).collect();
    let q = stats::trapezoid(&sq, path.grid.dt());
    if !(q > 0.0) {
        return Err(UnitRootError::DegeneratePath);
    }
    let end = *path.values.last().unwrap();
    Ok((end * end - 1.0) / (2.0 * q.sqrt()))
}

fn unit_grid(dt: f64) -> Result<TimeGrid, UnitRootError> {
    if !(dt.is_finite() && dt > 0.0 && dt <= 1.0) {
        return Err(FracError::BadGrid { t: 1.0, n: 0 }.into());
    }
    let steps = (1.0 / dt).round().max(1.0) as usize;
    Ok(TimeGrid::new(1.0, steps)?)
}

fn sample_rows<F>(reps: usize, seed: u64, task: F) -> Result<Vec<[f64; 4]>, UnitRootError>
where
    F: Fn(&mut ChaCha12Rng) -> Result<[f64; 4], UnitRootError> + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeds::rng_for(seed, i as u64);
            task(&mut rng)
        })
        .collect()
}

/// A replicate sample of one four-component statistic, stored by column.
#[derive(Debug, Clone, Serialize)]
pub struct TauSample {
    pub h: f64,
    pub gamma: f64,
    pub dt: f64,
    pub reps: usize,
    pub seed: u64,
    pub columns: [Vec<f64>; 4],
}

fn columns_from_rows(rows: Vec<[f64; 4]>) -> [Vec<f64>; 4] {
    let mut cols: [Vec<f64>; 4] = Default::default();
    for c in cols.iter_mut() {
        c.reserve(rows.len());
    }
    for row in rows {
        for (c, v) in cols.iter_mut().zip(row) {
            c.push(v);
        }
    }
    cols
}

/// Mean-reverting limit sample: per replicate, a zero-start path on [0, 1]
/// at rate gamma > 1, its tau vector centered at the deterministic vector
/// and scaled by the norming diagonal. Component pairs (1, 3) become
/// perfectly anticorrelated Gaussians for H = 1/2 and the fourth component
/// approaches Y^2 / 2 as gamma grows.
pub fn ergodic_tau_sample(
    h: HurstIndex,
    gamma_rate: f64,
    reps: usize,
    dt: f64,
    seed: u64,
) -> Result<TauSample, UnitRootError> {
    if !(gamma_rate > 1.0) {
        return Err(UnitRootError::BadRate {
            gamma: gamma_rate,
            requirement: "gamma > 1",
        });
    }
    let d = constants::tau_norming_diag(h.value(), gamma_rate)?;
    let b = constants::tau_centering(h.value(), gamma_rate)?;
    let grid = unit_grid(dt)?;
    let sampler = FbmSampler::new(h, grid)?;
    let rows = sample_rows(reps, seed, |rng| {
        let fbm = sampler.sample(rng);
        let path = foup_from_fbm(gamma_rate, &fbm)?;
        let tau = tau_vector(gamma_rate, &path)?.as_array();
        let mut out = [0.0f64; 4];
        for j in 0..4 {
            out[j] = d[j] * (tau[j] - b[j]);
        }
        Ok(out)
    })?;
    Ok(TauSample {
        h: h.value(),
        gamma: gamma_rate,
        dt,
        reps,
        seed,
        columns: columns_from_rows(rows),
    })
}

/// Per-component scale of the explosive limit law: the limit columns are
/// these multiples of (|Z|^{-1}, Z^{-2}, Y sign(Z), Y/Z) for independent
/// standard normals Z, Y.
pub fn explosive_limit_scales(h: f64) -> [f64; 4] {
    let g = gamma(2.0 * h + 1.0);
    [2.0 / g.sqrt(), 4.0 / g, g.sqrt(), 2.0]
}

/// Explosive limit sample for gamma < 0. The norming diagonal carries
/// e^{|gamma|} factors, so the scaled components are assembled from the
/// factored path y_s = e^{-|gamma| s} X_s, in which every surviving
/// exponential cancels algebraically:
///
/// with a = |gamma| and qhat = int_0^1 e^{-2a(1-s)} y_s^2 ds,
///   c1 = a^{-(2H+1)/2} / sqrt(qhat)
///   c2 = a^{-2H-1} / qhat
///   c3 = a^{(2H-1)/2} e^a (y_1^2/2 - a qhat) / sqrt(qhat)
///   c4 = e^a (y_1^2/2 - a qhat) / (a qhat).
///
/// The grid must resolve the boundary layer of width 1/(2a) near s = 1;
/// dt well below that is required for an unbiased qhat.
pub fn explosive_tau_sample(
    h: HurstIndex,
    gamma_rate: f64,
    reps: usize,
    dt: f64,
    seed: u64,
) -> Result<TauSample, UnitRootError> {
    if !(gamma_rate < 0.0) {
        return Err(UnitRootError::BadRate {
            gamma: gamma_rate,
            requirement: "gamma < 0",
        });
    }
    if -gamma_rate > EXPLOSIVE_GAMMA_MAX {
        return Err(UnitRootError::Overflow { gamma: -gamma_rate });
    }
    let a = -gamma_rate;
    let hv = h.value();
    let grid = unit_grid(dt)?;
    let sampler = FbmSampler::new(h, grid)?;
    let s1 = a.powf(-(2.0 * hv + 1.0) / 2.0);
    let s2 = a.powf(-2.0 * hv - 1.0);
    let s3 = a.powf((2.0 * hv - 1.0) / 2.0) * a.exp();
    let rows = sample_rows(reps, seed, |rng| {
        let fbm = sampler.sample(rng);
        let fac = foup_explosive_factored(gamma_rate, &fbm)?;
        let w: Vec<f64> = fac
            .y
            .iter()
            .enumerate()
            .map(|(k, y)| (-2.0 * a * (1.0 - grid.time(k))).exp() * y * y)
            .collect();
        let qhat = stats::trapezoid(&w, grid.dt());
        if !(qhat > 0.0) {
            return Err(UnitRootError::DegeneratePath);
        }
        let y1 = *fac.y.last().unwrap();
        let diff = y1 * y1 / 2.0 - a * qhat;
        Ok([
            s1 / qhat.sqrt(),
            s2 / qhat,
            s3 * diff / qhat.sqrt(),
            a.exp() * diff / (a * qhat),
        ])
    })?;
    Ok(TauSample {
        h: hv,
        gamma: gamma_rate,
        dt,
        reps,
        seed,
        columns: columns_from_rows(rows),
    })
}

/// Replicate sample of tau_bar over Brownian-driven paths on [0, 1].
/// Negative rates are bounded by the same cancellation limit as the
/// explosive sampler.
pub fn tau_bar_sample(
    gamma_rate: f64,
    reps: usize,
    dt: f64,
    seed: u64,
) -> Result<Vec<f64>, UnitRootError> {
    if !gamma_rate.is_finite() {
        return Err(UnitRootError::BadRate {
            gamma: gamma_rate,
            requirement: "finite",
        });
    }
    if gamma_rate < -EXPLOSIVE_GAMMA_MAX {
        return Err(UnitRootError::Overflow { gamma: -gamma_rate });
    }
    let grid = unit_grid(dt)?;
    let h = HurstIndex::new(0.5).unwrap();
    let sampler = FbmSampler::new(h, grid)?;
    (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeds::rng_for(seed, i as u64);
            let fbm = sampler.sample(&mut rng);
            let path = foup_from_fbm(gamma_rate, &fbm)?;
            tau_bar(gamma_rate, &path)
        })
        .collect()
}

/// Replicate sample of the discrete statistic tau_hat under the scheme's
/// own coefficient, for comparison with the continuous tau_bar limit.
pub fn discrete_tau_sample(cfg: &Ar1Config, reps: usize) -> Result<Vec<f64>, UnitRootError> {
    cfg.validate()?;
    let beta = cfg.coefficient();
    (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut c = *cfg;
            c.seed = seeds::replicate_seed(cfg.seed, i as u64);
            let series = simulate_ar1(&c)?;
            tau_hat(&series, beta)
        })
        .collect()
}
