//! Seeded Monte Carlo sweeps behind the three experiments.
//!
//! Work items are evaluated in parallel and collected in input order, and all
//! reductions run sequentially afterwards, so results do not depend on the
//! thread count.

use std::cmp::Ordering;
use std::f64::consts::FRAC_1_SQRT_2;

use log::{info, warn};
use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rislens_core::channel::{antenna_coupling, observe, ChannelRealization};
use rislens_core::estimator::{Estimate, Localizer, PilotWeights};
use rislens_core::fisher::{fisher_analysis, prior_peb, snr_db, SteeringModel};
use rislens_core::geometry::{angle_difference, RisArray, SphericalCoords};
use rislens_core::profiles::{PhaseProfileSet, PriorBelief, ProfileDesign, ProfileKind};
use rislens_core::{CVector, CartesianPosition};

use crate::config::RunConfig;
use crate::error::HarnessError;
use crate::streams::{point_key, rng_stream, Purpose};

/// One row of the PEB curve.
#[derive(Debug, Clone, PartialEq)]
pub struct PebPoint {
    pub distance: f64,
    pub profile: ProfileKind,
    pub sigma: f64,
    /// Mean PEB over the profile realizations, m.
    pub peb: f64,
    /// `σ√3`.
    pub prior_peb: f64,
    pub realizations: usize,
    /// Standard error of `peb` across realizations.
    pub stderr: f64,
}

/// One row of the RMSE curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsePoint {
    pub distance: f64,
    pub profile: ProfileKind,
    pub sigma: f64,
    pub trials: usize,
    pub rmse: f64,
    pub rmse_theta: f64,
    pub rmse_phi: f64,
    pub rmse_d: f64,
    /// Fraction of trials with error above `d/2` or no estimate at all.
    pub outlier_rate: f64,
    /// Standard error of `rmse`.
    pub stderr: f64,
    pub failures: usize,
    pub low_confidence: usize,
}

/// One sample of the SNR map.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrSample {
    pub position: CartesianPosition,
    pub profile: ProfileKind,
    /// Pilot-averaged SNR, truncated at 0 dB.
    pub snr_db: f64,
}

/// Scenario quantities shared by every trial.
pub struct SweepContext {
    pub config: RunConfig,
    pub ris: RisArray,
    pub h_ant: CVector,
}

impl SweepContext {
    pub fn new(config: &RunConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let ris = config.scenario.ris();
        let h_ant = antenna_coupling(&config.scenario, &ris)?;
        Ok(Self {
            config: config.clone(),
            ris,
            h_ant,
        })
    }

    pub fn position(&self, distance: f64) -> CartesianPosition {
        self.config.direction * distance
    }

    /// Weight matrix for one profile realization, drawn from the stream of
    /// `(point, index)`.
    pub fn weights(&self, kind: ProfileKind, prior: &PriorBelief, point: u64, index: u64) -> Result<PhaseProfileSet, HarnessError> {
        let design = ProfileDesign {
            kind,
            prior: prior.clone(),
            num_pilots: self.config.scenario.num_pilots,
            quant_bits: self.config.quant_bits,
        };
        let purpose = if kind.uses_prior() {
            Purpose::PriorSamples
        } else {
            Purpose::ProfilePhases
        };
        let mut rng = rng_stream(self.config.seed, point, index, purpose);
        Ok(PhaseProfileSet::generate(
            &design,
            &self.h_ant,
            &self.ris,
            self.config.scenario.wavelength,
            &mut rng,
        )?)
    }
}

/// Distinct evaluations behind the requested `(profile, σ)` pairs: profiles
/// that ignore the prior are evaluated once and reported for every σ.
fn evaluation_plan(kinds: &[ProfileKind], sigmas: &[f64]) -> (Vec<(ProfileKind, f64)>, Vec<(ProfileKind, f64, usize)>) {
    let mut unique: Vec<(ProfileKind, f64)> = Vec::new();
    let mut rows = Vec::new();
    for &kind in kinds {
        for &sigma in sigmas {
            let eval_sigma = if kind.uses_prior() { sigma } else { 0.0 };
            let idx = match unique
                .iter()
                .position(|&(k, s)| k == kind && s.to_bits() == eval_sigma.to_bits())
            {
                Some(i) => i,
                None => {
                    unique.push((kind, eval_sigma));
                    unique.len() - 1
                }
            };
            rows.push((kind, sigma, idx));
        }
    }
    (unique, rows)
}

fn row_order(a: (ProfileKind, f64, f64), b: (ProfileKind, f64, f64)) -> Ordering {
    a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2))
}

/// Mean PEB over `profile_realizations` designs per distance, with the prior
/// centered on the true position.
pub fn run_peb_sweep(config: &RunConfig) -> Result<Vec<PebPoint>, HarnessError> {
    let ctx = SweepContext::new(config)?;
    let kinds = config.profiles_or(&[ProfileKind::Random]);
    let (unique, rows) = evaluation_plan(&kinds, &config.sigmas);
    let reps = config.profile_realizations;

    let jobs: Vec<(usize, usize, usize)> = (0..unique.len())
        .flat_map(|u| (0..config.distances.len()).flat_map(move |d| (0..reps).map(move |r| (u, d, r))))
        .collect();
    let pebs = jobs
        .par_iter()
        .map(|&(u, d, r)| {
            let (kind, sigma) = unique[u];
            let distance = config.distances[d];
            let p = ctx.position(distance);
            let prior = PriorBelief::isotropic(p, sigma);
            let set = ctx.weights(kind, &prior, point_key(distance), r as u64)?;
            Ok(fisher_analysis(&p, &set.w, &config.scenario, &ctx.ris)?.peb)
        })
        .collect::<Result<Vec<f64>, HarnessError>>()?;

    let per_eval = config.distances.len() * reps;
    let mut out = Vec::new();
    for (kind, sigma, u) in rows {
        for (d, &distance) in config.distances.iter().enumerate() {
            let start = u * per_eval + d * reps;
            let samples = &pebs[start..start + reps];
            let peb = samples.iter().sum::<f64>() / reps as f64;
            let stderr = if reps < 2 || !peb.is_finite() {
                0.0
            } else {
                (samples.iter().map(|v| (v - peb).powi(2)).sum::<f64>() / ((reps - 1) * reps) as f64).sqrt()
            };
            info!("peb {} sigma={sigma} d={distance}: {peb:e}", kind.name());
            out.push(PebPoint {
                distance,
                profile: kind,
                sigma,
                peb,
                prior_peb: prior_peb(sigma),
                realizations: reps,
                stderr,
            });
        }
    }
    out.sort_by(|a, b| row_order((a.profile, a.sigma, a.distance), (b.profile, b.sigma, b.distance)));
    Ok(out)
}

/// Errors of one localization trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialError {
    pub squared: f64,
    pub theta: f64,
    pub phi: f64,
    pub distance: f64,
    pub outlier: bool,
    pub low_confidence: bool,
}

impl TrialError {
    pub fn new(truth: &SphericalCoords, est: &Estimate) -> Self {
        let squared = (est.position - truth.to_cartesian()).norm_squared();
        Self {
            squared,
            theta: est.theta - truth.theta,
            phi: angle_difference(est.phi, truth.phi),
            distance: est.distance - truth.distance,
            outlier: squared.sqrt() > truth.distance / 2.0,
            low_confidence: est.low_confidence,
        }
    }
}

/// Synthesizes the pilots of one trial from the CM3 channel and localizes.
pub fn run_trial(
    ctx: &SweepContext,
    localizer: &Localizer,
    kind: ProfileKind,
    sigma: f64,
    distance: f64,
    trial: u64,
) -> Result<Estimate, HarnessError> {
    let seed = ctx.config.seed;
    let point = point_key(distance);
    let p = ctx.position(distance);
    let set = ctx.weights(kind, &PriorBelief::isotropic(p, sigma), point, trial)?;
    let theta_sync = rng_stream(seed, point, trial, Purpose::SyncPhase).random_range(0.0..std::f64::consts::TAU);
    let channel = ChannelRealization::cm3(&p, &ctx.config.scenario, &ctx.ris, theta_sync)?;
    let mut noise: ChaCha8Rng = rng_stream(seed, point, trial, Purpose::Noise);
    let obs = observe(&set.w, &channel, &ctx.config.scenario, &mut noise)?;
    Ok(localizer.localize_prepared(&obs.y, &PilotWeights::new(set.w))?)
}

fn summarize(distance: f64, kind: ProfileKind, sigma: f64, outcomes: &[Option<TrialError>]) -> RmsePoint {
    let trials = outcomes.len();
    let ok: Vec<&TrialError> = outcomes.iter().flatten().collect();
    let n = ok.len();
    let failures = trials - n;
    let mean = |f: &dyn Fn(&TrialError) -> f64| {
        if n == 0 {
            f64::NAN
        } else {
            ok.iter().map(|e| f(e)).sum::<f64>() / n as f64
        }
    };
    let mse = mean(&|e| e.squared);
    let rmse = mse.sqrt();
    // delta method: se(√m) = se(m) / (2√m)
    let stderr = if n < 2 || !(rmse > 0.0) {
        0.0
    } else {
        let var = ok.iter().map(|e| (e.squared - mse).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt() / (2.0 * rmse)
    };
    RmsePoint {
        distance,
        profile: kind,
        sigma,
        trials,
        rmse,
        rmse_theta: mean(&|e| e.theta * e.theta).sqrt(),
        rmse_phi: mean(&|e| e.phi * e.phi).sqrt(),
        rmse_d: mean(&|e| e.distance * e.distance).sqrt(),
        outlier_rate: (ok.iter().filter(|e| e.outlier).count() + failures) as f64 / trials as f64,
        stderr,
        failures,
        low_confidence: ok.iter().filter(|e| e.low_confidence).count(),
    }
}

/// Localization RMSE per distance, one fresh profile design and noise draw
/// per trial.
pub fn run_rmse_sweep(config: &RunConfig) -> Result<Vec<RmsePoint>, HarnessError> {
    let ctx = SweepContext::new(config)?;
    let localizer = Localizer::new(&config.scenario, config.localizer.clone())?;
    let kinds = config.profiles_or(&[ProfileKind::Random]);
    let (unique, rows) = evaluation_plan(&kinds, &config.sigmas);
    let trials = config.trials;

    let jobs: Vec<(usize, usize, usize)> = (0..unique.len())
        .flat_map(|u| (0..config.distances.len()).flat_map(move |d| (0..trials).map(move |t| (u, d, t))))
        .collect();
    let outcomes: Vec<Option<TrialError>> = jobs
        .par_iter()
        .map(|&(u, d, t)| {
            let (kind, sigma) = unique[u];
            let distance = config.distances[d];
            let truth = SphericalCoords::from_cartesian(&ctx.position(distance)).ok()?;
            match run_trial(&ctx, &localizer, kind, sigma, distance, t as u64) {
                Ok(est) => Some(TrialError::new(&truth, &est)),
                Err(err) => {
                    warn!("trial {t} at d={distance} ({}) failed: {err}", kind.name());
                    None
                }
            }
        })
        .collect();

    let per_eval = config.distances.len() * trials;
    let mut out = Vec::new();
    for (kind, sigma, u) in rows {
        for (d, &distance) in config.distances.iter().enumerate() {
            let start = u * per_eval + d * trials;
            let point = summarize(distance, kind, sigma, &outcomes[start..start + trials]);
            info!(
                "rmse {} sigma={sigma} d={distance}: {:e} (outliers {:.3})",
                kind.name(),
                point.rmse,
                point.outlier_rate
            );
            out.push(point);
        }
    }
    out.sort_by(|a, b| row_order((a.profile, a.sigma, a.distance), (b.profile, b.sigma, b.distance)));
    Ok(out)
}

/// Sample positions of the SNR map: the `X = Y` plane, horizontal coordinate
/// `s ∈ [-extent, extent]` along `(1, 1, 0)/√2`, height `z ∈ (0, extent]`.
pub fn snr_map_positions(extent: f64, points: usize) -> Vec<CartesianPosition> {
    let mut out = Vec::with_capacity(points * points);
    for iz in 0..points {
        let z = extent * (iz + 1) as f64 / points as f64;
        for is in 0..points {
            let s = -extent + 2.0 * extent * is as f64 / (points - 1) as f64;
            out.push(Vector3::new(s * FRAC_1_SQRT_2, s * FRAC_1_SQRT_2, z));
        }
    }
    out
}

/// SNR over the `X = Y` plane for one profile realization of each kind.
pub fn run_snr_map(config: &RunConfig) -> Result<Vec<SnrSample>, HarnessError> {
    let ctx = SweepContext::new(config)?;
    let kinds = config.profiles_or(&ProfileKind::ALL);
    if config.sigmas.len() > 1 {
        warn!("snr-map uses only the first prior sigma ({})", config.sigmas[0]);
    }
    let prior = PriorBelief::isotropic(config.prior_mean, config.sigmas[0]);
    let positions = snr_map_positions(config.snr_extent, config.snr_points);
    let mut out = Vec::with_capacity(kinds.len() * positions.len());
    for kind in kinds {
        let set = ctx.weights(kind, &prior, kind as u64, 0)?;
        let values = positions
            .par_iter()
            .map(|p| snr_db(&set.w, p, &config.scenario, &ctx.ris, SteeringModel::CurvedWave))
            .collect::<Result<Vec<f64>, _>>()?;
        out.extend(positions.iter().zip(values).map(|(p, v)| SnrSample {
            position: *p,
            profile: kind,
            snr_db: v.max(0.0),
        }));
    }
    Ok(out)
}
