//! Channel models between the transmitter, the surface elements and the
//! receive antenna, plus pilot observation synthesis.
//!
//! - CM1: constant amplitude, planar wavefront (phase from the angles only).
//! - CM2: constant amplitude, curved wavefront (phase from the distance to
//!   every element).
//! - CM3: per-element amplitude from the exact power captured by a square
//!   aperture, CM2 phase.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::geometry::{wavevector, RisArray, Scenario, SphericalCoords};
use crate::{CMatrix, CVector, CartesianPosition, Error, Result, C64};

/// Polarization loss of a Y-polarized transmitter seen from `(theta, phi)`:
/// `1 - sin²ϑ sin²φ`.
pub fn correction_factor(theta: f64, phi: f64) -> f64 {
    let s = theta.sin() * phi.sin();
    1.0 - s * s
}

/// Common per-element amplitude under CM1/CM2,
/// `ρ² = f(ϑ,φ)·A·cosϑ / (4πd²)`.
pub fn cm1_amplitude(coords: &SphericalCoords, scenario: &Scenario) -> Result<f64> {
    let d = coords.distance;
    if !(d > 0.0) {
        return Err(Error::NonPositiveDistance(d));
    }
    let rho2 = correction_factor(coords.theta, coords.phi) * scenario.element_area() * coords.theta.cos()
        / (4.0 * PI * d * d);
    Ok(rho2.max(0.0).sqrt())
}

/// Planar-wavefront steering vector, `[a]_i = exp(-j q_iᵀ k(ϑ,φ))`.
pub fn cm1_steering(theta: f64, phi: f64, ris: &RisArray, wavelength: f64) -> CVector {
    let k = wavevector(&SphericalCoords::new(1.0, theta, phi), wavelength);
    CVector::from_iterator(ris.len(), ris.positions.iter().map(|q| C64::cis(-q.dot(&k))))
}

/// The same planar-wavefront steering vector written in the element's polar
/// coordinates, `exp(+j(2π/λ) r_i sinϑ cos(φ - ψ_i))`. This is the form the
/// Jacobi–Anger basis expands.
pub fn cm1_steering_polar(theta: f64, phi: f64, ris: &RisArray, wavelength: f64) -> CVector {
    let kr = TAU / wavelength * theta.sin();
    CVector::from_iterator(
        ris.len(),
        ris.radii
            .iter()
            .zip(&ris.azimuths)
            .map(|(&r, &psi)| C64::cis(kr * r * (phi - psi).cos())),
    )
}

/// Curved-wavefront steering vector,
/// `[a]_i = exp(-j(2π/λ)(‖p - q_i‖ - d))`.
pub fn cm2_steering(p: &CartesianPosition, ris: &RisArray, wavelength: f64) -> Result<CVector> {
    let d = p.norm();
    if !(d > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let k = TAU / wavelength;
    Ok(CVector::from_iterator(
        ris.len(),
        ris.positions.iter().map(|q| C64::cis(-k * ((p - q).norm() - d))),
    ))
}

/// Power fraction captured by a square patch of side `side` whose center is
/// offset by `(dx, dy)` laterally from a source at height `z`.
///
/// This is the area integral of `z (x² + z²) / (4π r⁵)` over the patch, with
/// closed form in `X = {side/2 + dx, side/2 - dx}`, `Y = {side/2 + dy, side/2 - dy}`
/// and `g(x, y) = sqrt(x²/z² + y²/z² + 1)`. The closed form is a four-corner
/// difference that cancels to `O(side²/r²)`, so patches small against their
/// distance are integrated by Gauss–Legendre quadrature instead. Only `z²`
/// enters, so sources on either side of the surface give the same value.
pub fn patch_power(dx: f64, dy: f64, z: f64, side: f64) -> f64 {
    let r2 = dx * dx + dy * dy + z * z;
    if side * side < SMALL_PATCH_RATIO * SMALL_PATCH_RATIO * r2 {
        patch_power_quadrature(dx, dy, z, side)
    } else {
        patch_power_closed_form(dx, dy, z, side)
    }
}

const SMALL_PATCH_RATIO: f64 = 0.25;

const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

fn patch_power_closed_form(dx: f64, dy: f64, z: f64, side: f64) -> f64 {
    let z2 = z * z;
    let half = side / 2.0;
    let mut sum = 0.0;
    for x in [half + dx, half - dx] {
        for y in [half + dy, half - dy] {
            let g = ((x * x + y * y) / z2 + 1.0).sqrt();
            let xy = x * y;
            sum += xy / ((y * y + z2) * g) + 2.0 * (xy / (z2 * g)).atan();
        }
    }
    sum / (12.0 * PI)
}

fn patch_power_quadrature(dx: f64, dy: f64, z: f64, side: f64) -> f64 {
    let half = side / 2.0;
    let z2 = z * z;
    let mut sum = 0.0;
    for (i, &u) in GL8_NODES.iter().enumerate() {
        for sx in [-1.0, 1.0] {
            let x = dx + sx * half * u;
            let x2 = x * x;
            for (j, &v) in GL8_NODES.iter().enumerate() {
                for sy in [-1.0, 1.0] {
                    let y = dy + sy * half * v;
                    let r2 = x2 + y * y + z2;
                    sum += GL8_WEIGHTS[i] * GL8_WEIGHTS[j] * (x2 + z2) / (r2 * r2 * r2.sqrt());
                }
            }
        }
    }
    sum * z.abs() * half * half / (4.0 * PI)
}

/// Per-element CM3 amplitudes `ρ_i` for a source at `p`.
pub fn cm3_amplitudes(p: &CartesianPosition, ris: &RisArray, element_side: f64) -> Result<Vec<f64>> {
    if p.z == 0.0 {
        return Err(Error::SingularGeometry);
    }
    let z = p.z.abs();
    Ok(ris
        .positions
        .iter()
        .map(|q| patch_power(q.x - p.x, q.y - p.y, z, element_side).max(0.0).sqrt())
        .collect())
}

/// Fixed surface → antenna coupling: CM3 amplitudes with CM2 phases
/// evaluated at the antenna position.
pub fn antenna_coupling(scenario: &Scenario, ris: &RisArray) -> Result<CVector> {
    let p_ant = scenario.antenna_position;
    let rho = cm3_amplitudes(&p_ant, ris, scenario.element_side)?;
    let phase = cm2_steering(&p_ant, ris, scenario.wavelength)?;
    Ok(CVector::from_iterator(
        ris.len(),
        rho.iter().zip(phase.iter()).map(|(&r, &a)| a * r),
    ))
}

/// Transmitter → surface channel for one trial.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// Per-element amplitudes.
    pub rho: Vec<f64>,
    /// Unit-modulus per-element phases.
    pub a: CVector,
    /// Global phase `θ = -2πd/λ + θ_sync`.
    pub theta: f64,
    pub theta_sync: f64,
}

impl ChannelRealization {
    /// CM3 amplitudes with CM2 phases, as used to generate observations.
    pub fn cm3(p: &CartesianPosition, scenario: &Scenario, ris: &RisArray, theta_sync: f64) -> Result<Self> {
        let rho = cm3_amplitudes(p, ris, scenario.element_side)?;
        let a = cm2_steering(p, ris, scenario.wavelength)?;
        Ok(Self {
            rho,
            a,
            theta: -TAU * p.norm() / scenario.wavelength + theta_sync,
            theta_sync,
        })
    }

    /// Constant CM1 amplitude with CM2 phases, the model behind the bounds.
    pub fn cm2(p: &CartesianPosition, scenario: &Scenario, ris: &RisArray, theta_sync: f64) -> Result<Self> {
        let coords = SphericalCoords::from_cartesian(p)?;
        let rho = cm1_amplitude(&coords, scenario)?;
        let a = cm2_steering(p, ris, scenario.wavelength)?;
        Ok(Self {
            rho: alloc::vec![rho; ris.len()],
            a,
            theta: -TAU * coords.distance / scenario.wavelength + theta_sync,
            theta_sync,
        })
    }

    /// `ρ ∘ a`.
    pub fn channel_vector(&self) -> CVector {
        CVector::from_iterator(self.a.len(), self.a.iter().zip(&self.rho).map(|(&a, &r)| a * r))
    }

    /// Gain `α` for a constant-amplitude channel, `ρ·e^{jθ}` using the mean
    /// amplitude.
    pub fn alpha(&self) -> C64 {
        let mean = self.rho.iter().sum::<f64>() / self.rho.len().max(1) as f64;
        C64::from_polar(mean, self.theta)
    }
}

/// Received pilots of one trial.
#[derive(Debug, Clone)]
pub struct ObservationSet {
    pub y: CVector,
    pub noise: CVector,
}

/// Noise-free pilots `μ = e^{jθ}·√Es·Wᵀ(ρ ∘ a)`.
pub fn noise_free_observation(w: &CMatrix, channel: &ChannelRealization, symbol_energy: f64) -> Result<CVector> {
    if w.nrows() != channel.a.len() {
        return Err(Error::ShapeMismatch {
            expected: (channel.a.len(), w.ncols()),
            got: w.shape(),
        });
    }
    let scale = C64::from_polar(symbol_energy.sqrt(), channel.theta);
    Ok(w.tr_mul(&channel.channel_vector()) * scale)
}

/// Circularly-symmetric complex Gaussian noise with variance `n0` per sample.
pub fn complex_noise<R: Rng + ?Sized>(len: usize, n0: f64, rng: &mut R) -> CVector {
    let sigma = (n0 / 2.0).sqrt();
    CVector::from_fn(len, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * sigma, im * sigma)
    })
}

/// Adds noise to the noise-free pilots of a known channel.
pub fn observe<R: Rng + ?Sized>(
    w: &CMatrix,
    channel: &ChannelRealization,
    scenario: &Scenario,
    rng: &mut R,
) -> Result<ObservationSet> {
    let mu = noise_free_observation(w, channel, scenario.symbol_energy)?;
    let noise = complex_noise(mu.len(), scenario.noise_variance, rng);
    Ok(ObservationSet { y: mu + &noise, noise })
}

/// Draws `θ_sync ~ U[0, 2π)`, builds the CM3 channel at `p` and returns the
/// noisy pilots together with the channel that produced them.
pub fn synthesize_observations<R: Rng + ?Sized>(
    w: &CMatrix,
    p: &CartesianPosition,
    scenario: &Scenario,
    ris: &RisArray,
    rng: &mut R,
) -> Result<(ObservationSet, ChannelRealization)> {
    let theta_sync = rng.random_range(0.0..TAU);
    let channel = ChannelRealization::cm3(p, scenario, ris, theta_sync)?;
    let obs = observe(w, &channel, scenario, rng)?;
    Ok((obs, channel))
}
