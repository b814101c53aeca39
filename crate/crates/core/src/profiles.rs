//! Phase-profile sequences applied by the surface across the pilots.
//!
//! Each pilot `t` uses `Ω_t = Ω_ant·Ω̃_t`: a fixed compensation that makes
//! the surface → antenna coupling real and nonnegative, followed by the
//! designed phases `ω̃_{t,i}`. Phases are stored as angles, so every
//! coefficient has unit modulus by construction.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, Matrix3, SymmetricEigen, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::geometry::{wavevector, wrap_angle, RisArray, SphericalCoords};
use crate::{CMatrix, CVector, CartesianPosition, Error, Result, C64};

/// Gaussian belief about the user position, used only to steer profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorBelief {
    pub mean: CartesianPosition,
    pub covariance: Matrix3<f64>,
}

/// Draws with `z ≤ 0` are rejected; give up after this many in a row.
const MAX_PRIOR_REJECTIONS: usize = 10_000;

impl PriorBelief {
    pub fn isotropic(mean: CartesianPosition, sigma: f64) -> Self {
        Self {
            mean,
            covariance: Matrix3::identity() * (sigma * sigma),
        }
    }

    /// Symmetric square root of the covariance. Zero variance is allowed so
    /// a prior can pin a single point.
    pub fn sqrt_covariance(&self) -> Result<Matrix3<f64>> {
        let cov = &self.covariance;
        if cov.iter().any(|v| !v.is_finite()) || (cov - cov.transpose()).norm() > 1e-12 * cov.norm().max(1e-300) {
            return Err(Error::InvalidPrior);
        }
        let eig = SymmetricEigen::new(*cov);
        let scale = eig.eigenvalues.amax().max(1e-300);
        if eig.eigenvalues.iter().any(|&l| l < -1e-12 * scale) {
            return Err(Error::InvalidPrior);
        }
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        Ok(eig.eigenvectors * Matrix3::from_diagonal(&roots) * eig.eigenvectors.transpose())
    }

    /// One draw truncated to the half-space `z > 0`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<CartesianPosition> {
        let root = self.sqrt_covariance()?;
        sample_truncated(&self.mean, &root, rng)
    }
}

fn sample_truncated<R: Rng + ?Sized>(mean: &Vector3<f64>, root: &Matrix3<f64>, rng: &mut R) -> Result<CartesianPosition> {
    for _ in 0..MAX_PRIOR_REJECTIONS {
        let n = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        let p = mean + root * n;
        if p.z > 0.0 {
            return Ok(p);
        }
    }
    Err(Error::InvalidPrior)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProfileKind {
    Random,
    Directional,
    Positional,
}

impl ProfileKind {
    pub const ALL: [ProfileKind; 3] = [ProfileKind::Random, ProfileKind::Directional, ProfileKind::Positional];

    pub fn name(self) -> &'static str {
        match self {
            ProfileKind::Random => "random",
            ProfileKind::Directional => "directional",
            ProfileKind::Positional => "positional",
        }
    }

    pub fn uses_prior(self) -> bool {
        !matches!(self, ProfileKind::Random)
    }
}

impl core::str::FromStr for ProfileKind {
    type Err = ();

    fn from_str(s: &str) -> core::result::Result<Self, ()> {
        match s {
            "random" | "randomized" => Ok(ProfileKind::Random),
            "directional" => Ok(ProfileKind::Directional),
            "positional" => Ok(ProfileKind::Positional),
            _ => Err(()),
        }
    }
}

/// Designed phases `ω̃_{t,i}` as angles in `[0, 2π)`, `M × T`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProfiles {
    pub angles: DMatrix<f64>,
}

impl PhaseProfiles {
    pub fn num_elements(&self) -> usize {
        self.angles.nrows()
    }

    pub fn num_pilots(&self) -> usize {
        self.angles.ncols()
    }

    pub fn coefficient(&self, element: usize, pilot: usize) -> C64 {
        C64::cis(self.angles[(element, pilot)])
    }
}

/// i.i.d. `U[0, 2π)` phases for every element and pilot.
pub fn random_profiles<R: Rng + ?Sized>(num_elements: usize, num_pilots: usize, rng: &mut R) -> PhaseProfiles {
    // column-major fill: pilot by pilot, element by element
    let angles = DMatrix::from_iterator(
        num_elements,
        num_pilots,
        (0..num_elements * num_pilots).map(|_| rng.random_range(0.0..TAU)),
    );
    PhaseProfiles { angles }
}

/// One prior draw per pilot, each column the conjugate plane-wave phase
/// toward the drawn direction: `ω̃_{t,i} = exp(+j q_iᵀ k(ϑ_t, φ_t))`.
pub fn directional_profiles<R: Rng + ?Sized>(
    prior: &PriorBelief,
    ris: &RisArray,
    wavelength: f64,
    num_pilots: usize,
    rng: &mut R,
) -> Result<PhaseProfiles> {
    let root = prior.sqrt_covariance()?;
    let mut angles = DMatrix::zeros(ris.len(), num_pilots);
    for t in 0..num_pilots {
        let sample = sample_truncated(&prior.mean, &root, rng)?;
        let coords = SphericalCoords::from_cartesian(&sample)?;
        let k = wavevector(&coords, wavelength);
        for (i, q) in ris.positions.iter().enumerate() {
            angles[(i, t)] = wrap_angle(q.dot(&k));
        }
    }
    Ok(PhaseProfiles { angles })
}

/// One prior draw per pilot, each column the conjugate curved-wavefront
/// phase toward the drawn point: `ω̃_{t,i} = exp(+j(2π/λ)(‖p_t - q_i‖ - d_t))`.
pub fn positional_profiles<R: Rng + ?Sized>(
    prior: &PriorBelief,
    ris: &RisArray,
    wavelength: f64,
    num_pilots: usize,
    rng: &mut R,
) -> Result<PhaseProfiles> {
    let root = prior.sqrt_covariance()?;
    let kappa = TAU / wavelength;
    let mut angles = DMatrix::zeros(ris.len(), num_pilots);
    for t in 0..num_pilots {
        let sample = sample_truncated(&prior.mean, &root, rng)?;
        let d = sample.norm();
        for (i, q) in ris.positions.iter().enumerate() {
            angles[(i, t)] = wrap_angle(kappa * ((sample - q).norm() - d));
        }
    }
    Ok(PhaseProfiles { angles })
}

/// Snaps every phase to the nearest of `2^bits` uniformly spaced levels
/// `{0, 2π/2^b, ...}`.
pub fn quantize_profiles(profiles: &PhaseProfiles, bits: u32) -> Result<PhaseProfiles> {
    if bits == 0 || bits > 30 {
        return Err(Error::InvalidQuantization);
    }
    let levels = (1u64 << bits) as f64;
    let step = TAU / levels;
    let angles = profiles.angles.map(|a| {
        let level = (wrap_angle(a) / step).round() % levels;
        level * step
    });
    Ok(PhaseProfiles { angles })
}

/// Fixed phases `ω_ant` that make `h_ant,i · ω_ant,i = |h_ant,i|`.
#[derive(Debug, Clone, PartialEq)]
pub struct AntennaCompensation {
    pub angles: Vec<f64>,
    /// Elements with zero coupling; their compensation is left at 1.
    pub zero_entries: Vec<usize>,
}

impl AntennaCompensation {
    pub fn coefficients(&self) -> CVector {
        CVector::from_iterator(self.angles.len(), self.angles.iter().map(|&a| C64::cis(a)))
    }
}

pub fn antenna_compensation(h_ant: &CVector) -> AntennaCompensation {
    let mut zero_entries = Vec::new();
    let angles = h_ant
        .iter()
        .enumerate()
        .map(|(i, h)| {
            if h.norm() == 0.0 {
                zero_entries.push(i);
                0.0
            } else {
                wrap_angle(-h.arg())
            }
        })
        .collect();
    AntennaCompensation { angles, zero_entries }
}

/// `W[:, t] = diag(ω_ant ∘ ω̃_t)·h_ant`.
pub fn assemble_w(omega_tilde: &PhaseProfiles, omega_ant: &AntennaCompensation, h_ant: &CVector) -> Result<CMatrix> {
    let m = h_ant.len();
    if omega_tilde.num_elements() != m || omega_ant.angles.len() != m {
        return Err(Error::ShapeMismatch {
            expected: (m, omega_tilde.num_pilots()),
            got: (omega_tilde.num_elements(), omega_ant.angles.len()),
        });
    }
    let compensated: Vec<C64> = h_ant
        .iter()
        .zip(&omega_ant.angles)
        .map(|(h, &a)| h * C64::cis(a))
        .collect();
    Ok(CMatrix::from_fn(m, omega_tilde.num_pilots(), |i, t| {
        compensated[i] * C64::cis(omega_tilde.angles[(i, t)])
    }))
}

/// Designed phases, compensation and the resulting weight matrix `W`.
#[derive(Debug, Clone)]
pub struct PhaseProfileSet {
    pub omega_tilde: PhaseProfiles,
    pub omega_ant: AntennaCompensation,
    pub w: CMatrix,
}

/// Settings for [`PhaseProfileSet::generate`].
#[derive(Debug, Clone)]
pub struct ProfileDesign {
    pub kind: ProfileKind,
    pub prior: PriorBelief,
    pub num_pilots: usize,
    /// Phase resolution in bits; `None` keeps continuous phases.
    pub quant_bits: Option<u32>,
}

impl PhaseProfileSet {
    pub fn new(omega_tilde: PhaseProfiles, h_ant: &CVector) -> Result<Self> {
        let omega_ant = antenna_compensation(h_ant);
        let w = assemble_w(&omega_tilde, &omega_ant, h_ant)?;
        Ok(Self {
            omega_tilde,
            omega_ant,
            w,
        })
    }

    pub fn generate<R: Rng + ?Sized>(
        design: &ProfileDesign,
        h_ant: &CVector,
        ris: &RisArray,
        wavelength: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let t = design.num_pilots;
        let mut omega_tilde = match design.kind {
            ProfileKind::Random => random_profiles(ris.len(), t, rng),
            ProfileKind::Directional => directional_profiles(&design.prior, ris, wavelength, t, rng)?,
            ProfileKind::Positional => positional_profiles(&design.prior, ris, wavelength, t, rng)?,
        };
        if let Some(bits) = design.quant_bits {
            omega_tilde = quantize_profiles(&omega_tilde, bits)?;
        }
        Self::new(omega_tilde, h_ant)
    }
}

/// Largest deviation between two phase angles, wrapped to `[0, π]`.
pub fn max_phase_deviation(a: &PhaseProfiles, b: &PhaseProfiles) -> f64 {
    a.angles
        .iter()
        .zip(b.angles.iter())
        .map(|(&x, &y)| {
            let d = wrap_angle(x - y);
            if d > PI {
                TAU - d
            } else {
                d
            }
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{antenna_coupling, cm1_steering, cm2_steering};
    use crate::geometry::{build_ris_grid, Scenario};
    use approx::assert_relative_eq;
    use core::f64::consts::FRAC_PI_3;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const LAMBDA: f64 = 0.010707;

    #[test]
    fn compensation_examples() {
        let h = CVector::from_vec(alloc::vec![C64::from_polar(2.0, FRAC_PI_3)]);
        let comp = antenna_compensation(&h);
        assert!((comp.coefficients()[0] - C64::cis(-FRAC_PI_3)).norm() < 1e-15);
        assert!((h[0] * comp.coefficients()[0] - C64::new(2.0, 0.0)).norm() < 1e-14);

        let real = CVector::from_vec(alloc::vec![C64::new(0.5, 0.0), C64::new(3.0, 0.0)]);
        assert!(antenna_compensation(&real).angles.iter().all(|&a| a == 0.0));

        let h = CVector::from_vec(alloc::vec![C64::new(0.3, -0.4), C64::new(0.0, 0.0)]);
        let comp = antenna_compensation(&h);
        assert_eq!(comp.zero_entries, alloc::vec![1]);
        assert_eq!(comp.angles[1], 0.0);
        let compensated = h.component_mul(&comp.coefficients());
        let again = antenna_compensation(&compensated);
        assert!(again.angles.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn compensated_coupling_is_real_nonnegative() {
        let s = Scenario::reference();
        let ris = s.ris();
        let h = antenna_coupling(&s, &ris).unwrap();
        let comp = antenna_compensation(&h);
        for (x, c) in h.iter().zip(comp.coefficients().iter()) {
            let v = x * c;
            assert!(v.im.abs() <= 1e-12 * x.norm().max(1e-300));
            assert!(v.re >= 0.0);
        }
    }

    #[test]
    fn random_profiles_are_reproducible_and_zero_mean() {
        let a = random_profiles(50, 20, &mut ChaCha8Rng::seed_from_u64(1));
        let b = random_profiles(50, 20, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);

        let big = random_profiles(1000, 1000, &mut ChaCha8Rng::seed_from_u64(2));
        let mean = big.angles.iter().map(|&a| C64::cis(a)).sum::<C64>() / 1e6;
        assert!(mean.norm() < 0.01, "{mean}");

        // chi-square over 16 equal bins, 1% critical value for 15 dof is 30.58
        let mut counts = [0usize; 16];
        for &a in big.angles.iter() {
            assert!((0.0..TAU).contains(&a));
            counts[((a / TAU) * 16.0) as usize] += 1;
        }
        let expected = 1e6 / 16.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 30.58, "{chi2}");
    }

    #[test]
    fn zero_variance_directional_at_broadside_is_all_ones() {
        let ris = build_ris_grid(6, 6, LAMBDA / 2.0);
        let prior = PriorBelief::isotropic(Vector3::new(0.0, 0.0, 2.0), 0.0);
        let prof = directional_profiles(&prior, &ris, LAMBDA, 4, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        for &a in prof.angles.iter() {
            assert!(a.min(TAU - a) < 1e-12);
        }
    }

    #[test]
    fn zero_variance_profiles_focus_coherently() {
        let s = Scenario::reference();
        let ris = build_ris_grid(12, 12, s.wavelength / 2.0);
        let mut s = s;
        s.ris_rows = 12;
        s.ris_cols = 12;
        let h = antenna_coupling(&s, &ris).unwrap();
        let peak: f64 = h.iter().map(|v| v.norm()).sum();
        let p0 = Vector3::new(0.1, 0.1, 0.1);
        let prior = PriorBelief::isotropic(p0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);

        let dir = directional_profiles(&prior, &ris, s.wavelength, 3, &mut rng).unwrap();
        let w = PhaseProfileSet::new(dir, &h).unwrap().w;
        let coords = SphericalCoords::from_cartesian(&p0).unwrap();
        let a1 = cm1_steering(coords.theta, coords.phi, &ris, s.wavelength);
        for v in w.tr_mul(&a1).iter() {
            assert_relative_eq!(v.norm(), peak, max_relative = 1e-12);
        }

        let pos = positional_profiles(&prior, &ris, s.wavelength, 3, &mut rng).unwrap();
        let w = PhaseProfileSet::new(pos, &h).unwrap().w;
        let a2 = cm2_steering(&p0, &ris, s.wavelength).unwrap();
        for v in w.tr_mul(&a2).iter() {
            assert_relative_eq!(v.norm(), peak, max_relative = 1e-12);
        }
    }

    #[test]
    fn positional_matches_directional_far_away() {
        let ris = build_ris_grid(20, 20, LAMBDA / 2.0);
        let mean = SphericalCoords::new(5000.0 * ris.max_radius(), 0.7, 1.1).to_cartesian();
        let prior = PriorBelief::isotropic(mean, 0.0);
        let dir = directional_profiles(&prior, &ris, LAMBDA, 2, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let pos = positional_profiles(&prior, &ris, LAMBDA, 2, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert!(max_phase_deviation(&dir, &pos) < 0.1);
    }

    #[test]
    fn prior_samples_stay_in_front_and_bad_priors_fail() {
        let prior = PriorBelief::isotropic(Vector3::new(0.0, 0.0, 0.05), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            assert!(prior.sample(&mut rng).unwrap().z > 0.0);
        }
        let mut asym = PriorBelief::isotropic(Vector3::new(0.0, 0.0, 1.0), 1.0);
        asym.covariance[(0, 1)] = 0.5;
        assert_eq!(asym.sample(&mut rng), Err(Error::InvalidPrior));
        let negative = PriorBelief {
            mean: Vector3::new(0.0, 0.0, 1.0),
            covariance: -Matrix3::identity(),
        };
        assert_eq!(negative.sample(&mut rng), Err(Error::InvalidPrior));
        let behind = PriorBelief::isotropic(Vector3::new(0.0, 0.0, -1.0), 0.0);
        assert_eq!(behind.sample(&mut rng), Err(Error::InvalidPrior));
    }

    #[test]
    fn quantization_levels_and_error_bound() {
        let prof = random_profiles(40, 40, &mut ChaCha8Rng::seed_from_u64(7));
        let one = quantize_profiles(&prof, 1).unwrap();
        assert!(one.angles.iter().all(|&a| a == 0.0 || a == PI));
        for bits in 1..=4 {
            let q = quantize_profiles(&prof, bits).unwrap();
            let bound = PI / (1u32 << bits) as f64;
            assert!(max_phase_deviation(&prof, &q) <= bound + 1e-12);
        }
        assert_eq!(quantize_profiles(&prof, 0), Err(Error::InvalidQuantization));
    }

    #[test]
    fn assembled_weights_have_profile_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = CVector::from_fn(9, |_, _| C64::from_polar(rng.random_range(0.1..1.0), rng.random_range(0.0..TAU)));
        let ones = PhaseProfiles {
            angles: DMatrix::zeros(9, 4),
        };
        let w = PhaseProfileSet::new(ones, &h).unwrap().w;
        for t in 0..4 {
            for i in 0..9 {
                assert!((w[(i, t)] - C64::from(h[i].norm())).norm() < 1e-15);
            }
        }
        let prof = random_profiles(9, 4, &mut rng);
        let w = PhaseProfileSet::new(prof, &h).unwrap().w;
        let norms: Vec<f64> = w.column_iter().map(|c| c.norm()).collect();
        for t in 0..4 {
            assert_relative_eq!(norms[t], norms[0], max_relative = 1e-14);
            for i in 0..9 {
                assert_relative_eq!(w[(i, t)].norm(), h[i].norm(), max_relative = 1e-14);
            }
        }
        let bad = random_profiles(8, 4, &mut rng);
        assert!(matches!(
            assemble_w(&bad, &antenna_compensation(&h), &h),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
