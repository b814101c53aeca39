//! Fisher information for `η = [ρ, θ, pᵀ]ᵀ` under the constant-amplitude,
//! curved-wavefront model, the equivalent position information, the position
//! error bound (PEB) and the pilot-averaged SNR.
//!
//! All products with the weight matrix are taken as `c = Wᵀa` and `E = WᵀD`,
//! so the `M × M` matrix `W*Wᵀ` is never formed.

use core::f64::consts::TAU;

use nalgebra::{Matrix2, Matrix3, Matrix3xX, Matrix5};

use crate::channel::{cm1_amplitude, cm1_steering, cm2_steering};
use crate::geometry::{RisArray, Scenario, SphericalCoords};
use crate::linalg::psd_inverse;
use crate::{CMatrix, CVector, CartesianPosition, Error, Result, C64};

/// Eigenvalues below this fraction of the largest one count as zero when
/// inverting information matrices.
pub const SINGULAR_CUTOFF: f64 = 1e-12;

/// Steering vector `a(p)`, its Jacobian `D = ∂a/∂p` and the unit vectors
/// `e_i = (q_i - p)/‖q_i - p‖` stacked as the columns of `K`.
#[derive(Debug, Clone)]
pub struct SteeringJacobian {
    pub a: CVector,
    pub d: CMatrix,
    pub k: Matrix3xX<f64>,
}

/// `∂a/∂p = j(2π/λ)(diag(a)Kᵀ + a pᵀ/d)` for the curved-wavefront steering
/// vector.
pub fn steering_derivative(p: &CartesianPosition, ris: &RisArray, wavelength: f64) -> Result<SteeringJacobian> {
    let dist = p.norm();
    if !(dist > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let a = cm2_steering(p, ris, wavelength)?;
    let mut k = Matrix3xX::zeros(ris.len());
    for (i, q) in ris.positions.iter().enumerate() {
        let diff = q - p;
        let n = diff.norm();
        if n == 0.0 {
            return Err(Error::CoincidentElement(i));
        }
        k.set_column(i, &(diff / n));
    }
    let kappa = TAU / wavelength;
    let u = p / dist;
    let d = CMatrix::from_fn(ris.len(), 3, |i, c| a[i] * C64::new(0.0, kappa * (k[(c, i)] + u[c])));
    Ok(SteeringJacobian { a, d, k })
}

/// Pilot-domain projections of the steering vector and its Jacobian.
#[derive(Debug, Clone)]
pub struct FisherIntermediates {
    /// `D`, `M × 3`.
    pub d: CMatrix,
    /// `E = WᵀD`, `T × 3`.
    pub e: CMatrix,
    /// `c = Wᵀa`, length `T`.
    pub c: CVector,
    /// Unit vectors from the user to each element, `3 × M`.
    pub k: Matrix3xX<f64>,
}

impl FisherIntermediates {
    pub fn compute(p: &CartesianPosition, w: &CMatrix, ris: &RisArray, wavelength: f64) -> Result<Self> {
        if w.nrows() != ris.len() {
            return Err(Error::ShapeMismatch {
                expected: (ris.len(), w.ncols()),
                got: w.shape(),
            });
        }
        let jac = steering_derivative(p, ris, wavelength)?;
        Ok(Self {
            e: w.tr_mul(&jac.d),
            c: w.tr_mul(&jac.a),
            d: jac.d,
            k: jac.k,
        })
    }
}

/// Full 5×5 FIM from the pilot-domain projections.
pub fn fim_from_intermediates(inter: &FisherIntermediates, rho: f64, symbol_energy: f64, noise_variance: f64) -> Matrix5<f64> {
    let scale = 2.0 * symbol_energy / noise_variance;
    let c_energy = inter.c.norm_squared();
    let ce = inter.c.ad_mul(&inter.e); // 1×3, cᴴE
    let ee = inter.e.ad_mul(&inter.e); // 3×3, EᴴE

    let mut j = Matrix5::zeros();
    j[(0, 0)] = scale * c_energy;
    j[(1, 1)] = scale * rho * rho * c_energy;
    for col in 0..3 {
        let cross = ce[(0, col)];
        j[(0, 2 + col)] = scale * rho * cross.re;
        j[(1, 2 + col)] = scale * rho * rho * cross.im;
        j[(2 + col, 0)] = j[(0, 2 + col)];
        j[(2 + col, 1)] = j[(1, 2 + col)];
        for row in 0..3 {
            j[(2 + row, 2 + col)] = scale * rho * rho * ee[(row, col)].re;
        }
    }
    j
}

/// Full FIM over `[ρ, θ, x, y, z]` for weights `w` and a user at `p`.
pub fn fim_full(
    p: &CartesianPosition,
    rho: f64,
    w: &CMatrix,
    scenario: &Scenario,
    ris: &RisArray,
) -> Result<Matrix5<f64>> {
    let inter = FisherIntermediates::compute(p, w, ris, scenario.wavelength)?;
    Ok(fim_from_intermediates(&inter, rho, scenario.symbol_energy, scenario.noise_variance))
}

/// Equivalent position FIM through the Schur complement of the nuisance
/// block. `None` when the `[ρ, θ]` block is singular.
pub fn efim_schur(j: &Matrix5<f64>) -> Option<Matrix3<f64>> {
    let nuisance: Matrix2<f64> = j.fixed_view::<2, 2>(0, 0).into_owned();
    let nuisance_inv = psd_inverse(&nuisance, SINGULAR_CUTOFF)?;
    let cross = j.fixed_view::<2, 3>(0, 2);
    let pos = j.fixed_view::<3, 3>(2, 2);
    Some(pos - cross.transpose() * nuisance_inv * cross)
}

/// `(2ρ²Es/N0)·Re{Eᴴ(I - ccᴴ/‖c‖²)E}`. `None` when `c = 0`.
pub fn efim_from_intermediates(
    inter: &FisherIntermediates,
    rho: f64,
    symbol_energy: f64,
    noise_variance: f64,
) -> Option<Matrix3<f64>> {
    let c_energy = inter.c.norm_squared();
    if !(c_energy > 0.0) {
        return None;
    }
    // P⊥E = E - c (cᴴE)/‖c‖²
    let ce = inter.c.ad_mul(&inter.e) / C64::from(c_energy);
    let projected = &inter.e - &inter.c * ce;
    let gram = projected.ad_mul(&projected);
    let scale = 2.0 * rho * rho * symbol_energy / noise_variance;
    Some(Matrix3::from_fn(|r, c| scale * gram[(r, c)].re))
}

pub fn efim_projection(
    p: &CartesianPosition,
    rho: f64,
    w: &CMatrix,
    scenario: &Scenario,
    ris: &RisArray,
) -> Result<Option<Matrix3<f64>>> {
    let inter = FisherIntermediates::compute(p, w, ris, scenario.wavelength)?;
    Ok(efim_from_intermediates(&inter, rho, scenario.symbol_energy, scenario.noise_variance))
}

/// `sqrt(trace(J⁻¹))` for a 3×3 position information matrix; `+∞` when it
/// is singular.
pub fn peb(j_pos: &Matrix3<f64>) -> f64 {
    match psd_inverse(j_pos, SINGULAR_CUTOFF) {
        Some(inv) => inv.trace().max(0.0).sqrt(),
        None => f64::INFINITY,
    }
}

/// PEB from the full FIM: the position block of `J⁻¹`.
pub fn peb_from_full(j: &Matrix5<f64>) -> f64 {
    match psd_inverse(j, SINGULAR_CUTOFF) {
        Some(inv) => (inv[(2, 2)] + inv[(3, 3)] + inv[(4, 4)]).max(0.0).sqrt(),
        None => f64::INFINITY,
    }
}

/// PEB of an isotropic Gaussian prior `σ²I₃`.
pub fn prior_peb(sigma: f64) -> f64 {
    sigma * 3f64.sqrt()
}

#[derive(Debug, Clone)]
pub struct FisherResult {
    pub j_full: Matrix5<f64>,
    pub j_pos: Matrix3<f64>,
    pub peb: f64,
}

/// Bound for a user at `p`: constant amplitude from the far-field power law,
/// curved-wavefront phases. Degenerate geometries give `peb = +∞`.
pub fn fisher_analysis(p: &CartesianPosition, w: &CMatrix, scenario: &Scenario, ris: &RisArray) -> Result<FisherResult> {
    let coords = SphericalCoords::from_cartesian(p)?;
    let rho = cm1_amplitude(&coords, scenario)?;
    let inter = FisherIntermediates::compute(p, w, ris, scenario.wavelength)?;
    let j_full = fim_from_intermediates(&inter, rho, scenario.symbol_energy, scenario.noise_variance);
    let j_pos = efim_from_intermediates(&inter, rho, scenario.symbol_energy, scenario.noise_variance)
        .unwrap_or_else(Matrix3::zeros);
    Ok(FisherResult {
        j_full,
        peb: peb(&j_pos),
        j_pos,
    })
}

/// Which phase model the SNR is evaluated under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteeringModel {
    PlaneWave,
    CurvedWave,
}

/// Pilot-averaged SNR `(1/T) Σ_t (Es ρ²/N0)|w_tᵀa(p)|²` in dB, with the
/// far-field amplitude `ρ`.
pub fn snr_db(
    w: &CMatrix,
    p: &CartesianPosition,
    scenario: &Scenario,
    ris: &RisArray,
    model: SteeringModel,
) -> Result<f64> {
    let coords = SphericalCoords::from_cartesian(p)?;
    let rho = cm1_amplitude(&coords, scenario)?;
    let a = match model {
        SteeringModel::PlaneWave => cm1_steering(coords.theta, coords.phi, ris, scenario.wavelength),
        SteeringModel::CurvedWave => cm2_steering(p, ris, scenario.wavelength)?,
    };
    if w.nrows() != a.len() {
        return Err(Error::ShapeMismatch {
            expected: (a.len(), w.ncols()),
            got: w.shape(),
        });
    }
    let gain = w.tr_mul(&a).norm_squared() / w.ncols().max(1) as f64;
    let snr = scenario.es_over_n0() * rho * rho * gain;
    Ok(10.0 * snr.log10())
}
