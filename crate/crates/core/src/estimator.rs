//! Maximum-likelihood localization by three successive line searches.
//!
//! With the gain eliminated in closed form, the position objective is the
//! energy of `y` outside `span{Wᵀa(p)}`. The search splits it by
//! coordinate:
//!
//! 1. elevation: the plane-wave steering vector is expanded with the
//!    Jacobi–Anger series, `a(ϑ, φ) ≈ Gᵀ(ϑ)h(φ)`, and the azimuth factor is
//!    absorbed into an unstructured vector fitted by least squares;
//! 2. azimuth: with `ϑ̂` fixed, the structured `h(φ)` is scanned;
//! 3. distance: along the ray `(ϑ̂, φ̂)` the curved-wavefront objective is
//!    scanned in `d`.
//!
//! Bins are evaluated in increasing order and ties keep the smaller value.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::DMatrix;

use crate::channel::cm2_steering;
use crate::geometry::{direction, RisArray, Scenario, SphericalCoords};
use crate::linalg::{truncated_least_squares, SplitMatrix};
use crate::{CMatrix, CVector, CartesianPosition, Error, Result, C64};

/// Singular values below this fraction of the largest are dropped in the
/// elevation fit.
pub const PINV_CUTOFF: f64 = 1e-10;

/// Relative spread below which the distance objective counts as flat.
pub const FLAT_OBJECTIVE_TOLERANCE: f64 = 1e-9;

/// Candidate values for each line search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchGrids {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub distance: Vec<f64>,
}

impl SearchGrids {
    /// `theta_bins` values `k·(π/2)/theta_bins`, `phi_bins` values
    /// `k·2π/phi_bins` and `d_bins` log-spaced distances covering
    /// `[d_min, d_max]` inclusive.
    pub fn new(theta_bins: usize, phi_bins: usize, d_bins: usize, d_min: f64, d_max: f64) -> Result<Self> {
        if theta_bins < 2 || phi_bins < 2 || d_bins < 2 {
            return Err(Error::InvalidGrid("every grid needs at least two bins"));
        }
        if !(d_min > 0.0) || !(d_max > d_min) || !d_max.is_finite() {
            return Err(Error::InvalidGrid("distance range must satisfy 0 < d_min < d_max"));
        }
        let theta = (0..theta_bins).map(|k| k as f64 * FRAC_PI_2 / theta_bins as f64).collect();
        let phi = (0..phi_bins).map(|k| k as f64 * TAU / phi_bins as f64).collect();
        let (lo, hi) = (d_min.ln(), d_max.ln());
        let distance = (0..d_bins)
            .map(|k| match k {
                0 => d_min,
                k if k == d_bins - 1 => d_max,
                k => (lo + (hi - lo) * k as f64 / (d_bins - 1) as f64).exp(),
            })
            .collect();
        Ok(Self { theta, phi, distance })
    }

    pub fn theta_step(&self) -> f64 {
        FRAC_PI_2 / self.theta.len() as f64
    }

    pub fn phi_step(&self) -> f64 {
        TAU / self.phi.len() as f64
    }

    /// Ratio between consecutive distance bins.
    pub fn distance_ratio(&self) -> f64 {
        self.distance[1] / self.distance[0]
    }
}

impl Default for SearchGrids {
    fn default() -> Self {
        Self::new(90, 360, 500, 0.05, 20.0).expect("default grids are valid")
    }
}

/// Jacobi–Anger coefficients of the plane-wave steering vector at one
/// elevation: `[g_i(ϑ)]_n = jⁿ J_n((2π/λ) r_i sinϑ) e^{-jnψ_i}` for
/// `n = -N..=N`, stored as a `(2N+1) × M` matrix (row `n + N`).
#[derive(Debug, Clone)]
pub struct BesselBasis {
    pub order: usize,
    pub g: CMatrix,
}

/// `[h(φ)]_n = e^{jnφ}`, `n = -N..=N`.
pub fn azimuth_basis(phi: f64, order: usize) -> CVector {
    let n = order as i64;
    CVector::from_iterator(2 * order + 1, (-n..=n).map(|k| C64::cis(k as f64 * phi)))
}

/// `jⁿ` for integer `n`.
fn j_power(n: i64) -> C64 {
    match n.rem_euclid(4) {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

/// Bessel function of the first kind, integer order.
pub fn bessel_j(n: i32, x: f64) -> f64 {
    match n {
        0 => libm::j0(x),
        1 => libm::j1(x),
        _ => libm::jn(n, x),
    }
}

/// Fills `out[(n + N, i)] = jⁿ J_n(κ r_i sinϑ) e^{-jnψ_i}`.
fn fill_bessel_coefficients(theta: f64, ris: &RisArray, wavelength: f64, order: usize, mut out: impl FnMut(usize, usize, C64)) {
    let kr = TAU / wavelength * theta.sin();
    let n_max = order as i64;
    for (i, (&r, &psi)) in ris.radii.iter().zip(&ris.azimuths).enumerate() {
        let x = kr * r;
        for n in 0..=n_max {
            let jn = bessel_j(n as i32, x);
            let pos = j_power(n) * jn * C64::cis(-(n as f64) * psi);
            out((n_max + n) as usize, i, pos);
            if n > 0 {
                // J_{-n} = (-1)ⁿ J_n
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                let neg = j_power(-n) * (sign * jn) * C64::cis(n as f64 * psi);
                out((n_max - n) as usize, i, neg);
            }
        }
    }
}

pub fn bessel_basis(theta: f64, ris: &RisArray, wavelength: f64, order: usize) -> BesselBasis {
    let mut g = CMatrix::zeros(2 * order + 1, ris.len());
    fill_bessel_coefficients(theta, ris, wavelength, order, |row, col, v| g[(row, col)] = v);
    BesselBasis { order, g }
}

impl BesselBasis {
    /// Truncated expansion `Gᵀ(ϑ)h(φ)` of the plane-wave steering vector.
    pub fn steering(&self, phi: f64) -> CVector {
        self.g.tr_mul(&azimuth_basis(phi, self.order))
    }
}

/// Relative error `‖Gᵀh - a‖/‖a‖` of the order-`N` expansion against the
/// exact plane-wave steering vector.
pub fn expansion_error(theta: f64, phi: f64, ris: &RisArray, wavelength: f64, order: usize) -> f64 {
    let exact = crate::channel::cm1_steering_polar(theta, phi, ris, wavelength);
    (bessel_basis(theta, ris, wavelength, order).steering(phi) - &exact).norm() / exact.norm()
}

/// Closed-form gain `α̂ = aᴴW*y / (√Es ‖Wᵀa‖²)`; `None` when `Wᵀa = 0`.
pub fn gain_estimate(y: &CVector, w: &CMatrix, a: &CVector, symbol_energy: f64) -> Option<C64> {
    gain_from_projection(y, &w.tr_mul(a), symbol_energy)
}

/// Gain for a precomputed `c = Wᵀa`.
pub fn gain_from_projection(y: &CVector, c: &CVector, symbol_energy: f64) -> Option<C64> {
    let energy = c.norm_squared();
    if !(energy > 0.0) {
        return None;
    }
    Some(c.dotc(y) / (symbol_energy.sqrt() * energy))
}

/// Energy of `y` outside `span{c}`: `‖y‖² - |cᴴy|²/‖c‖²`. A zero `c`
/// explains nothing and gives `‖y‖²`.
pub fn projected_residual(y: &CVector, c: &CVector) -> f64 {
    let y_energy = y.norm_squared();
    let energy = c.norm_squared();
    if !(energy > 0.0) {
        return y_energy;
    }
    (y_energy - c.dotc(y).norm_sqr() / energy).max(0.0)
}

/// Concentrated ML objective for the steering vector `a`.
pub fn ml_objective(y: &CVector, w: &CMatrix, a: &CVector) -> f64 {
    projected_residual(y, &w.tr_mul(a))
}

/// Result of a grid scan: winning index and the objective at every bin.
#[derive(Debug, Clone)]
pub struct LineSearch {
    pub index: usize,
    pub value: f64,
    pub residuals: Vec<f64>,
}

impl LineSearch {
    fn from_residuals(grid: &[f64], residuals: Vec<f64>) -> Self {
        let mut best = 0;
        for (k, &r) in residuals.iter().enumerate() {
            if r < residuals[best] {
                best = k;
            }
        }
        Self {
            index: best,
            value: grid[best],
            residuals,
        }
    }

    pub fn min_residual(&self) -> f64 {
        self.residuals[self.index]
    }

    /// True when the objective barely varies over the grid.
    pub fn is_flat(&self, scale: f64) -> bool {
        let (lo, hi) = self
            .residuals
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
        !(hi - lo > FLAT_OBJECTIVE_TOLERANCE * scale)
    }
}

/// Weight matrix together with its split transpose, built once per trial.
#[derive(Debug, Clone)]
pub struct PilotWeights {
    pub w: CMatrix,
    wt: SplitMatrix,
}

impl PilotWeights {
    pub fn new(w: CMatrix) -> Self {
        let wt = SplitMatrix::transpose_of(&w);
        Self { w, wt }
    }

    pub fn num_pilots(&self) -> usize {
        self.w.ncols()
    }

    /// `Wᵀ X` for a split `M × K` matrix.
    pub fn project(&self, x: &SplitMatrix) -> SplitMatrix {
        self.wt.mul(x)
    }
}

/// Optional local zoom after each grid stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refinement {
    /// Points per zoom level spanning ±1 bin around the current optimum.
    pub points: usize,
    pub levels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizerConfig {
    pub grids: SearchGrids,
    /// Truncation order `N` of the Jacobi–Anger expansion.
    pub order: usize,
    pub refinement: Option<Refinement>,
}

impl Default for LocalizerConfig {
    fn default() -> Self {
        Self {
            grids: SearchGrids::default(),
            order: 5,
            refinement: None,
        }
    }
}

/// Output of [`Localizer::localize`].
#[derive(Debug, Clone)]
pub struct Estimate {
    pub theta: f64,
    pub phi: f64,
    pub distance: f64,
    pub position: CartesianPosition,
    pub alpha: C64,
    /// Energy of `y` unexplained at the estimate.
    pub residual: f64,
    /// Set when a stage was degenerate or its objective was flat.
    pub low_confidence: bool,
}

impl Estimate {
    pub fn coords(&self) -> SphericalCoords {
        SphericalCoords::new(self.distance, self.theta, self.phi)
    }
}

/// Grid localizer for one scenario. Builds the Jacobi–Anger bases for every
/// elevation bin once; each call then only needs the trial's pilots and
/// weights.
#[derive(Debug, Clone)]
pub struct Localizer {
    config: LocalizerConfig,
    ris: RisArray,
    wavelength: f64,
    symbol_energy: f64,
    /// `Gᵀ(ϑ_k)` for all elevation bins side by side, `M × (K·n_ϑ)`.
    stacked_bases: SplitMatrix,
}

impl Localizer {
    pub fn new(scenario: &Scenario, config: LocalizerConfig) -> Result<Self> {
        scenario.validate()?;
        let ris = scenario.ris();
        let stacked_bases = stack_bases(&config.grids.theta, &ris, scenario.wavelength, config.order);
        Ok(Self {
            config,
            ris,
            wavelength: scenario.wavelength,
            symbol_energy: scenario.symbol_energy,
            stacked_bases,
        })
    }

    pub fn config(&self) -> &LocalizerConfig {
        &self.config
    }

    pub fn ris(&self) -> &RisArray {
        &self.ris
    }

    fn basis_width(&self) -> usize {
        2 * self.config.order + 1
    }

    fn check(&self, y: &CVector, weights: &PilotWeights) -> Result<()> {
        let (m, t) = weights.w.shape();
        if m != self.ris.len() || y.len() != t {
            return Err(Error::ShapeMismatch {
                expected: (self.ris.len(), y.len()),
                got: (m, t),
            });
        }
        if t < self.basis_width() {
            return Err(Error::Underdetermined {
                pilots: t,
                unknowns: self.basis_width(),
            });
        }
        Ok(())
    }

    /// Elevation scan: per bin, least-squares fit of an unstructured
    /// coefficient vector `v` in `y ≈ WᵀGᵀ(ϑ)v`.
    pub fn stage1_elevation(&self, y: &CVector, weights: &PilotWeights) -> Result<LineSearch> {
        self.check(y, weights)?;
        let k = self.basis_width();
        let projected = weights.project(&self.stacked_bases);
        let residuals = (0..self.config.grids.theta.len())
            .map(|bin| truncated_least_squares(&projected.columns_complex(bin * k, k), y, PINV_CUTOFF).residual)
            .collect();
        Ok(LineSearch::from_residuals(&self.config.grids.theta, residuals))
    }

    /// `B(ϑ) = WᵀGᵀ(ϑ)` for an arbitrary elevation.
    pub fn projected_basis(&self, theta: f64, weights: &PilotWeights) -> CMatrix {
        let basis = bessel_basis(theta, &self.ris, self.wavelength, self.config.order);
        weights.w.tr_mul(&basis.g.transpose())
    }

    fn azimuth_residuals(&self, y: &CVector, b: &CMatrix, phis: &[f64]) -> Vec<f64> {
        phis.iter()
            .map(|&phi| projected_residual(y, &(b * azimuth_basis(phi, self.config.order))))
            .collect()
    }

    /// Azimuth scan with the structured `h(φ)` and the gain eliminated.
    pub fn stage2_azimuth(&self, y: &CVector, weights: &PilotWeights, theta: f64) -> Result<LineSearch> {
        self.check(y, weights)?;
        let b = self.projected_basis(theta, weights);
        let residuals = self.azimuth_residuals(y, &b, &self.config.grids.phi);
        Ok(LineSearch::from_residuals(&self.config.grids.phi, residuals))
    }

    fn distance_residuals(&self, y: &CVector, weights: &PilotWeights, theta: f64, phi: f64, distances: &[f64]) -> Vec<f64> {
        let u = direction(theta, phi);
        let kappa = TAU / self.wavelength;
        let m = self.ris.len();
        let mut re = DMatrix::zeros(m, distances.len());
        let mut im = DMatrix::zeros(m, distances.len());
        for (col, &d) in distances.iter().enumerate() {
            let p = u * d;
            for (i, q) in self.ris.positions.iter().enumerate() {
                let (s, c) = (-kappa * ((p - q).norm() - d)).sin_cos();
                re[(i, col)] = c;
                im[(i, col)] = s;
            }
        }
        let c = weights.project(&SplitMatrix { re, im });
        (0..distances.len())
            .map(|col| {
                let cv = CVector::from_fn(c.nrows(), |t, _| C64::new(c.re[(t, col)], c.im[(t, col)]));
                projected_residual(y, &cv)
            })
            .collect()
    }

    /// Distance scan along the ray `(ϑ̂, φ̂)` with curved-wavefront steering.
    pub fn stage3_distance(&self, y: &CVector, weights: &PilotWeights, theta: f64, phi: f64) -> Result<LineSearch> {
        self.check(y, weights)?;
        let residuals = self.distance_residuals(y, weights, theta, phi, &self.config.grids.distance);
        Ok(LineSearch::from_residuals(&self.config.grids.distance, residuals))
    }

    /// Runs the three stages and evaluates the gain at the final position.
    pub fn localize(&self, y: &CVector, w: &CMatrix) -> Result<Estimate> {
        self.localize_prepared(y, &PilotWeights::new(w.clone()))
    }

    pub fn localize_prepared(&self, y: &CVector, weights: &PilotWeights) -> Result<Estimate> {
        let y_energy = y.norm_squared();
        let s1 = self.stage1_elevation(y, weights)?;
        let mut theta = s1.value;
        if let Some(r) = self.config.refinement {
            theta = self.refine(theta, self.config.grids.theta_step(), r, (0.0, FRAC_PI_2), |vals| {
                vals.iter()
                    .map(|&th| truncated_least_squares(&self.projected_basis(th, weights), y, PINV_CUTOFF).residual)
                    .collect()
            });
        }

        let s2 = self.stage2_azimuth(y, weights, theta)?;
        let mut phi = s2.value;
        if let Some(r) = self.config.refinement {
            let b = self.projected_basis(theta, weights);
            phi = self.refine(phi, self.config.grids.phi_step(), r, (f64::NEG_INFINITY, f64::INFINITY), |vals| {
                self.azimuth_residuals(y, &b, vals)
            });
            phi = crate::geometry::wrap_angle(phi);
        }

        let s3 = self.stage3_distance(y, weights, theta, phi)?;
        let mut distance = s3.value;
        if let Some(r) = self.config.refinement {
            let ratio = self.config.grids.distance_ratio();
            let (lo, hi) = (self.config.grids.distance[0], *self.config.grids.distance.last().unwrap_or(&distance));
            let mut log_d = distance.ln();
            let mut step = ratio.ln();
            for _ in 0..r.levels {
                let cands: Vec<f64> = local_grid(log_d, step, r.points)
                    .into_iter()
                    .map(|v| v.exp().clamp(lo, hi))
                    .collect();
                let res = self.distance_residuals(y, weights, theta, phi, &cands);
                let best = LineSearch::from_residuals(&cands, res);
                log_d = best.value.ln();
                step *= 2.0 / (r.points.max(2) - 1) as f64;
            }
            distance = log_d.exp();
        }

        let position = direction(theta, phi) * distance;
        let a = cm2_steering(&position, &self.ris, self.wavelength)?;
        let c = weights.w.tr_mul(&a);
        let alpha = gain_from_projection(y, &c, self.symbol_energy);
        let low_confidence = alpha.is_none() || s3.is_flat(y_energy) || s2.is_flat(y_energy);
        Ok(Estimate {
            theta,
            phi,
            distance,
            position,
            alpha: alpha.unwrap_or(C64::new(0.0, 0.0)),
            residual: projected_residual(y, &c),
            low_confidence,
        })
    }

    fn refine(&self, start: f64, step: f64, r: Refinement, bounds: (f64, f64), mut eval: impl FnMut(&[f64]) -> Vec<f64>) -> f64 {
        let mut center = start;
        let mut step = step;
        for _ in 0..r.levels {
            let cands: Vec<f64> = local_grid(center, step, r.points)
                .into_iter()
                .map(|v| v.clamp(bounds.0, bounds.1))
                .collect();
            let res = eval(&cands);
            center = LineSearch::from_residuals(&cands, res).value;
            step *= 2.0 / (r.points.max(2) - 1) as f64;
        }
        center
    }
}

/// `points` values evenly covering `[center - step, center + step]`.
fn local_grid(center: f64, step: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    (0..points)
        .map(|k| center - step + 2.0 * step * k as f64 / (points - 1) as f64)
        .collect()
}

fn stack_bases(thetas: &[f64], ris: &RisArray, wavelength: f64, order: usize) -> SplitMatrix {
    let k = 2 * order + 1;
    let m = ris.len();
    let mut re = DMatrix::zeros(m, k * thetas.len());
    let mut im = DMatrix::zeros(m, k * thetas.len());
    for (bin, &theta) in thetas.iter().enumerate() {
        fill_bessel_coefficients(theta, ris, wavelength, order, |row, col, v| {
            re[(col, bin * k + row)] = v.re;
            im[(col, bin * k + row)] = v.im;
        });
    }
    SplitMatrix { re, im }
}

/// Convenience wrapper: builds a [`Localizer`] and runs it once.
pub fn localize(y: &CVector, w: &CMatrix, scenario: &Scenario, config: LocalizerConfig) -> Result<Estimate> {
    Localizer::new(scenario, config)?.localize(y, w)
}
