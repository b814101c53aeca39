//! Scenario constants, the planar element grid and coordinate conversions.
//!
//! The surface lies in the XY plane with its centroid at the origin. User
//! positions are parameterized by distance `d`, elevation `theta` (from the
//! +Z surface normal, in `[0, π/2]`) and azimuth `phi` (counter-clockwise
//! from +X, in `[0, 2π)`).

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use num_traits::{Euclid, Float};

use crate::{CartesianPosition, Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Physical constants of one localization setup.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Carrier wavelength, m.
    pub wavelength: f64,
    pub ris_rows: usize,
    pub ris_cols: usize,
    /// Center-to-center element spacing, m.
    pub element_spacing: f64,
    /// Side of the square element aperture, m. The element area is its square.
    pub element_side: f64,
    /// Receive antenna position, m.
    pub antenna_position: CartesianPosition,
    /// Transmit power, W.
    pub tx_power: f64,
    /// Thermal noise power spectral density, W/Hz.
    pub noise_psd: f64,
    /// Receiver noise figure, linear.
    pub noise_figure: f64,
    /// Signal bandwidth, Hz.
    pub bandwidth: f64,
    /// Number of pilots `T`.
    pub num_pilots: usize,
    /// Pilot energy `Es`, J.
    pub symbol_energy: f64,
    /// Complex noise variance `N0` per sample, J.
    pub noise_variance: f64,
}

impl Scenario {
    /// 50×50 half-wavelength surface at 28 GHz with the antenna one wavelength
    /// behind the center, 1 mW over 1 MHz, -174 dBm/Hz noise, 8 dB noise
    /// figure and 200 pilots.
    pub fn reference() -> Self {
        let wavelength = SPEED_OF_LIGHT / 28e9;
        let mut scenario = Self {
            wavelength,
            ris_rows: 50,
            ris_cols: 50,
            element_spacing: wavelength / 2.0,
            element_side: wavelength / 2.0,
            antenna_position: Vector3::new(0.0, 0.0, -wavelength),
            tx_power: 1e-3,
            noise_psd: dbm_to_watts(-174.0),
            noise_figure: db_to_linear(8.0),
            bandwidth: 1e6,
            num_pilots: 200,
            symbol_energy: 0.0,
            noise_variance: 0.0,
        };
        scenario.derive_symbol_budget();
        scenario
    }

    /// Sets `Es = P / B` (one narrowband symbol of duration `1/B`) and
    /// `N0 = PSD · NF`.
    pub fn derive_symbol_budget(&mut self) {
        self.symbol_energy = self.tx_power / self.bandwidth;
        self.noise_variance = self.noise_psd * self.noise_figure;
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.wavelength) {
            return Err(Error::InvalidScenario("wavelength must be positive"));
        }
        if !positive(self.element_side) || !positive(self.element_spacing) {
            return Err(Error::InvalidScenario("element side and spacing must be positive"));
        }
        if self.ris_rows == 0 || self.ris_cols == 0 {
            return Err(Error::InvalidScenario("surface needs at least one element"));
        }
        if self.num_pilots == 0 {
            return Err(Error::InvalidScenario("at least one pilot is required"));
        }
        if !positive(self.symbol_energy) || !positive(self.noise_variance) {
            return Err(Error::InvalidScenario("Es and N0 must be positive"));
        }
        Ok(())
    }

    pub fn num_elements(&self) -> usize {
        self.ris_rows * self.ris_cols
    }

    pub fn element_area(&self) -> f64 {
        self.element_side * self.element_side
    }

    /// True when the element area exceeds the usual `λ²/4` guideline.
    pub fn exceeds_area_guideline(&self) -> bool {
        self.element_area() > self.wavelength * self.wavelength / 4.0 * (1.0 + 1e-12)
    }

    /// `Es / N0` before path loss, linear.
    pub fn es_over_n0(&self) -> f64 {
        self.symbol_energy / self.noise_variance
    }

    pub fn wavenumber(&self) -> f64 {
        TAU / self.wavelength
    }

    pub fn ris(&self) -> RisArray {
        build_ris_grid(self.ris_rows.max(1), self.ris_cols.max(1), self.element_spacing)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10.0.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * db_to_linear(dbm)
}

/// Element centers of a planar surface in the XY plane.
#[derive(Debug, Clone, PartialEq)]
pub struct RisArray {
    pub positions: Vec<CartesianPosition>,
    /// `r_i = ‖q_i‖`.
    pub radii: Vec<f64>,
    /// `ψ_i`, azimuth of each element center in `[0, 2π)`.
    pub azimuths: Vec<f64>,
}

impl RisArray {
    pub fn from_positions(positions: Vec<CartesianPosition>) -> Self {
        let radii = positions.iter().map(|q| q.x.hypot(q.y)).collect();
        let azimuths = positions.iter().map(|q| wrap_angle(q.y.atan2(q.x))).collect();
        Self {
            positions,
            radii,
            azimuths,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn max_radius(&self) -> f64 {
        self.radii.iter().copied().fold(0.0, f64::max)
    }
}

/// Centered `rows × cols` grid. Element `(m, n)` sits at
/// `x = (n - (cols-1)/2)·s`, `y = (m - (rows-1)/2)·s` and has index
/// `m·cols + n`.
pub fn build_ris_grid(rows: usize, cols: usize, spacing: f64) -> RisArray {
    let x0 = (cols as f64 - 1.0) / 2.0;
    let y0 = (rows as f64 - 1.0) / 2.0;
    let positions = (0..rows)
        .flat_map(|m| {
            (0..cols).map(move |n| {
                Vector3::new((n as f64 - x0) * spacing, (m as f64 - y0) * spacing, 0.0)
            })
        })
        .collect();
    RisArray::from_positions(positions)
}

/// Distance, elevation and azimuth of a point in front of the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalCoords {
    pub distance: f64,
    pub theta: f64,
    pub phi: f64,
}

impl SphericalCoords {
    pub fn new(distance: f64, theta: f64, phi: f64) -> Self {
        Self {
            distance,
            theta,
            phi,
        }
    }

    /// Inverse of [`SphericalCoords::to_cartesian`].
    pub fn from_cartesian(p: &CartesianPosition) -> Result<Self> {
        let distance = p.norm();
        if distance == 0.0 || !distance.is_finite() {
            return Err(Error::ZeroNorm);
        }
        if p.z < 0.0 {
            return Err(Error::NegativeHeight(p.z));
        }
        let theta = (p.z / distance).clamp(-1.0, 1.0).acos();
        let phi = wrap_angle(p.y.atan2(p.x));
        Ok(Self {
            distance,
            theta,
            phi,
        })
    }

    /// `d·[sinϑ cosφ, sinϑ sinφ, cosϑ]`.
    pub fn to_cartesian(&self) -> CartesianPosition {
        direction(self.theta, self.phi) * self.distance
    }
}

/// Unit vector pointing along `(theta, phi)`.
pub fn direction(theta: f64, phi: f64) -> Vector3<f64> {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vector3::new(st * cp, st * sp, ct)
}

/// Plane-wave wavevector of a source at `(theta, phi)`:
/// `-(2π/λ)[sinϑ cosφ, sinϑ sinφ, cosϑ]`.
pub fn wavevector(coords: &SphericalCoords, wavelength: f64) -> Vector3<f64> {
    direction(coords.theta, coords.phi) * (-TAU / wavelength)
}

/// Maps an angle onto `[0, 2π)`.
pub fn wrap_angle(angle: f64) -> f64 {
    let wrapped = Euclid::rem_euclid(&angle, &TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if wrapped >= TAU {
        0.0
    } else {
        wrapped
    }
}

/// Shortest signed difference between two angles, in `(-π, π]`.
pub fn angle_difference(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    if d > PI {
        d - TAU
    } else {
        d
    }
}
