//! Near-field localization of a transmitter through a reconfigurable
//! intelligent surface (RIS) operated as a lens in front of a single receive
//! antenna.
//!
//! The crate is `no_std` (with `alloc`) and covers the numerical side only:
//!
//! - [`geometry`]: scenario constants, the planar element grid and coordinate
//!   conversions.
//! - [`channel`]: far-field (CM1), curved-wavefront (CM2) and area-integrated
//!   (CM3) channel models, antenna coupling and noisy pilot synthesis.
//! - [`fisher`]: Fisher information, equivalent position information, the
//!   position error bound and the SNR map.
//! - [`profiles`]: random, directional and positional phase-profile
//!   sequences and the combined weight matrix.
//! - [`estimator`]: closed-form gain, the concentrated ML objective and the
//!   elevation → azimuth → distance line-search localizer.
//!
//! File formats, Monte Carlo sweeps and the command line live in the `rislens`
//! companion crate.

#![no_std]

extern crate alloc;

pub mod channel;
pub mod error;
pub mod estimator;
pub mod fisher;
pub mod geometry;
pub mod linalg;
pub mod profiles;

pub use error::{Error, Result};

/// Complex baseband sample type used throughout the crate.
pub type C64 = num_complex::Complex<f64>;

/// Complex column vector (pilots or elements).
pub type CVector = nalgebra::DVector<C64>;

/// Complex dense matrix, column-major.
pub type CMatrix = nalgebra::DMatrix<C64>;

/// Position in meters, surface-centered frame (surface in the XY plane).
pub type CartesianPosition = nalgebra::Vector3<f64>;
