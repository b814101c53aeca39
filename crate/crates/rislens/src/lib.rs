//! Experiment harness for `rislens-core`: flat config files, seeded Monte
//! Carlo sweeps (PEB, localization RMSE, SNR maps) and CSV output.

pub mod config;
pub mod error;
pub mod output;
pub mod streams;
pub mod sweep;

pub use config::RunConfig;
pub use error::HarnessError;
pub use sweep::{run_peb_sweep, run_rmse_sweep, run_snr_map, PebPoint, RmsePoint, SnrSample};
