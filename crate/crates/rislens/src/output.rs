//! CSV emission. Floats use Rust's shortest round-trip scientific form, so
//! files carry full double precision.

use std::io::Write;

use crate::error::HarnessError;
use rislens_core::CMatrix;

use crate::sweep::{PebPoint, RmsePoint, SnrSample};

pub const PEB_HEADER: [&str; 5] = ["distance_m", "profile", "sigma_m", "peb_m", "prior_peb_m"];

pub const RMSE_HEADER: [&str; 10] = [
    "distance_m",
    "profile",
    "sigma_m",
    "trials",
    "rmse_m",
    "rmse_theta_rad",
    "rmse_phi_rad",
    "rmse_d_m",
    "outlier_rate",
    "stderr_m",
];

pub const SNR_HEADER: [&str; 5] = ["x_m", "y_m", "z_m", "profile", "snr_db"];

pub fn sci(x: f64) -> String {
    format!("{x:e}")
}

pub fn write_peb<W: Write>(out: W, rows: &[PebPoint]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PEB_HEADER)?;
    for r in rows {
        w.write_record([sci(r.distance), r.profile.name().into(), sci(r.sigma), sci(r.peb), sci(r.prior_peb)])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_rmse<W: Write>(out: W, rows: &[RmsePoint]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RMSE_HEADER)?;
    for r in rows {
        w.write_record([
            sci(r.distance),
            r.profile.name().into(),
            sci(r.sigma),
            r.trials.to_string(),
            sci(r.rmse),
            sci(r.rmse_theta),
            sci(r.rmse_phi),
            sci(r.rmse_d),
            sci(r.outlier_rate),
            sci(r.stderr),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_snr_map<W: Write>(out: W, rows: &[SnrSample]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SNR_HEADER)?;
    for r in rows {
        w.write_record([
            sci(r.position.x),
            sci(r.position.y),
            sci(r.position.z),
            r.profile.name().into(),
            sci(r.snr_db),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Dumps a weight matrix as M rows of `re, im` pairs per pilot, no header.
pub fn write_weights<W: Write>(out: W, weights: &CMatrix) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for row in weights.row_iter() {
        w.write_record(row.iter().flat_map(|z| [sci(z.re), sci(z.im)]))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rislens_core::profiles::ProfileKind;

    #[test]
    fn scientific_round_trip() {
        for x in [0.0972, 1.0 / 3.0, 2.5951, 1e-300, 0.0] {
            assert_eq!(sci(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(sci(0.0972), "9.72e-2");
        assert_eq!(sci(f64::INFINITY), "inf");
    }

    #[test]
    fn peb_layout() {
        let rows = [PebPoint {
            distance: 5.0,
            profile: ProfileKind::Random,
            sigma: 0.1,
            peb: 0.25,
            prior_peb: 0.17320508075688773,
            realizations: 10,
            stderr: 0.0,
        }];
        let mut buf = Vec::new();
        write_peb(&mut buf, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "distance_m,profile,sigma_m,peb_m,prior_peb_m\n5e0,random,1e-1,2.5e-1,1.7320508075688773e-1\n"
        );
    }

    #[test]
    fn weights_interleave_real_and_imaginary() {
        use rislens_core::C64;
        let w = CMatrix::from_row_slice(2, 2, &[C64::new(1.0, -0.5), C64::new(0.0, 2.0), C64::new(-3.0, 0.25), C64::new(1e-20, 0.0)]);
        let mut buf = Vec::new();
        write_weights(&mut buf, &w).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1e0,-5e-1,0e0,2e0\n-3e0,2.5e-1,1e-20,0e0\n");
    }
}
