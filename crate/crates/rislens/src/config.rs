//! Flat `key=value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Every key is optional; unknown
//! or repeated keys are errors. Lists are comma-separated.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector3;
use rislens_core::estimator::{LocalizerConfig, Refinement, SearchGrids};
use rislens_core::geometry::{db_to_linear, dbm_to_watts, Scenario, SPEED_OF_LIGHT};
use rislens_core::profiles::ProfileKind;

use crate::error::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    /// Profile kinds to evaluate; `None` lets each experiment pick its
    /// default.
    pub profiles: Option<Vec<ProfileKind>>,
    /// Prior standard deviations, m.
    pub sigmas: Vec<f64>,
    pub distances: Vec<f64>,
    /// Unit direction along which the user is placed.
    pub direction: Vector3<f64>,
    pub trials: usize,
    pub profile_realizations: usize,
    pub seed: u64,
    pub quant_bits: Option<u32>,
    pub localizer: LocalizerConfig,
    /// Prior mean for the SNR map.
    pub prior_mean: Vector3<f64>,
    /// Half-width and height of the SNR-map window, m.
    pub snr_extent: f64,
    /// Samples per axis of the SNR map.
    pub snr_points: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::reference(),
            profiles: None,
            sigmas: vec![0.1],
            distances: (1..=15).map(f64::from).collect(),
            direction: Vector3::new(1.0, 1.0, 1.0).normalize(),
            trials: 200,
            profile_realizations: 10,
            seed: 0,
            quant_bits: None,
            localizer: LocalizerConfig::default(),
            prior_mean: Vector3::new(0.1, 0.1, 0.1),
            snr_extent: 2.0,
            snr_points: 61,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| HarnessError::Config {
                line: idx + 1,
                message: format!("expected key=value, got `{line}`"),
            })?;
            let key = key.trim().to_string();
            if entries.insert(key.clone(), (idx + 1, value.trim().to_string())).is_some() {
                return Err(HarnessError::Config {
                    line: idx + 1,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        let mut e = Entries(entries);
        let config = build(&mut e)?;
        if let Some((key, (line, _))) = e.0.into_iter().next() {
            return Err(HarnessError::Config {
                line,
                message: format!("unknown key `{key}`"),
            });
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.scenario.validate()?;
        let invalid = |m: &str| Err(HarnessError::Invalid(m.to_string()));
        if self.distances.is_empty() || self.distances.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return invalid("distances must be positive and finite");
        }
        if self.sigmas.is_empty() || self.sigmas.iter().any(|&s| !(s >= 0.0) || !s.is_finite()) {
            return invalid("prior sigmas must be nonnegative and finite");
        }
        if self.trials == 0 || self.profile_realizations == 0 {
            return invalid("trials and profile_realizations must be at least 1");
        }
        if !(self.direction.z > 0.0) {
            return invalid("direction must point in front of the surface (z > 0)");
        }
        if !(self.snr_extent > 0.0) || self.snr_points < 2 {
            return invalid("SNR map needs a positive extent and at least two points per axis");
        }
        Ok(())
    }

    pub fn profiles_or(&self, default: &[ProfileKind]) -> Vec<ProfileKind> {
        self.profiles.clone().unwrap_or_else(|| default.to_vec())
    }
}

struct Entries(BTreeMap<String, (usize, String)>);

impl Entries {
    fn take<T>(&mut self, key: &str, parse: impl FnOnce(&str) -> Result<T, String>) -> Result<Option<T>, HarnessError> {
        match self.0.remove(key) {
            None => Ok(None),
            Some((line, value)) => parse(&value).map(Some).map_err(|message| HarnessError::Config {
                line,
                message: format!("`{key}`: {message}"),
            }),
        }
    }

    fn number<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, HarnessError> {
        self.take(key, parse_number)
    }
}

fn parse_number<T: FromStr>(s: &str) -> Result<T, String> {
    s.trim().parse().map_err(|_| format!("cannot parse `{s}`"))
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, String> {
    s.split(',').map(parse_number).collect()
}

fn parse_vector(s: &str, wavelength: f64) -> Result<Vector3<f64>, String> {
    let parts = s
        .split(',')
        .map(|c| parse_length(c.trim(), wavelength))
        .collect::<Result<Vec<_>, _>>()?;
    match parts.as_slice() {
        [x, y, z] => Ok(Vector3::new(*x, *y, *z)),
        _ => Err(format!("expected three components, got {}", parts.len())),
    }
}

/// Meters, optionally in wavelengths: `0.01`, `-λ`, `0.5lambda`.
fn parse_length(s: &str, wavelength: f64) -> Result<f64, String> {
    let stripped = s.strip_suffix('λ').or_else(|| s.strip_suffix("lambda"));
    match stripped {
        None => parse_number(s),
        Some(coef) => {
            let coef = coef.trim();
            let factor = match coef {
                "" | "+" => 1.0,
                "-" => -1.0,
                c => parse_number::<f64>(c.trim_end_matches('*'))?,
            };
            Ok(factor * wavelength)
        }
    }
}

fn parse_profiles(s: &str) -> Result<Vec<ProfileKind>, String> {
    s.split(',')
        .map(|p| p.trim().parse().map_err(|_| format!("unknown profile `{}`", p.trim())))
        .collect()
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("expected a boolean, got `{s}`")),
    }
}

fn build(e: &mut Entries) -> Result<RunConfig, HarnessError> {
    let mut c = RunConfig::default();
    let s = &mut c.scenario;

    if let Some(f) = e.number::<f64>("carrier_hz")? {
        s.wavelength = SPEED_OF_LIGHT / f;
    }
    let lambda = s.wavelength;
    s.ris_rows = e.number("ris_rows")?.unwrap_or(s.ris_rows);
    s.ris_cols = e.number("ris_cols")?.unwrap_or(s.ris_cols);
    s.element_spacing = e.number::<f64>("spacing_wavelengths")?.unwrap_or(0.5) * lambda;
    s.element_side = e
        .take("element_area", |v| match v {
            "quarter_wavelength_sq" => Ok(lambda / 2.0),
            v => parse_number::<f64>(v).map(f64::sqrt),
        })?
        .unwrap_or(lambda / 2.0);
    s.antenna_position = e
        .take("antenna_pos_m", |v| parse_vector(v, lambda))?
        .unwrap_or(Vector3::new(0.0, 0.0, -lambda));
    s.tx_power = e.number("tx_power_w")?.unwrap_or(s.tx_power);
    if let Some(psd) = e.number::<f64>("noise_psd_dbm_hz")? {
        s.noise_psd = dbm_to_watts(psd);
    }
    if let Some(nf) = e.number::<f64>("noise_figure_db")? {
        s.noise_figure = db_to_linear(nf);
    }
    s.bandwidth = e.number("bandwidth_hz")?.unwrap_or(s.bandwidth);
    s.num_pilots = e.number("num_pilots")?.unwrap_or(s.num_pilots);
    s.derive_symbol_budget();

    c.profiles = e.take("profile", parse_profiles)?;
    c.sigmas = e.take("prior_sigma_m", parse_list)?.unwrap_or(c.sigmas);
    c.distances = e.take("distances_m", parse_list)?.unwrap_or(c.distances);
    if let Some(dir) = e.take("direction", |v| parse_vector(v, lambda))? {
        let n = dir.norm();
        if !(n > 0.0) {
            return Err(HarnessError::Invalid("direction must be nonzero".into()));
        }
        c.direction = dir / n;
    }
    c.trials = e.number("trials")?.unwrap_or(c.trials);
    c.profile_realizations = e.number("profile_realizations")?.unwrap_or(c.profile_realizations);
    c.seed = e.number("seed")?.unwrap_or(c.seed);
    c.quant_bits = match e.number::<u32>("quant_bits")? {
        None | Some(0) => None,
        Some(b) => Some(b),
    };
    c.prior_mean = e.take("prior_mean_m", |v| parse_vector(v, lambda))?.unwrap_or(c.prior_mean);
    c.snr_extent = e.number("snr_extent_m")?.unwrap_or(c.snr_extent);
    c.snr_points = e.number("snr_points")?.unwrap_or(c.snr_points);

    let theta_bins = e.number("grid_theta_bins")?.unwrap_or(90);
    let phi_bins = e.number("grid_phi_bins")?.unwrap_or(360);
    let d_bins = e.number("grid_d_bins")?.unwrap_or(500);
    let d_min = e.number("d_min_m")?.unwrap_or(0.05);
    let d_max = e.number("d_max_m")?.unwrap_or(20.0);
    c.localizer.grids = SearchGrids::new(theta_bins, phi_bins, d_bins, d_min, d_max)?;
    c.localizer.order = e.number("bessel_n")?.unwrap_or(c.localizer.order);
    if e.take("refine", parse_bool)?.unwrap_or(false) {
        c.localizer.refinement = Some(Refinement { points: 9, levels: 2 });
    }
    Ok(c)
}
