//! Y-factor forward model and inversion of a measured light-induced ΔY to the
//! internal cavity noise temperature `T_m`.
//!
//! The dark state anchors the cavity at the ambient temperature; the light
//! state replaces it with the unknown `T_m`, its own reflection and the
//! measured LNA gain change. ΔY is strictly decreasing in `T_m`, so the
//! inversion is a bracketed bisection.

mod forward;
mod mc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cavity::gamma_from_s11;
use crate::config::{draw_truncated, Bound};
use crate::units::{require_non_negative, require_positive};
use crate::{Error, Result};

pub use forward::{delta_noise_sa, delta_y, fit_tm, fit_tm_with, forward_y, FitOptions, TmFit};
pub use mc::{lna_mismatch_tm_bound, monte_carlo_ci, FitResult, MismatchBound};

/// Residual allowed on ΔY after inversion.
pub const DELTA_Y_TOL_DB: f64 = 1e-4;

/// How a measured S11 in dB is turned into the reflection `γ` that weights
/// the incident noise by `γ²` at the cavity port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReflectionReading {
    /// `γ = 10^(S11/20)`.
    #[default]
    Voltage,
    /// `γ = 10^(S11/10)`.
    Power,
}

impl ReflectionReading {
    pub fn gamma(&self, s11_db: f64) -> Result<f64> {
        let g = gamma_from_s11(s11_db)?;
        Ok(match self {
            ReflectionReading::Voltage => g,
            ReflectionReading::Power => g * g,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RecordSigma {
    pub ambient_temp_k: f64,
    pub delta_noise_sa_db: f64,
    pub delta_lna_gain_db: f64,
    pub delta_y_db: f64,
    pub s11_dark_db: f64,
    pub s11_light_db: f64,
    pub heating_offset_k: f64,
}

/// One light-on/light-off measurement at a fixed ambient temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub label: String,
    pub ambient_temp_k: f64,
    /// Coupling loss of the cavity coupler for this record; the chain's own
    /// value when absent.
    pub coupler_db: Option<f64>,
    /// Measured change of the source-OFF noise at the analyzer; diagnostic only.
    pub delta_noise_sa_db: Option<f64>,
    pub delta_lna_gain_db: f64,
    pub delta_y_db: f64,
    pub s11_dark_db: f64,
    pub s11_light_db: f64,
    /// Extra physical temperature of the cold stage while the light is on.
    pub heating_offset_k: f64,
    pub published_t_m_k: Option<f64>,
    pub published_sigma_k: Option<f64>,
    pub sigma: RecordSigma,
}

impl MeasurementRecord {
    /// A record with all uncertainties zero.
    pub fn new(
        label: impl Into<String>,
        ambient_temp_k: f64,
        delta_y_db: f64,
        s11_dark_db: f64,
        s11_light_db: f64,
    ) -> Self {
        Self {
            label: label.into(),
            ambient_temp_k,
            coupler_db: None,
            delta_noise_sa_db: None,
            delta_lna_gain_db: 0.0,
            delta_y_db,
            s11_dark_db,
            s11_light_db,
            heating_offset_k: 0.0,
            published_t_m_k: None,
            published_sigma_k: None,
            sigma: RecordSigma::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("ambient_temp_k", self.ambient_temp_k)?;
        require_non_negative("heating_offset_k", self.heating_offset_k)?;
        gamma_from_s11(self.s11_dark_db)?;
        gamma_from_s11(self.s11_light_db)?;
        if let Some(c) = self.coupler_db {
            require_non_negative("coupler_db", c)?;
        }
        for (name, v) in [
            ("delta_lna_gain_db", self.delta_lna_gain_db),
            ("delta_y_db", self.delta_y_db),
        ] {
            crate::units::require_finite(name, v)?;
        }
        let s = &self.sigma;
        for (name, v) in [
            ("sigma.ambient_temp_k", s.ambient_temp_k),
            ("sigma.delta_noise_sa_db", s.delta_noise_sa_db),
            ("sigma.delta_lna_gain_db", s.delta_lna_gain_db),
            ("sigma.delta_y_db", s.delta_y_db),
            ("sigma.s11_dark_db", s.s11_dark_db),
            ("sigma.s11_light_db", s.s11_light_db),
            ("sigma.heating_offset_k", s.heating_offset_k),
        ] {
            require_non_negative(name, v)?;
        }
        Ok(())
    }

    /// Same record with every field redrawn from its sigma.
    pub fn redrawn<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let s = &self.sigma;
        let mut out = self.clone();
        out.ambient_temp_k =
            draw_truncated(rng, self.ambient_temp_k, s.ambient_temp_k, Bound::Positive);
        out.delta_lna_gain_db = draw_truncated(
            rng,
            self.delta_lna_gain_db,
            s.delta_lna_gain_db,
            Bound::Free,
        );
        out.delta_y_db = draw_truncated(rng, self.delta_y_db, s.delta_y_db, Bound::Free);
        out.s11_dark_db = draw_truncated(rng, self.s11_dark_db, s.s11_dark_db, Bound::NonPositive);
        out.s11_light_db =
            draw_truncated(rng, self.s11_light_db, s.s11_light_db, Bound::NonPositive);
        out.heating_offset_k = draw_truncated(
            rng,
            self.heating_offset_k,
            s.heating_offset_k,
            Bound::NonNegative,
        );
        out
    }

    pub fn has_uncertainty(&self) -> bool {
        let s = &self.sigma;
        [
            s.ambient_temp_k,
            s.delta_lna_gain_db,
            s.delta_y_db,
            s.s11_dark_db,
            s.s11_light_db,
            s.heating_offset_k,
        ]
        .iter()
        .any(|&v| v > 0.0)
    }
}

pub fn validate_noise_table(table: &[(f64, f64)]) -> Result<()> {
    if table.is_empty() {
        return Err(Error::domain("noise table is empty"));
    }
    for w in table.windows(2) {
        if w[1].0.partial_cmp(&w[0].0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::domain(
                "noise table must be sorted by strictly increasing |Γ|",
            ));
        }
    }
    for &(g, t) in table {
        if !(0.0..=1.0).contains(&g) {
            return Err(Error::domain(format!(
                "|Γ| = {g} in noise table is outside [0, 1]"
            )));
        }
        require_non_negative("table noise temperature", t)?;
    }
    Ok(())
}

/// Interpolated LNA noise temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableNoise {
    pub noise_temp_k: f64,
    /// `|Γ|` fell outside the table and was clamped to its nearest end.
    pub clamped: bool,
}

/// Linear interpolation of an LNA noise-versus-|Γ| curve.
pub fn lna_mismatch_bound(gamma_in: f64, noise_table: &[(f64, f64)]) -> Result<TableNoise> {
    if !(0.0..=1.0).contains(&gamma_in) {
        return Err(Error::domain(format!(
            "|Γ| must lie in [0, 1], got {gamma_in}"
        )));
    }
    validate_noise_table(noise_table)?;
    let (first, last) = (noise_table[0], noise_table[noise_table.len() - 1]);
    if gamma_in < first.0 || gamma_in > last.0 {
        let nearest = if gamma_in < first.0 { first } else { last };
        return Ok(TableNoise {
            noise_temp_k: nearest.1,
            clamped: true,
        });
    }
    let i = noise_table.partition_point(|&(g, _)| g < gamma_in);
    if noise_table[i].0 == gamma_in {
        return Ok(TableNoise {
            noise_temp_k: noise_table[i].1,
            clamped: false,
        });
    }
    let (g0, t0) = noise_table[i - 1];
    let (g1, t1) = noise_table[i];
    Ok(TableNoise {
        noise_temp_k: t0 + (t1 - t0) * (gamma_in - g0) / (g1 - g0),
        clamped: false,
    })
}
