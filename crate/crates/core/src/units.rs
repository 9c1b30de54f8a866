//! Physical constants and decibel conversions.

/// Boltzmann constant, J/K (SI exact).
pub const BOLTZMANN: f64 = 1.380649e-23;

/// Planck constant, J·s (SI exact).
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Linear power transmission of a loss given in non-negative dB.
#[inline]
pub fn transmission_from_loss_db(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

/// Linear power ratio for a gain in dB.
#[inline]
pub fn gain_linear(gain_db: f64) -> f64 {
    10f64.powf(gain_db / 10.0)
}

#[inline]
pub fn power_ratio_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// `h·f / k_B` in kelvin: the temperature scale of one photon at `freq_hz`.
#[inline]
pub fn photon_temperature(freq_hz: f64) -> f64 {
    PLANCK * freq_hz / BOLTZMANN
}

pub(crate) fn require_finite(name: &str, value: f64) -> crate::Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(crate::Error::domain(format!(
            "{name} must be finite, got {value}"
        )))
    }
}

pub(crate) fn require_non_negative(name: &str, value: f64) -> crate::Result<()> {
    require_finite(name, value)?;
    if value < 0.0 {
        return Err(crate::Error::domain(format!(
            "{name} must be non-negative, got {value}"
        )));
    }
    Ok(())
}

pub(crate) fn require_positive(name: &str, value: f64) -> crate::Result<()> {
    require_finite(name, value)?;
    if value <= 0.0 {
        return Err(crate::Error::domain(format!(
            "{name} must be positive, got {value}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_power_loss() {
        assert!((transmission_from_loss_db(10.0 * 2f64.log10()) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn photon_temperature_at_cavity_frequency() {
        // h·10.98 GHz / k_B
        assert!((photon_temperature(10.98e9) - 0.526_96).abs() < 1e-4);
    }
}
