//! Reflection, coupling coefficient and port noise of a single-mode cavity.
//!
//! Rates are ordinary-frequency linewidths in Hz, with `κ_int = f0 / Q_unloaded`.

use serde::{Deserialize, Serialize};

use crate::units::{require_non_negative, require_positive};
use crate::{Error, Result};

/// S11 reported for an exactly critically coupled port.
pub const S11_FLOOR_DB: f64 = -100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingRegime {
    Undercoupled,
    Overcoupled,
}

/// Voltage reflection magnitude `10^(s11_db/20)` at resonance.
pub fn gamma_from_s11(s11_db: f64) -> Result<f64> {
    if s11_db.is_nan() || s11_db > 0.0 {
        return Err(Error::domain(format!(
            "passive reflection requires s11_db <= 0, got {s11_db}"
        )));
    }
    Ok(10f64.powf(s11_db / 20.0))
}

pub fn s11_from_gamma(gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(20.0 * gamma.log10())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::domain(format!(
            "reflection magnitude must lie in [0, 1], got {gamma}"
        )));
    }
    Ok(())
}

/// `β = κ_ext/κ_int` from the reflection magnitude.
pub fn coupling_coefficient(gamma: f64, regime: CouplingRegime) -> Result<f64> {
    check_gamma(gamma)?;
    match regime {
        CouplingRegime::Undercoupled => Ok((1.0 - gamma) / (1.0 + gamma)),
        CouplingRegime::Overcoupled => {
            if gamma >= 1.0 {
                Err(Error::domain("overcoupled β is singular at gamma = 1"))
            } else {
                Ok((1.0 + gamma) / (1.0 - gamma))
            }
        }
    }
}

pub fn kappa_ext_from_coupling(
    gamma: f64,
    regime: CouplingRegime,
    kappa_internal: f64,
) -> Result<f64> {
    require_positive("kappa_internal", kappa_internal)?;
    Ok(coupling_coefficient(gamma, regime)? * kappa_internal)
}

/// Noise leaving the port: `t_internal·(1−γ²) + t_incident·γ²`.
pub fn cavity_output_noise(t_internal: f64, gamma: f64, t_incident: f64) -> Result<f64> {
    check_gamma(gamma)?;
    require_non_negative("t_internal", t_internal)?;
    require_non_negative("t_incident", t_incident)?;
    let r = gamma * gamma;
    Ok(t_internal * (1.0 - r) + t_incident * r)
}

/// On-resonance S11 when a spin ensemble adds `gamma_s` of absorption to the
/// internal loss: `20·log10(|κ_ext − (κ_int + Γ_s)| / (κ_ext + κ_int + Γ_s))`,
/// floored at [`S11_FLOOR_DB`].
pub fn predict_s11_under_pumping(kappa_ext: f64, kappa_internal: f64, gamma_s: f64) -> Result<f64> {
    require_non_negative("kappa_ext", kappa_ext)?;
    require_non_negative("kappa_internal", kappa_internal)?;
    require_non_negative("gamma_s", gamma_s)?;
    let loss = kappa_internal + gamma_s;
    let total = kappa_ext + loss;
    if total <= 0.0 {
        return Err(Error::domain("all rates are zero"));
    }
    let gamma = (kappa_ext - loss).abs() / total;
    if gamma == 0.0 {
        return Ok(S11_FLOOR_DB);
    }
    Ok((20.0 * gamma.log10()).max(S11_FLOOR_DB))
}

/// Resonance and coupling description of the cavity port.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CavityPort {
    pub f0_hz: f64,
    pub q_unloaded: f64,
    pub s11_db_dark: f64,
    pub s11_db_light: f64,
    pub regime_dark: CouplingRegime,
    pub regime_light: CouplingRegime,
    pub ambient_temp_k: f64,
}

impl CavityPort {
    pub fn validate(&self) -> Result<()> {
        require_positive("f0_hz", self.f0_hz)?;
        require_positive("q_unloaded", self.q_unloaded)?;
        gamma_from_s11(self.s11_db_dark)?;
        gamma_from_s11(self.s11_db_light)?;
        require_positive("ambient_temp_k", self.ambient_temp_k)
    }

    pub fn kappa_internal(&self) -> f64 {
        self.f0_hz / self.q_unloaded
    }

    pub fn kappa_ext_dark(&self) -> Result<f64> {
        kappa_ext_from_coupling(
            gamma_from_s11(self.s11_db_dark)?,
            self.regime_dark,
            self.kappa_internal(),
        )
    }

    pub fn kappa_ext_light(&self) -> Result<f64> {
        kappa_ext_from_coupling(
            gamma_from_s11(self.s11_db_light)?,
            self.regime_light,
            self.kappa_internal(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma_from_s11(0.0).unwrap(), 1.0);
        assert!((gamma_from_s11(-7.7).unwrap() - 0.412).abs() < 1e-3);
        // 10^(-3.8/20)
        assert!((gamma_from_s11(-3.8).unwrap() - 0.645_654).abs() < 1e-6);
        assert!(gamma_from_s11(0.1).is_err());
    }

    #[test]
    fn kappa_ext_examples() {
        for regime in [CouplingRegime::Undercoupled, CouplingRegime::Overcoupled] {
            assert!((kappa_ext_from_coupling(0.0, regime, 3.4e7).unwrap() - 3.4e7).abs() < 1e-6);
        }
        let k = kappa_ext_from_coupling(0.6457, CouplingRegime::Undercoupled, 3.43e7).unwrap();
        assert!((k - 7.4e6).abs() < 0.05e6, "{k}");
        assert!(
            kappa_ext_from_coupling(1.0, CouplingRegime::Undercoupled, 3.4e7)
                .unwrap()
                .abs()
                < 1e-9
        );
        assert!(kappa_ext_from_coupling(1.0, CouplingRegime::Overcoupled, 3.4e7).is_err());
    }

    #[test]
    fn cavity_noise_examples() {
        assert!((cavity_output_noise(5.0, 0.37, 5.0).unwrap() - 5.0).abs() < 1e-12);
        let t = cavity_output_noise(2.5, 0.61, 5.0).unwrap();
        assert!((t - 3.43).abs() < 0.005, "{t}");
        assert_eq!(cavity_output_noise(2.0, 1.0, 7.0).unwrap(), 7.0);
    }

    #[test]
    fn s11_under_pumping_examples() {
        assert_eq!(
            predict_s11_under_pumping(1e7, 1e7, 0.0).unwrap(),
            S11_FLOOR_DB
        );
        assert!(predict_s11_under_pumping(1e7, 1e7, 1e12).unwrap() > -1e-3);
        let k = 3.4e7;
        assert!(
            predict_s11_under_pumping(k, k, 10.0 * k).unwrap()
                > predict_s11_under_pumping(k, k, k).unwrap()
        );
        assert!(predict_s11_under_pumping(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn cavity_port_rates() {
        let port = CavityPort {
            f0_hz: 10.98e9,
            q_unloaded: 320.0,
            s11_db_dark: -11.9,
            s11_db_light: -3.8,
            regime_dark: CouplingRegime::Undercoupled,
            regime_light: CouplingRegime::Undercoupled,
            ambient_temp_k: 5.0,
        };
        port.validate().unwrap();
        assert!((port.kappa_internal() - 3.431e7).abs() < 1e4);
        assert!(port.kappa_ext_light().unwrap() < port.kappa_ext_dark().unwrap());
    }

    proptest! {
        #[test]
        fn s11_round_trip(s11 in -80.0f64..0.0) {
            let back = s11_from_gamma(gamma_from_s11(s11).unwrap()).unwrap();
            prop_assert!((back - s11).abs() <= 1e-12 * s11.abs().max(1.0));
        }

        #[test]
        fn beta_reciprocity(g in 0.0f64..0.999) {
            let b = coupling_coefficient(g, CouplingRegime::Undercoupled).unwrap()
                * coupling_coefficient(g, CouplingRegime::Overcoupled).unwrap();
            prop_assert!((b - 1.0).abs() < 1e-12);
        }

        #[test]
        fn output_noise_is_convex(ti in 0.0f64..500.0, g in 0.0f64..=1.0, tinc in 0.0f64..500.0) {
            let out = cavity_output_noise(ti, g, tinc).unwrap();
            let eps = 1e-12 * ti.max(tinc).max(1.0);
            prop_assert!(out >= ti.min(tinc) - eps && out <= ti.max(tinc) + eps);
        }

        #[test]
        fn s11_rises_with_spin_loss(k in 1e6f64..1e8, ki_frac in 0.01f64..1.0, gs in 0.0f64..1e9, dg in 1e3f64..1e8) {
            let ki = k * ki_frac;
            // once internal + spin loss exceeds the external rate, more spin loss pushes S11 toward 0 dB
            prop_assume!(ki + gs > k);
            prop_assert!(predict_s11_under_pumping(k, ki, gs + dg).unwrap() >= predict_s11_under_pumping(k, ki, gs).unwrap());
        }
    }
}
