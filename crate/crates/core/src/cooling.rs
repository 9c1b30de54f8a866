//! Steady-state temperature of a cavity mode coupled to three baths: its
//! internal loss, the external port and a polarized spin ensemble.
//!
//! `T_mode = (κ_int·T_amb + κ_ext·T_ext + Γ_s·T_spin) / (κ_int + κ_ext + Γ_s)`,
//! applied to temperatures (Rayleigh-Jeans) or to occupancies (Planck).

use serde::{Deserialize, Serialize};

use crate::solve::bisect;
use crate::spins::{occupancy, temperature_from_occupancy, Convention};
use crate::units::{require_non_negative, require_positive};
use crate::{Error, Result};

const CALIBRATION_REL_TOL: f64 = 1e-12;
const MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoolingScenario {
    pub kappa_internal: f64,
    pub kappa_external: f64,
    pub gamma_spins: f64,
    pub t_ambient: f64,
    pub t_external: f64,
    pub t_spin: f64,
    pub frequency: f64,
    #[serde(default)]
    pub convention: Convention,
}

impl CoolingScenario {
    pub fn validate(&self) -> Result<()> {
        require_positive("kappa_internal", self.kappa_internal)?;
        require_non_negative("kappa_external", self.kappa_external)?;
        if self.gamma_spins.is_nan() || self.gamma_spins < 0.0 {
            return Err(Error::domain(format!(
                "gamma_spins = {} is negative: the ensemble amplifies (maser regime), which this model does not cover",
                self.gamma_spins
            )));
        }
        if self.t_spin.is_nan() || self.t_spin < 0.0 {
            return Err(Error::domain(format!(
                "t_spin = {} is negative: an inverted ensemble is a maser, which this model does not cover",
                self.t_spin
            )));
        }
        require_non_negative("t_ambient", self.t_ambient)?;
        require_non_negative("t_external", self.t_external)?;
        require_positive("frequency", self.frequency)?;
        let denom = self.kappa_internal + self.kappa_external + self.gamma_spins;
        if !(denom > 0.0 && denom.is_finite()) {
            return Err(Error::domain(format!(
                "total damping rate {denom} is not positive"
            )));
        }
        Ok(())
    }

    pub fn with_gamma_spins(mut self, gamma_spins: f64) -> Self {
        self.gamma_spins = gamma_spins;
        self
    }

    pub fn with_q(mut self, q: f64) -> Self {
        self.kappa_internal = self.frequency / q;
        self
    }

    /// Mode temperature with no spin ensemble.
    pub fn uncooled_temperature(&self) -> Result<f64> {
        steady_mode_temperature(&self.with_gamma_spins(0.0))
    }
}

pub fn steady_mode_temperature(s: &CoolingScenario) -> Result<f64> {
    s.validate()?;
    let weights = [s.kappa_internal, s.kappa_external, s.gamma_spins];
    let temps = [s.t_ambient, s.t_external, s.t_spin];
    let total: f64 = weights.iter().sum();
    match s.convention {
        Convention::RayleighJeans => {
            Ok(weights.iter().zip(temps).map(|(w, t)| w * t).sum::<f64>() / total)
        }
        Convention::Planck => {
            let mut n = 0.0;
            for (w, t) in weights.iter().zip(temps) {
                n += w * occupancy(t, s.frequency, Convention::Planck)?;
            }
            temperature_from_occupancy(n / total, s.frequency, Convention::Planck)
        }
    }
}

/// Mean photon number of the mode in the scenario's convention.
pub fn steady_mode_occupancy(s: &CoolingScenario) -> Result<f64> {
    occupancy(steady_mode_temperature(s)?, s.frequency, s.convention)
}

/// `Γ_s ≥ 0` that brings the mode to `target`.
///
/// The achievable range runs from the uncooled temperature (Γ_s = 0) towards
/// `t_spin` (Γ_s → ∞, never reached).
pub fn calibrate_gamma_spins(target: f64, scenario: &CoolingScenario) -> Result<f64> {
    require_non_negative("target", target)?;
    let base = scenario.with_gamma_spins(0.0);
    let t0 = steady_mode_temperature(&base)?;
    let ts = base.t_spin;
    if target == t0 {
        return Ok(0.0);
    }
    let inside = if ts < t0 {
        target > ts && target < t0
    } else {
        target > t0 && target < ts
    };
    if !inside {
        let (lo, hi) = if ts < t0 { (ts, t0) } else { (t0, ts) };
        return Err(Error::Infeasible(format!(
            "target mode temperature {target} K is not reachable; feasible interval is ({lo}, {hi}] K"
        )));
    }

    let residual = |g: f64| {
        steady_mode_temperature(&base.with_gamma_spins(g)).map_or(f64::NAN, |t| t - target)
    };
    let mut hi = base.kappa_internal + base.kappa_external;
    while residual(hi).signum() == residual(0.0).signum() {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Solver(
                "could not bracket the spin absorption rate".into(),
            ));
        }
    }
    let root = bisect(residual, 0.0, hi, CALIBRATION_REL_TOL * hi, MAX_ITER)?;
    Ok(root.x)
}

/// External-port temperature that reproduces an observed mode temperature,
/// all other rates held fixed. Requires `kappa_external > 0`.
pub fn fit_external_temp(target: f64, scenario: &CoolingScenario) -> Result<f64> {
    require_non_negative("target", target)?;
    require_positive("kappa_external", scenario.kappa_external)?;
    let at = |t_ext: f64| {
        let mut s = *scenario;
        s.t_external = t_ext;
        steady_mode_temperature(&s).map_or(f64::NAN, |t| t - target)
    };
    if at(0.0) > 0.0 {
        return Err(Error::Infeasible(format!(
            "target {target} K is below the mode temperature with a 0 K port"
        )));
    }
    let mut hi = target.max(1.0);
    while at(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::Solver(
                "could not bracket the external temperature".into(),
            ));
        }
    }
    Ok(bisect(at, 0.0, hi, CALIBRATION_REL_TOL * hi, MAX_ITER)?.x)
}

/// `(with coupling, without coupling)` per scenario; "without" zeroes `κ_ext`.
pub fn table1_calculated_column(scenarios: &[CoolingScenario]) -> Result<Vec<(f64, f64)>> {
    scenarios
        .iter()
        .map(|s| {
            let mut isolated = *s;
            isolated.kappa_external = 0.0;
            Ok((
                steady_mode_temperature(s)?,
                steady_mode_temperature(&isolated)?,
            ))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub q: f64,
    pub kappa_int_hz: f64,
    pub t_mode_k: f64,
    pub n_planck: f64,
    pub n_rj: f64,
}

/// Mode temperature versus unloaded Q at fixed `Γ_s`.
pub fn q_sweep(base: &CoolingScenario, q_values: &[f64]) -> Result<Vec<SweepPoint>> {
    q_values
        .iter()
        .map(|&q| {
            require_positive("q", q)?;
            let s = base.with_q(q);
            let t = steady_mode_temperature(&s)?;
            Ok(SweepPoint {
                q,
                kappa_int_hz: s.kappa_internal,
                t_mode_k: t,
                n_planck: occupancy(t, s.frequency, Convention::Planck)?,
                n_rj: occupancy(t, s.frequency, Convention::RayleighJeans)?,
            })
        })
        .collect()
}
