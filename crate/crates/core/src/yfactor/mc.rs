use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forward::{prepare_spec, FitOptions, Setup};
use super::{lna_mismatch_bound, MeasurementRecord};
use crate::cavity::gamma_from_s11;
use crate::config::ChainSpec;
use crate::{Error, Result};

pub const MIN_SAMPLES: usize = 100;
/// Share of failed draws above which a warning is attached.
const INFEASIBLE_WARN_FRACTION: f64 = 0.1;

/// `T_m` with its 68% Monte-Carlo interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub label: String,
    /// Median over feasible draws.
    pub t_m: f64,
    /// Fit at the nominal inputs.
    pub t_m_nominal: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_samples: usize,
    pub n_infeasible: usize,
    pub seed: u64,
    /// ΔY residual of the nominal fit, dB.
    pub residual: f64,
    /// Predicted change of the source-OFF analyzer noise at the nominal fit, dB.
    pub delta_noise_sa_db: f64,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }
}

/// Linear-interpolated percentile of sorted data, `q` in [0, 100].
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 >= sorted.len() {
        sorted[sorted.len() - 1]
    } else {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    }
}

/// Redraws every uncertain chain and record parameter `n_samples` times,
/// refits each draw and summarises the spread.
///
/// Draw `i` uses its own ChaCha8 stream `i` under `seed`, so results do not
/// depend on evaluation order.
pub fn monte_carlo_ci(
    spec: &ChainSpec,
    record: &MeasurementRecord,
    opts: &FitOptions,
    n_samples: usize,
    seed: u64,
) -> Result<FitResult> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::domain(format!(
            "at least {MIN_SAMPLES} Monte-Carlo samples are required, got {n_samples}"
        )));
    }
    record.validate()?;
    let prepared = prepare_spec(spec, record, opts)?;
    let nominal = Setup::new(&prepared, record, opts)?.solve()?;

    let mut values = Vec::with_capacity(n_samples);
    let mut n_infeasible = 0;
    for i in 0..n_samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut drawn = prepared.clone();
        drawn.redraw(&mut rng, record.ambient_temp_k);
        let rec = record.redrawn(&mut rng);
        match Setup::new(&drawn, &rec, opts).and_then(|s| s.solve()) {
            Ok(fit) => values.push(fit.t_m),
            Err(_) => n_infeasible += 1,
        }
    }
    if values.is_empty() {
        return Err(Error::Infeasible(format!(
            "all {n_samples} Monte-Carlo draws for '{}' were infeasible",
            record.label
        )));
    }
    values.sort_by(f64::total_cmp);

    let mut warnings = Vec::new();
    if n_infeasible as f64 > INFEASIBLE_WARN_FRACTION * n_samples as f64 {
        warnings.push(format!(
            "{n_infeasible} of {n_samples} draws were infeasible; the interval describes the feasible draws only"
        ));
    }
    Ok(FitResult {
        label: record.label.clone(),
        t_m: percentile(&values, 50.0),
        t_m_nominal: nominal.t_m,
        ci_low: percentile(&values, 16.0),
        ci_high: percentile(&values, 84.0),
        n_samples,
        n_infeasible,
        seed,
        residual: nominal.residual_db,
        delta_noise_sa_db: nominal.delta_noise_sa_db,
        warnings,
    })
}

/// Worst-case `T_m` if the LNA noise degraded with the light-state input
/// reflection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MismatchBound {
    /// Voltage reflection `10^(S11_light/20)` looked up in the table.
    pub gamma_light: f64,
    pub extra_noise_k: f64,
    pub t_m_bound: f64,
    /// No non-negative `T_m` explains ΔY with the degraded LNA; bound set to 0 K.
    pub floored: bool,
    /// `|Γ|` lay outside the table.
    pub table_clamped: bool,
}

/// Refits with the light-state LNA noise raised by
/// `table(|Γ_light|) − table(0)`.
pub fn lna_mismatch_tm_bound(
    spec: &ChainSpec,
    record: &MeasurementRecord,
    opts: &FitOptions,
    noise_table: &[(f64, f64)],
) -> Result<MismatchBound> {
    record.validate()?;
    let gamma_light = gamma_from_s11(record.s11_light_db)?;
    let degraded = lna_mismatch_bound(gamma_light, noise_table)?;
    let optimum = lna_mismatch_bound(0.0, noise_table)?;
    let extra_noise_k = (degraded.noise_temp_k - optimum.noise_temp_k).max(0.0);
    let opts = FitOptions {
        extra_light_noise_k: opts.extra_light_noise_k + extra_noise_k,
        ..*opts
    };
    let setup = Setup::new(&prepare_spec(spec, record, &opts)?, record, &opts)?;
    let (t_m_bound, floored) = match setup.solve() {
        Ok(fit) => (fit.t_m, false),
        Err(Error::Infeasible(_)) if setup.delta_y(0.0) < record.delta_y_db => (0.0, true),
        Err(e) => return Err(e),
    };
    Ok(MismatchBound {
        gamma_light,
        extra_noise_k,
        t_m_bound,
        floored,
        table_clamped: degraded.clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&v, 50.0), 3.0);
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 100.0), 5.0);
        assert!((percentile(&v, 16.0) - 1.64).abs() < 1e-12);
        assert_eq!(percentile(&[2.0], 84.0), 2.0);
    }
}
