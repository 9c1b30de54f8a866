use serde::{Deserialize, Serialize};

use super::{MeasurementRecord, ReflectionReading, DELTA_Y_TOL_DB};
use crate::config::ChainSpec;
use crate::noise_chain::{Chain, LinearChain, Overrides};
use crate::solve::bisect;
use crate::units::power_ratio_db;
use crate::{Error, Result};

/// Bisection stops once the `T_m` bracket is narrower than this.
const T_M_TOL_K: f64 = 1e-9;
const MAX_ITER: usize = 200;
/// Points at which ΔY monotonicity is checked before every inversion.
const MONOTONE_GRID: usize = 17;

/// Y-factor in dB for a chain whose cavity emits at `t_m` with reflection `gamma`.
pub fn forward_y(chain: &Chain, t_m: f64, gamma: f64) -> Result<f64> {
    chain.cavity_stage()?;
    crate::cavity::cavity_output_noise(t_m, gamma, 0.0)?;
    let linear = chain.linearize()?;
    let ov = Overrides {
        cavity_t_internal: Some(t_m),
        cavity_gamma: Some(gamma),
        ..Overrides::default()
    };
    Ok(y_factor(
        &linear,
        chain.source_temp_off_k,
        chain.source_temp_on_k,
        &ov,
    ))
}

fn y_factor(chain: &LinearChain, off: f64, on: f64, ov: &Overrides) -> f64 {
    power_ratio_db(chain.output(on, ov) / chain.output(off, ov))
}

/// Knobs that select among alternative readings of the same record.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FitOptions {
    pub reading: ReflectionReading,
    /// Added to the cavity coupler's coupling loss.
    pub coupling_offset_db: f64,
    /// Added to the LNA noise in the light state only.
    pub extra_light_noise_k: f64,
}

impl FitOptions {
    pub fn with_reading(reading: ReflectionReading) -> Self {
        Self {
            reading,
            ..Self::default()
        }
    }
}

/// Result of inverting one record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TmFit {
    pub t_m: f64,
    /// `ΔY(t_m) − ΔY_measured` in dB.
    pub residual_db: f64,
    pub iterations: usize,
    /// Predicted change of the source-OFF noise at the analyzer.
    pub delta_noise_sa_db: f64,
    pub gamma_dark: f64,
    pub gamma_light: f64,
}

/// Applies the record's coupler value and the option offset to a copy of `spec`.
pub(crate) fn prepare_spec(
    spec: &ChainSpec,
    record: &MeasurementRecord,
    opts: &FitOptions,
) -> Result<ChainSpec> {
    let mut spec = spec.clone();
    let coupling = spec.cavity_coupling_mut()?;
    if let Some(c) = record.coupler_db {
        coupling.nominal = crate::config::Nominal::Fixed(c);
    }
    if opts.coupling_offset_db != 0.0 {
        let base = coupling.nominal.resolve(record.ambient_temp_k);
        coupling.nominal = crate::config::Nominal::Fixed(base + opts.coupling_offset_db);
    }
    Ok(spec)
}

/// Dark and light chains for one record, ready for repeated evaluation.
pub(crate) struct Setup {
    dark: LinearChain,
    light: LinearChain,
    dark_off: f64,
    light_off: f64,
    light_on: f64,
    dark_ov: Overrides,
    light_ov: Overrides,
    t_max: f64,
    y_dark: f64,
    target_db: f64,
}

impl Setup {
    /// `spec` must already have passed through [`prepare_spec`].
    pub(crate) fn new(
        spec: &ChainSpec,
        record: &MeasurementRecord,
        opts: &FitOptions,
    ) -> Result<Self> {
        let t_dark = record.ambient_temp_k;
        let t_max = t_dark + record.heating_offset_k;
        let dark_chain = spec.resolve(t_dark)?;
        dark_chain.cavity_stage()?;
        let light_chain = spec.resolve(t_max)?;
        let dark = dark_chain.linearize()?;
        let light = light_chain.linearize()?;
        let dark_ov = Overrides {
            cavity_t_internal: Some(t_dark),
            cavity_gamma: Some(opts.reading.gamma(record.s11_dark_db)?),
            ..Overrides::default()
        };
        let light_ov = Overrides {
            cavity_t_internal: None,
            cavity_gamma: Some(opts.reading.gamma(record.s11_light_db)?),
            gain_offset_db: record.delta_lna_gain_db,
            extra_noise_k: opts.extra_light_noise_k,
        };
        let y_dark = y_factor(
            &dark,
            dark_chain.source_temp_off_k,
            dark_chain.source_temp_on_k,
            &dark_ov,
        );
        Ok(Self {
            dark,
            light,
            dark_off: dark_chain.source_temp_off_k,
            light_off: light_chain.source_temp_off_k,
            light_on: light_chain.source_temp_on_k,
            dark_ov,
            light_ov,
            t_max,
            y_dark,
            target_db: record.delta_y_db,
        })
    }

    fn light_overrides(&self, t_m: f64) -> Overrides {
        Overrides {
            cavity_t_internal: Some(t_m),
            ..self.light_ov
        }
    }

    pub(crate) fn delta_y(&self, t_m: f64) -> f64 {
        y_factor(
            &self.light,
            self.light_off,
            self.light_on,
            &self.light_overrides(t_m),
        ) - self.y_dark
    }

    pub(crate) fn delta_noise_sa(&self, t_m: f64) -> f64 {
        let light = self
            .light
            .output(self.light_off, &self.light_overrides(t_m));
        power_ratio_db(light / self.dark.output(self.dark_off, &self.dark_ov))
    }

    /// ΔY sampled on an even grid over `[0, t_max]`, checked strictly decreasing.
    pub(crate) fn check_monotone(&self) -> Result<(f64, f64)> {
        let grid: Vec<f64> = (0..MONOTONE_GRID)
            .map(|i| self.delta_y(self.t_max * i as f64 / (MONOTONE_GRID - 1) as f64))
            .collect();
        if let Some(i) = grid
            .windows(2)
            .position(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Less))
        {
            return Err(Error::Solver(format!(
                "ΔY is not strictly decreasing in T_m near grid point {i} of [0, {}] K",
                self.t_max
            )));
        }
        Ok((grid[0], grid[MONOTONE_GRID - 1]))
    }

    pub(crate) fn solve(&self) -> Result<TmFit> {
        let (dy_cold, dy_hot) = self.check_monotone()?;
        if self.target_db > dy_cold || self.target_db < dy_hot {
            return Err(Error::Infeasible(format!(
                "measured ΔY = {} dB lies outside the model range [{dy_hot:.4}, {dy_cold:.4}] dB for T_m in [0, {}] K",
                self.target_db, self.t_max
            )));
        }
        let root = bisect(
            |t| self.delta_y(t) - self.target_db,
            0.0,
            self.t_max,
            T_M_TOL_K,
            MAX_ITER,
        )?;
        if root.value.is_nan() || root.value.abs() > DELTA_Y_TOL_DB {
            return Err(Error::Solver(format!(
                "ΔY residual {} dB exceeds {DELTA_Y_TOL_DB} dB at T_m = {}",
                root.value, root.x
            )));
        }
        Ok(TmFit {
            t_m: root.x,
            residual_db: root.value,
            iterations: root.iterations,
            delta_noise_sa_db: self.delta_noise_sa(root.x),
            gamma_dark: self.dark_ov.cavity_gamma.unwrap_or(f64::NAN),
            gamma_light: self.light_ov.cavity_gamma.unwrap_or(f64::NAN),
        })
    }
}

/// `Y(light, t_m_light) − Y(dark, ambient)` in dB.
pub fn delta_y(
    spec: &ChainSpec,
    record: &MeasurementRecord,
    reading: ReflectionReading,
    t_m_light: f64,
) -> Result<f64> {
    record.validate()?;
    let opts = FitOptions::with_reading(reading);
    let setup = Setup::new(&prepare_spec(spec, record, &opts)?, record, &opts)?;
    crate::units::require_non_negative("t_m_light", t_m_light)?;
    Ok(setup.delta_y(t_m_light))
}

/// Predicted change of the source-OFF analyzer noise, light minus dark, in dB.
pub fn delta_noise_sa(
    spec: &ChainSpec,
    record: &MeasurementRecord,
    reading: ReflectionReading,
    t_m_light: f64,
) -> Result<f64> {
    record.validate()?;
    let opts = FitOptions::with_reading(reading);
    let setup = Setup::new(&prepare_spec(spec, record, &opts)?, record, &opts)?;
    crate::units::require_non_negative("t_m_light", t_m_light)?;
    Ok(setup.delta_noise_sa(t_m_light))
}

/// Light-state `T_m` that reproduces the record's ΔY.
pub fn fit_tm(
    spec: &ChainSpec,
    record: &MeasurementRecord,
    reading: ReflectionReading,
) -> Result<TmFit> {
    fit_tm_with(spec, record, &FitOptions::with_reading(reading))
}

pub fn fit_tm_with(
    spec: &ChainSpec,
    record: &MeasurementRecord,
    opts: &FitOptions,
) -> Result<TmFit> {
    record.validate()?;
    Setup::new(&prepare_spec(spec, record, opts)?, record, opts)?.solve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;

    const CHAIN: &str = r#"
[chain]
frequency_hz = 10.98e9
bandwidth_hz = 9.1e5
source_temp_off_k = 294
source_temp_on_k = 11760
ambient_temp_k = 5

[[chain.stages]]
label = "conn1"
type = "uniform_lossy"
loss_db = 0.8
phys_temp_k = 294

[[chain.stages]]
label = "cable_a"
type = "gradient_cable"
loss_db = 0.5
phys_temp_in_k = 294
phys_temp_out_k = "ambient"

[[chain.stages]]
label = "coupler"
type = "directional_coupler"
coupling_loss_db = 10
through_loss_db = 0.6
phys_temp_k = "ambient"
cavity = { t_internal_k = 2.5, gamma = 0.61, t_incident_k = "ambient" }

[[chain.stages]]
label = "lna"
type = "amplifier"
gain_db = 31
noise_temp_k = 3

[[chain.stages]]
label = "cable_c"
type = "gradient_cable"
loss_db = 0.5
phys_temp_in_k = "ambient"
phys_temp_out_k = 294

[[chain.stages]]
label = "conn7"
type = "uniform_lossy"
loss_db = 3.5
phys_temp_k = 294
"#;

    fn spec() -> ChainSpec {
        Config::from_toml_str(CHAIN).unwrap().chain.unwrap()
    }

    #[test]
    fn forward_y_matches_table_ratio() {
        let chain = spec().nominal_chain().unwrap();
        let y = forward_y(&chain, 2.5, 0.61).unwrap();
        let off = chain.propagate(294.0).unwrap().last().unwrap().noise_temp;
        let on = chain.propagate(11760.0).unwrap().last().unwrap().noise_temp;
        assert!((y - power_ratio_db(on / off)).abs() < 1e-9);
        // 10·log10(4.486e5 / 17401)
        assert!((y - 14.11).abs() < 0.05, "{y}");
    }

    #[test]
    fn perfect_mirror_hides_the_cavity() {
        let chain = spec().nominal_chain().unwrap();
        let a = forward_y(&chain, 0.0, 1.0).unwrap();
        let b = forward_y(&chain, 50.0, 1.0).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn y_decreases_with_cavity_noise() {
        let chain = spec().nominal_chain().unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..50 {
            let y = forward_y(&chain, i as f64 * 0.5, 0.4).unwrap();
            assert!(y < prev);
            prev = y;
        }
    }

    #[test]
    fn nothing_changed_means_zero_delta() {
        let rec = MeasurementRecord::new("r", 5.0, 0.0, -7.0, -7.0);
        let d = delta_y(&spec(), &rec, ReflectionReading::Voltage, 5.0).unwrap();
        assert!(d.abs() < 1e-12);
        let fit = fit_tm(&spec(), &rec, ReflectionReading::Voltage).unwrap();
        assert!((fit.t_m - 5.0).abs() < 1e-6);
    }

    #[test]
    fn synthetic_round_trip() {
        let mut rec = MeasurementRecord::new("r", 5.0, 0.0, -11.9, -3.8);
        rec.delta_lna_gain_db = -0.31;
        rec.delta_y_db = delta_y(&spec(), &rec, ReflectionReading::Power, 1.7).unwrap();
        let fit = fit_tm(&spec(), &rec, ReflectionReading::Power).unwrap();
        assert!((fit.t_m - 1.7).abs() < 1e-3);
        assert!(fit.residual_db.abs() <= DELTA_Y_TOL_DB);
    }

    #[test]
    fn unreachable_delta_y_is_infeasible() {
        let rec = MeasurementRecord::new("r", 5.0, 5.0, -11.9, -3.8);
        let err = fit_tm(&spec(), &rec, ReflectionReading::Power).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)), "{err}");
        assert!(err.to_string().contains("model range"));
    }

    #[test]
    fn coupler_override_changes_the_fit() {
        let mut rec = MeasurementRecord::new("r", 5.0, 0.17, -11.9, -3.8);
        rec.delta_lna_gain_db = -0.31;
        let base = fit_tm(&spec(), &rec, ReflectionReading::Power).unwrap().t_m;
        rec.coupler_db = Some(20.0);
        let other = fit_tm(&spec(), &rec, ReflectionReading::Power).unwrap().t_m;
        assert!((base - other).abs() > 0.1);
    }

    #[test]
    fn heating_offset_extends_the_bracket() {
        let mut rec = MeasurementRecord::new("r", 5.0, 0.0, -7.0, -7.0);
        rec.heating_offset_k = 1.5;
        let d = delta_y(&spec(), &rec, ReflectionReading::Voltage, 6.2).unwrap();
        rec.delta_y_db = d;
        let fit = fit_tm(&spec(), &rec, ReflectionReading::Voltage).unwrap();
        assert!((fit.t_m - 6.2).abs() < 1e-3);
    }
}
