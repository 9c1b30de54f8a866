//! NV⁻ ground-state Zeeman levels, populations and derived spin quantities.
//!
//! Level energies (in Hz) for a field along the NV axis are
//! `E(m_s)/h = D·m_s² + m_s·γ_e·B`, with no strain or hyperfine terms.

use serde::{Deserialize, Serialize};

use crate::units::{photon_temperature, require_non_negative, require_positive, BOLTZMANN, PLANCK};
use crate::{Error, Result};

pub const DEFAULT_ZERO_FIELD_SPLITTING_HZ: f64 = 2.87e9;
pub const DEFAULT_GYROMAGNETIC_RATIO_HZ_PER_T: f64 = 2.8025e10;

const POPULATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NvLevels {
    pub zero_field_splitting_hz: f64,
    pub gyromagnetic_ratio_hz_per_t: f64,
    pub field_t: f64,
}

impl Default for NvLevels {
    fn default() -> Self {
        Self {
            zero_field_splitting_hz: DEFAULT_ZERO_FIELD_SPLITTING_HZ,
            gyromagnetic_ratio_hz_per_t: DEFAULT_GYROMAGNETIC_RATIO_HZ_PER_T,
            field_t: 0.0,
        }
    }
}

impl NvLevels {
    pub fn with_field(field_t: f64) -> Self {
        Self {
            field_t,
            ..Self::default()
        }
    }

    /// Energies over h for `m_s = −1, 0, +1`.
    pub fn energies_hz(&self) -> [f64; 3] {
        let d = self.zero_field_splitting_hz;
        let zb = self.gyromagnetic_ratio_hz_per_t * self.field_t;
        [d - zb, 0.0, d + zb]
    }

    /// Field that tunes the `|0⟩ ↔ |+1⟩` line to `freq_hz`.
    pub fn field_for_upper_transition(freq_hz: f64) -> f64 {
        (freq_hz - DEFAULT_ZERO_FIELD_SPLITTING_HZ) / DEFAULT_GYROMAGNETIC_RATIO_HZ_PER_T
    }
}

/// `(f(|−1⟩↔|0⟩), f(|0⟩↔|+1⟩))` in Hz.
pub fn transition_frequencies(levels: &NvLevels) -> Result<(f64, f64)> {
    require_non_negative("field_t", levels.field_t)?;
    let [e_minus, e_zero, e_plus] = levels.energies_hz();
    Ok(((e_minus - e_zero).abs(), (e_plus - e_zero).abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Populations {
    pub p_minus: f64,
    pub p_zero: f64,
    pub p_plus: f64,
}

impl Populations {
    pub fn new(p_minus: f64, p_zero: f64, p_plus: f64) -> Result<Self> {
        let p = Self {
            p_minus,
            p_zero,
            p_plus,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p_minus", self.p_minus),
            ("p_zero", self.p_zero),
            ("p_plus", self.p_plus),
        ] {
            if !(-POPULATION_TOL..=1.0 + POPULATION_TOL).contains(&v) {
                return Err(Error::domain(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        let sum = self.sum();
        if (sum - 1.0).abs() > POPULATION_TOL {
            return Err(Error::domain(format!("populations sum to {sum}, not 1")));
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.p_minus + self.p_zero + self.p_plus
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.p_minus, self.p_zero, self.p_plus]
    }
}

/// Boltzmann populations at `temp`.
pub fn thermal_populations(levels: &NvLevels, temp: f64) -> Result<Populations> {
    require_positive("temp", temp)?;
    let energies = levels.energies_hz();
    let e_min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = PLANCK / (BOLTZMANN * temp);
    let w = energies.map(|e| (-(e - e_min) * scale).exp());
    let z: f64 = w.iter().sum();
    Ok(Populations {
        p_minus: w[0] / z,
        p_zero: w[1] / z,
        p_plus: w[2] / z,
    })
}

/// Light-state populations from ESR echo ratios (light/thermal) on both
/// transitions, given the thermal reference at `temp`.
///
/// Solves `(p₀−p₊) = r₊·(p₀−p₊)_th`, `(p₋−p₀) = r₋·(p₋−p₀)_th`, `Σp = 1`.
pub fn populations_from_echo_ratios(
    levels: &NvLevels,
    temp: f64,
    ratio_plus: f64,
    ratio_minus: f64,
) -> Result<Populations> {
    if !(ratio_plus.is_finite() && ratio_minus.is_finite()) {
        return Err(Error::domain("echo ratios must be finite"));
    }
    let th = thermal_populations(levels, temp)?;
    let d_upper = th.p_zero - th.p_plus;
    let d_lower = th.p_minus - th.p_zero;
    if d_upper.abs() < f64::EPSILON || d_lower.abs() < f64::EPSILON {
        return Err(Error::domain(format!(
            "thermal population difference vanishes (upper {d_upper:e}, lower {d_lower:e}); echo ratios are undefined"
        )));
    }
    let a = ratio_plus * d_upper;
    let b = ratio_minus * d_lower;
    let p_zero = (1.0 + a - b) / 3.0;
    let clamp = |v: f64| {
        if v.abs() < POPULATION_TOL {
            v.max(0.0)
        } else {
            v
        }
    };
    Populations::new(clamp(p_zero + b), clamp(p_zero), clamp(p_zero - a))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transition {
    /// `|0⟩ ↔ |+1⟩`: the cooling (anti-maser) line.
    ZeroToPlus,
    /// `|−1⟩ ↔ |0⟩`: the maser line.
    MinusToZero,
}

impl Transition {
    pub fn frequency(&self, levels: &NvLevels) -> Result<f64> {
        let (low, high) = transition_frequencies(levels)?;
        Ok(match self {
            Transition::MinusToZero => low,
            Transition::ZeroToPlus => high,
        })
    }

    /// `(p_lower, p_upper)` ordered by level energy.
    pub fn lower_upper(&self, levels: &NvLevels, p: &Populations) -> (f64, f64) {
        let e = levels.energies_hz();
        let (i, j) = match self {
            Transition::MinusToZero => (0, 1),
            Transition::ZeroToPlus => (1, 2),
        };
        let pops = p.as_array();
        if e[i] <= e[j] {
            (pops[i], pops[j])
        } else {
            (pops[j], pops[i])
        }
    }

    /// Lower minus upper population.
    pub fn polarization_difference(&self, levels: &NvLevels, p: &Populations) -> f64 {
        let (lo, up) = self.lower_upper(levels, p);
        lo - up
    }
}

/// Signed two-level spin temperature, with the limits kept explicit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "kelvin")]
pub enum SpinTemperature {
    Finite(f64),
    /// Equal populations: |T| = ∞.
    Saturated,
    /// Upper level empty: T → 0⁺.
    GroundState,
    /// Lower level empty: T → 0⁻.
    FullInversion,
}

impl SpinTemperature {
    pub fn kelvin(&self) -> f64 {
        match self {
            SpinTemperature::Finite(t) => *t,
            SpinTemperature::Saturated => f64::INFINITY,
            SpinTemperature::GroundState => 0.0,
            SpinTemperature::FullInversion => -0.0,
        }
    }

    pub fn is_inverted(&self) -> bool {
        match self {
            SpinTemperature::Finite(t) => *t < 0.0,
            SpinTemperature::FullInversion => true,
            _ => false,
        }
    }
}

/// `(h·f/k_B) / ln(p_lower/p_upper)`; negative under inversion.
pub fn spin_temperature(
    p_lower: f64,
    p_upper: f64,
    transition_freq: f64,
) -> Result<SpinTemperature> {
    require_positive("transition_freq", transition_freq)?;
    for (name, v) in [("p_lower", p_lower), ("p_upper", p_upper)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::domain(format!("{name} = {v} is outside [0, 1]")));
        }
    }
    if p_lower == p_upper {
        return Ok(SpinTemperature::Saturated);
    }
    if p_upper == 0.0 {
        return Ok(SpinTemperature::GroundState);
    }
    if p_lower == 0.0 {
        return Ok(SpinTemperature::FullInversion);
    }
    Ok(SpinTemperature::Finite(
        photon_temperature(transition_freq) / (p_lower / p_upper).ln(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    Planck,
    #[default]
    RayleighJeans,
}

/// Mean photon number of a mode at `temp`. `temp = 0` returns the vacuum limit.
pub fn occupancy(temp: f64, freq: f64, convention: Convention) -> Result<f64> {
    require_non_negative("temp", temp)?;
    require_positive("freq", freq)?;
    if temp == 0.0 {
        return Ok(0.0);
    }
    let x = photon_temperature(freq) / temp;
    Ok(match convention {
        Convention::Planck => 1.0 / x.exp_m1(),
        Convention::RayleighJeans => 1.0 / x,
    })
}

/// Inverse of [`occupancy`].
pub fn temperature_from_occupancy(n: f64, freq: f64, convention: Convention) -> Result<f64> {
    require_non_negative("occupancy", n)?;
    require_positive("freq", freq)?;
    if n == 0.0 {
        return Ok(0.0);
    }
    let tp = photon_temperature(freq);
    Ok(match convention {
        Convention::Planck => tp / (1.0 / n).ln_1p(),
        Convention::RayleighJeans => n * tp,
    })
}

/// Full-width dephasing linewidth `1/(π·T₂*)`.
pub fn linewidth_from_t2star(t2star_s: f64) -> Result<f64> {
    require_positive("t2star_s", t2star_s)?;
    Ok(1.0 / (std::f64::consts::PI * t2star_s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinRegime {
    /// Positive rate: the ensemble removes photons from the mode.
    Absorbing,
    /// Negative rate: maser gain.
    Gain,
    Saturated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionRate {
    pub rate_hz: f64,
    pub regime: SpinRegime,
}

/// Collective absorption rate `Γ_s = 4·g_ens²·Δp/γ₂` (Lorentzian line).
pub fn collective_absorption_rate(
    g_ensemble: f64,
    dephasing_linewidth: f64,
    polarization_difference: f64,
) -> Result<AbsorptionRate> {
    require_non_negative("g_ensemble", g_ensemble)?;
    require_positive("dephasing_linewidth", dephasing_linewidth)?;
    if !(-1.0..=1.0).contains(&polarization_difference) {
        return Err(Error::domain(format!(
            "polarization difference must lie in [-1, 1], got {polarization_difference}"
        )));
    }
    let rate_hz = 4.0 * g_ensemble * g_ensemble * polarization_difference / dephasing_linewidth;
    let regime = if rate_hz > 0.0 {
        SpinRegime::Absorbing
    } else if rate_hz < 0.0 {
        SpinRegime::Gain
    } else {
        SpinRegime::Saturated
    };
    Ok(AbsorptionRate { rate_hz, regime })
}

/// Ensemble coupling `g_ens = √(Γ_s·γ₂/(4·Δp))` that yields a given rate.
pub fn g_ensemble_for_rate(
    rate_hz: f64,
    dephasing_linewidth: f64,
    polarization_difference: f64,
) -> Result<f64> {
    require_positive("dephasing_linewidth", dephasing_linewidth)?;
    let ratio = rate_hz / polarization_difference;
    if !(ratio.is_finite() && ratio >= 0.0) {
        return Err(Error::domain(
            "rate and polarization difference must be nonzero with the same sign",
        ));
    }
    Ok((ratio * dephasing_linewidth / 4.0).sqrt())
}

/// A polarized ensemble on one transition of the NV ground state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinEnsemble {
    pub populations: Populations,
    pub transition: Transition,
    pub transition_freq: f64,
    pub dephasing_linewidth: f64,
    pub collective_absorption_rate: f64,
    pub regime: SpinRegime,
    pub spin_temp: SpinTemperature,
}

impl SpinEnsemble {
    pub fn new(
        levels: &NvLevels,
        populations: Populations,
        transition: Transition,
        dephasing_linewidth: f64,
        g_ensemble: f64,
    ) -> Result<Self> {
        populations.validate()?;
        let transition_freq = transition.frequency(levels)?;
        let (lo, up) = transition.lower_upper(levels, &populations);
        let rate = collective_absorption_rate(g_ensemble, dephasing_linewidth, lo - up)?;
        Ok(Self {
            populations,
            transition,
            transition_freq,
            dephasing_linewidth,
            collective_absorption_rate: rate.rate_hz,
            regime: rate.regime,
            spin_temp: spin_temperature(lo.clamp(0.0, 1.0), up.clamp(0.0, 1.0), transition_freq)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const F_CAV: f64 = 10.98e9;

    #[test]
    fn zero_field_is_degenerate() {
        let (a, b) = transition_frequencies(&NvLevels::default()).unwrap();
        assert_eq!(a, 2.87e9);
        assert_eq!(b, 2.87e9);
    }

    #[test]
    fn field_for_cavity_resonance() {
        let levels = NvLevels::with_field(0.2894);
        let (low, high) = transition_frequencies(&levels).unwrap();
        assert!((high - 10.98e9).abs() < 5e6, "{high}");
        assert!((high - low - 2.0 * 2.87e9).abs() < 1.0);
        assert!((NvLevels::field_for_upper_transition(10.98e9) - 0.2894).abs() < 1e-4);
        assert!(transition_frequencies(&NvLevels::with_field(-0.1)).is_err());
    }

    #[test]
    fn thermal_limits() {
        let levels = NvLevels::with_field(0.2894);
        let hot = thermal_populations(&levels, 1e9).unwrap();
        for p in hot.as_array() {
            assert!((p - 1.0 / 3.0).abs() < 1e-6);
        }
        let cold = thermal_populations(&levels, 1e-3).unwrap();
        assert!((cold.p_minus - 1.0).abs() < 1e-12);
        assert!(thermal_populations(&levels, 0.0).is_err());
    }

    #[test]
    fn thermal_ratio_at_five_kelvin() {
        let levels = NvLevels::with_field(0.2894);
        let p = thermal_populations(&levels, 5.0).unwrap();
        let split = 2.0 * levels.gyromagnetic_ratio_hz_per_t * levels.field_t;
        let expected = (PLANCK * split / (BOLTZMANN * 5.0)).exp();
        assert!(((p.p_minus / p.p_plus) / expected - 1.0).abs() < 1e-12);
        assert!((p.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_echo_ratios_reproduce_thermal() {
        let levels = NvLevels::with_field(0.2894);
        for t in [5.0, 10.0, 30.0, 300.0] {
            let th = thermal_populations(&levels, t).unwrap();
            let p = populations_from_echo_ratios(&levels, t, 1.0, 1.0).unwrap();
            for (a, b) in th.as_array().iter().zip(p.as_array()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn echo_ratios_for_full_pumping() {
        let levels = NvLevels::with_field(0.2894);
        let th = thermal_populations(&levels, 10.0).unwrap();
        let r_plus = 1.0 / (th.p_zero - th.p_plus);
        let r_minus = -1.0 / (th.p_minus - th.p_zero);
        let p = populations_from_echo_ratios(&levels, 10.0, r_plus, r_minus).unwrap();
        assert!(p.p_minus.abs() < 1e-9 && (p.p_zero - 1.0).abs() < 1e-9 && p.p_plus.abs() < 1e-9);
    }

    #[test]
    fn echo_ratios_need_thermal_contrast() {
        // γB = D makes |−1⟩ and |0⟩ degenerate
        let levels = NvLevels::with_field(2.87e9 / 2.8025e10);
        assert!(populations_from_echo_ratios(&levels, 5.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn spin_temperature_examples() {
        assert_eq!(
            spin_temperature(0.3, 0.3, F_CAV).unwrap(),
            SpinTemperature::Saturated
        );
        assert!(spin_temperature(0.3, 0.3, F_CAV)
            .unwrap()
            .kelvin()
            .is_infinite());
        assert!(spin_temperature(0.2, 0.4, F_CAV).unwrap().is_inverted());
        let t = spin_temperature(0.99, 0.01, F_CAV).unwrap().kelvin();
        assert!((t - 0.1147).abs() < 1e-4, "{t}");
        assert_eq!(
            spin_temperature(1.0, 0.0, F_CAV).unwrap(),
            SpinTemperature::GroundState
        );
        assert_eq!(
            spin_temperature(0.0, 0.5, F_CAV).unwrap(),
            SpinTemperature::FullInversion
        );
    }

    #[test]
    fn occupancy_examples() {
        let n = occupancy(2.5, F_CAV, Convention::RayleighJeans).unwrap();
        assert!((n - 4.74).abs() < 0.01, "{n}");
        let n = occupancy(0.63, F_CAV, Convention::RayleighJeans).unwrap();
        assert!((n - 1.20).abs() < 0.01, "{n}");
        let ratio = occupancy(1e6, F_CAV, Convention::Planck).unwrap()
            / occupancy(1e6, F_CAV, Convention::RayleighJeans).unwrap();
        assert!((ratio - 1.0).abs() < 1e-6);
    }

    #[test]
    fn t2star_linewidth() {
        assert!((linewidth_from_t2star(35e-9).unwrap() - 9.09e6).abs() < 0.01e6);
    }

    #[test]
    fn absorption_rate_examples() {
        assert_eq!(
            collective_absorption_rate(1e7, 9e6, 0.0).unwrap().regime,
            SpinRegime::Saturated
        );
        let g = g_ensemble_for_rate(2.37e8, 9e6, 1.0).unwrap();
        let r = collective_absorption_rate(g, 9e6, 1.0).unwrap();
        assert!((r.rate_hz / 2.37e8 - 1.0).abs() < 1e-12);
        assert_eq!(r.regime, SpinRegime::Absorbing);
        let r = collective_absorption_rate(g, 9e6, -0.4).unwrap();
        assert!(r.rate_hz < 0.0);
        assert_eq!(r.regime, SpinRegime::Gain);
        assert!(collective_absorption_rate(g, 0.0, 0.5).is_err());
    }

    #[test]
    fn pumped_ensemble_is_cold() {
        let levels = NvLevels::with_field(0.2894);
        let p = Populations::new(0.0, 1.0, 0.0).unwrap();
        let e = SpinEnsemble::new(&levels, p, Transition::ZeroToPlus, 9e6, 2.3e7).unwrap();
        assert_eq!(e.spin_temp, SpinTemperature::GroundState);
        assert_eq!(e.regime, SpinRegime::Absorbing);
        let maser = SpinEnsemble::new(&levels, p, Transition::MinusToZero, 9e6, 2.3e7).unwrap();
        assert!(maser.spin_temp.is_inverted());
        assert_eq!(maser.regime, SpinRegime::Gain);
    }

    proptest! {
        #[test]
        fn thermal_populations_normalised(b in 0.0f64..1.0, t in 0.05f64..1e4) {
            let p = thermal_populations(&NvLevels::with_field(b), t).unwrap();
            prop_assert!((p.sum() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn thermal_and_spin_temperature_agree(b in 0.15f64..0.6, t in 0.5f64..300.0) {
            let levels = NvLevels::with_field(b);
            let p = thermal_populations(&levels, t).unwrap();
            for tr in [Transition::ZeroToPlus, Transition::MinusToZero] {
                let (lo, up) = tr.lower_upper(&levels, &p);
                let ts = spin_temperature(lo, up, tr.frequency(&levels).unwrap()).unwrap().kelvin();
                prop_assert!((ts / t - 1.0).abs() < 1e-6);
            }
        }

        #[test]
        fn planck_below_rayleigh_jeans(t in 1e-3f64..1e4, f in 1e8f64..1e11) {
            let p = occupancy(t, f, Convention::Planck).unwrap();
            let rj = occupancy(t, f, Convention::RayleighJeans).unwrap();
            prop_assert!(p < rj);
        }

        #[test]
        fn absorption_linear_and_quadratic(g in 1e5f64..1e8, dp in -0.5f64..0.5, lw in 1e6f64..1e8) {
            let base = collective_absorption_rate(g, lw, dp).unwrap().rate_hz;
            let double_dp = collective_absorption_rate(g, lw, 2.0 * dp).unwrap().rate_hz;
            let double_g = collective_absorption_rate(2.0 * g, lw, dp).unwrap().rate_hz;
            prop_assert!((double_dp - 2.0 * base).abs() <= 1e-9 * base.abs().max(1e-300));
            prop_assert!((double_g - 4.0 * base).abs() <= 1e-9 * base.abs().max(1e-300));
        }
    }
}
