//! Structured-text configuration shared by the command-line front end.
//!
//! One TOML (or JSON, by file extension) document holds named blocks:
//! `chain`, `cavity`, `spins`, `scenario`, `sweep`, `fit`, `measurements`.
//! Chain parameters carry optional one-sigma uncertainties so a resolved
//! [`Chain`] can be redrawn for Monte-Carlo propagation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cavity::{CavityPort, CouplingRegime};
use crate::noise_chain::{
    CavityEmission, Chain, ChainStage, CouplerPort, SideInput, StageKind, DEFAULT_GRADIENT_STEPS,
};
use crate::spins::Convention;
use crate::yfactor::{MeasurementRecord, RecordSigma, ReflectionReading};
use crate::{Error, Result};

const MAX_RESAMPLES: usize = 10_000;

/// Nominal value of a parameter: a number, or the record's ambient temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNominal", into = "RawNominal")]
pub enum Nominal {
    Fixed(f64),
    Ambient,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RawNominal {
    Number(f64),
    Name(String),
}

impl TryFrom<RawNominal> for Nominal {
    type Error = String;

    fn try_from(raw: RawNominal) -> std::result::Result<Self, String> {
        match raw {
            RawNominal::Number(v) => Ok(Nominal::Fixed(v)),
            RawNominal::Name(s) if s == "ambient" => Ok(Nominal::Ambient),
            RawNominal::Name(s) => Err(format!("expected a number or \"ambient\", found \"{s}\"")),
        }
    }
}

impl From<Nominal> for RawNominal {
    fn from(n: Nominal) -> Self {
        match n {
            Nominal::Fixed(v) => RawNominal::Number(v),
            Nominal::Ambient => RawNominal::Name("ambient".into()),
        }
    }
}

impl Nominal {
    pub fn resolve(&self, ambient: f64) -> f64 {
        match self {
            Nominal::Fixed(v) => *v,
            Nominal::Ambient => ambient,
        }
    }
}

/// Physical range a drawn value must stay inside.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Free,
    NonNegative,
    Positive,
    NonPositive,
    UnitInterval,
}

impl Bound {
    pub fn contains(&self, v: f64) -> bool {
        v.is_finite()
            && match self {
                Bound::Free => true,
                Bound::NonNegative => v >= 0.0,
                Bound::Positive => v > 0.0,
                Bound::NonPositive => v <= 0.0,
                Bound::UnitInterval => (0.0..=1.0).contains(&v),
            }
    }
}

impl std::fmt::Display for Bound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Bound::Free => "finite",
            Bound::NonNegative => ">= 0",
            Bound::Positive => "> 0",
            Bound::NonPositive => "<= 0",
            Bound::UnitInterval => "in [0, 1]",
        })
    }
}

/// Normal draw around `value`, resampled until it lies inside `bound`.
pub fn draw_truncated<R: Rng + ?Sized>(rng: &mut R, value: f64, sigma: f64, bound: Bound) -> f64 {
    if sigma == 0.0 {
        return value;
    }
    for _ in 0..MAX_RESAMPLES {
        let z: f64 = rng.sample(StandardNormal);
        let v = value + sigma * z;
        if bound.contains(v) {
            return v;
        }
    }
    value
}

/// One uncertain scalar of the chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Param {
    pub nominal: Nominal,
    pub sigma: f64,
    /// Offset added to the nominal value by a Monte-Carlo draw.
    pub delta: f64,
    pub bound: Bound,
}

impl Param {
    pub fn fixed(v: f64, bound: Bound) -> Self {
        Self {
            nominal: Nominal::Fixed(v),
            sigma: 0.0,
            delta: 0.0,
            bound,
        }
    }

    pub fn value(&self, ambient: f64) -> f64 {
        self.nominal.resolve(ambient) + self.delta
    }

    fn redraw<R: Rng + ?Sized>(&mut self, rng: &mut R, ambient: f64) {
        let base = self.nominal.resolve(ambient);
        self.delta = draw_truncated(rng, base, self.sigma, self.bound) - base;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SideSpec {
    NoiseTemp(Param),
    Cavity {
        t_internal_k: Param,
        gamma: Param,
        t_incident_k: Param,
    },
}

/// Amplifier added noise: fixed, or linear in the amplifier's physical temperature.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSpec {
    Fixed(Param),
    Fit {
        ref_noise_k: Param,
        ref_temp_k: f64,
        slope: f64,
        phys_temp_k: Param,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum StageSpecKind {
    UniformLossy {
        loss_db: Param,
        phys_temp_k: Param,
    },
    GradientCable {
        loss_db: Param,
        phys_temp_in_k: Param,
        phys_temp_out_k: Param,
        n_steps: usize,
    },
    DirectionalCoupler {
        coupling_loss_db: Param,
        through_loss_db: Param,
        phys_temp_k: Param,
        line_port: CouplerPort,
        side: SideSpec,
        side_plane: Option<u32>,
    },
    Amplifier {
        gain_db: Param,
        noise: NoiseSpec,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSpec {
    pub label: String,
    pub plane: Option<u32>,
    pub kind: StageSpecKind,
}

impl StageSpec {
    fn params_mut(&mut self) -> Vec<&mut Param> {
        match &mut self.kind {
            StageSpecKind::UniformLossy {
                loss_db,
                phys_temp_k,
            } => vec![loss_db, phys_temp_k],
            StageSpecKind::GradientCable {
                loss_db,
                phys_temp_in_k,
                phys_temp_out_k,
                ..
            } => vec![loss_db, phys_temp_in_k, phys_temp_out_k],
            StageSpecKind::DirectionalCoupler {
                coupling_loss_db,
                through_loss_db,
                phys_temp_k,
                side,
                ..
            } => {
                let mut v = vec![coupling_loss_db, through_loss_db, phys_temp_k];
                match side {
                    SideSpec::NoiseTemp(p) => v.push(p),
                    SideSpec::Cavity {
                        t_internal_k,
                        gamma,
                        t_incident_k,
                    } => v.extend([t_internal_k, gamma, t_incident_k]),
                }
                v
            }
            StageSpecKind::Amplifier { gain_db, noise } => match noise {
                NoiseSpec::Fixed(p) => vec![gain_db, p],
                NoiseSpec::Fit {
                    ref_noise_k,
                    phys_temp_k,
                    ..
                } => vec![gain_db, ref_noise_k, phys_temp_k],
            },
        }
    }

    fn resolve(&self, ambient: f64) -> ChainStage {
        let v = |p: &Param| p.value(ambient);
        let kind = match &self.kind {
            StageSpecKind::UniformLossy {
                loss_db,
                phys_temp_k,
            } => StageKind::UniformLossy {
                loss_db: v(loss_db),
                phys_temp_k: v(phys_temp_k),
            },
            StageSpecKind::GradientCable {
                loss_db,
                phys_temp_in_k,
                phys_temp_out_k,
                n_steps,
            } => StageKind::GradientCable {
                loss_db: v(loss_db),
                phys_temp_in_k: v(phys_temp_in_k),
                phys_temp_out_k: v(phys_temp_out_k),
                n_steps: *n_steps,
            },
            StageSpecKind::DirectionalCoupler {
                coupling_loss_db,
                through_loss_db,
                phys_temp_k,
                line_port,
                side,
                side_plane,
            } => StageKind::DirectionalCoupler {
                coupling_loss_db: v(coupling_loss_db),
                through_loss_db: v(through_loss_db),
                phys_temp_k: v(phys_temp_k),
                line_port: *line_port,
                side_input: match side {
                    SideSpec::NoiseTemp(p) => SideInput::NoiseTemp(v(p)),
                    SideSpec::Cavity {
                        t_internal_k,
                        gamma,
                        t_incident_k,
                    } => SideInput::Cavity(CavityEmission {
                        t_internal_k: v(t_internal_k),
                        gamma: v(gamma),
                        t_incident_k: v(t_incident_k),
                    }),
                },
                side_plane: *side_plane,
            },
            StageSpecKind::Amplifier { gain_db, noise } => StageKind::Amplifier {
                gain_db: v(gain_db),
                noise_temp_k: match noise {
                    NoiseSpec::Fixed(p) => v(p),
                    NoiseSpec::Fit {
                        ref_noise_k,
                        ref_temp_k,
                        slope,
                        phys_temp_k,
                    } => v(ref_noise_k) + slope * (v(phys_temp_k) - ref_temp_k),
                },
            },
        };
        ChainStage {
            label: self.label.clone(),
            plane: self.plane,
            kind,
        }
    }
}

/// A chain netlist whose numeric fields may refer to the ambient temperature
/// and carry uncertainties.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub source_temp_off_k: Param,
    pub source_temp_on_k: Param,
    /// Ambient used when the chain is evaluated on its own.
    pub ambient_temp_k: f64,
    pub stages: Vec<StageSpec>,
}

impl ChainSpec {
    /// Concrete chain with `"ambient"` references resolved; validates every stage.
    pub fn resolve(&self, ambient: f64) -> Result<Chain> {
        let chain = Chain {
            frequency_hz: self.frequency_hz,
            bandwidth_hz: self.bandwidth_hz,
            source_temp_off_k: self.source_temp_off_k.value(ambient),
            source_temp_on_k: self.source_temp_on_k.value(ambient),
            stages: self.stages.iter().map(|s| s.resolve(ambient)).collect(),
        };
        for stage in &chain.stages {
            stage.validate()?;
        }
        Ok(chain)
    }

    /// Resolved at the chain's own ambient temperature.
    pub fn nominal_chain(&self) -> Result<Chain> {
        self.resolve(self.ambient_temp_k)
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = vec![&mut self.source_temp_off_k, &mut self.source_temp_on_k];
        for stage in &mut self.stages {
            out.extend(stage.params_mut());
        }
        out
    }

    /// Replaces every parameter's offset with a fresh truncated-normal draw.
    /// Draw order is fixed by the netlist, so a seeded `rng` is reproducible.
    pub fn redraw<R: Rng + ?Sized>(&mut self, rng: &mut R, ambient: f64) {
        for p in self.params_mut() {
            p.redraw(rng, ambient);
        }
    }

    /// Multiplies every sigma by `factor`.
    pub fn scale_sigmas(&mut self, factor: f64) {
        for p in self.params_mut() {
            p.sigma *= factor;
        }
    }

    pub fn has_uncertainty(&self) -> bool {
        self.clone().params_mut().iter().any(|p| p.sigma > 0.0)
    }

    /// Coupling loss parameter of the coupler whose side input is the cavity.
    pub fn cavity_coupling_mut(&mut self) -> Result<&mut Param> {
        let mut found = self.stages.iter_mut().filter_map(|s| match &mut s.kind {
            StageSpecKind::DirectionalCoupler {
                coupling_loss_db,
                side: SideSpec::Cavity { .. },
                ..
            } => Some(coupling_loss_db),
            _ => None,
        });
        let first = found.next();
        if found.next().is_some() {
            return Err(Error::config("chain", "more than one cavity plane"));
        }
        first.ok_or_else(|| {
            Error::config(
                "chain",
                "no cavity plane (coupler with a `cavity` side input)",
            )
        })
    }

    /// Sigma of a named stage parameter, for tests and reports.
    pub fn param_mut(&mut self, stage_label: &str, index: usize) -> Option<&mut Param> {
        self.stages
            .iter_mut()
            .find(|s| s.label == stage_label)
            .and_then(|s| s.params_mut().into_iter().nth(index))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChain {
    frequency_hz: f64,
    bandwidth_hz: f64,
    source_temp_off_k: f64,
    source_temp_on_k: f64,
    ambient_temp_k: f64,
    #[serde(default)]
    sigma: BTreeMap<String, f64>,
    stages: Vec<RawStage>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum RawStageType {
    UniformLossy,
    GradientCable,
    DirectionalCoupler,
    Amplifier,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCavity {
    t_internal_k: Nominal,
    gamma: Nominal,
    t_incident_k: Nominal,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoiseFit {
    ref_noise_k: f64,
    ref_temp_k: f64,
    slope: f64,
    phys_temp_k: Nominal,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStage {
    label: String,
    #[serde(rename = "type")]
    kind: RawStageType,
    plane: Option<u32>,
    loss_db: Option<Nominal>,
    phys_temp_k: Option<Nominal>,
    phys_temp_in_k: Option<Nominal>,
    phys_temp_out_k: Option<Nominal>,
    n_steps: Option<usize>,
    coupling_loss_db: Option<Nominal>,
    through_loss_db: Option<Nominal>,
    line_port: Option<CouplerPort>,
    side_plane: Option<u32>,
    side_noise_temp_k: Option<Nominal>,
    cavity: Option<RawCavity>,
    gain_db: Option<Nominal>,
    noise_temp_k: Option<Nominal>,
    noise_fit: Option<RawNoiseFit>,
    #[serde(default)]
    sigma: BTreeMap<String, f64>,
}

/// Pulls named values and their sigmas out of one raw block, reporting
/// missing, misplaced and unknown fields against the block's name.
struct FieldReader {
    context: String,
    sigma: BTreeMap<String, f64>,
    used: BTreeSet<String>,
}

impl FieldReader {
    fn new(context: String, sigma: BTreeMap<String, f64>) -> Self {
        Self {
            context,
            sigma,
            used: BTreeSet::new(),
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::config(self.context.clone(), msg)
    }

    fn param(&mut self, name: &str, value: Option<Nominal>, bound: Bound) -> Result<Param> {
        let nominal = value.ok_or_else(|| self.err(format!("missing field `{name}`")))?;
        if let Nominal::Fixed(v) = nominal {
            if !bound.contains(v) {
                return Err(self.err(format!("`{name}` = {v} must be {bound}")));
            }
        }
        let sigma = match self.sigma.get(name) {
            Some(&s) => {
                self.used.insert(name.to_string());
                if !(s.is_finite() && s >= 0.0) {
                    return Err(self.err(format!(
                        "sigma for `{name}` must be a non-negative number, got {s}"
                    )));
                }
                s
            }
            None => 0.0,
        };
        Ok(Param {
            nominal,
            sigma,
            delta: 0.0,
            bound,
        })
    }

    fn forbid<T>(&self, name: &str, value: &Option<T>, kind: &str) -> Result<()> {
        if value.is_some() {
            return Err(self.err(format!("field `{name}` does not apply to a {kind} stage")));
        }
        Ok(())
    }

    fn finish(self) -> Result<()> {
        if let Some(k) = self.sigma.keys().find(|k| !self.used.contains(*k)) {
            return Err(self.err(format!("sigma given for unknown parameter `{k}`")));
        }
        Ok(())
    }
}

fn convert_stage(raw: RawStage) -> Result<StageSpec> {
    use Bound::*;
    let mut r = FieldReader::new(format!("stage '{}'", raw.label), raw.sigma);
    let kind = match raw.kind {
        RawStageType::UniformLossy => {
            for (name, v) in [
                ("phys_temp_in_k", &raw.phys_temp_in_k),
                ("phys_temp_out_k", &raw.phys_temp_out_k),
                ("coupling_loss_db", &raw.coupling_loss_db),
                ("through_loss_db", &raw.through_loss_db),
                ("gain_db", &raw.gain_db),
                ("noise_temp_k", &raw.noise_temp_k),
            ] {
                r.forbid(name, v, "uniform_lossy")?;
            }
            StageSpecKind::UniformLossy {
                loss_db: r.param("loss_db", raw.loss_db, NonNegative)?,
                phys_temp_k: r.param("phys_temp_k", raw.phys_temp_k, Positive)?,
            }
        }
        RawStageType::GradientCable => {
            r.forbid("phys_temp_k", &raw.phys_temp_k, "gradient_cable")?;
            r.forbid("gain_db", &raw.gain_db, "gradient_cable")?;
            let n_steps = raw.n_steps.unwrap_or(DEFAULT_GRADIENT_STEPS);
            if n_steps == 0 {
                return Err(r.err("n_steps must be at least 1"));
            }
            StageSpecKind::GradientCable {
                loss_db: r.param("loss_db", raw.loss_db, NonNegative)?,
                phys_temp_in_k: r.param("phys_temp_in_k", raw.phys_temp_in_k, Positive)?,
                phys_temp_out_k: r.param("phys_temp_out_k", raw.phys_temp_out_k, Positive)?,
                n_steps,
            }
        }
        RawStageType::DirectionalCoupler => {
            r.forbid("loss_db", &raw.loss_db, "directional_coupler")?;
            r.forbid("gain_db", &raw.gain_db, "directional_coupler")?;
            let side = match (raw.side_noise_temp_k, raw.cavity) {
                (Some(t), None) => {
                    SideSpec::NoiseTemp(r.param("side_noise_temp_k", Some(t), NonNegative)?)
                }
                (None, Some(c)) => SideSpec::Cavity {
                    t_internal_k: r.param("t_internal_k", Some(c.t_internal_k), NonNegative)?,
                    gamma: r.param("gamma", Some(c.gamma), UnitInterval)?,
                    t_incident_k: r.param("t_incident_k", Some(c.t_incident_k), NonNegative)?,
                },
                (None, None) => {
                    return Err(r.err("needs either `side_noise_temp_k` or a `cavity` table"))
                }
                (Some(_), Some(_)) => {
                    return Err(r.err("give only one of `side_noise_temp_k` and `cavity`"))
                }
            };
            StageSpecKind::DirectionalCoupler {
                coupling_loss_db: r.param("coupling_loss_db", raw.coupling_loss_db, NonNegative)?,
                through_loss_db: r.param("through_loss_db", raw.through_loss_db, NonNegative)?,
                phys_temp_k: r.param("phys_temp_k", raw.phys_temp_k, Positive)?,
                line_port: raw.line_port.unwrap_or_default(),
                side,
                side_plane: raw.side_plane,
            }
        }
        RawStageType::Amplifier => {
            r.forbid("loss_db", &raw.loss_db, "amplifier")?;
            r.forbid("phys_temp_k", &raw.phys_temp_k, "amplifier")?;
            let noise = match (raw.noise_temp_k, raw.noise_fit) {
                (Some(t), None) => {
                    NoiseSpec::Fixed(r.param("noise_temp_k", Some(t), NonNegative)?)
                }
                (None, Some(fit)) => NoiseSpec::Fit {
                    ref_noise_k: r.param(
                        "ref_noise_k",
                        Some(Nominal::Fixed(fit.ref_noise_k)),
                        NonNegative,
                    )?,
                    ref_temp_k: fit.ref_temp_k,
                    slope: fit.slope,
                    phys_temp_k: r.param("phys_temp_k", Some(fit.phys_temp_k), Positive)?,
                },
                (None, None) => {
                    return Err(r.err("needs either `noise_temp_k` or a `noise_fit` table"))
                }
                (Some(_), Some(_)) => {
                    return Err(r.err("give only one of `noise_temp_k` and `noise_fit`"))
                }
            };
            StageSpecKind::Amplifier {
                gain_db: r.param("gain_db", raw.gain_db, Free)?,
                noise,
            }
        }
    };
    r.finish()?;
    Ok(StageSpec {
        label: raw.label,
        plane: raw.plane,
        kind,
    })
}

fn convert_chain(raw: RawChain) -> Result<ChainSpec> {
    let mut r = FieldReader::new("chain".into(), raw.sigma);
    let source_temp_off_k = r.param(
        "source_temp_off_k",
        Some(Nominal::Fixed(raw.source_temp_off_k)),
        Bound::Positive,
    )?;
    let source_temp_on_k = r.param(
        "source_temp_on_k",
        Some(Nominal::Fixed(raw.source_temp_on_k)),
        Bound::Positive,
    )?;
    r.finish()?;
    for (name, v) in [
        ("frequency_hz", raw.frequency_hz),
        ("bandwidth_hz", raw.bandwidth_hz),
        ("ambient_temp_k", raw.ambient_temp_k),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::config(
                "chain",
                format!("`{name}` must be positive, got {v}"),
            ));
        }
    }
    if raw.stages.is_empty() {
        return Err(Error::config("chain", "no stages"));
    }
    let mut labels = BTreeSet::new();
    for s in &raw.stages {
        if !labels.insert(s.label.clone()) {
            return Err(Error::config(
                "chain",
                format!("duplicate stage label '{}'", s.label),
            ));
        }
    }
    let spec = ChainSpec {
        frequency_hz: raw.frequency_hz,
        bandwidth_hz: raw.bandwidth_hz,
        source_temp_off_k,
        source_temp_on_k,
        ambient_temp_k: raw.ambient_temp_k,
        stages: raw
            .stages
            .into_iter()
            .map(convert_stage)
            .collect::<Result<_>>()?,
    };
    spec.nominal_chain()?
        .propagate(spec.source_temp_off_k.value(spec.ambient_temp_k))?;
    Ok(spec)
}

/// NV ensemble block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinsSpec {
    /// Applied field in tesla; defaults to the field that tunes `|0⟩↔|+1⟩`
    /// to `transition_freq_hz`.
    pub field_t: Option<f64>,
    pub transition_freq_hz: Option<f64>,
    pub temperature_k: f64,
    #[serde(default = "one")]
    pub echo_ratio_plus: f64,
    #[serde(default = "one")]
    pub echo_ratio_minus: f64,
    pub t2star_s: Option<f64>,
    pub g_ensemble_hz: Option<f64>,
    /// Temperatures to convert to photon occupancies.
    #[serde(default)]
    pub occupancy_temps_k: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

/// One row of the with/without-coupling comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationRow {
    pub t_ambient_k: f64,
    /// Mode temperature with the port decoupled, used to calibrate Γ_s.
    pub without_target_k: f64,
    /// Mode temperature with the port coupled, used to fit T_ext.
    pub with_target_k: Option<f64>,
    pub s11_light_db: Option<f64>,
    #[serde(default = "undercoupled")]
    pub regime: CouplingRegime,
}

fn undercoupled() -> CouplingRegime {
    CouplingRegime::Undercoupled
}

/// Mode-cooling scenario block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub frequency_hz: f64,
    pub q_unloaded: f64,
    pub t_ambient_k: f64,
    #[serde(default)]
    pub t_spin_k: f64,
    #[serde(default)]
    pub kappa_external_hz: f64,
    /// Defaults to the ambient temperature.
    pub t_external_k: Option<f64>,
    #[serde(default)]
    pub convention: Convention,
    /// Fixed spin absorption rate; exclusive with `calibrate_to_k`.
    pub gamma_spins_hz: Option<f64>,
    /// Mode temperature to calibrate Γ_s against.
    pub calibrate_to_k: Option<f64>,
    /// Q values at which `predict` reports the mode temperature.
    #[serde(default)]
    pub q_values: Vec<f64>,
    #[serde(default)]
    pub calibration_rows: Vec<CalibrationRow>,
}

/// Q grid for `sweep`: explicit values or a log-spaced range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub q_values: Vec<f64>,
    pub q_min: Option<f64>,
    pub q_max: Option<f64>,
    pub n_points: Option<usize>,
}

impl SweepSpec {
    pub fn grid(&self) -> Result<Vec<f64>> {
        if !self.q_values.is_empty() {
            return Ok(self.q_values.clone());
        }
        match (self.q_min, self.q_max, self.n_points) {
            (Some(lo), Some(hi), Some(n)) if lo > 0.0 && hi >= lo && n >= 2 => {
                let (a, b) = (lo.ln(), hi.ln());
                Ok((0..n)
                    .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                    .collect())
            }
            _ => Err(Error::config(
                "sweep",
                "give `q_values`, or `q_min` > 0, `q_max` >= `q_min` and `n_points` >= 2",
            )),
        }
    }
}

/// Alternative reading of the inputs under which every fit is repeated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub name: String,
    pub reflection_reading: Option<ReflectionReading>,
    #[serde(default)]
    pub coupling_loss_offset_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub reflection_reading: ReflectionReading,
    #[serde(default)]
    pub variants: Vec<Variant>,
    /// `(|Γ|, kelvin)` pairs of LNA noise versus input reflection.
    pub lna_mismatch: Option<Vec<(f64, f64)>>,
}

impl Default for FitSpec {
    fn default() -> Self {
        Self {
            samples: default_samples(),
            seed: default_seed(),
            reflection_reading: ReflectionReading::default(),
            variants: Vec::new(),
            lna_mismatch: None,
        }
    }
}

fn default_samples() -> usize {
    10_000
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Default, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecordSigma {
    ambient_temp_k: Option<f64>,
    delta_noise_sa_db: Option<f64>,
    delta_lna_gain_db: Option<f64>,
    delta_y_db: Option<f64>,
    s11_dark_db: Option<f64>,
    s11_light_db: Option<f64>,
    heating_offset_k: Option<f64>,
}

impl RawRecordSigma {
    fn over(self, base: RawRecordSigma) -> RecordSigma {
        let pick = |a: Option<f64>, b: Option<f64>| a.or(b).unwrap_or(0.0);
        RecordSigma {
            ambient_temp_k: pick(self.ambient_temp_k, base.ambient_temp_k),
            delta_noise_sa_db: pick(self.delta_noise_sa_db, base.delta_noise_sa_db),
            delta_lna_gain_db: pick(self.delta_lna_gain_db, base.delta_lna_gain_db),
            delta_y_db: pick(self.delta_y_db, base.delta_y_db),
            s11_dark_db: pick(self.s11_dark_db, base.s11_dark_db),
            s11_light_db: pick(self.s11_light_db, base.s11_light_db),
            heating_offset_k: pick(self.heating_offset_k, base.heating_offset_k),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    label: String,
    ambient_temp_k: f64,
    coupler_db: Option<f64>,
    delta_noise_sa_db: Option<f64>,
    #[serde(default)]
    delta_lna_gain_db: f64,
    delta_y_db: f64,
    s11_dark_db: f64,
    s11_light_db: f64,
    #[serde(default)]
    heating_offset_k: f64,
    published_t_m_k: Option<f64>,
    published_sigma_k: Option<f64>,
    #[serde(default)]
    sigma: RawRecordSigma,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    chain: Option<RawChain>,
    cavity: Option<CavityPort>,
    spins: Option<SpinsSpec>,
    scenario: Option<ScenarioSpec>,
    sweep: Option<SweepSpec>,
    fit: Option<FitSpec>,
    #[serde(default)]
    measurement_sigma: RawRecordSigma,
    #[serde(default)]
    measurements: Vec<RawRecord>,
}

/// A parsed and validated configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub chain: Option<ChainSpec>,
    pub cavity: Option<CavityPort>,
    pub spins: Option<SpinsSpec>,
    pub scenario: Option<ScenarioSpec>,
    pub sweep: Option<SweepSpec>,
    pub fit: FitSpec,
    pub measurements: Vec<MeasurementRecord>,
}

impl Config {
    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let parsed = if is_json {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        };
        parsed.map_err(|e| match e {
            Error::Config { context, message } => {
                Error::config(format!("{}: {context}", path.display()), message)
            }
            other => other,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::config("toml", e.to_string()))?;
        Self::from_raw(raw)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: RawConfig =
            serde_json::from_str(text).map_err(|e| Error::config("json", e.to_string()))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        if let Some(c) = &raw.cavity {
            c.validate()
                .map_err(|e| Error::config("cavity", e.to_string()))?;
        }
        let fit = raw.fit.unwrap_or_default();
        if let Some(table) = &fit.lna_mismatch {
            crate::yfactor::validate_noise_table(table)
                .map_err(|e| Error::config("fit.lna_mismatch", e.to_string()))?;
        }
        let defaults = raw.measurement_sigma;
        let measurements = raw
            .measurements
            .into_iter()
            .map(|r| {
                let rec = MeasurementRecord {
                    label: r.label,
                    ambient_temp_k: r.ambient_temp_k,
                    coupler_db: r.coupler_db,
                    delta_noise_sa_db: r.delta_noise_sa_db,
                    delta_lna_gain_db: r.delta_lna_gain_db,
                    delta_y_db: r.delta_y_db,
                    s11_dark_db: r.s11_dark_db,
                    s11_light_db: r.s11_light_db,
                    heating_offset_k: r.heating_offset_k,
                    published_t_m_k: r.published_t_m_k,
                    published_sigma_k: r.published_sigma_k,
                    sigma: r.sigma.over(defaults),
                };
                rec.validate().map_err(|e| {
                    Error::config(format!("measurement '{}'", rec.label), e.to_string())
                })?;
                Ok(rec)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            chain: raw.chain.map(convert_chain).transpose()?,
            cavity: raw.cavity,
            spins: raw.spins,
            scenario: raw.scenario,
            sweep: raw.sweep,
            fit,
            measurements,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const CHAIN: &str = r#"
[chain]
frequency_hz = 10.98e9
bandwidth_hz = 9.1e5
source_temp_off_k = 294
source_temp_on_k = 11760
ambient_temp_k = 5
sigma = { source_temp_on_k = 20 }

[[chain.stages]]
label = "conn1"
type = "uniform_lossy"
loss_db = 0.8
phys_temp_k = 294
sigma = { loss_db = 0.1 }

[[chain.stages]]
label = "cable"
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
cavity = { t_internal_k = "ambient", gamma = 0.41, t_incident_k = "ambient" }

[[chain.stages]]
label = "lna"
type = "amplifier"
gain_db = 31
noise_fit = { ref_noise_k = 3, ref_temp_k = 5, slope = 0.5, phys_temp_k = "ambient" }
"#;

    #[test]
    fn chain_resolves_ambient_references() {
        let cfg = Config::from_toml_str(CHAIN).unwrap();
        let spec = cfg.chain.unwrap();
        let chain = spec.resolve(10.0).unwrap();
        match &chain.stages[1].kind {
            StageKind::GradientCable {
                phys_temp_out_k, ..
            } => assert_eq!(*phys_temp_out_k, 10.0),
            other => panic!("{other:?}"),
        }
        match &chain.stages[3].kind {
            StageKind::Amplifier { noise_temp_k, .. } => assert_eq!(*noise_temp_k, 5.5),
            other => panic!("{other:?}"),
        }
        assert_eq!(chain.cavity_stage().unwrap(), 2);
    }

    #[test]
    fn negative_loss_names_the_stage() {
        let text = CHAIN.replace("loss_db = 0.8", "loss_db = -0.8");
        let err = Config::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("conn1") && err.contains("loss_db"), "{err}");
    }

    #[test]
    fn unknown_sigma_key_is_rejected() {
        let text = CHAIN.replace("sigma = { loss_db = 0.1 }", "sigma = { los_db = 0.1 }");
        let err = Config::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("los_db"), "{err}");
    }

    #[test]
    fn misplaced_field_is_rejected() {
        let text = CHAIN.replace("phys_temp_in_k = 294", "phys_temp_in_k = 294\ngain_db = 3");
        assert!(Config::from_toml_str(&text)
            .unwrap_err()
            .to_string()
            .contains("cable"));
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let err = Config::from_toml_str("[chain]\nfrequency_hz = = 3")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn redraw_is_seeded_and_bounded() {
        let mut spec = Config::from_toml_str(CHAIN).unwrap().chain.unwrap();
        let mut a = spec.clone();
        let mut b = spec.clone();
        a.redraw(&mut ChaCha8Rng::seed_from_u64(9), 5.0);
        b.redraw(&mut ChaCha8Rng::seed_from_u64(9), 5.0);
        assert_eq!(a, b);
        assert_ne!(a, spec);
        spec.scale_sigmas(100.0);
        for seed in 0..200 {
            let mut s = spec.clone();
            s.redraw(&mut ChaCha8Rng::seed_from_u64(seed), 5.0);
            s.resolve(5.0).unwrap();
        }
    }

    #[test]
    fn zero_sigma_draw_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(draw_truncated(&mut rng, 1.25, 0.0, Bound::Positive), 1.25);
    }

    #[test]
    fn sweep_grid_is_log_spaced() {
        let s = SweepSpec {
            q_values: vec![],
            q_min: Some(100.0),
            q_max: Some(10_000.0),
            n_points: Some(3),
        };
        let g = s.grid().unwrap();
        assert!((g[1] - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn json_and_toml_agree() {
        let toml_cfg = Config::from_toml_str(CHAIN).unwrap();
        let value: toml::Value = toml::from_str(CHAIN).unwrap();
        let json = serde_json::to_string(&value).unwrap();
        assert_eq!(Config::from_json_str(&json).unwrap(), toml_cfg);
    }
}
