//! Noise-temperature propagation through an ordered chain of two-port stages.
//!
//! All losses are stored as non-negative dB with linear transmission
//! `l = 10^(-dB/10)`. Every stage is affine in its input noise temperature,
//! which [`LinearChain`] exploits to evaluate a fixed chain many times.

use serde::{Deserialize, Serialize};

use crate::cavity::cavity_output_noise;
use crate::units::{
    gain_linear, require_non_negative, require_positive, transmission_from_loss_db, BOLTZMANN,
};
use crate::{Error, Result};

/// Default number of fixed RK4 steps used across a gradient cable.
pub const DEFAULT_GRADIENT_STEPS: usize = 10_000;

/// Noise temperature at one numbered plane of the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseState {
    pub plane_index: u32,
    pub label: String,
    pub noise_temp: f64,
    pub frequency: f64,
}

/// Which coupler port the propagating chain noise enters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CouplerPort {
    /// The running noise arrives at the coupled (attenuated) port; the side
    /// input travels along the main line.
    #[default]
    Coupled,
    /// The running noise travels along the main line; the side input arrives
    /// at the coupled port.
    Through,
}

/// Noise emitted by a cavity port: the internal mode temperature mixed with
/// the noise reflected back from the feed line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityEmission {
    pub t_internal_k: f64,
    /// Reflection magnitude at resonance, in [0, 1].
    pub gamma: f64,
    pub t_incident_k: f64,
}

impl CavityEmission {
    pub fn noise_temp(&self) -> Result<f64> {
        cavity_output_noise(self.t_internal_k, self.gamma, self.t_incident_k)
    }
}

/// Second input of a directional coupler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SideInput {
    NoiseTemp(f64),
    Cavity(CavityEmission),
}

impl SideInput {
    pub fn noise_temp(&self) -> Result<f64> {
        match self {
            SideInput::NoiseTemp(t) => {
                require_non_negative("side input noise temperature", *t)?;
                Ok(*t)
            }
            SideInput::Cavity(c) => c.noise_temp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StageKind {
    UniformLossy {
        loss_db: f64,
        phys_temp_k: f64,
    },
    GradientCable {
        loss_db: f64,
        phys_temp_in_k: f64,
        phys_temp_out_k: f64,
        n_steps: usize,
    },
    DirectionalCoupler {
        coupling_loss_db: f64,
        through_loss_db: f64,
        phys_temp_k: f64,
        line_port: CouplerPort,
        side_input: SideInput,
        /// Plane number reported for the side input, if any.
        side_plane: Option<u32>,
    },
    Amplifier {
        gain_db: f64,
        /// Input-referred added noise.
        noise_temp_k: f64,
    },
}

impl StageKind {
    pub fn name(&self) -> &'static str {
        match self {
            StageKind::UniformLossy { .. } => "uniform_lossy",
            StageKind::GradientCable { .. } => "gradient_cable",
            StageKind::DirectionalCoupler { .. } => "directional_coupler",
            StageKind::Amplifier { .. } => "amplifier",
        }
    }
}

/// One two-port element of the receive chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStage {
    pub label: String,
    /// Explicit plane number of this stage's output; sequential when absent.
    pub plane: Option<u32>,
    pub kind: StageKind,
}

impl ChainStage {
    pub fn new(label: impl Into<String>, kind: StageKind) -> Self {
        Self {
            label: label.into(),
            plane: None,
            kind,
        }
    }

    pub fn at_plane(mut self, plane: u32) -> Self {
        self.plane = Some(plane);
        self
    }

    /// Checks the stage invariants, naming the stage in any error.
    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|e| match e {
            Error::Domain(msg) => Error::config(format!("stage '{}'", self.label), msg),
            other => other,
        })
    }

    fn check(&self) -> Result<()> {
        match &self.kind {
            StageKind::UniformLossy {
                loss_db,
                phys_temp_k,
            } => {
                require_non_negative("loss_db", *loss_db)?;
                require_positive("phys_temp_k", *phys_temp_k)
            }
            StageKind::GradientCable {
                loss_db,
                phys_temp_in_k,
                phys_temp_out_k,
                n_steps,
            } => {
                require_non_negative("loss_db", *loss_db)?;
                require_positive("phys_temp_in_k", *phys_temp_in_k)?;
                require_positive("phys_temp_out_k", *phys_temp_out_k)?;
                if *n_steps == 0 {
                    return Err(Error::domain("n_steps must be at least 1"));
                }
                Ok(())
            }
            StageKind::DirectionalCoupler {
                coupling_loss_db,
                through_loss_db,
                phys_temp_k,
                side_input,
                ..
            } => {
                if coupling_loss_db.is_nan() || *coupling_loss_db < 0.0 {
                    return Err(Error::domain(format!(
                        "coupling_loss_db must be non-negative, got {coupling_loss_db}"
                    )));
                }
                require_non_negative("through_loss_db", *through_loss_db)?;
                require_positive("phys_temp_k", *phys_temp_k)?;
                side_input.noise_temp().map(|_| ())
            }
            StageKind::Amplifier {
                gain_db,
                noise_temp_k,
            } => {
                crate::units::require_finite("gain_db", *gain_db)?;
                require_non_negative("noise_temp_k", *noise_temp_k)
            }
        }
    }
}

/// Output of a uniform-temperature lossy two-port: `t_in·l + (1−l)·t_phys`.
pub fn propagate_uniform_stage(t_in: f64, loss_db: f64, t_phys: f64) -> Result<f64> {
    require_non_negative("t_in", t_in)?;
    require_non_negative("loss_db", loss_db)?;
    require_non_negative("t_phys", t_phys)?;
    let l = transmission_from_loss_db(loss_db);
    Ok(t_in * l + (1.0 - l) * t_phys)
}

/// Integrates `dT/dx = α·(T_phys(x) − T)` along a cable whose physical
/// temperature varies linearly from `t_phys_in` to `t_phys_out`, with
/// `α = loss_db·ln(10)/10` per unit length and `n_steps` fixed RK4 steps.
pub fn propagate_gradient_cable(
    t_in: f64,
    loss_db: f64,
    t_phys_in: f64,
    t_phys_out: f64,
    n_steps: usize,
) -> Result<f64> {
    require_non_negative("t_in", t_in)?;
    require_non_negative("loss_db", loss_db)?;
    require_non_negative("t_phys_in", t_phys_in)?;
    require_non_negative("t_phys_out", t_phys_out)?;
    if n_steps == 0 {
        return Err(Error::domain("n_steps must be at least 1"));
    }
    let cable = CableOde::new(loss_db, t_phys_in, t_phys_out, n_steps);
    let mut t = t_in;
    for i in 0..n_steps {
        t = cable.step(i as f64 * cable.h, t);
    }
    Ok(t)
}

struct CableOde {
    alpha: f64,
    start: f64,
    slope: f64,
    h: f64,
}

impl CableOde {
    fn new(loss_db: f64, t_phys_in: f64, t_phys_out: f64, n_steps: usize) -> Self {
        Self {
            alpha: loss_db * std::f64::consts::LN_10 / 10.0,
            start: t_phys_in,
            slope: t_phys_out - t_phys_in,
            h: 1.0 / n_steps as f64,
        }
    }

    fn rhs(&self, x: f64, t: f64) -> f64 {
        self.alpha * (self.start + self.slope * x - t)
    }

    fn step(&self, x: f64, t: f64) -> f64 {
        let h = self.h;
        let k1 = self.rhs(x, t);
        let k2 = self.rhs(x + 0.5 * h, t + 0.5 * h * k1);
        let k3 = self.rhs(x + 0.5 * h, t + 0.5 * h * k2);
        let k4 = self.rhs(x + h, t + h * k3);
        t + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    }
}

/// `out = slope·t_in + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub slope: f64,
    pub offset: f64,
}

impl Affine {
    #[inline]
    pub fn apply(&self, t: f64) -> f64 {
        self.slope * t + self.offset
    }
}

type Mat3 = [[f64; 3]; 3];

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// The same RK4 scheme as [`propagate_gradient_cable`], collapsed to an affine
/// map. One step acts on `(T, x, 1)` as a 3×3 matrix; `n_steps` steps are its
/// power, computed by repeated squaring.
pub fn gradient_cable_map(loss_db: f64, t_phys_in: f64, t_phys_out: f64, n_steps: usize) -> Affine {
    let cable = CableOde::new(loss_db, t_phys_in, t_phys_out, n_steps.max(1));
    let c0 = cable.step(0.0, 0.0);
    let r = cable.step(0.0, 1.0) - c0;
    let c1 = cable.step(1.0, 0.0) - c0;
    let step: Mat3 = [[r, c1, c0], [0.0, 1.0, cable.h], [0.0, 0.0, 1.0]];

    let mut result: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut base = step;
    let mut n = n_steps.max(1);
    while n > 0 {
        if n & 1 == 1 {
            result = mat_mul(&result, &base);
        }
        base = mat_mul(&base, &base);
        n >>= 1;
    }
    Affine {
        slope: result[0][0],
        offset: result[0][2],
    }
}

/// Ideal three-port combiner:
/// `[t_through_in·l_t + (1−l_t)·t_phys]·(1−l_c) + t_coupled_in·l_c`.
///
/// `coupling_loss_db = ∞` is accepted and leaves only the through branch.
pub fn combine_coupler(
    t_through_in: f64,
    t_coupled_in: f64,
    through_loss_db: f64,
    coupling_loss_db: f64,
    t_phys: f64,
) -> Result<f64> {
    require_non_negative("t_through_in", t_through_in)?;
    require_non_negative("t_coupled_in", t_coupled_in)?;
    require_non_negative("through_loss_db", through_loss_db)?;
    if coupling_loss_db.is_nan() || coupling_loss_db < 0.0 {
        return Err(Error::domain(format!(
            "coupling_loss_db must be non-negative, got {coupling_loss_db}"
        )));
    }
    require_non_negative("t_phys", t_phys)?;
    Ok(coupler_unchecked(
        t_through_in,
        t_coupled_in,
        through_loss_db,
        coupling_loss_db,
        t_phys,
    ))
}

#[inline]
fn coupler_unchecked(
    t_through_in: f64,
    t_coupled_in: f64,
    through_loss_db: f64,
    coupling_loss_db: f64,
    t_phys: f64,
) -> f64 {
    let l_t = transmission_from_loss_db(through_loss_db);
    let l_c = transmission_from_loss_db(coupling_loss_db);
    (t_through_in * l_t + (1.0 - l_t) * t_phys) * (1.0 - l_c) + t_coupled_in * l_c
}

/// Amplifier with input-referred added noise: `(t_in + noise_temp_added)·g`.
pub fn amplify(t_in: f64, gain_db: f64, noise_temp_added: f64) -> Result<f64> {
    require_non_negative("t_in", t_in)?;
    crate::units::require_finite("gain_db", gain_db)?;
    require_non_negative("noise_temp_added", noise_temp_added)?;
    Ok((t_in + noise_temp_added) * gain_linear(gain_db))
}

/// Available noise power `10·log10(k_B·T·B / 1 mW)` in dBm.
pub fn noise_power_dbm(noise_temp: f64, bandwidth: f64) -> Result<f64> {
    require_positive("noise_temp", noise_temp)?;
    require_positive("bandwidth", bandwidth)?;
    Ok(10.0 * (BOLTZMANN * noise_temp * bandwidth / 1e-3).log10())
}

fn coupler_output(
    port: CouplerPort,
    running: f64,
    side: f64,
    through_db: f64,
    coupling_db: f64,
    t_phys: f64,
) -> f64 {
    match port {
        CouplerPort::Coupled => coupler_unchecked(side, running, through_db, coupling_db, t_phys),
        CouplerPort::Through => coupler_unchecked(running, side, through_db, coupling_db, t_phys),
    }
}

/// Noise temperature at every numbered plane, starting with the source at
/// plane 0.
pub fn chain_propagate(
    source_temp: f64,
    stages: &[ChainStage],
    frequency: f64,
) -> Result<Vec<NoiseState>> {
    if stages.is_empty() {
        return Err(Error::config("chain", "stage list is empty"));
    }
    require_non_negative("source_temp", source_temp)?;

    let mut states = Vec::with_capacity(stages.len() + 2);
    states.push(NoiseState {
        plane_index: 0,
        label: "source".into(),
        noise_temp: source_temp,
        frequency,
    });
    let mut t = source_temp;
    let mut last_plane = 0u32;

    let next_plane = |requested: Option<u32>, label: &str, last: &mut u32| -> Result<u32> {
        let plane = requested.unwrap_or(*last + 1);
        if plane <= *last {
            return Err(Error::config(
                format!("stage '{label}'"),
                format!("plane {plane} does not follow plane {last}"),
            ));
        }
        *last = plane;
        Ok(plane)
    };

    for stage in stages {
        stage.validate()?;
        t = match &stage.kind {
            StageKind::UniformLossy {
                loss_db,
                phys_temp_k,
            } => propagate_uniform_stage(t, *loss_db, *phys_temp_k)?,
            StageKind::GradientCable {
                loss_db,
                phys_temp_in_k,
                phys_temp_out_k,
                n_steps,
            } => {
                propagate_gradient_cable(t, *loss_db, *phys_temp_in_k, *phys_temp_out_k, *n_steps)?
            }
            StageKind::DirectionalCoupler {
                coupling_loss_db,
                through_loss_db,
                phys_temp_k,
                line_port,
                side_input,
                side_plane,
            } => {
                let side = side_input.noise_temp()?;
                if side_plane.is_some() {
                    let plane = next_plane(*side_plane, &stage.label, &mut last_plane)?;
                    states.push(NoiseState {
                        plane_index: plane,
                        label: format!("{}.side", stage.label),
                        noise_temp: side,
                        frequency,
                    });
                }
                coupler_output(
                    *line_port,
                    t,
                    side,
                    *through_loss_db,
                    *coupling_loss_db,
                    *phys_temp_k,
                )
            }
            StageKind::Amplifier {
                gain_db,
                noise_temp_k,
            } => amplify(t, *gain_db, *noise_temp_k)?,
        };
        let plane = next_plane(stage.plane, &stage.label, &mut last_plane)?;
        states.push(NoiseState {
            plane_index: plane,
            label: stage.label.clone(),
            noise_temp: t,
            frequency,
        });
    }
    Ok(states)
}

/// A complete receive chain: calibrated source at plane 0 through to the
/// analyzer at the last plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub source_temp_off_k: f64,
    pub source_temp_on_k: f64,
    pub stages: Vec<ChainStage>,
}

impl Chain {
    pub fn propagate(&self, source_temp: f64) -> Result<Vec<NoiseState>> {
        chain_propagate(source_temp, &self.stages, self.frequency_hz)
    }

    pub fn linearize(&self) -> Result<LinearChain> {
        LinearChain::new(&self.stages)
    }

    /// Index of the single coupler whose side input is a cavity.
    pub fn cavity_stage(&self) -> Result<usize> {
        let found: Vec<usize> = self
            .stages
            .iter()
            .enumerate()
            .filter(|(_, s)| {
                matches!(
                    s.kind,
                    StageKind::DirectionalCoupler {
                        side_input: SideInput::Cavity(_),
                        ..
                    }
                )
            })
            .map(|(i, _)| i)
            .collect();
        match found.as_slice() {
            [i] => Ok(*i),
            [] => Err(Error::config(
                "chain",
                "no cavity plane (coupler side_input = cavity)",
            )),
            _ => Err(Error::config(
                "chain",
                format!("{} cavity planes; exactly one is required", found.len()),
            )),
        }
    }
}

/// Per-evaluation substitutions applied to a [`LinearChain`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub cavity_t_internal: Option<f64>,
    pub cavity_gamma: Option<f64>,
    /// Added to the gain of the LNA (first amplifier after the cavity, or the
    /// first amplifier when the chain has no cavity).
    pub gain_offset_db: f64,
    /// Added to the LNA's input-referred noise.
    pub extra_noise_k: f64,
}

#[derive(Debug, Clone)]
enum LinearStage {
    Affine(Affine),
    Coupler {
        coupling_loss_db: f64,
        through_loss_db: f64,
        phys_temp_k: f64,
        line_port: CouplerPort,
        side_input: SideInput,
    },
    Amplifier {
        gain_db: f64,
        noise_temp_k: f64,
        is_lna: bool,
    },
}

/// A validated chain with every gradient cable precomputed as an affine map.
#[derive(Debug, Clone)]
pub struct LinearChain {
    stages: Vec<LinearStage>,
}

impl LinearChain {
    pub fn new(stages: &[ChainStage]) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::config("chain", "stage list is empty"));
        }
        let cavity_at = stages.iter().position(|s| {
            matches!(
                s.kind,
                StageKind::DirectionalCoupler {
                    side_input: SideInput::Cavity(_),
                    ..
                }
            )
        });
        let lna_at = stages
            .iter()
            .enumerate()
            .skip(cavity_at.unwrap_or(0))
            .find(|(_, s)| matches!(s.kind, StageKind::Amplifier { .. }))
            .map(|(i, _)| i);

        let mut out = Vec::with_capacity(stages.len());
        for (i, stage) in stages.iter().enumerate() {
            stage.validate()?;
            out.push(match &stage.kind {
                StageKind::UniformLossy {
                    loss_db,
                    phys_temp_k,
                } => {
                    let l = transmission_from_loss_db(*loss_db);
                    LinearStage::Affine(Affine {
                        slope: l,
                        offset: (1.0 - l) * phys_temp_k,
                    })
                }
                StageKind::GradientCable {
                    loss_db,
                    phys_temp_in_k,
                    phys_temp_out_k,
                    n_steps,
                } => LinearStage::Affine(gradient_cable_map(
                    *loss_db,
                    *phys_temp_in_k,
                    *phys_temp_out_k,
                    *n_steps,
                )),
                StageKind::DirectionalCoupler {
                    coupling_loss_db,
                    through_loss_db,
                    phys_temp_k,
                    line_port,
                    side_input,
                    ..
                } => LinearStage::Coupler {
                    coupling_loss_db: *coupling_loss_db,
                    through_loss_db: *through_loss_db,
                    phys_temp_k: *phys_temp_k,
                    line_port: *line_port,
                    side_input: *side_input,
                },
                StageKind::Amplifier {
                    gain_db,
                    noise_temp_k,
                } => LinearStage::Amplifier {
                    gain_db: *gain_db,
                    noise_temp_k: *noise_temp_k,
                    is_lna: Some(i) == lna_at,
                },
            });
        }
        Ok(Self { stages: out })
    }

    /// Noise temperature at the chain output for the given source temperature.
    pub fn output(&self, source_temp: f64, overrides: &Overrides) -> f64 {
        let mut t = source_temp;
        for stage in &self.stages {
            t = match stage {
                LinearStage::Affine(map) => map.apply(t),
                LinearStage::Coupler {
                    coupling_loss_db,
                    through_loss_db,
                    phys_temp_k,
                    line_port,
                    side_input,
                } => {
                    let side = match side_input {
                        SideInput::NoiseTemp(v) => *v,
                        SideInput::Cavity(c) => {
                            let t_int = overrides.cavity_t_internal.unwrap_or(c.t_internal_k);
                            let g = overrides.cavity_gamma.unwrap_or(c.gamma);
                            t_int * (1.0 - g * g) + c.t_incident_k * g * g
                        }
                    };
                    coupler_output(
                        *line_port,
                        t,
                        side,
                        *through_loss_db,
                        *coupling_loss_db,
                        *phys_temp_k,
                    )
                }
                LinearStage::Amplifier {
                    gain_db,
                    noise_temp_k,
                    is_lna,
                } => {
                    if *is_lna {
                        (t + noise_temp_k + overrides.extra_noise_k)
                            * gain_linear(gain_db + overrides.gain_offset_db)
                    } else {
                        (t + noise_temp_k) * gain_linear(*gain_db)
                    }
                }
            };
        }
        t
    }
}
