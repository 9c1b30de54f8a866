//! Command adapters behind the `spincool` binary.
//!
//! Each command loads one configuration file, runs the matching model and
//! returns a [`Report`] of named tables, which is then rendered as CSV, JSON
//! or an aligned text table.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{Map, Value};

use spincool_core::cavity::{
    coupling_coefficient, gamma_from_s11, kappa_ext_from_coupling, CavityPort,
};
use spincool_core::config::{ChainSpec, Config, ScenarioSpec};
use spincool_core::cooling::{
    calibrate_gamma_spins, fit_external_temp, q_sweep, steady_mode_temperature,
    table1_calculated_column, CoolingScenario,
};
use spincool_core::noise_chain::noise_power_dbm;
use spincool_core::spins::{
    linewidth_from_t2star, occupancy, populations_from_echo_ratios, spin_temperature,
    thermal_populations, Convention, NvLevels, SpinEnsemble, Transition,
};
use spincool_core::yfactor::{
    fit_tm_with, lna_mismatch_tm_bound, monte_carlo_ci, FitOptions, FitResult, MeasurementRecord,
};
use spincool_core::{Error, Result};

/// Exit status for a malformed or inconsistent configuration.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for a numerical solver failure.
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "spincool",
    version,
    about = "Receive-chain noise, Y-factor inversion and anti-maser cooling models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Chain,
    Fit,
    Predict,
    Sweep,
    Spins,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Noise temperature at every plane of the receive chain
    Chain(RunArgs),
    /// Invert measured ΔY records to the cavity noise temperature
    Fit(RunArgs),
    /// Steady-state mode temperature at the configured Q values
    Predict(RunArgs),
    /// Mode temperature and photon number versus unloaded Q
    Sweep(RunArgs),
    /// NV populations, spin temperatures and photon occupancies
    Spins(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    #[default]
    Table,
}

#[derive(Debug, Clone, clap::Args)]
pub struct RunArgs {
    /// Configuration file (TOML, or JSON with a .json extension)
    #[arg(long)]
    pub config: PathBuf,
    /// Write to this file instead of standard output
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Monte-Carlo seed; overrides the configuration
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte-Carlo draws per record; overrides the configuration
    #[arg(long)]
    pub samples: Option<usize>,
}

impl Command {
    pub fn kind(&self) -> CommandKind {
        match self {
            Command::Chain(_) => CommandKind::Chain,
            Command::Fit(_) => CommandKind::Fit,
            Command::Predict(_) => CommandKind::Predict,
            Command::Sweep(_) => CommandKind::Sweep,
            Command::Spins(_) => CommandKind::Spins,
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Chain(a)
            | Command::Fit(a)
            | Command::Predict(a)
            | Command::Sweep(a)
            | Command::Spins(a) => a,
        }
    }
}

/// Exit status for an error returned by [`execute`].
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Solver(_) => EXIT_SOLVER,
        _ => EXIT_CONFIG,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn opt(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }

    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v:?}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn pretty(&self) -> String {
        match self {
            Cell::Num(v) => round_sig(*v, 4),
            other => other.csv(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Int(v) => Value::from(*v),
            Cell::Text(s) => Value::from(s.clone()),
            Cell::Bool(b) => Value::from(*b),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// `v` rounded to `sig` significant figures, without exponent for ordinary magnitudes.
fn round_sig(v: f64, sig: i32) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let mag = v.abs().log10().floor() as i32;
    if !(-3..6).contains(&mag) {
        return format!("{:.*e}", (sig - 1) as usize, v);
    }
    let decimals = (sig - 1 - mag).max(0) as usize;
    format!("{v:.decimals$}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// One CSV block per table; blocks after the first are preceded by a blank
    /// line and a `# name` line.
    pub fn to_csv(&self) -> Result<String> {
        let mut out = Vec::new();
        for (i, table) in self.tables.iter().enumerate() {
            if i > 0 {
                out.extend_from_slice(format!("\n# {}\n", table.name).as_bytes());
            }
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&table.columns).map_err(csv_err)?;
            for row in &table.rows {
                w.write_record(row.iter().map(Cell::csv)).map_err(csv_err)?;
            }
            out.extend(w.into_inner().map_err(|e| csv_err(e.into_error().into()))?);
        }
        Ok(String::from_utf8(out).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> String {
        let mut root = Map::new();
        for table in &self.tables {
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|row| {
                    Value::Object(
                        table
                            .columns
                            .iter()
                            .zip(row)
                            .map(|(c, v)| (c.clone(), v.json()))
                            .collect(),
                    )
                })
                .collect();
            root.insert(table.name.clone(), Value::Array(rows));
        }
        if !self.notes.is_empty() {
            root.insert("notes".into(), Value::from(self.notes.clone()));
        }
        let mut s = serde_json::to_string_pretty(&Value::Object(root)).expect("report serialises");
        s.push('\n');
        s
    }

    pub fn to_pretty(&self) -> String {
        let mut out = String::new();
        for table in &self.tables {
            out.push_str(&format!("== {} ==\n", table.name));
            let cells: Vec<Vec<String>> = table
                .rows
                .iter()
                .map(|r| r.iter().map(Cell::pretty).collect())
                .collect();
            let widths: Vec<usize> = (0..table.columns.len())
                .map(|j| {
                    cells
                        .iter()
                        .map(|r| r[j].chars().count())
                        .chain([table.columns[j].chars().count()])
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            let line = |items: &[String]| {
                items
                    .iter()
                    .zip(&widths)
                    .map(|(s, w)| format!("{s:>w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            out.push_str(&line(&table.columns));
            out.push('\n');
            for r in &cells {
                out.push_str(line(r).trim_end());
                out.push('\n');
            }
            out.push('\n');
        }
        for note in &self.notes {
            out.push_str(&format!("note: {note}\n"));
        }
        out
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => Ok(self.to_json()),
            Format::Table => Ok(self.to_pretty()),
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io {
        path: "<csv>".into(),
        source: std::io::Error::other(e),
    }
}

fn missing(block: &str, path: &Path) -> Error {
    Error::Config {
        context: path.display().to_string(),
        message: format!("missing required `{block}` block"),
    }
}

/// Runs one command and returns the rendered output; writes it to
/// `--output` when given.
pub fn execute(command: &Command) -> Result<String> {
    let args = command.args();
    let config = Config::load(&args.config)?;
    let report = match command.kind() {
        CommandKind::Chain => cmd_chain(&config, &args.config)?,
        CommandKind::Fit => cmd_fit(&config, &args.config, args.seed, args.samples)?,
        CommandKind::Predict => cmd_predict(&config, &args.config)?,
        CommandKind::Sweep => cmd_sweep(&config, &args.config)?,
        CommandKind::Spins => cmd_spins(&config, &args.config)?,
    };
    let text = report.render(args.format)?;
    if let Some(path) = &args.output {
        std::fs::write(path, &text).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(text)
}

/// Per-plane OFF/ON noise temperatures and the analyzer noise power.
pub fn cmd_chain(config: &Config, path: &Path) -> Result<Report> {
    let spec = config
        .chain
        .as_ref()
        .ok_or_else(|| missing("chain", path))?;
    let chain = spec.nominal_chain()?;
    let off = chain.propagate(chain.source_temp_off_k)?;
    let on = chain.propagate(chain.source_temp_on_k)?;

    let mut planes = Table::new(
        "planes",
        &["plane", "label", "noise_temp_off_k", "noise_temp_on_k"],
    );
    for (a, b) in off.iter().zip(&on) {
        planes.push(vec![
            Cell::Int(a.plane_index as u64),
            a.label.as_str().into(),
            a.noise_temp.into(),
            b.noise_temp.into(),
        ]);
    }
    let t_off = off.last().expect("chain has planes").noise_temp;
    let t_on = on.last().expect("chain has planes").noise_temp;
    let mut power = Table::new(
        "noise_power",
        &[
            "bandwidth_hz",
            "noise_power_off_dbm",
            "noise_power_on_dbm",
            "y_factor_db",
        ],
    );
    power.push(vec![
        chain.bandwidth_hz.into(),
        noise_power_dbm(t_off, chain.bandwidth_hz)?.into(),
        noise_power_dbm(t_on, chain.bandwidth_hz)?.into(),
        (10.0 * (t_on / t_off).log10()).into(),
    ]);
    let mut tables = vec![planes, power];
    if let Some(port) = &config.cavity {
        tables.push(cavity_table(port)?);
    }
    Ok(Report {
        tables,
        notes: Vec::new(),
    })
}

/// Reflection and coupling rates of the `[cavity]` block, dark and light.
fn cavity_table(port: &CavityPort) -> Result<Table> {
    let mut table = Table::new(
        "cavity",
        &[
            "state",
            "s11_db",
            "gamma",
            "beta",
            "kappa_int_hz",
            "kappa_ext_hz",
            "loaded_q",
        ],
    );
    let k_int = port.kappa_internal();
    for (state, s11, regime, k_ext) in [
        (
            "dark",
            port.s11_db_dark,
            port.regime_dark,
            port.kappa_ext_dark()?,
        ),
        (
            "light",
            port.s11_db_light,
            port.regime_light,
            port.kappa_ext_light()?,
        ),
    ] {
        let gamma = gamma_from_s11(s11)?;
        table.push(vec![
            state.into(),
            s11.into(),
            gamma.into(),
            coupling_coefficient(gamma, regime)?.into(),
            k_int.into(),
            k_ext.into(),
            (port.f0_hz / (k_int + k_ext)).into(),
        ]);
    }
    Ok(table)
}

/// One row per measurement record: `T_m`, its interval and diagnostics.
/// Records that cannot be fitted are flagged in `status` rather than failing
/// the run.
pub fn cmd_fit(
    config: &Config,
    path: &Path,
    seed: Option<u64>,
    samples: Option<usize>,
) -> Result<Report> {
    let spec = config
        .chain
        .as_ref()
        .ok_or_else(|| missing("chain", path))?;
    if config.measurements.is_empty() {
        return Err(missing("measurements", path));
    }
    let fit = &config.fit;
    let seed = seed.unwrap_or(fit.seed);
    let samples = samples.unwrap_or(fit.samples);
    let opts = FitOptions::with_reading(fit.reflection_reading);

    let mut columns = vec![
        "label",
        "ambient_temp_k",
        "coupler_db",
        "t_m_k",
        "ci_low_k",
        "ci_high_k",
        "half_width_k",
        "t_m_nominal_k",
        "published_t_m_k",
        "published_sigma_k",
        "deviation_k",
        "residual_db",
        "delta_noise_sa_pred_db",
        "delta_noise_sa_meas_db",
        "n_samples",
        "n_infeasible",
        "seed",
    ];
    if fit.lna_mismatch.is_some() {
        columns.extend([
            "lna_bound_t_m_k",
            "lna_bound_extra_noise_k",
            "lna_bound_floored",
        ]);
    }
    let variant_cols: Vec<String> = fit
        .variants
        .iter()
        .map(|v| format!("{}_t_m_k", v.name))
        .collect();
    columns.extend(variant_cols.iter().map(String::as_str));
    if !fit.variants.is_empty() {
        columns.push("variant_spread_k");
    }
    columns.extend(["status", "warnings"]);
    let mut table = Table::new("fit", &columns);
    let mut notes = Vec::new();

    for (i, rec) in config.measurements.iter().enumerate() {
        let rec_seed = seed.wrapping_add(i as u64);
        let mut row = vec![
            rec.label.as_str().into(),
            rec.ambient_temp_k.into(),
            Cell::opt(rec.coupler_db),
        ];
        let point_only = !spec.has_uncertainty() && !rec.has_uncertainty();
        let result = if point_only {
            point_estimate(spec, rec, &opts, rec_seed)
        } else {
            monte_carlo_ci(spec, rec, &opts, samples, rec_seed)
        };
        let (t_nominal, status, warnings) = match &result {
            Ok(r) => {
                let interval = |v: f64| if point_only { Cell::Empty } else { v.into() };
                row.extend([
                    r.t_m.into(),
                    interval(r.ci_low),
                    interval(r.ci_high),
                    interval(r.half_width()),
                    r.t_m_nominal.into(),
                    Cell::opt(rec.published_t_m_k),
                    Cell::opt(rec.published_sigma_k),
                    Cell::opt(rec.published_t_m_k.map(|p| r.t_m - p)),
                    r.residual.into(),
                    r.delta_noise_sa_db.into(),
                    Cell::opt(rec.delta_noise_sa_db),
                    Cell::Int(r.n_samples as u64),
                    Cell::Int(r.n_infeasible as u64),
                    Cell::Int(r.seed),
                ]);
                (Some(r.t_m_nominal), "ok".to_string(), r.warnings.join("; "))
            }
            Err(e @ (Error::Infeasible(_) | Error::Solver(_))) => {
                row.extend(std::iter::repeat_n(Cell::Empty, 5));
                row.extend([
                    Cell::opt(rec.published_t_m_k),
                    Cell::opt(rec.published_sigma_k),
                ]);
                row.extend(std::iter::repeat_n(Cell::Empty, 3));
                row.extend([
                    Cell::opt(rec.delta_noise_sa_db),
                    Cell::Int(samples as u64),
                    Cell::Empty,
                    Cell::Int(rec_seed),
                ]);
                (None, format!("flagged: {e}"), String::new())
            }
            Err(e) => {
                return Err(Error::Config {
                    context: format!("measurement '{}'", rec.label),
                    message: e.to_string(),
                })
            }
        };

        if let Some(table_pts) = &fit.lna_mismatch {
            match lna_mismatch_tm_bound(spec, rec, &opts, table_pts) {
                Ok(b) => {
                    row.extend([
                        b.t_m_bound.into(),
                        b.extra_noise_k.into(),
                        Cell::Bool(b.floored),
                    ]);
                    if b.table_clamped {
                        notes.push(format!("{}: |Γ| outside the LNA table, clamped", rec.label));
                    }
                }
                Err(_) => row.extend([Cell::Empty, Cell::Empty, Cell::Empty]),
            }
        }

        if !fit.variants.is_empty() {
            let mut values: Vec<f64> = t_nominal.into_iter().collect();
            for v in &fit.variants {
                let vopts = FitOptions {
                    reading: v.reflection_reading.unwrap_or(opts.reading),
                    coupling_offset_db: v.coupling_loss_offset_db,
                    ..opts
                };
                match fit_tm_with(spec, rec, &vopts) {
                    Ok(f) => {
                        values.push(f.t_m);
                        row.push(f.t_m.into());
                    }
                    Err(_) => row.push(Cell::Empty),
                }
            }
            let spread = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - values.iter().cloned().fold(f64::INFINITY, f64::min);
            row.push(if values.len() > 1 {
                spread.into()
            } else {
                Cell::Empty
            });
        }
        row.extend([status.into(), warnings.into()]);
        table.push(row);
    }
    Ok(Report {
        tables: vec![table],
        notes,
    })
}

/// Fit without any uncertainty to propagate: no draws, no interval.
fn point_estimate(
    spec: &ChainSpec,
    rec: &MeasurementRecord,
    opts: &FitOptions,
    seed: u64,
) -> Result<FitResult> {
    let f = fit_tm_with(spec, rec, opts)?;
    Ok(FitResult {
        label: rec.label.clone(),
        t_m: f.t_m,
        t_m_nominal: f.t_m,
        ci_low: f.t_m,
        ci_high: f.t_m,
        n_samples: 0,
        n_infeasible: 0,
        seed,
        residual: f.residual_db,
        delta_noise_sa_db: f.delta_noise_sa_db,
        warnings: Vec::new(),
    })
}

fn base_scenario(s: &ScenarioSpec) -> Result<CoolingScenario> {
    let scenario = CoolingScenario {
        kappa_internal: s.frequency_hz / s.q_unloaded,
        kappa_external: s.kappa_external_hz,
        gamma_spins: 0.0,
        t_ambient: s.t_ambient_k,
        t_external: s.t_external_k.unwrap_or(s.t_ambient_k),
        t_spin: s.t_spin_k,
        frequency: s.frequency_hz,
        convention: s.convention,
    };
    let gamma = match (s.gamma_spins_hz, s.calibrate_to_k) {
        (Some(g), None) => g,
        (None, Some(target)) => calibrate_gamma_spins(target, &scenario)?,
        (None, None) => 0.0,
        (Some(_), Some(_)) => {
            return Err(Error::Config {
                context: "scenario".into(),
                message: "give only one of `gamma_spins_hz` and `calibrate_to_k`".into(),
            })
        }
    };
    let scenario = scenario.with_gamma_spins(gamma);
    steady_mode_temperature(&scenario)?;
    Ok(scenario)
}

/// Mode temperature at the configured Q values, plus the with/without-port
/// calibration rows.
pub fn cmd_predict(config: &Config, path: &Path) -> Result<Report> {
    let spec = config
        .scenario
        .as_ref()
        .ok_or_else(|| missing("scenario", path))?;
    let base = base_scenario(spec)?;
    let q_values = if spec.q_values.is_empty() {
        vec![spec.q_unloaded]
    } else {
        spec.q_values.clone()
    };

    let mut predict = Table::new(
        "predict",
        &[
            "q",
            "kappa_int_hz",
            "gamma_spins_hz",
            "gamma_over_kappa_int",
            "t_mode_k",
            "n_rj",
            "n_planck",
        ],
    );
    for p in q_sweep(&base, &q_values)? {
        predict.push(vec![
            p.q.into(),
            p.kappa_int_hz.into(),
            base.gamma_spins.into(),
            (base.gamma_spins / p.kappa_int_hz).into(),
            p.t_mode_k.into(),
            p.n_rj.into(),
            p.n_planck.into(),
        ]);
    }
    let mut tables = vec![predict];

    if !spec.calibration_rows.is_empty() {
        let mut cal = Table::new(
            "calibration",
            &[
                "t_ambient_k",
                "gamma_spins_hz",
                "gamma_over_kappa_int",
                "kappa_ext_hz",
                "t_external_k",
                "t_external_fitted",
                "t_mode_with_k",
                "t_mode_without_k",
            ],
        );
        let mut scenarios = Vec::new();
        let mut fitted = Vec::new();
        for row in &spec.calibration_rows {
            let mut s = base;
            s.t_ambient = row.t_ambient_k;
            s.t_external = row.t_ambient_k;
            s.kappa_external = 0.0;
            s.gamma_spins = calibrate_gamma_spins(row.without_target_k, &s)?;
            if let Some(s11) = row.s11_light_db {
                s.kappa_external =
                    kappa_ext_from_coupling(gamma_from_s11(s11)?, row.regime, s.kappa_internal)?;
            }
            let was_fitted = match row.with_target_k {
                Some(target) if s.kappa_external > 0.0 => {
                    s.t_external = fit_external_temp(target, &s)?;
                    true
                }
                _ => false,
            };
            scenarios.push(s);
            fitted.push(was_fitted);
        }
        for ((s, (with, without)), was_fitted) in scenarios
            .iter()
            .zip(table1_calculated_column(&scenarios)?)
            .zip(fitted)
        {
            cal.push(vec![
                s.t_ambient.into(),
                s.gamma_spins.into(),
                (s.gamma_spins / s.kappa_internal).into(),
                s.kappa_external.into(),
                s.t_external.into(),
                Cell::Bool(was_fitted),
                with.into(),
                without.into(),
            ]);
        }
        tables.push(cal);
    }
    Ok(Report {
        tables,
        notes: Vec::new(),
    })
}

/// `q,kappa_int_hz,t_mode_k,n_planck,n_rj` over the sweep grid.
pub fn cmd_sweep(config: &Config, path: &Path) -> Result<Report> {
    let spec = config
        .scenario
        .as_ref()
        .ok_or_else(|| missing("scenario", path))?;
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| missing("sweep", path))?;
    let base = base_scenario(spec)?;
    let mut table = Table::new(
        "sweep",
        &["q", "kappa_int_hz", "t_mode_k", "n_planck", "n_rj"],
    );
    for p in q_sweep(&base, &sweep.grid()?)? {
        table.push(vec![
            p.q.into(),
            p.kappa_int_hz.into(),
            p.t_mode_k.into(),
            p.n_planck.into(),
            p.n_rj.into(),
        ]);
    }
    Ok(Report {
        tables: vec![table],
        notes: Vec::new(),
    })
}

/// Thermal and pumped populations, per-transition spin temperatures and
/// photon occupancies.
pub fn cmd_spins(config: &Config, path: &Path) -> Result<Report> {
    let spec = config
        .spins
        .as_ref()
        .ok_or_else(|| missing("spins", path))?;
    let field = match (spec.field_t, spec.transition_freq_hz) {
        (Some(b), _) => b,
        (None, Some(f)) => NvLevels::field_for_upper_transition(f),
        (None, None) => {
            return Err(Error::Config {
                context: "spins".into(),
                message: "give `field_t` or `transition_freq_hz`".into(),
            })
        }
    };
    let levels = NvLevels::with_field(field);
    let thermal = thermal_populations(&levels, spec.temperature_k)?;
    let light = populations_from_echo_ratios(
        &levels,
        spec.temperature_k,
        spec.echo_ratio_plus,
        spec.echo_ratio_minus,
    )?;

    let mut pops = Table::new("populations", &["state", "p_minus", "p_zero", "p_plus"]);
    for (name, p) in [("thermal", thermal), ("light", light)] {
        pops.push(vec![
            name.into(),
            p.p_minus.into(),
            p.p_zero.into(),
            p.p_plus.into(),
        ]);
    }

    let linewidth = spec.t2star_s.map(linewidth_from_t2star).transpose()?;
    let mut trans = Table::new(
        "transitions",
        &[
            "transition",
            "frequency_hz",
            "spin_temp_thermal_k",
            "spin_temp_light_k",
            "polarization_light",
            "absorption_rate_hz",
            "regime",
        ],
    );
    for (name, t) in [
        ("zero_to_plus", Transition::ZeroToPlus),
        ("minus_to_zero", Transition::MinusToZero),
    ] {
        let f = t.frequency(&levels)?;
        let (lo, up) = t.lower_upper(&levels, &thermal);
        let ts_thermal = spin_temperature(lo, up, f)?.kelvin();
        let (lo, up) = t.lower_upper(&levels, &light);
        let ts_light = spin_temperature(lo, up, f)?.kelvin();
        let (rate, regime) = match (linewidth, spec.g_ensemble_hz) {
            (Some(lw), Some(g)) => {
                let e = SpinEnsemble::new(&levels, light, t, lw, g)?;
                (
                    Cell::Num(e.collective_absorption_rate),
                    Cell::Text(format!("{:?}", e.regime).to_lowercase()),
                )
            }
            _ => (Cell::Empty, Cell::Empty),
        };
        trans.push(vec![
            name.into(),
            f.into(),
            ts_thermal.into(),
            ts_light.into(),
            (lo - up).into(),
            rate,
            regime,
        ]);
    }

    let mut tables = vec![pops, trans];
    if !spec.occupancy_temps_k.is_empty() {
        let freq = Transition::ZeroToPlus.frequency(&levels)?;
        let mut occ = Table::new("occupancy", &["temp_k", "frequency_hz", "n_rj", "n_planck"]);
        for &t in &spec.occupancy_temps_k {
            occ.push(vec![
                t.into(),
                freq.into(),
                occupancy(t, freq, Convention::RayleighJeans)?.into(),
                occupancy(t, freq, Convention::Planck)?.into(),
            ]);
        }
        tables.push(occ);
    }
    let mut notes = Vec::new();
    if let Some(lw) = linewidth {
        notes.push(format!("dephasing linewidth {:.4e} Hz", lw));
    }
    Ok(Report { tables, notes })
}
