use spincool_core::config::Config;
use spincool_core::yfactor::{
    fit_tm, lna_mismatch_tm_bound, monte_carlo_ci, FitOptions, MeasurementRecord, RecordSigma,
    ReflectionReading,
};
use spincool_core::Error;

const CONFIG: &str = r#"
[chain]
frequency_hz = 10.98e9
bandwidth_hz = 9.1e5
source_temp_off_k = 294
source_temp_on_k = 11760
ambient_temp_k = 5
sigma = { source_temp_on_k = 20 }

[[chain.stages]]
label = "cable"
type = "gradient_cable"
loss_db = 1.3
phys_temp_in_k = 294
phys_temp_out_k = "ambient"
sigma = { loss_db = 0.1 }

[[chain.stages]]
label = "coupler"
type = "directional_coupler"
coupling_loss_db = 10.0
through_loss_db = 0.6
phys_temp_k = "ambient"
cavity = { t_internal_k = "ambient", gamma = 0.41, t_incident_k = "ambient" }
sigma = { coupling_loss_db = 0.1, t_incident_k = 1 }

[[chain.stages]]
label = "lna"
type = "amplifier"
gain_db = 31
noise_temp_k = 3
sigma = { gain_db = 0.5, noise_temp_k = 1 }

[[chain.stages]]
label = "tail"
type = "uniform_lossy"
loss_db = 4.0
phys_temp_k = 294
"#;

fn record() -> MeasurementRecord {
    let mut rec = MeasurementRecord::new("5K", 5.0, 0.17, -11.9, -3.8);
    rec.coupler_db = Some(10.0);
    rec.delta_lna_gain_db = -0.31;
    rec.sigma = RecordSigma {
        delta_lna_gain_db: 0.04,
        delta_y_db: 0.01,
        s11_dark_db: 0.2,
        s11_light_db: 0.2,
        ..Default::default()
    };
    rec
}

fn opts() -> FitOptions {
    FitOptions::with_reading(ReflectionReading::Power)
}

fn spec() -> spincool_core::config::ChainSpec {
    Config::from_toml_str(CONFIG).unwrap().chain.unwrap()
}

#[test]
fn zero_sigma_collapses_the_interval() {
    let mut spec = spec();
    spec.scale_sigmas(0.0);
    assert!(!spec.has_uncertainty());
    let mut rec = record();
    rec.sigma = RecordSigma::default();
    let r = monte_carlo_ci(&spec, &rec, &opts(), 200, 3).unwrap();
    assert_eq!(r.ci_low, r.t_m_nominal);
    assert_eq!(r.ci_high, r.t_m_nominal);
    assert_eq!(r.t_m, r.t_m_nominal);
    assert_eq!(r.n_infeasible, 0);
}

#[test]
fn seeds_are_reproducible_and_distinct() {
    let (s, rec) = (spec(), record());
    let a = monte_carlo_ci(&s, &rec, &opts(), 300, 11).unwrap();
    let b = monte_carlo_ci(&s, &rec, &opts(), 300, 11).unwrap();
    let c = monte_carlo_ci(&s, &rec, &opts(), 300, 12).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.ci_low, c.ci_low);
}

#[test]
fn wider_inputs_give_wider_intervals() {
    let (narrow, rec) = (spec(), record());
    let mut wide = narrow.clone();
    wide.scale_sigmas(2.0);
    let mut wide_rec = rec.clone();
    let s = &mut wide_rec.sigma;
    s.delta_lna_gain_db *= 2.0;
    s.delta_y_db *= 2.0;
    s.s11_dark_db *= 2.0;
    s.s11_light_db *= 2.0;
    for seed in 0..5 {
        let a = monte_carlo_ci(&narrow, &rec, &opts(), 400, seed).unwrap();
        let b = monte_carlo_ci(&wide, &wide_rec, &opts(), 400, seed).unwrap();
        assert!(
            b.half_width() > a.half_width(),
            "seed {seed}: {} vs {}",
            b.half_width(),
            a.half_width()
        );
    }
}

#[test]
fn interval_brackets_the_median() {
    let r = monte_carlo_ci(&spec(), &record(), &opts(), 500, 1).unwrap();
    assert!(r.ci_low < r.t_m && r.t_m < r.ci_high);
    assert!(r.warnings.is_empty());
}

#[test]
fn too_few_samples_is_a_domain_error() {
    let err = monte_carlo_ci(&spec(), &record(), &opts(), 10, 1).unwrap_err();
    assert!(matches!(err, Error::Domain(_)));
}

#[test]
fn degraded_lna_never_raises_the_estimate() {
    let table = [(0.0, 2.5), (0.6, 6.0), (0.8, 10.0)];
    let spec = spec();
    for (ambient, dy, s11d, s11l) in [
        (5.0, 0.17, -11.9, -3.8),
        (10.0, 0.22, -14.8, -4.7),
        (30.0, 0.83, -20.0, -7.2),
    ] {
        let mut rec = MeasurementRecord::new("r", ambient, dy, s11d, s11l);
        rec.coupler_db = Some(10.0);
        let nominal = fit_tm(&spec, &rec, ReflectionReading::Power);
        let bound = lna_mismatch_tm_bound(&spec, &rec, &opts(), &table).unwrap();
        if let Ok(fit) = nominal {
            assert!(
                bound.t_m_bound <= fit.t_m,
                "{ambient} K: {} > {}",
                bound.t_m_bound,
                fit.t_m
            );
        }
        assert!(bound.extra_noise_k >= 0.0);
    }
}
