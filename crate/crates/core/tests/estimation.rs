use opa_squeeze::estimation::{fit, model_prediction, FitConfig, ResidualDomain};
use opa_squeeze::synth::{synth_pump_sweep, SweepSpec, TraceSpec};
use opa_squeeze::units::deg_to_rad;
use opa_squeeze::{CavityConstants, Dataset, Error, ErrorClass, MeasurementPoint, Quadrature, SqueezerParams};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn truth() -> SqueezerParams {
    SqueezerParams {
        efficiency: 0.965,
        threshold_power: 0.221,
        phase_jitter: deg_to_rad(0.66),
        cavity: CavityConstants::new(0.10, 0.001, 0.0798).unwrap(),
    }
}

fn sweep(seed: u64, repeats: usize) -> SweepSpec {
    SweepSpec {
        pump_powers: (0..12).map(|k| 0.006 + 0.174 * k as f64 / 11.0).collect(),
        frequency: 5e6,
        pump_jitter_rel: 0.03,
        repeats,
        fallback_sigma_db: 0.3,
        trace: TraceSpec {
            n_points: 100,
            rbw: 300e3,
            vbw: 300.0,
            n_averages: 1,
            relative_scatter: Some(0.0715),
            dark_level: 0.0,
            seed,
        },
    }
}

fn noisy(seed: u64) -> Dataset {
    synth_pump_sweep(&truth(), &sweep(seed, 1)).unwrap()
}

fn values(p: &SqueezerParams) -> [f64; 3] {
    [p.efficiency, p.threshold_power, p.phase_jitter]
}

fn assert_close(a: [f64; 3], b: [f64; 3], rel: f64) {
    for k in 0..3 {
        let scale = a[k].abs().max(b[k].abs()).max(1e-12);
        assert!((a[k] - b[k]).abs() <= rel * scale, "parameter {k}: {} vs {}", a[k], b[k]);
    }
}

#[test]
fn chi_squared_never_increases_with_more_iterations() {
    let data = noisy(3);
    let mut previous = f64::INFINITY;
    for max_iterations in 1..=30 {
        let config = FitConfig {
            max_iterations,
            ..FitConfig::default()
        };
        let result = fit(&data, &config).unwrap();
        assert!(result.chi_squared <= previous, "iteration {max_iterations}");
        previous = result.chi_squared;
    }
}

#[test]
fn point_order_does_not_matter() {
    let data = noisy(5);
    let reference = fit(&data, &FitConfig::default()).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for _ in 0..5 {
        let mut shuffled = data.clone();
        shuffled.points.shuffle(&mut rng);
        let result = fit(&shuffled, &FitConfig::default()).unwrap();
        assert_close(values(&result.params), values(&reference.params), 1e-7);
        assert!((result.chi_squared - reference.chi_squared).abs() <= 1e-8 * reference.chi_squared);
    }
}

#[test]
fn threshold_scales_with_pump_units() {
    let data = noisy(8);
    let base = fit(&data, &FitConfig::default()).unwrap();
    for k in [0.5, 3.0, 1000.0] {
        let mut scaled = data.clone();
        for p in &mut scaled.points {
            p.pump_power *= k;
            p.sigma_pump *= k;
        }
        let result = fit(&scaled, &FitConfig::default()).unwrap();
        let mut expected = values(&base.params);
        expected[1] *= k;
        assert_close(values(&result.params), expected, 1e-6);
        assert!((result.std_errors[1] / k - base.std_errors[1]).abs() <= 1e-5 * base.std_errors[1]);
    }
}

#[test]
fn fixing_the_jitter_cannot_lower_chi_squared() {
    for seed in 1..=5 {
        let data = noisy(seed);
        let free = fit(&data, &FitConfig::default()).unwrap();
        for theta_deg in [0.0, 0.66, 2.0] {
            let fixed = fit(
                &data,
                &FitConfig {
                    fixed_phase_jitter: Some(deg_to_rad(theta_deg)),
                    ..FitConfig::default()
                },
            )
            .unwrap();
            assert_eq!(fixed.dof, free.dof + 1);
            assert_eq!(fixed.std_errors[2], 0.0);
            assert!(fixed.chi_squared >= free.chi_squared * (1.0 - 1e-9), "seed {seed}, theta {theta_deg}");
        }
    }
}

#[test]
fn scatter_of_estimates_matches_reported_errors() {
    let reps = 60;
    let mut estimates: Vec<[f64; 3]> = Vec::new();
    let mut errors: Vec<[f64; 3]> = Vec::new();
    for seed in 1000..1000 + reps {
        let result = fit(&synth_pump_sweep(&truth(), &sweep(seed, 3)).unwrap(), &FitConfig::default()).unwrap();
        estimates.push(values(&result.params));
        errors.push(result.std_errors);
    }
    for k in 0..3 {
        let mean = estimates.iter().map(|e| e[k]).sum::<f64>() / reps as f64;
        let spread = (estimates.iter().map(|e| (e[k] - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        let typical = errors.iter().map(|e| e[k]).sum::<f64>() / reps as f64;
        let ratio = spread / typical;
        assert!((1.0 / 1.5..=1.5).contains(&ratio), "parameter {k}: spread {spread}, reported {typical}");
    }
}

#[test]
fn both_residual_domains_agree_on_clean_data() {
    let mut data = noisy(1);
    for p in &mut data.points {
        p.value_db = model_prediction(&truth(), p).unwrap();
    }
    for domain in [ResidualDomain::Decibel, ResidualDomain::Linear] {
        let result = fit(
            &data,
            &FitConfig {
                residual_domain: domain,
                ..FitConfig::default()
            },
        )
        .unwrap();
        assert!(result.converged);
        assert_close(values(&result.params), values(&truth()), 1e-6);
    }
}

#[test]
fn invalid_datasets_are_validation_errors() {
    let mut data = noisy(2);
    data.points.truncate(3);
    let err = fit(&data, &FitConfig::default()).unwrap_err();
    assert_eq!(err.class(), ErrorClass::Validation);

    let mut data = noisy(2);
    for p in &mut data.points {
        p.pump_power = 0.1;
    }
    assert!(matches!(fit(&data, &FitConfig::default()), Err(Error::Dataset(_))));
}

fn point(pump: f64, quadrature: Quadrature) -> MeasurementPoint {
    MeasurementPoint {
        pump_power: pump,
        sigma_pump: 0.03 * pump,
        frequency: 5e6,
        quadrature,
        value_db: 0.0,
        sigma_db: 0.3,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn noiseless_data_is_recovered(
        eta in 0.6f64..0.99,
        pthr in 0.15f64..0.6,
        theta_deg in 0.2f64..3.0,
    ) {
        let params = SqueezerParams {
            efficiency: eta,
            threshold_power: pthr,
            phase_jitter: deg_to_rad(theta_deg),
            ..truth()
        };
        let points = (1..=10)
            .flat_map(|k| [Quadrature::Squeezed, Quadrature::Antisqueezed].map(|q| point(0.09 * pthr * k as f64, q)))
            .map(|mut p| {
                p.value_db = model_prediction(&params, &p).unwrap();
                p
            })
            .collect();
        let data = Dataset { points, cavity: params.cavity, metadata: vec![] };
        let result = fit(&data, &FitConfig::default()).unwrap();
        prop_assert!(result.converged);
        let got = values(&result.params);
        let want = values(&params);
        for k in 0..3 {
            prop_assert!(((got[k] - want[k]) / want[k]).abs() < 1e-5, "parameter {}: {} vs {}", k, got[k], want[k]);
        }
    }
}
