use copulaqr::cqr::EstimatorConfig;
use copulaqr::simlab::{
    gen_dgp, imae_and_dispersion, imse, run_experiment, sample_gaussian_copula, true_quantile, type7_quantile,
    CensoringLevel, DgpSpec, DgpTag, EstimatorSpec, ExperimentConfig, COX_BETA,
};
use copulaqr::stats::{kendall_tau, Probability};
use copulaqr::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn p(t: f64) -> Probability {
    Probability::level(t).unwrap()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn column(rows: &[Vec<f64>], j: usize) -> Vec<f64> {
    rows.iter().map(|r| r[j]).collect()
}

#[test]
fn identity_correlation_gives_independent_uniforms() {
    let rows = sample_gaussian_copula(&DMatrix::identity(3, 3), 20_000, &mut rng(1)).unwrap();
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let tau = kendall_tau(&column(&rows, a), &column(&rows, b)).unwrap();
        assert!(tau.abs() < 0.02, "{tau}");
    }
    let mean = column(&rows, 0).iter().sum::<f64>() / 20_000.0;
    assert!((mean - 0.5).abs() < 0.01);
}

#[test]
fn kendall_tau_matches_arcsine_law() {
    for rho in [0.3, 0.5, 0.9] {
        let corr = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
        let rows = sample_gaussian_copula(&corr, 20_000, &mut rng(2)).unwrap();
        let tau = kendall_tau(&column(&rows, 0), &column(&rows, 1)).unwrap();
        let exact = 2.0 / std::f64::consts::PI * f64::asin(rho);
        assert!((tau - exact).abs() < 0.02, "{rho}: {tau} vs {exact}");
    }
}

#[test]
fn sampler_edge_cases() {
    let corr = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
    assert!(sample_gaussian_copula(&corr, 0, &mut rng(0)).unwrap().is_empty());
    let bad = DMatrix::from_row_slice(2, 2, &[1.0, 1.5, 1.5, 1.0]);
    assert!(matches!(
        sample_gaussian_copula(&bad, 5, &mut rng(0)),
        Err(Error::NotPositiveDefinite)
    ));
}

/// `E[lambda_C / (lambda_C + exp(eta))]` style censoring oracle computed by
/// direct Monte Carlo on the latent times.
fn censoring_fraction(spec: &DgpSpec, seed: u64) -> f64 {
    let data = gen_dgp(spec, &mut rng(seed)).unwrap();
    1.0 - data.sample.events() as f64 / data.sample.len() as f64
}

#[test]
fn censoring_proportions_follow_the_stated_laws() {
    // Targets attained by the published constants.
    for (tag, level) in [
        (DgpTag::A, CensoringLevel::Thirty),
        (DgpTag::A, CensoringLevel::Fifty),
        (DgpTag::B, CensoringLevel::Thirty),
        (DgpTag::B, CensoringLevel::Fifty),
        (DgpTag::D, CensoringLevel::Thirty),
        (DgpTag::D, CensoringLevel::Fifty),
        (DgpTag::M2, CensoringLevel::Thirty),
        (DgpTag::M2, CensoringLevel::Fifty),
    ] {
        let spec = DgpSpec::new(tag, 20_000, level).unwrap();
        let got = censoring_fraction(&spec, 3);
        assert!((got - level.fraction()).abs() < 0.02, "{tag} {level}: {got}");
    }
    // The constants for C censor about 28% and 47% under the stated covariate law.
    for (level, rate) in [(CensoringLevel::Thirty, 0.464), (CensoringLevel::Fifty, 1.083)] {
        let spec = DgpSpec::new(DgpTag::C, 20_000, level).unwrap();
        let x = spec.sample_covariates(200_000, &mut rng(4)).unwrap();
        let expected = x
            .iter()
            .map(|xi| rate / (rate + spec.linear_predictor(xi).exp()))
            .sum::<f64>()
            / x.len() as f64;
        let got = censoring_fraction(&spec, 5);
        assert!((got - expected).abs() < 0.01, "{got} vs {expected}");
    }
}

#[test]
fn zero_censoring_observes_every_event() {
    for tag in DgpTag::ALL {
        let spec = DgpSpec::new(tag, 500, CensoringLevel::None).unwrap();
        let data = gen_dgp(&spec, &mut rng(6)).unwrap();
        assert!(data.sample.delta().iter().all(|&d| d));
        assert_eq!(data.sample.y(), &data.latent_t[..]);
        assert_eq!(data.sample.dim(), tag.dim());
    }
}

#[test]
fn observed_times_are_censored_latent_times() {
    let spec = DgpSpec::new(DgpTag::D, 1000, CensoringLevel::Fifty).unwrap();
    let data = gen_dgp(&spec, &mut rng(7)).unwrap();
    for ((&y, &d), &t) in data.sample.y().iter().zip(data.sample.delta()).zip(&data.latent_t) {
        if d {
            assert_eq!(y, t);
        } else {
            assert!(y < t);
        }
    }
}

#[test]
fn generators_are_deterministic() {
    for tag in DgpTag::ALL {
        let spec = DgpSpec::new(tag, 100, *tag.levels().last().unwrap()).unwrap();
        assert_eq!(gen_dgp(&spec, &mut rng(8)).unwrap(), gen_dgp(&spec, &mut rng(8)).unwrap());
    }
}

#[test]
fn closed_form_truths() {
    let a = DgpSpec::new(DgpTag::A, 1, CensoringLevel::None).unwrap();
    assert!((true_quantile(&a, &[0.5, 0.5], p(0.5)).unwrap() - 0.5).abs() < 1e-15);
    assert!((true_quantile(&a, &[0.5, 0.5], p(0.3)).unwrap() - 0.4169).abs() < 1e-4);
    let c = DgpSpec::new(DgpTag::C, 1, CensoringLevel::None).unwrap();
    // beta'x = 1 - 0.75 + 0.5*0.5 + 0.25*0 - 0.6*(0.5/0.6) = 0
    let x = [1.0, 1.0, 0.5, 0.0, 0.5 / 0.6];
    let eta: f64 = x.iter().zip(COX_BETA).map(|(a, b)| a * b).sum();
    assert!(eta.abs() < 1e-15);
    assert!((true_quantile(&c, &x, p(0.5)).unwrap() - 2f64.ln()).abs() < 1e-12);
    let dette = DgpSpec::new(DgpTag::Dette, 1, CensoringLevel::None).unwrap();
    assert!((true_quantile(&dette, &[0.2], p(0.5)).unwrap() - 0.09).abs() < 1e-15);
    assert!(true_quantile(&a, &[0.5], p(0.5)).is_err());
    assert!(true_quantile(&a, &[0.0, 0.5], p(0.5)).is_err());
}

#[test]
fn metric_arithmetic() {
    let truths = [1.0, 2.0];
    assert_eq!(imse(&vec![truths.to_vec(); 3], &truths).unwrap(), 0.0);
    assert!((imse(&[vec![1.1]], &[1.0]).unwrap() - 0.01).abs() < 1e-15);
    let e = 0.25;
    let shifted = vec![vec![1.0 + e, 2.0 - e]; 4];
    assert_eq!(imse(&shifted, &truths).unwrap(), e * e);
    assert_eq!(imae_and_dispersion(&vec![truths.to_vec(); 4], &truths).unwrap(), (0.0, 0.0));

    let est: Vec<Vec<f64>> = [1.0, 2.0, 3.0, 4.0].iter().map(|&v| vec![v]).collect();
    let (imae, disp) = imae_and_dispersion(&est, &[0.0]).unwrap();
    assert_eq!(imae, 2.5);
    // type 7: Q1 = 1.75, Q3 = 3.25
    assert_eq!(disp, 1.5);
    assert_eq!(type7_quantile(&[1.0, 2.0, 3.0, 4.0], 0.25), 1.75);

    assert!(matches!(imse(&[vec![1.0]], &truths), Err(Error::DimensionMismatch { .. })));
    assert!(imae_and_dispersion(&est[..3], &[0.0]).is_err());
}

fn sp_config() -> EstimatorSpec {
    EstimatorSpec::Copula(EstimatorConfig::default())
}

#[test]
fn experiment_structure_and_determinism() {
    let spec = DgpSpec::new(DgpTag::A, 150, CensoringLevel::Thirty).unwrap();
    let config = ExperimentConfig::new(spec, vec![p(0.3), p(0.5)], vec![sp_config(), EstimatorSpec::CoxReference], 2, 7);
    let result = run_experiment(&config).unwrap();
    assert_eq!(result.eval_points.len(), 10);
    assert_eq!(result.truths.len(), 2);
    assert_eq!(result.estimators.len(), 2);
    assert_eq!(result.estimators[0].tag, "SP-km");
    assert!(result.estimators[1].reference_only);
    for est in &result.estimators {
        assert_eq!(est.replications.len(), 2);
        for j in 0..2 {
            let m = est.estimate_matrix(j);
            assert_eq!((m.len(), m[0].len()), (2, 10));
            // aggregates are recomputable from the stored estimates
            assert_eq!(est.metrics[j].imse, imse(&m, &result.truths[j]).unwrap());
        }
    }
    assert!(result.valid);
    assert_eq!(run_experiment(&config).unwrap(), result);
    assert_eq!(run_experiment(&config).unwrap().to_csv(), result.to_csv());
    assert_eq!(result.to_csv().lines().count(), 3);
}

#[test]
fn evaluation_points_depend_only_on_seed() {
    let spec = DgpSpec::new(DgpTag::C, 120, CensoringLevel::None).unwrap();
    let a = run_experiment(&ExperimentConfig::new(spec, vec![p(0.5)], vec![EstimatorSpec::CoxReference], 1, 3)).unwrap();
    let b = run_experiment(&ExperimentConfig::new(spec, vec![p(0.5)], vec![EstimatorSpec::CoxReference], 3, 3)).unwrap();
    assert_eq!(a.eval_points, b.eval_points);
    assert_eq!(a.estimators[0].replications[0], b.estimators[0].replications[0]);
}

#[test]
fn failed_fits_are_excluded_and_counted() {
    // 40 rows at 50% censoring leave fewer than 30 events
    let spec = DgpSpec::new(DgpTag::A, 40, CensoringLevel::Fifty).unwrap();
    let result = run_experiment(&ExperimentConfig::new(spec, vec![p(0.5)], vec![sp_config()], 3, 1)).unwrap();
    let est = &result.estimators[0];
    assert_eq!(est.excluded, 3);
    assert!(est.replications.iter().all(|r| r.error.as_deref().unwrap().contains("uncensored")));
    assert!(!result.valid);
    assert_eq!(result.exclusions().len(), 3);
}

#[test]
fn invalid_configs_are_rejected() {
    let spec = DgpSpec::new(DgpTag::A, 100, CensoringLevel::None).unwrap();
    assert!(run_experiment(&ExperimentConfig::new(spec, vec![p(0.5)], vec![sp_config()], 0, 1)).is_err());
    assert!(run_experiment(&ExperimentConfig::new(spec, vec![p(0.5), p(0.3)], vec![sp_config()], 1, 1)).is_err());
    assert!(run_experiment(&ExperimentConfig::new(spec, vec![p(0.5)], vec![], 1, 1)).is_err());
}

proptest! {
    #[test]
    fn metrics_are_sane(
        errs in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 4..12),
    ) {
        let truths = [0.5, -1.0, 2.0];
        let est: Vec<Vec<f64>> = errs.iter().map(|e| e.iter().zip(truths).map(|(a, b)| a + b).collect()).collect();
        prop_assert!(imse(&est, &truths).unwrap() >= 0.0);
        let (imae, disp) = imae_and_dispersion(&est, &truths).unwrap();
        prop_assert!(disp >= 0.0);
        let max_err = errs.iter().flatten().fold(0.0f64, |m, e| m.max(e.abs()));
        prop_assert!(imae <= max_err + 1e-12);
        for k in 0..3 {
            let mut col: Vec<f64> = errs.iter().map(|e| e[k].abs()).collect();
            col.sort_by(f64::total_cmp);
            prop_assert!(type7_quantile(&col, 0.5) <= *col.last().unwrap());
        }
    }
}
