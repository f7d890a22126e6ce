use copulaqr::paircop::{fit_pair_ml, FamilyTag, PairCopula, PairFamily, Rotation};
use copulaqr::stats::{pseudo_observations, std_normal_cdf};
use copulaqr::vine::{
    conditional_pseudo, eval_copula_density, fit_vine, CopulaMode, VineConfig,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Rows of a Gaussian copula sample with correlation matrix `corr`.
fn gaussian_copula(n: usize, corr: &DMatrix<f64>, seed: u64) -> Vec<Vec<f64>> {
    let l = corr.clone().cholesky().unwrap().l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let z = DVector::from_fn(corr.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal));
            (&l * z).iter().map(|&t| std_normal_cdf(t)).collect()
        })
        .collect()
}

fn columns(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let raw: Vec<Vec<f64>> = (0..rows[0].len()).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    pseudo_observations(&raw).unwrap()
}

fn dgp_a_corr() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.9, 0.3, 1.0, 0.5, 0.9, 0.5, 1.0])
}

#[test]
fn single_covariate_collapses_to_one_pair() {
    let corr = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 1.0]);
    let cols = columns(&gaussian_copula(300, &corr, 1));
    let config = VineConfig::default();
    let sp = fit_vine(&cols[0], &cols[1..], CopulaMode::SemiParametric, &config).unwrap();
    let np = fit_vine(&cols[0], &cols[1..], CopulaMode::NonParametric, &config).unwrap();
    assert_eq!(sp.interest, np.interest);
    assert!(sp.noisy.trees().is_empty());
    for (a, b) in [(0.2, 0.3), (0.9, 0.1), (0.5, 0.5)] {
        assert_eq!(sp.density(a, &[b]), sp.interest[0].density(a, b));
        assert_eq!(sp.density(a, &[b]), np.density(a, &[b]));
    }
}

#[test]
fn gaussian_truth_selects_gaussian_noisy_edge() {
    let config = VineConfig::default();
    let seeds = 50;
    let hits = (0..seeds)
        .filter(|&s| {
            let cols = columns(&gaussian_copula(400, &dgp_a_corr(), 100 + s));
            let m = fit_vine(&cols[0], &cols[1..], CopulaMode::SemiParametric, &config).unwrap();
            let edge = &m.noisy.trees()[0][0];
            matches!(&edge.pair, PairCopula::Parametric(p) if p.family.tag == FamilyTag::Gaussian)
        })
        .count();
    assert!(hits * 10 >= 6 * seeds as usize, "{hits}/{seeds}");
}

#[test]
fn independent_columns_give_independent_noisy_edges() {
    let config = VineConfig::default();
    let seeds = 20;
    let corr = DMatrix::<f64>::identity(3, 3);
    let hits = (0..seeds)
        .filter(|&s| {
            let cols = columns(&gaussian_copula(2000, &corr, 300 + s));
            let m = fit_vine(&cols[0], &cols[1..], CopulaMode::SemiParametric, &config).unwrap();
            let all = m.noisy.edges().all(|e| e.pair.is_independence());
            all
        })
        .count();
    // AIC over 14 one-parameter alternatives picks a spurious family in
    // roughly a quarter of null samples.
    assert!(hits * 100 >= 65 * seeds as usize, "{hits}/{seeds}");
}

/// Kolmogorov-Smirnov statistic against the uniform distribution.
fn ks_uniform(sample: &[f64]) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max)
}

#[test]
fn conditional_pseudo_observations_are_uniform() {
    let corr = DMatrix::from_row_slice(2, 2, &[1.0, 0.7, 0.7, 1.0]);
    let gaussian = PairFamily::new(FamilyTag::Gaussian, Rotation::R0).unwrap();
    let seeds = 40;
    let n = 2000;
    // 1% critical value of the one-sample KS statistic
    let critical = 1.628 / (n as f64).sqrt();
    let passes = (0..seeds)
        .filter(|&s| {
            let cols = columns(&gaussian_copula(n, &corr, 700 + s));
            let pair: PairCopula = fit_pair_ml(&cols[0], &cols[1], gaussian).unwrap().into();
            ks_uniform(&conditional_pseudo(&cols[0], &cols[1], &pair)) < critical
        })
        .count();
    assert!(passes * 100 >= 95 * seeds as usize, "{passes}/{seeds}");
}

#[test]
fn conditional_pseudo_is_monotone_and_identity_under_independence() {
    let cols = columns(&gaussian_copula(500, &dgp_a_corr(), 9));
    let m = fit_vine(&cols[0], &cols[1..], CopulaMode::SemiParametric, &VineConfig::default()).unwrap();
    let u0 = vec![0.37; 101];
    let grid: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
    let h = conditional_pseudo(&u0, &grid, &m.interest[0]);
    assert!(h.windows(2).all(|w| w[0] <= w[1]));
    assert!(h.iter().all(|&v| v > 0.0 && v < 1.0));

    let ind = PairCopula::from(copulaqr::paircop::ParametricPair::independence());
    let uj: Vec<f64> = (1..100).map(|k| k as f64 / 100.0).collect();
    assert_eq!(conditional_pseudo(&uj, &uj, &ind), uj);
}

fn bivariate_gaussian_density(rho: f64, u: f64, v: f64) -> f64 {
    let (a, b) = (
        copulaqr::stats::std_normal_quantile(u).unwrap(),
        copulaqr::stats::std_normal_quantile(v).unwrap(),
    );
    let s = 1.0 - rho * rho;
    (-(rho * rho * (a * a + b * b) - 2.0 * rho * a * b) / (2.0 * s)).exp() / s.sqrt()
}

#[test]
fn response_margin_integrates_to_covariate_copula() {
    let cols = columns(&gaussian_copula(3000, &dgp_a_corr(), 21));
    for mode in [CopulaMode::SemiParametric, CopulaMode::NonParametric] {
        let m = fit_vine(&cols[0], &cols[1..], mode, &VineConfig::default()).unwrap();
        for u in [[0.5, 0.5], [0.3, 0.6], [0.7, 0.65]] {
            let k = 401;
            let integral: f64 = (0..k)
                .map(|i| {
                    let u0 = i as f64 / (k - 1) as f64;
                    let w = if i == 0 || i == k - 1 { 0.5 } else { 1.0 };
                    w * eval_copula_density(&m, u0, &u)
                })
                .sum::<f64>()
                / (k - 1) as f64;
            let exact = bivariate_gaussian_density(0.5, u[0], u[1]);
            assert!((integral - exact).abs() < 5e-2, "{mode} {u:?}: {integral} vs {exact}");
        }
    }
}

#[test]
fn fitted_structures_are_valid_vines() {
    let corr = DMatrix::from_fn(5, 5, |i, j| if i == j { 1.0 } else { 0.3 + 0.1 * ((i + j) % 3) as f64 });
    let cols = columns(&gaussian_copula(300, &corr, 4));
    let config = VineConfig::default();
    let sp = fit_vine(&cols[0], &cols[1..], CopulaMode::SemiParametric, &config).unwrap();
    sp.noisy.validate().unwrap();
    assert_eq!(sp.noisy.trees().iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 2, 1]);
    let p = fit_vine(&cols[0], &cols[1..], CopulaMode::Parametric, &config).unwrap();
    let joint = p.joint.as_ref().unwrap();
    joint.validate().unwrap();
    assert_eq!(joint.dim(), 5);
    assert_eq!(joint.trees().iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 3, 2, 1]);
    for model in [&sp, &p] {
        for k in 0..50 {
            let t = (k as f64 + 0.5) / 50.0;
            let c = model.density(t, &[1.0 - t, t * t, 0.5, 1e-12]);
            assert!(c.is_finite() && c >= 0.0);
        }
    }
    let json = serde_json::to_string(&sp).unwrap();
    assert_eq!(serde_json::from_str::<copulaqr::vine::VineCopulaModel>(&json).unwrap(), sp);
    let desc = p.describe();
    assert_eq!(desc.joint.unwrap().len(), 4);
}

#[test]
fn all_independence_model_has_unit_density() {
    let corr = DMatrix::<f64>::identity(3, 3);
    let cols = columns(&gaussian_copula(200, &corr, 2));
    let config = VineConfig {
        families: vec![PairFamily::unrotated(FamilyTag::Independence)],
        ..VineConfig::default()
    };
    let p = fit_vine(&cols[0], &cols[1..], CopulaMode::Parametric, &config).unwrap();
    for (a, b, c) in [(0.1, 0.2, 0.3), (0.9, 0.5, 0.01)] {
        assert_eq!(p.density(a, &[b, c]), 1.0);
    }
}

#[test]
fn fit_is_rank_invariant() {
    let rows = gaussian_copula(120, &dgp_a_corr(), 77);
    let raw: Vec<Vec<f64>> = (0..3).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let transformed: Vec<Vec<f64>> = raw
        .iter()
        .enumerate()
        .map(|(j, c)| c.iter().map(|&v| (v * (j + 1) as f64).exp() - 4.0).collect())
        .collect();
    let a = pseudo_observations(&raw).unwrap();
    let b = pseudo_observations(&transformed).unwrap();
    let config = VineConfig::default();
    for mode in [CopulaMode::SemiParametric, CopulaMode::Parametric] {
        let ma = fit_vine(&a[0], &a[1..], mode, &config).unwrap();
        let mb = fit_vine(&b[0], &b[1..], mode, &config).unwrap();
        assert_eq!(ma, mb);
    }
}

#[test]
fn preconditions() {
    let cols = columns(&gaussian_copula(29, &dgp_a_corr(), 1));
    assert!(fit_vine(&cols[0], &cols[1..], CopulaMode::SemiParametric, &VineConfig::default()).is_err());
    let cols = columns(&gaussian_copula(40, &dgp_a_corr(), 1));
    assert!(fit_vine(&cols[0], &[], CopulaMode::SemiParametric, &VineConfig::default()).is_err());
    let mut bad = cols[1].clone();
    bad[3] = 1.0;
    assert!(fit_vine(&cols[0], &[bad], CopulaMode::SemiParametric, &VineConfig::default()).is_err());
}
