//! Simulation lab: data-generating processes with known conditional
//! quantiles, accuracy metrics and a seeded replication engine.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cqr::{fit_estimator, EstimatorConfig};
use crate::error::{Error, Result};
use crate::stats::{std_normal_cdf, std_normal_quantile, Probability};
use crate::survival::{fit_cox, BaselineMode, ObservedSample};

/// Cox coefficients of the survival models.
pub const COX_BETA: [f64; 5] = [1.0, -0.75, 0.5, 0.25, -0.6];
/// Noise scale of the quadratic toy model.
pub const DETTE_SIGMA: f64 = 0.025;
/// Size of the evaluation set.
pub const EVAL_POINTS: usize = 10;
/// Largest excluded fraction of replications for a valid experiment.
pub const MAX_EXCLUDED: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DgpTag {
    A,
    B,
    C,
    D,
    M2,
    #[serde(rename = "DETTE")]
    Dette,
}

impl DgpTag {
    pub const ALL: [DgpTag; 6] = [Self::A, Self::B, Self::C, Self::D, Self::M2, Self::Dette];

    /// Number of covariates.
    pub fn dim(self) -> usize {
        match self {
            Self::A => 2,
            Self::B => 3,
            Self::C | Self::D | Self::M2 => 5,
            Self::Dette => 1,
        }
    }

    pub fn levels(self) -> &'static [CensoringLevel] {
        match self {
            Self::Dette => &[CensoringLevel::None],
            _ => &[CensoringLevel::None, CensoringLevel::Thirty, CensoringLevel::Fifty],
        }
    }
}

impl fmt::Display for DgpTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::A => "A",
            Self::B => "B",
            Self::C => "C",
            Self::D => "D",
            Self::M2 => "M2",
            Self::Dette => "DETTE",
        })
    }
}

impl FromStr for DgpTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(Self::A),
            "B" => Ok(Self::B),
            "C" => Ok(Self::C),
            "D" => Ok(Self::D),
            "M2" => Ok(Self::M2),
            "DETTE" => Ok(Self::Dette),
            other => Err(Error::Argument(format!("unknown DGP '{other}'"))),
        }
    }
}

/// Target average censoring proportion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CensoringLevel {
    #[serde(rename = "0")]
    None,
    #[serde(rename = "0.3")]
    Thirty,
    #[serde(rename = "0.5")]
    Fifty,
}

impl CensoringLevel {
    pub fn fraction(self) -> f64 {
        match self {
            Self::None => 0.0,
            Self::Thirty => 0.3,
            Self::Fifty => 0.5,
        }
    }

    pub fn from_fraction(p: f64) -> Result<Self> {
        match p {
            0.0 => Ok(Self::None),
            0.3 => Ok(Self::Thirty),
            0.5 => Ok(Self::Fifty),
            value => Err(Error::Domain {
                what: "censoring level",
                value,
            }),
        }
    }
}

impl fmt::Display for CensoringLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.fraction())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub tag: DgpTag,
    pub n: usize,
    pub censoring: CensoringLevel,
}

/// Censoring mechanism with its constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CensoringLaw {
    None,
    /// `C ~ U[0, M]`.
    Uniform(f64),
    /// `C ~ Exp(rate)`.
    Exponential(f64),
    /// `C ~ Exp(factor * exp(beta'x))`.
    Proportional(f64),
}

impl DgpSpec {
    pub fn new(tag: DgpTag, n: usize, censoring: CensoringLevel) -> Result<Self> {
        if !tag.levels().contains(&censoring) {
            return Err(Error::Unsupported(format!("censoring level {censoring} for DGP {tag}")));
        }
        Ok(Self { tag, n, censoring })
    }

    pub fn dim(&self) -> usize {
        self.tag.dim()
    }

    pub fn censoring_law(&self) -> CensoringLaw {
        use CensoringLevel::*;
        match (self.tag, self.censoring) {
            (_, None) => CensoringLaw::None,
            (DgpTag::A | DgpTag::B, Thirty) => CensoringLaw::Uniform(5.0 / 3.0),
            (DgpTag::A | DgpTag::B, Fifty) => CensoringLaw::Uniform(1.0),
            (DgpTag::C, Thirty) => CensoringLaw::Exponential(0.464),
            (DgpTag::C, Fifty) => CensoringLaw::Exponential(1.083),
            (DgpTag::D, Thirty) => CensoringLaw::Proportional(3.0 / 7.0),
            (DgpTag::D, Fifty) => CensoringLaw::Proportional(1.0),
            (DgpTag::M2, Thirty) => CensoringLaw::Exponential(0.208),
            (DgpTag::M2, Fifty) => CensoringLaw::Exponential(0.486),
            (DgpTag::Dette, _) => CensoringLaw::None,
        }
    }

    /// Correlation matrix of the Gaussian copula: joint `(T, X)` for A and
    /// B, covariates only for C, D and M2.
    pub fn correlation(&self) -> Option<DMatrix<f64>> {
        match self.tag {
            DgpTag::A => Some(correlation_from_upper(3, &[0.3, 0.9, 0.5])),
            DgpTag::B => Some(correlation_from_upper(4, &[0.3, 0.9, 0.7, 0.5, 0.25, 0.5])),
            DgpTag::C | DgpTag::D | DgpTag::M2 => Some(correlation_from_upper(
                5,
                &[0.3, 0.4, 0.5, 0.6, 0.7, 0.3, 0.4, 0.5, 0.6, 0.7],
            )),
            DgpTag::Dette => None,
        }
    }

    /// Draws `n` covariate vectors from the covariate law.
    pub fn sample_covariates<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        match self.tag {
            DgpTag::A | DgpTag::B => {
                let corr = self.correlation().unwrap();
                let d = self.dim();
                let sub = corr.view((1, 1), (d, d)).into_owned();
                sample_gaussian_copula(&sub, n, rng)
            }
            DgpTag::C | DgpTag::D | DgpTag::M2 => sample_gaussian_copula(&self.correlation().unwrap(), n, rng),
            DgpTag::Dette => Ok((0..n).map(|_| vec![rng.random::<f64>()]).collect()),
        }
    }

    /// `beta' x`, with the second covariate exponentiated for M2.
    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(COX_BETA)
            .enumerate()
            .map(|(j, (&v, b))| if j == 1 && self.tag == DgpTag::M2 { b * v.exp() } else { b * v })
            .sum()
    }

    /// Regression of the response probit on the covariate probits for A and
    /// B: coefficients and residual standard deviation.
    pub fn probit_regression(&self) -> Option<(Vec<f64>, f64)> {
        if !matches!(self.tag, DgpTag::A | DgpTag::B) {
            return None;
        }
        let corr = self.correlation()?;
        let d = self.dim();
        let sxx = corr.view((1, 1), (d, d)).into_owned();
        let sxt = DVector::from_fn(d, |j, _| corr[(j + 1, 0)]);
        let coef = sxx.cholesky()?.solve(&sxt);
        let sd = (1.0 - coef.dot(&sxt)).sqrt();
        Some((coef.iter().copied().collect(), sd))
    }
}

fn correlation_from_upper(k: usize, upper: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::identity(k, k);
    let mut it = upper.iter();
    for i in 0..k {
        for j in i + 1..k {
            let r = *it.next().unwrap();
            m[(i, j)] = r;
            m[(j, i)] = r;
        }
    }
    m
}

/// `n` rows of `Phi(Z)` with `Z ~ N(0, corr)`.
pub fn sample_gaussian_copula<R: Rng + ?Sized>(
    corr: &DMatrix<f64>,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let k = corr.nrows();
    if corr.ncols() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: corr.ncols(),
        });
    }
    for i in 0..k {
        if corr[(i, i)] != 1.0 {
            return Err(Error::Argument("correlation matrix needs a unit diagonal".into()));
        }
        for j in 0..i {
            if corr[(i, j)] != corr[(j, i)] {
                return Err(Error::Argument("correlation matrix is not symmetric".into()));
            }
        }
    }
    let l = corr.clone().cholesky().ok_or(Error::NotPositiveDefinite)?.l();
    let mut z = DVector::zeros(k);
    Ok((0..n)
        .map(|_| {
            for e in z.iter_mut() {
                *e = rng.sample(StandardNormal);
            }
            (&l * &z).iter().map(|&t| std_normal_cdf(t)).collect()
        })
        .collect())
}

/// Observed data plus the latent event times, kept apart from the sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedData {
    pub sample: ObservedSample,
    pub latent_t: Vec<f64>,
}

/// Draws `(Y, delta, X)` with `Y = min(T, C)` and `delta = 1{T <= C}`.
pub fn gen_dgp<R: Rng + ?Sized>(spec: &DgpSpec, rng: &mut R) -> Result<GeneratedData> {
    let n = spec.n;
    let (t, x): (Vec<f64>, Vec<Vec<f64>>) = match spec.tag {
        DgpTag::A | DgpTag::B => sample_gaussian_copula(&spec.correlation().unwrap(), n, rng)?
            .into_iter()
            .map(|mut row| {
                let t = row.remove(0);
                (t, row)
            })
            .unzip(),
        DgpTag::C | DgpTag::D | DgpTag::M2 => {
            let x = spec.sample_covariates(n, rng)?;
            let t = x
                .iter()
                .map(|xi| rng.sample::<f64, _>(Exp1) * (-spec.linear_predictor(xi)).exp())
                .collect();
            (t, x)
        }
        DgpTag::Dette => (0..n)
            .map(|_| {
                let x = rng.random::<f64>();
                let e: f64 = rng.sample(StandardNormal);
                ((x - 0.5).powi(2) + DETTE_SIGMA * e, vec![x])
            })
            .unzip(),
    };
    let law = spec.censoring_law();
    let mut y = Vec::with_capacity(n);
    let mut delta = Vec::with_capacity(n);
    for (ti, xi) in t.iter().zip(&x) {
        let c = match law {
            CensoringLaw::None => f64::INFINITY,
            CensoringLaw::Uniform(m) => m * rng.random::<f64>(),
            CensoringLaw::Exponential(rate) => rng.sample::<f64, _>(Exp1) / rate,
            CensoringLaw::Proportional(k) => {
                rng.sample::<f64, _>(Exp1) / (k * spec.linear_predictor(xi).exp())
            }
        };
        y.push(ti.min(c));
        delta.push(*ti <= c);
    }
    Ok(GeneratedData {
        sample: ObservedSample::new(y, delta, x)?,
        latent_t: t,
    })
}

/// Conditional `tau`-quantile of `T` given `X = x`.
pub fn true_quantile(spec: &DgpSpec, x: &[f64], tau: Probability) -> Result<f64> {
    if x.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: x.len(),
        });
    }
    let tau = Probability::level(tau.value())?.value();
    match spec.tag {
        DgpTag::A | DgpTag::B => {
            let (coef, sd) = spec.probit_regression().ok_or(Error::NotPositiveDefinite)?;
            let mut z = sd * std_normal_quantile(tau)?;
            for (&xj, b) in x.iter().zip(coef) {
                if !(xj > 0.0 && xj < 1.0) {
                    return Err(Error::Domain {
                        what: "covariate",
                        value: xj,
                    });
                }
                z += b * std_normal_quantile(xj)?;
            }
            Ok(std_normal_cdf(z))
        }
        DgpTag::C | DgpTag::D | DgpTag::M2 => {
            if let Some(&v) = x.iter().find(|v| !v.is_finite()) {
                return Err(Error::Domain {
                    what: "covariate",
                    value: v,
                });
            }
            Ok(-(-tau).ln_1p() * (-spec.linear_predictor(x)).exp())
        }
        DgpTag::Dette => Ok((x[0] - 0.5).powi(2) + DETTE_SIGMA * std_normal_quantile(tau)?),
    }
}

fn check_shape(estimates: &[Vec<f64>], truths: &[f64]) -> Result<()> {
    if estimates.is_empty() {
        return Err(Error::EmptySample);
    }
    match estimates.iter().find(|r| r.len() != truths.len()) {
        Some(r) => Err(Error::DimensionMismatch {
            expected: truths.len(),
            found: r.len(),
        }),
        None => Ok(()),
    }
}

/// Mean over points of the mean squared error over replications.
/// `estimates` is replications x points.
pub fn imse(estimates: &[Vec<f64>], truths: &[f64]) -> Result<f64> {
    check_shape(estimates, truths)?;
    let b = estimates.len() as f64;
    let total: f64 = truths
        .iter()
        .enumerate()
        .map(|(k, &m)| estimates.iter().map(|r| (r[k] - m).powi(2)).sum::<f64>() / b)
        .sum();
    Ok(total / truths.len() as f64)
}

/// Linear interpolation between order statistics of sorted data.
pub fn type7_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean over points of the median absolute error, and mean over points of
/// its interquartile range (type-7 quartiles).
pub fn imae_and_dispersion(estimates: &[Vec<f64>], truths: &[f64]) -> Result<(f64, f64)> {
    check_shape(estimates, truths)?;
    if estimates.len() < 4 {
        return Err(Error::Precondition(format!(
            "at least 4 replications are needed, found {}",
            estimates.len()
        )));
    }
    let (mut imae, mut disp) = (0.0, 0.0);
    for (k, &m) in truths.iter().enumerate() {
        let mut err: Vec<f64> = estimates.iter().map(|r| (r[k] - m).abs()).collect();
        err.sort_by(f64::total_cmp);
        imae += type7_quantile(&err, 0.5);
        disp += type7_quantile(&err, 0.75) - type7_quantile(&err, 0.25);
    }
    let n = truths.len() as f64;
    Ok((imae / n, disp / n))
}

/// Estimators compared in an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EstimatorSpec {
    Copula(EstimatorConfig),
    /// Cox model for `T` with exponential baseline, fitted by partial
    /// likelihood. Reference only.
    CoxReference,
}

impl EstimatorSpec {
    pub fn tag(&self) -> String {
        match self {
            Self::Copula(c) => format!("{}-{}", c.mode, c.censoring),
            Self::CoxReference => "cox-ref".into(),
        }
    }

    pub fn reference_only(&self) -> bool {
        matches!(self, Self::CoxReference)
    }

    /// Fits on `sample` and predicts every `(tau, point)` pair.
    pub fn fit_predict(&self, sample: &ObservedSample, taus: &[Probability], points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        match self {
            Self::Copula(config) => {
                let est = fit_estimator(sample, config)?;
                let curves = points
                    .iter()
                    .map(|x| est.predict_curve(x, taus))
                    .collect::<Result<Vec<_>>>()?;
                Ok((0..taus.len()).map(|j| curves.iter().map(|c| c.values[j]).collect()).collect())
            }
            Self::CoxReference => {
                let fit = fit_cox(sample.y(), sample.delta(), sample.rows(), BaselineMode::Exponential)?;
                Ok(taus
                    .iter()
                    .map(|tau| {
                        let target = -(-tau.value()).ln_1p();
                        points
                            .iter()
                            // cumulative hazard is linear in t for this baseline
                            .map(|x| target / fit.cumulative_hazard_before(1.0, x))
                            .collect()
                    })
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dgp: DgpSpec,
    pub taus: Vec<Probability>,
    pub estimators: Vec<EstimatorSpec>,
    pub replications: usize,
    pub eval_points: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(dgp: DgpSpec, taus: Vec<Probability>, estimators: Vec<EstimatorSpec>, replications: usize, seed: u64) -> Self {
        Self {
            dgp,
            taus,
            estimators,
            replications,
            eval_points: EVAL_POINTS,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Argument("at least one replication is required".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Argument("no estimators configured".into()));
        }
        if self.taus.is_empty() {
            return Err(Error::Argument("no quantile levels configured".into()));
        }
        if self.eval_points == 0 {
            return Err(Error::Argument("the evaluation set is empty".into()));
        }
        if self.taus.windows(2).any(|w| w[0].value() >= w[1].value()) {
            return Err(Error::Argument("quantile levels must be strictly increasing".into()));
        }
        for tau in &self.taus {
            Probability::level(tau.value())?;
        }
        DgpSpec::new(self.dgp.tag, self.dgp.n, self.dgp.censoring).map(|_| ())
    }
}

/// Outcome of one replication for one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub index: usize,
    /// `[tau][point]`, absent when the fit failed.
    pub estimates: Option<Vec<Vec<f64>>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tau: Probability,
    pub imse: f64,
    /// Absent with fewer than four valid replications.
    pub imae: Option<f64>,
    pub dispersion: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub tag: String,
    pub reference_only: bool,
    pub replications: Vec<Replication>,
    pub excluded: usize,
    pub metrics: Vec<Metrics>,
}

impl EstimatorResult {
    /// Replications x points matrix of the valid estimates at level `j`.
    pub fn estimate_matrix(&self, j: usize) -> Vec<Vec<f64>> {
        self.replications
            .iter()
            .filter_map(|r| r.estimates.as_ref().map(|e| e[j].clone()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub eval_points: Vec<Vec<f64>>,
    /// `[tau][point]`.
    pub truths: Vec<Vec<f64>>,
    pub estimators: Vec<EstimatorResult>,
    pub valid: bool,
}

/// Wall-clock seconds spent fitting, per estimator, summed over replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub fit_seconds: Vec<f64>,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    run_experiment_timed(config).map(|(r, _)| r)
}

/// Runs the experiment; replication `r` draws from stream `r + 1` of the
/// seed, the evaluation set from stream 0.
pub fn run_experiment_timed(config: &ExperimentConfig) -> Result<(ExperimentResult, Timings)> {
    config.validate()?;
    let start = Instant::now();
    let spec = config.dgp;
    let points = spec.sample_covariates(config.eval_points, &mut stream_rng(config.seed, 0))?;
    let truths = config
        .taus
        .iter()
        .map(|&tau| points.iter().map(|x| true_quantile(&spec, x, tau)).collect())
        .collect::<Result<Vec<Vec<f64>>>>()?;

    let runs = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(config.seed, r as u64 + 1);
            let data = gen_dgp(&spec, &mut rng);
            config
                .estimators
                .iter()
                .map(|est| {
                    let t0 = Instant::now();
                    let out = data
                        .as_ref()
                        .map_err(|e| e.to_string())
                        .and_then(|d| est.fit_predict(&d.sample, &config.taus, &points).map_err(|e| e.to_string()));
                    let elapsed = t0.elapsed().as_secs_f64();
                    let rep = match out {
                        Ok(e) => Replication {
                            index: r,
                            estimates: Some(e),
                            error: None,
                        },
                        Err(msg) => Replication {
                            index: r,
                            estimates: None,
                            error: Some(msg),
                        },
                    };
                    (rep, elapsed)
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>();

    let mut fit_seconds = vec![0.0; config.estimators.len()];
    let mut estimators = Vec::with_capacity(config.estimators.len());
    for (k, est) in config.estimators.iter().enumerate() {
        let replications: Vec<Replication> = runs
            .iter()
            .map(|row| {
                fit_seconds[k] += row[k].1;
                row[k].0.clone()
            })
            .collect();
        let excluded = replications.iter().filter(|r| r.estimates.is_none()).count();
        let mut result = EstimatorResult {
            tag: est.tag(),
            reference_only: est.reference_only(),
            replications,
            excluded,
            metrics: Vec::new(),
        };
        if excluded < config.replications {
            result.metrics = config
                .taus
                .iter()
                .enumerate()
                .map(|(j, &tau)| {
                    let m = result.estimate_matrix(j);
                    let robust = imae_and_dispersion(&m, &truths[j]).ok();
                    Ok(Metrics {
                        tau,
                        imse: imse(&m, &truths[j])?,
                        imae: robust.map(|r| r.0),
                        dispersion: robust.map(|r| r.1),
                    })
                })
                .collect::<Result<_>>()?;
        }
        estimators.push(result);
    }
    let valid = estimators
        .iter()
        .all(|e| e.excluded as f64 <= MAX_EXCLUDED * config.replications as f64);
    let result = ExperimentResult {
        config: config.clone(),
        eval_points: points,
        truths,
        estimators,
        valid,
    };
    let timings = Timings {
        total_seconds: start.elapsed().as_secs_f64(),
        fit_seconds,
    };
    Ok((result, timings))
}

/// Quadratic toy model fitted with a Gaussian parametric copula and with a
/// nonparametric copula, evaluated on an equispaced grid of `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetteDemo {
    pub seed: u64,
    pub grid: Vec<f64>,
    pub truth: Vec<f64>,
    pub parametric: Vec<f64>,
    pub nonparametric: Vec<f64>,
}

pub const DETTE_N: usize = 500;
pub const DETTE_GRID: usize = 101;

impl DetteDemo {
    fn mse(&self, fit: &[f64]) -> f64 {
        fit.iter().zip(&self.truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / fit.len() as f64
    }

    pub fn mse_parametric(&self) -> f64 {
        self.mse(&self.parametric)
    }

    pub fn mse_nonparametric(&self) -> f64 {
        self.mse(&self.nonparametric)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,truth,parametric,nonparametric\n");
        for k in 0..self.grid.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                format_sig6(self.grid[k]),
                format_sig6(self.truth[k]),
                format_sig6(self.parametric[k]),
                format_sig6(self.nonparametric[k])
            ));
        }
        out
    }
}

/// Median regression on `T = (X - 0.5)^2 + 0.025 eps`, `n = 500`.
pub fn dette_demo(seed: u64, vine: &crate::vine::VineConfig) -> Result<DetteDemo> {
    use crate::paircop::{FamilyTag, PairFamily};
    use crate::survival::CensoringKind;
    use crate::vine::{CopulaMode, VineConfig};

    let spec = DgpSpec::new(DgpTag::Dette, DETTE_N, CensoringLevel::None)?;
    let data = gen_dgp(&spec, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let tau = Probability::level(0.5)?;
    let gaussian = EstimatorConfig {
        mode: CopulaMode::Parametric,
        censoring: CensoringKind::None,
        vine: VineConfig {
            families: vec![PairFamily::unrotated(FamilyTag::Gaussian)],
            ..vine.clone()
        },
    };
    let nonparametric = EstimatorConfig {
        mode: CopulaMode::NonParametric,
        censoring: CensoringKind::None,
        vine: vine.clone(),
    };
    let grid: Vec<f64> = (0..DETTE_GRID).map(|k| k as f64 / (DETTE_GRID - 1) as f64).collect();
    let curve = |config: &EstimatorConfig| -> Result<Vec<f64>> {
        let est = fit_estimator(&data.sample, config)?;
        grid.iter().map(|&x| est.predict(&[x], tau)).collect()
    };
    Ok(DetteDemo {
        seed,
        truth: grid
            .iter()
            .map(|&x| true_quantile(&spec, &[x], tau))
            .collect::<Result<_>>()?,
        parametric: curve(&gaussian)?,
        nonparametric: curve(&nonparametric)?,
        grid,
    })
}

/// Formats with six significant digits, trailing zeros dropped.
pub fn format_sig6(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if !(-5..=15).contains(&exp) {
        let m = mantissa.trim_end_matches('0').trim_end_matches('.');
        return format!("{m}e{exp}");
    }
    let decimals = (5 - exp).max(0) as usize;
    let fixed = format!("{x:.decimals$}");
    if fixed.contains('.') {
        fixed.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        fixed
    }
}

fn opt6(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), format_sig6)
}

impl ExperimentResult {
    /// One row per quantile level: IMSE x 1000, IMAE and dispersion per
    /// estimator tag.
    pub fn to_csv(&self) -> String {
        let mut header = vec!["dgp", "n", "censoring", "tau", "B", "excluded"]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>();
        for e in &self.estimators {
            header.push(format!("{}_imse_x1000", e.tag));
            header.push(format!("{}_imae", e.tag));
            header.push(format!("{}_dispersion", e.tag));
        }
        let mut out = header.join(",");
        out.push('\n');
        let excluded = self.estimators.iter().map(|e| e.excluded).max().unwrap_or(0);
        for (j, tau) in self.config.taus.iter().enumerate() {
            let mut row = vec![
                self.config.dgp.tag.to_string(),
                self.config.dgp.n.to_string(),
                self.config.dgp.censoring.to_string(),
                format_sig6(tau.value()),
                self.config.replications.to_string(),
                excluded.to_string(),
            ];
            for e in &self.estimators {
                match e.metrics.get(j) {
                    Some(m) => {
                        row.push(format_sig6(m.imse * 1000.0));
                        row.push(opt6(m.imae));
                        row.push(opt6(m.dispersion));
                    }
                    None => row.extend(["NA".to_string(), "NA".to_string(), "NA".to_string()]),
                }
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Exclusion list per estimator: `(replication, error)`.
    pub fn exclusions(&self) -> Vec<(String, usize, String)> {
        self.estimators
            .iter()
            .flat_map(|e| {
                e.replications
                    .iter()
                    .filter_map(move |r| r.error.clone().map(|msg| (e.tag.clone(), r.index, msg)))
            })
            .collect()
    }
}
