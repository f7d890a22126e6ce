//! Censoring-distribution estimators and inverse-probability-of-censoring
//! weights `W_i(x) = delta_i / (1 - G_C(Y_i- | x))`.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows `(Y_i, delta_i, X_i)` with `Y = min(T, C)` and `delta = 1{T <= C}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedSample {
    y: Vec<f64>,
    delta: Vec<bool>,
    x: Vec<Vec<f64>>,
}

impl ObservedSample {
    pub fn new(y: Vec<f64>, delta: Vec<bool>, x: Vec<Vec<f64>>) -> Result<Self> {
        let n = y.len();
        if delta.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: delta.len(),
            });
        }
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: x.len(),
            });
        }
        let d = x.first().map_or(1, Vec::len);
        if d == 0 {
            return Err(Error::Argument("at least one covariate is required".into()));
        }
        if let Some(row) = x.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: row.len(),
            });
        }
        if y.iter().chain(x.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Argument("sample contains non-finite values".into()));
        }
        Ok(Self { y, delta, x })
    }

    /// A sample without censoring.
    pub fn complete(y: Vec<f64>, x: Vec<Vec<f64>>) -> Result<Self> {
        let delta = vec![true; y.len()];
        Self::new(y, delta, x)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn delta(&self) -> &[bool] {
        &self.delta
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn covariate(&self, j: usize) -> Vec<f64> {
        self.x.iter().map(|r| r[j]).collect()
    }

    pub fn events(&self) -> usize {
        self.delta.iter().filter(|&&d| d).count()
    }

    /// The sample with row `i` removed.
    pub fn without_row(&self, i: usize) -> Self {
        let mut out = self.clone();
        out.y.remove(i);
        out.delta.remove(i);
        out.x.remove(i);
        out
    }
}

/// Right-continuous nondecreasing step function starting at 0, used for the
/// censoring distribution `G_C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSurvival {
    pub jump_times: Vec<f64>,
    pub values: Vec<f64>,
}

impl StepSurvival {
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.jump_times.partition_point(|&s| s <= t);
        if k == 0 {
            0.0
        } else {
            self.values[k - 1]
        }
    }

    /// `G(t-)`: the value just before `t`.
    pub fn left_limit(&self, t: f64) -> f64 {
        let k = self.jump_times.partition_point(|&s| s < t);
        if k == 0 {
            0.0
        } else {
            self.values[k - 1]
        }
    }
}

/// Product-limit estimator of the censoring distribution, with the censored
/// rows (`delta = false`) playing the role of events.
pub fn kaplan_meier_censoring(sample: &ObservedSample) -> Result<StepSurvival> {
    let n = sample.len();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sample.y[a].total_cmp(&sample.y[b]));

    let mut surv = 1.0;
    let mut jump_times = Vec::new();
    let mut values = Vec::new();
    let mut i = 0;
    while i < n {
        let t = sample.y[order[i]];
        let at_risk = n - i;
        let mut censored = 0usize;
        let mut j = i;
        while j < n && sample.y[order[j]] == t {
            censored += usize::from(!sample.delta[order[j]]);
            j += 1;
        }
        if censored > 0 {
            surv *= 1.0 - censored as f64 / at_risk as f64;
            jump_times.push(t);
            values.push(1.0 - surv);
        }
        i = j;
    }
    Ok(StepSurvival { jump_times, values })
}

/// Baseline of a fitted Cox model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CoxBaseline {
    /// Exponential baseline: `G(c|x) = 1 - exp(-c exp(beta'x) / scale)`.
    Exponential { scale: f64 },
    /// Breslow cumulative baseline hazard, a right-continuous step function.
    Breslow { times: Vec<f64>, cumhaz: Vec<f64> },
}

/// Fitted proportional-hazards model for one event type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxFit {
    pub beta: Vec<f64>,
    pub baseline: CoxBaseline,
    pub iterations: usize,
    pub grad_norm: f64,
}

impl CoxFit {
    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        self.beta.iter().zip(x).map(|(b, v)| b * v).sum()
    }

    /// Cumulative hazard just before `t` at covariate `x`.
    pub fn cumulative_hazard_before(&self, t: f64, x: &[f64]) -> f64 {
        let risk = self.linear_predictor(x).exp();
        match &self.baseline {
            CoxBaseline::Exponential { scale } => t.max(0.0) * risk / scale,
            CoxBaseline::Breslow { times, cumhaz } => {
                let k = times.partition_point(|&s| s < t);
                if k == 0 {
                    0.0
                } else {
                    cumhaz[k - 1] * risk
                }
            }
        }
    }

    /// Distribution function just before `t` at covariate `x`.
    pub fn cdf_before(&self, t: f64, x: &[f64]) -> f64 {
        -(-self.cumulative_hazard_before(t, x)).exp_m1()
    }
}

/// Ridge added to the partial-likelihood curvature.
pub const COX_RIDGE: f64 = 1e-8;
const COX_GRAD_TOL: f64 = 1e-8;
const COX_MAX_ITER: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineMode {
    Exponential,
    Breslow,
}

struct PartialLikelihood<'a> {
    times: &'a [f64],
    events: &'a [bool],
    x: &'a DMatrix<f64>,
    order: Vec<usize>,
}

impl<'a> PartialLikelihood<'a> {
    fn new(times: &'a [f64], events: &'a [bool], x: &'a DMatrix<f64>) -> Self {
        let mut order: Vec<usize> = (0..times.len()).collect();
        // descending time so risk sets accumulate
        order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));
        Self {
            times,
            events,
            x,
            order,
        }
    }

    /// Ridge-penalized Breslow log partial likelihood, gradient and Hessian.
    fn evaluate(&self, beta: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
        let d = beta.len();
        let eta = self.x * beta;
        let mut s0 = 0.0;
        let mut s1 = DVector::zeros(d);
        let mut s2 = DMatrix::zeros(d, d);
        let mut loglik = -0.5 * COX_RIDGE * beta.norm_squared();
        let mut grad = -COX_RIDGE * beta;
        let mut hess = -COX_RIDGE * DMatrix::identity(d, d);
        let n = self.order.len();
        let mut i = 0;
        while i < n {
            let t = self.times[self.order[i]];
            let mut j = i;
            while j < n && self.times[self.order[j]] == t {
                let r = self.order[j];
                let w = eta[r].exp();
                let xr = self.x.row(r).transpose();
                s0 += w;
                s1 += w * &xr;
                s2 += w * &xr * xr.transpose();
                j += 1;
            }
            for &r in &self.order[i..j] {
                if self.events[r] {
                    let mean = &s1 / s0;
                    loglik += eta[r] - s0.ln();
                    grad += self.x.row(r).transpose() - &mean;
                    hess -= &s2 / s0 - &mean * mean.transpose();
                }
            }
            i = j;
        }
        (loglik, grad, hess)
    }
}

/// Maximizes the ridge-penalized Cox partial likelihood for `events` by
/// damped Newton iterations, then fits the requested baseline.
pub fn fit_cox(
    times: &[f64],
    events: &[bool],
    rows: &[Vec<f64>],
    baseline: BaselineMode,
) -> Result<CoxFit> {
    let n = times.len();
    let n_events = events.iter().filter(|&&e| e).count();
    if n_events == 0 {
        return Err(Error::CannotFit("no events to fit".into()));
    }
    let d = rows.first().map_or(0, Vec::len);
    // Centering leaves the partial likelihood unchanged and keeps exp(eta) tame.
    let means: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let centered = DMatrix::from_fn(n, d, |i, j| rows[i][j] - means[j]);
    let pl = PartialLikelihood::new(times, events, &centered);

    let mut beta = DVector::zeros(d);
    let (mut loglik, mut grad, mut hess) = pl.evaluate(&beta);
    let mut iterations = 0;
    while grad.norm() >= COX_GRAD_TOL {
        if iterations == COX_MAX_ITER {
            return Err(Error::Convergence {
                iterations,
                grad_norm: grad.norm(),
                iterate: beta.iter().copied().collect(),
            });
        }
        iterations += 1;
        let neg_hess = -&hess;
        let step = match neg_hess.cholesky() {
            Some(ch) => ch.solve(&grad),
            None => grad.clone(),
        };
        let mut scale = 1.0;
        loop {
            let candidate = &beta + scale * &step;
            let (ll, g, h) = pl.evaluate(&candidate);
            if ll.is_finite() && ll >= loglik - 1e-12 * loglik.abs() {
                beta = candidate;
                loglik = ll;
                grad = g;
                hess = h;
                break;
            }
            scale *= 0.5;
            if scale < 1e-12 {
                return Err(Error::Convergence {
                    iterations,
                    grad_norm: grad.norm(),
                    iterate: beta.iter().copied().collect(),
                });
            }
        }
    }

    let beta: Vec<f64> = beta.iter().copied().collect();
    let risk: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().zip(&beta).map(|(v, b)| v * b).sum::<f64>().exp())
        .collect();
    let baseline = match baseline {
        BaselineMode::Exponential => {
            let exposure: f64 = times.iter().zip(&risk).map(|(t, r)| t * r).sum();
            CoxBaseline::Exponential {
                scale: exposure / n_events as f64,
            }
        }
        BaselineMode::Breslow => breslow(times, events, &risk),
    };
    Ok(CoxFit {
        beta,
        baseline,
        iterations,
        grad_norm: grad.norm(),
    })
}

fn breslow(times: &[f64], events: &[bool], risk: &[f64]) -> CoxBaseline {
    let n = times.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut at_risk: f64 = risk.iter().sum();
    let mut cum = 0.0;
    let (mut out_t, mut out_h) = (Vec::new(), Vec::new());
    let mut i = 0;
    while i < n {
        let t = times[order[i]];
        let mut j = i;
        let mut count = 0usize;
        let mut leaving = 0.0;
        while j < n && times[order[j]] == t {
            count += usize::from(events[order[j]]);
            leaving += risk[order[j]];
            j += 1;
        }
        if count > 0 {
            cum += count as f64 / at_risk;
            out_t.push(t);
            out_h.push(cum);
        }
        at_risk -= leaving;
        i = j;
    }
    CoxBaseline::Breslow {
        times: out_t,
        cumhaz: out_h,
    }
}

/// Which censoring-distribution estimator to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CensoringKind {
    /// No censoring model: `W_i = delta_i`.
    None,
    /// Unconditional Kaplan-Meier, ignoring covariates.
    KaplanMeier,
    /// Cox model for the censoring time with exponential baseline.
    Cox,
    /// Cox model for the censoring time with Breslow baseline.
    CoxBreslow,
}

impl std::fmt::Display for CensoringKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::KaplanMeier => "km",
            Self::Cox => "cox",
            Self::CoxBreslow => "cox-breslow",
        })
    }
}

impl std::str::FromStr for CensoringKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "km" | "kaplan-meier" => Ok(Self::KaplanMeier),
            "cox" => Ok(Self::Cox),
            "cox-breslow" => Ok(Self::CoxBreslow),
            other => Err(Error::Argument(format!("unknown censoring model '{other}'"))),
        }
    }
}

/// Estimator of `G_C(. | x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CensoringModel {
    None,
    KaplanMeier(StepSurvival),
    Cox(CoxFit),
}

/// Fits a Cox model treating censoring (`delta = false`) as the event.
pub fn fit_cox_censoring(sample: &ObservedSample) -> Result<CensoringModel> {
    fit_cox_censoring_with(sample, BaselineMode::Exponential)
}

pub fn fit_cox_censoring_with(
    sample: &ObservedSample,
    baseline: BaselineMode,
) -> Result<CensoringModel> {
    let censored: Vec<bool> = sample.delta.iter().map(|&d| !d).collect();
    if !censored.iter().any(|&c| c) {
        return Err(Error::CannotFit(
            "the sample has no censoring events".into(),
        ));
    }
    fit_cox(&sample.y, &censored, &sample.x, baseline).map(CensoringModel::Cox)
}

impl CensoringModel {
    pub fn fit(sample: &ObservedSample, kind: CensoringKind) -> Result<Self> {
        match kind {
            CensoringKind::None => Ok(Self::None),
            CensoringKind::KaplanMeier => kaplan_meier_censoring(sample).map(Self::KaplanMeier),
            CensoringKind::Cox => fit_cox_censoring_with(sample, BaselineMode::Exponential),
            CensoringKind::CoxBreslow => fit_cox_censoring_with(sample, BaselineMode::Breslow),
        }
    }

    pub fn depends_on_x(&self) -> bool {
        matches!(self, Self::Cox(_))
    }

    /// `G_C(t- | x)`.
    pub fn cdf_before(&self, t: f64, x: &[f64]) -> f64 {
        match self {
            Self::None => 0.0,
            Self::KaplanMeier(km) => km.left_limit(t),
            Self::Cox(fit) => fit.cdf_before(t, x),
        }
    }
}

/// Lower bound on `1 - G_C(Y-|x)`; caps weights at 1000.
pub const WEIGHT_FLOOR: f64 = 1e-3;

/// Inverse-probability-of-censoring weights at covariate point `x`.
pub fn censoring_weights(sample: &ObservedSample, model: &CensoringModel, x: &[f64]) -> Vec<f64> {
    let mut clamped = 0usize;
    let weights = sample
        .y
        .iter()
        .zip(&sample.delta)
        .map(|(&y, &d)| {
            if !d {
                return 0.0;
            }
            let surv = 1.0 - model.cdf_before(y, x);
            if surv < WEIGHT_FLOOR {
                clamped += 1;
                1.0 / WEIGHT_FLOOR
            } else {
                1.0 / surv
            }
        })
        .collect();
    if clamped > 0 {
        warn!("{clamped} censoring weights clamped at 1/{WEIGHT_FLOOR}");
    }
    weights
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(data: &[(f64, bool)]) -> ObservedSample {
        ObservedSample::new(
            data.iter().map(|d| d.0).collect(),
            data.iter().map(|d| d.1).collect(),
            data.iter().map(|_| vec![0.0]).collect(),
        )
        .unwrap()
    }

    #[test]
    fn km_hand_example() {
        let s = sample(&[(1.0, true), (2.0, false), (3.0, true)]);
        let g = kaplan_meier_censoring(&s).unwrap();
        assert_eq!(g.eval(2.0), 0.5);
        assert_eq!(g.eval(1.5), 0.0);
        assert_eq!(g.left_limit(2.0), 0.0);
        assert_eq!(g.left_limit(3.0), 0.5);
        // largest observation is an event: G stays below one
        assert_eq!(g.eval(100.0), 0.5);
        let w = censoring_weights(&s, &CensoringModel::KaplanMeier(g), &[0.0]);
        assert_eq!(w, vec![1.0, 0.0, 2.0]);
    }

    #[test]
    fn km_degenerate_cases() {
        let s = sample(&[(1.0, true), (2.0, true), (3.0, true)]);
        let g = kaplan_meier_censoring(&s).unwrap();
        assert!(g.jump_times.is_empty());
        assert_eq!(g.eval(10.0), 0.0);
        let w = censoring_weights(&s, &CensoringModel::KaplanMeier(g), &[0.0]);
        assert_eq!(w, vec![1.0; 3]);

        let s = sample(&[(1.0, false), (4.0, false), (2.0, false)]);
        let g = kaplan_meier_censoring(&s).unwrap();
        assert_eq!(g.eval(3.9), 2.0 / 3.0);
        assert_eq!(g.eval(4.0), 1.0);
    }

    #[test]
    fn weights_clamped_at_floor() {
        let s = sample(&[(1.0, false), (2.0, true)]);
        let g = kaplan_meier_censoring(&s).unwrap();
        // G(2-) = 1/2
        let w = censoring_weights(&s, &CensoringModel::KaplanMeier(g), &[0.0]);
        assert_eq!(w, vec![0.0, 2.0]);
        let s = sample(&[(1.0, false), (1.0, false), (2.0, true)]);
        let model = CensoringModel::KaplanMeier(StepSurvival {
            jump_times: vec![1.0],
            values: vec![1.0],
        });
        assert_eq!(censoring_weights(&s, &model, &[0.0])[2], 1.0 / WEIGHT_FLOOR);
    }

    #[test]
    fn none_model_gives_delta() {
        let s = sample(&[(1.0, true), (2.0, false)]);
        assert_eq!(censoring_weights(&s, &CensoringModel::None, &[0.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn cox_needs_censoring_events() {
        let s = sample(&[(1.0, true), (2.0, true)]);
        assert!(matches!(fit_cox_censoring(&s), Err(Error::CannotFit(_))));
    }

    #[test]
    fn cox_zero_covariate_is_pinned() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 300;
        let mut y = Vec::new();
        let mut x = Vec::new();
        for _ in 0..n {
            let x1: f64 = rng.random();
            let e: f64 = rng.random();
            y.push(-(1.0 - e).ln() / (0.5 * x1).exp());
            x.push(vec![x1, 0.0]);
        }
        let s = ObservedSample::new(y, vec![false; n], x).unwrap();
        let CensoringModel::Cox(fit) = fit_cox_censoring(&s).unwrap() else {
            panic!("expected cox");
        };
        assert!(fit.beta.iter().all(|b| b.is_finite()));
        assert_eq!(fit.beta[1], 0.0);
        assert!(fit.grad_norm < 1e-8);
    }

    #[test]
    fn breslow_matches_nelson_aalen_without_covariates() {
        let times = [1.0, 2.0, 2.0, 3.0, 5.0];
        let events = [true, false, true, true, false];
        let rows: Vec<Vec<f64>> = vec![vec![0.0]; 5];
        let fit = fit_cox(&times, &events, &rows, BaselineMode::Breslow).unwrap();
        let CoxBaseline::Breslow { times: t, cumhaz } = &fit.baseline else {
            panic!()
        };
        assert_eq!(t, &vec![1.0, 2.0, 3.0]);
        let expect = [1.0 / 5.0, 1.0 / 5.0 + 1.0 / 4.0, 1.0 / 5.0 + 1.0 / 4.0 + 1.0 / 2.0];
        for (a, b) in cumhaz.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(fit.cumulative_hazard_before(2.0, &[0.0]), 0.2);
    }
}
