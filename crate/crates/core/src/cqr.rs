//! Copula-based conditional quantile estimator for complete and
//! right-censored responses.
//!
//! The quantile at `x` is the weighted `tau`-quantile of the uncensored
//! responses with weights `W_i(x) * c(F_Y(Y_i), F(x))`, where `W_i` is the
//! inverse-probability-of-censoring weight and `c` the fitted copula density.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{check_loss, Probability, RescaledEcdf, SortedWeights};
use crate::survival::{censoring_weights, CensoringKind, CensoringModel, ObservedSample};
use crate::vine::{fit_vine, CopulaMode, VineConfig, VineCopulaModel};

/// Minimum number of uncensored rows.
pub const MIN_EVENTS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub mode: CopulaMode,
    pub censoring: CensoringKind,
    pub vine: VineConfig,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            mode: CopulaMode::SemiParametric,
            censoring: CensoringKind::KaplanMeier,
            vine: VineConfig::default(),
        }
    }
}

/// Quantile levels with nondecreasing estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileCurve {
    pub taus: Vec<Probability>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileEstimator {
    config: EstimatorConfig,
    vine: VineCopulaModel,
    censoring: CensoringModel,
    marginal_y: RescaledEcdf,
    marginal_x: Vec<RescaledEcdf>,
    sample: ObservedSample,
    // Uncensored rows sorted by response.
    event_rows: Vec<usize>,
    event_y: Vec<f64>,
    event_u0: Vec<f64>,
    // IPCW weights of the sorted event rows when they do not depend on x.
    fixed_ipcw: Option<Vec<f64>>,
}

struct Prepared {
    censoring: CensoringModel,
    marginal_y: RescaledEcdf,
    marginal_x: Vec<RescaledEcdf>,
    u0: Vec<f64>,
    ux: Vec<Vec<f64>>,
}

fn prepare(sample: &ObservedSample, kind: CensoringKind) -> Result<Prepared> {
    let events = sample.events();
    if events < MIN_EVENTS {
        return Err(Error::TooFewEvents {
            events,
            required: MIN_EVENTS,
        });
    }
    if sample.dim() == 0 {
        return Err(Error::Argument("no covariates".into()));
    }
    let delta = sample.delta();
    let censoring = if events == sample.len() {
        // Nothing is censored: every censoring estimator is identically zero.
        CensoringModel::None
    } else {
        CensoringModel::fit(sample, kind)?
    };
    let marginal_y = RescaledEcdf::new(sample.y(), delta)?;
    let marginal_x = (0..sample.dim())
        .map(|j| RescaledEcdf::new(&sample.covariate(j), delta))
        .collect::<Result<Vec<_>>>()?;
    let keep = |values: &[f64], m: &RescaledEcdf| -> Vec<f64> {
        values
            .iter()
            .zip(delta)
            .filter(|(_, &d)| d)
            .map(|(&v, _)| m.eval(v))
            .collect()
    };
    let u0 = keep(sample.y(), &marginal_y);
    let ux = marginal_x
        .iter()
        .enumerate()
        .map(|(j, m)| keep(&sample.covariate(j), m))
        .collect();
    Ok(Prepared {
        censoring,
        marginal_y,
        marginal_x,
        u0,
        ux,
    })
}

impl QuantileEstimator {
    fn assemble(
        config: EstimatorConfig,
        sample: &ObservedSample,
        prepared: Prepared,
        vine: VineCopulaModel,
    ) -> Self {
        let mut event_rows: Vec<usize> = (0..sample.len()).filter(|&i| sample.delta()[i]).collect();
        event_rows.sort_by(|&a, &b| sample.y()[a].total_cmp(&sample.y()[b]));
        let event_y: Vec<f64> = event_rows.iter().map(|&i| sample.y()[i]).collect();
        let event_u0 = event_y.iter().map(|&y| prepared.marginal_y.eval(y)).collect();
        let fixed_ipcw = (!prepared.censoring.depends_on_x()).then(|| {
            let all = censoring_weights(sample, &prepared.censoring, &[]);
            event_rows.iter().map(|&i| all[i]).collect()
        });
        Self {
            config,
            vine,
            censoring: prepared.censoring,
            marginal_y: prepared.marginal_y,
            marginal_x: prepared.marginal_x,
            sample: sample.clone(),
            event_rows,
            event_y,
            event_u0,
            fixed_ipcw,
        }
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn vine(&self) -> &VineCopulaModel {
        &self.vine
    }

    pub fn censoring(&self) -> &CensoringModel {
        &self.censoring
    }

    pub fn sample(&self) -> &ObservedSample {
        &self.sample
    }

    pub fn marginal_y(&self) -> &RescaledEcdf {
        &self.marginal_y
    }

    pub fn marginal_x(&self) -> &[RescaledEcdf] {
        &self.marginal_x
    }

    /// Uncensored responses in ascending order; [`Self::weights`] is aligned
    /// with this slice.
    pub fn event_values(&self) -> &[f64] {
        &self.event_y
    }

    /// Sample row index of each entry of [`Self::event_values`].
    pub fn event_rows(&self) -> &[usize] {
        &self.event_rows
    }

    /// Covariate pseudo-observations `F(x)` used at prediction.
    pub fn covariate_levels(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.marginal_x.len() {
            return Err(Error::DimensionMismatch {
                expected: self.marginal_x.len(),
                found: x.len(),
            });
        }
        if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain {
                what: "covariate",
                value: *bad,
            });
        }
        Ok(x.iter()
            .zip(&self.marginal_x)
            .map(|(&v, m)| m.eval_interior(v))
            .collect())
    }

    /// Nonnegative weights of the uncensored rows at `x`.
    pub fn weights(&self, x: &[f64]) -> Result<Vec<f64>> {
        let u = self.covariate_levels(x)?;
        let ipcw: Vec<f64> = match &self.fixed_ipcw {
            Some(w) => w.clone(),
            None => {
                let all = censoring_weights(&self.sample, &self.censoring, x);
                self.event_rows.iter().map(|&i| all[i]).collect()
            }
        };
        Ok(self
            .event_u0
            .iter()
            .zip(ipcw)
            .map(|(&u0, w)| {
                let c = self.vine.density(u0, &u);
                let w = w * c;
                if w.is_finite() && w > 0.0 {
                    w
                } else {
                    0.0
                }
            })
            .collect())
    }

    fn sorted_weights<'a>(&'a self, x: &[f64], weights: &[f64]) -> Result<SortedWeights<'a>> {
        SortedWeights::new(&self.event_y, weights).map_err(|e| match e {
            Error::DegenerateWeights => Error::DegeneratePrediction { x: x.to_vec() },
            other => other,
        })
    }

    /// Estimated conditional `tau`-quantile at `x`.
    pub fn predict(&self, x: &[f64], tau: Probability) -> Result<f64> {
        let tau = Probability::level(tau.value())?;
        let weights = self.weights(x)?;
        self.sorted_weights(x, &weights)?.quantile(tau.value())
    }

    /// Quantiles at several levels from one weight vector, so the curve is
    /// nondecreasing by construction.
    pub fn predict_curve(&self, x: &[f64], taus: &[Probability]) -> Result<QuantileCurve> {
        for t in taus {
            Probability::level(t.value())?;
        }
        if taus.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Argument("quantile levels must be sorted".into()));
        }
        let weights = self.weights(x)?;
        let sorted = self.sorted_weights(x, &weights)?;
        let values = taus
            .iter()
            .map(|t| sorted.quantile(t.value()))
            .collect::<Result<_>>()?;
        Ok(QuantileCurve {
            taus: taus.to_vec(),
            values,
        })
    }

    /// Re-estimates on a new sample with the vine structure, families and
    /// bandwidths of `self` held fixed.
    pub fn refit_on(&self, sample: &ObservedSample) -> Result<Self> {
        let prepared = prepare(sample, self.config.censoring)?;
        let vine = self.vine.refit(&prepared.u0, &prepared.ux, &self.config.vine)?;
        Ok(Self::assemble(self.config.clone(), sample, prepared, vine))
    }
}

/// Fits marginals and copula on the uncensored rows and the censoring model
/// on the full sample.
pub fn fit_estimator(sample: &ObservedSample, config: &EstimatorConfig) -> Result<QuantileEstimator> {
    let prepared = prepare(sample, config.censoring)?;
    let vine = fit_vine(&prepared.u0, &prepared.ux, config.mode, &config.vine)?;
    Ok(QuantileEstimator::assemble(config.clone(), sample, prepared, vine))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Leave-one-out prediction error `med_i rho_tau(Y_i - m^{-i}(X_i))` over
/// uncensored rows, for an arbitrary predictor trained on the reduced sample.
pub fn cv_prediction_error_with<F>(sample: &ObservedSample, tau: Probability, predictor: F) -> Result<f64>
where
    F: Fn(&ObservedSample, &[f64]) -> Result<f64> + Sync,
{
    let tau = Probability::level(tau.value())?.value();
    let rows: Vec<usize> = (0..sample.len()).filter(|&i| sample.delta()[i]).collect();
    if rows.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut losses = rows
        .par_iter()
        .map(|&i| {
            let reduced = sample.without_row(i);
            let pred = predictor(&reduced, &sample.rows()[i]).map_err(|e| Error::Fold {
                fold: i,
                source: Box::new(e),
            })?;
            Ok(check_loss(sample.y()[i] - pred, tau))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(median(&mut losses))
}

/// Leave-one-out prediction error of the copula estimator. Structure,
/// families and bandwidths are selected once on the full sample; marginals,
/// censoring model and copula parameters are refitted per fold.
pub fn cv_prediction_error(
    sample: &ObservedSample,
    tau: Probability,
    config: &EstimatorConfig,
) -> Result<f64> {
    let template = fit_estimator(sample, config)?;
    cv_prediction_error_with(sample, tau, |reduced, x| template.refit_on(reduced)?.predict(x, tau))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paircop::{FamilyTag, PairFamily};

    fn independence_config() -> EstimatorConfig {
        EstimatorConfig {
            mode: CopulaMode::Parametric,
            censoring: CensoringKind::None,
            vine: VineConfig {
                families: vec![PairFamily::unrotated(FamilyTag::Independence)],
                ..VineConfig::default()
            },
        }
    }

    fn toy_sample(n: usize) -> ObservedSample {
        let y: Vec<f64> = (0..n).map(|i| ((i * 37) % n) as f64 / 10.0).collect();
        let x: Vec<Vec<f64>> = (0..n).map(|i| vec![(i as f64).sin(), ((i * 7) % 11) as f64]).collect();
        ObservedSample::complete(y, x).unwrap()
    }

    #[test]
    fn independence_copula_gives_sample_quantiles() {
        let s = toy_sample(40);
        let est = fit_estimator(&s, &independence_config()).unwrap();
        let mut sorted = s.y().to_vec();
        sorted.sort_by(f64::total_cmp);
        for tau in [0.1, 0.25, 0.5, 0.9] {
            let k = (tau * 40.0_f64).ceil() as usize - 1;
            let p = est.predict(&[0.3, 2.0], Probability::level(tau).unwrap()).unwrap();
            assert_eq!(p, sorted[k]);
        }
    }

    #[test]
    fn too_few_events_is_an_error() {
        let s = toy_sample(29);
        assert!(matches!(
            fit_estimator(&s, &independence_config()),
            Err(Error::TooFewEvents { events: 29, .. })
        ));
    }

    #[test]
    fn curve_rejects_unsorted_levels() {
        let est = fit_estimator(&toy_sample(40), &independence_config()).unwrap();
        let taus = [0.5, 0.2].map(|t| Probability::level(t).unwrap());
        assert!(est.predict_curve(&[0.0, 1.0], &taus).is_err());
        assert!(est.predict(&[0.0], Probability::level(0.5).unwrap()).is_err());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
