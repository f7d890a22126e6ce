//! Scalar statistical primitives: the standard normal distribution, rank
//! transforms, Kendall's tau and the weighted quantile (the location-only
//! minimizer of the weighted check loss).

use std::cmp::Ordering;
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A probability level in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::Domain {
                what: "probability",
                value,
            })
        }
    }

    /// Validates a quantile level, which must lie strictly inside `(0, 1)`.
    pub fn level(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::Domain {
                what: "quantile level",
                value,
            })
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// An observation carrying a nonnegative weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedPoint {
    pub value: f64,
    pub weight: f64,
}

impl WeightedPoint {
    pub fn new(value: f64, weight: f64) -> Result<Self> {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::Argument(format!(
                "weight must be finite and nonnegative, got {weight}"
            )));
        }
        Ok(Self { value, weight })
    }
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal distribution function.
pub fn std_normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

// Rational approximation of Acklam; relative error 1.15e-9 before refinement.
const ACKLAM_A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const ACKLAM_B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const ACKLAM_C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const ACKLAM_D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];

fn acklam(p: f64) -> f64 {
    const P_LOW: f64 = 0.024_25;
    let (a, b, c, d) = (&ACKLAM_A, &ACKLAM_B, &ACKLAM_C, &ACKLAM_D);
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    }
}

/// Inverse of [`std_normal_cdf`] on the open unit interval.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain {
            what: "normal quantile argument",
            value: p,
        });
    }
    Ok(normal_quantile_unchecked(p))
}

/// Like [`std_normal_quantile`] for callers that have already clamped `p`.
pub(crate) fn normal_quantile_unchecked(p: f64) -> f64 {
    let x = acklam(p);
    // One Halley step against the erfc-based cdf. The residual is computed on
    // the smaller tail to avoid cancellation.
    let e = if p < 0.5 {
        0.5 * libm::erfc(-x / SQRT_2) - p
    } else {
        (1.0 - p) - 0.5 * libm::erfc(x / SQRT_2)
    };
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// Rescaled empirical distribution function `#{kept values <= t} / (n_kept + 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledEcdf {
    sorted: Vec<f64>,
}

impl RescaledEcdf {
    pub fn new(sample: &[f64], keep: &[bool]) -> Result<Self> {
        if sample.len() != keep.len() {
            return Err(Error::DimensionMismatch {
                expected: sample.len(),
                found: keep.len(),
            });
        }
        let mut sorted: Vec<f64> = sample
            .iter()
            .zip(keep)
            .filter_map(|(&v, &k)| k.then_some(v))
            .collect();
        if sorted.is_empty() {
            return Err(Error::EmptySample);
        }
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    /// Number of kept observations.
    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn eval(&self, t: f64) -> f64 {
        let count = self.sorted.partition_point(|&v| v <= t);
        count as f64 / (self.sorted.len() as f64 + 1.0)
    }

    /// Evaluation restricted to `[1/(n+1), n/(n+1)]`, keeping copula
    /// arguments in the interior for points outside the training range.
    pub fn eval_interior(&self, t: f64) -> f64 {
        let denom = self.sorted.len() as f64 + 1.0;
        self.eval(t)
            .clamp(1.0 / denom, self.sorted.len() as f64 / denom)
    }
}

/// Builds the rescaled empirical distribution of the kept entries of `sample`.
pub fn rescaled_ecdf(sample: &[f64], keep: &[bool]) -> Result<RescaledEcdf> {
    RescaledEcdf::new(sample, keep)
}

/// Average ranks (1-based) of `values`.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

/// Column-wise `rank / (n + 1)` with average ranks for ties.
pub fn pseudo_observations(columns: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = columns.first().map_or(0, Vec::len);
    if n == 0 {
        return Err(Error::EmptySample);
    }
    columns
        .iter()
        .map(|col| {
            if col.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: col.len(),
                });
            }
            if col.iter().any(|v| v.is_nan()) {
                return Err(Error::Argument("column contains NaN".into()));
            }
            let denom = n as f64 + 1.0;
            Ok(average_ranks(col).into_iter().map(|r| r / denom).collect())
        })
        .collect()
}

fn tied_pairs<T: PartialEq>(sorted: impl Iterator<Item = T>) -> u64 {
    let mut total = 0u64;
    let mut run = 0u64;
    let mut prev: Option<T> = None;
    for item in sorted {
        if prev.as_ref() == Some(&item) {
            run += 1;
        } else {
            total += run * (run + 1) / 2;
            run = 0;
        }
        prev = Some(item);
    }
    total + run * (run + 1) / 2
}

fn merge_count(values: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = values.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (left, right) = values.split_at_mut(mid);
        let (lbuf, rbuf) = buf.split_at_mut(mid);
        merge_count(left, lbuf) + merge_count(right, rbuf)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if values[j] < values[i] {
            buf[k] = values[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = values[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&values[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&values[j..n]);
    values.copy_from_slice(&buf[..n]);
    swaps
}

/// Tie-corrected Kendall's tau (tau-b), computed in `O(n log n)` with Knight's
/// merge-sort algorithm.
pub fn kendall_tau(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let n = u.len();
    if n < 2 {
        return Err(Error::Argument(format!(
            "Kendall's tau needs at least two observations, got {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| u[a].total_cmp(&u[b]).then(v[a].total_cmp(&v[b])));

    let total = (n as u64) * (n as u64 - 1) / 2;
    let ties_u = tied_pairs(order.iter().map(|&i| u[i].to_bits()));
    let ties_joint = tied_pairs(order.iter().map(|&i| (u[i].to_bits(), v[i].to_bits())));

    let mut vs: Vec<f64> = order.iter().map(|&i| v[i]).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut vs, &mut buf);
    let ties_v = tied_pairs(vs.iter().map(|x| x.to_bits()));

    let denom = ((total - ties_u) as f64 * (total - ties_v) as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::Argument(
            "Kendall's tau is undefined for a constant input".into(),
        ));
    }
    let numer = total as f64 - ties_u as f64 - ties_v as f64 + ties_joint as f64
        - 2.0 * swaps as f64;
    Ok((numer / denom).clamp(-1.0, 1.0))
}

/// Check loss `rho_tau(r) = r (tau - 1{r < 0})`.
pub fn check_loss(residual: f64, tau: f64) -> f64 {
    if residual < 0.0 {
        residual * (tau - 1.0)
    } else {
        residual * tau
    }
}

/// Smallest observed value `v` with cumulative weight at `v` reaching
/// `tau` times the total. This is the minimizer of the weighted check loss
/// over `a`, taking the left end when the minimum is attained on an interval.
pub fn weighted_quantile(points: &[WeightedPoint], tau: Probability) -> Result<f64> {
    let tau = Probability::level(tau.value())?.value();
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap_or(Ordering::Equal));
    let values: Vec<f64> = sorted.iter().map(|p| p.value).collect();
    let weights: Vec<f64> = sorted.iter().map(|p| p.weight).collect();
    SortedWeights::new(&values, &weights)?.quantile(tau)
}

/// Values sorted ascending with their weights and running totals, so several
/// quantile levels can be read off one weight vector.
#[derive(Debug, Clone)]
pub(crate) struct SortedWeights<'a> {
    values: &'a [f64],
    cumulative: Vec<f64>,
}

impl<'a> SortedWeights<'a> {
    pub(crate) fn new(values: &'a [f64], weights: &[f64]) -> Result<Self> {
        debug_assert!(values.windows(2).all(|w| w[0] <= w[1]));
        let mut acc = 0.0;
        let cumulative: Vec<f64> = weights
            .iter()
            .map(|&w| {
                acc += w;
                acc
            })
            .collect();
        if !(acc > 0.0) || !acc.is_finite() {
            return Err(Error::DegenerateWeights);
        }
        Ok(Self { values, cumulative })
    }

    pub(crate) fn quantile(&self, tau: f64) -> Result<f64> {
        let total = *self.cumulative.last().expect("nonempty");
        let target = tau * total;
        let idx = self.cumulative.partition_point(|&c| c < target);
        let idx = idx.min(self.values.len() - 1);
        // Equal values share one cumulative step; report the first of them.
        Ok(self.values[idx])
    }
}
