//! Nonparametric pair-copula density by the probit transformation: map the
//! pseudo-observations through `Phi^-1`, estimate the density of the
//! transformed sample by local likelihood with a log-quadratic polynomial and
//! a Gaussian kernel, and back-transform.
//!
//! With a Gaussian kernel and a quadratic local polynomial the local
//! likelihood score equations reduce to matching the kernel-weighted zeroth,
//! first and second moments of the data, so each node is solved in closed
//! form. Nodes where the weighted covariance is numerically singular fall
//! back to the plain transformation kernel estimate.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::family::clamp_unit;
use crate::error::{Error, Result};
use crate::stats::{normal_quantile_unchecked, std_normal_cdf, std_normal_pdf};

/// Nearest-neighbour fractions tried by the default bandwidth search.
pub const DEFAULT_FRACTIONS: [f64; 5] = [0.3, 0.45, 0.6, 0.8, 1.0];
const MIN_POINTS: usize = 20;
const MIN_EFFECTIVE_POINTS: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BandwidthChoice {
    Fixed(f64),
    /// Cross-validated choice among nearest-neighbour fractions.
    NearestNeighbor {
        fractions: Vec<f64>,
        folds: usize,
        seed: u64,
    },
}

impl Default for BandwidthChoice {
    fn default() -> Self {
        Self::NearestNeighbor {
            fractions: DEFAULT_FRACTIONS.to_vec(),
            folds: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmootherConfig {
    pub grid_size: usize,
    pub z_max: f64,
    pub bandwidth: BandwidthChoice,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        Self {
            grid_size: 64,
            z_max: 3.2,
            bandwidth: BandwidthChoice::default(),
        }
    }
}

/// Kernel-weighted moments of the transformed sample around one point.
struct LocalFit {
    density: f64,
    fallback: bool,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    s0: f64,
    sq: f64,
    s1: f64,
    s2: f64,
    s11: f64,
    s12: f64,
    s22: f64,
}

fn local_fit(points: &[(f64, f64)], a: f64, b: f64, h: f64) -> LocalFit {
    let inv2h2 = 0.5 / (h * h);
    let mut m = Moments::default();
    for &(x, y) in points {
        let (dx, dy) = (x - a, y - b);
        let w = (-(dx * dx + dy * dy) * inv2h2).exp();
        m.s0 += w;
        m.sq += w * w;
        m.s1 += w * dx;
        m.s2 += w * dy;
        m.s11 += w * dx * dx;
        m.s12 += w * dx * dy;
        m.s22 += w * dy * dy;
    }
    finish_fit(m, points.len(), h)
}

/// Moments at every node of the tensor grid. The Gaussian kernel factorizes
/// over the two axes, so each moment table is one matrix product.
fn grid_moments(points: &[(f64, f64)], nodes: &[f64], h: f64) -> Vec<Moments> {
    let (m, n) = (nodes.len(), points.len());
    let inv2h2 = 0.5 / (h * h);
    let axis = |coord: fn(&(f64, f64)) -> f64, power: i32, squared: bool| {
        DMatrix::from_fn(m, n, |i, k| {
            let d = coord(&points[k]) - nodes[i];
            let w = (-d * d * inv2h2).exp();
            let w = if squared { w * w } else { w };
            w * d.powi(power)
        })
    };
    let a: Vec<DMatrix<f64>> = (0..3).map(|p| axis(|q| q.0, p, false)).collect();
    let b: Vec<DMatrix<f64>> = (0..3).map(|p| axis(|q| q.1, p, false)).collect();
    let prod = |x: &DMatrix<f64>, y: &DMatrix<f64>| x * y.transpose();
    let s0 = prod(&a[0], &b[0]);
    let sq = prod(&axis(|q| q.0, 0, true), &axis(|q| q.1, 0, true));
    let s1 = prod(&a[1], &b[0]);
    let s2 = prod(&a[0], &b[1]);
    let s11 = prod(&a[2], &b[0]);
    let s12 = prod(&a[1], &b[1]);
    let s22 = prod(&a[0], &b[2]);
    (0..m * m)
        .map(|k| {
            let (i, j) = (k / m, k % m);
            Moments {
                s0: s0[(i, j)],
                sq: sq[(i, j)],
                s1: s1[(i, j)],
                s2: s2[(i, j)],
                s11: s11[(i, j)],
                s12: s12[(i, j)],
                s22: s22[(i, j)],
            }
        })
        .collect()
}

fn finish_fit(mom: Moments, n: usize, h: f64) -> LocalFit {
    let Moments {
        s0,
        sq,
        s1,
        s2,
        s11,
        s12,
        s22,
    } = mom;
    let kde = s0 / (n as f64 * 2.0 * PI * h * h);
    if s0 <= 0.0 {
        return LocalFit {
            density: 0.0,
            fallback: true,
        };
    }
    let fallback = LocalFit {
        density: kde,
        fallback: true,
    };
    if s0 * s0 / sq < MIN_EFFECTIVE_POINTS {
        return fallback;
    }
    let (m1, m2) = (s1 / s0, s2 / s0);
    let c11 = s11 / s0 - m1 * m1;
    let c12 = s12 / s0 - m1 * m2;
    let c22 = s22 / s0 - m2 * m2;
    let det = c11 * c22 - c12 * c12;
    if !(det > 1e-8 * h * h * h * h) {
        return fallback;
    }
    // mean' Sigma^-1 mean
    let quad = (c22 * m1 * m1 - 2.0 * c12 * m1 * m2 + c11 * m2 * m2) / det;
    let density = kde * h * h / det.sqrt() * (-0.5 * quad).exp();
    if density.is_finite() {
        LocalFit {
            density,
            fallback: false,
        }
    } else {
        fallback
    }
}

fn to_probit(u: &[f64], v: &[f64]) -> Vec<(f64, f64)> {
    u.iter()
        .zip(v)
        .map(|(&a, &b)| {
            (
                normal_quantile_unchecked(clamp_unit(a)),
                normal_quantile_unchecked(clamp_unit(b)),
            )
        })
        .collect()
}

fn nearest_neighbor_bandwidths(points: &[(f64, f64)], fractions: &[f64]) -> Vec<f64> {
    let n = points.len();
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let (dx, dy) = (points[i].0 - points[j].0, points[i].1 - points[j].1);
            dists.push((dx * dx + dy * dy).sqrt());
        }
    }
    let scale = (n as f64).powf(-1.0 / 6.0);
    fractions
        .iter()
        .map(|&alpha| {
            let k = ((alpha * dists.len() as f64).ceil() as usize).clamp(1, dists.len()) - 1;
            let (_, kth, _) = dists.select_nth_unstable_by(k, f64::total_cmp);
            (*kth * scale).max(1e-3)
        })
        .collect()
}

fn validate_fractions(fractions: &[f64]) -> Result<()> {
    if fractions.is_empty() {
        return Err(Error::Argument("empty nearest-neighbour fraction list".into()));
    }
    if let Some(&bad) = fractions.iter().find(|&&a| !(a > 0.0 && a <= 1.0)) {
        return Err(Error::Domain {
            what: "nearest-neighbour fraction",
            value: bad,
        });
    }
    Ok(())
}

/// Outcome of the nearest-neighbour bandwidth search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthSelection {
    pub fraction: f64,
    pub bandwidth: f64,
}

fn cross_validated_bandwidth(
    points: &[(f64, f64)],
    fractions: &[f64],
    folds: usize,
    seed: u64,
) -> Result<BandwidthSelection> {
    validate_fractions(fractions)?;
    let n = points.len();
    if n < MIN_POINTS {
        return Err(Error::Precondition(format!(
            "bandwidth selection needs at least {MIN_POINTS} points, got {n}"
        )));
    }
    let candidates = nearest_neighbor_bandwidths(points, fractions);
    if candidates.len() == 1 {
        return Ok(BandwidthSelection {
            fraction: fractions[0],
            bandwidth: candidates[0],
        });
    }
    let folds = folds.clamp(2, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % folds;
    }
    let splits: Vec<(Vec<(f64, f64)>, Vec<(f64, f64)>)> = (0..folds)
        .map(|k| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| fold_of[i] == k);
            (
                train.iter().map(|&i| points[i]).collect(),
                test.iter().map(|&i| points[i]).collect(),
            )
        })
        .collect();

    let mut best = (f64::NEG_INFINITY, 0);
    for (c, &h) in candidates.iter().enumerate() {
        let score: f64 = splits
            .iter()
            .map(|(train, test)| {
                test.iter()
                    .map(|&(a, b)| local_fit(train, a, b, h).density.max(1e-300).ln())
                    .sum::<f64>()
            })
            .sum();
        if score > best.0 {
            best = (score, c);
        }
    }
    Ok(BandwidthSelection {
        fraction: fractions[best.1],
        bandwidth: candidates[best.1],
    })
}

/// Nearest-neighbour bandwidth chosen by 5-fold cross-validated likelihood
/// (fold assignment seeded with 0).
pub fn select_bandwidth(u: &[f64], v: &[f64], fractions: &[f64]) -> Result<f64> {
    select_bandwidth_seeded(u, v, fractions, 5, 0).map(|s| s.bandwidth)
}

pub fn select_bandwidth_seeded(
    u: &[f64],
    v: &[f64],
    fractions: &[f64],
    folds: usize,
    seed: u64,
) -> Result<BandwidthSelection> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    cross_validated_bandwidth(&to_probit(u, v), fractions, folds, seed)
}

/// Fits the probit-transformation local-likelihood estimator on a grid.
pub fn fit_probit_ll(u: &[f64], v: &[f64], config: &SmootherConfig) -> Result<DensityGrid> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    if u.len() < MIN_POINTS {
        return Err(Error::Precondition(format!(
            "probit local-likelihood fit needs at least {MIN_POINTS} points, got {}",
            u.len()
        )));
    }
    if config.grid_size < 2 || !(config.z_max > 0.0) {
        return Err(Error::Argument("grid needs m >= 2 and z_max > 0".into()));
    }
    let points = to_probit(u, v);
    let h = match &config.bandwidth {
        BandwidthChoice::Fixed(h) if *h > 0.0 => *h,
        BandwidthChoice::Fixed(h) => {
            return Err(Error::Domain {
                what: "bandwidth",
                value: *h,
            })
        }
        BandwidthChoice::NearestNeighbor {
            fractions,
            folds,
            seed,
        } => cross_validated_bandwidth(&points, fractions, *folds, *seed)?.bandwidth,
    };
    let m = config.grid_size;
    let nodes = node_positions(m, config.z_max);
    let fits: Vec<LocalFit> = grid_moments(&points, &nodes, h)
        .into_iter()
        .map(|mom| finish_fit(mom, points.len(), h))
        .collect();
    let fallbacks = fits.iter().filter(|f| f.fallback).count();
    let values = fits.into_iter().map(|f| f.density).collect();
    let mut grid = DensityGrid::from_values(m, config.z_max, h, values)?;
    grid.fallback_nodes = fallbacks;
    Ok(grid)
}

fn node_positions(m: usize, z_max: f64) -> Vec<f64> {
    let step = 2.0 * z_max / (m - 1) as f64;
    (0..m).map(|k| -z_max + k as f64 * step).collect()
}

/// Serialized form of a [`DensityGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawGrid {
    m: usize,
    z_max: f64,
    bandwidth: f64,
    normalization: f64,
    #[serde(default)]
    fallback_nodes: usize,
    values: Vec<f64>,
}

/// Per-line cumulative integrals of the interpolated copula density against
/// `phi`, used for h-functions.
#[derive(Debug, Clone, PartialEq, Default)]
struct LineTables {
    // cum[line * m + k] = integral from -inf to z_k
    cum: Vec<f64>,
}

/// Probit-scale density grid of a transformed bivariate sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct DensityGrid {
    m: usize,
    z_max: f64,
    bandwidth: f64,
    normalization: f64,
    /// Number of nodes that used the kernel fallback.
    pub fallback_nodes: usize,
    values: Vec<f64>,
    nodes: Vec<f64>,
    // copula-scale node values, values / (phi(z_i) phi(z_j))
    copula: Vec<f64>,
    // integrals of each hat basis function against phi, tails folded into the ends
    basis_mass: Vec<f64>,
    along_second: LineTables,
    along_first: LineTables,
}

impl TryFrom<RawGrid> for DensityGrid {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        let mut grid = Self::from_values(raw.m, raw.z_max, raw.bandwidth, raw.values)?;
        grid.normalization = raw.normalization;
        grid.fallback_nodes = raw.fallback_nodes;
        Ok(grid)
    }
}

impl From<DensityGrid> for RawGrid {
    fn from(g: DensityGrid) -> Self {
        Self {
            m: g.m,
            z_max: g.z_max,
            bandwidth: g.bandwidth,
            normalization: g.normalization,
            fallback_nodes: g.fallback_nodes,
            values: g.values,
        }
    }
}

impl DensityGrid {
    /// Builds a grid from row-major node values (first index along the
    /// first argument) and normalizes it to unit mass on the unit square.
    pub fn from_values(m: usize, z_max: f64, bandwidth: f64, values: Vec<f64>) -> Result<Self> {
        if m < 2 || values.len() != m * m {
            return Err(Error::DimensionMismatch {
                expected: m * m,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Argument("grid values must be finite and nonnegative".into()));
        }
        let nodes = node_positions(m, z_max);
        let pdf: Vec<f64> = nodes.iter().map(|&z| std_normal_pdf(z)).collect();
        let copula: Vec<f64> = (0..m * m)
            .map(|k| values[k] / (pdf[k / m] * pdf[k % m]))
            .collect();
        let (left, right) = cell_weights(&nodes);
        let tail = std_normal_cdf(-z_max);
        let mut basis_mass = vec![0.0; m];
        for k in 0..m - 1 {
            basis_mass[k] += left[k];
            basis_mass[k + 1] += right[k];
        }
        basis_mass[0] += tail;
        basis_mass[m - 1] += tail;

        let build = |at: &dyn Fn(usize, usize) -> f64| -> LineTables {
            let mut cum = vec![0.0; m * m];
            for line in 0..m {
                let mut acc = tail * at(line, 0);
                cum[line * m] = acc;
                for k in 0..m - 1 {
                    acc += at(line, k) * left[k] + at(line, k + 1) * right[k];
                    cum[line * m + k + 1] = acc;
                }
            }
            LineTables { cum }
        };
        let along_second = build(&|i, j| copula[i * m + j]);
        let along_first = build(&|j, i| copula[i * m + j]);

        let mass: f64 = (0..m)
            .map(|i| {
                let row: f64 = (0..m).map(|j| copula[i * m + j] * basis_mass[j]).sum();
                row * basis_mass[i]
            })
            .sum();
        if !(mass > 0.0) {
            return Err(Error::Argument("grid has zero mass".into()));
        }
        Ok(Self {
            m,
            z_max,
            bandwidth,
            normalization: 1.0 / mass,
            fallback_nodes: 0,
            values,
            nodes,
            copula,
            basis_mass,
            along_second,
            along_first,
        })
    }

    pub fn grid_size(&self) -> usize {
        self.m
    }

    pub fn z_max(&self) -> f64 {
        self.z_max
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Row-major node values in probit space.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn z_nodes(&self) -> &[f64] {
        &self.nodes
    }

    fn step(&self) -> f64 {
        2.0 * self.z_max / (self.m - 1) as f64
    }

    // Cell index and interpolation weight of a probit coordinate, clamped
    // to the grid extent.
    fn locate(&self, u: f64) -> (usize, f64) {
        let z = normal_quantile_unchecked(clamp_unit(u)).clamp(-self.z_max, self.z_max);
        let pos = (z + self.z_max) / self.step();
        let k = (pos.floor() as usize).min(self.m - 2);
        (k, (pos - k as f64).clamp(0.0, 1.0))
    }

    /// Back-transformed copula density at `(u, v)`.
    pub fn density(&self, u: f64, v: f64) -> f64 {
        let m = self.m;
        let (i, wu) = self.locate(u);
        let (j, wv) = self.locate(v);
        let c = &self.copula;
        let val = (1.0 - wu) * ((1.0 - wv) * c[i * m + j] + wv * c[i * m + j + 1])
            + wu * ((1.0 - wv) * c[(i + 1) * m + j] + wv * c[(i + 1) * m + j + 1]);
        val * self.normalization
    }

    /// `P(V <= v | U = u)`, normalized along the conditioning line.
    pub fn h_given_first(&self, v: f64, u: f64) -> f64 {
        self.conditional(&self.along_second, u, v, |line, k| self.copula[line * self.m + k])
    }

    /// `P(U <= u | V = v)`, normalized along the conditioning line.
    pub fn h_given_second(&self, u: f64, v: f64) -> f64 {
        self.conditional(&self.along_first, v, u, |line, k| self.copula[k * self.m + line])
    }

    fn conditional(
        &self,
        tables: &LineTables,
        given: f64,
        upper: f64,
        at: impl Fn(usize, usize) -> f64,
    ) -> f64 {
        if upper >= 1.0 {
            return 1.0;
        }
        if upper <= 0.0 {
            return 0.0;
        }
        let m = self.m;
        let (line, w) = self.locate(given);
        let value = |k: usize| (1.0 - w) * at(line, k) + w * at(line + 1, k);
        let cum = |k: usize| (1.0 - w) * tables.cum[line * m + k] + w * tables.cum[(line + 1) * m + k];
        let tail = std_normal_cdf(-self.z_max);
        let total = cum(m - 1) + tail * value(m - 1);
        if !(total > 0.0) {
            return upper;
        }
        let z = normal_quantile_unchecked(clamp_unit(upper));
        let part = if z <= -self.z_max {
            value(0) * upper
        } else if z >= self.z_max {
            cum(m - 1) + value(m - 1) * (tail - (1.0 - upper))
        } else {
            let pos = (z + self.z_max) / self.step();
            let k = (pos.floor() as usize).min(m - 2);
            let (a, b) = (self.nodes[k], self.nodes[k + 1]);
            let (l, r) = partial_cell_weights(a, b, z);
            cum(k) + value(k) * l + value(k + 1) * r
        };
        (part / total).clamp(0.0, 1.0)
    }

    /// Text artifact: a header line, then `m` rows of `m` values.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "density-grid m={} z_max={} bandwidth={} normalization={} fallback_nodes={}\n",
            self.m, self.z_max, self.bandwidth, self.normalization, self.fallback_nodes
        );
        for row in self.values.chunks(self.m) {
            let line: Vec<String> = row.iter().map(f64::to_string).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty grid artifact".into()))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("density-grid") {
            return Err(Error::Parse("missing density-grid header".into()));
        }
        let mut get = |key: &str| -> Result<String> {
            let field = fields
                .next()
                .ok_or_else(|| Error::Parse(format!("missing header field {key}")))?;
            field
                .strip_prefix(key)
                .and_then(|s| s.strip_prefix('='))
                .map(str::to_owned)
                .ok_or_else(|| Error::Parse(format!("expected {key}=..., found {field}")))
        };
        let parse = |s: String| -> Result<f64> {
            s.parse::<f64>().map_err(|e| Error::Parse(format!("{s}: {e}")))
        };
        let m: usize = get("m")?
            .parse()
            .map_err(|e| Error::Parse(format!("grid size: {e}")))?;
        let z_max = parse(get("z_max")?)?;
        let bandwidth = parse(get("bandwidth")?)?;
        let normalization = parse(get("normalization")?)?;
        let fallback_nodes: usize = get("fallback_nodes")?
            .parse()
            .map_err(|e| Error::Parse(format!("fallback count: {e}")))?;
        let values: Vec<f64> = lines
            .flat_map(str::split_whitespace)
            .map(|s| parse(s.to_owned()))
            .collect::<Result<_>>()?;
        Self::try_from(RawGrid {
            m,
            z_max,
            bandwidth,
            normalization,
            fallback_nodes,
            values,
        })
    }
}

// For each cell [z_k, z_{k+1}]: integrals of the left and right hat pieces
// against phi.
fn cell_weights(nodes: &[f64]) -> (Vec<f64>, Vec<f64>) {
    nodes
        .windows(2)
        .map(|w| partial_cell_weights(w[0], w[1], w[1]))
        .unzip()
}

// Integrals over [a, z] of (b - t)/(b - a) phi(t) and (t - a)/(b - a) phi(t).
fn partial_cell_weights(a: f64, b: f64, z: f64) -> (f64, f64) {
    let width = b - a;
    let dcdf = std_normal_cdf(z) - std_normal_cdf(a);
    let dpdf = std_normal_pdf(z) - std_normal_pdf(a);
    let left = (b * dcdf + dpdf) / width;
    let right = (-dpdf - a * dcdf) / width;
    (left.max(0.0), right.max(0.0))
}

/// Copula density of a fitted grid.
pub fn grid_copula_density(grid: &DensityGrid, u: f64, v: f64) -> f64 {
    grid.density(u, v)
}

/// Conditional distribution of the second argument given the first.
pub fn grid_hfunc(grid: &DensityGrid, upper: f64, given_u0: f64) -> f64 {
    grid.h_given_first(upper, given_u0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn independence_grid(m: usize) -> DensityGrid {
        let nodes = node_positions(m, 3.2);
        let values = (0..m * m)
            .map(|k| std_normal_pdf(nodes[k / m]) * std_normal_pdf(nodes[k % m]))
            .collect();
        DensityGrid::from_values(m, 3.2, 0.5, values).unwrap()
    }

    #[test]
    fn independence_grid_is_flat() {
        let g = independence_grid(64);
        assert!((g.normalization() - 1.0).abs() < 1e-12);
        for u in [1e-6, 0.01, 0.2, 0.5, 0.77, 0.999] {
            for v in [0.003, 0.4, 0.9, 1.0 - 1e-9] {
                assert!((g.density(u, v) - 1.0).abs() < 1e-6);
                assert!((g.h_given_first(v, u) - v).abs() < 1e-3);
                assert!((g.h_given_second(u, v) - u).abs() < 1e-3);
            }
        }
        assert_eq!(g.h_given_first(1.0, 0.3), 1.0);
        assert_eq!(g.h_given_first(0.0, 0.3), 0.0);
    }

    #[test]
    fn bandwidth_precondition_and_single_fraction() {
        let u: Vec<f64> = (1..=30).map(|i| i as f64 / 31.0).collect();
        let v: Vec<f64> = u.iter().map(|x| (x * 7.0) % 1.0).map(|x| x.max(0.01)).collect();
        assert!(select_bandwidth(&u, &v, &[]).is_err());
        assert!(select_bandwidth(&u, &v, &[1.5]).is_err());
        assert!(select_bandwidth(&u[..10], &v[..10], &[0.5, 0.6]).is_err());
        let single = select_bandwidth(&u, &v, &[0.45]).unwrap();
        let pts = to_probit(&u, &v);
        assert_eq!(single, nearest_neighbor_bandwidths(&pts, &[0.45])[0]);
        assert!(fit_probit_ll(&u[..19], &v[..19], &SmootherConfig::default()).is_err());
    }

    #[test]
    fn local_fit_recovers_gaussian_exactly() {
        // A log-quadratic density is reproduced exactly by moment matching
        // in the large-sample limit; check on a dense deterministic lattice.
        let mut pts = Vec::new();
        let step = 0.05;
        let mut weights = Vec::new();
        for i in -120..=120 {
            for j in -120..=120 {
                let (x, y) = (i as f64 * step, j as f64 * step);
                pts.push((x, y));
                weights.push(std_normal_pdf(x) * std_normal_pdf(y));
            }
        }
        // Weighted lattice stands in for a sample: replicate via moments.
        let h = 0.4;
        let (a, b) = (0.7, -0.3);
        let mut s = [0.0; 6];
        for (&(x, y), &w0) in pts.iter().zip(&weights) {
            let (dx, dy) = (x - a, y - b);
            let w = w0 * (-(dx * dx + dy * dy) / (2.0 * h * h)).exp() * step * step;
            s[0] += w;
            s[1] += w * dx;
            s[2] += w * dy;
            s[3] += w * dx * dx;
            s[4] += w * dx * dy;
            s[5] += w * dy * dy;
        }
        let kde = s[0] / (2.0 * PI * h * h);
        let (m1, m2) = (s[1] / s[0], s[2] / s[0]);
        let c11 = s[3] / s[0] - m1 * m1;
        let c12 = s[4] / s[0] - m1 * m2;
        let c22 = s[5] / s[0] - m2 * m2;
        let det = c11 * c22 - c12 * c12;
        let quad = (c22 * m1 * m1 - 2.0 * c12 * m1 * m2 + c11 * m2 * m2) / det;
        let est = kde * h * h / det.sqrt() * (-0.5 * quad).exp();
        let truth = std_normal_pdf(a) * std_normal_pdf(b);
        assert!((est - truth).abs() / truth < 1e-6, "{est} vs {truth}");
    }

    #[test]
    fn text_artifact_round_trips() {
        let mut g = independence_grid(8);
        g.fallback_nodes = 3;
        let back = DensityGrid::from_text(&g.to_text()).unwrap();
        assert_eq!(back, g);
        assert!(DensityGrid::from_text("nonsense").is_err());
        let json = serde_json::to_string(&g).unwrap();
        let back: DensityGrid = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);
    }
}
