//! One-parameter bivariate copula families, their rotations, maximum
//! likelihood fitting and AIC selection.

use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{normal_quantile_unchecked, std_normal_cdf};

/// Arguments are clamped into `[EPS_U, 1 - EPS_U]` before evaluation.
pub const EPS_U: f64 = 1e-10;

pub(crate) fn clamp_unit(u: f64) -> f64 {
    u.clamp(EPS_U, 1.0 - EPS_U)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyTag {
    Independence,
    Gaussian,
    Clayton,
    Gumbel,
    Frank,
    Joe,
}

impl FamilyTag {
    fn name(self) -> &'static str {
        match self {
            Self::Independence => "independence",
            Self::Gaussian => "gaussian",
            Self::Clayton => "clayton",
            Self::Gumbel => "gumbel",
            Self::Frank => "frank",
            Self::Joe => "joe",
        }
    }

    /// Gaussian and Frank already cover negative dependence through the sign
    /// of their parameter.
    fn rotatable(self) -> bool {
        matches!(self, Self::Clayton | Self::Gumbel | Self::Joe)
    }

    /// Closed parameter box searched by the ML fit.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            Self::Independence => (0.0, 0.0),
            Self::Gaussian => (-0.999, 0.999),
            Self::Clayton => (1e-4, 28.0),
            Self::Gumbel => (1.0 + 1e-4, 17.0),
            Self::Frank => (-35.0, 35.0),
            Self::Joe => (1.0 + 1e-4, 30.0),
        }
    }

    // Search coordinate: log scale for the one-sided families.
    fn to_search(self, theta: f64) -> f64 {
        match self {
            Self::Clayton => theta.ln(),
            Self::Gumbel | Self::Joe => (theta - 1.0).ln(),
            _ => theta,
        }
    }

    fn from_search(self, s: f64) -> f64 {
        match self {
            Self::Clayton => s.exp(),
            Self::Gumbel | Self::Joe => 1.0 + s.exp(),
            _ => s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rotation {
    #[serde(rename = "0")]
    R0,
    #[serde(rename = "90")]
    R90,
    #[serde(rename = "180")]
    R180,
    #[serde(rename = "270")]
    R270,
}

impl Rotation {
    pub fn degrees(self) -> u32 {
        match self {
            Self::R0 => 0,
            Self::R90 => 90,
            Self::R180 => 180,
            Self::R270 => 270,
        }
    }

    /// Rotation of the copula with its arguments swapped.
    fn transposed(self) -> Self {
        match self {
            Self::R90 => Self::R270,
            Self::R270 => Self::R90,
            r => r,
        }
    }
}

/// A family together with a rotation of its argument square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairFamily {
    pub tag: FamilyTag,
    pub rotation: Rotation,
}

impl PairFamily {
    pub fn new(tag: FamilyTag, rotation: Rotation) -> Result<Self> {
        if rotation != Rotation::R0 && !tag.rotatable() {
            return Err(Error::Argument(format!(
                "{} admits no rotation other than 0",
                tag.name()
            )));
        }
        Ok(Self { tag, rotation })
    }

    pub const fn unrotated(tag: FamilyTag) -> Self {
        Self {
            tag,
            rotation: Rotation::R0,
        }
    }

    pub fn parameter_count(self) -> usize {
        usize::from(self.tag != FamilyTag::Independence)
    }

    /// Independence, Gaussian, Frank, and Clayton/Gumbel/Joe in all four rotations.
    pub fn default_candidates() -> Vec<Self> {
        let mut out = vec![
            Self::unrotated(FamilyTag::Independence),
            Self::unrotated(FamilyTag::Gaussian),
            Self::unrotated(FamilyTag::Frank),
        ];
        for tag in [FamilyTag::Clayton, FamilyTag::Gumbel, FamilyTag::Joe] {
            for rotation in [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270] {
                out.push(Self { tag, rotation });
            }
        }
        out
    }
}

impl fmt::Display for PairFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.rotation == Rotation::R0 {
            f.write_str(self.tag.name())
        } else {
            write!(f, "{}{}", self.tag.name(), self.rotation.degrees())
        }
    }
}

impl FromStr for PairFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let split = s.find(|c: char| c.is_ascii_digit()).unwrap_or(s.len());
        let (name, deg) = s.split_at(split);
        let tag = match name {
            "independence" | "indep" => FamilyTag::Independence,
            "gaussian" | "normal" => FamilyTag::Gaussian,
            "clayton" => FamilyTag::Clayton,
            "gumbel" => FamilyTag::Gumbel,
            "frank" => FamilyTag::Frank,
            "joe" => FamilyTag::Joe,
            other => return Err(Error::Argument(format!("unknown copula family {other:?}"))),
        };
        let rotation = match deg {
            "" | "0" => Rotation::R0,
            "90" => Rotation::R90,
            "180" => Rotation::R180,
            "270" => Rotation::R270,
            other => return Err(Error::Argument(format!("unknown rotation {other:?}"))),
        };
        Self::new(tag, rotation)
    }
}

/// A fitted (or explicitly parameterized) parametric pair copula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParametricPair {
    pub family: PairFamily,
    pub theta: f64,
    pub loglik: f64,
    pub aic: f64,
}

impl ParametricPair {
    /// A pair with a given parameter and no fit statistics (`loglik = 0`).
    pub fn with_parameter(family: PairFamily, theta: f64) -> Result<Self> {
        let (lo, hi) = family.tag.bounds();
        let ok = match family.tag {
            FamilyTag::Independence => true,
            FamilyTag::Gaussian => theta > -1.0 && theta < 1.0,
            FamilyTag::Clayton => theta > 0.0 && theta <= hi,
            FamilyTag::Gumbel | FamilyTag::Joe => theta >= 1.0 && theta <= hi,
            FamilyTag::Frank => theta != 0.0 && theta >= lo && theta <= hi,
        };
        if !ok || !theta.is_finite() {
            return Err(Error::Domain {
                what: "copula parameter",
                value: theta,
            });
        }
        let k = family.parameter_count() as f64;
        Ok(Self {
            family,
            theta: if family.tag == FamilyTag::Independence { 0.0 } else { theta },
            loglik: 0.0,
            aic: 2.0 * k,
        })
    }

    pub fn independence() -> Self {
        Self {
            family: PairFamily::unrotated(FamilyTag::Independence),
            theta: 0.0,
            loglik: 0.0,
            aic: 0.0,
        }
    }

    pub fn density(&self, u: f64, v: f64) -> f64 {
        pair_density(self, u, v)
    }

    pub fn log_density(&self, u: f64, v: f64) -> f64 {
        rotated_log_density(self.family, self.theta, clamp_unit(u), clamp_unit(v))
    }

    /// `P(U <= u | V = v)`.
    pub fn h_given_second(&self, u: f64, v: f64) -> f64 {
        pair_hfunc(self, u, v)
    }

    /// `P(V <= v | U = u)`.
    pub fn h_given_first(&self, v: f64, u: f64) -> f64 {
        let fam = PairFamily {
            tag: self.family.tag,
            rotation: self.family.rotation.transposed(),
        };
        rotated_h(fam, self.theta, clamp_unit(v), clamp_unit(u))
    }

    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        rotated_cdf(self.family, self.theta, clamp_unit(u), clamp_unit(v))
    }

    /// Inverse of `h_given_second` in its first argument, by bisection.
    pub fn h_inverse_given_second(&self, p: f64, v: f64) -> f64 {
        invert_monotone(|u| self.h_given_second(u, v), p)
    }

    /// Inverse of `h_given_first` in its first argument, by bisection.
    pub fn h_inverse_given_first(&self, p: f64, u: f64) -> f64 {
        invert_monotone(|v| self.h_given_first(v, u), p)
    }
}

pub(crate) fn invert_monotone(f: impl Fn(f64) -> f64, p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    clamp_unit(0.5 * (lo + hi))
}

/// Copula density with rotation applied; arguments are clamped to the interior.
pub fn pair_density(pair: &ParametricPair, u: f64, v: f64) -> f64 {
    pair.log_density(u, v).exp()
}

/// Conditional distribution `h(u | v) = dC(u, v) / dv`.
pub fn pair_hfunc(pair: &ParametricPair, u: f64, given_v: f64) -> f64 {
    rotated_h(pair.family, pair.theta, clamp_unit(u), clamp_unit(given_v))
}

fn rotated_log_density(fam: PairFamily, theta: f64, u: f64, v: f64) -> f64 {
    let (a, b) = match fam.rotation {
        Rotation::R0 => (u, v),
        Rotation::R90 => (1.0 - u, v),
        Rotation::R180 => (1.0 - u, 1.0 - v),
        Rotation::R270 => (u, 1.0 - v),
    };
    base_log_density(fam.tag, theta, a, b)
}

fn rotated_h(fam: PairFamily, theta: f64, u: f64, v: f64) -> f64 {
    let h = match fam.rotation {
        Rotation::R0 => base_h(fam.tag, theta, u, v),
        Rotation::R90 => 1.0 - base_h(fam.tag, theta, 1.0 - u, v),
        Rotation::R180 => 1.0 - base_h(fam.tag, theta, 1.0 - u, 1.0 - v),
        Rotation::R270 => base_h(fam.tag, theta, u, 1.0 - v),
    };
    h.clamp(0.0, 1.0)
}

fn rotated_cdf(fam: PairFamily, theta: f64, u: f64, v: f64) -> f64 {
    match fam.rotation {
        Rotation::R0 => base_cdf(fam.tag, theta, u, v),
        Rotation::R90 => v - base_cdf(fam.tag, theta, 1.0 - u, v),
        Rotation::R180 => u + v - 1.0 + base_cdf(fam.tag, theta, 1.0 - u, 1.0 - v),
        Rotation::R270 => u - base_cdf(fam.tag, theta, u, 1.0 - v),
    }
}

/// `ln(e^a + e^b - e^c)` for `c <= max(a, b)`.
fn log_sum_minus(a: f64, b: f64, c: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp() - (c - m).exp()).ln()
}

fn base_log_density(tag: FamilyTag, theta: f64, u: f64, v: f64) -> f64 {
    match tag {
        FamilyTag::Independence => 0.0,
        FamilyTag::Gaussian => {
            let (x, y) = (normal_quantile_unchecked(u), normal_quantile_unchecked(v));
            let r2 = 1.0 - theta * theta;
            -0.5 * r2.ln() - (theta * theta * (x * x + y * y) - 2.0 * theta * x * y) / (2.0 * r2)
        }
        FamilyTag::Clayton => {
            let (lu, lv) = (u.ln(), v.ln());
            // ln(u^-t + v^-t - 1)
            let l = log_sum_minus(-theta * lu, -theta * lv, 0.0);
            (1.0 + theta).ln() - (1.0 + theta) * (lu + lv) - (2.0 + 1.0 / theta) * l
        }
        FamilyTag::Gumbel => {
            let (x, y) = (-u.ln(), -v.ln());
            let (lx, ly) = (x.ln(), y.ln());
            let la = log_sum_minus(theta * lx, theta * ly, f64::NEG_INFINITY) / theta;
            let a = la.exp();
            -a - u.ln() - v.ln() + (theta - 1.0) * (lx + ly) + (1.0 - 2.0 * theta) * la
                + (a + theta - 1.0).ln()
        }
        FamilyTag::Frank => {
            if theta < 0.0 {
                return frank_log_density(-theta, 1.0 - u, v);
            }
            frank_log_density(theta, u, v)
        }
        FamilyTag::Joe => {
            let (a, b) = (theta * (1.0 - u).ln(), theta * (1.0 - v).ln());
            let ls = log_sum_minus(a, b, a + b);
            (1.0 / theta - 2.0) * ls
                + (theta - 1.0) * ((1.0 - u).ln() + (1.0 - v).ln())
                + (theta - 1.0 + ls.exp()).ln()
        }
    }
}

// e^{-tu} + e^{-tv} - e^{-t(u+v)} - e^{-t}, the Frank denominator for t > 0.
fn frank_den(t: f64, u: f64, v: f64) -> f64 {
    (-t * u).exp() + (-t * v).exp() - (-t * (u + v)).exp() - (-t).exp()
}

fn frank_log_density(t: f64, u: f64, v: f64) -> f64 {
    if t < 1e-8 {
        return 0.0;
    }
    let den = frank_den(t, u, v);
    t.ln() + (-(-t).exp_m1()).ln() - t * (u + v) - 2.0 * den.ln()
}

fn base_h(tag: FamilyTag, theta: f64, u: f64, v: f64) -> f64 {
    match tag {
        FamilyTag::Independence => u,
        FamilyTag::Gaussian => {
            let (x, y) = (normal_quantile_unchecked(u), normal_quantile_unchecked(v));
            std_normal_cdf((x - theta * y) / (1.0 - theta * theta).sqrt())
        }
        FamilyTag::Clayton => {
            let (lu, lv) = (u.ln(), v.ln());
            let l = log_sum_minus(-theta * lu, -theta * lv, 0.0);
            (-(theta + 1.0) * lv - (1.0 / theta + 1.0) * l).exp()
        }
        FamilyTag::Gumbel => {
            let (x, y) = (-u.ln(), -v.ln());
            let (lx, ly) = (x.ln(), y.ln());
            let la = log_sum_minus(theta * lx, theta * ly, f64::NEG_INFINITY) / theta;
            (-la.exp() - v.ln() + (theta - 1.0) * ly + (1.0 - theta) * la).exp()
        }
        FamilyTag::Frank => {
            if theta < 0.0 {
                return 1.0 - frank_h(-theta, 1.0 - u, v);
            }
            frank_h(theta, u, v)
        }
        FamilyTag::Joe => {
            let (a, b) = (theta * (1.0 - u).ln(), theta * (1.0 - v).ln());
            let ls = log_sum_minus(a, b, a + b);
            ((1.0 / theta - 1.0) * ls + (theta - 1.0) * (1.0 - v).ln()).exp() * -(a.exp_m1())
        }
    }
}

fn frank_h(t: f64, u: f64, v: f64) -> f64 {
    if t < 1e-8 {
        return u;
    }
    (-t * v).exp() * -(-t * u).exp_m1() / frank_den(t, u, v)
}

fn base_cdf(tag: FamilyTag, theta: f64, u: f64, v: f64) -> f64 {
    match tag {
        FamilyTag::Independence => u * v,
        FamilyTag::Gaussian => gaussian_cdf(theta, u, v),
        FamilyTag::Clayton => {
            let l = log_sum_minus(-theta * u.ln(), -theta * v.ln(), 0.0);
            (-l / theta).exp()
        }
        FamilyTag::Gumbel => {
            let (lx, ly) = ((-u.ln()).ln(), (-v.ln()).ln());
            let la = log_sum_minus(theta * lx, theta * ly, f64::NEG_INFINITY) / theta;
            (-la.exp()).exp()
        }
        FamilyTag::Frank => {
            if theta < 0.0 {
                return v - frank_cdf(-theta, 1.0 - u, v);
            }
            frank_cdf(theta, u, v)
        }
        FamilyTag::Joe => {
            let (a, b) = (theta * (1.0 - u).ln(), theta * (1.0 - v).ln());
            1.0 - (log_sum_minus(a, b, a + b) / theta).exp()
        }
    }
}

fn frank_cdf(t: f64, u: f64, v: f64) -> f64 {
    if t < 1e-8 {
        return u * v;
    }
    -(frank_den(t, u, v) / -(-t).exp_m1()).ln() / t
}

// C(u, v) = int_0^v h(u | s) ds, by Gauss-Legendre on [0, v].
fn gaussian_cdf(rho: f64, u: f64, v: f64) -> f64 {
    let a = normal_quantile_unchecked(u);
    let b = normal_quantile_unchecked(v);
    upper_bivariate_normal(-a, -b, rho).clamp(0.0, u.min(v))
}

/// `P(X > h, Y > k)` for a standard bivariate normal with correlation `r`
/// (Genz's algorithm).
fn upper_bivariate_normal(h: f64, k: f64, r: f64) -> f64 {
    use std::f64::consts::PI;
    let points = if r.abs() < 0.3 {
        6
    } else if r.abs() < 0.75 {
        12
    } else {
        20
    };
    let (xs, ws) = gauss_legendre(points);
    let mut hk = h * k;
    if r.abs() < 0.925 {
        let hs = 0.5 * (h * h + k * k);
        let asr = r.asin();
        let sum: f64 = xs
            .iter()
            .zip(&ws)
            .map(|(x, w)| {
                let sn = (0.5 * asr * (x + 1.0)).sin();
                w * ((sn * hk - hs) / (1.0 - sn * sn)).exp()
            })
            .sum();
        return sum * asr / (4.0 * PI) + std_normal_cdf(-h) * std_normal_cdf(-k);
    }
    let mut k = k;
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    let mut bvn = 0.0;
    if r.abs() < 1.0 {
        let as_ = (1.0 - r) * (1.0 + r);
        let mut a = as_.sqrt();
        let bs = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        bvn = a
            * (-0.5 * (bs / as_ + hk)).exp()
            * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0);
        if hk > -160.0 {
            let b = bs.sqrt();
            bvn -= (-0.5 * hk).exp()
                * (2.0 * PI).sqrt()
                * std_normal_cdf(-b / a)
                * b
                * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a *= 0.5;
        for (x, w) in xs.iter().zip(&ws) {
            let xs2 = (a * (x + 1.0)).powi(2);
            let rs = (1.0 - xs2).sqrt();
            let e = -0.5 * (bs / xs2 + hk);
            if e > -100.0 {
                bvn += a
                    * w
                    * e.exp()
                    * ((-hk * xs2 / (2.0 * (1.0 + rs).powi(2))).exp() / rs
                        - (1.0 + c * xs2 * (1.0 + d * xs2)));
            }
        }
        bvn = -bvn / (2.0 * PI);
    }
    if r > 0.0 {
        bvn + std_normal_cdf(-h.max(k))
    } else {
        let mut out = -bvn;
        if k > h {
            out += std_normal_cdf(k) - std_normal_cdf(h);
        }
        out
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Newton on the Legendre
/// recurrence).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn loglik(fam: PairFamily, theta: f64, u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(&a, &b)| rotated_log_density(fam, theta, clamp_unit(a), clamp_unit(b)))
        .sum()
}

const GOLDEN_TOL: f64 = 1e-9;
const SCORE_TOL: f64 = 1e-7;

/// Maximum likelihood fit of `family` to pseudo-observations `(u_i, v_i)`.
///
/// Golden-section search over the family's parameter box (on a log scale
/// for the one-sided families), refined by safeguarded Newton steps on the
/// natural scale using finite-difference derivatives.
pub fn fit_pair_ml(u: &[f64], v: &[f64], family: PairFamily) -> Result<ParametricPair> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    if u.len() < 10 {
        return Err(Error::Precondition(format!(
            "pair-copula fit needs at least 10 observations, got {}",
            u.len()
        )));
    }
    if family.tag == FamilyTag::Independence {
        return Ok(ParametricPair::independence());
    }
    let tag = family.tag;
    let (lo, hi) = tag.bounds();
    let f = |s: f64| {
        let ll = loglik(family, tag.from_search(s), u, v);
        if ll.is_nan() { f64::NEG_INFINITY } else { ll }
    };

    let (mut a, mut b) = (tag.to_search(lo), tag.to_search(hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > GOLDEN_TOL {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let mut theta = tag.from_search(0.5 * (a + b));
    let mut best = loglik(family, theta, u, v);
    if !best.is_finite() {
        return Err(Error::PairFit {
            family: family.to_string(),
        });
    }

    // Newton polish on the natural scale.
    for _ in 0..20 {
        let step = 1e-5 * (1.0 + theta.abs());
        if theta - step < lo || theta + step > hi {
            break;
        }
        let (fm, fp) = (loglik(family, theta - step, u, v), loglik(family, theta + step, u, v));
        let score = (fp - fm) / (2.0 * step);
        let curv = (fp - 2.0 * best + fm) / (step * step);
        if score.abs() < SCORE_TOL || !(curv < 0.0) {
            break;
        }
        let cand = (theta - score / curv).clamp(lo, hi);
        let val = loglik(family, cand, u, v);
        if !(val > best) {
            break;
        }
        theta = cand;
        best = val;
    }

    let span = hi - lo;
    if (theta - lo).abs() < 1e-6 * span || (hi - theta).abs() < 1e-6 * span {
        warn!("{family} fit reached the parameter bound (theta = {theta})");
    }
    if tag == FamilyTag::Frank && theta == 0.0 {
        theta = f64::EPSILON;
    }
    Ok(ParametricPair {
        family,
        theta,
        loglik: best,
        aic: -2.0 * best + 2.0 * family.parameter_count() as f64,
    })
}

/// Fits every candidate and keeps the smallest AIC; earlier candidates win ties.
pub fn select_pair_aic(u: &[f64], v: &[f64], candidates: &[PairFamily]) -> Result<ParametricPair> {
    if candidates.is_empty() {
        return Err(Error::Argument("empty candidate family list".into()));
    }
    let mut best: Option<ParametricPair> = None;
    for &fam in candidates {
        match fit_pair_ml(u, v, fam) {
            Ok(fit) => {
                if best.is_none_or(|b| fit.aic < b.aic) {
                    best = Some(fit);
                }
            }
            Err(e @ Error::Precondition(_)) | Err(e @ Error::DimensionMismatch { .. }) => {
                return Err(e)
            }
            Err(e) => warn!("skipping candidate {fam}: {e}"),
        }
    }
    best.ok_or(Error::Selection)
}
