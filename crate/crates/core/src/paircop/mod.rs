//! Bivariate copula building blocks.

mod family;
mod probit;

pub use family::{
    fit_pair_ml, gauss_legendre, pair_density, pair_hfunc, select_pair_aic, FamilyTag,
    PairFamily, ParametricPair, Rotation, EPS_U,
};
pub(crate) use family::clamp_unit;
pub use probit::{
    fit_probit_ll, grid_copula_density, grid_hfunc, select_bandwidth, select_bandwidth_seeded,
    BandwidthChoice, BandwidthSelection, DensityGrid, SmootherConfig, DEFAULT_FRACTIONS,
};

use serde::{Deserialize, Serialize};

/// A fitted pair copula: parametric family or nonparametric probit grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PairCopula {
    Parametric(ParametricPair),
    Grid(DensityGrid),
}

impl PairCopula {
    pub fn density(&self, u: f64, v: f64) -> f64 {
        match self {
            Self::Parametric(p) => p.density(u, v),
            Self::Grid(g) => g.density(u, v),
        }
    }

    /// `P(U <= u | V = v)`.
    pub fn h_given_second(&self, u: f64, v: f64) -> f64 {
        match self {
            Self::Parametric(p) => p.h_given_second(u, v),
            Self::Grid(g) => g.h_given_second(u, v),
        }
    }

    /// `P(V <= v | U = u)`.
    pub fn h_given_first(&self, v: f64, u: f64) -> f64 {
        match self {
            Self::Parametric(p) => p.h_given_first(v, u),
            Self::Grid(g) => g.h_given_first(v, u),
        }
    }

    /// Short label for model descriptions.
    pub fn label(&self) -> String {
        match self {
            Self::Parametric(p) => format!("{}({:.6})", p.family, p.theta),
            Self::Grid(g) => format!("probit-ll(h={:.6})", g.bandwidth()),
        }
    }

    pub fn is_independence(&self) -> bool {
        matches!(self, Self::Parametric(p) if p.family.tag == FamilyTag::Independence)
    }
}

impl From<ParametricPair> for PairCopula {
    fn from(p: ParametricPair) -> Self {
        Self::Parametric(p)
    }
}

impl From<DensityGrid> for PairCopula {
    fn from(g: DensityGrid) -> Self {
        Self::Grid(g)
    }
}
