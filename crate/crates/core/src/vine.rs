//! Vine assembly of the joint copula density of `(Y, X_1, ..., X_d)`.
//!
//! In the semiparametric (SP) and nonparametric (NP) modes the density is
//! the product of the `d` response/covariate pair copulas and a vine over the
//! conditional pseudo-observations `F(X_j | Y)`. In the parametric (P) mode a
//! single vine is selected over all `d + 1` variables.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paircop::{
    clamp_unit, fit_pair_ml, fit_probit_ll, select_pair_aic, BandwidthChoice, FamilyTag,
    PairCopula, PairFamily, ParametricPair, SmootherConfig,
};
use crate::stats::kendall_tau;

/// Minimum number of rows for [`fit_vine`].
pub const MIN_VINE_ROWS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CopulaMode {
    #[serde(rename = "SP")]
    SemiParametric,
    #[serde(rename = "P")]
    Parametric,
    #[serde(rename = "NP")]
    NonParametric,
}

impl fmt::Display for CopulaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SemiParametric => "SP",
            Self::Parametric => "P",
            Self::NonParametric => "NP",
        })
    }
}

impl FromStr for CopulaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SP" => Ok(Self::SemiParametric),
            "P" => Ok(Self::Parametric),
            "NP" => Ok(Self::NonParametric),
            _ => Err(Error::Parse(format!("unknown copula mode {s:?} (expected SP, P or NP)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VineConfig {
    /// Candidates for parametric edges, selected by AIC.
    pub families: Vec<PairFamily>,
    pub smoother: SmootherConfig,
}

impl Default for VineConfig {
    fn default() -> Self {
        Self {
            families: PairFamily::default_candidates(),
            smoother: SmootherConfig::default(),
        }
    }
}

/// One pair copula of a vine tree. The first conditioned variable is the
/// copula's first argument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VineEdge {
    pub conditioned: (usize, usize),
    pub conditioning: Vec<usize>,
    /// Indices into the previous level (variables for the first tree),
    /// supplying the first and second conditioned variable respectively.
    pub parents: (usize, usize),
    pub pair: PairCopula,
    /// Empirical Kendall tau the edge was selected on.
    pub tau: f64,
}

impl VineEdge {
    fn full_set(&self) -> BTreeSet<usize> {
        let mut s: BTreeSet<usize> = self.conditioning.iter().copied().collect();
        s.insert(self.conditioned.0);
        s.insert(self.conditioned.1);
        s
    }

    pub fn name(&self) -> String {
        let (a, b) = self.conditioned;
        if self.conditioning.is_empty() {
            format!("{a},{b}")
        } else {
            let d: Vec<String> = self.conditioning.iter().map(usize::to_string).collect();
            format!("{a},{b}|{}", d.join(","))
        }
    }
}

/// Regular vine on `dim` variables, stored tree by tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RVine {
    dim: usize,
    trees: Vec<Vec<VineEdge>>,
}

impl RVine {
    /// Empty vine on `dim` variables (density identically 1).
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            trees: Vec::new(),
        }
    }

    /// Builds a vine from explicit trees, checking validity.
    pub fn from_trees(dim: usize, trees: Vec<Vec<VineEdge>>) -> Result<Self> {
        let vine = Self { dim, trees };
        vine.validate()?;
        Ok(vine)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn trees(&self) -> &[Vec<VineEdge>] {
        &self.trees
    }

    pub fn edges(&self) -> impl Iterator<Item = &VineEdge> {
        self.trees.iter().flatten()
    }

    /// Checks tree sizes, connectivity, the proximity condition and the
    /// conditioned/conditioning bookkeeping of every edge.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Precondition(format!("invalid vine: {msg}")));
        if self.trees.len() > self.dim.saturating_sub(1) {
            return bad(format!("{} trees on {} variables", self.trees.len(), self.dim));
        }
        let mut prev_sets: Vec<BTreeSet<usize>> =
            (0..self.dim).map(|v| BTreeSet::from([v])).collect();
        let mut prev_parents: Option<Vec<(usize, usize)>> = None;
        for (level, tree) in self.trees.iter().enumerate() {
            let expected = self.dim - level - 1;
            if tree.len() != expected {
                return bad(format!("tree {} has {} edges, expected {expected}", level + 1, tree.len()));
            }
            let mut uf = UnionFind::new(prev_sets.len());
            for e in tree {
                let (p, q) = e.parents;
                if p >= prev_sets.len() || q >= prev_sets.len() || p == q {
                    return bad(format!("edge {} has invalid parents", e.name()));
                }
                if !uf.union(p, q) {
                    return bad(format!("tree {} contains a cycle", level + 1));
                }
                if let Some(pp) = &prev_parents {
                    let (a, b) = (pp[p], pp[q]);
                    if a.0 != b.0 && a.0 != b.1 && a.1 != b.0 && a.1 != b.1 {
                        return bad(format!("edge {} violates the proximity condition", e.name()));
                    }
                }
                let (sp, sq) = (&prev_sets[p], &prev_sets[q]);
                let cond: BTreeSet<usize> = sp.intersection(sq).copied().collect();
                let x: Vec<usize> = sp.difference(sq).copied().collect();
                let y: Vec<usize> = sq.difference(sp).copied().collect();
                if x != [e.conditioned.0]
                    || y != [e.conditioned.1]
                    || cond.into_iter().collect::<Vec<_>>() != e.conditioning
                {
                    return bad(format!("edge {} inconsistent with its parents", e.name()));
                }
            }
            prev_sets = tree.iter().map(VineEdge::full_set).collect();
            prev_parents = Some(tree.iter().map(|e| e.parents).collect());
        }
        Ok(())
    }

    /// Sequential Dissmann-type selection and estimation: a maximum spanning
    /// tree on `|tau|` per level among proximity-admissible pairs, each edge
    /// fitted by `fit_pair`, h-function outputs passed up to the next level.
    pub fn fit<F>(columns: &[Vec<f64>], fit_pair: F) -> Result<Self>
    where
        F: Fn(&[f64], &[f64]) -> Result<PairCopula> + Sync,
    {
        let dim = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: c.len(),
            });
        }
        // Per node of the current level: full variable set and the
        // conditional pseudo-observations of each conditioned variable.
        let mut nodes: Vec<Node> = columns
            .iter()
            .enumerate()
            .map(|(v, col)| Node {
                set: BTreeSet::from([v]),
                parents: None,
                values: vec![(v, col.clone())],
            })
            .collect();
        let mut trees = Vec::new();
        for level in 1..dim {
            let mut candidates = Vec::new();
            for p in 0..nodes.len() {
                for q in (p + 1)..nodes.len() {
                    if let Some(c) = Candidate::new(&nodes, p, q) {
                        candidates.push(c);
                    }
                }
            }
            let selected = maximum_spanning_tree(nodes.len(), candidates);
            let fitted: Vec<(VineEdge, Node)> = selected
                .into_par_iter()
                .map(|c| {
                    let ux = nodes[c.p].value_of(c.x);
                    let uy = nodes[c.q].value_of(c.y);
                    let pair = fit_pair(ux, uy).map_err(|e| Error::EdgeFit {
                        level,
                        edge: c.name(),
                        source: Box::new(e),
                    })?;
                    let hx: Vec<f64> = ux
                        .iter()
                        .zip(uy)
                        .map(|(&a, &b)| clamp_unit(pair.h_given_second(a, b)))
                        .collect();
                    let hy: Vec<f64> = ux
                        .iter()
                        .zip(uy)
                        .map(|(&a, &b)| clamp_unit(pair.h_given_first(b, a)))
                        .collect();
                    let mut set = c.conditioning.clone();
                    set.insert(c.x);
                    set.insert(c.y);
                    let node = Node {
                        set,
                        parents: Some((c.p, c.q)),
                        values: vec![(c.x, hx), (c.y, hy)],
                    };
                    let edge = VineEdge {
                        conditioned: (c.x, c.y),
                        conditioning: c.conditioning.into_iter().collect(),
                        parents: (c.p, c.q),
                        pair,
                        tau: c.tau,
                    };
                    Ok((edge, node))
                })
                .collect::<Result<_>>()?;
            let (edges, next): (Vec<VineEdge>, Vec<Node>) = fitted.into_iter().unzip();
            trees.push(edges);
            nodes = next;
        }
        Ok(Self { dim, trees })
    }

    /// Re-estimates every edge on new data, keeping the structure.
    /// `refit_pair` receives the edge's current copula as a template.
    pub fn refit<F>(&self, columns: &[Vec<f64>], refit_pair: F) -> Result<Self>
    where
        F: Fn(&PairCopula, &[f64], &[f64]) -> Result<PairCopula> + Sync,
    {
        if columns.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: columns.len(),
            });
        }
        let mut prev: Vec<[(usize, Vec<f64>); 2]> = Vec::new();
        let mut trees = Vec::with_capacity(self.trees.len());
        for (level, tree) in self.trees.iter().enumerate() {
            let fitted: Vec<(VineEdge, [(usize, Vec<f64>); 2])> = tree
                .par_iter()
                .map(|e| {
                    let (x, y) = e.conditioned;
                    let pick = |parent: usize, var: usize| -> &[f64] {
                        if level == 0 {
                            &columns[parent]
                        } else {
                            let node = &prev[parent];
                            if node[0].0 == var {
                                &node[0].1
                            } else {
                                &node[1].1
                            }
                        }
                    };
                    let (ux, uy) = (pick(e.parents.0, x), pick(e.parents.1, y));
                    let pair = refit_pair(&e.pair, ux, uy).map_err(|err| Error::EdgeFit {
                        level: level + 1,
                        edge: e.name(),
                        source: Box::new(err),
                    })?;
                    let hx = ux
                        .iter()
                        .zip(uy)
                        .map(|(&a, &b)| clamp_unit(pair.h_given_second(a, b)))
                        .collect();
                    let hy = ux
                        .iter()
                        .zip(uy)
                        .map(|(&a, &b)| clamp_unit(pair.h_given_first(b, a)))
                        .collect();
                    let edge = VineEdge {
                        conditioned: e.conditioned,
                        conditioning: e.conditioning.clone(),
                        parents: e.parents,
                        pair,
                        tau: e.tau,
                    };
                    Ok((edge, [(x, hx), (y, hy)]))
                })
                .collect::<Result<_>>()?;
            let (edges, next): (Vec<_>, Vec<_>) = fitted.into_iter().unzip();
            trees.push(edges);
            prev = next;
        }
        Ok(Self {
            dim: self.dim,
            trees,
        })
    }

    /// Vine density at one point of `[0,1]^dim`.
    pub fn density(&self, w: &[f64]) -> f64 {
        debug_assert_eq!(w.len(), self.dim);
        let mut density = 1.0;
        let mut prev: Vec<[(usize, f64); 2]> = Vec::new();
        for (level, tree) in self.trees.iter().enumerate() {
            let mut next = Vec::with_capacity(tree.len());
            for e in tree {
                let (x, y) = e.conditioned;
                let (ux, uy) = if level == 0 {
                    (clamp_unit(w[e.parents.0]), clamp_unit(w[e.parents.1]))
                } else {
                    (lookup(&prev[e.parents.0], x), lookup(&prev[e.parents.1], y))
                };
                density *= e.pair.density(ux, uy);
                next.push([
                    (x, clamp_unit(e.pair.h_given_second(ux, uy))),
                    (y, clamp_unit(e.pair.h_given_first(uy, ux))),
                ]);
            }
            prev = next;
        }
        density
    }
}

fn lookup(values: &[(usize, f64); 2], var: usize) -> f64 {
    if values[0].0 == var {
        values[0].1
    } else {
        values[1].1
    }
}

struct Node {
    set: BTreeSet<usize>,
    parents: Option<(usize, usize)>,
    values: Vec<(usize, Vec<f64>)>,
}

impl Node {
    fn value_of(&self, var: usize) -> &[f64] {
        &self
            .values
            .iter()
            .find(|(v, _)| *v == var)
            .expect("conditioned variable present in node")
            .1
    }
}

struct Candidate {
    p: usize,
    q: usize,
    x: usize,
    y: usize,
    conditioning: BTreeSet<usize>,
    tau: f64,
}

impl Candidate {
    fn new(nodes: &[Node], p: usize, q: usize) -> Option<Self> {
        let (a, b) = (&nodes[p], &nodes[q]);
        if let (Some(pa), Some(pb)) = (a.parents, b.parents) {
            if pa.0 != pb.0 && pa.0 != pb.1 && pa.1 != pb.0 && pa.1 != pb.1 {
                return None;
            }
        }
        let conditioning: BTreeSet<usize> = a.set.intersection(&b.set).copied().collect();
        let x: Vec<usize> = a.set.difference(&b.set).copied().collect();
        let y: Vec<usize> = b.set.difference(&a.set).copied().collect();
        if x.len() != 1 || y.len() != 1 {
            return None;
        }
        let (x, y) = (x[0], y[0]);
        let tau = kendall_tau(a.value_of(x), b.value_of(y)).unwrap_or(0.0);
        Some(Self {
            p,
            q,
            x,
            y,
            conditioning,
            tau,
        })
    }

    fn name(&self) -> String {
        if self.conditioning.is_empty() {
            format!("{},{}", self.x, self.y)
        } else {
            let d: Vec<String> = self.conditioning.iter().map(usize::to_string).collect();
            format!("{},{}|{}", self.x, self.y, d.join(","))
        }
    }
}

// Kruskal on |tau|, ties broken by candidate order.
fn maximum_spanning_tree(nodes: usize, mut candidates: Vec<Candidate>) -> Vec<Candidate> {
    candidates.sort_by(|a, b| b.tau.abs().total_cmp(&a.tau.abs()));
    let mut uf = UnionFind::new(nodes);
    candidates
        .into_iter()
        .filter(|c| uf.union(c.p, c.q))
        .collect()
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    // false if already connected
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[rb] = ra;
        true
    }
}

/// Fitted joint copula of the response and the covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VineCopulaModel {
    pub mode: CopulaMode,
    pub d: usize,
    /// Copulas of `(Y, X_j)`, response first; empty in P mode.
    pub interest: Vec<PairCopula>,
    /// Vine over `F(X_j | Y)`, variables indexed `0..d`; empty in P mode.
    pub noisy: RVine,
    /// Joint vine over `(Y, X_1, ..., X_d)` with the response as variable 0;
    /// only in P mode.
    pub joint: Option<RVine>,
}

impl VineCopulaModel {
    /// Assembles an SP/NP-type model from given parts.
    pub fn from_parts(mode: CopulaMode, interest: Vec<PairCopula>, noisy: RVine) -> Result<Self> {
        if noisy.dim() != interest.len() {
            return Err(Error::DimensionMismatch {
                expected: interest.len(),
                found: noisy.dim(),
            });
        }
        noisy.validate()?;
        Ok(Self {
            mode,
            d: interest.len(),
            interest,
            noisy,
            joint: None,
        })
    }

    /// Wraps a joint vine over `d + 1` variables as a P-mode model.
    pub fn from_joint(joint: RVine) -> Result<Self> {
        joint.validate()?;
        if joint.dim() < 2 {
            return Err(Error::Argument("joint vine needs at least two variables".into()));
        }
        Ok(Self {
            mode: CopulaMode::Parametric,
            d: joint.dim() - 1,
            interest: Vec::new(),
            noisy: RVine::empty(0),
            joint: Some(joint),
        })
    }

    /// Re-estimates the model on new pseudo-observations with the selected
    /// structure, families and bandwidths held fixed.
    pub fn refit(&self, u0: &[f64], x: &[Vec<f64>], config: &VineConfig) -> Result<Self> {
        let refit_pair = |template: &PairCopula, a: &[f64], b: &[f64]| -> Result<PairCopula> {
            match template {
                PairCopula::Parametric(p) if p.family.tag == FamilyTag::Independence => {
                    Ok(ParametricPair::independence().into())
                }
                PairCopula::Parametric(p) => fit_pair_ml(a, b, p.family).map(PairCopula::from),
                PairCopula::Grid(g) => {
                    let smoother = SmootherConfig {
                        bandwidth: BandwidthChoice::Fixed(g.bandwidth()),
                        ..config.smoother.clone()
                    };
                    fit_probit_ll(a, b, &smoother).map(PairCopula::from)
                }
            }
        };
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: x.len(),
            });
        }
        if let Some(joint) = &self.joint {
            let mut columns = Vec::with_capacity(x.len() + 1);
            columns.push(u0.to_vec());
            columns.extend(x.iter().cloned());
            return Self::from_joint(joint.refit(&columns, refit_pair)?);
        }
        let interest: Vec<PairCopula> = self
            .interest
            .par_iter()
            .zip(x)
            .enumerate()
            .map(|(j, (t, col))| {
                refit_pair(t, u0, col).map_err(|e| Error::EdgeFit {
                    level: 0,
                    edge: format!("Y,X{}", j + 1),
                    source: Box::new(e),
                })
            })
            .collect::<Result<_>>()?;
        let cond: Vec<Vec<f64>> = x
            .iter()
            .zip(&interest)
            .map(|(col, pair)| conditional_pseudo(u0, col, pair))
            .collect();
        let noisy = self.noisy.refit(&cond, refit_pair)?;
        Self::from_parts(self.mode, interest, noisy)
    }

    /// Copula density at `(u0, u)`.
    pub fn density(&self, u0: f64, u: &[f64]) -> f64 {
        if let Some(joint) = &self.joint {
            let mut w = Vec::with_capacity(u.len() + 1);
            w.push(u0);
            w.extend_from_slice(u);
            return joint.density(&w);
        }
        let u0 = clamp_unit(u0);
        let mut prod = 1.0;
        let mut h = Vec::with_capacity(self.d);
        for (pair, &uj) in self.interest.iter().zip(u) {
            let uj = clamp_unit(uj);
            prod *= pair.density(u0, uj);
            h.push(clamp_unit(pair.h_given_first(uj, u0)));
        }
        if self.noisy.trees.is_empty() {
            prod
        } else {
            prod * self.noisy.density(&h)
        }
    }

    /// Human-readable structure and per-edge family summary.
    pub fn describe(&self) -> ModelDescription {
        let edges = |v: &RVine| -> Vec<Vec<EdgeDescription>> {
            v.trees()
                .iter()
                .map(|t| {
                    t.iter()
                        .map(|e| EdgeDescription {
                            edge: e.name(),
                            copula: e.pair.label(),
                            tau: e.tau,
                        })
                        .collect()
                })
                .collect()
        };
        ModelDescription {
            mode: self.mode,
            d: self.d,
            interest: self.interest.iter().map(PairCopula::label).collect(),
            noisy: edges(&self.noisy),
            joint: self.joint.as_ref().map(edges),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDescription {
    pub edge: String,
    pub copula: String,
    pub tau: f64,
}

/// Serializable summary of a fitted model. Noisy-vine variables are
/// covariate indices starting at 0; joint-vine variable 0 is the response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescription {
    pub mode: CopulaMode,
    pub d: usize,
    pub interest: Vec<String>,
    pub noisy: Vec<Vec<EdgeDescription>>,
    pub joint: Option<Vec<Vec<EdgeDescription>>>,
}

/// `F(X_j | Y)` per row through the fitted interest pair, clamped to the
/// open unit interval.
pub fn conditional_pseudo(u0: &[f64], uj: &[f64], interest: &PairCopula) -> Vec<f64> {
    u0.iter()
        .zip(uj)
        .map(|(&a, &b)| clamp_unit(interest.h_given_first(clamp_unit(b), clamp_unit(a))))
        .collect()
}

/// Fits the joint copula of the response pseudo-observations `u0` and the
/// covariate pseudo-observation columns `x`.
pub fn fit_vine(
    u0: &[f64],
    x: &[Vec<f64>],
    mode: CopulaMode,
    config: &VineConfig,
) -> Result<VineCopulaModel> {
    let n = u0.len();
    if n < MIN_VINE_ROWS {
        return Err(Error::Precondition(format!(
            "vine fit needs at least {MIN_VINE_ROWS} rows, got {n}"
        )));
    }
    if x.is_empty() {
        return Err(Error::Argument("no covariate columns".into()));
    }
    if let Some(c) = x.iter().find(|c| c.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: c.len(),
        });
    }
    if let Some(bad) = u0.iter().chain(x.iter().flatten()).find(|v| !(**v > 0.0 && **v < 1.0)) {
        return Err(Error::Domain {
            what: "pseudo-observation",
            value: *bad,
        });
    }
    let parametric = |a: &[f64], b: &[f64]| -> Result<PairCopula> {
        select_pair_aic(a, b, &config.families).map(PairCopula::from)
    };
    let grid = |a: &[f64], b: &[f64]| -> Result<PairCopula> {
        fit_probit_ll(a, b, &config.smoother).map(PairCopula::from)
    };

    if mode == CopulaMode::Parametric {
        let mut columns = Vec::with_capacity(x.len() + 1);
        columns.push(u0.to_vec());
        columns.extend(x.iter().cloned());
        return VineCopulaModel::from_joint(RVine::fit(&columns, parametric)?);
    }

    let interest: Vec<PairCopula> = x
        .par_iter()
        .enumerate()
        .map(|(j, col)| {
            grid(u0, col).map_err(|e| Error::EdgeFit {
                level: 0,
                edge: format!("Y,X{}", j + 1),
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let cond: Vec<Vec<f64>> = x
        .iter()
        .zip(&interest)
        .map(|(col, pair)| conditional_pseudo(u0, col, pair))
        .collect();
    let noisy = match mode {
        CopulaMode::SemiParametric => RVine::fit(&cond, parametric)?,
        _ => RVine::fit(&cond, grid)?,
    };
    VineCopulaModel::from_parts(mode, interest, noisy)
}

/// Copula density of a fitted model at `(u0, u)`.
pub fn eval_copula_density(model: &VineCopulaModel, u0: f64, u: &[f64]) -> f64 {
    model.density(u0, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paircop::Rotation;

    fn gaussian(rho: f64) -> PairCopula {
        ParametricPair::with_parameter(PairFamily::new(FamilyTag::Gaussian, Rotation::R0).unwrap(), rho)
            .unwrap()
            .into()
    }

    fn edge(conditioned: (usize, usize), conditioning: Vec<usize>, parents: (usize, usize)) -> VineEdge {
        VineEdge {
            conditioned,
            conditioning,
            parents,
            pair: ParametricPair::independence().into(),
            tau: 0.0,
        }
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("sp".parse::<CopulaMode>().unwrap(), CopulaMode::SemiParametric);
        assert_eq!("NP".parse::<CopulaMode>().unwrap(), CopulaMode::NonParametric);
        assert!("semi".parse::<CopulaMode>().is_err());
        assert_eq!(CopulaMode::Parametric.to_string(), "P");
    }

    #[test]
    fn validation_rejects_broken_structures() {
        // D-vine 0-1-2-3
        let t1 = vec![edge((0, 1), vec![], (0, 1)), edge((1, 2), vec![], (1, 2)), edge((2, 3), vec![], (2, 3))];
        let t2 = vec![edge((0, 2), vec![1], (0, 1)), edge((1, 3), vec![2], (1, 2))];
        let t3 = vec![edge((0, 3), vec![1, 2], (0, 1))];
        assert!(RVine::from_trees(4, vec![t1.clone(), t2.clone(), t3]).is_ok());
        // proximity: edges 0-1 and 2-3 share no variable
        let t2_bad = vec![edge((0, 3), vec![], (0, 2)), edge((1, 3), vec![2], (1, 2))];
        assert!(RVine::from_trees(4, vec![t1.clone(), t2_bad]).is_err());
        let cyc = vec![edge((0, 1), vec![], (0, 1)), edge((1, 2), vec![], (1, 2)), edge((0, 2), vec![], (0, 2))];
        assert!(RVine::from_trees(4, vec![cyc]).is_err());
        assert!(RVine::from_trees(4, vec![t1[..2].to_vec()]).is_err());
    }

    #[test]
    fn trivariate_gaussian_matches_closed_form() {
        let (r01, r02, r12) = (0.3f64, 0.9f64, 0.5f64);
        let partial = (r12 - r01 * r02) / ((1.0 - r01 * r01) * (1.0 - r02 * r02)).sqrt();
        let mut noisy_edge = edge((0, 1), vec![], (0, 1));
        noisy_edge.pair = gaussian(partial);
        let model = VineCopulaModel::from_parts(
            CopulaMode::SemiParametric,
            vec![gaussian(r01), gaussian(r02)],
            RVine::from_trees(2, vec![vec![noisy_edge]]).unwrap(),
        )
        .unwrap();
        // at the median point z = 0, c = det(R)^(-1/2)
        let det = 1.0 - r01 * r01 - r02 * r02 - r12 * r12 + 2.0 * r01 * r02 * r12;
        let exact = det.powf(-0.5);
        assert!((model.density(0.5, &[0.5, 0.5]) - exact).abs() < 1e-6);
    }
}
