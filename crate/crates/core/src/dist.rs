//! Finite discrete distributions stored as a chain of conditional tables.
//!
//! Variables are listed in time order. The outcome space is the full product
//! of the variables' level sets and every function on it is a dense table
//! indexed by a mixed-radix flat index with the first variable most
//! significant. With that layout the configurations of the first `k`
//! variables (a "prefix") are contiguous blocks, so conditional expectations
//! given a prefix are block sums.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default lower bound for conditional probabilities that appear in
/// inverse weights.
pub const DEFAULT_POSITIVITY_FLOOR: f64 = 1e-3;

/// Tolerance on the row sums of a conditional table.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Tolerance on the total mass of a joint table.
pub const MASS_TOLERANCE: f64 = 1e-10;

/// A named discrete variable with ordered real-valued levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub levels: Vec<f64>,
    /// Free-form tag such as `outcome`, `treatment`, `confounder`, `site`,
    /// `mediator` or `time-slice`.
    #[serde(default)]
    pub role: String,
}

impl VariableSpec {
    pub fn new(name: impl Into<String>, levels: Vec<f64>, role: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            levels,
            role: role.into(),
        }
    }

    /// A `{0, 1}` variable.
    pub fn binary(name: impl Into<String>, role: impl Into<String>) -> Self {
        Self::new(name, vec![0.0, 1.0], role)
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::invalid(format!(
                "variable '{}' has no levels",
                self.name
            )));
        }
        if self.levels.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "variable '{}' has a non-finite level",
                self.name
            )));
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!(
                "levels of variable '{}' are not strictly increasing",
                self.name
            )));
        }
        Ok(())
    }
}

/// One level index per variable, in distribution order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OutcomePoint(pub Vec<usize>);

impl OutcomePoint {
    pub fn levels(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for OutcomePoint {
    fn from(v: Vec<usize>) -> Self {
        OutcomePoint(v)
    }
}

/// The conditional table of one variable given all earlier variables.
///
/// `rows[c]` is the probability vector over the child's levels for parent
/// configuration `c` (mixed-radix index over the earlier variables).
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalFactor {
    child: usize,
    rows: Vec<Vec<f64>>,
    /// Rows filled uniformly because their parent configuration had no mass.
    flagged: Vec<bool>,
}

impl ConditionalFactor {
    pub fn new(child: usize, rows: Vec<Vec<f64>>) -> Self {
        let flagged = vec![false; rows.len()];
        Self {
            child,
            rows,
            flagged,
        }
    }

    pub fn child(&self) -> usize {
        self.child
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, parent: usize) -> &[f64] {
        &self.rows[parent]
    }

    /// Whether row `parent` was filled uniformly during refactorization.
    pub fn is_flagged(&self, parent: usize) -> bool {
        self.flagged[parent]
    }

    pub fn flagged_rows(&self) -> usize {
        self.flagged.iter().filter(|f| **f).count()
    }
}

/// An exact finite distribution `p(o) = prod_i p_i(o_i | o_1..o_{i-1})`.
///
/// Immutable after construction. The joint table is materialized once.
#[derive(Debug, Clone)]
pub struct FactorizedDistribution {
    variables: Vec<VariableSpec>,
    factors: Vec<ConditionalFactor>,
    positivity_floor: f64,
    /// `suffix[k]` = number of configurations of variables `k..d`.
    suffix: Vec<usize>,
    joint: Vec<f64>,
}

impl PartialEq for FactorizedDistribution {
    fn eq(&self, other: &Self) -> bool {
        self.variables == other.variables
            && self.factors == other.factors
            && self.positivity_floor == other.positivity_floor
    }
}

fn suffix_sizes(variables: &[VariableSpec]) -> Result<Vec<usize>> {
    let d = variables.len();
    let mut suffix = vec![1usize; d + 1];
    for k in (0..d).rev() {
        suffix[k] = suffix[k + 1]
            .checked_mul(variables[k].len())
            .ok_or_else(|| Error::invalid("outcome space is too large to enumerate"))?;
    }
    Ok(suffix)
}

fn validate_variables(variables: &[VariableSpec]) -> Result<()> {
    if variables.is_empty() {
        return Err(Error::invalid("a distribution needs at least one variable"));
    }
    let mut names = HashSet::new();
    for v in variables {
        v.validate()?;
        if !names.insert(v.name.as_str()) {
            return Err(Error::invalid(format!(
                "duplicate variable name '{}'",
                v.name
            )));
        }
    }
    Ok(())
}

impl FactorizedDistribution {
    /// Validates and builds a distribution from one factor per variable.
    pub fn new(
        variables: Vec<VariableSpec>,
        mut factors: Vec<ConditionalFactor>,
        positivity_floor: f64,
    ) -> Result<Self> {
        validate_variables(&variables)?;
        if !(0.0..1.0).contains(&positivity_floor) {
            return Err(Error::invalid(format!(
                "positivity floor {positivity_floor} is outside [0, 1)"
            )));
        }
        if factors.len() != variables.len() {
            return Err(Error::invalid(format!(
                "{} factors for {} variables",
                factors.len(),
                variables.len()
            )));
        }
        factors.sort_by_key(|f| f.child);
        let suffix = suffix_sizes(&variables)?;
        let total = suffix[0];
        for (i, f) in factors.iter().enumerate() {
            if f.child != i {
                return Err(Error::invalid(format!("missing factor for variable {i}")));
            }
            let n_parents = total / suffix[i];
            let n_levels = variables[i].len();
            if f.rows.len() != n_parents {
                return Err(Error::invalid(format!(
                    "factor of '{}' has {} rows, expected {}",
                    variables[i].name,
                    f.rows.len(),
                    n_parents
                )));
            }
            if f.flagged.len() != f.rows.len() {
                return Err(Error::invalid("flag vector does not match rows"));
            }
            for (c, row) in f.rows.iter().enumerate() {
                if row.len() != n_levels {
                    return Err(Error::invalid(format!(
                        "row {c} of '{}' has {} entries, expected {}",
                        variables[i].name,
                        row.len(),
                        n_levels
                    )));
                }
                if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(Error::invalid(format!(
                        "row {c} of '{}' has an entry outside [0, 1]",
                        variables[i].name
                    )));
                }
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(Error::invalid(format!(
                        "row {c} of '{}' sums to {s}",
                        variables[i].name
                    )));
                }
            }
        }
        Ok(Self::assemble(variables, factors, positivity_floor, suffix))
    }

    /// Builds a distribution from plain row tables, one per variable.
    pub fn from_tables(
        variables: Vec<VariableSpec>,
        tables: Vec<Vec<Vec<f64>>>,
        positivity_floor: f64,
    ) -> Result<Self> {
        let factors = tables
            .into_iter()
            .enumerate()
            .map(|(i, rows)| ConditionalFactor::new(i, rows))
            .collect();
        Self::new(variables, factors, positivity_floor)
    }

    fn assemble(
        variables: Vec<VariableSpec>,
        factors: Vec<ConditionalFactor>,
        positivity_floor: f64,
        suffix: Vec<usize>,
    ) -> Self {
        let mut dist = Self {
            variables,
            factors,
            positivity_floor,
            suffix,
            joint: Vec::new(),
        };
        dist.joint = (0..dist.num_points()).map(|o| dist.density_at(o)).collect();
        dist
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn variable(&self, i: usize) -> &VariableSpec {
        &self.variables[i]
    }

    pub fn factors(&self) -> &[ConditionalFactor] {
        &self.factors
    }

    pub fn factor(&self, i: usize) -> &ConditionalFactor {
        &self.factors[i]
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    /// Size of the full product outcome space.
    pub fn num_points(&self) -> usize {
        self.suffix[0]
    }

    pub fn positivity_floor(&self) -> f64 {
        self.positivity_floor
    }

    pub fn with_positivity_floor(mut self, floor: f64) -> Self {
        self.positivity_floor = floor;
        self
    }

    /// Index of the variable called `name`.
    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Number of configurations of the first `k` variables.
    pub fn num_prefix_configs(&self, k: usize) -> usize {
        self.suffix[0] / self.suffix[k]
    }

    /// Index of the configuration of the first `k` variables at point `flat`.
    #[inline]
    pub fn prefix_index(&self, flat: usize, k: usize) -> usize {
        flat / self.suffix[k]
    }

    /// Number of points sharing one configuration of the first `k` variables.
    #[inline]
    pub fn block_size(&self, k: usize) -> usize {
        self.suffix[k]
    }

    /// Level index of variable `var` at point `flat`.
    #[inline]
    pub fn level_index(&self, var: usize, flat: usize) -> usize {
        (flat / self.suffix[var + 1]) % self.variables[var].len()
    }

    /// Level value of variable `var` at point `flat`.
    #[inline]
    pub fn level_value(&self, var: usize, flat: usize) -> f64 {
        self.variables[var].levels[self.level_index(var, flat)]
    }

    /// Conditional probability lookup `p_var(level | parent configuration)`.
    #[inline]
    pub fn prob(&self, var: usize, parent: usize, level: usize) -> f64 {
        self.factors[var].rows[parent][level]
    }

    /// `p_var(o_var | earlier variables)` at point `flat`.
    #[inline]
    pub fn factor_prob_at(&self, var: usize, flat: usize) -> f64 {
        self.prob(
            var,
            self.prefix_index(flat, var),
            self.level_index(var, flat),
        )
    }

    fn density_at(&self, flat: usize) -> f64 {
        (0..self.num_variables())
            .map(|i| self.factor_prob_at(i, flat))
            .product()
    }

    pub fn point(&self, flat: usize) -> OutcomePoint {
        OutcomePoint(
            (0..self.num_variables())
                .map(|v| self.level_index(v, flat))
                .collect(),
        )
    }

    pub fn index_of(&self, point: &OutcomePoint) -> Result<usize> {
        self.partial_index(&point.0).and_then(|idx| {
            if point.0.len() == self.num_variables() {
                Ok(idx)
            } else {
                Err(Error::domain(format!(
                    "point has {} coordinates, distribution has {} variables",
                    point.0.len(),
                    self.num_variables()
                )))
            }
        })
    }

    /// Mixed-radix index of a partial point covering the first `levels.len()`
    /// variables.
    pub fn partial_index(&self, levels: &[usize]) -> Result<usize> {
        if levels.len() > self.num_variables() {
            return Err(Error::domain("partial point longer than the variable list"));
        }
        let mut idx = 0usize;
        for (v, &l) in levels.iter().enumerate() {
            let n = self.variables[v].len();
            if l >= n {
                return Err(Error::domain(format!(
                    "level index {l} out of range for variable '{}' ({} levels)",
                    self.variables[v].name, n
                )));
            }
            idx = idx * n + l;
        }
        Ok(idx)
    }

    /// Materialized joint table `p(o)` over all points.
    pub fn joint(&self) -> &[f64] {
        &self.joint
    }

    /// `prod_i p_i(o_i | o_<i)` at `point`.
    pub fn joint_density(&self, point: &OutcomePoint) -> Result<f64> {
        Ok(self.joint[self.index_of(point)?])
    }

    /// Tabulates `f` over all points.
    pub fn tabulate(&self, f: impl Fn(usize) -> f64) -> Vec<f64> {
        (0..self.num_points()).map(f).collect()
    }

    /// `sum_o f(o) p(o)`.
    pub fn expectation(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.num_points());
        f.iter().zip(&self.joint).map(|(a, p)| a * p).sum()
    }

    /// Mass of every configuration of the first `k` variables.
    pub fn prefix_masses(&self, k: usize) -> Vec<f64> {
        block_sums(&self.joint, self.suffix[k])
    }

    /// `E[f | first k variables]` for every prefix configuration. Entries for
    /// configurations with zero mass are 0.
    pub fn prefix_conditional_mean(&self, f: &[f64], k: usize) -> Vec<f64> {
        let b = self.suffix[k];
        f.chunks(b)
            .zip(self.joint.chunks(b))
            .map(|(fc, pc)| {
                let mass: f64 = pc.iter().sum();
                if mass > 0.0 {
                    fc.iter().zip(pc).map(|(a, p)| a * p).sum::<f64>() / mass
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// `E[f | first k variables]` evaluated at every point.
    pub fn prefix_conditional_mean_table(&self, f: &[f64], k: usize) -> Vec<f64> {
        let means = self.prefix_conditional_mean(f, k);
        let b = self.suffix[k];
        let mut out = Vec::with_capacity(self.num_points());
        for m in means {
            out.extend(std::iter::repeat_n(m, b));
        }
        out
    }

    /// `E[f | O_1..O_k = at]` where `at` covers the first `k` variables.
    pub fn conditional_expectation(&self, f: &[f64], at: &[usize]) -> Result<f64> {
        let k = at.len();
        let c = self.partial_index(at)?;
        let b = self.suffix[k];
        let block = c * b..(c + 1) * b;
        let mass: f64 = self.joint[block.clone()].iter().sum();
        if mass <= 0.0 {
            return Err(Error::domain("conditioning event has zero probability"));
        }
        let num: f64 = f[block.clone()]
            .iter()
            .zip(&self.joint[block])
            .map(|(a, p)| a * p)
            .sum();
        Ok(num / mass)
    }

    /// `E[f | variables in subset]` evaluated at every point, for an
    /// arbitrary subset of variables. Zero-mass cells give 0.
    pub fn conditional_mean_given(&self, f: &[f64], subset: &[usize]) -> Vec<f64> {
        let marg = SubsetIndexer::new(self, subset);
        let mut num = vec![0.0; marg.len()];
        let mut den = vec![0.0; marg.len()];
        for o in 0..self.num_points() {
            let key = marg.key(self, o);
            num[key] += f[o] * self.joint[o];
            den[key] += self.joint[o];
        }
        (0..self.num_points())
            .map(|o| {
                let key = marg.key(self, o);
                if den[key] > 0.0 {
                    num[key] / den[key]
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Marginal distribution of a subset of variables.
    pub fn marginal(&self, subset: &[usize]) -> Result<Marginal> {
        let mut seen = HashSet::new();
        for &v in subset {
            if v >= self.num_variables() {
                return Err(Error::domain(format!("variable index {v} out of range")));
            }
            if !seen.insert(v) {
                return Err(Error::domain(format!("variable index {v} repeated")));
            }
        }
        let idx = SubsetIndexer::new(self, subset);
        let mut masses = vec![0.0; idx.len()];
        for (o, p) in self.joint.iter().enumerate() {
            masses[idx.key(self, o)] += p;
        }
        Ok(Marginal {
            variables: subset.to_vec(),
            sizes: subset.iter().map(|&v| self.variables[v].len()).collect(),
            masses,
        })
    }

    /// Rows that were filled uniformly during refactorization.
    pub fn flagged_rows(&self) -> usize {
        self.factors.iter().map(|f| f.flagged_rows()).sum()
    }

    /// Re-expresses a joint table over `variables` in factor form by exact
    /// marginalization. Parent configurations with zero mass get a uniform
    /// row and are flagged.
    pub fn refactorize(
        joint: &[f64],
        variables: Vec<VariableSpec>,
        positivity_floor: f64,
    ) -> Result<Self> {
        validate_variables(&variables)?;
        let suffix = suffix_sizes(&variables)?;
        if joint.len() != suffix[0] {
            return Err(Error::invalid(format!(
                "joint table has {} entries, outcome space has {}",
                joint.len(),
                suffix[0]
            )));
        }
        if joint.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::invalid(
                "joint table has a negative or non-finite entry",
            ));
        }
        let total: f64 = joint.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::invalid(format!("joint table sums to {total}")));
        }
        let d = variables.len();
        let mut factors = Vec::with_capacity(d);
        let mut parent_mass = block_sums(joint, suffix[0]);
        for i in 0..d {
            let n = variables[i].len();
            let child_mass = block_sums(joint, suffix[i + 1]);
            let mut rows = Vec::with_capacity(parent_mass.len());
            let mut flagged = Vec::with_capacity(parent_mass.len());
            for (c, &m) in parent_mass.iter().enumerate() {
                if m > 0.0 {
                    rows.push(
                        (0..n)
                            .map(|l| (child_mass[c * n + l] / m).min(1.0))
                            .collect(),
                    );
                    flagged.push(false);
                } else {
                    rows.push(vec![1.0 / n as f64; n]);
                    flagged.push(true);
                }
            }
            factors.push(ConditionalFactor {
                child: i,
                rows,
                flagged,
            });
            parent_mass = child_mass;
        }
        Ok(Self::assemble(variables, factors, positivity_floor, suffix))
    }

    /// Replaces the table of variable `var`, keeping everything else.
    pub fn with_factor_rows(&self, var: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut factors = self.factors.clone();
        factors[var] = ConditionalFactor::new(var, rows);
        Self::new(self.variables.clone(), factors, self.positivity_floor)
    }
}

fn block_sums(values: &[f64], block: usize) -> Vec<f64> {
    values.chunks(block).map(|c| c.iter().sum()).collect()
}

/// Mixed-radix key for an arbitrary subset of variables.
struct SubsetIndexer<'a> {
    subset: &'a [usize],
    len: usize,
}

impl<'a> SubsetIndexer<'a> {
    fn new(dist: &FactorizedDistribution, subset: &'a [usize]) -> Self {
        let len = subset.iter().map(|&v| dist.variables[v].len()).product();
        Self { subset, len }
    }

    fn len(&self) -> usize {
        self.len
    }

    #[inline]
    fn key(&self, dist: &FactorizedDistribution, flat: usize) -> usize {
        self.subset.iter().fold(0, |acc, &v| {
            acc * dist.variables[v].len() + dist.level_index(v, flat)
        })
    }
}

/// Marginal masses over a subset of variables, indexed mixed-radix in the
/// order the subset was given.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    pub variables: Vec<usize>,
    sizes: Vec<usize>,
    pub masses: Vec<f64>,
}

impl Marginal {
    /// Mass of the partial point given as level indices of `self.variables`.
    pub fn get(&self, levels: &[usize]) -> Option<f64> {
        if levels.len() != self.sizes.len() {
            return None;
        }
        let mut idx = 0;
        for (&l, &n) in levels.iter().zip(&self.sizes) {
            if l >= n {
                return None;
            }
            idx = idx * n + l;
        }
        Some(self.masses[idx])
    }

    /// All `(partial point, mass)` pairs.
    pub fn entries(&self) -> Vec<(Vec<usize>, f64)> {
        self.masses
            .iter()
            .enumerate()
            .map(|(mut idx, &m)| {
                let mut levels = vec![0; self.sizes.len()];
                for (slot, &n) in levels.iter_mut().zip(&self.sizes).rev() {
                    *slot = idx % n;
                    idx /= n;
                }
                (levels, m)
            })
            .collect()
    }
}

/// Discretization of `int_a^b g(x) dx` as `sum_k w_k g(x_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct QuadratureGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
    a: f64,
    b: f64,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    points: Vec<f64>,
    weights: Vec<f64>,
    a: f64,
    b: f64,
}

impl TryFrom<GridRepr> for QuadratureGrid {
    type Error = Error;
    fn try_from(r: GridRepr) -> Result<Self> {
        QuadratureGrid::new(r.points, r.weights, r.a, r.b)
    }
}

impl From<QuadratureGrid> for GridRepr {
    fn from(g: QuadratureGrid) -> Self {
        GridRepr {
            points: g.points,
            weights: g.weights,
            a: g.a,
            b: g.b,
        }
    }
}

impl QuadratureGrid {
    /// Points are clipped into `[a, b]`; they must then be strictly increasing
    /// with positive weights.
    pub fn new(points: Vec<f64>, weights: Vec<f64>, a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a <= b) {
            return Err(Error::invalid(format!(
                "grid bounds [{a}, {b}] are invalid"
            )));
        }
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::invalid(
                "grid needs matching, non-empty points and weights",
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid("grid weights must be positive"));
        }
        let points: Vec<f64> = points.into_iter().map(|x| x.clamp(a, b)).collect();
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(
                "grid points must be strictly increasing after clipping",
            ));
        }
        Ok(Self {
            points,
            weights,
            a,
            b,
        })
    }

    /// Unit weight at every point.
    pub fn unit(points: Vec<f64>, a: f64, b: f64) -> Result<Self> {
        let weights = vec![1.0; points.len()];
        Self::new(points, weights, a, b)
    }

    /// Left Riemann sum with `m` equal cells on `[a, b]`.
    pub fn left_riemann(a: f64, b: f64, m: usize) -> Result<Self> {
        if m == 0 || !(b > a) {
            return Err(Error::invalid("left Riemann grid needs m >= 1 and b > a"));
        }
        let h = (b - a) / m as f64;
        let points = (0..m).map(|k| a + h * k as f64).collect();
        Self::new(points, vec![h; m], a, b)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.a, self.b)
    }
}

// ---------------------------------------------------------------------------
// File format

/// On-disk form of a distribution (JSON syntax).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistributionFile {
    pub variables: Vec<VariableSpec>,
    pub factors: Vec<FactorFile>,
    #[serde(default = "default_floor")]
    pub positivity_floor: f64,
}

fn default_floor() -> f64 {
    DEFAULT_POSITIVITY_FLOOR
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorFile {
    /// Variable index or name.
    pub child: ChildRef,
    pub rows: Vec<RowFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChildRef {
    Index(usize),
    Name(String),
}

/// One conditional row; `parents` are level indices of all earlier variables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RowFile {
    #[serde(default)]
    pub parents: Vec<usize>,
    pub probs: Vec<f64>,
}

impl TryFrom<DistributionFile> for FactorizedDistribution {
    type Error = Error;

    fn try_from(file: DistributionFile) -> Result<Self> {
        validate_variables(&file.variables)?;
        let suffix = suffix_sizes(&file.variables)?;
        let d = file.variables.len();
        let mut tables: Vec<Option<Vec<Option<Vec<f64>>>>> = vec![None; d];
        for f in file.factors {
            let child = match &f.child {
                ChildRef::Index(i) => *i,
                ChildRef::Name(n) => file
                    .variables
                    .iter()
                    .position(|v| &v.name == n)
                    .ok_or_else(|| Error::invalid(format!("factor for unknown variable '{n}'")))?,
            };
            if child >= d {
                return Err(Error::invalid(format!("factor child {child} out of range")));
            }
            if tables[child].is_some() {
                return Err(Error::invalid(format!(
                    "duplicate factor for variable {child}"
                )));
            }
            let n_parents = suffix[0] / suffix[child];
            let mut rows = vec![None; n_parents];
            for r in f.rows {
                if r.parents.len() != child {
                    return Err(Error::invalid(format!(
                        "row of '{}' lists {} parent levels, expected {}",
                        file.variables[child].name,
                        r.parents.len(),
                        child
                    )));
                }
                let mut idx = 0usize;
                for (v, &l) in r.parents.iter().enumerate() {
                    let n = file.variables[v].len();
                    if l >= n {
                        return Err(Error::invalid(format!(
                            "parent level {l} out of range for '{}'",
                            file.variables[v].name
                        )));
                    }
                    idx = idx * n + l;
                }
                if rows[idx].replace(r.probs).is_some() {
                    return Err(Error::invalid(format!(
                        "duplicate row for parents {:?} of '{}'",
                        r.parents, file.variables[child].name
                    )));
                }
            }
            tables[child] = Some(rows);
        }
        let mut factors = Vec::with_capacity(d);
        for (i, t) in tables.into_iter().enumerate() {
            let rows = t.ok_or_else(|| {
                Error::invalid(format!(
                    "no factor for variable '{}'",
                    file.variables[i].name
                ))
            })?;
            let rows = rows
                .into_iter()
                .enumerate()
                .map(|(c, r)| {
                    r.ok_or_else(|| {
                        Error::invalid(format!(
                            "factor of '{}' is missing parent configuration {c}",
                            file.variables[i].name
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            factors.push(ConditionalFactor::new(i, rows));
        }
        FactorizedDistribution::new(file.variables, factors, file.positivity_floor)
    }
}

impl From<&FactorizedDistribution> for DistributionFile {
    fn from(dist: &FactorizedDistribution) -> Self {
        let factors = dist
            .factors
            .iter()
            .map(|f| {
                let rows = f
                    .rows
                    .iter()
                    .enumerate()
                    .map(|(c, probs)| {
                        let mut parents = vec![0; f.child];
                        let mut idx = c;
                        for v in (0..f.child).rev() {
                            let n = dist.variables[v].len();
                            parents[v] = idx % n;
                            idx /= n;
                        }
                        RowFile {
                            parents,
                            probs: probs.clone(),
                        }
                    })
                    .collect();
                FactorFile {
                    child: ChildRef::Index(f.child),
                    rows,
                }
            })
            .collect();
        DistributionFile {
            variables: dist.variables.clone(),
            factors,
            positivity_floor: dist.positivity_floor,
        }
    }
}

impl FactorizedDistribution {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: DistributionFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&DistributionFile::from(self))?)
    }
}
