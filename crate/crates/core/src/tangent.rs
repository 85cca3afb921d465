//! Scores, perturbation paths and projections onto factor tangent spaces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{FactorizedDistribution, MASS_TOLERANCE};
use crate::error::{Error, Result};

/// Default bound on `sup |S|` for random scores.
pub const DEFAULT_SUP_BOUND: f64 = 10.0;

/// A real function on the outcome space, meant to be mean zero under the
/// distribution it was built for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScoreFunction {
    values: Vec<f64>,
}

impl ScoreFunction {
    /// Wraps a table without centering it.
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pointwise sum.
    pub fn add(&self, other: &ScoreFunction) -> ScoreFunction {
        ScoreFunction::from_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn scale(&self, c: f64) -> ScoreFunction {
        ScoreFunction::from_values(self.values.iter().map(|a| a * c).collect())
    }
}

pub(crate) fn sup_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// `E_P[f g]`.
pub fn inner_product(p: &FactorizedDistribution, f: &[f64], g: &[f64]) -> f64 {
    f.iter()
        .zip(g)
        .zip(p.joint())
        .map(|((a, b), w)| a * b * w)
        .sum()
}

/// `f - E_P f`.
pub fn center(p: &FactorizedDistribution, f: &[f64]) -> ScoreFunction {
    let m = p.expectation(f);
    ScoreFunction::from_values(f.iter().map(|v| v - m).collect())
}

/// A centered table built from uniform draws on `[-1, 1]`, rescaled if its
/// sup norm exceeds `sup_bound`. Deterministic in `seed`.
pub fn random_score(
    p: &FactorizedDistribution,
    seed: u64,
    sup_bound: f64,
) -> Result<ScoreFunction> {
    if !(sup_bound > 0.0) {
        return Err(Error::invalid("sup_bound must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..p.num_points())
        .map(|_| rng.gen_range(-1.0..=1.0))
        .collect();
    let s = center(p, &raw);
    let sup = s.sup_norm();
    Ok(if sup > sup_bound {
        s.scale(sup_bound / sup)
    } else {
        s
    })
}

/// The distribution with joint `(1 + eps S) p`, refactorized.
///
/// The positivity floor shrinks by the worst-case ratio `(1-d)/(1+d)` with
/// `d = |eps| sup|S|`, the most a conditional probability can move along the
/// path.
pub fn perturb_joint(
    p: &FactorizedDistribution,
    s: &ScoreFunction,
    eps: f64,
) -> Result<FactorizedDistribution> {
    check_len(p, s.values())?;
    let delta = eps.abs() * s.sup_norm();
    if !(delta < 1.0) {
        return Err(Error::precondition(format!(
            "|eps| sup|S| = {delta} leaves the probability simplex"
        )));
    }
    if eps == 0.0 {
        return Ok(p.clone());
    }
    let joint: Vec<f64> = p
        .joint()
        .iter()
        .zip(s.values())
        .map(|(q, v)| q * (1.0 + eps * v))
        .collect();
    let total: f64 = joint.iter().sum();
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::precondition(format!(
            "score is not mean zero: perturbed mass is {total}"
        )));
    }
    let floor = p.positivity_floor() * (1.0 - delta) / (1.0 + delta);
    FactorizedDistribution::refactorize(&joint, p.variables().to_vec(), floor)
}

fn check_len(p: &FactorizedDistribution, f: &[f64]) -> Result<()> {
    if f.len() != p.num_points() {
        return Err(Error::domain(format!(
            "table has {} entries, outcome space has {}",
            f.len(),
            p.num_points()
        )));
    }
    Ok(())
}

/// `E[S | O_1..O_i] - E[S | O_1..O_{i-1}]` (0-based factor index `i`).
pub fn project_onto_factor(p: &FactorizedDistribution, s: &[f64], i: usize) -> ScoreFunction {
    let upper = p.prefix_conditional_mean_table(s, i + 1);
    let lower = p.prefix_conditional_mean_table(s, i);
    ScoreFunction::from_values(upper.iter().zip(&lower).map(|(a, b)| a - b).collect())
}

/// Projection onto the sum of the factor spaces in `factors`.
pub fn project_onto_factors(
    p: &FactorizedDistribution,
    s: &[f64],
    factors: impl IntoIterator<Item = usize>,
) -> ScoreFunction {
    let mut out = ScoreFunction::zeros(p.num_points());
    for i in factors {
        out = out.add(&project_onto_factor(p, s, i));
    }
    out
}

/// Projections of `S` onto every factor space, in variable order.
pub fn decompose_score(p: &FactorizedDistribution, s: &[f64]) -> Vec<ScoreFunction> {
    // prefix means for k = 0..=d, differenced
    let means: Vec<Vec<f64>> = (0..=p.num_variables())
        .map(|k| p.prefix_conditional_mean_table(s, k))
        .collect();
    means
        .windows(2)
        .map(|w| ScoreFunction::from_values(w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect()))
        .collect()
}

/// Projection onto the factor space of `child` in a model where the child's
/// conditional law does not depend on the variables in `dropped`:
/// `E[S | past and child, minus dropped] - E[S | past minus dropped]`.
pub fn project_onto_restricted_factor(
    p: &FactorizedDistribution,
    s: &[f64],
    child: usize,
    dropped: &[usize],
) -> ScoreFunction {
    let past: Vec<usize> = (0..child).filter(|v| !dropped.contains(v)).collect();
    let mut with_child = past.clone();
    with_child.push(child);
    let upper = p.conditional_mean_given(s, &with_child);
    let lower = p.conditional_mean_given(s, &past);
    ScoreFunction::from_values(upper.iter().zip(&lower).map(|(a, b)| a - b).collect())
}

/// Rows of factor `i` moved along `(1 + eps phi) p_i` where `phi` is the
/// projection of `S` onto that factor's tangent space.
fn perturbed_rows(
    p: &FactorizedDistribution,
    phi: &[f64],
    i: usize,
    eps: f64,
) -> Result<Vec<Vec<f64>>> {
    let n = p.variable(i).len();
    let block = p.block_size(i + 1);
    let mut rows = Vec::with_capacity(p.factor(i).rows().len());
    for (c, row) in p.factor(i).rows().iter().enumerate() {
        let mut new: Vec<f64> = row
            .iter()
            .enumerate()
            .map(|(l, q)| q * (1.0 + eps * phi[(c * n + l) * block]))
            .collect();
        if new.iter().any(|v| *v < 0.0) {
            return Err(Error::precondition(format!(
                "row {c} of factor {i} leaves the simplex at eps = {eps}"
            )));
        }
        let total: f64 = new.iter().sum();
        new.iter_mut().for_each(|v| *v /= total);
        rows.push(new);
    }
    Ok(rows)
}

/// Fluctuates only the factor of variable `i` along its projected score.
pub fn perturb_factor(
    p: &FactorizedDistribution,
    i: usize,
    s: &ScoreFunction,
    eps: f64,
) -> Result<FactorizedDistribution> {
    check_len(p, s.values())?;
    let phi = project_onto_factor(p, s.values(), i);
    let rows = perturbed_rows(p, phi.values(), i, eps)?;
    p.with_factor_rows(i, rows)
}

/// Fluctuates every factor along its own projected score. Agrees with
/// [`perturb_joint`] to first order in `eps`.
pub fn perturb_all_factors(
    p: &FactorizedDistribution,
    s: &ScoreFunction,
    eps: f64,
) -> Result<FactorizedDistribution> {
    check_len(p, s.values())?;
    let parts = decompose_score(p, s.values());
    let mut factors = Vec::with_capacity(p.num_variables());
    for (i, phi) in parts.iter().enumerate() {
        factors.push(crate::dist::ConditionalFactor::new(
            i,
            perturbed_rows(p, phi.values(), i, eps)?,
        ));
    }
    FactorizedDistribution::new(p.variables().to_vec(), factors, p.positivity_floor())
}

/// Reproducibility bundle for a score.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreFile {
    pub variables: Vec<String>,
    pub points: Vec<ScorePoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScorePoint {
    pub levels: Vec<usize>,
    pub value: f64,
}

pub fn score_to_json(p: &FactorizedDistribution, s: &ScoreFunction) -> Result<String> {
    check_len(p, s.values())?;
    let file = ScoreFile {
        variables: p.variables().iter().map(|v| v.name.clone()).collect(),
        points: s
            .values()
            .iter()
            .enumerate()
            .map(|(o, v)| ScorePoint {
                levels: p.point(o).0,
                value: *v,
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn score_from_json(p: &FactorizedDistribution, text: &str) -> Result<ScoreFunction> {
    let file: ScoreFile = serde_json::from_str(text)?;
    let names: Vec<&str> = p.variables().iter().map(|v| v.name.as_str()).collect();
    if file
        .variables
        .iter()
        .map(String::as_str)
        .ne(names.iter().copied())
    {
        return Err(Error::invalid(
            "score variables do not match the distribution",
        ));
    }
    let mut values = vec![f64::NAN; p.num_points()];
    for pt in file.points {
        let idx = p.index_of(&pt.levels.into())?;
        values[idx] = pt.value;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid(
            "score file does not cover every outcome point",
        ));
    }
    Ok(ScoreFunction::from_values(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::VariableSpec;
    use crate::generate::random_distribution;

    #[test]
    fn fair_coin_variance() {
        let p = FactorizedDistribution::from_tables(
            vec![VariableSpec::binary("Y", "outcome")],
            vec![vec![vec![0.5, 0.5]]],
            0.0,
        )
        .unwrap();
        let y = center(&p, &[0.0, 1.0]);
        assert_eq!(inner_product(&p, y.values(), y.values()), 0.25);
        assert_eq!(inner_product(&p, y.values(), &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn center_constant_and_idempotent() {
        let p = random_distribution(&[2, 3, 2], 7, 0.05);
        let c = center(&p, &vec![3.5; p.num_points()]);
        assert!(c.values().iter().all(|v| *v == 0.0));
        let s = random_score(&p, 1, 10.0).unwrap();
        let again = center(&p, s.values());
        for (a, b) in s.values().iter().zip(again.values()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn random_score_contract() {
        let p = random_distribution(&[3, 2], 3, 0.05);
        assert_eq!(
            random_score(&p, 9, 10.0).unwrap(),
            random_score(&p, 9, 10.0).unwrap()
        );
        let s = random_score(&p, 9, 0.3).unwrap();
        assert!(s.sup_norm() <= 0.3 + 1e-15);
        assert!(random_score(&p, 9, 0.0).is_err());
    }

    #[test]
    fn zero_step_and_zero_score() {
        let p = random_distribution(&[2, 2, 3], 11, 0.05);
        let s = random_score(&p, 2, 10.0).unwrap();
        assert_eq!(perturb_joint(&p, &s, 0.0).unwrap(), p);
        let zero = ScoreFunction::zeros(p.num_points());
        let q = perturb_joint(&p, &zero, 0.01).unwrap();
        for (a, b) in q.joint().iter().zip(p.joint()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn path_leaving_simplex_is_rejected() {
        let p = random_distribution(&[2, 2], 1, 0.05);
        let s = random_score(&p, 1, 10.0).unwrap();
        let eps = 1.0 / s.sup_norm();
        assert!(matches!(
            perturb_joint(&p, &s, eps),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn projection_idempotent_and_orthogonal_across_factors() {
        let p = random_distribution(&[2, 3, 2], 5, 0.05);
        let s = random_score(&p, 4, 10.0).unwrap();
        let p1 = project_onto_factor(&p, s.values(), 1);
        let again = project_onto_factor(&p, p1.values(), 1);
        let other = project_onto_factor(&p, p1.values(), 2);
        for o in 0..p.num_points() {
            assert!((again.values()[o] - p1.values()[o]).abs() < 1e-12);
            assert!(other.values()[o].abs() < 1e-12);
        }
    }

    #[test]
    fn single_variable_score_has_one_component() {
        let p = random_distribution(&[3, 2, 2], 8, 0.05);
        let f = p.tabulate(|o| p.level_value(0, o).powi(2));
        let s = center(&p, &f);
        let parts = decompose_score(&p, s.values());
        assert!(parts[0].sup_norm() > 0.1);
        assert!(parts[1].sup_norm() < 1e-12);
        assert!(parts[2].sup_norm() < 1e-12);
    }

    #[test]
    fn score_json_round_trip() {
        let p = random_distribution(&[2, 3], 2, 0.05);
        let s = random_score(&p, 5, 10.0).unwrap();
        let back = score_from_json(&p, &score_to_json(&p, &s).unwrap()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn restricted_projection_equals_plain_when_nothing_dropped() {
        let p = random_distribution(&[2, 2, 3], 6, 0.05);
        let s = random_score(&p, 3, 10.0).unwrap();
        let a = project_onto_factor(&p, s.values(), 2);
        let b = project_onto_restricted_factor(&p, s.values(), 2, &[]);
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
