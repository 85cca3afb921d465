//! Seeded random distributions for each parameter family.
//!
//! Every conditional row is `floor + (1 - k floor) u / sum(u)` with `u`
//! uniform on `(0, 1]`, so all entries are at least `floor`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{FactorizedDistribution, QuadratureGrid, VariableSpec, DEFAULT_POSITIVITY_FLOOR};
use crate::error::{Error, Result};
use crate::params::{Intervention, ParameterSpec, TransportModel};

/// Lower bound on generated conditional probabilities.
pub const GENERATOR_FLOOR: f64 = 0.05;

/// Child seed for task `index` of a run seeded with `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One probability vector of length `k` with entries at least `floor`.
pub fn random_row(rng: &mut impl Rng, k: usize, floor: f64) -> Vec<f64> {
    let floor = floor.min(1.0 / k as f64);
    let u: Vec<f64> = (0..k).map(|_| 1.0 - rng.gen::<f64>()).collect();
    let total: f64 = u.iter().sum();
    let free = 1.0 - k as f64 * floor;
    u.iter().map(|x| floor + free * x / total).collect()
}

pub fn random_rows(rng: &mut impl Rng, n_rows: usize, k: usize, floor: f64) -> Vec<Vec<f64>> {
    (0..n_rows).map(|_| random_row(rng, k, floor)).collect()
}

fn integer_levels(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64).collect()
}

/// Full random distribution over variables `X0, X1, ...` with the given
/// level counts (level values `0, 1, ...`).
pub fn random_distribution(levels: &[usize], seed: u64, floor: f64) -> FactorizedDistribution {
    let vars: Vec<VariableSpec> = levels
        .iter()
        .enumerate()
        .map(|(i, &n)| VariableSpec::new(format!("X{i}"), integer_levels(n), ""))
        .collect();
    build(vars, seed, floor, |_, _, _| None)
}

/// Builds a distribution, drawing each row at random unless `fixed` returns
/// a row for `(variable, parent configuration, rng)`.
fn build(
    vars: Vec<VariableSpec>,
    seed: u64,
    floor: f64,
    mut fixed: impl FnMut(usize, usize, &mut ChaCha8Rng) -> Option<Vec<f64>>,
) -> FactorizedDistribution {
    let mut r = rng(seed);
    let mut n_parents = 1usize;
    let mut tables = Vec::with_capacity(vars.len());
    for (i, v) in vars.iter().enumerate() {
        let rows = (0..n_parents)
            .map(|c| fixed(i, c, &mut r).unwrap_or_else(|| random_row(&mut r, v.len(), floor)))
            .collect();
        tables.push(rows);
        n_parents *= v.len();
    }
    FactorizedDistribution::from_tables(vars, tables, DEFAULT_POSITIVITY_FLOOR)
        .expect("generated tables are valid")
}

/// Distribution shapes that the CLI can generate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Shape {
    /// Univariate on levels `1..=levels`.
    Cdf { levels: usize },
    /// `(W, A, Y)` with binary `A` and `Y` in `{0, 1, 2}`.
    Point { w_levels: usize },
    /// `(S, W, A, Z, M, Y)`.
    Transport { w_levels: usize, restricted: bool },
    /// `(L0, A0, ..., LK, AK, Y)`.
    Longitudinal { k: usize },
    /// `(W, A, T, Delta)` with times `0..=t_max`.
    Survival {
        w_levels: usize,
        t_max: usize,
        censoring: bool,
    },
    /// Unstructured chain with the given level counts.
    Custom { levels: Vec<usize> },
}

pub fn generate(shape: &Shape, seed: u64) -> Result<FactorizedDistribution> {
    let positive = |n: usize, what: &str| {
        if n == 0 {
            Err(Error::invalid(format!("{what} must be at least 1")))
        } else {
            Ok(())
        }
    };
    Ok(match shape {
        Shape::Cdf { levels } => {
            positive(*levels, "levels")?;
            cdf_distribution(seed, *levels)
        }
        Shape::Point { w_levels } => {
            positive(*w_levels, "w_levels")?;
            point_distribution(seed, *w_levels)
        }
        Shape::Transport {
            w_levels,
            restricted,
        } => {
            positive(*w_levels, "w_levels")?;
            transport_distribution(seed, *w_levels, *restricted)
        }
        Shape::Longitudinal { k } => longitudinal_distribution(seed, *k),
        Shape::Survival {
            w_levels,
            t_max,
            censoring,
        } => {
            positive(*w_levels, "w_levels")?;
            positive(*t_max, "t_max")?;
            survival_distribution(seed, *w_levels, *t_max, *censoring)
        }
        Shape::Custom { levels } => {
            if levels.is_empty() || levels.contains(&0) {
                return Err(Error::invalid(
                    "custom shape needs non-empty, positive level counts",
                ));
            }
            random_distribution(levels, seed, GENERATOR_FLOOR)
        }
    })
}

pub fn cdf_distribution(seed: u64, levels: usize) -> FactorizedDistribution {
    let vals: Vec<f64> = (1..=levels).map(|i| i as f64).collect();
    build(
        vec![VariableSpec::new("O", vals, "outcome")],
        seed,
        GENERATOR_FLOOR,
        |_, _, _| None,
    )
}

/// Unit weights at every support level on `[min, max]`.
pub fn support_grid(p: &FactorizedDistribution) -> QuadratureGrid {
    let levels = p.variable(0).levels.clone();
    let (a, b) = (levels[0], *levels.last().expect("non-empty levels"));
    QuadratureGrid::unit(levels, a, b).expect("support levels form a valid grid")
}

pub fn cdf_instance(seed: u64) -> (FactorizedDistribution, ParameterSpec) {
    let levels = 3 + (derive_seed(seed, 0) % 4) as usize;
    let p = cdf_distribution(seed, levels);
    let grid = support_grid(&p);
    (p, ParameterSpec::CdfSquare { grid })
}

pub fn point_distribution(seed: u64, w_levels: usize) -> FactorizedDistribution {
    let vars = vec![
        VariableSpec::new("W", integer_levels(w_levels), "confounder"),
        VariableSpec::binary("A", "treatment"),
        VariableSpec::new("Y", vec![0.0, 1.0, 2.0], "outcome"),
    ];
    build(vars, seed, GENERATOR_FLOOR, |_, _, _| None)
}

pub fn transport_distribution(
    seed: u64,
    w_levels: usize,
    restricted: bool,
) -> FactorizedDistribution {
    let vars = vec![
        VariableSpec::binary("S", "site"),
        VariableSpec::new("W", integer_levels(w_levels), "confounder"),
        VariableSpec::binary("A", "treatment"),
        VariableSpec::binary("Z", "mediator"),
        VariableSpec::binary("M", "mediator"),
        VariableSpec::new("Y", vec![0.0, 1.0, 2.0], "outcome"),
    ];
    let n_y = vars[5].len();
    // rows of M (index 4) and Y (index 5) are keyed by parent configuration;
    // in the restricted model the a = 1 row copies the a = 0 row
    let nw = w_levels;
    let mut m_rows: Vec<Option<Vec<f64>>> = vec![None; 2 * nw * 4];
    let mut y_rows: Vec<Option<Vec<f64>>> = vec![None; 2 * nw * 8];
    build(vars, seed, GENERATOR_FLOOR, move |var, c, r| match var {
        4 if restricted => {
            // c = ((s*nw + w)*2 + a)*2 + z
            let (z, a, sw) = (c % 2, (c / 2) % 2, c / 4);
            if a == 0 {
                let row = random_row(r, 2, GENERATOR_FLOOR);
                m_rows[c] = Some(row.clone());
                Some(row)
            } else {
                m_rows[(sw * 2) * 2 + z].clone()
            }
        }
        5 => {
            let s = c / (nw * 8);
            if s == 0 {
                let mut row = vec![0.0; n_y];
                row[0] = 1.0;
                return Some(row);
            }
            if !restricted {
                return None;
            }
            // c = (((s*nw + w)*2 + a)*2 + z)*2 + m
            let (m, z, a, sw) = (c % 2, (c / 2) % 2, (c / 4) % 2, c / 8);
            if a == 0 {
                let row = random_row(r, n_y, GENERATOR_FLOOR);
                y_rows[c] = Some(row.clone());
                Some(row)
            } else {
                y_rows[((sw * 2) * 2 + z) * 2 + m].clone()
            }
        }
        _ => None,
    })
}

pub fn transport_instance(
    seed: u64,
    fixed: bool,
    model: TransportModel,
) -> (FactorizedDistribution, ParameterSpec) {
    let w_levels = 2 + (derive_seed(seed, 0) % 2) as usize;
    let restricted = model == TransportModel::Restricted;
    let p = transport_distribution(seed, w_levels, restricted);
    let mut r = rng(derive_seed(seed, 1));
    let intervention = if fixed {
        Intervention::FromP
    } else {
        Intervention::Supplied(random_rows(&mut r, w_levels, 2, GENERATOR_FLOOR))
    };
    let a = r.gen_range(0..2);
    let a_star = r.gen_range(0..2);
    let s_star = r.gen_range(0..2);
    (
        p,
        ParameterSpec::TransportSde {
            a,
            a_star,
            s_star,
            intervention,
            model,
        },
    )
}

/// `L0` has 3 levels, later covariates 2, treatments are binary and `Y`
/// takes values `{0, 1, 2}`.
pub fn longitudinal_distribution(seed: u64, k: usize) -> FactorizedDistribution {
    let mut vars = Vec::with_capacity(2 * k + 3);
    for j in 0..=k {
        let n = if j == 0 { 3 } else { 2 };
        vars.push(VariableSpec::new(
            format!("L{j}"),
            integer_levels(n),
            "time-slice",
        ));
        vars.push(VariableSpec::binary(format!("A{j}"), "treatment"));
    }
    vars.push(VariableSpec::new("Y", vec![0.0, 1.0, 2.0], "outcome"));
    build(vars, seed, GENERATOR_FLOOR, |_, _, _| None)
}

/// Random stochastic intervention tables for a longitudinal distribution.
pub fn random_g_star(p: &FactorizedDistribution, seed: u64) -> Vec<Vec<Vec<f64>>> {
    let k = (p.num_variables() - 3) / 2;
    let mut r = rng(seed);
    (0..=k)
        .map(|j| {
            let var = 2 * j + 1;
            random_rows(
                &mut r,
                p.num_prefix_configs(var),
                p.variable(var).len(),
                0.0,
            )
        })
        .collect()
}

/// Intervention that sets every treatment to `level`.
pub fn static_g_star(p: &FactorizedDistribution, level: usize) -> Vec<Vec<Vec<f64>>> {
    let k = (p.num_variables() - 3) / 2;
    (0..=k)
        .map(|j| {
            let var = 2 * j + 1;
            let mut row = vec![0.0; p.variable(var).len()];
            row[level] = 1.0;
            vec![row; p.num_prefix_configs(var)]
        })
        .collect()
}

pub fn longitudinal_instance(seed: u64, k: usize) -> (FactorizedDistribution, ParameterSpec) {
    let p = longitudinal_distribution(seed, k);
    let g_star = random_g_star(&p, derive_seed(seed, 1));
    (p, ParameterSpec::LongitudinalMean { g_star })
}

pub fn survival_distribution(
    seed: u64,
    w_levels: usize,
    t_max: usize,
    censoring: bool,
) -> FactorizedDistribution {
    let vars = vec![
        VariableSpec::new("W", integer_levels(w_levels), "confounder"),
        VariableSpec::binary("A", "treatment"),
        VariableSpec::new("T", integer_levels(t_max + 1), "time-slice"),
        VariableSpec::binary("Delta", "outcome"),
    ];
    let nt = t_max + 1;
    build(vars, seed, GENERATOR_FLOOR, move |var, c, r| match var {
        2 if !censoring => {
            let mut row = random_row(r, nt, GENERATOR_FLOOR);
            row[0] = 0.0;
            let total: f64 = row.iter().sum();
            Some(row.iter().map(|v| v / total).collect())
        }
        3 => {
            let t = c % nt;
            if t == 0 {
                Some(vec![1.0, 0.0])
            } else if t == t_max {
                None
            } else if censoring {
                let cens = r.gen_range(0.05..0.4);
                Some(vec![cens, 1.0 - cens])
            } else {
                Some(vec![0.0, 1.0])
            }
        }
        _ => None,
    })
}

pub fn survival_instance(
    seed: u64,
    t0: usize,
    censoring: bool,
) -> (FactorizedDistribution, ParameterSpec) {
    let t_max = 3.max(t0);
    let p = survival_distribution(seed, 2, t_max, censoring);
    let mut r = rng(derive_seed(seed, 1));
    let rule = (0..2).map(|_| r.gen_range(0..2)).collect();
    (p, ParameterSpec::DynamicSurvival { rule, t0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_respect_floor_and_sum_to_one() {
        let mut r = rng(1);
        for k in 1..8 {
            let row = random_row(&mut r, k, GENERATOR_FLOOR);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(row
                .iter()
                .all(|v| *v >= GENERATOR_FLOOR.min(1.0 / k as f64) - 1e-15));
        }
    }

    #[test]
    fn seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(5, 9), derive_seed(5, 9));
    }

    #[test]
    fn restricted_transport_rows_do_not_depend_on_a() {
        let (p, spec) = transport_instance(3, true, TransportModel::Restricted);
        spec.validate(&p).unwrap();
    }

    #[test]
    fn instances_validate() {
        for seed in 0..5 {
            let (p, s) = cdf_instance(seed);
            s.validate(&p).unwrap();
            for k in 0..3 {
                let (p, s) = longitudinal_instance(seed, k);
                s.validate(&p).unwrap();
            }
            for t0 in 1..=3 {
                let (p, s) = survival_instance(seed, t0, true);
                s.validate(&p).unwrap();
            }
            for fixed in [false, true] {
                for model in [TransportModel::Unrestricted, TransportModel::Restricted] {
                    let (p, s) = transport_instance(seed, fixed, model);
                    s.validate(&p).unwrap();
                }
            }
        }
    }
}
