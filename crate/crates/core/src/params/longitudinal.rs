//! Mean outcome under a stochastic intervention on the layout
//! `(L0, A0, L1, A1, ..., LK, AK, Y)`.

use super::check_rows;
use crate::dist::FactorizedDistribution;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LongitudinalLayout {
    /// Number of time points after the first (`K`).
    pub k: usize,
}

impl LongitudinalLayout {
    pub fn new(p: &FactorizedDistribution, g_star: &[Vec<Vec<f64>>]) -> Result<Self> {
        let d = p.num_variables();
        if d < 3 || d.is_multiple_of(2) {
            return Err(Error::domain(
                "longitudinal layout is (L0, A0, ..., LK, AK, Y): an odd number of at least 3 variables",
            ));
        }
        let k = (d - 3) / 2;
        if g_star.len() != k + 1 {
            return Err(Error::invalid(format!(
                "{} intervention tables for {} treatment nodes",
                g_star.len(),
                k + 1
            )));
        }
        for (j, table) in g_star.iter().enumerate() {
            let var = Self::treatment(j);
            check_rows(
                table,
                p.num_prefix_configs(var),
                p.variable(var).len(),
                &format!("intervention table for '{}'", p.variable(var).name),
            )?;
        }
        Ok(Self { k })
    }

    /// Variable index of `L(j)`; `j = K + 1` is the outcome.
    pub fn covariate(j: usize) -> usize {
        2 * j
    }

    /// Variable index of `A(j)`.
    pub fn treatment(j: usize) -> usize {
        2 * j + 1
    }
}

/// Integrates a function of the first `var + 1` variables over variable
/// `var` with the given conditional rows. Returns a full table that depends
/// only on the first `var` variables.
pub(crate) fn integrate_var(
    p: &FactorizedDistribution,
    q: &[f64],
    var: usize,
    rows: &[Vec<f64>],
) -> Vec<f64> {
    let n = p.variable(var).len();
    let block = p.block_size(var + 1);
    let mut out = vec![0.0; p.num_points()];
    for (c, row) in rows.iter().enumerate() {
        let v: f64 = row
            .iter()
            .enumerate()
            .map(|(l, w)| w * q[(c * n + l) * block])
            .sum();
        out[c * n * block..(c + 1) * n * block].fill(v);
    }
    out
}

/// `Qbar_{L(j)}` for `j = 0..=K+1`, with `Qbar_{L(K+1)} = Y`. Each table is
/// a function of the history up to and including `L(j)`.
pub fn gcomp_recursion(
    p: &FactorizedDistribution,
    g_star: &[Vec<Vec<f64>>],
) -> Result<Vec<Vec<f64>>> {
    let layout = LongitudinalLayout::new(p, g_star)?;
    let k = layout.k;
    let y = LongitudinalLayout::covariate(k + 1);
    let mut tables = vec![Vec::new(); k + 2];
    tables[k + 1] = p.tabulate(|o| p.level_value(y, o));
    for j in (0..=k).rev() {
        let next = LongitudinalLayout::covariate(j + 1);
        let over_l = integrate_var(p, &tables[j + 1], next, p.factor(next).rows());
        let a = LongitudinalLayout::treatment(j);
        tables[j] = integrate_var(p, &over_l, a, &g_star[j]);
    }
    Ok(tables)
}

pub fn psi_longitudinal(p: &FactorizedDistribution, g_star: &[Vec<Vec<f64>>]) -> Result<f64> {
    let tables = gcomp_recursion(p, g_star)?;
    Ok(integrate_var(p, &tables[0], 0, p.factor(0).rows())[0])
}
