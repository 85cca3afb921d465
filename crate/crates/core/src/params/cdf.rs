use crate::dist::{FactorizedDistribution, QuadratureGrid};
use crate::error::{Error, Result};

pub(crate) fn check_univariate(p: &FactorizedDistribution) -> Result<()> {
    if p.num_variables() != 1 {
        return Err(Error::domain(format!(
            "the squared-CDF functional needs a univariate distribution, got {} variables",
            p.num_variables()
        )));
    }
    Ok(())
}

/// `F(x_k)` at every grid point.
pub(crate) fn cdf_at_grid(p: &FactorizedDistribution, grid: &QuadratureGrid) -> Vec<f64> {
    let levels = &p.variable(0).levels;
    let probs = p.joint();
    grid.points()
        .iter()
        .map(|&x| {
            levels
                .iter()
                .zip(probs)
                .filter(|(v, _)| **v <= x)
                .map(|(_, q)| q)
                .sum()
        })
        .collect()
}

/// `sum_k w_k F(x_k)^2`.
pub fn psi_cdf_square(p: &FactorizedDistribution, grid: &QuadratureGrid) -> Result<f64> {
    check_univariate(p)?;
    Ok(cdf_at_grid(p, grid)
        .iter()
        .zip(grid.weights())
        .map(|(f, w)| w * f * f)
        .sum())
}
