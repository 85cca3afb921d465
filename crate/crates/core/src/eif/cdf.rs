use super::{Component, InfluenceFunction};
use crate::dist::{FactorizedDistribution, QuadratureGrid};
use crate::error::Result;
use crate::params::{psi_cdf_square, ParameterSpec};

/// `2 sum_k w_k F(x_k) (I(O <= x_k) - F(x_k))`.
pub fn eif_cdf_square(
    p: &FactorizedDistribution,
    grid: &QuadratureGrid,
) -> Result<InfluenceFunction> {
    let psi = psi_cdf_square(p, grid)?;
    let f = crate::params::cdf_at_grid(p, grid);
    let levels = &p.variable(0).levels;
    let values = levels
        .iter()
        .map(|&o| {
            2.0 * grid
                .points()
                .iter()
                .zip(grid.weights())
                .zip(&f)
                .map(|((&x, w), fx)| w * fx * (f64::from(u8::from(o <= x)) - fx))
                .sum::<f64>()
        })
        .collect();
    Ok(InfluenceFunction::from_components(
        ParameterSpec::CdfSquare { grid: grid.clone() },
        psi,
        vec![Component {
            name: "O".into(),
            factors: 0..1,
            values,
        }],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::VariableSpec;

    #[test]
    fn point_mass_has_zero_gradient() {
        let p = FactorizedDistribution::from_tables(
            vec![VariableSpec::new("O", vec![1.0, 2.0, 3.0], "outcome")],
            vec![vec![vec![0.0, 1.0, 0.0]]],
            0.0,
        )
        .unwrap();
        let grid = QuadratureGrid::unit(vec![1.0, 2.0, 3.0], 1.0, 3.0).unwrap();
        let d = eif_cdf_square(&p, &grid).unwrap();
        // off the atom the table is not evaluated under P; on it D* = 0
        assert_eq!(d.total[1], 0.0);
    }

    #[test]
    fn uniform_mean_zero() {
        let p = FactorizedDistribution::from_tables(
            vec![VariableSpec::new("O", vec![1.0, 2.0, 3.0, 4.0], "outcome")],
            vec![vec![vec![0.25; 4]]],
            0.0,
        )
        .unwrap();
        let grid = QuadratureGrid::unit(vec![1.0, 2.0, 3.0, 4.0], 1.0, 4.0).unwrap();
        let d = eif_cdf_square(&p, &grid).unwrap();
        assert!(p.expectation(&d.total).abs() <= 1e-14);
        assert_eq!(d.psi, 1.875);
    }
}
