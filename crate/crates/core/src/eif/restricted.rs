use crate::dist::FactorizedDistribution;
use crate::error::{Error, Result};
use crate::params::RESTRICTION_TOLERANCE;
use crate::tangent::project_onto_restricted_factor;

/// "The law of `child` given its past does not depend on `dropped`."
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Restriction {
    pub child: usize,
    pub dropped: Vec<usize>,
}

impl Restriction {
    /// Checks the restriction on the factor table of `child`.
    pub fn check(&self, p: &FactorizedDistribution) -> Result<()> {
        if self.child >= p.num_variables() || self.dropped.iter().any(|&v| v >= self.child) {
            return Err(Error::domain(
                "restriction must drop variables earlier than the child",
            ));
        }
        let factor = p.factor(self.child);
        let sizes: Vec<usize> = (0..self.child).map(|v| p.variable(v).len()).collect();
        for (c, row) in factor.rows().iter().enumerate() {
            // reference row: same parents with every dropped variable at level 0
            let mut levels = decode(c, &sizes);
            for &v in &self.dropped {
                levels[v] = 0;
            }
            let reference = factor.row(encode(&levels, &sizes));
            if row
                .iter()
                .zip(reference)
                .any(|(a, b)| (a - b).abs() > RESTRICTION_TOLERANCE)
            {
                return Err(Error::Model(format!(
                    "factor of '{}' depends on a dropped variable at parent configuration {c}",
                    p.variable(self.child).name
                )));
            }
        }
        Ok(())
    }
}

fn decode(mut idx: usize, sizes: &[usize]) -> Vec<usize> {
    let mut out = vec![0; sizes.len()];
    for (slot, &n) in out.iter_mut().zip(sizes).rev() {
        *slot = idx % n;
        idx /= n;
    }
    out
}

fn encode(levels: &[usize], sizes: &[usize]) -> usize {
    levels.iter().zip(sizes).fold(0, |acc, (l, n)| acc * n + l)
}

/// `E[D | child and reduced past] - E[D | reduced past]`, the projection of a
/// component of the child's unrestricted tangent space onto the restricted
/// one.
pub fn project_to_restricted(
    p: &FactorizedDistribution,
    component: &[f64],
    restriction: &Restriction,
) -> Result<Vec<f64>> {
    restriction.check(p)?;
    Ok(
        project_onto_restricted_factor(p, component, restriction.child, &restriction.dropped)
            .into_values(),
    )
}
