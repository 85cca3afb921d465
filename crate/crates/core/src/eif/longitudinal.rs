use super::{Component, InfluenceFunction};
use crate::dist::FactorizedDistribution;
use crate::error::{require_floor, Result};
use crate::params::{gcomp_recursion, integrate_var, LongitudinalLayout, ParameterSpec};

/// `sum_j (prod_{i<j} g*_i / g_i) (Qbar_{L(j)} - E[Qbar_{L(j)} | past])`.
pub fn eif_longitudinal(
    p: &FactorizedDistribution,
    g_star: &[Vec<Vec<f64>>],
) -> Result<InfluenceFunction> {
    let layout = LongitudinalLayout::new(p, g_star)?;
    let k = layout.k;
    let tables = gcomp_recursion(p, g_star)?;
    let psi = integrate_var(p, &tables[0], 0, p.factor(0).rows())[0];

    // g*/g at each treatment node, with positivity on the g*-support
    let floor = p.positivity_floor();
    let mut ratios = Vec::with_capacity(k + 1);
    for (j, table) in g_star.iter().enumerate() {
        let var = LongitudinalLayout::treatment(j);
        let masses = p.prefix_masses(var);
        for (c, row) in table.iter().enumerate() {
            if masses[c] <= 0.0 {
                continue;
            }
            for (a, gs) in row.iter().enumerate() {
                if *gs > 0.0 {
                    require_floor(
                        || format!("g_{j}({a} | history {c})"),
                        p.prob(var, c, a),
                        floor,
                    )?;
                }
            }
        }
        let ratio: Vec<f64> = (0..p.num_points())
            .map(|o| {
                let (c, a) = (p.prefix_index(o, var), p.level_index(var, o));
                let gs = table[c][a];
                if gs > 0.0 {
                    gs / p.prob(var, c, a)
                } else {
                    0.0
                }
            })
            .collect();
        ratios.push(ratio);
    }

    let mut weight = vec![1.0; p.num_points()];
    let mut components = Vec::with_capacity(k + 2);
    for (j, q) in tables.iter().enumerate() {
        let var = LongitudinalLayout::covariate(j);
        let past = integrate_var(p, q, var, p.factor(var).rows());
        let values = (0..p.num_points())
            .map(|o| weight[o] * (q[o] - past[o]))
            .collect();
        let name = if j == k + 1 {
            "Y".to_string()
        } else {
            format!("L{j}")
        };
        components.push(Component {
            name,
            factors: var..var + 1,
            values,
        });
        if j <= k {
            weight.iter_mut().zip(&ratios[j]).for_each(|(w, r)| *w *= r);
        }
    }
    Ok(InfluenceFunction::from_components(
        ParameterSpec::LongitudinalMean {
            g_star: g_star.to_vec(),
        },
        psi,
        components,
    ))
}
