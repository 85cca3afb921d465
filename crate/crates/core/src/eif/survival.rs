use super::{Component, Corruption, InfluenceFunction};
use crate::dist::FactorizedDistribution;
use crate::error::Result;
use crate::params::{rule_hazards, ParameterSpec, SurvivalLayout};

/// Hazard-residual sum over `t = 1..=t0` plus the W term. The hazard sum
/// enters with a negative sign: a failure at `t` lowers survival.
pub(super) fn eif_survival(
    p: &FactorizedDistribution,
    rule: &[usize],
    t0: usize,
    corruption: Option<Corruption>,
) -> Result<InfluenceFunction> {
    let layout = SurvivalLayout::new(p, rule, t0)?;
    let (pw, hazards) = rule_hazards(p, &layout)?;
    let psi: f64 = pw.iter().zip(&hazards).map(|(m, h)| m * h.surv[t0]).sum();
    let sign = if corruption == Some(Corruption::SurvivalSignFlip) {
        1.0
    } else {
        -1.0
    };
    let n = p.num_points();
    let mut t_part = vec![0.0; n];
    let mut w_part = vec![0.0; n];
    for o in 0..n {
        let w = layout.w(p, o);
        let h = &hazards[w];
        w_part[o] = h.surv[t0] - psi;
        let a = p.level_index(layout.a, o);
        if a != rule[w] {
            continue;
        }
        let t_obs = p.level_index(layout.t, o);
        let failed = p.level_index(layout.delta, o) == 1;
        let g = p.prob(layout.a, w, a);
        let mut sum = 0.0;
        for t in 1..=t0.min(t_obs) {
            let dn = if failed && t_obs == t { 1.0 } else { 0.0 };
            sum += h.surv_ratio(t, t0) / (g * h.surv_c[t - 1]) * (dn - h.lambda[t]);
        }
        t_part[o] = sign * sum;
    }
    let (a, t, delta) = (layout.a, layout.t, layout.delta);
    debug_assert_eq!(delta, t + 1);
    Ok(InfluenceFunction::from_components(
        ParameterSpec::DynamicSurvival {
            rule: rule.to_vec(),
            t0,
        },
        psi,
        vec![
            Component {
                name: "W".into(),
                factors: 0..a,
                values: w_part,
            },
            Component {
                name: "T".into(),
                factors: t..delta + 1,
                values: t_part,
            },
        ],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::survival_distribution;

    #[test]
    fn no_failures_gives_zero() {
        let base = survival_distribution(1, 2, 3, true);
        // every Delta row puts all mass on censoring
        let rows = vec![vec![1.0, 0.0]; base.factor(3).rows().len()];
        let p = base.with_factor_rows(3, rows).unwrap();
        let d = eif_survival(&p, &[0, 1], 3, None).unwrap();
        assert_eq!(d.psi, 1.0);
        for o in 0..p.num_points() {
            if p.joint()[o] > 0.0 {
                assert!(d.total[o].abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mean_zero() {
        let p = survival_distribution(4, 2, 3, true);
        for t0 in 1..=3 {
            let d = eif_survival(&p, &[1, 0], t0, None).unwrap();
            assert!(p.expectation(&d.total).abs() < 1e-12);
        }
    }
}
