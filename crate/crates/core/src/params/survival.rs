//! Survival past `t0` under a dynamic treatment rule, discrete time.
//!
//! Layout `(W..., A, T, Delta)`: `T` is the observed time with levels
//! `0, 1, ..., T_max` and `Delta = 1` marks an observed failure. Censoring
//! at time `c` happens after any failure at `c`, failures start at time 1,
//! so `T = 0` is only possible as a censoring time.

use super::require_binary;
use crate::dist::FactorizedDistribution;
use crate::error::{require_floor, Error, Result};

#[derive(Debug, Clone)]
pub struct SurvivalLayout {
    pub a: usize,
    pub t: usize,
    pub delta: usize,
    pub n_w: usize,
    pub n_a: usize,
    pub t_max: usize,
    pub t0: usize,
    pub rule: Vec<usize>,
}

impl SurvivalLayout {
    pub fn new(p: &FactorizedDistribution, rule: &[usize], t0: usize) -> Result<Self> {
        let d = p.num_variables();
        if d < 3 {
            return Err(Error::domain("survival layout is (W..., A, T, Delta)"));
        }
        let (a, t, delta) = (d - 3, d - 2, d - 1);
        require_binary(p, delta)?;
        let times = &p.variable(t).levels;
        if times.iter().enumerate().any(|(i, v)| *v != i as f64) || times.len() < 2 {
            return Err(Error::domain(
                "time levels must be 0, 1, ..., T_max with T_max >= 1",
            ));
        }
        let t_max = times.len() - 1;
        if t0 == 0 || t0 > t_max {
            return Err(Error::invalid(format!("t0 = {t0} must lie in 1..={t_max}")));
        }
        let n_w = p.num_prefix_configs(a);
        let n_a = p.variable(a).len();
        if rule.len() != n_w {
            return Err(Error::invalid(format!(
                "rule has {} entries for {} W configurations",
                rule.len(),
                n_w
            )));
        }
        if let Some(bad) = rule.iter().find(|r| **r >= n_a) {
            return Err(Error::invalid(format!(
                "rule assigns treatment level {bad}, only {n_a} levels"
            )));
        }
        let layout = Self {
            a,
            t,
            delta,
            n_w,
            n_a,
            t_max,
            t0,
            rule: rule.to_vec(),
        };
        for row in 0..n_w * n_a {
            let p0 = p.prob(t, row, 0);
            if p0 > 0.0 && p.prob(delta, row * (t_max + 1), 1) != 0.0 {
                return Err(Error::domain(
                    "failure at time 0 is not allowed (Delta must be 0 when T = 0)",
                ));
            }
        }
        Ok(layout)
    }

    pub fn w(&self, p: &FactorizedDistribution, flat: usize) -> usize {
        p.prefix_index(flat, self.a)
    }
}

/// Discrete hazards and survival curves for one `(w, a)` stratum, indexed by
/// time `0..=T_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hazards {
    /// Failure hazard `lambda(t)`, zero at `t = 0`.
    pub lambda: Vec<f64>,
    /// Censoring hazard `lambda_C(c)`.
    pub lambda_c: Vec<f64>,
    /// `s(t) = prod_{k=1}^{t} (1 - lambda(k))`.
    pub surv: Vec<f64>,
    /// `s_c(t) = prod_{c=0}^{t} (1 - lambda_C(c))`.
    pub surv_c: Vec<f64>,
}

impl Hazards {
    pub fn new(p: &FactorizedDistribution, layout: &SurvivalLayout, w: usize, a: usize) -> Self {
        let nt = layout.t_max + 1;
        let row = w * layout.n_a + a;
        let pt: Vec<f64> = (0..nt).map(|t| p.prob(layout.t, row, t)).collect();
        let fail: Vec<f64> = (0..nt)
            .map(|t| pt[t] * p.prob(layout.delta, row * nt + t, 1))
            .collect();
        let cens: Vec<f64> = (0..nt)
            .map(|t| pt[t] * p.prob(layout.delta, row * nt + t, 0))
            .collect();
        let mut at_risk = vec![0.0; nt + 1];
        for t in (0..nt).rev() {
            at_risk[t] = at_risk[t + 1] + pt[t];
        }
        let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
        let lambda: Vec<f64> = (0..nt)
            .map(|t| {
                if t == 0 {
                    0.0
                } else {
                    ratio(fail[t], at_risk[t])
                }
            })
            .collect();
        let lambda_c: Vec<f64> = (0..nt)
            .map(|c| ratio(cens[c], at_risk[c] - fail[c]))
            .collect();
        let mut surv = vec![1.0; nt];
        let mut surv_c = vec![1.0 - lambda_c[0]; nt];
        for t in 1..nt {
            surv[t] = surv[t - 1] * (1.0 - lambda[t]);
            surv_c[t] = surv_c[t - 1] * (1.0 - lambda_c[t]);
        }
        Self {
            lambda,
            lambda_c,
            surv,
            surv_c,
        }
    }

    /// `s(t0) / s(t)` as a product, so it stays defined when `s(t) = 0`.
    pub fn surv_ratio(&self, t: usize, t0: usize) -> f64 {
        ((t + 1)..=t0).map(|k| 1.0 - self.lambda[k]).product()
    }
}

/// Hazards under the rule for every W configuration, plus positivity checks.
pub(crate) fn rule_hazards(
    p: &FactorizedDistribution,
    layout: &SurvivalLayout,
) -> Result<(Vec<f64>, Vec<Hazards>)> {
    let pw = p.prefix_masses(layout.a);
    let floor = p.positivity_floor();
    let mut out = Vec::with_capacity(layout.n_w);
    for w in 0..layout.n_w {
        let a = layout.rule[w];
        let h = Hazards::new(p, layout, w, a);
        if pw[w] > 0.0 {
            require_floor(|| format!("g({a} | w={w})"), p.prob(layout.a, w, a), floor)?;
            require_floor(
                || format!("s_c({} | a={a}, w={w})", layout.t0 - 1),
                h.surv_c[layout.t0 - 1],
                floor,
            )?;
        }
        out.push(h);
    }
    Ok((pw, out))
}

/// `E_W s(t0 | d(W), W)`.
pub fn psi_survival(p: &FactorizedDistribution, rule: &[usize], t0: usize) -> Result<f64> {
    let layout = SurvivalLayout::new(p, rule, t0)?;
    let (pw, hazards) = rule_hazards(p, &layout)?;
    Ok(pw.iter().zip(&hazards).map(|(m, h)| m * h.surv[t0]).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::VariableSpec;

    /// One binary W, binary A, times 0..=3, failure hazard `h` at every time
    /// and no censoring before the end.
    fn constant_hazard(h: f64) -> FactorizedDistribution {
        let vars = vec![
            VariableSpec::binary("W", "confounder"),
            VariableSpec::binary("A", "treatment"),
            VariableSpec::new("T", vec![0.0, 1.0, 2.0, 3.0], "time-slice"),
            VariableSpec::binary("Delta", "outcome"),
        ];
        let pt = vec![0.0, h, (1.0 - h) * h, (1.0 - h) * (1.0 - h)];
        // at T = 3 the stratum splits into failures (h) and survivors
        let d3 = vec![1.0 - h, h];
        let mut delta = Vec::new();
        for _ in 0..4 {
            delta.extend([vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0], d3.clone()]);
        }
        FactorizedDistribution::from_tables(
            vars,
            vec![
                vec![vec![0.5, 0.5]],
                vec![vec![0.5, 0.5]; 2],
                vec![pt; 4],
                delta,
            ],
            1e-3,
        )
        .unwrap()
    }

    #[test]
    fn no_failures() {
        let p = constant_hazard(0.0);
        for t0 in 1..=3 {
            assert_eq!(psi_survival(&p, &[0, 1], t0).unwrap(), 1.0);
        }
    }

    #[test]
    fn constant_hazard_power() {
        let h = 0.2;
        let p = constant_hazard(h);
        let v = psi_survival(&p, &[1, 0], 3).unwrap();
        assert!((v - (1.0f64 - h).powi(3)).abs() < 1e-14, "{v}");
        let hz = Hazards::new(&p, &SurvivalLayout::new(&p, &[1, 0], 3).unwrap(), 0, 1);
        for t in 1..=3 {
            assert!((hz.lambda[t] - h).abs() < 1e-14);
        }
    }

    #[test]
    fn bad_configuration() {
        let p = constant_hazard(0.2);
        assert!(psi_survival(&p, &[0], 2).is_err());
        assert!(psi_survival(&p, &[0, 2], 2).is_err());
        assert!(psi_survival(&p, &[0, 1], 0).is_err());
        assert!(psi_survival(&p, &[0, 1], 4).is_err());
    }
}
