//! Transported stochastic direct effect on the layout
//! `(S, W..., A, Z, M, Y)` where `Y` is only observed when `S = 1`.

use super::{check_rows, factor_mean, require_binary, Intervention, ParameterSpec, TransportModel};
use crate::dist::FactorizedDistribution;
use crate::error::{require_floor, Error, Result};

/// Tolerance for the restriction "Y and M rows do not depend on A".
pub const RESTRICTION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct TransportLayout {
    /// Number of W variables (they sit at indices `1..=w_vars`).
    pub w_vars: usize,
    /// Number of W configurations.
    pub n_w: usize,
    pub a: usize,
    pub z: usize,
    pub m: usize,
    pub y: usize,
}

impl TransportLayout {
    pub fn new(p: &FactorizedDistribution) -> Result<Self> {
        let d = p.num_variables();
        if d < 6 {
            return Err(Error::domain(
                "transport layout is (S, W..., A, Z, M, Y) with at least one W",
            ));
        }
        let w_vars = d - 5;
        let layout = Self {
            w_vars,
            n_w: p.num_prefix_configs(1 + w_vars) / p.variable(0).len(),
            a: d - 4,
            z: d - 3,
            m: d - 2,
            y: d - 1,
        };
        for v in [0, layout.a, layout.z, layout.m] {
            require_binary(p, v)?;
        }
        if !p.variable(layout.y).levels.contains(&0.0) {
            return Err(Error::domain(
                "outcome levels must include 0 (Y is recorded as Y*S)",
            ));
        }
        Ok(layout)
    }

    /// Row of the A factor for `(s, w)`.
    #[inline]
    pub fn row_a(&self, s: usize, w: usize) -> usize {
        s * self.n_w + w
    }
    #[inline]
    pub fn row_z(&self, s: usize, w: usize, a: usize) -> usize {
        self.row_a(s, w) * 2 + a
    }
    #[inline]
    pub fn row_m(&self, s: usize, w: usize, a: usize, z: usize) -> usize {
        self.row_z(s, w, a) * 2 + z
    }
    #[inline]
    pub fn row_y(&self, s: usize, w: usize, a: usize, z: usize, m: usize) -> usize {
        self.row_m(s, w, a, z) * 2 + m
    }

    /// `(s, w, a, z, m)` level indices at a point.
    pub fn coords(
        &self,
        p: &FactorizedDistribution,
        flat: usize,
    ) -> (usize, usize, usize, usize, usize) {
        let s = p.level_index(0, flat);
        let w = p.prefix_index(flat, self.a) % self.n_w;
        (
            s,
            w,
            p.level_index(self.a, flat),
            p.level_index(self.z, flat),
            p.level_index(self.m, flat),
        )
    }
}

/// Exact nuisances for the transport parameter.
#[derive(Debug, Clone)]
pub struct TransportNuisance<'a> {
    pub p: &'a FactorizedDistribution,
    pub layout: TransportLayout,
    pub a: usize,
    pub a_star: usize,
    pub s_star: usize,
    pub fixed: bool,
    pub model: TransportModel,
    /// `P(S = s)`.
    pub ps: [f64; 2],
    /// Mass of `(S = s, W = w)`, indexed `[s][w]`.
    pub mass_sw: [Vec<f64>; 2],
    /// Mediator intervention `g(m | w)`, indexed `[w][m]`.
    pub ghat: Vec<[f64; 2]>,
}

impl<'a> TransportNuisance<'a> {
    /// Validates layout, configuration and positivity. The model restriction
    /// is checked only when `check_restriction` is set, since paths through
    /// a restricted distribution leave the model at second order.
    pub fn new(
        p: &'a FactorizedDistribution,
        spec: &ParameterSpec,
        check_restriction: bool,
    ) -> Result<Self> {
        let ParameterSpec::TransportSde {
            a,
            a_star,
            s_star,
            intervention,
            model,
        } = spec
        else {
            return Err(Error::invalid("not a transport parameter"));
        };
        for (name, v) in [("a", a), ("a_star", a_star), ("s_star", s_star)] {
            if *v > 1 {
                return Err(Error::invalid(format!("{name} must be 0 or 1")));
            }
        }
        let layout = TransportLayout::new(p)?;
        let masses = p.prefix_masses(1 + layout.w_vars);
        let mass_sw = [0, 1].map(|s| masses[s * layout.n_w..(s + 1) * layout.n_w].to_vec());
        let ps = [0, 1].map(|s| mass_sw[s].iter().sum::<f64>());
        if !(ps[0] > 0.0) {
            return Err(Error::domain("the S = 0 stratum is empty"));
        }
        if !(ps[1] > 0.0) {
            return Err(Error::domain("the S = 1 stratum is empty"));
        }
        let fixed = matches!(intervention, Intervention::FromP);
        let mut nu = Self {
            p,
            layout,
            a: *a,
            a_star: *a_star,
            s_star: *s_star,
            fixed,
            model: *model,
            ps,
            mass_sw,
            ghat: Vec::new(),
        };
        nu.check_outcome_censoring()?;
        if check_restriction && *model == TransportModel::Restricted {
            nu.check_restriction()?;
        }
        nu.ghat = match intervention {
            Intervention::Supplied(rows) => {
                check_rows(rows, layout.n_w, 2, "supplied mediator intervention")?;
                rows.iter().map(|r| [r[0], r[1]]).collect()
            }
            Intervention::FromP => (0..layout.n_w)
                .map(|w| {
                    let f = |m| {
                        (0..2)
                            .map(|z| {
                                nu.g_m(m, z, *a_star, w, *s_star) * nu.p_z(z, *a_star, w, *s_star)
                            })
                            .sum()
                    };
                    [f(0), f(1)]
                })
                .collect(),
        };
        nu.check_positivity()?;
        Ok(nu)
    }

    fn check_outcome_censoring(&self) -> Result<()> {
        let l = &self.layout;
        let zero = self
            .p
            .variable(l.y)
            .levels
            .iter()
            .position(|v| *v == 0.0)
            .unwrap_or(0);
        let masses = self.p.prefix_masses(l.y);
        for (row, mass) in masses.iter().enumerate().take(masses.len() / 2) {
            // first half of the rows has S = 0
            if *mass > 0.0 && self.p.prob(l.y, row, zero) != 1.0 {
                return Err(Error::domain(
                    "outcome must be a point mass at 0 when S = 0",
                ));
            }
        }
        Ok(())
    }

    fn check_restriction(&self) -> Result<()> {
        let l = &self.layout;
        for s in 0..2 {
            for w in 0..l.n_w {
                for z in 0..2 {
                    let (r0, r1) = (l.row_m(s, w, 0, z), l.row_m(s, w, 1, z));
                    if !rows_close(self.p.factor(l.m).row(r0), self.p.factor(l.m).row(r1)) {
                        return Err(Error::Model(format!(
                            "mediator mechanism depends on A at s={s}, w={w}, z={z}"
                        )));
                    }
                    for m in 0..2 {
                        let (r0, r1) = (l.row_y(s, w, 0, z, m), l.row_y(s, w, 1, z, m));
                        if !rows_close(self.p.factor(l.y).row(r0), self.p.factor(l.y).row(r1)) {
                            return Err(Error::Model(format!(
                                "outcome mechanism depends on A at s={s}, w={w}, z={z}, m={m}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn check_positivity(&self) -> Result<()> {
        let floor = self.p.positivity_floor();
        let restricted = self.model == TransportModel::Restricted;
        for w in 0..self.layout.n_w {
            if self.mass_sw[0][w] + self.mass_sw[1][w] <= 0.0 {
                continue;
            }
            require_floor(|| format!("p(S=1 | w={w})"), self.p_s_given_w(1, w), floor)?;
            require_floor(
                || format!("g_A({} | w={w}, S=1)", self.a),
                self.g_a(self.a, w, 1),
                floor,
            )?;
            require_floor(
                || format!("g_A({} | w={w}, S=0)", self.a),
                self.g_a(self.a, w, 0),
                floor,
            )?;
            for z in 0..2 {
                require_floor(
                    || format!("p_Z({z} | a, w={w}, S=1)"),
                    self.p_z(z, self.a, w, 1),
                    floor,
                )?;
                for m in 0..2 {
                    require_floor(
                        || format!("g_M({m} | z={z}, a, w={w}, S=1)"),
                        self.g_m(m, z, self.a, w, 1),
                        floor,
                    )?;
                }
                if restricted {
                    for s in [1, self.s_star] {
                        require_floor(
                            || format!("p_Z({z} | w={w}, S={s})"),
                            self.p_z_marginal(z, w, s),
                            floor,
                        )?;
                    }
                }
            }
            if self.fixed {
                let (a, s) = (self.a_star, self.s_star);
                require_floor(
                    || format!("g_A({a} | w={w}, S={s})"),
                    self.g_a(a, w, s),
                    floor,
                )?;
                require_floor(
                    || format!("p(S={s} | w={w})"),
                    self.p_s_given_w(s, w),
                    floor,
                )?;
            }
        }
        Ok(())
    }

    pub fn p_s_given_w(&self, s: usize, w: usize) -> f64 {
        let tot = self.mass_sw[0][w] + self.mass_sw[1][w];
        if tot > 0.0 {
            self.mass_sw[s][w] / tot
        } else {
            0.0
        }
    }

    pub fn p_w_given_s(&self, w: usize, s: usize) -> f64 {
        self.mass_sw[s][w] / self.ps[s]
    }

    pub fn g_a(&self, a: usize, w: usize, s: usize) -> f64 {
        self.p.prob(self.layout.a, self.layout.row_a(s, w), a)
    }

    pub fn p_z(&self, z: usize, a: usize, w: usize, s: usize) -> f64 {
        self.p.prob(self.layout.z, self.layout.row_z(s, w, a), z)
    }

    /// `p(z | w, s)`, the Z law mixed over the treatment mechanism.
    pub fn p_z_marginal(&self, z: usize, w: usize, s: usize) -> f64 {
        (0..2)
            .map(|a| self.p_z(z, a, w, s) * self.g_a(a, w, s))
            .sum()
    }

    pub fn g_m(&self, m: usize, z: usize, a: usize, w: usize, s: usize) -> f64 {
        self.p.prob(self.layout.m, self.layout.row_m(s, w, a, z), m)
    }

    /// `E[Y | m, z, a, w, s]`.
    pub fn qbar(&self, m: usize, z: usize, a: usize, w: usize, s: usize) -> f64 {
        factor_mean(self.p, self.layout.y, self.layout.row_y(s, w, a, z, m))
    }

    /// `sum_m ghat(m | w) Qbar(m, z, a, w, 1)`.
    pub fn qbar_m(&self, z: usize, w: usize) -> f64 {
        (0..2)
            .map(|m| self.ghat[w][m] * self.qbar(m, z, self.a, w, 1))
            .sum()
    }

    /// `sum_z p_Z(z | a, w, s) Qbar_M(z, w)`.
    pub fn qbar_z(&self, w: usize, s: usize) -> f64 {
        (0..2)
            .map(|z| self.p_z(z, self.a, w, s) * self.qbar_m(z, w))
            .sum()
    }

    /// `sum_z Qbar(m, z, a, w, 1) p_Z(z | a, w, 0)`.
    pub fn qbar_a0(&self, m: usize, w: usize) -> f64 {
        (0..2)
            .map(|z| self.qbar(m, z, self.a, w, 1) * self.p_z(z, self.a, w, 0))
            .sum()
    }

    /// `sum_m Qbar_a0(m, w) g_M(m | z, a', w, s)`.
    pub fn qbar_a0_z(&self, z: usize, a: usize, w: usize, s: usize) -> f64 {
        (0..2)
            .map(|m| self.qbar_a0(m, w) * self.g_m(m, z, a, w, s))
            .sum()
    }

    pub fn psi(&self) -> f64 {
        (0..self.layout.n_w)
            .map(|w| self.p_w_given_s(w, 0) * self.qbar_z(w, 0))
            .sum()
    }
}

fn rows_close(a: &[f64], b: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x - y).abs() <= RESTRICTION_TOLERANCE)
}

/// `sum_w p(w | S=0) sum_z p_Z(z | a, w, 0) sum_m g(m | w) E[Y | m, z, a, w, S=1]`.
pub fn psi_transport_sde(p: &FactorizedDistribution, spec: &ParameterSpec) -> Result<f64> {
    Ok(TransportNuisance::new(p, spec, false)?.psi())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::VariableSpec;

    fn vars() -> Vec<VariableSpec> {
        vec![
            VariableSpec::binary("S", "site"),
            VariableSpec::binary("W", "confounder"),
            VariableSpec::binary("A", "treatment"),
            VariableSpec::binary("Z", "mediator"),
            VariableSpec::binary("M", "mediator"),
            VariableSpec::new("Y", vec![0.0, 1.0, 2.0], "outcome"),
        ]
    }

    fn spec(intervention: Intervention) -> ParameterSpec {
        ParameterSpec::TransportSde {
            a: 1,
            a_star: 0,
            s_star: 1,
            intervention,
            model: TransportModel::Unrestricted,
        }
    }

    /// Half/half rows everywhere except Y, which is given as a function of
    /// `(s, w, a, z, m)`.
    fn build(
        y_row: impl Fn(usize, usize, usize, usize, usize) -> Vec<f64>,
    ) -> FactorizedDistribution {
        let half = vec![0.5, 0.5];
        let mut y = Vec::new();
        for s in 0..2 {
            for w in 0..2 {
                for a in 0..2 {
                    for z in 0..2 {
                        for m in 0..2 {
                            y.push(if s == 0 {
                                vec![1.0, 0.0, 0.0]
                            } else {
                                y_row(s, w, a, z, m)
                            });
                        }
                    }
                }
            }
        }
        FactorizedDistribution::from_tables(
            vars(),
            vec![
                vec![half.clone()],
                vec![half.clone(); 2],
                vec![half.clone(); 4],
                vec![half.clone(); 8],
                vec![half.clone(); 16],
                y,
            ],
            1e-3,
        )
        .unwrap()
    }

    #[test]
    fn independent_outcome_gives_its_mean() {
        let p = build(|_, _, _, _, _| vec![0.2, 0.5, 0.3]);
        let ghat = Intervention::Supplied(vec![vec![0.3, 0.7], vec![0.9, 0.1]]);
        let v = psi_transport_sde(&p, &spec(ghat)).unwrap();
        assert!((v - 1.1).abs() < 1e-14, "{v}");
    }

    #[test]
    fn degenerate_chain() {
        let p = build(|_, _, _, _, m| {
            if m == 1 {
                vec![0.0, 1.0, 0.0]
            } else {
                vec![1.0, 0.0, 0.0]
            }
        });
        let ghat = Intervention::Supplied(vec![vec![0.0, 1.0], vec![0.0, 1.0]]);
        assert!((psi_transport_sde(&p, &spec(ghat)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn supplied_equal_to_from_p_gives_same_value() {
        let p = build(|_, w, a, z, m| {
            let t = 0.1 + 0.1 * (w + a + 2 * z + m) as f64;
            vec![0.5 - t / 2.0, 0.5, t / 2.0]
        });
        let from_p = spec(Intervention::FromP);
        let nu = TransportNuisance::new(&p, &from_p, false).unwrap();
        let table = nu.ghat.iter().map(|r| r.to_vec()).collect();
        let a = psi_transport_sde(&p, &from_p).unwrap();
        let b = psi_transport_sde(&p, &spec(Intervention::Supplied(table))).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn outcome_must_be_censored_off_site() {
        let mut p = build(|_, _, _, _, _| vec![0.2, 0.5, 0.3]);
        let mut rows = p.factor(5).rows().to_vec();
        rows[0] = vec![0.5, 0.5, 0.0];
        p = p.with_factor_rows(5, rows).unwrap();
        let ghat = Intervention::Supplied(vec![vec![0.5, 0.5]; 2]);
        assert!(matches!(
            psi_transport_sde(&p, &spec(ghat)),
            Err(Error::Domain(_))
        ));
    }
}
