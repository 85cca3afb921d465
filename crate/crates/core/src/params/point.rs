//! Treatment-specific mean, treatment-effect variance and effect among the
//! treated, all on the layout `(W..., A, Y)` with binary `A`.

use serde::Serialize;

use super::{factor_mean, require_binary};
use crate::dist::FactorizedDistribution;
use crate::error::{require_floor, Error, Result};

/// Variable positions for `(W..., A, Y)`.
#[derive(Debug, Clone, Copy)]
pub struct PointLayout {
    pub a: usize,
    pub y: usize,
    /// Number of configurations of the W block.
    pub n_w: usize,
}

impl PointLayout {
    pub fn new(p: &FactorizedDistribution) -> Result<Self> {
        let d = p.num_variables();
        if d < 2 {
            return Err(Error::domain("layout (W..., A, Y) needs at least A and Y"));
        }
        let a = d - 2;
        require_binary(p, a)?;
        Ok(Self {
            a,
            y: d - 1,
            n_w: p.num_prefix_configs(a),
        })
    }

    /// W configuration at point `flat`.
    pub fn w(&self, p: &FactorizedDistribution, flat: usize) -> usize {
        p.prefix_index(flat, self.a)
    }

    pub fn treatment(&self, p: &FactorizedDistribution, flat: usize) -> usize {
        p.level_index(self.a, flat)
    }
}

/// Exact nuisances per W configuration.
#[derive(Debug, Clone)]
pub struct PointNuisance {
    pub layout: PointLayout,
    /// Marginal mass of each W configuration.
    pub pw: Vec<f64>,
    /// `g(1 | w)`.
    pub g1: Vec<f64>,
    /// `Qbar(a, w)` indexed `[a][w]`.
    pub qbar: [Vec<f64>; 2],
}

impl PointNuisance {
    pub fn new(p: &FactorizedDistribution) -> Result<Self> {
        let layout = PointLayout::new(p)?;
        let pw = p.prefix_masses(layout.a);
        let g1 = (0..layout.n_w).map(|w| p.prob(layout.a, w, 1)).collect();
        let qbar = [0, 1].map(|a| {
            (0..layout.n_w)
                .map(|w| factor_mean(p, layout.y, w * 2 + a))
                .collect::<Vec<_>>()
        });
        Ok(Self {
            layout,
            pw,
            g1,
            qbar,
        })
    }

    /// `g(a | w)`.
    pub fn g(&self, a: usize, w: usize) -> f64 {
        if a == 1 {
            self.g1[w]
        } else {
            1.0 - self.g1[w]
        }
    }

    /// Checks `g(a | w) >= floor` for the listed arms on every W with mass.
    pub fn require_positivity(&self, floor: f64, arms: &[usize]) -> Result<()> {
        for w in 0..self.layout.n_w {
            if self.pw[w] <= 0.0 {
                continue;
            }
            for &a in arms {
                require_floor(|| format!("g({a} | w={w})"), self.g(a, w), floor)?;
            }
        }
        Ok(())
    }

    pub fn blip(&self) -> Vec<f64> {
        self.qbar[1]
            .iter()
            .zip(&self.qbar[0])
            .map(|(a, b)| a - b)
            .collect()
    }

    /// `P(A = 1)`.
    pub fn p_treated(&self) -> f64 {
        self.pw.iter().zip(&self.g1).map(|(m, g)| m * g).sum()
    }
}

/// `b(w) = Qbar(1, w) - Qbar(0, w)` on every W configuration with mass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlipTable {
    /// `None` where the W configuration has no mass.
    pub values: Vec<Option<f64>>,
}

impl BlipTable {
    pub fn get(&self, w: usize) -> Option<f64> {
        self.values.get(w).copied().flatten()
    }
}

pub fn blip(p: &FactorizedDistribution) -> Result<BlipTable> {
    let nu = PointNuisance::new(p)?;
    nu.require_positivity(p.positivity_floor(), &[0, 1])?;
    let b = nu.blip();
    Ok(BlipTable {
        values: b
            .iter()
            .zip(&nu.pw)
            .map(|(v, m)| (*m > 0.0).then_some(*v))
            .collect(),
    })
}

/// `E[E[Y | A = 1, W]]`.
pub fn psi_tsm(p: &FactorizedDistribution) -> Result<f64> {
    let nu = PointNuisance::new(p)?;
    nu.require_positivity(p.positivity_floor(), &[1])?;
    Ok(tsm_value(&nu))
}

pub(crate) fn tsm_value(nu: &PointNuisance) -> f64 {
    nu.pw.iter().zip(&nu.qbar[1]).map(|(m, q)| m * q).sum()
}

/// `var(b(W))`.
pub fn psi_vte(p: &FactorizedDistribution) -> Result<f64> {
    let nu = PointNuisance::new(p)?;
    nu.require_positivity(p.positivity_floor(), &[0, 1])?;
    Ok(vte_parts(&nu).1)
}

/// `(E b, var b)`.
pub(crate) fn vte_parts(nu: &PointNuisance) -> (f64, f64) {
    let b = nu.blip();
    let eb: f64 = nu.pw.iter().zip(&b).map(|(m, v)| m * v).sum();
    let var = nu
        .pw
        .iter()
        .zip(&b)
        .map(|(m, v)| m * (v - eb) * (v - eb))
        .sum();
    (eb, var)
}

/// `E[b(W) | A = 1]`.
pub fn psi_att(p: &FactorizedDistribution) -> Result<f64> {
    let nu = PointNuisance::new(p)?;
    att_value(&nu, p.positivity_floor())
}

pub(crate) fn att_value(nu: &PointNuisance, floor: f64) -> Result<f64> {
    let p1 = nu.p_treated();
    if !(p1 > 0.0) {
        return Err(Error::domain("P(A = 1) is zero"));
    }
    nu.require_positivity(floor, &[0, 1])?;
    let b = nu.blip();
    let num: f64 = (0..nu.layout.n_w).map(|w| nu.pw[w] * nu.g1[w] * b[w]).sum();
    Ok(num / p1)
}
