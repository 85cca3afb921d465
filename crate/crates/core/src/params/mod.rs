//! Parameter mappings evaluated exactly on a [`FactorizedDistribution`].

mod cdf;
mod longitudinal;
mod point;
mod survival;
mod transport;

pub(crate) use cdf::cdf_at_grid;
pub use cdf::psi_cdf_square;
pub(crate) use longitudinal::integrate_var;
pub use longitudinal::{gcomp_recursion, psi_longitudinal, LongitudinalLayout};
pub(crate) use point::{att_value, tsm_value, vte_parts};
pub use point::{blip, psi_att, psi_tsm, psi_vte, BlipTable, PointLayout, PointNuisance};
pub(crate) use survival::rule_hazards;
pub use survival::{psi_survival, Hazards, SurvivalLayout};
pub use transport::{psi_transport_sde, TransportLayout, TransportNuisance, RESTRICTION_TOLERANCE};

use serde::{Deserialize, Serialize};

use crate::dist::{FactorizedDistribution, QuadratureGrid, ROW_SUM_TOLERANCE};
use crate::error::{Error, Result};

/// Source of the mediator intervention in the transport parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intervention {
    /// A fixed table `g(m | w)`, one row per configuration of the W block.
    Supplied(Vec<Vec<f64>>),
    /// Built from the distribution's own mediator and Z mechanisms.
    FromP,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportModel {
    Unrestricted,
    /// Y and M mechanisms do not depend on A.
    Restricted,
}

/// Which parameter to evaluate, with its configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParameterSpec {
    CdfSquare {
        grid: QuadratureGrid,
    },
    Tsm,
    Vte,
    Att,
    TransportSde {
        a: usize,
        a_star: usize,
        s_star: usize,
        intervention: Intervention,
        model: TransportModel,
    },
    LongitudinalMean {
        /// One table per treatment node, rows indexed by the configuration of
        /// all earlier variables.
        g_star: Vec<Vec<Vec<f64>>>,
    },
    DynamicSurvival {
        /// Treatment level index for each configuration of the W block.
        rule: Vec<usize>,
        t0: usize,
    },
}

impl ParameterSpec {
    /// Short label used in reports.
    pub fn label(&self) -> String {
        match self {
            ParameterSpec::CdfSquare { .. } => "cdf_square".into(),
            ParameterSpec::Tsm => "tsm".into(),
            ParameterSpec::Vte => "vte".into(),
            ParameterSpec::Att => "att".into(),
            ParameterSpec::TransportSde {
                intervention,
                model,
                ..
            } => {
                let i = match intervention {
                    Intervention::Supplied(_) => "supplied",
                    Intervention::FromP => "from_p",
                };
                let m = match model {
                    TransportModel::Unrestricted => "unrestricted",
                    TransportModel::Restricted => "restricted",
                };
                format!("transport_{i}_{m}")
            }
            ParameterSpec::LongitudinalMean { g_star } => {
                format!("longitudinal_k{}", g_star.len().saturating_sub(1))
            }
            ParameterSpec::DynamicSurvival { t0, .. } => format!("survival_t{t0}"),
        }
    }

    /// Checks the configuration against the distribution's layout.
    pub fn validate(&self, p: &FactorizedDistribution) -> Result<()> {
        match self {
            ParameterSpec::CdfSquare { .. } => cdf::check_univariate(p),
            ParameterSpec::Tsm | ParameterSpec::Vte | ParameterSpec::Att => {
                PointLayout::new(p).map(|_| ())
            }
            ParameterSpec::TransportSde { .. } => TransportNuisance::new(p, self, true).map(|_| ()),
            ParameterSpec::LongitudinalMean { g_star } => {
                LongitudinalLayout::new(p, g_star).map(|_| ())
            }
            ParameterSpec::DynamicSurvival { rule, t0 } => {
                SurvivalLayout::new(p, rule, *t0).map(|_| ())
            }
        }
    }
}

/// `Psi(P)` for any parameter.
pub fn psi(p: &FactorizedDistribution, spec: &ParameterSpec) -> Result<f64> {
    match spec {
        ParameterSpec::CdfSquare { grid } => psi_cdf_square(p, grid),
        ParameterSpec::Tsm => psi_tsm(p),
        ParameterSpec::Vte => psi_vte(p),
        ParameterSpec::Att => psi_att(p),
        ParameterSpec::TransportSde { .. } => psi_transport_sde(p, spec),
        ParameterSpec::LongitudinalMean { g_star } => psi_longitudinal(p, g_star),
        ParameterSpec::DynamicSurvival { rule, t0 } => psi_survival(p, rule, *t0),
    }
}

pub(crate) fn require_binary(p: &FactorizedDistribution, var: usize) -> Result<()> {
    let v = p.variable(var);
    if v.levels != [0.0, 1.0] {
        return Err(Error::domain(format!(
            "variable '{}' must be binary with levels [0, 1]",
            v.name
        )));
    }
    Ok(())
}

pub(crate) fn check_rows(rows: &[Vec<f64>], n_rows: usize, width: usize, what: &str) -> Result<()> {
    if rows.len() != n_rows {
        return Err(Error::invalid(format!(
            "{what} has {} rows, expected {n_rows}",
            rows.len()
        )));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(Error::invalid(format!(
                "row {i} of {what} has {} entries, expected {width}",
                row.len()
            )));
        }
        if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid(format!(
                "row {i} of {what} has an entry outside [0, 1]"
            )));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::invalid(format!("row {i} of {what} sums to {s}")));
        }
    }
    Ok(())
}

/// Mean of the outcome variable `y` given the configuration `parent` of all
/// earlier variables, taken directly from the factor table.
pub(crate) fn factor_mean(p: &FactorizedDistribution, y: usize, parent: usize) -> f64 {
    p.factor(y)
        .row(parent)
        .iter()
        .zip(&p.variable(y).levels)
        .map(|(q, v)| q * v)
        .sum()
}
