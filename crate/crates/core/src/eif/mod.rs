//! Closed-form efficient influence functions as exact tables.

mod cdf;
mod longitudinal;
mod parametric;
mod point;
mod restricted;
mod survival;
mod transport;

use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use parametric::{eif_parametric_1d, fisher_information, ParametricFamily1D};
pub use restricted::{project_to_restricted, Restriction};

use crate::dist::FactorizedDistribution;
use crate::error::Result;
use crate::params::ParameterSpec;

/// One named piece of an influence function living in the tangent space of
/// the factors `factors`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Component {
    pub name: String,
    pub factors: Range<usize>,
    pub values: Vec<f64>,
}

/// `D*(P)` with its orthogonal components.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfluenceFunction {
    pub parameter: ParameterSpec,
    /// `Psi(P)` at the distribution the table was built for.
    pub psi: f64,
    pub total: Vec<f64>,
    pub components: Vec<Component>,
    /// Restricted transport only: largest gap on the support between the
    /// closed-form restricted components and the generic projections of the
    /// unrestricted ones.
    pub restricted_discrepancy: Option<f64>,
}

impl InfluenceFunction {
    pub(crate) fn from_components(
        parameter: ParameterSpec,
        psi: f64,
        components: Vec<Component>,
    ) -> Self {
        let n = components.first().map_or(0, |c| c.values.len());
        let mut total = vec![0.0; n];
        for c in &components {
            for (t, v) in total.iter_mut().zip(&c.values) {
                *t += v;
            }
        }
        Self {
            parameter,
            psi,
            total,
            components,
            restricted_discrepancy: None,
        }
    }

    pub fn component(&self, name: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.name == name)
    }

    /// `Var_P(D*)`.
    pub fn variance(&self, p: &FactorizedDistribution) -> f64 {
        let m = p.expectation(&self.total);
        self.total
            .iter()
            .zip(p.joint())
            .map(|(v, q)| q * (v - m) * (v - m))
            .sum()
    }

    /// CSV with one row per outcome point: levels, `p`, total, components.
    pub fn to_csv(&self, p: &FactorizedDistribution) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = p.variables().iter().map(|v| v.name.clone()).collect();
        header.push("p".into());
        header.push("total".into());
        header.extend(self.components.iter().map(|c| format!("D_{}", c.name)));
        w.write_record(&header)?;
        for o in 0..p.num_points() {
            let mut rec: Vec<String> = (0..p.num_variables())
                .map(|v| fmt_f64(p.level_value(v, o)))
                .collect();
            rec.push(fmt_f64(p.joint()[o]));
            rec.push(fmt_f64(self.total[o]));
            rec.extend(self.components.iter().map(|c| fmt_f64(c.values[o])));
            w.write_record(&rec)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Shortest round-trip formatting for report files.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Single-term formula defects used to show that the checks catch bugs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corruption {
    /// Treatment-specific mean without the `Qbar(1, W) - Psi` term.
    TsmDropPlugin,
    /// Treatment-effect variance with the residual term missing its factor 2.
    VteDropFactorTwo,
    /// Effect among the treated without the control-arm weight.
    AttDropControlWeight,
    /// Survival with a plus sign in front of the hazard sum.
    SurvivalSignFlip,
    /// Transport without its Z component.
    TransportDropZ,
}

impl Corruption {
    pub const ALL: [Corruption; 5] = [
        Corruption::TsmDropPlugin,
        Corruption::VteDropFactorTwo,
        Corruption::AttDropControlWeight,
        Corruption::SurvivalSignFlip,
        Corruption::TransportDropZ,
    ];

    /// Whether this defect changes the influence function of `spec`.
    pub fn applies_to(&self, spec: &ParameterSpec) -> bool {
        matches!(
            (self, spec),
            (Corruption::TsmDropPlugin, ParameterSpec::Tsm)
                | (Corruption::VteDropFactorTwo, ParameterSpec::Vte)
                | (Corruption::AttDropControlWeight, ParameterSpec::Att)
                | (
                    Corruption::SurvivalSignFlip,
                    ParameterSpec::DynamicSurvival { .. }
                )
                | (
                    Corruption::TransportDropZ,
                    ParameterSpec::TransportSde { .. }
                )
        )
    }
}

/// `D*(P)` for `spec`.
pub fn influence(p: &FactorizedDistribution, spec: &ParameterSpec) -> Result<InfluenceFunction> {
    influence_with(p, spec, None)
}

/// `D*(P)` with an optional injected defect.
pub fn influence_with(
    p: &FactorizedDistribution,
    spec: &ParameterSpec,
    corruption: Option<Corruption>,
) -> Result<InfluenceFunction> {
    match spec {
        ParameterSpec::CdfSquare { grid } => cdf::eif_cdf_square(p, grid),
        ParameterSpec::Tsm => point::eif_tsm(p, corruption),
        ParameterSpec::Vte => point::eif_vte(p, corruption),
        ParameterSpec::Att => point::eif_att(p, corruption),
        ParameterSpec::TransportSde { .. } => transport::eif_transport_sde(p, spec, corruption),
        ParameterSpec::LongitudinalMean { g_star } => longitudinal::eif_longitudinal(p, g_star),
        ParameterSpec::DynamicSurvival { rule, t0 } => {
            survival::eif_survival(p, rule, *t0, corruption)
        }
    }
}

pub use cdf::eif_cdf_square;
pub use longitudinal::eif_longitudinal;

pub fn eif_tsm(p: &FactorizedDistribution) -> Result<InfluenceFunction> {
    point::eif_tsm(p, None)
}

pub fn eif_vte(p: &FactorizedDistribution) -> Result<InfluenceFunction> {
    point::eif_vte(p, None)
}

pub fn eif_att(p: &FactorizedDistribution) -> Result<InfluenceFunction> {
    point::eif_att(p, None)
}

pub fn eif_transport_sde(
    p: &FactorizedDistribution,
    spec: &ParameterSpec,
) -> Result<InfluenceFunction> {
    transport::eif_transport_sde(p, spec, None)
}

pub fn eif_survival(
    p: &FactorizedDistribution,
    rule: &[usize],
    t0: usize,
) -> Result<InfluenceFunction> {
    survival::eif_survival(p, rule, t0, None)
}
