//! Numerical oracles for influence functions: central-difference pathwise
//! derivatives, the Riesz identity, tangent-space checks, and a seeded suite
//! that runs them over every parameter family.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{FactorizedDistribution, VariableSpec};
use crate::eif::{
    eif_parametric_1d, eif_tsm, fisher_information, influence_with, Component, Corruption,
    InfluenceFunction, ParametricFamily1D,
};
use crate::error::{Error, Result};
use crate::generate::{
    cdf_instance, derive_seed, longitudinal_distribution, longitudinal_instance,
    point_distribution, static_g_star, survival_instance, transport_instance,
};
use crate::params::{psi, psi_tsm, ParameterSpec, PointNuisance, SurvivalLayout, TransportModel};
use crate::tangent::{
    decompose_score, inner_product, perturb_joint, project_onto_factor,
    project_onto_restricted_factor, random_score, ScoreFunction, DEFAULT_SUP_BOUND,
};

pub const DEFAULT_H: f64 = 1e-4;
/// Base step of the halving diagnostic. Large enough that truncation error
/// dominates rounding for every nonlinear parameter.
pub const DEFAULT_ORDER_H: f64 = 1e-3;

/// Central difference `(Psi(P_h) - Psi(P_-h)) / 2h` along `(1 + eps S) p`.
pub fn pathwise_derivative<F>(
    p: &FactorizedDistribution,
    psi: F,
    s: &ScoreFunction,
    h: f64,
) -> Result<f64>
where
    F: Fn(&FactorizedDistribution) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(Error::domain(format!("step h = {h} must be positive")));
    }
    let plus = perturb_joint(p, s, h)
        .map_err(|e| Error::precondition(format!("step h = {h} too large for this score: {e}")))?;
    let minus = perturb_joint(p, s, -h)
        .map_err(|e| Error::precondition(format!("step h = {h} too large for this score: {e}")))?;
    Ok((psi(&plus)? - psi(&minus)?) / (2.0 * h))
}

/// Both sides of the Riesz identity for one score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RieszComparison {
    pub derivative: f64,
    pub inner_product: f64,
    pub abs_error: f64,
    pub rel_error: f64,
}

impl RieszComparison {
    fn new(derivative: f64, inner_product: f64) -> Self {
        let abs_error = (derivative - inner_product).abs();
        let rel_error = abs_error / inner_product.abs().max(1e-12);
        Self {
            derivative,
            inner_product,
            abs_error,
            rel_error,
        }
    }
}

/// Compares the finite-difference derivative of `spec` with `<d, S>`.
pub fn riesz_compare(
    p: &FactorizedDistribution,
    spec: &ParameterSpec,
    d: &[f64],
    s: &ScoreFunction,
    h: f64,
) -> Result<RieszComparison> {
    let fd = pathwise_derivative(p, |q| psi(q, spec), s, h)?;
    Ok(RieszComparison::new(fd, inner_product(p, d, s.values())))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RieszCheckReport {
    pub parameter: ParameterSpec,
    pub seed: u64,
    pub score_count: usize,
    pub h: f64,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    pub pass: bool,
}

/// Riesz check of the closed-form `D*` for `spec` against the given scores.
pub fn riesz_check(
    p: &FactorizedDistribution,
    spec: &ParameterSpec,
    scores: &[ScoreFunction],
    h: f64,
    tolerance: f64,
    seed: u64,
) -> Result<RieszCheckReport> {
    let d = influence_with(p, spec, None)?;
    let mut max_abs: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    for s in scores {
        let c = riesz_compare(p, spec, &d.total, s, h)?;
        max_abs = max_abs.max(c.abs_error);
        max_rel = max_rel.max(c.rel_error);
    }
    Ok(RieszCheckReport {
        parameter: spec.clone(),
        seed,
        score_count: scores.len(),
        h,
        max_abs_error: max_abs,
        max_rel_error: max_rel,
        pass: max_abs <= tolerance,
    })
}

/// `|E_P D|`.
pub fn mean_zero_check(p: &FactorizedDistribution, d: &[f64]) -> f64 {
    p.expectation(d).abs()
}

/// Gram matrix of the components under `L2(P)`.
pub fn orthogonality_check(p: &FactorizedDistribution, components: &[Component]) -> Vec<Vec<f64>> {
    components
        .iter()
        .map(|a| {
            components
                .iter()
                .map(|b| inner_product(p, &a.values, &b.values))
                .collect()
        })
        .collect()
}

fn max_off_diagonal(gram: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, row) in gram.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if i != j {
                worst = worst.max(v.abs());
            }
        }
    }
    worst
}

/// Largest gap on the support between `S` and the sum of its factor
/// projections.
pub fn decomposition_check(p: &FactorizedDistribution, s: &[f64]) -> f64 {
    let parts = decompose_score(p, s);
    let mean = p.expectation(s);
    (0..p.num_points())
        .filter(|&o| p.joint()[o] > 0.0)
        .map(|o| {
            let sum: f64 = parts.iter().map(|c| c.values()[o]).sum();
            (sum - (s[o] - mean)).abs()
        })
        .fold(0.0, f64::max)
}

/// Largest pointwise gap between the total and the sum of the components.
pub fn component_sum_error(d: &InfluenceFunction) -> f64 {
    (0..d.total.len())
        .map(|o| (d.components.iter().map(|c| c.values[o]).sum::<f64>() - d.total[o]).abs())
        .fold(0.0, f64::max)
}

/// How far a component is from its declared tangent subspace: the larger of
/// its conditional mean given the variables before its factors, and its
/// dependence on variables after them (both on the support). Divided by
/// `max(1, sup |c|)` so that large weights near the positivity floor do not
/// turn rounding into a failure.
pub fn tangent_membership_error(p: &FactorizedDistribution, c: &Component) -> f64 {
    let before = p.prefix_conditional_mean(&c.values, c.factors.start);
    let after = p.prefix_conditional_mean_table(&c.values, c.factors.end);
    let centered = before.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let support = || (0..p.num_points()).filter(|&o| p.joint()[o] > 0.0);
    let measurable = support()
        .map(|o| (after[o] - c.values[o]).abs())
        .fold(0.0, f64::max);
    let scale = support().map(|o| c.values[o].abs()).fold(1.0, f64::max);
    centered.max(measurable) / scale
}

/// `A / g(1 | W) Y - Psi`, the inverse-weighting gradient of the
/// treatment-specific mean when `g` is known.
pub fn ipw_influence(p: &FactorizedDistribution) -> Result<Vec<f64>> {
    let nu = PointNuisance::new(p)?;
    nu.require_positivity(p.positivity_floor(), &[1])?;
    let l = nu.layout;
    let psi = psi_tsm(p)?;
    Ok(p.tabulate(|o| {
        let w = l.w(p, o);
        let a = l.treatment(p, o) as f64;
        a / nu.g1[w] * p.level_value(l.y, o) - psi
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EfficiencyBound {
    pub var_ipw: f64,
    pub var_eif: f64,
    /// `var_ipw - var_eif`.
    pub margin: f64,
}

pub fn efficiency_bound_check(p: &FactorizedDistribution) -> Result<EfficiencyBound> {
    let ipw = ipw_influence(p)?;
    let d = eif_tsm(p)?;
    let m = p.expectation(&ipw);
    let var_ipw: f64 = ipw
        .iter()
        .zip(p.joint())
        .map(|(v, q)| q * (v - m) * (v - m))
        .sum();
    let var_eif = d.variance(p);
    Ok(EfficiencyBound {
        var_ipw,
        var_eif,
        margin: var_ipw - var_eif,
    })
}

/// Projection of `S` onto the tangent space of the W and Y factors of a
/// `(W, A, Y)` layout.
pub fn project_outside_treatment(
    p: &FactorizedDistribution,
    s: &ScoreFunction,
) -> Result<ScoreFunction> {
    let l = crate::params::PointLayout::new(p)?;
    let parts = decompose_score(p, s.values());
    let mut out = vec![0.0; p.num_points()];
    for (i, part) in parts.iter().enumerate() {
        if i != l.a {
            out.iter_mut().zip(part.values()).for_each(|(o, v)| *o += v);
        }
    }
    Ok(ScoreFunction::from_values(out))
}

/// Largest pointwise gap between the longitudinal influence function with
/// `K = 0` and a point-mass intervention on treatment, and the
/// treatment-specific mean on the same distribution.
pub fn longitudinal_tsm_cross_check(p: &FactorizedDistribution) -> Result<f64> {
    let spec = ParameterSpec::LongitudinalMean {
        g_star: static_g_star(p, 1),
    };
    let long = influence_with(p, &spec, None)?;
    let tsm = eif_tsm(p)?;
    let gap = long
        .total
        .iter()
        .zip(&tsm.total)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(gap.max((long.psi - tsm.psi).abs()))
}

/// Largest gap on the support between the survival influence function at
/// `t0 = 1` and the treatment-specific mean of the reduced data
/// `(W, I(A = d(W)), 1 - dN(1))`.
pub fn survival_tsm_cross_check(p: &FactorizedDistribution, rule: &[usize]) -> Result<f64> {
    let layout = SurvivalLayout::new(p, rule, 1)?;
    let n_w = layout.n_w;
    let reduce = |o: usize| {
        let w = layout.w(p, o);
        let follows = usize::from(p.level_index(layout.a, o) == rule[w]);
        let event = p.level_index(layout.t, o) == 1 && p.level_index(layout.delta, o) == 1;
        (w * 2 + follows) * 2 + usize::from(!event)
    };
    let mut joint = vec![0.0; n_w * 4];
    for o in 0..p.num_points() {
        joint[reduce(o)] += p.joint()[o];
    }
    let w_spec = if layout.a == 1 {
        p.variable(0).clone()
    } else {
        VariableSpec::new("W", (0..n_w).map(|i| i as f64).collect(), "confounder")
    };
    let vars = vec![
        w_spec,
        VariableSpec::binary("A", "treatment"),
        VariableSpec::binary("Y", "outcome"),
    ];
    let q = FactorizedDistribution::refactorize(&joint, vars, p.positivity_floor())?;
    let reduced = eif_tsm(&q)?;
    let full = influence_with(
        p,
        &ParameterSpec::DynamicSurvival {
            rule: rule.to_vec(),
            t0: 1,
        },
        None,
    )?;
    let gap = (0..p.num_points())
        .filter(|&o| p.joint()[o] > 0.0)
        .map(|o| (full.total[o] - reduced.total[reduce(o)]).abs())
        .fold(0.0, f64::max);
    Ok(gap.max((full.psi - reduced.psi).abs()))
}

/// The parameter families exercised by the suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    CdfSquare,
    Tsm,
    Vte,
    Att,
    TransportSupplied,
    TransportSuppliedRestricted,
    TransportFromP,
    TransportFromPRestricted,
    LongitudinalK0,
    LongitudinalK1,
    LongitudinalK2,
    SurvivalT1,
    SurvivalT2,
    SurvivalT3,
}

impl Family {
    pub const ALL: [Family; 14] = [
        Family::CdfSquare,
        Family::Tsm,
        Family::Vte,
        Family::Att,
        Family::TransportSupplied,
        Family::TransportSuppliedRestricted,
        Family::TransportFromP,
        Family::TransportFromPRestricted,
        Family::LongitudinalK0,
        Family::LongitudinalK1,
        Family::LongitudinalK2,
        Family::SurvivalT1,
        Family::SurvivalT2,
        Family::SurvivalT3,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Family::CdfSquare => "cdf_square",
            Family::Tsm => "tsm",
            Family::Vte => "vte",
            Family::Att => "att",
            Family::TransportSupplied => "transport_supplied",
            Family::TransportSuppliedRestricted => "transport_supplied_restricted",
            Family::TransportFromP => "transport_from_p",
            Family::TransportFromPRestricted => "transport_from_p_restricted",
            Family::LongitudinalK0 => "longitudinal_k0",
            Family::LongitudinalK1 => "longitudinal_k1",
            Family::LongitudinalK2 => "longitudinal_k2",
            Family::SurvivalT1 => "survival_t1",
            Family::SurvivalT2 => "survival_t2",
            Family::SurvivalT3 => "survival_t3",
        }
    }

    fn index(&self) -> u64 {
        Family::ALL.iter().position(|f| f == self).expect("listed") as u64
    }

    /// Seeded random distribution and parameter for this family.
    pub fn instance(&self, seed: u64) -> (FactorizedDistribution, ParameterSpec) {
        let transport = |fixed, model| transport_instance(seed, fixed, model);
        match self {
            Family::CdfSquare => cdf_instance(seed),
            Family::Tsm | Family::Vte | Family::Att => {
                let p = point_distribution(seed, 2 + (derive_seed(seed, 0) % 3) as usize);
                let spec = match self {
                    Family::Tsm => ParameterSpec::Tsm,
                    Family::Vte => ParameterSpec::Vte,
                    _ => ParameterSpec::Att,
                };
                (p, spec)
            }
            Family::TransportSupplied => transport(false, TransportModel::Unrestricted),
            Family::TransportSuppliedRestricted => transport(false, TransportModel::Restricted),
            Family::TransportFromP => transport(true, TransportModel::Unrestricted),
            Family::TransportFromPRestricted => transport(true, TransportModel::Restricted),
            Family::LongitudinalK0 => longitudinal_instance(seed, 0),
            Family::LongitudinalK1 => longitudinal_instance(seed, 1),
            Family::LongitudinalK2 => longitudinal_instance(seed, 2),
            Family::SurvivalT1 => survival_instance(seed, 1, true),
            Family::SurvivalT2 => survival_instance(seed, 2, true),
            Family::SurvivalT3 => survival_instance(seed, 3, true),
        }
    }
}

/// Projects a score onto the model's tangent space. Only the restricted
/// transport model is smaller than the nonparametric one: there the M and Y
/// factors may not depend on A.
pub fn model_score(
    p: &FactorizedDistribution,
    spec: &ParameterSpec,
    s: &ScoreFunction,
) -> ScoreFunction {
    let restricted = matches!(
        spec,
        ParameterSpec::TransportSde {
            model: TransportModel::Restricted,
            ..
        }
    );
    if !restricted {
        return s.clone();
    }
    let d = p.num_variables();
    let (a, m, y) = (d - 4, d - 2, d - 1);
    let mut out = vec![0.0; p.num_points()];
    for i in 0..d {
        let part = if i == m || i == y {
            project_onto_restricted_factor(p, s.values(), i, &[a])
        } else {
            project_onto_factor(p, s.values(), i)
        };
        out.iter_mut().zip(part.values()).for_each(|(o, v)| *o += v);
    }
    ScoreFunction::from_values(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub riesz: f64,
    pub mean_zero: f64,
    pub component_sum: f64,
    pub orthogonality: f64,
    pub tangent: f64,
    pub decomposition: f64,
    pub restricted: f64,
    pub cross_check: f64,
    pub efficiency: f64,
    pub parametric: f64,
    /// Required shrink factor of the Riesz error when `h` is halved.
    pub order_ratio: f64,
    /// Errors below this are treated as rounding in the halving diagnostic.
    pub order_floor: f64,
    /// Minimum share of scores on which a corrupted `D*` must be caught.
    pub detection_rate: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            riesz: 1e-6,
            mean_zero: 1e-10,
            component_sum: 1e-12,
            orthogonality: 1e-12,
            tangent: 1e-12,
            decomposition: 1e-12,
            restricted: 1e-10,
            cross_check: 1e-12,
            efficiency: 1e-12,
            parametric: 1e-10,
            order_ratio: 0.3,
            order_floor: 1e-12,
            detection_rate: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSuiteConfig {
    pub master_seed: u64,
    pub n_distributions: usize,
    pub n_scores_per_distribution: usize,
    pub h: f64,
    pub tolerances: Tolerances,
    /// Families to run; all of them when absent.
    pub families: Option<Vec<Family>>,
    /// Step of the halving diagnostic and the number of cases per family.
    pub order_h: f64,
    pub order_cases: usize,
    /// Distributions per family used for the injected-defect controls.
    pub negative_control_cases: usize,
    pub sup_bound: f64,
    /// Test hook: replaces `D*` in the main Riesz checks by a defective one.
    pub corrupt: Option<Corruption>,
}

impl Default for CheckSuiteConfig {
    fn default() -> Self {
        Self {
            master_seed: 20240607,
            n_distributions: 100,
            n_scores_per_distribution: 20,
            h: DEFAULT_H,
            tolerances: Tolerances::default(),
            families: None,
            order_h: DEFAULT_ORDER_H,
            order_cases: 20,
            negative_control_cases: 10,
            sup_bound: DEFAULT_SUP_BOUND,
            corrupt: None,
        }
    }
}

impl CheckSuiteConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, h) in [("h", self.h), ("order_h", self.order_h)] {
            if !(h > 0.0 && h <= 1e-2) {
                return Err(Error::invalid(format!(
                    "{name} = {h} must lie in (0, 1e-2]"
                )));
            }
        }
        if self.n_scores_per_distribution == 0 {
            return Err(Error::invalid(
                "n_scores_per_distribution must be at least 1",
            ));
        }
        if !(self.sup_bound > 0.0) {
            return Err(Error::invalid("sup_bound must be positive"));
        }
        Ok(())
    }

    fn families(&self) -> Vec<Family> {
        self.families
            .clone()
            .unwrap_or_else(|| Family::ALL.to_vec())
    }
}

/// One row of `checks.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub family: String,
    pub check: String,
    pub case: String,
    pub value: f64,
    pub tolerance: f64,
    /// `true` when the value must not exceed the tolerance, `false` when it
    /// must not fall below it.
    pub upper: bool,
    pub pass: bool,
    pub detail: String,
}

impl CheckRecord {
    fn upper(family: &str, check: &str, case: impl ToString, value: f64, tolerance: f64) -> Self {
        Self {
            family: family.into(),
            check: check.into(),
            case: case.to_string(),
            value,
            tolerance,
            upper: true,
            pass: value <= tolerance,
            detail: String::new(),
        }
    }

    fn lower(family: &str, check: &str, case: impl ToString, value: f64, tolerance: f64) -> Self {
        Self {
            upper: false,
            pass: value >= tolerance,
            ..Self::upper(family, check, case, value, tolerance)
        }
    }

    fn error(family: &str, check: &str, case: impl ToString, err: &Error) -> Self {
        Self {
            value: f64::NAN,
            pass: false,
            detail: err.to_string(),
            ..Self::upper(family, check, case, f64::NAN, 0.0)
        }
    }
}

/// Per (family, check) aggregate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckSummary {
    pub family: String,
    pub check: String,
    pub count: usize,
    pub failed: usize,
    /// Largest value for upper-bound checks, smallest for lower-bound ones.
    pub worst: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub config: CheckSuiteConfig,
    pub pass: bool,
    pub n_checks: usize,
    pub n_failed: usize,
    pub summaries: Vec<CheckSummary>,
    pub riesz: Vec<RieszCheckReport>,
    pub checks: Vec<CheckRecord>,
}

impl VerificationReport {
    fn from_parts(
        config: CheckSuiteConfig,
        riesz: Vec<RieszCheckReport>,
        checks: Vec<CheckRecord>,
    ) -> Self {
        let mut summaries: Vec<CheckSummary> = Vec::new();
        for r in &checks {
            let idx = match summaries
                .iter()
                .position(|s| s.family == r.family && s.check == r.check)
            {
                Some(i) => i,
                None => {
                    summaries.push(CheckSummary {
                        family: r.family.clone(),
                        check: r.check.clone(),
                        count: 0,
                        failed: 0,
                        worst: if r.upper {
                            f64::NEG_INFINITY
                        } else {
                            f64::INFINITY
                        },
                        tolerance: r.tolerance,
                        pass: true,
                    });
                    summaries.len() - 1
                }
            };
            let s = &mut summaries[idx];
            s.count += 1;
            if !r.pass {
                s.failed += 1;
                s.pass = false;
            }
            if r.value.is_nan() {
                s.worst = f64::NAN;
            } else if !s.worst.is_nan() {
                s.worst = if r.upper {
                    s.worst.max(r.value)
                } else {
                    s.worst.min(r.value)
                };
            }
            if r.upper {
                s.tolerance = s.tolerance.max(r.tolerance);
            }
        }
        let n_failed = checks.iter().filter(|c| !c.pass).count();
        Self {
            config,
            pass: n_failed == 0,
            n_checks: checks.len(),
            n_failed,
            summaries,
            riesz,
            checks,
        }
    }

    /// Appends the riesz reports and checks of `other`, keeping this
    /// report's configuration.
    pub fn merge(self, other: VerificationReport) -> Self {
        let mut riesz = self.riesz;
        riesz.extend(other.riesz);
        let mut checks = self.checks;
        checks.extend(other.checks);
        Self::from_parts(self.config, riesz, checks)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "family",
            "check",
            "case",
            "value",
            "tolerance",
            "bound",
            "pass",
            "detail",
        ])?;
        for c in &self.checks {
            w.write_record([
                c.family.as_str(),
                c.check.as_str(),
                c.case.as_str(),
                &crate::eif::fmt_f64(c.value),
                &crate::eif::fmt_f64(c.tolerance),
                if c.upper { "max" } else { "min" },
                if c.pass { "true" } else { "false" },
                c.detail.as_str(),
            ])?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn summary(&self, family: &str, check: &str) -> Option<&CheckSummary> {
        self.summaries
            .iter()
            .find(|s| s.family == family && s.check == check)
    }

    /// Summaries for one check across families.
    pub fn summaries_for(&self, check: &str) -> Vec<&CheckSummary> {
        self.summaries.iter().filter(|s| s.check == check).collect()
    }
}

/// Everything produced for one seeded distribution of one family.
struct CaseResult {
    riesz: Option<RieszCheckReport>,
    records: Vec<CheckRecord>,
    /// (corruption, detected, total)
    detections: Vec<(Corruption, usize, usize)>,
}

fn run_case(config: &CheckSuiteConfig, family: Family, i: usize) -> CaseResult {
    let seed = derive_seed(
        derive_seed(config.master_seed, family.index() + 1),
        i as u64,
    );
    let (p, spec) = family.instance(seed);
    check_case(config, family.name(), seed, &p, &spec, i)
}

/// All per-distribution checks. `i` is the case number within its family;
/// the halving and defect diagnostics only run on the first few cases.
fn check_case(
    config: &CheckSuiteConfig,
    name: &str,
    seed: u64,
    p: &FactorizedDistribution,
    spec: &ParameterSpec,
    i: usize,
) -> CaseResult {
    let (p, spec) = (p, spec.clone());
    let tol = &config.tolerances;
    let mut out = CaseResult {
        riesz: None,
        records: Vec::new(),
        detections: Vec::new(),
    };
    let fail = |out: &mut CaseResult, check: &str, e: &Error| {
        out.records.push(CheckRecord::error(name, check, seed, e));
    };

    let main_corruption = config.corrupt.filter(|c| c.applies_to(&spec));
    let d = match influence_with(p, &spec, main_corruption) {
        Ok(d) => d,
        Err(e) => {
            fail(&mut out, "riesz", &e);
            return out;
        }
    };
    let mut scores = Vec::with_capacity(config.n_scores_per_distribution);
    for j in 0..config.n_scores_per_distribution {
        match random_score(p, derive_seed(seed, 1000 + j as u64), config.sup_bound) {
            Ok(s) => scores.push(model_score(p, &spec, &s)),
            Err(e) => {
                fail(&mut out, "riesz", &e);
                return out;
            }
        }
    }

    // Riesz identity, reusing each derivative for the defect controls
    let controls: Vec<(Corruption, Vec<f64>)> = if i < config.negative_control_cases {
        Corruption::ALL
            .iter()
            .filter(|c| c.applies_to(&spec))
            .filter_map(|c| {
                influence_with(p, &spec, Some(*c))
                    .ok()
                    .map(|dc| (*c, dc.total))
            })
            .collect()
    } else {
        Vec::new()
    };
    let mut detected = vec![0usize; controls.len()];
    let mut max_abs: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    for s in &scores {
        let fd = match pathwise_derivative(p, |q| psi(q, &spec), s, config.h) {
            Ok(v) => v,
            Err(e) => {
                fail(&mut out, "riesz", &e);
                return out;
            }
        };
        let c = RieszComparison::new(fd, inner_product(p, &d.total, s.values()));
        max_abs = max_abs.max(c.abs_error);
        max_rel = max_rel.max(c.rel_error);
        for (k, (_, dc)) in controls.iter().enumerate() {
            if (fd - inner_product(p, dc, s.values())).abs() > tol.riesz {
                detected[k] += 1;
            }
        }
    }
    out.detections = controls
        .iter()
        .zip(&detected)
        .map(|((c, _), n)| (*c, *n, scores.len()))
        .collect();
    out.records
        .push(CheckRecord::upper(name, "riesz", seed, max_abs, tol.riesz));
    out.riesz = Some(RieszCheckReport {
        parameter: spec.clone(),
        seed,
        score_count: scores.len(),
        h: config.h,
        max_abs_error: max_abs,
        max_rel_error: max_rel,
        pass: max_abs <= tol.riesz,
    });

    out.records.push(CheckRecord::upper(
        name,
        "mean_zero",
        seed,
        mean_zero_check(p, &d.total),
        tol.mean_zero,
    ));
    out.records.push(CheckRecord::upper(
        name,
        "component_sum",
        seed,
        component_sum_error(&d),
        tol.component_sum,
    ));
    let gram = orthogonality_check(p, &d.components);
    out.records.push(CheckRecord::upper(
        name,
        "orthogonality",
        seed,
        max_off_diagonal(&gram),
        tol.orthogonality,
    ));
    let membership = d
        .components
        .iter()
        .map(|c| tangent_membership_error(p, c))
        .fold(0.0, f64::max);
    out.records.push(CheckRecord::upper(
        name,
        "tangent",
        seed,
        membership,
        tol.tangent,
    ));
    out.records.push(CheckRecord::upper(
        name,
        "decomposition",
        seed,
        decomposition_check(p, scores[0].values()),
        tol.decomposition,
    ));
    if matches!(
        spec,
        ParameterSpec::TransportSde {
            model: TransportModel::Restricted,
            ..
        }
    ) {
        let gap = d.restricted_discrepancy.unwrap_or(f64::NAN);
        out.records.push(CheckRecord::upper(
            name,
            "restricted",
            seed,
            gap,
            tol.restricted,
        ));
    }

    if i < config.order_cases {
        let s = &scores[0];
        let halving = || -> Result<(f64, f64)> {
            let ip = inner_product(p, &d.total, s.values());
            let e1 = (pathwise_derivative(p, |q| psi(q, &spec), s, config.order_h)? - ip).abs();
            let e2 =
                (pathwise_derivative(p, |q| psi(q, &spec), s, config.order_h / 2.0)? - ip).abs();
            Ok((e1, e2))
        };
        match halving() {
            Ok((e1, e2)) => {
                let mut r = CheckRecord::upper(
                    name,
                    "order",
                    seed,
                    e2,
                    tol.order_ratio * e1 + tol.order_floor,
                );
                r.detail = format!("error at h = {:e}, h/2: {e1:e}, {e2:e}", config.order_h);
                out.records.push(r);
            }
            Err(e) => fail(&mut out, "order", &e),
        }
    }
    out
}

fn efficiency_records(config: &CheckSuiteConfig, i: usize) -> Vec<CheckRecord> {
    let tol = &config.tolerances;
    let seed = derive_seed(
        derive_seed(config.master_seed, Family::Tsm.index() + 1),
        i as u64,
    );
    let (p, _) = Family::Tsm.instance(seed);
    let mut out = Vec::new();
    let run = || -> Result<(EfficiencyBound, f64)> {
        let bound = efficiency_bound_check(&p)?;
        let ipw = ipw_influence(&p)?;
        let mut worst: f64 = 0.0;
        for j in 0..config.n_scores_per_distribution {
            let raw = random_score(&p, derive_seed(seed, 5000 + j as u64), config.sup_bound)?;
            let s = project_outside_treatment(&p, &raw)?;
            let fd = pathwise_derivative(&p, psi_tsm, &s, config.h)?;
            worst = worst.max((fd - inner_product(&p, &ipw, s.values())).abs());
        }
        Ok((bound, worst))
    };
    match run() {
        Ok((bound, worst)) => {
            let mut r =
                CheckRecord::upper("tsm", "efficiency", seed, -bound.margin, tol.efficiency);
            r.detail = format!(
                "var_ipw = {:e}, var_eif = {:e}",
                bound.var_ipw, bound.var_eif
            );
            out.push(r);
            out.push(CheckRecord::upper(
                "tsm",
                "ipw_riesz",
                seed,
                worst,
                tol.riesz,
            ));
        }
        Err(e) => out.push(CheckRecord::error("tsm", "efficiency", seed, &e)),
    }
    out
}

fn cross_check_records(config: &CheckSuiteConfig, i: usize) -> Vec<CheckRecord> {
    let tol = config.tolerances.cross_check;
    let mut out = Vec::new();
    let seed = derive_seed(derive_seed(config.master_seed, 100), i as u64);
    let p = longitudinal_distribution(seed, 0);
    out.push(match longitudinal_tsm_cross_check(&p) {
        Ok(v) => CheckRecord::upper("longitudinal_k0", "cross_check_tsm", seed, v, tol),
        Err(e) => CheckRecord::error("longitudinal_k0", "cross_check_tsm", seed, &e),
    });
    let seed = derive_seed(derive_seed(config.master_seed, 101), i as u64);
    let (p, spec) = survival_instance(seed, 1, false);
    let ParameterSpec::DynamicSurvival { rule, .. } = spec else {
        unreachable!("survival instance")
    };
    out.push(match survival_tsm_cross_check(&p, &rule) {
        Ok(v) => CheckRecord::upper("survival_t1", "cross_check_tsm", seed, v, tol),
        Err(e) => CheckRecord::error("survival_t1", "cross_check_tsm", seed, &e),
    });
    out
}

/// `|Var(EIF) I(theta) - 1|` for the Bernoulli family on a grid of `theta`.
pub fn parametric_records(tolerance: f64) -> Vec<CheckRecord> {
    let family = ParametricFamily1D::bernoulli();
    (1..=9)
        .map(|k| {
            let theta = k as f64 / 10.0;
            let run = || -> Result<f64> {
                let p = family.density(theta)?;
                let d = eif_parametric_1d(&family, theta)?;
                let var: f64 = p.iter().zip(&d).map(|(q, v)| q * v * v).sum();
                Ok((var * fisher_information(&family, theta)? - 1.0).abs())
            };
            let case = format!("theta={theta}");
            match run() {
                Ok(v) => CheckRecord::upper("bernoulli", "parametric", case, v, tolerance),
                Err(e) => CheckRecord::error("bernoulli", "parametric", case, &e),
            }
        })
        .collect()
}

/// The per-distribution checks of the suite on a single given instance,
/// reported under the family name `label`. Scores are seeded from
/// `config.master_seed`.
pub fn verify_instance(
    p: &FactorizedDistribution,
    spec: &ParameterSpec,
    config: &CheckSuiteConfig,
    label: &str,
) -> Result<VerificationReport> {
    config.validate()?;
    let case = check_case(config, label, config.master_seed, p, spec, 0);
    let mut checks = case.records;
    for (c, hit, total) in case.detections {
        checks.push(detection_record(
            label,
            c,
            hit,
            total,
            config.tolerances.detection_rate,
        )?);
    }
    Ok(VerificationReport::from_parts(
        config.clone(),
        case.riesz.into_iter().collect(),
        checks,
    ))
}

fn detection_record(
    family: &str,
    c: Corruption,
    hit: usize,
    total: usize,
    rate: f64,
) -> Result<CheckRecord> {
    let case = serde_json::to_value(c)?
        .as_str()
        .unwrap_or_default()
        .to_string();
    let mut r = CheckRecord::lower(
        family,
        "negative_control",
        case,
        hit as f64 / total as f64,
        rate,
    );
    r.detail = format!("{hit} of {total} scores flagged");
    Ok(r)
}

/// Runs every check over `n_distributions` seeded instances of each family.
/// The output depends only on the configuration.
pub fn run_suite(config: &CheckSuiteConfig) -> Result<VerificationReport> {
    config.validate()?;
    let families = config.families();
    let tasks: Vec<(Family, usize)> = families
        .iter()
        .flat_map(|f| (0..config.n_distributions).map(move |i| (*f, i)))
        .collect();
    let cases: Vec<CaseResult> = tasks
        .par_iter()
        .map(|(f, i)| run_case(config, *f, *i))
        .collect();

    let mut riesz = Vec::new();
    let mut checks = Vec::new();
    let mut detections: Vec<(Family, Corruption, usize, usize)> = Vec::new();
    for ((family, _), case) in tasks.iter().zip(cases) {
        riesz.extend(case.riesz);
        checks.extend(case.records);
        for (c, hit, total) in case.detections {
            match detections
                .iter_mut()
                .find(|(f, k, _, _)| f == family && *k == c)
            {
                Some(entry) => {
                    entry.2 += hit;
                    entry.3 += total;
                }
                None => detections.push((*family, c, hit, total)),
            }
        }
    }
    for (family, c, hit, total) in detections {
        checks.push(detection_record(
            family.name(),
            c,
            hit,
            total,
            config.tolerances.detection_rate,
        )?);
    }

    if config.n_distributions > 0 {
        if families.contains(&Family::Tsm) {
            let eff: Vec<Vec<CheckRecord>> = (0..config.n_distributions)
                .into_par_iter()
                .map(|i| efficiency_records(config, i))
                .collect();
            checks.extend(eff.into_iter().flatten());
        }
        if families.contains(&Family::LongitudinalK0) || families.contains(&Family::SurvivalT1) {
            let cross: Vec<Vec<CheckRecord>> = (0..config.n_distributions)
                .into_par_iter()
                .map(|i| cross_check_records(config, i))
                .collect();
            checks.extend(cross.into_iter().flatten().filter(|r| {
                (r.family == "longitudinal_k0" && families.contains(&Family::LongitudinalK0))
                    || (r.family == "survival_t1" && families.contains(&Family::SurvivalT1))
            }));
        }
        checks.extend(parametric_records(config.tolerances.parametric));
    }
    Ok(VerificationReport::from_parts(
        config.clone(),
        riesz,
        checks,
    ))
}
