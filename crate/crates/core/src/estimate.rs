//! Sampling, empirical fits, plug-in and one-step estimators, and seeded
//! Monte Carlo studies.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{
    ConditionalFactor, FactorizedDistribution, OutcomePoint, VariableSpec, DEFAULT_POSITIVITY_FLOOR,
};
use crate::eif::{fmt_f64, influence};
use crate::error::{Error, Result};
use crate::generate::{derive_seed, rng};
use crate::params::{psi, ParameterSpec};

pub const DEFAULT_SMOOTHING: f64 = 0.5;
const Z_95: f64 = 1.959_963_984_540_054;

/// i.i.d. observations stored as flat outcome indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    pub variables: Vec<VariableSpec>,
    pub points: Vec<usize>,
    /// Where the rows came from, e.g. the distribution source and seed.
    pub source: String,
    pub seed: Option<u64>,
}

fn sizes(vars: &[VariableSpec]) -> Vec<usize> {
    vars.iter().map(VariableSpec::len).collect()
}

fn decode(mut flat: usize, sizes: &[usize]) -> Vec<usize> {
    let mut out = vec![0; sizes.len()];
    for (slot, &n) in out.iter_mut().zip(sizes).rev() {
        *slot = flat % n;
        flat /= n;
    }
    out
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn rows(&self) -> Vec<OutcomePoint> {
        let s = sizes(&self.variables);
        self.points
            .iter()
            .map(|&f| OutcomePoint(decode(f, &s)))
            .collect()
    }

    /// Builds a dataset holding `count` copies of each listed flat index.
    pub fn from_counts(
        variables: Vec<VariableSpec>,
        counts: &[(usize, usize)],
        source: impl Into<String>,
    ) -> Result<Self> {
        let total: usize = sizes(&variables).iter().product();
        let mut points = Vec::new();
        for &(flat, count) in counts {
            if flat >= total {
                return Err(Error::domain(format!(
                    "outcome index {flat} outside a space of {total} points"
                )));
            }
            points.extend(std::iter::repeat_n(flat, count));
        }
        Ok(Self {
            variables,
            points,
            source: source.into(),
            seed: None,
        })
    }

    /// CSV with one column per variable holding level values.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.variables.iter().map(|v| v.name.as_str()))?;
        let s = sizes(&self.variables);
        for &f in &self.points {
            let levels = decode(f, &s);
            w.write_record(
                levels
                    .iter()
                    .zip(&self.variables)
                    .map(|(l, v)| fmt_f64(v.levels[*l])),
            )?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Reads a CSV whose header names the variables in order and whose cells
    /// are level values.
    pub fn from_csv(text: &str, variables: Vec<VariableSpec>) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers()?.clone();
        let names: Vec<&str> = variables.iter().map(|v| v.name.as_str()).collect();
        if header.iter().collect::<Vec<_>>() != names {
            return Err(Error::invalid(format!(
                "csv header {:?} does not match variables {names:?}",
                header
            )));
        }
        let mut points = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let mut flat = 0;
            for (cell, v) in rec.iter().zip(&variables) {
                let x: f64 = cell.trim().parse().map_err(|_| {
                    Error::invalid(format!("row {}: '{cell}' is not a number", i + 1))
                })?;
                let l = v.levels.iter().position(|&y| y == x).ok_or_else(|| {
                    Error::domain(format!("row {}: {x} is not a level of '{}'", i + 1, v.name))
                })?;
                flat = flat * v.len() + l;
            }
            points.push(flat);
        }
        Ok(Self {
            variables,
            points,
            source: "csv".into(),
            seed: None,
        })
    }
}

/// `n` draws from `p` by sequential inverse-CDF sampling of the factors.
pub fn sample(p: &FactorizedDistribution, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    let mut r = rng(seed);
    let points = (0..n)
        .map(|_| {
            let mut c = 0;
            for k in 0..p.num_variables() {
                let row = p.factor(k).row(c);
                let u: f64 = r.gen();
                let mut acc = 0.0;
                let mut level = None;
                for (l, q) in row.iter().enumerate() {
                    if *q > 0.0 {
                        acc += q;
                        level = Some(l);
                        if u < acc {
                            break;
                        }
                    }
                }
                c = c * row.len() + level.expect("rows have positive mass");
            }
            c
        })
        .collect();
    Ok(Dataset {
        variables: p.variables().to_vec(),
        points,
        source: "sample".into(),
        seed: Some(seed),
    })
}

/// Conditional tables from counts plus `smoothing` per cell. Rows of parent
/// configurations with no data and no smoothing are uniform. With positive
/// smoothing the positivity floor is lowered to the smallest fitted cell when
/// needed, so every fitted conditional probability clears it.
pub fn fit_empirical(
    data: &Dataset,
    variables: &[VariableSpec],
    smoothing: f64,
) -> Result<FactorizedDistribution> {
    if !(smoothing >= 0.0 && smoothing.is_finite()) {
        return Err(Error::invalid(format!(
            "smoothing {smoothing} must be finite and non-negative"
        )));
    }
    if variables != data.variables.as_slice() {
        return Err(Error::invalid(
            "dataset variables do not match the requested variables",
        ));
    }
    let s = sizes(variables);
    let d = s.len();
    // suffix products: number of points sharing a configuration of the first k variables
    let mut suffix = vec![1usize; d + 1];
    for k in (0..d).rev() {
        suffix[k] = suffix[k + 1] * s[k];
    }
    let mut counts: Vec<Vec<f64>> = (0..d)
        .map(|k| vec![0.0; suffix[0] / suffix[k + 1]])
        .collect();
    for &f in &data.points {
        for (k, table) in counts.iter_mut().enumerate() {
            table[f / suffix[k + 1]] += 1.0;
        }
    }
    let mut smallest: f64 = 1.0;
    let factors = counts
        .iter()
        .enumerate()
        .map(|(k, table)| {
            let rows = table
                .chunks(s[k])
                .map(|cells| {
                    let total: f64 = cells.iter().sum::<f64>() + smoothing * s[k] as f64;
                    if total > 0.0 {
                        let row: Vec<f64> = cells.iter().map(|c| (c + smoothing) / total).collect();
                        smallest = row.iter().fold(smallest, |m, v| m.min(*v));
                        row
                    } else {
                        vec![1.0 / s[k] as f64; s[k]]
                    }
                })
                .collect();
            ConditionalFactor::new(k, rows)
        })
        .collect();
    let floor = if smoothing > 0.0 {
        DEFAULT_POSITIVITY_FLOOR.min(smallest)
    } else {
        DEFAULT_POSITIVITY_FLOOR
    };
    FactorizedDistribution::new(variables.to_vec(), factors, floor)
}

pub fn plugin_estimate(p_hat: &FactorizedDistribution, spec: &ParameterSpec) -> Result<f64> {
    psi(p_hat, spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OneStep {
    pub estimate: f64,
    pub se: f64,
    pub plugin: f64,
    /// `(1/n) sum_i D*(P_hat)(O_i)`.
    pub correction: f64,
    /// Set when the standard error is undefined (a single observation).
    pub degenerate: bool,
}

/// `Psi(P_hat) + (1/n) sum_i D*(P_hat)(O_i)` with the sample standard
/// deviation of the influence values over `sqrt(n)` as standard error.
pub fn one_step_estimate(
    p_hat: &FactorizedDistribution,
    data: &Dataset,
    spec: &ParameterSpec,
) -> Result<OneStep> {
    if data.is_empty() {
        return Err(Error::invalid(
            "one-step estimate needs at least one observation",
        ));
    }
    if data.variables.as_slice() != p_hat.variables() {
        return Err(Error::invalid(
            "dataset and distribution have different variables",
        ));
    }
    let d = influence(p_hat, spec)?;
    Ok(one_step_from_table(d.psi, &d.total, data))
}

fn one_step_from_table(plugin: f64, table: &[f64], data: &Dataset) -> OneStep {
    let n = data.len() as f64;
    let values: Vec<f64> = data.points.iter().map(|&f| table[f]).collect();
    let correction = values.iter().sum::<f64>() / n;
    let (se, degenerate) = if data.len() < 2 {
        (0.0, true)
    } else {
        let ss: f64 = values.iter().map(|v| (v - correction).powi(2)).sum();
        ((ss / (n - 1.0)).sqrt() / n.sqrt(), false)
    };
    OneStep {
        estimate: plugin + correction,
        se,
        plugin,
        correction,
        degenerate,
    }
}

/// Which nuisances the estimators use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Nuisance {
    /// Smoothed empirical tables fitted on each replication's sample.
    Empirical { smoothing: f64 },
    /// The true distribution.
    Oracle,
}

impl Default for Nuisance {
    fn default() -> Self {
        Nuisance::Empirical {
            smoothing: DEFAULT_SMOOTHING,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub nuisance: Nuisance,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            replications: 2000,
            seed: 1,
            nuisance: Nuisance::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Replication {
    pub index: usize,
    pub seed: u64,
    pub plugin: f64,
    pub onestep: f64,
    pub se: f64,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MCStudyReport {
    pub parameter: String,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub nuisance: Nuisance,
    pub truth: f64,
    pub mean_plugin: f64,
    pub mean_onestep: f64,
    pub var_onestep: f64,
    /// Monte Carlo standard error of `mean_onestep`.
    pub mc_se_onestep: f64,
    pub mean_se: f64,
    pub coverage_95: f64,
    /// `Var_P(D*(P))`, the efficiency bound for one observation.
    pub var_eif: f64,
    /// `var_onestep / (var_eif / n)`.
    pub variance_ratio: f64,
    pub degenerate_replications: usize,
    pub runs: Vec<Replication>,
}

const CSV_COLUMNS: [&str; 15] = [
    "parameter",
    "nuisance",
    "n",
    "replications",
    "seed",
    "truth",
    "mean_plugin",
    "mean_onestep",
    "var_onestep",
    "mc_se_onestep",
    "mean_se",
    "coverage_95",
    "var_eif",
    "variance_ratio",
    "degenerate_replications",
];

impl MCStudyReport {
    /// Header plus one summary row.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_COLUMNS)?;
        let nuisance = match self.nuisance {
            Nuisance::Empirical { smoothing } => format!("empirical({})", fmt_f64(smoothing)),
            Nuisance::Oracle => "oracle".into(),
        };
        w.write_record([
            self.parameter.clone(),
            nuisance,
            self.n.to_string(),
            self.replications.to_string(),
            self.seed.to_string(),
            fmt_f64(self.truth),
            fmt_f64(self.mean_plugin),
            fmt_f64(self.mean_onestep),
            fmt_f64(self.var_onestep),
            fmt_f64(self.mc_se_onestep),
            fmt_f64(self.mean_se),
            fmt_f64(self.coverage_95),
            fmt_f64(self.var_eif),
            fmt_f64(self.variance_ratio),
            self.degenerate_replications.to_string(),
        ])?;
        let bytes = w
            .into_inner()
            .map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// [`mc_study_with`] with smoothed empirical nuisances.
pub fn mc_study(
    p: &FactorizedDistribution,
    spec: &ParameterSpec,
    n: usize,
    replications: usize,
    seed: u64,
) -> Result<MCStudyReport> {
    mc_study_with(
        p,
        spec,
        &StudyConfig {
            n,
            replications,
            seed,
            nuisance: Nuisance::default(),
        },
    )
}

/// Replication `r` samples with seed `derive_seed(seed, r)`, so the report
/// depends only on the inputs and not on scheduling.
pub fn mc_study_with(
    p: &FactorizedDistribution,
    spec: &ParameterSpec,
    config: &StudyConfig,
) -> Result<MCStudyReport> {
    if config.n == 0 || config.replications == 0 {
        return Err(Error::invalid("study needs n >= 1 and replications >= 1"));
    }
    let truth_eif = influence(p, spec)?;
    let truth = truth_eif.psi;
    let runs: Vec<Replication> = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(config.seed, r as u64);
            let data = sample(p, config.n, seed)?;
            let os = match config.nuisance {
                Nuisance::Oracle => one_step_from_table(truth, &truth_eif.total, &data),
                Nuisance::Empirical { smoothing } => {
                    let fit = fit_empirical(&data, p.variables(), smoothing)?;
                    one_step_estimate(&fit, &data, spec)?
                }
            };
            let covered = (os.estimate - truth).abs() <= Z_95 * os.se;
            Ok(Replication {
                index: r,
                seed,
                plugin: os.plugin,
                onestep: os.estimate,
                se: os.se,
                covered,
            })
        })
        .collect::<Result<_>>()?;

    let reps = runs.len() as f64;
    let mean = |f: fn(&Replication) -> f64| runs.iter().map(f).sum::<f64>() / reps;
    let mean_onestep = mean(|r| r.onestep);
    let var_onestep = if runs.len() > 1 {
        runs.iter()
            .map(|r| (r.onestep - mean_onestep).powi(2))
            .sum::<f64>()
            / (reps - 1.0)
    } else {
        0.0
    };
    let var_eif = truth_eif.variance(p);
    let bound = var_eif / config.n as f64;
    Ok(MCStudyReport {
        parameter: spec.label(),
        n: config.n,
        replications: config.replications,
        seed: config.seed,
        nuisance: config.nuisance,
        truth,
        mean_plugin: mean(|r| r.plugin),
        mean_onestep,
        var_onestep,
        mc_se_onestep: (var_onestep / reps).sqrt(),
        mean_se: mean(|r| r.se),
        coverage_95: runs.iter().filter(|r| r.covered).count() as f64 / reps,
        var_eif,
        variance_ratio: if bound > 0.0 {
            var_onestep / bound
        } else {
            f64::NAN
        },
        degenerate_replications: if config.n < 2 { runs.len() } else { 0 },
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::point_distribution;

    #[test]
    fn point_mass_samples_the_atom() {
        let vars = vec![VariableSpec::new("X", vec![0.0, 1.0, 2.0], "outcome")];
        let p = FactorizedDistribution::new(
            vars,
            vec![ConditionalFactor::new(0, vec![vec![0.0, 1.0, 0.0]])],
            1e-3,
        )
        .unwrap();
        let d = sample(&p, 50, 3).unwrap();
        assert!(d.points.iter().all(|&f| f == 1));
    }

    #[test]
    fn same_seed_same_data() {
        let p = point_distribution(2, 3);
        assert_eq!(sample(&p, 100, 9).unwrap(), sample(&p, 100, 9).unwrap());
        assert_ne!(
            sample(&p, 100, 9).unwrap().points,
            sample(&p, 100, 10).unwrap().points
        );
    }

    #[test]
    fn empty_parent_cell_is_uniform() {
        let p = point_distribution(2, 3);
        // only W = 0 observed
        let data = Dataset::from_counts(p.variables().to_vec(), &[(0, 3), (3, 2)], "test").unwrap();
        let fit = fit_empirical(&data, p.variables(), 0.5).unwrap();
        assert_eq!(fit.factor(1).row(2), &[0.5, 0.5]);
        assert_eq!(fit.factor(2).row(5), &[1.0 / 3.0; 3]);
    }

    #[test]
    fn single_observation_is_flagged() {
        let p = point_distribution(2, 2);
        let data = sample(&p, 1, 1).unwrap();
        let os = one_step_estimate(&p, &data, &ParameterSpec::Tsm).unwrap();
        assert!(os.degenerate);
        assert_eq!(os.se, 0.0);
        assert!(os.estimate.is_finite());
    }

    #[test]
    fn csv_round_trip() {
        let p = point_distribution(4, 3);
        let data = sample(&p, 20, 2).unwrap();
        let back = Dataset::from_csv(&data.to_csv().unwrap(), p.variables().to_vec()).unwrap();
        assert_eq!(back.points, data.points);
    }
}
