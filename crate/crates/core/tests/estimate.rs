use eifcheck::estimate::{
    fit_empirical, mc_study, mc_study_with, one_step_estimate, sample, Dataset, Nuisance,
    StudyConfig,
};
use eifcheck::generate::point_distribution;
use eifcheck::{influence, psi, FactorizedDistribution, ParameterSpec, VariableSpec};

fn point_vars(w: usize) -> Vec<VariableSpec> {
    vec![
        VariableSpec::new("W", (0..w).map(|l| l as f64).collect(), "confounder"),
        VariableSpec::binary("A", "treatment"),
        VariableSpec::binary("Y", "outcome"),
    ]
}

/// Fair coin treatment and outcome with a single stratum.
fn coin() -> FactorizedDistribution {
    FactorizedDistribution::from_tables(
        point_vars(1),
        vec![
            vec![vec![1.0]],
            vec![vec![0.5, 0.5]],
            vec![vec![0.5, 0.5]; 2],
        ],
        1e-3,
    )
    .unwrap()
}

#[test]
fn coin_tsm_has_nominal_coverage() {
    let p = coin();
    let d = influence(&p, &ParameterSpec::Tsm).unwrap();
    // D* = 2A(Y - 1/2), variance 1/2
    assert!((d.variance(&p) - 0.5).abs() < 1e-15);
    let cfg = StudyConfig {
        n: 400,
        replications: 2000,
        seed: 3,
        nuisance: Nuisance::Oracle,
    };
    let r = mc_study_with(&p, &ParameterSpec::Tsm, &cfg).unwrap();
    assert!(
        (0.93..=0.97).contains(&r.coverage_95),
        "coverage {}",
        r.coverage_95
    );
    assert!(
        (r.variance_ratio - 1.0).abs() < 0.1,
        "ratio {}",
        r.variance_ratio
    );
    assert!((r.mean_onestep - 0.5).abs() < 4.0 * r.mc_se_onestep);
}

#[test]
fn unsmoothed_fit_of_exact_counts_recovers_the_distribution() {
    let p = FactorizedDistribution::from_tables(
        point_vars(2),
        vec![
            vec![vec![0.6, 0.4]],
            vec![vec![0.75, 0.25], vec![0.5, 0.5]],
            vec![
                vec![0.2, 0.8],
                vec![0.4, 0.6],
                vec![0.5, 0.5],
                vec![0.1, 0.9],
            ],
        ],
        1e-3,
    )
    .unwrap();
    let counts: Vec<(usize, usize)> = p
        .joint()
        .iter()
        .enumerate()
        .map(|(f, q)| (f, (q * 1000.0).round() as usize))
        .collect();
    assert_eq!(counts.iter().map(|c| c.1).sum::<usize>(), 1000);
    let data = Dataset::from_counts(p.variables().to_vec(), &counts, "enumeration").unwrap();
    let fit = fit_empirical(&data, p.variables(), 0.0).unwrap();
    for (a, b) in fit.joint().iter().zip(p.joint()) {
        assert!((a - b).abs() < 1e-12);
    }
    for spec in [ParameterSpec::Tsm, ParameterSpec::Vte, ParameterSpec::Att] {
        let os = one_step_estimate(&fit, &data, &spec).unwrap();
        assert!((os.plugin - psi(&p, &spec).unwrap()).abs() < 1e-12);
        assert!(os.correction.abs() < 1e-12, "{spec:?}: {}", os.correction);
    }
}

#[test]
fn vte_without_effect_heterogeneity() {
    // Y independent of A within each stratum, so the effect and its variance vanish.
    let p = FactorizedDistribution::from_tables(
        point_vars(2),
        vec![
            vec![vec![0.5, 0.5]],
            vec![vec![0.6, 0.4], vec![0.3, 0.7]],
            vec![
                vec![0.3, 0.7],
                vec![0.3, 0.7],
                vec![0.8, 0.2],
                vec![0.8, 0.2],
            ],
        ],
        1e-3,
    )
    .unwrap();
    let d = influence(&p, &ParameterSpec::Vte).unwrap();
    assert_eq!(d.psi, 0.0);
    assert!(d.variance(&p) < 1e-28);
    let oracle = StudyConfig {
        n: 500,
        replications: 200,
        seed: 5,
        nuisance: Nuisance::Oracle,
    };
    let r = mc_study_with(&p, &ParameterSpec::Vte, &oracle).unwrap();
    assert!(r.runs.iter().all(|x| x.onestep.abs() < 1e-12));

    // At the boundary the first-order term vanishes and both estimators
    // carry an O(1/n) upward bias.
    let r = mc_study(&p, &ParameterSpec::Vte, 500, 200, 5).unwrap();
    let r4 = mc_study(&p, &ParameterSpec::Vte, 2000, 200, 5).unwrap();
    for (a, b) in [
        (r.mean_plugin, r4.mean_plugin),
        (r.mean_onestep, r4.mean_onestep),
    ] {
        assert!(a > 0.0 && b > 0.0);
        assert!(a / b > 3.0, "{a} vs {b}");
    }
}

#[test]
fn spread_shrinks_at_root_n() {
    let p = point_distribution(4, 3);
    let small = mc_study(&p, &ParameterSpec::Tsm, 250, 1000, 1).unwrap();
    let large = mc_study(&p, &ParameterSpec::Tsm, 1000, 1000, 1).unwrap();
    let ratio = (small.var_onestep / large.var_onestep).sqrt();
    assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
    let se_ratio = small.mean_se / large.mean_se;
    assert!((1.9..=2.1).contains(&se_ratio), "se ratio {se_ratio}");
}

#[test]
fn samples_depend_only_on_the_seed() {
    let p = point_distribution(8, 2);
    let a = sample(&p, 300, 77).unwrap();
    assert_eq!(a.points, sample(&p, 300, 77).unwrap().points);
    assert_ne!(a.points, sample(&p, 300, 78).unwrap().points);
    let back = Dataset::from_csv(&a.to_csv().unwrap(), p.variables().to_vec()).unwrap();
    assert_eq!(back.points, a.points);
}

#[test]
fn point_mass_sample_repeats_the_atom() {
    let p = FactorizedDistribution::from_tables(
        point_vars(2),
        vec![vec![vec![0.0, 1.0]], vec![vec![1.0, 0.0]; 2], vec![vec![0.0, 1.0]; 4]],
        0.0,
    )
    .unwrap();
    let atom = p.joint().iter().position(|q| *q == 1.0).unwrap();
    assert!(sample(&p, 50, 1).unwrap().points.iter().all(|f| *f == atom));
}

#[test]
fn coin_sample_mean_obeys_the_clt_bound() {
    let p = FactorizedDistribution::from_tables(vec![VariableSpec::binary("X", "outcome")], vec![vec![vec![0.5, 0.5]]], 0.0)
        .unwrap();
    let n = 100_000;
    let data = sample(&p, n, 2024).unwrap();
    let mean = data.points.iter().sum::<usize>() as f64 / n as f64;
    assert!((mean - 0.5).abs() <= 4.0 * (0.25 / n as f64).sqrt(), "mean {mean}");
}

#[test]
fn fitted_tables_converge_at_root_n() {
    let p = point_distribution(12, 3);
    let dev = |n: usize| -> f64 {
        (0..40u64)
            .map(|r| {
                let fit = fit_empirical(&sample(&p, n, 100 + r).unwrap(), p.variables(), 0.5).unwrap();
                fit.joint().iter().zip(p.joint()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
            })
            .sum::<f64>()
            / 40.0
    };
    let ratio = dev(500) / dev(8000);
    assert!((3.0..=5.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn one_step_lands_within_five_standard_errors() {
    let p = point_distribution(6, 3);
    let r = mc_study(&p, &ParameterSpec::Att, 1000, 500, 4).unwrap();
    let inside = r.runs.iter().filter(|x| (x.onestep - r.truth).abs() <= 5.0 * x.se).count();
    assert!(inside as f64 >= 0.99 * r.runs.len() as f64);
}

#[test]
fn single_replication_reports_its_estimate() {
    let p = point_distribution(2, 2);
    let r = mc_study(&p, &ParameterSpec::Tsm, 100, 1, 8).unwrap();
    assert_eq!(r.runs.len(), 1);
    assert_eq!(r.mean_onestep, r.runs[0].onestep);
    assert_eq!(r.mean_plugin, r.runs[0].plugin);
}

#[test]
fn oracle_one_step_is_unbiased() {
    for (seed, spec) in [(1, ParameterSpec::Tsm), (2, ParameterSpec::Vte), (3, ParameterSpec::Att)] {
        let p = point_distribution(seed, 3);
        let cfg = StudyConfig { n: 300, replications: 1000, seed, nuisance: Nuisance::Oracle };
        let r = mc_study_with(&p, &spec, &cfg).unwrap();
        assert!((r.mean_onestep - r.truth).abs() <= 3.0 * r.mc_se_onestep, "{spec:?}");
    }
}

#[test]
fn nearly_constant_blip_with_oracle_nuisances() {
    // effect 0.2 in one stratum and 0.21 in the other
    let p = FactorizedDistribution::from_tables(
        point_vars(2),
        vec![
            vec![vec![0.5, 0.5]],
            vec![vec![0.6, 0.4], vec![0.3, 0.7]],
            vec![vec![0.5, 0.5], vec![0.3, 0.7], vec![0.6, 0.4], vec![0.39, 0.61]],
        ],
        1e-3,
    )
    .unwrap();
    let d = influence(&p, &ParameterSpec::Vte).unwrap();
    assert!((d.psi - 0.000025).abs() < 1e-15);
    let cfg = StudyConfig { n: 1000, replications: 2000, seed: 6, nuisance: Nuisance::Oracle };
    let r = mc_study_with(&p, &ParameterSpec::Vte, &cfg).unwrap();
    assert!((r.mean_onestep - r.truth).abs() <= 3.0 * r.mc_se_onestep);
}

#[test]
fn one_step_variance_matches_the_bound() {
    for (seed, spec) in [(3, ParameterSpec::Tsm), (21, ParameterSpec::Vte), (5, ParameterSpec::Att)] {
        let p = point_distribution(seed, 3);
        let r = mc_study(&p, &spec, 1000, 2000, seed).unwrap();
        assert!((r.variance_ratio - 1.0).abs() <= 0.15, "{spec:?}: {}", r.variance_ratio);
    }
}
