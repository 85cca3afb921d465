//! Acceptance suite. Runs as a plain binary so that the ten criterion lines
//! are always printed; exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use eifcheck::estimate::mc_study;
use eifcheck::generate::point_distribution;
use eifcheck::verify::{run_suite, CheckSuiteConfig, CheckSummary, Family, VerificationReport};
use eifcheck::ParameterSpec;

struct Line {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn worst(summaries: &[&CheckSummary]) -> f64 {
    summaries
        .iter()
        .map(|s| s.worst)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn all_pass(summaries: &[&CheckSummary]) -> bool {
    !summaries.is_empty() && summaries.iter().all(|s| s.pass)
}

fn count(summaries: &[&CheckSummary]) -> usize {
    summaries.iter().map(|s| s.count).sum()
}

/// Checks that every family in `families` has a summary for `check`.
fn covers(report: &VerificationReport, check: &str, families: &[Family]) -> bool {
    families
        .iter()
        .all(|f| report.summary(f.name(), check).is_some())
}

fn bounded(report: &VerificationReport, check: &str, tol: f64) -> (bool, f64, usize) {
    let s = report.summaries_for(check);
    let w = worst(&s);
    (all_pass(&s) && w <= tol, w, count(&s))
}

fn main() {
    let config = CheckSuiteConfig::default();
    assert_eq!(config.n_distributions, 100);
    assert_eq!(config.n_scores_per_distribution, 20);
    assert_eq!(config.h, 1e-4);

    let start = Instant::now();
    let report = run_suite(&config).expect("suite runs");
    let suite_time = start.elapsed();
    let mut lines = Vec::new();

    // 1
    let riesz = report.summaries_for("riesz");
    let per_family = Family::ALL.iter().all(|f| {
        report
            .summary(f.name(), "riesz")
            .is_some_and(|s| s.count == config.n_distributions)
    });
    let w = worst(&riesz);
    lines.push(Line {
        id: 1,
        name: "riesz identity",
        pass: all_pass(&riesz) && per_family && w <= 1e-6 && suite_time < Duration::from_secs(300),
        detail: format!(
            "{} families x {} distributions x {} scores, worst {w:.2e} (tol 1e-6), suite {:.1}s",
            Family::ALL.len(),
            config.n_distributions,
            config.n_scores_per_distribution,
            suite_time.as_secs_f64()
        ),
    });

    // 2
    let (pass, w, n) = bounded(&report, "mean_zero", 1e-10);
    lines.push(Line {
        id: 2,
        name: "mean zero",
        pass: pass && covers(&report, "mean_zero", &Family::ALL),
        detail: format!("{n} influence functions, worst {w:.2e} (tol 1e-10)"),
    });

    // 3
    let (p_sum, w_sum, _) = bounded(&report, "component_sum", 1e-12);
    let (p_orth, w_orth, _) = bounded(&report, "orthogonality", 1e-12);
    let (p_dec, w_dec, n_dec) = bounded(&report, "decomposition", 1e-12);
    lines.push(Line {
        id: 3,
        name: "decomposition and orthogonality",
        pass: p_sum && p_orth && p_dec && n_dec >= 100,
        detail: format!(
            "component sums {w_sum:.2e}, pairwise {w_orth:.2e}, score decomposition {w_dec:.2e} over {n_dec} cases (tol 1e-12)"
        ),
    });

    // 4
    let restricted_families = [
        Family::TransportSuppliedRestricted,
        Family::TransportFromPRestricted,
    ];
    let min_cases = restricted_families
        .iter()
        .filter_map(|f| report.summary(f.name(), "restricted"))
        .map(|s| s.count)
        .min()
        .unwrap_or(0);
    let (pass, w, _) = bounded(&report, "restricted", 1e-10);
    lines.push(Line {
        id: 4,
        name: "restricted model",
        pass: pass && covers(&report, "restricted", &restricted_families) && min_cases >= 50,
        detail: format!(
            "at least {min_cases} restricted distributions per family, worst {w:.2e} (tol 1e-10)"
        ),
    });

    // 5
    let long = report.summary("longitudinal_k0", "cross_check_tsm");
    let surv = report.summary("survival_t1", "cross_check_tsm");
    let (pass, w, n) = bounded(&report, "cross_check_tsm", 1e-12);
    lines.push(Line {
        id: 5,
        name: "cross-checks",
        pass: pass && long.is_some() && surv.is_some(),
        detail: format!(
            "longitudinal k=0 and survival t0=1 against TSM, {n} cases, worst {w:.2e} (tol 1e-12)"
        ),
    });

    // 6
    let eff = report.summary("tsm", "efficiency");
    let ipw = report.summary("tsm", "ipw_riesz");
    let pass6 = matches!((eff, ipw), (Some(e), Some(r))
        if e.pass && r.pass && e.count >= 100 && r.count >= 100 && -e.worst >= -1e-12 && r.worst <= 1e-6);
    lines.push(Line {
        id: 6,
        name: "efficiency bound",
        pass: pass6,
        detail: match (eff, ipw) {
            (Some(e), Some(r)) => format!(
                "min Var(IPW) - Var(EIF) {:.3e} over {} distributions, IPW Riesz worst {:.2e} (tol 1e-6)",
                -e.worst, e.count, r.worst
            ),
            _ => "missing summaries".into(),
        },
    });

    // 7
    let (pass, w, n) = bounded(&report, "parametric", 1e-10);
    lines.push(Line {
        id: 7,
        name: "parametric connection",
        pass: pass && n == 9,
        detail: format!("Bernoulli on 9 grid points, worst |Var*I - 1| {w:.2e} (tol 1e-10)"),
    });

    // 8
    let order = report.summaries_for("order");
    let order_cases = Family::ALL
        .iter()
        .filter_map(|f| report.summary(f.name(), "order"))
        .map(|s| s.count)
        .min()
        .unwrap_or(0);
    lines.push(Line {
        id: 8,
        name: "order of accuracy",
        pass: all_pass(&order) && covers(&report, "order", &Family::ALL) && order_cases >= 20,
        detail: format!(
            "{order_cases} cases per family, e(h/2) <= {} e(h) + {:.0e}",
            config.tolerances.order_ratio, config.tolerances.order_floor
        ),
    });

    // 9
    let start = Instant::now();
    let p = point_distribution(3, 3);
    let study = mc_study(&p, &ParameterSpec::Tsm, 1000, 2000, 7).expect("study runs");
    let study_time = start.elapsed();
    let coverage_ok = (0.92..=0.97).contains(&study.coverage_95);
    let variance_ok = (study.variance_ratio - 1.0).abs() <= 0.15;
    lines.push(Line {
        id: 9,
        name: "statistical sanity",
        pass: coverage_ok && variance_ok && study_time < Duration::from_secs(120),
        detail: format!(
            "coverage {:.4} in [0.92, 0.97], variance ratio {:.4} within 15%, {:.1}s",
            study.coverage_95,
            study.variance_ratio,
            study_time.as_secs_f64()
        ),
    });

    // 10
    let controls = report.summaries_for("negative_control");
    let mut kinds: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| c.check == "negative_control")
        .map(|c| c.case.as_str())
        .collect();
    kinds.sort_unstable();
    kinds.dedup();
    let min_rate = controls
        .iter()
        .map(|s| s.worst)
        .fold(f64::INFINITY, f64::min);
    lines.push(Line {
        id: 10,
        name: "negative controls",
        pass: all_pass(&controls) && kinds.len() == 5 && min_rate >= 0.9,
        detail: format!(
            "{} corruptions, lowest detection rate {min_rate:.3} (need 0.9)",
            kinds.len()
        ),
    });

    let mut failed = 0;
    for l in &lines {
        if !l.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<32} {}  {}",
            l.id,
            l.name,
            if l.pass { "PASS" } else { "FAIL" },
            l.detail
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        lines.len() - failed,
        lines.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
