use proptest::prelude::*;

use eifcheck::estimate::{fit_empirical, Dataset};
use eifcheck::generate::random_distribution;
use eifcheck::tangent::{
    decompose_score, inner_product, perturb_joint, project_onto_factor, random_score,
};
use eifcheck::verify::{mean_zero_check, Family};
use eifcheck::{influence, psi};

fn family() -> impl Strategy<Value = Family> {
    (0..Family::ALL.len()).prop_map(|i| Family::ALL[i])
}

fn levels() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..4, 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn influence_is_centered_and_sums_its_components(f in family(), seed in any::<u64>()) {
        let (p, spec) = f.instance(seed);
        let d = influence(&p, &spec).unwrap();
        prop_assert!(mean_zero_check(&p, &d.total) <= 1e-10);
        prop_assert!((d.psi - psi(&p, &spec).unwrap()).abs() <= 1e-12);
        for o in (0..p.num_points()).filter(|&o| p.joint()[o] > 0.0) {
            let sum: f64 = d.components.iter().map(|c| c.values[o]).sum();
            prop_assert!((sum - d.total[o]).abs() <= 1e-12 * (1.0 + d.total[o].abs()));
        }
    }

    #[test]
    fn factor_projections_reconstruct_and_are_orthogonal(lv in levels(), seed in any::<u64>()) {
        let p = random_distribution(&lv, seed, 1e-3);
        let s = random_score(&p, seed ^ 1, 10.0).unwrap();
        let parts = decompose_score(&p, s.values());
        for o in 0..p.num_points() {
            let sum: f64 = parts.iter().map(|c| c.values()[o]).sum();
            prop_assert!((sum - s.values()[o]).abs() <= 1e-12);
        }
        for i in 0..parts.len() {
            for j in 0..i {
                prop_assert!(inner_product(&p, parts[i].values(), parts[j].values()).abs() <= 1e-12);
            }
            let again = project_onto_factor(&p, parts[i].values(), i);
            for (a, b) in again.values().iter().zip(parts[i].values()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn perturbation_stays_a_distribution(lv in levels(), seed in any::<u64>(), t in -0.9f64..0.9) {
        let p = random_distribution(&lv, seed, 1e-3);
        let s = random_score(&p, seed ^ 2, 10.0).unwrap();
        let eps = t / s.sup_norm().max(1.0);
        let q = perturb_joint(&p, &s, eps).unwrap();
        let total: f64 = q.joint().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        for (o, (a, b)) in q.joint().iter().zip(p.joint()).enumerate() {
            prop_assert!(*a >= 0.0);
            prop_assert!((a - b * (1.0 + eps * s.values()[o])).abs() <= 1e-12);
        }
    }

    #[test]
    fn unsmoothed_fit_recovers_counts(lv in levels(), counts in prop::collection::vec(1usize..20, 81)) {
        let p = random_distribution(&lv, 0, 0.0);
        let n = p.num_points();
        let table: Vec<(usize, usize)> = (0..n).map(|f| (f, counts[f])).collect();
        let total: usize = table.iter().map(|c| c.1).sum();
        let data = Dataset::from_counts(p.variables().to_vec(), &table, "counts").unwrap();
        let fit = fit_empirical(&data, p.variables(), 0.0).unwrap();
        for (f, c) in table {
            prop_assert!((fit.joint()[f] - c as f64 / total as f64).abs() <= 1e-12);
        }
    }
}
