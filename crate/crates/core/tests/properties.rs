use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use precis_core::closed_form::{gs_statistic, gw_statistic, multinomial_wald, Correction, Link};
use precis_core::combine::{dai_combined_p, simes_global_p, CombineInput};
use precis_core::data::{subset_by_predicted_class, PairedTable};
use precis_core::gee::{fit_clustered, fit_logistic_irls, gee_wald_pair, multi_classifier_compare, subset_design};
use precis_core::prevalence::bayes_update_precision;
use precis_core::relative::{relative_precision, rp_sigma2};
use precis_core::replicability::{replicability, replicability_counts, replicability_pairwise};
use precis_core::special::{chi2_sf, logit};

fn cells() -> impl Strategy<Value = [u64; 8]> {
    prop::array::uniform8(1u64..=50)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

proptest! {
    #[test]
    fn swap_leaves_statistics_unchanged(n in cells()) {
        let pt = PairedTable::from_cells(n);
        let sw = pt.swapped();
        for (a, b) in [
            (gs_statistic(&pt, Correction::None), gs_statistic(&sw, Correction::None)),
            (gw_statistic(&pt, Correction::None), gw_statistic(&sw, Correction::None)),
            (
                multinomial_wald(&pt, Link::Identity, Correction::None),
                multinomial_wald(&sw, Link::Identity, Correction::None),
            ),
        ] {
            let (a, b) = (a.unwrap().statistic, b.unwrap().statistic);
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        }
    }

    #[test]
    fn logit_multinomial_wald_is_gw(n in cells()) {
        let pt = PairedTable::from_cells(n);
        let gw = gw_statistic(&pt, Correction::None).unwrap();
        let mw = multinomial_wald(&pt, Link::Logit, Correction::None).unwrap();
        prop_assert!((gw.statistic - mw.statistic).abs() <= 1e-12 * gw.statistic.max(1e-300));
    }

    #[test]
    fn statistics_nonnegative_and_zero_iff_equal(n in cells()) {
        let pt = PairedTable::from_cells(n);
        let equal = pt.a() * pt.t5() == pt.e() * pt.t1();
        for r in [
            gs_statistic(&pt, Correction::None).unwrap(),
            gw_statistic(&pt, Correction::None).unwrap(),
            multinomial_wald(&pt, Link::Identity, Correction::None).unwrap(),
        ] {
            prop_assert!(r.statistic >= 0.0);
            prop_assert_eq!(r.statistic == 0.0, equal);
            prop_assert!(r.p_value > 0.0 && r.p_value <= 1.0);
        }
    }

    #[test]
    fn rp_variance_nonnegative(n in prop::array::uniform8(0u64..=30)) {
        let pt = PairedTable::from_cells(n);
        prop_assume!(pt.t1() > 0 && pt.t5() > 0 && pt.a() > 0 && pt.e() > 0);
        prop_assert!(rp_sigma2(&pt).unwrap() >= 0.0);
        let r = relative_precision(&pt).unwrap() * relative_precision(&pt.swapped()).unwrap();
        prop_assert!((r - 1.0).abs() < 1e-14);
    }

    #[test]
    fn simes_monotone_and_permutation_invariant(
        p in prop::collection::vec(1e-6f64..=1.0, 1..8),
        bump in 0.0f64..0.5,
        k in 0usize..8,
    ) {
        let base = simes_global_p(&p).unwrap().p_value;
        prop_assert!(base > 0.0 && base <= 1.0);
        let mut rev = p.clone();
        rev.reverse();
        prop_assert_eq!(simes_global_p(&rev).unwrap().p_value, base);
        let mut up = p.clone();
        let i = k % up.len();
        up[i] = (up[i] + bump).min(1.0);
        prop_assert!(simes_global_p(&up).unwrap().p_value >= base);
    }

    #[test]
    fn simes_of_identical_p_is_that_p(p in 1e-9f64..=1.0, l in 1usize..10) {
        prop_assert_eq!(simes_global_p(&vec![p; l]).unwrap().p_value, p);
    }

    #[test]
    fn dai_without_covariance_is_fisher(p in prop::collection::vec(1e-12f64..=1.0, 1..10)) {
        let r = dai_combined_p(&CombineInput::independent(p.clone())).unwrap();
        let fisher: f64 = p.iter().map(|x| -2.0 * x.ln()).sum();
        let fp = chi2_sf(fisher, 2.0 * p.len() as f64);
        prop_assert!((r.statistic - fisher).abs() <= 1e-12 * fisher.max(1.0));
        prop_assert!((r.p_value - fp).abs() <= 1e-12);
        prop_assert!(r.p_value > 0.0 && r.p_value <= 1.0);
    }

    #[test]
    fn replicability_invariances(e in prop::collection::vec(any::<bool>(), 2..60), seed in any::<u64>()) {
        let r = replicability(&e).unwrap();
        let flipped: Vec<bool> = e.iter().map(|x| !x).collect();
        prop_assert_eq!(replicability(&flipped).unwrap(), r);
        let mut shuffled = e.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        prop_assert_eq!(replicability(&shuffled).unwrap(), r);
    }

    #[test]
    fn bayes_update_monotone(
        s in 0.01f64..0.99, p in 0.01f64..0.99, v in 0.01f64..0.99, d in 0.0f64..0.009,
    ) {
        let base = bayes_update_precision(s, p, v).unwrap();
        prop_assert!(bayes_update_precision(s + d, p, v).unwrap() >= base);
        prop_assert!(bayes_update_precision(s, p + d, v).unwrap() >= base);
        prop_assert!(bayes_update_precision(s, p, v + d).unwrap() >= base);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gee_wald_matches_closed_form(n in cells()) {
        let pt = PairedTable::from_cells(n);
        let closed = gw_statistic(&pt, Correction::None).unwrap().statistic;
        let s = subset_by_predicted_class(&pt.expand().unwrap(), "pos").unwrap();
        let gee = gee_wald_pair(&s).unwrap().statistic;
        if closed == 0.0 {
            prop_assert_eq!(gee, 0.0);
        } else {
            prop_assert!(rel(gee, closed) < 1e-6, "gee {} closed {}", gee, closed);
        }
    }

    #[test]
    fn saturated_fit_and_reference_relabel(n in cells()) {
        let pt = PairedTable::from_cells(n);
        let s = subset_by_predicted_class(&pt.expand().unwrap(), "pos").unwrap();
        let d = subset_design(&s, 1).unwrap();
        let fit = fit_logistic_irls(&d.design, &d.response).unwrap();
        let want = logit(pt.precision1().unwrap()) - logit(pt.precision2().unwrap());
        prop_assert!((fit.coefficients[1] - want).abs() < 1e-10);

        let a = multi_classifier_compare(&s, "C2", 0.05).unwrap();
        let b = multi_classifier_compare(&s, "C1", 0.05).unwrap();
        prop_assert!((a.odds_ratios[0].log_odds_ratio + b.odds_ratios[0].log_odds_ratio).abs() < 1e-10);
        let (wa, wb) = (a.global.statistic, b.global.statistic);
        prop_assert!((wa - wb).abs() <= 1e-8 * wa.max(1e-12));
    }

    #[test]
    fn sandwich_symmetric_psd(n in cells()) {
        let s = subset_by_predicted_class(&PairedTable::from_cells(n).expand().unwrap(), "pos").unwrap();
        let d = subset_design(&s, 0).unwrap();
        let fit = fit_clustered(&d.design, &d.response, &d.clusters).unwrap();
        for m in [fit.sandwich_covariance.unwrap(), fit.model_covariance] {
            prop_assert!((&m - m.transpose()).amax() == 0.0);
            let eig = SymmetricEigen::new(m.clone());
            prop_assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-12 * m.amax()));
        }
    }
}

#[test]
fn replicability_forms_agree_exhaustively() {
    for n in 2..=200u64 {
        for p in 0..=n {
            let e: Vec<bool> = (0..n).map(|i| i < p).collect();
            assert_eq!(
                replicability_counts(p, n - p).unwrap(),
                replicability_pairwise(&e).unwrap(),
                "p={p} n={n}"
            );
        }
    }
}

#[test]
fn sandwich_agrees_with_model_covariance_when_well_specified() {
    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let x: DMatrix<f64> = DMatrix::from_fn(n, 3, |_, j| if j == 0 { 1.0 } else { rng.random_range(-1.0..1.0) });
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let eta = -0.4 + 0.9 * x[(i, 1)] - 0.6 * x[(i, 2)];
            f64::from(u8::from(rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp())))
        })
        .collect();
    let singles: Vec<usize> = (0..n).collect();
    let fit = fit_clustered(&x, &y, &singles).unwrap();
    let sw = fit.sandwich_covariance.unwrap();
    for i in 0..3 {
        assert!(rel(sw[(i, i)], fit.model_covariance[(i, i)]) < 0.1, "diag {i}");
        for j in 0..3 {
            // off-diagonals near zero are compared on the diagonal scale
            let scale = (fit.model_covariance[(i, i)] * fit.model_covariance[(j, j)]).sqrt();
            assert!((sw[(i, j)] - fit.model_covariance[(i, j)]).abs() < 0.1 * scale);
        }
    }
}

#[test]
fn simes_holds_level_under_independent_uniform_nulls() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sims = 5000;
    let rejections = (0..sims)
        .filter(|_| {
            let p: Vec<f64> = (0..5).map(|_| 1.0 - rng.random::<f64>()).collect();
            simes_global_p(&p).unwrap().p_value <= 0.05
        })
        .count();
    let rate = rejections as f64 / sims as f64;
    let se = (0.05 * 0.95 / sims as f64).sqrt();
    assert!(rate <= 0.05 + 3.0 * se, "rate {rate}");
}
