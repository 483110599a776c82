use proptest::prelude::*;
use telerisk::featurize::VinPartition;
use telerisk::forest::gini;
use telerisk::linear_models::{logit, sigmoid, soft_threshold};
use telerisk::recipe::{recipe_fit, yeo_johnson, BagSpec, BaggedImputer, RecipeConfig};
use telerisk::study::redundancy_point;
use telerisk::table::{Column, ColumnOrigin, FeatureTable};
use telerisk::trip_store::Vin;
use telerisk::tuning::{auc, lambda_grid};

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec(-5.0f64..5.0, n),
            prop::collection::vec(0u8..2, n).prop_filter("both classes", |l| l.contains(&0) && l.contains(&1)),
        )
    })
}

proptest! {
    #[test]
    fn auc_is_a_probability_and_reverses((s, l) in scored()) {
        let a = auc(&s, &l).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        prop_assert!((auc(&neg, &l).unwrap() - (1.0 - a)).abs() < 1e-12);
    }

    #[test]
    fn auc_ignores_monotone_transforms((s, l) in scored()) {
        let t: Vec<f64> = s.iter().map(|v| sigmoid(*v) * 3.0 + 1.0).collect();
        prop_assert_eq!(auc(&s, &l).unwrap(), auc(&t, &l).unwrap());
    }

    #[test]
    fn soft_threshold_is_the_l1_prox(z in -10.0f64..10.0, t in 0.0f64..5.0) {
        let s = soft_threshold(z, t);
        prop_assert!(s.abs() <= z.abs());
        prop_assert!(s == 0.0 || s.signum() == z.signum());
        // minimizer of (x - z)^2 / 2 + t |x|
        let f = |x: f64| 0.5 * (x - z).powi(2) + t * x.abs();
        prop_assert!(f(s) <= f(s + 1e-6) && f(s) <= f(s - 1e-6));
    }

    #[test]
    fn gini_lies_in_binary_range(a in 0usize..100, b in 0usize..100) {
        prop_assume!(a + b > 0);
        let g = gini(&[a, b]).unwrap();
        prop_assert!((0.0..=0.5).contains(&g));
    }

    #[test]
    fn yeo_johnson_is_increasing_and_fixes_zero(x in -20.0f64..20.0, dx in 1e-3f64..5.0, theta in -3.0f64..3.0) {
        prop_assert_eq!(yeo_johnson(0.0, theta), 0.0);
        prop_assert!(yeo_johnson(x + dx, theta) > yeo_johnson(x, theta));
    }

    #[test]
    fn logit_inverts_sigmoid(t in -15.0f64..15.0) {
        prop_assert!((logit(sigmoid(t)) - t).abs() < 1e-6 * t.abs().max(1.0));
    }

    #[test]
    fn redundancy_point_bounds(m in prop::collection::vec(0.4f64..0.9, 2..14), delta in 0.0f64..0.05) {
        let k = redundancy_point(&m, delta);
        prop_assert!(k >= 1 && k < m.len());
        prop_assert!(m[k + 1..].iter().all(|&v| v <= m[k] + delta) || k == m.len() - 1);
    }

    #[test]
    fn imputations_stay_within_observed_range(
        rows in prop::collection::vec((0.0f64..10.0, -3.0f64..3.0, 0u8..5), 12..80),
        seed in 0u64..1000,
    ) {
        let y: Vec<f64> = rows.iter().map(|r| if r.2 == 0 { f64::NAN } else { r.0 }).collect();
        prop_assume!(y.iter().filter(|v| v.is_finite()).count() >= 2);
        let x = vec![rows.iter().map(|r| r.1).collect::<Vec<f64>>()];
        let spec = BagSpec { n_trees: 5, min_leaf: 2, seed, ..BagSpec::default() };
        let imp = BaggedImputer::fit("y", &y, vec!["x".into()], &x, &spec).unwrap();
        let filled = imp.impute(&y, &[&x[0]]);
        let obs: Vec<f64> = y.iter().copied().filter(|v| v.is_finite()).collect();
        let lo = obs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = obs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for v in filled {
            prop_assert!(v >= lo && v <= hi);
        }
    }

    #[test]
    fn recipe_never_sees_test_rows(
        rows in prop::collection::vec((0.0f64..50.0, 0u8..3, 0u8..2), 30..80),
        junk in prop::collection::vec((-1e6f64..1e6, 0u8..2), 80),
        seed in 0u64..1000,
    ) {
        let n = rows.len();
        let levels = ["a", "b", "c", "zz"];
        let ids: Vec<Vin> = (0..n).map(|i| Vin::new(&format!("v{i}"))).collect();
        let build = |x: Vec<f64>, g: Vec<String>, y: Vec<u8>| {
            FeatureTable::new(
                ids.clone(),
                vec![
                    Column::numeric("x", ColumnOrigin::Telematics, x),
                    Column::categorical("g", ColumnOrigin::Classical, g),
                ],
                y,
            )
            .unwrap()
        };
        let clean = build(
            rows.iter().map(|r| r.0).collect(),
            rows.iter().map(|r| levels[r.1 as usize].to_string()).collect(),
            rows.iter().map(|r| r.2).collect(),
        );
        let part = VinPartition::draw(clean.row_ids(), 0.7, seed).unwrap();
        let (train, test) = part.apply(&clean);
        prop_assume!(train.positives() > 0 && train.positives() < train.n_rows());
        // same training rows, test rows overwritten
        let is_test: Vec<bool> = ids.iter().map(|v| test.row_ids().contains(v)).collect();
        let pick = |i: usize, a: f64, b: f64| if is_test[i] { b } else { a };
        let dirty = build(
            (0..n).map(|i| pick(i, rows[i].0, junk[i].0)).collect(),
            (0..n).map(|i| if is_test[i] { "zz".to_string() } else { levels[rows[i].1 as usize].to_string() }).collect(),
            (0..n).map(|i| if is_test[i] { junk[i].1 } else { rows[i].2 }).collect(),
        );
        let (dirty_train, _) = part.apply(&dirty);
        let config = RecipeConfig { impute: vec![], ..RecipeConfig::default() };
        let a = recipe_fit(&train, &config).unwrap();
        let b = recipe_fit(&dirty_train, &config).unwrap();
        prop_assert_eq!(&a, &b);
        let (ta, tb) = (a.apply(&test).unwrap().design().unwrap(), b.apply(&test).unwrap().design().unwrap());
        for (ca, cb) in ta.columns.iter().zip(&tb.columns) {
            prop_assert!(ca.iter().zip(cb).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}

#[test]
fn lambda_grid_is_increasing_log_spaced() {
    let g = lambda_grid();
    assert_eq!(g.len(), 100);
    let ratios: Vec<f64> = g.windows(2).map(|w| w[1] / w[0]).collect();
    assert!(ratios.iter().all(|r| (r / ratios[0] - 1.0).abs() < 1e-9));
}
