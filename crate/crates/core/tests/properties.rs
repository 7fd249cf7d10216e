mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use swarmdyn::analysis::{dtw_cost, transform_distance, DistanceMatrix};
use swarmdyn::dynamics::{gd_solve, icm_learn, line_search_eta, project, IcmConfig, QuadraticForm};
use swarmdyn::layout::mincut;
use swarmdyn::neighborhood::{build_neighborhoods, voronoi_partition};
use swarmdyn::ConstraintTag;

use common::*;

fn matrix(d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, d * d).prop_map(move |v| DMatrix::from_vec(d, d, v))
}

fn sequence(d: usize) -> impl Strategy<Value = Vec<DMatrix<f64>>> {
    prop::collection::vec(matrix(d), 1..6)
}

fn form(d: usize) -> impl Strategy<Value = QuadraticForm> {
    (0.2f64..3.0, prop::collection::vec(-2.0f64..2.0, d), matrix(d))
        .prop_map(move |(beta, b, dm)| QuadraticForm::new(beta, DVector::from_vec(b), dm).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transform_distance_is_bounded(a in matrix(3), b in matrix(3)) {
        let v = transform_distance(&a, &b).unwrap();
        prop_assert!((-1e-12..=2.0 + 1e-12).contains(&v));
        prop_assert!(transform_distance(&a, &a).unwrap().abs() < 1e-12);
    }

    #[test]
    fn dtw_is_symmetric_and_matches_enumeration(a in sequence(2), b in sequence(2)) {
        let ab = dtw_cost(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, dtw_cost(&b, &a).unwrap());
        prop_assert!(dtw_cost(&a, &a).unwrap().abs() < 1e-12);
        if a.len() <= 4 && b.len() <= 4 {
            prop_assert!((ab - brute_force_dtw(&a, &b)).abs() < 1e-12);
        }
    }

    #[test]
    fn gd_never_increases_g(q in form(3), x0 in matrix(3)) {
        let out = gd_solve(&x0, &q, ConstraintTag::Unconstrained, 1e-9, 10_000).unwrap();
        prop_assert!(q.value(&out.x) <= q.value(&x0) + 1e-12);
        let g = q.gradient(&x0);
        let eta = line_search_eta(&x0, &g, &q);
        prop_assert!(q.value(&(&x0 - &g * eta)) <= q.value(&x0));
    }

    #[test]
    fn projections_land_in_their_sets(x in matrix(4)) {
        let s = project(&x, ConstraintTag::Symmetric).unwrap();
        prop_assert!(ConstraintTag::Symmetric.holds(&s));
        prop_assert_eq!(project(&s, ConstraintTag::Symmetric).unwrap(), s);
        if let Ok(o) = project(&x, ConstraintTag::Orthogonal) {
            prop_assert!((o.transpose() * &o - DMatrix::identity(4, 4)).norm() < 1e-10);
        }
    }

    #[test]
    fn mincut_matches_exhaustive_search(
        unary in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..10),
        raw in prop::collection::vec((0usize..10, 0usize..10, 0.0f64..1.0), 0..20),
    ) {
        let n = unary.len();
        let pairwise: Vec<_> = raw.into_iter().filter(|(a, b, _)| a < b && *b < n).collect();
        let labels = mincut::minimize_binary(&unary, &pairwise);
        let got = mincut::energy(&unary, &pairwise, &labels);
        let best = (0..1u32 << n)
            .map(|bits| {
                let l: Vec<bool> = (0..n).map(|i| bits >> i & 1 == 1).collect();
                mincut::energy(&unary, &pairwise, &l)
            })
            .fold(f64::INFINITY, f64::min);
        prop_assert!((got - best).abs() < 1e-9);
    }

    #[test]
    fn voronoi_matches_brute_force_and_weights_are_symmetric(seed in any::<u64>(), w in 6usize..32, h in 6usize..32, k in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = random_layout(&mut rng, 2, k, w, h, 0.0);
        for t in 1..=2 {
            let mattes = layout.frame(t);
            prop_assume!(!mattes.is_empty());
            let part = voronoi_partition(mattes, w, h).unwrap();
            let brute = brute_force_voronoi(mattes, w, h);
            for (p, &b) in brute.iter().enumerate() {
                prop_assert_eq!(part.label(p % w, p / w), b);
            }
        }
        let nbrs = build_neighborhoods(&layout, 2).unwrap();
        for e in nbrs.weights() {
            prop_assert!(e.w > 0.0);
            prop_assert_eq!(nbrs.weight(e.t, e.i, e.j), nbrs.weight(e.t, e.j, e.i));
        }
    }

    #[test]
    fn distance_matrix_csv_round_trips(v in prop::collection::vec(0.0f64..5.0, 6)) {
        let m = DMatrix::from_fn(4, 4, |i, j| {
            if i == j {
                0.0
            } else {
                let (a, b) = (i.min(j), i.max(j));
                v[a * 4 + b - (a + 1) * (a + 2) / 2]
            }
        });
        let dm = DistanceMatrix::new((0..4).map(|i| format!("e{i}")).collect(), m).unwrap();
        prop_assert_eq!(DistanceMatrix::from_csv(&dm.to_csv()).unwrap(), dm);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn icm_is_monotone_and_keeps_constraints(
        seed in any::<u64>(),
        tag in prop::sample::select(vec![ConstraintTag::Unconstrained, ConstraintTag::Symmetric, ConstraintTag::Orthogonal]),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = random_layout(&mut rng, 5, 3, 16, 16, 0.1);
        let features = random_features(&mut rng, &layout, 3);
        let nbrs = build_neighborhoods(&layout, 2).unwrap();
        prop_assume!(!layout.transform_slots().is_empty());
        let cfg = IcmConfig { window: 2, constraint: tag, k_max: 15, ..IcmConfig::default() };
        let model = icm_learn(&features, &layout, &nbrs, &cfg).unwrap();
        if tag != ConstraintTag::Orthogonal {
            for w in model.diagnostics.windows(2) {
                prop_assert!(w[1].objective <= w[0].objective + 1e-9 * (1.0 + w[0].objective.abs()),
                    "{} -> {}", w[0].objective, w[1].objective);
            }
        }
        for x in &model.transforms {
            match tag {
                ConstraintTag::Symmetric => prop_assert_eq!(&x.matrix, &x.matrix.transpose()),
                ConstraintTag::Orthogonal => {
                    let d = x.matrix.nrows();
                    prop_assert!((x.matrix.transpose() * &x.matrix - DMatrix::identity(d, d)).norm() < 1e-10);
                }
                ConstraintTag::Unconstrained => {}
            }
        }
    }
}
