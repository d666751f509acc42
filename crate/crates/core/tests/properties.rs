use gatr::ga::{embed_point, embed_translation, extract_point, random_versor, Multivector, N_BLADES};
use gatr::nbody::{generate_dataset, read_dataset, write_dataset, SampleConfig, MAX_DISPLACEMENT};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mv() -> impl Strategy<Value = Multivector<f64>> {
    prop::array::uniform16(-2.0f64..2.0).prop_map(|c| Multivector::from_slice(&c))
}

fn close(a: &Multivector<f64>, b: &Multivector<f64>, tol: f64) -> bool {
    let scale = a.max_abs().max(b.max_abs()).max(1.0);
    (0..N_BLADES).all(|i| (a.coeffs()[i] - b.coeffs()[i]).abs() <= tol * scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn geometric_product_is_associative(a in mv(), b in mv(), c in mv()) {
        let left = a.geometric_product(&b).geometric_product(&c);
        let right = a.geometric_product(&b.geometric_product(&c));
        prop_assert!(close(&left, &right, 1e-12));
    }

    #[test]
    fn wedge_is_associative_and_bilinear(a in mv(), b in mv(), c in mv(), s in -3.0f64..3.0) {
        prop_assert!(close(&a.wedge(&b).wedge(&c), &a.wedge(&b.wedge(&c)), 1e-12));
        prop_assert!(close(&a.scale(s).wedge(&b), &a.wedge(&b).scale(s), 1e-12));
    }

    #[test]
    fn dual_round_trips(a in mv()) {
        prop_assert_eq!(a.dual().dual_inverse(), a);
    }

    #[test]
    fn reverse_is_an_anti_automorphism(a in mv(), b in mv()) {
        let left = a.geometric_product(&b).reverse();
        let right = b.reverse().geometric_product(&a.reverse());
        prop_assert!(close(&left, &right, 1e-12));
    }

    #[test]
    fn grade_projections_sum_to_the_whole(a in mv()) {
        let mut sum = Multivector::zero();
        for k in 0..=4 {
            let p = a.grade_projection(k).unwrap();
            for i in 0..N_BLADES {
                sum.0[i] += p.coeffs()[i];
            }
        }
        prop_assert_eq!(sum, a);
    }

    #[test]
    fn point_embedding_round_trips(p in prop::array::uniform3(-100.0f64..100.0)) {
        let q = extract_point(&embed_point(p)).unwrap();
        prop_assert_eq!(q, p);
    }

    #[test]
    fn translation_moves_points(p in prop::array::uniform3(-50.0f64..50.0), t in prop::array::uniform3(-50.0f64..50.0)) {
        let moved = embed_translation(t).sandwich(&embed_point(p)).unwrap();
        let q = extract_point(&moved).unwrap();
        for k in 0..3 {
            prop_assert!((q[k] - (p[k] + t[k])).abs() < 1e-10);
        }
    }

    #[test]
    fn versors_preserve_the_inner_product(seed in any::<u64>(), n in 1usize..5, a in mv(), b in mv()) {
        let u = random_versor(&mut ChaCha8Rng::seed_from_u64(seed), n, 5.0).unwrap();
        let (ua, ub) = (u.sandwich(&a).unwrap(), u.sandwich(&b).unwrap());
        let (x, y) = (ua.inner(&ub), a.inner(&b));
        prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0));
    }

    #[test]
    fn versor_action_is_multiplicative(seed in any::<u64>(), a in mv()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_versor(&mut rng, 2, 3.0).unwrap();
        let w = random_versor(&mut rng, 3, 3.0).unwrap();
        let composed = u.compose(&w).unwrap().sandwich(&a).unwrap();
        let nested = u.sandwich(&w.sandwich(&a).unwrap()).unwrap();
        prop_assert!(close(&composed, &nested, 1e-9));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn datasets_round_trip_and_respect_the_displacement_rule(seed in any::<u64>(), planets in 1usize..6) {
        let config = SampleConfig { n_planets: planets, ..SampleConfig::default() };
        let data = generate_dataset(&config, 8, seed, false).unwrap();
        prop_assert_eq!(data.n_bodies(), planets + 1);
        prop_assert!(data.samples.iter().all(|s| s.max_displacement() <= MAX_DISPLACEMENT));
        let mut buf = Vec::new();
        write_dataset(&mut buf, &data).unwrap();
        prop_assert_eq!(read_dataset(&mut buf.as_slice()).unwrap(), data);
    }
}
