use gaugeforge::bundles::{self, witt_to_integer, Options};
use gaugeforge::derham::{kaehler_d, AffineVariety, DeRhamModel, DifferentialForm};
use gaugeforge::json::GaugeJson;
use gaugeforge::phi_crystal as pc;
use gaugeforge::report::Status;
use gaugeforge::witt::WittRing;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn ring_params() -> impl Strategy<Value = (u32, u32, usize)> {
    (prop::sample::select(vec![2u32, 3, 5]), 1u32..=2, 1usize..=3)
}

fn ring(p: u32, d: u32, n: usize) -> Arc<WittRing> {
    WittRing::new(p, d, n).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Derived oracle first: over F_p the Teichmuller expansion identifies W_n with Z/p^n.
    #[test]
    fn witt_prime_field_is_integers_mod_pn(p in prop::sample::select(vec![2u32, 3, 5, 7]), n in 1usize..=3, x in any::<u32>(), y in any::<u32>()) {
        let r = ring(p, 1, n);
        let (a, b) = (x % r.size() as u32, y % r.size() as u32);
        let m = r.modulus();
        prop_assert_eq!(witt_to_integer(&r, r.add(a, b)), (witt_to_integer(&r, a) + witt_to_integer(&r, b)) % m);
        prop_assert_eq!(witt_to_integer(&r, r.mul(a, b)), (witt_to_integer(&r, a) * witt_to_integer(&r, b)) % m);
    }

    #[test]
    fn witt_ring_axioms((p, d, n) in ring_params(), x in any::<u32>(), y in any::<u32>(), z in any::<u32>()) {
        let r = ring(p, d, n);
        let s = r.size() as u32;
        let (a, b, c) = (x % s, y % s, z % s);
        prop_assert_eq!(r.add(a, b), r.add(b, a));
        prop_assert_eq!(r.mul(a, b), r.mul(b, a));
        prop_assert_eq!(r.add(r.add(a, b), c), r.add(a, r.add(b, c)));
        prop_assert_eq!(r.mul(r.mul(a, b), c), r.mul(a, r.mul(b, c)));
        prop_assert_eq!(r.mul(a, r.add(b, c)), r.add(r.mul(a, b), r.mul(a, c)));
        prop_assert_eq!(r.add(a, r.neg(a)), 0);
        prop_assert_eq!(r.mul(a, 1), a);
    }

    #[test]
    fn frobenius_and_verschiebung((p, d, n) in ring_params(), x in any::<u32>(), y in any::<u32>()) {
        let r = ring(p, d, n);
        let s = r.size() as u32;
        let (a, b) = (x % s, y % s);
        prop_assert_eq!(r.frob(r.add(a, b)), r.add(r.frob(a), r.frob(b)));
        prop_assert_eq!(r.frob(r.mul(a, b)), r.mul(r.frob(a), r.frob(b)));
        prop_assert_eq!(r.frob_pow(a, d as i64), a);
        prop_assert_eq!(r.frob(r.verschiebung(a)), r.mul_p(a));
        prop_assert_eq!(r.verschiebung(r.frob(a)), r.mul_p(a));
    }

    #[test]
    fn free_phi_gauges_satisfy_fv_vf((p, d, n) in ring_params(), rank in 0usize..=3, a in -2i64..=0, len in 0i64..=3, seed in any::<u64>()) {
        let r = ring(p, d, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = pc::random_free_phi_gauge(&r, rank, a, a + len, &mut rng);
        prop_assert!(g.validate().unwrap().is_valid());
        prop_assert!(pc::is_free_w_gauge(&g.gauge).free);
        prop_assert!(g.reduce_mod_p().validate().unwrap().is_valid());
        let t = g.tate_twist(2);
        prop_assert!(t.validate().unwrap().is_valid());
        prop_assert_eq!(t.window(), (g.window().0 - 2, g.window().1 - 2));
        prop_assert_eq!(t.tate_twist(-2), g.clone());
        let back: GaugeJson = serde_json::from_str(&serde_json::to_string(&GaugeJson::of(&g.gauge, Some(&g.phi))).unwrap()).unwrap();
        prop_assert_eq!(back.phi_gauge().unwrap(), g);
    }

    #[test]
    fn standard_construction_is_a_free_phi_gauge(p in prop::sample::select(vec![2u32, 3]), rank in 1usize..=3, kmax in 0u32..=2, seed in any::<u64>()) {
        let big = ring(p, 1, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = pc::random_crystal(&big, rank, kmax, 0, &mut rng);
        let g = pc::standard_construction(&c, 2).unwrap();
        prop_assert!(g.validate().unwrap().is_valid());
        prop_assert!(pc::is_free_w_gauge(&g.gauge).free);
    }
}

fn random_form(f: &gaugeforge::field::Field, m: usize, q: usize, terms: &[(Vec<u32>, Vec<usize>, u32)]) -> DifferentialForm {
    let mut w = DifferentialForm::zero(q);
    for (e, i, c) in terms {
        let e: Vec<u32> = e.iter().take(m).copied().collect();
        let i: Vec<usize> = i.iter().map(|x| x % m).take(q).collect();
        if i.len() == q {
            w.add_term(f, e, i, c % f.order());
        }
    }
    w
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn d_squared_is_zero(p in prop::sample::select(vec![2u32, 3, 5]), m in 1usize..=3, q in 0usize..=2,
                         terms in prop::collection::vec((prop::collection::vec(0u32..6, 3), prop::collection::vec(0usize..3, 2), any::<u32>()), 0..6)) {
        let v = AffineVariety::affine_space(p, 1, m).unwrap();
        let f = v.field.clone();
        let w = random_form(&f, m, q.min(m), &terms);
        prop_assert!(kaehler_d(&f, &kaehler_d(&f, &w)).is_zero());
    }

    // c(c^{-1}(b)) = b, with c^{-1} sigma-semilinear.
    #[test]
    fn cartier_inverts_its_inverse(p in prop::sample::select(vec![2u32, 3]), d in 1u32..=2, m in 1usize..=2, q in 0usize..=2, w in 0u32..=3, seed in any::<u64>()) {
        let q = q.min(m);
        let v = AffineVariety::affine_space(p, d, m).unwrap();
        let model = DeRhamModel::new(v, p * 3).unwrap();
        let r = model.ring().clone();
        let dim = model.dim(q, w).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<u32> = (0..dim).map(|_| rand::Rng::gen_range(&mut rng, 0..r.size() as u32)).collect();
        let sb: Vec<u32> = b.iter().map(|&x| r.frob(x)).collect();
        let z = model.cartier_inverse_matrix(q, w).unwrap().apply(&r, &sb);
        prop_assert_eq!(model.cartier(q, p * w, &z).unwrap(), b);
    }
}

#[test]
fn report_is_deterministic_in_the_seed() {
    let opts = Options::default();
    let a = bundles::run_criteria(&[1, 8], 11, opts).unwrap();
    let b = bundles::run_criteria(&[1, 8], 11, opts).unwrap();
    for ((_, x), (_, y)) in a.iter().zip(&b) {
        assert_eq!(x.to_json(), y.to_json());
        assert!(x.is_well_formed());
        assert_eq!(x.timing_ms, None);
    }
}

#[test]
fn status_order_is_ok_undecided_overflow_violated() {
    assert!(Status::Ok < Status::Undecided && Status::Undecided < Status::Overflow && Status::Overflow < Status::Violated);
}
