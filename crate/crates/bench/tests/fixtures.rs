use gaugeforge::phi_crystal as pc;
use gaugeforge_bench as fx;

#[test]
fn fixtures_are_deterministic_and_valid() {
    assert_eq!(fx::crystal(2, 3), fx::crystal(2, 3));
    let r = fx::ring(2, 1, 2);
    let g = fx::free_phi_gauge(&r, 3, 2);
    assert!(g.validate().unwrap().is_valid());
    assert!(pc::is_free_w_gauge(&g.gauge).free);
    assert!(pc::standard_construction(&fx::crystal(2, 3), 2).unwrap().validate().unwrap().is_valid());
}
