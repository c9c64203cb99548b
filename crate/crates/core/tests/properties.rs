use proptest::prelude::*;

use mmv2v_core::analysis::expected_coverage;
use mmv2v_core::blockage::{blocker_count_distribution, poisson_pmf};
use mmv2v_core::channel::{
    lobe_membership, path_loss_db, received_power_k, AntennaRole, LinkGeometry,
};
use mmv2v_core::scenario::default_mac_probabilities;
use mmv2v_core::sim::{drop_vehicles, run_trials, select_transmitters};
use mmv2v_core::{Lane, MacParams, PathLossTable, Scenario, Thinning};

fn lane(i: usize) -> Lane {
    Lane::new(i).unwrap()
}

#[test]
fn shipped_default_file_matches_builtin_defaults() {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../scenario.default"
    ))
    .unwrap();
    assert_eq!(Scenario::from_toml_str(&text).unwrap(), Scenario::default());
}

#[test]
fn load_serialize_load_round_trips() {
    let mut s = Scenario::default();
    s.mac.p_t = Some(0.02);
    s.road.tall_fraction = 0.3;
    s.sim.thinning = Thinning::MaternII;
    let back = Scenario::from_toml_str(&s.to_toml_string()).unwrap();
    assert_eq!(back, s);
    assert_eq!(Scenario::from_toml_str(&back.to_toml_string()).unwrap(), s);
}

#[test]
fn unknown_keys_are_rejected() {
    let err = Scenario::from_toml_str("[radio]\ntx_power = 23\n").unwrap_err();
    assert!(err.is_validation());
}

#[test]
fn poisson_partial_sums_reach_one() {
    for mean in [0.0, 0.1, 1.0, 3.5, 10.0] {
        let s: f64 = (0..=50).map(|k| poisson_pmf(mean, k)).sum();
        assert!((s - 1.0).abs() <= 1e-9, "mean {mean}: {s}");
    }
}

#[test]
fn determinism_across_runs() {
    let s = Scenario::default();
    let a = run_trials(&s, 20, 800.0, 99).unwrap();
    let b = run_trials(&s, 20, 800.0, 99).unwrap();
    assert_eq!(a, b);
    for t in &a {
        assert!(t.covered_count <= t.vehicles);
        assert!(t.sinr_samples.iter().all(|x| x.is_finite()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mac_fallback_is_scale_free(interval in 1e-3f64..10.0, frac in 1e-4f64..1.0, scale in 1e-3f64..1e3) {
        let m = MacParams { packet_interval_s: interval, tx_latency_s: interval * frac, ..MacParams::default() };
        let scaled = MacParams { packet_interval_s: interval * scale, tx_latency_s: interval * frac * scale, ..m.clone() };
        let (a, b) = (default_mac_probabilities(&m).unwrap(), default_mac_probabilities(&scaled).unwrap());
        prop_assert!((a.0 - b.0).abs() <= 1e-12 * a.0.max(1e-300));
        prop_assert!((a.1 - b.1).abs() <= 1e-12 * a.1.max(1e-300));
    }

    #[test]
    fn path_loss_increases_with_distance(k in 0usize..3, d in 0.5f64..1500.0, step in 0.01f64..100.0) {
        let t = PathLossTable::default();
        let near = path_loss_db(&t, k, &LinkGeometry::new(0.0, d).unwrap()).unwrap();
        let far = path_loss_db(&t, k, &LinkGeometry::new(0.0, d + step).unwrap()).unwrap();
        prop_assert!(far > near);
    }

    #[test]
    fn received_power_falls_along_a_bearing(k in 0usize..3, bearing in 0.0f64..1.5, r in 1.0f64..500.0, step in 0.01f64..50.0) {
        let s = Scenario::default();
        let at = |r: f64| LinkGeometry::new(r * bearing.sin(), r * bearing.cos()).unwrap();
        let pat = &s.antenna;
        prop_assume!(lobe_membership(pat, &at(r), AntennaRole::TransmitterFront) == lobe_membership(pat, &at(r + step), AntennaRole::TransmitterFront));
        prop_assert!(received_power_k(&s, k, &at(r + step)).unwrap() < received_power_k(&s, k, &at(r)).unwrap());
    }

    #[test]
    fn clear_link_probability_falls_with_distance(a in 1usize..=3, b in 1usize..=3, dy in 0.1f64..400.0, step in 0.01f64..50.0, r in 0.0f64..1.0) {
        let mut s = Scenario::default();
        s.road.tall_fraction = r;
        let near = blocker_count_distribution(&s, lane(a), lane(b), dy).unwrap();
        let far = blocker_count_distribution(&s, lane(a), lane(b), dy + step).unwrap();
        prop_assert!(far.p_b0 <= near.p_b0 + 1e-15);
        prop_assert!(near.p_b0 + near.p_b1 <= 1.0 + 1e-15);
        prop_assert!((0.0..=1.0).contains(&near.p_b0) && (0.0..=1.0).contains(&near.p_b1));
    }

    #[test]
    fn primaries_respect_the_exclusion_range(seed in any::<u64>(), r_e in 5.0f64..120.0, p_t in 0.05f64..1.0, matern in any::<bool>()) {
        let mut s = Scenario::default();
        s.radio.carrier_sense_range_m = r_e;
        s.mac.p_t = Some(p_t);
        s.sim.thinning = if matern { Thinning::MaternII } else { Thinning::Sequential };
        let drop = select_transmitters(drop_vehicles(&s, 600.0, seed).unwrap(), &s, seed ^ 1);
        let p: Vec<usize> = drop.primaries().collect();
        for (i, &a) in p.iter().enumerate() {
            for &b in &p[i + 1..] {
                let (va, vb) = (&drop.vehicles[a], &drop.vehicles[b]);
                let dx = va.lane.separation(vb.lane) as f64 * s.road.lane_width;
                let dy = drop.wrapped_dy(va.y, vb.y).abs();
                prop_assert!(dx.hypot(dy) >= r_e, "{a} and {b} are {} m apart", dx.hypot(dy));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn coverage_grows_with_density_without_blockage(i in 0usize..3, base in 0.02f64..0.2, extra in 0.001f64..0.1, alpha in 10.0f64..360.0) {
        let mut s = Scenario::default().with_beamwidth(alpha);
        s.road.tall_fraction = 0.0;
        s.road.lane_densities = [base; 3];
        let before = expected_coverage(&s).unwrap().expected_receivers;
        s.road.lane_densities[i] += extra;
        let after = expected_coverage(&s).unwrap().expected_receivers;
        prop_assert!(after >= before - 1e-9 * before, "{before} -> {after}");
    }
}
