use critwave::diagnostics::{channel_scan, detect_resolution, ChannelConfig};
use critwave::evolution::{evolve, step, Boundary, EvolveConfig};
use critwave::grid::energy_norm;
use critwave::perturb::beta;
use critwave::steady::find_steady_states;
use critwave::{Grid, Potential, RadialField, RadialPair};

fn bump_data(g: Grid, amp: f64) -> RadialPair {
    let u = RadialField::from_fn(g, |r| amp * beta(r / 2.0).powi(2));
    RadialPair::new(u.clone(), u.scaled(-0.5)).unwrap()
}

#[test]
fn time_stepping_is_second_order() {
    let g = Grid::new(1000, 20.0).unwrap();
    let v = Potential::gaussian(g, 4.0, 1.0).unwrap();
    let data = bump_data(g, 0.4);
    let run = |dt: f64| {
        let cfg = EvolveConfig { dt: Some(dt), t_end: 2.0, boundary: Boundary::ReflectingGuard, ..EvolveConfig::default() };
        evolve(&data, &v, &cfg, &[], None).unwrap().final_state
    };
    let h = 0.8 * g.dr();
    let reference = run(h / 8.0);
    let err = |dt: f64| energy_norm(&run(dt).sub(&reference).unwrap());
    let ratio = err(h) / err(h / 2.0);
    assert!((3.6..4.4).contains(&ratio), "{ratio}");
}

#[test]
fn modified_energy_is_conserved_and_raw_energy_is_close() {
    let g = Grid::new(4000, 40.0).unwrap();
    let v = Potential::gaussian(g, 8.0, 1.0).unwrap();
    let cfg = EvolveConfig { t_end: 20.0, boundary: Boundary::ReflectingGuard, ..EvolveConfig::default() };
    let tr = evolve(&bump_data(g, 0.3), &v, &cfg, &[], None).unwrap();
    assert!(tr.boundary_contact_time.is_none(), "{:?}", tr.boundary_contact_time);
    assert!(tr.max_drift < 1e-6, "{}", tr.max_drift);
    assert!(tr.max_raw_drift < 1e-3);
    assert!(tr.drift_ok);
}

#[test]
fn steady_state_is_a_fixed_point_of_the_flow() {
    let g = Grid::new(2000, 100.0).unwrap();
    let v = Potential::gaussian(g, 8.0, 1.0).unwrap();
    let q = find_steady_states(&v, 0.5, 5.0, 50).unwrap().into_iter().find(|s| s.shoot_param > 0.0).unwrap();
    let data = RadialPair::stationary(&q.phi);
    let mut s = data.clone();
    for _ in 0..200 {
        s = step(&s, &v, 0.9 * g.dr(), Boundary::ReflectingGuard).unwrap();
    }
    let d = energy_norm(&s.sub(&data).unwrap());
    assert!(d < 1e-6, "{d}");
}

#[test]
fn perturbed_ground_state_returns_to_it() {
    let g = Grid::new(2000, 100.0).unwrap();
    let v = Potential::gaussian(g, 8.0, 1.0).unwrap();
    let states = find_steady_states(&v, -5.0, 5.0, 100).unwrap();
    let iq = states.iter().position(|s| s.shoot_param > 0.0).unwrap();
    let data = critwave::perturb::perturb_velocity(&RadialPair::stationary(&states[iq].phi), 3, 0.1).unwrap();
    let cfg = EvolveConfig { t_end: 60.0, ..EvolveConfig::default() };
    let tr = evolve(&data, &v, &cfg, &states, None).unwrap();
    let rep = detect_resolution(&tr, 1e-2, 20.0);
    assert_eq!(rep.winner, Some(iq));
    assert!(rep.radiated_energy > 0.0);
}

#[test]
fn compact_data_has_an_exterior_channel_and_steady_data_none() {
    let g = Grid::new(1200, 60.0).unwrap();
    let v = Potential::zero(g);
    let cfg = ChannelConfig { t_end: 40.0, ..ChannelConfig::default() };
    let (f, b) = channel_scan(&bump_data(g, 0.2), &v, 0.0, &cfg).unwrap();
    assert!(f.min_ext_energy.max(b.min_ext_energy) > 1e-6);
    let (f, b) = channel_scan(&RadialPair::zeros(g), &v, 0.0, &cfg).unwrap();
    assert_eq!(f.min_ext_energy.max(b.min_ext_energy), 0.0);
}
