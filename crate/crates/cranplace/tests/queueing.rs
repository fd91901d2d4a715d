mod common;

use common::*;
use proptest::prelude::*;

use cranplace::experiments::presets::small_scenario;
use cranplace::heuristics::{place, HeuristicConfig, HeuristicKind};
use cranplace::model::{CapacityVector, NodeKind};
use cranplace::queueing::{accumulate_path_loads, md1_delay, mm1_delay, path_delay, QueueLoad};
use cranplace::state::Engine;
use cranplace::Error;

#[test]
fn path_delay_examples() {
    use NodeKind::*;
    let t = graph(&[Router, Router, Cloud], &[(0, 1, 1.0), (1, 2, 1.0)], CapacityVector::ZERO, 1.0);
    assert_eq!(path_delay(&t, &[], &[0.0, 0.0]).unwrap(), 0.0);
    assert_eq!(path_delay(&t, &[0], &[0.5, 0.0]).unwrap(), 1.5);
    assert_eq!(path_delay(&t, &[0, 1], &[0.5, 0.5]).unwrap(), 3.0);
    assert_eq!(path_delay(&t, &[0], &[0.5, 0.0]).unwrap(), md1_delay(QueueLoad::new(0.5, 1.0)).unwrap());
    assert!(matches!(path_delay(&t, &[0, 1], &[0.5, 1.0]), Err(Error::StabilityViolation { at: Some(1), .. })));
}

#[test]
fn access_links_carry_no_delay() {
    let t = chain(1.0, 1.0, CapacityVector::ZERO);
    assert_eq!(path_delay(&t, &[0, 1], &[5.0, 0.5]).unwrap(), 1.5);
}

#[test]
fn path_loads_are_conserved() {
    let sc = small_scenario(40, 9);
    let r = place(&sc, &HeuristicConfig::for_scenario(HeuristicKind::BnbSortedAsc, 1, &sc)).unwrap();
    let e = Engine::new(&sc).unwrap();
    let loads = accumulate_path_loads(&r.state, &e.table).unwrap();
    let admitted: f64 = r.state.allocations.values().map(|a| a.rate).sum();
    let total: f64 = loads.iter().sum();
    assert!((total - admitted).abs() <= 1e-9 * admitted.max(1.0));
    // independent re-summation by path
    for (p, &l) in loads.iter().enumerate() {
        let by_hand: f64 = r.state.allocations.values().filter(|a| a.path == p).map(|a| a.rate).sum();
        assert_eq!(l, by_hand);
    }
    assert!(accumulate_path_loads(&e.new_state(), &e.table).unwrap().iter().all(|&x| x == 0.0));
}

proptest! {
    #[test]
    fn mm1_matches_closed_form(mu in 1e-2f64..1e6, rho in 0.0f64..0.99) {
        let d = mm1_delay(QueueLoad::new(rho * mu, mu)).unwrap();
        let want = 1.0 / (mu - rho * mu);
        prop_assert!((d - want).abs() <= 1e-9 * want);
    }
}
