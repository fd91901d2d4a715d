mod common;

use common::*;

use cranplace::exact::{check_constraints, objective};
use cranplace::experiments::presets::{compare_scenario, micro_instance, small_scenario};
use cranplace::heuristics::{place, place_bnb, place_sa, HeuristicConfig, HeuristicKind, PlacementResult};
use cranplace::model::CapacityVector;
use cranplace::state::Engine;
use cranplace::{Mode, Scenario};

fn run(sc: &Scenario, kind: HeuristicKind, seed: u64) -> PlacementResult {
    place(sc, &HeuristicConfig::for_scenario(kind, seed, sc)).unwrap()
}

#[test]
fn single_request_with_room_to_spare() {
    let t = chain(1e9, 1e9, CapacityVector::new(64.0, 512.0, 40.0));
    let sc = scenario(t, vec![two_xlarge()], vec![class("c", 4.0, 1.0, 1.0)], vec![request(0, 0, "c", 1.0)]);
    for kind in HeuristicKind::ALL {
        let r = run(&sc, kind, 1);
        assert_eq!((r.satisfied, r.dropped, r.migrations, r.instances_launched), (1, 0, 0, 1), "{kind}");
    }
}

#[test]
fn second_identical_request_opens_second_instance() {
    let t = chain(1e9, 1e9, CapacityVector::new(16.0, 122.0, 10.0));
    let reqs = vec![request(0, 0, "c", 1.0), request(1, 0, "c", 1.0)];
    // one request fills a 2xlarge exactly in CPU and network
    let sc = scenario(t, vec![two_xlarge()], vec![class("c", 8.0, 5.0, 1.0)], reqs);
    for kind in HeuristicKind::ALL {
        let r = run(&sc, kind, 1);
        assert_eq!((r.satisfied, r.instances_launched), (2, 2), "{kind}");
        assert_eq!(r.state.instances.len(), 2);
    }
}

#[test]
fn single_candidate_makes_sampling_agree_with_branch_and_bound() {
    let t = chain(1e9, 1e9, CapacityVector::new(8.0, 61.0, 5.0));
    let mut sc = scenario(t, vec![two_xlarge()], vec![class("c", 8.0, 5.0, 1.0)], vec![request(0, 0, "c", 1.0)]);
    sc.params.k_paths = 1;
    let bnb = place_bnb(&sc, &HeuristicConfig::for_scenario(HeuristicKind::BnbPlain, 3, &sc)).unwrap();
    for kind in [HeuristicKind::SaShort, HeuristicKind::SaLong] {
        let sa = place_sa(&sc, &HeuristicConfig::for_scenario(kind, 3, &sc)).unwrap();
        assert_eq!(sa.state.allocations, bnb.state.allocations);
        assert_eq!(sa.delays, bnb.delays);
    }
}

#[test]
fn same_seed_same_result() {
    let sc = small_scenario(80, 5);
    for kind in HeuristicKind::ALL {
        let (a, b) = (run(&sc, kind, 9), run(&sc, kind, 9));
        assert_eq!(a.state, b.state);
        assert_eq!(a.delays, b.delays);
        assert_eq!(
            (a.satisfied, a.dropped, a.migrations, a.instances_launched, a.drop_onset),
            (b.satisfied, b.dropped, b.migrations, b.instances_launched, b.drop_onset)
        );
        assert_eq!(a.total_resources_used, b.total_resources_used);
        assert_eq!(a.total_cost, b.total_cost);
        assert_eq!(a.link_delay_volume, b.link_delay_volume);
    }
}

#[test]
fn every_result_is_feasible_and_counted() {
    let mut cases: Vec<Scenario> = (0..30).map(micro_instance).collect();
    for seed in 0..4 {
        let mut sc = small_scenario(60, seed);
        cases.push(sc.clone());
        sc.params.mode = Mode::Dynamic;
        cases.push(sc);
    }
    for sc in &cases {
        let e = Engine::new(sc).unwrap();
        for kind in HeuristicKind::ALL {
            let r = run(sc, kind, 11);
            let report = check_constraints(&e, &r.state);
            assert!(report.is_feasible(), "{kind}: {report}");
            assert_eq!(r.satisfied + r.dropped, sc.requests.len());
            assert_eq!(r.dropped, r.state.dropped.len());
            assert_eq!(r.migrations, r.state.migrations);
            assert_eq!(r.instances_launched, r.state.launched);
            if sc.params.mode == Mode::Static {
                assert_eq!(r.satisfied, r.state.allocations.len());
                assert!(objective(&e, &r.state).is_ok());
            }
            assert_eq!(r.drop_onset.is_some(), r.dropped > 0);
        }
    }
}

#[test]
fn ascending_order_consolidates_at_least_as_well() {
    let sc = compare_scenario(10_000, 42).unwrap();
    let asc = run(&sc, HeuristicKind::BnbSortedAsc, 42);
    let desc = run(&sc, HeuristicKind::BnbSortedDesc, 42);
    assert!(asc.instances_launched <= desc.instances_launched);
}
