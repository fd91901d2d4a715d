mod common;

use common::*;

use cranplace::exact::{
    check_cloud_capacity, check_constraints, check_cost, check_integrity, check_sla, check_stability,
    check_vm_capacity, objective, objective_expanded, solve_exact,
};
use cranplace::experiments::presets::{micro_instance, small_scenario};
use cranplace::heuristics::{place, HeuristicConfig, HeuristicKind};
use cranplace::model::{capacity_fits, CapacityVector, NodeKind};
use cranplace::state::{Engine, PlacementState, Slot};
use cranplace::{Error, Scenario};

fn commit_new(e: &Engine, st: &mut PlacementState, id: u64) -> u64 {
    let path = e.table.paths_for(0, 2)[0];
    e.commit(st, e.request(id).unwrap(), path, Slot::New(0))
}

fn roomy(reqs: usize, class_cpu: f64, class_net: f64) -> Scenario {
    let t = chain(1e9, 1e9, CapacityVector::new(8.0, 61.0, 5.0));
    scenario(
        t,
        vec![two_xlarge()],
        vec![class("c", class_cpu, class_net, 1.0)],
        (0..reqs as u64).map(|i| request(i, 0, "c", 1.0)).collect(),
    )
}

#[test]
fn empty_state_is_feasible_with_zero_objective() {
    let sc = roomy(1, 1.0, 1.0);
    let e = Engine::new(&sc).unwrap();
    let st = e.new_state();
    assert!(check_constraints(&e, &st).is_feasible());
    assert_eq!(objective(&e, &st).unwrap(), 0.0);
    assert_eq!(objective_expanded(&e, &st).unwrap(), 0.0);
}

#[test]
fn cloud_capacity_boundary_is_inclusive() {
    let sc = roomy(2, 1.0, 1.0);
    let e = Engine::new(&sc).unwrap();
    let mut st = e.new_state();
    commit_new(&e, &mut st, 0);
    assert!(check_cloud_capacity(&e, &st).is_ok());
    commit_new(&e, &mut st, 1);
    assert!(check_cloud_capacity(&e, &st).is_err());
}

#[test]
fn cost_boundary_is_inclusive() {
    let mut sc = roomy(2, 1.0, 1.0);
    sc.params.cost_threshold = 0.532;
    let e = Engine::new(&sc).unwrap();
    let mut st = e.new_state();
    commit_new(&e, &mut st, 0);
    assert!(check_cost(&e, &st).is_ok());
    commit_new(&e, &mut st, 1);
    assert!(check_cost(&e, &st).is_err());
}

#[test]
fn vm_capacity_follows_the_degradation_rule() {
    // demand equal to the instance
    let sc = roomy(1, 8.0, 5.0);
    let e = Engine::new(&sc).unwrap();
    let mut st = e.new_state();
    commit_new(&e, &mut st, 0);
    assert!(check_vm_capacity(&e, &st).is_ok());
    let cap = two_xlarge().capacity;
    for (cpu, deg) in [(10.0, 0.2), (10.5, 0.2), (9.0, 0.0)] {
        let mut sc = roomy(1, cpu, 1.0);
        sc.params.degradation_fraction = deg;
        let e = Engine::new(&sc).unwrap();
        let mut st = e.new_state();
        commit_new(&e, &mut st, 0);
        let want = capacity_fits(&e.request(0).unwrap().demand, &cap, deg);
        assert_eq!(check_vm_capacity(&e, &st).is_ok(), want, "cpu {cpu}, degradation {deg}");
    }
}

#[test]
fn saturated_link_is_unstable() {
    let t = chain(1.0, 1e9, CapacityVector::new(8.0, 61.0, 5.0));
    let sc = scenario(t, vec![two_xlarge()], vec![class("c", 1e-9, 0.0, 1e9)], vec![request(0, 0, "c", 1.0)]);
    let e = Engine::new(&sc).unwrap();
    let mut st = e.new_state();
    assert!(check_stability(&e, &st).is_ok());
    commit_new(&e, &mut st, 0);
    assert!(check_stability(&e, &st).is_err());
}

/// One link at half load (1.5 s) into a cloud at half load (2.0 s).
fn half_loaded(sla: f64) -> Scenario {
    let t = chain(1.0, 1.0, CapacityVector::new(8.0, 61.0, 5.0));
    let c = class("c", 1e-9, 0.0, sla);
    scenario(t, vec![two_xlarge()], vec![c], vec![request(0, 0, "c", 0.5)])
}

#[test]
fn objective_of_one_request() {
    let sc = half_loaded(3.5);
    let e = Engine::new(&sc).unwrap();
    let mut st = e.new_state();
    commit_new(&e, &mut st, 0);
    assert!(check_sla(&e, &st).is_ok(), "delay exactly at the bound passes");
    assert_eq!(objective(&e, &st).unwrap(), 3.5);
    assert_eq!(objective_expanded(&e, &st).unwrap(), 3.5);
    let sol = solve_exact(&sc).unwrap();
    assert_eq!((sol.dropped, sol.objective), (0, 3.5));
    let r = place(&sc, &HeuristicConfig::for_scenario(HeuristicKind::BnbPlain, 0, &sc)).unwrap();
    assert_eq!(r.satisfied, 1);
    assert_eq!(r.delays[&0].link + r.delays[&0].compute, 3.5);

    let tighter = half_loaded(3.49);
    let e = Engine::new(&tighter).unwrap();
    let mut st = e.new_state();
    commit_new(&e, &mut st, 0);
    assert!(check_sla(&e, &st).is_err());
    assert!(matches!(objective(&e, &st), Err(Error::Infeasible(_))));
}

#[test]
fn integrity_rejects_non_cloud_targets() {
    let sc = roomy(1, 1.0, 1.0);
    let e = Engine::new(&sc).unwrap();
    let mut st = e.new_state();
    let inst = commit_new(&e, &mut st, 0);
    assert!(check_integrity(&e, &st).is_ok());
    let mut routed = st.clone();
    routed.allocations.get_mut(&0).unwrap().cloud = 1;
    assert!(check_integrity(&e, &routed).is_err());
    let mut orphan = st.clone();
    orphan.instances.remove(&inst);
    assert!(check_integrity(&e, &orphan).is_err());
}

#[test]
fn nearer_cloud_wins_on_idle_network() {
    use NodeKind::*;
    let t = graph(
        &[BaseStation, Router, Cloud, Router, Cloud],
        &[(0, 1, BIG), (1, 2, 1e3), (1, 3, 1e3), (3, 4, 1e3)],
        CapacityVector::new(8.0, 61.0, 5.0),
        1e6,
    );
    let sc = scenario(t, vec![two_xlarge()], vec![class("c", 1.0, 1.0, 1.0)], vec![request(0, 0, "c", 1.0)]);
    let sol = solve_exact(&sc).unwrap();
    assert_eq!(sol.state.allocations[&0].cloud, 2);
}

#[test]
fn oracle_is_never_beaten() {
    for seed in 100..130 {
        let sc = micro_instance(seed);
        let e = Engine::new(&sc).unwrap();
        let sol = solve_exact(&sc).unwrap();
        assert_eq!(objective(&e, &sol.state).unwrap(), objective_expanded(&e, &sol.state).unwrap());
        for kind in HeuristicKind::ALL {
            let r = place(&sc, &HeuristicConfig::for_scenario(kind, 5, &sc)).unwrap();
            let obj = objective(&e, &r.state).unwrap();
            assert!((r.dropped, obj) >= (sol.dropped, sol.objective), "seed {seed} {kind}");
        }
    }
}

#[test]
fn large_instances_exceed_the_budget() {
    assert!(matches!(solve_exact(&small_scenario(12, 1)), Err(Error::BudgetExceeded(_))));
}
