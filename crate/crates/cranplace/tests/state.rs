use proptest::prelude::*;
use std::collections::BTreeMap;

use cranplace::experiments::presets::small_scenario;
use cranplace::model::CapacityVector;
use cranplace::state::{Engine, InstanceOrder, PlacementState, Slot};
use cranplace::Error;

/// Residuals and loads rebuilt from the live allocations alone.
fn assert_matches_recomputation(e: &Engine, st: &PlacementState) {
    let t = e.topology();
    let mut link = vec![0.0; t.links().len()];
    let mut cloud_load: BTreeMap<usize, f64> = e.clouds.iter().map(|&c| (c, 0.0)).collect();
    let mut used: BTreeMap<u64, CapacityVector> = BTreeMap::new();
    for a in st.allocations.values() {
        for &l in &e.table.path(a.path).links {
            if !t.link(l).ignored_for_load {
                link[l] += a.rate;
            }
        }
        *cloud_load.get_mut(&a.cloud).unwrap() += a.rate;
        let u = used.entry(a.instance).or_default();
        *u = u.add(&a.consumed);
    }
    for (l, (&got, want)) in st.link_load.iter().zip(&link).enumerate() {
        assert!((got - want).abs() <= 1e-9 * want.max(1.0), "link {l}: {got} vs {want}");
    }
    for (c, want) in &cloud_load {
        assert!((st.cloud_load[c] - want).abs() <= 1e-9 * want.max(1.0));
    }
    for (id, vm) in &st.instances {
        let cap = e.scenario.vm_catalog[vm.vm_type].capacity;
        assert_eq!(vm.residual, cap.sub(&used[id]), "instance {id}");
    }
    for &c in &e.clouds {
        let hosted = st
            .instances
            .values()
            .filter(|vm| vm.cloud == c)
            .fold(CapacityVector::ZERO, |s, vm| s.add(&e.scenario.vm_catalog[vm.vm_type].capacity));
        assert_eq!(st.residual_cloud[&c], t.node(c).capacity.sub(&hosted));
    }
    // no empty instance is kept alive
    assert!(st.instances.values().all(|vm| vm.assigned > 0));
}

fn admit(e: &Engine, st: &mut PlacementState, i: usize) -> bool {
    let r = e.requests()[i].clone();
    for x in e.lists.get(r.bs).to_vec() {
        if e.admissible(st, &r, x.path).is_none() {
            continue;
        }
        let slot = e
            .find_instance(st, &r, x.cloud, InstanceOrder::Ascending)
            .map(Slot::Existing)
            .or_else(|| e.launch_type(st, &r, x.cloud).map(Slot::New));
        if let Some(slot) = slot {
            e.commit(st, &r, x.path, slot);
            return true;
        }
    }
    false
}

#[test]
fn release_twice_is_an_error() {
    let sc = small_scenario(4, 2);
    let e = Engine::new(&sc).unwrap();
    let mut st = e.new_state();
    assert!(admit(&e, &mut st, 0));
    let id = e.requests()[0].id;
    e.release(&mut st, id).unwrap();
    assert_eq!(e.release(&mut st, id), Err(Error::UnknownRequest(id)));
    assert_eq!(e.release(&mut st, 999), Err(Error::UnknownRequest(999)));
}

#[test]
fn admit_then_release_restores_snapshot() {
    let sc = small_scenario(20, 4);
    let e = Engine::new(&sc).unwrap();
    let mut st = e.new_state();
    for i in 0..10 {
        admit(&e, &mut st, i);
    }
    let before = st.clone();
    let counters = e.counters(&st);
    assert!(admit(&e, &mut st, 10));
    e.release(&mut st, e.requests()[10].id).unwrap();
    e.reset_counters(&mut st, counters);
    assert_eq!(st, before);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn interleavings_match_recomputation(seed in 0u64..1000, ops in prop::collection::vec((any::<bool>(), 0usize..30), 1..80)) {
        let sc = small_scenario(30, seed);
        let e = Engine::new(&sc).unwrap();
        let mut st = e.new_state();
        for (add, i) in ops {
            let id = e.requests()[i].id;
            if add && !st.allocations.contains_key(&id) {
                admit(&e, &mut st, i);
            } else if !add && st.allocations.contains_key(&id) {
                e.release(&mut st, id).unwrap();
            }
            assert_matches_recomputation(&e, &st);
        }
    }
}
