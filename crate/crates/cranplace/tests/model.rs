use proptest::prelude::*;

use cranplace::experiments::presets::small_scenario;
use cranplace::io::{load_scenario, save_scenario, ScenarioFile};
use cranplace::model::{capacity_fits, CapacityVector, NodeKind};
use cranplace::topology::{build_topology, default_core_routers, TopologyParams};

fn cap() -> impl Strategy<Value = CapacityVector> {
    (0.0f64..100.0, 0.0f64..100.0, 0.0f64..100.0).prop_map(|(a, b, c)| CapacityVector::new(a, b, c))
}

proptest! {
    #[test]
    fn fit_survives_more_residual(d in cap(), r in cap(), extra in cap(), deg in 0.0f64..0.99) {
        if capacity_fits(&d, &r, deg) {
            prop_assert!(capacity_fits(&d, &r.add(&extra), deg));
        }
    }

    #[test]
    fn demand_always_fits_itself(d in cap(), deg in 0.0f64..0.99) {
        prop_assert!(capacity_fits(&d, &d, deg));
    }

    #[test]
    fn generated_topologies_respect_node_roles(n_bs in 1usize..40, fan in 1usize..12, clouds in 1usize..6) {
        let p = TopologyParams::default();
        prop_assume!(clouds <= default_core_routers(n_bs));
        let t = build_topology(n_bs, clouds, fan, &p).unwrap();
        prop_assert_eq!(t.base_stations().len(), n_bs);
        prop_assert_eq!(t.clouds().len(), clouds);
        for n in t.nodes() {
            match n.kind {
                NodeKind::BaseStation => prop_assert!(n.capacity.is_zero() && n.traffic >= 0.0),
                NodeKind::Router => prop_assert!(n.capacity.is_zero() && n.traffic == 0.0),
                NodeKind::Cloud => prop_assert!(n.traffic == 0.0 && n.service_rate > 0.0),
            }
        }
        for l in t.links() {
            let access = t.node(l.src).kind == NodeKind::BaseStation || t.node(l.dst).kind == NodeKind::BaseStation;
            prop_assert_eq!(l.ignored_for_load, access);
        }
        // identical inputs give an identical graph
        prop_assert_eq!(&t, &build_topology(n_bs, clouds, fan, &p).unwrap());
    }
}

#[test]
fn scenario_file_round_trips() {
    let dir = std::env::temp_dir().join(format!("cranplace-model-{}", std::process::id()));
    let path = dir.join("s.toml");
    let file = ScenarioFile {
        scenario: small_scenario(12, 3),
        generator: None,
    };
    save_scenario(&path, &file).unwrap();
    let back = load_scenario(&path).unwrap();
    std::fs::remove_dir_all(&dir).unwrap();
    assert_eq!(back, file);
}

#[test]
fn malformed_scenario_is_rejected() {
    let dir = std::env::temp_dir().join(format!("cranplace-model-bad-{}", std::process::id()));
    let path = dir.join("s.toml");
    let mut file = ScenarioFile {
        scenario: small_scenario(3, 3),
        generator: None,
    };
    file.scenario.requests[1].origin = file.scenario.topology.clouds()[0];
    save_scenario(&path, &file).unwrap();
    let err = load_scenario(&path);
    std::fs::remove_dir_all(&dir).unwrap();
    assert!(err.is_err());
}
