use cranplace::des::{simulate_queue, simulate_tandem, Discipline};
use cranplace::queueing::{md1_delay, QueueLoad};
use cranplace::Error;

const GB: f64 = 1e9;

#[test]
fn same_seed_same_result() {
    for d in [Discipline::MM1, Discipline::MD1] {
        let a = simulate_queue(d, QueueLoad::new(0.7, 2.0), 50_000, GB, 17).unwrap();
        let b = simulate_queue(d, QueueLoad::new(0.7, 2.0), 50_000, GB, 17).unwrap();
        assert_eq!(a, b);
        let c = simulate_queue(d, QueueLoad::new(0.7, 2.0), 50_000, GB, 18).unwrap();
        assert_ne!(a.mean_sojourn, c.mean_sojourn);
    }
}

#[test]
fn littles_law_holds() {
    for d in [Discipline::MM1, Discipline::MD1] {
        for rho in [0.3, 0.5, 0.8] {
            let r = simulate_queue(d, QueueLoad::new(rho, 1.0), 1_000_000, GB, 4).unwrap();
            assert!(r.little_gap() < 0.02, "{d} rho {rho}: gap {}", r.little_gap());
            assert!(r.ci95_halfwidth >= 0.0 && r.packets_served > 0);
        }
    }
}

#[test]
fn large_buffer_never_drops() {
    for d in [Discipline::MM1, Discipline::MD1] {
        let r = simulate_queue(d, QueueLoad::new(0.9, 1.0), 200_000, GB, 8).unwrap();
        assert_eq!(r.drops, 0);
    }
}

#[test]
fn tandem_of_one_equals_single_queue() {
    let q = QueueLoad::new(0.5, 1.0);
    let a = simulate_tandem(&[q], Discipline::MD1, 20_000, 3).unwrap();
    let b = simulate_queue(Discipline::MD1, q, 20_000, f64::INFINITY, 3).unwrap();
    assert_eq!(a, b);
}

#[test]
fn exponential_tandem_sums_hop_delays() {
    // Poisson departures feed the second queue, so the per-hop sum is exact
    let q = QueueLoad::new(0.5, 1.0);
    let r = simulate_tandem(&[q, q], Discipline::MM1, 1_000_000, 6).unwrap();
    assert!((r.mean_sojourn - 4.0).abs() / 4.0 < 0.03, "{}", r.mean_sojourn);
}

#[test]
fn deterministic_tandem_stays_below_hop_sum() {
    // equal deterministic servers: packets leave the first queue at least one
    // service time apart, so the second never waits
    let q = QueueLoad::new(0.5, 1.0);
    let r = simulate_tandem(&[q, q], Discipline::MD1, 1_000_000, 6).unwrap();
    let sum = 2.0 * md1_delay(q).unwrap();
    assert_eq!(sum, 3.0);
    assert!((r.mean_sojourn - 2.5).abs() / 2.5 < 0.01, "{}", r.mean_sojourn);
    assert!(r.mean_sojourn < sum);
}

#[test]
fn idle_tandem_is_pure_service_time() {
    let qs = [QueueLoad::new(0.0, 2.0), QueueLoad::new(0.0, 4.0), QueueLoad::new(0.0, 8.0)];
    let r = simulate_tandem(&qs, Discipline::MD1, 1000, 1).unwrap();
    assert_eq!(r.mean_sojourn, 0.875);
}

#[test]
fn unstable_tandem_is_rejected() {
    let qs = [QueueLoad::new(0.5, 1.0), QueueLoad::new(2.0, 1.0)];
    assert!(matches!(
        simulate_tandem(&qs, Discipline::MM1, 1000, 1),
        Err(Error::StabilityViolation { .. })
    ));
}
