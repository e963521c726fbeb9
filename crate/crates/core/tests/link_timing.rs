use driftnet::ids::{MessageId, NodeId};
use driftnet::link::{connected_pairs, InterfaceSpec, Links, SpatialIndex};
use driftnet::map::Point;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ticks_to_finish(size: u64, speed: u64, tick: f64) -> u64 {
    let iface = InterfaceSpec {
        transmit_speed: speed,
        range: 100.0,
    };
    let mut links = Links::new(2, tick, SpatialIndex::Never);
    links.update_connectivity(&[Point::new(0.0, 0.0), Point::new(10.0, 0.0)], &[iface, iface], 0.0);
    links
        .begin_transfer(NodeId(0), NodeId(1), MessageId("M1".into()), size, 0.0)
        .unwrap();
    let mut n = 0;
    loop {
        n += 1;
        if !links.progress_transfers().is_empty() {
            return n;
        }
    }
}

#[test]
fn completion_tick_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let size = rng.gen_range(1..3_000_000u64);
        let speed = rng.gen_range(10_000..500_000u64);
        // tick as an exact fraction so the byte budget is computed without floats
        let (num, den) = [(1, 10), (1, 4), (1, 2), (1, 1)][rng.gen_range(0..4)];
        let tick = num as f64 / den as f64;
        let per_tick = speed * num / den;
        assert_eq!(ticks_to_finish(size, speed, tick), size.div_ceil(per_tick), "{size} {speed} {tick}");
    }
}

#[test]
fn bluetooth_profiles() {
    assert_eq!(ticks_to_finish(250_000, 250_000, 0.1), 10);
    assert_eq!(ticks_to_finish(2_400_000, 125_000, 0.1), 192);
}

#[test]
fn grid_index_matches_pairwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for round in 0..30 {
        let n = rng.gen_range(2..500);
        let positions: Vec<Point> = (0..n)
            .map(|_| Point::new(rng.gen_range(-2000.0..2000.0), rng.gen_range(-2000.0..2000.0)))
            .collect();
        let ifaces: Vec<InterfaceSpec> = (0..n)
            .map(|_| InterfaceSpec {
                transmit_speed: 1000,
                range: rng.gen_range(10.0..300.0),
            })
            .collect();
        assert_eq!(
            connected_pairs(&positions, &ifaces, true),
            connected_pairs(&positions, &ifaces, false),
            "round {round}"
        );
    }
}

#[test]
fn link_drop_aborts_transfer() {
    let iface = InterfaceSpec::BLUETOOTH5;
    let mut links = Links::new(2, 0.1, SpatialIndex::Auto);
    let near = [Point::new(0.0, 0.0), Point::new(150.0, 0.0)];
    let far = [Point::new(0.0, 0.0), Point::new(250.0, 0.0)];
    links.update_connectivity(&near, &[iface, iface], 0.0);
    links
        .begin_transfer(NodeId(0), NodeId(1), MessageId("M1".into()), 1_000_000, 0.0)
        .unwrap();
    links.progress_transfers();
    let changes = links.update_connectivity(&far, &[iface, iface], 0.1);
    assert_eq!(changes.aborted.len(), 1);
    assert!(!links.is_sending(NodeId(0)));
    assert_eq!(links.in_flight(), 0);
}
