#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rhythm::crypto::CryptoProfile;
use rhythm::protocol::{Position, ProtocolConfig};
use rhythm::sim::mobility::{NeighborGraph, RandomWaypoint};
use rhythm::sim::{ExhaustedSpec, MobilityConfig, Preload, Revocation, Scenario};
use rhythm::vpki::{CoverageWindow, ReachabilityConfig};

/// A mobile scenario exercising reachability changes, attackers, stale
/// grids, loss and revocation, with CAM tracing on.
pub fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let population = rng.gen_range(10..=30);
    let tau = [30.0, 60.0][rng.gen_range(0..2)];
    let gamma = tau * rng.gen_range(2..=4) as f64;
    let duration = gamma * rng.gen_range(2..=3) as f64 + rng.gen_range(0..60) as f64;
    let side = rng.gen_range(500.0..1000.0);
    let reachability = match rng.gen_range(0..3) {
        0 => ReachabilityConfig::DisconnectedFraction { p: rng.gen_range(0.05..0.3), outage: None },
        1 => {
            let start = rng.gen_range(0.0..duration / 2.0);
            ReachabilityConfig::Outage { start_s: start, end_s: start + rng.gen_range(gamma..duration) }
        }
        _ => ReachabilityConfig::Coverage {
            windows: (0..rng.gen_range(1..4))
                .map(|_| {
                    let start = rng.gen_range(0.0..duration);
                    CoverageWindow {
                        start_s: start,
                        end_s: start + rng.gen_range(10.0..gamma),
                        vehicles: rng.gen_bool(0.5).then(|| (0..population as u32).filter(|_| rng.gen_bool(0.5)).collect()),
                    }
                })
                .collect(),
        },
    };
    let exhausted = if rng.gen_bool(0.5) {
        ExhaustedSpec::Unreachable
    } else {
        ExhaustedSpec::Fraction(rng.gen_range(0.0..0.2))
    };
    let pick = |rng: &mut ChaCha8Rng, p: f64| -> Vec<u32> {
        if rng.gen_bool(p) {
            vec![rng.gen_range(0..population as u32)]
        } else {
            Vec::new()
        }
    };
    let clogging_attackers = pick(&mut rng, 0.3);
    let stale_grid_vehicles = pick(&mut rng, 0.3);
    let revocations = pick(&mut rng, 0.2)
        .into_iter()
        .map(|vehicle| Revocation { vehicle, at_s: rng.gen_range(0.0..duration) })
        .collect();
    Scenario {
        population,
        duration_s: duration,
        gamma_s: gamma,
        tau_p_s: tau,
        r: rng.gen_range(0.0..=1.0),
        beacon_hz: [2.0, 5.0, 10.0][rng.gen_range(0..3)],
        range_m: rng.gen_range(200.0..400.0),
        mobility: MobilityConfig::RandomWaypoint(RandomWaypoint {
            area_m: [side, side],
            speed_mps: [5.0, 20.0],
            pause_s: rng.gen_range(0.0..10.0),
        }),
        reachability,
        exhausted,
        preload: if rng.gen_bool(0.5) { Preload::Gamma } else { Preload::Slots(rng.gen_range(1..6)) },
        never_join: rng.gen_range(0..=2),
        clogging_attackers,
        stale_grid_vehicles,
        revocations,
        loss_probability: if rng.gen_bool(0.3) { rng.gen_range(0.0..0.2) } else { 0.0 },
        protocol: ProtocolConfig {
            max_hops: rng.gen_bool(0.3).then(|| rng.gen_range(1..5)),
            keep_switching_after_refill: rng.gen_bool(0.7),
        },
        trace_cams: true,
        seed,
        ..Scenario::default()
    }
}

/// Static connected layout, VPKI unreachable for everyone, a single
/// exhausted initiator, no crypto or probe latency.
pub fn epidemic_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xE91D);
    let population = rng.gen_range(8..=40);
    let range = 250.0;
    let positions = loop {
        let side = rng.gen_range(400.0..1200.0);
        let ps: Vec<[f64; 2]> =
            (0..population).map(|_| [rng.gen_range(0.0..side), rng.gen_range(0.0..side)]).collect();
        let pos: Vec<Position> = ps.iter().map(|p| Position::new(p[0], p[1])).collect();
        if NeighborGraph::from_positions(&pos, range).is_connected() {
            break ps;
        }
    };
    Scenario {
        population,
        duration_s: 120.0,
        gamma_s: 60.0,
        tau_p_s: 30.0,
        r: rng.gen_range(0.0..=1.0),
        range_m: range,
        mobility: MobilityConfig::Static { positions },
        reachability: ReachabilityConfig::Outage { start_s: 0.0, end_s: 1e9 },
        exhausted: ExhaustedSpec::Vehicles(vec![rng.gen_range(0..population as u32)]),
        preload: Preload::Run,
        crypto_profile: CryptoProfile::zero(),
        probe_timeout_ms: 0,
        trace_cams: true,
        seed,
        ..Scenario::default()
    }
}

