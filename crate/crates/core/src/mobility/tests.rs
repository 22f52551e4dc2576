use std::collections::HashMap;

use super::*;

fn always_red() -> RoadConfig {
    RoadConfig {
        light_cycle: LightCycle {
            green_s: 0.0,
            red_s: 1.0e9,
        },
        ..RoadConfig::default()
    }
}

fn no_spawn() -> VehicleParams {
    VehicleParams {
        spawn_mean_interval_s: f64::INFINITY,
        ..VehicleParams::default()
    }
}

fn empty_state(params: &VehicleParams) -> SimState {
    SimState::new(params, &mut seeded(0))
}

#[test]
fn free_flow_advances_by_speed() {
    let road = RoadConfig::default();
    let params = no_spawn();
    let mut state = empty_state(&params);
    let v = params.max_speed_mps;
    let id = state.insert_vehicle(Direction::East, 0, 100.0, v);
    // t = 0 is green under the default cycle
    step_simulation(&mut state, &road, &params);
    let veh = state.vehicle(id).unwrap();
    assert_eq!(veh.progress_m, 100.0 + v * road.time_step_s);
    assert_eq!(veh.speed_mps, v);
}

/// Hand replay of the braking law for a lone vehicle approaching a red stop
/// line: v' = min(v + a, v_max, -b + sqrt(b² + 2·b·g), g), halting below
/// the standstill speed.
fn braking_oracle(mut gap: f64, mut v: f64, steps: usize) -> Vec<(f64, f64)> {
    let (a, b, vmax) = (2.6, 4.5, 55.56);
    let mut out = Vec::new();
    for _ in 0..steps {
        let mut next = (v + a).min(vmax);
        next = next.min(-b + (b * b + 2.0 * b * gap).sqrt());
        next = next.min(gap);
        if next < 0.1 {
            next = 0.0;
        }
        gap -= next;
        v = next;
        out.push((gap, v));
    }
    out
}

#[test]
fn red_light_stop_matches_braking_replay() {
    let road = always_red();
    let params = no_spawn();
    let mut state = empty_state(&params);
    let line = road.stop_line_progress(Direction::East);
    let id = state.insert_vehicle(Direction::East, 0, line - 10.0, 20.0);

    let oracle = braking_oracle(10.0, 20.0, 8);
    // First two steps by hand: sqrt(20.25 + 90) = 10.5, sqrt(20.25 + 36) = 7.5.
    assert_eq!(oracle[0].1, 6.0);
    assert_eq!(oracle[1].1, 3.0);

    for (gap, speed) in oracle {
        step_simulation(&mut state, &road, &params);
        let veh = state.vehicle(id).unwrap();
        assert!((line - veh.progress_m - gap).abs() < 1e-12);
        assert_eq!(veh.speed_mps, speed);
        assert!(veh.progress_m <= line);
    }
    assert_eq!(state.vehicle(id).unwrap().speed_mps, 0.0);
}

#[test]
fn follower_keeps_min_gap_behind_stopped_leader() {
    let road = always_red();
    let params = no_spawn();
    let mut state = empty_state(&params);
    let line = road.stop_line_progress(Direction::East);
    let leader = state.insert_vehicle(Direction::East, 1, line, 0.0);
    let follower = state.insert_vehicle(Direction::East, 1, 50.0, 40.0);
    for _ in 0..120 {
        step_simulation(&mut state, &road, &params);
        let l = state.vehicle(leader).unwrap().progress_m;
        let f = state.vehicle(follower).unwrap().progress_m;
        assert!(l - params.length_m - f >= params.min_gap_m - 1e-9);
    }
    let f = state.vehicle(follower).unwrap();
    assert_eq!(f.speed_mps, 0.0);
    let gap = line - params.length_m - f.progress_m;
    assert!((2.5..3.0).contains(&gap), "final gap {gap}");
}

#[test]
fn arrivals_have_configured_mean() {
    let road = RoadConfig::default();
    let params = VehicleParams::default();
    let mut sim = Simulation::new(road, params, 11).unwrap();
    for _ in 0..10_000 {
        sim.advance();
    }
    for d in Direction::BOTH {
        let mean = 10_000.0 / sim.state.arrivals(d) as f64;
        assert!((2.3..=2.7).contains(&mean), "{d:?} mean inter-arrival {mean}");
    }
}

#[test]
fn blocked_entry_defers_spawn() {
    let road = RoadConfig::default();
    let params = VehicleParams {
        spawn_mean_interval_s: 0.01,
        ..VehicleParams::default()
    };
    let mut rng = seeded(3);
    let mut state = SimState::new(&params, &mut rng);
    // Stopped vehicles whose rear bumpers sit 1 m past both entries.
    state.insert_vehicle(Direction::East, 0, 6.0, 0.0);
    state.insert_vehicle(Direction::East, 1, 6.0, 0.0);
    state.time_s = 1.0;
    spawn_vehicles(&mut state, &road, &params, &mut rng);
    let east = state
        .vehicles
        .iter()
        .filter(|v| v.direction == Direction::East)
        .count();
    assert_eq!(east, 2);
    assert!(state.pending(Direction::East) > 0);
    // Westbound entries are clear, one vehicle per lane.
    let west = state
        .vehicles
        .iter()
        .filter(|v| v.direction == Direction::West)
        .count();
    assert_eq!(west, road.lanes_per_direction);
}

#[test]
fn infinite_interval_never_spawns() {
    let trace = run_scenario(&RoadConfig::default(), &no_spawn(), 500.0, 1).unwrap();
    assert_eq!(trace.len(), 500);
    assert!(trace.steps.iter().all(|s| s.poses.is_empty()));
}

#[test]
fn zero_duration_is_empty() {
    let trace = run_scenario(&RoadConfig::default(), &VehicleParams::default(), 0.0, 1).unwrap();
    assert!(trace.is_empty());
}

#[test]
fn fractional_duration_rejected() {
    let err = run_scenario(&RoadConfig::default(), &VehicleParams::default(), 2.5, 1);
    assert!(matches!(err, Err(MobilityError::Duration { .. })));
}

#[test]
fn same_seed_same_bytes() {
    let road = RoadConfig::default();
    let params = VehicleParams::default();
    let csv = |seed| {
        let mut buf = Vec::new();
        run_scenario(&road, &params, 300.0, seed)
            .unwrap()
            .write_csv(&mut buf)
            .unwrap();
        buf
    };
    assert_eq!(csv(5), csv(5));
    assert_ne!(csv(5), csv(6));
}

#[test]
fn csv_has_header_and_rows() {
    let trace = run_scenario(&RoadConfig::default(), &VehicleParams::default(), 20.0, 2).unwrap();
    let mut buf = Vec::new();
    trace.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,vehicle_id,x,y,speed,lane,direction"));
    let rows: usize = trace.steps.iter().map(|s| s.poses.len()).sum();
    assert_eq!(lines.count(), rows);
}

#[test]
fn generated_traces_satisfy_invariants() {
    let road = RoadConfig::default();
    let params = VehicleParams::default();
    for seed in 0..3 {
        let trace = run_scenario(&road, &params, 600.0, seed).unwrap();
        trace.validate(&road, &params).unwrap();
    }
}

#[test]
fn validator_catches_tailgating() {
    let road = RoadConfig::default();
    let params = VehicleParams::default();
    let pose = |id: &str, x| VehiclePose {
        vehicle_id: id.into(),
        x,
        y: 1.6,
        speed_mps: 0.0,
        lane: 0,
        direction: 1,
    };
    let trace = TrajectorySet {
        steps: vec![Snapshot {
            time_s: 1.0,
            poses: vec![pose("a", 100.0), pose("b", 93.0)],
        }],
    };
    assert!(matches!(
        trace.validate(&road, &params),
        Err(InvariantViolation::Gap { .. })
    ));
}

/// Vehicles present must equal spawned minus exited at every step, and over
/// the steady-state window the mean occupancy must agree with Little's law
/// (arrival rate times mean time on the road), both read off the trace.
#[test]
fn steady_state_occupancy_matches_littles_law() {
    let road = RoadConfig::default();
    let params = VehicleParams::default();
    let mut sim = Simulation::new(road.clone(), params, 21).unwrap();
    let mut steps = Vec::new();
    for _ in 0..3600 {
        let snap = sim.advance();
        assert_eq!(
            snap.poses.len() as u64,
            sim.state.spawned() - sim.state.exited()
        );
        steps.push(snap);
    }

    let window = 600..3600;
    let mean_count: f64 = steps[window.clone()]
        .iter()
        .map(|s| s.poses.len() as f64)
        .sum::<f64>()
        / window.len() as f64;

    let mut first_last: HashMap<&str, (usize, usize)> = HashMap::new();
    for (i, s) in steps.iter().enumerate() {
        for p in &s.poses {
            first_last
                .entry(p.vehicle_id.as_str())
                .and_modify(|e| e.1 = i)
                .or_insert((i, i));
        }
    }
    // Vehicles that entered and left inside the window.
    let complete: Vec<f64> = first_last
        .values()
        .filter(|(a, b)| *a > window.start && *b < steps.len() - 1)
        .map(|(a, b)| (b - a + 1) as f64)
        .collect();
    let sojourn = complete.iter().sum::<f64>() / complete.len() as f64;
    let entered = first_last
        .values()
        .filter(|(a, _)| window.contains(a))
        .count() as f64;
    let rate = entered / window.len() as f64;
    let little = rate * sojourn;
    let rel = (mean_count - little).abs() / little;
    assert!(rel < 0.1, "mean {mean_count} vs little {little}");
    // Free-flow spacing bound: the road cannot hold more than its jam density.
    let jam = 4.0 * road.length_m / (params_len() + 2.5);
    assert!(mean_count < jam);
}

fn params_len() -> f64 {
    VehicleParams::default().length_m
}
