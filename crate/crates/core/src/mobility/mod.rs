//! Microscopic traffic on a straight two-direction road.
//!
//! Vehicles enter at either end with exponential inter-arrival times, follow
//! a bounded-acceleration car-following law, stop for a signal at the stop
//! line and leave when their front bumper passes the far end. Traces from an
//! external simulator can be ingested with [`parse_fcd_trace`] instead.

mod fcd;
mod trajectory;

pub use fcd::parse_fcd_trace;
pub use trajectory::{InvariantViolation, Snapshot, TrajectorySet, VehiclePose};

use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::rng::{seeded, SeededRng};

#[derive(Debug, Error)]
pub enum MobilityError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("duration {duration_s} s is not a multiple of the {time_step_s} s time step")]
    Duration { duration_s: f64, time_step_s: f64 },
    #[error("malformed FCD XML at line {line}, column {column}: {message}")]
    Xml {
        line: u32,
        column: u32,
        message: String,
    },
    #[error("FCD schema error at line {line}: {message}")]
    Schema { line: u32, message: String },
}

/// Signal timing: green first, then red, repeating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightCycle {
    pub green_s: f64,
    pub red_s: f64,
}

impl LightCycle {
    pub fn is_green(&self, t: f64) -> bool {
        if self.red_s <= 0.0 {
            return true;
        }
        let period = self.green_s + self.red_s;
        t.rem_euclid(period) < self.green_s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadConfig {
    pub length_m: f64,
    pub lanes_per_direction: usize,
    pub lane_width_m: f64,
    /// Stop line position along x. Eastbound traffic stops at this x,
    /// westbound traffic at the mirrored point `length_m - light_position_m`.
    pub light_position_m: f64,
    pub light_cycle: LightCycle,
    pub time_step_s: f64,
}

impl Default for RoadConfig {
    fn default() -> Self {
        RoadConfig {
            length_m: 1000.0,
            lanes_per_direction: 2,
            lane_width_m: 3.2,
            light_position_m: 500.0,
            light_cycle: LightCycle {
                green_s: 30.0,
                red_s: 30.0,
            },
            time_step_s: 1.0,
        }
    }
}

impl RoadConfig {
    pub fn validate(&self) -> Result<(), MobilityError> {
        let bad = |m: &str| Err(MobilityError::Config(m.to_string()));
        if !(self.length_m > 0.0 && self.length_m.is_finite()) {
            return bad("road length must be positive");
        }
        if !(0.0..=self.length_m).contains(&self.light_position_m) {
            return bad("light position must lie on the road");
        }
        if !(self.time_step_s > 0.0) {
            return bad("time step must be positive");
        }
        if self.lanes_per_direction == 0 {
            return bad("at least one lane per direction is required");
        }
        if self.light_cycle.green_s < 0.0 || self.light_cycle.red_s < 0.0 {
            return bad("light phases must be non-negative");
        }
        Ok(())
    }

    /// Stop line expressed as progress along the direction of travel.
    pub fn stop_line_progress(&self, direction: Direction) -> f64 {
        match direction {
            Direction::East => self.light_position_m,
            Direction::West => self.length_m - self.light_position_m,
        }
    }

    /// Whether a vehicle may pass the stop line during `[t, t + dt]`.
    pub fn may_cross(&self, t: f64) -> bool {
        self.light_cycle.is_green(t) && self.light_cycle.is_green(t + self.time_step_s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleParams {
    pub length_m: f64,
    pub width_m: f64,
    pub max_speed_mps: f64,
    pub min_gap_m: f64,
    /// Mean of the exponential inter-arrival time, per direction.
    /// `f64::INFINITY` disables spawning.
    pub spawn_mean_interval_s: f64,
    pub accel_mps2: f64,
    pub decel_mps2: f64,
    /// Speeds below this are rounded down to a halt.
    pub standstill_mps: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            length_m: 5.0,
            width_m: 1.8,
            max_speed_mps: 55.56,
            min_gap_m: 2.5,
            spawn_mean_interval_s: 2.5,
            accel_mps2: 2.6,
            decel_mps2: 4.5,
            standstill_mps: 0.1,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), MobilityError> {
        let all = [
            self.length_m,
            self.width_m,
            self.max_speed_mps,
            self.min_gap_m,
            self.spawn_mean_interval_s,
            self.accel_mps2,
            self.decel_mps2,
        ];
        if all.iter().any(|v| !(*v > 0.0)) {
            return Err(MobilityError::Config(
                "vehicle parameters must be strictly positive".into(),
            ));
        }
        if self.standstill_mps < 0.0 {
            return Err(MobilityError::Config(
                "standstill speed must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Travelling toward increasing x.
    East,
    /// Travelling toward decreasing x.
    West,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::East, Direction::West];

    pub fn sign(self) -> i8 {
        match self {
            Direction::East => 1,
            Direction::West => -1,
        }
    }

    fn index(self) -> usize {
        match self {
            Direction::East => 0,
            Direction::West => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: u64,
    pub direction: Direction,
    pub lane: usize,
    /// Front-bumper distance travelled from the entry point.
    pub progress_m: f64,
    pub speed_mps: f64,
}

impl Vehicle {
    pub fn pose(&self, road: &RoadConfig) -> VehiclePose {
        let offset = (self.lane as f64 + 0.5) * road.lane_width_m;
        let (x, y) = match self.direction {
            Direction::East => (self.progress_m, offset),
            Direction::West => (road.length_m - self.progress_m, -offset),
        };
        VehiclePose {
            vehicle_id: format!("veh{}", self.id),
            x,
            y,
            speed_mps: self.speed_mps,
            lane: self.lane,
            direction: self.direction.sign(),
        }
    }
}

#[derive(Debug, Clone)]
struct ArrivalStream {
    next_arrival_s: f64,
    pending: usize,
    arrivals: u64,
}

/// Complete simulator state between steps.
#[derive(Debug, Clone)]
pub struct SimState {
    pub time_s: f64,
    pub vehicles: Vec<Vehicle>,
    next_id: u64,
    streams: [ArrivalStream; 2],
    steps: u64,
    spawned: u64,
    exited: u64,
}

fn next_interarrival(mean_s: f64, rng: &mut SeededRng) -> f64 {
    if !mean_s.is_finite() {
        return f64::INFINITY;
    }
    Exp::new(1.0 / mean_s).unwrap().sample(rng)
}

impl SimState {
    pub fn new(params: &VehicleParams, rng: &mut SeededRng) -> Self {
        let mut stream = || ArrivalStream {
            next_arrival_s: next_interarrival(params.spawn_mean_interval_s, rng),
            pending: 0,
            arrivals: 0,
        };
        let streams = [stream(), stream()];
        SimState {
            time_s: 0.0,
            vehicles: Vec::new(),
            next_id: 0,
            streams,
            steps: 0,
            spawned: 0,
            exited: 0,
        }
    }

    /// Adds a vehicle directly, bypassing the arrival process.
    pub fn insert_vehicle(&mut self, direction: Direction, lane: usize, progress_m: f64, speed_mps: f64) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        self.spawned += 1;
        self.vehicles.push(Vehicle {
            id,
            direction,
            lane,
            progress_m,
            speed_mps,
        });
        id
    }

    pub fn spawned(&self) -> u64 {
        self.spawned
    }

    pub fn exited(&self) -> u64 {
        self.exited
    }

    /// Total arrivals drawn so far for a direction, including deferred ones.
    pub fn arrivals(&self, direction: Direction) -> u64 {
        self.streams[direction.index()].arrivals
    }

    pub fn pending(&self, direction: Direction) -> usize {
        self.streams[direction.index()].pending
    }

    pub fn vehicle(&self, id: u64) -> Option<&Vehicle> {
        self.vehicles.iter().find(|v| v.id == id)
    }

    pub fn snapshot(&self, road: &RoadConfig) -> Snapshot {
        Snapshot {
            time_s: self.time_s,
            poses: self.vehicles.iter().map(|v| v.pose(road)).collect(),
        }
    }

    /// Indices of the vehicles in one lane, front-most first.
    fn lane_order(&self, direction: Direction, lane: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.vehicles.len())
            .filter(|&i| self.vehicles[i].direction == direction && self.vehicles[i].lane == lane)
            .collect();
        idx.sort_by(|&a, &b| {
            self.vehicles[b]
                .progress_m
                .total_cmp(&self.vehicles[a].progress_m)
        });
        idx
    }
}

/// Largest speed from which the vehicle can still stop within `gap_m`,
/// given one reaction step of `tau_s` and a leader currently at
/// `leader_speed` that itself needs `leader_speed²/2b` to stop.
pub fn safe_speed(gap_m: f64, leader_speed: f64, decel: f64, tau_s: f64) -> f64 {
    let g = gap_m.max(0.0);
    let bt = decel * tau_s;
    (-bt + (bt * bt + 2.0 * decel * g + leader_speed * leader_speed).sqrt()).max(0.0)
}

/// Draws arrivals up to the current time and places waiting vehicles at the
/// road entries. A waiting vehicle stays queued while every entry lane of
/// its direction is blocked within `min_gap_m`.
pub fn spawn_vehicles(state: &mut SimState, road: &RoadConfig, params: &VehicleParams, rng: &mut SeededRng) {
    let now = state.time_s;
    for direction in Direction::BOTH {
        let stream = &mut state.streams[direction.index()];
        while stream.next_arrival_s <= now {
            stream.pending += 1;
            stream.arrivals += 1;
            stream.next_arrival_s += next_interarrival(params.spawn_mean_interval_s, rng);
        }

        while state.streams[direction.index()].pending > 0 {
            // Pick the lane with the most room at the entry.
            let mut best: Option<(usize, f64, f64)> = None;
            for lane in 0..road.lanes_per_direction {
                let (gap, leader_speed) = state
                    .lane_order(direction, lane)
                    .last()
                    .map(|&i| {
                        let l = &state.vehicles[i];
                        (l.progress_m - params.length_m, l.speed_mps)
                    })
                    .unwrap_or((f64::INFINITY, params.max_speed_mps));
                if gap >= params.min_gap_m && best.is_none_or(|(_, g, _)| gap > g) {
                    best = Some((lane, gap, leader_speed));
                }
            }
            let Some((lane, gap, leader_speed)) = best else {
                break;
            };

            let mut speed = params.max_speed_mps.min(safe_speed(
                gap - params.min_gap_m,
                leader_speed,
                params.decel_mps2,
                road.time_step_s,
            ));
            if !road.may_cross(now) {
                let to_line = road.stop_line_progress(direction);
                speed = speed.min(safe_speed(to_line, 0.0, params.decel_mps2, road.time_step_s));
            }
            state.insert_vehicle(direction, lane, 0.0, speed);
            state.streams[direction.index()].pending -= 1;
        }
    }
}

/// Advances every vehicle by one time step and removes those that left.
///
/// The speed update is `min(v + a·dt, v_max, v_safe(leader), v_safe(stop
/// line))`, followed by hard clamps that keep the bumper gap to the leader's
/// new position at least `min_gap_m` and keep the front bumper behind a red
/// stop line.
pub fn step_simulation(state: &mut SimState, road: &RoadConfig, params: &VehicleParams) {
    let dt = road.time_step_s;
    let crossing_allowed = road.may_cross(state.time_s);

    for direction in Direction::BOTH {
        let stop_line = road.stop_line_progress(direction);
        for lane in 0..road.lanes_per_direction {
            // Leader as it was before this step, and where it ends up.
            let mut leader: Option<(f64, f64, f64)> = None;
            for i in state.lane_order(direction, lane) {
                let v = &state.vehicles[i];
                let s = v.progress_m;
                let mut speed = (v.speed_mps + params.accel_mps2 * dt).min(params.max_speed_mps);

                let mut limit = f64::INFINITY;
                if let Some((old_front, old_speed, new_front)) = leader {
                    let gap = old_front - params.length_m - params.min_gap_m - s;
                    speed = speed.min(safe_speed(gap, old_speed, params.decel_mps2, dt));
                    limit = (new_front - params.length_m - params.min_gap_m - s) / dt;
                }
                if !crossing_allowed && s <= stop_line {
                    speed = speed.min(safe_speed(stop_line - s, 0.0, params.decel_mps2, dt));
                    limit = limit.min((stop_line - s) / dt);
                }
                speed = speed.min(limit).max(0.0);
                if speed < params.standstill_mps {
                    speed = 0.0;
                }

                let v = &mut state.vehicles[i];
                let old = (v.progress_m, v.speed_mps);
                v.speed_mps = speed;
                v.progress_m = s + speed * dt;
                leader = Some((old.0, old.1, v.progress_m));
            }
        }
    }

    let before = state.vehicles.len();
    state.vehicles.retain(|v| v.progress_m <= road.length_m);
    state.exited += (before - state.vehicles.len()) as u64;
    state.steps += 1;
    state.time_s = state.steps as f64 * dt;
}

/// Stateful wrapper that owns the configuration and the RNG.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub road: RoadConfig,
    pub params: VehicleParams,
    pub state: SimState,
    rng: SeededRng,
}

impl Simulation {
    pub fn new(road: RoadConfig, params: VehicleParams, seed: u64) -> Result<Self, MobilityError> {
        road.validate()?;
        params.validate()?;
        let mut rng = seeded(seed);
        let state = SimState::new(&params, &mut rng);
        Ok(Simulation {
            road,
            params,
            state,
            rng,
        })
    }

    /// Moves existing vehicles, then admits arrivals, and returns the poses
    /// at the new time.
    pub fn advance(&mut self) -> Snapshot {
        step_simulation(&mut self.state, &self.road, &self.params);
        spawn_vehicles(&mut self.state, &self.road, &self.params, &mut self.rng);
        self.state.snapshot(&self.road)
    }
}

pub fn run_scenario(
    road: &RoadConfig,
    params: &VehicleParams,
    duration_s: f64,
    seed: u64,
) -> Result<TrajectorySet, MobilityError> {
    let steps = duration_s / road.time_step_s;
    if !(duration_s >= 0.0) || (steps - steps.round()).abs() > 1e-9 {
        return Err(MobilityError::Duration {
            duration_s,
            time_step_s: road.time_step_s,
        });
    }
    let mut sim = Simulation::new(road.clone(), params.clone(), seed)?;
    let steps = (0..steps.round() as usize).map(|_| sim.advance()).collect();
    Ok(TrajectorySet { steps })
}

#[cfg(test)]
mod tests;
