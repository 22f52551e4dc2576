use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{RoadConfig, VehicleParams};

/// Slack for float round-off when checking geometric invariants.
const GEOMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehiclePose {
    pub vehicle_id: String,
    /// Front bumper along the road.
    pub x: f64,
    /// Lateral lane offset; positive for eastbound lanes.
    pub y: f64,
    pub speed_mps: f64,
    pub lane: usize,
    pub direction: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time_s: f64,
    pub poses: Vec<VehiclePose>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectorySet {
    pub steps: Vec<Snapshot>,
}

#[derive(Debug, Error, PartialEq)]
pub enum InvariantViolation {
    #[error("time {found} at step {step} does not follow {previous} by one time step")]
    Time { step: usize, previous: f64, found: f64 },
    #[error("{vehicle} at t={time_s} is off the road (x = {x})")]
    OffRoad { time_s: f64, vehicle: String, x: f64 },
    #[error("{vehicle} at t={time_s} has speed {speed} outside [0, max]")]
    Speed { time_s: f64, vehicle: String, speed: f64 },
    #[error("{follower} trails {leader} by {gap} m at t={time_s}")]
    Gap {
        time_s: f64,
        leader: String,
        follower: String,
        gap: f64,
    },
    #[error("{vehicle} crossed the stop line during red between t={from_s} and the next step")]
    RedLight { from_s: f64, vehicle: String },
}

impl TrajectorySet {
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    /// Checks time spacing, road bounds, speed bounds, bumper gaps and
    /// stop-line compliance for a trace produced on `road`.
    pub fn validate(&self, road: &RoadConfig, params: &VehicleParams) -> Result<(), InvariantViolation> {
        for (i, pair) in self.steps.windows(2).enumerate() {
            let (prev, next) = (pair[0].time_s, pair[1].time_s);
            if ((next - prev) - road.time_step_s).abs() > 1e-9 {
                return Err(InvariantViolation::Time {
                    step: i + 1,
                    previous: prev,
                    found: next,
                });
            }
        }

        let progress = |p: &VehiclePose| {
            if p.direction >= 0 {
                p.x
            } else {
                road.length_m - p.x
            }
        };

        for snap in &self.steps {
            let mut lanes: HashMap<(i8, usize), Vec<&VehiclePose>> = HashMap::new();
            for p in &snap.poses {
                if p.x < -GEOMETRY_TOL || p.x > road.length_m + GEOMETRY_TOL {
                    return Err(InvariantViolation::OffRoad {
                        time_s: snap.time_s,
                        vehicle: p.vehicle_id.clone(),
                        x: p.x,
                    });
                }
                if !(0.0..=params.max_speed_mps).contains(&p.speed_mps) {
                    return Err(InvariantViolation::Speed {
                        time_s: snap.time_s,
                        vehicle: p.vehicle_id.clone(),
                        speed: p.speed_mps,
                    });
                }
                lanes.entry((p.direction, p.lane)).or_default().push(p);
            }
            for mut lane in lanes.into_values() {
                lane.sort_by(|a, b| progress(b).total_cmp(&progress(a)));
                for pair in lane.windows(2) {
                    let gap = progress(pair[0]) - params.length_m - progress(pair[1]);
                    if gap < params.min_gap_m - GEOMETRY_TOL {
                        return Err(InvariantViolation::Gap {
                            time_s: snap.time_s,
                            leader: pair[0].vehicle_id.clone(),
                            follower: pair[1].vehicle_id.clone(),
                            gap,
                        });
                    }
                }
            }
        }

        for pair in self.steps.windows(2) {
            if road.may_cross(pair[0].time_s) {
                continue;
            }
            let before: HashMap<&str, &VehiclePose> =
                pair[0].poses.iter().map(|p| (p.vehicle_id.as_str(), p)).collect();
            for p in &pair[1].poses {
                let Some(old) = before.get(p.vehicle_id.as_str()) else {
                    continue;
                };
                let line = if p.direction >= 0 {
                    road.light_position_m
                } else {
                    road.length_m - road.light_position_m
                };
                if progress(old) <= line + GEOMETRY_TOL && progress(p) > line + GEOMETRY_TOL {
                    return Err(InvariantViolation::RedLight {
                        from_s: pair[0].time_s,
                        vehicle: p.vehicle_id.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Writes one row per (time, vehicle) with header
    /// `t,vehicle_id,x,y,speed,lane,direction`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "vehicle_id", "x", "y", "speed", "lane", "direction"])?;
        for snap in &self.steps {
            for p in &snap.poses {
                w.write_record([
                    snap.time_s.to_string(),
                    p.vehicle_id.clone(),
                    p.x.to_string(),
                    p.y.to_string(),
                    p.speed_mps.to_string(),
                    p.lane.to_string(),
                    p.direction.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
