//! Band presets, path loss and per-time-step V2I/V2V link sets.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mobility::VehiclePose;
use crate::rng::SeededRng;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Link distances below this are clamped; sub-meter spacing is nonphysical
/// for 5 m vehicles and the log path loss diverges at zero.
pub const MIN_DISTANCE_M: f64 = 1.0;

/// Identifier used for the base station in [`Connection`]s.
pub const BS_ID: &str = "BS";

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("distance must be positive, got {0}")]
    Distance(f64),
    #[error("frequency {freq_hz} Hz outside [{lo_hz}, {hi_hz}]")]
    Frequency { freq_hz: f64, lo_hz: f64, hi_hz: f64 },
    #[error("invalid band configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BandName {
    #[serde(rename = "sub6ghz")]
    Sub6Ghz,
    #[serde(rename = "thz")]
    Thz,
}

impl fmt::Display for BandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BandName::Sub6Ghz => "sub6ghz",
            BandName::Thz => "thz",
        })
    }
}

impl FromStr for BandName {
    type Err = ChannelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sub6ghz" | "sub6" => Ok(BandName::Sub6Ghz),
            "thz" => Ok(BandName::Thz),
            other => Err(ChannelError::Config(format!("unknown band {other:?}"))),
        }
    }
}

/// One piece of the piecewise-constant molecular absorption table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsorptionSegment {
    pub lo_hz: f64,
    pub hi_hz: f64,
    pub db_per_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionTable {
    pub segments: Vec<AbsorptionSegment>,
}

impl Default for AbsorptionTable {
    fn default() -> Self {
        let seg = |lo_hz, hi_hz, db_per_m| AbsorptionSegment {
            lo_hz,
            hi_hz,
            db_per_m,
        };
        AbsorptionTable {
            segments: vec![
                seg(0.1e12, 0.2e12, 0.1),
                seg(0.2e12, 0.4e12, 0.5),
                seg(0.4e12, 0.55e12, 2.0),
            ],
        }
    }
}

impl AbsorptionTable {
    /// Coefficient at `freq_hz`. Segments are half-open `[lo, hi)` except
    /// the last, which includes its upper edge.
    pub fn coefficient(&self, freq_hz: f64) -> Option<f64> {
        let last = self.segments.len().checked_sub(1)?;
        self.segments
            .iter()
            .enumerate()
            .find(|(i, s)| freq_hz >= s.lo_hz && (freq_hz < s.hi_hz || (*i == last && freq_hz == s.hi_hz)))
            .map(|(_, s)| s.db_per_m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandConfig {
    pub name: BandName,
    pub w1_hz: f64,
    pub w2_hz: f64,
    pub comm_range_m: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub tx_power_dbm: f64,
    /// Only consulted for [`BandName::Thz`].
    pub absorption: AbsorptionTable,
}

impl BandConfig {
    pub fn sub6ghz() -> Self {
        BandConfig {
            name: BandName::Sub6Ghz,
            w1_hz: 0.0,
            w2_hz: 2.0e9,
            comm_range_m: 100.0,
            tx_gain_dbi: 0.0,
            rx_gain_dbi: 0.0,
            tx_power_dbm: 23.0,
            absorption: AbsorptionTable::default(),
        }
    }

    pub fn thz() -> Self {
        BandConfig {
            name: BandName::Thz,
            w1_hz: 0.1e12,
            w2_hz: 0.55e12,
            comm_range_m: 15.0,
            tx_gain_dbi: 50.0,
            rx_gain_dbi: 50.0,
            tx_power_dbm: 23.0,
            absorption: AbsorptionTable::default(),
        }
    }

    pub fn preset(name: BandName) -> Self {
        match name {
            BandName::Sub6Ghz => Self::sub6ghz(),
            BandName::Thz => Self::thz(),
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.w1_hz < self.w2_hz) || self.w1_hz < 0.0 {
            return Err(ChannelError::Config("band edges must satisfy 0 <= w1 < w2".into()));
        }
        if !(self.comm_range_m > 0.0) {
            return Err(ChannelError::Config("communication range must be positive".into()));
        }
        Ok(())
    }

    /// Path loss in dB for a link of `distance_m` meters at `freq_hz`.
    pub fn path_loss_db(&self, distance_m: f64, freq_hz: f64) -> Result<f64, ChannelError> {
        match self.name {
            BandName::Sub6Ghz => path_loss_sub6(distance_m / 1000.0, freq_hz),
            BandName::Thz => {
                let alpha = self.absorption.coefficient(freq_hz).ok_or(ChannelError::Frequency {
                    freq_hz,
                    lo_hz: self.w1_hz,
                    hi_hz: self.w2_hz,
                })?;
                path_loss_thz(distance_m, freq_hz, alpha)
            }
        }
    }

    pub fn rx_power_dbm(&self, distance_m: f64, freq_hz: f64) -> Result<f64, ChannelError> {
        Ok(self.tx_power_dbm + self.tx_gain_dbi + self.rx_gain_dbi - self.path_loss_db(distance_m, freq_hz)?)
    }

    /// Reads a `key = value` band description. `name` selects the preset
    /// that the remaining keys override. `absorption` takes a comma list of
    /// `lo_hz:hi_hz:db_per_m` triples. `#` starts a comment.
    pub fn from_config_text(text: &str) -> Result<Self, ChannelError> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ChannelError::Config(format!("line {}: expected key = value", n + 1)))?;
            pairs.push((n + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let name = pairs
            .iter()
            .find(|(_, k, _)| k == "name")
            .map(|(_, _, v)| v.parse::<BandName>())
            .transpose()?
            .unwrap_or(BandName::Sub6Ghz);
        let mut band = BandConfig::preset(name);
        for (line, key, value) in pairs {
            let num = || {
                value
                    .parse::<f64>()
                    .map_err(|_| ChannelError::Config(format!("line {line}: `{key}` is not a number")))
            };
            match key.as_str() {
                "name" => {}
                "w1_hz" => band.w1_hz = num()?,
                "w2_hz" => band.w2_hz = num()?,
                "comm_range_m" => band.comm_range_m = num()?,
                "tx_gain_dbi" => band.tx_gain_dbi = num()?,
                "rx_gain_dbi" => band.rx_gain_dbi = num()?,
                "tx_power_dbm" => band.tx_power_dbm = num()?,
                "absorption" => band.absorption = parse_absorption(&value, line)?,
                other => return Err(ChannelError::Config(format!("line {line}: unknown key `{other}`"))),
            }
        }
        band.validate()?;
        Ok(band)
    }

    pub fn to_config_text(&self) -> String {
        let absorption: Vec<String> = self
            .absorption
            .segments
            .iter()
            .map(|s| format!("{:e}:{:e}:{}", s.lo_hz, s.hi_hz, s.db_per_m))
            .collect();
        format!(
            "name = {}\nw1_hz = {:e}\nw2_hz = {:e}\ncomm_range_m = {}\ntx_gain_dbi = {}\nrx_gain_dbi = {}\ntx_power_dbm = {}\nabsorption = {}\n",
            self.name,
            self.w1_hz,
            self.w2_hz,
            self.comm_range_m,
            self.tx_gain_dbi,
            self.rx_gain_dbi,
            self.tx_power_dbm,
            absorption.join(", ")
        )
    }
}

fn parse_absorption(value: &str, line: usize) -> Result<AbsorptionTable, ChannelError> {
    let bad = || ChannelError::Config(format!("line {line}: absorption entries are lo_hz:hi_hz:db_per_m"));
    let segments = value
        .split(',')
        .map(|item| {
            let parts: Vec<f64> = item
                .trim()
                .split(':')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad())?;
            match parts[..] {
                [lo_hz, hi_hz, db_per_m] if lo_hz < hi_hz => Ok(AbsorptionSegment { lo_hz, hi_hz, db_per_m }),
                _ => Err(bad()),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AbsorptionTable { segments })
}

/// Sub-6 GHz slow-fading path loss `127 + 2·log10(f) + 30·log10(d)` with
/// `d` in kilometers and `f` in hertz, taken literally.
pub fn path_loss_sub6(distance_km: f64, freq_hz: f64) -> Result<f64, ChannelError> {
    if !(distance_km > 0.0) {
        return Err(ChannelError::Distance(distance_km));
    }
    if !(freq_hz > 0.0) {
        return Err(ChannelError::Frequency {
            freq_hz,
            lo_hz: 0.0,
            hi_hz: f64::INFINITY,
        });
    }
    let d = distance_km.max(MIN_DISTANCE_M / 1000.0);
    Ok(127.0 + 2.0 * freq_hz.log10() + 30.0 * d.log10())
}

/// Free-space spreading loss `20·log10(4π·d·f/c)`, no clamping or band check.
pub fn free_space_spreading_db(distance_m: f64, freq_hz: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * distance_m * freq_hz / SPEED_OF_LIGHT).log10()
}

/// THz path loss: free-space spreading plus `absorption_db_per_m · d`.
pub fn path_loss_thz(distance_m: f64, freq_hz: f64, absorption_db_per_m: f64) -> Result<f64, ChannelError> {
    if !(distance_m > 0.0) {
        return Err(ChannelError::Distance(distance_m));
    }
    let (lo_hz, hi_hz) = (0.1e12, 0.55e12);
    if !(lo_hz..=hi_hz).contains(&freq_hz) {
        return Err(ChannelError::Frequency { freq_hz, lo_hz, hi_hz });
    }
    let d = distance_m.max(MIN_DISTANCE_M);
    Ok(free_space_spreading_db(d, freq_hz) + absorption_db_per_m * d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkKind {
    V2I,
    V2V,
}

impl fmt::Display for LinkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LinkKind::V2I => "V2I",
            LinkKind::V2V => "V2V",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    pub kind: LinkKind,
    pub tx_id: String,
    pub rx_id: String,
    pub distance_m: f64,
    pub center_freq_hz: f64,
    pub rx_power_dbm: f64,
}

impl Connection {
    pub fn rx_power_mw(&self) -> f64 {
        10f64.powf(self.rx_power_dbm / 10.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionSet {
    pub time_s: f64,
    pub band: BandConfig,
    pub connections: Vec<Connection>,
}

impl ConnectionSet {
    pub fn len(&self) -> usize {
        self.connections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.connections.is_empty()
    }
}

/// Activity probabilities for eligible vehicle/BS and vehicle/vehicle pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkPolicy {
    pub p_v2i: f64,
    pub p_v2v: f64,
}

impl Default for LinkPolicy {
    fn default() -> Self {
        LinkPolicy { p_v2i: 0.9, p_v2v: 0.5 }
    }
}

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

fn draw_frequency(band: &BandConfig, rng: &mut SeededRng) -> f64 {
    // (w1, w2]: keeps f > 0 for the sub-6 band whose lower edge is 0 Hz.
    let u: f64 = rng.random();
    band.w2_hz - (band.w2_hz - band.w1_hz) * u
}

/// Builds the active links among `poses` for one time step.
///
/// Each vehicle within range of the base station (inclusive) is uplinked
/// with probability `p_v2i`; each unordered vehicle pair within range with
/// probability `p_v2v`. Links draw a center frequency uniformly from the band.
pub fn build_connections(
    time_s: f64,
    poses: &[VehiclePose],
    bs_position: (f64, f64),
    band: &BandConfig,
    policy: &LinkPolicy,
    rng: &mut SeededRng,
) -> Result<ConnectionSet, ChannelError> {
    let mut connections = Vec::new();
    let mut link = |kind, tx: &str, rx: &str, d: f64, rng: &mut SeededRng| -> Result<(), ChannelError> {
        let f = draw_frequency(band, rng);
        connections.push(Connection {
            kind,
            tx_id: tx.to_string(),
            rx_id: rx.to_string(),
            distance_m: d,
            center_freq_hz: f,
            rx_power_dbm: band.rx_power_dbm(d, f)?,
        });
        Ok(())
    };

    for p in poses {
        let d = distance((p.x, p.y), bs_position);
        if d <= band.comm_range_m && rng.random_bool(policy.p_v2i) {
            link(LinkKind::V2I, &p.vehicle_id, BS_ID, d, rng)?;
        }
    }
    for (i, a) in poses.iter().enumerate() {
        for b in &poses[i + 1..] {
            let d = distance((a.x, a.y), (b.x, b.y));
            if d <= band.comm_range_m && rng.random_bool(policy.p_v2v) {
                link(LinkKind::V2V, &a.vehicle_id, &b.vehicle_id, d, rng)?;
            }
        }
    }
    Ok(ConnectionSet {
        time_s,
        band: band.clone(),
        connections,
    })
}

/// Writes rows `t,kind,tx,rx,distance_m,freq_hz,rx_power_dbm` for every set.
pub fn write_connections_csv<'a, W: Write>(
    sets: impl IntoIterator<Item = &'a ConnectionSet>,
    out: W,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "kind", "tx", "rx", "distance_m", "freq_hz", "rx_power_dbm"])?;
    for set in sets {
        for c in &set.connections {
            w.write_record([
                set.time_s.to_string(),
                c.kind.to_string(),
                c.tx_id.clone(),
                c.rx_id.clone(),
                c.distance_m.to_string(),
                c.center_freq_hz.to_string(),
                c.rx_power_dbm.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
