use std::collections::{BTreeMap, VecDeque};
use std::io::Read;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::protocol::Position;
use crate::seed::{self, Stream};

#[derive(Debug, thiserror::Error)]
pub enum MobilityError {
    #[error("cannot read mobility trace {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Malformed { line: u64, msg: String },
    #[error("line {line}: timestamp for vehicle {vehicle} decreases")]
    Decreasing { line: u64, vehicle: u32 },
    #[error("mobility trace has no samples")]
    Empty,
    #[error("invalid mobility parameters: {0}")]
    Invalid(String),
}

/// Random-waypoint parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomWaypoint {
    /// Width and height of the rectangular area, in meters.
    pub area_m: [f64; 2],
    /// Speed range in m/s.
    pub speed_mps: [f64; 2],
    pub pause_s: f64,
}

impl Default for RandomWaypoint {
    fn default() -> Self {
        Self { area_m: [1000.0, 1000.0], speed_mps: [5.0, 15.0], pause_s: 0.0 }
    }
}

impl RandomWaypoint {
    pub fn validate(&self) -> Result<(), MobilityError> {
        let [w, h] = self.area_m;
        if !(w.is_finite() && h.is_finite()) || w <= 0.0 || h <= 0.0 {
            return Err(MobilityError::Invalid(format!("area must be positive, got {w} x {h}")));
        }
        let [lo, hi] = self.speed_mps;
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || lo > hi {
            return Err(MobilityError::Invalid(format!("speed range [{lo}, {hi}] is invalid")));
        }
        if !(self.pause_s.is_finite() && self.pause_s >= 0.0) {
            return Err(MobilityError::Invalid("pause must be >= 0".into()));
        }
        Ok(())
    }
}

/// Piecewise-linear track of one vehicle: `(t seconds, position)` samples
/// with non-decreasing timestamps.
#[derive(Clone, Debug, PartialEq)]
pub struct Track {
    samples: Vec<(f64, Position)>,
}

impl Track {
    pub fn new(samples: Vec<(f64, Position)>) -> Self {
        debug_assert!(samples.windows(2).all(|w| w[0].0 <= w[1].0));
        Self { samples }
    }

    pub fn samples(&self) -> &[(f64, Position)] {
        &self.samples
    }

    /// Linear interpolation; clamps outside the sampled range.
    pub fn position(&self, t: f64) -> Position {
        let s = &self.samples;
        let i = s.partition_point(|(ts, _)| *ts <= t);
        if i == 0 {
            return s[0].1;
        }
        if i == s.len() {
            return s[i - 1].1;
        }
        let (t0, p0) = s[i - 1];
        let (t1, p1) = s[i];
        if t1 <= t0 {
            return p1;
        }
        let a = (t - t0) / (t1 - t0);
        Position::new(p0.x + a * (p1.x - p0.x), p0.y + a * (p1.y - p0.y))
    }

    pub fn end_time(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.0)
    }
}

/// Positions of every vehicle over time. Vehicle `i` is the `i`-th track.
#[derive(Clone, Debug, PartialEq)]
pub struct MobilityTrace {
    tracks: Vec<Track>,
    /// Source identifiers of the tracks, for traces read from files.
    ids: Vec<u32>,
}

impl MobilityTrace {
    pub fn from_tracks(tracks: Vec<Track>) -> Self {
        let ids = (0..tracks.len() as u32).collect();
        Self { tracks, ids }
    }

    /// Every vehicle parked at a fixed position.
    pub fn stationary(positions: &[Position]) -> Self {
        Self::from_tracks(positions.iter().map(|p| Track::new(vec![(0.0, *p)])).collect())
    }

    pub fn population(&self) -> usize {
        self.tracks.len()
    }

    pub fn track(&self, v: usize) -> &Track {
        &self.tracks[v]
    }

    pub fn source_ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn position(&self, v: usize, t_s: f64) -> Position {
        self.tracks[v].position(t_s)
    }

    pub fn positions(&self, t_s: f64) -> Vec<Position> {
        self.tracks.iter().map(|tr| tr.position(t_s)).collect()
    }
}

#[derive(Debug, Deserialize)]
struct Row {
    vehicle_id: u32,
    t: f64,
    x: f64,
    y: f64,
}

/// Reads a `vehicle_id,t,x,y` CSV (t in seconds, x/y in meters). Vehicles are
/// numbered by ascending source id.
pub fn load_trace(path: &Path) -> Result<MobilityTrace, MobilityError> {
    let file = std::fs::File::open(path).map_err(|source| MobilityError::Io { path: path.to_owned(), source })?;
    parse_trace(file)
}

pub fn parse_trace<R: Read>(reader: R) -> Result<MobilityTrace, MobilityError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| MobilityError::Malformed { line: 1, msg: e.to_string() })?.clone();
    if headers.is_empty() {
        return Err(MobilityError::Empty);
    }
    if headers.iter().collect::<Vec<_>>() != ["vehicle_id", "t", "x", "y"] {
        return Err(MobilityError::Malformed {
            line: 1,
            msg: format!("expected header `vehicle_id,t,x,y`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut by_id: BTreeMap<u32, Vec<(f64, Position)>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| MobilityError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: Row = record
            .deserialize(Some(&headers))
            .map_err(|e| MobilityError::Malformed { line, msg: e.to_string() })?;
        if ![row.t, row.x, row.y].iter().all(|v| v.is_finite()) || row.t < 0.0 {
            return Err(MobilityError::Malformed { line, msg: "non-finite or negative value".into() });
        }
        let track = by_id.entry(row.vehicle_id).or_default();
        if track.last().is_some_and(|(t, _)| row.t < *t) {
            return Err(MobilityError::Decreasing { line, vehicle: row.vehicle_id });
        }
        track.push((row.t, Position::new(row.x, row.y)));
    }
    if by_id.is_empty() {
        return Err(MobilityError::Empty);
    }
    let ids = by_id.keys().copied().collect();
    let tracks = by_id.into_values().map(Track::new).collect();
    Ok(MobilityTrace { tracks, ids })
}

/// Random-waypoint mobility, deterministic under `seed`. Each vehicle starts
/// at a uniform point, repeatedly picks a uniform waypoint and a uniform
/// speed, travels there in a straight line and pauses.
pub fn synth_mobility(
    params: &RandomWaypoint,
    population: usize,
    duration_s: f64,
    seed: u64,
) -> Result<MobilityTrace, MobilityError> {
    params.validate()?;
    let [w, h] = params.area_m;
    let [lo, hi] = params.speed_mps;
    let tracks = (0..population)
        .map(|v| {
            let mut rng = seed::rng(seed, Stream::Mobility, v as u64);
            let mut point = || Position::new(rng.gen::<f64>() * w, rng.gen::<f64>() * h);
            let start = point();
            let mut samples = vec![(0.0, start)];
            let (mut t, mut at) = (0.0, start);
            if hi == 0.0 {
                samples.push((duration_s, start));
                return Track::new(samples);
            }
            while t < duration_s {
                let next = Position::new(rng.gen::<f64>() * w, rng.gen::<f64>() * h);
                let speed = if hi > lo { rng.gen_range(lo..hi) } else { hi };
                // A zero draw from [0, hi) would never arrive; treat it as a pause.
                let travel = if speed > 0.0 { at.distance(&next) / speed } else { params.pause_s.max(1.0) };
                let dest = if speed > 0.0 { next } else { at };
                t += travel;
                samples.push((t, dest));
                at = dest;
                if params.pause_s > 0.0 {
                    t += params.pause_s;
                    samples.push((t, at));
                }
            }
            Track::new(samples)
        })
        .collect();
    Ok(MobilityTrace::from_tracks(tracks))
}

/// Vehicles within `range_m` of `v` at `t_s` (unit-disk model), ascending.
pub fn neighbors(trace: &MobilityTrace, v: usize, t_s: f64, range_m: f64) -> Vec<usize> {
    let me = trace.position(v, t_s);
    (0..trace.population())
        .filter(|&u| u != v && me.distance(&trace.position(u, t_s)) <= range_m)
        .collect()
}

/// Unit-disk neighbor graph at one instant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborGraph {
    adjacency: Vec<Vec<u32>>,
}

impl NeighborGraph {
    pub fn from_positions(positions: &[Position], range_m: f64) -> Self {
        let n = positions.len();
        let mut adjacency = vec![Vec::new(); n];
        for a in 0..n {
            for b in a + 1..n {
                if positions[a].distance(&positions[b]) <= range_m {
                    adjacency[a].push(b as u32);
                    adjacency[b].push(a as u32);
                }
            }
        }
        Self { adjacency }
    }

    pub fn at(trace: &MobilityTrace, t_s: f64, range_m: f64) -> Self {
        Self::from_positions(&trace.positions(t_s), range_m)
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adjacency[v]
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    /// Hop distances from `src`; `None` for unreachable vertices.
    pub fn hops_from(&self, src: usize) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.len()];
        dist[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v].unwrap();
            for &u in &self.adjacency[v] {
                if dist[u as usize].is_none() {
                    dist[u as usize] = Some(d + 1);
                    queue.push_back(u as usize);
                }
            }
        }
        dist
    }

    /// Largest shortest-path length, or `None` if the graph is disconnected.
    pub fn diameter(&self) -> Option<u32> {
        let mut best = 0;
        for v in 0..self.len() {
            for d in self.hops_from(v) {
                best = best.max(d?);
            }
        }
        Some(best)
    }

    pub fn is_connected(&self) -> bool {
        self.is_empty() || self.hops_from(0).iter().all(Option::is_some)
    }

    pub fn mean_degree(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.adjacency.iter().map(Vec::len).sum::<usize>() as f64 / self.len() as f64
    }
}
