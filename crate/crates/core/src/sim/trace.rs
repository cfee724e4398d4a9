use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::credentials::{Flavor, PseudonymId, SimTime, Validity};
use crate::protocol::{Rejection, UpdateReason};

pub const TRACE_SCHEMA_VERSION: u32 = 1;
pub const LOG_SCHEMA_VERSION: u32 = 1;

/// One entry of the run trace, in the order the engine produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Update {
        t: SimTime,
        vehicle: u32,
        flavor: Option<Flavor>,
        reason: UpdateReason,
        pseudonym: Option<PseudonymId>,
        generated: usize,
    },
    /// Mid-slot activation of a silent vehicle.
    Resume { t: SimTime, vehicle: u32, flavor: Flavor, pseudonym: PseudonymId },
    Initiation { t: SimTime, vehicle: u32, from: SimTime, generated: usize },
    FlagSet { t: SimTime, vehicle: u32, hops: u32, origin: SimTime },
    FlagRevert { t: SimTime, vehicle: u32, last_seen: SimTime, initiating: bool, kept: bool },
    CamSent {
        t: SimTime,
        vehicle: u32,
        pseudonym: PseudonymId,
        validity: Validity,
        flavor: Flavor,
        mode: Option<Flavor>,
        flag: bool,
        hops: u32,
        origin: SimTime,
        initiating: bool,
        receivers: u32,
    },
    CamDropped { t: SimTime, vehicle: u32, sender: u32, reason: Rejection },
    VpkiRequest { t: SimTime, vehicle: u32, count: usize, from: SimTime, ready: SimTime },
    VpkiRefill { t: SimTime, vehicle: u32, stored: usize },
    VpkiError { t: SimTime, vehicle: u32, error: String },
    GridLearned { t: SimTime, vehicle: u32, offset_ms: u64 },
    Revoked { t: SimTime, vehicle: u32, list_version: u64 },
    ReportsDelivered { t: SimTime, vehicle: u32, count: usize },
}

impl TraceEvent {
    pub fn time(&self) -> SimTime {
        match self {
            TraceEvent::Update { t, .. }
            | TraceEvent::Resume { t, .. }
            | TraceEvent::Initiation { t, .. }
            | TraceEvent::FlagSet { t, .. }
            | TraceEvent::FlagRevert { t, .. }
            | TraceEvent::CamSent { t, .. }
            | TraceEvent::CamDropped { t, .. }
            | TraceEvent::VpkiRequest { t, .. }
            | TraceEvent::VpkiRefill { t, .. }
            | TraceEvent::VpkiError { t, .. }
            | TraceEvent::GridLearned { t, .. }
            | TraceEvent::Revoked { t, .. }
            | TraceEvent::ReportsDelivered { t, .. } => *t,
        }
    }
}

/// Aggregate counters of a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub cams_sent: u64,
    pub cams_flagged: u64,
    pub receptions: u64,
    pub receptions_lost: u64,
    pub cams_dropped: u64,
    pub reports_filed: u64,
    pub reports_delivered: u64,
    /// Beacon slots with no valid key loaded.
    pub beacons_suppressed: u64,
    /// Beacons pushed back because the vehicle was still busy with crypto.
    pub beacons_deferred: u64,
    /// Beacons abandoned because the backlog reached the next beacon.
    pub beacons_skipped: u64,
    pub certificate_checks: u64,
    pub probes: u64,
    pub self_certified_generated: u64,
    pub vpki_requests: u64,
    pub initiations: u64,
    /// Total virtual time all vehicles spent on crypto and probes.
    pub busy_ms: u64,
    pub mean_degree: f64,
}

/// Append-only record of a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunTrace {
    pub events: Vec<TraceEvent>,
}

#[derive(Serialize)]
struct TraceHeader {
    schema_version: u32,
    kind: &'static str,
    events: usize,
}

impl RunTrace {
    /// JSON lines: a header line, then one event per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header = TraceHeader { schema_version: TRACE_SCHEMA_VERSION, kind: "rhythm-run-trace", events: self.events.len() };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn iter(&self) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter()
    }
}

/// Population class a vehicle belongs to for the whole run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleClass {
    /// Started without VPKI pseudonyms.
    Exhausted,
    /// Holds VPKI pseudonyms and may opt in.
    Participant,
    NeverJoin,
    Attacker,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VehicleRecord {
    /// `None` for a silent vehicle.
    pub flavor: Option<Flavor>,
    pub pseudonym: Option<PseudonymId>,
    /// The vehicle was itself initiating during the slot.
    pub initiated: bool,
}

impl VehicleRecord {
    pub const SILENT: VehicleRecord = VehicleRecord { flavor: None, pseudonym: None, initiated: false };
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub index: usize,
    pub validity: Validity,
    /// One record per vehicle, indexed by vehicle.
    pub records: Vec<VehicleRecord>,
}

/// Per-slot pseudonym flavor of every vehicle: what a global passive
/// observer sees.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationLog {
    pub schema_version: u32,
    pub classes: Vec<VehicleClass>,
    pub slots: Vec<SlotRecord>,
}

impl ObservationLog {
    pub fn new(classes: Vec<VehicleClass>) -> Self {
        Self { schema_version: LOG_SCHEMA_VERSION, classes, slots: Vec::new() }
    }

    pub fn population(&self) -> usize {
        self.classes.len()
    }

    /// Deterministic JSON encoding.
    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("log serializes")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }

    pub fn vehicles_of(&self, class: VehicleClass) -> Vec<usize> {
        (0..self.classes.len()).filter(|&v| self.classes[v] == class).collect()
    }
}
