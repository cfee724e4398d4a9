//! Trace-level checks of protocol invariants. CAM-level checks need a run
//! with `trace_cams` enabled.

use std::collections::{BTreeMap, BTreeSet};

use super::engine::RunOutput;
use super::mobility::NeighborGraph;
use super::scenario::{MobilityConfig, Scenario};
use super::trace::{TraceEvent, VehicleClass};
use crate::credentials::{PseudonymId, SimTime, Validity};
use crate::protocol::Position;
use crate::vpki::{ReachabilityModel, VehicleId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Invariant {
    /// No two distinct keys of a vehicle have overlapping lifetimes.
    HsmExclusivity,
    /// Every signing key's lifetime is the grid slot containing the CAM.
    SlotSynchrony,
    /// The attached pseudonym matches the vehicle's mode and is valid.
    ModeSoundness,
    /// A vehicle that reaches the VPKI never relays the flag.
    NoRelayUnderReachability,
    /// Flags are reverted only at Γ boundaries, exactly when stale.
    RevertAtGamma,
    /// The flag reaches every participant within diameter × beacon interval.
    EpidemicCompleteness,
}

impl Invariant {
    pub fn as_str(self) -> &'static str {
        match self {
            Invariant::HsmExclusivity => "hsm_exclusivity",
            Invariant::SlotSynchrony => "slot_synchrony",
            Invariant::ModeSoundness => "mode_soundness",
            Invariant::NoRelayUnderReachability => "no_relay_under_reachability",
            Invariant::RevertAtGamma => "revert_at_gamma",
            Invariant::EpidemicCompleteness => "epidemic_completeness",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub invariant: Invariant,
    pub t: SimTime,
    pub vehicle: u32,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} at {} on V{}: {}", self.invariant.as_str(), self.t, self.vehicle, self.detail)
    }
}

fn violation(invariant: Invariant, t: SimTime, vehicle: u32, detail: String) -> Violation {
    Violation { invariant, t, vehicle, detail }
}

pub fn hsm_exclusivity(out: &RunOutput) -> Vec<Violation> {
    let mut keys: BTreeMap<u32, BTreeSet<(SimTime, SimTime, PseudonymId)>> = BTreeMap::new();
    for e in out.trace.iter() {
        if let TraceEvent::CamSent { vehicle, pseudonym, validity, .. } = e {
            keys.entry(*vehicle).or_default().insert((validity.start, validity.end, *pseudonym));
        }
    }
    let mut found = Vec::new();
    for (v, set) in keys {
        let list: Vec<_> = set.into_iter().collect();
        for (i, a) in list.iter().enumerate() {
            for b in &list[i + 1..] {
                if b.0 >= a.1 {
                    break;
                }
                if a.2 != b.2 {
                    found.push(violation(
                        Invariant::HsmExclusivity,
                        b.0,
                        v,
                        format!("keys {} [{}, {}) and {} [{}, {}) overlap", a.2, a.0, a.1, b.2, b.0, b.1),
                    ));
                }
            }
        }
    }
    found
}

pub fn slot_synchrony(out: &RunOutput) -> Vec<Violation> {
    let grid = out.scenario.grid();
    out.trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::CamSent { t, vehicle, validity, .. } if grid.slot_bounds(*t).ok() != Some(*validity) => Some(
                violation(Invariant::SlotSynchrony, *t, *vehicle, format!("key lifetime {validity:?} is not the slot of {t}")),
            ),
            _ => None,
        })
        .collect()
}

pub fn mode_soundness(out: &RunOutput) -> Vec<Violation> {
    out.trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::CamSent { t, vehicle, validity, flavor, mode, .. }
                if *mode != Some(*flavor) || !validity.contains(*t) =>
            {
                Some(violation(
                    Invariant::ModeSoundness,
                    *t,
                    *vehicle,
                    format!("attached {flavor:?} valid {validity:?} while mode is {mode:?}"),
                ))
            }
            _ => None,
        })
        .collect()
}

pub fn no_relay_under_reachability(out: &RunOutput) -> Vec<Violation> {
    let sc = &out.scenario;
    let reach = ReachabilityModel::new(sc.reachability.clone(), sc.population, sc.seed);
    out.trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::CamSent { t, vehicle, flag: true, initiating: false, .. }
                if out.log.classes[*vehicle as usize] != VehicleClass::Attacker
                    && reach.is_reachable(VehicleId(*vehicle), *t) =>
            {
                Some(violation(Invariant::NoRelayUnderReachability, *t, *vehicle, "relayed the flag while reachable".into()))
            }
            _ => None,
        })
        .collect()
}

pub fn revert_at_gamma(out: &RunOutput) -> Vec<Violation> {
    let grid = out.scenario.grid();
    let gamma = grid.gamma_ms();
    let mut found = Vec::new();
    for e in out.trace.iter() {
        if let TraceEvent::FlagRevert { t, vehicle, last_seen, initiating, kept } = e {
            if !grid.is_gamma_boundary(*t) {
                found.push(violation(Invariant::RevertAtGamma, *t, *vehicle, "revert check off a Γ boundary".into()));
            }
            let expected = *initiating || *last_seen >= t.saturating_sub(gamma);
            if *kept != expected {
                found.push(violation(
                    Invariant::RevertAtGamma,
                    *t,
                    *vehicle,
                    format!("kept={kept} but last initiation seen at {last_seen}, initiating={initiating}"),
                ));
            }
        }
    }
    found
}

/// Needs a static mobility configuration; returns the bound checked
/// against, or `None` when the neighbor graph is disconnected.
pub fn epidemic_completeness(out: &RunOutput) -> Result<(Vec<Violation>, Option<SimTime>), String> {
    let sc: &Scenario = &out.scenario;
    let MobilityConfig::Static { positions } = &sc.mobility else {
        return Err("epidemic completeness needs static mobility".into());
    };
    let pos: Vec<Position> = positions.iter().map(|p| Position::new(p[0], p[1])).collect();
    let graph = NeighborGraph::from_positions(&pos, sc.range_m);
    let Some(diameter) = graph.diameter() else { return Ok((Vec::new(), None)) };
    let Some(start) = out.trace.iter().find_map(|e| match e {
        TraceEvent::Initiation { t, .. } => Some(*t),
        _ => None,
    }) else {
        return Err("no initiation in the run".into());
    };
    let deadline = start + u64::from(diameter) * sc.beacon_interval_ms();
    let mut first: BTreeMap<u32, SimTime> = BTreeMap::new();
    for e in out.trace.iter() {
        match e {
            TraceEvent::FlagSet { t, vehicle, .. } | TraceEvent::Initiation { t, vehicle, .. } => {
                first.entry(*vehicle).or_insert(*t);
            }
            _ => {}
        }
    }
    let mut found = Vec::new();
    for (v, class) in out.log.classes.iter().enumerate() {
        if !matches!(class, VehicleClass::Participant | VehicleClass::Exhausted) {
            continue;
        }
        match first.get(&(v as u32)) {
            Some(t) if *t <= deadline => {}
            Some(t) => found.push(violation(
                Invariant::EpidemicCompleteness,
                *t,
                v as u32,
                format!("flag set at {t}, after {deadline} (diameter {diameter})"),
            )),
            None => found.push(violation(
                Invariant::EpidemicCompleteness,
                deadline,
                v as u32,
                format!("flag never set (diameter {diameter})"),
            )),
        }
    }
    Ok((found, Some(deadline)))
}

/// All CAM- and revert-level checks.
pub fn check_all(out: &RunOutput) -> Vec<Violation> {
    let mut all = hsm_exclusivity(out);
    all.extend(slot_synchrony(out));
    all.extend(mode_soundness(out));
    all.extend(no_relay_under_reachability(out));
    all.extend(revert_at_gamma(out));
    all
}

/// Validity of a slot, for callers building expectations.
pub fn slot_of(out: &RunOutput, t: SimTime) -> Option<Validity> {
    out.scenario.grid().slot_bounds(t).ok()
}
