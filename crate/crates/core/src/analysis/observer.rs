//! Global passive observer applied to simulation output.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::montecarlo::LinkingEstimate;
use super::AnalysisError;
use crate::credentials::Flavor;
use crate::sim::{ObservationLog, VehicleClass};

/// Sizes of the VPKI-flavor and self-certified-flavor sets in one slot.
pub fn anonymity_sets(log: &ObservationLog, slot: usize) -> Result<(usize, usize), AnalysisError> {
    let s = log.slots.get(slot).ok_or(AnalysisError::SlotOutOfRange { slot, slots: log.slots.len() })?;
    Ok(s.records.iter().fold((0, 0), |(v, c), rec| match rec.flavor {
        Some(Flavor::VpkiProvided) => (v + 1, c),
        Some(Flavor::SelfCertified) => (v, c + 1),
        None => (v, c),
    }))
}

/// What the observer may use besides pseudonym flavors and set sizes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Observer {
    /// The initiation CAM links the initiator's previous pseudonym to its
    /// first self-certified one.
    pub initiation_linkage: bool,
}

/// Outcome of the observer's guess for one vehicle across one slot pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    /// The vehicle kept a flavor, so it is among the candidates.
    pub hit: bool,
    /// Size of the candidate set the observer guesses from.
    pub candidates: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairLinking {
    pub from: usize,
    /// Indexed by vehicle; `None` when the vehicle is silent in either slot.
    pub outcomes: Vec<Option<Outcome>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLinking {
    pub classes: Vec<VehicleClass>,
    pub pairs: Vec<PairLinking>,
}

impl LogLinking {
    fn pool<'a>(&'a self, first_pair: usize, vehicles: impl Iterator<Item = usize> + 'a) -> Option<LinkingEstimate> {
        let mut hits = 0;
        let mut trials = 0;
        for v in vehicles {
            for pair in self.pairs.iter().skip(first_pair) {
                if let Some(o) = pair.outcomes[v] {
                    hits += u64::from(o.hit);
                    trials += o.candidates;
                }
            }
        }
        LinkingEstimate::from_counts(hits, trials)
    }

    /// Pooled estimate for one vehicle over pairs `first_pair..`.
    pub fn vehicle(&self, v: usize, first_pair: usize) -> Option<LinkingEstimate> {
        self.pool(first_pair, std::iter::once(v))
    }

    /// Pooled estimate for a class over pairs `first_pair..`.
    pub fn class(&self, class: VehicleClass, first_pair: usize) -> Option<LinkingEstimate> {
        self.pool(first_pair, (0..self.classes.len()).filter(move |&v| self.classes[v] == class))
    }

    pub fn by_class(&self, first_pair: usize) -> BTreeMap<VehicleClass, LinkingEstimate> {
        [VehicleClass::Exhausted, VehicleClass::Participant, VehicleClass::NeverJoin, VehicleClass::Attacker]
            .into_iter()
            .filter_map(|c| self.class(c, first_pair).map(|e| (c, e)))
            .collect()
    }

    /// Pooled estimate for one slot pair across all vehicles.
    pub fn pair(&self, index: usize) -> Option<LinkingEstimate> {
        let pair = self.pairs.get(index)?;
        let (hits, trials) = pair
            .outcomes
            .iter()
            .flatten()
            .fold((0, 0), |(h, t), o| (h + u64::from(o.hit), t + o.candidates));
        LinkingEstimate::from_counts(hits, trials)
    }
}

/// For each consecutive slot pair, the observer takes each vehicle's flavor
/// in the first slot and guesses uniformly among the vehicles holding that
/// flavor in the second.
pub fn empirical_link_from_log(log: &ObservationLog, observer: &Observer) -> Result<LogLinking, AnalysisError> {
    if log.slots.len() < 2 {
        return Err(AnalysisError::TooFewSlots(log.slots.len()));
    }
    let pairs = log
        .slots
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            let (vpki, selfc) = b.records.iter().fold((0u64, 0u64), |(v, c), rec| match rec.flavor {
                Some(Flavor::VpkiProvided) => (v + 1, c),
                Some(Flavor::SelfCertified) => (v, c + 1),
                None => (v, c),
            });
            let outcomes = a
                .records
                .iter()
                .zip(&b.records)
                .map(|(ra, rb)| {
                    let (fa, fb) = (ra.flavor?, rb.flavor?);
                    if observer.initiation_linkage && rb.initiated && !ra.initiated {
                        return Some(Outcome { hit: true, candidates: 1 });
                    }
                    let candidates = match fa {
                        Flavor::VpkiProvided => vpki,
                        Flavor::SelfCertified => selfc,
                    };
                    Some(Outcome { hit: fa == fb, candidates })
                })
                .collect();
            PairLinking { from: a.index, outcomes }
        })
        .collect();
    Ok(LogLinking { classes: log.classes.clone(), pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::credentials::{PseudonymId, Validity};
    use crate::sim::{SlotRecord, VehicleRecord};

    fn rec(flavor: Option<Flavor>, initiated: bool) -> VehicleRecord {
        VehicleRecord { flavor, pseudonym: flavor.map(|_| PseudonymId([0; 16])), initiated }
    }

    fn log(rows: &[Vec<VehicleRecord>], classes: Vec<VehicleClass>) -> ObservationLog {
        let mut l = ObservationLog::new(classes);
        for (i, r) in rows.iter().enumerate() {
            l.slots.push(SlotRecord { index: i, validity: Validity::secs(i as u64 * 60, (i as u64 + 1) * 60), records: r.clone() });
        }
        l
    }

    const V: Option<Flavor> = Some(Flavor::VpkiProvided);
    const S: Option<Flavor> = Some(Flavor::SelfCertified);

    #[test]
    fn all_vpki_gives_one_over_n() {
        let row = vec![rec(V, false); 4];
        let l = log(&[row.clone(), row], vec![VehicleClass::Participant; 4]);
        let out = empirical_link_from_log(&l, &Observer::default()).unwrap();
        assert_eq!(out.pair(0).unwrap().estimate, 0.25);
        assert_eq!(anonymity_sets(&l, 0).unwrap(), (4, 0));
        assert!(anonymity_sets(&l, 2).is_err());
    }

    #[test]
    fn singleton_is_linked() {
        let row = vec![rec(V, false), rec(V, false), rec(S, false)];
        let mut classes = vec![VehicleClass::Participant; 3];
        classes[2] = VehicleClass::Exhausted;
        let l = log(&[row.clone(), row.clone(), row], classes);
        let out = empirical_link_from_log(&l, &Observer::default()).unwrap();
        assert_eq!(out.vehicle(2, 0).unwrap().estimate, 1.0);
        assert_eq!(out.class(VehicleClass::Exhausted, 0).unwrap().estimate, 1.0);
        assert_eq!(out.class(VehicleClass::Participant, 0).unwrap().estimate, 0.5);
    }

    #[test]
    fn flavor_change_is_a_miss_and_silence_is_skipped() {
        let a = vec![rec(V, false), rec(S, false), rec(None, false)];
        let b = vec![rec(S, false), rec(S, false), rec(V, false)];
        let l = log(&[a, b], vec![VehicleClass::Participant; 3]);
        let out = empirical_link_from_log(&l, &Observer::default()).unwrap();
        assert_eq!(out.pairs[0].outcomes[0], Some(Outcome { hit: false, candidates: 1 }));
        assert_eq!(out.pairs[0].outcomes[1], Some(Outcome { hit: true, candidates: 2 }));
        assert_eq!(out.pairs[0].outcomes[2], None);
    }

    #[test]
    fn initiation_linkage_is_deterministic() {
        let a = vec![rec(V, false), rec(V, false), rec(V, false)];
        let b = vec![rec(S, true), rec(S, false), rec(V, false)];
        let l = log(&[a, b], vec![VehicleClass::Exhausted, VehicleClass::Participant, VehicleClass::Participant]);
        let plain = empirical_link_from_log(&l, &Observer::default()).unwrap();
        assert_eq!(plain.vehicle(0, 0).unwrap().estimate, 0.0);
        let linked = empirical_link_from_log(&l, &Observer { initiation_linkage: true }).unwrap();
        assert_eq!(linked.vehicle(0, 0).unwrap().estimate, 1.0);
    }

    #[test]
    fn single_slot_is_an_error() {
        let l = log(&[vec![rec(V, false)]], vec![VehicleClass::Participant]);
        assert!(matches!(empirical_link_from_log(&l, &Observer::default()), Err(AnalysisError::TooFewSlots(1))));
    }
}
