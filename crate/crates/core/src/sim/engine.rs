use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::mobility::{load_trace, synth_mobility, MobilityError, MobilityTrace, NeighborGraph};
use super::scenario::{ExhaustedSpec, MobilityConfig, Scenario, ScenarioError, Scheme};
use super::trace::{ObservationLog, RunStats, RunTrace, SlotRecord, TraceEvent, VehicleClass, VehicleRecord};
use crate::credentials::{Flavor, PseudonymPool, SimTime, TimeGrid, VpkiPseudonym};
use crate::crypto::{CryptoError, CryptoProfile, SecretKey, SharedProvider};
use crate::protocol::{
    verify_cam, BeaconError, Cam, CamAction, OptInPolicy, Position, Rejection, TrustAnchors, VehicleRole, VehicleState,
};
use crate::seed::{self, Stream};
use crate::vpki::{ReachabilityModel, VehicleId, Vpki, VpkiError};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Mobility(#[from] MobilityError),
    #[error("mobility trace has {trace} vehicles, scenario needs {population}")]
    PopulationMismatch { trace: usize, population: usize },
    #[error("crypto provider: {0}")]
    Crypto(#[from] CryptoError),
    #[error("bootstrap: {0}")]
    Vpki(#[from] VpkiError),
    #[error("vehicle {vehicle} at {t}: {msg}")]
    Protocol { vehicle: u32, t: SimTime, msg: String },
}

/// Everything a run produces.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub scenario: Scenario,
    pub trace: RunTrace,
    pub log: ObservationLog,
    pub stats: RunStats,
}

/// Smaller rank runs first among events at the same instant.
#[derive(Debug)]
enum Kind {
    Revoke,
    VpkiComplete(Vec<(SecretKey, VpkiPseudonym)>),
    Boundary(usize),
    Resume,
    Beacon { regular: bool },
}

impl Kind {
    fn rank(&self) -> u8 {
        match self {
            Kind::Revoke => 0,
            Kind::VpkiComplete(_) => 1,
            Kind::Boundary(_) => 2,
            Kind::Resume => 3,
            Kind::Beacon { .. } => 4,
        }
    }
}

#[derive(Debug)]
struct Event {
    t: SimTime,
    vehicle: u32,
    seq: u64,
    kind: Kind,
}

impl Event {
    fn key(&self) -> (SimTime, u8, u32, u64) {
        (self.t, self.kind.rank(), self.vehicle, self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

#[derive(Debug, Default)]
struct Aux {
    busy_until: SimTime,
    /// Slot index and outcome of the last reachability probe.
    probe: Option<(u64, bool)>,
    pending_request: bool,
    revoked: bool,
}

/// Milliseconds of virtual time charged for `cost` (rounded up).
fn ceil_ms(cost: f64) -> u64 {
    (cost - 1e-9).ceil().max(0.0) as u64
}

/// First instant at or after `t` not covered by a pseudonym of either
/// flavor.
fn first_uncovered(pool: &PseudonymPool, t: SimTime) -> SimTime {
    let mut x = t;
    loop {
        let end = pool.vpki_coverage_end(x).max(pool.self_certified_coverage_end(x));
        match end {
            Some(e) if e > x => x = e,
            _ => return x,
        }
    }
}

struct Engine<'a> {
    sc: &'a Scenario,
    grid: TimeGrid,
    end: SimTime,
    interval_ms: u64,
    horizon_ms: u64,
    crypto: SharedProvider,
    profile: CryptoProfile,
    vpki: Vpki,
    anchors: TrustAnchors,
    reach: ReachabilityModel,
    mobility: MobilityTrace,
    step_ms: u64,
    graph: Option<(u64, NeighborGraph)>,
    degree_sum: f64,
    snapshots: u64,
    vehicles: Vec<VehicleState>,
    aux: Vec<Aux>,
    queue: BinaryHeap<Reverse<Event>>,
    seq: u64,
    loss_rng: ChaCha8Rng,
    trace: RunTrace,
    log: ObservationLog,
    stats: RunStats,
}

/// Runs a scenario to completion.
pub fn run(scenario: &Scenario) -> Result<RunOutput, RunError> {
    scenario.validate()?;
    let mut engine = Engine::bootstrap(scenario)?;
    engine.execute()?;
    Ok(engine.finish())
}

fn build_mobility(sc: &Scenario) -> Result<MobilityTrace, RunError> {
    let trace = match &sc.mobility {
        MobilityConfig::RandomWaypoint(p) => synth_mobility(p, sc.population, sc.duration_s, sc.seed)?,
        MobilityConfig::Trace { path } => load_trace(path)?,
        MobilityConfig::Static { positions } => {
            MobilityTrace::stationary(&positions.iter().map(|p| Position::new(p[0], p[1])).collect::<Vec<_>>())
        }
    };
    if trace.population() < sc.population {
        return Err(RunError::PopulationMismatch { trace: trace.population(), population: sc.population });
    }
    Ok(trace)
}

/// Vehicle classes for a scenario, as the engine assigns them.
pub fn assign_classes(sc: &Scenario, reach: &ReachabilityModel) -> Vec<VehicleClass> {
    let n = sc.population;
    let exhausted: BTreeSet<usize> = match &sc.exhausted {
        ExhaustedSpec::Unreachable => (0..n).filter(|&v| !reach.is_reachable(VehicleId(v as u32), SimTime::ZERO)).collect(),
        ExhaustedSpec::None => BTreeSet::new(),
        ExhaustedSpec::Fraction(p) => {
            let count = ((p * n as f64) - 1e-9).ceil().max(0.0) as usize;
            let mut ids: Vec<usize> = (0..n).collect();
            ids.shuffle(&mut seed::rng(sc.seed, Stream::Classes, 0));
            ids.into_iter().take(count.min(n)).collect()
        }
        ExhaustedSpec::Vehicles(vs) => vs.iter().map(|v| *v as usize).collect(),
    };
    let attackers: BTreeSet<usize> = sc.clogging_attackers.iter().map(|v| *v as usize).collect();
    let mut classes: Vec<VehicleClass> = (0..n)
        .map(|v| {
            if attackers.contains(&v) {
                VehicleClass::Attacker
            } else if exhausted.contains(&v) {
                VehicleClass::Exhausted
            } else {
                VehicleClass::Participant
            }
        })
        .collect();
    let mut candidates: Vec<usize> = (0..n).filter(|&v| classes[v] == VehicleClass::Participant).collect();
    candidates.shuffle(&mut seed::rng(sc.seed, Stream::Classes, 1));
    for v in candidates.into_iter().take(sc.never_join) {
        classes[v] = VehicleClass::NeverJoin;
    }
    classes
}

impl<'a> Engine<'a> {
    fn bootstrap(sc: &'a Scenario) -> Result<Self, RunError> {
        let grid = sc.grid();
        let n = sc.population;
        let crypto = sc.crypto.build()?;
        let mut vpki = Vpki::new(crypto.clone(), sc.seed);
        let anchors = TrustAnchors { pca: vpki.pca.public_key().clone(), group: vpki.gm.group_public_key().clone() };
        let reach = ReachabilityModel::new(sc.reachability.clone(), n, sc.seed);
        let mobility = build_mobility(sc)?;
        let classes = assign_classes(sc, &reach);
        let stale: BTreeSet<u32> = sc.stale_grid_vehicles.iter().copied().collect();
        let policy = OptInPolicy::new(sc.r).map_err(|e| RunError::Scenario(ScenarioError::Invalid(vec![e])))?;

        let mut vehicles = Vec::with_capacity(n);
        for (v, class) in classes.iter().enumerate() {
            let id = VehicleId(v as u32);
            let membership = vpki.enroll(id)?;
            let role = match (sc.scheme, class) {
                (Scheme::Baseline, _) => VehicleRole::NeverJoin,
                (_, VehicleClass::Attacker) => VehicleRole::CloggingAttacker,
                (_, VehicleClass::NeverJoin) => VehicleRole::NeverJoin,
                _ => VehicleRole::Normal,
            };
            let known = (!stale.contains(&id.0)).then_some(grid);
            let mut state = VehicleState::new(id, known, grid, policy, sc.protocol, sc.seed)
                .with_group_key(membership.gsk)
                .with_role(role);
            if *class != VehicleClass::Exhausted {
                let keys = state.fresh_keys(crypto.as_ref(), sc.preload_slots());
                let ticket = vpki.issue_ticket(id)?;
                let pubs = keys.iter().map(|k| k.public.clone()).collect();
                let issued = vpki.issue_pseudonyms(&ticket, &grid, SimTime::ZERO, pubs)?;
                state.preload(keys.into_iter().map(|k| k.secret).zip(issued).collect());
            }
            vehicles.push(state);
        }

        let mut engine = Self {
            sc,
            grid,
            end: sc.duration(),
            interval_ms: sc.beacon_interval_ms(),
            horizon_ms: sc.horizon_ms(),
            crypto,
            profile: sc.crypto_profile,
            vpki,
            anchors,
            reach,
            mobility,
            step_ms: SimTime::from_secs_f64(sc.mobility_step_s).0.max(1),
            graph: None,
            degree_sum: 0.0,
            snapshots: 0,
            vehicles,
            aux: (0..n).map(|_| Aux::default()).collect(),
            queue: BinaryHeap::new(),
            seq: 0,
            loss_rng: seed::rng(sc.seed, Stream::Loss, 0),
            trace: RunTrace::default(),
            log: ObservationLog::new(classes),
            stats: RunStats::default(),
        };
        engine.push(SimTime::ZERO, 0, Kind::Boundary(0));
        for v in 0..n {
            let phase = seed::rng(sc.seed, Stream::Beacon, v as u64).gen_range(0..engine.interval_ms);
            engine.push(SimTime(phase), v as u32, Kind::Beacon { regular: true });
        }
        for r in &sc.revocations {
            engine.push(SimTime::from_secs_f64(r.at_s), r.vehicle, Kind::Revoke);
        }
        Ok(engine)
    }

    fn push(&mut self, t: SimTime, vehicle: u32, kind: Kind) {
        if t >= self.end {
            return;
        }
        self.seq += 1;
        self.queue.push(Reverse(Event { t, vehicle, seq: self.seq, kind }));
    }

    fn execute(&mut self) -> Result<(), RunError> {
        while let Some(Reverse(ev)) = self.queue.pop() {
            let v = ev.vehicle as usize;
            match ev.kind {
                Kind::Boundary(k) => self.boundary(ev.t, k)?,
                Kind::Beacon { regular } => self.beacon(v, ev.t, regular),
                Kind::Resume => self.resume(v, ev.t)?,
                Kind::VpkiComplete(batch) => self.refill(v, ev.t, batch)?,
                Kind::Revoke => self.revoke(v, ev.t),
            }
        }
        Ok(())
    }

    fn finish(mut self) -> RunOutput {
        self.stats.mean_degree = if self.snapshots > 0 { self.degree_sum / self.snapshots as f64 } else { 0.0 };
        RunOutput { scenario: self.sc.clone(), trace: self.trace, log: self.log, stats: self.stats }
    }

    fn reachable(&self, v: usize, t: SimTime) -> bool {
        self.reach.is_reachable(VehicleId(v as u32), t)
    }

    /// Occupies `v` for `cost_ms` starting no earlier than `t`; returns the
    /// completion time.
    fn charge(&mut self, v: usize, t: SimTime, cost_ms: f64) -> SimTime {
        let ms = ceil_ms(cost_ms);
        let aux = &mut self.aux[v];
        let done = aux.busy_until.max(t) + ms;
        aux.busy_until = done;
        self.stats.busy_ms += ms;
        done
    }

    fn generation_cost(&self, count: usize) -> f64 {
        self.profile.self_certification_ms(count)
    }

    fn protocol_err(v: usize, t: SimTime, e: impl std::fmt::Display) -> RunError {
        RunError::Protocol { vehicle: v as u32, t, msg: e.to_string() }
    }

    fn boundary(&mut self, t: SimTime, k: usize) -> Result<(), RunError> {
        if t > SimTime::ZERO && self.grid.is_gamma_boundary(t) {
            for v in 0..self.vehicles.len() {
                let Some(f) = self.vehicles[v].flag() else { continue };
                let initiating = self.vehicles[v].is_initiating();
                let cleared = self.vehicles[v].revert_check(t);
                self.trace.events.push(TraceEvent::FlagRevert {
                    t,
                    vehicle: v as u32,
                    last_seen: f.last_seen,
                    initiating,
                    kept: !cleared,
                });
            }
        }
        let validity = self.grid.slot_bounds(t).expect("boundary on grid");
        let mut records = Vec::with_capacity(self.vehicles.len());
        for v in 0..self.vehicles.len() {
            let reachable = self.reachable(v, t);
            let delivered = self.vehicles[v].deliver_reports(reachable).len();
            if delivered > 0 {
                self.stats.reports_delivered += delivered as u64;
                self.trace.events.push(TraceEvent::ReportsDelivered { t, vehicle: v as u32, count: delivered });
            }
            self.provision(v, t)?;
            let decision = self.vehicles[v].draw_decision();
            let out = self.vehicles[v]
                .pseudonym_update(self.crypto.as_ref(), t, decision)
                .map_err(|e| Self::protocol_err(v, t, e))?;
            if out.generated > 0 {
                self.stats.self_certified_generated += out.generated as u64;
                self.charge(v, t, self.generation_cost(out.generated));
            }
            self.trace.events.push(TraceEvent::Update {
                t,
                vehicle: v as u32,
                flavor: out.flavor,
                reason: out.reason,
                pseudonym: out.pseudonym,
                generated: out.generated,
            });
            records.push(VehicleRecord {
                flavor: out.flavor,
                pseudonym: out.pseudonym,
                initiated: self.vehicles[v].is_initiating(),
            });
        }
        self.log.slots.push(SlotRecord { index: k, validity, records });
        self.push(t + self.grid.tau_p_ms(), 0, Kind::Boundary(k + 1));
        Ok(())
    }

    /// Keeps the pool ahead of the next update: refill from the VPKI when it
    /// is reachable, otherwise initiate (rhythm scheme only).
    fn provision(&mut self, v: usize, t: SimTime) -> Result<(), RunError> {
        let lookahead = self.grid.tau_p_ms() + self.horizon_ms;
        if !self.vehicles[v].pool().is_exhausted(t, lookahead) {
            return Ok(());
        }
        if self.reachable(v, t) && !self.aux[v].revoked {
            if !self.aux[v].pending_request {
                self.request_refill(v, t);
            }
            return Ok(());
        }
        let st = &self.vehicles[v];
        if self.sc.scheme != Scheme::Rhythm || !st.has_group_key() || st.grid().is_none() {
            return Ok(());
        }
        let from = first_uncovered(st.pool(), t);
        if from >= t + lookahead {
            return Ok(());
        }
        let batch = self.vehicles[v]
            .rhythm_init(self.crypto.as_ref(), t, from, self.sc.batch())
            .map_err(|e| Self::protocol_err(v, t, e))?;
        self.stats.initiations += 1;
        self.stats.self_certified_generated += batch.len() as u64;
        self.charge(v, t, self.generation_cost(batch.len()));
        self.trace.events.push(TraceEvent::Initiation { t, vehicle: v as u32, from, generated: batch.len() });
        Ok(())
    }

    fn request_refill(&mut self, v: usize, t: SimTime) {
        let id = VehicleId(v as u32);
        let n = self.sc.batch();
        let from = self.vehicles[v].pool().vpki_coverage_end(t).unwrap_or(t);
        let keys = self.vehicles[v].fresh_keys(self.crypto.as_ref(), n);
        let issued = self.vpki.issue_ticket(id).and_then(|ticket| {
            let pubs = keys.iter().map(|k| k.public.clone()).collect();
            self.vpki.issue_pseudonyms(&ticket, &self.grid, from, pubs)
        });
        match issued {
            Ok(issued) => {
                let keys_done = self.charge(v, t, n as f64 * self.profile.keygen_ms);
                let ready = keys_done + ceil_ms(self.sc.vpki_latency.request_ms(n));
                self.aux[v].pending_request = true;
                self.stats.vpki_requests += 1;
                self.trace.events.push(TraceEvent::VpkiRequest { t, vehicle: v as u32, count: n, from, ready });
                let batch = keys.into_iter().map(|k| k.secret).zip(issued).collect();
                self.push(ready, v as u32, Kind::VpkiComplete(batch));
            }
            Err(e) => {
                self.trace.events.push(TraceEvent::VpkiError { t, vehicle: v as u32, error: e.to_string() });
            }
        }
    }

    fn refill(&mut self, v: usize, t: SimTime, batch: Vec<(SecretKey, VpkiPseudonym)>) -> Result<(), RunError> {
        self.aux[v].pending_request = false;
        let lookahead = self.grid.tau_p_ms() + self.horizon_ms;
        let stored = self.vehicles[v].accept_vpki_batch(batch, t, lookahead);
        self.trace.events.push(TraceEvent::VpkiRefill { t, vehicle: v as u32, stored });
        self.resume(v, t)
    }

    fn revoke(&mut self, v: usize, t: SimTime) {
        self.aux[v].revoked = true;
        match self.vpki.revoke(VehicleId(v as u32)) {
            Ok(list) => {
                let list_version = list.version;
                self.trace.events.push(TraceEvent::Revoked { t, vehicle: v as u32, list_version });
            }
            Err(e) => self.trace.events.push(TraceEvent::VpkiError { t, vehicle: v as u32, error: e.to_string() }),
        }
    }

    /// Gives a silent vehicle a key mid-slot once it can have one.
    fn resume(&mut self, v: usize, t: SimTime) -> Result<(), RunError> {
        if self.vehicles[v].hsm().valid_at(t).is_some() {
            return Ok(());
        }
        self.provision(v, t)?;
        let out = self.vehicles[v].resume(self.crypto.as_ref(), t).map_err(|e| Self::protocol_err(v, t, e))?;
        let Some(out) = out else { return Ok(()) };
        if out.generated > 0 {
            self.stats.self_certified_generated += out.generated as u64;
            self.charge(v, t, self.generation_cost(out.generated));
        }
        let (Some(flavor), Some(pseudonym)) = (out.flavor, out.pseudonym) else { return Ok(()) };
        self.trace.events.push(TraceEvent::Resume { t, vehicle: v as u32, flavor, pseudonym });
        let initiated = self.vehicles[v].is_initiating();
        if let Some(slot) = self.log.slots.last_mut() {
            if slot.validity.contains(t) {
                slot.records[v] = VehicleRecord { flavor: Some(flavor), pseudonym: Some(pseudonym), initiated };
            }
        }
        Ok(())
    }

    fn graph_at(&mut self, t: SimTime) -> &NeighborGraph {
        let step = t.0 / self.step_ms;
        if self.graph.as_ref().map_or(true, |(s, _)| *s != step) {
            let at_s = (step * self.step_ms) as f64 / 1000.0;
            let mut positions = self.mobility.positions(at_s);
            positions.truncate(self.sc.population);
            let g = NeighborGraph::from_positions(&positions, self.sc.range_m);
            self.degree_sum += g.mean_degree();
            self.snapshots += 1;
            self.graph = Some((step, g));
        }
        &self.graph.as_ref().unwrap().1
    }

    fn beacon(&mut self, v: usize, t: SimTime, regular: bool) {
        if regular {
            self.push(t + self.interval_ms, v as u32, Kind::Beacon { regular: true });
        }
        let busy = self.aux[v].busy_until;
        if busy > t {
            if regular && busy < t + self.interval_ms {
                self.stats.beacons_deferred += 1;
                self.push(busy, v as u32, Kind::Beacon { regular: false });
            } else {
                self.stats.beacons_skipped += 1;
            }
            return;
        }
        let reachable = self.reachable(v, t);
        let position = self.mobility.position(v, t.as_secs_f64());
        let cam = match self.vehicles[v].build_cam(self.crypto.as_ref(), t, position, reachable) {
            Ok(cam) => cam,
            Err(BeaconError::Suppressed(_)) => {
                self.stats.beacons_suppressed += 1;
                return;
            }
            Err(BeaconError::Crypto(e)) => {
                self.trace.events.push(TraceEvent::VpkiError { t, vehicle: v as u32, error: e.to_string() });
                return;
            }
        };
        let t_tx = self.charge(v, t, self.profile.sign_ms);
        self.stats.cams_sent += 1;
        if cam.flag_rhythm {
            self.stats.cams_flagged += 1;
        }
        let verdict = verify_cam(self.crypto.as_ref(), &self.anchors, self.vpki.revocation_list(), &cam);
        let receivers: Vec<u32> = self.graph_at(t).neighbors(v).to_vec();
        if self.sc.trace_cams {
            let st = &self.vehicles[v];
            self.trace.events.push(TraceEvent::CamSent {
                t,
                vehicle: v as u32,
                pseudonym: cam.attachment.id(),
                validity: cam.attachment.validity(),
                flavor: cam.attachment.flavor(),
                mode: st.mode(),
                flag: cam.flag_rhythm,
                hops: cam.flag_hops,
                origin: cam.flag_origin,
                initiating: st.is_initiating(),
                receivers: receivers.len() as u32,
            });
        }
        for u in receivers {
            if self.sc.loss_probability > 0.0 && self.loss_rng.gen::<f64>() < self.sc.loss_probability {
                self.stats.receptions_lost += 1;
                continue;
            }
            self.receive(u as usize, v, &cam, verdict, t_tx);
        }
    }

    fn receive(&mut self, u: usize, sender: usize, cam: &Cam, verdict: Result<(), Rejection>, t_rx: SimTime) {
        let st = &self.vehicles[u];
        let mut cost = self.profile.verify_ms;
        if verdict.is_ok() && !st.has_verified(&cam.attachment.id()) {
            self.stats.certificate_checks += 1;
            cost += match cam.attachment.flavor() {
                Flavor::VpkiProvided => self.profile.verify_ms,
                Flavor::SelfCertified => self.profile.group_verify_ms,
            };
        }
        let start = self.aux[u].busy_until.max(t_rx);
        let mut reachable = true;
        if cam.flag_rhythm && verdict.is_ok() && st.role == VehicleRole::Normal {
            let slot = self.grid.slot_index(start).unwrap_or(0);
            match self.aux[u].probe {
                Some((s, r)) if s == slot => reachable = r,
                _ => {
                    reachable = self.reachable(u, start);
                    self.aux[u].probe = Some((slot, reachable));
                    self.stats.probes += 1;
                    cost += self.sc.probe_timeout_ms as f64;
                }
            }
        }
        let done = self.charge(u, start, cost);
        self.stats.receptions += 1;
        let actions = self.vehicles[u].process_verified_cam(cam, verdict, done, reachable);
        for action in actions {
            match action {
                CamAction::SetFlag { newly_set: true, .. } => {
                    let f = self.vehicles[u].flag().expect("flag just set");
                    self.trace.events.push(TraceEvent::FlagSet {
                        t: done,
                        vehicle: u as u32,
                        hops: f.hops,
                        origin: f.last_seen,
                    });
                }
                CamAction::LearnGrid { offset_ms } => {
                    self.trace.events.push(TraceEvent::GridLearned { t: done, vehicle: u as u32, offset_ms });
                    self.push(done, u as u32, Kind::Resume);
                }
                CamAction::Drop { reason } => {
                    self.stats.cams_dropped += 1;
                    self.trace.events.push(TraceEvent::CamDropped {
                        t: done,
                        vehicle: u as u32,
                        sender: sender as u32,
                        reason,
                    });
                }
                CamAction::Report(_) => self.stats.reports_filed += 1,
                _ => {}
            }
        }
    }
}
