//! In-process models of the credential infrastructure.
//!
//! - [`Ltca`] registers vehicles and hands out anonymous tickets. It alone
//!   knows the ticket → identity mapping.
//! - [`Pca`] issues grid-aligned pseudonyms against tickets. It alone knows
//!   the pseudonym → ticket mapping.
//! - [`Gm`] enrolls vehicles in the signing group (one member per ticket) and
//!   can open group signatures to a member handle.
//! - The resolution authority (methods on [`Vpki`]) chains these together to
//!   resolve evidence to an identity and to revoke.
//!
//! Ticket anonymity is modelled by which entity holds which map, not by blind
//! signatures, so no single entity can resolve a pseudonym on its own.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::credentials::{
    zeta, AnonymousTicket, PcaId, PseudonymId, SelfCertifiedPseudonym, SimTime, TimeGrid, VpkiPseudonym,
};
use crate::crypto::{
    CryptoError, GroupKeys, GroupPublicKey, GroupSignature, GroupSigningKey, KeyPair, PublicKey,
    SharedProvider, SignerIdentity,
};
use crate::seed::{self, Stream};

/// Long-term vehicle identity, known only to the LTCA (and the resolution
/// authority after a successful resolution).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleId(pub u32);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "V{}", self.0)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum VpkiError {
    #[error("{0} is already registered")]
    DuplicateRegistration(VehicleId),
    #[error("{0} is not registered")]
    Unregistered(VehicleId),
    #[error("{0} is revoked")]
    Revoked(VehicleId),
    #[error("ticket does not verify under the LTCA key")]
    BadTicket,
    #[error("ticket belongs to a revoked lineage")]
    RevokedTicket,
    #[error("ticket already consumed for group registration")]
    TicketReused,
    #[error("at least one pseudonym must be requested")]
    EmptyRequest,
    #[error("evidence not found in any issuance record")]
    NotFound,
    #[error(transparent)]
    Grid(#[from] crate::credentials::GridError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

pub type Result<T> = std::result::Result<T, VpkiError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entity {
    Ltca,
    Pca,
    Gm,
    Ra,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Registration {
    pub identity: VehicleId,
}

#[derive(Debug)]
pub struct Ltca {
    keys: KeyPair,
    registered: BTreeMap<VehicleId, Registration>,
    ticket_log: BTreeMap<[u8; 16], VehicleId>,
    revoked: BTreeSet<VehicleId>,
}

impl Ltca {
    pub fn new(crypto: &SharedProvider, rng: &mut dyn RngCore) -> Self {
        Self {
            keys: crypto.keygen(rng),
            registered: BTreeMap::new(),
            ticket_log: BTreeMap::new(),
            revoked: BTreeSet::new(),
        }
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.keys.public
    }

    pub fn register(&mut self, identity: VehicleId) -> Result<Registration> {
        if self.registered.contains_key(&identity) {
            return Err(VpkiError::DuplicateRegistration(identity));
        }
        let record = Registration { identity };
        self.registered.insert(identity, record.clone());
        Ok(record)
    }

    pub fn is_registered(&self, identity: VehicleId) -> bool {
        self.registered.contains_key(&identity)
    }

    pub fn issue_ticket(
        &mut self,
        crypto: &SharedProvider,
        identity: VehicleId,
        rng: &mut dyn RngCore,
    ) -> Result<AnonymousTicket> {
        if !self.registered.contains_key(&identity) {
            return Err(VpkiError::Unregistered(identity));
        }
        if self.revoked.contains(&identity) {
            return Err(VpkiError::Revoked(identity));
        }
        let mut token = [0u8; 16];
        loop {
            rng.fill_bytes(&mut token);
            if !self.ticket_log.contains_key(&token) {
                break;
            }
        }
        let ltca_signature = crypto.sign(&self.keys.secret, &AnonymousTicket::signed_body(&token))?;
        self.ticket_log.insert(token, identity);
        Ok(AnonymousTicket { token, ltca_signature })
    }

    fn identity_of_ticket(&self, token: &[u8; 16]) -> Option<VehicleId> {
        self.ticket_log.get(token).copied()
    }

    fn tickets_of(&self, identity: VehicleId) -> Vec<[u8; 16]> {
        self.ticket_log
            .iter()
            .filter(|(_, id)| **id == identity)
            .map(|(t, _)| *t)
            .collect()
    }
}

pub fn verify_ticket(crypto: &SharedProvider, ltca: &PublicKey, ticket: &AnonymousTicket) -> bool {
    crypto
        .verify(ltca, &AnonymousTicket::signed_body(&ticket.token), &ticket.ltca_signature)
        .unwrap_or(false)
}

/// Checks the PCA signature and grid alignment of a VPKI-provided pseudonym.
pub fn verify_vpki_pseudonym(
    crypto: &SharedProvider,
    pca: &PublicKey,
    grid: &TimeGrid,
    p: &VpkiPseudonym,
) -> bool {
    let aligned = grid.slot_bounds(p.validity.start).map_or(false, |slot| slot == p.validity);
    aligned
        && PseudonymId::of(&p.public_key) == p.id
        && crypto
            .verify(pca, &zeta(&p.public_key, p.validity), &p.issuer_signature)
            .unwrap_or(false)
}

#[derive(Debug)]
pub struct Pca {
    id: PcaId,
    keys: KeyPair,
    ltca_public: PublicKey,
    issuance_log: BTreeMap<PseudonymId, [u8; 16]>,
    revoked_tickets: BTreeSet<[u8; 16]>,
}

impl Pca {
    pub fn new(id: PcaId, crypto: &SharedProvider, ltca_public: PublicKey, rng: &mut dyn RngCore) -> Self {
        Self {
            id,
            keys: crypto.keygen(rng),
            ltca_public,
            issuance_log: BTreeMap::new(),
            revoked_tickets: BTreeSet::new(),
        }
    }

    pub fn id(&self) -> PcaId {
        self.id
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.keys.public
    }

    /// Issues one pseudonym per supplied public key, tiling consecutive grid
    /// slots starting with the slot containing `from`.
    pub fn issue_pseudonyms(
        &mut self,
        crypto: &SharedProvider,
        ticket: &AnonymousTicket,
        grid: &TimeGrid,
        from: SimTime,
        public_keys: Vec<PublicKey>,
    ) -> Result<Vec<VpkiPseudonym>> {
        if !verify_ticket(crypto, &self.ltca_public, ticket) {
            return Err(VpkiError::BadTicket);
        }
        if self.revoked_tickets.contains(&ticket.token) {
            return Err(VpkiError::RevokedTicket);
        }
        if public_keys.is_empty() {
            return Err(VpkiError::EmptyRequest);
        }
        let slots = grid.tile(from, public_keys.len())?;
        let mut out = Vec::with_capacity(slots.len());
        for (public_key, validity) in public_keys.into_iter().zip(slots) {
            let issuer_signature = crypto.sign(&self.keys.secret, &zeta(&public_key, validity))?;
            let id = PseudonymId::of(&public_key);
            self.issuance_log.insert(id, ticket.token);
            out.push(VpkiPseudonym { id, public_key, validity, issuer: self.id, issuer_signature });
        }
        Ok(out)
    }

    fn ticket_of(&self, id: &PseudonymId) -> Option<[u8; 16]> {
        self.issuance_log.get(id).copied()
    }

    fn pseudonyms_of(&self, tickets: &BTreeSet<[u8; 16]>) -> Vec<PseudonymId> {
        self.issuance_log
            .iter()
            .filter(|(_, t)| tickets.contains(*t))
            .map(|(id, _)| *id)
            .collect()
    }

    pub fn issued_count(&self) -> usize {
        self.issuance_log.len()
    }
}

/// A freshly enrolled group member.
#[derive(Clone, Debug)]
pub struct Membership {
    pub handle: SignerIdentity,
    pub gsk: GroupSigningKey,
}

#[derive(Debug)]
pub struct Gm {
    keys: GroupKeys,
    ltca_public: PublicKey,
    consumed: BTreeSet<[u8; 16]>,
    members: BTreeMap<SignerIdentity, [u8; 16]>,
    revoked_members: BTreeSet<SignerIdentity>,
    reuse_attempts: u64,
}

impl Gm {
    pub fn new(crypto: &SharedProvider, ltca_public: PublicKey, rng: &mut dyn RngCore) -> Self {
        Self {
            keys: crypto.group_setup(rng),
            ltca_public,
            consumed: BTreeSet::new(),
            members: BTreeMap::new(),
            revoked_members: BTreeSet::new(),
            reuse_attempts: 0,
        }
    }

    pub fn group_public_key(&self) -> &GroupPublicKey {
        &self.keys.public
    }

    /// Enrolls the holder of `ticket`. A ticket registers at most one member.
    pub fn register(&mut self, crypto: &SharedProvider, ticket: &AnonymousTicket) -> Result<Membership> {
        if !verify_ticket(crypto, &self.ltca_public, ticket) {
            return Err(VpkiError::BadTicket);
        }
        if self.consumed.contains(&ticket.token) {
            self.reuse_attempts += 1;
            return Err(VpkiError::TicketReused);
        }
        let handle = SignerIdentity(self.members.len() as u64 + 1);
        let gsk = crypto.group_join(&self.keys.issuing, handle)?;
        self.consumed.insert(ticket.token);
        self.members.insert(handle, ticket.token);
        Ok(Membership { handle, gsk })
    }

    pub fn open(&self, crypto: &SharedProvider, message: &[u8], sig: &GroupSignature) -> Result<SignerIdentity> {
        Ok(crypto.group_open(&self.keys.opening, message, sig)?)
    }

    pub fn reuse_attempts(&self) -> u64 {
        self.reuse_attempts
    }

    pub fn is_revoked(&self, member: SignerIdentity) -> bool {
        self.revoked_members.contains(&member)
    }

    fn ticket_of(&self, member: SignerIdentity) -> Option<[u8; 16]> {
        self.members.get(&member).copied()
    }
}

/// Monotonically growing revocation list.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevocationList {
    pub version: u64,
    pub identities: BTreeSet<VehicleId>,
    pub pseudonyms: BTreeSet<PseudonymId>,
}

impl RevocationList {
    pub fn is_revoked(&self, id: &PseudonymId) -> bool {
        self.pseudonyms.contains(id)
    }
}

/// Evidence handed to the resolution authority.
#[derive(Clone, Debug)]
pub enum Evidence {
    Pseudonym(PseudonymId),
    GroupSignature { message: Vec<u8>, signature: GroupSignature },
}

impl Evidence {
    pub fn self_certified(p: &SelfCertifiedPseudonym) -> Self {
        Evidence::GroupSignature {
            message: zeta(&p.public_key, p.validity),
            signature: p.group_signature.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Resolution {
    pub identity: VehicleId,
    /// Entities consulted, in order, excluding the resolution authority.
    pub transcript: Vec<Entity>,
}

/// Per-request latency of a vehicle ↔ VPKI interaction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VpkiLatency {
    pub base_rtt_ms: f64,
    pub per_pseudonym_ms: f64,
}

impl Default for VpkiLatency {
    fn default() -> Self {
        Self { base_rtt_ms: 50.0, per_pseudonym_ms: 5.0 }
    }
}

impl VpkiLatency {
    pub fn request_ms(&self, n: usize) -> f64 {
        self.base_rtt_ms + n as f64 * self.per_pseudonym_ms
    }
}

/// The infrastructure ensemble. The resolution authority's operations are
/// the `resolve` and `revoke` methods; its only state is the list and the
/// resolution history.
#[derive(Debug)]
pub struct Vpki {
    crypto: SharedProvider,
    pub ltca: Ltca,
    pub pca: Pca,
    pub gm: Gm,
    revocation: RevocationList,
    resolutions: Vec<Resolution>,
    rng: rand_chacha::ChaCha8Rng,
}

impl Vpki {
    pub fn new(crypto: SharedProvider, seed: u64) -> Self {
        let mut rng = seed::rng(seed, Stream::Vpki, 0);
        let ltca = Ltca::new(&crypto, &mut rng);
        let pca = Pca::new(PcaId(1), &crypto, ltca.public_key().clone(), &mut rng);
        let gm = Gm::new(&crypto, ltca.public_key().clone(), &mut rng);
        Self {
            crypto,
            ltca,
            pca,
            gm,
            revocation: RevocationList::default(),
            resolutions: Vec::new(),
            rng,
        }
    }

    pub fn crypto(&self) -> &SharedProvider {
        &self.crypto
    }

    pub fn register(&mut self, identity: VehicleId) -> Result<Registration> {
        self.ltca.register(identity)
    }

    pub fn issue_ticket(&mut self, identity: VehicleId) -> Result<AnonymousTicket> {
        self.ltca.issue_ticket(&self.crypto, identity, &mut self.rng)
    }

    pub fn issue_pseudonyms(
        &mut self,
        ticket: &AnonymousTicket,
        grid: &TimeGrid,
        from: SimTime,
        public_keys: Vec<PublicKey>,
    ) -> Result<Vec<VpkiPseudonym>> {
        self.pca.issue_pseudonyms(&self.crypto, ticket, grid, from, public_keys)
    }

    pub fn gm_register(&mut self, ticket: &AnonymousTicket) -> Result<Membership> {
        self.gm.register(&self.crypto, ticket)
    }

    /// Registration, a ticket and GM enrollment in one go, as done at
    /// bootstrap.
    pub fn enroll(&mut self, identity: VehicleId) -> Result<Membership> {
        self.register(identity)?;
        let ticket = self.issue_ticket(identity)?;
        self.gm_register(&ticket)
    }

    pub fn revocation_list(&self) -> &RevocationList {
        &self.revocation
    }

    pub fn resolutions(&self) -> &[Resolution] {
        &self.resolutions
    }

    /// Resolves evidence to a long-term identity. A pseudonym goes
    /// PCA (pseudonym → ticket) then LTCA (ticket → identity); a group
    /// signature goes GM (open → member → ticket) then LTCA.
    pub fn resolve(&mut self, evidence: &Evidence) -> Result<Resolution> {
        let (ticket, mut transcript) = match evidence {
            Evidence::Pseudonym(id) => (self.pca.ticket_of(id), vec![Entity::Pca]),
            Evidence::GroupSignature { message, signature } => {
                let member = self.gm.open(&self.crypto, message, signature).map_err(|_| VpkiError::NotFound)?;
                (self.gm.ticket_of(member), vec![Entity::Gm])
            }
        };
        let ticket = ticket.ok_or(VpkiError::NotFound)?;
        transcript.push(Entity::Ltca);
        let identity = self.ltca.identity_of_ticket(&ticket).ok_or(VpkiError::NotFound)?;
        let resolution = Resolution { identity, transcript };
        self.resolutions.push(resolution.clone());
        Ok(resolution)
    }

    /// Evicts `identity`: no further tickets, its tickets are void at the PCA,
    /// its group membership is marked revoked and every pseudonym issued to
    /// it is listed. Revoking twice leaves the list unchanged.
    pub fn revoke(&mut self, identity: VehicleId) -> Result<&RevocationList> {
        if !self.ltca.is_registered(identity) {
            return Err(VpkiError::Unregistered(identity));
        }
        let tickets: BTreeSet<[u8; 16]> = self.ltca.tickets_of(identity).into_iter().collect();
        let mut changed = self.ltca.revoked.insert(identity);
        changed |= self.revocation.identities.insert(identity);
        for t in &tickets {
            self.pca.revoked_tickets.insert(*t);
        }
        for id in self.pca.pseudonyms_of(&tickets) {
            changed |= self.revocation.pseudonyms.insert(id);
        }
        let members: Vec<SignerIdentity> = self
            .gm
            .members
            .iter()
            .filter(|(_, t)| tickets.contains(*t))
            .map(|(m, _)| *m)
            .collect();
        self.gm.revoked_members.extend(members);
        if changed {
            self.revocation.version += 1;
        }
        Ok(&self.revocation)
    }

    /// Lists self-certified pseudonyms attributed to a revoked vehicle (after
    /// resolving them through the GM).
    pub fn revoke_pseudonym(&mut self, id: PseudonymId) {
        if self.revocation.pseudonyms.insert(id) {
            self.revocation.version += 1;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub start_s: f64,
    pub end_s: f64,
}

impl Window {
    fn contains(&self, t: SimTime) -> bool {
        let s = t.as_secs_f64();
        self.start_s <= s && s < self.end_s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageWindow {
    pub start_s: f64,
    pub end_s: f64,
    /// Vehicles this window applies to; all vehicles when absent.
    #[serde(default)]
    pub vehicles: Option<Vec<u32>>,
}

/// Reachability configuration, as written in scenario files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReachabilityConfig {
    AlwaysOn,
    /// Exactly ⌈p · population⌉ vehicles, chosen by seed, cannot reach the
    /// VPKI during `outage` (the whole run when absent).
    DisconnectedFraction {
        p: f64,
        #[serde(default)]
        outage: Option<Window>,
    },
    /// Nobody reaches the VPKI during the window.
    Outage { start_s: f64, end_s: f64 },
    /// The VPKI is reachable only inside the listed RSU coverage windows.
    Coverage { windows: Vec<CoverageWindow> },
}

impl Default for ReachabilityConfig {
    fn default() -> Self {
        ReachabilityConfig::AlwaysOn
    }
}

impl ReachabilityConfig {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let window_ok = |s: f64, e: f64| s.is_finite() && e.is_finite() && s >= 0.0 && s <= e;
        match self {
            ReachabilityConfig::AlwaysOn => Ok(()),
            ReachabilityConfig::DisconnectedFraction { p, outage } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(format!("reachability p must be in [0,1], got {p}"));
                }
                match outage {
                    Some(w) if !window_ok(w.start_s, w.end_s) => Err("invalid outage window".into()),
                    _ => Ok(()),
                }
            }
            ReachabilityConfig::Outage { start_s, end_s } if !window_ok(*start_s, *end_s) => {
                Err("invalid outage window".into())
            }
            ReachabilityConfig::Outage { .. } => Ok(()),
            ReachabilityConfig::Coverage { windows } => windows
                .iter()
                .all(|w| window_ok(w.start_s, w.end_s))
                .then_some(())
                .ok_or_else(|| "invalid coverage window".into()),
        }
    }
}

/// Deterministic per-vehicle, per-time availability of the VPKI.
#[derive(Clone, Debug)]
pub struct ReachabilityModel {
    config: ReachabilityConfig,
    disconnected: BTreeSet<VehicleId>,
}

impl ReachabilityModel {
    pub fn new(config: ReachabilityConfig, population: usize, seed: u64) -> Self {
        let mut disconnected = BTreeSet::new();
        if let ReachabilityConfig::DisconnectedFraction { p, .. } = &config {
            // Guard against 0.01 * 100 landing a hair above 1.
            let count = ((p * population as f64) - 1e-9).ceil().max(0.0) as usize;
            let mut ids: Vec<u32> = (0..population as u32).collect();
            ids.shuffle(&mut seed::rng(seed, Stream::Reachability, 0));
            disconnected.extend(ids.into_iter().take(count.min(population)).map(VehicleId));
        }
        Self { config, disconnected }
    }

    pub fn always_on() -> Self {
        Self::new(ReachabilityConfig::AlwaysOn, 0, 0)
    }

    pub fn config(&self) -> &ReachabilityConfig {
        &self.config
    }

    /// Vehicles selected as disconnected in fraction mode.
    pub fn disconnected(&self) -> &BTreeSet<VehicleId> {
        &self.disconnected
    }

    pub fn is_reachable(&self, vehicle: VehicleId, t: SimTime) -> bool {
        match &self.config {
            ReachabilityConfig::AlwaysOn => true,
            ReachabilityConfig::DisconnectedFraction { outage, .. } => {
                !(self.disconnected.contains(&vehicle) && outage.map_or(true, |w| w.contains(t)))
            }
            ReachabilityConfig::Outage { start_s, end_s } => {
                !Window { start_s: *start_s, end_s: *end_s }.contains(t)
            }
            ReachabilityConfig::Coverage { windows } => windows.iter().any(|w| {
                Window { start_s: w.start_s, end_s: w.end_s }.contains(t)
                    && w.vehicles.as_ref().map_or(true, |vs| vs.contains(&vehicle.0))
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{MockProvider, ProviderKind};
    use std::sync::Arc;

    fn vpki() -> Vpki {
        Vpki::new(Arc::new(MockProvider), 3)
    }

    fn keys(v: &Vpki, n: usize) -> Vec<PublicKey> {
        let mut rng = seed::rng(1, Stream::Keys, 0);
        (0..n).map(|_| v.crypto().keygen(&mut rng).public).collect()
    }

    #[test]
    fn registration() {
        let mut v = vpki();
        v.register(VehicleId(1)).unwrap();
        assert_eq!(v.register(VehicleId(1)), Err(VpkiError::DuplicateRegistration(VehicleId(1))));
        let t = v.issue_ticket(VehicleId(1)).unwrap();
        assert!(verify_ticket(v.crypto(), v.ltca.public_key(), &t));
        assert_eq!(v.issue_ticket(VehicleId(2)), Err(VpkiError::Unregistered(VehicleId(2))));
    }

    #[test]
    fn issuance_tiles_slots() {
        let mut v = vpki();
        let grid = TimeGrid::from_secs(600, 60).unwrap();
        v.register(VehicleId(1)).unwrap();
        let t = v.issue_ticket(VehicleId(1)).unwrap();
        let ks = keys(&v, 10);
        let ps = v.issue_pseudonyms(&t, &grid, SimTime::ZERO, ks).unwrap();
        assert_eq!(ps.len(), 10);
        for (i, p) in ps.iter().enumerate() {
            let s = i as u64 * 60;
            assert_eq!(p.validity, crate::credentials::Validity::secs(s, s + 60));
            assert!(verify_vpki_pseudonym(v.crypto(), v.pca.public_key(), &grid, p));
        }
        let one = v.issue_pseudonyms(&t, &grid, SimTime::from_secs(125), keys(&v, 1)).unwrap();
        assert_eq!(one[0].validity, crate::credentials::Validity::secs(120, 180));
        assert_eq!(v.issue_pseudonyms(&t, &grid, SimTime::ZERO, vec![]), Err(VpkiError::EmptyRequest));

        let mut tampered = t.clone();
        tampered.token[0] ^= 1;
        assert_eq!(
            v.issue_pseudonyms(&tampered, &grid, SimTime::ZERO, keys(&v, 1)),
            Err(VpkiError::BadTicket)
        );
    }

    #[test]
    fn gm_ticket_is_single_use() {
        let mut v = vpki();
        v.register(VehicleId(4)).unwrap();
        let t = v.issue_ticket(VehicleId(4)).unwrap();
        let m = v.gm_register(&t).unwrap();
        assert_eq!(v.gm_register(&t).unwrap_err(), VpkiError::TicketReused);
        assert_eq!(v.gm.reuse_attempts(), 1);
        let mut rng = seed::rng(0, Stream::Keys, 1);
        let sig = v.crypto().group_sign(&m.gsk, b"zeta", &mut rng).unwrap();
        assert!(v.crypto().group_verify(v.gm.group_public_key(), b"zeta", &sig).unwrap());
    }

    #[test]
    fn resolution_chains_through_two_entities() {
        let mut v = vpki();
        let grid = TimeGrid::from_secs(600, 60).unwrap();
        let members: Vec<Membership> = (0..10).map(|i| v.enroll(VehicleId(i)).unwrap()).collect();
        let t7 = v.issue_ticket(VehicleId(7)).unwrap();
        let ps = v.issue_pseudonyms(&t7, &grid, SimTime::ZERO, keys(&v, 2)).unwrap();
        let r = v.resolve(&Evidence::Pseudonym(ps[1].id)).unwrap();
        assert_eq!(r.identity, VehicleId(7));
        assert_eq!(r.transcript, vec![Entity::Pca, Entity::Ltca]);

        let mut rng = seed::rng(2, Stream::Keys, 0);
        let sig = v.crypto().group_sign(&members[3].gsk, b"zeta", &mut rng).unwrap();
        let r = v
            .resolve(&Evidence::GroupSignature { message: b"zeta".to_vec(), signature: sig })
            .unwrap();
        assert_eq!(r.identity, VehicleId(3));
        assert_eq!(r.transcript, vec![Entity::Gm, Entity::Ltca]);

        assert_eq!(v.resolve(&Evidence::Pseudonym(PseudonymId([7; 16]))), Err(VpkiError::NotFound));
        assert_eq!(
            v.resolve(&Evidence::GroupSignature { message: vec![1], signature: GroupSignature(vec![9; 64]) }),
            Err(VpkiError::NotFound)
        );
    }

    #[test]
    fn revocation() {
        let mut v = vpki();
        let grid = TimeGrid::from_secs(600, 60).unwrap();
        v.register(VehicleId(5)).unwrap();
        let t = v.issue_ticket(VehicleId(5)).unwrap();
        let ps = v.issue_pseudonyms(&t, &grid, SimTime::ZERO, keys(&v, 3)).unwrap();
        let before = v.revocation_list().version;
        let list = v.revoke(VehicleId(5)).unwrap().clone();
        assert_eq!(list.version, before + 1);
        assert!(ps.iter().all(|p| list.is_revoked(&p.id)));
        assert_eq!(v.issue_ticket(VehicleId(5)), Err(VpkiError::Revoked(VehicleId(5))));
        assert_eq!(
            v.issue_pseudonyms(&t, &grid, SimTime::ZERO, keys(&v, 1)),
            Err(VpkiError::RevokedTicket)
        );
        let again = v.revoke(VehicleId(5)).unwrap();
        assert_eq!(again.version, before + 1);
        assert_eq!(again.identities.len(), 1);
        assert_eq!(v.revoke(VehicleId(99)).unwrap_err(), VpkiError::Unregistered(VehicleId(99)));
    }

    #[test]
    fn reachability_modes() {
        let on = ReachabilityModel::always_on();
        assert!(on.is_reachable(VehicleId(3), SimTime::from_secs(10)));

        let frac = ReachabilityModel::new(
            ReachabilityConfig::DisconnectedFraction { p: 0.01, outage: None },
            100,
            7,
        );
        assert_eq!(frac.disconnected().len(), 1);
        let unreachable = (0..100)
            .filter(|i| !frac.is_reachable(VehicleId(*i), SimTime::from_secs(500)))
            .count();
        assert_eq!(unreachable, 1);
        let again = ReachabilityModel::new(frac.config().clone(), 100, 7);
        assert_eq!(again.disconnected(), frac.disconnected());

        let frac = ReachabilityModel::new(
            ReachabilityConfig::DisconnectedFraction { p: 0.15, outage: None },
            10,
            7,
        );
        assert_eq!(frac.disconnected().len(), 2);

        let cov = ReachabilityModel::new(
            ReachabilityConfig::Coverage {
                windows: vec![CoverageWindow { start_s: 0.0, end_s: 300.0, vehicles: None }],
            },
            10,
            0,
        );
        assert!(cov.is_reachable(VehicleId(0), SimTime::from_secs(100)));
        assert!(!cov.is_reachable(VehicleId(0), SimTime::from_secs(400)));
    }

    #[test]
    fn works_with_ecdsa_provider() {
        if let Ok(p) = ProviderKind::Ecdsa.build() {
            let mut v = Vpki::new(p, 1);
            let m = v.enroll(VehicleId(9)).unwrap();
            let mut rng = seed::rng(0, Stream::Keys, 0);
            let sig = v.crypto().group_sign(&m.gsk, b"z", &mut rng).unwrap();
            let r = v.resolve(&Evidence::GroupSignature { message: b"z".to_vec(), signature: sig }).unwrap();
            assert_eq!(r.identity, VehicleId(9));
        }
    }
}
