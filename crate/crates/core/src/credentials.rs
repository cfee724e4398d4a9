//! Pseudonyms, tickets and the Γ-grid alignment that makes all pseudonym
//! lifetimes in a region indistinguishable.
//!
//! Time is virtual and counted in whole milliseconds. Validity intervals are
//! half-open, `[start, end)`, so consecutive pseudonyms never overlap at a
//! boundary instant.

use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::crypto::{sha256, GroupSignature, PublicKey, SecretKey, Signature};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GridError {
    #[error("invalid time grid: {0}")]
    Invalid(String),
    #[error("time {t} precedes the grid origin {origin}")]
    BeforeOrigin { t: SimTime, origin: SimTime },
    #[error("observed interval {observed} has length {len} ms, expected tau_p = {tau_p_ms} ms")]
    Inconsistent { observed: Validity, len: u64, tau_p_ms: u64 },
    #[error("no grid information: own pseudonym history is stale and no neighbor CAM was observed")]
    Unknown,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PoolError {
    #[error("pseudonym {new} overlaps {existing} of the same flavor")]
    Overlap { new: Validity, existing: Validity },
}

/// Virtual time in milliseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_secs(s: u64) -> Self {
        SimTime(s * 1000)
    }

    /// Rounds to the nearest millisecond.
    pub fn from_secs_f64(s: f64) -> Self {
        SimTime((s * 1000.0).round().max(0.0) as u64)
    }

    pub fn millis(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn saturating_sub(self, ms: u64) -> SimTime {
        SimTime(self.0.saturating_sub(ms))
    }
}

impl Add<u64> for SimTime {
    type Output = SimTime;
    fn add(self, ms: u64) -> SimTime {
        SimTime(self.0 + ms)
    }
}

impl Sub for SimTime {
    type Output = u64;
    fn sub(self, rhs: SimTime) -> u64 {
        self.0 - rhs.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:03}s", self.0 / 1000, self.0 % 1000)
    }
}

/// Half-open validity interval `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Validity {
    pub start: SimTime,
    pub end: SimTime,
}

impl Validity {
    pub fn new(start: SimTime, end: SimTime) -> Self {
        Self { start, end }
    }

    pub fn secs(start: u64, end: u64) -> Self {
        Self::new(SimTime::from_secs(start), SimTime::from_secs(end))
    }

    pub fn contains(&self, t: SimTime) -> bool {
        self.start <= t && t < self.end
    }

    pub fn overlaps(&self, other: &Validity) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn len_ms(&self) -> u64 {
        self.end.0.saturating_sub(self.start.0)
    }
}

impl fmt::Display for Validity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// Region-wide time grid: Γ windows subdivided into τ_P pseudonym slots,
/// anchored at the VPKI clock origin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    gamma_ms: u64,
    tau_p_ms: u64,
    origin: SimTime,
}

impl TimeGrid {
    pub fn new(gamma_ms: u64, tau_p_ms: u64, origin: SimTime) -> Result<Self, GridError> {
        if gamma_ms == 0 || tau_p_ms == 0 {
            return Err(GridError::Invalid("gamma and tau_p must be positive".into()));
        }
        if gamma_ms % tau_p_ms != 0 {
            return Err(GridError::Invalid(format!(
                "gamma ({gamma_ms} ms) is not an integer multiple of tau_p ({tau_p_ms} ms)"
            )));
        }
        Ok(Self { gamma_ms, tau_p_ms, origin })
    }

    pub fn from_secs(gamma_s: u64, tau_p_s: u64) -> Result<Self, GridError> {
        Self::new(gamma_s * 1000, tau_p_s * 1000, SimTime::ZERO)
    }

    pub fn gamma_ms(&self) -> u64 {
        self.gamma_ms
    }

    pub fn tau_p_ms(&self) -> u64 {
        self.tau_p_ms
    }

    pub fn origin(&self) -> SimTime {
        self.origin
    }

    /// Number of slots per Γ, the default batch size.
    pub fn slots_per_gamma(&self) -> usize {
        (self.gamma_ms / self.tau_p_ms) as usize
    }

    fn since_origin(&self, t: SimTime) -> Result<u64, GridError> {
        if t < self.origin {
            return Err(GridError::BeforeOrigin { t, origin: self.origin });
        }
        Ok(t - self.origin)
    }

    /// The aligned pseudonym slot containing `t`.
    pub fn slot_bounds(&self, t: SimTime) -> Result<Validity, GridError> {
        let since = self.since_origin(t)?;
        let start = self.origin + since / self.tau_p_ms * self.tau_p_ms;
        Ok(Validity::new(start, start + self.tau_p_ms))
    }

    /// The Γ window containing `t`.
    pub fn gamma_bounds(&self, t: SimTime) -> Result<Validity, GridError> {
        let since = self.since_origin(t)?;
        let start = self.origin + since / self.gamma_ms * self.gamma_ms;
        Ok(Validity::new(start, start + self.gamma_ms))
    }

    pub fn slot_index(&self, t: SimTime) -> Result<u64, GridError> {
        Ok(self.since_origin(t)? / self.tau_p_ms)
    }

    pub fn is_slot_boundary(&self, t: SimTime) -> bool {
        t >= self.origin && (t - self.origin) % self.tau_p_ms == 0
    }

    pub fn is_gamma_boundary(&self, t: SimTime) -> bool {
        t >= self.origin && (t - self.origin) % self.gamma_ms == 0
    }

    /// `count` consecutive slots starting with the slot containing `from`.
    pub fn tile(&self, from: SimTime, count: usize) -> Result<Vec<Validity>, GridError> {
        let first = self.slot_bounds(from)?;
        Ok((0..count as u64)
            .map(|i| {
                let start = first.start + i * self.tau_p_ms;
                Validity::new(start, start + self.tau_p_ms)
            })
            .collect())
    }

    /// Rebuilds this grid's Γ and τ_P around an origin offset recovered from
    /// a neighbor's pseudonym.
    pub fn with_offset(&self, offset_ms: u64) -> TimeGrid {
        TimeGrid {
            gamma_ms: self.gamma_ms,
            tau_p_ms: self.tau_p_ms,
            origin: SimTime(offset_ms % self.tau_p_ms),
        }
    }
}

/// Recovers the grid phase (origin offset modulo τ_P) from a neighbor's
/// pseudonym lifetime piggybacked in its CAM.
pub fn infer_grid_from_neighbor(observed: Validity, tau_p_ms: u64) -> Result<u64, GridError> {
    let len = observed.len_ms();
    if observed.end <= observed.start || len != tau_p_ms || tau_p_ms == 0 {
        return Err(GridError::Inconsistent { observed, len, tau_p_ms });
    }
    Ok(observed.start.0 % tau_p_ms)
}

/// Digest of a pseudonym's public key.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PseudonymId(#[serde(with = "hex_id")] pub [u8; 16]);

impl PseudonymId {
    pub fn of(public_key: &PublicKey) -> Self {
        let digest = sha256(&[b"rhythm/pseudonym-id", &public_key.0]);
        PseudonymId(digest[..16].try_into().unwrap())
    }
}

impl fmt::Display for PseudonymId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for PseudonymId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PseudonymId({})", hex::encode(&self.0[..6]))
    }
}

mod hex_id {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8; 16], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 16], D::Error> {
        let s = String::deserialize(d)?;
        let v = hex::decode(s).map_err(serde::de::Error::custom)?;
        v.try_into().map_err(|_| serde::de::Error::custom("pseudonym id must be 16 bytes"))
    }
}

/// Canonical encoding of ζ = (public key, t_s, t_e): the bytes certified by
/// both the PCA and the group signature.
pub fn zeta(public_key: &PublicKey, validity: Validity) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + public_key.0.len());
    out.extend_from_slice(b"rhythm/zeta/v1");
    out.extend_from_slice(&(public_key.0.len() as u32).to_be_bytes());
    out.extend_from_slice(&public_key.0);
    out.extend_from_slice(&validity.start.0.to_be_bytes());
    out.extend_from_slice(&validity.end.0.to_be_bytes());
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    VpkiProvided,
    SelfCertified,
}

impl Flavor {
    pub fn as_str(self) -> &'static str {
        match self {
            Flavor::VpkiProvided => "vpki",
            Flavor::SelfCertified => "self_certified",
        }
    }
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PcaId(pub u32);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VpkiPseudonym {
    pub id: PseudonymId,
    pub public_key: PublicKey,
    pub validity: Validity,
    pub issuer: PcaId,
    pub issuer_signature: Signature,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfCertifiedPseudonym {
    pub id: PseudonymId,
    pub public_key: PublicKey,
    pub validity: Validity,
    pub group_signature: GroupSignature,
}

/// Public part of a pseudonym, as attached to CAMs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "flavor", rename_all = "snake_case")]
pub enum Pseudonym {
    VpkiProvided(VpkiPseudonym),
    SelfCertified(SelfCertifiedPseudonym),
}

impl Pseudonym {
    pub fn flavor(&self) -> Flavor {
        match self {
            Pseudonym::VpkiProvided(_) => Flavor::VpkiProvided,
            Pseudonym::SelfCertified(_) => Flavor::SelfCertified,
        }
    }

    pub fn id(&self) -> PseudonymId {
        match self {
            Pseudonym::VpkiProvided(p) => p.id,
            Pseudonym::SelfCertified(p) => p.id,
        }
    }

    pub fn public_key(&self) -> &PublicKey {
        match self {
            Pseudonym::VpkiProvided(p) => &p.public_key,
            Pseudonym::SelfCertified(p) => &p.public_key,
        }
    }

    pub fn validity(&self) -> Validity {
        match self {
            Pseudonym::VpkiProvided(p) => p.validity,
            Pseudonym::SelfCertified(p) => p.validity,
        }
    }
}

/// LTCA-signed token presented to the PCA and the GM. Carries no identity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnonymousTicket {
    #[serde(with = "hex_id")]
    pub token: [u8; 16],
    pub ltca_signature: Signature,
}

impl AnonymousTicket {
    pub fn signed_body(token: &[u8; 16]) -> Vec<u8> {
        [&b"rhythm/ticket/v1"[..], token].concat()
    }
}

/// A pseudonym together with its private key, as held by the vehicle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Credential<P> {
    pub pseudonym: P,
    pub secret: SecretKey,
}

/// A borrowed pool entry of either flavor.
#[derive(Clone, Copy, Debug)]
pub enum PoolEntry<'a> {
    Vpki(&'a Credential<VpkiPseudonym>),
    SelfCertified(&'a Credential<SelfCertifiedPseudonym>),
}

impl PoolEntry<'_> {
    pub fn flavor(&self) -> Flavor {
        match self {
            PoolEntry::Vpki(_) => Flavor::VpkiProvided,
            PoolEntry::SelfCertified(_) => Flavor::SelfCertified,
        }
    }

    pub fn validity(&self) -> Validity {
        match self {
            PoolEntry::Vpki(c) => c.pseudonym.validity,
            PoolEntry::SelfCertified(c) => c.pseudonym.validity,
        }
    }

    pub fn id(&self) -> PseudonymId {
        match self {
            PoolEntry::Vpki(c) => c.pseudonym.id,
            PoolEntry::SelfCertified(c) => c.pseudonym.id,
        }
    }

    pub fn secret(&self) -> &SecretKey {
        match self {
            PoolEntry::Vpki(c) => &c.secret,
            PoolEntry::SelfCertified(c) => &c.secret,
        }
    }

    pub fn to_pseudonym(&self) -> Pseudonym {
        match self {
            PoolEntry::Vpki(c) => Pseudonym::VpkiProvided(c.pseudonym.clone()),
            PoolEntry::SelfCertified(c) => Pseudonym::SelfCertified(c.pseudonym.clone()),
        }
    }
}

trait HasValidity {
    fn validity(&self) -> Validity;
}

impl HasValidity for Credential<VpkiPseudonym> {
    fn validity(&self) -> Validity {
        self.pseudonym.validity
    }
}

impl HasValidity for Credential<SelfCertifiedPseudonym> {
    fn validity(&self) -> Validity {
        self.pseudonym.validity
    }
}

fn insert_sorted<T: HasValidity>(list: &mut Vec<T>, item: T) -> Result<(), PoolError> {
    let new = item.validity();
    if let Some(existing) = list.iter().find(|c| c.validity().overlaps(&new)) {
        return Err(PoolError::Overlap { new, existing: existing.validity() });
    }
    let pos = list.partition_point(|c| c.validity().start < new.start);
    list.insert(pos, item);
    Ok(())
}

fn covering<T: HasValidity>(list: &[T], t: SimTime) -> Option<&T> {
    let pos = list.partition_point(|c| c.validity().start <= t);
    pos.checked_sub(1).map(|i| &list[i]).filter(|c| c.validity().contains(t))
}

/// Per-vehicle pseudonym store. Within a flavor, intervals never overlap.
#[derive(Clone, Debug, Default)]
pub struct PseudonymPool {
    vpki: Vec<Credential<VpkiPseudonym>>,
    self_certified: Vec<Credential<SelfCertifiedPseudonym>>,
}

impl PseudonymPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_vpki(&mut self, c: Credential<VpkiPseudonym>) -> Result<(), PoolError> {
        insert_sorted(&mut self.vpki, c)
    }

    pub fn insert_self_certified(&mut self, c: Credential<SelfCertifiedPseudonym>) -> Result<(), PoolError> {
        insert_sorted(&mut self.self_certified, c)
    }

    pub fn vpki(&self) -> &[Credential<VpkiPseudonym>] {
        &self.vpki
    }

    pub fn self_certified(&self) -> &[Credential<SelfCertifiedPseudonym>] {
        &self.self_certified
    }

    pub fn covering(&self, flavor: Flavor, t: SimTime) -> Option<PoolEntry<'_>> {
        match flavor {
            Flavor::VpkiProvided => covering(&self.vpki, t).map(PoolEntry::Vpki),
            Flavor::SelfCertified => covering(&self.self_certified, t).map(PoolEntry::SelfCertified),
        }
    }

    /// The pseudonym valid at `t`, preferring `preferred` when both flavors
    /// cover `t`.
    pub fn current(&self, t: SimTime, preferred: Flavor) -> Option<PoolEntry<'_>> {
        let other = match preferred {
            Flavor::VpkiProvided => Flavor::SelfCertified,
            Flavor::SelfCertified => Flavor::VpkiProvided,
        };
        self.covering(preferred, t).or_else(|| self.covering(other, t))
    }

    /// True iff some instant of `[t, t + horizon)` (or `t` itself when the
    /// horizon is zero) is not covered by a VPKI-provided pseudonym.
    pub fn is_exhausted(&self, t: SimTime, horizon_ms: u64) -> bool {
        self.vpki_coverage_end(t).map_or(true, |end| end < t + horizon_ms.max(1))
    }

    /// End of the gap-free run of VPKI-provided pseudonyms starting at `t`,
    /// or `None` if nothing covers `t`.
    pub fn vpki_coverage_end(&self, t: SimTime) -> Option<SimTime> {
        let first = self.vpki.partition_point(|c| c.pseudonym.validity.end <= t);
        let mut end = None;
        for c in &self.vpki[first..] {
            let v = c.pseudonym.validity;
            let reach = end.unwrap_or(t);
            if v.start > reach {
                break;
            }
            end = Some(v.end);
        }
        end
    }

    /// End of the gap-free run of self-certified pseudonyms starting at `t`.
    pub fn self_certified_coverage_end(&self, t: SimTime) -> Option<SimTime> {
        let first = self.self_certified.partition_point(|c| c.pseudonym.validity.end <= t);
        let mut end = None;
        for c in &self.self_certified[first..] {
            let v = c.pseudonym.validity;
            if v.start > end.unwrap_or(t) {
                break;
            }
            end = Some(v.end);
        }
        end
    }

    /// Drops pseudonyms that expired at or before `t`.
    pub fn prune(&mut self, t: SimTime) {
        self.vpki.retain(|c| c.pseudonym.validity.end > t);
        self.self_certified.retain(|c| c.pseudonym.validity.end > t);
    }

    pub fn clear_vpki(&mut self) {
        self.vpki.clear();
    }
}
