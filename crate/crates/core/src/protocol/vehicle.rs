use std::collections::HashSet;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cam::{Cam, CamFields, Position, Rejection};
use super::hsm::{HsmError, HsmSlot};
use super::{opt_in_decision, OptInPolicy, ProtocolConfig};
use crate::credentials::{
    infer_grid_from_neighbor, zeta, Credential, Flavor, GridError, PoolEntry, PseudonymId, PseudonymPool,
    SelfCertifiedPseudonym, SimTime, TimeGrid, Validity, VpkiPseudonym,
};
use crate::crypto::{CryptoError, CryptoProvider, GroupSigningKey, KeyPair, SecretKey};
use crate::seed::{self, Stream};
use crate::vpki::VehicleId;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum InitError {
    #[error("vehicle holds no group signing key")]
    NoGroupKey,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum BeaconError {
    #[error("beacon suppressed at {0}: no valid key loaded")]
    Suppressed(SimTime),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum UpdateError {
    #[error("{0} is not a slot boundary")]
    NotSlotBoundary(SimTime),
    #[error(transparent)]
    Hsm(#[from] HsmError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// How a vehicle reacts to flags.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleRole {
    #[default]
    Normal,
    /// Ignores every flag; never opts in.
    NeverJoin,
    /// Raises the flag in every CAM whatever its connectivity.
    CloggingAttacker,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagState {
    /// The flag is active on `[since, expires)`; `expires` is always the end
    /// of the Γ in which it was last set or refreshed.
    pub since: SimTime,
    pub expires: SimTime,
    /// Hop distance from the nearest initiator seen.
    pub hops: u32,
    /// Newest initiation time observed, own or relayed.
    pub last_seen: SimTime,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MisbehaviorReport {
    pub t: SimTime,
    pub evidence: PseudonymId,
    pub reason: Rejection,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum CamAction {
    /// Payload accepted. `certificate_checked` is true the first time this
    /// pseudonym was seen, when its certification had to be verified.
    Accept { certificate_checked: bool },
    SetFlag { until: SimTime, newly_set: bool },
    Relay,
    ScheduleOptIn,
    IgnoreFlag,
    LearnGrid { offset_ms: u64 },
    Drop { reason: Rejection },
    Report(MisbehaviorReport),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateReason {
    /// Flag active and the draw came up true.
    OptIn,
    /// The default: a VPKI pseudonym covers the slot.
    Vpki,
    /// No VPKI pseudonym covers the slot.
    Forced,
    /// Nothing to sign with.
    Silent,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateOutcome {
    pub flavor: Option<Flavor>,
    pub pseudonym: Option<PseudonymId>,
    pub reason: UpdateReason,
    /// Self-certified pseudonyms generated during this update.
    pub generated: usize,
}

/// The per-vehicle protocol state.
#[derive(Debug)]
pub struct VehicleState {
    pub identity: VehicleId,
    pub role: VehicleRole,
    pub policy: OptInPolicy,
    pub config: ProtocolConfig,
    pool: PseudonymPool,
    /// Flavor in use; `None` while silent.
    mode: Option<Flavor>,
    flag: Option<FlagState>,
    initiating: bool,
    gsk: Option<GroupSigningKey>,
    hsm: HsmSlot,
    /// Γ and τ_P are region-wide constants; only the phase can be unknown.
    shape: TimeGrid,
    grid: Option<TimeGrid>,
    opt_in_rng: ChaCha8Rng,
    key_rng: ChaCha8Rng,
    verified: HashSet<PseudonymId>,
    reports: Vec<MisbehaviorReport>,
}

impl VehicleState {
    pub fn new(
        identity: VehicleId,
        grid: Option<TimeGrid>,
        shape: TimeGrid,
        policy: OptInPolicy,
        config: ProtocolConfig,
        seed: u64,
    ) -> Self {
        let idx = identity.0 as u64;
        Self {
            identity,
            role: VehicleRole::Normal,
            policy,
            config,
            pool: PseudonymPool::new(),
            mode: None,
            flag: None,
            initiating: false,
            gsk: None,
            hsm: HsmSlot::new(),
            shape,
            grid,
            opt_in_rng: seed::rng(seed, Stream::OptIn, idx),
            key_rng: seed::rng(seed, Stream::Keys, idx),
            verified: HashSet::new(),
            reports: Vec::new(),
        }
    }

    pub fn with_group_key(mut self, gsk: GroupSigningKey) -> Self {
        self.gsk = Some(gsk);
        self
    }

    pub fn with_role(mut self, role: VehicleRole) -> Self {
        self.role = role;
        self
    }

    pub fn pool(&self) -> &PseudonymPool {
        &self.pool
    }

    pub fn mode(&self) -> Option<Flavor> {
        self.mode
    }

    pub fn flag(&self) -> Option<FlagState> {
        self.flag
    }

    pub fn flag_active(&self, t: SimTime) -> bool {
        self.flag.is_some_and(|f| f.since <= t && t < f.expires)
    }

    pub fn is_initiating(&self) -> bool {
        self.initiating
    }

    pub fn has_group_key(&self) -> bool {
        self.gsk.is_some()
    }

    pub fn grid(&self) -> Option<&TimeGrid> {
        self.grid.as_ref()
    }

    pub fn hsm(&self) -> &HsmSlot {
        &self.hsm
    }

    /// Whether this pseudonym's certification was already verified during
    /// the current slot.
    pub fn has_verified(&self, id: &PseudonymId) -> bool {
        self.verified.contains(id)
    }

    pub fn reports(&self) -> &[MisbehaviorReport] {
        &self.reports
    }

    /// Hands pending misbehavior reports to the RA; only possible while the
    /// VPKI is reachable.
    pub fn deliver_reports(&mut self, reachable: bool) -> Vec<MisbehaviorReport> {
        if reachable {
            std::mem::take(&mut self.reports)
        } else {
            Vec::new()
        }
    }

    /// Fresh key pairs whose public halves go to the PCA.
    pub fn fresh_keys(&mut self, crypto: &dyn CryptoProvider, n: usize) -> Vec<KeyPair> {
        (0..n).map(|_| crypto.keygen(&mut self.key_rng)).collect()
    }

    /// Stores PCA-issued pseudonyms. Slots already covered are skipped. A
    /// refill that ends exhaustion ends this vehicle's own initiation.
    pub fn accept_vpki_batch(&mut self, batch: Vec<(SecretKey, VpkiPseudonym)>, t: SimTime, horizon_ms: u64) -> usize {
        let mut stored = 0;
        for (secret, pseudonym) in batch {
            if self.pool.insert_vpki(Credential { pseudonym, secret }).is_ok() {
                stored += 1;
            }
        }
        if self.initiating && !self.pool.is_exhausted(t, horizon_ms) {
            self.initiating = false;
            if !self.config.keep_switching_after_refill {
                self.flag = None;
            }
        }
        stored
    }

    /// Loads a preissued VPKI pool and a known grid, as at bootstrap.
    pub fn preload(&mut self, batch: Vec<(SecretKey, VpkiPseudonym)>) {
        for (secret, pseudonym) in batch {
            let _ = self.pool.insert_vpki(Credential { pseudonym, secret });
        }
    }

    fn gamma_bounds(&self, t: SimTime) -> Validity {
        let grid = self.grid.unwrap_or(self.shape);
        grid.gamma_bounds(t).unwrap_or(Validity::new(t, t + grid.gamma_ms()))
    }

    fn gamma_end(&self, t: SimTime) -> SimTime {
        self.gamma_bounds(t).end
    }

    fn own_flag(&self, now: SimTime) -> FlagState {
        let since = self.flag.filter(|_| self.flag_active(now)).map_or(now, |f| f.since);
        FlagState { since, expires: self.gamma_end(now), hops: 0, last_seen: now }
    }

    fn generate(&mut self, crypto: &dyn CryptoProvider, validity: Validity) -> Result<SelfCertifiedPseudonym, InitError> {
        let gsk = self.gsk.as_ref().ok_or(InitError::NoGroupKey)?;
        let kp = crypto.keygen(&mut self.key_rng);
        let group_signature = crypto.group_sign(gsk, &zeta(&kp.public, validity), &mut self.key_rng)?;
        let pseudonym = SelfCertifiedPseudonym {
            id: PseudonymId::of(&kp.public),
            public_key: kp.public,
            validity,
            group_signature,
        };
        self.pool
            .insert_self_certified(Credential { pseudonym: pseudonym.clone(), secret: kp.secret })
            .expect("caller only generates for uncovered slots");
        Ok(pseudonym)
    }

    /// At `now`, self-certifies `n` consecutive slots starting with the slot
    /// containing `from` (slots already covered by a self-certified
    /// pseudonym are skipped) and raises this vehicle's own flag. Keys are
    /// loaded into the HSM only at their slot's update.
    pub fn rhythm_init(
        &mut self,
        crypto: &dyn CryptoProvider,
        now: SimTime,
        from: SimTime,
        n: usize,
    ) -> Result<Vec<SelfCertifiedPseudonym>, InitError> {
        if self.gsk.is_none() {
            return Err(InitError::NoGroupKey);
        }
        let grid = self.grid.ok_or(GridError::Unknown)?;
        let mut out = Vec::with_capacity(n);
        for slot in grid.tile(from, n)? {
            if self.pool.covering(Flavor::SelfCertified, slot.start).is_none() {
                out.push(self.generate(crypto, slot)?);
            }
        }
        self.flag = Some(self.own_flag(now));
        self.initiating = true;
        Ok(out)
    }

    /// Signs a CAM under the loaded key. The flag goes out while this vehicle
    /// initiates, and is relayed only while the VPKI is unreachable and the
    /// hop budget allows.
    pub fn build_cam(
        &mut self,
        crypto: &dyn CryptoProvider,
        t: SimTime,
        position: Position,
        vpki_reachable: bool,
    ) -> Result<Cam, BeaconError> {
        let attachment = self.hsm.valid_at(t).cloned().ok_or(BeaconError::Suppressed(t))?;
        if self.initiating {
            self.flag = Some(self.own_flag(t));
        }
        let off = (false, 0, SimTime::ZERO);
        let (flag_rhythm, flag_hops, flag_origin) = match self.role {
            VehicleRole::CloggingAttacker => (true, 0, t),
            VehicleRole::NeverJoin => off,
            VehicleRole::Normal => match self.flag.filter(|_| self.flag_active(t)) {
                Some(f) if self.initiating => (true, f.hops, f.last_seen),
                Some(f) if !vpki_reachable && self.config.max_hops.map_or(true, |m| f.hops < m) => {
                    (true, f.hops, f.last_seen)
                }
                _ => off,
            },
        };
        let fields = CamFields { position };
        let body = Cam::signed_bytes(&fields, flag_rhythm, flag_hops, flag_origin, t, &attachment);
        let signature = self.hsm.sign(crypto, t, &body).map_err(|e| match e {
            HsmError::Crypto(c) => BeaconError::Crypto(c),
            _ => BeaconError::Suppressed(t),
        })?;
        Ok(Cam { fields, flag_rhythm, flag_hops, flag_origin, t_now: t, attachment, signature })
    }

    /// Reacts to a received CAM whose verification outcome is `verdict`;
    /// `t` is when processing completes. Flags whose newest initiation is
    /// older than the previous Γ window are stale and ignored.
    pub fn process_verified_cam(
        &mut self,
        cam: &Cam,
        verdict: Result<(), Rejection>,
        t: SimTime,
        vpki_reachable: bool,
    ) -> Vec<CamAction> {
        if let Err(reason) = verdict {
            let mut actions = vec![CamAction::Drop { reason }];
            if reason.is_misbehavior() {
                let report = MisbehaviorReport { t, evidence: cam.attachment.id(), reason };
                self.reports.push(report.clone());
                actions.push(CamAction::Report(report));
            }
            return actions;
        }
        let certificate_checked = self.verified.insert(cam.attachment.id());
        let mut actions = vec![CamAction::Accept { certificate_checked }];
        if self.grid.is_none() {
            if let Ok(offset_ms) = infer_grid_from_neighbor(cam.attachment.validity(), self.shape.tau_p_ms()) {
                self.grid = Some(self.shape.with_offset(offset_ms));
                actions.push(CamAction::LearnGrid { offset_ms });
            }
        }
        if !cam.flag_rhythm {
            return actions;
        }
        let gamma = self.gamma_bounds(t);
        let stale = cam.flag_origin < gamma.start.saturating_sub(gamma.len_ms());
        if vpki_reachable || stale || self.role == VehicleRole::NeverJoin {
            actions.push(CamAction::IgnoreFlag);
            return actions;
        }
        let until = gamma.end;
        let hops = cam.flag_hops.saturating_add(1);
        // A flag that lapsed only at this Γ's start is continued, not restarted.
        let continued = self.flag.filter(|f| f.since <= t && f.expires >= gamma.start);
        let newly_set = continued.is_none();
        let flag = match continued {
            Some(f) => FlagState {
                since: f.since,
                expires: until,
                hops: f.hops.min(hops),
                last_seen: f.last_seen.max(cam.flag_origin),
            },
            None => FlagState { since: t, expires: until, hops, last_seen: cam.flag_origin },
        };
        self.flag = Some(flag);
        actions.push(CamAction::SetFlag { until, newly_set });
        if self.config.max_hops.map_or(true, |m| flag.hops < m) {
            actions.push(CamAction::Relay);
        }
        actions.push(CamAction::ScheduleOptIn);
        actions
    }

    /// Draws this update's opt-in decision from the vehicle's own stream.
    pub fn draw_decision(&mut self) -> bool {
        opt_in_decision(&self.policy, &mut self.opt_in_rng)
    }

    /// Selects the pseudonym for the slot starting at `t` and loads it.
    pub fn pseudonym_update(
        &mut self,
        crypto: &dyn CryptoProvider,
        t: SimTime,
        decision: bool,
    ) -> Result<UpdateOutcome, UpdateError> {
        let Some(grid) = self.grid else {
            return Ok(self.go_silent());
        };
        if !grid.is_slot_boundary(t) {
            return Err(UpdateError::NotSlotBoundary(t));
        }
        self.verified.clear();
        self.select(crypto, &grid, t, decision)
    }

    /// Mid-slot activation for a silent vehicle that just became able to
    /// sign (grid learned, or pool refilled). Never opts in.
    pub fn resume(&mut self, crypto: &dyn CryptoProvider, t: SimTime) -> Result<Option<UpdateOutcome>, UpdateError> {
        if self.hsm.valid_at(t).is_some() {
            return Ok(None);
        }
        let Some(grid) = self.grid else {
            return Ok(None);
        };
        let outcome = self.select(crypto, &grid, t, false)?;
        Ok(outcome.flavor.is_some().then_some(outcome))
    }

    fn go_silent(&mut self) -> UpdateOutcome {
        self.hsm.unload();
        self.mode = None;
        UpdateOutcome { flavor: None, pseudonym: None, reason: UpdateReason::Silent, generated: 0 }
    }

    fn select(
        &mut self,
        crypto: &dyn CryptoProvider,
        grid: &TimeGrid,
        t: SimTime,
        decision: bool,
    ) -> Result<UpdateOutcome, UpdateError> {
        self.pool.prune(t);
        let slot = grid.slot_bounds(t).map_err(|_| UpdateError::NotSlotBoundary(t))?;
        let wants_self = decision && self.flag_active(t) && self.role == VehicleRole::Normal;
        let vpki_covers = self.pool.covering(Flavor::VpkiProvided, t).is_some();

        let mut generated = 0;
        let mut choose_self = |this: &mut Self| -> Result<bool, UpdateError> {
            if this.pool.covering(Flavor::SelfCertified, t).is_some() {
                return Ok(true);
            }
            match this.generate(crypto, slot) {
                Ok(_) => {
                    generated += 1;
                    Ok(true)
                }
                Err(InitError::NoGroupKey) => Ok(false),
                Err(InitError::Crypto(e)) => Err(UpdateError::Crypto(e)),
                Err(InitError::Grid(_)) => Ok(false),
            }
        };

        let (flavor, reason) = if wants_self && choose_self(self)? {
            (Flavor::SelfCertified, UpdateReason::OptIn)
        } else if vpki_covers {
            (Flavor::VpkiProvided, UpdateReason::Vpki)
        } else if choose_self(self)? {
            (Flavor::SelfCertified, UpdateReason::Forced)
        } else {
            return Ok(self.go_silent());
        };

        let entry: PoolEntry<'_> = self.pool.covering(flavor, t).expect("selected flavor covers t");
        let (secret, pseudonym) = (entry.secret().clone(), entry.to_pseudonym());
        let id = pseudonym.id();
        self.hsm.load(secret, pseudonym)?;
        self.mode = Some(flavor);
        Ok(UpdateOutcome { flavor: Some(flavor), pseudonym: Some(id), reason, generated })
    }

    /// At a Γ boundary: the flag survives into the new Γ only if an
    /// initiation request was observed during the Γ that just ended, or this
    /// vehicle is itself still initiating. Returns whether the flag was
    /// cleared.
    pub fn revert_check(&mut self, t: SimTime) -> bool {
        let Some(f) = self.flag else {
            return false;
        };
        let gamma_ms = self.grid.unwrap_or(self.shape).gamma_ms();
        let seen_recently = f.last_seen >= t.saturating_sub(gamma_ms);
        if self.initiating || seen_recently {
            let expires = self.gamma_end(t);
            self.flag = Some(FlagState { expires, ..f });
            false
        } else {
            self.flag = None;
            true
        }
    }
}
