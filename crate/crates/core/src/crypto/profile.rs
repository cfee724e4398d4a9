use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CryptoError;

/// Operation classes that carry a virtual-time cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperationKind {
    Sign,
    Verify,
    GroupSign,
    GroupVerify,
    Keygen,
}

impl OperationKind {
    pub const ALL: [OperationKind; 5] = [
        OperationKind::Sign,
        OperationKind::Verify,
        OperationKind::GroupSign,
        OperationKind::GroupVerify,
        OperationKind::Keygen,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OperationKind::Sign => "sign",
            OperationKind::Verify => "verify",
            OperationKind::GroupSign => "group_sign",
            OperationKind::GroupVerify => "group_verify",
            OperationKind::Keygen => "keygen",
        }
    }
}

impl fmt::Display for OperationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OperationKind {
    type Err = CryptoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OperationKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| CryptoError::UnknownOperation(s.to_owned()))
    }
}

/// Per-operation latency in milliseconds, charged to virtual time.
///
/// Group sign/verify default to 56 ms / 82.5 ms. Keygen defaults to 1.4 ms,
/// so opting into 5 of 10 slots costs 5 × (1.4 + 56) = 287 ms over plain
/// VPKI acquisition. Sign/verify defaults are of the same order as keygen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CryptoProfile {
    pub sign_ms: f64,
    pub verify_ms: f64,
    pub group_sign_ms: f64,
    pub group_verify_ms: f64,
    pub keygen_ms: f64,
}

impl Default for CryptoProfile {
    fn default() -> Self {
        Self {
            sign_ms: 1.4,
            verify_ms: 2.8,
            group_sign_ms: 56.0,
            group_verify_ms: 82.5,
            keygen_ms: 1.4,
        }
    }
}

impl CryptoProfile {
    pub fn zero() -> Self {
        Self {
            sign_ms: 0.0,
            verify_ms: 0.0,
            group_sign_ms: 0.0,
            group_verify_ms: 0.0,
            keygen_ms: 0.0,
        }
    }

    pub fn latency_ms(&self, kind: OperationKind) -> f64 {
        match kind {
            OperationKind::Sign => self.sign_ms,
            OperationKind::Verify => self.verify_ms,
            OperationKind::GroupSign => self.group_sign_ms,
            OperationKind::GroupVerify => self.group_verify_ms,
            OperationKind::Keygen => self.keygen_ms,
        }
    }

    /// Lookup by operation name, for config- and CLI-facing callers.
    pub fn latency_of(&self, kind: &str) -> Result<f64, CryptoError> {
        Ok(self.latency_ms(kind.parse()?))
    }

    /// Cost of generating and group-certifying `count` pseudonyms.
    pub fn self_certification_ms(&self, count: usize) -> f64 {
        count as f64 * (self.keygen_ms + self.group_sign_ms)
    }

    pub fn validate(&self) -> Result<(), String> {
        for kind in OperationKind::ALL {
            let v = self.latency_ms(kind);
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("crypto latency `{kind}_ms` must be finite and >= 0, got {v}"));
            }
        }
        Ok(())
    }
}

/// End-to-end latency to obtain `n` pseudonyms from the PCA, with
/// `self_certified` of the slots additionally covered by self-certified
/// pseudonyms generated on the fly.
pub fn acquisition_latency_ms(
    profile: &CryptoProfile,
    base_rtt_ms: f64,
    per_pseudonym_ms: f64,
    n: usize,
    self_certified: usize,
) -> f64 {
    base_rtt_ms + n as f64 * per_pseudonym_ms + profile.self_certification_ms(self_certified)
}

/// Per-τ_P processing estimate for one vehicle from message rates and
/// latencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverheadModel {
    pub tau_p_s: f64,
    pub beacon_hz: f64,
    pub neighbors: f64,
    /// Probability the vehicle itself uses a self-certified pseudonym in a slot.
    pub own_self_certified: f64,
    /// Fraction of neighbors transmitting under self-certified pseudonyms.
    pub neighbor_self_certified: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverheadBreakdown {
    pub signing_ms: f64,
    pub generation_ms: f64,
    pub cam_verification_ms: f64,
    pub certificate_verification_ms: f64,
}

impl OverheadBreakdown {
    pub fn total_ms(&self) -> f64 {
        self.signing_ms + self.generation_ms + self.cam_verification_ms + self.certificate_verification_ms
    }
}

impl OverheadModel {
    /// Receivers verify the pseudonym certificate once per pseudonym and the
    /// CAM signature on every beacon.
    pub fn per_slot(&self, profile: &CryptoProfile) -> OverheadBreakdown {
        let beacons = self.tau_p_s * self.beacon_hz;
        OverheadBreakdown {
            signing_ms: beacons * profile.sign_ms,
            generation_ms: self.own_self_certified * profile.self_certification_ms(1),
            cam_verification_ms: beacons * self.neighbors * profile.verify_ms,
            certificate_verification_ms: self.neighbors
                * (self.neighbor_self_certified * profile.group_verify_ms
                    + (1.0 - self.neighbor_self_certified) * profile.verify_ms),
        }
    }

    /// Largest neighborhood whose CAMs fit in the verification budget of one
    /// τ_P (the whole slot spent verifying).
    pub fn verifiable_neighbors(&self, profile: &CryptoProfile) -> f64 {
        let per_neighbor_ms = self.tau_p_s * self.beacon_hz * profile.verify_ms
            + self.neighbor_self_certified * profile.group_verify_ms
            + (1.0 - self.neighbor_self_certified) * profile.verify_ms;
        if per_neighbor_ms <= 0.0 {
            return f64::INFINITY;
        }
        self.tau_p_s * 1000.0 / per_neighbor_ms
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_group_latencies() {
        let p = CryptoProfile::default();
        assert_eq!(p.latency_of("group_sign").unwrap(), 56.0);
        assert_eq!(p.latency_of("group_verify").unwrap(), 82.5);
    }

    #[test]
    fn zero_profile_is_zero_for_every_kind() {
        let p = CryptoProfile::zero();
        for kind in OperationKind::ALL {
            assert_eq!(p.latency_ms(kind), 0.0);
        }
    }

    #[test]
    fn unknown_kind_is_an_error() {
        let err = CryptoProfile::default().latency_of("decrypt").unwrap_err();
        assert_eq!(err, CryptoError::UnknownOperation("decrypt".into()));
    }

    #[test]
    fn rhythm_acquisition_overhead_defaults_to_287ms() {
        let p = CryptoProfile::default();
        let baseline = acquisition_latency_ms(&p, 50.0, 5.0, 10, 0);
        // r = 0.5 over 10 slots: 5 self-certified pseudonyms.
        let rhythm = acquisition_latency_ms(&p, 50.0, 5.0, 10, 5);
        assert!((rhythm - baseline - 287.0).abs() < 1e-9);
    }

    #[test]
    fn json_keys_and_defaults() {
        let p: CryptoProfile = serde_json::from_str(r#"{"sign_ms": 2, "group_sign_ms": 10}"#).unwrap();
        assert_eq!(p.sign_ms, 2.0);
        assert_eq!(p.group_sign_ms, 10.0);
        assert_eq!(p.group_verify_ms, 82.5);
        assert!(serde_json::from_str::<CryptoProfile>(r#"{"bogus_ms": 1}"#).is_err());
        assert!(CryptoProfile { verify_ms: -1.0, ..p }.validate().is_err());
    }

    #[test]
    fn overhead_model_scales_with_neighbors() {
        let p = CryptoProfile::default();
        let m = OverheadModel {
            tau_p_s: 30.0,
            beacon_hz: 10.0,
            neighbors: 10.0,
            own_self_certified: 0.5,
            neighbor_self_certified: 0.5,
        };
        let small = m.per_slot(&p).total_ms();
        let big = OverheadModel { neighbors: 20.0, ..m }.per_slot(&p).total_ms();
        assert!(big > small);
        let cap = m.verifiable_neighbors(&p);
        assert!(cap > 0.0 && cap.is_finite());
        assert!(OverheadModel { neighbor_self_certified: 1.0, ..m }.verifiable_neighbors(&p) < cap);
    }
}
