//! Signature primitives behind a provider abstraction.
//!
//! Two providers implement [`CryptoProvider`]:
//!
//! - [`MockProvider`]: hash-based and fully deterministic. It has the same
//!   interface shape and failure behavior as a real scheme (tamper rejection,
//!   opening, membership checks) but no unforgeability. Used for fast
//!   Monte Carlo runs.
//! - [`EcdsaProvider`] (feature `ecdsa`): ECDSA over P-256 for pseudonymous
//!   signing and certificate issuance. The group signature is realized as a
//!   signature under a shared group key plus the member's identity and
//!   membership certificate encrypted to the opener (ECDH + SHA-256
//!   keystream), so verifiers learn nothing member-specific.
//!
//! Crypto latency never touches wall-clock time in the simulator; it is
//! charged to virtual time through a [`CryptoProfile`].

mod mock;
mod profile;
#[cfg(feature = "ecdsa")]
mod ecdsa;

use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use mock::MockProvider;
pub use profile::{acquisition_latency_ms, CryptoProfile, OperationKind, OverheadModel};
#[cfg(feature = "ecdsa")]
pub use ecdsa::EcdsaProvider;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("malformed {0}")]
    MalformedKey(&'static str),
    #[error("group signing key is not a joined member credential")]
    NotAMember,
    #[error("cannot open an invalid group signature")]
    InvalidGroupSignature,
    #[error("unknown crypto operation kind `{0}`")]
    UnknownOperation(String),
    #[error("crypto provider `{0}` is not available in this build")]
    Unavailable(String),
}

pub type Result<T> = std::result::Result<T, CryptoError>;

macro_rules! byte_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub struct $name(#[serde(with = "hex_bytes")] pub Vec<u8>);

        impl $name {
            pub fn as_bytes(&self) -> &[u8] {
                &self.0
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let shown = &self.0[..self.0.len().min(8)];
                write!(f, "{}({}..)", stringify!($name), hex::encode(shown))
            }
        }
    };
}

byte_newtype!(
    /// Verification key for pseudonymous (non-group) signatures.
    PublicKey
);
byte_newtype!(Signature);
byte_newtype!(GroupPublicKey);
byte_newtype!(
    /// A member's group signature. Contains nothing that identifies the member
    /// without the opening key.
    GroupSignature
);

/// Private signing key. Debug output is redacted.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey(pub Vec<u8>);

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

/// Group manager key used to enroll members.
#[derive(Clone, PartialEq, Eq)]
pub struct GroupIssuingKey(pub Vec<u8>);

/// Group manager key used to open signatures.
#[derive(Clone, PartialEq, Eq)]
pub struct GroupOpeningKey(pub Vec<u8>);

/// Per-member group signing key, `gsk_v`.
#[derive(Clone, PartialEq, Eq)]
pub struct GroupSigningKey(pub Vec<u8>);

impl fmt::Debug for GroupIssuingKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("GroupIssuingKey(..)")
    }
}

impl fmt::Debug for GroupOpeningKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("GroupOpeningKey(..)")
    }
}

impl fmt::Debug for GroupSigningKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("GroupSigningKey(..)")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyPair {
    pub public: PublicKey,
    pub secret: SecretKey,
}

/// Member handle recovered by opening a group signature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SignerIdentity(pub u64);

impl fmt::Display for SignerIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "member-{}", self.0)
    }
}

/// Output of [`CryptoProvider::group_setup`]. The issuing and opening keys stay
/// with the group manager.
#[derive(Clone, Debug)]
pub struct GroupKeys {
    pub public: GroupPublicKey,
    pub issuing: GroupIssuingKey,
    pub opening: GroupOpeningKey,
}

pub trait CryptoProvider: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn keygen(&self, rng: &mut dyn RngCore) -> KeyPair;

    fn sign(&self, secret: &SecretKey, message: &[u8]) -> Result<Signature>;

    /// `Err` only for a malformed key; a bad signature is `Ok(false)`.
    fn verify(&self, public: &PublicKey, message: &[u8], signature: &Signature) -> Result<bool>;

    fn group_setup(&self, rng: &mut dyn RngCore) -> GroupKeys;

    fn group_join(&self, issuing: &GroupIssuingKey, member: SignerIdentity) -> Result<GroupSigningKey>;

    fn group_sign(
        &self,
        gsk: &GroupSigningKey,
        message: &[u8],
        rng: &mut dyn RngCore,
    ) -> Result<GroupSignature>;

    fn group_verify(
        &self,
        group_public: &GroupPublicKey,
        message: &[u8],
        signature: &GroupSignature,
    ) -> Result<bool>;

    fn group_open(
        &self,
        opening: &GroupOpeningKey,
        message: &[u8],
        signature: &GroupSignature,
    ) -> Result<SignerIdentity>;
}

pub type SharedProvider = Arc<dyn CryptoProvider>;

/// Which provider a scenario runs with.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[default]
    Mock,
    Ecdsa,
}

impl ProviderKind {
    pub fn build(self) -> Result<SharedProvider> {
        match self {
            ProviderKind::Mock => Ok(Arc::new(MockProvider)),
            #[cfg(feature = "ecdsa")]
            ProviderKind::Ecdsa => Ok(Arc::new(EcdsaProvider)),
            #[cfg(not(feature = "ecdsa"))]
            ProviderKind::Ecdsa => Err(CryptoError::Unavailable("ecdsa".into())),
        }
    }
}

pub(crate) fn sha256(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

/// SHA-256 in counter mode, used as a keystream.
pub(crate) fn keystream(seed: &[u8], len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(len + 32);
    let mut counter = 0u32;
    while out.len() < len {
        out.extend_from_slice(&sha256(&[seed, &counter.to_be_bytes()]));
        counter += 1;
    }
    out.truncate(len);
    out
}

pub(crate) fn xor_in_place(data: &mut [u8], stream: &[u8]) {
    for (d, s) in data.iter_mut().zip(stream) {
        *d ^= s;
    }
}

pub(crate) mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::{self, Stream};

    fn providers() -> Vec<SharedProvider> {
        let mut v: Vec<SharedProvider> = vec![Arc::new(MockProvider)];
        #[cfg(feature = "ecdsa")]
        v.push(Arc::new(EcdsaProvider));
        v
    }

    #[test]
    fn keygen_is_deterministic_under_seed() {
        for p in providers() {
            let a = p.keygen(&mut seed::rng(42, Stream::Keys, 0));
            let b = p.keygen(&mut seed::rng(42, Stream::Keys, 0));
            let c = p.keygen(&mut seed::rng(43, Stream::Keys, 0));
            assert_eq!(a, b, "{}", p.name());
            assert_ne!(a.public, c.public, "{}", p.name());
        }
    }

    #[test]
    fn sign_verify_roundtrip_and_rejections() {
        for p in providers() {
            let mut rng = seed::rng(1, Stream::Keys, 0);
            let kp = p.keygen(&mut rng);
            let other = p.keygen(&mut rng);
            let sig = p.sign(&kp.secret, b"cam").unwrap();
            assert!(p.verify(&kp.public, b"cam", &sig).unwrap());
            assert!(!p.verify(&kp.public, b"cbm", &sig).unwrap());
            assert!(!p.verify(&other.public, b"cam", &sig).unwrap());
            let mut bad = sig.clone();
            bad.0[3] ^= 0x10;
            assert!(!p.verify(&kp.public, b"cam", &bad).unwrap());
        }
    }

    #[test]
    fn malformed_key_is_distinct_from_invalid_signature() {
        for p in providers() {
            let mut rng = seed::rng(1, Stream::Keys, 0);
            let kp = p.keygen(&mut rng);
            let sig = p.sign(&kp.secret, b"m").unwrap();
            let err = p.verify(&PublicKey(vec![1, 2, 3]), b"m", &sig).unwrap_err();
            assert!(matches!(err, CryptoError::MalformedKey(_)));
            assert!(matches!(
                p.sign(&SecretKey(vec![0; 5]), b"m"),
                Err(CryptoError::MalformedKey(_))
            ));
            // A short signature is simply invalid.
            assert!(!p.verify(&kp.public, b"m", &Signature(vec![0; 3])).unwrap());
        }
    }

    #[test]
    fn group_roundtrip_open_and_tamper() {
        for p in providers() {
            let mut rng = seed::rng(5, Stream::Keys, 0);
            let keys = p.group_setup(&mut rng);
            let a = p.group_join(&keys.issuing, SignerIdentity(1)).unwrap();
            let b = p.group_join(&keys.issuing, SignerIdentity(2)).unwrap();
            let sa = p.group_sign(&a, b"zeta", &mut rng).unwrap();
            let sb = p.group_sign(&b, b"zeta", &mut rng).unwrap();
            assert!(p.group_verify(&keys.public, b"zeta", &sa).unwrap());
            assert!(p.group_verify(&keys.public, b"zeta", &sb).unwrap());
            assert_eq!(p.group_open(&keys.opening, b"zeta", &sa).unwrap(), SignerIdentity(1));
            assert_eq!(p.group_open(&keys.opening, b"zeta", &sb).unwrap(), SignerIdentity(2));
            assert_eq!(sa.0.len(), sb.0.len());

            let mut truncated = sa.clone();
            truncated.0.pop();
            assert!(!p.group_verify(&keys.public, b"zeta", &truncated).unwrap());
            assert!(!p.group_verify(&keys.public, b"zetb", &sa).unwrap());
            assert_eq!(
                p.group_open(&keys.opening, b"zeta", &truncated),
                Err(CryptoError::InvalidGroupSignature)
            );

            let stranger = GroupSigningKey(vec![0xAB; a.0.len()]);
            assert_eq!(p.group_sign(&stranger, b"zeta", &mut rng), Err(CryptoError::NotAMember));

            // A signature from another group does not verify here.
            let other = p.group_setup(&mut rng);
            let c = p.group_join(&other.issuing, SignerIdentity(1)).unwrap();
            let sc = p.group_sign(&c, b"zeta", &mut rng).unwrap();
            assert!(!p.group_verify(&keys.public, b"zeta", &sc).unwrap());
        }
    }

    #[test]
    fn group_signatures_carry_no_constant_member_bytes() {
        // For every byte position, a member whose signatures always agree at
        // that position (while another member differs) would be linkable.
        for p in providers() {
            let mut rng = seed::rng(9, Stream::Keys, 0);
            let keys = p.group_setup(&mut rng);
            let members: Vec<_> = (0..2)
                .map(|i| p.group_join(&keys.issuing, SignerIdentity(i)).unwrap())
                .collect();
            let sigs: Vec<Vec<GroupSignature>> = members
                .iter()
                .map(|m| (0..40).map(|_| p.group_sign(m, b"same", &mut rng).unwrap()).collect())
                .collect();
            let len = sigs[0][0].0.len();
            for pos in 0..len {
                let constant = |set: &Vec<GroupSignature>| set.iter().all(|s| s.0[pos] == set[0].0[pos]);
                let distinguishing =
                    constant(&sigs[0]) && constant(&sigs[1]) && sigs[0][0].0[pos] != sigs[1][0].0[pos];
                assert!(!distinguishing, "{}: byte {pos} identifies the member", p.name());
                assert!(!constant(&sigs[0]), "{}: byte {pos} constant for member 0", p.name());
            }
        }
    }
}
