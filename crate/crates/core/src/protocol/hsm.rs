use crate::credentials::{Pseudonym, PseudonymId, SimTime, Validity};
use crate::crypto::{CryptoProvider, SecretKey, Signature};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum HsmError {
    #[error("key {loaded:?} valid over {validity} is still loaded; refusing a second simultaneously valid key")]
    ConcurrentKey { loaded: PseudonymId, validity: Validity },
    #[error("no key valid at {0} is loaded")]
    NoValidKey(SimTime),
    #[error("signing failed: {0}")]
    Crypto(#[from] crate::crypto::CryptoError),
}

#[derive(Clone, Debug)]
struct LoadedKey {
    secret: SecretKey,
    pseudonym: Pseudonym,
}

/// Hardware security module model: at most one private key, and it only
/// signs inside its pseudonym's lifetime. Loading a different key whose
/// lifetime overlaps the loaded one is refused, so a vehicle can never hold
/// two simultaneously valid pseudonyms.
#[derive(Clone, Debug, Default)]
pub struct HsmSlot {
    loaded: Option<LoadedKey>,
    signatures: u64,
}

impl HsmSlot {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(&mut self, secret: SecretKey, pseudonym: Pseudonym) -> Result<(), HsmError> {
        if let Some(cur) = &self.loaded {
            let (cur_id, cur_validity) = (cur.pseudonym.id(), cur.pseudonym.validity());
            if cur_id != pseudonym.id() && cur_validity.overlaps(&pseudonym.validity()) {
                return Err(HsmError::ConcurrentKey { loaded: cur_id, validity: cur_validity });
            }
        }
        self.loaded = Some(LoadedKey { secret, pseudonym });
        Ok(())
    }

    pub fn unload(&mut self) {
        self.loaded = None;
    }

    pub fn loaded(&self) -> Option<&Pseudonym> {
        self.loaded.as_ref().map(|k| &k.pseudonym)
    }

    pub fn valid_at(&self, t: SimTime) -> Option<&Pseudonym> {
        self.loaded().filter(|p| p.validity().contains(t))
    }

    pub fn sign(&mut self, crypto: &dyn CryptoProvider, t: SimTime, message: &[u8]) -> Result<Signature, HsmError> {
        let key = self
            .loaded
            .as_ref()
            .filter(|k| k.pseudonym.validity().contains(t))
            .ok_or(HsmError::NoValidKey(t))?;
        let sig = crypto.sign(&key.secret, message)?;
        self.signatures += 1;
        Ok(sig)
    }

    pub fn signatures(&self) -> u64 {
        self.signatures
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::credentials::{PcaId, VpkiPseudonym};
    use crate::crypto::{MockProvider, PublicKey};
    use crate::seed::{self, Stream};

    fn key(seed: u64, start: u64, end: u64) -> (SecretKey, Pseudonym) {
        let kp = MockProvider.keygen(&mut seed::rng(seed, Stream::Keys, 0));
        let p = VpkiPseudonym {
            id: crate::credentials::PseudonymId::of(&kp.public),
            public_key: kp.public,
            validity: Validity::secs(start, end),
            issuer: PcaId(0),
            issuer_signature: Signature(vec![]),
        };
        (kp.secret, Pseudonym::VpkiProvided(p))
    }

    #[test]
    fn refuses_second_overlapping_key() {
        let mut hsm = HsmSlot::new();
        let (s1, p1) = key(1, 0, 60);
        let (s2, p2) = key(2, 30, 90);
        let (s3, p3) = key(3, 60, 120);
        hsm.load(s1.clone(), p1.clone()).unwrap();
        assert!(matches!(hsm.load(s2, p2), Err(HsmError::ConcurrentKey { .. })));
        // Reloading the same key is fine, and so is the next slot's key.
        hsm.load(s1, p1).unwrap();
        hsm.load(s3, p3).unwrap();
    }

    #[test]
    fn signs_only_inside_lifetime() {
        let mut hsm = HsmSlot::new();
        assert_eq!(
            hsm.sign(&MockProvider, SimTime::from_secs(1), b"m"),
            Err(HsmError::NoValidKey(SimTime::from_secs(1)))
        );
        let (s, p) = key(1, 0, 60);
        let pk: PublicKey = p.public_key().clone();
        hsm.load(s, p).unwrap();
        let sig = hsm.sign(&MockProvider, SimTime::from_secs(59), b"m").unwrap();
        assert!(MockProvider.verify(&pk, b"m", &sig).unwrap());
        assert!(hsm.sign(&MockProvider, SimTime::from_secs(60), b"m").is_err());
        assert_eq!(hsm.signatures(), 1);
    }
}
