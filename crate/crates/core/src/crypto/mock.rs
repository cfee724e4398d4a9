use rand::RngCore;

use super::{
    keystream, sha256, xor_in_place, CryptoError, CryptoProvider, GroupIssuingKey, GroupKeys,
    GroupOpeningKey, GroupPublicKey, GroupSignature, GroupSigningKey, KeyPair, PublicKey, Result,
    SecretKey, Signature, SignerIdentity,
};

const KEY_LEN: usize = 32;
const NONCE_LEN: usize = 16;
// member id (8) || membership tag prefix (8)
const SEALED_LEN: usize = 16;
const GSIG_LEN: usize = NONCE_LEN + SEALED_LEN + 32;
// id (8) || tag (32) || gpk (32) || encryption key (32)
const GSK_LEN: usize = 8 + 32 + 32 + 32;

/// Deterministic hash-based provider. Signatures are bound to the public key
/// and message, so tampering and wrong-key verification fail exactly as with a
/// real scheme, but anyone holding a public key can forge. Simulation only.
#[derive(Debug, Default, Clone, Copy)]
pub struct MockProvider;

fn public_of(secret: &[u8]) -> [u8; 32] {
    sha256(&[b"mock/pk", secret])
}

fn member_tag(gpk: &[u8], member: SignerIdentity) -> [u8; 32] {
    sha256(&[b"mock/member", gpk, &member.0.to_be_bytes()])
}

fn gsig_mac(gpk: &[u8], message: &[u8], nonce: &[u8], sealed: &[u8]) -> [u8; 32] {
    sha256(&[b"mock/gsig", gpk, message, nonce, sealed])
}

impl CryptoProvider for MockProvider {
    fn name(&self) -> &'static str {
        "mock"
    }

    fn keygen(&self, rng: &mut dyn RngCore) -> KeyPair {
        let mut secret = vec![0u8; KEY_LEN];
        rng.fill_bytes(&mut secret);
        KeyPair {
            public: PublicKey(public_of(&secret).to_vec()),
            secret: SecretKey(secret),
        }
    }

    fn sign(&self, secret: &SecretKey, message: &[u8]) -> Result<Signature> {
        if secret.0.len() != KEY_LEN {
            return Err(CryptoError::MalformedKey("secret key"));
        }
        let public = public_of(&secret.0);
        Ok(Signature(sha256(&[b"mock/sig", &public, message]).to_vec()))
    }

    fn verify(&self, public: &PublicKey, message: &[u8], signature: &Signature) -> Result<bool> {
        if public.0.len() != KEY_LEN {
            return Err(CryptoError::MalformedKey("public key"));
        }
        Ok(signature.0 == sha256(&[b"mock/sig", &public.0, message]))
    }

    fn group_setup(&self, rng: &mut dyn RngCore) -> GroupKeys {
        let mut group_secret = [0u8; KEY_LEN];
        let mut open_secret = [0u8; KEY_LEN];
        rng.fill_bytes(&mut group_secret);
        rng.fill_bytes(&mut open_secret);
        let gpk = sha256(&[b"mock/gpk", &group_secret]);
        let enc = sha256(&[b"mock/enc", &open_secret]);
        GroupKeys {
            public: GroupPublicKey(gpk.to_vec()),
            issuing: GroupIssuingKey([group_secret, enc].concat()),
            opening: GroupOpeningKey([open_secret, group_secret].concat()),
        }
    }

    fn group_join(&self, issuing: &GroupIssuingKey, member: SignerIdentity) -> Result<GroupSigningKey> {
        if issuing.0.len() != 2 * KEY_LEN {
            return Err(CryptoError::MalformedKey("group issuing key"));
        }
        let (group_secret, enc) = issuing.0.split_at(KEY_LEN);
        let gpk = sha256(&[b"mock/gpk", group_secret]);
        let mut gsk = Vec::with_capacity(GSK_LEN);
        gsk.extend_from_slice(&member.0.to_be_bytes());
        gsk.extend_from_slice(&member_tag(&gpk, member));
        gsk.extend_from_slice(&gpk);
        gsk.extend_from_slice(enc);
        Ok(GroupSigningKey(gsk))
    }

    fn group_sign(
        &self,
        gsk: &GroupSigningKey,
        message: &[u8],
        rng: &mut dyn RngCore,
    ) -> Result<GroupSignature> {
        if gsk.0.len() != GSK_LEN {
            return Err(CryptoError::NotAMember);
        }
        let member = SignerIdentity(u64::from_be_bytes(gsk.0[..8].try_into().unwrap()));
        let tag = &gsk.0[8..40];
        let gpk = &gsk.0[40..72];
        let enc = &gsk.0[72..104];
        if tag != member_tag(gpk, member) {
            return Err(CryptoError::NotAMember);
        }
        let mut nonce = [0u8; NONCE_LEN];
        rng.fill_bytes(&mut nonce);
        let mut sealed = [0u8; SEALED_LEN];
        sealed[..8].copy_from_slice(&member.0.to_be_bytes());
        sealed[8..].copy_from_slice(&tag[..8]);
        xor_in_place(&mut sealed, &keystream(&[enc, &nonce].concat(), SEALED_LEN));
        let mac = gsig_mac(gpk, message, &nonce, &sealed);
        Ok(GroupSignature([&nonce[..], &sealed, &mac].concat()))
    }

    fn group_verify(
        &self,
        group_public: &GroupPublicKey,
        message: &[u8],
        signature: &GroupSignature,
    ) -> Result<bool> {
        if group_public.0.len() != KEY_LEN {
            return Err(CryptoError::MalformedKey("group public key"));
        }
        if signature.0.len() != GSIG_LEN {
            return Ok(false);
        }
        let (nonce, rest) = signature.0.split_at(NONCE_LEN);
        let (sealed, mac) = rest.split_at(SEALED_LEN);
        Ok(mac == gsig_mac(&group_public.0, message, nonce, sealed))
    }

    fn group_open(
        &self,
        opening: &GroupOpeningKey,
        message: &[u8],
        signature: &GroupSignature,
    ) -> Result<SignerIdentity> {
        if opening.0.len() != 2 * KEY_LEN {
            return Err(CryptoError::MalformedKey("group opening key"));
        }
        let (open_secret, group_secret) = opening.0.split_at(KEY_LEN);
        let gpk = GroupPublicKey(sha256(&[b"mock/gpk", group_secret]).to_vec());
        if !self.group_verify(&gpk, message, signature)? {
            return Err(CryptoError::InvalidGroupSignature);
        }
        let enc = sha256(&[b"mock/enc", open_secret]);
        let nonce = &signature.0[..NONCE_LEN];
        let mut sealed = signature.0[NONCE_LEN..NONCE_LEN + SEALED_LEN].to_vec();
        xor_in_place(&mut sealed, &keystream(&[&enc[..], nonce].concat(), SEALED_LEN));
        let member = SignerIdentity(u64::from_be_bytes(sealed[..8].try_into().unwrap()));
        if sealed[8..] != member_tag(&gpk.0, member)[..8] {
            return Err(CryptoError::InvalidGroupSignature);
        }
        Ok(member)
    }
}
