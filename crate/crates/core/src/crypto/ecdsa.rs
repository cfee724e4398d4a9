use p256::ecdsa::signature::{Signer, Verifier};
use p256::ecdsa::{Signature as EcSignature, SigningKey, VerifyingKey};
use rand::RngCore;

use super::{
    keystream, sha256, xor_in_place, CryptoError, CryptoProvider, GroupIssuingKey, GroupKeys,
    GroupOpeningKey, GroupPublicKey, GroupSignature, GroupSigningKey, KeyPair, PublicKey, Result,
    SecretKey, Signature, SignerIdentity,
};

const SCALAR: usize = 32;
const POINT: usize = 33;
const SIG: usize = 64;
// group public key: signing point || opening point || issuing point
const GPK: usize = 3 * POINT;
// sealed payload: member id (8) || membership certificate (64)
const SEALED: usize = 8 + SIG;
const GSIG: usize = POINT + SEALED + SIG;
const GSK: usize = 8 + SIG + SCALAR + GPK;

const MEMBER_DOMAIN: &[u8] = b"rhythm/group-member/v1";
const GSIG_DOMAIN: &[u8] = b"rhythm/group-sig/v1";
const OPEN_DOMAIN: &[u8] = b"rhythm/group-open/v1";

/// P-256 ECDSA provider (128-bit security, above the 112-bit level of the
/// short group signatures it stands in for).
#[derive(Debug, Default, Clone, Copy)]
pub struct EcdsaProvider;

fn random_scalar(rng: &mut dyn RngCore) -> SigningKey {
    loop {
        let mut bytes = [0u8; SCALAR];
        rng.fill_bytes(&mut bytes);
        if let Ok(key) = SigningKey::from_slice(&bytes) {
            return key;
        }
    }
}

fn point_bytes(key: &VerifyingKey) -> Vec<u8> {
    key.to_encoded_point(true).as_bytes().to_vec()
}

fn signing_key(bytes: &[u8], what: &'static str) -> Result<SigningKey> {
    SigningKey::from_slice(bytes).map_err(|_| CryptoError::MalformedKey(what))
}

fn verifying_key(bytes: &[u8], what: &'static str) -> Result<VerifyingKey> {
    VerifyingKey::from_sec1_bytes(bytes).map_err(|_| CryptoError::MalformedKey(what))
}

fn ec_verify(key: &VerifyingKey, message: &[u8], signature: &[u8]) -> bool {
    match EcSignature::from_slice(signature) {
        Ok(sig) => key.verify(message, &sig).is_ok(),
        Err(_) => false,
    }
}

fn member_message(member: SignerIdentity) -> Vec<u8> {
    [MEMBER_DOMAIN, &member.0.to_be_bytes()].concat()
}

fn opening_stream(shared: &[u8], ephemeral: &[u8]) -> Vec<u8> {
    keystream(&sha256(&[OPEN_DOMAIN, shared, ephemeral]), SEALED)
}

fn ecdh(secret: &[u8], public: &[u8]) -> Result<Vec<u8>> {
    let secret = p256::SecretKey::from_slice(secret).map_err(|_| CryptoError::MalformedKey("ecdh secret"))?;
    let public = p256::PublicKey::from_sec1_bytes(public).map_err(|_| CryptoError::MalformedKey("ecdh point"))?;
    let shared = p256::ecdh::diffie_hellman(secret.to_nonzero_scalar(), public.as_affine());
    Ok(shared.raw_secret_bytes().to_vec())
}

struct GroupPublic<'a> {
    signing: &'a [u8],
    opening: &'a [u8],
    issuing: &'a [u8],
}

fn split_gpk(gpk: &[u8]) -> Result<GroupPublic<'_>> {
    if gpk.len() != GPK {
        return Err(CryptoError::MalformedKey("group public key"));
    }
    Ok(GroupPublic {
        signing: &gpk[..POINT],
        opening: &gpk[POINT..2 * POINT],
        issuing: &gpk[2 * POINT..],
    })
}

impl CryptoProvider for EcdsaProvider {
    fn name(&self) -> &'static str {
        "ecdsa-p256"
    }

    fn keygen(&self, rng: &mut dyn RngCore) -> KeyPair {
        let key = random_scalar(rng);
        KeyPair {
            public: PublicKey(point_bytes(key.verifying_key())),
            secret: SecretKey(key.to_bytes().to_vec()),
        }
    }

    fn sign(&self, secret: &SecretKey, message: &[u8]) -> Result<Signature> {
        let key = signing_key(&secret.0, "secret key")?;
        let sig: EcSignature = key.sign(message);
        Ok(Signature(sig.to_bytes().to_vec()))
    }

    fn verify(&self, public: &PublicKey, message: &[u8], signature: &Signature) -> Result<bool> {
        let key = verifying_key(&public.0, "public key")?;
        Ok(ec_verify(&key, message, &signature.0))
    }

    fn group_setup(&self, rng: &mut dyn RngCore) -> GroupKeys {
        let signing = random_scalar(rng);
        let opening = random_scalar(rng);
        let issuing = random_scalar(rng);
        let gpk = [
            point_bytes(signing.verifying_key()),
            point_bytes(opening.verifying_key()),
            point_bytes(issuing.verifying_key()),
        ]
        .concat();
        GroupKeys {
            public: GroupPublicKey(gpk.clone()),
            issuing: GroupIssuingKey([&issuing.to_bytes()[..], &signing.to_bytes(), &gpk].concat()),
            opening: GroupOpeningKey([&opening.to_bytes()[..], &gpk].concat()),
        }
    }

    fn group_join(&self, issuing: &GroupIssuingKey, member: SignerIdentity) -> Result<GroupSigningKey> {
        if issuing.0.len() != 2 * SCALAR + GPK {
            return Err(CryptoError::MalformedKey("group issuing key"));
        }
        let issuer = signing_key(&issuing.0[..SCALAR], "group issuing key")?;
        let group_signing = &issuing.0[SCALAR..2 * SCALAR];
        let gpk = &issuing.0[2 * SCALAR..];
        let cert: EcSignature = issuer.sign(&member_message(member));
        Ok(GroupSigningKey(
            [&member.0.to_be_bytes()[..], &cert.to_bytes(), group_signing, gpk].concat(),
        ))
    }

    fn group_sign(
        &self,
        gsk: &GroupSigningKey,
        message: &[u8],
        rng: &mut dyn RngCore,
    ) -> Result<GroupSignature> {
        if gsk.0.len() != GSK {
            return Err(CryptoError::NotAMember);
        }
        let member = SignerIdentity(u64::from_be_bytes(gsk.0[..8].try_into().unwrap()));
        let cert = &gsk.0[8..8 + SIG];
        let group_signing = &gsk.0[8 + SIG..8 + SIG + SCALAR];
        let gpk = split_gpk(&gsk.0[8 + SIG + SCALAR..])?;
        let issuer = verifying_key(gpk.issuing, "group issuing point").map_err(|_| CryptoError::NotAMember)?;
        if !ec_verify(&issuer, &member_message(member), cert) {
            return Err(CryptoError::NotAMember);
        }
        let signer = signing_key(group_signing, "group signing key").map_err(|_| CryptoError::NotAMember)?;

        let ephemeral = random_scalar(rng);
        let ephemeral_point = point_bytes(ephemeral.verifying_key());
        let shared = ecdh(&ephemeral.to_bytes(), gpk.opening)?;
        let mut sealed = [&member.0.to_be_bytes()[..], cert].concat();
        xor_in_place(&mut sealed, &opening_stream(&shared, &ephemeral_point));

        let body = [GSIG_DOMAIN, message, &ephemeral_point, &sealed].concat();
        let sig: EcSignature = signer.sign(&body);
        Ok(GroupSignature([&ephemeral_point[..], &sealed, &sig.to_bytes()].concat()))
    }

    fn group_verify(
        &self,
        group_public: &GroupPublicKey,
        message: &[u8],
        signature: &GroupSignature,
    ) -> Result<bool> {
        let gpk = split_gpk(&group_public.0)?;
        let key = verifying_key(gpk.signing, "group signing point")?;
        if signature.0.len() != GSIG {
            return Ok(false);
        }
        let (prefix, sig) = signature.0.split_at(POINT + SEALED);
        let body = [GSIG_DOMAIN, message, prefix].concat();
        Ok(ec_verify(&key, &body, sig))
    }

    fn group_open(
        &self,
        opening: &GroupOpeningKey,
        message: &[u8],
        signature: &GroupSignature,
    ) -> Result<SignerIdentity> {
        if opening.0.len() != SCALAR + GPK {
            return Err(CryptoError::MalformedKey("group opening key"));
        }
        let gpk_bytes = &opening.0[SCALAR..];
        if !self.group_verify(&GroupPublicKey(gpk_bytes.to_vec()), message, signature)? {
            return Err(CryptoError::InvalidGroupSignature);
        }
        let gpk = split_gpk(gpk_bytes)?;
        let ephemeral_point = &signature.0[..POINT];
        let shared = ecdh(&opening.0[..SCALAR], ephemeral_point).map_err(|_| CryptoError::InvalidGroupSignature)?;
        let mut sealed = signature.0[POINT..POINT + SEALED].to_vec();
        xor_in_place(&mut sealed, &opening_stream(&shared, ephemeral_point));
        let member = SignerIdentity(u64::from_be_bytes(sealed[..8].try_into().unwrap()));
        let issuer = verifying_key(gpk.issuing, "group issuing point")?;
        if !ec_verify(&issuer, &member_message(member), &sealed[8..]) {
            return Err(CryptoError::InvalidGroupSignature);
        }
        Ok(member)
    }
}
