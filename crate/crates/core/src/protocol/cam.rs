use serde::{Deserialize, Serialize};

use crate::credentials::{zeta, Pseudonym, SimTime};
use crate::crypto::{CryptoProvider, GroupPublicKey, PublicKey, Signature};
use crate::vpki::RevocationList;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Application payload of a CAM.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CamFields {
    pub position: Position,
}

/// Cooperative awareness message. Field order (and the binary layout of
/// [`Cam::to_bytes`]) is fixed: fields, flag, t_now, attachment, signature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cam {
    pub fields: CamFields,
    pub flag_rhythm: bool,
    /// Relay distance of the flag from its initiator; 0 when the sender
    /// initiated or the flag is off.
    pub flag_hops: u32,
    /// Time of the newest initiation the sender knows of. Relays forward it
    /// unchanged, so echoes between relays never look like fresh requests.
    pub flag_origin: SimTime,
    pub t_now: SimTime,
    pub attachment: Pseudonym,
    pub signature: Signature,
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    out.extend_from_slice(&(b.len() as u32).to_be_bytes());
    out.extend_from_slice(b);
}

fn encode_attachment(out: &mut Vec<u8>, p: &Pseudonym) {
    match p {
        Pseudonym::VpkiProvided(v) => {
            out.push(0);
            out.extend_from_slice(&v.id.0);
            put_bytes(out, &v.public_key.0);
            out.extend_from_slice(&v.validity.start.0.to_be_bytes());
            out.extend_from_slice(&v.validity.end.0.to_be_bytes());
            out.extend_from_slice(&v.issuer.0.to_be_bytes());
            put_bytes(out, &v.issuer_signature.0);
        }
        Pseudonym::SelfCertified(s) => {
            out.push(1);
            out.extend_from_slice(&s.id.0);
            put_bytes(out, &s.public_key.0);
            out.extend_from_slice(&s.validity.start.0.to_be_bytes());
            out.extend_from_slice(&s.validity.end.0.to_be_bytes());
            put_bytes(out, &s.group_signature.0);
        }
    }
}

impl Cam {
    /// The bytes covered by the CAM signature.
    pub fn signed_bytes(
        fields: &CamFields,
        flag_rhythm: bool,
        flag_hops: u32,
        flag_origin: SimTime,
        t_now: SimTime,
        attachment: &Pseudonym,
    ) -> Vec<u8> {
        let mut out = Vec::with_capacity(256);
        out.extend_from_slice(b"rhythm/cam/v1");
        out.extend_from_slice(&fields.position.x.to_be_bytes());
        out.extend_from_slice(&fields.position.y.to_be_bytes());
        out.push(flag_rhythm as u8);
        out.extend_from_slice(&flag_hops.to_be_bytes());
        out.extend_from_slice(&flag_origin.0.to_be_bytes());
        out.extend_from_slice(&t_now.0.to_be_bytes());
        encode_attachment(&mut out, attachment);
        out
    }

    /// Flat binary record: signed bytes followed by the length-prefixed
    /// signature.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Self::signed_bytes(
            &self.fields,
            self.flag_rhythm,
            self.flag_hops,
            self.flag_origin,
            self.t_now,
            &self.attachment,
        );
        put_bytes(&mut out, &self.signature.0);
        out
    }
}

/// Keys a receiver trusts for certificate checks.
#[derive(Clone, Debug)]
pub struct TrustAnchors {
    pub pca: PublicKey,
    pub group: GroupPublicKey,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    /// The CAM signature does not verify under the attached public key.
    BadSignature,
    /// The attachment's PCA or group certification does not verify.
    BadCertificate,
    /// `t_now` lies outside the attached pseudonym's lifetime.
    OutsideValidity,
    /// The attached pseudonym is on the revocation list.
    Revoked,
}

impl Rejection {
    /// Revoked senders are dropped silently; everything else is misbehavior.
    pub fn is_misbehavior(self) -> bool {
        !matches!(self, Rejection::Revoked)
    }
}

/// Checks both signature layers, the lifetime and the revocation list.
pub fn verify_cam(
    crypto: &dyn CryptoProvider,
    anchors: &TrustAnchors,
    revocation: &RevocationList,
    cam: &Cam,
) -> Result<(), Rejection> {
    let attachment = &cam.attachment;
    if revocation.is_revoked(&attachment.id()) {
        return Err(Rejection::Revoked);
    }
    if !attachment.validity().contains(cam.t_now) {
        return Err(Rejection::OutsideValidity);
    }
    let body = Cam::signed_bytes(&cam.fields, cam.flag_rhythm, cam.flag_hops, cam.flag_origin, cam.t_now, attachment);
    if !crypto.verify(attachment.public_key(), &body, &cam.signature).unwrap_or(false) {
        return Err(Rejection::BadSignature);
    }
    let certified = match attachment {
        Pseudonym::VpkiProvided(p) => crypto
            .verify(&anchors.pca, &zeta(&p.public_key, p.validity), &p.issuer_signature)
            .unwrap_or(false),
        Pseudonym::SelfCertified(p) => crypto
            .group_verify(&anchors.group, &zeta(&p.public_key, p.validity), &p.group_signature)
            .unwrap_or(false),
    };
    if !certified {
        return Err(Rejection::BadCertificate);
    }
    Ok(())
}
