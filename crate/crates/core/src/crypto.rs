//! secp256k1 keys, keccak-256 digests and 65-byte recoverable signatures.
//!
//! Everything here is pure; the only side effect is the entropy read in
//! [`generate_keypair`] when no entropy is supplied.

use std::fmt;

use k256::ecdsa::signature::hazmat::PrehashVerifier;
use k256::elliptic_curve::scalar::IsHigh;
use k256::ecdsa::{RecoveryId, Signature, SigningKey, VerifyingKey};
use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha3::{Digest as _, Keccak256};

use crate::error::{Error, Result};

/// Offset added to the recovery id in the serialized `v` byte.
const V_OFFSET: u8 = 27;

/// Encodes bytes as lowercase hex with a `0x` prefix.
pub fn hex_0x(bytes: impl AsRef<[u8]>) -> String {
    format!("0x{}", hex::encode(bytes))
}

/// Decodes `0x`-prefixed lowercase hex. Uppercase digits are rejected so
/// that every byte string has exactly one textual form.
pub fn parse_hex_0x(s: &str) -> Result<Vec<u8>> {
    let body = s
        .strip_prefix("0x")
        .ok_or_else(|| Error::MalformedHex(format!("missing 0x prefix in `{s}`")))?;
    parse_hex_lower(body)
}

/// Decodes bare lowercase hex.
pub fn parse_hex_lower(s: &str) -> Result<Vec<u8>> {
    if s.bytes().any(|b| b.is_ascii_uppercase()) {
        return Err(Error::MalformedHex(format!("uppercase digits in `{s}`")));
    }
    hex::decode(s).map_err(|e| Error::MalformedHex(format!("`{s}`: {e}")))
}

/// A keccak-256 output.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Digest32(pub [u8; 32]);

impl Digest32 {
    pub const ZERO: Digest32 = Digest32([0u8; 32]);

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex_0x(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let bytes = parse_hex_0x(s)?;
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|v: Vec<u8>| Error::MalformedHex(format!("expected 32 bytes, got {}", v.len())))?;
        Ok(Digest32(arr))
    }
}

impl fmt::Display for Digest32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Digest32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest32({})", self.to_hex())
    }
}

impl Serialize for Digest32 {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest32 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Digest32::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// keccak-256 of `data`.
pub fn digest(data: &[u8]) -> Digest32 {
    let out = Keccak256::digest(data);
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&out);
    Digest32(bytes)
}

/// keccak-256 over the concatenation of `parts`.
pub fn digest_parts(parts: &[&[u8]]) -> Digest32 {
    let mut hasher = Keccak256::new();
    for part in parts {
        hasher.update(part);
    }
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&hasher.finalize());
    Digest32(bytes)
}

/// ECDSA signature `r ‖ s ‖ v` with low-s and `v = 27 + recovery id`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct RecoverableSignature {
    pub r: [u8; 32],
    pub s: [u8; 32],
    pub v: u8,
}

impl RecoverableSignature {
    pub const LEN: usize = 65;

    pub fn to_bytes(&self) -> [u8; 65] {
        let mut out = [0u8; 65];
        out[..32].copy_from_slice(&self.r);
        out[32..64].copy_from_slice(&self.s);
        out[64] = self.v;
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != Self::LEN {
            return Err(Error::MalformedSignature(format!(
                "expected {} bytes, got {}",
                Self::LEN,
                bytes.len()
            )));
        }
        let v = bytes[64];
        if v != V_OFFSET && v != V_OFFSET + 1 {
            return Err(Error::MalformedSignature(format!("recovery byte {v} not in {{27, 28}}")));
        }
        let mut r = [0u8; 32];
        let mut s = [0u8; 32];
        r.copy_from_slice(&bytes[..32]);
        s.copy_from_slice(&bytes[32..64]);
        Ok(RecoverableSignature { r, s, v })
    }

    pub fn to_hex(&self) -> String {
        hex_0x(self.to_bytes())
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let bytes = parse_hex_0x(s).map_err(|e| Error::MalformedSignature(e.to_string()))?;
        Self::from_bytes(&bytes)
    }

    fn parts(&self) -> Result<(Signature, RecoveryId)> {
        let mut rs = [0u8; 64];
        rs[..32].copy_from_slice(&self.r);
        rs[32..].copy_from_slice(&self.s);
        let sig = Signature::from_slice(&rs)
            .map_err(|_| Error::MalformedSignature("r or s out of range".into()))?;
        let recid = RecoveryId::from_byte(self.v - V_OFFSET)
            .ok_or_else(|| Error::MalformedSignature(format!("recovery byte {}", self.v)))?;
        Ok((sig, recid))
    }

    /// Recovers the public key that produced this signature over `digest`.
    pub fn recover(&self, digest: &Digest32) -> Result<PublicKey> {
        let (sig, recid) = self.parts()?;
        if bool::from(sig.s().is_high()) {
            return Err(Error::MalformedSignature("high s".into()));
        }
        VerifyingKey::recover_from_prehash(digest.as_bytes(), &sig, recid)
            .map(PublicKey)
            .map_err(|_| Error::MalformedSignature("no key recovers from this signature".into()))
    }
}

impl fmt::Debug for RecoverableSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RecoverableSignature({})", self.to_hex())
    }
}

impl fmt::Display for RecoverableSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for RecoverableSignature {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for RecoverableSignature {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        RecoverableSignature::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// A point on secp256k1.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct PublicKey(VerifyingKey);

impl PublicKey {
    /// Parses a SEC1 point in compressed (33 byte) or uncompressed (65 byte) form.
    pub fn from_sec1(bytes: &[u8]) -> Result<Self> {
        match bytes.first() {
            Some(0x02 | 0x03) if bytes.len() == 33 => {}
            Some(0x04) if bytes.len() == 65 => {}
            Some(p) => {
                return Err(Error::MalformedKey(format!(
                    "prefix 0x{p:02x} with length {}",
                    bytes.len()
                )))
            }
            None => return Err(Error::MalformedKey("empty key".into())),
        }
        VerifyingKey::from_sec1_bytes(bytes)
            .map(PublicKey)
            .map_err(|_| Error::MalformedKey("point is not on the curve".into()))
    }

    pub fn compressed(&self) -> [u8; 33] {
        let mut out = [0u8; 33];
        out.copy_from_slice(self.0.to_encoded_point(true).as_bytes());
        out
    }

    pub fn uncompressed(&self) -> [u8; 65] {
        let mut out = [0u8; 65];
        out.copy_from_slice(self.0.to_encoded_point(false).as_bytes());
        out
    }

    /// True iff `sig` is a canonical signature over `digest` by this key and
    /// its recovery byte points back at this key.
    pub fn verify(&self, digest: &Digest32, sig: &RecoverableSignature) -> bool {
        let Ok((raw, _)) = sig.parts() else {
            return false;
        };
        if self.0.verify_prehash(digest.as_bytes(), &raw).is_err() {
            return false;
        }
        matches!(sig.recover(digest), Ok(k) if k == *self)
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", hex_0x(self.compressed()))
    }
}

/// A secp256k1 private scalar together with both public encodings.
#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
    public: PublicKey,
}

impl KeyPair {
    /// Builds a pair from a big-endian private scalar in `[1, n-1]`.
    pub fn from_scalar(scalar: &[u8; 32]) -> Result<Self> {
        let signing = SigningKey::from_bytes(scalar.into()).map_err(|_| Error::InvalidEntropy)?;
        let public = PublicKey(*signing.verifying_key());
        Ok(KeyPair { signing, public })
    }

    pub fn from_private_hex(s: &str) -> Result<Self> {
        let bytes = parse_hex_lower(s.strip_prefix("0x").unwrap_or(s))
            .map_err(|e| Error::MalformedKey(e.to_string()))?;
        let scalar: [u8; 32] = bytes
            .try_into()
            .map_err(|_| Error::MalformedKey("private key must be 32 bytes".into()))?;
        Self::from_scalar(&scalar)
    }

    pub fn private_scalar(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        out.copy_from_slice(&self.signing.to_bytes());
        out
    }

    /// Bare lowercase hex of the private scalar, as kept in the keystore.
    pub fn private_hex(&self) -> String {
        hex::encode(self.private_scalar())
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    pub fn public_uncompressed(&self) -> [u8; 65] {
        self.public.uncompressed()
    }

    pub fn public_compressed(&self) -> [u8; 33] {
        self.public.compressed()
    }

    pub fn sign(&self, digest: &Digest32) -> RecoverableSignature {
        let (sig, recid) = self
            .signing
            .sign_prehash_recoverable(digest.as_bytes())
            .expect("a 32-byte prehash is always signable");
        // k256 already emits low-s, but normalize anyway and flip the parity to match.
        let (sig, recid) = match sig.normalize_s() {
            Some(low) => (low, RecoveryId::new(!recid.is_y_odd(), recid.is_x_reduced())),
            None => (sig, recid),
        };
        let bytes = sig.to_bytes();
        let mut r = [0u8; 32];
        let mut s = [0u8; 32];
        r.copy_from_slice(&bytes[..32]);
        s.copy_from_slice(&bytes[32..]);
        RecoverableSignature {
            r,
            s,
            v: V_OFFSET + recid.to_byte(),
        }
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("public", &self.public)
            .finish_non_exhaustive()
    }
}

/// Creates a keypair. With `entropy` the bytes are taken directly as the
/// private scalar; without it the scalar comes from the OS generator.
pub fn generate_keypair(entropy: Option<[u8; 32]>) -> Result<KeyPair> {
    if let Some(bytes) = entropy {
        return KeyPair::from_scalar(&bytes);
    }
    let mut rng = rand::rngs::OsRng;
    loop {
        let mut candidate = [0u8; 32];
        rng.fill_bytes(&mut candidate);
        // Rejection happens with probability ~2^-128.
        if let Ok(pair) = KeyPair::from_scalar(&candidate) {
            return Ok(pair);
        }
    }
}

/// Converts a 65-byte uncompressed point to its 33-byte compressed form.
pub fn compress_public(uncompressed: &[u8]) -> Result<[u8; 33]> {
    if uncompressed.len() != 65 || uncompressed[0] != 0x04 {
        return Err(Error::MalformedKey(format!(
            "expected 65 bytes starting 0x04, got {} bytes",
            uncompressed.len()
        )));
    }
    PublicKey::from_sec1(uncompressed).map(|k| k.compressed())
}

/// Converts a 33-byte compressed point to its 65-byte uncompressed form.
pub fn decompress_public(compressed: &[u8]) -> Result<[u8; 65]> {
    if compressed.len() != 33 || !matches!(compressed[0], 0x02 | 0x03) {
        return Err(Error::MalformedKey(format!(
            "expected 33 bytes starting 0x02/0x03, got {} bytes",
            compressed.len()
        )));
    }
    PublicKey::from_sec1(compressed).map(|k| k.uncompressed())
}

/// Signs `digest` with a raw private scalar.
pub fn sign_digest(private_scalar: &[u8; 32], digest: &Digest32) -> Result<RecoverableSignature> {
    Ok(KeyPair::from_scalar(private_scalar)?.sign(digest))
}

/// Checks a serialized signature against a SEC1-encoded public key.
///
/// Malformed key or signature bytes are errors; a well-formed signature that
/// does not match is `Ok(false)`.
pub fn verify_signature(public: &[u8], digest: &Digest32, signature: &[u8]) -> Result<bool> {
    let key = PublicKey::from_sec1(public)?;
    let sig = RecoverableSignature::from_bytes(signature)?;
    Ok(key.verify(digest, &sig))
}
