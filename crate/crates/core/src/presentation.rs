//! Holder-signed portfolios of credentials.
//!
//! A presentation embeds whole credentials, so it verifies without access to
//! the holder's credential store. Its `hash` is the keccak-256 of the
//! proof-free payload (bare hex), and the holder signs the typed-data digest
//! built over that hash.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::canonical::canonical_digest;
use crate::credential::{
    typed_data_digest, verification_method, verify_credential, FailureReason, Proof, RevocationRegistry,
    TypedDataDomain, TypedDataInfo, VerifiableCredential, VerificationResult,
};
use crate::crypto::{parse_hex_lower, Digest32, KeyPair};
use crate::error::{Error, Result};
use crate::identity::{Did, DidResolver};
use crate::store;
use crate::time::Timestamp;

pub const PRESENTATION_TYPE: &str = "VerifiablePresentation";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PresentationBody {
    pub tag: String,
    pub holder: Did,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verifier: Option<Vec<Did>>,
    pub verifiable_credential: Vec<VerifiableCredential>,
    pub created: Timestamp,
}

impl PresentationBody {
    pub fn payload_digest(&self) -> Digest32 {
        canonical_digest(self).expect("presentation bodies contain no floats")
    }

    /// Digest the holder signs; doubles as the presentation's ledger id.
    pub fn signing_digest(&self) -> Digest32 {
        typed_data_digest(&TypedDataDomain::presentation(), &self.payload_digest())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentationDocument {
    #[serde(flatten)]
    pub body: PresentationBody,
    pub proof: Proof,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifiablePresentation {
    #[serde(with = "bare_hex")]
    pub hash: Digest32,
    pub verifiable_presentation: PresentationDocument,
}

mod bare_hex {
    use super::*;

    pub fn serialize<S: Serializer>(d: &Digest32, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(d.as_bytes()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Digest32, D::Error> {
        let s = String::deserialize(d)?;
        let bytes = parse_hex_lower(&s).map_err(serde::de::Error::custom)?;
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| serde::de::Error::custom("hash must be 32 bytes"))?;
        Ok(Digest32(arr))
    }
}

impl VerifiablePresentation {
    /// Signs `body` as its holder.
    pub fn sign(body: PresentationBody, holder_key: &KeyPair) -> Result<Self> {
        if body.verifiable_credential.is_empty() {
            return Err(Error::EmptyPortfolio);
        }
        if Some(holder_key.public_compressed()) != body.holder.compressed_key() {
            return Err(Error::NoSigningKey(body.holder.to_string()));
        }
        let hash = body.payload_digest();
        let signing = typed_data_digest(&TypedDataDomain::presentation(), &hash);
        let proof = Proof::new(&body.holder, body.created, holder_key.sign(&signing), TypedDataInfo::presentation());
        Ok(VerifiablePresentation {
            hash,
            verifiable_presentation: PresentationDocument { body, proof },
        })
    }

    pub fn body(&self) -> &PresentationBody {
        &self.verifiable_presentation.body
    }

    pub fn proof(&self) -> &Proof {
        &self.verifiable_presentation.proof
    }

    /// Ledger id: the typed-data digest over the recomputed payload hash.
    pub fn id(&self) -> Digest32 {
        self.body().signing_digest()
    }

    pub fn check_structure(&self) -> Result<()> {
        if self.body().verifiable_credential.is_empty() {
            return Err(Error::MalformedPresentation("no embedded credentials".into()));
        }
        self.proof()
            .check_shape(&TypedDataDomain::presentation())
            .map_err(Error::MalformedPresentation)
    }

    pub fn row(&self) -> PresentationRow {
        let body = self.body();
        PresentationRow {
            hash: self.hash,
            tag: body.tag.clone(),
            created: body.created,
            type_label: PRESENTATION_TYPE.to_string(),
            holder: body.holder.abbreviated(),
            verifier: body
                .verifier
                .iter()
                .flatten()
                .map(Did::abbreviated)
                .collect::<Vec<_>>()
                .join(", "),
        }
    }
}

/// Checks the holder proof, the hash and every embedded credential.
pub fn verify_presentation(
    vp: &VerifiablePresentation,
    resolver: &impl DidResolver,
    revocations: &impl RevocationRegistry,
) -> Result<VerificationResult> {
    vp.check_structure()?;
    let body = vp.body();
    let proof = vp.proof();
    let mut reasons = Vec::new();

    let payload = body.payload_digest();
    if payload != vp.hash {
        reasons.push(FailureReason::HashMismatch);
    }
    if proof.verification_method != verification_method(&body.holder) {
        reasons.push(FailureReason::VerificationMethodMismatch);
    }
    if proof.created != body.created {
        reasons.push(FailureReason::ProofCreatedMismatch);
    }
    match resolver.resolve(&body.holder) {
        Err(_) => reasons.push(FailureReason::UnknownHolder),
        Ok(resolved) => match resolved.document.controller_key().filter(|_| resolved.verifiable) {
            None => reasons.push(FailureReason::HolderNotVerifiable),
            Some(key) => {
                let signing = typed_data_digest(&TypedDataDomain::presentation(), &payload);
                if !key.verify(&signing, &proof.proof_value) {
                    reasons.push(FailureReason::HolderSignatureMismatch);
                }
            }
        },
    }

    for (index, vc) in body.verifiable_credential.iter().enumerate() {
        let constituent = match verify_credential(vc, resolver, revocations) {
            Ok(result) => result.reasons,
            Err(e) => vec![FailureReason::Malformed { detail: e.to_string() }],
        };
        reasons.extend(constituent.into_iter().map(|reason| FailureReason::Constituent {
            index,
            reason: Box::new(reason),
        }));
    }
    Ok(VerificationResult::from_reasons(reasons))
}

/// One line of the presentations listing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PresentationRow {
    #[serde(with = "bare_hex")]
    pub hash: Digest32,
    pub tag: String,
    pub created: Timestamp,
    #[serde(rename = "type")]
    pub type_label: String,
    pub holder: String,
    pub verifier: String,
}

/// Presentations in insertion order, indexed by hash.
#[derive(Debug, Default)]
pub struct PresentationStore {
    items: Vec<VerifiablePresentation>,
    by_hash: HashMap<Digest32, usize>,
}

impl PresentationStore {
    pub fn load(path: &Path) -> Result<Self> {
        let items: Vec<VerifiablePresentation> = store::load_array(path)?;
        let mut out = PresentationStore::default();
        for vp in items {
            out.insert(vp);
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        store::save_array(path, &self.items)
    }

    pub fn insert(&mut self, vp: VerifiablePresentation) -> bool {
        if self.by_hash.contains_key(&vp.hash) {
            return false;
        }
        self.by_hash.insert(vp.hash, self.items.len());
        self.items.push(vp);
        true
    }

    /// Looks a presentation up by its hash.
    pub fn get(&self, hash: &Digest32) -> Option<&VerifiablePresentation> {
        self.by_hash.get(hash).map(|&i| &self.items[i])
    }

    pub fn contains(&self, hash: &Digest32) -> bool {
        self.by_hash.contains_key(hash)
    }

    pub fn iter(&self) -> impl Iterator<Item = &VerifiablePresentation> {
        self.items.iter()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Rows oldest first.
    pub fn list(&self) -> Vec<PresentationRow> {
        let mut items: Vec<&VerifiablePresentation> = self.items.iter().collect();
        items.sort_by_key(|vp| vp.body().created);
        items.into_iter().map(VerifiablePresentation::row).collect()
    }
}
