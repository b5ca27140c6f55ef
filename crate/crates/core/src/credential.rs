//! Verifiable credentials with typed-data signature proofs.
//!
//! The signing digest follows the two-hash typed-data layout
//! `keccak256(0x1901 ‖ keccak256(canonical(domain)) ‖ keccak256(canonical(payload)))`,
//! where the payload is the credential without its proof. That digest is
//! also the credential id, so ledger records and revocations bind to
//! content rather than storage position.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::canonical::canonical_digest;
use crate::crypto::{digest_parts, Digest32, KeyPair, RecoverableSignature};
use crate::error::{Error, Result};
use crate::identity::{Did, DidResolver};
use crate::store;
use crate::time::Timestamp;

pub const CREDENTIAL_TYPE: &str = "VerifiableCredential";
pub const PROOF_TYPE: &str = "EthereumEip712Signature2021";
pub const PROOF_PURPOSE: &str = "assertionMethod";
const TYPED_DATA_PREFIX: [u8; 2] = [0x19, 0x01];

/// Content digest identifying a credential.
pub type CredentialId = Digest32;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Claim {
    pub claim_type: String,
    pub claim_value: String,
}

impl Claim {
    pub fn new(claim_type: impl Into<String>, claim_value: impl Into<String>) -> Self {
        Claim {
            claim_type: claim_type.into(),
            claim_value: claim_value.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TypedDataDomain {
    pub chain_id: u64,
    pub name: String,
    pub version: String,
}

impl TypedDataDomain {
    pub fn credential() -> Self {
        TypedDataDomain {
            chain_id: 1,
            name: CREDENTIAL_TYPE.to_string(),
            version: "1".to_string(),
        }
    }

    pub fn presentation() -> Self {
        TypedDataDomain {
            chain_id: 1,
            name: "VerifiablePresentation".to_string(),
            version: "1".to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypedField {
    pub name: String,
    #[serde(rename = "type")]
    pub field_type: String,
}

fn fields(list: &[(&str, &str)]) -> Vec<TypedField> {
    list.iter()
        .map(|(name, ty)| TypedField {
            name: name.to_string(),
            field_type: ty.to_string(),
        })
        .collect()
}

/// Domain plus a descriptor of the signed fields. The descriptor is
/// informational; only the domain enters the digest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypedDataInfo {
    pub domain: TypedDataDomain,
    pub types: BTreeMap<String, Vec<TypedField>>,
}

impl TypedDataInfo {
    pub fn credential() -> Self {
        let mut types = BTreeMap::new();
        types.insert("EIP712Domain".into(), domain_fields());
        types.insert(
            CREDENTIAL_TYPE.into(),
            fields(&[
                ("issuer", "string"),
                ("subject", "string"),
                ("types", "string[]"),
                ("claims", "Claim[]"),
                ("revocable", "bool"),
                ("issuanceDate", "string"),
            ]),
        );
        types.insert("Claim".into(), fields(&[("claimType", "string"), ("claimValue", "string")]));
        TypedDataInfo {
            domain: TypedDataDomain::credential(),
            types,
        }
    }

    pub fn presentation() -> Self {
        let mut types = BTreeMap::new();
        types.insert("EIP712Domain".into(), domain_fields());
        types.insert(
            "VerifiablePresentation".into(),
            fields(&[
                ("tag", "string"),
                ("holder", "string"),
                ("verifier", "string[]"),
                ("verifiableCredential", "VerifiableCredential[]"),
                ("created", "string"),
            ]),
        );
        TypedDataInfo {
            domain: TypedDataDomain::presentation(),
            types,
        }
    }
}

fn domain_fields() -> Vec<TypedField> {
    fields(&[("name", "string"), ("version", "string"), ("chainId", "uint256")])
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Proof {
    #[serde(rename = "type")]
    pub proof_type: String,
    pub created: Timestamp,
    pub verification_method: String,
    pub proof_purpose: String,
    pub proof_value: RecoverableSignature,
    pub eip712: TypedDataInfo,
}

impl Proof {
    pub(crate) fn new(signer: &Did, created: Timestamp, sig: RecoverableSignature, info: TypedDataInfo) -> Self {
        Proof {
            proof_type: PROOF_TYPE.to_string(),
            created,
            verification_method: verification_method(signer),
            proof_purpose: PROOF_PURPOSE.to_string(),
            proof_value: sig,
            eip712: info,
        }
    }

    pub(crate) fn check_shape(&self, domain: &TypedDataDomain) -> std::result::Result<(), String> {
        if self.proof_type != PROOF_TYPE {
            return Err(format!("proof type `{}`", self.proof_type));
        }
        if self.proof_purpose != PROOF_PURPOSE {
            return Err(format!("proof purpose `{}`", self.proof_purpose));
        }
        if !self.verification_method.ends_with("#controller") {
            return Err("verificationMethod must end with #controller".into());
        }
        if &self.eip712.domain != domain {
            return Err("unexpected typed-data domain".into());
        }
        Ok(())
    }
}

pub fn verification_method(did: &Did) -> String {
    format!("{did}#controller")
}

/// `keccak256(0x1901 ‖ keccak256(canonical(domain)) ‖ payload_digest)`.
pub fn typed_data_digest(domain: &TypedDataDomain, payload_digest: &Digest32) -> Digest32 {
    let domain_digest = canonical_digest(domain).expect("domain has no floats");
    digest_parts(&[&TYPED_DATA_PREFIX, domain_digest.as_bytes(), payload_digest.as_bytes()])
}

/// Everything a credential says, i.e. the credential minus its proof.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CredentialBody {
    pub issuer: Did,
    pub subject: Did,
    pub types: Vec<String>,
    pub claims: Vec<Claim>,
    pub revocable: bool,
    pub issuance_date: Timestamp,
}

impl CredentialBody {
    pub fn new(
        issuer: Did,
        subject: Did,
        extra_types: &[String],
        claims: Vec<Claim>,
        revocable: bool,
        issuance_date: Timestamp,
    ) -> Result<Self> {
        let mut types = Vec::with_capacity(extra_types.len() + 1);
        types.push(CREDENTIAL_TYPE.to_string());
        types.extend(extra_types.iter().cloned());
        let body = CredentialBody {
            issuer,
            subject,
            types,
            claims,
            revocable,
            issuance_date,
        };
        body.check()?;
        Ok(body)
    }

    fn check(&self) -> Result<()> {
        if self.claims.is_empty() {
            return Err(Error::EmptyClaims);
        }
        if self.claims.iter().any(|c| c.claim_type.is_empty()) {
            return Err(Error::EmptyClaimType);
        }
        if self.types.first().map(String::as_str) != Some(CREDENTIAL_TYPE) {
            return Err(Error::MalformedCredential(format!("first type must be {CREDENTIAL_TYPE}")));
        }
        if self.types.len() < 2 {
            return Err(Error::EmptyTypes);
        }
        Ok(())
    }

    /// keccak-256 of the canonical payload.
    pub fn payload_digest(&self) -> Digest32 {
        canonical_digest(self).expect("credential bodies contain no floats")
    }
}

/// The signing digest and id of a credential body.
pub fn credential_digest(body: &CredentialBody) -> CredentialId {
    typed_data_digest(&TypedDataDomain::credential(), &body.payload_digest())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifiableCredential {
    #[serde(flatten)]
    pub body: CredentialBody,
    pub proof: Proof,
}

impl VerifiableCredential {
    /// Signs `body` with the issuer's key.
    pub fn sign(body: CredentialBody, issuer_key: &KeyPair) -> Result<Self> {
        body.check()?;
        if Some(issuer_key.public_compressed()) != body.issuer.compressed_key() {
            return Err(Error::NoSigningKey(body.issuer.to_string()));
        }
        let id = credential_digest(&body);
        let proof = Proof::new(&body.issuer, body.issuance_date, issuer_key.sign(&id), TypedDataInfo::credential());
        Ok(VerifiableCredential { body, proof })
    }

    pub fn id(&self) -> CredentialId {
        credential_digest(&self.body)
    }

    /// Structural checks whose failure makes the credential unreadable
    /// rather than merely invalid.
    pub fn check_structure(&self) -> Result<()> {
        self.body.check()?;
        self.proof
            .check_shape(&TypedDataDomain::credential())
            .map_err(Error::MalformedCredential)
    }

    pub fn row(&self) -> CredentialRow {
        CredentialRow {
            id: self.id(),
            created: self.body.issuance_date,
            type_label: type_label(&self.body.types),
            from: self.body.issuer.abbreviated(),
            to: self.body.subject.abbreviated(),
        }
    }
}

/// Type column text: `VerifiableCredential,Profile` for one extra type,
/// `VerifiableCredential,(Python Course, Profile)` for several.
pub fn type_label(types: &[String]) -> String {
    match types {
        [] => String::new(),
        [only] => only.clone(),
        [first, one] => format!("{first},{one}"),
        [first, rest @ ..] => format!("{first},({})", rest.join(", ")),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FailureReason {
    UnknownIssuer,
    IssuerNotVerifiable,
    SignatureMismatch,
    VerificationMethodMismatch,
    ProofCreatedMismatch,
    Revoked,
    HashMismatch,
    UnknownHolder,
    HolderNotVerifiable,
    HolderSignatureMismatch,
    Malformed { detail: String },
    Constituent { index: usize, reason: Box<FailureReason> },
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureReason::UnknownIssuer => f.write_str("unknown-issuer"),
            FailureReason::IssuerNotVerifiable => f.write_str("issuer-not-verifiable"),
            FailureReason::SignatureMismatch => f.write_str("signature-mismatch"),
            FailureReason::VerificationMethodMismatch => f.write_str("verification-method-mismatch"),
            FailureReason::ProofCreatedMismatch => f.write_str("proof-created-mismatch"),
            FailureReason::Revoked => f.write_str("revoked"),
            FailureReason::HashMismatch => f.write_str("hash-mismatch"),
            FailureReason::UnknownHolder => f.write_str("unknown-holder"),
            FailureReason::HolderNotVerifiable => f.write_str("holder-not-verifiable"),
            FailureReason::HolderSignatureMismatch => f.write_str("holder-signature-mismatch"),
            FailureReason::Malformed { detail } => write!(f, "malformed: {detail}"),
            FailureReason::Constituent { index, reason } => write!(f, "credential[{index}]: {reason}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VerificationResult {
    pub valid: bool,
    pub reasons: Vec<FailureReason>,
}

impl VerificationResult {
    pub fn from_reasons(reasons: Vec<FailureReason>) -> Self {
        VerificationResult {
            valid: reasons.is_empty(),
            reasons,
        }
    }
}

/// Answers whether a credential has been revoked by its issuer.
pub trait RevocationRegistry {
    fn is_revoked(&self, credential: &CredentialId, issuer: &Did) -> bool;
}

/// Payload digest of the ledger record revoking `credential`.
pub fn revocation_digest(credential: &CredentialId) -> Digest32 {
    canonical_digest(&json!({ "revokes": credential.to_hex() })).expect("no floats")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RevocationRecord {
    pub credential_id: CredentialId,
    pub issuer: Did,
    pub block_index: u64,
    pub timestamp: Timestamp,
}

/// Checks issuer resolution, the proof signature and revocation status.
pub fn verify_credential(
    vc: &VerifiableCredential,
    resolver: &impl DidResolver,
    revocations: &impl RevocationRegistry,
) -> Result<VerificationResult> {
    vc.check_structure()?;
    let mut reasons = Vec::new();
    let id = vc.id();

    if vc.proof.verification_method != verification_method(&vc.body.issuer) {
        reasons.push(FailureReason::VerificationMethodMismatch);
    }
    if vc.proof.created != vc.body.issuance_date {
        reasons.push(FailureReason::ProofCreatedMismatch);
    }
    match resolver.resolve(&vc.body.issuer) {
        Err(_) => reasons.push(FailureReason::UnknownIssuer),
        Ok(resolved) => match resolved.document.controller_key().filter(|_| resolved.verifiable) {
            None => reasons.push(FailureReason::IssuerNotVerifiable),
            Some(key) => {
                if !key.verify(&id, &vc.proof.proof_value) {
                    reasons.push(FailureReason::SignatureMismatch);
                }
            }
        },
    }
    if revocations.is_revoked(&id, &vc.body.issuer) {
        reasons.push(FailureReason::Revoked);
    }
    Ok(VerificationResult::from_reasons(reasons))
}

/// One line of the credentials listing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CredentialRow {
    pub id: CredentialId,
    pub created: Timestamp,
    #[serde(rename = "type")]
    pub type_label: String,
    pub from: String,
    pub to: String,
}

#[derive(Clone, Debug, Default)]
pub struct CredentialFilter {
    pub from: Option<Did>,
    pub to: Option<Did>,
    pub type_contains: Option<String>,
}

impl CredentialFilter {
    pub fn matches(&self, vc: &VerifiableCredential) -> bool {
        self.from.as_ref().is_none_or(|d| *d == vc.body.issuer)
            && self.to.as_ref().is_none_or(|d| *d == vc.body.subject)
            && self
                .type_contains
                .as_ref()
                .is_none_or(|needle| vc.body.types.iter().any(|t| t.contains(needle.as_str())))
    }
}

/// Credentials in insertion order, indexed by id.
#[derive(Debug, Default)]
pub struct CredentialStore {
    items: Vec<VerifiableCredential>,
    by_id: HashMap<CredentialId, usize>,
}

impl CredentialStore {
    pub fn load(path: &Path) -> Result<Self> {
        let items: Vec<VerifiableCredential> = store::load_array(path)?;
        let mut out = CredentialStore::default();
        for vc in items {
            out.insert(vc);
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        store::save_array(path, &self.items)
    }

    /// Adds `vc` unless a credential with the same id is present.
    pub fn insert(&mut self, vc: VerifiableCredential) -> bool {
        let id = vc.id();
        if self.by_id.contains_key(&id) {
            return false;
        }
        self.by_id.insert(id, self.items.len());
        self.items.push(vc);
        true
    }

    pub fn get(&self, id: &CredentialId) -> Option<&VerifiableCredential> {
        self.by_id.get(id).map(|&i| &self.items[i])
    }

    pub fn contains(&self, id: &CredentialId) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &VerifiableCredential> {
        self.items.iter()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Rows for matching credentials, oldest first.
    pub fn list(&self, filter: &CredentialFilter) -> Vec<CredentialRow> {
        let mut matching: Vec<&VerifiableCredential> = self.items.iter().filter(|vc| filter.matches(vc)).collect();
        matching.sort_by_key(|vc| vc.body.issuance_date);
        matching.into_iter().map(VerifiableCredential::row).collect()
    }
}
