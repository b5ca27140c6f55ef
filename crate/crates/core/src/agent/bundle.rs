use serde::{Deserialize, Serialize};

use crate::credential::VerifiableCredential;
use crate::crypto::RecoverableSignature;
use crate::identity::{Did, DidDocument};
use crate::presentation::VerifiablePresentation;

/// Everything an owner holds, in a form another agent can re-verify.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportBundle {
    pub owner: Did,
    pub credentials: Vec<VerifiableCredential>,
    pub presentations: Vec<VerifiablePresentation>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RejectedItem {
    pub kind: &'static str,
    pub id: String,
    pub reasons: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ImportReport {
    pub imported: usize,
    pub already_present: usize,
    pub rejected: Vec<RejectedItem>,
}

/// A DID document with the self-signature from its original registration,
/// enough for another agent to replay the registration without the key.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistrationProof {
    pub document: DidDocument,
    pub signature: RecoverableSignature,
}
