//! Decentralized identifiers, verifiable credentials and portfolios on a
//! local append-only ledger.
//!
//! - [`crypto`]: secp256k1 keys, keccak-256, recoverable signatures
//! - [`canonical`]: sorted-key JSON for everything that gets signed or hashed
//! - [`identity`]: `did:ethr` / `did:web` identifiers and DID documents
//! - [`credential`]: issuing, verifying and revoking credentials
//! - [`presentation`]: holder-signed credential bundles
//! - [`ledger`]: the hash-chained block file
//! - [`agent`]: the data directory tying all of the above together

pub mod agent;
pub mod canonical;
pub mod credential;
pub mod crypto;
pub mod error;
pub mod identity;
pub mod ledger;
pub mod presentation;
mod store;
pub mod time;

pub use agent::{Agent, AgentConfig, ExportBundle, ImportReport, IssueRequest, Message, MessageView, RegistrationProof};
pub use canonical::{canonical_bytes, canonical_digest, canonical_encode};
pub use credential::{
    credential_digest, type_label, Claim, CredentialBody, CredentialFilter, CredentialId, CredentialRow, FailureReason,
    RevocationRecord, VerifiableCredential, VerificationResult,
};
pub use crypto::{
    compress_public, decompress_public, digest, generate_keypair, sign_digest, verify_signature, Digest32, KeyPair,
    PublicKey, RecoverableSignature,
};
pub use error::{Error, Result};
pub use identity::{derive_did, Did, DidDocument, DidResolver, IdentifierRow, Provider, ResolvedDid};
pub use ledger::{Block, Chain, ChainHead, LedgerRecord, RecordFilter, RecordKind};
pub use presentation::{verify_presentation, PresentationRow, VerifiablePresentation};
pub use time::{relative_age, Timestamp};
