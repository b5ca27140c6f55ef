//! The agent: one data directory holding the keystore, the credential,
//! presentation and message stores, and the ledger.
//!
//! Every state-changing operation appends exactly one ledger block and then
//! rewrites the affected store. Writers serialize on an exclusive lock file
//! in the data directory; readers work from the snapshot loaded at open.
//!
//! Private keys sit unencrypted in `identifiers.json`.

mod bundle;
mod message;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

pub use bundle::{ExportBundle, ImportReport, RegistrationProof, RejectedItem};
pub use message::{Message, MessageView};

use crate::credential::{
    revocation_digest, verify_credential, Claim, CredentialBody, CredentialFilter, CredentialId, CredentialRow,
    CredentialStore, RevocationRecord, VerifiableCredential, VerificationResult,
};
use crate::crypto::{generate_keypair, Digest32};
use crate::error::{Error, Result};
use crate::identity::{
    Did, DidDocument, DidResolver, IdentifierRow, IdentifierStore, Provider, ResolvedDid, StoredIdentifier, KMS_LOCAL,
};
use crate::ledger::{Chain, FileLock, LedgerRecord, RecordFilter, RecordKind};
use crate::presentation::{verify_presentation, PresentationBody, PresentationRow, PresentationStore, VerifiablePresentation};
use crate::store;
use crate::time::Timestamp;

/// Environment variable naming the data directory.
pub const DATA_DIR_ENV: &str = "CREDFOLIO_HOME";

pub const IDENTIFIERS_FILE: &str = "identifiers.json";
pub const CREDENTIALS_FILE: &str = "credentials.json";
pub const PRESENTATIONS_FILE: &str = "presentations.json";
pub const MESSAGES_FILE: &str = "messages.json";
pub const LEDGER_FILE: &str = "ledger.jsonl";
const AGENT_LOCK_FILE: &str = "agent.lock";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgentConfig {
    pub data_dir: PathBuf,
    pub default_provider: Provider,
}

impl AgentConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        AgentConfig {
            data_dir: data_dir.into(),
            default_provider: Provider::Ethr,
        }
    }

    /// `$CREDFOLIO_HOME`, else `<user data dir>/credfolio`.
    pub fn from_env() -> Result<Self> {
        if let Some(dir) = std::env::var_os(DATA_DIR_ENV).filter(|v| !v.is_empty()) {
            return Ok(Self::new(dir));
        }
        let base = dirs::data_dir().ok_or(Error::NoDataDir(DATA_DIR_ENV))?;
        Ok(Self::new(base.join("credfolio")))
    }
}

/// Parameters for issuing a credential.
#[derive(Clone, Debug)]
pub struct IssueRequest {
    pub issuer: Did,
    pub subject: Did,
    pub extra_types: Vec<String>,
    pub claims: Vec<Claim>,
    pub revocable: bool,
}

#[derive(Debug)]
pub struct Agent {
    config: AgentConfig,
    identifiers: IdentifierStore,
    credentials: CredentialStore,
    presentations: PresentationStore,
    messages: Vec<Message>,
    ledger: Chain,
}

impl Agent {
    /// Opens (creating if needed) the data directory. A ledger that fails
    /// verification is refused.
    pub fn open(config: AgentConfig) -> Result<Self> {
        fs::create_dir_all(&config.data_dir).map_err(|e| Error::io(&config.data_dir, e))?;
        let ledger = Chain::init(config.data_dir.join(LEDGER_FILE))?;
        let mut agent = Agent {
            config,
            identifiers: IdentifierStore::default(),
            credentials: CredentialStore::default(),
            presentations: PresentationStore::default(),
            messages: Vec::new(),
            ledger,
        };
        agent.reload_stores()?;
        Ok(agent)
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn data_dir(&self) -> &Path {
        &self.config.data_dir
    }

    fn path(&self, file: &str) -> PathBuf {
        self.config.data_dir.join(file)
    }

    fn reload_stores(&mut self) -> Result<()> {
        self.identifiers = IdentifierStore::load(&self.path(IDENTIFIERS_FILE))?;
        self.credentials = CredentialStore::load(&self.path(CREDENTIALS_FILE))?;
        self.presentations = PresentationStore::load(&self.path(PRESENTATIONS_FILE))?;
        self.messages = store::load_array(&self.path(MESSAGES_FILE))?;
        Ok(())
    }

    /// Takes the writer lock and catches up with other writers.
    fn begin_write(&mut self) -> Result<FileLock> {
        let lock = FileLock::acquire(&self.path(AGENT_LOCK_FILE))?;
        if self.ledger.refresh()? {
            self.reload_stores()?;
        }
        Ok(lock)
    }

    pub fn ledger(&self) -> &Chain {
        &self.ledger
    }

    // ---- identifiers ----

    /// Creates a DID. Ethr providers get a fresh key; did:web needs `web_name`
    /// and gets no key.
    pub fn create_identifier(
        &mut self,
        alias: &str,
        provider: Provider,
        kms: &str,
        web_name: Option<&str>,
    ) -> Result<DidDocument> {
        if kms != KMS_LOCAL {
            return Err(Error::UnsupportedKms(kms.to_string()));
        }
        let _lock = self.begin_write()?;
        let (document, private_key_hex, record) = if provider.is_ethr() {
            let pair = generate_keypair(None)?;
            let document = DidDocument::for_keypair(provider, alias, &pair)?;
            let record = LedgerRecord::signed(
                RecordKind::DidRegistration,
                document.content_digest(),
                document.did.clone(),
                &pair,
            );
            (document, Some(pair.private_hex()), record)
        } else {
            let document = DidDocument::web(web_name, alias)?;
            // No key is bound to a web name; a throwaway key signs the registration.
            let once = generate_keypair(None)?;
            let record = LedgerRecord::signed(
                RecordKind::DidRegistration,
                document.content_digest(),
                document.did.clone(),
                &once,
            );
            (document, None, record)
        };
        if self.identifiers.contains(&document.did) {
            return Err(Error::AlreadyRegistered(document.did.to_string()));
        }
        self.ledger.append_block(vec![record])?;
        self.identifiers.insert(StoredIdentifier {
            document: document.clone(),
            private_key_hex,
        })?;
        self.identifiers.save(&self.path(IDENTIFIERS_FILE))?;
        Ok(document)
    }

    pub fn resolve_did(&self, did: &Did) -> Result<ResolvedDid> {
        self.identifiers.resolve(did)
    }

    pub fn list_identifiers(&self) -> Vec<IdentifierRow> {
        self.identifiers.rows()
    }

    pub fn identifiers(&self) -> &IdentifierStore {
        &self.identifiers
    }

    /// The document and its original registration signature.
    pub fn registration_proof(&self, did: &Did) -> Result<RegistrationProof> {
        let document = self.identifiers.resolve(did)?.document;
        let digest = document.content_digest();
        let filter = RecordFilter {
            kind: Some(RecordKind::DidRegistration),
            author: Some(did.clone()),
            since: None,
        };
        let (_, record) = self
            .ledger
            .query_records(&filter)
            .into_iter()
            .find(|(_, r)| r.payload_digest == digest)
            .ok_or_else(|| Error::NotFound(format!("registration record for {did}")))?;
        Ok(RegistrationProof {
            document,
            signature: record.signature,
        })
    }

    /// Registers a DID created elsewhere. The agent gets no key for it.
    pub fn import_registration(&mut self, proof: &RegistrationProof) -> Result<DidDocument> {
        let document = &proof.document;
        document.validate()?;
        let record = LedgerRecord::with_signature(
            RecordKind::DidRegistration,
            document.content_digest(),
            document.did.clone(),
            proof.signature,
        );
        record.check_signature().map_err(Error::InvalidRecord)?;
        let _lock = self.begin_write()?;
        if self.identifiers.contains(&document.did) {
            return Err(Error::AlreadyRegistered(document.did.to_string()));
        }
        self.ledger.append_block(vec![record])?;
        self.identifiers.insert(StoredIdentifier {
            document: document.clone(),
            private_key_hex: None,
        })?;
        self.identifiers.save(&self.path(IDENTIFIERS_FILE))?;
        Ok(document.clone())
    }

    // ---- credentials ----

    pub fn issue_credential(&mut self, request: IssueRequest) -> Result<VerifiableCredential> {
        let _lock = self.begin_write()?;
        let key = self.identifiers.keypair(&request.issuer)?;
        if !self.identifiers.contains(&request.subject) {
            return Err(Error::UnknownSubject(request.subject.to_string()));
        }
        let body = CredentialBody::new(
            request.issuer,
            request.subject,
            &request.extra_types,
            request.claims,
            request.revocable,
            Timestamp::now(),
        )?;
        let vc = VerifiableCredential::sign(body, &key)?;
        let record = LedgerRecord::with_signature(
            RecordKind::CredentialIssued,
            vc.id(),
            vc.body.issuer.clone(),
            vc.proof.proof_value,
        );
        self.ledger.append_block(vec![record])?;
        self.credentials.insert(vc.clone());
        self.credentials.save(&self.path(CREDENTIALS_FILE))?;
        Ok(vc)
    }

    pub fn verify_credential(&self, vc: &VerifiableCredential) -> Result<VerificationResult> {
        verify_credential(vc, &self.identifiers, &self.ledger)
    }

    pub fn revoke_credential(&mut self, caller: &Did, id: &CredentialId) -> Result<RevocationRecord> {
        let _lock = self.begin_write()?;
        let vc = self
            .credentials
            .get(id)
            .ok_or_else(|| Error::NotFound(format!("credential {id}")))?;
        if vc.body.issuer != *caller {
            return Err(Error::NotIssuer {
                caller: caller.to_string(),
                credential: id.to_string(),
            });
        }
        if !vc.body.revocable {
            return Err(Error::NotRevocable(id.to_string()));
        }
        if crate::credential::RevocationRegistry::is_revoked(&self.ledger, id, caller) {
            return Err(Error::AlreadyRevoked(id.to_string()));
        }
        let key = self.identifiers.keypair(caller)?;
        let record = LedgerRecord::signed(RecordKind::CredentialRevoked, revocation_digest(id), caller.clone(), &key);
        let timestamp = record.timestamp;
        let block = self.ledger.append_block(vec![record])?;
        Ok(RevocationRecord {
            credential_id: *id,
            issuer: caller.clone(),
            block_index: block.index,
            timestamp,
        })
    }

    pub fn list_credentials(&self, filter: &CredentialFilter) -> Vec<CredentialRow> {
        self.credentials.list(filter)
    }

    pub fn credential(&self, id: &CredentialId) -> Option<&VerifiableCredential> {
        self.credentials.get(id)
    }

    pub fn credentials(&self) -> &CredentialStore {
        &self.credentials
    }

    // ---- presentations ----

    pub fn create_presentation(
        &mut self,
        holder: &Did,
        tag: &str,
        credential_ids: &[CredentialId],
        verifier: Option<Vec<Did>>,
    ) -> Result<VerifiablePresentation> {
        if credential_ids.is_empty() {
            return Err(Error::EmptyPortfolio);
        }
        let _lock = self.begin_write()?;
        let key = self.identifiers.keypair(holder)?;
        let verifiable_credential = credential_ids
            .iter()
            .map(|id| {
                self.credentials
                    .get(id)
                    .cloned()
                    .ok_or_else(|| Error::NotFound(format!("credential {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let body = PresentationBody {
            tag: tag.to_string(),
            holder: holder.clone(),
            verifier,
            verifiable_credential,
            created: Timestamp::now(),
        };
        let vp = VerifiablePresentation::sign(body, &key)?;
        let record = LedgerRecord::with_signature(
            RecordKind::PresentationCreated,
            vp.id(),
            holder.clone(),
            vp.proof().proof_value,
        );
        self.ledger.append_block(vec![record])?;
        self.presentations.insert(vp.clone());
        self.presentations.save(&self.path(PRESENTATIONS_FILE))?;
        Ok(vp)
    }

    pub fn verify_presentation(&self, vp: &VerifiablePresentation) -> Result<VerificationResult> {
        verify_presentation(vp, &self.identifiers, &self.ledger)
    }

    pub fn list_presentations(&self) -> Vec<PresentationRow> {
        self.presentations.list()
    }

    pub fn presentation(&self, hash: &Digest32) -> Option<&VerifiablePresentation> {
        self.presentations.get(hash)
    }

    pub fn presentations(&self) -> &PresentationStore {
        &self.presentations
    }

    // ---- messages ----

    pub fn send_message(&mut self, from: &Did, to: &Did, body: &str) -> Result<Message> {
        let _lock = self.begin_write()?;
        if !self.identifiers.contains(to) {
            return Err(Error::UnknownRecipient(to.to_string()));
        }
        let key = self.identifiers.keypair(from)?;
        let message = Message::sign(from.clone(), to.clone(), body.to_string(), &key);
        let record = LedgerRecord::with_signature(RecordKind::Message, message.digest(), from.clone(), message.signature);
        self.ledger.append_block(vec![record])?;
        self.messages.push(message.clone());
        store::save_array(&self.path(MESSAGES_FILE), &self.messages)?;
        Ok(message)
    }

    /// Messages sent or received by `did`, oldest first, each checked
    /// against the sender's registered key.
    pub fn list_messages(&self, did: &Did) -> Vec<MessageView> {
        let mut views: Vec<MessageView> = self
            .messages
            .iter()
            .filter(|m| m.from == *did || m.to == *did)
            .map(|m| MessageView {
                verified: m.verify(&self.identifiers),
                message: m.clone(),
            })
            .collect();
        views.sort_by_key(|v| v.message.timestamp);
        views
    }

    pub fn all_messages(&self) -> Vec<MessageView> {
        let mut views: Vec<MessageView> = self
            .messages
            .iter()
            .map(|m| MessageView {
                verified: m.verify(&self.identifiers),
                message: m.clone(),
            })
            .collect();
        views.sort_by_key(|v| v.message.timestamp);
        views
    }

    // ---- portability ----

    /// Credentials whose subject is `owner` and presentations it holds.
    pub fn export_bundle(&self, owner: &Did) -> Result<ExportBundle> {
        if !self.identifiers.contains(owner) {
            return Err(Error::NotFound(owner.to_string()));
        }
        Ok(ExportBundle {
            owner: owner.clone(),
            credentials: self
                .credentials
                .iter()
                .filter(|vc| vc.body.subject == *owner)
                .cloned()
                .collect(),
            presentations: self
                .presentations
                .iter()
                .filter(|vp| vp.body().holder == *owner)
                .cloned()
                .collect(),
        })
    }

    /// Adds every bundle item that verifies here; the rest are reported.
    /// Imported items are recorded in a single ledger block, reusing their
    /// own proof signatures.
    pub fn import_bundle(&mut self, bundle: &ExportBundle) -> Result<ImportReport> {
        let _lock = self.begin_write()?;
        let mut report = ImportReport::default();
        let mut records = Vec::new();
        let mut new_credentials = Vec::new();
        let mut new_presentations = Vec::new();

        for vc in &bundle.credentials {
            let id = vc.id();
            if self.credentials.contains(&id) || new_credentials.iter().any(|c: &VerifiableCredential| c.id() == id) {
                report.already_present += 1;
                continue;
            }
            let mut reasons = Vec::new();
            if vc.body.subject != bundle.owner {
                reasons.push(format!("subject is not the bundle owner {}", bundle.owner));
            }
            match self.verify_credential(vc) {
                Ok(result) => reasons.extend(result.reasons.iter().map(ToString::to_string)),
                Err(e) => reasons.push(e.to_string()),
            }
            if reasons.is_empty() {
                records.push(LedgerRecord::with_signature(
                    RecordKind::CredentialIssued,
                    id,
                    vc.body.issuer.clone(),
                    vc.proof.proof_value,
                ));
                new_credentials.push(vc.clone());
            } else {
                report.rejected.push(RejectedItem {
                    kind: "credential",
                    id: id.to_hex(),
                    reasons,
                });
            }
        }

        for vp in &bundle.presentations {
            if self.presentations.contains(&vp.hash)
                || new_presentations.iter().any(|p: &VerifiablePresentation| p.hash == vp.hash)
            {
                report.already_present += 1;
                continue;
            }
            let mut reasons = Vec::new();
            if vp.body().holder != bundle.owner {
                reasons.push(format!("holder is not the bundle owner {}", bundle.owner));
            }
            match self.verify_presentation(vp) {
                Ok(result) => reasons.extend(result.reasons.iter().map(ToString::to_string)),
                Err(e) => reasons.push(e.to_string()),
            }
            if reasons.is_empty() {
                records.push(LedgerRecord::with_signature(
                    RecordKind::PresentationCreated,
                    vp.id(),
                    vp.body().holder.clone(),
                    vp.proof().proof_value,
                ));
                new_presentations.push(vp.clone());
            } else {
                report.rejected.push(RejectedItem {
                    kind: "presentation",
                    id: hex::encode(vp.hash.as_bytes()),
                    reasons,
                });
            }
        }

        if records.is_empty() {
            return Ok(report);
        }
        self.ledger.append_block(records)?;
        report.imported = new_credentials.len() + new_presentations.len();
        if !new_credentials.is_empty() {
            for vc in new_credentials {
                self.credentials.insert(vc);
            }
            self.credentials.save(&self.path(CREDENTIALS_FILE))?;
        }
        if !new_presentations.is_empty() {
            for vp in new_presentations {
                self.presentations.insert(vp);
            }
            self.presentations.save(&self.path(PRESENTATIONS_FILE))?;
        }
        Ok(report)
    }

    // ---- audit ----

    /// Store entries whose content has no matching ledger record, or more
    /// than one. Empty when stores and ledger agree.
    pub fn store_mismatches(&self) -> Vec<String> {
        let mut counts: HashMap<(RecordKind, Digest32, &Did), usize> = HashMap::new();
        for (_, r) in self.ledger.query_records(&RecordFilter::default()) {
            *counts.entry((r.kind, r.payload_digest, &r.author)).or_default() += 1;
        }
        let mut problems = Vec::new();
        let mut expect = |what: String, kind: RecordKind, digest: Digest32, author: &Did| {
            let n = counts.get(&(kind, digest, author)).copied().unwrap_or(0);
            if n != 1 {
                problems.push(format!("{what}: {n} matching {kind} records"));
            }
        };
        for doc in self.identifiers.documents() {
            expect(format!("identifier {}", doc.did), RecordKind::DidRegistration, doc.content_digest(), &doc.did);
        }
        for vc in self.credentials.iter() {
            expect(format!("credential {}", vc.id()), RecordKind::CredentialIssued, vc.id(), &vc.body.issuer);
        }
        for vp in self.presentations.iter() {
            expect(
                format!("presentation {}", hex::encode(vp.hash.as_bytes())),
                RecordKind::PresentationCreated,
                vp.id(),
                &vp.body().holder,
            );
        }
        for m in &self.messages {
            expect(format!("message from {}", m.from), RecordKind::Message, m.digest(), &m.from);
        }
        problems
    }
}
