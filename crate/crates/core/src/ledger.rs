//! Append-only hash-chained ledger stored as one canonical-JSON block per line.
//!
//! Blocks carry signed records holding payload digests only; full payloads
//! live in the store files. Each block commits to its predecessor through
//! `prevHash`, so editing or deleting history breaks every later link. A
//! small head file next to the ledger names the newest block, which catches
//! blocks cut off the end.

use std::collections::HashSet;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::canonical::{canonical_bytes, canonical_digest};
use crate::credential::{revocation_digest, CredentialId, RevocationRegistry};
use crate::crypto::{Digest32, KeyPair, RecoverableSignature};
use crate::error::{Error, Result};
use crate::identity::{Did, Provider};
use crate::time::Timestamp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RecordKind {
    DidRegistration,
    CredentialIssued,
    CredentialRevoked,
    PresentationCreated,
    Message,
}

impl RecordKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RecordKind::DidRegistration => "DidRegistration",
            RecordKind::CredentialIssued => "CredentialIssued",
            RecordKind::CredentialRevoked => "CredentialRevoked",
            RecordKind::PresentationCreated => "PresentationCreated",
            RecordKind::Message => "Message",
        }
    }
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RecordKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(json!(s)).map_err(|_| Error::InvalidRecord(format!("unknown record kind `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LedgerRecord {
    pub kind: RecordKind,
    pub payload_digest: Digest32,
    pub author: Did,
    pub signature: RecoverableSignature,
    pub timestamp: Timestamp,
}

impl LedgerRecord {
    /// A record signed by `key` on behalf of `author`.
    pub fn signed(kind: RecordKind, payload_digest: Digest32, author: Did, key: &KeyPair) -> Self {
        LedgerRecord {
            kind,
            payload_digest,
            author,
            signature: key.sign(&payload_digest),
            timestamp: Timestamp::now(),
        }
    }

    /// A record around a signature made elsewhere over `payload_digest`,
    /// e.g. a credential's own proof value.
    pub fn with_signature(kind: RecordKind, payload_digest: Digest32, author: Did, signature: RecoverableSignature) -> Self {
        LedgerRecord {
            kind,
            payload_digest,
            author,
            signature,
            timestamp: Timestamp::now(),
        }
    }

    /// Ethr authors must have signed with the key their DID embeds. A did:web
    /// author holds no key and may only appear on its own registration,
    /// whose one-time signature must still be well formed.
    pub fn check_signature(&self) -> std::result::Result<(), String> {
        match self.author.provider() {
            Provider::Web => {
                if self.kind != RecordKind::DidRegistration {
                    return Err(format!("did:web author cannot sign a {} record", self.kind));
                }
                self.signature
                    .recover(&self.payload_digest)
                    .map(|_| ())
                    .map_err(|e| e.to_string())
            }
            _ => {
                let key = self
                    .author
                    .public_key()
                    .ok_or_else(|| format!("author {} has no valid key", self.author))?;
                if key.verify(&self.payload_digest, &self.signature) {
                    Ok(())
                } else {
                    Err(format!("signature does not match author {}", self.author))
                }
            }
        }
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct BlockHeader<'a> {
    index: u64,
    prev_hash: &'a Digest32,
    timestamp: &'a Timestamp,
    records: &'a [LedgerRecord],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Block {
    pub index: u64,
    pub prev_hash: Digest32,
    pub timestamp: Timestamp,
    pub records: Vec<LedgerRecord>,
    pub block_hash: Digest32,
}

impl Block {
    fn seal(index: u64, prev_hash: Digest32, timestamp: Timestamp, records: Vec<LedgerRecord>) -> Self {
        let mut block = Block {
            index,
            prev_hash,
            timestamp,
            records,
            block_hash: Digest32::ZERO,
        };
        block.block_hash = block.compute_hash();
        block
    }

    pub fn genesis(timestamp: Timestamp) -> Self {
        Self::seal(0, Digest32::ZERO, timestamp, Vec::new())
    }

    pub fn compute_hash(&self) -> Digest32 {
        canonical_digest(&BlockHeader {
            index: self.index,
            prev_hash: &self.prev_hash,
            timestamp: &self.timestamp,
            records: &self.records,
        })
        .expect("blocks contain no floats")
    }

    /// The exact line stored in `ledger.jsonl`, without the newline.
    pub fn to_line(&self) -> Vec<u8> {
        canonical_bytes(self).expect("blocks contain no floats")
    }
}

/// First problem found while checking a chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainFault {
    pub block: u64,
    pub reason: String,
}

impl fmt::Display for ChainFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "block {}: {}", self.block, self.reason)
    }
}

impl From<ChainFault> for Error {
    fn from(f: ChainFault) -> Self {
        Error::CorruptLedger {
            block: f.block,
            reason: f.reason,
        }
    }
}

/// Checks links, hashes and indices for every block first, then record
/// signatures and author registration.
pub fn verify_blocks(blocks: &[Block]) -> std::result::Result<(), ChainFault> {
    let fault = |block: u64, reason: String| Err(ChainFault { block, reason });
    if blocks.is_empty() {
        return fault(0, "missing genesis block".into());
    }
    let mut prev = Digest32::ZERO;
    for (pos, block) in blocks.iter().enumerate() {
        let pos = pos as u64;
        if block.index != pos {
            return fault(pos, format!("index {} out of sequence", block.index));
        }
        if block.prev_hash != prev {
            return fault(pos, "prevHash does not link to the previous block".into());
        }
        if block.compute_hash() != block.block_hash {
            return fault(pos, "blockHash does not match contents".into());
        }
        if pos == 0 && !block.records.is_empty() {
            return fault(0, "genesis block carries records".into());
        }
        if pos > 0 && block.records.is_empty() {
            return fault(pos, "empty block".into());
        }
        prev = block.block_hash;
    }

    let mut registered: HashSet<&Did> = HashSet::new();
    for block in blocks {
        for record in &block.records {
            if let Err(reason) = record.check_signature() {
                return fault(block.index, reason);
            }
            if record.kind == RecordKind::DidRegistration {
                registered.insert(&record.author);
            } else if !registered.contains(&record.author) {
                return fault(block.index, format!("author {} is not registered", record.author));
            }
        }
    }
    Ok(())
}

/// Parses ledger file contents. Every line must be the canonical encoding
/// of the block it decodes to, so no byte can change without notice.
pub fn parse_ledger(bytes: &[u8]) -> std::result::Result<Vec<Block>, ChainFault> {
    let body = bytes.strip_suffix(b"\n").ok_or(ChainFault {
        block: 0,
        reason: "ledger file does not end with a newline".into(),
    })?;
    let mut blocks = Vec::new();
    for (pos, line) in body.split(|&b| b == b'\n').enumerate() {
        let fault = |reason: String| ChainFault {
            block: pos as u64,
            reason,
        };
        let block: Block = serde_json::from_slice(line).map_err(|e| fault(format!("unreadable block: {e}")))?;
        if block.to_line() != line {
            return Err(fault("block is not canonically encoded".into()));
        }
        blocks.push(block);
    }
    Ok(blocks)
}

/// The newest block as of the last append.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ChainHead {
    pub index: u64,
    pub block_hash: Digest32,
}

impl ChainHead {
    pub fn of(block: &Block) -> Self {
        ChainHead {
            index: block.index,
            block_hash: block.block_hash,
        }
    }
}

/// The block named by `head` must be present and unchanged. Blocks past the
/// head are accepted, since the head is rewritten only after a block lands.
pub fn verify_head(blocks: &[Block], head: &ChainHead) -> std::result::Result<(), ChainFault> {
    match blocks.get(head.index as usize) {
        None => Err(ChainFault {
            block: blocks.len() as u64,
            reason: format!("block missing: ledger has {} blocks but its head is block {}", blocks.len(), head.index),
        }),
        Some(b) if b.block_hash != head.block_hash => Err(ChainFault {
            block: head.index,
            reason: "blockHash differs from the recorded head".into(),
        }),
        Some(_) => Ok(()),
    }
}

/// `<ledger>.head`, beside the ledger file.
pub fn head_path(ledger: &Path) -> PathBuf {
    sibling(ledger, ".head")
}

fn read_head(ledger: &Path) -> Result<std::result::Result<ChainHead, ChainFault>> {
    let path = head_path(ledger);
    let bytes = match fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Ok(Err(ChainFault {
                block: 0,
                reason: format!("head file {} is missing", path.display()),
            }))
        }
        Err(e) => return Err(Error::io(&path, e)),
    };
    Ok(serde_json::from_slice(&bytes).map_err(|e| ChainFault {
        block: 0,
        reason: format!("unreadable head file: {e}"),
    }))
}

fn write_head(ledger: &Path, head: &ChainHead) -> Result<()> {
    let mut bytes = canonical_bytes(head).expect("no floats");
    bytes.push(b'\n');
    crate::store::write_atomic(&head_path(ledger), &bytes)
}

/// Reads and fully checks a ledger file and its head without creating or
/// modifying either. Returns the block count.
pub fn audit_file(path: &Path) -> Result<std::result::Result<usize, ChainFault>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let blocks = match parse_ledger(&bytes).and_then(|blocks| verify_blocks(&blocks).map(|_| blocks)) {
        Ok(blocks) => blocks,
        Err(fault) => return Ok(Err(fault)),
    };
    Ok(read_head(path)?.and_then(|head| verify_head(&blocks, &head).map(|_| blocks.len())))
}

#[derive(Clone, Debug, Default)]
pub struct RecordFilter {
    pub kind: Option<RecordKind>,
    pub author: Option<Did>,
    pub since: Option<Timestamp>,
}

impl RecordFilter {
    fn matches(&self, record: &LedgerRecord) -> bool {
        self.kind.is_none_or(|k| k == record.kind)
            && self.author.as_ref().is_none_or(|a| *a == record.author)
            && self.since.is_none_or(|t| record.timestamp >= t)
    }
}

/// An opened ledger file.
#[derive(Debug)]
pub struct Chain {
    path: PathBuf,
    blocks: Vec<Block>,
    head: ChainHead,
    file_len: u64,
    revocations: HashSet<(Digest32, Did)>,
}

impl Chain {
    /// Opens the ledger at `path`, creating a genesis-only chain if the file
    /// is absent. An existing file that fails verification is refused.
    pub fn init(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let _lock = FileLock::acquire(&lock_path(&path))?;
        if !path.exists() {
            let genesis = Block::genesis(Timestamp::now());
            let mut line = genesis.to_line();
            line.push(b'\n');
            write_head(&path, &ChainHead::of(&genesis))?;
            crate::store::write_atomic(&path, &line)?;
        }
        let mut chain = Chain {
            path,
            blocks: Vec::new(),
            head: ChainHead {
                index: 0,
                block_hash: Digest32::ZERO,
            },
            file_len: 0,
            revocations: HashSet::new(),
        };
        chain.reload()?;
        Ok(chain)
    }

    fn reload(&mut self) -> Result<()> {
        let bytes = fs::read(&self.path).map_err(|e| Error::io(&self.path, e))?;
        let blocks = parse_ledger(&bytes)?;
        verify_blocks(&blocks)?;
        let head = read_head(&self.path)??;
        verify_head(&blocks, &head)?;
        self.head = head;
        self.file_len = bytes.len() as u64;
        self.revocations.clear();
        for block in &blocks {
            index_revocations(&mut self.revocations, &block.records);
        }
        self.blocks = blocks;
        Ok(())
    }

    /// Picks up blocks appended by other processes. Returns whether the
    /// file had changed.
    pub fn refresh(&mut self) -> Result<bool> {
        let len = fs::metadata(&self.path).map_err(|e| Error::io(&self.path, e))?.len();
        if len == self.file_len {
            return Ok(false);
        }
        self.reload()?;
        Ok(true)
    }

    /// Seals `records` into a new block and persists it before returning.
    pub fn append_block(&mut self, records: Vec<LedgerRecord>) -> Result<Block> {
        if records.is_empty() {
            return Err(Error::EmptyBlock);
        }
        for record in &records {
            record.check_signature().map_err(Error::InvalidRecord)?;
        }
        let _lock = FileLock::acquire(&lock_path(&self.path))?;
        self.refresh()?;

        let mut registered: HashSet<&Did> = self
            .blocks
            .iter()
            .flat_map(|b| &b.records)
            .filter(|r| r.kind == RecordKind::DidRegistration)
            .map(|r| &r.author)
            .collect();
        for record in &records {
            if record.kind == RecordKind::DidRegistration {
                registered.insert(&record.author);
            } else if !registered.contains(&record.author) {
                return Err(Error::InvalidRecord(format!("author {} is not registered", record.author)));
            }
        }

        let tip = self.tip();
        let block = Block::seal(tip.index + 1, tip.block_hash, Timestamp::now(), records);
        let mut line = block.to_line();
        line.push(b'\n');
        let mut file = OpenOptions::new()
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        file.write_all(&line).map_err(|e| Error::io(&self.path, e))?;
        file.sync_data().map_err(|e| Error::io(&self.path, e))?;
        self.head = ChainHead::of(&block);
        write_head(&self.path, &self.head)?;

        self.file_len += line.len() as u64;
        index_revocations(&mut self.revocations, &block.records);
        self.blocks.push(block.clone());
        Ok(block)
    }

    pub fn verify_chain(&self) -> bool {
        self.find_fault().is_none()
    }

    pub fn find_fault(&self) -> Option<ChainFault> {
        verify_blocks(&self.blocks)
            .and_then(|_| verify_head(&self.blocks, &self.head))
            .err()
    }

    pub fn head(&self) -> &ChainHead {
        &self.head
    }

    pub fn query_records(&self, filter: &RecordFilter) -> Vec<(u64, &LedgerRecord)> {
        self.blocks
            .iter()
            .flat_map(|b| b.records.iter().map(move |r| (b.index, r)))
            .filter(|(_, r)| filter.matches(r))
            .collect()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn tip(&self) -> &Block {
        self.blocks.last().expect("a chain always holds its genesis block")
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl RevocationRegistry for Chain {
    fn is_revoked(&self, credential: &CredentialId, issuer: &Did) -> bool {
        self.revocations.contains(&(revocation_digest(credential), issuer.clone()))
    }
}

fn index_revocations(index: &mut HashSet<(Digest32, Did)>, records: &[LedgerRecord]) {
    for r in records.iter().filter(|r| r.kind == RecordKind::CredentialRevoked) {
        index.insert((r.payload_digest, r.author.clone()));
    }
}

fn lock_path(ledger: &Path) -> PathBuf {
    sibling(ledger, ".lock")
}

fn sibling(ledger: &Path, suffix: &str) -> PathBuf {
    let mut name = ledger.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    ledger.with_file_name(name)
}

/// Exclusive advisory lock held until drop.
#[derive(Debug)]
pub(crate) struct FileLock(File);

impl FileLock {
    pub(crate) fn acquire(path: &Path) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        file.lock().map_err(|e| Error::io(path, e))?;
        Ok(FileLock(file))
    }
}

impl Drop for FileLock {
    fn drop(&mut self) {
        let _ = self.0.unlock();
    }
}
