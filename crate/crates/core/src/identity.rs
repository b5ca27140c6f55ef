//! DID strings, DID documents and the local identifier registry.
//!
//! Ethereum-style identifiers embed the compressed controller key, so the
//! binding between a `did:ethr` string and its key is checkable offline.
//! `did:web` identifiers are chosen names with no key binding; they can be
//! stored and listed but never sign anything.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::canonical::canonical_digest;
use crate::crypto::{compress_public, hex_0x, parse_hex_lower, Digest32, KeyPair, PublicKey};
use crate::error::{Error, Result};
use crate::store;

/// Signature algorithms advertised for every controller key.
pub const KEY_ALGORITHMS: [&str; 3] = ["ES256K", "ES256K-R", "eth_signTransaction"];
pub const KMS_LOCAL: &str = "local";
pub const KEY_TYPE: &str = "Secp256k1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Provider {
    Ethr,
    EthrGoerli,
    Web,
}

impl Provider {
    pub const ALL: [Provider; 3] = [Provider::Ethr, Provider::EthrGoerli, Provider::Web];

    pub fn as_str(&self) -> &'static str {
        match self {
            Provider::Ethr => "did:ethr",
            Provider::EthrGoerli => "did:ethr:goerli",
            Provider::Web => "did:web",
        }
    }

    /// Whether identifiers under this provider are derived from a key.
    pub fn is_ethr(&self) -> bool {
        !matches!(self, Provider::Web)
    }
}

impl fmt::Display for Provider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provider {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Provider::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::UnsupportedProvider(s.to_string()))
    }
}

/// A decentralized identifier: provider plus method-specific id.
///
/// For ethr providers the id is `0x` followed by the 66 lowercase hex chars
/// of a compressed public key.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Did {
    provider: Provider,
    id: String,
}

impl Did {
    /// Parses user input. Hex is accepted in either case and stored lowercase.
    pub fn parse(s: &str) -> Result<Self> {
        Self::parse_inner(s, false)
    }

    /// Parses a stored DID, which must already be in canonical lowercase form.
    pub fn parse_canonical(s: &str) -> Result<Self> {
        Self::parse_inner(s, true)
    }

    fn parse_inner(s: &str, strict: bool) -> Result<Self> {
        let malformed = || Error::MalformedDid(s.to_string());
        // Longest prefix first: did:ethr:goerli: is also a did:ethr: prefix.
        let (provider, rest) = if let Some(rest) = s.strip_prefix("did:ethr:goerli:") {
            (Provider::EthrGoerli, rest)
        } else if let Some(rest) = s.strip_prefix("did:ethr:") {
            (Provider::Ethr, rest)
        } else if let Some(rest) = s.strip_prefix("did:web:") {
            (Provider::Web, rest)
        } else if s.starts_with("did:") {
            let method = s.split(':').take(2).collect::<Vec<_>>().join(":");
            return Err(Error::UnsupportedProvider(method));
        } else {
            return Err(malformed());
        };

        if provider == Provider::Web {
            if rest.is_empty() || rest.chars().any(|c| c.is_whitespace() || c.is_control()) {
                return Err(malformed());
            }
            return Ok(Did {
                provider,
                id: rest.to_string(),
            });
        }

        let hex_part = rest.strip_prefix("0x").ok_or_else(malformed)?;
        if hex_part.len() != 66 || !hex_part.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(malformed());
        }
        if strict && hex_part.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(malformed());
        }
        let lower = hex_part.to_ascii_lowercase();
        if !(lower.starts_with("02") || lower.starts_with("03")) {
            return Err(Error::MalformedKey(format!("DID key prefix 0x{}", &lower[..2])));
        }
        Ok(Did {
            provider,
            id: format!("0x{lower}"),
        })
    }

    pub fn provider(&self) -> Provider {
        self.provider
    }

    pub fn method_specific_id(&self) -> &str {
        &self.id
    }

    /// The compressed key embedded in an ethr DID.
    pub fn compressed_key(&self) -> Option<[u8; 33]> {
        if !self.provider.is_ethr() {
            return None;
        }
        let bytes = hex::decode(&self.id[2..]).ok()?;
        bytes.try_into().ok()
    }

    /// The controller key for ethr DIDs; `None` for did:web or off-curve ids.
    pub fn public_key(&self) -> Option<PublicKey> {
        PublicKey::from_sec1(&self.compressed_key()?).ok()
    }

    /// Display form used in listings: `did:ethr:.b174` for ethr DIDs,
    /// the full string for did:web.
    pub fn abbreviated(&self) -> String {
        if self.provider.is_ethr() {
            format!("{}:.{}", self.provider, &self.id[self.id.len() - 4..])
        } else {
            self.to_string()
        }
    }
}

impl fmt::Display for Did {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.provider, self.id)
    }
}

impl fmt::Debug for Did {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Did({self})")
    }
}

impl FromStr for Did {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Did::parse(s)
    }
}

impl Serialize for Did {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Did {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Did::parse_canonical(&s).map_err(serde::de::Error::custom)
    }
}

/// Builds an ethr DID from a compressed public key.
pub fn derive_did(provider: Provider, compressed_public: &[u8]) -> Result<Did> {
    if !provider.is_ethr() {
        return Err(Error::UnsupportedProvider(provider.to_string()));
    }
    let key = PublicKey::from_sec1(compressed_public)?;
    if compressed_public.len() != 33 {
        return Err(Error::MalformedKey("expected a 33-byte compressed key".into()));
    }
    Ok(Did {
        provider,
        id: hex_0x(key.compressed()),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyMeta {
    pub algorithms: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KeyEntry {
    pub kid: String,
    pub kms: String,
    #[serde(rename = "type")]
    pub key_type: String,
    pub public_key_hex: String,
    pub meta: KeyMeta,
}

impl KeyEntry {
    fn local(public_key_hex: String) -> Self {
        KeyEntry {
            kid: public_key_hex.clone(),
            kms: KMS_LOCAL.to_string(),
            key_type: KEY_TYPE.to_string(),
            public_key_hex,
            meta: KeyMeta {
                algorithms: KEY_ALGORITHMS.iter().map(|s| s.to_string()).collect(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DidDocument {
    pub did: Did,
    pub provider: String,
    pub alias: String,
    /// Uncompressed controller key hex without `0x`; empty for did:web.
    pub controller_key_id: String,
    pub keys: Vec<KeyEntry>,
}

impl DidDocument {
    /// Assembles the document for a freshly generated ethr key.
    pub fn for_keypair(provider: Provider, alias: &str, pair: &KeyPair) -> Result<Self> {
        check_alias(alias)?;
        let did = derive_did(provider, &pair.public_compressed())?;
        let controller = hex::encode(pair.public_uncompressed());
        Ok(DidDocument {
            did,
            provider: provider.to_string(),
            alias: alias.to_string(),
            controller_key_id: controller.clone(),
            keys: vec![KeyEntry::local(controller)],
        })
    }

    /// A did:web document: a named identity with no key binding.
    pub fn web(name: Option<&str>, alias: &str) -> Result<Self> {
        check_alias(alias)?;
        let name = name.map(str::trim).filter(|n| !n.is_empty()).ok_or(Error::MissingName)?;
        let did = Did::parse(&format!("did:web:{name}"))?;
        Ok(DidDocument {
            did,
            provider: Provider::Web.to_string(),
            alias: alias.to_string(),
            controller_key_id: String::new(),
            keys: Vec::new(),
        })
    }

    /// Checks the construction invariants of the document.
    pub fn validate(&self) -> Result<()> {
        let bad = |why: &str| Error::MalformedKey(format!("{}: {why}", self.did));
        if self.provider != self.did.provider().as_str() {
            return Err(bad("provider field disagrees with DID"));
        }
        check_alias(&self.alias)?;
        if !self.did.provider().is_ethr() {
            return Ok(());
        }
        let controller = parse_hex_lower(&self.controller_key_id)?;
        let compressed = compress_public(&controller)?;
        if Some(compressed) != self.did.compressed_key() {
            return Err(bad("controller key does not match the DID"));
        }
        let matching = self.keys.iter().filter(|k| k.kid == self.controller_key_id).count();
        if matching != 1 {
            return Err(bad("expected exactly one key entry for the controller"));
        }
        for key in &self.keys {
            if key.kid != key.public_key_hex {
                return Err(bad("kid differs from publicKeyHex"));
            }
            if !KEY_ALGORITHMS.iter().all(|a| key.meta.algorithms.iter().any(|m| m == a)) {
                return Err(bad("key entry misses a required algorithm"));
            }
        }
        Ok(())
    }

    /// The controller key, for documents that carry one.
    pub fn controller_key(&self) -> Option<PublicKey> {
        if !self.did.provider().is_ethr() {
            return None;
        }
        PublicKey::from_sec1(&parse_hex_lower(&self.controller_key_id).ok()?).ok()
    }

    /// Digest recorded on the ledger when this document is registered.
    pub fn content_digest(&self) -> Digest32 {
        canonical_digest(self).expect("documents contain no floats")
    }

    pub fn row(&self) -> IdentifierRow {
        IdentifierRow {
            provider: self.provider.clone(),
            alias: self.alias.clone(),
            did: self.did.clone(),
        }
    }
}

fn check_alias(alias: &str) -> Result<()> {
    if alias.trim().is_empty() {
        Err(Error::EmptyAlias)
    } else {
        Ok(())
    }
}

/// One line of the managed-identifiers listing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IdentifierRow {
    pub provider: String,
    pub alias: String,
    pub did: Did,
}

/// Result of resolving a DID against the registry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ResolvedDid {
    pub document: DidDocument,
    /// False for did:web: nothing binds the name to a key.
    pub verifiable: bool,
}

pub trait DidResolver {
    fn resolve(&self, did: &Did) -> Result<ResolvedDid>;

    /// Key that may sign on behalf of `did`, if the DID resolves to one.
    fn signing_key(&self, did: &Did) -> Option<PublicKey> {
        self.resolve(did)
            .ok()
            .filter(|r| r.verifiable)
            .and_then(|r| r.document.controller_key())
    }
}

/// An `identifiers.json` entry: the document plus the locally held key.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StoredIdentifier {
    #[serde(flatten)]
    pub document: DidDocument,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub private_key_hex: Option<String>,
}

/// Insertion-ordered registry of DID documents and their local keys.
#[derive(Debug, Default)]
pub struct IdentifierStore {
    entries: Vec<StoredIdentifier>,
    by_did: HashMap<Did, usize>,
}

impl IdentifierStore {
    pub fn load(path: &Path) -> Result<Self> {
        let entries: Vec<StoredIdentifier> = store::load_array(path)?;
        let mut out = IdentifierStore::default();
        for entry in entries {
            entry.document.validate()?;
            out.insert(entry)?;
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        store::save_array(path, &self.entries)
    }

    pub fn insert(&mut self, entry: StoredIdentifier) -> Result<()> {
        let did = entry.document.did.clone();
        if self.by_did.contains_key(&did) {
            return Err(Error::AlreadyRegistered(did.to_string()));
        }
        self.by_did.insert(did, self.entries.len());
        self.entries.push(entry);
        Ok(())
    }

    pub fn contains(&self, did: &Did) -> bool {
        self.by_did.contains_key(did)
    }

    pub fn get(&self, did: &Did) -> Option<&StoredIdentifier> {
        self.by_did.get(did).map(|&i| &self.entries[i])
    }

    /// The locally held keypair for `did`, if this agent controls it.
    pub fn keypair(&self, did: &Did) -> Result<KeyPair> {
        let hex = self
            .get(did)
            .and_then(|e| e.private_key_hex.as_deref())
            .ok_or_else(|| Error::NoSigningKey(did.to_string()))?;
        let pair = KeyPair::from_private_hex(hex)?;
        if Some(pair.public_compressed()) != did.compressed_key() {
            return Err(Error::MalformedKey(format!("stored key does not match {did}")));
        }
        Ok(pair)
    }

    pub fn documents(&self) -> impl Iterator<Item = &DidDocument> {
        self.entries.iter().map(|e| &e.document)
    }

    pub fn rows(&self) -> Vec<IdentifierRow> {
        self.documents().map(DidDocument::row).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl DidResolver for IdentifierStore {
    fn resolve(&self, did: &Did) -> Result<ResolvedDid> {
        let entry = self.get(did).ok_or_else(|| Error::NotFound(did.to_string()))?;
        Ok(ResolvedDid {
            document: entry.document.clone(),
            verifiable: did.provider().is_ethr(),
        })
    }
}
