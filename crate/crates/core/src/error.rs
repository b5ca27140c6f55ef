use std::path::PathBuf;

/// Errors produced by every layer of the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid entropy: scalar must be in [1, n-1]")]
    InvalidEntropy,
    #[error("malformed key: {0}")]
    MalformedKey(String),
    #[error("malformed signature: {0}")]
    MalformedSignature(String),
    #[error("malformed hex: {0}")]
    MalformedHex(String),
    #[error("malformed timestamp: {0}")]
    MalformedTimestamp(String),
    #[error("unsupported value in signed payload: {0}")]
    UnsupportedValue(String),

    #[error("unsupported provider `{0}`")]
    UnsupportedProvider(String),
    #[error("malformed DID `{0}`")]
    MalformedDid(String),
    #[error("did:web identifiers need a name")]
    MissingName,
    #[error("alias must not be empty")]
    EmptyAlias,
    #[error("unsupported key management system `{0}`")]
    UnsupportedKms(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("DID `{0}` is already registered")]
    AlreadyRegistered(String),
    #[error("no signing key for `{0}`")]
    NoSigningKey(String),

    #[error("unknown subject `{0}`")]
    UnknownSubject(String),
    #[error("credential must carry at least one claim")]
    EmptyClaims,
    #[error("credential must carry at least one type besides VerifiableCredential")]
    EmptyTypes,
    #[error("claim type must not be empty")]
    EmptyClaimType,
    #[error("malformed credential: {0}")]
    MalformedCredential(String),
    #[error("credential {0} is not revocable")]
    NotRevocable(String),
    #[error("`{caller}` is not the issuer of credential {credential}")]
    NotIssuer { caller: String, credential: String },
    #[error("credential {0} is already revoked")]
    AlreadyRevoked(String),

    #[error("a presentation needs at least one credential")]
    EmptyPortfolio,
    #[error("malformed presentation: {0}")]
    MalformedPresentation(String),

    #[error("corrupt ledger at block {block}: {reason}")]
    CorruptLedger { block: u64, reason: String },
    #[error("a block needs at least one record")]
    EmptyBlock,
    #[error("invalid ledger record: {0}")]
    InvalidRecord(String),

    #[error("unknown recipient `{0}`")]
    UnknownRecipient(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("no data directory could be determined; set {0}")]
    NoDataDir(&'static str),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
