use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "credfolio", version, about = "Decentralized identifiers and verifiable credential portfolios")]
pub struct Cli {
    /// Print machine-readable JSON instead of tables.
    #[arg(long, global = true)]
    pub json: bool,

    /// Agent data directory.
    #[arg(long, global = true, env = "CREDFOLIO_HOME", value_name = "DIR")]
    pub data_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Manage decentralized identifiers.
    #[command(subcommand)]
    Did(DidCommand),
    /// Issue, verify, revoke and list credentials.
    #[command(subcommand)]
    Credential(CredentialCommand),
    /// Bundle credentials into holder-signed presentations.
    #[command(subcommand)]
    Presentation(PresentationCommand),
    /// Browse identifiers, messages, credentials or presentations.
    Explore {
        section: Option<Section>,
    },
    /// Inspect the local ledger.
    #[command(subcommand)]
    Ledger(LedgerCommand),
    /// Signed messages between identifiers.
    #[command(subcommand)]
    Message(MessageCommand),
    /// Write every credential and presentation owned by a DID to a bundle.
    Export {
        owner: String,
        /// Output file; stdout when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Import a bundle produced by `export`.
    Import { file: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Section {
    Identifiers,
    Messages,
    Credentials,
    Presentations,
}

impl Section {
    pub const ALL: [Section; 4] = [
        Section::Identifiers,
        Section::Messages,
        Section::Credentials,
        Section::Presentations,
    ];

    pub fn title(self) -> &'static str {
        match self {
            Section::Identifiers => "Managed identifiers",
            Section::Messages => "Messages",
            Section::Credentials => "Credentials",
            Section::Presentations => "Presentations",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum DidCommand {
    /// Create an identifier; prompts for anything not given as a flag.
    Create {
        #[arg(long)]
        provider: Option<String>,
        #[arg(long)]
        kms: Option<String>,
        #[arg(long)]
        alias: Option<String>,
        /// Name part of a did:web identifier.
        #[arg(long)]
        name: Option<String>,
    },
    /// List managed identifiers.
    List,
    /// Show the DID document for an identifier.
    Resolve { did: String },
    /// Write the registration proof of an identifier, for replay elsewhere.
    Export {
        did: String,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Replay a registration proof written by `did export`.
    Import { file: PathBuf },
}

#[derive(Debug, Args)]
pub struct IssueArgs {
    #[arg(long)]
    pub proof_format: Option<String>,
    #[arg(long)]
    pub issuer: Option<String>,
    #[arg(long)]
    pub subject: Option<String>,
    /// Extra credential type; repeat for several.
    #[arg(long = "type", value_name = "TYPE")]
    pub types: Vec<String>,
    #[arg(long)]
    pub claim_type: Option<String>,
    #[arg(long)]
    pub claim_value: Option<String>,
    #[arg(long)]
    pub revocable: bool,
}

impl IssueArgs {
    /// True when every required field came from flags.
    pub fn complete(&self) -> bool {
        self.issuer.is_some() && self.subject.is_some() && self.claim_type.is_some() && self.claim_value.is_some()
    }
}

#[derive(Debug, Subcommand)]
pub enum CredentialCommand {
    /// Issue a credential; prompts when required flags are missing.
    Create(IssueArgs),
    /// Verify a stored credential by id, or one read from a file.
    Verify {
        #[arg(required_unless_present = "file", conflicts_with = "file")]
        id: Option<String>,
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Revoke a revocable credential.
    Revoke {
        id: String,
        /// Identifier performing the revocation; defaults to the issuer.
        #[arg(long = "as", value_name = "DID")]
        caller: Option<String>,
    },
    /// List stored credentials.
    List {
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: Option<String>,
        #[arg(long = "type", value_name = "TEXT")]
        type_contains: Option<String>,
    },
    /// Print a stored credential.
    Show { id: String },
}

#[derive(Debug, Subcommand)]
pub enum PresentationCommand {
    /// Bundle stored credentials into a presentation signed by the holder.
    Create {
        #[arg(long)]
        holder: Option<String>,
        #[arg(long)]
        tag: Option<String>,
        /// Credential id; repeat for several.
        #[arg(long = "credential", value_name = "ID")]
        credentials: Vec<String>,
        /// Intended verifier; repeat for several.
        #[arg(long = "verifier", value_name = "DID")]
        verifiers: Vec<String>,
    },
    /// Verify a stored presentation by hash, or one read from a file.
    Verify {
        #[arg(required_unless_present = "file", conflicts_with = "file")]
        hash: Option<String>,
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// List stored presentations.
    List,
    /// Print a stored presentation.
    Show { hash: String },
}

#[derive(Debug, Subcommand)]
pub enum LedgerCommand {
    /// Check the hash chain, every record signature and the stores.
    Verify,
    /// Print ledger blocks.
    Show {
        /// Only the last N blocks.
        #[arg(long)]
        tail: Option<usize>,
    },
}

#[derive(Debug, Subcommand)]
pub enum MessageCommand {
    /// Sign and store a message.
    Send {
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long)]
        body: String,
    },
    /// Messages sent or received by a DID, or all of them.
    List { did: Option<String> },
}
