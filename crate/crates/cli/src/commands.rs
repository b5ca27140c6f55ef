use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use credfolio_core::agent::LEDGER_FILE;
use credfolio_core::credential::{CredentialFilter, PROOF_TYPE};
use credfolio_core::identity::KMS_LOCAL;
use credfolio_core::ledger::audit_file;
use credfolio_core::{
    relative_age, Agent, AgentConfig, Claim, Digest32, Did, ExportBundle, IssueRequest, Provider, RegistrationProof,
    Timestamp, VerifiableCredential, VerifiablePresentation, VerificationResult,
};

use crate::args::{Cli, Command, CredentialCommand, DidCommand, IssueArgs, LedgerCommand, MessageCommand, PresentationCommand, Section};
use crate::prompt::{Prompter, UsageError};
use crate::render::table;

pub struct Session<'a, O, R, W> {
    pub json: bool,
    pub config: AgentConfig,
    pub out: &'a mut O,
    pub prompt: &'a mut Prompter<R, W>,
}

/// Runs one command and returns the process exit status.
pub fn run<O: Write, R: BufRead, W: Write>(cli: Cli, out: &mut O, prompt: &mut Prompter<R, W>) -> Result<i32> {
    let config = match cli.data_dir {
        Some(dir) => AgentConfig::new(dir),
        None => AgentConfig::from_env()?,
    };
    let mut cx = Session {
        json: cli.json,
        config,
        out,
        prompt,
    };
    match cli.command {
        Command::Did(cmd) => cx.did(cmd),
        Command::Credential(cmd) => cx.credential(cmd),
        Command::Presentation(cmd) => cx.presentation(cmd),
        Command::Explore { section } => cx.explore(section),
        Command::Ledger(cmd) => cx.ledger(cmd),
        Command::Message(cmd) => cx.message(cmd),
        Command::Export { owner, out } => {
            let agent = cx.open()?;
            let bundle = agent.export_bundle(&parse_did(&owner)?)?;
            cx.write_document(&bundle, out.as_deref())?;
            Ok(0)
        }
        Command::Import { file } => {
            let bundle: ExportBundle = read_json(&file)?;
            let mut agent = cx.open()?;
            let report = agent.import_bundle(&bundle)?;
            if cx.json {
                cx.emit_json(&report)?;
            } else {
                writeln!(
                    cx.out,
                    "imported {}, already present {}, rejected {}",
                    report.imported,
                    report.already_present,
                    report.rejected.len()
                )?;
                for item in &report.rejected {
                    writeln!(cx.out, "rejected {} {}: {}", item.kind, item.id, item.reasons.join("; "))?;
                }
            }
            Ok(0)
        }
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn parse_did(s: &str) -> Result<Did> {
    Did::parse(s.trim()).map_err(|e| usage(e.to_string()))
}

/// Accepts 64 hex digits in either case, with or without `0x`.
fn parse_digest(s: &str) -> Result<Digest32> {
    let s = s.trim();
    let bare = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).unwrap_or(s);
    Digest32::from_hex(&format!("0x{}", bare.to_ascii_lowercase())).map_err(|e| usage(e.to_string()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect()
}

impl<O: Write, R: BufRead, W: Write> Session<'_, O, R, W> {
    fn open(&self) -> Result<Agent> {
        Agent::open(self.config.clone()).with_context(|| format!("opening agent at {}", self.config.data_dir.display()))
    }

    fn emit_json<T: Serialize + ?Sized>(&mut self, value: &T) -> Result<()> {
        serde_json::to_writer_pretty(&mut *self.out, value)?;
        writeln!(self.out)?;
        Ok(())
    }

    fn write_document<T: Serialize>(&mut self, value: &T, path: Option<&Path>) -> Result<()> {
        match path {
            None => self.emit_json(value),
            Some(path) => {
                let mut text = serde_json::to_string_pretty(value)?;
                text.push('\n');
                fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
                writeln!(self.out, "wrote {}", path.display())?;
                Ok(())
            }
        }
    }

    fn report(&mut self, result: &VerificationResult) -> Result<i32> {
        if self.json {
            self.emit_json(result)?;
        } else if result.valid {
            writeln!(self.out, "valid")?;
        } else {
            let reasons: Vec<String> = result.reasons.iter().map(ToString::to_string).collect();
            writeln!(self.out, "invalid: {}", reasons.join(", "))?;
        }
        Ok(if result.valid { 0 } else { 1 })
    }

    /// Picks a managed identifier by menu number, or takes a typed DID.
    fn choose_did(&mut self, agent: &Agent, question: &str, signing_only: bool) -> Result<Did> {
        let candidates: Vec<&Did> = agent
            .identifiers()
            .documents()
            .filter(|d| !signing_only || agent.identifiers().keypair(&d.did).is_ok())
            .map(|d| &d.did)
            .collect();
        let labels: Vec<String> = candidates
            .iter()
            .map(|did| {
                let alias = agent.identifiers().get(did).map(|e| e.document.alias.as_str()).unwrap_or_default();
                format!("{did} ({alias})")
            })
            .collect();
        match self.prompt.select_or_enter(question, &labels)? {
            Ok(i) => Ok(candidates[i].clone()),
            Err(typed) => parse_did(&typed),
        }
    }

    // ---- did ----

    fn did(&mut self, cmd: DidCommand) -> Result<i32> {
        match cmd {
            DidCommand::Create {
                provider,
                kms,
                alias,
                name,
            } => {
                let provider = match provider {
                    Some(p) => p.parse::<Provider>().map_err(|e| usage(e.to_string()))?,
                    None => {
                        let options: Vec<String> = Provider::ALL.iter().map(|p| p.to_string()).collect();
                        Provider::ALL[self.prompt.select("Select identifier provider", &options)?]
                    }
                };
                let kms = match kms {
                    Some(k) => k,
                    None => {
                        let options = vec![KMS_LOCAL.to_string()];
                        options[self.prompt.select("Select key management system", &options)?].clone()
                    }
                };
                let alias = match alias {
                    Some(a) => a,
                    None => self.prompt.required("Enter alias:")?,
                };
                let name = match (provider, name) {
                    (Provider::Web, None) => Some(self.prompt.required("Enter web name:")?),
                    (_, name) => name,
                };
                let mut agent = self.open()?;
                let document = agent.create_identifier(&alias, provider, &kms, name.as_deref())?;
                if self.json {
                    self.emit_json(&document)?;
                } else {
                    let row = document.row();
                    let rows = [vec![row.provider, row.alias, row.did.to_string()]];
                    write!(self.out, "{}", table(&["provider", "alias", "did"], &rows))?;
                }
                Ok(0)
            }
            DidCommand::List => self.explore(Some(Section::Identifiers)),
            DidCommand::Resolve { did } => {
                let agent = self.open()?;
                let resolved = agent.resolve_did(&parse_did(&did)?)?;
                self.emit_json(&resolved)?;
                Ok(0)
            }
            DidCommand::Export { did, out } => {
                let agent = self.open()?;
                let proof = agent.registration_proof(&parse_did(&did)?)?;
                self.write_document(&proof, out.as_deref())?;
                Ok(0)
            }
            DidCommand::Import { file } => {
                let proof: RegistrationProof = read_json(&file)?;
                let mut agent = self.open()?;
                let document = agent.import_registration(&proof)?;
                if self.json {
                    self.emit_json(&document)?;
                } else {
                    writeln!(self.out, "registered {} ({})", document.did, document.alias)?;
                }
                Ok(0)
            }
        }
    }

    // ---- credentials ----

    fn credential(&mut self, cmd: CredentialCommand) -> Result<i32> {
        match cmd {
            CredentialCommand::Create(args) => self.issue(args),
            CredentialCommand::Verify { id, file } => {
                let agent = self.open()?;
                let vc: VerifiableCredential = match (id, file) {
                    (_, Some(path)) => read_json(&path)?,
                    (Some(id), None) => {
                        let id = parse_digest(&id)?;
                        agent.credential(&id).cloned().with_context(|| format!("no credential {id}"))?
                    }
                    (None, None) => return Err(usage("a credential id or --file is required")),
                };
                let result = agent.verify_credential(&vc)?;
                self.report(&result)
            }
            CredentialCommand::Revoke { id, caller } => {
                let mut agent = self.open()?;
                let id = parse_digest(&id)?;
                let caller = match caller {
                    Some(c) => parse_did(&c)?,
                    None => agent
                        .credential(&id)
                        .map(|vc| vc.body.issuer.clone())
                        .with_context(|| format!("no credential {id}"))?,
                };
                let record = agent.revoke_credential(&caller, &id)?;
                if self.json {
                    self.emit_json(&record)?;
                } else {
                    writeln!(self.out, "revoked {} in block {}", record.credential_id, record.block_index)?;
                }
                Ok(0)
            }
            CredentialCommand::List { from, to, type_contains } => {
                let filter = CredentialFilter {
                    from: from.as_deref().map(parse_did).transpose()?,
                    to: to.as_deref().map(parse_did).transpose()?,
                    type_contains,
                };
                let agent = self.open()?;
                self.credential_table(&agent, &filter)
            }
            CredentialCommand::Show { id } => {
                let agent = self.open()?;
                let id = parse_digest(&id)?;
                let vc = agent.credential(&id).with_context(|| format!("no credential {id}"))?;
                self.emit_json(vc)?;
                Ok(0)
            }
        }
    }

    fn issue(&mut self, args: IssueArgs) -> Result<i32> {
        let mut agent = self.open()?;
        let interactive = !args.complete();

        let proof_format = match args.proof_format {
            Some(f) => f,
            None if interactive => {
                let options = vec![PROOF_TYPE.to_string()];
                options[self.prompt.select("Credential proofFormat", &options)?].clone()
            }
            None => PROOF_TYPE.to_string(),
        };
        if proof_format != PROOF_TYPE {
            return Err(usage(format!("unsupported proof format {proof_format}; only {PROOF_TYPE}")));
        }
        let issuer = match args.issuer {
            Some(d) => parse_did(&d)?,
            None => self.choose_did(&agent, "Issuer DID", true)?,
        };
        let subject = match args.subject {
            Some(d) => parse_did(&d)?,
            None => self.choose_did(&agent, "Subject DID", false)?,
        };
        let extra_types = if args.types.is_empty() && interactive {
            split_list(&self.prompt.text("Credential Type (comma separated):")?)
        } else {
            args.types
        };
        let claim_type = match args.claim_type {
            Some(t) => t,
            None => self.prompt.required("Claim Type:")?,
        };
        let claim_value = match args.claim_value {
            Some(v) => v,
            None => self.prompt.text("Claim Value:")?,
        };
        let revocable = args.revocable || (interactive && self.prompt.confirm("Is the credential revocable?", false)?);

        let vc = agent.issue_credential(IssueRequest {
            issuer,
            subject,
            extra_types,
            claims: vec![Claim::new(claim_type, claim_value)],
            revocable,
        })?;
        if self.json {
            self.emit_json(&vc)?;
        } else {
            let row = vc.row();
            let rows = [vec![row.created.to_string(), row.type_label, row.from, row.to]];
            write!(self.out, "{}", table(&["Created", "Type", "From", "To"], &rows))?;
            writeln!(self.out, "id: {}", vc.id())?;
        }
        Ok(0)
    }

    fn credential_table(&mut self, agent: &Agent, filter: &CredentialFilter) -> Result<i32> {
        let rows = agent.list_credentials(filter);
        if self.json {
            self.emit_json(&rows)?;
        } else {
            let now = Timestamp::now();
            let cells: Vec<Vec<String>> = rows
                .into_iter()
                .map(|r| vec![relative_age(r.created, now), r.type_label, r.from, r.to])
                .collect();
            write!(self.out, "{}", table(&["Created", "Type", "From", "To"], &cells))?;
        }
        Ok(0)
    }

    // ---- presentations ----

    fn presentation(&mut self, cmd: PresentationCommand) -> Result<i32> {
        match cmd {
            PresentationCommand::Create {
                holder,
                tag,
                credentials,
                verifiers,
            } => {
                let mut agent = self.open()?;
                let holder = match holder {
                    Some(d) => parse_did(&d)?,
                    None => self.choose_did(&agent, "Holder DID", true)?,
                };
                let tag = match tag {
                    Some(t) => t,
                    None => self.prompt.required("Tag:")?,
                };
                let interactive = credentials.is_empty();
                let ids = if interactive {
                    self.choose_credentials(&agent, &holder)?
                } else {
                    credentials.iter().map(|c| parse_digest(c)).collect::<Result<Vec<_>>>()?
                };
                let verifiers = if verifiers.is_empty() && interactive {
                    split_list(&self.prompt.text("Verifier DIDs (comma separated, empty for none):")?)
                } else {
                    verifiers
                };
                let verifier = if verifiers.is_empty() {
                    None
                } else {
                    Some(verifiers.iter().map(|v| parse_did(v)).collect::<Result<Vec<_>>>()?)
                };
                let vp = agent.create_presentation(&holder, &tag, &ids, verifier)?;
                if self.json {
                    self.emit_json(&vp)?;
                } else {
                    let row = vp.row();
                    let rows = [vec![row.created.to_string(), row.type_label, row.holder, row.verifier]];
                    write!(self.out, "{}", table(&["Created", "Type", "Holder", "Verifier"], &rows))?;
                    writeln!(self.out, "hash: {}", hex_bare(&vp.hash))?;
                }
                Ok(0)
            }
            PresentationCommand::Verify { hash, file } => {
                let agent = self.open()?;
                let vp: VerifiablePresentation = match (hash, file) {
                    (_, Some(path)) => read_json(&path)?,
                    (Some(hash), None) => {
                        let hash = parse_digest(&hash)?;
                        agent
                            .presentation(&hash)
                            .cloned()
                            .with_context(|| format!("no presentation {}", hex_bare(&hash)))?
                    }
                    (None, None) => return Err(usage("a presentation hash or --file is required")),
                };
                let result = agent.verify_presentation(&vp)?;
                self.report(&result)
            }
            PresentationCommand::List => self.explore(Some(Section::Presentations)),
            PresentationCommand::Show { hash } => {
                let agent = self.open()?;
                let hash = parse_digest(&hash)?;
                let vp = agent
                    .presentation(&hash)
                    .with_context(|| format!("no presentation {}", hex_bare(&hash)))?;
                self.emit_json(vp)?;
                Ok(0)
            }
        }
    }

    fn choose_credentials(&mut self, agent: &Agent, holder: &Did) -> Result<Vec<Digest32>> {
        let owned: Vec<&VerifiableCredential> = agent.credentials().iter().filter(|vc| vc.body.subject == *holder).collect();
        if owned.is_empty() {
            return Err(usage(format!("{holder} holds no credentials")));
        }
        let labels: Vec<String> = owned
            .iter()
            .map(|vc| {
                let row = vc.row();
                format!("{}  {}  from {}", row.id, row.type_label, row.from)
            })
            .collect();
        let answer = {
            let mut prompt_text = String::from("Credentials to include (numbers or ids, comma separated):");
            for (i, label) in labels.iter().enumerate() {
                prompt_text.push_str(&format!("\n  {}) {label}", i + 1));
            }
            prompt_text.push('\n');
            self.prompt.required(&prompt_text)?
        };
        split_list(&answer)
            .iter()
            .map(|item| match item.parse::<usize>() {
                Ok(n) if (1..=owned.len()).contains(&n) => Ok(owned[n - 1].id()),
                Ok(n) => Err(usage(format!("no credential numbered {n}"))),
                Err(_) => parse_digest(item),
            })
            .collect()
    }

    // ---- explore ----

    fn explore(&mut self, section: Option<Section>) -> Result<i32> {
        let section = match section {
            Some(s) => s,
            None => {
                let options: Vec<String> = Section::ALL.iter().map(|s| s.title().to_string()).collect();
                Section::ALL[self.prompt.select("Select a feature", &options)?]
            }
        };
        let agent = self.open()?;
        match section {
            Section::Identifiers => {
                let rows = agent.list_identifiers();
                if self.json {
                    self.emit_json(&rows)?;
                } else {
                    let cells: Vec<Vec<String>> = rows.into_iter().map(|r| vec![r.did.to_string(), r.alias]).collect();
                    write!(self.out, "{}", table(&["DID", "Alias"], &cells))?;
                }
            }
            Section::Messages => return self.message_table(&agent, None),
            Section::Credentials => return self.credential_table(&agent, &CredentialFilter::default()),
            Section::Presentations => {
                let rows = agent.list_presentations();
                if self.json {
                    self.emit_json(&rows)?;
                } else {
                    let now = Timestamp::now();
                    let cells: Vec<Vec<String>> = rows
                        .into_iter()
                        .map(|r| vec![relative_age(r.created, now), r.type_label, r.holder, r.verifier])
                        .collect();
                    write!(self.out, "{}", table(&["Created", "Type", "Holder", "Verifier"], &cells))?;
                }
            }
        }
        Ok(0)
    }

    // ---- ledger ----

    fn ledger(&mut self, cmd: LedgerCommand) -> Result<i32> {
        match cmd {
            LedgerCommand::Verify => {
                let path = self.config.data_dir.join(LEDGER_FILE);
                if path.exists() {
                    if let Err(fault) = audit_file(&path)? {
                        if self.json {
                            self.emit_json(&serde_json::json!({
                                "ok": false,
                                "block": fault.block,
                                "reason": fault.reason,
                            }))?;
                        } else {
                            writeln!(self.out, "TAMPER DETECTED at block {}", fault.block)?;
                            eprintln!("{}", fault.reason);
                        }
                        return Ok(1);
                    }
                }
                let agent = self.open()?;
                let mismatches = agent.store_mismatches();
                if self.json {
                    self.emit_json(&serde_json::json!({
                        "ok": mismatches.is_empty(),
                        "blocks": agent.ledger().len(),
                        "storeMismatches": mismatches,
                    }))?;
                } else if mismatches.is_empty() {
                    writeln!(self.out, "OK")?;
                } else {
                    writeln!(self.out, "STORE MISMATCH")?;
                    for m in &mismatches {
                        writeln!(self.out, "  {m}")?;
                    }
                }
                Ok(if mismatches.is_empty() { 0 } else { 1 })
            }
            LedgerCommand::Show { tail } => {
                let agent = self.open()?;
                let blocks = agent.ledger().blocks();
                let skip = tail.map_or(0, |n| blocks.len().saturating_sub(n));
                let blocks = &blocks[skip..];
                if self.json {
                    self.emit_json(blocks)?;
                } else {
                    let cells: Vec<Vec<String>> = blocks
                        .iter()
                        .map(|b| {
                            let kinds: Vec<String> = b.records.iter().map(|r| r.kind.to_string()).collect();
                            vec![b.index.to_string(), b.timestamp.to_string(), kinds.join(", "), b.block_hash.to_string()]
                        })
                        .collect();
                    write!(self.out, "{}", table(&["Index", "Timestamp", "Records", "Hash"], &cells))?;
                }
                Ok(0)
            }
        }
    }

    // ---- messages ----

    fn message(&mut self, cmd: MessageCommand) -> Result<i32> {
        match cmd {
            MessageCommand::Send { from, to, body } => {
                let (from, to) = (parse_did(&from)?, parse_did(&to)?);
                let mut agent = self.open()?;
                let message = agent.send_message(&from, &to, &body)?;
                if self.json {
                    self.emit_json(&message)?;
                } else {
                    writeln!(self.out, "sent {} -> {} at {}", message.from, message.to, message.timestamp)?;
                }
                Ok(0)
            }
            MessageCommand::List { did } => {
                let did = did.as_deref().map(parse_did).transpose()?;
                let agent = self.open()?;
                self.message_table(&agent, did.as_ref())
            }
        }
    }

    fn message_table(&mut self, agent: &Agent, did: Option<&Did>) -> Result<i32> {
        let views = match did {
            Some(did) => agent.list_messages(did),
            None => agent.all_messages(),
        };
        if self.json {
            self.emit_json(&views)?;
        } else {
            let cells: Vec<Vec<String>> = views
                .into_iter()
                .map(|v| {
                    let m = v.message;
                    let status = if v.verified { "verified" } else { "INVALID" };
                    vec![m.timestamp.to_string(), m.from.abbreviated(), m.to.abbreviated(), status.to_string(), m.body]
                })
                .collect();
            write!(self.out, "{}", table(&["Created", "From", "To", "Status", "Body"], &cells))?;
        }
        Ok(0)
    }
}

fn hex_bare(d: &Digest32) -> String {
    d.to_hex()[2..].to_string()
}
