//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fail.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use credfolio_core::canonical::canonical_encode;
use credfolio_core::credential::CredentialFilter;
use credfolio_core::ledger::{audit_file, Chain};
use credfolio_core::{
    compress_public, credential_digest, decompress_public, derive_did, digest, generate_keypair, Agent, AgentConfig,
    Claim, CredentialBody, Did, Error, FailureReason, IssueRequest, LedgerRecord, Provider, RecordKind, Timestamp,
    VerifiableCredential, VerifiablePresentation,
};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde_json::{Map, Number, Value};

const CHILD_ENV: &str = "CREDFOLIO_ACCEPTANCE_CHILD";

type Outcome = Result<String, String>;
type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn check<T, E: std::fmt::Display>(r: Result<T, E>, what: &str) -> Result<T, String> {
    r.map_err(|e| format!("{what}: {e}"))
}

fn main() {
    if std::env::var(CHILD_ENV).as_deref() == Ok("determinism") {
        print!("{}", determinism_transcript());
        return;
    }

    let criteria: [Criterion; 8] = [
        ("listing replay", Some(Duration::from_secs(1)), listing_replay),
        ("DID derivation consistency", Some(Duration::from_secs(5)), did_derivation),
        ("credential tamper detection", Some(Duration::from_secs(30)), credential_tamper),
        ("ledger tamper detection", Some(Duration::from_secs(30)), ledger_tamper),
        ("revocation semantics", None, revocation_semantics),
        ("presentation soundness", None, presentation_soundness),
        ("determinism", None, determinism),
        ("portability", None, portability),
    ];

    let suite = Instant::now();
    let mut failed = 0;
    for (n, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let outcome = match (outcome, limit) {
            (Ok(_), Some(limit)) if took > *limit => Err(format!("took {took:.2?}, limit {limit:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("PASS  {}  {name} ({took:.2?}): {detail}", n + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  {}  {name} ({took:.2?}): {why}", n + 1);
            }
        }
    }
    let total = suite.elapsed();
    if total > Duration::from_secs(60) {
        failed += 1;
        println!("FAIL  suite runtime {total:.2?} exceeds 60s");
    }
    println!("{} of {} criteria passed in {total:.2?}", criteria.len() - failed.min(criteria.len()), criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn open(dir: &Path) -> Result<Agent, String> {
    check(Agent::open(AgentConfig::new(dir)), "open agent")
}

fn tempdir() -> tempfile::TempDir {
    tempfile::tempdir().expect("temp dir")
}

fn create(agent: &mut Agent, alias: &str, provider: Provider) -> Result<Did, String> {
    Ok(check(agent.create_identifier(alias, provider, "local", None), "create identifier")?.did)
}

fn python_course(issuer: &Did, subject: &Did, revocable: bool) -> IssueRequest {
    IssueRequest {
        issuer: issuer.clone(),
        subject: subject.clone(),
        extra_types: vec!["Python Course".into(), "Profile".into()],
        claims: vec![Claim::new("Mastery of Python Programming Language", "A+")],
        revocable,
    }
}

fn cli(dir: &Path, args: &[&str]) -> (i32, String, String) {
    let mut argv = vec!["credfolio", "--data-dir", dir.to_str().unwrap()];
    argv.extend_from_slice(args);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = credfolio_cli::dispatch(argv, &b""[..], &mut out, &mut err);
    (code, String::from_utf8_lossy(&out).into_owned(), String::from_utf8_lossy(&err).into_owned())
}

fn abbreviation_of(did: &str) -> String {
    let (prefix, hex) = did.rsplit_once(':').unwrap();
    format!("{prefix}:.{}", &hex[hex.len() - 4..])
}

// ---- 1 ----

fn listing_replay() -> Outcome {
    let dir = tempdir();
    let mut ids = Vec::new();
    for alias in ["Sarah Flanery", "Luke Skywalker"] {
        let (code, out, err) = cli(dir.path(), &["--json", "did", "create", "--provider", "did:ethr", "--kms", "local", "--alias", alias]);
        ensure!(code == 0, "did create {alias} exited {code}: {err}");
        let doc: Value = check(serde_json::from_str(&out), "did create output")?;
        ids.push(doc["did"].as_str().unwrap_or_default().to_string());
    }
    let (sarah, luke) = (&ids[0], &ids[1]);
    let (code, _, err) = cli(
        dir.path(),
        &[
            "credential", "create", "--proof-format", "EthereumEip712Signature2021", "--issuer", sarah, "--subject", luke,
            "--type", "Python Course", "--type", "Profile", "--claim-type", "Mastery of Python Programming Language",
            "--claim-value", "A+",
        ],
    );
    ensure!(code == 0, "credential create exited {code}: {err}");

    let (code, out, err) = cli(dir.path(), &["explore", "credentials"]);
    ensure!(code == 0, "explore exited {code}: {err}");
    let lines: Vec<&str> = out.lines().collect();
    ensure!(lines.len() == 3, "expected header, rule and one row, got {lines:?}");
    let cells: Vec<&str> = lines[2].split("  ").map(str::trim).filter(|c| !c.is_empty()).collect();
    ensure!(cells.len() == 4, "row has {} columns: {cells:?}", cells.len());
    let want = "VerifiableCredential,(Python Course, Profile)";
    ensure!(cells[1] == want, "Type column {:?}", cells[1]);
    ensure!(cells[2] == abbreviation_of(sarah), "From column {:?}", cells[2]);
    ensure!(cells[3] == abbreviation_of(luke), "To column {:?}", cells[3]);

    let agent = open(dir.path())?;
    let vc = agent.credentials().iter().next().ok_or("no stored credential")?.clone();
    let result = check(agent.verify_credential(&vc), "verify")?;
    ensure!(result.valid, "verification failed: {:?}", result.reasons);
    ensure!(!vc.body.revocable, "credential should not be revocable");
    Ok(format!("row `{}` | `{}` | `{}`, verifies", cells[1], cells[2], cells[3]))
}

// ---- 2 ----

fn did_derivation() -> Outcome {
    let dir = tempdir();
    let mut agent = open(dir.path())?;
    for i in 0..100 {
        let provider = if i % 2 == 0 { Provider::Ethr } else { Provider::EthrGoerli };
        let did = create(&mut agent, &format!("user {i}"), provider)?;
        let pair = check(agent.identifiers().keypair(&did), "keypair")?;

        let sk = check(libsecp256k1::SecretKey::parse(&pair.private_scalar()), "reference secret key")?;
        let reference = libsecp256k1::PublicKey::from_secret_key(&sk);
        ensure!(pair.public_uncompressed() == reference.serialize(), "uncompressed key differs from reference");
        ensure!(pair.public_compressed() == reference.serialize_compressed(), "compressed key differs from reference");
        let compressed = check(compress_public(&pair.public_uncompressed()), "compress")?;
        ensure!(compressed == reference.serialize_compressed(), "compress(uncompressed) differs from reference");

        let derived = check(derive_did(provider, &compressed), "derive")?;
        ensure!(derived == did, "derived {derived} but created {did}");
        let resolved = check(agent.resolve_did(&derived), "resolve")?;
        let controller = check(hex_decode(&resolved.document.controller_key_id), "controllerKeyId")?;
        let point = check(decompress_public(&compressed), "decompress")?;
        ensure!(controller == point, "controllerKeyId does not decompress to the same point");
    }

    let printed = concat!(
        "045f2c19148f0afb66ef9f3c7cc65464ba2d4e9339784d1a6a7239c059e1f75014",
        "9c8a5997fe2f713eb8d31db93b5b5e8716332fb17a9333643d3fd3f5748cbfc0"
    );
    let compressed = check(compress_public(&check(hex_decode(printed), "fixture")?), "compress fixture")?;
    let reference = check(libsecp256k1::PublicKey::parse_slice(&hex_decode(printed).unwrap(), None), "reference parse")?;
    ensure!(compressed == reference.serialize_compressed(), "fixture compression differs from reference");
    let did = check(derive_did(Provider::Ethr, &compressed), "derive fixture")?;
    let expected = "did:ethr:0x025f2c19148f0afb66ef9f3c7cc65464ba2d4e9339784d1a6a7239c059e1f75014";
    ensure!(did.to_string() == expected, "fixture DID {did}");
    Ok(format!("100 keys match libsecp256k1 and round-trip; fixture gives {expected}"))
}

fn hex_decode(s: &str) -> Result<Vec<u8>, String> {
    if !s.len().is_multiple_of(2) {
        return Err("odd length".into());
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).map_err(|e| e.to_string()))
        .collect()
}

fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

// ---- 3 ----

/// Byte ranges of the signed field values of the credential whose text
/// starts at `from` in a pretty-printed store file. String contents exclude
/// the quotes.
fn signed_value_spans(text: &str, from: usize) -> Option<(Vec<(usize, usize)>, usize)> {
    let start = from + text[from..].find("\"issuer\": ")?;
    let end = start + text[start..].find("\"proof\": ")?;
    let region = &text[start..end];
    let mut spans = Vec::new();
    let strings_after = |key: &str, spans: &mut Vec<(usize, usize)>| -> Option<()> {
        let at = region.find(&format!("\"{key}\": "))? + key.len() + 4;
        let rest = &region[at..];
        let stop = if rest.starts_with('[') { rest.find(']')? } else { rest.find('\n')? };
        let mut i = 0;
        let chunk = &rest[..stop];
        while let Some(open) = chunk[i..].find('"') {
            let a = i + open + 1;
            let b = a + chunk[a..].find('"')?;
            if b > a {
                spans.push((start + at + a, start + at + b));
            }
            i = b + 1;
        }
        Some(())
    };
    strings_after("issuer", &mut spans)?;
    strings_after("subject", &mut spans)?;
    strings_after("types", &mut spans)?;
    strings_after("issuanceDate", &mut spans)?;
    let mut search = 0;
    while let Some(p) = region[search..].find("\"claimType\": \"") {
        let a = search + p + "\"claimType\": \"".len();
        let b = a + region[a..].find('"')?;
        spans.push((start + a, start + b));
        let q = b + region[b..].find("\"claimValue\": \"")? + "\"claimValue\": \"".len();
        let r = q + region[q..].find('"')?;
        if r > q {
            spans.push((start + q, start + r));
        }
        search = r;
    }
    let rev = region.find("\"revocable\": ")? + "\"revocable\": ".len();
    let len = if region[rev..].starts_with("true") { 4 } else { 5 };
    spans.push((start + rev, start + rev + len));
    Some((spans, end))
}

fn credential_tamper() -> Outcome {
    let dir = tempdir();
    let mut agent = open(dir.path())?;
    let sarah = create(&mut agent, "Sarah Flanery", Provider::EthrGoerli)?;
    let luke = create(&mut agent, "Luke Skywalker", Provider::Ethr)?;
    let leia = create(&mut agent, "Leia", Provider::Ethr)?;
    let requests = [
        python_course(&sarah, &luke, false),
        python_course(&sarah, &leia, true),
        IssueRequest {
            extra_types: vec!["Profile".into()],
            claims: vec![Claim::new("role", "pilot"), Claim::new("rank", "commander")],
            ..python_course(&luke, &leia, false)
        },
        IssueRequest {
            extra_types: vec!["Rust Course".into()],
            ..python_course(&leia, &sarah, true)
        },
    ];
    for r in requests {
        check(agent.issue_credential(r), "issue")?;
    }
    let path = dir.path().join("credentials.json");
    let text = check(fs::read_to_string(&path), "read store")?;
    let mut per_credential = Vec::new();
    let mut from = 0;
    while let Some((spans, end)) = signed_value_spans(&text, from) {
        per_credential.push(spans);
        from = end;
    }
    ensure!(per_credential.len() == 4, "found {} credentials in the store text", per_credential.len());

    let original: Vec<VerifiableCredential> = check(serde_json::from_str(&text), "parse store")?;
    let mut rng = ChaCha20Rng::seed_from_u64(0x7a3e);
    let (mut unreadable, mut malformed, mut invalid, mut accepted) = (0, 0, 0, 0);
    let total = 2500;
    for _ in 0..total {
        let which = rng.gen_range(0..per_credential.len());
        let (a, b) = per_credential[which][rng.gen_range(0..per_credential[which].len())];
        let pos = rng.gen_range(a..b);
        let mut bytes = text.as_bytes().to_vec();
        let old = bytes[pos];
        // Printable ASCII other than the quote and backslash keeps the file readable.
        bytes[pos] = loop {
            let candidate = rng.gen_range(b' '..=b'~');
            if candidate != old && candidate != b'"' && candidate != b'\\' {
                break candidate;
            }
        };
        let Ok(loaded) = serde_json::from_slice::<Vec<VerifiableCredential>>(&bytes) else {
            unreadable += 1;
            continue;
        };
        let vc = &loaded[which];
        if *vc == original[which] {
            accepted += 1;
            continue;
        }
        match agent.verify_credential(vc) {
            Err(_) => malformed += 1,
            Ok(r) if !r.valid => invalid += 1,
            Ok(_) => accepted += 1,
        }
    }
    ensure!(accepted == 0, "{accepted} of {total} mutations were accepted");
    ensure!(invalid + malformed >= 1000, "only {} mutations reached verification", invalid + malformed);
    Ok(format!(
        "{total} mutations rejected: {invalid} invalid, {malformed} malformed, {unreadable} unreadable"
    ))
}

// ---- 4 ----

fn ledger_tamper() -> Outcome {
    let dir = tempdir();
    let path = dir.path().join("ledger.jsonl");
    let mut chain = check(Chain::init(&path), "init")?;
    let authors: Vec<_> = (0..4)
        .map(|_| {
            let pair = generate_keypair(None).unwrap();
            let did = derive_did(Provider::Ethr, &pair.public_compressed()).unwrap();
            (pair, did)
        })
        .collect();
    for (pair, did) in &authors {
        let record = LedgerRecord::signed(RecordKind::DidRegistration, digest(did.to_string().as_bytes()), did.clone(), pair);
        check(chain.append_block(vec![record]), "append registration")?;
    }
    let kinds = [RecordKind::CredentialIssued, RecordKind::PresentationCreated, RecordKind::Message, RecordKind::CredentialRevoked];
    let mut i = 0u32;
    while chain.len() < 100 {
        let (pair, did) = &authors[i as usize % authors.len()];
        let records = (0..1 + i % 3)
            .map(|j| LedgerRecord::signed(kinds[(i + j) as usize % kinds.len()], digest(&(i * 7 + j).to_be_bytes()), did.clone(), pair))
            .collect();
        check(chain.append_block(records), "append")?;
        i += 1;
    }
    ensure!(chain.verify_chain(), "pristine chain fails in memory");
    drop(chain);
    let pristine = check(fs::read(&path), "read ledger")?;
    ensure!(matches!(audit_file(&path), Ok(Ok(100))), "pristine 100-block chain does not verify");

    let line_starts: Vec<usize> = std::iter::once(0)
        .chain(pristine.iter().enumerate().filter(|(_, b)| **b == b'\n').map(|(i, _)| i + 1))
        .collect();
    let mut rng = ChaCha20Rng::seed_from_u64(0x1ed9);
    let mutations = 1500;
    let mut hit_blocks = HashSet::new();
    for _ in 0..mutations {
        let block = rng.gen_range(0..100);
        let pos = rng.gen_range(line_starts[block]..line_starts[block + 1] - 1);
        let mut bytes = pristine.clone();
        let old = bytes[pos];
        bytes[pos] = loop {
            let c = rng.gen::<u8>();
            if c != old {
                break c;
            }
        };
        check(fs::write(&path, &bytes), "write")?;
        match audit_file(&path) {
            Ok(Err(_)) => {}
            Ok(Ok(_)) => return Err(format!("mutation of byte {pos} in block {block} went unnoticed")),
            Err(e) => return Err(format!("audit error: {e}")),
        }
        ensure!(Chain::init(&path).is_err(), "opening accepted a mutated ledger");
        hit_blocks.insert(block);
    }

    let lines: Vec<&[u8]> = pristine.split(|b| *b == b'\n').filter(|l| !l.is_empty()).collect();
    for k in 0..lines.len() {
        let mut kept: Vec<u8> = Vec::new();
        for (j, line) in lines.iter().enumerate() {
            if j != k {
                kept.extend_from_slice(line);
                kept.push(b'\n');
            }
        }
        check(fs::write(&path, &kept), "write")?;
        match audit_file(&path) {
            Ok(Err(_)) => {}
            other => return Err(format!("deleting block {k} went unnoticed: {other:?}")),
        }
    }
    check(fs::write(&path, &pristine), "restore")?;
    ensure!(matches!(audit_file(&path), Ok(Ok(100))), "restored chain does not verify");
    Ok(format!(
        "{mutations} byte mutations over {} blocks and all 100 deletions detected",
        hit_blocks.len()
    ))
}

// ---- 5 ----

fn revocation_semantics() -> Outcome {
    let dir = tempdir();
    let (revocable_id, fixed_id) = {
        let mut agent = open(dir.path())?;
        let sarah = create(&mut agent, "Sarah Flanery", Provider::Ethr)?;
        let luke = create(&mut agent, "Luke Skywalker", Provider::Ethr)?;
        let revocable = check(agent.issue_credential(python_course(&sarah, &luke, true)), "issue")?;
        let fixed = check(agent.issue_credential(python_course(&sarah, &luke, false)), "issue")?;
        ensure!(check(agent.verify_credential(&revocable), "verify")?.valid, "fresh revocable credential invalid");
        check(agent.revoke_credential(&sarah, &revocable.id()), "revoke")?;
        let after = check(agent.verify_credential(&revocable), "verify")?;
        ensure!(after.reasons == vec![FailureReason::Revoked], "after revocation: {:?}", after.reasons);
        match agent.revoke_credential(&sarah, &fixed.id()) {
            Err(Error::NotRevocable(_)) => {}
            other => return Err(format!("revoking a non-revocable credential gave {other:?}")),
        }
        (revocable.id(), fixed.id())
    };
    let agent = open(dir.path())?;
    let revoked = agent.credential(&revocable_id).ok_or("revoked credential missing after restart")?;
    let result = check(agent.verify_credential(revoked), "verify")?;
    ensure!(result.reasons == vec![FailureReason::Revoked], "after restart: {:?}", result.reasons);
    let fixed = agent.credential(&fixed_id).ok_or("credential missing after restart")?;
    ensure!(check(agent.verify_credential(fixed), "verify")?.valid, "non-revocable credential invalid after restart");
    Ok("valid, then revoked; non-revocable refused; revocation survives restart".into())
}

// ---- 6 ----

fn presentation_soundness() -> Outcome {
    let dir = tempdir();
    let mut agent = open(dir.path())?;
    let sarah = create(&mut agent, "Sarah Flanery", Provider::Ethr)?;
    let luke = create(&mut agent, "Luke Skywalker", Provider::Ethr)?;
    let verifier = create(&mut agent, "Verifier", Provider::EthrGoerli)?;
    let a = check(agent.issue_credential(python_course(&sarah, &luke, false)), "issue")?;
    let b = check(
        agent.issue_credential(IssueRequest {
            extra_types: vec!["Profile".into()],
            ..python_course(&sarah, &luke, true)
        }),
        "issue",
    )?;
    let vp = check(
        agent.create_presentation(&luke, "xyz123", &[a.id(), b.id()], Some(vec![verifier])),
        "create presentation",
    )?;
    ensure!(check(agent.verify_presentation(&vp), "verify")?.valid, "fresh presentation invalid");

    let invalid = |vp: &VerifiablePresentation| -> Result<bool, String> {
        Ok(match agent.verify_presentation(vp) {
            Ok(r) => !r.valid,
            Err(_) => true,
        })
    };
    let tree = check(serde_json::to_value(&vp), "serialize")?;
    for index in 0..2 {
        let mut t = tree.clone();
        let claim = &mut t["verifiablePresentation"]["verifiableCredential"][index]["claims"][0]["claimValue"];
        *claim = Value::String(format!("{}!", claim.as_str().unwrap_or_default()));
        let tampered: VerifiablePresentation = check(serde_json::from_value(t), "reparse")?;
        ensure!(invalid(&tampered)?, "replacing credential {index} went unnoticed");
    }
    let mut t = tree.clone();
    t["verifiablePresentation"]["tag"] = Value::String("xyz124".into());
    ensure!(invalid(&check(serde_json::from_value(t), "reparse")?)?, "changing the tag went unnoticed");

    let mut t = tree.clone();
    let proof = t["verifiablePresentation"]["proof"]["proofValue"].as_str().unwrap_or_default().to_string();
    let flipped = format!("{}{}", &proof[..10], if &proof[10..11] == "0" { "1" } else { "0" }) + &proof[11..];
    t["verifiablePresentation"]["proof"]["proofValue"] = Value::String(flipped);
    ensure!(invalid(&check(serde_json::from_value(t), "reparse")?)?, "altering the holder proof went unnoticed");

    check(agent.revoke_credential(&sarah, &b.id()), "revoke")?;
    let r = check(agent.verify_presentation(&vp), "verify")?;
    ensure!(!r.valid, "presentation with a revoked credential verified");
    ensure!(
        r.reasons.iter().any(|x| matches!(x, FailureReason::Constituent { index: 1, reason } if **reason == FailureReason::Revoked)),
        "reasons {:?}",
        r.reasons
    );
    Ok("verifies; credential swaps, tag, proof and revoked constituent all rejected".into())
}

// ---- 7 ----

fn random_string(rng: &mut ChaCha20Rng) -> String {
    const POOL: &[char] = &[
        'a', 'Z', '0', ' ', '"', '\\', '/', '\u{0}', '\u{8}', '\n', '\t', '\u{1f}', '\u{7f}', 'é', '\u{2028}', '€', '😀', 'ß',
    ];
    let len = rng.gen_range(0..8);
    (0..len).map(|_| POOL[rng.gen_range(0..POOL.len())]).collect()
}

fn random_tree(rng: &mut ChaCha20Rng, depth: u32) -> Value {
    let kinds = if depth == 0 { 5 } else { 7 };
    match rng.gen_range(0..kinds) {
        0 => Value::Null,
        1 => Value::Bool(rng.gen()),
        2 => Value::Number(Number::from(rng.gen::<i64>() >> rng.gen_range(0..63))),
        3 | 4 => Value::String(random_string(rng)),
        5 => Value::Array((0..rng.gen_range(0..4)).map(|_| random_tree(rng, depth - 1)).collect()),
        _ => {
            let mut map = Map::new();
            for _ in 0..rng.gen_range(0..5) {
                map.insert(random_string(rng), random_tree(rng, depth - 1));
            }
            Value::Object(map)
        }
    }
}

fn random_body(rng: &mut ChaCha20Rng) -> CredentialBody {
    let mut did = || {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        seed[0] &= 0x7f;
        seed[31] |= 1;
        let pair = generate_keypair(Some(seed)).unwrap();
        derive_did(Provider::Ethr, &pair.public_compressed()).unwrap()
    };
    let (issuer, subject) = (did(), did());
    let types: Vec<String> = (0..rng.gen_range(1..4)).map(|_| random_string(rng)).collect();
    let claims = (0..rng.gen_range(1..3))
        .map(|_| Claim::new(format!("k{}", random_string(rng)), random_string(rng)))
        .collect();
    CredentialBody::new(issuer, subject, &types, claims, rng.gen(), Timestamp::from_millis(rng.gen_range(0..4_102_444_800_000)))
        .unwrap()
}

/// 100 canonical encodings and 100 credential digests from a fixed seed.
fn determinism_transcript() -> String {
    let mut rng = ChaCha20Rng::seed_from_u64(0xde7e);
    let mut out = String::new();
    for _ in 0..100 {
        let tree = random_tree(&mut rng, 4);
        let bytes = canonical_encode(&tree).expect("integer-only tree");
        let body = random_body(&mut rng);
        out.push_str(&format!("{} {}\n", to_hex(&bytes), credential_digest(&body)));
    }
    out
}

fn determinism() -> Outcome {
    let exe = check(std::env::current_exe(), "current exe")?;
    let mut transcripts = Vec::new();
    for _ in 0..2 {
        let output = check(Command::new(&exe).env(CHILD_ENV, "determinism").output(), "spawn child")?;
        ensure!(output.status.success(), "child failed: {}", String::from_utf8_lossy(&output.stderr));
        transcripts.push(output.stdout);
    }
    ensure!(transcripts[0] == transcripts[1], "two processes produced different bytes");
    ensure!(transcripts[0] == determinism_transcript().into_bytes(), "child output differs from this process");
    ensure!(transcripts[0].iter().filter(|b| **b == b'\n').count() == 100, "expected 100 lines");

    // The encodings parse back to their trees.
    let mut rng = ChaCha20Rng::seed_from_u64(0xde7e);
    for _ in 0..100 {
        let tree = random_tree(&mut rng, 4);
        let bytes = canonical_encode(&tree).unwrap();
        let back: Value = check(serde_json::from_slice(&bytes), "reparse")?;
        ensure!(back == tree, "canonical bytes do not decode to the original tree");
        random_body(&mut rng);
    }

    let vectors: [(&[u8], &str); 3] = [
        (b"", "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"),
        (b"abc", "4e03657aea45a94fc7d47ba826c8d667c0d1e6e33a64a036ec44f58fa12d6c45"),
        (
            b"The quick brown fox jumps over the lazy dog",
            "4d741b6f1eb29cb2a9b9911c82f56fa8d73b04959d3d9d222895df6c0b28aa15",
        ),
    ];
    for (input, want) in vectors {
        let got = to_hex(digest(input).as_bytes());
        ensure!(got == want, "keccak256({:?}) = {got}", String::from_utf8_lossy(input));
        let mut reference = [0u8; 32];
        let mut k = tiny_keccak::Keccak::v256();
        tiny_keccak::Hasher::update(&mut k, input);
        tiny_keccak::Hasher::finalize(k, &mut reference);
        ensure!(to_hex(&reference) == want, "reference keccak disagrees on {:?}", String::from_utf8_lossy(input));
    }
    Ok("100 encodings and digests identical across 2 processes; keccak vectors exact".into())
}

// ---- 8 ----

fn portability() -> Outcome {
    let src_dir = tempdir();
    let mut src = open(src_dir.path())?;
    let sarah = create(&mut src, "Sarah Flanery", Provider::Ethr)?;
    let luke = create(&mut src, "Luke Skywalker", Provider::Ethr)?;
    let mut ids = Vec::new();
    for (i, course) in ["Python Course", "Rust Course", "Go Course"].iter().enumerate() {
        let vc = check(
            src.issue_credential(IssueRequest {
                extra_types: vec![course.to_string()],
                ..python_course(&sarah, &luke, i == 1)
            }),
            "issue",
        )?;
        ids.push(vc.id());
    }
    check(src.create_presentation(&luke, "xyz123", &ids[..2], None), "present")?;
    let bundle = check(src.export_bundle(&luke), "export")?;
    let n_items = bundle.credentials.len() + bundle.presentations.len();
    ensure!(n_items == 4, "bundle holds {n_items} items");

    // Through a file, as a user would move it.
    let file = src_dir.path().join("bundle.json");
    check(fs::write(&file, check(serde_json::to_vec_pretty(&bundle), "encode")?), "write")?;
    let moved: credfolio_core::ExportBundle = check(serde_json::from_slice(&check(fs::read(&file), "read")?), "decode")?;

    let dst_dir = tempdir();
    let mut dst = open(dst_dir.path())?;
    for did in [&sarah, &luke] {
        let proof = check(src.registration_proof(did), "registration proof")?;
        check(dst.import_registration(&proof), "replay registration")?;
    }
    let report = check(dst.import_bundle(&moved), "import")?;
    ensure!(report.imported == n_items && report.rejected.is_empty(), "report {report:?}");
    for vc in dst.credentials().iter() {
        ensure!(check(dst.verify_credential(vc), "verify")?.valid, "imported credential {} invalid", vc.id());
    }
    for vp in dst.presentations().iter() {
        ensure!(check(dst.verify_presentation(vp), "verify")?.valid, "imported presentation invalid");
    }
    ensure!(dst.store_mismatches().is_empty(), "store and ledger disagree");
    ensure!(dst.list_credentials(&CredentialFilter::default()).len() == 3, "credential count");

    let mut tampered = moved.clone();
    tampered.credentials[0].body.claims[0].claim_value = "A++".into();
    tampered.presentations[0].verifiable_presentation.body.tag = "abc".into();
    let bad_credential = tampered.credentials[0].id().to_string();
    let fresh_dir = tempdir();
    let mut fresh = open(fresh_dir.path())?;
    for did in [&sarah, &luke] {
        check(fresh.import_registration(&check(src.registration_proof(did), "proof")?), "replay")?;
    }
    let report = check(fresh.import_bundle(&tampered), "import tampered")?;
    ensure!(report.imported == 2, "imported {} untampered items, expected 2", report.imported);
    ensure!(report.rejected.len() == 2, "rejected {:?}", report.rejected);
    ensure!(
        report.rejected.iter().any(|r| r.kind == "credential" && r.id == bad_credential),
        "tampered credential not named: {:?}",
        report.rejected
    );
    ensure!(report.rejected.iter().any(|r| r.kind == "presentation"), "tampered presentation not named");
    Ok(format!("{n_items}/{n_items} items re-verify after import; 2 tampered items rejected and named"))
}
