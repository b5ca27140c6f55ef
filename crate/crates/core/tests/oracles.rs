//! Cross-checks against independent implementations: libsecp256k1 for the
//! curve arithmetic and signatures, tiny-keccak for hashing.

use credfolio_core::identity::Provider;
use credfolio_core::{
    compress_public, credential_digest, decompress_public, derive_did, digest, generate_keypair, Claim, CredentialBody,
    Did, Timestamp,
};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use tiny_keccak::{Hasher, Keccak};

fn keccak(parts: &[&[u8]]) -> [u8; 32] {
    let mut k = Keccak::v256();
    for p in parts {
        k.update(p);
    }
    let mut out = [0u8; 32];
    k.finalize(&mut out);
    out
}

fn random_secret(rng: &mut ChaCha20Rng) -> libsecp256k1::SecretKey {
    loop {
        let mut bytes = [0u8; 32];
        rng.fill_bytes(&mut bytes);
        if let Ok(sk) = libsecp256k1::SecretKey::parse(&bytes) {
            return sk;
        }
    }
}

#[test]
fn public_keys_match_reference() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    for _ in 0..100 {
        let sk = random_secret(&mut rng);
        let pair = generate_keypair(Some(sk.serialize())).unwrap();
        let reference = libsecp256k1::PublicKey::from_secret_key(&sk);
        assert_eq!(pair.public_uncompressed(), reference.serialize());
        assert_eq!(pair.public_compressed(), reference.serialize_compressed());
        assert_eq!(compress_public(&reference.serialize()).unwrap(), reference.serialize_compressed());
        assert_eq!(decompress_public(&reference.serialize_compressed()).unwrap(), reference.serialize());
    }
}

#[test]
fn generator_vector() {
    let mut one = [0u8; 32];
    one[31] = 1;
    let pair = generate_keypair(Some(one)).unwrap();
    let reference = libsecp256k1::PublicKey::from_secret_key(&libsecp256k1::SecretKey::parse(&one).unwrap());
    assert_eq!(pair.public_compressed(), reference.serialize_compressed());
    assert_eq!(
        hex::encode(pair.public_compressed()),
        "0279be667ef9dcbbac55a06295ce870b07029bfcdb2dce28d959f2815b16f81798"
    );
}

#[test]
fn signatures_interoperate_with_reference() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for i in 0..100u32 {
        let sk = random_secret(&mut rng);
        let pair = generate_keypair(Some(sk.serialize())).unwrap();
        let d = digest(&i.to_be_bytes());
        let msg = libsecp256k1::Message::parse(d.as_bytes());
        let pk = libsecp256k1::PublicKey::from_secret_key(&sk);

        // Ours verified by the reference, including public-key recovery.
        let sig = pair.sign(&d).to_bytes();
        let ref_sig = libsecp256k1::Signature::parse_standard_slice(&sig[..64]).unwrap();
        assert!(libsecp256k1::verify(&msg, &ref_sig, &pk));
        let recid = libsecp256k1::RecoveryId::parse(sig[64] - 27).unwrap();
        assert_eq!(libsecp256k1::recover(&msg, &ref_sig, &recid).unwrap(), pk);

        // Both sides use RFC 6979 nonces with low-s, so the bytes agree.
        let (theirs, their_recid) = libsecp256k1::sign(&msg, &sk);
        assert_eq!(&sig[..64], &theirs.serialize()[..]);
        assert_eq!(sig[64], 27 + their_recid.serialize());

        // Reference signatures verified by ours.
        let mut encoded = theirs.serialize().to_vec();
        encoded.push(27 + their_recid.serialize());
        assert!(credfolio_core::verify_signature(&pk.serialize(), &d, &encoded).unwrap());
    }
}

#[test]
fn keccak_matches_reference() {
    assert_eq!(
        digest(b"").to_hex(),
        "0xc5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"
    );
    assert_eq!(
        hex::encode(digest(b"abc").as_bytes()),
        "4e03657aea45a94fc7d47ba826c8d667c0d1e6e33a64a036ec44f58fa12d6c45"
    );
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for len in 0..300 {
        let mut data = vec![0u8; len];
        rng.fill_bytes(&mut data);
        assert_eq!(digest(&data).as_bytes(), &keccak(&[&data]));
    }
}

#[test]
fn credential_digest_from_hand_composed_bytes() {
    let issuer = Did::parse("did:ethr:0x02072c398d8e1320f3e0cab7b5d2ecf1bf38805dede917a50926ff238ae1ea1737").unwrap();
    let subject = Did::parse("did:ethr:0x02c81c2097947f5e072c6121325f1cb02221df2a14eb7e1ec1c4b28722ae2951bf").unwrap();
    let issued = Timestamp::parse("2023-12-15T23:55:57.461Z").unwrap();
    let body = CredentialBody::new(
        issuer.clone(),
        subject.clone(),
        &["Python Course".to_string(), "Profile".to_string()],
        vec![Claim::new("Mastery of Python Programming Language", "A+")],
        false,
        issued,
    )
    .unwrap();

    let payload = format!(
        concat!(
            r#"{{"claims":[{{"claimType":"Mastery of Python Programming Language","claimValue":"A+"}}],"#,
            r#""issuanceDate":"2023-12-15T23:55:57.461Z","issuer":"{}","revocable":false,"#,
            r#""subject":"{}","types":["VerifiableCredential","Python Course","Profile"]}}"#
        ),
        issuer, subject
    );
    let domain = br#"{"chainId":1,"name":"VerifiableCredential","version":"1"}"#;
    let expected = keccak(&[&[0x19, 0x01], &keccak(&[domain]), &keccak(&[payload.as_bytes()])]);
    assert_eq!(credential_digest(&body).as_bytes(), &expected);
}

#[test]
fn known_controller_key_compresses_to_its_did() {
    let uncompressed = hex::decode(concat!(
        "045f2c19148f0afb66ef9f3c7cc65464ba2d4e9339784d1a6a7239c059e1f75014",
        "9c8a5997fe2f713eb8d31db93b5b5e8716332fb17a9333643d3fd3f5748cbfc0"
    ))
    .unwrap();
    let reference = libsecp256k1::PublicKey::parse_slice(&uncompressed, None).unwrap();
    let compressed = compress_public(&uncompressed).unwrap();
    assert_eq!(compressed, reference.serialize_compressed());
    let did = derive_did(Provider::Ethr, &compressed).unwrap();
    assert_eq!(
        did.to_string(),
        "did:ethr:0x025f2c19148f0afb66ef9f3c7cc65464ba2d4e9339784d1a6a7239c059e1f75014"
    );
}
