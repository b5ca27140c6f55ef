use serde::{Deserialize, Serialize};

use crate::canonical::canonical_digest;
use crate::crypto::{Digest32, KeyPair, RecoverableSignature};
use crate::identity::{Did, DidResolver};
use crate::time::Timestamp;

/// A plaintext note between two DIDs, signed by the sender.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub from: Did,
    pub to: Did,
    pub body: String,
    pub timestamp: Timestamp,
    pub signature: RecoverableSignature,
}

#[derive(Serialize)]
struct SignedPart<'a> {
    from: &'a Did,
    to: &'a Did,
    body: &'a str,
    timestamp: &'a Timestamp,
}

pub(crate) fn message_digest(from: &Did, to: &Did, body: &str, timestamp: &Timestamp) -> Digest32 {
    canonical_digest(&SignedPart {
        from,
        to,
        body,
        timestamp,
    })
    .expect("messages contain no floats")
}

impl Message {
    pub(crate) fn sign(from: Did, to: Did, body: String, key: &KeyPair) -> Self {
        let timestamp = Timestamp::now();
        let signature = key.sign(&message_digest(&from, &to, &body, &timestamp));
        Message {
            from,
            to,
            body,
            timestamp,
            signature,
        }
    }

    pub fn digest(&self) -> Digest32 {
        message_digest(&self.from, &self.to, &self.body, &self.timestamp)
    }

    /// True iff the sender's registered key signed this exact message.
    pub fn verify(&self, resolver: &impl DidResolver) -> bool {
        resolver
            .signing_key(&self.from)
            .is_some_and(|key| key.verify(&self.digest(), &self.signature))
    }
}

/// A message together with its authenticity check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MessageView {
    #[serde(flatten)]
    pub message: Message,
    pub verified: bool,
}
