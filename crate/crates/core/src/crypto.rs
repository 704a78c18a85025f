//! Signature scheme used by replicas.
//!
//! The simulator needs signing in the microsecond range, so the default scheme is a keyed
//! MAC (HMAC-SHA256 over `owner ‖ message`) with a per-process secret derived from a seed.
//! A [`PublicKey`] holds the verification material privately and only exposes
//! [`PublicKey::verify`]; adversary scripts are handed [`SigningKey`]s of Byzantine
//! processes only, so they cannot produce signatures for anyone else.
//!
//! [`Signer`] and [`Verifier`] are the seam for a real asymmetric scheme.

use std::fmt;

use sha2::{Digest, Sha256};

use crate::types::ProcessId;

/// Opaque signature bytes.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Signature(pub Vec<u8>);

impl Signature {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.0.len().min(4);
        write!(f, "Sig({}..)", hex::encode(&self.0[..n]))
    }
}

pub trait Signer: Send + Sync {
    fn id(&self) -> ProcessId;
    fn sign(&self, message: &[u8]) -> Signature;
}

pub trait Verifier: Send + Sync {
    fn verify(&self, signer: ProcessId, message: &[u8], sig: &Signature) -> bool;
}

const BLOCK: usize = 64;

/// HMAC-SHA256 with the inner and outer pads pre-absorbed.
#[derive(Clone)]
struct Mac {
    inner: Sha256,
    outer: Sha256,
}

impl Mac {
    fn new(key: &[u8; 32]) -> Self {
        let mut ipad = [0x36u8; BLOCK];
        let mut opad = [0x5cu8; BLOCK];
        for (i, k) in key.iter().enumerate() {
            ipad[i] ^= k;
            opad[i] ^= k;
        }
        let mut inner = Sha256::new();
        inner.update(ipad);
        let mut outer = Sha256::new();
        outer.update(opad);
        Mac { inner, outer }
    }

    fn tag(&self, owner: ProcessId, message: &[u8]) -> Vec<u8> {
        let mut inner = self.inner.clone();
        inner.update(owner.0.to_be_bytes());
        inner.update(message);
        let mut outer = self.outer.clone();
        outer.update(inner.finalize());
        outer.finalize().to_vec()
    }
}

/// Private half of a key pair.
#[derive(Clone)]
pub struct SigningKey {
    owner: ProcessId,
    mac: Mac,
}

impl fmt::Debug for SigningKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SigningKey({})", self.owner)
    }
}

impl SigningKey {
    pub fn owner(&self) -> ProcessId {
        self.owner
    }
}

impl Signer for SigningKey {
    fn id(&self) -> ProcessId {
        self.owner
    }

    fn sign(&self, message: &[u8]) -> Signature {
        Signature(self.mac.tag(self.owner, message))
    }
}

/// Verification half of a key pair.
#[derive(Clone)]
pub struct PublicKey {
    owner: ProcessId,
    mac: Mac,
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", self.owner)
    }
}

impl PartialEq for PublicKey {
    fn eq(&self, other: &Self) -> bool {
        // Tags over a fixed probe identify the key material.
        self.owner == other.owner && self.mac.tag(self.owner, b"probe") == other.mac.tag(other.owner, b"probe")
    }
}

impl PublicKey {
    pub fn owner(&self) -> ProcessId {
        self.owner
    }

    pub fn verify(&self, message: &[u8], sig: &Signature) -> bool {
        self.mac.tag(self.owner, message) == sig.0
    }
}

#[derive(Clone, Debug)]
pub struct KeyPair {
    pub owner: ProcessId,
    pub signing: SigningKey,
    pub public: PublicKey,
}

/// Deterministic key generation from `(id, seed)`.
pub fn keygen(id: ProcessId, seed: u64) -> KeyPair {
    let mut h = Sha256::new();
    h.update(b"fastbft/mock-key/v1");
    h.update(seed.to_be_bytes());
    h.update(id.0.to_be_bytes());
    let secret: [u8; 32] = h.finalize().into();
    let mac = Mac::new(&secret);
    KeyPair {
        owner: id,
        signing: SigningKey { owner: id, mac: mac.clone() },
        public: PublicKey { owner: id, mac },
    }
}

pub fn sign(key: &SigningKey, message: &[u8]) -> Signature {
    key.sign(message)
}

pub fn verify(key: &PublicKey, message: &[u8], sig: &Signature) -> bool {
    key.verify(message, sig)
}

/// Public keys of all `n` processes.
#[derive(Clone, Debug)]
pub struct KeyDirectory {
    keys: Vec<PublicKey>,
}

impl KeyDirectory {
    /// Generates keys for processes `1..=n`; returns the directory and the signing keys in
    /// id order.
    pub fn generate(n: u32, seed: u64) -> (KeyDirectory, Vec<SigningKey>) {
        let pairs: Vec<KeyPair> = ProcessId::all(n).map(|id| keygen(id, seed)).collect();
        let keys = pairs.iter().map(|p| p.public.clone()).collect();
        let signing = pairs.into_iter().map(|p| p.signing).collect();
        (KeyDirectory { keys }, signing)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn get(&self, id: ProcessId) -> Option<&PublicKey> {
        let idx = (id.0 as usize).checked_sub(1)?;
        self.keys.get(idx)
    }
}

impl Verifier for KeyDirectory {
    fn verify(&self, signer: ProcessId, message: &[u8], sig: &Signature) -> bool {
        self.get(signer).is_some_and(|k| k.verify(message, sig))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn keygen_is_deterministic() {
        let a = keygen(ProcessId(1), 42);
        let b = keygen(ProcessId(1), 42);
        assert_eq!(a.public, b.public);
        assert_eq!(a.signing.sign(b"m"), b.signing.sign(b"m"));
    }

    #[test]
    fn distinct_ids_distinct_keys() {
        assert_ne!(keygen(ProcessId(1), 42).public, keygen(ProcessId(2), 42).public);
    }

    #[test]
    fn signature_binds_signer() {
        let k1 = keygen(ProcessId(1), 42);
        let k2 = keygen(ProcessId(2), 42);
        assert!(!verify(&k1.public, b"m", &sign(&k2.signing, b"m")));
    }

    #[test]
    fn empty_message_round_trip() {
        let k = keygen(ProcessId(3), 7);
        assert!(verify(&k.public, b"", &sign(&k.signing, b"")));
    }

    #[test]
    fn altered_message_rejected() {
        let k = keygen(ProcessId(3), 7);
        let sig = sign(&k.signing, b"hello");
        assert!(!verify(&k.public, b"hellp", &sig));
    }

    #[test]
    fn directory_lookup() {
        let (dir, signing) = KeyDirectory::generate(4, 1);
        assert_eq!(dir.len(), 4);
        assert!(dir.get(ProcessId(0)).is_none());
        assert!(dir.get(ProcessId(5)).is_none());
        let sig = signing[2].sign(b"x");
        assert!(dir.verify(ProcessId(3), b"x", &sig));
        assert!(!dir.verify(ProcessId(2), b"x", &sig));
    }

    proptest! {
        #[test]
        fn any_signature_bit_flip_rejected(msg in proptest::collection::vec(any::<u8>(), 0..64), bit in 0usize..256) {
            let k = keygen(ProcessId(2), 9);
            let mut sig = sign(&k.signing, &msg);
            sig.0[bit / 8] ^= 1 << (bit % 8);
            prop_assert!(!verify(&k.public, &msg, &sig));
        }

        #[test]
        fn any_message_bit_flip_rejected(msg in proptest::collection::vec(any::<u8>(), 1..64), pos in any::<prop::sample::Index>(), bit in 0u8..8) {
            let k = keygen(ProcessId(2), 9);
            let sig = sign(&k.signing, &msg);
            let mut altered = msg.clone();
            let i = pos.index(altered.len());
            altered[i] ^= 1 << bit;
            prop_assert!(!verify(&k.public, &altered, &sig));
        }
    }
}
