//! Signature shares, quorum certificates and the key directory.
//!
//! A quorum certificate is the list of individual Ed25519 shares plus a
//! bitmap of who signed. It is O(n) rather than constant size, but callers
//! only see `sig_aggregate`/`sig_verify`, so a real threshold scheme can
//! replace it.

use alloc::vec::Vec;

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use rand_core::Rng;
use sha2::{Digest, Sha256};

use super::CryptoError;
use crate::encoding::{Decode, DecodeError, Encode, Reader, Writer};
use crate::ProcessId;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Share(pub [u8; 64]);

impl core::fmt::Debug for Share {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "Share({:02x}{:02x}..)", self.0[0], self.0[1])
    }
}

impl Encode for Share {
    fn encode_to(&self, w: &mut Writer) {
        w.raw(&self.0);
    }
}

impl Decode for Share {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Share(r.array()?))
    }
}

#[derive(Clone)]
pub struct SecretKey(SigningKey);

impl core::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

impl SecretKey {
    pub fn generate<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        SecretKey(SigningKey::from_bytes(&seed))
    }

    pub fn public(&self) -> PublicKey {
        PublicKey(self.0.verifying_key().to_bytes())
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0.to_bytes()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublicKey(pub [u8; 32]);

impl PublicKey {
    fn verifying_key(&self) -> Option<VerifyingKey> {
        VerifyingKey::from_bytes(&self.0).ok()
    }
}

impl Encode for PublicKey {
    fn encode_to(&self, w: &mut Writer) {
        w.raw(&self.0);
    }
}

impl Decode for PublicKey {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(PublicKey(r.array()?))
    }
}

pub fn sig_share(key: &SecretKey, message_tag: &[u8]) -> Share {
    Share(key.0.sign(message_tag).to_bytes())
}

pub fn share_valid(key: &PublicKey, message_tag: &[u8], share: &Share) -> bool {
    let Some(vk) = key.verifying_key() else {
        return false;
    };
    vk.verify(message_tag, &Signature::from_bytes(&share.0)).is_ok()
}

/// Bitmap over `n` process slots.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignerSet {
    n: u32,
    bits: Vec<u8>,
}

impl SignerSet {
    pub fn empty(n: usize) -> Self {
        SignerSet { n: n as u32, bits: alloc::vec![0; n.div_ceil(8)] }
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub fn insert(&mut self, i: ProcessId) {
        assert!((i as usize) < self.n(), "signer out of range");
        self.bits[i as usize / 8] |= 0x80 >> (i % 8);
    }

    pub fn contains(&self, i: ProcessId) -> bool {
        (i as usize) < self.n() && self.bits[i as usize / 8] & (0x80 >> (i % 8)) != 0
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = ProcessId> + '_ {
        (0..self.n).filter(move |&i| self.contains(i))
    }
}

impl Encode for SignerSet {
    fn encode_to(&self, w: &mut Writer) {
        w.u32(self.n).raw(&self.bits);
    }
}

impl Decode for SignerSet {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let n = r.u32()?;
        let len = (n as usize).div_ceil(8);
        if len > r.remaining() {
            return Err(DecodeError::Truncated);
        }
        let bits = r.raw(len)?.to_vec();
        // padding bits past n must be clear
        if n % 8 != 0 && bits[len - 1] & (0xffu8 >> (n % 8)) != 0 {
            return Err(DecodeError::NonCanonical);
        }
        Ok(SignerSet { n, bits })
    }
}

/// Aggregated certificate over one message tag.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QuorumSignature {
    pub message_tag: Vec<u8>,
    pub signers: SignerSet,
    /// One share per set bit, in signer order.
    pub shares: Vec<Share>,
    pub threshold: u32,
}

impl Encode for QuorumSignature {
    fn encode_to(&self, w: &mut Writer) {
        w.bytes(&self.message_tag).put(&self.signers).u32(self.threshold).u32(self.shares.len() as u32);
        for s in &self.shares {
            w.put(s);
        }
    }
}

impl Decode for QuorumSignature {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let message_tag = r.bytes()?.to_vec();
        let signers: SignerSet = r.get()?;
        let threshold = r.u32()?;
        let k = r.u32()? as usize;
        if k != signers.count() || k.saturating_mul(64) > r.remaining() {
            return Err(DecodeError::Invalid);
        }
        let shares = (0..k).map(|_| r.get()).collect::<Result<_, _>>()?;
        Ok(QuorumSignature { message_tag, signers, shares, threshold })
    }
}

/// Combines shares into a certificate; aborts on a duplicate signer, an
/// invalid share, or fewer than `threshold` shares.
pub fn sig_aggregate(
    keys: &[PublicKey],
    message_tag: &[u8],
    shares: &[(ProcessId, Share)],
    threshold: usize,
) -> Result<QuorumSignature, CryptoError> {
    let mut signers = SignerSet::empty(keys.len());
    for &(i, ref s) in shares {
        let Some(pk) = keys.get(i as usize) else {
            return Err(CryptoError::InvalidShare);
        };
        if signers.contains(i) {
            return Err(CryptoError::DuplicateSigner);
        }
        if !share_valid(pk, message_tag, s) {
            return Err(CryptoError::InvalidShare);
        }
        signers.insert(i);
    }
    if signers.count() < threshold {
        return Err(CryptoError::BelowThreshold);
    }
    let mut ordered: Vec<_> = shares.to_vec();
    ordered.sort_by_key(|(i, _)| *i);
    Ok(QuorumSignature {
        message_tag: message_tag.to_vec(),
        signers,
        shares: ordered.into_iter().map(|(_, s)| s).collect(),
        threshold: threshold as u32,
    })
}

/// True iff the certificate carries at least `threshold` distinct valid
/// shares over exactly `message_tag`.
pub fn sig_verify(keys: &[PublicKey], qs: &QuorumSignature, message_tag: &[u8], threshold: usize) -> bool {
    if qs.message_tag != message_tag || qs.signers.n() != keys.len() {
        return false;
    }
    if qs.signers.count() < threshold || qs.shares.len() != qs.signers.count() {
        return false;
    }
    qs.signers.iter().zip(&qs.shares).all(|(i, s)| share_valid(&keys[i as usize], message_tag, s))
}

/// Merkle commitment over the setup-time key vector.
#[derive(Debug, Clone)]
pub struct KeyDirectory {
    keys: Vec<PublicKey>,
    levels: Vec<Vec<[u8; 32]>>,
}

/// Sibling hashes from leaf to root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyOpening(pub Vec<[u8; 32]>);

impl Encode for KeyOpening {
    fn encode_to(&self, w: &mut Writer) {
        w.u32(self.0.len() as u32);
        for h in &self.0 {
            w.raw(h);
        }
    }
}

impl Decode for KeyOpening {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let k = r.u32()? as usize;
        if k > 64 {
            return Err(DecodeError::Invalid);
        }
        Ok(KeyOpening((0..k).map(|_| r.array()).collect::<Result<_, _>>()?))
    }
}

fn leaf_hash(i: u32, key: &PublicKey) -> [u8; 32] {
    Sha256::new_with_prefix([0u8]).chain_update(i.to_be_bytes()).chain_update(key.0).finalize().into()
}

fn node_hash(l: &[u8; 32], r: &[u8; 32]) -> [u8; 32] {
    Sha256::new_with_prefix([1u8]).chain_update(l).chain_update(r).finalize().into()
}

impl KeyDirectory {
    pub fn new(keys: Vec<PublicKey>) -> Self {
        assert!(!keys.is_empty(), "empty key directory");
        let width = keys.len().next_power_of_two();
        let mut level: Vec<[u8; 32]> = (0..width)
            .map(|i| keys.get(i).map_or([0u8; 32], |k| leaf_hash(i as u32, k)))
            .collect();
        let mut levels = alloc::vec![level.clone()];
        while level.len() > 1 {
            level = level.chunks(2).map(|p| node_hash(&p[0], &p[1])).collect();
            levels.push(level.clone());
        }
        KeyDirectory { keys, levels }
    }

    pub fn root(&self) -> [u8; 32] {
        self.levels.last().expect("nonempty")[0]
    }

    pub fn keys(&self) -> &[PublicKey] {
        &self.keys
    }

    pub fn open(&self, i: ProcessId) -> Option<(PublicKey, KeyOpening)> {
        let key = *self.keys.get(i as usize)?;
        let mut idx = i as usize;
        let mut path = Vec::new();
        for level in &self.levels[..self.levels.len() - 1] {
            path.push(level[idx ^ 1]);
            idx >>= 1;
        }
        Some((key, KeyOpening(path)))
    }
}

pub fn key_directory_check(root: &[u8; 32], i: ProcessId, key: &PublicKey, opening: &KeyOpening) -> bool {
    if opening.0.len() >= 32 || (i as u64) >> opening.0.len() != 0 {
        return false;
    }
    let mut h = leaf_hash(i, key);
    let mut idx = i;
    for sib in &opening.0 {
        h = if idx & 1 == 0 { node_hash(&h, sib) } else { node_hash(sib, &h) };
        idx >>= 1;
    }
    &h == root
}
