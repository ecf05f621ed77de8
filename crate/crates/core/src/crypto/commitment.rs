//! Hash commitments to non-negative integers.

use num_bigint::BigUint;
use rand_core::Rng;
use sha2::{Digest, Sha256};

use crate::encoding::{Decode, DecodeError, Encode, Reader, Writer};

const DOMAIN: &[u8] = b"qaat/commit/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CommitmentDigest(pub [u8; 32]);

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Opening(pub [u8; 32]);

impl core::fmt::Debug for Opening {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str("Opening(..)")
    }
}

fn digest_of(v: &BigUint, o: &Opening) -> CommitmentDigest {
    let mut w = Writer::new();
    w.biguint(v);
    let h = Sha256::new_with_prefix(DOMAIN).chain_update(w.finish()).chain_update(o.0).finalize();
    CommitmentDigest(h.into())
}

/// Commits to `v` with 256 bits of fresh randomness.
pub fn c_commit<R: Rng + ?Sized>(v: &BigUint, rng: &mut R) -> (CommitmentDigest, Opening) {
    let mut o = [0u8; 32];
    rng.fill_bytes(&mut o);
    let o = Opening(o);
    (digest_of(v, &o), o)
}

pub fn c_verify(c: &CommitmentDigest, v: &BigUint, o: &Opening) -> bool {
    digest_of(v, o) == *c
}

impl Encode for CommitmentDigest {
    fn encode_to(&self, w: &mut Writer) {
        w.raw(&self.0);
    }
}

impl Decode for CommitmentDigest {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(CommitmentDigest(r.array()?))
    }
}

impl Encode for Opening {
    fn encode_to(&self, w: &mut Writer) {
        w.raw(&self.0);
    }
}

impl Decode for Opening {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Opening(r.array()?))
    }
}
