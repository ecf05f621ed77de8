//! Cryptographic building blocks.

pub mod accumulator;
pub mod commitment;
pub mod group;
pub mod prime;
pub mod signature;

use core::fmt;

pub use accumulator::{Accumulator, Element, MembershipProof, NonMembershipProof};
pub use commitment::{c_commit, c_verify, CommitmentDigest, Opening};
pub use group::GroupParams;
pub use prime::{hash_to_prime, is_probable_prime, HashToPrime, PrimeCache, PrimeRepresentative};
pub use signature::{
    key_directory_check, sig_aggregate, sig_share, sig_verify, KeyDirectory, KeyOpening, PublicKey, QuorumSignature,
    SecretKey, Share, SignerSet,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CryptoError {
    EmptyInput,
    /// No prime within the nonce budget; only a broken hash gets here.
    HashToPrimeExhausted,
    DuplicateElement,
    BadGroup,
    DuplicateSigner,
    InvalidShare,
    BelowThreshold,
}

impl fmt::Display for CryptoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CryptoError::EmptyInput => "empty input",
            CryptoError::HashToPrimeExhausted => "hash-to-prime nonce budget exhausted",
            CryptoError::DuplicateElement => "element already accumulated",
            CryptoError::BadGroup => "invalid group parameters",
            CryptoError::DuplicateSigner => "duplicate signer",
            CryptoError::InvalidShare => "invalid signature share",
            CryptoError::BelowThreshold => "fewer shares than the threshold",
        };
        f.write_str(s)
    }
}
