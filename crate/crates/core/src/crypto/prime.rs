//! Miller-Rabin and hash-to-prime.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cell::RefCell;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand_chacha::ChaCha20Rng;
use rand_core::{Rng, SeedableRng};
use sha3::{Digest, Sha3_256, Sha3_512};

use super::CryptoError;

/// Output width of the production hash-to-prime.
pub const PRIME_BITS: u32 = 264;
/// Miller-Rabin rounds applied to every candidate.
pub const MR_ROUNDS: u32 = 80;
/// Nonce budget before the hash is declared broken.
pub const MAX_NONCES: u64 = 1 << 20;

const SMALL_PRIMES: [u32; 54] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191,
    193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251,
];

/// Miller-Rabin with `rounds` random bases.
///
/// Bases come from a ChaCha stream seeded by a hash of `n` itself, so the
/// verdict is a deterministic function of `(n, rounds)`.
pub fn is_probable_prime(n: &BigUint, rounds: u32) -> bool {
    if let Some(small) = n.to_u32() {
        if small < 2 {
            return false;
        }
        if SMALL_PRIMES.contains(&small) {
            return true;
        }
    }
    for &p in SMALL_PRIMES.iter() {
        if (n % p).is_zero() {
            return false;
        }
    }
    if n < &BigUint::from(251u32 * 251) {
        // no factor up to 251 and below 251^2
        return true;
    }

    let one = BigUint::one();
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    let span = n - 3u32; // bases drawn from [2, n-2]

    let mut rng = ChaCha20Rng::from_seed(Sha3_256::new_with_prefix(b"qaat/mr").chain_update(n.to_bytes_be()).finalize().into());
    let width = (n.bits() as usize).div_ceil(8) + 8;
    let mut buf = alloc::vec![0u8; width];

    'witness: for _ in 0..rounds {
        rng.fill_bytes(&mut buf);
        let a = BigUint::from_bytes_be(&buf) % &span + 2u32;
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == n_minus_1 {
                continue 'witness;
            }
            if x == one {
                return false;
            }
        }
        return false;
    }
    true
}

/// A prime obtained from hashing, together with the nonce that produced it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PrimeRepresentative {
    pub value: BigUint,
    pub nonce: u64,
}

/// Hash-to-prime: SHA3-512 over `data || nonce`, truncated to `bits` bits,
/// first nonce whose candidate passes Miller-Rabin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashToPrime {
    bits: u32,
    rounds: u32,
}

impl Default for HashToPrime {
    fn default() -> Self {
        HashToPrime { bits: PRIME_BITS, rounds: MR_ROUNDS }
    }
}

impl HashToPrime {
    /// Narrower output for tests that need an exhaustive primality oracle.
    /// `bits` must lie in `2..=512`.
    pub fn with_bits(bits: u32) -> Self {
        assert!((2..=512).contains(&bits), "unsupported prime width");
        HashToPrime { bits, rounds: MR_ROUNDS }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    fn candidate(&self, data: &[u8], nonce: u64) -> BigUint {
        let h = Sha3_512::new_with_prefix(data).chain_update(nonce.to_be_bytes()).finalize();
        let nbytes = self.bits.div_ceil(8) as usize;
        let mut c = BigUint::from_bytes_be(&h[..nbytes]);
        let excess = nbytes as u32 * 8 - self.bits;
        if excess > 0 {
            c >>= excess;
        }
        c
    }

    pub fn hash(&self, data: &[u8]) -> Result<PrimeRepresentative, CryptoError> {
        if data.is_empty() {
            return Err(CryptoError::EmptyInput);
        }
        for nonce in 0..MAX_NONCES {
            let c = self.candidate(data, nonce);
            if (c.is_odd() || c == BigUint::from(2u32)) && is_probable_prime(&c, self.rounds) {
                return Ok(PrimeRepresentative { value: c, nonce });
            }
        }
        Err(CryptoError::HashToPrimeExhausted)
    }
}

/// Production hash-to-prime with the default parameters.
pub fn hash_to_prime(data: &[u8]) -> Result<PrimeRepresentative, CryptoError> {
    HashToPrime::default().hash(data)
}

/// Memoizing front end to [`HashToPrime`].
///
/// One instance is owned by a single simulation run; it is not `Sync`.
#[derive(Debug, Default)]
pub struct PrimeCache {
    h: HashToPrime,
    memo: RefCell<BTreeMap<Vec<u8>, BigUint>>,
}

impl PrimeCache {
    pub fn new(h: HashToPrime) -> Self {
        PrimeCache { h, memo: RefCell::new(BTreeMap::new()) }
    }

    pub fn prime(&self, data: &[u8]) -> Result<BigUint, CryptoError> {
        if let Some(p) = self.memo.borrow().get(data) {
            return Ok(p.clone());
        }
        let p = self.h.hash(data)?.value;
        self.memo.borrow_mut().insert(data.to_vec(), p.clone());
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.memo.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
