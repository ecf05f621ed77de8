//! RSA group of unknown order.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand_core::Rng;

use super::prime::is_probable_prime;
use super::CryptoError;
use crate::encoding::{Decode, DecodeError, Encode, Reader, Writer};

/// Modulus and generator of the accumulator group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupParams {
    modulus: BigUint,
    generator: BigUint,
}

impl GroupParams {
    /// `N = 61 * 53 = 3233`, `g = 2`. Small enough to check by hand.
    pub fn toy() -> Self {
        GroupParams { modulus: BigUint::from(3233u32), generator: BigUint::from(2u32) }
    }

    pub fn new(modulus: BigUint, generator: BigUint) -> Result<Self, CryptoError> {
        if modulus < BigUint::from(3u32) || generator <= BigUint::one() || generator >= modulus {
            return Err(CryptoError::BadGroup);
        }
        if !modulus.gcd(&generator).is_one() {
            return Err(CryptoError::BadGroup);
        }
        Ok(GroupParams { modulus, generator })
    }

    /// Fresh modulus of `bits` bits from two distinct random primes, which
    /// are dropped before returning. The generator is a random square.
    pub fn generate<R: Rng + ?Sized>(bits: u32, rng: &mut R) -> Self {
        assert!(bits >= 16, "modulus too small");
        let half = bits / 2;
        loop {
            let p = random_prime(half, rng);
            let q = random_prime(bits - half, rng);
            if p == q {
                continue;
            }
            let modulus = &p * &q;
            if modulus.bits() != u64::from(bits) {
                continue;
            }
            let generator = loop {
                let r = random_below(&modulus, rng);
                let g = (&r * &r) % &modulus;
                if g > BigUint::one() && modulus.gcd(&g).is_one() {
                    break g;
                }
            };
            return GroupParams { modulus, generator };
        }
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn generator(&self) -> &BigUint {
        &self.generator
    }

    /// Byte width of a group element in fixed-width encodings.
    pub fn element_len(&self) -> usize {
        (self.modulus.bits() as usize).div_ceil(8)
    }

    pub fn pow(&self, base: &BigUint, exp: &BigUint) -> BigUint {
        base.modpow(exp, &self.modulus)
    }

    pub fn mul(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a * b) % &self.modulus
    }

    pub fn inverse(&self, x: &BigUint) -> Option<BigUint> {
        let m = BigInt::from(self.modulus.clone());
        let e = BigInt::from(x % &self.modulus).extended_gcd(&m);
        if !e.gcd.is_one() {
            return None;
        }
        Some(e.x.mod_floor(&m).to_biguint().expect("reduced value is non-negative"))
    }

    /// `base^exp` for a signed exponent; negative exponents go through the inverse.
    pub fn pow_signed(&self, base: &BigUint, exp: &BigInt) -> Option<BigUint> {
        match exp.sign() {
            Sign::Minus => Some(self.pow(&self.inverse(base)?, exp.magnitude())),
            _ => Some(self.pow(base, exp.magnitude())),
        }
    }

    /// True for values in `[1, N)` that are units mod N.
    pub fn is_element(&self, x: &BigUint) -> bool {
        !x.is_zero() && x < &self.modulus && self.modulus.gcd(x).is_one()
    }
}

impl Encode for GroupParams {
    fn encode_to(&self, w: &mut Writer) {
        w.biguint(&self.modulus).biguint(&self.generator);
    }
}

impl Decode for GroupParams {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let modulus = r.biguint()?;
        let generator = r.biguint()?;
        GroupParams::new(modulus, generator).map_err(|_| DecodeError::Invalid)
    }
}

fn random_below<R: Rng + ?Sized>(bound: &BigUint, rng: &mut R) -> BigUint {
    let mut buf = alloc::vec![0u8; bound.bits().div_ceil(8) as usize + 8];
    rng.fill_bytes(&mut buf);
    BigUint::from_bytes_be(&buf) % bound
}

fn random_prime<R: Rng + ?Sized>(bits: u32, rng: &mut R) -> BigUint {
    let nbytes = bits.div_ceil(8) as usize;
    let mut buf = alloc::vec![0u8; nbytes];
    loop {
        rng.fill_bytes(&mut buf);
        let mut c = BigUint::from_bytes_be(&buf) >> (nbytes as u32 * 8 - bits);
        c.set_bit(u64::from(bits) - 1, true);
        c.set_bit(u64::from(bits) - 2, true);
        c.set_bit(0, true);
        if is_probable_prime(&c, super::prime::MR_ROUNDS) {
            return c;
        }
    }
}
