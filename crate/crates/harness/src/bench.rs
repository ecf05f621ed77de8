//! `qaat bench`: accumulator operation timings against set size.

use std::time::Instant;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use qaat_core::crypto::accumulator::{verify_mem, verify_non_mem};
use qaat_core::crypto::{Accumulator, HashToPrime};
use qaat_core::sim::{group_for, GroupMode};

use crate::HarnessError;

pub const BENCH_SIZES: [usize; 5] = [100, 500, 1000, 1500, 2000];

/// Mean wall time of each operation at one set size, in microseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub size: usize,
    pub repetitions: u32,
    pub add_us: f64,
    pub prove_mem_us: f64,
    pub verify_mem_us: f64,
    pub prove_non_mem_us: f64,
    pub verify_non_mem_us: f64,
}

fn mean_us<T>(reps: u32, mut f: impl FnMut() -> T) -> (f64, T) {
    let start = Instant::now();
    let mut last = f();
    for _ in 1..reps {
        last = f();
    }
    (start.elapsed().as_secs_f64() * 1e6 / f64::from(reps), last)
}

/// Toy mode: the small group and 32-bit primes. `rsa2048`: a fresh 2048-bit
/// modulus and full-width primes. Proofs are computed from scratch from the
/// accumulated set, so proving cost grows with the set.
pub fn cmd_bench(mode: GroupMode, sizes: &[usize], seed: u64) -> Result<Vec<BenchRow>, HarnessError> {
    let (hasher, reps) = match mode {
        GroupMode::Toy => (HashToPrime::with_bits(32), 5),
        GroupMode::Rsa2048 => (HashToPrime::default(), 1),
    };
    let group = group_for(mode, seed);
    let largest = sizes.iter().copied().max().unwrap_or(0);
    let mut primes: Vec<BigUint> = Vec::with_capacity(largest + 1);
    let mut counter = 0u64;
    while primes.len() < largest + 1 {
        let mut data = b"qaat/bench".to_vec();
        data.extend_from_slice(&seed.to_be_bytes());
        data.extend_from_slice(&counter.to_be_bytes());
        counter += 1;
        let p = hasher.hash(&data).map_err(|e| HarnessError::Internal(format!("{e:?}")))?.value;
        if !primes.contains(&p) {
            primes.push(p);
        }
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let acc = Accumulator::from_primes(&group, None, primes[..size].to_vec());
        let outsider = &primes[largest];
        let member = &primes[size / 2];
        let digest = acc.digest(&group);

        let (add_us, _) = mean_us(reps, || acc.add_prime(&group, outsider));
        let (prove_mem_us, mem) = mean_us(reps, || acc.prove_mem_prime(&group, member));
        let mem = mem.ok_or_else(|| HarnessError::Internal("membership proof missing".into()))?;
        let (verify_mem_us, ok_mem) = mean_us(reps, || verify_mem(&group, &digest, member, &mem));
        let (prove_non_mem_us, non) = mean_us(reps, || acc.prove_non_mem_prime(&group, outsider));
        let non = non.ok_or_else(|| HarnessError::Internal("non-membership proof missing".into()))?;
        let (verify_non_mem_us, ok_non) = mean_us(reps, || verify_non_mem(&group, &digest, outsider, &non));
        if !ok_mem || !ok_non {
            return Err(HarnessError::Internal(format!("freshly built proof failed to verify at size {size}")));
        }
        rows.push(BenchRow { size, repetitions: reps, add_us, prove_mem_us, verify_mem_us, prove_non_mem_us, verify_non_mem_us });
    }
    Ok(rows)
}

pub fn format_table(rows: &[BenchRow]) -> String {
    let mut s = format!(
        "{:>6} {:>12} {:>12} {:>12} {:>14} {:>14}\n",
        "|S|", "add us", "prove-mem", "verify-mem", "prove-non-mem", "verify-non-mem"
    );
    for r in rows {
        s.push_str(&format!(
            "{:>6} {:>12.1} {:>12.1} {:>12.1} {:>14.1} {:>14.1}\n",
            r.size, r.add_us, r.prove_mem_us, r.verify_mem_us, r.prove_non_mem_us, r.verify_non_mem_us
        ));
    }
    s
}
