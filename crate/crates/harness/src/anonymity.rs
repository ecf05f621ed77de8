//! `qaat anonymity`: paired-trace experiments on a template scenario.

use std::rc::Rc;

use qaat_core::anonymity::{run_pair, summarize, AnonymityError, AnonymityReport, Experiment};
use qaat_core::crypto::{HashToPrime, PrimeCache};
use qaat_core::sim::{RunOptions, Scenario};

use crate::HarnessError;

#[derive(Debug, Clone, Copy)]
pub struct AnonymityArgs {
    pub experiment: Experiment,
    pub trials: u64,
    /// Pair `k` runs with seed `first_seed + k`.
    pub first_seed: u64,
}

pub fn cmd_anonymity(template: &Scenario, args: AnonymityArgs) -> Result<AnonymityReport, HarnessError> {
    let options = RunOptions { record_trace: true, primes: Some(Rc::new(PrimeCache::new(HashToPrime::default()))) };
    let mut pairs = Vec::with_capacity(args.trials as usize);
    for k in 0..args.trials {
        let pair = run_pair(template, args.experiment, args.first_seed.wrapping_add(k), &options).map_err(|e| match e {
            AnonymityError::Scenario(e) => HarnessError::Schema(e.to_string()),
            AnonymityError::Template(m) => HarnessError::Usage(m.to_string()),
        })?;
        pairs.push(pair);
    }
    Ok(summarize(&pairs))
}
