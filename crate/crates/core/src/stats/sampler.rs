//! Counter-based Monte-Carlo sampling.
//!
//! Samples are drawn in blocks of [`BLOCK`]; block `k` uses stream `k` of a
//! ChaCha8 generator keyed by the seed, so the sample set depends only on
//! `(seed, count)` and never on how blocks are spread over workers.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const BLOCK: u64 = 1024;

/// Default ceiling on the number of samples one estimate may request.
pub const DEFAULT_BUDGET: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sampler {
    pub seed: u64,
    pub count: u64,
    pub budget: u64,
}

impl Sampler {
    pub fn new(seed: u64, count: u64) -> Self {
        Sampler { seed, count, budget: DEFAULT_BUDGET }
    }

    pub fn check(&self) -> Result<()> {
        if self.count > self.budget {
            return Err(Error::SampleBudgetExceeded { requested: self.count, budget: self.budget });
        }
        if self.count == 0 {
            return Err(Error::InvalidParameters("sample count is zero".into()));
        }
        Ok(())
    }

    /// Generator for block `k`.
    pub fn block_rng(&self, k: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k);
        rng
    }

    /// Run `f` once per sample, with `slots` integer counters it may bump.
    /// Counters are summed exactly, so the result is independent of the
    /// number of workers.
    pub fn tally<F>(&self, slots: usize, f: F) -> Result<Vec<u64>>
    where
        F: Fn(&mut ChaCha8Rng, &mut [u64]) + Sync,
    {
        self.check()?;
        let blocks = self.count.div_ceil(BLOCK);
        let counts = (0..blocks)
            .into_par_iter()
            .map(|k| {
                let mut rng = self.block_rng(k);
                let mut local = vec![0u64; slots];
                let len = BLOCK.min(self.count - k * BLOCK);
                for _ in 0..len {
                    f(&mut rng, &mut local);
                }
                local
            })
            .reduce(
                || vec![0u64; slots],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            );
        Ok(counts)
    }
}

impl Sampler {
    /// Like [`Sampler::tally`] with real accumulators. Block sums are added
    /// in block order, so the result does not depend on the worker count.
    pub fn accumulate<F>(&self, slots: usize, f: F) -> Result<Vec<f64>>
    where
        F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
    {
        self.check()?;
        let blocks = self.count.div_ceil(BLOCK);
        let sums: Vec<Vec<f64>> = (0..blocks)
            .into_par_iter()
            .map(|k| {
                let mut rng = self.block_rng(k);
                let mut local = vec![0.0; slots];
                let len = BLOCK.min(self.count - k * BLOCK);
                for _ in 0..len {
                    f(&mut rng, &mut local);
                }
                local
            })
            .collect();
        let mut total = vec![0.0; slots];
        for b in sums {
            total.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        Ok(total)
    }
}

/// A point of `(0,1)`, uniform.
pub fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let x: f64 = rng.gen();
        if x > 0.0 {
            return x;
        }
    }
}

/// Run `f` on a pool of `workers` threads (`0` keeps the current pool).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Binomial proportion and its standard error; an empty count gets the
/// rule-of-three bound `3/N`.
pub fn proportion(hits: u64, count: u64) -> (f64, f64) {
    let n = count as f64;
    let p = hits as f64 / n;
    let se = if hits == 0 { 3.0 / n } else { (p * (1.0 - p) / n).sqrt() };
    (p, se)
}
