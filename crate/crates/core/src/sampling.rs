//! Generative-model oracle with exact sample accounting.
//!
//! Randomness contract: each (s,a) pair owns an independent RNG substream
//! derived from the master seed and the pair index, so the draw sequence a
//! pair sees depends only on how many times that pair has been queried — not
//! on the global interleaving. This makes parallel trials reproducible.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mdp::Mdp;

/// splitmix64 finalizer, used to decorrelate per-pair stream seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

struct PairState {
    rng: ChaCha8Rng,
    count: u64,
}

/// Sampling oracle over a hidden MDP.
///
/// Learners may call [`GenerativeModel::sample`]; they must not inspect the
/// underlying model. Counters live in the oracle so sample-complexity claims
/// are auditable.
pub struct GenerativeModel {
    mdp: Mdp,
    /// flat index per (s,a), aligned with `pair_offset`.
    pairs: Vec<Mutex<PairState>>,
    pair_offset: Vec<usize>,
    total: AtomicU64,
    master_seed: u64,
}

/// Snapshot of the oracle's counters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleBudgetReport {
    /// `per_pair[s][a]` - count per state/action slot.
    pub per_pair: Vec<Vec<u64>>,
    pub per_state: Vec<u64>,
    pub total: u64,
}

impl GenerativeModel {
    pub fn new(mdp: Mdp, master_seed: u64) -> Self {
        let n = mdp.num_states();
        let mut pair_offset = Vec::with_capacity(n + 1);
        let mut flat = 0usize;
        for s in 0..n {
            pair_offset.push(flat);
            flat += mdp.num_actions(s);
        }
        pair_offset.push(flat);
        let pairs = (0..flat)
            .map(|i| {
                Mutex::new(PairState {
                    rng: ChaCha8Rng::seed_from_u64(mix(master_seed ^ mix(i as u64 + 1))),
                    count: 0,
                })
            })
            .collect();
        Self { mdp, pairs, pair_offset, total: AtomicU64::new(0), master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Structure of the hidden model: states, per-state action counts, gamma.
    /// This much is public knowledge in the problem setting.
    pub fn num_states(&self) -> usize {
        self.mdp.num_states()
    }

    pub fn num_actions(&self, s: usize) -> usize {
        self.mdp.num_actions(s)
    }

    pub fn gamma(&self) -> f64 {
        self.mdp.gamma()
    }

    /// Escape hatch for evaluation code (never for learners): the true model.
    pub fn underlying(&self) -> &Mdp {
        &self.mdp
    }

    /// Draw `(s', r(s,a,s'))` with `s' ~ p(.|s,a)`.
    pub fn sample(&self, s: usize, a: usize) -> Result<(usize, f64)> {
        if s >= self.mdp.num_states() || a >= self.mdp.num_actions(s) {
            return Err(Error::InvalidAction { state: s, action: a });
        }
        let idx = self.pair_offset[s] + a;
        let mut pair = self.pairs[idx].lock().expect("pair lock poisoned");
        let u: f64 = pair.rng.random();
        let row = self.mdp.transition_row(s, a);
        // inverse CDF; the last positive entry absorbs the tail residue
        let mut acc = 0.0;
        let mut next = row.len() - 1;
        for (sp, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                next = sp;
                break;
            }
        }
        pair.count += 1;
        self.total.fetch_add(1, Ordering::Relaxed);
        Ok((next, self.mdp.reward_triple(s, a, next)))
    }

    /// Consistent snapshot of all counters. Does not reset.
    pub fn report(&self) -> SampleBudgetReport {
        let n = self.mdp.num_states();
        let mut per_pair = Vec::with_capacity(n);
        let mut per_state = Vec::with_capacity(n);
        let mut total = 0u64;
        for s in 0..n {
            let counts: Vec<u64> = (0..self.mdp.num_actions(s))
                .map(|a| self.pairs[self.pair_offset[s] + a].lock().expect("pair lock").count)
                .collect();
            let subtotal: u64 = counts.iter().sum();
            total += subtotal;
            per_pair.push(counts);
            per_state.push(subtotal);
        }
        SampleBudgetReport { per_pair, per_state, total }
    }

    /// Write the oracle's draw transcript as CSV to `w` while replaying the
    /// given call sequence. Debug aid; samples count as usual.
    pub fn sample_transcribed<W: std::io::Write>(
        &self,
        calls: &[(usize, usize)],
        w: &mut W,
    ) -> Result<()> {
        writeln!(w, "step,s,a,next_state,reward")?;
        for (step, &(s, a)) in calls.iter().enumerate() {
            let (sp, r) = self.sample(s, a)?;
            writeln!(w, "{step},{s},{a},{sp},{r}")?;
        }
        Ok(())
    }
}
