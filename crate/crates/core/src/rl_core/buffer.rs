//! Fixed-capacity FIFO replay ring with uniform without-replacement sampling.

use std::io::Write;

use rand::seq::index::sample as index_sample;
use rand_chacha::ChaCha8Rng;

use super::Transition;

pub const DEFAULT_CAPACITY: usize = 2000;

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    ring: Vec<Transition>,
    inserted: u64,
}

impl Default for ReplayBuffer {
    fn default() -> Self {
        Self::new(DEFAULT_CAPACITY)
    }
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self {
            capacity,
            ring: Vec::with_capacity(capacity),
            inserted: 0,
        }
    }

    pub fn insert(&mut self, t: Transition) {
        if self.ring.len() < self.capacity {
            self.ring.push(t);
        } else {
            let slot = (self.inserted % self.capacity as u64) as usize;
            self.ring[slot] = t;
        }
        self.inserted += 1;
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    /// Uniform sample of `min(n, len)` distinct transitions.
    pub fn sample<'a>(&'a self, rng: &mut ChaCha8Rng, n: usize) -> Vec<&'a Transition> {
        let k = n.min(self.ring.len());
        if k == 0 {
            return Vec::new();
        }
        index_sample(rng, self.ring.len(), k)
            .into_iter()
            .map(|i| &self.ring[i])
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.ring.iter()
    }

    /// One JSON object per line, insertion order not guaranteed once the
    /// ring has wrapped.
    pub fn export_jsonl<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for t in &self.ring {
            serde_json::to_writer(&mut *out, t)?;
            writeln!(out)?;
        }
        Ok(())
    }
}
