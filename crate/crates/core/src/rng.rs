//! Addressable random streams derived from a seed and a structured label.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// What a stream is used for, plus the queue/server it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StreamId {
    Arrival(usize),
    Service(usize),
    ExploreCoin,
    ExploreChoice,
    WorkloadArrival(usize),
    WorkloadService(usize),
    Replication,
    /// Free-form label for callers outside the engine.
    Custom(u16, u32),
}

impl StreamId {
    fn encode(self) -> u64 {
        let (tag, a): (u64, u64) = match self {
            StreamId::Arrival(i) => (1, i as u64),
            StreamId::Service(i) => (2, i as u64),
            StreamId::ExploreCoin => (3, 0),
            StreamId::ExploreChoice => (4, 0),
            StreamId::WorkloadArrival(i) => (5, i as u64),
            StreamId::WorkloadService(i) => (6, i as u64),
            StreamId::Replication => (7, 0),
            StreamId::Custom(t, x) => (0x100 + t as u64, x as u64),
        };
        (tag << 40) | (a & 0xff_ffff_ffff)
    }
}

/// A `(seed, stream_id)` pair. Same pair, same numbers, on every platform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamHandle {
    pub seed: u64,
    pub stream_id: StreamId,
}

impl StreamHandle {
    pub fn new(seed: u64, stream_id: StreamId) -> Self {
        Self { seed, stream_id }
    }

    pub fn tape(self) -> Tape {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id.encode());
        Tape { rng, cursor: 0 }
    }
}

/// Random-access sequence of 64-bit words; sequential reads are cheap, seeks
/// cost one block refill.
#[derive(Debug, Clone)]
pub struct Tape {
    rng: ChaCha8Rng,
    cursor: u64,
}

impl Tape {
    /// Word at absolute position `index`.
    pub fn word(&mut self, index: u64) -> u64 {
        if index != self.cursor {
            self.rng.set_word_pos(index as u128 * 2);
        }
        self.cursor = index + 1;
        self.rng.next_u64()
    }

    /// Uniform on [0, 1) at position `index`.
    pub fn uniform(&mut self, index: u64) -> f64 {
        to_unit(self.word(index))
    }

    /// Next uniform after the last one read.
    pub fn next_uniform(&mut self) -> f64 {
        let i = self.cursor;
        self.uniform(i)
    }

    pub fn next_word(&mut self) -> u64 {
        let i = self.cursor;
        self.word(i)
    }
}

#[inline]
pub fn to_unit(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Seed of replication `rep` under a base seed.
pub fn replication_seed(base: u64, rep: u64) -> u64 {
    StreamHandle::new(base, StreamId::Replication).tape().word(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn random_access_matches_sequential() {
        let h = StreamHandle::new(7, StreamId::Service(2));
        let mut a = h.tape();
        let seq: Vec<u64> = (0..100).map(|_| a.next_word()).collect();
        let mut b = h.tape();
        for idx in [57u64, 3, 99, 0, 58, 59] {
            assert_eq!(b.word(idx), seq[idx as usize]);
        }
    }

    #[test]
    fn streams_differ() {
        let x = StreamHandle::new(1, StreamId::Arrival(0)).tape().word(0);
        let y = StreamHandle::new(1, StreamId::Arrival(1)).tape().word(0);
        let z = StreamHandle::new(2, StreamId::Arrival(0)).tape().word(0);
        assert!(x != y && x != z);
    }

    #[test]
    fn unit_range() {
        assert_eq!(to_unit(0), 0.0);
        assert!(to_unit(u64::MAX) < 1.0);
    }
}
