//! Counter-based random streams.
//!
//! Every draw is addressed by `(seed, stream, counter)`. The backing generator is
//! ChaCha8 keyed by the seed, with the ChaCha stream id set from the role and the
//! word position set from the counter, so a draw can be recomputed from its
//! address alone. Roles never share a stream: extra draws made by Alice cannot
//! shift what Bob, Eve or the pair source see.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Role tag selecting an independent stream under one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamId {
    Alice,
    Bob,
    Eve,
    /// Quantum authority: measurement outcomes and in-flight collapses.
    Source,
    /// Random message bits for batch runs.
    Message,
}

impl StreamId {
    fn chacha_stream(self) -> u64 {
        match self {
            StreamId::Alice => 1,
            StreamId::Bob => 2,
            StreamId::Eve => 3,
            StreamId::Source => 4,
            StreamId::Message => 5,
        }
    }
}

/// Deterministic random stream positioned at a draw counter.
///
/// Each draw consumes one 64-bit word pair of the ChaCha keystream, so draw
/// `k` always sits at word position `2k`.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    stream: StreamId,
    counter: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream: StreamId) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream.chacha_stream());
        Self {
            seed,
            stream,
            counter: 0,
            rng,
        }
    }

    /// Stream positioned at `counter`.
    pub fn at(seed: u64, stream: StreamId, counter: u64) -> Self {
        let mut s = Self::new(seed, stream);
        s.jump(counter);
        s
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> StreamId {
        self.stream
    }

    /// Index of the next draw.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn jump(&mut self, counter: u64) {
        self.counter = counter;
        self.rng.set_word_pos(u128::from(counter) * 2);
    }

    pub fn next_draw(&mut self) -> u64 {
        self.counter += 1;
        self.rng.next_u64()
    }

    /// Uniform value in `[0, 1)` with 53 bits of precision.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_draw() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_bit(&mut self) -> bool {
        self.next_draw() >> 63 == 1
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        (self.next_draw() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.next_draw()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let word = self.next_draw().to_le_bytes();
            chunk.copy_from_slice(&word[..chunk.len()]);
        }
    }
}

/// Weyl increment used to spread session seeds.
const SESSION_STEP: u64 = 0x9E37_79B9_7F4A_7C15;

/// Seed of the `index`-th session in a batch started from `master`.
///
/// Trial 0 reuses the master seed, so a single-session batch is reproducible
/// with the same `--seed` in every mode. The odd step keeps batches from
/// nearby masters from sharing sessions.
pub fn session_seed(master: u64, index: u64) -> u64 {
    master.wrapping_add(index.wrapping_mul(SESSION_STEP))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_address_same_draw() {
        let mut a = RandomStream::new(42, StreamId::Alice);
        let mut b = RandomStream::new(42, StreamId::Alice);
        let xs: Vec<u64> = (0..16).map(|_| a.next_draw()).collect();
        let ys: Vec<u64> = (0..16).map(|_| b.next_draw()).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn jump_recomputes_draw() {
        let mut seq = RandomStream::new(9, StreamId::Source);
        let draws: Vec<u64> = (0..10).map(|_| seq.next_draw()).collect();
        for (k, d) in draws.iter().enumerate() {
            assert_eq!(RandomStream::at(9, StreamId::Source, k as u64).next_draw(), *d);
        }
        let mut back = RandomStream::new(9, StreamId::Source);
        back.jump(7);
        back.jump(3);
        assert_eq!(back.next_draw(), draws[3]);
        assert_eq!(back.counter(), 4);
    }

    #[test]
    fn streams_differ() {
        let a = RandomStream::new(1, StreamId::Alice).next_draw();
        let b = RandomStream::new(1, StreamId::Bob).next_draw();
        let s = RandomStream::new(2, StreamId::Alice).next_draw();
        assert_ne!(a, b);
        assert_ne!(a, s);
    }

    #[test]
    fn extra_draws_do_not_perturb_other_roles() {
        let mut alice = RandomStream::new(5, StreamId::Alice);
        let mut bob = RandomStream::new(5, StreamId::Bob);
        let reference: Vec<u64> = (0..8).map(|_| bob.next_draw()).collect();
        for _ in 0..100 {
            alice.next_draw();
        }
        let mut bob2 = RandomStream::new(5, StreamId::Bob);
        let again: Vec<u64> = (0..8).map(|_| bob2.next_draw()).collect();
        assert_eq!(reference, again);
    }

    #[test]
    fn unit_draws_in_range() {
        let mut s = RandomStream::new(3, StreamId::Eve);
        for _ in 0..10_000 {
            let u = s.next_unit();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn bit_frequency_is_fair() {
        let mut s = RandomStream::new(11, StreamId::Alice);
        let n = 100_000;
        let ones = (0..n).filter(|_| s.next_bit()).count() as f64;
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((ones - n as f64 / 2.0).abs() < 4.0 * sigma);
    }

    #[test]
    fn fill_bytes_is_deterministic() {
        let mut a = RandomStream::new(8, StreamId::Message);
        let mut b = RandomStream::new(8, StreamId::Message);
        let mut x = [0u8; 13];
        let mut y = [0u8; 13];
        a.fill_bytes(&mut x);
        b.fill_bytes(&mut y);
        assert_eq!(x, y);
        assert_eq!(a.counter(), 2);
    }

    #[test]
    fn nearby_masters_do_not_share_sessions() {
        assert_eq!(session_seed(7, 0), 7);
        let a: std::collections::HashSet<u64> = (0..10_000).map(|i| session_seed(1, i)).collect();
        assert!((0..10_000).all(|i| !a.contains(&session_seed(2, i))));
    }
}
