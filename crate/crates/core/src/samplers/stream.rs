use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Counter-addressable random stream: `(key, stream_id, counter)` pins the
/// output exactly, independent of which thread consumes it.
#[derive(Clone, Debug)]
pub struct RandomStream {
    rng: ChaCha8Rng,
    key: u64,
    stream_id: u64,
}

/// Packs `(chain, block, index)` into a stream id. `index` must fit in 48 bits.
pub fn derive_stream_id(chain: u64, block: u64, index: u64) -> u64 {
    assert!(chain < 256 && block < 256, "chain and block ids are 8-bit");
    assert!(index < 1 << 48, "stream index exceeds 48 bits");
    (chain << 56) | (block << 48) | index
}

impl RandomStream {
    pub fn new(key: u64, stream_id: u64) -> Self {
        Self::at(key, stream_id, 0)
    }

    pub fn at(key: u64, stream_id: u64, counter: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(stream_id);
        rng.set_word_pos(counter as u128);
        Self { rng, key, stream_id }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u64 {
        self.rng.get_word_pos() as u64
    }

    /// Uniform on the open interval (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Exponential with rate 1.
    #[inline]
    pub fn exponential(&mut self) -> f64 {
        -self.uniform().ln()
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
