use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Per-chain randomness split into two independent ChaCha streams.
///
/// The sampling stream drives unmask and token draws; the backend stream feeds
/// stochastic backends. Keeping them apart means a drifting backend sees the same
/// noise whatever the guidance does, and replaying its rows leaves the sampling
/// draws untouched.
#[derive(Debug, Clone)]
pub struct ChainRng {
    pub sampling: ChaCha8Rng,
    pub backend: ChaCha8Rng,
}

impl ChainRng {
    pub fn new(seed: u64) -> Self {
        let mut sampling = ChaCha8Rng::seed_from_u64(seed);
        sampling.set_stream(0);
        let mut backend = ChaCha8Rng::seed_from_u64(seed);
        backend.set_stream(1);
        Self { sampling, backend }
    }

    /// Seed `base_seed + chain_index`, wrapping on overflow.
    pub fn for_chain(base_seed: u64, chain_index: u64) -> Self {
        Self::new(base_seed.wrapping_add(chain_index))
    }
}
