use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seedable generator used for every stochastic draw in the crate.
///
/// ChaCha8 keyed by `seed_from_u64` (the PCG32 expansion documented by
/// `rand_core`), so a `(seed, call sequence)` pair reproduces the same stream
/// on every platform. Standard normals come from the Marsaglia polar method,
/// which produces pairs; the second value is cached.
#[derive(Clone, Debug)]
pub struct StreamRng {
    inner: ChaCha8Rng,
    seed: u64,
    spare: Option<f64>,
}

impl StreamRng {
    pub fn new(seed: u64) -> Self {
        Self { inner: ChaCha8Rng::seed_from_u64(seed), seed, spare: None }
    }

    /// Independent stream for replicate `index` of a sweep seeded by `base`.
    pub fn for_replicate(base: u64, index: u64) -> Self {
        Self::new(replicate_seed(base, index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 32-bit words consumed from the ChaCha keystream so far.
    pub fn word_position(&self) -> u128 {
        self.inner.get_word_pos()
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * f);
                return u * f;
            }
        }
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.normal();
        }
    }
}

impl RngCore for StreamRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// `base ⊕ splitmix64(index)`.
pub fn replicate_seed(base: u64, index: u64) -> u64 {
    base ^ splitmix64(index)
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
