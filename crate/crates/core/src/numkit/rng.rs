//! Seeded, splittable random streams.
//!
//! A stream is identified by a 64-bit key. [`RngStream::split`] derives a
//! child key from the parent key and a label only, never from the parent's
//! position, so sub-streams are reproducible no matter how much the parent
//! has been consumed. The bits come from ChaCha8 keyed by the stream key.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{invalid, Result};
use crate::numkit::Matrix;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Deterministic random stream with labeled sub-streams.
#[derive(Clone, Debug)]
pub struct RngStream {
    key: u64,
    rng: ChaCha8Rng,
}

/// Creates the master stream for `seed`.
pub fn seed_stream(seed: u64) -> RngStream {
    RngStream::new(seed)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::from_key(splitmix64(seed))
    }

    fn from_key(key: u64) -> Self {
        let mut seed = [0u8; 32];
        let mut state = key;
        for chunk in seed.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        Self {
            key,
            rng: ChaCha8Rng::from_seed(seed),
        }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// Independent child stream named by `label`.
    pub fn split(&self, label: &str) -> RngStream {
        let mixed = splitmix64(self.key ^ splitmix64(fnv1a(label.as_bytes())));
        Self::from_key(mixed)
    }

    /// Independent child stream named by an index (epoch, block, ...).
    pub fn split_index(&self, index: u64) -> RngStream {
        self.split(&format!("#{index}"))
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform01(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn std_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Standard Cauchy via `tan(π(U − ½))`.
    pub fn std_cauchy(&mut self) -> f64 {
        (std::f64::consts::PI * (self.uniform01() - 0.5)).tan()
    }

    /// Unit-rate exponential.
    pub fn exp1(&mut self) -> f64 {
        self.rng.sample(Exp1)
    }

    /// Uniform integer in `0..n` (n ≥ 1).
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// Draws from `dist`.
    pub fn draw(&mut self, dist: BaseDistribution) -> f64 {
        match dist {
            BaseDistribution::StdNormal => self.std_normal(),
            BaseDistribution::StdCauchy => self.std_cauchy(),
            BaseDistribution::Uniform01 => self.uniform01(),
        }
    }

    /// A uniformly random permutation of `0..n` (Fisher–Yates).
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.below(i + 1);
            idx.swap(i, j);
        }
        idx
    }
}

impl RngCore for RngStream {
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

/// Elementary laws for [`sample_matrix`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseDistribution {
    StdNormal,
    StdCauchy,
    Uniform01,
}

/// `rows × cols` matrix of i.i.d. draws, filled row by row.
pub fn sample_matrix(
    stream: &mut RngStream,
    dist: BaseDistribution,
    rows: usize,
    cols: usize,
) -> Result<Matrix> {
    if rows == 0 || cols == 0 {
        return Err(invalid("shape", format!("{rows}x{cols} has no entries")));
    }
    let data = (0..rows * cols).map(|_| stream.draw(dist)).collect();
    Ok(Matrix::from_raw(rows, cols, data))
}
