//! Deterministic pseudo-random number generation with named substreams.
//!
//! Every stochastic decision a run makes (weight init, minibatch shuffling,
//! learning-rate picks, acceptance draws, random directions) reads from its
//! own substream derived from one master seed, so consuming one stream never
//! perturbs the others.
//!
//! The generator is SplitMix64: a 64-bit counter advanced by the golden-ratio
//! increment `0x9E3779B97F4A7C15`, whose output is the finalizer
//!
//! ```text
//! z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//! z ^= z >> 27; z *= 0x94D049BB133111EB;
//! z ^= z >> 31;
//! ```
//!
//! Substream derivation hashes `(state, purpose)` through the same finalizer:
//! `derived = mix64(state ^ mix64(GAMMA * (purpose_index + 1)))`, and keyed
//! derivation (used for per-epoch shuffles) is
//! `derived = mix64(state ^ mix64(key ^ 0x6A09E667F3BCC909))`.
//! These constants fully define the streams; any implementation that
//! reproduces them reproduces every run bit-exactly.
//!
//! Not cryptographic.

use crate::error::{Error, Result};

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const KEY_SALT: u64 = 0x6A09_E667_F3BC_C909;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Label naming which stochastic decision a substream feeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    Init,
    Shuffle,
    LrPick,
    Accept,
    SsaDirection,
}

impl Purpose {
    fn index(self) -> u64 {
        match self {
            Purpose::Init => 0,
            Purpose::Shuffle => 1,
            Purpose::LrPick => 2,
            Purpose::Accept => 3,
            Purpose::SsaDirection => 4,
        }
    }
}

/// A deterministic random stream. Single-owner; advanced in place.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RngState {
    state: u64,
    draws: u64,
}

impl RngState {
    /// Root state for a run. Any `u64` (including 0) is a legal seed.
    pub fn new_master(seed: u64) -> Self {
        RngState {
            state: seed,
            draws: 0,
        }
    }

    /// Derive the substream for `purpose`. Pure function of `(self.state, purpose)`:
    /// does not advance `self`, and equal inputs give identical streams.
    pub fn substream(&self, purpose: Purpose) -> RngState {
        RngState {
            state: mix64(self.state ^ mix64(GAMMA.wrapping_mul(purpose.index() + 1))),
            draws: 0,
        }
    }

    /// Derive an integer-keyed child stream (e.g. one per epoch). Pure, like
    /// [`RngState::substream`].
    pub fn keyed(&self, key: u64) -> RngState {
        RngState {
            state: mix64(self.state ^ mix64(key ^ KEY_SALT)),
            draws: 0,
        }
    }

    /// Number of raw 64-bit draws consumed so far.
    pub fn draw_count(&self) -> u64 {
        self.draws
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        self.draws += 1;
        mix64(self.state)
    }

    /// Uniform in `[0, 1)` with 53-bit resolution. One draw.
    pub fn uniform01(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `{0..n-1}`. One draw.
    ///
    /// Uses `next_u64() % n`; the modulo bias is below `n / 2^64` and
    /// irrelevant at the set sizes used here.
    pub fn choice(&mut self, n: usize) -> Result<usize> {
        if n == 0 {
            return Err(Error::EmptyChoiceSet);
        }
        Ok((self.next_u64() % n as u64) as usize)
    }

    /// Uniformly random permutation of `{0..n-1}` by Fisher-Yates.
    pub fn shuffle(&mut self, n: usize) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            // choice(i+1) cannot fail: i+1 >= 2
            let j = self.choice(i + 1).expect("non-empty range");
            perm.swap(i, j);
        }
        perm
    }

    /// Standard normal via Box-Muller. Always consumes exactly two draws and
    /// discards the paired variate, keeping stream positions predictable.
    pub fn standard_normal(&mut self) -> f64 {
        // 1 - u in (0, 1] avoids ln(0)
        let u1 = 1.0 - self.uniform01();
        let u2 = self.uniform01();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
