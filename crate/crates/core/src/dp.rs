//! Laplace noise, threshold-passing samplers, seeded streams, and the
//! per-level privacy budget ledger.

use alloc::vec::Vec;

use rand::distr::{Distribution, Open01, OpenClosed01};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Binomial;

use crate::{Error, Result};

/// Count queries have global sensitivity 1.
pub const COUNT_SENSITIVITY: f64 = 1.0;

/// Default threshold multiplier: θ is two standard deviations of the
/// per-level Laplace noise.
pub const DEFAULT_THETA_MULTIPLIER: f64 = 2.0;

/// Total budget ε, tree height h, and the quantities derived from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyParams {
    epsilon: f64,
    height: u32,
    theta_multiplier: f64,
    threshold: f64,
}

impl PrivacyParams {
    /// `ε > 0`, `h ≥ 1`, and the default threshold multiplier.
    pub fn new(epsilon: f64, height: u32) -> Result<Self> {
        Self::with_theta_multiplier(epsilon, height, DEFAULT_THETA_MULTIPLIER)
    }

    pub fn with_theta_multiplier(epsilon: f64, height: u32, theta_multiplier: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::param("epsilon", "must be a positive finite number"));
        }
        if height == 0 {
            return Err(Error::param("height", "must be at least 1"));
        }
        if !(theta_multiplier.is_finite() && theta_multiplier > 0.0) {
            return Err(Error::param("theta multiplier", "must be a positive finite number"));
        }
        let per_level = epsilon / height as f64;
        Ok(PrivacyParams {
            epsilon,
            height,
            theta_multiplier,
            threshold: theta_multiplier * core::f64::consts::SQRT_2 / per_level,
        })
    }

    /// Replaces θ with an explicit value (≥ 0). Only meant for degenerate
    /// noise-free runs and experiments on the threshold itself.
    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        if !(threshold.is_finite() && threshold >= 0.0) {
            return Err(Error::param("threshold", "must be a non-negative finite number"));
        }
        self.threshold = threshold;
        Ok(self)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn theta_multiplier(&self) -> f64 {
        self.theta_multiplier
    }

    /// ε̄ = ε / h.
    pub fn per_level(&self) -> f64 {
        self.epsilon / self.height as f64
    }

    /// Laplace scale λ = Δf / ε̄ for one count at one level.
    pub fn noise_scale(&self) -> f64 {
        COUNT_SENSITIVITY / self.per_level()
    }

    /// θ = m_θ·√2 / ε̄ unless overridden.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// p_θ = exp(−ε̄θ) / 2, the chance that pure noise on an empty count reaches θ.
    pub fn pass_prob(&self) -> f64 {
        libm::exp(-self.per_level() * self.threshold) / 2.0
    }
}

/// Source of additive Laplace noise.
pub trait NoiseSource {
    fn laplace(&mut self, scale: f64) -> f64;
}

/// Inverse-transform Laplace sampler over any RNG.
#[derive(Debug, Clone)]
pub struct LaplaceNoise<R>(pub R);

impl<R: Rng> NoiseSource for LaplaceNoise<R> {
    fn laplace(&mut self, scale: f64) -> f64 {
        sample_laplace(&mut self.0, scale)
    }
}

/// Noise source that always returns 0. Used for noise-free reference runs.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    fn laplace(&mut self, _scale: f64) -> f64 {
        0.0
    }
}

/// Laplace(0, scale) by inverse transform: `u` uniform in (−½, ½),
/// `x = −scale · sign(u) · ln(1 − 2|u|)`.
pub fn sample_laplace<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> f64 {
    let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
    laplace_quantile(u, scale)
}

pub(crate) fn laplace_quantile(u: f64, scale: f64) -> f64 {
    let mag = -scale * libm::log1p(-2.0 * u.abs());
    if u < 0.0 {
        -mag
    } else {
        mag
    }
}

/// `true_count + Laplace(scale)`.
pub fn laplace_noisy_count<N: NoiseSource + ?Sized>(
    true_count: u64,
    scale: f64,
    noise: &mut N,
) -> Result<f64> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::param("noise scale", "must be a positive finite number"));
    }
    Ok(true_count as f64 + noise.laplace(scale))
}

/// Number of `m` empty candidates whose noisy count would pass θ:
/// a draw from Binomial(m, p_θ).
pub fn sample_pass_count<R: Rng + ?Sized>(m: u64, params: &PrivacyParams, rng: &mut R) -> u64 {
    let p = params.pass_prob();
    if m == 0 || p <= 0.0 {
        return 0;
    }
    // p ≤ 1/2 by construction, so the parameters are always valid.
    Binomial::new(m, p).map(|b| b.sample(rng)).unwrap_or(0)
}

/// A noisy count conditioned on having passed θ:
/// CDF `1 − exp(ε̄θ − ε̄x)` for `x ≥ θ`, sampled as `θ − ln(1 − u)/ε̄`.
pub fn sample_passing_noisy_count<R: Rng + ?Sized>(params: &PrivacyParams, rng: &mut R) -> f64 {
    // 1 − u with u in [0, 1) is a draw from (0, 1].
    let one_minus_u: f64 = rng.sample(OpenClosed01);
    passing_quantile(params, 1.0 - one_minus_u)
}

pub(crate) fn passing_quantile(params: &PrivacyParams, u: f64) -> f64 {
    params.threshold() - libm::log1p(-u) / params.per_level()
}

/// Master seed plus the rule that derives one independent ChaCha stream per
/// tree node from the node's root path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomSource {
    master_seed: u64,
}

impl RandomSource {
    pub fn new(master_seed: u64) -> Self {
        RandomSource { master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Path key of the virtual root.
    pub fn root_key() -> u64 {
        mix64(0x243f_6a88_85a3_08d3)
    }

    /// Path key of the child labelled `location` under a node with `parent_key`.
    pub fn child_key(parent_key: u64, location: u32) -> u64 {
        mix64(parent_key.rotate_left(17) ^ mix64(location as u64 + 1))
    }

    /// The stream owned by the node with `path_key`.
    pub fn stream(&self, path_key: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(path_key);
        rng
    }

    /// A stream for a named non-tree task (workloads, data generation).
    pub fn named(&self, name: &str) -> ChaCha8Rng {
        let key = name
            .bytes()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
        self.stream(mix64(key) | 1 << 63)
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One tree level's charge. All nodes on a level hold disjoint trajectory
/// sets, so the level costs ε̄ once no matter how many partitions it has.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelCharge {
    pub level: u32,
    pub epsilon: f64,
    pub partitions: usize,
}

/// Uniform per-level allocation of the total budget, composed sequentially
/// across levels. Spending is tracked in whole shares of ε/h so that a fully
/// spent ledger reports exactly ε.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetLedger {
    total: f64,
    height: u32,
    charges: Vec<LevelCharge>,
}

impl BudgetLedger {
    pub fn new(params: &PrivacyParams) -> Self {
        BudgetLedger {
            total: params.epsilon(),
            height: params.height(),
            charges: Vec::with_capacity(params.height() as usize),
        }
    }

    /// The full allocation: every level 1..=h at ε̄.
    pub fn plan(params: &PrivacyParams) -> Self {
        let mut ledger = Self::new(params);
        for level in 1..=params.height() {
            ledger.charge_level(level, 0);
        }
        ledger
    }

    /// Records that `level` was built over `partitions` disjoint nodes.
    ///
    /// Panics if levels are charged out of order or beyond h.
    pub fn charge_level(&mut self, level: u32, partitions: usize) {
        assert_eq!(level as usize, self.charges.len() + 1, "levels are charged in order");
        assert!(level <= self.height, "level {level} exceeds height {}", self.height);
        let epsilon = self.per_level();
        self.charges.push(LevelCharge {
            level,
            epsilon,
            partitions,
        });
    }

    pub fn per_level(&self) -> f64 {
        self.total / self.height as f64
    }

    pub fn charges(&self) -> &[LevelCharge] {
        &self.charges
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Budget consumed so far: `levels_charged / h · ε`.
    pub fn spent(&self) -> f64 {
        let levels = self.charges.len() as u32;
        if levels == self.height {
            self.total
        } else {
            self.total * levels as f64 / self.height as f64
        }
    }

    pub fn remaining(&self) -> f64 {
        self.total - self.spent()
    }

    /// Every level charged exactly once at ε̄ and nothing beyond ε.
    pub fn is_balanced(&self) -> bool {
        self.charges.len() == self.height as usize
            && self
                .charges
                .iter()
                .enumerate()
                .all(|(i, c)| c.level as usize == i + 1 && c.epsilon == self.per_level())
            && self.spent() == self.total
    }
}
