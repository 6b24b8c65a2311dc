//! Synthetic trajectory corpora with a transit-like shape: short records
//! dominate, a few locations are far busier than the rest, and commuters
//! repeat the same few stations often enough to be mined back out.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Open01, Zipf};

use crate::dp::RandomSource;
use crate::model::{LocationId, TrajectoryDb};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub universe_size: usize,
    pub records: usize,
    pub avg_len: f64,
    pub max_len: usize,
    pub planted_routes: usize,
    /// Length of each planted route.
    pub route_len: usize,
    /// Share of records that cycle through a planted route.
    pub planted_fraction: f64,
    /// Zipf exponent for how often each route is chosen; 0 is uniform.
    pub route_skew: f64,
    /// Zipf exponent for background locations; 0 is uniform.
    pub zipf_skew: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            universe_size: 1012,
            records: 120_000,
            avg_len: 6.7,
            max_len: 121,
            planted_routes: 0,
            route_len: 3,
            planted_fraction: 0.5,
            route_skew: 1.0,
            zipf_skew: 1.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.universe_size == 0 {
            return Err(Error::param("universe size", "must be at least 1"));
        }
        if self.universe_size > u32::MAX as usize {
            return Err(Error::param("universe size", "does not fit 32-bit location ids"));
        }
        if self.max_len == 0 {
            return Err(Error::param("max length", "must be at least 1"));
        }
        if !(self.avg_len >= 1.0 && self.avg_len <= self.max_len as f64) {
            return Err(Error::param(
                "average length",
                format!("need 1 ≤ avg_len ≤ max_len, got {} with max {}", self.avg_len, self.max_len),
            ));
        }
        if !(self.zipf_skew >= 0.0 && self.zipf_skew.is_finite()) {
            return Err(Error::param("zipf skew", "must be finite and ≥ 0"));
        }
        if !(self.route_skew >= 0.0 && self.route_skew.is_finite()) {
            return Err(Error::param("route skew", "must be finite and ≥ 0"));
        }
        if !(0.0..=1.0).contains(&self.planted_fraction) {
            return Err(Error::param("planted fraction", "must lie in [0, 1]"));
        }
        if self.planted_routes > 0 {
            if self.route_len == 0 {
                return Err(Error::param("route length", "must be at least 1"));
            }
            if self.route_len > self.universe_size {
                return Err(Error::param("route length", "routes use distinct locations, so must be ≤ |L|"));
            }
            if distinct_routes(self.universe_size, self.route_len) < self.planted_routes as u128 {
                return Err(Error::param("planted routes", "more routes than distinct location sequences"));
            }
        }
        Ok(())
    }
}

/// |L|·(|L|−1)·…·(|L|−len+1), saturating.
fn distinct_routes(universe: usize, len: usize) -> u128 {
    (0..len).fold(1u128, |acc, i| acc.saturating_mul((universe - i) as u128))
}

/// Generated records together with the routes that were planted in them.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub db: TrajectoryDb,
    pub routes: Vec<Vec<LocationId>>,
}

/// Trip length on `[1, max]` with a geometric tail whose mean is exactly the
/// requested one. Means above `(max+1)/2` mirror the distribution.
#[derive(Debug, Clone, Copy)]
struct LengthModel {
    max: usize,
    /// `None` is uniform on `[1, max]`.
    q: Option<f64>,
    mirrored: bool,
}

fn truncated_mean(q: f64, max: usize) -> f64 {
    let qm = libm::pow(q, max as f64);
    1.0 / (1.0 - q) - max as f64 * qm / (1.0 - qm)
}

impl LengthModel {
    fn new(avg: f64, max: usize) -> Self {
        let mid = (max as f64 + 1.0) / 2.0;
        if (avg - mid).abs() < 1e-9 {
            return LengthModel { max, q: None, mirrored: false };
        }
        let (target, mirrored) = if avg > mid {
            (max as f64 + 1.0 - avg, true)
        } else {
            (avg, false)
        };
        // mean rises with q from 1 at q = 0 toward mid as q → 1
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let q = 0.5 * (lo + hi);
            if q >= 1.0 || truncated_mean(q, max) > target {
                hi = q;
            } else {
                lo = q;
            }
        }
        LengthModel {
            max,
            q: Some(0.5 * (lo + hi)),
            mirrored,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let len = match self.q {
            None => rng.random_range(1..=self.max),
            Some(q) if q <= 0.0 => 1,
            Some(q) => {
                let u: f64 = Open01.sample(rng);
                let tail = 1.0 - libm::pow(q, self.max as f64);
                let k = libm::floor(libm::log(1.0 - u * tail) / libm::log(q)) as usize;
                1 + k.min(self.max - 1)
            }
        };
        if self.mirrored {
            self.max + 1 - len
        } else {
            len
        }
    }

    #[cfg(test)]
    fn mean(&self) -> f64 {
        let base = match self.q {
            None => (self.max as f64 + 1.0) / 2.0,
            Some(q) if q <= 0.0 => 1.0,
            Some(q) => truncated_mean(q, self.max),
        };
        if self.mirrored {
            self.max as f64 + 1.0 - base
        } else {
            base
        }
    }
}

/// Draws a corpus. Every record gets a length from the truncated geometric
/// model. A planted record picks a route (Zipf over route rank) and cycles
/// through it for its whole length, so a record shorter than the route is a
/// prefix of it. Other records draw every location from a Zipf law over the
/// universe.
pub fn generate(config: &SynthConfig) -> Result<SyntheticCorpus> {
    config.validate()?;
    let mut rng = RandomSource::new(config.seed).named("synthetic-corpus");
    let lengths = LengthModel::new(config.avg_len, config.max_len);
    let zipf = Zipf::new(config.universe_size as f64, config.zipf_skew)
        .map_err(|e| Error::param("zipf skew", format!("{e}")))?;

    let mut routes: Vec<Vec<LocationId>> = Vec::with_capacity(config.planted_routes);
    let mut seen = BTreeSet::new();
    while routes.len() < config.planted_routes {
        let picks = rand::seq::index::sample(&mut rng, config.universe_size, config.route_len);
        let route: Vec<LocationId> = picks.into_iter().map(|l| LocationId(l as u32)).collect();
        if seen.insert(route.clone()) {
            routes.push(route);
        }
    }

    let route_pick = match routes.len() {
        0 => None,
        n => Some(Zipf::new(n as f64, config.route_skew).map_err(|e| Error::param("route skew", format!("{e}")))?),
    };

    let mut db = TrajectoryDb::new();
    let mut buf = Vec::with_capacity(config.max_len);
    for _ in 0..config.records {
        let len = lengths.sample(&mut rng);
        buf.clear();
        match &route_pick {
            Some(pick) if rng.random::<f64>() < config.planted_fraction => {
                let route = &routes[pick.sample(&mut rng) as usize - 1];
                buf.extend(route.iter().cycle().take(len));
            }
            _ => buf.extend((0..len).map(|_| LocationId((zipf.sample(&mut rng) as usize - 1) as u32))),
        }
        db.push_n(&buf, 1);
    }
    Ok(SyntheticCorpus { db, routes })
}
