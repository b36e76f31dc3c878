//! Popularity-based 3D-model cache at the edge server.
//!
//! Models are identified by target-area fingerprint. Admission evicts less
//! popular residents only when doing so frees enough room for the newcomer.

use rand::Rng;
use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

pub const DEFAULT_ALPHA: f64 = 0.8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CacheError {
    #[error("model {model_id} needs {size_units} units but the cache holds {capacity_units}")]
    OversizeEntry {
        model_id: ModelId,
        size_units: u64,
        capacity_units: u64,
    },
    #[error("model {0} has zero size")]
    ZeroSize(ModelId),
    #[error("model {0} has a negative or non-finite popularity")]
    Popularity(ModelId),
    #[error("zipf stream needs n >= 1 and alpha > 0 (got n = {n}, alpha = {alpha})")]
    ZipfParams { n: usize, alpha: f64 },
    #[error("request for unknown model {0}")]
    UnknownModel(ModelId),
    #[error("duplicate model {0}")]
    DuplicateModel(ModelId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelId(pub u64);

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "model:{:016x}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub model_id: ModelId,
    pub size_units: u64,
    pub popularity: f64,
}

impl ModelEntry {
    pub fn validate(&self) -> Result<(), CacheError> {
        if self.size_units == 0 {
            return Err(CacheError::ZeroSize(self.model_id));
        }
        if !(self.popularity >= 0.0 && self.popularity.is_finite()) {
            return Err(CacheError::Popularity(self.model_id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup {
    Hit,
    Miss,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Admission {
    Admitted { evicted: Vec<ModelId> },
    AlreadyCached,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Resident {
    entry: ModelEntry,
    inserted: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheState {
    capacity_units: u64,
    used_units: u64,
    entries: BTreeMap<ModelId, Resident>,
    hit_count: u64,
    miss_count: u64,
    next_seq: u64,
}

impl CacheState {
    pub fn new(capacity_units: u64) -> Self {
        CacheState {
            capacity_units,
            used_units: 0,
            entries: BTreeMap::new(),
            hit_count: 0,
            miss_count: 0,
            next_seq: 0,
        }
    }

    pub fn capacity_units(&self) -> u64 {
        self.capacity_units
    }

    pub fn used_units(&self) -> u64 {
        self.used_units
    }

    pub fn hit_count(&self) -> u64 {
        self.hit_count
    }

    pub fn miss_count(&self) -> u64 {
        self.miss_count
    }

    pub fn contains(&self, id: ModelId) -> bool {
        self.entries.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Resident ids in ascending order.
    pub fn model_ids(&self) -> Vec<ModelId> {
        self.entries.keys().copied().collect()
    }

    pub fn entries(&self) -> impl Iterator<Item = &ModelEntry> {
        self.entries.values().map(|r| &r.entry)
    }

    /// Exact id match against the resident set.
    pub fn lookup(&mut self, id: ModelId) -> Lookup {
        if self.entries.contains_key(&id) {
            self.hit_count += 1;
            Lookup::Hit
        } else {
            self.miss_count += 1;
            Lookup::Miss
        }
    }

    /// Updates the popularity score of a resident; returns false when absent.
    pub fn set_popularity(&mut self, id: ModelId, popularity: f64) -> bool {
        match self.entries.get_mut(&id) {
            Some(r) => {
                r.entry.popularity = popularity;
                true
            }
            None => false,
        }
    }

    /// Inserts `entry` if it fits, otherwise evicts strictly less popular
    /// residents, least popular and oldest first, as long as that frees
    /// enough room. Nothing is evicted when the newcomer would still not fit.
    pub fn admit(&mut self, entry: ModelEntry) -> Result<Admission, CacheError> {
        entry.validate()?;
        if entry.size_units > self.capacity_units {
            return Err(CacheError::OversizeEntry {
                model_id: entry.model_id,
                size_units: entry.size_units,
                capacity_units: self.capacity_units,
            });
        }
        if self.entries.contains_key(&entry.model_id) {
            return Ok(Admission::AlreadyCached);
        }
        let mut free = self.capacity_units - self.used_units;
        let mut victims = Vec::new();
        if free < entry.size_units {
            let mut order: Vec<&Resident> = self.entries.values().collect();
            order.sort_by(|a, b| {
                a.entry
                    .popularity
                    .total_cmp(&b.entry.popularity)
                    .then(a.inserted.cmp(&b.inserted))
            });
            for r in order {
                if free >= entry.size_units || r.entry.popularity >= entry.popularity {
                    break;
                }
                free += r.entry.size_units;
                victims.push(r.entry.model_id);
            }
            if free < entry.size_units {
                return Ok(Admission::Rejected);
            }
        }
        for id in &victims {
            let r = self.entries.remove(id).expect("victim is resident");
            self.used_units -= r.entry.size_units;
        }
        self.used_units += entry.size_units;
        self.entries.insert(
            entry.model_id,
            Resident {
                entry,
                inserted: self.next_seq,
            },
        );
        self.next_seq += 1;
        Ok(Admission::Admitted { evicted: victims })
    }
}

/// `Σ_{i=1..n} i^(-alpha)`.
pub fn generalized_harmonic(n: usize, alpha: f64) -> f64 {
    (1..=n).map(|i| (i as f64).powf(-alpha)).sum()
}

/// Probability mass of the `c` most popular ranks.
pub fn top_mass(c: usize, n: usize, alpha: f64) -> f64 {
    generalized_harmonic(c.min(n), alpha) / generalized_harmonic(n, alpha)
}

/// Model id of Zipf rank `rank` (1-based) in the synthetic catalogue.
pub fn rank_model(rank: usize) -> ModelId {
    ModelId(rank as u64 - 1)
}

/// Catalogue of `n` unit-size models with Zipf rank weights as popularity.
pub fn zipf_catalogue(n: usize, alpha: f64) -> Vec<ModelEntry> {
    (1..=n)
        .map(|rank| ModelEntry {
            model_id: rank_model(rank),
            size_units: 1,
            popularity: (rank as f64).powf(-alpha),
        })
        .collect()
}

/// I.i.d. requests with `P(rank i) ∝ i^(-alpha)`, mapped through
/// [`rank_model`].
pub fn zipf_requests<R: Rng + ?Sized>(
    n: usize,
    alpha: f64,
    length: usize,
    rng: &mut R,
) -> Result<Vec<ModelId>, CacheError> {
    if n == 0 || !(alpha > 0.0 && alpha.is_finite()) {
        return Err(CacheError::ZipfParams { n, alpha });
    }
    let dist = Zipf::new(n as f64, alpha).map_err(|_| CacheError::ZipfParams { n, alpha })?;
    Ok((0..length)
        .map(|_| rank_model(dist.sample(rng) as usize))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopularityMode {
    /// Scores supplied with the catalogue.
    #[default]
    Static,
    /// Score is the running request count of each model.
    History,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheReport {
    pub requests: u64,
    pub hits: u64,
    pub hit_ratio: f64,
    pub warmup: u64,
    /// Hit ratio over the requests after the first `warmup`.
    pub steady_hit_ratio: f64,
    pub final_contents: Vec<ModelId>,
}

/// Replays a request stream: look up, and admit on a miss.
pub fn simulate_cache(
    capacity_units: u64,
    models: &[ModelEntry],
    requests: &[ModelId],
    mode: PopularityMode,
    warmup: usize,
) -> Result<CacheReport, CacheError> {
    let mut catalogue = BTreeMap::new();
    for m in models {
        m.validate()?;
        if catalogue.insert(m.model_id, *m).is_some() {
            return Err(CacheError::DuplicateModel(m.model_id));
        }
    }
    let mut cache = CacheState::new(capacity_units);
    let mut counts: BTreeMap<ModelId, u64> = BTreeMap::new();
    let mut steady_hits = 0u64;
    for (t, &id) in requests.iter().enumerate() {
        let mut entry = *catalogue.get(&id).ok_or(CacheError::UnknownModel(id))?;
        let seen = counts.entry(id).or_insert(0);
        *seen += 1;
        if mode == PopularityMode::History {
            entry.popularity = *seen as f64;
            cache.set_popularity(id, entry.popularity);
        }
        match cache.lookup(id) {
            Lookup::Hit => {
                if t >= warmup {
                    steady_hits += 1;
                }
            }
            Lookup::Miss => match cache.admit(entry) {
                Ok(_) | Err(CacheError::OversizeEntry { .. }) => {}
                Err(e) => return Err(e),
            },
        }
    }
    let requests_n = requests.len() as u64;
    let steady_n = requests.len().saturating_sub(warmup) as u64;
    let ratio = |h: u64, n: u64| if n == 0 { 0.0 } else { h as f64 / n as f64 };
    Ok(CacheReport {
        requests: requests_n,
        hits: cache.hit_count(),
        hit_ratio: ratio(cache.hit_count(), requests_n),
        warmup: warmup.min(requests.len()) as u64,
        steady_hit_ratio: ratio(steady_hits, steady_n),
        final_contents: cache.model_ids(),
    })
}

/// One CSV line of a hit-ratio report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRow {
    pub capacity: u64,
    pub alpha: f64,
    pub n: usize,
    pub requests: u64,
    pub hit_ratio: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn entry(id: u64, size: u64, pop: f64) -> ModelEntry {
        ModelEntry {
            model_id: ModelId(id),
            size_units: size,
            popularity: pop,
        }
    }

    #[test]
    fn lookup_basics() {
        let mut c = CacheState::new(4);
        assert_eq!(c.lookup(ModelId(1)), Lookup::Miss);
        c.admit(entry(1, 1, 1.0)).unwrap();
        assert_eq!(c.lookup(ModelId(1)), Lookup::Hit);
        assert_eq!((c.hit_count(), c.miss_count()), (1, 1));
    }

    #[test]
    fn admission_replay() {
        // capacity 3: hand-tracked contents after each step
        let mut c = CacheState::new(3);
        assert_eq!(
            c.admit(entry(1, 1, 0.5)).unwrap(),
            Admission::Admitted { evicted: vec![] }
        );
        assert_eq!(
            c.admit(entry(2, 2, 0.9)).unwrap(),
            Admission::Admitted { evicted: vec![] }
        );
        assert_eq!(c.used_units(), 3);
        // less popular than every resident
        assert_eq!(c.admit(entry(3, 1, 0.1)).unwrap(), Admission::Rejected);
        // beats model 1 only, which frees exactly one unit
        assert_eq!(
            c.admit(entry(4, 1, 0.7)).unwrap(),
            Admission::Admitted {
                evicted: vec![ModelId(1)]
            }
        );
        assert_eq!(c.model_ids(), vec![ModelId(2), ModelId(4)]);
        assert_eq!(c.lookup(ModelId(1)), Lookup::Miss);
        // needs two units but only model 4 is less popular: nothing evicted
        assert_eq!(c.admit(entry(5, 2, 0.8)).unwrap(), Admission::Rejected);
        assert_eq!(c.model_ids(), vec![ModelId(2), ModelId(4)]);
        // beats both
        assert_eq!(
            c.admit(entry(6, 3, 1.0)).unwrap(),
            Admission::Admitted {
                evicted: vec![ModelId(4), ModelId(2)]
            }
        );
        assert_eq!(c.used_units(), 3);
        assert_eq!(c.admit(entry(6, 3, 1.0)).unwrap(), Admission::AlreadyCached);
    }

    #[test]
    fn eviction_ties_go_to_oldest() {
        let mut c = CacheState::new(2);
        c.admit(entry(7, 1, 0.3)).unwrap();
        c.admit(entry(2, 1, 0.3)).unwrap();
        assert_eq!(
            c.admit(entry(9, 1, 0.4)).unwrap(),
            Admission::Admitted {
                evicted: vec![ModelId(7)]
            }
        );
    }

    #[test]
    fn oversize_and_invalid_entries() {
        let mut c = CacheState::new(2);
        assert!(matches!(
            c.admit(entry(1, 3, 1.0)),
            Err(CacheError::OversizeEntry { .. })
        ));
        assert_eq!(
            c.admit(entry(1, 0, 1.0)),
            Err(CacheError::ZeroSize(ModelId(1)))
        );
        assert_eq!(
            c.admit(entry(1, 1, -1.0)),
            Err(CacheError::Popularity(ModelId(1)))
        );
    }

    #[test]
    fn zipf_single_model() {
        let reqs = zipf_requests(1, 0.8, 500, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(reqs.iter().all(|&m| m == ModelId(0)));
        assert!(zipf_requests(0, 0.8, 5, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
        assert!(zipf_requests(5, 0.0, 5, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn zipf_large_alpha_concentrates() {
        let reqs = zipf_requests(50, 5.0, 20_000, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let freq = reqs.iter().filter(|&&m| m == ModelId(0)).count() as f64 / reqs.len() as f64;
        let p = 1.0 / generalized_harmonic(50, 5.0);
        assert!(p > 0.96);
        let sigma = (p * (1.0 - p) / reqs.len() as f64).sqrt();
        assert!((freq - p).abs() <= 3.0 * sigma, "{freq} vs {p}");
    }

    #[test]
    fn zipf_rank_one_frequency() {
        let n = 100;
        let len = 100_000;
        let reqs = zipf_requests(n, 0.8, len, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let mut counts = vec![0usize; n];
        for m in &reqs {
            counts[m.0 as usize] += 1;
        }
        let h = generalized_harmonic(n, 0.8);
        for rank in [1usize, 2, 10] {
            let p = (rank as f64).powf(-0.8) / h;
            let freq = counts[rank - 1] as f64 / len as f64;
            let sigma = (p * (1.0 - p) / len as f64).sqrt();
            assert!(
                (freq - p).abs() <= 3.0 * sigma,
                "rank {rank}: {freq} vs {p}"
            );
        }
    }

    #[test]
    fn simulate_edge_capacities() {
        let models = zipf_catalogue(20, 0.8);
        let reqs = zipf_requests(20, 0.8, 5_000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let full = simulate_cache(20, &models, &reqs, PopularityMode::Static, 500).unwrap();
        assert_eq!(full.steady_hit_ratio, 1.0);
        let none = simulate_cache(0, &models, &reqs, PopularityMode::Static, 0).unwrap();
        assert_eq!(none.hit_ratio, 0.0);
        assert!(none.final_contents.is_empty());
        assert_eq!(
            simulate_cache(2, &models, &[ModelId(99)], PopularityMode::Static, 0),
            Err(CacheError::UnknownModel(ModelId(99)))
        );
    }

    #[test]
    fn static_popularity_converges_to_top_ranks() {
        let (n, c, alpha) = (100, 10, 0.8);
        let models = zipf_catalogue(n, alpha);
        let reqs = zipf_requests(n, alpha, 100_000, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let report = simulate_cache(c as u64, &models, &reqs, PopularityMode::Static, 0).unwrap();
        let top: Vec<ModelId> = (1..=c).map(rank_model).collect();
        assert_eq!(report.final_contents, top);
        assert!((report.hit_ratio - top_mass(c, n, alpha)).abs() <= 0.02);
    }

    #[test]
    fn history_mode_learns_popularity() {
        let (n, c, alpha) = (50, 5, 1.2);
        let models: Vec<ModelEntry> = zipf_catalogue(n, alpha)
            .into_iter()
            .map(|m| ModelEntry {
                popularity: 0.0,
                ..m
            })
            .collect();
        let reqs = zipf_requests(n, alpha, 50_000, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let report =
            simulate_cache(c as u64, &models, &reqs, PopularityMode::History, 5_000).unwrap();
        assert!((report.steady_hit_ratio - top_mass(c, n, alpha)).abs() <= 0.02);
        assert!(report.final_contents.contains(&rank_model(1)));
    }

    #[derive(Debug, Clone)]
    enum Op {
        Lookup(u64),
        Admit(u64, u64, f64),
    }

    fn arb_op() -> impl Strategy<Value = Op> {
        prop_oneof![
            (0u64..12).prop_map(Op::Lookup),
            (0u64..12, 1u64..5, 0.0..1.0f64).prop_map(|(i, s, p)| Op::Admit(i, s, p)),
        ]
    }

    proptest! {
        #[test]
        fn capacity_and_counters_hold(cap in 0u64..10, ops in proptest::collection::vec(arb_op(), 0..80)) {
            let mut c = CacheState::new(cap);
            let mut lookups = 0u64;
            let (mut hits, mut misses) = (0, 0);
            for op in ops {
                match op {
                    Op::Lookup(id) => {
                        let present = c.contains(ModelId(id));
                        let r = c.lookup(ModelId(id));
                        prop_assert_eq!(r == Lookup::Hit, present);
                        lookups += 1;
                    }
                    Op::Admit(id, size, pop) => {
                        let res = c.admit(entry(id, size, pop));
                        prop_assert_eq!(res.is_err(), size > cap);
                    }
                }
                let used: u64 = c.entries().map(|e| e.size_units).sum();
                prop_assert_eq!(used, c.used_units());
                prop_assert!(used <= cap);
                prop_assert!(c.hit_count() >= hits && c.miss_count() >= misses);
                hits = c.hit_count();
                misses = c.miss_count();
            }
            prop_assert_eq!(c.hit_count() + c.miss_count(), lookups);
        }
    }
}
