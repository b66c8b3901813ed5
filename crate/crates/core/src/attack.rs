//! Correlation attack on keyed LSB replacement.
//!
//! Every candidate key replays its embedding path over the residual field
//! and counts how many sampled residuals exceed the threshold `A`. The
//! correct key sees modified pixels half the time and collects a higher
//! count than any wrong key. The search runs in two stages:
//!
//! 1. *Threshold stage*: if the planned sample size `n` fits inside every
//!    candidate path, keys whose count over the first `n` samples reaches
//!    the planned threshold `T` survive. A single survivor is the answer.
//! 2. *Max stage*: otherwise every key is scored over its whole path and
//!    the keys with the highest score survive. A single survivor is the
//!    answer; a tie means the attack failed.
//!
//! Keys are processed in fixed-size chunks whose partial results are
//! merged in keyspace order, so the outcome does not depend on how many
//! threads ran the search.

use std::ops::RangeInclusive;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{EmbedConfig, KeyCandidate, PathSampler};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::noise::{
    compute_noise, continuity_corrected_threshold, estimate_sigma2, MixtureMeanEstimator,
    NoiseField, RateEstimate, RateEstimator, SigmaEstimate, DEFAULT_RADIUS,
};
use crate::stats::{
    build_mixture, plan_attack_with_budget, AttackPlan, MixtureModel, DEFAULT_THRESHOLD,
};

/// Half-width of the rate window searched when the length is unknown.
pub const DEFAULT_RATE_WINDOW: f64 = 0.02;

/// Survivor lists longer than this are truncated in the result.
pub const MAX_REPORTED_SURVIVORS: usize = 4096;

const CHUNK: u64 = 256;

/// Candidate keys: explicit lists are sorted by `(length, seed)` and
/// deduplicated; grids enumerate seeds within each length, lengths
/// ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KeySpace {
    Grid {
        seed_count: u32,
        lengths: RangeInclusive<u32>,
    },
    Explicit(Vec<KeyCandidate>),
}

impl KeySpace {
    pub fn seeds(seed_bits: u32, lengths: RangeInclusive<u32>) -> Result<Self> {
        if seed_bits == 0 || seed_bits > 16 {
            return Err(Error::domain("seed_bits", f64::from(seed_bits), "1..=16"));
        }
        if lengths.is_empty() || *lengths.start() == 0 {
            return Err(Error::EmptyKeyspace);
        }
        Ok(KeySpace::Grid {
            seed_count: 1 << seed_bits,
            lengths,
        })
    }

    pub fn explicit(mut keys: Vec<KeyCandidate>) -> Result<Self> {
        keys.sort_unstable_by_key(|k| (k.message_len_bytes, k.seed));
        keys.dedup();
        if keys.is_empty() {
            return Err(Error::EmptyKeyspace);
        }
        Ok(KeySpace::Explicit(keys))
    }

    pub fn len(&self) -> u64 {
        match self {
            KeySpace::Grid {
                seed_count,
                lengths,
            } => u64::from(*seed_count) * u64::from(lengths.end() - lengths.start() + 1),
            KeySpace::Explicit(keys) => keys.len() as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, index: u64) -> KeyCandidate {
        match self {
            KeySpace::Grid {
                seed_count,
                lengths,
            } => {
                let per = u64::from(*seed_count);
                KeyCandidate::new(
                    (index % per) as u16,
                    lengths.start() + (index / per) as u32,
                )
            }
            KeySpace::Explicit(keys) => keys[index as usize],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = KeyCandidate> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    pub fn length_range(&self) -> RangeInclusive<u32> {
        match self {
            KeySpace::Grid { lengths, .. } => lengths.clone(),
            KeySpace::Explicit(keys) => {
                keys[0].message_len_bytes..=keys[keys.len() - 1].message_len_bytes
            }
        }
    }

    fn single_length(&self) -> bool {
        let r = self.length_range();
        r.start() == r.end()
    }
}

/// Candidate byte lengths for a rate estimate `rate ± window` on an image
/// with `image_size` pixels, clipped to what the image can carry.
pub fn length_window(
    rate: f64,
    window: f64,
    image_size: usize,
    config: &EmbedConfig,
) -> Result<RangeInclusive<u32>> {
    let max_len = (config.capacity_bits(image_size) / 8) as u32;
    if max_len == 0 {
        return Err(Error::Capacity {
            required: 8,
            available: config.capacity_bits(image_size),
        });
    }
    let to_len = |r: f64| (r * image_size as f64 / 8.0).round();
    let lo = to_len(rate - window).clamp(1.0, f64::from(max_len)) as u32;
    let hi = to_len(rate + window).clamp(1.0, f64::from(max_len)) as u32;
    Ok(lo..=hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionStatistic {
    pub key: KeyCandidate,
    /// Residuals above the threshold among the first `n` path samples.
    pub t_k: u64,
    pub n: u64,
}

/// Counts residuals above `threshold` over the first `n` samples of the
/// key's path.
pub fn score_key(
    noise: &NoiseField,
    key: KeyCandidate,
    n: usize,
    threshold: f64,
    config: &EmbedConfig,
) -> Result<DecisionStatistic> {
    let mut sampler = PathSampler::new(config, noise.len())?;
    let values = noise.values();
    let mut t_k = 0u64;
    sampler.walk(key, n, |i| t_k += (values[i] > threshold) as u64)?;
    Ok(DecisionStatistic {
        key,
        t_k,
        n: n as u64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    UniqueKey,
    Ambiguous,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    ThresholdStage,
    MaxStage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub n_planned: u64,
    /// Samples per key in the deciding stage; `None` in a max stage over
    /// several lengths, where each key uses its own full path.
    pub n_used: Option<u64>,
    pub threshold: f64,
    pub keys_tested: u64,
    /// Keys whose path does not fit the image.
    pub keys_rejected: u64,
    /// Threshold-stage survivors before the max stage ran, if it did.
    pub threshold_survivors: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Timing {
    pub elapsed_secs: f64,
    pub keys_scored: u64,
}

impl Timing {
    pub fn keys_per_second(&self) -> f64 {
        if self.elapsed_secs > 0.0 {
            self.keys_scored as f64 / self.elapsed_secs
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub outcome: Outcome,
    pub recovered: Option<KeyCandidate>,
    /// Smallest `(seed, length)` among the survivors when ambiguous.
    pub best_guess: Option<KeyCandidate>,
    pub survivors: Vec<KeyCandidate>,
    pub survivor_count: u64,
    pub stage: Option<Stage>,
    pub stats: Option<SearchStats>,
    pub diagnostic: Option<String>,
    /// Wall-clock figures; left out of serialized reports so that reports
    /// are reproducible.
    #[serde(skip)]
    pub timing: Timing,
}

impl AttackResult {
    fn failed(diagnostic: String) -> Self {
        Self {
            outcome: Outcome::Failed,
            recovered: None,
            best_guess: None,
            survivors: Vec::new(),
            survivor_count: 0,
            stage: None,
            stats: None,
            diagnostic: Some(diagnostic),
            timing: Timing::default(),
        }
    }

    pub fn succeeded_with(&self, key: KeyCandidate) -> bool {
        self.outcome == Outcome::UniqueKey && self.recovered == Some(key)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackOptions {
    pub radius: usize,
    /// Residuals strictly above this value are counted.
    pub threshold: f64,
    /// Known embedding rate; estimated from the residuals when absent.
    pub rate: Option<f64>,
    /// Known residual standard deviation; estimated when absent.
    pub sigma: Option<f64>,
    pub p_m: f64,
    /// Expected false alarms over the whole keyspace; `p_f` is this value
    /// divided by the keyspace size.
    pub expected_false_alarms: f64,
    /// Model the count threshold at the centre of the residual lattice
    /// cell it cuts, instead of at the threshold itself.
    pub continuity_correction: bool,
    pub threads: Option<usize>,
}

impl Default for AttackOptions {
    fn default() -> Self {
        Self {
            radius: DEFAULT_RADIUS,
            threshold: DEFAULT_THRESHOLD,
            rate: None,
            sigma: None,
            p_m: 0.01,
            expected_false_alarms: 1.0,
            continuity_correction: true,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterSource {
    Estimated,
    Override,
}

/// What the attack measured and planned before searching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSetup {
    pub pixels: usize,
    pub keyspace_size: u64,
    pub rate: f64,
    pub rate_source: ParameterSource,
    pub rate_estimate: RateEstimate,
    pub rate_estimator: String,
    pub sigma: f64,
    pub sigma_source: ParameterSource,
    pub sigma_estimate: SigmaEstimate,
    pub count_threshold: f64,
    pub mixture: Option<MixtureModel>,
    pub plan: Option<AttackPlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub config: EmbedConfig,
    pub setup: AttackSetup,
    pub result: AttackResult,
}

impl AttackReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn correlation_attack(
    stego: &GrayImage,
    keyspace: &KeySpace,
    config: &EmbedConfig,
    options: &AttackOptions,
) -> Result<AttackReport> {
    correlation_attack_with(stego, keyspace, config, options, &MixtureMeanEstimator)
}

pub fn correlation_attack_with(
    stego: &GrayImage,
    keyspace: &KeySpace,
    config: &EmbedConfig,
    options: &AttackOptions,
    estimator: &dyn RateEstimator,
) -> Result<AttackReport> {
    if keyspace.is_empty() {
        return Err(Error::EmptyKeyspace);
    }
    let noise = compute_noise(stego, options.radius, config.reserved_pixels())?;
    let run = || attack_noise(&noise, keyspace, config, options, estimator);
    match options.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| Error::Infeasible(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

/// Runs the search on a residual field that has already been computed.
pub fn attack_noise(
    noise: &NoiseField,
    keyspace: &KeySpace,
    config: &EmbedConfig,
    options: &AttackOptions,
    estimator: &dyn RateEstimator,
) -> Result<AttackReport> {
    let started = Instant::now();
    let rate_estimate = estimator.estimate(noise);
    let (rate, rate_source) = match options.rate {
        Some(r) => (r, ParameterSource::Override),
        None => (rate_estimate.rate, ParameterSource::Estimated),
    };
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::domain("rate", rate, "0 <= r <= 1"));
    }
    let sigma_estimate = estimate_sigma2(noise, rate);
    let (sigma, sigma_source) = match options.sigma {
        Some(s) => (s, ParameterSource::Override),
        None => (sigma_estimate.sigma(), ParameterSource::Estimated),
    };
    let model_threshold = if options.continuity_correction {
        continuity_corrected_threshold(options.threshold, options.radius)
    } else {
        options.threshold
    };
    let mixture = build_mixture(rate, sigma, model_threshold)?;

    let mut setup = AttackSetup {
        pixels: noise.len(),
        keyspace_size: keyspace.len(),
        rate,
        rate_source,
        rate_estimate,
        rate_estimator: estimator.name().to_string(),
        sigma,
        sigma_source,
        sigma_estimate,
        count_threshold: options.threshold,
        mixture: Some(mixture),
        plan: None,
    };

    // A single candidate still needs a well-formed test design.
    let planned_keys = keyspace.len().max(2);
    let plan = match plan_attack_with_budget(
        &mixture,
        planned_keys,
        options.p_m,
        options.expected_false_alarms,
    ) {
        Ok(plan) => plan,
        Err(Error::Infeasible(why)) => {
            return Ok(AttackReport {
                config: *config,
                setup,
                result: AttackResult::failed(why),
            });
        }
        Err(e) => return Err(e),
    };
    setup.plan = Some(plan);

    let search = Search::new(noise, keyspace, config, options.threshold)?;
    let min_bits = u64::from(*keyspace.length_range().start()) * 8;
    let mut keys_scored = 0u64;

    let mut threshold_survivors = None;
    if plan.n <= min_bits {
        let found = search.threshold_stage(plan.n, plan.threshold);
        keys_scored += found.tested;
        threshold_survivors = Some(found.count);
        if found.count == 1 {
            let key = found.keys[0];
            let result = AttackResult {
                outcome: Outcome::UniqueKey,
                recovered: Some(key),
                best_guess: Some(key),
                survivors: found.keys,
                survivor_count: 1,
                stage: Some(Stage::ThresholdStage),
                stats: Some(SearchStats {
                    n_planned: plan.n,
                    n_used: Some(plan.n),
                    threshold: plan.threshold,
                    keys_tested: found.tested,
                    keys_rejected: found.rejected,
                    threshold_survivors,
                }),
                diagnostic: None,
                timing: Timing {
                    elapsed_secs: started.elapsed().as_secs_f64(),
                    keys_scored,
                },
            };
            return Ok(AttackReport {
                config: *config,
                setup,
                result,
            });
        }
    }

    let best = search.max_stage(mixture.p1);
    keys_scored += best.tested;
    let n_used = keyspace
        .single_length()
        .then(|| u64::from(*keyspace.length_range().start()) * 8);
    let stats = Some(SearchStats {
        n_planned: plan.n,
        n_used,
        threshold: plan.threshold,
        keys_tested: best.tested,
        keys_rejected: best.rejected,
        threshold_survivors,
    });
    let timing = Timing {
        elapsed_secs: started.elapsed().as_secs_f64(),
        keys_scored,
    };
    let result = match best.count {
        0 => AttackResult {
            stats,
            stage: Some(Stage::MaxStage),
            timing,
            ..AttackResult::failed("no candidate key fits the image".into())
        },
        1 => AttackResult {
            outcome: Outcome::UniqueKey,
            recovered: Some(best.keys[0]),
            best_guess: Some(best.keys[0]),
            survivors: best.keys,
            survivor_count: 1,
            stage: Some(Stage::MaxStage),
            stats,
            diagnostic: None,
            timing,
        },
        count => AttackResult {
            outcome: Outcome::Ambiguous,
            recovered: None,
            best_guess: best.keys.iter().min().copied(),
            survivors: best.keys,
            survivor_count: count,
            stage: Some(Stage::MaxStage),
            stats,
            diagnostic: Some(format!("{count} keys share the maximum score")),
            timing,
        },
    };
    Ok(AttackReport {
        config: *config,
        setup,
        result,
    })
}

struct Search<'a> {
    mask: Vec<u8>,
    keyspace: &'a KeySpace,
    sampler: PathSampler,
    single_length: bool,
}

#[derive(Default)]
struct Survivors {
    keys: Vec<KeyCandidate>,
    count: u64,
    tested: u64,
    rejected: u64,
}

impl Survivors {
    fn absorb(&mut self, other: Survivors) {
        let room = MAX_REPORTED_SURVIVORS.saturating_sub(self.keys.len());
        self.keys.extend(other.keys.into_iter().take(room));
        self.count += other.count;
        self.tested += other.tested;
        self.rejected += other.rejected;
    }
}

struct Leaders {
    score: f64,
    survivors: Survivors,
}

impl Leaders {
    fn empty() -> Self {
        Self {
            score: f64::NEG_INFINITY,
            survivors: Survivors::default(),
        }
    }

    fn absorb(&mut self, other: Leaders) {
        let (tested, rejected) = (other.survivors.tested, other.survivors.rejected);
        if other.score > self.score {
            let (t, r) = (self.survivors.tested, self.survivors.rejected);
            *self = other;
            self.survivors.tested += t;
            self.survivors.rejected += r;
            return;
        }
        if other.score == self.score {
            self.survivors.absorb(other.survivors);
        } else {
            self.survivors.tested += tested;
            self.survivors.rejected += rejected;
        }
    }
}

impl<'a> Search<'a> {
    fn new(
        noise: &NoiseField,
        keyspace: &'a KeySpace,
        config: &EmbedConfig,
        threshold: f64,
    ) -> Result<Self> {
        Ok(Self {
            mask: noise.exceedance_mask(threshold),
            keyspace,
            sampler: PathSampler::new(config, noise.len())?,
            single_length: keyspace.single_length(),
        })
    }

    fn chunks(&self) -> u64 {
        self.keyspace.len().div_ceil(CHUNK)
    }

    fn chunk_keys(&self, chunk: u64) -> impl Iterator<Item = KeyCandidate> + '_ {
        let start = chunk * CHUNK;
        let end = (start + CHUNK).min(self.keyspace.len());
        (start..end).map(move |i| self.keyspace.get(i))
    }

    fn count(&self, sampler: &mut PathSampler, key: KeyCandidate, n: usize) -> Option<u64> {
        let mask = &self.mask;
        let mut t = 0u64;
        sampler
            .walk(key, n, |i| t += u64::from(mask[i]))
            .ok()
            .map(|()| t)
    }

    fn threshold_stage(&self, n: u64, threshold: f64) -> Survivors {
        let parts: Vec<Survivors> = (0..self.chunks())
            .into_par_iter()
            .map_init(
                || self.sampler.clone(),
                |sampler, chunk| {
                    let mut out = Survivors::default();
                    for key in self.chunk_keys(chunk) {
                        match self.count(sampler, key, n as usize) {
                            Some(t) => {
                                out.tested += 1;
                                if t as f64 >= threshold {
                                    out.count += 1;
                                    if out.keys.len() < MAX_REPORTED_SURVIVORS {
                                        out.keys.push(key);
                                    }
                                }
                            }
                            None => out.rejected += 1,
                        }
                    }
                    out
                },
            )
            .collect();
        let mut merged = Survivors::default();
        for part in parts {
            merged.absorb(part);
        }
        merged
    }

    /// Scores every key over its full path. With one length the raw count
    /// is compared; across lengths, counts are standardised against the
    /// wrong-key distribution so longer paths are not favoured.
    fn max_stage(&self, p1: f64) -> Survivors {
        let parts: Vec<Leaders> = (0..self.chunks())
            .into_par_iter()
            .map_init(
                || self.sampler.clone(),
                |sampler, chunk| {
                    let mut out = Leaders::empty();
                    for key in self.chunk_keys(chunk) {
                        let n = key.message_bits();
                        let Some(t) = self.count(sampler, key, n) else {
                            out.survivors.rejected += 1;
                            continue;
                        };
                        let score = if self.single_length {
                            t as f64
                        } else {
                            let n = n as f64;
                            (t as f64 - n * p1) / (n * p1 * (1.0 - p1)).sqrt()
                        };
                        out.absorb(Leaders {
                            score,
                            survivors: Survivors {
                                keys: vec![key],
                                count: 1,
                                tested: 1,
                                rejected: 0,
                            },
                        });
                    }
                    out
                },
            )
            .collect();
        let mut merged = Leaders::empty();
        for part in parts {
            merged.absorb(part);
        }
        merged.survivors
    }
}
