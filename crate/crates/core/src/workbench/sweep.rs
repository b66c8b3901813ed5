//! Experiment sweeps and CSV emitters.
//!
//! An attack sweep embeds a fresh random message under a fresh random key
//! for every (length, trial) pair, attacks it with the length known, and
//! records the planned test alongside the correct key's own statistic.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attack::{correlation_attack, score_key, AttackOptions, KeySpace, Outcome, Stage};
use crate::codec::{embed, EmbedConfig, KeyCandidate};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::noise::compute_noise;
use crate::stats::{build_mixture, plan_attack, DEFAULT_THRESHOLD};
use crate::theory::{hiding_capacity, hiding_redundancy};

pub const SWEEP_CSV_HEADER: &str = "length_bytes,rate,n,T,t_k0,outcome,stage";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub message_len_bytes: u32,
    pub rate: f64,
    pub trial: usize,
    pub key: KeyCandidate,
    pub sigma_hat: f64,
    /// Planned samples per key; absent when no plan was feasible.
    pub n_planned: Option<u64>,
    pub threshold: Option<f64>,
    /// Correct key's count over the samples the deciding stage used.
    pub t_k0: Option<u64>,
    pub outcome: Outcome,
    pub stage: Option<Stage>,
    pub recovered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedLength {
    pub message_len_bytes: u32,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    pub skipped: Vec<SkippedLength>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub seed_bits: u32,
    pub trials: usize,
    /// Seeds the keys and messages drawn for each trial.
    pub sweep_seed: u64,
    pub config: EmbedConfig,
    pub attack: AttackOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            seed_bits: 12,
            trials: 1,
            sweep_seed: 0,
            config: EmbedConfig::default(),
            attack: AttackOptions::default(),
        }
    }
}

pub fn run_sweep(cover: &GrayImage, lengths: &[u32], seed_bits: u32, trials: usize) -> Result<Sweep> {
    let options = SweepOptions {
        seed_bits,
        trials,
        ..SweepOptions::default()
    };
    run_sweep_with(cover, lengths, &options)
}

pub fn run_sweep_with(cover: &GrayImage, lengths: &[u32], options: &SweepOptions) -> Result<Sweep> {
    let mut sweep = Sweep::default();
    let capacity = options.config.capacity_bits(cover.len());
    for &len in lengths {
        let key_probe = KeyCandidate::new(0, len);
        if len == 0 || key_probe.message_bits() > capacity {
            let reason = format!("{} bits exceed capacity {capacity}", key_probe.message_bits());
            log::warn!("skipping length {len}: {reason}");
            sweep.skipped.push(SkippedLength {
                message_len_bytes: len,
                reason,
            });
            continue;
        }
        for trial in 0..options.trials {
            sweep.rows.push(sweep_trial(cover, len, trial, options)?);
        }
    }
    Ok(sweep)
}

fn sweep_trial(cover: &GrayImage, len: u32, trial: usize, options: &SweepOptions) -> Result<SweepRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(options.sweep_seed);
    rng.set_stream(u64::from(len) << 20 | trial as u64);
    let seed = rng.gen_range(0..1u32 << options.seed_bits) as u16;
    let key = KeyCandidate::new(seed, len);
    let message: Vec<bool> = (0..key.message_bits()).map(|_| rng.gen()).collect();
    let stego = embed(cover, &message, key, &options.config)?;

    // The length is known, so the rate is too.
    let rate = key.message_bits() as f64 / cover.len() as f64;
    let attack_options = AttackOptions {
        rate: Some(rate),
        ..options.attack
    };
    let keyspace = KeySpace::seeds(options.seed_bits, len..=len)?;
    let report = correlation_attack(&stego, &keyspace, &options.config, &attack_options)?;
    let result = &report.result;

    let n_used = match result.stage {
        Some(Stage::ThresholdStage) => report.setup.plan.map(|p| p.n),
        Some(Stage::MaxStage) => Some(key.message_bits() as u64),
        None => None,
    };
    let t_k0 = match n_used {
        Some(n) => {
            let noise = compute_noise(&stego, attack_options.radius, options.config.reserved_pixels())?;
            Some(score_key(&noise, key, n as usize, attack_options.threshold, &options.config)?.t_k)
        }
        None => None,
    };
    Ok(SweepRow {
        message_len_bytes: len,
        rate,
        trial,
        key,
        sigma_hat: report.setup.sigma,
        n_planned: report.setup.plan.map(|p| p.n),
        threshold: report.setup.plan.map(|p| p.threshold),
        t_k0,
        outcome: result.outcome,
        stage: result.stage,
        recovered: result.succeeded_with(key),
    })
}

fn outcome_label(row: &SweepRow) -> &'static str {
    if row.recovered {
        "succeed"
    } else {
        "fail"
    }
}

/// One line per row. Rows decided by the max stage print `--` for `n` and
/// `T`, which that stage does not use.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for row in rows {
        let planned = row.stage == Some(Stage::ThresholdStage);
        let n = match (planned, row.n_planned) {
            (true, Some(n)) => n.to_string(),
            _ => "--".into(),
        };
        let t = match (planned, row.threshold) {
            (true, Some(t)) => format!("{t:.2}"),
            _ => "--".into(),
        };
        let t_k0 = row.t_k0.map_or_else(|| "--".into(), |t| t.to_string());
        let stage = match row.stage {
            Some(Stage::ThresholdStage) => "threshold",
            Some(Stage::MaxStage) => "max",
            None => "--",
        };
        let _ = writeln!(
            out,
            "{},{:.4},{n},{t},{t_k0},{},{stage}",
            row.message_len_bytes,
            row.rate,
            outcome_label(row)
        );
    }
    out
}

/// Evenly spaced interior grid `1/(points+1), ..., points/(points+1)`.
pub fn rate_grid(points: usize) -> Vec<f64> {
    (1..=points).map(|i| i as f64 / (points + 1) as f64).collect()
}

/// Capacity `H(r/2)`, message rate `r` and redundancy, with both ends.
pub fn redundancy_curve_csv(points: usize) -> Result<String> {
    let mut out = String::from("r,capacity,message_rate,redundancy\n");
    let rates = std::iter::once(0.0)
        .chain(rate_grid(points))
        .chain(std::iter::once(1.0));
    for r in rates {
        let capacity = hiding_capacity(r / 2.0)?;
        let redundancy = hiding_redundancy(r)?;
        let _ = writeln!(out, "{r:.6},{capacity:.6},{r:.6},{redundancy:.6}");
    }
    Ok(out)
}

/// Planned `n`, `T` and `n*` across the interior rate grid.
pub fn nstar_curve_csv(points: usize, sigma: f64, keyspace_size: u64, p_m: f64) -> Result<String> {
    let mut out = String::from("r,n,T,n_star\n");
    for r in rate_grid(points) {
        let model = build_mixture(r, sigma, DEFAULT_THRESHOLD)?;
        match plan_attack(&model, keyspace_size, p_m) {
            Ok(plan) => {
                let _ = writeln!(out, "{r:.6},{},{:.4},{:.4}", plan.n, plan.threshold, plan.n_star);
            }
            Err(Error::Infeasible(_)) => {
                let _ = writeln!(out, "{r:.6},--,--,inf");
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
