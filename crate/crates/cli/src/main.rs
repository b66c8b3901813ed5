use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use stegokey::attack::{
    correlation_attack, length_window, AttackOptions, KeySpace, Outcome, DEFAULT_RATE_WINDOW,
};
use stegokey::codec::{bits_to_bytes, bytes_to_bits, embed, extract, EmbedConfig, EmbedOperation, KeyCandidate};
use stegokey::noise::{compute_noise, estimate_rate, estimate_sigma2, DEFAULT_RADIUS};
use stegokey::rng::RngKind;
use stegokey::stats::{build_mixture, plan_attack_with_budget, DEFAULT_THRESHOLD};
use stegokey::theory::{hiding_capacity, hiding_redundancy, unicity_lower_bound, TheoryParams};
use stegokey::workbench::pgm::{read_pgm, write_pgm};
use stegokey::workbench::sweep::{
    nstar_curve_csv, redundancy_curve_csv, run_sweep_with, sweep_csv, SweepOptions,
};
use stegokey::workbench::synth::try_synth_cover;

const EXIT_ATTACK_FAILED: u8 = 2;
const EXIT_INPUT: u8 = 3;

#[derive(Parser)]
#[command(name = "stegokey", version, about = "Keyed LSB embedding and stego-key recovery")]
struct Cli {
    /// Path generator behind the keyed walk.
    #[arg(long, global = true, default_value = "borland_lcg", value_parser = parse_rng)]
    rng: RngKind,

    /// Worker threads for the key search (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Machine-readable output on stdout.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hide a message file in a PGM cover.
    Embed(EmbedArgs),
    /// Recover a message of known length with a known key.
    Extract(ExtractArgs),
    /// Write the residual field and its moments.
    Noise(NoiseArgs),
    /// Design the hypothesis test for given r and sigma.
    Plan(PlanArgs),
    /// Search the keyspace for the stego key.
    Attack(AttackArgs),
    /// Tabulate capacity, redundancy and the unicity bound.
    Theory(TheoryArgs),
    /// Emit experiment curves as CSV.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct LayoutArgs {
    /// Embed from pixel 0 instead of skipping the header pixels.
    #[arg(long)]
    no_header: bool,
}

impl LayoutArgs {
    fn config(&self, rng: RngKind) -> EmbedConfig {
        let config = EmbedConfig::default().with_rng(rng);
        if self.no_header {
            config.without_header()
        } else {
            config
        }
    }
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    cover: PathBuf,
    /// Raw message bytes, read MSB first.
    #[arg(long)]
    msg: PathBuf,
    #[arg(long)]
    seed: u16,
    #[arg(long, default_value = "replace", value_parser = parse_op)]
    op: EmbedOperation,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    layout: LayoutArgs,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    stego: PathBuf,
    #[arg(long)]
    seed: u16,
    /// Message length in bytes.
    #[arg(long)]
    len: u32,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    layout: LayoutArgs,
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(long)]
    stego: PathBuf,
    /// Little-endian f64 residuals; a `.json` sidecar is written beside it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    radius: usize,
    #[command(flatten)]
    layout: LayoutArgs,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    r: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 65536)]
    keys: u64,
    #[arg(long, default_value_t = 0.01)]
    pm: f64,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Expected false alarms over the keyspace.
    #[arg(long, default_value_t = 1.0)]
    false_alarms: f64,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    stego: PathBuf,
    #[arg(long, default_value_t = 16)]
    seed_bits: u32,
    /// `auto` (estimated rate ± window) or `MIN:MAX` in bytes.
    #[arg(long, default_value = "auto")]
    len_window: String,
    /// Rate half-width for `--len-window auto`.
    #[arg(long, default_value_t = DEFAULT_RATE_WINDOW)]
    rate_window: f64,
    #[arg(long, default_value_t = 0.01)]
    pm: f64,
    #[arg(long, default_value_t = 1.0)]
    false_alarms: f64,
    /// Known embedding rate (skips estimation).
    #[arg(long)]
    rate: Option<f64>,
    /// Known residual standard deviation (skips estimation).
    #[arg(long)]
    sigma: Option<f64>,
    /// Model the count threshold at the raw threshold, without the
    /// lattice correction.
    #[arg(long)]
    no_continuity: bool,
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    layout: LayoutArgs,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long, default_value_t = 153_600)]
    pixels: usize,
    #[arg(long, default_value_t = 16.0)]
    key_bits: f64,
    /// Interior rate points between 0 and 1.
    #[arg(long, default_value_t = 9)]
    points: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Curve {
    Redundancy,
    Nstar,
    Attack,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    curve: Curve,
    #[arg(long, default_value_t = 99)]
    points: usize,
    #[arg(long, default_value_t = 1.5)]
    sigma: f64,
    #[arg(long, default_value_t = 65536)]
    keys: u64,
    #[arg(long, default_value_t = 0.01)]
    pm: f64,
    /// Cover for the attack curve; a synthetic 320x480 cover otherwise.
    #[arg(long)]
    cover: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    gen_seed: u64,
    /// Message lengths in bytes, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [100u32, 2000, 4000, 6000, 8000, 10000])]
    lengths: Vec<u32>,
    #[arg(long, default_value_t = 12)]
    seed_bits: u32,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_rng(s: &str) -> std::result::Result<RngKind, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_op(s: &str) -> std::result::Result<EmbedOperation, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
            .context("configuring thread pool")?;
    }
    match &cli.command {
        Command::Embed(args) => cmd_embed(cli, args),
        Command::Extract(args) => cmd_extract(cli, args),
        Command::Noise(args) => cmd_noise(cli, args),
        Command::Plan(args) => cmd_plan(args),
        Command::Attack(args) => cmd_attack(cli, args),
        Command::Theory(args) => cmd_theory(cli, args),
        Command::Sweep(args) => cmd_sweep(cli, args),
    }
}

fn load(path: &Path) -> Result<stegokey::image::GrayImage> {
    read_pgm(path).with_context(|| format!("reading {}", path.display()))
}

fn cmd_embed(cli: &Cli, args: &EmbedArgs) -> Result<ExitCode> {
    let cover = load(&args.cover)?;
    let message = fs::read(&args.msg).with_context(|| format!("reading {}", args.msg.display()))?;
    let len = u32::try_from(message.len()).context("message too long")?;
    let key = KeyCandidate::new(args.seed, len);
    let config = args.layout.config(cli.rng).with_operation(args.op);
    let stego = embed(&cover, &bytes_to_bits(&message), key, &config)?;
    write_pgm(&stego, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let rate = key.message_bits() as f64 / cover.len() as f64;
    if cli.json {
        println!("{}", json!({ "key": key, "rate": rate, "pixels": cover.len() }));
    } else {
        println!(
            "embedded {} bytes under seed {} (rate {rate:.4})",
            len, args.seed
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_extract(cli: &Cli, args: &ExtractArgs) -> Result<ExitCode> {
    let stego = load(&args.stego)?;
    let key = KeyCandidate::new(args.seed, args.len);
    let bytes = bits_to_bytes(&extract(&stego, key, &args.layout.config(cli.rng))?);
    match &args.out {
        Some(path) => fs::write(path, &bytes).with_context(|| format!("writing {}", path.display()))?,
        None => io::stdout().write_all(&bytes)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_noise(cli: &Cli, args: &NoiseArgs) -> Result<ExitCode> {
    let stego = load(&args.stego)?;
    let config = args.layout.config(cli.rng);
    let noise = compute_noise(&stego, args.radius, config.reserved_pixels())?;
    let raw: Vec<u8> = noise.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(&args.out, raw).with_context(|| format!("writing {}", args.out.display()))?;

    let rate = estimate_rate(&noise);
    let sigma2 = estimate_sigma2(&noise, rate.rate);
    let sidecar = json!({
        "N": noise.counted().len(),
        "mean": noise.mean(),
        "a2": noise.second_moment(),
        "sigma2_hat": sigma2.sigma2,
        "r_hat": rate.rate,
    });
    let mut sidecar_path = args.out.clone().into_os_string();
    sidecar_path.push(".json");
    fs::write(&sidecar_path, serde_json::to_string_pretty(&sidecar)?)?;
    if cli.json {
        println!("{sidecar}");
    } else {
        println!(
            "N = {}  r_hat = {:.4} ± {:.4}  sigma2_hat = {:.4}",
            noise.counted().len(),
            rate.rate,
            rate.half_width,
            sigma2.sigma2
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_plan(args: &PlanArgs) -> Result<ExitCode> {
    let model = build_mixture(args.r, args.sigma, args.threshold)?;
    let plan = plan_attack_with_budget(&model, args.keys, args.pm, args.false_alarms)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({ "mixture": model, "plan": plan }))?
    );
    Ok(ExitCode::SUCCESS)
}

fn parse_window(spec: &str) -> Result<Option<(u32, u32)>> {
    if spec == "auto" {
        return Ok(None);
    }
    let (lo, hi) = spec
        .split_once(':')
        .with_context(|| format!("length window {spec:?} is neither auto nor MIN:MAX"))?;
    let (lo, hi): (u32, u32) = (lo.trim().parse()?, hi.trim().parse()?);
    if lo == 0 || lo > hi {
        bail!("length window {lo}:{hi} is empty");
    }
    Ok(Some((lo, hi)))
}

fn cmd_attack(cli: &Cli, args: &AttackArgs) -> Result<ExitCode> {
    let stego = load(&args.stego)?;
    let config = args.layout.config(cli.rng);
    let lengths = match parse_window(&args.len_window)? {
        Some((lo, hi)) => lo..=hi,
        None => {
            let rate = match args.rate {
                Some(r) => r,
                None => {
                    let noise = compute_noise(&stego, DEFAULT_RADIUS, config.reserved_pixels())?;
                    estimate_rate(&noise).rate
                }
            };
            length_window(rate, args.rate_window, stego.len(), &config)?
        }
    };
    let keyspace = KeySpace::seeds(args.seed_bits, lengths)?;
    let options = AttackOptions {
        rate: args.rate,
        sigma: args.sigma,
        p_m: args.pm,
        expected_false_alarms: args.false_alarms,
        continuity_correction: !args.no_continuity,
        threads: cli.threads,
        ..AttackOptions::default()
    };
    let report = correlation_attack(&stego, &keyspace, &config, &options)?;
    let text = report.to_json();
    if let Some(path) = &args.report {
        fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
    }

    let result = &report.result;
    eprintln!(
        "searched {} keys in {:.2}s ({:.0} keys/s)",
        result.timing.keys_scored,
        result.timing.elapsed_secs,
        result.timing.keys_per_second()
    );
    if cli.json {
        println!("{text}");
    } else {
        let setup = &report.setup;
        println!(
            "r = {:.4}  sigma = {:.4}  keyspace = {}",
            setup.rate, setup.sigma, setup.keyspace_size
        );
        if let Some(plan) = setup.plan {
            println!("plan: n = {}  T = {:.2}", plan.n, plan.threshold);
        }
        match result.outcome {
            Outcome::UniqueKey => {
                let key = result.recovered.expect("unique outcome carries a key");
                println!(
                    "recovered seed {} length {} ({:?})",
                    key.seed,
                    key.message_len_bytes,
                    result.stage.expect("unique outcome has a stage")
                );
            }
            Outcome::Ambiguous => println!(
                "ambiguous: {} survivors, best guess {:?}",
                result.survivor_count, result.best_guess
            ),
            Outcome::Failed => println!(
                "failed: {}",
                result.diagnostic.as_deref().unwrap_or("no key recovered")
            ),
        }
    }
    Ok(if result.outcome == Outcome::UniqueKey {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_ATTACK_FAILED)
    })
}

fn cmd_theory(cli: &Cli, args: &TheoryArgs) -> Result<ExitCode> {
    let rates = (0..=args.points + 1).map(|i| i as f64 / (args.points + 1) as f64);
    let mut rows = Vec::new();
    for r in rates {
        let capacity = hiding_capacity(r / 2.0)?;
        let redundancy = hiding_redundancy(r)?;
        let bound = unicity_lower_bound(&TheoryParams::lsb_replacement(args.pixels, r, args.key_bits))?;
        rows.push((r, capacity, redundancy, bound));
    }
    if cli.json {
        let rows: Vec<_> = rows
            .iter()
            .map(|(r, c, red, b)| json!({ "r": r, "capacity": c, "redundancy": red, "bound": b }))
            .collect();
        println!("{}", serde_json::to_string_pretty(&rows)?);
    } else {
        println!("{:>8} {:>10} {:>12} {:>14}", "r", "C", "redundancy", "bound");
        for (r, c, red, b) in rows {
            println!("{r:>8.4} {c:>10.6} {red:>12.6} {:>14}", b.to_string());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(cli: &Cli, args: &SweepArgs) -> Result<ExitCode> {
    let csv = match args.curve {
        Curve::Redundancy => redundancy_curve_csv(args.points)?,
        Curve::Nstar => nstar_curve_csv(args.points, args.sigma, args.keys, args.pm)?,
        Curve::Attack => {
            let cover = match &args.cover {
                Some(path) => load(path)?,
                None => try_synth_cover(320, 480, 128.0, args.sigma, args.gen_seed)?,
            };
            let options = SweepOptions {
                seed_bits: args.seed_bits,
                trials: args.trials,
                sweep_seed: args.gen_seed,
                config: EmbedConfig::default().with_rng(cli.rng),
                attack: AttackOptions {
                    p_m: args.pm,
                    threads: cli.threads,
                    ..AttackOptions::default()
                },
            };
            let sweep = run_sweep_with(&cover, &args.lengths, &options)?;
            for skipped in &sweep.skipped {
                eprintln!("skipped length {}: {}", skipped.message_len_bytes, skipped.reason);
            }
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&sweep)?);
                return Ok(ExitCode::SUCCESS);
            }
            sweep_csv(&sweep.rows)
        }
    };
    match &args.out {
        Some(path) => fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{csv}"),
    }
    Ok(ExitCode::SUCCESS)
}
