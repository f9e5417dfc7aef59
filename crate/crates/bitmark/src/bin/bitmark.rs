//! Command-line surface: generate, embed, detect, attack, evaluate.
//!
//! Summaries go to standard output as `key=value` lines, one pair per
//! line, so shell pipelines can drive sweeps. Warnings go to standard
//! error. Exit codes: 0 success, 1 usage, 2 configuration, 3 I/O or
//! file-format errors. A detect decision is data, not an error.

use bitmark::channel::{bit_flipper_attack, preset_rates, ChannelConfig, FlipperConfig};
use bitmark::channel::{bsc_apply, ChannelError, PRESET_NAMES};
use bitmark::detect::{detect, DetectConfig, DetectionResult, DEFAULT_Z_THRESHOLD};
use bitmark::embed::{embed_stream, EmbedConfig};
use bitmark::eval::threshold_at_fpr;
use bitmark::experiment::{
    derive_seed, parse_spec, render_body, render_header, resolve_partition, resolve_profile,
    resolve_schedule, run_experiment, scores_csv, ExperimentError,
};
use bitmark::format::{read_stream, write_stream, StreamFile};
use bitmark::partition::Partition;
use bitmark::synth::{generate_clean, make_source, SynthSourceConfig};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rand::Rng;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

const AFTER_HELP: &str = "\
Attack presets, weak to strong: identity, noise-weak (0.05), jpeg (0.08),
blur (0.12), noise-strong (0.15), reencode-infinity2b (per-scale rates;
13-scale streams only). The single-rate presets are synthetic round
numbers for qualitative robustness sweeps, not calibrated measurements.
\"bitflipper\" is the adaptive green-window attack and takes --phi.";

#[derive(Parser)]
#[command(
    name = "bitmark",
    version,
    about = "Green/red-list watermarking over autoregressive bit streams",
    after_help = AFTER_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a clean stream file
    Gen(GenArgs),
    /// Generate a watermarked stream file
    Embed(EmbedArgs),
    /// Score a stream file against a partition
    Detect(DetectArgs),
    /// Degrade a stream file with a noise preset or the flipping attack
    Attack(AttackArgs),
    /// Run an experiment spec and write report files
    Eval(EvalArgs),
}

#[derive(Args)]
struct PartitionOpts {
    /// Comma-separated green windows, e.g. "01,10"
    #[arg(long)]
    green: Option<String>,
    /// Hex key deriving a private partition
    #[arg(long)]
    key: Option<String>,
    /// Window width used with --key
    #[arg(long, default_value_t = 2)]
    key_width: usize,
}

impl PartitionOpts {
    fn resolve(&self, required: bool) -> Result<Partition, CliError> {
        if required && self.green.is_none() && self.key.is_none() {
            return Err(CliError::Usage(
                "exactly one of --green or --key is required".into(),
            ));
        }
        Ok(resolve_partition(
            self.green.as_deref(),
            self.key.as_deref(),
            Some(self.key_width),
        )?)
    }
}

#[derive(Args)]
struct GenArgs {
    /// "infinity-2b" or "single:<tokens>x<bits>"
    #[arg(long, default_value = "infinity-2b")]
    schedule: String,
    /// "infinity-2b" or a path to an entropy profile file
    #[arg(long, default_value = "infinity-2b")]
    profile: String,
    /// Omitted: drawn from system entropy and printed
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long, default_value = "infinity-2b")]
    schedule: String,
    #[arg(long, default_value = "infinity-2b")]
    profile: String,
    /// Logit bias added toward green completions
    #[arg(long)]
    delta: f64,
    #[command(flatten)]
    partition: PartitionOpts,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DetectArgs {
    /// Input stream file
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    partition: PartitionOpts,
    /// Fixed z threshold (default 2.326 when not calibrating)
    #[arg(long)]
    threshold: Option<f64>,
    /// File of negative z-scores (one per line) for empirical calibration
    #[arg(long, conflicts_with = "threshold")]
    fpr_calibration: Option<PathBuf>,
    /// Target FPR used with --fpr-calibration
    #[arg(long, default_value_t = 0.01)]
    fpr: f64,
    /// Test |z| instead of z
    #[arg(long)]
    two_sided: bool,
}

#[derive(Args)]
struct AttackArgs {
    /// Input stream file
    #[arg(long = "in")]
    input: PathBuf,
    /// "bitflipper", a preset name, or any label when --rates is given
    #[arg(long)]
    attack: String,
    /// Flip factor for bitflipper
    #[arg(long, default_value_t = 2.2)]
    phi: f64,
    /// Comma-separated per-scale flip rates overriding any preset
    #[arg(long)]
    rates: Option<String>,
    #[command(flatten)]
    partition: PartitionOpts,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Experiment spec (TOML)
    #[arg(long)]
    spec: PathBuf,
    /// Directory receiving report.txt and scores.csv
    #[arg(long)]
    out_dir: PathBuf,
}

enum CliError {
    Usage(String),
    Config(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Config(m) | CliError::Io(m) => m,
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::BothGreenAndKey => CliError::Usage(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

fn io_err(context: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{context}: {e}"))
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Gen(args) => cmd_gen(args),
        Command::Embed(args) => cmd_embed(args),
        Command::Detect(args) => cmd_detect(args),
        Command::Attack(args) => cmd_attack(args),
        Command::Eval(args) => cmd_eval(args),
    }
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| rand::rng().random())
}

/// Domains for splitting one CLI seed into independent RNG seeds.
const SEED_SOURCE: u64 = 100;
const SEED_SAMPLER: u64 = 101;
const SEED_CHANNEL: u64 = 102;

fn print_summary(result: &DetectionResult, prefix: &str) {
    println!("{prefix}green_fraction={:.6}", result.green_fraction);
    println!("{prefix}z={:.4}", result.z);
}

fn write_stream_file(path: &Path, stream: &bitmark::BitStream, n: u8) -> Result<(), CliError> {
    std::fs::write(path, write_stream(stream, n))
        .map_err(|e| io_err(&format!("cannot write {}", path.display()), e))
}

fn read_stream_file(path: &Path) -> Result<StreamFile, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| io_err(&format!("cannot read {}", path.display()), e))?;
    read_stream(&bytes).map_err(|e| io_err(&format!("{}", path.display()), e))
}

fn cmd_gen(args: GenArgs) -> Result<(), CliError> {
    let seed = resolve_seed(args.seed);
    let profile = resolve_profile(&args.profile)?;
    let schedule = resolve_schedule(&args.schedule)?;
    let config = SynthSourceConfig::calibrated(profile, derive_seed(seed, SEED_SOURCE, 0))
        .map_err(config_err)?;
    let mut source = make_source(&config).map_err(config_err)?;
    let stream = generate_clean(&mut source, &schedule, derive_seed(seed, SEED_SAMPLER, 0))
        .map_err(config_err)?;
    // Summary scored against the default bigram partition.
    let partition = Partition::odd_parity();
    let result = detect(&stream, &DetectConfig::new(partition.clone())).map_err(config_err)?;
    write_stream_file(&args.out, &stream, partition.n() as u8)?;
    println!("seed={seed}");
    print_summary(&result, "");
    println!("file={}", args.out.display());
    Ok(())
}

fn cmd_embed(args: EmbedArgs) -> Result<(), CliError> {
    let seed = resolve_seed(args.seed);
    let partition = args.partition.resolve(true)?;
    if let Some(warning) = partition.advisory() {
        eprintln!("warning: {warning}");
    }
    let profile = resolve_profile(&args.profile)?;
    let schedule = resolve_schedule(&args.schedule)?;
    let config = SynthSourceConfig::calibrated(profile, derive_seed(seed, SEED_SOURCE, 0))
        .map_err(config_err)?;
    let mut source = make_source(&config).map_err(config_err)?;
    let embed_config = EmbedConfig {
        partition: partition.clone(),
        delta: args.delta,
        rng_seed: derive_seed(seed, SEED_SAMPLER, 0),
    };
    let stream = embed_stream(&mut source, &schedule, &embed_config).map_err(config_err)?;
    let result = detect(&stream, &DetectConfig::new(partition.clone())).map_err(config_err)?;
    write_stream_file(&args.out, &stream, partition.n() as u8)?;
    println!("seed={seed}");
    println!("delta={}", args.delta);
    print_summary(&result, "");
    println!("file={}", args.out.display());
    Ok(())
}

fn cmd_detect(args: DetectArgs) -> Result<(), CliError> {
    let file = read_stream_file(&args.input)?;
    let partition = args.partition.resolve(true)?;
    let threshold = match (&args.threshold, &args.fpr_calibration) {
        (Some(t), None) => *t,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| io_err(&format!("cannot read {}", path.display()), e))?;
            let scores = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(|l| l.parse::<f64>().map_err(|e| config_err(format!("{l:?}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            threshold_at_fpr(&scores, args.fpr).map_err(config_err)?
        }
        (None, None) => DEFAULT_Z_THRESHOLD,
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    let config = DetectConfig {
        partition,
        threshold,
        two_sided: args.two_sided,
    };
    let result = detect(&file.stream, &config).map_err(config_err)?;
    println!("green_count={}", result.green_count);
    println!("total={}", result.total);
    println!("green_fraction={:.6}", result.green_fraction);
    println!("gamma={}", result.gamma);
    println!("z={:.4}", result.z);
    println!("p_value={:.6e}", result.p_value);
    println!("threshold={:.4}", result.threshold_used);
    println!("decision={}", result.decision);
    Ok(())
}

fn cmd_attack(args: AttackArgs) -> Result<(), CliError> {
    let file = read_stream_file(&args.input)?;
    let seed = resolve_seed(args.seed);
    let partition = args.partition.resolve(false)?;
    let detect_config = DetectConfig::new(partition.clone());
    let before = detect(&file.stream, &detect_config).map_err(config_err)?;

    let attacked = if args.attack == "bitflipper" {
        bit_flipper_attack(
            &file.stream,
            &FlipperConfig {
                phi: args.phi,
                partition: partition.clone(),
                rng_seed: derive_seed(seed, SEED_CHANNEL, 0),
            },
        )
        .map_err(config_err)?
    } else {
        let flip_rates = match &args.rates {
            Some(list) => list
                .split(',')
                .map(|r| r.trim().parse::<f64>().map_err(|e| config_err(format!("{r:?}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?,
            None => preset_rates(&args.attack, file.stream.num_scales()).ok_or_else(|| {
                config_err(format!(
                    "unknown attack {:?} (presets: {} or bitflipper)",
                    args.attack,
                    PRESET_NAMES.join(", ")
                ))
            })?,
        };
        bsc_apply(
            &file.stream,
            &ChannelConfig {
                flip_rates,
                rng_seed: derive_seed(seed, SEED_CHANNEL, 0),
            },
        )
        .map_err(|e: ChannelError| config_err(e))?
    };

    let after = detect(&attacked, &detect_config).map_err(config_err)?;
    write_stream_file(&args.out, &attacked, file.n)?;
    println!("attack={}", args.attack);
    println!("seed={seed}");
    print_summary(&before, "before_");
    print_summary(&after, "after_");
    println!("file={}", args.out.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.spec)
        .map_err(|e| config_err(format!("cannot read {}: {e}", args.spec.display())))?;
    let spec = parse_spec(&text)?;
    let report = run_experiment(&spec)?;
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| io_err(&format!("cannot create {}", args.out_dir.display()), e))?;
    let now = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let report_path = args.out_dir.join("report.txt");
    let csv_path = args.out_dir.join("scores.csv");
    std::fs::write(&report_path, render_header(now) + &render_body(&report))
        .map_err(|e| io_err(&format!("cannot write {}", report_path.display()), e))?;
    std::fs::write(&csv_path, scores_csv(&report))
        .map_err(|e| io_err(&format!("cannot write {}", csv_path.display()), e))?;
    println!("report={}", report_path.display());
    println!("csv={}", csv_path.display());
    println!("rows={}", report.rows.len());
    Ok(())
}
