//! Reproducible experiment harness: generates clean and watermarked
//! populations from a declarative spec, applies attacks, and reduces the
//! scores to threshold/TPR/AUC/rank-test metrics.
//!
//! Every stream gets its own seed derived from (spec seed, domain,
//! index), so results are identical at any parallelism level and any
//! subset of the work can be re-derived in isolation.

use crate::channel::{
    bit_flipper_attack, bsc_apply, preset_rates, ChannelConfig, ChannelError, FlipperConfig,
};
use crate::detect::{detect, gaussian_upper_quantile, DetectConfig, DetectError};
use crate::embed::{embed_stream, EmbedConfig, EmbedError};
use crate::eval::{
    auc, mann_whitney_u, mean_std, threshold_at_fpr, tpr_at_fpr, EvalError, PopulationLabel,
};
use crate::partition::{Partition, PartitionError};
use crate::schedule::{ScaleSchedule, ScheduleError};
use crate::stream::BitStream;
use crate::synth::{generate_clean, make_source, EntropyProfile, SynthError, SynthSourceConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("cannot parse experiment spec: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("unknown attack {0:?}")]
    UnknownAttack(String),
    #[error("schedule {0:?} is neither \"infinity-2b\" nor \"single:<tokens>x<bits>\"")]
    UnknownSchedule(String),
    #[error("cannot read {path}: {source}")]
    ReadFile {
        path: String,
        source: std::io::Error,
    },
    #[error("at most one of green/key may be set")]
    BothGreenAndKey,
    #[error("key must be an even-length hex string, got {0:?}")]
    BadKeyHex(String),
    #[error("mixture percent {0} outside [0, 100]")]
    BadMixture(f64),
    #[error("population sizes must be positive")]
    EmptyPopulation,
    #[error("deltas list is empty")]
    NoDeltas,
    #[error("fpr {0} outside (0, 1)")]
    BadFpr(f64),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// Declarative experiment description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// "infinity-2b" or a path to a profile text file.
    #[serde(default = "default_profile")]
    pub profile: String,
    /// "infinity-2b" or "single:<tokens>x<bits>".
    #[serde(default = "default_schedule")]
    pub schedule: String,
    pub deltas: Vec<f64>,
    /// "none", "bitflipper", or a BSC preset name.
    #[serde(default = "default_attacks")]
    pub attacks: Vec<String>,
    pub n_pos: usize,
    pub n_neg: usize,
    #[serde(default = "default_fpr")]
    pub fpr: f64,
    pub seed: u64,
    /// Explicit green list like "01,10"; mutually exclusive with `key`.
    #[serde(default)]
    pub green: Option<String>,
    /// Hex key for a derived partition; mutually exclusive with `green`.
    #[serde(default)]
    pub key: Option<String>,
    /// Window width for keyed partitions (default 2).
    #[serde(default)]
    pub key_width: Option<usize>,
    /// Flip factor for "bitflipper" rows.
    #[serde(default = "default_phi")]
    pub phi: f64,
    /// Percent-watermarked mixtures to rank-test against clean scores.
    #[serde(default)]
    pub mixtures: Vec<f64>,
}

fn default_profile() -> String {
    "infinity-2b".into()
}

fn default_schedule() -> String {
    "infinity-2b".into()
}

fn default_attacks() -> Vec<String> {
    vec!["none".into()]
}

fn default_fpr() -> f64 {
    0.01
}

fn default_phi() -> f64 {
    2.2
}

pub fn parse_spec(text: &str) -> Result<ExperimentSpec, ExperimentError> {
    Ok(toml::from_str(text)?)
}

pub fn resolve_profile(name: &str) -> Result<EntropyProfile, ExperimentError> {
    if name == "infinity-2b" {
        return Ok(EntropyProfile::infinity_2b());
    }
    let text = std::fs::read_to_string(name).map_err(|source| ExperimentError::ReadFile {
        path: name.to_string(),
        source,
    })?;
    Ok(EntropyProfile::from_text(&text)?)
}

pub fn resolve_schedule(name: &str) -> Result<ScaleSchedule, ExperimentError> {
    if name == "infinity-2b" {
        return Ok(ScaleSchedule::infinity_2b());
    }
    let unknown = || ExperimentError::UnknownSchedule(name.to_string());
    let rest = name.strip_prefix("single:").ok_or_else(unknown)?;
    let (tokens, bits) = rest.split_once('x').ok_or_else(unknown)?;
    let tokens: u32 = tokens.parse().map_err(|_| unknown())?;
    let bits: usize = bits.parse().map_err(|_| unknown())?;
    Ok(ScaleSchedule::single_scale(tokens, bits)?)
}

pub fn parse_hex_key(text: &str) -> Result<Vec<u8>, ExperimentError> {
    let bad = || ExperimentError::BadKeyHex(text.to_string());
    if text.is_empty() || text.len() % 2 != 0 {
        return Err(bad());
    }
    (0..text.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&text[i..i + 2], 16).map_err(|_| bad()))
        .collect()
}

/// Green list, keyed partition, or the default odd-parity bigrams.
pub fn resolve_partition(
    green: Option<&str>,
    key: Option<&str>,
    key_width: Option<usize>,
) -> Result<Partition, ExperimentError> {
    match (green, key) {
        (Some(_), Some(_)) => Err(ExperimentError::BothGreenAndKey),
        (Some(list), None) => Ok(Partition::parse_green_list(list)?),
        (None, Some(hex)) => {
            let bytes = parse_hex_key(hex)?;
            Ok(Partition::keyed(&bytes, key_width.unwrap_or(2))?)
        }
        (None, None) => Ok(Partition::odd_parity()),
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream seeds from (experiment seed, domain, index).
pub fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ domain) ^ index)
}

const DOMAIN_NEG_SOURCE: u64 = 1;
const DOMAIN_NEG_SAMPLE: u64 = 2;
const DOMAIN_POS_SOURCE: u64 = 3;
const DOMAIN_POS_SAMPLE: u64 = 4;
const DOMAIN_ATTACK: u64 = 5;
const DOMAIN_MIX_SOURCE: u64 = 6;
const DOMAIN_MIX_SAMPLE: u64 = 7;

/// One attack's aggregate metrics at one δ.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackRow {
    pub delta: f64,
    pub attack: String,
    pub mean_green_fraction: f64,
    pub mean_z: f64,
    pub std_z: f64,
    pub tpr_at_fpr: f64,
    pub auc: f64,
}

/// Rank-test result for one percent-watermarked mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureRow {
    pub percent: f64,
    pub delta: f64,
    pub u: f64,
    pub p: f64,
}

/// One stream's score, for the CSV hand-off.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamScore {
    pub population: PopulationLabel,
    pub delta: Option<f64>,
    pub attack: String,
    pub index: usize,
    pub green_fraction: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub threshold_empirical: f64,
    pub threshold_gaussian: f64,
    pub negative_mean_fraction: f64,
    pub negative_mean_z: f64,
    pub negative_std_z: f64,
    pub rows: Vec<AttackRow>,
    pub mixture_rows: Vec<MixtureRow>,
    pub scores: Vec<StreamScore>,
}

fn validate_spec(spec: &ExperimentSpec, schedule: &ScaleSchedule) -> Result<(), ExperimentError> {
    if spec.n_pos == 0 || spec.n_neg == 0 {
        return Err(ExperimentError::EmptyPopulation);
    }
    if spec.deltas.is_empty() {
        return Err(ExperimentError::NoDeltas);
    }
    if !(spec.fpr > 0.0 && spec.fpr < 1.0) {
        return Err(ExperimentError::BadFpr(spec.fpr));
    }
    for &pct in &spec.mixtures {
        if !(0.0..=100.0).contains(&pct) || pct.is_nan() {
            return Err(ExperimentError::BadMixture(pct));
        }
    }
    for name in &spec.attacks {
        let known = name == "none"
            || name == "bitflipper"
            || preset_rates(name, schedule.num_scales()).is_some();
        if !known {
            return Err(ExperimentError::UnknownAttack(name.clone()));
        }
    }
    Ok(())
}

fn apply_attack(
    name: &str,
    stream: &BitStream,
    partition: &Partition,
    phi: f64,
    rng_seed: u64,
) -> Result<BitStream, ExperimentError> {
    match name {
        "none" => Ok(stream.clone()),
        "bitflipper" => Ok(bit_flipper_attack(
            stream,
            &FlipperConfig {
                phi,
                partition: partition.clone(),
                rng_seed,
            },
        )?),
        preset => {
            let flip_rates = preset_rates(preset, stream.num_scales())
                .ok_or_else(|| ExperimentError::UnknownAttack(preset.to_string()))?;
            Ok(bsc_apply(
                stream,
                &ChannelConfig {
                    flip_rates,
                    rng_seed,
                },
            )?)
        }
    }
}

fn clean_scores(
    base: &SynthSourceConfig,
    schedule: &ScaleSchedule,
    detect_config: &DetectConfig,
    seed: u64,
    count: usize,
    source_domain: u64,
    sample_domain: u64,
) -> Result<Vec<(f64, f64)>, ExperimentError> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut config = base.clone();
            config.seed = derive_seed(seed, source_domain, i as u64);
            let mut source = make_source(&config)?;
            let stream = generate_clean(
                &mut source,
                schedule,
                derive_seed(seed, sample_domain, i as u64),
            )?;
            let r = detect(&stream, detect_config)?;
            Ok((r.green_fraction, r.z))
        })
        .collect()
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport, ExperimentError> {
    let profile = resolve_profile(&spec.profile)?;
    let schedule = resolve_schedule(&spec.schedule)?;
    validate_spec(spec, &schedule)?;
    let partition = resolve_partition(
        spec.green.as_deref(),
        spec.key.as_deref(),
        spec.key_width,
    )?;
    let base = SynthSourceConfig::calibrated(profile, 0)?;
    let detect_config = DetectConfig::new(partition.clone());

    let negatives = clean_scores(
        &base,
        &schedule,
        &detect_config,
        spec.seed,
        spec.n_neg,
        DOMAIN_NEG_SOURCE,
        DOMAIN_NEG_SAMPLE,
    )?;
    let neg_z: Vec<f64> = negatives.iter().map(|&(_, z)| z).collect();
    let (neg_mean_z, neg_std_z) = mean_std(&neg_z);
    let (neg_mean_fraction, _) = mean_std(
        &negatives.iter().map(|&(f, _)| f).collect::<Vec<_>>(),
    );
    let threshold_empirical = threshold_at_fpr(&neg_z, spec.fpr)?;
    let threshold_gaussian = gaussian_upper_quantile(spec.fpr)?;

    let mut scores: Vec<StreamScore> = negatives
        .iter()
        .enumerate()
        .map(|(index, &(green_fraction, z))| StreamScore {
            population: PopulationLabel::Negative,
            delta: None,
            attack: "clean".into(),
            index,
            green_fraction,
            z,
        })
        .collect();

    let mut rows = Vec::new();
    let mut last_delta_none: Vec<f64> = Vec::new();
    for (di, &delta) in spec.deltas.iter().enumerate() {
        // One watermarked stream per index, re-attacked per attack name;
        // [i][ai] holds (green fraction, z) after attack ai.
        let per_stream: Vec<Vec<(f64, f64)>> = (0..spec.n_pos)
            .into_par_iter()
            .map(|i| -> Result<Vec<(f64, f64)>, ExperimentError> {
                let flat = (di * spec.n_pos + i) as u64;
                let mut config = base.clone();
                config.seed = derive_seed(spec.seed, DOMAIN_POS_SOURCE, flat);
                let mut source = make_source(&config)?;
                let embed_config = EmbedConfig {
                    partition: partition.clone(),
                    delta,
                    rng_seed: derive_seed(spec.seed, DOMAIN_POS_SAMPLE, flat),
                };
                let watermarked = embed_stream(&mut source, &schedule, &embed_config)?;
                spec.attacks
                    .iter()
                    .enumerate()
                    .map(|(ai, name)| {
                        let attack_seed = derive_seed(
                            spec.seed,
                            DOMAIN_ATTACK,
                            (flat * spec.attacks.len() as u64) + ai as u64,
                        );
                        let attacked =
                            apply_attack(name, &watermarked, &partition, spec.phi, attack_seed)?;
                        let r = detect(&attacked, &detect_config)?;
                        Ok((r.green_fraction, r.z))
                    })
                    .collect()
            })
            .collect::<Result<Vec<_>, _>>()?;

        for (ai, name) in spec.attacks.iter().enumerate() {
            let fractions: Vec<f64> = per_stream.iter().map(|s| s[ai].0).collect();
            let zs: Vec<f64> = per_stream.iter().map(|s| s[ai].1).collect();
            let (mean_z, std_z) = mean_std(&zs);
            let (mean_green_fraction, _) = mean_std(&fractions);
            rows.push(AttackRow {
                delta,
                attack: name.clone(),
                mean_green_fraction,
                mean_z,
                std_z,
                tpr_at_fpr: tpr_at_fpr(&zs, &neg_z, spec.fpr)?,
                auc: auc(&zs, &neg_z)?,
            });
            scores.extend(zs.iter().zip(&fractions).enumerate().map(
                |(index, (&z, &green_fraction))| StreamScore {
                    population: PopulationLabel::Positive,
                    delta: Some(delta),
                    attack: name.clone(),
                    index,
                    green_fraction,
                    z,
                },
            ));
            if di + 1 == spec.deltas.len() && name == "none" {
                last_delta_none = zs;
            }
        }
    }

    // Mixture rank tests: replace the first ⌈pct%⌉ of an independent
    // clean population with watermarked scores (final δ, unattacked) and
    // test against the reference negatives. Needs a "none" attack row.
    let mut mixture_rows = Vec::new();
    if !spec.mixtures.is_empty() && !last_delta_none.is_empty() {
        let extras = clean_scores(
            &base,
            &schedule,
            &detect_config,
            spec.seed,
            spec.n_pos,
            DOMAIN_MIX_SOURCE,
            DOMAIN_MIX_SAMPLE,
        )?;
        let delta = *spec.deltas.last().expect("validated non-empty");
        for &percent in &spec.mixtures {
            let k = ((percent / 100.0) * spec.n_pos as f64).round() as usize;
            let k = k.min(spec.n_pos);
            let mixed: Vec<f64> = last_delta_none[..k]
                .iter()
                .copied()
                .chain(extras[k..].iter().map(|&(_, z)| z))
                .collect();
            let (u, p) = mann_whitney_u(&mixed, &neg_z)?;
            mixture_rows.push(MixtureRow {
                percent,
                delta,
                u,
                p,
            });
        }
    }

    Ok(ExperimentReport {
        spec: spec.clone(),
        threshold_empirical,
        threshold_gaussian,
        negative_mean_fraction: neg_mean_fraction,
        negative_mean_z: neg_mean_z,
        negative_std_z: neg_std_z,
        rows,
        mixture_rows,
        scores,
    })
}

/// Timestamped header; everything run-dependent but data-independent
/// lives here so the body can be compared byte-for-byte across runs.
pub fn render_header(now_unix: u64) -> String {
    format!("# bitmark experiment report\n# generated_unix={now_unix}\n")
}

/// Deterministic report body: same spec and seed, same bytes.
pub fn render_body(report: &ExperimentReport) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let spec = &report.spec;
    let _ = writeln!(out, "profile={}", spec.profile);
    let _ = writeln!(out, "schedule={}", spec.schedule);
    let _ = writeln!(out, "seed={}", spec.seed);
    let _ = writeln!(out, "n_pos={} n_neg={} fpr={}", spec.n_pos, spec.n_neg, spec.fpr);
    let _ = writeln!(
        out,
        "negatives: mean_fraction={:.6} mean_z={:.4} std_z={:.4}",
        report.negative_mean_fraction, report.negative_mean_z, report.negative_std_z
    );
    let _ = writeln!(
        out,
        "threshold: empirical={:.4} gaussian={:.4}",
        report.threshold_empirical, report.threshold_gaussian
    );
    let _ = writeln!(
        out,
        "{:<8} {:<22} {:>10} {:>10} {:>8} {:>8} {:>8}",
        "delta", "attack", "fraction", "mean_z", "std_z", "tpr", "auc"
    );
    for row in &report.rows {
        let _ = writeln!(
            out,
            "{:<8} {:<22} {:>10.6} {:>10.3} {:>8.3} {:>8.4} {:>8.4}",
            row.delta, row.attack, row.mean_green_fraction, row.mean_z, row.std_z, row.tpr_at_fpr,
            row.auc
        );
    }
    if !report.mixture_rows.is_empty() {
        let _ = writeln!(
            out,
            "{:<8} {:<8} {:>12} {:>12}",
            "percent", "delta", "U", "p"
        );
        for row in &report.mixture_rows {
            let _ = writeln!(
                out,
                "{:<8} {:<8} {:>12.1} {:>12.6e}",
                row.percent, row.delta, row.u, row.p
            );
        }
    }
    out
}

/// Flat per-stream scores; empty delta column marks the negatives.
pub fn scores_csv(report: &ExperimentReport) -> String {
    use std::fmt::Write;
    let mut out = String::from("population,delta,attack,stream,green_fraction,z\n");
    for s in &report.scores {
        let population = match s.population {
            PopulationLabel::Positive => "positive",
            PopulationLabel::Negative => "negative",
        };
        let delta = s.delta.map(|d| d.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{population},{delta},{},{},{:.6},{:.6}",
            s.attack, s.index, s.green_fraction, s.z
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as IoWrite;

    #[test]
    fn spec_parses_with_defaults() {
        let spec = parse_spec(
            "deltas = [0.0, 2.0]\nn_pos = 10\nn_neg = 10\nseed = 7\n",
        )
        .unwrap();
        assert_eq!(spec.profile, "infinity-2b");
        assert_eq!(spec.schedule, "infinity-2b");
        assert_eq!(spec.attacks, vec!["none".to_string()]);
        assert_eq!(spec.fpr, 0.01);
        assert_eq!(spec.phi, 2.2);
        assert_eq!(spec.green, None);
        assert!(spec.mixtures.is_empty());
    }

    #[test]
    fn spec_rejects_unknown_keys_and_missing_fields() {
        assert!(matches!(
            parse_spec("deltas = [1.0]\nn_pos = 1\nn_neg = 1\nseed = 1\nbogus = 3\n"),
            Err(ExperimentError::Toml(_))
        ));
        assert!(matches!(
            parse_spec("n_pos = 1\n"),
            Err(ExperimentError::Toml(_))
        ));
    }

    #[test]
    fn schedule_resolution() {
        assert_eq!(resolve_schedule("infinity-2b").unwrap().num_scales(), 13);
        let s = resolve_schedule("single:64x32").unwrap();
        assert_eq!(s.total_tokens(), 64);
        assert_eq!(s.m(), 32);
        assert!(matches!(
            resolve_schedule("double:1x2"),
            Err(ExperimentError::UnknownSchedule(_))
        ));
        assert!(matches!(
            resolve_schedule("single:64"),
            Err(ExperimentError::UnknownSchedule(_))
        ));
        assert!(matches!(
            resolve_schedule("single:ax32"),
            Err(ExperimentError::UnknownSchedule(_))
        ));
        assert!(matches!(
            resolve_schedule("single:0x32"),
            Err(ExperimentError::Schedule(_))
        ));
    }

    #[test]
    fn partition_resolution() {
        let default = resolve_partition(None, None, None).unwrap();
        assert_eq!(default.green_values(), vec![0b01, 0b10]);
        let listed = resolve_partition(Some("00,11"), None, None).unwrap();
        assert_eq!(listed.green_values(), vec![0b00, 0b11]);
        let keyed = resolve_partition(None, Some("0a0bff"), None).unwrap();
        assert_eq!(keyed.n(), 2);
        assert!(keyed.is_effective());
        let wide = resolve_partition(None, Some("0a0bff"), Some(4)).unwrap();
        assert_eq!(wide.n(), 4);
        assert!(matches!(
            resolve_partition(Some("01,10"), Some("aa"), None),
            Err(ExperimentError::BothGreenAndKey)
        ));
        assert!(matches!(
            resolve_partition(None, Some("0a0"), None),
            Err(ExperimentError::BadKeyHex(_))
        ));
        assert!(matches!(
            resolve_partition(None, Some("zz"), None),
            Err(ExperimentError::BadKeyHex(_))
        ));
    }

    #[test]
    fn seed_derivation_disperses() {
        let a = derive_seed(7, 1, 0);
        let b = derive_seed(7, 1, 1);
        let c = derive_seed(7, 2, 0);
        let d = derive_seed(8, 1, 0);
        assert!(a != b && a != c && a != d && b != c);
        assert_eq!(a, derive_seed(7, 1, 0));
    }

    fn flat_profile_file() -> tempfile::NamedTempFile {
        // Target 1.0 calibrates to sigma = 0 instantly: uniform bits.
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "1.0").unwrap();
        f.flush().unwrap();
        f
    }

    fn tiny_spec(profile_path: &str) -> ExperimentSpec {
        ExperimentSpec {
            profile: profile_path.to_string(),
            schedule: "single:32x8".into(),
            deltas: vec![0.0, 3.0],
            attacks: vec!["none".into(), "noise-strong".into()],
            n_pos: 30,
            n_neg: 30,
            fpr: 0.1,
            seed: 7,
            green: None,
            key: None,
            key_width: None,
            phi: 2.2,
            mixtures: vec![0.0, 50.0],
        }
    }

    #[test]
    fn tiny_experiment_end_to_end() {
        let profile = flat_profile_file();
        let spec = tiny_spec(profile.path().to_str().unwrap());
        let report = run_experiment(&spec).unwrap();

        assert_eq!(report.rows.len(), 4);
        let row = |delta: f64, attack: &str| {
            report
                .rows
                .iter()
                .find(|r| r.delta == delta && r.attack == attack)
                .unwrap()
        };
        // Bias shows up, noise knocks it down, null stays null.
        assert!(row(3.0, "none").mean_z > 8.0);
        assert!(row(3.0, "none").mean_z > row(3.0, "noise-strong").mean_z);
        assert!(row(3.0, "noise-strong").mean_z > 2.0);
        assert!(row(0.0, "none").mean_z.abs() < 1.5);
        assert!(row(3.0, "none").tpr_at_fpr >= row(0.0, "none").tpr_at_fpr);
        assert!(row(3.0, "none").auc > 0.95);
        assert!((report.negative_mean_fraction - 0.5).abs() < 0.05);
        assert!((report.threshold_gaussian - 1.2816).abs() < 1e-3);

        // Mixtures: 50% watermarked separates, 0% does not.
        assert_eq!(report.mixture_rows.len(), 2);
        let p0 = report.mixture_rows[0].p;
        let p50 = report.mixture_rows[1].p;
        assert!(p50 < p0, "p50 {p50} vs p0 {p0}");
        assert!(p50 < 0.01, "p50 {p50}");
        assert!((0.02..=0.98).contains(&p0), "p0 {p0}");

        // Scores cover negatives plus every (delta, attack) population.
        assert_eq!(report.scores.len(), 30 + 4 * 30);
        let csv = scores_csv(&report);
        assert_eq!(csv.lines().count(), 1 + report.scores.len());
        assert!(csv.starts_with("population,delta,attack,stream,green_fraction,z\n"));
        assert!(csv.contains("negative,,clean,0,"));
        assert!(csv.contains("positive,3,noise-strong,"));
    }

    #[test]
    fn reports_are_deterministic() {
        let profile = flat_profile_file();
        let spec = tiny_spec(profile.path().to_str().unwrap());
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(render_body(&a), render_body(&b));
        assert_eq!(scores_csv(&a), scores_csv(&b));
        // The timestamp lives in the header, not the body.
        assert!(render_header(123).contains("generated_unix=123"));
        assert!(!render_body(&a).contains("generated_unix"));
        // A different seed changes the body.
        let mut other = spec.clone();
        other.seed = 8;
        assert_ne!(render_body(&run_experiment(&other).unwrap()), render_body(&a));
    }

    #[test]
    fn run_rejects_bad_specs() {
        let profile = flat_profile_file();
        let path = profile.path().to_str().unwrap().to_string();
        let base = tiny_spec(&path);

        let mut bad = base.clone();
        bad.attacks = vec!["santa".into()];
        assert!(matches!(
            run_experiment(&bad),
            Err(ExperimentError::UnknownAttack(name)) if name == "santa"
        ));

        let mut bad = base.clone();
        bad.n_pos = 0;
        assert!(matches!(
            run_experiment(&bad),
            Err(ExperimentError::EmptyPopulation)
        ));

        let mut bad = base.clone();
        bad.deltas = vec![];
        assert!(matches!(run_experiment(&bad), Err(ExperimentError::NoDeltas)));

        let mut bad = base.clone();
        bad.fpr = 1.0;
        assert!(matches!(run_experiment(&bad), Err(ExperimentError::BadFpr(_))));

        let mut bad = base.clone();
        bad.mixtures = vec![101.0];
        assert!(matches!(
            run_experiment(&bad),
            Err(ExperimentError::BadMixture(_))
        ));

        let mut bad = base;
        bad.profile = "/definitely/missing/profile.txt".into();
        assert!(matches!(
            run_experiment(&bad),
            Err(ExperimentError::ReadFile { .. })
        ));
    }
}
