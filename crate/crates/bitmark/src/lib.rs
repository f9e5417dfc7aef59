//! Green/red-list watermarking for bitwise autoregressive streams.
//!
//! Models such as Infinity and Instella generate images as sequences of
//! m-bit tokens, scale by scale. This crate embeds a watermark by adding a
//! small bias δ to the logit of whichever next bit would complete a "green"
//! n-bit window, and detects it by counting green windows and forming a
//! one-proportion z statistic. Everything operates on abstract bit streams:
//! the model itself is behind the [`embed::LogitSource`] trait and the
//! pixel pipeline is approximated by per-scale binary symmetric channels.
//!
//! Modules:
//! - [`partition`], [`schedule`], [`stream`]: green/red lists, scale
//!   layouts, and validated bit streams.
//! - [`embed`]: biased sampling over a logit source.
//! - [`detect`]: green-window counting, z-scores, p-values.
//! - [`channel`]: re-encoding noise, named BSC presets, and the
//!   green-fraction flipping attack.
//! - [`synth`]: a calibrated synthetic logit source for desk-scale runs.
//! - [`eval`] and [`experiment`]: TPR/AUC/Mann-Whitney metrics and the
//!   reproducible sweep harness.
//! - [`format`]: the `BMK1` stream file format used by the CLI.

pub mod channel;
pub mod detect;
pub mod embed;
pub mod eval;
pub mod experiment;
pub mod format;
pub mod partition;
pub mod schedule;
pub mod stream;
pub mod synth;

pub use partition::{BitClass, Partition};
pub use schedule::ScaleSchedule;
pub use stream::BitStream;

pub use channel::{
    bit_flipper_attack, bsc_apply, default_reencode, expected_green_fraction_bsc, ChannelConfig,
    FlipperConfig,
};
pub use detect::{count_green, detect, p_value, z_score, DetectConfig, DetectionResult};
pub use embed::{bias_probability, embed_single_scale, embed_stream, EmbedConfig, LogitSource};
pub use eval::{auc, mann_whitney_u, threshold_at_fpr, tpr_at_fpr};
pub use synth::{calibrate_sigma, generate_clean, make_source, EntropyProfile, SynthSourceConfig};
