//! Parameter sets shared by command-line flags and config files.
//!
//! Every struct derives both `clap::Args` and `serde::Deserialize`; config defaults are the
//! clap defaults, so a config file and the equivalent flags describe the same run.

use std::path::PathBuf;

use clap::{Args, FromArgMatches, ValueEnum};
use serde::{Deserialize, Deserializer, Serialize};

/// Clap defaults for a parameter struct.
pub fn clap_default<T: Args + FromArgMatches>() -> T {
    let cmd = T::augment_args(clap::Command::new("defaults").no_binary_name(true));
    let matches = cmd.try_get_matches_from(std::iter::empty::<String>()).expect("all parameters have defaults");
    T::from_arg_matches(&matches).expect("defaults parse")
}

macro_rules! clap_defaults {
    ($($t:ty),*) => {
        $(impl Default for $t {
            fn default() -> Self {
                clap_default()
            }
        })*
    };
}

clap_defaults!(DatumArgs, NormArgs, ExponentsArgs, AiryArgs, VerifyArgs, OverlapArgs, GkdvArgs, BubbleArgs);

/// Accepts `"1/30"`, `6` or `0.04` for exponent-like values.
fn lenient<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum V {
        S(String),
        I(i64),
        F(f64),
    }
    Ok(match V::deserialize(d)? {
        V::S(s) => s,
        V::I(i) => i.to_string(),
        V::F(f) => f.to_string(),
    })
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputArgs {
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Write plot-ready CSV here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Input datum: a CSV file (`x, re, im`) or a member of a built-in family.
#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatumArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value = "gaussian")]
    pub family: String,
    #[arg(long, default_value_t = 0)]
    pub member: usize,
    #[arg(long, default_value_t = 4)]
    pub size: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 256)]
    pub n_x: usize,
    #[arg(long, default_value_t = 64.0)]
    pub box_length: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormKind {
    Lebesgue,
    HatLebesgue,
    Morrey,
    HatMorrey,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormArgs {
    #[command(flatten)]
    pub datum: DatumArgs,
    #[arg(long, value_enum, default_value = "hat-morrey")]
    pub kind: NormKind,
    #[arg(long, default_value = "2")]
    #[serde(deserialize_with = "lenient")]
    pub beta: String,
    #[arg(long, default_value = "3")]
    #[serde(deserialize_with = "lenient")]
    pub gamma: String,
    #[arg(long, default_value = "3")]
    #[serde(deserialize_with = "lenient")]
    pub delta: String,
    /// Weight `|ξ|^σ` on the transform (hat kinds).
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub j_min: Option<i32>,
    #[arg(long, allow_hyphen_values = true)]
    pub j_max: Option<i32>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    /// Classical pair `(p, q)`.
    #[value(name = "classical", alias = "C")]
    #[serde(rename = "classical", alias = "C")]
    Classical,
    /// Space-outer refinement.
    #[value(name = "S", alias = "s")]
    #[serde(alias = "s")]
    S,
    /// Time-outer refinement.
    #[value(name = "T", alias = "t")]
    #[serde(alias = "t")]
    T,
    /// Local well-posedness tuple.
    #[value(name = "lwp")]
    #[serde(rename = "lwp")]
    Lwp,
    /// Exponents of a named space-time norm.
    #[value(name = "space")]
    #[serde(rename = "space")]
    Space,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExponentsArgs {
    #[arg(long, value_enum, default_value = "S")]
    pub theorem: Theorem,
    #[arg(long, default_value = "6")]
    #[serde(deserialize_with = "lenient")]
    pub p: String,
    #[arg(long, default_value = "6")]
    #[serde(deserialize_with = "lenient")]
    pub q: String,
    #[arg(long, default_value = "1/30")]
    #[serde(deserialize_with = "lenient")]
    pub sigma: String,
    #[arg(long, default_value = "2")]
    #[serde(deserialize_with = "lenient")]
    pub alpha: String,
    #[arg(long, default_value = "1/2")]
    #[serde(deserialize_with = "lenient")]
    pub gamma_inv: String,
    #[arg(long, default_value = "21/50")]
    #[serde(deserialize_with = "lenient")]
    pub delta_inv: String,
    /// `one` or `two`.
    #[arg(long, default_value = "one")]
    pub assumption: String,
    /// Space tag for `--theorem space`: L, M, S, D-sigma, N or N-sigma.
    #[arg(long, default_value = "S")]
    pub tag: String,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AiryMode {
    /// Airy evolution of a datum on a time grid.
    Flow,
    /// The smooth cutoff of a region on a (τ, ξ) grid.
    Cutoff,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AiryArgs {
    #[arg(long, value_enum, default_value = "flow")]
    pub mode: AiryMode,
    #[command(flatten)]
    pub datum: DatumArgs,
    #[arg(long, default_value_t = 1.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 33)]
    pub n_t: usize,
    /// Region as `FAMILY,j,k,l`, e.g. `A,0,4,6`.
    #[arg(long, default_value = "A,0,4,6")]
    pub region: String,
    /// Enlargement; the canonical one when unset.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 256)]
    pub n_tau: usize,
    #[arg(long, default_value_t = 256)]
    pub n_xi: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyArgs {
    /// An estimate (`mixed`, `refined-space`, `refined-time`, `multiplier-space`,
    /// `multiplier-time`), a catalog entry, or `lacunary-gap`.
    #[arg(long, default_value = "refined-space")]
    pub spec: String,
    /// A family name or `all`.
    #[arg(long, default_value = "all")]
    pub family: String,
    #[arg(long, default_value_t = 4)]
    pub size: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Half-width of the time window; a fraction of the horizon when unset.
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub horizon_fraction: f64,
    #[arg(long, default_value_t = 256)]
    pub n_t: usize,
    #[arg(long, default_value_t = 0.05)]
    pub drift_tolerance: f64,
    /// Lacunary gap exponents.
    #[arg(long, default_value = "8")]
    #[serde(deserialize_with = "lenient")]
    pub p: String,
    #[arg(long, default_value = "8")]
    #[serde(deserialize_with = "lenient")]
    pub q: String,
    #[arg(long, default_value = "1/100")]
    #[serde(deserialize_with = "lenient")]
    pub sigma: String,
    #[arg(long, default_value_t = 8)]
    pub j_max: usize,
    #[arg(long, default_value_t = 256.0)]
    pub width: f64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OverlapArgs {
    /// `A` or `B`.
    #[arg(long, default_value = "A")]
    pub family: String,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 20_000)]
    pub adversarial: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = -12.0, allow_hyphen_values = true)]
    pub log_xi_min: f64,
    #[arg(long, default_value_t = 12.0, allow_hyphen_values = true)]
    pub log_xi_max: f64,
    #[arg(long, default_value_t = -20.0, allow_hyphen_values = true)]
    pub log_slope_min: f64,
    #[arg(long, default_value_t = 20.0, allow_hyphen_values = true)]
    pub log_slope_max: f64,
    /// Also fail when some per-m count exceeds 3.
    #[arg(long)]
    pub strict_per_m: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    Soliton,
    Gaussian,
    File,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GkdvArgs {
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub mu: f64,
    #[arg(long, default_value_t = 64.0)]
    pub box_length: f64,
    #[arg(long, default_value_t = 1024)]
    pub n_x: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    /// `if-rk4` or `etdrk4`.
    #[arg(long, default_value = "if-rk4")]
    pub integrator: String,
    #[arg(long, default_value_t = 1.0)]
    pub cfl: f64,
    #[arg(long, default_value_t = 0)]
    pub stride: usize,
    #[arg(long, value_enum, default_value = "soliton")]
    pub initial: InitialKind,
    /// Soliton speed.
    #[arg(long, default_value_t = 1.0)]
    pub speed: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub x0: f64,
    /// Gaussian `amplitude · exp(-x²/width²)`.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 2.0)]
    pub width: f64,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Stored states embedded in the report for plotting.
    #[arg(long, default_value_t = 16)]
    pub snapshots: usize,
    #[arg(long)]
    pub duhamel: bool,
    /// Small-data scattering diagnostic with the tuple below.
    #[arg(long)]
    pub scattering: bool,
    #[arg(long, default_value = "1/25")]
    #[serde(deserialize_with = "lenient")]
    pub sigma: String,
    #[arg(long, default_value = "1/2")]
    #[serde(deserialize_with = "lenient")]
    pub gamma_inv: String,
    #[arg(long, default_value = "21/50")]
    #[serde(deserialize_with = "lenient")]
    pub delta_inv: String,
    /// Fail (exit 2) when the relative L² drift exceeds this.
    #[arg(long)]
    pub max_mass_drift: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BubbleMode {
    Extract,
    Decouple,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BubbleArgs {
    #[arg(long, value_enum, default_value = "extract")]
    pub mode: BubbleMode,
    #[command(flatten)]
    pub datum: DatumArgs,
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    /// `scaling` or `literal`.
    #[arg(long, default_value = "scaling")]
    pub dilation: String,
    /// Planted deformation applied to the datum before extraction.
    #[arg(long, default_value_t = 1.0)]
    pub plant_n: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub plant_s: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub plant_y: f64,
    #[arg(long, default_value_t = -6, allow_hyphen_values = true)]
    pub log2_n_min: i32,
    #[arg(long, default_value_t = 6)]
    pub log2_n_max: i32,
    #[arg(long, default_value_t = 2.0)]
    pub s_max: f64,
    #[arg(long, default_value_t = 256)]
    pub s_steps: usize,
    #[arg(long, default_value_t = 8)]
    pub pad: usize,
    /// Separations `2^e` for the decoupling run, as exponents `e`.
    #[arg(long, value_delimiter = ',', default_value = "0,2,4,6,8,10,12")]
    pub separations: Vec<i32>,
    #[arg(long, default_value_t = 0.04)]
    pub decouple_sigma: f64,
    #[arg(long, default_value = "25/14")]
    #[serde(deserialize_with = "lenient")]
    pub beta: String,
    #[arg(long, default_value = "2")]
    #[serde(deserialize_with = "lenient")]
    pub gamma: String,
    #[arg(long, default_value = "50/21")]
    #[serde(deserialize_with = "lenient")]
    pub delta: String,
}

#[derive(Args, Debug, Clone)]
pub struct PlotArgs {
    /// A JSON report written by another subcommand.
    #[arg(long)]
    pub report: PathBuf,
    /// Output CSV; stdout when unset.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
