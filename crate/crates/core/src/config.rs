//! Run configuration: built-in profiles, `key = value` files with
//! `[section]` headers, and command-line overrides.
//!
//! Resolution order, last wins: profile defaults, config file, flags. The
//! profile itself is picked the same way (`general.profile`).

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use crate::data::DatasetFormat;
use crate::encoder::{EncoderKind, FrequencySchedule, Normalization};
use crate::error::{config, Error, Result};
use crate::train::{OptimizerKind, SurrogateParams, TrainConfig};
use crate::transforms::BlockSpec;

/// Flattened `section.key → value` settings.
pub type Settings = BTreeMap<String, String>;

/// Every recognised key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    (
        "general.profile",
        "built-in defaults to start from: full or desk",
    ),
    ("general.seed", "master seed for every random stream"),
    ("general.dataset", "dataset directory"),
    ("general.format", "idx or cifar-binary"),
    (
        "general.arch",
        "preset name (tiny, digits, vgg5) or layer descriptor",
    ),
    (
        "general.train_limit",
        "use only the first N training images (0 = all)",
    ),
    (
        "general.test_limit",
        "use only the first N test images (0 = all)",
    ),
    (
        "general.timing",
        "record wall-clock seconds in metrics; off keeps metrics byte-reproducible",
    ),
    ("encoder.kind", "dct, pca, rand-ortho, rand or poisson"),
    ("encoder.block_size", "block side n"),
    ("encoder.stride", "block stride"),
    ("encoder.padding", "zero padding per side"),
    (
        "encoder.cycles",
        "full passes over the schedule when timesteps is auto",
    ),
    (
        "encoder.timesteps",
        "total timesteps T, or auto for cycles x curtail",
    ),
    (
        "encoder.curtail",
        "leading zigzag bases kept per cycle, or auto for n^2",
    ),
    ("encoder.normalization", "level-shift or unit"),
    (
        "encoder.neg_percentile",
        "generator negative threshold percentile",
    ),
    (
        "encoder.pos_percentile",
        "generator positive threshold percentile",
    ),
    ("convert.calib_size", "training images used for calibration"),
    (
        "convert.calib_cycles",
        "cycles of accumulation sampled for generator calibration",
    ),
    (
        "convert.threshold_percentile",
        "LIF threshold percentile (100 = maximum)",
    ),
    ("snn.leak", "membrane leak factor"),
    ("snn.surrogate_gamma", "surrogate gradient damping"),
    ("ann-train.optimizer", "sgd or adam"),
    ("ann-train.lr", "initial learning rate"),
    (
        "ann-train.lr_decay",
        "learning-rate factor applied every lr_step epochs",
    ),
    ("ann-train.lr_step", "epochs between learning-rate decays"),
    ("ann-train.momentum", "SGD momentum"),
    ("ann-train.weight_decay", "L2 weight decay"),
    ("ann-train.epochs", "training epochs"),
    ("ann-train.batch_size", "minibatch size"),
    ("snn-train.optimizer", "sgd or adam"),
    ("snn-train.lr", "initial learning rate"),
    (
        "snn-train.lr_decay",
        "learning-rate factor applied every lr_step epochs",
    ),
    ("snn-train.lr_step", "epochs between learning-rate decays"),
    ("snn-train.momentum", "SGD momentum"),
    ("snn-train.weight_decay", "L2 weight decay"),
    ("snn-train.epochs", "training epochs"),
    ("snn-train.batch_size", "minibatch size"),
];

const FULL: &[(&str, &str)] = &[
    ("general.profile", "full"),
    ("general.seed", "0"),
    ("general.format", "cifar-binary"),
    ("general.arch", "vgg5"),
    ("general.train_limit", "0"),
    ("general.test_limit", "0"),
    ("general.timing", "false"),
    ("encoder.kind", "dct"),
    ("encoder.block_size", "4"),
    ("encoder.stride", "2"),
    ("encoder.padding", "1"),
    ("encoder.cycles", "3"),
    ("encoder.timesteps", "auto"),
    ("encoder.curtail", "auto"),
    ("encoder.normalization", "level-shift"),
    ("encoder.neg_percentile", "6.5"),
    ("encoder.pos_percentile", "93.5"),
    ("convert.calib_size", "512"),
    ("convert.calib_cycles", "1"),
    ("convert.threshold_percentile", "99.9"),
    ("snn.leak", "0.9901"),
    ("snn.surrogate_gamma", "0.3"),
    ("ann-train.optimizer", "sgd"),
    ("ann-train.lr", "0.1"),
    ("ann-train.lr_decay", "0.1"),
    ("ann-train.lr_step", "100"),
    ("ann-train.momentum", "0.9"),
    ("ann-train.weight_decay", "0.0001"),
    ("ann-train.epochs", "300"),
    ("ann-train.batch_size", "64"),
    ("snn-train.optimizer", "adam"),
    ("snn-train.lr", "0.0001"),
    ("snn-train.lr_decay", "0.5"),
    ("snn-train.lr_step", "5"),
    ("snn-train.momentum", "0"),
    ("snn-train.weight_decay", "0.0005"),
    ("snn-train.epochs", "20"),
    ("snn-train.batch_size", "64"),
];

/// Overrides on top of `FULL` for the 28×28 digit fixture on one core.
const DESK: &[(&str, &str)] = &[
    ("general.profile", "desk"),
    ("general.format", "idx"),
    ("general.arch", "digits"),
    ("encoder.stride", "4"),
    ("encoder.padding", "0"),
    ("convert.calib_size", "256"),
    ("ann-train.lr", "0.05"),
    ("ann-train.lr_step", "6"),
    ("ann-train.epochs", "12"),
    ("ann-train.batch_size", "32"),
    ("snn-train.epochs", "3"),
    ("snn-train.batch_size", "32"),
];

pub const PROFILES: &[&str] = &["full", "desk"];

/// Default settings of a built-in profile.
pub fn profile(name: &str) -> Result<Settings> {
    let mut s: Settings = FULL
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    match name {
        "full" => {}
        "desk" => s.extend(DESK.iter().map(|(k, v)| (k.to_string(), v.to_string()))),
        other => {
            return Err(config(format!(
                "unknown profile `{other}` (expected one of {})",
                PROFILES.join(", ")
            )))
        }
    }
    Ok(s)
}

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

/// Parses a config file. Keys before the first `[section]` belong to
/// `general`; `#` and `;` start comment lines.
pub fn parse_config(text: &str) -> Result<Settings> {
    let mut out = Settings::new();
    let mut section = String::from("general");
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = i + 1;
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| config(format!("line {lineno}: unterminated section header")))?
                .trim();
            if name.is_empty() {
                return Err(config(format!("line {lineno}: empty section name")));
            }
            section = name.to_string();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| config(format!("line {lineno}: expected `key = value`")))?;
        let key = format!("{section}.{}", k.trim());
        if !known(&key) {
            return Err(config(format!("line {lineno}: unknown key `{key}`")));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(config(format!("line {lineno}: `{key}` set twice")));
        }
    }
    Ok(out)
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub profile: String,
    pub seed: u64,
    pub dataset: Option<PathBuf>,
    pub format: DatasetFormat,
    pub arch: String,
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    pub timing: bool,
    pub encoder: EncoderKind,
    pub block_size: usize,
    pub stride: usize,
    pub padding: usize,
    pub cycles: usize,
    timesteps: Option<usize>,
    curtail: Option<usize>,
    pub normalization: Normalization,
    pub generator_percentiles: (f64, f64),
    pub calib_size: usize,
    pub calib_cycles: usize,
    pub threshold_percentile: f64,
    pub leak: f64,
    pub surrogate: SurrogateParams,
    pub ann: TrainConfig,
    pub snn: TrainConfig,
}

struct Reader<'a>(&'a Settings);

impl Reader<'_> {
    fn raw(&self, key: &str) -> Result<&str> {
        self.0
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| config(format!("missing setting `{key}`")))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.raw(key)?;
        v.parse()
            .map_err(|e| config(format!("`{key}` = `{v}`: {e}")))
    }

    fn auto(&self, key: &str) -> Result<Option<usize>> {
        match self.raw(key)? {
            "auto" => Ok(None),
            _ => self.get(key).map(Some),
        }
    }

    fn limit(&self, key: &str) -> Result<Option<usize>> {
        let n: usize = self.get(key)?;
        Ok((n > 0).then_some(n))
    }

    fn train(&self, section: &str, seed: u64) -> Result<TrainConfig> {
        let k = |name: &str| format!("{section}.{name}");
        let cfg = TrainConfig {
            optimizer: self.get::<OptimizerKind>(&k("optimizer"))?,
            lr: self.get(&k("lr"))?,
            lr_decay: self.get(&k("lr_decay"))?,
            lr_step: self.get(&k("lr_step"))?,
            momentum: self.get(&k("momentum"))?,
            weight_decay: self.get(&k("weight_decay"))?,
            epochs: self.get(&k("epochs"))?,
            batch_size: self.get(&k("batch_size"))?,
            seed,
        };
        cfg.validate()
            .map_err(|e| config(format!("[{section}]: {e}")))?;
        Ok(cfg)
    }
}

/// Merges the layers: profile named by flag, else file, else `full`.
pub fn merge(file: &Settings, flags: &Settings) -> Result<Settings> {
    for key in flags.keys() {
        if !known(key) {
            return Err(config(format!("unknown key `{key}`")));
        }
    }
    let name = flags
        .get("general.profile")
        .or_else(|| file.get("general.profile"))
        .map_or("full", String::as_str);
    let mut s = profile(name)?;
    s.extend(file.iter().map(|(k, v)| (k.clone(), v.clone())));
    s.extend(flags.iter().map(|(k, v)| (k.clone(), v.clone())));
    Ok(s)
}

impl RunConfig {
    /// Resolves `flags` over an optional config file over profile defaults.
    pub fn resolve(file: Option<&str>, flags: &Settings) -> Result<Self> {
        let file = match file {
            Some(text) => parse_config(text)?,
            None => Settings::new(),
        };
        Self::from_settings(&merge(&file, flags)?)
    }

    pub fn from_settings(s: &Settings) -> Result<Self> {
        let r = Reader(s);
        let seed = r.get("general.seed")?;
        let dataset = match r.raw("general.dataset") {
            Ok(p) if !p.is_empty() => Some(PathBuf::from(p)),
            _ => None,
        };
        let cfg = RunConfig {
            profile: r.raw("general.profile")?.to_string(),
            seed,
            dataset,
            format: r.get("general.format")?,
            arch: r.raw("general.arch")?.to_string(),
            train_limit: r.limit("general.train_limit")?,
            test_limit: r.limit("general.test_limit")?,
            timing: r.get("general.timing")?,
            encoder: r.get("encoder.kind")?,
            block_size: r.get("encoder.block_size")?,
            stride: r.get("encoder.stride")?,
            padding: r.get("encoder.padding")?,
            cycles: r.get("encoder.cycles")?,
            timesteps: r.auto("encoder.timesteps")?,
            curtail: r.auto("encoder.curtail")?,
            normalization: r.get("encoder.normalization")?,
            generator_percentiles: (
                r.get("encoder.neg_percentile")?,
                r.get("encoder.pos_percentile")?,
            ),
            calib_size: r.get("convert.calib_size")?,
            calib_cycles: r.get("convert.calib_cycles")?,
            threshold_percentile: r.get("convert.threshold_percentile")?,
            leak: r.get("snn.leak")?,
            surrogate: SurrogateParams::new(r.get("snn.surrogate_gamma")?)
                .map_err(|e| config(format!("snn.surrogate_gamma: {e}")))?,
            ann: r.train("ann-train", seed)?,
            snn: r.train("snn-train", seed)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let n = self.block_size;
        self.block_spec()?;
        if self.cycles == 0 {
            return Err(config("cycles must be positive"));
        }
        let nn = n * n;
        if let Some(f) = self.curtail {
            if !(1..=nn).contains(&f) {
                return Err(config(format!("curtail {f} outside [1, {nn}]")));
            }
        }
        if self.timesteps == Some(0) {
            return Err(config("timesteps must be positive"));
        }
        let (lo, hi) = self.generator_percentiles;
        if !(0.0..=100.0).contains(&lo) || !(0.0..=100.0).contains(&hi) || lo >= hi {
            return Err(config(format!(
                "generator percentiles ({lo}, {hi}) must satisfy 0 <= neg < pos <= 100"
            )));
        }
        if !(self.threshold_percentile > 0.0 && self.threshold_percentile <= 100.0) {
            return Err(config("threshold percentile must lie in (0, 100]"));
        }
        if !(self.leak > 0.0 && self.leak <= 1.0) {
            return Err(config("leak must lie in (0, 1]"));
        }
        if self.calib_size == 0 || self.calib_cycles == 0 {
            return Err(config("calibration size and cycles must be positive"));
        }
        Ok(())
    }

    pub fn block_spec(&self) -> Result<BlockSpec> {
        BlockSpec::new(self.block_size, self.stride, self.padding)
            .map_err(|e| config(format!("block spec: {e}")))
    }

    /// Bases kept per cycle, `n²` unless curtailed.
    pub fn curtail(&self) -> usize {
        self.curtail.unwrap_or(self.block_size * self.block_size)
    }

    pub fn curtail_is_explicit(&self) -> bool {
        self.curtail.is_some()
    }

    /// Total timesteps: explicit, else `cycles × curtail`.
    pub fn timesteps(&self) -> usize {
        self.timesteps.unwrap_or(self.cycles * self.curtail())
    }

    pub fn timesteps_is_explicit(&self) -> bool {
        self.timesteps.is_some()
    }

    pub fn schedule(&self) -> Result<FrequencySchedule> {
        FrequencySchedule::cyclic(self.block_size, self.curtail(), self.timesteps())
            .map_err(|e| config(format!("schedule: {e}")))
    }

    /// Evaluation needs at least one complete cycle of all `n²` bases.
    pub fn check_eval_schedule(schedule: &FrequencySchedule, kind: EncoderKind) -> Result<()> {
        let nn = schedule.block_size() * schedule.block_size();
        if matches!(kind, EncoderKind::Transform(_)) && schedule.total_timesteps() < nn {
            return Err(Error::InvalidConfiguration(format!(
                "evaluation needs at least {nn} timesteps (one full cycle), got {}",
                schedule.total_timesteps()
            )));
        }
        Ok(())
    }
}
