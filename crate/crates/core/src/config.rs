//! Run settings shared by the command-line tool.
//!
//! Settings come from three layers: command-line flags, an optional TOML
//! file, and built-in defaults. [`Settings`] is one layer with every field
//! optional; [`RunConfig::resolve`] merges two layers over the defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::combiner::Trust;
use crate::dop::ProjectionLimits;
use crate::error::{Error, Result};
use crate::learner::LearnerConfig;
use crate::scalar::Ratio;

/// A threshold as written in a config file: a number or a string such as
/// `"3/4"`.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum RatioText {
    Number(f64),
    Text(String),
}

impl RatioText {
    fn parse<T: Ratio>(&self, key: &str) -> Result<T> {
        let parsed = match self {
            RatioText::Number(v) => T::parse_ratio(&v.to_string()),
            RatioText::Text(s) => T::parse_ratio(s),
        };
        parsed.ok_or_else(|| Error::Input(format!("{key}: not a ratio: {self:?}")))
    }
}

impl From<&str> for RatioText {
    fn from(s: &str) -> Self {
        RatioText::Text(s.to_string())
    }
}

/// One layer of settings.
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    pub corpus: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub timing_out: Option<PathBuf>,
    pub table_out: Option<PathBuf>,

    pub theta_start: Option<RatioText>,
    pub theta_floor: Option<RatioText>,
    pub theta_step: Option<RatioText>,
    pub tau_abs: Option<u64>,
    pub tau_frac: Option<RatioText>,
    pub retreat: Option<bool>,

    pub seed: Option<u64>,
    pub splits: Option<usize>,
    pub train_size: Option<usize>,
    pub test_size: Option<usize>,
    pub min_len: Option<usize>,

    pub depth: Option<usize>,
    pub sites: Option<usize>,
    pub words: Option<usize>,
    pub consecutive: Option<usize>,

    pub trust: Option<String>,
    pub jobs: Option<usize>,
    pub verbose: Option<u8>,
}

impl Settings {
    pub fn from_toml(text: &str) -> Result<Settings> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::format(line, e.message().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Settings> {
        Settings::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Fields set in `self` win over `lower`.
    pub fn over(self, lower: Settings) -> Settings {
        macro_rules! pick {
            ($($f:ident),*) => { Settings { $($f: self.$f.or(lower.$f)),* } };
        }
        pick!(
            corpus,
            lexicon,
            out,
            timing_out,
            table_out,
            theta_start,
            theta_floor,
            theta_step,
            tau_abs,
            tau_frac,
            retreat,
            seed,
            splits,
            train_size,
            test_size,
            min_len,
            depth,
            sites,
            words,
            consecutive,
            trust,
            jobs,
            verbose
        )
    }
}

/// Fully resolved settings. Paths stay optional because not every
/// subcommand needs every path.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub timing_out: Option<PathBuf>,
    pub table_out: Option<PathBuf>,
    theta_start: RatioText,
    theta_floor: RatioText,
    theta_step: RatioText,
    tau_frac: RatioText,
    pub tau_abs: u64,
    pub retreat: bool,
    /// Default 1.
    pub seed: u64,
    /// Default 1.
    pub splits: usize,
    /// `None` means nine tenths of the corpus.
    pub train_size: Option<usize>,
    /// `None` means one tenth of the corpus.
    pub test_size: Option<usize>,
    /// Default 2.
    pub min_len: usize,
    pub limits: ProjectionLimits,
    pub trust: Trust,
    /// Default 1.
    pub jobs: usize,
    pub verbose: u8,
}

impl RunConfig {
    /// `flags` over `file` over the defaults.
    pub fn resolve(flags: Settings, file: Settings) -> Result<RunConfig> {
        let s = flags.over(file);
        let d = ProjectionLimits::default();
        let trust = match s.trust {
            Some(t) => t.parse().map_err(Error::Input)?,
            None => Trust::default(),
        };
        let cfg = RunConfig {
            corpus: s.corpus,
            lexicon: s.lexicon,
            out: s.out,
            timing_out: s.timing_out,
            table_out: s.table_out,
            theta_start: s.theta_start.unwrap_or_else(|| "1".into()),
            theta_floor: s.theta_floor.unwrap_or_else(|| "1".into()),
            theta_step: s.theta_step.unwrap_or_else(|| "1/20".into()),
            tau_frac: s.tau_frac.unwrap_or_else(|| "3/1000".into()),
            tau_abs: s.tau_abs.unwrap_or(10),
            retreat: s.retreat.unwrap_or(true),
            seed: s.seed.unwrap_or(1),
            splits: s.splits.unwrap_or(1),
            train_size: s.train_size,
            test_size: s.test_size,
            min_len: s.min_len.unwrap_or(2),
            limits: ProjectionLimits {
                depth: s.depth.unwrap_or(d.depth),
                sites: s.sites.unwrap_or(d.sites),
                words: s.words.unwrap_or(d.words),
                consecutive: s.consecutive.unwrap_or(d.consecutive),
            },
            trust,
            jobs: s.jobs.unwrap_or(1),
            verbose: s.verbose.unwrap_or(0),
        };
        if cfg.jobs == 0 {
            return Err(Error::Input("jobs must be at least 1".into()));
        }
        if cfg.splits == 0 {
            return Err(Error::Input("splits must be at least 1".into()));
        }
        cfg.limits.validate()?;
        cfg.learner::<f64>()?;
        Ok(cfg)
    }

    pub fn learner<T: Ratio>(&self) -> Result<LearnerConfig<T>> {
        let cfg = LearnerConfig {
            theta_start: self.theta_start.parse("theta-start")?,
            theta_floor: self.theta_floor.parse("theta-floor")?,
            theta_step: self.theta_step.parse("theta-step")?,
            tau_abs: self.tau_abs,
            tau_frac: self.tau_frac.parse("tau-frac")?,
            retreat: self.retreat,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
