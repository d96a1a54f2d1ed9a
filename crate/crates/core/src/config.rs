//! Flat `key = value` configuration covering every tunable of the pipeline.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::augment::AugmentConfig;
use crate::consensus::ErasureConfig;
use crate::error::{Error, Result};
use crate::redetect::RedetectConfig;
use crate::tracker::TrackerConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub tracker: TrackerConfig,
    pub erasure: ErasureConfig,
    pub redetect: RedetectConfig,
    pub augment: AugmentConfig,
    /// Consecutive NotFound frames before switching to global search.
    pub lost_after: usize,
    pub consensus_every_n: usize,
    pub search_seed: u64,
    pub enable_consensus: bool,
    /// false means every grid tile is searched on each lost frame.
    pub enable_random_search: bool,
    pub enable_penalty: bool,
    pub enable_bg_augment: bool,
    /// Number of evenly spaced confidence thresholds in [0, 1].
    pub eval_thresholds: usize,
    pub suite_seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            tracker: TrackerConfig::default(),
            erasure: ErasureConfig::default(),
            redetect: RedetectConfig::default(),
            augment: AugmentConfig::default(),
            lost_after: 3,
            consensus_every_n: 1,
            search_seed: 31,
            enable_consensus: true,
            enable_random_search: true,
            enable_penalty: true,
            enable_bg_augment: true,
            eval_thresholds: 101,
            suite_seed: 42,
        }
    }
}

enum Value<'a> {
    F(&'a mut f64),
    U(&'a mut usize),
    Seed(&'a mut u64),
    B(&'a mut bool),
    List(&'a mut Vec<f64>),
    Path(&'a mut Option<PathBuf>),
}

impl Value<'_> {
    fn render(&self) -> String {
        match self {
            Value::F(v) => format!("{v:?}"),
            Value::U(v) => v.to_string(),
            Value::Seed(v) => v.to_string(),
            Value::B(v) => v.to_string(),
            Value::List(v) => {
                let items: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
                format!("[{}]", items.join(", "))
            }
            Value::Path(v) => v.as_ref().map_or(String::new(), |p| p.display().to_string()),
        }
    }

    fn set(&mut self, raw: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(raw: &str) -> std::result::Result<T, String> {
            raw.parse().map_err(|_| format!("cannot parse {raw:?}"))
        }
        match self {
            Value::F(v) => **v = num(raw)?,
            Value::U(v) => **v = num(raw)?,
            Value::Seed(v) => **v = num(raw)?,
            Value::B(v) => **v = num(raw)?,
            Value::List(v) => {
                **v = serde_json::from_str(raw).map_err(|e| format!("expected a list of numbers: {e}"))?
            }
            Value::Path(v) => **v = (!raw.is_empty()).then(|| PathBuf::from(raw)),
        }
        Ok(())
    }
}

impl Config {
    fn fields(&mut self) -> Vec<(&'static str, Value<'_>)> {
        let t = &mut self.tracker;
        let e = &mut self.erasure;
        let r = &mut self.redetect;
        let a = &mut self.augment;
        vec![
            ("tau_not_found", Value::F(&mut t.tau_not_found)),
            ("tau_uncertain", Value::F(&mut t.tau_uncertain)),
            ("second_peak_ratio", Value::F(&mut t.second_peak_ratio)),
            ("peak_exclusion", Value::F(&mut t.peak_exclusion)),
            ("learning_rate", Value::F(&mut t.learning_rate)),
            ("memory_capacity", Value::U(&mut t.capacity)),
            ("ridge", Value::F(&mut t.ridge)),
            ("search_scale", Value::F(&mut t.search_scale)),
            ("feature_size", Value::U(&mut t.feature_size)),
            ("label_sigma", Value::F(&mut t.label_sigma)),
            ("scale_steps", Value::List(&mut t.scale_steps)),
            ("scale_penalty", Value::F(&mut t.scale_penalty)),
            ("window_taper", Value::F(&mut t.window_taper)),
            ("feature_std_floor", Value::F(&mut t.feature_std_floor)),
            ("recenter_fraction", Value::F(&mut t.recenter_fraction)),
            ("extra_sample_weight", Value::F(&mut t.extra_sample_weight)),
            ("rotate_degrees", Value::F(&mut t.rotate_degrees)),
            ("blur_sigma", Value::F(&mut t.blur_sigma)),
            ("erase_k", Value::U(&mut e.k)),
            ("erase_size_min", Value::F(&mut e.size_range.0)),
            ("erase_size_max", Value::F(&mut e.size_range.1)),
            ("iou_agree", Value::F(&mut e.iou_agree)),
            ("agree_min", Value::F(&mut e.agree_min)),
            ("erase_seed", Value::Seed(&mut e.rng_seed)),
            ("allow_upgrade", Value::B(&mut e.allow_upgrade)),
            ("w_b", Value::F(&mut r.penalty.w_b)),
            ("w_d", Value::F(&mut r.penalty.w_d)),
            ("w_t", Value::F(&mut r.penalty.w_t)),
            ("tau_redet", Value::F(&mut r.tau_redet)),
            ("search_beta", Value::F(&mut r.beta)),
            ("search_n_min", Value::U(&mut r.n_min)),
            ("search_n_max", Value::U(&mut r.n_max)),
            ("search_seed", Value::Seed(&mut self.search_seed)),
            ("aug_n_first", Value::U(&mut a.n_first)),
            ("aug_n_online", Value::U(&mut a.n_online)),
            ("tau_aug", Value::F(&mut a.tau_aug)),
            ("bg_pool_dir", Value::Path(&mut a.bg_pool_dir)),
            ("aug_seed", Value::Seed(&mut a.rng_seed)),
            ("lost_after", Value::U(&mut self.lost_after)),
            ("consensus_every_n", Value::U(&mut self.consensus_every_n)),
            ("enable_consensus", Value::B(&mut self.enable_consensus)),
            ("enable_random_search", Value::B(&mut self.enable_random_search)),
            ("enable_penalty", Value::B(&mut self.enable_penalty)),
            ("enable_bg_augment", Value::B(&mut self.enable_bg_augment)),
            ("eval_thresholds", Value::U(&mut self.eval_thresholds)),
            ("suite_seed", Value::Seed(&mut self.suite_seed)),
        ]
    }

    /// Every key with its current value, one `key = value` line each.
    pub fn to_text(&self) -> String {
        let mut copy = self.clone();
        let mut out = String::new();
        for (k, v) in copy.fields() {
            let _ = writeln!(out, "{k} = {}", v.render());
        }
        out
    }

    /// Parses `key = value` lines over the defaults. Blank lines and lines
    /// starting with `#` are skipped; unknown or repeated keys are errors.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        let mut seen = BTreeSet::new();
        {
            let mut fields = cfg.fields();
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, raw) = line
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
                let key = key.trim();
                let (_, slot) = fields
                    .iter_mut()
                    .find(|(k, _)| *k == key)
                    .ok_or_else(|| Error::Config(format!("line {}: unknown key `{key}`", i + 1)))?;
                if !seen.insert(key.to_string()) {
                    return Err(Error::Config(format!("line {}: duplicate key `{key}`", i + 1)));
                }
                slot.set(raw.trim())
                    .map_err(|m| Error::Config(format!("line {}: {key}: {m}", i + 1)))?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn keys() -> Vec<&'static str> {
        Config::default().fields().into_iter().map(|(k, _)| k).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tracker;
        if !(0.0 <= t.tau_not_found && t.tau_not_found <= t.tau_uncertain) {
            return Err(Error::Config("need 0 <= tau_not_found <= tau_uncertain".into()));
        }
        if !(0.0 < t.learning_rate && t.learning_rate <= 1.0) {
            return Err(Error::Config("learning_rate must be in (0, 1]".into()));
        }
        if t.capacity == 0 || t.feature_size < 8 || !(t.ridge > 0.0) || !(t.search_scale > 1.0) {
            return Err(Error::Config(
                "need memory_capacity >= 1, feature_size >= 8, ridge > 0, search_scale > 1".into(),
            ));
        }
        if t.scale_steps.is_empty() || t.scale_steps.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("scale_steps must be a non-empty list of positive numbers".into()));
        }
        self.erasure.validate()?;
        self.redetect.validate()?;
        if self.augment.tau_aug < t.tau_uncertain {
            return Err(Error::Config("tau_aug must be >= tau_uncertain".into()));
        }
        if self.lost_after == 0 || self.consensus_every_n == 0 {
            return Err(Error::Config("lost_after and consensus_every_n must be >= 1".into()));
        }
        if self.eval_thresholds < 2 {
            return Err(Error::Config("eval_thresholds must be >= 2".into()));
        }
        Ok(())
    }

    /// Same settings with all four mechanisms switched off.
    pub fn baseline(&self) -> Self {
        Self {
            enable_consensus: false,
            enable_random_search: false,
            enable_penalty: false,
            enable_bg_augment: false,
            ..self.clone()
        }
    }
}
