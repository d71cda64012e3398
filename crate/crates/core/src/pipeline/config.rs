use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::apriori::{Fraction, MiningParams};
use crate::clustering::{AlgorithmOptions, ClusterRegistry, FarthestFirst, KMeansParams, Metric};
use crate::preprocess::{UserIdMode, DEFAULT_SESSION_TIMEOUT};
use crate::reorganizer::DEFAULT_OUTDEG_THRESHOLD;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: expected key=value, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value {value:?} for {key}: {reason}")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Every tunable of the pipeline. Keys in the config file use the field names.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub alpha_seconds: f64,
    pub beta_clicks: usize,
    pub session_timeout_seconds: i64,
    pub k_clusters: usize,
    pub metric: Metric,
    pub cluster_algorithm: String,
    pub normalize_features: bool,
    pub kmeans_max_iter: usize,
    pub rank_limit: usize,
    pub upper_bound_support: Fraction,
    pub lower_bound_support: Fraction,
    pub delta: Fraction,
    pub min_confidence: Fraction,
    pub required_itemsets: usize,
    pub outdeg_threshold: usize,
    pub outlier_factor: f64,
    pub extreme_factor: f64,
    pub drop_extremes: bool,
    pub user_id_mode: UserIdMode,
    pub rng_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let mining = MiningParams::default();
        Self {
            alpha_seconds: 0.0,
            beta_clicks: 1,
            session_timeout_seconds: DEFAULT_SESSION_TIMEOUT,
            k_clusters: 3,
            metric: Metric::Euclid,
            cluster_algorithm: FarthestFirst::NAME.to_string(),
            normalize_features: false,
            kmeans_max_iter: KMeansParams::default().max_iter,
            rank_limit: 2,
            upper_bound_support: mining.upper_bound_support,
            lower_bound_support: mining.lower_bound_support,
            delta: mining.delta,
            min_confidence: mining.min_confidence,
            required_itemsets: mining.required_itemsets,
            outdeg_threshold: DEFAULT_OUTDEG_THRESHOLD,
            outlier_factor: 1.5,
            extreme_factor: 3.0,
            drop_extremes: true,
            user_id_mode: UserIdMode::IpAndAgent,
            rng_seed: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

impl PipelineConfig {
    /// Parses a `key=value` file on top of the defaults. `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut config = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: idx + 1,
                text: raw.to_string(),
            })?;
            config.set(key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "alpha_seconds" => self.alpha_seconds = parse(key, value)?,
            "beta_clicks" => self.beta_clicks = parse(key, value)?,
            "session_timeout_seconds" => self.session_timeout_seconds = parse(key, value)?,
            "k_clusters" => self.k_clusters = parse(key, value)?,
            "metric" => self.metric = parse(key, value)?,
            "cluster_algorithm" => self.cluster_algorithm = value.to_string(),
            "normalize_features" => self.normalize_features = parse(key, value)?,
            "kmeans_max_iter" => self.kmeans_max_iter = parse(key, value)?,
            "rank_limit" => self.rank_limit = parse(key, value)?,
            "upper_bound_support" => self.upper_bound_support = parse(key, value)?,
            "lower_bound_support" => self.lower_bound_support = parse(key, value)?,
            "delta" => self.delta = parse(key, value)?,
            "min_confidence" => self.min_confidence = parse(key, value)?,
            "required_itemsets" => self.required_itemsets = parse(key, value)?,
            "outdeg_threshold" => self.outdeg_threshold = parse(key, value)?,
            "outlier_factor" => self.outlier_factor = parse(key, value)?,
            "extreme_factor" => self.extreme_factor = parse(key, value)?,
            "drop_extremes" => self.drop_extremes = parse(key, value)?,
            "user_id_mode" => self.user_id_mode = parse(key, value)?,
            "rng_seed" => self.rng_seed = parse(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |msg: &str| Err(ConfigError::Invalid(msg.to_string()));
        if self.alpha_seconds.is_nan() || self.alpha_seconds < 0.0 {
            return invalid("alpha_seconds must be >= 0");
        }
        if self.session_timeout_seconds <= 0 {
            return invalid("session_timeout_seconds must be > 0");
        }
        if self.k_clusters == 0 {
            return invalid("k_clusters must be >= 1");
        }
        if self.rank_limit == 0 {
            return invalid("rank_limit must be >= 1");
        }
        if !(self.outlier_factor > 0.0 && self.extreme_factor >= self.outlier_factor) {
            return invalid("outlier factors must satisfy extreme_factor >= outlier_factor > 0");
        }
        if ClusterRegistry::with_builtins()
            .create(&self.cluster_algorithm, &self.algorithm_options())
            .is_err()
        {
            return Err(ConfigError::BadValue {
                key: "cluster_algorithm".into(),
                value: self.cluster_algorithm.clone(),
                reason: "not a registered algorithm".into(),
            });
        }
        self.mining_params()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn mining_params(&self) -> MiningParams {
        MiningParams {
            upper_bound_support: self.upper_bound_support,
            lower_bound_support: self.lower_bound_support,
            delta: self.delta,
            min_confidence: self.min_confidence,
            required_itemsets: self.required_itemsets,
        }
    }

    pub fn algorithm_options(&self) -> AlgorithmOptions {
        AlgorithmOptions {
            kmeans: KMeansParams {
                max_iter: self.kmeans_max_iter,
                min_iter: 0,
                rng_seed: self.rng_seed,
            },
        }
    }

    /// Renders the full configuration in the file format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let pairs: [(&str, String); 20] = [
            ("alpha_seconds", self.alpha_seconds.to_string()),
            ("beta_clicks", self.beta_clicks.to_string()),
            ("session_timeout_seconds", self.session_timeout_seconds.to_string()),
            ("k_clusters", self.k_clusters.to_string()),
            ("metric", self.metric.to_string()),
            ("cluster_algorithm", self.cluster_algorithm.clone()),
            ("normalize_features", self.normalize_features.to_string()),
            ("kmeans_max_iter", self.kmeans_max_iter.to_string()),
            ("rank_limit", self.rank_limit.to_string()),
            ("upper_bound_support", self.upper_bound_support.to_string()),
            ("lower_bound_support", self.lower_bound_support.to_string()),
            ("delta", self.delta.to_string()),
            ("min_confidence", self.min_confidence.to_string()),
            ("required_itemsets", self.required_itemsets.to_string()),
            ("outdeg_threshold", self.outdeg_threshold.to_string()),
            ("outlier_factor", self.outlier_factor.to_string()),
            ("extreme_factor", self.extreme_factor.to_string()),
            ("drop_extremes", self.drop_extremes.to_string()),
            ("user_id_mode", self.user_id_mode.to_string()),
            ("rng_seed", self.rng_seed.to_string()),
        ];
        for (k, v) in pairs {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }
}
