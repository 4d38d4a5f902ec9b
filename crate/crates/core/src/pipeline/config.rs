use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::adagap::{EstimateRule, DEFAULT_QUEUE_LEN};
use crate::error::{Error, Result};

/// Which score becomes the final `s_all`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Text proxies only (NegLabel baseline).
    Nl,
    /// Task-adaptive proxy score alone.
    Ta,
    /// Sample-adaptive proxy score alone.
    Sa,
    /// `s_nl + lambda * s_adaptive`.
    All,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Nl, Mode::Ta, Mode::Sa, Mode::All];
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Nl => "nl",
            Mode::Ta => "ta",
            Mode::Sa => "sa",
            Mode::All => "all",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nl" => Ok(Mode::Nl),
            "ta" => Ok(Mode::Ta),
            "sa" => Ok(Mode::Sa),
            "all" => Ok(Mode::All),
            other => Err(Error::ConfigInvalid(format!(
                "unknown mode {other:?} (expected nl, ta, sa or all)"
            ))),
        }
    }
}

/// Adaptive score fused with `s_nl` in [`Mode::All`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FuseWith {
    #[default]
    Sa,
    Ta,
}

/// Whether the current sample is cached before or after its adaptive score
/// is computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheOrder {
    #[default]
    CacheThenScore,
    ScoreThenCache,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaGapConfig {
    pub enabled: bool,
    pub queue_len: usize,
    pub estimate: EstimateRule,
}

impl Default for AdaGapConfig {
    fn default() -> Self {
        AdaGapConfig {
            enabled: false,
            queue_len: DEFAULT_QUEUE_LEN,
            estimate: EstimateRule::Threshold,
        }
    }
}

/// Hyperparameters of one stream run. Defaults: `L=10, gamma=0.5, g=0.5,
/// beta=5.5, lambda=0.1, tau=0.01`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub gamma: f64,
    pub gap: f64,
    pub beta: f64,
    pub lambda: f64,
    pub tau: f64,
    pub mem_len: usize,
    pub mode: Mode,
    pub fuse: FuseWith,
    pub order: CacheOrder,
    pub adagap: AdaGapConfig,
    /// Shuffle the stream with this seed before processing.
    pub seed: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            gamma: 0.5,
            gap: 0.5,
            beta: 5.5,
            lambda: 0.1,
            tau: 0.01,
            mem_len: 10,
            mode: Mode::All,
            fuse: FuseWith::Sa,
            order: CacheOrder::CacheThenScore,
            adagap: AdaGapConfig::default(),
            seed: None,
        }
    }
}

impl RunConfig {
    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_adagap(mut self, enabled: bool) -> Self {
        self.adagap.enabled = enabled;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::ConfigInvalid(format!("{what}, got {v}")));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must be in (0, 1)", self.gamma);
        }
        if !(0.0..=1.0).contains(&self.gap) {
            return bad("gap must be in [0, 1]", self.gap);
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta must be > 0", self.beta);
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be >= 0", self.lambda);
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau must be > 0", self.tau);
        }
        if self.mem_len == 0 {
            return Err(Error::ConfigInvalid("mem_len must be >= 1".into()));
        }
        if self.adagap.enabled && self.adagap.queue_len == 0 {
            return Err(Error::ConfigInvalid("adagap.queue_len must be >= 1".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_setup() {
        let c = RunConfig::default();
        assert_eq!(
            (c.mem_len, c.gamma, c.gap, c.beta, c.lambda, c.tau),
            (10, 0.5, 0.5, 5.5, 0.1, 0.01)
        );
        assert_eq!(c.adagap.queue_len, 10_000);
        assert!(!c.adagap.enabled);
        c.validate().unwrap();
    }

    #[test]
    fn validation_rejects_out_of_range() {
        let base = RunConfig::default();
        for cfg in [
            RunConfig { gamma: 0.0, ..base },
            RunConfig { gamma: 1.0, ..base },
            RunConfig { gap: 1.5, ..base },
            RunConfig { beta: 0.0, ..base },
            RunConfig { lambda: -0.1, ..base },
            RunConfig { tau: 0.0, ..base },
            RunConfig { mem_len: 0, ..base },
        ] {
            assert!(matches!(cfg.validate(), Err(Error::ConfigInvalid(_))), "{cfg:?}");
        }
    }

    #[test]
    fn parses_partial_json() {
        let c = RunConfig::from_json(
            r#"{"gamma": 0.4, "mode": "ta", "adagap": {"enabled": true, "queue_len": 50}}"#,
        )
        .unwrap();
        assert_eq!(c.gamma, 0.4);
        assert_eq!(c.mode, Mode::Ta);
        assert!(c.adagap.enabled);
        assert_eq!(c.adagap.queue_len, 50);
        assert_eq!(c.beta, 5.5);
        assert!(RunConfig::from_json(r#"{"gama": 0.4}"#).is_err());
        assert!(RunConfig::from_json(r#"{"gap": 2.0}"#).is_err());
    }

    #[test]
    fn mode_parses() {
        for m in Mode::ALL {
            assert_eq!(m.to_string().parse::<Mode>().unwrap(), m);
        }
        assert!("both".parse::<Mode>().is_err());
    }
}
