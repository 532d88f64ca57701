//! TOML configuration with dotted-key overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shadowfreq_core::losses::{self, LossWeights};
use shadowfreq_core::metrics::{EvalOptions, RmseSpace, DEFAULT_THRESHOLD};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub brightness_ch: f64,
    pub frequency: f64,
    pub align: f64,
    /// Weight of the mask reconstruction loss in the total; unweighted when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recon: Option<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub c: f64,
    pub alpha: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            brightness_ch: 1.1,
            frequency: 0.3,
            align: 0.01,
            recon: None,
            lambda1: 0.5,
            lambda2: 0.5,
            c: 1.0,
            alpha: 1.0,
        }
    }
}

impl LossConfig {
    pub fn weights(&self) -> LossWeights {
        let mut w = LossWeights::default();
        w.0.insert(losses::BRIGHTNESS_CH.into(), self.brightness_ch);
        w.0.insert(losses::FREQUENCY.into(), self.frequency);
        w.0.insert(losses::ALIGN.into(), self.align);
        if let Some(r) = self.recon {
            w.0.insert(losses::RECON.into(), r);
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub rmse_space: RmseSpace,
    pub threshold: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            rmse_space: RmseSpace::Rgb,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveletConfig {
    /// Center-crop odd-sized inputs to even dimensions instead of rejecting them.
    pub crop: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub seed: u64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("shadowfreq-out"),
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub loss: LossConfig,
    pub metrics: MetricsConfig,
    pub wavelet: WaveletConfig,
    pub output: OutputConfig,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::validation(msg)
}

impl Config {
    /// Reads an optional file, applies `key=value` overrides in order and
    /// validates the result.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text =
                    std::fs::read_to_string(p).map_err(|e| CliError::io(format!("{}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| invalid(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let cfg: Config = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| invalid(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let l = &self.loss;
        let named = [
            ("loss.brightness_ch", l.brightness_ch),
            ("loss.frequency", l.frequency),
            ("loss.align", l.align),
            ("loss.recon", l.recon.unwrap_or(0.0)),
            ("loss.lambda1", l.lambda1),
            ("loss.lambda2", l.lambda2),
            ("loss.alpha", l.alpha),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(l.c.is_finite() && l.c > 0.0) {
            return Err(invalid(format!("loss.c must be finite and > 0, got {}", l.c)));
        }
        let t = self.metrics.threshold;
        if !(0.0..=255.0).contains(&t) {
            return Err(invalid(format!(
                "metrics.threshold must lie in [0, 255], got {t}"
            )));
        }
        Ok(())
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            threshold: self.metrics.threshold,
            space: self.metrics.rmse_space,
        }
    }
}

/// Sets `section.key = value`, where the value is parsed as TOML and falls
/// back to a plain string.
fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| invalid(format!("override {item:?} is not key=value")))?;
    let value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let mut parts: Vec<&str> = key.trim().split('.').collect();
    let last = parts
        .pop()
        .filter(|k| !k.is_empty())
        .ok_or_else(|| invalid(format!("empty key in {item:?}")))?;
    let mut cursor = table;
    for part in parts {
        cursor = cursor
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| invalid(format!("{part} is not a section")))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = Config::load(None, &[]).unwrap();
        assert_eq!(cfg.loss.brightness_ch, 1.1);
        assert_eq!(cfg.loss.frequency, 0.3);
        assert_eq!(cfg.loss.align, 0.01);
        assert_eq!(cfg.metrics.threshold, 30.0);
    }

    #[test]
    fn overrides_and_rejections() {
        let cfg = Config::load(
            None,
            &["loss.frequency=0".into(), "metrics.rmse_space=lab".into()],
        )
        .unwrap();
        assert_eq!(cfg.loss.frequency, 0.0);
        assert_eq!(cfg.metrics.rmse_space, RmseSpace::Lab);
        assert!(Config::load(None, &["loss.align=-1".into()]).is_err());
        assert!(Config::load(None, &["metrics.threshold=300".into()]).is_err());
        assert!(Config::load(None, &["loss.bogus=1".into()]).is_err());
        assert!(Config::load(None, &["novalue".into()]).is_err());
    }

    #[test]
    fn file_then_override() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[loss]\nfrequency = 0.7\n[wavelet]\ncrop = true\n").unwrap();
        let cfg = Config::load(Some(&path), &["loss.align=0.5".into()]).unwrap();
        assert_eq!(
            (cfg.loss.frequency, cfg.loss.align, cfg.wavelet.crop),
            (0.7, 0.5, true)
        );
        let err = Config::load(Some(&dir.path().join("missing.toml")), &[]).unwrap_err();
        assert_eq!(err.code, crate::error::EXIT_IO);
    }
}
