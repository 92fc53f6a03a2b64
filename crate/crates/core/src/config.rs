//! Run configuration, read from TOML.
//!
//! ```toml
//! mode = "numeric"
//!
//! [source]
//! omega = 20.0
//! gamma = 0.05
//!
//! [geometry]
//! z = 40.0
//!
//! [barrier]
//! a = 1.0
//! segments = [{ length = 1.0, cutoff = 100.0 }]
//!
//! [grids]
//! t1 = { min = 41.0, max = 81.0, step = 0.5 }
//! t2 = { min = 75.0, max = 121.0, step = 0.5 }
//! ```
//!
//! A square barrier may also be given as `b` and `mu` instead of `segments`.
//! Any key can be overridden from the environment: `TUNNELCORR__SOURCE__GAMMA=0.1`
//! sets `source.gamma`. Values are parsed as TOML literals and fall back to strings.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::amplitude::{AmplitudeMode, Geometry, Model, Smoothing, SourceParams, DEFAULT_LIGHT_CONE_MARGIN};
use crate::correlation::Axis;
use crate::error::{Error, Result};
use crate::quadrature::QuadratureConfig;
use crate::scattering::{BarrierProfile, Segment};

pub const ENV_PREFIX: &str = "TUNNELCORR__";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierConfig {
    pub a: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<Segment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        Self {
            a: 1.0,
            segments: Vec::new(),
            b: None,
            mu: None,
        }
    }
}

impl BarrierConfig {
    pub fn profile(&self) -> Result<BarrierProfile> {
        match (self.b, self.mu) {
            (None, None) => BarrierProfile::new(self.a, self.segments.clone()),
            (Some(b), Some(mu)) => {
                if !self.segments.is_empty() {
                    return Err(Error::Config("barrier: give either segments or b and mu, not both".into()));
                }
                if !(b > self.a) {
                    return Err(Error::EmptyBarrier);
                }
                BarrierProfile::square(self.a, b - self.a, mu)
            }
            _ => Err(Error::Config("barrier: b and mu must be given together".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Sweep {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min > 0.0 && self.max >= self.min && self.n >= 1) {
            return Err(Error::invalid("grids.omega_sweep", "need 0 < min <= max and n >= 1"));
        }
        if self.n == 1 {
            return Ok(vec![self.min]);
        }
        let h = (self.max - self.min) / (self.n - 1) as f64;
        Ok((0..self.n).map(|i| self.min + i as f64 * h).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_sweep: Option<Sweep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelOptions {
    pub light_cone_margin: f64,
    pub smoothing: Smoothing,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            light_cone_margin: DEFAULT_LIGHT_CONE_MARGIN,
            smoothing: Smoothing::Sharp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            formats: vec!["csv".into(), "json".into()],
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_mode")]
    pub mode: AmplitudeMode,
    pub source: SourceParams,
    pub geometry: Geometry,
    #[serde(default)]
    pub barrier: BarrierConfig,
    #[serde(default)]
    pub grids: GridsConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub model: ModelOptions,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_mode() -> AmplitudeMode {
    AmplitudeMode::Numeric
}

impl RunConfig {
    /// Reads, applies environment overrides and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_with_env(&text, std::env::vars())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with_env(text, std::iter::empty())
    }

    pub fn from_toml_with_env(text: &str, vars: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut value: toml::Value = text.parse().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        apply_env_overrides(&mut value, vars)?;
        let cfg: RunConfig = value.try_into().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn profile(&self) -> Result<BarrierProfile> {
        self.barrier.profile()
    }

    pub fn build_model(&self) -> Result<Model> {
        let model = Model::new(self.source, self.geometry, self.profile()?)?
            .with_quadrature(self.quadrature)?
            .with_margin(self.model.light_cone_margin)?
            .with_smoothing(self.model.smoothing);
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let model = self.build_model()?;
        let profile = &model.profile;
        if !profile.is_free() && !(profile.a() < profile.b()) {
            return Err(Error::EmptyBarrier);
        }
        if let Smoothing::Logistic { width } = self.model.smoothing {
            if !(width.is_finite() && width > 0.0) {
                return Err(Error::invalid("model.smoothing", "logistic width must be finite and > 0"));
            }
        }
        model.check_mode(self.mode)?;
        for (name, axis) in [("grids.t1", self.grids.t1), ("grids.t2", self.grids.t2)] {
            if let Some(axis) = axis {
                axis.validate(name)?;
                model.check_light_cone(axis.min)?;
            }
        }
        if let Some(s) = self.grids.omega_sweep {
            s.values()?;
        }
        for f in &self.output.formats {
            if !matches!(f.as_str(), "csv" | "json") {
                return Err(Error::invalid("output.formats", format!("unknown format `{f}` (csv|json)")));
            }
        }
        Ok(())
    }
}

/// Applies `TUNNELCORR__SECTION__KEY=value` overrides to a parsed document.
pub fn apply_env_overrides(doc: &mut toml::Value, vars: impl IntoIterator<Item = (String, String)>) -> Result<()> {
    let mut vars: Vec<(String, String)> = vars.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    for (key, raw) in vars {
        let path: Vec<String> = key[ENV_PREFIX.len()..].split("__").map(|s| s.to_ascii_lowercase()).collect();
        if path.iter().any(|p| p.is_empty()) {
            return Err(Error::Config(format!("malformed override `{key}`")));
        }
        let value = parse_literal(&raw);
        let mut node = &mut *doc;
        for (i, part) in path.iter().enumerate() {
            let table = node
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("override `{key}`: `{}` is not a table", path[..i].join("."))))?;
            if i + 1 == path.len() {
                table.insert(part.clone(), value.clone());
                break;
            }
            node = table.entry(part.clone()).or_insert_with(|| toml::Value::Table(Default::default()));
        }
    }
    Ok(())
}

fn parse_literal(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
mode = "opaque"

[source]
omega = 20.0
gamma = 0.05

[geometry]
z = 40.0

[barrier]
a = 1.0
segments = [{ length = 1.0, cutoff = 100.0 }]

[grids]
t1 = { min = 41.0, max = 81.0, step = 0.5 }
t2 = { min = 75.0, max = 121.0, step = 0.5 }
omega_sweep = { min = 0.5, max = 150.0, n = 300 }
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = RunConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.mode, AmplitudeMode::OpaqueAsymptotic);
        assert_eq!(cfg.source.norm, 1.0);
        let echo = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&echo).unwrap(), cfg);
    }

    #[test]
    fn square_shorthand_and_empty_interval() {
        let text = SAMPLE.replace("segments = [{ length = 1.0, cutoff = 100.0 }]", "b = 2.0\nmu = 100.0");
        let cfg = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.profile().unwrap(), BarrierProfile::square(1.0, 1.0, 100.0).unwrap());
        let bad = SAMPLE.replace("segments = [{ length = 1.0, cutoff = 100.0 }]", "b = 1.0\nmu = 100.0");
        let err = RunConfig::from_toml(&bad).unwrap_err();
        assert_eq!(err, Error::EmptyBarrier);
        assert!(err.to_string().contains("barrier interval empty"));
    }

    #[test]
    fn rejects_invalid_physics() {
        let cases = [
            SAMPLE.replace("gamma = 0.05", "gamma = 30.0"),
            SAMPLE.replace("z = 40.0", "z = 1.5"),
            SAMPLE.replace("t1 = { min = 41.0", "t1 = { min = 40.2"),
            SAMPLE.replace("cutoff = 100.0", "cutoff = 21.0"),
            SAMPLE.replace("mode = \"opaque\"", "mode = \"fancy\""),
            SAMPLE.replace("[geometry]", "[geometry]\nextra = 1"),
        ];
        for text in cases {
            let err = RunConfig::from_toml(&text).unwrap_err();
            assert!(err.is_config_error(), "{err}");
        }
    }

    #[test]
    fn env_overrides() {
        let vars = vec![
            ("TUNNELCORR__SOURCE__GAMMA".to_string(), "0.1".to_string()),
            ("TUNNELCORR__MODE".to_string(), "numeric".to_string()),
            ("TUNNELCORR__OUTPUT__DIR".to_string(), "results".to_string()),
            ("UNRELATED".to_string(), "1".to_string()),
        ];
        let cfg = RunConfig::from_toml_with_env(SAMPLE, vars).unwrap();
        assert_eq!(cfg.source.gamma, 0.1);
        assert_eq!(cfg.mode, AmplitudeMode::Numeric);
        assert_eq!(cfg.output.dir, "results");
        let bad = vec![("TUNNELCORR__SOURCE__GAMMA__X".to_string(), "1".to_string())];
        assert!(RunConfig::from_toml_with_env(SAMPLE, bad).is_err());
    }

    #[test]
    fn sweep_values() {
        let s = Sweep { min: 1.0, max: 2.0, n: 3 };
        assert_eq!(s.values().unwrap(), vec![1.0, 1.5, 2.0]);
        assert!(Sweep { min: 0.0, max: 1.0, n: 3 }.values().is_err());
    }
}
