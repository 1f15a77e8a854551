//! Configuration file and run manifest.
//!
//! A config file is TOML with one optional table per study. Unknown keys
//! anywhere are rejected. Every run writes `manifest.toml`, which has the
//! same layout plus a `[manifest]` table and can be passed back as
//! `--config` to reproduce the outputs exactly.

use std::fmt;
use std::path::Path;

use epfes::experiments::{AecStudySpec, UngmStudySpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub ungm: Option<UngmStudySpec>,
    pub aec: Option<AecStudySpec>,
    /// Written by the tool; ignored when read back.
    pub manifest: Option<ManifestInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestInfo {
    pub command: String,
    pub tool_version: String,
    pub core_version: String,
    pub execution: String,
    /// Derived per-realization seeds, as hexadecimal strings.
    pub derived_seeds: Vec<String>,
}

/// A config problem, reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn parse_config(text: &str, origin: &str) -> Result<ConfigFile, ConfigError> {
    toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .map(|l| format!(" (line {l})"))
            .unwrap_or_default();
        ConfigError(format!("{origin}{line}: {}", e.message().trim()))
    })
}

pub fn load_config(path: &Path) -> Result<ConfigFile, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, &path.display().to_string())
}

pub fn to_toml(config: &ConfigFile) -> Result<String, toml::ser::Error> {
    toml::to_string(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_named() {
        let err = parse_config("[ungm]\nsteps = 10\nbogus_key = 1\n", "cfg").unwrap_err();
        assert!(err.0.contains("bogus_key"), "{err}");
        assert!(err.0.contains("line 3"), "{err}");
        let err = parse_config("[nope]\n", "cfg").unwrap_err();
        assert!(err.0.contains("nope"), "{err}");
    }

    #[test]
    fn partial_tables_take_defaults() {
        let cfg = parse_config("[ungm]\nsteps = 10\n", "cfg").unwrap();
        let ungm = cfg.ungm.unwrap();
        assert_eq!(ungm.steps, 10);
        assert_eq!(ungm.realizations, UngmStudySpec::default().realizations);
        assert!(cfg.aec.is_none());
    }

    #[test]
    fn round_trip() {
        let cfg = ConfigFile {
            ungm: Some(UngmStudySpec::desk(3)),
            aec: Some(AecStudySpec::default()),
            manifest: Some(ManifestInfo {
                command: "ungm".into(),
                tool_version: "x".into(),
                core_version: "y".into(),
                execution: "parallel".into(),
                derived_seeds: vec!["0x1".into()],
            }),
        };
        let text = to_toml(&cfg).unwrap();
        assert_eq!(parse_config(&text, "m").unwrap(), cfg);
    }

    #[test]
    fn noise_free_scenario_round_trips() {
        let mut aec = AecStudySpec::default();
        aec.scenario.snr_db = f64::INFINITY;
        let cfg = ConfigFile {
            aec: Some(aec),
            ..ConfigFile::default()
        };
        let text = to_toml(&cfg).unwrap();
        assert_eq!(parse_config(&text, "m").unwrap(), cfg);
    }
}
