//! Bundled reference scenarios and scenario-file resolution.

use std::path::Path;

use rdv_core::config::{ConfigIssue, ScenarioConfig};

use crate::diag::CliError;

pub const LOW_RISK: &str = include_str!("../scenarios/low_risk.scenario");
pub const HIGH_RISK: &str = include_str!("../scenarios/high_risk.scenario");
pub const EXACT_MODEL: &str = include_str!("../scenarios/exact_model.scenario");
pub const ADVERSARIAL_SWITCH: &str = include_str!("../scenarios/adversarial_switch.scenario");

pub const BUNDLED: [(&str, &str); 4] = [
    ("low_risk", LOW_RISK),
    ("high_risk", HIGH_RISK),
    ("exact_model", EXACT_MODEL),
    ("adversarial_switch", ADVERSARIAL_SWITCH),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    let key = name.strip_suffix(".scenario").unwrap_or(name);
    BUNDLED.iter().find(|(n, _)| *n == key).map(|(_, text)| *text)
}

/// Reads `source` as a file path, falling back to a bundled scenario name
/// (with or without the `.scenario` extension).
pub fn read(source: &str) -> Result<String, CliError> {
    let path = Path::new(source);
    if path.is_file() {
        return std::fs::read_to_string(path).map_err(|e| CliError::io(path, e));
    }
    bundled(source).map(str::to_string).ok_or_else(|| {
        let names: Vec<_> = BUNDLED.iter().map(|(n, _)| *n).collect();
        CliError::new(
            "input",
            format!("scenario {source:?} is neither a file nor a bundled name ({})", names.join(", ")),
        )
    })
}

/// Parses without range checks; syntax and unknown-field errors only.
pub fn parse(text: &str) -> Result<ScenarioConfig, CliError> {
    ScenarioConfig::parse_toml(text).map_err(CliError::from)
}

/// Every validation problem as a config error naming its field.
pub fn issues(cfg: &ScenarioConfig) -> Vec<CliError> {
    cfg.validate()
        .err()
        .unwrap_or_default()
        .into_iter()
        .map(|ConfigIssue { field, message }| CliError::config_field(field, message))
        .collect()
}

/// Reads, parses and validates; the first issue is returned on failure.
pub fn load(source: &str) -> Result<ScenarioConfig, CliError> {
    let cfg = parse(&read(source)?)?;
    match issues(&cfg).into_iter().next() {
        Some(e) => Err(e),
        None => Ok(cfg),
    }
}

/// A bundled scenario, parsed and validated.
pub fn bundled_config(name: &str) -> ScenarioConfig {
    let text = bundled(name).unwrap_or_else(|| panic!("no bundled scenario {name}"));
    ScenarioConfig::from_toml_str(text).expect("bundled scenarios are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_validate() {
        for (name, _) in BUNDLED {
            let cfg = bundled_config(name);
            assert_eq!(cfg.name, name);
        }
    }

    #[test]
    fn lookup_accepts_extension() {
        assert!(bundled("low_risk.scenario").is_some());
        assert!(bundled("medium_risk").is_none());
    }

    #[test]
    fn reference_constants_in_low_and_high_risk() {
        let low = bundled_config("low_risk");
        assert_eq!((low.driver.gain, low.driver.sigma), (1.1, 3.0));
        let high = bundled_config("high_risk");
        assert_eq!((high.driver.gain, high.driver.sigma), (1.3, 6.0));
        for cfg in [low, high] {
            assert_eq!(cfg.mission.epsilon, 5.0);
            assert_eq!(cfg.start(), cfg.landing());
            assert_eq!(cfg.start(), cfg.abort_site());
        }
    }

    #[test]
    fn zero_dwell_is_rejected_by_field() {
        let cfg = parse("[mission]\ndwell = 0.0\n").unwrap();
        let errs = issues(&cfg);
        assert_eq!(errs[0].field.as_deref(), Some("mission.dwell"));
        assert!(errs[0].message.contains("> 0"));
    }
}
