//! Scenario files shipped with the library.

use super::overrides::{document_with_overrides, Override};
use super::ScenarioConfig;
use crate::error::{Error, Result};

/// Validation scenarios, by name.
pub const SCENARIOS: &[(&str, &str)] = &[
    ("fig01", include_str!("../../presets/fig01.toml")),
    ("fig02", include_str!("../../presets/fig02.toml")),
    ("fig03", include_str!("../../presets/fig03.toml")),
    ("fig04", include_str!("../../presets/fig04.toml")),
    ("fig05", include_str!("../../presets/fig05.toml")),
    ("fig06", include_str!("../../presets/fig06.toml")),
    ("fig07", include_str!("../../presets/fig07.toml")),
    ("fig08", include_str!("../../presets/fig08.toml")),
    ("fig09", include_str!("../../presets/fig09.toml")),
    ("fig10", include_str!("../../presets/fig10.toml")),
    ("fig11", include_str!("../../presets/fig11.toml")),
    ("fig12", include_str!("../../presets/fig12.toml")),
    ("fig13", include_str!("../../presets/fig13.toml")),
    ("fig14", include_str!("../../presets/fig14.toml")),
    ("fig16", include_str!("../../presets/fig16.toml")),
    ("fig17", include_str!("../../presets/fig17.toml")),
    ("fig18", include_str!("../../presets/fig18.toml")),
    ("fig19", include_str!("../../presets/fig19.toml")),
    ("fig20", include_str!("../../presets/fig20.toml")),
    ("fig21", include_str!("../../presets/fig21.toml")),
    ("table2", include_str!("../../presets/table2.toml")),
];

/// Closed-loop quadrotor run.
pub const QUAD_SQUARE: (&str, &str) = ("quad_square", include_str!("../../presets/quad_square.toml"));

/// Every shipped preset name, scenarios first.
pub fn names() -> Vec<&'static str> {
    SCENARIOS.iter().map(|(n, _)| *n).chain(std::iter::once(QUAD_SQUARE.0)).collect()
}

pub fn text(name: &str) -> Option<&'static str> {
    SCENARIOS
        .iter()
        .chain(std::iter::once(&QUAD_SQUARE))
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
}

pub fn scenario(name: &str) -> Result<ScenarioConfig> {
    scenario_with(name, &[])
}

pub fn scenario_with(name: &str, overrides: &[Override]) -> Result<ScenarioConfig> {
    let text = SCENARIOS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::Config(format!("unknown scenario preset '{name}'")))?;
    ScenarioConfig::from_value(document_with_overrides(text, overrides)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::overrides::parse_override;

    #[test]
    fn every_scenario_preset_parses_and_is_named_after_itself() {
        for (name, _) in SCENARIOS {
            let cfg = scenario(name).unwrap();
            assert_eq!(cfg.name, *name);
        }
        assert!(scenario("nope").is_err());
        assert!(names().contains(&"quad_square"));
    }

    #[test]
    fn overrides_take_precedence_and_unknown_keys_fail() {
        let cfg = scenario_with("fig01", &[parse_override("sim.record_every=3").unwrap()]).unwrap();
        assert_eq!(cfg.sim.record_every, 3);
        assert!(scenario_with("fig01", &[parse_override("sim.bogus=3").unwrap()]).is_err());
        assert!(scenario_with("fig01", &[parse_override("mass=-1.0").unwrap()]).is_err());
    }
}
