//! Scenarios shipped with the binary.

pub const LED: &str = include_str!("../scenarios/led.scenario");
pub const LASER: &str = include_str!("../scenarios/laser.scenario");
pub const FIG4_PATHS: &str = include_str!("../scenarios/fig4_paths.scenario");

pub const NAMES: [&str; 3] = ["led", "laser", "fig4_paths"];

/// Looks up a bundled scenario by name, with or without `.scenario`.
pub fn lookup(name: &str) -> Option<&'static str> {
    match name.strip_suffix(".scenario").unwrap_or(name) {
        "led" => Some(LED),
        "laser" => Some(LASER),
        "fig4_paths" => Some(FIG4_PATHS),
        _ => None,
    }
}
