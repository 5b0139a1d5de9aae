//! parse(serialize(c)) = c for the experiment configurations.

// the binary's modules are not a library; include the config module directly
#[path = "../src/config.rs"]
mod config;

use config::*;

#[test]
fn control2d_config_roundtrips() {
    let text = std::fs::read_to_string(
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/control2d_reference.toml"),
    )
    .unwrap();
    let parsed: Control2dConfig = toml::from_str(&text).unwrap();
    let serialized = toml::to_string(&parsed).unwrap();
    let reparsed: Control2dConfig = toml::from_str(&serialized).unwrap();
    assert_eq!(parsed, reparsed);
}

#[test]
fn kalman_and_control1d_configs_roundtrip() {
    for name in ["kalman_jordan.toml", "control1d_alpha0.toml"] {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
        let text = std::fs::read_to_string(&path).unwrap();
        if name.starts_with("kalman") {
            let parsed: KalmanConfig = toml::from_str(&text).unwrap();
            let reparsed: KalmanConfig = toml::from_str(&toml::to_string(&parsed).unwrap()).unwrap();
            assert_eq!(parsed, reparsed);
        } else {
            let parsed: Control1dConfig = toml::from_str(&text).unwrap();
            let reparsed: Control1dConfig =
                toml::from_str(&toml::to_string(&parsed).unwrap()).unwrap();
            assert_eq!(parsed, reparsed);
        }
    }
}
