//! Configurations shipped with the binary.

pub const PRESETS: &[(&str, &str)] = &[
    ("theorem-decay", include_str!("../presets/theorem-decay.toml")),
    ("linear", include_str!("../presets/linear.toml")),
    ("nullform-standard", include_str!("../presets/nullform-standard.toml")),
    ("nullform-broken", include_str!("../presets/nullform-broken.toml")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|p| p.0 == name).map(|p| p.1)
}

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.0).collect()
}
