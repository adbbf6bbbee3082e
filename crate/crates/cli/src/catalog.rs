//! Scenarios shipped inside the binary, in catalog order.

pub const BUNDLED: &[(&str, &str)] = &[
    ("memory_cycle", include_str!("../scenarios/memory_cycle.scenario")),
    ("conservation", include_str!("../scenarios/conservation.scenario")),
    ("phase_match_sinc", include_str!("../scenarios/phase_match_sinc.scenario")),
    ("collapse_revival", include_str!("../scenarios/collapse_revival.scenario")),
    ("ssm_compensation", include_str!("../scenarios/ssm_compensation.scenario")),
    ("gem_fig52", include_str!("../scenarios/gem_fig52.scenario")),
    ("spectrometer", include_str!("../scenarios/spectrometer.scenario")),
    ("efficiency_map", include_str!("../scenarios/efficiency_map.scenario")),
    ("cavity_92", include_str!("../scenarios/cavity_92.scenario")),
];

/// Looks up a bundled scenario by name, with or without the `.scenario` extension.
pub fn find(name: &str) -> Option<(&'static str, &'static str)> {
    let stem = name.strip_suffix(".scenario").unwrap_or(name);
    BUNDLED.iter().find(|(n, _)| *n == stem).copied()
}
