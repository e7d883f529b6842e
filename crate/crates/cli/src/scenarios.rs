//! Scenario files compiled into the binary.

pub struct Shipped {
    pub name: &'static str,
    pub figure: &'static str,
    pub text: &'static str,
}

pub const SHIPPED: &[Shipped] = &[
    Shipped { name: "example1", figure: "Fig. 5", text: include_str!("../scenarios/example1.toml") },
    Shipped { name: "example2", figure: "Fig. 8", text: include_str!("../scenarios/example2.toml") },
    Shipped { name: "example3", figure: "Figs. 10-12", text: include_str!("../scenarios/example3.toml") },
    Shipped { name: "pointmass-acc", figure: "Fig. 2", text: include_str!("../scenarios/pointmass-acc.toml") },
    Shipped { name: "pointmass-vel", figure: "Fig. 3", text: include_str!("../scenarios/pointmass-vel.toml") },
];

/// Accepts the bare name or the name with a `.toml`/`.cfg` extension.
pub fn find(name: &str) -> Option<&'static Shipped> {
    let stem = name.strip_suffix(".toml").or_else(|| name.strip_suffix(".cfg")).unwrap_or(name);
    SHIPPED.iter().find(|s| s.name == stem)
}

pub fn listing() -> String {
    SHIPPED.iter().map(|s| format!("{} → {}\n", s.name, s.figure)).collect()
}
