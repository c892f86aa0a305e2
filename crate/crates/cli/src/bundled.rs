use crate::scenario::{Kind, Scenario};

/// A scenario shipped inside the binary.
#[derive(Debug, Clone, Copy)]
pub struct Bundled {
    pub name: &'static str,
    pub source: &'static str,
}

macro_rules! bundle {
    ($($name:literal),* $(,)?) => {
        &[$(Bundled { name: $name, source: include_str!(concat!("../scenarios/", $name, ".toml")) }),*]
    };
}

const BUNDLED: &[Bundled] = bundle![
    "affine_axioms",
    "duality_suite",
    "affgebra_suite",
    "cross_product_affgebra_bad",
    "hull_unit_time_fields",
    "atiyah_aff_poisson",
    "omega_invariance",
    "reduction_plane",
    "oscillator_timedep",
    "driven_oscillator_timedep",
    "newton_harmonic",
    "frames_matrix",
];

pub fn bundled() -> &'static [Bundled] {
    BUNDLED
}

pub fn find_bundled(name: &str) -> Option<&'static Bundled> {
    BUNDLED.iter().find(|b| b.name == name)
}

impl Bundled {
    pub fn scenario(&self) -> Scenario {
        Scenario::from_toml(self.source).unwrap_or_else(|e| panic!("bundled scenario {} is invalid: {e}", self.name))
    }

    pub fn kind(&self) -> Kind {
        self.scenario().kind
    }
}
