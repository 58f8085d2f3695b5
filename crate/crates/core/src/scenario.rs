//! Bundled scenario presets. Each preset is an ordinary config text, so the
//! CLI treats presets and user configs identically.

use crate::config::ScenarioConfig;
use crate::{Error, Result};

pub const PRESET_NAMES: [&str; 4] = ["cp1-s1-12", "cp2-t2", "cp1-su2", "cp1-plain"];

/// Circle action with weights (1, 2) on CP^1, nu = 1, diagonal point over
/// [1 : 1].
const CP1_S1_12: &str = "\
model.factors = 1
action.group = torus:1
action.weights = 1; 2
nu = 1
k_grid = 64 128 256 512 1024
seeds = 1,0 1,0
";

/// T^2 with weights (1,0), (0,1), (1,1) on CP^2, nu = (1, 1), point over
/// [1 : 1 : 1].
const CP2_T2: &str = "\
model.factors = 2
action.group = torus:2
action.weights = 1 0; 0 1; 1 1
nu = 1 1
k_grid = 64 128 256 512 1024
seeds = 1,0 1,0 1,0
";

/// Defining SU(2) action on CP^1, nu = 1.
const CP1_SU2: &str = "\
model.factors = 1
action.group = su2
nu = 1
k_grid = 64 128 256 512 1024
seeds = auto
";

/// Untwisted control: weights (1, 1) make the k nu isotype the full level
/// k, i.e. the plain level kernel.
const CP1_PLAIN: &str = "\
model.factors = 1
action.group = torus:1
action.weights = 1; 1
nu = 1
k_grid = 64 128 256 512 1024
seeds = auto
";

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let text = match name {
        "cp1-s1-12" => CP1_S1_12,
        "cp2-t2" => CP2_T2,
        "cp1-su2" => CP1_SU2,
        "cp1-plain" => CP1_PLAIN,
        _ => {
            return Err(Error::Config(format!(
                "unknown preset {name}; available: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    ScenarioConfig::parse(name, text)
}

/// Expected diagonal growth exponent d + (1 - r_G)/2 of a scenario.
pub fn expected_exponent(cfg: &ScenarioConfig) -> f64 {
    let d: usize = cfg.model_factors.iter().sum();
    let r = match cfg.group_kind {
        crate::lie::GroupKind::Torus(r) => r,
        crate::lie::GroupKind::Su2 => 1,
    };
    d as f64 + (1.0 - r as f64) / 2.0
}
