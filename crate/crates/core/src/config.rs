//! Scenario configuration: a small `key = value` format with strict key
//! checking, plus construction of the model/action/weight triple. Every run
//! writes the fully resolved configuration next to its results.

use std::path::PathBuf;

use num_complex::Complex64;

use crate::geometry::{ActionBlock, LinearAction, QuantizedModel, SpherePoint};
use crate::hardy::HaarConvention;
use crate::lie::{GroupKind, GroupModel, WeightVector};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum SeedSpec {
    /// Deterministic pseudo-random locus seeds (fixed documented RNG seed).
    Auto(usize),
    /// Explicit points: per point, whitespace-separated `re,im` pairs
    /// covering all homogeneous coordinates in order.
    Points(Vec<Vec<(f64, f64)>>),
}

/// Fully parsed scenario description.
#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub name: String,
    pub model_factors: Vec<usize>,
    pub model_scale: f64,
    pub group_kind: GroupKind,
    /// Torus weight rows, one per homogeneous coordinate.
    pub weights: Option<Vec<Vec<i64>>>,
    /// Index of the factor carrying the SU(2) defining block.
    pub su2_factor: Option<usize>,
    pub shift: Vec<i64>,
    pub nu: Vec<i64>,
    pub k_grid: Vec<u64>,
    pub seeds: SeedSpec,
    /// Optional structure-circle level restriction (sensitivity analysis).
    pub levels: Option<(u64, u64)>,
    pub haar: HaarConvention,
    pub phi_scale: f64,
    pub outputs: PathBuf,
}

/// RNG seed for `seeds = auto` (documented determinism contract).
pub const AUTO_SEED: u64 = 0x5a6b_11;

impl ScenarioConfig {
    /// Parses the `key = value` format; unknown keys are rejected.
    pub fn parse(name: &str, text: &str) -> Result<Self> {
        let mut cfg = ScenarioConfig {
            name: name.to_string(),
            model_factors: vec![1],
            model_scale: 1.0,
            group_kind: GroupKind::Torus(1),
            weights: None,
            su2_factor: None,
            shift: Vec::new(),
            nu: Vec::new(),
            k_grid: vec![64, 128, 256, 512, 1024],
            seeds: SeedSpec::Auto(1),
            levels: None,
            haar: HaarConvention::Probability,
            phi_scale: 1.0,
            outputs: PathBuf::from("out"),
        };
        let mut saw_shift = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| Error::Config(format!("line {}: {what}: {value}", lineno + 1));
            match key {
                "model.factors" => {
                    cfg.model_factors = split_ints(value)
                        .ok_or_else(|| bad("bad factor list"))?
                        .into_iter()
                        .map(|v| v as usize)
                        .collect();
                }
                "model.scale" => {
                    cfg.model_scale = value.parse().map_err(|_| bad("bad scale"))?;
                }
                "action.group" => {
                    cfg.group_kind = match value {
                        "torus:1" => GroupKind::Torus(1),
                        "torus:2" => GroupKind::Torus(2),
                        "su2" => GroupKind::Su2,
                        _ => return Err(bad("group must be torus:1, torus:2 or su2")),
                    };
                }
                "action.weights" => {
                    let rows: Option<Vec<Vec<i64>>> =
                        value.split(';').map(split_ints).collect();
                    cfg.weights = Some(rows.ok_or_else(|| bad("bad weight rows"))?);
                }
                "action.su2_factor" => {
                    cfg.su2_factor = Some(value.parse().map_err(|_| bad("bad factor index"))?);
                }
                "action.shift" => {
                    cfg.shift = split_ints(value).ok_or_else(|| bad("bad shift"))?;
                    saw_shift = true;
                }
                "nu" => {
                    cfg.nu = split_ints(value).ok_or_else(|| bad("bad nu"))?;
                }
                "k_grid" => {
                    let ks = split_ints(value).ok_or_else(|| bad("bad k grid"))?;
                    if ks.iter().any(|&k| k <= 0) {
                        return Err(bad("k must be positive"));
                    }
                    cfg.k_grid = ks.into_iter().map(|k| k as u64).collect();
                }
                "seeds" => {
                    cfg.seeds = if value == "auto" {
                        SeedSpec::Auto(1)
                    } else if let Some(n) = value.strip_prefix("auto:") {
                        SeedSpec::Auto(n.parse().map_err(|_| bad("bad auto count"))?)
                    } else {
                        let pts: Option<Vec<Vec<(f64, f64)>>> = value
                            .split(';')
                            .map(|pt| {
                                pt.split_whitespace()
                                    .map(|pair| {
                                        let (re, im) = pair.split_once(',')?;
                                        Some((re.parse().ok()?, im.parse().ok()?))
                                    })
                                    .collect()
                            })
                            .collect();
                        SeedSpec::Points(pts.ok_or_else(|| bad("bad seed points"))?)
                    };
                }
                "levels" => {
                    cfg.levels = if value == "all" {
                        None
                    } else {
                        let (lo, hi) =
                            value.split_once("..").ok_or_else(|| bad("want lo..hi or all"))?;
                        Some((
                            lo.trim().parse().map_err(|_| bad("bad level"))?,
                            hi.trim().parse().map_err(|_| bad("bad level"))?,
                        ))
                    };
                }
                "conventions.haar" => {
                    cfg.haar = match value {
                        "prob" => HaarConvention::Probability,
                        "phi" => HaarConvention::PhiInduced,
                        _ => return Err(bad("haar must be prob or phi")),
                    };
                }
                "conventions.phi_scale" => {
                    cfg.phi_scale = value.parse().map_err(|_| bad("bad phi scale"))?;
                }
                "outputs" => {
                    cfg.outputs = PathBuf::from(value);
                }
                _ => return Err(Error::Config(format!("unknown key: {key}"))),
            }
        }
        if cfg.nu.is_empty() {
            return Err(Error::Config("nu is required".into()));
        }
        if cfg.k_grid.is_empty() {
            return Err(Error::Config("k_grid must be nonempty".into()));
        }
        if !saw_shift {
            let rank = match cfg.group_kind {
                GroupKind::Torus(r) => r,
                GroupKind::Su2 => 1,
            };
            cfg.shift = vec![0; rank];
        }
        Ok(cfg)
    }

    /// Builds the group, model, action and weight from the configuration.
    pub fn build(&self) -> Result<(QuantizedModel, LinearAction, WeightVector)> {
        let group = match self.group_kind {
            GroupKind::Torus(r) => GroupModel::torus(r)?,
            GroupKind::Su2 => GroupModel::su2(),
        }
        .with_phi_scale(self.phi_scale)?;
        let model = QuantizedModel::new(self.model_factors.clone())?;
        if (self.model_scale - 1.0).abs() > 1e-14 {
            return Err(Error::Config(
                "model.scale must be 1.0 for kernel scenarios (the curvature normalization)"
                    .into(),
            ));
        }
        let blocks: Vec<ActionBlock> = match self.group_kind {
            GroupKind::Torus(_) => {
                let weights = self
                    .weights
                    .as_ref()
                    .ok_or_else(|| Error::Config("action.weights required for torus".into()))?;
                let mut rows = weights.clone().into_iter();
                let mut blocks = Vec::new();
                for &d in &self.model_factors {
                    let take: Vec<Vec<i64>> = (0..=d)
                        .map(|_| rows.next().ok_or_else(|| {
                            Error::Config("weight rows do not cover all coordinates".into())
                        }))
                        .collect::<Result<_>>()?;
                    blocks.push(ActionBlock::Torus(take));
                }
                if rows.next().is_some() {
                    return Err(Error::Config("too many weight rows".into()));
                }
                blocks
            }
            GroupKind::Su2 => {
                let fi = self.su2_factor.unwrap_or(0);
                (0..self.model_factors.len())
                    .map(|i| if i == fi { ActionBlock::Su2Defining } else { ActionBlock::Trivial })
                    .collect()
            }
        };
        let action = LinearAction::new(group, model.clone(), blocks, self.shift.clone())?;
        let nu = WeightVector::new(&group, self.nu.clone())?;
        Ok((model, action, nu))
    }

    /// Resolves the seed specification into bundle points.
    pub fn seed_points(&self, model: &QuantizedModel) -> Result<Vec<SpherePoint>> {
        match &self.seeds {
            SeedSpec::Auto(n) => {
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(AUTO_SEED);
                Ok((0..*n).map(|_| SpherePoint::random(model, &mut rng)).collect())
            }
            SeedSpec::Points(pts) => {
                let dims = model.coords_per_factor();
                pts.iter()
                    .map(|flat| {
                        let total: usize = dims.iter().sum();
                        if flat.len() != total {
                            return Err(Error::Config(format!(
                                "seed point needs {total} coordinates, got {}",
                                flat.len()
                            )));
                        }
                        let mut factors = Vec::new();
                        let mut it = flat.iter();
                        for &m in &dims {
                            factors.push(
                                (0..m)
                                    .map(|_| {
                                        let &(re, im) = it.next().unwrap();
                                        Complex64::new(re, im)
                                    })
                                    .collect(),
                            );
                        }
                        SpherePoint::new(model, factors)
                    })
                    .collect()
            }
        }
    }

    /// Canonical resolved text (written next to every run's outputs).
    pub fn resolved_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# resolved scenario: {}\n", self.name));
        out.push_str(&format!(
            "model.factors = {}\n",
            self.model_factors.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
        ));
        out.push_str(&format!("model.scale = {}\n", self.model_scale));
        out.push_str(&format!(
            "action.group = {}\n",
            match self.group_kind {
                GroupKind::Torus(r) => format!("torus:{r}"),
                GroupKind::Su2 => "su2".to_string(),
            }
        ));
        if let Some(w) = &self.weights {
            out.push_str(&format!(
                "action.weights = {}\n",
                w.iter()
                    .map(|row| row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "))
                    .collect::<Vec<_>>()
                    .join("; ")
            ));
        }
        if let Some(fi) = self.su2_factor {
            out.push_str(&format!("action.su2_factor = {fi}\n"));
        }
        out.push_str(&format!(
            "action.shift = {}\n",
            self.shift.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
        ));
        out.push_str(&format!(
            "nu = {}\n",
            self.nu.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
        ));
        out.push_str(&format!(
            "k_grid = {}\n",
            self.k_grid.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
        ));
        match &self.seeds {
            SeedSpec::Auto(n) => out.push_str(&format!("seeds = auto:{n}\n")),
            SeedSpec::Points(pts) => {
                let body = pts
                    .iter()
                    .map(|pt| {
                        pt.iter()
                            .map(|(re, im)| format!("{re},{im}"))
                            .collect::<Vec<_>>()
                            .join(" ")
                    })
                    .collect::<Vec<_>>()
                    .join("; ");
                out.push_str(&format!("seeds = {body}\n"));
            }
        }
        match self.levels {
            None => out.push_str("levels = all\n"),
            Some((lo, hi)) => out.push_str(&format!("levels = {lo}..{hi}\n")),
        }
        out.push_str(&format!(
            "conventions.haar = {}\n",
            match self.haar {
                HaarConvention::Probability => "prob",
                HaarConvention::PhiInduced => "phi",
            }
        ));
        out.push_str(&format!("conventions.phi_scale = {}\n", self.phi_scale));
        out.push_str(&format!("outputs = {}\n", self.outputs.display()));
        out
    }
}

fn split_ints(s: &str) -> Option<Vec<i64>> {
    let parts: Vec<&str> =
        s.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()).collect();
    if parts.is_empty() {
        return None;
    }
    parts.into_iter().map(|t| t.parse().ok()).collect()
}
