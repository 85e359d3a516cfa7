//! Scenario files and flag resolution.

use std::path::Path;

use anyhow::{bail, Context};
use dualbeam_core::design::{Requirement, Scenario};
use dualbeam_core::stack::{LaserDiodeSpec, PRESET_NAMES};
use serde::{Deserialize, Serialize};

use crate::UsageError;

pub const SEED_ENV: &str = "DUALBEAM_SEED";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequirementEntry {
    pub label: String,
    pub min_power_mw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    /// Start of the curve; the diode's minimum pathway when unset.
    pub start_mm: Option<f64>,
    pub end_mm: f64,
    pub steps: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            start_mm: None,
            end_mm: 20.0,
            steps: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloSettings {
    pub samples: usize,
}

impl Default for MonteCarloSettings {
    fn default() -> Self {
        Self { samples: 1000 }
    }
}

/// Structured-text (TOML) scenario document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioFile {
    pub preset: Option<String>,
    pub diode: Option<LaserDiodeSpec>,
    pub scenario: Scenario,
    pub requirements: Vec<RequirementEntry>,
    /// Pathway evaluated by `corners` and `montecarlo`; minimum pathway when unset.
    pub pathway_mm: Option<f64>,
    pub sweep: SweepSettings,
    pub montecarlo: MonteCarloSettings,
    pub seed: Option<u64>,
}

impl ScenarioFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text)
            .map_err(|e| UsageError(format!("{}: {e}", path.display())))
            .map_err(Into::into)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub min_power_mw: Option<f64>,
    pub pathway_mm: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

/// Everything a design command needs, after merging file, flags and environment.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub diode: LaserDiodeSpec,
    pub scenario: Scenario,
    pub requirements: Vec<Requirement>,
    pub pathway_mm: f64,
    pub sweep: SweepSettings,
    pub montecarlo: MonteCarloSettings,
    pub seed: u64,
}

fn preset(name: &str) -> anyhow::Result<LaserDiodeSpec> {
    LaserDiodeSpec::preset(name).ok_or_else(|| {
        UsageError(format!(
            "unknown preset {name:?}; choose one of {}",
            PRESET_NAMES.join(", ")
        ))
        .into()
    })
}

fn default_requirement(ld: &LaserDiodeSpec) -> Option<Requirement> {
    if *ld == LaserDiodeSpec::blue_pl450b() {
        Some(Requirement::blue())
    } else if *ld == LaserDiodeSpec::red_hl63603tg() {
        Some(Requirement::red())
    } else {
        None
    }
}

/// Seed precedence: flag, scenario file, `DUALBEAM_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> anyhow::Result<u64> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| UsageError(format!("{SEED_ENV}={v:?} is not an unsigned integer")).into()),
        Err(_) => Ok(0),
    }
}

pub fn resolve(file: Option<ScenarioFile>, ov: Overrides) -> anyhow::Result<Resolved> {
    let file = file.unwrap_or_default();
    let diode = match (&ov.preset, &file.preset, &file.diode) {
        (Some(name), _, _) => preset(name)?,
        (None, Some(_), Some(_)) => bail!(UsageError("scenario declares both `preset` and `diode`".into())),
        (None, Some(name), None) => preset(name)?,
        (None, None, Some(d)) => d.clone(),
        (None, None, None) => bail!(UsageError("no diode given; pass --preset or a scenario file".into())),
    };
    diode.validate().map_err(|e| UsageError(e.to_string()))?;
    file.scenario.fiber.validate().map_err(|e| UsageError(e.to_string()))?;

    let requirements = if let Some(mw) = ov.min_power_mw {
        vec![Requirement::new(format!("{mw}mW"), mw * 1e-3).map_err(|e| UsageError(e.to_string()))?]
    } else if !file.requirements.is_empty() {
        file.requirements
            .iter()
            .map(|r| Requirement::new(r.label.clone(), r.min_power_mw * 1e-3))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| UsageError(e.to_string()))?
    } else if let Some(r) = default_requirement(&diode) {
        vec![r]
    } else {
        bail!(UsageError(
            "custom diode needs --min-power-mw or [[requirements]]".into()
        ))
    };

    let pathway_mm = ov.pathway_mm.or(file.pathway_mm).unwrap_or(diode.min_pathway * 1e3);
    let mut montecarlo = file.montecarlo;
    if let Some(n) = ov.samples {
        montecarlo.samples = n;
    }
    Ok(Resolved {
        seed: resolve_seed(ov.seed, file.seed)?,
        diode,
        scenario: file.scenario,
        requirements,
        pathway_mm,
        sweep: file.sweep,
        montecarlo,
    })
}
