//! Laser-diode sources and the layered light path of a dual-color unit:
//! diode (optionally behind its can window), index-matching glue with a
//! dichroic mirror, and the fiber face.

use serde::{Deserialize, Serialize};

use crate::beam::{beam_from_spec_with, fresnel_t, AstigmaticBeam, InterfacePair, WavelengthConvention, DEFAULT_MSQ};
use crate::error::{domain, Error, Result};

pub const AIR_INDEX: f64 = 1.0;
pub const DEFAULT_GLUE_INDEX: f64 = 1.54;
pub const DEFAULT_GLASS_INDEX: f64 = 1.5;
pub const DEFAULT_WINDOW_THICKNESS: f64 = 0.25e-3;

const INDEX_MATCH_EPS: f64 = 1e-12;

/// A (minimum, nominal, maximum) parameter range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub min: f64,
    pub nominal: f64,
    pub max: f64,
}

impl Triple {
    pub fn new(min: f64, nominal: f64, max: f64) -> Result<Self> {
        if !(min <= nominal && nominal <= max) || !(min.is_finite() && max.is_finite()) {
            return domain(format!(
                "triple must satisfy min <= nominal <= max, got ({min}, {nominal}, {max})"
            ));
        }
        Ok(Self { min, nominal, max })
    }

    pub fn fixed(value: f64) -> Self {
        Self {
            min: value,
            nominal: value,
            max: value,
        }
    }

    pub fn pick(&self, choice: Choice) -> f64 {
        match choice {
            Choice::Min => self.min,
            Choice::Nominal => self.nominal,
            Choice::Max => self.max,
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            min: f(self.min),
            nominal: f(self.nominal),
            max: f(self.max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Choice {
    Min,
    Nominal,
    Max,
}

impl Choice {
    pub const ALL: [Choice; 3] = [Choice::Min, Choice::Nominal, Choice::Max];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MirrorMode {
    Transmit,
    Reflect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaserDiodeSpec {
    pub label: String,
    /// meters
    pub vacuum_wavelength: f64,
    /// Total output power in air at the modeled drive current, watts.
    pub power_at_drive: f64,
    /// Full FWHM divergence per axis, radians, quoted in air.
    pub theta_fwhm_1: Triple,
    pub theta_fwhm_2: Triple,
    /// Transverse alignment offset bound per axis, meters.
    pub offset_bound: Triple,
    pub can_window: bool,
    pub mirror_mode: MirrorMode,
    /// Mechanical lower bound on the source-to-fiber pathway, meters.
    pub min_pathway: f64,
    #[serde(default = "default_msq")]
    pub msq: f64,
}

fn default_msq() -> f64 {
    DEFAULT_MSQ
}

impl LaserDiodeSpec {
    pub fn validate(&self) -> Result<()> {
        for t in [self.theta_fwhm_1, self.theta_fwhm_2, self.offset_bound] {
            Triple::new(t.min, t.nominal, t.max)?;
        }
        if !(self.power_at_drive > 0.0 && self.min_pathway > 0.0 && self.vacuum_wavelength > 0.0) {
            return domain(format!(
                "{}: power, wavelength and min pathway must be positive",
                self.label
            ));
        }
        if !(self.theta_fwhm_1.min > 0.0 && self.theta_fwhm_2.min > 0.0 && self.offset_bound.min >= 0.0) {
            return domain(format!(
                "{}: angles must be positive and offsets non-negative",
                self.label
            ));
        }
        Ok(())
    }

    /// PL450B blue diode at 100 mA drive.
    pub fn blue_pl450b() -> Self {
        Self {
            label: "PL450B".into(),
            vacuum_wavelength: 450e-9,
            power_at_drive: 88e-3,
            theta_fwhm_1: Triple {
                min: 4.0,
                nominal: 7.5,
                max: 11.0,
            }
            .map(f64::to_radians),
            theta_fwhm_2: Triple {
                min: 18.0,
                nominal: 21.5,
                max: 25.0,
            }
            .map(f64::to_radians),
            offset_bound: Triple {
                min: 5e-6,
                nominal: 10e-6,
                max: 15e-6,
            },
            can_window: true,
            mirror_mode: MirrorMode::Transmit,
            min_pathway: 2.90e-3,
            msq: DEFAULT_MSQ,
        }
    }

    /// HL63603TG red diode at 100 mA drive, can cap removed.
    pub fn red_hl63603tg() -> Self {
        Self {
            label: "HL63603TG".into(),
            vacuum_wavelength: 638e-9,
            power_at_drive: 45e-3,
            theta_fwhm_1: Triple {
                min: 5.0,
                nominal: 8.5,
                max: 13.0,
            }
            .map(f64::to_radians),
            theta_fwhm_2: Triple {
                min: 13.0,
                nominal: 18.0,
                max: 23.0,
            }
            .map(f64::to_radians),
            offset_bound: Triple {
                min: 5e-6,
                nominal: 10e-6,
                max: 15e-6,
            },
            can_window: false,
            mirror_mode: MirrorMode::Reflect,
            min_pathway: 0.46e-3,
            msq: DEFAULT_MSQ,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "blue-PL450B" => Some(Self::blue_pl450b()),
            "red-HL63603TG" => Some(Self::red_hl63603tg()),
            _ => None,
        }
    }

    /// Beam at its waist in air, with the given divergences.
    pub fn source_beam(&self, theta_1: f64, theta_2: f64, convention: WavelengthConvention) -> Result<AstigmaticBeam> {
        beam_from_spec_with(
            self.vacuum_wavelength,
            self.power_at_drive,
            theta_1,
            theta_2,
            self.msq,
            AIR_INDEX,
            convention,
        )
    }
}

pub const PRESET_NAMES: [&str; 2] = ["blue-PL450B", "red-HL63603TG"];

/// Material choices for a unit stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StackParams {
    pub glue_index: f64,
    pub glass_index: f64,
    /// meters
    pub window_thickness: f64,
}

impl Default for StackParams {
    fn default() -> Self {
        Self {
            glue_index: DEFAULT_GLUE_INDEX,
            glass_index: DEFAULT_GLASS_INDEX,
            window_thickness: DEFAULT_WINDOW_THICKNESS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StackElement {
    Propagation { n: f64, d: f64 },
    FlatInterface { n_to: f64, apply_fresnel: bool },
    IdealMirror { mode: MirrorMode },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticalStack {
    pub source_index: f64,
    pub elements: Vec<StackElement>,
}

impl OpticalStack {
    pub fn new(source_index: f64, elements: Vec<StackElement>) -> Result<Self> {
        if source_index < 1.0 {
            return domain(format!("source index must be >= 1, got {source_index}"));
        }
        let mut mirrors = 0;
        for el in &elements {
            match *el {
                StackElement::Propagation { n, d } => {
                    if n < 1.0 || !(d >= 0.0 && d.is_finite()) {
                        return domain(format!("invalid propagation element (n={n}, d={d})"));
                    }
                }
                StackElement::FlatInterface { n_to, .. } => {
                    if !(n_to >= 1.0 && n_to.is_finite()) {
                        return domain(format!("invalid interface index {n_to}"));
                    }
                }
                StackElement::IdealMirror { .. } => mirrors += 1,
            }
        }
        if mirrors > 1 {
            return domain("a stack holds at most one mirror");
        }
        Ok(Self { source_index, elements })
    }

    /// Sum of all propagation lengths.
    pub fn total_pathway(&self) -> f64 {
        self.elements
            .iter()
            .map(|el| match el {
                StackElement::Propagation { d, .. } => *d,
                _ => 0.0,
            })
            .sum()
    }

    /// Number of optical elements once the (lossless) mirror is dropped and
    /// the propagation segments it splits are merged.
    pub fn optical_element_count(&self) -> usize {
        let mut count = 0;
        let mut last_propagation: Option<f64> = None;
        for el in &self.elements {
            match *el {
                StackElement::IdealMirror { .. } => continue,
                StackElement::Propagation { n, .. } if last_propagation == Some(n) => continue,
                StackElement::Propagation { n, .. } => last_propagation = Some(n),
                StackElement::FlatInterface { .. } => last_propagation = None,
            }
            count += 1;
        }
        count
    }
}

/// Canonical stack for one diode of a dual-color unit.
///
/// The pathway is the full geometric source-to-fiber length, window
/// included. The mirror sits halfway along the glue segment.
pub fn build_unit_stack(ld: &LaserDiodeSpec, pathway: f64, params: &StackParams) -> Result<OpticalStack> {
    if !(pathway >= ld.min_pathway) {
        return Err(Error::Constraint {
            what: format!("{} pathway below mechanical minimum", ld.label),
            bound: ld.min_pathway,
            value: pathway,
        });
    }
    let StackParams {
        glue_index,
        glass_index,
        window_thickness,
    } = *params;
    let mut elements = Vec::with_capacity(8);
    let glue_length = if ld.can_window {
        if window_thickness > pathway {
            return Err(Error::Constraint {
                what: "window thickness exceeds pathway".into(),
                bound: pathway,
                value: window_thickness,
            });
        }
        elements.push(StackElement::FlatInterface {
            n_to: glass_index,
            apply_fresnel: true,
        });
        elements.push(StackElement::Propagation {
            n: glass_index,
            d: window_thickness,
        });
        pathway - window_thickness
    } else {
        pathway
    };
    elements.push(StackElement::FlatInterface {
        n_to: glue_index,
        apply_fresnel: true,
    });
    elements.push(StackElement::Propagation {
        n: glue_index,
        d: 0.5 * glue_length,
    });
    elements.push(StackElement::IdealMirror { mode: ld.mirror_mode });
    elements.push(StackElement::Propagation {
        n: glue_index,
        d: glue_length - 0.5 * glue_length,
    });
    elements.push(StackElement::FlatInterface {
        n_to: glass_index,
        apply_fresnel: true,
    });
    OpticalStack::new(AIR_INDEX, elements)
}

/// Traces a beam through every element of the stack and returns it at the
/// fiber face.
pub fn trace_stack(beam: &AstigmaticBeam, stack: &OpticalStack) -> Result<AstigmaticBeam> {
    if (beam.medium_index() - stack.source_index).abs() > INDEX_MATCH_EPS {
        return domain(format!(
            "beam is in medium {} but stack starts in {}",
            beam.medium_index(),
            stack.source_index
        ));
    }
    let mut current = *beam;
    for el in &stack.elements {
        current = match *el {
            StackElement::Propagation { n, d } => {
                if (current.medium_index() - n).abs() > INDEX_MATCH_EPS {
                    return domain(format!(
                        "propagation in n={n} but beam is in n={}",
                        current.medium_index()
                    ));
                }
                current.propagate(d)?
            }
            StackElement::FlatInterface { n_to, apply_fresnel } => {
                let t = if apply_fresnel {
                    fresnel_t(InterfacePair::new(current.medium_index(), n_to)?)
                } else {
                    1.0
                };
                current.refract_flat(n_to)?.attenuated(t)
            }
            StackElement::IdealMirror { .. } => current,
        };
    }
    Ok(current)
}
