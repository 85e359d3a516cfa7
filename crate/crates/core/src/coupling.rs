//! Power coupled into a circular fiber core that may be offset from the
//! beam axis.

use serde::{Deserialize, Serialize};

use crate::beam::{AstigmaticBeam, Axis};
use crate::error::{domain, Result};
use crate::quadrature::{integrate_disc, Tolerance};

pub const DEFAULT_CORE_RADIUS: f64 = 25e-6;
pub const DEFAULT_CORE_INDEX: f64 = 1.5;
pub const DEFAULT_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiberSpec {
    /// meters
    pub core_radius: f64,
    pub core_index: f64,
    /// When set, coupled power is further limited to the part of the
    /// far-field cone inside `asin(NA / n)`.
    pub acceptance_na: Option<f64>,
}

impl Default for FiberSpec {
    fn default() -> Self {
        Self {
            core_radius: DEFAULT_CORE_RADIUS,
            core_index: DEFAULT_CORE_INDEX,
            acceptance_na: None,
        }
    }
}

impl FiberSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.core_radius > 0.0 && self.core_radius.is_finite()) {
            return domain(format!("core radius must be positive, got {}", self.core_radius));
        }
        if self.core_index < 1.0 {
            return domain(format!("core index must be >= 1, got {}", self.core_index));
        }
        if let Some(na) = self.acceptance_na {
            if !(na > 0.0 && na < self.core_index) {
                return domain(format!("NA must lie in (0, core index), got {na}"));
            }
        }
        Ok(())
    }
}

/// Offset of the fiber core center from the beam axis, meters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Alignment {
    pub dx: f64,
    pub dy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingResult {
    /// watts
    pub coupled_power: f64,
    /// Fraction of the source power before any stack losses.
    pub efficiency: f64,
    /// Bound on the quadrature error of `coupled_power`, watts.
    pub quadrature_error: f64,
}

/// Fraction of a unit-power elliptical Gaussian (1/e² radii `w1`, `w2`)
/// falling inside the disc of radius `r` around `(dx, dy)`.
fn gaussian_disc_fraction(w1: f64, w2: f64, dx: f64, dy: f64, r: f64, rel_tol: f64) -> Result<(f64, f64)> {
    let norm = 2.0 / (std::f64::consts::PI * w1 * w2);
    let a1 = -2.0 / (w1 * w1);
    let a2 = -2.0 / (w2 * w2);
    let est = integrate_disc(
        |x, y| norm * (a1 * x * x + a2 * y * y).exp(),
        (dx, dy),
        r,
        Tolerance {
            abs: rel_tol * 1e-12,
            rel: rel_tol,
        },
    )?;
    Ok((est.value.clamp(0.0, 1.0), est.error))
}

/// Power of `beam` inside the disc of radius `r` around `(dx, dy)`, by
/// adaptive quadrature of its irradiance. Returns `(power, error_bound)`.
pub fn disc_power(beam: &AstigmaticBeam, dx: f64, dy: f64, r: f64, rel_tol: f64) -> Result<(f64, f64)> {
    let profile = beam.intensity_profile();
    let est = integrate_disc(
        |x, y| profile.at(x, y),
        (dx, dy),
        r,
        Tolerance {
            abs: rel_tol * 1e-12 * beam.power(),
            rel: rel_tol,
        },
    )?;
    Ok((est.value.clamp(0.0, beam.power()), est.error))
}

/// Power coupled from `beam_at_face` into the fiber core.
///
/// `source_power` is the diode output before stack losses and only sets the
/// efficiency denominator.
pub fn coupled_power(
    beam_at_face: &AstigmaticBeam,
    source_power: f64,
    fiber: &FiberSpec,
    align: Alignment,
    rel_tol: f64,
) -> Result<CouplingResult> {
    fiber.validate()?;
    if !(rel_tol > 1e-12 && rel_tol < 1e-2) {
        return domain(format!("rel_tol must lie in (1e-12, 1e-2), got {rel_tol}"));
    }
    if !(align.dx.is_finite() && align.dy.is_finite()) {
        return domain("alignment offsets must be finite");
    }
    if !(source_power > 0.0) {
        return domain(format!("source power must be positive, got {source_power}"));
    }
    let power = beam_at_face.power();
    if power == 0.0 {
        return Ok(CouplingResult {
            coupled_power: 0.0,
            efficiency: 0.0,
            quadrature_error: 0.0,
        });
    }
    let (mut coupled, mut error) = disc_power(beam_at_face, align.dx, align.dy, fiber.core_radius, rel_tol)?;
    if let Some(na) = fiber.acceptance_na {
        let half_angle = (na / beam_at_face.medium_index()).min(1.0).asin();
        let t1 = beam_at_face.far_field_half_angle(Axis::First);
        let t2 = beam_at_face.far_field_half_angle(Axis::Second);
        let (cone, cone_err) = gaussian_disc_fraction(t1, t2, 0.0, 0.0, half_angle, rel_tol)?;
        error = error * cone + coupled * cone_err;
        coupled *= cone;
    }
    Ok(CouplingResult {
        coupled_power: coupled,
        efficiency: (coupled / source_power).clamp(0.0, 1.0),
        quadrature_error: error,
    })
}
