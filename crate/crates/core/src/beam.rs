//! Simple astigmatic Gaussian (SAG) beams.
//!
//! A SAG beam carries one complex beam parameter per principal transverse
//! axis, `q = (z - z0) + i·zR`. Propagation and refraction at flat
//! interfaces act on each `q` independently through the ABCD law
//! `q' = (A·q + B) / (C·q + D)`.
//!
//! Spot sizes and curvature radii follow from `1/q = 1/R - i·λ/(π·w²)`.
//! Which wavelength enters that relation inside a dielectric is selected by
//! [`WavelengthConvention`].

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{domain, Result};

/// Conversion factor from a FWHM divergence angle to the 1/e² angle.
pub const FWHM_TO_INV_E2: f64 = 1.699;

/// Beam quality factor used for all modeled laser diodes.
pub const DEFAULT_MSQ: f64 = 1.3;

const MIN_WAVELENGTH: f64 = 100e-9;
const MAX_WAVELENGTH: f64 = 20e-6;

/// Wavelength that enters the spot-size and intensity relations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WavelengthConvention {
    /// `λ / n` in a medium of index `n`. Spot sizes are continuous across
    /// flat interfaces.
    #[default]
    InMedium,
    /// The source (vacuum) wavelength in every medium. Spot sizes jump by
    /// `sqrt(n_out / n_in)` at an interface. This is the convention behind
    /// the reference design curves for the PL450B / HL63603TG units.
    Vacuum,
}

/// Principal axis of a SAG beam.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    First,
    Second,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::First => 0,
            Axis::Second => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AstigmaticBeam {
    vacuum_wavelength: f64,
    power: f64,
    msq: f64,
    #[serde(serialize_with = "serialize_q")]
    q: [Complex64; 2],
    medium_index: f64,
    convention: WavelengthConvention,
}

fn serialize_q<S: Serializer>(q: &[Complex64; 2], s: S) -> Result<S::Ok, S::Error> {
    [[q[0].re, q[0].im], [q[1].re, q[1].im]].serialize(s)
}

impl AstigmaticBeam {
    pub fn new(
        vacuum_wavelength: f64,
        power: f64,
        msq: f64,
        q1: Complex64,
        q2: Complex64,
        medium_index: f64,
        convention: WavelengthConvention,
    ) -> Result<Self> {
        if !(vacuum_wavelength > MIN_WAVELENGTH && vacuum_wavelength < MAX_WAVELENGTH) {
            return domain(format!(
                "vacuum wavelength {vacuum_wavelength:e} m outside (100 nm, 20 um)"
            ));
        }
        if !(power >= 0.0 && power.is_finite()) {
            return domain(format!("power must be finite and non-negative, got {power}"));
        }
        if !(msq >= 1.0 && msq.is_finite()) {
            return domain(format!("M^2 must be >= 1, got {msq}"));
        }
        if !(medium_index >= 1.0 && medium_index.is_finite()) {
            return domain(format!("medium index must be >= 1, got {medium_index}"));
        }
        for q in [q1, q2] {
            if !(q.im > 0.0 && q.im.is_finite() && q.re.is_finite()) {
                return domain(format!("Rayleigh distance must be positive, got q = {q}"));
            }
        }
        Ok(Self {
            vacuum_wavelength,
            power,
            msq,
            q: [q1, q2],
            medium_index,
            convention,
        })
    }

    pub fn vacuum_wavelength(&self) -> f64 {
        self.vacuum_wavelength
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn msq(&self) -> f64 {
        self.msq
    }

    pub fn q(&self, axis: Axis) -> Complex64 {
        self.q[axis.index()]
    }

    pub fn medium_index(&self) -> f64 {
        self.medium_index
    }

    pub fn convention(&self) -> WavelengthConvention {
        self.convention
    }

    /// Rayleigh distance `Im(q)` of one axis in the current medium.
    pub fn rayleigh(&self, axis: Axis) -> f64 {
        self.q[axis.index()].im
    }

    /// Wavelength entering the spot-size and intensity relations.
    pub fn effective_wavelength(&self) -> f64 {
        match self.convention {
            WavelengthConvention::InMedium => self.vacuum_wavelength / self.medium_index,
            WavelengthConvention::Vacuum => self.vacuum_wavelength,
        }
    }

    /// Same beam with its power scaled by `factor` (e.g. a Fresnel transmission).
    pub fn attenuated(&self, factor: f64) -> Self {
        Self {
            power: self.power * factor,
            ..*self
        }
    }

    pub fn with_convention(&self, convention: WavelengthConvention) -> Self {
        Self { convention, ..*self }
    }

    /// Free-space propagation over a distance `d` in the current medium.
    pub fn propagate(&self, d: f64) -> Result<Self> {
        if !(d >= 0.0 && d.is_finite()) {
            return domain(format!("propagation distance must be >= 0, got {d}"));
        }
        let m = RayMatrix::propagation(d);
        Ok(Self {
            q: [m.apply(self.q[0]), m.apply(self.q[1])],
            ..*self
        })
    }

    /// Refraction at a flat interface into a medium of index `n_out`.
    ///
    /// Power is left untouched; Fresnel losses are applied separately.
    pub fn refract_flat(&self, n_out: f64) -> Result<Self> {
        if !(n_out >= 1.0 && n_out.is_finite()) {
            return domain(format!("refractive index must be >= 1, got {n_out}"));
        }
        let m = RayMatrix::refraction(self.medium_index, n_out);
        Ok(Self {
            q: [m.apply(self.q[0]), m.apply(self.q[1])],
            medium_index: n_out,
            ..*self
        })
    }

    pub fn spot_radius(&self, axis: Axis) -> f64 {
        let q = self.q[axis.index()];
        (self.effective_wavelength() * q.norm_sqr() / (PI * q.im)).sqrt()
    }

    pub fn curvature(&self, axis: Axis) -> Curvature {
        let q = self.q[axis.index()];
        if q.re == 0.0 {
            Curvature::Flat
        } else {
            Curvature::Radius(q.norm_sqr() / q.re)
        }
    }

    pub fn geometry(&self) -> BeamGeometry {
        BeamGeometry {
            w1: self.spot_radius(Axis::First),
            w2: self.spot_radius(Axis::Second),
            r1: self.curvature(Axis::First),
            r2: self.curvature(Axis::Second),
        }
    }

    /// Far-field 1/e² half-angle divergence of one axis in the current medium
    /// (paraxial, radians).
    pub fn far_field_half_angle(&self, axis: Axis) -> f64 {
        (self.effective_wavelength() / (PI * self.rayleigh(axis))).sqrt()
    }

    /// Peak irradiance on the beam axis.
    pub fn peak_intensity(&self) -> f64 {
        let [q1, q2] = self.q;
        2.0 * self.power * (q1.im * q2.im).sqrt() / (self.effective_wavelength() * (q1 * q2).norm())
    }

    /// Irradiance (W/m²) at transverse position `(x, y)` in the beam's current plane.
    pub fn intensity_at(&self, x: f64, y: f64) -> f64 {
        self.intensity_profile().at(x, y)
    }

    /// The transverse irradiance at the current plane with spot sizes
    /// resolved once, for repeated evaluation.
    pub fn intensity_profile(&self) -> IntensityProfile {
        let w1 = self.spot_radius(Axis::First);
        let w2 = self.spot_radius(Axis::Second);
        IntensityProfile {
            peak: self.peak_intensity(),
            k1: -2.0 / (w1 * w1),
            k2: -2.0 / (w2 * w2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityProfile {
    peak: f64,
    k1: f64,
    k2: f64,
}

impl IntensityProfile {
    pub fn at(&self, x: f64, y: f64) -> f64 {
        self.peak * (self.k1 * x * x).exp() * (self.k2 * y * y).exp()
    }
}

/// Principal radius of curvature. A beam exactly at its waist has a flat wavefront.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Curvature {
    Flat,
    Radius(f64),
}

impl Serialize for Curvature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Curvature::Flat => s.serialize_str("flat"),
            Curvature::Radius(r) => s.serialize_f64(*r),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeamGeometry {
    pub w1: f64,
    pub w2: f64,
    pub r1: Curvature,
    pub r2: Curvature,
}

/// Paraxial ray-transfer matrix. Only propagation and flat-interface
/// refraction are constructible.
#[derive(Debug, Clone, Copy)]
struct RayMatrix {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl RayMatrix {
    fn propagation(distance: f64) -> Self {
        Self {
            a: 1.0,
            b: distance,
            c: 0.0,
            d: 1.0,
        }
    }

    fn refraction(n_in: f64, n_out: f64) -> Self {
        Self {
            a: 1.0,
            b: 0.0,
            c: 0.0,
            d: n_in / n_out,
        }
    }

    fn apply(&self, q: Complex64) -> Complex64 {
        (q * self.a + self.b) / (q * self.c + self.d)
    }
}

/// Rayleigh distance from a FWHM divergence angle.
///
/// `theta_fwhm` is the full angle in radians and `wavelength` must be quoted
/// in the same medium as the angle.
pub fn rayleigh_from_fwhm(theta_fwhm: f64, wavelength: f64, msq: f64) -> Result<f64> {
    if !(theta_fwhm > 0.0 && theta_fwhm < PI / 2.0) {
        return domain(format!("FWHM angle must lie in (0, pi/2), got {theta_fwhm}"));
    }
    if !(wavelength > 0.0 && wavelength.is_finite()) {
        return domain(format!("wavelength must be positive, got {wavelength}"));
    }
    if !(msq > 0.0 && msq.is_finite()) {
        return domain(format!("M^2 must be positive, got {msq}"));
    }
    let theta_e2 = theta_fwhm * FWHM_TO_INV_E2;
    Ok(4.0 * wavelength * msq / (theta_e2 * theta_e2 * PI))
}

/// A beam at its waist built from diode datasheet values, using the
/// in-medium wavelength convention.
pub fn beam_from_spec(
    wavelength: f64,
    power: f64,
    theta_fwhm_1: f64,
    theta_fwhm_2: f64,
    msq: f64,
    medium_index: f64,
) -> Result<AstigmaticBeam> {
    beam_from_spec_with(
        wavelength,
        power,
        theta_fwhm_1,
        theta_fwhm_2,
        msq,
        medium_index,
        WavelengthConvention::InMedium,
    )
}

pub fn beam_from_spec_with(
    wavelength: f64,
    power: f64,
    theta_fwhm_1: f64,
    theta_fwhm_2: f64,
    msq: f64,
    medium_index: f64,
    convention: WavelengthConvention,
) -> Result<AstigmaticBeam> {
    if !(medium_index >= 1.0 && medium_index.is_finite()) {
        return domain(format!("medium index must be >= 1, got {medium_index}"));
    }
    let lambda = match convention {
        WavelengthConvention::InMedium => wavelength / medium_index,
        WavelengthConvention::Vacuum => wavelength,
    };
    let z1 = rayleigh_from_fwhm(theta_fwhm_1, lambda, msq)?;
    let z2 = rayleigh_from_fwhm(theta_fwhm_2, lambda, msq)?;
    AstigmaticBeam::new(
        wavelength,
        power,
        msq,
        Complex64::new(0.0, z1),
        Complex64::new(0.0, z2),
        medium_index,
        convention,
    )
}

/// Refractive indices on either side of an interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfacePair {
    pub n1: f64,
    pub n2: f64,
}

impl InterfacePair {
    pub fn new(n1: f64, n2: f64) -> Result<Self> {
        if !(n1 >= 1.0 && n2 >= 1.0 && n1.is_finite() && n2.is_finite()) {
            return domain(format!("indices must be >= 1, got ({n1}, {n2})"));
        }
        Ok(Self { n1, n2 })
    }
}

/// Normal-incidence Fresnel power transmission.
pub fn fresnel_t(pair: InterfacePair) -> f64 {
    let InterfacePair { n1, n2 } = pair;
    4.0 * n1 * n2 / ((n1 + n2) * (n1 + n2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn deg(d: f64) -> f64 {
        d.to_radians()
    }

    // Direct evaluation of the FWHM -> Rayleigh relation, written out longhand.
    fn rayleigh_oracle(theta_deg: f64, lambda: f64, msq: f64) -> f64 {
        let full_e2 = theta_deg * std::f64::consts::PI / 180.0 * 1.699;
        4.0 * lambda * msq / (std::f64::consts::PI * full_e2.powi(2))
    }

    fn blue_nominal() -> AstigmaticBeam {
        beam_from_spec(450e-9, 88e-3, deg(7.5), deg(21.5), DEFAULT_MSQ, 1.0).unwrap()
    }

    #[test]
    fn rayleigh_examples() {
        let b = rayleigh_from_fwhm(0.1309, 450e-9, 1.3).unwrap();
        assert_relative_eq!(b, 15.06e-6, max_relative = 5e-4);
        let r = rayleigh_from_fwhm(0.14835, 638e-9, 1.3).unwrap();
        assert_relative_eq!(r, 16.62e-6, max_relative = 5e-4);
        for (d, l) in [(7.5, 450e-9), (8.5, 638e-9), (21.5, 450e-9)] {
            let got = rayleigh_from_fwhm(deg(d), l, 1.3).unwrap();
            assert_relative_eq!(got, rayleigh_oracle(d, l, 1.3), max_relative = 1e-13);
        }
        let z = rayleigh_from_fwhm(0.1, 500e-9, 1.3).unwrap();
        let z2 = rayleigh_from_fwhm(0.2, 500e-9, 1.3).unwrap();
        assert_relative_eq!(z2, z / 4.0, max_relative = 1e-14);
    }

    #[test]
    fn rayleigh_rejects_bad_inputs() {
        assert!(rayleigh_from_fwhm(0.0, 450e-9, 1.3).is_err());
        assert!(rayleigh_from_fwhm(PI / 2.0, 450e-9, 1.3).is_err());
        assert!(rayleigh_from_fwhm(0.1, -1.0, 1.3).is_err());
        assert!(rayleigh_from_fwhm(0.1, 450e-9, 0.0).is_err());
    }

    #[test]
    fn blue_nominal_from_spec() {
        let b = blue_nominal();
        assert_eq!(b.q(Axis::First).re, 0.0);
        assert_relative_eq!(b.rayleigh(Axis::First), 1.5059202214107046e-05, max_relative = 1e-12);
        assert_relative_eq!(b.rayleigh(Axis::Second), 1.8325151423331985e-06, max_relative = 1e-12);
        assert_eq!(b.power(), 88e-3);
        let g = b.geometry();
        assert_eq!(g.r1, Curvature::Flat);
        assert_relative_eq!(g.w1, 1.4686973222063136e-06, max_relative = 1e-12);
    }

    #[test]
    fn zero_power_and_symmetric_specs() {
        let b = beam_from_spec(450e-9, 0.0, deg(7.5), deg(21.5), 1.3, 1.0).unwrap();
        assert_eq!(b.intensity_at(0.0, 0.0), 0.0);
        assert_eq!(b.intensity_at(1e-6, -2e-6), 0.0);
        let s = beam_from_spec(638e-9, 1e-3, deg(13.0), deg(13.0), 1.3, 1.0).unwrap();
        assert_eq!(s.q(Axis::First), s.q(Axis::Second));
    }

    #[test]
    fn propagation_adds_distance() {
        let b = blue_nominal();
        let p = b.propagate(1e-3).unwrap();
        assert_eq!(p.q(Axis::First).re, 1e-3);
        assert_eq!(p.q(Axis::First).im, b.q(Axis::First).im);
        assert_eq!(p.power(), b.power());
        let two = b.propagate(0.4e-3).unwrap().propagate(0.6e-3).unwrap();
        assert_relative_eq!(two.q(Axis::Second).re, 1e-3, max_relative = 1e-15);
        assert!(b.propagate(-1e-9).is_err());
    }

    #[test]
    fn far_field_asymptote() {
        for msq in [1.0, 1.3] {
            let theta = deg(7.5);
            let b = beam_from_spec(450e-9, 1e-3, theta, theta, msq, 1.0).unwrap();
            let z = 1e4 * b.rayleigh(Axis::First);
            let w = b.propagate(z).unwrap().spot_radius(Axis::First);
            // Exact paraxial limit: 1.699·θ / (2·sqrt(M²)).
            let expected = FWHM_TO_INV_E2 * theta / (2.0 * msq.sqrt());
            assert_relative_eq!(w / z, expected, max_relative = 1e-6);
        }
    }

    #[test]
    fn refraction_examples() {
        let b = blue_nominal().propagate(0.3e-3).unwrap();
        let same = b.refract_flat(1.0).unwrap();
        assert_eq!(same, b);

        let glue = b.refract_flat(1.54).unwrap();
        assert_eq!(glue.medium_index(), 1.54);
        assert_relative_eq!(
            glue.spot_radius(Axis::First),
            b.spot_radius(Axis::First),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            glue.spot_radius(Axis::Second),
            b.spot_radius(Axis::Second),
            max_relative = 1e-14
        );

        let z = 1e5 * b.rayleigh(Axis::First);
        let div_air = b.propagate(z).unwrap().spot_radius(Axis::First) / z;
        let div_glue = glue.propagate(z).unwrap().spot_radius(Axis::First) / z;
        assert_relative_eq!(div_glue / div_air, 1.0 / 1.54, max_relative = 1e-3);
        assert!(b.refract_flat(0.9).is_err());
    }

    #[test]
    fn vacuum_convention_jumps_at_interfaces() {
        let b = blue_nominal()
            .with_convention(WavelengthConvention::Vacuum)
            .propagate(1e-3)
            .unwrap();
        let g = b.refract_flat(1.54).unwrap();
        assert_relative_eq!(
            g.spot_radius(Axis::First) / b.spot_radius(Axis::First),
            1.54f64.sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn geometry_identities() {
        let b = AstigmaticBeam::new(
            638e-9,
            1e-3,
            1.3,
            Complex64::new(20e-6, 20e-6),
            Complex64::new(0.0, 5e-6),
            1.0,
            WavelengthConvention::InMedium,
        )
        .unwrap();
        match b.curvature(Axis::First) {
            Curvature::Radius(r) => assert_relative_eq!(r, 40e-6, max_relative = 1e-14),
            Curvature::Flat => panic!("expected finite radius"),
        }
        let waist = beam_from_spec(638e-9, 1e-3, deg(8.5), deg(18.0), 1.3, 1.0).unwrap();
        let zr = waist.rayleigh(Axis::Second);
        let at_zr = waist.propagate(zr).unwrap();
        assert_relative_eq!(
            at_zr.spot_radius(Axis::Second),
            2f64.sqrt() * waist.spot_radius(Axis::Second),
            max_relative = 1e-14
        );
    }

    #[test]
    fn on_axis_intensity() {
        let b = blue_nominal().propagate(0.7e-3).unwrap();
        let g = b.geometry();
        assert_relative_eq!(
            b.intensity_at(0.0, 0.0),
            2.0 * b.power() / (PI * g.w1 * g.w2),
            max_relative = 1e-13
        );
    }

    #[test]
    fn fresnel_examples() {
        assert_eq!(fresnel_t(InterfacePair::new(1.5, 1.5).unwrap()), 1.0);
        assert_relative_eq!(
            fresnel_t(InterfacePair::new(1.5, 1.54).unwrap()),
            0.99983,
            max_relative = 1e-5
        );
        assert_relative_eq!(
            fresnel_t(InterfacePair::new(1.0, 1.5).unwrap()),
            0.96,
            max_relative = 1e-15
        );
        assert!(InterfacePair::new(0.5, 1.0).is_err());
    }

    #[test]
    fn constructor_invariants() {
        let q = Complex64::new(0.0, 1e-6);
        let c = WavelengthConvention::InMedium;
        assert!(AstigmaticBeam::new(50e-9, 1.0, 1.3, q, q, 1.0, c).is_err());
        assert!(AstigmaticBeam::new(450e-9, -1.0, 1.3, q, q, 1.0, c).is_err());
        assert!(AstigmaticBeam::new(450e-9, 1.0, 0.9, q, q, 1.0, c).is_err());
        assert!(AstigmaticBeam::new(450e-9, 1.0, 1.3, q, q, 0.99, c).is_err());
        assert!(AstigmaticBeam::new(450e-9, 1.0, 1.3, q, Complex64::new(1.0, 0.0), 1.0, c).is_err());
    }

    proptest! {
        #[test]
        fn fresnel_symmetric_and_bounded(n1 in 1.0f64..4.0, n2 in 1.0f64..4.0) {
            let t = fresnel_t(InterfacePair::new(n1, n2).unwrap());
            prop_assert_eq!(t, fresnel_t(InterfacePair::new(n2, n1).unwrap()));
            prop_assert!(t > 0.0 && t <= 1.0);
            if n1 != n2 {
                prop_assert!(t < 1.0);
            }
        }

        #[test]
        fn rayleigh_monotone_and_linear(t in 0.01f64..1.0, dt in 0.001f64..0.5, l in 200e-9f64..2e-6, m in 1.0f64..3.0) {
            let a = rayleigh_from_fwhm(t, l, m).unwrap();
            let b = rayleigh_from_fwhm((t + dt).min(1.5), l, m).unwrap();
            prop_assert!(b < a);
            let doubled = rayleigh_from_fwhm(t, 2.0 * l, m).unwrap();
            prop_assert!((doubled / a - 2.0).abs() < 1e-12);
        }

        #[test]
        fn propagation_composes(d1 in 0.0f64..5e-3, d2 in 0.0f64..5e-3) {
            let b = blue_nominal();
            let split = b.propagate(d1).unwrap().propagate(d2).unwrap();
            let whole = b.propagate(d1 + d2).unwrap();
            prop_assert!((split.q(Axis::First) - whole.q(Axis::First)).norm() <= 1e-15 * (d1 + d2).max(1e-9) * 4.0);
            prop_assert_eq!(split.rayleigh(Axis::Second), b.rayleigh(Axis::Second));
        }
    }
}
