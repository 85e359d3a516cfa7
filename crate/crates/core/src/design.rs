//! Inverse design and tolerance analysis for a single diode path: coupled
//! power against pathway length, the longest pathway meeting a power
//! requirement, corner sweeps over the datasheet ranges, and Monte Carlo
//! draws over the same ranges.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::{Axis, WavelengthConvention};
use crate::coupling::{coupled_power, Alignment, CouplingResult, FiberSpec, DEFAULT_REL_TOL};
use crate::error::{domain, Error, Result};
use crate::stack::{build_unit_stack, trace_stack, Choice, LaserDiodeSpec, StackParams};

/// Longest pathway considered by curves.
pub const MAX_CURVE_PATHWAY: f64 = 20e-3;
/// Bisection stops once the bracket is narrower than this.
pub const BISECTION_TOLERANCE: f64 = 1e-6;
/// Upper search limit for `max_pathway`.
pub const SEARCH_LIMIT: f64 = 100e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Requirement {
    pub label: String,
    /// watts
    pub min_power: f64,
}

impl Requirement {
    pub fn new(label: impl Into<String>, min_power: f64) -> Result<Self> {
        if !(min_power > 0.0 && min_power.is_finite()) {
            return domain(format!("required power must be positive, got {min_power}"));
        }
        Ok(Self {
            label: label.into(),
            min_power,
        })
    }

    /// Blue activation requirement: 100 uW at the fiber tip.
    pub fn blue() -> Self {
        Self {
            label: "blue-100uW".into(),
            min_power: 100e-6,
        }
    }

    /// Red silencing requirement: 1 mW at the fiber tip.
    pub fn red() -> Self {
        Self {
            label: "red-1mW".into(),
            min_power: 1e-3,
        }
    }
}

/// Everything besides the diode and pathway that fixes one coupling evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub divergence_1: Choice,
    pub divergence_2: Choice,
    pub offset: Alignment,
    pub fiber: FiberSpec,
    pub stack: StackParams,
    pub wavelength_convention: WavelengthConvention,
    pub rel_tol: f64,
}

impl Default for Scenario {
    /// Nominal divergences, centered fiber, no acceptance-cone clipping.
    fn default() -> Self {
        Self {
            divergence_1: Choice::Nominal,
            divergence_2: Choice::Nominal,
            offset: Alignment::default(),
            fiber: FiberSpec::default(),
            stack: StackParams::default(),
            wavelength_convention: WavelengthConvention::Vacuum,
            rel_tol: DEFAULT_REL_TOL,
        }
    }
}

/// Couples one explicit parameter set: source beam → unit stack → fiber.
pub fn evaluate(
    ld: &LaserDiodeSpec,
    pathway: f64,
    theta_1: f64,
    theta_2: f64,
    offset: Alignment,
    scenario: &Scenario,
) -> Result<CouplingResult> {
    let beam = ld.source_beam(theta_1, theta_2, scenario.wavelength_convention)?;
    let stack = build_unit_stack(ld, pathway, &scenario.stack)?;
    let face = trace_stack(&beam, &stack)?;
    coupled_power(&face, ld.power_at_drive, &scenario.fiber, offset, scenario.rel_tol)
}

fn evaluate_scenario(ld: &LaserDiodeSpec, pathway: f64, scenario: &Scenario) -> Result<CouplingResult> {
    evaluate(
        ld,
        pathway,
        ld.theta_fwhm_1.pick(scenario.divergence_1),
        ld.theta_fwhm_2.pick(scenario.divergence_2),
        scenario.offset,
        scenario,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    /// meters
    pub pathway: f64,
    /// watts
    pub coupled_power: f64,
}

/// Coupled power at `steps` evenly spaced pathways across `range`.
pub fn power_vs_pathway(
    ld: &LaserDiodeSpec,
    scenario: &Scenario,
    range: (f64, f64),
    steps: usize,
) -> Result<Vec<CurvePoint>> {
    let (start, end) = range;
    if steps < 2 {
        return domain(format!("need at least 2 steps, got {steps}"));
    }
    if !(start >= ld.min_pathway && start < end && end <= MAX_CURVE_PATHWAY * (1.0 + 1e-12)) {
        return domain(format!(
            "pathway range ({start}, {end}) must lie within [{}, {MAX_CURVE_PATHWAY}] and be increasing",
            ld.min_pathway
        ));
    }
    let step = (end - start) / (steps - 1) as f64;
    (0..steps)
        .into_par_iter()
        .map(|i| {
            let pathway = if i == steps - 1 { end } else { start + step * i as f64 };
            let res = evaluate_scenario(ld, pathway, scenario)?;
            Ok(CurvePoint {
                pathway,
                coupled_power: res.coupled_power,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum PathwaySolution {
    /// Longest pathway meeting the requirement, to within the bisection tolerance.
    Found { pathway: f64, coupled_power: f64 },
    /// The requirement still holds at the search limit.
    BeyondLimit { limit: f64, coupled_power: f64 },
}

/// Longest pathway whose coupled power still meets `req`.
pub fn max_pathway(ld: &LaserDiodeSpec, scenario: &Scenario, req: &Requirement) -> Result<PathwaySolution> {
    max_pathway_with_tolerance(ld, scenario, req, BISECTION_TOLERANCE)
}

pub fn max_pathway_with_tolerance(
    ld: &LaserDiodeSpec,
    scenario: &Scenario,
    req: &Requirement,
    tolerance: f64,
) -> Result<PathwaySolution> {
    if !(tolerance > 0.0) {
        return domain("bisection tolerance must be positive");
    }
    let power = |pathway: f64| evaluate_scenario(ld, pathway, scenario).map(|r| r.coupled_power);
    let at_min = power(ld.min_pathway)?;
    if at_min < req.min_power {
        return Err(Error::NoFeasibleDesign(format!(
            "{}: {:.4e} W at the minimum pathway {:.4e} m is below the required {:.4e} W",
            ld.label, at_min, ld.min_pathway, req.min_power
        )));
    }

    // Start the lower bracket in the far field, where power falls monotonically.
    let source = ld.source_beam(
        ld.theta_fwhm_1.pick(scenario.divergence_1),
        ld.theta_fwhm_2.pick(scenario.divergence_2),
        scenario.wavelength_convention,
    )?;
    let far_field = 100.0 * source.rayleigh(Axis::First).max(source.rayleigh(Axis::Second));
    let mut lo = ld.min_pathway;
    let mut lo_power = at_min;
    if far_field > lo && far_field < SEARCH_LIMIT {
        let p = power(far_field)?;
        if p >= req.min_power {
            lo = far_field;
            lo_power = p;
        }
    }

    let mut hi = 1e-3;
    loop {
        if hi > lo {
            if hi >= SEARCH_LIMIT {
                let p = power(SEARCH_LIMIT)?;
                if p >= req.min_power {
                    return Ok(PathwaySolution::BeyondLimit {
                        limit: SEARCH_LIMIT,
                        coupled_power: p,
                    });
                }
                hi = SEARCH_LIMIT;
                break;
            }
            let p = power(hi)?;
            if p < req.min_power {
                break;
            }
            lo = hi;
            lo_power = p;
        }
        hi *= 2.0;
    }

    while hi - lo >= tolerance {
        let mid = 0.5 * (lo + hi);
        let p = power(mid)?;
        if p >= req.min_power {
            lo = mid;
            lo_power = p;
        } else {
            hi = mid;
        }
    }
    Ok(PathwaySolution::Found {
        pathway: lo,
        coupled_power: lo_power,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OffsetLevel {
    Zero,
    Nominal,
    Max,
}

impl OffsetLevel {
    pub const ALL: [OffsetLevel; 3] = [OffsetLevel::Zero, OffsetLevel::Nominal, OffsetLevel::Max];

    fn value(self, ld: &LaserDiodeSpec) -> f64 {
        match self {
            OffsetLevel::Zero => 0.0,
            OffsetLevel::Nominal => ld.offset_bound.nominal,
            OffsetLevel::Max => ld.offset_bound.max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Corner {
    pub divergence_1: Choice,
    pub divergence_2: Choice,
    pub offset_x: OffsetLevel,
    pub offset_y: OffsetLevel,
    pub theta_1: f64,
    pub theta_2: f64,
    pub dx: f64,
    pub dy: f64,
    pub coupled_power: f64,
    pub quadrature_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RequirementMargin {
    pub label: String,
    pub min_power: f64,
    /// Worst-case coupled power minus the requirement, watts.
    pub worst_margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub label: String,
    pub pathway: f64,
    pub corners: Vec<Corner>,
    pub best: Corner,
    pub worst: Corner,
    pub margins: Vec<RequirementMargin>,
}

/// All 81 combinations of {min, nominal, max} divergence per axis and
/// {0, nominal, max} offset per axis.
pub fn corner_sweep(
    ld: &LaserDiodeSpec,
    pathway: f64,
    scenario: &Scenario,
    requirements: &[Requirement],
) -> Result<SweepReport> {
    let mut combos = Vec::with_capacity(81);
    for d1 in Choice::ALL {
        for d2 in Choice::ALL {
            for ox in OffsetLevel::ALL {
                for oy in OffsetLevel::ALL {
                    combos.push((d1, d2, ox, oy));
                }
            }
        }
    }
    let corners: Vec<Corner> = combos
        .into_par_iter()
        .map(|(d1, d2, ox, oy)| {
            let theta_1 = ld.theta_fwhm_1.pick(d1);
            let theta_2 = ld.theta_fwhm_2.pick(d2);
            let offset = Alignment {
                dx: ox.value(ld),
                dy: oy.value(ld),
            };
            let res = evaluate(ld, pathway, theta_1, theta_2, offset, scenario)?;
            Ok(Corner {
                divergence_1: d1,
                divergence_2: d2,
                offset_x: ox,
                offset_y: oy,
                theta_1,
                theta_2,
                dx: offset.dx,
                dy: offset.dy,
                coupled_power: res.coupled_power,
                quadrature_error: res.quadrature_error,
            })
        })
        .collect::<Result<_>>()?;
    let by_power = |a: &&Corner, b: &&Corner| a.coupled_power.total_cmp(&b.coupled_power);
    let best = *corners.iter().max_by(by_power).expect("81 corners");
    let worst = *corners.iter().min_by(by_power).expect("81 corners");
    let margins = requirements
        .iter()
        .map(|r| RequirementMargin {
            label: r.label.clone(),
            min_power: r.min_power,
            worst_margin: worst.coupled_power - r.min_power,
            pass: worst.coupled_power >= r.min_power,
        })
        .collect();
    Ok(SweepReport {
        label: ld.label.clone(),
        pathway,
        corners,
        best,
        worst,
        margins,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McSample {
    pub index: usize,
    pub theta_1: f64,
    pub theta_2: f64,
    pub dx: f64,
    pub dy: f64,
    pub coupled_power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub min: f64,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassRate {
    pub label: String,
    pub min_power: f64,
    pub pass_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub label: String,
    pub pathway: f64,
    pub n: usize,
    pub seed: u64,
    pub summary: Summary,
    pub requirements: Vec<PassRate>,
    pub samples: Vec<McSample>,
}

/// Linear interpolation between order statistics of a sorted slice.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn draw(ld: &LaserDiodeSpec, seed: u64, index: usize) -> (f64, f64, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let t1 = rng.random_range(ld.theta_fwhm_1.min..=ld.theta_fwhm_1.max);
    let t2 = rng.random_range(ld.theta_fwhm_2.min..=ld.theta_fwhm_2.max);
    let m = ld.offset_bound.max;
    let dx = rng.random_range(-m..=m);
    let dy = rng.random_range(-m..=m);
    (t1, t2, dx, dy)
}

/// Uniform draws of divergences in `[min, max]` and offsets in
/// `[-max, max]` per axis. Draw `i` uses its own ChaCha stream, so results
/// do not depend on thread count or scheduling.
pub fn tolerance_monte_carlo(
    ld: &LaserDiodeSpec,
    pathway: f64,
    scenario: &Scenario,
    n: usize,
    seed: u64,
    requirements: &[Requirement],
) -> Result<MonteCarloReport> {
    if n < 100 {
        return domain(format!("Monte Carlo needs at least 100 draws, got {n}"));
    }
    ld.validate()?;
    let samples: Vec<McSample> = (0..n)
        .into_par_iter()
        .map(|index| {
            let (theta_1, theta_2, dx, dy) = draw(ld, seed, index);
            let res = evaluate(ld, pathway, theta_1, theta_2, Alignment { dx, dy }, scenario)?;
            Ok(McSample {
                index,
                theta_1,
                theta_2,
                dx,
                dy,
                coupled_power: res.coupled_power,
            })
        })
        .collect::<Result<_>>()?;

    let mut powers: Vec<f64> = samples.iter().map(|s| s.coupled_power).collect();
    powers.sort_by(f64::total_cmp);
    let summary = Summary {
        min: powers[0],
        p5: percentile(&powers, 0.05),
        p50: percentile(&powers, 0.50),
        p95: percentile(&powers, 0.95),
        max: powers[n - 1],
        mean: powers.iter().sum::<f64>() / n as f64,
    };
    let requirements = requirements
        .iter()
        .map(|r| PassRate {
            label: r.label.clone(),
            min_power: r.min_power,
            pass_probability: powers.iter().filter(|&&p| p >= r.min_power).count() as f64 / n as f64,
        })
        .collect();
    Ok(MonteCarloReport {
        label: ld.label.clone(),
        pathway,
        n,
        seed,
        summary,
        requirements,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stack::Triple;

    fn blue() -> LaserDiodeSpec {
        LaserDiodeSpec::blue_pl450b()
    }

    fn red() -> LaserDiodeSpec {
        LaserDiodeSpec::red_hl63603tg()
    }

    #[test]
    fn curve_is_ascending_and_decreasing() {
        for ld in [blue(), red()] {
            let curve = power_vs_pathway(&ld, &Scenario::default(), (ld.min_pathway, MAX_CURVE_PATHWAY), 40).unwrap();
            assert_eq!(curve.len(), 40);
            assert_eq!(curve[39].pathway, MAX_CURVE_PATHWAY);
            for pair in curve.windows(2) {
                assert!(pair[1].pathway > pair[0].pathway);
                assert!(
                    pair[1].coupled_power < pair[0].coupled_power,
                    "{} not decreasing",
                    ld.label
                );
            }
        }
    }

    #[test]
    fn curve_rejects_bad_ranges() {
        let s = Scenario::default();
        assert!(power_vs_pathway(&blue(), &s, (1e-3, 5e-3), 10).is_err());
        assert!(power_vs_pathway(&blue(), &s, (3e-3, 25e-3), 10).is_err());
        assert!(power_vs_pathway(&blue(), &s, (3e-3, 5e-3), 1).is_err());
    }

    #[test]
    fn max_pathway_round_trip() {
        for (ld, req) in [(blue(), Requirement::blue()), (red(), Requirement::red())] {
            let s = Scenario::default();
            let PathwaySolution::Found { pathway, coupled_power } = max_pathway(&ld, &s, &req).unwrap() else {
                panic!("expected a bounded pathway");
            };
            let back = power_vs_pathway(&ld, &s, (pathway, pathway * 1.5), 2).unwrap()[0].coupled_power;
            assert_eq!(back, coupled_power);
            assert!(back >= req.min_power && back <= req.min_power * (1.0 + 1e-3), "{back}");
            let past = evaluate_scenario(&ld, pathway + BISECTION_TOLERANCE, &s).unwrap();
            assert!(past.coupled_power < req.min_power);
        }
    }

    #[test]
    fn infeasible_and_unbounded_requirements() {
        let s = Scenario::default();
        let too_much = Requirement::new("too much", 0.1).unwrap();
        assert!(matches!(
            max_pathway(&blue(), &s, &too_much),
            Err(Error::NoFeasibleDesign(_))
        ));
        let tiny = Requirement::new("tiny", 1e-9).unwrap();
        assert!(matches!(
            max_pathway(&red(), &s, &tiny).unwrap(),
            PathwaySolution::BeyondLimit { .. }
        ));
        assert!(Requirement::new("zero", 0.0).is_err());
    }

    #[test]
    fn corner_sweep_structure() {
        let ld = red();
        let s = Scenario::default();
        let rep = corner_sweep(&ld, 1.0e-3, &s, &[Requirement::red()]).unwrap();
        assert_eq!(rep.corners.len(), 81);
        assert_eq!(rep.worst.divergence_1, Choice::Max);
        assert_eq!(rep.worst.divergence_2, Choice::Max);
        assert_eq!(rep.worst.offset_x, OffsetLevel::Max);
        assert_eq!(rep.worst.offset_y, OffsetLevel::Max);
        let nominal = rep
            .corners
            .iter()
            .find(|c| {
                c.divergence_1 == Choice::Nominal
                    && c.divergence_2 == Choice::Nominal
                    && c.offset_x == OffsetLevel::Zero
                    && c.offset_y == OffsetLevel::Zero
            })
            .unwrap();
        let curve = power_vs_pathway(&ld, &s, (1.0e-3, 2.0e-3), 2).unwrap();
        assert_eq!(nominal.coupled_power, curve[0].coupled_power);
        assert_eq!(rep.margins[0].worst_margin, rep.worst.coupled_power - 1e-3);
    }

    #[test]
    fn monte_carlo_stays_within_corner_envelope() {
        let sc = Scenario::default();
        for ld in [blue(), red()] {
            let sweep = corner_sweep(&ld, ld.min_pathway, &sc, &[]).unwrap();
            let mc = tolerance_monte_carlo(&ld, ld.min_pathway, &sc, 200, 9, &[]).unwrap();
            let slack = 1e-6 * sweep.best.coupled_power;
            assert!(mc.summary.min >= sweep.worst.coupled_power - slack);
            assert!(mc.summary.max <= sweep.best.coupled_power + slack);
        }
    }

    #[test]
    fn monte_carlo_degenerate_ranges() {
        let mut ld = red();
        ld.theta_fwhm_1 = Triple::fixed(ld.theta_fwhm_1.nominal);
        ld.theta_fwhm_2 = Triple::fixed(ld.theta_fwhm_2.nominal);
        ld.offset_bound = Triple::fixed(0.0);
        let rep = tolerance_monte_carlo(&ld, 1e-3, &Scenario::default(), 100, 7, &[]).unwrap();
        let first = rep.samples[0].coupled_power;
        assert!(rep.samples.iter().all(|s| s.coupled_power == first));
        assert_eq!(rep.summary.p5, rep.summary.p95);
    }

    #[test]
    fn monte_carlo_is_reproducible_and_ordered() {
        let ld = blue();
        let s = Scenario::default();
        let a = tolerance_monte_carlo(&ld, 4e-3, &s, 200, 42, &[Requirement::blue()]).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool
            .install(|| tolerance_monte_carlo(&ld, 4e-3, &s, 200, 42, &[Requirement::blue()]))
            .unwrap();
        assert_eq!(a, b);
        assert!(a.summary.p5 <= a.summary.p50 && a.summary.p50 <= a.summary.p95);
        let c = tolerance_monte_carlo(&ld, 4e-3, &s, 200, 43, &[]).unwrap();
        assert_ne!(a.samples[0], c.samples[0]);
        for smp in &a.samples {
            assert!(smp.dx.abs() <= ld.offset_bound.max);
            assert!(smp.theta_1 >= ld.theta_fwhm_1.min && smp.theta_1 <= ld.theta_fwhm_1.max);
        }
        assert!(tolerance_monte_carlo(&ld, 4e-3, &s, 99, 42, &[]).is_err());
    }

    #[test]
    fn pass_probability_falls_with_pathway() {
        let ld = blue();
        let s = Scenario::default();
        let req = [Requirement::blue()];
        let rates: Vec<f64> = [4e-3, 6e-3, 8e-3]
            .iter()
            .map(|&p| tolerance_monte_carlo(&ld, p, &s, 300, 11, &req).unwrap().requirements[0].pass_probability)
            .collect();
        assert!(rates[0] >= rates[1] && rates[1] >= rates[2], "{rates:?}");
        assert!(rates[0] > rates[2]);
    }

    #[test]
    fn percentile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&v, 0.5), 3.0);
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 1.0), 5.0);
        assert_eq!(percentile(&v, 0.125), 1.5);
    }
}
