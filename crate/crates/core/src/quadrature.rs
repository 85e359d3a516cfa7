//! Globally adaptive Gauss–Kronrod quadrature (7-point Gauss / 15-point
//! Kronrod pairs) and a nested variant for integrals over a disc.

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

pub const DEFAULT_MAX_INTERVALS: usize = 4000;

/// Convergence target: stop once `error <= max(abs, rel * |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Upper bound on the absolute error, built from Gauss/Kronrod differences.
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (j, (&x, &wk)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += wk * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Runs adaptive quadrature but returns the best estimate even when the
/// tolerance is not met; the caller decides what to do with the bound.
fn integrate_raw<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
    max_intervals: usize,
) -> (Estimate, bool) {
    let first = kronrod(&mut f, a, b);
    let mut evaluations = 15;
    let mut value = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    while error > tol.target(value) {
        if heap.len() >= max_intervals {
            return (
                Estimate {
                    value,
                    error,
                    evaluations,
                },
                false,
            );
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further in floating point.
            heap.push(worst);
            return (
                Estimate {
                    value,
                    error,
                    evaluations,
                },
                false,
            );
        }
        let left = kronrod(&mut f, worst.a, mid);
        let right = kronrod(&mut f, mid, worst.b);
        evaluations += 30;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if heap.len() % 64 == 0 {
            // Re-sum to shed accumulated cancellation in the running totals.
            value = heap.iter().map(|s| s.value).sum();
            error = heap.iter().map(|s| s.error).sum();
        }
    }
    let value = heap.iter().map(|s| s.value).sum();
    let error = heap.iter().map(|s| s.error).sum();
    (
        Estimate {
            value,
            error,
            evaluations,
        },
        true,
    )
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance, max_intervals: usize) -> Result<Estimate> {
    let (est, ok) = integrate_raw(f, a, b, tol, max_intervals);
    if ok {
        Ok(est)
    } else {
        Err(Error::NonConvergence {
            estimate: est.value,
            bound: est.error,
        })
    }
}

/// Integrates `f(x, y)` over the disc of `radius` around `center`.
///
/// The outer variable is `x = cx + r·sin(t)`, `t ∈ [-π/2, π/2]`, which
/// removes the square-root endpoint behavior of the chord length. Each
/// inner integral runs over the full chord in `y`. The reported error is
/// the outer bound plus `π·r` times the largest inner bound.
pub fn integrate_disc<F: Fn(f64, f64) -> f64>(
    f: F,
    center: (f64, f64),
    radius: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    let (cx, cy) = center;
    let run = |outer_tol: Tolerance, inner_tol: Tolerance| {
        let max_inner = Cell::new(0.0f64);
        let evals = Cell::new(0usize);
        let inner_ok = Cell::new(true);
        let outer = |t: f64| {
            let (s, c) = t.sin_cos();
            let x = cx + radius * s;
            let h = radius * c;
            let (est, ok) = integrate_raw(|y| f(x, y), cy - h, cy + h, inner_tol, DEFAULT_MAX_INTERVALS);
            max_inner.set(max_inner.get().max(est.error));
            evals.set(evals.get() + est.evaluations);
            if !ok {
                inner_ok.set(false);
            }
            est.value * h
        };
        let (est, ok) = integrate_raw(outer, -FRAC_PI_2, FRAC_PI_2, outer_tol, DEFAULT_MAX_INTERVALS);
        let error = est.error + std::f64::consts::PI * radius * max_inner.get();
        (
            Estimate {
                value: est.value,
                error,
                evaluations: evals.get(),
            },
            ok && inner_ok.get(),
        )
    };

    // A coarse pilot fixes the absolute scale for the inner tolerances.
    let pilot_inner = Tolerance {
        abs: tol.abs / (std::f64::consts::PI * radius),
        rel: 1e-4,
    };
    let pilot_outer = Tolerance {
        abs: tol.abs,
        rel: 1e-4,
    };
    let (pilot, _) = run(pilot_outer, pilot_inner);
    let target = tol.target(pilot.value);
    let inner = Tolerance {
        abs: 0.25 * target / (std::f64::consts::PI * radius),
        rel: 0.0,
    };
    let outer = Tolerance {
        abs: 0.5 * target,
        rel: 0.0,
    };
    let (est, ok) = run(outer, inner);
    if ok && est.error <= tol.target(est.value).max(target) {
        Ok(Estimate {
            evaluations: est.evaluations + pilot.evaluations,
            ..est
        })
    } else {
        Err(Error::NonConvergence {
            estimate: est.value,
            bound: est.error,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const TIGHT: Tolerance = Tolerance { abs: 0.0, rel: 1e-12 };

    #[test]
    fn polynomial_is_exact() {
        let est = integrate(|x| 3.0 * x * x + 2.0 * x + 1.0, 0.0, 2.0, TIGHT, 10).unwrap();
        assert_relative_eq!(est.value, 14.0, max_relative = 1e-14);
    }

    #[test]
    fn peaked_integrand() {
        let est = integrate(|x| (-1e4 * (x - 0.3).powi(2)).exp(), -1.0, 1.0, TIGHT, 1000).unwrap();
        assert_relative_eq!(est.value, (std::f64::consts::PI / 1e4).sqrt(), max_relative = 1e-11);
    }

    #[test]
    fn budget_exhaustion_reports_estimate() {
        let err = integrate(|x| x.sin() / x.abs().sqrt().max(1e-300), 0.0, 1.0, TIGHT, 2).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
    }

    #[test]
    fn disc_area_and_moment() {
        let tol = Tolerance { abs: 0.0, rel: 1e-10 };
        let area = integrate_disc(|_, _| 1.0, (0.3, -0.2), 2.0, tol).unwrap();
        assert_relative_eq!(area.value, 4.0 * std::f64::consts::PI, max_relative = 1e-10);
        // ∫∫ x² over a centered disc of radius r is π r⁴ / 4.
        let m = integrate_disc(|x, _| x * x, (0.0, 0.0), 1.5, tol).unwrap();
        assert_relative_eq!(
            m.value,
            std::f64::consts::PI * 1.5f64.powi(4) / 4.0,
            max_relative = 1e-10
        );
        assert!(m.error <= 1e-10 * m.value);
    }
}
