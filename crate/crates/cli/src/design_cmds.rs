use std::fmt::Write as _;
use std::path::Path;

use dualbeam_core::design::{
    corner_sweep, max_pathway, power_vs_pathway, tolerance_monte_carlo, PassRate, PathwaySolution, Requirement,
    Summary, SweepReport,
};
use serde::Serialize;

use crate::output::{emit, emit_json};
use crate::scenario::{resolve, Overrides, Resolved, ScenarioFile};
use crate::DesignArgs;

fn load(args: &DesignArgs, extra: Overrides) -> anyhow::Result<Resolved> {
    let file = args.scenario.as_deref().map(ScenarioFile::load).transpose()?;
    resolve(
        file,
        Overrides {
            preset: args.preset.clone(),
            min_power_mw: args.min_power_mw,
            ..extra
        },
    )
}

pub fn curve(
    args: &DesignArgs,
    start_mm: Option<f64>,
    end_mm: Option<f64>,
    steps: Option<usize>,
) -> anyhow::Result<()> {
    let r = load(args, Overrides::default())?;
    let start = start_mm.or(r.sweep.start_mm).unwrap_or(r.diode.min_pathway * 1e3);
    let end = end_mm.unwrap_or(r.sweep.end_mm);
    let steps = steps.unwrap_or(r.sweep.steps);
    let points = power_vs_pathway(&r.diode, &r.scenario, (start * 1e-3, end * 1e-3), steps)?;
    let mut csv = String::from("pathway_mm,power_mW\n");
    for p in points {
        writeln!(csv, "{},{}", p.pathway * 1e3, p.coupled_power * 1e3)?;
    }
    emit(args.out.as_deref(), csv.as_bytes())
}

#[derive(Serialize)]
struct PathwayEntry {
    requirement: Requirement,
    status: &'static str,
    pathway_mm: f64,
    /// Pathway beyond the mechanical minimum.
    margin_mm: f64,
    coupled_power_mw: f64,
}

#[derive(Serialize)]
struct PathwayReport {
    label: String,
    /// Most restrictive requirement.
    pathway_mm: f64,
    margin_mm: f64,
    results: Vec<PathwayEntry>,
    resolved: Resolved,
}

pub fn pathway(args: &DesignArgs) -> anyhow::Result<()> {
    let r = load(args, Overrides::default())?;
    let min_mm = r.diode.min_pathway * 1e3;
    let mut results = Vec::new();
    for req in &r.requirements {
        let (status, pathway, power) = match max_pathway(&r.diode, &r.scenario, req)? {
            PathwaySolution::Found { pathway, coupled_power } => ("found", pathway, coupled_power),
            PathwaySolution::BeyondLimit { limit, coupled_power } => ("beyond-limit", limit, coupled_power),
        };
        results.push(PathwayEntry {
            requirement: req.clone(),
            status,
            pathway_mm: pathway * 1e3,
            margin_mm: pathway * 1e3 - min_mm,
            coupled_power_mw: power * 1e3,
        });
    }
    let pathway_mm = results.iter().map(|e| e.pathway_mm).fold(f64::INFINITY, f64::min);
    let report = PathwayReport {
        label: r.diode.label.clone(),
        pathway_mm,
        margin_mm: pathway_mm - min_mm,
        results,
        resolved: r,
    };
    emit_json(args.out.as_deref(), &report)
}

#[derive(Serialize)]
struct CornersReport {
    report: SweepReport,
    resolved: Resolved,
}

pub fn corners(args: &DesignArgs, pathway_mm: Option<f64>) -> anyhow::Result<()> {
    let r = load(
        args,
        Overrides {
            pathway_mm,
            ..Default::default()
        },
    )?;
    let report = corner_sweep(&r.diode, r.pathway_mm * 1e-3, &r.scenario, &r.requirements)?;
    emit_json(args.out.as_deref(), &CornersReport { report, resolved: r })
}

#[derive(Serialize)]
struct MonteCarloSummary {
    label: String,
    pathway: f64,
    n: usize,
    seed: u64,
    summary: Summary,
    requirements: Vec<PassRate>,
}

#[derive(Serialize)]
struct MonteCarloOutput {
    report: MonteCarloSummary,
    resolved: Resolved,
}

pub fn montecarlo(
    args: &DesignArgs,
    pathway_mm: Option<f64>,
    samples: Option<usize>,
    seed: Option<u64>,
    samples_csv: Option<&Path>,
) -> anyhow::Result<()> {
    let r = load(
        args,
        Overrides {
            pathway_mm,
            samples,
            seed,
            ..Default::default()
        },
    )?;
    let rep = tolerance_monte_carlo(
        &r.diode,
        r.pathway_mm * 1e-3,
        &r.scenario,
        r.montecarlo.samples,
        r.seed,
        &r.requirements,
    )?;
    if let Some(path) = samples_csv {
        let mut csv = String::from("index,theta_1_deg,theta_2_deg,dx_um,dy_um,power_mW\n");
        for s in &rep.samples {
            writeln!(
                csv,
                "{},{},{},{},{},{}",
                s.index,
                s.theta_1.to_degrees(),
                s.theta_2.to_degrees(),
                s.dx * 1e6,
                s.dy * 1e6,
                s.coupled_power * 1e3
            )?;
        }
        emit(Some(path), csv.as_bytes())?;
    }
    let out = MonteCarloOutput {
        report: MonteCarloSummary {
            label: rep.label,
            pathway: rep.pathway,
            n: rep.n,
            seed: rep.seed,
            summary: rep.summary,
            requirements: rep.requirements,
        },
        resolved: r,
    };
    emit_json(args.out.as_deref(), &out)
}
