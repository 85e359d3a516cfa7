use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Subcommand, ValueEnum};
use dualbeam_core::profile::{border_noise, illuminated_mask, iou, IntensityImage, DEFAULT_K};
use dualbeam_core::stats::{
    min_pulse_count, poisson_tag, psth, synth_unit, validity_filter, SpikeTrain, TagResult, Validity, DEFAULT_ALPHA,
    DEFAULT_REQUIRED_EVENTS, VALIDITY_THRESHOLD,
};
use dualbeam_core::stim::{
    chirp_train, intensity_ladder, render, square_train, write_samples_csv, write_samples_f32le, ChirpSpec, Pulse,
    PulseTrain, DEFAULT_LADDER,
};
use serde::Serialize;

use crate::output::{emit, emit_json, open};
use crate::scenario::resolve_seed;
use crate::UsageError;

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SampleFormat {
    /// Little-endian 32-bit floats.
    F32,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct TrainOutput {
    /// Train CSV; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Also sample the train at this rate (Hz).
    #[arg(long, requires = "render_out")]
    render: Option<f64>,
    #[arg(long, requires = "render")]
    render_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SampleFormat::F32)]
    render_format: SampleFormat,
}

#[derive(Subcommand, Debug)]
pub enum ProtocolKind {
    /// Fixed-period square pulses.
    Square {
        #[arg(long)]
        period_s: f64,
        #[arg(long)]
        duty: f64,
        #[arg(long)]
        ma: f64,
        #[arg(long)]
        cycles: usize,
        #[command(flatten)]
        output: TrainOutput,
    },
    /// Linear-frequency square chirp.
    Chirp {
        #[arg(long)]
        f0_hz: f64,
        #[arg(long)]
        f_end_hz: f64,
        #[arg(long)]
        duration_s: f64,
        #[arg(long, default_value_t = 0.5)]
        duty: f64,
        #[arg(long)]
        ma: f64,
        #[command(flatten)]
        output: TrainOutput,
    },
    /// Consecutive square blocks at multiples of a base amplitude.
    Ladder {
        #[arg(long)]
        i_max_ma: f64,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_LADDER.to_vec())]
        multiples: Vec<f64>,
        #[arg(long)]
        period_s: f64,
        #[arg(long)]
        duty: f64,
        /// Cycles per rung.
        #[arg(long)]
        cycles: usize,
        #[command(flatten)]
        output: TrainOutput,
    },
}

fn ladder_train(i_max: f64, multiples: &[f64], period: f64, duty: f64, cycles: usize) -> anyhow::Result<PulseTrain> {
    let rungs = intensity_ladder(i_max, multiples)?;
    let block = cycles as f64 * period;
    let mut pulses = Vec::with_capacity(rungs.len() * cycles);
    for (k, amp) in rungs.iter().enumerate() {
        let t = square_train(period, duty, *amp, cycles)?;
        pulses.extend(t.pulses().iter().map(|p| Pulse {
            onset: p.onset + k as f64 * block,
            ..*p
        }));
    }
    Ok(PulseTrain::new(pulses, rungs.len() as f64 * block)?)
}

pub fn protocol(kind: &ProtocolKind) -> anyhow::Result<()> {
    let (train, output) = match kind {
        ProtocolKind::Square {
            period_s,
            duty,
            ma,
            cycles,
            output,
        } => (square_train(*period_s, *duty, *ma, *cycles)?, output),
        ProtocolKind::Chirp {
            f0_hz,
            f_end_hz,
            duration_s,
            duty,
            ma,
            output,
        } => (
            chirp_train(&ChirpSpec {
                f0: *f0_hz,
                f_end: *f_end_hz,
                duration: *duration_s,
                duty: *duty,
                amplitude: *ma,
            })?,
            output,
        ),
        ProtocolKind::Ladder {
            i_max_ma,
            multiples,
            period_s,
            duty,
            cycles,
            output,
        } => (ladder_train(*i_max_ma, multiples, *period_s, *duty, *cycles)?, output),
    };
    let mut buf = Vec::new();
    train.write_csv(&mut buf)?;
    emit(output.out.as_deref(), &buf)?;
    if let (Some(fs), Some(path)) = (output.render, output.render_out.as_deref()) {
        let samples = render(&train, fs)?;
        let mut buf = Vec::new();
        match output.render_format {
            SampleFormat::F32 => write_samples_f32le(&mut buf, &samples)?,
            SampleFormat::Csv => write_samples_csv(&mut buf, &samples)?,
        }
        emit(Some(path), &buf)?;
    }
    Ok(())
}

fn read_pulses(path: &Path) -> anyhow::Result<PulseTrain> {
    PulseTrain::read_csv(open(path)?).with_context(|| format!("reading pulses from {}", path.display()))
}

fn epoch_of(train: &PulseTrain, start: Option<f64>, end: Option<f64>) -> (f64, f64) {
    (start.unwrap_or(0.0), end.unwrap_or(train.total_span()))
}

#[derive(Args, Debug, Clone)]
pub struct TagArgs {
    /// Spike times, one per line, seconds.
    #[arg(long)]
    spikes: PathBuf,
    /// Pulse train CSV (onset_s, duration_s, amplitude_mA).
    #[arg(long)]
    pulses: PathBuf,
    /// Defaults to 0.
    #[arg(long)]
    epoch_start_s: Option<f64>,
    /// Defaults to the end of the last pulse.
    #[arg(long)]
    epoch_end_s: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// PSTH CSV around pulse onsets.
    #[arg(long)]
    psth_out: Option<PathBuf>,
    #[arg(long, default_value_t = 10.0)]
    bin_ms: f64,
    #[arg(long, default_value_t = 100.0)]
    pre_ms: f64,
    #[arg(long, default_value_t = 200.0)]
    post_ms: f64,
    /// JSON report; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct TagSettings<'a> {
    spikes: &'a Path,
    pulses: &'a Path,
    epoch: (f64, f64),
    alpha: f64,
    bin_ms: f64,
    pre_ms: f64,
    post_ms: f64,
    validity_threshold: f64,
}

#[derive(Serialize)]
struct TagReport<'a> {
    result: TagResult,
    n_pulses: usize,
    /// Baseline (out-of-pulse) rate check.
    validity: Validity,
    /// Pulses needed for three expected baseline spikes inside pulses.
    min_pulse_count: Option<u64>,
    resolved: TagSettings<'a>,
}

pub fn tag(args: &TagArgs) -> anyhow::Result<()> {
    let pulses = read_pulses(&args.pulses)?;
    let epoch = epoch_of(&pulses, args.epoch_start_s, args.epoch_end_s);
    let raw = SpikeTrain::read_text(open(&args.spikes)?, None)
        .with_context(|| format!("reading spikes from {}", args.spikes.display()))?;
    let span = (raw.span().0.min(epoch.0), raw.span().1.max(epoch.1));
    let spikes = SpikeTrain::new(raw.times().to_vec(), span)?;
    let result = poisson_tag(&spikes, &pulses, epoch, args.alpha)?;
    let n_pulses = pulses.pulses().len();
    let mean_duration = pulses.on_time() / n_pulses as f64;
    let min_pulses = if result.r_out > 0.0 {
        Some(min_pulse_count(result.r_out, mean_duration, DEFAULT_REQUIRED_EVENTS)?)
    } else {
        None
    };
    if let Some(path) = &args.psth_out {
        let onsets: Vec<f64> = pulses.pulses().iter().map(|p| p.onset).collect();
        let hist = psth(
            &spikes,
            &onsets,
            (args.pre_ms * 1e-3, args.post_ms * 1e-3),
            args.bin_ms * 1e-3,
        )?;
        let mut buf = Vec::new();
        hist.write_csv(&mut buf)?;
        emit(Some(path), &buf)?;
    }
    let report = TagReport {
        result,
        n_pulses,
        validity: validity_filter(result.r_out, VALIDITY_THRESHOLD)?,
        min_pulse_count: min_pulses,
        resolved: TagSettings {
            spikes: &args.spikes,
            pulses: &args.pulses,
            epoch,
            alpha: args.alpha,
            bin_ms: args.bin_ms,
            pre_ms: args.pre_ms,
            post_ms: args.post_ms,
            validity_threshold: VALIDITY_THRESHOLD,
        },
    };
    emit_json(args.out.as_deref(), &report)
}

#[derive(Args, Debug, Clone)]
pub struct SynthArgs {
    #[arg(long)]
    pulses: PathBuf,
    /// Baseline rate, spikes/s.
    #[arg(long)]
    rate_hz: f64,
    /// In-pulse rate as a multiple of baseline.
    #[arg(long, default_value_t = 1.0)]
    gain: f64,
    /// Falls back to DUALBEAM_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epoch_start_s: Option<f64>,
    #[arg(long)]
    epoch_end_s: Option<f64>,
    /// Spike times file; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

pub fn synth(args: &SynthArgs) -> anyhow::Result<()> {
    let pulses = read_pulses(&args.pulses)?;
    let epoch = epoch_of(&pulses, args.epoch_start_s, args.epoch_end_s);
    let seed = resolve_seed(args.seed, None)?;
    let spikes = synth_unit(seed, args.rate_hz, &pulses, args.gain, epoch)?;
    let mut buf = Vec::new();
    spikes.write_text(&mut buf)?;
    emit(args.out.as_deref(), &buf)
}

#[derive(Args, Debug, Clone)]
pub struct OverlapArgs {
    /// First profile: binary PGM or whitespace text matrix.
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pitch_um: f64,
    /// Threshold in noise standard deviations above the noise mean.
    #[arg(long, default_value_t = DEFAULT_K)]
    k: f64,
    #[arg(long)]
    mask_a_out: Option<PathBuf>,
    #[arg(long)]
    mask_b_out: Option<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn read_image(path: &Path, pitch: f64) -> anyhow::Result<IntensityImage> {
    let mut data = Vec::new();
    open(path)?.read_to_end(&mut data)?;
    let img = if data.starts_with(b"P5") {
        IntensityImage::read_pgm(&data[..], pitch)
    } else {
        IntensityImage::read_text(&data[..], pitch)
    };
    img.with_context(|| format!("reading image {}", path.display()))
}

#[derive(Serialize)]
struct ProfileSummary {
    noise_mean: f64,
    noise_sd: f64,
    illuminated_pixels: usize,
}

#[derive(Serialize)]
struct OverlapReport<'a> {
    iou: f64,
    a: ProfileSummary,
    b: ProfileSummary,
    width: usize,
    height: usize,
    k: f64,
    pitch_um: f64,
    inputs: (&'a Path, &'a Path),
}

pub fn overlap(args: &OverlapArgs) -> anyhow::Result<()> {
    if !(args.pitch_um > 0.0) {
        return Err(UsageError(format!("--pitch-um must be positive, got {}", args.pitch_um)).into());
    }
    let pitch = args.pitch_um * 1e-6;
    let ia = read_image(&args.a, pitch)?;
    let ib = read_image(&args.b, pitch)?;
    let (ma_mean, ma_sd) = border_noise(&ia)?;
    let (mb_mean, mb_sd) = border_noise(&ib)?;
    let ma = illuminated_mask(&ia, Some(ma_mean), Some(ma_sd), args.k)?;
    let mb = illuminated_mask(&ib, Some(mb_mean), Some(mb_sd), args.k)?;
    let overlap = iou(&ma, &mb)?;
    for (mask, path) in [(&ma, &args.mask_a_out), (&mb, &args.mask_b_out)] {
        if let Some(p) = path {
            let mut buf = Vec::new();
            mask.write_pgm(&mut buf)?;
            emit(Some(p), &buf)?;
        }
    }
    let report = OverlapReport {
        iou: overlap,
        a: ProfileSummary {
            noise_mean: ma_mean,
            noise_sd: ma_sd,
            illuminated_pixels: ma.count(),
        },
        b: ProfileSummary {
            noise_mean: mb_mean,
            noise_sd: mb_sd,
            illuminated_pixels: mb.count(),
        },
        width: ia.width(),
        height: ia.height(),
        k: args.k,
        pitch_um: args.pitch_um,
        inputs: (&args.a, &args.b),
    };
    emit_json(args.out.as_deref(), &report)
}
