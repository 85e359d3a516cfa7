//! Spike-response statistics for optogenetic tagging: peristimulus time
//! histograms, in-pulse vs out-of-pulse rates and the effect size
//! `η = (r_in − r_out) / (r_in + r_out)`, one-sided Poisson tagging tests,
//! and a seeded inhomogeneous-Poisson unit generator.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::Serialize;
use statrs::distribution::{DiscreteCDF, Poisson};

use crate::error::{domain, Error, Result};
use crate::stim::PulseTrain;

pub const DEFAULT_ALPHA: f64 = 0.01;
/// Units firing at or below this baseline rate (spikes/s) are excluded.
pub const VALIDITY_THRESHOLD: f64 = 0.01;
pub const DEFAULT_REQUIRED_EVENTS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpikeTrain {
    times: Vec<f64>,
    span: (f64, f64),
}

impl SpikeTrain {
    pub fn new(times: Vec<f64>, span: (f64, f64)) -> Result<Self> {
        let (start, end) = span;
        if !(start <= end && start.is_finite() && end.is_finite()) {
            return domain(format!("invalid session span ({start}, {end})"));
        }
        if let Some(w) = times.windows(2).find(|w| !(w[1] > w[0])) {
            return domain(format!("spike times must strictly increase ({} then {})", w[0], w[1]));
        }
        if let Some(t) = times.iter().find(|&&t| !(t >= start && t <= end)) {
            return domain(format!("spike at {t} s outside session ({start}, {end})"));
        }
        Ok(Self { times, span })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn span(&self) -> (f64, f64) {
        self.span
    }

    /// Spikes in `[a, b)`.
    fn range(&self, a: f64, b: f64) -> &[f64] {
        let lo = self.times.partition_point(|&t| t < a);
        let hi = self.times.partition_point(|&t| t < b);
        &self.times[lo..hi.max(lo)]
    }

    /// One time in seconds per line. Without an explicit span the session
    /// runs from `min(0, first spike)` to the last spike.
    pub fn read_text<R: BufRead>(reader: R, span: Option<(f64, f64)>) -> Result<Self> {
        let mut times = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let tok = line.trim();
            if tok.is_empty() || tok.starts_with('#') {
                continue;
            }
            times.push(
                tok.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {tok:?}: {e}", i + 1)))?,
            );
        }
        let span = span.unwrap_or_else(|| {
            let first = times.first().copied().unwrap_or(0.0).min(0.0);
            (first, times.last().copied().unwrap_or(0.0).max(first))
        });
        Self::new(times, span)
    }

    pub fn write_text<W: Write>(&self, mut writer: W) -> Result<()> {
        let mut out = String::with_capacity(self.times.len() * 20);
        for t in &self.times {
            out.push_str(&format!("{t}\n"));
        }
        writer.write_all(out.as_bytes())?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Psth {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub n_events: usize,
}

impl Psth {
    /// Mean rate per bin in spikes/s.
    pub fn rates(&self) -> Vec<f64> {
        self.counts
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(&c, e)| c as f64 / (self.n_events as f64 * (e[1] - e[0])))
            .collect()
    }

    /// CSV with header `bin_start_s,bin_end_s,count,rate_hz`.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        let mut out = String::from("bin_start_s,bin_end_s,count,rate_hz\n");
        for ((c, e), r) in self.counts.iter().zip(self.bin_edges.windows(2)).zip(self.rates()) {
            out.push_str(&format!("{},{},{c},{r}\n", e[0], e[1]));
        }
        writer.write_all(out.as_bytes())?;
        Ok(())
    }
}

/// Histogram of spike times relative to each event over `[-pre, post)`,
/// with half-open bins of width `bin`.
pub fn psth(spikes: &SpikeTrain, events: &[f64], window: (f64, f64), bin: f64) -> Result<Psth> {
    let (pre, post) = window;
    if events.is_empty() {
        return domain("PSTH needs at least one event");
    }
    if !(bin > 0.0 && bin.is_finite()) {
        return domain(format!("bin width must be positive, got {bin}"));
    }
    if !(pre + post > 0.0 && pre.is_finite() && post.is_finite()) {
        return domain(format!("window (-{pre}, {post}) is empty"));
    }
    let (start, end) = spikes.span;
    if let Some(e) = events.iter().find(|&&e| !(e >= start && e <= end)) {
        return domain(format!("event at {e} s outside session ({start}, {end})"));
    }
    let n_bins = ((pre + post) / bin - 1e-9).ceil().max(1.0) as usize;
    let bin_edges: Vec<f64> = (0..=n_bins).map(|k| -pre + k as f64 * bin).collect();
    let mut counts = vec![0u64; n_bins];
    for &e in events {
        for &t in spikes.range(e - pre, e + post) {
            let idx = ((t - e + pre) / bin).floor();
            if idx >= 0.0 && (idx as usize) < n_bins {
                counts[idx as usize] += 1;
            }
        }
    }
    Ok(Psth {
        bin_edges,
        counts,
        n_events: events.len(),
    })
}

/// Normalized rate difference; 0 when both rates vanish.
pub fn eta(r_in: f64, r_out: f64) -> f64 {
    let total = r_in + r_out;
    if total == 0.0 {
        0.0
    } else {
        (r_in - r_out) / total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateSummary {
    pub r_in: f64,
    pub r_out: f64,
    pub eta: f64,
    pub count_in: u64,
    pub count_out: u64,
    pub time_in: f64,
    pub time_out: f64,
}

/// In-pulse and out-of-pulse firing rates over `epoch`.
pub fn rates_and_eta(spikes: &SpikeTrain, pulses: &PulseTrain, epoch: (f64, f64)) -> Result<RateSummary> {
    let (a, b) = epoch;
    let (start, end) = spikes.span;
    if !(b > a && a >= start && b <= end) {
        return domain(format!("epoch ({a}, {b}) is empty or outside session ({start}, {end})"));
    }
    if let Some(p) = pulses.pulses().iter().find(|p| p.onset < a || p.end() > b) {
        return domain(format!("pulse at {} s falls outside epoch ({a}, {b})", p.onset));
    }
    let time_in = pulses.on_time();
    let time_out = (b - a) - time_in;
    if !(time_in > 0.0 && time_out > 0.0) {
        return domain(format!(
            "degenerate epoch: in-pulse {time_in} s, out-of-pulse {time_out} s"
        ));
    }
    let mut count_in = 0u64;
    let mut count_out = 0u64;
    for &t in spikes.range(a, b) {
        if pulses.contains(t) {
            count_in += 1;
        } else {
            count_out += 1;
        }
    }
    let r_in = count_in as f64 / time_in;
    let r_out = count_out as f64 / time_out;
    Ok(RateSummary {
        r_in,
        r_out,
        eta: eta(r_in, r_out),
        count_in,
        count_out,
        time_in,
        time_out,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TagClass {
    Activated,
    Silenced,
    Untagged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TagResult {
    pub klass: TagClass,
    /// The smaller of the two one-sided tail probabilities.
    pub p_value: f64,
    pub r_in: f64,
    pub r_out: f64,
    pub eta: f64,
    pub count_in: u64,
    /// Expected in-pulse count under the baseline rate.
    pub expected_in: f64,
}

/// `(P(X ≥ k), P(X ≤ k))` for `X ~ Poisson(mu)`.
pub fn poisson_tails(k: u64, mu: f64) -> Result<(f64, f64)> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return domain(format!("Poisson mean must be non-negative, got {mu}"));
    }
    if mu == 0.0 {
        return Ok((if k == 0 { 1.0 } else { 0.0 }, 1.0));
    }
    let dist = Poisson::new(mu).map_err(|e| Error::Domain(e.to_string()))?;
    let upper = if k == 0 { 1.0 } else { dist.sf(k - 1) };
    Ok((upper, dist.cdf(k)))
}

/// Two one-sided Poisson tests of the in-pulse spike count against the
/// count expected from the out-of-pulse rate.
pub fn poisson_tag(spikes: &SpikeTrain, pulses: &PulseTrain, epoch: (f64, f64), alpha: f64) -> Result<TagResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    let rates = rates_and_eta(spikes, pulses, epoch)?;
    let mu = rates.r_out * rates.time_in;
    let k = rates.count_in;
    let (upper, lower) = poisson_tails(k, mu)?;
    let klass = if upper < alpha {
        TagClass::Activated
    } else if lower < alpha {
        TagClass::Silenced
    } else {
        TagClass::Untagged
    };
    Ok(TagResult {
        klass,
        p_value: upper.min(lower).min(1.0),
        r_in: rates.r_in,
        r_out: rates.r_out,
        eta: rates.eta,
        count_in: k,
        expected_in: mu,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Validity {
    Accepted,
    Rejected,
}

/// Accepts units whose baseline rate is strictly above `threshold`.
pub fn validity_filter(r_baseline: f64, threshold: f64) -> Result<Validity> {
    if !(r_baseline >= 0.0 && r_baseline.is_finite()) {
        return domain(format!("baseline rate must be non-negative, got {r_baseline}"));
    }
    Ok(if r_baseline > threshold {
        Validity::Accepted
    } else {
        Validity::Rejected
    })
}

/// Pulses needed for the baseline to produce `required_events` expected
/// spikes inside pulses of `pulse_duration`.
pub fn min_pulse_count(baseline_rate: f64, pulse_duration: f64, required_events: f64) -> Result<u64> {
    if !(baseline_rate > 0.0 && pulse_duration > 0.0 && required_events > 0.0) {
        return domain(format!(
            "rate, duration and required events must be positive, got ({baseline_rate}, {pulse_duration}, {required_events})"
        ));
    }
    let exact = required_events / (baseline_rate * pulse_duration);
    let nearest = exact.round();
    // Absorb representation error such as 5999.999999999999 or 6000.000000000001.
    let count = if (exact - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        exact.ceil()
    };
    Ok(count as u64)
}

/// Inhomogeneous Poisson spikes over `epoch`: `baseline_rate` outside
/// pulses, `baseline_rate · in_pulse_gain` inside.
pub fn synth_unit(
    seed: u64,
    baseline_rate: f64,
    pulses: &PulseTrain,
    in_pulse_gain: f64,
    epoch: (f64, f64),
) -> Result<SpikeTrain> {
    let (a, b) = epoch;
    if !(baseline_rate >= 0.0 && in_pulse_gain >= 0.0 && baseline_rate.is_finite() && in_pulse_gain.is_finite()) {
        return domain("rates and gain must be non-negative");
    }
    if !(b > a && a.is_finite() && b.is_finite()) {
        return domain(format!("epoch ({a}, {b}) is empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut times = Vec::new();
    let mut fill = |from: f64, to: f64, rate: f64, rng: &mut ChaCha8Rng| {
        if rate <= 0.0 || to <= from {
            return;
        }
        let exp = Exp::new(rate).expect("positive rate");
        let mut t = from;
        loop {
            t += exp.sample(rng);
            if t >= to {
                break;
            }
            times.push(t);
        }
    };
    let mut cursor = a;
    for p in pulses.pulses() {
        let on = p.onset.clamp(a, b);
        let off = p.end().clamp(a, b);
        fill(cursor, on, baseline_rate, &mut rng);
        fill(on, off, baseline_rate * in_pulse_gain, &mut rng);
        cursor = off.max(cursor);
    }
    fill(cursor, b, baseline_rate, &mut rng);
    times.dedup();
    SpikeTrain::new(times, epoch)
}
