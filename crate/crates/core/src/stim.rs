//! Stimulation current waveforms: square trains, intensity ladders and
//! ascending square chirps, plus sample-accurate rendering and duty-cycle
//! reporting.
//!
//! Train files are CSV with header `onset_s,duration_s,amplitude_mA`.
//! Rendering maps a pulse onto the half-open sample index range
//! `[floor(onset·fs), floor((onset + duration)·fs))`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Hard drive-current cap per diode, milliamps.
pub const MAX_AMPLITUDE_MA: f64 = 100.0;
/// Sample rate of the stimulus DSP, hertz.
pub const DSP_SAMPLE_RATE: f64 = 24_414.0;
pub const DEFAULT_LADDER: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

// Slack for abutting pulses whose boundaries differ by rounding only.
const OVERLAP_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    #[serde(rename = "onset_s")]
    pub onset: f64,
    #[serde(rename = "duration_s")]
    pub duration: f64,
    #[serde(rename = "amplitude_mA")]
    pub amplitude: f64,
}

impl Pulse {
    pub fn end(&self) -> f64 {
        self.onset + self.duration
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.onset && t < self.end()
    }
}

fn check_amplitude(amplitude: f64) -> Result<()> {
    if amplitude > MAX_AMPLITUDE_MA {
        return Err(Error::Safety(format!(
            "amplitude {amplitude} mA exceeds the {MAX_AMPLITUDE_MA} mA cap"
        )));
    }
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return domain(format!("amplitude must be non-negative, got {amplitude}"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PulseTrain {
    pulses: Vec<Pulse>,
    total_span: f64,
}

impl PulseTrain {
    pub fn new(pulses: Vec<Pulse>, total_span: f64) -> Result<Self> {
        for p in &pulses {
            check_amplitude(p.amplitude)?;
            if !(p.duration > 0.0 && p.duration.is_finite() && p.onset >= 0.0 && p.onset.is_finite()) {
                return domain(format!("invalid pulse (onset {}, duration {})", p.onset, p.duration));
            }
        }
        for pair in pulses.windows(2) {
            if !(pair[1].onset > pair[0].onset) {
                return domain(format!(
                    "onsets must strictly increase ({} then {})",
                    pair[0].onset, pair[1].onset
                ));
            }
            if pair[1].onset < pair[0].end() - OVERLAP_SLACK {
                return domain(format!("pulses at {} and {} overlap", pair[0].onset, pair[1].onset));
            }
        }
        let last_end = pulses.last().map_or(0.0, Pulse::end);
        if !(total_span >= last_end - OVERLAP_SLACK && total_span.is_finite()) {
            return domain(format!("span {total_span} s ends before the last pulse ({last_end} s)"));
        }
        Ok(Self { pulses, total_span })
    }

    pub fn empty(total_span: f64) -> Result<Self> {
        Self::new(Vec::new(), total_span)
    }

    pub fn pulses(&self) -> &[Pulse] {
        &self.pulses
    }

    pub fn total_span(&self) -> f64 {
        self.total_span
    }

    /// Total ON time.
    pub fn on_time(&self) -> f64 {
        self.pulses.iter().map(|p| p.duration).sum()
    }

    pub fn contains(&self, t: f64) -> bool {
        // Pulses are sorted and disjoint.
        let idx = self.pulses.partition_point(|p| p.onset <= t);
        idx > 0 && self.pulses[idx - 1].contains(t)
    }

    /// Reads `onset_s,duration_s,amplitude_mA` rows. The span is the end of
    /// the last pulse.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["onset_s", "duration_s", "amplitude_mA"] {
            return Err(Error::Parse(format!("unexpected train header {headers:?}")));
        }
        let pulses: Vec<Pulse> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
        let span = pulses.last().map_or(0.0, Pulse::end);
        Self::new(pulses, span)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        if self.pulses.is_empty() {
            wtr.write_record(["onset_s", "duration_s", "amplitude_mA"])?;
        }
        for p in &self.pulses {
            wtr.serialize(p)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `n_cycles` pulses of `duty·period` at onsets `k·period`.
pub fn square_train(period: f64, duty: f64, amplitude: f64, n_cycles: usize) -> Result<PulseTrain> {
    check_amplitude(amplitude)?;
    if !(period > 0.0 && period.is_finite()) {
        return domain(format!("period must be positive, got {period}"));
    }
    if !(duty > 0.0 && duty <= 1.0) {
        return domain(format!("duty must lie in (0, 1], got {duty}"));
    }
    let duration = duty * period;
    let pulses = (0..n_cycles)
        .map(|k| Pulse {
            onset: k as f64 * period,
            duration,
            amplitude,
        })
        .collect();
    PulseTrain::new(pulses, n_cycles as f64 * period)
}

/// Rungs `i_max × multiple`, ascending.
pub fn intensity_ladder(i_max: f64, multiples: &[f64]) -> Result<Vec<f64>> {
    if !(i_max >= 0.0 && i_max.is_finite()) {
        return domain(format!("base amplitude must be non-negative, got {i_max}"));
    }
    if multiples.is_empty() || multiples.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
        return domain("ladder multiples must be positive and non-empty");
    }
    let mut rungs: Vec<f64> = multiples.iter().map(|m| i_max * m).collect();
    rungs.sort_by(f64::total_cmp);
    let offending: Vec<String> = rungs
        .iter()
        .filter(|&&r| r > MAX_AMPLITUDE_MA)
        .map(|r| format!("{r} mA"))
        .collect();
    if !offending.is_empty() {
        return Err(Error::Safety(format!(
            "ladder rungs above {MAX_AMPLITUDE_MA} mA: {}",
            offending.join(", ")
        )));
    }
    Ok(rungs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChirpSpec {
    pub f0: f64,
    pub f_end: f64,
    /// seconds
    pub duration: f64,
    pub duty: f64,
    /// milliamps
    pub amplitude: f64,
}

impl ChirpSpec {
    /// Cycles elapsed at time `t`: `f0·t + (f_end - f0)·t² / (2·duration)`.
    pub fn cycles_at(&self, t: f64) -> f64 {
        self.f0 * t + (self.f_end - self.f0) * t * t / (2.0 * self.duration)
    }

    /// Time at which `cycles` cycles have elapsed (inverse of `cycles_at`).
    pub fn time_of(&self, cycles: f64) -> f64 {
        if cycles == 0.0 {
            return 0.0;
        }
        let a = (self.f_end - self.f0) / (2.0 * self.duration);
        // Rationalized root of a·t² + f0·t - cycles = 0, stable for a → 0.
        2.0 * cycles / (self.f0 + (self.f0 * self.f0 + 4.0 * a * cycles).sqrt())
    }
}

/// Linear-frequency square chirp: ON wherever the cycle fraction is below
/// `duty`.
pub fn chirp_train(spec: &ChirpSpec) -> Result<PulseTrain> {
    check_amplitude(spec.amplitude)?;
    let ChirpSpec {
        f0,
        f_end,
        duration,
        duty,
        ..
    } = *spec;
    if !(f0 >= 0.0 && f_end >= f0 && f_end.is_finite()) {
        return domain(format!("chirp needs 0 <= f0 <= f_end, got ({f0}, {f_end})"));
    }
    if f_end == 0.0 {
        return domain("chirp with f0 = f_end = 0 has no cycles");
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return domain(format!("chirp duration must be positive, got {duration}"));
    }
    if !(duty > 0.0 && duty < 1.0) {
        return domain(format!("chirp duty must lie in (0, 1), got {duty}"));
    }
    let total_cycles = spec.cycles_at(duration);
    let mut pulses = Vec::with_capacity(total_cycles.ceil() as usize);
    let mut m = 0u64;
    loop {
        let onset = spec.time_of(m as f64);
        if onset >= duration {
            break;
        }
        let end = spec.time_of(m as f64 + duty).min(duration);
        pulses.push(Pulse {
            onset,
            duration: end - onset,
            amplitude: spec.amplitude,
        });
        m += 1;
    }
    PulseTrain::new(pulses, duration)
}

fn sample_index(t: f64, sample_rate: f64) -> usize {
    (t * sample_rate).floor().max(0.0) as usize
}

/// Samples the train at `sample_rate`; the output covers `[0, total_span)`.
pub fn render(train: &PulseTrain, sample_rate: f64) -> Result<Vec<f64>> {
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return domain(format!("sample rate must be positive, got {sample_rate}"));
    }
    let n = (train.total_span * sample_rate).ceil() as usize;
    let mut out = vec![0.0; n];
    for p in &train.pulses {
        let start = sample_index(p.onset, sample_rate).min(n);
        let end = sample_index(p.end(), sample_rate).min(n);
        out[start..end].fill(p.amplitude);
    }
    Ok(out)
}

/// ON time within `window` divided by the window length.
pub fn duty_cycle_of(train: &PulseTrain, window: (f64, f64)) -> Result<f64> {
    let (a, b) = window;
    if !(b > a && a.is_finite() && b.is_finite()) {
        return domain(format!("window ({a}, {b}) is empty"));
    }
    let on: f64 = train
        .pulses
        .iter()
        .map(|p| (p.end().min(b) - p.onset.max(a)).max(0.0))
        .sum();
    Ok(on / (b - a))
}

pub fn write_samples_f32le<W: Write>(mut writer: W, samples: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(samples.len() * 4);
    for &s in samples {
        buf.extend_from_slice(&(s as f32).to_le_bytes());
    }
    writer.write_all(&buf)?;
    Ok(())
}

/// CSV with header `sample,amplitude_mA`.
pub fn write_samples_csv<W: Write>(mut writer: W, samples: &[f64]) -> Result<()> {
    let mut out = String::with_capacity(samples.len() * 8 + 32);
    out.push_str("sample,amplitude_mA\n");
    for (i, s) in samples.iter().enumerate() {
        out.push_str(&format!("{i},{s}\n"));
    }
    writer.write_all(out.as_bytes())?;
    Ok(())
}

/// Named per-diode trains driven together.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ChannelSet {
    pub channels: Vec<(String, PulseTrain)>,
}

impl ChannelSet {
    pub fn insert(&mut self, name: impl Into<String>, train: PulseTrain) {
        self.channels.push((name.into(), train));
    }

    pub fn get(&self, name: &str) -> Option<&PulseTrain> {
        self.channels.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn bench_square_train() {
        let t = square_train(3.0, 0.2, 100.0, 30).unwrap();
        assert_eq!(t.pulses().len(), 30);
        assert_eq!(t.total_span(), 90.0);
        for p in t.pulses() {
            assert_relative_eq!(p.duration, 0.6, max_relative = 1e-15);
        }
        let long = square_train(6.0, 0.1, 100.0, 45).unwrap();
        assert_eq!(long.pulses().len(), 45);
        assert_relative_eq!(long.pulses()[44].duration, 0.6, max_relative = 1e-15);
    }

    #[test]
    fn square_train_limits() {
        assert!(matches!(square_train(3.0, 0.2, 100.5, 3), Err(Error::Safety(_))));
        let near_full = square_train(1.0, 0.999, 10.0, 5).unwrap();
        assert_eq!(near_full.pulses().len(), 5);
        assert!(square_train(0.1, 1.0, 10.0, 50).is_ok());
        assert!(square_train(1.0, 1.2, 10.0, 5).is_err());
        assert!(square_train(1.0, 0.0, 10.0, 5).is_err());
    }

    #[test]
    fn ladders() {
        let err = intensity_ladder(29.0, &DEFAULT_LADDER).unwrap_err();
        match err {
            Error::Safety(msg) => {
                assert!(msg.contains("116 mA"));
                assert!(!msg.contains("58 mA"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(
            intensity_ladder(20.0, &DEFAULT_LADDER).unwrap(),
            vec![10.0, 20.0, 40.0, 80.0]
        );
        assert_eq!(intensity_ladder(37.0, &[1.0]).unwrap(), vec![37.0]);
        assert_eq!(intensity_ladder(10.0, &[4.0, 0.5]).unwrap(), vec![5.0, 40.0]);
    }

    fn fig_chirp() -> ChirpSpec {
        ChirpSpec {
            f0: 0.0,
            f_end: 100.0,
            duration: 20.0,
            duty: 0.5,
            amplitude: 50.0,
        }
    }

    #[test]
    fn chirp_cycle_count_and_first_pulse() {
        let spec = fig_chirp();
        assert_eq!(spec.cycles_at(20.0), 1000.0);
        let t = chirp_train(&spec).unwrap();
        assert_eq!(t.pulses().len(), 1000);
        assert_eq!(t.pulses()[0].onset, 0.0);
        assert_relative_eq!(t.pulses()[0].end(), 0.2f64.sqrt(), max_relative = 1e-14);
        for pair in t.pulses().windows(2) {
            assert!(pair[1].duration < pair[0].duration);
        }
        // Cycles grow as 2.5·t², so each ON half spans sqrt((m + 0.5) / 2.5) - sqrt(m / 2.5).
        let oracle: f64 = (0..1000)
            .map(|m| ((m as f64 + 0.5) / 2.5).sqrt() - (m as f64 / 2.5).sqrt())
            .sum();
        assert_relative_eq!(t.on_time(), oracle, max_relative = 1e-12);
        assert!((t.on_time() / 20.0 - 0.5).abs() < 0.01);
    }

    #[test]
    fn constant_frequency_chirp_is_square_train() {
        let spec = ChirpSpec {
            f0: 8.0,
            f_end: 8.0,
            duration: 5.0,
            duty: 0.25,
            amplitude: 12.0,
        };
        let chirp = chirp_train(&spec).unwrap();
        let square = square_train(1.0 / 8.0, 0.25, 12.0, 40).unwrap();
        assert_eq!(chirp.pulses().len(), square.pulses().len());
        for (a, b) in chirp.pulses().iter().zip(square.pulses()) {
            assert_relative_eq!(a.onset, b.onset, epsilon = 1e-12);
            assert_relative_eq!(a.duration, b.duration, epsilon = 1e-12);
        }
        assert_eq!(chirp.total_span(), square.total_span());
    }

    #[test]
    fn chirp_rejects_degenerate_specs() {
        let mut s = fig_chirp();
        s.f_end = 0.0;
        assert!(chirp_train(&s).is_err());
        let mut s = fig_chirp();
        s.f0 = 200.0;
        assert!(chirp_train(&s).is_err());
        let mut s = fig_chirp();
        s.amplitude = 101.0;
        assert!(matches!(chirp_train(&s), Err(Error::Safety(_))));
    }

    #[test]
    fn render_counts() {
        let t = square_train(3.0, 0.2, 100.0, 30).unwrap();
        let samples = render(&t, DSP_SAMPLE_RATE).unwrap();
        assert_eq!(samples.len(), 90 * 24414);
        for k in 0..30 {
            let start = k * 3 * 24414;
            let on = samples[start..start + 3 * 24414].iter().filter(|&&s| s > 0.0).count();
            assert_eq!(on, 14648);
        }
        let empty = render(&PulseTrain::empty(1.0).unwrap(), 1000.0).unwrap();
        assert_eq!(empty.len(), 1000);
        assert!(empty.iter().all(|&s| s == 0.0));
        assert!(render(&t, 0.0).is_err());
    }

    #[test]
    fn sample_at_offset_is_off() {
        let t = PulseTrain::new(
            vec![Pulse {
                onset: 0.25,
                duration: 0.5,
                amplitude: 5.0,
            }],
            1.0,
        )
        .unwrap();
        let s = render(&t, 4.0).unwrap();
        assert_eq!(s, vec![0.0, 5.0, 5.0, 0.0]);
    }

    #[test]
    fn duty_cycles() {
        let sparse = square_train(1250.0 / 150.0, 0.05 / (1250.0 / 150.0), 29.0, 150).unwrap();
        assert_relative_eq!(
            duty_cycle_of(&sparse, (0.0, 1250.0)).unwrap(),
            0.006,
            max_relative = 1e-12
        );
        let t = square_train(3.0, 0.2, 100.0, 2).unwrap();
        assert_eq!(duty_cycle_of(&t, (0.1, 0.3)).unwrap(), 1.0);
        assert_eq!(duty_cycle_of(&t, (1.0, 2.5)).unwrap(), 0.0);
        assert!(duty_cycle_of(&t, (1.0, 1.0)).is_err());
    }

    #[test]
    fn train_validation() {
        let p = |onset, duration| Pulse {
            onset,
            duration,
            amplitude: 1.0,
        };
        assert!(PulseTrain::new(vec![p(0.0, 1.0), p(0.5, 1.0)], 2.0).is_err());
        assert!(PulseTrain::new(vec![p(1.0, 1.0), p(0.0, 0.5)], 2.0).is_err());
        assert!(PulseTrain::new(vec![p(0.0, 0.0)], 2.0).is_err());
        assert!(PulseTrain::new(vec![p(0.0, 1.0)], 0.5).is_err());
        let t = PulseTrain::new(vec![p(0.0, 1.0), p(1.0, 1.0)], 2.0).unwrap();
        assert!(t.contains(0.999) && t.contains(1.0) && !t.contains(2.0));
    }

    #[test]
    fn csv_round_trip() {
        let t = square_train(3.0, 0.2, 100.0, 3).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("onset_s,duration_s,amplitude_mA\n0.0,0.6000000000000001,100.0\n"));
        let back = PulseTrain::read_csv(&buf[..]).unwrap();
        assert_eq!(back.pulses(), t.pulses());
        assert!(PulseTrain::read_csv("a,b,c\n1,2,3\n".as_bytes()).is_err());
        assert!(matches!(
            PulseTrain::read_csv("onset_s,duration_s,amplitude_mA\n0,1,150\n".as_bytes()),
            Err(Error::Safety(_))
        ));
    }

    #[test]
    fn sample_writers() {
        let mut bin = Vec::new();
        write_samples_f32le(&mut bin, &[0.0, 1.5]).unwrap();
        assert_eq!(bin, [0, 0, 0, 0, 0, 0, 0xc0, 0x3f]);
        let mut csv = Vec::new();
        write_samples_csv(&mut csv, &[0.0, 1.5]).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "sample,amplitude_mA\n0,0\n1,1.5\n");
    }

    #[test]
    fn channel_set_lookup() {
        let mut set = ChannelSet::default();
        set.insert("blue", square_train(1.0, 0.05, 29.0, 3).unwrap());
        set.insert("red", square_train(1.0, 0.2, 60.0, 3).unwrap());
        assert_eq!(set.get("red").unwrap().pulses()[0].amplitude, 60.0);
        assert!(set.get("green").is_none());
    }

    proptest! {
        #[test]
        fn rendered_duty_matches_analytic(period in 0.01f64..0.5, duty in 0.05f64..0.95, n in 1usize..40, fs in 500.0f64..30000.0) {
            let t = square_train(period, duty, 10.0, n).unwrap();
            let samples = render(&t, fs).unwrap();
            let on = samples.iter().filter(|&&s| s > 0.0).count() as f64;
            let window = t.total_span();
            let analytic = duty_cycle_of(&t, (0.0, window)).unwrap();
            // Each pulse edge can shift by at most one sample.
            let slack = (2 * n) as f64 / (fs * window) + 1.0 / (fs * window);
            prop_assert!((on / samples.len() as f64 - analytic).abs() <= slack);
        }

        #[test]
        fn chirp_never_exceeds_cap(f_end in 1.0f64..200.0, dur in 0.5f64..5.0, duty in 0.05f64..0.95, amp in 0.0f64..=100.0) {
            let t = chirp_train(&ChirpSpec { f0: 0.0, f_end, duration: dur, duty, amplitude: amp }).unwrap();
            prop_assert!(t.pulses().iter().all(|p| p.amplitude <= MAX_AMPLITUDE_MA));
            let expected = (f_end * dur / 2.0).ceil() as usize;
            prop_assert!((t.pulses().len() as i64 - expected as i64).abs() <= 1);
        }
    }
}
