//! Recordings, dataset manifests, synthetic data and overlapped windowing.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default window length in samples (100 ms at 4 kHz).
pub const DEFAULT_WINDOW_LEN: usize = 400;
/// Default window step in samples (50 ms at 4 kHz, i.e. 200 samples of overlap).
pub const DEFAULT_STEP: usize = 200;
pub const DEFAULT_SAMPLE_RATE: f64 = 4000.0;

/// A multi-channel sampled signal carrying one class label.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    /// Channel-major samples: `samples[channel][n]`.
    pub samples: Vec<Vec<f64>>,
    pub sample_rate: f64,
    pub label: usize,
    pub subject_id: String,
    pub trial_id: String,
}

impl Recording {
    pub fn new(
        samples: Vec<Vec<f64>>,
        sample_rate: f64,
        label: usize,
        subject_id: impl Into<String>,
        trial_id: impl Into<String>,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("recording needs at least one channel".into()));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        let len = samples[0].len();
        if let Some(ch) = samples.iter().position(|c| c.len() != len) {
            return Err(Error::InvalidArgument(format!(
                "channel {ch} has {} samples, channel 0 has {len}",
                samples[ch].len()
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
            label,
            subject_id: subject_id.into(),
            trial_id: trial_id.into(),
        })
    }

    pub fn channels(&self) -> usize {
        self.samples.len()
    }

    /// Length in samples (per channel).
    pub fn len(&self) -> usize {
        self.samples[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_ms(&self) -> f64 {
        self.len() as f64 * 1000.0 / self.sample_rate
    }

    /// Number of samples covering `length_ms` at this recording's rate.
    pub fn samples_for_ms(&self, length_ms: f64) -> usize {
        (length_ms * self.sample_rate / 1000.0).round() as usize
    }

    /// Copy of the first `len` samples of every channel.
    pub fn prefix(&self, len: usize) -> Result<Recording> {
        if len > self.len() {
            return Err(Error::SignalTooShort {
                needed: len,
                got: self.len(),
            });
        }
        Ok(Recording {
            samples: self.samples.iter().map(|c| c[..len].to_vec()).collect(),
            sample_rate: self.sample_rate,
            label: self.label,
            subject_id: self.subject_id.clone(),
            trial_id: self.trial_id.clone(),
        })
    }
}

/// A fixed-length slab of every channel, cut from a recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub samples: Vec<Vec<f64>>,
    /// Offset of the first sample in the source recording.
    pub start_index: usize,
    pub label: usize,
}

impl Window {
    pub fn len(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channels(&self) -> usize {
        self.samples.len()
    }
}

/// Number of windows `segment_windows` yields for a signal of `len` samples.
pub fn window_count(len: usize, window_len: usize, step: usize) -> usize {
    if len < window_len || step == 0 {
        0
    } else {
        (len - window_len) / step + 1
    }
}

/// Cuts `recording` into windows of `window_len` samples starting at
/// offsets `0, step, 2*step, ...`.
pub fn segment_windows(recording: &Recording, window_len: usize, step: usize) -> Result<Vec<Window>> {
    if window_len == 0 {
        return Err(Error::InvalidArgument("window_len must be positive".into()));
    }
    if step == 0 || step > window_len {
        return Err(Error::InvalidArgument(format!(
            "step must be in 1..={window_len}, got {step}"
        )));
    }
    if recording.len() < window_len {
        return Err(Error::SignalTooShort {
            needed: window_len,
            got: recording.len(),
        });
    }
    let count = window_count(recording.len(), window_len, step);
    Ok((0..count)
        .map(|i| {
            let start = i * step;
            Window {
                samples: recording
                    .samples
                    .iter()
                    .map(|c| c[start..start + window_len].to_vec())
                    .collect(),
                start_index: start,
                label: recording.label,
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Recording files
// ---------------------------------------------------------------------------

/// Parses one row of a recording file: whitespace- and/or comma-separated reals.
pub fn parse_sample_row(line: &str) -> std::result::Result<Vec<f64>, String> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("non-numeric token {t:?}"))
        })
        .collect()
}

/// Parses channel-per-column text into channel-major samples.
///
/// Blank lines are skipped. When `expected_channels` is given every row must
/// have that many columns, otherwise the first row fixes the count.
pub fn parse_recording_text(text: &str, source: &str, expected_channels: Option<usize>) -> Result<Vec<Vec<f64>>> {
    let mut channels: Vec<Vec<f64>> = Vec::new();
    let mut width = expected_channels;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_sample_row(line).map_err(|m| Error::parse(source, idx + 1, m))?;
        let w = *width.get_or_insert(row.len());
        if row.len() != w {
            return Err(Error::parse(
                source,
                idx + 1,
                format!("expected {w} columns, found {}", row.len()),
            ));
        }
        if channels.is_empty() {
            channels = vec![Vec::new(); w];
        }
        for (ch, v) in channels.iter_mut().zip(row) {
            ch.push(v);
        }
    }
    if channels.is_empty() {
        return Err(Error::parse(source, 0, "file contains no samples"));
    }
    Ok(channels)
}

pub fn read_recording_file(path: &Path, expected_channels: Option<usize>) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_recording_text(&text, &path.display().to_string(), expected_channels)
}

/// Writes samples one row per instant, channels separated by a space.
/// Values use the shortest round-tripping representation.
pub fn write_recording_file(path: &Path, recording: &Recording) -> Result<()> {
    let mut out = String::with_capacity(recording.len() * recording.channels() * 12);
    for n in 0..recording.len() {
        for (ch, c) in recording.samples.iter().enumerate() {
            if ch > 0 {
                out.push(' ');
            }
            write!(out, "{}", c[n]).unwrap();
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?} (expected train or test)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// As written in the manifest; relative paths resolve against the
    /// manifest's directory.
    pub path: PathBuf,
    pub label: usize,
    pub subject_id: String,
    pub trial_id: String,
    pub split: Split,
}

/// Dataset description: global shape plus one entry per recording file.
///
/// Text grammar:
///
/// ```text
/// # comments and blank lines are ignored
/// num_classes = 10
/// channels = 2
/// sample_rate = 4000
///
/// [entries]
/// # path  label  subject  trial  split
/// s1/t1_c0.txt  0  s1  1  train
/// ```
///
/// Keys come before the `[entries]` marker; each entry line has exactly five
/// whitespace-separated fields, so paths must not contain whitespace.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub num_classes: usize,
    pub channels: usize,
    pub sample_rate: f64,
    pub entries: Vec<ManifestEntry>,
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.channels == 0 {
            return Err(Error::InvalidArgument(
                "manifest needs num_classes >= 1 and channels >= 1".into(),
            ));
        }
        if self.sample_rate.is_nan() || self.sample_rate <= 0.0 {
            return Err(Error::InvalidArgument("manifest sample_rate must be positive".into()));
        }
        if let Some(e) = self.entries.iter().find(|e| e.label >= self.num_classes) {
            return Err(Error::InvalidArgument(format!(
                "entry {} has label {} outside [0, {})",
                e.path.display(),
                e.label,
                self.num_classes
            )));
        }
        Ok(())
    }

    pub fn parse(text: &str, source: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut num_classes = None;
        let mut channels = None;
        let mut sample_rate = None;
        let mut entries = Vec::new();
        let mut in_entries = false;

        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line == "[entries]" {
                in_entries = true;
                continue;
            }
            if !in_entries {
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| Error::parse(source, lineno, "expected `key = value`"))?;
                let value = value.trim();
                let bad = |what: &str| Error::parse(source, lineno, format!("invalid {what}: {value:?}"));
                match key.trim() {
                    "num_classes" => num_classes = Some(value.parse().map_err(|_| bad("num_classes"))?),
                    "channels" => channels = Some(value.parse().map_err(|_| bad("channels"))?),
                    "sample_rate" => sample_rate = Some(value.parse().map_err(|_| bad("sample_rate"))?),
                    other => return Err(Error::parse(source, lineno, format!("unknown key {other:?}"))),
                }
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(Error::parse(
                    source,
                    lineno,
                    format!(
                        "entry needs 5 fields (path label subject trial split), found {}",
                        fields.len()
                    ),
                ));
            }
            let label = fields[1]
                .parse()
                .map_err(|_| Error::parse(source, lineno, format!("invalid label {:?}", fields[1])))?;
            let split = fields[4].parse().map_err(|m: String| Error::parse(source, lineno, m))?;
            entries.push(ManifestEntry {
                path: PathBuf::from(fields[0]),
                label,
                subject_id: fields[2].to_string(),
                trial_id: fields[3].to_string(),
                split,
            });
        }

        let missing = |k: &str| Error::parse(source, 0, format!("missing key {k}"));
        let manifest = DatasetManifest {
            num_classes: num_classes.ok_or_else(|| missing("num_classes"))?,
            channels: channels.ok_or_else(|| missing("channels"))?,
            sample_rate: sample_rate.ok_or_else(|| missing("sample_rate"))?,
            entries,
            base_dir: base_dir.into(),
        };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &path.display().to_string(), base)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "num_classes = {}", self.num_classes).unwrap();
        writeln!(out, "channels = {}", self.channels).unwrap();
        writeln!(out, "sample_rate = {}", self.sample_rate).unwrap();
        out.push_str("\n[entries]\n# path label subject trial split\n");
        for e in &self.entries {
            writeln!(
                out,
                "{} {} {} {} {}",
                e.path.display(),
                e.label,
                e.subject_id,
                e.trial_id,
                e.split.as_str()
            )
            .unwrap();
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.base_dir.join(&entry.path)
        }
    }
}

fn load_entry(manifest: &DatasetManifest, entry: &ManifestEntry) -> Result<Recording> {
    let samples = read_recording_file(&manifest.resolve(entry), Some(manifest.channels))?;
    Recording::new(
        samples,
        manifest.sample_rate,
        entry.label,
        entry.subject_id.clone(),
        entry.trial_id.clone(),
    )
}

/// Loads every manifest entry, in manifest order. Files are read in parallel
/// on the current rayon pool.
pub fn load_recordings(manifest: &DatasetManifest) -> Result<Vec<Recording>> {
    manifest.validate()?;
    manifest.entries.par_iter().map(|e| load_entry(manifest, e)).collect()
}

/// Loads only the entries assigned to `split`.
pub fn load_split(manifest: &DatasetManifest, split: Split) -> Result<Vec<Recording>> {
    manifest.validate()?;
    manifest
        .entries
        .par_iter()
        .filter(|e| e.split == split)
        .map(|e| load_entry(manifest, e))
        .collect()
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_classes: usize,
    pub channels: usize,
    pub trials_per_class: usize,
    /// Seconds.
    pub duration: f64,
    pub sample_rate: f64,
    /// Standard deviation of the white background noise.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_classes: 4,
            channels: 2,
            trials_per_class: 14,
            duration: 1.0,
            sample_rate: DEFAULT_SAMPLE_RATE,
            noise_std: 2.5,
            seed: 7,
        }
    }
}

const SYNTH_COMPONENTS: usize = 6;

/// Per-class (band, envelope) signature.
struct ClassSignature {
    center_hz: f64,
    envelope_hz: f64,
    envelope_depth: f64,
    channel_gain: Vec<f64>,
}

impl ClassSignature {
    fn new(class: usize, num_classes: usize, channels: usize, sample_rate: f64) -> Self {
        // Log-spaced dominant bands from 60 Hz up to 40% of the sample rate.
        let lo = 60.0_f64;
        let hi = (0.4 * sample_rate).max(lo * 1.5);
        let frac = if num_classes > 1 {
            class as f64 / (num_classes - 1) as f64
        } else {
            0.0
        };
        let center_hz = lo * (hi / lo).powf(frac);
        let channel_gain = (0..channels)
            .map(|ch| 0.6 + 0.8 * (((class + ch) % num_classes.max(2)) as f64 / num_classes.max(2) as f64))
            .collect();
        Self {
            center_hz,
            envelope_hz: 1.0 + (class % 3) as f64,
            envelope_depth: 0.2 + 0.1 * (class % 4) as f64,
            channel_gain,
        }
    }
}

/// Generates `trials_per_class` recordings for every class.
///
/// Each class is band-limited noise (a handful of random-phase sinusoids
/// around a class-specific centre frequency) under a class-specific amplitude
/// envelope and per-channel gain, plus white background noise. Output is
/// class-major, trial-minor and fully determined by `seed`. Trial ids run
/// from 1; the subject id is `synth`.
pub fn synth_dataset(cfg: &SynthConfig) -> Result<Vec<Recording>> {
    if cfg.num_classes == 0 || cfg.channels == 0 || cfg.trials_per_class == 0 {
        return Err(Error::InvalidArgument(
            "num_classes, channels and trials_per_class must all be >= 1".into(),
        ));
    }
    if !(cfg.duration > 0.0 && cfg.sample_rate > 0.0) {
        return Err(Error::InvalidArgument(
            "duration and sample_rate must be positive".into(),
        ));
    }
    if !(cfg.noise_std >= 0.0 && cfg.noise_std.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise_std must be >= 0, got {}",
            cfg.noise_std
        )));
    }
    let len = (cfg.duration * cfg.sample_rate).round() as usize;
    if len == 0 {
        return Err(Error::InvalidArgument("duration is shorter than one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise_std).expect("valid std");
    let dt = 1.0 / cfg.sample_rate;
    // sum of K unit sinusoids has RMS sqrt(K/2)
    let norm = (2.0 / SYNTH_COMPONENTS as f64).sqrt();

    let mut out = Vec::with_capacity(cfg.num_classes * cfg.trials_per_class);
    for class in 0..cfg.num_classes {
        let sig = ClassSignature::new(class, cfg.num_classes, cfg.channels, cfg.sample_rate);
        for trial in 0..cfg.trials_per_class {
            let trial_gain: f64 = rng.random_range(0.9..1.1);
            let env_phase: f64 = rng.random_range(0.0..2.0 * PI);
            let samples = (0..cfg.channels)
                .map(|ch| {
                    let comps: Vec<(f64, f64)> = (0..SYNTH_COMPONENTS)
                        .map(|_| {
                            let f = sig.center_hz * rng.random_range(0.85..1.15);
                            (2.0 * PI * f, rng.random_range(0.0..2.0 * PI))
                        })
                        .collect();
                    let gain = trial_gain * sig.channel_gain[ch];
                    (0..len)
                        .map(|n| {
                            let t = n as f64 * dt;
                            let carrier: f64 = comps.iter().map(|&(w, p)| (w * t + p).sin()).sum();
                            let env = 1.0 + sig.envelope_depth * (2.0 * PI * sig.envelope_hz * t + env_phase).sin();
                            gain * env * norm * carrier + noise.sample(&mut rng)
                        })
                        .collect()
                })
                .collect();
            out.push(Recording::new(
                samples,
                cfg.sample_rate,
                class,
                "synth",
                (trial + 1).to_string(),
            )?);
        }
    }
    Ok(out)
}

/// Manifest for a synthetic dataset written as `c{class}_t{trial}.txt`, with
/// the last `test_trials` trials of each class assigned to the test split.
pub fn synth_manifest(cfg: &SynthConfig, recordings: &[Recording], test_trials: usize) -> DatasetManifest {
    let first_test = cfg.trials_per_class.saturating_sub(test_trials);
    let entries = recordings
        .iter()
        .map(|r| {
            let trial: usize = r.trial_id.parse().unwrap_or(0);
            ManifestEntry {
                path: PathBuf::from(synth_file_name(r)),
                label: r.label,
                subject_id: r.subject_id.clone(),
                trial_id: r.trial_id.clone(),
                split: if trial > first_test { Split::Test } else { Split::Train },
            }
        })
        .collect();
    DatasetManifest {
        num_classes: cfg.num_classes,
        channels: cfg.channels,
        sample_rate: cfg.sample_rate,
        entries,
        base_dir: PathBuf::new(),
    }
}

pub fn synth_file_name(r: &Recording) -> String {
    format!("c{:02}_t{:02}.txt", r.label, r.trial_id.parse::<usize>().unwrap_or(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(len: usize, channels: usize) -> Recording {
        let samples = (0..channels)
            .map(|c| (0..len).map(|n| (n + 1000 * c) as f64).collect())
            .collect();
        Recording::new(samples, 4000.0, 1, "s", "1").unwrap()
    }

    #[test]
    fn exact_fit_gives_one_window() {
        let w = segment_windows(&ramp(400, 1), 400, 200).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].start_index, 0);
    }

    #[test]
    fn six_hundred_ms_gives_eleven_windows() {
        let w = segment_windows(&ramp(2400, 2), 400, 200).unwrap();
        assert_eq!(w.len(), 11);
        assert_eq!(w[10].start_index, 2000);
        assert!(w.iter().all(|w| w.label == 1 && w.channels() == 2 && w.len() == 400));
    }

    #[test]
    fn short_recording_is_an_error() {
        let err = segment_windows(&ramp(399, 1), 400, 200).unwrap_err();
        assert!(matches!(err, Error::SignalTooShort { needed: 400, got: 399 }));
        assert!(err.to_string().contains("no windows"));
    }

    #[test]
    fn bad_step_is_rejected() {
        assert!(segment_windows(&ramp(800, 1), 400, 0).is_err());
        assert!(segment_windows(&ramp(800, 1), 400, 401).is_err());
    }

    #[test]
    fn ragged_channels_rejected() {
        assert!(Recording::new(vec![vec![0.0; 3], vec![0.0; 4]], 1.0, 0, "", "").is_err());
        assert!(Recording::new(vec![vec![0.0; 3]], 0.0, 0, "", "").is_err());
        assert!(Recording::new(vec![], 1.0, 0, "", "").is_err());
    }

    #[test]
    fn half_overlap_covers_interior_twice() {
        let rec = ramp(2400, 1);
        let windows = segment_windows(&rec, 400, 200).unwrap();
        let mut hits = vec![0usize; rec.len()];
        for w in &windows {
            hits[w.start_index..w.start_index + w.len()]
                .iter_mut()
                .for_each(|h| *h += 1);
        }
        assert!(hits[..200].iter().all(|&h| h == 1));
        assert!(hits[200..2200].iter().all(|&h| h == 2));
        assert!(hits[2200..].iter().all(|&h| h == 1));
    }

    proptest! {
        #[test]
        fn window_count_formula(len in 1usize..3000, window_len in 1usize..500, step_frac in 0.0f64..1.0) {
            prop_assume!(len >= window_len);
            let step = ((window_len as f64 * step_frac) as usize).max(1);
            let rec = ramp(len, 1);
            let windows = segment_windows(&rec, window_len, step).unwrap();
            prop_assert_eq!(windows.len(), (len - window_len) / step + 1);
            for (i, w) in windows.iter().enumerate() {
                prop_assert_eq!(w.start_index, i * step);
                prop_assert_eq!(&w.samples[0][..], &rec.samples[0][i * step..i * step + window_len]);
            }
            // the first `step` samples of each window, followed by the last
            // window in full, tile the covered prefix
            let mut tiled: Vec<f64> = windows[..windows.len() - 1]
                .iter()
                .flat_map(|w| w.samples[0][..step].iter().copied())
                .collect();
            tiled.extend_from_slice(&windows.last().unwrap().samples[0]);
            let covered = (windows.len() - 1) * step + window_len;
            prop_assert_eq!(&tiled[..], &rec.samples[0][..covered]);
        }
    }

    #[test]
    fn parse_accepts_commas_and_whitespace() {
        let ch = parse_recording_text("1, 2\n3\t4\n\n5 ,6\n", "mem", None).unwrap();
        assert_eq!(ch, vec![vec![1.0, 3.0, 5.0], vec![2.0, 4.0, 6.0]]);
    }

    #[test]
    fn parse_errors_name_line() {
        let err = parse_recording_text("1 2\n3 x\n", "f.txt", None).unwrap_err();
        assert_eq!(err.to_string(), "f.txt:2: non-numeric token \"x\"");
        let err = parse_recording_text("1 2\n3 4 5\n", "f.txt", None).unwrap_err();
        assert!(err.to_string().starts_with("f.txt:2: expected 2 columns"));
        let err = parse_recording_text("1 2\n", "f.txt", Some(3)).unwrap_err();
        assert!(err.to_string().starts_with("f.txt:1: expected 3 columns"));
    }

    #[test]
    fn manifest_round_trip() {
        let m = DatasetManifest {
            num_classes: 3,
            channels: 2,
            sample_rate: 4000.0,
            entries: vec![
                ManifestEntry {
                    path: "a/b.txt".into(),
                    label: 2,
                    subject_id: "s1".into(),
                    trial_id: "5".into(),
                    split: Split::Test,
                },
                ManifestEntry {
                    path: "c.txt".into(),
                    label: 0,
                    subject_id: "s2".into(),
                    trial_id: "1".into(),
                    split: Split::Train,
                },
            ],
            base_dir: PathBuf::from("/data"),
        };
        let back = DatasetManifest::parse(&m.to_text(), "mem", "/data").unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn manifest_rejects_out_of_range_label() {
        let text = "num_classes = 2\nchannels = 1\nsample_rate = 10\n[entries]\nx.txt 2 s 1 train\n";
        assert!(DatasetManifest::parse(text, "m", "").is_err());
        let text = "num_classes = 2\nchannels = 1\nsample_rate = 10\n[entries]\nx.txt 1 s 1\n";
        let err = DatasetManifest::parse(text, "m", "").unwrap_err();
        assert!(err.to_string().starts_with("m:5:"));
    }

    #[test]
    fn load_checks_channel_count() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("r.txt"), "1 2 3\n4 5 6\n").unwrap();
        let text = "num_classes = 1\nchannels = 2\nsample_rate = 10\n[entries]\nr.txt 0 s 1 train\n";
        let m = DatasetManifest::parse(text, "m", dir.path()).unwrap();
        let err = load_recordings(&m).unwrap_err();
        assert!(err.to_string().contains("expected 2 columns"));
    }

    #[test]
    fn synth_is_deterministic() {
        let cfg = SynthConfig {
            num_classes: 3,
            trials_per_class: 2,
            duration: 0.2,
            ..Default::default()
        };
        let a = synth_dataset(&cfg).unwrap();
        let b = synth_dataset(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        assert_eq!(a[0].len(), 800);
        let c = synth_dataset(&SynthConfig {
            seed: cfg.seed + 1,
            ..cfg.clone()
        })
        .unwrap();
        assert_ne!(a[0].samples, c[0].samples);
    }

    #[test]
    fn synth_round_trips_through_files() {
        let cfg = SynthConfig {
            num_classes: 2,
            trials_per_class: 3,
            duration: 0.1,
            ..Default::default()
        };
        let recs = synth_dataset(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = synth_manifest(&cfg, &recs, 1);
        for r in &recs {
            write_recording_file(&dir.path().join(synth_file_name(r)), r).unwrap();
        }
        manifest.write(&dir.path().join("manifest.txt")).unwrap();
        manifest.base_dir = dir.path().to_path_buf();
        let loaded = DatasetManifest::read(&dir.path().join("manifest.txt")).unwrap();
        assert_eq!(loaded, manifest);
        assert_eq!(load_recordings(&loaded).unwrap(), recs);
        let test = load_split(&loaded, Split::Test).unwrap();
        assert_eq!(test.len(), 2);
        assert!(test.iter().all(|r| r.trial_id == "3"));
    }
}
