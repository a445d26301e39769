//! Glue from recordings to trained stacks: windowing + feature extraction
//! settings, normalized per-recording features, and training-set assembly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dwt::{DEFAULT_LEVELS, MAX_LEVELS};
use crate::error::{Error, Result};
use crate::features::{fit_normalizer, wavelet_feature_vector, FeatureParams, FeatureVector, Normalizer};
use crate::rnn::{stack_inputs, train, Arch, InputMode, TrainConfig, TrainOutcome, TrainSample};
use crate::signal::{segment_windows, Recording, DEFAULT_STEP, DEFAULT_WINDOW_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractConfig {
    pub window_len: usize,
    pub step: usize,
    pub levels: usize,
    pub params: FeatureParams,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            window_len: DEFAULT_WINDOW_LEN,
            step: DEFAULT_STEP,
            levels: DEFAULT_LEVELS,
            params: FeatureParams::default(),
        }
    }
}

impl ExtractConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_LEVELS).contains(&self.levels) {
            return Err(Error::InvalidArgument(format!(
                "levels must be in 1..={MAX_LEVELS}, got {}",
                self.levels
            )));
        }
        let multiple = 1usize << self.levels;
        if self.window_len == 0 || !self.window_len.is_multiple_of(multiple) {
            return Err(Error::NotDivisible {
                len: self.window_len,
                multiple,
                levels: self.levels,
            });
        }
        if self.step == 0 || self.step > self.window_len {
            return Err(Error::InvalidArgument(format!(
                "step must be in 1..={}, got {}",
                self.window_len, self.step
            )));
        }
        self.params.validate()
    }
}

/// Raw (unnormalized) feature vectors of every window of `recording`.
pub fn recording_features(recording: &Recording, cfg: &ExtractConfig) -> Result<Vec<FeatureVector>> {
    segment_windows(recording, cfg.window_len, cfg.step)?
        .iter()
        .map(|w| wavelet_feature_vector(w, cfg.levels, &cfg.params))
        .collect()
}

/// Features of each recording, in input order; recordings are processed in
/// parallel on the current rayon pool.
pub fn dataset_features(recordings: &[Recording], cfg: &ExtractConfig) -> Result<Vec<Vec<FeatureVector>>> {
    cfg.validate()?;
    recordings.par_iter().map(|r| recording_features(r, cfg)).collect()
}

pub fn normalize_all(normalizer: &Normalizer, features: &[FeatureVector]) -> Result<Vec<FeatureVector>> {
    features
        .iter()
        .map(|f| crate::features::apply_normalizer(normalizer, f))
        .collect()
}

/// Number of stack evaluations available from `windows` windows.
pub fn group_count(windows: usize, mode: InputMode) -> usize {
    (windows + 1).saturating_sub(mode.windows_per_group())
}

/// One training sample per stack evaluation of one recording's (normalized)
/// windows: every window in Same mode, every run of five consecutive
/// windows (stride one window) in Sequential mode.
pub fn recording_samples(features: &[FeatureVector], mode: InputMode, label: usize) -> Result<Vec<TrainSample>> {
    (0..group_count(features.len(), mode))
        .map(|i| {
            Ok(TrainSample {
                inputs: stack_inputs(features, mode, i)?,
                label,
            })
        })
        .collect()
}

/// Extracts features from the training recordings, fits the normalizer and
/// trains one stack.
pub fn fit_model(
    train_set: &[Recording],
    num_classes: usize,
    arch: Arch,
    mode: InputMode,
    extract: &ExtractConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    if train_set.is_empty() {
        return Err(Error::Empty("training recordings"));
    }
    let per_recording = dataset_features(train_set, extract)?;
    let all: Vec<FeatureVector> = per_recording.iter().flatten().cloned().collect();
    let normalizer = fit_normalizer(&all)?;
    let mut samples = Vec::new();
    for (rec, feats) in train_set.iter().zip(&per_recording) {
        samples.extend(recording_samples(&normalize_all(&normalizer, feats)?, mode, rec.label)?);
    }
    if samples.is_empty() {
        return Err(Error::NotEnoughWindows {
            needed: mode.windows_per_group(),
            available: per_recording.iter().map(Vec::len).max().unwrap_or(0),
        });
    }
    train(&samples, num_classes, arch, mode, normalizer, *extract, config)
}
