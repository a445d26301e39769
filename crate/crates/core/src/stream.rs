//! Incremental classification of a sample stream.
//!
//! Samples arrive one multi-channel row at a time. Each window is turned
//! into features as soon as its last sample arrives, and each stack decision
//! is made as soon as its windows are available. The stream is cut into
//! back-to-back segments of a fixed signal length; at the end of each
//! segment the decisions are voted and the buffers reset.

use crate::error::{Error, Result};
use crate::features::{apply_normalizer, wavelet_feature_vector, FeatureVector};
use crate::postprocess::{decisions_for, majority_vote, min_signal_samples, Decision};
use crate::rnn::{stack_inputs, stack_predict, StackModel};
use crate::signal::Window;

/// Voted result of one completed segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentResult {
    pub segment_index: usize,
    /// Offset of the segment's first sample in the stream.
    pub start_sample: usize,
    pub predicted: usize,
    pub decisions: Vec<Decision>,
}

pub struct StreamClassifier<'a> {
    model: &'a StackModel,
    channels: usize,
    segment_len: usize,
    buffers: Vec<Vec<f64>>,
    features: Vec<FeatureVector>,
    decisions: Vec<Decision>,
    next_window: usize,
    segment_index: usize,
    consumed: usize,
}

impl<'a> StreamClassifier<'a> {
    pub fn new(model: &'a StackModel, channels: usize, sample_rate: f64, segment_ms: f64) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidArgument("stream needs at least one channel".into()));
        }
        if !(sample_rate > 0.0 && segment_ms > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sample rate and segment length must be positive, got {sample_rate} Hz, {segment_ms} ms"
            )));
        }
        let segment_len = (segment_ms * sample_rate / 1000.0).round() as usize;
        let min = min_signal_samples(model);
        if segment_len < min {
            return Err(Error::UnsupportedLength {
                length_ms: segment_ms,
                reason: format!(
                    "{} inputs need at least {:.1} ms of signal",
                    model.input_mode.as_str(),
                    min as f64 * 1000.0 / sample_rate
                ),
            });
        }
        Ok(Self {
            model,
            channels,
            segment_len,
            buffers: vec![Vec::with_capacity(segment_len); channels],
            features: Vec::new(),
            decisions: Vec::new(),
            next_window: 0,
            segment_index: 0,
            consumed: 0,
        })
    }

    pub fn segment_len(&self) -> usize {
        self.segment_len
    }

    /// Samples received since the last completed segment.
    pub fn pending_samples(&self) -> usize {
        self.buffers[0].len()
    }

    /// Decisions made so far in the current segment.
    pub fn decisions(&self) -> &[Decision] {
        &self.decisions
    }

    /// Appends one sample per channel. Returns the voted result when the row
    /// completes a segment.
    pub fn push(&mut self, row: &[f64]) -> Result<Option<SegmentResult>> {
        if row.len() != self.channels {
            return Err(Error::DimensionMismatch {
                context: "stream row channels",
                expected: self.channels,
                got: row.len(),
            });
        }
        if let Some(c) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "sample {} channel {c} is {}",
                self.consumed, row[c]
            )));
        }
        for (buf, &v) in self.buffers.iter_mut().zip(row) {
            buf.push(v);
        }
        self.consumed += 1;

        let e = &self.model.extract;
        let len = self.buffers[0].len();
        while self.next_window + e.window_len <= len {
            let start = self.next_window;
            let window = Window {
                samples: self
                    .buffers
                    .iter()
                    .map(|b| b[start..start + e.window_len].to_vec())
                    .collect(),
                start_index: start,
                label: 0,
            };
            let fv = wavelet_feature_vector(&window, e.levels, &e.params)?;
            self.features.push(apply_normalizer(&self.model.normalizer, &fv)?);
            let per_group = self.model.input_mode.windows_per_group();
            if self.features.len() >= per_group {
                let g = self.features.len() - per_group;
                let inputs = stack_inputs(&self.features, self.model.input_mode, g)?;
                self.decisions
                    .push(Decision::new(g, stack_predict(&inputs, self.model)?));
            }
            self.next_window += e.step;
        }

        if len < self.segment_len {
            return Ok(None);
        }
        let result = SegmentResult {
            segment_index: self.segment_index,
            start_sample: self.consumed - len,
            predicted: majority_vote(&self.decisions)?,
            decisions: std::mem::take(&mut self.decisions),
        };
        self.buffers.iter_mut().for_each(Vec::clear);
        self.features.clear();
        self.next_window = 0;
        self.segment_index += 1;
        Ok(Some(result))
    }

    /// Re-evaluates the current partial segment's decisions from scratch;
    /// used to check the incremental path.
    pub fn recompute_decisions(&self) -> Result<Vec<Decision>> {
        decisions_for(self.model, &self.features)
    }
}
