//! Majority voting over stack decisions, signal-length accuracy sweeps,
//! per-class accuracy and latency measurement.

use std::fmt::Write as _;
use std::hint::black_box;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{wavelet_feature_vector, FeatureVector};
use crate::pipeline::{group_count, normalize_all, recording_features};
use crate::rnn::{stack_inputs, stack_predict, Arch, InputMode, StackModel};
use crate::signal::{segment_windows, window_count, Recording};

/// Signal lengths of the standard sweep, in milliseconds.
pub const SWEEP_LENGTHS_MS: [f64; 11] = [
    100.0, 150.0, 200.0, 250.0, 300.0, 350.0, 400.0, 450.0, 500.0, 550.0, 600.0,
];

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// One stack evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    /// Index of the first window the evaluation consumed.
    pub window_index: usize,
    pub probabilities: Vec<f64>,
    pub predicted: usize,
}

impl Decision {
    pub fn new(window_index: usize, probabilities: Vec<f64>) -> Self {
        Self {
            window_index,
            predicted: argmax(&probabilities),
            probabilities,
        }
    }
}

/// Most frequent class among `labels`; ties go to the lowest class index.
pub fn vote(labels: impl IntoIterator<Item = usize>) -> Option<usize> {
    let mut counts: Vec<usize> = Vec::new();
    for l in labels {
        if l >= counts.len() {
            counts.resize(l + 1, 0);
        }
        counts[l] += 1;
    }
    if counts.is_empty() {
        return None;
    }
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    Some(best)
}

pub fn majority_vote(decisions: &[Decision]) -> Result<usize> {
    vote(decisions.iter().map(|d| d.predicted)).ok_or(Error::Empty("decision list"))
}

/// Stack decisions for every evaluation available from normalized window
/// features, in window order.
pub fn decisions_for(model: &StackModel, normalized: &[FeatureVector]) -> Result<Vec<Decision>> {
    (0..group_count(normalized.len(), model.input_mode))
        .map(|i| {
            let inputs = stack_inputs(normalized, model.input_mode, i)?;
            Ok(Decision::new(i, stack_predict(&inputs, model)?))
        })
        .collect()
}

/// Shortest signal, in samples, that yields at least one stack decision.
pub fn min_signal_samples(model: &StackModel) -> usize {
    let e = &model.extract;
    e.window_len + (model.input_mode.windows_per_group() - 1) * e.step
}

/// Classifies the first `signal_length_ms` of `recording` by majority vote
/// over the stack decisions available in that span.
pub fn classify_signal(
    recording: &Recording,
    model: &StackModel,
    signal_length_ms: f64,
) -> Result<(usize, Vec<Decision>)> {
    let n = recording.samples_for_ms(signal_length_ms);
    if n > recording.len() {
        return Err(Error::UnsupportedLength {
            length_ms: signal_length_ms,
            reason: format!("recording is only {:.1} ms long", recording.duration_ms()),
        });
    }
    let min = min_signal_samples(model);
    if n < min {
        return Err(Error::UnsupportedLength {
            length_ms: signal_length_ms,
            reason: format!(
                "{} inputs need at least {:.1} ms of signal",
                model.input_mode.as_str(),
                min as f64 * 1000.0 / recording.sample_rate
            ),
        });
    }
    let prefix = recording.prefix(n)?;
    let features = normalize_all(&model.normalizer, &recording_features(&prefix, &model.extract)?)?;
    let decisions = decisions_for(model, &features)?;
    Ok((majority_vote(&decisions)?, decisions))
}

/// Accuracy of one stack across signal lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub name: String,
    pub arch: Arch,
    pub input_mode: InputMode,
    /// Percent correct per length; `None` where the length is too short.
    pub accuracy: Vec<Option<f64>>,
    /// Voted class per length, per test recording.
    pub predictions: Vec<Vec<Option<usize>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerClassReport {
    pub name: String,
    pub length_ms: f64,
    /// Percent correct per class; `None` for classes absent from the test set.
    pub accuracy: Vec<Option<f64>>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub overall: f64,
}

impl PerClassReport {
    pub fn from_predictions(
        name: String,
        length_ms: f64,
        labels: &[usize],
        predicted: &[usize],
        classes: usize,
    ) -> Self {
        let mut confusion = vec![vec![0usize; classes]; classes];
        for (&t, &p) in labels.iter().zip(predicted) {
            confusion[t][p] += 1;
        }
        let accuracy = confusion
            .iter()
            .enumerate()
            .map(|(c, row)| {
                let total: usize = row.iter().sum();
                (total > 0).then(|| 100.0 * row[c] as f64 / total as f64)
            })
            .collect();
        let trace: usize = (0..classes).map(|c| confusion[c][c]).sum();
        let overall = if labels.is_empty() {
            0.0
        } else {
            100.0 * trace as f64 / labels.len() as f64
        };
        Self {
            name,
            length_ms,
            accuracy,
            confusion,
            overall,
        }
    }

    pub fn confusion_csv(&self) -> String {
        let classes = self.confusion.len();
        let mut out = String::from("true\\predicted");
        for c in 0..classes {
            write!(out, ",{c}").unwrap();
        }
        out.push('\n');
        for (t, row) in self.confusion.iter().enumerate() {
            write!(out, "{t}").unwrap();
            for n in row {
                write!(out, ",{n}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,accuracy,count\n");
        for (c, (acc, row)) in self.accuracy.iter().zip(&self.confusion).enumerate() {
            let total: usize = row.iter().sum();
            match acc {
                Some(a) => writeln!(out, "{c},{a:.2},{total}").unwrap(),
                None => writeln!(out, "{c},-,{total}").unwrap(),
            }
        }
        out
    }
}

/// Accuracy-versus-signal-length table for several stacks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub lengths_ms: Vec<f64>,
    /// True label of each test recording.
    pub labels: Vec<usize>,
    pub rows: Vec<SweepRow>,
    /// Per-class breakdown for each stack at the chosen length, when requested.
    pub per_class: Vec<PerClassReport>,
}

fn fmt_cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |a| format!("{a:.1}"))
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("structure");
        for l in &self.lengths_ms {
            write!(out, ",{l}").unwrap();
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.name);
            for a in &row.accuracy {
                match a {
                    Some(a) => write!(out, ",{a:.2}").unwrap(),
                    None => out.push_str(",-"),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Fixed-width table: one row per stack, one column per length.
    pub fn to_table(&self) -> String {
        let name_w = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(9);
        let mut out = format!("{:<name_w$}", "structure");
        for l in &self.lengths_ms {
            write!(out, " {:>6}", l).unwrap();
        }
        out.push('\n');
        for row in &self.rows {
            write!(out, "{:<name_w$}", row.name).unwrap();
            for &a in &row.accuracy {
                write!(out, " {:>6}", fmt_cell(a)).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Evaluates every model on every test recording at every length.
///
/// Decisions are computed once per recording over its full length; the
/// vote at length L uses the decisions whose windows fit in the first L ms,
/// which is exactly what [`classify_signal`] sees for that prefix. Lengths
/// too short for a model's input mode are reported as `None`.
pub fn sweep(
    models: &[&StackModel],
    test_set: &[Recording],
    lengths_ms: &[f64],
    per_class_length: Option<f64>,
) -> Result<SweepReport> {
    if test_set.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let labels: Vec<usize> = test_set.iter().map(|r| r.label).collect();
    let mut rows = Vec::with_capacity(models.len());
    let mut per_class = Vec::new();

    for model in models {
        let e = &model.extract;
        // per recording: voted label per length
        let votes: Vec<Vec<Option<usize>>> = test_set
            .par_iter()
            .map(|rec| -> Result<Vec<Option<usize>>> {
                let features = normalize_all(&model.normalizer, &recording_features(rec, e)?)?;
                let decisions = decisions_for(model, &features)?;
                lengths_ms
                    .iter()
                    .map(|&len| {
                        let n = rec.samples_for_ms(len);
                        if n > rec.len() {
                            return Err(Error::UnsupportedLength {
                                length_ms: len,
                                reason: format!("test recording is only {:.1} ms long", rec.duration_ms()),
                            });
                        }
                        let groups = group_count(window_count(n, e.window_len, e.step), model.input_mode);
                        Ok(vote(decisions[..groups].iter().map(|d| d.predicted)))
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;

        let predictions: Vec<Vec<Option<usize>>> = (0..lengths_ms.len())
            .map(|li| votes.iter().map(|v| v[li]).collect())
            .collect();
        let accuracy = predictions
            .iter()
            .map(|preds| {
                if preds.iter().any(Option::is_none) {
                    return None;
                }
                let correct = preds.iter().zip(&labels).filter(|(p, l)| **p == Some(**l)).count();
                Some(100.0 * correct as f64 / labels.len() as f64)
            })
            .collect();

        if let Some(len) = per_class_length {
            if let Some(li) = lengths_ms.iter().position(|&l| l == len) {
                if let Some(preds) = predictions[li].iter().copied().collect::<Option<Vec<usize>>>() {
                    per_class.push(PerClassReport::from_predictions(
                        model.name(),
                        len,
                        &labels,
                        &preds,
                        model.num_classes(),
                    ));
                }
            }
        }

        rows.push(SweepRow {
            name: model.name(),
            arch: model.arch,
            input_mode: model.input_mode,
            accuracy,
            predictions,
        });
    }

    Ok(SweepReport {
        lengths_ms: lengths_ms.to_vec(),
        labels,
        rows,
        per_class,
    })
}

/// Per-class accuracy and confusion matrix of one model at one length.
pub fn per_class_accuracy(model: &StackModel, test_set: &[Recording], length_ms: f64) -> Result<PerClassReport> {
    let predicted: Vec<usize> = test_set
        .par_iter()
        .map(|r| classify_signal(r, model, length_ms).map(|(c, _)| c))
        .collect::<Result<_>>()?;
    let labels: Vec<usize> = test_set.iter().map(|r| r.label).collect();
    if let Some(&l) = labels.iter().find(|&&l| l >= model.num_classes()) {
        return Err(Error::InvalidArgument(format!(
            "test label {l} outside the model's {} classes",
            model.num_classes()
        )));
    }
    Ok(PerClassReport::from_predictions(
        model.name(),
        length_ms,
        &labels,
        &predicted,
        model.num_classes(),
    ))
}

/// Distribution of a set of timings, in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

impl Summary {
    pub fn from_ms(mut samples: Vec<f64>) -> Self {
        if samples.is_empty() {
            return Self {
                count: 0,
                mean_ms: 0.0,
                p50_ms: 0.0,
                p95_ms: 0.0,
                max_ms: 0.0,
            };
        }
        samples.sort_by(f64::total_cmp);
        let n = samples.len();
        let rank = |p: f64| samples[((p * n as f64).ceil() as usize).clamp(1, n) - 1];
        Self {
            count: n,
            mean_ms: samples.iter().sum::<f64>() / n as f64,
            p50_ms: rank(0.5),
            p95_ms: rank(0.95),
            max_ms: samples[n - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    /// Per window: wavelet decomposition, feature bank and normalization.
    pub feature_extraction: Summary,
    /// Per decision: stack forward pass plus the running majority vote.
    pub classification: Summary,
    pub iterations: usize,
    pub windows_per_iteration: usize,
    pub decisions_per_iteration: usize,
}

impl LatencyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,count,mean_ms,p50_ms,p95_ms,max_ms\n");
        for (name, s) in [
            ("feature_extraction", &self.feature_extraction),
            ("classification", &self.classification),
        ] {
            writeln!(
                out,
                "{name},{},{:.6},{:.6},{:.6},{:.6}",
                s.count, s.mean_ms, s.p50_ms, s.p95_ms, s.max_ms
            )
            .unwrap();
        }
        out
    }
}

/// Times feature extraction per window and stack evaluation plus voting per
/// decision over `recording`, repeated `iterations` times on the calling
/// thread.
pub fn bench_latency(model: &StackModel, recording: &Recording, iterations: usize) -> Result<LatencyReport> {
    if iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be >= 1".into()));
    }
    let e = &model.extract;
    let windows = segment_windows(recording, e.window_len, e.step)?;
    let groups = group_count(windows.len(), model.input_mode);
    if groups == 0 {
        return Err(Error::NotEnoughWindows {
            needed: model.input_mode.windows_per_group(),
            available: windows.len(),
        });
    }
    let mut extract_ms = Vec::with_capacity(iterations * windows.len());
    let mut classify_ms = Vec::with_capacity(iterations * groups);

    for _ in 0..iterations {
        let mut features = Vec::with_capacity(windows.len());
        for w in &windows {
            let t0 = Instant::now();
            let fv = wavelet_feature_vector(black_box(w), e.levels, &e.params)?;
            let fv = crate::features::apply_normalizer(&model.normalizer, &fv)?;
            extract_ms.push(t0.elapsed().as_secs_f64() * 1e3);
            features.push(black_box(fv));
        }
        let mut decisions = Vec::with_capacity(groups);
        for g in 0..groups {
            let t0 = Instant::now();
            let inputs = stack_inputs(&features, model.input_mode, g)?;
            decisions.push(Decision::new(g, stack_predict(&inputs, model)?));
            black_box(majority_vote(&decisions)?);
            classify_ms.push(t0.elapsed().as_secs_f64() * 1e3);
        }
    }

    Ok(LatencyReport {
        feature_extraction: Summary::from_ms(extract_ms),
        classification: Summary::from_ms(classify_ms),
        iterations,
        windows_per_iteration: windows.len(),
        decisions_per_iteration: groups,
    })
}
