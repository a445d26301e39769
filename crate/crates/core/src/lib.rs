//! Real-time EMG classification with wavelet features and recurrent
//! basic-unit stacks.
//!
//! The pipeline is:
//!
//! ```text
//! Recording -> overlapped windows (400/200 samples)
//!           -> 2-level db1 DWT per channel (cD1, cD2, cA2)
//!           -> 19 statistical features per layer (57 per channel)
//!           -> z-score normalization
//!           -> 5-unit RNN / BRNN stack (same or sequential inputs)
//!           -> majority vote over the signal length
//! ```

pub mod dwt;
pub mod error;
pub mod features;
pub mod pipeline;
pub mod postprocess;
pub mod rnn;
pub mod signal;
pub mod stream;

pub use dwt::{db1_filters, decompose, dwt_level, reconstruct, Decomposition, FilterPair};
pub use error::{Error, Result};
pub use features::{
    apply_normalizer, compute_feature, fit_normalizer, wavelet_feature_vector, FeatureKind, FeatureParams,
    FeatureVector, Normalizer, FEATURES_PER_LAYER,
};
pub use pipeline::{dataset_features, fit_model, recording_features, ExtractConfig};
pub use postprocess::{
    bench_latency, classify_signal, majority_vote, per_class_accuracy, sweep, Decision, LatencyReport, PerClassReport,
    SweepReport, SWEEP_LENGTHS_MS,
};
pub use rnn::{Arch, BuParams, Dims, InputMode, StackModel, TrainConfig, TrainOutcome, TrainSample, NUM_UNITS};
pub use signal::{
    load_recordings, segment_windows, synth_dataset, DatasetManifest, ManifestEntry, Recording, Split, SynthConfig,
    Window,
};
pub use stream::{SegmentResult, StreamClassifier};
