//! Fixtures shared by the latency benchmarks.

use emg_rnn::features::feature_len;
use emg_rnn::{
    synth_dataset, Arch, Dims, ExtractConfig, InputMode, Normalizer, Recording, StackModel, SynthConfig, TrainConfig,
};

/// A 600 ms, two-channel synthetic recording at 4 kHz.
pub fn recording() -> Recording {
    let cfg = SynthConfig {
        num_classes: 1,
        trials_per_class: 1,
        duration: 0.6,
        ..Default::default()
    };
    synth_dataset(&cfg).expect("synthetic recording").remove(0)
}

/// Randomly initialized stack with the default feature layout and hidden
/// sizes. Timing does not depend on the weight values.
pub fn model(arch: Arch, mode: InputMode, classes: usize) -> StackModel {
    let extract = ExtractConfig::default();
    let train = TrainConfig::default();
    let dims = Dims {
        input: feature_len(2, extract.levels),
        hidden1: train.hidden1,
        hidden2: train.hidden2,
        classes,
    };
    StackModel::random(dims, arch, mode, Normalizer::identity(dims.input), extract, train).expect("valid stack")
}
