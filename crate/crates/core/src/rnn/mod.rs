//! Recurrent basic units and the 5-unit RNN / BRNN stacks built from them.
//!
//! A basic unit is a three-layer perceptron
//!
//! ```text
//! A1 = tanh(W_in x + b_in + W_fwd a_prev [+ W_bwd a_next])
//! A2 = tanh(W_hidden A1 + b_hidden)
//! Z3 = W_out A2 + b_out,   y = softmax(Z3)
//! ```
//!
//! whose recurrent state is the logit vector `Z3` itself. The forward-only
//! unit (BU1) carries `W_fwd`; the bidirectional unit (BU2) additionally
//! carries `W_bwd`. Every unit in a stack has its own weights.

mod gradcheck;
mod matrix;
mod model_io;
mod stack;
mod train;
mod unit;

pub use gradcheck::{finite_diff_chain, finite_diff_grad, GradCheckReport};
pub use matrix::Matrix;
pub use stack::{
    backward, backward_chain, brnn_forward, forward, forward_chain, loss, loss_from_outputs, rnn_forward, stack_inputs,
    stack_predict, StackGradient,
};
pub use train::{train, TrainConfig, TrainOutcome, TrainSample};
pub use unit::{bu1_forward, bu2_forward, unit_loss, unit_loss_grad, UnitGradient};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Normalizer;
use crate::pipeline::ExtractConfig;

/// Units per stack.
pub const NUM_UNITS: usize = 5;
pub const DEFAULT_HIDDEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Rnn,
    Brnn,
}

impl Arch {
    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Rnn => "rnn",
            Arch::Brnn => "brnn",
        }
    }
}

impl std::str::FromStr for Arch {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rnn" => Ok(Arch::Rnn),
            "brnn" => Ok(Arch::Brnn),
            other => Err(format!("unknown architecture {other:?} (expected rnn or brnn)")),
        }
    }
}

/// How the five units of a stack receive their inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputMode {
    /// Every unit sees the features of the same window.
    Same,
    /// Unit j sees the features of window i + j (consecutive, step-shifted).
    Sequential,
}

impl InputMode {
    pub fn as_str(self) -> &'static str {
        match self {
            InputMode::Same => "same",
            InputMode::Sequential => "sequential",
        }
    }

    /// Windows consumed by one stack evaluation.
    pub fn windows_per_group(self) -> usize {
        match self {
            InputMode::Same => 1,
            InputMode::Sequential => NUM_UNITS,
        }
    }
}

impl std::str::FromStr for InputMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "same" => Ok(InputMode::Same),
            "sequential" | "seq" => Ok(InputMode::Sequential),
            other => Err(format!("unknown input mode {other:?} (expected same or sequential)")),
        }
    }
}

/// Layer widths of a unit: input -> hidden1 -> hidden2 -> classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub input: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub classes: usize,
}

/// Weights of one basic unit.
#[derive(Debug, Clone, PartialEq)]
pub struct BuParams {
    /// hidden1 x input
    pub w_in: Matrix,
    pub b_in: Vec<f64>,
    /// hidden2 x hidden1
    pub w_hidden: Matrix,
    pub b_hidden: Vec<f64>,
    /// classes x hidden2
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
    /// hidden1 x classes, couples the state from the previous unit.
    pub w_fwd_state: Matrix,
    /// hidden1 x classes, couples the state from the next unit (BU2 only).
    pub w_bwd_state: Option<Matrix>,
}

impl BuParams {
    pub fn zeros(dims: Dims, bidirectional: bool) -> Self {
        Self {
            w_in: Matrix::zeros(dims.hidden1, dims.input),
            b_in: vec![0.0; dims.hidden1],
            w_hidden: Matrix::zeros(dims.hidden2, dims.hidden1),
            b_hidden: vec![0.0; dims.hidden2],
            w_out: Matrix::zeros(dims.classes, dims.hidden2),
            b_out: vec![0.0; dims.classes],
            w_fwd_state: Matrix::zeros(dims.hidden1, dims.classes),
            w_bwd_state: bidirectional.then(|| Matrix::zeros(dims.hidden1, dims.classes)),
        }
    }

    /// Weights uniform in `[-s, s]` with `s = scale / sqrt(fan_in)`; biases zero.
    pub fn random(dims: Dims, bidirectional: bool, scale: f64, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(dims, bidirectional);
        let mut fill = |m: &mut Matrix| {
            let s = scale / (m.cols() as f64).sqrt();
            m.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-s..=s));
        };
        fill(&mut p.w_in);
        fill(&mut p.w_hidden);
        fill(&mut p.w_out);
        fill(&mut p.w_fwd_state);
        if let Some(m) = p.w_bwd_state.as_mut() {
            fill(m);
        }
        p
    }

    pub fn dims(&self) -> Dims {
        Dims {
            input: self.w_in.cols(),
            hidden1: self.w_in.rows(),
            hidden2: self.w_hidden.rows(),
            classes: self.w_out.rows(),
        }
    }

    pub fn is_bidirectional(&self) -> bool {
        self.w_bwd_state.is_some()
    }

    /// Checks internal shape consistency.
    pub fn validate(&self) -> Result<()> {
        let d = self.dims();
        let checks: [(&'static str, usize, usize); 9] = [
            ("b_in", d.hidden1, self.b_in.len()),
            ("w_hidden cols", d.hidden1, self.w_hidden.cols()),
            ("b_hidden", d.hidden2, self.b_hidden.len()),
            ("w_out cols", d.hidden2, self.w_out.cols()),
            ("b_out", d.classes, self.b_out.len()),
            ("w_fwd_state rows", d.hidden1, self.w_fwd_state.rows()),
            ("w_fwd_state cols", d.classes, self.w_fwd_state.cols()),
            (
                "w_bwd_state rows",
                d.hidden1,
                self.w_bwd_state.as_ref().map_or(d.hidden1, Matrix::rows),
            ),
            (
                "w_bwd_state cols",
                d.classes,
                self.w_bwd_state.as_ref().map_or(d.classes, Matrix::cols),
            ),
        ];
        for (context, expected, got) in checks {
            if expected != got {
                return Err(Error::DimensionMismatch { context, expected, got });
            }
        }
        if self.slices().iter().any(|s| s.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("unit parameters".into()));
        }
        Ok(())
    }

    /// Parameter tensors in a fixed order (the optional backward coupling last).
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = vec![
            self.w_in.data(),
            &self.b_in,
            self.w_hidden.data(),
            &self.b_hidden,
            self.w_out.data(),
            &self.b_out,
            self.w_fwd_state.data(),
        ];
        if let Some(m) = &self.w_bwd_state {
            v.push(m.data());
        }
        v
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = vec![
            self.w_in.data_mut(),
            &mut self.b_in,
            self.w_hidden.data_mut(),
            &mut self.b_hidden,
            self.w_out.data_mut(),
            &mut self.b_out,
            self.w_fwd_state.data_mut(),
        ];
        if let Some(m) = &mut self.w_bwd_state {
            v.push(m.data_mut());
        }
        v
    }

    pub const SLICE_NAMES: [&'static str; 8] = [
        "w_in",
        "b_in",
        "w_hidden",
        "b_hidden",
        "w_out",
        "b_out",
        "w_fwd_state",
        "w_bwd_state",
    ];

    pub fn num_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub(crate) fn fill_zero(&mut self) {
        for s in self.slices_mut() {
            s.fill(0.0);
        }
    }
}

/// A trained 5-unit stack together with everything needed to apply it to
/// raw recordings: feature layout, normalizer and training settings.
#[derive(Debug, Clone, PartialEq)]
pub struct StackModel {
    pub units: Vec<BuParams>,
    pub arch: Arch,
    pub input_mode: InputMode,
    pub normalizer: Normalizer,
    pub extract: ExtractConfig,
    pub train: TrainConfig,
}

impl StackModel {
    pub fn new(
        units: Vec<BuParams>,
        arch: Arch,
        input_mode: InputMode,
        normalizer: Normalizer,
        extract: ExtractConfig,
        train: TrainConfig,
    ) -> Result<Self> {
        let model = Self {
            units,
            arch,
            input_mode,
            normalizer,
            extract,
            train,
        };
        model.validate()?;
        Ok(model)
    }

    /// Randomly initialized stack (see [`BuParams::random`]).
    pub fn random(
        dims: Dims,
        arch: Arch,
        input_mode: InputMode,
        normalizer: Normalizer,
        extract: ExtractConfig,
        train: TrainConfig,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(train.seed);
        let units = (0..NUM_UNITS)
            .map(|_| BuParams::random(dims, arch == Arch::Brnn, train.init_scale, &mut rng))
            .collect();
        Self::new(units, arch, input_mode, normalizer, extract, train)
    }

    pub fn validate(&self) -> Result<()> {
        if self.units.len() != NUM_UNITS {
            return Err(Error::DimensionMismatch {
                context: "stack unit count",
                expected: NUM_UNITS,
                got: self.units.len(),
            });
        }
        validate_chain(&self.units, self.arch)?;
        if self.normalizer.dim() != self.dims().input {
            return Err(Error::DimensionMismatch {
                context: "normalizer vs model input",
                expected: self.dims().input,
                got: self.normalizer.dim(),
            });
        }
        self.extract.validate()
    }

    pub fn dims(&self) -> Dims {
        self.units[0].dims()
    }

    pub fn num_classes(&self) -> usize {
        self.dims().classes
    }

    pub fn name(&self) -> String {
        format!("{} {}", self.arch.as_str().to_uppercase(), self.input_mode.as_str())
    }
}

/// Shape and arch checks shared by full stacks and shorter test chains.
pub(crate) fn validate_chain(units: &[BuParams], arch: Arch) -> Result<()> {
    let first = units.first().ok_or(Error::Empty("unit chain"))?;
    let dims = first.dims();
    for u in units {
        u.validate()?;
        let d = u.dims();
        if d != dims {
            return Err(Error::DimensionMismatch {
                context: "unit dimension chain",
                expected: dims.input,
                got: d.input,
            });
        }
        if u.is_bidirectional() != (arch == Arch::Brnn) {
            return Err(Error::ArchMismatch {
                expected: arch.as_str(),
                got: if u.is_bidirectional() { "brnn" } else { "rnn" },
            });
        }
    }
    Ok(())
}
