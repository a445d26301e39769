use super::unit::{unit_backward, unit_forward, UnitTrace};
use super::{validate_chain, Arch, BuParams, InputMode, StackModel, NUM_UNITS};
use crate::error::{Error, Result};
use crate::features::FeatureVector;

/// Probabilities are clamped to this before taking logs in the loss.
pub const PROB_FLOOR: f64 = 1e-12;

/// Builds the five unit inputs for the stack evaluation based at window `i`.
pub fn stack_inputs(windows: &[FeatureVector], mode: InputMode, i: usize) -> Result<Vec<Vec<f64>>> {
    match mode {
        InputMode::Same => {
            let w = windows.get(i).ok_or(Error::NotEnoughWindows {
                needed: i + 1,
                available: windows.len(),
            })?;
            Ok(vec![w.values.clone(); NUM_UNITS])
        }
        InputMode::Sequential => {
            if i + NUM_UNITS > windows.len() {
                return Err(Error::NotEnoughWindows {
                    needed: i + NUM_UNITS,
                    available: windows.len(),
                });
            }
            Ok(windows[i..i + NUM_UNITS].iter().map(|w| w.values.clone()).collect())
        }
    }
}

/// Traces of one chain evaluation. `bwd` is empty for RNN chains.
pub(crate) struct ChainTrace {
    pub fwd: Vec<UnitTrace>,
    pub bwd: Vec<UnitTrace>,
}

fn check_chain_inputs(units: &[BuParams], arch: Arch, inputs: &[Vec<f64>]) -> Result<()> {
    validate_chain(units, arch)?;
    if inputs.len() != units.len() {
        return Err(Error::DimensionMismatch {
            context: "stack inputs vs units",
            expected: units.len(),
            got: inputs.len(),
        });
    }
    let d_in = units[0].dims().input;
    if let Some(x) = inputs.iter().find(|x| x.len() != d_in) {
        return Err(Error::DimensionMismatch {
            context: "stack input vector",
            expected: d_in,
            got: x.len(),
        });
    }
    Ok(())
}

/// Evaluates a chain of units. For BRNN the backward sweep runs first
/// (last unit to first, zero state past the end, zero forward state), then
/// the forward sweep consumes both the previous unit's forward state and the
/// next unit's backward-sweep state.
pub(crate) fn run_chain(units: &[BuParams], arch: Arch, inputs: &[Vec<f64>]) -> ChainTrace {
    let n = units.len();
    let classes = units[0].dims().classes;
    let zero = vec![0.0; classes];

    let mut bwd: Vec<UnitTrace> = Vec::new();
    if arch == Arch::Brnn {
        let mut rev = Vec::with_capacity(n);
        for j in (0..n).rev() {
            let next = rev.last().map_or(zero.as_slice(), |t: &UnitTrace| t.logits.as_slice());
            let t = unit_forward(&units[j], &inputs[j], &zero, Some(next));
            rev.push(t);
        }
        rev.reverse();
        bwd = rev;
    }

    let mut fwd: Vec<UnitTrace> = Vec::with_capacity(n);
    for j in 0..n {
        let prev = fwd.last().map_or(zero.as_slice(), |t| t.logits.as_slice());
        let next = match arch {
            Arch::Rnn => None,
            Arch::Brnn => Some(bwd.get(j + 1).map_or(zero.as_slice(), |t| t.logits.as_slice())),
        };
        let t = unit_forward(&units[j], &inputs[j], prev, next);
        fwd.push(t);
    }
    ChainTrace { fwd, bwd }
}

/// Per-unit output distributions of an arbitrary-length chain.
pub fn forward_chain(units: &[BuParams], arch: Arch, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    check_chain_inputs(units, arch, inputs)?;
    let outputs: Vec<Vec<f64>> = run_chain(units, arch, inputs)
        .fwd
        .into_iter()
        .map(|t| t.probs)
        .collect();
    if outputs.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("stack output".into()));
    }
    Ok(outputs)
}

fn require_arch(model: &StackModel, arch: Arch) -> Result<()> {
    if model.arch == arch {
        Ok(())
    } else {
        Err(Error::ArchMismatch {
            expected: arch.as_str(),
            got: model.arch.as_str(),
        })
    }
}

pub fn rnn_forward(inputs: &[Vec<f64>], model: &StackModel) -> Result<Vec<Vec<f64>>> {
    require_arch(model, Arch::Rnn)?;
    forward_chain(&model.units, Arch::Rnn, inputs)
}

pub fn brnn_forward(inputs: &[Vec<f64>], model: &StackModel) -> Result<Vec<Vec<f64>>> {
    require_arch(model, Arch::Brnn)?;
    forward_chain(&model.units, Arch::Brnn, inputs)
}

/// Dispatches on the model's architecture.
pub fn forward(inputs: &[Vec<f64>], model: &StackModel) -> Result<Vec<Vec<f64>>> {
    forward_chain(&model.units, model.arch, inputs)
}

/// Mean of the unit outputs, renormalized; its argmax is the stack decision.
pub fn stack_predict(inputs: &[Vec<f64>], model: &StackModel) -> Result<Vec<f64>> {
    Ok(mean_distribution(&forward(inputs, model)?))
}

pub(crate) fn mean_distribution(outputs: &[Vec<f64>]) -> Vec<f64> {
    let mut mean = vec![0.0; outputs[0].len()];
    for y in outputs {
        for (m, v) in mean.iter_mut().zip(y) {
            *m += v;
        }
    }
    let total: f64 = mean.iter().sum();
    mean.iter_mut().for_each(|m| *m /= total);
    mean
}

/// Mean cross-entropy of the unit outputs against `label`.
pub fn loss_from_outputs(outputs: &[Vec<f64>], label: usize) -> Result<f64> {
    if outputs.is_empty() {
        return Err(Error::Empty("stack outputs"));
    }
    let classes = outputs[0].len();
    if label >= classes {
        return Err(Error::InvalidArgument(format!("label {label} outside [0, {classes})")));
    }
    Ok(outputs.iter().map(|y| -y[label].max(PROB_FLOOR).ln()).sum::<f64>() / outputs.len() as f64)
}

pub fn loss(inputs: &[Vec<f64>], model: &StackModel, label: usize) -> Result<f64> {
    loss_from_outputs(&forward(inputs, model)?, label)
}

/// Runs forward and backward once, adding parameter gradients of the loss
/// into `grads` (one entry per unit). Returns the loss. No shape checks.
pub(crate) fn accumulate_chain_grad(
    units: &[BuParams],
    arch: Arch,
    inputs: &[Vec<f64>],
    label: usize,
    grads: &mut [BuParams],
) -> f64 {
    let n = units.len();
    let classes = units[0].dims().classes;
    let trace = run_chain(units, arch, inputs);
    let scale = 1.0 / n as f64;

    let loss = trace
        .fwd
        .iter()
        .map(|t| -t.probs[label].max(PROB_FLOOR).ln())
        .sum::<f64>()
        * scale;

    // gradient w.r.t. the backward-sweep states, indexed by emitting unit
    let mut d_bwd_state = vec![vec![0.0; classes]; n];

    // forward sweep, last unit first
    let mut d_next_fwd_state = vec![0.0; classes];
    for j in (0..n).rev() {
        let t = &trace.fwd[j];
        let mut d_logits = d_next_fwd_state.clone();
        if t.probs[label] >= PROB_FLOOR {
            for (c, d) in d_logits.iter_mut().enumerate() {
                let target = if c == label { 1.0 } else { 0.0 };
                *d += (t.probs[c] - target) * scale;
            }
        }
        let (d_prev, d_next) = unit_backward(&units[j], &inputs[j], t, &d_logits, &mut grads[j]);
        d_next_fwd_state = d_prev;
        if let (Some(d), true) = (d_next, j + 1 < n) {
            for (acc, v) in d_bwd_state[j + 1].iter_mut().zip(d) {
                *acc += v;
            }
        }
    }

    // backward sweep ran last-to-first, so unwind it first-to-last
    if arch == Arch::Brnn {
        for j in 0..n {
            let d_logits = std::mem::take(&mut d_bwd_state[j]);
            let (_, d_next) = unit_backward(&units[j], &inputs[j], &trace.bwd[j], &d_logits, &mut grads[j]);
            if let (Some(d), true) = (d_next, j + 1 < n) {
                for (acc, v) in d_bwd_state[j + 1].iter_mut().zip(d) {
                    *acc += v;
                }
            }
        }
    }
    loss
}

/// Analytic gradient of `loss` for every unit of a chain.
pub fn backward_chain(
    units: &[BuParams],
    arch: Arch,
    inputs: &[Vec<f64>],
    label: usize,
) -> Result<(f64, Vec<BuParams>)> {
    check_chain_inputs(units, arch, inputs)?;
    let classes = units[0].dims().classes;
    if label >= classes {
        return Err(Error::InvalidArgument(format!("label {label} outside [0, {classes})")));
    }
    let mut grads: Vec<BuParams> = units
        .iter()
        .map(|u| BuParams::zeros(u.dims(), u.is_bidirectional()))
        .collect();
    let loss = accumulate_chain_grad(units, arch, inputs, label, &mut grads);
    if !loss.is_finite()
        || grads
            .iter()
            .any(|g| g.slices().iter().any(|s| s.iter().any(|v| !v.is_finite())))
    {
        return Err(Error::NonFinite("gradient".into()));
    }
    Ok((loss, grads))
}

/// Gradient of the loss with respect to every parameter of a stack, laid out
/// like the stack's units.
#[derive(Debug, Clone, PartialEq)]
pub struct StackGradient {
    pub loss: f64,
    pub units: Vec<BuParams>,
}

pub fn backward(inputs: &[Vec<f64>], model: &StackModel, label: usize) -> Result<StackGradient> {
    let (loss, units) = backward_chain(&model.units, model.arch, inputs, label)?;
    Ok(StackGradient { loss, units })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Normalizer;
    use crate::pipeline::ExtractConfig;
    use crate::rnn::{Dims, TrainConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const DIMS: Dims = Dims {
        input: 4,
        hidden1: 6,
        hidden2: 5,
        classes: 3,
    };

    fn model(arch: Arch, mode: InputMode, seed: u64) -> StackModel {
        StackModel::random(
            DIMS,
            arch,
            mode,
            Normalizer::identity(DIMS.input),
            ExtractConfig::default(),
            TrainConfig {
                seed,
                ..Default::default()
            },
        )
        .unwrap()
    }

    fn fv(values: Vec<f64>) -> FeatureVector {
        FeatureVector {
            values,
            start_index: 0,
            label: 0,
        }
    }

    fn random_inputs(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..NUM_UNITS)
            .map(|_| (0..DIMS.input).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect()
    }

    #[test]
    fn stack_inputs_modes() {
        let windows: Vec<_> = (0..7).map(|i| fv(vec![i as f64; 2])).collect();
        let same = stack_inputs(&windows, InputMode::Same, 3).unwrap();
        assert!(same.iter().all(|x| x == &vec![3.0; 2]));
        let seq = stack_inputs(&windows, InputMode::Sequential, 2).unwrap();
        assert_eq!(
            seq.iter().map(|x| x[0]).collect::<Vec<_>>(),
            vec![2.0, 3.0, 4.0, 5.0, 6.0]
        );
        assert!(matches!(
            stack_inputs(&windows, InputMode::Sequential, 3),
            Err(Error::NotEnoughWindows {
                needed: 8,
                available: 7
            })
        ));
        assert!(stack_inputs(&windows[..4], InputMode::Sequential, 0).is_err());
        assert_eq!(stack_inputs(&windows[..5], InputMode::Sequential, 0).unwrap().len(), 5);
    }

    #[test]
    fn arch_mismatch() {
        let m = model(Arch::Rnn, InputMode::Same, 1);
        let inputs = vec![vec![0.0; DIMS.input]; NUM_UNITS];
        assert!(rnn_forward(&inputs, &m).is_ok());
        assert!(matches!(brnn_forward(&inputs, &m), Err(Error::ArchMismatch { .. })));
    }

    #[test]
    fn brnn_without_backward_coupling_matches_rnn() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut b = model(Arch::Brnn, InputMode::Sequential, 4);
        for u in &mut b.units {
            u.w_bwd_state.as_mut().unwrap().data_mut().fill(0.0);
        }
        let mut r = b.clone();
        r.arch = Arch::Rnn;
        r.units.iter_mut().for_each(|u| u.w_bwd_state = None);
        for _ in 0..10 {
            let x = random_inputs(&mut rng);
            let yb = brnn_forward(&x, &b).unwrap();
            let yr = rnn_forward(&x, &r).unwrap();
            for (p, q) in yb.iter().flatten().zip(yr.iter().flatten()) {
                assert!((p - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn predict_is_mean_distribution() {
        assert_eq!(mean_distribution(&[vec![1.0, 0.0], vec![0.0, 1.0]]), vec![0.5, 0.5]);
        let y = vec![0.2, 0.3, 0.5];
        let m = mean_distribution(&vec![y.clone(); 5]);
        for (a, b) in m.iter().zip(&y) {
            assert!((a - b).abs() < 1e-15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = stack_predict(&random_inputs(&mut rng), &model(Arch::Brnn, InputMode::Same, 2)).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loss_values() {
        let onehot = vec![vec![0.0, 1.0, 0.0]; 5];
        assert!(loss_from_outputs(&onehot, 1).unwrap().abs() < 1e-15);
        let uniform = vec![vec![0.25; 4]; 5];
        assert!((loss_from_outputs(&uniform, 2).unwrap() - 4f64.ln()).abs() < 1e-12);
        // a zero probability is clamped, not infinite
        assert!(loss_from_outputs(&onehot, 0).unwrap().is_finite());
        assert!(loss_from_outputs(&onehot, 3).is_err());
    }

    #[test]
    fn output_bias_gradient_is_softmax_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // RNN: only the forward sweep produces outputs, and b_out of unit j
        // sees (y_j - onehot)/5 plus whatever flows back from unit j+1.
        // With zero forward coupling the recurrent term vanishes.
        let mut m = model(Arch::Rnn, InputMode::Sequential, 8);
        m.units.iter_mut().for_each(|u| u.w_fwd_state.data_mut().fill(0.0));
        let x = random_inputs(&mut rng);
        let label = 2;
        let g = backward(&x, &m, label).unwrap();
        let outs = forward(&x, &m).unwrap();
        for (gu, y) in g.units.iter().zip(&outs) {
            for (c, (&gb, &yc)) in gu.b_out.iter().zip(y).enumerate() {
                let onehot = if c == label { 1.0 } else { 0.0 };
                assert!((gb - (yc - onehot) / 5.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn single_unit_state_gradient_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let unit = BuParams::random(DIMS, false, 1.0, &mut rng);
        let x = vec![random_inputs(&mut rng).remove(0)];
        let (_, g) = backward_chain(std::slice::from_ref(&unit), Arch::Rnn, &x, 0).unwrap();
        assert!(g[0].w_fwd_state.data().iter().all(|&v| v == 0.0));
        assert!(g[0].w_in.data().iter().any(|&v| v != 0.0));
    }
}
