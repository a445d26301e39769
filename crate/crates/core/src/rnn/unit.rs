use super::BuParams;
use crate::error::{Error, Result};

/// Activations of one unit evaluation kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct UnitTrace {
    pub fwd_state: Vec<f64>,
    pub bwd_state: Option<Vec<f64>>,
    pub hidden1: Vec<f64>,
    pub hidden2: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    out
}

fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { context, expected, got })
    }
}

/// Forward pass without shape checks; callers validate once per chain.
pub(crate) fn unit_forward(p: &BuParams, x: &[f64], fwd_state: &[f64], bwd_state: Option<&[f64]>) -> UnitTrace {
    let mut pre1 = p.b_in.clone();
    p.w_in.mul_vec_add(x, &mut pre1);
    p.w_fwd_state.mul_vec_add(fwd_state, &mut pre1);
    if let (Some(w), Some(s)) = (&p.w_bwd_state, bwd_state) {
        w.mul_vec_add(s, &mut pre1);
    }
    let hidden1: Vec<f64> = pre1.into_iter().map(f64::tanh).collect();

    let mut pre2 = p.b_hidden.clone();
    p.w_hidden.mul_vec_add(&hidden1, &mut pre2);
    let hidden2: Vec<f64> = pre2.into_iter().map(f64::tanh).collect();

    let mut logits = p.b_out.clone();
    p.w_out.mul_vec_add(&hidden2, &mut logits);
    let probs = softmax(&logits);

    UnitTrace {
        fwd_state: fwd_state.to_vec(),
        bwd_state: bwd_state.map(<[f64]>::to_vec),
        hidden1,
        hidden2,
        logits,
        probs,
    }
}

/// Accumulates parameter gradients into `grad` given `d_logits = dL/dZ3`.
/// Returns `(dL/d fwd_state, dL/d bwd_state)`.
pub(crate) fn unit_backward(
    p: &BuParams,
    x: &[f64],
    trace: &UnitTrace,
    d_logits: &[f64],
    grad: &mut BuParams,
) -> (Vec<f64>, Option<Vec<f64>>) {
    let dims = p.dims();

    for (g, d) in grad.b_out.iter_mut().zip(d_logits) {
        *g += d;
    }
    grad.w_out.add_outer(d_logits, &trace.hidden2);

    let mut d_pre2 = vec![0.0; dims.hidden2];
    p.w_out.tmul_vec_add(d_logits, &mut d_pre2);
    for (d, a) in d_pre2.iter_mut().zip(&trace.hidden2) {
        *d *= 1.0 - a * a;
    }
    for (g, d) in grad.b_hidden.iter_mut().zip(&d_pre2) {
        *g += d;
    }
    grad.w_hidden.add_outer(&d_pre2, &trace.hidden1);

    let mut d_pre1 = vec![0.0; dims.hidden1];
    p.w_hidden.tmul_vec_add(&d_pre2, &mut d_pre1);
    for (d, a) in d_pre1.iter_mut().zip(&trace.hidden1) {
        *d *= 1.0 - a * a;
    }
    for (g, d) in grad.b_in.iter_mut().zip(&d_pre1) {
        *g += d;
    }
    grad.w_in.add_outer(&d_pre1, x);
    grad.w_fwd_state.add_outer(&d_pre1, &trace.fwd_state);

    let mut d_fwd = vec![0.0; dims.classes];
    p.w_fwd_state.tmul_vec_add(&d_pre1, &mut d_fwd);

    let d_bwd = match (&p.w_bwd_state, &trace.bwd_state, grad.w_bwd_state.as_mut()) {
        (Some(w), Some(s), Some(gw)) => {
            gw.add_outer(&d_pre1, s);
            let mut d = vec![0.0; dims.classes];
            w.tmul_vec_add(&d_pre1, &mut d);
            Some(d)
        }
        _ => None,
    };
    (d_fwd, d_bwd)
}

fn check_unit_inputs(p: &BuParams, x: &[f64], states: &[&[f64]]) -> Result<()> {
    p.validate()?;
    let d = p.dims();
    check_len("unit input", d.input, x.len())?;
    for s in states {
        check_len("recurrent state", d.classes, s.len())?;
    }
    Ok(())
}

fn check_output(t: &UnitTrace) -> Result<()> {
    if t.probs.iter().chain(&t.logits).all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("basic unit output".into()))
    }
}

/// Forward-only basic unit. Returns `(y_hat, a_next)` where `a_next` is the
/// logit vector. A bidirectional unit's backward coupling is ignored.
pub fn bu1_forward(x: &[f64], a_prev: &[f64], p: &BuParams) -> Result<(Vec<f64>, Vec<f64>)> {
    check_unit_inputs(p, x, &[a_prev])?;
    let t = unit_forward(p, x, a_prev, None);
    check_output(&t)?;
    Ok((t.probs, t.logits))
}

/// Bidirectional basic unit. Returns `(y_hat, a_next, a_hat_next)`; both
/// emitted states equal the logit vector.
pub fn bu2_forward(
    x: &[f64],
    a_prev: &[f64],
    a_hat_prev: &[f64],
    p: &BuParams,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    if !p.is_bidirectional() {
        return Err(Error::ArchMismatch {
            expected: "brnn",
            got: "rnn",
        });
    }
    check_unit_inputs(p, x, &[a_prev, a_hat_prev])?;
    let t = unit_forward(p, x, a_prev, Some(a_hat_prev));
    check_output(&t)?;
    Ok((t.probs, t.logits.clone(), t.logits))
}

/// Cross-entropy of a single unit's output against `label`, with its
/// gradient with respect to the unit's parameters and both state inputs.
#[derive(Debug, Clone)]
pub struct UnitGradient {
    pub loss: f64,
    pub params: BuParams,
    pub d_fwd_state: Vec<f64>,
    pub d_bwd_state: Option<Vec<f64>>,
}

/// Loss of one unit in isolation; `a_hat_prev` is required exactly when the
/// unit is bidirectional.
pub fn unit_loss(x: &[f64], a_prev: &[f64], a_hat_prev: Option<&[f64]>, p: &BuParams, label: usize) -> Result<f64> {
    let t = checked_unit(x, a_prev, a_hat_prev, p, label)?;
    Ok(-t.probs[label].max(super::stack::PROB_FLOOR).ln())
}

pub fn unit_loss_grad(
    x: &[f64],
    a_prev: &[f64],
    a_hat_prev: Option<&[f64]>,
    p: &BuParams,
    label: usize,
) -> Result<UnitGradient> {
    let t = checked_unit(x, a_prev, a_hat_prev, p, label)?;
    let mut d_logits = t.probs.clone();
    d_logits[label] -= 1.0;
    let mut params = BuParams::zeros(p.dims(), p.is_bidirectional());
    let (d_fwd_state, d_bwd_state) = unit_backward(p, x, &t, &d_logits, &mut params);
    Ok(UnitGradient {
        loss: -t.probs[label].max(super::stack::PROB_FLOOR).ln(),
        params,
        d_fwd_state,
        d_bwd_state,
    })
}

fn checked_unit(
    x: &[f64],
    a_prev: &[f64],
    a_hat_prev: Option<&[f64]>,
    p: &BuParams,
    label: usize,
) -> Result<UnitTrace> {
    if p.is_bidirectional() != a_hat_prev.is_some() {
        return Err(Error::InvalidArgument(
            "backward state must be given exactly for bidirectional units".into(),
        ));
    }
    let mut states = vec![a_prev];
    states.extend(a_hat_prev);
    check_unit_inputs(p, x, &states)?;
    if label >= p.dims().classes {
        return Err(Error::InvalidArgument(format!(
            "label {label} outside [0, {})",
            p.dims().classes
        )));
    }
    let t = unit_forward(p, x, a_prev, a_hat_prev);
    check_output(&t)?;
    Ok(t)
}
