use super::stack::{forward_chain, loss_from_outputs};
use super::{Arch, BuParams, StackModel};
use crate::error::Result;

/// Central-difference gradient of the loss for every parameter of a chain.
/// Costs two forward passes per scalar parameter.
pub fn finite_diff_chain(
    units: &[BuParams],
    arch: Arch,
    inputs: &[Vec<f64>],
    label: usize,
    eps: f64,
) -> Result<Vec<BuParams>> {
    let mut work = units.to_vec();
    let mut grads: Vec<BuParams> = units
        .iter()
        .map(|u| BuParams::zeros(u.dims(), u.is_bidirectional()))
        .collect();
    let eval = |w: &[BuParams]| -> Result<f64> { loss_from_outputs(&forward_chain(w, arch, inputs)?, label) };

    for u in 0..work.len() {
        let lens: Vec<usize> = work[u].slices().iter().map(|s| s.len()).collect();
        for (s, &len) in lens.iter().enumerate() {
            for i in 0..len {
                let orig = work[u].slices()[s][i];
                work[u].slices_mut()[s][i] = orig + eps;
                let plus = eval(&work)?;
                work[u].slices_mut()[s][i] = orig - eps;
                let minus = eval(&work)?;
                work[u].slices_mut()[s][i] = orig;
                grads[u].slices_mut()[s][i] = (plus - minus) / (2.0 * eps);
            }
        }
    }
    Ok(grads)
}

pub fn finite_diff_grad(inputs: &[Vec<f64>], model: &StackModel, label: usize, eps: f64) -> Result<Vec<BuParams>> {
    finite_diff_chain(&model.units, model.arch, inputs, label, eps)
}

/// Entry-wise comparison of two gradient structures. An entry passes when
/// it is within `abs_tol` absolutely or `rel_tol` relatively.
#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub failures: usize,
    pub max_abs_err: f64,
    /// Description of the worst failing entry, if any.
    pub worst: Option<String>,
}

impl GradCheckReport {
    pub fn compare(analytic: &[BuParams], numeric: &[BuParams], rel_tol: f64, abs_tol: f64) -> Self {
        let mut report = GradCheckReport::default();
        let mut worst_excess = 0.0;
        for (u, (a, n)) in analytic.iter().zip(numeric).enumerate() {
            for (s, (sa, sn)) in a.slices().into_iter().zip(n.slices()).enumerate() {
                for (i, (&x, &y)) in sa.iter().zip(sn).enumerate() {
                    report.checked += 1;
                    let abs = (x - y).abs();
                    report.max_abs_err = report.max_abs_err.max(abs);
                    let rel = abs / x.abs().max(y.abs()).max(f64::MIN_POSITIVE);
                    if abs > abs_tol && rel > rel_tol {
                        report.failures += 1;
                        if rel > worst_excess {
                            worst_excess = rel;
                            report.worst = Some(format!(
                                "unit {u} {}[{i}]: analytic {x:e}, numeric {y:e}",
                                BuParams::SLICE_NAMES[s]
                            ));
                        }
                    }
                }
            }
        }
        report
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.checked > 0
    }
}
