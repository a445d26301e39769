//! Statistical feature bank applied to every wavelet coefficient layer, and
//! the z-score normalizer fitted on training features.
//!
//! Layout of a feature vector: channel-major, then layer (cD1, cD2, ...,
//! cA_L), then the 19 features in [`FeatureKind::ALL`] order. With the
//! default 2-level decomposition this is 57 values per channel.

use serde::{Deserialize, Serialize};

use crate::dwt::{db1_filters, decompose, FilterPair};
use crate::error::{Error, Result};
use crate::signal::Window;

pub const FEATURES_PER_LAYER: usize = 19;
/// Exponent arguments of IEAV and IE are clamped to this magnitude.
pub const EXP_CLAMP: f64 = 50.0;
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    /// Integrated EMG: sum |x|.
    Iemg,
    /// Mean absolute value.
    Mav,
    /// Simple square integral: sum x^2.
    Ssi,
    Rms,
    /// sum x^2 / (N-1), taken about zero.
    Var,
    /// Myopulse percentage rate: fraction of |x| above the threshold.
    Myop,
    /// Waveform length: sum |x[n+1]-x[n]|.
    Wl,
    /// Difference absolute mean value: WL / (N-1).
    Damv,
    /// Second-order moment: sum of squared first differences.
    M2,
    /// Difference variance: M2 / (N-2).
    Dvarv,
    /// Difference absolute standard deviation: sqrt(M2 / (N-1)).
    Dasdv,
    Max,
    Min,
    /// Willison amplitude: count of |x[n+1]-x[n]| above the threshold.
    Wamp,
    /// Integrated absolute second difference.
    Iasd,
    /// Integrated absolute third difference.
    Iatd,
    /// Integrated exponential of absolute values.
    Ieav,
    /// Integrated absolute log values, sum |ln(|x| + T)|.
    Ialv,
    /// Integrated exponential.
    Ie,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; FEATURES_PER_LAYER] = [
        FeatureKind::Iemg,
        FeatureKind::Mav,
        FeatureKind::Ssi,
        FeatureKind::Rms,
        FeatureKind::Var,
        FeatureKind::Myop,
        FeatureKind::Wl,
        FeatureKind::Damv,
        FeatureKind::M2,
        FeatureKind::Dvarv,
        FeatureKind::Dasdv,
        FeatureKind::Max,
        FeatureKind::Min,
        FeatureKind::Wamp,
        FeatureKind::Iasd,
        FeatureKind::Iatd,
        FeatureKind::Ieav,
        FeatureKind::Ialv,
        FeatureKind::Ie,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Iemg => "IEMG",
            FeatureKind::Mav => "MAV",
            FeatureKind::Ssi => "SSI",
            FeatureKind::Rms => "RMS",
            FeatureKind::Var => "VAR",
            FeatureKind::Myop => "MYOP",
            FeatureKind::Wl => "WL",
            FeatureKind::Damv => "DAMV",
            FeatureKind::M2 => "M2",
            FeatureKind::Dvarv => "DVARV",
            FeatureKind::Dasdv => "DASDV",
            FeatureKind::Max => "MAX",
            FeatureKind::Min => "MIN",
            FeatureKind::Wamp => "WAMP",
            FeatureKind::Iasd => "IASD",
            FeatureKind::Iatd => "IATD",
            FeatureKind::Ieav => "IEAV",
            FeatureKind::Ialv => "IALV",
            FeatureKind::Ie => "IE",
        }
    }

    pub fn index(self) -> usize {
        FeatureKind::ALL.iter().position(|&k| k == self).unwrap()
    }

    /// Shortest input for which the formula's index range and divisor are valid.
    pub fn min_len(self) -> usize {
        match self {
            FeatureKind::Var
            | FeatureKind::Wl
            | FeatureKind::Damv
            | FeatureKind::M2
            | FeatureKind::Dasdv
            | FeatureKind::Wamp => 2,
            FeatureKind::Dvarv | FeatureKind::Iasd => 3,
            FeatureKind::Iatd => 4,
            _ => 1,
        }
    }
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Thresholds used by MYOP, WAMP and IALV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureParams {
    pub myop_threshold: f64,
    pub wamp_threshold: f64,
    pub ialv_offset: f64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            myop_threshold: 0.02,
            wamp_threshold: 0.02,
            ialv_offset: 1e-6,
        }
    }
}

impl FeatureParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("myop_threshold", self.myop_threshold),
            ("wamp_threshold", self.wamp_threshold),
            ("ialv_offset", self.ialv_offset),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Evaluates all 19 features on `x` in one pass, writing them to `out` in
/// registry order. Entries whose minimum length exceeds `x.len()` are NaN.
fn layer_features(x: &[f64], params: &FeatureParams, out: &mut [f64; FEATURES_PER_LAYER]) {
    let n = x.len();
    let nf = n as f64;
    let (mut sum_abs, mut sum_sq, mut above) = (0.0, 0.0, 0usize);
    let (mut max, mut min) = (f64::NEG_INFINITY, f64::INFINITY);
    let (mut ieav, mut ialv, mut ie) = (0.0, 0.0, 0.0);
    let (mut wl, mut m2, mut wamp, mut iasd, mut iatd) = (0.0, 0.0, 0usize, 0.0, 0.0);
    let (mut d_prev, mut d2_prev) = (0.0, 0.0);

    for (i, &v) in x.iter().enumerate() {
        let a = v.abs();
        sum_abs += a;
        sum_sq += v * v;
        if a > params.myop_threshold {
            above += 1;
        }
        max = max.max(v);
        min = min.min(v);
        ieav += a.min(EXP_CLAMP).exp();
        ialv += (a + params.ialv_offset).ln().abs();
        ie += v.clamp(-EXP_CLAMP, EXP_CLAMP).exp();
        if i >= 1 {
            let d = v - x[i - 1];
            wl += d.abs();
            m2 += d * d;
            if d.abs() > params.wamp_threshold {
                wamp += 1;
            }
            if i >= 2 {
                let d2 = d - d_prev;
                iasd += d2.abs();
                if i >= 3 {
                    iatd += (d2 - d2_prev).abs();
                }
                d2_prev = d2;
            }
            d_prev = d;
        }
    }

    let guard = |ok: bool, v: f64| if ok { v } else { f64::NAN };
    *out = [
        sum_abs,
        sum_abs / nf,
        sum_sq,
        (sum_sq / nf).sqrt(),
        guard(n >= 2, sum_sq / (nf - 1.0)),
        above as f64 / nf,
        guard(n >= 2, wl),
        guard(n >= 2, wl / (nf - 1.0)),
        guard(n >= 2, m2),
        guard(n >= 3, m2 / (nf - 2.0)),
        guard(n >= 2, (m2 / (nf - 1.0)).sqrt()),
        max,
        min,
        guard(n >= 2, wamp as f64),
        guard(n >= 3, iasd),
        guard(n >= 4, iatd),
        ieav,
        ialv,
        ie,
    ];
}

fn check_input(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::Empty("feature input sequence"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("feature input sequence".into()));
    }
    Ok(())
}

/// Computes one feature on a coefficient sequence.
pub fn compute_feature(kind: FeatureKind, x: &[f64], params: &FeatureParams) -> Result<f64> {
    check_input(x)?;
    if x.len() < kind.min_len() {
        return Err(Error::FeatureTooShort {
            feature: kind.name(),
            min: kind.min_len(),
            got: x.len(),
        });
    }
    let mut out = [0.0; FEATURES_PER_LAYER];
    layer_features(x, params, &mut out);
    let v = out[kind.index()];
    if !v.is_finite() {
        return Err(Error::NonFinite(format!("feature {kind}")));
    }
    Ok(v)
}

/// All 19 features of one layer, appended to `dst`.
pub fn extend_layer_features(x: &[f64], params: &FeatureParams, dst: &mut Vec<f64>) -> Result<()> {
    check_input(x)?;
    if x.len() < FeatureKind::Iatd.min_len() {
        return Err(Error::FeatureTooShort {
            feature: FeatureKind::Iatd.name(),
            min: FeatureKind::Iatd.min_len(),
            got: x.len(),
        });
    }
    let mut out = [0.0; FEATURES_PER_LAYER];
    layer_features(x, params, &mut out);
    if let Some(i) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("feature {}", FeatureKind::ALL[i])));
    }
    dst.extend_from_slice(&out);
    Ok(())
}

/// Length of the feature vector for a given configuration.
pub fn feature_len(channels: usize, levels: usize) -> usize {
    FEATURES_PER_LAYER * (levels + 1) * channels
}

/// Column names matching the feature vector layout, e.g. `ch0_cD1_IEMG`.
pub fn feature_names(channels: usize, levels: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(feature_len(channels, levels));
    for ch in 0..channels {
        for layer in 0..=levels {
            let layer_name = if layer < levels {
                format!("cD{}", layer + 1)
            } else {
                format!("cA{levels}")
            };
            for kind in FeatureKind::ALL {
                names.push(format!("ch{ch}_{layer_name}_{kind}"));
            }
        }
    }
    names
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    /// Start offset of the source window.
    pub start_index: usize,
    pub label: usize,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Decomposes every channel of `window` and applies the full feature bank
/// to each coefficient layer.
pub fn wavelet_feature_vector(window: &Window, levels: usize, params: &FeatureParams) -> Result<FeatureVector> {
    wavelet_feature_vector_with(window, levels, params, &db1_filters())
}

pub fn wavelet_feature_vector_with(
    window: &Window,
    levels: usize,
    params: &FeatureParams,
    filters: &FilterPair,
) -> Result<FeatureVector> {
    let mut values = Vec::with_capacity(feature_len(window.channels(), levels));
    for channel in &window.samples {
        let d = decompose(channel, levels, filters)?;
        for layer in d.layers() {
            extend_layer_features(layer, params, &mut values)?;
        }
    }
    Ok(FeatureVector {
        values,
        start_index: window.start_index,
        label: window.label,
    })
}

/// Per-dimension z-score parameters fitted on training features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    /// Population standard deviation, floored at [`STD_FLOOR`].
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn normalize(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "normalizer",
                expected: self.dim(),
                got: values.len(),
            });
        }
        Ok(values
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }
}

pub fn fit_normalizer(train_features: &[FeatureVector]) -> Result<Normalizer> {
    let first = train_features.first().ok_or(Error::Empty("training feature set"))?;
    let dim = first.len();
    if let Some(fv) = train_features.iter().find(|f| f.len() != dim) {
        return Err(Error::DimensionMismatch {
            context: "fit_normalizer",
            expected: dim,
            got: fv.len(),
        });
    }
    let count = train_features.len() as f64;
    let mut mean = vec![0.0; dim];
    for fv in train_features {
        for (m, v) in mean.iter_mut().zip(&fv.values) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut var = vec![0.0; dim];
    for fv in train_features {
        for ((s, v), m) in var.iter_mut().zip(&fv.values).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.into_iter().map(|s| (s / count).sqrt().max(STD_FLOOR)).collect();
    Ok(Normalizer { mean, std })
}

pub fn apply_normalizer(n: &Normalizer, fv: &FeatureVector) -> Result<FeatureVector> {
    Ok(FeatureVector {
        values: n.normalize(&fv.values)?,
        start_index: fv.start_index,
        label: fv.label,
    })
}
