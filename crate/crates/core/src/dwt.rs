//! Multilevel discrete wavelet decomposition with quadrature-mirror filter
//! pairs. Only db1 (Haar) ships; `reconstruct` exists as the inverse used to
//! check the forward transform.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};

pub const DEFAULT_LEVELS: usize = 2;
pub const MAX_LEVELS: usize = 4;

/// Analysis filters of an orthonormal wavelet.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterPair {
    pub lowpass: Vec<f64>,
    pub highpass: Vec<f64>,
}

impl FilterPair {
    /// Builds the pair from a lowpass filter, deriving the highpass by the
    /// QMF relation `h[k] = (-1)^k * g[L-1-k]`.
    pub fn from_lowpass(lowpass: Vec<f64>) -> Result<Self> {
        if lowpass.is_empty() || !lowpass.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "filter length must be even and non-zero, got {}",
                lowpass.len()
            )));
        }
        let len = lowpass.len();
        let highpass = (0..len)
            .map(|k| {
                if k % 2 == 0 {
                    lowpass[len - 1 - k]
                } else {
                    -lowpass[len - 1 - k]
                }
            })
            .collect();
        Ok(Self { lowpass, highpass })
    }

    pub fn len(&self) -> usize {
        self.lowpass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lowpass.is_empty()
    }
}

pub fn db1_filters() -> FilterPair {
    FilterPair {
        lowpass: vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2],
        highpass: vec![FRAC_1_SQRT_2, -FRAC_1_SQRT_2],
    }
}

/// Coefficients of an `levels`-deep decomposition, finest detail first.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// `details[0]` is cD1 (finest), `details[levels-1]` is cD_L.
    pub details: Vec<Vec<f64>>,
    /// cA_L.
    pub approx: Vec<f64>,
}

impl Decomposition {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    /// Coefficient layers in feature order: cD1, ..., cD_L, cA_L.
    pub fn layers(&self) -> impl Iterator<Item = &[f64]> {
        self.details
            .iter()
            .map(Vec::as_slice)
            .chain(std::iter::once(self.approx.as_slice()))
    }

    pub fn energy(&self) -> f64 {
        self.layers().flat_map(|l| l.iter()).map(|v| v * v).sum()
    }
}

/// One analysis step: filter then keep every second output.
///
/// `approx[k] = sum_j lowpass[j] * input[2k + j]` (likewise for detail), with
/// periodic wrap for filters longer than 2. Returns `(approx, detail)`.
pub fn dwt_level(input: &[f64], filters: &FilterPair) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = input.len();
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "dwt_level needs a non-empty even-length input, got {n}"
        )));
    }
    let half = n / 2;
    let mut approx = Vec::with_capacity(half);
    let mut detail = Vec::with_capacity(half);
    if filters.len() == 2 {
        let (g0, g1) = (filters.lowpass[0], filters.lowpass[1]);
        let (h0, h1) = (filters.highpass[0], filters.highpass[1]);
        for pair in input.chunks_exact(2) {
            approx.push(g0 * pair[0] + g1 * pair[1]);
            detail.push(h0 * pair[0] + h1 * pair[1]);
        }
    } else {
        for k in 0..half {
            let (mut a, mut d) = (0.0, 0.0);
            for (j, (&g, &h)) in filters.lowpass.iter().zip(&filters.highpass).enumerate() {
                let x = input[(2 * k + j) % n];
                a += g * x;
                d += h * x;
            }
            approx.push(a);
            detail.push(d);
        }
    }
    Ok((approx, detail))
}

/// Repeats `dwt_level` on the approximation branch `levels` times.
pub fn decompose(input: &[f64], levels: usize, filters: &FilterPair) -> Result<Decomposition> {
    if levels == 0 {
        return Err(Error::InvalidArgument("levels must be >= 1".into()));
    }
    let multiple = 1usize << levels;
    if input.is_empty() || !input.len().is_multiple_of(multiple) {
        return Err(Error::NotDivisible {
            len: input.len(),
            multiple,
            levels,
        });
    }
    let mut details = Vec::with_capacity(levels);
    let mut approx = input.to_vec();
    for _ in 0..levels {
        let (a, d) = dwt_level(&approx, filters)?;
        details.push(d);
        approx = a;
    }
    Ok(Decomposition { details, approx })
}

/// Inverse of `decompose` for orthonormal filters: upsample by 2 and apply
/// the synthesis (time-reversed analysis) filters, coarsest level first.
pub fn reconstruct(d: &Decomposition, filters: &FilterPair) -> Result<Vec<f64>> {
    if d.details.is_empty() {
        return Err(Error::InvalidArgument("decomposition has no levels".into()));
    }
    let mut approx = d.approx.clone();
    for (level, detail) in d.details.iter().enumerate().rev() {
        if detail.len() != approx.len() {
            return Err(Error::DimensionMismatch {
                context: if level == d.details.len() - 1 {
                    "reconstruct: final detail vs approximation length"
                } else {
                    "reconstruct: detail length at level"
                },
                expected: approx.len(),
                got: detail.len(),
            });
        }
        let n = 2 * approx.len();
        let mut out = vec![0.0; n];
        for k in 0..approx.len() {
            for (j, (&g, &h)) in filters.lowpass.iter().zip(&filters.highpass).enumerate() {
                out[(2 * k + j) % n] += g * approx[k] + h * detail[k];
            }
        }
        approx = out;
    }
    Ok(approx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::SQRT_2;

    fn energy(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn db1_filter_properties() {
        let f = db1_filters();
        assert!((f.lowpass.iter().sum::<f64>() - SQRT_2).abs() < 1e-15);
        assert!((energy(&f.lowpass) - 1.0).abs() < 1e-15);
        assert!((energy(&f.highpass) - 1.0).abs() < 1e-15);
        assert_eq!(FilterPair::from_lowpass(f.lowpass.clone()).unwrap(), f);
    }

    #[test]
    fn qmf_rejects_odd_filter() {
        assert!(FilterPair::from_lowpass(vec![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn constant_and_alternating_inputs() {
        let f = db1_filters();
        let (a, d) = dwt_level(&[1.0, 1.0, 1.0, 1.0], &f).unwrap();
        assert_eq!(d, vec![0.0, 0.0]);
        assert!(a.iter().all(|v| (v - SQRT_2).abs() < 1e-15));
        let (a, d) = dwt_level(&[1.0, -1.0, 1.0, -1.0], &f).unwrap();
        assert_eq!(a, vec![0.0, 0.0]);
        assert!(d.iter().all(|v| (v - SQRT_2).abs() < 1e-15));
    }

    #[test]
    fn odd_length_rejected() {
        assert!(dwt_level(&[1.0, 2.0, 3.0], &db1_filters()).is_err());
    }

    #[test]
    fn window_of_400_two_levels() {
        let x: Vec<f64> = (0..400).map(|i| (i as f64 * 0.1).sin()).collect();
        let d = decompose(&x, 2, &db1_filters()).unwrap();
        assert_eq!(d.details[0].len(), 200);
        assert_eq!(d.details[1].len(), 100);
        assert_eq!(d.approx.len(), 100);
    }

    #[test]
    fn constant_input_two_levels() {
        let d = decompose(&[3.0; 16], 2, &db1_filters()).unwrap();
        assert!(d.details.iter().flatten().all(|v| v.abs() < 1e-14));
        assert!(d.approx.iter().all(|v| (v - 6.0).abs() < 1e-12));
    }

    #[test]
    fn divisibility_error_names_multiple() {
        let err = decompose(&[0.0; 6], 2, &db1_filters()).unwrap_err();
        assert!(matches!(err, Error::NotDivisible { multiple: 4, .. }));
        assert!(err.to_string().contains("multiple of 4"));
    }

    #[test]
    fn reconstruct_rejects_inconsistent_lengths() {
        let d = Decomposition {
            details: vec![vec![0.0; 4], vec![0.0; 3]],
            approx: vec![0.0; 2],
        };
        assert!(reconstruct(&d, &db1_filters()).is_err());
    }

    #[test]
    fn random_length_8_energy() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(-5.0..5.0)).collect();
        let (a, d) = dwt_level(&x, &db1_filters()).unwrap();
        // direct summation oracle
        let mut ea = 0.0;
        let mut ed = 0.0;
        for k in 0..4 {
            let s = (x[2 * k] + x[2 * k + 1]) / SQRT_2;
            let t = (x[2 * k] - x[2 * k + 1]) / SQRT_2;
            ea += s * s;
            ed += t * t;
        }
        assert!((energy(&a) - ea).abs() < 1e-12);
        assert!((energy(&d) - ed).abs() < 1e-12);
        assert!((ea + ed - energy(&x)).abs() < 1e-9);
    }

    fn signal(max_blocks: usize) -> impl Strategy<Value = (Vec<f64>, usize)> {
        (1usize..=3).prop_flat_map(move |levels| {
            (1usize..=max_blocks)
                .prop_flat_map(move |blocks| prop::collection::vec(-100.0f64..100.0, blocks << levels))
                .prop_map(move |x| (x, levels))
        })
    }

    proptest! {
        #[test]
        fn perfect_reconstruction((x, levels) in signal(32)) {
            let f = db1_filters();
            let d = decompose(&x, levels, &f).unwrap();
            let y = reconstruct(&d, &f).unwrap();
            let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            prop_assert!(err < 1e-9, "max abs error {err}");
            let ex = energy(&x);
            prop_assert!((d.energy() - ex).abs() <= 1e-9 * ex.max(1.0));
        }

        #[test]
        fn linearity((x, levels) in signal(16), seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = x.iter().map(|_| rng.random_range(-100.0..100.0)).collect();
            let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let f = db1_filters();
            let (dx, dy, dc) = (
                decompose(&x, levels, &f).unwrap(),
                decompose(&y, levels, &f).unwrap(),
                decompose(&combo, levels, &f).unwrap(),
            );
            for ((lx, ly), lc) in dx.layers().zip(dy.layers()).zip(dc.layers()) {
                for ((p, q), c) in lx.iter().zip(ly).zip(lc) {
                    let expect = a * p + b * q;
                    prop_assert!((c - expect).abs() <= 1e-12 * (a.abs() * p.abs() + b.abs() * q.abs()).max(1.0));
                }
            }
        }

        #[test]
        fn shift_by_two_shifts_level_one(x in prop::collection::vec(-10.0f64..10.0, 4..64)) {
            let n = x.len() & !1;
            let x = &x[..n];
            let shifted: Vec<f64> = std::iter::repeat_n(0.0, 2).chain(x[..n - 2].iter().copied()).collect();
            let f = db1_filters();
            let (a0, d0) = dwt_level(x, &f).unwrap();
            let (a1, d1) = dwt_level(&shifted, &f).unwrap();
            for k in 1..n / 2 {
                prop_assert_eq!(a1[k], a0[k - 1]);
                prop_assert_eq!(d1[k], d0[k - 1]);
            }
        }
    }
}
