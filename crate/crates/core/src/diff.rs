//! Finite differences on (possibly nonuniform) time series.

use std::ops::{Add, Mul, Sub};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffError {
    #[error("order {order} differentiation needs at least {needed} samples, got {got}")]
    TooFewSamples {
        order: usize,
        needed: usize,
        got: usize,
    },
    #[error("order must be in 1..=3, got {0}")]
    BadOrder(usize),
    #[error("timestamps not strictly increasing at index {0}")]
    NonIncreasing(usize),
}

/// Values that can be differenced: scalars and fixed-size vectors.
pub trait Differentiable: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {}

impl<T> Differentiable for T where T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T> {}

/// One derivative pass. Second-order central stencil in the interior and
/// second-order one-sided stencils at both ends (two-point difference when
/// only two samples exist).
fn first_derivative<T: Differentiable>(series: &[(f64, T)]) -> Vec<(f64, T)> {
    let n = series.len();
    if n == 2 {
        let d = (series[1].1 - series[0].1) * (1.0 / (series[1].0 - series[0].0));
        return vec![(series[0].0, d), (series[1].0, d)];
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let d = if i == 0 {
            let (t0, f0) = series[0];
            let (t1, f1) = series[1];
            let (t2, f2) = series[2];
            let (h1, h2) = (t1 - t0, t2 - t1);
            f0 * (-(2.0 * h1 + h2) / (h1 * (h1 + h2)))
                + f1 * ((h1 + h2) / (h1 * h2))
                + f2 * (-h1 / (h2 * (h1 + h2)))
        } else if i == n - 1 {
            let (t0, f0) = series[n - 3];
            let (t1, f1) = series[n - 2];
            let (t2, f2) = series[n - 1];
            let (h1, h2) = (t1 - t0, t2 - t1);
            f0 * (h2 / (h1 * (h1 + h2)))
                + f1 * (-(h1 + h2) / (h1 * h2))
                + f2 * ((2.0 * h2 + h1) / (h2 * (h1 + h2)))
        } else {
            let (t0, f0) = series[i - 1];
            let (t1, f1) = series[i];
            let (t2, f2) = series[i + 1];
            let (h1, h2) = (t1 - t0, t2 - t1);
            f0 * (-h2 / (h1 * (h1 + h2))) + f1 * ((h2 - h1) / (h1 * h2)) + f2 * (h1 / (h2 * (h1 + h2)))
        };
        out.push((series[i].0, d));
    }
    out
}

/// Derivative of the given order (1 to 3), computed as repeated first
/// derivatives. Samples at indices `order..len-order` are free of end-stencil
/// contamination.
pub fn finite_difference<T: Differentiable>(
    series: &[(f64, T)],
    order: usize,
) -> Result<Vec<(f64, T)>, DiffError> {
    if !(1..=3).contains(&order) {
        return Err(DiffError::BadOrder(order));
    }
    if series.len() < order + 1 {
        return Err(DiffError::TooFewSamples {
            order,
            needed: order + 1,
            got: series.len(),
        });
    }
    if let Some(i) = series.windows(2).position(|w| !(w[1].0 > w[0].0)) {
        return Err(DiffError::NonIncreasing(i + 1));
    }
    let mut cur = first_derivative(series);
    for _ in 1..order {
        cur = first_derivative(&cur);
    }
    Ok(cur)
}

/// Centered moving average with a window that shrinks at the ends.
pub fn moving_average<T: Differentiable>(values: &[T], window: usize) -> Vec<T> {
    let half = window / 2;
    let n = values.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let mut acc = values[lo];
            for v in &values[lo + 1..=hi] {
                acc = acc + *v;
            }
            acc * (1.0 / (hi - lo + 1) as f64)
        })
        .collect()
}
