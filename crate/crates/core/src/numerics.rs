//! Shared quadrature and grid helpers.

use num_complex::Complex64;
use num_traits::Zero;
use std::ops::{Add, Mul};

/// Composite Simpson integration of uniformly spaced samples.
///
/// With an odd interval count the last interval falls back to a trapezoid.
/// Fewer than two samples integrate to zero.
pub(crate) fn simpson<T>(dx: f64, values: &[T]) -> T
where
    T: Copy + Zero + Add<Output = T> + Mul<f64, Output = T>,
{
    match values.len() {
        0 | 1 => T::zero(),
        2 => (values[0] + values[1]) * (0.5 * dx),
        n if (n - 1) % 2 == 0 => simpson_even(dx, values),
        n => {
            simpson_even(dx, &values[..n - 1])
                + (values[n - 2] + values[n - 1]) * (0.5 * dx)
        }
    }
}

fn simpson_even<T>(dx: f64, values: &[T]) -> T
where
    T: Copy + Zero + Add<Output = T> + Mul<f64, Output = T>,
{
    debug_assert!(values.len() >= 3 && (values.len() - 1) % 2 == 0);
    let last = values.len() - 1;
    let mut acc = values[0] + values[last];
    for (i, v) in values.iter().enumerate().take(last).skip(1) {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc = acc + *v * w;
    }
    acc * (dx / 3.0)
}

/// `n` evenly spaced points centered on zero (odd `n` puts a point exactly at
/// the origin, which the half-plane splits rely on).
pub(crate) fn symmetric_grid(half_span: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "grid needs at least two points");
    let mid = (n - 1) as f64 / 2.0;
    let dx = 2.0 * half_span / (n - 1) as f64;
    (0..n).map(|i| (i as f64 - mid) * dx).collect()
}

/// Splits an integral over a symmetric grid at the origin.
///
/// Returns `(negative_half, positive_half)`. A sample lying exactly on zero is
/// shared as the boundary of both Simpson sums; otherwise the straddling cell
/// is divided by linear interpolation.
pub(crate) fn split_at_origin(grid: &[f64], values: &[f64]) -> (f64, f64) {
    assert_eq!(grid.len(), values.len());
    let dx = grid[1] - grid[0];
    if let Some(zero_idx) = grid.iter().position(|&x| x.abs() < 1e-9 * dx) {
        let neg = simpson(dx, &values[..=zero_idx]);
        let pos = simpson(dx, &values[zero_idx..]);
        return (neg, pos);
    }
    // No exact origin sample: integrate the complete cells on each side and
    // split the cell containing zero with a linearly interpolated midpoint.
    let k = match grid.iter().position(|&x| x > 0.0) {
        Some(0) => return (0.0, simpson(dx, values)),
        None => return (simpson(dx, values), 0.0),
        Some(k) => k,
    };
    let (xl, xr) = (grid[k - 1], grid[k]);
    let (fl, fr) = (values[k - 1], values[k]);
    let f0 = fl + (fr - fl) * (-xl) / (xr - xl);
    let neg = simpson(dx, &values[..k]) + 0.5 * (-xl) * (fl + f0);
    let pos = 0.5 * xr * (f0 + fr) + simpson(dx, &values[k..]);
    (neg, pos)
}

#[allow(dead_code)]
pub(crate) fn simpson_complex(dx: f64, values: &[Complex64]) -> Complex64 {
    simpson(dx, values)
}
