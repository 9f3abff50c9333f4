//! Local polynomial interpolation and differentiation on scattered nodes.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Fornberg's finite-difference weights: `w[d][j]` is the weight of
/// `f(x[j])` in the approximation of the `d`-th derivative at `z`,
/// `d = 0 ..= m`.
pub fn fornberg_weights<T: Real>(z: T, x: &[T], m: usize) -> Vec<Vec<T>> {
    let n = x.len();
    let mut c = vec![vec![T::zero(); n]; m + 1];
    if n == 0 {
        return c;
    }
    let mut c1 = T::one();
    let mut c4 = x[0] - z;
    c[0][0] = T::one();
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = T::one();
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (T::from_count(k) * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - T::from_count(k) * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Index range of the `width` sorted nodes nearest to `t`, clamped to the
/// ends of `ts`.
fn stencil<T: Real>(ts: &[T], t: T, width: usize) -> std::ops::Range<usize> {
    let n = ts.len();
    let width = width.min(n);
    let right = ts.partition_point(|&s| s < t);
    let start = right.saturating_sub(width / 2).min(n - width);
    start..start + width
}

/// Derivatives `0 ..= m` at `t` of the degree `width - 1` polynomial through
/// the `width` nodes nearest to `t`.
///
/// `ts` must be strictly increasing; `values[j]` is a sample vector at
/// `ts[j]`, all of the same length.
pub fn local_derivatives<T: Real>(
    ts: &[T],
    values: &[&[T]],
    t: T,
    width: usize,
    m: usize,
) -> Result<Vec<Vec<T>>> {
    if ts.len() != values.len() || ts.is_empty() {
        return Err(Error::Size(format!(
            "{} sample times for {} sample vectors",
            ts.len(),
            values.len()
        )));
    }
    if width < m + 1 {
        return Err(Error::Size(format!(
            "a {width}-point stencil cannot resolve derivative {m}"
        )));
    }
    if ts.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter {
            name: "ts",
            reason: "sample times must increase strictly".into(),
        });
    }
    let dim = values[0].len();
    let range = stencil(ts, t, width);
    let w = fornberg_weights(t, &ts[range.clone()], m);
    Ok((0..=m)
        .map(|d| {
            (0..dim)
                .map(|c| {
                    range
                        .clone()
                        .zip(&w[d])
                        .fold(T::zero(), |acc, (j, wj)| acc + *wj * values[j][c])
                })
                .collect()
        })
        .collect())
}

/// Value at `t` of the local interpolant of [`local_derivatives`].
pub fn local_interpolate<T: Real>(ts: &[T], values: &[&[T]], t: T, width: usize) -> Result<Vec<T>> {
    Ok(local_derivatives(ts, values, t, width, 0)?.swap_remove(0))
}
