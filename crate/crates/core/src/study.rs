//! Mesh refinement studies: warm-started solves on a sequence of meshes,
//! trajectory errors against a refined reference and empirical rates.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::interp::local_interpolate;
use crate::lie::GroupElement;
use crate::ocp::{BoundaryMode, SecondOrderProblem};
use crate::scalar::Real;
use crate::solver::{solve, SolveReport, SolverConfig};

/// Least-squares slope of `log e` against `log h`.
pub fn fit_slope<T: Real>(h: &[T], e: &[T]) -> Result<T> {
    if h.len() != e.len() || h.len() < 2 {
        return Err(Error::Size(format!(
            "a slope needs at least two (h, error) pairs, got {} and {}",
            h.len(),
            e.len()
        )));
    }
    if let Some(i) = h.iter().zip(e).position(|(h, e)| !(*h > T::zero()) || !(*e > T::zero())) {
        return Err(Error::InvalidParameter {
            name: "h",
            reason: format!("step {} and error {} must both be positive", h[i], e[i]),
        });
    }
    let n = T::from_count(h.len());
    let xs: Vec<T> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<T> = e.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().fold(T::zero(), |a, v| a + *v) / n;
    let my = ys.iter().fold(T::zero(), |a, v| a + *v) / n;
    let (sxy, sxx) = xs.iter().zip(&ys).fold((T::zero(), T::zero()), |(sxy, sxx), (x, y)| {
        (sxy + (*x - mx) * (*y - my), sxx + (*x - mx) * (*x - mx))
    });
    if !(sxx > T::zero()) {
        return Err(Error::InvalidParameter {
            name: "h",
            reason: "step sizes must not all be equal".into(),
        });
    }
    Ok(sxy / sxx)
}

/// Slopes between consecutive pairs, `log(e_i / e_{i+1}) / log(h_i / h_{i+1})`.
pub fn pairwise_slopes<T: Real>(h: &[T], e: &[T]) -> Vec<T> {
    h.windows(2)
        .zip(e.windows(2))
        .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect()
}

/// One solved mesh of a refinement sequence.
pub struct Level<T: Real> {
    pub problem: SecondOrderProblem<T>,
    pub report: SolveReport<T>,
}

/// Solves `problems` in order, each from the solution of the previous one
/// transferred by [`SecondOrderProblem::transfer_guess`] (the first from its
/// own initial guess). `tols[i]` overrides the tolerance of level `i`.
///
/// Stops at the first level that does not converge, naming its step size.
pub fn solve_sequence<T: Real>(
    problems: Vec<SecondOrderProblem<T>>,
    cfg: &SolverConfig<T>,
    tols: &[T],
) -> Result<Vec<Level<T>>> {
    let mut levels: Vec<Level<T>> = Vec::with_capacity(problems.len());
    for (i, problem) in problems.into_iter().enumerate() {
        let ocp = problem.to_discrete()?;
        let x0 = match levels.last() {
            Some(prev) => problem.transfer_guess(&prev.problem, &prev.report.x)?,
            None => ocp.initial_guess()?,
        };
        let mut c = *cfg;
        if let Some(t) = tols.get(i) {
            c.tol = *t;
        }
        let report = solve(&ocp, &x0, &c)?;
        if !report.converged {
            return Err(Error::NoConvergence {
                h: problem.h.as_f64(),
                residual: report.residual_inf.as_f64(),
                iterations: report.iterations,
            });
        }
        levels.push(Level { problem, report });
    }
    Ok(levels)
}

/// `problem` over the same horizon with `intervals` steps of length
/// `T / intervals` and boundary mode `mode`.
pub fn remeshed<T: Real>(problem: &SecondOrderProblem<T>, intervals: usize, mode: BoundaryMode) -> SecondOrderProblem<T> {
    let h = problem.horizon() / T::from_count(intervals.max(1));
    let n_steps = match mode {
        BoundaryMode::Literal => intervals,
        BoundaryMode::Staggered => intervals + 1,
    };
    let mut p = problem.clone().with_boundary_mode(mode);
    p.n_steps = n_steps;
    p.h = h;
    p
}

/// Number of steps of length `h` in the horizon of `problem`, or an error
/// naming `h` when `h` does not divide it.
pub fn intervals_for<T: Real>(problem: &SecondOrderProblem<T>, h: T) -> Result<usize> {
    let r = problem.horizon() / h;
    let n = r.round();
    if !(h > T::zero()) || (r - n).abs() > T::lit(1e-9) * n.max(T::one()) || n < T::one() {
        return Err(Error::InvalidParameter {
            name: "h",
            reason: format!("h = {h} does not divide the horizon {}", problem.horizon()),
        });
    }
    Ok(n.as_f64() as usize)
}

/// Solves `base` remeshed to each entry of `intervals` in turn (coarse to
/// fine) with warm starts. A staggered sequence is seeded by the literal
/// solve on its first mesh, whose interior nodes approximate the same curve.
pub fn solve_refinement<T: Real>(
    base: &SecondOrderProblem<T>,
    intervals: &[usize],
    cfg: &SolverConfig<T>,
    tols: &[T],
) -> Result<Vec<Level<T>>> {
    let mode = base.boundary_mode;
    let mut problems: Vec<_> = intervals.iter().map(|&n| remeshed(base, n, mode)).collect();
    let seeded = mode == BoundaryMode::Staggered && !intervals.is_empty();
    let mut tols = tols.to_vec();
    if seeded {
        problems.insert(0, remeshed(base, intervals[0], BoundaryMode::Literal));
        tols.insert(0, tols.first().copied().unwrap_or(cfg.tol));
    }
    let mut levels = solve_sequence(problems, cfg, &tols)?;
    if seeded {
        levels.remove(0);
    }
    Ok(levels)
}

/// Largest deviation of a discrete solution from a reference solution of the
/// same continuous problem, over configuration nodes, increments (at step
/// midpoints) and group nodes whose times lie in `[a T, b T]`. The reference
/// is evaluated by 6-point local interpolation.
pub fn trajectory_error<T: Real>(
    level: (&SecondOrderProblem<T>, &DVector<T>),
    reference: (&SecondOrderProblem<T>, &DVector<T>),
    interior: (T, T),
) -> Result<T> {
    let (pr, x) = level;
    let (rp, rx) = reference;
    let path = pr.to_discrete()?.scatter(x)?;
    let rpath = rp.to_discrete()?.scatter(rx)?;
    let half = T::lit(0.5);
    let width = 6;
    let horizon = pr.horizon();
    let (lo, hi) = (horizon * interior.0, horizon * interior.1);
    let slack = pr.h * T::lit(1e-9);
    let inside = |t: T| t >= lo - slack && t <= hi + slack;

    let rq_t: Vec<T> = (0..rpath.q.len()).map(|k| rp.node_time(k)).collect();
    let rq_v: Vec<&[T]> = rpath.q.iter().map(|v| v.as_slice()).collect();
    let rxi_t: Vec<T> = (0..rpath.xi.len()).map(|k| rp.node_time(k) + rp.h * half).collect();
    let rxi_v: Vec<&[T]> = rpath.xi.iter().map(|v| v.coords().as_slice()).collect();
    let rg_v: Vec<&[T]> = rpath.g.iter().map(|g| g.matrix().as_slice()).collect();

    let mut worst = T::zero();
    let mut max_diff = |a: &[T], b: &[T]| {
        for (u, v) in a.iter().zip(b) {
            worst = worst.max((*u - *v).abs());
        }
    };
    for (k, (q, g)) in path.q.iter().zip(&path.g).enumerate() {
        let t = pr.node_time(k);
        if inside(t) {
            max_diff(q.as_slice(), &local_interpolate(&rq_t, &rq_v, t, width)?);
            max_diff(g.matrix().as_slice(), &local_interpolate(&rq_t, &rg_v, t, width)?);
        }
    }
    for (k, xi) in path.xi.iter().enumerate() {
        let t = pr.node_time(k) + pr.h * half;
        if inside(t) {
            max_diff(xi.coords().as_slice(), &local_interpolate(&rxi_t, &rxi_v, t, width)?);
        }
    }
    Ok(worst)
}

/// Largest entry of `g_k - g_ref(k h)` over the nodes `g` spaced by `h`,
/// where `g_ref` covers the same horizon with a step `h_ref` dividing `h`.
pub fn group_node_deviation<T: Real>(
    h: T,
    g: &[GroupElement<T>],
    h_ref: T,
    g_ref: &[GroupElement<T>],
) -> Result<T> {
    let ratio = (h / h_ref).round();
    let stride = ratio.as_f64() as usize;
    if stride == 0 || ((h / h_ref) - ratio).abs() > T::lit(1e-9) * ratio {
        return Err(Error::InvalidParameter {
            name: "h",
            reason: format!("reference step {h_ref} does not divide {h}"),
        });
    }
    if g.is_empty() || g_ref.is_empty() || (g.len() - 1) * stride != g_ref.len() - 1 {
        return Err(Error::Size(format!(
            "{} nodes at step {h} and {} nodes at step {h_ref} cover different horizons",
            g.len(),
            g_ref.len()
        )));
    }
    Ok(g.iter().enumerate().fold(T::zero(), |worst, (k, a)| {
        (a.matrix() - g_ref[k * stride].matrix()).iter().fold(worst, |m, v| m.max(v.abs()))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn slope_of_a_power_law() {
        let h = [0.1, 0.05, 0.025, 0.0125];
        let e: Vec<f64> = h.iter().map(|h| 3.0 * h * h).collect();
        assert_relative_eq!(fit_slope(&h, &e).unwrap(), 2.0, epsilon = 1e-12);
        for s in pairwise_slopes(&h, &e) {
            assert_relative_eq!(s, 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn degenerate_fits_are_rejected() {
        assert!(fit_slope(&[0.1], &[1.0]).is_err());
        assert!(fit_slope(&[0.1, 0.1], &[1.0, 2.0]).is_err());
        assert!(fit_slope(&[0.1, 0.05], &[1.0, 0.0]).is_err());
    }
}
