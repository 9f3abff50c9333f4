//! Damped Newton iteration for square nonlinear systems.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Where the Newton matrix comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JacobianMode {
    /// Dense central differences of the full residual, one column per
    /// unknown.
    FiniteDifference,
    /// Whatever the system supplies (structured differences for the optimal
    /// control systems); systems without a specialized Jacobian fall back to
    /// dense differences.
    #[default]
    ModelSupplied,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<T: Real> {
    /// Convergence threshold on the infinity norm of the residual.
    pub tol: T,
    pub max_iters: usize,
    /// Relative difference step; column `j` uses `fd_step * max(1, |x_j|)`.
    pub fd_step: T,
    pub backtrack: T,
    pub min_step: T,
    /// Armijo slope parameter on `|r|^2 / 2`.
    pub armijo: T,
    pub jacobian_mode: JacobianMode,
    /// Weights of the line-search merit function.
    pub merit: MeritScaling,
    /// What to do when the Jacobian is numerically singular.
    pub rank_policy: RankPolicy,
}

/// Merit function of the backtracking line search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeritScaling {
    /// `|r|^2 / 2`.
    #[default]
    Plain,
    /// `|D r|^2 / 2` with `D` the inverse row maxima of the first Jacobian.
    /// Useful when residual blocks carry different powers of the step size.
    RowEquilibrated,
}

/// Handling of numerically singular Jacobians.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankPolicy {
    /// Raise [`Error::SingularSystem`].
    #[default]
    Fail,
    /// Take the minimum-norm least-squares step from a truncated SVD. Meant
    /// for systems with a known gauge freedom, such as multipliers that are
    /// determined only up to a constant.
    MinimumNorm,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-10),
            max_iters: 200,
            fd_step: T::epsilon().sqrt(),
            backtrack: T::lit(0.5),
            min_step: T::lit(2f64.powi(-20)),
            armijo: T::lit(1e-4),
            jacobian_mode: JacobianMode::ModelSupplied,
            merit: MeritScaling::Plain,
            rank_policy: RankPolicy::Fail,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "tol",
                reason: format!("must be positive, got {}", self.tol),
            });
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iters",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.fd_step > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "fd_step",
                reason: format!("must be positive, got {}", self.fd_step),
            });
        }
        if !(self.backtrack > T::zero() && self.backtrack < T::one()) {
            return Err(Error::InvalidParameter {
                name: "backtrack",
                reason: format!("must lie in (0, 1), got {}", self.backtrack),
            });
        }
        Ok(())
    }
}

/// A square system `r(x) = 0`.
pub trait NonlinearSystem<T: Real>: Sync {
    fn dim(&self) -> usize;
    fn residual(&self, x: &DVector<T>) -> Result<DVector<T>>;
    /// Newton matrix at `x`; defaults to dense central differences.
    fn jacobian(&self, x: &DVector<T>, _mode: JacobianMode, fd_step: T) -> Result<DMatrix<T>> {
        fd_jacobian(&|y: &DVector<T>| self.residual(y), x, fd_step)
    }
}

/// Adapts a closure into a [`NonlinearSystem`].
pub struct FnSystem<F> {
    pub dim: usize,
    pub f: F,
}

impl<T: Real, F> NonlinearSystem<T> for FnSystem<F>
where
    F: Fn(&DVector<T>) -> Result<DVector<T>> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn residual(&self, x: &DVector<T>) -> Result<DVector<T>> {
        (self.f)(x)
    }
}

/// Index of the first non-finite entry.
pub fn first_non_finite<T: Real>(v: &DVector<T>) -> Option<usize> {
    v.iter().position(|x| !x.is_finite())
}

fn check_finite<T: Real>(v: &DVector<T>, context: &'static str) -> Result<()> {
    match first_non_finite(v) {
        Some(index) => Err(Error::Domain { index, context }),
        None => Ok(()),
    }
}

/// Central-difference Jacobian; column `j` uses the step
/// `rel_step * max(1, |x_j|)`. Columns are evaluated in parallel, each on a
/// private copy of `x`, and the result does not depend on scheduling.
pub fn fd_jacobian<T: Real>(
    f: &(dyn Fn(&DVector<T>) -> Result<DVector<T>> + Sync),
    x: &DVector<T>,
    rel_step: T,
) -> Result<DMatrix<T>> {
    let rows = f(x)?.len();
    let cols: Vec<Result<DVector<T>>> = (0..x.len())
        .into_par_iter()
        .map(|j| {
            let mut probe = x.clone();
            let step = rel_step * x[j].abs().max(T::one());
            probe[j] = x[j] + step;
            let fp = f(&probe)?;
            probe[j] = x[j] - step;
            let fm = f(&probe)?;
            Ok((fp - fm) / (step + step))
        })
        .collect();
    let mut jac = DMatrix::zeros(rows, x.len());
    for (j, col) in cols.into_iter().enumerate() {
        let col = col?;
        if col.len() != rows {
            return Err(Error::Size(format!(
                "residual length changed from {rows} to {}",
                col.len()
            )));
        }
        jac.set_column(j, &col);
    }
    if let Some(p) = jac.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain {
            index: p / rows.max(1),
            context: "finite-difference Jacobian column",
        });
    }
    Ok(jac)
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu<T: Real> {
    lu: DMatrix<T>,
    perm: Vec<usize>,
    singular: bool,
}

impl<T: Real> Lu<T> {
    pub fn new(a: &DMatrix<T>) -> Self {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "LU needs a square matrix");
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut singular = false;
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == T::zero() {
                singular = true;
                continue;
            }
            if p != k {
                lu.swap_rows(p, k);
                perm.swap(p, k);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                lu[(i, k)] /= pivot;
            }
            // column-major right-looking update; Newton matrices are mostly
            // banded, so zero multipliers are skipped
            let data = lu.as_mut_slice();
            for j in k + 1..n {
                let (left, right) = data.split_at_mut(j * n);
                let col_k = &left[k * n..(k + 1) * n];
                let col_j = &mut right[..n];
                let u = col_j[k];
                if u != T::zero() {
                    for i in k + 1..n {
                        col_j[i] -= col_k[i] * u;
                    }
                }
            }
        }
        Self { lu, perm, singular }
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &DVector<T>) -> DVector<T> {
        let n = self.lu.nrows();
        let mut x = DVector::from_fn(n, |i, _| b[self.perm[i]]);
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    /// Solves `A^T x = b`.
    pub fn solve_transpose(&self, b: &DVector<T>) -> DVector<T> {
        let n = self.lu.nrows();
        // U^T y = b
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for j in 0..i {
                s -= self.lu[(j, i)] * y[j];
            }
            y[i] = s / self.lu[(i, i)];
        }
        // L^T z = y
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..n {
                s -= self.lu[(j, i)] * y[j];
            }
            y[i] = s;
        }
        let mut x = DVector::zeros(n);
        for i in 0..n {
            x[self.perm[i]] = y[i];
        }
        x
    }

    /// Hager's estimate of `|A^{-1}|_1`.
    pub fn inverse_norm1_estimate(&self) -> T {
        let n = self.lu.nrows();
        if n == 0 {
            return T::zero();
        }
        let mut x = DVector::from_element(n, T::one() / T::from_count(n));
        let mut est = T::zero();
        for _ in 0..5 {
            let y = self.solve(&x);
            est = y.iter().map(|v| v.abs()).sum();
            let xi = y.map(|v| if v >= T::zero() { T::one() } else { -T::one() });
            let z = self.solve_transpose(&xi);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .fold((0, T::zero()), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
            if zmax <= z.dot(&x) {
                break;
            }
            x.fill(T::zero());
            x[j] = T::one();
        }
        est
    }
}

/// 1-norm condition estimate `|A|_1 |A^{-1}|_1`; infinite for exactly
/// singular matrices.
pub fn condition_estimate<T: Real>(a: &DMatrix<T>, lu: &Lu<T>) -> T {
    if lu.is_singular() {
        return T::infinity();
    }
    let norm = (0..a.ncols())
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<T>())
        .fold(T::zero(), T::max);
    norm * lu.inverse_norm1_estimate()
}

/// Row and column scalings `R`, `C` (powers of two, so exact) and the
/// scaled matrix `R A C` with every row and column maximum in `(1/2, 1]`
/// up to rounding of the scale factors.
pub fn equilibrate<T: Real>(a: &DMatrix<T>) -> (DVector<T>, DVector<T>, DMatrix<T>) {
    let pow2 = |m: T| {
        if m > T::zero() && m.is_finite() {
            T::lit(2.0).powi(-(m.log2().ceil().to_i32().unwrap_or(0)))
        } else {
            T::one()
        }
    };
    let rows = DVector::from_fn(a.nrows(), |i, _| pow2(a.row(i).iter().fold(T::zero(), |m, v| m.max(v.abs()))));
    let mut scaled = a.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row *= rows[i];
    }
    let cols = DVector::from_fn(a.ncols(), |j, _| {
        pow2(scaled.column(j).iter().fold(T::zero(), |m, v| m.max(v.abs())))
    });
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= cols[j];
    }
    (rows, cols, scaled)
}

/// Condition estimate of the equilibrated Newton matrix above which it is
/// declared singular.
pub const SINGULAR_CONDITION: f64 = 1e14;

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<T: Real> {
    pub iteration: usize,
    pub residual_inf: T,
    pub residual_l2: T,
    pub step_length: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport<T: Real> {
    /// Final iterate on convergence, best iterate otherwise.
    pub x: DVector<T>,
    pub converged: bool,
    pub iterations: usize,
    pub residual_inf: T,
    /// Infinity norm of the residual before each iteration, then at the end.
    pub history: Vec<IterationRecord<T>>,
}

fn inf_norm<T: Real>(v: &DVector<T>) -> T {
    v.iter().fold(T::zero(), |a, x| a.max(x.abs()))
}

fn half_sq<T: Real>(v: &DVector<T>) -> T {
    v.dot(v) * T::lit(0.5)
}

/// Damped Newton with Armijo backtracking on `|r|^2 / 2`.
///
/// Stops when `|r|_inf <= tol`. When the iteration budget runs out, or no
/// acceptable step above `min_step` exists, the best iterate is returned with
/// `converged = false`.
pub fn solve<T: Real>(
    sys: &dyn NonlinearSystem<T>,
    x0: &DVector<T>,
    cfg: &SolverConfig<T>,
) -> Result<SolveReport<T>> {
    cfg.validate()?;
    if x0.len() != sys.dim() {
        return Err(Error::Size(format!(
            "initial guess has {} entries for a system of dimension {}",
            x0.len(),
            sys.dim()
        )));
    }
    check_finite(x0, "initial guess")?;
    let mut x = x0.clone();
    let mut r = sys.residual(&x)?;
    if r.len() != x.len() {
        return Err(Error::Size(format!(
            "system is not square: {} residuals for {} unknowns",
            r.len(),
            x.len()
        )));
    }
    check_finite(&r, "residual")?;
    let mut best = (inf_norm(&r), x.clone());
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut stalled = false;
    let mut weights: Option<DVector<T>> = None;

    while iterations < cfg.max_iters {
        let norm = inf_norm(&r);
        if norm <= cfg.tol {
            break;
        }
        iterations += 1;
        let jac = sys.jacobian(&x, cfg.jacobian_mode, cfg.fd_step)?;
        let (rows, cols, scaled) = equilibrate(&jac);
        let lu = Lu::new(&scaled);
        let condition = condition_estimate(&scaled, &lu);
        let dx = if condition <= T::lit(SINGULAR_CONDITION) {
            -lu.solve(&r.component_mul(&rows)).component_mul(&cols)
        } else if cfg.rank_policy == RankPolicy::MinimumNorm {
            -minimum_norm_solve(&scaled, &r.component_mul(&rows))
                .ok_or(Error::SingularSystem {
                    iteration: iterations,
                    condition: condition.as_f64(),
                })?
                .component_mul(&cols)
        } else {
            return Err(Error::SingularSystem {
                iteration: iterations,
                condition: condition.as_f64(),
            });
        };
        let w = weights.get_or_insert_with(|| match cfg.merit {
            MeritScaling::Plain => DVector::from_element(r.len(), T::one()),
            MeritScaling::RowEquilibrated => DVector::from_fn(r.len(), |i, _| {
                let m = jac.row(i).iter().fold(T::zero(), |a, v| a.max(v.abs()));
                if m > T::zero() {
                    T::one() / m
                } else {
                    T::one()
                }
            }),
        });
        let merit = |r: &DVector<T>| half_sq(&r.component_mul(w));
        let phi0 = merit(&r);
        // along an exact Newton step the merit derivative is -2 phi0; the
        // minimum-norm step of a consistent system shares it
        let slope = -(phi0 + phi0);
        let mut t = T::one();
        let accepted = loop {
            let trial = &x + &dx * t;
            match sys.residual(&trial) {
                Ok(rt) if first_non_finite(&rt).is_none() => {
                    if merit(&rt) <= phi0 + cfg.armijo * t * slope {
                        break Some((trial, rt));
                    }
                }
                Ok(_) | Err(Error::RetractionSingular { .. }) | Err(Error::RetractionSingularAt { .. }) => {}
                Err(e) => return Err(e),
            }
            t *= cfg.backtrack;
            if t < cfg.min_step {
                break None;
            }
        };
        history.push(IterationRecord {
            iteration: iterations,
            residual_inf: norm,
            residual_l2: r.dot(&r).sqrt(),
            step_length: if accepted.is_some() { t } else { T::zero() },
        });
        match accepted {
            Some((xn, rn)) => {
                x = xn;
                r = rn;
                let n = inf_norm(&r);
                if n < best.0 {
                    best = (n, x.clone());
                }
            }
            None => {
                stalled = true;
                break;
            }
        }
    }
    let final_norm = inf_norm(&r);
    let converged = !stalled && final_norm <= cfg.tol;
    history.push(IterationRecord {
        iteration: iterations,
        residual_inf: final_norm,
        residual_l2: r.dot(&r).sqrt(),
        step_length: T::zero(),
    });
    let (residual_inf, x) = if converged { (final_norm, x) } else { best };
    Ok(SolveReport {
        x,
        converged,
        iterations,
        residual_inf,
        history,
    })
}

/// Minimum-norm least-squares solution of `a x = b`, discarding singular
/// values below `1e-12` of the largest. The decomposition runs in `f64`;
/// callers pass the equilibrated matrix so the cutoff is scale-free.
fn minimum_norm_solve<T: Real>(a: &DMatrix<T>, b: &DVector<T>) -> Option<DVector<T>> {
    let a = a.map(|v| v.as_f64());
    let b = b.map(|v| v.as_f64());
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let x = svd.solve(&b, smax * 1e-12).ok()?;
    Some(x.map(T::lit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn system<F>(dim: usize, f: F) -> FnSystem<F>
    where
        F: Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync,
    {
        FnSystem { dim, f }
    }

    #[test]
    fn linear_system_converges_in_one_iteration() {
        let c = DVector::from_vec(vec![1.0, -2.0, 3.5]);
        let sys = system(3, |x: &DVector<f64>| Ok(x - &c));
        let rep = solve(&sys, &DVector::zeros(3), &SolverConfig::default()).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1);
        assert_relative_eq!(rep.x, c, epsilon = 1e-12);
    }

    #[test]
    fn scalar_square_root_converges_quadratically() {
        let sys = system(1, |x: &DVector<f64>| Ok(DVector::from_vec(vec![x[0] * x[0] - 4.0])));
        let cfg = SolverConfig {
            tol: 1e-14,
            ..SolverConfig::default()
        };
        let rep = solve(&sys, &DVector::from_vec(vec![3.0]), &cfg).unwrap();
        assert!(rep.converged);
        assert_relative_eq!(rep.x[0], 2.0, epsilon = 1e-14);
        // errors from the residual history: |x^2 - 4| ~ 4 |x - 2|
        let errs: Vec<f64> = rep.history.iter().map(|h| h.residual_inf / 4.0).collect();
        for w in errs.windows(2) {
            if w[0] < 1e-1 && w[1] > 1e-13 {
                assert!(w[1] / (w[0] * w[0]) < 10.0, "{errs:?}");
            }
        }
    }

    #[test]
    fn fd_jacobian_recovers_linear_map() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.5, 0.0, 3.0, 1.0, 4.0, 0.0, -2.0]);
        let b = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let f = |x: &DVector<f64>| Ok(&a * x - &b);
        let jac = fd_jacobian(&f, &DVector::from_vec(vec![0.3, -7.0, 100.0]), 1e-6).unwrap();
        assert_relative_eq!(jac, a, epsilon = 1e-8);
    }

    #[test]
    fn fd_jacobian_is_deterministic() {
        let f = |x: &DVector<f64>| Ok(x.map(|v| v.sin() * v.exp()));
        let x = DVector::from_fn(40, |i, _| i as f64 * 0.1);
        let a = fd_jacobian(&f, &x, 1e-7).unwrap();
        let b = fd_jacobian(&f, &x, 1e-7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gradient_systems_have_symmetric_jacobians() {
        // r = grad of S(x) = sum x_i^4/4 + x_0 x_1 x_2
        let f = |x: &DVector<f64>| {
            let mut g = x.map(|v| v * v * v);
            g[0] += x[1] * x[2];
            g[1] += x[0] * x[2];
            g[2] += x[0] * x[1];
            Ok(g)
        };
        let jac = fd_jacobian(&f, &DVector::from_vec(vec![0.3, -1.2, 2.0]), 1e-7).unwrap();
        let asym = (&jac - jac.transpose()).amax() / jac.amax();
        assert!(asym <= 1e-4);
    }

    #[test]
    fn non_finite_residual_names_the_index() {
        let sys = system(3, |x: &DVector<f64>| {
            Ok(DVector::from_vec(vec![x[0], (x[1] - 1.0).ln(), x[2]]))
        });
        let err = solve(&sys, &DVector::zeros(3), &SolverConfig::default()).unwrap_err();
        assert_eq!(
            err,
            Error::Domain {
                index: 1,
                context: "residual"
            }
        );
    }

    #[test]
    fn singular_jacobian_names_the_iteration() {
        let sys = system(2, |x: &DVector<f64>| {
            let s = x[0] + x[1];
            Ok(DVector::from_vec(vec![s - 1.0, 2.0 * s - 2.0]))
        });
        let err = solve(&sys, &DVector::zeros(2), &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, Error::SingularSystem { iteration: 1, .. }), "{err:?}");
    }

    #[test]
    fn budget_exhaustion_returns_best_iterate() {
        let sys = system(1, |x: &DVector<f64>| Ok(DVector::from_vec(vec![x[0].atan()])));
        let cfg = SolverConfig {
            max_iters: 1,
            ..SolverConfig::default()
        };
        let rep = solve(&sys, &DVector::from_vec(vec![1.0]), &cfg).unwrap();
        assert!(!rep.converged);
        assert!(rep.residual_inf < 1.0f64.atan());
    }

    #[test]
    fn accepted_steps_never_increase_the_residual() {
        let sys = system(2, |x: &DVector<f64>| {
            Ok(DVector::from_vec(vec![x[0].exp() - 2.0 + x[1], x[1] * x[1] * x[1] - x[0]]))
        });
        let rep = solve(&sys, &DVector::from_vec(vec![3.0, -2.0]), &SolverConfig::default()).unwrap();
        assert!(rep.converged);
        for w in rep.history.windows(2) {
            assert!(w[1].residual_l2 <= w[0].residual_l2, "{:?}", rep.history);
        }
    }

    #[test]
    fn lu_condition_estimate_matches_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-3, 10.0]));
        let lu = Lu::new(&a);
        assert_relative_eq!(condition_estimate(&a, &lu), 1e4, max_relative = 1e-12);
        let x = lu.solve_transpose(&DVector::from_vec(vec![1.0, 1.0, 1.0]));
        assert_relative_eq!(x[1], 1e3, max_relative = 1e-12);
    }

    #[test]
    fn solve_is_bitwise_deterministic() {
        let sys = system(3, |x: &DVector<f64>| {
            Ok(DVector::from_vec(vec![
                x[0] * x[0] + x[1] - 3.0,
                x[1].sin() + x[2],
                x[2] * x[0] - 0.5,
            ]))
        });
        let x0 = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let a = solve(&sys, &x0, &SolverConfig::default()).unwrap();
        let b = solve(&sys, &x0, &SolverConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
