use std::ops::RangeInclusive;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::discrete::residual::{stationarity_rows, window_terms};
use crate::discrete::{
    spatial_momentum, DiscreteConstraintSet, DiscreteLagrangian, DiscretePath, Trivialization,
};
use crate::error::{Error, Result};
use crate::lie::{AlgebraVector, Covector, GroupElement};
use crate::retraction::Retraction;
use crate::scalar::Real;
use crate::solver::{fd_jacobian, NonlinearSystem};

pub use crate::solver::JacobianMode;

/// Sizes of the blocks of the flat unknown and residual vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Counts {
    pub q_unknowns: usize,
    pub xi_unknowns: usize,
    pub lambda_unknowns: usize,
    pub m_rows: usize,
    pub g_rows: usize,
    pub closure_rows: usize,
    pub constraint_rows: usize,
}

impl Counts {
    pub fn unknowns(&self) -> usize {
        self.q_unknowns + self.xi_unknowns + self.lambda_unknowns
    }

    pub fn equations(&self) -> usize {
        self.m_rows + self.g_rows + self.closure_rows + self.constraint_rows
    }
}

/// Flat layout for order `k`, `N` steps, `dim M = n` and `m` constraints.
///
/// Unknowns: `[q_k .. q_{N-k} | xi_{k-1} .. xi_{N-k} | lambda^0 .. lambda^{N-k}]`,
/// each node stored contiguously (strides `n`, `3`, `m`).
///
/// Residual: `[M rows k..N-k | G rows k..N-k | closure | Phi windows 0..N-k]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub n_steps: usize,
}

const ALG: usize = 3;

impl Layout {
    pub fn q_nodes(&self) -> RangeInclusive<usize> {
        self.k..=self.n_steps - self.k
    }

    pub fn xi_nodes(&self) -> RangeInclusive<usize> {
        self.k - 1..=self.n_steps - self.k
    }

    pub fn windows(&self) -> RangeInclusive<usize> {
        0..=self.n_steps - self.k
    }

    fn stationarity_count(&self) -> usize {
        self.n_steps - 2 * self.k + 1
    }

    pub fn counts(&self) -> Counts {
        let s = self.stationarity_count();
        let windows = self.n_steps - self.k + 1;
        Counts {
            q_unknowns: self.n * s,
            xi_unknowns: ALG * (s + 1),
            lambda_unknowns: self.m * windows,
            m_rows: self.n * s,
            g_rows: ALG * s,
            closure_rows: ALG,
            constraint_rows: self.m * windows,
        }
    }

    pub fn xi_offset(&self) -> usize {
        self.counts().q_unknowns
    }

    pub fn lambda_offset(&self) -> usize {
        let c = self.counts();
        c.q_unknowns + c.xi_unknowns
    }

    pub fn g_row_offset(&self) -> usize {
        self.counts().m_rows
    }

    pub fn closure_offset(&self) -> usize {
        let c = self.counts();
        c.m_rows + c.g_rows
    }

    pub fn constraint_offset(&self) -> usize {
        self.closure_offset() + ALG
    }

    /// Flat index of `q_node[c]`.
    pub fn q_index(&self, node: usize, c: usize) -> usize {
        (node - self.k) * self.n + c
    }

    pub fn xi_index(&self, node: usize, c: usize) -> usize {
        self.xi_offset() + (node + 1 - self.k) * ALG + c
    }

    pub fn lambda_index(&self, window: usize, c: usize) -> usize {
        self.lambda_offset() + window * self.m + c
    }

    /// Block, node and component of an unknown.
    fn locate(&self, col: usize) -> (Block, usize, usize) {
        if col < self.xi_offset() {
            (Block::Q, self.k + col / self.n, col % self.n)
        } else if col < self.lambda_offset() {
            let i = col - self.xi_offset();
            (Block::Xi, self.k - 1 + i / ALG, i % ALG)
        } else {
            let i = col - self.lambda_offset();
            (Block::Lambda, i / self.m, i % self.m)
        }
    }

    /// Residual rows, outside the closure block, that can depend on an
    /// unknown attached to node (or window) `p`: stationarity nodes and
    /// constraint windows within distance `k`.
    fn footprint(&self, p: usize) -> Vec<usize> {
        let mut rows = Vec::new();
        let lo = p.saturating_sub(self.k);
        let hi = p + self.k;
        for j in lo.max(self.k)..=hi.min(self.n_steps - self.k) {
            let s = j - self.k;
            rows.extend((0..self.n).map(|c| s * self.n + c));
            rows.extend((0..ALG).map(|c| self.g_row_offset() + s * ALG + c));
        }
        for w in lo..=hi.min(self.n_steps - self.k) {
            rows.extend((0..self.m).map(|c| self.constraint_offset() + w * self.m + c));
        }
        rows
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Block {
    Q,
    Xi,
    Lambda,
}

/// Square root-finding system of a discrete constrained variational problem
/// with fixed boundary nodes and a terminal group condition.
#[derive(Clone)]
pub struct DiscreteOcp<T: Real> {
    pub lagrangian: Arc<dyn DiscreteLagrangian<T>>,
    pub constraints: Arc<dyn DiscreteConstraintSet<T>>,
    pub n_steps: usize,
    pub h: T,
    /// `q_0 .. q_{k-1}`.
    pub fixed_q_start: Vec<DVector<T>>,
    /// `q_{N-k+1} .. q_N`.
    pub fixed_q_end: Vec<DVector<T>>,
    /// `xi_0 .. xi_{k-2}`.
    pub fixed_xi_start: Vec<AlgebraVector<T>>,
    /// `xi_{N-k+1} .. xi_{N-1}`.
    pub fixed_xi_end: Vec<AlgebraVector<T>>,
    pub g0: GroupElement<T>,
    /// Target for `g_N`.
    pub g_target: GroupElement<T>,
    pub retraction: Retraction,
    pub trivialization: Trivialization,
}

impl<T: Real> DiscreteOcp<T> {
    pub fn layout(&self) -> Layout {
        Layout {
            n: self.lagrangian.config_dim(),
            m: self.constraints.count(),
            k: self.lagrangian.order(),
            n_steps: self.n_steps,
        }
    }

    pub fn counts(&self) -> Counts {
        self.layout().counts()
    }

    /// Checks the boundary arrays against the order and dimensions.
    pub fn validate(&self) -> Result<()> {
        let l = self.layout();
        if l.k == 0 || self.n_steps <= 2 * l.k {
            return Err(Error::Size(format!(
                "order-{} problems need N > {}, got N = {}",
                l.k,
                2 * l.k,
                self.n_steps
            )));
        }
        let sizes = [
            ("fixed_q_start", self.fixed_q_start.len(), l.k),
            ("fixed_q_end", self.fixed_q_end.len(), l.k),
            ("fixed_xi_start", self.fixed_xi_start.len(), l.k - 1),
            ("fixed_xi_end", self.fixed_xi_end.len(), l.k - 1),
        ];
        for (name, got, want) in sizes {
            if got != want {
                return Err(Error::Size(format!("{name} has {got} nodes, expected {want}")));
            }
        }
        if let Some(q) = self.fixed_q_start.iter().chain(&self.fixed_q_end).find(|q| q.len() != l.n) {
            return Err(Error::Size(format!(
                "boundary configuration has {} entries, expected {}",
                q.len(),
                l.n
            )));
        }
        let kind = self.lagrangian.kind();
        let kinds = self
            .fixed_xi_start
            .iter()
            .chain(&self.fixed_xi_end)
            .map(|x| x.kind())
            .chain([self.g0.kind(), self.g_target.kind()]);
        for found in kinds {
            if found != kind {
                return Err(Error::TagMismatch {
                    expected: kind,
                    found,
                });
            }
        }
        Ok(())
    }

    /// Flattens the interior unknowns of `path`.
    pub fn assemble_unknowns(&self, path: &DiscretePath<T>) -> Result<DVector<T>> {
        let l = self.layout();
        if path.steps() != self.n_steps || path.q.len() != self.n_steps + 1 {
            return Err(Error::Size(format!(
                "path has {} steps, problem has {}",
                path.steps(),
                self.n_steps
            )));
        }
        if l.m > 0 && (path.lambda.len() != l.n_steps - l.k + 1 || path.lambda.iter().any(|v| v.len() != l.m)) {
            return Err(Error::Size(format!(
                "path carries {} multiplier vectors, expected {} of length {}",
                path.lambda.len(),
                l.n_steps - l.k + 1,
                l.m
            )));
        }
        let mut x = DVector::zeros(l.counts().unknowns());
        for node in l.q_nodes() {
            if path.q[node].len() != l.n {
                return Err(Error::Size(format!("q_{node} has {} entries, expected {}", path.q[node].len(), l.n)));
            }
            for c in 0..l.n {
                x[l.q_index(node, c)] = path.q[node][c];
            }
        }
        for node in l.xi_nodes() {
            for c in 0..ALG {
                x[l.xi_index(node, c)] = path.xi[node].coords()[c];
            }
        }
        if l.m > 0 {
            for w in l.windows() {
                for c in 0..l.m {
                    x[l.lambda_index(w, c)] = path.lambda[w][c];
                }
            }
        }
        Ok(x)
    }

    fn check_len(&self, x: &DVector<T>) -> Result<Layout> {
        let l = self.layout();
        let want = l.counts().unknowns();
        if x.len() != want {
            return Err(Error::Size(format!("flat vector has {} entries, layout needs {want}", x.len())));
        }
        Ok(l)
    }

    /// Rebuilds the full path from the unknowns and the fixed boundary data;
    /// group nodes are reconstructed from `g0`.
    pub fn scatter(&self, x: &DVector<T>) -> Result<DiscretePath<T>> {
        let l = self.check_len(x)?;
        let kind = self.lagrangian.kind();
        let mut q = self.fixed_q_start.clone();
        for node in l.q_nodes() {
            q.push(DVector::from_fn(l.n, |c, _| x[l.q_index(node, c)]));
        }
        q.extend(self.fixed_q_end.iter().cloned());
        let mut xi = self.fixed_xi_start.clone();
        for node in l.xi_nodes() {
            xi.push(AlgebraVector::new(kind, std::array::from_fn(|c| x[l.xi_index(node, c)])));
        }
        xi.extend(self.fixed_xi_end.iter().copied());
        let lambda = if l.m > 0 {
            l.windows()
                .map(|w| DVector::from_fn(l.m, |c, _| x[l.lambda_index(w, c)]))
                .collect()
        } else {
            Vec::new()
        };
        DiscretePath::from_increments(self.h, q, xi, lambda, self.g0, self.retraction, self.trivialization)
    }

    /// Straight-line configuration guess, constant increments
    /// `tau^{-1}(g0^{-1} g_target) / (N h)` (or its right analogue) and zero
    /// multipliers.
    pub fn initial_guess(&self) -> Result<DVector<T>> {
        self.validate()?;
        let l = self.layout();
        let first = self.fixed_q_start.first();
        let last = self.fixed_q_end.last();
        let (qa, qb) = match (first, last) {
            (Some(a), Some(b)) => (a.clone(), b.clone()),
            _ => (DVector::zeros(l.n), DVector::zeros(l.n)),
        };
        let total = self.trivialization.increment(&self.g0, &self.g_target)?;
        // constant increments along the one-parameter subgroup through the
        // target: tau(h xi) is the N-th root of the total increment
        let root = total.log().scale(T::one() / T::from_count(self.n_steps)).exp();
        let xi = self.retraction.tau_inv(&root)?.scale(T::one() / self.h);
        let mut x = DVector::zeros(l.counts().unknowns());
        let n_f = T::from_count(self.n_steps);
        for node in l.q_nodes() {
            let s = T::from_count(node) / n_f;
            for c in 0..l.n {
                x[l.q_index(node, c)] = qa[c] + (qb[c] - qa[c]) * s;
            }
        }
        for node in l.xi_nodes() {
            for c in 0..ALG {
                x[l.xi_index(node, c)] = xi.coords()[c];
            }
        }
        Ok(x)
    }

    /// `tau^{-1}` of the terminal mismatch, formed literally as
    /// `tau(h xi_{N-1})^{-1} .. tau(h xi_0)^{-1} g0^{-1} g_target` (left) or
    /// `g_target g0^{-1} tau(h xi_0)^{-1} .. tau(h xi_{N-1})^{-1}` (right).
    pub fn closure(&self, xi: &[AlgebraVector<T>]) -> Result<AlgebraVector<T>> {
        let r = &self.retraction;
        let mut acc = match self.trivialization {
            Trivialization::Left => self.g0.inverse().compose(&self.g_target)?,
            Trivialization::Right => self.g_target.compose(&self.g0.inverse())?,
        };
        for x in xi {
            let w_inv = r.tau(&x.scale(self.h)).inverse();
            acc = match self.trivialization {
                Trivialization::Left => w_inv.compose(&acc)?,
                Trivialization::Right => acc.compose(&w_inv)?,
            };
        }
        r.tau_inv(&acc).map_err(|e| Error::RetractionSingularAt {
            index: xi.len(),
            source: Box::new(e),
        })
    }

    /// Residual rows other than the closure, with the closure block left at
    /// zero.
    fn local_residual(&self, path: &DiscretePath<T>, out: &mut DVector<T>) {
        let l = self.layout();
        let terms = window_terms(self.lagrangian.as_ref(), self.constraints.as_ref(), path, l.windows());
        for (s, j) in l.q_nodes().enumerate() {
            let (dq, dg) = stationarity_rows(l.k, path, &terms.grads, j);
            out.rows_mut(s * l.n, l.n).copy_from(&dq);
            for c in 0..ALG {
                out[l.g_row_offset() + s * ALG + c] = dg.coords()[c];
            }
        }
        if l.m > 0 {
            for (w, v) in terms.phi.iter().enumerate() {
                out.rows_mut(l.constraint_offset() + w * l.m, l.m).copy_from(v);
            }
        }
    }

    /// Full residual of a path whose nodes match this problem.
    pub fn residual_of_path(&self, path: &DiscretePath<T>) -> Result<DVector<T>> {
        let l = self.layout();
        let mut out = DVector::zeros(l.counts().equations());
        self.local_residual(path, &mut out);
        let c = self.closure(&path.xi)?;
        for i in 0..ALG {
            out[l.closure_offset() + i] = c.coords()[i];
        }
        Ok(out)
    }

    /// Largest constraint value over all windows.
    pub fn constraint_violation(&self, path: &DiscretePath<T>) -> T {
        let l = self.layout();
        let mut v = vec![T::zero(); l.m];
        let mut worst = T::zero();
        for w in l.windows() {
            self.constraints.eval(&path.window(w, l.k), &mut v);
            worst = v.iter().fold(worst, |a, x| a.max(x.abs()));
        }
        worst
    }

    /// Spatial momentum of every step: the derivative of the augmented action
    /// with respect to `xi_k`, pulled back through `dtau^{-1}` and transported
    /// to the identity (see [`spatial_momentum`]). Constant along solutions
    /// when the Lagrangian is group invariant and unconstrained.
    pub fn step_momenta(&self, path: &DiscretePath<T>) -> Result<Vec<Covector<T>>> {
        let l = self.layout();
        let kind = self.lagrangian.kind();
        let terms = window_terms(self.lagrangian.as_ref(), self.constraints.as_ref(), path, l.windows());
        let mut dl = vec![Covector::zero(kind); self.n_steps];
        for (w, g) in l.windows().zip(&terms.grads) {
            for (i, c) in g.xi.iter().enumerate() {
                dl[w + i] = dl[w + i] + *c;
            }
        }
        dl.iter()
            .enumerate()
            .map(|(k, d)| spatial_momentum(&self.retraction, self.trivialization, &path.g[k], &path.xi[k], d, self.h))
            .collect()
    }

    /// Discrete action `sum_w L_d(window w)`.
    pub fn action(&self, path: &DiscretePath<T>) -> T {
        let l = self.layout();
        l.windows().map(|w| self.lagrangian.eval(&path.window(w, l.k))).sum()
    }

    fn structured_applicable(&self) -> bool {
        self.lagrangian.is_group_invariant() && self.constraints.is_group_invariant()
    }

    /// Jacobian from grouped central differences: unknowns of the same
    /// block and component whose nodes are congruent modulo `2k + 1` never
    /// touch a common stationarity or constraint row, so one pair of residual
    /// evaluations serves the whole group. Closure rows are differenced per
    /// increment column. Valid only when neither the Lagrangian nor the
    /// constraints depend on the base group point, since the residual rows
    /// then ignore the reconstructed nodes.
    pub fn structured_jacobian(&self, x: &DVector<T>, rel_step: T) -> Result<DMatrix<T>> {
        let l = self.check_len(x)?;
        let counts = l.counts();
        let period = 2 * l.k + 1;
        let mut groups: Vec<(Block, usize, usize, Vec<usize>)> = Vec::new();
        for col in 0..counts.unknowns() {
            let (block, node, comp) = l.locate(col);
            let key = (block, comp, node % period);
            match groups.iter_mut().find(|g| (g.0, g.1, g.2) == key) {
                Some(g) => g.3.push(col),
                None => groups.push((block, comp, node % period, vec![col])),
            }
        }
        let step_of = |j: usize| rel_step * x[j].abs().max(T::one());
        let eval_local = |y: &DVector<T>| -> Result<DVector<T>> {
            let path = self.scatter(y)?;
            let mut out = DVector::zeros(counts.equations());
            self.local_residual(&path, &mut out);
            Ok(out)
        };
        let blocks: Vec<Result<Vec<(usize, Vec<(usize, T)>)>>> = groups
            .par_iter()
            .map(|(_, _, _, cols)| {
                let mut plus = x.clone();
                let mut minus = x.clone();
                for &j in cols {
                    plus[j] += step_of(j);
                    minus[j] -= step_of(j);
                }
                let fp = eval_local(&plus)?;
                let fm = eval_local(&minus)?;
                Ok(cols
                    .iter()
                    .map(|&j| {
                        let (_, node, _) = l.locate(j);
                        let s = step_of(j);
                        let entries = l
                            .footprint(node)
                            .into_iter()
                            .map(|row| (row, (fp[row] - fm[row]) / (s + s)))
                            .collect();
                        (j, entries)
                    })
                    .collect())
            })
            .collect();
        let mut jac = DMatrix::zeros(counts.equations(), counts.unknowns());
        for block in blocks {
            for (col, entries) in block? {
                for (row, v) in entries {
                    jac[(row, col)] = v;
                }
            }
        }
        // closure rows depend on the increments only
        let full_xi = |y: &DVector<T>| -> Vec<AlgebraVector<T>> {
            let kind = self.lagrangian.kind();
            let mut xi = self.fixed_xi_start.clone();
            for node in l.xi_nodes() {
                xi.push(AlgebraVector::new(kind, std::array::from_fn(|c| y[l.xi_index(node, c)])));
            }
            xi.extend(self.fixed_xi_end.iter().copied());
            xi
        };
        let base = full_xi(x);
        let cols: Vec<Result<(usize, DVector<T>)>> = (l.xi_offset()..l.lambda_offset())
            .into_par_iter()
            .map(|j| {
                let (_, node, comp) = l.locate(j);
                let s = step_of(j);
                let mut xp = base.clone();
                let mut xm = base.clone();
                xp[node].coords_mut()[comp] += s;
                xm[node].coords_mut()[comp] -= s;
                let d = (self.closure(&xp)?.coords() - self.closure(&xm)?.coords()) / (s + s);
                Ok((j, DVector::from_column_slice(d.as_slice())))
            })
            .collect();
        for c in cols {
            let (j, d) = c?;
            jac.view_mut((l.closure_offset(), j), (ALG, 1)).copy_from(&d);
        }
        if let Some(p) = jac.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain {
                index: p / counts.equations().max(1),
                context: "structured Jacobian column",
            });
        }
        Ok(jac)
    }
}

impl<T: Real> NonlinearSystem<T> for DiscreteOcp<T> {
    fn dim(&self) -> usize {
        self.counts().unknowns()
    }

    fn residual(&self, x: &DVector<T>) -> Result<DVector<T>> {
        let path = self.scatter(x)?;
        self.residual_of_path(&path)
    }

    fn jacobian(&self, x: &DVector<T>, mode: JacobianMode, fd_step: T) -> Result<DMatrix<T>> {
        match mode {
            JacobianMode::ModelSupplied if self.structured_applicable() => self.structured_jacobian(x, fd_step),
            _ => fd_jacobian(&|y: &DVector<T>| self.residual(y), x, fd_step),
        }
    }
}
