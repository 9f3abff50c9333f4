//! Gradient-of-action oracle: the assembled residual of a discrete optimal
//! control problem must equal the central-difference gradient of the
//! augmented action `sum_w L_d(w) + lambda^w . Phi_d(w)` under variations
//! of the interior configuration nodes, trivialized variations of the
//! interior group nodes and variations of the multipliers.
//!
//! Also hosts seeded synthetic window functions that depend on every slot
//! of the window, including the base group point.

use std::fmt;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discrete::{DiscreteConstraintSet, DiscreteLagrangian, DiscretePath, Window};
use crate::error::Result;
use crate::lie::{AlgebraVector, GroupKind};
use crate::ocp::DiscreteOcp;
use crate::scalar::Real;

/// Central-difference step of the oracle.
pub const ORACLE_STEP: f64 = 1e-5;
/// Pass threshold on `|assembled - fd| / max(1, |fd|)`.
pub const ORACLE_TOLERANCE: f64 = 1e-6;

/// Residual block checked by the oracle. The terminal closure rows are not
/// a gradient and are left out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ResidualBlock {
    Configuration,
    Group,
    Constraint,
}

impl fmt::Display for ResidualBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Configuration => "configuration (M)",
            Self::Group => "group (G)",
            Self::Constraint => "constraint (Phi)",
        })
    }
}

/// Deliberate corruption of the assembled residual, used to check that the
/// oracle catches and locates errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Tamper {
    #[default]
    None,
    FlipSign(ResidualBlock),
}

/// Largest scaled discrepancy in one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockDiscrepancy {
    pub block: ResidualBlock,
    /// Node for configuration and group rows, window for constraint rows.
    pub node: usize,
    pub component: usize,
    pub assembled: f64,
    pub finite_difference: f64,
    /// `|assembled - fd| / max(1, |fd|)`.
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    /// One entry per non-empty block.
    pub blocks: Vec<BlockDiscrepancy>,
    pub tolerance: f64,
}

impl OracleReport {
    pub fn max_discrepancy(&self) -> f64 {
        self.blocks.iter().map(|b| b.discrepancy).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.discrepancy <= self.tolerance)
    }

    /// The block with the largest discrepancy.
    pub fn worst(&self) -> Option<&BlockDiscrepancy> {
        self.blocks
            .iter()
            .max_by(|a, b| a.discrepancy.total_cmp(&b.discrepancy))
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{verdict}: max discrepancy {:.3e} (tolerance {:.0e})", self.max_discrepancy(), self.tolerance)?;
        if let Some(w) = self.worst() {
            write!(
                f,
                "; worst in {} block at node {} component {}: assembled {:.6e}, finite difference {:.6e}",
                w.block, w.node, w.component, w.assembled, w.finite_difference
            )?;
        }
        Ok(())
    }
}

/// `sum_w L_d(w) + lambda^w . Phi_d(w)` over the windows of the problem.
pub fn augmented_action<T: Real>(ocp: &DiscreteOcp<T>, path: &DiscretePath<T>) -> T {
    let l = ocp.layout();
    let mut phi = vec![T::zero(); l.m];
    l.windows()
        .map(|w| {
            let win = path.window(w, l.k);
            let mut s = ocp.lagrangian.eval(&win);
            if l.m > 0 {
                ocp.constraints.eval(&win, &mut phi);
                s += phi.iter().zip(path.lambda[w].iter()).fold(T::zero(), |a, (p, m)| a + *p * *m);
            }
            s
        })
        .sum()
}

/// Compares the assembled residual at `path` with central differences of
/// the augmented action.
pub fn check_action_gradient<T: Real>(
    ocp: &DiscreteOcp<T>,
    path: &DiscretePath<T>,
    tamper: Tamper,
) -> Result<OracleReport> {
    let l = ocp.layout();
    let mut assembled = ocp.residual_of_path(path)?;
    let flip = |block: ResidualBlock, v: &mut DVector<T>, start: usize, len: usize| {
        if tamper == Tamper::FlipSign(block) {
            for i in start..start + len {
                v[i] = -v[i];
            }
        }
    };
    let c = l.counts();
    flip(ResidualBlock::Configuration, &mut assembled, 0, c.m_rows);
    flip(ResidualBlock::Group, &mut assembled, l.g_row_offset(), c.g_rows);
    flip(ResidualBlock::Constraint, &mut assembled, l.constraint_offset(), c.constraint_rows);

    let eps = T::lit(ORACLE_STEP);
    let two_eps = eps + eps;
    let mut worst: Vec<Option<BlockDiscrepancy>> = vec![None; 3];
    let mut record = |slot: usize, block, node, component, a: T, fd: T| {
        let (a, fd) = (a.as_f64(), fd.as_f64());
        let d = (a - fd).abs() / fd.abs().max(1.0);
        let d = if d.is_nan() { f64::INFINITY } else { d };
        if worst[slot].is_none_or(|w| d > w.discrepancy) {
            worst[slot] = Some(BlockDiscrepancy {
                block,
                node,
                component,
                assembled: a,
                finite_difference: fd,
                discrepancy: d,
            });
        }
    };

    for (s, j) in l.q_nodes().enumerate() {
        for comp in 0..l.n {
            let mut p = path.clone();
            p.q[j][comp] += eps;
            let up = augmented_action(ocp, &p);
            p.q[j][comp] -= two_eps;
            let down = augmented_action(ocp, &p);
            let fd = (up - down) / two_eps;
            record(0, ResidualBlock::Configuration, j, comp, assembled[s * l.n + comp], fd);
        }
    }

    let kind = path.kind;
    let triv = path.trivialization;
    let r = path.retraction;
    let moved = |j: usize, e: T, comp: usize| -> Result<DiscretePath<T>> {
        let mut g = path.g.clone();
        g[j] = triv.perturb(&r, &g[j], &AlgebraVector::basis(kind, comp).scale(e))?;
        DiscretePath::from_group_nodes(path.h, path.q.clone(), g, path.lambda.clone(), r, triv)
    };
    for (s, j) in l.q_nodes().enumerate() {
        for comp in 0..3 {
            let up = augmented_action(ocp, &moved(j, eps, comp)?);
            let down = augmented_action(ocp, &moved(j, -eps, comp)?);
            let fd = (up - down) / two_eps;
            record(1, ResidualBlock::Group, j, comp, assembled[l.g_row_offset() + s * 3 + comp], fd);
        }
    }

    for w in l.windows() {
        for comp in 0..l.m {
            let mut p = path.clone();
            p.lambda[w][comp] += eps;
            let up = augmented_action(ocp, &p);
            p.lambda[w][comp] -= two_eps;
            let down = augmented_action(ocp, &p);
            let fd = (up - down) / two_eps;
            record(
                2,
                ResidualBlock::Constraint,
                w,
                comp,
                assembled[l.constraint_offset() + w * l.m + comp],
                fd,
            );
        }
    }

    Ok(OracleReport {
        blocks: worst.into_iter().flatten().collect(),
        tolerance: ORACLE_TOLERANCE,
    })
}

/// Seeded point of the unknown space: the problem's initial guess with
/// configuration and increment entries moved by up to `scale` and
/// multipliers drawn from `[-1, 1]`.
pub fn random_unknowns<T: Real>(ocp: &DiscreteOcp<T>, seed: u64, scale: f64) -> Result<DVector<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = ocp.layout();
    let mut x = ocp.initial_guess()?;
    for i in 0..l.lambda_offset() {
        x[i] += T::lit(rng.gen_range(-scale..scale));
    }
    for i in l.lambda_offset()..x.len() {
        x[i] = T::lit(rng.gen_range(-1.0..1.0));
    }
    Ok(x)
}

/// Runs the oracle at the seeded random point of [`random_unknowns`].
pub fn oracle_at_random_point<T: Real>(ocp: &DiscreteOcp<T>, seed: u64, tamper: Tamper) -> Result<OracleReport> {
    let x = random_unknowns(ocp, seed, 0.2)?;
    let path = ocp.scatter(&x)?;
    check_action_gradient(ocp, &path, tamper)
}

/// Smooth random scalar function of window features.
#[derive(Debug, Clone, PartialEq)]
struct Features {
    weights: Vec<Vec<f64>>,
    phases: Vec<f64>,
    amplitudes: Vec<f64>,
    quadratic: Vec<f64>,
}

impl Features {
    fn new(rng: &mut ChaCha8Rng, dim: usize, terms: usize) -> Self {
        Self {
            weights: (0..terms)
                .map(|_| (0..dim).map(|_| rng.gen_range(-0.7..0.7)).collect())
                .collect(),
            phases: (0..terms).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            amplitudes: (0..terms).map(|_| rng.gen_range(0.2..1.0)).collect(),
            quadratic: (0..dim).map(|_| rng.gen_range(0.1..1.0)).collect(),
        }
    }

    fn eval<T: Real>(&self, z: &[T]) -> T {
        let mut s = T::zero();
        for ((w, p), a) in self.weights.iter().zip(&self.phases).zip(&self.amplitudes) {
            let arg = z.iter().zip(w).fold(T::lit(*p), |acc, (zi, wi)| acc + *zi * T::lit(*wi));
            s += T::lit(*a) * arg.sin();
        }
        let half = T::lit(0.5);
        z.iter().zip(&self.quadratic).fold(s, |acc, (zi, c)| acc + half * T::lit(*c) * *zi * *zi)
    }
}

/// Window features: configuration nodes, increments and the first two rows
/// of the base group point.
fn window_features<T: Real>(w: &Window<T>) -> Vec<T> {
    let mut z: Vec<T> = w.q.iter().flat_map(|q| q.iter().copied()).collect();
    z.extend(w.xi.iter().flat_map(|x| x.coords().iter().copied()));
    let g = w.g.matrix();
    for r in 0..2 {
        for c in 0..3 {
            z.push(g[(r, c)]);
        }
    }
    z
}

fn feature_dim(order: usize, n: usize) -> usize {
    (order + 1) * n + 3 * order + 6
}

/// Seeded discrete Lagrangian of any order that depends on all window
/// slots, including the base point, so it is not group invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLagrangian {
    order: usize,
    n: usize,
    kind: GroupKind,
    f: Features,
}

/// Seeded constraint set matching [`SyntheticLagrangian`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConstraints {
    f: Vec<Features>,
}

/// A random `(L_d, Phi_d)` pair with `m` constraints.
pub fn synthetic_pair(
    seed: u64,
    order: usize,
    n: usize,
    m: usize,
    kind: GroupKind,
) -> (SyntheticLagrangian, SyntheticConstraints) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = feature_dim(order, n);
    let l = SyntheticLagrangian {
        order,
        n,
        kind,
        f: Features::new(&mut rng, dim, 4),
    };
    let c = SyntheticConstraints {
        f: (0..m).map(|_| Features::new(&mut rng, dim, 2)).collect(),
    };
    (l, c)
}

impl<T: Real> DiscreteLagrangian<T> for SyntheticLagrangian {
    fn order(&self) -> usize {
        self.order
    }

    fn config_dim(&self) -> usize {
        self.n
    }

    fn kind(&self) -> GroupKind {
        self.kind
    }

    fn is_group_invariant(&self) -> bool {
        false
    }

    fn eval(&self, w: &Window<T>) -> T {
        w.h * self.f.eval(&window_features(w))
    }
}

impl<T: Real> DiscreteConstraintSet<T> for SyntheticConstraints {
    fn count(&self) -> usize {
        self.f.len()
    }

    fn is_group_invariant(&self) -> bool {
        false
    }

    fn eval(&self, w: &Window<T>, out: &mut [T]) {
        let z = window_features(w);
        for (o, f) in out.iter_mut().zip(&self.f) {
            *o = f.eval(&z);
        }
    }
}
