use geomvi::discrete::{spatial_momentum, Trivialization};
use geomvi::models::{
    ball_plate_problem, rigid_body_bvp, se2_vehicle_problem, BallPlateParams, FreeRigidBody, Se2VehicleParams,
};
use geomvi::ocp::{BoundaryData, BoundaryMode};
use geomvi::oracle::random_unknowns;
use geomvi::solver::NonlinearSystem;
use geomvi::study::fit_slope;
use geomvi::{AlgebraVector, Covector, GroupElement, GroupKind, Retraction};
use nalgebra::DVector;
use proptest::prelude::*;

fn kind_of(so3: bool) -> GroupKind {
    if so3 {
        GroupKind::So3
    } else {
        GroupKind::Se2
    }
}

fn triv_of(left: bool) -> Trivialization {
    if left {
        Trivialization::Left
    } else {
        Trivialization::Right
    }
}

fn boundary(kind: GroupKind, n: usize) -> BoundaryData<f64> {
    let r = Retraction::cayley();
    BoundaryData {
        q0: DVector::zeros(n),
        qd0: DVector::zeros(n),
        xi0: AlgebraVector::zero(kind),
        g0: GroupElement::identity(kind),
        q_t: DVector::from_element(n, 0.2),
        qd_t: DVector::zeros(n),
        xi_t: AlgebraVector::zero(kind),
        g_t: r.tau(&AlgebraVector::new(kind, [0.3, 0.1, -0.2])),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exp_log_round_trip(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0, so3 in any::<bool>()) {
        let xi = AlgebraVector::new(kind_of(so3), [a, b, c]);
        let back = xi.exp().log();
        prop_assert!((back.coords() - xi.coords()).norm() <= 1e-12);
    }

    #[test]
    fn truncated_exponential_inverts(a in -0.5f64..0.5, b in -0.5f64..0.5, c in -0.5f64..0.5,
                                     order in 2u32..8, so3 in any::<bool>()) {
        let r = Retraction::trunc_exp(order).unwrap();
        let xi = AlgebraVector::new(kind_of(so3), [a, b, c]);
        let g = r.tau(&xi);
        prop_assert!(g.membership_defect() <= 1e-12);
        prop_assert!((r.tau_inv(&g).unwrap().coords() - xi.coords()).norm() <= 1e-10);
    }

    #[test]
    fn coadjoint_is_a_representation(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0,
                                     d in -1.0f64..1.0, e in -1.0f64..1.0, f in -1.0f64..1.0, so3 in any::<bool>()) {
        let kind = kind_of(so3);
        let g = AlgebraVector::new(kind, [a, b, c]).exp();
        let h = AlgebraVector::new(kind, [c, a, b]).exp();
        let mu = Covector::new(kind, [d, e, f]);
        let back = g.coadjoint(&g.inverse().coadjoint(&mu).unwrap()).unwrap();
        prop_assert!((back.coords() - mu.coords()).norm() <= 1e-12);
        let gh = g.compose(&h).unwrap();
        let lhs = gh.coadjoint(&mu).unwrap();
        let rhs = h.coadjoint(&g.coadjoint(&mu).unwrap()).unwrap();
        prop_assert!((lhs.coords() - rhs.coords()).norm() <= 1e-12);
    }

    #[test]
    fn ocp_systems_are_square(n in 6usize..40, ball in any::<bool>(), staggered in any::<bool>()) {
        let p = if ball {
            ball_plate_problem(BallPlateParams::default(), boundary(GroupKind::So3, 2), n, 0.05).unwrap()
        } else {
            se2_vehicle_problem(Se2VehicleParams::default(), boundary(GroupKind::Se2, 1), n, 0.05).unwrap()
        };
        let mode = if staggered { BoundaryMode::Staggered } else { BoundaryMode::Literal };
        let ocp = p.with_boundary_mode(mode).to_discrete().unwrap();
        let c = ocp.counts();
        prop_assert_eq!(c.unknowns(), c.equations());
        if !ball {
            prop_assert_eq!(c.unknowns(), (n - 3) + 3 * (n - 2) + 2 * (n - 1));
        }
    }

    #[test]
    fn scatter_and_assemble_are_inverse(n in 6usize..20, seed in 0u64..1000, left in any::<bool>()) {
        let ocp = se2_vehicle_problem(Se2VehicleParams::default(), boundary(GroupKind::Se2, 1), n, 0.1)
            .unwrap()
            .with_trivialization(triv_of(left))
            .to_discrete()
            .unwrap();
        let x = random_unknowns(&ocp, seed, 0.3).unwrap();
        let back = ocp.assemble_unknowns(&ocp.scatter(&x).unwrap()).unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn constant_velocity_targets_are_solved_by_the_initial_guess(
        axis in 0usize..3, c in 0.1f64..0.8, n in 3usize..30, left in any::<bool>()
    ) {
        // rotation about a principal axis is a relative equilibrium
        let body = FreeRigidBody::principal(1.0, 2.0, 3.0).unwrap();
        let h = 0.05;
        let r = Retraction::cayley();
        let axes = [[c, 0.0, 0.0], [0.0, c, 0.0], [0.0, 0.0, c]];
        let xi = AlgebraVector::new(GroupKind::So3, axes[axis]);
        let w = r.tau(&xi.scale(h));
        let target = (0..n).fold(GroupElement::identity(GroupKind::So3), |g, _| g.compose(&w).unwrap());
        let ocp = rigid_body_bvp(body, GroupElement::identity(GroupKind::So3), target, n, h, r, triv_of(left)).unwrap();
        let x0 = ocp.initial_guess().unwrap();
        prop_assert!(ocp.residual(&x0).unwrap().amax() <= 1e-10);
    }

    #[test]
    fn spatial_momentum_of_a_relative_equilibrium_is_fixed(c in 0.1f64..1.0, steps in 1usize..20) {
        let body = FreeRigidBody::principal(1.0, 2.0, 3.0).unwrap();
        let h = 0.1;
        let r = Retraction::cayley();
        let xi = AlgebraVector::new(GroupKind::So3, [0.0, 0.0, c]);
        let s = body.body_momentum(&xi).scale(h);
        let mut g = GroupElement::identity(GroupKind::So3);
        let first = spatial_momentum(&r, Trivialization::Left, &g, &xi, &s, h).unwrap();
        for _ in 0..steps {
            g = g.compose(&r.tau(&xi.scale(h))).unwrap();
            let m = spatial_momentum(&r, Trivialization::Left, &g, &xi, &s, h).unwrap();
            prop_assert!((m.coords() - first.coords()).norm() <= 1e-12);
        }
    }

    #[test]
    fn slopes_of_power_laws_are_recovered(p in 0.5f64..4.0, scale in 1e-3f64..1e3, ratio in 1.5f64..3.0) {
        let h: Vec<f64> = (0..4).map(|i| 0.1 / ratio.powi(i)).collect();
        let e: Vec<f64> = h.iter().map(|h| scale * h.powf(p)).collect();
        prop_assert!((fit_slope(&h, &e).unwrap() - p).abs() <= 1e-9);
    }
}

#[test]
fn exp_of_a_half_turn_is_logged_back() {
    let g = GroupElement::rot_y(std::f64::consts::PI - 1e-6);
    let back = g.log().exp();
    assert!((back.matrix() - g.matrix()).norm() <= 1e-9);
    assert!((GroupElement::<f64>::identity(GroupKind::So3).log().coords()).norm() == 0.0);
}
