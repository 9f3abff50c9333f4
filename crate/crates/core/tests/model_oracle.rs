use geomvi::discrete::Trivialization;
use geomvi::models::{ball_plate_problem, se2_vehicle_problem, BallPlateParams, Omega, Se2VehicleParams};
use geomvi::ocp::BoundaryData;
use geomvi::oracle::{oracle_at_random_point, Tamper};
use geomvi::{AlgebraVector, GroupElement, GroupKind};
use nalgebra::DVector;

fn se2_boundary() -> BoundaryData<f64> {
    BoundaryData {
        q0: DVector::from_vec(vec![0.0]),
        qd0: DVector::from_vec(vec![0.0]),
        xi0: AlgebraVector::zero(GroupKind::Se2),
        g0: GroupElement::identity(GroupKind::Se2),
        q_t: DVector::from_vec(vec![0.5]),
        qd_t: DVector::from_vec(vec![0.0]),
        xi_t: AlgebraVector::zero(GroupKind::Se2),
        g_t: GroupElement::se2(0.4, 1.0, 0.3),
    }
}

fn ball_boundary() -> BoundaryData<f64> {
    BoundaryData {
        q0: DVector::from_vec(vec![0.0, 0.0]),
        qd0: DVector::from_vec(vec![0.0, 0.0]),
        xi0: AlgebraVector::zero(GroupKind::So3),
        g0: GroupElement::identity(GroupKind::So3),
        q_t: DVector::from_vec(vec![0.2, 0.1]),
        qd_t: DVector::from_vec(vec![0.0, 0.0]),
        xi_t: AlgebraVector::zero(GroupKind::So3),
        g_t: GroupElement::rot_x(0.3),
    }
}

#[test]
fn se2_vehicle_residual_is_action_gradient() {
    for triv in [Trivialization::Left, Trivialization::Right] {
        let p = se2_vehicle_problem(Se2VehicleParams::default(), se2_boundary(), 7, 0.1)
            .unwrap()
            .with_trivialization(triv);
        let rep = oracle_at_random_point(&p.to_discrete().unwrap(), 42, Tamper::None).unwrap();
        assert!(rep.passed(), "{triv:?}: {rep}");
    }
}

#[test]
fn ball_plate_residual_is_action_gradient() {
    for omega in [Omega::Constant(1.0), Omega::sinusoid(1.0, 0.5, 2.0)] {
        for triv in [Trivialization::Left, Trivialization::Right] {
            let params = BallPlateParams { omega: omega.clone(), ..BallPlateParams::default() };
            let p = ball_plate_problem(params, ball_boundary(), 7, 0.1).unwrap().with_trivialization(triv);
            let rep = oracle_at_random_point(&p.to_discrete().unwrap(), 42, Tamper::None).unwrap();
            assert!(rep.passed(), "{triv:?}: {rep}");
        }
    }
}
