//! Worked models: the SE(2) vehicle with a rotor, the ball on a rotating
//! plate, the free rigid body and a free particle used for exactness checks.

pub mod ball_plate;
pub mod free_particle;
pub mod rigid_body;
pub mod se2_vehicle;

pub use ball_plate::{
    ball_continuous_residual, ball_limit_residual, ball_limit_rows, ball_plate_problem, BallPlate, BallPlateParams, BallState, Omega, OmegaBlock,
};
pub use se2_vehicle::{se2_vehicle_problem, Se2Vehicle, Se2VehicleParams};
pub use free_particle::{free_particle_problem, straight_line_boundary, FreeParticle};
pub use rigid_body::{integrate_rigid_body, rigid_body_bvp, FreeRigidBody, RigidBodyTrajectory};
