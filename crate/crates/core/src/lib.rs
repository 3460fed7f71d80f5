//! Time-optimal, singularity-avoiding joint-space trajectory planning for
//! serial manipulators.
//!
//! The crate covers DH kinematics, singularity analysis of three arm
//! families, singularity-avoidance cost terms, a direct-transcription
//! trajectory solver and a Monte Carlo benchmark harness.

pub mod cost;
pub mod error;
pub mod kinematics;
pub mod model;
pub mod optimizer;
pub mod singularity;
pub mod bench;

pub use error::{BenchError, KinematicsError, ModelError, OptimizerError, SingularityError};
pub use kinematics::{
    end_effector_pose, forward_kinematics, geometric_jacobian, jacobian_ee_frame,
    rotation_to_quaternion, JacobianFrame, JacobianMatrix, Pose, Quaternion, Transform,
};
pub use model::{load_robot_model, resolve_robot, shipped_model, shipped_models, RobotFamily, RobotModel};
pub use singularity::{analyze, manipulability, SingularityReport};
pub use cost::{ObjectiveMode, SingularityObjectiveParams};
pub use optimizer::{
    build_problem, initial_guess, rest_to_rest, solve, SolveStatus, SolverOptions, TrajectoryProblem,
    TrajectorySolution,
};
pub use bench::{run_benchmark, BenchmarkConfig, BenchmarkRecord, BenchmarkRun, BenchmarkSummary};
