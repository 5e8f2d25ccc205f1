use super::PolicyError;
use crate::geom::{Pose, Rotation, Vec3};
use crate::oog::Oog;
use nalgebra::{Matrix2, Matrix3};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grip {
    Open,
    Close,
    Hold,
}

/// Move the end effector to `end_effector`, then apply `grip`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionStep {
    #[serde(with = "crate::io::pose")]
    pub end_effector: Pose,
    pub grip: Grip,
}

impl ActionStep {
    pub fn new(end_effector: Pose, grip: Grip) -> Self {
        Self { end_effector, grip }
    }
}

/// End-effector poses that keep the gripper rigidly attached to an object
/// following `tau`: `tau_i * inv(tau_1) * grasp`.
pub fn se3_from_pose_trajectory(tau: &[Pose], grasp: &Pose) -> Vec<Pose> {
    let Some(first) = tau.first() else {
        return Vec::new();
    };
    let inv = first.inverse();
    tau.iter().map(|p| p * inv * grasp).collect()
}

/// Top-down grasp at the centroid of the highest 15% of the cloud's height,
/// with the gripper x axis along the narrowest horizontal direction.
pub fn grasp_heuristic(cloud: &crate::geom::PointCloud) -> Option<Pose> {
    let (lo, hi) = cloud.bounds()?;
    let cut = hi.z - 0.15 * (hi.z - lo.z);
    let top: Vec<Vec3> = cloud.points.iter().filter(|p| p.z >= cut).copied().collect();
    let position = crate::geom::centroid(&top)?;

    let c = cloud.centroid()?;
    let cov = cloud.points.iter().fold(Matrix2::zeros(), |acc, p| {
        let d = nalgebra::Vector2::new(p.x - c.x, p.y - c.y);
        acc + d * d.transpose()
    });
    let eig = cov.symmetric_eigen();
    let e = eig.eigenvectors.column(eig.eigenvalues.imin()).into_owned();
    let mut x = Vec3::new(e.x, e.y, 0.0).normalize();
    if x.x < 0.0 || (x.x == 0.0 && x.y < 0.0) {
        x = -x;
    }
    let z = Vec3::new(0.0, 0.0, -1.0);
    let y = z.cross(&x);
    let r = nalgebra::Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]));
    Some(crate::geom::pose(Rotation::from_rotation_matrix(&r), position))
}

/// Grip commands around a motion: close at `close_at` first, hold along
/// the motion, open at its end.
pub(crate) fn grip_sequence(transforms: &[Pose], close_at: Option<Pose>, open_at_end: bool) -> Vec<ActionStep> {
    let mut out: Vec<ActionStep> = close_at.map(|g| ActionStep::new(g, Grip::Close)).into_iter().collect();
    out.extend(transforms.iter().map(|t| ActionStep::new(*t, Grip::Hold)));
    if open_at_end {
        if let Some(last) = out.last().map(|s| s.end_effector) {
            out.push(ActionStep::new(last, Grip::Open));
        }
    }
    out
}

/// Grip commands from the grasp nodes of `G_l` and `G_{l+1}`: a reach and
/// close when the grip closes over the step, an open when it opens.
pub fn attach_grip_commands(
    transforms: &[Pose],
    g0: &Oog,
    g1: &Oog,
    grasp_pose: Option<&Pose>,
) -> Result<Vec<ActionStep>, PolicyError> {
    let first = *transforms.first().ok_or(PolicyError::TrajectoryMismatch)?;
    let closes = !g0.grasp.grip_closed && g1.grasp.grip_closed;
    let opens = g0.grasp.grip_closed && !g1.grasp.grip_closed;
    let close_at = if closes {
        if g1.grasp.is_empty() {
            return Err(PolicyError::MissingGraspData);
        }
        Some(grasp_pose.copied().unwrap_or(first))
    } else {
        None
    };
    Ok(grip_sequence(transforms, close_at, opens))
}
