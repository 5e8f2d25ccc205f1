//! Per-step rigid transforms that carry a set of keypoints along their
//! warped trajectories.

use super::PolicyError;
use crate::geom::{centroid, kabsch_align, pose, Pose, Rotation, Vec3};
use crate::par::{map_range, Parallelism};
use nalgebra::{Matrix3, Matrix4, Quaternion, Vector4};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerMode {
    /// Adam on quaternion and translation parameters.
    #[default]
    Gradient,
    /// Closed-form least squares per step.
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub mode: OptimizerMode,
    pub rotation_only_steps: usize,
    pub joint_steps: usize,
    /// Adam step size at the start of each stage.
    pub learning_rate: f64,
    /// Step size reached at the end of each stage (geometric decay).
    pub final_learning_rate: f64,
    pub parallelism: Parallelism,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            mode: OptimizerMode::Gradient,
            rotation_only_steps: 200,
            joint_steps: 200,
            learning_rate: 0.05,
            final_learning_rate: 1e-5,
            parallelism: Parallelism::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let ok = self.rotation_only_steps > 0
            && self.joint_steps > 0
            && self.learning_rate > 0.0
            && self.final_learning_rate > 0.0
            && self.final_learning_rate <= self.learning_rate;
        if ok {
            Ok(())
        } else {
            Err(PolicyError::Config(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// `T_i` for every step `i -> i + 1` of the keypoint trajectories, each
/// minimizing `sum_k |tau_k(i+1) - T_i tau_k(i)|^2`.
pub fn optimize_se3_sequence(trajectories: &[Vec<Vec3>], cfg: &OptimizerConfig) -> Result<Vec<Pose>, PolicyError> {
    cfg.validate()?;
    if trajectories.len() < 3 {
        return Err(PolicyError::CollinearKeypoints);
    }
    let len = trajectories[0].len();
    if len < 2 || trajectories.iter().any(|t| t.len() != len) {
        return Err(PolicyError::TrajectoryMismatch);
    }
    let at = |i: usize| -> Vec<Vec3> { trajectories.iter().map(|t| t[i]).collect() };
    let first = at(0);
    match kabsch_align(&first, &first) {
        Ok(fit) if !fit.degenerate => {}
        _ => return Err(PolicyError::CollinearKeypoints),
    }
    let steps = map_range(cfg.parallelism, len - 1, |i| {
        let (a, b) = (at(i), at(i + 1));
        match cfg.mode {
            OptimizerMode::Oracle => kabsch_align(&a, &b).map(|f| f.pose).ok(),
            OptimizerMode::Gradient => Some(gradient_step(&a, &b, cfg)),
        }
    });
    steps.into_iter().map(|s| s.ok_or(PolicyError::CollinearKeypoints)).collect()
}

/// Root-mean-square keypoint residual of `t` mapping `a` onto `b`.
pub fn keypoint_rmse(t: &Pose, a: &[Vec3], b: &[Vec3]) -> f64 {
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(p, q)| (t * nalgebra::Point3::from(*p) - nalgebra::Point3::from(*q)).norm_squared())
        .sum();
    (sum / a.len() as f64).sqrt()
}

/// Symmetric matrix `N` with `sum_k b_k . (R(q) a_k) = q^T N q` for unit `q`
/// in `(w, x, y, z)` order.
fn horn_matrix(a: &[Vec3], b: &[Vec3]) -> Matrix4<f64> {
    let s: Matrix3<f64> = a.iter().zip(b).map(|(p, q)| p * q.transpose()).sum();
    let (sxx, sxy, sxz) = (s[(0, 0)], s[(0, 1)], s[(0, 2)]);
    let (syx, syy, syz) = (s[(1, 0)], s[(1, 1)], s[(1, 2)]);
    let (szx, szy, szz) = (s[(2, 0)], s[(2, 1)], s[(2, 2)]);
    Matrix4::new(
        sxx + syy + szz,
        syz - szy,
        szx - sxz,
        sxy - syx,
        syz - szy,
        sxx - syy - szz,
        sxy + syx,
        szx + sxz,
        szx - sxz,
        sxy + syx,
        -sxx + syy - szz,
        syz + szy,
        sxy - syx,
        szx + sxz,
        syz + szy,
        -sxx - syy + szz,
    )
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = Self::B1 * *m + (1.0 - Self::B1) * g;
            *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

/// Two-stage Adam fit in the centred parametrization
/// `T a = R (a - c) + c + t` with `c` the centroid of `a`: rotation alone
/// first, then rotation and translation jointly.
fn gradient_step(a: &[Vec3], b: &[Vec3], cfg: &OptimizerConfig) -> Pose {
    let k = a.len() as f64;
    let c = centroid(a).expect("non-empty");
    let ac: Vec<Vec3> = a.iter().map(|p| p - c).collect();
    let mut q = Vector4::new(1.0, 0.0, 0.0, 0.0);
    let mut t = Vec3::zeros();
    let lr_at = |step: usize, total: usize| {
        let u = step as f64 / (total.max(2) - 1) as f64;
        cfg.learning_rate * (cfg.final_learning_rate / cfg.learning_rate).powf(u)
    };
    let rotation = |q: &Vector4<f64>| Rotation::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]));
    // loss = mean |b - c - t - R a'|^2; for unit q the rotation-dependent
    // part is -2/k q^T N q with N built from a' and b - c - t
    let grad = |q: &Vector4<f64>, t: &Vec3| -> (Vector4<f64>, Vec3) {
        let bt: Vec<Vec3> = b.iter().map(|p| p - c - t).collect();
        let n = horn_matrix(&ac, &bt);
        // only the tangent part moves q on the unit sphere; Adam's per-axis
        // scaling would otherwise turn the radial part into a spurious drift
        let gq = n * q * (-4.0 / k);
        let gq = gq - q * gq.dot(q);
        let r = rotation(q);
        let gt = ac.iter().zip(&bt).map(|(p, q)| r * p - q).sum::<Vec3>() * (2.0 / k);
        (gq, gt)
    };

    let mut adam = Adam::new(4);
    for step in 0..cfg.rotation_only_steps {
        let (gq, _) = grad(&q, &t);
        let mut p = [q[0], q[1], q[2], q[3]];
        adam.step(&mut p, gq.as_slice(), lr_at(step, cfg.rotation_only_steps));
        q = Vector4::from(p).normalize();
    }
    let mut adam = Adam::new(7);
    for step in 0..cfg.joint_steps {
        let (gq, gt) = grad(&q, &t);
        let g: Vec<f64> = gq.iter().chain(gt.iter()).copied().collect();
        let mut p = [q[0], q[1], q[2], q[3], t.x, t.y, t.z];
        adam.step(&mut p, &g, lr_at(step, cfg.joint_steps));
        q = Vector4::new(p[0], p[1], p[2], p[3]).normalize();
        t = Vec3::new(p[4], p[5], p[6]);
    }
    let r = rotation(&q);
    pose(r, c + t - r * c)
}
