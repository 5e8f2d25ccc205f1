//! Object-centric trajectory warping.
//!
//! A demonstrated trajectory is re-anchored to new start and end conditions
//! while its shape relative to the start-to-end chord is preserved: the
//! chord is rotated and scaled onto the new chord and every sample follows.

use crate::geom::{pose, rodrigues_align, slerp, Pose, Rotation, Vec3, EPS_DIR};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WarpError {
    #[error("trajectory needs at least 2 samples, got {0}")]
    TooShort(usize),
}

/// Chord rotation and scale shared by translation and rotation warping.
/// `None` when either chord is shorter than [`EPS_DIR`].
fn chord_alignment(first: &Vec3, last: &Vec3, s: &Vec3, e: &Vec3) -> Option<(Rotation, f64)> {
    let v1 = last - first;
    let v2 = e - s;
    let n1 = v1.norm();
    let n2 = v2.norm();
    if n1 < EPS_DIR || n2 < EPS_DIR {
        return None;
    }
    let a = rodrigues_align(&v1, &v2).ok()?;
    Some((a, n2 / n1))
}

/// Warp `tau` so it starts at `s` and ends at `e`.
///
/// When the demonstrated chord vanishes the residual shape is kept and a
/// straight ramp from `s` to `e` is added to it.
pub fn translation_warp(tau: &[Vec3], s: &Vec3, e: &Vec3) -> Result<Vec<Vec3>, WarpError> {
    let n = tau.len();
    if n < 2 {
        return Err(WarpError::TooShort(n));
    }
    let first = tau[0];
    let last = tau[n - 1];
    let v1 = last - first;
    let v2 = e - s;
    let norm = tau.iter().map(|p| p - first);
    let mut out: Vec<Vec3> = if v1.norm() < EPS_DIR {
        if v2.norm() < EPS_DIR {
            norm.map(|p| p + s).collect()
        } else {
            norm.enumerate().map(|(i, p)| s + v2 * (i as f64 / (n - 1) as f64) + p).collect()
        }
    } else {
        match chord_alignment(&first, &last, s, e) {
            Some((a, scale)) => norm.map(|p| (a * p) * scale + s).collect(),
            // zero scale: the whole shape collapses onto the start
            None => vec![*s; n],
        }
    };
    // pin the ends so they hold to rounding
    out[0] = *s;
    if v1.norm() >= EPS_DIR || v2.norm() >= EPS_DIR {
        out[n - 1] = *e;
    }
    Ok(out)
}

/// Rotation part of a pose warp. Falls back to an identity chord rotation
/// when either translation chord is degenerate.
pub fn rotation_warp(tau: &[Pose], s: &Pose, e: &Pose) -> Result<Vec<Rotation>, WarpError> {
    let n = tau.len();
    if n < 2 {
        return Err(WarpError::TooShort(n));
    }
    let a = chord_alignment(
        &tau[0].translation.vector,
        &tau[n - 1].translation.vector,
        &s.translation.vector,
        &e.translation.vector,
    )
    .map(|(a, _)| a)
    .unwrap_or_else(Rotation::identity);
    let r_prime: Vec<Rotation> = tau.iter().map(|p| a * p.rotation).collect();
    let first_inv = r_prime[0].inverse();
    let r_norm: Vec<Rotation> = r_prime.iter().map(|r| r * first_inv).collect();
    let start = s.rotation;
    let end = r_norm[n - 1].inverse() * e.rotation;
    let mut out: Vec<Rotation> =
        r_norm.iter().enumerate().map(|(i, rn)| rn * slerp(&start, &end, i as f64 / (n - 1) as f64)).collect();
    out[0] = s.rotation;
    out[n - 1] = e.rotation;
    Ok(out)
}

/// Translation and rotation warps recombined sample by sample.
pub fn pose_warp(tau: &[Pose], s: &Pose, e: &Pose) -> Result<Vec<Pose>, WarpError> {
    let translations: Vec<Vec3> = tau.iter().map(|p| p.translation.vector).collect();
    let t = translation_warp(&translations, &s.translation.vector, &e.translation.vector)?;
    let r = rotation_warp(tau, s, e)?;
    Ok(t.into_iter().zip(r).map(|(t, r)| pose(r, t)).collect())
}
