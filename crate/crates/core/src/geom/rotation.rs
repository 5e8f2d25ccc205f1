use super::{GeomError, Rotation, Vec3, EPS_DIR};
use nalgebra::{Quaternion, Unit};

/// Rotation taking the direction of `v1` onto the direction of `v2`.
///
/// The rotation axis is `v1 x v2` and the angle `atan2(|v1 x v2|, v1 . v2)`.
/// Antiparallel inputs rotate by pi about the coordinate axis least aligned
/// with `v1`, projected orthogonal to `v1`. Ties prefer z, then y, then x.
pub fn rodrigues_align(v1: &Vec3, v2: &Vec3) -> Result<Rotation, GeomError> {
    let n1 = v1.norm();
    let n2 = v2.norm();
    if n1 <= EPS_DIR {
        return Err(GeomError::DegenerateDirection(n1));
    }
    if n2 <= EPS_DIR {
        return Err(GeomError::DegenerateDirection(n2));
    }
    let a = v1 / n1;
    let b = v2 / n2;
    let cross = a.cross(&b);
    let sin = cross.norm();
    let cos = a.dot(&b);
    if sin > 1e-12 {
        let axis = Unit::new_unchecked(cross / sin);
        return Ok(Rotation::from_axis_angle(&axis, sin.atan2(cos)));
    }
    if cos > 0.0 {
        return Ok(Rotation::identity());
    }
    let axes = [Vec3::z(), Vec3::y(), Vec3::x()];
    let mut best = 0;
    for i in 1..3 {
        if a.dot(&axes[i]).abs() < a.dot(&axes[best]).abs() {
            best = i;
        }
    }
    let ortho = axes[best] - a * a.dot(&axes[best]);
    let axis = Unit::new_normalize(ortho);
    Ok(Rotation::from_axis_angle(&axis, std::f64::consts::PI))
}

/// Geodesic interpolation along the shorter arc.
///
/// `u = 0` returns `r0` exactly; `u = 1` returns the rotation `r1`.
pub fn slerp(r0: &Rotation, r1: &Rotation, u: f64) -> Rotation {
    let q0 = r0.quaternion();
    let mut q1 = *r1.quaternion();
    let mut dot = q0.dot(&q1);
    if dot < 0.0 {
        q1 = -q1;
        dot = -dot;
    }
    if u <= 0.0 {
        return *r0;
    }
    if u >= 1.0 {
        return Rotation::new_unchecked(q1);
    }
    if dot > 1.0 - 1e-12 {
        let q = q0 * (1.0 - u) + q1 * u;
        return Rotation::new_normalize(q);
    }
    let theta = dot.min(1.0).acos();
    let sin = theta.sin();
    let w0 = ((1.0 - u) * theta).sin() / sin;
    let w1 = (u * theta).sin() / sin;
    Rotation::new_normalize(q0 * w0 + q1 * w1)
}

/// Angle in radians of the relative rotation `a^-1 b`.
pub fn geodesic_distance(a: &Rotation, b: &Rotation) -> f64 {
    let rel = a.inverse() * b;
    let q = rel.quaternion();
    2.0 * q.imag().norm().atan2(q.w.abs())
}

/// Quaternion with the double cover resolved to `w >= 0`.
pub fn canonical_quaternion(r: &Rotation) -> Quaternion<f64> {
    let q = *r.quaternion();
    if q.w < 0.0 || (q.w == 0.0 && first_nonzero_negative(&q)) {
        -q
    } else {
        q
    }
}

fn first_nonzero_negative(q: &Quaternion<f64>) -> bool {
    [q.i, q.j, q.k].into_iter().find(|c| *c != 0.0).is_some_and(|c| c < 0.0)
}

/// Canonical `(w, x, y, z)` components.
pub fn quaternion_wxyz(r: &Rotation) -> [f64; 4] {
    let q = canonical_quaternion(r);
    [q.w, q.i, q.j, q.k]
}

/// Rotation from `(w, x, y, z)`; the quaternion is renormalized.
pub fn rotation_from_wxyz(wxyz: [f64; 4]) -> Option<Rotation> {
    let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
    let n = q.norm();
    if !n.is_finite() || n < 1e-12 {
        return None;
    }
    Some(Rotation::new_normalize(q))
}
