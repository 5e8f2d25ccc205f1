use super::{GeomError, PointCloud, Vec3};
use serde::{Deserialize, Serialize};

/// Pinhole intrinsics in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<(), GeomError> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(GeomError::Dimensions(format!("invalid intrinsics {self:?}")))
        }
    }
}

/// Row-major per-pixel depth in meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
}

/// Lift masked pixels with finite positive depth to camera-frame points.
pub fn backproject(depth: &DepthImage, intrinsics: &CameraIntrinsics, mask: &[bool]) -> Result<PointCloud, GeomError> {
    intrinsics.validate()?;
    let n = intrinsics.width * intrinsics.height;
    if depth.width != intrinsics.width || depth.height != intrinsics.height || depth.depth.len() != n {
        return Err(GeomError::Dimensions(format!(
            "depth {}x{} ({} values) vs intrinsics {}x{}",
            depth.width,
            depth.height,
            depth.depth.len(),
            intrinsics.width,
            intrinsics.height
        )));
    }
    if mask.len() != n {
        return Err(GeomError::Dimensions(format!("mask has {} values, expected {n}", mask.len())));
    }
    let mut points = Vec::new();
    for v in 0..intrinsics.height {
        for u in 0..intrinsics.width {
            let i = v * intrinsics.width + u;
            let z = depth.depth[i];
            if !mask[i] || !z.is_finite() || z <= 0.0 {
                continue;
            }
            let x = (u as f64 - intrinsics.cx) * z / intrinsics.fx;
            let y = (v as f64 - intrinsics.cy) * z / intrinsics.fy;
            points.push(Vec3::new(x, y, z));
        }
    }
    if points.is_empty() {
        return Err(GeomError::Empty("no masked pixel has valid depth"));
    }
    Ok(PointCloud::new(points))
}

/// Pixel coordinates `(u, v)` of a camera-frame point in front of the camera.
pub fn project(p: &Vec3, intrinsics: &CameraIntrinsics) -> Option<(f64, f64)> {
    if p.z <= 0.0 {
        return None;
    }
    Some((intrinsics.fx * p.x / p.z + intrinsics.cx, intrinsics.fy * p.y / p.z + intrinsics.cy))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics { fx: 500.0, fy: 500.0, cx: 2.0, cy: 1.0, width: 640, height: 480 }
    }

    fn single(u: usize, v: usize, z: f64) -> (DepthImage, Vec<bool>) {
        let c = cam();
        let mut depth = vec![f64::NAN; c.width * c.height];
        let mut mask = vec![false; c.width * c.height];
        depth[v * c.width + u] = z;
        mask[v * c.width + u] = true;
        (DepthImage { width: c.width, height: c.height, depth }, mask)
    }

    #[test]
    fn principal_point_maps_to_optical_axis() {
        let (d, m) = single(2, 1, 1.0);
        let pc = backproject(&d, &cam(), &m).unwrap();
        assert_eq!(pc.points, vec![Vec3::new(0.0, 0.0, 1.0)]);
    }

    #[test]
    fn unit_tangent_pixel() {
        // u = cx + fx is off-image for this camera; use a wide one
        let c = CameraIntrinsics { fx: 100.0, fy: 100.0, cx: 10.0, cy: 10.0, width: 200, height: 50 };
        let mut depth = vec![0.0; 200 * 50];
        let mut mask = vec![false; 200 * 50];
        depth[10 * 200 + 110] = 2.0;
        mask[10 * 200 + 110] = true;
        let pc = backproject(&DepthImage { width: 200, height: 50, depth }, &c, &mask).unwrap();
        assert_eq!(pc.points, vec![Vec3::new(2.0, 0.0, 2.0)]);
    }

    #[test]
    fn all_invalid_is_empty_error() {
        let (mut d, m) = single(5, 5, 1.0);
        d.depth.iter_mut().for_each(|z| *z = -1.0);
        assert!(matches!(backproject(&d, &cam(), &m), Err(GeomError::Empty(_))));
    }

    #[test]
    fn dimension_mismatch() {
        let (d, _) = single(5, 5, 1.0);
        assert!(matches!(backproject(&d, &cam(), &[true]), Err(GeomError::Dimensions(_))));
    }
}
