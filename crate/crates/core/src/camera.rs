//! Pinhole camera, rigid pose, and the normalized vanishing-point encoding.
//!
//! Image coordinates have their origin at the top-left pixel corner with x to
//! the right and y down. Camera space uses x right, y down, z forward, so a
//! point in front of the camera has positive z.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

/// Zero-skew pinhole intrinsics with square pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub focal: f64,
    pub principal_point: [f64; 2],
    pub image_size: (u32, u32),
}

impl CameraModel {
    pub fn new(focal: f64, principal_point: [f64; 2], image_size: (u32, u32)) -> Self {
        Self {
            focal,
            principal_point,
            image_size,
        }
    }

    /// Camera with the principal point at the image center.
    pub fn centered(focal: f64, image_size: (u32, u32)) -> Self {
        let pp = [image_size.0 as f64 / 2.0, image_size.1 as f64 / 2.0];
        Self::new(focal, pp, image_size)
    }

    pub fn is_valid(&self) -> bool {
        self.focal.is_finite() && self.focal > 0.0 && self.principal_point.iter().all(|c| c.is_finite())
    }

    pub fn k(&self) -> Matrix3<f64> {
        let [px, py] = self.principal_point;
        Matrix3::new(self.focal, 0.0, px, 0.0, self.focal, py, 0.0, 0.0, 1.0)
    }

    pub fn k_inv(&self) -> Matrix3<f64> {
        let f = self.focal;
        let [px, py] = self.principal_point;
        Matrix3::new(1.0 / f, 0.0, -px / f, 0.0, 1.0 / f, -py / f, 0.0, 0.0, 1.0)
    }

    /// Projects a camera-space point with `z > 0` to pixels.
    pub fn project(&self, p: &Vector3<f64>) -> Vector2<f64> {
        Vector2::new(
            self.focal * p.x / p.z + self.principal_point[0],
            self.focal * p.y / p.z + self.principal_point[1],
        )
    }

    /// Camera-space point at depth `z` along the ray through pixel `p`.
    pub fn back_project(&self, p: [f64; 2], z: f64) -> Vector3<f64> {
        calibrated_ray(self, p) * z
    }
}

/// `K⁻¹ [x, y, 1]ᵀ`; the third component is always 1.
pub fn calibrated_ray(cam: &CameraModel, p: [f64; 2]) -> Vector3<f64> {
    Vector3::new(
        (p[0] - cam.principal_point[0]) / cam.focal,
        (p[1] - cam.principal_point[1]) / cam.focal,
        1.0,
    )
}

/// Maps an image-space vanishing point to `[x, y, 1]ᵀ / (x² + y² + 1)`.
pub fn normalize_vp(x: f64, y: f64) -> Vector3<f64> {
    Vector3::new(x, y, 1.0) / (x * x + y * y + 1.0)
}

/// World-to-camera rigid transform: `X_cam = R · X_world + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        let mut rows = [[0.0; 3]; 3];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = rotation[(i, j)];
            }
        }
        Self {
            rotation: rows,
            translation: [translation.x, translation.y, translation.z],
        }
    }

    /// Camera at `eye` looking at `target`, with `up` as the world up direction.
    /// `up` must not be parallel to the viewing direction.
    pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>, up: Vector3<f64>) -> Self {
        let forward = (target - eye).normalize();
        let right = forward.cross(&up).normalize();
        let down = forward.cross(&right);
        let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let t = -(r * eye);
        Self::new(r, t)
    }

    pub fn r(&self) -> Matrix3<f64> {
        let m = &self.rotation;
        Matrix3::new(
            m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
        )
    }

    pub fn t(&self) -> Vector3<f64> {
        Vector3::from(self.translation)
    }

    pub fn to_camera(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.r() * x + self.t()
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.r().transpose() * self.t())
    }
}

/// Three vanishing points in the normalized encoding. `v[2]` is the vertical
/// one; `v[0]` and `v[1]` are the horizontal pair and carry no ordering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VanishingPoints {
    pub v: [[f64; 3]; 3],
}

impl VanishingPoints {
    pub fn from_normalized(v: [Vector3<f64>; 3]) -> Self {
        Self {
            v: v.map(|x| [x.x, x.y, x.z]),
        }
    }

    /// Normalizes homogeneous image directions `d = (a, b, c)`.
    ///
    /// The pixel is `(a/c, b/c)`, so the normalized vector is `c·d / ‖d‖²`.
    /// A direction with `c = 0` lies at infinity and maps to the zero vector.
    pub fn from_homogeneous(d: [Vector3<f64>; 3]) -> Self {
        Self::from_normalized(d.map(|d| {
            let n2 = d.norm_squared();
            if d.z == 0.0 || n2 == 0.0 {
                Vector3::zeros()
            } else {
                d * (d.z / n2)
            }
        }))
    }

    pub fn get(&self, i: usize) -> Vector3<f64> {
        Vector3::from(self.v[i])
    }

    /// Unit-length homogeneous representative, or zero for a point at infinity.
    pub fn homogeneous_unit(&self, i: usize) -> Vector3<f64> {
        let v = self.get(i);
        let n = v.norm();
        if n == 0.0 {
            v
        } else {
            v / n
        }
    }

    /// Pixel coordinates, or `None` when the point is at infinity.
    pub fn pixel(&self, i: usize) -> Option<[f64; 2]> {
        let v = self.get(i);
        (v.z > 0.0).then(|| [v.x / v.z, v.y / v.z])
    }

    /// Calibrated unit direction `K⁻¹ V` (sign is arbitrary).
    pub fn calibrated_direction(&self, i: usize, cam: &CameraModel) -> Option<Vector3<f64>> {
        let v = self.homogeneous_unit(i);
        if v.norm_squared() == 0.0 {
            return None;
        }
        let d = cam.k_inv() * v;
        Some(d.normalize())
    }

    pub fn swapped_horizontal(&self) -> Self {
        Self {
            v: [self.v[1], self.v[0], self.v[2]],
        }
    }
}

/// Vanishing points of the world axes seen through `pose` and `cam`.
/// `v[2]` is the world z (up) axis.
pub fn vp_from_pose(pose: &Pose, cam: &CameraModel) -> VanishingPoints {
    let r = pose.r();
    let k = cam.k();
    VanishingPoints::from_homogeneous([0, 1, 2].map(|i| k * r.column(i).into_owned()))
}
