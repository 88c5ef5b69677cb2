//! Rigid transforms, boxes and the primitive intersection tests the mesh
//! queries are built from.

use nalgebra::{Matrix3, Matrix4, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// A rigid transform; serialized as a 4x4 row-major homogeneous matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 16]", try_from = "[f64; 16]")]
pub struct Transform {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Default for Transform {
    fn default() -> Self {
        Self::identity()
    }
}

impl Transform {
    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(rotation: Mat3, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self::new(Mat3::identity(), translation)
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let r = Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle);
        Self::new(*r.matrix(), Vec3::zeros())
    }

    /// Builds a transform from a row-major 4x4 matrix, checking rigidity.
    pub fn from_row_major(m: &[f64; 16]) -> Result<Self> {
        let rotation = Mat3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        let translation = Vec3::new(m[3], m[7], m[11]);
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation("transform has non-finite entries".into()));
        }
        if [m[12], m[13], m[14], m[15]] != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::Validation(
                "transform last row is not (0,0,0,1)".into(),
            ));
        }
        let t = Self::new(rotation, translation);
        let err = t.orthonormality_error();
        if err > 1e-9 {
            return Err(Error::Validation(format!(
                "transform rotation is not orthonormal (error {err:e})"
            )));
        }
        Ok(t)
    }

    pub fn to_row_major(&self) -> [f64; 16] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x,
            r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y,
            r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z,
            0.0, 0.0, 0.0, 1.0,
        ]
    }

    pub fn to_matrix4(&self) -> Matrix4<f64> {
        Matrix4::from_row_slice(&self.to_row_major())
    }

    /// Max of `|RᵀR - I|` entries and `|det R - 1|`.
    pub fn orthonormality_error(&self) -> f64 {
        let r = &self.rotation;
        let e = (r.transpose() * r - Mat3::identity()).abs().max();
        e.max((r.determinant() - 1.0).abs())
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::new(rt, -(rt * self.translation))
    }

    /// `self * other`: apply `other` first.
    pub fn compose(&self, other: &Transform) -> Self {
        Self::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn apply_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn axis_x(&self) -> Vec3 {
        self.rotation.column(0).into()
    }

    pub fn axis_y(&self) -> Vec3 {
        self.rotation.column(1).into()
    }

    pub fn axis_z(&self) -> Vec3 {
        self.rotation.column(2).into()
    }

    /// Rotation angle of `self⁻¹ · other`.
    pub fn rotation_distance(&self, other: &Transform) -> f64 {
        let rel = self.rotation.transpose() * other.rotation;
        let c = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        c.acos()
    }
}

impl std::ops::Mul for Transform {
    type Output = Transform;
    fn mul(self, rhs: Transform) -> Transform {
        self.compose(&rhs)
    }
}

impl From<Transform> for [f64; 16] {
    fn from(t: Transform) -> Self {
        t.to_row_major()
    }
}

impl TryFrom<[f64; 16]> for Transform {
    type Error = Error;
    fn try_from(m: [f64; 16]) -> Result<Self> {
        Transform::from_row_major(&m)
    }
}

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        debug_assert!(min.iter().zip(max.iter()).all(|(a, b)| a <= b));
        Self { min, max }
    }

    pub fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn extents(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn max_extent(&self) -> f64 {
        self.extents().max()
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn diagonal(&self) -> f64 {
        self.extents().norm()
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= other.max[k] && other.min[k] <= self.max[k])
    }

    /// Slab test; returns the entry distance if the ray hits within `[0, t_max]`.
    pub fn ray_entry(&self, origin: &Vec3, inv_dir: &Vec3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for k in 0..3 {
            let a = (self.min[k] - origin[k]) * inv_dir[k];
            let b = (self.max[k] - origin[k]) * inv_dir[k];
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            // NaN (0 * inf) means the origin lies on the slab plane; treat as inside
            if !lo.is_nan() {
                t0 = t0.max(lo);
            }
            if !hi.is_nan() {
                t1 = t1.min(hi);
            }
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

/// A box with arbitrary orientation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: Vec3,
    /// Columns are the box axes.
    pub axes: Mat3,
    pub half_extents: Vec3,
}

impl OrientedBox {
    pub fn axis_aligned(center: Vec3, dims: Vec3) -> Self {
        Self {
            center,
            axes: Mat3::identity(),
            half_extents: dims * 0.5,
        }
    }

    pub fn transformed(&self, pose: &Transform) -> Self {
        Self {
            center: pose.apply_point(&self.center),
            axes: pose.rotation * self.axes,
            half_extents: self.half_extents,
        }
    }

    pub fn axis(&self, k: usize) -> Vec3 {
        self.axes.column(k).into()
    }

    /// Coordinates of `p` in the box frame.
    pub fn local(&self, p: &Vec3) -> Vec3 {
        self.axes.transpose() * (p - self.center)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let l = self.local(p);
        (0..3).all(|k| l[k].abs() <= self.half_extents[k])
    }

    pub fn bounding_aabb(&self) -> Aabb {
        let r = self.axes.abs() * self.half_extents;
        Aabb::new(self.center - r, self.center + r)
    }

    fn projected_radius(&self, axis: &Vec3) -> f64 {
        (0..3)
            .map(|k| self.half_extents[k] * self.axis(k).dot(axis).abs())
            .sum()
    }

    /// Separating-axis test between two oriented boxes (15 axes).
    pub fn intersects(&self, other: &OrientedBox) -> bool {
        let d = other.center - self.center;
        let mut axes: Vec<Vec3> = Vec::with_capacity(15);
        for k in 0..3 {
            axes.push(self.axis(k));
            axes.push(other.axis(k));
        }
        for i in 0..3 {
            for j in 0..3 {
                let c = self.axis(i).cross(&other.axis(j));
                if c.norm_squared() > 1e-20 {
                    axes.push(c);
                }
            }
        }
        axes.iter().all(|a| {
            d.dot(a).abs() <= self.projected_radius(a) + other.projected_radius(a)
        })
    }

    /// Separating-axis test against a triangle (13 axes).
    pub fn intersects_triangle(&self, tri: &[Vec3; 3]) -> bool {
        let v: [Vec3; 3] = [self.local(&tri[0]), self.local(&tri[1]), self.local(&tri[2])];
        let h = self.half_extents;
        for k in 0..3 {
            let lo = v[0][k].min(v[1][k]).min(v[2][k]);
            let hi = v[0][k].max(v[1][k]).max(v[2][k]);
            if lo > h[k] || hi < -h[k] {
                return false;
            }
        }
        let e = [v[1] - v[0], v[2] - v[1], v[0] - v[2]];
        let n = e[0].cross(&e[1]);
        let mut candidates: Vec<Vec3> = Vec::with_capacity(10);
        candidates.push(n);
        let unit = [Vec3::x(), Vec3::y(), Vec3::z()];
        for ek in &e {
            for u in &unit {
                candidates.push(u.cross(ek));
            }
        }
        for a in candidates {
            if a.norm_squared() < 1e-30 {
                continue;
            }
            let p = [v[0].dot(&a), v[1].dot(&a), v[2].dot(&a)];
            let lo = p[0].min(p[1]).min(p[2]);
            let hi = p[0].max(p[1]).max(p[2]);
            let r = h.x * a.x.abs() + h.y * a.y.abs() + h.z * a.z.abs();
            if lo > r || hi < -r {
                return false;
            }
        }
        true
    }
}

/// A rigid body approximated by a union of boxes in its own frame.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OrientedBoxSet {
    pub boxes: Vec<OrientedBox>,
}

impl OrientedBoxSet {
    pub fn new(boxes: Vec<OrientedBox>) -> Self {
        Self { boxes }
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn posed(&self, pose: &Transform) -> Vec<OrientedBox> {
        self.boxes.iter().map(|b| b.transformed(pose)).collect()
    }

    /// True iff any box of `self` at `pose_a` overlaps any box of `other` at `pose_b`.
    pub fn intersects(&self, pose_a: &Transform, other: &OrientedBoxSet, pose_b: &Transform) -> bool {
        let a = self.posed(pose_a);
        let b = other.posed(pose_b);
        a.iter().any(|x| b.iter().any(|y| x.intersects(y)))
    }
}

/// Ray-triangle hit distance (Möller–Trumbore) with inclusive edges.
pub fn ray_triangle(origin: &Vec3, dir: &Vec3, tri: &[Vec3; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let tvec = origin - tri[0];
    let u = tvec.dot(&pvec) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&qvec) * inv)
}

/// Rotation taking unit vector `from` onto unit vector `to`, minimal angle.
pub fn rotation_between(from: &Vec3, to: &Vec3) -> Mat3 {
    let c = from.dot(to).clamp(-1.0, 1.0);
    if c > 1.0 - 1e-15 {
        return Mat3::identity();
    }
    if c < -1.0 + 1e-15 {
        // any axis perpendicular to `from`
        let helper = if from.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let axis = from.cross(&helper).normalize();
        return *Rotation3::from_axis_angle(&Unit::new_unchecked(axis), std::f64::consts::PI).matrix();
    }
    let axis = from.cross(to);
    *Rotation3::from_axis_angle(&Unit::new_normalize(axis), c.acos()).matrix()
}
