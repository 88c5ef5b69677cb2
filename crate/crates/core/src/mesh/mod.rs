//! Triangle meshes in the object frame (meters): ingestion, rescaling,
//! surface sampling, ray casting, and collision queries.

mod bvh;
pub mod hull;
mod io;
pub mod primitives;
mod stable;

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{ray_triangle, Aabb, OrientedBoxSet, Transform, Vec3};
use crate::rng::{self, tag};
use bvh::Bvh;

pub use io::{load_mesh, write_obj, LoadReport};
pub use stable::{stable_pose, StablePose};

/// Faces with area at or below this are dropped on construction.
pub const MIN_FACE_AREA: f64 = 1e-12;
/// Ray hits closer than this to the origin are ignored.
pub const RAY_EPSILON: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    normals: Vec<Vec3>,
    areas: Vec<f64>,
    /// Connected component of each face.
    shell: Vec<u32>,
    shell_count: usize,
    watertight: bool,
    bvh: Bvh,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    pub distance: f64,
    pub point: Vec3,
    pub face: usize,
    pub normal: Vec3,
}

/// A point on the surface together with its face and outward normal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub point: Vec3,
    pub normal: Vec3,
    pub face: usize,
}

impl TriangleMesh {
    /// Builds a mesh, dropping faces with area <= [`MIN_FACE_AREA`].
    /// Returns the mesh and the number of dropped faces.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<(Self, usize)> {
        if let Some(v) = vertices.iter().find(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(Error::DegenerateMesh(format!("non-finite vertex {v:?}")));
        }
        let nv = vertices.len();
        if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i as usize >= nv)) {
            return Err(Error::DegenerateMesh(format!(
                "face {f:?} indexes past {nv} vertices"
            )));
        }
        let total = faces.len();
        let mut kept = Vec::with_capacity(total);
        let mut normals = Vec::with_capacity(total);
        let mut areas = Vec::with_capacity(total);
        for f in faces {
            let [a, b, c] = f.map(|i| vertices[i as usize]);
            let cross = (b - a).cross(&(c - a));
            let area = 0.5 * cross.norm();
            if area > MIN_FACE_AREA {
                kept.push(f);
                normals.push(cross / (2.0 * area));
                areas.push(area);
            }
        }
        if kept.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let dropped = total - kept.len();
        let (shell, shell_count) = label_shells(nv, &kept);
        let watertight = is_closed(&kept);
        let mut mesh = Self {
            vertices,
            faces: kept,
            normals,
            areas,
            shell,
            shell_count,
            watertight,
            bvh: Bvh::default(),
        };
        let bounds: Vec<Aabb> = (0..mesh.faces.len()).map(|f| mesh.face_aabb(f)).collect();
        mesh.bvh = Bvh::build(&bounds);
        Ok((mesh, dropped))
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn face_normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn face_areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn shell_count(&self) -> usize {
        self.shell_count
    }

    /// Every undirected edge is shared by exactly two faces.
    pub fn is_watertight(&self) -> bool {
        self.watertight
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        self.faces[face].map(|i| self.vertices[i as usize])
    }

    fn face_aabb(&self, face: usize) -> Aabb {
        Aabb::from_points(self.triangle(face).iter())
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter())
    }

    pub fn surface_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Signed-tetrahedron volume centroid for closed meshes, vertex mean otherwise.
    pub fn center_of_mass(&self) -> Vec3 {
        if self.watertight {
            let mut vol = 0.0;
            let mut acc = Vec3::zeros();
            for f in 0..self.faces.len() {
                let [a, b, c] = self.triangle(f);
                let v = a.dot(&b.cross(&c)) / 6.0;
                vol += v;
                acc += v * (a + b + c) / 4.0;
            }
            if vol.abs() > 1e-15 {
                return acc / vol;
            }
        }
        self.vertex_mean()
    }

    pub fn vertex_mean(&self) -> Vec3 {
        self.vertices.iter().sum::<Vec3>() / self.vertices.len() as f64
    }

    /// Applies a rigid (or any affine-orthogonal) transform to every vertex.
    pub fn transformed(&self, t: &Transform) -> TriangleMesh {
        let vertices = self.vertices.iter().map(|v| t.apply_point(v)).collect();
        Self::new(vertices, self.faces.clone())
            .expect("rigid transform keeps faces valid")
            .0
    }

    /// Uniform scale `s` about `center`.
    pub fn scaled_about(&self, center: &Vec3, s: f64) -> Result<TriangleMesh> {
        let vertices = self.vertices.iter().map(|v| center + (v - center) * s).collect();
        Ok(Self::new(vertices, self.faces.clone())?.0)
    }

    pub fn translated(&self, offset: &Vec3) -> TriangleMesh {
        self.transformed(&Transform::from_translation(*offset))
    }

    /// Disjoint union of two meshes.
    pub fn merged(&self, other: &TriangleMesh) -> TriangleMesh {
        let base = self.vertices.len() as u32;
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut faces = self.faces.clone();
        faces.extend(other.faces.iter().map(|f| f.map(|i| i + base)));
        Self::new(vertices, faces).expect("union of valid meshes").0
    }

    /// All hits with distance > [`RAY_EPSILON`], ascending. Hits on one shell
    /// closer than 1e-9 to each other (shared edges and vertices) are merged.
    pub fn ray_intersections(&self, origin: &Vec3, direction: &Vec3) -> Vec<RayHit> {
        let mut hits = Vec::new();
        self.bvh.ray_query(origin, direction, f64::INFINITY, |f| {
            if let Some(t) = ray_triangle(origin, direction, &self.triangle(f)) {
                if t > RAY_EPSILON {
                    hits.push(RayHit {
                        distance: t,
                        point: origin + direction * t,
                        face: f,
                        normal: self.normals[f],
                    });
                }
            }
            f64::INFINITY
        });
        hits.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.face.cmp(&b.face)));
        let mut out: Vec<RayHit> = Vec::with_capacity(hits.len());
        for h in hits {
            let dup = out.iter().rev().take_while(|k| h.distance - k.distance < 1e-9).any(|k| {
                self.shell[k.face] == self.shell[h.face]
            });
            if !dup {
                out.push(h);
            }
        }
        out
    }

    /// Closest hit with distance > [`RAY_EPSILON`].
    pub fn first_hit(&self, origin: &Vec3, direction: &Vec3) -> Option<RayHit> {
        let mut best: Option<(f64, usize)> = None;
        self.bvh.ray_query(origin, direction, f64::INFINITY, |f| {
            if let Some(t) = ray_triangle(origin, direction, &self.triangle(f)) {
                if t > RAY_EPSILON && best.is_none_or(|(bt, bf)| t < bt || (t == bt && f < bf)) {
                    best = Some((t, f));
                }
            }
            best.map_or(f64::INFINITY, |(t, _)| t)
        });
        best.map(|(t, f)| RayHit {
            distance: t,
            point: origin + direction * t,
            face: f,
            normal: self.normals[f],
        })
    }

    /// Inside test by per-shell ray parity, majority vote over three fixed
    /// jittered directions. A point inside any closed shell counts as inside.
    pub fn contains_point(&self, p: &Vec3) -> bool {
        // digits of familiar constants, chosen only to avoid axis-aligned rays
        #[allow(clippy::approx_constant)]
        const DIRS: [[f64; 3]; 3] = [
            [0.577_215_664_9, 0.301_029_995_6, 0.759_134_375_1],
            [-0.271_828_182_8, 0.853_973_422_3, -0.443_147_180_5],
            [0.693_147_180_6, -0.414_213_562_4, -0.589_048_622_5],
        ];
        let votes = DIRS
            .iter()
            .filter(|d| {
                let d = Vec3::new(d[0], d[1], d[2]).normalize();
                let mut parity = vec![false; self.shell_count];
                for h in self.ray_intersections(p, &d) {
                    let s = self.shell[h.face] as usize;
                    parity[s] = !parity[s];
                }
                parity.iter().any(|&x| x)
            })
            .count();
        votes >= 2
    }

    /// Indices of faces whose bounding box overlaps `query`.
    pub fn faces_in_box(&self, query: &Aabb) -> Vec<usize> {
        let mut out = Vec::new();
        self.bvh.box_query(query, |f| out.push(f));
        out.sort_unstable();
        out
    }

    /// True iff any posed box intersects a triangle or has its center inside the mesh.
    pub fn collides(&self, body: &OrientedBoxSet, pose: &Transform) -> bool {
        body.posed(pose).iter().any(|b| {
            let mut hit = false;
            self.bvh.box_query(&b.bounding_aabb(), |f| {
                if !hit && b.intersects_triangle(&self.triangle(f)) {
                    hit = true;
                }
            });
            hit || self.contains_point(&b.center)
        })
    }

    /// `n` area-weighted surface samples, deterministic for a given RNG state.
    pub fn sample_surface<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<SurfacePoint> {
        let all: Vec<usize> = (0..self.faces.len()).collect();
        FaceSampler::new(self, &all).map_or_else(Vec::new, |s| (0..n).map(|_| s.sample(self, rng)).collect())
    }
}

/// Uniform point in a triangle from two canonical uniforms.
pub fn sample_triangle(tri: &[Vec3; 3], r1: f64, r2: f64) -> Vec3 {
    let s = r1.sqrt();
    tri[0] * (1.0 - s) + tri[1] * (s * (1.0 - r2)) + tri[2] * (s * r2)
}

/// Area-weighted sampler over a subset of faces.
#[derive(Clone, Debug)]
pub struct FaceSampler {
    faces: Vec<usize>,
    cumulative: Vec<f64>,
}

impl FaceSampler {
    pub fn new(mesh: &TriangleMesh, faces: &[usize]) -> Option<Self> {
        if faces.is_empty() {
            return None;
        }
        let mut acc = 0.0;
        let cumulative = faces
            .iter()
            .map(|&f| {
                acc += mesh.areas[f];
                acc
            })
            .collect();
        Some(Self {
            faces: faces.to_vec(),
            cumulative,
        })
    }

    pub fn total_area(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn sample<R: Rng + ?Sized>(&self, mesh: &TriangleMesh, rng: &mut R) -> SurfacePoint {
        let x = rng.random::<f64>() * self.total_area();
        let k = self.cumulative.partition_point(|&c| c <= x).min(self.faces.len() - 1);
        let face = self.faces[k];
        let (r1, r2): (f64, f64) = (rng.random(), rng.random());
        SurfacePoint {
            point: sample_triangle(&mesh.triangle(face), r1, r2),
            normal: mesh.normals[face],
            face,
        }
    }
}

/// Draws `n` area-weighted surface points from a seeded stream.
pub fn area_weighted_surface_sample(mesh: &TriangleMesh, n: usize, seed: u64) -> Vec<SurfacePoint> {
    let mut r = rng::stream(seed, &[tag::OBJECT]);
    mesh.sample_surface(n, &mut r)
}

pub fn ray_intersections(mesh: &TriangleMesh, origin: &Vec3, direction: &Vec3) -> Vec<RayHit> {
    mesh.ray_intersections(origin, direction)
}

pub fn collides(mesh: &TriangleMesh, body: &OrientedBoxSet, pose: &Transform) -> bool {
    mesh.collides(body, pose)
}

/// Uniform rescale about the box center so that the largest extent equals `target`.
pub fn rescale_to_target(mesh: &TriangleMesh, target: f64) -> Result<(TriangleMesh, f64)> {
    let bb = mesh.aabb();
    let extent = bb.max_extent();
    if extent < 1e-9 {
        return Err(Error::DegenerateMesh(format!("max extent {extent:e} m")));
    }
    if !(target.is_finite() && target > 0.0) {
        return Err(Error::InvalidArgument(format!("rescale target {target}")));
    }
    let s = target / extent;
    Ok((mesh.scaled_about(&bb.center(), s)?, s))
}

/// Rescales so the largest extent is a seeded uniform draw from `[low, high]`.
pub fn rescale_to_range(mesh: &TriangleMesh, range: [f64; 2], seed: u64) -> Result<(TriangleMesh, f64)> {
    let [low, high] = range;
    if !(low > 0.0 && low < high) {
        return Err(Error::InvalidArgument(format!("scale range [{low}, {high}]")));
    }
    let target = rng::stream(seed, &[tag::SCALE]).random_range(low..=high);
    rescale_to_target(mesh, target)
}

fn label_shells(nv: usize, faces: &[[u32; 3]]) -> (Vec<u32>, usize) {
    let mut parent: Vec<u32> = (0..nv as u32).collect();
    fn find(p: &mut [u32], mut x: u32) -> u32 {
        while p[x as usize] != x {
            p[x as usize] = p[p[x as usize] as usize];
            x = p[x as usize];
        }
        x
    }
    for f in faces {
        let r0 = find(&mut parent, f[0]);
        for &v in &f[1..] {
            let r = find(&mut parent, v);
            if r != r0 {
                let (lo, hi) = (r.min(r0), r.max(r0));
                parent[hi as usize] = lo;
            }
        }
    }
    let mut ids: HashMap<u32, u32> = HashMap::new();
    let shell = faces
        .iter()
        .map(|f| {
            let root = find(&mut parent, f[0]);
            let next = ids.len() as u32;
            *ids.entry(root).or_insert(next)
        })
        .collect();
    (shell, ids.len())
}

fn is_closed(faces: &[[u32; 3]]) -> bool {
    let mut edges: HashMap<(u32, u32), u32> = HashMap::new();
    for f in faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            *edges.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    edges.values().all(|&c| c == 2)
}

#[cfg(test)]
mod tests {
    use super::primitives;
    use super::*;
    use crate::geom::OrientedBox;

    #[test]
    fn cube_is_closed_and_centered() {
        let cube = primitives::unit_cube();
        assert!(cube.is_watertight());
        assert_eq!(cube.face_count(), 12);
        assert_eq!(cube.shell_count(), 1);
        assert!((cube.aabb().extents() - Vec3::repeat(1.0)).norm() < 1e-15);
        assert!(cube.center_of_mass().norm() < 1e-12);
        for n in cube.face_normals() {
            assert!((n.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_indices_and_empty() {
        assert!(matches!(
            TriangleMesh::new(vec![Vec3::zeros()], vec![[0, 1, 2]]),
            Err(Error::DegenerateMesh(_))
        ));
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0];
        assert!(matches!(TriangleMesh::new(v, vec![[0, 1, 2]]), Err(Error::EmptyMesh)));
    }

    #[test]
    fn axis_ray_through_cube() {
        let cube = primitives::unit_cube();
        let hits = cube.ray_intersections(&Vec3::new(-2.0, 0.0, 0.0), &Vec3::x());
        let d: Vec<f64> = hits.iter().map(|h| h.distance).collect();
        assert_eq!(d.len(), 2);
        assert!((d[0] - 1.5).abs() < 1e-12 && (d[1] - 2.5).abs() < 1e-12);
        assert!(cube.ray_intersections(&Vec3::new(-2.0, 3.0, 0.0), &Vec3::x()).is_empty());
    }

    #[test]
    fn diagonal_ray_through_shared_edge_counts_once() {
        // (0,0) on the face z=0.5 lies on the diagonal split of the quad
        let cube = primitives::unit_cube();
        let hits = cube.ray_intersections(&Vec3::new(0.0, 0.0, 2.0), &-Vec3::z());
        assert_eq!(hits.len(), 2);
        assert!((hits[0].distance - 1.5).abs() < 1e-12);
    }

    #[test]
    fn origin_on_face_skips_self_hit() {
        let cube = primitives::unit_cube();
        let hits = cube.ray_intersections(&Vec3::new(-0.5, 0.1, 0.2), &Vec3::x());
        assert_eq!(hits.len(), 1);
        assert!((hits[0].distance - 1.0).abs() < 1e-12);
        assert!(hits[0].normal.x > 0.99);
    }

    #[test]
    fn first_hit_is_nearest() {
        let sphere = primitives::uv_sphere(Vec3::zeros(), 1.0, 24, 48);
        let h = sphere.first_hit(&Vec3::new(0.0, 0.0, 5.0), &-Vec3::z()).unwrap();
        assert!((h.distance - 4.0).abs() < 1e-9);
    }

    #[test]
    fn containment_by_parity() {
        let cube = primitives::unit_cube();
        assert!(cube.contains_point(&Vec3::new(0.1, 0.2, -0.3)));
        assert!(!cube.contains_point(&Vec3::new(0.1, 0.2, 0.7)));
        // overlapping shells: inside either counts
        let two = cube.merged(&cube.translated(&Vec3::new(0.5, 0.0, 0.0)));
        assert_eq!(two.shell_count(), 2);
        assert!(two.contains_point(&Vec3::new(0.25, 0.0, 0.0)));
        assert!(two.contains_point(&Vec3::new(0.9, 0.0, 0.0)));
    }

    #[test]
    fn collision_cases() {
        let cube = primitives::unit_cube();
        let small = OrientedBoxSet::new(vec![OrientedBox::axis_aligned(Vec3::zeros(), Vec3::repeat(0.1))]);
        let far = Transform::from_translation(Vec3::new(3.0, 0.0, 0.0));
        let straddle = Transform::from_translation(Vec3::new(0.5, 0.0, 0.0));
        assert!(!cube.collides(&small, &far));
        assert!(cube.collides(&small, &straddle));
        assert!(cube.collides(&small, &Transform::identity()));
    }

    #[test]
    fn rescale_examples() {
        let cube = primitives::unit_cube();
        let (m, s) = rescale_to_range(&cube, [0.6, 1.0], 11).unwrap();
        let e = m.aabb().extents();
        assert!((0.6..=1.0).contains(&e.x));
        assert!((e.x - e.y).abs() < 1e-12 && (e.y - e.z).abs() < 1e-12);
        assert!((s - e.x).abs() < 1e-12);

        let c8 = cube.scaled_about(&Vec3::zeros(), 0.8).unwrap();
        let (_, s) = rescale_to_target(&c8, 0.8).unwrap();
        assert!((s - 1.0).abs() < 1e-15);

        let b = primitives::cuboid(Vec3::zeros(), Vec3::new(2.0, 1.0, 0.5));
        let (m, s) = rescale_to_target(&b, 0.8).unwrap();
        assert!((s - 0.4).abs() < 1e-15);
        assert!((m.aabb().extents() - Vec3::new(0.8, 0.4, 0.2)).norm() < 1e-12);
        assert!((m.aabb().center() - b.aabb().center()).norm() < 1e-15);
    }

    #[test]
    fn rescale_rejects_point_mesh() {
        let v = vec![Vec3::zeros(), Vec3::new(1e-10, 0.0, 0.0), Vec3::new(0.0, 1e-10, 0.0)];
        // area 5e-21 is dropped, leaving nothing
        assert!(TriangleMesh::new(v, vec![[0, 1, 2]]).is_err());
        let tri = primitives::single_triangle();
        assert!(matches!(rescale_to_target(&tri, 0.0), Err(Error::InvalidArgument(_))));
        assert!(rescale_to_range(&tri, [1.0, 0.5], 0).is_err());
    }

    #[test]
    fn samples_lie_inside_single_triangle() {
        let tri = primitives::single_triangle();
        let [a, b, c] = tri.triangle(0);
        for s in area_weighted_surface_sample(&tri, 3, 5) {
            // barycentric coordinates
            let v0 = b - a;
            let v1 = c - a;
            let v2 = s.point - a;
            let d00 = v0.dot(&v0);
            let d01 = v0.dot(&v1);
            let d11 = v1.dot(&v1);
            let d20 = v2.dot(&v0);
            let d21 = v2.dot(&v1);
            let den = d00 * d11 - d01 * d01;
            let v = (d11 * d20 - d01 * d21) / den;
            let w = (d00 * d21 - d01 * d20) / den;
            assert!(v >= -1e-12 && w >= -1e-12 && v + w <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let cube = primitives::unit_cube();
        assert_eq!(area_weighted_surface_sample(&cube, 50, 3), area_weighted_surface_sample(&cube, 50, 3));
        assert_ne!(area_weighted_surface_sample(&cube, 50, 3), area_weighted_surface_sample(&cube, 50, 4));
    }
}
