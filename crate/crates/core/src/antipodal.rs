//! Block antipodal sampling: the object's bounding box is split into
//! `i × i × i` slightly overlapping blocks, and each block independently
//! samples contact pairs whose connecting line lies inside both friction
//! cones, then poses a collision-free parallel-jaw gripper about the line.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Mat3, OrientedBox, OrientedBoxSet, Transform, Vec3};
use crate::mesh::{sample_triangle, SurfacePoint, TriangleMesh};
use crate::par::{self, Exec};
use crate::rng::{self, tag};

/// Robotiq 2F-85 stroke.
pub const GRIPPER_WIDTH: f64 = 0.085;

/// Parallel-jaw gripper geometry in the grasp frame: x is the closing
/// direction, z the approach direction, origin midway between the pads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GripperModel {
    pub max_width: f64,
    /// Fingers, palm, and approach body.
    pub body: OrientedBoxSet,
    /// Volume swept between the open fingers.
    pub closing_region: OrientedBox,
}

impl Default for GripperModel {
    fn default() -> Self {
        Self::with_width(GRIPPER_WIDTH)
    }
}

impl GripperModel {
    pub fn with_width(width: f64) -> Self {
        let depth = 0.037;
        let height = 0.021;
        let finger = Vec3::new(0.02, 0.02, depth);
        let fx = width / 2.0 + 0.01;
        let palm = Vec3::new(0.12, 0.03, 0.03);
        let palm_z = -(depth / 2.0 + palm.z / 2.0);
        let approach = Vec3::new(0.05, 0.05, 0.08);
        let approach_z = palm_z - palm.z / 2.0 - approach.z / 2.0;
        Self {
            max_width: width,
            body: OrientedBoxSet::new(vec![
                OrientedBox::axis_aligned(Vec3::new(-fx, 0.0, 0.0), finger),
                OrientedBox::axis_aligned(Vec3::new(fx, 0.0, 0.0), finger),
                OrientedBox::axis_aligned(Vec3::new(0.0, 0.0, palm_z), palm),
                OrientedBox::axis_aligned(Vec3::new(0.0, 0.0, approach_z), approach),
            ]),
            closing_region: OrientedBox::axis_aligned(Vec3::zeros(), Vec3::new(width, height, depth)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("gripper: {m}")));
        if !(self.max_width > 0.0) {
            return bad("max_width must be positive");
        }
        if (self.closing_region.half_extents.x * 2.0 - self.max_width).abs() > 1e-12 {
            return bad("closing region width must equal max_width");
        }
        if self
            .body
            .boxes
            .iter()
            .chain(std::iter::once(&self.closing_region))
            .any(|b| b.half_extents.iter().any(|&h| !(h > 0.0)))
        {
            return bad("boxes need positive extents");
        }
        Ok(())
    }
}

/// A 6-DOF pre-grasp in the object frame with its two contacts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grasp {
    pub pose: Transform,
    pub contacts: [Vec3; 2],
    /// Outward surface normals at the contacts.
    pub normals: [Vec3; 2],
}

impl Grasp {
    pub fn width(&self) -> f64 {
        (self.contacts[1] - self.contacts[0]).norm()
    }

    /// Angles between the contact line and the inward normal at each contact.
    pub fn cone_angles(&self) -> [f64; 2] {
        let d = (self.contacts[1] - self.contacts[0]).normalize();
        let a1 = d.dot(&-self.normals[0]).clamp(-1.0, 1.0).acos();
        let a2 = (-d).dot(&-self.normals[1]).clamp(-1.0, 1.0).acos();
        [a1, a2]
    }

    /// Checks width, frame alignment and origin placement.
    pub fn check(&self, max_width: f64) -> std::result::Result<(), String> {
        let [p1, p2] = self.contacts;
        let w = self.width();
        if w > max_width + 1e-9 {
            return Err(format!("contact width {w} exceeds {max_width}"));
        }
        if self.pose.orthonormality_error() > 1e-9 {
            return Err("pose rotation is not orthonormal".into());
        }
        if w > 1e-9 && self.pose.axis_x().cross(&((p2 - p1) / w)).norm() > 1e-6 {
            return Err("pose x-axis is not along the contact line".into());
        }
        if (self.pose.translation - (p1 + p2) * 0.5).norm() > 1e-9 {
            return Err("pose origin is not the contact midpoint".into());
        }
        for n in &self.normals {
            if (n.norm() - 1.0).abs() > 1e-9 {
                return Err("contact normal is not unit length".into());
            }
        }
        Ok(())
    }
}

/// Grasp frame for a contact pair: origin at the midpoint, x along
/// `p2 - p1`, approach z obtained by rolling a reference perpendicular.
pub fn grasp_pose_from_contacts(p1: &Vec3, p2: &Vec3, roll: f64) -> Result<Transform> {
    let d = p2 - p1;
    let len = d.norm();
    if len <= 1e-9 {
        return Err(Error::DegenerateContacts(len));
    }
    let x = d / len;
    let c = x.cross(&Vec3::z());
    let z0 = if c.norm() < 1e-9 { Vec3::y() } else { c.normalize() };
    let z = z0 * roll.cos() + x.cross(&z0) * roll.sin();
    let y = z.cross(&x);
    Ok(Transform::new(
        Mat3::from_columns(&[x, y, z]),
        (p1 + p2) * 0.5,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub bounds: Aabb,
    pub index: [usize; 3],
}

/// `i³` blocks, each nominal cell widened by `overlap_fraction × cell` on its
/// interior faces only, so the union is exactly `aabb`.
pub fn block_decomposition(aabb: &Aabb, i: usize, overlap_fraction: f64) -> Result<Vec<Block>> {
    if i == 0 {
        return Err(Error::InvalidArgument("block count i must be >= 1".into()));
    }
    if !(0.0..0.5).contains(&overlap_fraction) {
        return Err(Error::InvalidArgument(format!(
            "overlap fraction {overlap_fraction} outside [0, 0.5)"
        )));
    }
    let cell = aabb.extents() / i as f64;
    let mut out = Vec::with_capacity(i * i * i);
    for ix in 0..i {
        for iy in 0..i {
            for iz in 0..i {
                let idx = [ix, iy, iz];
                let mut min = Vec3::zeros();
                let mut max = Vec3::zeros();
                for k in 0..3 {
                    let lo = aabb.min[k] + cell[k] * idx[k] as f64;
                    let hi = if idx[k] + 1 == i { aabb.max[k] } else { aabb.min[k] + cell[k] * (idx[k] + 1) as f64 };
                    let grow = overlap_fraction * cell[k];
                    min[k] = if idx[k] == 0 { aabb.min[k] } else { lo - grow };
                    max[k] = if idx[k] + 1 == i { aabb.max[k] } else { hi + grow };
                }
                out.push(Block {
                    bounds: Aabb::new(min, max),
                    index: idx,
                });
            }
        }
    }
    Ok(out)
}

/// Knobs for one block's sampling loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockParams {
    /// `tan(α/2)` for friction-cone angle α.
    pub gamma: f64,
    pub n_target: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Roll re-samples before a contact pair is discarded.
    pub roll_retries: usize,
}

/// Why sampling attempts were rejected.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingStats {
    pub attempts: usize,
    pub no_second_contact: usize,
    pub too_wide: usize,
    pub not_antipodal: usize,
    pub collided: usize,
    pub accepted: usize,
}

impl SamplingStats {
    fn absorb(&mut self, o: &SamplingStats) {
        self.attempts += o.attempts;
        self.no_second_contact += o.no_second_contact;
        self.too_wide += o.too_wide;
        self.not_antipodal += o.not_antipodal;
        self.collided += o.collided;
        self.accepted += o.accepted;
    }
}

/// The part of the mesh surface inside a box, as triangles clipped to the
/// box. Sampling it is uniform over mesh ∩ box with no rejection.
#[derive(Clone, Debug)]
pub struct BlockSurface {
    pieces: Vec<([Vec3; 3], usize)>,
    cumulative: Vec<f64>,
    normals: Vec<Vec3>,
}

/// Sutherland–Hodgman clip of a convex polygon against `x[axis] <= bound`
/// (or `>=` when `upper` is false).
fn clip_polygon(poly: &[Vec3], axis: usize, bound: f64, upper: bool) -> Vec<Vec3> {
    let inside = |p: &Vec3| if upper { p[axis] <= bound } else { p[axis] >= bound };
    let mut out = Vec::with_capacity(poly.len() + 2);
    for (k, a) in poly.iter().enumerate() {
        let b = &poly[(k + 1) % poly.len()];
        match (inside(a), inside(b)) {
            (true, true) => out.push(*b),
            (true, false) | (false, true) => {
                let t = (bound - a[axis]) / (b[axis] - a[axis]);
                let mut x = a + (b - a) * t;
                x[axis] = bound;
                out.push(x);
                if inside(b) {
                    out.push(*b);
                }
            }
            (false, false) => {}
        }
    }
    out
}

impl BlockSurface {
    pub fn new(mesh: &TriangleMesh, bounds: &Aabb) -> Option<Self> {
        let mut pieces = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for face in mesh.faces_in_box(bounds) {
            let mut poly = mesh.triangle(face).to_vec();
            for axis in 0..3 {
                poly = clip_polygon(&poly, axis, bounds.min[axis], false);
                poly = clip_polygon(&poly, axis, bounds.max[axis], true);
                if poly.len() < 3 {
                    break;
                }
            }
            for k in 1..poly.len().saturating_sub(1) {
                let tri = [poly[0], poly[k], poly[k + 1]];
                let area = (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).norm() / 2.0;
                if area > 0.0 {
                    acc += area;
                    pieces.push((tri, face));
                    cumulative.push(acc);
                }
            }
        }
        if pieces.is_empty() {
            return None;
        }
        Some(Self { pieces, cumulative, normals: mesh.face_normals().to_vec() })
    }

    pub fn area(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SurfacePoint {
        let x = rng.random::<f64>() * self.area();
        let k = self.cumulative.partition_point(|&c| c <= x).min(self.pieces.len() - 1);
        let (tri, face) = &self.pieces[k];
        let (r1, r2): (f64, f64) = (rng.random(), rng.random());
        SurfacePoint { point: sample_triangle(tri, r1, r2), normal: self.normals[*face], face: *face }
    }
}

/// Uniform direction within the cone of half-angle `half` about unit `axis`.
fn sample_cone<R: Rng + ?Sized>(axis: &Vec3, half: f64, rng: &mut R) -> Vec3 {
    let cos_t = 1.0 - rng.random::<f64>() * (1.0 - half.cos());
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let phi = rng.random_range(0.0..TAU);
    let helper = if axis.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = axis.cross(&helper).normalize();
    let v = axis.cross(&u);
    (axis * cos_t + (u * phi.cos() + v * phi.sin()) * sin_t).normalize()
}

pub fn sample_antipodal_in_block(
    mesh: &TriangleMesh,
    block: &Block,
    params: &BlockParams,
    gripper: &GripperModel,
) -> (Vec<Grasp>, SamplingStats) {
    let mut stats = SamplingStats::default();
    let mut out = Vec::new();
    let Some(surface) = BlockSurface::new(mesh, &block.bounds) else {
        return (out, stats);
    };
    let half = params.gamma.atan();
    let cos_half = half.cos();
    let mut rng = rng::stream(params.seed, &[]);
    while out.len() < params.n_target && stats.attempts < params.max_iters {
        stats.attempts += 1;
        let s = surface.sample(&mut rng);
        let dir = sample_cone(&-s.normal, half, &mut rng);
        let Some(hit) = mesh.ray_intersections(&s.point, &dir).into_iter().next() else {
            stats.no_second_contact += 1;
            continue;
        };
        if hit.distance > gripper.max_width {
            stats.too_wide += 1;
            continue;
        }
        // line from p2 back to p1 is -dir; inward normal at p2 is -n2
        if dir.dot(&hit.normal) < cos_half {
            stats.not_antipodal += 1;
            continue;
        }
        let (p1, p2) = (s.point, hit.point);
        let mut accepted = None;
        for _ in 0..params.roll_retries.max(1) {
            let roll = rng.random_range(0.0..TAU);
            let Ok(pose) = grasp_pose_from_contacts(&p1, &p2, roll) else {
                break;
            };
            if !mesh.collides(&gripper.body, &pose) {
                accepted = Some(pose);
                break;
            }
        }
        match accepted {
            Some(pose) => {
                stats.accepted += 1;
                out.push(Grasp {
                    pose,
                    contacts: [p1, p2],
                    normals: [s.normal, hit.normal],
                });
            }
            None => stats.collided += 1,
        }
    }
    (out, stats)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AntipodalParams {
    pub gamma: f64,
    /// Blocks per axis.
    pub blocks: usize,
    pub overlap: f64,
    /// Attempts per block = `iter_factor × quota`.
    pub iter_factor: usize,
    pub roll_retries: usize,
    pub seed: u64,
}

impl Default for AntipodalParams {
    fn default() -> Self {
        Self {
            gamma: 0.4,
            blocks: 3,
            overlap: 0.1,
            iter_factor: 20,
            roll_retries: 8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct GraspGeneration {
    pub grasps: Vec<Grasp>,
    pub stats: SamplingStats,
    pub duplicates_removed: usize,
    /// Nonzero when fewer than the requested grasps were found.
    pub shortfall: usize,
}

fn grasp_order(a: &Grasp, b: &Grasp) -> std::cmp::Ordering {
    let ka = a.pose.to_row_major();
    let kb = b.pose.to_row_major();
    ka.iter()
        .zip(kb.iter())
        .map(|(x, y)| x.total_cmp(y))
        .chain(
            a.contacts
                .iter()
                .flat_map(|c| c.iter().copied())
                .zip(b.contacts.iter().flat_map(|c| c.iter().copied()))
                .map(|(x, y)| x.total_cmp(&y)),
        )
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Runs every block (in parallel under [`Exec::Parallel`]) with per-block
/// quota `ceil(g_target / i³)`, then sorts canonically and removes
/// near-duplicate poses.
pub fn generate_grasps(
    mesh: &TriangleMesh,
    g_target: usize,
    params: &AntipodalParams,
    gripper: &GripperModel,
    exec: Exec,
) -> Result<GraspGeneration> {
    if g_target < 2 {
        return Err(Error::InvalidArgument("g_target must be >= 2".into()));
    }
    if !(params.gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma {} must be > 0", params.gamma)));
    }
    let blocks = block_decomposition(&mesh.aabb(), params.blocks, params.overlap)?;
    let quota = g_target.div_ceil(blocks.len());
    let per_block = par::map_slice(exec, &blocks, |b| {
        let flat = ((b.index[0] * params.blocks + b.index[1]) * params.blocks + b.index[2]) as u64;
        let bp = BlockParams {
            gamma: params.gamma,
            n_target: quota,
            max_iters: params.iter_factor * quota,
            seed: rng::derive_seed(params.seed, &[tag::BLOCK, flat]),
            roll_retries: params.roll_retries,
        };
        sample_antipodal_in_block(mesh, b, &bp, gripper)
    });
    let mut stats = SamplingStats::default();
    let mut all = Vec::new();
    for (g, s) in per_block {
        stats.absorb(&s);
        all.extend(g);
    }
    all.sort_by(grasp_order);
    let mut grasps: Vec<Grasp> = Vec::with_capacity(all.len());
    for g in all {
        let dup = grasps.iter().any(|k| {
            (k.pose.translation - g.pose.translation).norm() < 1e-6 && k.pose.rotation_distance(&g.pose) < 1e-4
        });
        if !dup {
            grasps.push(g);
        }
    }
    let duplicates_removed = stats.accepted - grasps.len();
    Ok(GraspGeneration {
        shortfall: g_target.saturating_sub(grasps.len()),
        grasps,
        stats,
        duplicates_removed,
    })
}
