use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::hull::{convex_hull, HullFacet};
use super::TriangleMesh;
use crate::error::{Error, Result};
use crate::geom::{rotation_between, Mat3, Transform, Vec3};
use crate::rng::{self, tag};

/// Gravity direction in the table frame.
pub const GRAVITY: Vec3 = Vec3::new(0.0, 0.0, -1.0);

/// Resting pose of an object on the table plane z = 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StablePose {
    /// Object frame to table frame.
    pub table_from_object: Transform,
    /// Outward normal (object frame) of the supporting facet.
    pub support_normal: Vec3,
    /// Set when no facet passed the center-of-mass projection test, or the
    /// hull was flat and the largest face was used instead.
    pub fallback: bool,
    pub yaw: f64,
}

/// One candidate resting facet, for inspection and testing.
#[derive(Clone, Debug)]
pub struct RestingCandidate {
    pub facet: HullFacet,
    pub stable: bool,
    /// `(R · ẑ) · g` for the rotation that puts this facet down.
    pub up_dot_gravity: f64,
}

fn support_rotation(normal: &Vec3) -> Mat3 {
    rotation_between(normal, &GRAVITY)
}

pub fn resting_candidates(mesh: &TriangleMesh) -> Result<Vec<RestingCandidate>> {
    let hull = convex_hull(mesh.vertices())?;
    let com = mesh.center_of_mass();
    Ok(hull
        .facets()
        .into_iter()
        .map(|facet| {
            let r = support_rotation(&facet.normal);
            let stable = facet.contains_projection(&com, 1e-9);
            RestingCandidate {
                up_dot_gravity: (r * Vec3::z()).dot(&GRAVITY),
                stable,
                facet,
            }
        })
        .collect())
}

/// Chooses the stable facet whose rotated +Z is most opposed to gravity,
/// applies a seeded uniform yaw, and places the object with its lowest
/// point on z = 0 and its center of mass above the table origin.
pub fn stable_pose(mesh: &TriangleMesh, seed: u64) -> Result<StablePose> {
    let yaw = rng::stream(seed, &[tag::POSE]).random_range(0.0..TAU);
    let (normal, fallback) = match resting_candidates(mesh) {
        Ok(cands) => {
            let better = |a: &RestingCandidate, b: &RestingCandidate| {
                // smaller dot first, then larger area
                if (a.up_dot_gravity - b.up_dot_gravity).abs() > 1e-9 {
                    a.up_dot_gravity < b.up_dot_gravity
                } else {
                    a.facet.area > b.facet.area + 1e-12
                }
            };
            let pick = |only_stable: bool| {
                let mut best: Option<&RestingCandidate> = None;
                for c in cands.iter().filter(|c| c.stable || !only_stable) {
                    if best.is_none_or(|b| better(c, b)) {
                        best = Some(c);
                    }
                }
                best
            };
            match pick(true) {
                Some(c) => (c.facet.normal, false),
                None => {
                    let largest = cands
                        .iter()
                        .reduce(|a, b| if b.facet.area > a.facet.area { b } else { a })
                        .ok_or_else(|| Error::DegenerateMesh("hull has no facets".into()))?;
                    (largest.facet.normal, true)
                }
            }
        }
        Err(Error::DegenerateMesh(_)) => {
            let f = (0..mesh.face_count())
                .max_by(|&a, &b| mesh.face_areas()[a].total_cmp(&mesh.face_areas()[b]))
                .unwrap();
            let n = mesh.face_normals()[f];
            // pick the side that keeps +Z up
            let up = |n: &Vec3| (support_rotation(n) * Vec3::z()).dot(&GRAVITY);
            (if up(&-n) < up(&n) { -n } else { n }, true)
        }
        Err(e) => return Err(e),
    };
    let rot = Transform::from_axis_angle(&Vec3::z(), yaw).rotation * support_rotation(&normal);
    let com = rot * mesh.center_of_mass();
    let min_z = mesh
        .vertices()
        .iter()
        .map(|v| (rot * v).z)
        .fold(f64::INFINITY, f64::min);
    Ok(StablePose {
        table_from_object: Transform::new(rot, Vec3::new(-com.x, -com.y, -min_z)),
        support_normal: normal,
        fallback,
        yaw,
    })
}
