//! Incremental 3D convex hull and coplanar facet grouping.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};

#[derive(Clone, Debug)]
pub struct ConvexHull {
    pub points: Vec<Vec3>,
    /// Outward-wound triangles indexing `points`.
    pub triangles: Vec<[usize; 3]>,
    pub tolerance: f64,
}

/// A planar hull facet made of one or more coplanar triangles.
#[derive(Clone, Debug)]
pub struct HullFacet {
    pub normal: Vec3,
    pub offset: f64,
    pub triangles: Vec<[Vec3; 3]>,
    pub area: f64,
}

fn tri_normal(p: &[Vec3], t: &[usize; 3]) -> Vec3 {
    (p[t[1]] - p[t[0]]).cross(&(p[t[2]] - p[t[0]]))
}

pub fn convex_hull(input: &[Vec3]) -> Result<ConvexHull> {
    let mut seen = HashSet::new();
    let points: Vec<Vec3> = input
        .iter()
        .filter(|p| seen.insert([p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]))
        .copied()
        .collect();
    if points.len() < 4 {
        return Err(Error::DegenerateMesh("fewer than 4 distinct points".into()));
    }
    let scale = Aabb::from_points(points.iter()).diagonal();
    let eps = 1e-10 * scale.max(1e-12);

    let i0 = (0..points.len())
        .min_by(|&a, &b| points[a].x.total_cmp(&points[b].x))
        .unwrap();
    let far = |f: &dyn Fn(&Vec3) -> f64| {
        (0..points.len())
            .max_by(|&a, &b| f(&points[a]).total_cmp(&f(&points[b])))
            .unwrap()
    };
    let p0 = points[i0];
    let i1 = far(&|p| (p - p0).norm());
    let line = (points[i1] - p0).normalize();
    let i2 = far(&|p| (p - p0).cross(&line).norm());
    let plane_n = (points[i1] - p0).cross(&(points[i2] - p0));
    if plane_n.norm() < eps * scale {
        return Err(Error::DegenerateMesh("points are collinear".into()));
    }
    let plane_n = plane_n.normalize();
    let i3 = far(&|p| (p - p0).dot(&plane_n).abs());
    if (points[i3] - p0).dot(&plane_n).abs() < eps {
        return Err(Error::DegenerateMesh("points are coplanar".into()));
    }

    let interior = (points[i0] + points[i1] + points[i2] + points[i3]) / 4.0;
    let mut tris: Vec<[usize; 3]> = Vec::new();
    for t in [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]] {
        let n = tri_normal(&points, &t);
        if n.dot(&(points[t[0]] - interior)) < 0.0 {
            tris.push([t[0], t[2], t[1]]);
        } else {
            tris.push(t);
        }
    }
    let mut alive = vec![true; 4];
    let initial = [i0, i1, i2, i3];

    for (pi, p) in points.iter().enumerate() {
        if initial.contains(&pi) {
            continue;
        }
        let visible: Vec<usize> = (0..tris.len())
            .filter(|&f| alive[f])
            .filter(|&f| {
                let t = &tris[f];
                let n = tri_normal(&points, t);
                let len = n.norm();
                len > 0.0 && n.dot(&(p - points[t[0]])) / len > eps
            })
            .collect();
        if visible.is_empty() {
            continue;
        }
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for &f in &visible {
            let t = tris[f];
            for k in 0..3 {
                directed.insert((t[k], t[(k + 1) % 3]), f);
            }
        }
        let mut horizon: Vec<(usize, usize)> = directed
            .keys()
            .filter(|(a, b)| !directed.contains_key(&(*b, *a)))
            .copied()
            .collect();
        horizon.sort_unstable();
        for &f in &visible {
            alive[f] = false;
        }
        for (a, b) in horizon {
            tris.push([a, b, pi]);
            alive.push(true);
        }
    }
    let triangles = tris
        .into_iter()
        .zip(alive)
        .filter_map(|(t, a)| a.then_some(t))
        .collect();
    Ok(ConvexHull {
        points,
        triangles,
        tolerance: eps,
    })
}

impl ConvexHull {
    /// Groups triangles by plane (unit normal within 1e-9, offset within tolerance).
    pub fn facets(&self) -> Vec<HullFacet> {
        let mut facets: Vec<HullFacet> = Vec::new();
        for t in &self.triangles {
            let raw = tri_normal(&self.points, t);
            let len = raw.norm();
            if len <= 0.0 {
                continue;
            }
            let n = raw / len;
            let d = n.dot(&self.points[t[0]]);
            let tri = t.map(|i| self.points[i]);
            let area = 0.5 * len;
            match facets
                .iter_mut()
                .find(|f| f.normal.dot(&n) > 1.0 - 1e-9 && (f.offset - d).abs() <= 10.0 * self.tolerance)
            {
                Some(f) => {
                    f.area += area;
                    f.triangles.push(tri);
                }
                None => facets.push(HullFacet {
                    normal: n,
                    offset: d,
                    triangles: vec![tri],
                    area,
                }),
            }
        }
        // recompute normals area-weighted for stability
        for f in &mut facets {
            let s: Vec3 = f
                .triangles
                .iter()
                .map(|t| (t[1] - t[0]).cross(&(t[2] - t[0])))
                .sum();
            f.normal = s.normalize();
        }
        facets
    }
}

impl HullFacet {
    /// Whether the orthogonal projection of `p` onto the facet plane falls
    /// inside the facet polygon (inclusive, relative tolerance `tol`).
    pub fn contains_projection(&self, p: &Vec3, tol: f64) -> bool {
        let q = p - self.normal * (self.normal.dot(p) - self.offset);
        self.triangles.iter().any(|t| {
            let n = (t[1] - t[0]).cross(&(t[2] - t[0]));
            let nn = n.norm_squared();
            if nn == 0.0 {
                return false;
            }
            (0..3).all(|k| {
                let a = t[k];
                let b = t[(k + 1) % 3];
                (b - a).cross(&(q - a)).dot(&n) / nn >= -tol
            })
        })
    }
}
