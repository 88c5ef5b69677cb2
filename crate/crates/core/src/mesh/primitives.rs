//! Procedural meshes: boxes, spheres, cylinders, and a small corpus of
//! large furniture-like objects (plates, frames, stools, tube chairs) with
//! thin graspable features. Compound objects are unions of closed shells.

use std::f64::consts::TAU;

use super::TriangleMesh;
use crate::geom::Vec3;

fn build(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> TriangleMesh {
    TriangleMesh::new(vertices, faces).expect("procedural mesh is valid").0
}

/// Axis-aligned box with outward winding.
pub fn cuboid(center: Vec3, dims: Vec3) -> TriangleMesh {
    let h = dims * 0.5;
    let vertices = (0..8)
        .map(|i| {
            // bit order matches the classic cube OBJ: 0..3 bottom ring, 4..7 top ring
            let (sx, sy) = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)][i % 4];
            let sz = if i < 4 { -1.0 } else { 1.0 };
            center + Vec3::new(sx * h.x, sy * h.y, sz * h.z)
        })
        .collect();
    let faces = vec![
        [0, 3, 2], [0, 2, 1], [4, 5, 6], [4, 6, 7],
        [0, 1, 5], [0, 5, 4], [1, 2, 6], [1, 6, 5],
        [2, 3, 7], [2, 7, 6], [3, 0, 4], [3, 4, 7],
    ];
    build(vertices, faces)
}

/// Unit cube centered at the origin.
pub fn unit_cube() -> TriangleMesh {
    cuboid(Vec3::zeros(), Vec3::repeat(1.0))
}

pub fn single_triangle() -> TriangleMesh {
    build(
        vec![Vec3::zeros(), Vec3::new(0.3, 0.0, 0.0), Vec3::new(0.0, 0.2, 0.0)],
        vec![[0, 1, 2]],
    )
}

/// Horizontal square at `z`, facing +Z.
pub fn ground_plane(half_size: f64, z: f64) -> TriangleMesh {
    let s = half_size;
    build(
        vec![
            Vec3::new(-s, -s, z),
            Vec3::new(s, -s, z),
            Vec3::new(s, s, z),
            Vec3::new(-s, s, z),
        ],
        vec![[0, 1, 2], [0, 2, 3]],
    )
}

/// Latitude-longitude sphere.
pub fn uv_sphere(center: Vec3, radius: f64, stacks: usize, slices: usize) -> TriangleMesh {
    assert!(stacks >= 2 && slices >= 3);
    let mut vertices = vec![center + Vec3::new(0.0, 0.0, radius)];
    for i in 1..stacks {
        let phi = std::f64::consts::PI * i as f64 / stacks as f64;
        for j in 0..slices {
            let th = TAU * j as f64 / slices as f64;
            vertices.push(center + radius * Vec3::new(phi.sin() * th.cos(), phi.sin() * th.sin(), phi.cos()));
        }
    }
    vertices.push(center - Vec3::new(0.0, 0.0, radius));
    let ring = |i: usize, j: usize| (1 + (i - 1) * slices + j % slices) as u32;
    let south = (vertices.len() - 1) as u32;
    let mut faces = Vec::new();
    for j in 0..slices {
        faces.push([0, ring(1, j), ring(1, j + 1)]);
        faces.push([south, ring(stacks - 1, j + 1), ring(stacks - 1, j)]);
    }
    for i in 1..stacks - 1 {
        for j in 0..slices {
            faces.push([ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)]);
            faces.push([ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)]);
        }
    }
    build(vertices, faces)
}

/// Closed prism approximating a cylinder from `a` to `b`.
pub fn cylinder(a: Vec3, b: Vec3, radius: f64, segments: usize) -> TriangleMesh {
    let w = (b - a).normalize();
    let helper = if w.z.abs() < 0.9 { Vec3::z() } else { Vec3::x() };
    let u = helper.cross(&w).normalize();
    let v = w.cross(&u);
    let n = segments;
    let mut vertices = Vec::with_capacity(2 * n + 2);
    for end in [a, b] {
        for k in 0..n {
            let th = TAU * k as f64 / n as f64;
            vertices.push(end + radius * (u * th.cos() + v * th.sin()));
        }
    }
    vertices.push(a);
    vertices.push(b);
    let (ca, cb) = ((2 * n) as u32, (2 * n + 1) as u32);
    let bot = |k: usize| (k % n) as u32;
    let top = |k: usize| (n + k % n) as u32;
    let mut faces = Vec::with_capacity(4 * n);
    for k in 0..n {
        faces.push([bot(k), bot(k + 1), top(k + 1)]);
        faces.push([bot(k), top(k + 1), top(k)]);
        faces.push([cb, top(k), top(k + 1)]);
        faces.push([ca, bot(k + 1), bot(k)]);
    }
    build(vertices, faces)
}

fn union(parts: Vec<TriangleMesh>) -> TriangleMesh {
    let mut it = parts.into_iter();
    let first = it.next().expect("at least one part");
    it.fold(first, |acc, m| acc.merged(&m))
}

pub fn plate(dims: Vec3) -> TriangleMesh {
    cuboid(Vec3::zeros(), dims)
}

pub fn disc(radius: f64, thickness: f64, segments: usize) -> TriangleMesh {
    let h = Vec3::new(0.0, 0.0, thickness / 2.0);
    cylinder(-h, h, radius, segments)
}

/// Rectangular picture-frame of four bars lying in the XY plane.
pub fn frame(outer_x: f64, outer_y: f64, bar: f64, thickness: f64) -> TriangleMesh {
    let (hx, hy) = (outer_x / 2.0, outer_y / 2.0);
    union(vec![
        cuboid(Vec3::new(0.0, hy - bar / 2.0, 0.0), Vec3::new(outer_x, bar, thickness)),
        cuboid(Vec3::new(0.0, -hy + bar / 2.0, 0.0), Vec3::new(outer_x, bar, thickness)),
        cuboid(Vec3::new(hx - bar / 2.0, 0.0, 0.0), Vec3::new(bar, outer_y, thickness)),
        cuboid(Vec3::new(-hx + bar / 2.0, 0.0, 0.0), Vec3::new(bar, outer_y, thickness)),
    ])
}

/// Round-seat stool with `legs` splayed cylindrical legs.
pub fn round_stool(seat_radius: f64, seat_thickness: f64, height: f64, legs: usize, leg_radius: f64) -> TriangleMesh {
    let seat_z = height - seat_thickness / 2.0;
    let mut parts = vec![cylinder(
        Vec3::new(0.0, 0.0, height - seat_thickness),
        Vec3::new(0.0, 0.0, height),
        seat_radius,
        40,
    )];
    for k in 0..legs {
        let th = TAU * (k as f64 + 0.25) / legs as f64;
        let dir = Vec3::new(th.cos(), th.sin(), 0.0);
        let top = dir * (seat_radius * 0.6) + Vec3::new(0.0, 0.0, seat_z);
        let foot = dir * (seat_radius * 0.95);
        parts.push(cylinder(foot, top, leg_radius, 12));
    }
    union(parts)
}

/// Square-seat stool with four legs and a ring of rungs.
pub fn square_stool(seat: f64, seat_thickness: f64, height: f64, leg_radius: f64) -> TriangleMesh {
    let mut parts = vec![cuboid(
        Vec3::new(0.0, 0.0, height - seat_thickness / 2.0),
        Vec3::new(seat, seat, seat_thickness),
    )];
    let o = seat / 2.0 - 2.0 * leg_radius;
    let corners = [(-o, -o), (o, -o), (o, o), (-o, o)];
    for &(x, y) in &corners {
        parts.push(cylinder(Vec3::new(x, y, 0.0), Vec3::new(x, y, height - seat_thickness / 2.0), leg_radius, 12));
    }
    let rz = height * 0.35;
    for k in 0..4 {
        let (x0, y0) = corners[k];
        let (x1, y1) = corners[(k + 1) % 4];
        parts.push(cylinder(Vec3::new(x0, y0, rz), Vec3::new(x1, y1, rz), leg_radius * 0.7, 10));
    }
    union(parts)
}

/// Chair from a thin seat plate and tubular legs/backrest.
pub fn tube_chair(seat: f64, seat_height: f64, back_height: f64, tube_radius: f64, cantilever: bool) -> TriangleMesh {
    let t = 0.03;
    let h = seat / 2.0 - tube_radius;
    let mut parts = vec![cuboid(Vec3::new(0.0, 0.0, seat_height - t / 2.0), Vec3::new(seat, seat, t))];
    let sz = seat_height - t;
    if cantilever {
        // two side loops: floor runner, front upright, seat rail
        for &x in &[-h, h] {
            parts.push(cylinder(Vec3::new(x, -h, 0.0), Vec3::new(x, h + 0.08, 0.0), tube_radius, 12));
            parts.push(cylinder(Vec3::new(x, h + 0.08, 0.0), Vec3::new(x, h, sz), tube_radius, 12));
            parts.push(cylinder(Vec3::new(x, h, sz - tube_radius), Vec3::new(x, -h, sz - tube_radius), tube_radius, 12));
        }
    } else {
        for &(x, y) in &[(-h, -h), (h, -h), (h, h), (-h, h)] {
            parts.push(cylinder(Vec3::new(x, y, 0.0), Vec3::new(x, y, sz), tube_radius, 12));
        }
    }
    for &x in &[-h, h] {
        parts.push(cylinder(Vec3::new(x, -h, sz), Vec3::new(x, -h - 0.03, back_height), tube_radius, 12));
    }
    parts.push(cylinder(
        Vec3::new(-h - tube_radius, -h - 0.03, back_height - tube_radius),
        Vec3::new(h + tube_radius, -h - 0.03, back_height - tube_radius),
        tube_radius,
        12,
    ));
    union(parts)
}

/// The 10-object demo corpus used by the examples and acceptance tests.
pub fn furniture_corpus() -> Vec<(String, TriangleMesh)> {
    vec![
        ("plate_square".into(), plate(Vec3::new(0.7, 0.7, 0.03))),
        ("plate_rect".into(), plate(Vec3::new(0.8, 0.45, 0.04))),
        ("plate_round".into(), disc(0.38, 0.03, 48)),
        ("frame_square".into(), frame(0.7, 0.7, 0.05, 0.03)),
        ("frame_rect".into(), frame(0.8, 0.5, 0.04, 0.04)),
        ("stool_round_3".into(), round_stool(0.2, 0.04, 0.55, 3, 0.02)),
        ("stool_round_4".into(), round_stool(0.18, 0.035, 0.5, 4, 0.018)),
        ("stool_square".into(), square_stool(0.36, 0.04, 0.6, 0.02)),
        ("tube_chair".into(), tube_chair(0.42, 0.45, 0.85, 0.015, false)),
        ("tube_chair_cantilever".into(), tube_chair(0.42, 0.45, 0.85, 0.015, true)),
    ]
}

/// Simple reference shapes, addressable like the corpus.
pub fn test_shapes() -> Vec<(String, TriangleMesh)> {
    vec![
        ("cube".into(), unit_cube()),
        ("sphere".into(), uv_sphere(Vec3::zeros(), 0.4, 24, 48)),
        ("plate".into(), plate(Vec3::new(0.6, 0.6, 0.04))),
    ]
}
