//! Synthetic depth scenes: an object resting on a table seen by two roughly
//! antipodal depth cameras, back-projected and re-expressed in the object
//! frame, then cropped to each gripper's closing region.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{to_json, ObjectRecord};
use crate::error::{Error, Result};
use crate::geom::{Mat3, OrientedBox, Transform, Vec3};
use crate::mesh::{primitives, stable_pose, StablePose, TriangleMesh};
use crate::par::{self, Exec};
use crate::rng::{self, tag};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Intrinsics {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Default for Intrinsics {
    fn default() -> Self {
        Self { width: 640, height: 480, fx: 550.0, fy: 550.0, cx: 320.0, cy: 240.0 }
    }
}

impl Intrinsics {
    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx > 0.0
            && self.cx < self.width as f64
            && self.cy > 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid camera intrinsics {self:?}")))
        }
    }
}

/// Pinhole depth camera. Camera frame: +Z forward, +X right, +Y down.
/// `pose` maps camera coordinates to table coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    #[serde(flatten)]
    pub intrinsics: Intrinsics,
    pub pose: Transform,
}

impl CameraModel {
    pub fn new(intrinsics: Intrinsics, pose: Transform) -> Result<Self> {
        intrinsics.validate()?;
        Ok(Self { intrinsics, pose })
    }

    /// Camera at `eye` looking at `target`; image rows run against `up`.
    pub fn look_at(intrinsics: Intrinsics, eye: Vec3, target: Vec3, up: Vec3) -> Result<Self> {
        let z = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::InvalidArgument("camera eye coincides with target".into()))?;
        let x = z
            .cross(&up)
            .try_normalize(1e-9)
            .or_else(|| z.cross(&Vec3::y()).try_normalize(1e-9))
            .unwrap_or_else(|| z.cross(&Vec3::x()).normalize());
        let y = z.cross(&x);
        Self::new(intrinsics, Transform::new(Mat3::from_columns(&[x, y, z]), eye))
    }

    pub fn position(&self) -> Vec3 {
        self.pose.translation
    }

    pub fn optical_axis(&self) -> Vec3 {
        self.pose.axis_z()
    }

    /// Unnormalized camera-frame ray through pixel `(u, v)`, with unit z.
    pub fn pixel_ray(&self, u: f64, v: f64) -> Vec3 {
        let k = &self.intrinsics;
        Vec3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0)
    }

    /// Pixel coordinates of a table-frame point, if it is in front.
    pub fn project(&self, p: &Vec3) -> Option<(f64, f64)> {
        let c = self.pose.inverse().apply_point(p);
        if c.z <= 0.0 {
            return None;
        }
        let k = &self.intrinsics;
        Some((k.fx * c.x / c.z + k.cx, k.fy * c.y / c.z + k.cy))
    }
}

/// Places the object on the table plane; the table frame is the world.
pub fn place_on_table(mesh: &TriangleMesh, seed: u64) -> Result<StablePose> {
    stable_pose(mesh, seed)
}

/// Radius, elevation and azimuth ranges of the camera hemisphere.
pub const CAMERA_RADIUS: [f64; 2] = [1.5, 2.0];
pub const CAMERA_ELEVATION_DEG: [f64; 2] = [20.0, 70.0];
pub const CAMERA_JITTER_DEG: f64 = 15.0;

fn spherical(r: f64, elevation: f64, azimuth: f64) -> Vec3 {
    Vec3::new(
        r * elevation.cos() * azimuth.cos(),
        r * elevation.cos() * azimuth.sin(),
        r * elevation.sin(),
    )
}

/// Spherical coordinates (radius, elevation, azimuth; radians) of a pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraPlacement {
    pub radius: f64,
    pub elevation: f64,
    pub azimuth: f64,
}

pub fn sample_camera_placements(seed: u64) -> [CameraPlacement; 2] {
    let mut r = rng::stream(seed, &[tag::CAMERA]);
    let deg = f64::to_radians;
    let first = CameraPlacement {
        radius: r.random_range(CAMERA_RADIUS[0]..=CAMERA_RADIUS[1]),
        elevation: deg(r.random_range(CAMERA_ELEVATION_DEG[0]..=CAMERA_ELEVATION_DEG[1])),
        azimuth: deg(r.random_range(0.0..360.0)),
    };
    let j = CAMERA_JITTER_DEG;
    let second = CameraPlacement {
        radius: r.random_range(CAMERA_RADIUS[0]..=CAMERA_RADIUS[1]),
        elevation: first.elevation + deg(r.random_range(-j..=j)),
        azimuth: first.azimuth + deg(180.0 + r.random_range(-j..=j)),
    };
    [first, second]
}

/// Two cameras on the hemisphere looking at the table origin.
pub fn sample_camera_pair(seed: u64, intrinsics: Intrinsics) -> Result<[CameraModel; 2]> {
    let [a, b] = sample_camera_placements(seed);
    let make = |p: CameraPlacement| {
        CameraModel::look_at(intrinsics, spherical(p.radius, p.elevation, p.azimuth), Vec3::zeros(), Vec3::z())
    };
    Ok([make(a)?, make(b)?])
}

/// Row-major z-depth image in meters; 0 marks pixels with no hit.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
}

impl DepthImage {
    pub fn at(&self, u: usize, v: usize) -> f64 {
        self.depth[v * self.width + u]
    }

    pub fn valid_pixels(&self) -> usize {
        self.depth.iter().filter(|&&d| d > 0.0).count()
    }
}

/// Ray casts a mesh given in table coordinates. Rays pass through integer
/// pixel coordinates.
pub fn render_world(world: &TriangleMesh, cam: &CameraModel, exec: Exec) -> DepthImage {
    let k = cam.intrinsics;
    let origin = cam.position();
    let rows = par::map_range(exec, k.height, |v| {
        (0..k.width)
            .map(|u| {
                let ray = cam.pixel_ray(u as f64, v as f64);
                let norm = ray.norm();
                let dir = cam.pose.apply_vector(&(ray / norm));
                world.first_hit(&origin, &dir).map_or(0.0, |h| h.distance / norm)
            })
            .collect::<Vec<_>>()
    });
    DepthImage { width: k.width, height: k.height, depth: rows.concat() }
}

/// Renders `mesh` placed by `table_from_object`.
pub fn render_depth(mesh: &TriangleMesh, table_from_object: &Transform, cam: &CameraModel, exec: Exec) -> DepthImage {
    render_world(&mesh.transformed(table_from_object), cam, exec)
}

/// Camera-frame points of all nonzero pixels, in row-major pixel order.
pub fn backproject_camera(depth: &DepthImage, cam: &CameraModel) -> Vec<Vec3> {
    let k = cam.intrinsics;
    let mut out = Vec::with_capacity(depth.valid_pixels());
    for v in 0..depth.height {
        for u in 0..depth.width {
            let d = depth.at(u, v);
            if d > 0.0 {
                out.push(Vec3::new((u as f64 - k.cx) * d / k.fx, (v as f64 - k.cy) * d / k.fy, d));
            }
        }
    }
    out
}

/// Table-frame points of all nonzero pixels.
pub fn backproject(depth: &DepthImage, cam: &CameraModel) -> Vec<Vec3> {
    let mut pts = backproject_camera(depth, cam);
    for p in &mut pts {
        *p = cam.pose.apply_point(p);
    }
    pts
}

/// Object frame from the support-plane normal `n_z` and centroid `t`, both
/// in camera coordinates. Returns the camera-to-object transform.
pub fn estimate_object_frame(n_z: &Vec3, t: &Vec3) -> Result<Transform> {
    let len = n_z.norm();
    if !len.is_finite() || (len - 1.0).abs() > 1e-6 {
        return Err(Error::NonUnitNormal(len));
    }
    let h = (n_z.x * n_z.x + n_z.y * n_z.y).sqrt();
    let n_x = if h < 1e-8 { Vec3::x() } else { Vec3::new(n_z.y, -n_z.x, 0.0) / h };
    let n_y = n_z.cross(&n_x);
    Ok(Transform::new(Mat3::from_columns(&[n_x, n_y, *n_z]), *t).inverse())
}

pub fn to_object_frame(cloud: &[Vec3], object_from_cam: &Transform) -> Vec<Vec3> {
    cloud.iter().map(|p| object_from_cam.apply_point(p)).collect()
}

/// Indices of the points inside the closing region posed at `grasp_pose`.
pub fn crop_gripper_volume(cloud: &[Vec3], grasp_pose: &Transform, closing_region: &OrientedBox) -> Vec<usize> {
    let region = closing_region.transformed(grasp_pose);
    let bounds = region.bounding_aabb();
    cloud
        .iter()
        .enumerate()
        .filter(|(_, p)| bounds.contains(p) && region.contains(p))
        .map(|(k, _)| k)
        .collect()
}

/// Lower-inclusive upward: `q < t1` → 0, `t1 ≤ q < t2` → 1, else 2.
pub fn classify_bin(q_score: f64, thresholds: (f64, f64)) -> Result<u8> {
    let (t1, t2) = thresholds;
    if !(0.0 < t1 && t1 < t2 && t2 <= 1.0) {
        return Err(Error::BadThresholds(t1, t2));
    }
    Ok(if q_score < t1 {
        0
    } else if q_score < t2 {
        1
    } else {
        2
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub intrinsics: Intrinsics,
    pub table_half_size: f64,
    /// Points this far above the support plane count as object points.
    pub object_height_threshold: f64,
    /// Half-width of uniform depth noise; 0 disables it.
    pub depth_jitter: f64,
    pub thresholds: (f64, f64),
    /// Pairs whose fused crop has fewer points are skipped.
    pub min_points: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            intrinsics: Intrinsics::default(),
            table_half_size: 3.0,
            object_height_threshold: 0.005,
            depth_jitter: 0.0,
            thresholds: (0.85, 0.92),
            min_points: 32,
        }
    }
}

/// One camera's contribution to a scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraView {
    pub camera: CameraModel,
    pub points: usize,
    pub object_points: usize,
    /// Ground-truth camera-to-object transform.
    pub object_from_cam: Transform,
    /// Camera-to-object transform estimated from the support plane and the
    /// object-point centroid; `None` when the camera saw no object points.
    pub estimated_object_from_cam: Option<Transform>,
}

/// Fused crop of both grippers of one pair. Each point carries the index
/// (0 or 1) of the gripper whose closing region contains it.
#[derive(Clone, Debug, PartialEq)]
pub struct PairCrop {
    pub pair: usize,
    pub a: usize,
    pub b: usize,
    pub class: u8,
    pub q_score: f64,
    pub points: Vec<(Vec3, u8)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSample {
    pub object: String,
    pub scene: u64,
    pub seed: u64,
    pub table_from_object: Transform,
    pub pose_fallback: bool,
    pub views: [CameraView; 2],
    /// Merged cloud of both cameras, table frame.
    pub cloud: Vec<Vec3>,
    /// Same points in the object frame.
    pub object_cloud: Vec<Vec3>,
    pub crops: Vec<PairCrop>,
    /// Pairs dropped for having fewer than `min_points` inside the crops.
    pub skipped: Vec<usize>,
}

fn jitter_depth(depth: &mut DepthImage, amount: f64, seed: u64) {
    if amount <= 0.0 {
        return;
    }
    let mut r = rng::stream(seed, &[tag::JITTER]);
    for d in depth.depth.iter_mut().filter(|d| **d > 0.0) {
        *d += r.random_range(-amount..=amount);
    }
}

/// Renders one scene of an object (given in its object frame) and crops
/// every labeled pair of `record`. `scene` selects the random streams.
pub fn sample_scene(
    mesh: &TriangleMesh,
    record: &ObjectRecord,
    scene: u64,
    cfg: &SceneConfig,
    exec: Exec,
) -> Result<SceneSample> {
    let seed = rng::derive_seed(record.params.seed, &[tag::POSE, scene]);
    let placed = place_on_table(mesh, seed)?;
    let table_from_object = placed.table_from_object;
    let object_from_table = table_from_object.inverse();
    let cameras = sample_camera_pair(seed, cfg.intrinsics)?;
    let world = mesh.transformed(&table_from_object).merged(&primitives::ground_plane(cfg.table_half_size, 0.0));

    let mut cloud = Vec::new();
    let mut object_cloud = Vec::new();
    let mut views = Vec::with_capacity(2);
    for (k, cam) in cameras.iter().enumerate() {
        let mut depth = render_world(&world, cam, exec);
        jitter_depth(&mut depth, cfg.depth_jitter, rng::derive_seed(seed, &[k as u64]));
        let p_cam = backproject_camera(&depth, cam);
        let object_from_cam = object_from_table * cam.pose;
        let p_table: Vec<Vec3> = p_cam.iter().map(|p| cam.pose.apply_point(p)).collect();
        let above: Vec<&Vec3> = p_cam
            .iter()
            .zip(&p_table)
            .filter(|(_, t)| t.z > cfg.object_height_threshold)
            .map(|(c, _)| c)
            .collect();
        let estimated = if above.is_empty() {
            None
        } else {
            let centroid = above.iter().copied().sum::<Vec3>() / above.len() as f64;
            let n_z = cam.pose.inverse().apply_vector(&Vec3::z());
            Some(estimate_object_frame(&n_z.normalize(), &centroid)?)
        };
        object_cloud.extend(to_object_frame(&p_cam, &object_from_cam));
        views.push(CameraView {
            camera: *cam,
            points: p_cam.len(),
            object_points: above.len(),
            object_from_cam,
            estimated_object_from_cam: estimated,
        });
        cloud.extend(p_table);
    }

    let gripper = crate::antipodal::GripperModel::with_width(record.params.gripper_width);
    let labeled: Vec<Option<PairCrop>> = par::map_range(exec, record.pairs.len(), |k| {
        let pair = &record.pairs[k];
        let mut points = Vec::new();
        for (channel, g) in [pair.a, pair.b].into_iter().enumerate() {
            let idx = crop_gripper_volume(&object_cloud, &record.grasps[g].pose, &gripper.closing_region);
            points.extend(idx.into_iter().map(|i| (object_cloud[i], channel as u8)));
        }
        (points.len() >= cfg.min_points).then_some(PairCrop {
            pair: k,
            a: pair.a,
            b: pair.b,
            class: 0,
            q_score: pair.label.q_score.unwrap_or(f64::NAN),
            points,
        })
    });
    let mut crops = Vec::new();
    let mut skipped = Vec::new();
    for (k, c) in labeled.into_iter().enumerate() {
        match c {
            Some(mut c) => {
                if !c.q_score.is_finite() {
                    return Err(Error::Validation(format!(
                        "{}: pair {k} has no q_score; run finalize first",
                        record.name
                    )));
                }
                c.class = classify_bin(c.q_score, cfg.thresholds)?;
                crops.push(c);
            }
            None => skipped.push(k),
        }
    }
    Ok(SceneSample {
        object: record.name.clone(),
        scene,
        seed,
        table_from_object,
        pose_fallback: placed.fallback,
        views: [views[0].clone(), views[1].clone()],
        cloud,
        object_cloud,
        crops,
        skipped,
    })
}

/// Resamples a crop to exactly `n` points: a uniform subset without
/// replacement when larger, uniform draws with replacement when smaller.
pub fn resample<T: Copy>(points: &[T], n: usize, seed: u64) -> Vec<T> {
    let mut r = rng::stream(seed, &[tag::RESAMPLE]);
    if points.is_empty() || n == 0 {
        return Vec::new();
    }
    if points.len() == n {
        return points.to_vec();
    }
    if points.len() > n {
        let mut idx = index::sample(&mut r, points.len(), n).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| points[i]).collect()
    } else {
        (0..n).map(|_| points[r.random_range(0..points.len())]).collect()
    }
}

pub fn write_ply(points: &[Vec3], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut s = format!(
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        points.len()
    );
    for p in points {
        s.push_str(&format!("{:?} {:?} {:?}\n", p.x, p.y, p.z));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub const SAMPLES_SCHEMA: &str = "da2gen-samples-1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub pair: usize,
    pub a: usize,
    pub b: usize,
    pub class: u8,
    pub q_score: f64,
    /// Fused crop size before resampling.
    pub raw_points: usize,
}

/// Header describing one `.bin` file: `records × n_points × 4` little-endian
/// f32 values, row-major; channels are x, y, z (object frame) and gripper.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleHeader {
    pub schema_version: String,
    pub object: String,
    pub scene: u64,
    pub dtype: String,
    pub shape: [usize; 3],
    pub channels: [String; 4],
    pub records: Vec<SampleEntry>,
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub object: String,
    pub scene: u64,
    pub data: String,
    pub header: String,
    pub cloud: Option<String>,
    pub table_from_object: Transform,
    pub pose_fallback: bool,
    pub views: Vec<CameraView>,
    pub exported: usize,
    pub skipped: usize,
    pub class_counts: [usize; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub schema_version: String,
    pub n_points: usize,
    pub scenes: Vec<SceneEntry>,
}

pub const SCENE_MANIFEST_FILE: &str = "scenes.json";

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Writes one `.bin` + header per scene, optional PLY clouds, and a scene
/// manifest under `dir`.
pub fn export_training_samples(
    samples: &[SceneSample],
    dir: impl AsRef<Path>,
    n_points: usize,
    with_ply: bool,
) -> Result<SceneManifest> {
    if n_points == 0 {
        return Err(Error::InvalidArgument("n_points must be positive".into()));
    }
    let dir = dir.as_ref();
    let mut scenes = Vec::with_capacity(samples.len());
    for s in samples {
        let stem = format!("{}_scene{:03}", s.object, s.scene);
        let mut data = Vec::with_capacity(s.crops.len() * n_points * 16);
        let mut records = Vec::with_capacity(s.crops.len());
        let mut class_counts = [0; 3];
        for c in &s.crops {
            let pts = resample(&c.points, n_points, rng::derive_seed(s.seed, &[c.pair as u64]));
            for (p, ch) in pts {
                for v in [p.x as f32, p.y as f32, p.z as f32, ch as f32] {
                    data.extend_from_slice(&v.to_le_bytes());
                }
            }
            class_counts[c.class as usize] += 1;
            records.push(SampleEntry {
                pair: c.pair,
                a: c.a,
                b: c.b,
                class: c.class,
                q_score: c.q_score,
                raw_points: c.points.len(),
            });
        }
        let header = SampleHeader {
            schema_version: SAMPLES_SCHEMA.into(),
            object: s.object.clone(),
            scene: s.scene,
            dtype: "<f4".into(),
            shape: [records.len(), n_points, 4],
            channels: ["x", "y", "z", "gripper"].map(String::from),
            records,
            skipped: s.skipped.len(),
        };
        let bin = PathBuf::from(format!("{stem}.bin"));
        let hdr = PathBuf::from(format!("{stem}.json"));
        write_file(&dir.join(&bin), &data)?;
        write_file(&dir.join(&hdr), to_json(&header)?.as_bytes())?;
        let cloud = if with_ply {
            let ply = format!("{stem}.ply");
            write_ply(&s.cloud, dir.join(&ply))?;
            Some(ply)
        } else {
            None
        };
        scenes.push(SceneEntry {
            object: s.object.clone(),
            scene: s.scene,
            data: bin.display().to_string(),
            header: hdr.display().to_string(),
            cloud,
            table_from_object: s.table_from_object,
            pose_fallback: s.pose_fallback,
            views: s.views.to_vec(),
            exported: s.crops.len(),
            skipped: s.skipped.len(),
            class_counts,
        });
    }
    let manifest = SceneManifest { schema_version: SAMPLES_SCHEMA.into(), n_points, scenes };
    write_file(&dir.join(SCENE_MANIFEST_FILE), to_json(&manifest)?.as_bytes())?;
    Ok(manifest)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderedScene {
    pub object: String,
    pub scene: u64,
    pub cloud: String,
    pub points: usize,
    pub table_from_object: Transform,
    pub pose_fallback: bool,
    pub views: Vec<CameraView>,
}

/// Writes each scene's merged table-frame cloud as PLY plus `scenes.json`.
pub fn write_scene_clouds(samples: &[SceneSample], dir: impl AsRef<Path>) -> Result<Vec<RenderedScene>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::with_capacity(samples.len());
    for s in samples {
        let cloud = format!("{}_scene{:03}.ply", s.object, s.scene);
        write_ply(&s.cloud, dir.join(&cloud))?;
        out.push(RenderedScene {
            object: s.object.clone(),
            scene: s.scene,
            cloud,
            points: s.cloud.len(),
            table_from_object: s.table_from_object,
            pose_fallback: s.pose_fallback,
            views: s.views.to_vec(),
        });
    }
    write_file(&dir.join(SCENE_MANIFEST_FILE), to_json(&out)?.as_bytes())?;
    Ok(out)
}

/// Reads a `.bin` sample file back as `[x, y, z, gripper]` rows.
pub fn read_sample_file(path: impl AsRef<Path>) -> Result<Vec<[f32; 4]>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 16 != 0 {
        return Err(Error::Validation(format!("{}: length not a multiple of 16", path.display())));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|r| std::array::from_fn(|k| f32::from_le_bytes(r[4 * k..4 * k + 4].try_into().unwrap())))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives::{cuboid, uv_sphere};

    fn small() -> Intrinsics {
        Intrinsics { width: 80, height: 60, fx: 70.0, fy: 70.0, cx: 40.0, cy: 30.0 }
    }

    fn axis_miss(cam: &CameraModel, target: &Vec3) -> f64 {
        let d = target - cam.position();
        (d - cam.optical_axis() * d.dot(&cam.optical_axis())).norm()
    }

    #[test]
    fn look_at_frame() {
        let cam = CameraModel::look_at(small(), Vec3::new(1.0, 0.0, 0.0), Vec3::zeros(), Vec3::z()).unwrap();
        assert!((cam.pose.axis_x() - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
        assert!((cam.pose.axis_y() - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-15);
        assert!(cam.pose.orthonormality_error() < 1e-12);
        let down = CameraModel::look_at(small(), Vec3::new(0.0, 0.0, 2.0), Vec3::zeros(), Vec3::z()).unwrap();
        assert!(down.pose.orthonormality_error() < 1e-12);
        assert!(CameraModel::look_at(small(), Vec3::zeros(), Vec3::zeros(), Vec3::z()).is_err());
    }

    #[test]
    fn camera_pairs_stay_in_range() {
        for seed in 0..500 {
            let [a, b] = sample_camera_placements(seed);
            let diff = (b.azimuth - a.azimuth).to_degrees();
            assert!((165.0..=195.0).contains(&diff), "{diff}");
            for p in [a, b] {
                assert!((1.5..=2.0).contains(&p.radius));
            }
            let cams = sample_camera_pair(seed, Intrinsics::default()).unwrap();
            for c in &cams {
                assert!(axis_miss(c, &Vec3::zeros()) < 1e-9);
                assert!((1.5 - 1e-12..=2.0 + 1e-12).contains(&c.position().norm()));
            }
        }
    }

    #[test]
    fn plane_seen_from_above() {
        let h = 1.7;
        let cam = CameraModel::look_at(small(), Vec3::new(0.0, 0.0, h), Vec3::zeros(), Vec3::z()).unwrap();
        let plane = primitives::ground_plane(5.0, 0.0);
        let depth = render_world(&plane, &cam, Exec::Sequential);
        assert_eq!(depth.valid_pixels(), 80 * 60);
        assert!(depth.depth.iter().all(|d| (d - h).abs() < 1e-9));
        let pts = backproject(&depth, &cam);
        assert!(pts.iter().all(|p| p.z.abs() < 1e-6));
    }

    #[test]
    fn nothing_in_view_renders_zero() {
        let cam = CameraModel::look_at(small(), Vec3::new(0.0, 0.0, 2.0), Vec3::zeros(), Vec3::z()).unwrap();
        let behind = cuboid(Vec3::new(0.0, 0.0, 5.0), Vec3::new(1.0, 1.0, 1.0));
        let depth = render_world(&behind, &cam, Exec::Parallel);
        assert!(depth.depth.iter().all(|&d| d == 0.0));
        assert!(backproject(&depth, &cam).is_empty());
    }

    #[test]
    fn principal_point_backprojects_on_axis() {
        let cam = CameraModel::new(small(), Transform::identity()).unwrap();
        let mut depth = DepthImage { width: 80, height: 60, depth: vec![0.0; 80 * 60] };
        depth.depth[30 * 80 + 40] = 2.0;
        assert_eq!(backproject_camera(&depth, &cam), vec![Vec3::new(0.0, 0.0, 2.0)]);
    }

    #[test]
    fn sphere_hits_lie_on_tessellation() {
        let (r, stacks, slices) = (0.3, 24, 48);
        let c = Vec3::new(0.1, -0.05, 0.3);
        let sphere = uv_sphere(c, r, stacks, slices);
        let cam = CameraModel::look_at(small(), Vec3::new(1.2, 0.4, 1.0), c, Vec3::z()).unwrap();
        let depth = render_world(&sphere, &cam, Exec::Parallel);
        let pts = backproject(&depth, &cam);
        assert!(pts.len() > 100);
        let cell = (std::f64::consts::PI / stacks as f64).hypot(std::f64::consts::TAU / slices as f64);
        let chord = r * (1.0 - cell.cos());
        for p in &pts {
            let d = (p - c).norm();
            assert!(d <= r + 1e-9 && d >= r - chord, "{d}");
        }
        // reprojection lands back on the source pixel
        let mut idx = 0;
        for v in 0..depth.height {
            for u in 0..depth.width {
                if depth.at(u, v) > 0.0 {
                    let (pu, pv) = cam.project(&pts[idx]).unwrap();
                    assert!((pu - u as f64).hypot(pv - v as f64) < 0.5);
                    idx += 1;
                }
            }
        }
    }

    #[test]
    fn object_frame_examples() {
        let t = estimate_object_frame(&Vec3::z(), &Vec3::zeros()).unwrap();
        assert_eq!(t, Transform::identity());
        let t = estimate_object_frame(&Vec3::x(), &Vec3::zeros()).unwrap();
        let r = t.inverse().rotation;
        assert!((r.column(0) - Vec3::new(0.0, -1.0, 0.0)).norm() < 1e-15);
        assert!((r.column(1) - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-15);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
        assert!(matches!(estimate_object_frame(&Vec3::new(0.0, 0.0, 1.1), &Vec3::zeros()), Err(Error::NonUnitNormal(_))));
        let t = estimate_object_frame(&-Vec3::z(), &Vec3::new(1.0, 2.0, 3.0)).unwrap();
        assert!(t.orthonormality_error() < 1e-12);
        assert!(t.apply_point(&Vec3::new(1.0, 2.0, 3.0)).norm() < 1e-15);
    }

    #[test]
    fn crop_matches_scan() {
        let region = OrientedBox::axis_aligned(Vec3::zeros(), Vec3::new(0.085, 0.021, 0.037));
        let pose = Transform::from_axis_angle(&Vec3::new(1.0, 2.0, 0.5).normalize(), 0.8)
            * Transform::from_translation(Vec3::new(0.01, 0.0, 0.0));
        let mut r = rng::stream(3, &[]);
        let cloud: Vec<Vec3> = (0..20_000)
            .map(|_| Vec3::new(r.random_range(-0.06..0.06), r.random_range(-0.06..0.06), r.random_range(-0.06..0.06)))
            .chain([pose.translation, pose.translation + Vec3::new(1.0, 0.0, 0.0)])
            .collect();
        let got = crop_gripper_volume(&cloud, &pose, &region);
        let inv = pose.inverse();
        let expect: Vec<usize> = (0..cloud.len())
            .filter(|&k| {
                let q = inv.apply_point(&cloud[k]);
                q.x.abs() <= 0.0425 && q.y.abs() <= 0.0105 && q.z.abs() <= 0.0185
            })
            .collect();
        assert_eq!(got, expect);
        assert!(got.contains(&20_000));
        assert!(!got.contains(&20_001));
    }

    #[test]
    fn class_thresholds() {
        let t = (0.85, 0.92);
        assert_eq!(classify_bin(0.93, t).unwrap(), 2);
        assert_eq!(classify_bin(0.92, t).unwrap(), 2);
        assert_eq!(classify_bin(0.85, t).unwrap(), 1);
        assert_eq!(classify_bin(0.10, t).unwrap(), 0);
        assert!(matches!(classify_bin(0.5, (0.9, 0.8)), Err(Error::BadThresholds(..))));
        assert!(classify_bin(0.5, (0.0, 0.8)).is_err());
    }

    #[test]
    fn resample_sizes() {
        let pts: Vec<u32> = (0..100).collect();
        let down = resample(&pts, 40, 1);
        assert_eq!(down.len(), 40);
        assert!(down.windows(2).all(|w| w[0] < w[1]));
        let up = resample(&pts[..10], 40, 1);
        assert_eq!(up.len(), 40);
        assert!(up.iter().all(|v| *v < 10));
        assert_eq!(resample(&pts, 40, 1), down);
        assert_eq!(resample(&pts, 100, 1), pts);
    }
}
