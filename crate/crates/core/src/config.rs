//! Pipeline configuration, read from one TOML file. Every key has a default;
//! unknown keys are rejected so typos do not silently fall back.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::antipodal::{AntipodalParams, GRIPPER_WIDTH};
use crate::error::{Error, Result};
use crate::metrics::ScoreWeights;
use crate::scene::{Intrinsics, SceneConfig};

/// Environment variable that overrides `workers`.
pub const WORKERS_ENV: &str = "DUALGRASP_WORKERS";

/// Prefix selecting a mesh from the built-in primitive corpus.
pub const BUILTIN_PREFIX: &str = "builtin:";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub scale_range: [f64; 2],
    pub gamma: f64,
    /// Blocks per axis.
    pub blocks: usize,
    pub overlap: f64,
    pub g_target: usize,
    pub iter_factor: usize,
    pub roll_retries: usize,
    pub gripper_width: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        let a = AntipodalParams::default();
        Self {
            scale_range: [0.6, 1.0],
            gamma: a.gamma,
            blocks: a.blocks,
            overlap: a.overlap,
            g_target: 150,
            iter_factor: a.iter_factor,
            roll_retries: a.roll_retries,
            gripper_width: GRIPPER_WIDTH,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelingConfig {
    pub mu: f64,
    pub epsilon: f64,
    pub weights: ScoreWeights,
}

impl Default for LabelingConfig {
    fn default() -> Self {
        Self { mu: 0.4, epsilon: 1e-3, weights: ScoreWeights::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSection {
    pub scenes_per_object: u64,
    pub n_points: usize,
    pub min_points: usize,
    pub thresholds: [f64; 2],
    pub depth_jitter: f64,
    pub table_half_size: f64,
    pub object_height_threshold: f64,
    pub write_ply: bool,
    pub camera: Intrinsics,
}

impl Default for SceneSection {
    fn default() -> Self {
        let s = SceneConfig::default();
        Self {
            scenes_per_object: 1,
            n_points: 2048,
            min_points: s.min_points,
            thresholds: [s.thresholds.0, s.thresholds.1],
            depth_jitter: s.depth_jitter,
            table_half_size: s.table_half_size,
            object_height_threshold: s.object_height_threshold,
            write_ply: false,
            camera: s.intrinsics,
        }
    }
}

impl SceneSection {
    pub fn scene_config(&self) -> SceneConfig {
        SceneConfig {
            intrinsics: self.camera,
            table_half_size: self.table_half_size,
            object_height_threshold: self.object_height_threshold,
            depth_jitter: self.depth_jitter,
            thresholds: (self.thresholds[0], self.thresholds[1]),
            min_points: self.min_points,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dataset_dir: PathBuf,
    pub scenes_dir: PathBuf,
    pub export_dir: PathBuf,
    pub stats_dir: PathBuf,
    pub histogram_bins: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dataset_dir: "out/dataset".into(),
            scenes_dir: "out/scenes".into(),
            export_dir: "out/samples".into(),
            stats_dir: "out/stats".into(),
            histogram_bins: 20,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Thread count; 0 or absent uses all cores.
    pub workers: usize,
    /// Mesh files (OBJ/STL) or `builtin:<name>` entries.
    pub meshes: Vec<String>,
    /// Every `.obj`/`.stl` file in this directory is added, sorted by name.
    pub mesh_dir: Option<PathBuf>,
    pub sampling: SamplingConfig,
    pub labeling: LabelingConfig,
    pub scene: SceneSection,
    pub output: OutputConfig,
}

/// Where a mesh comes from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MeshSource {
    File(PathBuf),
    Builtin(String),
}

impl MeshSource {
    pub fn parse(s: &str, base: &Path) -> Self {
        match s.strip_prefix(BUILTIN_PREFIX) {
            Some(name) => MeshSource::Builtin(name.to_string()),
            None => {
                let p = Path::new(s);
                MeshSource::File(if p.is_absolute() { p.to_path_buf() } else { base.join(p) })
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            MeshSource::Builtin(n) => n.clone(),
            MeshSource::File(p) => p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        }
    }

    /// String stored in dataset records; parses back with [`MeshSource::parse`].
    pub fn label(&self) -> String {
        match self {
            MeshSource::Builtin(n) => format!("{BUILTIN_PREFIX}{n}"),
            MeshSource::File(p) => p.display().to_string(),
        }
    }
}

fn bad<T>(field: &str, reason: impl Into<String>) -> Result<T> {
    Err(Error::config(field, reason))
}

/// Sets `a.b.c = value` in a TOML table. The value is parsed as a TOML
/// literal when possible and taken as a plain string otherwise.
fn apply_override(table: &mut toml::Table, key: &str, value: &str) -> Result<()> {
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty()).ok_or_else(|| Error::config(key, "empty override key"))?;
    let mut cur = table;
    for p in parts {
        cur = cur
            .entry(p)
            .or_insert_with(|| toml::Value::Table(Default::default()))
            .as_table_mut()
            .ok_or_else(|| Error::config(key, format!("{p} is not a table")))?;
    }
    cur.insert(last.to_string(), parsed);
    Ok(())
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides(text, &[])
    }

    /// Parses `text`, applies `key=value` overrides on top, and validates.
    pub fn from_toml_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::config("<document>", e.message().trim()))?;
        for (k, v) in overrides {
            apply_override(&mut table, k, v)?;
        }
        let cfg: PipelineConfig = table.try_into().map_err(|e: toml::de::Error| {
            let msg = e.message().to_string();
            let field = msg
                .split('`')
                .nth(1)
                .filter(|_| msg.starts_with("unknown field"))
                .unwrap_or("<document>")
                .to_string();
            Error::config(&field, msg.trim())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads, validates, and resolves relative paths against the file's
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_with_overrides(path, &[])
    }

    pub fn load_with_overrides(path: impl AsRef<Path>, overrides: &[(String, String)]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        let mut cfg = Self::from_toml_with_overrides(&text, overrides)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output.dataset_dir);
        fix(&mut self.output.scenes_dir);
        fix(&mut self.output.export_dir);
        fix(&mut self.output.stats_dir);
        if let Some(d) = &mut self.mesh_dir {
            fix(d);
        }
        self.meshes = self
            .meshes
            .iter()
            .map(|m| MeshSource::parse(m, base).label())
            .collect();
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sampling;
        let [lo, hi] = s.scale_range;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return bad("sampling.scale_range", format!("need 0 < low < high, got [{lo}, {hi}]"));
        }
        if !(s.gamma > 0.0 && s.gamma.is_finite()) {
            return bad("sampling.gamma", format!("must be > 0, got {}", s.gamma));
        }
        if s.blocks == 0 {
            return bad("sampling.blocks", "must be >= 1");
        }
        if !(0.0..0.5).contains(&s.overlap) {
            return bad("sampling.overlap", format!("must lie in [0, 0.5), got {}", s.overlap));
        }
        if s.g_target < 2 {
            return bad("sampling.g_target", "must be >= 2");
        }
        if s.iter_factor == 0 {
            return bad("sampling.iter_factor", "must be >= 1");
        }
        if !(s.gripper_width > 0.0) {
            return bad("sampling.gripper_width", "must be > 0");
        }
        let l = &self.labeling;
        if !(l.mu > 0.0 && l.mu.is_finite()) {
            return bad("labeling.mu", format!("must be > 0, got {}", l.mu));
        }
        if !(l.epsilon > 0.0 && l.epsilon.is_finite()) {
            return bad("labeling.epsilon", format!("must be > 0, got {}", l.epsilon));
        }
        if l.weights.validate().is_err() {
            let w = l.weights;
            return bad(
                "labeling.weights",
                format!("must be nonnegative and sum to 1, got ({}, {}, {})", w.alpha, w.beta, w.gamma_w),
            );
        }
        let sc = &self.scene;
        let [t1, t2] = sc.thresholds;
        if !(0.0 < t1 && t1 < t2 && t2 <= 1.0) {
            return bad("scene.thresholds", format!("need 0 < t1 < t2 <= 1, got [{t1}, {t2}]"));
        }
        if sc.n_points == 0 {
            return bad("scene.n_points", "must be >= 1");
        }
        if sc.camera.validate().is_err() {
            return bad("scene.camera", "need fx, fy > 0 and the principal point inside the image");
        }
        if !(sc.depth_jitter >= 0.0) {
            return bad("scene.depth_jitter", "must be >= 0");
        }
        if !(sc.table_half_size > 0.0) {
            return bad("scene.table_half_size", "must be > 0");
        }
        if self.output.histogram_bins == 0 {
            return bad("output.histogram_bins", "must be >= 1");
        }
        Ok(())
    }

    /// Mesh list (explicit entries first, then the directory scan).
    pub fn mesh_sources(&self) -> Result<Vec<MeshSource>> {
        let mut out: Vec<MeshSource> = self.meshes.iter().map(|m| MeshSource::parse(m, Path::new(""))).collect();
        if let Some(dir) = &self.mesh_dir {
            let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
            let mut files: Vec<PathBuf> = rd
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    matches!(
                        p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
                        Some("obj" | "stl")
                    )
                })
                .collect();
            files.sort();
            out.extend(files.into_iter().map(MeshSource::File));
        }
        if out.is_empty() {
            return bad("meshes", "no meshes listed and mesh_dir is empty or unset");
        }
        let mut names: Vec<String> = out.iter().map(MeshSource::name).collect();
        names.sort();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return bad("meshes", format!("duplicate object name {}", w[0]));
        }
        Ok(out)
    }

    /// `workers`, overridden by the environment variable when set.
    pub fn effective_workers(&self) -> Result<usize> {
        match std::env::var(WORKERS_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| Error::config(WORKERS_ENV, format!("not a count: {v:?}"))),
            Err(_) => Ok(self.workers),
        }
    }

    pub fn antipodal_params(&self, seed: u64) -> AntipodalParams {
        let s = &self.sampling;
        AntipodalParams {
            gamma: s.gamma,
            blocks: s.blocks,
            overlap: s.overlap,
            iter_factor: s.iter_factor,
            roll_retries: s.roll_retries,
            seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = PipelineConfig::from_toml_str("").unwrap();
        assert_eq!(c, PipelineConfig::default());
        assert_eq!(c.sampling.gamma, 0.4);
        assert_eq!(c.sampling.blocks, 3);
        assert_eq!(c.sampling.g_target, 150);
        assert_eq!(c.scene.thresholds, [0.85, 0.92]);
    }

    #[test]
    fn errors_name_the_field() {
        let cases = [
            ("[sampling]\ngamma = -1.0", "sampling.gamma"),
            ("[sampling]\nscale_range = [1.0, 0.6]", "sampling.scale_range"),
            ("[labeling.weights]\nalpha = 0.5\nbeta = 0.5\ngamma_w = 0.1", "labeling.weights"),
            ("[scene]\nthresholds = [0.9, 0.8]", "scene.thresholds"),
            ("[sampling]\ngama = 0.3", "gama"),
        ];
        for (text, field) in cases {
            match PipelineConfig::from_toml_str(text) {
                Err(Error::Config { field: f, .. }) => assert_eq!(f, field, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn overrides_apply_on_top() {
        let o = |k: &str, v: &str| (k.to_string(), v.to_string());
        let c = PipelineConfig::from_toml_with_overrides(
            "seed = 3\n[sampling]\ngamma = 0.2",
            &[o("sampling.gamma", "0.3"), o("seed", "9"), o("output.dataset_dir", "elsewhere"), o("scene.camera.width", "1280")],
        )
        .unwrap();
        assert_eq!(c.sampling.gamma, 0.3);
        assert_eq!(c.seed, 9);
        assert_eq!(c.output.dataset_dir, PathBuf::from("elsewhere"));
        assert_eq!(c.scene.camera.width, 1280);
        assert!(PipelineConfig::from_toml_with_overrides("", &[o("sampling.gamma", "0")]).is_err());
        assert!(PipelineConfig::from_toml_with_overrides("", &[o("seed.x", "1")]).is_err());
    }

    #[test]
    fn builtin_and_relative_sources() {
        let base = Path::new("/data");
        assert_eq!(MeshSource::parse("builtin:plate_square", base), MeshSource::Builtin("plate_square".into()));
        let f = MeshSource::parse("chairs/a.obj", base);
        assert_eq!(f, MeshSource::File("/data/chairs/a.obj".into()));
        assert_eq!(f.name(), "a");
        let mut c = PipelineConfig { meshes: vec!["builtin:x".into(), "builtin:x".into()], ..Default::default() };
        assert!(c.mesh_sources().is_err());
        c.meshes.pop();
        assert_eq!(c.mesh_sources().unwrap().len(), 1);
    }
}
