//! Per-object pipeline: rescale, sample grasps, pair, label, prune; plus the
//! dataset-level passes built on it.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use crate::antipodal::{generate_grasps, GripperModel, SamplingStats};
use crate::config::{MeshSource, PipelineConfig};
use crate::dataset::{
    dataset_stats, finalize_scores, lowest_quartile_mass, read_dataset, to_json, write_dataset, DatasetStats,
    GenerationParams, Manifest, MeshInfo, ObjectRecord, GENERATOR, SCHEMA_VERSION,
};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::{self, primitives, TriangleMesh};
use crate::metrics::{gravity_wrench, LabelParams};
use crate::pairs::{enumerate_pairs, label_pairs, prune_and_bin};
use crate::par::{self, Exec};
use crate::rng::{self, tag};
use crate::scene::{export_training_samples, sample_scene, write_scene_clouds, SceneManifest, SceneSample};

/// Loads a mesh from a file or the built-in corpus.
pub fn load_source(src: &MeshSource) -> Result<(TriangleMesh, usize)> {
    match src {
        MeshSource::File(p) => mesh::load_mesh(p).map(|(m, r)| (m, r.dropped)),
        MeshSource::Builtin(name) => primitives::furniture_corpus()
            .into_iter()
            .chain(primitives::test_shapes())
            .find(|(n, _)| n == name)
            .map(|(_, m)| (m, 0))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown built-in mesh {name}"))),
    }
}

/// Object-frame mesh: rescaled into the configured range and shifted so the
/// center of mass sits at the origin.
#[derive(Clone, Debug)]
pub struct PreparedObject {
    pub mesh: TriangleMesh,
    pub scale: f64,
    pub offset: Vec3,
    pub rho: f64,
}

pub fn prepare_object(raw: &TriangleMesh, scale_range: [f64; 2], seed: u64) -> Result<PreparedObject> {
    let center = raw.aabb().center();
    let (scaled, scale) = mesh::rescale_to_range(raw, scale_range, seed)?;
    let com = scaled.center_of_mass();
    let mesh = scaled.translated(&-com);
    let offset = center * (1.0 - scale) - com;
    let rho = mesh.aabb().diagonal() / 2.0;
    Ok(PreparedObject { mesh, scale, offset, rho })
}

/// Rebuilds a record's object-frame mesh from its source mesh.
pub fn object_mesh(raw: &TriangleMesh, info: &MeshInfo) -> Result<TriangleMesh> {
    Ok(raw.scaled_about(&Vec3::zeros(), info.scale)?.translated(&Vec3::from(info.offset)))
}

/// Stable per-object seed: mixes the master seed with the object's name.
pub fn object_seed(master: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
    }
    rng::derive_seed(master, &[tag::OBJECT, h])
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObjectReport {
    pub name: String,
    pub dropped_faces: usize,
    pub sampling: SamplingStats,
    pub grasps: usize,
    pub shortfall: usize,
    pub candidate_pairs: usize,
    pub feasible_pairs: usize,
    pub kept_pairs: usize,
    pub elapsed_ms: u128,
    pub warnings: Vec<String>,
}

/// Runs one object through sampling, pairing, labeling and pruning.
/// The record's `q_dex`/`q_score` stay unset until [`crate::dataset::finalize_scores`].
pub fn process_object(src: &MeshSource, cfg: &PipelineConfig, exec: Exec) -> Result<(ObjectRecord, ObjectReport)> {
    let start = Instant::now();
    let name = src.name();
    let (raw, dropped_faces) = load_source(src)?;
    let seed = object_seed(cfg.seed, &name);
    let prepared = prepare_object(&raw, cfg.sampling.scale_range, seed)?;
    let gripper = GripperModel::with_width(cfg.sampling.gripper_width);
    let gen = generate_grasps(&prepared.mesh, cfg.sampling.g_target, &cfg.antipodal_params(seed), &gripper, exec)?;
    let label = LabelParams {
        rho: prepared.rho,
        mu: cfg.labeling.mu,
        gravity: gravity_wrench(),
        epsilon: cfg.labeling.epsilon,
    };
    let candidates = enumerate_pairs(&gen.grasps, &gripper, exec);
    let labeled = label_pairs(&gen.grasps, &candidates, &label, exec)?;
    let feasible_pairs = labeled.iter().filter(|p| p.label.epsilon_ok).count();
    let pairs = prune_and_bin(labeled);

    let mut warnings = Vec::new();
    if dropped_faces > 0 {
        warnings.push(format!("{dropped_faces} zero-area faces dropped"));
    }
    if gen.shortfall > 0 {
        warnings.push(format!("found {} of {} grasps", gen.grasps.len(), cfg.sampling.g_target));
    }
    if pairs.is_empty() {
        warnings.push("no force-closure pairs".into());
    }
    let s = &cfg.sampling;
    let record = ObjectRecord {
        schema_version: SCHEMA_VERSION.into(),
        name: name.clone(),
        mesh: MeshInfo {
            path: src.label(),
            scale: prepared.scale,
            rho: prepared.rho,
            offset: prepared.offset.into(),
        },
        params: GenerationParams {
            gamma: s.gamma,
            i: s.blocks,
            overlap: s.overlap,
            mu: cfg.labeling.mu,
            epsilon: cfg.labeling.epsilon,
            seed,
            gripper_width: s.gripper_width,
            g_target: s.g_target,
            scale_range: s.scale_range,
            weights: cfg.labeling.weights,
        },
        grasps: gen.grasps,
        pairs,
        generator: GENERATOR.into(),
    };
    let report = ObjectReport {
        name,
        dropped_faces,
        sampling: gen.stats,
        grasps: record.grasps.len(),
        shortfall: gen.shortfall,
        candidate_pairs: candidates.len(),
        feasible_pairs,
        kept_pairs: record.pairs.len(),
        elapsed_ms: start.elapsed().as_millis(),
        warnings,
    };
    Ok((record, report))
}

/// Lock-free completion counter shared by the object workers.
#[derive(Debug, Default)]
pub struct Progress {
    pub done: AtomicUsize,
    pub failed: AtomicUsize,
}

/// Processes every configured object; results come back in config order.
/// `on_done` is called from worker threads as each object finishes.
pub fn generate_all<F>(cfg: &PipelineConfig, exec: Exec, progress: &Progress, on_done: F) -> Result<Vec<(ObjectRecord, ObjectReport)>>
where
    F: Fn(&std::result::Result<&ObjectReport, (&str, &Error)>) + Sync,
{
    let sources = cfg.mesh_sources()?;
    let results = par::map_slice(exec, &sources, |src| {
        let r = process_object(src, cfg, exec).map_err(|e| match e {
            Error::Validation(m) => Error::Validation(format!("{}: {m}", src.name())),
            other => other,
        });
        match &r {
            Ok((_, rep)) => {
                progress.done.fetch_add(1, Ordering::Relaxed);
                on_done(&Ok(rep));
            }
            Err(e) => {
                progress.failed.fetch_add(1, Ordering::Relaxed);
                on_done(&Err((&src.label(), e)));
            }
        }
        r
    });
    results.into_iter().collect()
}

/// Renders `scenes_per_object` scenes for every record.
pub fn render_all(records: &[ObjectRecord], cfg: &PipelineConfig, exec: Exec) -> Result<Vec<SceneSample>> {
    let scene_cfg = cfg.scene.scene_config();
    let jobs: Vec<(usize, u64)> = (0..records.len())
        .flat_map(|r| (0..cfg.scene.scenes_per_object).map(move |s| (r, s)))
        .collect();
    let meshes = par::map_slice(exec, records, |r| {
        let (raw, _) = load_source(&MeshSource::parse(&r.mesh.path, Path::new("")))?;
        object_mesh(&raw, &r.mesh)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    par::map_slice(exec, &jobs, |&(r, s)| sample_scene(&meshes[r], &records[r], s, &scene_cfg, exec))
        .into_iter()
        .collect()
}

/// `generate`: per-object records plus a manifest without normalization.
pub fn run_generate<F>(cfg: &PipelineConfig, exec: Exec, progress: &Progress, on_done: F) -> Result<(Manifest, Vec<ObjectReport>)>
where
    F: Fn(&std::result::Result<&ObjectReport, (&str, &Error)>) + Sync,
{
    let out = generate_all(cfg, exec, progress, on_done)?;
    let (records, reports): (Vec<_>, Vec<_>) = out.into_iter().unzip();
    let manifest = write_dataset(&records, None, &cfg.labeling.weights, &cfg.output.dataset_dir)?;
    Ok((manifest, reports))
}

/// `finalize`: global σ normalization, rewriting every record.
pub fn run_finalize(cfg: &PipelineConfig) -> Result<f64> {
    let dir = &cfg.output.dataset_dir;
    let (_, mut records) = read_dataset(dir)?;
    let max = finalize_scores(&mut records, &cfg.labeling.weights)?;
    write_dataset(&records, Some(max), &cfg.labeling.weights, dir)?;
    Ok(max)
}

fn finalized_records(cfg: &PipelineConfig) -> Result<Vec<ObjectRecord>> {
    let (manifest, records) = read_dataset(&cfg.output.dataset_dir)?;
    if manifest.max_sigma.is_none() {
        return Err(Error::Validation("dataset is not finalized; run finalize first".into()));
    }
    Ok(records)
}

/// `render`: merged scene clouds (PLY) and a scene manifest.
pub fn run_render(cfg: &PipelineConfig, exec: Exec) -> Result<Vec<SceneSample>> {
    let samples = render_all(&finalized_records(cfg)?, cfg, exec)?;
    write_scene_clouds(&samples, &cfg.output.scenes_dir)?;
    Ok(samples)
}

/// `export`: fixed-size training samples for every scene and pair.
pub fn run_export(cfg: &PipelineConfig, exec: Exec) -> Result<SceneManifest> {
    let samples = render_all(&finalized_records(cfg)?, cfg, exec)?;
    export_training_samples(&samples, &cfg.output.export_dir, cfg.scene.n_points, cfg.scene.write_ply)
}

/// `stats`: histogram and bin CSVs plus a JSON summary.
pub fn run_stats(dataset_dir: &Path, out_dir: &Path, nbins: usize) -> Result<DatasetStats> {
    let (_, records) = read_dataset(dataset_dir)?;
    let stats = dataset_stats(&records, nbins)?;
    let write = |name: &str, text: String| {
        let p = out_dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write("histograms.csv", stats.histogram_csv())?;
    write("bins.csv", stats.bins_csv())?;
    write("summary.json", to_json(&stats)?)?;
    Ok(stats)
}

/// Lowest-quartile q_for mass of several runs over their pooled range, as
/// CSV rows `run,gamma,pairs,lowest_quartile_mass`.
pub fn compare_runs(runs: &[(String, Vec<ObjectRecord>)]) -> String {
    let values: Vec<Vec<f64>> = runs
        .iter()
        .map(|(_, recs)| recs.iter().flat_map(|r| r.pairs.iter().map(|p| p.label.q_for)).collect())
        .collect();
    let mass = lowest_quartile_mass(&values);
    let mut s = String::from("run,gamma,pairs,lowest_quartile_mass\n");
    for (((name, recs), v), m) in runs.iter().zip(&values).zip(mass) {
        let gamma = recs.first().map_or(f64::NAN, |r| r.params.gamma);
        s.push_str(&format!("{name},{gamma},{},{m}\n", v.len()));
    }
    s
}
