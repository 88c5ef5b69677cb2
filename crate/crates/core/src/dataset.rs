//! Versioned JSON dataset: one document per object plus a manifest.
//!
//! Floats are written in shortest round-trip decimal form and parsed with
//! correct rounding, so `read(write(x)) == x` bit for bit.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::antipodal::Grasp;
use crate::error::{Error, Result};
use crate::metrics::ScoreWeights;
use crate::pairs::{finalize_pairs, Bin, GraspPair, MAX_PAIRS, MAX_PER_BIN};

pub const SCHEMA_VERSION: &str = "da2gen-1";
pub const GENERATOR: &str = concat!("dualgrasp ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshInfo {
    pub path: String,
    /// Uniform scale applied about the source box center.
    pub scale: f64,
    /// Torque normalization radius (half the rescaled box diagonal).
    pub rho: f64,
    /// Object frame point = `scale * source point + offset`.
    pub offset: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub gamma: f64,
    pub i: usize,
    pub overlap: f64,
    pub mu: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub gripper_width: f64,
    pub g_target: usize,
    pub scale_range: [f64; 2],
    pub weights: ScoreWeights,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub schema_version: String,
    pub name: String,
    pub mesh: MeshInfo,
    pub params: GenerationParams,
    pub grasps: Vec<Grasp>,
    pub pairs: Vec<GraspPair>,
    pub generator: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub file: String,
    pub grasps: usize,
    pub pairs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: String,
    pub generator: String,
    /// `None` until the normalization pass has run.
    pub max_sigma: Option<f64>,
    pub weights: ScoreWeights,
    pub objects: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Sets q_dex and q_score on every pair from the dataset-wide max σ.
pub fn finalize_scores(records: &mut [ObjectRecord], weights: &ScoreWeights) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut groups: Vec<&mut Vec<GraspPair>> = records.iter_mut().map(|r| &mut r.pairs).collect();
    let max = finalize_pairs(&mut groups, weights)?;
    for r in records.iter_mut() {
        r.params.weights = *weights;
    }
    Ok(max)
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Validation(msg()))
    }
}

/// Checks every record invariant; the error names the offending item.
pub fn validate_record(r: &ObjectRecord) -> Result<()> {
    let ctx = &r.name;
    check(r.schema_version == SCHEMA_VERSION, || {
        format!("{ctx}: schema_version {}", r.schema_version)
    })?;
    check(r.mesh.scale > 0.0 && r.mesh.rho > 0.0, || format!("{ctx}: scale and rho must be positive"))?;
    r.params.weights.validate().map_err(|e| Error::Validation(format!("{ctx}: {e}")))?;
    for (k, g) in r.grasps.iter().enumerate() {
        g.check(r.params.gripper_width)
            .map_err(|m| Error::Validation(format!("{ctx}: grasp {k}: {m}")))?;
    }
    check(r.pairs.len() <= MAX_PAIRS, || {
        format!("{ctx}: {} pairs exceeds {MAX_PAIRS}", r.pairs.len())
    })?;
    let mut counts: BTreeMap<Bin, usize> = BTreeMap::new();
    let mut prev: Option<&GraspPair> = None;
    for (k, p) in r.pairs.iter().enumerate() {
        let name = format!("{ctx}: pair {k} ({}, {})", p.a, p.b);
        check(p.a < p.b && p.b < r.grasps.len(), || format!("{name}: indices must satisfy a < b < {}", r.grasps.len()))?;
        check(p.label.epsilon_ok, || format!("{name}: retained pair fails force closure"))?;
        p.label.check().map_err(|m| Error::Validation(format!("{name}: {m}")))?;
        p.label
            .check_score(&r.params.weights)
            .map_err(|m| Error::Validation(format!("{name}: {m}")))?;
        if let Some(q) = prev {
            check(q.bin <= p.bin, || format!("{name}: bin {} after {}", p.bin.as_str(), q.bin.as_str()))?;
            check(q.label.omega <= p.label.omega, || format!("{name}: omega not ascending"))?;
        }
        *counts.entry(p.bin).or_default() += 1;
        prev = Some(p);
    }
    for (b, c) in counts {
        check(c <= MAX_PER_BIN, || format!("{ctx}: bin {} holds {c} > {MAX_PER_BIN} pairs", b.as_str()))?;
    }
    Ok(())
}

/// Record checks plus cross-object consistency of q_dex with `max_sigma`.
pub fn validate_dataset(manifest: &Manifest, records: &[ObjectRecord]) -> Result<()> {
    check(manifest.schema_version == SCHEMA_VERSION, || "manifest schema_version".into())?;
    check(manifest.objects.len() == records.len(), || "manifest object count mismatch".into())?;
    for (e, r) in manifest.objects.iter().zip(records) {
        check(e.name == r.name && e.pairs == r.pairs.len() && e.grasps == r.grasps.len(), || {
            format!("manifest entry {} does not match its record", e.name)
        })?;
        validate_record(r)?;
    }
    let observed = crate::pairs::max_sigma(records.iter().flat_map(|r| r.pairs.iter()));
    if let Some(max) = manifest.max_sigma {
        check(observed == Some(max), || format!("max_sigma {max} != observed {observed:?}"))?;
        for r in records {
            for (k, p) in r.pairs.iter().enumerate() {
                let expect = if max > 0.0 { p.label.sigma_min / max } else { 0.0 };
                check(p.label.q_dex == Some(expect), || {
                    format!("{}: pair {k} ({}, {}): q_dex != sigma_min / max_sigma", r.name, p.a, p.b)
                })?;
            }
        }
    }
    Ok(())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn read_versioned<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::io(path, e),
    })?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let found = value.get("schema_version").and_then(|v| v.as_str()).unwrap_or("<missing>");
    if found != SCHEMA_VERSION {
        return Err(Error::SchemaVersionMismatch {
            expected: SCHEMA_VERSION.into(),
            found: found.into(),
        });
    }
    serde_json::from_value(value).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}

pub fn write_record(record: &ObjectRecord, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), to_json(record)?.as_bytes())
}

/// Reads and validates one object document.
pub fn read_record(path: impl AsRef<Path>) -> Result<ObjectRecord> {
    let r: ObjectRecord = read_versioned(path.as_ref())?;
    validate_record(&r)?;
    Ok(r)
}

pub fn record_file_name(name: &str) -> String {
    format!("{name}.json")
}

/// Writes every record and the manifest under `dir`.
pub fn write_dataset(records: &[ObjectRecord], max_sigma: Option<f64>, weights: &ScoreWeights, dir: impl AsRef<Path>) -> Result<Manifest> {
    let dir = dir.as_ref();
    let mut objects = Vec::with_capacity(records.len());
    for r in records {
        let file = record_file_name(&r.name);
        write_record(r, dir.join(&file))?;
        objects.push(ManifestEntry {
            name: r.name.clone(),
            file,
            grasps: r.grasps.len(),
            pairs: r.pairs.len(),
        });
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION.into(),
        generator: GENERATOR.into(),
        max_sigma,
        weights: *weights,
        objects,
    };
    write_atomic(&dir.join(MANIFEST_FILE), to_json(&manifest)?.as_bytes())?;
    Ok(manifest)
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Manifest> {
    read_versioned(&dir.as_ref().join(MANIFEST_FILE))
}

/// Reads the manifest and every record it lists, validating all of them.
pub fn read_dataset(dir: impl AsRef<Path>) -> Result<(Manifest, Vec<ObjectRecord>)> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let records = manifest
        .objects
        .iter()
        .map(|e| read_versioned::<ObjectRecord>(&dir.join(&e.file)))
        .collect::<Result<Vec<_>>>()?;
    validate_dataset(&manifest, &records)?;
    Ok((manifest, records))
}

pub fn record_paths(dir: &Path, manifest: &Manifest) -> Vec<PathBuf> {
    manifest.objects.iter().map(|e| dir.join(&e.file)).collect()
}

/// Equal-width histogram over [0, 1]; the last bin is closed so 1.0 counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn unit(values: impl IntoIterator<Item = f64>, nbins: usize) -> Result<Self> {
        if nbins == 0 {
            return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
        }
        let edges = (0..=nbins).map(|k| k as f64 / nbins as f64).collect();
        let mut counts = vec![0; nbins];
        for v in values {
            let k = ((v.clamp(0.0, 1.0) * nbins as f64) as usize).min(nbins - 1);
            counts[k] += 1;
        }
        Ok(Histogram { edges, counts })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub pairs: usize,
    pub q_for: Histogram,
    pub q_dex: Histogram,
    pub q_tor: Histogram,
    pub q_score: Histogram,
    /// Pairs per ω-tertile, in low/mid/high order.
    pub bin_counts: [usize; 3],
}

fn all_pairs(records: &[ObjectRecord]) -> impl Iterator<Item = &GraspPair> {
    records.iter().flat_map(|r| r.pairs.iter())
}

/// Histograms of the four scores. Unnormalized q_dex/q_score count as 0.
pub fn dataset_stats(records: &[ObjectRecord], nbins: usize) -> Result<DatasetStats> {
    let pairs = all_pairs(records).count();
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let hist = |f: fn(&GraspPair) -> f64| Histogram::unit(all_pairs(records).map(f), nbins);
    let mut bin_counts = [0; 3];
    for p in all_pairs(records) {
        bin_counts[p.bin as usize] += 1;
    }
    Ok(DatasetStats {
        pairs,
        q_for: hist(|p| p.label.q_for)?,
        q_dex: hist(|p| p.label.q_dex.unwrap_or(0.0))?,
        q_tor: hist(|p| p.label.q_tor)?,
        q_score: hist(|p| p.label.q_score.unwrap_or(0.0))?,
        bin_counts,
    })
}

impl DatasetStats {
    /// One row per histogram bin: `lo,hi,q_for,q_dex,q_tor,q_score`.
    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("bin_lo,bin_hi,q_for,q_dex,q_tor,q_score\n");
        for k in 0..self.q_for.counts.len() {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.q_for.edges[k],
                self.q_for.edges[k + 1],
                self.q_for.counts[k],
                self.q_dex.counts[k],
                self.q_tor.counts[k],
                self.q_score.counts[k]
            ));
        }
        s
    }

    pub fn bins_csv(&self) -> String {
        let mut s = String::from("bin,pairs\n");
        for b in Bin::ALL {
            s.push_str(&format!("{},{}\n", b.as_str(), self.bin_counts[b as usize]));
        }
        s
    }
}

/// Fraction of each run's values at or below the lower quartile of all runs
/// pooled (nearest-rank). A shared cut keeps the runs comparable.
pub fn lowest_quartile_mass(runs: &[Vec<f64>]) -> Vec<f64> {
    let mut pooled: Vec<f64> = runs.iter().flatten().copied().collect();
    if pooled.is_empty() {
        return vec![0.0; runs.len()];
    }
    pooled.sort_by(f64::total_cmp);
    let cut = pooled[pooled.len().div_ceil(4) - 1];
    runs.iter()
        .map(|r| {
            if r.is_empty() {
                0.0
            } else {
                r.iter().filter(|&&v| v <= cut).count() as f64 / r.len() as f64
            }
        })
        .collect()
}
