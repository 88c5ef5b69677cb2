//! Pairing single grasps into dual-arm candidates, ω-tertile pruning and
//! the dataset-wide σ normalization.

use serde::{Deserialize, Serialize};

use crate::antipodal::{Grasp, GripperModel};
use crate::error::{Error, Result};
use crate::metrics::{combined_score, label_pair, DexterityLabel, LabelParams, ScoreWeights};
use crate::par::{self, Exec};

/// Maximum pairs kept per ω-tertile.
pub const MAX_PER_BIN: usize = 667;
/// Maximum pairs kept per object.
pub const MAX_PAIRS: usize = 3 * MAX_PER_BIN;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bin {
    Low,
    Mid,
    High,
}

impl Bin {
    pub const ALL: [Bin; 3] = [Bin::Low, Bin::Mid, Bin::High];

    pub fn as_str(&self) -> &'static str {
        match self {
            Bin::Low => "low",
            Bin::Mid => "mid",
            Bin::High => "high",
        }
    }
}

/// An unbinned, labeled pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabeledPair {
    pub a: usize,
    pub b: usize,
    pub label: DexterityLabel,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspPair {
    pub a: usize,
    pub b: usize,
    pub bin: Bin,
    #[serde(rename = "metrics")]
    pub label: DexterityLabel,
}

/// All `a < b` index pairs whose posed gripper bodies do not overlap.
pub fn enumerate_pairs(grasps: &[Grasp], gripper: &GripperModel, exec: Exec) -> Vec<(usize, usize)> {
    let posed: Vec<_> = grasps.iter().map(|g| gripper.body.posed(&g.pose)).collect();
    let bounds: Vec<_> = posed
        .iter()
        .map(|boxes| {
            boxes
                .iter()
                .map(|b| b.bounding_aabb())
                .reduce(|x, y| x.union(&y))
                .expect("gripper body is nonempty")
        })
        .collect();
    par::map_range(exec, grasps.len(), |i| {
        (i + 1..grasps.len())
            .filter(|&j| {
                let overlap = bounds[i].intersects(&bounds[j])
                    && posed[i].iter().any(|x| posed[j].iter().any(|y| x.intersects(y)));
                !overlap
            })
            .map(|j| (i, j))
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

pub fn label_pairs(
    grasps: &[Grasp],
    pairs: &[(usize, usize)],
    params: &LabelParams,
    exec: Exec,
) -> Result<Vec<LabeledPair>> {
    par::map_slice(exec, pairs, |&(a, b)| {
        label_pair(&grasps[a], &grasps[b], params).map(|label| LabeledPair { a, b, label })
    })
    .into_iter()
    .collect()
}

/// Tertile sizes with the remainder going to the earlier parts.
pub fn tertile_sizes(n: usize) -> [usize; 3] {
    let base = n / 3;
    let rem = n % 3;
    [0, 1, 2].map(|k| base + usize::from(k < rem))
}

/// Drops pairs failing force closure, sorts by ω (stable), splits into three
/// contiguous parts, and keeps the up-to-667 smallest-ω pairs of each part.
pub fn prune_and_bin(pairs: Vec<LabeledPair>) -> Vec<GraspPair> {
    let mut ok: Vec<LabeledPair> = pairs.into_iter().filter(|p| p.label.epsilon_ok).collect();
    ok.sort_by(|x, y| x.label.omega.total_cmp(&y.label.omega));
    let sizes = tertile_sizes(ok.len());
    let mut out = Vec::with_capacity(ok.len().min(MAX_PAIRS));
    let mut start = 0;
    for (bin, size) in Bin::ALL.into_iter().zip(sizes) {
        out.extend(ok[start..start + size.min(MAX_PER_BIN)].iter().map(|p| GraspPair {
            a: p.a,
            b: p.b,
            bin,
            label: p.label,
        }));
        start += size;
    }
    out
}

/// Largest σ_m over every pair of every object.
pub fn max_sigma<'a>(pairs: impl IntoIterator<Item = &'a GraspPair>) -> Option<f64> {
    pairs.into_iter().map(|p| p.label.sigma_min).reduce(f64::max)
}

/// Sets `q_dex = σ_m / max σ` and the combined score on every pair.
/// Idempotent. Returns the global `max σ`.
pub fn finalize_pairs(groups: &mut [&mut Vec<GraspPair>], weights: &ScoreWeights) -> Result<f64> {
    weights.validate()?;
    let max = max_sigma(groups.iter().flat_map(|g| g.iter())).ok_or(Error::EmptyDataset)?;
    for g in groups.iter_mut() {
        for p in g.iter_mut() {
            let q_dex = if max > 0.0 { p.label.sigma_min / max } else { 0.0 };
            p.label.q_dex = Some(q_dex);
            p.label.q_score = Some(combined_score(p.label.q_for, q_dex, p.label.q_tor, weights)?);
        }
    }
    Ok(max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::antipodal::grasp_pose_from_contacts;
    use crate::geom::Vec3;
    use crate::metrics::q_for_from_omega;

    fn fake(omega: f64, ok: bool, idx: usize) -> LabeledPair {
        LabeledPair {
            a: idx,
            b: idx + 1,
            label: DexterityLabel {
                omega,
                sigma_min: 0.1,
                theta_g: 0.0,
                q_for: q_for_from_omega(omega),
                q_dex: None,
                q_tor: 1.0,
                q_score: None,
                epsilon_ok: ok,
            },
        }
    }

    fn grasp_at(x: f64) -> Grasp {
        let p1 = Vec3::new(x, 0.0, -0.02);
        let p2 = Vec3::new(x, 0.0, 0.02);
        Grasp {
            pose: grasp_pose_from_contacts(&p1, &p2, 0.0).unwrap(),
            contacts: [p1, p2],
            normals: [-Vec3::z(), Vec3::z()],
        }
    }

    #[test]
    fn tertile_remainders_go_left() {
        assert_eq!(tertile_sizes(32), [11, 11, 10]);
        assert_eq!(tertile_sizes(30), [10, 10, 10]);
        assert_eq!(tertile_sizes(31), [11, 10, 10]);
        assert_eq!(tertile_sizes(0), [0, 0, 0]);
    }

    #[test]
    fn prune_counts() {
        let many: Vec<_> = (0..3000).map(|k| fake((k * 7919 % 3000) as f64 * 1e-3, true, k)).collect();
        let out = prune_and_bin(many);
        assert_eq!(out.len(), 2001);
        for b in Bin::ALL {
            assert_eq!(out.iter().filter(|p| p.bin == b).count(), 667);
        }
        // mid part starts at the 1001st smallest omega
        let first_mid = out.iter().find(|p| p.bin == Bin::Mid).unwrap();
        assert!((first_mid.label.omega - 1.0).abs() < 1e-12);

        let few: Vec<_> = (0..32).map(|k| fake(k as f64, true, k)).collect();
        let out = prune_and_bin(few);
        let counts: Vec<usize> = Bin::ALL.iter().map(|b| out.iter().filter(|p| p.bin == *b).count()).collect();
        assert_eq!(counts, vec![11, 11, 10]);
        assert!(prune_and_bin(vec![]).is_empty());
    }

    #[test]
    fn prune_drops_infeasible_and_is_stable() {
        let mut v: Vec<_> = (0..30).map(|k| fake(0.5, true, 2 * k)).collect();
        v.push(fake(0.1, false, 1000));
        let out = prune_and_bin(v);
        assert_eq!(out.len(), 30);
        assert!(out.iter().all(|p| p.label.epsilon_ok));
        let order: Vec<usize> = out.iter().map(|p| p.a).collect();
        assert_eq!(order, (0..30).map(|k| 2 * k).collect::<Vec<_>>());
    }

    #[test]
    fn identical_poses_are_not_paired() {
        let g = GripperModel::default();
        let grasps = vec![grasp_at(0.3), grasp_at(0.3), grasp_at(-0.3)];
        let pairs = enumerate_pairs(&grasps, &g, Exec::Sequential);
        assert_eq!(pairs, vec![(0, 2), (1, 2)]);
        let two = vec![grasp_at(0.3), grasp_at(-0.3)];
        assert_eq!(enumerate_pairs(&two, &g, Exec::Parallel), vec![(0, 1)]);
    }

    #[test]
    fn all_pairs_when_far_apart() {
        let g = GripperModel::default();
        let grasps: Vec<_> = (0..150).map(|k| grasp_at(k as f64 * 0.2)).collect();
        assert_eq!(enumerate_pairs(&grasps, &g, Exec::Parallel).len(), 150 * 149 / 2);
    }

    #[test]
    fn finalize_normalizes_by_global_max() {
        let mk = |s: f64| GraspPair {
            a: 0,
            b: 1,
            bin: Bin::Low,
            label: DexterityLabel { sigma_min: s, ..fake(0.0, true, 0).label },
        };
        let mut a = vec![mk(0.2)];
        let mut b = vec![mk(0.4)];
        let w = ScoreWeights::default();
        let m = finalize_pairs(&mut [&mut a, &mut b], &w).unwrap();
        assert_eq!(m, 0.4);
        assert_eq!(a[0].label.q_dex, Some(0.5));
        assert_eq!(b[0].label.q_dex, Some(1.0));
        let snapshot = (a.clone(), b.clone());
        finalize_pairs(&mut [&mut a, &mut b], &w).unwrap();
        assert_eq!((a, b), snapshot);
        let mut empty: Vec<GraspPair> = vec![];
        assert!(matches!(finalize_pairs(&mut [&mut empty], &w), Err(Error::EmptyDataset)));
    }
}
