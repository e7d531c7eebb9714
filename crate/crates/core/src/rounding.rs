//! Integer template selections from a fractional α.
//!
//! `round_max` keeps the `n` largest coefficients. `round_search` streams
//! subsets of the thresholded feasible set in descending order of mean α and
//! scores each by its true OR-composited silhouette error.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::CameraRig;
use crate::geometry::{compose_scene, scene_to_string, TemplateId, TemplateLibrary};
use crate::raster::{render_scene, render_template, MeasurementVector};
use crate::solver::LpSolution;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureEstimate {
    /// Ascending, unique.
    pub template_ids: Vec<TemplateId>,
    /// Hamming distance between the estimate's rendering and the target.
    pub error: usize,
    pub score: f64,
}

impl StructureEstimate {
    pub fn len(&self) -> usize {
        self.template_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.template_ids.is_empty()
    }

    /// SCENE text followed by a comment block describing the estimate.
    pub fn to_file_string(&self, method: &str, config: Option<&SearchConfig>) -> String {
        let mut out = scene_to_string(&self.template_ids);
        out.push_str(&format!("# method {method}\n# error {}\n# score {}\n", self.error, self.score));
        if let Some(c) = config {
            out.push_str(&format!("# config {}\n", serde_json::to_string(c).unwrap_or_default()));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub alpha_threshold: f64,
    pub min_parts: usize,
    pub max_parts: usize,
    pub max_candidates: usize,
    pub lambda_search: f64,
    /// Subtract the cardinality term instead of adding it.
    pub reward_cardinality: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            alpha_threshold: 1e-2,
            min_parts: 1,
            max_parts: 20,
            max_candidates: 5000,
            lambda_search: 1e-2,
            reward_cardinality: false,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_parts > self.max_parts || self.max_candidates == 0 {
            return Err(Error::InvalidParameter(format!(
                "search needs min_parts <= max_parts and max_candidates >= 1, got {}..{} / {}",
                self.min_parts, self.max_parts, self.max_candidates
            )));
        }
        if !(self.alpha_threshold >= 0.0) || !self.lambda_search.is_finite() {
            return Err(Error::InvalidParameter("bad alpha_threshold or lambda_search".into()));
        }
        Ok(())
    }

    pub fn score(&self, error: usize, parts: usize) -> f64 {
        let penalty = self.lambda_search * parts as f64;
        if self.reward_cardinality {
            error as f64 - penalty
        } else {
            error as f64 + penalty
        }
    }
}

/// Ids whose α is strictly above `threshold`, ascending.
pub fn feasible_set(alpha: &LpSolution, threshold: f64) -> Vec<TemplateId> {
    let mut ids: Vec<TemplateId> = alpha
        .template_ids
        .iter()
        .zip(&alpha.alpha)
        .filter(|(_, &a)| a > threshold)
        .map(|(&id, _)| id)
        .collect();
    ids.sort_unstable();
    ids
}

/// Ids ordered by descending α, ties by lower id.
fn ranked(alpha: &LpSolution) -> Vec<(TemplateId, f64)> {
    let mut v: Vec<(TemplateId, f64)> = alpha.template_ids.iter().copied().zip(alpha.alpha.iter().copied()).collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    v
}

pub fn scene_error(
    ids: &[TemplateId],
    target: &MeasurementVector,
    library: &TemplateLibrary,
    rig: &CameraRig,
) -> Result<usize> {
    let rendered = render_scene(&compose_scene(ids, library)?, rig)?;
    crate::raster::silhouette_error(&rendered, target)
}

pub fn round_max(
    alpha: &LpSolution,
    n: usize,
    target: &MeasurementVector,
    library: &TemplateLibrary,
    rig: &CameraRig,
) -> Result<StructureEstimate> {
    if n == 0 || n > alpha.alpha.len() {
        return Err(Error::InvalidParameter(format!(
            "Max rounding needs 1 <= n <= {}, got {n}",
            alpha.alpha.len()
        )));
    }
    target.check_rig(rig)?;
    let mut ids: Vec<TemplateId> = ranked(alpha).into_iter().take(n).map(|(id, _)| id).collect();
    ids.sort_unstable();
    let error = scene_error(&ids, target, library, rig)?;
    Ok(StructureEstimate {
        template_ids: ids,
        error,
        score: error as f64,
    })
}

/// α quantised so subset means compare exactly.
const ALPHA_SCALE: f64 = (1u64 << 40) as f64;

#[derive(PartialEq, Eq)]
struct Node {
    sum: i64,
    /// Positions into the ranked feasible list, strictly increasing.
    indices: Vec<usize>,
    /// Smallest position `q` with `indices[q] != q`, or the length for the
    /// top subset. Only positions up to this one may still move.
    pivot: usize,
}

impl Ord for Node {
    /// Greater means earlier: higher mean, then fewer parts, then
    /// lexicographically smaller positions.
    fn cmp(&self, other: &Self) -> Ordering {
        let (c1, c2) = (self.indices.len() as i128, other.indices.len() as i128);
        (self.sum as i128 * c2)
            .cmp(&(other.sum as i128 * c1))
            .then(c2.cmp(&c1))
            .then_with(|| other.indices.cmp(&self.indices))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Subsets of positions `0..weights.len()` (weights descending) with size in
/// `sizes`, in descending order of mean weight. At most `limit` are returned.
pub fn subsets_by_mean(weights: &[f64], sizes: std::ops::RangeInclusive<usize>, limit: usize) -> Vec<Vec<usize>> {
    let q: Vec<i64> = weights.iter().map(|w| (w * ALPHA_SCALE).round() as i64).collect();
    let f = q.len();
    let mut heap = BinaryHeap::new();
    let include_empty = *sizes.start() == 0;
    for c in (*sizes.start()).max(1)..=(*sizes.end()).min(f) {
        heap.push(Node {
            sum: q[..c].iter().sum(),
            indices: (0..c).collect(),
            pivot: c,
        });
    }
    let mut out = Vec::new();
    while out.len() < limit {
        let Some(node) = heap.pop() else { break };
        let c = node.indices.len();
        for pos in 0..node.pivot.min(c - 1) + 1 {
            let next = if pos + 1 < c { node.indices[pos + 1] } else { f };
            let i = node.indices[pos];
            if i + 1 < next {
                let mut indices = node.indices.clone();
                indices[pos] = i + 1;
                heap.push(Node {
                    sum: node.sum - q[i] + q[i + 1],
                    indices,
                    pivot: pos,
                });
            }
        }
        out.push(node.indices);
    }
    if include_empty && out.len() < limit {
        out.push(Vec::new());
    }
    out
}

pub fn round_search(
    alpha: &LpSolution,
    config: &SearchConfig,
    target: &MeasurementVector,
    library: &TemplateLibrary,
    rig: &CameraRig,
) -> Result<StructureEstimate> {
    config.validate()?;
    target.check_rig(rig)?;
    let feasible: Vec<(TemplateId, f64)> = ranked(alpha)
        .into_iter()
        .filter(|&(_, a)| a > config.alpha_threshold)
        .collect();
    if feasible.is_empty() {
        return Err(Error::EmptyFeasibleSet(config.alpha_threshold));
    }
    let renders = feasible
        .par_iter()
        .map(|&(id, _)| render_template(library.get(id)?, rig))
        .collect::<Result<Vec<_>>>()?;
    let weights: Vec<f64> = feasible.iter().map(|f| f.1).collect();
    let candidates = subsets_by_mean(&weights, config.min_parts..=config.max_parts, config.max_candidates);
    if candidates.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no subsets of {} feasible templates with {}..={} parts",
            feasible.len(),
            config.min_parts,
            config.max_parts
        )));
    }

    let scored: Vec<(f64, Vec<TemplateId>, usize)> = candidates
        .par_iter()
        .map(|positions| {
            let mut union = MeasurementVector::with_dims(
                crate::raster::BitVec::zeros(target.len()),
                target.view_dims().to_vec(),
            )
            .expect("dims from target");
            for &p in positions {
                union.or_assign(&renders[p]);
            }
            let error = union.bits().hamming(target.bits());
            let mut ids: Vec<TemplateId> = positions.iter().map(|&p| feasible[p].0).collect();
            ids.sort_unstable();
            (config.score(error, ids.len()), ids, error)
        })
        .collect();
    let (score, ids, error) = scored
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)))
        .expect("non-empty candidate list");

    let check = scene_error(&ids, target, library, rig)?;
    assert_eq!(check, error, "incremental and full renders disagree");
    Ok(StructureEstimate {
        template_ids: ids,
        error,
        score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::LpStatus;

    fn solution(alpha: Vec<f64>) -> LpSolution {
        LpSolution {
            template_ids: (0..alpha.len()).map(TemplateId::from_index).collect(),
            alpha,
            objective: 0.0,
            status: LpStatus::Optimal,
            iterations: 0,
            kkt_residual: 0.0,
        }
    }

    #[test]
    fn feasible_set_thresholds() {
        let s = solution(vec![0.5, 0.0, 0.2, 1.0]);
        assert_eq!(feasible_set(&s, 0.0), vec![TemplateId(1), TemplateId(3), TemplateId(4)]);
        assert!(feasible_set(&s, 1.0).is_empty());
        assert_eq!(feasible_set(&solution(vec![0.1, 0.2]), 0.0).len(), 2);
    }

    #[test]
    fn ranking_ties_prefer_lower_id() {
        let r = ranked(&solution(vec![0.3, 0.7, 0.7, 0.1]));
        let ids: Vec<u32> = r.iter().map(|x| x.0 .0).collect();
        assert_eq!(ids, vec![2, 3, 1, 4]);
    }

    /// Every subset in the size range, sorted by the documented order using
    /// exact rational arithmetic on the quantised weights.
    fn brute_order(weights: &[f64], lo: usize, hi: usize) -> Vec<Vec<usize>> {
        let q: Vec<i128> = weights.iter().map(|w| (w * ALPHA_SCALE).round() as i128).collect();
        let mut all: Vec<Vec<usize>> = (0u32..1 << weights.len())
            .map(|m| (0..weights.len()).filter(|i| m >> i & 1 == 1).collect::<Vec<_>>())
            .filter(|s: &Vec<usize>| s.len() >= lo.max(1) && s.len() <= hi)
            .collect();
        all.sort_by(|a, b| {
            let (sa, sb): (i128, i128) = (a.iter().map(|&i| q[i]).sum(), b.iter().map(|&i| q[i]).sum());
            (sb * a.len() as i128)
                .cmp(&(sa * b.len() as i128))
                .then(a.len().cmp(&b.len()))
                .then_with(|| a.cmp(b))
        });
        all
    }

    #[test]
    fn enumeration_matches_sorted_power_set() {
        for weights in [
            vec![0.9, 0.8, 0.5, 0.5, 0.3, 0.1, 0.05],
            vec![1.0, 1.0, 1.0, 1.0],
            vec![0.7, 0.6, 0.4, 0.4, 0.4, 0.2, 0.2, 0.1, 0.02],
        ] {
            for (lo, hi) in [(1, 20), (2, 3), (1, 1), (3, 9)] {
                let want = brute_order(&weights, lo, hi);
                let got = subsets_by_mean(&weights, lo..=hi, usize::MAX);
                assert_eq!(got, want, "weights {weights:?} sizes {lo}..{hi}");
                let capped = subsets_by_mean(&weights, lo..=hi, 5);
                assert_eq!(capped, want[..5.min(want.len())].to_vec());
            }
        }
    }

    #[test]
    fn empty_subset_comes_last() {
        let got = subsets_by_mean(&[0.5, 0.2], 0..=2, 10);
        assert_eq!(got.last().unwrap(), &Vec::<usize>::new());
        assert_eq!(got.len(), 4);
    }

    #[test]
    fn config_validation_and_score_sign() {
        let mut c = SearchConfig::default();
        assert!(c.validate().is_ok());
        assert_eq!(c.score(10, 3), 10.03);
        c.reward_cardinality = true;
        assert_eq!(c.score(10, 3), 9.97);
        c.min_parts = 30;
        assert!(c.validate().is_err());
        let c = SearchConfig {
            max_candidates: 0,
            ..SearchConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_json_defaults() {
        let c: SearchConfig = serde_json::from_str(r#"{"max_parts": 8}"#).unwrap();
        assert_eq!(c.max_parts, 8);
        assert_eq!(c.max_candidates, 5000);
    }
}
