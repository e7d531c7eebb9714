//! Synthetic scenes, metrics and parameter sweeps.
//!
//! Trials are fully determined by their config and trial index: every random
//! stage draws from a seed derived from `(config.seed, trial)`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;
use std::time::Instant;

use nalgebra::{Point3, Vector3};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{ring_rig, CameraRig, RingRigParams};
use crate::geometry::{
    compose_scene, enumerate_library, Aabb, Point, Pose, PrimitiveShape, ShapeKind, Template, TemplateId,
    TemplateLibrary,
};
use crate::raster::{add_salt_pepper, render_scene, MeasurementVector};
use crate::rounding::{round_max, round_search, SearchConfig, StructureEstimate};
use crate::seed::{derive_seed, rng};
use crate::simplex::{LpStatus, SimplexOptions};
use crate::sketch::build_sketch;
use crate::solver::{cull_and_sketch, deconstruct_with_basis};
use crate::{Error, Result};

/// Distributions for synthetic leaves. Angles in degrees, lengths in scene
/// units; length and width are log-uniform on their ranges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantParams {
    pub root: [f64; 3],
    pub elevation_deg: [f64; 2],
    pub length: [f64; 2],
    pub width: [f64; 2],
}

impl Default for PlantParams {
    fn default() -> Self {
        PlantParams {
            root: [0.0, 0.0, 0.0],
            elevation_deg: [15.0, 75.0],
            length: [0.6, 1.2],
            width: [0.15, 0.35],
        }
    }
}

/// One leaf: a kite in the vertical plane through the root at `azimuth`,
/// tilted up by `elevation`, widest at 40% of its length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub azimuth: f64,
    pub elevation: f64,
    pub length: f64,
    pub width: f64,
}

impl Leaf {
    pub fn vertices(&self, root: Point) -> [Point; 4] {
        let (se, ce) = self.elevation.sin_cos();
        let (sa, ca) = self.azimuth.sin_cos();
        let dir = Vector3::new(ce * ca, ce * sa, se);
        let side = Vector3::new(-sa, ca, 0.0);
        let mid = root + dir * (0.4 * self.length);
        [
            root,
            mid - side * (self.width / 2.0),
            root + dir * self.length,
            mid + side * (self.width / 2.0),
        ]
    }

    pub fn shape(&self, name: &str, root: Point) -> Result<PrimitiveShape> {
        PrimitiveShape::new(name, ShapeKind::LeafQuad, self.vertices(root).to_vec(), 1)
    }

    fn perturbed(&self, sigma: f64, rng: &mut impl Rng) -> Leaf {
        let mut g = || -> f64 { StandardNormal.sample(&mut *rng) };
        Leaf {
            azimuth: (self.azimuth + sigma * g()).rem_euclid(TAU),
            elevation: (self.elevation + 0.5 * sigma * g()).clamp(5f64.to_radians(), 85f64.to_radians()),
            length: self.length * (0.5 * sigma * g()).exp(),
            width: self.width * (0.5 * sigma * g()).exp(),
        }
    }
}

fn log_uniform(range: [f64; 2], rng: &mut impl Rng) -> f64 {
    let (lo, hi) = (range[0].ln(), range[1].ln());
    if hi > lo {
        rng.random_range(lo..hi).exp()
    } else {
        range[0]
    }
}

pub fn sample_leaf(params: &PlantParams, rng: &mut impl Rng) -> Leaf {
    let [e0, e1] = params.elevation_deg;
    Leaf {
        azimuth: rng.random_range(0.0..TAU),
        elevation: if e1 > e0 { rng.random_range(e0..e1) } else { e0 }.to_radians(),
        length: log_uniform(params.length, rng),
        width: log_uniform(params.width, rng),
    }
}

impl PlantParams {
    fn validate(&self) -> Result<()> {
        let ok = self.root.iter().all(|v| v.is_finite())
            && self.elevation_deg[0] <= self.elevation_deg[1]
            && self.length[0] > 0.0
            && self.length[0] <= self.length[1]
            && self.width[0] > 0.0
            && self.width[0] <= self.width[1];
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bad plant parameters {self:?}")))
        }
    }

    fn root(&self) -> Point {
        Point::from(self.root)
    }

    /// Box that holds every leaf these parameters can produce.
    fn bounds(&self) -> Aabb {
        let r = self.root();
        let reach = self.length[1] + self.width[1];
        Aabb::new(r - Vector3::repeat(reach), r + Vector3::repeat(reach)).expect("ordered corners")
    }
}

/// A library of candidate leaves, each its own shape at the identity pose.
pub fn leaf_library(params: &PlantParams, leaves: &[Leaf]) -> Result<TemplateLibrary> {
    let shapes = leaves
        .iter()
        .enumerate()
        .map(|(i, l)| l.shape(&format!("leaf{}", i + 1), params.root()))
        .collect::<Result<Vec<_>>>()?;
    let placements = (0..leaves.len()).map(|i| (i, Pose::identity()));
    TemplateLibrary::from_placements(shapes, placements, params.bounds(), 1.0)
}

#[derive(Clone, Debug)]
pub struct Plant {
    /// Candidate leaves, one per library template.
    pub leaves: Vec<Leaf>,
    pub library: TemplateLibrary,
    /// The leaves making up the plant, ascending.
    pub true_ids: Vec<TemplateId>,
}

impl Plant {
    pub fn scene(&self) -> Vec<Template> {
        compose_scene(&self.true_ids, &self.library).expect("true ids come from the library")
    }
}

pub fn generate_plant(params: &PlantParams, leaf_count: usize, templates: usize, seed: u64) -> Result<Plant> {
    params.validate()?;
    if leaf_count == 0 || leaf_count > templates {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= leaf_count <= T, got {leaf_count} and {templates}"
        )));
    }
    let mut rng = rng(seed);
    let leaves: Vec<Leaf> = (0..templates).map(|_| sample_leaf(params, &mut rng)).collect();
    let mut true_ids: Vec<TemplateId> = sample(&mut rng, templates, leaf_count)
        .into_iter()
        .map(TemplateId::from_index)
        .collect();
    true_ids.sort_unstable();
    let library = leaf_library(params, &leaves)?;
    Ok(Plant {
        leaves,
        library,
        true_ids,
    })
}

/// Foreground coverage of `clean_target` by `rendered`, with the companion
/// false-positive rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fpe {
    pub fpe: f64,
    pub false_positive_rate: f64,
}

pub fn fpe(rendered: &MeasurementVector, clean_target: &MeasurementVector) -> Result<Fpe> {
    if rendered.len() != clean_target.len() {
        return Err(Error::DimensionMismatch(format!(
            "rendering has {} bits, target {}",
            rendered.len(),
            clean_target.len()
        )));
    }
    let fg = clean_target.count_ones();
    let est = rendered.count_ones();
    let false_positive_rate = if est == 0 {
        0.0
    } else {
        rendered.bits().and_not_count(clean_target.bits()) as f64 / est as f64
    };
    let fpe = if fg == 0 {
        if est == 0 {
            1.0
        } else {
            return Err(Error::ZeroForeground);
        }
    } else {
        rendered.bits().and_count(clean_target.bits()) as f64 / fg as f64
    };
    Ok(Fpe {
        fpe,
        false_positive_rate,
    })
}

pub fn estimate_fpe(
    estimate: &StructureEstimate,
    clean_target: &MeasurementVector,
    library: &TemplateLibrary,
    rig: &CameraRig,
) -> Result<Fpe> {
    fpe(&render_scene(&compose_scene(&estimate.template_ids, library)?, rig)?, clean_target)
}

pub fn recovery_fraction(estimate: &[TemplateId], true_ids: &[TemplateId]) -> Result<f64> {
    if true_ids.is_empty() {
        return Err(Error::InvalidParameter("recovery needs a nonempty true set".into()));
    }
    let hits = true_ids.iter().filter(|id| estimate.contains(id)).count();
    Ok(hits as f64 / true_ids.len() as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Max,
    Search,
    #[default]
    Both,
}

impl Method {
    fn runs_max(self) -> bool {
        self != Method::Search
    }

    fn runs_search(self) -> bool {
        self != Method::Max
    }
}

/// One sweep cell. Defaults are the synthetic-plant baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub label: String,
    pub seed: u64,
    pub trials: usize,
    pub leaves: usize,
    /// Library size T.
    pub templates: usize,
    pub rig: RingRigParams,
    /// Sketch rows D.
    pub sketch_rows: usize,
    /// Sketch row density k.
    pub density: f64,
    pub lambda: f64,
    /// Fraction of pixels assigned random values.
    pub noise_fraction: f64,
    /// Standard deviation, in radians, of the perturbation applied to the
    /// true leaves before rendering the target. Length and width use half of
    /// it as a log-scale deviation.
    pub param_noise: f64,
    pub cull_threshold: f64,
    pub method: Method,
    pub search: SearchConfig,
    pub plant: PlantParams,
    pub lp_max_iters: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            label: String::new(),
            seed: 1,
            trials: 10,
            leaves: 6,
            templates: 500,
            rig: RingRigParams {
                views: 4,
                radius: 3.0,
                elevation: 4.0,
                target: [0.0, 0.0, 0.4],
                width: 281,
                height: 211,
                focal: 300.0,
            },
            sketch_rows: 441,
            density: 1e-2,
            lambda: 1e-2,
            noise_fraction: 0.0,
            param_noise: 0.0,
            cull_threshold: crate::solver::DEFAULT_CULL_THRESHOLD,
            method: Method::Both,
            search: SearchConfig::default(),
            plant: PlantParams::default(),
            lp_max_iters: SimplexOptions::default().max_iters,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.trials == 0 || self.leaves == 0 || self.leaves > self.templates {
            return bad(format!(
                "need trials >= 1 and 1 <= leaves <= templates, got {} / {} / {}",
                self.trials, self.leaves, self.templates
            ));
        }
        if self.sketch_rows == 0 || !(self.density > 0.0 && self.density <= 1.0) {
            return bad(format!("bad sketch shape D={} k={}", self.sketch_rows, self.density));
        }
        if !(self.lambda >= 0.0) || !(0.0..=1.0).contains(&self.noise_fraction) || !(self.param_noise >= 0.0) {
            return bad("lambda, noise_fraction or param_noise out of range".into());
        }
        if !(0.0..=1.0).contains(&self.cull_threshold) || self.lp_max_iters == 0 {
            return bad("cull_threshold or lp_max_iters out of range".into());
        }
        self.search.validate()?;
        self.plant.validate()
    }

    /// Culling tolerance actually applied. Salt-and-pepper noise clears
    /// about half of the selected pixels, so true templates lose up to
    /// `noise_fraction` of their support to it; the threshold is widened by
    /// that much.
    pub fn effective_cull_threshold(&self) -> f64 {
        (self.cull_threshold + self.noise_fraction).min(1.0)
    }
}

/// Sweep file: a base config and a nonempty list of per-cell overrides,
/// each merged over the base.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub base: serde_json::Value,
    pub cells: Vec<serde_json::Value>,
}

fn merge(into: &mut serde_json::Value, from: &serde_json::Value) {
    match (into, from) {
        (serde_json::Value::Object(a), serde_json::Value::Object(b)) => {
            for (k, v) in b {
                match a.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        a.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

impl SweepConfig {
    pub fn parse(text: &str) -> Result<SweepConfig> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<SweepConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    /// Resolves every cell to a validated config.
    pub fn expand(&self) -> Result<Vec<ExperimentConfig>> {
        if self.cells.is_empty() {
            return Err(Error::InvalidParameter("sweep grid has no cells".into()));
        }
        let defaults = serde_json::to_value(ExperimentConfig::default())?;
        self.cells
            .iter()
            .map(|cell| {
                let mut v = defaults.clone();
                if !self.base.is_null() {
                    merge(&mut v, &self.base);
                }
                merge(&mut v, cell);
                let config: ExperimentConfig = serde_json::from_value(v)?;
                config.validate()?;
                Ok(config)
            })
            .collect()
    }
}

/// One CSV row. Metric columns are empty for failed trials.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub format: String,
    pub cell: usize,
    pub label: String,
    pub trial: usize,
    pub seed: u64,
    pub leaves: usize,
    pub templates: usize,
    pub sketch_rows: usize,
    pub density: f64,
    pub lambda: f64,
    pub noise_fraction: f64,
    pub param_noise: f64,
    pub status: String,
    /// Pixels where the observed target differs from the noise-free
    /// rendering of the library's true leaves, over all pixels.
    pub pixels_changed: Option<f64>,
    pub retained: Option<usize>,
    pub lp_status: Option<String>,
    pub lp_objective: Option<f64>,
    pub lp_iterations: Option<usize>,
    pub alpha_above_1e3: Option<usize>,
    pub feasible: Option<usize>,
    pub truth_fpe: Option<f64>,
    pub truth_fpe_observed: Option<f64>,
    pub truth_error: Option<usize>,
    pub search_parts: Option<usize>,
    pub search_error: Option<usize>,
    pub search_fpe: Option<f64>,
    pub search_fpe_observed: Option<f64>,
    pub search_false_positive: Option<f64>,
    pub search_recovery: Option<f64>,
    pub search_unexplained: Option<usize>,
    pub max_parts: Option<usize>,
    pub max_error: Option<usize>,
    pub max_fpe: Option<f64>,
    pub max_fpe_observed: Option<f64>,
    pub max_false_positive: Option<f64>,
    pub max_recovery: Option<f64>,
    pub max_unexplained: Option<usize>,
}

pub const CSV_FORMAT: &str = "sweep-v1";

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub render_s: f64,
    pub sketch_s: f64,
    pub lp_s: f64,
    pub search_s: f64,
}

#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub row: TrialRow,
    pub timings: StageTimings,
    /// Full-length α, empty for failed trials.
    pub alpha: Vec<f64>,
}

fn base_row(config: &ExperimentConfig, cell: usize, trial: usize, seed: u64) -> TrialRow {
    TrialRow {
        format: CSV_FORMAT.into(),
        cell,
        label: config.label.clone(),
        trial,
        seed,
        leaves: config.leaves,
        templates: config.templates,
        sketch_rows: config.sketch_rows,
        density: config.density,
        lambda: config.lambda,
        noise_fraction: config.noise_fraction,
        param_noise: config.param_noise,
        status: "ok".into(),
        ..TrialRow::default()
    }
}

/// Everything a trial needs before deconstruction: the scene and its
/// observations.
#[derive(Clone, Debug)]
pub struct TrialScene {
    pub plant: Plant,
    pub rig: CameraRig,
    /// Noise-free silhouettes of the actual object.
    pub clean: MeasurementVector,
    /// Noise-free silhouettes of the library's true leaves.
    pub truth: MeasurementVector,
    /// What the cameras report.
    pub observed: MeasurementVector,
}

pub fn trial_seed(config: &ExperimentConfig, trial: usize) -> u64 {
    derive_seed(config.seed, "trial", trial as u64)
}

pub fn build_trial_scene(config: &ExperimentConfig, trial: usize) -> Result<TrialScene> {
    let seed = trial_seed(config, trial);
    let plant = generate_plant(&config.plant, config.leaves, config.templates, derive_seed(seed, "plant", 0))?;
    let rig = ring_rig(&config.rig)?;
    let truth = render_scene(&plant.scene(), &rig)?;
    let clean = if config.param_noise > 0.0 {
        let mut prng = crate::seed::rng(derive_seed(seed, "param-noise", 0));
        let moved: Vec<Leaf> = plant
            .true_ids
            .iter()
            .map(|id| plant.leaves[id.index()].perturbed(config.param_noise, &mut prng))
            .collect();
        let object = leaf_library(&config.plant, &moved)?;
        render_scene(object.templates(), &rig)?
    } else {
        truth.clone()
    };
    let observed = add_salt_pepper(&clean, config.noise_fraction, derive_seed(seed, "salt-pepper", 0))?;
    Ok(TrialScene {
        plant,
        rig,
        clean,
        truth,
        observed,
    })
}

fn fill_estimate(
    est: &StructureEstimate,
    scene: &TrialScene,
) -> Result<(Fpe, f64, f64, usize)> {
    let rendered = render_scene(&compose_scene(&est.template_ids, &scene.plant.library)?, &scene.rig)?;
    let clean = fpe(&rendered, &scene.clean)?;
    let observed = fpe(&rendered, &scene.observed)?.fpe;
    let recovery = recovery_fraction(&est.template_ids, &scene.plant.true_ids)?;
    let unexplained = scene.clean.bits().and_not_count(rendered.bits());
    Ok((clean, observed, recovery, unexplained))
}

pub fn run_trial(config: &ExperimentConfig, cell: usize, trial: usize) -> Result<TrialOutcome> {
    let seed = trial_seed(config, trial);
    let mut row = base_row(config, cell, trial, seed);
    let mut timings = StageTimings::default();

    let clock = Instant::now();
    let scene = build_trial_scene(config, trial)?;
    timings.render_s = clock.elapsed().as_secs_f64();
    let library = &scene.plant.library;
    row.pixels_changed = Some(scene.truth.bits().hamming(scene.observed.bits()) as f64 / scene.observed.len() as f64);

    let clock = Instant::now();
    let phi = build_sketch(
        config.sketch_rows,
        scene.rig.measurement_len(),
        config.density,
        derive_seed(seed, "sketch", 0),
    )?;
    let (cull, basis) = cull_and_sketch(&scene.observed, library, &scene.rig, &phi, config.effective_cull_threshold())?;
    timings.sketch_s = clock.elapsed().as_secs_f64();
    row.retained = Some(cull.retained.len());

    let clock = Instant::now();
    let opts = SimplexOptions {
        max_iters: config.lp_max_iters,
        ..SimplexOptions::default()
    };
    let solution = deconstruct_with_basis(&scene.observed, library, &phi, &basis, config.lambda, &opts)?;
    timings.lp_s = clock.elapsed().as_secs_f64();
    row.lp_status = Some(serde_json::to_value(solution.status)?.as_str().unwrap_or("").to_string());
    row.lp_objective = Some(solution.objective);
    row.lp_iterations = Some(solution.iterations);
    row.alpha_above_1e3 = Some(solution.nonzeros_above(1e-3));
    row.feasible = Some(solution.nonzeros_above(config.search.alpha_threshold));

    let truth_fpe = fpe(&scene.truth, &scene.clean)?;
    row.truth_fpe = Some(truth_fpe.fpe);
    row.truth_fpe_observed = Some(fpe(&scene.truth, &scene.observed)?.fpe);
    row.truth_error = Some(scene.truth.bits().hamming(scene.observed.bits()));

    let clock = Instant::now();
    if config.method.runs_search() {
        let est = round_search(&solution, &config.search, &scene.observed, library, &scene.rig)?;
        let (f, observed, recovery, unexplained) = fill_estimate(&est, &scene)?;
        row.search_parts = Some(est.len());
        row.search_error = Some(est.error);
        row.search_fpe = Some(f.fpe);
        row.search_fpe_observed = Some(observed);
        row.search_false_positive = Some(f.false_positive_rate);
        row.search_recovery = Some(recovery);
        row.search_unexplained = Some(unexplained);
    }
    if config.method.runs_max() {
        let est = round_max(&solution, config.leaves, &scene.observed, library, &scene.rig)?;
        let (f, observed, recovery, unexplained) = fill_estimate(&est, &scene)?;
        row.max_parts = Some(est.len());
        row.max_error = Some(est.error);
        row.max_fpe = Some(f.fpe);
        row.max_fpe_observed = Some(observed);
        row.max_false_positive = Some(f.false_positive_rate);
        row.max_recovery = Some(recovery);
        row.max_unexplained = Some(unexplained);
    }
    timings.search_s = clock.elapsed().as_secs_f64();
    if solution.status != LpStatus::Optimal {
        row.status = format!("lp_{}", row.lp_status.clone().unwrap_or_default());
    }
    Ok(TrialOutcome {
        row,
        timings,
        alpha: solution.alpha,
    })
}

/// Aggregate means over the successful trials of one cell.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: usize,
    pub label: String,
    pub trials: usize,
    pub failed: usize,
    pub noise_fraction: f64,
    pub density: f64,
    pub sketch_rows: usize,
    pub leaves: usize,
    pub mean_truth_fpe: Option<f64>,
    pub mean_search_fpe: Option<f64>,
    pub mean_max_fpe: Option<f64>,
    pub mean_search_recovery: Option<f64>,
    pub mean_max_recovery: Option<f64>,
    pub mean_search_unexplained: Option<f64>,
    pub mean_max_unexplained: Option<f64>,
    pub mean_alpha_above_1e3: Option<f64>,
}

fn mean<T: Copy + Into<f64>>(values: impl Iterator<Item = Option<T>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().map(Into::into).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn usize_f(v: Option<usize>) -> Option<f64> {
    v.map(|x| x as f64)
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub configs: Vec<ExperimentConfig>,
    pub outcomes: Vec<TrialOutcome>,
}

impl ExperimentReport {
    pub fn rows(&self) -> impl Iterator<Item = &TrialRow> {
        self.outcomes.iter().map(|o| &o.row)
    }

    pub fn summaries(&self) -> Vec<CellSummary> {
        self.configs
            .iter()
            .enumerate()
            .map(|(cell, c)| {
                let rows: Vec<&TrialRow> = self.rows().filter(|r| r.cell == cell).collect();
                let ok = || rows.iter().filter(|r| r.status == "ok");
                CellSummary {
                    cell,
                    label: c.label.clone(),
                    trials: rows.len(),
                    failed: rows.iter().filter(|r| r.status != "ok").count(),
                    noise_fraction: c.noise_fraction,
                    density: c.density,
                    sketch_rows: c.sketch_rows,
                    leaves: c.leaves,
                    mean_truth_fpe: mean(ok().map(|r| r.truth_fpe)),
                    mean_search_fpe: mean(ok().map(|r| r.search_fpe)),
                    mean_max_fpe: mean(ok().map(|r| r.max_fpe)),
                    mean_search_recovery: mean(ok().map(|r| r.search_recovery)),
                    mean_max_recovery: mean(ok().map(|r| r.max_recovery)),
                    mean_search_unexplained: mean(ok().map(|r| usize_f(r.search_unexplained))),
                    mean_max_unexplained: mean(ok().map(|r| usize_f(r.max_unexplained))),
                    mean_alpha_above_1e3: mean(ok().map(|r| usize_f(r.alpha_above_1e3))),
                }
            })
            .collect()
    }

    /// Per-trial rows. Timings are left out so reruns are byte-identical.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_rows(path, self.rows())
    }

    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        write_rows(path, self.summaries().iter())
    }

    pub fn write_timings_csv(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            cell: usize,
            trial: usize,
            render_s: f64,
            sketch_s: f64,
            lp_s: f64,
            search_s: f64,
        }
        write_rows(
            path,
            self.outcomes.iter().map(|o| Row {
                cell: o.row.cell,
                trial: o.row.trial,
                render_s: o.timings.render_s,
                sketch_s: o.timings.sketch_s,
                lp_s: o.timings.lp_s,
                search_s: o.timings.search_s,
            }),
        )
    }

    /// One `x,y` style data file per figure.
    pub fn write_figures(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

        #[derive(Serialize)]
        struct Alpha {
            rank: usize,
            template_id: u32,
            alpha: f64,
        }
        if let Some(o) = self.outcomes.iter().find(|o| !o.alpha.is_empty()) {
            let mut ranked: Vec<(usize, f64)> = o.alpha.iter().copied().enumerate().collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            write_rows(
                &dir.join("fig5_alpha.csv"),
                ranked.iter().enumerate().map(|(rank, &(i, a))| Alpha {
                    rank,
                    template_id: TemplateId::from_index(i).0,
                    alpha: a,
                }),
            )?;
        }

        #[derive(Serialize)]
        struct Scatter {
            method: &'static str,
            pixels_changed: f64,
            fpe: f64,
            truth_fpe: f64,
        }
        let mut scatter = Vec::new();
        for r in self.rows() {
            let (Some(x), Some(t)) = (r.pixels_changed, r.truth_fpe) else { continue };
            for (method, y) in [("max", r.max_fpe), ("search", r.search_fpe)] {
                if let Some(fpe) = y {
                    scatter.push(Scatter {
                        method,
                        pixels_changed: x,
                        fpe,
                        truth_fpe: t,
                    });
                }
            }
        }
        write_rows(&dir.join("fig_scatter.csv"), scatter.iter())?;

        #[derive(Serialize)]
        struct Curve {
            method: &'static str,
            x: f64,
            y: f64,
            trials: usize,
        }
        let curve = |x_of: &dyn Fn(&TrialRow) -> f64, y_of: &dyn Fn(&TrialRow, bool) -> Option<f64>| {
            let mut out = Vec::new();
            for (name, search) in [("max", false), ("search", true)] {
                let mut groups: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
                for r in self.rows() {
                    if let Some(y) = y_of(r, search) {
                        let x = x_of(r);
                        groups.entry(x.to_bits()).or_insert((x, Vec::new())).1.push(y);
                    }
                }
                let mut points: Vec<(f64, Vec<f64>)> = groups.into_values().collect();
                points.sort_by(|a, b| a.0.total_cmp(&b.0));
                for (x, ys) in points {
                    out.push(Curve {
                        method: name,
                        x,
                        y: ys.iter().sum::<f64>() / ys.len() as f64,
                        trials: ys.len(),
                    });
                }
            }
            out
        };
        let unexplained = |r: &TrialRow, s: bool| usize_f(if s { r.search_unexplained } else { r.max_unexplained });
        let recovery = |r: &TrialRow, s: bool| if s { r.search_recovery } else { r.max_recovery };
        write_rows(&dir.join("fig6_noise.csv"), curve(&|r| r.noise_fraction, &unexplained).iter())?;
        write_rows(&dir.join("fig7_density.csv"), curve(&|r| r.density, &recovery).iter())?;
        write_rows(&dir.join("fig8_measurements.csv"), curve(&|r| r.sketch_rows as f64, &recovery).iter())?;
        Ok(())
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: impl Iterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

/// Runs every trial of every cell. Trials run concurrently; a trial that
/// errors becomes a `failed` row and the sweep carries on.
pub fn run_sweep(configs: &[ExperimentConfig]) -> Result<ExperimentReport> {
    if configs.is_empty() {
        return Err(Error::InvalidParameter("sweep grid has no cells".into()));
    }
    for c in configs {
        c.validate()?;
    }
    let jobs: Vec<(usize, usize)> = configs
        .iter()
        .enumerate()
        .flat_map(|(cell, c)| (0..c.trials).map(move |t| (cell, t)))
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(cell, trial)| {
            let config = &configs[cell];
            run_trial(config, cell, trial).unwrap_or_else(|e| {
                let mut row = base_row(config, cell, trial, trial_seed(config, trial));
                row.status = format!("failed: {e}");
                TrialOutcome {
                    row,
                    timings: StageTimings::default(),
                    alpha: Vec::new(),
                }
            })
        })
        .collect();
    Ok(ExperimentReport {
        configs: configs.to_vec(),
        outcomes,
    })
}

/// Unit-block scenes on a square grid, for culling benchmarks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlockSceneConfig {
    /// Grid cells per side.
    pub grid: usize,
    pub layers: usize,
    pub blocks: usize,
    pub rig: RingRigParams,
}

impl Default for BlockSceneConfig {
    fn default() -> Self {
        BlockSceneConfig {
            grid: 14,
            layers: 4,
            blocks: 16,
            rig: RingRigParams {
                views: 4,
                radius: 24.0,
                elevation: 16.0,
                target: [7.0, 7.0, 1.0],
                width: 200,
                height: 150,
                focal: 190.0,
            },
        }
    }
}

#[derive(Clone, Debug)]
pub struct BlockScene {
    pub library: TemplateLibrary,
    pub true_ids: Vec<TemplateId>,
    pub rig: CameraRig,
}

/// Stacks `blocks` unit blocks on random grid columns, each resting on the
/// ground or on the block below it.
pub fn generate_block_scene(config: &BlockSceneConfig, seed: u64) -> Result<BlockScene> {
    let (g, layers) = (config.grid, config.layers);
    if g == 0 || layers == 0 || config.blocks == 0 || config.blocks > g * g * layers {
        return Err(Error::InvalidParameter(format!(
            "cannot place {} blocks on a {g}x{g}x{layers} grid",
            config.blocks
        )));
    }
    let block = PrimitiveShape::cuboid("block", 1.0, 1.0, 1.0, 1)?;
    let bounds = Aabb::new(Point3::origin(), Point3::new(g as f64, g as f64, layers as f64))?;
    let library = enumerate_library(&[block], bounds, 1.0, layers)?;
    let mut rng = rng(seed);
    let mut height = vec![0usize; g * g];
    let mut true_ids = Vec::with_capacity(config.blocks);
    while true_ids.len() < config.blocks {
        let cell = rng.random_range(0..g * g);
        if height[cell] < layers {
            // Ids run layer-major, then row, then column.
            true_ids.push(TemplateId::from_index(height[cell] * g * g + cell));
            height[cell] += 1;
        }
    }
    true_ids.sort_unstable();
    Ok(BlockScene {
        library,
        true_ids,
        rig: ring_rig(&config.rig)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::render_template;

    #[test]
    fn leaf_geometry() {
        let leaf = Leaf {
            azimuth: 0.0,
            elevation: 0.0,
            length: 1.0,
            width: 0.2,
        };
        let v = leaf.vertices(Point::origin());
        assert_eq!(v[0], Point::origin());
        assert!((v[2] - Point::new(1.0, 0.0, 0.0)).norm() < 1e-12);
        assert!((v[1] - Point::new(0.4, -0.1, 0.0)).norm() < 1e-12);
        assert!((v[3] - Point::new(0.4, 0.1, 0.0)).norm() < 1e-12);
        assert!(leaf.shape("l", Point::origin()).is_ok());
    }

    #[test]
    fn plant_is_deterministic_and_within_bounds() {
        let p = PlantParams::default();
        let a = generate_plant(&p, 6, 50, 3).unwrap();
        let b = generate_plant(&p, 6, 50, 3).unwrap();
        assert_eq!(a.leaves, b.leaves);
        assert_eq!(a.true_ids, b.true_ids);
        assert_eq!(a.true_ids.len(), 6);
        assert_eq!(a.library.len(), 50);
        for l in &a.leaves {
            assert!((0.0..TAU).contains(&l.azimuth));
            assert!((15f64.to_radians()..75f64.to_radians()).contains(&l.elevation));
            assert!((0.6..1.2).contains(&l.length));
        }
        let all = generate_plant(&p, 4, 4, 9).unwrap();
        assert_eq!(all.true_ids.len(), all.library.len());
        assert!(generate_plant(&p, 0, 4, 9).is_err());
        assert!(generate_plant(&p, 5, 4, 9).is_err());
    }

    #[test]
    fn default_rig_frames_the_plant() {
        let config = ExperimentConfig::default();
        let rig = ring_rig(&config.rig).unwrap();
        let plant = generate_plant(&config.plant, 6, 200, 1).unwrap();
        for t in plant.library.templates() {
            let y = render_template(t, &rig).unwrap();
            let per_view = y.count_ones() / 4;
            assert!(per_view > 0, "template {} is invisible", t.id);
            // Nothing touches the image border.
            for img in crate::raster::unflatten(&y) {
                for x in 0..img.width() {
                    assert!(!img.get(x, 0) && !img.get(x, img.height() - 1));
                }
                for yy in 0..img.height() {
                    assert!(!img.get(0, yy) && !img.get(img.width() - 1, yy));
                }
            }
        }
    }

    #[test]
    fn fpe_cases() {
        let dims = vec![(4, 2)];
        let mv = |bits: [bool; 8]| MeasurementVector::with_dims(crate::raster::BitVec::from_bools(bits), dims.clone()).unwrap();
        let target = mv([true, true, false, false, true, false, false, false]);
        assert_eq!(fpe(&target, &target).unwrap().fpe, 1.0);
        let empty = mv([false; 8]);
        assert_eq!(fpe(&empty, &target).unwrap().fpe, 0.0);
        let half = mv([true, false, true, true, false, false, false, false]);
        let f = fpe(&half, &target).unwrap();
        assert!((f.fpe - 1.0 / 3.0).abs() < 1e-15);
        assert!((f.false_positive_rate - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(fpe(&empty, &empty).unwrap().fpe, 1.0);
        assert!(fpe(&half, &empty).is_err());
    }

    #[test]
    fn recovery_cases() {
        let t = [TemplateId(1), TemplateId(4)];
        assert_eq!(recovery_fraction(&t, &t).unwrap(), 1.0);
        assert_eq!(recovery_fraction(&[TemplateId(2)], &t).unwrap(), 0.0);
        assert_eq!(recovery_fraction(&[TemplateId(4), TemplateId(9)], &t).unwrap(), 0.5);
        assert!(recovery_fraction(&t, &[]).is_err());
    }

    #[test]
    fn sweep_config_merges_cells() {
        let s = SweepConfig::parse(
            r#"{"base": {"trials": 2, "rig": {"width": 100}}, "cells": [{"noise_fraction": 0.04}, {"label": "b", "rig": {"height": 80}}]}"#,
        )
        .unwrap();
        let cells = s.expand().unwrap();
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[0].trials, 2);
        assert_eq!(cells[0].noise_fraction, 0.04);
        assert_eq!(cells[0].rig.width, 100);
        assert_eq!(cells[1].rig.height, 80);
        assert_eq!(cells[1].rig.width, 100);
        assert_eq!(cells[1].sketch_rows, 441);
        assert!(SweepConfig::parse(r#"{"cells": []}"#).unwrap().expand().is_err());
        assert!(SweepConfig::parse(r#"{"cells": [{"tirals": 3}]}"#).unwrap().expand().is_err());
        assert!(SweepConfig::parse(r#"{"cells": [{"trials": 0}]}"#).unwrap().expand().is_err());
    }

    #[test]
    fn block_scene_is_stacked() {
        let cfg = BlockSceneConfig::default();
        let s = generate_block_scene(&cfg, 5).unwrap();
        assert_eq!(s.library.len(), 784);
        assert_eq!(s.true_ids.len(), cfg.blocks);
        for id in &s.true_ids {
            let t = s.library.get(*id).unwrap();
            let z = t.pose.translation.z;
            if z > 0.0 {
                let below = s.true_ids.iter().any(|o| {
                    let b = s.library.get(*o).unwrap().pose.translation;
                    b.x == t.pose.translation.x && b.y == t.pose.translation.y && b.z == z - 1.0
                });
                assert!(below, "block {id} floats");
            }
        }
    }
}
