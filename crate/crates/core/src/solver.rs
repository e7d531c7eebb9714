//! Template culling and the ℓ1 deconstruction LP.
//!
//! The LP is the epigraph form of
//! `min ‖Φy − Ψα‖₁ + λ‖α‖₁  s.t. 0 ≤ α ≤ 1`:
//! variables `(α, e)`, objective `Σe + λΣα`, rows `Ψα − e ≤ Φy` and
//! `−Ψα − e ≤ −Φy`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::CameraRig;
use crate::geometry::{TemplateId, TemplateLibrary};
use crate::raster::{render_template, MeasurementVector};
use crate::simplex::{self, LinearProgram, LpStatus, SimplexOptions};
use crate::sketch::{apply, SketchMatrix, SketchedBasis, SketchedMeasurement};
use crate::{Error, Result};

pub const DEFAULT_CULL_THRESHOLD: f64 = 0.05;
/// Output α entries are clamped to [0, 1] after checking they lie within
/// this distance of the box.
pub const ALPHA_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct DeconstructionProblem {
    pub sketched_y: SketchedMeasurement,
    pub basis: SketchedBasis,
    pub lambda: f64,
}

impl DeconstructionProblem {
    pub fn new(sketched_y: SketchedMeasurement, basis: SketchedBasis, lambda: f64) -> Result<Self> {
        if basis.rows() != sketched_y.len() {
            return Err(Error::DimensionMismatch(format!(
                "basis has {} rows, sketched measurement has {}",
                basis.rows(),
                sketched_y.len()
            )));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(DeconstructionProblem {
            sketched_y,
            basis,
            lambda,
        })
    }

    /// `‖Φy − Ψα‖₁ + λ‖α‖₁`.
    pub fn objective(&self, alpha: &[f64]) -> f64 {
        let d = self.basis.rows();
        let mut residual = self.sketched_y.values.clone();
        for (t, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                for (r, psi) in residual.iter_mut().zip(self.basis.column(t)) {
                    *r -= psi * a;
                }
            }
        }
        debug_assert_eq!(residual.len(), d);
        residual.iter().map(|r| r.abs()).sum::<f64>() + self.lambda * alpha.iter().map(|a| a.abs()).sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    /// One entry per template, in the order of `template_ids`.
    pub alpha: Vec<f64>,
    pub template_ids: Vec<TemplateId>,
    pub objective: f64,
    pub status: LpStatus,
    pub iterations: usize,
    pub kkt_residual: f64,
}

impl LpSolution {
    pub fn alpha_of(&self, id: TemplateId) -> Option<f64> {
        self.template_ids.iter().position(|&t| t == id).map(|i| self.alpha[i])
    }

    pub fn nonzeros_above(&self, threshold: f64) -> usize {
        self.alpha.iter().filter(|&&a| a > threshold).count()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CullReport {
    pub retained: Vec<TemplateId>,
    /// Dropped templates with the fraction of their silhouette outside the
    /// target.
    pub dropped: Vec<(TemplateId, f64)>,
}

/// Fraction of a silhouette's bits falling outside `target`. An empty
/// silhouette explains nothing and counts as fully outside.
pub fn outside_fraction(silhouette: &MeasurementVector, target: &MeasurementVector) -> f64 {
    let total = silhouette.count_ones();
    if total == 0 {
        return 1.0;
    }
    silhouette.bits().and_not_count(target.bits()) as f64 / total as f64
}

fn check_threshold(threshold: f64) -> Result<()> {
    if (0.0..=1.0).contains(&threshold) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("cull threshold {threshold} not in [0, 1]")))
    }
}

pub fn cull_templates(
    library: &TemplateLibrary,
    rig: &CameraRig,
    target: &MeasurementVector,
    threshold: f64,
) -> Result<CullReport> {
    check_threshold(threshold)?;
    target.check_rig(rig)?;
    let fractions = library
        .templates()
        .par_iter()
        .map(|t| Ok(outside_fraction(&render_template(t, rig)?, target)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(split_by_fraction(library, &fractions, threshold))
}

fn split_by_fraction(library: &TemplateLibrary, fractions: &[f64], threshold: f64) -> CullReport {
    let mut report = CullReport::default();
    for (t, &f) in library.templates().iter().zip(fractions) {
        if f > threshold {
            report.dropped.push((t.id, f));
        } else {
            report.retained.push(t.id);
        }
    }
    report
}

pub fn formulate_lp(problem: &DeconstructionProblem) -> Result<LinearProgram> {
    let d = problem.basis.rows();
    let t = problem.basis.cols();
    if problem.sketched_y.len() != d {
        return Err(Error::DimensionMismatch("basis rows vs sketched measurement".into()));
    }
    let mut cost = vec![problem.lambda; t];
    cost.extend(std::iter::repeat_n(1.0, d));
    let lower = vec![0.0; t + d];
    let mut upper = vec![1.0; t];
    upper.extend(std::iter::repeat_n(f64::INFINITY, d));
    let mut lp = LinearProgram::new(cost, lower, upper)?;
    let psi = |i: usize| (0..t).map(move |c| (c, problem.basis.column(c)[i]));
    for i in 0..d {
        lp.add_row(psi(i).chain([(t + i, -1.0)]), problem.sketched_y.values[i])?;
    }
    for i in 0..d {
        lp.add_row(psi(i).map(|(c, v)| (c, -v)).chain([(t + i, -1.0)]), -problem.sketched_y.values[i])?;
    }
    Ok(lp)
}

/// Solves a formulated deconstruction LP, returning α for the first
/// `template_ids.len()` variables.
pub fn solve_lp(lp: &LinearProgram, template_ids: &[TemplateId], opts: &SimplexOptions) -> Result<LpSolution> {
    let t = template_ids.len();
    if lp.num_vars() < t {
        return Err(Error::DimensionMismatch("fewer LP variables than templates".into()));
    }
    let outcome = simplex::solve(lp, opts)?;
    let alpha: Vec<f64> = outcome.x[..t]
        .iter()
        .map(|&a| {
            debug_assert!(
                outcome.status != LpStatus::Optimal || (-ALPHA_TOL..=1.0 + ALPHA_TOL).contains(&a),
                "alpha {a} outside the box"
            );
            a.clamp(0.0, 1.0)
        })
        .collect();
    Ok(LpSolution {
        alpha,
        template_ids: template_ids.to_vec(),
        objective: outcome.objective,
        status: outcome.status,
        iterations: outcome.iterations,
        kkt_residual: outcome.kkt_residual,
    })
}

pub fn solve_problem(problem: &DeconstructionProblem, opts: &SimplexOptions) -> Result<LpSolution> {
    solve_lp(&formulate_lp(problem)?, problem.basis.template_ids(), opts)
}

#[derive(Clone, Debug)]
pub struct Deconstruction {
    /// Full-length solution over the library; culled templates have α = 0.
    pub solution: LpSolution,
    pub cull: CullReport,
    /// Sketched columns of the retained templates.
    pub basis: SketchedBasis,
}

/// Renders every template once, culls against `target`, and sketches the
/// survivors.
pub fn cull_and_sketch(
    target: &MeasurementVector,
    library: &TemplateLibrary,
    rig: &CameraRig,
    phi: &SketchMatrix,
    cull_threshold: f64,
) -> Result<(CullReport, SketchedBasis)> {
    check_threshold(cull_threshold)?;
    target.check_rig(rig)?;
    if phi.cols() != target.len() {
        return Err(Error::DimensionMismatch(format!(
            "sketch has {} columns, target has {} bits",
            phi.cols(),
            target.len()
        )));
    }
    let columns = library
        .templates()
        .par_iter()
        .map(|t| {
            let y = render_template(t, rig)?;
            let f = outside_fraction(&y, target);
            let column = if f > cull_threshold {
                None
            } else {
                Some(phi.apply_bits(y.bits())?)
            };
            Ok((f, column))
        })
        .collect::<Result<Vec<_>>>()?;
    let fractions: Vec<f64> = columns.iter().map(|c| c.0).collect();
    let cull = split_by_fraction(library, &fractions, cull_threshold);
    let entries: Vec<f64> = columns.into_iter().filter_map(|c| c.1).flatten().collect();
    let basis = SketchedBasis::new(phi.rows(), entries, cull.retained.clone())?;
    Ok((cull, basis))
}

/// Culls, sketches the retained templates, and solves the LP.
pub fn deconstruct(
    target: &MeasurementVector,
    library: &TemplateLibrary,
    rig: &CameraRig,
    phi: &SketchMatrix,
    lambda: f64,
    cull_threshold: f64,
    opts: &SimplexOptions,
) -> Result<Deconstruction> {
    let (cull, basis) = cull_and_sketch(target, library, rig, phi, cull_threshold)?;
    let solution = deconstruct_with_basis(target, library, phi, &basis, lambda, opts)?;
    Ok(Deconstruction { solution, cull, basis })
}

/// Solves against precomputed sketched columns, expanding α back to the
/// whole library.
pub fn deconstruct_with_basis(
    target: &MeasurementVector,
    library: &TemplateLibrary,
    phi: &SketchMatrix,
    basis: &SketchedBasis,
    lambda: f64,
    opts: &SimplexOptions,
) -> Result<LpSolution> {
    let problem = DeconstructionProblem::new(apply(phi, target)?, basis.clone(), lambda)?;
    let reduced = solve_problem(&problem, opts)?;
    let mut alpha = vec![0.0; library.len()];
    for (&id, &a) in reduced.template_ids.iter().zip(&reduced.alpha) {
        library.get(id)?;
        alpha[id.index()] = a;
    }
    Ok(LpSolution {
        alpha,
        template_ids: library.templates().iter().map(|t| t.id).collect(),
        ..reduced
    })
}
