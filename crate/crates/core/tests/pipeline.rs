use deconstruct::geometry::{parse_scene, TemplateId};
use deconstruct::harness::{build_trial_scene, recovery_fraction, ExperimentConfig, TrialScene};
use deconstruct::raster::render_template;
use deconstruct::rounding::{round_max, round_search, scene_error, SearchConfig};
use deconstruct::simplex::{LpStatus, SimplexOptions};
use deconstruct::sketch::{build_sketch, SketchMatrix, SketchedBasis};
use deconstruct::solver::{cull_templates, deconstruct, deconstruct_with_basis, Deconstruction};
use std::path::Path;

fn small() -> ExperimentConfig {
    ExperimentConfig {
        leaves: 3,
        templates: 60,
        ..ExperimentConfig::default()
    }
}

fn solve(scene: &TrialScene, config: &ExperimentConfig) -> (SketchMatrix, Deconstruction) {
    let phi = build_sketch(config.sketch_rows, scene.observed.len(), config.density, 17).unwrap();
    let dec = deconstruct(
        &scene.observed,
        &scene.plant.library,
        &scene.rig,
        &phi,
        config.lambda,
        config.cull_threshold,
        &SimplexOptions::default(),
    )
    .unwrap();
    (phi, dec)
}

#[test]
fn single_template_is_found_exactly() {
    let config = small();
    let scene = build_trial_scene(&config, 1).unwrap();
    let id = scene.plant.true_ids[0];
    let library = scene.plant.library.subset(&[id]).unwrap();
    let target = render_template(&library.templates()[0], &scene.rig).unwrap();
    let phi = build_sketch(config.sketch_rows, target.len(), config.density, 2).unwrap();
    let dec = deconstruct(&target, &library, &scene.rig, &phi, 1e-2, 0.05, &SimplexOptions::default()).unwrap();
    assert_eq!(dec.solution.status, LpStatus::Optimal);
    assert!((dec.solution.alpha[0] - 1.0).abs() < 1e-6);
    let est = round_search(&dec.solution, &SearchConfig::default(), &target, &library, &scene.rig).unwrap();
    assert_eq!(est.template_ids, vec![TemplateId(1)]);
    assert_eq!(est.error, 0);
}

#[test]
fn culling_keeps_every_true_leaf_without_noise() {
    let config = small();
    for trial in 0..5 {
        let scene = build_trial_scene(&config, trial).unwrap();
        let cull = cull_templates(&scene.plant.library, &scene.rig, &scene.observed, 0.05).unwrap();
        for id in &scene.plant.true_ids {
            assert!(cull.retained.contains(id), "trial {trial} dropped {id}");
        }
        assert_eq!(cull.retained.len() + cull.dropped.len(), scene.plant.library.len());
    }
}

#[test]
fn small_plants_are_recovered_and_search_is_no_worse_than_max() {
    let config = small();
    for trial in 0..3 {
        let scene = build_trial_scene(&config, trial).unwrap();
        let (_, dec) = solve(&scene, &config);
        assert_eq!(dec.solution.status, LpStatus::Optimal);
        let library = &scene.plant.library;
        let search = round_search(&dec.solution, &config.search, &scene.observed, library, &scene.rig).unwrap();
        let max = round_max(&dec.solution, config.leaves, &scene.observed, library, &scene.rig).unwrap();
        assert_eq!(search.error, scene_error(&search.template_ids, &scene.observed, library, &scene.rig).unwrap());
        let lam = config.search.lambda_search;
        assert!(
            search.error as f64 + lam * search.len() as f64 <= max.error as f64 + lam * max.len() as f64 + 1e-9,
            "trial {trial}: search {} max {}",
            search.error,
            max.error
        );
        assert_eq!(recovery_fraction(&search.template_ids, &scene.plant.true_ids).unwrap(), 1.0);
        assert_eq!(search.error, 0);
    }
}

#[test]
fn estimate_file_round_trips() {
    let config = small();
    let scene = build_trial_scene(&config, 0).unwrap();
    let (_, dec) = solve(&scene, &config);
    let est = round_search(&dec.solution, &config.search, &scene.observed, &scene.plant.library, &scene.rig).unwrap();
    let text = est.to_file_string("search", Some(&config.search));
    assert!(text.contains("# method search"));
    let ids = parse_scene(&text, Path::new("estimate.scene")).unwrap();
    assert_eq!(ids, est.template_ids);
}

#[test]
fn stored_basis_reproduces_the_solve() {
    let config = small();
    let scene = build_trial_scene(&config, 2).unwrap();
    let (phi, dec) = solve(&scene, &config);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("basis.bin");
    dec.basis.write(&path, &phi.sha256()).unwrap();
    let basis = SketchedBasis::read(&path, &phi.sha256()).unwrap();
    assert!(SketchedBasis::read(&path, "0000").is_err());
    let again = deconstruct_with_basis(
        &scene.observed,
        &scene.plant.library,
        &phi,
        &basis,
        config.lambda,
        &SimplexOptions::default(),
    )
    .unwrap();
    assert_eq!(again.alpha, dec.solution.alpha);
    assert_eq!(again.objective, dec.solution.objective);
}
