use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use deconstruct::camera::{ring_rig, CameraRig, RingRigParams};
use deconstruct::geometry::{compose_scene, enumerate_library, parse_scene, parse_shapes, Aabb, TemplateLibrary};
use deconstruct::harness::{estimate_fpe, recovery_fraction, run_sweep, SweepConfig};
use deconstruct::raster::{add_salt_pepper, render_scene, silhouette_error};
use deconstruct::rounding::{round_max, round_search, SearchConfig, StructureEstimate};
use deconstruct::seed::derive_seed;
use deconstruct::simplex::{LpStatus, SimplexOptions};
use deconstruct::sketch::{build_sketch, sketch_basis, SketchMatrix, SketchedBasis};
use deconstruct::solver::{cull_and_sketch, deconstruct_with_basis, DEFAULT_CULL_THRESHOLD};
use deconstruct::{pbm, Error};
use nalgebra::Point3;
use serde_json::json;

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_SOLVER: u8 = 4;

/// Part-level structure recovery from multi-view binary silhouettes.
#[derive(Parser, Debug)]
#[command(name = "deconstruct", version, about)]
struct Cli {
    /// Maximum worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write per-figure data files from a sweep into this directory.
    #[arg(long, global = true, value_name = "DIR")]
    emit_figures: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Enumerate posed templates of the given shapes on a grid and write a TLIB file.
    GenLibrary {
        /// Shapes file (`SHAPES 1` header, one `SHAPE` line per primitive).
        #[arg(long)]
        shapes: PathBuf,
        /// Scene bounds as `minx,miny,minz,maxx,maxy,maxz`.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        bounds: Vec<f64>,
        /// Grid pitch between translations.
        #[arg(long, default_value_t = 1.0)]
        pitch: f64,
        /// Number of stacking layers.
        #[arg(long, default_value_t = 1)]
        layers: usize,
        /// Output TLIB file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a scene into every view and write a measurement manifest plus PBMs.
    Render {
        /// Template library (TLIB).
        #[arg(long)]
        library: PathBuf,
        /// Scene file listing template ids.
        #[arg(long)]
        scene: PathBuf,
        /// Camera file. Written first when --ring is given.
        #[arg(long)]
        cams: PathBuf,
        /// Build a ring rig: `views,radius,elevation,tx,ty,tz,width,height,focal`.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        ring: Option<Vec<f64>>,
        /// Fraction of pixels resampled as salt-and-pepper noise.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Master seed for the noise.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output manifest; view images go next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the sparse sketch matrix, and optionally the sketched basis of a library.
    Sketch {
        /// Camera file, which fixes the measurement length.
        #[arg(long)]
        cams: PathBuf,
        /// Sketch rows.
        #[arg(long = "D", default_value_t = 441)]
        rows: usize,
        /// Fraction of nonzeros per row.
        #[arg(long = "k", default_value_t = 1e-2)]
        density: f64,
        /// Master seed.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output sketch file.
        #[arg(long)]
        out: PathBuf,
        /// Library whose templates to sketch.
        #[arg(long, requires = "basis_out")]
        library: Option<PathBuf>,
        /// Output sketched basis (binary, with a JSON sidecar).
        #[arg(long, requires = "library")]
        basis_out: Option<PathBuf>,
    },
    /// Cull, solve the LP and round to a template set.
    Deconstruct {
        /// Template library (TLIB).
        #[arg(long)]
        library: PathBuf,
        /// Camera file.
        #[arg(long)]
        cams: PathBuf,
        /// Target measurement manifest.
        #[arg(long)]
        target: PathBuf,
        /// Sparsity weight.
        #[arg(long, default_value_t = 1e-2)]
        lambda: f64,
        /// Sketch rows.
        #[arg(long = "D", default_value_t = 441)]
        rows: usize,
        /// Fraction of nonzeros per sketch row.
        #[arg(long = "k", default_value_t = 1e-2)]
        density: f64,
        /// Master seed; the sketch uses a seed derived from it.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Load the sketch from this file instead of generating it.
        #[arg(long)]
        sketch: Option<PathBuf>,
        /// Rounding method.
        #[arg(long, value_enum, default_value_t = MethodArg::Search)]
        method: MethodArg,
        /// Part count for the Max method.
        #[arg(long)]
        parts: Option<usize>,
        /// Templates whose silhouette lies more than this fraction outside the target are dropped.
        #[arg(long, default_value_t = DEFAULT_CULL_THRESHOLD)]
        cull_threshold: f64,
        /// Search settings as JSON (fields of the search config; missing fields keep defaults).
        #[arg(long)]
        search: Option<String>,
        /// Simplex iteration cap.
        #[arg(long, default_value_t = 50_000)]
        max_iters: usize,
        /// Output scene estimate.
        #[arg(long)]
        out: PathBuf,
        /// Run summary JSON (default: `<out>.json`).
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Include wall-clock stage timings in the summary.
        #[arg(long)]
        record_timings: bool,
    },
    /// Score an estimate against a clean target, and optionally a true scene.
    Evaluate {
        /// Template library (TLIB).
        #[arg(long)]
        library: PathBuf,
        /// Camera file.
        #[arg(long)]
        cams: PathBuf,
        /// Estimated scene.
        #[arg(long)]
        estimate: PathBuf,
        /// Clean target measurement manifest.
        #[arg(long)]
        target: PathBuf,
        /// True scene, for recovery fraction.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a synthetic-plant experiment sweep.
    Sweep {
        /// Sweep config JSON (`base` plus `cells`).
        #[arg(long)]
        config: PathBuf,
        /// Per-trial CSV.
        #[arg(long)]
        out: PathBuf,
        /// Per-cell summary CSV.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Per-trial stage timings CSV.
        #[arg(long)]
        timings: Option<PathBuf>,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Max,
    Search,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::DimensionMismatch(_)
            | Error::UnknownId(_)
            | Error::DuplicateId(_)
            | Error::ZeroForeground
            | Error::EmptyFeasibleSet(_)
            | Error::PointAtInfinity(_)
            | Error::SingularCamera => EXIT_DATA,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    if cli.emit_figures.is_some() && !matches!(cli.command, Command::Sweep { .. }) {
        return Err(Failure::usage("--emit-figures only applies to `sweep`"));
    }
    match cli.command {
        Command::GenLibrary {
            shapes,
            bounds,
            pitch,
            layers,
            out,
        } => gen_library(&shapes, &bounds, pitch, layers, &out),
        Command::Render {
            library,
            scene,
            cams,
            ring,
            noise,
            seed,
            out,
        } => render(&library, &scene, &cams, ring.as_deref(), noise, seed, &out),
        Command::Sketch {
            cams,
            rows,
            density,
            seed,
            out,
            library,
            basis_out,
        } => sketch(&cams, rows, density, seed, &out, library.as_deref().zip(basis_out.as_deref())),
        Command::Deconstruct {
            library,
            cams,
            target,
            lambda,
            rows,
            density,
            seed,
            sketch,
            method,
            parts,
            cull_threshold,
            search,
            max_iters,
            out,
            summary,
            record_timings,
        } => {
            let search: SearchConfig = match search {
                Some(s) => serde_json::from_str(&s).map_err(|e| Failure::usage(format!("--search: {e}")))?,
                None => SearchConfig::default(),
            };
            let summary = summary.unwrap_or_else(|| with_suffix(&out, ".json"));
            deconstruct_cmd(DeconstructArgs {
                library,
                cams,
                target,
                lambda,
                rows,
                density,
                seed,
                sketch,
                method,
                parts,
                cull_threshold,
                search,
                max_iters,
                out,
                summary,
                record_timings,
            })
        }
        Command::Evaluate {
            library,
            cams,
            estimate,
            target,
            truth,
            out,
        } => evaluate(&library, &cams, &estimate, &target, truth.as_deref(), out.as_deref()),
        Command::Sweep {
            config,
            out,
            summary,
            timings,
        } => sweep(&config, &out, summary.as_deref(), timings.as_deref(), cli.emit_figures.as_deref()),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Outcome {
    std::fs::write(path, contents).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn gen_library(shapes: &Path, bounds: &[f64], pitch: f64, layers: usize, out: &Path) -> Outcome {
    let shapes = parse_shapes(&read_text(shapes)?, shapes)?;
    if shapes.is_empty() {
        return Err(Failure::usage("shapes file lists no shapes"));
    }
    let [x0, y0, z0, x1, y1, z1] = bounds else {
        return Err(Failure::usage("--bounds needs six comma-separated numbers"));
    };
    let bounds = Aabb::new(Point3::new(*x0, *y0, *z0), Point3::new(*x1, *y1, *z1))?;
    let library = enumerate_library(&shapes, bounds, pitch, layers)?;
    library.write(out)?;
    eprintln!("wrote {} templates to {}", library.len(), out.display());
    Ok(())
}

fn ring_from(values: &[f64]) -> Result<RingRigParams, Failure> {
    let [views, radius, elevation, tx, ty, tz, width, height, focal] = values else {
        return Err(Failure::usage(
            "--ring needs views,radius,elevation,tx,ty,tz,width,height,focal",
        ));
    };
    let count = |v: f64, name: &str| {
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(Failure::usage(format!("--ring {name} must be a positive integer")))
        }
    };
    Ok(RingRigParams {
        views: count(*views, "views")?,
        radius: *radius,
        elevation: *elevation,
        target: [*tx, *ty, *tz],
        width: count(*width, "width")?,
        height: count(*height, "height")?,
        focal: *focal,
    })
}

fn render(
    library: &Path,
    scene: &Path,
    cams: &Path,
    ring: Option<&[f64]>,
    noise: f64,
    seed: u64,
    out: &Path,
) -> Outcome {
    let rig = match ring {
        Some(values) => {
            let rig = ring_rig(&ring_from(values)?)?;
            rig.write(cams)?;
            rig
        }
        None => CameraRig::read(cams)?,
    };
    let library = TemplateLibrary::read(library)?;
    let ids = parse_scene(&read_text(scene)?, scene)?;
    let clean = render_scene(&compose_scene(&ids, &library)?, &rig)?;
    let observed = add_salt_pepper(&clean, noise, derive_seed(seed, "salt-pepper", 0))?;
    pbm::write_measurement(out, &observed)?;
    Ok(())
}

fn sketch_seed(seed: u64) -> u64 {
    derive_seed(seed, "sketch", 0)
}

fn sketch(
    cams: &Path,
    rows: usize,
    density: f64,
    seed: u64,
    out: &Path,
    basis: Option<(&Path, &Path)>,
) -> Outcome {
    let rig = CameraRig::read(cams)?;
    let phi = build_sketch(rows, rig.measurement_len(), density, sketch_seed(seed))?;
    phi.write(out)?;
    if let Some((library, basis_out)) = basis {
        let library = TemplateLibrary::read(library)?;
        sketch_basis(&phi, &library, &rig)?.write(basis_out, &phi.sha256())?;
    }
    Ok(())
}

struct DeconstructArgs {
    library: PathBuf,
    cams: PathBuf,
    target: PathBuf,
    lambda: f64,
    rows: usize,
    density: f64,
    seed: u64,
    sketch: Option<PathBuf>,
    method: MethodArg,
    parts: Option<usize>,
    cull_threshold: f64,
    search: SearchConfig,
    max_iters: usize,
    out: PathBuf,
    summary: PathBuf,
    record_timings: bool,
}

fn deconstruct_cmd(a: DeconstructArgs) -> Outcome {
    if a.method == MethodArg::Max && a.parts.is_none() {
        return Err(Failure::usage("--method max needs --parts"));
    }
    a.search.validate()?;
    let rig = CameraRig::read(&a.cams)?;
    let library = TemplateLibrary::read(&a.library)?;
    let target = pbm::read_measurement(&a.target)?;
    target.check_rig(&rig)?;
    let phi = match &a.sketch {
        Some(path) => SketchMatrix::read(path)?,
        None => build_sketch(a.rows, target.len(), a.density, sketch_seed(a.seed))?,
    };

    let clock = Instant::now();
    let (cull, basis): (_, SketchedBasis) = cull_and_sketch(&target, &library, &rig, &phi, a.cull_threshold)?;
    let sketch_s = clock.elapsed().as_secs_f64();
    let clock = Instant::now();
    let opts = SimplexOptions {
        max_iters: a.max_iters,
        ..SimplexOptions::default()
    };
    let solution = deconstruct_with_basis(&target, &library, &phi, &basis, a.lambda, &opts)?;
    let lp_s = clock.elapsed().as_secs_f64();

    let mut summary = json!({
        "templates": library.len(),
        "retained": cull.retained.len(),
        "lambda": a.lambda,
        "sketch_rows": phi.rows(),
        "sketch_sha256": phi.sha256(),
        "lp_status": solution.status,
        "lp_objective": solution.objective,
        "lp_iterations": solution.iterations,
        "kkt_residual": solution.kkt_residual,
        "alpha_above_1e-3": solution.nonzeros_above(1e-3),
    });
    let write_summary = |summary: &serde_json::Value| {
        write_file(&a.summary, format!("{}\n", serde_json::to_string_pretty(summary).unwrap_or_default()))
    };
    if solution.status != LpStatus::Optimal {
        write_summary(&summary)?;
        let code = if solution.status == LpStatus::IterationLimit { EXIT_SOLVER } else { EXIT_DATA };
        return Err(Failure {
            code,
            message: format!("LP stopped with status {:?} after {} iterations", solution.status, solution.iterations),
        });
    }

    let clock = Instant::now();
    let (estimate, method, config): (StructureEstimate, &str, Option<&SearchConfig>) = match a.method {
        MethodArg::Max => (
            round_max(&solution, a.parts.unwrap_or(1), &target, &library, &rig)?,
            "max",
            None,
        ),
        MethodArg::Search => (
            round_search(&solution, &a.search, &target, &library, &rig)?,
            "search",
            Some(&a.search),
        ),
    };
    let round_s = clock.elapsed().as_secs_f64();
    write_file(&a.out, estimate.to_file_string(method, config))?;

    summary["method"] = json!(method);
    summary["parts"] = json!(estimate.len());
    summary["error"] = json!(estimate.error);
    summary["score"] = json!(estimate.score);
    if a.record_timings {
        summary["timings"] = json!({ "cull_sketch_s": sketch_s, "lp_s": lp_s, "round_s": round_s });
    }
    write_summary(&summary)
}

fn evaluate(
    library: &Path,
    cams: &Path,
    estimate: &Path,
    target: &Path,
    truth: Option<&Path>,
    out: Option<&Path>,
) -> Outcome {
    let rig = CameraRig::read(cams)?;
    let library = TemplateLibrary::read(library)?;
    let ids = parse_scene(&read_text(estimate)?, estimate)?;
    let target = pbm::read_measurement(target)?;
    target.check_rig(&rig)?;
    let est = StructureEstimate {
        error: 0,
        score: 0.0,
        template_ids: ids,
    };
    let fpe = estimate_fpe(&est, &target, &library, &rig)?;
    let rendered = render_scene(&compose_scene(&est.template_ids, &library)?, &rig)?;
    let mut report = json!({
        "parts": est.len(),
        "error": silhouette_error(&rendered, &target)?,
        "fpe": fpe.fpe,
        "false_positive_rate": fpe.false_positive_rate,
    });
    if let Some(truth) = truth {
        let true_ids = parse_scene(&read_text(truth)?, truth)?;
        report["recovery"] = json!(recovery_fraction(&est.template_ids, &true_ids)?);
    }
    let text = format!("{}\n", serde_json::to_string_pretty(&report).unwrap_or_default());
    match out {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn sweep(config: &Path, out: &Path, summary: Option<&Path>, timings: Option<&Path>, figures: Option<&Path>) -> Outcome {
    let configs = SweepConfig::read(config)
        .and_then(|c| c.expand())
        .map_err(|e| Failure::usage(e.to_string()))?;
    let report = run_sweep(&configs)?;
    report.write_csv(out)?;
    if let Some(path) = summary {
        report.write_summary_csv(path)?;
    }
    if let Some(path) = timings {
        report.write_timings_csv(path)?;
    }
    if let Some(dir) = figures {
        std::fs::create_dir_all(dir).map_err(|e| Failure::usage(format!("{}: {e}", dir.display())))?;
        report.write_figures(dir)?;
    }
    let failed = report.rows().filter(|r| r.status != "ok").count();
    eprintln!("{} trials, {failed} failed", report.rows().count());
    Ok(())
}
