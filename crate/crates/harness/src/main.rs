use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use upca_core::datagen::generate;
use upca_core::io::{
    format_permutations, parse_permutations, read_matrix, write_bundle, write_matrix,
};
use upca_core::numerics::max_angle_degrees;
use upca_core::stage2::{relative_error, restore_matrix};
use upca_core::{
    CorruptionSpec, OutlierModel, RestorationMethod, Snr, Stage1Method, SubspaceBasis,
};
use upca_harness::images::{
    image_pipeline, synthetic_stack, ImagePipelineSettings, ImageStack, SyntheticStack,
};
use upca_harness::patches::{apply_patch_permutation, patch_permute, PatchSpec};
use upca_harness::pgm::{Pgm, PgmFormat};
use upca_harness::pipeline::{
    run_pipeline, run_stage1, write_json, write_pipeline_outputs, PipelineInput, PipelineSettings,
};
use upca_harness::{
    run_phase_transition, run_stage2_grid, run_theory_suite, ExperimentGrid, TheorySuiteConfig,
};

#[derive(Parser)]
#[command(name = "upca", version, about = "Unlabeled PCA experiments and tools")]
struct Cli {
    /// JSON configuration (experiment grid, or theory suite for theory-check)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output file or directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Stage2Args {
    /// lsrf, l1rr, em or brute
    #[arg(long, default_value = "lsrf")]
    method: RestorationMethod,
    /// l1-RR penalty (default from the column count)
    #[arg(long)]
    lambda: Option<f64>,
    /// sorting-EM restarts
    #[arg(long)]
    restarts: Option<usize>,
    /// Relative residual above which a column is restored
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a ground-truth bundle
    Synth {
        #[arg(long, default_value_t = 50)]
        m: usize,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        r: usize,
        #[arg(long, default_value_t = 0.5)]
        outlier_ratio: f64,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        /// dB, or "noiseless"
        #[arg(long, default_value = "noiseless")]
        snr_db: String,
        /// permuted or sphere
        #[arg(long, default_value = "permuted")]
        outlier_model: String,
    },
    /// Estimate the inlier subspace
    Stage1 {
        /// Bundle directory or matrix file
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        r: Option<usize>,
        /// cop, irls or rsgm
        #[arg(long)]
        method: Option<Stage1Method>,
    },
    /// Restore columns against a given subspace basis
    Stage2 {
        #[arg(long)]
        input: PathBuf,
        /// Matrix file holding an orthonormal basis
        #[arg(long)]
        basis: PathBuf,
        #[command(flatten)]
        stage2: Stage2Args,
    },
    /// Stage I, outlier detection and stage II in one go
    Pipeline {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        r: Option<usize>,
        #[arg(long)]
        stage1_method: Option<Stage1Method>,
        #[command(flatten)]
        stage2: Stage2Args,
    },
    /// Angle between estimated and true subspace over a grid
    PhaseTransition,
    /// Restoration error over a grid
    Stage2Grid,
    /// Exhaustive identifiability checks, JSON report
    TheoryCheck,
    /// Permute the patches of a graymap
    PatchPermute {
        #[arg(long)]
        input: PathBuf,
        /// Patch size, WxH
        #[arg(long)]
        patch: PatchSpec,
        #[arg(long, default_value_t = 0.25)]
        alpha: f64,
        /// Apply the permutation in this file instead of sampling one
        #[arg(long)]
        perm: Option<PathBuf>,
        /// Apply the inverse of --perm
        #[arg(long, requires = "perm")]
        inverse: bool,
        /// Where to save the permutation used
        #[arg(long)]
        perm_out: Option<PathBuf>,
        /// Write plain (P2) instead of raw (P5)
        #[arg(long)]
        plain: bool,
    },
    /// Restore a directory of patch-permuted graymaps
    ImagePipeline {
        /// Directory of .pgm files (omit with --synthetic)
        #[arg(long, required_unless_present = "synthetic")]
        input: Option<PathBuf>,
        /// Clean images, for the error report
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Generate a rank-4 stack of 64 images, 16 patch-permuted
        #[arg(long)]
        synthetic: bool,
        #[arg(long, default_value_t = 4)]
        r: usize,
        #[arg(long, default_value = "8x8")]
        patch: PatchSpec,
        #[command(flatten)]
        stage2: Stage2Args,
    },
}

fn load_grid(cli: &Cli) -> Result<ExperimentGrid> {
    let mut grid = match &cli.config {
        Some(path) => ExperimentGrid::load(path)
            .with_context(|| format!("reading config {}", path.display()))?,
        None => ExperimentGrid::default(),
    };
    if let Some(seed) = cli.seed {
        grid.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        grid.outputs = out.clone();
    }
    Ok(grid)
}

fn apply_stage2(grid: &mut ExperimentGrid, args: &Stage2Args) {
    grid.stage2_method = args.method;
    if args.lambda.is_some() {
        grid.stage2.lambda = args.lambda;
    }
    if let Some(k) = args.restarts {
        grid.stage2.restarts = k;
    }
    if let Some(t) = args.threshold {
        grid.stage2.threshold = t;
    }
    grid.stage2.seed = grid.master_seed;
}

fn out_dir(cli: &Cli, default: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn rank_for(input: &PipelineInput, r: Option<usize>) -> Result<usize> {
    match r.or(input.rank_hint()) {
        Some(r) => Ok(r),
        None => bail!("--r is required when the input carries no ground truth"),
    }
}

fn settings(grid: &ExperimentGrid, r: usize) -> PipelineSettings {
    PipelineSettings {
        r,
        stage1_method: grid.stage1_method,
        stage2_method: grid.stage2_method,
        dpcp: grid.dpcp.clone(),
        restore: grid.stage2.clone(),
    }
}

fn parse_snr(s: &str) -> Result<Snr> {
    if s.eq_ignore_ascii_case("noiseless") {
        return Ok(Snr::Noiseless);
    }
    Ok(Snr::Db(
        s.parse().with_context(|| format!("bad --snr-db {s:?}"))?,
    ))
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Synth {
            m,
            n,
            r,
            outlier_ratio,
            alpha,
            snr_db,
            outlier_model,
        } => {
            let model = match outlier_model.as_str() {
                "permuted" => OutlierModel::Permuted,
                "sphere" => OutlierModel::Sphere,
                other => bail!("unknown outlier model {other:?}"),
            };
            let spec = CorruptionSpec {
                n_total: *n,
                n_out: (outlier_ratio * *n as f64).round() as usize,
                alpha: *alpha,
                snr: parse_snr(snr_db)?,
                seed: cli.seed.unwrap_or(0),
                outlier_model: model,
            };
            let bundle = generate(*m, *r, &spec)?;
            let dir = out_dir(cli, "bundle");
            write_bundle(&dir, &bundle, &spec)?;
            println!("wrote bundle {}", dir.display());
        }
        Command::Stage1 { input, r, method } => {
            let mut grid = load_grid(cli)?;
            if let Some(method) = method {
                grid.stage1_method = *method;
            }
            let data = PipelineInput::load(input)
                .with_context(|| format!("reading {}", input.display()))?;
            let r = rank_for(&data, *r)?;
            let est = run_stage1(data.observed(), &settings(&grid, r))?;
            let dir = out_dir(cli, "stage1");
            fs::create_dir_all(&dir)?;
            write_matrix(&dir.join("s_hat.txt"), est.s_hat.matrix())?;
            let theta = match data.truth() {
                Some(t) => Some(max_angle_degrees(&est.s_hat, &t.s_star)?),
                None => None,
            };
            let report = serde_json::json!({
                "method": est.method,
                "r": r,
                "iterations": est.iterations_used,
                "objective": est.final_objective,
                "theta_max_deg": theta,
            });
            write_json(&dir.join("stage1.json"), &report)?;
            println!("{}", serde_json::to_string(&report)?);
        }
        Command::Stage2 {
            input,
            basis,
            stage2,
        } => {
            let mut grid = load_grid(cli)?;
            apply_stage2(&mut grid, stage2);
            let data = PipelineInput::load(input)
                .with_context(|| format!("reading {}", input.display()))?;
            let b = read_matrix(basis).with_context(|| format!("reading {}", basis.display()))?;
            let s = SubspaceBasis::orthonormalize(b.as_matrix())?;
            let (x_hat, report) =
                restore_matrix(data.observed(), &s, grid.stage2_method, &grid.stage2)?;
            let dir = out_dir(cli, "stage2");
            fs::create_dir_all(&dir)?;
            write_matrix(&dir.join("x_hat.txt"), x_hat.as_matrix())?;
            write_json(&dir.join("outliers.json"), &report)?;
            if let Some(t) = data.truth() {
                let err = relative_error(&x_hat, &t.x_star)?;
                write_json(
                    &dir.join("metrics.json"),
                    &serde_json::json!({ "rel_error": err }),
                )?;
                println!("rel_error {err}");
            }
            println!("{} columns restored", report.outlier_indices.len());
        }
        Command::Pipeline {
            input,
            r,
            stage1_method,
            stage2,
        } => {
            let mut grid = load_grid(cli)?;
            apply_stage2(&mut grid, stage2);
            if let Some(m) = stage1_method {
                grid.stage1_method = *m;
            }
            let data = PipelineInput::load(input)
                .with_context(|| format!("reading {}", input.display()))?;
            let r = rank_for(&data, *r)?;
            let out = run_pipeline(&data, &settings(&grid, r))?;
            let dir = out_dir(cli, "pipeline");
            write_pipeline_outputs(&dir, &out)?;
            if let Some(m) = &out.report.metrics {
                println!(
                    "theta_max_deg {} rel_error {} rel_error_oracle {}",
                    m.theta_max_deg, m.rel_error, m.rel_error_oracle
                );
            }
            println!("wrote {}", dir.display());
        }
        Command::PhaseTransition => {
            let grid = load_grid(cli)?;
            let report = run_phase_transition(&grid, cli.jobs)?;
            print_written(&report.write(&grid.outputs)?);
        }
        Command::Stage2Grid => {
            let grid = load_grid(cli)?;
            let report = run_stage2_grid(&grid, cli.jobs)?;
            print_written(&report.write(&grid.outputs)?);
        }
        Command::TheoryCheck => {
            let mut config: TheorySuiteConfig = match &cli.config {
                Some(path) => serde_json::from_str(&fs::read_to_string(path)?)
                    .with_context(|| format!("reading config {}", path.display()))?,
                None => TheorySuiteConfig::default(),
            };
            if let Some(seed) = cli.seed {
                config.master_seed = seed;
            }
            let report = run_theory_suite(&config);
            let path = match &cli.out {
                Some(p) if p.extension().is_some_and(|e| e == "json") => p.clone(),
                Some(dir) => dir.join("theory_report.json"),
                None => PathBuf::from("theory_report.json"),
            };
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            write_json(&path, &report)?;
            for c in &report.checks {
                println!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
            }
            println!(
                "{}/{} checks, wrote {}",
                report.checks_passed,
                report.checks_total,
                path.display()
            );
            return Ok(report.pass);
        }
        Command::PatchPermute {
            input,
            patch,
            alpha,
            perm,
            inverse,
            perm_out,
            plain,
        } => {
            let img = Pgm::read(input)?;
            let (out, used) = match perm {
                Some(path) => {
                    let perms = parse_permutations(&fs::read_to_string(path)?)
                        .with_context(|| format!("reading {}", path.display()))?;
                    let [p] = &perms[..] else {
                        bail!("{} must hold exactly one permutation", path.display());
                    };
                    let p = if *inverse { p.inverse() } else { p.clone() };
                    (apply_patch_permutation(&img, *patch, &p)?, p)
                }
                None => patch_permute(&img, *patch, *alpha, cli.seed.unwrap_or(0))?,
            };
            let path = cli
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("permuted.pgm"));
            out.write(
                &path,
                if *plain {
                    PgmFormat::Plain
                } else {
                    PgmFormat::Raw
                },
            )?;
            if let Some(p) = perm_out {
                fs::write(p, format_permutations(std::slice::from_ref(&used)))?;
            }
            println!("wrote {}", path.display());
        }
        Command::ImagePipeline {
            input,
            truth,
            synthetic,
            r,
            patch,
            stage2,
        } => {
            let mut grid = load_grid(cli)?;
            apply_stage2(&mut grid, stage2);
            let dir = out_dir(cli, "images");
            let (stack, clean) = if *synthetic {
                let cfg = SyntheticStack {
                    patch: *patch,
                    seed: grid.master_seed,
                    ..SyntheticStack::default()
                };
                let (clean, corrupted, _) = synthetic_stack(&cfg)?;
                clean.write_dir(&dir.join("truth"))?;
                corrupted.write_dir(&dir.join("corrupted"))?;
                (corrupted, Some(clean))
            } else {
                let input = input.as_deref().expect("required unless synthetic");
                let stack = ImageStack::read_dir(input)
                    .with_context(|| format!("reading {}", input.display()))?;
                let clean = truth.as_deref().map(read_stack).transpose()?;
                (stack, clean)
            };
            let settings = ImagePipelineSettings {
                r: *r,
                patch: *patch,
                stage2_method: grid.stage2_method,
                dpcp: grid.dpcp.clone(),
                restore: grid.stage2.clone(),
            };
            let (restored, report) = image_pipeline(&stack, clean.as_ref(), &settings)?;
            restored.write_dir(&dir.join("restored"))?;
            write_json(&dir.join("report.json"), &report)?;
            if let Some(e) = report.rel_error {
                println!("rel_error {e}");
            }
            println!("wrote {}", dir.display());
        }
    }
    Ok(true)
}

fn read_stack(path: &Path) -> Result<ImageStack> {
    ImageStack::read_dir(path).with_context(|| format!("reading {}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
