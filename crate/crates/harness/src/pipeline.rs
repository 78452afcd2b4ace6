//! End-to-end runs on a matrix file or a ground-truth bundle directory.

use std::fs;
use std::path::Path;

use serde::Serialize;
use upca_core::io::{read_bundle, read_matrix, write_matrix, BundleMeta};
use upca_core::numerics::max_angle_degrees;
use upca_core::stage1::estimate;
use upca_core::stage2::{relative_error, restore_matrix};
use upca_core::{
    DenseMatrix, DpcpConfig, GroundTruthBundle, OutlierReport, RestorationMethod, RestoreOptions,
    Result, Stage1Method, SubspaceBasis, SubspaceEstimate,
};

pub enum PipelineInput {
    Bundle(Box<GroundTruthBundle>, Box<BundleMeta>),
    Matrix(DenseMatrix),
}

impl PipelineInput {
    /// A directory is read as a bundle, anything else as a matrix file.
    pub fn load(path: &Path) -> Result<Self> {
        if path.is_dir() {
            let (bundle, meta) = read_bundle(path)?;
            Ok(PipelineInput::Bundle(Box::new(bundle), Box::new(meta)))
        } else {
            Ok(PipelineInput::Matrix(read_matrix(path)?))
        }
    }

    pub fn observed(&self) -> &DenseMatrix {
        match self {
            PipelineInput::Bundle(b, _) => &b.x_tilde,
            PipelineInput::Matrix(x) => x,
        }
    }

    pub fn truth(&self) -> Option<&GroundTruthBundle> {
        match self {
            PipelineInput::Bundle(b, _) => Some(b),
            PipelineInput::Matrix(_) => None,
        }
    }

    /// Rank recorded in the bundle, if any.
    pub fn rank_hint(&self) -> Option<usize> {
        match self {
            PipelineInput::Bundle(_, meta) => Some(meta.r),
            PipelineInput::Matrix(_) => None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Metrics {
    pub theta_max_deg: f64,
    pub rel_error: f64,
    pub rel_error_oracle: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineReport {
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub stage1_method: Stage1Method,
    pub stage2_method: RestorationMethod,
    pub stage1_iterations: usize,
    pub stage1_objective: f64,
    pub outliers: OutlierReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Metrics>,
}

pub struct PipelineSettings {
    pub r: usize,
    pub stage1_method: Stage1Method,
    pub stage2_method: RestorationMethod,
    pub dpcp: DpcpConfig,
    pub restore: RestoreOptions,
}

pub struct PipelineOutput {
    pub x_hat: DenseMatrix,
    pub estimate: SubspaceEstimate,
    pub report: PipelineReport,
}

pub fn run_stage1(x: &DenseMatrix, settings: &PipelineSettings) -> Result<SubspaceEstimate> {
    estimate(x, settings.r, settings.stage1_method, &settings.dpcp)
}

pub fn run_pipeline(input: &PipelineInput, settings: &PipelineSettings) -> Result<PipelineOutput> {
    let x = input.observed();
    let est = run_stage1(x, settings)?;
    let (x_hat, outliers) =
        restore_matrix(x, &est.s_hat, settings.stage2_method, &settings.restore)?;
    let metrics = match input.truth() {
        Some(truth) => Some(metrics(truth, &est.s_hat, &x_hat, settings)?),
        None => None,
    };
    let report = PipelineReport {
        m: x.rows(),
        n: x.cols(),
        r: settings.r,
        stage1_method: settings.stage1_method,
        stage2_method: settings.stage2_method,
        stage1_iterations: est.iterations_used,
        stage1_objective: est.final_objective,
        outliers,
        metrics,
    };
    Ok(PipelineOutput {
        x_hat,
        estimate: est,
        report,
    })
}

fn metrics(
    truth: &GroundTruthBundle,
    s_hat: &SubspaceBasis,
    x_hat: &DenseMatrix,
    settings: &PipelineSettings,
) -> Result<Metrics> {
    let (oracle, _) = restore_matrix(
        &truth.x_tilde,
        &truth.s_star,
        settings.stage2_method,
        &settings.restore,
    )?;
    Ok(Metrics {
        theta_max_deg: max_angle_degrees(s_hat, &truth.s_star)?,
        rel_error: relative_error(x_hat, &truth.x_star)?,
        rel_error_oracle: relative_error(&oracle, &truth.x_star)?,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// `x_hat.txt`, `s_hat.txt`, `outliers.json`, plus `metrics.json` when the
/// input carried ground truth.
pub fn write_pipeline_outputs(dir: &Path, out: &PipelineOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_matrix(&dir.join("x_hat.txt"), out.x_hat.as_matrix())?;
    write_matrix(&dir.join("s_hat.txt"), out.estimate.s_hat.matrix())?;
    write_json(&dir.join("outliers.json"), &out.report.outliers)?;
    match &out.report.metrics {
        Some(m) => write_json(&dir.join("metrics.json"), m)?,
        None => {
            let stale = dir.join("metrics.json");
            if stale.exists() {
                fs::remove_file(stale)?;
            }
        }
    }
    write_json(&dir.join("report.json"), &out.report)
}
