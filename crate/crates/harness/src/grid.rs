//! Grid sweeps over rank, outlier ratio and permutation sparsity.
//!
//! Every cell draws its instance from a generator derived from the master
//! seed and the cell coordinates, so results do not depend on the number of
//! workers. Rows are emitted in canonical order (rank, ratio, alpha, trial).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use upca_core::datagen::generate;
use upca_core::numerics::max_angle_degrees;
use upca_core::seed::{cell_rng, CellCoords};
use upca_core::stage1::estimate;
use upca_core::stage2::{relative_error, restore_matrix};
use upca_core::{CorruptionSpec, DenseMatrix, Error, GroundTruthBundle, Result};

use crate::config::ExperimentGrid;
use crate::pgm::{Pgm, PgmFormat};

const PHASE_STREAM: u32 = 1;
const STAGE2_STREAM: u32 = 2;
/// Side of one grid cell in the heatmap, in pixels.
const HEATMAP_CELL: usize = 16;

pub const PHASE_HEADER: &str = "r,ratio,alpha,trial,theta_max_deg,wall_ms,status,realized_alpha";
pub const STAGE2_HEADER: &str =
    "r,ratio,alpha,trial,theta_max_deg,wall_ms,status,realized_alpha,rel_error,rel_error_oracle";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridKind {
    PhaseTransition,
    Stage2,
}

impl GridKind {
    pub fn file_stem(self) -> &'static str {
        match self {
            GridKind::PhaseTransition => "phase_transition",
            GridKind::Stage2 => "stage2_grid",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub coords: CellCoords,
    pub r: usize,
    pub ratio: f64,
    pub alpha: f64,
    pub trial: u32,
    pub theta_max_deg: Option<f64>,
    pub wall_ms: u64,
    /// `ok`, or `error: <message>`.
    pub status: String,
    pub realized_alpha: Option<f64>,
    pub rel_error: Option<f64>,
    pub rel_error_oracle: Option<f64>,
}

impl CellResult {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Clone, Debug)]
pub struct GridReport {
    pub kind: GridKind,
    pub grid: ExperimentGrid,
    pub cells: Vec<CellResult>,
}

fn cells_of(grid: &ExperimentGrid) -> Vec<CellCoords> {
    let mut out = Vec::with_capacity(grid.cell_count());
    for rank_idx in 0..grid.ranks.len() as u32 {
        for ratio_idx in 0..grid.outlier_ratios.len() as u32 {
            for alpha_idx in 0..grid.alphas.len() as u32 {
                for trial in 0..grid.trials {
                    out.push(CellCoords {
                        rank_idx,
                        ratio_idx,
                        alpha_idx,
                        trial,
                    });
                }
            }
        }
    }
    out
}

/// Instance and column shuffle of one cell. `order[k]` is the original
/// index of the column placed at position `k`.
pub fn cell_instance(
    grid: &ExperimentGrid,
    stream: u32,
    c: CellCoords,
) -> Result<(GroundTruthBundle, CorruptionSpec, Vec<usize>)> {
    let mut rng = cell_rng(grid.master_seed, stream, c);
    let ratio = grid.outlier_ratios[c.ratio_idx as usize];
    let spec = CorruptionSpec {
        n_total: grid.n,
        n_out: grid.n_out(ratio),
        alpha: grid.alphas[c.alpha_idx as usize],
        snr: grid.snr_db.0,
        seed: rng.random(),
        outlier_model: grid.outlier_model,
    };
    let mut order: Vec<usize> = (0..grid.n).collect();
    order.shuffle(&mut rng);
    let bundle = generate(grid.m, grid.ranks[c.rank_idx as usize], &spec)?;
    Ok((bundle, spec, order))
}

fn shuffle_columns(x: &DenseMatrix, order: &[usize]) -> Result<DenseMatrix> {
    let cols: Vec<_> = order.iter().map(|&j| x.column_vector(j)).collect();
    DenseMatrix::from_columns(&cols)
}

fn unshuffle_columns(x: &DenseMatrix, order: &[usize]) -> Result<DenseMatrix> {
    let mut out = x.as_matrix().clone();
    for (k, &j) in order.iter().enumerate() {
        out.set_column(j, &x.as_matrix().column(k));
    }
    DenseMatrix::from_matrix(out)
}

struct Measured {
    theta: f64,
    realized_alpha: f64,
    rel_error: Option<f64>,
    rel_error_oracle: Option<f64>,
}

fn measure(grid: &ExperimentGrid, kind: GridKind, c: CellCoords) -> Result<Measured> {
    let stream = match kind {
        GridKind::PhaseTransition => PHASE_STREAM,
        GridKind::Stage2 => STAGE2_STREAM,
    };
    let (bundle, spec, order) = cell_instance(grid, stream, c)?;
    let r = grid.ranks[c.rank_idx as usize];
    let x = shuffle_columns(&bundle.x_tilde, &order)?;
    let est = estimate(&x, r, grid.stage1_method, &grid.dpcp)?;
    let theta = max_angle_degrees(&est.s_hat, &bundle.s_star)?;
    let realized_alpha = bundle.realized_alpha_mean(spec.n_out);
    if kind == GridKind::PhaseTransition {
        return Ok(Measured {
            theta,
            realized_alpha,
            rel_error: None,
            rel_error_oracle: None,
        });
    }
    let restore = |s| -> Result<f64> {
        let (x_hat, _) = restore_matrix(&x, s, grid.stage2_method, &grid.stage2)?;
        relative_error(&unshuffle_columns(&x_hat, &order)?, &bundle.x_star)
    };
    Ok(Measured {
        theta,
        realized_alpha,
        rel_error: Some(restore(&est.s_hat)?),
        rel_error_oracle: Some(restore(&bundle.s_star)?),
    })
}

fn status_text(err: &Error) -> String {
    let msg: String = err
        .to_string()
        .chars()
        .map(|ch| {
            if matches!(ch, ',' | '\n' | '\r' | '"') {
                ' '
            } else {
                ch
            }
        })
        .collect();
    format!("error: {msg}")
}

fn run_cell(grid: &ExperimentGrid, kind: GridKind, c: CellCoords) -> CellResult {
    let start = Instant::now();
    let outcome = measure(grid, kind, c);
    let wall_ms = if grid.record_timing {
        start.elapsed().as_millis() as u64
    } else {
        0
    };
    let mut cell = CellResult {
        coords: c,
        r: grid.ranks[c.rank_idx as usize],
        ratio: grid.outlier_ratios[c.ratio_idx as usize],
        alpha: grid.alphas[c.alpha_idx as usize],
        trial: c.trial,
        theta_max_deg: None,
        wall_ms,
        status: "ok".into(),
        realized_alpha: None,
        rel_error: None,
        rel_error_oracle: None,
    };
    match outcome {
        Ok(m) => {
            cell.theta_max_deg = Some(m.theta);
            cell.realized_alpha = Some(m.realized_alpha);
            cell.rel_error = m.rel_error;
            cell.rel_error_oracle = m.rel_error_oracle;
        }
        Err(e) => cell.status = status_text(&e),
    }
    cell
}

fn run(grid: &ExperimentGrid, kind: GridKind, jobs: Option<usize>) -> Result<GridReport> {
    grid.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let coords = cells_of(grid);
    let cells = pool.install(|| {
        coords
            .par_iter()
            .map(|&c| run_cell(grid, kind, c))
            .collect()
    });
    Ok(GridReport {
        kind,
        grid: grid.clone(),
        cells,
    })
}

/// θ_max between the stage-I estimate and `S*` for every cell.
pub fn run_phase_transition(grid: &ExperimentGrid, jobs: Option<usize>) -> Result<GridReport> {
    run(grid, GridKind::PhaseTransition, jobs)
}

/// Full pipeline per cell, with the estimated subspace and with `S*`.
pub fn run_stage2_grid(grid: &ExperimentGrid, jobs: Option<usize>) -> Result<GridReport> {
    run(grid, GridKind::Stage2, jobs)
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let vals: Vec<f64> = values.flatten().collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Mean over trials of one `(r, ratio, alpha)` triple.
#[derive(Clone, Debug, PartialEq)]
pub struct CellMean {
    pub r: usize,
    pub ratio: f64,
    pub alpha: f64,
    pub trials_ok: usize,
    pub trials_failed: usize,
    pub theta_max_deg: Option<f64>,
    pub wall_ms: Option<f64>,
    pub realized_alpha: Option<f64>,
    pub rel_error: Option<f64>,
    pub rel_error_oracle: Option<f64>,
}

impl GridReport {
    pub fn means(&self) -> Vec<CellMean> {
        self.cells
            .chunks(self.grid.trials as usize)
            .map(|trials| {
                let ok: Vec<&CellResult> = trials.iter().filter(|c| c.is_ok()).collect();
                CellMean {
                    r: trials[0].r,
                    ratio: trials[0].ratio,
                    alpha: trials[0].alpha,
                    trials_ok: ok.len(),
                    trials_failed: trials.len() - ok.len(),
                    theta_max_deg: mean(ok.iter().map(|c| c.theta_max_deg)),
                    wall_ms: mean(ok.iter().map(|c| Some(c.wall_ms as f64))),
                    realized_alpha: mean(ok.iter().map(|c| c.realized_alpha)),
                    rel_error: mean(ok.iter().map(|c| c.rel_error)),
                    rel_error_oracle: mean(ok.iter().map(|c| c.rel_error_oracle)),
                }
            })
            .collect()
    }

    pub fn csv(&self) -> String {
        let stage2 = self.kind == GridKind::Stage2;
        let mut out = String::from(if stage2 { STAGE2_HEADER } else { PHASE_HEADER });
        out.push('\n');
        for c in &self.cells {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{}",
                c.r,
                c.ratio,
                c.alpha,
                c.trial,
                opt(c.theta_max_deg),
                c.wall_ms,
                c.status,
                opt(c.realized_alpha)
            );
            if stage2 {
                let _ = write!(out, ",{},{}", opt(c.rel_error), opt(c.rel_error_oracle));
            }
            out.push('\n');
        }
        out
    }

    pub fn mean_csv(&self) -> String {
        let stage2 = self.kind == GridKind::Stage2;
        let mut out = String::from(
            "r,ratio,alpha,trials_ok,trials_failed,theta_max_deg,wall_ms,realized_alpha",
        );
        if stage2 {
            out.push_str(",rel_error,rel_error_oracle");
        }
        out.push('\n');
        for m in self.means() {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{}",
                m.r,
                m.ratio,
                m.alpha,
                m.trials_ok,
                m.trials_failed,
                opt(m.theta_max_deg),
                opt(m.wall_ms),
                opt(m.realized_alpha)
            );
            if stage2 {
                let _ = write!(out, ",{},{}", opt(m.rel_error), opt(m.rel_error_oracle));
            }
            out.push('\n');
        }
        out
    }

    /// Mean θ_max for one alpha as a graymap: outlier ratio increases to
    /// the right, rank increases upward, 0° is white and 90° black on a
    /// linear scale. Cells without a successful trial are black.
    pub fn heatmap(&self, alpha_idx: usize) -> Result<Pgm> {
        let (nr, np) = (self.grid.ranks.len(), self.grid.outlier_ratios.len());
        let means = self.means();
        let (w, h) = (np * HEATMAP_CELL, nr * HEATMAP_CELL);
        let mut pixels = vec![0u8; w * h];
        let na = self.grid.alphas.len();
        for ri in 0..nr {
            for pi in 0..np {
                let m = &means[(ri * np + pi) * na + alpha_idx];
                let shade = m
                    .theta_max_deg
                    .map(|t| (255.0 * (1.0 - t.clamp(0.0, 90.0) / 90.0)).round() as u8)
                    .unwrap_or(0);
                let top = (nr - 1 - ri) * HEATMAP_CELL;
                for y in top..top + HEATMAP_CELL {
                    let row = &mut pixels[y * w..(y + 1) * w];
                    row[pi * HEATMAP_CELL..(pi + 1) * HEATMAP_CELL].fill(shade);
                }
            }
        }
        Pgm::new(w, h, pixels)
    }

    /// Writes the per-trial CSV, the mean CSV and, when enabled, one heatmap
    /// per alpha into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let stem = self.kind.file_stem();
        let mut written = Vec::new();
        let csv = dir.join(format!("{stem}.csv"));
        fs::write(&csv, self.csv())?;
        written.push(csv);
        let means = dir.join(format!("{stem}_mean.csv"));
        fs::write(&means, self.mean_csv())?;
        written.push(means);
        if self.grid.heatmap {
            for (ai, alpha) in self.grid.alphas.iter().enumerate() {
                let path = dir.join(format!("{stem}_alpha{alpha}.pgm"));
                self.heatmap(ai)?.write(&path, PgmFormat::Plain)?;
                written.push(path);
            }
        }
        Ok(written)
    }
}
