//! Image stacks as data matrices: each graymap becomes one column.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;
use upca_core::seed::rng_from_seed;
use upca_core::stage1::project_reduce;
use upca_core::stage2::{relative_error, restore_matrix};
use upca_core::{
    DenseMatrix, DpcpConfig, Error, OutlierReport, RestorationMethod, RestoreOptions, Result,
    Stage1Method,
};

use crate::patches::{patch_permute, PatchSpec};
use crate::pgm::{Pgm, PgmFormat};

#[derive(Clone, Debug, PartialEq)]
pub struct ImageStack {
    pub width: usize,
    pub height: usize,
    pub names: Vec<String>,
    pub images: Vec<Pgm>,
}

impl ImageStack {
    pub fn new(names: Vec<String>, images: Vec<Pgm>) -> Result<Self> {
        let first = images
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty image stack".into()))?;
        let (width, height) = (first.width, first.height);
        if let Some(i) = images
            .iter()
            .position(|p| (p.width, p.height) != (width, height))
        {
            return Err(Error::DimensionMismatch(format!(
                "{} is {}x{}, expected {width}x{height}",
                names[i], images[i].width, images[i].height
            )));
        }
        Ok(Self {
            width,
            height,
            names,
            images,
        })
    }

    /// Every `*.pgm` in `dir`, sorted by file name.
    pub fn read_dir(dir: &Path) -> Result<Self> {
        let mut paths: Vec<_> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
            .collect();
        paths.sort();
        let names = paths
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        let images = paths.iter().map(|p| Pgm::read(p)).collect::<Result<_>>()?;
        Self::new(names, images)
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, img) in self.names.iter().zip(&self.images) {
            img.write(&dir.join(name), PgmFormat::Raw)?;
        }
        Ok(())
    }

    /// Pixels × images, values in `[0, 255]`.
    pub fn to_matrix(&self) -> Result<DenseMatrix> {
        let m = self.width * self.height;
        DenseMatrix::from_matrix(DMatrix::from_fn(m, self.images.len(), |i, j| {
            self.images[j].pixels[i] as f64
        }))
    }

    /// Rounds and clamps every entry to `[0, 255]`.
    pub fn with_matrix(&self, x: &DenseMatrix) -> Result<Self> {
        let images = (0..x.cols())
            .map(|j| {
                let px = x
                    .as_matrix()
                    .column(j)
                    .iter()
                    .map(|v| v.round().clamp(0.0, 255.0) as u8)
                    .collect();
                Pgm::new(self.width, self.height, px)
            })
            .collect::<Result<_>>()?;
        Self::new(self.names.clone(), images)
    }
}

/// Rank-`rank` stack of `count` convex mixtures of `rank` random basis
/// images; the last `permuted` are patch-permuted with sparsity `alpha`.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticStack {
    pub width: usize,
    pub height: usize,
    pub rank: usize,
    pub count: usize,
    pub permuted: usize,
    pub patch: PatchSpec,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for SyntheticStack {
    fn default() -> Self {
        Self {
            width: 32,
            height: 32,
            rank: 4,
            count: 64,
            permuted: 16,
            patch: PatchSpec {
                width: 8,
                height: 8,
            },
            alpha: 0.25,
            seed: 0,
        }
    }
}

/// Clean stack, corrupted stack and the indices that were permuted.
pub fn synthetic_stack(cfg: &SyntheticStack) -> Result<(ImageStack, ImageStack, Vec<usize>)> {
    let SyntheticStack {
        width,
        height,
        rank,
        count,
        permuted,
        patch: spec,
        alpha,
        seed,
    } = *cfg;
    spec.check(width, height)?;
    if rank == 0 || permuted > count {
        return Err(Error::InvalidArgument(format!(
            "rank {rank}, {permuted} permuted of {count} images"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let m = width * height;
    let basis = DMatrix::<f64>::from_fn(m, rank, |_, _| rng.random::<f64>());
    let mut clean = Vec::with_capacity(count);
    for _ in 0..count {
        let weights: Vec<f64> = (0..rank).map(|_| rng.random::<f64>() + 0.05).collect();
        let total: f64 = weights.iter().sum();
        let px = (0..m)
            .map(|i| {
                let v: f64 = (0..rank).map(|k| weights[k] * basis[(i, k)]).sum();
                (255.0 * v / total).round() as u8
            })
            .collect();
        clean.push(Pgm::new(width, height, px)?);
    }
    let names: Vec<String> = (0..count).map(|j| format!("img{j:03}.pgm")).collect();
    let mut corrupted = clean.clone();
    let moved: Vec<usize> = (count - permuted..count).collect();
    for &j in &moved {
        corrupted[j] = patch_permute(&clean[j], spec, alpha, rng.random())?.0;
    }
    Ok((
        ImageStack::new(names.clone(), clean)?,
        ImageStack::new(names, corrupted)?,
        moved,
    ))
}

pub struct ImagePipelineSettings {
    pub r: usize,
    pub patch: PatchSpec,
    pub stage2_method: RestorationMethod,
    pub dpcp: DpcpConfig,
    pub restore: RestoreOptions,
}

#[derive(Clone, Debug, Serialize)]
pub struct ImagePipelineReport {
    pub images: usize,
    pub pixels: usize,
    pub r: usize,
    pub stage2_method: RestorationMethod,
    pub outliers: OutlierReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_error: Option<f64>,
}

/// Subspace from `project_reduce` with DPCP-IRLS, then column restoration;
/// restored images are rounded and clamped to `[0, 255]`.
pub fn image_pipeline(
    stack: &ImageStack,
    truth: Option<&ImageStack>,
    settings: &ImagePipelineSettings,
) -> Result<(ImageStack, ImagePipelineReport)> {
    settings.patch.check(stack.width, stack.height)?;
    let x = stack.to_matrix()?;
    let est = project_reduce(&x, Stage1Method::DpcpIrls, settings.r, &settings.dpcp)?;
    let (x_hat, outliers) =
        restore_matrix(&x, &est.s_hat, settings.stage2_method, &settings.restore)?;
    let restored = stack.with_matrix(&x_hat)?;
    let rel_error = match truth {
        Some(t) => {
            if (t.width, t.height, t.images.len())
                != (stack.width, stack.height, stack.images.len())
            {
                return Err(Error::DimensionMismatch(
                    "ground-truth stack differs from the input stack".into(),
                ));
            }
            Some(relative_error(&restored.to_matrix()?, &t.to_matrix()?)?)
        }
        None => None,
    };
    let report = ImagePipelineReport {
        images: stack.images.len(),
        pixels: x.rows(),
        r: settings.r,
        stage2_method: settings.stage2_method,
        outliers,
        rel_error,
    };
    Ok((restored, report))
}
