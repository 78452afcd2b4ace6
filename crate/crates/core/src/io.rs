//! Plain-text matrices and on-disk ground-truth bundles.
//!
//! A matrix file starts with a `rows cols` line followed by one line per row
//! of space-separated entries written with 17 significant digits, which is
//! enough to round-trip any `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::datagen::{CorruptionSpec, GroundTruthBundle, Permutation};
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, SubspaceBasis};

pub const X_STAR_FILE: &str = "x_star.txt";
pub const X_TILDE_FILE: &str = "x_tilde.txt";
pub const PERMS_FILE: &str = "perms.csv";
pub const META_FILE: &str = "meta.json";

/// How the noise level in `meta.json` is to be read.
pub const SNR_DEFINITION: &str =
    "matrix-level: 20*log10(||X*||_F / ||noise||_F), isotropic Gaussian noise added after permuting";

pub fn format_matrix(x: &DMatrix<f64>) -> String {
    let mut out = String::with_capacity(x.len() * 24 + 16);
    let _ = writeln!(out, "{} {}", x.nrows(), x.ncols());
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{:.16e}", x[(i, j)]);
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<DenseMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let parse_err = |line: usize, msg: String| Error::Parse {
        line: line + 1,
        msg,
    };
    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(0, "empty input".into()))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let [rows, cols] = dims[..] else {
        return Err(parse_err(
            hline,
            format!("expected `rows cols`, found {header:?}"),
        ));
    };
    let parse_dim = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| parse_err(hline, format!("bad dimension {s:?}")))
    };
    let (rows, cols) = (parse_dim(rows)?, parse_dim(cols)?);
    let mut entries = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (lineno, line) in lines {
        if seen == rows {
            return Err(parse_err(lineno, format!("more than {rows} rows")));
        }
        let before = entries.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad number {tok:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(lineno, format!("non-finite entry {tok:?}")));
            }
            entries.push(v);
        }
        if entries.len() - before != cols {
            return Err(parse_err(
                lineno,
                format!("expected {cols} entries, found {}", entries.len() - before),
            ));
        }
        seen += 1;
    }
    if seen != rows {
        return Err(parse_err(
            text.lines().count().saturating_sub(1),
            format!("expected {rows} rows, found {seen}"),
        ));
    }
    DenseMatrix::from_row_slice(rows, cols, &entries)
}

pub fn write_matrix(path: &Path, x: &DMatrix<f64>) -> Result<()> {
    fs::write(path, format_matrix(x))?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    parse_matrix(&fs::read_to_string(path)?)
}

/// Contents of `meta.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub spec: CorruptionSpec,
    pub inlier_mask: Vec<bool>,
    pub realized_alpha: Vec<f64>,
    pub realized_alpha_mean: f64,
    pub noise_norm: f64,
    pub snr_definition: String,
}

impl BundleMeta {
    pub fn new(bundle: &GroundTruthBundle, spec: &CorruptionSpec) -> Self {
        Self {
            m: bundle.x_star.rows(),
            n: bundle.x_star.cols(),
            r: bundle.s_star.dim(),
            spec: spec.clone(),
            inlier_mask: bundle.inlier_mask.clone(),
            realized_alpha: bundle.realized_alpha.clone(),
            realized_alpha_mean: bundle.realized_alpha_mean(spec.n_out),
            noise_norm: bundle.noise_norm,
            snr_definition: SNR_DEFINITION.to_string(),
        }
    }
}

/// `column_index,image` rows, both 1-based, image joined by `;`.
pub fn format_permutations(perms: &[Permutation]) -> String {
    let mut out = String::from("column_index,image\n");
    for (j, p) in perms.iter().enumerate() {
        let image: Vec<String> = p.image().iter().map(|i| (i + 1).to_string()).collect();
        let _ = writeln!(out, "{},{}", j + 1, image.join(";"));
    }
    out
}

pub fn parse_permutations(text: &str) -> Result<Vec<Permutation>> {
    let mut perms = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let err = |msg: String| Error::Parse {
            line: lineno + 1,
            msg,
        };
        if lineno == 0 {
            if line.trim() != "column_index,image" {
                return Err(err(format!("unexpected header {line:?}")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (col, image) = line
            .split_once(',')
            .ok_or_else(|| err("missing comma".into()))?;
        let col: usize = col
            .trim()
            .parse()
            .map_err(|_| err(format!("bad column {col:?}")))?;
        if col != perms.len() + 1 {
            return Err(err(format!(
                "expected column {}, found {col}",
                perms.len() + 1
            )));
        }
        let image = image
            .split(';')
            .map(|t| match t.trim().parse::<usize>() {
                Ok(i) if i >= 1 => Ok(i - 1),
                _ => Err(err(format!("bad index {t:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        perms.push(Permutation::new(image).map_err(|e| err(e.to_string()))?);
    }
    Ok(perms)
}

pub fn write_bundle(dir: &Path, bundle: &GroundTruthBundle, spec: &CorruptionSpec) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_matrix(&dir.join(X_STAR_FILE), bundle.x_star.as_matrix())?;
    write_matrix(&dir.join(X_TILDE_FILE), bundle.x_tilde.as_matrix())?;
    fs::write(
        dir.join(PERMS_FILE),
        format_permutations(&bundle.permutations),
    )?;
    let meta = serde_json::to_string_pretty(&BundleMeta::new(bundle, spec))?;
    fs::write(dir.join(META_FILE), meta + "\n")?;
    Ok(())
}

/// Reads a bundle back; `S*` is recomputed as the principal subspace of
/// `X*` with the recorded rank.
pub fn read_bundle(dir: &Path) -> Result<(GroundTruthBundle, BundleMeta)> {
    let x_star = read_matrix(&dir.join(X_STAR_FILE))?;
    let x_tilde = read_matrix(&dir.join(X_TILDE_FILE))?;
    let permutations = parse_permutations(&fs::read_to_string(dir.join(PERMS_FILE))?)?;
    let meta: BundleMeta = serde_json::from_str(&fs::read_to_string(dir.join(META_FILE))?)?;
    if x_star.shape() != x_tilde.shape()
        || permutations.len() != x_star.cols()
        || permutations.iter().any(|p| p.len() != x_star.rows())
        || meta.m != x_star.rows()
        || meta.n != x_star.cols()
    {
        return Err(Error::dims(format!(
            "inconsistent bundle in {}",
            dir.display()
        )));
    }
    let s_star = SubspaceBasis::principal(&x_star, meta.r)?;
    let bundle = GroundTruthBundle {
        x_star,
        s_star,
        permutations,
        x_tilde,
        inlier_mask: meta.inlier_mask.clone(),
        realized_alpha: meta.realized_alpha.clone(),
        noise_norm: meta.noise_norm,
    };
    Ok((bundle, meta))
}
