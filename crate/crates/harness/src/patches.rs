//! Patch permutations: an image is cut into equal tiles and the tiles are
//! moved as whole super-coordinates.

use upca_core::datagen::sample_sparse_permutation;
use upca_core::{Error, Permutation, Result};

use crate::pgm::Pgm;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchSpec {
    pub width: usize,
    pub height: usize,
}

impl PatchSpec {
    pub fn check(&self, img_width: usize, img_height: usize) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument(
                "patch sides must be positive".into(),
            ));
        }
        if !img_width.is_multiple_of(self.width) || !img_height.is_multiple_of(self.height) {
            return Err(Error::InvalidArgument(format!(
                "{img_width}x{img_height} image is not divisible into {}x{} patches",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn count(&self, img_width: usize, img_height: usize) -> usize {
        (img_width / self.width) * (img_height / self.height)
    }
}

impl std::str::FromStr for PatchSpec {
    type Err = Error;

    /// `WxH`, or a single number for square patches.
    fn from_str(s: &str) -> Result<Self> {
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("bad patch size {s:?}")))
        };
        let (w, h) = match s.split_once(['x', 'X']) {
            Some((w, h)) => (parse(w)?, parse(h)?),
            None => {
                let side = parse(s)?;
                (side, side)
            }
        };
        Ok(Self {
            width: w,
            height: h,
        })
    }
}

/// Pixel indices (row-major) of every patch, patches in row-major order.
pub fn patch_pixels(
    img_width: usize,
    img_height: usize,
    spec: PatchSpec,
) -> Result<Vec<Vec<usize>>> {
    spec.check(img_width, img_height)?;
    let across = img_width / spec.width;
    let mut out = Vec::with_capacity(spec.count(img_width, img_height));
    for p in 0..spec.count(img_width, img_height) {
        let (py, px) = (p / across, p % across);
        let mut pixels = Vec::with_capacity(spec.width * spec.height);
        for dy in 0..spec.height {
            let y = py * spec.height + dy;
            for dx in 0..spec.width {
                pixels.push(y * img_width + px * spec.width + dx);
            }
        }
        out.push(pixels);
    }
    Ok(out)
}

/// Moves patch `i` to position `perm.get(i)`.
pub fn permute_patches<T: Copy>(
    data: &[T],
    img_width: usize,
    img_height: usize,
    spec: PatchSpec,
    perm: &Permutation,
) -> Result<Vec<T>> {
    let patches = patch_pixels(img_width, img_height, spec)?;
    if perm.len() != patches.len() {
        return Err(Error::DimensionMismatch(format!(
            "permutation of {} patches for an image with {}",
            perm.len(),
            patches.len()
        )));
    }
    let mut out = data.to_vec();
    for (i, src) in patches.iter().enumerate() {
        for (&from, &to) in src.iter().zip(&patches[perm.get(i)]) {
            out[to] = data[from];
        }
    }
    Ok(out)
}

pub fn apply_patch_permutation(img: &Pgm, spec: PatchSpec, perm: &Permutation) -> Result<Pgm> {
    let pixels = permute_patches(&img.pixels, img.width, img.height, spec, perm)?;
    Pgm::new(img.width, img.height, pixels)
}

/// Applies an α-sparse permutation over the patch indices.
pub fn patch_permute(
    img: &Pgm,
    spec: PatchSpec,
    alpha: f64,
    seed: u64,
) -> Result<(Pgm, Permutation)> {
    spec.check(img.width, img.height)?;
    let count = spec.count(img.width, img.height);
    let perm = sample_sparse_permutation(count, alpha, seed)?.permutation;
    Ok((apply_patch_permutation(img, spec, &perm)?, perm))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parsing() {
        assert_eq!(
            "4x2".parse::<PatchSpec>().unwrap(),
            PatchSpec {
                width: 4,
                height: 2
            }
        );
        assert_eq!("3".parse::<PatchSpec>().unwrap().height, 3);
        assert!("4x".parse::<PatchSpec>().is_err());
    }

    #[test]
    fn swapping_two_patches() {
        // 4x2 image, 2x2 patches: left half and right half
        let img = Pgm::new(4, 2, vec![1, 2, 3, 4, 5, 6, 7, 8]).unwrap();
        let spec = PatchSpec {
            width: 2,
            height: 2,
        };
        let swap = Permutation::new(vec![1, 0]).unwrap();
        let out = apply_patch_permutation(&img, spec, &swap).unwrap();
        assert_eq!(out.pixels, vec![3, 4, 1, 2, 7, 8, 5, 6]);
    }

    #[test]
    fn non_divisible_is_rejected() {
        let img = Pgm::new(5, 4, vec![0; 20]).unwrap();
        let spec = PatchSpec {
            width: 2,
            height: 2,
        };
        assert!(patch_permute(&img, spec, 0.5, 1).is_err());
    }
}
