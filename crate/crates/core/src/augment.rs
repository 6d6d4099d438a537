//! Frequency decomposition and the four augmentation modes.
//!
//! `LF(x)` keeps the spectral bins selected by a [`FreqMask`] and transforms
//! back; `HF(x) = x - LF(x)`. The frequency-aware CutMix replaces a square
//! patch of `LF(x_i)` with the same patch of `LF(x_j)` while leaving all of
//! `HF(x_i)` in place:
//!
//! ```text
//! x' = M_cut * LF(x_i) + HF(x_i) + (1 - M_cut) * LF(x_j)
//! ```

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::numerics::{fft2, ifft2, Spectrum, Tensor2D};
use crate::{Error, Result, Rng};

pub const DEFAULT_ALPHA: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskLayout {
    /// Conjugate-symmetric low-pass around DC: along an axis of length `n`,
    /// signed frequency `f` is kept iff `2|f| < floor(alpha n)`, and every bin is
    /// kept when `floor(alpha n) = n`. Because the kept set is closed under
    /// `f -> -f`, `LF` of a real image is real and `LF` is an exact projection.
    #[default]
    Centered,
    /// Corner-anchored block `0 <= u < floor(alpha H)`, `0 <= v < floor(alpha W)`
    /// on the unshifted spectrum, real part taken after the inverse transform.
    /// This block is not conjugate-symmetric, so for `0 < alpha < 1` the
    /// operator is not idempotent and splits some conjugate pairs in half.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqMask {
    pub alpha: f64,
    #[serde(default)]
    pub layout: MaskLayout,
}

impl Default for FreqMask {
    fn default() -> Self {
        FreqMask { alpha: DEFAULT_ALPHA, layout: MaskLayout::Centered }
    }
}

/// Signed frequency of bin `k` on an axis of length `n`, in `[-n/2, n/2)`.
pub fn signed_frequency(k: usize, n: usize) -> i64 {
    let k = k as i64;
    let n = n as i64;
    if 2 * k >= n {
        k - n
    } else {
        k
    }
}

impl FreqMask {
    pub fn new(alpha: f64, layout: MaskLayout) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid("alpha must lie in [0, 1]"));
        }
        Ok(FreqMask { alpha, layout })
    }

    fn cutoff(&self, n: usize) -> usize {
        libm::floor(self.alpha * n as f64) as usize
    }

    fn keeps_axis(&self, k: usize, n: usize) -> bool {
        let cut = self.cutoff(n);
        match self.layout {
            MaskLayout::Literal => k < cut,
            MaskLayout::Centered => {
                cut >= n || 2 * signed_frequency(k, n).unsigned_abs() < cut as u64
            }
        }
    }

    /// Whether bin `(u, v)` of an `height x width` spectrum is low frequency.
    pub fn keeps(&self, u: usize, v: usize, height: usize, width: usize) -> bool {
        self.keeps_axis(u, height) && self.keeps_axis(v, width)
    }

    /// Smallest `|f|` guaranteed to lie outside the centered mask along an axis
    /// of length `n`; equals `n` when the mask keeps every frequency.
    pub fn first_excluded_frequency(&self, n: usize) -> usize {
        let cut = self.cutoff(n);
        if cut >= n {
            n
        } else {
            cut.div_ceil(2)
        }
    }

    pub fn apply(&self, spectrum: &mut Spectrum) {
        let (h, w) = (spectrum.height(), spectrum.width());
        let rows: Vec<bool> = (0..h).map(|u| self.keeps_axis(u, h)).collect();
        let cols: Vec<bool> = (0..w).map(|v| self.keeps_axis(v, w)).collect();
        for u in 0..h {
            for v in 0..w {
                if !(rows[u] && cols[v]) {
                    spectrum.set(u, v, crate::numerics::Complex::ZERO);
                }
            }
        }
    }
}

pub fn low_pass(x: &Tensor2D, mask: &FreqMask) -> Result<Tensor2D> {
    // a mask that keeps every bin is the identity; skip the roundtrip noise
    if mask.cutoff(x.height()) >= x.height() && mask.cutoff(x.width()) >= x.width() {
        return Ok(x.clone());
    }
    let mut s = fft2(x)?;
    mask.apply(&mut s);
    ifft2(&s)
}

pub fn high_pass(x: &Tensor2D, mask: &FreqMask) -> Result<Tensor2D> {
    let lf = low_pass(x, mask)?;
    x.zip_with(&lf, |a, b| a - b)
}

/// `(LF(x), HF(x))` from a single forward transform.
pub fn decompose(x: &Tensor2D, mask: &FreqMask) -> Result<(Tensor2D, Tensor2D)> {
    let lf = low_pass(x, mask)?;
    let hf = x.zip_with(&lf, |a, b| a - b)?;
    Ok((lf, hf))
}

/// Square replaced region; `M_cut` is 0 inside the patch and 1 elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutPatch {
    pub top: usize,
    pub left: usize,
    pub side: usize,
}

impl CutPatch {
    pub const EMPTY: CutPatch = CutPatch { top: 0, left: 0, side: 0 };

    pub fn full(height: usize, width: usize) -> Self {
        debug_assert_eq!(height, width, "full patch is only square for square images");
        CutPatch { top: 0, left: 0, side: height.min(width) }
    }

    /// Area fraction `lambda ~ U(0.1, 0.5)`, side `round(H sqrt(lambda))`,
    /// top-left corner uniform over positions that keep the patch inside.
    pub fn sample(height: usize, width: usize, rng: &mut Rng) -> Self {
        let lambda = rng.uniform_range(0.1, 0.5);
        let side = (libm::round(height as f64 * libm::sqrt(lambda)) as usize).min(height.min(width));
        let top = rng.below(height - side + 1);
        let left = rng.below(width - side + 1);
        CutPatch { top, left, side }
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        row >= self.top && row < self.top + self.side && col >= self.left && col < self.left + self.side
    }

    pub fn fits(&self, height: usize, width: usize) -> bool {
        self.top + self.side <= height && self.left + self.side <= width
    }

    /// `M_cut` as a grid of 0/1 values.
    pub fn keep_mask(&self, height: usize, width: usize) -> Result<Tensor2D> {
        Tensor2D::from_fn(height, width, |r, c| if self.contains(r, c) { 0.0 } else { 1.0 })
    }
}

fn check_patch(patch: &CutPatch, x: &Tensor2D) -> Result<()> {
    if patch.fits(x.height(), x.width()) {
        Ok(())
    } else {
        Err(Error::invalid("cut patch extends past the image"))
    }
}

/// Frequency-aware CutMix with precomputed decompositions of both images.
pub fn freq_cutmix_decomposed(
    x_i: &Tensor2D,
    lf_i: &Tensor2D,
    lf_j: &Tensor2D,
    patch: &CutPatch,
) -> Result<Tensor2D> {
    x_i.ensure_same_extent(lf_i)?;
    x_i.ensure_same_extent(lf_j)?;
    check_patch(patch, x_i)?;
    let w = x_i.width();
    let mut out = x_i.clone();
    // Outside the patch LF(x_i) + HF(x_i) is x_i itself; inside, LF(x_i) is swapped for LF(x_j).
    for r in patch.top..patch.top + patch.side {
        for c in patch.left..patch.left + patch.side {
            let k = r * w + c;
            out.values_mut()[k] = x_i.values()[k] - lf_i.values()[k] + lf_j.values()[k];
        }
    }
    Ok(out)
}

pub fn freq_cutmix_with_patch(
    x_i: &Tensor2D,
    x_j: &Tensor2D,
    mask: &FreqMask,
    patch: &CutPatch,
) -> Result<Tensor2D> {
    x_i.ensure_same_extent(x_j)?;
    let lf_i = low_pass(x_i, mask)?;
    let lf_j = low_pass(x_j, mask)?;
    freq_cutmix_decomposed(x_i, &lf_i, &lf_j, patch)
}

pub fn freq_cutmix(x_i: &Tensor2D, x_j: &Tensor2D, mask: &FreqMask, rng: &mut Rng) -> Result<Tensor2D> {
    x_i.ensure_same_extent(x_j)?;
    let patch = CutPatch::sample(x_i.height(), x_i.width(), rng);
    freq_cutmix_with_patch(x_i, x_j, mask, &patch)
}

pub fn mixup_with_lambda(x_i: &Tensor2D, x_j: &Tensor2D, lambda: f64) -> Result<Tensor2D> {
    x_i.zip_with(x_j, |a, b| lambda * a + (1.0 - lambda) * b)
}

/// MixUp with `lambda ~ Beta(1, 1)`, i.e. uniform on `[0, 1)`.
pub fn mixup(x_i: &Tensor2D, x_j: &Tensor2D, rng: &mut Rng) -> Result<Tensor2D> {
    x_i.ensure_same_extent(x_j)?;
    let lambda = rng.uniform();
    mixup_with_lambda(x_i, x_j, lambda)
}

pub fn cutmix_with_patch(x_i: &Tensor2D, x_j: &Tensor2D, patch: &CutPatch) -> Result<Tensor2D> {
    x_i.ensure_same_extent(x_j)?;
    check_patch(patch, x_i)?;
    let w = x_i.width();
    let mut out = x_i.clone();
    for r in patch.top..patch.top + patch.side {
        for c in patch.left..patch.left + patch.side {
            out.values_mut()[r * w + c] = x_j.values()[r * w + c];
        }
    }
    Ok(out)
}

pub fn cutmix(x_i: &Tensor2D, x_j: &Tensor2D, rng: &mut Rng) -> Result<Tensor2D> {
    x_i.ensure_same_extent(x_j)?;
    let patch = CutPatch::sample(x_i.height(), x_i.width(), rng);
    cutmix_with_patch(x_i, x_j, &patch)
}

/// Rectangle of zeroed bins on the unshifted spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectralRect {
    pub top: usize,
    pub left: usize,
    pub rows: usize,
    pub cols: usize,
}

impl SpectralRect {
    /// Rows in `0..=H/2`, columns in `0..=W/2` (so at most a quarter of the
    /// bins), position uniform among placements inside the spectrum.
    pub fn sample(height: usize, width: usize, rng: &mut Rng) -> Self {
        let rows = rng.below(height / 2 + 1);
        let cols = rng.below(width / 2 + 1);
        let top = rng.below(height - rows + 1);
        let left = rng.below(width - cols + 1);
        SpectralRect { top, left, rows, cols }
    }
}

pub fn freq_mask_with_rect(x: &Tensor2D, rect: &SpectralRect) -> Result<Tensor2D> {
    if rect.top + rect.rows > x.height() || rect.left + rect.cols > x.width() {
        return Err(Error::invalid("spectral rectangle extends past the spectrum"));
    }
    let mut s = fft2(x)?;
    for u in rect.top..rect.top + rect.rows {
        for v in rect.left..rect.left + rect.cols {
            s.set(u, v, crate::numerics::Complex::ZERO);
        }
    }
    ifft2(&s)
}

pub fn freq_mask(x: &Tensor2D, rng: &mut Rng) -> Result<Tensor2D> {
    let rect = SpectralRect::sample(x.height(), x.width(), rng);
    freq_mask_with_rect(x, &rect)
}
