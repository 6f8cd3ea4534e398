//! Inpainting (`A` a binary diagonal sampling operator), with a noisy
//! weighted-fidelity update and a noiseless hard-constraint update.

use crate::engine::{Backend, SolverConfig, Thresholds, UpdateContext};
use crate::error::{Error, Result};
use crate::image::{Image, PatchGeometry};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_SIDE: usize = 6;
pub const DEFAULT_MATCH_COUNT: usize = 80;
pub const DEFAULT_DEPTH: usize = 8;
pub const DEFAULT_ITERATIONS: usize = 150;
pub const DEFAULT_WINDOW: usize = 30;

/// Available-pixel mask, one flag per pixel shared by all channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelMask {
    height: usize,
    width: usize,
    available: Vec<bool>,
}

impl PixelMask {
    pub fn new(height: usize, width: usize, available: Vec<bool>) -> Result<Self> {
        if available.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "mask of {} entries for a {height}x{width} image",
                available.len()
            )));
        }
        if !available.iter().any(|&a| a) {
            return Err(Error::EmptyInput("mask has no available pixels"));
        }
        Ok(PixelMask {
            height,
            width,
            available,
        })
    }

    pub fn full(height: usize, width: usize) -> Self {
        PixelMask {
            height,
            width,
            available: vec![true; height * width],
        }
    }

    /// Uniform random mask keeping `round(keep * p)` pixels (at least one).
    pub fn random(height: usize, width: usize, keep: f64, seed: u64) -> Result<Self> {
        if !(keep > 0.0 && keep <= 1.0) {
            return Err(Error::InvalidConfig(format!("keep ratio {keep} outside (0, 1]")));
        }
        let p = height * width;
        let count = ((keep * p as f64).round() as usize).clamp(1, p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut available = vec![false; p];
        for i in sample(&mut rng, p, count) {
            available[i] = true;
        }
        Self::new(height, width, available)
    }

    /// Nonzero samples are available.
    pub fn from_image(img: &Image<f64>) -> Result<Self> {
        let (h, w, ch) = img.dims();
        let available = (0..h * w).map(|k| (0..ch).any(|c| img.plane(c)[k] != 0.0)).collect();
        Self::new(h, w, available)
    }

    pub fn to_image(&self) -> Image<f64> {
        let data = self.available.iter().map(|&a| if a { 255.0 } else { 0.0 }).collect();
        Image::from_vec(self.height, self.width, 1, data).expect("mask dimensions are consistent")
    }

    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn as_slice(&self) -> &[bool] {
        &self.available
    }
    pub fn is_available(&self, row: usize, col: usize) -> bool {
        self.available[row * self.width + col]
    }
    pub fn available_count(&self) -> usize {
        self.available.iter().filter(|&&a| a).count()
    }
    pub fn keep_ratio(&self) -> f64 {
        self.available_count() as f64 / self.available.len() as f64
    }

    fn check_image<T: crate::scalar::Pixel>(&self, img: &Image<T>) -> Result<()> {
        if img.height() != self.height || img.width() != self.width {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} mask for a {}x{} image",
                self.height,
                self.width,
                img.height(),
                img.width()
            )));
        }
        Ok(())
    }
}

/// Default sparsity threshold for a keep ratio: 20, 12, 5 at 20%, 30%, 50%,
/// linear in between, clamped outside.
pub fn default_lambda(keep: f64) -> f64 {
    const KNOTS: [(f64, f64); 3] = [(0.2, 20.0), (0.3, 12.0), (0.5, 5.0)];
    if keep <= KNOTS[0].0 {
        return KNOTS[0].1;
    }
    for w in KNOTS.windows(2) {
        let ((k0, l0), (k1, l1)) = (w[0], w[1]);
        if keep <= k1 {
            return l0 + (l1 - l0) * (keep - k0) / (k1 - k0);
        }
    }
    KNOTS[2].1
}

pub fn inpaint_geometry() -> PatchGeometry {
    PatchGeometry::new(DEFAULT_SIDE, DEFAULT_MATCH_COUNT, DEFAULT_DEPTH, DEFAULT_WINDOW)
}

/// Paper defaults; `sigma = None` or 0 selects the noiseless variant, where
/// the fidelity weight is unused.
pub fn inpaint_config(sigma: Option<f64>) -> Result<SolverConfig> {
    let mut cfg = SolverConfig::new(inpaint_geometry(), DEFAULT_ITERATIONS);
    match sigma {
        Some(s) if s < 0.0 || !s.is_finite() => {
            return Err(Error::InvalidConfig(format!(
                "noise level must be non-negative, got {s}"
            )));
        }
        Some(s) if s > 0.0 => cfg.gamma_fidelity = 0.1 / (s * s),
        _ => {}
    }
    Ok(cfg)
}

fn uncovered(mask: &PixelMask, k: usize) -> Error {
    Error::UncoveredPixel {
        row: k / mask.width,
        col: k % mask.width,
    }
}

/// `x_j = (gamma_F m_j y_j + z_j) / (gamma_F m_j + b_j)`.
pub fn inpaint_update_noisy(
    b: &Image<f64>,
    z: &Image<f64>,
    y: &Image<f64>,
    mask: &PixelMask,
    gamma_f: f64,
) -> Result<Image<f64>> {
    y.check_same_dims(b)?;
    y.check_same_dims(z)?;
    mask.check_image(y)?;
    let plane = y.pixel_count();
    let mut out = Image::zeros(y.height(), y.width(), y.channels());
    let (bs, zs, ys) = (b.as_slice(), z.as_slice(), y.as_slice());
    for (i, o) in out.as_mut_slice().iter_mut().enumerate() {
        let m = if mask.available[i % plane] { gamma_f } else { 0.0 };
        let denom = m + bs[i];
        if !(denom > 0.0) {
            return Err(uncovered(mask, i % plane));
        }
        *o = (m * ys[i] + zs[i]) / denom;
    }
    Ok(out)
}

/// Available pixels copied from `y`; missing ones `z_j / b_j`.
pub fn inpaint_update_noiseless(
    b: &Image<f64>,
    z: &Image<f64>,
    y: &Image<f64>,
    mask: &PixelMask,
) -> Result<Image<f64>> {
    y.check_same_dims(b)?;
    y.check_same_dims(z)?;
    mask.check_image(y)?;
    let plane = y.pixel_count();
    let mut out = Image::zeros(y.height(), y.width(), y.channels());
    let (bs, zs, ys) = (b.as_slice(), z.as_slice(), y.as_slice());
    for (i, o) in out.as_mut_slice().iter_mut().enumerate() {
        if mask.available[i % plane] {
            *o = ys[i];
        } else if bs[i] > 0.0 {
            *o = zs[i] / bs[i];
        } else {
            return Err(uncovered(mask, i % plane));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct InpaintBackend {
    y: Image<f64>,
    mask: PixelMask,
    noisy: bool,
    lambda: f64,
}

impl InpaintBackend {
    /// Noiseless hard-constraint variant.
    pub fn noiseless(y: Image<f64>, mask: PixelMask) -> Result<Self> {
        mask.check_image(&y)?;
        let lambda = default_lambda(mask.keep_ratio());
        Ok(InpaintBackend {
            y,
            mask,
            noisy: false,
            lambda,
        })
    }

    /// Weighted-fidelity variant; the weight comes from the solver config.
    pub fn noisy(y: Image<f64>, mask: PixelMask) -> Result<Self> {
        let mut b = Self::noiseless(y, mask)?;
        b.noisy = true;
        Ok(b)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mask(&self) -> &PixelMask {
        &self.mask
    }

    pub fn is_noisy(&self) -> bool {
        self.noisy
    }
}

impl Backend<f64> for InpaintBackend {
    fn name(&self) -> &'static str {
        "inpaint"
    }

    /// Missing pixels filled with the per-channel mean of the available ones.
    fn initial_estimate(&self) -> Result<Image<f64>> {
        let plane = self.y.pixel_count();
        let mut x = self.y.clone();
        let count = self.mask.available_count() as f64;
        for c in 0..self.y.channels() {
            let values = self.y.plane(c);
            let mean = values
                .iter()
                .zip(&self.mask.available)
                .filter(|(_, &a)| a)
                .map(|(v, _)| v)
                .sum::<f64>()
                / count;
            let data = &mut x.as_mut_slice()[c * plane..(c + 1) * plane];
            for (v, &a) in data.iter_mut().zip(&self.mask.available) {
                if !a {
                    *v = mean;
                }
            }
        }
        Ok(x)
    }

    fn thresholds(&self, _iteration: usize, cfg: &SolverConfig, channels: usize) -> Thresholds {
        let n = cfg.geometry.patch_len() as f64;
        let m = (channels * cfg.geometry.match_count) as f64;
        Thresholds {
            lambda: self.lambda,
            theta: self.lambda * (n.sqrt() + m.sqrt()),
        }
    }

    fn fidelity(&self, x: &Image<f64>) -> f64 {
        let plane = x.pixel_count();
        x.as_slice()
            .iter()
            .zip(self.y.as_slice())
            .enumerate()
            .filter(|(i, _)| self.mask.available[i % plane])
            .map(|(_, (a, b))| (a - b) * (a - b))
            .sum()
    }

    fn update_image(&mut self, ctx: &UpdateContext<'_, f64>) -> Result<Image<f64>> {
        let terms = ctx.normal_terms();
        if self.noisy {
            inpaint_update_noisy(
                &terms.diagonal,
                &terms.rhs,
                &self.y,
                &self.mask,
                ctx.config.gamma_fidelity,
            )
        } else {
            inpaint_update_noiseless(&terms.diagonal, &terms.rhs, &self.y, &self.mask)
        }
    }
}
