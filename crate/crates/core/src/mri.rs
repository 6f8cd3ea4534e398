//! Compressed-sensing MRI: undersampled unitary DFT sensing, sampling masks,
//! k-space simulation and the frequency-domain image update.
//!
//! Masks index k-space in unshifted FFT order, so the DC frequency is
//! `(0, 0)`. Patches wrap around the image, which makes every pixel appear
//! in exactly `n` reference patches.

use crate::engine::{for_each_contribution, Backend, ReconWorkspace, SolverConfig, Thresholds, UpdateContext};
use crate::error::{Error, Result};
use crate::image::{patch_offsets, Boundary, Image, PatchGeometry, PatchPos};
use crate::inpaint::PixelMask;
use crate::transform::Transform;
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub const DEFAULT_GAMMA: f64 = 1e-6;
pub const DEFAULT_ITERATIONS: usize = 100;

/// Unitary 2D DFT plans for one image size.
#[derive(Clone)]
pub struct Fourier2d {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fourier2d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fourier2d({}x{})", self.height, self.width)
    }
}

impl Fourier2d {
    pub fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fourier2d {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let (h, w) = (self.height, self.width);
        let (row, col) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        data.par_chunks_mut(w).for_each(|r| row.process(r));
        let mut cols = vec![Complex64::default(); h * w];
        for r in 0..h {
            for c in 0..w {
                cols[c * h + r] = data[r * w + c];
            }
        }
        cols.par_chunks_mut(h).for_each(|c| col.process(c));
        let scale = 1.0 / ((h * w) as f64).sqrt();
        for r in 0..h {
            for c in 0..w {
                data[r * w + c] = cols[c * h + r] * scale;
            }
        }
    }

    fn check(&self, img: &Image<Complex64>) -> Result<()> {
        if img.dims() != (self.height, self.width, 1) {
            return Err(Error::DimensionMismatch(format!(
                "{}x{}x{} image for a {}x{} transform",
                img.height(),
                img.width(),
                img.channels(),
                self.height,
                self.width
            )));
        }
        Ok(())
    }

    /// Unitary forward DFT `F x`.
    pub fn forward(&self, x: &Image<Complex64>) -> Result<Image<Complex64>> {
        self.check(x)?;
        let mut out = x.clone();
        self.transform(out.as_mut_slice(), false);
        Ok(out)
    }

    /// Unitary inverse DFT `F^H X`.
    pub fn inverse(&self, spectrum: &Image<Complex64>) -> Result<Image<Complex64>> {
        self.check(spectrum)?;
        let mut out = spectrum.clone();
        self.transform(out.as_mut_slice(), true);
        Ok(out)
    }
}

fn check_mask(mask: &PixelMask, fourier: &Fourier2d) -> Result<()> {
    if (mask.height(), mask.width()) != fourier.dims() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} mask for a {}x{} transform",
            mask.height(),
            mask.width(),
            fourier.height,
            fourier.width
        )));
    }
    Ok(())
}

/// `F_g x`: the sampled DFT coefficients in raster order of the mask.
pub fn forward_fg(x: &Image<Complex64>, mask: &PixelMask, fourier: &Fourier2d) -> Result<Vec<Complex64>> {
    check_mask(mask, fourier)?;
    let spectrum = fourier.forward(x)?;
    Ok(spectrum
        .as_slice()
        .iter()
        .zip(mask.as_slice())
        .filter(|(_, &m)| m)
        .map(|(&v, _)| v)
        .collect())
}

/// Zero-filled spectrum `G y` from the sampled coefficients.
pub fn zero_filled_spectrum(samples: &[Complex64], mask: &PixelMask) -> Result<Image<Complex64>> {
    if samples.len() != mask.available_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} samples for a mask with {} sampled frequencies",
            samples.len(),
            mask.available_count()
        )));
    }
    let mut out = Image::zeros(mask.height(), mask.width(), 1);
    let mut it = samples.iter();
    for (v, &m) in out.as_mut_slice().iter_mut().zip(mask.as_slice()) {
        if m {
            *v = *it.next().expect("sample count checked");
        }
    }
    Ok(out)
}

/// `F_g^H y`.
pub fn adjoint_fg(samples: &[Complex64], mask: &PixelMask, fourier: &Fourier2d) -> Result<Image<Complex64>> {
    check_mask(mask, fourier)?;
    fourier.inverse(&zero_filled_spectrum(samples, mask)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    /// Full phase-encode rows.
    Cartesian,
    /// Uniform random frequencies, DC always included.
    Random2d,
    /// Rasterized lines through DC at uniformly spaced angles.
    PseudoRadial,
}

impl std::str::FromStr for MaskKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cartesian" => Ok(MaskKind::Cartesian),
            "random2d" => Ok(MaskKind::Random2d),
            "pseudo_radial" | "pseudo-radial" | "radial" => Ok(MaskKind::PseudoRadial),
            other => Err(Error::InvalidConfig(format!("unknown mask kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for MaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MaskKind::Cartesian => "cartesian",
            MaskKind::Random2d => "random2d",
            MaskKind::PseudoRadial => "pseudo_radial",
        })
    }
}

/// Frequency index (unshifted) of a centered coordinate.
fn unshift(centered: i64, len: usize) -> usize {
    centered.rem_euclid(len as i64) as usize
}

/// Grid points of one line through DC, nearest-point rasterized, ordered by
/// distance from DC.
fn radial_line(angle: f64, height: usize, width: usize) -> Vec<(usize, usize)> {
    let (dr, dc) = (angle.sin(), angle.cos());
    let reach = (height.max(width) as f64) / 2.0 * std::f64::consts::SQRT_2;
    let steps = (2.0 * reach).ceil() as i64;
    let (hr, hc) = ((height / 2) as i64, (width / 2) as i64);
    let mut pts: Vec<(i64, usize, usize)> = Vec::new();
    for s in -steps..=steps {
        let t = s as f64 * 0.5;
        let r = (t * dr).round() as i64;
        let c = (t * dc).round() as i64;
        if r < -hr || r >= height as i64 - hr || c < -hc || c >= width as i64 - hc {
            continue;
        }
        pts.push((r * r + c * c, unshift(r, height), unshift(c, width)));
    }
    pts.sort_unstable();
    pts.dedup_by_key(|p| (p.1, p.2));
    pts.into_iter().map(|(_, r, c)| (r, c)).collect()
}

/// Sampling mask with about `p / ratio` frequencies; deterministic in `seed`.
pub fn make_mask(kind: MaskKind, height: usize, width: usize, ratio: f64, seed: u64) -> Result<PixelMask> {
    let p = height * width;
    if p == 0 {
        return Err(Error::EmptyInput("mask dimensions"));
    }
    if !(ratio >= 1.0) || ratio > p as f64 {
        return Err(Error::InvalidConfig(format!(
            "undersampling ratio {ratio} outside [1, {p}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut on = vec![false; p];
    match kind {
        MaskKind::Cartesian => {
            let rows = ((height as f64 / ratio).round() as usize).clamp(1, height);
            on[..width].fill(true);
            for r in sample(&mut rng, height - 1, rows - 1) {
                on[(r + 1) * width..(r + 2) * width].fill(true);
            }
        }
        MaskKind::Random2d => {
            let q = ((p as f64 / ratio).round() as usize).clamp(1, p);
            on[0] = true;
            for k in sample(&mut rng, p - 1, q - 1) {
                on[k + 1] = true;
            }
        }
        MaskKind::PseudoRadial => {
            let q = ((p as f64 / ratio).round() as usize).clamp(1, p);
            let offset: f64 = rng.random_range(0.0..std::f64::consts::PI);
            let mut lines = 1;
            loop {
                on.fill(false);
                let mut count = 0;
                let mut last: Vec<(usize, usize)> = Vec::new();
                for k in 0..lines {
                    let angle = offset + std::f64::consts::PI * k as f64 / lines as f64;
                    last.clear();
                    for (r, c) in radial_line(angle, height, width) {
                        if !on[r * width + c] {
                            on[r * width + c] = true;
                            count += 1;
                            last.push((r, c));
                        }
                    }
                }
                if count >= q || lines >= 4 * (height + width) {
                    // Trim the outermost points of the last line to hit q.
                    while count > q {
                        match last.pop() {
                            Some((r, c)) => {
                                on[r * width + c] = false;
                                count -= 1;
                            }
                            None => break,
                        }
                    }
                    if count < q {
                        let free: Vec<usize> = (0..p).filter(|&k| !on[k]).collect();
                        for k in sample(&mut rng, free.len(), q - count) {
                            on[free[k]] = true;
                        }
                    }
                    break;
                }
                lines += 1;
            }
        }
    }
    PixelMask::new(height, width, on)
}

/// Undersampled k-space measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct KSpaceData {
    pub mask: PixelMask,
    /// Sampled coefficients in mask raster order.
    pub samples: Vec<Complex64>,
}

impl KSpaceData {
    pub fn new(mask: PixelMask, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != mask.available_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a mask with {} sampled frequencies",
                samples.len(),
                mask.available_count()
            )));
        }
        Ok(KSpaceData { mask, samples })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.mask.height(), self.mask.width())
    }

    /// Undersampling ratio `p / q`.
    pub fn ratio(&self) -> f64 {
        (self.mask.height() * self.mask.width()) as f64 / self.samples.len() as f64
    }

    pub fn zero_filled(&self, fourier: &Fourier2d) -> Result<Image<Complex64>> {
        adjoint_fg(&self.samples, &self.mask, fourier)
    }
}

/// Noiseless k-space of a real (magnitude) image.
pub fn simulate_kspace(reference: &Image<f64>, mask: &PixelMask) -> Result<KSpaceData> {
    if reference.channels() != 1 {
        return Err(Error::DimensionMismatch(
            "k-space simulation needs a single-channel image".into(),
        ));
    }
    let fourier = Fourier2d::new(reference.height(), reference.width());
    let samples = forward_fg(&reference.to_complex()?, mask, &fourier)?;
    KSpaceData::new(mask.clone(), samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MriPreset {
    Anatomical,
    Phantom,
}

impl std::str::FromStr for MriPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "anatomical" => Ok(MriPreset::Anatomical),
            "phantom" => Ok(MriPreset::Phantom),
            other => Err(Error::InvalidConfig(format!("unknown MRI preset {other:?}"))),
        }
    }
}

impl std::fmt::Display for MriPreset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MriPreset::Anatomical => "anatomical",
            MriPreset::Phantom => "phantom",
        })
    }
}

/// `theta_0` for a preset and undersampling ratio.
pub fn default_theta0(preset: MriPreset, ratio: f64) -> f64 {
    match preset {
        MriPreset::Anatomical if ratio <= 5.0 => 0.02,
        MriPreset::Anatomical => 0.05,
        MriPreset::Phantom => 0.05,
    }
}

pub fn mri_geometry() -> PatchGeometry {
    PatchGeometry::new(6, 70, 8, 30).with_boundary(Boundary::Wrap)
}

/// Paper defaults: unit fidelity, tiny regularizer weights, `theta = 2 lambda = theta_0`.
pub fn mri_config(preset: MriPreset, ratio: f64) -> SolverConfig {
    let mut cfg = SolverConfig::new(mri_geometry(), DEFAULT_ITERATIONS);
    cfg.gamma_fidelity = 1.0;
    cfg.gamma_sparse = DEFAULT_GAMMA;
    cfg.gamma_low_rank = DEFAULT_GAMMA;
    let theta0 = default_theta0(preset, ratio);
    cfg.theta = Some(theta0);
    cfg.lambda = Some(theta0 / 2.0);
    cfg
}

/// Per-patch averages of the mean-restored approximants, indexed by the
/// patch's top-left pixel.
#[derive(Debug, Clone)]
pub struct PatchAverages {
    pub height: usize,
    pub width: usize,
    pub patch_len: usize,
    /// `u~_k`, `patch_len` values per patch.
    pub sparse: Vec<Complex64>,
    /// `d_k`.
    pub low_rank: Vec<Complex64>,
    /// `|Delta_k|`: appearances among the first `l` members of any group.
    pub sparse_counts: Vec<u32>,
    /// `|Gamma_k|`: appearances among all `M` members.
    pub low_rank_counts: Vec<u32>,
}

impl PatchAverages {
    pub fn sparse_patch(&self, pos: PatchPos) -> &[Complex64] {
        let k = pos.row * self.width + pos.col;
        &self.sparse[k * self.patch_len..(k + 1) * self.patch_len]
    }

    pub fn low_rank_patch(&self, pos: PatchPos) -> &[Complex64] {
        let k = pos.row * self.width + pos.col;
        &self.low_rank[k * self.patch_len..(k + 1) * self.patch_len]
    }
}

fn check_mri_geometry(geom: &PatchGeometry) -> Result<()> {
    if geom.boundary != Boundary::Wrap || geom.stride != 1 {
        return Err(Error::InvalidConfig(
            "MRI reconstruction needs wrap-around patches at stride 1".into(),
        ));
    }
    Ok(())
}

pub fn average_approximants(ws: &ReconWorkspace<Complex64>, transform: &Transform<Complex64>) -> Result<PatchAverages> {
    check_mri_geometry(&ws.geometry)?;
    if ws.channels != 1 {
        return Err(Error::DimensionMismatch("MRI images are single-channel".into()));
    }
    let (h, w) = (ws.height, ws.width);
    let n = ws.geometry.patch_len();
    let depth = ws.geometry.depth;
    let mut avg = PatchAverages {
        height: h,
        width: w,
        patch_len: n,
        sparse: vec![Complex64::default(); h * w * n],
        low_rank: vec![Complex64::default(); h * w * n],
        sparse_counts: vec![0; h * w],
        low_rank_counts: vec![0; h * w],
    };
    for_each_contribution(ws, transform, |_, group, c| {
        for (j, p) in group.members.iter().enumerate() {
            let k = p.row * w + p.col;
            let dst = &mut avg.low_rank[k * n..(k + 1) * n];
            dst.iter_mut()
                .zip(c.low_rank.column(j).iter())
                .for_each(|(d, s)| *d += s);
            avg.low_rank_counts[k] += 1;
            if j < depth {
                let dst = &mut avg.sparse[k * n..(k + 1) * n];
                dst.iter_mut().zip(c.sparse.column(j).iter()).for_each(|(d, s)| *d += s);
                avg.sparse_counts[k] += 1;
            }
        }
    });
    for k in 0..h * w {
        let (cs, cl) = (avg.sparse_counts[k], avg.low_rank_counts[k]);
        if cs == 0 || cl == 0 {
            return Err(Error::UncoveredPixel { row: k / w, col: k % w });
        }
        avg.sparse[k * n..(k + 1) * n].iter_mut().for_each(|v| *v /= cs as f64);
        avg.low_rank[k * n..(k + 1) * n]
            .iter_mut()
            .for_each(|v| *v /= cl as f64);
    }
    Ok(avg)
}

/// `x = F^H B^{-1} z` with `B = diag(g) + n (gamma_S + gamma_LR) I` and
/// `z = G y + F sum_k R_k^* (gamma_S u~_k + gamma_LR d_k)`.
pub fn mri_image_update(
    data: &KSpaceData,
    averages: &PatchAverages,
    gamma_sparse: f64,
    gamma_low_rank: f64,
    geom: &PatchGeometry,
    fourier: &Fourier2d,
) -> Result<Image<Complex64>> {
    check_mri_geometry(geom)?;
    let (h, w) = data.dims();
    if (averages.height, averages.width, averages.patch_len) != (h, w, geom.patch_len()) {
        return Err(Error::DimensionMismatch(
            "patch averages do not match the measurement".into(),
        ));
    }
    let n = geom.patch_len();
    let mut regularizer = Image::<Complex64>::zeros(h, w, 1);
    let mut offsets = Vec::with_capacity(n);
    {
        let r = regularizer.as_mut_slice();
        for k in 0..h * w {
            patch_offsets(
                PatchPos::new(k / w, k % w),
                geom.side,
                Boundary::Wrap,
                h,
                w,
                &mut offsets,
            );
            let u = &averages.sparse[k * n..(k + 1) * n];
            let d = &averages.low_rank[k * n..(k + 1) * n];
            for (i, &o) in offsets.iter().enumerate() {
                r[o] += u[i] * gamma_sparse + d[i] * gamma_low_rank;
            }
        }
    }
    let mut spectrum = fourier.forward(&regularizer)?;
    let measured = zero_filled_spectrum(&data.samples, &data.mask)?;
    let reg = n as f64 * (gamma_sparse + gamma_low_rank);
    for ((s, &m), &g) in spectrum
        .as_mut_slice()
        .iter_mut()
        .zip(measured.as_slice())
        .zip(data.mask.as_slice())
    {
        let b = if g { 1.0 + reg } else { reg };
        if !(b > 0.0) {
            return Err(Error::Singular(
                "unsampled frequency with zero regularizer weight".into(),
            ));
        }
        *s = (*s + m) / b;
    }
    fourier.inverse(&spectrum)
}

#[derive(Debug, Clone)]
pub struct MriBackend {
    data: KSpaceData,
    fourier: Fourier2d,
    theta0: f64,
}

impl MriBackend {
    pub fn new(data: KSpaceData, theta0: f64) -> Result<Self> {
        if !(theta0 >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "theta_0 must be non-negative, got {theta0}"
            )));
        }
        let (h, w) = data.dims();
        Ok(MriBackend {
            fourier: Fourier2d::new(h, w),
            data,
            theta0,
        })
    }

    pub fn data(&self) -> &KSpaceData {
        &self.data
    }

    pub fn fourier(&self) -> &Fourier2d {
        &self.fourier
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }
}

impl Backend<Complex64> for MriBackend {
    fn name(&self) -> &'static str {
        "mri"
    }

    fn initial_estimate(&self) -> Result<Image<Complex64>> {
        self.data.zero_filled(&self.fourier)
    }

    fn thresholds(&self, _iteration: usize, _cfg: &SolverConfig, _channels: usize) -> Thresholds {
        Thresholds {
            lambda: self.theta0 / 2.0,
            theta: self.theta0,
        }
    }

    fn fidelity(&self, x: &Image<Complex64>) -> f64 {
        match forward_fg(x, &self.data.mask, &self.fourier) {
            Ok(s) => s.iter().zip(&self.data.samples).map(|(a, b)| (a - b).norm_sqr()).sum(),
            Err(_) => f64::INFINITY,
        }
    }

    fn update_image(&mut self, ctx: &UpdateContext<'_, Complex64>) -> Result<Image<Complex64>> {
        let averages = average_approximants(ctx.workspace, ctx.transform)?;
        mri_image_update(
            &self.data,
            &averages,
            ctx.config.gamma_sparse,
            ctx.config.gamma_low_rank,
            &ctx.workspace.geometry,
            &self.fourier,
        )
    }
}
