//! Image container, patch geometry, patch extract/deposit operators and PSNR.
//!
//! Pixels are stored planar: `data[(ch * height + row) * width + col]`.
//! Patches are vectorized channel by channel, and inside a channel in
//! column-lexicographic order, so element `(dr, dc)` of channel `ch` sits at
//! `ch * n + dc * side + dr`.

use crate::error::{Error, Result};
use crate::scalar::Pixel;
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct Image<T> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Pixel> Image<T> {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, T::default())
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: T) -> Self {
        assert!(height > 0 && width > 0 && channels > 0, "empty image");
        assert!(
            !T::IS_COMPLEX || channels == 1,
            "complex images must have exactly one channel"
        );
        Image {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::DimensionMismatch("image dimensions must be positive".into()));
        }
        if T::IS_COMPLEX && channels != 1 {
            return Err(Error::DimensionMismatch(
                "complex images must have exactly one channel".into(),
            ));
        }
        if data.len() != height * width * channels {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {height}x{width}x{channels} image",
                data.len()
            )));
        }
        Ok(Image {
            height,
            width,
            channels,
            data,
        })
    }

    /// Builds an image from a per-pixel function `(row, col, channel)`.
    pub fn from_fn(height: usize, width: usize, channels: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut img = Self::zeros(height, width, channels);
        for ch in 0..channels {
            for r in 0..height {
                for c in 0..width {
                    *img.at_mut(r, c, ch) = f(r, c, ch);
                }
            }
        }
        img
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }
    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }
    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }
    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }
    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize, ch: usize) -> T {
        self.data[(ch * self.height + row) * self.width + col]
    }
    #[inline]
    pub fn at_mut(&mut self, row: usize, col: usize, ch: usize) -> &mut T {
        &mut self.data[(ch * self.height + row) * self.width + col]
    }

    pub fn plane(&self, ch: usize) -> &[T] {
        let len = self.height * self.width;
        &self.data[ch * len..(ch + 1) * len]
    }

    pub fn same_dims<U>(&self, other: &Image<U>) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    pub fn check_same_dims<U>(&self, other: &Image<U>) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.height, self.width, self.channels, other.height, other.width, other.channels
            )))
        }
    }

    pub fn map<U: Pixel>(&self, f: impl Fn(T) -> U) -> Image<U> {
        Image {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl Image<Complex64> {
    pub fn magnitude(&self) -> Image<f64> {
        self.map(|v| v.norm())
    }
}

impl Image<f64> {
    pub fn to_complex(&self) -> Result<Image<Complex64>> {
        if self.channels != 1 {
            return Err(Error::DimensionMismatch(
                "only single-channel images can be made complex".into(),
            ));
        }
        Ok(self.map(Complex64::from_re))
    }
}

/// How patches are placed near the image border.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Patches lie fully inside the image.
    Interior,
    /// Patch pixel indices wrap modulo the image dimensions.
    Wrap,
}

/// Top-left corner of a patch. Ordering is raster order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PatchPos {
    pub row: usize,
    pub col: usize,
}

impl PatchPos {
    pub fn new(row: usize, col: usize) -> Self {
        PatchPos { row, col }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchGeometry {
    /// Patch side in pixels; `n = side²`.
    pub side: usize,
    /// Patches per 3D group (`l`).
    pub depth: usize,
    /// Columns per block-matched matrix (`M`).
    pub match_count: usize,
    /// Side of the search window, counted in candidate patch positions.
    pub window: usize,
    /// Spacing between reference patches.
    pub stride: usize,
    pub boundary: Boundary,
}

impl PatchGeometry {
    pub fn new(side: usize, match_count: usize, depth: usize, window: usize) -> Self {
        PatchGeometry {
            side,
            depth,
            match_count,
            window,
            stride: 1,
            boundary: Boundary::Interior,
        }
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    /// Pixels per patch per channel.
    #[inline]
    pub fn patch_len(&self) -> usize {
        self.side * self.side
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.side == 0 {
            return bad("patch side must be positive");
        }
        if self.match_count == 0 {
            return bad("match count must be positive");
        }
        if self.depth == 0 || self.depth > self.match_count {
            return bad("group depth must satisfy 1 <= depth <= match count");
        }
        if self.side > self.window {
            return bad("patch side must not exceed the search window");
        }
        if self.stride == 0 {
            return bad("stride must be at least 1");
        }
        Ok(())
    }

    /// Validates the geometry against an image size.
    pub fn validate_for(&self, height: usize, width: usize) -> Result<()> {
        self.validate()?;
        if self.side > height || self.side > width {
            return Err(Error::InvalidConfig(format!(
                "{}x{} patches do not fit a {height}x{width} image",
                self.side, self.side
            )));
        }
        Ok(())
    }

    /// Number of valid top-left positions along an axis of the given length.
    pub fn positions_along(&self, len: usize) -> usize {
        match self.boundary {
            Boundary::Interior => len + 1 - self.side,
            Boundary::Wrap => len,
        }
    }

    /// Every stride-1 patch position, in raster order.
    pub fn all_positions(&self, height: usize, width: usize) -> Vec<PatchPos> {
        let (pr, pc) = (self.positions_along(height), self.positions_along(width));
        let mut out = Vec::with_capacity(pr * pc);
        for r in 0..pr {
            for c in 0..pc {
                out.push(PatchPos::new(r, c));
            }
        }
        out
    }

    /// Reference patch positions. Interior mode always includes the last
    /// row/column position so the border is covered when `stride > 1`.
    pub fn reference_positions(&self, height: usize, width: usize) -> Vec<PatchPos> {
        let axis = |len: usize| -> Vec<usize> {
            let count = self.positions_along(len);
            let mut v: Vec<usize> = (0..count).step_by(self.stride).collect();
            if self.boundary == Boundary::Interior && *v.last().unwrap() != count - 1 {
                v.push(count - 1);
            }
            v
        };
        let rows = axis(height);
        let cols = axis(width);
        let mut out = Vec::with_capacity(rows.len() * cols.len());
        for &r in &rows {
            for &c in &cols {
                out.push(PatchPos::new(r, c));
            }
        }
        out
    }

    pub fn check_pos(&self, pos: PatchPos, height: usize, width: usize) -> Result<()> {
        if pos.row < self.positions_along(height) && pos.col < self.positions_along(width) {
            Ok(())
        } else {
            Err(Error::PatchOutOfRange {
                row: pos.row,
                col: pos.col,
                height,
                width,
            })
        }
    }
}

/// Flat pixel offsets (within one channel plane) covered by a patch, in
/// column-lexicographic order. The position must already be validated.
pub(crate) fn patch_offsets(
    pos: PatchPos,
    side: usize,
    boundary: Boundary,
    height: usize,
    width: usize,
    out: &mut Vec<usize>,
) {
    out.clear();
    for dc in 0..side {
        let c = match boundary {
            Boundary::Interior => pos.col + dc,
            Boundary::Wrap => (pos.col + dc) % width,
        };
        for dr in 0..side {
            let r = match boundary {
                Boundary::Interior => pos.row + dr,
                Boundary::Wrap => (pos.row + dr) % height,
            };
            out.push(r * width + c);
        }
    }
}

/// Extracts the patch at `pos` (the `R_i` operator), all channels stacked.
pub fn extract_patch<T: Pixel>(img: &Image<T>, pos: PatchPos, geom: &PatchGeometry) -> Result<Vec<T>> {
    let (h, w, channels) = img.dims();
    geom.check_pos(pos, h, w)?;
    let mut offsets = Vec::with_capacity(geom.patch_len());
    patch_offsets(pos, geom.side, geom.boundary, h, w, &mut offsets);
    let mut out = Vec::with_capacity(offsets.len() * channels);
    for ch in 0..channels {
        let plane = img.plane(ch);
        out.extend(offsets.iter().map(|&o| plane[o]));
    }
    Ok(out)
}

/// Adds `values` into `buffer` at the patch location (the adjoint `R_i^*`).
pub fn deposit_patch<T: Pixel>(buffer: &mut Image<T>, pos: PatchPos, geom: &PatchGeometry, values: &[T]) -> Result<()> {
    let (h, w, channels) = buffer.dims();
    geom.check_pos(pos, h, w)?;
    let n = geom.patch_len();
    if values.len() != n * channels {
        return Err(Error::DimensionMismatch(format!(
            "patch of {} values, expected {}",
            values.len(),
            n * channels
        )));
    }
    let mut offsets = Vec::with_capacity(n);
    patch_offsets(pos, geom.side, geom.boundary, h, w, &mut offsets);
    let plane_len = h * w;
    let data = buffer.as_mut_slice();
    for ch in 0..channels {
        let vals = &values[ch * n..(ch + 1) * n];
        for (&o, &v) in offsets.iter().zip(vals) {
            data[ch * plane_len + o] += v;
        }
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB, `+inf` when the images are identical.
pub fn psnr(a: &Image<f64>, b: &Image<f64>, peak: f64) -> Result<f64> {
    a.check_same_dims(b)?;
    let mse = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.as_slice().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}
