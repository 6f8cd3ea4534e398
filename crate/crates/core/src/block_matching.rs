//! Block matching: the `V_i` (matched-group matrix) and `C_i` (3D group
//! vector) operators.
//!
//! Patch means are removed per channel before distances are computed and
//! before the group matrix is formed. A [`MatchedGroup`] freezes the member
//! positions and their removed means, so the group operators can later be
//! applied to a different image estimate as `gather(x) - means`.
//!
//! Color groups put the channels of each member in adjacent columns, giving
//! an `n x (channels * M)` matrix.

use crate::error::{Error, Result};
use crate::image::{patch_offsets, Boundary, Image, PatchGeometry, PatchPos};
use crate::scalar::Pixel;
use nalgebra::{DMatrix, DVector};
use std::cmp::Ordering;

#[derive(Debug, Clone, PartialEq)]
pub struct MatchedGroup<T> {
    pub reference: PatchPos,
    /// Reference first, then ascending distance, ties by raster order.
    pub members: Vec<PatchPos>,
    /// Removed means, `channels` entries per member.
    pub means: Vec<T>,
    /// Euclidean distances of the mean-removed members to the reference.
    pub distances: Vec<f64>,
}

impl<T: Pixel> MatchedGroup<T> {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    #[inline]
    pub fn mean(&self, member: usize, ch: usize, channels: usize) -> T {
        self.means[member * channels + ch]
    }
}

/// Candidate positions along one axis of the search window.
fn window_axis(center: usize, window: usize, len: usize, geom: &PatchGeometry) -> Vec<usize> {
    let count = geom.positions_along(len);
    let size = window.min(count);
    let half = window / 2;
    match geom.boundary {
        Boundary::Interior => {
            let start = center.saturating_sub(half).min(count - size);
            (start..start + size).collect()
        }
        Boundary::Wrap => {
            let start = (center + count - half % count) % count;
            (0..size).map(|k| (start + k) % count).collect()
        }
    }
}

/// Search-window candidates around `reference`, in raster order.
pub fn window_positions(reference: PatchPos, geom: &PatchGeometry, height: usize, width: usize) -> Vec<PatchPos> {
    let mut rows = window_axis(reference.row, geom.window, height, geom);
    let mut cols = window_axis(reference.col, geom.window, width, geom);
    rows.sort_unstable();
    cols.sort_unstable();
    let mut out = Vec::with_capacity(rows.len() * cols.len());
    for &r in &rows {
        for &c in &cols {
            out.push(PatchPos::new(r, c));
        }
    }
    out
}

/// Mean-removed vectors of every stride-1 patch of an image.
#[derive(Debug, Clone)]
pub struct PatchTable<T> {
    geom: PatchGeometry,
    height: usize,
    width: usize,
    channels: usize,
    cols: usize,
    vectors: Vec<T>,
    means: Vec<T>,
}

impl<T: Pixel> PatchTable<T> {
    pub fn new(img: &Image<T>, geom: &PatchGeometry) -> Result<Self> {
        let (height, width, channels) = img.dims();
        geom.validate_for(height, width)?;
        let n = geom.patch_len();
        let rows = geom.positions_along(height);
        let cols = geom.positions_along(width);
        let count = rows * cols;
        let mut vectors = Vec::with_capacity(count * n * channels);
        let mut means = Vec::with_capacity(count * channels);
        let mut offsets = Vec::with_capacity(n);
        let inv_n = 1.0 / n as f64;
        for r in 0..rows {
            for c in 0..cols {
                patch_offsets(
                    PatchPos::new(r, c),
                    geom.side,
                    geom.boundary,
                    height,
                    width,
                    &mut offsets,
                );
                for ch in 0..channels {
                    let plane = img.plane(ch);
                    let start = vectors.len();
                    let mut sum = T::default();
                    for &o in &offsets {
                        let v = plane[o];
                        sum += v;
                        vectors.push(v);
                    }
                    let mean = sum.scaled(inv_n);
                    for v in &mut vectors[start..] {
                        *v -= mean;
                    }
                    means.push(mean);
                }
            }
        }
        Ok(PatchTable {
            geom: *geom,
            height,
            width,
            channels,
            cols,
            vectors,
            means,
        })
    }

    pub fn geometry(&self) -> &PatchGeometry {
        &self.geom
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    fn index(&self, pos: PatchPos) -> usize {
        pos.row * self.cols + pos.col
    }

    /// Mean-removed patch, all channels stacked.
    #[inline]
    pub fn vector(&self, pos: PatchPos) -> &[T] {
        let len = self.geom.patch_len() * self.channels;
        let i = self.index(pos);
        &self.vectors[i * len..(i + 1) * len]
    }

    #[inline]
    pub fn means(&self, pos: PatchPos) -> &[T] {
        let i = self.index(pos);
        &self.means[i * self.channels..(i + 1) * self.channels]
    }

    /// Selects the `M` window patches closest to the reference.
    pub fn block_match(&self, reference: PatchPos) -> Result<MatchedGroup<T>> {
        self.geom.check_pos(reference, self.height, self.width)?;
        let m = self.geom.match_count;
        let candidates = window_positions(reference, &self.geom, self.height, self.width);
        if candidates.len() < m {
            return Err(Error::InsufficientCandidates {
                available: candidates.len(),
                required: m,
            });
        }
        let target = self.vector(reference);
        let mut scored: Vec<(f64, usize, PatchPos)> = candidates
            .iter()
            .filter(|&&p| p != reference)
            .map(|&p| {
                let d: f64 = self.vector(p).iter().zip(target).map(|(&a, &b)| (a - b).abs_sq()).sum();
                (d, self.index(p), p)
            })
            .collect();
        let by_distance = |a: &(f64, usize, PatchPos), b: &(f64, usize, PatchPos)| {
            a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
        };
        let keep = m - 1;
        if keep > 0 && keep < scored.len() {
            scored.select_nth_unstable_by(keep - 1, by_distance);
        }
        scored.truncate(keep);
        scored.sort_unstable_by(by_distance);

        let mut members = Vec::with_capacity(m);
        let mut distances = Vec::with_capacity(m);
        let mut means = Vec::with_capacity(m * self.channels);
        members.push(reference);
        distances.push(0.0);
        means.extend_from_slice(self.means(reference));
        for (d, _, p) in scored {
            members.push(p);
            distances.push(d.sqrt());
            means.extend_from_slice(self.means(p));
        }
        Ok(MatchedGroup {
            reference,
            members,
            means,
            distances,
        })
    }

    /// `V_i x` for the image this table was built from.
    pub fn group_matrix(&self, group: &MatchedGroup<T>) -> DMatrix<T> {
        let n = self.geom.patch_len();
        let ch = self.channels;
        let mut mat = DMatrix::zeros(n, ch * group.len());
        for (j, &p) in group.members.iter().enumerate() {
            let v = self.vector(p);
            for c in 0..ch {
                mat.column_mut(j * ch + c).copy_from_slice(&v[c * n..(c + 1) * n]);
            }
        }
        mat
    }

    /// `C_i x`: the first `depth` members stacked into one vector.
    pub fn group_vector_3d(&self, group: &MatchedGroup<T>) -> DVector<T> {
        let len = self.geom.patch_len() * self.channels;
        let l = self.geom.depth;
        let mut out = DVector::zeros(len * l);
        for (j, &p) in group.members.iter().take(l).enumerate() {
            out.as_mut_slice()[j * len..(j + 1) * len].copy_from_slice(self.vector(p));
        }
        out
    }
}

/// Block matching for a single reference patch.
pub fn block_match<T: Pixel>(img: &Image<T>, reference: PatchPos, geom: &PatchGeometry) -> Result<MatchedGroup<T>> {
    PatchTable::new(img, geom)?.block_match(reference)
}

/// Block matching for a set of references, in parallel; output order follows
/// `references`.
pub fn block_match_all<T: Pixel>(table: &PatchTable<T>, references: &[PatchPos]) -> Result<Vec<MatchedGroup<T>>> {
    use rayon::prelude::*;
    references.par_iter().map(|&r| table.block_match(r)).collect()
}

fn check_group_image<T: Pixel>(img: &Image<T>, group: &MatchedGroup<T>, geom: &PatchGeometry) -> Result<()> {
    if group.means.len() != group.len() * img.channels() {
        return Err(Error::DimensionMismatch(
            "group means do not match the image channel count".into(),
        ));
    }
    for &p in &group.members {
        geom.check_pos(p, img.height(), img.width())?;
    }
    Ok(())
}

/// Raw member patches of `img` as columns; the linear part of `V_i`.
pub fn gather_members<T: Pixel>(
    img: &Image<T>,
    group: &MatchedGroup<T>,
    geom: &PatchGeometry,
    count: usize,
) -> Result<DMatrix<T>> {
    let (h, w, ch) = img.dims();
    let n = geom.patch_len();
    let mut mat = DMatrix::zeros(n, ch * count);
    let mut offsets = Vec::with_capacity(n);
    for (j, &p) in group.members.iter().take(count).enumerate() {
        geom.check_pos(p, h, w)?;
        patch_offsets(p, geom.side, geom.boundary, h, w, &mut offsets);
        for c in 0..ch {
            let plane = img.plane(c);
            let mut col = mat.column_mut(j * ch + c);
            for (k, &o) in offsets.iter().enumerate() {
                col[k] = plane[o];
            }
        }
    }
    Ok(mat)
}

/// Adjoint of [`gather_members`]: deposits each column at its member patch.
pub fn scatter_members<T: Pixel>(
    buffer: &mut Image<T>,
    group: &MatchedGroup<T>,
    geom: &PatchGeometry,
    columns: &DMatrix<T>,
) -> Result<()> {
    let (h, w, ch) = buffer.dims();
    let n = geom.patch_len();
    if columns.nrows() != n || !columns.ncols().is_multiple_of(ch) || columns.ncols() / ch > group.len() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} block for a group of {} members",
            columns.nrows(),
            columns.ncols(),
            group.len()
        )));
    }
    let count = columns.ncols() / ch;
    let plane_len = h * w;
    let mut offsets = Vec::with_capacity(n);
    let data = buffer.as_mut_slice();
    for (j, &p) in group.members.iter().take(count).enumerate() {
        geom.check_pos(p, h, w)?;
        patch_offsets(p, geom.side, geom.boundary, h, w, &mut offsets);
        for c in 0..ch {
            let col = columns.column(j * ch + c);
            for (k, &o) in offsets.iter().enumerate() {
                data[c * plane_len + o] += col[k];
            }
        }
    }
    Ok(())
}

/// Subtracts (or with `sign = -1`, adds back) the group's frozen means.
/// Column `j` pairs with `means[j]` since both are member-major.
pub fn apply_means<T: Pixel>(mat: &mut DMatrix<T>, group: &MatchedGroup<T>, sign: f64) {
    for j in 0..mat.ncols() {
        let mean = group.means[j].scaled(sign);
        for v in mat.column_mut(j).iter_mut() {
            *v -= mean;
        }
    }
}

/// `V_i x` with the group's frozen means removed.
pub fn group_matrix<T: Pixel>(img: &Image<T>, group: &MatchedGroup<T>, geom: &PatchGeometry) -> Result<DMatrix<T>> {
    check_group_image(img, group, geom)?;
    let mut mat = gather_members(img, group, geom, group.len())?;
    apply_means(&mut mat, group, 1.0);
    Ok(mat)
}

/// `C_i x` with the group's frozen means removed.
pub fn group_vector_3d<T: Pixel>(img: &Image<T>, group: &MatchedGroup<T>, geom: &PatchGeometry) -> Result<DVector<T>> {
    check_group_image(img, group, geom)?;
    if geom.depth > group.len() {
        return Err(Error::InvalidConfig("group depth exceeds group size".into()));
    }
    let mut mat = gather_members(img, group, geom, geom.depth)?;
    apply_means(&mut mat, group, 1.0);
    Ok(DVector::from_column_slice(mat.as_slice()))
}

/// Adjoint of the 3D vectorization: splits a length `channels * n * l` vector
/// into member blocks and deposits them.
pub fn scatter_3d<T: Pixel>(
    buffer: &mut Image<T>,
    group: &MatchedGroup<T>,
    geom: &PatchGeometry,
    vector: &[T],
) -> Result<()> {
    let n = geom.patch_len();
    let cols = vector.len() / n;
    if !vector.len().is_multiple_of(n) {
        return Err(Error::DimensionMismatch(
            "3D vector length is not a multiple of n".into(),
        ));
    }
    let mat = DMatrix::from_column_slice(n, cols, vector);
    scatter_members(buffer, group, geom, &mat)
}

/// Removes each column's own mean: the linear, self-adjoint centering
/// projection applied inside `V_i`.
pub fn center_columns<T: Pixel>(mat: &DMatrix<T>) -> DMatrix<T> {
    let mut out = mat.clone();
    let inv = 1.0 / mat.nrows() as f64;
    for mut col in out.column_iter_mut() {
        let mean = col.iter().fold(T::default(), |a, &b| a + b).scaled(inv);
        for v in col.iter_mut() {
            *v -= mean;
        }
    }
    out
}
