//! Square unitary sparsifying transform: exact sparse coding by hard
//! thresholding, closed-form transform update, DCT initialization and a flat
//! binary serialization.

use crate::error::{Error, Result};
use crate::scalar::Pixel;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::io::{Read, Write};

#[derive(Debug, Clone, PartialEq)]
pub struct Transform<T: Pixel> {
    matrix: DMatrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode<T: Pixel> {
    pub coefficients: DVector<T>,
    pub nnz: usize,
}

/// Zeroes entries whose modulus is strictly below `threshold`. Returns the
/// number of surviving entries.
pub fn hard_threshold<T: Pixel>(values: &mut [T], threshold: f64) -> usize {
    let t2 = threshold * threshold;
    let mut nnz = 0;
    for v in values.iter_mut() {
        if v.abs_sq() < t2 {
            *v = T::default();
        } else if v.abs_sq() > 0.0 {
            nnz += 1;
        }
    }
    nnz
}

impl<T: Pixel> Transform<T> {
    pub fn identity(dim: usize) -> Self {
        Transform {
            matrix: DMatrix::identity(dim, dim),
        }
    }

    /// Wraps a matrix, checking that it is square and unitary.
    pub fn from_matrix(matrix: DMatrix<T>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::DimensionMismatch(
                "transform must be a non-empty square matrix".into(),
            ));
        }
        let t = Transform { matrix };
        let err = t.unitarity_error();
        if err > 1e-8 * t.dim() as f64 {
            return Err(Error::InvalidConfig(format!(
                "transform is not unitary (error {err:.3e})"
            )));
        }
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    /// `||W^H W - I||_F`.
    pub fn unitarity_error(&self) -> f64 {
        let gram = T::matmul(&self.matrix.adjoint(), &self.matrix);
        (gram - DMatrix::<T>::identity(self.dim(), self.dim())).norm()
    }

    pub fn apply(&self, u: &DVector<T>) -> DVector<T> {
        &self.matrix * u
    }

    pub fn apply_adjoint(&self, alpha: &DVector<T>) -> DVector<T> {
        self.matrix.ad_mul(alpha)
    }

    /// Transforms every column of `blocks` at once.
    pub fn apply_columns(&self, blocks: &DMatrix<T>) -> DMatrix<T> {
        T::matmul(&self.matrix, blocks)
    }

    pub fn apply_adjoint_columns(&self, codes: &DMatrix<T>) -> DMatrix<T> {
        T::matmul(&self.matrix.adjoint(), codes)
    }
}

/// `H_lambda(W u)`, the exact minimizer of `||W u - a||^2 + lambda^2 ||a||_0`.
pub fn sparse_code<T: Pixel>(w: &Transform<T>, u: &DVector<T>, lambda: f64) -> Result<SparseCode<T>> {
    if u.len() != w.dim() {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} for a {}-dimensional transform",
            u.len(),
            w.dim()
        )));
    }
    let mut coefficients = w.apply(u);
    let nnz = hard_threshold(coefficients.as_mut_slice(), lambda);
    Ok(SparseCode { coefficients, nnz })
}

/// Codes every column of `blocks`; returns the code matrix and per-column
/// nonzero counts.
pub fn sparse_code_columns<T: Pixel>(
    w: &Transform<T>,
    blocks: &DMatrix<T>,
    lambda: f64,
) -> Result<(DMatrix<T>, Vec<usize>)> {
    if blocks.nrows() != w.dim() {
        return Err(Error::DimensionMismatch(format!(
            "blocks of length {} for a {}-dimensional transform",
            blocks.nrows(),
            w.dim()
        )));
    }
    let mut codes = w.apply_columns(blocks);
    let nnz = codes
        .column_iter_mut()
        .map(|mut col| hard_threshold(col.as_mut_slice(), lambda))
        .collect();
    Ok((codes, nnz))
}

/// Unitary `W` minimizing `sum ||W u_i - a_i||^2` from `K = sum u_i a_i^H`.
pub fn transform_from_correlation<T: Pixel>(k: DMatrix<T>) -> Result<Transform<T>> {
    if !k.is_square() || k.nrows() == 0 {
        return Err(Error::DimensionMismatch("correlation matrix must be square".into()));
    }
    if k.iter().any(|v| !v.finite()) {
        return Err(Error::NonFinite("transform correlation matrix"));
    }
    let dim = k.nrows();
    // K = S Sigma G^H  =>  W = G S^H = (S G^H)^H.
    // The Householder-based SVD yields complete orthonormal factors even when
    // K is rank deficient, so W stays unitary; K = 0 gives W = I.
    let svd = k.svd(true, true);
    let s = svd.u.expect("left singular vectors requested");
    let g_h = svd.v_t.expect("right singular vectors requested");
    let matrix = T::matmul(&s, &g_h).adjoint();
    debug_assert_eq!(matrix.shape(), (dim, dim));
    Ok(Transform { matrix })
}

/// Transform update from `(u_i, a_i)` pairs.
pub fn transform_update<T: Pixel>(pairs: &[(DVector<T>, SparseCode<T>)]) -> Result<Transform<T>> {
    let first = pairs.first().ok_or(Error::EmptyInput("transform update pairs"))?;
    let dim = first.0.len();
    let mut k = DMatrix::<T>::zeros(dim, dim);
    for (u, code) in pairs {
        if u.len() != dim || code.coefficients.len() != dim {
            return Err(Error::DimensionMismatch("inconsistent pair dimensions".into()));
        }
        k.ger(T::one(), u, &code.coefficients.conjugate(), T::one());
    }
    transform_from_correlation(k)
}

/// Transform update from column-stacked blocks and codes (`K = U A^H`).
pub fn transform_update_columns<T: Pixel>(blocks: &DMatrix<T>, codes: &DMatrix<T>) -> Result<Transform<T>> {
    if blocks.ncols() == 0 {
        return Err(Error::EmptyInput("transform update blocks"));
    }
    if blocks.shape() != codes.shape() {
        return Err(Error::DimensionMismatch("blocks and codes differ in shape".into()));
    }
    transform_from_correlation(T::matmul(blocks, &codes.adjoint()))
}

/// Orthonormal 1D DCT-II matrix; row `k` is the `k`-th basis function.
pub fn dct_matrix(len: usize) -> DMatrix<f64> {
    DMatrix::from_fn(len, len, |k, i| {
        let scale = if k == 0 {
            (1.0 / len as f64).sqrt()
        } else {
            (2.0 / len as f64).sqrt()
        };
        scale * (PI * (2 * i + 1) as f64 * k as f64 / (2 * len) as f64).cos()
    })
}

/// Separable DCT over `(patch rows, patch cols, channels, depth)`, fastest axis
/// first, matching the layout of the stacked 3D group vector. With one
/// channel this is the `side x side x depth` 3D DCT.
pub fn dct_init<T: Pixel>(side: usize, channels: usize, depth: usize) -> Result<Transform<T>> {
    if side == 0 || channels == 0 || depth == 0 {
        return Err(Error::InvalidConfig("DCT dimensions must be positive".into()));
    }
    let row_axis = dct_matrix(side);
    let kron = dct_matrix(depth)
        .kronecker(&dct_matrix(channels))
        .kronecker(&row_axis)
        .kronecker(&row_axis);
    Ok(Transform {
        matrix: kron.map(T::from_re),
    })
}

/// The `side x side x depth` 3D DCT.
pub fn dct3_init<T: Pixel>(side: usize, depth: usize) -> Result<Transform<T>> {
    dct_init(side, 1, depth)
}

const TRANSFORM_MAGIC: &[u8; 4] = b"STWT";
const KIND_REAL: u32 = 0;
const KIND_COMPLEX: u32 = 1;

/// Serializes as `"STWT" | u32 dim | u32 kind | u32 reserved` (little-endian)
/// followed by the row-major entries as f64 (complex: re, im pairs).
pub fn write_transform<T: Pixel + TransformEntry, W: Write>(w: &Transform<T>, out: &mut W) -> Result<()> {
    let dim = w.dim() as u32;
    out.write_all(TRANSFORM_MAGIC)?;
    out.write_all(&dim.to_le_bytes())?;
    out.write_all(&(if T::IS_COMPLEX { KIND_COMPLEX } else { KIND_REAL }).to_le_bytes())?;
    out.write_all(&0u32.to_le_bytes())?;
    for r in 0..w.dim() {
        for c in 0..w.dim() {
            w.matrix[(r, c)].write_entry(out)?;
        }
    }
    Ok(())
}

pub fn read_transform<T: Pixel + TransformEntry, R: Read>(input: &mut R) -> Result<Transform<T>> {
    let mut header = [0u8; 16];
    input.read_exact(&mut header).map_err(|_| Error::Format {
        what: "transform file",
        offset: 0,
        message: "truncated header".into(),
    })?;
    if &header[0..4] != TRANSFORM_MAGIC {
        return Err(Error::Format {
            what: "transform file",
            offset: 0,
            message: "bad magic".into(),
        });
    }
    let dim = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let kind = u32::from_le_bytes(header[8..12].try_into().unwrap());
    let want = if T::IS_COMPLEX { KIND_COMPLEX } else { KIND_REAL };
    if kind != want {
        return Err(Error::Format {
            what: "transform file",
            offset: 8,
            message: format!("scalar kind {kind}, expected {want}"),
        });
    }
    let mut matrix = DMatrix::<T>::zeros(dim, dim);
    let entry = if T::IS_COMPLEX { 16 } else { 8 };
    for r in 0..dim {
        for c in 0..dim {
            let offset = 16 + (r * dim + c) * entry;
            matrix[(r, c)] = T::read_entry(input).map_err(|_| Error::Format {
                what: "transform file",
                offset,
                message: "truncated payload".into(),
            })?;
        }
    }
    Transform::from_matrix(matrix)
}

/// Little-endian on-disk scalar encoding.
pub trait TransformEntry: Sized {
    fn write_entry<W: Write>(&self, out: &mut W) -> std::io::Result<()>;
    fn read_entry<R: Read>(input: &mut R) -> std::io::Result<Self>;
}

fn read_f64<R: Read>(input: &mut R) -> std::io::Result<f64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

impl TransformEntry for f64 {
    fn write_entry<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        out.write_all(&self.to_le_bytes())
    }
    fn read_entry<R: Read>(input: &mut R) -> std::io::Result<Self> {
        read_f64(input)
    }
}

impl TransformEntry for Complex64 {
    fn write_entry<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        out.write_all(&self.re.to_le_bytes())?;
        out.write_all(&self.im.to_le_bytes())
    }
    fn read_entry<R: Read>(input: &mut R) -> std::io::Result<Self> {
        let re = read_f64(input)?;
        let im = read_f64(input)?;
        Ok(Complex64::new(re, im))
    }
}
