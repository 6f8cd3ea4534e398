//! Image recovery by jointly learning a unitary 3D sparsifying transform and
//! low-rank approximations of block-matched patch groups.
//!
//! The [`engine`] runs block coordinate descent: block matching, low-rank
//! approximation, sparse coding, transform update, then an application
//! specific closed-form image update from one of the backends:
//! [`denoise`], [`inpaint`] or [`mri`].

// `!(x >= 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod block_matching;
pub mod denoise;
pub mod engine;
pub mod error;
pub mod image;
pub mod inpaint;
pub mod io;
pub mod low_rank;
pub mod mri;
pub mod scalar;
pub mod transform;

pub use crate::block_matching::{block_match, group_matrix, group_vector_3d, MatchedGroup, PatchTable};
pub use crate::denoise::{DenoiseBackend, DenoisePreset};
pub use crate::engine::{
    objective, run, Backend, IterationRecord, ReconWorkspace, RunOutput, Solver, SolverConfig, Thresholds,
};
pub use crate::error::{Error, Result};
pub use crate::image::{deposit_patch, extract_patch, psnr, Boundary, Image, PatchGeometry, PatchPos};
pub use crate::inpaint::{InpaintBackend, PixelMask};
pub use crate::low_rank::{low_rank_approx, LowRankApproximant};
pub use crate::mri::{Fourier2d, KSpaceData, MaskKind, MriBackend, MriPreset};
pub use crate::scalar::Pixel;
pub use crate::transform::{hard_threshold, sparse_code, transform_update, SparseCode, Transform};
pub use num_complex::Complex64;
