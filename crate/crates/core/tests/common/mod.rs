#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::collections::HashMap;
use strollr::{Boundary, Complex64, Image, PatchGeometry, PatchPos, Pixel, ReconWorkspace, Transform};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Piecewise-constant test image: background, rectangles, a disc and a
/// diagonal band, values in [0, 255].
pub fn phantom(size: usize) -> Image<f64> {
    let s = size as f64;
    Image::from_fn(size, size, 1, |r, c, _| {
        let (y, x) = (r as f64 / s, c as f64 / s);
        let mut v = 60.0;
        if (0.1..0.45).contains(&y) && (0.1..0.55).contains(&x) {
            v = 200.0;
        }
        if (y - 0.68).powi(2) + (x - 0.65).powi(2) < 0.05 {
            v = 140.0;
        }
        if (0.6..0.9).contains(&y) && (0.12..0.3).contains(&x) {
            v = 30.0;
        }
        if (x - y).abs() < 0.04 && y < 0.5 {
            v = 240.0;
        }
        v
    })
}

pub fn add_noise(img: &Image<f64>, sigma: f64, seed: u64) -> Image<f64> {
    let mut r = rng(seed);
    let normal = Normal::new(0.0, sigma).unwrap();
    let data = img.as_slice().iter().map(|v| v + normal.sample(&mut r)).collect();
    Image::from_vec(img.height(), img.width(), img.channels(), data).unwrap()
}

pub fn random_image(h: usize, w: usize, ch: usize, seed: u64) -> Image<f64> {
    let mut r = rng(seed);
    Image::from_fn(h, w, ch, |_, _, _| r.random_range(0.0..255.0))
}

pub fn random_complex_image(h: usize, w: usize, seed: u64) -> Image<Complex64> {
    let mut r = rng(seed);
    Image::from_fn(h, w, 1, |_, _, _| {
        Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
    })
}

/// Plane offsets of a patch by direct index arithmetic, column-major
/// within the patch.
pub fn oracle_offsets(pos: PatchPos, geom: &PatchGeometry, h: usize, w: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for dc in 0..geom.side {
        for dr in 0..geom.side {
            let (r, c) = match geom.boundary {
                Boundary::Interior => (pos.row + dr, pos.col + dc),
                Boundary::Wrap => ((pos.row + dr) % h, (pos.col + dc) % w),
            };
            out.push(r * w + c);
        }
    }
    out
}

/// Dense 0/1 selection matrix of one patch (one channel).
pub fn selection_matrix(pos: PatchPos, geom: &PatchGeometry, h: usize, w: usize) -> DMatrix<f64> {
    let offs = oracle_offsets(pos, geom, h, w);
    let mut m = DMatrix::zeros(offs.len(), h * w);
    for (k, &o) in offs.iter().enumerate() {
        m[(k, o)] = 1.0;
    }
    m
}

/// Unitary DFT matrix of a row-major `h x w` image.
pub fn dft_matrix(h: usize, w: usize) -> DMatrix<Complex64> {
    let p = h * w;
    let scale = 1.0 / (p as f64).sqrt();
    DMatrix::from_fn(p, p, |f, x| {
        let (fr, fc) = (f / w, f % w);
        let (xr, xc) = (x / w, x % w);
        let phase = -2.0 * std::f64::consts::PI * ((fr * xr) as f64 / h as f64 + (fc * xc) as f64 / w as f64);
        Complex64::from_polar(scale, phase)
    })
}

pub fn random_unitary_real(dim: usize, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| r.random_range(-1.0..1.0));
    a.qr().q()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn relative_residual(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// Per-group mean-restored approximants rebuilt from the workspace: the
/// sparse block `W^H alpha_i` as `n x l` and the low-rank block `n x M`.
pub fn approximants<T: Pixel>(ws: &ReconWorkspace<T>, w: &Transform<T>) -> Vec<(DMatrix<T>, DMatrix<T>)> {
    let n = ws.geometry.patch_len();
    (0..ws.groups.len())
        .map(|i| {
            let g = &ws.groups[i];
            let recon = w.apply_adjoint(&DVector::from_vec(ws.codes.dense_column(i)));
            let mut sparse = DMatrix::from_column_slice(n, recon.len() / n, recon.as_slice());
            let mut low = ws.low_rank[i].to_matrix();
            for (j, mut col) in sparse.column_iter_mut().enumerate() {
                col.iter_mut().for_each(|v| *v += g.means[j]);
            }
            for (j, mut col) in low.column_iter_mut().enumerate() {
                col.iter_mut().for_each(|v| *v += g.means[j]);
            }
            (sparse, low)
        })
        .collect()
}

/// Dense `(sum gamma P^T P, sum gamma P^T block)` of the regularizer terms.
pub fn dense_regularizer(
    ws: &ReconWorkspace<f64>,
    w: &Transform<f64>,
    gs: f64,
    glr: f64,
) -> (DMatrix<f64>, DVector<f64>) {
    let (h, wd) = (ws.height, ws.width);
    let p = h * wd;
    let mut a = DMatrix::zeros(p, p);
    let mut rhs = DVector::zeros(p);
    for (g, (sparse, low)) in ws.groups.iter().zip(approximants(ws, w)) {
        for (j, &pos) in g.members.iter().enumerate() {
            let sel = selection_matrix(pos, &ws.geometry, h, wd);
            let st = sel.transpose();
            a += &st * &sel * glr;
            rhs += &st * low.column(j) * glr;
            if j < sparse.ncols() {
                a += &st * &sel * gs;
                rhs += &st * sparse.column(j) * gs;
            }
        }
    }
    (a, rhs)
}

/// Appearance-weighted averages by hashing patch positions.
pub fn averaging_oracle(
    ws: &ReconWorkspace<Complex64>,
    w: &Transform<Complex64>,
) -> HashMap<PatchPos, (Vec<Complex64>, usize, Vec<Complex64>, usize)> {
    let n = ws.geometry.patch_len();
    let mut acc: HashMap<PatchPos, (Vec<Complex64>, usize, Vec<Complex64>, usize)> = HashMap::new();
    for (g, (sparse, low)) in ws.groups.iter().zip(approximants(ws, w)) {
        for (j, &p) in g.members.iter().enumerate() {
            let e = acc
                .entry(p)
                .or_insert_with(|| (vec![Complex64::default(); n], 0, vec![Complex64::default(); n], 0));
            for k in 0..n {
                e.2[k] += low[(k, j)];
            }
            e.3 += 1;
            if j < sparse.ncols() {
                for k in 0..n {
                    e.0[k] += sparse[(k, j)];
                }
                e.1 += 1;
            }
        }
    }
    for e in acc.values_mut() {
        e.0.iter_mut().for_each(|v| *v /= e.1 as f64);
        e.2.iter_mut().for_each(|v| *v /= e.3 as f64);
    }
    acc
}

/// Dense MRI normal equation `(F_g^H F_g + sum R_k^* R_k (gs + glr)) x =
/// F_g^H y + sum R_k^* (gs u_k + glr d_k)` built from explicit matrices.
pub fn dense_mri_system(
    ws: &ReconWorkspace<Complex64>,
    w: &Transform<Complex64>,
    data: &strollr::KSpaceData,
    gs: f64,
    glr: f64,
) -> (DMatrix<Complex64>, DVector<Complex64>) {
    let (h, wd) = data.dims();
    let p = h * wd;
    let f = dft_matrix(h, wd);
    let rows: Vec<usize> = (0..p).filter(|&k| data.mask.as_slice()[k]).collect();
    let fg = DMatrix::from_fn(rows.len(), p, |i, j| f[(rows[i], j)]);
    let mut a = fg.adjoint() * &fg;
    let mut rhs = fg.adjoint() * DVector::from_column_slice(&data.samples);
    for (pos, (u, _, d, _)) in &averaging_oracle(ws, w) {
        let sel = selection_matrix(*pos, &ws.geometry, h, wd).map(Complex64::from);
        let st = sel.transpose();
        a += &st * &sel * Complex64::from(gs + glr);
        let block = DVector::from_fn(u.len(), |k, _| u[k] * gs + d[k] * glr);
        rhs += &st * block;
    }
    (a, rhs)
}
