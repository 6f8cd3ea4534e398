//! Pixel scalar abstraction shared by the real-valued (denoising, inpainting)
//! and complex-valued (MRI) code paths.

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;

/// A pixel value: `f64` for natural images, `Complex64` for MR images.
///
/// Everything that needs a transpose uses the conjugate transpose, so the
/// real case falls out as a special case.
pub trait Pixel: ComplexField<RealField = f64> + Copy + Default + Send + Sync + std::fmt::Debug + 'static {
    const IS_COMPLEX: bool;

    fn from_re(v: f64) -> Self;
    fn abs_sq(self) -> f64;
    fn conj_val(self) -> Self;
    fn scaled(self, s: f64) -> Self;
    fn finite(self) -> bool;

    fn abs_val(self) -> f64 {
        self.abs_sq().sqrt()
    }

    /// Dense product `a * b`.
    fn matmul(a: &DMatrix<Self>, b: &DMatrix<Self>) -> DMatrix<Self>;

    /// Thin SVD `a = u diag(s) v_t` with `s` non-increasing; `None` if the
    /// iteration fails to converge.
    fn thin_svd(a: &DMatrix<Self>) -> Option<ThinSvd<Self>>;
}

#[derive(Debug, Clone)]
pub struct ThinSvd<T> {
    pub u: DMatrix<T>,
    pub singular_values: Vec<f64>,
    pub v_t: DMatrix<T>,
}

fn faer_thin_svd<T>(a: &DMatrix<T>, real: impl Fn(T) -> f64) -> Option<ThinSvd<T>>
where
    T: faer::traits::ComplexField + Pixel,
{
    let (rows, cols) = a.shape();
    let m = faer::Mat::from_fn(rows, cols, |i, j| a[(i, j)]);
    let svd = m.thin_svd().ok()?;
    let (u, v, s) = (svd.U(), svd.V(), svd.S().column_vector());
    let k = rows.min(cols);
    Some(ThinSvd {
        u: DMatrix::from_fn(rows, k, |i, j| u[(i, j)]),
        singular_values: (0..k).map(|i| real(s[i])).collect(),
        v_t: DMatrix::from_fn(k, cols, |i, j| v[(j, i)].conj_val()),
    })
}

impl Pixel for f64 {
    const IS_COMPLEX: bool = false;

    #[inline]
    fn from_re(v: f64) -> Self {
        v
    }
    #[inline]
    fn abs_sq(self) -> f64 {
        self * self
    }
    #[inline]
    fn conj_val(self) -> Self {
        self
    }
    #[inline]
    fn scaled(self, s: f64) -> Self {
        self * s
    }
    #[inline]
    fn finite(self) -> bool {
        self.is_finite()
    }

    fn matmul(a: &DMatrix<Self>, b: &DMatrix<Self>) -> DMatrix<Self> {
        a * b
    }

    fn thin_svd(a: &DMatrix<Self>) -> Option<ThinSvd<Self>> {
        faer_thin_svd(a, |v| v)
    }
}

impl Pixel for Complex64 {
    const IS_COMPLEX: bool = true;

    #[inline]
    fn from_re(v: f64) -> Self {
        Complex64::new(v, 0.0)
    }
    #[inline]
    fn abs_sq(self) -> f64 {
        self.norm_sqr()
    }
    #[inline]
    fn conj_val(self) -> Self {
        self.conj()
    }
    #[inline]
    fn scaled(self, s: f64) -> Self {
        self * s
    }
    #[inline]
    fn finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    // nalgebra only dispatches f32/f64 to the blocked gemm kernels; split the
    // complex product into four real ones so large products stay fast.
    fn matmul(a: &DMatrix<Self>, b: &DMatrix<Self>) -> DMatrix<Self> {
        let ar = a.map(|v| v.re);
        let ai = a.map(|v| v.im);
        let br = b.map(|v| v.re);
        let bi = b.map(|v| v.im);
        let re = &ar * &br - &ai * &bi;
        let im = &ar * &bi + &ai * &br;
        re.zip_map(&im, Complex64::new)
    }

    fn thin_svd(a: &DMatrix<Self>) -> Option<ThinSvd<Self>> {
        faer_thin_svd(a, |v| v.re)
    }
}

/// Frobenius inner product `<a, b> = sum conj(a) b`.
pub fn inner<T: Pixel>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::default(), |acc, (&x, &y)| acc + x.conj_val() * y)
}

pub fn norm_sq<T: Pixel>(a: &[T]) -> f64 {
    a.iter().map(|v| v.abs_sq()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_matmul_matches_naive() {
        let a = DMatrix::from_fn(3, 4, |i, j| Complex64::new(i as f64 - j as f64, (i * j) as f64));
        let b = DMatrix::from_fn(4, 2, |i, j| Complex64::new(1.0 + j as f64, i as f64 * 0.5));
        let fast = Complex64::matmul(&a, &b);
        let naive = &a * &b;
        assert!((fast - naive).norm() < 1e-12);
    }

    #[test]
    fn inner_conjugates_left_argument() {
        let a = [Complex64::new(0.0, 1.0)];
        let b = [Complex64::new(0.0, 1.0)];
        assert_eq!(inner(&a, &b), Complex64::new(1.0, 0.0));
    }
}
