//! Denoising (`A = I`): pixel-wise closed-form update, iterative
//! regularization and noise re-estimation.

use crate::engine::{Backend, SolverConfig, Thresholds, UpdateContext};
use crate::error::{Error, Result};
use crate::image::{Image, PatchGeometry};

pub const SIGMA_FLOOR: f64 = 0.5;
/// Weight of the denoised estimate in the mix; the noisy image gets `0.1`.
pub const DEFAULT_DELTA: f64 = 0.9;
pub const DEFAULT_PSI: f64 = 0.36;
pub const DEFAULT_WINDOW: usize = 30;

/// `{side, M, l, T}` for the given noise level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenoisePreset {
    pub side: usize,
    pub match_count: usize,
    pub depth: usize,
    pub iterations: usize,
}

impl DenoisePreset {
    pub fn for_sigma(sigma: f64) -> Self {
        if sigma <= 30.0 {
            DenoisePreset {
                side: 6,
                match_count: 70,
                depth: 8,
                iterations: 8,
            }
        } else {
            DenoisePreset {
                side: 7,
                match_count: 80,
                depth: 7,
                iterations: 10,
            }
        }
    }

    pub fn geometry(&self) -> PatchGeometry {
        PatchGeometry::new(self.side, self.match_count, self.depth, DEFAULT_WINDOW)
    }
}

/// Paper defaults for noise level `sigma`: preset geometry, `gamma_F = 0.1/sigma^2`.
pub fn denoise_config(sigma: f64) -> Result<SolverConfig> {
    check_sigma(sigma)?;
    let preset = DenoisePreset::for_sigma(sigma);
    let mut cfg = SolverConfig::new(preset.geometry(), preset.iterations);
    cfg.gamma_fidelity = 0.1 / (sigma * sigma);
    Ok(cfg)
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "noise level must be positive, got {sigma}"
        )));
    }
    Ok(())
}

/// `x_j = (gamma_F y_j + z_j) / (gamma_F + b_j)`.
pub fn denoise_image_update(b: &Image<f64>, z: &Image<f64>, y: &Image<f64>, gamma_f: f64) -> Result<Image<f64>> {
    y.check_same_dims(b)?;
    y.check_same_dims(z)?;
    if !(gamma_f > 0.0) {
        return Err(Error::InvalidConfig("fidelity weight must be positive".into()));
    }
    let data = y
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .zip(z.as_slice())
        .map(|((&y, &b), &z)| (gamma_f * y + z) / (gamma_f + b))
        .collect();
    Image::from_vec(y.height(), y.width(), y.channels(), data)
}

/// `delta x + (1 - delta) y`.
pub fn iterate_regularize(x: &Image<f64>, y: &Image<f64>, delta: f64) -> Result<Image<f64>> {
    x.check_same_dims(y)?;
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidConfig(format!("mixing weight {delta} outside [0, 1]")));
    }
    let data = x
        .as_slice()
        .iter()
        .zip(y.as_slice())
        .map(|(&x, &y)| delta * x + (1.0 - delta) * y)
        .collect();
    Image::from_vec(x.height(), x.width(), x.channels(), data)
}

/// `sqrt(max(floor^2, psi (sigma^2 - mean |y - x|^2)))`.
pub fn reestimate_sigma(y: &Image<f64>, x: &Image<f64>, sigma: f64, psi: f64) -> Result<f64> {
    y.check_same_dims(x)?;
    if !(psi > 0.0 && psi <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "compensation factor {psi} outside (0, 1]"
        )));
    }
    let removed = y
        .as_slice()
        .iter()
        .zip(x.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / y.as_slice().len() as f64;
    Ok(sigma_update(sigma, removed, psi))
}

fn sigma_update(sigma: f64, removed: f64, psi: f64) -> f64 {
    (psi * (sigma * sigma - removed)).max(SIGMA_FLOOR * SIGMA_FLOOR).sqrt()
}

/// `lambda = 1.2 sigma`, `theta = 0.8 sigma (sqrt(n) + sqrt(M))` with
/// `sigma` clamped to the floor. `match_columns` is `M` times the channel count.
pub fn denoise_thresholds(sigma: f64, n: usize, match_columns: usize) -> Thresholds {
    let s = sigma.max(SIGMA_FLOOR);
    Thresholds {
        lambda: 1.2 * s,
        theta: 0.8 * s * ((n as f64).sqrt() + (match_columns as f64).sqrt()),
    }
}

#[derive(Debug, Clone)]
pub struct DenoiseBackend {
    y: Image<f64>,
    sigma: f64,
    current_sigma: f64,
    pub delta: f64,
    pub psi: f64,
    sigma_history: Vec<f64>,
}

impl DenoiseBackend {
    pub fn new(y: Image<f64>, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        if y.as_slice().is_empty() {
            return Err(Error::EmptyInput("noisy image"));
        }
        Ok(DenoiseBackend {
            y,
            sigma,
            current_sigma: sigma,
            delta: DEFAULT_DELTA,
            psi: DEFAULT_PSI,
            sigma_history: vec![sigma],
        })
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_psi(mut self, psi: f64) -> Self {
        self.psi = psi;
        self
    }

    pub fn noisy(&self) -> &Image<f64> {
        &self.y
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Noise estimate entering the next iteration.
    pub fn current_sigma(&self) -> f64 {
        self.current_sigma
    }

    /// `sigma_0, sigma_1, ...`.
    pub fn sigma_history(&self) -> &[f64] {
        &self.sigma_history
    }
}

impl Backend<f64> for DenoiseBackend {
    fn name(&self) -> &'static str {
        "denoise"
    }

    fn initial_estimate(&self) -> Result<Image<f64>> {
        Ok(self.y.clone())
    }

    fn thresholds(&self, _iteration: usize, cfg: &SolverConfig, channels: usize) -> Thresholds {
        denoise_thresholds(
            self.current_sigma,
            cfg.geometry.patch_len(),
            channels * cfg.geometry.match_count,
        )
    }

    fn fidelity(&self, x: &Image<f64>) -> f64 {
        x.as_slice()
            .iter()
            .zip(self.y.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    fn update_image(&mut self, ctx: &UpdateContext<'_, f64>) -> Result<Image<f64>> {
        let terms = ctx.normal_terms();
        let mut x = denoise_image_update(&terms.diagonal, &terms.rhs, &self.y, ctx.config.gamma_fidelity)?;
        if !ctx.last {
            x = iterate_regularize(&x, &self.y, self.delta)?;
        }
        self.current_sigma = reestimate_sigma(&self.y, &x, self.sigma, self.psi)?;
        self.sigma_history.push(self.current_sigma);
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_split_at_thirty() {
        assert_eq!(DenoisePreset::for_sigma(30.0).side, 6);
        let high = DenoisePreset::for_sigma(50.0);
        assert_eq!(
            (high.side * high.side, high.match_count, high.depth, high.iterations),
            (49, 80, 7, 10)
        );
    }

    #[test]
    fn threshold_arithmetic() {
        let t = denoise_thresholds(10.0, 36, 70);
        assert!((t.lambda - 12.0).abs() < 1e-12);
        assert!((t.theta - 8.0 * (6.0 + 70f64.sqrt())).abs() < 1e-12);
        assert!((t.theta - 114.93).abs() < 0.01);
        let floor = denoise_thresholds(0.0, 36, 70);
        assert!((floor.lambda - 1.2 * SIGMA_FLOOR).abs() < 1e-12);
    }

    #[test]
    fn sigma_reestimation() {
        assert!((sigma_update(20.0, 300.0, 0.36) - 6.0).abs() < 1e-12);
        assert!((sigma_update(20.0, 0.0, 0.36) - (0.36f64 * 400.0).sqrt()).abs() < 1e-12);
        assert_eq!(sigma_update(20.0, 400.0, 0.36), SIGMA_FLOOR);
    }

    #[test]
    fn mixing_arithmetic() {
        let x = Image::filled(2, 2, 1, 0.0);
        let y = Image::filled(2, 2, 1, 255.0);
        let m = iterate_regularize(&x, &y, 0.1).unwrap();
        assert!(m.as_slice().iter().all(|&v| (v - 229.5).abs() < 1e-12));
        assert_eq!(iterate_regularize(&x, &y, 1.0).unwrap().as_slice(), x.as_slice());
        assert_eq!(iterate_regularize(&x, &y, 0.0).unwrap().as_slice(), y.as_slice());
    }

    #[test]
    fn zero_regularizer_returns_noisy() {
        let y = Image::from_fn(3, 3, 1, |r, c, _| (r * 3 + c) as f64);
        let zero = Image::zeros(3, 3, 1);
        let x = denoise_image_update(&zero, &zero, &y, 0.01).unwrap();
        for (a, b) in x.as_slice().iter().zip(y.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_sigma_rejected() {
        assert!(denoise_config(0.0).is_err());
        assert!(DenoiseBackend::new(Image::filled(2, 2, 1, 1.0), 0.0).is_err());
    }
}
