mod config;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use strollr::denoise::denoise_config;
use strollr::inpaint::inpaint_config;
use strollr::io::{read_image, read_kspace, read_mask, write_image, write_kspace, write_mask};
use strollr::mri::{default_theta0, make_mask, mri_config, simulate_kspace};
use strollr::transform::{write_transform, TransformEntry};
use strollr::{
    psnr, run, DenoiseBackend, DenoisePreset, Image, InpaintBackend, MaskKind, MriBackend, MriPreset, Pixel, PixelMask,
    RunOutput,
};

use config::{read_config, Overrides};
use manifest::{manifest_path, Manifest};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<strollr::Error> for CliError {
    fn from(e: strollr::Error) -> Self {
        use strollr::Error as E;
        match e {
            E::Io(_) | E::ImageCodec(_) | E::Format { .. } => CliError::Io(e.to_string()),
            E::NonFinite(_) | E::Singular(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Parser, Debug)]
#[command(name = "strollr", version, about = "Transform-learning and low-rank image recovery")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand. Precedence: presets < `--config` file < flags.
#[derive(Args, Debug)]
struct Common {
    /// `key = value` file of overrides.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for generated masks and simulated noise.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; falls back to STROLLR_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Fixed-order reductions (bit-identical for any thread count).
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    deterministic: Option<bool>,
    #[arg(long, global = true)]
    iterations: Option<usize>,
    /// Patch side in pixels.
    #[arg(long, global = true)]
    side: Option<usize>,
    /// Block-matched columns (M).
    #[arg(long, global = true)]
    match_count: Option<usize>,
    /// Patches per 3D group (l).
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Search window side in patch positions.
    #[arg(long, global = true)]
    window: Option<usize>,
    #[arg(long, global = true)]
    stride: Option<usize>,
    #[arg(long = "gamma-f", global = true)]
    gamma_fidelity: Option<f64>,
    #[arg(long = "gamma-s", global = true)]
    gamma_sparse: Option<f64>,
    #[arg(long = "gamma-lr", global = true)]
    gamma_low_rank: Option<f64>,
    /// Sparsity threshold.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Singular value threshold.
    #[arg(long, global = true)]
    theta: Option<f64>,
    /// Manifest path (default: `<output>.manifest`).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Write the learned transform here.
    #[arg(long, global = true)]
    save_transform: Option<PathBuf>,
    /// Log per-iteration diagnostics (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Remove additive Gaussian noise of known level.
    Denoise {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        output: PathBuf,
        /// Clean image; prints input and output PSNR.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Keep RGB channels instead of converting to grayscale.
        #[arg(long)]
        color: bool,
        /// Weight of the denoised estimate when mixing with the noisy input.
        #[arg(long)]
        delta: Option<f64>,
        /// Noise re-estimation compensation factor.
        #[arg(long)]
        psi: Option<f64>,
    },
    /// Fill missing pixels given an availability mask.
    Inpaint {
        #[arg(long)]
        input: PathBuf,
        /// Mask image, nonzero = available.
        #[arg(long, conflicts_with = "keep", required_unless_present = "keep")]
        mask: Option<PathBuf>,
        /// Generate a random mask keeping this fraction of pixels.
        #[arg(long)]
        keep: Option<f64>,
        /// Write the generated mask here.
        #[arg(long, requires = "keep")]
        save_mask: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        /// Noise level of the available pixels; absent or 0 selects the noiseless variant.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Reconstruct an MR image from undersampled k-space.
    Mri {
        /// STKS sample file.
        #[arg(long)]
        kspace: PathBuf,
        /// Sampling mask image (unshifted order, nonzero = sampled).
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value = "anatomical")]
        preset: MriPreset,
        #[arg(long)]
        theta0: Option<f64>,
        /// Reference magnitude image; prints zero-filled and output PSNR.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Simulate undersampled k-space from an image.
    MriSim {
        #[arg(long)]
        image: PathBuf,
        /// cartesian, random2d or pseudo_radial.
        #[arg(long, default_value = "random2d")]
        kind: MaskKind,
        /// Undersampling ratio p / q.
        #[arg(long)]
        ratio: f64,
        #[arg(long)]
        kspace_out: PathBuf,
        #[arg(long)]
        mask_out: PathBuf,
        /// Also write the zero-filled magnitude image.
        #[arg(long)]
        zero_filled_out: Option<PathBuf>,
    },
    /// Print the PSNR between two images ("inf" when identical).
    Psnr {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 255.0)]
        peak: f64,
    },
    /// Write a uniform random pixel mask.
    MakeMask {
        #[arg(long, required_unless_present = "like")]
        height: Option<usize>,
        #[arg(long, required_unless_present = "like")]
        width: Option<usize>,
        /// Take the dimensions from this image.
        #[arg(long, conflicts_with_all = ["height", "width"])]
        like: Option<PathBuf>,
        #[arg(long)]
        keep: f64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Add seeded i.i.d. Gaussian noise (for experiments).
    Noise {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        color: bool,
    },
}

fn overrides(common: &Common) -> Result<Overrides, CliError> {
    let file = match &common.config {
        Some(p) => read_config(p)?,
        None => Overrides::default(),
    };
    let flags = Overrides {
        iterations: common.iterations,
        side: common.side,
        match_count: common.match_count,
        depth: common.depth,
        window: common.window,
        stride: common.stride,
        gamma_fidelity: common.gamma_fidelity,
        gamma_sparse: common.gamma_sparse,
        gamma_low_rank: common.gamma_low_rank,
        lambda: common.lambda,
        theta: common.theta,
        threads: common.threads,
        deterministic: common.deterministic,
        seed: common.seed,
        ..Default::default()
    };
    let mut merged = file.merged(flags);
    if merged.threads.is_none() {
        if let Ok(v) = std::env::var("STROLLR_THREADS") {
            let n = v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("STROLLR_THREADS={v:?} is not a thread count")))?;
            merged.threads = Some(n);
        }
    }
    Ok(merged)
}

fn grayscale(img: Image<f64>) -> Image<f64> {
    if img.channels() != 3 {
        return img;
    }
    Image::from_fn(img.height(), img.width(), 1, |r, c, _| {
        0.299 * img.at(r, c, 0) + 0.587 * img.at(r, c, 1) + 0.114 * img.at(r, c, 2)
    })
}

fn load(path: &Path, color: bool) -> Result<Image<f64>, CliError> {
    let img = read_image(path)?;
    Ok(if color { img } else { grayscale(img) })
}

fn save_transform<T: Pixel + TransformEntry>(
    out: &RunOutput<T>,
    path: Option<&Path>,
    manifest: &mut Manifest,
) -> Result<(), CliError> {
    if let Some(p) = path {
        let mut f = std::fs::File::create(p).map_err(io_err(p))?;
        write_transform(&out.transform, &mut f)?;
        manifest.file("transform", p);
    }
    Ok(())
}

fn finish(manifest: &mut Manifest, output: &Path, explicit: Option<&Path>, started: Instant) -> Result<(), CliError> {
    manifest.file("output", output);
    manifest.set("wall_time_s", format!("{:.3}", started.elapsed().as_secs_f64()));
    let path = manifest_path(output, explicit);
    manifest.write(&path).map_err(io_err(&path))
}

fn print_psnr(label: &str, value: f64) {
    if value.is_infinite() {
        println!("{label} = inf");
    } else {
        println!("{label} = {value:.2}");
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let common = &cli.common;
    let o = overrides(common)?;
    let started = Instant::now();
    let explicit_manifest = common.manifest.as_deref();
    let seed = o.seed.unwrap_or(0);
    match &cli.command {
        Command::Denoise {
            input,
            sigma,
            output,
            reference,
            color,
            delta,
            psi,
        } => {
            let y = load(input, *color)?;
            let mut cfg = denoise_config(*sigma)?;
            o.apply(&mut cfg);
            let mut backend = DenoiseBackend::new(y.clone(), *sigma)?;
            if let Some(d) = delta.or(o.delta) {
                backend = backend.with_delta(d);
            }
            if let Some(p) = psi.or(o.psi) {
                backend = backend.with_psi(p);
            }
            let mut m = Manifest::new("denoise");
            m.file("input", input);
            m.set("sigma", sigma);
            let preset = DenoisePreset::for_sigma(*sigma);
            m.set(
                "preset",
                format!(
                    "{{{}, {}, {}, {}}}",
                    preset.side * preset.side,
                    preset.match_count,
                    preset.depth,
                    preset.iterations
                ),
            );
            m.set("delta", backend.delta);
            m.set("psi", backend.psi);
            m.set("channels", y.channels());
            m.config(&cfg);
            let out = run(backend, cfg)?;
            write_image(output, &out.image)?;
            m.records(&out.records);
            save_transform(&out, common.save_transform.as_deref(), &mut m)?;
            if let Some(r) = reference {
                let clean = load(r, *color)?;
                let before = psnr(&y, &clean, 255.0)?;
                let after = psnr(&out.image, &clean, 255.0)?;
                print_psnr("input_psnr_db", before);
                print_psnr("output_psnr_db", after);
                m.file("reference", r);
                m.set("input_psnr_db", before);
                m.set("output_psnr_db", after);
            }
            finish(&mut m, output, explicit_manifest, started)
        }
        Command::Inpaint {
            input,
            mask,
            keep,
            save_mask,
            output,
            sigma,
            reference,
        } => {
            let y = read_image(input)?;
            let mut m = Manifest::new("inpaint");
            m.file("input", input);
            let mask = match (mask, keep) {
                (Some(p), _) => {
                    m.file("mask", p);
                    read_mask(p)?
                }
                (None, Some(k)) => {
                    let generated = PixelMask::random(y.height(), y.width(), *k, seed)?;
                    if let Some(p) = save_mask {
                        write_mask(p, &generated)?;
                        m.file("mask", p);
                    }
                    m.set("mask_keep", k);
                    generated
                }
                (None, None) => return Err(CliError::Usage("either --mask or --keep is required".into())),
            };
            let noisy = sigma.is_some_and(|s| s > 0.0);
            let mut cfg = inpaint_config(*sigma)?;
            o.apply(&mut cfg);
            let mut backend = if noisy {
                InpaintBackend::noisy(y.clone(), mask.clone())?
            } else {
                InpaintBackend::noiseless(y.clone(), mask.clone())?
            };
            // The rank threshold follows lambda unless set explicitly.
            if let Some(l) = cfg.lambda.take() {
                backend = backend.with_lambda(l);
            }
            m.set("variant", if noisy { "noisy" } else { "noiseless" });
            m.set("sigma", sigma.unwrap_or(0.0));
            m.set("keep_ratio", mask.keep_ratio());
            m.set("mask_sha256", manifest::sha256_hex(&mask_bytes(&mask)));
            m.set("inpaint_lambda", backend.lambda());
            m.config(&cfg);
            let out = run(backend, cfg)?;
            write_image(output, &out.image)?;
            m.records(&out.records);
            save_transform(&out, common.save_transform.as_deref(), &mut m)?;
            if let Some(r) = reference {
                let clean = read_image(r)?;
                let after = psnr(&out.image, &clean, 255.0)?;
                print_psnr("output_psnr_db", after);
                m.file("reference", r);
                m.set("output_psnr_db", after);
            }
            finish(&mut m, output, explicit_manifest, started)
        }
        Command::Mri {
            kspace,
            mask,
            output,
            preset,
            theta0,
            reference,
        } => {
            let mask_img = read_mask(mask)?;
            let mut f = std::fs::File::open(kspace).map_err(io_err(kspace))?;
            let data = read_kspace(&mut f, &mask_img)?;
            let ratio = data.ratio();
            let theta0 = theta0.or(o.theta0).unwrap_or_else(|| default_theta0(*preset, ratio));
            let mut cfg = mri_config(*preset, ratio);
            cfg.theta = Some(theta0);
            cfg.lambda = Some(theta0 / 2.0);
            o.apply(&mut cfg);
            let mut m = Manifest::new("mri");
            m.file("kspace", kspace);
            m.file("mask", mask);
            m.set("preset", preset);
            m.set("ratio", ratio);
            m.set("theta0", theta0);
            m.config(&cfg);
            let backend = MriBackend::new(data, theta0)?;
            let zero_filled = backend
                .data()
                .zero_filled(backend.fourier())?
                .magnitude()
                .map(|v| v * 255.0);
            let out = run(backend, cfg)?;
            let magnitude = out.image.magnitude().map(|v| v * 255.0);
            write_image(output, &magnitude)?;
            m.records(&out.records);
            save_transform(&out, common.save_transform.as_deref(), &mut m)?;
            if let Some(r) = reference {
                let clean = load(r, false)?;
                let zf = psnr(&zero_filled, &clean, 255.0)?;
                let after = psnr(&magnitude, &clean, 255.0)?;
                print_psnr("zero_filled_psnr_db", zf);
                print_psnr("output_psnr_db", after);
                m.file("reference", r);
                m.set("zero_filled_psnr_db", zf);
                m.set("output_psnr_db", after);
            }
            finish(&mut m, output, explicit_manifest, started)
        }
        Command::MriSim {
            image,
            kind,
            ratio,
            kspace_out,
            mask_out,
            zero_filled_out,
        } => {
            let reference = load(image, false)?.map(|v| v / 255.0);
            let mask = make_mask(*kind, reference.height(), reference.width(), *ratio, seed)?;
            let data = simulate_kspace(&reference, &mask)?;
            let mut f = std::fs::File::create(kspace_out).map_err(io_err(kspace_out))?;
            write_kspace(&data, &mut f)?;
            write_mask(mask_out, &mask)?;
            let mut m = Manifest::new("mri-sim");
            m.file("image", image);
            m.set("kind", kind);
            m.set("requested_ratio", ratio);
            m.set("ratio", data.ratio());
            m.set("samples", data.samples.len());
            m.set("seed", seed);
            m.file("mask", mask_out);
            if let Some(p) = zero_filled_out {
                let fourier = strollr::Fourier2d::new(reference.height(), reference.width());
                write_image(p, &data.zero_filled(&fourier)?.magnitude().map(|v| v * 255.0))?;
                m.file("zero_filled", p);
            }
            finish(&mut m, kspace_out, explicit_manifest, started)
        }
        Command::Psnr { a, b, peak } => {
            let value = psnr(&read_image(a)?, &read_image(b)?, *peak)?;
            if value.is_infinite() {
                println!("inf");
            } else {
                println!("{value:.2}");
            }
            Ok(())
        }
        Command::MakeMask {
            height,
            width,
            like,
            keep,
            output,
        } => {
            let (h, w) = match like {
                Some(p) => {
                    let img = read_image(p)?;
                    (img.height(), img.width())
                }
                None => (height.unwrap_or(0), width.unwrap_or(0)),
            };
            let mask = PixelMask::random(h, w, *keep, seed)?;
            write_mask(output, &mask)?;
            let mut m = Manifest::new("make-mask");
            m.set("height", h);
            m.set("width", w);
            m.set("keep", keep);
            m.set("seed", seed);
            m.set("mask_sha256", manifest::sha256_hex(&mask_bytes(&mask)));
            finish(&mut m, output, explicit_manifest, started)
        }
        Command::Noise {
            input,
            sigma,
            output,
            color,
        } => {
            let clean = load(input, *color)?;
            let normal = Normal::new(0.0, *sigma)
                .map_err(|_| CliError::Usage(format!("noise level {sigma} must be non-negative")))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noisy = Image::from_vec(
                clean.height(),
                clean.width(),
                clean.channels(),
                clean.as_slice().iter().map(|v| v + normal.sample(&mut rng)).collect(),
            )?;
            write_image(output, &noisy)?;
            let mut m = Manifest::new("noise");
            m.file("input", input);
            m.set("sigma", sigma);
            m.set("seed", seed);
            finish(&mut m, output, explicit_manifest, started)
        }
    }
}

/// One byte per pixel, for hashing.
fn mask_bytes(mask: &PixelMask) -> Vec<u8> {
    mask.as_slice().iter().map(|&a| a as u8).collect()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("strollr: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
