//! Block coordinate descent over the joint objective: block matching, then
//! (i) low-rank approximation, (ii) sparse coding, (iii) transform update and
//! (iv) an application-specific image update supplied by a [`Backend`].
//!
//! Groups (member positions and removed means) are frozen for the whole
//! iteration, which makes each of the four steps an exact block minimizer of
//! [`objective`].

use crate::block_matching::{block_match_all, group_matrix, group_vector_3d, MatchedGroup, PatchTable};
use crate::error::{Error, Result};
use crate::image::{patch_offsets, Image, PatchGeometry, PatchPos};
use crate::low_rank::{low_rank_factors, LowRankFactors};
use crate::scalar::Pixel;
use crate::transform::{dct_init, hard_threshold, transform_from_correlation, Transform};
use nalgebra::DMatrix;
use rayon::prelude::*;
use std::ops::Range;
use std::time::{Duration, Instant};

/// Columns processed per dense transform product.
const CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub gamma_fidelity: f64,
    pub gamma_sparse: f64,
    pub gamma_low_rank: f64,
    pub geometry: PatchGeometry,
    pub iterations: usize,
    /// Fixed thresholds overriding the backend schedule.
    pub lambda: Option<f64>,
    pub theta: Option<f64>,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    /// Fixed-order reductions, bit-identical output for any thread count.
    pub deterministic: bool,
    pub seed: u64,
    /// Evaluate the objective after every iteration (costly, diagnostics only).
    pub track_objective: bool,
}

impl SolverConfig {
    pub fn new(geometry: PatchGeometry, iterations: usize) -> Self {
        SolverConfig {
            gamma_fidelity: 1.0,
            gamma_sparse: 1.0,
            gamma_low_rank: 1.0,
            geometry,
            iterations,
            lambda: None,
            theta: None,
            threads: None,
            deterministic: true,
            seed: 0,
            track_objective: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        let weights = [self.gamma_fidelity, self.gamma_sparse, self.gamma_low_rank];
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidConfig("weights must be finite and non-negative".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("at least one iteration is required".into()));
        }
        for t in [self.lambda, self.theta].into_iter().flatten() {
            if !(t >= 0.0) {
                return Err(Error::InvalidConfig("thresholds must be non-negative".into()));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidConfig("thread count must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Sparse-code threshold.
    pub lambda: f64,
    /// Singular-value threshold.
    pub theta: f64,
}

/// Sparse code vectors stored column-compressed.
#[derive(Debug, Clone, Default)]
pub struct SparseColumns<T> {
    dim: usize,
    col_ptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<T>,
}

impl<T: Pixel> SparseColumns<T> {
    pub fn new(dim: usize) -> Self {
        SparseColumns {
            dim,
            col_ptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// `count` all-zero columns.
    pub fn zeros(dim: usize, count: usize) -> Self {
        SparseColumns {
            dim,
            col_ptr: vec![0; count + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ncols(&self) -> usize {
        self.col_ptr.len() - 1
    }

    pub fn push_dense(&mut self, column: &[T]) {
        debug_assert_eq!(column.len(), self.dim);
        for (i, &v) in column.iter().enumerate() {
            if v.abs_sq() > 0.0 {
                self.indices.push(i as u32);
                self.values.push(v);
            }
        }
        self.col_ptr.push(self.indices.len());
    }

    pub fn nnz(&self, col: usize) -> usize {
        self.col_ptr[col + 1] - self.col_ptr[col]
    }

    pub fn column(&self, col: usize) -> (&[u32], &[T]) {
        let r = self.col_ptr[col]..self.col_ptr[col + 1];
        (&self.indices[r.clone()], &self.values[r])
    }

    pub fn dense_column(&self, col: usize) -> Vec<T> {
        let mut out = vec![T::default(); self.dim];
        let (idx, vals) = self.column(col);
        for (&i, &v) in idx.iter().zip(vals) {
            out[i as usize] = v;
        }
        out
    }

    pub fn dense_range(&self, range: Range<usize>) -> DMatrix<T> {
        let mut out = DMatrix::zeros(self.dim, range.len());
        for (k, col) in range.enumerate() {
            let (idx, vals) = self.column(col);
            for (&i, &v) in idx.iter().zip(vals) {
                out[(i as usize, k)] = v;
            }
        }
        out
    }
}

/// State shared between the learning steps and the image update.
#[derive(Debug, Clone)]
pub struct ReconWorkspace<T: Pixel> {
    pub geometry: PatchGeometry,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub thresholds: Thresholds,
    pub groups: Vec<MatchedGroup<T>>,
    /// `D_i` with means removed.
    pub low_rank: Vec<LowRankFactors<T>>,
    /// `alpha_i`.
    pub codes: SparseColumns<T>,
}

impl<T: Pixel> ReconWorkspace<T> {
    /// Length of a stacked 3D group vector.
    pub fn block_len(&self) -> usize {
        self.geometry.patch_len() * self.channels * self.geometry.depth
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }
}

/// Mean-restored approximants of one group, ready to deposit.
pub struct GroupContribution<T: Pixel> {
    /// `D_i` plus means; `n x (channels * M)`.
    pub low_rank: DMatrix<T>,
    /// `W^H alpha_i` plus means, reshaped to `n x (channels * l)`.
    pub sparse: DMatrix<T>,
}

fn restore_means<T: Pixel>(mat: &mut DMatrix<T>, group: &MatchedGroup<T>) {
    for (j, mut col) in mat.column_iter_mut().enumerate() {
        let mean = group.means[j];
        for v in col.iter_mut() {
            *v += mean;
        }
    }
}

/// Calls `visit` for every group in index order with its mean-restored
/// approximants. Dense products run in parallel per chunk.
pub fn for_each_contribution<T: Pixel>(
    ws: &ReconWorkspace<T>,
    transform: &Transform<T>,
    mut visit: impl FnMut(usize, &MatchedGroup<T>, &GroupContribution<T>),
) {
    let n = ws.geometry.patch_len();
    let total = ws.group_count();
    let mut start = 0;
    while start < total {
        let range = start..(start + CHUNK).min(total);
        let recon = transform.apply_adjoint_columns(&ws.codes.dense_range(range.clone()));
        let contributions: Vec<GroupContribution<T>> = range
            .clone()
            .into_par_iter()
            .map(|i| {
                let group = &ws.groups[i];
                let mut low_rank = ws.low_rank[i].to_matrix();
                restore_means(&mut low_rank, group);
                let col = recon.column(i - range.start);
                let mut sparse = DMatrix::from_column_slice(n, col.len() / n, col.as_slice());
                restore_means(&mut sparse, group);
                GroupContribution { low_rank, sparse }
            })
            .collect();
        for (k, c) in contributions.iter().enumerate() {
            visit(range.start + k, &ws.groups[range.start + k], c);
        }
        start = range.end;
    }
}

/// Regularizer side of the normal equation: `b` holds the diagonal
/// (`gamma_S` times 3D-group coverage plus `gamma_LR` times BM coverage) and
/// `z` the weighted deposits of the mean-restored approximants. Fidelity
/// terms are added by the backend.
#[derive(Debug, Clone)]
pub struct NormalTerms<T: Pixel> {
    pub diagonal: Image<f64>,
    pub rhs: Image<T>,
}

fn deposit_block<T: Pixel>(
    diag: &mut [f64],
    rhs: &mut [T],
    members: &[PatchPos],
    block: &DMatrix<T>,
    weight: f64,
    ws: &ReconWorkspace<T>,
    offsets: &mut Vec<usize>,
) {
    let (h, w, ch) = (ws.height, ws.width, ws.channels);
    let plane = h * w;
    let geom = &ws.geometry;
    for (j, &p) in members.iter().take(block.ncols() / ch).enumerate() {
        patch_offsets(p, geom.side, geom.boundary, h, w, offsets);
        for c in 0..ch {
            let col = block.column(j * ch + c);
            for (k, &o) in offsets.iter().enumerate() {
                rhs[c * plane + o] += col[k].scaled(weight);
                diag[c * plane + o] += weight;
            }
        }
    }
}

pub fn assemble_normal_terms<T: Pixel>(
    ws: &ReconWorkspace<T>,
    transform: &Transform<T>,
    gamma_sparse: f64,
    gamma_low_rank: f64,
    deterministic: bool,
) -> NormalTerms<T> {
    let mut diagonal = Image::<f64>::zeros(ws.height, ws.width, ws.channels);
    let mut rhs = Image::<T>::zeros(ws.height, ws.width, ws.channels);
    if deterministic {
        let mut offsets = Vec::new();
        let (d, r) = (diagonal.as_mut_slice(), rhs.as_mut_slice());
        for_each_contribution(ws, transform, |_, group, c| {
            deposit_block(d, r, &group.members, &c.sparse, gamma_sparse, ws, &mut offsets);
            deposit_block(d, r, &group.members, &c.low_rank, gamma_low_rank, ws, &mut offsets);
        });
    } else {
        // Per-worker buffers reduced in scheduling order.
        let len = diagonal.as_slice().len();
        let n = ws.geometry.patch_len();
        let (d, r) = (0..ws.group_count())
            .into_par_iter()
            .fold(
                || (vec![0.0; len], vec![T::default(); len], Vec::new()),
                |(mut d, mut r, mut offsets), i| {
                    let group = &ws.groups[i];
                    let mut low_rank = ws.low_rank[i].to_matrix();
                    restore_means(&mut low_rank, group);
                    let recon = transform
                        .matrix()
                        .ad_mul(&nalgebra::DVector::from_vec(ws.codes.dense_column(i)));
                    let mut sparse = DMatrix::from_column_slice(n, recon.len() / n, recon.as_slice());
                    restore_means(&mut sparse, group);
                    deposit_block(&mut d, &mut r, &group.members, &sparse, gamma_sparse, ws, &mut offsets);
                    deposit_block(
                        &mut d,
                        &mut r,
                        &group.members,
                        &low_rank,
                        gamma_low_rank,
                        ws,
                        &mut offsets,
                    );
                    (d, r, offsets)
                },
            )
            .map(|(d, r, _)| (d, r))
            .reduce(
                || (vec![0.0; len], vec![T::default(); len]),
                |(mut d1, mut r1), (d2, r2)| {
                    d1.iter_mut().zip(&d2).for_each(|(a, b)| *a += b);
                    r1.iter_mut().zip(&r2).for_each(|(a, &b)| *a += b);
                    (d1, r1)
                },
            );
        diagonal.as_mut_slice().copy_from_slice(&d);
        rhs.as_mut_slice().copy_from_slice(&r);
    }
    NormalTerms { diagonal, rhs }
}

/// Application-specific pieces: measurement model, initialization,
/// threshold schedule and the closed-form image update.
pub trait Backend<T: Pixel>: Send {
    fn name(&self) -> &'static str;

    fn initial_estimate(&self) -> Result<Image<T>>;

    /// Thresholds for iteration `iteration` (1-based).
    fn thresholds(&self, iteration: usize, cfg: &SolverConfig, channels: usize) -> Thresholds;

    /// `||A x - y||^2`, without the fidelity weight. Hard-constrained
    /// backends return 0 for feasible `x`.
    fn fidelity(&self, x: &Image<T>) -> f64;

    /// Step (iv).
    fn update_image(&mut self, ctx: &UpdateContext<'_, T>) -> Result<Image<T>>;
}

pub struct UpdateContext<'a, T: Pixel> {
    pub iteration: usize,
    pub last: bool,
    pub config: &'a SolverConfig,
    pub workspace: &'a ReconWorkspace<T>,
    pub transform: &'a Transform<T>,
    pub current: &'a Image<T>,
}

impl<T: Pixel> UpdateContext<'_, T> {
    pub fn normal_terms(&self) -> NormalTerms<T> {
        assemble_normal_terms(
            self.workspace,
            self.transform,
            self.config.gamma_sparse,
            self.config.gamma_low_rank,
            self.config.deterministic,
        )
    }
}

/// Full objective for the current variables; used for diagnostics and
/// tests. Patches are re-extracted from `x` through the frozen groups.
pub fn objective<T: Pixel, B: Backend<T> + ?Sized>(
    x: &Image<T>,
    backend: &B,
    transform: &Transform<T>,
    ws: &ReconWorkspace<T>,
    cfg: &SolverConfig,
) -> Result<f64> {
    let geom = &ws.geometry;
    let Thresholds { lambda, theta } = ws.thresholds;
    let terms: Vec<(f64, f64)> = (0..ws.group_count())
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let group = &ws.groups[i];
            let u = group_vector_3d(x, group, geom)?;
            let alpha = nalgebra::DVector::from_vec(ws.codes.dense_column(i));
            let sparse = (transform.apply(&u) - alpha).iter().map(|v| v.abs_sq()).sum::<f64>()
                + lambda * lambda * ws.codes.nnz(i) as f64;
            let v = group_matrix(x, group, geom)?;
            let lr = &ws.low_rank[i];
            let low_rank =
                (v - lr.to_matrix()).iter().map(|v| v.abs_sq()).sum::<f64>() + theta * theta * lr.rank() as f64;
            Ok((sparse, low_rank))
        })
        .collect::<Result<_>>()?;
    let sparse: f64 = terms.iter().map(|t| t.0).sum();
    let low_rank: f64 = terms.iter().map(|t| t.1).sum();
    Ok(cfg.gamma_fidelity * backend.fidelity(x) + cfg.gamma_sparse * sparse + cfg.gamma_low_rank * low_rank)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepTimes {
    pub block_matching: Duration,
    pub low_rank: Duration,
    pub sparse_coding: Duration,
    pub transform: Duration,
    pub image: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub thresholds: Thresholds,
    pub objective: Option<f64>,
    pub times: StepTimes,
}

impl IterationRecord {
    /// One line-oriented diagnostics record.
    pub fn log_line(&self) -> String {
        let ms = |d: Duration| d.as_secs_f64() * 1e3;
        let objective = self.objective.map_or_else(|| "nan".to_string(), |o| format!("{o:.9e}"));
        format!(
            "iteration={} lambda={:.6} theta={:.6} objective={} bm_ms={:.1} lowrank_ms={:.1} sparse_ms={:.1} transform_ms={:.1} image_ms={:.1}",
            self.iteration,
            self.thresholds.lambda,
            self.thresholds.theta,
            objective,
            ms(self.times.block_matching),
            ms(self.times.low_rank),
            ms(self.times.sparse_coding),
            ms(self.times.transform),
            ms(self.times.image),
        )
    }
}

pub struct RunOutput<T: Pixel> {
    pub image: Image<T>,
    pub transform: Transform<T>,
    pub records: Vec<IterationRecord>,
}

/// Step-by-step driver. [`Solver::iterate`] runs one full outer iteration;
/// the individual steps are public so their effect on the objective can be
/// observed.
pub struct Solver<T: Pixel, B: Backend<T>> {
    cfg: SolverConfig,
    backend: B,
    estimate: Image<T>,
    transform: Transform<T>,
    iteration: usize,
    table: Option<PatchTable<T>>,
    workspace: Option<ReconWorkspace<T>>,
    times: StepTimes,
}

impl<T: Pixel, B: Backend<T>> Solver<T, B> {
    pub fn new(backend: B, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let estimate = backend.initial_estimate()?;
        let (h, w, ch) = estimate.dims();
        cfg.geometry.validate_for(h, w)?;
        let transform = dct_init(cfg.geometry.side, ch, cfg.geometry.depth)?;
        Ok(Solver {
            cfg,
            backend,
            estimate,
            transform,
            iteration: 0,
            table: None,
            workspace: None,
            times: StepTimes::default(),
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }
    pub fn backend(&self) -> &B {
        &self.backend
    }
    pub fn estimate(&self) -> &Image<T> {
        &self.estimate
    }
    pub fn transform(&self) -> &Transform<T> {
        &self.transform
    }
    pub fn workspace(&self) -> Option<&ReconWorkspace<T>> {
        self.workspace.as_ref()
    }
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    fn ws(&self) -> Result<&ReconWorkspace<T>> {
        self.workspace
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("no iteration in progress; call begin_iteration".into()))
    }

    fn table(&self) -> Result<&PatchTable<T>> {
        self.table
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("patch groups already consumed by the image update".into()))
    }

    /// Starts the next iteration: thresholds, block matching on the current
    /// estimate, all approximants reset to zero.
    pub fn begin_iteration(&mut self) -> Result<()> {
        self.iteration += 1;
        self.times = StepTimes::default();
        let start = Instant::now();
        let (h, w, ch) = self.estimate.dims();
        let mut thresholds = self.backend.thresholds(self.iteration, &self.cfg, ch);
        if let Some(l) = self.cfg.lambda {
            thresholds.lambda = l;
        }
        if let Some(t) = self.cfg.theta {
            thresholds.theta = t;
        }
        let geom = self.cfg.geometry;
        let table = PatchTable::new(&self.estimate, &geom)?;
        let refs = geom.reference_positions(h, w);
        let groups = block_match_all(&table, &refs)?;
        let n = geom.patch_len();
        let cols = ch * geom.match_count;
        let block_len = n * ch * geom.depth;
        let count = groups.len();
        self.workspace = Some(ReconWorkspace {
            geometry: geom,
            height: h,
            width: w,
            channels: ch,
            thresholds,
            groups,
            low_rank: vec![LowRankFactors::zeros(n, cols); count],
            codes: SparseColumns::zeros(block_len, count),
        });
        self.table = Some(table);
        self.times.block_matching = start.elapsed();
        Ok(())
    }

    /// Step (i).
    pub fn low_rank_step(&mut self) -> Result<()> {
        let start = Instant::now();
        let table = self.table()?;
        let ws = self.ws()?;
        let theta = ws.thresholds.theta;
        let factors: Vec<LowRankFactors<T>> = ws
            .groups
            .par_iter()
            .map(|g| low_rank_factors(&table.group_matrix(g), theta).map(|(f, _)| f))
            .collect::<Result<_>>()?;
        self.workspace.as_mut().unwrap().low_rank = factors;
        self.times.low_rank = start.elapsed();
        Ok(())
    }

    fn block_chunk(table: &PatchTable<T>, groups: &[MatchedGroup<T>], block_len: usize) -> DMatrix<T> {
        let mut out = DMatrix::zeros(block_len, groups.len());
        for (k, g) in groups.iter().enumerate() {
            out.column_mut(k).copy_from(&table.group_vector_3d(g));
        }
        out
    }

    /// Step (ii).
    pub fn sparse_code_step(&mut self) -> Result<()> {
        let start = Instant::now();
        let table = self.table()?;
        let ws = self.ws()?;
        let lambda = ws.thresholds.lambda;
        let block_len = ws.block_len();
        let chunks: Vec<Range<usize>> = (0..ws.group_count())
            .step_by(CHUNK)
            .map(|s| s..(s + CHUNK).min(ws.group_count()))
            .collect();
        let coded: Vec<DMatrix<T>> = chunks
            .par_iter()
            .map(|r| {
                let blocks = Self::block_chunk(table, &ws.groups[r.clone()], block_len);
                let mut codes = self.transform.apply_columns(&blocks);
                for mut col in codes.column_iter_mut() {
                    hard_threshold(col.as_mut_slice(), lambda);
                }
                codes
            })
            .collect();
        let mut sparse = SparseColumns::new(block_len);
        for chunk in &coded {
            for col in chunk.column_iter() {
                sparse.push_dense(col.as_slice());
            }
        }
        self.workspace.as_mut().unwrap().codes = sparse;
        self.times.sparse_coding = start.elapsed();
        Ok(())
    }

    /// Step (iii): `W = G S^H` from the SVD of `K = sum (C_i x) alpha_i^H`.
    pub fn transform_step(&mut self) -> Result<()> {
        let start = Instant::now();
        let table = self.table()?;
        let ws = self.ws()?;
        let block_len = ws.block_len();
        if ws.group_count() == 0 {
            return Err(Error::EmptyInput("patch groups"));
        }
        let chunks: Vec<Range<usize>> = (0..ws.group_count())
            .step_by(CHUNK)
            .map(|s| s..(s + CHUNK).min(ws.group_count()))
            .collect();
        let partial = |r: &Range<usize>| -> DMatrix<T> {
            let blocks = Self::block_chunk(table, &ws.groups[r.clone()], block_len);
            let codes = ws.codes.dense_range(r.clone());
            T::matmul(&blocks, &codes.adjoint())
        };
        let k = if self.cfg.deterministic {
            let parts: Vec<DMatrix<T>> = chunks.par_iter().map(partial).collect();
            parts
                .into_iter()
                .fold(DMatrix::zeros(block_len, block_len), |acc, p| acc + p)
        } else {
            chunks
                .par_iter()
                .map(partial)
                .reduce(|| DMatrix::zeros(block_len, block_len), |a, b| a + b)
        };
        self.transform = transform_from_correlation(k)?;
        self.times.transform = start.elapsed();
        Ok(())
    }

    /// Step (iv), delegated to the backend.
    pub fn image_step(&mut self) -> Result<()> {
        let start = Instant::now();
        let ws = self
            .workspace
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("no iteration in progress; call begin_iteration".into()))?;
        let ctx = UpdateContext {
            iteration: self.iteration,
            last: self.iteration >= self.cfg.iterations,
            config: &self.cfg,
            workspace: ws,
            transform: &self.transform,
            current: &self.estimate,
        };
        let next = self.backend.update_image(&ctx)?;
        self.estimate.check_same_dims(&next)?;
        if next.as_slice().iter().any(|v| !v.finite()) {
            return Err(Error::NonFinite("image update"));
        }
        self.estimate = next;
        self.table = None;
        self.times.image = start.elapsed();
        Ok(())
    }

    /// Objective at the current variables.
    pub fn objective(&self) -> Result<f64> {
        objective(&self.estimate, &self.backend, &self.transform, self.ws()?, &self.cfg)
    }

    /// One outer iteration.
    pub fn iterate(&mut self) -> Result<IterationRecord> {
        self.begin_iteration()?;
        self.low_rank_step()?;
        self.sparse_code_step()?;
        self.transform_step()?;
        self.image_step()?;
        let objective = if self.cfg.track_objective {
            Some(self.objective()?)
        } else {
            None
        };
        let record = IterationRecord {
            iteration: self.iteration,
            thresholds: self.ws()?.thresholds,
            objective,
            times: self.times,
        };
        log::info!("{} {}", self.backend.name(), record.log_line());
        Ok(record)
    }

    pub fn finish(self) -> RunOutput<T> {
        RunOutput {
            image: self.estimate,
            transform: self.transform,
            records: Vec::new(),
        }
    }

    pub fn into_backend(self) -> B {
        self.backend
    }
}

fn run_all<T: Pixel, B: Backend<T>>(backend: B, cfg: SolverConfig) -> Result<RunOutput<T>> {
    let mut solver = Solver::new(backend, cfg)?;
    let mut records = Vec::with_capacity(solver.cfg.iterations);
    for _ in 0..solver.cfg.iterations {
        records.push(solver.iterate()?);
    }
    let mut out = solver.finish();
    out.records = records;
    Ok(out)
}

/// Runs all iterations, inside a dedicated thread pool when
/// `cfg.threads` is set.
pub fn run<T: Pixel, B: Backend<T>>(backend: B, cfg: SolverConfig) -> Result<RunOutput<T>> {
    match cfg.threads {
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            pool.install(|| run_all(backend, cfg))
        }
        None => run_all(backend, cfg),
    }
}
