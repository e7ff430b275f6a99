//! SGD on the negative-sampling objective over center/context embedding
//! matrices.
//!
//! Streaming follows the reference word2vec scheme: for each in-window
//! (center, context) pair the context row and the drawn negative rows are
//! updated immediately while the center row's gradient is accumulated and
//! applied once per pair group. Self-pairs (center == context, or a negative
//! draw equal to the center) are skipped, matching the i != j sum of the
//! empirical risk.
//!
//! Two execution modes: deterministic single-worker streaming in walk order,
//! and a hogwild multi-worker mode with unsynchronized relaxed updates.
//! Reproducibility is only promised in deterministic mode.
//!
//! In unconstrained mode the matrices are initialized balanced
//! (U^T U = V^T V exactly, via an orthogonal row-mixing of U), which is the
//! invariant gradient descent preserves; constrained mode trains a single
//! matrix receiving both gradient contributions.

use crate::alias::AliasTable;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::mat::{axpy, dot, Mat};
use crate::num::{neg_log_sigmoid, sigmoid};
use crate::rng::{rng_from, derive_seed};
use crate::sampler::{sample_walks, unigram_distribution, WalkConfig};
use rand::Rng;
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read as IoRead, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Unconstrained,
    Constrained,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub d: usize,
    pub mode: Mode,
    /// initial learning rate, decayed linearly to `lr_floor`
    pub lr: f64,
    pub lr_floor: f64,
    pub epochs: usize,
    /// uniform init half-width; None means 0.5 / d
    pub init_scale: Option<f64>,
    pub seed: u64,
    /// single-worker streaming in a fixed order; bit-reproducible
    pub deterministic: bool,
    /// worker threads for the hogwild path (used when not deterministic)
    pub workers: usize,
    /// optional projection radii (entrywise, row norm) applied after updates
    pub norm_caps: Option<(f64, f64)>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            d: 64,
            mode: Mode::Unconstrained,
            lr: 0.025,
            lr_floor: 1e-4,
            epochs: 1,
            init_scale: None,
            seed: 1,
            deterministic: true,
            workers: 1,
            norm_caps: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d < 1 {
            return Err(Error::input("embedding dimension must be >= 1"));
        }
        if !(self.lr > 0.0) && self.lr != 0.0 {
            return Err(Error::input("learning rate must be non-negative"));
        }
        Ok(())
    }

    fn scale(&self) -> f64 {
        self.init_scale.unwrap_or(0.5 / self.d as f64)
    }
}

/// Center (`u`) and context (`v`) embeddings; `v` aliases `u` when tied.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingPair {
    u: Mat,
    v: Option<Mat>,
}

impl EmbeddingPair {
    pub fn new(u: Mat, v: Option<Mat>) -> Self {
        EmbeddingPair { u, v }
    }

    pub fn tied(&self) -> bool {
        self.v.is_none()
    }

    pub fn center(&self) -> &Mat {
        &self.u
    }

    pub fn context(&self) -> &Mat {
        self.v.as_ref().unwrap_or(&self.u)
    }

    pub fn n(&self) -> usize {
        self.u.rows()
    }

    pub fn d(&self) -> usize {
        self.u.cols()
    }
}

/// Draw embeddings. Unconstrained mode draws U uniformly and sets V = R U
/// for a random orthogonal row-mixing R, which makes U^T U = V^T V hold
/// exactly at initialization.
pub fn init_embeddings(n: usize, cfg: &TrainConfig) -> Result<EmbeddingPair> {
    cfg.validate()?;
    let s = cfg.scale();
    let mut rng = rng_from(cfg.seed, &[0x1217]);
    let mut draw = |rows: usize| {
        Mat::from_fn(rows, cfg.d, |_, _| if s == 0.0 { 0.0 } else { rng.random_range(-s..s) })
    };
    let u = draw(n);
    match cfg.mode {
        Mode::Constrained => Ok(EmbeddingPair { u, v: None }),
        Mode::Unconstrained => {
            let mut v = u.clone();
            let mut mix_rng = rng_from(cfg.seed, &[0x1218]);
            orthogonal_row_mix(&mut v, &mut mix_rng);
            Ok(EmbeddingPair { u, v: Some(v) })
        }
    }
}

/// Apply a random orthogonal operator to the rows: three rounds of
/// permutation, disjoint-pair Givens rotations, and sign flips. Orthogonal
/// row operations leave M^T M unchanged to rounding error.
fn orthogonal_row_mix<R: Rng>(m: &mut Mat, rng: &mut R) {
    let n = m.rows();
    if n < 2 {
        for i in 0..n {
            if rng.random::<bool>() {
                for x in m.row_mut(i) {
                    *x = -*x;
                }
            }
        }
        return;
    }
    for _ in 0..3 {
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            perm.swap(i, j);
        }
        apply_row_permutation(m, &perm);
        for pair in (0..n - 1).step_by(2) {
            let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let (c, s) = (th.cos(), th.sin());
            let (a, b) = m.two_rows_mut(pair, pair + 1);
            for k in 0..a.len() {
                let (x, y) = (a[k], b[k]);
                a[k] = c * x - s * y;
                b[k] = s * x + c * y;
            }
        }
        for i in 0..n {
            if rng.random::<bool>() {
                for x in m.row_mut(i) {
                    *x = -*x;
                }
            }
        }
    }
}

fn apply_row_permutation(m: &mut Mat, perm: &[usize]) {
    let d = m.cols();
    let mut scratch = vec![0.0; m.rows() * d];
    for (dst, &src) in perm.iter().enumerate() {
        scratch[dst * d..(dst + 1) * d].copy_from_slice(m.row(src));
    }
    m.data_mut().copy_from_slice(&scratch);
}

/// Loss and gradients of a single pair term. Positive pairs use
/// -log sigma(<u, v>), negatives -log sigma(-<u, v>); computed with the
/// overflow-free branches.
pub fn pair_loss(u: &[f64], v: &[f64], is_positive: bool) -> (f64, Vec<f64>, Vec<f64>) {
    let x = dot(u, v);
    let (loss, coef) = if is_positive {
        (neg_log_sigmoid(x), sigmoid(x) - 1.0)
    } else {
        (neg_log_sigmoid(-x), sigmoid(x))
    };
    let gu: Vec<f64> = v.iter().map(|&y| coef * y).collect();
    let gv: Vec<f64> = u.iter().map(|&y| coef * y).collect();
    (loss, gu, gv)
}

fn scheduled_pairs(walks: &[Vec<u32>], window: usize) -> u64 {
    walks
        .iter()
        .map(|w| {
            let len = w.len() as u64;
            let wd = window as u64;
            (0..len).map(|j| (j + wd).min(len - 1) - j.saturating_sub(wd) ).sum::<u64>()
        })
        .sum()
}

/// Train embeddings on the graph: per epoch, regenerate walks and stream
/// window pairs with attached unigram negatives through SGD. The learning
/// rate decays linearly from `lr` to `lr_floor` across all scheduled pairs.
pub fn train(g: &Graph, walk_cfg: &WalkConfig, cfg: &TrainConfig) -> Result<EmbeddingPair> {
    cfg.validate()?;
    walk_cfg.validate()?;
    if g.m() == 0 {
        return Err(Error::input("graph has no edges"));
    }
    let unigram = unigram_distribution(g, walk_cfg.unigram_alpha)?;
    let table = AliasTable::new(&unigram)?;
    let pair = init_embeddings(g.n(), cfg)?;
    let n = g.n();
    let d = cfg.d;

    // per-epoch walk sets share the pair budget that drives the lr decay
    let probe = sample_walks(g, walk_cfg, derive_seed(cfg.seed, &[0x77a1, 0]))?;
    let per_epoch = scheduled_pairs(&probe, walk_cfg.window_w);
    let total_pairs = (per_epoch * cfg.epochs as u64).max(1);

    let mut buf = vec![0.0f64; if pair.tied() { n * d } else { 2 * n * d }];
    buf[..n * d].copy_from_slice(pair.center().data());
    if let Some(v) = &pair.v {
        buf[n * d..].copy_from_slice(v.data());
    }
    let v_base = if pair.tied() { 0 } else { n * d };

    let single = cfg.deterministic || cfg.workers <= 1;
    if single {
        let mut processed = 0u64;
        for epoch in 0..cfg.epochs {
            let walks = if epoch == 0 {
                probe.clone()
            } else {
                sample_walks(g, walk_cfg, derive_seed(cfg.seed, &[0x77a1, epoch as u64]))?
            };
            train_epoch_range(
                &mut buf, v_base, d, g, walk_cfg, cfg, &table, &walks, 0, epoch,
                &mut processed, total_pairs,
            )?;
        }
    } else {
        hogwild_train(&mut buf, v_base, d, g, walk_cfg, cfg, &table, &probe, total_pairs)?;
    }

    let u = Mat::from_fn(n, d, |i, j| buf[i * d + j]);
    let v = if pair.tied() {
        None
    } else {
        Some(Mat::from_fn(n, d, |i, j| buf[v_base + i * d + j]))
    };
    Ok(EmbeddingPair { u, v })
}

#[allow(clippy::too_many_arguments)]
fn train_epoch_range(
    buf: &mut [f64],
    v_base: usize,
    d: usize,
    _g: &Graph,
    walk_cfg: &WalkConfig,
    cfg: &TrainConfig,
    table: &AliasTable,
    walks: &[Vec<u32>],
    walk_offset: usize,
    epoch: usize,
    processed: &mut u64,
    total_pairs: u64,
) -> Result<()> {
    let window = walk_cfg.window_w;
    let l = walk_cfg.negatives_l;
    let lr_span = cfg.lr - cfg.lr_floor;
    let mut uc = vec![0.0f64; d];
    let mut neu = vec![0.0f64; d];
    for (wi, walk) in walks.iter().enumerate() {
        let mut neg_rng = rng_from(cfg.seed, &[0x4e47, epoch as u64, (walk_offset + wi) as u64]);
        for j in 0..walk.len() {
            let lo = j.saturating_sub(window);
            let hi = (j + window).min(walk.len().saturating_sub(1));
            for i in lo..=hi {
                if i == j {
                    continue;
                }
                let lr = (cfg.lr - lr_span * (*processed as f64 / total_pairs as f64))
                    .max(cfg.lr_floor);
                *processed += 1;
                let center = walk[j] as usize;
                let ctx = walk[i] as usize;
                if center == ctx {
                    // still consume the negative draws so the stream shape
                    // does not depend on embedding state
                    for _ in 0..l {
                        table.sample(&mut neg_rng);
                    }
                    continue;
                }
                uc.copy_from_slice(&buf[center * d..center * d + d]);
                neu.iter_mut().for_each(|x| *x = 0.0);
                update_one(buf, v_base, d, &uc, &mut neu, ctx, true, lr).map_err(|_| {
                    step_error(epoch, walk_offset + wi, *processed)
                })?;
                for _ in 0..l {
                    let neg = table.sample(&mut neg_rng) as usize;
                    if neg == center {
                        continue;
                    }
                    update_one(buf, v_base, d, &uc, &mut neu, neg, false, lr).map_err(|_| {
                        step_error(epoch, walk_offset + wi, *processed)
                    })?;
                }
                axpy(1.0, &neu, &mut buf[center * d..center * d + d]);
                if let Some((a_inf, a_two)) = cfg.norm_caps {
                    project_row(&mut buf[center * d..center * d + d], a_inf, a_two);
                }
            }
        }
    }
    Ok(())
}

fn step_error(epoch: usize, walk: usize, pair: u64) -> Error {
    Error::numerical(format!(
        "non-finite value during update at epoch {epoch}, walk {walk}, pair {pair}"
    ))
}

/// One positive or negative micro-update against a cached center row:
/// the context/negative row is updated in place and the center gradient is
/// accumulated into `neu`.
#[inline]
fn update_one(
    buf: &mut [f64],
    v_base: usize,
    d: usize,
    uc: &[f64],
    neu: &mut [f64],
    other: usize,
    is_positive: bool,
    lr: f64,
) -> std::result::Result<(), ()> {
    let vo = v_base + other * d;
    let vrow = &mut buf[vo..vo + d];
    let x = dot(uc, vrow);
    if !x.is_finite() {
        return Err(());
    }
    let coef = if is_positive { sigmoid(x) - 1.0 } else { sigmoid(x) };
    let step = -lr * coef;
    for k in 0..d {
        neu[k] += step * vrow[k];
        vrow[k] += step * uc[k];
    }
    Ok(())
}

fn project_row(row: &mut [f64], a_inf: f64, a_two: f64) {
    for x in row.iter_mut() {
        *x = x.clamp(-a_inf, a_inf);
    }
    let norm = dot(row, row).sqrt();
    if norm > a_two {
        let s = a_two / norm;
        for x in row.iter_mut() {
            *x *= s;
        }
    }
}

/// Hogwild path: walks are split across workers and rows are updated through
/// relaxed atomics without synchronization. The learning rate is driven by a
/// shared counter, so results vary run to run by design.
#[allow(clippy::too_many_arguments)]
fn hogwild_train(
    buf: &mut [f64],
    v_base: usize,
    d: usize,
    g: &Graph,
    walk_cfg: &WalkConfig,
    cfg: &TrainConfig,
    table: &AliasTable,
    first_epoch_walks: &[Vec<u32>],
    total_pairs: u64,
) -> Result<()> {
    let atoms: Vec<AtomicU64> = buf.iter().map(|&x| AtomicU64::new(x.to_bits())).collect();
    let processed = AtomicU64::new(0);
    let workers = cfg.workers.max(1);
    for epoch in 0..cfg.epochs {
        let walks = if epoch == 0 {
            first_epoch_walks.to_vec()
        } else {
            sample_walks(g, walk_cfg, derive_seed(cfg.seed, &[0x77a1, epoch as u64]))?
        };
        let chunk = walks.len().div_ceil(workers);
        let errs: Vec<Result<()>> = std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for (widx, slice) in walks.chunks(chunk).enumerate() {
                let atoms = &atoms;
                let processed = &processed;
                let table = &table;
                handles.push(scope.spawn(move || {
                    hogwild_worker(
                        atoms, v_base, d, walk_cfg, cfg, table, slice,
                        widx * chunk, epoch, processed, total_pairs,
                    )
                }));
            }
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        for e in errs {
            e?;
        }
    }
    for (x, a) in buf.iter_mut().zip(&atoms) {
        *x = f64::from_bits(a.load(Ordering::Relaxed));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn hogwild_worker(
    atoms: &[AtomicU64],
    v_base: usize,
    d: usize,
    walk_cfg: &WalkConfig,
    cfg: &TrainConfig,
    table: &AliasTable,
    walks: &[Vec<u32>],
    walk_offset: usize,
    epoch: usize,
    processed: &AtomicU64,
    total_pairs: u64,
) -> Result<()> {
    let window = walk_cfg.window_w;
    let l = walk_cfg.negatives_l;
    let lr_span = cfg.lr - cfg.lr_floor;
    let mut uc = vec![0.0f64; d];
    let mut neu = vec![0.0f64; d];
    let load = |i: usize| f64::from_bits(atoms[i].load(Ordering::Relaxed));
    for (wi, walk) in walks.iter().enumerate() {
        let mut neg_rng = rng_from(cfg.seed, &[0x4e47, epoch as u64, (walk_offset + wi) as u64]);
        for j in 0..walk.len() {
            let lo = j.saturating_sub(window);
            let hi = (j + window).min(walk.len().saturating_sub(1));
            for i in lo..=hi {
                if i == j {
                    continue;
                }
                let t = processed.fetch_add(1, Ordering::Relaxed);
                let lr = (cfg.lr - lr_span * (t as f64 / total_pairs as f64)).max(cfg.lr_floor);
                let center = walk[j] as usize;
                let ctx = walk[i] as usize;
                if center == ctx {
                    for _ in 0..l {
                        table.sample(&mut neg_rng);
                    }
                    continue;
                }
                for k in 0..d {
                    uc[k] = load(center * d + k);
                    neu[k] = 0.0;
                }
                let mut one = |other: usize, positive: bool| -> std::result::Result<(), ()> {
                    let vo = v_base + other * d;
                    let mut x = 0.0;
                    for k in 0..d {
                        x += uc[k] * load(vo + k);
                    }
                    if !x.is_finite() {
                        return Err(());
                    }
                    let coef = if positive { sigmoid(x) - 1.0 } else { sigmoid(x) };
                    let step = -lr * coef;
                    for k in 0..d {
                        let old = load(vo + k);
                        neu[k] += step * old;
                        atoms[vo + k].store((old + step * uc[k]).to_bits(), Ordering::Relaxed);
                    }
                    Ok(())
                };
                one(ctx, true).map_err(|_| step_error(epoch, walk_offset + wi, t))?;
                for _ in 0..l {
                    let neg = table.sample(&mut neg_rng) as usize;
                    if neg == center {
                        continue;
                    }
                    one(neg, false).map_err(|_| step_error(epoch, walk_offset + wi, t))?;
                }
                for k in 0..d {
                    let idx = center * d + k;
                    let old = load(idx);
                    atoms[idx].store((old + neu[k]).to_bits(), Ordering::Relaxed);
                }
            }
        }
    }
    Ok(())
}

/// Empirical risk against per-pair inclusion probabilities:
/// sum over i != j of -P[i,j] log sigma(<u_i, v_j>) - N[i,j] log(1 - sigma).
pub fn empirical_risk(p_mat: &Mat, n_mat: &Mat, u: &Mat, v: &Mat) -> f64 {
    let n = u.rows();
    let mut total = 0.0;
    for i in 0..n {
        let ui = u.row(i);
        for j in 0..n {
            if i == j {
                continue;
            }
            let (p, q) = (p_mat.get(i, j), n_mat.get(i, j));
            if p == 0.0 && q == 0.0 {
                continue;
            }
            let x = dot(ui, v.row(j));
            total += p * neg_log_sigmoid(x) + q * neg_log_sigmoid(-x);
        }
    }
    total
}

/// Gradients of [`empirical_risk`] with respect to U and V.
pub fn empirical_risk_grad(p_mat: &Mat, n_mat: &Mat, u: &Mat, v: &Mat) -> (Mat, Mat) {
    let n = u.rows();
    let d = u.cols();
    let mut gu = Mat::zeros(n, d);
    let mut gv = Mat::zeros(n, d);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (p, q) = (p_mat.get(i, j), n_mat.get(i, j));
            if p == 0.0 && q == 0.0 {
                continue;
            }
            let x = dot(u.row(i), v.row(j));
            let coef = p * (sigmoid(x) - 1.0) + q * sigmoid(x);
            axpy(coef, v.row(j), gu.row_mut(i));
            axpy(coef, u.row(i), gv.row_mut(j));
        }
    }
    (gu, gv)
}

/// Turn a sampled pair multiset into per-pair relative frequency matrices
/// usable as the probabilities in [`empirical_risk`].
pub fn pair_stream_frequencies(
    positives: &BTreeMap<(u32, u32), u64>,
    negatives: &BTreeMap<(u32, u32), u64>,
    n: usize,
) -> (Mat, Mat) {
    let mut p = Mat::zeros(n, n);
    let mut q = Mat::zeros(n, n);
    let pt: u64 = positives.values().sum();
    let nt: u64 = negatives.values().sum();
    for (&(a, b), &c) in positives {
        p.set(a as usize, b as usize, p.get(a as usize, b as usize) + c as f64 / pt.max(1) as f64);
    }
    for (&(a, b), &c) in negatives {
        q.set(a as usize, b as usize, q.get(a as usize, b as usize) + c as f64 / nt.max(1) as f64);
    }
    (p, q)
}

/// Write embeddings in the word2vec-style text layout: header "n d", then
/// one line per vertex "id v_1 ... v_d". The id column carries the caller's
/// vertex identifiers (original labels for loaded graphs); values
/// round-trip exactly.
pub fn save_embeddings_text(path: impl AsRef<Path>, emb: &Mat, ids: &[u64]) -> Result<()> {
    if ids.len() != emb.rows() {
        return Err(Error::input("id column length must match the row count"));
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{} {}", emb.rows(), emb.cols())?;
    for i in 0..emb.rows() {
        write!(f, "{}", ids[i])?;
        for x in emb.row(i) {
            write!(f, " {x:?}")?;
        }
        writeln!(f)?;
    }
    Ok(())
}

/// Rows come back in file order together with their id column.
pub fn load_embeddings_text(path: impl AsRef<Path>) -> Result<(Mat, Vec<u64>)> {
    let f = BufReader::new(std::fs::File::open(path)?);
    let mut lines = f.lines();
    let header = lines.next().ok_or_else(|| Error::input("empty embedding file"))??;
    let mut it = header.split_whitespace();
    let n: usize = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::input("bad embedding header"))?;
    let d: usize = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::input("bad embedding header"))?;
    let mut m = Mat::zeros(n, d);
    let mut ids = Vec::with_capacity(n);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if ids.len() == n {
            return Err(Error::input("embedding file has extra rows"));
        }
        let mut toks = line.split_whitespace();
        let id: u64 = toks
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::input("bad embedding row id"))?;
        let row = m.row_mut(ids.len());
        for k in 0..d {
            row[k] = toks
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::input("short embedding row"))?;
        }
        ids.push(id);
    }
    if ids.len() != n {
        return Err(Error::input("embedding file is missing rows"));
    }
    Ok((m, ids))
}

/// Binary alternative: same "n d" text header line, then n*d little-endian
/// f64 values in row-major order.
pub fn save_embeddings_binary(path: impl AsRef<Path>, emb: &Mat) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{} {}", emb.rows(), emb.cols())?;
    for x in emb.data() {
        f.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn load_embeddings_binary(path: impl AsRef<Path>) -> Result<Mat> {
    let mut f = BufReader::new(std::fs::File::open(path)?);
    let mut header = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        f.read_exact(&mut byte)?;
        if byte[0] == b'\n' {
            break;
        }
        header.push(byte[0]);
        if header.len() > 64 {
            return Err(Error::input("bad binary embedding header"));
        }
    }
    let header = String::from_utf8(header).map_err(|_| Error::input("bad header"))?;
    let mut it = header.split_whitespace();
    let n: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| Error::input("bad header"))?;
    let d: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| Error::input("bad header"))?;
    let mut m = Mat::zeros(n, d);
    let mut bytes = vec![0u8; 8];
    for i in 0..n * d {
        f.read_exact(&mut bytes)?;
        m.data_mut()[i] = f64::from_le_bytes(bytes.clone().try_into().unwrap());
    }
    Ok(m)
}
