//! Positive-pair generation via the biased second-order random walk and
//! negative-pair generation via the unigram distribution.
//!
//! The walk's next-step law from state (prev, cur) puts unnormalized weight
//! `1/p` on returning to prev, `1` on any neighbor of cur adjacent to prev,
//! and `1/q` on the rest. With p = q = 1 this collapses to the simple random
//! walk and the fast uniform path is taken.
//!
//! [`exact_pair_probabilities`] enumerates every walk of a small graph under
//! the lifted edge chain (states are directed edges, initialized uniformly)
//! and returns the per-pair inclusion probabilities for both the window
//! co-occurrence event and the unigram negative-draw event. These matrices
//! are the oracle that the sampled pipeline is tested against.

use crate::alias::AliasTable;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::mat::Mat;
use crate::rng::rng_from;
use rand::Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;

/// How walks are started.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WalkStarts {
    /// `walks_per_start * m` walks, each from a uniformly random directed
    /// edge; matches the walk law analyzed for the limit objects.
    TheoryEdges,
    /// `walks_per_start` walks from every vertex, first step uniform over
    /// neighbors; matches the reference implementation used in practice.
    #[default]
    PerVertex,
}

/// Which denominator the unigram distribution uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnigramVariant {
    /// sum over all vertices
    #[default]
    AllVertices,
    /// sum excludes the current center
    ExcludeCenter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkConfig {
    /// return parameter, > 0
    pub p: f64,
    /// in-out parameter, > 0
    pub q: f64,
    /// steps per walk; a walk visits walk_len_k + 1 vertices
    pub walk_len_k: usize,
    pub window_w: usize,
    pub walks_per_start: usize,
    /// negatives per positive center occurrence
    pub negatives_l: usize,
    pub unigram_alpha: f64,
    pub starts: WalkStarts,
    pub unigram_variant: UnigramVariant,
}

impl Default for WalkConfig {
    /// Reference defaults: 10 walks per vertex of length 80, window 10,
    /// 5 negatives, unigram exponent 3/4, simple random walk.
    fn default() -> Self {
        WalkConfig {
            p: 1.0,
            q: 1.0,
            walk_len_k: 80,
            window_w: 10,
            walks_per_start: 10,
            negatives_l: 5,
            unigram_alpha: 0.75,
            starts: WalkStarts::PerVertex,
            unigram_variant: UnigramVariant::AllVertices,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0) || !(self.q > 0.0) {
            return Err(Error::input("p and q must be positive"));
        }
        if self.walk_len_k < 1 {
            return Err(Error::input("walk length must be >= 1"));
        }
        if self.window_w < 1 {
            return Err(Error::input("window must be >= 1"));
        }
        Ok(())
    }

    fn is_simple_walk(&self) -> bool {
        self.p == 1.0 && self.q == 1.0
    }
}

/// Multisets of sampled pairs, keyed (center, context) with multiplicities.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairStream {
    pub positives: BTreeMap<(u32, u32), u64>,
    pub negatives: BTreeMap<(u32, u32), u64>,
}

impl PairStream {
    pub fn positive_total(&self) -> u64 {
        self.positives.values().sum()
    }

    pub fn negative_total(&self) -> u64 {
        self.negatives.values().sum()
    }
}

/// Next-step distribution of the second-order walk, aligned with
/// `g.neighbors(cur)`. Requires (prev, cur) to be an edge.
pub fn transition_weights(g: &Graph, prev: u32, cur: u32, p: f64, q: f64) -> Result<Vec<f64>> {
    if !g.has_edge(prev, cur) {
        return Err(Error::input(format!("({prev}, {cur}) is not an edge")));
    }
    if !(p > 0.0) || !(q > 0.0) {
        return Err(Error::input("p and q must be positive"));
    }
    let nb = g.neighbors(cur);
    let mut w = Vec::with_capacity(nb.len());
    let mut total = 0.0;
    for &x in nb {
        let wt = if x == prev {
            1.0 / p
        } else if g.has_edge(x, prev) {
            1.0
        } else {
            1.0 / q
        };
        w.push(wt);
        total += wt;
    }
    for wt in &mut w {
        *wt /= total;
    }
    Ok(w)
}

/// Sample one step of the second-order walk from state (prev, cur).
pub fn sample_next<R: Rng>(g: &Graph, prev: u32, cur: u32, p: f64, q: f64, rng: &mut R) -> u32 {
    let nb = g.neighbors(cur);
    if p == 1.0 && q == 1.0 {
        return nb[rng.random_range(0..nb.len())];
    }
    let mut total = 0.0;
    let mut weights: Vec<f64> = Vec::with_capacity(nb.len());
    for &x in nb {
        let wt = if x == prev {
            1.0 / p
        } else if g.has_edge(x, prev) {
            1.0
        } else {
            1.0 / q
        };
        weights.push(wt);
        total += wt;
    }
    let mut r = rng.random::<f64>() * total;
    for (i, &wt) in weights.iter().enumerate() {
        r -= wt;
        if r <= 0.0 {
            return nb[i];
        }
    }
    nb[nb.len() - 1]
}

/// Alias tables over next steps, one per directed edge slot; the table for
/// slot (prev -> cur) is the distribution over neighbors(cur). Only built
/// for biased walks on graphs where sum(deg^2) fits the entry budget, since
/// per-edge-pair tables are memory-quadratic in degree.
struct EdgeAliasCache {
    tables: Vec<AliasTable>,
    offsets: Vec<usize>,
}

const ALIAS_ENTRY_BUDGET: usize = 4_000_000;

impl EdgeAliasCache {
    fn build(g: &Graph, p: f64, q: f64) -> Option<EdgeAliasCache> {
        let entries: usize = g.degrees().iter().map(|&d| (d as usize) * (d as usize)).sum();
        if entries > ALIAS_ENTRY_BUDGET {
            return None;
        }
        let mut offsets = Vec::with_capacity(g.n() + 1);
        offsets.push(0);
        for v in 0..g.n() as u32 {
            offsets.push(offsets[v as usize] + g.degree(v) as usize);
        }
        let mut tables = Vec::with_capacity(2 * g.m());
        for src in 0..g.n() as u32 {
            for &dst in g.neighbors(src) {
                let w = transition_weights(g, src, dst, p, q).ok()?;
                tables.push(AliasTable::new(&w).ok()?);
            }
        }
        Some(EdgeAliasCache { tables, offsets })
    }

    #[inline]
    fn slot(&self, g: &Graph, src: u32, dst: u32) -> usize {
        let pos = g.neighbors(src).binary_search(&dst).expect("not an edge");
        self.offsets[src as usize] + pos
    }

    #[inline]
    fn sample<R: Rng>(&self, g: &Graph, cur: u32, slot: usize, rng: &mut R) -> u32 {
        g.neighbors(cur)[self.tables[slot].sample(rng) as usize]
    }
}

/// Sample the configured number of walks. Each walk owns an RNG stream
/// derived from (seed, walk index), so output is identical however walks
/// are scheduled across workers.
pub fn sample_walks(g: &Graph, cfg: &WalkConfig, seed: u64) -> Result<Vec<Vec<u32>>> {
    cfg.validate()?;
    if g.m() == 0 {
        return Err(Error::input("graph has no edges"));
    }
    let total_walks = match cfg.starts {
        WalkStarts::TheoryEdges => cfg.walks_per_start * g.m(),
        WalkStarts::PerVertex => cfg.walks_per_start * g.n(),
    };
    let cache = if cfg.is_simple_walk() { None } else { EdgeAliasCache::build(g, cfg.p, cfg.q) };
    let walks: Vec<Vec<u32>> = (0..total_walks)
        .into_par_iter()
        .map(|w| {
            let mut rng = rng_from(seed, &[w as u64]);
            sample_one_walk(g, cfg, cache.as_ref(), w, &mut rng)
        })
        .collect();
    Ok(walks)
}

fn sample_one_walk<R: Rng>(
    g: &Graph,
    cfg: &WalkConfig,
    cache: Option<&EdgeAliasCache>,
    walk_index: usize,
    rng: &mut R,
) -> Vec<u32> {
    let k = cfg.walk_len_k;
    let mut walk = Vec::with_capacity(k + 1);
    let (mut prev, mut cur);
    match cfg.starts {
        WalkStarts::TheoryEdges => {
            let slot = rng.random_range(0..2 * g.m());
            let (a, b) = g.directed_edge(slot);
            walk.push(a);
            walk.push(b);
            prev = a;
            cur = b;
        }
        WalkStarts::PerVertex => {
            let start = (walk_index / cfg.walks_per_start) as u32;
            walk.push(start);
            let nb = g.neighbors(start);
            if nb.is_empty() {
                return walk;
            }
            let nxt = nb[rng.random_range(0..nb.len())];
            walk.push(nxt);
            prev = start;
            cur = nxt;
        }
    }
    if cfg.is_simple_walk() {
        while walk.len() < k + 1 {
            let nb = g.neighbors(cur);
            let nxt = nb[rng.random_range(0..nb.len())];
            walk.push(nxt);
            cur = nxt;
        }
        return walk;
    }
    match cache {
        Some(c) => {
            let mut slot = c.slot(g, prev, cur);
            while walk.len() < k + 1 {
                let nxt = c.sample(g, cur, slot, rng);
                walk.push(nxt);
                slot = c.slot(g, cur, nxt);
                cur = nxt;
            }
        }
        None => {
            while walk.len() < k + 1 {
                let nxt = sample_next(g, prev, cur, cfg.p, cfg.q, rng);
                walk.push(nxt);
                prev = cur;
                cur = nxt;
            }
        }
    }
    walk
}

/// Ordered in-window pairs (center, context) over all walks: positions j, i
/// with 0 < |j - i| <= window co-occur. Multiplicities are retained.
pub fn extract_positive_pairs(walks: &[Vec<u32>], window: usize) -> BTreeMap<(u32, u32), u64> {
    let mut out = BTreeMap::new();
    for walk in walks {
        if walk.is_empty() {
            continue;
        }
        let len = walk.len();
        for j in 0..len {
            let lo = j.saturating_sub(window);
            let hi = (j + window).min(len - 1);
            for i in lo..=hi {
                if i != j {
                    *out.entry((walk[j], walk[i])).or_insert(0) += 1;
                }
            }
        }
    }
    out
}

/// Unigram weights deg(v)^alpha before normalization. With alpha = 0 every
/// vertex gets weight 1 (0^0 := 1); with alpha != 0, degree-0 vertices get
/// weight 0 so that negative alpha stays finite.
pub fn unigram_weights(g: &Graph, alpha: f64) -> Vec<f64> {
    g.degrees()
        .iter()
        .map(|&d| {
            if alpha == 0.0 {
                1.0
            } else if d == 0 {
                0.0
            } else {
                (d as f64).powf(alpha)
            }
        })
        .collect()
}

/// Normalized unigram distribution over all vertices.
pub fn unigram_distribution(g: &Graph, alpha: f64) -> Result<Vec<f64>> {
    let mut w = unigram_weights(g, alpha);
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::input("unigram weights are all zero"));
    }
    for x in &mut w {
        *x /= total;
    }
    Ok(w)
}

/// Attach `l` iid negative draws from `dist` to every positive center
/// occurrence. The negative multiset has exactly l * (positive count) draws.
pub fn attach_negatives(
    positives: &BTreeMap<(u32, u32), u64>,
    dist: &[f64],
    negatives_l: usize,
    seed: u64,
) -> Result<PairStream> {
    let mut stream = PairStream { positives: positives.clone(), negatives: BTreeMap::new() };
    if negatives_l == 0 || positives.is_empty() {
        return Ok(stream);
    }
    let table = AliasTable::new(dist)?;
    let mut rng = rng_from(seed, &[0x4e65]);
    for (&(center, _ctx), &count) in positives {
        for _ in 0..count * negatives_l as u64 {
            let neg = table.sample(&mut rng);
            *stream.negatives.entry((center, neg)).or_insert(0) += 1;
        }
    }
    Ok(stream)
}

const EXACT_MAX_N: usize = 12;
const EXACT_MAX_K: usize = 6;

/// Exact per-pair inclusion probabilities, conditional on the graph, for the
/// positive (window co-occurrence) and negative (unigram draw) events, under
/// the uniform-directed-edge walk initialization. Both returned matrices are
/// symmetric with zero diagonal; entry (i, j) of the first is the probability
/// that vertices i and j appear within `window_w` positions of each other in
/// one walk, and of the second that the pair is produced by at least one of
/// the l-per-position negative draws attached to that walk.
pub fn exact_pair_probabilities(g: &Graph, cfg: &WalkConfig) -> Result<(Mat, Mat)> {
    cfg.validate()?;
    let n = g.n();
    if n > EXACT_MAX_N || cfg.walk_len_k > EXACT_MAX_K {
        return Err(Error::input(format!(
            "exact enumeration bounded to n <= {EXACT_MAX_N}, k <= {EXACT_MAX_K}"
        )));
    }
    if g.m() == 0 {
        return Err(Error::input("graph has no edges"));
    }
    let weights = unigram_weights(g, cfg.unigram_alpha);
    let wsum: f64 = weights.iter().sum();
    if !(wsum > 0.0) {
        return Err(Error::input("unigram weights are all zero"));
    }
    let mut p_mat = Mat::zeros(n, n);
    let mut n_mat = Mat::zeros(n, n);
    let k = cfg.walk_len_k;
    let init_prob = 1.0 / (2.0 * g.m() as f64);

    let mut walk = Vec::with_capacity(k + 1);
    for slot in 0..2 * g.m() {
        let (a, b) = g.directed_edge(slot);
        walk.push(a);
        walk.push(b);
        enumerate(g, cfg, &mut walk, init_prob, k, &weights, wsum, &mut p_mat, &mut n_mat);
        walk.clear();
    }
    Ok((p_mat, n_mat))
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    g: &Graph,
    cfg: &WalkConfig,
    walk: &mut Vec<u32>,
    prob: f64,
    k: usize,
    weights: &[f64],
    wsum: f64,
    p_mat: &mut Mat,
    n_mat: &mut Mat,
) {
    if walk.len() == k + 1 {
        accumulate_leaf(g.n(), cfg, walk, prob, weights, wsum, p_mat, n_mat);
        return;
    }
    let prev = walk[walk.len() - 2];
    let cur = walk[walk.len() - 1];
    let tw = transition_weights(g, prev, cur, cfg.p, cfg.q).expect("walk state is an edge");
    let nb = g.neighbors(cur).to_vec();
    for (i, &next) in nb.iter().enumerate() {
        if tw[i] == 0.0 {
            continue;
        }
        walk.push(next);
        enumerate(g, cfg, walk, prob * tw[i], k, weights, wsum, p_mat, n_mat);
        walk.pop();
    }
}

#[allow(clippy::too_many_arguments)]
fn accumulate_leaf(
    n: usize,
    cfg: &WalkConfig,
    walk: &[u32],
    prob: f64,
    weights: &[f64],
    wsum: f64,
    p_mat: &mut Mat,
    n_mat: &mut Mat,
) {
    // positive event: union over in-window position pairs
    let mut seen: Vec<(u32, u32)> = Vec::new();
    for j in 0..walk.len() {
        let hi = (j + cfg.window_w).min(walk.len() - 1);
        for i in (j + 1)..=hi {
            let (a, b) = (walk[j].min(walk[i]), walk[j].max(walk[i]));
            if a != b && !seen.contains(&(a, b)) {
                seen.push((a, b));
            }
        }
    }
    for &(a, b) in &seen {
        let v = p_mat.get(a as usize, b as usize) + prob;
        p_mat.set(a as usize, b as usize, v);
        p_mat.set(b as usize, a as usize, v);
    }

    // negative event: each walk position draws l unigram negatives for the
    // vertex it visits; (u, v) enters N if v is drawn from u or u from v
    let l = cfg.negatives_l as u32;
    if l == 0 {
        return;
    }
    let mut counts: Vec<(u32, u32)> = Vec::new();
    for &v in walk {
        match counts.iter_mut().find(|(x, _)| *x == v) {
            Some((_, c)) => *c += 1,
            None => counts.push((v, 1)),
        }
    }
    let miss = |center: u32, target: u32, occ: u32| -> f64 {
        if occ == 0 {
            return 1.0;
        }
        let denom = match cfg.unigram_variant {
            UnigramVariant::AllVertices => wsum,
            UnigramVariant::ExcludeCenter => wsum - weights[center as usize],
        };
        if denom <= 0.0 {
            return 1.0;
        }
        let p_draw = weights[target as usize] / denom;
        (1.0 - p_draw).powi((l * occ) as i32)
    };
    for (idx, &(u, cu)) in counts.iter().enumerate() {
        for v in 0..n as u32 {
            if v == u {
                continue;
            }
            let cv = counts.iter().map(|&(x, c)| if x == v { c } else { 0 }).sum::<u32>();
            if cv > 0 && counts[..idx].iter().any(|&(x, _)| x == v) {
                // visited-visited pair already handled from the other side
                continue;
            }
            let q = miss(u, v, cu) * miss(v, u, cv);
            let val = n_mat.get(u as usize, v as usize) + prob * (1.0 - q);
            n_mat.set(u as usize, v as usize, val);
            n_mat.set(v as usize, u as usize, val);
        }
    }
}
