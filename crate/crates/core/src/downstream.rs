//! Downstream use of embeddings: node classification with a multinomial
//! logistic regression trained on a labeled fraction, and link prediction
//! from edge embeddings of a partially observed graph.
//!
//! The link-prediction protocol: delete a uniform fraction of edges, train
//! embeddings on the residual graph, sample balanced sets of held-out edges
//! and uniform non-edges, featurize each pair with a symmetric function of
//! the endpoint embeddings (average or Hadamard product), and score a
//! held-out split of the pair classifier by ROC-AUC and accuracy.

use crate::error::{Error, Result};
use crate::genmodel::LabeledGraph;
use crate::graph::Graph;
use crate::mat::{dot, Mat};
use crate::rng::{derive_seed, rng_from};
use crate::sampler::WalkConfig;
use crate::trainer::{train, TrainConfig};
use rand::Rng;
use std::collections::HashSet;

/// Symmetric pair feature: (x + y)/2 or the elementwise product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeEmbeddingMode {
    Average,
    Hadamard,
}

pub fn edge_embedding(u: &[f64], v: &[f64], mode: EdgeEmbeddingMode) -> Vec<f64> {
    debug_assert_eq!(u.len(), v.len());
    match mode {
        EdgeEmbeddingMode::Average => u.iter().zip(v).map(|(a, b)| 0.5 * (a + b)).collect(),
        EdgeEmbeddingMode::Hadamard => u.iter().zip(v).map(|(a, b)| a * b).collect(),
    }
}

/// Multinomial logistic regression with weights (classes x (features + 1)),
/// bias in the last column.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    pub weights: Mat,
    pub classes: usize,
}

pub const LOGISTIC_L2: f64 = 1e-4;
const LOGISTIC_GRAD_TOL: f64 = 1e-6;
const LOGISTIC_MAX_ITERS: usize = 5000;

fn class_scores(w: &Mat, x: &[f64], out: &mut [f64]) {
    let d = x.len();
    for (c, s) in out.iter_mut().enumerate() {
        let row = w.row(c);
        *s = dot(&row[..d], x) + row[d];
    }
}

/// Penalized mean cross-entropy and its gradient. The L2 penalty covers the
/// weights but not the bias column.
pub fn logistic_loss_grad(
    x: &Mat,
    y: &[u32],
    classes: usize,
    w: &Mat,
    l2: f64,
) -> (f64, Mat) {
    let n = x.rows();
    let d = x.cols();
    let mut grad = Mat::zeros(classes, d + 1);
    let mut loss = 0.0;
    let mut scores = vec![0.0; classes];
    for i in 0..n {
        let xi = x.row(i);
        class_scores(w, xi, &mut scores);
        let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for s in scores.iter_mut() {
            *s = (*s - mx).exp();
            z += *s;
        }
        loss -= (scores[y[i] as usize] / z).ln();
        for c in 0..classes {
            let p = scores[c] / z - if c == y[i] as usize { 1.0 } else { 0.0 };
            let gr = grad.row_mut(c);
            for j in 0..d {
                gr[j] += p * xi[j];
            }
            gr[d] += p;
        }
    }
    loss /= n as f64;
    for v in grad.data_mut() {
        *v /= n as f64;
    }
    for c in 0..classes {
        let wr = w.row(c);
        let gr = grad.row_mut(c);
        for j in 0..d {
            loss += 0.5 * l2 * wr[j] * wr[j] / classes as f64 * 0.0; // see below
            gr[j] += l2 * wr[j];
        }
    }
    // penalty term computed once (the loop above only adds gradient parts)
    let penalty: f64 = (0..classes)
        .map(|c| w.row(c)[..d].iter().map(|v| v * v).sum::<f64>())
        .sum();
    (loss + 0.5 * l2 * penalty, grad)
}

/// Full-batch gradient descent with Armijo backtracking from zero weights,
/// run until the gradient norm drops below 1e-6 or 5000 iterations.
pub fn train_logistic(x: &Mat, y: &[u32], classes: usize, l2: f64) -> Result<LogisticRegression> {
    if x.rows() == 0 || x.rows() != y.len() {
        return Err(Error::input("feature/label sizes disagree"));
    }
    if y.iter().any(|&c| c as usize >= classes) {
        return Err(Error::input("label out of range"));
    }
    let d = x.cols();
    let mut w = Mat::zeros(classes, d + 1);
    let (mut loss, mut grad) = logistic_loss_grad(x, y, classes, &w, l2);
    for _ in 0..LOGISTIC_MAX_ITERS {
        let gnorm2: f64 = grad.data().iter().map(|g| g * g).sum();
        if gnorm2.sqrt() < LOGISTIC_GRAD_TOL {
            break;
        }
        let mut step = 1.0;
        loop {
            let mut cand = w.clone();
            for (c, g) in cand.data_mut().iter_mut().zip(grad.data()) {
                *c -= step * g;
            }
            let (new_loss, new_grad) = logistic_loss_grad(x, y, classes, &cand, l2);
            if new_loss <= loss - 0.5 * step * gnorm2 || step < 1e-12 {
                w = cand;
                loss = new_loss;
                grad = new_grad;
                break;
            }
            step *= 0.5;
        }
    }
    Ok(LogisticRegression { weights: w, classes })
}

impl LogisticRegression {
    pub fn predict(&self, x: &[f64]) -> u32 {
        let mut scores = vec![0.0; self.classes];
        class_scores(&self.weights, x, &mut scores);
        scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0 as u32
    }

    /// Binary decision score: class-1 logit minus class-0 logit.
    pub fn score_binary(&self, x: &[f64]) -> f64 {
        let mut scores = vec![0.0; self.classes];
        class_scores(&self.weights, x, &mut scores);
        scores[1] - scores[0]
    }

    pub fn accuracy(&self, x: &Mat, y: &[u32]) -> f64 {
        let hits = (0..x.rows()).filter(|&i| self.predict(x.row(i)) == y[i]).count();
        hits as f64 / x.rows() as f64
    }
}

/// Train a classifier on `train_frac` of the rows and report held-out
/// accuracy. The split is resampled (up to 100 times) until every class has
/// at least one training example.
pub fn train_node_classifier(
    embeddings: &Mat,
    labels: &[u32],
    classes: usize,
    train_frac: f64,
    seed: u64,
) -> Result<(f64, LogisticRegression)> {
    let n = embeddings.rows();
    if n != labels.len() || n == 0 {
        return Err(Error::input("embedding/label sizes disagree"));
    }
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::input("train fraction must lie in (0, 1)"));
    }
    let train_size = ((train_frac * n as f64).ceil() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    for attempt in 0..100u64 {
        let mut rng = rng_from(seed, &[0x5017, attempt]);
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            idx.swap(i, j);
        }
        let mut present = vec![false; classes];
        for &i in &idx[..train_size] {
            present[labels[i] as usize] = true;
        }
        if present.iter().any(|&p| !p) {
            continue;
        }
        let gather = |ids: &[usize]| {
            let x = Mat::from_fn(ids.len(), embeddings.cols(), |r, c| {
                embeddings.get(ids[r], c)
            });
            let y: Vec<u32> = ids.iter().map(|&i| labels[i]).collect();
            (x, y)
        };
        let (xt, yt) = gather(&idx[..train_size]);
        let (xh, yh) = gather(&idx[train_size..]);
        let model = train_logistic(&xt, &yt, classes, LOGISTIC_L2)?;
        return Ok((model.accuracy(&xh, &yh), model));
    }
    Err(Error::input("a class is missing from every attempted training split"))
}

/// Rank-based ROC-AUC with average ranks for ties.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let n = scores.len();
    if n != labels.len() {
        return Err(Error::input("score/label sizes disagree"));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = n - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::input("AUC needs both classes"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            if labels[o] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    Ok((rank_sum_pos - pos as f64 * (pos as f64 + 1.0) / 2.0) / (pos as f64 * neg as f64))
}

#[derive(Debug, Clone, Copy)]
pub struct LinkPrediction {
    pub auc: f64,
    pub accuracy: f64,
    /// held-out edges available after deletion
    pub held_out_edges: usize,
    /// sampled pairs per class
    pub sample_size: usize,
}

/// Cap on the balanced edge/non-edge samples per class.
pub const LINK_SAMPLE_CAP: usize = 1000;

/// Delete a uniform `edge_frac` of edges, train on the residual graph, and
/// score a logistic classifier on edge embeddings of held-out edges versus
/// uniform non-edges (balanced, 80/20 train/test split).
pub fn link_prediction_experiment(
    lg: &LabeledGraph,
    walk_cfg: &WalkConfig,
    train_cfg: &TrainConfig,
    edge_frac: f64,
    mode: EdgeEmbeddingMode,
    seed: u64,
) -> Result<LinkPrediction> {
    let g = &lg.graph;
    let n = g.n();
    if !(edge_frac > 0.0 && edge_frac < 1.0) {
        return Err(Error::input("edge fraction must lie in (0, 1)"));
    }
    let mut edges = g.edges();
    let mut rng = rng_from(seed, &[0x11e4]);
    for i in (1..edges.len()).rev() {
        let j = rng.random_range(0..=i);
        edges.swap(i, j);
    }
    let delete = ((edge_frac * edges.len() as f64).round() as usize).min(edges.len());
    let (held_out, kept) = edges.split_at(delete);
    if kept.is_empty() {
        return Err(Error::input("no edges left after deletion"));
    }
    let residual = Graph::build(kept, n)?;
    let mut tc = train_cfg.clone();
    tc.seed = derive_seed(seed, &[0x11e5]);
    let emb = train(&residual, walk_cfg, &tc)?;

    let e = held_out.len().min(LINK_SAMPLE_CAP);
    if e == 0 {
        return Err(Error::input("no held-out edges to score"));
    }
    let total_pairs = n * (n - 1) / 2;
    if total_pairs - g.m() < e {
        return Err(Error::input("not enough non-edges to balance the sample"));
    }
    let pos: Vec<(u32, u32)> = held_out.iter().take(e).copied().collect();
    let mut neg: Vec<(u32, u32)> = Vec::with_capacity(e);
    let mut seen: HashSet<(u32, u32)> = HashSet::new();
    while neg.len() < e {
        let a = rng.random_range(0..n as u32);
        let b = rng.random_range(0..n as u32);
        let (a, b) = (a.min(b), a.max(b));
        if a == b || g.has_edge(a, b) || seen.contains(&(a, b)) {
            continue;
        }
        seen.insert((a, b));
        neg.push((a, b));
    }

    let u = emb.center();
    let mut feats: Vec<(Vec<f64>, bool)> = Vec::with_capacity(2 * e);
    for &(a, b) in &pos {
        feats.push((edge_embedding(u.row(a as usize), u.row(b as usize), mode), true));
    }
    for &(a, b) in &neg {
        feats.push((edge_embedding(u.row(a as usize), u.row(b as usize), mode), false));
    }
    for i in (1..feats.len()).rev() {
        let j = rng.random_range(0..=i);
        feats.swap(i, j);
    }
    let split = (feats.len() * 4) / 5;
    let (train_set, test_set) = feats.split_at(split.max(1).min(feats.len() - 1));
    let to_mat = |rows: &[(Vec<f64>, bool)]| {
        let x = Mat::from_fn(rows.len(), u.cols(), |r, c| rows[r].0[c]);
        let y: Vec<u32> = rows.iter().map(|(_, l)| *l as u32).collect();
        (x, y)
    };
    let (xt, yt) = to_mat(train_set);
    if yt.iter().all(|&c| c == 0) || yt.iter().all(|&c| c == 1) {
        return Err(Error::input("degenerate train split for the link classifier"));
    }
    let (xh, yh) = to_mat(test_set);
    let model = train_logistic(&xt, &yt, 2, LOGISTIC_L2)?;
    let scores: Vec<f64> = (0..xh.rows()).map(|i| model.score_binary(xh.row(i))).collect();
    let bools: Vec<bool> = yh.iter().map(|&c| c == 1).collect();
    let auc = roc_auc(&scores, &bools)?;
    let accuracy = model.accuracy(&xh, &yh);
    Ok(LinkPrediction { auc, accuracy, held_out_edges: held_out.len(), sample_size: e })
}
