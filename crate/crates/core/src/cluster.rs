//! k-means++ / Lloyd clustering with restarts, and a spectral-clustering
//! baseline on the normalized graph Laplacian.
//!
//! The k-means objective is the mean squared distance (1/n) ||X - Theta C||_F^2.
//! Restarts run in parallel; the winner is the lowest cost with ties broken
//! by restart index, so the result does not depend on scheduling.
//!
//! Spectral clustering forms L = I - D^{-1/2} A D^{-1/2} with zero rows for
//! isolated vertices, takes the eigenvectors of the kappa smallest
//! eigenvalues (dense symmetric solve up to n = 3000, Lanczos with full
//! reorthogonalization above), row-normalizes, and k-means the rows.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::mat::{squared_distance, Mat};
use crate::rng::{derive_seed, rng_from};
use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub labels: Vec<u32>,
    pub centers: Mat,
    /// (1/n) sum of squared distances to the assigned center
    pub cost: f64,
}

const LLOYD_TOL: f64 = 1e-8;
const LLOYD_MAX_ITERS: usize = 300;

/// Best of `restarts` k-means++ / Lloyd runs.
pub fn kmeans(points: &Mat, k: usize, restarts: usize, seed: u64) -> Result<KMeansResult> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(Error::input(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
    }
    let restarts = restarts.max(1);
    let runs: Vec<(usize, KMeansResult)> = (0..restarts)
        .into_par_iter()
        .map(|r| (r, lloyd_once(points, k, derive_seed(seed, &[0x6b6d, r as u64]))))
        .collect();
    let best = runs
        .into_iter()
        .min_by(|(ri, a), (rj, b)| {
            a.cost.partial_cmp(&b.cost).unwrap().then(ri.cmp(rj))
        })
        .map(|(_, r)| r)
        .unwrap();
    Ok(best)
}

fn lloyd_once(points: &Mat, k: usize, seed: u64) -> KMeansResult {
    let n = points.rows();
    let d = points.cols();
    let mut rng = rng_from(seed, &[]);

    // k-means++ seeding
    let mut centers = Mat::zeros(k, d);
    let first = rng.random_range(0..n);
    centers.row_mut(0).copy_from_slice(points.row(first));
    let mut dist2: Vec<f64> = (0..n)
        .map(|i| squared_distance(points.row(i), centers.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = dist2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in dist2.iter().enumerate() {
                r -= w;
                if r <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).copy_from_slice(points.row(pick));
        for i in 0..n {
            dist2[i] = dist2[i].min(squared_distance(points.row(i), centers.row(c)));
        }
    }

    let mut labels = vec![0u32; n];
    let mut last_cost = f64::INFINITY;
    for _iter in 0..LLOYD_MAX_ITERS {
        // assignment
        let mut cost = 0.0;
        for i in 0..n {
            let mut best = 0u32;
            let mut bd = f64::INFINITY;
            for c in 0..k {
                let dd = squared_distance(points.row(i), centers.row(c));
                if dd < bd {
                    bd = dd;
                    best = c as u32;
                }
            }
            labels[i] = best;
            cost += bd;
        }
        cost /= n as f64;
        debug_assert!(cost <= last_cost + 1e-12, "Lloyd cost increased: {last_cost} -> {cost}");
        last_cost = cost;

        // update
        let mut sums = Mat::zeros(k, d);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i] as usize] += 1;
            crate::mat::axpy(1.0, points.row(i), sums.row_mut(labels[i] as usize));
        }
        // empty clusters restart from the point farthest from its center
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = squared_distance(points.row(a), centers.row(labels[a] as usize));
                        let db = squared_distance(points.row(b), centers.row(labels[b] as usize));
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                sums.row_mut(c).copy_from_slice(points.row(far));
                counts[c] = 1;
                labels[far] = c as u32;
            }
        }
        let mut moved: f64 = 0.0;
        for c in 0..k {
            let inv = 1.0 / counts[c] as f64;
            let mut delta = 0.0;
            {
                let (new_c, old_c) = (sums.row(c), centers.row(c));
                for j in 0..d {
                    let nc = new_c[j] * inv;
                    let dd = nc - old_c[j];
                    delta += dd * dd;
                }
            }
            for j in 0..d {
                let nc = sums.get(c, j) * inv;
                centers.set(c, j, nc);
            }
            moved = moved.max(delta.sqrt());
        }
        if moved < LLOYD_TOL {
            break;
        }
    }

    // final assignment against the converged centers
    let mut cost = 0.0;
    for i in 0..n {
        let mut best = 0u32;
        let mut bd = f64::INFINITY;
        for c in 0..k {
            let dd = squared_distance(points.row(i), centers.row(c));
            if dd < bd {
                bd = dd;
                best = c as u32;
            }
        }
        labels[i] = best;
        cost += bd;
    }
    KMeansResult { labels, centers, cost: cost / n as f64 }
}

/// Recompute the k-means objective from labels and centers.
pub fn kmeans_cost(points: &Mat, labels: &[u32], centers: &Mat) -> f64 {
    let n = points.rows();
    let total: f64 = (0..n)
        .map(|i| squared_distance(points.row(i), centers.row(labels[i] as usize)))
        .sum();
    total / n as f64
}

const DENSE_EIGEN_LIMIT: usize = 3000;

/// Eigenvectors of the kappa smallest eigenvalues of the normalized
/// Laplacian, as an n x kappa matrix, along with the eigenvalues.
pub fn laplacian_embedding(g: &Graph, kappa: usize) -> Result<(Mat, Vec<f64>)> {
    let n = g.n();
    if kappa == 0 || kappa > n {
        return Err(Error::input(format!("need 1 <= kappa <= n, got kappa = {kappa}")));
    }
    if n <= DENSE_EIGEN_LIMIT {
        let mut l: DMatrix<f64> = DMatrix::zeros(n, n);
        for v in 0..n as u32 {
            if g.degree(v) == 0 {
                continue; // zero row
            }
            l[(v as usize, v as usize)] = 1.0;
            let dv = g.degree(v) as f64;
            for &w in g.neighbors(v) {
                let dw = g.degree(w) as f64;
                l[(v as usize, w as usize)] = -1.0 / (dv * dw).sqrt();
            }
        }
        let eig = nalgebra::SymmetricEigen::new(l);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let emb = Mat::from_fn(n, kappa, |i, j| eig.eigenvectors[(i, order[j])]);
        let vals = order.iter().take(kappa).map(|&i| eig.eigenvalues[i]).collect();
        Ok((emb, vals))
    } else {
        lanczos_smallest(g, kappa)
    }
}

/// Lanczos with full reorthogonalization on B = 2I - L, whose largest
/// eigenvalues are L's smallest. L's spectrum lies in [0, 2] so B is PSD.
fn lanczos_smallest(g: &Graph, kappa: usize) -> Result<(Mat, Vec<f64>)> {
    let n = g.n();
    let steps = (4 * kappa + 60).min(n);
    let matvec = |x: &[f64], y: &mut [f64]| {
        for v in 0..n {
            let dv = g.degree(v as u32) as f64;
            if dv == 0.0 {
                y[v] = 2.0 * x[v]; // L row is zero
                continue;
            }
            let mut s = 0.0;
            for &w in g.neighbors(v as u32) {
                s += x[w as usize] / (dv * g.degree(w) as f64).sqrt();
            }
            y[v] = 2.0 * x[v] - (x[v] - s);
        }
    };
    let mut rng = rng_from(0x1a2c, &[n as u64]);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut alphas = Vec::with_capacity(steps);
    let mut betas = Vec::with_capacity(steps);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalize(&mut v);
    let mut w = vec![0.0; n];
    for j in 0..steps {
        matvec(&v, &mut w);
        let alpha = dotv(&w, &v);
        for k in 0..n {
            w[k] -= alpha * v[k];
        }
        if let Some(prev) = basis.last() {
            let b = *betas.last().unwrap();
            for k in 0..n {
                w[k] -= b * prev[k];
            }
        }
        // full reorthogonalization against the stored basis
        basis.push(v.clone());
        for q in &basis {
            let c = dotv(&w, q);
            for k in 0..n {
                w[k] -= c * q[k];
            }
        }
        alphas.push(alpha);
        let beta = dotv(&w, &w).sqrt();
        if j + 1 == steps || beta < 1e-12 {
            break;
        }
        betas.push(beta);
        for k in 0..n {
            v[k] = w[k] / beta;
        }
    }
    let m = alphas.len();
    let mut t: DMatrix<f64> = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m && i < betas.len() {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = nalgebra::SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    // largest of B first = smallest of L
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    if m < kappa {
        return Err(Error::numerical("Lanczos basis collapsed below kappa"));
    }
    let emb = Mat::from_fn(n, kappa, |i, j| {
        let col = order[j];
        (0..m).map(|s| basis[s][i] * eig.eigenvectors[(s, col)]).sum()
    });
    let vals = order.iter().take(kappa).map(|&c| 2.0 - eig.eigenvalues[c]).collect();
    Ok((emb, vals))
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let n = dotv(v, v).sqrt();
    if n > 0.0 {
        for x in v {
            *x /= n;
        }
    }
}

fn row_normalize(m: &mut Mat) {
    for i in 0..m.rows() {
        let r = m.row_mut(i);
        let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in r {
                *x /= norm;
            }
        }
    }
}

/// Spectral clustering of the whole graph as-is (no connectivity handling).
pub fn spectral_clustering_direct(g: &Graph, kappa: usize, seed: u64) -> Result<Vec<u32>> {
    let (mut emb, _) = laplacian_embedding(g, kappa)?;
    row_normalize(&mut emb);
    let result = kmeans(&emb, kappa, 10, derive_seed(seed, &[0x5c]))?;
    Ok(result.labels)
}

/// Spectral clustering with the disconnected-graph convention: run on the
/// largest component and send every remaining vertex to the center nearest
/// the origin (their embedding rows are zero).
pub fn spectral_clustering(g: &Graph, kappa: usize, seed: u64) -> Result<Vec<u32>> {
    let n = g.n();
    if kappa == 0 || kappa > n {
        return Err(Error::input(format!("need 1 <= kappa <= n, got kappa = {kappa}")));
    }
    let (comp, ncomp) = g.components();
    if ncomp <= 1 {
        return spectral_clustering_direct(g, kappa, seed);
    }
    let (sub, map) = g.largest_component();
    if kappa > sub.n() {
        return Err(Error::input("kappa exceeds the largest component size"));
    }
    let (mut emb, _) = laplacian_embedding(&sub, kappa)?;
    row_normalize(&mut emb);
    let result = kmeans(&emb, kappa, 10, derive_seed(seed, &[0x5c]))?;
    let mut labels = vec![u32::MAX; n];
    for (new_id, &orig) in map.iter().enumerate() {
        labels[orig as usize] = result.labels[new_id];
    }
    // stragglers: zero embedding row -> nearest center to the origin
    let zero = vec![0.0; kappa];
    let nearest = (0..kappa)
        .min_by(|&a, &b| {
            squared_distance(&zero, result.centers.row(a))
                .partial_cmp(&squared_distance(&zero, result.centers.row(b)))
                .unwrap()
        })
        .unwrap() as u32;
    for (v, lab) in labels.iter_mut().enumerate() {
        if *lab == u32::MAX {
            debug_assert_ne!(comp[v], comp[map[0] as usize]);
            *lab = nearest;
        }
    }
    Ok(labels)
}
