//! Samplers for stochastic block models, the planted-partition special case,
//! and degree-corrected variants.
//!
//! A vertex u carries latent variables (c(u), theta_u); conditional on them,
//! each unordered pair (u, v) is linked independently with probability
//! `clip(rho * theta_u * theta_v * P[c(u)][c(v)])`. Probabilities above 1 are
//! clipped and counted rather than rejected, which keeps generation defined
//! for any parameter combination.
//!
//! Pair iteration uses geometric skipping at a per-block upper bound with
//! acceptance thinning, so sparse graphs are generated in O(n + m) per block
//! pair rather than O(n^2). Every block pair owns an RNG stream derived from
//! the seed, so output is identical however block pairs are scheduled.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::rng_from;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

/// Degree-correction specification.
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaSpec {
    Constant(f64),
    /// theta = |Z| + 1 - (2*pi)^{-1/2} with Z ~ N(0, sigma)
    HalfNormal { sigma: f64 },
    Array(Vec<f64>),
}

impl ThetaSpec {
    pub fn is_constant(&self) -> bool {
        matches!(self, ThetaSpec::Constant(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub kappa: usize,
    pub pi: Vec<f64>,
    /// kappa x kappa symmetric base probability matrix, row major
    pub p: Vec<Vec<f64>>,
    pub rho: f64,
    pub theta: ThetaSpec,
    /// fix community sizes as evenly as possible instead of iid labels
    pub exact_balance: bool,
}

impl GenParams {
    pub fn validate(&self) -> Result<()> {
        let k = self.kappa;
        if k == 0 {
            return Err(Error::input("kappa must be >= 1"));
        }
        if self.pi.len() != k || self.p.len() != k || self.p.iter().any(|r| r.len() != k) {
            return Err(Error::input("pi/P dimensions must match kappa"));
        }
        if self.pi.iter().any(|&x| x < 0.0) {
            return Err(Error::input("pi entries must be non-negative"));
        }
        let s: f64 = self.pi.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::input(format!("pi must sum to 1, got {s}")));
        }
        for a in 0..k {
            for b in 0..k {
                let v = self.p[a][b];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::input("P entries must lie in [0, 1]"));
                }
                if (v - self.p[b][a]).abs() > 1e-12 {
                    return Err(Error::input("P must be symmetric"));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::input("rho must lie in [0, 1]"));
        }
        if let ThetaSpec::HalfNormal { sigma } = self.theta {
            if !(sigma > 0.0) {
                return Err(Error::input("half-normal sigma must be positive"));
            }
        }
        Ok(())
    }
}

/// Planted-partition parameters: `p_tilde` on the diagonal of P, `q_tilde`
/// off it, equal community proportions, no degree correction. Disassortative
/// models (`q_tilde > p_tilde`) are allowed.
pub fn planted_partition(kappa: usize, p_tilde: f64, q_tilde: f64, rho: f64) -> Result<GenParams> {
    if kappa == 0 {
        return Err(Error::input("kappa must be >= 1"));
    }
    let p = (0..kappa)
        .map(|a| (0..kappa).map(|b| if a == b { p_tilde } else { q_tilde }).collect())
        .collect();
    let params = GenParams {
        kappa,
        pi: vec![1.0 / kappa as f64; kappa],
        p,
        rho,
        theta: ThetaSpec::Constant(1.0),
        exact_balance: false,
    };
    params.validate()?;
    Ok(params)
}

/// A sampled graph together with its ground-truth latent variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGraph {
    pub graph: Graph,
    pub labels: Vec<u32>,
    pub thetas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SampleStats {
    /// unordered pairs whose link probability was clipped to 1
    pub clipped_pairs: u64,
}

pub const HALF_NORMAL_SHIFT: f64 = 1.0 - 0.3989422804014327; // 1 - (2*pi)^{-1/2}

/// iid draws of |Z| + 1 - (2*pi)^{-1/2}, Z ~ N(0, sigma); always positive.
pub fn sample_theta_halfnormal(n: usize, sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::input("sigma must be positive"));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::input(e.to_string()))?;
    let mut rng = rng_from(seed, &[0x7e7a]);
    Ok((0..n).map(|_| normal.sample(&mut rng).abs() + HALF_NORMAL_SHIFT).collect())
}

pub fn sample_graph(params: &GenParams, n: usize, seed: u64) -> Result<LabeledGraph> {
    sample_graph_with_stats(params, n, seed).map(|(g, _)| g)
}

pub fn sample_graph_with_stats(
    params: &GenParams,
    n: usize,
    seed: u64,
) -> Result<(LabeledGraph, SampleStats)> {
    params.validate()?;
    let k = params.kappa;

    let labels: Vec<u32> = if params.exact_balance {
        let mut labs: Vec<u32> = (0..n).map(|i| (i % k) as u32).collect();
        let mut rng = rng_from(seed, &[0]);
        // Fisher-Yates so vertex identity carries no information
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            labs.swap(i, j);
        }
        labs
    } else {
        let mut cum = vec![0.0; k];
        let mut acc = 0.0;
        for (i, &pi) in params.pi.iter().enumerate() {
            acc += pi;
            cum[i] = acc;
        }
        let mut rng = rng_from(seed, &[0]);
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                cum.iter().position(|&c| u < c).unwrap_or(k - 1) as u32
            })
            .collect()
    };

    let thetas: Vec<f64> = match &params.theta {
        ThetaSpec::Constant(c) => vec![*c; n],
        ThetaSpec::HalfNormal { sigma } => sample_theta_halfnormal(n, *sigma, seed ^ 0x5eed)?,
        ThetaSpec::Array(a) => {
            if a.len() != n {
                return Err(Error::input("theta array length must equal n"));
            }
            a.clone()
        }
    };
    if thetas.iter().any(|&t| t < 0.0 || !t.is_finite()) {
        return Err(Error::input("thetas must be finite and non-negative"));
    }

    // sort vertices by label so each block pair is a contiguous rectangle
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_by_key(|&v| labels[v as usize]);
    let mut block_start = vec![0usize; k + 1];
    {
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l as usize] += 1;
        }
        for a in 0..k {
            block_start[a + 1] = block_start[a] + counts[a];
        }
    }
    let theta_sorted: Vec<f64> = order.iter().map(|&v| thetas[v as usize]).collect();
    let block_theta_max: Vec<f64> = (0..k)
        .map(|a| {
            theta_sorted[block_start[a]..block_start[a + 1]]
                .iter()
                .fold(0.0f64, |m, &t| m.max(t))
        })
        .collect();

    let pairs: Vec<(usize, usize)> =
        (0..k).flat_map(|a| (a..k).map(move |b| (a, b))).collect();
    let results: Vec<(Vec<(u32, u32)>, u64)> = pairs
        .par_iter()
        .map(|&(a, b)| {
            sample_block_pair(
                params,
                seed,
                a,
                b,
                &order,
                &block_start,
                &theta_sorted,
                &block_theta_max,
            )
        })
        .collect();

    let mut edges = Vec::new();
    let mut clipped = 0u64;
    for (mut e, c) in results {
        edges.append(&mut e);
        clipped += c;
    }
    let graph = Graph::build(&edges, n)?;
    Ok((LabeledGraph { graph, labels, thetas }, SampleStats { clipped_pairs: clipped }))
}

#[allow(clippy::too_many_arguments)]
fn sample_block_pair(
    params: &GenParams,
    seed: u64,
    a: usize,
    b: usize,
    order: &[u32],
    block_start: &[usize],
    theta_sorted: &[f64],
    block_theta_max: &[f64],
) -> (Vec<(u32, u32)>, u64) {
    let rho = params.rho;
    let p_ab = params.p[a][b];
    let (sa, ea) = (block_start[a], block_start[a + 1]);
    let (sb, eb) = (block_start[b], block_start[b + 1]);
    let rows = ea - sa;
    let total_pairs: u64 = if a == b {
        let r = rows as u64;
        r * r.saturating_sub(1) / 2
    } else {
        (rows as u64) * ((eb - sb) as u64)
    };
    let mut edges = Vec::new();
    let mut clipped = 0u64;
    if total_pairs == 0 || rho * p_ab == 0.0 {
        return (edges, clipped);
    }
    let p_ub = (rho * p_ab * block_theta_max[a] * block_theta_max[b]).min(1.0);
    if p_ub <= 0.0 {
        return (edges, clipped);
    }
    let mut rng = rng_from(seed, &[2, a as u64, b as u64]);
    let dense = p_ub >= 0.5;
    let log1m = if dense { 0.0 } else { (1.0 - p_ub).ln() };

    let mut t: u64 = 0;
    while t < total_pairs {
        let candidate = if dense {
            let c = t;
            t += 1;
            if rng.random::<f64>() >= p_ub {
                continue;
            }
            c
        } else {
            let u: f64 = rng.random();
            let gap = (u.ln() / log1m).floor() as u64;
            let c = t.saturating_add(gap);
            if c >= total_pairs {
                break;
            }
            t = c + 1;
            c
        };
        let (i, j) = if a == b {
            unrank_triangle(candidate, rows as u64)
        } else {
            let cols = (eb - sb) as u64;
            ((candidate / cols) as usize, (candidate % cols) as usize)
        };
        let (ui, vj) = (sa + i, sb + j);
        let raw = rho * p_ab * theta_sorted[ui] * theta_sorted[vj];
        let p_actual = raw.min(1.0);
        if raw > 1.0 {
            clipped += 1;
        }
        // thinning: candidate proposed at rate p_ub, accept at p_actual/p_ub
        if p_actual >= p_ub || rng.random::<f64>() < p_actual / p_ub {
            edges.push((order[ui], order[vj]));
        }
    }
    (edges, clipped)
}

/// Map a flat index into the strict upper triangle of an s x s block to
/// (row, col) with row < col, enumerated row by row.
fn unrank_triangle(t: u64, s: u64) -> (usize, usize) {
    // row i contributes s-1-i pairs; solve for the row then the offset
    let mut i = 0u64;
    let mut skipped = 0u64;
    loop {
        let row_len = s - 1 - i;
        if t < skipped + row_len {
            return (i as usize, (i + 1 + (t - skipped)) as usize);
        }
        skipped += row_len;
        i += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_partition_matrix() {
        let p = planted_partition(2, 0.8, 0.2, 0.1).unwrap();
        assert_eq!(p.pi, vec![0.5, 0.5]);
        assert_eq!(p.p, vec![vec![0.8, 0.2], vec![0.2, 0.8]]);
        let one = planted_partition(1, 0.7, 0.0, 1.0).unwrap();
        assert_eq!(one.p, vec![vec![0.7]]);
        let flat = planted_partition(3, 0.4, 0.4, 1.0).unwrap();
        assert!(flat.p.iter().flatten().all(|&v| v == 0.4));
        assert!(planted_partition(0, 0.5, 0.5, 1.0).is_err());
    }

    #[test]
    fn rho_zero_gives_empty_graph() {
        let params = planted_partition(3, 0.9, 0.4, 0.0).unwrap();
        let lg = sample_graph(&params, 50, 7).unwrap();
        assert_eq!(lg.graph.m(), 0);
    }

    #[test]
    fn all_one_probabilities_give_complete_graph() {
        let params = GenParams {
            kappa: 2,
            pi: vec![0.5, 0.5],
            p: vec![vec![1.0, 1.0], vec![1.0, 1.0]],
            rho: 1.0,
            theta: ThetaSpec::Constant(1.0),
            exact_balance: false,
        };
        let n = 40;
        let lg = sample_graph(&params, n, 3).unwrap();
        assert_eq!(lg.graph.m(), n * (n - 1) / 2);
    }

    #[test]
    fn determinism_byte_for_byte() {
        let params = planted_partition(3, 0.8, 0.1, 0.05).unwrap();
        let a = sample_graph(&params, 500, 99).unwrap();
        let b = sample_graph(&params, 500, 99).unwrap();
        assert_eq!(a, b);
        let c = sample_graph(&params, 500, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn within_to_cross_edge_ratio_tracks_p_over_q() {
        // oracle: expected ratio = (p/q) * (#within pairs / #cross pairs),
        // estimated over replicates
        let n = 2000;
        let rho = (n as f64).ln() / n as f64;
        let params = planted_partition(2, 1.0, 0.05, rho).unwrap();
        let mut within = 0u64;
        let mut cross = 0u64;
        let mut within_pairs = 0u64;
        let mut cross_pairs = 0u64;
        for rep in 0..50 {
            let lg = sample_graph(&params, n, 1000 + rep).unwrap();
            for (u, v) in lg.graph.edges() {
                if lg.labels[u as usize] == lg.labels[v as usize] {
                    within += 1;
                } else {
                    cross += 1;
                }
            }
            let n1 = lg.labels.iter().filter(|&&l| l == 0).count() as u64;
            let n2 = n as u64 - n1;
            within_pairs += n1 * (n1 - 1) / 2 + n2 * (n2 - 1) / 2;
            cross_pairs += n1 * n2;
        }
        let ratio = (within as f64 / within_pairs as f64) / (cross as f64 / cross_pairs as f64);
        assert!((ratio - 20.0).abs() < 2.0, "ratio = {ratio}");
    }

    #[test]
    fn class_pair_edge_frequency_in_binomial_band() {
        let params = GenParams {
            kappa: 2,
            pi: vec![0.5, 0.5],
            p: vec![vec![0.6, 0.15], vec![0.15, 0.3]],
            rho: 0.4,
            theta: ThetaSpec::Constant(1.0),
            exact_balance: false,
        };
        let mut count = [[0u64; 2]; 2];
        let mut pairs = [[0u64; 2]; 2];
        for rep in 0..20 {
            let lg = sample_graph(&params, 300, 500 + rep).unwrap();
            let mut sizes = [0u64; 2];
            for &l in &lg.labels {
                sizes[l as usize] += 1;
            }
            pairs[0][0] += sizes[0] * (sizes[0] - 1) / 2;
            pairs[1][1] += sizes[1] * (sizes[1] - 1) / 2;
            pairs[0][1] += sizes[0] * sizes[1];
            for (u, v) in lg.graph.edges() {
                let (a, b) = (lg.labels[u as usize] as usize, lg.labels[v as usize] as usize);
                count[a.min(b)][a.max(b)] += 1;
            }
        }
        for (a, b) in [(0, 0), (0, 1), (1, 1)] {
            let p = 0.4 * params.p[a][b];
            let npairs = pairs[a][b] as f64;
            let mean = npairs * p;
            let sd = (npairs * p * (1.0 - p)).sqrt();
            let got = count[a][b] as f64;
            assert!((got - mean).abs() < 3.0 * sd, "block ({a},{b}): got {got}, want {mean} +- {}", 3.0 * sd);
        }
    }

    #[test]
    fn label_marginals_match_pi() {
        let params = GenParams {
            kappa: 3,
            pi: vec![0.2, 0.3, 0.5],
            p: vec![vec![0.0; 3]; 3],
            rho: 0.0,
            theta: ThetaSpec::Constant(1.0),
            exact_balance: false,
        };
        let n = 100_000;
        let lg = sample_graph(&params, n, 42).unwrap();
        let mut counts = [0f64; 3];
        for &l in &lg.labels {
            counts[l as usize] += 1.0;
        }
        let chi2: f64 = (0..3)
            .map(|i| {
                let e = params.pi[i] * n as f64;
                (counts[i] - e).powi(2) / e
            })
            .sum();
        // chi-square(2) 99.9% quantile
        assert!(chi2 < 13.816, "chi2 = {chi2}");
    }

    #[test]
    fn exact_balance_sizes() {
        let mut params = planted_partition(3, 0.5, 0.5, 0.0).unwrap();
        params.exact_balance = true;
        let lg = sample_graph(&params, 100, 1).unwrap();
        let mut counts = [0usize; 3];
        for &l in &lg.labels {
            counts[l as usize] += 1;
        }
        assert_eq!(counts.iter().max().unwrap() - counts.iter().min().unwrap(), 1);
    }

    #[test]
    fn halfnormal_theta_moments() {
        // analytic half-normal mean: sigma*sqrt(2/pi) + shift
        let sigma = 0.25f64;
        let want = sigma * (2.0 / std::f64::consts::PI).sqrt() + HALF_NORMAL_SHIFT;
        let thetas = sample_theta_halfnormal(1_000_000, sigma, 5).unwrap();
        let mean = thetas.iter().sum::<f64>() / thetas.len() as f64;
        assert!((mean - want).abs() < 0.01, "mean = {mean}, want {want}");
        assert!((want - 0.8006).abs() < 1e-3);
        assert!(thetas.iter().all(|&t| t > 0.0));
        // sigma -> 0 limit collapses to the shift constant
        let tiny = sample_theta_halfnormal(1000, 1e-12, 6).unwrap();
        assert!(tiny.iter().all(|&t| (t - HALF_NORMAL_SHIFT).abs() < 1e-9));
        assert!((HALF_NORMAL_SHIFT - 0.6011).abs() < 1e-4);
    }

    #[test]
    fn clipping_is_counted() {
        let params = GenParams {
            kappa: 1,
            pi: vec![1.0],
            p: vec![vec![1.0]],
            rho: 1.0,
            theta: ThetaSpec::Constant(2.0),
            exact_balance: false,
        };
        let (lg, stats) = sample_graph_with_stats(&params, 10, 1).unwrap();
        assert_eq!(lg.graph.m(), 45);
        assert_eq!(stats.clipped_pairs, 45);
    }

    #[test]
    fn more_communities_than_vertices_is_fine() {
        // empty blocks must not break pair enumeration
        let params = planted_partition(40, 0.9, 0.3, 1.0).unwrap();
        let lg = sample_graph(&params, 12, 3).unwrap();
        assert_eq!(lg.labels.len(), 12);
        let edges = lg.graph.edges();
        for (u, v) in edges {
            assert!(u < 12 && v < 12);
        }
    }

    #[test]
    fn unrank_triangle_is_bijective() {
        let s = 7u64;
        let mut seen = std::collections::HashSet::new();
        for t in 0..s * (s - 1) / 2 {
            let (i, j) = unrank_triangle(t, s);
            assert!(i < j && j < s as usize);
            assert!(seen.insert((i, j)));
        }
    }
}
