//! Closed-form limit objects for DeepWalk sampling on (DC)SBMs: the edge
//! functional, sampling-weight functions, the community-level limit gram
//! matrix in unconstrained and constrained modes, its balanced factor rows,
//! and the deviation statistics that compare trained embeddings against
//! those targets.
//!
//! Notation used throughout: `P_tilde[l] = sum_j pi_j P[l][j]`,
//! `E_W(alpha) = E[theta^alpha] * E[theta]^alpha * sum_l pi_l P_tilde[l]^alpha`,
//! and `W_i = theta_i * E[theta] * P_tilde[c(i)]`.
//!
//! The unconstrained community matrix is
//!
//! ```text
//! M[l][m] = log( 2 E_W(a) / ((1 + 1/k) E[th] E[th]^a)
//!               * P[l][m] / (Pt[m] Pt[l]^a + Pt[m]^a Pt[l]) )
//! ```
//!
//! which for the planted partition collapses to `alpha*` on the diagonal and
//! `beta*` off it, with `alpha* - beta* = log(p/q)` for every walk length.
//! The constrained (single-matrix) optimum solves a scalar gradient-matching
//! equation whose root is positive exactly when p > q, and is zero otherwise.

use crate::error::{Error, Result};
use crate::genmodel::{GenParams, ThetaSpec, HALF_NORMAL_SHIFT};
use crate::mat::{squared_distance, Mat};
use crate::num::{adaptive_simpson, sigmoid};
use crate::sampler::WalkConfig;
use nalgebra::DMatrix;

/// E[theta^alpha] for a degree-correction specification. Constant thetas are
/// analytic, the half-normal recipe is integrated by adaptive quadrature to
/// 1e-10, and user arrays use their empirical moment.
pub fn theta_moment(spec: &ThetaSpec, alpha: f64) -> Result<f64> {
    match spec {
        ThetaSpec::Constant(c) => {
            if *c <= 0.0 && alpha < 0.0 {
                return Err(Error::input("theta = 0 with negative exponent"));
            }
            Ok(if alpha == 0.0 { 1.0 } else { c.powf(alpha) })
        }
        ThetaSpec::HalfNormal { sigma } => {
            if !(*sigma > 0.0) {
                return Err(Error::input("sigma must be positive"));
            }
            let s = *sigma;
            let norm = 2.0 / (s * (2.0 * std::f64::consts::PI).sqrt());
            let f = move |x: f64| (x + HALF_NORMAL_SHIFT).powf(alpha) * norm * (-x * x / (2.0 * s * s)).exp();
            Ok(adaptive_simpson(&f, 0.0, 13.0 * s, 1e-12))
        }
        ThetaSpec::Array(v) => {
            if v.is_empty() {
                return Err(Error::input("empty theta array"));
            }
            if alpha < 0.0 && v.iter().any(|&t| t <= 0.0) {
                return Err(Error::input("theta = 0 with negative exponent"));
            }
            Ok(v.iter().map(|&t| t.powf(alpha)).sum::<f64>() / v.len() as f64)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFunctional {
    /// E_W(alpha)
    pub value: f64,
    /// P_tilde[l] = sum_j pi_j P[l][j], one entry per community
    pub p_tilde: Vec<f64>,
}

/// The edge functional E_W(alpha) together with the per-community mean row
/// probabilities it is built from.
pub fn edge_functional(params: &GenParams, alpha: f64) -> Result<EdgeFunctional> {
    params.validate()?;
    let k = params.kappa;
    let p_tilde: Vec<f64> = (0..k)
        .map(|l| (0..k).map(|j| params.pi[j] * params.p[l][j]).sum())
        .collect();
    if alpha < 0.0 && p_tilde.iter().any(|&x| x == 0.0) {
        return Err(Error::input("negative alpha with a zero mean row probability"));
    }
    let mix: f64 = (0..k)
        .map(|l| params.pi[l] * if alpha == 0.0 { 1.0 } else { p_tilde[l].powf(alpha) })
        .sum();
    let value = theta_moment(&params.theta, alpha)? * theta_moment(&params.theta, 1.0)?.powf(alpha) * mix;
    Ok(EdgeFunctional { value, p_tilde })
}

/// Latent variable of a vertex: community index and degree factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lambda {
    pub community: usize,
    pub theta: f64,
}

/// DeepWalk sampling-weight functions (f_P, f_N) at a pair of latent
/// variables: f_P = 2k / (rho E_W(1)) and
/// f_N = l(k+1)/(E_W(1) E_W(a)) * (W_i W_j^a + W_i^a W_j).
pub fn deepwalk_weights(
    params: &GenParams,
    walk_len_k: usize,
    negatives_l: usize,
    alpha: f64,
    rho: f64,
    lam_i: Lambda,
    lam_j: Lambda,
) -> Result<(f64, f64)> {
    if !(rho > 0.0) {
        return Err(Error::input("rho must be positive"));
    }
    if walk_len_k == 0 {
        return Err(Error::input("walk length must be >= 1"));
    }
    if lam_i.community >= params.kappa || lam_j.community >= params.kappa {
        return Err(Error::input("community index out of range"));
    }
    let e1 = edge_functional(params, 1.0)?;
    let ea = edge_functional(params, alpha)?;
    let mean_theta = theta_moment(&params.theta, 1.0)?;
    let w = |lam: Lambda| lam.theta * mean_theta * e1.p_tilde[lam.community];
    let (wi, wj) = (w(lam_i), w(lam_j));
    let f_p = 2.0 * walk_len_k as f64 / (rho * e1.value);
    let f_n = negatives_l as f64 * (walk_len_k as f64 + 1.0) / (e1.value * ea.value)
        * (wi * wj.powf(alpha) + wi.powf(alpha) * wj);
    Ok((f_p, f_n))
}

/// Community-level limit gram matrix for unconstrained DeepWalk training.
/// Only valid when p = q = 1 and either the degree factors are constant or
/// the unigram exponent is 1; the sparsity factor cancels and never appears.
pub fn mstar_unconstrained(params: &GenParams, walk_cfg: &WalkConfig) -> Result<Mat> {
    params.validate()?;
    if walk_cfg.p != 1.0 || walk_cfg.q != 1.0 {
        return Err(Error::unsupported(
            "no closed form for biased walks (p, q != 1)",
        ));
    }
    let alpha = walk_cfg.unigram_alpha;
    if !params.theta.is_constant() && alpha != 1.0 {
        return Err(Error::unsupported(
            "degree-corrected limit matrix requires unigram alpha = 1",
        ));
    }
    let k = walk_cfg.walk_len_k as f64;
    if !(k >= 1.0) {
        return Err(Error::input("walk length must be >= 1"));
    }
    let ea = edge_functional(params, alpha)?;
    let mean_theta = theta_moment(&params.theta, 1.0)?;
    let theta_pow = mean_theta.powf(alpha);
    let kap = params.kappa;
    let pref = 2.0 * ea.value / ((1.0 + 1.0 / k) * mean_theta * theta_pow);
    let pt = &ea.p_tilde;
    let mut m = Mat::zeros(kap, kap);
    for l in 0..kap {
        for j in 0..kap {
            let denom = pt[j] * pt[l].powf(alpha) + pt[j].powf(alpha) * pt[l];
            m.set(l, j, (pref * params.p[l][j] / denom).ln());
        }
    }
    Ok(m)
}

/// Planted-partition closed form: M* = alpha* I + beta* (J - I) with
/// alpha* = log(kappa p / ((1 + 1/k)(p + (kappa-1) q))) and beta* the same
/// with q in the numerator. beta* is -inf when q = 0.
pub fn mstar_planted(p_tilde: f64, q_tilde: f64, kappa: usize, walk_len_k: usize) -> Result<(f64, f64)> {
    if kappa == 0 || walk_len_k == 0 {
        return Err(Error::input("kappa and walk length must be >= 1"));
    }
    let denom = p_tilde + (kappa as f64 - 1.0) * q_tilde;
    if !(denom > 0.0) {
        return Err(Error::input("p + (kappa-1) q must be positive"));
    }
    let scale = kappa as f64 / ((1.0 + 1.0 / walk_len_k as f64) * denom);
    Ok(((scale * p_tilde).ln(), (scale * q_tilde).ln()))
}

/// Build the alpha/beta-patterned matrix alpha* I + beta* (J - I).
pub fn planted_matrix(alpha_s: f64, beta_s: f64, kappa: usize) -> Mat {
    Mat::from_fn(kappa, kappa, |i, j| if i == j { alpha_s } else { beta_s })
}

/// Residual of the constrained-regime gradient-matching equation at `a`:
/// sigma(a) (k p + T) - k (p - q) - sigma(-a/(kappa-1)) (k q + T) where
/// T = l (k+1) (p + (kappa-1) q) / kappa. Strictly increasing in `a`.
pub fn constrained_residual(
    a: f64,
    p_tilde: f64,
    q_tilde: f64,
    kappa: usize,
    walk_len_k: usize,
    negatives_l: usize,
) -> f64 {
    let k = walk_len_k as f64;
    let l = negatives_l as f64;
    let t = l * (k + 1.0) * (p_tilde + (kappa as f64 - 1.0) * q_tilde) / kappa as f64;
    sigmoid(a) * (k * p_tilde + t)
        - k * (p_tilde - q_tilde)
        - sigmoid(-a / (kappa as f64 - 1.0)) * (k * q_tilde + t)
}

/// Constrained-regime (U = V) planted-partition optimum: zero when
/// p <= q, otherwise the unique positive root of the gradient-matching
/// equation, bisected until |residual| <= 1e-12. The full limit matrix is
/// alpha* I - alpha*/(kappa-1) (J - I).
pub fn mstar_constrained_planted(
    p_tilde: f64,
    q_tilde: f64,
    kappa: usize,
    walk_len_k: usize,
    negatives_l: usize,
) -> Result<f64> {
    if kappa < 2 {
        return Err(Error::input("constrained form needs kappa >= 2"));
    }
    if walk_len_k == 0 {
        return Err(Error::input("walk length must be >= 1"));
    }
    if !(p_tilde >= 0.0 && q_tilde >= 0.0 && p_tilde + q_tilde > 0.0) {
        return Err(Error::input("p and q must be non-negative, not both zero"));
    }
    if p_tilde <= q_tilde {
        return Ok(0.0);
    }
    let res = |a: f64| constrained_residual(a, p_tilde, q_tilde, kappa, walk_len_k, negatives_l);
    let mut hi = 1.0;
    let mut grow = 0;
    while res(hi) < 0.0 {
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::numerical("failed to bracket the constrained root"));
        }
    }
    let mut lo = 0.0;
    let mut mid = 0.5 * hi;
    for _ in 0..500 {
        mid = 0.5 * (lo + hi);
        let r = res(mid);
        if r.abs() <= 1e-12 {
            return Ok(mid);
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if res(mid).abs() <= 1e-12 {
        Ok(mid)
    } else {
        Err(Error::numerical("constrained root bisection did not converge"))
    }
}

/// Training-mode marker shared by the theory targets and the trainer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetMode {
    Unconstrained,
    Constrained,
}

/// Balanced factorization of an alpha/beta-patterned matrix
/// A = alpha I + beta (J - I), built from the exact orthonormal eigenbasis
/// (the all-ones direction plus a Helmert basis of its complement).
/// `u * v^T` reconstructs A exactly and `u u^T = v v^T`.
#[derive(Debug, Clone)]
pub struct NiceFactorization {
    pub u: Mat,
    pub v: Mat,
    /// [alpha + (m-1) beta, alpha - beta, ..., alpha - beta]
    pub eigenvalues: Vec<f64>,
    pub rank: usize,
    /// min pairwise row distance of u, recomputed from the rows
    pub delta: f64,
}

pub fn factor_nice_matrix(alpha_s: f64, beta_s: f64, m: usize) -> Result<NiceFactorization> {
    if m < 2 {
        return Err(Error::input("need m >= 2"));
    }
    let mut eigenvalues = vec![alpha_s - beta_s; m];
    eigenvalues[0] = alpha_s + (m as f64 - 1.0) * beta_s;
    // orthonormal columns: 1/sqrt(m), then the Helmert basis of 1-perp
    let q = Mat::from_fn(m, m, |i, j| {
        if j == 0 {
            1.0 / (m as f64).sqrt()
        } else {
            let jj = j as f64;
            let norm = (jj * (jj + 1.0)).sqrt();
            if i < j {
                1.0 / norm
            } else if i == j {
                -jj / norm
            } else {
                0.0
            }
        }
    });
    let scale = eigenvalues.iter().map(|&l| l.abs().sqrt()).collect::<Vec<_>>();
    let u = Mat::from_fn(m, m, |i, j| q.get(i, j) * scale[j]);
    let v = Mat::from_fn(m, m, |i, j| q.get(i, j) * scale[j] * eigenvalues[j].signum());
    let max_abs = eigenvalues.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
    let tol = 1e-12 * max_abs.max(1.0);
    let rank = eigenvalues.iter().filter(|&&l| l.abs() > tol).count();
    let delta = min_pairwise_row_distance(&u);
    Ok(NiceFactorization { u, v, eigenvalues, rank, delta })
}

pub fn min_pairwise_row_distance(m: &Mat) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..m.rows() {
        for j in (i + 1)..m.rows() {
            best = best.min(squared_distance(m.row(i), m.row(j)));
        }
    }
    best.sqrt()
}

/// Limit objects for one training mode: the kappa x kappa gram matrix, the
/// kappa x d target embedding rows (zero-padded when d exceeds the rank),
/// and the separation delta between distinct target rows.
#[derive(Debug, Clone)]
pub struct TheoryTarget {
    pub m_star: Mat,
    pub factor_rows: Mat,
    pub delta: f64,
    pub mode: TargetMode,
}

/// Factor a symmetric community matrix into balanced target rows of width
/// `d`. Requires d >= rank(M*); in constrained mode M* must be positive
/// semidefinite. Rows are ordered by decreasing |eigenvalue| and zero-padded.
pub fn target_embeddings(m_star: &Mat, d: usize, mode: TargetMode) -> Result<TheoryTarget> {
    let k = m_star.rows();
    if m_star.cols() != k {
        return Err(Error::input("M* must be square"));
    }
    let dm = m_star.to_dmatrix();
    let sym = nalgebra::SymmetricEigen::new(dm);
    let max_abs = sym.eigenvalues.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
    let tol = 1e-10 * max_abs.max(1.0);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        sym.eigenvalues[b].abs().partial_cmp(&sym.eigenvalues[a].abs()).unwrap()
    });
    let rank = sym.eigenvalues.iter().filter(|&&l| l.abs() > tol).count();
    if d < rank {
        return Err(Error::input(format!("d = {d} below rank(M*) = {rank}")));
    }
    if mode == TargetMode::Constrained {
        if let Some(&bad) = sym.eigenvalues.iter().find(|&&l| l < -tol) {
            return Err(Error::unsupported(format!(
                "constrained target needs a positive semidefinite M*, eigenvalue {bad}"
            )));
        }
    }
    let mut rows = Mat::zeros(k, d);
    for (col, &src) in order.iter().take(rank).enumerate() {
        let lam = sym.eigenvalues[src];
        let s = lam.abs().sqrt();
        for i in 0..k {
            rows.set(i, col, sym.eigenvectors[(i, src)] * s);
        }
    }
    let delta = min_pairwise_row_distance(&rows);
    Ok(TheoryTarget { m_star: m_star.clone(), factor_rows: rows, delta, mode })
}

/// Mean squared gram deviation:
/// (1/n^2) sum_{i,j} (<u_i, v_j> - M*[c(i)][c(j)])^2.
pub fn gram_deviation(u: &Mat, v: &Mat, m_star: &Mat, labels: &[u32]) -> f64 {
    let n = u.rows();
    assert_eq!(v.rows(), n);
    assert_eq!(labels.len(), n);
    let mut total = 0.0;
    for i in 0..n {
        let ui = u.row(i);
        let li = labels[i] as usize;
        for j in 0..n {
            let d = crate::mat::dot(ui, v.row(j)) - m_star.get(li, labels[j] as usize);
            total += d * d;
        }
    }
    total / (n as f64 * n as f64)
}

/// Orthogonal Procrustes distance to per-community targets:
/// min over Q in O(d) of (1/n) sum_i ||u_i - t_{c(i)} Q||^2, reflections
/// included. Solved through the singular values of the d x d cross-moment.
pub fn procrustes_distance(u: &Mat, targets: &Mat, labels: &[u32]) -> f64 {
    let n = u.rows();
    let d = u.cols();
    assert_eq!(targets.cols(), d);
    assert_eq!(labels.len(), n);
    // C = T^T U where T stacks the per-row targets
    let mut c: DMatrix<f64> = DMatrix::zeros(d, d);
    let mut t_norm2 = 0.0;
    for i in 0..n {
        let t = targets.row(labels[i] as usize);
        let ur = u.row(i);
        t_norm2 += crate::mat::dot(t, t);
        for a in 0..d {
            for b in 0..d {
                c[(a, b)] += t[a] * ur[b];
            }
        }
    }
    let u_norm2: f64 = u.data().iter().map(|x| x * x).sum();
    let svd = nalgebra::SVD::new(c, false, false);
    let nuclear: f64 = svd.singular_values.iter().sum();
    ((u_norm2 + t_norm2 - 2.0 * nuclear) / n as f64).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genmodel::planted_partition;
    use crate::rng::rng_from;
    use rand::Rng;

    fn planted(kappa: usize, p: f64, q: f64) -> GenParams {
        planted_partition(kappa, p, q, 0.1).unwrap()
    }

    fn walk_cfg(k: usize, alpha: f64) -> WalkConfig {
        WalkConfig { walk_len_k: k, unigram_alpha: alpha, ..WalkConfig::default() }
    }

    #[test]
    fn edge_functional_planted_examples() {
        let ef = edge_functional(&planted(2, 0.8, 0.2), 1.0).unwrap();
        assert!((ef.value - 0.5).abs() < 1e-15);
        assert_eq!(ef.p_tilde, vec![0.5, 0.5]);
        let e0 = edge_functional(&planted(2, 0.8, 0.2), 0.0).unwrap();
        assert!((e0.value - 1.0).abs() < 1e-15);
        let e1 = edge_functional(&planted(1, 0.37, 0.0), 0.6).unwrap();
        assert!((e1.value - 0.37f64.powf(0.6)).abs() < 1e-15);
    }

    #[test]
    fn edge_functional_rejects_negative_alpha_on_zero_rows() {
        let params = GenParams {
            kappa: 2,
            pi: vec![0.5, 0.5],
            p: vec![vec![0.0, 0.0], vec![0.0, 0.5]],
            rho: 0.1,
            theta: ThetaSpec::Constant(1.0),
            exact_balance: false,
        };
        assert!(edge_functional(&params, -1.0).is_err());
        assert!(edge_functional(&params, 1.0).is_ok());
    }

    #[test]
    fn halfnormal_moment_quadrature_matches_analytic_mean() {
        let spec = ThetaSpec::HalfNormal { sigma: 0.25 };
        let want = 0.25 * (2.0 / std::f64::consts::PI).sqrt() + HALF_NORMAL_SHIFT;
        let got = theta_moment(&spec, 1.0).unwrap();
        assert!((got - want).abs() < 1e-10);
        // alpha = 0 must integrate the density to 1
        assert!((theta_moment(&spec, 0.0).unwrap() - 1.0).abs() < 1e-10);
        // quadrature vs Monte Carlo for a fractional moment
        let thetas = crate::genmodel::sample_theta_halfnormal(2_000_000, 0.25, 3).unwrap();
        let mc = thetas.iter().map(|t| t.powf(0.75)).sum::<f64>() / thetas.len() as f64;
        assert!((theta_moment(&spec, 0.75).unwrap() - mc).abs() < 1e-3);
    }

    #[test]
    fn deepwalk_weight_examples() {
        // f_P = 2k/(rho E_W(1)) = 2*5/(0.1*0.5) = 200
        let params = planted(2, 0.8, 0.2);
        let lam = |c| Lambda { community: c, theta: 1.0 };
        let (fp, _) = deepwalk_weights(&params, 5, 5, 1.0, 0.1, lam(0), lam(1)).unwrap();
        assert!((fp - 200.0).abs() < 1e-12);
        // symmetric in the latent pair, linear in l
        let (_, fn1) = deepwalk_weights(&params, 5, 1, 0.75, 0.1, lam(0), lam(1)).unwrap();
        let (_, fn5) = deepwalk_weights(&params, 5, 5, 0.75, 0.1, lam(0), lam(1)).unwrap();
        let (_, fn5r) = deepwalk_weights(&params, 5, 5, 0.75, 0.1, lam(1), lam(0)).unwrap();
        assert!((fn5 - 5.0 * fn1).abs() < 1e-12);
        assert!((fn5 - fn5r).abs() < 1e-12);
        assert!(deepwalk_weights(&params, 5, 5, 1.0, 0.0, lam(0), lam(0)).is_err());
    }

    #[test]
    fn mstar_unconstrained_planted_example() {
        let m = mstar_unconstrained(&planted(2, 0.8, 0.2), &walk_cfg(5, 1.0)).unwrap();
        assert!((m.get(0, 0) - 0.28768207245178085).abs() < 1e-12);
        assert!((m.get(1, 1) - 0.28768207245178085).abs() < 1e-12);
        assert!((m.get(0, 1) + 1.0986122886681098).abs() < 1e-12);
        // rho must not appear
        let mut other = planted(2, 0.8, 0.2);
        other.rho = 0.9;
        let m2 = mstar_unconstrained(&other, &walk_cfg(5, 1.0)).unwrap();
        assert!((m.get(0, 1) - m2.get(0, 1)).abs() < 1e-15);
    }

    #[test]
    fn mstar_unconstrained_alpha_invariance_on_planted() {
        // for the planted model the exponent cancels entirely
        for alpha in [0.0, 0.5, 0.75, 1.0] {
            let m = mstar_unconstrained(&planted(3, 0.6, 0.3), &walk_cfg(10, alpha)).unwrap();
            let (a, b) = mstar_planted(0.6, 0.3, 3, 10).unwrap();
            assert!((m.get(0, 0) - a).abs() < 1e-12, "alpha = {alpha}");
            assert!((m.get(0, 2) - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mstar_unconstrained_matches_planted_closed_form_on_grid() {
        for kappa in 2..=5usize {
            for &p in &[0.1, 0.3, 0.5, 0.8] {
                for &q in &[0.1, 0.3, 0.5, 0.8] {
                    for &k in &[1usize, 5, 10] {
                        let m = mstar_unconstrained(&planted(kappa, p, q), &walk_cfg(k, 1.0)).unwrap();
                        let (a, b) = mstar_planted(p, q, kappa, k).unwrap();
                        for i in 0..kappa {
                            for j in 0..kappa {
                                let want = if i == j { a } else { b };
                                assert!((m.get(i, j) - want).abs() <= 1e-12);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn mstar_flat_model_is_constant_matrix() {
        let m = mstar_unconstrained(&planted(2, 0.4, 0.4), &walk_cfg(5, 1.0)).unwrap();
        let want = -(1.0 + 1.0 / 5.0f64).ln();
        for i in 0..2 {
            for j in 0..2 {
                assert!((m.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mstar_unconstrained_unsupported_scenarios() {
        let mut params = planted(2, 0.8, 0.2);
        params.theta = ThetaSpec::HalfNormal { sigma: 0.25 };
        assert!(mstar_unconstrained(&params, &walk_cfg(5, 0.75)).is_err());
        assert!(mstar_unconstrained(&params, &walk_cfg(5, 1.0)).is_ok());
        let mut biased = walk_cfg(5, 1.0);
        biased.p = 0.5;
        assert!(mstar_unconstrained(&planted(2, 0.8, 0.2), &biased).is_err());
    }

    #[test]
    fn mstar_planted_examples() {
        let (a, b) = mstar_planted(0.8, 0.2, 2, 5).unwrap();
        assert!((a - (5.0 / 6.0 * 1.6f64).ln()).abs() < 1e-15);
        assert!((b - (5.0 / 6.0 * 0.4f64).ln()).abs() < 1e-15);
        // alpha* - beta* = log(p/q) independent of walk length
        for k in [1usize, 5, 1000] {
            let (a, b) = mstar_planted(0.8, 0.2, 2, k).unwrap();
            assert!((a - b - 4.0f64.ln()).abs() < 1e-12);
        }
        let (a, b) = mstar_planted(0.5, 0.5, 4, 7).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert!((a + (1.0 + 1.0 / 7.0f64).ln()).abs() < 1e-15);
        // q = 0 collapses to an unbounded off-diagonal
        let (_, b) = mstar_planted(0.5, 0.0, 3, 5).unwrap();
        assert!(b.is_infinite() && b < 0.0);
    }

    #[test]
    fn constrained_zero_iff_disassortative() {
        assert_eq!(mstar_constrained_planted(0.2, 0.8, 2, 5, 5).unwrap(), 0.0);
        assert_eq!(mstar_constrained_planted(0.5, 0.5, 3, 5, 5).unwrap(), 0.0);
        let a = mstar_constrained_planted(0.8, 0.2, 2, 5, 5).unwrap();
        assert!(a > 0.0);
        let r = constrained_residual(a, 0.8, 0.2, 2, 5, 5);
        assert!(r.abs() <= 1e-12, "residual = {r}");
        // residual changes sign on [0, 50]
        assert!(constrained_residual(0.0, 0.8, 0.2, 2, 5, 5) < 0.0);
        assert!(constrained_residual(50.0, 0.8, 0.2, 2, 5, 5) > 0.0);
    }

    #[test]
    fn constrained_root_monotone_in_p() {
        let mut last = 0.0;
        for &p in &[0.3, 0.4, 0.6, 0.8, 0.95] {
            let a = mstar_constrained_planted(p, 0.2, 3, 5, 5).unwrap();
            assert!(a > last, "root should grow with p");
            last = a;
        }
    }

    #[test]
    fn nice_matrix_eigenvalues_and_reconstruction() {
        let f = factor_nice_matrix(2.0, -2.0, 2).unwrap();
        assert!((f.eigenvalues[0] - 0.0).abs() < 1e-15);
        assert!((f.eigenvalues[1] - 4.0).abs() < 1e-15);
        // balanced factorization forces row distance sqrt(2 |a - b|)
        assert!((f.delta - 8.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(f.rank, 1);

        let flat = factor_nice_matrix(1.5, 1.5, 4).unwrap();
        assert_eq!(flat.rank, 1);
        assert!(flat.delta.abs() < 1e-12);
        for i in 1..4 {
            assert!(squared_distance(flat.u.row(0), flat.u.row(i)) < 1e-24);
        }

        let mut rng = rng_from(5, &[]);
        for _ in 0..50 {
            let a: f64 = rng.random_range(-3.0..3.0);
            let b: f64 = rng.random_range(-3.0..3.0);
            let m = rng.random_range(2..=10usize);
            let f = factor_nice_matrix(a, b, m).unwrap();
            // rebuild oracle
            let mut err: f64 = 0.0;
            for i in 0..m {
                for j in 0..m {
                    let want = if i == j { a } else { b };
                    let got = crate::mat::dot(f.u.row(i), f.v.row(j));
                    err += (got - want).powi(2);
                }
            }
            assert!(err.sqrt() <= 1e-10, "reconstruction err {err}");
            // balance
            let bal = f.u.gram_t().sub(&f.v.gram_t()).frob_norm();
            assert!(bal <= 1e-10);
            // separation of the balanced rows
            assert!((f.delta - (2.0 * (a - b).abs()).sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn nice_matrix_psd_case() {
        // beta = -alpha/(m-1): rank m-1, UU^T reconstructs A, row norms
        // sqrt(alpha), separation sqrt(2 alpha m/(m-1))
        for m in 2..=6usize {
            let alpha = 1.7;
            let beta = -alpha / (m as f64 - 1.0);
            let f = factor_nice_matrix(alpha, beta, m).unwrap();
            assert_eq!(f.rank, m - 1);
            for i in 0..m {
                let norm = crate::mat::dot(f.u.row(i), f.u.row(i)).sqrt();
                assert!((norm - alpha.sqrt()).abs() < 1e-10);
                for j in 0..m {
                    let want = if i == j { alpha } else { beta };
                    assert!((crate::mat::dot(f.u.row(i), f.u.row(j)) - want).abs() < 1e-10);
                }
            }
            let want_delta = (2.0 * alpha * m as f64 / (m as f64 - 1.0)).sqrt();
            assert!((f.delta - want_delta).abs() < 1e-10);
        }
    }

    #[test]
    fn target_embeddings_pad_and_match_nice_factorization() {
        let (a, b) = mstar_planted(0.8, 0.2, 3, 5).unwrap();
        let m = planted_matrix(a, b, 3);
        let t = target_embeddings(&m, 6, TargetMode::Unconstrained).unwrap();
        assert_eq!(t.factor_rows.cols(), 6);
        let f = factor_nice_matrix(a, b, 3).unwrap();
        assert!((t.delta - f.delta).abs() < 1e-9);
        // gram of padded rows reproduces |M*| spectrum structure: U U^T equal
        let g1 = {
            let mut g = Mat::zeros(3, 3);
            for i in 0..3 {
                for j in 0..3 {
                    g.set(i, j, crate::mat::dot(t.factor_rows.row(i), t.factor_rows.row(j)));
                }
            }
            g
        };
        for i in 0..3 {
            for j in 0..3 {
                assert!((g1.get(i, j) - crate::mat::dot(f.u.row(i), f.u.row(j))).abs() < 1e-9);
            }
        }
        assert!(target_embeddings(&m, 1, TargetMode::Unconstrained).is_err());
        // constrained mode rejects indefinite matrices
        assert!(target_embeddings(&m, 3, TargetMode::Constrained).is_err());
        let a_c = mstar_constrained_planted(0.8, 0.2, 3, 5, 5).unwrap();
        let mc = planted_matrix(a_c, -a_c / 2.0, 3);
        let tc = target_embeddings(&mc, 3, TargetMode::Constrained).unwrap();
        assert!(tc.delta > 0.0);
    }

    #[test]
    fn gram_deviation_examples() {
        let (a, b) = mstar_planted(0.8, 0.2, 2, 5).unwrap();
        let m = planted_matrix(a, b, 2);
        let labels = vec![0u32, 0, 1, 1];
        let f = factor_nice_matrix(a, b, 2).unwrap();
        let u = Mat::from_fn(4, 2, |i, j| f.u.get(labels[i] as usize, j));
        let v = Mat::from_fn(4, 2, |i, j| f.v.get(labels[i] as usize, j));
        assert!(gram_deviation(&u, &v, &m, &labels) < 1e-20);

        // M* = 0 with unit rows keeps at least the diagonal contribution
        let zero = Mat::zeros(2, 2);
        let unit = Mat::from_fn(4, 2, |_, j| if j == 0 { 1.0 } else { 0.0 });
        let dev = gram_deviation(&unit, &unit, &zero, &labels);
        assert!(dev >= 1.0 / 4.0 - 1e-12);

        // invariance under joint rotation
        let rot = {
            let th: f64 = 0.83;
            Mat::from_rows(&[vec![th.cos(), -th.sin()], vec![th.sin(), th.cos()]])
        };
        let rotate = |x: &Mat| {
            Mat::from_fn(x.rows(), 2, |i, j| {
                x.get(i, 0) * rot.get(0, j) + x.get(i, 1) * rot.get(1, j)
            })
        };
        let (ur, vr) = (rotate(&u), rotate(&v));
        let d0 = gram_deviation(&u, &v, &m, &labels);
        let d1 = gram_deviation(&ur, &vr, &m, &labels);
        assert!((d0 - d1).abs() < 1e-10);
    }

    #[test]
    fn procrustes_examples() {
        let mut rng = rng_from(9, &[]);
        let targets = Mat::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        let labels: Vec<u32> = (0..60).map(|i| (i % 3) as u32).collect();
        // rows equal to targets composed with a rotation+reflection
        let theta: f64 = 1.1;
        let q = Mat::from_rows(&[
            vec![theta.cos(), -theta.sin(), 0.0],
            vec![theta.sin(), theta.cos(), 0.0],
            vec![0.0, 0.0, -1.0],
        ]);
        let u = Mat::from_fn(60, 3, |i, j| {
            let t = targets.row(labels[i] as usize);
            (0..3).map(|a| t[a] * q.get(a, j)).sum()
        });
        assert!(procrustes_distance(&u, &targets, &labels) < 1e-10);

        // zero targets: distance reduces to mean squared norm
        let zero = Mat::zeros(3, 3);
        let want = u.data().iter().map(|x| x * x).sum::<f64>() / 60.0;
        assert!((procrustes_distance(&u, &zero, &labels) - want).abs() < 1e-10);

        // optimality against the identity alignment on random input
        for seed in 0..10u64 {
            let mut rng = rng_from(seed, &[1]);
            let pts = Mat::from_fn(40, 3, |_, _| rng.random_range(-1.0..1.0));
            let labs: Vec<u32> = (0..40).map(|_| rng.random_range(0..3u32)).collect();
            let opt = procrustes_distance(&pts, &targets, &labs);
            let ident: f64 = (0..40)
                .map(|i| squared_distance(pts.row(i), targets.row(labs[i] as usize)))
                .sum::<f64>()
                / 40.0;
            assert!(opt <= ident + 1e-12);
        }
    }
}
