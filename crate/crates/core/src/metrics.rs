//! Community-recovery scores between an estimated and a true partition:
//! permutation-minimized misclassification, worst-case per-community rate,
//! normalized mutual information, and the adjusted Rand index.
//!
//! The misclassification minimum over relabelings is exact: enumerated for
//! up to 10 classes, solved as an assignment problem (Hungarian algorithm on
//! the agreement matrix) beyond that. NMI uses the geometric-mean
//! normalization with natural logs.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub labels: Vec<u32>,
    pub k: usize,
}

impl Partition {
    pub fn new(labels: Vec<u32>, k: usize) -> Result<Partition> {
        if labels.iter().any(|&l| l as usize >= k) {
            return Err(Error::input("label out of range for class count"));
        }
        Ok(Partition { labels, k })
    }

    /// Infer the class count from the labels.
    pub fn from_labels(labels: Vec<u32>) -> Partition {
        let k = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
        Partition { labels, k }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Contingency counts: entry (a, b) is the number of items with true class a
/// and estimated class b, padded square over max(k_true, k_est).
fn contingency(truth: &Partition, est: &Partition) -> Result<Vec<Vec<u64>>> {
    if truth.len() != est.len() {
        return Err(Error::input("partitions must have equal length"));
    }
    if truth.is_empty() {
        return Err(Error::input("partitions must be nonempty"));
    }
    let k = truth.k.max(est.k);
    let mut c = vec![vec![0u64; k]; k];
    for (&a, &b) in truth.labels.iter().zip(&est.labels) {
        c[a as usize][b as usize] += 1;
    }
    Ok(c)
}

const EXACT_PERMUTATION_LIMIT: usize = 10;

fn permutations_maximize_agreement(c: &[Vec<u64>]) -> u64 {
    let k = c.len();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0u64;
    // Heap's algorithm over sigma: true class a is matched to estimated
    // class sigma(a)
    fn heaps(perm: &mut Vec<usize>, n: usize, c: &[Vec<u64>], best: &mut u64) {
        if n == 1 {
            let agree: u64 = perm.iter().enumerate().map(|(a, &b)| c[a][b]).sum();
            *best = (*best).max(agree);
            return;
        }
        for i in 0..n {
            heaps(perm, n - 1, c, best);
            if n % 2 == 0 {
                perm.swap(i, n - 1);
            } else {
                perm.swap(0, n - 1);
            }
        }
    }
    heaps(&mut perm, k, c, &mut best);
    best
}

/// Hungarian algorithm (Jonker-style shortest augmenting paths) minimizing
/// total cost over a square matrix; returns the optimal column for each row.
fn hungarian_min(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1]; // column -> row (1-based rows)
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

fn max_agreement(c: &[Vec<u64>]) -> u64 {
    if c.len() <= EXACT_PERMUTATION_LIMIT {
        permutations_maximize_agreement(c)
    } else {
        let cost: Vec<Vec<i64>> =
            c.iter().map(|row| row.iter().map(|&x| -(x as i64)).collect()).collect();
        let assign = hungarian_min(&cost);
        assign.iter().enumerate().map(|(a, &b)| c[a][b]).sum()
    }
}

/// Misclassification rate minimized over relabelings of the true classes:
/// min over permutations sigma of (1/n) #\{i : est(i) != sigma(true(i))\}.
pub fn misclassification(truth: &Partition, est: &Partition) -> Result<f64> {
    let c = contingency(truth, est)?;
    let agree = max_agreement(&c);
    Ok(1.0 - agree as f64 / truth.len() as f64)
}

/// Worst-case per-community misclassification: for each true community the
/// permutation is chosen in its favor (only the image of that community
/// matters), and the max over communities is reported.
pub fn worst_case_misclassification(truth: &Partition, est: &Partition) -> Result<f64> {
    let c = contingency(truth, est)?;
    let mut worst = 0.0f64;
    for (a, row) in c.iter().enumerate().take(truth.k) {
        let size: u64 = row.iter().sum();
        if size == 0 {
            return Err(Error::input(format!("true community {a} is empty")));
        }
        let best: u64 = *row.iter().max().unwrap();
        worst = worst.max(1.0 - best as f64 / size as f64);
    }
    Ok(worst)
}

fn entropy(counts: &[u64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&x| x > 0)
        .map(|&x| {
            let p = x as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information I(c, c_hat) / sqrt(H(c) H(c_hat)) with
/// natural logs. When both entropies vanish, the partitions are the trivial
/// one-block partition and NMI is 1 by convention; if only one vanishes the
/// partitions cannot agree and NMI is 0.
pub fn nmi(truth: &Partition, est: &Partition) -> Result<f64> {
    let c = contingency(truth, est)?;
    let n = truth.len() as f64;
    let k = c.len();
    let row: Vec<u64> = c.iter().map(|r| r.iter().sum()).collect();
    let col: Vec<u64> = (0..k).map(|j| c.iter().map(|r| r[j]).sum()).collect();
    let (ha, hb) = (entropy(&row, n), entropy(&col, n));
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    if ha == 0.0 || hb == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for a in 0..k {
        for b in 0..k {
            if c[a][b] > 0 {
                let pab = c[a][b] as f64 / n;
                mi += pab * (n * c[a][b] as f64 / (row[a] as f64 * col[b] as f64)).ln();
            }
        }
    }
    Ok((mi / (ha * hb).sqrt()).clamp(0.0, 1.0))
}

/// Adjusted Rand index from the pair-counting contingency formula. The
/// ratio is formed with cleared denominators in integer arithmetic, so
/// identity cases (1 and simple rationals like -1/2) come out exact.
pub fn ari(truth: &Partition, est: &Partition) -> Result<f64> {
    let c = contingency(truth, est)?;
    let choose2 = |x: u64| {
        let x = x as i128;
        x * (x - 1) / 2
    };
    let k = c.len();
    let row: Vec<u64> = c.iter().map(|r| r.iter().sum()).collect();
    let col: Vec<u64> = (0..k).map(|j| c.iter().map(|r| r[j]).sum()).collect();
    let sum_cells: i128 = c.iter().flatten().map(|&x| choose2(x)).sum();
    let sum_rows: i128 = row.iter().map(|&x| choose2(x)).sum();
    let sum_cols: i128 = col.iter().map(|&x| choose2(x)).sum();
    let total = choose2(truth.len() as u64);
    // (cells - rows*cols/total) / ((rows+cols)/2 - rows*cols/total),
    // both sides multiplied by 2*total
    let num = 2 * total * sum_cells - 2 * sum_rows * sum_cols;
    let den = total * (sum_rows + sum_cols) - 2 * sum_rows * sum_cols;
    if den == 0 {
        // both partitions trivial: identical up to relabeling
        return Ok(1.0);
    }
    Ok(num as f64 / den as f64)
}

/// Accuracy = 1 - misclassification.
pub fn accuracy(truth: &Partition, est: &Partition) -> Result<f64> {
    Ok(1.0 - misclassification(truth, est)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use rand::Rng;

    fn part(labels: &[u32]) -> Partition {
        Partition::from_labels(labels.to_vec())
    }

    #[test]
    fn misclassification_examples() {
        let c = part(&[0, 0, 1, 1]);
        assert_eq!(misclassification(&c, &part(&[1, 1, 0, 0])).unwrap(), 0.0);
        assert_eq!(misclassification(&c, &part(&[0, 0, 0, 1])).unwrap(), 0.25);
        assert_eq!(misclassification(&c, &c).unwrap(), 0.0);
        assert!(misclassification(&c, &part(&[0, 1])).is_err());
    }

    #[test]
    fn worst_case_examples() {
        let c = part(&[0, 0, 1, 1]);
        assert_eq!(worst_case_misclassification(&c, &c).unwrap(), 0.0);
        let est = part(&[0, 1, 1, 1]);
        assert_eq!(worst_case_misclassification(&c, &est).unwrap(), 0.5);
        // with the per-community minimization the worst-case rate dominates
        // the mean error of any single shared relabeling of est
        for seed in 0..30u64 {
            let mut rng = rng_from(seed, &[]);
            let t: Vec<u32> = (0..20).map(|i| (i % 3) as u32).collect();
            let e: Vec<u32> = (0..20).map(|_| rng.random_range(0..3u32)).collect();
            let (tp, ep) = (part(&t), part(&e));
            let lw = worst_case_misclassification(&tp, &ep).unwrap();
            // each community's own best error is a lower bound on its error
            // under the globally optimal permutation
            for comm in 0..3u32 {
                let members: Vec<usize> = (0..20).filter(|&i| t[i] == comm).collect();
                let best = (0..3u32)
                    .map(|m| members.iter().filter(|&&i| e[i] != m).count())
                    .min()
                    .unwrap() as f64
                    / members.len() as f64;
                assert!(lw >= best - 1e-12);
            }
        }
    }

    #[test]
    fn worst_case_matches_inner_permutation_enumeration() {
        // oracle: max over communities of min over full permutations
        let mut rng = rng_from(77, &[]);
        for _ in 0..40 {
            let k = rng.random_range(2..5usize);
            let n = rng.random_range(k..20usize);
            let mut t: Vec<u32> = (0..n).map(|i| (i % k) as u32).collect();
            t.iter_mut().for_each(|_| {});
            let e: Vec<u32> = (0..n).map(|_| rng.random_range(0..k as u32)).collect();
            let (tp, ep) = (Partition::new(t.clone(), k).unwrap(), Partition::new(e.clone(), k).unwrap());
            let got = worst_case_misclassification(&tp, &ep).unwrap();
            // brute force over permutations per community
            let mut perms: Vec<Vec<usize>> = Vec::new();
            let mut idx: Vec<usize> = (0..k).collect();
            permute_into(&mut idx, 0, &mut perms);
            let mut want = 0.0f64;
            for comm in 0..k as u32 {
                let members: Vec<usize> =
                    (0..n).filter(|&i| t[i] == comm).collect();
                let best = perms
                    .iter()
                    .map(|s| {
                        members.iter().filter(|&&i| e[i] != s[comm as usize] as u32).count()
                    })
                    .min()
                    .unwrap();
                want = want.max(best as f64 / members.len() as f64);
            }
            assert!((got - want).abs() < 1e-12);
        }
    }

    fn permute_into(idx: &mut Vec<usize>, at: usize, out: &mut Vec<Vec<usize>>) {
        if at == idx.len() {
            out.push(idx.clone());
            return;
        }
        for i in at..idx.len() {
            idx.swap(at, i);
            permute_into(idx, at + 1, out);
            idx.swap(at, i);
        }
    }

    #[test]
    fn nmi_examples() {
        let c = part(&[0, 0, 1, 1]);
        assert_eq!(nmi(&c, &c).unwrap(), 1.0);
        // product contingency: zero mutual information
        assert_eq!(nmi(&c, &part(&[0, 1, 0, 1])).unwrap(), 0.0);
        // relabeling invariance
        let a = part(&[0, 0, 1, 2, 2, 1]);
        let b = part(&[2, 2, 0, 1, 1, 0]);
        assert!((nmi(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        // trivial one-class partitions
        let one = part(&[0, 0, 0]);
        assert_eq!(nmi(&one, &one).unwrap(), 1.0);
        assert_eq!(nmi(&one, &part(&[0, 1, 2])).unwrap(), 0.0);
    }

    #[test]
    fn ari_examples() {
        let c = part(&[0, 0, 1, 1]);
        assert_eq!(ari(&c, &c).unwrap(), 1.0);
        assert!((ari(&c, &part(&[0, 1, 0, 1])).unwrap() + 0.5).abs() < 1e-12);
        // symmetry
        let a = part(&[0, 0, 1, 2, 2, 1, 0]);
        let b = part(&[1, 0, 1, 2, 2, 0, 0]);
        assert!((ari(&a, &b).unwrap() - ari(&b, &a).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn enumeration_matches_hungarian() {
        let mut rng = rng_from(5, &[]);
        for _ in 0..60 {
            let k = rng.random_range(2..=6usize);
            let n = rng.random_range(k..40usize);
            let t: Vec<u32> = (0..n).map(|_| rng.random_range(0..k as u32)).collect();
            let e: Vec<u32> = (0..n).map(|_| rng.random_range(0..k as u32)).collect();
            let tp = Partition::new(t, k).unwrap();
            let ep = Partition::new(e, k).unwrap();
            let c = contingency(&tp, &ep).unwrap();
            let by_enum = permutations_maximize_agreement(&c);
            let cost: Vec<Vec<i64>> =
                c.iter().map(|row| row.iter().map(|&x| -(x as i64)).collect()).collect();
            let assign = hungarian_min(&cost);
            let by_hung: u64 = assign.iter().enumerate().map(|(a, &b)| c[a][b]).sum();
            assert_eq!(by_enum, by_hung);
        }
    }

    #[test]
    fn all_metrics_invariant_under_relabeling() {
        let mut rng = rng_from(29, &[]);
        let t: Vec<u32> = (0..50).map(|_| rng.random_range(0..4u32)).collect();
        let e: Vec<u32> = (0..50).map(|_| rng.random_range(0..4u32)).collect();
        let relabel = [2u32, 3, 0, 1];
        let e2: Vec<u32> = e.iter().map(|&x| relabel[x as usize]).collect();
        let (tp, ep, ep2) = (
            Partition::new(t, 4).unwrap(),
            Partition::new(e, 4).unwrap(),
            Partition::new(e2, 4).unwrap(),
        );
        assert_eq!(misclassification(&tp, &ep).unwrap(), misclassification(&tp, &ep2).unwrap());
        assert_eq!(
            worst_case_misclassification(&tp, &ep).unwrap(),
            worst_case_misclassification(&tp, &ep2).unwrap()
        );
        assert!((nmi(&tp, &ep).unwrap() - nmi(&tp, &ep2).unwrap()).abs() < 1e-12);
        assert!((ari(&tp, &ep).unwrap() - ari(&tp, &ep2).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn min_over_permutations_is_bounded() {
        // best of k! relabelings can never miss more than 1 - 1/k
        let mut rng = rng_from(31, &[]);
        for _ in 0..30 {
            let k = rng.random_range(2..=5usize);
            let n = rng.random_range(3 * k..60usize);
            let t: Vec<u32> = (0..n).map(|_| rng.random_range(0..k as u32)).collect();
            let e: Vec<u32> = (0..n).map(|_| rng.random_range(0..k as u32)).collect();
            let l = misclassification(
                &Partition::new(t, k).unwrap(),
                &Partition::new(e, k).unwrap(),
            )
            .unwrap();
            assert!(l <= 1.0 - 1.0 / k as f64 + 1e-12);
        }
    }

    #[test]
    fn hungarian_handles_many_classes() {
        // above the enumeration limit the assignment path must kick in
        let n = 200;
        let k = 15;
        let t: Vec<u32> = (0..n).map(|i| (i % k) as u32).collect();
        let shift: Vec<u32> = t.iter().map(|&x| (x + 3) % k as u32).collect();
        let tp = Partition::new(t, k).unwrap();
        let sp = Partition::new(shift, k).unwrap();
        assert_eq!(misclassification(&tp, &sp).unwrap(), 0.0);
    }
}
