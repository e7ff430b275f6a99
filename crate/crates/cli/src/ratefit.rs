//! Rate-of-convergence fits: per (kappa, beta) group, ordinary least squares
//! of log(metric) on log(n) across an experiment report. Rows with a
//! non-positive metric are dropped and counted; groups with fewer than three
//! distinct n are skipped with a note.

use blockwalk::error::{Error, Result};
use clap::Args;
use std::collections::BTreeMap;
use std::io::Write;

#[derive(Args)]
pub struct RatefitArgs {
    /// CSV report produced by the experiment subcommand
    #[arg(long)]
    pub report: String,
    /// metric column to fit (e.g. misclassification, gram_deviation)
    #[arg(long)]
    pub metric: String,
    /// output CSV; stdout when omitted
    #[arg(long)]
    pub out: Option<String>,
}

pub fn run(a: RatefitArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.report)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::input("empty report"))?;
    let cols: Vec<&str> = header.split(',').collect();
    let col = |name: &str| {
        cols.iter()
            .position(|&c| c == name)
            .ok_or_else(|| Error::input(format!("report has no '{name}' column")))
    };
    let (ck, cb, cn, cs) = (col("kappa")?, col("beta")?, col("n")?, col("status")?);
    let cm = col(&a.metric)?;

    // (kappa, beta as string to keep exact grouping) -> (log n, log metric)
    let mut groups: BTreeMap<(String, String), Vec<(f64, f64)>> = BTreeMap::new();
    let mut dropped: BTreeMap<(String, String), usize> = BTreeMap::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols.len() || f[cs] != "ok" {
            continue;
        }
        let key = (f[ck].to_string(), f[cb].to_string());
        let n: f64 = f[cn]
            .parse()
            .map_err(|_| Error::input(format!("bad n value '{}'", f[cn])))?;
        let metric: f64 = match f[cm].parse() {
            Ok(v) => v,
            Err(_) => {
                *dropped.entry(key).or_insert(0) += 1;
                continue;
            }
        };
        if metric <= 0.0 {
            *dropped.entry(key).or_insert(0) += 1;
            continue;
        }
        groups.entry(key).or_default().push((n.ln(), metric.ln()));
    }

    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout()),
    };
    writeln!(out, "kappa,beta,metric,slope,intercept,r2,points_used,points_dropped,note")?;
    let keys: std::collections::BTreeSet<(String, String)> =
        groups.keys().cloned().chain(dropped.keys().cloned()).collect();
    for key in keys {
        let pts = groups.get(&key).cloned().unwrap_or_default();
        let drop = dropped.get(&key).copied().unwrap_or(0);
        let distinct_n: std::collections::BTreeSet<u64> =
            pts.iter().map(|(x, _)| x.to_bits()).collect();
        if distinct_n.len() < 3 {
            writeln!(
                out,
                "{},{},{},,,,{},{},skipped: fewer than 3 distinct n",
                key.0,
                key.1,
                a.metric,
                pts.len(),
                drop
            )?;
            continue;
        }
        let (slope, intercept, r2) = ols(&pts);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},",
            key.0,
            key.1,
            a.metric,
            slope,
            intercept,
            r2,
            pts.len(),
            drop
        )?;
    }
    Ok(())
}

/// Least squares y = slope x + intercept with the coefficient of
/// determination.
pub fn ols(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ols_recovers_exact_power_laws() {
        // metric = c / n  -> slope -1; c / sqrt(n) -> slope -1/2; const -> 0
        let ns = [200.0f64, 500.0, 1000.0, 2000.0, 5000.0];
        let laws: [(fn(f64) -> f64, f64); 3] =
            [(|n| 3.0 / n, -1.0), (|n| 2.0 / n.sqrt(), -0.5), (|_| 0.7, 0.0)];
        for (law, want) in laws {
            let pts: Vec<(f64, f64)> = ns.iter().map(|&n| (n.ln(), law(n).ln())).collect();
            let (slope, _, r2) = ols(&pts);
            assert!((slope - want).abs() < 0.01, "slope {slope} want {want}");
            assert!(r2 > 0.999 || want == 0.0);
        }
    }
}
