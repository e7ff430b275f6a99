//! Experiment sweep runner: Cartesian product of the configured parameter
//! lists times the replication count. Cells run in a worker pool with
//! cell-local seeds, failures become error rows, and the report is sorted
//! before writing so output is deterministic.

use crate::config::{load_spec, parse_mode, parse_starts, parse_theta, ExperimentSpec};
use blockwalk::cluster::{kmeans, spectral_clustering};
use blockwalk::error::{Error, Result};
use blockwalk::genmodel::{planted_partition, sample_graph, ThetaSpec};
use blockwalk::metrics::{ari, misclassification, nmi, worst_case_misclassification, Partition};
use blockwalk::rng::derive_seed;
use blockwalk::sampler::{UnigramVariant, WalkConfig};
use blockwalk::theory::{
    gram_deviation, mstar_constrained_planted, planted_matrix, procrustes_distance,
    target_embeddings, TargetMode,
};
use blockwalk::trainer::{train, Mode, TrainConfig};
use clap::Args;
use rayon::prelude::*;
use std::io::Write;
use std::time::Instant;

#[derive(Args)]
pub struct ExperimentArgs {
    /// TOML config with [model], [walk], [train], [pipeline] sections
    #[arg(long)]
    pub config: String,
    /// override any config key: --set section.key=value (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// overrides pipeline.output
    #[arg(long)]
    pub output: Option<String>,
}

pub const REPORT_COLUMNS: &str = "kappa,n,p_tilde,beta,q_tilde,rho,theta,walk_p,walk_q,walk_len,window,negatives,alpha,walks_per_start,d,mode,epochs,lr,clusterer,replicate,seed,status,error,accuracy,misclassification,worst_case,nmi,ari,gram_deviation,procrustes,delta,seconds";

/// One sweep point before replication.
#[derive(Debug, Clone)]
struct Setting {
    index: usize,
    kappa: usize,
    n: usize,
    beta: f64,
    walk_p: f64,
    walk_q: f64,
    alpha: f64,
}

struct Row {
    setting: usize,
    replicate: usize,
    line: String,
}

pub fn run(a: ExperimentArgs) -> Result<()> {
    let mut spec = load_spec(&a.config, &a.overrides)?;
    if let Some(out) = a.output {
        spec.pipeline.output = out;
    }
    let settings = enumerate_settings(&spec);
    let reps = spec.pipeline.replications;
    let cells: Vec<(Setting, usize)> = settings
        .iter()
        .flat_map(|s| (0..reps).map(move |r| (s.clone(), r)))
        .collect();
    let mut rows: Vec<Row> = cells
        .par_iter()
        .map(|(setting, rep)| run_cell(&spec, setting, *rep))
        .collect();
    rows.sort_by_key(|r| (r.setting, r.replicate));
    let mut f = std::io::BufWriter::new(std::fs::File::create(&spec.pipeline.output)?);
    writeln!(f, "{REPORT_COLUMNS}")?;
    for row in &rows {
        writeln!(f, "{}", row.line)?;
    }
    eprintln!("{} rows -> {}", rows.len(), spec.pipeline.output);
    Ok(())
}

fn enumerate_settings(spec: &ExperimentSpec) -> Vec<Setting> {
    let mut out = Vec::new();
    let mut index = 0;
    for &kappa in &spec.model.kappa {
        for &n in &spec.model.n {
            for &beta in &spec.model.beta {
                for &walk_p in &spec.walk.p {
                    for &walk_q in &spec.walk.q {
                        for &alpha in &spec.walk.alpha {
                            out.push(Setting { index, kappa, n, beta, walk_p, walk_q, alpha });
                            index += 1;
                        }
                    }
                }
            }
        }
    }
    out
}

fn run_cell(spec: &ExperimentSpec, s: &Setting, replicate: usize) -> Row {
    let seed = derive_seed(spec.train.seed_base, &[s.index as u64, replicate as u64]);
    let started = Instant::now();
    let outcome = run_cell_inner(spec, s, seed);
    let (status, err, m) = match outcome {
        Ok(m) => ("ok", String::new(), Some(m)),
        Err(e) => ("error", e.to_string().replace([',', '\n'], ";"), None),
    };
    let opt = |x: Option<f64>| x.map(|v| format!("{v}")).unwrap_or_default();
    let q_tilde = spec.model.p_tilde * s.beta;
    let cols: Vec<String> = vec![
        s.kappa.to_string(),
        s.n.to_string(),
        spec.model.p_tilde.to_string(),
        s.beta.to_string(),
        q_tilde.to_string(),
        spec.model.rho.describe(),
        spec.model.theta.clone(),
        s.walk_p.to_string(),
        s.walk_q.to_string(),
        spec.walk.walk_len.to_string(),
        spec.walk.window.to_string(),
        spec.walk.negatives.to_string(),
        s.alpha.to_string(),
        spec.walk.walks_per_start.to_string(),
        spec.train.d.to_string(),
        spec.train.mode.clone(),
        spec.train.epochs.to_string(),
        spec.train.lr.to_string(),
        spec.pipeline.clusterer.clone(),
        replicate.to_string(),
        seed.to_string(),
        status.to_string(),
        err,
        opt(m.as_ref().map(|m| m.accuracy)),
        opt(m.as_ref().map(|m| m.misclassification)),
        opt(m.as_ref().map(|m| m.worst_case)),
        opt(m.as_ref().map(|m| m.nmi)),
        opt(m.as_ref().map(|m| m.ari)),
        opt(m.as_ref().and_then(|m| m.gram_deviation)),
        opt(m.as_ref().and_then(|m| m.procrustes)),
        opt(m.as_ref().and_then(|m| m.delta)),
        format!("{}", started.elapsed().as_secs_f64()),
    ];
    debug_assert_eq!(cols.len(), REPORT_COLUMNS.split(',').count());
    Row { setting: s.index, replicate, line: cols.join(",") }
}

struct CellMetrics {
    accuracy: f64,
    misclassification: f64,
    worst_case: f64,
    nmi: f64,
    ari: f64,
    gram_deviation: Option<f64>,
    procrustes: Option<f64>,
    delta: Option<f64>,
}

fn run_cell_inner(spec: &ExperimentSpec, s: &Setting, seed: u64) -> Result<CellMetrics> {
    let q_tilde = spec.model.p_tilde * s.beta;
    let rho = spec.model.rho.resolve(s.n)?;
    let mut params = planted_partition(s.kappa, spec.model.p_tilde, q_tilde, rho)?;
    params.theta = parse_theta(&spec.model.theta)?;
    params.exact_balance = spec.model.exact_balance;
    let lg = sample_graph(&params, s.n, derive_seed(seed, &[1]))?;

    let walk_cfg = WalkConfig {
        p: s.walk_p,
        q: s.walk_q,
        walk_len_k: spec.walk.walk_len,
        window_w: spec.walk.window,
        walks_per_start: spec.walk.walks_per_start,
        negatives_l: spec.walk.negatives,
        unigram_alpha: s.alpha,
        starts: parse_starts(&spec.walk.starts)?,
        unigram_variant: UnigramVariant::AllVertices,
    };
    let mode = parse_mode(&spec.train.mode)?;

    let mut gram = None;
    let mut procrustes = None;
    let mut theory_delta = None;
    let predicted: Vec<u32> = match spec.pipeline.clusterer.as_str() {
        "spectral" => spectral_clustering(&lg.graph, s.kappa, derive_seed(seed, &[3]))?,
        "node2vec" => {
            let train_cfg = TrainConfig {
                d: spec.train.d,
                mode,
                lr: spec.train.lr,
                lr_floor: spec.train.lr_floor,
                epochs: spec.train.epochs,
                init_scale: None,
                seed: derive_seed(seed, &[2]),
                deterministic: spec.train.deterministic,
                workers: spec.train.workers,
                norm_caps: None,
            };
            let emb = train(&lg.graph, &walk_cfg, &train_cfg)?;
            if let Some((m_star, target_mode)) =
                theory_matrix(&params, &walk_cfg, mode, spec)
            {
                gram = Some(gram_deviation(emb.center(), emb.context(), &m_star, &lg.labels));
                if let Ok(target) = target_embeddings(&m_star, spec.train.d, target_mode) {
                    procrustes = Some(procrustes_distance(
                        emb.center(),
                        &target.factor_rows,
                        &lg.labels,
                    ));
                    theory_delta = Some(target.delta);
                }
            }
            kmeans(emb.center(), s.kappa, 10, derive_seed(seed, &[4]))?.labels
        }
        other => return Err(Error::input(format!("unknown clusterer '{other}'"))),
    };

    let truth = Partition::new(lg.labels.clone(), s.kappa)?;
    let pred = Partition::new(predicted, s.kappa)?;
    let l = misclassification(&truth, &pred)?;
    Ok(CellMetrics {
        accuracy: 1.0 - l,
        misclassification: l,
        worst_case: worst_case_misclassification(&truth, &pred)?,
        nmi: nmi(&truth, &pred)?,
        ari: ari(&truth, &pred)?,
        gram_deviation: gram,
        procrustes,
        delta: theory_delta,
    })
}

/// The closed-form limit matrix when the scenario admits one: simple walk
/// (p = q = 1) and either constant degree factors or unigram alpha = 1;
/// constrained additionally needs constant factors.
fn theory_matrix(
    params: &blockwalk::genmodel::GenParams,
    walk_cfg: &WalkConfig,
    mode: Mode,
    _spec: &ExperimentSpec,
) -> Option<(blockwalk::Mat, TargetMode)> {
    if walk_cfg.p != 1.0 || walk_cfg.q != 1.0 {
        return None;
    }
    let theta_const = matches!(params.theta, ThetaSpec::Constant(_));
    match mode {
        Mode::Unconstrained => {
            if !theta_const && walk_cfg.unigram_alpha != 1.0 {
                return None;
            }
            let m = blockwalk::theory::mstar_unconstrained(params, walk_cfg).ok()?;
            Some((m, TargetMode::Unconstrained))
        }
        Mode::Constrained => {
            if !theta_const {
                return None;
            }
            let p_t = params.p[0][0];
            let q_t = if params.kappa > 1 { params.p[0][1] } else { p_t };
            let a = mstar_constrained_planted(
                p_t,
                q_t,
                params.kappa,
                walk_cfg.walk_len_k,
                walk_cfg.negatives_l,
            )
            .ok()?;
            let b = if params.kappa > 1 { -a / (params.kappa as f64 - 1.0) } else { 0.0 };
            Some((planted_matrix(a, b, params.kappa), TargetMode::Constrained))
        }
    }
}
