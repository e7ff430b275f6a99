//! Single-shot subcommands of the pipeline.

use crate::config::{parse_mode, parse_starts, parse_theta, parse_unigram_variant};
use blockwalk::cluster::kmeans;
use blockwalk::downstream::{
    link_prediction_experiment, train_node_classifier, EdgeEmbeddingMode,
};
use blockwalk::error::{Error, Result};
use blockwalk::genmodel::{planted_partition, sample_graph_with_stats, LabeledGraph};
use blockwalk::graph::{load_edge_list, LoadedGraph};
use blockwalk::metrics::{ari, misclassification, nmi, worst_case_misclassification, Partition};
use blockwalk::sampler::{sample_walks, WalkConfig};
use blockwalk::theory::{
    factor_nice_matrix, mstar_constrained_planted, mstar_planted, planted_matrix,
};
use blockwalk::trainer::{
    load_embeddings_binary, load_embeddings_text, save_embeddings_binary, save_embeddings_text,
    train, Mode, TrainConfig,
};
use clap::Args;
use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

#[derive(Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub kappa: usize,
    #[arg(long, default_value_t = 1.0)]
    pub p_tilde: f64,
    /// off-diagonal probability; overrides --beta when set
    #[arg(long)]
    pub q_tilde: Option<f64>,
    /// q_tilde = p_tilde * beta
    #[arg(long)]
    pub beta: Option<f64>,
    /// "logn_over_n", "dense", or a number
    #[arg(long, default_value = "logn_over_n")]
    pub rho: String,
    /// "constant" or "halfnormal:<sigma>"
    #[arg(long, default_value = "constant")]
    pub theta: String,
    #[arg(long)]
    pub exact_balance: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// output prefix; writes <prefix>.edges, <prefix>.labels.tsv, <prefix>.thetas.tsv
    #[arg(long)]
    pub out_prefix: PathBuf,
}

fn resolve_rho(rule: &str, n: usize) -> Result<f64> {
    match rule {
        "logn_over_n" => Ok(((n as f64).ln() / n as f64).min(1.0)),
        "dense" => Ok(1.0),
        other => other
            .parse::<f64>()
            .map_err(|_| Error::input(format!("bad rho '{other}'"))),
    }
}

pub fn generate(a: GenerateArgs) -> Result<()> {
    let q = match (a.q_tilde, a.beta) {
        (Some(q), _) => q,
        (None, Some(b)) => a.p_tilde * b,
        (None, None) => return Err(Error::input("set --q-tilde or --beta")),
    };
    let rho = resolve_rho(&a.rho, a.n)?;
    let mut params = planted_partition(a.kappa, a.p_tilde, q, rho)?;
    params.theta = parse_theta(&a.theta)?;
    params.exact_balance = a.exact_balance;
    let (lg, stats) = sample_graph_with_stats(&params, a.n, a.seed)?;
    let prefix = a.out_prefix.to_string_lossy();
    lg.graph.save_edge_list(format!("{prefix}.edges"))?;
    let ids: Vec<u64> = (0..a.n as u64).collect();
    write_labels_tsv(format!("{prefix}.labels.tsv"), &ids, &lg.labels)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(format!("{prefix}.thetas.tsv"))?);
    for (v, t) in lg.thetas.iter().enumerate() {
        writeln!(f, "{v}\t{t:?}")?;
    }
    println!(
        "n={} m={} clipped_pairs={} -> {prefix}.edges",
        lg.graph.n(),
        lg.graph.m(),
        stats.clipped_pairs
    );
    Ok(())
}

pub fn write_labels_tsv(path: impl AsRef<Path>, ids: &[u64], labels: &[u32]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (v, l) in ids.iter().zip(labels) {
        writeln!(f, "{v}\t{l}")?;
    }
    Ok(())
}

/// Read a vertex<TAB>label TSV into a map keyed by vertex id.
pub fn read_labels_tsv(path: impl AsRef<Path>) -> Result<HashMap<u64, String>> {
    let f = BufReader::new(std::fs::File::open(&path)?);
    let mut by_vertex: HashMap<u64, String> = HashMap::new();
    for (lineno, line) in f.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut it = t.split('\t');
        let v: u64 = it
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::input(format!("labels line {}: bad vertex", lineno + 1)))?;
        let lab = it
            .next()
            .ok_or_else(|| Error::input(format!("labels line {}: missing label", lineno + 1)))?;
        by_vertex.insert(v, lab.trim().to_string());
    }
    if by_vertex.is_empty() {
        return Err(Error::input("empty labels file"));
    }
    Ok(by_vertex)
}

/// Intern string labels over a fixed id order into a dense partition.
fn partition_over(ids: &[u64], by_vertex: &HashMap<u64, String>) -> Result<Partition> {
    let mut classes: HashMap<&str, u32> = HashMap::new();
    let mut labels = Vec::with_capacity(ids.len());
    for id in ids {
        let lab = by_vertex
            .get(id)
            .ok_or_else(|| Error::input(format!("labels file missing vertex {id}")))?;
        let next = classes.len() as u32;
        labels.push(*classes.entry(lab.as_str()).or_insert(next));
    }
    let k = classes.len();
    Partition::new(labels, k)
}

#[derive(Args)]
pub struct WalkParams {
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    #[arg(long, default_value_t = 80)]
    pub walk_len: usize,
    #[arg(long, default_value_t = 10)]
    pub window: usize,
    #[arg(long, default_value_t = 10)]
    pub walks_per_start: usize,
    #[arg(long, default_value_t = 5)]
    pub negatives: usize,
    #[arg(long, default_value_t = 0.75)]
    pub alpha: f64,
    /// "pervertex" or "theory"
    #[arg(long, default_value = "pervertex")]
    pub starts: String,
    /// unigram denominator: "all" or "exclude-center"
    #[arg(long, default_value = "all")]
    pub unigram: String,
}

impl WalkParams {
    pub fn to_config(&self) -> Result<WalkConfig> {
        Ok(WalkConfig {
            p: self.p,
            q: self.q,
            walk_len_k: self.walk_len,
            window_w: self.window,
            walks_per_start: self.walks_per_start,
            negatives_l: self.negatives,
            unigram_alpha: self.alpha,
            starts: parse_starts(&self.starts)?,
            unigram_variant: parse_unigram_variant(&self.unigram)?,
        })
    }
}

#[derive(Args)]
pub struct WalksArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub largest_component: bool,
    #[command(flatten)]
    pub walk: WalkParams,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn walks(a: WalksArgs) -> Result<()> {
    let loaded = load_edge_list(&a.graph, a.largest_component)?;
    let cfg = a.walk.to_config()?;
    let walks = sample_walks(&loaded.graph, &cfg, a.seed)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(&a.out)?);
    for w in &walks {
        let mut first = true;
        for &v in w {
            if !first {
                write!(f, " ")?;
            }
            write!(f, "{}", loaded.original_label[v as usize])?;
            first = false;
        }
        writeln!(f)?;
    }
    println!("{} walks -> {}", walks.len(), a.out.display());
    Ok(())
}

#[derive(Args)]
pub struct TrainParams {
    #[arg(long, default_value_t = 64)]
    pub d: usize,
    /// "unconstrained" or "constrained"
    #[arg(long, default_value = "unconstrained")]
    pub mode: String,
    #[arg(long, default_value_t = 0.025)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub lr_floor: f64,
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    #[arg(long)]
    pub init_scale: Option<f64>,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub deterministic: bool,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

impl TrainParams {
    pub fn to_config(&self, seed: u64) -> Result<TrainConfig> {
        Ok(TrainConfig {
            d: self.d,
            mode: parse_mode(&self.mode)?,
            lr: self.lr,
            lr_floor: self.lr_floor,
            epochs: self.epochs,
            init_scale: self.init_scale,
            seed,
            deterministic: self.deterministic,
            workers: self.workers,
            norm_caps: None,
        })
    }
}

#[derive(Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub largest_component: bool,
    #[command(flatten)]
    pub walk: WalkParams,
    #[command(flatten)]
    pub train: TrainParams,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// write little-endian f64 instead of text
    #[arg(long)]
    pub binary: bool,
    /// optionally also write the context matrix
    #[arg(long)]
    pub context_out: Option<PathBuf>,
}

pub fn embed(a: EmbedArgs) -> Result<()> {
    let loaded = load_edge_list(&a.graph, a.largest_component)?;
    let wc = a.walk.to_config()?;
    let tc = a.train.to_config(a.seed)?;
    let emb = train(&loaded.graph, &wc, &tc)?;
    if a.binary {
        // the binary layout is positional, so it only represents graphs
        // whose vertex ids are already dense
        let dense = loaded.original_label.iter().enumerate().all(|(i, &l)| l == i as u64);
        if !dense {
            return Err(Error::input(
                "binary embeddings are positional; this graph has non-dense vertex ids, use text",
            ));
        }
        save_embeddings_binary(&a.out, emb.center())?;
        if let Some(ctx) = &a.context_out {
            save_embeddings_binary(ctx, emb.context())?;
        }
    } else {
        save_embeddings_text(&a.out, emb.center(), &loaded.original_label)?;
        if let Some(ctx) = &a.context_out {
            save_embeddings_text(ctx, emb.context(), &loaded.original_label)?;
        }
    }
    println!("embedded {} vertices at d={} -> {}", emb.n(), emb.d(), a.out.display());
    Ok(())
}

pub fn load_embeddings_any(path: &Path) -> Result<(blockwalk::Mat, Vec<u64>)> {
    if path.extension().is_some_and(|e| e == "bin") {
        let m = load_embeddings_binary(path)?;
        let ids = (0..m.rows() as u64).collect();
        Ok((m, ids))
    } else {
        load_embeddings_text(path)
    }
}

#[derive(Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cluster(a: ClusterArgs) -> Result<()> {
    let (emb, ids) = load_embeddings_any(&a.embeddings)?;
    let result = kmeans(&emb, a.k, a.restarts, a.seed)?;
    write_labels_tsv(&a.out, &ids, &result.labels)?;
    println!("k-means cost {:.6} -> {}", result.cost, a.out.display());
    Ok(())
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub predicted: PathBuf,
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let truth_map = read_labels_tsv(&a.truth)?;
    let pred_map = read_labels_tsv(&a.predicted)?;
    // score over the vertices both files know about
    let mut common: Vec<u64> =
        truth_map.keys().filter(|k| pred_map.contains_key(k)).copied().collect();
    common.sort_unstable();
    if common.is_empty() {
        return Err(Error::input("label files share no vertex ids"));
    }
    if common.len() < truth_map.len() {
        eprintln!(
            "note: scoring {} of {} labeled vertices (rest missing from predictions)",
            common.len(),
            truth_map.len()
        );
    }
    let truth = partition_over(&common, &truth_map)?;
    let pred = partition_over(&common, &pred_map)?;
    let l = misclassification(&truth, &pred)?;
    let lw = worst_case_misclassification(&truth, &pred)?;
    let mi = nmi(&truth, &pred)?;
    let ri = ari(&truth, &pred)?;
    println!("misclassification,worst_case,nmi,ari,accuracy");
    println!("{l},{lw},{mi},{ri},{}", 1.0 - l);
    Ok(())
}

#[derive(Args)]
pub struct TheoryArgs {
    #[arg(long)]
    pub kappa: usize,
    #[arg(long)]
    pub p_tilde: f64,
    #[arg(long)]
    pub q_tilde: f64,
    #[arg(long, default_value_t = 80)]
    pub walk_len: usize,
    #[arg(long, default_value_t = 5)]
    pub negatives: usize,
    /// "unconstrained" or "constrained"
    #[arg(long, default_value = "unconstrained")]
    pub mode: String,
    /// "text" or "tsv"
    #[arg(long, default_value = "text")]
    pub format: String,
}

pub fn theory(a: TheoryArgs) -> Result<()> {
    let mode = parse_mode(&a.mode)?;
    let (alpha_s, beta_s) = match mode {
        Mode::Unconstrained => mstar_planted(a.p_tilde, a.q_tilde, a.kappa, a.walk_len)?,
        Mode::Constrained => {
            let v = mstar_constrained_planted(
                a.p_tilde,
                a.q_tilde,
                a.kappa,
                a.walk_len,
                a.negatives,
            )?;
            (v, if a.kappa > 1 { -v / (a.kappa as f64 - 1.0) } else { 0.0 })
        }
    };
    let m = planted_matrix(alpha_s, beta_s, a.kappa);
    let f = factor_nice_matrix(alpha_s, beta_s, a.kappa)?;
    match a.format.as_str() {
        "tsv" => {
            println!("alpha_star\t{alpha_s:?}");
            println!("beta_star\t{beta_s:?}");
            println!("delta\t{:?}", f.delta);
            println!("rank\t{}", f.rank);
            for i in 0..a.kappa {
                let row: Vec<String> = (0..a.kappa).map(|j| format!("{:?}", m.get(i, j))).collect();
                println!("mstar\t{}", row.join("\t"));
            }
            for i in 0..a.kappa {
                let row: Vec<String> =
                    f.u.row(i).iter().map(|x| format!("{x:?}")).collect();
                println!("row\t{}", row.join("\t"));
            }
        }
        "text" => {
            println!("mode: {}", a.mode);
            println!("alpha* = {alpha_s:.12}");
            println!("beta*  = {beta_s:.12}");
            println!("delta  = {:.12} (rank {})", f.delta, f.rank);
            println!("M*:");
            for i in 0..a.kappa {
                let row: Vec<String> =
                    (0..a.kappa).map(|j| format!("{:10.6}", m.get(i, j))).collect();
                println!("  [{}]", row.join(", "));
            }
            println!("target rows:");
            for i in 0..a.kappa {
                let row: Vec<String> =
                    f.u.row(i).iter().map(|x| format!("{x:10.6}")).collect();
                println!("  [{}]", row.join(", "));
            }
        }
        other => return Err(Error::input(format!("unknown format '{other}'"))),
    }
    Ok(())
}

#[derive(Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub train_frac: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

pub fn classify(a: ClassifyArgs) -> Result<()> {
    let (emb, ids) = load_embeddings_any(&a.embeddings)?;
    let truth_map = read_labels_tsv(&a.labels)?;
    let truth = partition_over(&ids, &truth_map)?;
    let (acc, _) = train_node_classifier(&emb, &truth.labels, truth.k, a.train_frac, a.seed)?;
    println!("train_frac,seed,accuracy");
    println!("{},{},{acc}", a.train_frac, a.seed);
    Ok(())
}

#[derive(Args)]
pub struct LinkpredArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub largest_component: bool,
    #[arg(long, default_value_t = 0.5)]
    pub edge_frac: f64,
    /// "average" or "hadamard"
    #[arg(long, default_value = "average")]
    pub edge_mode: String,
    #[command(flatten)]
    pub walk: WalkParams,
    #[command(flatten)]
    pub train: TrainParams,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

pub fn linkpred(a: LinkpredArgs) -> Result<()> {
    let loaded: LoadedGraph = load_edge_list(&a.graph, a.largest_component)?;
    let n = loaded.graph.n();
    let lg = LabeledGraph {
        graph: loaded.graph,
        labels: vec![0; n],
        thetas: vec![1.0; n],
    };
    let mode = match a.edge_mode.as_str() {
        "average" => EdgeEmbeddingMode::Average,
        "hadamard" => EdgeEmbeddingMode::Hadamard,
        other => return Err(Error::input(format!("unknown edge embedding mode '{other}'"))),
    };
    let wc = a.walk.to_config()?;
    let tc = a.train.to_config(a.seed)?;
    let lp = link_prediction_experiment(&lg, &wc, &tc, a.edge_frac, mode, a.seed)?;
    println!("edge_frac,edge_mode,seed,auc,accuracy,held_out_edges,sample_size");
    println!(
        "{},{},{},{},{},{},{}",
        a.edge_frac, a.edge_mode, a.seed, lp.auc, lp.accuracy, lp.held_out_edges, lp.sample_size
    );
    Ok(())
}
