//! Command-line front end: graph generation, walk dumps, embedding,
//! clustering, scoring, closed-form theory targets, downstream tasks, and
//! the experiment sweep runner with rate-of-convergence fits.
//!
//! Exit codes: 0 on success, 1 for input errors, 2 for numerical errors.

mod commands;
mod config;
mod experiment;
mod ratefit;

use blockwalk::Error;
use clap::{Parser, Subcommand};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "blockwalk", version, about = "node2vec-style community detection pipeline with closed-form limit targets")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample a (degree-corrected) planted-partition graph to disk
    Generate(commands::GenerateArgs),
    /// Dump random walks as text, one walk per line
    Walks(commands::WalksArgs),
    /// Train embeddings on a graph and write them to a file
    Embed(commands::EmbedArgs),
    /// k-means over an embedding file, writing a labels TSV
    Cluster(commands::ClusterArgs),
    /// Score predicted labels against ground truth (CSV row)
    Evaluate(commands::EvaluateArgs),
    /// Print closed-form limit objects for a planted-partition model
    Theory(commands::TheoryArgs),
    /// Node classification from a labeled fraction of embeddings
    Classify(commands::ClassifyArgs),
    /// Link prediction on a partially observed graph
    Linkpred(commands::LinkpredArgs),
    /// Run a full parameter sweep from a config file, writing a CSV report
    Experiment(experiment::ExperimentArgs),
    /// Fit log-log convergence rates per group from an experiment report
    Ratefit(ratefit::RatefitArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Generate(a) => commands::generate(a),
        Cmd::Walks(a) => commands::walks(a),
        Cmd::Embed(a) => commands::embed(a),
        Cmd::Cluster(a) => commands::cluster(a),
        Cmd::Evaluate(a) => commands::evaluate(a),
        Cmd::Theory(a) => commands::theory(a),
        Cmd::Classify(a) => commands::classify(a),
        Cmd::Linkpred(a) => commands::linkpred(a),
        Cmd::Experiment(a) => experiment::run(a),
        Cmd::Ratefit(a) => ratefit::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numerical(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
