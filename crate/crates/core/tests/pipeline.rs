//! Cross-module pipeline tests: training feeding clustering and scoring.

use blockwalk::cluster::kmeans;
use blockwalk::metrics::{accuracy, Partition};
use blockwalk::sampler::WalkConfig;
use blockwalk::trainer::{train, Mode, TrainConfig};
use blockwalk::Graph;

fn two_cliques() -> (Graph, Vec<u32>) {
    let mut edges = Vec::new();
    for a in 0..5u32 {
        for b in (a + 1)..5 {
            edges.push((a, b));
            edges.push((a + 5, b + 5));
        }
    }
    (Graph::build(&edges, 10).unwrap(), (0..10).map(|i| (i / 5) as u32).collect())
}

#[test]
fn disconnected_cliques_recovered_exactly_across_seeds() {
    // walks never cross cliques, so d = 2 embeddings separate them fully
    let (g, truth) = two_cliques();
    let truth = Partition::new(truth, 2).unwrap();
    for seed in 0..10u64 {
        let tc = TrainConfig { d: 2, seed, ..TrainConfig::default() };
        let emb = train(&g, &WalkConfig::default(), &tc).unwrap();
        let km = kmeans(emb.center(), 2, 10, seed).unwrap();
        let acc = accuracy(&truth, &Partition::new(km.labels, 2).unwrap()).unwrap();
        assert_eq!(acc, 1.0, "seed {seed}");
    }
}

#[test]
fn constrained_mode_also_separates_cliques() {
    let (g, truth) = two_cliques();
    let truth = Partition::new(truth, 2).unwrap();
    let tc = TrainConfig { d: 2, mode: Mode::Constrained, seed: 3, ..TrainConfig::default() };
    let emb = train(&g, &WalkConfig::default(), &tc).unwrap();
    assert!(emb.tied());
    let km = kmeans(emb.center(), 2, 10, 3).unwrap();
    let acc = accuracy(&truth, &Partition::new(km.labels, 2).unwrap()).unwrap();
    assert_eq!(acc, 1.0);
}

#[test]
fn hogwild_matches_deterministic_quality() {
    let (g, truth) = two_cliques();
    let truth = Partition::new(truth, 2).unwrap();
    let tc = TrainConfig {
        d: 2,
        seed: 5,
        deterministic: false,
        workers: 2,
        ..TrainConfig::default()
    };
    let emb = train(&g, &WalkConfig::default(), &tc).unwrap();
    let km = kmeans(emb.center(), 2, 10, 5).unwrap();
    let acc = accuracy(&truth, &Partition::new(km.labels, 2).unwrap()).unwrap();
    assert_eq!(acc, 1.0);
}
