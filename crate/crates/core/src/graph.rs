//! Immutable sparse undirected simple graph in compressed row form.
//!
//! Construction deduplicates edges and drops self-loops, so every stored
//! graph satisfies: neighbor slices strictly increasing, symmetric adjacency,
//! `degree(v) == offsets[v+1] - offsets[v]`, and `sum(degrees) == 2m`.

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    degrees: Vec<u32>,
    m: usize,
}

impl Graph {
    /// Build from an edge list. Duplicates, self-loops and repeated
    /// orientations are dropped; endpoints must lie in `[0, n)`.
    pub fn build(edges: &[(u32, u32)], n: usize) -> Result<Graph> {
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a as usize >= n || b as usize >= n {
                return Err(Error::input(format!(
                    "edge ({a}, {b}) out of range for n = {n}"
                )));
            }
            if a == b {
                continue;
            }
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        let mut degrees = Vec::with_capacity(n);
        offsets.push(0);
        for list in adj.iter_mut() {
            list.sort_unstable();
            list.dedup();
            neighbors.extend_from_slice(list);
            degrees.push(list.len() as u32);
            offsets.push(neighbors.len());
        }
        let m = neighbors.len() / 2;
        Ok(Graph { n, offsets, neighbors, degrees, m })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Undirected edge count.
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn degree(&self, v: u32) -> u32 {
        self.degrees[v as usize]
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    #[inline]
    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.neighbors[self.offsets[v as usize]..self.offsets[v as usize + 1]]
    }

    /// Membership test via binary search on the sorted neighbor slice.
    #[inline]
    pub fn has_edge(&self, a: u32, b: u32) -> bool {
        self.neighbors(a).binary_search(&b).is_ok()
    }

    /// Undirected edges, each once, with `a < b`, in sorted order.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.m);
        for a in 0..self.n as u32 {
            for &b in self.neighbors(a) {
                if a < b {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Directed edge by index in `[0, 2m)`: the `i`-th entry of the CSR
    /// neighbor array, returned as (source, target).
    pub fn directed_edge(&self, idx: usize) -> (u32, u32) {
        debug_assert!(idx < 2 * self.m);
        let src = match self.offsets.binary_search(&idx) {
            // offsets can repeat for isolated vertices; take the last row
            // whose slice contains idx
            Ok(mut pos) => {
                while pos + 1 < self.offsets.len() && self.offsets[pos + 1] == idx {
                    pos += 1;
                }
                pos
            }
            Err(pos) => pos - 1,
        };
        (src as u32, self.neighbors[idx])
    }

    /// Connected component id per vertex plus component count.
    pub fn components(&self) -> (Vec<u32>, usize) {
        let mut comp = vec![u32::MAX; self.n];
        let mut next = 0u32;
        let mut stack = Vec::new();
        for s in 0..self.n as u32 {
            if comp[s as usize] != u32::MAX {
                continue;
            }
            comp[s as usize] = next;
            stack.push(s);
            while let Some(v) = stack.pop() {
                for &w in self.neighbors(v) {
                    if comp[w as usize] == u32::MAX {
                        comp[w as usize] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        (comp, next as usize)
    }

    /// Induced subgraph on the largest connected component, together with a
    /// map from new vertex id to original vertex id. Size ties go to the
    /// component containing the smallest original vertex id.
    pub fn largest_component(&self) -> (Graph, Vec<u32>) {
        if self.n == 0 {
            return (Graph::build(&[], 0).unwrap(), Vec::new());
        }
        let (comp, ncomp) = self.components();
        let mut size = vec![0usize; ncomp];
        for &c in &comp {
            size[c as usize] += 1;
        }
        // components are discovered in order of their minimum vertex id, so
        // the first argmax honors the tie-break rule
        let best = (0..ncomp).max_by_key(|&c| (size[c], std::cmp::Reverse(c))).unwrap() as u32;
        let mut map = Vec::with_capacity(size[best as usize]);
        let mut new_id = vec![u32::MAX; self.n];
        for v in 0..self.n as u32 {
            if comp[v as usize] == best {
                new_id[v as usize] = map.len() as u32;
                map.push(v);
            }
        }
        let mut edges = Vec::new();
        for &(a, b) in &self.edges() {
            if comp[a as usize] == best {
                edges.push((new_id[a as usize], new_id[b as usize]));
            }
        }
        (Graph::build(&edges, map.len()).unwrap(), map)
    }

    /// Write as whitespace-separated edge list, one undirected edge per line.
    pub fn save_edge_list(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for (a, b) in self.edges() {
            writeln!(f, "{a} {b}")?;
        }
        Ok(())
    }
}

/// Result of loading an edge list: densely relabeled graph plus the original
/// vertex label for each new id.
#[derive(Debug)]
pub struct LoadedGraph {
    pub graph: Graph,
    /// original_label[new_id] = label as it appeared in the file
    pub original_label: Vec<u64>,
}

/// Load a whitespace-separated edge list. Lines starting with `#` are
/// ignored. Vertex labels may be arbitrary u64; they are relabeled densely
/// to 0..n-1 in sorted order (the identity for inputs already labeled
/// 0..n-1 with no gaps). Input direction is discarded (both orientations
/// are stored). With `largest_component`, only the largest connected
/// component is kept and labels are re-densified.
pub fn load_edge_list(path: impl AsRef<Path>, largest_component: bool) -> Result<LoadedGraph> {
    let f = BufReader::new(std::fs::File::open(&path)?);
    let mut raw_edges: Vec<(u64, u64)> = Vec::new();
    for (lineno, line) in f.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut it = t.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<u64> {
            tok.ok_or_else(|| Error::input(format!("line {}: expected two vertex ids", lineno + 1)))?
                .parse::<u64>()
                .map_err(|_| Error::input(format!("line {}: unparseable vertex id", lineno + 1)))
        };
        let a = parse(it.next())?;
        let b = parse(it.next())?;
        raw_edges.push((a, b));
    }
    let mut original: Vec<u64> =
        raw_edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    original.sort_unstable();
    original.dedup();
    let ids: HashMap<u64, u32> =
        original.iter().enumerate().map(|(i, &l)| (l, i as u32)).collect();
    let edges: Vec<(u32, u32)> =
        raw_edges.iter().map(|&(a, b)| (ids[&a], ids[&b])).collect();
    let graph = Graph::build(&edges, original.len())?;
    if !largest_component {
        return Ok(LoadedGraph { graph, original_label: original });
    }
    let (sub, map) = graph.largest_component();
    let original_label = map.iter().map(|&v| original[v as usize]).collect();
    Ok(LoadedGraph { graph: sub, original_label })
}

/// Read a `vertex<TAB>label` sidecar into a label vector aligned with the
/// original vertex labels of `loaded`. Labels are interned densely in order
/// of first appearance; returns (per-vertex class id, class count).
pub fn load_label_sidecar(path: impl AsRef<Path>, loaded: &LoadedGraph) -> Result<(Vec<u32>, usize)> {
    let f = BufReader::new(std::fs::File::open(&path)?);
    let mut by_label: HashMap<u64, String> = HashMap::new();
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
            .ok_or_else(|| Error::input(format!("label line {}: bad vertex id", lineno + 1)))?;
        let lab = it
            .next()
            .ok_or_else(|| Error::input(format!("label line {}: missing label", lineno + 1)))?;
        by_label.insert(v, lab.trim().to_string());
    }
    let mut classes: HashMap<String, u32> = HashMap::new();
    let mut out = Vec::with_capacity(loaded.graph.n());
    for &orig in &loaded.original_label {
        let lab = by_label
            .get(&orig)
            .ok_or_else(|| Error::input(format!("vertex {orig} missing from label sidecar")))?;
        let next = classes.len() as u32;
        out.push(*classes.entry(lab.clone()).or_insert(next));
    }
    Ok((out, classes.len()))
}
