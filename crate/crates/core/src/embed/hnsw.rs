//! Hierarchical navigable small-world graph over unit-normalized vectors,
//! scored by cosine similarity.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HnswParams {
    /// Links per node on upper layers; layer 0 allows twice as many.
    pub m: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
    pub seed: u64,
}

impl Default for HnswParams {
    fn default() -> Self {
        HnswParams {
            m: 16,
            ef_construction: 200,
            ef_search: 64,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Scored {
    sim: f32,
    node: usize,
}

impl Eq for Scored {}

impl Ord for Scored {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sim
            .total_cmp(&other.sim)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
pub struct Hnsw {
    params: HnswParams,
    points: Vec<Vec<f32>>,
    /// links[node][layer] = neighbour ids
    links: Vec<Vec<Vec<usize>>>,
    entry: Option<usize>,
    top_layer: usize,
}

fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &[f32]) -> Vec<f32> {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter().map(|x| x / n).collect()
    } else {
        v.to_vec()
    }
}

impl Hnsw {
    pub fn build(vectors: &[&[f32]], params: HnswParams) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let level_mult = 1.0 / (params.m.max(2) as f64).ln();
        let mut graph = Hnsw {
            params,
            points: Vec::with_capacity(vectors.len()),
            links: Vec::with_capacity(vectors.len()),
            entry: None,
            top_layer: 0,
        };
        for v in vectors {
            let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            let level = (-u.ln() * level_mult).floor() as usize;
            graph.insert(normalize(v), level);
        }
        graph
    }

    fn max_links(&self, layer: usize) -> usize {
        if layer == 0 {
            self.params.m * 2
        } else {
            self.params.m
        }
    }

    fn insert(&mut self, point: Vec<f32>, level: usize) {
        let id = self.points.len();
        self.points.push(point);
        self.links.push(vec![Vec::new(); level + 1]);

        let Some(mut entry) = self.entry else {
            self.entry = Some(id);
            self.top_layer = level;
            return;
        };

        let query = self.points[id].clone();
        for layer in (level + 1..=self.top_layer).rev() {
            entry = self.greedy(&query, entry, layer);
        }
        let mut entries = vec![entry];
        for layer in (0..=level.min(self.top_layer)).rev() {
            let found = self.search_layer(&query, &entries, self.params.ef_construction, layer);
            let neighbours: Vec<usize> = found.iter().take(self.params.m).map(|s| s.node).collect();
            self.links[id][layer] = neighbours.clone();
            for &n in &neighbours {
                self.links[n][layer].push(id);
                if self.links[n][layer].len() > self.max_links(layer) {
                    self.prune(n, layer);
                }
            }
            entries = found.iter().map(|s| s.node).collect();
        }
        if level > self.top_layer {
            self.top_layer = level;
            self.entry = Some(id);
        }
    }

    fn prune(&mut self, node: usize, layer: usize) {
        let base = &self.points[node];
        let mut scored: Vec<Scored> = self.links[node][layer]
            .iter()
            .map(|&n| Scored {
                sim: dot(base, &self.points[n]),
                node: n,
            })
            .collect();
        scored.sort_by(|a, b| b.cmp(a));
        scored.truncate(self.max_links(layer));
        self.links[node][layer] = scored.into_iter().map(|s| s.node).collect();
    }

    fn greedy(&self, query: &[f32], mut current: usize, layer: usize) -> usize {
        let mut best = dot(query, &self.points[current]);
        loop {
            let mut moved = false;
            for &n in &self.links[current][layer] {
                let sim = dot(query, &self.points[n]);
                if sim > best {
                    best = sim;
                    current = n;
                    moved = true;
                }
            }
            if !moved {
                return current;
            }
        }
    }

    /// Best-first search on one layer; results sorted by similarity descending.
    fn search_layer(
        &self,
        query: &[f32],
        entries: &[usize],
        ef: usize,
        layer: usize,
    ) -> Vec<Scored> {
        let mut visited: HashSet<usize> = entries.iter().copied().collect();
        let mut candidates: BinaryHeap<Scored> = BinaryHeap::new();
        // min-heap of current results via Reverse ordering
        let mut results: BinaryHeap<std::cmp::Reverse<Scored>> = BinaryHeap::new();
        for &e in entries {
            let s = Scored {
                sim: dot(query, &self.points[e]),
                node: e,
            };
            candidates.push(s);
            results.push(std::cmp::Reverse(s));
            if results.len() > ef {
                results.pop();
            }
        }
        while let Some(c) = candidates.pop() {
            let worst = results.peek().map_or(f32::NEG_INFINITY, |r| r.0.sim);
            if c.sim < worst && results.len() >= ef {
                break;
            }
            for &n in self.links[c.node].get(layer).into_iter().flatten() {
                if !visited.insert(n) {
                    continue;
                }
                let s = Scored {
                    sim: dot(query, &self.points[n]),
                    node: n,
                };
                let worst = results.peek().map_or(f32::NEG_INFINITY, |r| r.0.sim);
                if results.len() < ef || s.sim > worst {
                    candidates.push(s);
                    results.push(std::cmp::Reverse(s));
                    if results.len() > ef {
                        results.pop();
                    }
                }
            }
        }
        let mut out: Vec<Scored> = results.into_iter().map(|r| r.0).collect();
        out.sort_by(|a, b| b.cmp(a));
        out
    }

    /// Approximate `k` nearest nodes as `(node, cosine)` pairs, best first.
    pub fn search(&self, query: &[f32], k: usize) -> Vec<(usize, f32)> {
        let Some(mut entry) = self.entry else {
            return Vec::new();
        };
        let query = normalize(query);
        for layer in (1..=self.top_layer).rev() {
            entry = self.greedy(&query, entry, layer);
        }
        self.search_layer(&query, &[entry], self.params.ef_search.max(k), 0)
            .into_iter()
            .take(k)
            .map(|s| (s.node, s.sim))
            .collect()
    }
}
