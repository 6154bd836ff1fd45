//! Synthetic graph generators and provider splits.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::partition::EdgeRecord;

/// `m` edges with endpoints uniform over `1..=v`. Attribute lanes are
/// uniform in `0..attr_max`.
pub fn uniform(rng: &mut impl Rng, v: u64, m: usize, attr_lanes: usize, attr_max: u64) -> Vec<EdgeRecord> {
    (0..m)
        .map(|_| {
            EdgeRecord::new(
                rng.gen_range(1..=v),
                rng.gen_range(1..=v),
                (0..attr_lanes).map(|_| rng.gen_range(0..attr_max.max(1))).collect(),
            )
        })
        .collect()
}

/// Preferential attachment: each edge picks a uniform source and a
/// destination drawn proportionally to current in-degree plus one, which
/// gives a heavy-tailed in-degree distribution.
pub fn power_law(rng: &mut impl Rng, v: u64, m: usize, attr_lanes: usize, attr_max: u64) -> Vec<EdgeRecord> {
    // every vertex once, then one entry per received edge
    let mut targets: Vec<u64> = (1..=v).collect();
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let src = rng.gen_range(1..=v);
        let dst = targets[rng.gen_range(0..targets.len())];
        targets.push(dst);
        edges.push(EdgeRecord::new(
            src,
            dst,
            (0..attr_lanes).map(|_| rng.gen_range(0..attr_max.max(1))).collect(),
        ));
    }
    edges
}

/// Assigns every edge to one of `n` providers uniformly at random.
pub fn split_random(rng: &mut impl Rng, edges: &[EdgeRecord], n: usize) -> Vec<Vec<EdgeRecord>> {
    let mut out = vec![Vec::new(); n];
    for e in edges {
        out[rng.gen_range(0..n)].push(e.clone());
    }
    out
}

/// Shuffles the edges and deals them round-robin to `n` providers.
pub fn split_dealt(rng: &mut impl Rng, edges: &[EdgeRecord], n: usize) -> Vec<Vec<EdgeRecord>> {
    let mut all = edges.to_vec();
    all.shuffle(rng);
    let mut out = vec![Vec::new(); n];
    for (i, e) in all.into_iter().enumerate() {
        out[i % n].push(e);
    }
    out
}
