use crate::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use squashscope::graph::{generate, GraphKind};
use squashscope::Graph;

pub const CORPUS_SIZE: usize = 200;
pub const MIN_NODES: usize = 10;
pub const MAX_NODES: usize = 30;

/// Molecule-like graphs with `n` uniform in `[min_nodes, max_nodes]` and one to three rings.
pub fn molecule_corpus(
    count: usize,
    min_nodes: usize,
    max_nodes: usize,
    seed: u64,
) -> Result<Vec<Graph>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(min_nodes..=max_nodes);
            let extra_cycles = rng.gen_range(1..=3);
            Ok(generate(
                &GraphKind::MoleculeLike { n, extra_cycles },
                rng.gen(),
            )?)
        })
        .collect()
}

pub fn default_corpus(seed: u64) -> Result<Vec<Graph>> {
    molecule_corpus(CORPUS_SIZE, MIN_NODES, MAX_NODES, seed)
}

/// `max_i ⌈diam(G_i)/2⌉`, the smallest depth that reaches every pair of every graph.
pub fn min_depth_for_diameter(graphs: &[Graph]) -> Result<usize> {
    let mut m = 1;
    for g in graphs {
        m = m.max(g.diameter()?.div_ceil(2));
    }
    Ok(m)
}
