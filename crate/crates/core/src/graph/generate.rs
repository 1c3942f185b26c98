use super::Graph;
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Attempts allowed to randomized generators before giving up.
pub const MAX_ATTEMPTS: usize = 1000;

/// Graph families understood by [`generate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphKind {
    Path {
        n: usize,
    },
    Cycle {
        n: usize,
    },
    Complete {
        n: usize,
    },
    /// Complete `arity`-ary tree with `depth` levels below the root.
    Tree {
        arity: usize,
        depth: usize,
    },
    Grid {
        width: usize,
        height: usize,
    },
    ErdosRenyi {
        n: usize,
        p: f64,
    },
    /// Uniform random labelled tree plus `extra_cycles` random chords.
    MoleculeLike {
        n: usize,
        extra_cycles: usize,
    },
}

impl GraphKind {
    pub fn is_randomized(&self) -> bool {
        matches!(
            self,
            GraphKind::ErdosRenyi { .. } | GraphKind::MoleculeLike { .. }
        )
    }

    /// Node count implied by the parameters.
    pub fn node_count(&self) -> usize {
        match *self {
            GraphKind::Path { n }
            | GraphKind::Cycle { n }
            | GraphKind::Complete { n }
            | GraphKind::ErdosRenyi { n, .. }
            | GraphKind::MoleculeLike { n, .. } => n,
            GraphKind::Tree { arity, depth } => tree_size(arity, depth),
            GraphKind::Grid { width, height } => width * height,
        }
    }
}

fn tree_size(arity: usize, depth: usize) -> usize {
    let mut total = 0usize;
    let mut level = 1usize;
    for _ in 0..=depth {
        total = total.saturating_add(level);
        level = level.saturating_mul(arity);
    }
    total
}

/// Generates a graph. Deterministic kinds ignore `seed`.
///
/// Randomized kinds resample (up to [`MAX_ATTEMPTS`] times) until the graph is connected
/// and non-bipartite. Deterministic kinds return the named structure as is; paths, trees,
/// grids and even cycles are bipartite and come back with `is_validated() == false`.
pub fn generate(kind: &GraphKind, seed: u64) -> Result<Graph> {
    let n = kind.node_count();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "{kind:?} has fewer than 2 nodes"
        )));
    }
    match *kind {
        GraphKind::Path { n } => {
            Graph::from_edges(n, &(0..n - 1).map(|i| (i, i + 1)).collect::<Vec<_>>())
        }
        GraphKind::Cycle { n } => {
            if n < 3 {
                return Err(Error::InvalidParameter("cycle needs n >= 3".into()));
            }
            Graph::from_edges(n, &(0..n).map(|i| (i, (i + 1) % n)).collect::<Vec<_>>())
        }
        GraphKind::Complete { n } => {
            let edges: Vec<_> = (0..n)
                .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
                .collect();
            Graph::from_edges(n, &edges)
        }
        GraphKind::Tree { arity, depth } => {
            if arity == 0 || depth == 0 {
                return Err(Error::InvalidParameter(
                    "tree needs arity >= 1 and depth >= 1".into(),
                ));
            }
            // Breadth-first numbering: node i > 0 hangs off (i - 1) / arity.
            let edges: Vec<_> = (1..n).map(|i| ((i - 1) / arity, i)).collect();
            Graph::from_edges(n, &edges)
        }
        GraphKind::Grid { width, height } => {
            let id = |x: usize, y: usize| y * width + x;
            let mut edges = Vec::new();
            for y in 0..height {
                for x in 0..width {
                    if x + 1 < width {
                        edges.push((id(x, y), id(x + 1, y)));
                    }
                    if y + 1 < height {
                        edges.push((id(x, y), id(x, y + 1)));
                    }
                }
            }
            Graph::from_edges(n, &edges)
        }
        GraphKind::ErdosRenyi { n, p } => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "edge probability {p} not in (0, 1]"
                )));
            }
            if n < 3 {
                return Err(Error::InvalidParameter(
                    "erdos_renyi needs n >= 3 for an odd cycle".into(),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            resample(|| {
                let mut edges = Vec::new();
                for a in 0..n {
                    for b in a + 1..n {
                        if rng.gen_bool(p) {
                            edges.push((a, b));
                        }
                    }
                }
                Graph::from_edges(n, &edges)
            })
        }
        GraphKind::MoleculeLike { n, extra_cycles } => {
            let max_chords = n * (n - 1) / 2 - (n - 1);
            if extra_cycles == 0 {
                return Err(Error::InvalidParameter(
                    "molecule_like needs extra_cycles >= 1 (a tree is bipartite)".into(),
                ));
            }
            if extra_cycles > max_chords {
                return Err(Error::InvalidParameter(format!(
                    "{extra_cycles} chords requested but only {max_chords} non-tree pairs exist"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            resample(|| {
                let mut edges = random_tree(n, &mut rng);
                let mut present: std::collections::HashSet<(usize, usize)> =
                    edges.iter().copied().collect();
                while edges.len() < n - 1 + extra_cycles {
                    let a = rng.gen_range(0..n);
                    let b = rng.gen_range(0..n);
                    let e = (a.min(b), a.max(b));
                    if a != b && present.insert(e) {
                        edges.push(e);
                    }
                }
                Graph::from_edges(n, &edges)
            })
        }
    }
}

fn resample(mut draw: impl FnMut() -> Result<Graph>) -> Result<Graph> {
    for _ in 0..MAX_ATTEMPTS {
        let g = draw()?;
        if g.is_validated() {
            return Ok(g);
        }
    }
    Err(Error::AttemptCapExceeded {
        attempts: MAX_ATTEMPTS,
        reason: "no connected non-bipartite sample; parameters too sparse?".into(),
    })
}

/// Uniform random labelled tree via a random Prufer sequence.
fn random_tree(n: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    if n == 2 {
        return vec![(0, 1)];
    }
    let prufer: Vec<usize> = (0..n - 2).map(|_| rng.gen_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &x in &prufer {
        degree[x] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    let mut leaves: std::collections::BTreeSet<usize> =
        (0..n).filter(|&i| degree[i] == 1).collect();
    for &x in &prufer {
        let leaf = *leaves.iter().next().expect("a tree always has a leaf");
        leaves.remove(&leaf);
        edges.push((leaf.min(x), leaf.max(x)));
        degree[x] -= 1;
        if degree[x] == 1 {
            leaves.insert(x);
        }
    }
    let mut rest = leaves.into_iter();
    let (a, b) = (
        rest.next().expect("two leaves remain"),
        rest.next().expect("two leaves remain"),
    );
    edges.push((a, b));
    // Shuffle so the chord sampler does not see a structured order.
    edges.shuffle(rng);
    edges
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_shapes() {
        let k3 = generate(&GraphKind::Complete { n: 3 }, 0).unwrap();
        assert_eq!(k3.edge_count(), 3);
        assert_eq!(k3.degrees(), vec![2, 2, 2]);
        let p5 = generate(&GraphKind::Path { n: 5 }, 0).unwrap();
        assert_eq!(p5.edges(), &[(0, 1), (1, 2), (2, 3), (3, 4)]);
        let t = generate(&GraphKind::Tree { arity: 2, depth: 2 }, 0).unwrap();
        assert_eq!(t.n(), 7);
        assert_eq!(t.degree(0), 2);
        assert_eq!((3..7).map(|i| t.degree(i)).collect::<Vec<_>>(), vec![1; 4]);
        let grid = generate(
            &GraphKind::Grid {
                width: 3,
                height: 3,
            },
            0,
        )
        .unwrap();
        assert_eq!(grid.edge_count(), 12);
    }

    #[test]
    fn random_tree_is_a_spanning_tree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..20 {
            let edges = random_tree(n, &mut rng);
            let g = Graph::from_edges(n, &edges).unwrap();
            assert!(g.is_connected());
            assert_eq!(g.edge_count(), n - 1);
        }
    }

    #[test]
    fn randomized_kinds_validate() {
        for seed in 0..20 {
            let g = generate(
                &GraphKind::MoleculeLike {
                    n: 15,
                    extra_cycles: 2,
                },
                seed,
            )
            .unwrap();
            assert!(g.is_validated());
            assert_eq!(g.edge_count(), 16);
            let g = generate(&GraphKind::ErdosRenyi { n: 10, p: 0.4 }, seed).unwrap();
            assert!(g.is_validated());
        }
    }

    #[test]
    fn hopeless_parameters_hit_the_cap() {
        let err = generate(&GraphKind::ErdosRenyi { n: 30, p: 0.001 }, 1).unwrap_err();
        assert!(matches!(err, Error::AttemptCapExceeded { .. }));
        assert!(generate(
            &GraphKind::MoleculeLike {
                n: 10,
                extra_cycles: 0
            },
            1
        )
        .is_err());
    }
}
