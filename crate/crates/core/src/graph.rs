//! Z^n-periodic graphs given by a fundamental cell and an edge stencil.
//!
//! A vertex is a pair `(orbit, cell)`; the lattice acts by translating the
//! cell, so the action is free and the hop metric is translation invariant by
//! construction. A stencil descriptor `(j, k, δ)` states that `(j, α) ~ (k, α + δ)`
//! for every cell `α`.
//!
//! Graph description files are TOML:
//!
//! ```toml
//! n = 1                 # lattice rank
//! orbits = 2            # vertices per fundamental cell
//! labels = ["a", "b"]   # optional
//! edges = [             # [j, k, [δ...]], orbits numbered from 1
//!   [1, 2, [0]], [2, 1, [0]],
//!   [2, 1, [1]], [1, 2, [-1]],
//! ]
//! ```

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Deserialize;
use thiserror::Error;

use crate::lattice::{generates_full_lattice, Cell};
use crate::operator::{BandOperator, CoefficientField};
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("Parse: {0}")]
    Parse(String),
    #[error("InvalidDescription: {0}")]
    InvalidDescription(String),
    #[error(
        "AntiReflexive: descriptor ({orbit}, {orbit}, {offset}) makes a vertex its own neighbour"
    )]
    AntiReflexive { orbit: usize, offset: Cell },
    #[error("AsymmetricStencil: ({from}, {to}, {offset}) occurs {forward} time(s) but its reverse occurs {backward} time(s)")]
    AsymmetricStencil {
        from: usize,
        to: usize,
        offset: Cell,
        forward: usize,
        backward: usize,
    },
    #[error("Disconnected: orbit {orbit} is not reachable from orbit 1 in the quotient graph")]
    Disconnected { orbit: usize },
    #[error("DegenerateOffsets: cycle offsets generate a proper subgroup of Z^{rank} (invariant factors {factors:?})")]
    DegenerateOffsets { rank: usize, factors: Vec<i128> },
    #[error("UnknownBuiltin: '{0}' (expected cayley, zigzag or honeycomb)")]
    UnknownBuiltin(String),
    #[error("CapExceeded: no path within {cap} hops")]
    CapExceeded { cap: usize },
}

/// One stencil descriptor, orbits numbered from 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub offset: Cell,
}

/// A vertex `α · x_orbit`, orbit numbered from 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vertex {
    pub orbit: usize,
    pub cell: Cell,
}

impl Vertex {
    pub fn new(orbit: usize, cell: impl Into<Cell>) -> Self {
        Vertex {
            orbit,
            cell: cell.into(),
        }
    }

    pub fn translated(&self, by: &Cell) -> Self {
        Vertex {
            orbit: self.orbit,
            cell: &self.cell + by,
        }
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.orbit + 1, self.cell)
    }
}

/// Raw file form of a graph description.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDescription {
    pub n: usize,
    pub orbits: usize,
    pub edges: Vec<(usize, usize, Vec<i64>)>,
    #[serde(default)]
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicGraph {
    rank: usize,
    orbits: usize,
    edges: Vec<Edge>,
    degrees: Vec<usize>,
    labels: Option<Vec<String>>,
}

impl PeriodicGraph {
    pub fn from_toml_str(text: &str) -> Result<Self, GraphError> {
        let desc: GraphDescription =
            toml::from_str(text).map_err(|e| GraphError::Parse(e.to_string()))?;
        validate_graph(&desc)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn orbits(&self) -> usize {
        self.orbits
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// m(x) for a vertex in the given orbit.
    pub fn degree(&self, orbit: usize) -> usize {
        self.degrees[orbit]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Neighbours of `v`, with repetition for parallel edges.
    pub fn neighbors<'a>(&'a self, v: &'a Vertex) -> impl Iterator<Item = Vertex> + 'a {
        self.edges
            .iter()
            .filter(move |e| e.from == v.orbit)
            .map(move |e| Vertex {
                orbit: e.to,
                cell: &v.cell + &e.offset,
            })
    }

    /// Largest sup-norm of a stencil offset.
    pub fn stencil_reach(&self) -> i64 {
        self.edges
            .iter()
            .map(|e| e.offset.linf())
            .max()
            .unwrap_or(0)
    }

    /// Hop distances from `source` to every vertex within `radius` hops.
    pub fn ball(&self, source: &Vertex, radius: usize) -> HashMap<Vertex, usize> {
        let mut dist = HashMap::new();
        dist.insert(source.clone(), 0);
        let mut queue = VecDeque::from([source.clone()]);
        while let Some(v) = queue.pop_front() {
            let d = dist[&v];
            if d == radius {
                continue;
            }
            for w in self.neighbors(&v) {
                if !dist.contains_key(&w) {
                    dist.insert(w.clone(), d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }
}

/// Checks the graph axioms and builds the validated graph.
pub fn validate_graph(desc: &GraphDescription) -> Result<PeriodicGraph, GraphError> {
    let rank = desc.n;
    let orbits = desc.orbits;
    if rank == 0 {
        return Err(GraphError::InvalidDescription(
            "lattice rank n must be positive".into(),
        ));
    }
    if orbits == 0 {
        return Err(GraphError::InvalidDescription(
            "orbits must be positive".into(),
        ));
    }
    if let Some(labels) = &desc.labels {
        if labels.len() != orbits {
            return Err(GraphError::InvalidDescription(format!(
                "{} labels given for {orbits} orbits",
                labels.len()
            )));
        }
    }

    let mut edges = Vec::with_capacity(desc.edges.len());
    for (j, k, delta) in &desc.edges {
        if *j == 0 || *j > orbits || *k == 0 || *k > orbits {
            return Err(GraphError::InvalidDescription(format!(
                "edge ({j}, {k}, {delta:?}) references an orbit outside 1..={orbits}"
            )));
        }
        if delta.len() != rank {
            return Err(GraphError::InvalidDescription(format!(
                "edge ({j}, {k}, {delta:?}) has an offset of length {} but n = {rank}",
                delta.len()
            )));
        }
        let offset = Cell(delta.clone());
        if j == k && offset.is_zero() {
            return Err(GraphError::AntiReflexive { orbit: *j, offset });
        }
        edges.push(Edge {
            from: j - 1,
            to: k - 1,
            offset,
        });
    }

    let mut counts: HashMap<&Edge, usize> = HashMap::new();
    for e in &edges {
        *counts.entry(e).or_default() += 1;
    }
    let mut keys: Vec<_> = counts.keys().copied().collect();
    keys.sort();
    for e in keys {
        let reverse = Edge {
            from: e.to,
            to: e.from,
            offset: -&e.offset,
        };
        let forward = counts[e];
        let backward = counts.get(&reverse).copied().unwrap_or(0);
        if forward != backward {
            return Err(GraphError::AsymmetricStencil {
                from: e.from + 1,
                to: e.to + 1,
                offset: e.offset.clone(),
                forward,
                backward,
            });
        }
    }

    let mut degrees = vec![0; orbits];
    for e in &edges {
        degrees[e.from] += 1;
    }

    // Quotient BFS assigns each orbit a cell potential; every edge then closes
    // a cycle whose offset must lie in the lattice generated so far.
    let mut potential: Vec<Option<Cell>> = vec![None; orbits];
    potential[0] = Some(Cell::zero(rank));
    let mut queue = VecDeque::from([0usize]);
    while let Some(j) = queue.pop_front() {
        let pj = potential[j].clone().expect("visited");
        for e in edges.iter().filter(|e| e.from == j) {
            if potential[e.to].is_none() {
                potential[e.to] = Some(&pj + &e.offset);
                queue.push_back(e.to);
            }
        }
    }
    if let Some(orbit) = potential.iter().position(Option::is_none) {
        return Err(GraphError::Disconnected { orbit: orbit + 1 });
    }
    let potential: Vec<Cell> = potential.into_iter().map(Option::unwrap).collect();
    let cycles: Vec<Vec<i64>> = edges
        .iter()
        .map(|e| (&(&potential[e.from] + &e.offset) - &potential[e.to]).0)
        .filter(|c| c.iter().any(|&x| x != 0))
        .collect();
    if !generates_full_lattice(&cycles, rank) {
        return Err(GraphError::DegenerateOffsets {
            rank,
            factors: crate::lattice::smith_invariants(&cycles, rank),
        });
    }

    Ok(PeriodicGraph {
        rank,
        orbits,
        edges,
        degrees,
        labels: desc.labels.clone(),
    })
}

/// Hop distance ρ(x, y), searching at most `cap` hops.
pub fn graph_distance(
    g: &PeriodicGraph,
    x: &Vertex,
    y: &Vertex,
    cap: usize,
) -> Result<usize, GraphError> {
    // Translate so the search starts in cell 0.
    let shift = -&x.cell;
    let start = x.translated(&shift);
    let target = y.translated(&shift);
    if start == target {
        return Ok(0);
    }
    let mut seen = HashSet::from([start.clone()]);
    let mut frontier = vec![start];
    for hops in 1..=cap {
        let mut next = Vec::new();
        for v in &frontier {
            for w in g.neighbors(v) {
                if w == target {
                    return Ok(hops);
                }
                if seen.insert(w.clone()) {
                    next.push(w);
                }
            }
        }
        frontier = next;
    }
    Err(GraphError::CapExceeded { cap })
}

/// The normalized Laplacian (Δu)(x) = (1/m(x)) Σ_{y~x} u(y).
pub fn laplacian(g: &Arc<PeriodicGraph>) -> BandOperator {
    let n = g.orbits();
    let mut terms: std::collections::BTreeMap<Cell, DMatrix<C64>> = Default::default();
    for e in g.edges() {
        let m = terms
            .entry(e.offset.clone())
            .or_insert_with(|| DMatrix::zeros(n, n));
        m[(e.from, e.to)] += C64::new(1.0 / g.degree(e.from) as f64, 0.0);
    }
    BandOperator::from_terms(
        Arc::clone(g),
        terms
            .into_iter()
            .map(|(k, m)| (k, CoefficientField::Constant(m)))
            .collect(),
    )
    .expect("laplacian terms have the graph's shape")
}

/// Cayley graph of Z^n with generators ±e_i.
pub fn cayley(rank: usize) -> Result<PeriodicGraph, GraphError> {
    let mut edges = Vec::new();
    for i in 0..rank {
        edges.push((1, 1, Cell::unit(rank, i).0));
        edges.push((1, 1, (-&Cell::unit(rank, i)).0));
    }
    validate_graph(&GraphDescription {
        n: rank,
        orbits: 1,
        edges,
        labels: None,
    })
}

/// The zigzag chain: two orbits, Z acting by steps of two vertices.
pub fn zigzag() -> PeriodicGraph {
    validate_graph(&GraphDescription {
        n: 1,
        orbits: 2,
        edges: vec![
            (1, 2, vec![0]),
            (2, 1, vec![0]),
            (2, 1, vec![1]),
            (1, 2, vec![-1]),
        ],
        labels: Some(vec!["x1".into(), "x2".into()]),
    })
    .expect("zigzag stencil is valid")
}

/// The hexagonal (honeycomb) lattice with its two-vertex fundamental cell.
pub fn honeycomb() -> PeriodicGraph {
    validate_graph(&GraphDescription {
        n: 2,
        orbits: 2,
        edges: vec![
            (1, 2, vec![0, 0]),
            (1, 2, vec![-1, 0]),
            (1, 2, vec![0, -1]),
            (2, 1, vec![0, 0]),
            (2, 1, vec![1, 0]),
            (2, 1, vec![0, 1]),
        ],
        labels: Some(vec!["x1".into(), "x2".into()]),
    })
    .expect("honeycomb stencil is valid")
}

pub fn builtin_graph(name: &str, rank: usize) -> Result<PeriodicGraph, GraphError> {
    match name {
        "cayley" => cayley(rank),
        "zigzag" => Ok(zigzag()),
        "honeycomb" => Ok(honeycomb()),
        other => Err(GraphError::UnknownBuiltin(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn desc(n: usize, orbits: usize, edges: &[(usize, usize, &[i64])]) -> GraphDescription {
        GraphDescription {
            n,
            orbits,
            edges: edges.iter().map(|(j, k, d)| (*j, *k, d.to_vec())).collect(),
            labels: None,
        }
    }

    #[test]
    fn zigzag_is_valid_with_degree_two() {
        let g = zigzag();
        assert_eq!((g.rank(), g.orbits()), (1, 2));
        assert_eq!(g.degrees(), &[2, 2]);
    }

    #[test]
    fn loop_rejected() {
        let err = validate_graph(&desc(1, 1, &[(1, 1, &[0]), (1, 1, &[1]), (1, 1, &[-1])]));
        assert!(matches!(
            err,
            Err(GraphError::AntiReflexive { orbit: 1, .. })
        ));
    }

    #[test]
    fn missing_reverse_rejected() {
        let err = validate_graph(&desc(1, 2, &[(1, 2, &[0]), (1, 2, &[1]), (2, 1, &[-1])]));
        assert!(matches!(err, Err(GraphError::AsymmetricStencil { .. })));
    }

    #[test]
    fn parallel_edge_multiplicity_must_match() {
        let err = validate_graph(&desc(
            1,
            2,
            &[
                (1, 2, &[0]),
                (1, 2, &[0]),
                (2, 1, &[0]),
                (2, 1, &[1]),
                (1, 2, &[-1]),
            ],
        ));
        assert!(matches!(
            err,
            Err(GraphError::AsymmetricStencil {
                forward: 2,
                backward: 1,
                ..
            })
        ));
    }

    #[test]
    fn disconnected_quotient_rejected() {
        let err = validate_graph(&desc(1, 2, &[(1, 1, &[1]), (1, 1, &[-1])]));
        assert!(matches!(err, Err(GraphError::Disconnected { orbit: 2 })));
    }

    #[test]
    fn even_sublattice_rejected() {
        // Z with steps of ±2 splits into two components.
        let err = validate_graph(&desc(1, 1, &[(1, 1, &[2]), (1, 1, &[-2])]));
        assert!(matches!(err, Err(GraphError::DegenerateOffsets { .. })));
        // Square lattice with only diagonal steps: checkerboard components.
        let err = validate_graph(&desc(
            2,
            1,
            &[
                (1, 1, &[1, 1]),
                (1, 1, &[-1, -1]),
                (1, 1, &[1, -1]),
                (1, 1, &[-1, 1]),
            ],
        ));
        assert!(matches!(err, Err(GraphError::DegenerateOffsets { .. })));
    }

    #[test]
    fn bad_indices_rejected() {
        assert!(matches!(
            validate_graph(&desc(1, 1, &[(1, 2, &[1])])),
            Err(GraphError::InvalidDescription(_))
        ));
        assert!(matches!(
            validate_graph(&desc(1, 1, &[(1, 1, &[1, 0])])),
            Err(GraphError::InvalidDescription(_))
        ));
    }

    #[test]
    fn toml_round_trip_and_unknown_keys() {
        let text =
            "n = 1\norbits = 2\nedges = [[1, 2, [0]], [2, 1, [0]], [2, 1, [1]], [1, 2, [-1]]]\n";
        assert_eq!(
            PeriodicGraph::from_toml_str(text).unwrap().edges(),
            zigzag().edges()
        );
        let bad = format!("{text}colour = \"red\"\n");
        assert!(matches!(
            PeriodicGraph::from_toml_str(&bad),
            Err(GraphError::Parse(_))
        ));
    }

    #[test]
    fn builtins() {
        let c1 = cayley(1).unwrap();
        assert_eq!(c1.orbits(), 1);
        assert_eq!(
            c1.edges(),
            &[
                Edge {
                    from: 0,
                    to: 0,
                    offset: Cell(vec![1])
                },
                Edge {
                    from: 0,
                    to: 0,
                    offset: Cell(vec![-1])
                },
            ]
        );
        assert_eq!(honeycomb().degrees(), &[3, 3]);
        assert_eq!(builtin_graph("zigzag", 0).unwrap(), zigzag());
        assert!(matches!(
            builtin_graph("kagome", 2),
            Err(GraphError::UnknownBuiltin(_))
        ));
    }

    #[test]
    fn distances() {
        let z = zigzag();
        assert_eq!(
            graph_distance(&z, &Vertex::new(0, vec![0]), &Vertex::new(1, vec![0]), 5),
            Ok(1)
        );
        let c2 = cayley(2).unwrap();
        assert_eq!(
            graph_distance(
                &c2,
                &Vertex::new(0, vec![0, 0]),
                &Vertex::new(0, vec![2, 3]),
                10
            ),
            Ok(5)
        );
        assert_eq!(
            graph_distance(
                &c2,
                &Vertex::new(0, vec![0, 0]),
                &Vertex::new(0, vec![2, 3]),
                4
            ),
            Err(GraphError::CapExceeded { cap: 4 })
        );
        let h = honeycomb();
        let x = Vertex::new(1, vec![7, -2]);
        assert_eq!(graph_distance(&h, &x, &x, 0), Ok(0));
    }

    #[test]
    fn stencil_is_closed_under_reversal() {
        for g in [zigzag(), honeycomb(), cayley(3).unwrap()] {
            for e in g.edges() {
                let r = Edge {
                    from: e.to,
                    to: e.from,
                    offset: -&e.offset,
                };
                assert!(g.edges().contains(&r));
                assert_ne!(&r, e);
            }
        }
    }

    fn window(g: &PeriodicGraph, radius: i64) -> Vec<Vertex> {
        Cell::cube(g.rank(), radius)
            .into_iter()
            .flat_map(|c| (0..g.orbits()).map(move |j| Vertex::new(j, c.clone())))
            .collect()
    }

    #[test]
    fn metric_axioms_on_small_windows() {
        for g in [zigzag(), honeycomb(), cayley(2).unwrap()] {
            let radius = if g.rank() == 1 { 4 } else { 2 };
            let pts = window(&g, radius);
            let d: Vec<Vec<usize>> = pts
                .iter()
                .map(|x| {
                    pts.iter()
                        .map(|y| graph_distance(&g, x, y, 64).unwrap())
                        .collect()
                })
                .collect();
            for a in 0..pts.len() {
                assert_eq!(d[a][a], 0);
                for b in 0..pts.len() {
                    assert_eq!(d[a][b], d[b][a]);
                    assert_eq!(d[a][b] == 0, a == b);
                    for c in 0..pts.len() {
                        assert!(d[a][c] <= d[a][b] + d[b][c]);
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn distance_is_translation_invariant(
            a in proptest::collection::vec(-4i64..=4, 2),
            b in proptest::collection::vec(-4i64..=4, 2),
            shift in proptest::collection::vec(-50i64..=50, 2),
            ja in 0usize..2, jb in 0usize..2,
        ) {
            let g = honeycomb();
            let x = Vertex::new(ja, a);
            let y = Vertex::new(jb, b);
            let s = Cell(shift);
            let d0 = graph_distance(&g, &x, &y, 64).unwrap();
            let d1 = graph_distance(&g, &x.translated(&s), &y.translated(&s), 64).unwrap();
            prop_assert_eq!(d0, d1);
        }
    }
}
