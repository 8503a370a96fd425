use perispec::graph::{builtin_graph, graph_distance, GraphError, PeriodicGraph, Vertex};
use perispec::lattice::Cell;
use proptest::prelude::*;

const ZIGZAG: &str = r#"
n = 1
orbits = 2
labels = ["upper", "lower"]
edges = [[1, 2, [0]], [2, 1, [0]], [2, 1, [1]], [1, 2, [-1]]]
"#;

#[test]
fn zigzag_file_matches_builtin() {
    let g = PeriodicGraph::from_toml_str(ZIGZAG).unwrap();
    assert_eq!(g.degrees(), &[2, 2]);
    assert_eq!(g.labels().unwrap()[1], "lower");
    let builtin = builtin_graph("zigzag", 1).unwrap();
    let mut a = g.edges().to_vec();
    let mut b = builtin.edges().to_vec();
    a.sort();
    b.sort();
    assert_eq!(a, b);
}

#[test]
fn file_errors_are_named() {
    let err = PeriodicGraph::from_toml_str("n = 1\norbits = 1\nedges = [[1, 1, [0]]]").unwrap_err();
    assert!(matches!(err, GraphError::AntiReflexive { .. }));
    assert!(err.to_string().starts_with("AntiReflexive"));
    let err = PeriodicGraph::from_toml_str("n = 1\norbits = 2\nedges = [[1, 2, [0]]]").unwrap_err();
    assert!(err.to_string().starts_with("AsymmetricStencil"));
    assert!(matches!(
        builtin_graph("kagome", 2),
        Err(GraphError::UnknownBuiltin(_))
    ));
}

#[test]
fn distance_examples() {
    let z2 = builtin_graph("cayley", 2).unwrap();
    let o = Vertex::new(0, Cell(vec![0, 0]));
    assert_eq!(
        graph_distance(&z2, &o, &Vertex::new(0, Cell(vec![2, 3])), 10).unwrap(),
        5
    );
    assert!(matches!(
        graph_distance(&z2, &o, &Vertex::new(0, Cell(vec![2, 3])), 4),
        Err(GraphError::CapExceeded { .. })
    ));
    let zz = builtin_graph("zigzag", 1).unwrap();
    assert_eq!(
        graph_distance(
            &zz,
            &Vertex::new(0, Cell(vec![0])),
            &Vertex::new(1, Cell(vec![0])),
            3
        )
        .unwrap(),
        1
    );
}

proptest! {
    #[test]
    fn distance_is_translation_invariant(
        a in proptest::collection::vec(-3i64..=3, 2),
        b in proptest::collection::vec(-3i64..=3, 2),
        shift in proptest::collection::vec(-50i64..=50, 2),
        i in 0usize..2,
        j in 0usize..2,
    ) {
        let g = builtin_graph("honeycomb", 2).unwrap();
        let (x, y) = (Vertex::new(i, Cell(a)), Vertex::new(j, Cell(b)));
        let s = Cell(shift);
        prop_assert_eq!(
            graph_distance(&g, &x, &y, 30).unwrap(),
            graph_distance(&g, &x.translated(&s), &y.translated(&s), 30).unwrap()
        );
    }
}
