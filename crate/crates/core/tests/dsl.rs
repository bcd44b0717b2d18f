use cgid::dsl::{parse_graph, parse_spec, render, render_spec, ErrorKind, GraphBody};
use cgid::gid::QSpec;
use cgid::graph::random::{random_graph, random_latent_graph, RandomGraphConfig};
use cgid::nodeset::NodeSet;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn causal_graphs_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = RandomGraphConfig { nodes: rng.gen_range(1..=9), edge_prob: 0.3, max_bidirected: 5 };
        let body = GraphBody::Causal(random_graph(&mut rng, &cfg));
        let text = render(&body);
        let doc = parse_graph(&text).unwrap();
        prop_assert_eq!(&doc.body, &body);
        prop_assert_eq!(doc.render(), text);
    }

    #[test]
    fn latent_graphs_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=6);
        let k = rng.gen_range(1..=3);
        let body = GraphBody::Latent(random_latent_graph(&mut rng, n, k, 0.3));
        let doc = parse_graph(&render(&body)).unwrap();
        prop_assert_eq!(doc.body, body);
    }

    #[test]
    fn specs_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = RandomGraphConfig { nodes: rng.gen_range(1..=6), edge_prob: 0.3, max_bidirected: 2 };
        let g = random_graph(&mut rng, &cfg);
        let mut sets = vec![g.nodes().clone()];
        for _ in 0..3 {
            let s: NodeSet = g.nodes().iter().filter(|_| rng.gen_bool(0.5)).collect();
            if !s.is_empty() && !sets.contains(&s) {
                sets.push(s);
            }
        }
        let spec = QSpec::from_sets(sets).unwrap();
        prop_assert_eq!(parse_spec(&render_spec(&spec, &g), &g).unwrap(), spec);
    }

    #[test]
    fn arbitrary_text_never_panics(text in "\\PC{0,200}") {
        let _ = parse_graph(&text);
    }

    #[test]
    fn near_miss_text_never_panics(text in "graph \\{[ a-zA-Z0-9_:;<>#\\-\n]{0,80}\\}?") {
        if let Err(e) = parse_graph(&text) {
            prop_assert!(e.span.line >= 1 && e.span.col >= 1);
            prop_assert!(e.span.offset + e.span.len <= text.len());
        }
    }

    #[test]
    fn truncated_documents_never_panic(cut in 0usize..200) {
        let text = "graph {\n  nodes: A B C;\n  A -> B; # note\n  B -> C;\n  A <-> C;\n}\n";
        let cut = cut.min(text.len());
        let _ = parse_graph(&text[..cut]);
    }
}

#[test]
fn errors_carry_positions() {
    let e = parse_graph("graph {\n  nodes: A B;\n  A -> C;\n}").unwrap_err();
    assert_eq!(e.kind, ErrorKind::UnknownNode);
    assert_eq!((e.span.line, e.span.col), (3, 8));
    let e = parse_graph("graph {\n  nodes: A B;\n  A -> B;\n  B -> A;\n}").unwrap_err();
    assert_eq!(e.kind, ErrorKind::Cycle);
    assert!(e.message.contains("A") && e.message.contains("B"));
    let e = parse_graph("graph { nodes: A B; A -> B; A -> B; }").unwrap_err();
    assert_eq!(e.kind, ErrorKind::DuplicateEdge);
}

#[test]
fn latent_declarations_project() {
    let doc = parse_graph("graph { nodes: X Y Z; X -> Y; latent U -> X Y Z; }").unwrap();
    let g = doc.graph();
    let (x, y, z) = (
        g.index_of("X").unwrap(),
        g.index_of("Y").unwrap(),
        g.index_of("Z").unwrap(),
    );
    assert!(g.has_bidirected(x, y) && g.has_bidirected(y, z) && g.has_bidirected(x, z));
    assert!(g.has_directed(x, y));
}
