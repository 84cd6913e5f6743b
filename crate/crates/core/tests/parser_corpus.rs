//! Replays the fuzz corpus and byte-level mutations of it through the
//! parsers, with the same checks as the fuzz targets.

use std::fs;
use std::path::PathBuf;

use dhrom::network::{parse_network, write_network, Network};
use dhrom::reduction::ClusterTable;
use dhrom::simulate::{FlowDriver, Scenario};
use proptest::prelude::*;

fn corpus(target: &str) -> Vec<String> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<_> = fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files.into_iter().map(|p| fs::read_to_string(p).unwrap()).collect()
}

fn grid() -> Network {
    parse_network(include_str!("data/example_grid.toml")).unwrap()
}

fn check_network(text: &str) {
    if let Ok(net) = parse_network(text) {
        let again = parse_network(&write_network(&net)).expect("written network parses");
        assert_eq!(again.node_count(), net.node_count());
        assert_eq!(again.pipe_count(), net.pipe_count());
    }
}

fn check_scenario(text: &str, net: &Network) {
    if let Ok(sc) = Scenario::parse(text) {
        if let Ok(resolved) = sc.resolve(net) {
            let _ = FlowDriver::new(net, resolved);
        }
    }
}

fn check_table(text: &str, net: &Network) {
    if let Ok(table) = ClusterTable::parse(text) {
        assert_eq!(ClusterTable::parse(&table.write()).ok().as_ref(), Some(&table));
        if let Ok(c) = table.to_clustering(net) {
            assert_eq!(c.node_count(), net.node_count());
        }
    }
}

#[test]
fn seeds_are_accepted() {
    let net = grid();
    for text in corpus("parse_network") {
        parse_network(&text).unwrap();
        check_network(&text);
    }
    for text in corpus("parse_scenario") {
        Scenario::parse(&text).unwrap().resolve(&net).unwrap();
    }
    for text in corpus("parse_cluster_table") {
        ClusterTable::parse(&text).unwrap().to_clustering(&net).unwrap();
        check_table(&text, &net);
    }
}

fn mutate(seed: &str, edits: &[(usize, u8, u8)]) -> String {
    let mut bytes = seed.as_bytes().to_vec();
    for &(pos, op, b) in edits {
        if bytes.is_empty() {
            break;
        }
        let i = pos % bytes.len();
        match op % 3 {
            0 => bytes[i] = b,
            1 => bytes.insert(i, b),
            _ => {
                bytes.remove(i);
            }
        }
    }
    String::from_utf8_lossy(&bytes).into_owned()
}

fn edits() -> impl Strategy<Value = Vec<(usize, u8, u8)>> {
    proptest::collection::vec((any::<usize>(), any::<u8>(), prop_oneof![b' '..=b'~', Just(b'\n')]), 1..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn mutated_networks_never_panic(which in 0usize..3, e in edits()) {
        let seeds = corpus("parse_network");
        check_network(&mutate(&seeds[which % seeds.len()], &e));
    }

    #[test]
    fn mutated_scenarios_never_panic(which in 0usize..3, e in edits()) {
        let seeds = corpus("parse_scenario");
        check_scenario(&mutate(&seeds[which % seeds.len()], &e), &grid());
    }

    #[test]
    fn mutated_tables_never_panic(which in 0usize..2, e in edits()) {
        let seeds = corpus("parse_cluster_table");
        check_table(&mutate(&seeds[which % seeds.len()], &e), &grid());
    }
}
