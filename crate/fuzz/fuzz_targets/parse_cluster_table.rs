#![no_main]

use dhrom::network::parse_network;
use dhrom::reduction::ClusterTable;
use libfuzzer_sys::fuzz_target;

const GRID: &str = include_str!("../../crates/core/tests/data/example_grid.toml");

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(table) = ClusterTable::parse(text) else { return };
    assert_eq!(ClusterTable::parse(&table.write()).ok().as_ref(), Some(&table));
    let net = parse_network(GRID).unwrap();
    if let Ok(clustering) = table.to_clustering(&net) {
        assert_eq!(clustering.node_count(), net.node_count());
    }
});
